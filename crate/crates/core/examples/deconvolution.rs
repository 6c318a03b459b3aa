//! Recover a short input from a convolution with an imperfectly known
//! impulse response, comparing least squares with the iterative estimator.
//!
//! cargo run --example deconvolution

use iblue::{conv_matrix, iterative_blue, IterationConfig, LinearProblem, Matrix, UncertaintyModel, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> iblue::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x_true = Vector::new(vec![1.0, 0.5, 0.25])?;
    let h_true = Vector::new(vec![0.8, -1.1, 0.4, 1.6, -0.3])?;

    // the estimate of h is off by e ~ N(0, C_ee)
    let c_ee = Matrix::from_diag(&[1e-4, 1e-5, 1e-6, 1e-6, 1e-6]);
    let e: Vec<f64> = (0..5)
        .map(|i| Normal::new(0.0, c_ee[(i, i)].sqrt()).unwrap().sample(&mut rng))
        .collect();
    let h_hat = h_true.sub(&Vector::new(e)?)?;

    let sigma_sq = 1e-8;
    let noise = Normal::new(0.0, f64::sqrt(sigma_sq)).unwrap();
    let clean = conv_matrix(&h_true, 3)?.mul_vec(&x_true)?;
    let y = Vector::new(clean.iter().map(|v| v + noise.sample(&mut rng)).collect())?;

    let problem = LinearProblem::new(
        y,
        conv_matrix(&h_hat, 3)?,
        Matrix::identity(7).scale(sigma_sq),
        UncertaintyModel::convolution(c_ee, 3)?,
    )?;
    let trace = iterative_blue(&problem, &IterationConfig::fixed(5))?;

    println!("x_true      {:?}", x_true.as_slice());
    for (k, x) in trace.estimates.iter().enumerate() {
        let err = x.sub(&x_true)?.norm();
        let label = if k == 0 { "LS".to_string() } else { format!("iter {k}") };
        println!("{label:<11} {:?}  |err| = {err:.3e}", x.as_slice());
    }
    Ok(())
}

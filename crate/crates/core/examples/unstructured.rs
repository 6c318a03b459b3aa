//! A dense measurement matrix whose entries carry independent errors with
//! known variances.
//!
//! cargo run --example unstructured

use iblue::{blue, ls_estimate, iterative_blue, IterationConfig, LinearProblem, Matrix, UncertaintyModel, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> iblue::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (n_y, n_x) = (12, 4);
    let x_true = Vector::new(vec![2.0, -1.0, 0.5, 0.0])?;
    let h_true = Matrix::from_fn(n_y, n_x, |_, _| StandardNormal.sample(&mut rng));

    // some rows are much less reliable than others
    let v = Matrix::from_fn(n_y, n_x, |i, _| if i % 3 == 0 { 1e-2 } else { 1e-6 });
    let b = Matrix::from_fn(n_y, n_x, |i, j| {
        v[(i, j)].sqrt() * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    let h_hat = h_true.sub(&b)?;

    let sigma_sq = 1e-6;
    let y = h_true.mul_vec(&x_true)?;
    let y = Vector::new(y.iter().map(|v| v + 1e-3 * rng.random_range(-1.0..1.0)).collect())?;
    let c_nn = Matrix::identity(n_y).scale(sigma_sq);

    let ls = ls_estimate(&h_hat, &y)?;
    let noise_only = blue(&h_hat, &c_nn, &y)?;
    let problem = LinearProblem::new(y, h_hat, c_nn, UncertaintyModel::unstructured(v)?)?;
    let iterated = iterative_blue(&problem, &IterationConfig { n_iter: 20, stop_tol: 1e-10 })?;

    let err = |x: &Vector| x.sub(&x_true).map(|d| d.norm());
    println!("LS                 |err| = {:.3e}", err(&ls)?);
    println!("BLUE with C_nn     |err| = {:.3e}", err(&noise_only)?);
    println!(
        "iterative BLUE     |err| = {:.3e}  ({} iterations, stopped early: {})",
        err(iterated.last())?,
        iterated.iterations_run,
        iterated.stopped_early
    );
    Ok(())
}

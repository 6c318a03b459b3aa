//! Overall-noise covariance under both uncertainty models, and how it grows
//! with the parameter vector.
//!
//! cargo run --example noise_covariance

use iblue::uncertainty::convolution_variances;
use iblue::{build_px, cov_convolution, cov_unstructured, Matrix, Vector};

fn show(label: &str, m: &Matrix) {
    println!("{label}");
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:>10.2e}")).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> iblue::Result<()> {
    let x = Vector::new(vec![1.0, 0.5, 0.25])?;
    let c_ee = Matrix::from_diag(&[1e-4, 1e-5, 1e-6, 1e-6, 1e-6]);
    let c_nn = Matrix::identity(7).scale(1e-6);

    show("P(x):", &build_px(&x, 7)?);
    let conv = cov_convolution(&c_ee, &x, &c_nn)?;
    show("C_ww, convolution model:", &conv);

    // same per-entry variances but independent entries: only the diagonal survives
    let v = convolution_variances(&c_ee, 3);
    let unstructured = cov_unstructured(&v, &x, &c_nn)?;
    let gap = conv
        .diag()
        .iter()
        .zip(unstructured.diag())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / b));
    println!("largest relative diagonal difference: {gap:.1e}");

    // doubling x scales the matrix part by four
    let x2 = x.scale(2.0);
    let grown = cov_convolution(&c_ee, &x2, &c_nn)?;
    println!(
        "C_ww[0,0]: {:.3e} at x, {:.3e} at 2x (noise floor {:.1e})",
        conv[(0, 0)],
        grown[(0, 0)],
        c_nn[(0, 0)]
    );
    Ok(())
}

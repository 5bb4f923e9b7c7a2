//! Central finite differences, used to cross-check analytic gradients.

use nalgebra::DMatrix;

/// `∂f/∂x_ij ≈ (f(x + h·e_ij) − f(x − h·e_ij)) / 2h` for every entry.
pub fn central_difference<F>(x: &DMatrix<f64>, h: f64, mut f: F) -> DMatrix<f64>
where
    F: FnMut(&DMatrix<f64>) -> f64,
{
    let mut probe = x.clone();
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        let orig = probe[(i, j)];
        probe[(i, j)] = orig + h;
        let up = f(&probe);
        probe[(i, j)] = orig - h;
        let down = f(&probe);
        probe[(i, j)] = orig;
        (up - down) / (2.0 * h)
    })
}

/// `|a − b| / max(|a|, |b|)`, and 0 when both are 0.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

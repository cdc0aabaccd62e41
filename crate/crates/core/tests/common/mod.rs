#![allow(dead_code)]

use nalgebra::DMatrix;
use penproj::linalg::C64;

/// `e^{At} v0 + ∫₀ᵗ e^{As} b ds` from the exponential of `[[A, b], [0, 0]]`.
pub fn dense_solve(a: &DMatrix<C64>, b: Option<&[C64]>, v0: &[C64], t: f64) -> Vec<C64> {
    let n = a.nrows();
    let mut m = DMatrix::<C64>::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    if let Some(b) = b {
        for i in 0..n {
            m[(i, n)] = b[i];
        }
    }
    let e = (m * C64::new(t, 0.0)).exp();
    let mut x = v0.to_vec();
    x.push(C64::new(1.0, 0.0));
    let y = e * DMatrix::from_column_slice(n + 1, 1, &x);
    y.as_slice()[..n].to_vec()
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

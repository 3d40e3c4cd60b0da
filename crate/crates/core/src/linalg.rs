//! Small dense helpers: Perron roots of nonnegative matrices and checked solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PERRON_TOL: f64 = 1e-12;
const PERRON_MAX_ITER: usize = 20_000;

/// Spectral radius of a nonnegative square matrix.
///
/// Power iteration runs on `A + I`, which shares the Perron vector of `A`, is
/// primitive whenever `A` is irreducible, and keeps every iterate strictly
/// positive. The Collatz-Wielandt ratios `min_i (Bx)_i / x_i` and
/// `max_i (Bx)_i / x_i` bracket `rho(A + I)`; iteration stops once the bracket is
/// tighter than `1e-12` relative. Reducible matrices may never close the lower
/// side, in which case the upper bound (which does converge) is returned.
pub fn perron_root(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "perron_root needs a square matrix");
    if n == 0 {
        return 0.0;
    }
    debug_assert!(a.iter().all(|v| *v >= 0.0), "perron_root needs a nonnegative matrix");
    let mut x = DVector::from_element(n, 1.0);
    let mut upper = f64::INFINITY;
    for _ in 0..PERRON_MAX_ITER {
        let y = a * &x + &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        upper = upper.min(hi);
        if hi - lo <= PERRON_TOL * hi {
            return (0.5 * (lo + hi) - 1.0).max(0.0);
        }
        let norm = y.max();
        x = y / norm;
    }
    (upper - 1.0).max(0.0)
}

/// Solves `a x = b`, reporting a singular or non-finite system as degenerate.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Degenerate(format!("{what}: singular system")))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Degenerate(format!("{what}: non-finite solution")))
    }
}

/// Largest absolute entry of a residual relative to the largest entry of a reference.
pub fn rel_residual(residual: &DVector<f64>, reference: &DVector<f64>) -> f64 {
    let scale = reference.amax().max(f64::MIN_POSITIVE);
    residual.amax() / scale
}

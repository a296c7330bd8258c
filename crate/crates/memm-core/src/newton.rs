//! Safeguarded scalar root finding: Newton steps inside a maintained
//! bracket, falling back to bisection whenever a step leaves the bracket
//! or fails to make progress.

use crate::error::{MemmError, Result};

/// Outcome of a bracketed solve.
#[derive(Debug, Clone, Copy)]
pub struct RootResult {
    pub root: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Finds the root of a strictly increasing `f` inside `[lo, hi]`.
///
/// `f` returns the pair `(value, derivative)`. Convergence is declared when
/// `|value| <= tol`. The bracket must satisfy `f(lo) <= 0 <= f(hi)`.
pub fn newton_bisect(
    mut f: impl FnMut(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<RootResult> {
    debug_assert!(lo <= hi);
    let (flo, _) = f(lo);
    if flo.abs() <= tol {
        return Ok(RootResult {
            root: lo,
            residual: flo,
            iterations: 0,
        });
    }
    let (fhi, _) = f(hi);
    if fhi.abs() <= tol {
        return Ok(RootResult {
            root: hi,
            residual: fhi,
            iterations: 0,
        });
    }
    if flo > 0.0 || fhi < 0.0 {
        return Err(MemmError::Corruption(format!(
            "root bracket [{lo}, {hi}] does not straddle zero: f(lo)={flo}, f(hi)={fhi}"
        )));
    }

    let mut x = 0.5 * (lo + hi);
    for it in 1..=max_iter {
        let (fx, dfx) = f(x);
        if !fx.is_finite() {
            return Err(MemmError::NonFinite {
                context: "root function value".into(),
                location: format!("x={x}"),
            });
        }
        if fx.abs() <= tol {
            return Ok(RootResult {
                root: x,
                residual: fx,
                iterations: it,
            });
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = if dfx > 0.0 && dfx.is_finite() {
            x - fx / dfx
        } else {
            f64::NAN
        };
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        // Bracket collapsed to adjacent floats: accept the better endpoint.
        if !(lo < x && x < hi) {
            let (flo2, _) = f(lo);
            let (fhi2, _) = f(hi);
            let (root, residual) = if flo2.abs() <= fhi2.abs() {
                (lo, flo2)
            } else {
                (hi, fhi2)
            };
            if residual.abs() <= tol {
                return Ok(RootResult {
                    root,
                    residual,
                    iterations: it,
                });
            }
            return Err(MemmError::RootNoConvergence {
                iterations: it,
                lo,
                hi,
                residual: residual.abs(),
            });
        }
    }
    let (fx, _) = f(x);
    Err(MemmError::RootNoConvergence {
        iterations: max_iter,
        lo,
        hi,
        residual: fx.abs(),
    })
}

/// Expands `[lo, hi]` geometrically around its center until the increasing
/// function `f` straddles zero, then solves with [`newton_bisect`].
pub fn newton_with_expansion(
    mut f: impl FnMut(f64) -> (f64, f64),
    lo0: f64,
    hi0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<RootResult> {
    let mut lo = lo0.min(hi0);
    let mut hi = lo0.max(hi0);
    let mut width = (hi - lo).max(1e-8);
    for _ in 0..64 {
        let (flo, _) = f(lo);
        let (fhi, _) = f(hi);
        if flo <= 0.0 && fhi >= 0.0 {
            return newton_bisect(f, lo, hi, tol, max_iter);
        }
        width *= 2.0;
        if flo > 0.0 {
            lo -= width;
        }
        if fhi < 0.0 {
            hi += width;
        }
        if !lo.is_finite() || !hi.is_finite() {
            break;
        }
    }
    Err(MemmError::RootNoConvergence {
        iterations: 0,
        lo,
        hi,
        residual: f64::INFINITY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_simple_increasing_function() {
        // x^3 + x - 1 = 0, root ~ 0.6823278038280193
        let r = newton_bisect(
            |x| (x * x * x + x - 1.0, 3.0 * x * x + 1.0),
            0.0,
            1.0,
            1e-14,
            100,
        )
        .unwrap();
        assert!((r.root - 0.682_327_803_828_019_3).abs() < 1e-12);
    }

    #[test]
    fn expansion_finds_far_root() {
        let r = newton_with_expansion(|x| (x - 1000.0, 1.0), -1.0, 1.0, 1e-12, 200).unwrap();
        assert!((r.root - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn reports_bad_bracket() {
        let err = newton_bisect(|x| (x + 10.0, 1.0), 0.0, 1.0, 1e-12, 50).unwrap_err();
        assert!(matches!(err, MemmError::Corruption(_)));
    }

    #[test]
    fn iteration_limit_is_an_error() {
        let err = newton_bisect(|x| (x, 1.0), -1.0, 1.0, -1.0, 3);
        assert!(matches!(err, Err(MemmError::RootNoConvergence { .. })));
    }
}

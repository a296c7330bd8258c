//! Finite-activity atomic Lévy measures.
//!
//! Every jump integral in the solver is over the same measure `nu`, so a
//! finite list of atoms `(x_i, w_i)` makes all of them exact weighted sums.
//! Continuous densities enter only through an explicit quadrature that
//! produces atoms (see [`LevyMeasure::from_exponential_density`]).

use serde::{Deserialize, Serialize};

use crate::error::{MemmError, Result};

/// One jump mark: size `x` with intensity `w` per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub w: f64,
}

/// Finite atomic jump measure `nu = sum_i w_i * delta_{x_i}`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LevyMeasure {
    atoms: Vec<Atom>,
}

impl LevyMeasure {
    /// The empty measure (no jumps).
    pub fn empty() -> Self {
        LevyMeasure { atoms: Vec::new() }
    }

    /// Builds a measure from `(size, intensity)` pairs.
    ///
    /// Intensities must be strictly positive and sizes pairwise distinct.
    pub fn new(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms: Vec<Atom> = pairs.into_iter().map(|(x, w)| Atom { x, w }).collect();
        for (i, a) in atoms.iter().enumerate() {
            if !a.x.is_finite() || !a.w.is_finite() {
                return Err(MemmError::InvalidModel(format!(
                    "atom {i} has non-finite entries (x={}, w={})",
                    a.x, a.w
                )));
            }
            if a.w <= 0.0 {
                return Err(MemmError::InvalidModel(format!(
                    "atom {i} has non-positive intensity w={}",
                    a.w
                )));
            }
        }
        for i in 0..atoms.len() {
            for j in (i + 1)..atoms.len() {
                if atoms[i].x == atoms[j].x {
                    return Err(MemmError::InvalidModel(format!(
                        "atoms {i} and {j} share the jump size x={}",
                        atoms[i].x
                    )));
                }
            }
        }
        Ok(LevyMeasure { atoms })
    }

    /// Midpoint quadrature of the exponential-tail density `a e^{-b x}` on
    /// `(0, x_max]`, discretized into `n` atoms.
    ///
    /// The atom at `x_j = (j - 1/2) x_max / n` carries intensity
    /// `a e^{-b x_j} x_max / n`. The mass beyond `x_max` is dropped; choose
    /// `x_max` as a multiple of `1/b` so the truncated tail is negligible.
    pub fn from_exponential_density(a: f64, b: f64, n: usize, x_max: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && x_max > 0.0) || n == 0 {
            return Err(MemmError::InvalidModel(
                "exponential density requires a > 0, b > 0, x_max > 0, n >= 1".into(),
            ));
        }
        let h = x_max / n as f64;
        LevyMeasure::new((1..=n).map(|j| {
            let x = (j as f64 - 0.5) * h;
            (x, a * (-b * x).exp() * h)
        }))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total jump intensity `nu(R)`.
    pub fn total_intensity(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    /// Returns a copy with every intensity scaled by `factor` (used to
    /// materialize compensator rescalings such as `nu~ = lambda nu`).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        LevyMeasure::new(self.atoms.iter().map(|a| (a.x, a.w * factor)))
    }

    /// Integrates `f` against the measure: `sum_i w_i f(x_i)`.
    ///
    /// Errors if `f` is non-finite at any atom, naming the offending atom.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.atoms.len());
        for (i, a) in self.atoms.iter().enumerate() {
            let v = f(a.x);
            if !v.is_finite() {
                return Err(MemmError::NonFinite {
                    context: format!("integrand value {v}"),
                    location: format!("atom {i} (x={}, w={})", a.x, a.w),
                });
            }
            terms.push(a.w * v);
        }
        Ok(crate::stats::pairwise_sum(&terms))
    }

    /// Integrates per-atom values `vals[i]` against the measure.
    pub fn integrate_values(&self, vals: &[f64]) -> f64 {
        debug_assert_eq!(vals.len(), self.atoms.len());
        let terms: Vec<f64> = self
            .atoms
            .iter()
            .zip(vals)
            .map(|(a, v)| a.w * v)
            .collect();
        crate::stats::pairwise_sum(&terms)
    }
}

/// Free-function form of [`LevyMeasure::integrate`].
pub fn nu_integral(measure: &LevyMeasure, f: impl FnMut(f64) -> f64) -> Result<f64> {
    measure.integrate(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn weighted_sum_example() {
        let nu = LevyMeasure::new([(1.0, 0.5), (2.0, 0.5)]).unwrap();
        assert_eq!(nu.integrate(|x| x).unwrap(), 1.5);
    }

    #[test]
    fn empty_measure_integrates_to_zero() {
        let nu = LevyMeasure::empty();
        assert_eq!(nu.integrate(|x| x.exp()).unwrap(), 0.0);
    }

    #[test]
    fn single_atom_square() {
        let nu = LevyMeasure::new([(0.3, 2.0)]).unwrap();
        let v = nu.integrate(|x| x * x).unwrap();
        assert!((v - 0.18).abs() < 1e-15);
    }

    #[test]
    fn non_finite_integrand_names_the_atom() {
        let nu = LevyMeasure::new([(1.0, 0.5), (-1.0, 0.5)]).unwrap();
        let err = nu.integrate(|x| x.ln()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("atom 1"), "unexpected message: {msg}");
    }

    #[test]
    fn rejects_duplicate_sizes_and_bad_weights() {
        assert!(LevyMeasure::new([(1.0, 0.5), (1.0, 0.2)]).is_err());
        assert!(LevyMeasure::new([(1.0, 0.0)]).is_err());
        assert!(LevyMeasure::new([(1.0, -2.0)]).is_err());
    }

    #[test]
    fn exponential_quadrature_mass_and_mean() {
        // nu = a e^{-bx}: total mass a/b, mean size 1/b.
        let (a, b) = (100.0, 50.0);
        let nu = LevyMeasure::from_exponential_density(a, b, 400, 16.0 / b).unwrap();
        let mass = nu.total_intensity();
        let mean = nu.integrate(|x| x).unwrap() / mass;
        assert!((mass - a / b).abs() / (a / b) < 1e-3, "mass {mass}");
        assert!((mean - 1.0 / b).abs() / (1.0 / b) < 1e-2, "mean {mean}");
    }

    proptest! {
        #[test]
        fn integral_is_linear(
            xs in proptest::collection::vec(-2.0f64..2.0, 1..6),
            c in -3.0f64..3.0,
        ) {
            let pairs: Vec<(f64, f64)> = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| (x + 10.0 * i as f64, 0.5 + 0.1 * i as f64))
                .collect();
            let nu = LevyMeasure::new(pairs).unwrap();
            let f = |x: f64| x.sin();
            let g = |x: f64| x * x;
            let lhs = nu.integrate(|x| f(x) + c * g(x)).unwrap();
            let rhs = nu.integrate(f).unwrap() + c * nu.integrate(g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
        }

        #[test]
        fn integral_is_monotone(
            xs in proptest::collection::vec(-2.0f64..2.0, 1..6),
            bump in 0.0f64..1.0,
        ) {
            let pairs: Vec<(f64, f64)> = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| (x + 10.0 * i as f64, 0.25 + 0.2 * i as f64))
                .collect();
            let nu = LevyMeasure::new(pairs).unwrap();
            let lo = nu.integrate(|x| x.cos()).unwrap();
            let hi = nu.integrate(|x| x.cos() + bump).unwrap();
            prop_assert!(lo <= hi + 1e-12);
        }
    }
}

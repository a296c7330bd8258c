//! Market model: coefficient functions of the price/volatility dynamics and
//! the runtime validation of the standing assumptions.
//!
//! Coefficients are opaque pure callables of `(t, y)` or `(t, y, x)`. The
//! artifact never differentiates them; the smoothness requirements (bounded
//! y-derivatives, local Lipschitz continuity in t) are the caller's contract
//! and are only stated here, not checked.

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{MemmError, Result};
use crate::measure::LevyMeasure;

/// Coefficient of `(t, y)`.
pub type Coef2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Jump coefficient of `(t, y, x)`.
pub type Coef3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Jump-diffusion stochastic volatility market on the state domain
/// `E = [y_lo, y_hi]` and horizon `[0, T]`.
#[derive(Clone)]
pub struct MarketModel {
    /// Relative price drift rate.
    pub eta_m: Coef2,
    /// Price diffusion coefficient (against the Brownian part of Y).
    pub sigma_m: Coef2,
    /// Relative price jump per mark x; must stay above -1.
    pub w_m: Coef3,
    /// Volatility drift rate.
    pub eta_v: Coef2,
    /// Volatility jump per mark x.
    pub w_v: Coef3,
    /// State domain `[y_lo, y_hi]`.
    pub domain: (f64, f64),
    /// Time horizon.
    pub horizon: f64,
    /// Initial price.
    pub s0: f64,
    /// Initial volatility state, inside the domain.
    pub v0: f64,
    /// Jump measure.
    pub measure: LevyMeasure,
}

impl fmt::Debug for MarketModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarketModel")
            .field("domain", &self.domain)
            .field("horizon", &self.horizon)
            .field("s0", &self.s0)
            .field("v0", &self.v0)
            .field("atoms", &self.measure.len())
            .finish()
    }
}

impl MarketModel {
    pub fn builder() -> MarketModelBuilder {
        MarketModelBuilder::default()
    }

    /// Clamps `y` into the state domain.
    pub fn clamp_y(&self, y: f64) -> f64 {
        y.clamp(self.domain.0, self.domain.1)
    }

    /// Per-atom values of `W^M(t, y, .)`.
    pub fn w_m_atoms(&self, t: f64, y: f64) -> Vec<f64> {
        self.measure
            .atoms()
            .iter()
            .map(|a| (self.w_m)(t, y, a.x))
            .collect()
    }

    /// Per-atom values of `W^V(t, y, .)`.
    pub fn w_v_atoms(&self, t: f64, y: f64) -> Vec<f64> {
        self.measure
            .atoms()
            .iter()
            .map(|a| (self.w_v)(t, y, a.x))
            .collect()
    }
}

/// Builder for [`MarketModel`]. Coefficients default to zero except
/// `sigma_m`, which is required.
#[derive(Default)]
pub struct MarketModelBuilder {
    eta_m: Option<Coef2>,
    sigma_m: Option<Coef2>,
    w_m: Option<Coef3>,
    eta_v: Option<Coef2>,
    w_v: Option<Coef3>,
    domain: Option<(f64, f64)>,
    horizon: Option<f64>,
    s0: Option<f64>,
    v0: Option<f64>,
    measure: Option<LevyMeasure>,
}

impl MarketModelBuilder {
    pub fn eta_m(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.eta_m = Some(Arc::new(f));
        self
    }
    pub fn sigma_m(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.sigma_m = Some(Arc::new(f));
        self
    }
    pub fn w_m(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.w_m = Some(Arc::new(f));
        self
    }
    pub fn eta_v(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.eta_v = Some(Arc::new(f));
        self
    }
    pub fn w_v(mut self, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.w_v = Some(Arc::new(f));
        self
    }
    pub fn domain(mut self, y_lo: f64, y_hi: f64) -> Self {
        self.domain = Some((y_lo, y_hi));
        self
    }
    pub fn horizon(mut self, t: f64) -> Self {
        self.horizon = Some(t);
        self
    }
    pub fn s0(mut self, s0: f64) -> Self {
        self.s0 = Some(s0);
        self
    }
    pub fn v0(mut self, v0: f64) -> Self {
        self.v0 = Some(v0);
        self
    }
    pub fn measure(mut self, m: LevyMeasure) -> Self {
        self.measure = Some(m);
        self
    }

    pub fn build(self) -> Result<MarketModel> {
        let sigma_m = self
            .sigma_m
            .ok_or_else(|| MemmError::InvalidModel("sigma_m is required".into()))?;
        let domain = self
            .domain
            .ok_or_else(|| MemmError::InvalidModel("domain is required".into()))?;
        if !(domain.0 < domain.1) || !domain.0.is_finite() || !domain.1.is_finite() {
            return Err(MemmError::InvalidModel(format!(
                "domain [{}, {}] must be a finite interval",
                domain.0, domain.1
            )));
        }
        let horizon = self
            .horizon
            .ok_or_else(|| MemmError::InvalidModel("horizon is required".into()))?;
        if !(horizon > 0.0) {
            return Err(MemmError::InvalidModel("horizon must be > 0".into()));
        }
        let s0 = self.s0.unwrap_or(1.0);
        if !(s0 > 0.0) {
            return Err(MemmError::InvalidModel("s0 must be > 0".into()));
        }
        let v0 = self.v0.unwrap_or(0.5 * (domain.0 + domain.1));
        if !(domain.0 <= v0 && v0 <= domain.1) {
            return Err(MemmError::InvalidModel(format!(
                "v0={v0} lies outside the domain [{}, {}]",
                domain.0, domain.1
            )));
        }
        Ok(MarketModel {
            eta_m: self.eta_m.unwrap_or_else(|| Arc::new(|_, _| 0.0)),
            sigma_m,
            w_m: self.w_m.unwrap_or_else(|| Arc::new(|_, _, _| 0.0)),
            eta_v: self.eta_v.unwrap_or_else(|| Arc::new(|_, _| 0.0)),
            w_v: self.w_v.unwrap_or_else(|| Arc::new(|_, _, _| 0.0)),
            domain,
            horizon,
            s0,
            v0,
            measure: self.measure.unwrap_or_else(LevyMeasure::empty),
        })
    }
}

/// Market price of risk scaled by the full bracket of the martingale part:
/// `lambda_hat = eta_M / ((sigma_M)^2 + int (W_M)^2 nu(dx))`.
pub fn lambda_hat(model: &MarketModel, t: f64, y: f64) -> f64 {
    let eta = (model.eta_m)(t, y);
    let sig = (model.sigma_m)(t, y);
    let jm2 = model
        .measure
        .atoms()
        .iter()
        .map(|a| {
            let wm = (model.w_m)(t, y, a.x);
            a.w * wm * wm
        })
        .sum::<f64>();
    eta / (sig * sig + jm2)
}

/// One violated assumption found on the validation grid.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    /// Assumption label, e.g. `3.1.2 sigma_M`.
    pub assumption: String,
    pub t: f64,
    pub y: f64,
    pub observed: f64,
    pub message: String,
}

/// Result of sweeping the standing assumptions over a sampling grid.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    /// Smallest diffusion coefficient seen on the grid.
    pub sigma_min: f64,
    /// Largest |lambda_hat| seen on the grid.
    pub lambda_hat_max: f64,
}

/// Floor below which `sigma_M` counts as "not bounded away from zero".
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Sweeps the model assumptions on an `nt x ny` grid over `[0,T] x E`:
/// diffusion bounded away from zero, relative price jumps above -1,
/// `lambda_hat` finite, and integrable volatility jumps. Coefficient
/// panics and non-finite values are recorded as violations, not crashes.
pub fn validate_model(model: &MarketModel, nt: usize, ny: usize) -> Result<ValidationReport> {
    if nt < 2 || ny < 2 {
        return Err(MemmError::InvalidModel(
            "validation grid needs at least 2 nodes per axis".into(),
        ));
    }
    let mut violations = Vec::new();
    let mut sigma_min = f64::INFINITY;
    let mut lam_max: f64 = 0.0;

    let eval = |f: &dyn Fn() -> f64| -> std::result::Result<f64, String> {
        match catch_unwind(AssertUnwindSafe(f)) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(v) => Err(format!("non-finite value {v}")),
            Err(_) => Err("coefficient evaluation panicked".into()),
        }
    };

    for i in 0..nt {
        let t = model.horizon * i as f64 / (nt - 1) as f64;
        for j in 0..ny {
            let y = model.domain.0
                + (model.domain.1 - model.domain.0) * j as f64 / (ny - 1) as f64;

            match eval(&|| (model.sigma_m)(t, y)) {
                Ok(sig) => {
                    sigma_min = sigma_min.min(sig);
                    if sig <= SIGMA_FLOOR {
                        violations.push(Violation {
                            assumption: "3.1.2 sigma_M".into(),
                            t,
                            y,
                            observed: sig,
                            message: "sigma_M not bounded away from zero".into(),
                        });
                    }
                }
                Err(msg) => violations.push(Violation {
                    assumption: "3.1.2 sigma_M".into(),
                    t,
                    y,
                    observed: f64::NAN,
                    message: msg,
                }),
            }

            for (k, atom) in model.measure.atoms().iter().enumerate() {
                match eval(&|| (model.w_m)(t, y, atom.x)) {
                    Ok(wm) => {
                        if wm <= -1.0 {
                            violations.push(Violation {
                                assumption: "3.1.2 W_M range".into(),
                                t,
                                y,
                                observed: wm,
                                message: format!(
                                    "W_M(atom {k}, x={}) = {wm} outside (-1, inf)",
                                    atom.x
                                ),
                            });
                        }
                    }
                    Err(msg) => violations.push(Violation {
                        assumption: "3.1.2 W_M range".into(),
                        t,
                        y,
                        observed: f64::NAN,
                        message: format!("atom {k}: {msg}"),
                    }),
                }
                if let Err(msg) = eval(&|| (model.w_v)(t, y, atom.x)) {
                    violations.push(Violation {
                        assumption: "3.1.5 W_V integrable".into(),
                        t,
                        y,
                        observed: f64::NAN,
                        message: format!("atom {k}: {msg}"),
                    });
                }
            }

            match eval(&|| lambda_hat(model, t, y)) {
                Ok(lam) => lam_max = lam_max.max(lam.abs()),
                Err(msg) => violations.push(Violation {
                    assumption: "3.1.4 lambda_hat bounded".into(),
                    t,
                    y,
                    observed: f64::NAN,
                    message: msg,
                }),
            }

            if let Err(msg) = eval(&|| (model.eta_v)(t, y)) {
                violations.push(Violation {
                    assumption: "3.1.1 eta_V".into(),
                    t,
                    y,
                    observed: f64::NAN,
                    message: msg,
                });
            }
            if let Err(msg) = eval(&|| (model.eta_m)(t, y)) {
                violations.push(Violation {
                    assumption: "3.1.2 eta_M".into(),
                    t,
                    y,
                    observed: f64::NAN,
                    message: msg,
                });
            }
        }
    }

    Ok(ValidationReport {
        passed: violations.is_empty(),
        violations,
        sigma_min,
        lambda_hat_max: lam_max,
    })
}

/// Validates with the default 64x64 grid and converts violations into an
/// error, for call sites that require a clean model.
pub fn require_valid(model: &MarketModel) -> Result<()> {
    let report = validate_model(model, 64, 64)?;
    if report.passed {
        Ok(())
    } else {
        Err(MemmError::ValidationFailed {
            count: report.violations.len(),
            first: format!(
                "{}: {}",
                report.violations[0].assumption, report.violations[0].message
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_model(eta: f64, sigma: f64, measure: LevyMeasure) -> MarketModel {
        MarketModel::builder()
            .eta_m(move |_, _| eta)
            .sigma_m(move |_, _| sigma)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .v0(1.0)
            .measure(measure)
            .build()
            .unwrap()
    }

    #[test]
    fn lambda_hat_flat_case() {
        let m = flat_model(0.08, 0.2, LevyMeasure::empty());
        assert!((lambda_hat(&m, 0.3, 1.2) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_hat_zero_drift() {
        let m = flat_model(0.0, 0.2, LevyMeasure::empty());
        assert_eq!(lambda_hat(&m, 0.0, 1.0), 0.0);
    }

    #[test]
    fn lambda_hat_scales_with_drift() {
        let nu = LevyMeasure::new([(1.0, 0.5)]).unwrap();
        let m1 = MarketModel::builder()
            .eta_m(|_, _| 0.05)
            .sigma_m(|_, _| 0.25)
            .w_m(|_, _, x| 0.1 * x)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .measure(nu.clone())
            .build()
            .unwrap();
        let m2 = MarketModel::builder()
            .eta_m(|_, _| 0.10)
            .sigma_m(|_, _| 0.25)
            .w_m(|_, _, x| 0.1 * x)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .measure(nu)
            .build()
            .unwrap();
        let l1 = lambda_hat(&m1, 0.4, 0.9);
        let l2 = lambda_hat(&m2, 0.4, 0.9);
        assert!((l2 - 2.0 * l1).abs() < 1e-14);
    }

    #[test]
    fn validation_passes_for_benign_constants() {
        let nu = LevyMeasure::new([(1.0, 0.5)]).unwrap();
        let m = MarketModel::builder()
            .eta_m(|_, _| 0.08)
            .sigma_m(|_, _| 0.2)
            .w_m(|_, _, _| 0.1)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .measure(nu)
            .build()
            .unwrap();
        let r = validate_model(&m, 8, 8).unwrap();
        assert!(r.passed, "violations: {:?}", r.violations);
        assert!(r.sigma_min >= 0.2);
    }

    #[test]
    fn vanishing_sigma_is_flagged() {
        let m = MarketModel::builder()
            .eta_m(|_, _| 0.08)
            .sigma_m(|t, _| if t > 0.9 { 0.0 } else { 0.2 })
            .domain(0.5, 2.0)
            .horizon(1.0)
            .build()
            .unwrap();
        let r = validate_model(&m, 16, 4).unwrap();
        assert!(!r.passed);
        assert!(r
            .violations
            .iter()
            .any(|v| v.assumption.contains("sigma_M")));
    }

    #[test]
    fn price_jump_below_minus_one_is_flagged() {
        let nu = LevyMeasure::new([(1.0, 0.5)]).unwrap();
        let m = MarketModel::builder()
            .eta_m(|_, _| 0.08)
            .sigma_m(|_, _| 0.2)
            .w_m(|_, _, _| -1.5)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .measure(nu)
            .build()
            .unwrap();
        let r = validate_model(&m, 4, 4).unwrap();
        assert!(!r.passed);
        assert!(r.violations.iter().any(|v| v.assumption.contains("W_M")));
    }

    #[test]
    fn panicking_coefficient_is_a_violation_not_a_crash() {
        let m = MarketModel::builder()
            .eta_m(|_, _| panic!("boom"))
            .sigma_m(|_, _| 0.2)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .build()
            .unwrap();
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let r = validate_model(&m, 2, 2).unwrap();
        std::panic::set_hook(prev);
        assert!(!r.passed);
        assert!(r.violations.iter().any(|v| v.message.contains("panic")));
    }

    #[test]
    fn empty_measure_reduces_jump_checks_to_vacuous() {
        let m = flat_model(0.08, 0.2, LevyMeasure::empty());
        let r = validate_model(&m, 8, 8).unwrap();
        assert!(r.passed);
        // still enforces the diffusion floor
        let bad = MarketModel::builder()
            .sigma_m(|_, _| 0.0)
            .domain(0.0, 1.0)
            .horizon(1.0)
            .build()
            .unwrap();
        assert!(!validate_model(&bad, 2, 2).unwrap().passed);
    }
}

//! Reduced solvers for the three tractable model families: deterministic
//! volatility (scalar drift equation), orthogonal volatility (linear
//! transport after an exponential transform), and the OU-subordinator
//! stochastic volatility model with leverage. They double as independent
//! oracles for the general solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{MemmError, Result};
use crate::grid::{Grid, Surface};
use crate::ipde::{picard_solve, PicardConfig, PicardSolution, SourceKind};
use crate::kernel::MemmFields;
use crate::measure::LevyMeasure;
use crate::model::{lambda_hat, MarketModel};
use crate::montecarlo::PathSample;
use crate::newton::newton_with_expansion;
use crate::stats::quantile;

/// Solves the deterministic-volatility drift equation at `(t, y)`:
///
/// ```text
/// eta_M + sigma_M^2 phi + int W_M(x) (e^{phi W_M(x)} - 1) nu(dx) = 0
/// ```
///
/// The left side is strictly increasing in `phi`, so the root is unique.
/// Residual is driven below 1e-12.
pub fn solve_deterministic_phi(model: &MarketModel, t: f64, y: f64) -> Result<f64> {
    let eta = (model.eta_m)(t, y);
    let sig2 = {
        let s = (model.sigma_m)(t, y);
        s * s
    };
    let wm = model.w_m_atoms(t, y);
    let weights: Vec<f64> = model.measure.atoms().iter().map(|a| a.w).collect();
    let f = |phi: f64| {
        let mut val = eta + sig2 * phi;
        let mut deriv = sig2;
        for (w, m) in weights.iter().zip(&wm) {
            let e = (phi * m).exp();
            val += w * m * (e - 1.0);
            deriv += w * m * m * e;
        }
        (val, deriv)
    };
    let guess = -eta / sig2;
    let r = newton_with_expansion(f, guess - 1.0, guess + 1.0, 1e-12, 200)?;
    Ok(r.root)
}

/// Output of the orthogonal-volatility solver.
#[derive(Debug, Clone)]
pub struct OrthogonalSolution {
    /// Solution of the linear transport problem with terminal value 1.
    pub v: Surface,
    /// `u = ln v`, the value function of the general formulation.
    pub u: Surface,
    pub fields: MemmFields,
    pub report: crate::ipde::FixedPointReport,
}

/// Solves the orthogonal-volatility case (`W_M == 0`): the linear problem
///
/// ```text
/// dv/dt + eta_V dv/dy - 1/2 lh^2 sig^2 v + int (v(t, y + W_V) - v) nu = 0,
/// v(T, .) = 1
/// ```
///
/// and assembles the measure-change fields `phi_hat = -lambda_hat`,
/// `sigma_L = 0`, `W_L = v(t, y + W_V)/v(t, y) - 1`.
pub fn solve_orthogonal(
    model: &MarketModel,
    grid: &Grid,
    config: &PicardConfig,
) -> Result<OrthogonalSolution> {
    // spot-check the orthogonality restriction
    for &t in &[0.0, 0.5 * model.horizon, model.horizon] {
        for &y in &[model.domain.0, model.v0, model.domain.1] {
            for atom in model.measure.atoms() {
                let wm = (model.w_m)(t, y, atom.x);
                if wm != 0.0 {
                    return Err(MemmError::InvalidModel(format!(
                        "orthogonal solver requires W_M == 0, found {wm} at (t={t}, y={y}, x={})",
                        atom.x
                    )));
                }
            }
        }
    }

    let sol: PicardSolution = picard_solve(model, grid, &SourceKind::LinearOrthogonal, config)?;
    let v = sol.surface;
    if v.values.iter().any(|&x| x <= 0.0) {
        return Err(MemmError::Corruption(
            "transform surface v has non-positive values; refine the grid".into(),
        ));
    }

    let mut u = v.clone();
    for val in u.values.iter_mut() {
        *val = val.ln();
    }

    let ny = grid.ny();
    let n_atoms = model.measure.len();
    let mut fields = MemmFields::zeros(grid.clone(), n_atoms);
    for (j, &t) in grid.times.iter().enumerate() {
        for (k, &y) in grid.ys.iter().enumerate() {
            let node = j * ny + k;
            let lh = lambda_hat(model, t, y);
            let sig = (model.sigma_m)(t, y);
            fields.lambda_hat[node] = lh;
            fields.phi_hat[node] = -lh;
            fields.sigma_l[node] = 0.0;
            let v_here = v.value(j, k);
            let mut wl_int = 0.0;
            for (i, atom) in model.measure.atoms().iter().enumerate() {
                let wv = (model.w_v)(t, y, atom.x);
                let (v_shift, _) = v.eval_row(j, y + wv);
                let wl = v_shift / v_here - 1.0;
                fields.w_l[node * n_atoms + i] = wl;
                wl_int += atom.w * wl;
            }
            fields.g[node] = -0.5 * lh * lh * sig * sig + wl_int;
        }
    }

    Ok(OrthogonalSolution {
        v,
        u,
        fields,
        report: sol.report,
    })
}

/// Parameters of the OU-subordinator stochastic volatility model with
/// leverage: log-price drift `mu + beta sigma_t^2`, shared jumps scaled by
/// `rho <= 0` in the price, variance reverting at rate `lam` and jumping by
/// the subordinator. `measure` is the subordinator's jump measure `nu`; the
/// driving compensator is `lam * nu` and is materialized at build time.
#[derive(Debug, Clone, Serialize)]
pub struct BnsParams {
    pub mu: f64,
    pub beta: f64,
    pub rho: f64,
    pub lam: f64,
    pub sigma0_sq: f64,
    pub measure: LevyMeasure,
    /// Upper edge of the truncated state domain; `None` derives it from the
    /// 99.9% quantile of the simulated jump accumulation.
    pub y_max: Option<f64>,
    pub horizon: f64,
    pub s0: f64,
    /// Decay rate of the exponential tail the atoms were generated from,
    /// when applicable; enables the closed-form admissibility check.
    pub tail_rate: Option<f64>,
}

impl BnsParams {
    fn check(&self) -> Result<()> {
        if !(self.lam > 0.0) {
            return Err(MemmError::InvalidModel("bns: lam must be > 0".into()));
        }
        if self.rho > 0.0 {
            return Err(MemmError::InvalidModel("bns: rho must be <= 0".into()));
        }
        if !(self.sigma0_sq > 0.0) {
            return Err(MemmError::InvalidModel("bns: sigma0_sq must be > 0".into()));
        }
        if !(self.horizon > 0.0) || !(self.s0 > 0.0) {
            return Err(MemmError::InvalidModel(
                "bns: horizon and s0 must be > 0".into(),
            ));
        }
        if self.measure.atoms().iter().any(|a| a.x <= 0.0) {
            return Err(MemmError::InvalidModel(
                "bns: subordinator atoms must have positive sizes".into(),
            ));
        }
        if let Some(y_max) = self.y_max {
            if !(y_max > self.sigma0_sq) {
                return Err(MemmError::InvalidModel(
                    "bns: y_max must exceed sigma0_sq".into(),
                ));
            }
        }
        Ok(())
    }

    /// Compensator measure `nu~ = lam nu` actually driving the dynamics.
    pub fn scaled_measure(&self) -> Result<LevyMeasure> {
        self.measure.scaled(self.lam)
    }

    /// Default domain edge: `sigma0_sq + q` where `q` is the 99.9% quantile
    /// of `e^{lam T} * (sum of subordinator jumps over [0, T])`, estimated
    /// from 20000 deterministic draws.
    pub fn default_y_max(&self) -> Result<f64> {
        let scaled = self.scaled_measure()?;
        let total = scaled.total_intensity();
        if total == 0.0 {
            return Ok(self.sigma0_sq * 1.5);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x42D);
        let mean_events = total * self.horizon;
        let weights: Vec<f64> = scaled.atoms().iter().map(|a| a.w / total).collect();
        let blow = (self.lam * self.horizon).exp();
        let mut sums = Vec::with_capacity(20_000);
        for _ in 0..20_000 {
            let mut u: f64 = rng.random();
            let mut p = (-mean_events).exp();
            let mut n = 0u32;
            while u > p && n < 10_000 {
                u -= p;
                n += 1;
                p *= mean_events / n as f64;
            }
            let mut acc = 0.0;
            for _ in 0..n {
                let pick: f64 = rng.random();
                let mut cum = 0.0;
                let mut idx = scaled.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    cum += w;
                    if pick < cum {
                        idx = i;
                        break;
                    }
                }
                acc += scaled.atoms()[idx].x;
            }
            sums.push(blow * acc);
        }
        let q = quantile(&sums, 0.999).max(0.1 * self.sigma0_sq);
        Ok(self.sigma0_sq + q)
    }
}

/// Result of the admissibility screen for the OU-subordinator model.
#[derive(Debug, Clone, Serialize)]
pub struct BnsAdmissibility {
    /// Exponent rate `(beta + 1/2)^2 / lam` of the moment condition.
    pub exponent_rate: f64,
    /// Finite-sum value of `int (e^{c x} - 1) nu~(dx)` over the atoms.
    pub integral_value: f64,
    /// Tail decay rate of the generating density, when known.
    pub tail_rate: Option<f64>,
    /// `tail_rate > exponent_rate` when the tail rate is known: the
    /// closed-form criterion for the untruncated integral to be finite.
    pub tail_admissible: Option<bool>,
    /// Smallest `lambda_hat` over a sample grid.
    pub lambda_hat_min: f64,
    pub lambda_hat_positive: bool,
}

/// Direct evaluation of the model's risk-premium ratio at `(t, y)`:
/// `(mu + int (e^{rho x} - 1) nu~ + y e^{-lam t}(beta + 1/2))
///  / (y e^{-lam t} + int (e^{rho x} - 1)^2 nu~)`.
pub fn bns_lambda_hat(p: &BnsParams, t: f64, y: f64) -> Result<f64> {
    let scaled = p.scaled_measure()?;
    let i_rho = scaled.integrate(|x| (p.rho * x).exp_m1())?;
    let i_rho2 = scaled.integrate(|x| {
        let e = (p.rho * x).exp_m1();
        e * e
    })?;
    let decayed = y * (-p.lam * t).exp();
    Ok((p.mu + i_rho + decayed * (p.beta + 0.5)) / (decayed + i_rho2))
}

/// Evaluates the moment condition and the risk-premium positivity; always
/// returns a report rather than failing.
pub fn check_bns_admissibility(p: &BnsParams) -> Result<BnsAdmissibility> {
    p.check()?;
    let scaled = p.scaled_measure()?;
    let c = (p.beta + 0.5) * (p.beta + 0.5) / p.lam;
    let integral_value = scaled.integrate(|x| (c * x).exp_m1())?;
    let tail_admissible = p.tail_rate.map(|b| b > c);

    let y_max = match p.y_max {
        Some(v) => v,
        None => p.default_y_max()?,
    };
    let mut lh_min = f64::INFINITY;
    for i in 0..24 {
        let t = p.horizon * i as f64 / 23.0;
        for j in 0..24 {
            let y = p.sigma0_sq + (y_max - p.sigma0_sq) * j as f64 / 23.0;
            lh_min = lh_min.min(bns_lambda_hat(p, t, y)?);
        }
    }
    Ok(BnsAdmissibility {
        exponent_rate: c,
        integral_value,
        tail_rate: p.tail_rate,
        tail_admissible,
        lambda_hat_min: lh_min,
        lambda_hat_positive: lh_min > 0.0,
    })
}

/// Builds the transformed market model on `E = [sigma0_sq, y_max]` with
/// state `y = e^{lam t} sigma_t^2`:
///
/// ```text
/// eta_M = mu + int (e^{rho x} - 1) nu~ + y e^{-lam t} (beta + 1/2)
/// sigma_M = e^{-lam t / 2} sqrt(y),  W_M = e^{rho x} - 1,
/// eta_V = 0,                         W_V = e^{lam t} x,
/// ```
///
/// driven by the scaled measure `nu~ = lam nu`. Fails if `lambda_hat` is
/// not strictly positive on the sample grid.
pub fn build_bns_model(p: &BnsParams) -> Result<MarketModel> {
    p.check()?;
    let admissibility = check_bns_admissibility(p)?;
    if !admissibility.lambda_hat_positive {
        return Err(MemmError::InvalidModel(format!(
            "bns: lambda_hat reaches {} on the sample grid; the construction requires it strictly positive",
            admissibility.lambda_hat_min
        )));
    }
    let scaled = p.scaled_measure()?;
    let i_rho = scaled.integrate(|x| (p.rho * x).exp_m1())?;
    let y_max = match p.y_max {
        Some(v) => v,
        None => p.default_y_max()?,
    };

    let (mu, beta, rho, lam) = (p.mu, p.beta, p.rho, p.lam);
    let model = MarketModel::builder()
        .eta_m(move |t, y| mu + i_rho + y * (-lam * t).exp() * (beta + 0.5))
        .sigma_m(move |t, y| (-0.5 * lam * t).exp() * y.max(1e-12).sqrt())
        .w_m(move |_, _, x| (rho * x).exp_m1())
        .eta_v(|_, _| 0.0)
        .w_v(move |t, _, x| (lam * t).exp() * x)
        .domain(p.sigma0_sq, y_max)
        .horizon(p.horizon)
        .s0(p.s0)
        .v0(p.sigma0_sq)
        .measure(scaled)
        .build()?;
    Ok(model)
}

/// Both sides of the pathwise integrated-variance identity
///
/// ```text
/// int_0^T sigma_t^2 dt = lam^{-1}(1 - e^{-lam T}) sigma_0^2
///                      + sum_j lam^{-1}(1 - e^{-lam (T - tau_j)}) x_j
/// ```
///
/// reconstructed from a simulated path of the transformed state
/// `V = e^{lam t} sigma^2` (piecewise constant between jumps). The left
/// side integrates `e^{-lam t} V_t` exactly segment by segment.
pub fn bns_ou_identity(p: &BnsParams, path: &PathSample) -> (f64, f64) {
    let t_end = *path.times.last().expect("non-empty path");
    let lam = p.lam;

    // events in time order: (tau_j, subordinator jump size x_j)
    let events: Vec<(f64, f64)> = path
        .jumps
        .iter()
        .map(|&(step, atom)| (path.times[step], p.measure.atoms()[atom].x))
        .collect();

    let mut lhs = 0.0;
    let mut v_run = p.sigma0_sq; // V at t = 0
    let mut t_prev = 0.0;
    for &(tau, x) in &events {
        lhs += v_run * ((-lam * t_prev).exp() - (-lam * tau).exp()) / lam;
        v_run += (lam * tau).exp() * x;
        t_prev = tau;
    }
    lhs += v_run * ((-lam * t_prev).exp() - (-lam * t_end).exp()) / lam;

    let mut rhs = (1.0 - (-lam * t_end).exp()) / lam * p.sigma0_sq;
    for &(tau, x) in &events {
        rhs += (1.0 - (-lam * (t_end - tau)).exp()) / lam * x;
    }
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{simulate_paths, MeasureKind};

    fn det_model(eta: f64, sigma: f64, wm_scale: f64, atoms: &[(f64, f64)]) -> MarketModel {
        MarketModel::builder()
            .eta_m(move |_, _| eta)
            .sigma_m(move |_, _| sigma)
            .w_m(move |_, _, x| wm_scale * x)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .v0(1.0)
            .measure(LevyMeasure::new(atoms.iter().copied()).unwrap())
            .build()
            .unwrap()
    }

    #[test]
    fn deterministic_phi_linear_case() {
        let m = det_model(0.08, 0.2, 0.0, &[]);
        let phi = solve_deterministic_phi(&m, 0.3, 1.0).unwrap();
        assert!((phi + 2.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_phi_odd_symmetry_gives_zero() {
        // eta = 0 and symmetric atoms with odd W_M: the drift equation is
        // odd in phi, so the root is 0.
        let m = det_model(0.0, 0.2, 1.0, &[(0.25, 0.7), (-0.25, 0.7)]);
        let phi = solve_deterministic_phi(&m, 0.0, 1.0).unwrap();
        assert!(phi.abs() < 1e-12, "phi = {phi}");
    }

    #[test]
    fn deterministic_phi_matches_bisection_oracle() {
        let m = det_model(0.05, 0.2, 0.1, &[(1.0, 1.0)]);
        // independent bisection on the drift equation
        let f = |phi: f64| 0.05 + 0.04 * phi + 1.0 * 0.1 * ((phi * 0.1).exp() - 1.0);
        let (mut lo, mut hi) = (-100.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let phi = solve_deterministic_phi(&m, 0.0, 1.0).unwrap();
        assert!((phi - oracle).abs() < 1e-10, "{phi} vs {oracle}");
    }

    fn orthogonal_model() -> MarketModel {
        MarketModel::builder()
            .eta_m(|_, y: f64| 0.0625 * (0.5 + 0.1 * (y - 1.0).tanh()))
            .sigma_m(|_, _| 0.25)
            .eta_v(|_, y| -0.3 * (y - 1.0))
            .w_v(|_, y, x| 0.2 * x * (2.0 - y) / 1.5)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .s0(1.0)
            .v0(1.0)
            .measure(LevyMeasure::new([(1.0, 0.3)]).unwrap())
            .build()
            .unwrap()
    }

    #[test]
    fn orthogonal_no_premium_gives_unit_v() {
        let m = MarketModel::builder()
            .eta_m(|_, _| 0.0)
            .sigma_m(|_, _| 0.25)
            .w_v(|_, y, x| 0.2 * x * (2.0 - y) / 1.5)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .v0(1.0)
            .measure(LevyMeasure::new([(1.0, 0.3)]).unwrap())
            .build()
            .unwrap();
        let grid = Grid::uniform(1.0, 9, 0.5, 2.0, 9).unwrap();
        let sol = solve_orthogonal(&m, &grid, &PicardConfig::default()).unwrap();
        for &v in &sol.v.values {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for &u in &sol.u.values {
            assert!(u.abs() < 1e-12);
        }
        for &wl in &sol.fields.w_l {
            assert!(wl.abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_no_jumps_matches_scalar_ode() {
        let m = MarketModel::builder()
            .eta_m(|_, _| 0.125) // lambda_hat = 2 with sigma = 0.25
            .sigma_m(|_, _| 0.25)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .v0(1.0)
            .build()
            .unwrap();
        let grid = Grid::uniform(1.0, 33, 0.5, 2.0, 9).unwrap();
        let sol = solve_orthogonal(&m, &grid, &PicardConfig::default()).unwrap();
        // v(t) = exp(-1/2 lh^2 sig^2 (T - t)) = exp(-0.125 (1 - t))
        for (j, &t) in grid.times.iter().enumerate() {
            let expected = (-0.125 * (1.0 - t)).exp();
            for k in 0..grid.ny() {
                let v = sol.v.value(j, k);
                assert!(
                    (v - expected).abs() < 2e-6,
                    "v({t}) = {v}, expected {expected}"
                );
            }
        }
    }

    #[test]
    fn orthogonal_phi_and_sigma_are_exact() {
        let m = orthogonal_model();
        let grid = Grid::uniform(1.0, 17, 0.5, 2.0, 17).unwrap();
        let sol = solve_orthogonal(&m, &grid, &PicardConfig::default()).unwrap();
        for (j, &t) in grid.times.iter().enumerate() {
            for (k, &y) in grid.ys.iter().enumerate() {
                let node = j * grid.ny() + k;
                assert_eq!(sol.fields.sigma_l[node], 0.0);
                assert_eq!(sol.fields.phi_hat[node], -lambda_hat(&m, t, y));
            }
        }
    }

    #[test]
    fn orthogonal_jump_ratio_is_state_dependent() {
        // the measure change is not structure preserving: the jump density
        // ratio v(t, y + W_V)/v(t, y) varies across states
        let m = orthogonal_model();
        let grid = Grid::uniform(1.0, 17, 0.5, 2.0, 17).unwrap();
        let sol = solve_orthogonal(&m, &grid, &PicardConfig::default()).unwrap();
        let r1 = sol.fields.w_l[sol.fields.node(0, 2) * 1] + 1.0;
        let r2 = sol.fields.w_l[sol.fields.node(0, 14) * 1] + 1.0;
        assert!(
            (r1 - r2).abs() > 1e-10,
            "jump ratio unexpectedly constant: {r1} vs {r2}"
        );
    }

    #[test]
    fn orthogonal_rejects_price_jumps() {
        let m = det_model(0.05, 0.2, 0.1, &[(1.0, 0.5)]);
        let grid = Grid::uniform(1.0, 5, 0.5, 2.0, 5).unwrap();
        let err = solve_orthogonal(&m, &grid, &PicardConfig::default()).unwrap_err();
        assert!(matches!(err, MemmError::InvalidModel(_)));
    }

    fn bns_params() -> BnsParams {
        let measure = LevyMeasure::from_exponential_density(100.0, 50.0, 12, 0.16).unwrap();
        BnsParams {
            mu: 0.06,
            beta: 0.0,
            rho: -1.0,
            lam: 1.0,
            sigma0_sq: 0.04,
            measure,
            y_max: None,
            horizon: 1.0,
            s0: 1.0,
            tail_rate: Some(50.0),
        }
    }

    #[test]
    fn admissibility_thresholds_match_closed_form() {
        let p = bns_params();
        let report = check_bns_admissibility(&p).unwrap();
        assert!((report.exponent_rate - 0.25).abs() < 1e-15);
        assert_eq!(report.tail_admissible, Some(true));
        assert!(report.integral_value.is_finite());

        let mut slow = bns_params();
        slow.tail_rate = Some(0.2);
        let report = check_bns_admissibility(&slow).unwrap();
        assert_eq!(report.tail_admissible, Some(false));
    }

    #[test]
    fn zero_leverage_and_drift_give_constant_lambda_hat() {
        let mut p = bns_params();
        p.rho = 0.0;
        p.mu = 0.0;
        p.beta = 0.3;
        for &(t, y) in &[(0.0, 0.04), (0.5, 0.3), (1.0, 0.6)] {
            let lh = bns_lambda_hat(&p, t, y).unwrap();
            assert!((lh - 0.8).abs() < 1e-14, "lh = {lh}");
        }
        let model = build_bns_model(&p).unwrap();
        // W_M == 0 when rho == 0
        assert_eq!((model.w_m)(0.3, 0.1, 0.05), 0.0);
        let lh = lambda_hat(&model, 0.5, 0.3);
        assert!((lh - 0.8).abs() < 1e-13);
    }

    #[test]
    fn transform_is_identity_at_time_zero() {
        let p = bns_params();
        let model = build_bns_model(&p).unwrap();
        let y = 0.09;
        assert!(((model.sigma_m)(0.0, y) - y.sqrt()).abs() < 1e-15);
        assert!(((model.w_v)(0.0, y, 0.05) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn generic_lambda_hat_matches_the_reduced_formula() {
        let p = bns_params();
        let model = build_bns_model(&p).unwrap();
        for &(t, y) in &[(0.0, 0.04), (0.3, 0.2), (0.9, 0.5)] {
            let direct = bns_lambda_hat(&p, t, y).unwrap();
            let generic = lambda_hat(&model, t, y);
            assert!(
                (direct - generic).abs() <= 1e-12 * direct.abs().max(1.0),
                "direct {direct} vs generic {generic}"
            );
        }
    }

    #[test]
    fn negative_lambda_hat_is_rejected() {
        let mut p = bns_params();
        p.mu = -0.5;
        let err = build_bns_model(&p).unwrap_err();
        assert!(matches!(err, MemmError::InvalidModel(_)));
    }

    #[test]
    fn ou_identity_holds_pathwise() {
        let p = bns_params();
        let model = build_bns_model(&p).unwrap();
        let paths = simulate_paths(&model, None, MeasureKind::P, 32, 128, 99).unwrap();
        let mut saw_jump = false;
        for path in &paths {
            saw_jump |= !path.jumps.is_empty();
            let (lhs, rhs) = bns_ou_identity(&p, path);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0),
                "identity gap {}",
                lhs - rhs
            );
            // terminal state agrees with the event reconstruction
            let mut v_t = p.sigma0_sq;
            for &(step, atom) in &path.jumps {
                v_t += (p.lam * path.times[step]).exp() * p.measure.atoms()[atom].x;
            }
            let last = path.v.len() - 1;
            assert!((v_t - path.v[last]).abs() <= 1e-12 * v_t.max(1.0));
        }
        assert!(saw_jump, "test instance produced no jumps at all");
    }
}

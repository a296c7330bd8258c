//! Girsanov kernels of the entropy-minimal measure change and the
//! log-density bookkeeping used by the simulator.
//!
//! The density process is the stochastic exponential of
//! `-[int (lh sig_M - sig_L) dY^c + (lh W_M - W_L) * (mu - nu)]`, so the
//! measure change is fully described by a Brownian drift shift and one
//! jump-intensity ratio per atom.

use crate::error::{MemmError, Result};
use crate::kernel::MemmFields;
use crate::measure::LevyMeasure;
use crate::model::{lambda_hat, MarketModel};

/// Measure-change kernels at one state `(t, y)`.
#[derive(Debug, Clone)]
pub struct GirsanovKernels {
    /// Drift acquired by the driving Brownian motion under the new measure:
    /// `sigma_L - lambda_hat sigma_M`.
    pub brownian_drift: f64,
    /// Per-atom density ratio `1 - lambda_hat W_M(x_i) + W_L(x_i) > 0` of
    /// the new jump compensator against `nu`.
    pub jump_ratio: Vec<f64>,
    pub lambda_hat: f64,
    pub phi_hat: f64,
    pub sigma_l: f64,
    /// Predictable drift of `log Z` from the compensated jump part:
    /// `sum_i w_i (lambda_hat W_M(x_i) - W_L(x_i))`.
    pub compensator: f64,
}

impl GirsanovKernels {
    /// Rate of the predictable compensator of the exponential-moment
    /// process `U = 1/2 <N^c> + sum (1 + dN) log(1 + dN) - dN`. Finite and
    /// bounded rates over the grid certify the Novikov-type criterion.
    pub fn u_compensator_rate(&self, measure: &LevyMeasure) -> f64 {
        let cont = 0.5 * self.brownian_drift * self.brownian_drift;
        let jump: f64 = measure
            .atoms()
            .iter()
            .zip(&self.jump_ratio)
            .map(|(a, &r)| a.w * (r * r.ln() - (r - 1.0)))
            .sum();
        cont + jump
    }
}

/// Evaluates the measure-change kernels at `(t, y)`.
///
/// The jump kernel is interpolated from the solved node fields (queries
/// outside the grid span are clamped to it), while the model coefficients
/// are evaluated exactly at the requested state. `sigma_L` is re-derived
/// from the interpolated kernel through the orthogonality relation, so the
/// martingale drift identity holds exactly at every query point.
pub fn kernels_at(
    model: &MarketModel,
    fields: &MemmFields,
    t: f64,
    y: f64,
) -> Result<GirsanovKernels> {
    let n = model.measure.len();
    let mut w_l = vec![0.0; n];
    fields.w_l_interp(t, y, &mut w_l);

    let lh = lambda_hat(model, t, y);
    let sig = (model.sigma_m)(t, y);
    let mut cross = 0.0;
    let mut compensator = 0.0;
    let mut jump_ratio = Vec::with_capacity(n);
    for (i, atom) in model.measure.atoms().iter().enumerate() {
        let wm = (model.w_m)(t, y, atom.x);
        cross += atom.w * wm * w_l[i];
        compensator += atom.w * (lh * wm - w_l[i]);
        let ratio = 1.0 - lh * wm + w_l[i];
        if !(ratio > 0.0) {
            return Err(MemmError::Corruption(format!(
                "jump density ratio {ratio} <= 0 at (t={t}, y={y}), atom {i}"
            )));
        }
        jump_ratio.push(ratio);
    }
    let sigma_l = -cross / sig;
    let phi_hat = -lh - cross / (sig * sig);
    Ok(GirsanovKernels {
        brownian_drift: sigma_l - lh * sig,
        jump_ratio,
        lambda_hat: lh,
        phi_hat,
        sigma_l,
        compensator,
    })
}

/// Increment of `log Z` over one step of length `dt` with Brownian
/// increment `db` and the atoms that jumped in the step:
///
/// ```text
/// dlogZ = b db - 1/2 b^2 dt + sum_jumps log(ratio) + compensator dt
/// ```
///
/// with `b = sigma_L - lambda_hat sigma_M`. Kernels are evaluated at the
/// left endpoint of the step (predictable convention).
pub fn log_density_increment(
    kernels: &GirsanovKernels,
    dt: f64,
    db: f64,
    jumps: &[usize],
) -> f64 {
    let b = kernels.brownian_drift;
    let mut inc = b * db - 0.5 * b * b * dt + kernels.compensator * dt;
    for &i in jumps {
        inc += kernels.jump_ratio[i].ln();
    }
    inc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::ipde::{memm_fields, picard_solve, PicardConfig, SourceKind};
    use crate::grid::Surface;

    fn identity_kernels() -> GirsanovKernels {
        GirsanovKernels {
            brownian_drift: 0.0,
            jump_ratio: vec![1.0, 1.0],
            lambda_hat: 0.0,
            phi_hat: 0.0,
            sigma_l: 0.0,
            compensator: 0.0,
        }
    }

    #[test]
    fn identity_measure_change_has_zero_increments() {
        let k = identity_kernels();
        assert_eq!(log_density_increment(&k, 0.01, 0.3, &[]), 0.0);
        assert_eq!(log_density_increment(&k, 0.01, -0.2, &[0, 1]), 0.0);
    }

    #[test]
    fn single_jump_with_ratio_two_contributes_log_two() {
        let k = GirsanovKernels {
            brownian_drift: 0.0,
            jump_ratio: vec![2.0],
            lambda_hat: 0.0,
            phi_hat: 0.0,
            sigma_l: 0.0,
            compensator: 0.0,
        };
        let inc = log_density_increment(&k, 0.0, 0.0, &[0]);
        assert!((inc - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn diffusion_only_increment_matches_formula() {
        let (lh, sig) = (2.0, 0.2);
        let k = GirsanovKernels {
            brownian_drift: -lh * sig, // sigma_L = 0
            jump_ratio: vec![],
            lambda_hat: lh,
            phi_hat: -lh,
            sigma_l: 0.0,
            compensator: 0.7,
        };
        let (dt, db) = (0.01, 0.05);
        let inc = log_density_increment(&k, dt, db, &[]);
        let expected = -lh * sig * db - 0.5 * lh * lh * sig * sig * dt + 0.7 * dt;
        assert!((inc - expected).abs() < 1e-16);
    }

    #[test]
    fn jump_free_constant_kernels_compose_to_the_girsanov_exponential() {
        use rand::{Rng, SeedableRng};
        let (lh, sig, t_end) = (2.0, 0.2, 1.0);
        let k = GirsanovKernels {
            brownian_drift: -lh * sig,
            jump_ratio: vec![],
            lambda_hat: lh,
            phi_hat: -lh,
            sigma_l: 0.0,
            compensator: 0.0,
        };
        let n = 256;
        let dt = t_end / n as f64;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut log_z = 0.0;
        let mut b_total = 0.0;
        for _ in 0..n {
            let db = rng.random_range(-1.0..1.0) * dt.sqrt();
            b_total += db;
            log_z += log_density_increment(&k, dt, db, &[]);
        }
        let closed = -lh * sig * b_total - 0.5 * lh * lh * sig * sig * t_end;
        assert!((log_z - closed).abs() < 1e-12);
        assert!(log_z.exp() > 0.0);
    }

    #[test]
    fn solved_fields_give_identity_kernels_without_risk_premium() {
        let model = crate::model::MarketModel::builder()
            .eta_m(|_, _| 0.0)
            .sigma_m(|_, _| 0.2)
            .w_m(|_, _, x| 0.1 * x)
            .w_v(|_, y, x| 0.1 * x * (2.0 - y))
            .domain(0.5, 2.0)
            .horizon(1.0)
            .v0(1.0)
            .measure(crate::measure::LevyMeasure::new([(1.0, 0.5)]).unwrap())
            .build()
            .unwrap();
        let grid = Grid::uniform(1.0, 9, 0.5, 2.0, 9).unwrap();
        let sol = picard_solve(&model, &grid, &SourceKind::Memm, &PicardConfig::default()).unwrap();
        let fields = sol.fields.unwrap();
        let k = kernels_at(&model, &fields, 0.4, 1.1).unwrap();
        assert!(k.brownian_drift.abs() < 1e-12);
        assert!((k.jump_ratio[0] - 1.0).abs() < 1e-12);
        assert!(k.u_compensator_rate(&model.measure).abs() < 1e-20);
    }

    #[test]
    fn empty_measure_drift_is_phi_hat_sigma() {
        let model = crate::model::MarketModel::builder()
            .eta_m(|_, _| 0.08)
            .sigma_m(|_, _| 0.2)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .v0(1.0)
            .build()
            .unwrap();
        let grid = Grid::uniform(1.0, 5, 0.5, 2.0, 5).unwrap();
        let surface = Surface::from_fn(grid, |t, _| -0.08 * (1.0 - t));
        let fields = memm_fields(&model, &surface, 1e-12).unwrap();
        let k = kernels_at(&model, &fields, 0.25, 1.0).unwrap();
        // phi_hat = -lambda_hat, drift = phi_hat * sigma = -0.4
        assert!((k.phi_hat + 2.0).abs() < 1e-13);
        assert!((k.brownian_drift - k.phi_hat * 0.2).abs() < 1e-13);
        assert!(k.jump_ratio.is_empty());
    }

    #[test]
    fn corrupted_fields_with_huge_negative_kernel_are_rejected() {
        let model = crate::model::MarketModel::builder()
            .eta_m(|_, _| 0.08)
            .sigma_m(|_, _| 0.2)
            .w_m(|_, _, _| 0.1)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .v0(1.0)
            .measure(crate::measure::LevyMeasure::new([(1.0, 0.5)]).unwrap())
            .build()
            .unwrap();
        let grid = Grid::uniform(1.0, 3, 0.5, 2.0, 3).unwrap();
        let mut fields = crate::kernel::MemmFields::zeros(grid, 1);
        for v in fields.w_l.iter_mut() {
            *v = -5.0; // forces 1 - lh W_M + W_L < 0
        }
        let err = kernels_at(&model, &fields, 0.5, 1.0).unwrap_err();
        assert!(matches!(err, MemmError::Corruption(_)));
    }
}

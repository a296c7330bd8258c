//! Monte Carlo harness: path simulation under the objective measure and
//! under the entropy-minimal measure, the verification statistics, and the
//! pathwise residual of the master equation.
//!
//! Scheme: exponential Euler for the continuous price part (coefficients
//! frozen at the left endpoint of each step), explicit Euler for the state
//! drift, per-atom Poisson jump streams (thinned against a grid-supremum
//! dominating intensity under the changed measure), and log-space
//! accumulation of the density. Per-path RNG streams are derived from
//! `(seed, path index)`, so results are reproducible for any thread count
//! and stable when the path count changes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{MemmError, Result};
use crate::girsanov::{kernels_at, log_density_increment, GirsanovKernels};
use crate::grid::Surface;
use crate::kernel::MemmFields;
use crate::model::MarketModel;
use crate::parallel::map_indexed;
use crate::stats::VerifyStats;

/// Which probability measure drives the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    /// Objective measure.
    P,
    /// Entropy-minimal martingale measure (requires solved fields).
    QStar,
}

/// One recorded trajectory. Jumps in step `l` are evaluated at the state
/// `v[l]` (the pre-jump left limit) and carry the step's left time.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub log_z: Vec<f64>,
    /// Brownian increments per step.
    pub brownian: Vec<f64>,
    /// `(step index, atom index)` of every jump.
    pub jumps: Vec<(usize, usize)>,
    /// Steps whose state lay outside the field grid span.
    pub clamp_count: u64,
}

/// Per-path accumulators for the verification statistics.
#[derive(Debug, Clone, Copy, Default)]
struct PathSummary {
    z_terminal: f64,
    z_log_z: f64,
    s_terminal: f64,
    v_terminal: f64,
    /// Accumulated `int phi_hat / S_- dS`.
    mart_integral: f64,
    /// Accumulated `int g(t, V_t) dt` (objective-measure paths).
    g_integral: f64,
    /// Accumulated `sum_jumps delta_u`.
    jump_delta_u: f64,
    n_jumps: u64,
    clamp_count: u64,
}

/// Small-mean Poisson sampler by CDF inversion: consumes exactly one
/// uniform per call.
fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let mut u: f64 = rng.random();
    let mut p = (-mean).exp();
    let mut k = 0u32;
    while u > p && k < 10_000 {
        u -= p;
        k += 1;
        p *= mean / k as f64;
    }
    k
}

struct SimContext<'a> {
    model: &'a MarketModel,
    fields: Option<&'a MemmFields>,
    surface: Option<&'a Surface>,
    kind: MeasureKind,
    ratio_sup: Option<Vec<f64>>,
    n_steps: usize,
    seed: u64,
    stream_base: u64,
}

impl SimContext<'_> {
    fn run_path(&self, path_idx: usize, record: bool) -> Result<(PathSummary, Option<PathSample>)> {
        let model = self.model;
        let n_atoms = model.measure.len();
        let t_end = model.horizon;
        let dt = t_end / self.n_steps as f64;
        let sqrt_dt = dt.sqrt();

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_base.wrapping_add(path_idx as u64));

        let mut log_s = model.s0.ln();
        let mut v = model.v0;
        let mut log_z = 0.0;
        let mut summary = PathSummary::default();
        let mut sample = if record {
            Some(PathSample {
                times: vec![0.0; self.n_steps + 1],
                s: vec![model.s0; self.n_steps + 1],
                v: vec![v; self.n_steps + 1],
                log_z: vec![0.0; self.n_steps + 1],
                brownian: vec![0.0; self.n_steps],
                jumps: Vec::new(),
                clamp_count: 0,
            })
        } else {
            None
        };

        let mut jump_buf: Vec<usize> = Vec::new();
        for l in 0..self.n_steps {
            let t = t_end * l as f64 / self.n_steps as f64;

            // Everything in the step is evaluated at the left state (t, v).
            let eta = (model.eta_m)(t, v);
            let sig = (model.sigma_m)(t, v);
            let eta_v = (model.eta_v)(t, v);
            let wm: Vec<f64> = model.w_m_atoms(t, v);
            let wm_int = model.measure.integrate_values(&wm);

            let kernels: Option<GirsanovKernels> = match self.fields {
                Some(f) => Some(kernels_at(model, f, t, v)?),
                None => None,
            };
            if v < model.domain.0 || v > model.domain.1 {
                summary.clamp_count += 1;
            }

            let db = {
                let z: f64 = rng.sample(StandardNormal);
                z * sqrt_dt
            };

            // continuous price part, exponential step
            let mut drift_s = eta - wm_int;
            if self.kind == MeasureKind::QStar {
                let k = kernels.as_ref().expect("QStar requires fields");
                drift_s += sig * k.brownian_drift;
            }
            log_s += (drift_s - 0.5 * sig * sig) * dt + sig * db;

            if let Some(k) = &kernels {
                match self.kind {
                    MeasureKind::P => {
                        log_z += log_density_increment(k, dt, db, &[]);
                    }
                    MeasureKind::QStar => {
                        summary.mart_integral += k.phi_hat * (drift_s * dt + sig * db);
                    }
                }
                if self.kind == MeasureKind::P {
                    if let Some(f) = self.fields {
                        summary.g_integral += f.g_interp(t, v) * dt;
                    }
                }
            }

            // jumps: per-atom Poisson streams, thinned under QStar
            jump_buf.clear();
            for i in 0..n_atoms {
                let w_i = model.measure.atoms()[i].w;
                let count = match self.kind {
                    MeasureKind::P => poisson_count(&mut rng, w_i * dt),
                    MeasureKind::QStar => {
                        let sup = self.ratio_sup.as_ref().expect("QStar ratio bounds")[i];
                        let candidates = poisson_count(&mut rng, w_i * sup * dt);
                        let ratio = kernels.as_ref().expect("QStar requires fields").jump_ratio[i];
                        let accept = ratio / sup;
                        if accept > 1.0 + 1e-9 {
                            return Err(MemmError::Corruption(format!(
                                "thinning acceptance {accept} > 1 for atom {i} at (t={t}, y={v})"
                            )));
                        }
                        let mut kept = 0u32;
                        for _ in 0..candidates {
                            let u: f64 = rng.random();
                            if u < accept {
                                kept += 1;
                            }
                        }
                        kept
                    }
                };
                for _ in 0..count {
                    jump_buf.push(i);
                }
            }
            summary.n_jumps += jump_buf.len() as u64;

            let mut v_next = v + eta_v * dt;
            for &i in &jump_buf {
                let atom_x = model.measure.atoms()[i].x;
                let wm_i = wm[i];
                if wm_i <= -1.0 {
                    return Err(MemmError::Corruption(format!(
                        "price jump W_M = {wm_i} <= -1 at (t={t}, y={v}), atom {i}"
                    )));
                }
                log_s += wm_i.ln_1p();
                let wv_i = (model.w_v)(t, v, atom_x);
                v_next += wv_i;
                if let Some(k) = &kernels {
                    match self.kind {
                        MeasureKind::P => {
                            log_z += k.jump_ratio[i].ln();
                            if let Some(surf) = self.surface {
                                let (base, _) = surf.eval(t, v);
                                let (shifted, _) = surf.eval(t, v + wv_i);
                                summary.jump_delta_u += shifted - base;
                            }
                        }
                        MeasureKind::QStar => {
                            summary.mart_integral += k.phi_hat * wm_i;
                        }
                    }
                }
                if let Some(s) = &mut sample {
                    s.jumps.push((l, i));
                }
            }
            v = v_next;

            if let Some(s) = &mut sample {
                s.times[l + 1] = t_end * (l + 1) as f64 / self.n_steps as f64;
                s.s[l + 1] = log_s.exp();
                s.v[l + 1] = v;
                s.log_z[l + 1] = log_z;
                s.brownian[l] = db;
            }
        }

        summary.s_terminal = log_s.exp();
        summary.v_terminal = v;
        summary.z_terminal = log_z.exp();
        summary.z_log_z = summary.z_terminal * log_z;
        if let Some(s) = &mut sample {
            s.clamp_count = summary.clamp_count;
        }
        Ok((summary, sample))
    }
}

fn build_context<'a>(
    model: &'a MarketModel,
    fields: Option<&'a MemmFields>,
    surface: Option<&'a Surface>,
    kind: MeasureKind,
    n_steps: usize,
    seed: u64,
) -> Result<SimContext<'a>> {
    if n_steps == 0 {
        return Err(MemmError::InvalidModel("n_steps must be >= 1".into()));
    }
    if kind == MeasureKind::QStar && fields.is_none() {
        return Err(MemmError::InvalidModel(
            "simulation under the changed measure requires solved fields".into(),
        ));
    }
    let ratio_sup = match (kind, fields) {
        (MeasureKind::QStar, Some(f)) => Some(f.ratio_sup(model)),
        _ => None,
    };
    let stream_base = match kind {
        MeasureKind::P => 0,
        MeasureKind::QStar => 1 << 62,
    };
    Ok(SimContext {
        model,
        fields,
        surface,
        kind,
        ratio_sup,
        n_steps,
        seed,
        stream_base,
    })
}

/// Simulates and records `n_paths` trajectories.
///
/// Under [`MeasureKind::P`] the density `Z` is accumulated along each path
/// when `fields` are provided; under [`MeasureKind::QStar`] the jump
/// intensities and the Brownian drift come from the solved kernels.
pub fn simulate_paths(
    model: &MarketModel,
    fields: Option<&MemmFields>,
    kind: MeasureKind,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<PathSample>> {
    let ctx = build_context(model, fields, None, kind, n_steps, seed)?;
    let results = map_indexed(n_paths, |p| ctx.run_path(p, true));
    results
        .into_iter()
        .map(|r| r.map(|(_, sample)| sample.expect("recording enabled")))
        .collect()
}

fn run_summaries(
    model: &MarketModel,
    fields: Option<&MemmFields>,
    surface: Option<&Surface>,
    kind: MeasureKind,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<PathSummary>> {
    let ctx = build_context(model, fields, surface, kind, n_steps, seed)?;
    let results = map_indexed(n_paths, |p| ctx.run_path(p, false));
    results
        .into_iter()
        .map(|r| r.map(|(summary, _)| summary))
        .collect()
}

/// Aggregate statistics of a simulation batch, computed without storing
/// trajectories.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SimSummary {
    pub n_paths: usize,
    pub n_steps: usize,
    pub mean_s_terminal: f64,
    pub se_s_terminal: f64,
    pub mean_v_terminal: f64,
    /// Mean terminal density (objective-measure runs with fields only).
    pub mean_z_terminal: Option<f64>,
    pub mean_jumps_per_path: f64,
    pub clamped_step_fraction: f64,
}

/// Simulates `n_paths` trajectories and returns batch statistics only.
pub fn simulate_summary(
    model: &MarketModel,
    fields: Option<&MemmFields>,
    kind: MeasureKind,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<SimSummary> {
    let runs = run_summaries(model, fields, None, kind, n_paths, n_steps, seed)?;
    let st: Vec<f64> = runs.iter().map(|s| s.s_terminal).collect();
    let vt: Vec<f64> = runs.iter().map(|s| s.v_terminal).collect();
    let s_stats = VerifyStats::from_samples("S_T", &st, 0.0);
    let mean_z = match (kind, fields) {
        (MeasureKind::P, Some(_)) => {
            let z: Vec<f64> = runs.iter().map(|s| s.z_terminal).collect();
            Some(crate::stats::mean(&z))
        }
        _ => None,
    };
    let jumps: u64 = runs.iter().map(|s| s.n_jumps).sum();
    let clamped: u64 = runs.iter().map(|s| s.clamp_count).sum();
    Ok(SimSummary {
        n_paths,
        n_steps,
        mean_s_terminal: s_stats.estimate,
        se_s_terminal: s_stats.standard_error,
        mean_v_terminal: crate::stats::mean(&vt),
        mean_z_terminal: mean_z,
        mean_jumps_per_path: jumps as f64 / n_paths.max(1) as f64,
        clamped_step_fraction: clamped as f64 / (n_paths * n_steps).max(1) as f64,
    })
}

/// Verification report: the four statistics and the solver's entropy
/// constant they are checked against.
#[derive(Debug, Clone, serde::Serialize)]
pub struct VerifyReport {
    pub stats: Vec<VerifyStats>,
    /// `c = -u(0, V_0)`.
    pub c: f64,
    /// Fraction of steps whose state left the field grid span.
    pub clamped_step_fraction: f64,
}

/// Runs the verification program on a solved model:
/// (a) `E_P[Z_T] = 1`, (b) `E_P[Z_T log Z_T] = c`,
/// (c) `E_Q*[int phi_hat / S_- dS] = 0`, (d) `E_Q*[S_T] = S_0`.
pub fn verify_suite(
    model: &MarketModel,
    fields: &MemmFields,
    surface: &Surface,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<VerifyReport> {
    let c = -surface.eval(0.0, model.v0).0;

    let p_runs = run_summaries(
        model,
        Some(fields),
        None,
        MeasureKind::P,
        n_paths,
        n_steps,
        seed,
    )?;
    let q_runs = run_summaries(
        model,
        Some(fields),
        None,
        MeasureKind::QStar,
        n_paths,
        n_steps,
        seed,
    )?;

    let z: Vec<f64> = p_runs.iter().map(|s| s.z_terminal).collect();
    let zlogz: Vec<f64> = p_runs.iter().map(|s| s.z_log_z).collect();
    let mart: Vec<f64> = q_runs.iter().map(|s| s.mart_integral).collect();
    let st: Vec<f64> = q_runs.iter().map(|s| s.s_terminal).collect();

    let clamped: u64 = p_runs.iter().chain(&q_runs).map(|s| s.clamp_count).sum();
    let total_steps = (2 * n_paths * n_steps) as f64;

    Ok(VerifyReport {
        stats: vec![
            VerifyStats::from_samples("E_P[Z_T]", &z, 1.0),
            VerifyStats::from_samples("E_P[Z_T log Z_T]", &zlogz, c),
            VerifyStats::from_samples("E_Q*[int phi/S dS]", &mart, 0.0),
            VerifyStats::from_samples("E_Q*[S_T]", &st, model.s0),
        ],
        c,
        clamped_step_fraction: clamped as f64 / total_steps,
    })
}

/// Pathwise residual of the master equation along an objective-measure
/// path: `c + int_0^T g(t, V_t) dt - sum_jumps delta_u`. The exact limit is
/// zero; at finite resolution the magnitude is O(dt + grid error).
pub fn pathwise_residual(
    model: &MarketModel,
    path: &PathSample,
    surface: &Surface,
    fields: &MemmFields,
) -> Result<f64> {
    let c = -surface.eval(0.0, model.v0).0;
    let n_steps = path.brownian.len();
    let mut g_int = 0.0;
    for l in 0..n_steps {
        let dt = path.times[l + 1] - path.times[l];
        g_int += fields.g_interp(path.times[l], path.v[l]) * dt;
    }
    let mut jump_sum = 0.0;
    for &(l, atom_idx) in &path.jumps {
        let t = path.times[l];
        let y = path.v[l];
        let x = model.measure.atoms()[atom_idx].x;
        let wv = (model.w_v)(t, y, x);
        let (base, _) = surface.eval(t, y);
        let (shifted, _) = surface.eval(t, y + wv);
        jump_sum += shifted - base;
    }
    Ok(c + g_int - jump_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::ipde::{picard_solve, PicardConfig, SourceKind};
    use crate::measure::LevyMeasure;
    use crate::stats::mean;

    fn bs_flat() -> MarketModel {
        MarketModel::builder()
            .eta_m(|_, _| 0.08)
            .sigma_m(|_, _| 0.2)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .s0(1.0)
            .v0(1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn deterministic_compounding_without_noise() {
        let m = MarketModel::builder()
            .eta_m(|_, _| 0.05)
            .sigma_m(|_, _| 0.0)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .s0(1.0)
            .v0(1.0)
            .build()
            .unwrap();
        let paths = simulate_paths(&m, None, MeasureKind::P, 3, 64, 1).unwrap();
        for p in paths {
            assert!((p.s[64] - 0.05f64.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn state_drift_matches_characteristic_flow() {
        let m = MarketModel::builder()
            .eta_m(|_, _| 0.0)
            .sigma_m(|_, _| 0.2)
            .eta_v(|_, y| -y)
            .domain(0.0, 2.0)
            .horizon(1.0)
            .s0(1.0)
            .v0(1.0)
            .build()
            .unwrap();
        let paths = simulate_paths(&m, None, MeasureKind::P, 1, 512, 7).unwrap();
        let v_t = paths[0].v[512];
        let exact = (-1.0f64).exp();
        assert!((v_t - exact).abs() < 2e-3, "v_T = {v_t}");
        let (flow, _) = crate::ipde::flow_characteristic(&m, 0.0, 1.0, 1.0, 64).unwrap();
        assert!((v_t - flow).abs() < 2e-3);
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let m = bs_flat();
        let a = simulate_paths(&m, None, MeasureKind::P, 8, 32, 42).unwrap();
        let b = simulate_paths(&m, None, MeasureKind::P, 8, 32, 42).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.s, pb.s);
            assert_eq!(pa.v, pb.v);
            assert_eq!(pa.brownian, pb.brownian);
        }
    }

    #[test]
    fn extending_path_count_preserves_existing_paths() {
        let m = bs_flat();
        let a = simulate_paths(&m, None, MeasureKind::P, 4, 32, 42).unwrap();
        let b = simulate_paths(&m, None, MeasureKind::P, 8, 32, 42).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.s, pb.s);
        }
    }

    fn solved_bs_flat() -> (MarketModel, crate::ipde::PicardSolution) {
        let m = bs_flat();
        let grid = Grid::uniform(1.0, 17, 0.5, 2.0, 9).unwrap();
        let sol = picard_solve(&m, &grid, &SourceKind::Memm, &PicardConfig::default()).unwrap();
        (m, sol)
    }

    #[test]
    fn flat_model_verification_statistics_hit_targets() {
        let (m, sol) = solved_bs_flat();
        let fields = sol.fields.as_ref().unwrap();
        let report = verify_suite(&m, fields, &sol.surface, 4000, 64, 9).unwrap();
        assert!((report.c - 0.08).abs() < 1e-9);
        for s in &report.stats {
            assert!(
                s.z_score.abs() <= 3.5,
                "{}: estimate {} target {} z {}",
                s.name,
                s.estimate,
                s.target,
                s.z_score
            );
        }
    }

    #[test]
    fn zero_premium_model_verifies_with_zero_variance() {
        let m = MarketModel::builder()
            .eta_m(|_, _| 0.0)
            .sigma_m(|_, _| 0.2)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .s0(1.0)
            .v0(1.0)
            .build()
            .unwrap();
        let grid = Grid::uniform(1.0, 9, 0.5, 2.0, 5).unwrap();
        let sol = picard_solve(&m, &grid, &SourceKind::Memm, &PicardConfig::default()).unwrap();
        let fields = sol.fields.as_ref().unwrap();
        let report = verify_suite(&m, fields, &sol.surface, 64, 16, 3).unwrap();
        assert_eq!(report.c, 0.0);
        // Z == 1 identically: the density statistics carry zero variance.
        assert_eq!(report.stats[0].standard_error, 0.0);
        assert_eq!(report.stats[0].z_score, 0.0);
        assert_eq!(report.stats[1].z_score, 0.0);
    }

    #[test]
    fn residual_vanishes_identically_without_premium() {
        let m = MarketModel::builder()
            .eta_m(|_, _| 0.0)
            .sigma_m(|_, _| 0.2)
            .w_v(|_, y, x| 0.1 * x * (2.0 - y))
            .domain(0.5, 2.0)
            .horizon(1.0)
            .v0(1.0)
            .measure(LevyMeasure::new([(1.0, 0.8)]).unwrap())
            .build()
            .unwrap();
        let grid = Grid::uniform(1.0, 9, 0.5, 2.0, 9).unwrap();
        let sol = picard_solve(&m, &grid, &SourceKind::Memm, &PicardConfig::default()).unwrap();
        let fields = sol.fields.as_ref().unwrap();
        let paths = simulate_paths(&m, Some(fields), MeasureKind::P, 16, 32, 5).unwrap();
        for p in &paths {
            let r = pathwise_residual(&m, p, &sol.surface, fields).unwrap();
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn residual_is_zero_for_constant_coefficients_without_jumps() {
        let (m, sol) = solved_bs_flat();
        let fields = sol.fields.as_ref().unwrap();
        let paths = simulate_paths(&m, Some(fields), MeasureKind::P, 4, 32, 5).unwrap();
        for p in &paths {
            let r = pathwise_residual(&m, p, &sol.surface, fields).unwrap();
            assert!(r.abs() < 1e-10, "residual {r}");
        }
    }

    #[test]
    fn importance_sampling_identity_for_bounded_functional() {
        // E_P[Z_T f] == E_Q*[f] for f = min(S_T / S_0, 2)
        let m = MarketModel::builder()
            .eta_m(|_, _| 0.06)
            .sigma_m(|_, _| 0.2)
            .w_m(|_, _, x| 0.08 * x)
            .w_v(|_, y, x| 0.15 * x * (2.0 - y) / 1.5)
            .eta_v(|_, y| -0.6 * (y - 1.0))
            .domain(0.5, 2.0)
            .horizon(1.0)
            .s0(1.0)
            .v0(1.0)
            .measure(LevyMeasure::new([(1.0, 0.5)]).unwrap())
            .build()
            .unwrap();
        let grid = Grid::uniform(1.0, 17, 0.5, 2.0, 17).unwrap();
        let sol = picard_solve(&m, &grid, &SourceKind::Memm, &PicardConfig::default()).unwrap();
        let fields = sol.fields.as_ref().unwrap();

        let f = |s_t: f64| (s_t / 1.0).min(2.0);
        let p_paths = simulate_paths(&m, Some(fields), MeasureKind::P, 4000, 64, 17).unwrap();
        let q_paths = simulate_paths(&m, Some(fields), MeasureKind::QStar, 4000, 64, 17).unwrap();
        let weighted: Vec<f64> = p_paths
            .iter()
            .map(|p| p.log_z[64].exp() * f(p.s[64]))
            .collect();
        let direct: Vec<f64> = q_paths.iter().map(|p| f(p.s[64])).collect();
        let sp = VerifyStats::from_samples("p", &weighted, 0.0);
        let sq = VerifyStats::from_samples("q", &direct, 0.0);
        let diff = (sp.estimate - sq.estimate).abs();
        let combined = (sp.standard_error.powi(2) + sq.standard_error.powi(2)).sqrt();
        assert!(
            diff <= 3.0 * combined,
            "identity violated: diff {diff}, 3se {}",
            3.0 * combined
        );
    }

    #[test]
    fn exponential_jump_moment_matches_closed_form() {
        // E[exp(alpha sum W_M^2)] = exp(T sum w (e^{ alpha W_M^2 } - 1))
        let wm = 0.3f64;
        let w = 0.8f64;
        let alpha = 1.5f64;
        let m = MarketModel::builder()
            .eta_m(|_, _| 0.0)
            .sigma_m(|_, _| 0.2)
            .w_m(move |_, _, _| wm)
            .domain(0.5, 2.0)
            .horizon(1.0)
            .v0(1.0)
            .measure(LevyMeasure::new([(1.0, w)]).unwrap())
            .build()
            .unwrap();
        let paths = simulate_paths(&m, None, MeasureKind::P, 20_000, 16, 23).unwrap();
        let samples: Vec<f64> = paths
            .iter()
            .map(|p| (alpha * wm * wm * p.jumps.len() as f64).exp())
            .collect();
        let target = (1.0 * w * ((alpha * wm * wm).exp() - 1.0)).exp();
        let est = mean(&samples);
        let s = VerifyStats::from_samples("expmom", &samples, target);
        assert!(
            s.z_score.abs() <= 3.5,
            "estimate {est}, target {target}, z {}",
            s.z_score
        );
    }
}

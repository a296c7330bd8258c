//! Semi-linear transport equation solver.
//!
//! The value function solves `du/dt + eta_V du/dy + g(t, u_t) = 0` with a
//! terminal condition, which the characteristics representation turns into
//! `u(t, y) = h(V(T)) + int_t^T g(s, V(s), u_s) ds` along the drift flow
//! `V' = eta_V(s, V)`. The solver iterates that operator to its fixed
//! point, sweeping all grid nodes in parallel; sweeps are sequential.
//!
//! The entropy source is not globally Lipschitz, so each sweep reads a
//! truncated copy of the surface clamped to `|u| <= C (T - t)`; at the
//! converged solution the clamp must be inactive, which is asserted.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{MemmError, Result};
use crate::grid::{Grid, Surface};
use crate::kernel::{solve_node, MemmFields};
use crate::model::{lambda_hat, require_valid, MarketModel};
use crate::parallel::map_indexed;

/// Source/terminal pairing for the transport problem.
#[derive(Clone)]
pub enum SourceKind {
    /// Entropy source assembled from the jump kernel; terminal value 0.
    Memm,
    /// Linear source of the orthogonal-volatility transform
    /// `-1/2 lh^2 sig^2 v + int (v(t, y + W_V) - v(t, y)) nu`; terminal 1.
    LinearOrthogonal,
    /// User-supplied source and terminal condition.
    Custom {
        source: Arc<dyn Fn(&MarketModel, &Surface, f64, f64) -> Result<f64> + Send + Sync>,
        terminal: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

/// Solver knobs. Defaults follow the artifact-wide conventions.
#[derive(Debug, Clone)]
pub struct PicardConfig {
    /// Sup-norm tolerance on successive sweeps.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Tolerance of the per-node scalar kernel solve.
    pub kernel_tol: f64,
    /// Truncation level; `None` derives it from the source at `u == 0`.
    pub c_trunc: Option<f64>,
    /// Diagnostic weight for the time-discounted norm (0 = plain sup).
    pub beta_diag: f64,
    /// Maximum tolerated fraction of domain-clamped evaluations.
    pub clamp_limit: f64,
    /// Classical one-step integrator substeps per grid interval.
    pub flow_substeps: usize,
    /// How many times the truncation level may be doubled on failure.
    pub max_c_doublings: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            tol: 1e-9,
            max_sweeps: 200,
            kernel_tol: 1e-12,
            c_trunc: None,
            beta_diag: 0.0,
            clamp_limit: 0.01,
            flow_substeps: 1,
            max_c_doublings: 4,
        }
    }
}

/// Convergence log of one Picard run.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointReport {
    pub iterations: usize,
    /// `||u^{n+1} - u^n||_inf` per sweep.
    pub sup_deltas: Vec<f64>,
    /// Same deltas in the `beta`-weighted norm (empty when beta = 0).
    pub beta_deltas: Vec<f64>,
    pub beta_used: f64,
    pub converged: bool,
    /// Sup-delta of one verification sweep run after convergence.
    pub post_convergence_delta: f64,
    /// Truncation level in force for the final run.
    pub c_trunc: f64,
    pub clamp_events: u64,
    pub clamp_evaluations: u64,
}

/// Output of [`picard_solve`].
#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub surface: Surface,
    /// Populated for [`SourceKind::Memm`] runs.
    pub fields: Option<MemmFields>,
    pub report: FixedPointReport,
}

impl PicardSolution {
    /// Normalizing constant of the density representation, `c = -u(0, v0)`.
    pub fn entropy_constant(&self, v0: f64) -> f64 {
        -self.surface.eval(0.0, v0).0
    }
}

/// Integrates the state drift ODE `V' = eta_V(s, V)` from `(t, y)` to time
/// `s >= t` with `steps` classical 4th-order steps. The result is clamped
/// into the domain; the flag reports whether clamping occurred.
pub fn flow_characteristic(
    model: &MarketModel,
    t: f64,
    y: f64,
    s: f64,
    steps: usize,
) -> Result<(f64, bool)> {
    debug_assert!(s >= t, "flow runs forward in time");
    let steps = steps.max(1);
    let h = (s - t) / steps as f64;
    let mut v = y;
    let mut clamped = false;
    if h == 0.0 {
        return Ok((v, false));
    }
    let drift = |tt: f64, yy: f64| -> Result<f64> {
        let d = (model.eta_v)(tt, yy);
        if !d.is_finite() {
            return Err(MemmError::NonFinite {
                context: format!("state drift {d}"),
                location: format!("(t={tt}, y={yy})"),
            });
        }
        Ok(d)
    };
    for i in 0..steps {
        let ti = t + h * i as f64;
        let k1 = drift(ti, v)?;
        let k2 = drift(ti + 0.5 * h, v + 0.5 * h * k1)?;
        let k3 = drift(ti + 0.5 * h, v + 0.5 * h * k2)?;
        let k4 = drift(ti + h, v + h * k3)?;
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let c = model.clamp_y(v);
        if c != v {
            clamped = true;
            v = c;
        }
    }
    Ok((v, clamped))
}

/// Per-atom increments `u(t, y + W_V(t, y, x_i)) - u(t, y)`, interpolated
/// from the surface. Returns the increments and the number of evaluations
/// that left the domain and were clamped.
pub fn delta_u(
    surface: &Surface,
    model: &MarketModel,
    t: f64,
    y: f64,
) -> Result<(Vec<f64>, u64)> {
    let (base, base_clamped) = surface.eval(t, y);
    let mut clamps = u64::from(base_clamped);
    let mut out = Vec::with_capacity(model.measure.len());
    for atom in model.measure.atoms() {
        let wv = (model.w_v)(t, y, atom.x);
        if !wv.is_finite() {
            return Err(MemmError::NonFinite {
                context: format!("volatility jump {wv}"),
                location: format!("(t={t}, y={y}, x={})", atom.x),
            });
        }
        let (shifted, was_clamped) = surface.eval(t, y + wv);
        if was_clamped {
            clamps += 1;
        }
        out.push(shifted - base);
    }
    Ok((out, clamps))
}

struct ClampCounter {
    events: AtomicU64,
    evaluations: AtomicU64,
}

impl ClampCounter {
    fn new() -> Self {
        ClampCounter {
            events: AtomicU64::new(0),
            evaluations: AtomicU64::new(0),
        }
    }

    fn record(&self, events: u64, evaluations: u64) {
        self.events.fetch_add(events, Ordering::Relaxed);
        self.evaluations.fetch_add(evaluations, Ordering::Relaxed);
    }
}

/// Precomputed characteristics: for each start node `(j, k)` the flow
/// positions at the later time nodes `t_j, ..., t_N`.
struct FlowTable {
    /// `pos[j][k * (nt - j) + (l - j)]` = position at `t_l`.
    pos: Vec<Vec<f64>>,
}

impl FlowTable {
    fn build(
        model: &MarketModel,
        grid: &Grid,
        substeps: usize,
        counter: &ClampCounter,
    ) -> Result<FlowTable> {
        let nt = grid.nt();
        let ny = grid.ny();
        let rows: Vec<Result<Vec<f64>>> = map_indexed(nt, |j| {
            let span = nt - j;
            let mut row = vec![0.0; ny * span];
            let mut clamps = 0u64;
            for (k, &y) in grid.ys.iter().enumerate() {
                let mut v = y;
                row[k * span] = v;
                for l in j..nt - 1 {
                    let (next, clamped) =
                        flow_characteristic(model, grid.times[l], v, grid.times[l + 1], substeps)?;
                    if clamped {
                        clamps += 1;
                    }
                    v = next;
                    row[k * span + (l + 1 - j)] = v;
                }
            }
            counter.record(clamps, (ny * span) as u64);
            Ok(row)
        });
        let pos = rows.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(FlowTable { pos })
    }

    #[inline]
    fn at(&self, nt: usize, j: usize, k: usize, l: usize) -> f64 {
        let span = nt - j;
        self.pos[j][k * span + (l - j)]
    }
}

fn evaluate_source(
    model: &MarketModel,
    kind: &SourceKind,
    working: &Surface,
    t: f64,
    y: f64,
    kernel_tol: f64,
    counter: &ClampCounter,
) -> Result<f64> {
    match kind {
        SourceKind::Memm => {
            let (du, clamps) = delta_u(working, model, t, y)?;
            counter.record(clamps, (model.measure.len() + 1) as u64);
            let (_, _, _, g) = solve_node(model, t, y, &du, kernel_tol)?;
            Ok(g)
        }
        SourceKind::LinearOrthogonal => {
            let (v, vc) = working.eval(t, y);
            let mut clamps = u64::from(vc);
            let lh = lambda_hat(model, t, y);
            let sig = (model.sigma_m)(t, y);
            let mut jump = 0.0;
            for atom in model.measure.atoms() {
                let wv = (model.w_v)(t, y, atom.x);
                let (shifted, c) = working.eval(t, y + wv);
                if c {
                    clamps += 1;
                }
                jump += atom.w * (shifted - v);
            }
            counter.record(clamps, (model.measure.len() + 1) as u64);
            Ok(-0.5 * lh * lh * sig * sig * v + jump)
        }
        SourceKind::Custom { source, .. } => {
            counter.record(0, 1);
            source(model, working, t, y)
        }
    }
}

fn terminal_value(kind: &SourceKind, y: f64) -> f64 {
    match kind {
        SourceKind::Memm => 0.0,
        SourceKind::LinearOrthogonal => 1.0,
        SourceKind::Custom { terminal, .. } => terminal(y),
    }
}

fn apply_f_with(
    model: &MarketModel,
    surface: &Surface,
    kind: &SourceKind,
    flows: &FlowTable,
    c_trunc: Option<f64>,
    kernel_tol: f64,
    counter: &ClampCounter,
) -> Result<Surface> {
    let grid = &surface.grid;
    let nt = grid.nt();
    let ny = grid.ny();
    let working = match (kind, c_trunc) {
        (SourceKind::Memm, Some(c)) => surface.truncated(c),
        _ => surface.clone(),
    };

    let values: Vec<Result<f64>> = map_indexed(nt * ny, |idx| {
        let j = idx / ny;
        let k = idx % ny;
        let endpoint = flows.at(nt, j, k, nt - 1);
        let mut acc = terminal_value(kind, endpoint);
        // composite trapezoid over the time nodes along the characteristic
        let mut prev = evaluate_source(
            model,
            kind,
            &working,
            grid.times[j],
            flows.at(nt, j, k, j),
            kernel_tol,
            counter,
        )?;
        for l in j..nt - 1 {
            let next = evaluate_source(
                model,
                kind,
                &working,
                grid.times[l + 1],
                flows.at(nt, j, k, l + 1),
                kernel_tol,
                counter,
            )?;
            acc += 0.5 * (grid.times[l + 1] - grid.times[l]) * (prev + next);
            prev = next;
        }
        Ok(acc)
    });

    let mut out = Surface::zeros(grid.clone());
    for (idx, v) in values.into_iter().enumerate() {
        out.values[idx] = v?;
    }
    Ok(out)
}

/// One application of the Picard operator `F` to `surface`.
pub fn apply_f(
    model: &MarketModel,
    surface: &Surface,
    kind: &SourceKind,
    config: &PicardConfig,
) -> Result<Surface> {
    let counter = ClampCounter::new();
    let flows = FlowTable::build(model, &surface.grid, config.flow_substeps, &counter)?;
    apply_f_with(
        model,
        surface,
        kind,
        &flows,
        config.c_trunc,
        config.kernel_tol,
        &counter,
    )
}

/// Estimates the default truncation level from the source at `u == 0`.
fn auto_c_trunc(
    model: &MarketModel,
    grid: &Grid,
    kind: &SourceKind,
    kernel_tol: f64,
) -> Result<f64> {
    let zero = Surface::zeros(grid.clone());
    let counter = ClampCounter::new();
    let mut sup: f64 = 0.0;
    for (j, &t) in grid.times.iter().enumerate() {
        // sample every 4th row; the bound only needs the right scale
        if j % 4 != 0 && j != grid.nt() - 1 {
            continue;
        }
        for &y in &grid.ys {
            let g = evaluate_source(model, kind, &zero, t, y, kernel_tol, &counter)?;
            sup = sup.max(g.abs());
        }
    }
    Ok(2.0 * sup.max(1e-12))
}

/// Solves the transport fixed point on `grid`.
///
/// Sweeps run until `||u^{n+1} - u^n||_inf <= tol`, then one extra sweep
/// re-verifies the residual. For the entropy source the truncation level is
/// doubled and the solve restarted if the clamp is active at the fixed
/// point; the converged surface must satisfy `|u(t,y)| <= C (T - t)`.
pub fn picard_solve(
    model: &MarketModel,
    grid: &Grid,
    kind: &SourceKind,
    config: &PicardConfig,
) -> Result<PicardSolution> {
    require_valid(model)?;
    let mut c_trunc = match config.c_trunc {
        Some(c) => c,
        None => match kind {
            SourceKind::Memm => auto_c_trunc(model, grid, kind, config.kernel_tol)?,
            _ => f64::INFINITY,
        },
    };

    for attempt in 0..=config.max_c_doublings {
        match picard_attempt(model, grid, kind, config, c_trunc) {
            Err(MemmError::TruncationActive { .. }) if attempt < config.max_c_doublings => {
                c_trunc *= 2.0;
            }
            other => return other,
        }
    }
    unreachable!("loop either returns or retries");
}

fn picard_attempt(
    model: &MarketModel,
    grid: &Grid,
    kind: &SourceKind,
    config: &PicardConfig,
    c_trunc: f64,
) -> Result<PicardSolution> {
    let counter = ClampCounter::new();
    let flows = FlowTable::build(model, grid, config.flow_substeps, &counter)?;
    let truncation = match kind {
        SourceKind::Memm => Some(c_trunc),
        _ => None,
    };

    let mut u = Surface::zeros(grid.clone());
    let mut sup_deltas = Vec::new();
    let mut beta_deltas = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_sweeps {
        let next = apply_f_with(
            model,
            &u,
            kind,
            &flows,
            truncation,
            config.kernel_tol,
            &counter,
        )?;
        let delta = next.sup_delta(&u);
        sup_deltas.push(delta);
        if config.beta_diag > 0.0 {
            beta_deltas.push(next.beta_delta(&u, config.beta_diag));
        }
        u = next;
        if delta <= config.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MemmError::PicardNoConvergence {
            sweeps: sup_deltas.len(),
            last_delta: sup_deltas.last().copied().unwrap_or(f64::NAN),
            tol: config.tol,
        });
    }

    // one extra sweep confirms the fixed-point residual
    let check = apply_f_with(
        model,
        &u,
        kind,
        &flows,
        truncation,
        config.kernel_tol,
        &counter,
    )?;
    let post_delta = check.sup_delta(&u);
    if post_delta > config.tol {
        return Err(MemmError::PicardNoConvergence {
            sweeps: sup_deltas.len() + 1,
            last_delta: post_delta,
            tol: config.tol,
        });
    }

    if matches!(kind, SourceKind::Memm) && !u.truncation_inactive(c_trunc) {
        // locate one offending node for the error message
        let ny = grid.ny();
        let t_end = grid.t_end();
        let mut loc = (0.0, 0.0);
        'outer: for (j, &t) in grid.times.iter().enumerate() {
            for (k, &y) in grid.ys.iter().enumerate() {
                if u.values[j * ny + k].abs() > c_trunc * (t_end - t) {
                    loc = (t, y);
                    break 'outer;
                }
            }
        }
        return Err(MemmError::TruncationActive {
            c_trunc,
            t: loc.0,
            y: loc.1,
        });
    }

    let clamp_events = counter.events.load(Ordering::Relaxed);
    let clamp_evaluations = counter.evaluations.load(Ordering::Relaxed).max(1);
    let fraction = clamp_events as f64 / clamp_evaluations as f64;
    if fraction > config.clamp_limit {
        return Err(MemmError::ExcessiveClamping {
            fraction,
            limit: config.clamp_limit,
            events: clamp_events,
            total: clamp_evaluations,
        });
    }

    let fields = match kind {
        SourceKind::Memm => Some(memm_fields(model, &u, config.kernel_tol)?),
        _ => None,
    };

    Ok(PicardSolution {
        surface: u,
        fields,
        report: FixedPointReport {
            iterations: sup_deltas.len(),
            sup_deltas,
            beta_deltas,
            beta_used: config.beta_diag,
            converged: true,
            post_convergence_delta: post_delta,
            c_trunc,
            clamp_events,
            clamp_evaluations,
        },
    })
}

/// Assembles the per-node measure-change fields from a converged surface.
pub fn memm_fields(model: &MarketModel, surface: &Surface, kernel_tol: f64) -> Result<MemmFields> {
    let grid = surface.grid.clone();
    let nt = grid.nt();
    let ny = grid.ny();
    let n_atoms = model.measure.len();
    let rows: Vec<Result<Vec<(f64, f64, f64, f64, Vec<f64>)>>> = map_indexed(nt, |j| {
        let t = grid.times[j];
        let mut row = Vec::with_capacity(ny);
        for &y in &grid.ys {
            let (du, _) = delta_u(surface, model, t, y)?;
            let (w_l, phi_hat, sigma_l, g) = solve_node(model, t, y, &du, kernel_tol)?;
            row.push((lambda_hat(model, t, y), phi_hat, sigma_l, g, w_l));
        }
        Ok(row)
    });

    let mut fields = MemmFields::zeros(grid, n_atoms);
    for (j, row) in rows.into_iter().enumerate() {
        for (k, (lh, phi_hat, sigma_l, g, w_l)) in row?.into_iter().enumerate() {
            let node = j * ny + k;
            fields.lambda_hat[node] = lh;
            fields.phi_hat[node] = phi_hat;
            fields.sigma_l[node] = sigma_l;
            fields.g[node] = g;
            fields.w_l[node * n_atoms..(node + 1) * n_atoms].copy_from_slice(&w_l);
        }
    }
    Ok(fields)
}

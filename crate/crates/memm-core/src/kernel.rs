//! Entropy kernel: the scalar fixed point behind the implicit jump kernel
//! `W_L`, and the assembly of the per-node measure-change ingredients
//! `(phi_hat, sigma_L, g)`.
//!
//! At a node `(t, y)` the kernel equation
//!
//! ```text
//! exp{ du(x) - [lh + int W_M W_L nu / sig^2] W_M(x) } = 1 - lh W_M(x) + W_L(x)
//! ```
//!
//! reduces, through `phi(x) := W_L(x) - lh W_M(x) + 1`, to the scalar
//! problem `Phi = int f(x) exp{k(x) - beta f(x) Phi} nu(dx)` with
//! `f = W_M`, `beta = 1/sig^2` and an affine shift of `du` inside `k`.
//! `H(z) = z - int f e^{k - beta f z} nu` is strictly increasing, so the
//! root is unique and bracketed by `|Phi| <= max_i e^{k_i} int |f| nu`.

use serde::Serialize;

use crate::error::{MemmError, Result};
use crate::grid::Grid;
use crate::measure::LevyMeasure;
use crate::model::{lambda_hat, MarketModel};
use crate::newton::newton_bisect;
use crate::stats::pairwise_sum;

/// Default absolute tolerance on `H(Phi)`.
pub const PHI_TOL: f64 = 1e-12;
/// Iteration cap for the scalar solve.
pub const PHI_MAX_ITER: usize = 200;

/// Solution of the scalar fixed point `H(Phi) = 0`.
#[derive(Debug, Clone)]
pub struct PhiSolution {
    /// The fixed-point value `Phi = int f phi nu`.
    pub phi: f64,
    /// Per-atom values `phi(x_i) = exp{k_i - beta f_i Phi} > 0`.
    pub phi_of_atom: Vec<f64>,
    pub iterations: usize,
    /// `H(Phi)` at the returned root.
    pub residual: f64,
}

/// Solves `Phi = sum_i w_i f_i exp{k_i - beta f_i Phi}` to `|H(Phi)| <= tol`.
///
/// Requires `beta > 0` and finite `f`, `k` per atom. `k` only needs to be
/// bounded above in the underlying theory; atoms are finitely many here, so
/// finiteness is the practical contract.
pub fn solve_phi_k(
    measure: &LevyMeasure,
    f: &[f64],
    k: &[f64],
    beta: f64,
    tol: f64,
) -> Result<PhiSolution> {
    let n = measure.len();
    assert_eq!(f.len(), n, "f must have one value per atom");
    assert_eq!(k.len(), n, "k must have one value per atom");
    if !(beta > 0.0) {
        return Err(MemmError::InvalidModel(format!(
            "solve_phi_k needs beta > 0, got {beta}"
        )));
    }
    for i in 0..n {
        if !f[i].is_finite() || !k[i].is_finite() {
            return Err(MemmError::NonFinite {
                context: format!("kernel data f={}, k={}", f[i], k[i]),
                location: format!("atom {i}"),
            });
        }
    }

    let weights: Vec<f64> = measure.atoms().iter().map(|a| a.w).collect();
    // |Phi| <= max_i e^{k_i} * int |f| nu
    let k_max = k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let abs_f_int = pairwise_sum(
        &weights
            .iter()
            .zip(f)
            .map(|(w, fi)| w * fi.abs())
            .collect::<Vec<_>>(),
    );
    let radius = if n == 0 { 0.0 } else { k_max.exp() * abs_f_int };
    if !radius.is_finite() {
        return Err(MemmError::NonFinite {
            context: format!("fixed-point bracket radius {radius}"),
            location: format!("k_max={k_max}"),
        });
    }

    if radius == 0.0 {
        // Empty measure or f == 0 on every atom: Phi = 0, phi_i = e^{k_i}.
        let phi_of_atom = k.iter().map(|ki| ki.exp()).collect();
        return Ok(PhiSolution {
            phi: 0.0,
            phi_of_atom,
            iterations: 0,
            residual: 0.0,
        });
    }

    let h = |z: f64| {
        let mut hv = z;
        let mut dv = 1.0;
        for i in 0..n {
            let e = (k[i] - beta * f[i] * z).exp();
            hv -= weights[i] * f[i] * e;
            dv += beta * weights[i] * f[i] * f[i] * e;
        }
        (hv, dv)
    };

    let root = newton_bisect(h, -radius, radius, tol, PHI_MAX_ITER)?;
    let phi_of_atom = (0..n)
        .map(|i| (k[i] - beta * f[i] * root.root).exp())
        .collect();
    Ok(PhiSolution {
        phi: root.root,
        phi_of_atom,
        iterations: root.iterations,
        residual: root.residual,
    })
}

/// Solves the implicit jump kernel `W_L` at `(t, y)` given the per-atom
/// value-function increments `delta_u`.
///
/// The returned values satisfy `1 - lambda_hat W_M(x_i) + W_L(x_i) > 0`
/// at every atom (it equals the strictly positive `phi(x_i)`).
pub fn solve_wl(
    model: &MarketModel,
    t: f64,
    y: f64,
    delta_u: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let f = model.w_m_atoms(t, y);
    let sig = (model.sigma_m)(t, y);
    let sig2 = sig * sig;
    let beta = 1.0 / sig2;
    let lh = lambda_hat(model, t, y);

    let wm_int = model.measure.integrate_values(&f);
    let wm2: Vec<f64> = f.iter().map(|v| v * v).collect();
    let wm2_int = model.measure.integrate_values(&wm2);
    // affine shift of delta_u inside the exponent
    let eta_shift = lh * (1.0 + wm2_int / sig2) - wm_int / sig2;

    let k: Vec<f64> = delta_u
        .iter()
        .zip(&f)
        .map(|(du, fi)| du - fi * eta_shift)
        .collect();
    let sol = solve_phi_k(&model.measure, &f, &k, beta, tol)?;
    Ok(sol
        .phi_of_atom
        .iter()
        .zip(&f)
        .map(|(phi, fi)| phi - 1.0 + lh * fi)
        .collect())
}

/// `phi_hat = -lambda_hat - int W_M W_L nu / sig^2` and
/// `sigma_L = (phi_hat + lambda_hat) sigma_M = -int W_M W_L nu / sigma_M`.
///
/// The second form is used so the orthogonality identity
/// `sigma_M sigma_L + int W_M W_L nu = 0` holds to rounding error.
pub fn compute_phi_sigma(model: &MarketModel, t: f64, y: f64, w_l: &[f64]) -> (f64, f64) {
    let f = model.w_m_atoms(t, y);
    let sig = (model.sigma_m)(t, y);
    let lh = lambda_hat(model, t, y);
    let cross: Vec<f64> = f.iter().zip(w_l).map(|(a, b)| a * b).collect();
    let cross_int = model.measure.integrate_values(&cross);
    let phi_hat = -lh - cross_int / (sig * sig);
    let sigma_l = -cross_int / sig;
    (phi_hat, sigma_l)
}

/// Source term of the value-function transport equation, in the substituted
/// form that avoids recomputing `sigma_L - lambda_hat sigma_M`:
///
/// ```text
/// g = 1/2 [ (int W_M W_L nu / sig)^2 - lh^2 sig^2 ]
///   + (int W_M nu - lh int W_M^2 nu) / sig^2 * int W_M W_L nu
///   + int W_L nu - lh^2 int W_M^2 nu
/// ```
///
/// Debug builds cross-check the expanded form [`g_value_reference`].
pub fn g_value(
    model: &MarketModel,
    t: f64,
    y: f64,
    w_l: &[f64],
    phi_hat: f64,
    sigma_l: f64,
) -> f64 {
    let f = model.w_m_atoms(t, y);
    let sig = (model.sigma_m)(t, y);
    let sig2 = sig * sig;
    let lh = lambda_hat(model, t, y);

    let cross: Vec<f64> = f.iter().zip(w_l).map(|(a, b)| a * b).collect();
    let cross_int = model.measure.integrate_values(&cross);
    let wm_int = model.measure.integrate_values(&f);
    let wm2: Vec<f64> = f.iter().map(|v| v * v).collect();
    let wm2_int = model.measure.integrate_values(&wm2);
    let wl_int = model.measure.integrate_values(w_l);

    let g = 0.5 * ((cross_int / sig) * (cross_int / sig) - lh * lh * sig2)
        + (wm_int - lh * wm2_int) / sig2 * cross_int
        + wl_int
        - lh * lh * wm2_int;

    #[cfg(debug_assertions)]
    {
        let reference = g_value_reference(model, t, y, w_l, phi_hat, sigma_l);
        let scale = g.abs().max(reference.abs()).max(lh * lh * sig2).max(1e-30);
        debug_assert!(
            (g - reference).abs() <= 1e-10 * scale,
            "g forms disagree at (t={t}, y={y}): {g} vs {reference}"
        );
    }
    #[cfg(not(debug_assertions))]
    {
        let _ = (phi_hat, sigma_l);
    }
    g
}

/// Expanded form of the source term,
/// `1/2 (sigma_L - lh sigma_M)^2 + phi_hat lh sigma_M^2
///  + int [W_L - (phi_hat + lh) W_M + phi_hat lh W_M^2] nu`.
pub fn g_value_reference(
    model: &MarketModel,
    t: f64,
    y: f64,
    w_l: &[f64],
    phi_hat: f64,
    sigma_l: f64,
) -> f64 {
    let f = model.w_m_atoms(t, y);
    let sig = (model.sigma_m)(t, y);
    let lh = lambda_hat(model, t, y);
    let diff = sigma_l - lh * sig;
    let jump_terms: Vec<f64> = w_l
        .iter()
        .zip(&f)
        .map(|(wl, wm)| wl - (phi_hat + lh) * wm + phi_hat * lh * wm * wm)
        .collect();
    let jump_int = model.measure.integrate_values(&jump_terms);
    0.5 * diff * diff + phi_hat * lh * sig * sig + jump_int
}

/// Solves the full kernel stack at one node: `W_L`, `phi_hat`, `sigma_L`
/// and the source value `g`.
pub fn solve_node(
    model: &MarketModel,
    t: f64,
    y: f64,
    delta_u: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, f64, f64, f64)> {
    let w_l = solve_wl(model, t, y, delta_u, tol)?;
    let (phi_hat, sigma_l) = compute_phi_sigma(model, t, y, &w_l);
    let g = g_value(model, t, y, &w_l, phi_hat, sigma_l);
    Ok((w_l, phi_hat, sigma_l, g))
}

/// Solved measure-change ingredients on every grid node.
#[derive(Debug, Clone, Serialize)]
pub struct MemmFields {
    pub grid: Grid,
    pub n_atoms: usize,
    /// Node-major arrays, `values[j * ny + k]`.
    pub lambda_hat: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub sigma_l: Vec<f64>,
    pub g: Vec<f64>,
    /// `w_l[(j * ny + k) * n_atoms + i]` for atom `i`.
    pub w_l: Vec<f64>,
}

impl MemmFields {
    pub fn zeros(grid: Grid, n_atoms: usize) -> Self {
        let n = grid.nt() * grid.ny();
        MemmFields {
            grid,
            n_atoms,
            lambda_hat: vec![0.0; n],
            phi_hat: vec![0.0; n],
            sigma_l: vec![0.0; n],
            g: vec![0.0; n],
            w_l: vec![0.0; n * n_atoms],
        }
    }

    #[inline]
    pub fn node(&self, j: usize, k: usize) -> usize {
        j * self.grid.ny() + k
    }

    pub fn w_l_at_node(&self, j: usize, k: usize) -> &[f64] {
        let idx = self.node(j, k) * self.n_atoms;
        &self.w_l[idx..idx + self.n_atoms]
    }

    /// Bilinear interpolation of the per-atom jump kernel at `(t, y)`;
    /// out-of-domain queries are clamped to the grid span.
    pub fn w_l_interp(&self, t: f64, y: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_atoms);
        if self.n_atoms == 0 {
            return;
        }
        let (j, wt, _) = self.grid.locate_t(t);
        let (k, wy, _) = self.grid.locate_y(y);
        let ny = self.grid.ny();
        let na = self.n_atoms;
        let base00 = (j * ny + k) * na;
        let base01 = (j * ny + k + 1) * na;
        let base10 = ((j + 1) * ny + k) * na;
        let base11 = ((j + 1) * ny + k + 1) * na;
        for i in 0..na {
            let a = self.w_l[base00 + i] + wy * (self.w_l[base01 + i] - self.w_l[base00 + i]);
            let b = self.w_l[base10 + i] + wy * (self.w_l[base11 + i] - self.w_l[base10 + i]);
            out[i] = a + wt * (b - a);
        }
    }

    /// Bilinear interpolation of a scalar node field.
    fn scalar_interp(&self, field: &[f64], t: f64, y: f64) -> f64 {
        let (j, wt, _) = self.grid.locate_t(t);
        let (k, wy, _) = self.grid.locate_y(y);
        let ny = self.grid.ny();
        let f = |jj: usize, kk: usize| field[jj * ny + kk];
        let a = f(j, k) + wy * (f(j, k + 1) - f(j, k));
        let b = f(j + 1, k) + wy * (f(j + 1, k + 1) - f(j + 1, k));
        a + wt * (b - a)
    }

    pub fn phi_hat_interp(&self, t: f64, y: f64) -> f64 {
        self.scalar_interp(&self.phi_hat, t, y)
    }

    pub fn g_interp(&self, t: f64, y: f64) -> f64 {
        self.scalar_interp(&self.g, t, y)
    }

    /// Per-atom maximum of the jump-density ratio `1 - lh W_M + W_L` over
    /// all grid nodes, used as the dominating intensity for thinning.
    pub fn ratio_sup(&self, model: &MarketModel) -> Vec<f64> {
        let mut sup = vec![0.0f64; self.n_atoms];
        let ny = self.grid.ny();
        for (j, &t) in self.grid.times.iter().enumerate() {
            for (k, &y) in self.grid.ys.iter().enumerate() {
                let lh = self.lambda_hat[j * ny + k];
                let wl = self.w_l_at_node(j, k);
                for (i, atom) in model.measure.atoms().iter().enumerate() {
                    let wm = (model.w_m)(t, y, atom.x);
                    let ratio = 1.0 - lh * wm + wl[i];
                    sup[i] = sup[i].max(ratio);
                }
            }
        }
        sup
    }
}

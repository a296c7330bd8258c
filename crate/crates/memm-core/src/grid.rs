//! Tensor grid over `[0,T] x E` and the value-function surface living on it.

use serde::Serialize;

use crate::error::{MemmError, Result};

/// Rectangular grid: increasing time nodes `t_0 = 0 < ... < t_N = T` and
/// state nodes spanning the domain `E`.
#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    pub times: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Grid {
    /// Uniform grid with `nt` time nodes on `[0, t_end]` and `ny` state
    /// nodes on `[y_lo, y_hi]`.
    pub fn uniform(t_end: f64, nt: usize, y_lo: f64, y_hi: f64, ny: usize) -> Result<Self> {
        if nt < 2 || ny < 2 {
            return Err(MemmError::InvalidModel(
                "grid needs at least 2 nodes per axis".into(),
            ));
        }
        if !(t_end > 0.0) || !(y_lo < y_hi) {
            return Err(MemmError::InvalidModel(
                "grid needs t_end > 0 and y_lo < y_hi".into(),
            ));
        }
        let times = (0..nt)
            .map(|j| t_end * j as f64 / (nt - 1) as f64)
            .collect();
        let ys = (0..ny)
            .map(|k| y_lo + (y_hi - y_lo) * k as f64 / (ny - 1) as f64)
            .collect();
        Ok(Grid { times, ys })
    }

    pub fn from_nodes(times: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || ys.len() < 2 {
            return Err(MemmError::InvalidModel(
                "grid needs at least 2 nodes per axis".into(),
            ));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) || !ys.windows(2).all(|w| w[0] < w[1]) {
            return Err(MemmError::InvalidModel(
                "grid nodes must be strictly increasing".into(),
            ));
        }
        Ok(Grid { times, ys })
    }

    pub fn nt(&self) -> usize {
        self.times.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }

    pub fn y_lo(&self) -> f64 {
        self.ys[0]
    }

    pub fn y_hi(&self) -> f64 {
        *self.ys.last().expect("non-empty grid")
    }

    /// Locates `y` for linear interpolation: segment index, weight of the
    /// right node, and whether `y` had to be clamped into the domain.
    pub fn locate_y(&self, y: f64) -> (usize, f64, bool) {
        locate(&self.ys, y)
    }

    /// Same for the time axis.
    pub fn locate_t(&self, t: f64) -> (usize, f64, bool) {
        locate(&self.times, t)
    }
}

fn locate(nodes: &[f64], x: f64) -> (usize, f64, bool) {
    let n = nodes.len();
    if x <= nodes[0] {
        return (0, 0.0, x < nodes[0]);
    }
    if x >= nodes[n - 1] {
        return (n - 2, 1.0, x > nodes[n - 1]);
    }
    // first node strictly greater than x
    let hi = nodes.partition_point(|&v| v <= x);
    let seg = hi - 1;
    let w = (x - nodes[seg]) / (nodes[seg + 1] - nodes[seg]);
    (seg, w, false)
}

/// Scalar field on a [`Grid`]: piecewise-linear in `y`, node rows in `t`
/// (the Picard solver evaluates only at time nodes; the Monte Carlo side
/// additionally interpolates linearly between rows).
#[derive(Debug, Clone, Serialize)]
pub struct Surface {
    pub grid: Grid,
    /// Row-major values: `values[j * ny + k]` at `(times[j], ys[k])`.
    pub values: Vec<f64>,
}

impl Surface {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.nt() * grid.ny();
        Surface {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Builds a surface from a node function.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let ny = grid.ny();
        let mut values = vec![0.0; grid.nt() * ny];
        for (j, &t) in grid.times.iter().enumerate() {
            for (k, &y) in grid.ys.iter().enumerate() {
                values[j * ny + k] = f(t, y);
            }
        }
        Surface { grid, values }
    }

    #[inline]
    pub fn value(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.grid.ny() + k]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, v: f64) {
        let ny = self.grid.ny();
        self.values[j * ny + k] = v;
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let ny = self.grid.ny();
        &self.values[j * ny..(j + 1) * ny]
    }

    /// Linear interpolation within the time-node row `j`; `y` outside the
    /// domain is clamped (flag returned).
    pub fn eval_row(&self, j: usize, y: f64) -> (f64, bool) {
        let (k, w, clamped) = self.grid.locate_y(y);
        let row = self.row(j);
        (row[k] + w * (row[k + 1] - row[k]), clamped)
    }

    /// Bilinear interpolation at an arbitrary `(t, y)`; both coordinates
    /// are clamped into the grid's span (flag returned).
    pub fn eval(&self, t: f64, y: f64) -> (f64, bool) {
        let (j, wt, ct) = self.grid.locate_t(t);
        let (a, ca) = self.eval_row(j, y);
        if wt == 0.0 {
            return (a, ct || ca);
        }
        let (b, cb) = self.eval_row(j + 1, y);
        (a + wt * (b - a), ct || ca || cb)
    }

    /// Sup-norm distance to another surface on the same grid.
    pub fn sup_delta(&self, other: &Surface) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Weighted sup-norm `sup e^{-beta (T - t)} |u|`-style distance, the
    /// contraction diagnostic norm. `beta = 0` recovers the sup-norm.
    pub fn beta_delta(&self, other: &Surface, beta: f64) -> f64 {
        let t_end = self.grid.t_end();
        let ny = self.grid.ny();
        let mut best = 0.0f64;
        for (j, &t) in self.grid.times.iter().enumerate() {
            let wgt = (-beta * (t_end - t)).exp();
            for k in 0..ny {
                let d = (self.values[j * ny + k] - other.values[j * ny + k]).abs() * wgt;
                best = best.max(d);
            }
        }
        best
    }

    /// Truncation `kappa`: clamps row `j` into `[-c (T - t_j), c (T - t_j)]`.
    pub fn truncated(&self, c: f64) -> Surface {
        let t_end = self.grid.t_end();
        let ny = self.grid.ny();
        let mut out = self.clone();
        for (j, &t) in self.grid.times.iter().enumerate() {
            let bound = c * (t_end - t);
            for k in 0..ny {
                out.values[j * ny + k] = self.values[j * ny + k].clamp(-bound, bound);
            }
        }
        out
    }

    /// True when the truncation at level `c` would leave the surface
    /// unchanged, i.e. `|u(t_j, .)| <= c (T - t_j)` everywhere.
    pub fn truncation_inactive(&self, c: f64) -> bool {
        let t_end = self.grid.t_end();
        let ny = self.grid.ny();
        self.grid.times.iter().enumerate().all(|(j, &t)| {
            let bound = c * (t_end - t);
            (0..ny).all(|k| self.values[j * ny + k].abs() <= bound)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_endpoints() {
        let g = Grid::uniform(2.0, 5, -1.0, 3.0, 9).unwrap();
        assert_eq!(g.times[0], 0.0);
        assert_eq!(g.t_end(), 2.0);
        assert_eq!(g.y_lo(), -1.0);
        assert_eq!(g.y_hi(), 3.0);
    }

    #[test]
    fn interpolation_is_exact_on_linear_functions() {
        let g = Grid::uniform(1.0, 7, 0.0, 2.0, 11).unwrap();
        let s = Surface::from_fn(g, |t, y| 3.0 * t - 2.0 * y + 1.0);
        let (v, clamped) = s.eval(0.437, 1.234);
        assert!(!clamped);
        assert!((v - (3.0 * 0.437 - 2.0 * 1.234 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn out_of_domain_evaluation_clamps_and_flags() {
        let g = Grid::uniform(1.0, 3, 0.0, 1.0, 3).unwrap();
        let s = Surface::from_fn(g, |_, y| y);
        let (v, clamped) = s.eval(0.5, 2.0);
        assert!(clamped);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn truncation_clamps_by_time_to_go() {
        let g = Grid::uniform(1.0, 3, 0.0, 1.0, 2).unwrap();
        let s = Surface::from_fn(g, |_, _| 10.0);
        let k = s.truncated(2.0);
        // rows at t = 0, 0.5, 1.0 with bounds 2, 1, 0
        assert_eq!(k.value(0, 0), 2.0);
        assert_eq!(k.value(1, 0), 1.0);
        assert_eq!(k.value(2, 0), 0.0);
        assert!(!s.truncation_inactive(2.0));
        assert!(k.truncated(2.0).truncation_inactive(2.0));
    }

    #[test]
    fn sup_delta_measures_max_difference() {
        let g = Grid::uniform(1.0, 3, 0.0, 1.0, 3).unwrap();
        let a = Surface::from_fn(g.clone(), |t, y| t + y);
        let b = Surface::from_fn(g, |t, y| t + y + if t > 0.9 { 0.25 } else { 0.0 });
        assert!((a.sup_delta(&b) - 0.25).abs() < 1e-15);
        assert!(a.beta_delta(&b, 0.0) == a.sup_delta(&b));
        assert!(a.beta_delta(&b, 5.0) <= a.sup_delta(&b));
    }
}

//! Model definition files: a TOML schema covering the named coefficient
//! families (constant, deterministic-volatility, orthogonal, bns) plus
//! explicit atom lists, and the shipped presets.

use serde::{Deserialize, Serialize};

use crate::error::{MemmError, Result};
use crate::measure::LevyMeasure;
use crate::model::MarketModel;
use crate::special::BnsParams;

/// One atom entry in a model file.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AtomSpec {
    pub x: f64,
    pub w: f64,
}

/// Atoms generated from an exponential-tail density `a e^{-b x}` on
/// `(0, x_max]` via midpoint quadrature with `n` atoms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExpTailSpec {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub x_max: f64,
}

fn default_one() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Parsed model file. The `kind` key selects the coefficient family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFile {
    /// Constant base coefficients with optional smooth state dependence:
    /// `eta_M = eta_m + eta_m_slope tanh(y - y_mean)`, same for `sigma_M`;
    /// `W_M = jump_scale_m x`; `W_V = jump_scale_v x`, tapered toward the
    /// upper domain edge when `taper_v` so jumps cannot leave the domain;
    /// `eta_V = -kappa (y - y_mean)`.
    Constant {
        horizon: f64,
        #[serde(default = "default_one")]
        s0: f64,
        v0: f64,
        domain: [f64; 2],
        eta_m: f64,
        #[serde(default)]
        eta_m_slope: f64,
        sigma_m: f64,
        #[serde(default)]
        sigma_m_slope: f64,
        #[serde(default)]
        jump_scale_m: f64,
        #[serde(default)]
        jump_scale_v: f64,
        #[serde(default = "default_true")]
        taper_v: bool,
        #[serde(default)]
        kappa: f64,
        v_mean: f64,
        #[serde(default)]
        atoms: Vec<AtomSpec>,
    },
    /// Deterministic volatility: no state jumps (`W_V == 0`), optional
    /// linear time ramps `coef(t) = base (1 + ramp t)`.
    Deterministic {
        horizon: f64,
        #[serde(default = "default_one")]
        s0: f64,
        v0: f64,
        domain: [f64; 2],
        eta_m: f64,
        #[serde(default)]
        eta_m_ramp: f64,
        sigma_m: f64,
        #[serde(default)]
        sigma_m_ramp: f64,
        #[serde(default)]
        jump_scale_m: f64,
        #[serde(default)]
        atoms: Vec<AtomSpec>,
    },
    /// Orthogonal volatility: no price jumps. The risk premium is given
    /// directly as `lambda_hat(y) = lam0 + lam1 tanh(y - v_mean)` with
    /// `eta_M = lambda_hat sigma_M^2`.
    Orthogonal {
        horizon: f64,
        #[serde(default = "default_one")]
        s0: f64,
        v0: f64,
        domain: [f64; 2],
        sigma_m: f64,
        lam0: f64,
        #[serde(default)]
        lam1: f64,
        #[serde(default)]
        kappa: f64,
        v_mean: f64,
        #[serde(default)]
        jump_scale_v: f64,
        #[serde(default = "default_true")]
        taper_v: bool,
        #[serde(default)]
        atoms: Vec<AtomSpec>,
    },
    /// OU-subordinator stochastic volatility with leverage. The atom list
    /// (or exponential-tail quadrature) describes the subordinator measure
    /// `nu`; the driving compensator is `lam nu`.
    Bns {
        horizon: f64,
        #[serde(default = "default_one")]
        s0: f64,
        mu: f64,
        beta: f64,
        rho: f64,
        lam: f64,
        sigma0_sq: f64,
        #[serde(default)]
        y_max: Option<f64>,
        #[serde(default)]
        atoms: Vec<AtomSpec>,
        #[serde(default)]
        exp_tail: Option<ExpTailSpec>,
    },
}

/// A model file resolved into runnable pieces.
pub struct BuiltModel {
    pub model: MarketModel,
    /// Populated for the `bns` family.
    pub bns: Option<BnsParams>,
    /// Whether the orthogonal reduced solver applies (`W_M == 0`).
    pub orthogonal: bool,
    /// Solver clamp allowance appropriate for the family (the truncated
    /// state domain of `bns` clamps by design).
    pub clamp_limit: f64,
}

fn atoms_to_measure(atoms: &[AtomSpec]) -> Result<LevyMeasure> {
    LevyMeasure::new(atoms.iter().map(|a| (a.x, a.w)))
}

impl ModelFile {
    /// Parses a TOML model definition.
    pub fn parse(text: &str) -> Result<ModelFile> {
        toml::from_str(text).map_err(|e| MemmError::Parse(e.to_string()))
    }

    /// Reads and parses a model file from disk.
    pub fn load(path: &std::path::Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            MemmError::Parse(format!("cannot read model file {}: {e}", path.display()))
        })?;
        ModelFile::parse(&text)
    }

    /// Serializes back to TOML (used by run manifests).
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("model file serializes")
    }

    /// Builds the market model described by the file.
    pub fn build(&self) -> Result<BuiltModel> {
        match self.clone() {
            ModelFile::Constant {
                horizon,
                s0,
                v0,
                domain,
                eta_m,
                eta_m_slope,
                sigma_m,
                sigma_m_slope,
                jump_scale_m,
                jump_scale_v,
                taper_v,
                kappa,
                v_mean,
                atoms,
            } => {
                let measure = atoms_to_measure(&atoms)?;
                let (y_lo, y_hi) = (domain[0], domain[1]);
                let width = y_hi - y_lo;
                let taper = move |y: f64| {
                    if taper_v {
                        (y_hi - y) / width
                    } else {
                        1.0
                    }
                };
                let orthogonal = jump_scale_m == 0.0;
                let model = MarketModel::builder()
                    .eta_m(move |_, y| eta_m + eta_m_slope * (y - v_mean).tanh())
                    .sigma_m(move |_, y| sigma_m + sigma_m_slope * (y - v_mean).tanh())
                    .w_m(move |_, _, x| jump_scale_m * x)
                    .eta_v(move |_, y| -kappa * (y - v_mean))
                    .w_v(move |_, y, x| jump_scale_v * x * taper(y))
                    .domain(y_lo, y_hi)
                    .horizon(horizon)
                    .s0(s0)
                    .v0(v0)
                    .measure(measure)
                    .build()?;
                Ok(BuiltModel {
                    model,
                    bns: None,
                    orthogonal,
                    clamp_limit: 0.01,
                })
            }
            ModelFile::Deterministic {
                horizon,
                s0,
                v0,
                domain,
                eta_m,
                eta_m_ramp,
                sigma_m,
                sigma_m_ramp,
                jump_scale_m,
                atoms,
            } => {
                let measure = atoms_to_measure(&atoms)?;
                let model = MarketModel::builder()
                    .eta_m(move |t, _| eta_m * (1.0 + eta_m_ramp * t))
                    .sigma_m(move |t, _| sigma_m * (1.0 + sigma_m_ramp * t))
                    .w_m(move |_, _, x| jump_scale_m * x)
                    .domain(domain[0], domain[1])
                    .horizon(horizon)
                    .s0(s0)
                    .v0(v0)
                    .measure(measure)
                    .build()?;
                Ok(BuiltModel {
                    model,
                    bns: None,
                    orthogonal: jump_scale_m == 0.0,
                    clamp_limit: 0.01,
                })
            }
            ModelFile::Orthogonal {
                horizon,
                s0,
                v0,
                domain,
                sigma_m,
                lam0,
                lam1,
                kappa,
                v_mean,
                jump_scale_v,
                taper_v,
                atoms,
            } => {
                let measure = atoms_to_measure(&atoms)?;
                let (y_lo, y_hi) = (domain[0], domain[1]);
                let width = y_hi - y_lo;
                let taper = move |y: f64| {
                    if taper_v {
                        (y_hi - y) / width
                    } else {
                        1.0
                    }
                };
                let model = MarketModel::builder()
                    .eta_m(move |_, y| {
                        (lam0 + lam1 * (y - v_mean).tanh()) * sigma_m * sigma_m
                    })
                    .sigma_m(move |_, _| sigma_m)
                    .eta_v(move |_, y| -kappa * (y - v_mean))
                    .w_v(move |_, y, x| jump_scale_v * x * taper(y))
                    .domain(y_lo, y_hi)
                    .horizon(horizon)
                    .s0(s0)
                    .v0(v0)
                    .measure(measure)
                    .build()?;
                Ok(BuiltModel {
                    model,
                    bns: None,
                    orthogonal: true,
                    clamp_limit: 0.01,
                })
            }
            ModelFile::Bns {
                horizon,
                s0,
                mu,
                beta,
                rho,
                lam,
                sigma0_sq,
                y_max,
                atoms,
                exp_tail,
            } => {
                let (measure, tail_rate) = match (&exp_tail, atoms.is_empty()) {
                    (Some(spec), true) => (
                        LevyMeasure::from_exponential_density(spec.a, spec.b, spec.n, spec.x_max)?,
                        Some(spec.b),
                    ),
                    (None, false) => (atoms_to_measure(&atoms)?, None),
                    (Some(_), false) => {
                        return Err(MemmError::Parse(
                            "bns: give either atoms or exp_tail, not both".into(),
                        ))
                    }
                    (None, true) => {
                        return Err(MemmError::Parse(
                            "bns: one of atoms or exp_tail is required".into(),
                        ))
                    }
                };
                let params = BnsParams {
                    mu,
                    beta,
                    rho,
                    lam,
                    sigma0_sq,
                    measure,
                    y_max,
                    horizon,
                    s0,
                    tail_rate,
                };
                let model = crate::special::build_bns_model(&params)?;
                Ok(BuiltModel {
                    model,
                    bns: Some(params),
                    orthogonal: false,
                    // the truncated domain clamps by construction near its
                    // upper edge; clamping is reported, not fatal
                    clamp_limit: 1.0,
                })
            }
        }
    }

    /// Built-in presets: `bs-flat`, `single-atom`, `deterministic`,
    /// `orthogonal`, `bns`.
    pub fn preset(name: &str) -> Result<ModelFile> {
        match name {
            "bs-flat" => Ok(ModelFile::Constant {
                horizon: 1.0,
                s0: 1.0,
                v0: 1.0,
                domain: [0.5, 2.0],
                eta_m: 0.08,
                eta_m_slope: 0.0,
                sigma_m: 0.2,
                sigma_m_slope: 0.0,
                jump_scale_m: 0.0,
                jump_scale_v: 0.0,
                taper_v: true,
                kappa: 0.0,
                v_mean: 1.0,
                atoms: vec![],
            }),
            "single-atom" => Ok(ModelFile::Constant {
                horizon: 1.0,
                s0: 1.0,
                v0: 1.0,
                domain: [0.5, 2.0],
                eta_m: 0.06,
                eta_m_slope: 0.02,
                sigma_m: 0.2,
                sigma_m_slope: 0.02,
                jump_scale_m: 0.08,
                jump_scale_v: 0.15,
                taper_v: true,
                kappa: 0.6,
                v_mean: 1.0,
                atoms: vec![AtomSpec { x: 1.0, w: 0.5 }],
            }),
            "deterministic" => Ok(ModelFile::Deterministic {
                horizon: 1.0,
                s0: 1.0,
                v0: 1.0,
                domain: [0.5, 2.0],
                eta_m: 0.05,
                eta_m_ramp: 0.0,
                sigma_m: 0.2,
                sigma_m_ramp: 0.0,
                jump_scale_m: 0.1,
                atoms: vec![AtomSpec { x: 1.0, w: 1.0 }],
            }),
            "orthogonal" => Ok(ModelFile::Orthogonal {
                horizon: 1.0,
                s0: 1.0,
                v0: 1.0,
                domain: [0.5, 2.0],
                sigma_m: 0.25,
                lam0: 0.5,
                lam1: 0.1,
                kappa: 0.3,
                v_mean: 1.0,
                jump_scale_v: 0.2,
                taper_v: true,
                atoms: vec![AtomSpec { x: 1.0, w: 0.3 }],
            }),
            "bns" => Ok(ModelFile::Bns {
                horizon: 1.0,
                s0: 1.0,
                mu: 0.06,
                beta: 0.0,
                rho: -1.0,
                lam: 1.0,
                sigma0_sq: 0.04,
                y_max: None,
                atoms: vec![],
                exp_tail: Some(ExpTailSpec {
                    a: 100.0,
                    b: 50.0,
                    n: 12,
                    x_max: 0.16,
                }),
            }),
            other => Err(MemmError::Parse(format!(
                "unknown preset '{other}'; available: bs-flat, single-atom, deterministic, orthogonal, bns"
            ))),
        }
    }
}

//! Command implementations and artifact writing.

use std::path::PathBuf;

use memm_core::ipde::{picard_solve, PicardConfig, PicardSolution, SourceKind};
use memm_core::model::validate_model;
use memm_core::montecarlo::{
    pathwise_residual, simulate_paths, simulate_summary, verify_suite, MeasureKind,
};
use memm_core::special::{check_bns_admissibility, solve_orthogonal};
use memm_core::stats::median;
use memm_core::{BuiltModel, Grid, MemmError, ModelFile};

use crate::output;
use crate::{McArgs, ModelSource, SolveArgs};
use crate::{EXIT_CONFIG, EXIT_NO_CONVERGENCE, EXIT_OK, EXIT_VERIFY_FAILED};

pub const SCHEMA_REFERENCE: &str = r#"Model files are TOML documents selected by a `kind` key.

kind = "constant"       # constant base coefficients, optional state tilt
  horizon, s0 (=1), v0, domain = [y_lo, y_hi], v_mean
  eta_m, eta_m_slope (=0)       # eta_M(y)   = eta_m   + eta_m_slope   * tanh(y - v_mean)
  sigma_m, sigma_m_slope (=0)   # sigma_M(y) = sigma_m + sigma_m_slope * tanh(y - v_mean)
  jump_scale_m (=0)             # W_M(x) = jump_scale_m * x
  jump_scale_v (=0), taper_v (=true)
                                # W_V(y, x) = jump_scale_v * x, scaled by
                                # (y_hi - y)/(y_hi - y_lo) when taper_v
  kappa (=0)                    # eta_V(y) = -kappa * (y - v_mean)
  atoms = [{ x, w }, ...]       # jump sizes and intensities

kind = "deterministic"  # no state jumps (W_V == 0)
  horizon, s0 (=1), v0, domain
  eta_m, eta_m_ramp (=0)        # eta_M(t) = eta_m * (1 + eta_m_ramp * t)
  sigma_m, sigma_m_ramp (=0)
  jump_scale_m (=0), atoms

kind = "orthogonal"     # no price jumps (W_M == 0)
  horizon, s0 (=1), v0, domain, v_mean
  sigma_m
  lam0, lam1 (=0)               # risk premium lam0 + lam1 * tanh(y - v_mean)
  kappa (=0), jump_scale_v (=0), taper_v (=true), atoms

kind = "bns"            # OU-subordinator volatility with leverage
  horizon, s0 (=1)
  mu, beta, rho (<= 0), lam (> 0), sigma0_sq (> 0)
  y_max (optional; default = sigma0_sq + 99.9% quantile of the simulated
         jump accumulation)
  atoms = [{ x, w }, ...]       # subordinator measure nu (positive sizes)
  # or instead of atoms:
  exp_tail = { a, b, n, x_max } # midpoint quadrature of a*exp(-b*x)

Presets: bs-flat, single-atom, deterministic, orthogonal, bns."#;

pub fn exit_code_for(e: &MemmError) -> u8 {
    match e {
        MemmError::PicardNoConvergence { .. }
        | MemmError::RootNoConvergence { .. }
        | MemmError::TruncationActive { .. }
        | MemmError::ExcessiveClamping { .. }
        | MemmError::Corruption(_) => EXIT_NO_CONVERGENCE,
        _ => EXIT_CONFIG,
    }
}

fn load_model(source: &ModelSource) -> Result<(ModelFile, BuiltModel), MemmError> {
    let file = match (&source.model, &source.preset) {
        (Some(path), None) => ModelFile::load(path)?,
        (None, Some(name)) => ModelFile::preset(name)?,
        _ => {
            return Err(MemmError::Parse(
                "exactly one of --model or --preset is required".into(),
            ))
        }
    };
    let built = file.build()?;
    Ok((file, built))
}

pub fn cmd_validate(source: &ModelSource, grid: (usize, usize)) -> Result<u8, MemmError> {
    let (_, built) = load_model(source)?;
    let report = validate_model(&built.model, grid.0, grid.1)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    Ok(if report.passed { EXIT_OK } else { EXIT_CONFIG })
}

pub struct SolveOutput {
    pub built: BuiltModel,
    pub solution: PicardSolution,
    pub out_dir: PathBuf,
}

pub fn cmd_solve(args: &SolveArgs) -> Result<SolveOutput, MemmError> {
    memm_core::parallel::configure_threads(args.threads);
    let (file, built) = load_model(&args.source)?;
    let model = &built.model;

    let report = validate_model(model, 64, 64)?;
    if !report.passed {
        let first = &report.violations[0];
        return Err(MemmError::ValidationFailed {
            count: report.violations.len(),
            first: format!("{}: {}", first.assumption, first.message),
        });
    }

    let grid = Grid::uniform(
        model.horizon,
        args.grid.0,
        model.domain.0,
        model.domain.1,
        args.grid.1,
    )?;
    let config = PicardConfig {
        tol: args.tol,
        clamp_limit: built.clamp_limit,
        ..PicardConfig::default()
    };
    let solution = picard_solve(model, &grid, &SourceKind::Memm, &config)?;
    let c = solution.entropy_constant(model.v0);

    std::fs::create_dir_all(&args.out)?;
    let fields = solution.fields.as_ref().expect("memm run provides fields");
    output::write_surface_csv(
        &args.out.join("surface.csv"),
        &solution.surface,
        fields,
        model,
    )?;
    output::write_fields_csv(&args.out.join("fields.csv"), fields)?;

    let mut report_json = serde_json::json!({
        "converged": solution.report.converged,
        "iterations": solution.report.iterations,
        "sup_deltas": solution.report.sup_deltas,
        "beta_used": solution.report.beta_used,
        "post_convergence_delta": solution.report.post_convergence_delta,
        "c_trunc": solution.report.c_trunc,
        "clamp_events": solution.report.clamp_events,
        "clamp_evaluations": solution.report.clamp_evaluations,
        "c": c,
        "grid": { "nt": args.grid.0, "ny": args.grid.1 },
        "tol": args.tol,
    });

    // orthogonal models also get the linear-transform solution and the
    // exp(u) ~ v cross-check
    if built.orthogonal {
        let ortho = solve_orthogonal(model, &grid, &config)?;
        output::write_v_surface_csv(&args.out.join("v_surface.csv"), &ortho.v)?;
        let mut delta: f64 = 0.0;
        for (a, b) in solution.surface.values.iter().zip(&ortho.u.values) {
            delta = delta.max((a - b).abs());
        }
        report_json["orthogonal_cross_check_sup_delta"] = serde_json::json!(delta);
    }

    output::write_json(&args.out.join("report.json"), &report_json)?;

    let manifest = serde_json::json!({
        "command": "solve",
        "package_version": env!("CARGO_PKG_VERSION"),
        "model": file.to_toml(),
        "grid": { "nt": args.grid.0, "ny": args.grid.1 },
        "tol": args.tol,
        "threads": args.threads,
    });
    output::write_json(&args.out.join("manifest.json"), &manifest)?;

    println!(
        "solved in {} sweeps; c = {:.12e}; artifacts in {}",
        solution.report.iterations,
        c,
        args.out.display()
    );
    Ok(SolveOutput {
        built,
        solution,
        out_dir: args.out.clone(),
    })
}

pub fn cmd_simulate(
    args: &SolveArgs,
    mc: &McArgs,
    qstar: bool,
    dump_paths: bool,
) -> Result<u8, MemmError> {
    let solved = cmd_solve(args)?;
    let model = &solved.built.model;
    let fields = solved.solution.fields.as_ref().expect("solved fields");
    let kind = if qstar {
        MeasureKind::QStar
    } else {
        MeasureKind::P
    };

    let summary = simulate_summary(model, Some(fields), kind, mc.paths, mc.steps, mc.seed)?;
    output::write_json(
        &solved.out_dir.join("simulate.json"),
        &serde_json::json!({
            "measure": if qstar { "qstar" } else { "p" },
            "seed": mc.seed,
            "summary": summary,
        }),
    )?;

    if dump_paths {
        if mc.paths > 10_000 {
            return Err(MemmError::InvalidModel(
                "--dump-paths is limited to 10000 paths".into(),
            ));
        }
        let paths = simulate_paths(model, Some(fields), kind, mc.paths, mc.steps, mc.seed)?;
        output::write_paths_csv(&solved.out_dir.join("paths.csv"), &paths)?;
    }
    println!(
        "simulated {} paths x {} steps under {}; summary in {}",
        mc.paths,
        mc.steps,
        if qstar { "Q*" } else { "P" },
        solved.out_dir.join("simulate.json").display()
    );
    Ok(EXIT_OK)
}

pub fn cmd_verify(
    args: &SolveArgs,
    mc: &McArgs,
    z_max: f64,
    corrupt_fields: bool,
) -> Result<u8, MemmError> {
    let solved = cmd_solve(args)?;
    let model = &solved.built.model;
    let mut fields = solved
        .solution
        .fields
        .clone()
        .expect("solved fields present");
    let mut surface = solved.solution.surface.clone();
    if corrupt_fields {
        // negative control: break the measure change (kernel shift), the
        // reported strategy (sign), and the entropy constant (surface tilt)
        for p in fields.phi_hat.iter_mut() {
            *p = -*p;
        }
        for w in fields.w_l.iter_mut() {
            *w += 0.5;
        }
        let t_end = surface.grid.t_end();
        let ny = surface.grid.ny();
        let times = surface.grid.times.clone();
        for (j, &t) in times.iter().enumerate() {
            for k in 0..ny {
                let v = surface.value(j, k) + 0.1 * (t_end - t);
                surface.set(j, k, v);
            }
        }
    }

    let report = verify_suite(model, &fields, &surface, mc.paths, mc.steps, mc.seed)?;

    // median pathwise residual over recorded objective-measure paths
    let n_residual_paths = mc.paths.min(1000);
    let paths = simulate_paths(
        model,
        Some(&fields),
        MeasureKind::P,
        n_residual_paths,
        mc.steps,
        mc.seed ^ 0x7E5,
    )?;
    let residuals: Vec<f64> = paths
        .iter()
        .map(|p| pathwise_residual(model, p, &surface, &fields).map(f64::abs))
        .collect::<Result<_, _>>()?;
    let residual_median = median(&residuals);
    let g_sup = fields.g.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let residual_bound = 10.0 * g_sup * model.horizon / mc.steps as f64 + 1e-12;

    let mut failed: Vec<String> = report
        .stats
        .iter()
        .filter(|s| !(s.z_score.abs() <= z_max))
        .map(|s| format!("{} (z = {:.2})", s.name, s.z_score))
        .collect();
    if residual_median > residual_bound {
        failed.push(format!(
            "median pathwise residual {residual_median:.3e} > bound {residual_bound:.3e}"
        ));
    }

    let passed = failed.is_empty();
    output::write_json(
        &solved.out_dir.join("stats.json"),
        &serde_json::json!({
            "stats": report.stats,
            "c": report.c,
            "clamped_step_fraction": report.clamped_step_fraction,
            "z_max": z_max,
            "residual_median": residual_median,
            "residual_bound": residual_bound,
            "n_paths": mc.paths,
            "n_steps": mc.steps,
            "seed": mc.seed,
            "passed": passed,
            "failed": failed,
        }),
    )?;

    for s in &report.stats {
        println!(
            "{}: estimate {:.6e} target {:.6e} se {:.3e} z {:+.2}",
            s.name, s.estimate, s.target, s.standard_error, s.z_score
        );
    }
    println!("median |pathwise residual| {residual_median:.3e} (bound {residual_bound:.3e})");
    if passed {
        println!("verification passed");
        Ok(EXIT_OK)
    } else {
        eprintln!("verification FAILED: {}", failed.join("; "));
        Ok(EXIT_VERIFY_FAILED)
    }
}

pub fn cmd_bns_check(source: &ModelSource) -> Result<u8, MemmError> {
    let (_, built) = load_model(source)?;
    let params = built.bns.as_ref().ok_or_else(|| {
        MemmError::InvalidModel("bns-check requires a bns-kind model".into())
    })?;
    let report = check_bns_admissibility(params)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    Ok(if report.lambda_hat_positive && report.tail_admissible != Some(false) {
        EXIT_OK
    } else {
        EXIT_CONFIG
    })
}

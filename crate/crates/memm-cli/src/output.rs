//! Artifact writers. Floats are written with Rust's shortest-roundtrip
//! formatting, so re-reading a CSV reproduces values bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use memm_core::grid::Surface;
use memm_core::kernel::MemmFields;
use memm_core::model::MarketModel;
use memm_core::montecarlo::PathSample;
use memm_core::MemmError;

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), MemmError> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    std::fs::write(path, text)?;
    Ok(())
}

fn wl_header(n_atoms: usize) -> String {
    let mut h = String::new();
    for i in 0..n_atoms {
        let _ = write!(h, ",WL_{i}");
    }
    h
}

/// `t,y,u,phi_hat,sigma_L,g,WL_0,...` one row per grid node.
pub fn write_surface_csv(
    path: &Path,
    surface: &Surface,
    fields: &MemmFields,
    model: &MarketModel,
) -> Result<(), MemmError> {
    let _ = model;
    let grid = &surface.grid;
    let n_atoms = fields.n_atoms;
    let mut out = format!("t,y,u,phi_hat,sigma_L,g{}\n", wl_header(n_atoms));
    for (j, &t) in grid.times.iter().enumerate() {
        for (k, &y) in grid.ys.iter().enumerate() {
            let node = fields.node(j, k);
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                t,
                y,
                surface.value(j, k),
                fields.phi_hat[node],
                fields.sigma_l[node],
                fields.g[node]
            );
            for i in 0..n_atoms {
                let _ = write!(out, ",{}", fields.w_l[node * n_atoms + i]);
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// `t,y,lambda_hat,phi_hat,sigma_L,g,WL_0,...` one row per grid node.
pub fn write_fields_csv(path: &Path, fields: &MemmFields) -> Result<(), MemmError> {
    let grid = &fields.grid;
    let n_atoms = fields.n_atoms;
    let mut out = format!("t,y,lambda_hat,phi_hat,sigma_L,g{}\n", wl_header(n_atoms));
    for (j, &t) in grid.times.iter().enumerate() {
        for (k, &y) in grid.ys.iter().enumerate() {
            let node = fields.node(j, k);
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                t, y, fields.lambda_hat[node], fields.phi_hat[node], fields.sigma_l[node], fields.g[node]
            );
            for i in 0..n_atoms {
                let _ = write!(out, ",{}", fields.w_l[node * n_atoms + i]);
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// `t,y,v` rows of the orthogonal transform surface.
pub fn write_v_surface_csv(path: &Path, v: &Surface) -> Result<(), MemmError> {
    let mut out = String::from("t,y,v\n");
    for (j, &t) in v.grid.times.iter().enumerate() {
        for (k, &y) in v.grid.ys.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", t, y, v.value(j, k));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// `path,step,t,s,v,log_z,jumps` one row per step of every path.
pub fn write_paths_csv(path: &Path, paths: &[PathSample]) -> Result<(), MemmError> {
    let mut out = String::from("path,step,t,s,v,log_z,jumps_in_step\n");
    for (p, sample) in paths.iter().enumerate() {
        for l in 0..sample.times.len() {
            let jumps = sample
                .jumps
                .iter()
                .filter(|&&(step, _)| step + 1 == l)
                .count();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p, l, sample.times[l], sample.s[l], sample.v[l], sample.log_z[l], jumps
            );
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

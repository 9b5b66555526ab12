//! `evolve <config>`: run a configured evolution, writing snapshots, the
//! diagnostics CSV, a summary JSON and optional SVG plots.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};

use borelkin::dynamics::{evolve, EvolveOutput, RunStatus};
use borelkin::io::{write_diagnostics_csv, write_snapshot};
use borelkin::manifold::ManifoldKind;

use crate::config::{BuiltRun, RunConfig};
use crate::plot::{heatmap, line_chart, Series};
use crate::report::RunSummary;

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

pub fn run(config_path: &Path) -> Result<i32> {
    let config = load_config(config_path)?;
    let built = config.build()?;
    execute(&built)
}

pub fn execute(built: &BuiltRun) -> Result<i32> {
    let start = Instant::now();
    fs::create_dir_all(&built.out_dir)
        .with_context(|| format!("cannot create {}", built.out_dir.display()))?;

    let out = evolve(
        &built.psi0,
        &built.params,
        built.t_final,
        &built.probes,
        built.snapshot_every,
    )?;
    write_artifacts(built, &out, start.elapsed().as_secs_f64())?;

    match &out.status {
        RunStatus::Completed => {
            println!(
                "completed: {} steps, artifacts in {}",
                out.records.len().saturating_sub(1),
                built.out_dir.display()
            );
            Ok(0)
        }
        status => {
            eprintln!(
                "run aborted ({status:?}); partial diagnostics preserved in {}",
                built.out_dir.display()
            );
            Ok(3)
        }
    }
}

fn write_artifacts(built: &BuiltRun, out: &EvolveOutput, wall_time_s: f64) -> Result<()> {
    for (i, (time, state)) in out.snapshots.iter().enumerate() {
        let path = built.out_dir.join(format!("snapshot_{i:05}.bin"));
        write_snapshot(&path, state, *time)?;
    }

    let mut csv = Vec::new();
    write_diagnostics_csv(&mut csv, &out.records, &built.probes)?;
    fs::write(built.out_dir.join("diagnostics.csv"), csv)?;

    let initial_norm = built.psi0.norm();
    let final_norm = out.records.last().map(|r| r.norm).unwrap_or(f64::NAN);
    let summary = RunSummary {
        status: match &out.status {
            RunStatus::Completed => "completed".to_string(),
            other => format!("{other:?}"),
        },
        steps: out.records.len().saturating_sub(1),
        t_final: out.records.last().map(|r| r.time).unwrap_or(0.0),
        final_norm,
        norm_drift: (final_norm - initial_norm).abs(),
        min_density: out.records.iter().map(|r| r.min_rho).fold(f64::INFINITY, f64::min),
        max_ehrenfest: out.records.iter().map(|r| r.ehrenfest_max).fold(0.0, f64::max),
        max_fp_residual: out.records.iter().map(|r| r.fp_residual).fold(0.0, f64::max),
        max_boundary_mass: out.records.iter().map(|r| r.boundary_mass).fold(0.0, f64::max),
        snapshots: out.snapshots.len(),
        wall_time_s,
    };
    fs::write(
        built.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;

    if built.plots {
        write_plots(built, out)?;
    }
    Ok(())
}

fn write_plots(built: &BuiltRun, out: &EvolveOutput) -> Result<()> {
    // Diagnostics: log10 of norm deviation and residuals over time.
    let log_floor = 1e-18f64;
    let series = |f: &dyn Fn(&borelkin::dynamics::DiagnosticsRecord) -> f64| {
        out.records
            .iter()
            .map(|r| (r.time, f(r).abs().max(log_floor).log10()))
            .collect::<Vec<_>>()
    };
    let norm0 = built.psi0.norm();
    line_chart(
        &built.out_dir.join("diagnostics.svg"),
        "diagnostics (log10)",
        "time",
        "log10 value",
        &[
            Series { label: "|norm - norm0|", points: series(&|r| r.norm - norm0) },
            Series { label: "continuity residual", points: series(&|r| r.fp_residual) },
            Series { label: "ehrenfest residual", points: series(&|r| r.ehrenfest_max) },
        ],
    )?;

    if let Some((time, state)) = out.snapshots.last() {
        let rho = state.density();
        let grid = state.grid();
        match grid.kind() {
            ManifoldKind::Torus2 => {
                heatmap(
                    &built.out_dir.join("density.svg"),
                    &format!("density at t = {time:.3}"),
                    &rho,
                    grid.shape(),
                )?;
            }
            _ => {
                let xs = grid.coordinates(0);
                let points =
                    xs.iter().zip(&rho).map(|(&x, &r)| (x, r)).collect::<Vec<_>>();
                line_chart(
                    &built.out_dir.join("density.svg"),
                    &format!("density at t = {time:.3}"),
                    "x",
                    "density",
                    &[Series { label: "density", points }],
                )?;
            }
        }
    }
    Ok(())
}

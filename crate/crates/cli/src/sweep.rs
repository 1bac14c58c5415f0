//! Runs several configurations concurrently and joins their final
//! diagnostics into one table.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output;
use crate::runner::{run, Overrides, RunSummary};

pub const SWEEP_COLUMNS: &str = "name,status,flux,delta,steps,t,stationary,mass1,mass2,entropy,grad_sq,overlap,min1,min2,delta_grad_sq,spacetime_grad_sq,delta_spacetime_grad_sq,error";

pub struct SweepReport {
    pub csv: String,
    /// Results in input order.
    pub results: Vec<(String, Result<RunSummary, CliError>)>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|(_, r)| r.is_err()).count()
    }
}

/// Rejects duplicate names and differing meshes before anything runs.
pub fn check_compatible(configs: &[RunConfig]) -> Result<(), CliError> {
    let mut seen = HashSet::new();
    for c in configs {
        if !seen.insert(c.name.as_str()) {
            return Err(CliError::config(
                "name",
                format!("duplicate config name `{}` in sweep", c.name),
            ));
        }
    }
    if let Some(first) = configs.first() {
        if let Some(other) = configs.iter().find(|c| c.mesh != first.mesh) {
            return Err(CliError::config(
                "mesh",
                format!("`{}` and `{}` use different meshes", first.name, other.name),
            ));
        }
    }
    Ok(())
}

pub fn sweep(
    configs: &[RunConfig],
    overrides: &Overrides,
    out_root: &Path,
) -> Result<SweepReport, CliError> {
    check_compatible(configs)?;
    let results: Vec<(String, Result<RunSummary, CliError>)> = configs
        .par_iter()
        .map(|c| {
            let mut c = c.clone();
            overrides.apply(&mut c);
            (c.name.clone(), run(&c, out_root))
        })
        .collect();

    let mut csv = format!("{}\n{SWEEP_COLUMNS}\n", output::CSV_HEADER);
    for (name, res) in &results {
        match res {
            Ok(s) => {
                let r = &s.last;
                let grad = r.grad_sq[0] + r.grad_sq[1];
                let _ = writeln!(
                    csv,
                    "{name},ok,{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
                    s.flux,
                    s.delta,
                    r.step,
                    r.time,
                    s.stationary,
                    r.mass[0],
                    r.mass[1],
                    r.total_entropy(),
                    grad,
                    r.overlap,
                    r.min[0],
                    r.min[1],
                    s.delta * grad,
                    s.space_time_grad_sq,
                    s.delta * s.space_time_grad_sq
                );
            }
            Err(e) => {
                let msg = e.to_string().replace('"', "'");
                let _ = writeln!(csv, "{name},failed,,,,,,,,,,,,,,,,\"{msg}\"");
            }
        }
    }
    std::fs::create_dir_all(out_root).map_err(|e| CliError::io(out_root, e))?;
    output::write_file(&out_root.join("sweep.csv"), &csv)?;
    Ok(SweepReport { csv, results })
}

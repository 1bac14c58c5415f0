//! Executes one configuration and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use crossdiff::diagnostics::{boundary_mass_fraction, space_time_grad_sq, DiagnosticRecord};
use crossdiff::mesh_fe::NodalField;
use crossdiff::particle_sim::{
    compare_to_pde, empirical_density, simulate, KernelSpec, ParticleEnsemble,
};
use crossdiff::time_stepper::{solve_to_steady, solve_to_time, steps_to_reach, Snapshot};
use log::info;

use crate::config::{RunConfig, RunMode};
use crate::error::CliError;
use crate::output;

pub const OUT_ENV: &str = "CROSSDIFF_OUT";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub snapshots: Option<Vec<f64>>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let (Some(seed), Some(p)) = (self.seed, cfg.particles.as_mut()) {
            p.seed = seed;
        }
        if let Some(s) = &self.snapshots {
            cfg.output.snapshots = s.clone();
        }
    }

    /// `--out`, then `output.dir`, then `$CROSSDIFF_OUT`, then `out`.
    pub fn out_root(&self, cfg: &RunConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Debug, Clone)]
pub struct ParticleSummary {
    pub n: usize,
    pub seed: u64,
    /// Distance to the unit-mass PDE profile, per species.
    pub l1: [f64; 2],
    /// PDE mass within 5% of the domain length of either end, per species.
    pub boundary_mass: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub dir: PathBuf,
    pub flux: &'static str,
    pub delta: f64,
    pub stationary: bool,
    pub last: DiagnosticRecord,
    pub space_time_grad_sq: f64,
    pub final_fields: (NodalField, NodalField),
    pub particles: Option<ParticleSummary>,
}

fn flux_label(kind: crossdiff::FluxKind) -> &'static str {
    match kind {
        crossdiff::FluxKind::Bt => "BT",
        crossdiff::FluxKind::Skt => "SKT",
        crossdiff::FluxKind::BtDelta(_) => "BT_DELTA",
    }
}

/// Runs `cfg` and writes everything under `<out_root>/<name>/`.
pub fn run(cfg: &RunConfig, out_root: &Path) -> Result<RunSummary, CliError> {
    let r = cfg.resolve()?;
    let dir = out_root.join(&cfg.name);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    output::write_file(&dir.join("config.txt"), &cfg.to_canonical())?;
    info!("{}: starting in {}", cfg.name, dir.display());

    let fail = |e| CliError::solver(cfg.name.clone(), e);
    let (state, snapshots) = match cfg.run {
        RunMode::Time { .. } => {
            let traj = solve_to_time(
                r.init.clone(),
                r.kind,
                &r.coeffs,
                &r.params,
                &cfg.output.snapshots,
            )
            .map_err(fail)?;
            (traj.state, traj.snapshots)
        }
        RunMode::Steady { max_steps } => {
            let state = solve_to_steady(r.init.clone(), r.kind, &r.coeffs, &r.params, max_steps)
                .map_err(fail)?;
            let initial = Snapshot {
                step: 0,
                time: 0.0,
                u1: r.init.0.clone(),
                u2: r.init.1.clone(),
            };
            (state, vec![initial])
        }
    };
    info!("{}: {} steps, t = {}", cfg.name, state.step, state.time);

    output::write_file(
        &dir.join("diagnostics.csv"),
        &output::diagnostics_csv(&state.history, cfg.output.diagnostics_every),
    )?;
    let write_profile =
        |tag: &str, u1: &NodalField, u2: &NodalField, time: f64| -> Result<(), CliError> {
            output::write_file(
                &dir.join(format!("profile_{tag}.csv")),
                &output::profile_csv(u1, u2, None),
            )?;
            output::write_file(
                &dir.join(format!("profile_{tag}.svg")),
                &output::profile_svg(&format!("{} at t = {time}", cfg.name), u1, u2),
            )?;
            if let Some(w) = cfg.output.zoom {
                output::write_file(
                    &dir.join(format!("zoom_{tag}.csv")),
                    &output::profile_csv(u1, u2, Some(w)),
                )?;
            }
            Ok(())
        };
    for snap in &snapshots {
        write_profile(&output::time_tag(snap.time), &snap.u1, &snap.u2, snap.time)?;
    }
    write_profile("final", &state.u1, &state.u2, state.time)?;

    let particles = match (&cfg.particles, cfg.run) {
        (Some(p), RunMode::Time { t_end }) => {
            let kernel = KernelSpec::new(p.kernel_eps).map_err(fail)?;
            let mut ens = ParticleEnsemble::sample([&r.init.0, &r.init.1], p.n, p.sigma, p.seed)
                .map_err(fail)?;
            let q = r.coeffs.q.clone();
            let grad_phi = move |x: f64| -q.eval(x);
            simulate(
                &mut ens,
                &kernel,
                &r.coeffs.a,
                r.coeffs.b,
                &grad_phi,
                p.dt,
                steps_to_reach(t_end, p.dt),
            )
            .map_err(fail)?;
            let density = empirical_density(&ens, &r.mesh, p.bandwidth).map_err(fail)?;
            let l1 = [
                compare_to_pde(&density[0], &state.u1).map_err(fail)?,
                compare_to_pde(&density[1], &state.u2).map_err(fail)?,
            ];
            let width = 0.05 * r.mesh.measure();
            let boundary_mass = [
                boundary_mass_fraction(&state.u1, width),
                boundary_mass_fraction(&state.u2, width),
            ];
            output::write_file(
                &dir.join("particles.csv"),
                &output::particle_csv(p.n, p.seed, &density),
            )?;
            output::write_file(
                &dir.join("particles_summary.csv"),
                &format!(
                    "{}\nspecies,l1,boundary_mass\n1,{},{}\n2,{},{}\n",
                    output::CSV_HEADER,
                    l1[0],
                    boundary_mass[0],
                    l1[1],
                    boundary_mass[1]
                ),
            )?;
            Some(ParticleSummary {
                n: p.n,
                seed: p.seed,
                l1,
                boundary_mass,
            })
        }
        _ => None,
    };

    let last = state
        .history
        .last()
        .cloned()
        .unwrap_or_else(|| DiagnosticRecord::from_state(&state, r.params.reg));
    Ok(RunSummary {
        name: cfg.name.clone(),
        dir,
        flux: flux_label(r.kind),
        delta: r.kind.delta(),
        stationary: state.stationary,
        last,
        space_time_grad_sq: space_time_grad_sq(&state.history, r.params.tau),
        final_fields: (state.u1, state.u2),
        particles,
    })
}

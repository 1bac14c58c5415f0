//! Backward Euler in time with a lagged-coefficient fixed-point iteration
//! for the nonlinear step.
//!
//! Each iterate `k` solves one linear banded system in which the mobilities
//! and the competition factor are frozen at iterate `k - 1`, while the
//! gradients, the mass term and the `alpha_i u_i` growth term are implicit.
//! Iteration stops when the max-norm update drops below `tol`. If the plain
//! iteration stops contracting, later iterates are Anderson-mixed; the
//! stopping test still measures the unmixed update.

use log::{debug, warn};

use crate::anderson::Anderson;
use crate::diagnostics::DiagnosticRecord;
use crate::error::{Error, Result};
use crate::flux_models::{
    cell_values, diffusion_blocks_with, drift_load_with, reaction_terms, Coefficients, FluxKind,
};
use crate::mesh_fe::{assemble_banded, Mesh1D, NodalField};
use crate::regularization::{lambda_cells, RegParam};

pub const DEFAULT_MAX_FP_ITERS: usize = 200;
pub const DEFAULT_DELTA0: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub reg: RegParam,
    /// Uniform time step.
    pub tau: f64,
    /// Fixed-point stopping tolerance (max-norm update).
    pub tol: f64,
    /// Stationarity tolerance on the first update of a step.
    pub tol_s: f64,
    pub max_fp_iters: usize,
    /// Safety margin in the time-step constraint `omega * tau <= 1 - delta0`.
    pub delta0: f64,
    pub t_end: Option<f64>,
}

impl SolverParams {
    pub fn new(reg: RegParam, tau: f64, tol: f64, tol_s: f64) -> Self {
        Self {
            reg,
            tau,
            tol,
            tol_s,
            max_fp_iters: DEFAULT_MAX_FP_ITERS,
            delta0: DEFAULT_DELTA0,
            t_end: None,
        }
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = Some(t_end);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                })
            }
        };
        positive("tau", self.tau)?;
        positive("tol", self.tol)?;
        positive("tol_s", self.tol_s)?;
        if self.max_fp_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_fp_iters",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.delta0 > 0.0 && self.delta0 < 1.0) {
            return Err(Error::InvalidParameter {
                name: "delta0",
                reason: format!("must lie in (0, 1), got {}", self.delta0),
            });
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "t_end",
                    reason: format!("must be finite and non-negative, got {t}"),
                });
            }
        }
        Ok(())
    }
}

/// Outcome of the time-step check `omega * tau <= 1 - delta0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConstraint {
    pub omega: f64,
    pub product: f64,
    pub bound: f64,
    pub passed: bool,
}

/// `max_i (2 alpha_i + beta_i1 + beta_i2)`.
pub fn omega(coeffs: &Coefficients) -> f64 {
    (0..2)
        .map(|i| 2.0 * coeffs.alpha[i] + coeffs.beta[i][0] + coeffs.beta[i][1])
        .fold(0.0, f64::max)
}

pub fn check_time_constraint(params: &SolverParams, coeffs: &Coefficients) -> TimeConstraint {
    let omega = omega(coeffs);
    let product = omega * params.tau;
    let bound = 1.0 - params.delta0;
    TimeConstraint {
        omega,
        product,
        bound,
        passed: product <= bound,
    }
}

impl TimeConstraint {
    pub fn into_result(self, tau: f64) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::TimeStepConstraint {
                omega: self.omega,
                tau,
                product: self.product,
                bound: self.bound,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub u1: NodalField,
    pub u2: NodalField,
    pub step: usize,
    pub time: f64,
    /// Fixed-point iterations used by the last step.
    pub fp_iters: usize,
    /// `max_i |u_i^{n,1} - u_i^{n,0}|_inf` of the last step.
    pub first_update: f64,
    pub stationary: bool,
    pub history: Vec<DiagnosticRecord>,
}

impl SimulationState {
    pub fn new(u1: NodalField, u2: NodalField) -> Result<Self> {
        u1.check_same_mesh(&u2)?;
        Ok(Self {
            u1,
            u2,
            step: 0,
            time: 0.0,
            fp_iters: 0,
            first_update: f64::INFINITY,
            stationary: false,
            history: Vec::new(),
        })
    }

    pub fn mesh(&self) -> &Mesh1D {
        self.u1.mesh()
    }

    pub fn fields(&self) -> [&NodalField; 2] {
        [&self.u1, &self.u2]
    }

    /// Appends the diagnostic record of the current fields to the history.
    pub fn record(&mut self, reg: RegParam) {
        let rec = DiagnosticRecord::from_state(self, reg);
        self.history.push(rec);
    }
}

/// Volumetric source `(x, t) -> [s_1, s_2]` added to the right-hand side.
pub type SourceFn<'a> = dyn Fn(f64, f64) -> [f64; 2] + Send + Sync + 'a;

/// One configured discretization: mesh, model and solver parameters.
pub struct Stepper<'a> {
    kind: FluxKind,
    coeffs: &'a Coefficients,
    params: &'a SolverParams,
    mesh: Mesh1D,
    q: NodalField,
    source: Option<&'a SourceFn<'a>>,
    record_history: bool,
}

impl<'a> Stepper<'a> {
    pub fn new(
        mesh: Mesh1D,
        kind: FluxKind,
        coeffs: &'a Coefficients,
        params: &'a SolverParams,
    ) -> Result<Self> {
        kind.validate()?;
        coeffs.validate()?;
        params.validate()?;
        check_time_constraint(params, coeffs).into_result(params.tau)?;
        let q = coeffs.q.sample(&mesh)?;
        Ok(Self {
            kind,
            coeffs,
            params,
            mesh,
            q,
            source: None,
            record_history: true,
        })
    }

    pub fn with_source(mut self, source: &'a SourceFn<'a>) -> Self {
        self.source = Some(source);
        self
    }

    /// Disables the per-step diagnostic history.
    pub fn without_history(mut self) -> Self {
        self.record_history = false;
        self
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn params(&self) -> &SolverParams {
        self.params
    }

    /// Advances `state` by one time step in place.
    pub fn advance(&self, state: &mut SimulationState) -> Result<()> {
        if *state.mesh() != self.mesh {
            return Err(Error::MeshMismatch);
        }
        let step = state.step + 1;
        let (u1, u2, iters, first) =
            self.solve_step(&state.u1, &state.u2, step)
                .map_err(|e| match e {
                    Error::FixedPointDivergence { .. } => e,
                    other => Error::StepFailed {
                        step,
                        source: Box::new(other),
                    },
                })?;
        state.u1 = u1;
        state.u2 = u2;
        state.step = step;
        state.time = step as f64 * self.params.tau;
        state.fp_iters = iters;
        state.first_update = first;
        state.stationary = first < self.params.tol_s;
        if self.record_history {
            state.record(self.params.reg);
        }
        Ok(())
    }

    fn solve_step(
        &self,
        prev1: &NodalField,
        prev2: &NodalField,
        step: usize,
    ) -> Result<(NodalField, NodalField, usize, f64)> {
        let p = self.params;
        let reg = p.reg;
        let mesh = &self.mesh;
        let nodes = mesh.num_nodes();
        let inv_tau = 1.0 / p.tau;
        let t_new = step as f64 * p.tau;

        let mut base = vec![0.0; 2 * nodes];
        for j in 0..nodes {
            let w = mesh.weight(j);
            let src = match self.source {
                Some(f) => f(mesh.node(j), t_new),
                None => [0.0; 2],
            };
            base[2 * j] = w * (prev1.values()[j] * inv_tau + src[0]);
            base[2 * j + 1] = w * (prev2.values()[j] * inv_tau + src[1]);
        }

        let mut lag1 = prev1.clone();
        let mut lag2 = prev2.clone();
        let mut first_update = f64::NAN;
        let mut update = f64::INFINITY;
        let mut last_update = f64::INFINITY;
        let mut mixer: Option<Anderson> = None;
        let mut mixer_start = usize::MAX - DEEPEN_AFTER;
        let has_drift = !self.q.values().iter().all(|&v| v == 0.0);
        let q_cells = cell_values(&self.q);
        for k in 1..=p.max_fp_iters {
            let mob = [lambda_cells(&lag1, reg), lambda_cells(&lag2, reg)];
            let blocks = diffusion_blocks_with(self.kind, &mob, [&lag1, &lag2], self.coeffs, reg)?;
            let reaction = reaction_terms([&lag1, &lag2], [prev1, prev2], self.coeffs, reg)?;
            let matrix = assemble_banded(mesh, &blocks, &reaction.implicit, inv_tau)?;

            let mut rhs = base.clone();
            for (j, e) in reaction.explicit.iter().enumerate() {
                let w = mesh.weight(j);
                rhs[2 * j] += w * e[0];
                rhs[2 * j + 1] += w * e[1];
            }
            if has_drift {
                for (i, m) in mob.iter().enumerate() {
                    if self.coeffs.b[i] == 0.0 {
                        continue;
                    }
                    let load = drift_load_with(m, &q_cells, self.coeffs.b[i]);
                    for (cell, d) in load.iter().enumerate() {
                        rhs[2 * cell + i] += d;
                        rhs[2 * (cell + 1) + i] -= d;
                    }
                }
            }

            let sol = matrix.solve(&rhs)?;
            let (next1, next2) = split(mesh, &sol)?;
            update = next1.max_abs_diff(&lag1)?.max(next2.max_abs_diff(&lag2)?);
            if k == 1 {
                first_update = update;
            }
            if update < p.tol {
                return Ok((next1, next2, k, first_update));
            }
            if mixer.is_none() && update > STALL_RATIO * last_update {
                debug!(
                    "step {step}: fixed point stalled at {update:e}, switching to Anderson mixing"
                );
                mixer = Some(Anderson::new(ANDERSON_DEPTH, ANDERSON_MIXING));
                mixer_start = k;
            }
            if k == mixer_start + DEEPEN_AFTER {
                debug!("step {step}: mixing still at {update:e}, restarting with depth {ANDERSON_DEEP}");
                mixer = Some(Anderson::new(ANDERSON_DEEP, ANDERSON_MIXING));
            }
            last_update = update;
            match mixer.as_mut() {
                Some(aa) => {
                    let x = interleave(&lag1, &lag2);
                    let (m1, m2) = split(mesh, &aa.next(x, sol))?;
                    lag1 = m1;
                    lag2 = m2;
                }
                None => {
                    lag1 = next1;
                    lag2 = next2;
                }
            }
        }
        Err(Error::FixedPointDivergence {
            step,
            iterations: p.max_fp_iters,
            residual: update,
        })
    }
}

/// Picard runs until one update fails to shrink by this factor.
const STALL_RATIO: f64 = 0.7;
const ANDERSON_DEPTH: usize = 5;
/// Strong drift transients need a longer history, which in turn is fragile
/// at very tight tolerances, so the deep mixer is only a fallback.
const ANDERSON_DEEP: usize = 10;
const DEEPEN_AFTER: usize = 40;
const ANDERSON_MIXING: f64 = 0.5;

fn split(mesh: &Mesh1D, sol: &[f64]) -> Result<(NodalField, NodalField)> {
    let (mut v1, mut v2) = (
        Vec::with_capacity(sol.len() / 2),
        Vec::with_capacity(sol.len() / 2),
    );
    for pair in sol.chunks_exact(2) {
        v1.push(pair[0]);
        v2.push(pair[1]);
    }
    Ok((NodalField::new(*mesh, v1)?, NodalField::new(*mesh, v2)?))
}

fn interleave(u1: &NodalField, u2: &NodalField) -> Vec<f64> {
    u1.values()
        .iter()
        .zip(u2.values())
        .flat_map(|(a, b)| [*a, *b])
        .collect()
}

/// Advances `state` by one step; see [`Stepper::advance`].
pub fn fixed_point_step(
    state: &SimulationState,
    kind: FluxKind,
    coeffs: &Coefficients,
    params: &SolverParams,
) -> Result<SimulationState> {
    let stepper = Stepper::new(*state.mesh(), kind, coeffs, params)?;
    let mut next = state.clone();
    stepper.advance(&mut next)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub u1: NodalField,
    pub u2: NodalField,
}

impl Snapshot {
    fn of(state: &SimulationState) -> Self {
        Self {
            step: state.step,
            time: state.time,
            u1: state.u1.clone(),
            u2: state.u2.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub state: SimulationState,
    pub snapshots: Vec<Snapshot>,
}

/// Number of uniform steps of size `tau` needed to reach `t`, treating
/// ratios within round-off of an integer as exact.
pub fn steps_to_reach(t: f64, tau: f64) -> usize {
    if t <= 0.0 {
        return 0;
    }
    let r = t / tau;
    let nearest = r.round();
    if (r - nearest).abs() <= 1e-9 * r.max(1.0) {
        nearest as usize
    } else {
        r.ceil() as usize
    }
}

fn check_initial(u1: &NodalField, u2: &NodalField) -> Result<()> {
    u1.check_same_mesh(u2)?;
    if u1.min() < 0.0 || u2.min() < 0.0 {
        return Err(Error::InvalidParameter {
            name: "initial data",
            reason: "must be non-negative".into(),
        });
    }
    Ok(())
}

fn warn_first_step(mesh: &Mesh1D, tau: f64) {
    let h = mesh.h();
    if tau > h * h {
        warn!(
            "first time step tau = {tau:e} exceeds h^2 = {:e}; continuing",
            h * h
        );
    }
}

fn initial_state(u1: NodalField, u2: NodalField, params: &SolverParams) -> Result<SimulationState> {
    check_initial(&u1, &u2)?;
    let mut state = SimulationState::new(u1, u2)?;
    state.record(params.reg);
    Ok(state)
}

/// Integrates to `params.t_end`, storing a snapshot at each requested time
/// (rounded to the nearest step).
pub fn solve_to_time(
    initial: (NodalField, NodalField),
    kind: FluxKind,
    coeffs: &Coefficients,
    params: &SolverParams,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    let t_end = params.t_end.ok_or_else(|| Error::InvalidParameter {
        name: "t_end",
        reason: "required for a fixed-time run".into(),
    })?;
    let stepper = Stepper::new(*initial.0.mesh(), kind, coeffs, params)?;
    solve_with(&stepper, initial, t_end, snapshot_times)
}

/// [`solve_to_time`] with an explicit stepper (e.g. one carrying a source).
pub fn solve_with(
    stepper: &Stepper<'_>,
    initial: (NodalField, NodalField),
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    let params = stepper.params();
    let mut state = initial_state(initial.0, initial.1, params)?;
    let total = steps_to_reach(t_end, params.tau);
    if total > 0 {
        warn_first_step(state.mesh(), params.tau);
    }
    let mut wanted: Vec<usize> = snapshot_times
        .iter()
        .map(|&t| steps_to_reach(t, params.tau))
        .filter(|&s| s <= total)
        .collect();
    wanted.sort_unstable();
    wanted.dedup();
    let mut wanted = wanted.into_iter().peekable();

    let mut snapshots = Vec::new();
    loop {
        while wanted.peek() == Some(&state.step) {
            snapshots.push(Snapshot::of(&state));
            wanted.next();
        }
        if state.step >= total {
            break;
        }
        stepper.advance(&mut state)?;
    }
    Ok(Trajectory { state, snapshots })
}

/// Steps until the first fixed-point update of a step drops below
/// `params.tol_s`.
pub fn solve_to_steady(
    initial: (NodalField, NodalField),
    kind: FluxKind,
    coeffs: &Coefficients,
    params: &SolverParams,
    max_steps: usize,
) -> Result<SimulationState> {
    let stepper = Stepper::new(*initial.0.mesh(), kind, coeffs, params)?;
    let mut state = initial_state(initial.0, initial.1, params)?;
    if max_steps > 0 {
        warn_first_step(state.mesh(), params.tau);
    }
    for _ in 0..max_steps {
        stepper.advance(&mut state)?;
        if state.stationary {
            return Ok(state);
        }
    }
    Err(Error::NoSteadyState {
        steps: max_steps,
        last_update: state.first_update,
    })
}

//! Quantities of interest: mass, regularized entropy, gradient norms,
//! segregation overlap, the delta-scaling probe and the scalar problem
//! solved by the total population in the degenerate equal-coefficient case.

use crate::error::{Error, Result};
use crate::flux_models::Coefficients;
use crate::mesh_fe::{assemble_scalar, element_gradient, lumped_inner, lumped_mass, NodalField};
use crate::regularization::{f_eps, lambda_cells, lambda_eps, RegParam};
use crate::time_stepper::{check_time_constraint, steps_to_reach, SimulationState, SolverParams};

/// One row of the per-step diagnostics table.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRecord {
    pub step: usize,
    pub time: f64,
    pub mass: [f64; 2],
    pub entropy: [f64; 2],
    pub grad_sq: [f64; 2],
    pub overlap: f64,
    pub min: [f64; 2],
    pub fp_iters: usize,
}

impl DiagnosticRecord {
    pub fn from_state(state: &SimulationState, reg: RegParam) -> Self {
        let [u1, u2] = state.fields();
        Self {
            step: state.step,
            time: state.time,
            mass: [lumped_mass(u1), lumped_mass(u2)],
            entropy: [entropy(u1, reg), entropy(u2, reg)],
            grad_sq: [grad_l2_sq(u1), grad_l2_sq(u2)],
            overlap: overlap(u1, u2).expect("state fields share a mesh"),
            min: [u1.min(), u2.min()],
            fp_iters: state.fp_iters,
        }
    }

    pub fn total_entropy(&self) -> f64 {
        self.entropy[0] + self.entropy[1]
    }
}

/// `(F_eps(u), 1)^h`.
pub fn entropy(u: &NodalField, reg: RegParam) -> f64 {
    let mesh = u.mesh();
    u.values()
        .iter()
        .enumerate()
        .map(|(j, &v)| mesh.weight(j) * f_eps(v, reg))
        .sum()
}

/// `|grad u|^2` integrated over the domain.
pub fn grad_l2_sq(u: &NodalField) -> f64 {
    let h = u.mesh().h();
    element_gradient(u).iter().map(|g| h * g * g).sum()
}

/// `|grad sqrt(max(u, 0))|^2` integrated over the domain.
pub fn sqrt_grad_l2_sq(u: &NodalField) -> f64 {
    let root = u
        .map(|v| v.max(0.0).sqrt())
        .expect("square roots of clamped values are finite");
    grad_l2_sq(&root)
}

/// Lumped L2 overlap `(u1, u2)^h`; zero for nodally disjoint supports.
pub fn overlap(u1: &NodalField, u2: &NodalField) -> Result<f64> {
    lumped_inner(u1, u2)
}

pub fn total_variation(u: &NodalField) -> f64 {
    u.values().windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Fraction of the (positive part of the) mass of `u` lying within
/// `width` of either endpoint.
pub fn boundary_mass_fraction(u: &NodalField, width: f64) -> f64 {
    let mesh = u.mesh();
    let (mut near, mut total) = (0.0, 0.0);
    for (j, &v) in u.values().iter().enumerate() {
        let x = mesh.node(j);
        let m = mesh.weight(j) * v.max(0.0);
        total += m;
        if x - mesh.left() <= width || mesh.right() - x <= width {
            near += m;
        }
    }
    if total > 0.0 {
        near / total
    } else {
        0.0
    }
}

/// `sum_n tau * sum_i |grad u_i^n|^2` over the recorded steps `n >= 1`,
/// i.e. the squared space-time gradient norm of the piecewise-constant-in-
/// time backward Euler solution.
pub fn space_time_grad_sq(history: &[DiagnosticRecord], tau: f64) -> f64 {
    history
        .iter()
        .filter(|r| r.step > 0)
        .map(|r| tau * (r.grad_sq[0] + r.grad_sq[1]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaScalingRow {
    pub delta: f64,
    /// Gradient measure `G(delta)`.
    pub grad_sq: f64,
    /// `delta * G(delta)`.
    pub product: f64,
}

/// Rows `(delta, G, delta * G)` for precomputed gradient measures.
pub fn delta_scaling_table(samples: &[(f64, f64)]) -> Vec<DeltaScalingRow> {
    samples
        .iter()
        .map(|&(delta, g)| DeltaScalingRow {
            delta,
            grad_sq: g,
            product: delta * g,
        })
        .collect()
}

/// Delta-scaling table from the final fields of runs that differ only in
/// delta, using `G = sum_i |grad u_i|^2`.
pub fn delta_scaling_probe(results: &[(f64, [NodalField; 2])]) -> Result<Vec<DeltaScalingRow>> {
    if let Some((_, [first, _])) = results.first() {
        for (_, [u1, u2]) in results {
            first.check_same_mesh(u1)?;
            first.check_same_mesh(u2)?;
        }
    }
    let samples: Vec<(f64, f64)> = results
        .iter()
        .map(|(d, [u1, u2])| (*d, grad_l2_sq(u1) + grad_l2_sq(u2)))
        .collect();
    Ok(delta_scaling_table(&samples))
}

/// Shared scalar coefficients of the degenerate equal-coefficient case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl AggregateCoefficients {
    /// Extracts the shared values, failing unless all `a_ij` are equal and
    /// positive, `b_i`, `c_i`, `alpha_i` are species independent and all
    /// `beta_ij` coincide.
    pub fn from_coefficients(coeffs: &Coefficients) -> Result<Self> {
        let a = coeffs.a[0][0];
        let all_equal = |vals: &[f64]| vals.iter().all(|&v| v == vals[0]);
        if !all_equal(&[a, coeffs.a[0][1], coeffs.a[1][0], coeffs.a[1][1]]) || !(a > 0.0) {
            return Err(Error::NotAggregateShape(format!(
                "a_ij must all equal one positive value, got {:?}",
                coeffs.a
            )));
        }
        if !all_equal(&coeffs.b) || !all_equal(&coeffs.c) || !all_equal(&coeffs.alpha) {
            return Err(Error::NotAggregateShape(
                "b_i, c_i and alpha_i must be species independent".into(),
            ));
        }
        let beta = coeffs.beta[0][0];
        if !all_equal(&[
            beta,
            coeffs.beta[0][1],
            coeffs.beta[1][0],
            coeffs.beta[1][1],
        ]) {
            return Err(Error::NotAggregateShape(format!(
                "beta_ij must all be equal, got {:?}",
                coeffs.beta
            )));
        }
        Ok(Self {
            a,
            b: coeffs.b[0],
            c: coeffs.c[0],
            alpha: coeffs.alpha[0],
            beta,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTrajectory {
    pub u: NodalField,
    pub step: usize,
    pub time: f64,
    pub snapshots: Vec<(f64, NodalField)>,
    /// `(u, 1)^h` after every step, starting with the initial value.
    pub masses: Vec<f64>,
}

/// Solves the scalar problem satisfied by `u = u_1 + u_2` for the BT-delta
/// flux with equal coefficients,
///
/// `d_t u - div(a (1 + delta) u grad u + b q u + c grad u) = u (alpha - beta u)`,
///
/// with the same lumped-mass scheme and fixed-point linearization as the
/// coupled solver. `delta = 0` gives the plain BT aggregate.
pub fn solve_aggregate(
    u0: &NodalField,
    coeffs: &Coefficients,
    delta: f64,
    params: &SolverParams,
    snapshot_times: &[f64],
) -> Result<AggregateTrajectory> {
    let agg = AggregateCoefficients::from_coefficients(coeffs)?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("must be non-negative, got {delta}"),
        });
    }
    params.validate()?;
    coeffs.validate()?;
    // the summed reaction u (alpha - beta u) has omega = 2 alpha + 2 beta,
    // the same as the coupled problem
    check_time_constraint(params, coeffs).into_result(params.tau)?;
    let t_end = params.t_end.ok_or_else(|| Error::InvalidParameter {
        name: "t_end",
        reason: "required for the aggregate solve".into(),
    })?;

    let mesh = *u0.mesh();
    let reg = params.reg;
    let nodes = mesh.num_nodes();
    let inv_tau = 1.0 / params.tau;
    let q = coeffs.q.sample(&mesh)?;
    let q_cell: Vec<f64> = q.values().windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let implicit = vec![-agg.alpha; nodes];
    let total = steps_to_reach(t_end, params.tau);
    let mut wanted: Vec<usize> = snapshot_times
        .iter()
        .map(|&t| steps_to_reach(t, params.tau))
        .filter(|&s| s <= total)
        .collect();
    wanted.sort_unstable();
    wanted.dedup();

    let mut u = u0.clone();
    let mut masses = vec![lumped_mass(&u)];
    let mut snapshots = Vec::new();
    for step in 0..=total {
        if wanted.binary_search(&step).is_ok() {
            snapshots.push((step as f64 * params.tau, u.clone()));
        }
        if step == total {
            break;
        }
        let prev = u.clone();
        let lam_prev: Vec<f64> = prev.values().iter().map(|&v| lambda_eps(v, reg)).collect();
        let mut lag = prev.clone();
        let mut converged = false;
        let mut update = f64::INFINITY;
        for _ in 0..params.max_fp_iters {
            let mob = lambda_cells(&lag, reg);
            let diffusion: Vec<f64> = mob
                .iter()
                .map(|l| agg.a * (1.0 + delta) * l + agg.c)
                .collect();
            let matrix = assemble_scalar(&mesh, &diffusion, &implicit, inv_tau)
                .map_err(|e| step_error(step + 1, e))?;
            let mut rhs: Vec<f64> = (0..nodes)
                .map(|j| {
                    let react = -lambda_eps(lag.values()[j], reg) * agg.beta * lam_prev[j];
                    mesh.weight(j) * (prev.values()[j] * inv_tau + react)
                })
                .collect();
            if agg.b != 0.0 {
                for (k, (l, qk)) in mob.iter().zip(&q_cell).enumerate() {
                    let d = l * agg.b * qk;
                    rhs[k] += d;
                    rhs[k + 1] -= d;
                }
            }
            let sol = matrix.solve(&rhs).map_err(|e| step_error(step + 1, e))?;
            let next = NodalField::new(mesh, sol).map_err(|e| step_error(step + 1, e))?;
            update = next.max_abs_diff(&lag)?;
            lag = next;
            if update < params.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::FixedPointDivergence {
                step: step + 1,
                iterations: params.max_fp_iters,
                residual: update,
            });
        }
        u = lag;
        masses.push(lumped_mass(&u));
    }
    Ok(AggregateTrajectory {
        u,
        step: total,
        time: total as f64 * params.tau,
        snapshots,
        masses,
    })
}

fn step_error(step: usize, e: Error) -> Error {
    Error::StepFailed {
        step,
        source: Box::new(e),
    }
}

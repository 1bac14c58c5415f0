//! Built-in run configurations for the four reference experiments.

use crossdiff::flux_models::FluxKind;
use crossdiff::time_stepper::{DEFAULT_DELTA0, DEFAULT_MAX_FP_ITERS};

use crate::config::{
    CoeffSpec, InitSpec, MeshSpec, OutputSpec, RunConfig, RunMode, SolverSpec, DEFAULT_TOL_S,
};

const EXP1_B1: [u32; 4] = [4, 8, 20, 40];
const EXP2_DELTAS: [(&str, f64); 3] = [("0", 0.0), ("0.001", 0.001), ("0.01", 0.01)];

const BUMP_NOTE: &str = "\
Bumps are exp(-(x - center)^2 / width). The exponent sign is negative on
purpose: the positive-exponent form is unbounded and cannot be a bump.";

const EXP1_NOTE: &str = "\
Steady state of the drift-diffusion balance. No reaction: every coeff.alpha*
and coeff.beta* key is emitted as 0 and can be overridden.";

/// A preset plus the comment block printed above it by `preset --emit`.
#[derive(Debug, Clone)]
pub struct Preset {
    pub config: RunConfig,
    pub notes: String,
}

impl Preset {
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for line in self.notes.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&self.config.to_canonical());
        out
    }
}

pub fn names() -> Vec<String> {
    let mut v: Vec<String> = EXP1_B1.iter().map(|b| format!("exp1_b{b}")).collect();
    v.extend(EXP1_B1.iter().map(|b| format!("exp1_skt_b{b}")));
    v.push("exp1_posdef".into());
    v.extend(EXP2_DELTAS.iter().map(|(s, _)| format!("exp2_delta{s}")));
    v.extend(["exp3", "exp4_case1", "exp4_case2"].map(String::from));
    v
}

pub fn get(name: &str) -> Option<Preset> {
    if let Some(rest) = name.strip_prefix("exp1_skt_b") {
        let b1 = parse_b1(rest)?;
        return Some(exp1(name, FluxKind::Skt, b1));
    }
    if let Some(rest) = name.strip_prefix("exp1_b") {
        let b1 = parse_b1(rest)?;
        return Some(exp1(name, FluxKind::Bt, b1));
    }
    if let Some(rest) = name.strip_prefix("exp2_delta") {
        let (_, delta) = EXP2_DELTAS.iter().find(|(s, _)| *s == rest)?;
        let kind = if *delta == 0.0 {
            FluxKind::Bt
        } else {
            FluxKind::BtDelta(*delta)
        };
        let mut config = two_bumps(name, kind);
        config.output.zoom = Some((0.45, 0.55));
        return Some(Preset {
            config,
            notes: format!(
                "Two segregating bumps, delta = {delta}. Zoom profiles cover the contact region near x = 0.5.\n{BUMP_NOTE}"
            ),
        });
    }
    match name {
        "exp1_posdef" => {
            let mut config = two_bumps(name, FluxKind::Bt);
            config.coeffs.a = [[4.0, 0.0], [3.9, 1.0]];
            Some(Preset {
                config,
                notes: format!(
                    "Positive-definite a = (4, 0; 3.9, 1) with b = 0. Constant data would be\n\
                     stationary, so this uses the two-bump data of exp2.\n{BUMP_NOTE}"
                ),
            })
        }
        "exp3" => {
            let mut config = two_bumps(name, FluxKind::Bt);
            let seed = InitSpec::bump(0.4, 0.001, 0.1);
            config.init = [seed.clone(), InitSpec::Complement(Box::new(seed))];
            config.coeffs.alpha = [1.0, 1.0];
            config.coeffs.beta = [[1.0, 1.0], [2.0, 2.0]];
            config.run = RunMode::Time { t_end: 7.0 };
            config.output.snapshots = vec![0.0, 5.0, 7.0];
            config.output.diagnostics_every = 100;
            Some(Preset {
                config,
                notes: format!(
                    "Invasion of a resident population. The mutant bump is centred at 0.4.\n\
                     Long run: 700000 steps at tau = 1e-5.\n{BUMP_NOTE}"
                ),
            })
        }
        "exp4_case1" => {
            let mut config = two_bumps(name, FluxKind::Bt);
            config.coeffs.a = [[3.0, 3.0], [1.0, 1.0]];
            Some(Preset {
                config,
                notes: format!("Semi-definite a = (3, 3; 1, 1).\n{BUMP_NOTE}"),
            })
        }
        "exp4_case2" => {
            let mut config = two_bumps(name, FluxKind::Bt);
            config.coeffs.b = [1.0, 10.0];
            config.coeffs.q_slope = -3.0;
            config.coeffs.q_center = 0.5;
            Some(Preset {
                config,
                notes: format!(
                    "Transport coefficients d = (1, 10) enter as the drift weights b = (1, 10)\n\
                     multiplying q(x) = -3 (x - 0.5). This mapping is an interpretation.\n{BUMP_NOTE}"
                ),
            })
        }
        _ => None,
    }
}

/// The last species to vanish decays slowly: b1 = 20 needs about 1.5e5
/// steps to meet tol_s, larger b1 several times that.
const EXP1_MAX_STEPS: usize = 1_000_000;

fn parse_b1(s: &str) -> Option<f64> {
    let b: u32 = s.parse().ok()?;
    EXP1_B1.contains(&b).then_some(b as f64)
}

fn exp1(name: &str, kind: FluxKind, b1: f64) -> Preset {
    let config = RunConfig {
        name: name.to_string(),
        mesh: MeshSpec {
            left: 0.0,
            right: 3.0,
            cells: 301,
        },
        flux: kind,
        coeffs: CoeffSpec {
            a: [[1.0; 2]; 2],
            b: [b1, 1.0],
            c: [1.0, 1.0],
            q_slope: -3.0,
            q_center: 0.5,
            ..CoeffSpec::default()
        },
        init: [InitSpec::Const(10.0), InitSpec::Const(10.0)],
        solver: SolverSpec {
            eps: None,
            tau: 1e-3,
            tol: 1e-7,
            tol_s: DEFAULT_TOL_S,
            max_fp_iters: DEFAULT_MAX_FP_ITERS,
            delta0: DEFAULT_DELTA0,
        },
        run: RunMode::Steady {
            max_steps: EXP1_MAX_STEPS,
        },
        output: OutputSpec {
            diagnostics_every: 10,
            ..OutputSpec::default()
        },
        particles: None,
    };
    Preset {
        config,
        notes: format!(
            "b1 = {b1}, {} flux. Mesh and step are the coarsest published values.\n{EXP1_NOTE}",
            match kind {
                FluxKind::Skt => "SKT",
                _ => "BT",
            }
        ),
    }
}

/// Shared setup of the bump experiments: unit interval, no drift, no
/// self-diffusion, no reaction.
fn two_bumps(name: &str, kind: FluxKind) -> RunConfig {
    RunConfig {
        name: name.to_string(),
        mesh: MeshSpec {
            left: 0.0,
            right: 1.0,
            cells: 1001,
        },
        flux: kind,
        coeffs: CoeffSpec {
            a: [[1.0; 2]; 2],
            ..CoeffSpec::default()
        },
        init: [
            InitSpec::bump(0.4, 0.001, 1.0),
            InitSpec::bump(0.6, 0.001, 1.0),
        ],
        solver: SolverSpec {
            eps: None,
            tau: 1e-5,
            tol: 1e-4,
            tol_s: DEFAULT_TOL_S,
            max_fp_iters: DEFAULT_MAX_FP_ITERS,
            delta0: DEFAULT_DELTA0,
        },
        run: RunMode::Time { t_end: 0.17 },
        output: OutputSpec {
            snapshots: vec![0.0, 0.05, 0.17],
            diagnostics_every: 100,
            ..OutputSpec::default()
        },
        particles: None,
    }
}

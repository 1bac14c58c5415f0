//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, keys are dotted paths
//! (`mesh.cells`, `coeff.a12`, ...). Unknown and repeated keys are errors.
//! [`RunConfig::to_canonical`] writes every key in a fixed order, and
//! parsing that text gives back an identical config.

use std::fmt;
use std::path::Path;

use crossdiff::flux_models::{Coefficients, DriftField, FluxKind};
use crossdiff::mesh_fe::{lumped_mass, Mesh1D, NodalField};
use crossdiff::regularization::RegParam;
use crossdiff::time_stepper::{
    check_time_constraint, SolverParams, DEFAULT_DELTA0, DEFAULT_MAX_FP_ITERS,
};

use crate::error::CliError;

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_TOL_S: f64 = 5e-8;
pub const DEFAULT_MAX_STEPS: usize = 100_000;

/// Initial profile of one species.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Const(f64),
    /// `amp * exp(-(x - center)^2 / width)`
    Bump {
        center: f64,
        width: f64,
        amp: f64,
    },
    /// `1 - inner`
    Complement(Box<InitSpec>),
    Sum(Box<InitSpec>, Box<InitSpec>),
    /// `inner` rescaled to unit lumped mass on the mesh.
    Unit(Box<InitSpec>),
}

impl InitSpec {
    pub fn bump(center: f64, width: f64, amp: f64) -> Self {
        InitSpec::Bump { center, width, amp }
    }

    pub fn evaluate(&self, mesh: &Mesh1D) -> crossdiff::Result<NodalField> {
        match self {
            InitSpec::Const(v) => NodalField::new(*mesh, vec![*v; mesh.num_nodes()]),
            InitSpec::Bump { center, width, amp } => crossdiff::mesh_fe::interpolate(
                |x| amp * (-(x - center) * (x - center) / width).exp(),
                mesh,
            ),
            InitSpec::Complement(inner) => inner.evaluate(mesh)?.map(|v| 1.0 - v),
            InitSpec::Sum(a, b) => a.evaluate(mesh)?.add(&b.evaluate(mesh)?),
            InitSpec::Unit(inner) => {
                let f = inner.evaluate(mesh)?;
                let mass = lumped_mass(&f);
                if !(mass > 0.0) {
                    return Err(crossdiff::Error::InvalidParameter {
                        name: "unit",
                        reason: format!("profile has non-positive mass {mass}"),
                    });
                }
                f.scaled(1.0 / mass)
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut p = InitParser {
            s: text.as_bytes(),
            pos: 0,
        };
        let spec = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(format!("unexpected trailing input at column {}", p.pos + 1));
        }
        Ok(spec)
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Const(v) => write!(f, "const({v})"),
            InitSpec::Bump { center, width, amp } => write!(f, "bump({center}, {width}, {amp})"),
            InitSpec::Complement(s) => write!(f, "complement({s})"),
            InitSpec::Sum(a, b) => write!(f, "sum({a}, {b})"),
            InitSpec::Unit(s) => write!(f, "unit({s})"),
        }
    }
}

struct InitParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl InitParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> Result<(), String> {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!(
                "expected `{}` at column {}",
                c as char,
                self.pos + 1
            ))
        }
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len()
            && (self.s[self.pos].is_ascii_alphabetic() || self.s[self.pos] == b'_')
        {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.pos]).into_owned()
    }

    fn number(&mut self) -> Result<f64, String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len()
            && !matches!(self.s[self.pos], b',' | b')')
            && !self.s[self.pos].is_ascii_whitespace()
        {
            self.pos += 1;
        }
        let tok = String::from_utf8_lossy(&self.s[start..self.pos]);
        parse_f64(&tok).map_err(|e| format!("{e} at column {}", start + 1))
    }

    fn args(&mut self) -> Result<Vec<Arg>, String> {
        self.eat(b'(')?;
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let save = self.pos;
            let id = self.ident();
            self.pos = save;
            if id.is_empty() || matches!(id.as_str(), "inf" | "e" | "E") {
                out.push(Arg::Num(self.number()?));
            } else {
                out.push(Arg::Spec(self.expr()?));
            }
            self.skip_ws();
            match self.s.get(self.pos) {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return Err(format!("expected `,` or `)` at column {}", self.pos + 1)),
            }
        }
    }

    fn expr(&mut self) -> Result<InitSpec, String> {
        let name = self.ident();
        if name.is_empty() {
            // bare number is shorthand for const(...)
            return Ok(InitSpec::Const(self.number()?));
        }
        let args = self.args()?;
        let num = |a: &Arg| match a {
            Arg::Num(v) => Ok(*v),
            Arg::Spec(_) => Err(format!("`{name}` expects numeric arguments")),
        };
        let spec = |a: Arg| match a {
            Arg::Spec(s) => Box::new(s),
            Arg::Num(v) => Box::new(InitSpec::Const(v)),
        };
        match (name.as_str(), args.len()) {
            ("const", 1) => Ok(InitSpec::Const(num(&args[0])?)),
            ("bump", 2) => Ok(InitSpec::bump(num(&args[0])?, num(&args[1])?, 1.0)),
            ("bump", 3) => Ok(InitSpec::bump(
                num(&args[0])?,
                num(&args[1])?,
                num(&args[2])?,
            )),
            ("complement", 1) => Ok(InitSpec::Complement(spec(args.into_iter().next().unwrap()))),
            ("unit", 1) => Ok(InitSpec::Unit(spec(args.into_iter().next().unwrap()))),
            ("sum", 2) => {
                let mut it = args.into_iter();
                Ok(InitSpec::Sum(
                    spec(it.next().unwrap()),
                    spec(it.next().unwrap()),
                ))
            }
            ("const" | "bump" | "complement" | "unit" | "sum", n) => {
                Err(format!("`{name}` does not take {n} argument(s)"))
            }
            _ => Err(format!("unknown profile `{name}`")),
        }
    }
}

enum Arg {
    Num(f64),
    Spec(InitSpec),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    pub left: f64,
    pub right: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSpec {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
    pub alpha: [f64; 2],
    pub beta: [[f64; 2]; 2],
    /// `q(x) = q_slope * (x - q_center)`
    pub q_slope: f64,
    pub q_center: f64,
}

impl Default for CoeffSpec {
    fn default() -> Self {
        Self {
            a: [[0.0; 2]; 2],
            b: [0.0; 2],
            c: [0.0; 2],
            alpha: [0.0; 2],
            beta: [[0.0; 2]; 2],
            q_slope: 0.0,
            q_center: 0.0,
        }
    }
}

impl CoeffSpec {
    pub fn to_coefficients(&self) -> Coefficients {
        Coefficients {
            a: self.a,
            b: self.b,
            c: self.c,
            alpha: self.alpha,
            beta: self.beta,
            q: if self.q_slope == 0.0 {
                DriftField::zero()
            } else {
                DriftField::Affine {
                    slope: self.q_slope,
                    center: self.q_center,
                }
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSpec {
    /// `None` picks `min(1e-8, h^2)`.
    pub eps: Option<f64>,
    pub tau: f64,
    pub tol: f64,
    pub tol_s: f64,
    pub max_fp_iters: usize,
    pub delta0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunMode {
    Steady { max_steps: usize },
    Time { t_end: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub snapshots: Vec<f64>,
    pub dir: Option<String>,
    pub zoom: Option<(f64, f64)>,
    pub diagnostics_every: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            snapshots: Vec::new(),
            dir: None,
            zoom: None,
            diagnostics_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleSpec {
    pub n: usize,
    pub sigma: [f64; 2],
    pub seed: u64,
    pub bandwidth: f64,
    pub kernel_eps: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub mesh: MeshSpec,
    pub flux: FluxKind,
    pub coeffs: CoeffSpec,
    pub init: [InitSpec; 2],
    pub solver: SolverSpec,
    pub run: RunMode,
    pub output: OutputSpec,
    pub particles: Option<ParticleSpec>,
}

/// Validated objects built from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub mesh: Mesh1D,
    pub kind: FluxKind,
    pub coeffs: Coefficients,
    pub params: SolverParams,
    pub init: (NodalField, NodalField),
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("`{}` is not a number", s.trim()))
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| format!("`{}` is not a non-negative integer", s.trim()))
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_f64).collect()
}

fn flux_name(kind: FluxKind) -> &'static str {
    match kind {
        FluxKind::Bt => "BT",
        FluxKind::Skt => "SKT",
        FluxKind::BtDelta(_) => "BT_DELTA",
    }
}

fn join(vals: &[f64]) -> String {
    vals.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Raw assignments in file order, with line numbers.
struct Entries {
    items: Vec<(usize, String, String, bool)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut items: Vec<(usize, String, String, bool)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {line}"), "expected `key = value`")
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::config(format!("line {line}"), "empty key"));
            }
            if let Some((first, _, _, _)) = items.iter().find(|(_, k, _, _)| *k == key) {
                return Err(CliError::config(
                    key,
                    format!("assigned twice (lines {first} and {line})"),
                ));
            }
            items.push((line, key, value.trim().to_string(), false));
        }
        Ok(Self { items })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.items
            .iter_mut()
            .find(|(_, k, _, _)| k == key)
            .map(|e| {
                e.3 = true;
                e.2.clone()
            })
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.items.iter().any(|(_, k, _, _)| k.starts_with(prefix))
    }

    fn unused(&self) -> Option<&(usize, String, String, bool)> {
        self.items.iter().find(|e| !e.3)
    }
}

fn get<T>(
    entries: &mut Entries,
    key: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Option<T>, CliError> {
    match entries.take(key) {
        None => Ok(None),
        Some(v) => parse(&v).map(Some).map_err(|m| CliError::config(key, m)),
    }
}

fn require<T>(
    entries: &mut Entries,
    key: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<T, CliError> {
    get(entries, key, parse)?.ok_or_else(|| CliError::config(key, "required key is missing"))
}

impl RunConfig {
    /// Reads and validates a config file. The file stem is the default name.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(path.display().to_string(), e.to_string()))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        let cfg = Self::parse(&text, &stem)?;
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Parses config text without the semantic checks of [`Self::resolve`].
    pub fn parse(text: &str, default_name: &str) -> Result<Self, CliError> {
        let mut e = Entries::parse(text)?;
        let name =
            get(&mut e, "name", |s| Ok(s.to_string()))?.unwrap_or_else(|| default_name.to_string());
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(CliError::config(
                "name",
                "must be non-empty and contain no path separators",
            ));
        }

        let mesh = MeshSpec {
            left: require(&mut e, "mesh.left", parse_f64)?,
            right: require(&mut e, "mesh.right", parse_f64)?,
            cells: require(&mut e, "mesh.cells", parse_usize)?,
        };

        let kind_name = require(&mut e, "flux.kind", |s| Ok(s.to_ascii_uppercase()))?;
        let delta = get(&mut e, "flux.delta", parse_f64)?;
        let flux = match (kind_name.as_str(), delta) {
            ("BT", None) => FluxKind::Bt,
            ("SKT", None) => FluxKind::Skt,
            ("BT_DELTA", Some(d)) => FluxKind::BtDelta(d),
            ("BT_DELTA", None) => {
                return Err(CliError::config("flux.delta", "required for BT_DELTA"))
            }
            ("BT" | "SKT", Some(_)) => {
                return Err(CliError::config(
                    "flux.delta",
                    "only allowed with kind = BT_DELTA",
                ))
            }
            (other, _) => {
                return Err(CliError::config(
                    "flux.kind",
                    format!("`{other}` is not one of BT, SKT, BT_DELTA"),
                ))
            }
        };

        let mut coeffs = CoeffSpec::default();
        for i in 0..2 {
            for j in 0..2 {
                if let Some(v) = get(&mut e, &format!("coeff.a{}{}", i + 1, j + 1), parse_f64)? {
                    coeffs.a[i][j] = v;
                }
                if let Some(v) = get(&mut e, &format!("coeff.beta{}{}", i + 1, j + 1), parse_f64)? {
                    coeffs.beta[i][j] = v;
                }
            }
            for (prefix, slot) in [
                ("b", &mut coeffs.b),
                ("c", &mut coeffs.c),
                ("alpha", &mut coeffs.alpha),
            ] {
                if let Some(v) = get(&mut e, &format!("coeff.{prefix}{}", i + 1), parse_f64)? {
                    slot[i] = v;
                }
            }
        }
        coeffs.q_slope = get(&mut e, "coeff.q_slope", parse_f64)?.unwrap_or(0.0);
        coeffs.q_center = get(&mut e, "coeff.q_center", parse_f64)?.unwrap_or(0.0);

        let init = [
            require(&mut e, "init.u1", InitSpec::parse)?,
            require(&mut e, "init.u2", InitSpec::parse)?,
        ];

        let eps = get(&mut e, "solver.eps", |s| {
            if s.eq_ignore_ascii_case("auto") {
                Ok(None)
            } else {
                parse_f64(s).map(Some)
            }
        })?
        .flatten();
        let solver = SolverSpec {
            eps,
            tau: require(&mut e, "solver.tau", parse_f64)?,
            tol: get(&mut e, "solver.tol", parse_f64)?.unwrap_or(DEFAULT_TOL),
            tol_s: get(&mut e, "solver.tol_s", parse_f64)?.unwrap_or(DEFAULT_TOL_S),
            max_fp_iters: get(&mut e, "solver.max_fp_iters", parse_usize)?
                .unwrap_or(DEFAULT_MAX_FP_ITERS),
            delta0: get(&mut e, "solver.delta0", parse_f64)?.unwrap_or(DEFAULT_DELTA0),
        };

        let mode = require(&mut e, "run.mode", |s| Ok(s.to_ascii_lowercase()))?;
        let t_end = get(&mut e, "run.t_end", parse_f64)?;
        let max_steps = get(&mut e, "run.max_steps", parse_usize)?;
        let run = match (mode.as_str(), t_end, max_steps) {
            ("steady", None, m) => RunMode::Steady {
                max_steps: m.unwrap_or(DEFAULT_MAX_STEPS),
            },
            ("steady", Some(_), _) => {
                return Err(CliError::config("run.t_end", "not used with mode = steady"))
            }
            ("time", Some(t), None) => RunMode::Time { t_end: t },
            ("time", None, _) => {
                return Err(CliError::config("run.t_end", "required for mode = time"))
            }
            ("time", Some(_), Some(_)) => {
                return Err(CliError::config(
                    "run.max_steps",
                    "only used with mode = steady",
                ))
            }
            (other, _, _) => {
                return Err(CliError::config(
                    "run.mode",
                    format!("`{other}` is not steady or time"),
                ))
            }
        };

        let output = OutputSpec {
            snapshots: get(&mut e, "output.snapshots", parse_list)?.unwrap_or_default(),
            dir: get(&mut e, "output.dir", |s| Ok(s.to_string()))?.filter(|s| !s.is_empty()),
            zoom: get(&mut e, "output.zoom", |s| {
                let v = parse_list(s)?;
                match v.as_slice() {
                    [a, b] => Ok((*a, *b)),
                    _ => Err("expected two numbers `left, right`".to_string()),
                }
            })?,
            diagnostics_every: get(&mut e, "output.diagnostics_every", parse_usize)?.unwrap_or(1),
        };

        let particles = if e.has_prefix("particles.") {
            Some(ParticleSpec {
                n: require(&mut e, "particles.n", parse_usize)?,
                sigma: [
                    require(&mut e, "particles.sigma1", parse_f64)?,
                    require(&mut e, "particles.sigma2", parse_f64)?,
                ],
                seed: get(&mut e, "particles.seed", |s| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|_| format!("`{}` is not a seed", s.trim()))
                })?
                .unwrap_or(0),
                bandwidth: require(&mut e, "particles.bandwidth", parse_f64)?,
                kernel_eps: require(&mut e, "particles.kernel_eps", parse_f64)?,
                dt: require(&mut e, "particles.dt", parse_f64)?,
            })
        } else {
            None
        };

        if let Some((line, key, _, _)) = e.unused() {
            return Err(CliError::config(
                key.clone(),
                format!("unknown key (line {line})"),
            ));
        }

        Ok(Self {
            name,
            mesh,
            flux,
            coeffs,
            init,
            solver,
            run,
            output,
            particles,
        })
    }

    /// Builds and checks the solver objects, reporting the offending key.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let mesh = Mesh1D::new(self.mesh.left, self.mesh.right, self.mesh.cells)
            .map_err(|e| CliError::config("mesh", e.to_string()))?;
        self.flux
            .validate()
            .map_err(|e| CliError::config("flux.delta", e.to_string()))?;
        let coeffs = self.coeffs.to_coefficients();
        coeffs
            .validate()
            .map_err(|e| CliError::config("coeff", e.to_string()))?;

        let reg = match self.solver.eps {
            None => RegParam::default_for_cell_width(mesh.h()),
            Some(eps) => {
                RegParam::new(eps).map_err(|e| CliError::config("solver.eps", e.to_string()))?
            }
        };
        let mut params =
            SolverParams::new(reg, self.solver.tau, self.solver.tol, self.solver.tol_s);
        params.max_fp_iters = self.solver.max_fp_iters;
        params.delta0 = self.solver.delta0;
        if let RunMode::Time { t_end } = self.run {
            if !(t_end >= 0.0 && t_end.is_finite()) {
                return Err(CliError::config(
                    "run.t_end",
                    format!("must be non-negative, got {t_end}"),
                ));
            }
            params = params.with_t_end(t_end);
        }
        params.validate().map_err(|e| {
            let key = match &e {
                crossdiff::Error::InvalidParameter { name, .. } => format!("solver.{name}"),
                _ => "solver".to_string(),
            };
            CliError::config(key, e.to_string())
        })?;
        let tc = check_time_constraint(&params, &coeffs);
        if !tc.passed {
            return Err(CliError::config(
                "solver.tau",
                format!(
                    "time-step constraint violated: omega = {} with tau = {} gives omega * tau = {} > 1 - delta0 = {}",
                    tc.omega, params.tau, tc.product, tc.bound
                ),
            ));
        }

        let mut fields = Vec::with_capacity(2);
        for (i, spec) in self.init.iter().enumerate() {
            let key = format!("init.u{}", i + 1);
            let f = spec
                .evaluate(&mesh)
                .map_err(|e| CliError::config(key.clone(), e.to_string()))?;
            if f.min() < 0.0 {
                return Err(CliError::config(
                    key,
                    format!("profile is negative somewhere (min {})", f.min()),
                ));
            }
            fields.push(f);
        }
        let u2 = fields.pop().unwrap();
        let u1 = fields.pop().unwrap();

        if let Some(t) = self
            .output
            .snapshots
            .iter()
            .find(|t| !(**t >= 0.0 && t.is_finite()))
        {
            return Err(CliError::config(
                "output.snapshots",
                format!("invalid time {t}"),
            ));
        }
        if let Some((a, b)) = self.output.zoom {
            if !(a < b) {
                return Err(CliError::config(
                    "output.zoom",
                    format!("need left < right, got {a}, {b}"),
                ));
            }
        }
        if self.output.diagnostics_every == 0 {
            return Err(CliError::config(
                "output.diagnostics_every",
                "must be at least 1",
            ));
        }
        if let Some(p) = &self.particles {
            if !matches!(self.run, RunMode::Time { .. }) {
                return Err(CliError::config(
                    "particles",
                    "particle runs need mode = time",
                ));
            }
            let positive = |key: &str, v: f64| {
                if v > 0.0 && v.is_finite() {
                    Ok(())
                } else {
                    Err(CliError::config(key, format!("must be positive, got {v}")))
                }
            };
            if p.n == 0 {
                return Err(CliError::config("particles.n", "must be at least 1"));
            }
            positive("particles.bandwidth", p.bandwidth)?;
            positive("particles.kernel_eps", p.kernel_eps)?;
            positive("particles.dt", p.dt)?;
            for (i, s) in p.sigma.iter().enumerate() {
                if !(*s >= 0.0 && s.is_finite()) {
                    return Err(CliError::config(
                        format!("particles.sigma{}", i + 1),
                        format!("must be non-negative, got {s}"),
                    ));
                }
            }
        }

        Ok(Resolved {
            mesh,
            kind: self.flux,
            coeffs,
            params,
            init: (u1, u2),
        })
    }

    /// Every key in a fixed order; [`Self::parse`] inverts this exactly.
    pub fn to_canonical(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("name", self.name.clone());
        kv("mesh.left", self.mesh.left.to_string());
        kv("mesh.right", self.mesh.right.to_string());
        kv("mesh.cells", self.mesh.cells.to_string());
        kv("flux.kind", flux_name(self.flux).to_string());
        if let FluxKind::BtDelta(d) = self.flux {
            kv("flux.delta", d.to_string());
        }
        let c = &self.coeffs;
        for i in 0..2 {
            for j in 0..2 {
                kv(&format!("coeff.a{}{}", i + 1, j + 1), c.a[i][j].to_string());
            }
        }
        for i in 0..2 {
            kv(&format!("coeff.b{}", i + 1), c.b[i].to_string());
        }
        for i in 0..2 {
            kv(&format!("coeff.c{}", i + 1), c.c[i].to_string());
        }
        for i in 0..2 {
            kv(&format!("coeff.alpha{}", i + 1), c.alpha[i].to_string());
        }
        for i in 0..2 {
            for j in 0..2 {
                kv(
                    &format!("coeff.beta{}{}", i + 1, j + 1),
                    c.beta[i][j].to_string(),
                );
            }
        }
        kv("coeff.q_slope", c.q_slope.to_string());
        kv("coeff.q_center", c.q_center.to_string());
        kv("init.u1", self.init[0].to_string());
        kv("init.u2", self.init[1].to_string());
        let sv = &self.solver;
        kv(
            "solver.eps",
            sv.eps.map_or_else(|| "auto".to_string(), |e| e.to_string()),
        );
        kv("solver.tau", sv.tau.to_string());
        kv("solver.tol", sv.tol.to_string());
        kv("solver.tol_s", sv.tol_s.to_string());
        kv("solver.max_fp_iters", sv.max_fp_iters.to_string());
        kv("solver.delta0", sv.delta0.to_string());
        match self.run {
            RunMode::Steady { max_steps } => {
                kv("run.mode", "steady".into());
                kv("run.max_steps", max_steps.to_string());
            }
            RunMode::Time { t_end } => {
                kv("run.mode", "time".into());
                kv("run.t_end", t_end.to_string());
            }
        }
        let o = &self.output;
        kv("output.snapshots", join(&o.snapshots));
        if let Some(dir) = &o.dir {
            kv("output.dir", dir.clone());
        }
        if let Some((a, b)) = o.zoom {
            kv("output.zoom", join(&[a, b]));
        }
        kv("output.diagnostics_every", o.diagnostics_every.to_string());
        if let Some(p) = &self.particles {
            kv("particles.n", p.n.to_string());
            kv("particles.sigma1", p.sigma[0].to_string());
            kv("particles.sigma2", p.sigma[1].to_string());
            kv("particles.seed", p.seed.to_string());
            kv("particles.bandwidth", p.bandwidth.to_string());
            kv("particles.kernel_eps", p.kernel_eps.to_string());
            kv("particles.dt", p.dt.to_string());
        }
        s
    }
}

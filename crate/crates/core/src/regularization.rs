//! Regularized entropy density `F_eps` and the mobility regularizations
//! built from it.
//!
//! `F_eps` agrees with `s (ln s - 1) + 1` on `[eps, 1/eps]` and continues
//! quadratically outside, so it is `C^{2,1}` on the whole line with
//! `F_eps'' = 1/eps, 1/s, eps` on the three branches. The mobility
//! `lambda_eps = 1 / F_eps''` is therefore `clamp(s, eps, 1/eps)`.

use crate::error::{Error, Result};
use crate::mesh_fe::NodalField;

/// Regularization parameter `eps` in `(0, e^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegParam {
    eps: f64,
    // Cached: the branch formulas need it on every evaluation.
    ln_eps: f64,
}

impl RegParam {
    /// Upper bound `e^-2` on admissible values.
    pub const UPPER: f64 = 0.135_335_283_236_612_7;

    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps < Self::UPPER {
            Ok(Self::from_valid(eps))
        } else {
            Err(Error::InvalidParameter {
                name: "eps",
                reason: format!("must lie in (0, e^-2), got {eps}"),
            })
        }
    }

    /// `min(1e-8, h^2)`, the per-run default.
    pub fn default_for_cell_width(h: f64) -> Self {
        Self::from_valid(1e-8_f64.min(h * h).min(0.5 * Self::UPPER))
    }

    fn from_valid(eps: f64) -> Self {
        Self {
            eps,
            ln_eps: eps.ln(),
        }
    }

    pub fn eps(self) -> f64 {
        self.eps
    }

    pub fn inv(self) -> f64 {
        1.0 / self.eps
    }

    /// `ln eps`; `ln(1/eps)` is its negation.
    pub fn ln_eps(self) -> f64 {
        self.ln_eps
    }
}

pub fn f_eps(s: f64, reg: RegParam) -> f64 {
    let eps = reg.eps();
    let inv = reg.inv();
    if s <= eps {
        (s * s - eps * eps) / (2.0 * eps) + s * (reg.ln_eps() - 1.0) + 1.0
    } else if s <= inv {
        s * (s.ln() - 1.0) + 1.0
    } else {
        eps * (s * s - inv * inv) / 2.0 - s * (reg.ln_eps() + 1.0) + 1.0
    }
}

pub fn f_eps_prime(s: f64, reg: RegParam) -> f64 {
    let eps = reg.eps();
    let inv = reg.inv();
    if s <= eps {
        (s - eps) / eps + reg.ln_eps()
    } else if s <= inv {
        s.ln()
    } else {
        eps * (s - inv) - reg.ln_eps()
    }
}

pub fn f_eps_second(s: f64, reg: RegParam) -> f64 {
    1.0 / lambda_eps(s, reg)
}

/// `1 / F_eps''(s)`, i.e. `s` clamped to `[eps, 1/eps]`.
pub fn lambda_eps(s: f64, reg: RegParam) -> f64 {
    s.clamp(reg.eps(), reg.inv())
}

/// `F_eps'(b) - F_eps'(a)`, integrating `F_eps''` branch by branch so
/// that nearby arguments do not cancel.
pub fn f_eps_prime_diff(a: f64, b: f64, reg: RegParam) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -f_eps_prime_diff(b, a, reg);
    }
    let eps = reg.eps();
    let inv = reg.inv();
    let mut total = 0.0;
    // lower branch (-inf, eps]
    if a < eps {
        total += (b.min(eps) - a) / eps;
    }
    // middle branch [eps, 1/eps]
    let lo = a.max(eps);
    let hi = b.min(inv);
    if hi > lo {
        total += ((hi - lo) / lo).ln_1p();
    }
    // upper branch [1/eps, inf)
    if b > inv {
        total += eps * (b - a.max(inv));
    }
    total
}

/// Cell value of the mobility operator on the cell with end values
/// `z_left`, `z_right`: the difference quotient
/// `(z_right - z_left) / (F_eps'(z_right) - F_eps'(z_left))`, or
/// `lambda_eps` at the cell midpoint when the `F_eps'` values coincide.
///
/// By construction `lambda * grad(F_eps'(z)) = grad(z)` on the cell, and
/// the mean-value theorem keeps the result in `[eps, 1/eps]`.
pub fn lambda_matrix_cell(z_left: f64, z_right: f64, reg: RegParam) -> f64 {
    let dz = z_right - z_left;
    let df = f_eps_prime_diff(z_left, z_right, reg);
    // |F_eps'| <= |ln eps| between the kinks, so the exact scale is only
    // needed when an end value lies outside or df is already tiny.
    let in_middle = |z: f64| z >= reg.eps() && z <= reg.inv();
    let cheap_scale = 1.0_f64.max(-reg.ln_eps());
    if in_middle(z_left) && in_middle(z_right) && df.abs() > 1e-14 * cheap_scale {
        return (dz / df).clamp(reg.eps(), reg.inv());
    }
    let scale = 1.0_f64
        .max(f_eps_prime(z_left, reg).abs())
        .max(f_eps_prime(z_right, reg).abs());
    if df.abs() <= 1e-14 * scale {
        return lambda_eps(0.5 * (z_left + z_right), reg);
    }
    (dz / df).clamp(reg.eps(), reg.inv())
}

/// Mobility operator applied cell by cell to a nodal field.
pub fn lambda_cells(z: &NodalField, reg: RegParam) -> Vec<f64> {
    z.values()
        .windows(2)
        .map(|w| lambda_matrix_cell(w[0], w[1], reg))
        .collect()
}

/// Nodal interpolant of `lambda_eps(z)`.
pub fn lambda_nodal(z: &NodalField, reg: RegParam) -> NodalField {
    z.map(|v| lambda_eps(v, reg))
        .expect("clamped values are finite")
}

/// Nodal interpolant of `F_eps'(z)`.
pub fn f_eps_prime_nodal(z: &NodalField, reg: RegParam) -> NodalField {
    z.map(|v| f_eps_prime(v, reg))
        .expect("F_eps' of finite values is finite")
}

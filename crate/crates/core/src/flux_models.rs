//! Model coefficients and the lagged (linearized) coefficient assembly for
//! the three flux families.
//!
//! With lagged fields `v_1, v_2` and the cell mobilities
//! `L_i = lambda_matrix_cell(v_i)`, the diffusive part of the flux of
//! species `i` on a cell is `sum_j B_ij grad u_j` where
//!
//! * BT:  `B_ii = a_ii L_i + c_i`, `B_ij = a_ij L_i`,
//! * SKT: BT plus `(a_i1 l_1 + a_i2 l_2)` on the diagonal, `l_k` being the
//!   cell average of the nodal `lambda_eps(v_k)`,
//! * BT-delta: `B(BT) + delta / 2 * B(SKT without c)`.
//!
//! The transport term `b_i u_i q` becomes the explicit cell load
//! `L_i b_i q_cell`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh_fe::{interpolate, Mesh1D, NodalField, SpeciesBlock};
use crate::regularization::{lambda_cells, lambda_eps, RegParam};

/// Environmental drift field `q`.
#[derive(Clone)]
pub enum DriftField {
    /// `q(x) = slope * (x - center)`.
    Affine {
        slope: f64,
        center: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl DriftField {
    pub fn zero() -> Self {
        DriftField::Affine {
            slope: 0.0,
            center: 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DriftField::Affine { slope, center } => slope * (x - center),
            DriftField::Custom(f) => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DriftField::Affine { slope, .. } if *slope == 0.0)
    }

    pub fn sample(&self, mesh: &Mesh1D) -> Result<NodalField> {
        interpolate(|x| self.eval(x), mesh)
    }
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftField::Affine { slope, center } => f
                .debug_struct("Affine")
                .field("slope", slope)
                .field("center", center)
                .finish(),
            DriftField::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl PartialEq for DriftField {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                DriftField::Affine { slope, center },
                DriftField::Affine {
                    slope: s2,
                    center: c2,
                },
            ) => slope == s2 && center == c2,
            (DriftField::Custom(a), DriftField::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Constant model coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
    pub alpha: [f64; 2],
    pub beta: [[f64; 2]; 2],
    pub q: DriftField,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            a: [[0.0; 2]; 2],
            b: [0.0; 2],
            c: [0.0; 2],
            alpha: [0.0; 2],
            beta: [[0.0; 2]; 2],
            q: DriftField::zero(),
        }
    }
}

impl Coefficients {
    /// Pure cross-diffusion with matrix `a`; everything else zero.
    pub fn with_diffusion(a: [[f64; 2]; 2]) -> Self {
        Self {
            a,
            ..Self::default()
        }
    }

    /// Checks finiteness and the sign constraints on `a`, `c`, `alpha`,
    /// `beta`.
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, vals: &[f64]| -> Result<()> {
            for v in vals {
                if !v.is_finite() || *v < 0.0 {
                    return Err(Error::InvalidParameter {
                        name,
                        reason: format!("must be finite and non-negative, got {v}"),
                    });
                }
            }
            Ok(())
        };
        nonneg(
            "a",
            &[self.a[0][0], self.a[0][1], self.a[1][0], self.a[1][1]],
        )?;
        nonneg("c", &self.c)?;
        nonneg("alpha", &self.alpha)?;
        nonneg(
            "beta",
            &[
                self.beta[0][0],
                self.beta[0][1],
                self.beta[1][0],
                self.beta[1][1],
            ],
        )?;
        if let Some(v) = self.b.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "b",
                reason: format!("must be finite, got {v}"),
            });
        }
        Ok(())
    }

    pub fn has_reaction(&self) -> bool {
        self.alpha.iter().any(|&v| v != 0.0) || self.beta.iter().flatten().any(|&v| v != 0.0)
    }
}

/// Flux family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluxKind {
    Bt,
    Skt,
    BtDelta(f64),
}

impl FluxKind {
    pub fn bt_delta(delta: f64) -> Result<Self> {
        let kind = FluxKind::BtDelta(delta);
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FluxKind::BtDelta(d) if !(d > 0.0 && d.is_finite()) => Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("must be positive, got {d}"),
            }),
            _ => Ok(()),
        }
    }

    pub fn delta(&self) -> f64 {
        match *self {
            FluxKind::BtDelta(d) => d,
            _ => 0.0,
        }
    }
}

/// `4 a11 a22 - (a12 + a21)^2`; positive means the symmetric part of `a`
/// is positive definite.
pub fn ellipticity_margin(a: &[[f64; 2]; 2]) -> f64 {
    let off = a[0][1] + a[1][0];
    4.0 * a[0][0] * a[1][1] - off * off
}

fn cell_average(nodal: &[f64]) -> Vec<f64> {
    nodal.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

fn bt_blocks(
    mob: &[Vec<f64>; 2],
    a: &[[f64; 2]; 2],
    c: [f64; 2],
    out: &mut [SpeciesBlock],
    weight: f64,
) {
    for (k, block) in out.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                block[i][j] += weight * a[i][j] * mob[i][k];
            }
            block[i][i] += weight * c[i];
        }
    }
}

fn skt_extra(avg: &[Vec<f64>; 2], a: &[[f64; 2]; 2], out: &mut [SpeciesBlock], weight: f64) {
    for (k, block) in out.iter_mut().enumerate() {
        for i in 0..2 {
            block[i][i] += weight * (a[i][0] * avg[0][k] + a[i][1] * avg[1][k]);
        }
    }
}

/// Per-cell diffusion blocks for the lagged fields.
pub fn diffusion_blocks(
    kind: FluxKind,
    u1_lag: &NodalField,
    u2_lag: &NodalField,
    coeffs: &Coefficients,
    reg: RegParam,
) -> Result<Vec<SpeciesBlock>> {
    u1_lag.check_same_mesh(u2_lag)?;
    let mob = [lambda_cells(u1_lag, reg), lambda_cells(u2_lag, reg)];
    diffusion_blocks_with(kind, &mob, [u1_lag, u2_lag], coeffs, reg)
}

/// [`diffusion_blocks`] with the cell mobilities of both lagged fields
/// already computed.
pub(crate) fn diffusion_blocks_with(
    kind: FluxKind,
    mob: &[Vec<f64>; 2],
    lag: [&NodalField; 2],
    coeffs: &Coefficients,
    reg: RegParam,
) -> Result<Vec<SpeciesBlock>> {
    let cells = lag[0].mesh().num_cells();
    let mut out = vec![[[0.0; 2]; 2]; cells];
    bt_blocks(mob, &coeffs.a, coeffs.c, &mut out, 1.0);
    let skt_weight = match kind {
        FluxKind::Bt => return Ok(out),
        FluxKind::Skt => 1.0,
        FluxKind::BtDelta(d) => {
            kind.validate()?;
            bt_blocks(mob, &coeffs.a, [0.0; 2], &mut out, 0.5 * d);
            0.5 * d
        }
    };
    let avg = lag.map(|u| {
        let lam: Vec<f64> = u.values().iter().map(|&v| lambda_eps(v, reg)).collect();
        cell_average(&lam)
    });
    skt_extra(&avg, &coeffs.a, &mut out, skt_weight);
    Ok(out)
}

/// Explicit transport load `L_i b_i q_cell` of species `species` on each
/// cell; `q` is the nodal interpolant of the drift, averaged per cell.
pub fn drift_load(
    species: usize,
    u_lag: &NodalField,
    q: &NodalField,
    coeffs: &Coefficients,
    reg: RegParam,
) -> Result<Vec<f64>> {
    u_lag.check_same_mesh(q)?;
    let cells = u_lag.mesh().num_cells();
    let b = coeffs.b[species];
    if b == 0.0 {
        return Ok(vec![0.0; cells]);
    }
    let mob = lambda_cells(u_lag, reg);
    Ok(drift_load_with(&mob, &cell_average(q.values()), b))
}

/// [`drift_load`] from precomputed cell mobilities and cell drift values.
pub(crate) fn drift_load_with(mob: &[f64], q_cells: &[f64], b: f64) -> Vec<f64> {
    mob.iter().zip(q_cells).map(|(l, qk)| l * b * qk).collect()
}

pub(crate) fn cell_values(nodal: &NodalField) -> Vec<f64> {
    cell_average(nodal.values())
}

/// Reaction contributions per node and species.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionTerms {
    /// Coefficient `-alpha_i` placed on the system diagonal (times the node
    /// weight).
    pub implicit: Vec<[f64; 2]>,
    /// `-lambda(u_lag_i) (beta_i1 lambda(u_prev_1) + beta_i2 lambda(u_prev_2))`.
    pub explicit: Vec<[f64; 2]>,
}

pub fn reaction_terms(
    u_lag: [&NodalField; 2],
    u_prev: [&NodalField; 2],
    coeffs: &Coefficients,
    reg: RegParam,
) -> Result<ReactionTerms> {
    u_lag[0].check_same_mesh(u_lag[1])?;
    u_lag[0].check_same_mesh(u_prev[0])?;
    u_lag[0].check_same_mesh(u_prev[1])?;
    let n = u_lag[0].len();
    let implicit = vec![[-coeffs.alpha[0], -coeffs.alpha[1]]; n];
    let beta = &coeffs.beta;
    let explicit = (0..n)
        .map(|j| {
            let lp = [
                lambda_eps(u_prev[0].values()[j], reg),
                lambda_eps(u_prev[1].values()[j], reg),
            ];
            let mut r = [0.0; 2];
            for i in 0..2 {
                let comp = beta[i][0] * lp[0] + beta[i][1] * lp[1];
                if comp != 0.0 {
                    r[i] = -lambda_eps(u_lag[i].values()[j], reg) * comp;
                }
            }
            r
        })
        .collect();
    Ok(ReactionTerms { implicit, explicit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mesh() -> Mesh1D {
        Mesh1D::new(0.0, 1.0, 8).unwrap()
    }

    fn reg() -> RegParam {
        RegParam::new(1e-6).unwrap()
    }

    #[test]
    fn margin_examples() {
        assert_eq!(ellipticity_margin(&[[1.0, 1.0], [1.0, 1.0]]), 0.0);
        assert!((ellipticity_margin(&[[4.0, 0.0], [3.9, 1.0]]) - 0.79).abs() < 1e-12);
        assert_eq!(ellipticity_margin(&[[3.0, 3.0], [1.0, 1.0]]), -4.0);
    }

    #[test]
    fn bt_blocks_constant_fields() {
        let m = mesh();
        let u = NodalField::constant(m, 0.5);
        let coeffs = Coefficients {
            a: [[1.0; 2]; 2],
            c: [1.0, 1.0],
            ..Default::default()
        };
        let blocks = diffusion_blocks(FluxKind::Bt, &u, &u, &coeffs, reg()).unwrap();
        for b in blocks {
            assert_eq!(b, [[1.5, 0.5], [0.5, 1.5]]);
        }
    }

    #[test]
    fn bt_delta_is_bt_plus_half_delta_skt() {
        let m = mesh();
        let u1 = NodalField::constant(m, 0.7);
        let u2 = NodalField::constant(m, 2.0);
        let coeffs = Coefficients {
            a: [[1.0, 2.0], [0.5, 3.0]],
            c: [0.3, 0.2],
            ..Default::default()
        };
        let no_c = Coefficients {
            c: [0.0; 2],
            ..coeffs.clone()
        };
        let d = 0.01;
        let bt = diffusion_blocks(FluxKind::Bt, &u1, &u2, &coeffs, reg()).unwrap();
        let btd = diffusion_blocks(FluxKind::BtDelta(d), &u1, &u2, &coeffs, reg()).unwrap();
        let skt = diffusion_blocks(FluxKind::Skt, &u1, &u2, &no_c, reg()).unwrap();
        for k in 0..bt.len() {
            for i in 0..2 {
                for j in 0..2 {
                    let diff = btd[k][i][j] - bt[k][i][j];
                    assert!((diff - 0.5 * d * skt[k][i][j]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn skt_adds_pressure_diagonal() {
        let m = mesh();
        let u1 = NodalField::constant(m, 2.0);
        let u2 = NodalField::constant(m, 3.0);
        let coeffs = Coefficients::with_diffusion([[1.0, 0.5], [0.25, 2.0]]);
        let blocks = diffusion_blocks(FluxKind::Skt, &u1, &u2, &coeffs, reg()).unwrap();
        // B_11 = a11 u1 + a12 u2 + a11 u1 = 2 + 1.5 + 2
        assert!((blocks[0][0][0] - 5.5).abs() < 1e-12);
        assert!((blocks[0][0][1] - 1.0).abs() < 1e-12);
        // B_22 = a21 u1 + a22 u2 + a22 u2 = 0.5 + 6 + 6
        assert!((blocks[0][1][1] - 12.5).abs() < 1e-12);
        assert!((blocks[0][1][0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn negative_lag_uses_clamped_mobility() {
        let m = mesh();
        let u1 = NodalField::constant(m, -5.0);
        let u2 = NodalField::constant(m, 1.0);
        let coeffs = Coefficients::with_diffusion([[1.0; 2]; 2]);
        let r = reg();
        let blocks = diffusion_blocks(FluxKind::Bt, &u1, &u2, &coeffs, r).unwrap();
        assert_eq!(blocks[0][0], [r.eps(), r.eps()]);
    }

    #[test]
    fn mesh_mismatch_is_reported() {
        let u1 = NodalField::constant(mesh(), 1.0);
        let u2 = NodalField::constant(Mesh1D::new(0.0, 1.0, 9).unwrap(), 1.0);
        let coeffs = Coefficients::default();
        assert_eq!(
            diffusion_blocks(FluxKind::Bt, &u1, &u2, &coeffs, reg()),
            Err(Error::MeshMismatch)
        );
        assert!(drift_load(0, &u1, &u2, &coeffs, reg()).is_err());
        assert!(reaction_terms([&u1, &u1], [&u1, &u2], &coeffs, reg()).is_err());
    }

    #[test]
    fn bt_delta_requires_positive_delta() {
        assert!(FluxKind::bt_delta(0.0).is_err());
        assert!(FluxKind::bt_delta(-1.0).is_err());
        assert!(FluxKind::bt_delta(1e-3).is_ok());
    }

    #[test]
    fn drift_load_examples() {
        let m = Mesh1D::new(0.0, 3.0, 300).unwrap();
        let u = NodalField::constant(m, 10.0);
        let mut coeffs = Coefficients {
            b: [4.0, 1.0],
            q: DriftField::Affine {
                slope: -3.0,
                center: 0.5,
            },
            ..Default::default()
        };
        let q = coeffs.q.sample(&m).unwrap();
        let load = drift_load(0, &u, &q, &coeffs, reg()).unwrap();
        // cells adjacent to x = 0.5 have midpoints at 0.495 and 0.505
        for k in [49, 50] {
            let expected = 4.0 * 10.0 * (-3.0) * (m.cell_midpoint(k) - 0.5);
            assert!((load[k] - expected).abs() < 1e-10);
            assert!(load[k].abs() <= 0.6 + 1e-12);
        }
        let zero_q = DriftField::zero().sample(&m).unwrap();
        assert!(drift_load(0, &u, &zero_q, &coeffs, reg())
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        coeffs.b = [0.0, 0.0];
        assert!(drift_load(0, &u, &q, &coeffs, reg())
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn reaction_examples() {
        let m = mesh();
        let half = NodalField::constant(m, 0.5);
        let none = reaction_terms(
            [&half, &half],
            [&half, &half],
            &Coefficients::default(),
            reg(),
        )
        .unwrap();
        assert!(none.implicit.iter().all(|r| *r == [0.0, 0.0]));
        assert!(none.explicit.iter().all(|r| *r == [0.0, 0.0]));

        let coeffs = Coefficients {
            alpha: [1.0, 1.0],
            beta: [[1.0, 1.0], [2.0, 2.0]],
            ..Default::default()
        };
        let rt = reaction_terms([&half, &half], [&half, &half], &coeffs, reg()).unwrap();
        for (imp, exp) in rt.implicit.iter().zip(&rt.explicit) {
            assert_eq!(*imp, [-1.0, -1.0]);
            assert!((exp[0] + 0.5).abs() < 1e-15);
            assert!((exp[1] + 1.0).abs() < 1e-15);
        }

        let neg = NodalField::constant(m, -2.0);
        let r = reg();
        let rt = reaction_terms([&neg, &neg], [&half, &half], &coeffs, r).unwrap();
        assert!((rt.explicit[0][0] + r.eps() * 1.0).abs() < 1e-18);
        assert!(rt.explicit.iter().all(|e| e[0] <= 0.0 && e[1] <= 0.0));
    }

    #[test]
    fn coefficient_validation() {
        let mut c = Coefficients::with_diffusion([[1.0; 2]; 2]);
        assert!(c.validate().is_ok());
        c.beta[1][0] = -1.0;
        assert!(c.validate().is_err());
        c.beta[1][0] = 0.0;
        c.b[0] = f64::NAN;
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn margin_swap_invariant(a in prop::array::uniform4(0.0..10.0f64)) {
            let m = [[a[0], a[1]], [a[2], a[3]]];
            let s = [[a[0], a[2]], [a[1], a[3]]];
            prop_assert_eq!(ellipticity_margin(&m), ellipticity_margin(&s));
        }

        #[test]
        fn bt_constant_fields_reduce(u1 in 0.01..50.0f64, u2 in 0.01..50.0f64,
                                     a in prop::array::uniform4(0.0..5.0f64),
                                     c in prop::array::uniform2(0.0..2.0f64)) {
            let m = mesh();
            let coeffs = Coefficients { a: [[a[0], a[1]], [a[2], a[3]]], c, ..Default::default() };
            let f1 = NodalField::constant(m, u1);
            let f2 = NodalField::constant(m, u2);
            let blocks = diffusion_blocks(FluxKind::Bt, &f1, &f2, &coeffs, reg()).unwrap();
            let u = [u1, u2];
            for b in blocks {
                for i in 0..2 { for j in 0..2 {
                    let expected = u[i] * coeffs.a[i][j] + if i == j { c[i] } else { 0.0 };
                    prop_assert!((b[i][j] - expected).abs() <= 1e-13 * (1.0 + expected));
                }}
            }
        }

        #[test]
        fn blocks_bounded_and_nonnegative(vals in prop::collection::vec(-5.0..500.0f64, 18),
                                          a in prop::array::uniform4(0.0..5.0f64),
                                          c in prop::array::uniform2(0.0..2.0f64),
                                          delta in 1e-4..1.0f64,
                                          skt in any::<bool>()) {
            let m = mesh();
            let r = RegParam::new(0.01).unwrap();
            let u1 = NodalField::new(m, vals[..9].to_vec()).unwrap();
            let u2 = NodalField::new(m, vals[9..].to_vec()).unwrap();
            let coeffs = Coefficients { a: [[a[0], a[1]], [a[2], a[3]]], c, ..Default::default() };
            let kind = if skt { FluxKind::Skt } else { FluxKind::BtDelta(delta) };
            let amax = a.iter().cloned().fold(0.0, f64::max);
            let cmax = c[0].max(c[1]);
            // SKT carries up to three mobility terms per diagonal entry;
            // BT-delta diagonals reach (1 + delta/2) + delta of them.
            let bound = if skt {
                3.0 * amax * r.inv() + cmax
            } else {
                amax * r.inv() * (1.0 + 1.5 * delta) + cmax
            };
            for b in diffusion_blocks(kind, &u1, &u2, &coeffs, r).unwrap() {
                for v in b.iter().flatten() {
                    prop_assert!(*v >= 0.0);
                    prop_assert!(*v <= bound * (1.0 + 1e-12));
                }
            }
            let bt = diffusion_blocks(FluxKind::Bt, &u1, &u2, &coeffs, r).unwrap();
            let btd = diffusion_blocks(FluxKind::BtDelta(delta), &u1, &u2, &coeffs, r).unwrap();
            let skt_bound = 3.0 * amax * r.inv();
            for (x, y) in bt.iter().zip(&btd) {
                for i in 0..2 { for j in 0..2 {
                    prop_assert!((y[i][j] - x[i][j]).abs() <= 0.5 * delta * skt_bound * (1.0 + 1e-12));
                }}
            }
        }
    }
}

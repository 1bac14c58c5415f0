//! Uniform one-dimensional P1 finite elements with a lumped (trapezoidal)
//! mass matrix.
//!
//! Nodal unknowns for the coupled two-species system are interleaved:
//! row `2 * j + s` belongs to species `s` at node `j`. With that ordering
//! every row couples at most to the neighbouring nodes of both species, so
//! the assembled matrix has three sub- and three super-diagonals.

mod banded;

pub use banded::{BandedLu, BandedMatrix};

use crate::error::{Error, Result};

/// Per-cell 2x2 species coupling: `block[i][j]` multiplies the gradient of
/// species `j` in the flux of species `i`.
pub type SpeciesBlock = [[f64; 2]; 2];

/// Number of sub/super diagonals of the interleaved two-species system.
pub const COUPLED_BANDWIDTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    left: f64,
    right: f64,
    num_cells: usize,
}

impl Mesh1D {
    pub fn new(left: f64, right: f64, num_cells: usize) -> Result<Self> {
        if !(left.is_finite() && right.is_finite()) || left >= right {
            return Err(Error::InvalidMesh(format!(
                "need finite left < right, got ({left}, {right})"
            )));
        }
        if num_cells < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least 2 cells, got {num_cells}"
            )));
        }
        Ok(Self {
            left,
            right,
            num_cells,
        })
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn num_nodes(&self) -> usize {
        self.num_cells + 1
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        (self.right - self.left) / self.num_cells as f64
    }

    pub fn measure(&self) -> f64 {
        self.right - self.left
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.num_cells {
            self.right
        } else {
            self.left + j as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.num_nodes()).map(|j| self.node(j)).collect()
    }

    pub fn cell_midpoint(&self, k: usize) -> f64 {
        0.5 * (self.node(k) + self.node(k + 1))
    }

    /// Lumped-mass weight of node `j`.
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.num_cells {
            0.5 * self.h()
        } else {
            self.h()
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.num_nodes()).map(|j| self.weight(j)).collect()
    }
}

/// A member of the P1 space: one real value per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    mesh: Mesh1D,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh: Mesh1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::SizeMismatch {
                what: "nodal values",
                expected: mesh.num_nodes(),
                actual: values.len(),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                x: mesh.node(j),
                value: values[j],
            });
        }
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: Mesh1D, value: f64) -> Self {
        Self {
            mesh,
            values: vec![value; mesh.num_nodes()],
        }
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Nodewise image under `f`. Fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.mesh, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &NodalField) -> Result<f64> {
        self.check_same_mesh(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn check_same_mesh(&self, other: &NodalField) -> Result<()> {
        if self.mesh == other.mesh {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// Nodewise `self + other`.
    pub fn add(&self, other: &NodalField) -> Result<NodalField> {
        self.check_same_mesh(other)?;
        Ok(Self {
            mesh: self.mesh,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scaled(&self, factor: f64) -> Result<NodalField> {
        self.map(|v| factor * v)
    }
}

/// Discrete semi-inner product `(f, g)^h = sum_j w_j f_j g_j`.
pub fn lumped_inner(f: &NodalField, g: &NodalField) -> Result<f64> {
    f.check_same_mesh(g)?;
    let mesh = f.mesh();
    Ok(f.values
        .iter()
        .zip(&g.values)
        .enumerate()
        .map(|(j, (a, b))| mesh.weight(j) * a * b)
        .sum())
}

/// `(f, 1)^h`, the discrete mass of `f`.
pub fn lumped_mass(f: &NodalField) -> f64 {
    let mesh = f.mesh();
    f.values
        .iter()
        .enumerate()
        .map(|(j, v)| mesh.weight(j) * v)
        .sum()
}

/// Lagrange interpolant of `func`.
pub fn interpolate(func: impl Fn(f64) -> f64, mesh: &Mesh1D) -> Result<NodalField> {
    let values = mesh.nodes().into_iter().map(func).collect();
    NodalField::new(*mesh, values)
}

/// Lumped-mass L2 projection. For continuous data this is nodal
/// interpolation.
pub fn l2_project(func: impl Fn(f64) -> f64, mesh: &Mesh1D) -> Result<NodalField> {
    interpolate(func, mesh)
}

/// Cell-wise constant gradient of a P1 field.
pub fn element_gradient(f: &NodalField) -> Vec<f64> {
    let inv_h = 1.0 / f.mesh().h();
    f.values.windows(2).map(|w| (w[1] - w[0]) * inv_h).collect()
}

/// Assembles the interleaved two-species system
///
/// `time_weight * M + diag(M * reaction) + sum_cells K_cell(block)`,
///
/// where `M` is the lumped mass and `K_cell(block)` couples species `i`
/// rows to species `j` columns with the stiffness `block[i][j] / h`.
/// `reaction_diag[j][s]` is a per-node coefficient multiplied by the node
/// weight.
pub fn assemble_banded(
    mesh: &Mesh1D,
    blocks: &[SpeciesBlock],
    reaction_diag: &[[f64; 2]],
    time_weight: f64,
) -> Result<BandedMatrix> {
    if blocks.len() != mesh.num_cells() {
        return Err(Error::SizeMismatch {
            what: "diffusion blocks",
            expected: mesh.num_cells(),
            actual: blocks.len(),
        });
    }
    if reaction_diag.len() != mesh.num_nodes() {
        return Err(Error::SizeMismatch {
            what: "reaction diagonal",
            expected: mesh.num_nodes(),
            actual: reaction_diag.len(),
        });
    }
    if !(time_weight > 0.0) {
        return Err(Error::InvalidParameter {
            name: "time_weight",
            reason: format!("must be positive, got {time_weight}"),
        });
    }
    let n = 2 * mesh.num_nodes();
    let mut a = BandedMatrix::zeros(n, COUPLED_BANDWIDTH, COUPLED_BANDWIDTH);
    for (j, r) in reaction_diag.iter().enumerate() {
        let w = mesh.weight(j);
        for s in 0..2 {
            a.add(2 * j + s, 2 * j + s, w * (time_weight + r[s]));
        }
    }
    let inv_h = 1.0 / mesh.h();
    for (k, block) in blocks.iter().enumerate() {
        for i in 0..2 {
            for s in 0..2 {
                let v = block[i][s] * inv_h;
                if v == 0.0 {
                    continue;
                }
                let (ri0, ri1) = (2 * k + i, 2 * (k + 1) + i);
                let (cs0, cs1) = (2 * k + s, 2 * (k + 1) + s);
                a.add(ri0, cs0, v);
                a.add(ri0, cs1, -v);
                a.add(ri1, cs0, -v);
                a.add(ri1, cs1, v);
            }
        }
    }
    Ok(a)
}

/// Scalar analogue of [`assemble_banded`]: a tridiagonal system for one
/// species with cell diffusion coefficients `diffusion`.
pub fn assemble_scalar(
    mesh: &Mesh1D,
    diffusion: &[f64],
    reaction_diag: &[f64],
    time_weight: f64,
) -> Result<BandedMatrix> {
    if diffusion.len() != mesh.num_cells() {
        return Err(Error::SizeMismatch {
            what: "diffusion coefficients",
            expected: mesh.num_cells(),
            actual: diffusion.len(),
        });
    }
    if reaction_diag.len() != mesh.num_nodes() {
        return Err(Error::SizeMismatch {
            what: "reaction diagonal",
            expected: mesh.num_nodes(),
            actual: reaction_diag.len(),
        });
    }
    let mut a = BandedMatrix::zeros(mesh.num_nodes(), 1, 1);
    for (j, r) in reaction_diag.iter().enumerate() {
        a.add(j, j, mesh.weight(j) * (time_weight + r));
    }
    let inv_h = 1.0 / mesh.h();
    for (k, d) in diffusion.iter().enumerate() {
        let v = d * inv_h;
        a.add(k, k, v);
        a.add(k, k + 1, -v);
        a.add(k + 1, k, -v);
        a.add(k + 1, k + 1, v);
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mesh(left: f64, right: f64, m: usize) -> Mesh1D {
        Mesh1D::new(left, right, m).unwrap()
    }

    #[test]
    fn mesh_rejects_bad_input() {
        assert!(Mesh1D::new(1.0, 0.0, 4).is_err());
        assert!(Mesh1D::new(0.0, 1.0, 1).is_err());
        assert!(Mesh1D::new(0.0, f64::NAN, 4).is_err());
    }

    #[test]
    fn uniform_nodes() {
        let m = mesh(0.0, 3.0, 301);
        assert_eq!(m.num_nodes(), 302);
        assert_eq!(m.node(0), 0.0);
        assert_eq!(m.node(301), 3.0);
        assert!((m.node(50) - 150.0 / 301.0).abs() < 1e-15);
    }

    #[test]
    fn field_validation() {
        let m = mesh(0.0, 1.0, 2);
        assert!(NodalField::new(m, vec![0.0; 2]).is_err());
        assert!(matches!(
            NodalField::new(m, vec![0.0, f64::NAN, 1.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn inner_of_ones_is_domain_measure() {
        let m = mesh(0.0, 3.0, 3);
        let one = NodalField::constant(m, 1.0);
        assert_eq!(lumped_inner(&one, &one).unwrap(), 3.0);
    }

    #[test]
    fn inner_of_constant_ten_is_thirty() {
        for cells in [3, 17, 301] {
            let m = mesh(0.0, 3.0, cells);
            let f = NodalField::constant(m, 10.0);
            let g = NodalField::constant(m, 1.0);
            assert!((lumped_inner(&f, &g).unwrap() - 30.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inner_single_interior_node() {
        let m = mesh(0.0, 1.0, 2);
        let f = NodalField::new(m, vec![0.0, 1.0, 0.0]).unwrap();
        let g = NodalField::constant(m, 1.0);
        assert_eq!(lumped_inner(&f, &g).unwrap(), 0.5);
    }

    #[test]
    fn inner_rejects_mesh_mismatch() {
        let f = NodalField::constant(mesh(0.0, 1.0, 2), 1.0);
        let g = NodalField::constant(mesh(0.0, 1.0, 3), 1.0);
        assert_eq!(lumped_inner(&f, &g), Err(Error::MeshMismatch));
    }

    #[test]
    fn interpolation_examples() {
        let m = mesh(0.0, 3.0, 30);
        let q = interpolate(|x| -3.0 * (x - 0.5), &m).unwrap();
        assert!(q.values()[5].abs() < 1e-14);

        let c = interpolate(|_| 10.0, &m).unwrap();
        assert!(c.values().iter().all(|&v| v == 10.0));

        let sq = interpolate(|x| x * x, &mesh(0.0, 1.0, 2)).unwrap();
        assert_eq!(sq.values(), &[0.0, 0.25, 1.0]);

        assert!(interpolate(|x| 1.0 / x, &m).is_err());
    }

    #[test]
    fn projection_examples() {
        let m = mesh(0.0, 1.0, 10);
        let f = |x: f64| (-(x - 0.4) * (x - 0.4) / 0.001).exp();
        assert_eq!(l2_project(f, &m).unwrap(), interpolate(f, &m).unwrap());
        assert!((l2_project(f, &m).unwrap().values()[4] - 1.0).abs() < 1e-15);
        assert!(l2_project(|_| 10.0, &m)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 10.0));
    }

    #[test]
    fn gradient_examples() {
        let m = mesh(0.0, 1.0, 2);
        assert_eq!(
            element_gradient(&NodalField::constant(m, 3.0)),
            vec![0.0, 0.0]
        );
        let hat = NodalField::new(m, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(element_gradient(&hat), vec![2.0, -2.0]);
        let id = interpolate(|x| x, &mesh(0.0, 1.0, 7)).unwrap();
        for g in element_gradient(&id) {
            assert!((g - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn assembly_without_diffusion_is_scaled_mass() {
        let m = mesh(0.0, 1.0, 4);
        let a = assemble_banded(&m, &[[[0.0; 2]; 2]; 4], &[[0.0; 2]; 5], 7.0).unwrap();
        let dense = a.to_dense();
        for (r, row) in dense.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let expected = if r == c { 7.0 * m.weight(r / 2) } else { 0.0 };
                assert_eq!(*v, expected);
            }
        }
    }

    #[test]
    fn single_species_stiffness_by_hand() {
        // M = 2, h = 0.5: (1/h)[1,-1,0; -1,2,-1; 0,-1,1] + (1/tau) diag(h/2, h, h/2)
        let m = mesh(0.0, 1.0, 2);
        let block = [[1.0, 0.0], [0.0, 0.0]];
        let tw = 4.0;
        let a = assemble_banded(&m, &[block; 2], &[[0.0; 2]; 3], tw).unwrap();
        let expected = [
            [2.0 + tw * 0.25, -2.0, 0.0],
            [-2.0, 4.0 + tw * 0.5, -2.0],
            [0.0, -2.0, 2.0 + tw * 0.25],
        ];
        for j in 0..3 {
            for l in 0..3 {
                assert!((a.get(2 * j, 2 * l) - expected[j][l]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cross_block_couples_species() {
        let m = mesh(0.0, 1.0, 3);
        let block = [[1.0, 0.5], [0.0, 1.0]];
        let a = assemble_banded(&m, &[block; 3], &[[0.0; 2]; 4], 1.0).unwrap();
        // species-1 row at node 1 reaches species-2 columns
        assert!(a.get(2, 3) != 0.0);
        assert!(a.get(2, 1) != 0.0);
        // no species-2 to species-1 coupling
        assert_eq!(a.get(3, 2), 0.0);
        assert_eq!(a.get(3, 0), 0.0);
    }

    #[test]
    fn assembly_size_errors() {
        let m = mesh(0.0, 1.0, 3);
        assert!(assemble_banded(&m, &[[[0.0; 2]; 2]; 2], &[[0.0; 2]; 4], 1.0).is_err());
        assert!(assemble_banded(&m, &[[[0.0; 2]; 2]; 3], &[[0.0; 2]; 3], 1.0).is_err());
        assert!(assemble_banded(&m, &[[[0.0; 2]; 2]; 3], &[[0.0; 2]; 4], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn lumped_norm_is_definite(vals in prop::collection::vec(-5.0..5.0f64, 6)) {
            let m = mesh(0.0, 2.0, 5);
            let f = NodalField::new(m, vals.clone()).unwrap();
            let n = lumped_inner(&f, &f).unwrap();
            prop_assert!(n >= 0.0);
            prop_assert_eq!(n == 0.0, vals.iter().all(|&v| v == 0.0));
        }

        #[test]
        fn interpolation_is_linear(alpha in -3.0..3.0f64, beta in -3.0..3.0f64, cells in 2usize..40) {
            let m = mesh(-1.0, 2.0, cells);
            let f = |x: f64| x.sin();
            let g = |x: f64| x * x - 1.0;
            let lhs = interpolate(|x| alpha * f(x) + beta * g(x), &m).unwrap();
            let fi = interpolate(f, &m).unwrap();
            let gi = interpolate(g, &m).unwrap();
            for j in 0..m.num_nodes() {
                let rhs = alpha * fi.values()[j] + beta * gi.values()[j];
                prop_assert!((lhs.values()[j] - rhs).abs() < 1e-12);
            }
        }

        #[test]
        fn affine_gradient_is_constant(slope in -10.0..10.0f64, off in -5.0..5.0f64, cells in 2usize..50) {
            let m = mesh(0.0, 3.0, cells);
            let g = element_gradient(&interpolate(|x| slope * x + off, &m).unwrap());
            for v in g {
                prop_assert!((v - slope).abs() < 1e-9 * (1.0 + slope.abs()));
            }
        }

        #[test]
        fn uncoupled_blocks_decouple(d1 in 0.0..5.0f64, d2 in 0.0..5.0f64, cells in 2usize..12) {
            let m = mesh(0.0, 1.0, cells);
            let blocks = vec![[[d1, 0.0], [0.0, d2]]; cells];
            let a = assemble_banded(&m, &blocks, &vec![[0.0; 2]; cells + 1], 3.0).unwrap();
            for r in 0..a.dim() {
                for c in 0..a.dim() {
                    if r % 2 != c % 2 {
                        prop_assert_eq!(a.get(r, c), 0.0);
                    }
                }
            }
        }

        #[test]
        fn banded_solve_matches_matvec(vals in prop::collection::vec(-1.0..1.0f64, 40)) {
            // random diagonally dominant 10x10 with kl = ku = 3
            let n = 10;
            let mut a = BandedMatrix::zeros(n, 3, 3);
            let mut it = vals.iter().cycle();
            for i in 0..n {
                for j in i.saturating_sub(3)..=(i + 3).min(n - 1) {
                    a.set(i, j, *it.next().unwrap());
                }
                a.add(i, i, 8.0);
            }
            let x: Vec<f64> = (0..n).map(|i| i as f64 - 4.5).collect();
            let b = a.matvec(&x);
            let y = a.solve(&b).unwrap();
            for (u, v) in x.iter().zip(&y) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }
}

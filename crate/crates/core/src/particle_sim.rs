//! Interacting particle system whose empirical densities approximate the
//! cross-diffusion model as the particle count grows.
//!
//! Particle `j` of species `i` moves by
//!
//! `dX = [-sum_k a_ik (1/n) sum_l zeta_eps'(X - X_l^k) + b_i grad_phi(X)] dt + sigma_i dW`
//!
//! integrated with Euler-Maruyama. On a bounded interval the particles are
//! reflected at the endpoints; this is a heuristic counterpart of the
//! no-flux boundary condition, not a derived one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh_fe::{lumped_mass, Mesh1D, NodalField};

/// Standard mollifier `exp(-1 / (1 - x^2))` on `(-1, 1)`, unnormalized.
fn bump(y: f64) -> f64 {
    if y.abs() < 1.0 {
        (-1.0 / (1.0 - y * y)).exp()
    } else {
        0.0
    }
}

fn bump_derivative(y: f64) -> f64 {
    if y.abs() < 1.0 {
        let d = 1.0 - y * y;
        bump(y) * (-2.0 * y / (d * d))
    } else {
        0.0
    }
}

/// Composite Simpson rule on `[lo, hi]` with `intervals` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    let h = (hi - lo) / intervals as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..intervals {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + k as f64 * h);
    }
    s * h / 3.0
}

/// Scaled interaction kernel `zeta_eps(x) = zeta(x / eps) / eps`, where
/// `zeta` is the normalized standard mollifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    eps_scale: f64,
    norm: f64,
}

impl KernelSpec {
    pub fn new(eps_scale: f64) -> Result<Self> {
        if !(eps_scale > 0.0 && eps_scale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "eps_scale",
                reason: format!("must be positive, got {eps_scale}"),
            });
        }
        Ok(Self {
            eps_scale,
            norm: simpson(bump, -1.0, 1.0, 4096),
        })
    }

    pub fn eps_scale(&self) -> f64 {
        self.eps_scale
    }

    /// Half-width of the support.
    pub fn support(&self) -> f64 {
        self.eps_scale
    }

    pub fn value(&self, x: f64) -> f64 {
        bump(x / self.eps_scale) / (self.norm * self.eps_scale)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        bump_derivative(x / self.eps_scale) / (self.norm * self.eps_scale * self.eps_scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    positions: [Vec<f64>; 2],
    sigma: [f64; 2],
    seed: u64,
    domain: (f64, f64),
    step: u64,
}

impl ParticleEnsemble {
    pub fn new(
        positions: [Vec<f64>; 2],
        sigma: [f64; 2],
        seed: u64,
        domain: (f64, f64),
    ) -> Result<Self> {
        let (left, right) = domain;
        if !(left < right) {
            return Err(Error::InvalidParameter {
                name: "domain",
                reason: format!("need left < right, got ({left}, {right})"),
            });
        }
        let n = positions[0].len();
        if n == 0 || positions[1].len() != n {
            return Err(Error::InvalidParameter {
                name: "positions",
                reason: format!(
                    "need the same positive count per species, got {} and {}",
                    n,
                    positions[1].len()
                ),
            });
        }
        if positions
            .iter()
            .flatten()
            .any(|x| !(x.is_finite() && *x >= left && *x <= right))
        {
            return Err(Error::InvalidParameter {
                name: "positions",
                reason: "all positions must lie in the domain".into(),
            });
        }
        if sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("must be non-negative, got {sigma:?}"),
            });
        }
        Ok(Self {
            positions,
            sigma,
            seed,
            domain,
            step: 0,
        })
    }

    /// Draws `n` particles per species from the piecewise-linear densities
    /// given by the positive parts of `densities`.
    pub fn sample(
        densities: [&NodalField; 2],
        n: usize,
        sigma: [f64; 2],
        seed: u64,
    ) -> Result<Self> {
        densities[0].check_same_mesh(densities[1])?;
        let mesh = *densities[0].mesh();
        let mut positions = [Vec::new(), Vec::new()];
        for (s, density) in densities.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX - s as u64);
            positions[s] = sample_piecewise_linear(density, n, &mut rng)?;
        }
        Self::new(positions, sigma, seed, (mesh.left(), mesh.right()))
    }

    pub fn n(&self) -> usize {
        self.positions[0].len()
    }

    pub fn positions(&self) -> &[Vec<f64>; 2] {
        &self.positions
    }

    pub fn sigma(&self) -> [f64; 2] {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Mean position of each species.
    pub fn center_of_mass(&self) -> [f64; 2] {
        let n = self.n() as f64;
        [0, 1].map(|s| self.positions[s].iter().sum::<f64>() / n)
    }
}

fn sample_piecewise_linear(
    density: &NodalField,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mesh = density.mesh();
    let h = mesh.h();
    let vals: Vec<f64> = density.values().iter().map(|v| v.max(0.0)).collect();
    let mut cdf = Vec::with_capacity(mesh.num_cells() + 1);
    cdf.push(0.0);
    for w in vals.windows(2) {
        let last = *cdf.last().unwrap();
        cdf.push(last + 0.5 * h * (w[0] + w[1]));
    }
    let total = *cdf.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter {
            name: "density",
            reason: "needs positive mass to sample from".into(),
        });
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.random::<f64>() * total;
        let k = cdf
            .partition_point(|&c| c <= target)
            .clamp(1, cdf.len() - 1)
            - 1;
        let (f0, f1) = (vals[k], vals[k + 1]);
        let r = target - cdf[k];
        // solve f0 s + (f1 - f0) s^2 / (2h) = r for s in [0, h]
        let slope = (f1 - f0) / h;
        let s = if slope.abs() < 1e-12 * (f0 + f1).max(1e-300) / h {
            if f0 > 0.0 {
                r / f0
            } else {
                0.5 * h
            }
        } else {
            let disc = (f0 * f0 + 2.0 * slope * r).max(0.0);
            2.0 * r / (f0 + disc.sqrt())
        };
        let x = mesh.node(k) + s.clamp(0.0, h);
        out.push(x.clamp(mesh.left(), mesh.right()));
    }
    Ok(out)
}

/// Folds `x` back into `[left, right]` by repeated reflection.
pub fn reflect(mut x: f64, left: f64, right: f64) -> f64 {
    let width = right - left;
    if !x.is_finite() {
        return x;
    }
    // remove whole periods of the reflected motion first
    let period = 2.0 * width;
    if x < left - period || x > right + period {
        x = left + (x - left).rem_euclid(period);
    }
    loop {
        if x < left {
            x = 2.0 * left - x;
        } else if x > right {
            x = 2.0 * right - x;
        } else {
            return x;
        }
    }
}

/// `kernel.derivative` sampled on `[0, support]` and interpolated linearly;
/// it replaces one `exp` per particle pair. Oddness is applied exactly, so
/// coincident particles feel nothing and pair forces cancel.
struct DerivativeTable {
    scale: f64,
    values: Vec<f64>,
}

/// Interval count of the table. The interpolation error is far below the
/// sampling noise of any ensemble this simulator handles.
const TABLE_INTERVALS: usize = 1 << 13;

impl DerivativeTable {
    fn new(kernel: &KernelSpec) -> Self {
        let step = kernel.support() / TABLE_INTERVALS as f64;
        let values = (0..=TABLE_INTERVALS)
            .map(|k| kernel.derivative(k as f64 * step))
            .collect();
        Self {
            scale: 1.0 / step,
            values,
        }
    }

    #[inline]
    fn eval(&self, d: f64) -> f64 {
        let t = d.abs() * self.scale;
        if !(t < TABLE_INTERVALS as f64) {
            return 0.0;
        }
        let k = t as usize;
        let v = self.values[k] + (t - k as f64) * (self.values[k + 1] - self.values[k]);
        if d < 0.0 {
            -v
        } else {
            v
        }
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Deterministic drift of every particle: repulsive kernel interaction plus
/// the potential force `b_i grad_phi`.
pub fn interaction_drift(
    ensemble: &ParticleEnsemble,
    kernel: &KernelSpec,
    a: &[[f64; 2]; 2],
    b: [f64; 2],
    grad_phi: &(dyn Fn(f64) -> f64 + Sync),
) -> [Vec<f64>; 2] {
    let n = ensemble.n() as f64;
    let support = kernel.support();
    let table = DerivativeTable::new(kernel);
    let sorted_pos = [
        sorted(&ensemble.positions[0]),
        sorted(&ensemble.positions[1]),
    ];
    let interaction = |x: f64, species: usize| -> f64 {
        let mut total = 0.0;
        for (k, others) in sorted_pos.iter().enumerate() {
            let coeff = a[species][k];
            if coeff == 0.0 {
                continue;
            }
            let lo = others.partition_point(|&y| y <= x - support);
            let hi = others.partition_point(|&y| y < x + support);
            let sum: f64 = others[lo..hi].iter().map(|&y| table.eval(x - y)).sum();
            total -= coeff / n * sum;
        }
        total
    };
    [0, 1].map(|s| {
        ensemble.positions[s]
            .par_iter()
            .map(|&x| {
                let potential = if b[s] != 0.0 { b[s] * grad_phi(x) } else { 0.0 };
                interaction(x, s) + potential
            })
            .collect()
    })
}

impl ParticleEnsemble {
    /// One Euler-Maruyama step in place. Noise for particle `j` of species
    /// `s` at step `m` comes from the ChaCha stream `(s, j)` of `seed`,
    /// positioned at block `m`, so results do not depend on scheduling.
    pub fn advance(
        &mut self,
        kernel: &KernelSpec,
        a: &[[f64; 2]; 2],
        b: [f64; 2],
        grad_phi: &(dyn Fn(f64) -> f64 + Sync),
        dt: f64,
    ) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        let drift = interaction_drift(self, kernel, a, b, grad_phi);
        let (left, right) = self.domain;
        let base = ChaCha8Rng::seed_from_u64(self.seed);
        let word = self.step as u128 * 16;
        let sqrt_dt = dt.sqrt();
        for s in 0..2 {
            let sigma = self.sigma[s];
            let drift_s = &drift[s];
            self.positions[s]
                .par_iter_mut()
                .enumerate()
                .for_each(|(j, x)| {
                    let mut next = *x + drift_s[j] * dt;
                    if sigma > 0.0 {
                        let mut rng = base.clone();
                        rng.set_stream(((s as u64) << 40) | j as u64);
                        rng.set_word_pos(word);
                        let z: f64 = rng.sample(StandardNormal);
                        next += sigma * sqrt_dt * z;
                    }
                    *x = reflect(next, left, right);
                });
        }
        self.step += 1;
        Ok(())
    }
}

/// Returns the ensemble after one Euler-Maruyama step.
pub fn em_step(
    ensemble: &ParticleEnsemble,
    kernel: &KernelSpec,
    a: &[[f64; 2]; 2],
    b: [f64; 2],
    grad_phi: &(dyn Fn(f64) -> f64 + Sync),
    dt: f64,
) -> Result<ParticleEnsemble> {
    let mut next = ensemble.clone();
    next.advance(kernel, a, b, grad_phi, dt)?;
    Ok(next)
}

/// Runs `steps` Euler-Maruyama steps.
pub fn simulate(
    ensemble: &mut ParticleEnsemble,
    kernel: &KernelSpec,
    a: &[[f64; 2]; 2],
    b: [f64; 2],
    grad_phi: &(dyn Fn(f64) -> f64 + Sync),
    dt: f64,
    steps: usize,
) -> Result<()> {
    for _ in 0..steps {
        ensemble.advance(kernel, a, b, grad_phi, dt)?;
    }
    Ok(())
}

/// Gaussian kernel-density estimate of each species at the mesh nodes,
/// with mirror images across both endpoints, rescaled to unit lumped mass.
pub fn empirical_density(
    ensemble: &ParticleEnsemble,
    mesh: &Mesh1D,
    bandwidth: f64,
) -> Result<[NodalField; 2]> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "bandwidth",
            reason: format!("must be positive, got {bandwidth}"),
        });
    }
    let nodes = mesh.nodes();
    let (left, right) = (mesh.left(), mesh.right());
    let cutoff = 8.0 * bandwidth;
    let inv_norm = 1.0 / (bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let mut out = Vec::with_capacity(2);
    for pos in &ensemble.positions {
        let mut images = Vec::with_capacity(3 * pos.len());
        for &x in pos {
            images.push(x);
            images.push(2.0 * left - x);
            images.push(2.0 * right - x);
        }
        images.sort_by(f64::total_cmp);
        let vals: Vec<f64> = nodes
            .iter()
            .map(|&xn| {
                let lo = images.partition_point(|&y| y < xn - cutoff);
                let hi = images.partition_point(|&y| y <= xn + cutoff);
                images[lo..hi]
                    .iter()
                    .map(|&y| {
                        let z = (xn - y) / bandwidth;
                        (-0.5 * z * z).exp() * inv_norm
                    })
                    .sum::<f64>()
            })
            .collect();
        let mut field = NodalField::new(*mesh, vals)?;
        if !(lumped_mass(&field) > 0.0) {
            field = cloud_in_cell(pos, mesh)?;
        }
        let mass = lumped_mass(&field);
        out.push(field.scaled(1.0 / mass)?);
    }
    let u2 = out.pop().unwrap();
    let u1 = out.pop().unwrap();
    Ok([u1, u2])
}

/// Linear deposit of unit-weight particles onto the nodes.
fn cloud_in_cell(pos: &[f64], mesh: &Mesh1D) -> Result<NodalField> {
    let h = mesh.h();
    let mut vals = vec![0.0; mesh.num_nodes()];
    for &x in pos {
        let r = ((x - mesh.left()) / h).clamp(0.0, mesh.num_cells() as f64);
        let k = (r.floor() as usize).min(mesh.num_cells() - 1);
        let s = r - k as f64;
        vals[k] += (1.0 - s) / mesh.weight(k);
        vals[k + 1] += s / mesh.weight(k + 1);
    }
    NodalField::new(*mesh, vals)
}

/// `sum_j w_j |p_j - u_j|` where `u` is the PDE solution rescaled to unit
/// lumped mass.
pub fn compare_to_pde(particle_density: &NodalField, pde_solution: &NodalField) -> Result<f64> {
    particle_density.check_same_mesh(pde_solution)?;
    let mass = lumped_mass(pde_solution);
    let scale = if mass > 0.0 { 1.0 / mass } else { 1.0 };
    let mesh = particle_density.mesh();
    Ok(particle_density
        .values()
        .iter()
        .zip(pde_solution.values())
        .enumerate()
        .map(|(j, (p, u))| mesh.weight(j) * (p - scale * u).abs())
        .sum())
}

/// L1 distance without rescaling either field.
pub fn l1_distance(f: &NodalField, g: &NodalField) -> Result<f64> {
    f.check_same_mesh(g)?;
    let mesh = f.mesh();
    Ok(f.values()
        .iter()
        .zip(g.values())
        .enumerate()
        .map(|(j, (a, b))| mesh.weight(j) * (a - b).abs())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fe::interpolate;
    use proptest::prelude::*;

    fn no_force(_: f64) -> f64 {
        0.0
    }

    #[test]
    fn kernel_is_normalized() {
        for eps in [0.01, 0.3, 2.0] {
            let k = KernelSpec::new(eps).unwrap();
            let integral = simpson(|x| k.value(x), -eps, eps, 20000);
            assert!((integral - 1.0).abs() < 1e-6);
            assert_eq!(k.value(1.01 * eps), 0.0);
            assert!(k.value(0.3 * eps) >= 0.0);
            assert_eq!(k.derivative(0.0), 0.0);
        }
        assert!(KernelSpec::new(0.0).is_err());
    }

    #[test]
    fn kernel_derivative_matches_finite_difference() {
        let k = KernelSpec::new(0.2).unwrap();
        for x in [-0.15, -0.05, 0.02, 0.11] {
            let h = 1e-6;
            let fd = (k.value(x + h) - k.value(x - h)) / (2.0 * h);
            assert!((fd - k.derivative(x)).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn single_particle_only_feels_potential() {
        let e = ParticleEnsemble::new([vec![0.3], vec![0.7]], [0.0; 2], 1, (0.0, 1.0)).unwrap();
        let k = KernelSpec::new(0.1).unwrap();
        let grad = |x: f64| 2.0 * x;
        let d = interaction_drift(&e, &k, &[[0.0; 2]; 2], [1.5, -1.0], &grad);
        assert!((d[0][0] - 0.9).abs() < 1e-15);
        assert!((d[1][0] + 1.4).abs() < 1e-15);
    }

    #[test]
    fn derivative_table_tracks_kernel() {
        let k = KernelSpec::new(0.05).unwrap();
        let table = DerivativeTable::new(&k);
        let peak = (0..1000)
            .map(|i| k.derivative(i as f64 * 5e-5).abs())
            .fold(0.0, f64::max);
        for i in 0..2000 {
            let d = -0.06 + i as f64 * 6.07e-5;
            assert!(
                (table.eval(d) - k.derivative(d)).abs() < 1e-6 * peak,
                "d = {d}"
            );
        }
        assert_eq!(table.eval(0.0), 0.0);
        assert_eq!(table.eval(0.0123), -table.eval(-0.0123));
    }

    #[test]
    fn coincident_particles_do_not_push() {
        let e = ParticleEnsemble::new([vec![0.5, 0.5], vec![0.1, 0.1]], [0.0; 2], 1, (0.0, 1.0))
            .unwrap();
        let k = KernelSpec::new(0.1).unwrap();
        let d = interaction_drift(&e, &k, &[[1.0; 2]; 2], [0.0; 2], &no_force);
        assert!(d[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn pair_repels_symmetrically() {
        let e = ParticleEnsemble::new([vec![0.48, 0.52], vec![0.0, 1.0]], [0.0; 2], 1, (0.0, 1.0))
            .unwrap();
        let k = KernelSpec::new(0.1).unwrap();
        let d = interaction_drift(&e, &k, &[[2.0, 0.0], [0.0, 0.0]], [0.0; 2], &no_force);
        assert!(d[0][0] < 0.0 && d[0][1] > 0.0);
        assert!((d[0][0] + d[0][1]).abs() < 1e-12);
        let expected = -(2.0 / 2.0) * k.derivative(-0.04);
        assert!((d[0][0] - expected).abs() < 1e-6 * expected.abs());
    }

    #[test]
    fn em_step_without_forces_or_noise_is_identity() {
        let e = ParticleEnsemble::new([vec![0.2, 0.3], vec![0.6, 0.9]], [0.0; 2], 3, (0.0, 1.0))
            .unwrap();
        let k = KernelSpec::new(0.05).unwrap();
        let next = em_step(&e, &k, &[[0.0; 2]; 2], [0.0; 2], &no_force, 0.01).unwrap();
        assert_eq!(next.positions(), e.positions());
        assert_eq!(next.steps_taken(), 1);
    }

    #[test]
    fn em_step_deterministic_drift() {
        let e = ParticleEnsemble::new([vec![0.2], vec![0.6]], [0.0; 2], 3, (0.0, 1.0)).unwrap();
        let k = KernelSpec::new(0.05).unwrap();
        let next = em_step(&e, &k, &[[0.0; 2]; 2], [1.0, 2.0], &|_| 0.5, 0.1).unwrap();
        assert!((next.positions()[0][0] - 0.25).abs() < 1e-15);
        assert!((next.positions()[1][0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn em_dt_must_be_positive() {
        let e = ParticleEnsemble::new([vec![0.2], vec![0.6]], [0.0; 2], 3, (0.0, 1.0)).unwrap();
        let k = KernelSpec::new(0.05).unwrap();
        assert!(em_step(&e, &k, &[[0.0; 2]; 2], [0.0; 2], &no_force, 0.0).is_err());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let mesh = Mesh1D::new(0.0, 1.0, 50).unwrap();
        let d = interpolate(|x| (-(x - 0.5) * (x - 0.5) / 0.01).exp(), &mesh).unwrap();
        let run = |seed| {
            let mut e = ParticleEnsemble::sample([&d, &d], 200, [0.3, 0.2], seed).unwrap();
            let k = KernelSpec::new(0.05).unwrap();
            simulate(
                &mut e,
                &k,
                &[[1.0; 2]; 2],
                [0.5, 0.0],
                &|x| x - 0.5,
                1e-3,
                20,
            )
            .unwrap();
            e
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn ensemble_validation() {
        assert!(ParticleEnsemble::new([vec![], vec![]], [0.0; 2], 0, (0.0, 1.0)).is_err());
        assert!(
            ParticleEnsemble::new([vec![0.5], vec![0.5, 0.6]], [0.0; 2], 0, (0.0, 1.0)).is_err()
        );
        assert!(ParticleEnsemble::new([vec![1.5], vec![0.5]], [0.0; 2], 0, (0.0, 1.0)).is_err());
        assert!(ParticleEnsemble::new([vec![0.5], vec![0.5]], [-1.0, 0.0], 0, (0.0, 1.0)).is_err());
    }

    #[test]
    fn reflection_folds_back() {
        assert!((reflect(-0.1, 0.0, 1.0) - 0.1).abs() < 1e-15);
        assert!((reflect(1.25, 0.0, 1.0) - 0.75).abs() < 1e-15);
        assert!((reflect(2.3, 0.0, 1.0) - 0.3).abs() < 1e-12);
        assert!((reflect(-1.2, 0.0, 1.0) - 0.8).abs() < 1e-12);
        assert_eq!(reflect(0.4, 0.0, 1.0), 0.4);
    }

    #[test]
    fn density_of_concentrated_ensemble() {
        let mesh = Mesh1D::new(0.0, 1.0, 10).unwrap();
        let e =
            ParticleEnsemble::new([vec![0.5; 20], vec![0.3; 20]], [0.0; 2], 0, (0.0, 1.0)).unwrap();
        let [d1, d2] = empirical_density(&e, &mesh, 1e-3).unwrap();
        assert!((lumped_mass(&d1) - 1.0).abs() < 1e-12);
        assert!((lumped_mass(&d2) - 1.0).abs() < 1e-12);
        assert!((d1.values()[5] - 1.0 / mesh.h()).abs() < 1e-9);
        assert!(d1.values()[4] < 1e-30);
        // bandwidth far below h, particle between nodes: deposit fallback
        let off = ParticleEnsemble::new([vec![0.55], vec![0.55]], [0.0; 2], 0, (0.0, 1.0)).unwrap();
        let [d, _] = empirical_density(&off, &mesh, 1e-6).unwrap();
        assert!((lumped_mass(&d) - 1.0).abs() < 1e-12);
        assert!(empirical_density(&off, &mesh, 0.0).is_err());
    }

    #[test]
    fn uniform_ensemble_density_is_flat() {
        let mesh = Mesh1D::new(0.0, 1.0, 20).unwrap();
        let flat = NodalField::constant(mesh, 1.0);
        let e = ParticleEnsemble::sample([&flat, &flat], 10_000, [0.0; 2], 11).unwrap();
        let [d, _] = empirical_density(&e, &mesh, 0.05).unwrap();
        for v in &d.values()[1..20] {
            assert!((v - 1.0).abs() < 0.1, "density {v}");
        }
    }

    #[test]
    fn comparison_examples() {
        let mesh = Mesh1D::new(0.0, 1.0, 10).unwrap();
        let one = NodalField::constant(mesh, 1.0);
        assert!(compare_to_pde(&one, &one).unwrap() < 1e-14);
        // PDE side is normalized: 3 -> 1
        assert!(compare_to_pde(&one, &NodalField::constant(mesh, 3.0)).unwrap() < 1e-14);
        let two = NodalField::constant(mesh, 2.0);
        assert!((l1_distance(&one, &two).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sampling_follows_density() {
        let mesh = Mesh1D::new(0.0, 2.0, 2).unwrap();
        // density zero on [0,1], linear rising on [1,2]
        let d = NodalField::new(mesh, vec![0.0, 0.0, 1.0]).unwrap();
        let e = ParticleEnsemble::sample([&d, &d], 4000, [0.0; 2], 5).unwrap();
        assert!(e.positions()[0].iter().all(|&x| x >= 1.0));
        // mean of density 2(x-1) on [1,2] is 5/3
        let mean = e.center_of_mass()[0];
        assert!((mean - 5.0 / 3.0).abs() < 0.02, "mean {mean}");
    }

    proptest! {
        #[test]
        fn step_preserves_count_and_domain(seed in 0u64..1000, sigma in 0.0..3.0f64) {
            let mesh = Mesh1D::new(-1.0, 2.0, 30).unwrap();
            let d = NodalField::constant(mesh, 1.0);
            let mut e = ParticleEnsemble::sample([&d, &d], 50, [sigma, 0.5 * sigma], seed).unwrap();
            let k = KernelSpec::new(0.3).unwrap();
            simulate(&mut e, &k, &[[1.0, 0.5], [0.5, 1.0]], [1.0, -1.0], &|x| 3.0 * x, 0.05, 5).unwrap();
            prop_assert_eq!(e.n(), 50);
            for x in e.positions().iter().flatten() {
                prop_assert!(*x >= -1.0 && *x <= 2.0);
            }
        }

        #[test]
        fn intra_species_forces_cancel(xs in prop::collection::vec(0.3..0.7f64, 2..40)) {
            let n = xs.len();
            let e = ParticleEnsemble::new([xs, vec![0.5; n]], [0.0; 2], 0, (0.0, 1.0)).unwrap();
            let k = KernelSpec::new(0.1).unwrap();
            let d = interaction_drift(&e, &k, &[[1.3, 0.0], [0.0, 0.0]], [0.0; 2], &no_force);
            let total: f64 = d[0].iter().sum();
            let scale: f64 = d[0].iter().map(|v| v.abs()).sum::<f64>() + 1.0;
            prop_assert!(total.abs() <= 1e-10 * scale);
        }
    }
}

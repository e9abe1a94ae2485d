//! Affine `p`-energy on the unit square:
//!
//! `E(u) = γ (∫_{S¹} ‖∇_ξ u‖_p^{-2} dσ(ξ))^{-1/2}`,
//!
//! its gradient, the anisotropic kernel `H_u^p`, and the functional
//! `Φ_A(u) = (1/p)E(u)^p − ∫F(u)`. The circle integral uses the equally
//! weighted rule on `m` equispaced directions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::mesh::{CellVector, Field, Grid, MAX_DIM};
use crate::nonlinearity::Nonlinearity;
use crate::scalar::{abs_pow, signed_pow, Scalar};

/// Default number of directions.
pub const DEFAULT_DIRECTIONS: usize = 64;
/// Default floor for degenerate directional norms.
pub const DEFAULT_EPS_FLOOR: f64 = 1e-10;

/// Equispaced rule on the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature<T> {
    directions: Vec<[T; 2]>,
    weights: Vec<T>,
}

impl<T: Scalar> SphereQuadrature<T> {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Config(format!("direction count must be at least 2, got {m}")));
        }
        let step = T::TAU() / T::from_usize_lossy(m);
        let directions = (0..m)
            .map(|j| {
                let a = step * T::from_usize_lossy(j);
                [a.cos(), a.sin()]
            })
            .collect();
        Ok(SphereQuadrature { directions, weights: vec![step; m] })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[[T; 2]] {
        &self.directions
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

/// `ω_k = π^{k/2}/Γ(k/2 + 1)`, the volume of the unit ball in `ℝ^k`.
fn ball_volume(k: f64) -> f64 {
    std::f64::consts::PI.powf(k / 2.0) / gamma(k / 2.0 + 1.0)
}

/// Normalizing constant `γ_{N,p} = (2ω_{N+p−2})^{-1} (N ω_N ω_{p−1}) (N ω_N)^{p/N}`.
pub fn gamma_constant(n: usize, p: f64) -> Result<f64> {
    if n == 0 || !(p > 1.0) {
        return Err(Error::Domain(format!("gamma constant needs N >= 1 and p > 1, got N={n}, p={p}")));
    }
    let nf = n as f64;
    let area = nf * ball_volume(nf);
    Ok(area * ball_volume(p - 1.0) * area.powf(p / nf) / (2.0 * ball_volume(nf + p - 2.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams<T> {
    pub p: T,
    pub gamma: T,
    pub eps_floor: T,
}

impl<T: Scalar> AffineParams<T> {
    pub fn new(p: T) -> Result<Self> {
        Self::with_floor(p, T::lit(DEFAULT_EPS_FLOOR))
    }

    pub fn with_floor(p: T, eps_floor: T) -> Result<Self> {
        if !(eps_floor > T::zero()) {
            return Err(Error::Config(format!("eps_floor must be positive, got {eps_floor}")));
        }
        Ok(AffineParams { p, gamma: T::lit(gamma_constant(2, p.as_f64())?), eps_floor })
    }
}

fn require_plane<T: Scalar>(grid: &Grid<T>) -> Result<()> {
    if grid.dim() != 2 {
        return Err(Error::Config(format!("the affine energy is implemented for dim = 2, got dim = {}", grid.dim())));
    }
    Ok(())
}

fn directional<T: Scalar>(g: &CellVector<T>, xi: &[T; 2]) -> T {
    g[0] * xi[0] + g[1] * xi[1]
}

/// `‖∇_ξ u‖_p` for every direction of the rule.
pub fn directional_lp_norms<T: Scalar>(grid: &Grid<T>, u: &Field<T>, quad: &SphereQuadrature<T>, p: T) -> Result<Vec<T>> {
    require_plane(grid)?;
    grid.check(u)?;
    let g = grid.gradient(u);
    Ok(norms_from_gradient(grid, &g, quad, p))
}

fn norms_from_gradient<T: Scalar>(grid: &Grid<T>, g: &[CellVector<T>], quad: &SphereQuadrature<T>, p: T) -> Vec<T> {
    let w = grid.cell_volume();
    quad.directions
        .par_iter()
        .map(|xi| {
            let s: T = g.iter().map(|gc| abs_pow(directional(gc, xi), p)).sum();
            (s * w).powf(T::one() / p)
        })
        .collect()
}

/// Directional norms floored at `eps_floor`, with the count of floored
/// entries. Every entry below the floor is a degenerate field.
fn floored_norms<T: Scalar>(norms: Vec<T>, floor: T) -> Result<(Vec<T>, Vec<bool>)> {
    let low: Vec<bool> = norms.iter().map(|&d| d < floor).collect();
    if low.iter().all(|&b| b) {
        return Err(Error::Degenerate("all directional derivatives vanish".into()));
    }
    Ok((norms.into_iter().map(|d| d.max(floor)).collect(), low))
}

/// Directional data shared by the energy and its gradient.
struct Evaluation<T> {
    gradient: Vec<CellVector<T>>,
    norms: Vec<T>,
    floored: Vec<bool>,
    /// `Σ w_j D_j^{-2}`
    inverse_sum: T,
    energy: T,
}

fn evaluate<T: Scalar>(grid: &Grid<T>, u: &Field<T>, quad: &SphereQuadrature<T>, params: &AffineParams<T>) -> Result<Evaluation<T>> {
    require_plane(grid)?;
    grid.check(u)?;
    let gradient = grid.gradient(u);
    let raw = norms_from_gradient(grid, &gradient, quad, params.p);
    let (norms, floored) = floored_norms(raw, params.eps_floor)?;
    let inverse_sum: T = norms.iter().zip(&quad.weights).map(|(&d, &w)| w / (d * d)).sum();
    let energy = params.gamma / inverse_sum.sqrt();
    Ok(Evaluation { gradient, norms, floored, inverse_sum, energy })
}

/// `E(u)`.
pub fn affine_energy<T: Scalar>(grid: &Grid<T>, u: &Field<T>, quad: &SphereQuadrature<T>, params: &AffineParams<T>) -> Result<T> {
    Ok(evaluate(grid, u, quad, params)?.energy)
}

/// Nodal gradient of `(1/p)E(u)^p`.
pub fn affine_energy_grad<T: Scalar>(grid: &Grid<T>, u: &Field<T>, quad: &SphereQuadrature<T>, params: &AffineParams<T>) -> Result<Field<T>> {
    let ev = evaluate(grid, u, quad, params)?;
    Ok(energy_grad_from(grid, quad, params, &ev))
}

fn energy_grad_from<T: Scalar>(grid: &Grid<T>, quad: &SphereQuadrature<T>, params: &AffineParams<T>, ev: &Evaluation<T>) -> Field<T> {
    let p = params.p;
    // dE = γ S^{-3/2} Σ_j w_j D_j^{-2-p} Σ_c |g·ξ|^{p-2}(g·ξ) ξ·dg h²
    let lead = params.gamma * ev.inverse_sum.powf(T::lit(-1.5)) * grid.cell_volume();
    let coeffs: Vec<T> = ev
        .norms
        .iter()
        .zip(&quad.weights)
        .zip(&ev.floored)
        .map(|((&d, &w), &low)| if low { T::zero() } else { lead * w * d.powf(-T::lit(2.0) - p) })
        .collect();
    let flux: Vec<CellVector<T>> = ev
        .gradient
        .par_iter()
        .map(|gc| {
            let mut out = [T::zero(); MAX_DIM];
            for (xi, &a) in quad.directions.iter().zip(&coeffs) {
                if a == T::zero() {
                    continue;
                }
                let s = a * signed_pow(directional(gc, xi), p);
                out[0] = out[0] + s * xi[0];
                out[1] = out[1] + s * xi[1];
            }
            out
        })
        .collect();
    let mut g = grid.gradient_adjoint(&flux);
    g.scale_mut(ev.energy.powf(p - T::one()));
    g
}

/// `H_u^p(ζ) = γ^{-2} E(u)^{2+p} ∫_{S¹} ‖∇_ξ u‖_p^{-(2+p)} |⟨ξ, ζ⟩|^p dσ(ξ)`.
///
/// With this normalization `∫_Ω H_u^p(∇u) = E(u)^p`.
pub fn h_u_kernel<T: Scalar>(grid: &Grid<T>, u: &Field<T>, quad: &SphereQuadrature<T>, params: &AffineParams<T>, zeta: [T; 2]) -> Result<T> {
    let ev = evaluate(grid, u, quad, params)?;
    Ok(kernel_from(quad, params, &ev, &zeta))
}

fn kernel_from<T: Scalar>(quad: &SphereQuadrature<T>, params: &AffineParams<T>, ev: &Evaluation<T>, zeta: &[T; 2]) -> T {
    let p = params.p;
    let two = T::lit(2.0);
    let integral: T = quad
        .directions
        .iter()
        .zip(&quad.weights)
        .zip(&ev.norms)
        .map(|((xi, &w), &d)| w * d.powf(-(two + p)) * abs_pow(xi[0] * zeta[0] + xi[1] * zeta[1], p))
        .sum();
    ev.energy.powf(two + p) * integral / (params.gamma * params.gamma)
}

/// `∫_Ω H_u^p(∇u)` by cell quadrature.
pub fn kernel_energy<T: Scalar>(grid: &Grid<T>, u: &Field<T>, quad: &SphereQuadrature<T>, params: &AffineParams<T>) -> Result<T> {
    let ev = evaluate(grid, u, quad, params)?;
    let s: T = ev.gradient.iter().map(|gc| kernel_from(quad, params, &ev, &[gc[0], gc[1]])).sum();
    Ok(s * grid.cell_volume())
}

/// `Φ_A(u) = (1/p)E(u)^p − ∫F(u)`.
pub fn eval_phi_affine<T: Scalar>(
    grid: &Grid<T>,
    u: &Field<T>,
    quad: &SphereQuadrature<T>,
    params: &AffineParams<T>,
    nonlin: &Nonlinearity<T>,
) -> Result<T> {
    let e = affine_energy(grid, u, quad, params)?;
    Ok(e.powf(params.p) / params.p - nonlin.integral_primitive(u.values(), grid.cell_volume()))
}

/// Nodal gradient of [`eval_phi_affine`].
pub fn grad_phi_affine<T: Scalar>(
    grid: &Grid<T>,
    u: &Field<T>,
    quad: &SphereQuadrature<T>,
    params: &AffineParams<T>,
    nonlin: &Nonlinearity<T>,
) -> Result<Field<T>> {
    let mut g = affine_energy_grad(grid, u, quad, params)?;
    let w = grid.cell_volume();
    for (gi, &v) in g.values_mut().iter_mut().zip(u.values()) {
        *gi = *gi - nonlin.f(v) * w;
    }
    Ok(g)
}

/// The affine functional bound to a grid, a rule and a nonlinearity.
#[derive(Debug, Clone)]
pub struct AffineModel<'g, T> {
    grid: &'g Grid<T>,
    quad: SphereQuadrature<T>,
    params: AffineParams<T>,
    nonlinearity: Nonlinearity<T>,
}

impl<'g, T: Scalar> AffineModel<'g, T> {
    pub fn new(grid: &'g Grid<T>, p: T, m: usize, nonlinearity: Nonlinearity<T>) -> Result<Self> {
        require_plane(grid)?;
        nonlinearity.validate()?;
        Ok(AffineModel { grid, quad: SphereQuadrature::new(m)?, params: AffineParams::new(p)?, nonlinearity })
    }

    pub fn grid(&self) -> &'g Grid<T> {
        self.grid
    }

    pub fn params(&self) -> &AffineParams<T> {
        &self.params
    }

    pub fn quadrature(&self) -> &SphereQuadrature<T> {
        &self.quad
    }

    pub fn nonlinearity(&self) -> &Nonlinearity<T> {
        &self.nonlinearity
    }

    pub fn energy(&self, u: &Field<T>) -> Result<T> {
        affine_energy(self.grid, u, &self.quad, &self.params)
    }

    pub fn energy_grad(&self, u: &Field<T>) -> Result<Field<T>> {
        affine_energy_grad(self.grid, u, &self.quad, &self.params)
    }

    /// Count of directions floored at `eps_floor` for `u`.
    pub fn floored_directions(&self, u: &Field<T>) -> Result<usize> {
        Ok(evaluate(self.grid, u, &self.quad, &self.params)?.floored.iter().filter(|&&b| b).count())
    }

    pub fn eval_phi(&self, u: &Field<T>) -> Result<T> {
        eval_phi_affine(self.grid, u, &self.quad, &self.params, &self.nonlinearity)
    }

    pub fn grad_phi(&self, u: &Field<T>) -> Result<Field<T>> {
        grad_phi_affine(self.grid, u, &self.quad, &self.params, &self.nonlinearity)
    }

    /// Profile of `Φ_A` along `t ↦ t u`.
    pub fn ray(&self, u: &Field<T>) -> Result<AffineRay<T>> {
        let e = self.energy(u)?;
        Ok(AffineRay {
            p: self.params.p,
            energy_p: e.powf(self.params.p),
            nonlinearity: self.nonlinearity,
            values: u.values().to_vec(),
            weight: self.grid.cell_volume(),
        })
    }
}

/// `Φ_A(tu) = (t^p/p) E(u)^p − Σ F(t u_i) h²`.
#[derive(Debug, Clone)]
pub struct AffineRay<T> {
    p: T,
    energy_p: T,
    nonlinearity: Nonlinearity<T>,
    values: Vec<T>,
    weight: T,
}

impl<T: Scalar> AffineRay<T> {
    pub fn value(&self, t: T) -> T {
        let k: T = self.values.iter().map(|&v| self.nonlinearity.primitive(t * v)).sum();
        t.powf(self.p) * self.energy_p / self.p - k * self.weight
    }

    pub fn derivative(&self, t: T) -> T {
        let k: T = self.values.iter().map(|&v| self.nonlinearity.f(t * v) * v).sum();
        t.powf(self.p - T::one()) * self.energy_p - k * self.weight
    }

    pub fn second_derivative(&self, t: T) -> Option<T> {
        let mut k = T::zero();
        for &v in &self.values {
            if v != T::zero() {
                k = k + self.nonlinearity.fprime(t * v).ok()?.value * v * v;
            }
        }
        Some((self.p - T::one()) * t.powf(self.p - T::lit(2.0)) * self.energy_p - k * self.weight)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_random(grid: &Grid<f64>, rng: &mut ChaCha8Rng) -> Field<f64> {
        let mut u = grid.zeros();
        for kx in 1..=3 {
            for ky in 1..=3 {
                let a: f64 = rng.random_range(-1.0..1.0) / (kx * ky) as f64;
                u.axpy(a, &grid.mode_field(&[kx, ky]));
            }
        }
        u
    }

    #[test]
    fn quadrature_invariants() {
        let q = SphereQuadrature::<f64>::new(64).unwrap();
        assert_relative_eq!(q.weights().iter().sum::<f64>(), 2.0 * std::f64::consts::PI, max_relative = 1e-12);
        for j in 0..32 {
            let (a, b) = (q.directions()[j], q.directions()[j + 32]);
            assert!((a[0] + b[0]).abs() < 1e-14 && (a[1] + b[1]).abs() < 1e-14);
        }
        assert!(SphereQuadrature::<f64>::new(1).is_err());
    }

    #[test]
    fn gamma_constant_values() {
        let pi = std::f64::consts::PI;
        assert_relative_eq!(gamma_constant(2, 2.0).unwrap(), 4.0 * pi, max_relative = 1e-12);
        // closed values ω₁ = 2, ω₂ = π
        assert_relative_eq!(ball_volume(1.0), 2.0, max_relative = 1e-12);
        assert_relative_eq!(ball_volume(2.0), pi, max_relative = 1e-12);
        let by_hand = (2.0 * pi) * 2.0 * (2.0 * pi) / (2.0 * pi);
        assert_relative_eq!(gamma_constant(2, 2.0).unwrap(), by_hand, max_relative = 1e-12);
        let mut prev = 0.0;
        for i in 0..=15 {
            let v = gamma_constant(2, 1.5 + 0.1 * i as f64).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn directional_norms_symmetries() {
        let grid = Grid::<f64>::new(2, 31).unwrap();
        let q = SphereQuadrature::new(64).unwrap();
        let u = grid.mode_field(&[1, 1]);
        let d = directional_lp_norms(&grid, &u, &q, 2.0).unwrap();
        for j in 0..32 {
            assert_relative_eq!(d[j], d[j + 32], max_relative = 1e-12);
        }
        assert_relative_eq!(d[0], d[16], max_relative = 1e-10);
        let d3 = directional_lp_norms(&grid, &u.scaled(3.0), &q, 2.0).unwrap();
        for (a, b) in d.iter().zip(&d3) {
            assert_relative_eq!(3.0 * a, *b, max_relative = 1e-12);
        }
        assert!(matches!(affine_energy(&grid, &grid.zeros(), &q, &AffineParams::new(2.0).unwrap()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn energy_homogeneity_and_quadrature_convergence() {
        let grid = Grid::<f64>::new(2, 15).unwrap();
        let params = AffineParams::new(3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let u = smooth_random(&grid, &mut rng);
            let q64 = SphereQuadrature::new(64).unwrap();
            let e = affine_energy(&grid, &u, &q64, &params).unwrap();
            assert!(e > 0.0);
            for t in [0.1, 2.0, 7.0] {
                assert_relative_eq!(affine_energy(&grid, &u.scaled(t), &q64, &params).unwrap(), t * e, max_relative = 1e-12);
            }
            let e16 = affine_energy(&grid, &u, &SphereQuadrature::new(16).unwrap(), &params).unwrap();
            let e256 = affine_energy(&grid, &u, &SphereQuadrature::new(256).unwrap(), &params).unwrap();
            assert!((e256 - e).abs() <= (e - e16).abs());
        }
    }

    #[test]
    fn quadratic_energy_matches_closed_form() {
        // p = 2: ‖∇_ξ u‖² = ξᵀMξ and ∫_{S¹} (ξᵀMξ)^{-1} dσ = 2π/√det M
        let grid = Grid::<f64>::new(2, 15).unwrap();
        let params = AffineParams::new(2.0).unwrap();
        let q = SphereQuadrature::new(512).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = smooth_random(&grid, &mut rng);
        let w = grid.cell_volume();
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for g in grid.gradient(&u) {
            a += g[0] * g[0] * w;
            b += g[0] * g[1] * w;
            c += g[1] * g[1] * w;
        }
        let pi = std::f64::consts::PI;
        let expected = 4.0 * pi * (2.0 * pi / (a * c - b * b).sqrt()).powf(-0.5);
        assert_relative_eq!(affine_energy(&grid, &u, &q, &params).unwrap(), expected, max_relative = 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let grid = Grid::<f64>::new(2, 9).unwrap();
        let q = SphereQuadrature::new(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in [1.5, 2.0, 3.0] {
            let params = AffineParams::new(p).unwrap();
            for _ in 0..5 {
                let u = Field::from_vec((0..grid.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect());
                let v = Field::from_vec((0..grid.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect());
                let f = |w: &Field<f64>| affine_energy(&grid, w, &q, &params).unwrap().powf(p) / p;
                let h = 1e-6;
                let fd = (f(&u.add(&v.scaled(h))) - f(&u.sub(&v.scaled(h)))) / (2.0 * h);
                let g = affine_energy_grad(&grid, &u, &q, &params).unwrap();
                assert_relative_eq!(g.dot(&v), fd, max_relative = 1e-6);
                // Euler identity and (p−1)-homogeneity
                assert_relative_eq!(g.dot(&u), affine_energy(&grid, &u, &q, &params).unwrap().powf(p), max_relative = 1e-10);
                let g2 = affine_energy_grad(&grid, &u.scaled(2.0), &q, &params).unwrap();
                assert!(g2.sub(&g.scaled(2f64.powf(p - 1.0))).norm_inf() <= 1e-10 * g2.norm_inf());
            }
        }
    }

    #[test]
    fn kernel_properties() {
        let grid = Grid::<f64>::new(2, 31).unwrap();
        let q = SphereQuadrature::new(128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for p in [2.0, 2.5] {
            let params = AffineParams::new(p).unwrap();
            let u = smooth_random(&grid, &mut rng);
            assert_eq!(h_u_kernel(&grid, &u, &q, &params, [0.0, 0.0]).unwrap(), 0.0);
            let z = [0.3, -1.2];
            let a = h_u_kernel(&grid, &u, &q, &params, z).unwrap();
            let b = h_u_kernel(&grid, &u, &q, &params, [0.6, -2.4]).unwrap();
            assert_relative_eq!(b, 2f64.powf(p) * a, max_relative = 1e-12);
            assert_relative_eq!(h_u_kernel(&grid, &u, &q, &params, [-0.3, 1.2]).unwrap(), a, max_relative = 1e-12);
            let lhs = kernel_energy(&grid, &u, &q, &params).unwrap();
            let rhs = affine_energy(&grid, &u, &q, &params).unwrap().powf(p);
            assert!((lhs - rhs).abs() <= 2e-2 * rhs);
        }
    }

    #[test]
    fn phi_gradient_and_evenness() {
        let grid = Grid::<f64>::new(2, 8).unwrap();
        let model = AffineModel::new(&grid, 2.0, 64, Nonlinearity::PurePower { r: 4.0 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = Field::from_vec((0..grid.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect());
        let v = Field::from_vec((0..grid.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect());
        assert_eq!(model.eval_phi(&u).unwrap(), model.eval_phi(&u.neg()).unwrap());
        let h = 1e-6;
        let fd = (model.eval_phi(&u.add(&v.scaled(h))).unwrap() - model.eval_phi(&u.sub(&v.scaled(h))).unwrap()) / (2.0 * h);
        assert_relative_eq!(model.grad_phi(&u).unwrap().dot(&v), fd, max_relative = 1e-6);
        let ray = model.ray(&u).unwrap();
        let t = 0.7;
        assert_relative_eq!(ray.value(t), model.eval_phi(&u.scaled(t)).unwrap(), max_relative = 1e-12);
        let d = (ray.value(t + h) - ray.value(t - h)) / (2.0 * h);
        assert_relative_eq!(ray.derivative(t), d, max_relative = 1e-7);
        let d2 = (ray.derivative(t + h) - ray.derivative(t - h)) / (2.0 * h);
        assert_relative_eq!(ray.second_derivative(t).unwrap(), d2, max_relative = 1e-6);
    }

    #[test]
    fn requires_plane_grid() {
        let grid = Grid::<f64>::new(1, 8).unwrap();
        assert!(AffineModel::new(&grid, 2.0, 64, Nonlinearity::PurePower { r: 4.0 }).is_err());
    }
}

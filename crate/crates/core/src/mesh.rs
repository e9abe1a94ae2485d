//! Uniform tensor grids on the unit interval, square and cube with
//! homogeneous Dirichlet data.
//!
//! Nodal fields store interior values only; boundary values are implicitly
//! zero. Gradients live on cells: for every extended multi-index
//! `k ∈ {0..=n}^dim` the cell gradient is the vector of forward differences
//! `(v(k + e_a) - v(k)) / h`, where `v` is the nodal field extended by zero.
//! For `p = 2` the resulting energy is exactly `h^dim · u·(L u)` with `L` the
//! standard 3/5/7-point negative Laplacian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest spatial dimension supported by the grid.
pub const MAX_DIM: usize = 3;

/// Cell gradient; components past `dim` are zero.
pub type CellVector<T> = [T; MAX_DIM];

/// Vector of interior nodal values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field<T> {
    values: Vec<T>,
}

impl<T: Scalar> Field<T> {
    pub fn zeros(len: usize) -> Self {
        Field { values: vec![T::zero(); len] }
    }

    pub fn from_vec(values: Vec<T>) -> Self {
        Field { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    /// Plain Euclidean pairing of nodal vectors (no quadrature weight).
    pub fn dot(&self, other: &Field<T>) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn scaled(&self, t: T) -> Field<T> {
        Field { values: self.values.iter().map(|&v| v * t).collect() }
    }

    pub fn scale_mut(&mut self, t: T) {
        self.values.iter_mut().for_each(|v| *v = *v * t);
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: T, x: &Field<T>) {
        for (v, &xi) in self.values.iter_mut().zip(&x.values) {
            *v = *v + a * xi;
        }
    }

    pub fn add(&self, other: &Field<T>) -> Field<T> {
        let mut out = self.clone();
        out.axpy(T::one(), other);
        out
    }

    pub fn sub(&self, other: &Field<T>) -> Field<T> {
        let mut out = self.clone();
        out.axpy(-T::one(), other);
        out
    }

    pub fn neg(&self) -> Field<T> {
        self.scaled(-T::one())
    }

    pub fn norm_inf(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn euclidean_norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Uniform grid with `n` interior nodes per axis on `[0, 1]^dim`.
#[derive(Debug, Clone)]
pub struct Grid<T> {
    dim: usize,
    n: usize,
    h: T,
    /// Orthonormal discrete sine transform, row-major `n × n`.
    sine: Vec<T>,
    /// One-dimensional eigenvalues `(2/h²)(1 - cos(kπh))`, `k = 1..=n`.
    eig1d: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Config(format!("grid dimension must be 1, 2 or 3, got {dim}")));
        }
        if n < 3 {
            return Err(Error::Config(format!("grid needs at least 3 interior nodes per axis, got {n}")));
        }
        let np1 = T::from_usize_lossy(n + 1);
        let h = T::one() / np1;
        let pi = T::PI();
        let norm = (T::lit(2.0) / np1).sqrt();
        let mut sine = Vec::with_capacity(n * n);
        for i in 1..=n {
            for j in 1..=n {
                // reduce i*j mod 2(n+1) so the argument stays in [0, 2π)
                let m = (i * j) % (2 * (n + 1));
                sine.push(norm * (pi * T::from_usize_lossy(m) * h).sin());
            }
        }
        let two_over_h2 = T::lit(2.0) / (h * h);
        let eig1d = (1..=n)
            .map(|k| two_over_h2 * (T::one() - (pi * T::from_usize_lossy(k) * h).cos()))
            .collect();
        Ok(Grid { dim, n, h, sine, eig1d })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> T {
        self.h
    }

    /// Number of interior nodes, `n^dim`.
    pub fn node_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Number of gradient cells, `(n+1)^dim`.
    pub fn cell_count(&self) -> usize {
        (self.n + 1).pow(self.dim as u32)
    }

    /// Quadrature weight `h^dim`.
    pub fn cell_volume(&self) -> T {
        self.h.powi(self.dim as i32)
    }

    pub fn zeros(&self) -> Field<T> {
        Field::zeros(self.node_count())
    }

    pub fn check(&self, u: &Field<T>) -> Result<()> {
        if u.len() != self.node_count() {
            return Err(Error::Shape { expected: self.node_count(), found: u.len() });
        }
        Ok(())
    }

    /// Multi-index of a linear node index (axis 0 fastest).
    pub fn node_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for slot in out.iter_mut().take(self.dim) {
            *slot = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// Coordinates of a node.
    pub fn node_coords(&self, idx: usize) -> [T; MAX_DIM] {
        let multi = self.node_index(idx);
        let mut x = [T::zero(); MAX_DIM];
        for a in 0..self.dim {
            x[a] = T::from_usize_lossy(multi[a] + 1) * self.h;
        }
        x
    }

    /// Samples `g` at the interior nodes.
    pub fn sample<F>(&self, g: F) -> Field<T>
    where
        F: Fn(&[T]) -> T,
    {
        let values = (0..self.node_count())
            .map(|i| {
                let x = self.node_coords(i);
                g(&x[..self.dim])
            })
            .collect();
        Field::from_vec(values)
    }

    /// Node index of the mirror image `x ↦ 1 - x` on every axis.
    pub fn reflected_index(&self, idx: usize) -> usize {
        let m = self.node_index(idx);
        let mut out = 0;
        for a in (0..self.dim).rev() {
            out = out * self.n + (self.n - 1 - m[a]);
        }
        out
    }

    /// Discrete `L²` inner product `h^dim Σ u_i v_i`.
    pub fn inner(&self, u: &Field<T>, v: &Field<T>) -> T {
        u.dot(v) * self.cell_volume()
    }

    /// `(Σ |u_i|^p h^dim)^{1/p}`.
    pub fn lp_norm(&self, u: &Field<T>, p: T) -> Result<T> {
        self.check(u)?;
        if !(p >= T::one()) {
            return Err(Error::Domain(format!("L^p norm needs p >= 1, got {p}")));
        }
        let s: T = u.values().iter().map(|&v| crate::scalar::abs_pow(v, p)).sum();
        Ok((s * self.cell_volume()).powf(T::one() / p))
    }

    /// `Σ |u_i|^p h^dim`, the `p`-th power of [`Grid::lp_norm`].
    pub fn lp_norm_pow(&self, u: &Field<T>, p: T) -> T {
        let s: T = u.values().iter().map(|&v| crate::scalar::abs_pow(v, p)).sum();
        s * self.cell_volume()
    }

    fn extended(&self, u: &[T], e: &[usize; MAX_DIM]) -> T {
        let mut idx = 0;
        for a in (0..self.dim).rev() {
            if e[a] == 0 || e[a] == self.n + 1 {
                return T::zero();
            }
            idx = idx * self.n + (e[a] - 1);
        }
        u[idx]
    }

    fn cell_index(&self, mut c: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for slot in out.iter_mut().take(self.dim) {
            *slot = c % (self.n + 1);
            c /= self.n + 1;
        }
        out
    }

    /// Forward-difference gradient on every cell.
    pub fn gradient(&self, u: &Field<T>) -> Vec<CellVector<T>> {
        let inv_h = T::one() / self.h;
        let vals = u.values();
        (0..self.cell_count())
            .map(|c| {
                let k = self.cell_index(c);
                let base = self.extended(vals, &k);
                let mut g = [T::zero(); MAX_DIM];
                for a in 0..self.dim {
                    let mut kp = k;
                    kp[a] += 1;
                    g[a] = (self.extended(vals, &kp) - base) * inv_h;
                }
                g
            })
            .collect()
    }

    /// Adjoint of [`Grid::gradient`]: returns `v` with
    /// `v·w = Σ_c flux_c · (∇w)_c` for every nodal field `w`.
    pub fn gradient_adjoint(&self, flux: &[CellVector<T>]) -> Field<T> {
        let inv_h = T::one() / self.h;
        let mut out = vec![T::zero(); self.node_count()];
        let n = self.n;
        let interior = |e: &[usize; MAX_DIM]| -> Option<usize> {
            let mut idx = 0;
            for a in (0..self.dim).rev() {
                if e[a] == 0 || e[a] == n + 1 {
                    return None;
                }
                idx = idx * n + (e[a] - 1);
            }
            Some(idx)
        };
        for (c, fc) in flux.iter().enumerate() {
            let k = self.cell_index(c);
            for a in 0..self.dim {
                let q = fc[a] * inv_h;
                if q == T::zero() {
                    continue;
                }
                if let Some(i) = interior(&k) {
                    out[i] = out[i] - q;
                }
                let mut kp = k;
                kp[a] += 1;
                if let Some(i) = interior(&kp) {
                    out[i] = out[i] + q;
                }
            }
        }
        Field::from_vec(out)
    }

    /// `Σ_cells [(|∇u|² + eps²)^{p/2} - eps^p] h^dim`.
    ///
    /// The `eps^p` shift keeps the energy of the zero field at zero; for
    /// `eps = 0` this is the plain `∫|∇u|^p`.
    pub fn dirichlet_energy_p(&self, u: &Field<T>, p: T, eps: T) -> Result<T> {
        self.check(u)?;
        if !(p > T::one()) || !(eps >= T::zero()) {
            return Err(Error::Domain(format!("p-energy needs p > 1 and eps >= 0, got p={p}, eps={eps}")));
        }
        let g = self.gradient(u);
        Ok(self.energy_from_gradient(&g, p, eps))
    }

    pub(crate) fn energy_from_gradient(&self, g: &[CellVector<T>], p: T, eps: T) -> T {
        let eps2 = eps * eps;
        let shift = if eps == T::zero() { T::zero() } else { eps.powf(p) };
        let half_p = p / T::lit(2.0);
        let s: T = g
            .iter()
            .map(|gc| {
                let s2 = norm_sq(gc);
                if s2 + eps2 == T::zero() {
                    T::zero()
                } else {
                    (s2 + eps2).powf(half_p) - shift
                }
            })
            .sum();
        s * self.cell_volume()
    }

    /// Nodal gradient of [`Grid::dirichlet_energy_p`] with respect to `u`.
    pub fn dirichlet_energy_p_grad(&self, u: &Field<T>, p: T, eps: T) -> Result<Field<T>> {
        self.check(u)?;
        let g = self.gradient(u);
        let flux = self.p_flux(&g, p, eps);
        let mut out = self.gradient_adjoint(&flux);
        out.scale_mut(self.cell_volume());
        Ok(out)
    }

    /// Cell flux `p (|g|²+eps²)^{p/2-1} g`.
    pub(crate) fn p_flux(&self, g: &[CellVector<T>], p: T, eps: T) -> Vec<CellVector<T>> {
        let eps2 = eps * eps;
        let e = p / T::lit(2.0) - T::one();
        g.iter()
            .map(|gc| {
                let s2 = norm_sq(gc) + eps2;
                let w = if s2 == T::zero() { T::zero() } else { p * s2.powf(e) };
                let mut out = [T::zero(); MAX_DIM];
                for a in 0..self.dim {
                    out[a] = w * gc[a];
                }
                out
            })
            .collect()
    }

    /// Applies the negative discrete Laplacian `L` (no `h^dim` factor).
    pub fn apply_laplacian(&self, u: &Field<T>) -> Field<T> {
        let g = self.gradient(u);
        // u·Lu = Σ_c |g_c|², so L = ∇ᵀ∇ with unit cell weight
        self.gradient_adjoint(&g)
    }

    /// Solves `L v = b` through the separable sine transform.
    pub fn solve_laplacian(&self, b: &Field<T>) -> Field<T> {
        let mut work = b.values().to_vec();
        self.sine_transform(&mut work);
        for (idx, w) in work.iter_mut().enumerate() {
            let m = self.node_index(idx);
            let lam: T = (0..self.dim).map(|a| self.eig1d[m[a]]).sum();
            *w = *w / lam;
        }
        self.sine_transform(&mut work);
        Field::from_vec(work)
    }

    /// Applies the orthonormal sine transform along every axis (an involution).
    fn sine_transform(&self, data: &mut [T]) {
        let n = self.n;
        let mut line = vec![T::zero(); n];
        let mut out = vec![T::zero(); n];
        let total = self.node_count();
        for axis in 0..self.dim {
            let stride = n.pow(axis as u32);
            for start in 0..total {
                // visit each line once, from the node whose coordinate on `axis` is 0
                if !(start / stride).is_multiple_of(n) {
                    continue;
                }
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[start + j * stride];
                }
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &self.sine[i * n..(i + 1) * n];
                    *o = row.iter().zip(&line).map(|(&s, &x)| s * x).sum();
                }
                for (j, o) in out.iter().enumerate() {
                    data[start + j * stride] = *o;
                }
            }
        }
    }

    /// Eigenvalue of the discrete Dirichlet Laplacian for mode multi-index
    /// `k` (1-based on each axis).
    pub fn mode_eigenvalue(&self, k: &[usize]) -> T {
        k.iter().map(|&ka| self.eig1d[ka - 1]).sum()
    }

    /// `L²`-normalized tensor-product sine mode.
    pub fn mode_field(&self, k: &[usize]) -> Field<T> {
        let pi = T::PI();
        let root2 = T::lit(2.0).sqrt();
        let values = (0..self.node_count())
            .map(|idx| {
                let m = self.node_index(idx);
                (0..self.dim).fold(T::one(), |acc, a| {
                    let arg = (k[a] * (m[a] + 1)) % (2 * (self.n + 1));
                    acc * root2 * (pi * T::from_usize_lossy(arg) * self.h).sin()
                })
            })
            .collect();
        Field::from_vec(values)
    }

    /// First `k` eigenpairs of the discrete Dirichlet Laplacian in ascending
    /// order. Degenerate eigenvalues are ordered lexicographically by mode
    /// index, last axis most significant.
    pub fn laplacian_eigenbasis(&self, k: usize) -> Result<Vec<(T, Field<T>)>> {
        let total = self.node_count();
        if k == 0 || k > total {
            return Err(Error::Config(format!("eigenbasis size must be in 1..={total}, got {k}")));
        }
        let mut modes: Vec<([usize; MAX_DIM], T)> = (0..total)
            .map(|idx| {
                let m = self.node_index(idx);
                let mut km = [0; MAX_DIM];
                for a in 0..self.dim {
                    km[a] = m[a] + 1;
                }
                (km, self.mode_eigenvalue(&km[..self.dim]))
            })
            .collect();
        // exact ties in floating point are rare; compare with a relative slack
        modes.sort_by(|a, b| {
            let scale = a.1.abs().max(b.1.abs());
            if (a.1 - b.1).abs() <= scale * T::lit(1e-12) {
                let ka: Vec<usize> = a.0[..self.dim].iter().rev().copied().collect();
                let kb: Vec<usize> = b.0[..self.dim].iter().rev().copied().collect();
                ka.cmp(&kb)
            } else {
                a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal)
            }
        });
        Ok(modes
            .into_iter()
            .take(k)
            .map(|(km, lam)| (lam, self.mode_field(&km[..self.dim])))
            .collect())
    }
}

#[inline]
pub(crate) fn norm_sq<T: Scalar>(g: &CellVector<T>) -> T {
    g[0] * g[0] + g[1] * g[1] + g[2] * g[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &Grid<f64>, seed: u64) -> Field<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_vec((0..grid.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn build_grid_examples() {
        let g = Grid::<f64>::new(1, 3).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(Grid::<f64>::new(2, 15).unwrap().node_count(), 225);
        let g3 = Grid::<f64>::new(3, 9).unwrap();
        assert_eq!(g3.node_count(), 729);
        assert_relative_eq!(g3.h(), 0.1, max_relative = 1e-15);
        for n in [3, 7, 15, 31, 63, 255] {
            let g = Grid::<f64>::new(1, n).unwrap();
            assert_eq!(g.h() * (n as f64 + 1.0), 1.0);
        }
    }

    #[test]
    fn build_grid_rejects_bad_configuration() {
        assert!(matches!(Grid::<f64>::new(0, 8), Err(Error::Config(_))));
        assert!(matches!(Grid::<f64>::new(4, 8), Err(Error::Config(_))));
        assert!(matches!(Grid::<f64>::new(1, 2), Err(Error::Config(_))));
    }

    #[test]
    fn lp_norm_examples() {
        let g = Grid::<f64>::new(1, 3).unwrap();
        let one = Field::from_vec(vec![1.0; 3]);
        assert_relative_eq!(g.lp_norm(&one, 2.0).unwrap(), 0.75f64.sqrt(), max_relative = 1e-15);
        assert_eq!(g.lp_norm(&g.zeros(), 2.0).unwrap(), 0.0);
        assert!(matches!(g.lp_norm(&one, 0.5), Err(Error::Domain(_))));

        let g = Grid::<f64>::new(1, 255).unwrap();
        let s = g.sample(|x| (std::f64::consts::PI * x[0]).sin());
        assert!((g.lp_norm(&s, 2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn sine_energy_approximates_pi_squared_over_two() {
        let g = Grid::<f64>::new(1, 255).unwrap();
        let s = g.sample(|x| (std::f64::consts::PI * x[0]).sin());
        let e = g.dirichlet_energy_p(&s, 2.0, 0.0).unwrap();
        let exact = std::f64::consts::PI.powi(2) / 2.0;
        assert!((e - exact).abs() / exact < 1e-2);
        assert_eq!(g.dirichlet_energy_p(&g.zeros(), 3.0, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn energy_equals_assembled_quadratic_form() {
        for (dim, n) in [(1, 9), (2, 6), (3, 4)] {
            let g = Grid::<f64>::new(dim, n).unwrap();
            let u = random_field(&g, 7 + dim as u64);
            // assemble L column by column from the stencil definition
            let nn = g.node_count();
            let mut form = 0.0;
            for i in 0..nn {
                let mi = g.node_index(i);
                let mut lu = 2.0 * dim as f64 * u.values()[i];
                for j in 0..nn {
                    let mj = g.node_index(j);
                    let dist: usize = (0..dim).map(|a| mi[a].abs_diff(mj[a])).sum();
                    if dist == 1 {
                        lu -= u.values()[j];
                    }
                }
                form += u.values()[i] * lu / (g.h() * g.h());
            }
            form *= g.cell_volume();
            let e = g.dirichlet_energy_p(&u, 2.0, 0.0).unwrap();
            assert_relative_eq!(e, form, max_relative = 1e-12);
        }
    }

    #[test]
    fn energy_gradient_matches_finite_differences() {
        for (dim, n, p, eps) in [(1, 12, 2.0, 0.0), (2, 5, 3.0, 0.0), (2, 5, 1.5, 1e-3), (3, 3, 2.5, 0.0)] {
            let g = Grid::<f64>::new(dim, n).unwrap();
            for seed in 0..4 {
                let u = random_field(&g, seed);
                let grad = g.dirichlet_energy_p_grad(&u, p, eps).unwrap();
                let v = random_field(&g, 100 + seed);
                let step = 1e-6;
                let up = {
                    let mut w = u.clone();
                    w.axpy(step, &v);
                    g.dirichlet_energy_p(&w, p, eps).unwrap()
                };
                let um = {
                    let mut w = u.clone();
                    w.axpy(-step, &v);
                    g.dirichlet_energy_p(&w, p, eps).unwrap()
                };
                let fd = (up - um) / (2.0 * step);
                let an = grad.dot(&v);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "dim={dim} p={p}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn gradient_adjoint_is_transpose() {
        let g = Grid::<f64>::new(2, 5).unwrap();
        let u = random_field(&g, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let flux: Vec<CellVector<f64>> = (0..g.cell_count())
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0])
            .collect();
        let lhs = g.gradient_adjoint(&flux).dot(&u);
        let rhs: f64 = g
            .gradient(&u)
            .iter()
            .zip(&flux)
            .map(|(a, b)| a[0] * b[0] + a[1] * b[1])
            .sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn first_eigenvalue_matches_classical_formula_and_dense_solver() {
        let g = Grid::<f64>::new(1, 15).unwrap();
        let basis = g.laplacian_eigenbasis(1).unwrap();
        let h = g.h();
        let expected = 2.0 / (h * h) * (1.0 - (std::f64::consts::PI * h).cos());
        assert_relative_eq!(basis[0].0, expected, max_relative = 1e-13);

        let n = 15;
        let m = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| {
            if i == j {
                2.0 / (h * h)
            } else if i.abs_diff(j) == 1 {
                -1.0 / (h * h)
            } else {
                0.0
            }
        });
        let eig = nalgebra::SymmetricEigen::new(m);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(basis[0].0, min, max_relative = 1e-12);
    }

    #[test]
    fn two_dimensional_second_eigenvalue_is_degenerate_pair() {
        let g = Grid::<f64>::new(2, 15).unwrap();
        let basis = g.laplacian_eigenbasis(3).unwrap();
        let h = g.h();
        let pi = std::f64::consts::PI;
        let expected = 2.0 / (h * h) * (2.0 - (pi * h).cos() - (2.0 * pi * h).cos());
        assert_relative_eq!(basis[1].0, expected, max_relative = 1e-12);
        assert_relative_eq!(basis[2].0, expected, max_relative = 1e-12);

        // dense check of the spectrum bottom
        let nn = g.node_count();
        let m = nalgebra::DMatrix::<f64>::from_fn(nn, nn, |i, j| {
            let (mi, mj) = (g.node_index(i), g.node_index(j));
            let dist: usize = (0..2).map(|a| mi[a].abs_diff(mj[a])).sum();
            match dist {
                0 => 4.0 / (h * h),
                1 => -1.0 / (h * h),
                _ => 0.0,
            }
        });
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(m).eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, (lam, _)) in basis.iter().enumerate() {
            assert_relative_eq!(*lam, ev[k], max_relative = 1e-10);
        }
    }

    #[test]
    fn eigenfields_are_orthonormal_eigenvectors() {
        for (dim, n, k) in [(1, 16, 6), (2, 7, 10), (3, 4, 8)] {
            let g = Grid::<f64>::new(dim, n).unwrap();
            let basis = g.laplacian_eigenbasis(k).unwrap();
            for (i, (lam, ei)) in basis.iter().enumerate() {
                for (j, (_, ej)) in basis.iter().enumerate() {
                    let ip = g.inner(ei, ej);
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - target).abs() < 1e-12, "<e{i}, e{j}> = {ip}");
                }
                let le = g.apply_laplacian(ei);
                let resid = le.sub(&ei.scaled(*lam)).norm_inf();
                assert!(resid < 1e-9 * lam, "residual {resid}");
            }
            for w in basis.windows(2) {
                assert!(w[0].0 <= w[1].0 * (1.0 + 1e-12));
            }
        }
        let g = Grid::<f64>::new(1, 5).unwrap();
        assert!(g.laplacian_eigenbasis(0).is_err());
        assert!(g.laplacian_eigenbasis(6).is_err());
    }

    #[test]
    fn laplacian_solve_inverts_apply() {
        for (dim, n) in [(1, 20), (2, 9), (3, 5)] {
            let g = Grid::<f64>::new(dim, n).unwrap();
            let b = random_field(&g, 3);
            let v = g.solve_laplacian(&b);
            let back = g.apply_laplacian(&v);
            assert!(back.sub(&b).norm_inf() < 1e-9 * b.norm_inf());
        }
    }

    #[test]
    fn refinement_changes_sine_norm_by_order_h_squared() {
        let pi = std::f64::consts::PI;
        for n in [15usize, 31, 63] {
            let coarse = Grid::<f64>::new(1, n).unwrap();
            let fine = Grid::<f64>::new(1, 2 * n + 1).unwrap();
            let f = |x: &[f64]| (pi * x[0]).sin();
            let a = coarse.lp_norm(&coarse.sample(f), 3.0).unwrap();
            let b = fine.lp_norm(&fine.sample(f), 3.0).unwrap();
            assert!((a - b).abs() <= coarse.h() * coarse.h(), "n={n}: {}", (a - b).abs());
        }
    }

    #[test]
    fn reflection_is_an_involution() {
        let g = Grid::<f64>::new(2, 5).unwrap();
        for i in 0..g.node_count() {
            assert_eq!(g.reflected_index(g.reflected_index(i)), i);
        }
        assert_eq!(g.reflected_index(0), g.node_count() - 1);
    }

    #[test]
    fn single_precision_grid_works() {
        let g = Grid::<f32>::new(1, 31).unwrap();
        let s = g.sample(|x| (std::f32::consts::PI * x[0]).sin());
        let e = g.dirichlet_energy_p(&s, 2.0, 0.0).unwrap();
        assert!((e - 4.9348).abs() < 0.05);
    }

    proptest::proptest! {
        #[test]
        fn lp_norm_is_absolutely_homogeneous(t in -50.0f64..50.0, seed in 0u64..1000, p in 1.0f64..6.0) {
            let g = Grid::<f64>::new(2, 5).unwrap();
            let u = random_field(&g, seed);
            let a = g.lp_norm(&u.scaled(t), p).unwrap();
            let b = t.abs() * g.lp_norm(&u, p).unwrap();
            proptest::prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }

        #[test]
        fn p_energy_is_p_homogeneous(t in -20.0f64..20.0, seed in 0u64..1000, p in 1.2f64..5.0) {
            let g = Grid::<f64>::new(1, 16).unwrap();
            let u = random_field(&g, seed);
            let a = g.dirichlet_energy_p(&u.scaled(t), p, 0.0).unwrap();
            let b = t.abs().powf(p) * g.dirichlet_energy_p(&u, p, 0.0).unwrap();
            proptest::prop_assert!((a - b).abs() <= 1e-11 * b.max(1e-300));
        }
    }
}

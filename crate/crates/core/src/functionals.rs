//! Energy functionals `Φ_λ = I₁ − λ I₂` for the grid-based models, the
//! prescribed-energy quotient `λ_c(u) = (I₁(u) − c)/I₂(u)`, the Nehari
//! function `H(u) = I₁'(u)u − α I₁(u)`, and their analytic gradients.
//!
//! Gradients are taken with respect to the nodal values, so they carry the
//! quadrature weight `h^dim`: `Φ(u + εv) = Φ(u) + ε ∇Φ(u)·v + O(ε²)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{norm_sq, Field, Grid};
use crate::nonlinearity::Nonlinearity;
use crate::scalar::{signed_pow, Scalar};

/// Default regularization of `|∇u|^{p-2}` for `p ≠ 2`.
pub const DEFAULT_EPS: f64 = 1e-8;

/// Model selection with its scalar parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelKind<T> {
    /// `½∫|∇u|² − ∫F(u) − (λ/2)∫u²`
    Semilinear { nonlinearity: Nonlinearity<T> },
    /// `½∫|∇u|² − ∫F(u) − (λ/q)∫|u|^q`, `1 < q < 2`
    ConcaveConvex { nonlinearity: Nonlinearity<T>, q: T },
    /// Critical growth `f(s) = |s|^{2*−2}s` in dimension `n_dim`.
    BrezisNirenberg { n_dim: usize, two_star: T },
    /// `(1/p)∫A(|∇u|^p) − (λ/r)∫|u|^r` with `a(t) = 1 + t^{(q−p)/p}`.
    /// `k0`, `k1` are the declared bracketing constants of `a`.
    PqGeneral { p: T, q: T, r: T, k0: T, k1: T },
    /// `(1/θ)‖u‖^θ − ∫F(u)` with `‖u‖ = (∫|∇u|^p)^{1/p}`.
    Kirchhoff { p: T, theta: T, nonlinearity: Nonlinearity<T> },
}

impl<T: Scalar> ModelKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Semilinear { .. } => "semilinear",
            ModelKind::ConcaveConvex { .. } => "concave_convex",
            ModelKind::BrezisNirenberg { .. } => "brezis_nirenberg",
            ModelKind::PqGeneral { .. } => "pq_general",
            ModelKind::Kirchhoff { .. } => "kirchhoff",
        }
    }

    /// Nonlinearity entering `K(u) = ∫F(u)`, if any.
    pub fn nonlinearity(&self) -> Option<Nonlinearity<T>> {
        match *self {
            ModelKind::Semilinear { nonlinearity }
            | ModelKind::ConcaveConvex { nonlinearity, .. }
            | ModelKind::Kirchhoff { nonlinearity, .. } => Some(nonlinearity),
            ModelKind::BrezisNirenberg { two_star, .. } => Some(Nonlinearity::PurePower { r: two_star }),
            ModelKind::PqGeneral { .. } => None,
        }
    }
}

/// Values of the constituent functionals at one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown<T> {
    pub i1: T,
    pub i2: T,
    pub j: T,
    pub k: T,
    /// `None` for Kirchhoff, which has no prescribed-energy formulation.
    pub h: Option<T>,
}

/// A model bound to a grid.
#[derive(Debug, Clone)]
pub struct ModelSpec<'g, T> {
    grid: &'g Grid<T>,
    kind: ModelKind<T>,
    eps: T,
}

impl<'g, T: Scalar> ModelSpec<'g, T> {
    pub fn new(grid: &'g Grid<T>, kind: ModelKind<T>, eps: T) -> Result<Self> {
        let one = T::one();
        let two = T::lit(2.0);
        if !(eps >= T::zero()) {
            return Err(Error::Config(format!("regularization must be nonnegative, got {eps}")));
        }
        if let Some(nl) = kind.nonlinearity() {
            nl.validate()?;
        }
        match kind {
            ModelKind::Semilinear { .. } => {}
            ModelKind::ConcaveConvex { q, .. } => {
                if !(q > one && q < two) {
                    return Err(Error::Config(format!("concave-convex model needs 1 < q < 2, got {q}")));
                }
            }
            ModelKind::BrezisNirenberg { n_dim, two_star } => {
                if n_dim == 0 || !(two_star > two) {
                    return Err(Error::Config(format!("Brezis-Nirenberg model needs N >= 1 and 2* > 2, got N={n_dim}, 2*={two_star}")));
                }
            }
            ModelKind::PqGeneral { p, q, r, k0, k1 } => {
                if !(q > one && q <= p && r > one && k0 > T::zero() && k1 >= k0) {
                    return Err(Error::Config(format!("(p,q) model needs 1 < q <= p, r > 1, 0 < k0 <= k1; got p={p}, q={q}, r={r}")));
                }
                if !(k1 < r / p * k0) {
                    return Err(Error::Config(format!("(p,q) model needs k1 < (r/p) k0, got k1={k1}, (r/p)k0={}", r / p * k0)));
                }
            }
            ModelKind::Kirchhoff { p, theta, .. } => {
                if !(p > one && theta <= one && theta != T::zero()) {
                    return Err(Error::Config(format!("Kirchhoff model needs p > 1 and theta <= 1, theta != 0; got p={p}, theta={theta}")));
                }
            }
        }
        Ok(ModelSpec { grid, kind, eps })
    }

    pub fn grid(&self) -> &'g Grid<T> {
        self.grid
    }

    pub fn kind(&self) -> &ModelKind<T> {
        &self.kind
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    /// Homogeneity degree of `I₂`.
    pub fn alpha(&self) -> T {
        match self.kind {
            ModelKind::ConcaveConvex { q, .. } => q,
            ModelKind::PqGeneral { r, .. } => r,
            _ => T::lit(2.0),
        }
    }

    /// Whether the model has a prescribed-energy (`λ_c`) formulation.
    pub fn supports_prescribed_energy(&self) -> bool {
        !matches!(self.kind, ModelKind::Kirchhoff { .. })
    }

    /// Diagnostic flags attached to the configuration.
    pub fn flags(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let ModelKind::BrezisNirenberg { n_dim, two_star } = self.kind {
            let exact = n_dim > 2 && {
                let nd = T::from_usize_lossy(n_dim);
                (two_star - T::lit(2.0) * nd / (nd - T::lit(2.0))).abs() <= T::lit(1e-12) * two_star
            };
            if self.grid.dim() != n_dim || n_dim < 3 || !exact {
                out.push("supercritical-formalism".to_string());
            }
        }
        if let Some(nl) = self.kind.nonlinearity() {
            if nl.primitive_uses_quadrature() {
                out.push("primitive-by-quadrature".to_string());
            }
        }
        out
    }

    fn gradient_exponent(&self) -> T {
        match self.kind {
            ModelKind::PqGeneral { p, .. } | ModelKind::Kirchhoff { p, .. } => p,
            _ => T::lit(2.0),
        }
    }

    fn reg(&self, p: T) -> T {
        if p == T::lit(2.0) {
            T::zero()
        } else {
            self.eps
        }
    }

    /// Norm defining the unit sphere: the `W^{1,p}_0` seminorm with the
    /// model's gradient exponent.
    pub fn norm(&self, u: &Field<T>) -> Result<T> {
        let p = self.gradient_exponent();
        Ok(self.grid.dirichlet_energy_p(u, p, self.reg(p))?.powf(T::one() / p))
    }

    fn ensure_nonzero(&self, u: &Field<T>, what: &str) -> Result<()> {
        if u.is_zero() {
            return Err(Error::Degenerate(format!("{what} is undefined at u = 0")));
        }
        Ok(())
    }

    fn not_applicable(&self, what: &str) -> Error {
        Error::NotApplicable(format!("{what} is not defined for the {} model", self.kind.name()))
    }

    /// Profile of every functional along the ray `t ↦ t u`.
    pub fn ray(&self, u: &Field<T>) -> Result<ModelRay<T>> {
        self.grid.check(u)?;
        let g = self.grid.gradient(u);
        Ok(ModelRay {
            kind: self.kind,
            eps: self.eps,
            weight: self.grid.cell_volume(),
            cells: g.iter().map(norm_sq).collect(),
            values: u.values().to_vec(),
            i2: self.i2(u)?,
        })
    }

    /// `I₂(u)`.
    pub fn i2(&self, u: &Field<T>) -> Result<T> {
        self.grid.check(u)?;
        let half = T::lit(0.5);
        Ok(match self.kind {
            ModelKind::ConcaveConvex { q, .. } => self.grid.lp_norm_pow(u, q) / q,
            ModelKind::PqGeneral { r, .. } => self.grid.lp_norm_pow(u, r) / r,
            _ => half * self.grid.lp_norm_pow(u, T::lit(2.0)),
        })
    }

    fn i2_grad(&self, u: &Field<T>) -> Field<T> {
        let w = self.grid.cell_volume();
        let exponent = self.alpha();
        Field::from_vec(u.values().iter().map(|&v| signed_pow(v, exponent) * w).collect())
    }

    /// `J(u)`, the gradient part of `I₁`.
    pub fn j(&self, u: &Field<T>) -> Result<T> {
        let ray = self.ray(u)?;
        ray.j(T::one())
    }

    /// `K(u) = ∫F(u)`.
    pub fn k(&self, u: &Field<T>) -> Result<T> {
        self.grid.check(u)?;
        Ok(match self.kind.nonlinearity() {
            Some(nl) => nl.integral_primitive(u.values(), self.grid.cell_volume()),
            None => T::zero(),
        })
    }

    pub fn i1(&self, u: &Field<T>) -> Result<T> {
        Ok(self.j(u)? - self.k(u)?)
    }

    pub(crate) fn j_grad(&self, u: &Field<T>) -> Result<Field<T>> {
        let grid = self.grid;
        match self.kind {
            ModelKind::Semilinear { .. } | ModelKind::ConcaveConvex { .. } | ModelKind::BrezisNirenberg { .. } => {
                let mut g = grid.dirichlet_energy_p_grad(u, T::lit(2.0), T::zero())?;
                g.scale_mut(T::lit(0.5));
                Ok(g)
            }
            ModelKind::PqGeneral { p, q, .. } => {
                let mut g = grid.dirichlet_energy_p_grad(u, p, self.reg(p))?;
                g.scale_mut(T::one() / p);
                let gq = grid.dirichlet_energy_p_grad(u, q, self.reg(q))?;
                g.axpy(T::one() / q, &gq);
                Ok(g)
            }
            ModelKind::Kirchhoff { p, theta, .. } => {
                let e = grid.dirichlet_energy_p(u, p, self.reg(p))?;
                if e == T::zero() {
                    return Err(Error::Degenerate("Kirchhoff gradient is undefined at u = 0".into()));
                }
                let mut g = grid.dirichlet_energy_p_grad(u, p, self.reg(p))?;
                g.scale_mut(e.powf(theta / p - T::one()) / p);
                Ok(g)
            }
        }
    }

    fn k_grad(&self, u: &Field<T>) -> Field<T> {
        let w = self.grid.cell_volume();
        match self.kind.nonlinearity() {
            Some(nl) => Field::from_vec(u.values().iter().map(|&v| nl.f(v) * w).collect()),
            None => Field::zeros(u.len()),
        }
    }

    /// `Φ_λ(u) = I₁(u) − λ I₂(u)`.
    pub fn eval_phi_lambda(&self, u: &Field<T>, lambda: T) -> Result<T> {
        self.grid.check(u)?;
        if let ModelKind::Kirchhoff { theta, .. } = self.kind {
            if theta < T::zero() {
                self.ensure_nonzero(u, "Kirchhoff energy with theta < 0")?;
            }
        }
        Ok(self.i1(u)? - lambda * self.i2(u)?)
    }

    /// Nodal gradient of `Φ_λ`.
    pub fn grad_phi_lambda(&self, u: &Field<T>, lambda: T) -> Result<Field<T>> {
        self.grid.check(u)?;
        if matches!(self.kind, ModelKind::Kirchhoff { .. }) {
            self.ensure_nonzero(u, "Kirchhoff gradient")?;
        }
        let mut g = self.j_grad(u)?;
        g.axpy(-T::one(), &self.k_grad(u));
        if lambda != T::zero() {
            g.axpy(-lambda, &self.i2_grad(u));
        }
        Ok(g)
    }

    /// `λ_c(u) = (I₁(u) − c)/I₂(u)`, so that `Φ_{λ_c(u)}(u) = c`.
    pub fn eval_lambda_c(&self, u: &Field<T>, c: T) -> Result<T> {
        if !self.supports_prescribed_energy() {
            return Err(self.not_applicable("the prescribed-energy quotient"));
        }
        self.grid.check(u)?;
        self.ensure_nonzero(u, "the prescribed-energy quotient")?;
        Ok((self.i1(u)? - c) / self.i2(u)?)
    }

    /// `λ_c'(u) = Φ'_{λ_c(u)}(u) / I₂(u)`.
    pub fn grad_lambda_c(&self, u: &Field<T>, c: T) -> Result<Field<T>> {
        let lambda = self.eval_lambda_c(u, c)?;
        let mut g = self.grad_phi_lambda(u, lambda)?;
        g.scale_mut(T::one() / self.i2(u)?);
        Ok(g)
    }

    /// Closed-form `H(u) = I₁'(u)u − α I₁(u)`.
    pub fn eval_h(&self, u: &Field<T>) -> Result<T> {
        if !self.supports_prescribed_energy() {
            return Err(self.not_applicable("H"));
        }
        self.ray(u)?.h(T::one())
    }

    /// `H` assembled from the analytic gradient; used to cross-check the
    /// closed forms.
    pub fn h_from_gradient(&self, u: &Field<T>) -> Result<T> {
        if !self.supports_prescribed_energy() {
            return Err(self.not_applicable("H"));
        }
        let g = self.grad_phi_lambda(u, T::zero())?;
        Ok(g.dot(u) - self.alpha() * self.i1(u)?)
    }

    pub fn energy_breakdown(&self, u: &Field<T>) -> Result<EnergyBreakdown<T>> {
        self.grid.check(u)?;
        if let ModelKind::Kirchhoff { .. } = self.kind {
            self.ensure_nonzero(u, "Kirchhoff energy")?;
        }
        let ray = self.ray(u)?;
        let j = ray.j(T::one())?;
        let k = ray.k(T::one());
        let h = if self.supports_prescribed_energy() { Some(ray.h(T::one())?) } else { None };
        Ok(EnergyBreakdown { i1: j - k, i2: ray.i2, j, k, h })
    }

    /// `‖Φ'_λ(u)‖` as the discrete `L²` norm of the residual density
    /// `∇Φ_λ(u)/h^dim`.
    pub fn residual_norm(&self, u: &Field<T>, lambda: T) -> Result<T> {
        let g = self.grad_phi_lambda(u, lambda)?;
        Ok(g.euclidean_norm() / self.grid.cell_volume().sqrt())
    }
}

/// Precomputed data for evaluating a model along `t ↦ t u`.
#[derive(Debug, Clone)]
pub struct ModelRay<T> {
    kind: ModelKind<T>,
    eps: T,
    weight: T,
    /// `|∇u|²` on every cell.
    cells: Vec<T>,
    values: Vec<T>,
    /// `I₂(u)`.
    pub i2: T,
}

/// `N(t) = Σ [(t²s+ε²)^{p/2} − ε^p] h^d` and its first two derivatives.
fn gradient_power<T: Scalar>(cells: &[T], weight: T, p: T, eps: T, t: T) -> (T, T, T) {
    let two = T::lit(2.0);
    let e2 = eps * eps;
    let shift = if eps == T::zero() { T::zero() } else { eps.powf(p) };
    let hp = p / two;
    let (mut n0, mut n1, mut n2) = (T::zero(), T::zero(), T::zero());
    for &s in cells {
        let sig = t * t * s + e2;
        if sig == T::zero() {
            continue;
        }
        let d1 = hp * sig.powf(hp - T::one());
        let d2 = hp * (hp - T::one()) * sig.powf(hp - two);
        n0 = n0 + sig.powf(hp) - shift;
        n1 = n1 + d1 * two * t * s;
        n2 = n2 + d2 * T::lit(4.0) * t * t * s * s + d1 * two * s;
    }
    (n0 * weight, n1 * weight, n2 * weight)
}

impl<T: Scalar> ModelRay<T> {
    fn reg(&self, p: T) -> T {
        if p == T::lit(2.0) {
            T::zero()
        } else {
            self.eps
        }
    }

    fn alpha(&self) -> T {
        match self.kind {
            ModelKind::ConcaveConvex { q, .. } => q,
            ModelKind::PqGeneral { r, .. } => r,
            _ => T::lit(2.0),
        }
    }

    /// `J(tu)` with first and second `t`-derivatives.
    fn j_all(&self, t: T) -> Result<(T, T, T)> {
        let two = T::lit(2.0);
        let half = T::lit(0.5);
        Ok(match self.kind {
            ModelKind::Semilinear { .. } | ModelKind::ConcaveConvex { .. } | ModelKind::BrezisNirenberg { .. } => {
                let e2: T = self.cells.iter().copied().sum::<T>() * self.weight;
                (half * t * t * e2, t * e2, e2)
            }
            ModelKind::PqGeneral { p, q, .. } => {
                let (a0, a1, a2) = gradient_power(&self.cells, self.weight, p, self.reg(p), t);
                let (b0, b1, b2) = gradient_power(&self.cells, self.weight, q, self.reg(q), t);
                (a0 / p + b0 / q, a1 / p + b1 / q, a2 / p + b2 / q)
            }
            ModelKind::Kirchhoff { p, theta, .. } => {
                let (n0, n1, n2) = gradient_power(&self.cells, self.weight, p, self.reg(p), t);
                if n0 == T::zero() {
                    return Err(Error::Degenerate("Kirchhoff energy is undefined at u = 0".into()));
                }
                let e = theta / p;
                let v = n0.powf(e) / theta;
                let d1 = n0.powf(e - T::one()) * n1 / p;
                let d2 = ((e - T::one()) * n0.powf(e - two) * n1 * n1 + n0.powf(e - T::one()) * n2) / p;
                (v, d1, d2)
            }
        })
    }

    pub fn j(&self, t: T) -> Result<T> {
        Ok(self.j_all(t)?.0)
    }

    /// `K(tu)`.
    pub fn k(&self, t: T) -> T {
        match self.kind.nonlinearity() {
            Some(nl) => self.values.iter().map(|&v| nl.primitive(t * v)).sum::<T>() * self.weight,
            None => T::zero(),
        }
    }

    /// `d/dt K(tu) = Σ f(tu)u h^d`.
    fn k_prime(&self, t: T) -> T {
        match self.kind.nonlinearity() {
            Some(nl) => self.values.iter().map(|&v| nl.f(t * v) * v).sum::<T>() * self.weight,
            None => T::zero(),
        }
    }

    fn k_second(&self, t: T) -> Option<T> {
        match self.kind.nonlinearity() {
            Some(nl) => {
                let mut acc = T::zero();
                for &v in &self.values {
                    if v == T::zero() {
                        continue;
                    }
                    acc = acc + nl.fprime(t * v).ok()?.value * v * v;
                }
                Some(acc * self.weight)
            }
            None => Some(T::zero()),
        }
    }

    /// `I₁(tu)`.
    pub fn i1(&self, t: T) -> Result<T> {
        Ok(self.j(t)? - self.k(t))
    }

    /// `d/dt I₁(tu) = I₁'(tu)u`.
    pub fn i1_prime(&self, t: T) -> Result<T> {
        Ok(self.j_all(t)?.1 - self.k_prime(t))
    }

    /// `d²/dt² I₁(tu)`, when `f'` exists at every sample.
    pub fn i1_second(&self, t: T) -> Option<T> {
        let j2 = self.j_all(t).ok()?.2;
        Some(j2 - self.k_second(t)?)
    }

    /// `I₂(tu) = t^α I₂(u)`.
    pub fn i2_at(&self, t: T) -> T {
        t.powf(self.alpha()) * self.i2
    }

    /// Closed-form `H(tu)`.
    pub fn h(&self, t: T) -> Result<T> {
        let w = self.weight;
        let two = T::lit(2.0);
        match self.kind {
            ModelKind::Semilinear { .. } | ModelKind::BrezisNirenberg { .. } => {
                let nl = self.kind.nonlinearity().unwrap();
                Ok(self
                    .values
                    .iter()
                    .map(|&v| {
                        let s = t * v;
                        two * nl.primitive(s) - nl.f(s) * s
                    })
                    .sum::<T>()
                    * w)
            }
            ModelKind::ConcaveConvex { nonlinearity, q } => {
                let e2: T = self.cells.iter().copied().sum::<T>() * w;
                let nodal: T = self
                    .values
                    .iter()
                    .map(|&v| {
                        let s = t * v;
                        q * nonlinearity.primitive(s) - nonlinearity.f(s) * s
                    })
                    .sum::<T>()
                    * w;
                Ok((two - q) / two * t * t * e2 + nodal)
            }
            ModelKind::PqGeneral { p, q, r, .. } => {
                let (ep, eq) = (self.reg(p), self.reg(q));
                let term = |sig: T, e: T, pow: T| -> (T, T) {
                    // ((σ+ε²)^{pow/2−1} σ, (σ+ε²)^{pow/2} − ε^pow)
                    let base = sig + e * e;
                    if base == T::zero() {
                        return (T::zero(), T::zero());
                    }
                    let shift = if e == T::zero() { T::zero() } else { e.powf(pow) };
                    (base.powf(pow / two - T::one()) * sig, base.powf(pow / two) - shift)
                };
                let sum: T = self
                    .cells
                    .iter()
                    .map(|&s| {
                        let sig = t * t * s;
                        let (ap, psi_p) = term(sig, ep, p);
                        let (aq, psi_q) = term(sig, eq, q);
                        ap + aq - r / p * psi_p - r / q * psi_q
                    })
                    .sum();
                Ok(sum * w)
            }
            ModelKind::Kirchhoff { .. } => Err(Error::NotApplicable("H is not defined for the kirchhoff model".into())),
        }
    }

    /// `d/dt H(tu)`; `None` when `f'` is unavailable at some sample.
    pub fn h_prime(&self, t: T) -> Option<T> {
        let w = self.weight;
        let two = T::lit(2.0);
        match self.kind {
            ModelKind::Semilinear { .. } | ModelKind::BrezisNirenberg { .. } => {
                let nl = self.kind.nonlinearity().unwrap();
                let mut acc = T::zero();
                for &v in &self.values {
                    let s = t * v;
                    acc = acc + (nl.f(s) - nl.fprime(s).ok()?.value * s) * v;
                }
                Some(acc * w)
            }
            ModelKind::ConcaveConvex { nonlinearity, q } => {
                let e2: T = self.cells.iter().copied().sum::<T>() * w;
                let mut acc = T::zero();
                for &v in &self.values {
                    let s = t * v;
                    acc = acc + ((q - T::one()) * nonlinearity.f(s) - nonlinearity.fprime(s).ok()?.value * s) * v;
                }
                Some((two - q) * t * e2 + acc * w)
            }
            ModelKind::PqGeneral { .. } => {
                // H(tu) = t·I₁'(tu)u − r I₁(tu)  ⇒  H' = t·I₁'' + (1 − r) I₁'
                let (_, j1, j2) = self.j_all(t).ok()?;
                Some(t * j2 + (T::one() - self.alpha()) * j1)
            }
            ModelKind::Kirchhoff { .. } => None,
        }
    }
}

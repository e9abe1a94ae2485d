//! Minimization of the reduced functional `R(u) = Ψ(t(u)u)` over the unit
//! sphere of the model norm, subspace minimax estimates, parameter sweeps
//! and deflated searches.
//!
//! `R` is 0-homogeneous, so `∇R(u)·u = 0` and renormalization is a
//! first-order retraction. Descent directions are Sobolev gradients: the
//! nodal gradient is preconditioned by the discrete Dirichlet Laplacian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::AffineModel;
use crate::error::{Error, Result};
use crate::fibering::{solve_t_c, solve_t_nehari};
use crate::functionals::{ModelKind, ModelSpec};
use crate::mesh::{Field, Grid};
use crate::scalar::Scalar;

const ARMIJO_C1: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

/// Optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions<T> {
    pub residual_tol: T,
    pub energy_tol: T,
    pub max_iter: usize,
    /// Random starts per minimax level.
    pub multistart: usize,
    pub seed: u64,
    /// Tolerance handed to the fibering root solver.
    pub fiber_tol: T,
    /// Maximum ascent iterations per minimax start.
    pub ascent_iter: usize,
    /// Start field; the first Laplacian eigenfield when absent.
    #[serde(skip)]
    pub start: Option<Field<T>>,
    /// Keep iterates in one reflection-parity class.
    #[serde(skip)]
    pub symmetry: Option<Parity>,
}

impl<T: Scalar> Default for SolveOptions<T> {
    fn default() -> Self {
        SolveOptions {
            residual_tol: T::lit(1e-6),
            energy_tol: T::lit(1e-8),
            max_iter: 5000,
            multistart: 5,
            seed: 0,
            fiber_tol: T::lit(1e-12),
            ascent_iter: 500,
            start: None,
            symmetry: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry<T> {
    pub value: T,
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult<T> {
    /// The projected critical point `t(u*) u*`.
    pub u: Field<T>,
    /// Multiplier `λ`; absent on the direct path.
    pub lambda: Option<T>,
    /// `Φ_λ(u) − c`; absent on the direct path.
    pub energy_gap: Option<T>,
    /// Value of the reduced functional.
    pub level: T,
    /// Projection factor at the last iterate.
    pub t: T,
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry<T>>,
}

/// Projection of a unit-sphere point onto the Nehari-type set.
#[derive(Debug, Clone)]
pub struct Projected<T> {
    pub t: T,
    pub w: Field<T>,
    pub value: T,
    pub multiplier: Option<T>,
}

/// A 0-homogeneous functional `R(u) = Ψ(t(u)u)` together with the full
/// functional whose critical points it certifies.
pub trait ReducedProblem<T: Scalar>: Sync {
    fn grid(&self) -> &Grid<T>;
    fn sphere_norm(&self, u: &Field<T>) -> Result<T>;
    fn project(&self, u: &Field<T>) -> Result<Projected<T>>;
    /// `∇R(u)`, given the projection of `u`.
    fn reduced_gradient(&self, p: &Projected<T>) -> Result<Field<T>>;
    /// Residual of the full equation at `p.w`.
    fn residual(&self, p: &Projected<T>) -> Result<T>;
    fn energy_gap(&self, p: &Projected<T>) -> Result<Option<T>>;
    /// Hook to reject converged levels that contradict the model.
    fn check_level(&self, _level: T) -> Result<()> {
        Ok(())
    }
}

/// `R(u) = λ_c(t_c(u)u)`: critical points solve `Φ'_λ(u) = 0`, `Φ_λ(u) = c`.
pub struct PrescribedEnergyProblem<'a, 'g, T> {
    pub model: &'a ModelSpec<'g, T>,
    pub c: T,
    pub fiber_tol: T,
}

impl<'a, 'g, T: Scalar> PrescribedEnergyProblem<'a, 'g, T> {
    pub fn new(model: &'a ModelSpec<'g, T>, c: T) -> Result<Self> {
        if !model.supports_prescribed_energy() {
            return Err(Error::NotApplicable(format!("the {} model has no prescribed-energy formulation", model.kind().name())));
        }
        if c == T::zero() || !c.is_finite() {
            return Err(Error::Config(format!("prescribed energy must be nonzero and finite, got {c}")));
        }
        Ok(PrescribedEnergyProblem { model, c, fiber_tol: T::lit(1e-12) })
    }
}

impl<T: Scalar> ReducedProblem<T> for PrescribedEnergyProblem<'_, '_, T> {
    fn grid(&self) -> &Grid<T> {
        self.model.grid()
    }
    fn sphere_norm(&self, u: &Field<T>) -> Result<T> {
        self.model.norm(u)
    }
    fn project(&self, u: &Field<T>) -> Result<Projected<T>> {
        let t = solve_t_c(self.model, u, self.c, self.fiber_tol)?.t;
        let w = u.scaled(t);
        let lambda = self.model.eval_lambda_c(&w, self.c)?;
        Ok(Projected { t, w, value: lambda, multiplier: Some(lambda) })
    }
    fn reduced_gradient(&self, p: &Projected<T>) -> Result<Field<T>> {
        let mut g = self.model.grad_lambda_c(&p.w, self.c)?;
        g.scale_mut(p.t);
        Ok(g)
    }
    fn residual(&self, p: &Projected<T>) -> Result<T> {
        self.model.residual_norm(&p.w, p.value)
    }
    fn energy_gap(&self, p: &Projected<T>) -> Result<Option<T>> {
        Ok(Some(self.model.eval_phi_lambda(&p.w, p.value)? - self.c))
    }
}

/// `R(u) = I₁(t(u)u)` with `t(u)` the critical point of `t ↦ I₁(tu)`.
pub struct DirectProblem<'a, 'g, T> {
    pub model: &'a ModelSpec<'g, T>,
    pub fiber_tol: T,
}

impl<'a, 'g, T: Scalar> DirectProblem<'a, 'g, T> {
    pub fn new(model: &'a ModelSpec<'g, T>) -> Self {
        DirectProblem { model, fiber_tol: T::lit(1e-12) }
    }
}

impl<T: Scalar> ReducedProblem<T> for DirectProblem<'_, '_, T> {
    fn grid(&self) -> &Grid<T> {
        self.model.grid()
    }
    fn sphere_norm(&self, u: &Field<T>) -> Result<T> {
        self.model.norm(u)
    }
    fn project(&self, u: &Field<T>) -> Result<Projected<T>> {
        let t = solve_t_nehari(self.model, u, self.fiber_tol)?.t;
        let w = u.scaled(t);
        let value = self.model.eval_phi_lambda(&w, T::zero())?;
        Ok(Projected { t, w, value, multiplier: None })
    }
    fn reduced_gradient(&self, p: &Projected<T>) -> Result<Field<T>> {
        let mut g = self.model.grad_phi_lambda(&p.w, T::zero())?;
        g.scale_mut(p.t);
        Ok(g)
    }
    fn residual(&self, p: &Projected<T>) -> Result<T> {
        self.model.residual_norm(&p.w, T::zero())
    }
    fn energy_gap(&self, _p: &Projected<T>) -> Result<Option<T>> {
        Ok(None)
    }
    fn check_level(&self, level: T) -> Result<()> {
        if let ModelKind::Kirchhoff { theta, .. } = *self.model.kind() {
            if theta < T::zero() && !(level < T::zero()) {
                return Err(Error::Hypothesis(format!("Kirchhoff level with theta < 0 must be negative, got {level}")));
            }
        }
        Ok(())
    }
}

/// `R(u) = Φ_A(t(u)u)` on the sphere `E(u) = 1`.
pub struct AffineProblem<'a, 'g, T> {
    pub model: &'a AffineModel<'g, T>,
    pub fiber_tol: T,
}

impl<'a, 'g, T: Scalar> AffineProblem<'a, 'g, T> {
    pub fn new(model: &'a AffineModel<'g, T>) -> Self {
        AffineProblem { model, fiber_tol: T::lit(1e-12) }
    }
}

impl<T: Scalar> ReducedProblem<T> for AffineProblem<'_, '_, T> {
    fn grid(&self) -> &Grid<T> {
        self.model.grid()
    }
    fn sphere_norm(&self, u: &Field<T>) -> Result<T> {
        self.model.energy(u)
    }
    fn project(&self, u: &Field<T>) -> Result<Projected<T>> {
        let t = solve_t_nehari(self.model, u, self.fiber_tol)?.t;
        let w = u.scaled(t);
        let value = self.model.eval_phi(&w)?;
        Ok(Projected { t, w, value, multiplier: None })
    }
    fn reduced_gradient(&self, p: &Projected<T>) -> Result<Field<T>> {
        let mut g = self.model.grad_phi(&p.w)?;
        g.scale_mut(p.t);
        Ok(g)
    }
    fn residual(&self, p: &Projected<T>) -> Result<T> {
        let g = self.model.grad_phi(&p.w)?;
        Ok(g.euclidean_norm() / self.model.grid().cell_volume().sqrt())
    }
    fn energy_gap(&self, _p: &Projected<T>) -> Result<Option<T>> {
        Ok(None)
    }
}

/// `‖Φ'_λ(u)‖` as the `L²` norm of the discrete residual density.
pub fn residual_norm<T: Scalar>(model: &ModelSpec<'_, T>, u: &Field<T>, lambda: T) -> Result<T> {
    model.residual_norm(u, lambda)
}

fn normalize<T: Scalar, P: ReducedProblem<T> + ?Sized>(problem: &P, u: &Field<T>) -> Result<Field<T>> {
    let n = problem.sphere_norm(u)?;
    if !(n > T::zero()) || !n.is_finite() {
        return Err(Error::Degenerate("start field has zero norm".into()));
    }
    Ok(u.scaled(T::one() / n))
}

/// Sobolev gradient: solves `h^dim L d = g`.
fn precondition<T: Scalar>(grid: &Grid<T>, g: &Field<T>) -> Field<T> {
    let mut d = grid.solve_laplacian(g);
    d.scale_mut(T::one() / grid.cell_volume());
    d
}

/// Armijo test. The second flag reports whether the predicted decrease is
/// below what the values can resolve.
fn armijo<T: Scalar>(old: T, new: T, predicted: T) -> (bool, bool) {
    let noise = T::lit(16.0) * T::epsilon() * (T::one() + old.abs());
    (new <= old - T::lit(ARMIJO_C1) * predicted, predicted <= noise)
}

fn sufficient_decrease<T: Scalar>(old: T, new: T, predicted: T) -> bool {
    let (ok, unresolved) = armijo(old, new, predicted);
    ok || (unresolved && new <= old)
}

/// Parity under the point reflection `x ↦ 1 − x` of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

fn reflect<T: Scalar>(grid: &Grid<T>, u: &Field<T>) -> Field<T> {
    Field::from_vec((0..u.len()).map(|i| u.values()[grid.reflected_index(i)]).collect())
}

/// Projection onto the fields of the given parity.
pub fn symmetrize<T: Scalar>(grid: &Grid<T>, u: &Field<T>, parity: Parity) -> Field<T> {
    let r = reflect(grid, u);
    let sum = match parity {
        Parity::Even => u.add(&r),
        Parity::Odd => u.sub(&r),
    };
    sum.scaled(T::lit(0.5))
}

/// Parity of `u` when it holds to `tol` relative.
pub fn parity_of<T: Scalar>(grid: &Grid<T>, u: &Field<T>, tol: T) -> Option<Parity> {
    let r = reflect(grid, u);
    let scale = u.euclidean_norm();
    if u.sub(&r).euclidean_norm() <= tol * scale {
        Some(Parity::Even)
    } else if u.add(&r).euclidean_norm() <= tol * scale {
        Some(Parity::Odd)
    } else {
        None
    }
}

/// Projected gradient descent of `R` on the unit sphere.
///
/// Trial steps follow the Barzilai–Borwein rule in the Sobolev metric and
/// are safeguarded by Armijo backtracking. Once decreases fall below the
/// resolution of the values, a step is accepted when the value does not
/// increase and the Sobolev gradient norm shrinks.
pub fn ground_state<T: Scalar, P: ReducedProblem<T> + ?Sized>(problem: &P, opts: &SolveOptions<T>) -> Result<SolveResult<T>> {
    let grid = problem.grid();
    let start = match &opts.start {
        Some(s) => {
            grid.check(s)?;
            s.clone()
        }
        None => grid.laplacian_eigenbasis(1)?.remove(0).1,
    };
    let keep = |f: Field<T>| match opts.symmetry {
        Some(parity) => symmetrize(grid, &f, parity),
        None => f,
    };
    let mut u = normalize(problem, &keep(start))?;
    let mut proj = problem.project(&u)?;
    let mut grad = problem.reduced_gradient(&proj)?;
    let mut trace = Vec::new();
    let mut step: Option<T> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut residual;
    let mut dir = keep(precondition(grid, &grad));
    let mut slope = grad.dot(&dir);

    loop {
        residual = problem.residual(&proj)?;
        let gap = problem.energy_gap(&proj)?;
        trace.push(TraceEntry { value: proj.value, residual });
        if residual <= opts.residual_tol && gap.is_none_or(|g| g.abs() <= opts.energy_tol) {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter || !(slope > T::zero()) || !slope.is_finite() {
            break;
        }
        let mut s = match step {
            Some(s) => s,
            None => T::lit(0.25) / problem.sphere_norm(&dir)?,
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            if let Ok(cand) = normalize(problem, &u.sub(&dir.scaled(s))) {
                if let Ok(p) = problem.project(&cand) {
                    if p.value.is_finite() {
                        let (ok, unresolved) = armijo(proj.value, p.value, s * slope);
                        if ok || (unresolved && p.value <= proj.value) {
                            let g = problem.reduced_gradient(&p)?;
                            let d = keep(precondition(grid, &g));
                            let sl = g.dot(&d);
                            if ok || sl < slope {
                                accepted = Some((cand, p, g, d, sl));
                                break;
                            }
                        }
                    }
                }
            }
            s = s * T::lit(ARMIJO_SHRINK);
        }
        let Some((cand, p, g, d, sl)) = accepted else { break };
        iterations += 1;
        // Barzilai–Borwein trial step ⟨Δu, Δu⟩_H / ⟨Δu, Δg⟩
        let du = cand.sub(&u);
        let dg = g.sub(&grad);
        let curvature = du.dot(&dg);
        let metric = grid.cell_volume() * du.dot(&grid.apply_laplacian(&du));
        step = Some(if curvature > T::zero() && metric.is_finite() { metric / curvature } else { s * T::lit(2.0) });
        u = cand;
        proj = p;
        grad = g;
        dir = d;
        slope = sl;
    }

    let energy_gap = problem.energy_gap(&proj)?;
    if converged {
        problem.check_level(proj.value)?;
    }
    Ok(SolveResult {
        u: proj.w,
        lambda: proj.multiplier,
        energy_gap,
        level: proj.value,
        t: proj.t,
        residual,
        iterations,
        converged,
        trace,
    })
}

/// Upper estimate of the `n`-th minimax level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxEstimate<T> {
    pub n: usize,
    pub value: T,
    pub subspace_dim: usize,
    pub inner_iterations: usize,
    /// Maximizing coefficients in the eigenfield basis.
    pub coefficients: Vec<T>,
}

struct Ascent<T> {
    value: T,
    coefficients: Vec<T>,
    iterations: usize,
}

fn combine<T: Scalar>(basis: &[Field<T>], a: &[T]) -> Field<T> {
    let mut v = Field::zeros(basis[0].len());
    for (e, &c) in basis.iter().zip(a) {
        v.axpy(c, e);
    }
    v
}

fn unit<T: Scalar>(a: &[T]) -> Vec<T> {
    let n = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    a.iter().map(|&x| x / n).collect()
}

fn evaluate_coefficients<T: Scalar, P: ReducedProblem<T> + ?Sized>(problem: &P, basis: &[Field<T>], a: &[T]) -> Result<(T, Vec<T>)> {
    let v = combine(basis, a);
    let norm = problem.sphere_norm(&v)?;
    let u = v.scaled(T::one() / norm);
    let p = problem.project(&u)?;
    let g = problem.reduced_gradient(&p)?;
    // ∇R(v) = ∇R(u)/‖v‖ by 0-homogeneity
    let ga = basis.iter().map(|e| g.dot(e) / norm).collect();
    Ok((p.value, ga))
}

/// Projected gradient ascent of `a ↦ R(Σ a_k e_k)` on the unit sphere of
/// coefficients.
fn ascend<T: Scalar, P: ReducedProblem<T> + ?Sized>(problem: &P, basis: &[Field<T>], start: &[T], max_iter: usize) -> Result<Ascent<T>> {
    let mut a = unit(start);
    let (mut value, mut ga) = evaluate_coefficients(problem, basis, &a)?;
    let mut step: Option<T> = None;
    let mut iterations = 0;
    while iterations < max_iter {
        let gn = ga.iter().map(|&x| x * x).sum::<T>().sqrt();
        if !(gn > T::lit(1e-12) * (T::one() + value.abs())) {
            break;
        }
        let slope = gn * gn;
        let mut s = step.unwrap_or(T::lit(0.5) / gn);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand: Vec<T> = unit(&a.iter().zip(&ga).map(|(&x, &g)| x + s * g).collect::<Vec<_>>());
            if let Ok((v, g)) = evaluate_coefficients(problem, basis, &cand) {
                if sufficient_decrease(-value, -v, s * slope) {
                    accepted = Some((cand, v, g));
                    break;
                }
            }
            s = s * T::lit(ARMIJO_SHRINK);
        }
        let Some((cand, v, g)) = accepted else { break };
        iterations += 1;
        let gain = v - value;
        a = cand;
        value = v;
        ga = g;
        step = Some(s * T::lit(2.0));
        if gain <= T::lit(1e-15) * (T::one() + value.abs()) {
            break;
        }
    }
    Ok(Ascent { value, coefficients: a, iterations })
}

fn multistart_ascent<T: Scalar, P: ReducedProblem<T> + ?Sized>(
    problem: &P,
    basis: &[Field<T>],
    mut starts: Vec<Vec<T>>,
    opts: &SolveOptions<T>,
    rng: &mut ChaCha8Rng,
) -> Result<Ascent<T>> {
    let n = basis.len();
    for _ in 0..opts.multistart {
        starts.push((0..n).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect());
    }
    let runs: Vec<Result<Ascent<T>>> = starts.par_iter().map(|s| ascend(problem, basis, s, opts.ascent_iter)).collect();
    let mut best: Option<Ascent<T>> = None;
    let mut total = 0;
    for run in runs {
        let run = run?;
        total += run.iterations;
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one start");
    best.iterations = total;
    Ok(best)
}

/// Upper estimate of the `n`-th level: the supremum of `R` over the unit
/// sphere of the span of the first `n` Laplacian eigenfields.
pub fn minimax_estimate<T: Scalar, P: ReducedProblem<T> + ?Sized>(problem: &P, n: usize, opts: &SolveOptions<T>) -> Result<MinimaxEstimate<T>> {
    if n == 0 {
        return Err(Error::Config("minimax level must be at least 1".into()));
    }
    Ok(minimax_nested(problem, n, opts)?.pop().expect("n >= 1"))
}

/// Estimates for levels `1..=n_max` over nested subspaces; each level
/// starts from the previous maximizer, so the sequence is nondecreasing.
pub fn minimax_nested<T: Scalar, P: ReducedProblem<T> + ?Sized>(problem: &P, n_max: usize, opts: &SolveOptions<T>) -> Result<Vec<MinimaxEstimate<T>>> {
    if n_max == 0 {
        return Err(Error::Config("minimax level must be at least 1".into()));
    }
    let basis: Vec<Field<T>> = problem.grid().laplacian_eigenbasis(n_max)?.into_iter().map(|(_, e)| e).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out: Vec<MinimaxEstimate<T>> = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let sub = &basis[..n];
        let mut axis = vec![T::zero(); n];
        axis[n - 1] = T::one();
        let mut starts = vec![axis];
        if let Some(prev) = out.last() {
            let mut warm = prev.coefficients.clone();
            warm.push(T::zero());
            starts.insert(0, warm);
        }
        let best = if n == 1 {
            let (value, _) = evaluate_coefficients(problem, sub, &[T::one()])?;
            Ascent { value, coefficients: vec![T::one()], iterations: 0 }
        } else {
            multistart_ascent(problem, sub, starts, opts, &mut rng)?
        };
        // the warm start is among the candidates, so this only guards rounding
        let value = match out.last() {
            Some(prev) if best.value < prev.value => prev.value,
            _ => best.value,
        };
        out.push(MinimaxEstimate { n, value, subspace_dim: n, inner_iterations: best.iterations, coefficients: best.coefficients });
    }
    Ok(out)
}

/// One row of a `c` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub c: T,
    pub lambda: Option<T>,
    pub residual: Option<T>,
    pub converged: bool,
    pub error: Option<String>,
}

/// Ground-state solves along `c_values`, each warm-started from the
/// previous solution.
pub fn sweep_c<T: Scalar>(model: &ModelSpec<'_, T>, c_values: &[T], opts: &SolveOptions<T>) -> Result<Vec<SweepRow<T>>> {
    if let (Some(&first), true) = (c_values.first(), !c_values.is_empty()) {
        if c_values.iter().any(|&c| (c > T::zero()) != (first > T::zero())) {
            return Err(Error::Config("all prescribed energies of a sweep must share one sign".into()));
        }
    }
    let mut rows = Vec::with_capacity(c_values.len());
    let mut warm = opts.start.clone();
    for &c in c_values {
        let mut local = opts.clone();
        local.start = warm.clone();
        let outcome = PrescribedEnergyProblem::new(model, c).and_then(|p| {
            let mut p = p;
            p.fiber_tol = opts.fiber_tol;
            ground_state(&p, &local)
        });
        match outcome {
            Ok(r) => {
                warm = Some(r.u.clone());
                rows.push(SweepRow { c, lambda: r.lambda, residual: Some(r.residual), converged: r.converged, error: None });
            }
            Err(e) => rows.push(SweepRow { c, lambda: None, residual: None, converged: false, error: Some(e.to_string()) }),
        }
    }
    Ok(rows)
}

/// Outcome of a deflated search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflationResult<T> {
    pub solutions: Vec<SolveResult<T>>,
    /// Set when fewer than the requested number of distinct solutions
    /// were found.
    pub incomplete: bool,
}

/// `min(‖a − b‖, ‖a + b‖)/‖a‖` in `L²`.
pub fn relative_distance<T: Scalar>(grid: &Grid<T>, a: &Field<T>, b: &Field<T>) -> T {
    let na = grid.inner(a, a).sqrt();
    let d1 = a.sub(b);
    let d2 = a.add(b);
    grid.inner(&d1, &d1).sqrt().min(grid.inner(&d2, &d2).sqrt()) / na
}

/// Whether `R` commutes with the point reflection of the grid, probed at a
/// generic field. Forward differences in dim ≥ 2 break the symmetry for
/// `p ≠ 2`; the 1D and quadratic discretizations keep it.
fn reflection_equivariant<T: Scalar, P: ReducedProblem<T> + ?Sized>(problem: &P, seed: u64) -> Result<bool> {
    let grid = problem.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let probe = grid.laplacian_eigenbasis(1)?.remove(0).1;
    let noise = Field::from_vec((0..grid.node_count()).map(|_| T::lit(rng.random_range(-0.3..0.3))).collect());
    let u = normalize(problem, &probe.add(&noise))?;
    let p = problem.project(&u)?;
    let g = problem.reduced_gradient(&p)?;
    let ur = normalize(problem, &reflect(grid, &u))?;
    let pr = problem.project(&ur)?;
    let gr = problem.reduced_gradient(&pr)?;
    let tol = T::lit(1e-9);
    Ok((pr.value - p.value).abs() <= tol * (T::one() + p.value.abs())
        && gr.sub(&reflect(grid, &g)).euclidean_norm() <= tol * g.euclidean_norm())
}

/// Repeated descents from Laplacian eigenfields, each start made
/// `L²`-orthogonal to the solutions already found.
///
/// A start with definite reflection parity stays in its parity class when
/// the discrete functional is reflection-equivariant; the exact iteration
/// preserves the class, and enforcing it stops rounding errors from sliding
/// saddle-type solutions down to the ground state.
pub fn deflated_search<T: Scalar, P: ReducedProblem<T> + ?Sized>(problem: &P, count: usize, opts: &SolveOptions<T>) -> Result<DeflationResult<T>> {
    if count == 0 {
        return Err(Error::Config("deflated search needs count >= 1".into()));
    }
    let grid = problem.grid();
    let pool = (2 * count + 2).min(grid.node_count());
    let basis = grid.laplacian_eigenbasis(pool)?;
    let equivariant = reflection_equivariant(problem, opts.seed)?;
    let mut found: Vec<SolveResult<T>> = Vec::new();
    for (_, e) in basis {
        if found.len() >= count {
            break;
        }
        let mut start = e.clone();
        for s in &found {
            let ns = grid.inner(&s.u, &s.u);
            let coef = grid.inner(&start, &s.u) / ns;
            start.axpy(-coef, &s.u);
        }
        if grid.inner(&start, &start).sqrt() <= T::lit(1e-8) {
            continue;
        }
        let mut local = opts.clone();
        if equivariant {
            local.symmetry = parity_of(grid, &start, T::lit(1e-10));
        }
        local.start = Some(start);
        let r = match ground_state(problem, &local) {
            Ok(r) => r,
            Err(e) if e.is_hypothesis_violation() => return Err(e),
            Err(_) => continue,
        };
        if !r.converged {
            continue;
        }
        if found.iter().all(|s| relative_distance(grid, &r.u, &s.u) >= T::lit(1e-3)) {
            found.push(r);
        }
    }
    let incomplete = found.len() < count;
    Ok(DeflationResult { solutions: found, incomplete })
}

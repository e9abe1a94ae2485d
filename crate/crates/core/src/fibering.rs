//! Projections onto Nehari sets along rays `t ↦ t u`.
//!
//! Two scalar equations are solved for `t > 0`:
//! - `H(tu) + αc = 0`, whose root `t_c(u)` is the critical point of
//!   `t ↦ λ_c(tu)` (prescribed-energy path);
//! - `d/dt Φ(tu) = 0`, whose root `t(u)` is the critical point of the
//!   fibering map itself (direct path).

use serde::{Deserialize, Serialize};

use crate::affine::{AffineModel, AffineRay};
use crate::error::{Error, Result};
use crate::functionals::{ModelRay, ModelSpec};
use crate::mesh::Field;
use crate::scalar::Scalar;

const MAX_DOUBLINGS: i32 = 60;
const NEWTON_STEPS: usize = 5;

/// Type of extremum of the map along the ray at the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberingFlag {
    /// The defining function has the wrong sign somewhere it should not.
    NonunimodalSuspected,
    /// The bracket had to be expanded beyond `[1/2, 2]`.
    BracketExpanded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberingResult<T> {
    pub t: T,
    pub bracket: (T, T),
    pub iterations: usize,
    pub kind: ExtremumKind,
    pub flags: Vec<FiberingFlag>,
    /// `|g(t)|` of the defining equation at the returned `t`.
    pub residual: T,
}

/// Scalar equation `g(t) = 0` on `t > 0`.
pub trait FiberEquation<T> {
    fn value(&self, t: T) -> Result<T>;
    /// `g'(t)` when available.
    fn derivative(&self, t: T) -> Option<T>;
}

struct PrescribedEnergy<'a, T> {
    ray: &'a ModelRay<T>,
    shift: T,
}

impl<T: Scalar> FiberEquation<T> for PrescribedEnergy<'_, T> {
    fn value(&self, t: T) -> Result<T> {
        Ok(self.ray.h(t)? + self.shift)
    }
    fn derivative(&self, t: T) -> Option<T> {
        self.ray.h_prime(t)
    }
}

impl<T: Scalar> FiberEquation<T> for ModelRay<T> {
    fn value(&self, t: T) -> Result<T> {
        self.i1_prime(t)
    }
    fn derivative(&self, t: T) -> Option<T> {
        self.i1_second(t)
    }
}

impl<T: Scalar> FiberEquation<T> for AffineRay<T> {
    fn value(&self, t: T) -> Result<T> {
        Ok(self.derivative(t))
    }
    fn derivative(&self, t: T) -> Option<T> {
        self.second_derivative(t)
    }
}

fn sign<T: Scalar>(x: T) -> i8 {
    if x > T::zero() {
        1
    } else if x < T::zero() {
        -1
    } else {
        0
    }
}

/// Finds the single root of `g` on `(0, ∞)` where `g` changes sign from
/// `before` (`±1`) to `−before`.
pub fn solve_fiber_root<T: Scalar, G: FiberEquation<T>>(g: &G, before: i8, tol: T) -> Result<FiberingResult<T>> {
    let two = T::lit(2.0);
    let kind = if before > 0 { ExtremumKind::Max } else { ExtremumKind::Min };
    let cap_hi = two.powi(MAX_DOUBLINGS);
    let cap_lo = T::one() / cap_hi;
    let mut flags = Vec::new();
    let mut iterations = 0;

    let g1 = g.value(T::one())?;
    let s1 = sign(g1);
    if s1 == 0 {
        return Ok(FiberingResult { t: T::one(), bracket: (T::one(), T::one()), iterations, kind, flags, residual: T::zero() });
    }
    let (mut lo, mut hi);
    let mut expansions = 0;
    if s1 == before {
        // still before the root: walk right
        lo = T::one();
        hi = two;
        loop {
            iterations += 1;
            let v = g.value(hi)?;
            if sign(v) != before {
                if sign(v) == 0 {
                    return Ok(FiberingResult { t: hi, bracket: (lo, hi), iterations, kind, flags, residual: T::zero() });
                }
                break;
            }
            expansions += 1;
            if hi >= cap_hi {
                return Err(Error::NoRoot { lo: cap_lo.as_f64(), hi: cap_hi.as_f64() });
            }
            lo = hi;
            hi = hi * two;
        }
    } else {
        hi = T::one();
        lo = T::one() / two;
        loop {
            iterations += 1;
            let v = g.value(lo)?;
            if sign(v) == before {
                break;
            }
            if sign(v) == 0 {
                return Ok(FiberingResult { t: lo, bracket: (lo, hi), iterations, kind, flags, residual: T::zero() });
            }
            expansions += 1;
            if lo <= cap_lo {
                return Err(Error::NoRoot { lo: cap_lo.as_f64(), hi: cap_hi.as_f64() });
            }
            hi = lo;
            lo = lo / two;
        }
    }
    if expansions > 0 {
        flags.push(FiberingFlag::BracketExpanded);
    }
    let bracket = (lo, hi);

    // bisection to 1e-12 relative width
    let width = T::lit(1e-12).max(T::lit(4.0) * T::epsilon());
    while hi - lo > width * hi {
        iterations += 1;
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g.value(mid)?;
        match sign(v) {
            0 => {
                lo = mid;
                hi = mid;
            }
            s if s == before => lo = mid,
            _ => hi = mid,
        }
    }
    let mut t = (lo + hi) / two;
    let mut gt = g.value(t)?;

    // Newton polish, kept inside the final bracket
    for _ in 0..NEWTON_STEPS {
        if gt == T::zero() {
            break;
        }
        let Some(d) = g.derivative(t) else { break };
        if d == T::zero() || !d.is_finite() {
            break;
        }
        let next = t - gt / d;
        if !(next >= lo && next <= hi) {
            break;
        }
        let gn = g.value(next)?;
        iterations += 1;
        if gn.abs() >= gt.abs() {
            break;
        }
        t = next;
        gt = gn;
    }

    // continue bisecting while the tolerance is missed and the bracket allows
    while gt.abs() > tol {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let v = g.value(mid)?;
        if sign(v) == before {
            lo = mid;
        } else {
            hi = mid;
        }
        if v.abs() < gt.abs() {
            t = mid;
            gt = v;
        }
    }

    // the sign pattern around the root must be before | after
    for (factor, expect) in [(T::lit(0.25), before), (T::lit(0.5), before), (two, -before), (T::lit(4.0), -before)] {
        let probe = t * factor;
        if probe > cap_lo && probe < cap_hi {
            if let Ok(v) = g.value(probe) {
                if sign(v) != 0 && sign(v) != expect {
                    flags.push(FiberingFlag::NonunimodalSuspected);
                    break;
                }
            }
        }
    }

    Ok(FiberingResult { t, bracket, iterations, kind, flags, residual: gt.abs() })
}

/// Root `t_c(u)` of `H(tu) = −αc`.
///
/// Returns `t` with `|H(tu) + αc| ≤ tol (1 + α|c|)` whenever that is
/// reachable in floating point.
pub fn solve_t_c<T: Scalar>(model: &ModelSpec<'_, T>, u: &Field<T>, c: T, tol: T) -> Result<FiberingResult<T>> {
    if !model.supports_prescribed_energy() {
        return Err(Error::NotApplicable(format!("t_c is not defined for the {} model", model.kind().name())));
    }
    if c == T::zero() || !c.is_finite() {
        return Err(Error::Domain(format!("prescribed energy must be nonzero and finite, got {c}")));
    }
    if !(tol > T::zero()) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if u.is_zero() {
        return Err(Error::Degenerate("cannot project the zero field".into()));
    }
    let ray = model.ray(u)?;
    let alpha = model.alpha();
    let eq = PrescribedEnergy { ray: &ray, shift: alpha * c };
    let before = if c > T::zero() { 1 } else { -1 };
    solve_fiber_root(&eq, before, tol * (T::one() + alpha * c.abs()))
}

/// Functionals with a direct Nehari projection.
pub trait NehariFunctional<T: Scalar> {
    type Ray: FiberEquation<T>;
    fn fiber(&self, u: &Field<T>) -> Result<Self::Ray>;
    /// Value of the functional along the ray, for profiles.
    fn fiber_value(ray: &Self::Ray, t: T) -> Result<T>;
}

impl<T: Scalar> NehariFunctional<T> for ModelSpec<'_, T> {
    type Ray = ModelRay<T>;
    fn fiber(&self, u: &Field<T>) -> Result<ModelRay<T>> {
        self.ray(u)
    }
    fn fiber_value(ray: &ModelRay<T>, t: T) -> Result<T> {
        ray.i1(t)
    }
}

impl<T: Scalar> NehariFunctional<T> for AffineModel<'_, T> {
    type Ray = AffineRay<T>;
    fn fiber(&self, u: &Field<T>) -> Result<AffineRay<T>> {
        self.ray(u)
    }
    fn fiber_value(ray: &AffineRay<T>, t: T) -> Result<T> {
        Ok(ray.value(t))
    }
}

/// Root `t(u)` of `d/dt Φ(tu) = 0` for `Φ = I₁` (or `Φ_A`).
pub fn solve_t_nehari<T: Scalar, F: NehariFunctional<T>>(functional: &F, u: &Field<T>, tol: T) -> Result<FiberingResult<T>> {
    if !(tol > T::zero()) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if u.is_zero() {
        return Err(Error::Degenerate("cannot project the zero field".into()));
    }
    let ray = functional.fiber(u)?;
    solve_fiber_root(&ray, 1, tol)
}

/// One sample of a fibering profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow<T> {
    pub t: T,
    pub value: T,
    pub derivative: T,
}

fn check_t_grid<T: Scalar>(t_grid: &[T]) -> Result<()> {
    if t_grid.iter().any(|&t| !(t > T::zero())) || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("profile abscissae must be positive and increasing".into()));
    }
    Ok(())
}

/// Samples `t ↦ λ_c(tu)` (when `c` is given) or `t ↦ I₁(tu)` with analytic
/// derivatives.
pub fn fibering_profile<T: Scalar>(model: &ModelSpec<'_, T>, u: &Field<T>, c: Option<T>, t_grid: &[T]) -> Result<Vec<ProfileRow<T>>> {
    check_t_grid(t_grid)?;
    if u.is_zero() {
        return Err(Error::Degenerate("profile of the zero field".into()));
    }
    let ray = model.ray(u)?;
    match c {
        Some(c) => {
            if !model.supports_prescribed_energy() {
                return Err(Error::NotApplicable(format!("λ_c is not defined for the {} model", model.kind().name())));
            }
            let alpha = model.alpha();
            t_grid
                .iter()
                .map(|&t| {
                    let i2 = ray.i2_at(t);
                    Ok(ProfileRow {
                        t,
                        value: (ray.i1(t)? - c) / i2,
                        derivative: (ray.h(t)? + alpha * c) / (t.powf(alpha + T::one()) * ray.i2),
                    })
                })
                .collect()
        }
        None => direct_profile(model, u, t_grid),
    }
}

/// Samples `t ↦ Φ(tu)` and `d/dt Φ(tu)` for a direct-path functional.
pub fn direct_profile<T: Scalar, F: NehariFunctional<T>>(functional: &F, u: &Field<T>, t_grid: &[T]) -> Result<Vec<ProfileRow<T>>> {
    check_t_grid(t_grid)?;
    let ray = functional.fiber(u)?;
    t_grid
        .iter()
        .map(|&t| Ok(ProfileRow { t, value: F::fiber_value(&ray, t)?, derivative: ray.value(t)? }))
        .collect()
}

/// `n` log-spaced points in `[lo, hi]`.
pub fn log_spaced<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1)).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::ModelKind;
    use crate::mesh::Grid;
    use crate::nonlinearity::Nonlinearity;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &Grid<f64>, rng: &mut ChaCha8Rng) -> Field<f64> {
        Field::from_vec((0..grid.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    fn semilinear(grid: &Grid<f64>) -> ModelSpec<'_, f64> {
        ModelSpec::new(grid, ModelKind::Semilinear { nonlinearity: Nonlinearity::PurePower { r: 4.0 } }, 0.0).unwrap()
    }

    #[test]
    fn semilinear_closed_form_and_scaling() {
        let grid = Grid::<f64>::new(1, 64).unwrap();
        let m = semilinear(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let u = random_field(&grid, &mut rng).scaled(rng.random_range(0.01..100.0));
            for c in [0.5, 1.0, 2.0] {
                let r = solve_t_c(&m, &u, c, 1e-12).unwrap();
                let exact = (4.0 * c / grid.lp_norm_pow(&u, 4.0)).powf(0.25);
                assert_relative_eq!(r.t, exact, max_relative = 1e-10);
                assert_eq!(r.kind, ExtremumKind::Max);
                assert!(r.bracket.0 <= r.t && r.t <= r.bracket.1);
                assert!(!r.flags.contains(&FiberingFlag::NonunimodalSuspected));
                let rs = solve_t_c(&m, &u.scaled(3.0), c, 1e-12).unwrap();
                assert_relative_eq!(rs.t * 3.0, r.t, max_relative = 1e-10);
            }
            let ts: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&c| solve_t_c(&m, &u, c, 1e-12).unwrap().t).collect();
            assert!(ts[0] < ts[1] && ts[1] < ts[2]);
        }
    }

    #[test]
    fn brezis_nirenberg_constraint() {
        let grid = Grid::<f64>::new(3, 5).unwrap();
        let m = ModelSpec::new(&grid, ModelKind::BrezisNirenberg { n_dim: 3, two_star: 6.0 }, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let u = random_field(&grid, &mut rng);
            let c = rng.random_range(0.1..5.0);
            let r = solve_t_c(&m, &u, c, 1e-12).unwrap();
            let exact = (3.0 * c / grid.lp_norm_pow(&u, 6.0)).powf(1.0 / 6.0);
            assert_relative_eq!(r.t, exact, max_relative = 1e-10);
            assert_relative_eq!(grid.lp_norm_pow(&u.scaled(r.t), 6.0), 3.0 * c, max_relative = 1e-10);
        }
    }

    #[test]
    fn concave_convex_root_lies_on_decreasing_branch() {
        let grid = Grid::<f64>::new(1, 40).unwrap();
        let m = ModelSpec::new(&grid, ModelKind::ConcaveConvex { nonlinearity: Nonlinearity::PurePower { r: 4.0 }, q: 1.5 }, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let u = random_field(&grid, &mut rng).scaled(0.01);
            let c = 0.3;
            let r = solve_t_c(&m, &u, c, 1e-12).unwrap();
            let ray = m.ray(&u).unwrap();
            let res = (ray.h(r.t).unwrap() + 1.5 * c).abs();
            assert!(res <= 1e-9 * (1.0 + 1.5 * c), "residual {res} at t = {}", r.t);
            assert!(ray.h_prime(r.t).unwrap() < 0.0);
            assert!(r.flags.is_empty() || r.flags == vec![FiberingFlag::BracketExpanded]);
        }
    }

    #[test]
    fn wrong_orientation_has_no_root() {
        let grid = Grid::<f64>::new(1, 40).unwrap();
        let kind = ModelKind::Semilinear { nonlinearity: Nonlinearity::PurePower { r: 4.0 } };
        let m = ModelSpec::new(&grid, kind, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(&grid, &mut rng);
        // with H ≤ 0 and c < 0 there is no root
        assert!(matches!(solve_t_c(&m, &u, -1.0, 1e-12), Err(Error::NoRoot { .. })));
    }

    struct Cubic;

    impl FiberEquation<f64> for Cubic {
        fn value(&self, t: f64) -> Result<f64> {
            // increasing through its root at 3: an interior minimum of the primitive
            Ok(t * t * t - 27.0)
        }
        fn derivative(&self, t: f64) -> Option<f64> {
            Some(3.0 * t * t)
        }
    }

    #[test]
    fn generic_root_with_min_orientation() {
        let r = solve_fiber_root(&Cubic, -1, 1e-12).unwrap();
        assert_relative_eq!(r.t, 3.0, max_relative = 1e-14);
        assert_eq!(r.kind, ExtremumKind::Min);
        assert_eq!(r.bracket, (2.0, 4.0));
        assert!(r.flags.contains(&FiberingFlag::BracketExpanded));
        assert!(matches!(solve_fiber_root(&Cubic, 1, 1e-12), Err(Error::NoRoot { .. })));
    }

    #[test]
    fn flat_superlinear_root_and_bad_inputs() {
        let grid = Grid::<f64>::new(1, 16).unwrap();
        let m = ModelSpec::new(&grid, ModelKind::Semilinear { nonlinearity: Nonlinearity::PurePower { r: 400.0 } }, 0.0).unwrap();
        let u = grid.mode_field(&[1]).scaled(1e-3);
        let r = solve_t_c(&m, &u, 1.0, 1e-12);
        // very flat but still superlinear: a root exists far out
        assert!(r.unwrap().t > 1.0);
        let err = solve_t_c(&m, &grid.zeros(), 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert!(matches!(solve_t_c(&m, &u, 0.0, 1e-12), Err(Error::Domain(_))));
    }

    #[test]
    fn kirchhoff_closed_form() {
        let grid = Grid::<f64>::new(1, 50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for theta in [1.0, 0.5, -1.0] {
            let kind = ModelKind::Kirchhoff { p: 2.0, theta, nonlinearity: Nonlinearity::PurePower { r: 4.0 } };
            let m = ModelSpec::new(&grid, kind, 0.0).unwrap();
            for _ in 0..20 {
                let u = random_field(&grid, &mut rng).scaled(rng.random_range(0.01..10.0));
                let r = solve_t_nehari(&m, &u, 1e-12).unwrap();
                let nrm = m.norm(&u).unwrap();
                let exact = (nrm.powf(theta) / grid.lp_norm_pow(&u, 4.0)).powf(1.0 / (4.0 - theta));
                assert_relative_eq!(r.t, exact, max_relative = 1e-10);
                assert_eq!(r.kind, ExtremumKind::Max);
            }
        }
    }

    #[test]
    fn affine_projection_scaling_and_identity() {
        let grid = Grid::<f64>::new(2, 15).unwrap();
        let model = AffineModel::new(&grid, 2.0, 64, Nonlinearity::PurePower { r: 4.0 }).unwrap();
        let u = grid.mode_field(&[1, 2]).add(&grid.mode_field(&[2, 1]).scaled(0.3));
        let u = u.scaled(1.0 / model.energy(&u).unwrap());
        let t = solve_t_nehari(&model, &u, 1e-12).unwrap().t;
        for s in [0.5, 2.0, 10.0] {
            let ts = solve_t_nehari(&model, &u.scaled(s), 1e-12).unwrap().t;
            assert_relative_eq!(ts * s, t, max_relative = 1e-9);
        }
        let w = u.scaled(t);
        let ep = model.energy(&w).unwrap().powi(2);
        let fu: f64 = w.values().iter().map(|&v| v.powi(4)).sum::<f64>() * grid.cell_volume();
        assert_relative_eq!(ep, fu, max_relative = 1e-8);
    }

    #[test]
    fn profile_derivative_changes_sign_once_at_root() {
        let grid = Grid::<f64>::new(1, 32).unwrap();
        let m = semilinear(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field(&grid, &mut rng);
        let root = solve_t_c(&m, &u, 1.0, 1e-12).unwrap();
        let ts = log_spaced(1e-3, 1e3, 400);
        let rows = fibering_profile(&m, &u, Some(1.0), &ts).unwrap();
        let changes = rows.windows(2).filter(|w| (w[0].derivative > 0.0) != (w[1].derivative > 0.0)).count();
        assert_eq!(changes, 1);
        let at = fibering_profile(&m, &u, Some(1.0), &[root.t]).unwrap()[0];
        assert!(at.derivative.abs() <= 1e-10 * (at.value.abs() + 1.0));
        // analytic derivative vs finite difference of the profile values
        let h = 1e-6;
        let pr = fibering_profile(&m, &u, Some(1.0), &[0.7 - h, 0.7, 0.7 + h]).unwrap();
        assert_relative_eq!(pr[1].derivative, (pr[2].value - pr[0].value) / (2.0 * h), max_relative = 1e-6);
    }

    #[test]
    fn kirchhoff_negative_theta_profile_is_unbounded_below_near_zero() {
        let grid = Grid::<f64>::new(1, 32).unwrap();
        let kind = ModelKind::Kirchhoff { p: 2.0, theta: -1.0, nonlinearity: Nonlinearity::PurePower { r: 4.0 } };
        let m = ModelSpec::new(&grid, kind, 0.0).unwrap();
        let u = grid.mode_field(&[1]);
        let rows = fibering_profile(&m, &u, None, &log_spaced(1e-8, 1e-2, 4)).unwrap();
        assert!(rows[0].value < rows[1].value && rows[0].value < -1e6);
        assert!(fibering_profile(&m, &u, Some(1.0), &[1.0]).is_err());
        assert!(fibering_profile(&m, &u, None, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn dense_scan_finds_single_sign_change() {
        let grid = Grid::<f64>::new(1, 24).unwrap();
        let m = semilinear(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let u = random_field(&grid, &mut rng);
            let ray = m.ray(&u).unwrap();
            let scan: Vec<f64> = log_spaced(1e-6, 1e6, 2000).into_iter().map(|t| ray.h(t).unwrap() + 2.0).collect();
            let changes = scan.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
            assert_eq!(changes, 1);
        }
    }
}

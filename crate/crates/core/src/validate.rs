//! Sampled verdicts for the structural hypotheses of the models, the
//! Brezis–Nirenberg admissibility threshold, and independent 1D oracles.
//!
//! A pass means no violation was found over the declared sample; every
//! report records how many samples it looked at.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fibering::log_spaced;
use crate::functionals::{ModelKind, ModelSpec};
use crate::mesh::{Field, Grid};
use crate::nonlinearity::Nonlinearity;
use crate::scalar::{signed_pow, Scalar};
use crate::solver::{ground_state, Projected, ReducedProblem, SolveOptions};

/// Hypothesis labels a report can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H1,
    F1,
    F2,
    #[serde(rename = "F3-coercivity")]
    F3Coercivity,
    #[serde(rename = "f1")]
    SmallF1,
    #[serde(rename = "f2")]
    SmallF2,
    #[serde(rename = "f2prime")]
    SmallF2Prime,
    #[serde(rename = "f3")]
    SmallF3,
    A1,
    A2,
    A3,
    #[serde(rename = "BN-threshold")]
    BnThreshold,
}

impl Hypothesis {
    pub fn label(&self) -> &'static str {
        match self {
            Hypothesis::H1 => "H1",
            Hypothesis::F1 => "F1",
            Hypothesis::F2 => "F2",
            Hypothesis::F3Coercivity => "F3-coercivity",
            Hypothesis::SmallF1 => "f1",
            Hypothesis::SmallF2 => "f2",
            Hypothesis::SmallF2Prime => "f2prime",
            Hypothesis::SmallF3 => "f3",
            Hypothesis::A1 => "A1",
            Hypothesis::A2 => "A2",
            Hypothesis::A3 => "A3",
            Hypothesis::BnThreshold => "BN-threshold",
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Witness of a failed check: the sampled input and what was observed there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub input: Vec<f64>,
    pub observed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub hypothesis: Hypothesis,
    pub verdict: Verdict,
    pub samples: usize,
    pub counterexample: Option<Counterexample>,
    pub notes: String,
}

impl ValidationReport {
    fn pass(hypothesis: Hypothesis, samples: usize, notes: impl Into<String>) -> Self {
        ValidationReport { hypothesis, verdict: Verdict::Pass, samples, counterexample: None, notes: notes.into() }
    }

    fn fail(hypothesis: Hypothesis, samples: usize, ce: Counterexample, notes: impl Into<String>) -> Self {
        ValidationReport { hypothesis, verdict: Verdict::Fail, samples, counterexample: Some(ce), notes: notes.into() }
    }

    fn inconclusive(hypothesis: Hypothesis, samples: usize, notes: impl Into<String>) -> Self {
        ValidationReport { hypothesis, verdict: Verdict::Inconclusive, samples, counterexample: None, notes: notes.into() }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

/// Sign of the prescribed energy; selects the (F1) or (F2) orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn of(c: f64) -> Option<Sign> {
        if c > 0.0 {
            Some(Sign::Positive)
        } else if c < 0.0 {
            Some(Sign::Negative)
        } else {
            None
        }
    }

    fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }

    fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// Uniform `[-1, 1]` nodal values.
pub fn random_field<T: Scalar>(grid: &Grid<T>, rng: &mut ChaCha8Rng) -> Field<T> {
    Field::from_vec((0..grid.node_count()).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect())
}

fn step_sign(a: f64, b: f64) -> i8 {
    let noise = 1e-12 * (a.abs() + b.abs()) + f64::MIN_POSITIVE;
    let d = b - a;
    if d > noise {
        1
    } else if d < -noise {
        -1
    } else {
        0
    }
}

/// Index of the first difference that breaks the monotone direction `dir`.
fn monotone_violation(values: &[f64], dir: i8) -> Option<usize> {
    (0..values.len().saturating_sub(1)).find(|&i| step_sign(values[i], values[i + 1]) == -dir)
}

/// Index of the first difference that breaks a single turn from `first` to
/// `-first`.
fn unimodal_violation(values: &[f64], first: i8) -> Option<usize> {
    let mut turned = false;
    for i in 0..values.len().saturating_sub(1) {
        let s = step_sign(values[i], values[i + 1]);
        if s == -first {
            turned = true;
        } else if s == first && turned {
            return Some(i);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trend {
    Toward(Sign),
    Unclear,
}

/// Divergence evidence at the upper end of a sample: the last three steps
/// move the same way and the last value dominates the reference by two
/// orders of magnitude.
fn end_trend(values: &[f64], reference: f64) -> Trend {
    let n = values.len();
    if n < 4 {
        return Trend::Unclear;
    }
    let last = values[n - 1];
    let dirs: Vec<i8> = (n - 4..n - 1).map(|i| step_sign(values[i], values[i + 1])).collect();
    let big = last.abs() >= 100.0 * reference.abs().max(1.0);
    if !big {
        return Trend::Unclear;
    }
    if last > 0.0 && dirs.iter().all(|&d| d == 1) {
        Trend::Toward(Sign::Positive)
    } else if last < 0.0 && dirs.iter().all(|&d| d == -1) {
        Trend::Toward(Sign::Negative)
    } else {
        Trend::Unclear
    }
}

/// Samples `H(tu)` along random rays and checks the (F1) shape for `c > 0`
/// (increasing, then decreasing to `-∞`) or the mirrored (F2) shape for
/// `c < 0`.
pub fn check_ray_shape<T: Scalar>(
    model: &ModelSpec<'_, T>,
    c_sign: Sign,
    ray_samples: usize,
    t_range: (f64, f64),
    points: usize,
    seed: u64,
) -> ValidationReport {
    let hyp = match c_sign {
        Sign::Positive => Hypothesis::F1,
        Sign::Negative => Hypothesis::F2,
    };
    let (lo, hi) = t_range;
    if !(lo > 0.0 && hi > lo) || points < 16 {
        return ValidationReport::inconclusive(hyp, 0, format!("need 0 < lo < hi and at least 16 points, got ({lo}, {hi}) with {points}"));
    }
    if !model.supports_prescribed_energy() {
        return ValidationReport::inconclusive(hyp, 0, format!("H is not defined for the {} model", model.kind().name()));
    }
    // (F1): up then down, H -> -inf; (F2): down then up, H -> +inf
    let first: i8 = match c_sign {
        Sign::Positive => 1,
        Sign::Negative => -1,
    };
    let target = c_sign.flip();
    let ts = log_spaced(lo, hi, points);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evidence = 0usize;
    for k in 0..ray_samples {
        let u = random_field(model.grid(), &mut rng);
        let ray = match model.ray(&u) {
            Ok(r) => r,
            Err(e) => return ValidationReport::inconclusive(hyp, k, e.to_string()),
        };
        let mut hs = Vec::with_capacity(points);
        for &t in &ts {
            match ray.h(T::lit(t)) {
                Ok(v) => hs.push(v.as_f64()),
                Err(e) => return ValidationReport::inconclusive(hyp, k, e.to_string()),
            }
        }
        if let Some(i) = unimodal_violation(&hs, first) {
            return ValidationReport::fail(
                hyp,
                k + 1,
                Counterexample { input: vec![k as f64, ts[i], ts[i + 1]], observed: vec![hs[i], hs[i + 1]] },
                format!("ray {k}: second turn of H(tu) at t = {:e}", ts[i]),
            );
        }
        match end_trend(&hs, hs[3 * points / 4]) {
            Trend::Toward(s) if s == target => evidence += 1,
            Trend::Toward(_) => {
                let n = points - 1;
                return ValidationReport::fail(
                    hyp,
                    k + 1,
                    Counterexample { input: vec![k as f64, ts[n - 1], ts[n]], observed: vec![hs[n - 1], hs[n]] },
                    format!("ray {k}: H(tu) diverges with the wrong sign"),
                );
            }
            Trend::Unclear => {}
        }
    }
    let notes = format!("{ray_samples} rays, {points} log-spaced t in [{lo:e}, {hi:e}]; divergence seen on {evidence}");
    if evidence == ray_samples {
        ValidationReport::pass(hyp, ray_samples, notes)
    } else {
        ValidationReport::inconclusive(hyp, ray_samples, notes)
    }
}

/// Samples `g(t) = H(tu) + αc` along random rays and checks that it changes
/// sign exactly once, i.e. that `t ↦ λ_c(tu)` has a single critical point.
pub fn check_h1<T: Scalar>(
    model: &ModelSpec<'_, T>,
    c: f64,
    ray_samples: usize,
    t_range: (f64, f64),
    points: usize,
    seed: u64,
) -> ValidationReport {
    let hyp = Hypothesis::H1;
    let (lo, hi) = t_range;
    if !(lo > 0.0 && hi > lo) || points < 16 || c == 0.0 {
        return ValidationReport::inconclusive(hyp, 0, "need 0 < lo < hi, at least 16 points and c != 0");
    }
    if !model.supports_prescribed_energy() {
        return ValidationReport::inconclusive(hyp, 0, format!("H is not defined for the {} model", model.kind().name()));
    }
    let shift = model.alpha().as_f64() * c;
    let ts = log_spaced(lo, hi, points);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..ray_samples {
        let u = random_field(model.grid(), &mut rng);
        let ray = match model.ray(&u) {
            Ok(r) => r,
            Err(e) => return ValidationReport::inconclusive(hyp, k, e.to_string()),
        };
        let mut gs = Vec::with_capacity(points);
        for &t in &ts {
            match ray.h(T::lit(t)) {
                Ok(v) => gs.push(v.as_f64() + shift),
                Err(e) => return ValidationReport::inconclusive(hyp, k, e.to_string()),
            }
        }
        let changes: Vec<usize> = (0..points - 1).filter(|&i| (gs[i] > 0.0) != (gs[i + 1] > 0.0)).collect();
        if changes.len() != 1 {
            let i = changes.get(1).copied().unwrap_or(points - 2);
            return ValidationReport::fail(
                hyp,
                k + 1,
                Counterexample { input: vec![k as f64, ts[i], ts[i + 1]], observed: vec![gs[i], gs[i + 1]] },
                format!("ray {k}: {} sign changes of d/dt λ_c(tu)", changes.len()),
            );
        }
    }
    ValidationReport::pass(hyp, ray_samples, format!("{ray_samples} rays, {points} log-spaced t in [{lo:e}, {hi:e}]"))
}

/// Scalar conditions on the nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarCondition {
    /// Subcritical growth `|f(s)| ≤ C(1 + |s|^{r-1})`.
    F1,
    /// `G(s) = sf(s) − 2F(s)` monotone in `|s|` and unbounded.
    F2,
    /// `f(s)/|s|` increasing and `f(s)/s → ∞`.
    F2Prime,
    /// `(q−1)f(t)/t − f'(t)` decreasing on `(0, ∞)` towards `−∞`.
    F3,
}

impl ScalarCondition {
    pub fn parse(name: &str) -> Option<ScalarCondition> {
        match name {
            "f1" => Some(ScalarCondition::F1),
            "f2" => Some(ScalarCondition::F2),
            "f2prime" => Some(ScalarCondition::F2Prime),
            "f3" => Some(ScalarCondition::F3),
            _ => None,
        }
    }

    fn hypothesis(self) -> Hypothesis {
        match self {
            ScalarCondition::F1 => Hypothesis::SmallF1,
            ScalarCondition::F2 => Hypothesis::SmallF2,
            ScalarCondition::F2Prime => Hypothesis::SmallF2Prime,
            ScalarCondition::F3 => Hypothesis::SmallF3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionParams {
    /// Orientation of (f2) and (f2'); `Negative` mirrors both.
    pub orientation: Sign,
    /// Exponent `q` of (f3).
    pub q: Option<f64>,
    /// Critical exponent the (f1) growth must stay below.
    pub critical: Option<f64>,
    /// Samples per side of the origin.
    pub points: usize,
}

impl Default for ConditionParams {
    fn default() -> Self {
        ConditionParams { orientation: Sign::Positive, q: None, critical: None, points: 400 }
    }
}

/// Samples a scalar condition on log-spaced `|s| ∈ [1e-6, 1e6]`, both signs.
pub fn check_scalar_condition<T: Scalar>(nonlin: &Nonlinearity<T>, condition: ScalarCondition, params: &ConditionParams) -> ValidationReport {
    let hyp = condition.hypothesis();
    let points = params.points.max(16);
    let mags = log_spaced(1e-6, 1e6, points);
    let reference = mags.iter().position(|&m| m >= 1e3).unwrap_or(points / 2);
    let samples = 2 * points;
    let range = format!("{points} log-spaced |s| in [1e-6, 1e6] on each side");

    if condition == ScalarCondition::F1 {
        let (cst, r) = nonlin.growth_bound();
        let (cst, r) = (cst.as_f64(), r.as_f64());
        if let Some(crit) = params.critical {
            if !(r < crit) {
                return ValidationReport::fail(
                    hyp,
                    0,
                    Counterexample { input: vec![r], observed: vec![crit] },
                    format!("declared growth exponent {r} is not below {crit}"),
                );
            }
        }
        for side in [1.0, -1.0] {
            for &m in &mags {
                let s = side * m;
                let f = nonlin.f(T::lit(s)).as_f64();
                let bound = cst * (1.0 + m.powf(r - 1.0));
                if f.abs() > bound * (1.0 + 1e-12) {
                    return ValidationReport::fail(
                        hyp,
                        samples,
                        Counterexample { input: vec![s], observed: vec![f, bound] },
                        format!("|f(s)| exceeds {cst}(1 + |s|^{})", r - 1.0),
                    );
                }
            }
        }
        return ValidationReport::pass(hyp, samples, format!("growth bound C = {cst}, r = {r}; {range}"));
    }

    let q = params.q.unwrap_or(f64::NAN);
    if condition == ScalarCondition::F3 && !(q > 1.0) {
        return ValidationReport::inconclusive(hyp, 0, "(f3) needs the exponent q > 1");
    }
    // per side: sampled quantity, required direction along |s|, divergence target
    let evaluate = |s: f64| -> Option<f64> {
        let st = T::lit(s);
        match condition {
            ScalarCondition::F2 => Some(nonlin.g_alpha(st, T::lit(2.0)).as_f64()),
            ScalarCondition::F2Prime => Some(nonlin.f(st).as_f64() / s.abs()),
            ScalarCondition::F3 => {
                let d = nonlin.fprime(st).ok()?.value.as_f64();
                Some((q - 1.0) * nonlin.f(st).as_f64() / s - d)
            }
            ScalarCondition::F1 => unreachable!(),
        }
    };
    let orient = params.orientation;
    let mut evidence = true;
    for side in [Sign::Positive, Sign::Negative] {
        let (dir, target) = match condition {
            ScalarCondition::F2 => (orient.value() as i8, orient),
            ScalarCondition::F2Prime => {
                let s = if side == orient { Sign::Positive } else { Sign::Negative };
                (s.value() as i8, s)
            }
            _ => (-1, Sign::Negative),
        };
        let mut vals = Vec::with_capacity(points);
        for &m in &mags {
            match evaluate(side.value() * m) {
                Some(v) if v.is_finite() => vals.push(v),
                _ => {
                    return ValidationReport::inconclusive(hyp, vals.len(), format!("quantity undefined at s = {:e}", side.value() * m));
                }
            }
        }
        if let Some(i) = monotone_violation(&vals, dir) {
            let (a, b) = (side.value() * mags[i], side.value() * mags[i + 1]);
            return ValidationReport::fail(
                hyp,
                samples,
                Counterexample { input: vec![a, b], observed: vec![vals[i], vals[i + 1]] },
                format!("monotonicity in |s| broken between s = {a:e} and s = {b:e}"),
            );
        }
        match end_trend(&vals, vals[reference]) {
            Trend::Toward(s) if s == target => {}
            Trend::Toward(_) => {
                let n = points - 1;
                return ValidationReport::fail(
                    hyp,
                    samples,
                    Counterexample { input: vec![side.value() * mags[n]], observed: vec![vals[n]] },
                    "diverges with the wrong sign".to_string(),
                );
            }
            Trend::Unclear => evidence = false,
        }
    }
    if evidence {
        ValidationReport::pass(hyp, samples, range)
    } else {
        ValidationReport::inconclusive(hyp, samples, format!("monotone, but no divergence evidence; {range}"))
    }
}

/// `a(t) = 1 + t^{(q−p)/p}`.
fn default_a(p: f64, q: f64, t: f64) -> f64 {
    1.0 + t.powf((q - p) / p)
}

/// `A(t) = ∫₀ᵗ a = t + (p/q) t^{q/p}`.
fn default_big_a(p: f64, q: f64, t: f64) -> f64 {
    t + p / q * t.powf(q / p)
}

/// Checks (A1)–(A3) for the default coefficient `a(t) = 1 + t^{(q−p)/p}`.
/// Returns the three reports in that order.
#[allow(non_snake_case)]
pub fn check_A_conditions(p: f64, q: f64, r: f64, k0: f64, k1: f64, samples: usize) -> Vec<ValidationReport> {
    let n = samples.max(16);
    let ts = log_spaced(1e-6, 1e6, n);
    let range = format!("{n} log-spaced t in [1e-6, 1e6]");

    let a1 = (|| {
        if !(k1 < r / p * k0) {
            return ValidationReport::fail(
                Hypothesis::A1,
                0,
                Counterexample { input: vec![k0, k1, r, p], observed: vec![k1, r / p * k0] },
                format!("parameter gate k1 < (r/p)k0 fails: {k1} >= {}", r / p * k0),
            );
        }
        for &t in &ts {
            let a = default_a(p, q, t);
            let base = 1.0 + t.powf((q - p) / p);
            let slack = 1e-12 * a.abs();
            if a < k0 * base - slack || a > k1 * base + slack {
                return ValidationReport::fail(
                    Hypothesis::A1,
                    n,
                    Counterexample { input: vec![t], observed: vec![a, k0 * base, k1 * base] },
                    "a(t) leaves the band k0(1+t^{(q-p)/p}) .. k1(1+t^{(q-p)/p})",
                );
            }
        }
        ValidationReport::pass(Hypothesis::A1, n, format!("k1 = {k1} < (r/p)k0 = {}; {range}", r / p * k0))
    })();

    let phi: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let s = t.powf(p);
            default_a(p, q, s) * s - r / p * default_big_a(p, q, s)
        })
        .collect();
    let a2 = match monotone_violation(&phi, -1) {
        Some(i) => ValidationReport::fail(
            Hypothesis::A2,
            n,
            Counterexample { input: vec![ts[i], ts[i + 1]], observed: vec![phi[i], phi[i + 1]] },
            "a(t^p)t^p - (r/p)A(t^p) increases",
        ),
        None => ValidationReport::pass(Hypothesis::A2, n, range.clone()),
    };

    // convexity: divided-difference slopes are nondecreasing
    let vals: Vec<f64> = ts.iter().map(|&t| default_big_a(p, q, t.powf(p))).collect();
    let slopes: Vec<f64> = (0..n - 1).map(|i| (vals[i + 1] - vals[i]) / (ts[i + 1] - ts[i])).collect();
    let mut a3 = ValidationReport::pass(Hypothesis::A3, n, format!("relative second differences >= -1e-10; {range}"));
    for i in 0..slopes.len() - 1 {
        let second = slopes[i + 1] - slopes[i];
        if second < -1e-10 * slopes[i].abs().max(slopes[i + 1].abs()) {
            a3 = ValidationReport::fail(
                Hypothesis::A3,
                n,
                Counterexample { input: vec![ts[i], ts[i + 1], ts[i + 2]], observed: vec![slopes[i], slopes[i + 1]] },
                "t -> A(t^p) is not convex",
            );
            break;
        }
    }
    vec![a1, a2, a3]
}

/// Samples the coercivity `J(u) ≥ C₁‖u‖^β` with `β` the gradient exponent,
/// and the monotonicity-type inequality
/// `(J'(u) − J'(v))(u − v) ≥ C₂(‖u‖^{η−1} − ‖v‖^{η−1})(‖u‖ − ‖v‖)` with `η = β`,
/// on random fields at scales `10^{-2} .. 10^2`. Fitted constants go to the
/// notes.
pub fn check_f3_coercivity<T: Scalar>(model: &ModelSpec<'_, T>, samples: usize, seed: u64) -> ValidationReport {
    let hyp = Hypothesis::F3Coercivity;
    let beta = match *model.kind() {
        ModelKind::PqGeneral { p, .. } | ModelKind::Kirchhoff { p, .. } => p.as_f64(),
        _ => 2.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = model.grid();
    let scale = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-2.0..2.0));
    let mut c1 = f64::INFINITY;
    let mut c2 = f64::INFINITY;
    let mut pairs = 0usize;
    for k in 0..samples {
        let s = scale(&mut rng);
        let u = random_field(grid, &mut rng).scaled(T::lit(s));
        let (j, nu) = match (model.j(&u), model.norm(&u)) {
            (Ok(j), Ok(n)) => (j.as_f64(), n.as_f64()),
            (Err(e), _) | (_, Err(e)) => return ValidationReport::inconclusive(hyp, k, e.to_string()),
        };
        let ratio = j / nu.powf(beta);
        if !(ratio > 0.0) {
            return ValidationReport::fail(
                hyp,
                k + 1,
                Counterexample { input: vec![k as f64, nu], observed: vec![j] },
                format!("J(u) = {j:e} is not positive at ||u|| = {nu:e}"),
            );
        }
        c1 = c1.min(ratio);

        let s2 = scale(&mut rng);
        let v = random_field(grid, &mut rng).scaled(T::lit(s2));
        let (gu, gv, nv) = match (model.j_grad(&u), model.j_grad(&v), model.norm(&v)) {
            (Ok(a), Ok(b), Ok(n)) => (a, b, n.as_f64()),
            _ => continue,
        };
        let lhs = gu.sub(&gv).dot(&u.sub(&v)).as_f64();
        let rhs = (nu.powf(beta - 1.0) - nv.powf(beta - 1.0)) * (nu - nv);
        if rhs > 1e-12 * (nu.powf(beta) + nv.powf(beta)) {
            pairs += 1;
            c2 = c2.min(lhs / rhs);
        }
    }
    let notes = format!("{samples} fields, beta = eta = {beta}; fitted C1 = {c1:e}, C2 = {c2:e} over {pairs} pairs");
    if pairs == 0 || !(c2 > 0.0) {
        ValidationReport::inconclusive(hyp, samples, format!("monotonicity fit degenerate; {notes}"))
    } else {
        ValidationReport::pass(hyp, samples, notes)
    }
}

/// Closed-form and scanned maxima of the Brezis–Nirenberg auxiliary map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnThreshold {
    pub two_star: f64,
    pub max_j: f64,
    pub scan_max: f64,
    pub threshold: f64,
    pub admissible: bool,
}

/// `j(t) = S(Nc)^{2/2*} t² − (2/2*) Nc t^{2*} − 2c`.
pub fn bn_j(n_dim: usize, s_est: f64, c: f64, t: f64) -> f64 {
    let nd = n_dim as f64;
    let ts = 2.0 * nd / (nd - 2.0);
    s_est * (nd * c).powf(2.0 / ts) * t * t - 2.0 / ts * nd * c * t.powf(ts) - 2.0 * c
}

/// Maximum of a smooth unimodal function: log-grid scan, then golden section
/// on the bracketing cell.
fn scan_max(g: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    let ts = log_spaced(lo, hi, points);
    let vals: Vec<f64> = ts.iter().map(|&t| g(t)).collect();
    let best = (0..points).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    let (mut a, mut b) = (ts[best.saturating_sub(1)], ts[(best + 1).min(points - 1)]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (g(x1), g(x2));
    for _ in 0..200 {
        if b - a <= 1e-15 * b {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = g(x1);
        }
    }
    vals[best].max(f1).max(f2)
}

/// `max_{t>0} j(t) = (2/N) S^{N/2} − 2c` and the admissibility test
/// `c < S^{N/2}/N`, cross-checked by a dense scan of `j`.
pub fn bn_threshold(n_dim: usize, s_est: f64, c: f64) -> BnThreshold {
    let nd = n_dim as f64;
    let two_star = 2.0 * nd / (nd - 2.0);
    let threshold = s_est.powf(nd / 2.0) / nd;
    let max_j = 2.0 * (threshold - c);
    let scan_max = if c > 0.0 {
        // the maximizer is t* = (S (Nc)^{2/2*−1})^{1/(2*−2)}; scan eight decades around the unit scale
        let unit = (s_est * (nd * c).powf(2.0 / two_star - 1.0)).powf(1.0 / (two_star - 2.0));
        scan_max(|t| bn_j(n_dim, s_est, c, t), unit * 1e-4, unit * 1e4, 4001)
    } else {
        f64::NAN
    };
    BnThreshold { two_star, max_j, scan_max, threshold, admissible: c < threshold }
}

/// Admissibility of `c` for the Brezis–Nirenberg model as a report.
pub fn check_bn_threshold(n_dim: usize, s_est: f64, c: f64) -> ValidationReport {
    let hyp = Hypothesis::BnThreshold;
    if n_dim < 3 || !(s_est > 0.0) || !(c > 0.0) {
        return ValidationReport::inconclusive(hyp, 0, "needs N >= 3, S > 0 and c > 0");
    }
    let b = bn_threshold(n_dim, s_est, c);
    let notes = format!("max_j = {:e}, scan = {:e}, threshold S^(N/2)/N = {:e}", b.max_j, b.scan_max, b.threshold);
    if b.admissible {
        ValidationReport::pass(hyp, 1, notes)
    } else {
        ValidationReport::fail(hyp, 1, Counterexample { input: vec![n_dim as f64, s_est, c], observed: vec![b.max_j, b.threshold] }, notes)
    }
}

/// Discrete Sobolev quotient `‖∇u‖₂² / ‖u‖_{2*}²`, minimized on the sphere
/// `‖∇u‖₂ = 1` by the reduced-gradient solver.
pub struct SobolevQuotient<'g, T> {
    pub grid: &'g Grid<T>,
    pub two_star: T,
}

impl<T: Scalar> SobolevQuotient<'_, T> {
    pub fn value(&self, u: &Field<T>) -> Result<T> {
        let d = self.grid.dirichlet_energy_p(u, T::lit(2.0), T::zero())?;
        let p = self.grid.lp_norm_pow(u, self.two_star);
        Ok(d / p.powf(T::lit(2.0) / self.two_star))
    }

    pub fn gradient(&self, u: &Field<T>) -> Result<Field<T>> {
        let two = T::lit(2.0);
        let kappa = two / self.two_star;
        let d = self.grid.dirichlet_energy_p(u, two, T::zero())?;
        let p = self.grid.lp_norm_pow(u, self.two_star);
        let pk = p.powf(kappa);
        let mut g = self.grid.dirichlet_energy_p_grad(u, two, T::zero())?;
        g.scale_mut(T::one() / pk);
        let w = self.grid.cell_volume();
        let coef = d * kappa * self.two_star * w / (pk * p);
        let dp = Field::from_vec(u.values().iter().map(|&v| signed_pow(v, self.two_star)).collect());
        g.axpy(-coef, &dp);
        Ok(g)
    }
}

impl<T: Scalar> ReducedProblem<T> for SobolevQuotient<'_, T> {
    fn grid(&self) -> &Grid<T> {
        self.grid
    }
    fn sphere_norm(&self, u: &Field<T>) -> Result<T> {
        Ok(self.grid.dirichlet_energy_p(u, T::lit(2.0), T::zero())?.sqrt())
    }
    fn project(&self, u: &Field<T>) -> Result<Projected<T>> {
        Ok(Projected { t: T::one(), w: u.clone(), value: self.value(u)?, multiplier: None })
    }
    fn reduced_gradient(&self, p: &Projected<T>) -> Result<Field<T>> {
        self.gradient(&p.w)
    }
    fn residual(&self, p: &Projected<T>) -> Result<T> {
        Ok(self.gradient(&p.w)?.euclidean_norm() / self.grid.cell_volume().sqrt())
    }
    fn energy_gap(&self, _p: &Projected<T>) -> Result<Option<T>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevEstimate<T> {
    /// Estimated discrete constant `min ‖∇u‖₂² / ‖u‖_{2*}²`.
    pub value: T,
    pub converged: bool,
    pub iterations: usize,
}

/// Estimate of the best Sobolev constant on the grid. The discrete minimizer
/// concentrates at the mesh scale, so this is an estimate of the continuum
/// constant only.
pub fn sobolev_constant_estimate<T: Scalar>(grid: &Grid<T>, two_star: T, opts: &SolveOptions<T>) -> Result<SobolevEstimate<T>> {
    let q = SobolevQuotient { grid, two_star };
    let r = ground_state(&q, opts)?;
    Ok(SobolevEstimate { value: r.level, converged: r.converged, iterations: r.iterations })
}

/// Settings of the 1D shooting oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootingOptions {
    /// RK4 step.
    pub step: f64,
    /// Relative bisection width on the initial slope.
    pub tol: f64,
    pub slope_min: f64,
    pub slope_max: f64,
    /// Log-spaced slopes scanned for sign changes of `u(1)`.
    pub scan_points: usize,
    /// Number of branches returned.
    pub branches: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions { step: 1e-4, tol: 1e-13, slope_min: 1e-6, slope_max: 1e3, scan_points: 400, branches: 3 }
    }
}

/// A solution of `−u'' = λu + f(u)`, `u(0) = u(1) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingBranch {
    pub lambda: f64,
    pub slope: f64,
    /// Samples of `u` and `u'` at `x_i = i·step`.
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// `Φ_λ(u) = ∫ ½u'² − (λ/2)u² − F(u)`.
    pub energy: f64,
    pub interior_zeros: usize,
}

impl ShootingBranch {
    fn step(&self) -> f64 {
        1.0 / (self.u.len() - 1) as f64
    }

    /// Cubic Hermite interpolant at `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let h = self.step();
        let n = self.u.len() - 1;
        let i = ((x / h).floor() as usize).min(n - 1);
        let s = (x - i as f64 * h) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.u[i] + h10 * h * self.du[i] + h01 * self.u[i + 1] + h11 * h * self.du[i + 1]
    }

    /// Restriction to the nodes of a 1D grid.
    pub fn restrict(&self, grid: &Grid<f64>) -> Result<Field<f64>> {
        if grid.dim() != 1 {
            return Err(crate::error::Error::Config(format!("shooting solutions live on 1D grids, got dim = {}", grid.dim())));
        }
        Ok(grid.sample(|x| self.eval(x[0])))
    }
}

fn rhs(nl: &Nonlinearity<f64>, lambda: f64, u: f64) -> f64 {
    -lambda * u - nl.f(u)
}

/// RK4 from `u(0) = 0`, `u'(0) = slope`; records the path when asked.
fn shoot(nl: &Nonlinearity<f64>, lambda: f64, slope: f64, step: f64, record: bool) -> (f64, Vec<f64>, Vec<f64>) {
    let n = (1.0 / step).round().max(2.0) as usize;
    let h = 1.0 / n as f64;
    let (mut u, mut v) = (0.0, slope);
    let (mut us, mut vs) = if record { (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1)) } else { (Vec::new(), Vec::new()) };
    if record {
        us.push(u);
        vs.push(v);
    }
    for _ in 0..n {
        let k1u = v;
        let k1v = rhs(nl, lambda, u);
        let k2u = v + 0.5 * h * k1v;
        let k2v = rhs(nl, lambda, u + 0.5 * h * k1u);
        let k3u = v + 0.5 * h * k2v;
        let k3v = rhs(nl, lambda, u + 0.5 * h * k2u);
        let k4u = v + h * k3v;
        let k4v = rhs(nl, lambda, u + h * k3u);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if record {
            us.push(u);
            vs.push(v);
        }
    }
    (u, us, vs)
}

fn terminal(nl: &Nonlinearity<f64>, lambda: f64, slope: f64, step: f64) -> f64 {
    shoot(nl, lambda, slope, step, false).0
}

/// Composite Simpson rule; falls back to the trapezoid rule for an odd
/// number of intervals.
fn simpson(y: &[f64], h: f64) -> f64 {
    let n = y.len() - 1;
    if n % 2 == 1 {
        return h * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[n]));
    }
    let mut acc = y[0] + y[n];
    for (i, v) in y.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

fn bisect_slope(nl: &Nonlinearity<f64>, lambda: f64, mut lo: f64, mut hi: f64, opts: &ShootingOptions) -> f64 {
    let mut flo = terminal(nl, lambda, lo, opts.step);
    for _ in 0..200 {
        if hi - lo <= opts.tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = terminal(nl, lambda, mid, opts.step);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn branch(nl: &Nonlinearity<f64>, lambda: f64, slope: f64, step: f64) -> ShootingBranch {
    let (_, u, du) = shoot(nl, lambda, slope, step, true);
    let h = 1.0 / (u.len() - 1) as f64;
    let density: Vec<f64> = u.iter().zip(&du).map(|(&a, &b)| 0.5 * b * b - 0.5 * lambda * a * a - nl.primitive(a)).collect();
    let n = u.len();
    let interior_zeros = (1..n - 2).filter(|&i| u[i] != 0.0 && (u[i] > 0.0) != (u[i + 1] > 0.0)).count();
    ShootingBranch { lambda, slope, energy: simpson(&density, h), interior_zeros, u, du }
}

/// Solves `−u'' = λu + f(u)` on `(0, 1)` with Dirichlet data by shooting on
/// `u'(0) > 0`. Sign changes of `u(1)` over the slope scan are refined by
/// bisection; the first `opts.branches` of them are returned in order of
/// increasing slope. An empty list means no sign change was found.
pub fn shooting_oracle_1d(nonlin: &Nonlinearity<f64>, lambda: f64, opts: &ShootingOptions) -> Vec<ShootingBranch> {
    let slopes = log_spaced(opts.slope_min, opts.slope_max, opts.scan_points.max(2));
    let ends: Vec<f64> = slopes.iter().map(|&a| terminal(nonlin, lambda, a, opts.step)).collect();
    let mut out = Vec::new();
    for i in 0..slopes.len() - 1 {
        if out.len() >= opts.branches {
            break;
        }
        if (ends[i] > 0.0) != (ends[i + 1] > 0.0) {
            let a = bisect_slope(nonlin, lambda, slopes[i], slopes[i + 1], opts);
            out.push(branch(nonlin, lambda, a, opts.step));
        }
    }
    out
}

/// Ground (node-free) branch at `λ`: the first sign change of `u(1)` when
/// the slope grows geometrically from `opts.slope_min`.
fn ground_branch(nl: &Nonlinearity<f64>, lambda: f64, opts: &ShootingOptions) -> Option<ShootingBranch> {
    let factor = 1.05;
    let mut a = opts.slope_min;
    if !(terminal(nl, lambda, a, opts.step) > 0.0) {
        return None;
    }
    while a < 1e12 {
        let b = a * factor;
        let fb = terminal(nl, lambda, b, opts.step);
        if !(fb > 0.0) {
            let s = bisect_slope(nl, lambda, a, b, opts);
            let br = branch(nl, lambda, s, opts.step);
            return (br.interior_zeros == 0).then_some(br);
        }
        a = b;
    }
    None
}

/// Outcome of the prescribed-energy oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Found { lambda: f64, branch: ShootingBranch, evaluations: usize },
    Inconclusive { reason: String },
}

/// Finds `λ` with `Φ_λ(u_λ) = c` on the ground shooting branch by bisection
/// in `λ < π²`, where the branch energy decreases from `+∞` to `0`.
/// Monotonicity is checked along the way; any violation or bracketing
/// failure is reported as inconclusive.
pub fn prescribed_energy_oracle_1d(nonlin: &Nonlinearity<f64>, c: f64, tol: f64, opts: &ShootingOptions) -> OracleOutcome {
    let inconclusive = |reason: String| OracleOutcome::Inconclusive { reason };
    if !(c > 0.0) {
        return inconclusive(format!("the ground-branch oracle needs c > 0, got {c}"));
    }
    let pi2 = std::f64::consts::PI.powi(2);
    let mut evaluations = 0usize;
    let mut energy = |lambda: f64| -> Option<ShootingBranch> {
        evaluations += 1;
        ground_branch(nonlin, lambda, opts)
    };
    // upper end: energy below c
    let mut delta = 1.0;
    let mut hi = None;
    for _ in 0..40 {
        let lam = pi2 - delta;
        match energy(lam) {
            Some(b) if b.energy < c => {
                hi = Some((lam, b));
                break;
            }
            _ => delta *= 0.25,
        }
    }
    let Some((mut lam_hi, mut b_hi)) = hi else {
        return inconclusive("no ground branch with energy below c near the first eigenvalue".into());
    };
    // lower end: energy above c
    let mut width = 1.0;
    let mut lo = None;
    for _ in 0..40 {
        let lam = lam_hi - width;
        match energy(lam) {
            Some(b) if b.energy > c => {
                lo = Some((lam, b));
                break;
            }
            Some(b) if b.energy < b_hi.energy => {
                return inconclusive(format!("branch energy increases in lambda near {lam}"));
            }
            _ => width *= 2.0,
        }
    }
    let Some((mut lam_lo, mut b_lo)) = lo else {
        return inconclusive("could not bracket the prescribed energy from below".into());
    };
    for _ in 0..200 {
        let mid = 0.5 * (lam_lo + lam_hi);
        let Some(b) = energy(mid) else {
            return inconclusive(format!("ground branch lost at lambda = {mid}"));
        };
        if !(b.energy <= b_lo.energy && b.energy >= b_hi.energy) {
            return inconclusive(format!("branch energy not monotone at lambda = {mid}"));
        }
        if (b.energy - c).abs() <= tol * c || lam_hi - lam_lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
            return OracleOutcome::Found { lambda: mid, branch: b, evaluations };
        }
        if b.energy > c {
            lam_lo = mid;
            b_lo = b;
        } else {
            lam_hi = mid;
            b_hi = b;
        }
    }
    inconclusive("bisection on lambda did not reach the tolerance".into())
}

/// `k`-th Dirichlet eigenvalue of `−u''` on `(0, 1)` by shooting on `λ`
/// with `f ≡ 0`, bracketed in `[((k−½)π)², ((k+½)π)²]`.
pub fn linear_eigenvalue_by_shooting(k: usize, step: f64) -> f64 {
    let zero = Nonlinearity::PurePower { r: 2.0 };
    let pi = std::f64::consts::PI;
    let kf = k.max(1) as f64;
    // r = 2 gives f(u) = u; shift λ by one to cancel it
    let g = |lam: f64| terminal(&zero, lam - 1.0, 1.0, step);
    let (mut lo, mut hi) = (((kf - 0.5) * pi).powi(2), ((kf + 0.5) * pi).powi(2));
    let mut glo = g(lo);
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

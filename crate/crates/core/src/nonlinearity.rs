//! Odd scalar nonlinearities `f`, their primitives `F(s) = ∫_0^s f`, and the
//! combinations that appear in the structural hypotheses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::scalar::Scalar;

/// A closed-form odd nonlinearity. Every variant is continuous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity<T> {
    /// `|s|^{r-2} s`
    PurePower { r: T },
    /// `|s|^{p-2} s ln(|s|+1)`
    PowerLog { p: T },
    /// `|s|^{p-1} s / (|s|+1)`
    SaturatedPower { p: T },
    /// Odd extension of `s^β` on `[0,1]` and `s^r` on `[1,∞)`.
    PiecewisePower { beta: T, r: T },
    /// Odd extension of `s^β` on `[0,1]` and `s^{θ-1} ln(s+1)/ln 2` on `[1,∞)`.
    PiecewisePowerLog { beta: T, theta: T },
}

/// Value of `f'` together with a flag set at a junction where `f` has a kink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative<T> {
    pub value: T,
    pub nonsmooth: bool,
}

fn is_integer<T: Scalar>(x: T) -> bool {
    x == x.round() && x.abs() < T::lit(1e6)
}

/// `∫_0^x t^k/(1+t) dt` for `k > -1`, `x ≥ 0`.
fn frac_integral<T: Scalar>(k: T, x: T) -> T {
    let half = T::lit(0.5);
    if x <= half {
        return frac_series(k, x);
    }
    if is_integer(k) && k >= T::zero() {
        let ki = k.to_i64().unwrap_or(0);
        // polynomial division: t^k/(1+t) = Σ_j (-1)^j t^{k-1-j} + (-1)^k/(1+t)
        let mut acc = T::zero();
        for j in 0..ki {
            let e = T::from_i64(ki - j).unwrap();
            let term = x.powf(e) / e;
            acc = if j % 2 == 0 { acc + term } else { acc - term };
        }
        let log = x.ln_1p();
        return if ki % 2 == 0 { acc + log } else { acc - log };
    }
    let k1 = k + T::one();
    let tail = quad::integrate(
        |y: T| (k1 * y).exp() / (T::one() + y.exp()),
        half.ln(),
        x.ln(),
        T::lit(1e-13),
    );
    frac_series(k, half) + tail
}

fn frac_series<T: Scalar>(k: T, x: T) -> T {
    if x == T::zero() {
        return T::zero();
    }
    let mut sum = T::zero();
    let mut pow = x.powf(k + T::one());
    for j in 0..400 {
        let term = pow / (k + T::from_usize_lossy(j + 1));
        sum = if j % 2 == 0 { sum + term } else { sum - term };
        if term.abs() <= T::epsilon() * T::lit(0.1) * sum.abs() {
            break;
        }
        pow = pow * x;
    }
    sum
}

/// `∫_1^x t^θ/(1+t) dt` for integer `θ`, `x ≥ 1`.
fn int_frac_from_one<T: Scalar>(theta: i64, x: T) -> T {
    let two = T::lit(2.0);
    let log_tail = ((T::one() + x) / two).ln();
    if theta >= 0 {
        let mut acc = T::zero();
        for j in 0..theta {
            let e = T::from_i64(theta - j).unwrap();
            let term = (x.powf(e) - T::one()) / e;
            acc = if j % 2 == 0 { acc + term } else { acc - term };
        }
        if theta % 2 == 0 {
            acc + log_tail
        } else {
            acc - log_tail
        }
    } else {
        let m = -theta;
        let mut acc = T::zero();
        for i in 1..=m {
            let piece = if i == 1 {
                x.ln()
            } else {
                let e = T::from_i64(1 - i).unwrap();
                (x.powf(e) - T::one()) / e
            };
            acc = if (m - i) % 2 == 0 { acc + piece } else { acc - piece };
        }
        if m % 2 == 0 {
            acc + log_tail
        } else {
            acc - log_tail
        }
    }
}

/// `∫_1^x t^{θ-1} ln(1+t) dt`, `x ≥ 1`.
fn pow_log_from_one<T: Scalar>(theta: T, x: T) -> T {
    if is_integer(theta) && theta != T::zero() {
        let th = theta.to_i64().unwrap();
        let boundary = x.powf(theta) * x.ln_1p() - T::lit(2.0).ln();
        return (boundary - int_frac_from_one(th, x)) / theta;
    }
    quad::integrate(
        |y: T| (theta * y).exp() * y.exp().ln_1p(),
        T::zero(),
        x.ln(),
        T::lit(1e-13),
    )
}

impl<T: Scalar> Nonlinearity<T> {
    pub fn pure_power(r: T) -> Self {
        Nonlinearity::PurePower { r }
    }

    /// Checks parameter admissibility.
    pub fn validate(&self) -> Result<()> {
        let one = T::one();
        let ok = match *self {
            Nonlinearity::PurePower { r } => r > one,
            Nonlinearity::PowerLog { p } => p > one,
            Nonlinearity::SaturatedPower { p } => p > one,
            Nonlinearity::PiecewisePower { beta, r } => beta > T::zero() && r.is_finite(),
            Nonlinearity::PiecewisePowerLog { beta, theta } => beta > T::zero() && theta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inadmissible nonlinearity parameters: {self:?}")))
        }
    }

    /// `f(s)`.
    pub fn f(&self, s: T) -> T {
        let x = s.abs();
        if x == T::zero() {
            return T::zero();
        }
        let one = T::one();
        let mag = match *self {
            Nonlinearity::PurePower { r } => x.powf(r - one),
            Nonlinearity::PowerLog { p } => x.powf(p - one) * x.ln_1p(),
            Nonlinearity::SaturatedPower { p } => x.powf(p) / (one + x),
            Nonlinearity::PiecewisePower { beta, r } => {
                if x <= one {
                    x.powf(beta)
                } else {
                    x.powf(r)
                }
            }
            Nonlinearity::PiecewisePowerLog { beta, theta } => {
                if x <= one {
                    x.powf(beta)
                } else {
                    x.powf(theta - one) * x.ln_1p() / T::LN_2()
                }
            }
        };
        mag * s.signum()
    }

    /// `F(s) = ∫_0^s f(t) dt`, even in `s`.
    pub fn primitive(&self, s: T) -> T {
        let x = s.abs();
        if x == T::zero() {
            return T::zero();
        }
        let one = T::one();
        match *self {
            Nonlinearity::PurePower { r } => x.powf(r) / r,
            Nonlinearity::PowerLog { p } => {
                // by parts: (x^p/p) ln(1+x) - (1/p) ∫ t^p/(1+t)
                (x.powf(p) * x.ln_1p() - frac_integral(p, x)) / p
            }
            Nonlinearity::SaturatedPower { p } => frac_integral(p, x),
            Nonlinearity::PiecewisePower { beta, r } => {
                let b1 = beta + one;
                if x <= one {
                    x.powf(b1) / b1
                } else if r == -one {
                    one / b1 + x.ln()
                } else {
                    one / b1 + (x.powf(r + one) - one) / (r + one)
                }
            }
            Nonlinearity::PiecewisePowerLog { beta, theta } => {
                let b1 = beta + one;
                if x <= one {
                    x.powf(b1) / b1
                } else {
                    one / b1 + pow_log_from_one(theta, x) / T::LN_2()
                }
            }
        }
    }

    /// True when the primitive falls back to numerical quadrature (exponents
    /// without an elementary antiderivative).
    pub fn primitive_uses_quadrature(&self) -> bool {
        match *self {
            Nonlinearity::PurePower { .. } | Nonlinearity::PiecewisePower { .. } => false,
            Nonlinearity::PowerLog { p } | Nonlinearity::SaturatedPower { p } => !is_integer(p),
            Nonlinearity::PiecewisePowerLog { theta, .. } => !is_integer(theta) || theta == T::zero(),
        }
    }

    /// `s f(s) - α F(s)`.
    pub fn g_alpha(&self, s: T, alpha: T) -> T {
        s * self.f(s) - alpha * self.primitive(s)
    }

    /// `f'(s)`; at the junction `|s| = 1` of the piecewise variants the
    /// right-hand derivative is returned with `nonsmooth` set.
    pub fn fprime(&self, s: T) -> Result<Derivative<T>> {
        let x = s.abs();
        let one = T::one();
        let zero = T::zero();
        let smooth = |value| Ok(Derivative { value, nonsmooth: false });
        let singular = || Err(Error::Domain(format!("f' is not defined at s = {s} for {self:?}")));
        match *self {
            Nonlinearity::PurePower { r } => {
                if x == zero {
                    if r > T::lit(2.0) {
                        smooth(zero)
                    } else if r == T::lit(2.0) {
                        smooth(one)
                    } else {
                        singular()
                    }
                } else {
                    smooth((r - one) * x.powf(r - T::lit(2.0)))
                }
            }
            Nonlinearity::PowerLog { p } => {
                if x == zero {
                    return smooth(zero);
                }
                smooth((p - one) * x.powf(p - T::lit(2.0)) * x.ln_1p() + x.powf(p - one) / (one + x))
            }
            Nonlinearity::SaturatedPower { p } => {
                if x == zero {
                    return smooth(zero);
                }
                let d = one + x;
                smooth((p * x.powf(p - one) * d - x.powf(p)) / (d * d))
            }
            Nonlinearity::PiecewisePower { beta, r } => {
                if x < one {
                    if x == zero {
                        if beta > one {
                            smooth(zero)
                        } else if beta == one {
                            smooth(one)
                        } else {
                            singular()
                        }
                    } else {
                        smooth(beta * x.powf(beta - one))
                    }
                } else {
                    Ok(Derivative { value: r * x.powf(r - one), nonsmooth: x == one && beta != r })
                }
            }
            Nonlinearity::PiecewisePowerLog { beta, theta } => {
                if x < one {
                    if x == zero {
                        if beta > one {
                            smooth(zero)
                        } else if beta == one {
                            smooth(one)
                        } else {
                            singular()
                        }
                    } else {
                        smooth(beta * x.powf(beta - one))
                    }
                } else {
                    let v = ((theta - one) * x.powf(theta - T::lit(2.0)) * x.ln_1p() + x.powf(theta - one) / (one + x))
                        / T::LN_2();
                    Ok(Derivative { value: v, nonsmooth: x == one })
                }
            }
        }
    }

    /// Declared constants `(C, r)` with `|f(s)| ≤ C(1 + |s|^{r-1})`.
    pub fn growth_bound(&self) -> (T, T) {
        let one = T::one();
        let half = T::lit(0.5);
        match *self {
            Nonlinearity::PurePower { r } => (one, r),
            // ln(1+x) ≤ √x
            Nonlinearity::PowerLog { p } => (one, p + half),
            Nonlinearity::SaturatedPower { p } => (one, p),
            Nonlinearity::PiecewisePower { r, .. } => (one, (r + one).max(T::lit(2.0))),
            Nonlinearity::PiecewisePowerLog { theta, .. } => (one / T::LN_2(), (theta + half).max(T::lit(1.5))),
        }
    }

    /// `∫ F(u) h^dim` over a nodal field.
    pub(crate) fn integral_primitive(&self, values: &[T], weight: T) -> T {
        values.iter().map(|&v| self.primitive(v)).sum::<T>() * weight
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_variants() -> Vec<Nonlinearity<f64>> {
        vec![
            Nonlinearity::PurePower { r: 4.0 },
            Nonlinearity::PurePower { r: 2.5 },
            Nonlinearity::PowerLog { p: 3.0 },
            Nonlinearity::PowerLog { p: 2.5 },
            Nonlinearity::SaturatedPower { p: 3.0 },
            Nonlinearity::SaturatedPower { p: 2.3 },
            Nonlinearity::PiecewisePower { beta: 0.5, r: -1.0 },
            Nonlinearity::PiecewisePower { beta: 1.0, r: 3.0 },
            Nonlinearity::PiecewisePower { beta: 2.0, r: -0.5 },
            Nonlinearity::PiecewisePowerLog { beta: 1.5, theta: 0.5 },
            Nonlinearity::PiecewisePowerLog { beta: 1.5, theta: -1.0 },
            Nonlinearity::PiecewisePowerLog { beta: 0.7, theta: -2.0 },
            Nonlinearity::PiecewisePowerLog { beta: 1.0, theta: 1.0 },
        ]
    }

    /// Independent adaptive Simpson oracle for ∫_a^b f.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 60)
    }

    #[test]
    fn f_examples() {
        assert_eq!(Nonlinearity::PurePower { r: 4.0 }.f(2.0), 8.0);
        let pw = Nonlinearity::PiecewisePower { beta: 0.5, r: -1.0 };
        assert_eq!(pw.f(1.0), 1.0);
        assert_relative_eq!(pw.f(1.0 - 1e-12), 1.0, max_relative = 1e-11);
        assert_relative_eq!(pw.f(1.0 + 1e-12), 1.0, max_relative = 1e-11);
        let pl = Nonlinearity::PiecewisePowerLog { beta: 2.0, theta: -0.5 };
        assert_relative_eq!(pl.f(1.0 + 1e-12), 1.0, max_relative = 1e-11);
        for v in all_variants() {
            assert_eq!(v.f(0.0), 0.0);
        }
    }

    #[test]
    fn primitive_examples() {
        assert_relative_eq!(Nonlinearity::PurePower { r: 4.0 }.primitive(2.0), 4.0, max_relative = 1e-15);
        let pw = Nonlinearity::PiecewisePower { beta: 1.0, r: 3.0 };
        assert_relative_eq!(pw.primitive(2.0), 4.25, max_relative = 1e-15);
        let oracle = 0.5 + simpson(&|t| t.powi(3), 1.0, 2.0, 1e-13);
        assert_relative_eq!(pw.primitive(2.0), oracle, max_relative = 1e-12);
    }

    #[test]
    fn g_alpha_examples() {
        let pp = Nonlinearity::PurePower { r: 4.0 };
        assert_relative_eq!(pp.g_alpha(2.0, 2.0), 8.0, max_relative = 1e-15);
        let mut prev = 0.0;
        for k in 1..200 {
            let s = k as f64 * 0.05;
            let g = pp.g_alpha(s, 2.0);
            assert_relative_eq!(g, 0.5 * s.powi(4), max_relative = 1e-13);
            assert!(g > prev);
            prev = g;
        }
        for v in all_variants() {
            assert_eq!(v.g_alpha(0.0, 1.7), 0.0);
        }
    }

    #[test]
    fn fprime_examples() {
        let pp = Nonlinearity::PurePower { r: 4.0 };
        assert_relative_eq!(pp.fprime(2.0).unwrap().value, 12.0, max_relative = 1e-15);
        let sat = Nonlinearity::SaturatedPower { p: 3.0f64 };
        assert_eq!(sat.fprime(0.0).unwrap().value, 0.0);
        assert!(sat.fprime(1e-8).unwrap().value.abs() < 1e-15);
        assert!(Nonlinearity::PurePower { r: 1.5 }.fprime(0.0).is_err());
        assert!(Nonlinearity::PiecewisePower { beta: 0.5, r: 2.0 }.fprime(0.0).is_err());
        let junction = Nonlinearity::PiecewisePower { beta: 0.5, r: 3.0 }.fprime(1.0).unwrap();
        assert!(junction.nonsmooth);
        assert_eq!(junction.value, 3.0);
        assert!(Nonlinearity::PiecewisePowerLog { beta: 0.5, theta: 0.5 }.fprime(-1.0).unwrap().nonsmooth);
    }

    #[test]
    fn fprime_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for v in all_variants() {
            for _ in 0..100 {
                let mut s: f64 = rng.random_range(-4.0..4.0);
                if (s.abs() - 1.0).abs() < 1e-3 || s.abs() < 1e-3 {
                    s += 0.01;
                }
                let step = 1e-6 * s.abs().max(1e-3);
                let fd = (v.f(s + step) - v.f(s - step)) / (2.0 * step);
                let an = v.fprime(s).unwrap().value;
                assert!((fd - an).abs() <= 1e-7 * an.abs().max(1.0), "{v:?} at {s}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn primitive_is_exact_antiderivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for v in all_variants() {
            for _ in 0..100 {
                let a: f64 = rng.random_range(-5.0..5.0);
                let b: f64 = rng.random_range(-5.0..5.0);
                // split at the kinks so the oracle sees smooth pieces
                let (lo, hi) = (a.min(b), a.max(b));
                let mut cuts = vec![lo, hi];
                for k in [-1.0, 0.0, 1.0] {
                    if k > lo && k < hi {
                        cuts.push(k);
                    }
                }
                cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
                let mut oracle = 0.0;
                for w in cuts.windows(2) {
                    oracle += simpson(&|t| v.f(t), w[0], w[1], 1e-14);
                }
                if b < a {
                    oracle = -oracle;
                }
                let diff = v.primitive(b) - v.primitive(a);
                let scale = oracle.abs().max(v.primitive(a).abs().max(v.primitive(b).abs()) * 1e-6).max(1e-12);
                assert!((diff - oracle).abs() <= 1e-9 * scale, "{v:?} on [{a}, {b}]: {diff} vs {oracle}");
            }
        }
    }

    #[test]
    fn primitive_small_and_large_arguments() {
        // series branch, closed-form branch and quadrature branch agree with Simpson
        for v in [
            Nonlinearity::PowerLog { p: 3.0 },
            Nonlinearity::SaturatedPower { p: 2.3 },
            Nonlinearity::PowerLog { p: 2.5 },
        ] {
            for x in [1e-4, 0.3, 0.5, 0.7, 3.0, 40.0] {
                let oracle = simpson(&|t| v.f(t), 0.0, x, 1e-16 * x);
                assert_relative_eq!(v.primitive(x), oracle, max_relative = 1e-9);
            }
        }
        assert!(Nonlinearity::PowerLog { p: 2.5 }.primitive_uses_quadrature());
        assert!(!Nonlinearity::PowerLog { p: 3.0 }.primitive_uses_quadrature());
        assert!(Nonlinearity::PiecewisePowerLog { beta: 1.0, theta: 0.5 }.primitive_uses_quadrature());
        assert!(!Nonlinearity::PiecewisePowerLog { beta: 1.0, theta: -1.0 }.primitive_uses_quadrature());
    }

    #[test]
    fn oddness_and_evenness() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for v in all_variants() {
            for _ in 0..100 {
                let s: f64 = rng.random_range(-10.0..10.0);
                assert_eq!(v.f(-s), -v.f(s));
                assert_eq!(v.primitive(-s), v.primitive(s));
            }
        }
    }

    #[test]
    fn declared_growth_bound_holds() {
        for v in all_variants() {
            let (c, r) = v.growth_bound();
            assert!(r > 1.0);
            for k in 0..=240 {
                let s = 10f64.powf(-6.0 + 12.0 * k as f64 / 240.0);
                assert!(v.f(s).abs() <= c * (1.0 + s.powf(r - 1.0)) * (1.0 + 1e-12), "{v:?} at {s}");
            }
        }
    }

    #[test]
    fn validation_rejects_bad_exponents() {
        assert!(Nonlinearity::PurePower { r: 1.0 }.validate().is_err());
        assert!(Nonlinearity::PiecewisePower { beta: 0.0, r: 2.0 }.validate().is_err());
        assert!(Nonlinearity::PurePower { r: 4.0 }.validate().is_ok());
    }

    #[test]
    fn config_tag_round_trip() {
        let v: Nonlinearity<f64> = serde_json::from_str(r#"{"kind":"pure_power","r":4.0}"#).unwrap();
        assert_eq!(v, Nonlinearity::PurePower { r: 4.0 });
    }
}

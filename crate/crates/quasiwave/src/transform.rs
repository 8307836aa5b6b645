//! The dual-variational change of variables `u = f(v)`.
//!
//! `f` is the odd, strictly increasing solution of `f'(t) = 1/sqrt(1 + 2 f^2(t))`,
//! `f(0) = 0`. Its inverse has the closed form
//!
//! ```text
//! F(u) = u sqrt(1 + 2 u^2) / 2 + asinh(sqrt(2) u) / (2 sqrt(2)),
//! ```
//!
//! since `F'(u) = sqrt(1 + 2 u^2)`. Forward evaluation inverts `F` with a
//! bracketed, safeguarded Newton iteration; beyond `asymptotic_switch` the
//! inverted two-term large-argument expansion of `F` is used instead.

use crate::error::{QwError, Result};
use serde::Serialize;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Evaluator for `f`, its derivatives and its inverse.
#[derive(Debug, Clone)]
pub struct TransformTable {
    /// Relative tolerance for the Newton inversion.
    pub newton_tol: f64,
    /// Iteration cap for the Newton inversion.
    pub max_newton_iter: usize,
    /// |t| threshold above which the large-argument series for `f` is used.
    pub asymptotic_switch: f64,
}

impl Default for TransformTable {
    fn default() -> Self {
        TransformTable {
            newton_tol: 1e-13,
            max_newton_iter: 80,
            asymptotic_switch: 1e8,
        }
    }
}

/// `F(u) = f^{-1}(u)` in closed form. Odd in `u`.
pub fn f_inverse(u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(QwError::Domain(format!("f_inverse: non-finite input {u}")));
    }
    let a = u.abs();
    let val = a * (1.0 + 2.0 * a * a).sqrt() / 2.0 + (SQRT2 * a).asinh() / (2.0 * SQRT2);
    Ok(val.copysign(u))
}

impl TransformTable {
    /// `f(t)`: solves `F(u) = |t|` and applies the sign of `t`.
    pub fn f(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(QwError::Domain(format!("f: non-finite input {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let a = t.abs();
        let u = if a >= self.asymptotic_switch {
            self.f_asymptotic(a)
        } else {
            self.f_newton(a)?
        };
        Ok(u.copysign(t))
    }

    // Large-argument branch: F(u) = u^2/sqrt(2) + sqrt(2)/8 + ln(2 sqrt(2) u)/(2 sqrt(2)) + O(u^-2),
    // inverted by fixed-point refinement of u^2.
    fn f_asymptotic(&self, t: f64) -> f64 {
        let mut u = SQRT2.sqrt() * t.sqrt();
        for _ in 0..3 {
            let corr = SQRT2 / 8.0 + (2.0 * SQRT2 * u).ln() / (2.0 * SQRT2);
            u = (SQRT2 * (t - corr)).sqrt();
        }
        u
    }

    // Safeguarded Newton on F(u) = t for t > 0. The bracket
    // [0, min(t, 2^{1/4} sqrt(t))] is guaranteed since |f(t)| <= t and
    // |f(t)| <= 2^{1/4} |t|^{1/2}.
    fn f_newton(&self, t: f64) -> Result<f64> {
        let cap = t.min(SQRT2.sqrt() * t.sqrt());
        let mut lo = 0.0f64;
        let mut hi = cap;
        let mut u = if t <= 1.0 { t } else { SQRT2.sqrt() * t.sqrt() };
        for _ in 0..self.max_newton_iter {
            let res = f_inverse(u)? - t;
            if res > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            if res.abs() <= 0.25 * self.newton_tol * t.max(1.0) {
                return Ok(u);
            }
            let fp = (1.0 + 2.0 * u * u).sqrt();
            let mut next = u - res / fp;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - u).abs() <= f64::EPSILON * u.abs() {
                return Ok(next);
            }
            u = next;
        }
        // F' >= 1, so the residual bounds the error directly.
        let res = (f_inverse(u)? - t).abs();
        if res <= self.newton_tol * t.max(1.0) {
            Ok(u)
        } else {
            Err(QwError::Numeric(format!(
                "f: Newton failed to converge at t = {t} (residual {res:.3e})"
            )))
        }
    }

    /// `f'(t) = 1/sqrt(1 + 2 f^2(t))`, an even function with values in (0, 1].
    pub fn f_prime(&self, t: f64) -> Result<f64> {
        let u = self.f(t)?;
        Ok(1.0 / (1.0 + 2.0 * u * u).sqrt())
    }

    /// `f''(t) = -2 f(t) f'(t) / (1 + 2 f^2(t))^{3/2}`, odd and bounded.
    pub fn f_second(&self, t: f64) -> Result<f64> {
        let u = self.f(t)?;
        let q = 1.0 + 2.0 * u * u;
        Ok(-2.0 * u / (q * q))
    }

    /// Both `f` and `f'` from a single inversion.
    pub fn f_and_prime(&self, t: f64) -> Result<(f64, f64)> {
        let u = self.f(t)?;
        Ok((u, 1.0 / (1.0 + 2.0 * u * u).sqrt()))
    }
}

/// One verified inequality: its worst relative slack over the sample set and
/// where it was attained. Slack >= 0 means the inequality held.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyItem {
    pub name: String,
    pub pass: bool,
    pub worst_slack: f64,
    pub worst_at: f64,
}

impl PropertyItem {
    fn from_scan(name: &str, scan: SlackScan, tol: f64) -> Self {
        PropertyItem {
            name: name.to_string(),
            pass: scan.worst >= -tol,
            worst_slack: scan.worst,
            worst_at: scan.at,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SlackScan {
    worst: f64,
    at: f64,
}

impl SlackScan {
    fn new() -> Self {
        SlackScan {
            worst: f64::INFINITY,
            at: f64::NAN,
        }
    }
    fn push(&mut self, slack: f64, at: f64) {
        if slack < self.worst {
            self.worst = slack;
            self.at = at;
        }
    }
}

/// Verification report for the structural inequalities of the transform.
#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub items: Vec<PropertyItem>,
    /// Empirical lower-bound constant for |f(t)| >= kappa |t| (|t| <= 1) and
    /// |f(t)| >= kappa |t|^{1/2} (|t| >= 1). Sharp value is f(1).
    pub kappa_hat: f64,
    /// Scaling factor lambda used for the f^2(lambda t) <= C f^2(t) check.
    pub lambda: f64,
    /// Empirical sup of f^2(lambda t) / f^2(t); bounded by max(lambda, lambda^2).
    pub c_lambda_hat: f64,
    pub all_pass: bool,
}

/// Checks the pointwise inequalities satisfied by `f` over a sample set:
/// |f| <= |t|, 0 < f' <= 1, f/2 <= f' t <= f (t > 0), f^2 >= f f' t,
/// |f| <= 2^{1/4}|t|^{1/2}, the two-branch lower bound with constant kappa,
/// and f^2(lambda t) <= C_lambda f^2(t) with C_lambda = max(lambda, lambda^2).
pub fn verify_p1(table: &TransformTable, samples: &[f64], lambda: f64) -> Result<PropertyReport> {
    if samples.is_empty() {
        return Err(QwError::Domain("verify_p1: empty sample set".into()));
    }
    let tol = 1e-12;
    let mut bound = SlackScan::new(); // |f| <= |t| and f' in (0,1]
    let mut ratio_lo = SlackScan::new(); // f' t - f/2 >= 0
    let mut ratio_hi = SlackScan::new(); // f - f' t >= 0
    let mut convexity = SlackScan::new(); // f^2 - f f' t >= 0
    let mut sqrt_cap = SlackScan::new(); // 2^{1/4} |t|^{1/2} - |f| >= 0
    let mut kappa_hat = f64::INFINITY;
    let mut c_hat = 0.0f64;
    let mut c_scan = SlackScan::new();
    let c_cap = lambda.max(lambda * lambda);

    for &t in samples {
        if !t.is_finite() {
            return Err(QwError::Domain(format!("verify_p1: non-finite sample {t}")));
        }
        let (u, fp) = table.f_and_prime(t)?;
        let a = t.abs();
        let fa = u.abs();
        if a > 0.0 {
            bound.push((a - fa) / a, t);
        }
        bound.push(1.0 - fp, t);
        bound.push(if fp > 0.0 { 0.0 } else { -1.0 }, t);
        if t > 0.0 {
            // item (3), relative to f(t)
            ratio_lo.push((fp * t - 0.5 * u) / u.max(f64::MIN_POSITIVE), t);
            ratio_hi.push((u - fp * t) / u.max(f64::MIN_POSITIVE), t);
        }
        // item (4)
        let uu = u * u;
        if uu > 0.0 {
            convexity.push((uu - u * fp * t) / uu, t);
        }
        if a > 0.0 {
            let cap = SQRT2.sqrt() * a.sqrt();
            sqrt_cap.push((cap - fa) / cap, t);
            // item (5): branch ratio
            let r = if a <= 1.0 { fa / a } else { fa / a.sqrt() };
            kappa_hat = kappa_hat.min(r);
            // item (6)
            let fl = table.f(lambda * a)?;
            let ratio = (fl * fl) / uu.max(f64::MIN_POSITIVE);
            c_hat = c_hat.max(ratio);
            c_scan.push((c_cap - ratio) / c_cap, t);
        }
    }

    let items = vec![
        PropertyItem::from_scan("p1.2: |f(t)| <= |t|, 0 < f'(t) <= 1", bound, 0.0),
        PropertyItem::from_scan("p1.3: f(t)/2 <= f'(t) t", ratio_lo, tol),
        PropertyItem::from_scan("p1.3: f'(t) t <= f(t)", ratio_hi, tol),
        PropertyItem::from_scan("p1.4: f^2(t) >= f(t) f'(t) t", convexity, tol),
        PropertyItem::from_scan("p1.4: |f(t)| <= 2^{1/4} |t|^{1/2}", sqrt_cap, tol),
        PropertyItem {
            name: "p1.5: |f(t)| >= kappa |t| (|t|<=1), kappa |t|^{1/2} (|t|>=1)".into(),
            pass: kappa_hat > 0.0,
            worst_slack: kappa_hat,
            worst_at: f64::NAN,
        },
        PropertyItem::from_scan(
            "p1.6: f^2(lambda t) <= max(lambda, lambda^2) f^2(t)",
            c_scan,
            tol,
        ),
    ];
    let all_pass = items.iter().all(|i| i.pass);
    Ok(PropertyReport {
        items,
        kappa_hat,
        lambda,
        c_lambda_hat: c_hat,
        all_pass,
    })
}

/// Outcome of the shifted-nonlinearity inequality check
/// `g(f(s)) f'(s) s >= g(f(s)) f(s) / 2`.
#[derive(Debug, Clone, Serialize)]
pub struct L0Report {
    /// False when the precondition g(s) s >= 0 fails somewhere on the samples;
    /// the inequality is then not applicable rather than violated.
    pub applicable: bool,
    pub pass: bool,
    pub worst_slack: f64,
    pub worst_at: f64,
}

/// Pointwise check of the sign inequality used to control `<Phi'(v), v>`.
/// `g_shift` must satisfy `g_shift(s) s >= 0`; this is checked first.
pub fn verify_l0<G: Fn(f64) -> f64>(
    table: &TransformTable,
    g_shift: G,
    samples: &[f64],
) -> Result<L0Report> {
    let tol = 1e-12;
    for &s in samples {
        if g_shift(s) * s < 0.0 {
            return Ok(L0Report {
                applicable: false,
                pass: false,
                worst_slack: f64::NAN,
                worst_at: s,
            });
        }
    }
    let mut scan = SlackScan::new();
    for &s in samples {
        let (u, fp) = table.f_and_prime(s)?;
        let gv = g_shift(u);
        let lhs = gv * fp * s;
        let rhs = 0.5 * gv * u;
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        scan.push((lhs - rhs) / scale, s);
    }
    Ok(L0Report {
        applicable: true,
        pass: scan.worst >= -tol,
        worst_slack: scan.worst,
        worst_at: scan.at,
    })
}

/// Log-spaced samples of both signs covering |t| in [lo, hi].
pub fn log_spaced_samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let half = count / 2;
    let mut out = Vec::with_capacity(2 * half);
    let (lo, hi) = (lo.ln(), hi.ln());
    for i in 0..half {
        let t = (lo + (hi - lo) * i as f64 / (half - 1) as f64).exp();
        out.push(t);
        out.push(-t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> TransformTable {
        TransformTable::default()
    }

    // Independent oracle: RK4 integration of f'(t) = 1/sqrt(1 + 2 f^2).
    fn f_rk4(t: f64, step: f64) -> f64 {
        let a = t.abs();
        let n = (a / step).ceil() as usize;
        let h = a / n as f64;
        let rhs = |f: f64| 1.0 / (1.0 + 2.0 * f * f).sqrt();
        let mut f = 0.0;
        for _ in 0..n {
            let k1 = rhs(f);
            let k2 = rhs(f + 0.5 * h * k1);
            let k3 = rhs(f + 0.5 * h * k2);
            let k4 = rhs(f + h * k3);
            f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        f.copysign(t)
    }

    #[test]
    fn f_inverse_at_zero_and_one() {
        assert_eq!(f_inverse(0.0).unwrap(), 0.0);
        // high-accuracy quadrature of int_0^1 sqrt(1 + 2 s^2) ds
        // = sqrt(3)/2 + asinh(sqrt(2))/(2 sqrt(2)) = 1.271282...
        let expect = 3.0f64.sqrt() / 2.0 + SQRT2.asinh() / (2.0 * SQRT2);
        assert!((f_inverse(1.0).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 1.2712).abs() < 1e-3);
    }

    #[test]
    fn f_inverse_large_argument_growth() {
        // F(u)/u^2 -> 1/sqrt(2)
        let u = 1e6;
        let r = f_inverse(u).unwrap() / (u * u);
        assert!((r - 1.0 / SQRT2).abs() < 1e-6 / SQRT2);
    }

    #[test]
    fn f_inverse_is_odd_and_increasing() {
        for &u in &[1e-8, 1e-3, 0.5, 1.0, 7.0, 1e4] {
            assert_eq!(f_inverse(-u).unwrap(), -f_inverse(u).unwrap());
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..200 {
            let u = -10.0 + i as f64 * 0.1;
            let v = f_inverse(u).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn f_matches_rk4_oracle() {
        let tt = table();
        for &t in &[0.1, 0.5, 1.0, 2.0, 5.0, -3.0] {
            let oracle = f_rk4(t, 1e-4);
            assert!(
                (tt.f(t).unwrap() - oracle).abs() < 1e-10,
                "t={t}: {} vs {}",
                tt.f(t).unwrap(),
                oracle
            );
        }
    }

    #[test]
    fn f_basic_values() {
        let tt = table();
        assert_eq!(tt.f(0.0).unwrap(), 0.0);
        // frozen from the RK4 oracle (step 1e-5)
        let f1 = tt.f(1.0).unwrap();
        assert!((f1 - f_rk4(1.0, 1e-5)).abs() < 1e-11);
        assert!((f1 - 0.8344).abs() < 1e-4);
    }

    #[test]
    fn f_asymptotic_regime() {
        let tt = table();
        let t = 1e8;
        let r = tt.f(t).unwrap() / (SQRT2.sqrt() * t.sqrt());
        assert!((r - 1.0).abs() < 1e-3);
        // continuity across the switch
        let below = tt.f(tt.asymptotic_switch * (1.0 - 1e-9)).unwrap();
        let above = tt.f(tt.asymptotic_switch * (1.0 + 1e-9)).unwrap();
        assert!((below - above).abs() / below < 1e-8);
    }

    #[test]
    fn f_prime_values() {
        let tt = table();
        assert_eq!(tt.f_prime(0.0).unwrap(), 1.0);
        let f1 = tt.f(1.0).unwrap();
        let expect = 1.0 / (1.0 + 2.0 * f1 * f1).sqrt();
        assert!((tt.f_prime(1.0).unwrap() - expect).abs() < 1e-15);
        // even, bounded by 1 on log-spaced samples
        for &t in &log_spaced_samples(1e-8, 1e6, 10_000) {
            let p = tt.f_prime(t).unwrap();
            assert!(p > 0.0 && p <= 1.0);
            assert_eq!(p, tt.f_prime(-t).unwrap());
        }
    }

    #[test]
    fn f_second_is_fd_of_f_prime() {
        let tt = table();
        assert_eq!(tt.f_second(0.0).unwrap(), 0.0);
        let h = 1e-5;
        for &t in &[0.5, 1.0, 5.0] {
            let fd = (tt.f_prime(t + h).unwrap() - tt.f_prime(t - h).unwrap()) / (2.0 * h);
            assert!((tt.f_second(t).unwrap() - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn f_second_bounded_odd() {
        let tt = table();
        let mut sup = 0.0f64;
        let mut at = 0.0;
        for &t in &log_spaced_samples(1e-6, 1e6, 100_000) {
            let s = tt.f_second(t).unwrap();
            assert_eq!(s, -tt.f_second(-t).unwrap());
            if s.abs() > sup {
                sup = s.abs();
                at = t.abs();
            }
        }
        assert!(sup.is_finite() && sup > 0.0);
        // the sup is attained at moderate |t|, not in either tail
        assert!(at > 1e-3 && at < 1e3, "sup at {at}");
    }

    #[test]
    fn round_trip_inversion() {
        let tt = table();
        for &t in &log_spaced_samples(1e-8, 1e7, 2000) {
            let u = tt.f(t).unwrap();
            let back = f_inverse(u).unwrap();
            assert!(
                (back - t).abs() <= tt.newton_tol * t.abs().max(1.0),
                "t={t} back={back}"
            );
        }
    }

    #[test]
    fn p1_report_passes() {
        let tt = table();
        let mut samples = log_spaced_samples(1e-8, 1e8, 20_000);
        samples.push(1.0); // both branches of the kappa bound are sharp at t = 1
        let rep = verify_p1(&tt, &samples, 2.0).unwrap();
        assert!(rep.all_pass, "{:#?}", rep.items);
        // kappa_hat -> f(1); C_2 -> 4 attained in the small-t regime
        let f1 = tt.f(1.0).unwrap();
        assert!((rep.kappa_hat - f1).abs() < 1e-6);
        assert!(rep.c_lambda_hat <= 4.0 + 1e-12 && rep.c_lambda_hat > 4.0 - 1e-6);
    }

    #[test]
    fn p1_item3_spot_checks() {
        let tt = table();
        for &t in &[1e-6, 1.0, 1e6] {
            let (u, fp) = tt.f_and_prime(t).unwrap();
            assert!(fp * t >= 0.5 * u - 1e-12 * u);
            assert!(fp * t <= u + 1e-12 * u);
        }
    }

    #[test]
    fn l0_holds_for_shifted_power() {
        let tt = table();
        let g = |t: f64| t.powi(5) + 6.0 * t;
        let samples = [0.0, 0.5, -0.5, 2.0, -2.0, 50.0, -50.0];
        let rep = verify_l0(&tt, g, &samples).unwrap();
        assert!(rep.applicable && rep.pass, "{rep:?}");
    }

    #[test]
    fn l0_linear_reduces_to_p1_item3() {
        let tt = table();
        let samples = log_spaced_samples(1e-6, 1e3, 10_000);
        let rep = verify_l0(&tt, |t| t, &samples).unwrap();
        assert!(rep.applicable && rep.pass, "{rep:?}");
    }

    #[test]
    fn l0_not_applicable_for_sign_violating_g() {
        let tt = table();
        let rep = verify_l0(&tt, |t| -t, &[1.0, 2.0]).unwrap();
        assert!(!rep.applicable);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let tt = table();
        assert!(tt.f(f64::NAN).is_err());
        assert!(tt.f(f64::INFINITY).is_err());
        assert!(f_inverse(f64::NAN).is_err());
    }
}

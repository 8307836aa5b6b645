//! Problem data: the potential `V`, the nonlinearity `g`, the frequency-shift
//! constant `m`, and executable checks of the standing-wave hypotheses
//! (boundedness/confinement of `V`, growth and superlinearity of `g`, the
//! vanishing local slope of `g`, and the shifted-data inequality).

use crate::error::{QwError, Result};
use crate::grid::Grid;
use serde::{Deserialize, Serialize};

/// Potential profile. Builtins are radial (functions of |x|); tabulated
/// potentials are interpolated linearly between nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential {
    /// V(x) = x^2 - omega
    ShiftedHarmonic { omega: f64 },
    /// V(x) = x^4 - omega
    ShiftedQuartic { omega: f64 },
    /// Piecewise-linear table over |x|.
    Table { nodes: Vec<f64>, values: Vec<f64> },
}

impl Potential {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::ShiftedHarmonic { omega } => x * x - omega,
            Potential::ShiftedQuartic { omega } => x.powi(4) - omega,
            Potential::Table { nodes, values } => {
                let r = x.abs();
                if r <= nodes[0] {
                    return values[0];
                }
                if r >= *nodes.last().unwrap() {
                    return *values.last().unwrap();
                }
                let j = nodes.partition_point(|&p| p < r).max(1);
                let (a, b) = (nodes[j - 1], nodes[j]);
                let t = (r - a) / (b - a);
                values[j - 1] * (1.0 - t) + values[j] * t
            }
        }
    }

    /// Known lower bound for the builtin profiles.
    pub fn declared_inf(&self) -> f64 {
        match self {
            Potential::ShiftedHarmonic { omega } => -omega,
            Potential::ShiftedQuartic { omega } => -omega,
            Potential::Table { values, .. } => {
                values.iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Same profile family at a different frequency shift (continuation).
    pub fn with_omega(&self, omega: f64) -> Result<Potential> {
        match self {
            Potential::ShiftedHarmonic { .. } => Ok(Potential::ShiftedHarmonic { omega }),
            Potential::ShiftedQuartic { .. } => Ok(Potential::ShiftedQuartic { omega }),
            Potential::Table { .. } => Err(QwError::Config(
                "tabulated potentials have no frequency parameter to continue in".into(),
            )),
        }
    }

    pub fn nodal(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes.iter().map(|&x| self.eval(x)).collect()
    }

    pub fn min_on_grid(&self, grid: &Grid) -> f64 {
        self.nodal(grid).into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Nonlinearity g with primitive G. The builtin power family is
/// `g(t) = |t|^{p-2} t`, `G(t) = |t|^p / p`, odd, with superlinearity
/// constant mu = p and growth constant C = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NonlinearityKind {
    Power,
    /// For hypothesis-failure tests: g = 0.
    Zero,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Nonlinearity {
    pub kind: NonlinearityKind,
    /// Growth exponent p.
    pub p: f64,
    /// Superlinearity constant mu (> 4 required by the hypotheses).
    pub mu: f64,
    /// Growth constant C in |g(t)| <= C (|t| + |t|^{p-1}).
    pub growth_c: f64,
    pub odd: bool,
}

impl Nonlinearity {
    pub fn power(p: f64) -> Nonlinearity {
        Nonlinearity {
            kind: NonlinearityKind::Power,
            p,
            mu: p,
            growth_c: 1.0,
            odd: true,
        }
    }

    pub fn zero() -> Nonlinearity {
        Nonlinearity {
            kind: NonlinearityKind::Zero,
            p: 6.0,
            mu: 6.0,
            growth_c: 0.0,
            odd: true,
        }
    }

    pub fn g(&self, t: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Power => t.abs().powf(self.p - 2.0) * t,
            NonlinearityKind::Zero => 0.0,
        }
    }

    pub fn g_prime(&self, t: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Power => (self.p - 1.0) * t.abs().powf(self.p - 2.0),
            NonlinearityKind::Zero => 0.0,
        }
    }

    pub fn big_g(&self, t: f64) -> f64 {
        match self.kind {
            NonlinearityKind::Power => t.abs().powf(self.p) / self.p,
            NonlinearityKind::Zero => 0.0,
        }
    }
}

/// Full problem: potential, nonlinearity, dimension, and shift m with
/// `Vt = V + m > 1` on the truncated domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Problem {
    pub potential: Potential,
    pub nonlinearity: Nonlinearity,
    pub dim: usize,
    pub shift: f64,
}

impl Problem {
    pub fn v_tilde(&self, x: f64) -> f64 {
        self.potential.eval(x) + self.shift
    }

    pub fn v_tilde_nodal(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes.iter().map(|&x| self.v_tilde(x)).collect()
    }

    /// Shifted nonlinearity `g(t) + m t`.
    pub fn g_shift(&self, t: f64) -> f64 {
        self.nonlinearity.g(t) + self.shift * t
    }

    /// Derivative of the shifted nonlinearity, `g'(t) + m`.
    pub fn g_shift_prime(&self, t: f64) -> f64 {
        self.nonlinearity.g_prime(t) + self.shift
    }

    /// Shifted primitive `G(t) + m t^2 / 2`.
    pub fn big_g_shift(&self, t: f64) -> f64 {
        self.nonlinearity.big_g(t) + 0.5 * self.shift * t * t
    }

    /// Critical Sobolev exponent bound 2 * 2^* (infinite for N <= 2).
    pub fn two_two_star(&self) -> f64 {
        if self.dim >= 3 {
            2.0 * 2.0 * self.dim as f64 / (self.dim as f64 - 2.0)
        } else {
            f64::INFINITY
        }
    }
}

/// Smallest shift giving `V + m >= 2` on the grid (hence `Vt > 1`).
pub fn choose_shift(potential: &Potential, grid: &Grid) -> Result<f64> {
    let vmin = potential.min_on_grid(grid);
    if vmin < -1e12 {
        return Err(QwError::Config(format!(
            "potential unbounded below on grid (min {vmin:.3e})"
        )));
    }
    Ok((2.0 - vmin).max(0.0))
}

/// Sampling plan for the hypothesis checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            t_min: 1e-8,
            t_max: 1e8,
            count: 10_000,
        }
    }
}

impl SamplingPlan {
    pub fn samples(&self) -> Vec<f64> {
        crate::transform::log_spaced_samples(self.t_min, self.t_max, self.count)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationItem {
    pub name: String,
    pub pass: bool,
    pub worst: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub items: Vec<ValidationItem>,
    pub all_pass: bool,
}

impl ValidationReport {
    pub fn item(&self, name: &str) -> Option<&ValidationItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

/// Checks the hypotheses on (V, g) over the grid and a sampling plan:
/// boundedness below, confinement surrogate on the truncated domain, the
/// growth bound, the exponent window p in (4, 2*2^*), superlinearity
/// 0 < mu G(t) <= t g(t), the vanishing slope g(t)/t -> 0, the shifted-data
/// inequality, and Vt > 1.
pub fn validate(problem: &Problem, grid: &Grid, plan: &SamplingPlan) -> ValidationReport {
    let mut items = Vec::new();
    let v = problem.potential.nodal(grid);
    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // (V) bounded below
    let declared = problem.potential.declared_inf();
    items.push(ValidationItem {
        name: "(V) bounded below".into(),
        pass: vmin >= declared - 1e-9,
        worst: vmin - declared,
        detail: format!("grid min {vmin:.6e}, declared inf {declared:.6e}"),
    });

    // (V) confinement surrogate: max attained on the boundary shell and a
    // monotone tail over the outer quarter of the domain
    let boundary_max = if grid.dim == 1 {
        v[0].max(v[grid.n - 1])
    } else {
        v[grid.n - 1]
    };
    let tail_start = grid.n - grid.n / 4;
    let mut tail_monotone = true;
    for i in tail_start..grid.n - 1 {
        // nondecreasing toward the right boundary
        if v[i + 1] < v[i] - 1e-12 {
            tail_monotone = false;
        }
    }
    if grid.dim == 1 {
        for j in 0..grid.n / 4 {
            // nonincreasing moving inward from the left boundary
            if v[j + 1] > v[j] + 1e-12 {
                tail_monotone = false;
            }
        }
    }
    items.push(ValidationItem {
        name: "(V) confining on truncated domain".into(),
        pass: boundary_max >= vmax - 1e-9 && tail_monotone,
        worst: boundary_max - vmax,
        detail: format!("boundary max {boundary_max:.6e}, grid max {vmax:.6e}, monotone tail: {tail_monotone}"),
    });

    let samples = plan.samples();
    let nl = &problem.nonlinearity;

    // (g0) growth bound
    let mut growth_worst = f64::INFINITY;
    for &t in &samples {
        let cap = nl.growth_c * (t.abs() + t.abs().powf(nl.p - 1.0));
        let slack = (cap - nl.g(t).abs()) / cap.max(1e-300);
        growth_worst = growth_worst.min(slack);
    }
    items.push(ValidationItem {
        name: "(g0) growth |g| <= C(|t| + |t|^{p-1})".into(),
        pass: growth_worst >= -1e-12,
        worst: growth_worst,
        detail: format!("C = {}, p = {}", nl.growth_c, nl.p),
    });

    // (g0) exponent window
    let cap = problem.two_two_star();
    let p_ok = nl.p > 4.0 && nl.p < cap;
    items.push(ValidationItem {
        name: "(g0) p in (4, 2*2^*)".into(),
        pass: p_ok,
        worst: nl.p - 4.0,
        detail: format!("p = {}, 2*2^* = {cap}", nl.p),
    });

    // (g1) superlinearity
    let mut g1_worst = f64::INFINITY;
    let mut g1_pos = f64::INFINITY;
    for &t in &samples {
        if t == 0.0 {
            continue;
        }
        let lhs = nl.mu * nl.big_g(t);
        let rhs = t * nl.g(t);
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        g1_worst = g1_worst.min((rhs - lhs) / scale);
        g1_pos = g1_pos.min(lhs / scale);
    }
    items.push(ValidationItem {
        name: "(g1) 0 < mu G(t) <= t g(t)".into(),
        pass: g1_worst >= -1e-12 && g1_pos > 0.0,
        worst: g1_worst,
        detail: format!("mu = {}", nl.mu),
    });

    // (e2) local slope
    let mut slope_max: f64 = 0.0;
    for k in 2..=8 {
        let t = 10f64.powi(-k);
        slope_max = slope_max.max((nl.g(t) / t).abs());
    }
    items.push(ValidationItem {
        name: "(e2) g(t)/t -> 0".into(),
        pass: slope_max < 1e-3,
        worst: slope_max,
        detail: format!("max |g(t)/t| over t in [1e-8, 1e-2]: {slope_max:.3e}"),
    });

    // shifted-data inequality: Gt(t) - gt(t) t / mu <= (1/2 - 1/mu) m t^2
    let m = problem.shift;
    let mut ge_worst = f64::INFINITY;
    for &t in &samples {
        let big = problem.big_g_shift(t);
        let pair = problem.g_shift(t) * t / nl.mu;
        let lhs = big - pair;
        let rhs = (0.5 - 1.0 / nl.mu) * m * t * t;
        // slack relative to the pre-cancellation magnitude
        let scale = big.abs().max(pair.abs()).max(rhs.abs()).max(1e-300);
        ge_worst = ge_worst.min((rhs - lhs) / scale);
    }
    items.push(ValidationItem {
        name: "(ge) shifted-data inequality".into(),
        pass: ge_worst >= -1e-12,
        worst: ge_worst,
        detail: format!("m = {m}"),
    });

    // shifted potential floor
    let vt_min = vmin + m;
    items.push(ValidationItem {
        name: "Vt = V + m > 1 on grid".into(),
        pass: vt_min > 1.0,
        worst: vt_min - 1.0,
        detail: format!("min Vt = {vt_min:.6e}"),
    });

    let all_pass = items.iter().all(|i| i.pass);
    ValidationReport { items, all_pass }
}

//! Critical-point search for the transformed functional: a path-based
//! mountain-pass iteration for the definite case, a local minimax iteration
//! for the indefinite (local linking) case, Newton refinement of either,
//! a multiplicity driver over nested mode subspaces, geometric probes, and
//! continuation in the frequency parameter.

use crate::energy::{
    energy_j, hessian_tridiag, hessian_vec, morse_index, pde_residual, phi, phi_grad, grad_norm,
};
use crate::error::{QwError, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{minres, solve_dense};
use crate::model::{choose_shift, Problem};
use crate::spectrum::{coercivity_eta, eigenpairs, SpectralSplit};
use crate::transform::TransformTable;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    MountainPass,
    LocalLinking,
    Multiplicity,
    Refine,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    /// "path", "minimax", or "newton"
    pub stage: &'static str,
    pub phi: f64,
    pub grad_norm: f64,
    pub rho: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub mode: SolveMode,
    pub converged: bool,
    pub v: Field,
    /// `u = f(v)` node by node.
    pub u: Field,
    pub phi: f64,
    pub energy_j: f64,
    pub grad_norm: f64,
    pub pde_residual: f64,
    /// Negative directions of the discrete second variation at `v` —
    /// approximate, since the functional is only C^1.
    pub morse_index: usize,
    pub sign_changes: usize,
    pub trivial: bool,
    pub message: String,
    pub iterations: Vec<IterRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverOpts {
    pub grad_tol: f64,
    pub res_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub max_newton: usize,
    /// Iterates with L^2 norm below this count as collapsed to 0.
    pub trivial_tol: f64,
    /// Pairwise L^2 separation (relative) for distinct solutions.
    pub dist_tol: f64,
    /// Minimum energy separation for distinct solutions.
    pub energy_sep: f64,
    pub seed: u64,
    /// Number of points on the mountain-pass path.
    pub path_points: usize,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            grad_tol: 1e-8,
            res_tol: 1e-6,
            max_outer: 400,
            max_inner: 200,
            max_newton: 60,
            trivial_tol: 1e-8,
            dist_tol: 1e-3,
            energy_sep: 1e-6,
            seed: 0,
            path_points: 41,
        }
    }
}

/// Sign alternations of a nodal profile, ignoring values below
/// `1e-8 * max|u|`.
pub fn sign_changes(u: &[f64]) -> usize {
    let amp = u.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if amp == 0.0 {
        return 0;
    }
    let mut count = 0;
    let mut last = 0.0f64;
    for &x in u {
        if x.abs() < 1e-8 * amp {
            continue;
        }
        if last != 0.0 && x.signum() != last {
            count += 1;
        }
        last = x.signum();
    }
    count
}

fn assemble_report(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    mode: SolveMode,
    v: Field,
    converged: bool,
    message: String,
    iterations: Vec<IterRecord>,
    opts: &SolverOpts,
) -> Result<SolveReport> {
    let mut u = grid.zeros();
    for i in 0..grid.n {
        u[i] = table.f(v[i])?;
    }
    let e = phi(problem, grid, table, &v)?;
    let g = phi_grad(problem, grid, table, &v)?;
    let ng = grad_norm(grid, &g);
    let res = pde_residual(problem, grid, &u)?;
    let trivial = grid.l2_norm(&v) < opts.trivial_tol;
    let converged = converged && !trivial && ng <= opts.grad_tol && res.relative <= opts.res_tol;
    Ok(SolveReport {
        mode,
        converged,
        phi: e.total,
        energy_j: energy_j(problem, grid, &u)?,
        grad_norm: ng,
        pde_residual: res.relative,
        morse_index: morse_index(problem, grid, table, &v)?,
        sign_changes: sign_changes(&u),
        trivial,
        message,
        iterations,
        v,
        u,
    })
}

/// Newton refinement of `Phi'(v) = 0` from an iterate already near a critical
/// point: Hessian-vector products (finite differences of the gradient) drive
/// a MINRES solve in the weighted inner product, with step backtracking on
/// the gradient norm and a plain gradient fallback.
pub fn newton_refine(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    v0: &[f64],
    opts: &SolverOpts,
) -> Result<SolveReport> {
    grid.check_len(v0)?;
    let mut v = v0.to_vec();
    let mut log = Vec::new();
    let mut message = String::from("newton: max iterations");
    let mut converged = false;
    let rho0 = phi(problem, grid, table, &v)?.rho;
    let ng0 = grad_norm(grid, &phi_grad(problem, grid, table, &v)?);
    for it in 0..opts.max_newton {
        let g = phi_grad(problem, grid, table, &v)?;
        let ng = grad_norm(grid, &g);
        let e = phi(problem, grid, table, &v)?;
        log.push(IterRecord {
            iter: it,
            stage: "newton",
            phi: e.total,
            grad_norm: ng,
            rho: e.rho,
            step: 0.0,
        });
        if ng <= opts.grad_tol {
            converged = true;
            message = format!("newton: converged in {it} iterations");
            break;
        }
        if e.rho > 1e6 * (rho0 + 1.0) && ng >= ng0 {
            message = format!("newton: diverging (rho {:.3e} from {:.3e})", e.rho, rho0);
            break;
        }
        let lin_tol = 1e-10f64.max(1e-2 * ng.min(1.0));
        let (step, _lin_res) = minres(
            |x| hessian_vec(problem, grid, table, &v, x).expect("finite hessian product"),
            &g,
            &grid.weights,
            lin_tol,
            2 * grid.n,
        );
        let mut accepted = false;
        let mut t = 1.0;
        for _ in 0..8 {
            let vn: Field = v.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let ngn = grad_norm(grid, &phi_grad(problem, grid, table, &vn)?);
            if ngn < (1.0 - 1e-4 * t) * ng {
                v = vn;
                log.last_mut().unwrap().step = t;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // gradient fallback with backtracking on the gradient norm
            let mut a = 1.0 / ng.max(1.0);
            let mut ok = false;
            for _ in 0..30 {
                let vn: Field = v.iter().zip(&g).map(|(x, gi)| x - a * gi).collect();
                let ngn = grad_norm(grid, &phi_grad(problem, grid, table, &vn)?);
                if ngn < ng {
                    v = vn;
                    ok = true;
                    break;
                }
                a *= 0.5;
            }
            if !ok {
                message = format!("newton: stagnated at |grad| = {ng:.3e}");
                break;
            }
        }
    }
    let mut rep = assemble_report(
        problem,
        grid,
        table,
        SolveMode::Refine,
        v,
        converged,
        message,
        log,
        opts,
    )?;
    if rep.trivial {
        rep.message.push_str("; iterate is the trivial solution");
    }
    Ok(rep)
}

/// Fast damped Newton on the full grid using the exact tridiagonal second
/// variation (direct pivoted solve). Used to hand off from minimax iterates;
/// returns the refined field when it reaches `grad_tol`, `None` when it
/// stagnates or collapses.
fn newton_direct(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    v0: &[f64],
    max_iter: usize,
    opts: &SolverOpts,
) -> Result<Option<(Field, usize)>> {
    let free = grid.free_indices();
    let mut v = v0.to_vec();
    for it in 0..max_iter {
        let g = phi_grad(problem, grid, table, &v)?;
        let ng = grad_norm(grid, &g);
        if ng <= opts.grad_tol {
            if grid.l2_norm(&v) < opts.trivial_tol {
                return Ok(None);
            }
            return Ok(Some((v, it)));
        }
        let tri = hessian_tridiag(problem, grid, table, &v)?;
        let mut rhs = Vec::with_capacity(free.len());
        for &i in &free {
            rhs.push(g[i] * grid.weights[i].sqrt());
        }
        let scale = tri.d.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let lu = crate::linalg::TridiagLu::factor(&tri.d, &tri.e, &tri.e, 1e-14 * scale.max(1.0));
        let s_sym = lu.solve(&rhs);
        let mut step = grid.zeros();
        for (k, &i) in free.iter().enumerate() {
            step[i] = s_sym[k] / grid.weights[i].sqrt();
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            let vn: Field = v.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let ngn = grad_norm(grid, &phi_grad(problem, grid, table, &vn)?);
            if ngn < (1.0 - 1e-4 * t) * ng {
                v = vn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Ok(None);
        }
    }
    let g = phi_grad(problem, grid, table, &v)?;
    if grad_norm(grid, &g) <= opts.grad_tol && grid.l2_norm(&v) >= opts.trivial_tol {
        return Ok(Some((v, max_iter)));
    }
    Ok(None)
}

/// Maximizes `Phi` over `span(basis)` by Newton ascent in coefficient space
/// with a gradient-ascent fallback. The functional is anti-coercive on this
/// finite-dimensional subspace, so the maximum exists; unbounded growth is
/// reported as an error.
fn maximize_on_subspace(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    basis: &[&Field],
    c0: &[f64],
    fresh: bool,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, Field, f64)> {
    let k = basis.len();
    let combine = |c: &[f64]| -> Field {
        let mut v = grid.zeros();
        for (cj, b) in c.iter().zip(basis) {
            for i in 0..grid.n {
                v[i] += cj * b[i];
            }
        }
        v
    };
    let coeff_grad = |g: &Field| -> Vec<f64> {
        basis
            .iter()
            .map(|b| {
                g.iter()
                    .zip(b.iter())
                    .zip(&grid.weights)
                    .map(|((gi, bi), wi)| gi * bi * wi)
                    .sum()
            })
            .collect()
    };
    let mut c = c0.to_vec();
    if fresh {
        // start on the peak of the ray along the last basis direction: grow
        // until the profile turns over, then bisect the bracket
        let eval_t = |t: f64| -> Result<f64> {
            let mut ct = vec![0.0; k];
            ct[k - 1] = t;
            Ok(phi(problem, grid, table, &combine(&ct))?.total)
        };
        let mut t = c[k - 1].abs().max(1e-2);
        let mut pt = eval_t(t)?;
        for _ in 0..200 {
            let t2 = t * 1.3;
            let p2 = eval_t(t2)?;
            if p2 <= pt {
                break;
            }
            t = t2;
            pt = p2;
        }
        let (mut lo, mut hi) = (t / 1.3, t * 1.3);
        for _ in 0..40 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if eval_t(m1)? < eval_t(m2)? {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        c = vec![0.0; k];
        c[k - 1] = 0.5 * (lo + hi);
    }
    let mut v = combine(&c);
    let mut p = phi(problem, grid, table, &v)?.total;
    let mut alpha = 0.1f64;
    for _ in 0..max_iter {
        let g = phi_grad(problem, grid, table, &v)?;
        let gc = coeff_grad(&g);
        let gcn = crate::linalg::norm2(&gc);
        if gcn <= tol * p.abs().max(1.0) {
            return Ok((c, v, p));
        }
        let cn = crate::linalg::norm2(&c);
        if cn > 1e8 || !p.is_finite() {
            return Err(QwError::Numeric(
                "subspace maximization unbounded: anti-coercivity violated".into(),
            ));
        }
        // a step never moves farther than a fraction of the current radius,
        // so the iteration tracks the local peak instead of jumping ridges
        let trust = 0.3 * (1.0 + cn);
        let mut moved = false;
        // Newton toward the stationary point, once in its neighborhood
        if gcn <= 10.0 * (1.0 + p.abs()) {
            let tri = hessian_tridiag(problem, grid, table, &v)?;
            let mut h = vec![vec![0.0; k]; k];
            for (j, bj) in basis.iter().enumerate() {
                let mut sym = Vec::with_capacity(grid.free_indices().len());
                for i in grid.free_indices() {
                    sym.push(bj[i] * grid.weights[i].sqrt());
                }
                let out = tri.apply(&sym);
                for (l, bl) in basis.iter().enumerate() {
                    let mut acc = 0.0;
                    for (t, i) in grid.free_indices().into_iter().enumerate() {
                        acc += out[t] * bl[i] * grid.weights[i].sqrt();
                    }
                    h[j][l] = acc;
                }
            }
            let rhs: Vec<f64> = gc.iter().map(|x| -x).collect();
            if let Some(mut s) = solve_dense(&h, &rhs) {
                let sn = crate::linalg::norm2(&s);
                if sn > trust {
                    for x in s.iter_mut() {
                        *x *= trust / sn;
                    }
                }
                let mut t = 1.0;
                for _ in 0..6 {
                    let ct: Vec<f64> = c.iter().zip(&s).map(|(a, b)| a + t * b).collect();
                    let vt = combine(&ct);
                    let pt = phi(problem, grid, table, &vt)?.total;
                    if pt > p {
                        c = ct;
                        v = vt;
                        p = pt;
                        moved = true;
                        break;
                    }
                    t *= 0.5;
                }
            }
        }
        if !moved {
            // ascent along the coefficient gradient, step capped by the
            // trust radius
            let mut a = alpha.min(trust / gcn);
            let mut ok = false;
            for _ in 0..40 {
                let ct: Vec<f64> = c.iter().zip(&gc).map(|(x, b)| x + a * b).collect();
                let vt = combine(&ct);
                let pt = phi(problem, grid, table, &vt)?.total;
                if pt > p + 1e-12 * p.abs().max(1.0) {
                    c = ct;
                    v = vt;
                    p = pt;
                    alpha = a * 1.5;
                    ok = true;
                    break;
                }
                a *= 0.5;
            }
            if !ok {
                // flat to machine precision: accept the current point
                return Ok((c, v, p));
            }
        }
    }
    Ok((c, v, p))
}

fn l2_orthogonalize(grid: &Grid, w: &mut Field, against: &[&Field]) {
    for b in against {
        let c = grid.l2_inner(w, b);
        for (wi, bi) in w.iter_mut().zip(b.iter()) {
            *wi -= c * bi;
        }
    }
}

fn l2_normalize(grid: &Grid, w: &mut Field) -> f64 {
    let n = grid.l2_norm(w);
    if n > 0.0 {
        for x in w.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Local minimax over `span(lower + {w})`: maximize there, then descend the
/// peak level in `w`, then hand off to Newton. With `lower` empty this is
/// the ray variant of the mountain-pass geometry.
pub fn minimax_solve(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    lower: &[&Field],
    w0: &Field,
    mode: SolveMode,
    opts: &SolverOpts,
) -> Result<SolveReport> {
    minimax_from_scaled(problem, grid, table, lower, w0, 1.0, mode, opts)
}

#[allow(clippy::too_many_arguments)]
pub fn minimax_from_scaled(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    lower: &[&Field],
    w0: &Field,
    peak0: f64,
    mode: SolveMode,
    opts: &SolverOpts,
) -> Result<SolveReport> {
    let mut w = w0.clone();
    l2_orthogonalize(grid, &mut w, lower);
    if l2_normalize(grid, &mut w) < 1e-12 {
        return Err(QwError::Config(
            "minimax: initial direction lies in the lower subspace".into(),
        ));
    }
    let k = lower.len() + 1;
    let mut c = vec![0.0; k];
    c[k - 1] = peak0;
    let mut log: Vec<IterRecord> = Vec::new();
    let mut alpha = 1.0;
    let mut rho0 = f64::NAN;

    for outer in 0..opts.max_outer {
        let basis: Vec<&Field> = lower.iter().cloned().chain(std::iter::once(&w)).collect();
        let (cc, v, p) = maximize_on_subspace(problem, grid, table, &basis, &c, outer == 0, 1e-11, opts.max_inner)?;
        c = cc;
        let g = phi_grad(problem, grid, table, &v)?;
        let ng = grad_norm(grid, &g);
        let e = phi(problem, grid, table, &v)?;
        if rho0.is_nan() {
            rho0 = e.rho;
        }
        log.push(IterRecord {
            iter: outer,
            stage: "minimax",
            phi: p,
            grad_norm: ng,
            rho: e.rho,
            step: alpha,
        });
        if grid.l2_norm(&v) < opts.trivial_tol {
            return assemble_report(
                problem, grid, table, mode, v, false,
                "minimax: collapsed to trivial".into(), log, opts,
            );
        }
        if e.rho > 1e6 * (rho0 + 1.0) {
            return assemble_report(
                problem, grid, table, mode, v, false,
                format!("minimax: diverging (rho {:.3e})", e.rho), log, opts,
            );
        }
        // hand off to Newton from every peak: the direct tridiagonal solve
        // is cheap, and backtracking on the gradient norm rejects iterates
        // outside the basin
        if let Some((vn, its)) = newton_direct(problem, grid, table, &v, 30, opts)? {
            let gn = grad_norm(grid, &phi_grad(problem, grid, table, &vn)?);
            let en = phi(problem, grid, table, &vn)?;
            log.push(IterRecord {
                iter: outer,
                stage: "newton",
                phi: en.total,
                grad_norm: gn,
                rho: en.rho,
                step: 1.0,
            });
            return assemble_report(
                problem, grid, table, mode, vn, true,
                format!("minimax ({outer} outer) + newton: converged in {its} iterations"),
                log, opts,
            );
        }
        // descend the peak level in w: project the gradient off the lower
        // subspace and backtrack on the maximized value
        let mut d = g.clone();
        l2_orthogonalize(grid, &mut d, lower);
        let dn = grid.l2_norm(&d);
        if dn == 0.0 {
            break;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut wt: Field = w.iter().zip(&d).map(|(a, b)| a - alpha * b).collect();
            l2_orthogonalize(grid, &mut wt, lower);
            if l2_normalize(grid, &mut wt) < 1e-12 {
                alpha *= 0.5;
                continue;
            }
            let basis_t: Vec<&Field> =
                lower.iter().cloned().chain(std::iter::once(&wt)).collect();
            // keep the peak coefficient magnitude along the new direction
            let mut ct = c.clone();
            ct[k - 1] = ct[k - 1].abs().max(1e-3);
            let (ct, _vt, pt) =
                maximize_on_subspace(problem, grid, table, &basis_t, &ct, false, 1e-11, opts.max_inner)?;
            if pt < p - 1e-6 * alpha * dn * dn {
                w = wt;
                c = ct;
                alpha = (alpha * 1.4).min(1e3);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // the peak level cannot be decreased: treat as a minimax point
            let mut rep = newton_refine(problem, grid, table, &v, opts)?;
            let mut merged = log;
            merged.extend(rep.iterations);
            rep.iterations = merged;
            rep.mode = mode;
            rep.message = format!("minimax stalled at outer {outer}; {}", rep.message);
            return Ok(rep);
        }
    }
    let basis: Vec<&Field> = lower.iter().cloned().chain(std::iter::once(&w)).collect();
    let (_, v, _) = maximize_on_subspace(problem, grid, table, &basis, &c, false, 1e-11, opts.max_inner)?;
    let rep = newton_refine(problem, grid, table, &v, opts)?;
    let mut rep = SolveReport { mode, ..rep };
    let mut merged = log;
    merged.extend(rep.iterations);
    rep.iterations = merged;
    rep.message = format!("minimax: outer iteration cap; {}", rep.message);
    Ok(rep)
}

/// Mountain-pass solve for the definite case (`ell = 0`): a discretized path
/// from 0 to a downhill endpoint, steepest-descent deformation of the path
/// maximizer, Newton refinement at the end.
pub fn mountain_pass_solve(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    split: &SpectralSplit,
    opts: &SolverOpts,
) -> Result<SolveReport> {
    mountain_pass_from(problem, grid, table, split, &split.modes[0], opts)
}

/// Mountain-pass solve along a caller-chosen initial ray direction.
pub fn mountain_pass_from(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    split: &SpectralSplit,
    direction: &Field,
    opts: &SolverOpts,
) -> Result<SolveReport> {
    if split.ell != 0 {
        return Err(QwError::Config(format!(
            "mountain_pass_solve requires ell = 0 (got ell = {})",
            split.ell
        )));
    }
    grid.check_len(direction)?;
    let mut dir = direction.clone();
    if l2_normalize(grid, &mut dir) < 1e-12 {
        return Err(QwError::Config("mountain pass: zero initial direction".into()));
    }
    // downhill endpoint by doubling along the ray (anti-coercivity)
    let mut s = 1.0;
    let mut e_end = f64::INFINITY;
    for _ in 0..60 {
        let v: Field = dir.iter().map(|x| s * x).collect();
        e_end = phi(problem, grid, table, &v)?.total;
        if e_end < -1.0 {
            break;
        }
        s *= 2.0;
    }
    if e_end >= -1.0 {
        return Err(QwError::Numeric(
            "mountain pass: no downhill endpoint found along the ray".into(),
        ));
    }
    // locate the path maximizer on the discretized segment 0 -> e; it seeds
    // the peak coefficient of the deformation loop
    let m = opts.path_points.max(5);
    let mut s_peak = s / 2.0;
    let mut pmax = f64::NEG_INFINITY;
    for j in 1..m {
        let sj = s * j as f64 / (m - 1) as f64;
        let v: Field = dir.iter().map(|x| sj * x).collect();
        let val = phi(problem, grid, table, &v)?.total;
        if val > pmax {
            pmax = val;
            s_peak = sj;
        }
    }
    if pmax <= 0.0 {
        return assemble_report(
            problem, grid, table, SolveMode::MountainPass, grid.zeros(), false,
            "mountain pass: path maximum not above the origin level".into(),
            Vec::new(), opts,
        );
    }
    // deformation: the path through the current peak is the ray segment
    // {tau * s * w}; each outer step re-maximizes along it and descends the
    // peak in the direction w (minimax with an empty lower subspace)
    let rep = minimax_from_scaled(problem, grid, table, &[], &dir, s_peak, SolveMode::MountainPass, opts)?;
    Ok(rep)
}

/// Local-linking solve for the indefinite case (`ell >= 1`, 0 not an
/// eigenvalue): minimax over the negative subspace plus one positive
/// direction.
pub fn local_linking_solve(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    split: &SpectralSplit,
    opts: &SolverOpts,
) -> Result<SolveReport> {
    local_linking_from(problem, grid, table, split, &split.modes[split.ell], opts)
}

/// Local-linking solve from a caller-chosen initial positive direction.
pub fn local_linking_from(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    split: &SpectralSplit,
    w0: &Field,
    opts: &SolverOpts,
) -> Result<SolveReport> {
    if split.ell == 0 {
        return Err(QwError::Config(
            "local_linking_solve requires ell >= 1; use mountain_pass_solve".into(),
        ));
    }
    if split.is_degenerate() {
        let i = split.degenerate[0];
        return Err(QwError::DegenerateSpectrum {
            index: i,
            value: split.lambdas_refined[i],
            tol: split.degeneracy_tol,
        });
    }
    let lower: Vec<&Field> = split.modes[..split.ell].iter().collect();
    minimax_solve(problem, grid, table, &lower, w0, SolveMode::LocalLinking, opts)
}

/// Fits the quadratic-plus-power bound on the composed primitive:
/// `|Gt(f(t))| <= C1 t^2 + C2 |t|^{p/2}` over a log-spaced sample range.
/// Least squares on the two-term basis, inflated so the bound holds at every
/// sample. Returns (C1, C2).
pub fn fit_primitive_bound(problem: &Problem, table: &TransformTable) -> Result<(f64, f64)> {
    let q = problem.nonlinearity.p / 2.0;
    let samples = crate::transform::log_spaced_samples(1e-6, 1e6, 4000);
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut pts = Vec::with_capacity(samples.len());
    for &t in &samples {
        let y = problem.nonlinearity.big_g(table.f(t)?).abs();
        // scale-free regression: weight by the predictor magnitude
        let (x1, x2) = (t * t, t.abs().powf(q));
        let wscale = 1.0 / (x1 + x2).powi(2);
        a11 += x1 * x1 * wscale;
        a12 += x1 * x2 * wscale;
        a22 += x2 * x2 * wscale;
        b1 += x1 * y * wscale;
        b2 += x2 * y * wscale;
        pts.push((x1, x2, y));
    }
    let det = a11 * a22 - a12 * a12;
    let (mut c1, mut c2) = if det.abs() > 1e-300 {
        ((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det)
    } else {
        (1.0, 1.0)
    };
    c1 = c1.max(1e-12);
    c2 = c2.max(1e-12);
    let mut inflate = 1.0f64;
    for &(x1, x2, y) in &pts {
        inflate = inflate.max(y / (c1 * x1 + c2 * x2));
    }
    Ok((c1 * inflate, c2 * inflate))
}

/// Smallest mode index `k > ell` (1-based) with `eta - C1 beta_k^2 > 0`.
pub fn select_k(split: &SpectralSplit, m: f64, c1: f64) -> Result<usize> {
    let eta = coercivity_eta(split, m)?;
    for k in split.ell + 1..=split.k_modes() {
        let b = crate::spectrum::beta(split, m, k)?;
        if eta - c1 * b * b > 0.0 {
            return Ok(k);
        }
    }
    Err(QwError::Numeric(format!(
        "select_k: eta - C1 beta_k^2 <= 0 for all computed k <= {}; request more modes",
        split.k_modes()
    )))
}

/// Multiplicity driver: local minimax over the nested subspaces
/// `span(phi_1..phi_j)` for j = k, k+1, ..., collecting distinct critical
/// points. Results are sorted by energy; fewer than `count` findings is a
/// partial result, not an error.
pub fn multiplicity_search(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    split: &SpectralSplit,
    count: usize,
    opts: &SolverOpts,
) -> Result<Vec<SolveReport>> {
    if !problem.nonlinearity.odd {
        return Err(QwError::Config(
            "multiplicity_search requires an odd nonlinearity".into(),
        ));
    }
    let (c1, _c2) = fit_primitive_bound(problem, table)?;
    let k = match select_k(split, problem.shift, c1) {
        Ok(k) => k,
        // degenerate 0 is allowed in this mode; fall back to the first
        // index above the crossing
        Err(QwError::DegenerateSpectrum { .. }) => split.ell + 1,
        Err(e) => return Err(e),
    };
    let mut found: Vec<SolveReport> = Vec::new();
    for j in k..=split.k_modes() {
        if found.len() >= count {
            break;
        }
        let lower: Vec<&Field> = split.modes[..j - 1].iter().collect();
        let rep = minimax_solve(
            problem,
            grid,
            table,
            &lower,
            &split.modes[j - 1],
            SolveMode::Multiplicity,
            opts,
        )?;
        if !rep.converged || rep.trivial {
            continue;
        }
        let distinct = found.iter().all(|other| {
            let dminus: f64 = grid
                .l2_norm(&rep.u.iter().zip(&other.u).map(|(a, b)| a - b).collect::<Field>());
            let dplus: f64 = grid
                .l2_norm(&rep.u.iter().zip(&other.u).map(|(a, b)| a + b).collect::<Field>());
            let dist = dminus.min(dplus);
            let scale = grid.l2_norm(&rep.u).max(grid.l2_norm(&other.u));
            dist >= opts.dist_tol * scale
                && (rep.phi - other.phi).abs() >= opts.energy_sep * rep.phi.abs().max(1.0)
        });
        if distinct {
            found.push(rep);
        }
    }
    found.sort_by(|a, b| a.phi.partial_cmp(&b.phi).unwrap());
    Ok(found)
}

#[derive(Debug, Clone, Serialize)]
pub struct LinkingProbeReport {
    pub pass: bool,
    pub eps: f64,
    pub n_dirs: usize,
    /// max Phi over the X^- sphere (wants <= pos_slack)
    pub max_phi_minus: f64,
    /// min Phi over the X^+ sphere (wants > 0)
    pub min_phi_plus: f64,
    pub pos_slack: f64,
    pub violations: usize,
}

/// Samples the local-linking geometry: `Phi <= pos_slack` on the eps-sphere
/// of the negative subspace, `Phi > 0` on the eps-sphere of the positive
/// subspace. Spheres are measured in the X-norm.
pub fn local_linking_probe(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    split: &SpectralSplit,
    eps: f64,
    n_dirs: usize,
    seed: u64,
) -> Result<LinkingProbeReport> {
    if eps <= 0.0 {
        return Err(QwError::Config("probe: eps must be positive".into()));
    }
    let vt = problem.v_tilde_nodal(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos_slack = 1e-12;
    let mut max_minus = f64::NEG_INFINITY;
    let mut min_plus = f64::INFINITY;
    let mut violations = 0;
    let scale_to_eps = |v: &mut Field, grid: &Grid| -> Result<bool> {
        let xn = grid.x_inner(&vt, v, v)?.sqrt();
        if xn < 1e-12 {
            return Ok(false);
        }
        for x in v.iter_mut() {
            *x *= eps / xn;
        }
        Ok(true)
    };
    // X^- sphere
    if split.ell > 0 {
        for _ in 0..n_dirs {
            let mut v = grid.zeros();
            for mode in &split.modes[..split.ell] {
                let c: f64 = rng.random::<f64>() - 0.5;
                for i in 0..grid.n {
                    v[i] += c * mode[i];
                }
            }
            if !scale_to_eps(&mut v, grid)? {
                continue;
            }
            let p = phi(problem, grid, table, &v)?.total;
            max_minus = max_minus.max(p);
            if p > pos_slack {
                violations += 1;
            }
        }
    } else {
        max_minus = f64::NEG_INFINITY; // vacuous
    }
    // X^+ sphere: half from computed positive modes, half from random smooth
    // fields projected onto the positive subspace
    for trial in 0..n_dirs {
        let mut v = grid.zeros();
        if trial % 2 == 0 || split.k_modes() == split.ell {
            for mode in &split.modes[split.ell..] {
                let c: f64 = rng.random::<f64>() - 0.5;
                for i in 0..grid.n {
                    v[i] += c * mode[i];
                }
            }
        } else {
            let (a, b) = (
                0.3 + 2.0 * rng.random::<f64>(),
                4.0 * (rng.random::<f64>() - 0.5),
            );
            for i in 0..grid.n {
                let x = grid.nodes[i];
                v[i] = (a * x + b).sin() * (-x * x / (2.0 * grid.x1)).exp();
            }
            grid.project_boundary(&mut v);
            v = crate::spectrum::project(split, grid, &v, crate::spectrum::Half::Plus)?;
        }
        if !scale_to_eps(&mut v, grid)? {
            continue;
        }
        let p = phi(problem, grid, table, &v)?.total;
        min_plus = min_plus.min(p);
        if p <= 0.0 {
            violations += 1;
        }
    }
    Ok(LinkingProbeReport {
        pass: violations == 0,
        eps,
        n_dirs,
        max_phi_minus: max_minus,
        min_phi_plus: min_plus,
        pos_slack,
        violations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AntiCoercivityReport {
    pub pass: bool,
    pub radii: Vec<f64>,
    pub n_dirs: usize,
    /// max Phi over all directions at the largest radius (wants < 0)
    pub max_phi_tail: f64,
    pub monotone_failures: usize,
    /// threshold A: samples with Phi <= -A must satisfy <Phi'(v), v> < 0
    pub pairing_threshold: f64,
    pub pairing_failures: usize,
}

/// Samples anti-coercivity on `span(basis)`: along random unit directions
/// (X-norm), `Phi(s w)` must turn negative and keep decreasing over `radii`,
/// and deep samples must have outward derivative `<Phi'(v), v> < 0`.
pub fn anti_coercivity_probe(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    basis: &[Field],
    radii: &[f64],
    n_dirs: usize,
    seed: u64,
) -> Result<AntiCoercivityReport> {
    if basis.is_empty() || radii.is_empty() {
        return Err(QwError::Config("probe: empty basis or radii".into()));
    }
    let vt = problem.v_tilde_nodal(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_tail = f64::NEG_INFINITY;
    let mut monotone_failures = 0;
    let mut deep: Vec<(Field, f64)> = Vec::new();
    let mut tail_values = Vec::new();
    for _ in 0..n_dirs {
        let mut w = grid.zeros();
        loop {
            for x in w.iter_mut() {
                *x = 0.0;
            }
            for b in basis {
                let c: f64 = rng.random::<f64>() - 0.5;
                for i in 0..grid.n {
                    w[i] += c * b[i];
                }
            }
            let xn = grid.x_inner(&vt, &w, &w)?.sqrt();
            if xn > 1e-9 {
                for x in w.iter_mut() {
                    *x /= xn;
                }
                break;
            }
        }
        let mut values = Vec::with_capacity(radii.len());
        for &s in radii {
            let v: Field = w.iter().map(|x| s * x).collect();
            let p = phi(problem, grid, table, &v)?.total;
            values.push(p);
            deep.push((v, p));
        }
        // decreasing is only required beyond the last sign change of Phi
        let last_nonneg = values.iter().rposition(|&p| p >= 0.0);
        let start = last_nonneg.map_or(0, |i| i + 1);
        for i in start.max(1)..values.len() {
            if values[i] >= values[i - 1] {
                monotone_failures += 1;
            }
        }
        let tail = *values.last().unwrap();
        max_tail = max_tail.max(tail);
        tail_values.push(tail);
    }
    // A from the sweep: half the shallowest tail depth
    let a = tail_values
        .iter()
        .fold(f64::INFINITY, |acc, &p| acc.min(-p))
        .max(0.0)
        * 0.5;
    let mut pairing_failures = 0;
    for (v, p) in &deep {
        if *p <= -a && a > 0.0 {
            let g = phi_grad(problem, grid, table, v)?;
            let outward: f64 = g
                .iter()
                .zip(v)
                .zip(&grid.weights)
                .map(|((gi, vi), wi)| gi * vi * wi)
                .sum();
            if outward >= 0.0 {
                pairing_failures += 1;
            }
        }
    }
    Ok(AntiCoercivityReport {
        pass: max_tail < 0.0 && monotone_failures == 0 && pairing_failures == 0,
        radii: radii.to_vec(),
        n_dirs,
        max_phi_tail: max_tail,
        monotone_failures,
        pairing_threshold: a,
        pairing_failures,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationPoint {
    pub omega: f64,
    pub shift: f64,
    pub ell: usize,
    pub degenerate: bool,
    pub warm_start: bool,
    pub report: Option<SolveReport>,
    pub message: String,
}

/// Continuation in the frequency parameter: recompute the spectrum at each
/// omega, pick the solver mode from `ell`, warm-start from the previous
/// solution's direction. Near-degenerate crossings are flagged and skipped.
pub fn continuation_in_omega(
    template: &Problem,
    grid: &Grid,
    table: &TransformTable,
    omega_list: &[f64],
    k_modes: usize,
    opts: &SolverOpts,
) -> Result<Vec<ContinuationPoint>> {
    if omega_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(QwError::Config("continuation: omega_list must increase".into()));
    }
    let mut out = Vec::new();
    let mut prev_v: Option<Field> = None;
    for &omega in omega_list {
        let potential = template.potential.with_omega(omega)?;
        let shift = choose_shift(&potential, grid)?;
        let problem = Problem {
            potential,
            nonlinearity: template.nonlinearity.clone(),
            dim: template.dim,
            shift,
        };
        let split = eigenpairs(&problem, grid, k_modes)?;
        let ell = split.ell;
        if split.is_degenerate() {
            out.push(ContinuationPoint {
                omega,
                shift,
                ell,
                degenerate: true,
                warm_start: false,
                report: None,
                message: format!(
                    "0 within {:.1e} of eigenvalue {}; skipped",
                    split.degeneracy_tol,
                    split.degenerate[0] + 1
                ),
            });
            continue;
        }
        // warm start: previous solution's positive projection (linking) or
        // ray direction (mountain pass)
        let warm_dir: Option<Field> = prev_v.as_ref().and_then(|v| {
            let d = if ell > 0 {
                crate::spectrum::project(&split, grid, v, crate::spectrum::Half::Plus).ok()?
            } else {
                v.clone()
            };
            if grid.l2_norm(&d) > 1e-6 {
                Some(d)
            } else {
                None
            }
        });
        let warm = warm_dir.is_some();
        let rep = if ell == 0 {
            let dir = warm_dir.unwrap_or_else(|| split.modes[0].clone());
            mountain_pass_from(&problem, grid, table, &split, &dir, opts)?
        } else {
            let dir = warm_dir.unwrap_or_else(|| split.modes[ell].clone());
            local_linking_from(&problem, grid, table, &split, &dir, opts)?
        };
        if rep.converged {
            prev_v = Some(rep.v.clone());
        }
        let message = rep.message.clone();
        out.push(ContinuationPoint {
            omega,
            shift,
            ell,
            degenerate: false,
            warm_start: warm,
            report: Some(rep),
            message,
        });
    }
    Ok(out)
}

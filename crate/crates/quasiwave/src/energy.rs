//! The transformed functional `Phi`, its gradient and Hessian on the grid,
//! the physical energy `J`, and the PDE residual of a candidate solution.
//!
//! Everything is assembled so that the discrete identities close to solver
//! tolerance: the gradient is the Riesz representative with respect to the
//! quadrature weights (so directional derivatives of `Phi` match exactly),
//! `J` is assembled through the substitution `u = f(v)` (so `J(f(v)) = Phi(v)`
//! holds to inversion tolerance), and the variational residual of the
//! quasilinear equation is `F'(u) * (A F(u)) + V u - g(u)` with
//! `F = f^{-1}`, which vanishes at discrete critical points of `Phi`.

use crate::error::{QwError, Result};
use crate::grid::{Field, Grid};
use crate::linalg::SymTridiag;
use crate::model::Problem;
use crate::transform::{f_inverse, TransformTable};
use serde::Serialize;

/// Value of `Phi` with its pieces and the natural-norm radius `rho`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBreakdown {
    /// `(1/2) int |grad v|^2`
    pub dirichlet: f64,
    /// `(1/2) int Vt f(v)^2`
    pub potential: f64,
    /// `int Gt(f(v))`
    pub nonlinear: f64,
    /// `dirichlet + potential - nonlinear`
    pub total: f64,
    /// `rho = (int |grad v|^2 + Vt f(v)^2)^{1/2}`
    pub rho: f64,
}

fn bad_node(i: usize, x: f64, what: &str) -> QwError {
    QwError::Numeric(format!("non-finite {what} at node {i} (value {x:.3e})"))
}

/// Evaluates `Phi(v)` together with its breakdown. `Phi(0) = 0` exactly.
pub fn phi(problem: &Problem, grid: &Grid, table: &TransformTable, v: &[f64]) -> Result<EnergyBreakdown> {
    grid.check_len(v)?;
    let vt = problem.v_tilde_nodal(grid);
    let dirichlet = 0.5 * grid.dirichlet_form(v, v);
    let mut potential = 0.0;
    let mut nonlinear = 0.0;
    for i in 0..grid.n {
        if !v[i].is_finite() {
            return Err(bad_node(i, v[i], "iterate"));
        }
        let u = table.f(v[i])?;
        let p = 0.5 * vt[i] * u * u * grid.weights[i];
        let g = problem.big_g_shift(u) * grid.weights[i];
        if !p.is_finite() || !g.is_finite() {
            return Err(bad_node(i, u, "energy density"));
        }
        potential += p;
        nonlinear += g;
    }
    let total = dirichlet + potential - nonlinear;
    Ok(EnergyBreakdown {
        dirichlet,
        potential,
        nonlinear,
        total,
        rho: (2.0 * (dirichlet + potential)).max(0.0).sqrt(),
    })
}

/// Riesz representative of `Phi'(v)` with respect to the quadrature weights:
/// `sum_i w_i grad_i phi_i` equals the directional derivative of `Phi` at `v`
/// in direction `phi` for any `phi` vanishing on the Dirichlet nodes.
pub fn phi_grad(problem: &Problem, grid: &Grid, table: &TransformTable, v: &[f64]) -> Result<Field> {
    grid.check_len(v)?;
    let vt = problem.v_tilde_nodal(grid);
    let mut g = grid.laplacian_apply(v);
    for i in grid.free_indices() {
        let (u, up) = table.f_and_prime(v[i])?;
        g[i] += (vt[i] * u - problem.g_shift(u)) * up;
    }
    grid.project_boundary(&mut g);
    Ok(g)
}

/// Weighted L^2 norm of a gradient field — the dual norm matching `phi_grad`.
pub fn grad_norm(grid: &Grid, g: &[f64]) -> f64 {
    grid.l2_norm(g)
}

/// Second variation of `Phi` at `v` as a symmetric tridiagonal operator in
/// similarity variables (conjugated by `W^{1/2}`): `A + diag(c(v))` with
/// `c = Vt (f'^2 + f f'') - gt'(f) f'^2 - gt(f) f''`.
pub fn hessian_tridiag(problem: &Problem, grid: &Grid, table: &TransformTable, v: &[f64]) -> Result<SymTridiag> {
    grid.check_len(v)?;
    let vt = problem.v_tilde_nodal(grid);
    let mut c = vec![0.0; grid.n];
    for i in 0..grid.n {
        let (u, up) = table.f_and_prime(v[i])?;
        let upp = table.f_second(v[i])?;
        c[i] = vt[i] * (up * up + u * upp)
            - problem.g_shift_prime(u) * up * up
            - problem.g_shift(u) * upp;
    }
    Ok(grid.sym_operator(&c))
}

/// Hessian-vector product by central differencing of `phi_grad` — an
/// assembly-free cross-check of `hessian_tridiag`.
pub fn hessian_vec(
    problem: &Problem,
    grid: &Grid,
    table: &TransformTable,
    v: &[f64],
    dir: &[f64],
) -> Result<Field> {
    grid.check_len(v)?;
    grid.check_len(dir)?;
    let scale = grid.l2_norm(v).max(1.0);
    let h = 1e-5 * scale / grid.l2_norm(dir).max(1e-300);
    let vp: Field = v.iter().zip(dir).map(|(a, d)| a + h * d).collect();
    let vm: Field = v.iter().zip(dir).map(|(a, d)| a - h * d).collect();
    let gp = phi_grad(problem, grid, table, &vp)?;
    let gm = phi_grad(problem, grid, table, &vm)?;
    Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

/// Morse index of `Phi` at `v`: negative directions of the second variation.
pub fn morse_index(problem: &Problem, grid: &Grid, table: &TransformTable, v: &[f64]) -> Result<usize> {
    Ok(hessian_tridiag(problem, grid, table, v)?.count_below(0.0))
}

/// Negative directions of the second variation at the origin, which is
/// `A + diag(V)` since the nonlinearity has vanishing slope at 0.
pub fn origin_morse_index(problem: &Problem, grid: &Grid) -> usize {
    let pot = problem.potential.nodal(grid);
    grid.sym_operator(&pot).count_below(0.0)
}

/// Physical energy
/// `J(u) = (1/2) int (|grad u|^2 + 2 u^2 |grad u|^2 + V u^2) - int G(u)`,
/// assembled through `F = f^{-1}` as `(1/2) int |grad F(u)|^2 + ...`, which
/// is exact for the gradient terms (`F'(u)^2 = 1 + 2u^2`).
pub fn energy_j(problem: &Problem, grid: &Grid, u: &[f64]) -> Result<f64> {
    grid.check_len(u)?;
    let mut fu = grid.zeros();
    for i in 0..grid.n {
        fu[i] = f_inverse(u[i])?;
    }
    let mut total = 0.5 * grid.dirichlet_form(&fu, &fu);
    for i in 0..grid.n {
        let vx = problem.potential.eval(grid.nodes[i]);
        total += grid.weights[i] * (0.5 * vx * u[i] * u[i] - problem.nonlinearity.big_g(u[i]));
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// Relative variational residual: `|| F'(u) (A F(u)) + V u - g(u) ||_2 / ||u||_2`.
    pub relative: f64,
    pub field_norm: f64,
    /// Set when `||u||_2` is too small for the relative residual to mean anything.
    pub trivial: bool,
}

/// Residual of the quasilinear equation in its variational (flux) form.
/// `A` is the discrete Dirichlet Laplacian, so this is exactly
/// `F'(u) .* phi_grad(f^{-1}(u))` node by node and vanishes at discrete
/// critical points.
pub fn pde_residual(problem: &Problem, grid: &Grid, u: &[f64]) -> Result<ResidualReport> {
    grid.check_len(u)?;
    let mut fu = grid.zeros();
    for i in 0..grid.n {
        fu[i] = f_inverse(u[i])?;
    }
    let afu = grid.laplacian_apply(&fu);
    let mut r = grid.zeros();
    for i in grid.free_indices() {
        let fp = (1.0 + 2.0 * u[i] * u[i]).sqrt();
        r[i] = fp * afu[i] + problem.potential.eval(grid.nodes[i]) * u[i]
            - problem.nonlinearity.g(u[i]);
    }
    let field_norm = grid.l2_norm(u);
    let trivial = field_norm < 1e-10;
    let relative = grid.l2_norm(&r) / field_norm.max(1e-300);
    Ok(ResidualReport {
        relative,
        field_norm,
        trivial,
    })
}

/// Residual of the literal second-order stencils,
/// `(-D_h u + V u - u D_h(u^2) - g(u))` with `D_h` the pointwise discrete
/// Laplacian, relative to `||u||_2`. This is an independent consistency
/// check: for a smooth continuum solution it decays at O(h^2), so it should
/// drop ~4x per grid refinement.
pub fn stencil_residual(problem: &Problem, grid: &Grid, u: &[f64]) -> Result<f64> {
    grid.check_len(u)?;
    let u2: Field = u.iter().map(|x| x * x).collect();
    let au = grid.laplacian_apply(u);
    let au2 = grid.laplacian_apply(&u2);
    let mut r = grid.zeros();
    for i in grid.free_indices() {
        r[i] = au[i] + problem.potential.eval(grid.nodes[i]) * u[i] + u[i] * au2[i]
            - problem.nonlinearity.g(u[i]);
    }
    Ok(grid.l2_norm(&r) / grid.l2_norm(u).max(1e-300))
}

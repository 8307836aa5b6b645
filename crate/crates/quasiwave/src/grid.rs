//! Truncated-domain discretization: uniform nodes, finite-volume quadrature
//! weights, and the stiffness operator for `-Delta` in interval (N = 1) or
//! radial (N = 2, 3) mode.
//!
//! The stiffness operator is assembled in flux form
//! `(A u)_i = -(F_{i+1/2} - F_{i-1/2}) / vol_i` with
//! `F_{i+1/2} = a_{i+1/2} (u_{i+1} - u_i)/h`, which makes it symmetric with
//! respect to the quadrature inner product by construction and second-order
//! consistent. At `r = 0` the flux closure reduces to the limit row
//! `-N u''(0) = -2N (u_1 - u_0)/h^2`.

use crate::error::{QwError, Result};

/// Nodal values on a [`Grid`].
pub type Field = Vec<f64>;

#[derive(Debug, Clone)]
pub struct Grid {
    /// Spatial dimension N in {1, 2, 3}.
    pub dim: usize,
    /// Left coordinate (0 for radial mode).
    pub x0: f64,
    /// Right coordinate (truncation radius R for radial mode).
    pub x1: f64,
    pub n: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
    /// Quadrature (cell-volume) weights, including the angular factor.
    pub weights: Vec<f64>,
    /// Face coefficients `omega_{N-1} r_{i+1/2}^{N-1}`, length n-1.
    pub face: Vec<f64>,
    /// Degrees of freedom; `false` at Dirichlet boundary nodes.
    pub free: Vec<bool>,
}

fn angular_factor(dim: usize) -> f64 {
    match dim {
        1 => 1.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => unreachable!(),
    }
}

impl Grid {
    /// Interval [a, b] with Dirichlet conditions at both ends (N = 1).
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Grid> {
        if n < 3 {
            return Err(QwError::Config(format!("grid: need n >= 3, got {n}")));
        }
        if !(b > a) {
            return Err(QwError::Config(format!("grid: empty interval [{a}, {b}]")));
        }
        let h = (b - a) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        let face = vec![1.0; n - 1];
        let mut free = vec![true; n];
        free[0] = false;
        free[n - 1] = false;
        Ok(Grid {
            dim: 1,
            x0: a,
            x1: b,
            n,
            h,
            nodes,
            weights,
            face,
            free,
        })
    }

    /// Radial grid on [0, R] for N in {2, 3}: Neumann closure at r = 0,
    /// Dirichlet at r = R.
    pub fn radial(dim: usize, radius: f64, n: usize) -> Result<Grid> {
        if !(dim == 2 || dim == 3) {
            return Err(QwError::Config(format!(
                "grid: radial mode needs N in {{2,3}}, got {dim}"
            )));
        }
        if n < 3 {
            return Err(QwError::Config(format!("grid: need n >= 3, got {n}")));
        }
        if !(radius > 0.0) {
            return Err(QwError::Config(format!("grid: radius {radius} <= 0")));
        }
        let h = radius / (n - 1) as f64;
        let omega = angular_factor(dim);
        let nd = dim as f64;
        let nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                let lo = (nodes[i] - 0.5 * h).max(0.0);
                let hi = (nodes[i] + 0.5 * h).min(radius);
                omega * (hi.powf(nd) - lo.powf(nd)) / nd
            })
            .collect();
        let face: Vec<f64> = (0..n - 1)
            .map(|i| omega * (nodes[i] + 0.5 * h).powi(dim as i32 - 1))
            .collect();
        let mut free = vec![true; n];
        free[n - 1] = false;
        Ok(Grid {
            dim,
            x0: 0.0,
            x1: radius,
            n,
            h,
            nodes,
            weights,
            face,
            free,
        })
    }

    /// Default domain for dimension N: [-R, R] for N = 1, [0, R] radial otherwise.
    pub fn new(dim: usize, radius: f64, n: usize) -> Result<Grid> {
        match dim {
            1 => Grid::interval(-radius, radius, n),
            2 | 3 => Grid::radial(dim, radius, n),
            _ => Err(QwError::Config(format!("grid: dimension {dim} not in {{1,2,3}}"))),
        }
    }

    pub fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.n {
            return Err(QwError::GridMismatch {
                expected: self.n,
                got: field.len(),
            });
        }
        Ok(())
    }

    /// Zero boundary field.
    pub fn zeros(&self) -> Field {
        vec![0.0; self.n]
    }

    /// Forces Dirichlet values to zero.
    pub fn project_boundary(&self, field: &mut [f64]) {
        for i in 0..self.n {
            if !self.free[i] {
                field[i] = 0.0;
            }
        }
    }

    /// Applies the stiffness operator (discrete `-Delta`). Dirichlet nodes are
    /// treated as zero on input and produce zero rows on output.
    pub fn laplacian_apply(&self, u: &[f64]) -> Field {
        let n = self.n;
        let h = self.h;
        let get = |i: usize| if self.free[i] { u[i] } else { 0.0 };
        let mut out = vec![0.0; n];
        for i in 0..n {
            if !self.free[i] {
                continue;
            }
            let f_right = if i + 1 < n {
                self.face[i] * (get(i + 1) - get(i)) / h
            } else {
                0.0
            };
            let f_left = if i > 0 {
                self.face[i - 1] * (get(i) - get(i - 1)) / h
            } else {
                0.0 // Neumann closure at r = 0
            };
            out[i] = -(f_right - f_left) / self.weights[i];
        }
        out
    }

    /// Quadrature of a nodal field.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        field.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Weighted L^2 inner product.
    pub fn l2_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    pub fn l2_norm(&self, a: &[f64]) -> f64 {
        self.l2_inner(a, a).sqrt()
    }

    /// `L^q` norm, q >= 1.
    pub fn lq_norm(&self, field: &[f64], q: f64) -> Result<f64> {
        if q < 1.0 {
            return Err(QwError::Domain(format!("lq_norm: q = {q} < 1")));
        }
        let s: f64 = field
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v.abs().powf(q) * w)
            .sum();
        Ok(s.powf(1.0 / q))
    }

    /// Discrete Dirichlet form `int grad(a) . grad(b)` as the face sum; exact
    /// companion of the stiffness operator.
    pub fn dirichlet_form(&self, a: &[f64], b: &[f64]) -> f64 {
        let h = self.h;
        let mut s = 0.0;
        for i in 0..self.n - 1 {
            let da = (a[i + 1] - a[i]) / h;
            let db = (b[i + 1] - b[i]) / h;
            s += self.face[i] * da * db * h;
        }
        s
    }

    /// Inner product of the working space: `int (grad a . grad b + Vt a b)`
    /// with the shifted potential sampled at the nodes.
    pub fn x_inner(&self, v_tilde: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_len(a)?;
        self.check_len(b)?;
        self.check_len(v_tilde)?;
        let mass: f64 = a
            .iter()
            .zip(b)
            .zip(v_tilde)
            .zip(&self.weights)
            .map(|(((x, y), vt), w)| x * y * vt * w)
            .sum();
        Ok(self.dirichlet_form(a, b) + mass)
    }

    pub fn x_norm(&self, v_tilde: &[f64], a: &[f64]) -> Result<f64> {
        Ok(self.x_inner(v_tilde, a, a)?.max(0.0).sqrt())
    }

    /// Indices of free (non-Dirichlet) nodes.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.free[i]).collect()
    }

    /// Symmetric tridiagonal representation of `-Delta + diag(pot)` restricted
    /// to free nodes, via the similarity transform `W^{1/2} M W^{-1/2}`.
    pub fn sym_operator(&self, pot: &[f64]) -> crate::linalg::SymTridiag {
        let idx = self.free_indices();
        let m = idx.len();
        let h = self.h;
        let mut d = vec![0.0; m];
        let mut e = vec![0.0; m - 1];
        for (k, &i) in idx.iter().enumerate() {
            let f_right = if i + 1 < self.n { self.face[i] } else { 0.0 };
            let f_left = if i > 0 { self.face[i - 1] } else { 0.0 };
            d[k] = (f_right + f_left) / (h * self.weights[i]) + pot[i];
        }
        for k in 0..m - 1 {
            let i = idx[k];
            debug_assert_eq!(idx[k + 1], i + 1);
            // off-diagonal: -face[i]/(h w_i) scaled by sqrt(w_i/w_{i+1})
            e[k] = -self.face[i] / (h * (self.weights[i] * self.weights[i + 1]).sqrt());
        }
        crate::linalg::SymTridiag { d, e }
    }

    /// Maps a free-node vector in similarity variables back to a full-grid
    /// field, L^2-normalized under the quadrature weights.
    pub fn field_from_sym(&self, v: &[f64]) -> Field {
        let idx = self.free_indices();
        let mut out = vec![0.0; self.n];
        for (k, &i) in idx.iter().enumerate() {
            out[i] = v[k] / self.weights[i].sqrt();
        }
        let nrm = self.l2_norm(&out);
        if nrm > 0.0 {
            for v in out.iter_mut() {
                *v /= nrm;
            }
        }
        out
    }
}

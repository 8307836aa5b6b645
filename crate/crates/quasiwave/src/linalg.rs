//! Tridiagonal kernels: Sturm-count bisection for eigenvalues, inverse
//! iteration for eigenvectors, pivoted tridiagonal solves, and a matrix-free
//! MINRES for symmetric (possibly indefinite) systems in a weighted inner
//! product.

use crate::error::{QwError, Result};

/// Symmetric tridiagonal matrix: diagonal `d` (len n), off-diagonal `e` (len n-1).
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiag {
    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = self.d[i] * x[i];
            if i > 0 {
                v += self.e[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.e[i] * x[i + 1];
            }
            y[i] = v;
        }
        y
    }

    /// Number of eigenvalues strictly below `x` (Sturm count via LDL^T).
    pub fn count_below(&self, x: f64) -> usize {
        let n = self.n();
        let mut count = 0;
        let mut q = self.d[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            if q == 0.0 {
                q = 1e-300;
            }
            q = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / q;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.e[i - 1].abs();
            }
            if i + 1 < n {
                r += self.e[i].abs();
            }
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// The `k` smallest eigenvalues by bisection on the Sturm count.
    pub fn smallest_eigenvalues(&self, k: usize) -> Vec<f64> {
        let (glo, ghi) = self.gershgorin();
        let span = (ghi - glo).max(1.0);
        let mut out = Vec::with_capacity(k);
        for j in 0..k.min(self.n()) {
            let mut lo = glo;
            let mut hi = ghi;
            // eigenvalue j (0-based): smallest x with count_below(x) >= j+1
            while hi - lo > 1e-14 * span + f64::EPSILON * lo.abs().max(hi.abs()) {
                let mid = 0.5 * (lo + hi);
                if self.count_below(mid) >= j + 1 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        out
    }

    /// Eigenvector for an isolated eigenvalue via shifted inverse iteration,
    /// reorthogonalized against `prev` (for clustered eigenvalues).
    pub fn eigenvector(&self, lambda: f64, prev: &[Vec<f64>], seed: u64) -> Result<Vec<f64>> {
        let n = self.n();
        let (glo, ghi) = self.gershgorin();
        let scale = (ghi - glo).max(1.0);
        // deterministic pseudo-random start
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let lu = TridiagLu::factor(
            &self.d.iter().map(|v| v - lambda).collect::<Vec<_>>(),
            &self.e,
            &self.e,
            1e-14 * scale,
        );
        for _ in 0..6 {
            for p in prev {
                let c: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
                for i in 0..n {
                    x[i] -= c * p[i];
                }
            }
            let nrm = norm2(&x);
            if nrm == 0.0 {
                return Err(QwError::Numeric("inverse iteration: zero vector".into()));
            }
            for v in x.iter_mut() {
                *v /= nrm;
            }
            x = lu.solve(&x);
        }
        for p in prev {
            let c: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
            for i in 0..n {
                x[i] -= c * p[i];
            }
        }
        let nrm = norm2(&x);
        for v in x.iter_mut() {
            *v /= nrm;
        }
        // residual check
        let ax = self.apply(&x);
        let res: f64 = ax
            .iter()
            .zip(&x)
            .map(|(a, v)| (a - lambda * v) * (a - lambda * v))
            .sum::<f64>()
            .sqrt();
        if res > 1e-6 * lambda.abs().max(1.0) {
            return Err(QwError::Numeric(format!(
                "inverse iteration residual {res:.3e} at lambda = {lambda:.6e}"
            )));
        }
        Ok(x)
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// LU factorization with partial pivoting of a tridiagonal matrix
/// (lower `a`, diagonal `b`, upper `c`). Pivoting introduces a second
/// superdiagonal.
pub struct TridiagLu {
    n: usize,
    low: Vec<f64>,   // multipliers
    diag: Vec<f64>,  // U diagonal
    up1: Vec<f64>,   // U first superdiagonal
    up2: Vec<f64>,   // U second superdiagonal
    swap: Vec<bool>, // row interchanged with the next
}

impl TridiagLu {
    pub fn factor(b: &[f64], a: &[f64], c: &[f64], pivot_floor: f64) -> Self {
        let n = b.len();
        let mut diag = b.to_vec();
        let mut up1 = vec![0.0; n];
        let mut up2 = vec![0.0; n];
        up1[..n - 1].copy_from_slice(&c[..n - 1]);
        let mut low = vec![0.0; n];
        let mut swap = vec![false; n];
        let sub = a.to_vec(); // subdiagonal entries a[i] couples rows i+1, i
        for i in 0..n - 1 {
            let below = sub[i];
            if below.abs() > diag[i].abs() {
                swap[i] = true;
                // exchange row i and i+1
                let (d0, u0, u20) = (diag[i], up1[i], up2[i]);
                diag[i] = below;
                up1[i] = diag[i + 1];
                up2[i] = up1[i + 1];
                diag[i + 1] = u0;
                up1[i + 1] = u20;
                // row i originally had no up2 beyond; after swap row i+1 gets d0 in diag pos? handled below
                low[i + 1] = d0;
            } else {
                low[i + 1] = below;
            }
            let mut piv = diag[i];
            if piv.abs() < pivot_floor {
                piv = if piv >= 0.0 { pivot_floor } else { -pivot_floor };
                diag[i] = piv;
            }
            let m = low[i + 1] / piv;
            low[i + 1] = m;
            diag[i + 1] -= m * up1[i];
            if i + 2 < n {
                // up2 of row i affects up1 of row i+1
                up1[i + 1] -= m * up2[i];
            }
        }
        if diag[n - 1].abs() < pivot_floor {
            diag[n - 1] = if diag[n - 1] >= 0.0 {
                pivot_floor
            } else {
                -pivot_floor
            };
        }
        TridiagLu {
            n,
            low,
            diag,
            up1,
            up2,
            swap,
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = rhs.to_vec();
        for i in 0..n - 1 {
            if self.swap[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= self.low[i + 1] * y[i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = y[i];
            if i + 1 < n {
                v -= self.up1[i] * x[i + 1];
            }
            if i + 2 < n {
                v -= self.up2[i] * x[i + 2];
            }
            x[i] = v / self.diag[i];
        }
        x
    }
}

/// Dense Gaussian elimination with partial pivoting for the small
/// coefficient-space systems of the subspace maximization. Returns `None`
/// when the matrix is numerically singular.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|row| row.clone()).collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()
        })?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = rhs[i];
        for k in i + 1..n {
            v -= m[i][k] * x[k];
        }
        x[i] = v / m[i][i];
        if !x[i].is_finite() {
            return None;
        }
    }
    Some(x)
}

/// MINRES for `A x = b` with `A` self-adjoint in the inner product defined by
/// positive weights `w` (i.e. `w_i A_ij = w_j A_ji`). Returns the iterate and
/// its residual norm in that inner product.
pub fn minres<F>(apply: F, b: &[f64], w: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).zip(w).map(|((a, b), w)| a * b * w).sum() };
    let mut x = vec![0.0; n];
    let beta1 = dot(b, b).sqrt();
    if beta1 == 0.0 {
        return (x, 0.0);
    }
    let mut q_prev = vec![0.0; n];
    let mut q: Vec<f64> = b.iter().map(|v| v / beta1).collect();
    let mut beta = 0.0f64; // beta_k linking q_k to q_{k-1}
    let (mut c_prev2, mut s_prev2) = (1.0f64, 0.0f64);
    let (mut c_prev, mut s_prev) = (1.0f64, 0.0f64);
    let mut d_prev = vec![0.0; n];
    let mut d_prev2 = vec![0.0; n];
    let mut phibar = beta1;

    for _ in 0..max_iter {
        let mut v = apply(&q);
        let alpha = dot(&q, &v);
        for i in 0..n {
            v[i] -= alpha * q[i] + beta * q_prev[i];
        }
        // full local reorthogonalization is overkill; Lanczos two-term is enough here
        let beta_next = dot(&v, &v).sqrt();

        // apply the two previous rotations to the new column (beta, alpha, beta_next)
        let eps = s_prev2 * beta;
        let delta = c_prev2 * beta;
        let deltahat = c_prev * delta + s_prev * alpha;
        let gamma = -s_prev * delta + c_prev * alpha;
        let r = (gamma * gamma + beta_next * beta_next).sqrt();
        let (c, s) = if r > 0.0 {
            (gamma / r, beta_next / r)
        } else {
            (1.0, 0.0)
        };

        let rk = if r > 0.0 { r } else { f64::MIN_POSITIVE };
        let mut d = vec![0.0; n];
        for i in 0..n {
            d[i] = (q[i] - deltahat * d_prev[i] - eps * d_prev2[i]) / rk;
        }
        let phi = c * phibar;
        for i in 0..n {
            x[i] += phi * d[i];
        }
        phibar = -s * phibar;

        if phibar.abs() <= tol * beta1 {
            break;
        }
        if beta_next == 0.0 {
            break;
        }
        for i in 0..n {
            v[i] /= beta_next;
        }
        q_prev = std::mem::replace(&mut q, v);
        beta = beta_next;
        d_prev2 = std::mem::replace(&mut d_prev, d);
        c_prev2 = c_prev;
        s_prev2 = s_prev;
        c_prev = c;
        s_prev = s;
    }
    (x, phibar.abs())
}

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Largest chain handed to the dense stationary solver.
pub const DENSE_LIMIT: usize = 6000;

/// Truncation tolerance of the uniformized series.
pub const UNIFORMIZATION_TOL: f64 = 1e-12;

/// Sparse generator of a finite continuous-time chain.
///
/// Off-diagonal rates are stored per row, sorted by column with duplicates
/// merged. The diagonal is minus the row sum minus an optional killing rate,
/// so sub-generators of absorbed chains fit the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl RateMatrix {
    /// Build from raw `(column, rate)` lists; zero rates and self-loops are
    /// dropped.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        Self::with_killing(rows, vec![0.0; n])
    }

    pub fn with_killing(rows: Vec<Vec<(usize, f64)>>, killing: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let mut out = Vec::with_capacity(n);
        let mut diag = Vec::with_capacity(n);
        for (a, mut row) in rows.into_iter().enumerate() {
            row.retain(|&(b, r)| b != a && r != 0.0);
            if let Some(&(b, r)) = row.iter().find(|&&(b, r)| b >= n || !(r >= 0.0 && r.is_finite())) {
                return Err(Error::InvalidParameter(format!("bad rate {r} from {a} to {b}")));
            }
            row.sort_by_key(|&(b, _)| b);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (b, r) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == b => last.1 += r,
                    _ => merged.push((b, r)),
                }
            }
            let sum: f64 = merged.iter().map(|&(_, r)| r).sum();
            diag.push(-(sum + killing[a]));
            out.push(merged);
        }
        Ok(Self { rows: out, diag })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, a: usize) -> &[(usize, f64)] {
        &self.rows[a]
    }

    pub fn diag(&self, a: usize) -> f64 {
        self.diag[a]
    }

    pub fn rate(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return self.diag[a];
        }
        self.rows[a]
            .binary_search_by_key(&b, |&(c, _)| c)
            .map_or(0.0, |k| self.rows[a][k].1)
    }

    /// Largest |row sum|; zero for a conservative generator.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.len())
            .map(|a| (self.diag[a] + self.rows[a].iter().map(|&(_, r)| r).sum::<f64>()).abs())
            .fold(0.0, f64::max)
    }

    /// `(Q f)(a) = Σ_b q(a,b) f(b)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|a| self.diag[a] * f[a] + self.rows[a].iter().map(|&(b, r)| r * f[b]).sum::<f64>())
            .collect()
    }

    /// `(π Q)(b) = Σ_a π(a) q(a,b)`.
    pub fn apply_left(&self, pi: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = pi.iter().zip(&self.diag).map(|(p, d)| p * d).collect();
        for (a, row) in self.rows.iter().enumerate() {
            for &(b, r) in row {
                out[b] += pi[a] * r;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for a in 0..n {
            m[(a, a)] = self.diag[a];
            for &(b, r) in &self.rows[a] {
                m[(a, b)] = r;
            }
        }
        m
    }

    /// Generator of two independent chains on the product space, with the
    /// pair `(a, b)` at index `a · |B| + b`.
    pub fn kronecker_sum(a: &RateMatrix, b: &RateMatrix) -> Result<RateMatrix> {
        let (na, nb) = (a.len(), b.len());
        let mut rows = Vec::with_capacity(na * nb);
        for i in 0..na {
            for j in 0..nb {
                let mut row = Vec::new();
                row.extend(a.rows[i].iter().map(|&(k, r)| (k * nb + j, r)));
                row.extend(b.rows[j].iter().map(|&(k, r)| (i * nb + k, r)));
                rows.push(row);
            }
        }
        RateMatrix::from_rows(rows)
    }

    fn reaches_all(&self, reverse: bool) -> bool {
        let n = self.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, row) in self.rows.iter().enumerate() {
            for &(b, _) in row {
                if reverse {
                    adj[b].push(a);
                } else {
                    adj[a].push(b);
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(a) = stack.pop() {
            for &b in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn is_irreducible(&self) -> bool {
        !self.is_empty() && self.reaches_all(false) && self.reaches_all(true)
    }
}

/// Stationary law of an irreducible conservative generator, by a dense LU
/// solve of `πQ = 0, Σπ = 1` with one round of iterative refinement.
pub fn stationary_solve(q: &RateMatrix) -> Result<Vec<f64>> {
    let n = q.len();
    if n > DENSE_LIMIT {
        return Err(Error::StateSpaceOverflow {
            states: n,
            limit: DENSE_LIMIT,
        });
    }
    if !q.is_irreducible() {
        return Err(Error::Reducible);
    }
    // rows of A are the equations (Qᵀ π)_b = 0, the last replaced by Σπ = 1
    let mut a = q.to_dense().transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut pi = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular stationary system".into()))?;
    let r = &rhs - &a * &pi;
    if let Some(c) = lu.solve(&r) {
        pi += c;
    }
    Ok(pi.iter().map(|&x| x.max(0.0)).collect())
}

/// Max-norm residual of a claimed stationary law: `max |πQ|` and `|Σπ − 1|`.
pub fn stationary_residual(q: &RateMatrix, pi: &[f64]) -> f64 {
    let flow = q.apply_left(pi).into_iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    flow.max((pi.iter().sum::<f64>() - 1.0).abs())
}

/// `(e^{tQ} f)` for every starting state, by uniformization. The Poisson
/// series is cut once the neglected weight times `‖f‖∞` is below
/// [`UNIFORMIZATION_TOL`].
pub fn transient_apply(q: &RateMatrix, f: &[f64], t: f64) -> Result<Vec<f64>> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("negative time {t}")));
    }
    let lam = (0..q.len()).map(|a| -q.diag(a)).fold(0.0, f64::max);
    if t == 0.0 || lam == 0.0 {
        return Ok(f.to_vec());
    }
    let fmax = f.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let eps = UNIFORMIZATION_TOL / fmax;
    let lt = lam * t;
    let mut v = f.to_vec();
    let mut out = vec![0.0; f.len()];
    let mut mass = 0.0;
    let cap = (lt + 50.0 * lt.sqrt() + 1000.0) as u64;
    for k in 0..=cap {
        let w = (-lt + k as f64 * lt.ln() - ln_gamma(k as f64 + 1.0)).exp();
        for (o, x) in out.iter_mut().zip(&v) {
            *o += w * x;
        }
        mass += w;
        if 1.0 - mass <= eps && k as f64 >= lt {
            return Ok(out);
        }
        let qv = q.apply(&v);
        for (x, d) in v.iter_mut().zip(qv) {
            *x += d / lam;
        }
    }
    Err(Error::NonConvergence { cap: cap as usize })
}

/// `E_a f(X_t)` for the chain started in state `a`.
pub fn transient_expectation(q: &RateMatrix, f: &[f64], t: f64, a: usize) -> Result<f64> {
    Ok(transient_apply(q, f, t)?[a])
}

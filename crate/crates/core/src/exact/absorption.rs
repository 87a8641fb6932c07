use statrs::function::gamma::ln_gamma;

use super::space::{occupation_vectors, StateIndex};
use crate::error::{Error, Result};
use crate::lattice::{LabeledPositions, Site};
use crate::measures::SipParams;

/// Solve a tridiagonal system `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
pub fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let lower = if i > 0 { sub[i] } else { 0.0 };
        let denom = diag[i] - lower * if i > 0 { c[i - 1] } else { 0.0 };
        if denom == 0.0 {
            return Err(Error::Solver(format!("zero pivot at row {i}")));
        }
        c[i] = if i + 1 < n { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower * if i > 0 { d[i - 1] } else { 0.0 }) / denom;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = d[i] - if i + 1 < n { c[i] * x[i + 1] } else { 0.0 };
    }
    Ok(x)
}

/// Probability that a lone dual particle started at `i ∈ {0..N+1}` is
/// absorbed at N+1, for per-particle absorption rates `left` and `right`.
pub fn absorption_single_with(n: usize, left: f64, right: f64, p: SipParams) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidRange("empty segment".into()));
    }
    let h = p.half();
    let rate_left = |i: usize| if i == 1 { left } else { h };
    let rate_right = |i: usize| if i == n { right } else { h };
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 1..=n {
        let k = i - 1;
        diag[k] = rate_left(i) + rate_right(i);
        if i > 1 {
            sub[k] = -rate_left(i);
        }
        if i < n {
            sup[k] = -rate_right(i);
        } else {
            rhs[k] = right;
        }
    }
    let x = thomas(&sub, &diag, &sup, &rhs)?;
    let mut out = Vec::with_capacity(n + 2);
    out.push(0.0);
    out.extend(x);
    out.push(1.0);
    Ok(out)
}

/// Right-absorption probabilities of a rate-m/2 walk on `{1..N}` absorbed
/// at rate m/2 into 0 and N+1; entry `i` equals `i/(N+1)`.
pub fn absorption_solve_single(n: usize, p: SipParams) -> Result<Vec<f64>> {
    absorption_single_with(n, p.half(), p.half(), p)
}

/// Law of the number of dual particles absorbed at the left site.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionLaw {
    /// `probs[k]` = P(k particles end at 0 and the rest at N+1).
    pub probs: Vec<f64>,
}

impl AbsorptionLaw {
    pub fn particles(&self) -> usize {
        self.probs.len() - 1
    }

    /// `E[ρ_L^{#left} ρ_R^{#right}]`.
    pub fn moment(&self, rho_l: f64, rho_r: f64) -> f64 {
        let n = self.particles() as i32;
        self.probs
            .iter()
            .enumerate()
            .map(|(k, pk)| pk * rho_l.powi(k as i32) * rho_r.powi(n - k as i32))
            .sum()
    }
}

/// Conjugate-gradient tolerance for the level systems.
const CG_TOL: f64 = 1e-14;

/// One level of the dual: configurations of `b` live particles on `{1..N}`.
struct Level {
    index: StateIndex,
    /// bulk moves `(target, rate)` per state
    moves: Vec<Vec<(usize, f64)>>,
    /// total exit rate (bulk moves plus absorptions)
    exit: Vec<f64>,
    /// stationary weights of the bulk dynamics
    weight: Vec<f64>,
}

impl Level {
    fn new(n: usize, b: u32, left: f64, right: f64, p: SipParams) -> Result<Self> {
        let h = p.half();
        let index = StateIndex::new(occupation_vectors(n, b)?)?;
        let mut moves = Vec::with_capacity(index.len());
        let mut exit = Vec::with_capacity(index.len());
        let mut weight = Vec::with_capacity(index.len());
        for s in index.iter() {
            let mut row = Vec::new();
            let mut out = left * s[0] as f64 + right * s[n - 1] as f64;
            for i in 0..n {
                if s[i] == 0 {
                    continue;
                }
                for j in [i.wrapping_sub(1), i + 1] {
                    if j < n {
                        let rate = s[i] as f64 * (h + s[j] as f64);
                        let mut t = s.to_vec();
                        t[i] -= 1;
                        t[j] += 1;
                        row.push((index.index_of(&t).expect("same level"), rate));
                        out += rate;
                    }
                }
            }
            moves.push(row);
            exit.push(out);
            let lw: f64 = s
                .iter()
                .map(|&k| ln_gamma(h + k as f64) - ln_gamma(h) - ln_gamma(k as f64 + 1.0))
                .sum();
            weight.push(lw);
        }
        let top = weight.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for w in weight.iter_mut() {
            *w = (*w - top).exp();
        }
        Ok(Self {
            index,
            moves,
            exit,
            weight,
        })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|a| self.exit[a] * x[a] - self.moves[a].iter().map(|&(b, r)| r * x[b]).sum::<f64>())
            .collect()
    }

    /// Solve `A x = rhs` where `A = diag(exit) − bulk moves` is self-adjoint
    /// in the weighted inner product. Jacobi-preconditioned CG.
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let dot = |u: &[f64], v: &[f64]| -> f64 { (0..n).map(|i| self.weight[i] * u[i] * v[i]).sum() };
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut x: Vec<f64> = (0..n).map(|i| rhs[i] / self.exit[i]).collect();
        if scale == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let ax = self.apply(&x);
        let mut r: Vec<f64> = (0..n).map(|i| rhs[i] - ax[i]).collect();
        let mut z: Vec<f64> = (0..n).map(|i| r[i] / self.exit[i]).collect();
        let mut d = z.clone();
        let mut rz = dot(&r, &z);
        let cap = 20 * n + 1000;
        for _ in 0..cap {
            if r.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= CG_TOL * scale {
                return Ok(x);
            }
            let ad = self.apply(&d);
            let step = rz / dot(&d, &ad);
            for i in 0..n {
                x[i] += step * d[i];
                r[i] -= step * ad[i];
            }
            for i in 0..n {
                z[i] = r[i] / self.exit[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                d[i] = z[i] + beta * d[i];
            }
        }
        Err(Error::NonConvergence { cap })
    }
}

/// Exact law of how many dual particles started at `start` end at 0, for
/// per-particle absorption rates `left` and `right`.
///
/// The live particle number only decreases, so the system is solved level
/// by level. On each level the bulk moves are reversible for the weights
/// `Π Γ(m/2+ξ_i)/(Γ(m/2) ξ_i!)`, which makes the level matrix self-adjoint
/// and lets conjugate gradients run on it directly.
pub fn dual_absorption_law(
    start: &LabeledPositions,
    n: usize,
    left: f64,
    right: f64,
    p: SipParams,
) -> Result<AbsorptionLaw> {
    if n == 0 {
        return Err(Error::InvalidRange("empty segment".into()));
    }
    let top = n as Site + 1;
    if let Some(&x) = start.as_slice().iter().find(|&&x| x < 0 || x > top) {
        return Err(Error::OutOfRange {
            site: x,
            lo: 0,
            hi: top,
        });
    }
    let already_left = start.count_at(0) as usize;
    let mut live = vec![0i64; n];
    for &x in start.as_slice() {
        if x >= 1 && x <= n as Site {
            live[(x - 1) as usize] += 1;
        }
    }
    let b_max: u32 = live.iter().sum::<i64>() as u32;
    // prev[a][j] = P(j of the live particles end left | level configuration a)
    let mut prev_index = StateIndex::new(occupation_vectors(n, 0)?)?;
    let mut prev: Vec<Vec<f64>> = vec![vec![1.0]];
    for b in 1..=b_max {
        let level = Level::new(n, b, left, right, p)?;
        let states = level.index.len();
        let width = b as usize + 1;
        let mut rhs = vec![vec![0.0; states]; width];
        for (a, s) in level.index.iter().enumerate() {
            if s[0] > 0 {
                let mut t = s.to_vec();
                t[0] -= 1;
                let g = &prev[prev_index.index_of(&t).expect("lower level")];
                let rate = left * s[0] as f64;
                for (j, v) in g.iter().enumerate() {
                    rhs[j + 1][a] += rate * v;
                }
            }
            if s[n - 1] > 0 {
                let mut t = s.to_vec();
                t[n - 1] -= 1;
                let g = &prev[prev_index.index_of(&t).expect("lower level")];
                let rate = right * s[n - 1] as f64;
                for (j, v) in g.iter().enumerate() {
                    rhs[j][a] += rate * v;
                }
            }
        }
        let cols: Vec<Vec<f64>> = rhs.iter().map(|r| level.solve(r)).collect::<Result<_>>()?;
        prev = (0..states).map(|a| cols.iter().map(|c| c[a]).collect()).collect();
        prev_index = level.index;
    }
    let g = &prev[prev_index.index_of(&live).expect("start is enumerated")];
    let total = start.len();
    let mut probs = vec![0.0; total + 1];
    for (j, v) in g.iter().enumerate() {
        probs[already_left + j] = *v;
    }
    Ok(AbsorptionLaw { probs })
}

/// [`dual_absorption_law`] with both absorption rates equal to m/2.
pub fn dual_absorption_solve(start: &LabeledPositions, n: usize, p: SipParams) -> Result<AbsorptionLaw> {
    dual_absorption_law(start, n, p.half(), p.half(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{build_generator, Model};
    use nalgebra::{DMatrix, DVector};

    fn p(m: f64) -> SipParams {
        SipParams::new(m).unwrap()
    }

    #[test]
    fn single_particle_is_linear() {
        for n in [1usize, 2, 9, 50, 200] {
            for m in [0.5, 2.0, 7.0] {
                let h = absorption_solve_single(n, p(m)).unwrap();
                assert_eq!(h[0], 0.0);
                for (i, v) in h.iter().enumerate() {
                    assert!((v - i as f64 / (n as f64 + 1.0)).abs() <= 1e-12, "n={n} i={i}");
                }
            }
        }
        let h = absorption_solve_single(1, p(1.0)).unwrap();
        assert!((h[1] - 0.5).abs() < 1e-15);
        let h = absorption_solve_single(9, p(2.0)).unwrap();
        assert!((h[3] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn thomas_matches_dense() {
        let sub = [0.0, -1.0, 2.0, -0.5];
        let diag = [4.0, 5.0, 6.0, 3.0];
        let sup = [1.0, -2.0, 0.5, 0.0];
        let rhs = [1.0, 2.0, 3.0, 4.0];
        let x = thomas(&sub, &diag, &sup, &rhs).unwrap();
        let mut a = DMatrix::zeros(4, 4);
        for i in 0..4 {
            a[(i, i)] = diag[i];
            if i > 0 {
                a[(i, i - 1)] = sub[i];
            }
            if i < 3 {
                a[(i, i + 1)] = sup[i];
            }
        }
        let y = a.lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
        for i in 0..4 {
            assert!((x[i] - y[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn one_particle_law_reduces_to_single_solve() {
        let n = 7;
        for i in 0..=8 {
            let law = dual_absorption_solve(&LabeledPositions::new(vec![i]), n, p(1.5)).unwrap();
            let right = i as f64 / 8.0;
            assert!((law.probs[1] - (1.0 - right)).abs() < 1e-12);
            assert!((law.probs[0] - right).abs() < 1e-12);
        }
    }

    #[test]
    fn all_absorbed_at_left() {
        let law = dual_absorption_solve(&LabeledPositions::new(vec![0, 0, 0]), 4, p(2.0)).unwrap();
        assert_eq!(law.probs, vec![0.0, 0.0, 0.0, 1.0]);
    }

    // Independent route: dense LU on the full absorbing generator.
    fn dense_law(start: &[Site], n: usize, left: f64, right: f64, m: f64) -> Vec<f64> {
        let k = start.len() as u32;
        let g = build_generator(
            Model::DualAbsorbing {
                sites: n,
                particles: k,
                left,
                right,
            },
            p(m),
        )
        .unwrap();
        let transient: Vec<usize> = (0..g.index.len()).filter(|&a| g.q.diag(a) != 0.0).collect();
        let pos: std::collections::HashMap<usize, usize> = transient.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let t = transient.len();
        let mut a = DMatrix::zeros(t, t);
        let mut out = vec![0.0; k as usize + 1];
        let mut rhs = DMatrix::zeros(t, k as usize + 1);
        for (i, &s) in transient.iter().enumerate() {
            a[(i, i)] = g.q.diag(s);
            for &(b, r) in g.q.row(s) {
                match pos.get(&b) {
                    Some(&j) => a[(i, j)] = r,
                    None => {
                        let left_count = g.index.state(b)[0] as usize;
                        rhs[(i, left_count)] -= r;
                    }
                }
            }
        }
        let sol = a.lu().solve(&rhs).unwrap();
        let mut v = vec![0i64; n + 2];
        for &x in start {
            v[x as usize] += 1;
        }
        let s = g.index.index_of(&v).unwrap();
        let i = pos[&s];
        for j in 0..out.len() {
            out[j] = sol[(i, j)];
        }
        out
    }

    #[test]
    fn agrees_with_dense_generator_solve() {
        let cases: [(&[Site], usize, f64, f64, f64); 4] = [
            (&[2, 4], 5, 1.0, 1.0, 2.0),
            (&[1, 1, 3], 4, 0.5, 0.5, 1.0),
            (&[3, 3], 6, 0.3, 2.0, 3.5),
            (&[0, 2, 5], 5, 1.0, 1.0, 2.0),
        ];
        for (start, n, left, right, m) in cases {
            let law = dual_absorption_law(&LabeledPositions::new(start.to_vec()), n, left, right, p(m)).unwrap();
            let dense = dense_law(start, n, left, right, m);
            let sum: f64 = law.probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for (a, b) in law.probs.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-11, "{start:?}: {:?} vs {dense:?}", law.probs);
            }
        }
    }

    #[test]
    fn inclusion_correlates_absorption_sites() {
        // two particles started together stick: both-right exceeds the
        // product of the one-particle marginals
        let n = 10;
        let law = dual_absorption_solve(&LabeledPositions::new(vec![5, 5]), n, p(1.0)).unwrap();
        let single = 5.0 / 11.0;
        assert!(law.probs[0] > single * single + 1e-3);
        assert!((law.moment(0.0, 1.0) - law.probs[0]).abs() < 1e-15);
    }
}

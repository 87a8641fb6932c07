use super::matrix::RateMatrix;
use super::space::{capped_vectors, occupation_vectors, tuples, StateIndex};
use crate::error::{Error, Result};
use crate::measures::{ReservoirParams, SipParams};

/// Finite chains with an exact generator.
///
/// Occupation states are vectors over the sites in order; labeled states
/// are position tuples. Rings use sites `0..sites`; segments use `1..=sites`
/// stored at vector indices `0..sites`, except the absorbing dual whose
/// vectors also carry the two absorbing sites at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    /// Occupation numbers of the inclusion process on a ring.
    SipRing { sites: usize, particles: u32 },
    /// Labeled inclusion particles on a ring.
    SipLabeledRing { sites: usize, particles: usize },
    /// Labeled independent walkers on a ring.
    IrwRing { sites: usize, particles: usize },
    /// Boundary-driven process with every occupation capped at `cap`;
    /// transitions that would exceed the cap are suppressed.
    SipSegment {
        sites: usize,
        res: ReservoirParams,
        cap: u32,
    },
    /// Absorbing dual on `{0..sites+1}` with per-particle absorption rates.
    DualAbsorbing {
        sites: usize,
        particles: u32,
        left: f64,
        right: f64,
    },
    /// Basic coupling on a ring: positions `(Y_1..Y_n, Ỹ_1..Ỹ_n)`.
    CoupledRing { sites: usize, particles: usize },
}

/// Generator together with its state enumeration.
#[derive(Debug, Clone)]
pub struct Generator {
    pub index: StateIndex,
    pub q: RateMatrix,
}

impl Generator {
    /// Vector of `f` evaluated on every state.
    pub fn tabulate(&self, f: impl Fn(&[i64]) -> f64) -> Vec<f64> {
        self.index.iter().map(f).collect()
    }
}

fn ring_check(sites: usize) -> Result<()> {
    if sites < 3 {
        return Err(Error::InvalidRange(format!("ring needs at least 3 sites, got {sites}")));
    }
    Ok(())
}

fn assemble(index: StateIndex, moves: impl Fn(&[i64], &mut Vec<(Vec<i64>, f64)>)) -> Result<Generator> {
    let mut rows = Vec::with_capacity(index.len());
    let mut buf = Vec::new();
    for s in index.iter() {
        buf.clear();
        moves(s, &mut buf);
        let mut row = Vec::with_capacity(buf.len());
        for (t, r) in buf.drain(..) {
            let b = index
                .index_of(&t)
                .ok_or_else(|| Error::Solver(format!("transition leaves the state space: {t:?}")))?;
            row.push((b, r));
        }
        rows.push(row);
    }
    let q = RateMatrix::from_rows(rows)?;
    Ok(Generator { index, q })
}

/// Bulk inclusion moves of an occupation vector over `bonds`.
fn sip_moves(s: &[i64], bonds: &[(usize, usize)], h: f64, out: &mut Vec<(Vec<i64>, f64)>) {
    for &(i, j) in bonds {
        if s[i] > 0 {
            let mut t = s.to_vec();
            t[i] -= 1;
            t[j] += 1;
            out.push((t, s[i] as f64 * (h + s[j] as f64)));
        }
    }
}

fn ring_bonds(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| [(i, (i + n - 1) % n), (i, (i + 1) % n)]).collect()
}

fn path_bonds(lo: usize, hi: usize) -> Vec<(usize, usize)> {
    (lo..hi).flat_map(|i| [(i, i + 1), (i + 1, i)]).collect()
}

pub fn build_generator(model: Model, p: SipParams) -> Result<Generator> {
    let h = p.half();
    match model {
        Model::SipRing { sites, particles } => {
            ring_check(sites)?;
            let bonds = ring_bonds(sites);
            let index = StateIndex::new(occupation_vectors(sites, particles)?)?;
            assemble(index, |s, out| sip_moves(s, &bonds, h, out))
        }
        Model::SipLabeledRing { sites, particles } | Model::IrwRing { sites, particles } => {
            ring_check(sites)?;
            let inclusion = matches!(model, Model::SipLabeledRing { .. });
            let n = sites as i64;
            let index = StateIndex::new(tuples(particles, 0, n - 1)?)?;
            assemble(index, |s, out| {
                for i in 0..s.len() {
                    for e in [-1, 1] {
                        let y = (s[i] + e).rem_euclid(n);
                        let mut rate = h;
                        if inclusion {
                            rate += s.iter().enumerate().filter(|&(k, &x)| k != i && x == y).count() as f64;
                        }
                        let mut t = s.to_vec();
                        t[i] = y;
                        out.push((t, rate));
                    }
                }
            })
        }
        Model::SipSegment { sites, res, cap } => {
            if sites == 0 {
                return Err(Error::InvalidRange("empty segment".into()));
            }
            let bonds = path_bonds(0, sites - 1);
            let index = StateIndex::new(capped_vectors(sites, cap)?)?;
            let cap = cap as i64;
            assemble(index, |s, out| {
                let mut bulk = Vec::new();
                sip_moves(s, &bonds, h, &mut bulk);
                out.extend(bulk.into_iter().filter(|(t, _)| t.iter().all(|&c| c <= cap)));
                let last = sites - 1;
                for (site, birth, death) in [(0, res.alpha, res.gamma), (last, res.sigma, res.beta)] {
                    let n = s[site];
                    if n < cap {
                        let mut t = s.to_vec();
                        t[site] += 1;
                        out.push((t, birth * (h + n as f64)));
                    }
                    if n > 0 {
                        let mut t = s.to_vec();
                        t[site] -= 1;
                        out.push((t, death * n as f64));
                    }
                }
            })
        }
        Model::DualAbsorbing {
            sites,
            particles,
            left,
            right,
        } => {
            if sites == 0 {
                return Err(Error::InvalidRange("empty segment".into()));
            }
            let bonds = path_bonds(1, sites);
            let index = StateIndex::new(occupation_vectors(sites + 2, particles)?)?;
            assemble(index, |s, out| {
                sip_moves(s, &bonds, h, out);
                for (from, to, rate) in [(1, 0, left), (sites, sites + 1, right)] {
                    if s[from] > 0 {
                        let mut t = s.to_vec();
                        t[from] -= 1;
                        t[to] += 1;
                        out.push((t, rate * s[from] as f64));
                    }
                }
            })
        }
        Model::CoupledRing { sites, particles } => {
            ring_check(sites)?;
            let n = sites as i64;
            let index = StateIndex::new(tuples(2 * particles, 0, n - 1)?)?;
            assemble(index, |s, out| {
                let (y, _) = s.split_at(particles);
                for i in 0..particles {
                    for e in [-1, 1] {
                        let mut t = s.to_vec();
                        t[i] = (t[i] + e).rem_euclid(n);
                        t[particles + i] = (t[particles + i] + e).rem_euclid(n);
                        out.push((t, h));
                        let target = (y[i] + e).rem_euclid(n);
                        let pull = y.iter().enumerate().filter(|&(k, &x)| k != i && x == target).count();
                        if pull > 0 {
                            let mut t = s.to_vec();
                            t[i] = target;
                            out.push((t, pull as f64));
                        }
                    }
                }
            })
        }
    }
}

/// Stationary expectation of `f` for the boundary-driven process on
/// `{1..N}`, from the occupation-capped chain. The cap starts at 4 and
/// doubles until two successive values differ by less than `tol`; the cap
/// used is returned with the value.
pub fn truncated_reservoir_expectation(
    sites: usize,
    res: ReservoirParams,
    p: SipParams,
    f: impl Fn(&[i64]) -> f64,
    tol: f64,
) -> Result<(f64, u32)> {
    let mut cap = 4u32;
    let mut last: Option<f64> = None;
    loop {
        let g = build_generator(Model::SipSegment { sites, res, cap }, p)?;
        let pi = super::stationary_solve(&g.q)?;
        let value: f64 = g.index.iter().zip(&pi).map(|(s, w)| w * f(s)).sum();
        if let Some(prev) = last {
            if (value - prev).abs() < tol {
                return Ok((value, cap));
            }
        }
        last = Some(value);
        cap *= 2;
    }
}

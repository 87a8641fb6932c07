use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest state space any exact routine will enumerate.
pub const MAX_STATES: usize = 1_000_000;

/// Bijection between a finite set of integer vectors and `0..len`, in
/// lexicographic order of the vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct StateIndex {
    states: Vec<Vec<i64>>,
    lookup: HashMap<Vec<i64>, usize>,
}

impl StateIndex {
    pub fn new(mut states: Vec<Vec<i64>>) -> Result<Self> {
        if states.len() > MAX_STATES {
            return Err(Error::StateSpaceOverflow {
                states: states.len(),
                limit: MAX_STATES,
            });
        }
        states.sort();
        states.dedup();
        let lookup = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Self { states, lookup })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[i64] {
        &self.states[i]
    }

    pub fn index_of(&self, s: &[i64]) -> Option<usize> {
        self.lookup.get(s).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> {
        self.states.iter().map(|s| s.as_slice())
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn guard(count: f64) -> Result<()> {
    if count > MAX_STATES as f64 {
        return Err(Error::StateSpaceOverflow {
            states: count.min(usize::MAX as f64) as usize,
            limit: MAX_STATES,
        });
    }
    Ok(())
}

/// All occupation vectors of length `len` with the given total.
pub fn occupation_vectors(len: usize, total: u32) -> Result<Vec<Vec<i64>>> {
    if len == 0 {
        return Ok(if total == 0 { vec![vec![]] } else { vec![] });
    }
    guard(binomial(total as u64 + len as u64 - 1, len as u64 - 1))?;
    let mut out = Vec::new();
    let mut cur = vec![0i64; len];
    fill(&mut cur, 0, total as i64, &mut out);
    Ok(out)
}

fn fill(cur: &mut Vec<i64>, at: usize, left: i64, out: &mut Vec<Vec<i64>>) {
    if at + 1 == cur.len() {
        cur[at] = left;
        out.push(cur.clone());
        return;
    }
    for k in 0..=left {
        cur[at] = k;
        fill(cur, at + 1, left - k, out);
    }
}

/// All occupation vectors of length `len` with total at most `max_total`.
pub fn occupation_vectors_upto(len: usize, max_total: u32) -> Result<Vec<Vec<i64>>> {
    let mut out = Vec::new();
    for t in 0..=max_total {
        out.extend(occupation_vectors(len, t)?);
        guard(out.len() as f64)?;
    }
    Ok(out)
}

/// All vectors of length `len` with entries in `0..=cap`.
pub fn capped_vectors(len: usize, cap: u32) -> Result<Vec<Vec<i64>>> {
    guard((cap as f64 + 1.0).powi(len as i32))?;
    tuples(len, 0, cap as i64)
}

/// All vectors of length `n` with entries in `lo..=hi`.
pub fn tuples(n: usize, lo: i64, hi: i64) -> Result<Vec<Vec<i64>>> {
    guard(((hi - lo + 1) as f64).powi(n as i32))?;
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * (hi - lo + 1) as usize);
        for v in &out {
            for x in lo..=hi {
                let mut w = v.clone();
                w.push(x);
                next.push(w);
            }
        }
        out = next;
    }
    Ok(out)
}

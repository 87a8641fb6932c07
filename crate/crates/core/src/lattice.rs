//! Sites, occupation fields and labeled particle positions.
//!
//! Three geometries are supported. A [`BoundaryKind::Ring`] is periodic. A
//! [`BoundaryKind::Segment`] is the bulk `lo..=hi` of a boundary-driven
//! system, with two extra virtual sites `lo - 1` and `hi + 1` that hold
//! reservoir (or absorbed-particle) counts. A [`BoundaryKind::OpenWindow`] is
//! a finite stand-in for the infinite line: particles live strictly inside,
//! and reaching either edge site aborts the simulation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Site index on the one-dimensional lattice.
pub type Site = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    OpenWindow,
    Segment,
    Ring,
}

/// An inclusive range of sites together with its boundary behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteRange {
    lo: Site,
    hi: Site,
    kind: BoundaryKind,
}

impl SiteRange {
    pub fn new(lo: Site, hi: Site, kind: BoundaryKind) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidRange(format!("lo = {lo} > hi = {hi}")));
        }
        if kind == BoundaryKind::Ring && hi - lo + 1 < 3 {
            return Err(Error::InvalidRange(format!(
                "a ring needs at least 3 sites, got {}",
                hi - lo + 1
            )));
        }
        Ok(Self { lo, hi, kind })
    }

    /// Ring on sites `0..len`.
    pub fn ring(len: usize) -> Result<Self> {
        Self::new(0, len as Site - 1, BoundaryKind::Ring)
    }

    /// Bulk `1..=n` with reservoir sites `0` and `n + 1`.
    pub fn segment(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidRange("segment needs at least one site".into()));
        }
        Self::new(1, n as Site, BoundaryKind::Segment)
    }

    pub fn open_window(lo: Site, hi: Site) -> Result<Self> {
        Self::new(lo, hi, BoundaryKind::OpenWindow)
    }

    pub fn lo(&self) -> Site {
        self.lo
    }

    pub fn hi(&self) -> Site {
        self.hi
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    /// Number of bulk sites.
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: Site) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Left virtual (reservoir) site of a segment.
    pub fn left_virtual(&self) -> Option<Site> {
        (self.kind == BoundaryKind::Segment).then_some(self.lo - 1)
    }

    /// Right virtual (reservoir) site of a segment.
    pub fn right_virtual(&self) -> Option<Site> {
        (self.kind == BoundaryKind::Segment).then_some(self.hi + 1)
    }

    /// Whether `x` is a bulk site or, for segments, one of the virtual sites.
    pub fn holds(&self, x: Site) -> bool {
        let (a, b) = self.storage_bounds();
        a <= x && x <= b
    }

    /// Lowest and highest site with storage (virtual sites included).
    pub fn storage_bounds(&self) -> (Site, Site) {
        match self.kind {
            BoundaryKind::Segment => (self.lo - 1, self.hi + 1),
            _ => (self.lo, self.hi),
        }
    }

    fn storage_len(&self) -> usize {
        let (a, b) = self.storage_bounds();
        (b - a + 1) as usize
    }

    /// Nearest neighbour of `x` in direction `e = ±1` inside the bulk, with
    /// wrap-around on rings.
    pub fn neighbor(&self, x: Site, e: i64) -> Option<Site> {
        debug_assert!(e == 1 || e == -1);
        let y = x + e;
        match self.kind {
            BoundaryKind::Ring => Some(self.wrap(y)),
            _ => self.contains(y).then_some(y),
        }
    }

    /// Reduce `x` modulo the ring length (identity for other kinds).
    pub fn wrap(&self, x: Site) -> Site {
        match self.kind {
            BoundaryKind::Ring => self.lo + (x - self.lo).rem_euclid(self.len() as Site),
            _ => x,
        }
    }

    /// Ordered nearest-neighbour bulk bonds `(i, j)`, both directions.
    pub fn bonds(&self) -> Vec<(Site, Site)> {
        let mut out = Vec::with_capacity(2 * self.len());
        for i in self.lo..=self.hi {
            for e in [-1, 1] {
                if let Some(j) = self.neighbor(i, e) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> {
        self.lo..=self.hi
    }
}

/// Occupation numbers on a [`SiteRange`], stored densely.
///
/// For segments the two virtual sites are part of the storage and count
/// absorbed particles.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OccupationConfig {
    range: SiteRange,
    counts: Vec<u32>,
}

impl OccupationConfig {
    pub fn zeros(range: SiteRange) -> Self {
        Self {
            counts: vec![0; range.storage_len()],
            range,
        }
    }

    /// Build from a dense vector covering the storage range.
    pub fn from_dense(range: SiteRange, counts: Vec<u32>) -> Result<Self> {
        if counts.len() != range.storage_len() {
            return Err(Error::InvalidRange(format!(
                "expected {} counts, got {}",
                range.storage_len(),
                counts.len()
            )));
        }
        Ok(Self { range, counts })
    }

    /// Build from `(site, count)` pairs; repeated sites add up.
    pub fn from_pairs(range: SiteRange, pairs: &[(Site, u32)]) -> Result<Self> {
        let mut c = Self::zeros(range);
        for &(x, k) in pairs {
            c.add(x, k)?;
        }
        Ok(c)
    }

    pub fn range(&self) -> &SiteRange {
        &self.range
    }

    fn slot(&self, x: Site) -> Option<usize> {
        let (a, b) = self.range.storage_bounds();
        (a <= x && x <= b).then(|| (x - a) as usize)
    }

    /// Count at `x`; zero for sites without storage.
    pub fn get(&self, x: Site) -> u32 {
        self.slot(x).map_or(0, |s| self.counts[s])
    }

    pub fn set(&mut self, x: Site, k: u32) -> Result<()> {
        let s = self.slot(x).ok_or_else(|| self.out_of_range(x))?;
        self.counts[s] = k;
        Ok(())
    }

    pub fn add(&mut self, x: Site, k: u32) -> Result<()> {
        let s = self.slot(x).ok_or_else(|| self.out_of_range(x))?;
        self.counts[s] += k;
        Ok(())
    }

    /// Move one particle from `from` to `to`.
    pub fn move_particle(&mut self, from: Site, to: Site) -> Result<()> {
        let a = self.slot(from).ok_or_else(|| self.out_of_range(from))?;
        let b = self.slot(to).ok_or_else(|| self.out_of_range(to))?;
        if self.counts[a] == 0 {
            return Err(Error::InvalidParameter(format!("no particle at site {from}")));
        }
        self.counts[a] -= 1;
        self.counts[b] += 1;
        Ok(())
    }

    fn out_of_range(&self, x: Site) -> Error {
        let (lo, hi) = self.range.storage_bounds();
        Error::OutOfRange { site: x, lo, hi }
    }

    /// Total mass, virtual sites included.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Mass on bulk sites only.
    pub fn bulk_total(&self) -> u64 {
        self.range.sites().map(|x| self.get(x) as u64).sum()
    }

    /// Dense counts over the storage range.
    pub fn as_dense(&self) -> &[u32] {
        &self.counts
    }

    /// Non-zero `(site, count)` entries in increasing site order.
    pub fn nonzero(&self) -> BTreeMap<Site, u32> {
        let (a, _) = self.range.storage_bounds();
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (a + i as Site, c))
            .collect()
    }

    /// Expand into sorted labeled positions.
    pub fn to_positions(&self) -> LabeledPositions {
        let mut v = Vec::with_capacity(self.total() as usize);
        for (x, c) in self.nonzero() {
            v.extend(std::iter::repeat_n(x, c as usize));
        }
        LabeledPositions(v)
    }
}

/// Positions of `n` tagged particles; the label is the index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabeledPositions(pub Vec<Site>);

impl LabeledPositions {
    pub fn new(positions: Vec<Site>) -> Self {
        Self(positions)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Site] {
        &self.0
    }

    /// Number of particles at `x`.
    pub fn count_at(&self, x: Site) -> u32 {
        self.0.iter().filter(|&&y| y == x).count() as u32
    }
}

impl From<Vec<Site>> for LabeledPositions {
    fn from(v: Vec<Site>) -> Self {
        Self(v)
    }
}

/// Occupation field of a set of labeled particles.
pub fn occupation_of(p: &LabeledPositions, r: &SiteRange) -> Result<OccupationConfig> {
    let mut c = OccupationConfig::zeros(*r);
    for &y in p.as_slice() {
        c.add(y, 1)?;
    }
    Ok(c)
}

/// The configuration with a single particle at `x`.
pub fn delta_config(x: Site, r: &SiteRange) -> Result<OccupationConfig> {
    if !r.contains(x) {
        return Err(Error::OutOfRange {
            site: x,
            lo: r.lo(),
            hi: r.hi(),
        });
    }
    let mut c = OccupationConfig::zeros(*r);
    c.add(x, 1)?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_labeled_positions() {
        let r = SiteRange::open_window(0, 10).unwrap();
        let c = occupation_of(&LabeledPositions::new(vec![3, 3, 5]), &r).unwrap();
        assert_eq!(c.nonzero(), BTreeMap::from([(3, 2), (5, 1)]));

        let r = SiteRange::open_window(1, 4).unwrap();
        let c = occupation_of(&LabeledPositions::new(vec![1, 2, 2, 2]), &r).unwrap();
        assert_eq!(c.nonzero(), BTreeMap::from([(1, 1), (2, 3)]));
        assert_eq!(c.total(), 4);
    }

    #[test]
    fn empty_positions_give_zero_config() {
        let r = SiteRange::ring(7).unwrap();
        let c = occupation_of(&LabeledPositions::default(), &r).unwrap();
        assert_eq!(c, OccupationConfig::zeros(r));
    }

    #[test]
    fn position_outside_range_is_an_error() {
        let r = SiteRange::open_window(0, 5).unwrap();
        let err = occupation_of(&LabeledPositions::new(vec![2, 9]), &r).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { site: 9, .. }));
    }

    #[test]
    fn segment_virtual_sites_hold_absorbed_particles() {
        let r = SiteRange::segment(3).unwrap();
        let c = occupation_of(&LabeledPositions::new(vec![0, 2, 4, 4]), &r).unwrap();
        assert_eq!(c.get(0), 1);
        assert_eq!(c.get(4), 2);
        assert_eq!(c.bulk_total(), 1);
        assert_eq!(c.total(), 4);
        assert!(occupation_of(&LabeledPositions::new(vec![5]), &r).is_err());
    }

    #[test]
    fn delta_config_examples() {
        let r = SiteRange::open_window(0, 5).unwrap();
        assert_eq!(delta_config(0, &r).unwrap().nonzero(), BTreeMap::from([(0, 1)]));
        assert!(matches!(delta_config(6, &r), Err(Error::OutOfRange { site: 6, .. })));
    }

    #[test]
    fn ring_validation_and_wrap() {
        assert!(SiteRange::ring(2).is_err());
        assert!(SiteRange::new(3, 2, BoundaryKind::OpenWindow).is_err());
        let r = SiteRange::ring(5).unwrap();
        assert_eq!(r.neighbor(4, 1), Some(0));
        assert_eq!(r.neighbor(0, -1), Some(4));
        assert_eq!(r.bonds().len(), 10);
        let s = SiteRange::segment(3).unwrap();
        assert_eq!(s.neighbor(3, 1), None);
        assert_eq!(s.bonds().len(), 4);
    }

    proptest! {
        #[test]
        fn deltas_add_up(ys in prop::collection::vec(-20i64..20, 0..12)) {
            let r = SiteRange::open_window(-20, 20).unwrap();
            let mut sum = OccupationConfig::zeros(r);
            for &y in &ys {
                let d = delta_config(y, &r).unwrap();
                for (x, k) in d.nonzero() {
                    sum.add(x, k).unwrap();
                }
            }
            prop_assert_eq!(sum, occupation_of(&LabeledPositions::new(ys), &r).unwrap());
        }

        #[test]
        fn label_permutation_invariance(mut ys in prop::collection::vec(-10i64..10, 0..10), seed in 0u64..1000) {
            let r = SiteRange::open_window(-10, 10).unwrap();
            let before = occupation_of(&LabeledPositions::new(ys.clone()), &r).unwrap();
            // deterministic shuffle
            let n = ys.len();
            for i in (1..n).rev() {
                let j = ((seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64)) % (i as u64 + 1)) as usize;
                ys.swap(i, j);
            }
            prop_assert_eq!(before, occupation_of(&LabeledPositions::new(ys), &r).unwrap());
        }

        #[test]
        fn single_move_changes_two_counts(ys in prop::collection::vec(-8i64..8, 1..10), pick in 0usize..10, right in any::<bool>()) {
            let r = SiteRange::open_window(-10, 10).unwrap();
            let i = pick % ys.len();
            let before = occupation_of(&LabeledPositions::new(ys.clone()), &r).unwrap();
            let mut moved = ys.clone();
            moved[i] += if right { 1 } else { -1 };
            let after = occupation_of(&LabeledPositions::new(moved), &r).unwrap();
            let diffs: Vec<i64> = r
                .sites()
                .map(|x| after.get(x) as i64 - before.get(x) as i64)
                .filter(|&d| d != 0)
                .collect();
            prop_assert_eq!(diffs.len(), 2);
            prop_assert_eq!(diffs.iter().sum::<i64>(), 0);
            prop_assert!(diffs.iter().all(|d| d.abs() == 1));
        }
    }
}

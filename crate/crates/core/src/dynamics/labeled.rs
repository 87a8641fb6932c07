use std::collections::HashMap;

use super::engine::{run, Engine, RunEnd, DUAL_EVENT_CAP};
use super::{EventKind, JumpEvent, Observer, RateTree, Recorder, Trajectory};
use crate::error::{Error, Result};
use crate::lattice::{LabeledPositions, Site};
use crate::measures::{ReservoirParams, SipParams};
use crate::stats::RngStream;

/// Where labeled particles live.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// ℤ, observed through the window `[lo, hi]`; reaching either end site
    /// aborts the run.
    Line { lo: Site, hi: Site },
    /// Sites `0..len` with periodic neighbours.
    Ring { len: usize },
    /// Bulk `{1..n}` with absorbing sites 0 and n+1, entered from the end
    /// sites at the given per-particle rates.
    Absorbing { n: usize, left: f64, right: f64 },
}

impl Geometry {
    /// Window around `start` wide enough that a free walk run for `horizon`
    /// essentially never reaches the ends.
    pub fn line_for(start: &[Site], p: SipParams, horizon: f64) -> Self {
        let margin = (8.0 * (p.m() * horizon).sqrt()).ceil() as Site + 64;
        let lo = start.iter().copied().min().unwrap_or(0);
        let hi = start.iter().copied().max().unwrap_or(0);
        Geometry::Line {
            lo: lo - margin,
            hi: hi + margin,
        }
    }

    pub fn dual(n: usize, res: &ReservoirParams) -> Self {
        Geometry::Absorbing {
            n,
            left: res.left_absorption(),
            right: res.right_absorption(),
        }
    }

    fn is_absorbed(&self, x: Site) -> bool {
        match *self {
            Geometry::Absorbing { n, .. } => x <= 0 || x > n as Site,
            _ => false,
        }
    }
}

const CHANNELS_PER_LABEL: usize = 4;

/// Labeled inclusion process (or independent walkers) with one rate table
/// entry per label and direction.
///
/// Channels per label, in selection order: random-walk hop left, right,
/// inclusion hop left, right. A hop from an end site of an absorbing
/// segment into the virtual site uses the random-walk slot with the
/// absorption rate instead of m/2.
#[derive(Debug, Clone)]
pub struct LabeledSim {
    pos: LabeledPositions,
    at: HashMap<Site, Vec<u32>>,
    geometry: Geometry,
    p: SipParams,
    inclusion: bool,
    tree: RateTree,
}

impl LabeledSim {
    pub fn new(initial: LabeledPositions, geometry: Geometry, p: SipParams, inclusion: bool) -> Result<Self> {
        let mut pos = initial;
        match geometry {
            Geometry::Line { lo, hi } => {
                if let Some(&x) = pos.as_slice().iter().find(|&&x| x <= lo || x >= hi) {
                    return Err(Error::WindowEdge { site: x, time: 0.0 });
                }
            }
            Geometry::Ring { len } => {
                if len < 3 {
                    return Err(Error::InvalidRange(format!("ring of {len} sites")));
                }
                for x in pos.0.iter_mut() {
                    *x = x.rem_euclid(len as Site);
                }
            }
            Geometry::Absorbing { n, left, right } => {
                if n == 0 || left < 0.0 || right < 0.0 {
                    return Err(Error::InvalidParameter(
                        "absorbing segment needs N ≥ 1 and rates ≥ 0".into(),
                    ));
                }
                if let Some(&x) = pos.as_slice().iter().find(|&&x| x < 0 || x > n as Site + 1) {
                    return Err(Error::OutOfRange {
                        site: x,
                        lo: 0,
                        hi: n as Site + 1,
                    });
                }
            }
        }
        let mut at: HashMap<Site, Vec<u32>> = HashMap::new();
        for (i, &x) in pos.as_slice().iter().enumerate() {
            if !geometry.is_absorbed(x) {
                at.entry(x).or_default().push(i as u32);
            }
        }
        let tree = RateTree::new(CHANNELS_PER_LABEL * pos.len());
        let mut sim = Self {
            pos,
            at,
            geometry,
            p,
            inclusion,
            tree,
        };
        for i in 0..sim.pos.len() {
            sim.refresh_label(i);
        }
        Ok(sim)
    }

    pub fn positions(&self) -> &LabeledPositions {
        &self.pos
    }

    pub fn into_positions(self) -> LabeledPositions {
        self.pos
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    /// Number of live particles at `x`.
    pub fn count(&self, x: Site) -> u32 {
        self.at.get(&x).map_or(0, |v| v.len() as u32)
    }

    fn step(&self, x: Site, e: Site) -> Site {
        match self.geometry {
            Geometry::Ring { len } => (x + e).rem_euclid(len as Site),
            _ => x + e,
        }
    }

    fn refresh_label(&mut self, i: usize) {
        let x = self.pos.as_slice()[i];
        let base = CHANNELS_PER_LABEL * i;
        if self.geometry.is_absorbed(x) {
            for k in 0..CHANNELS_PER_LABEL {
                self.tree.set(base + k, 0.0);
            }
            return;
        }
        let h = self.p.half();
        for (k, e) in [-1, 1].into_iter().enumerate() {
            let y = self.step(x, e);
            let (rw, inc) = match self.geometry {
                Geometry::Absorbing { left, .. } if y == 0 => (left, 0.0),
                Geometry::Absorbing { n, right, .. } if y == n as Site + 1 => (right, 0.0),
                _ => {
                    let inc = if self.inclusion { self.count(y) as f64 } else { 0.0 };
                    (h, inc)
                }
            };
            self.tree.set(base + k, rw);
            self.tree.set(base + 2 + k, inc);
        }
    }

    fn refresh_near(&mut self, x: Site) {
        for e in [-1, 0, 1] {
            let y = self.step(x, e);
            if let Some(labels) = self.at.get(&y) {
                for l in labels.clone() {
                    self.refresh_label(l as usize);
                }
            }
        }
    }

    /// Run to `horizon`, or until every particle is absorbed when `horizon`
    /// is `None`.
    pub fn run<O: Observer<LabeledPositions> + ?Sized>(
        &mut self,
        t0: f64,
        horizon: Option<f64>,
        rng: &mut RngStream,
        obs: &mut O,
    ) -> Result<RunEnd> {
        let cap = if horizon.is_some() { u64::MAX } else { DUAL_EVENT_CAP };
        run(self, t0, horizon, rng, obs, cap)
    }
}

impl Engine for LabeledSim {
    type State = LabeledPositions;

    fn state(&self) -> &LabeledPositions {
        &self.pos
    }

    fn rates(&self) -> &RateTree {
        &self.tree
    }

    fn fire(&mut self, channel: usize, time: f64) -> Result<JumpEvent> {
        let i = channel / CHANNELS_PER_LABEL;
        let k = channel % CHANNELS_PER_LABEL;
        let e = if k.is_multiple_of(2) { -1 } else { 1 };
        let x = self.pos.as_slice()[i];
        let y = self.step(x, e);
        let absorbed = self.geometry.is_absorbed(y);
        let kind = match (absorbed, k < 2) {
            (true, _) => EventKind::Absorption,
            (false, true) => EventKind::RwJump,
            (false, false) => EventKind::InclusionJump,
        };
        let from = self.at.get_mut(&x).expect("label is indexed at its site");
        let slot = from.iter().position(|&l| l as usize == i).expect("label present");
        from.swap_remove(slot);
        if from.is_empty() {
            self.at.remove(&x);
        }
        if !absorbed {
            self.at.entry(y).or_default().push(i as u32);
        }
        self.pos.0[i] = y;
        self.refresh_label(i);
        self.refresh_near(x);
        self.refresh_near(y);
        if let Geometry::Line { lo, hi } = self.geometry {
            if y <= lo || y >= hi {
                return Err(Error::WindowEdge { site: y, time });
            }
        }
        Ok(JumpEvent {
            time,
            kind,
            from: x,
            to: y,
            label: Some(i as u32),
        })
    }
}

fn record(mut sim: LabeledSim, horizon: f64, rng: &mut RngStream) -> Result<Trajectory<LabeledPositions>> {
    let initial = sim.positions().clone();
    let mut rec = Recorder::default();
    sim.run(0.0, Some(horizon), rng, &mut rec)?;
    Ok(Trajectory {
        initial,
        events: rec.events,
        horizon: Some(horizon),
    })
}

/// Labeled inclusion process on ℤ up to `horizon`, in a window sized by
/// [`Geometry::line_for`].
pub fn simulate_sip_labeled(
    initial: &LabeledPositions,
    p: SipParams,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<Trajectory<LabeledPositions>> {
    let g = Geometry::line_for(initial.as_slice(), p, horizon);
    record(LabeledSim::new(initial.clone(), g, p, true)?, horizon, rng)
}

/// Independent rate-m/2 walkers on ℤ up to `horizon`.
pub fn simulate_irw(
    initial: &LabeledPositions,
    p: SipParams,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<Trajectory<LabeledPositions>> {
    let g = Geometry::line_for(initial.as_slice(), p, horizon);
    record(LabeledSim::new(initial.clone(), g, p, false)?, horizon, rng)
}

/// Run the absorbing dual on `{1..n}` until every particle is absorbed and
/// return the absorbing site (0 or n+1) of each label.
pub fn simulate_dual_absorbing(
    initial: &LabeledPositions,
    n: usize,
    res: &ReservoirParams,
    p: SipParams,
    rng: &mut RngStream,
) -> Result<Vec<Site>> {
    let mut sim = LabeledSim::new(initial.clone(), Geometry::dual(n, res), p, true)?;
    sim.run(0.0, None, rng, &mut ())?;
    Ok(sim.into_positions().0)
}

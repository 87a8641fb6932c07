//! The basic coupling of inclusion particles with independent walkers:
//! random-walk moves are shared label by label, inclusion moves are made by
//! the inclusion particles alone. Includes the two-particle difference chain
//! and exact time integrals of the collision functionals.

mod diagnostics;
mod zchain;

use serde::{Deserialize, Serialize};

use crate::dynamics::{run, Engine, EventKind, Geometry, JumpEvent, Observer, RateTree, RunEnd, DUAL_EVENT_CAP};
use crate::error::{Error, Result};
use crate::lattice::{LabeledPositions, Site};
use crate::measures::SipParams;
use crate::stats::RngStream;

pub use diagnostics::{
    collision_class, collision_time_report, coupling_scaling, simulate_coupling, CollisionReport, CouplingDiagnostics,
    DiagnosticsObserver, ScalingRow, SCALING_OBSERVABLES,
};
pub use zchain::{
    estimate_additive_functional, run_z_chain, simulate_z_chain, ZChain, ZChainSummary, DEFAULT_ORIGIN_PULL,
};

/// Inclusion positions `sip` (Y) and walker positions `irw` (Ỹ), label by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledState {
    pub sip: LabeledPositions,
    pub irw: LabeledPositions,
}

impl CoupledState {
    pub fn new(sip: LabeledPositions, irw: LabeledPositions) -> Result<Self> {
        if sip.len() != irw.len() {
            return Err(Error::InvalidParameter(format!(
                "{} inclusion particles but {} walkers",
                sip.len(),
                irw.len()
            )));
        }
        Ok(Self { sip, irw })
    }

    /// Both sides started at the same positions.
    pub fn together(start: &LabeledPositions) -> Self {
        Self {
            sip: start.clone(),
            irw: start.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.sip.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sip.is_empty()
    }

    /// `Y_i − Ỹ_i`.
    pub fn discrepancy(&self, i: usize) -> Site {
        self.sip.as_slice()[i] - self.irw.as_slice()[i]
    }
}

/// One entry of the coupled event table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledMove {
    pub label: usize,
    pub e: i64,
    /// `true`: Y_i and Ỹ_i move together; `false`: only Y_i moves.
    pub joint: bool,
    pub rate: f64,
}

/// Every live move of the coupling on ℤ: a joint hop at rate m/2 per label
/// and direction, and an inclusion-only hop of Y_i at rate
/// #{k ≠ i : Y_k = Y_i + e}.
pub fn coupled_rates(s: &CoupledState, p: SipParams) -> Vec<CoupledMove> {
    let y = s.sip.as_slice();
    let mut out = Vec::with_capacity(4 * y.len());
    for i in 0..y.len() {
        for e in [-1, 1] {
            out.push(CoupledMove {
                label: i,
                e,
                joint: true,
                rate: p.half(),
            });
            let pull = y.iter().enumerate().filter(|&(k, &x)| k != i && x == y[i] + e).count();
            if pull > 0 {
                out.push(CoupledMove {
                    label: i,
                    e,
                    joint: false,
                    rate: pull as f64,
                });
            }
        }
    }
    out
}

const CHANNELS_PER_LABEL: usize = 4;

/// Exact simulator of the coupling on a line window or on an absorbing
/// segment.
///
/// On the segment the end sites absorb at rate m/2, so a joint hop looks
/// the same from both sides; once one member of a pair is absorbed the
/// other keeps hopping alone. Absorbed inclusion particles do not attract.
#[derive(Debug, Clone)]
pub struct CouplingSim {
    state: CoupledState,
    geometry: Geometry,
    p: SipParams,
    tree: RateTree,
}

impl CouplingSim {
    pub fn new(start: CoupledState, geometry: Geometry, p: SipParams) -> Result<Self> {
        match geometry {
            Geometry::Line { lo, hi } => {
                let all = start.sip.as_slice().iter().chain(start.irw.as_slice());
                if let Some(&x) = all.clone().find(|&&x| x <= lo || x >= hi) {
                    return Err(Error::WindowEdge { site: x, time: 0.0 });
                }
            }
            Geometry::Absorbing { n, left, right } => {
                if left != p.half() || right != p.half() {
                    return Err(Error::InvalidParameter(
                        "the absorbing coupling needs absorption rate m/2 at both ends".into(),
                    ));
                }
                let top = n as Site + 1;
                let all = start.sip.as_slice().iter().chain(start.irw.as_slice());
                if let Some(&x) = all.clone().find(|&&x| x < 0 || x > top) {
                    return Err(Error::OutOfRange {
                        site: x,
                        lo: 0,
                        hi: top,
                    });
                }
            }
            Geometry::Ring { .. } => {
                return Err(Error::InvalidRange(
                    "the coupling runs on a line or an absorbing segment".into(),
                ));
            }
        }
        let tree = RateTree::new(CHANNELS_PER_LABEL * start.len());
        let mut sim = Self {
            state: start,
            geometry,
            p,
            tree,
        };
        sim.refresh_all();
        Ok(sim)
    }

    pub fn state(&self) -> &CoupledState {
        &self.state
    }

    pub fn into_state(self) -> CoupledState {
        self.state
    }

    fn live(&self, x: Site) -> bool {
        match self.geometry {
            Geometry::Absorbing { n, .. } => x >= 1 && x <= n as Site,
            _ => true,
        }
    }

    fn refresh_all(&mut self) {
        let y = self.state.sip.as_slice();
        let w = self.state.irw.as_slice();
        let h = self.p.half();
        for i in 0..y.len() {
            let (ly, lw) = (self.live(y[i]), self.live(w[i]));
            let base = CHANNELS_PER_LABEL * i;
            let joint = if ly || lw { h } else { 0.0 };
            self.tree.set(base, joint);
            self.tree.set(base + 1, joint);
            for (k, e) in [-1i64, 1].into_iter().enumerate() {
                let pull = if ly {
                    y.iter()
                        .enumerate()
                        .filter(|&(j, &x)| j != i && x == y[i] + e && self.live(x))
                        .count() as f64
                } else {
                    0.0
                };
                self.tree.set(base + 2 + k, pull);
            }
        }
    }

    pub fn run<O: Observer<CoupledState> + ?Sized>(
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

impl Engine for CouplingSim {
    type State = CoupledState;

    fn state(&self) -> &CoupledState {
        &self.state
    }

    fn rates(&self) -> &RateTree {
        &self.tree
    }

    fn fire(&mut self, channel: usize, time: f64) -> Result<JumpEvent> {
        let i = channel / CHANNELS_PER_LABEL;
        let k = channel % CHANNELS_PER_LABEL;
        let e = if k.is_multiple_of(2) { -1 } else { 1 };
        let y = self.state.sip.as_slice()[i];
        let w = self.state.irw.as_slice()[i];
        let (from, to) = if k < 2 {
            if self.live(w) {
                self.state.irw.0[i] = w + e;
            }
            if self.live(y) {
                self.state.sip.0[i] = y + e;
                (y, y + e)
            } else {
                (w, w + e)
            }
        } else {
            self.state.sip.0[i] = y + e;
            (y, y + e)
        };
        self.refresh_all();
        let kind = if !self.live(to) {
            EventKind::Absorption
        } else if k < 2 {
            EventKind::RwJump
        } else {
            EventKind::InclusionJump
        };
        if let Geometry::Line { lo, hi } = self.geometry {
            let (ny, nw) = (self.state.sip.0[i], self.state.irw.0[i]);
            for x in [ny, nw] {
                if x <= lo || x >= hi {
                    return Err(Error::WindowEdge { site: x, time });
                }
            }
        }
        Ok(JumpEvent {
            time,
            kind,
            from,
            to,
            label: Some(i as u32),
        })
    }
}

/// Run the absorbing coupling on `{1..n}` from `start` (both sides
/// together) until every particle on both sides is absorbed; returns the
/// final state.
pub fn simulate_coupled_absorbing(
    start: &LabeledPositions,
    n: usize,
    p: SipParams,
    rng: &mut RngStream,
) -> Result<CoupledState> {
    let g = Geometry::Absorbing {
        n,
        left: p.half(),
        right: p.half(),
    };
    let mut sim = CouplingSim::new(CoupledState::together(start), g, p)?;
    sim.run(0.0, None, rng, &mut ())?;
    Ok(sim.into_state())
}

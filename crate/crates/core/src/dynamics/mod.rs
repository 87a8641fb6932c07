//! Exact continuous-time simulation: the inclusion process on occupation
//! fields and on labeled particles, independent walkers, the boundary-driven
//! process and its absorbing dual.
//!
//! Every simulator is a direct Gillespie scheme over a [`RateTree`]: one
//! exponential holding time at the total rate, then one uniform draw placed
//! against the cumulative channel rates in a fixed left-to-right order.
//! Observers see each holding interval and each jump, so time integrals of
//! piecewise-constant functionals are computed exactly.

mod engine;
mod field;
mod labeled;
mod sumtree;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LabeledPositions, OccupationConfig, Site};

pub use engine::{run, Engine, RunEnd, DUAL_EVENT_CAP};
pub use field::{labeled_sip_rates, simulate_boundary_driven, simulate_sip, sip_bulk_rate, FieldSim};
pub use labeled::{simulate_dual_absorbing, simulate_irw, simulate_sip_labeled, Geometry, LabeledSim};
pub use sumtree::RateTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RwJump,
    InclusionJump,
    ReservoirBirth,
    ReservoirDeath,
    Absorption,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::RwJump => "rw_jump",
            EventKind::InclusionJump => "inclusion_jump",
            EventKind::ReservoirBirth => "reservoir_birth",
            EventKind::ReservoirDeath => "reservoir_death",
            EventKind::Absorption => "absorption",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One transition. Births come from the virtual reservoir site and deaths
/// go to it; absorptions land on a virtual site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub kind: EventKind,
    pub from: Site,
    pub to: Site,
    pub label: Option<u32>,
}

/// Callback interface for simulators.
pub trait Observer<S: ?Sized> {
    /// The state `s` was held on `[from, to)`.
    fn hold(&mut self, _s: &S, _from: f64, _to: f64) {}
    /// `ev` happened; `after` is the new state.
    fn jump(&mut self, _ev: &JumpEvent, _after: &S) {}
}

impl<S: ?Sized> Observer<S> for () {}

/// Observer that keeps every event.
#[derive(Debug, Default, Clone)]
pub struct Recorder {
    pub events: Vec<JumpEvent>,
}

impl<S: ?Sized> Observer<S> for Recorder {
    fn jump(&mut self, ev: &JumpEvent, _after: &S) {
        self.events.push(*ev);
    }
}

/// Initial state, event log and horizon of one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub initial: S,
    pub events: Vec<JumpEvent>,
    /// `None` for runs that stop at absorption.
    pub horizon: Option<f64>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Event times must strictly increase and stay within the horizon.
    fn check_times(&self) -> Result<()> {
        let mut last = 0.0;
        for (index, ev) in self.events.iter().enumerate() {
            if !(ev.time > last || (index == 0 && ev.time >= 0.0)) {
                return Err(Error::InconsistentTrajectory {
                    index,
                    reason: format!("time {} after {}", ev.time, last),
                });
            }
            if let Some(h) = self.horizon {
                if ev.time > h {
                    return Err(Error::InconsistentTrajectory {
                        index,
                        reason: format!("time {} beyond horizon {h}", ev.time),
                    });
                }
            }
            last = ev.time;
        }
        Ok(())
    }

    /// Write the event log as CSV with columns `time,kind,from,to,label`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,kind,from,to,label")?;
        for ev in &self.events {
            let label = ev.label.map(|l| l.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", ev.time, ev.kind, ev.from, ev.to, label)?;
        }
        Ok(())
    }
}

impl Trajectory<OccupationConfig> {
    /// Re-apply every event to the initial configuration.
    pub fn replay(&self) -> Result<OccupationConfig> {
        self.check_times()?;
        let mut c = self.initial.clone();
        for (index, ev) in self.events.iter().enumerate() {
            let bad = |reason: String| Error::InconsistentTrajectory { index, reason };
            match ev.kind {
                EventKind::ReservoirBirth => c.add(ev.to, 1).map_err(|e| bad(e.to_string()))?,
                EventKind::ReservoirDeath => {
                    let k = c.get(ev.from);
                    if k == 0 {
                        return Err(bad(format!("death at empty site {}", ev.from)));
                    }
                    c.set(ev.from, k - 1).map_err(|e| bad(e.to_string()))?;
                }
                _ => {
                    if (ev.from - ev.to).abs() != 1
                        && c.range().wrap(ev.from + 1) != ev.to
                        && c.range().wrap(ev.from - 1) != ev.to
                    {
                        return Err(bad(format!("non-neighbour jump {} -> {}", ev.from, ev.to)));
                    }
                    c.move_particle(ev.from, ev.to).map_err(|e| bad(e.to_string()))?;
                }
            }
        }
        Ok(c)
    }
}

impl Trajectory<LabeledPositions> {
    /// Re-apply every event to the initial positions.
    pub fn replay(&self) -> Result<LabeledPositions> {
        self.check_times()?;
        let mut p = self.initial.clone();
        for (index, ev) in self.events.iter().enumerate() {
            let bad = |reason: String| Error::InconsistentTrajectory { index, reason };
            let label = ev.label.ok_or_else(|| bad("missing label".into()))? as usize;
            let slot =
                p.0.get_mut(label)
                    .ok_or_else(|| bad(format!("unknown label {label}")))?;
            if *slot != ev.from {
                return Err(bad(format!("label {label} is at {}, not {}", slot, ev.from)));
            }
            *slot = ev.to;
        }
        Ok(p)
    }
}

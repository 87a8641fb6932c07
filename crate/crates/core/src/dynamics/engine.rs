use super::{JumpEvent, Observer, RateTree};
use crate::error::{Error, Result};
use crate::stats::RngStream;

/// Per-replica event cap for runs without a horizon.
pub const DUAL_EVENT_CAP: u64 = 1_000_000_000;

/// A continuous-time chain whose channel rates live in a [`RateTree`].
pub trait Engine {
    type State: ?Sized;

    fn state(&self) -> &Self::State;

    fn rates(&self) -> &RateTree;

    /// Carry out the transition of `channel` at `time` and refresh the
    /// affected rates.
    fn fire(&mut self, channel: usize, time: f64) -> Result<JumpEvent>;
}

/// How a call to [`run`] ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunEnd {
    /// Horizon, or the time of the last event if the total rate hit zero.
    pub time: f64,
    pub events: u64,
}

/// Drive `engine` from time `t0` until `horizon` (or until no channel is
/// live when `horizon` is `None`).
///
/// Each step draws the holding time first and then a single uniform for the
/// channel, so a run that stops at the horizon consumes exactly one extra
/// exponential.
pub fn run<E, O>(
    engine: &mut E,
    t0: f64,
    horizon: Option<f64>,
    rng: &mut RngStream,
    obs: &mut O,
    cap: u64,
) -> Result<RunEnd>
where
    E: Engine,
    O: Observer<E::State> + ?Sized,
{
    let mut t = t0;
    let mut events = 0u64;
    loop {
        let total = engine.rates().total();
        if total <= 0.0 {
            if let Some(h) = horizon {
                if h > t {
                    obs.hold(engine.state(), t, h);
                }
                t = t.max(h);
            }
            return Ok(RunEnd { time: t, events });
        }
        let next = t + rng.exponential(total);
        if let Some(h) = horizon {
            if next > h {
                obs.hold(engine.state(), t, h);
                return Ok(RunEnd { time: h, events });
            }
        }
        if events >= cap {
            return Err(Error::EventCap { cap });
        }
        obs.hold(engine.state(), t, next);
        t = next;
        let channel = engine.rates().find(rng.uniform() * total);
        let ev = engine.fire(channel, t)?;
        events += 1;
        obs.jump(&ev, engine.state());
    }
}

use crate::dynamics::{run, Engine, EventKind, JumpEvent, Observer, RateTree, Recorder, Trajectory};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::stats::{estimate_replicas, Estimate, Replicas, RngStream};

/// Extra rate into the origin from ±1 obtained by projecting the
/// two-particle coupling (each particle is pulled onto the other at rate 1).
pub const DEFAULT_ORIGIN_PULL: f64 = 2.0;

/// Difference of two coupled inclusion particles: a walk with rate `m` in
/// each direction plus an extra rate `origin_pull` from ±1 into 0.
///
/// Channels: step left, step right, pull to the origin.
#[derive(Debug, Clone)]
pub struct ZChain {
    z: Site,
    m: f64,
    pull: f64,
    tree: RateTree,
}

impl ZChain {
    pub fn new(z0: Site, m: f64, origin_pull: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) || !(origin_pull >= 0.0 && origin_pull.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "z-chain needs m > 0 and pull ≥ 0, got {m}, {origin_pull}"
            )));
        }
        let mut c = Self {
            z: z0,
            m,
            pull: origin_pull,
            tree: RateTree::new(3),
        };
        c.refresh();
        Ok(c)
    }

    pub fn position(&self) -> Site {
        self.z
    }

    fn refresh(&mut self) {
        self.tree.set(0, self.m);
        self.tree.set(1, self.m);
        self.tree.set(2, if self.z.abs() == 1 { self.pull } else { 0.0 });
    }
}

impl Engine for ZChain {
    type State = Site;

    fn state(&self) -> &Site {
        &self.z
    }

    fn rates(&self) -> &RateTree {
        &self.tree
    }

    fn fire(&mut self, channel: usize, time: f64) -> Result<JumpEvent> {
        let from = self.z;
        let (to, kind) = match channel {
            0 => (from - 1, EventKind::RwJump),
            1 => (from + 1, EventKind::RwJump),
            _ => (0, EventKind::InclusionJump),
        };
        self.z = to;
        self.refresh();
        Ok(JumpEvent {
            time,
            kind,
            from,
            to,
            label: None,
        })
    }
}

impl Trajectory<Site> {
    /// Re-apply every event to the initial position.
    pub fn replay(&self) -> Result<Site> {
        let mut z = self.initial;
        let mut last = 0.0;
        for (index, ev) in self.events.iter().enumerate() {
            if ev.from != z || (ev.to - ev.from).abs() != 1 || ev.time < last {
                return Err(Error::InconsistentTrajectory {
                    index,
                    reason: format!("{} -> {} from {z}", ev.from, ev.to),
                });
            }
            z = ev.to;
            last = ev.time;
        }
        Ok(z)
    }
}

pub fn simulate_z_chain(
    z0: Site,
    m: f64,
    horizon: f64,
    origin_pull: f64,
    rng: &mut RngStream,
) -> Result<Trajectory<Site>> {
    let mut c = ZChain::new(z0, m, origin_pull)?;
    let mut rec = Recorder::default();
    run(&mut c, 0.0, Some(horizon), rng, &mut rec, u64::MAX)?;
    Ok(Trajectory {
        initial: z0,
        events: rec.events,
        horizon: Some(horizon),
    })
}

/// Exact time integrals of one z-chain path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZChainSummary {
    /// `∫ I(|z| = 1) ds`
    pub occ_pm1: f64,
    /// `A(T) = ∫ I(|z| = 1) z ds`
    pub additive: f64,
    pub final_z: Site,
}

impl Observer<Site> for ZChainSummary {
    fn hold(&mut self, z: &Site, a: f64, b: f64) {
        if z.abs() == 1 {
            self.occ_pm1 += b - a;
            self.additive += *z as f64 * (b - a);
        }
    }

    fn jump(&mut self, _: &JumpEvent, z: &Site) {
        self.final_z = *z;
    }
}

pub fn run_z_chain(z0: Site, m: f64, horizon: f64, origin_pull: f64, rng: &mut RngStream) -> Result<ZChainSummary> {
    let mut c = ZChain::new(z0, m, origin_pull)?;
    let mut s = ZChainSummary {
        final_z: z0,
        ..Default::default()
    };
    run(&mut c, 0.0, Some(horizon), rng, &mut s, u64::MAX)?;
    Ok(s)
}

/// Estimate of `E₀[A(T)²] / T` for the chain started at the origin.
pub fn estimate_additive_functional(m: f64, horizon: f64, origin_pull: f64, plan: &Replicas) -> Result<Estimate> {
    if plan.count < 2 {
        return Err(Error::InvalidParameter("need at least two replicas".into()));
    }
    estimate_replicas("additive_sq_over_t", plan, |_, rng| {
        let s = run_z_chain(0, m, horizon, origin_pull, rng)?;
        Ok(s.additive * s.additive / horizon)
    })
}

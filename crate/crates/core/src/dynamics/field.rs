use super::engine::{run, Engine, RunEnd};
use super::{EventKind, JumpEvent, Observer, RateTree, Recorder, Trajectory};
use crate::error::{Error, Result};
use crate::lattice::{BoundaryKind, LabeledPositions, OccupationConfig, Site};
use crate::measures::{ReservoirParams, SipParams};
use crate::stats::RngStream;

/// Rate η_i(m/2 + η_j) at which one particle moves from `i` to the
/// neighbouring site `j`.
pub fn sip_bulk_rate(eta: &OccupationConfig, i: Site, j: Site, p: SipParams) -> Result<f64> {
    let r = eta.range();
    let adjacent = r.contains(i) && (r.neighbor(i, 1) == Some(j) || r.neighbor(i, -1) == Some(j));
    if !adjacent {
        return Err(Error::InvalidParameter(format!("sites {i} and {j} are not neighbours")));
    }
    let (ni, nj) = (eta.get(i) as f64, eta.get(j) as f64);
    Ok(ni * (p.half() + nj))
}

/// Rate m/2 + #{k : y_k = y_i + e} at which labeled particle `i` hops by `e`.
pub fn labeled_sip_rates(y: &LabeledPositions, i: usize, e: i64, p: SipParams) -> f64 {
    let target = y.as_slice()[i] + e;
    p.half() + y.count_at(target) as f64
}

const CHANNELS_PER_SITE: usize = 4;

/// Occupation-field simulator for the inclusion process on a ring, on an
/// open window of ℤ, or on a segment (closed, or coupled to reservoirs).
///
/// Channels per bulk site, in selection order: random-walk hop left,
/// random-walk hop right, inclusion hop left, inclusion hop right. The four
/// reservoir channels (left birth, left death, right birth, right death)
/// follow the bulk.
#[derive(Debug, Clone)]
pub struct FieldSim {
    eta: OccupationConfig,
    p: SipParams,
    inclusion: bool,
    reservoirs: Option<ReservoirParams>,
    tree: RateTree,
}

impl FieldSim {
    pub fn new(initial: OccupationConfig, p: SipParams) -> Result<Self> {
        Self::build(initial, p, true, None)
    }

    /// Independent walkers: only the random-walk channels are live.
    pub fn independent(initial: OccupationConfig, p: SipParams) -> Result<Self> {
        Self::build(initial, p, false, None)
    }

    pub fn with_reservoirs(initial: OccupationConfig, res: ReservoirParams, p: SipParams) -> Result<Self> {
        if initial.range().kind() != BoundaryKind::Segment {
            return Err(Error::InvalidRange("reservoirs need a segment".into()));
        }
        Self::build(initial, p, true, Some(res))
    }

    fn build(
        eta: OccupationConfig,
        p: SipParams,
        inclusion: bool,
        reservoirs: Option<ReservoirParams>,
    ) -> Result<Self> {
        let r = *eta.range();
        if r.kind() == BoundaryKind::OpenWindow {
            for x in [r.lo(), r.hi()] {
                if eta.get(x) > 0 {
                    return Err(Error::WindowEdge { site: x, time: 0.0 });
                }
            }
        }
        let extra = if reservoirs.is_some() { 4 } else { 0 };
        let tree = RateTree::new(CHANNELS_PER_SITE * r.len() + extra);
        let mut sim = Self {
            eta,
            p,
            inclusion,
            reservoirs,
            tree,
        };
        for x in r.sites() {
            sim.refresh_site(x);
        }
        sim.refresh_reservoirs();
        Ok(sim)
    }

    pub fn state(&self) -> &OccupationConfig {
        &self.eta
    }

    pub fn into_state(self) -> OccupationConfig {
        self.eta
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    fn refresh_site(&mut self, x: Site) {
        let r = *self.eta.range();
        let base = CHANNELS_PER_SITE * (x - r.lo()) as usize;
        let n = self.eta.get(x) as f64;
        for (k, e) in [-1i64, 1].into_iter().enumerate() {
            let (rw, inc) = match r.neighbor(x, e) {
                Some(y) => {
                    let ny = if self.inclusion { self.eta.get(y) as f64 } else { 0.0 };
                    (n * self.p.half(), n * ny)
                }
                None => (0.0, 0.0),
            };
            self.tree.set(base + k, rw);
            self.tree.set(base + 2 + k, inc);
        }
    }

    fn refresh_reservoirs(&mut self) {
        let Some(res) = self.reservoirs else { return };
        let r = *self.eta.range();
        let base = CHANNELS_PER_SITE * r.len();
        let (n1, nn) = (self.eta.get(r.lo()) as f64, self.eta.get(r.hi()) as f64);
        let h = self.p.half();
        self.tree.set(base, res.alpha * (h + n1));
        self.tree.set(base + 1, res.gamma * n1);
        self.tree.set(base + 2, res.sigma * (h + nn));
        self.tree.set(base + 3, res.beta * nn);
    }

    fn refresh_around(&mut self, x: Site) {
        let r = *self.eta.range();
        self.refresh_site(x);
        for e in [-1, 1] {
            if let Some(y) = r.neighbor(x, e) {
                self.refresh_site(y);
            }
        }
    }

    /// Run to `horizon`, reporting holds and jumps to `obs`.
    pub fn run<O: Observer<OccupationConfig> + ?Sized>(
        &mut self,
        t0: f64,
        horizon: f64,
        rng: &mut RngStream,
        obs: &mut O,
    ) -> Result<RunEnd> {
        run(self, t0, Some(horizon), rng, obs, u64::MAX)
    }
}

impl Engine for FieldSim {
    type State = OccupationConfig;

    fn state(&self) -> &OccupationConfig {
        &self.eta
    }

    fn rates(&self) -> &RateTree {
        &self.tree
    }

    fn fire(&mut self, channel: usize, time: f64) -> Result<JumpEvent> {
        let r = *self.eta.range();
        let bulk = CHANNELS_PER_SITE * r.len();
        if channel >= bulk {
            let (site, virt) = if channel - bulk < 2 {
                (r.lo(), r.lo() - 1)
            } else {
                (r.hi(), r.hi() + 1)
            };
            let ev = if (channel - bulk).is_multiple_of(2) {
                self.eta.add(site, 1)?;
                JumpEvent {
                    time,
                    kind: EventKind::ReservoirBirth,
                    from: virt,
                    to: site,
                    label: None,
                }
            } else {
                let k = self.eta.get(site);
                self.eta.set(site, k - 1)?;
                JumpEvent {
                    time,
                    kind: EventKind::ReservoirDeath,
                    from: site,
                    to: virt,
                    label: None,
                }
            };
            self.refresh_around(site);
            self.refresh_reservoirs();
            return Ok(ev);
        }
        let x = r.lo() + (channel / CHANNELS_PER_SITE) as Site;
        let k = channel % CHANNELS_PER_SITE;
        let e = if k.is_multiple_of(2) { -1 } else { 1 };
        let kind = if k < 2 {
            EventKind::RwJump
        } else {
            EventKind::InclusionJump
        };
        let y = r.neighbor(x, e).expect("live channel has a neighbour");
        self.eta.move_particle(x, y)?;
        if r.kind() == BoundaryKind::OpenWindow && (y == r.lo() || y == r.hi()) {
            return Err(Error::WindowEdge { site: y, time });
        }
        self.refresh_around(x);
        self.refresh_around(y);
        if r.kind() == BoundaryKind::Segment && self.reservoirs.is_some() {
            self.refresh_reservoirs();
        }
        Ok(JumpEvent {
            time,
            kind,
            from: x,
            to: y,
            label: None,
        })
    }
}

fn record(mut sim: FieldSim, horizon: f64, rng: &mut RngStream) -> Result<Trajectory<OccupationConfig>> {
    let initial = sim.state().clone();
    let mut rec = Recorder::default();
    sim.run(0.0, horizon, rng, &mut rec)?;
    Ok(Trajectory {
        initial,
        events: rec.events,
        horizon: Some(horizon),
    })
}

/// Exact path of the inclusion process on the range of `initial` up to time
/// `horizon`. Open windows abort with [`Error::WindowEdge`] when a particle
/// reaches an end site.
pub fn simulate_sip(
    initial: &OccupationConfig,
    p: SipParams,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<Trajectory<OccupationConfig>> {
    record(FieldSim::new(initial.clone(), p)?, horizon, rng)
}

/// Exact path of the inclusion process on `{1..N}` with reservoirs at the
/// virtual sites 0 and N+1.
pub fn simulate_boundary_driven(
    initial: &OccupationConfig,
    res: ReservoirParams,
    p: SipParams,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<Trajectory<OccupationConfig>> {
    record(FieldSim::with_reservoirs(initial.clone(), res, p)?, horizon, rng)
}

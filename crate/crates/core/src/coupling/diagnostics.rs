use serde::Serialize;

use super::{CoupledState, CouplingSim};
use crate::dynamics::{Geometry, Observer};
use crate::error::Result;
use crate::lattice::{LabeledPositions, Site};
use crate::measures::SipParams;
use crate::stats::{estimate_replicas_multi, Estimate, Replicas, RngStream};

/// Path functionals of one coupled run, integrated exactly between events.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingDiagnostics {
    pub horizon: f64,
    /// `|Y_i − Ỹ_i|²` at the horizon.
    pub sq_discrepancy: Vec<f64>,
    /// Time with some pair of inclusion particles at distance 1.
    pub occ_delta: f64,
    /// Part of `occ_delta` outside binary collisions.
    pub occ_nonbinary: f64,
    /// `A_{i,k} = ∫ I(|z_{ik}| = 1) z_{ik} ds`, `z_{ik} = Y_k − Y_i`, row-major.
    pub additive: Vec<f64>,
    /// `⟨M_i, M_i⟩ = Σ_k ∫ I(|z_{ik}| = 1) ds`.
    pub qv: Vec<f64>,
    /// `M_i = (Y_i − Ỹ_i)(T) − (Y_i − Ỹ_i)(0) − Σ_k A_{i,k}`.
    pub martingale: Vec<f64>,
}

impl CouplingDiagnostics {
    pub fn particles(&self) -> usize {
        self.qv.len()
    }

    pub fn additive_at(&self, i: usize, k: usize) -> f64 {
        self.additive[i * self.particles() + k]
    }
}

/// Whether some pair is at distance 1, and whether the configuration is a
/// binary collision: a pair at distance 1 with every other particle at
/// distance ≥ 2 from both members.
pub fn collision_class(y: &[Site]) -> (bool, bool) {
    let n = y.len();
    let mut delta = false;
    for i in 0..n {
        for k in i + 1..n {
            if (y[k] - y[i]).abs() != 1 {
                continue;
            }
            delta = true;
            let isolated = (0..n)
                .filter(|&l| l != i && l != k)
                .all(|l| (y[l] - y[i]).abs() >= 2 && (y[l] - y[k]).abs() >= 2);
            if isolated {
                return (true, true);
            }
        }
    }
    (delta, false)
}

/// Observer accumulating the collision functionals.
#[derive(Debug, Clone)]
pub struct DiagnosticsObserver {
    n: usize,
    pub occ_delta: f64,
    pub occ_nonbinary: f64,
    pub additive: Vec<f64>,
    pub qv: Vec<f64>,
}

impl DiagnosticsObserver {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            occ_delta: 0.0,
            occ_nonbinary: 0.0,
            additive: vec![0.0; n * n],
            qv: vec![0.0; n],
        }
    }
}

impl Observer<CoupledState> for DiagnosticsObserver {
    fn hold(&mut self, s: &CoupledState, a: f64, b: f64) {
        let dt = b - a;
        let y = s.sip.as_slice();
        let (delta, binary) = collision_class(y);
        if !delta {
            return;
        }
        self.occ_delta += dt;
        if !binary {
            self.occ_nonbinary += dt;
        }
        for i in 0..self.n {
            for k in 0..self.n {
                let z = y[k] - y[i];
                if z.abs() == 1 {
                    self.additive[i * self.n + k] += z as f64 * dt;
                    self.qv[i] += dt;
                }
            }
        }
    }
}

/// Run the coupling on ℤ from `Y(0) = Ỹ(0) = start` up to `horizon`.
pub fn simulate_coupling(
    start: &LabeledPositions,
    p: SipParams,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<(CoupledState, CouplingDiagnostics)> {
    let g = Geometry::line_for(start.as_slice(), p, horizon);
    let initial = CoupledState::together(start);
    let mut sim = CouplingSim::new(initial.clone(), g, p)?;
    let n = start.len();
    let mut obs = DiagnosticsObserver::new(n);
    sim.run(0.0, Some(horizon), rng, &mut obs)?;
    let end = sim.into_state();
    let sq_discrepancy = (0..n).map(|i| (end.discrepancy(i) as f64).powi(2)).collect();
    let martingale = (0..n)
        .map(|i| {
            let drift: f64 = (0..n).map(|k| obs.additive[i * n + k]).sum();
            (end.discrepancy(i) - initial.discrepancy(i)) as f64 - drift
        })
        .collect();
    let diag = CouplingDiagnostics {
        horizon,
        sq_discrepancy,
        occ_delta: obs.occ_delta,
        occ_nonbinary: obs.occ_nonbinary,
        additive: obs.additive,
        qv: obs.qv,
        martingale,
    };
    Ok((end, diag))
}

/// Fractions of `[0, t]` spent in Δ and in Δ∖ℬ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionReport {
    pub frac_delta: f64,
    pub frac_nonbinary: f64,
}

pub fn collision_time_report(diag: &CouplingDiagnostics, t: f64) -> CollisionReport {
    CollisionReport {
        frac_delta: diag.occ_delta / t,
        frac_nonbinary: diag.occ_nonbinary / t,
    }
}

/// Names of the per-horizon estimates returned by [`coupling_scaling`].
pub const SCALING_OBSERVABLES: [&str; 4] = ["sq_discrepancy_over_t", "occ_delta", "occ_nonbinary", "frac_delta"];

/// One row of a coupling scaling experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub horizon: f64,
    pub estimates: Vec<Estimate>,
}

/// For each horizon, independent replicas of the coupling started together at
/// `start`; label 0 is the tagged particle. Horizon `k` uses substream `k` of
/// `plan`, so rows are statistically independent.
pub fn coupling_scaling(
    start: &LabeledPositions,
    p: SipParams,
    horizons: &[f64],
    plan: &Replicas,
) -> Result<Vec<ScalingRow>> {
    horizons
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let sub = plan.substream(k as u64);
            let estimates = estimate_replicas_multi(&SCALING_OBSERVABLES, &sub, |_, rng| {
                let (_, d) = simulate_coupling(start, p, t, rng)?;
                Ok(vec![
                    d.sq_discrepancy[0] / t,
                    d.occ_delta,
                    d.occ_nonbinary,
                    d.occ_delta / t,
                ])
            })?;
            Ok(ScalingRow { horizon: t, estimates })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::estimate_replicas;

    fn p(m: f64) -> SipParams {
        SipParams::new(m).unwrap()
    }

    #[test]
    fn collision_classes() {
        assert_eq!(collision_class(&[0, 5]), (false, false));
        assert_eq!(collision_class(&[0, 1]), (true, true));
        assert_eq!(collision_class(&[0, 1, 2]), (true, false));
        assert_eq!(collision_class(&[0, 0, 1]), (true, false));
        assert_eq!(collision_class(&[0, 1, 3]), (true, true));
        assert_eq!(collision_class(&[0, 1, 2, 9]), (true, false));
        assert_eq!(collision_class(&[0, 1, 4]), (true, true));
        assert_eq!(collision_class(&[0, 0, 0]), (false, false));
    }

    #[test]
    fn one_particle_has_no_discrepancy() {
        let mut rng = RngStream::new(1);
        let (end, d) = simulate_coupling(&LabeledPositions::new(vec![0]), p(1.0), 500.0, &mut rng).unwrap();
        assert_eq!(end.sip, end.irw);
        assert_eq!(d.sq_discrepancy, vec![0.0]);
        assert_eq!(d.occ_delta, 0.0);
        let r = collision_time_report(&d, 500.0);
        assert_eq!((r.frac_delta, r.frac_nonbinary), (0.0, 0.0));
    }

    #[test]
    fn bounds_and_two_particle_binary() {
        let mut rng = RngStream::new(2);
        for _ in 0..20 {
            let (_, d) = simulate_coupling(&LabeledPositions::new(vec![0, 0]), p(1.0), 100.0, &mut rng).unwrap();
            assert_eq!(d.occ_nonbinary, 0.0);
            assert!(d.occ_delta <= 100.0);
            // A is antisymmetric in its labels
            assert!((d.additive_at(0, 1) + d.additive_at(1, 0)).abs() < 1e-9);
            let (_, d) = simulate_coupling(&LabeledPositions::new(vec![0, 0, 0]), p(1.0), 100.0, &mut rng).unwrap();
            assert!(0.0 <= d.occ_nonbinary && d.occ_nonbinary <= d.occ_delta && d.occ_delta <= 100.0);
        }
    }

    // Started at distance ≥ 2 the pair shares every move until it first
    // reaches distance 1.
    #[test]
    fn no_discrepancy_before_first_contact() {
        let start = LabeledPositions::new(vec![0, 6]);
        let g = Geometry::line_for(start.as_slice(), p(1.0), 50.0);
        let mut sim = CouplingSim::new(CoupledState::together(&start), g, p(1.0)).unwrap();
        struct Watch {
            touched: bool,
        }
        impl Observer<CoupledState> for Watch {
            fn hold(&mut self, s: &CoupledState, _: f64, _: f64) {
                let y = s.sip.as_slice();
                if (y[1] - y[0]).abs() == 1 {
                    self.touched = true;
                }
                if !self.touched {
                    assert_eq!(s.sip, s.irw);
                }
            }
        }
        let mut rng = RngStream::new(13);
        sim.run(0.0, Some(50.0), &mut rng, &mut Watch { touched: false })
            .unwrap();
    }

    // M_i has mean zero and E[M_i²] = E⟨M_i, M_i⟩.
    #[test]
    fn martingale_and_quadratic_variation() {
        let start = LabeledPositions::new(vec![0, 1, 3]);
        let t = 30.0;
        let plan = Replicas::new(17, 20_000);
        let est = estimate_replicas_multi(&["m", "m2_minus_qv"], &plan, |_, rng| {
            let (_, d) = simulate_coupling(&start, p(1.0), t, rng)?;
            Ok(vec![d.martingale[0], d.martingale[0].powi(2) - d.qv[0]])
        })
        .unwrap();
        for e in &est {
            assert!(e.within(0.0, 3.0), "{}: {} ± {}", e.observable, e.mean(), e.std_error());
        }
        let qv = estimate_replicas("qv", &plan, |_, rng| {
            Ok(simulate_coupling(&start, p(1.0), t, rng)?.1.qv[0])
        })
        .unwrap();
        assert!(qv.mean() > 0.5);
    }
}

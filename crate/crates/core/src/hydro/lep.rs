use serde::{Deserialize, Serialize};

use super::heat::{heat_solve_discrete, LatticeField};
use super::{profile_discretize, MacroProfile};
use crate::coupling::{CoupledState, CouplingSim};
use crate::dynamics::{FieldSim, Geometry, LabeledSim};
use crate::error::{Error, Result};
use crate::lattice::{BoundaryKind, LabeledPositions, OccupationConfig, Site, SiteRange};
use crate::measures::{duality_poly, product_moment, sample_product, ReservoirParams, ScaleProfile, SipParams};
use crate::stats::{estimate_replicas, estimate_replicas_multi, Estimate, Replicas, RngStream};

/// Largest scale parameter accepted in hydrodynamic experiments; beyond it
/// the negative-binomial tails make the η-side observables too noisy.
pub const HYDRO_LAMBDA_MAX: f64 = 0.8;

/// Micro site of the macro point `y` at scale `n`. The small offset keeps
/// products like `0.6 · 100` on the intended integer.
pub fn snap(n: usize, y: f64) -> Site {
    (n as f64 * y + 1e-9).floor() as Site
}

/// How [`vee_estimate`] draws its two arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VeeMode {
    /// Inclusion particles and walkers from one coupled path.
    Coupled,
    /// Two independent walker systems; the estimate must vanish.
    IrwSelfTest,
}

/// Estimate of `E^SIP_x Π odds(X_i(t)) − Π_i E^IRW_{x_i} odds(X_i(t))`.
pub fn vee_estimate(
    lambda: &ScaleProfile,
    x: &LabeledPositions,
    t: f64,
    p: SipParams,
    plan: &Replicas,
    mode: VeeMode,
) -> Result<Estimate> {
    let g = Geometry::line_for(x.as_slice(), p, t);
    estimate_replicas("vee", plan, |_, rng| match mode {
        VeeMode::Coupled => {
            let mut sim = CouplingSim::new(CoupledState::together(x), g, p)?;
            sim.run(0.0, Some(t), rng, &mut ())?;
            let s = sim.state();
            Ok(product_moment(lambda, s.sip.as_slice()) - product_moment(lambda, s.irw.as_slice()))
        }
        VeeMode::IrwSelfTest => {
            let mut a = LabeledSim::new(x.clone(), g, p, false)?;
            a.run(0.0, Some(t), rng, &mut ())?;
            let mut b = LabeledSim::new(x.clone(), g, p, false)?;
            b.run(0.0, Some(t), rng, &mut ())?;
            Ok(product_moment(lambda, a.positions().as_slice()) - product_moment(lambda, b.positions().as_slice()))
        }
    })
}

/// Which side of the duality the Monte Carlo runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LepMode {
    /// Dual inclusion particles from the observation sites, scored by the
    /// product of `λ/(1−λ)` where they end.
    Dual,
    /// Occupation field sampled from the local-equilibrium product measure
    /// on a finite window with matched reservoirs, scored by `𝒟`.
    Direct,
}

/// Propagation-of-local-equilibrium experiment at one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroExperiment {
    pub n: usize,
    pub profile: MacroProfile,
    /// Macroscopic time; the micro horizon is `n² t`.
    pub t: f64,
    pub m: f64,
    pub points: Vec<f64>,
    pub mode: LepMode,
}

impl HydroExperiment {
    pub fn horizon(&self) -> f64 {
        (self.n * self.n) as f64 * self.t
    }

    pub fn sites(&self) -> Vec<Site> {
        self.points.iter().map(|&y| snap(self.n, y)).collect()
    }

    fn validate(&self) -> Result<SipParams> {
        let p = SipParams::new(self.m)?;
        self.profile.validate()?;
        if self.profile.bounds().1 > HYDRO_LAMBDA_MAX {
            return Err(Error::InvalidParameter(format!(
                "profile exceeds λ = {HYDRO_LAMBDA_MAX}; refused for variance control"
            )));
        }
        if self.n == 0 || self.t.is_nan() || self.t <= 0.0 || self.points.is_empty() {
            return Err(Error::InvalidParameter(
                "need N ≥ 1, t > 0 and at least one point".into(),
            ));
        }
        Ok(p)
    }

    /// Sites `[⌊N y_min⌋ − M, ⌊N y_max⌋ + M]` with `M = ⌈8 √(m N² t)⌉`.
    pub fn direct_window(&self) -> (Site, Site) {
        let s = self.sites();
        let margin = (8.0 * (self.m * self.horizon()).sqrt()).ceil() as Site;
        (s.iter().min().unwrap() - margin, s.iter().max().unwrap() + margin)
    }

    /// Observation tuples: every single point, then every pair.
    pub fn observables(&self) -> Vec<Vec<usize>> {
        let k = self.points.len();
        let mut out: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
        for i in 0..k {
            for j in i + 1..k {
                out.push(vec![i, j]);
            }
        }
        out
    }
}

/// Estimate of `E 𝒟(Σ δ_{x_i}, η(N² t))` against the heat-equation
/// prediction `Π ψ(N² t, x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LepRow {
    pub n: usize,
    pub points: Vec<f64>,
    pub sites: Vec<Site>,
    pub estimate: Estimate,
    pub pde: f64,
}

impl LepRow {
    pub fn gap(&self) -> f64 {
        self.estimate.mean() - self.pde
    }
}

fn name(points: &[f64]) -> String {
    let ys: Vec<String> = points.iter().map(|y| y.to_string()).collect();
    format!("y={}", ys.join(","))
}

pub fn lep_check(exp: &HydroExperiment, plan: &Replicas) -> Result<Vec<LepRow>> {
    let p = exp.validate()?;
    let horizon = exp.horizon();
    let sites = exp.sites();
    let tuples = exp.observables();
    let names: Vec<String> = tuples
        .iter()
        .map(|t| name(&t.iter().map(|&i| exp.points[i]).collect::<Vec<_>>()))
        .collect();
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let line = Geometry::line_for(&sites, p, horizon);
    let (wlo, whi) = match (exp.mode, line) {
        (LepMode::Dual, Geometry::Line { lo, hi }) => (lo, hi),
        _ => exp.direct_window(),
    };
    let lambda = profile_discretize(&exp.profile, exp.n, (wlo - 1, whi + 1))?;
    let (l_left, l_right) = exp.profile.limits();
    let odds = |l: f64| l / (1.0 - l);
    let psi0 = LatticeField::tabulate(wlo - 1, whi + 1, odds(l_left), odds(l_right), |x| lambda.odds(x));
    let psi = heat_solve_discrete(&psi0, p, horizon)?;

    let estimates = match exp.mode {
        LepMode::Dual => estimate_replicas_multi(&name_refs, plan, |_, rng| {
            tuples
                .iter()
                .map(|tuple| {
                    let start = LabeledPositions::new(tuple.iter().map(|&i| sites[i]).collect());
                    let mut sim = LabeledSim::new(start, line, p, true)?;
                    sim.run(0.0, Some(horizon), rng, &mut ())?;
                    Ok(product_moment(&lambda, sim.positions().as_slice()))
                })
                .collect()
        })?,
        LepMode::Direct => estimate_replicas_multi(&name_refs, plan, |_, rng| {
            let eta = direct_sample(exp, &lambda, p, rng)?;
            Ok(tuples
                .iter()
                .map(|tuple| {
                    let xs: Vec<Site> = tuple.iter().map(|&i| sites[i]).collect();
                    duality_at(&eta, &xs, p)
                })
                .collect())
        })?,
    };
    Ok(tuples
        .iter()
        .zip(estimates)
        .map(|(tuple, estimate)| {
            let xs: Vec<Site> = tuple.iter().map(|&i| sites[i]).collect();
            LepRow {
                n: exp.n,
                points: tuple.iter().map(|&i| exp.points[i]).collect(),
                pde: xs.iter().map(|&x| psi.at(x)).product(),
                sites: xs,
                estimate,
            }
        })
        .collect())
}

/// `𝒟(Σ δ_{x_i}, η)` with repeated sites collected.
fn duality_at(eta: &OccupationConfig, xs: &[Site], p: SipParams) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort();
    let mut acc = 1.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&x| x == sorted[i]).count();
        acc *= duality_poly(j as u32, eta.get(sorted[i]), p);
        i += j;
    }
    acc
}

/// One η-side path: sample the product measure on the window, attach
/// reservoirs whose stationary law matches `λ` just outside it, and run to
/// `N² t`.
pub fn direct_sample(
    exp: &HydroExperiment,
    lambda: &ScaleProfile,
    p: SipParams,
    rng: &mut RngStream,
) -> Result<OccupationConfig> {
    let (lo, hi) = exp.direct_window();
    let range = SiteRange::new(lo, hi, BoundaryKind::Segment)?;
    let res = ReservoirParams::canonical(lambda.odds(lo - 1), lambda.odds(hi + 1), p)?;
    let eta = sample_product(lambda, &range, p, rng)?;
    let mut sim = FieldSim::with_reservoirs(eta, res, p)?;
    sim.run(0.0, exp.horizon(), rng, &mut ())?;
    Ok(sim.into_state())
}

/// Replica estimate of `E^SIP_x Π odds(X_i(t))` on ℤ, the dual side of a
/// single LEP observable.
pub fn dual_moment(
    lambda: &ScaleProfile,
    x: &LabeledPositions,
    t: f64,
    p: SipParams,
    plan: &Replicas,
) -> Result<Estimate> {
    let g = Geometry::line_for(x.as_slice(), p, t);
    estimate_replicas("dual_moment", plan, |_, rng| {
        let mut sim = LabeledSim::new(x.clone(), g, p, true)?;
        sim.run(0.0, Some(t), rng, &mut ())?;
        Ok(product_moment(lambda, sim.positions().as_slice()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::NegBinomial;
    use crate::stats::difference;

    fn p(m: f64) -> SipParams {
        SipParams::new(m).unwrap()
    }

    #[test]
    fn snapping() {
        assert_eq!(snap(100, 0.6), 60);
        assert_eq!(snap(100, 0.4), 40);
        assert_eq!(snap(25, 0.4), 10);
        assert_eq!(snap(3, 0.5), 1);
    }

    #[test]
    fn vee_vanishes_for_one_particle_and_flat_profiles() {
        let bump = profile_discretize(
            &MacroProfile::GaussianBump {
                base: 0.1,
                amplitude: 0.5,
                center: 0.0,
                width: 0.5,
            },
            10,
            (-100, 100),
        )
        .unwrap();
        let plan = Replicas::new(1, 2000);
        let one = vee_estimate(
            &bump,
            &LabeledPositions::new(vec![0]),
            20.0,
            p(1.0),
            &plan,
            VeeMode::Coupled,
        )
        .unwrap();
        assert_eq!((one.mean(), one.variance()), (0.0, 0.0));
        let flat = ScaleProfile::constant(0.4).unwrap();
        let two = vee_estimate(
            &flat,
            &LabeledPositions::new(vec![0, 1]),
            20.0,
            p(1.0),
            &plan,
            VeeMode::Coupled,
        )
        .unwrap();
        assert!(two.mean().abs() < 1e-15 && two.variance() < 1e-28);
    }

    #[test]
    fn vee_self_test_is_centred() {
        let bump = profile_discretize(
            &MacroProfile::GaussianBump {
                base: 0.1,
                amplitude: 0.5,
                center: 0.0,
                width: 0.5,
            },
            10,
            (-100, 100),
        )
        .unwrap();
        let plan = Replicas::new(2, 20_000);
        let est = vee_estimate(
            &bump,
            &LabeledPositions::new(vec![0, 1]),
            10.0,
            p(1.0),
            &plan,
            VeeMode::IrwSelfTest,
        )
        .unwrap();
        assert!(est.within(0.0, 3.0), "{} ± {}", est.mean(), est.std_error());
    }

    #[test]
    fn constant_profile_is_stationary_on_both_sides() {
        let lam = 0.3;
        let exp = HydroExperiment {
            n: 8,
            profile: MacroProfile::Constant { lambda: lam },
            t: 0.05,
            m: 2.0,
            points: vec![0.25, 0.75],
            mode: LepMode::Direct,
        };
        let odds = lam / (1.0 - lam);
        let plan = Replicas::new(3, 4000);
        for mode in [LepMode::Direct, LepMode::Dual] {
            let rows = lep_check(&HydroExperiment { mode, ..exp.clone() }, &plan).unwrap();
            assert_eq!(rows.len(), 3);
            for r in &rows {
                let target = odds.powi(r.sites.len() as i32);
                assert!((r.pde - target).abs() < 1e-12);
                assert!(
                    r.estimate.within(target, 3.0),
                    "{mode:?} {:?}: {} vs {target}",
                    r.points,
                    r.estimate.mean()
                );
            }
        }
    }

    // Single-site law after evolution from the product measure, against the
    // negative-binomial pmf.
    #[test]
    fn direct_window_keeps_product_form() {
        let lam = 0.4;
        let exp = HydroExperiment {
            n: 6,
            profile: MacroProfile::Constant { lambda: lam },
            t: 0.1,
            m: 1.0,
            points: vec![0.5],
            mode: LepMode::Direct,
        };
        let lambda = profile_discretize(&exp.profile, exp.n, exp.direct_window()).unwrap();
        let x = exp.sites()[0];
        let plan = Replicas::new(4, 10_000);
        let est = estimate_replicas_multi(&["p0", "p1", "p2"], &plan, |_, rng| {
            let eta = direct_sample(&exp, &lambda, p(1.0), rng)?;
            let k = eta.get(x);
            Ok((0..3).map(|j| (k == j) as u8 as f64).collect())
        })
        .unwrap();
        let nb = NegBinomial::new(lam, p(1.0)).unwrap();
        for (j, e) in est.iter().enumerate() {
            assert!(
                e.within(nb.pmf(j as u64), 3.0),
                "k={j}: {} vs {}",
                e.mean(),
                nb.pmf(j as u64)
            );
        }
    }

    // Both routes estimate the same number for a non-constant profile.
    #[test]
    fn dual_and_direct_agree() {
        let exp = HydroExperiment {
            n: 6,
            profile: MacroProfile::SmoothedStep {
                left: 0.2,
                right: 0.6,
                center: 0.5,
                width: 0.2,
            },
            t: 0.1,
            m: 1.0,
            points: vec![0.5],
            mode: LepMode::Direct,
        };
        let direct = lep_check(&exp, &Replicas::new(5, 6000)).unwrap();
        let dual = lep_check(
            &HydroExperiment {
                mode: LepMode::Dual,
                ..exp
            },
            &Replicas::new(6, 6000),
        )
        .unwrap();
        let (d, se) = difference(&direct[0].estimate, &dual[0].estimate);
        assert!(d.abs() <= 3.0 * se, "{d} ± {se}");
        assert!(dual[0].estimate.within(dual[0].pde, 3.0));
    }
}

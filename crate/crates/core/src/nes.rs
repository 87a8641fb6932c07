//! Boundary-driven steady state: density profile, correlations through the
//! absorbing dual, and factorization of absorption probabilities.

use serde::{Deserialize, Serialize};

use crate::coupling::simulate_coupled_absorbing;
use crate::dynamics::{simulate_dual_absorbing, FieldSim, Observer};
use crate::error::{Error, Result};
use crate::exact::absorption_solve_single;
use crate::hydro::snap;
use crate::lattice::{LabeledPositions, OccupationConfig, Site, SiteRange};
use crate::measures::{sample_product, ReservoirParams, ScaleProfile, SipParams};
use crate::stats::{estimate_replicas, run_replicas, Estimate, Replicas, RngStream};

/// Number of batches in a direct stationary run.
pub const NES_BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NesMode {
    DualMc,
    DirectStationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NesExperiment {
    pub n: usize,
    pub rho_l: f64,
    pub rho_r: f64,
    pub m: f64,
    pub points: Vec<f64>,
    pub mode: NesMode,
}

impl NesExperiment {
    pub fn validate(&self) -> Result<SipParams> {
        let p = SipParams::new(self.m)?;
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("N = {} < 2", self.n)));
        }
        if !(self.rho_l >= 0.0 && self.rho_r >= 0.0 && self.rho_l.is_finite() && self.rho_r.is_finite()) {
            return Err(Error::InvalidParameter("densities must be finite and ≥ 0".into()));
        }
        if let Some(x) = self.points.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidParameter(format!("point {x} outside [0, 1]")));
        }
        Ok(p)
    }

    /// Micro sites `⌊x_i N⌋`.
    pub fn sites(&self) -> Vec<Site> {
        self.points.iter().map(|&x| snap(self.n, x)).collect()
    }

    pub fn reservoirs(&self, p: SipParams) -> Result<ReservoirParams> {
        ReservoirParams::canonical(self.rho_l, self.rho_r, p)
    }
}

/// `ρ_L + (ρ_R − ρ_L) i/(N+1)`.
pub fn linear_profile(i: Site, n: usize, rho_l: f64, rho_r: f64) -> f64 {
    rho_l + (rho_r - rho_l) * i as f64 / (n as f64 + 1.0)
}

fn rho_at(x: Site, n: usize, rho_l: f64, rho_r: f64) -> f64 {
    if x == 0 {
        rho_l
    } else {
        debug_assert_eq!(x, n as Site + 1);
        rho_r
    }
}

/// Estimate of `∫ 𝒟(Σ δ_{x_i}, η) dν^N`: run the absorbing dual from `xs`
/// and score `Π ρ_N(X_i(∞))`.
pub fn nes_correlation_dual(
    xs: &[Site],
    n: usize,
    rho_l: f64,
    rho_r: f64,
    p: SipParams,
    plan: &Replicas,
) -> Result<Estimate> {
    let res = ReservoirParams::canonical(rho_l, rho_r, p)?;
    let start = LabeledPositions::new(xs.to_vec());
    estimate_replicas("correlation", plan, |_, rng| {
        let ends = simulate_dual_absorbing(&start, n, &res, p, rng)?;
        Ok(ends.iter().map(|&x| rho_at(x, n, rho_l, rho_r)).product())
    })
}

/// Time integrals of every bulk count.
struct Integrals {
    lo: Site,
    acc: Vec<f64>,
}

impl Observer<OccupationConfig> for Integrals {
    fn hold(&mut self, s: &OccupationConfig, from: f64, to: f64) {
        let dt = to - from;
        for (i, a) in self.acc.iter_mut().enumerate() {
            *a += s.get(self.lo + i as Site) as f64 * dt;
        }
    }
}

/// Stationary profile from one long boundary-driven run.
///
/// Starts from the product measure with the linear profile, burns in for
/// `t_burn` (default `10 N²/m`), then averages `η_i/(m/2)` over
/// [`NES_BATCHES`] batches of length `t_avg / NES_BATCHES`. Entry `i − 1`
/// holds the batch-means estimate for site `i`.
pub fn nes_profile_direct(
    n: usize,
    rho_l: f64,
    rho_r: f64,
    p: SipParams,
    t_burn: Option<f64>,
    t_avg: f64,
    rng: &mut RngStream,
) -> Result<Vec<Estimate>> {
    if t_avg.is_nan() || t_avg <= 0.0 {
        return Err(Error::InvalidParameter("averaging time must be positive".into()));
    }
    let res = ReservoirParams::canonical(rho_l, rho_r, p)?;
    let range = SiteRange::segment(n)?;
    let lambda = ScaleProfile::tabulate(1, n as Site, 0.0, 0.0, |i| {
        let r = linear_profile(i, n, rho_l, rho_r);
        r / (1.0 + r)
    })?;
    let eta = sample_product(&lambda, &range, p, rng)?;
    let mut sim = FieldSim::with_reservoirs(eta, res, p)?;
    let burn = t_burn.unwrap_or(10.0 * (n * n) as f64 / p.m());
    sim.run(0.0, burn, rng, &mut ())?;
    let batch = t_avg / NES_BATCHES as f64;
    let mut out: Vec<Estimate> = (1..=n).map(|i| Estimate::new(format!("site_{i}"))).collect();
    let mut t = burn;
    for _ in 0..NES_BATCHES {
        let mut obs = Integrals {
            lo: 1,
            acc: vec![0.0; n],
        };
        sim.run(t, t + batch, rng, &mut obs)?;
        t += batch;
        for (e, a) in out.iter_mut().zip(&obs.acc) {
            e.push(a / batch / p.half());
        }
    }
    Ok(out)
}

/// One outcome pattern of the factorization table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorRow {
    pub n: usize,
    pub sites: Vec<Site>,
    /// `true` where the particle ends at 0.
    pub left: Vec<bool>,
    pub joint: Estimate,
    /// Product of single-particle absorption probabilities.
    pub product: f64,
    pub gap: Estimate,
}

/// Joint absorption probabilities of the labeled dual against the product
/// of single-particle absorption probabilities, for each `N` in `scales`.
///
/// The labeled marginals inside a multi-particle run are not the
/// single-particle laws (inclusion pulls particles together), so the
/// product uses the exact tridiagonal solve for one walker.
pub fn lep_factorization_check(exp: &NesExperiment, scales: &[usize], plan: &Replicas) -> Result<Vec<FactorRow>> {
    let p = exp.validate()?;
    let k = exp.points.len();
    if k == 0 || k > 16 {
        return Err(Error::InvalidParameter("between 1 and 16 points".into()));
    }
    let mut rows = Vec::new();
    for (s, &n) in scales.iter().enumerate() {
        let e = NesExperiment { n, ..exp.clone() };
        e.validate()?;
        let sites = e.sites();
        let res = e.reservoirs(p)?;
        let right = absorption_solve_single(n, p)?;
        let start = LabeledPositions::new(sites.clone());
        let masks: Vec<u32> = run_replicas(&plan.substream(s as u64), |_, rng| {
            let ends = simulate_dual_absorbing(&start, n, &res, p, rng)?;
            Ok(ends
                .iter()
                .enumerate()
                .fold(0u32, |m, (i, &x)| m | (((x == 0) as u32) << i)))
        })?;
        for pattern in 0..(1u32 << k) {
            let left: Vec<bool> = (0..k).map(|i| pattern >> i & 1 == 1).collect();
            let product: f64 = left
                .iter()
                .zip(&sites)
                .map(|(&l, &x)| if l { 1.0 - right[x as usize] } else { right[x as usize] })
                .product();
            let hits = || masks.iter().map(|&m| (m == pattern) as u8 as f64);
            let joint = Estimate::from_samples("joint", hits());
            let gap = Estimate::from_samples("gap", hits().map(|h| h - product));
            rows.push(FactorRow {
                n,
                sites: sites.clone(),
                left,
                joint,
                product,
                gap,
            });
        }
    }
    Ok(rows)
}

/// `P(∃ i: X_i(∞) ≠ X̃_i(∞))` under the absorbing coupling started from
/// `⌊x_i N⌋`.
pub fn coupled_absorption_check(points: &[f64], n: usize, p: SipParams, plan: &Replicas) -> Result<Estimate> {
    let start = LabeledPositions::new(points.iter().map(|&x| snap(n, x)).collect());
    estimate_replicas("discrepant_absorption", plan, |_, rng| {
        let s = simulate_coupled_absorbing(&start, n, p, rng)?;
        Ok((s.sip != s.irw) as u8 as f64)
    })
}

/// Exact one-point profile `E ρ_N(X(∞))` from the tridiagonal solve.
pub fn exact_profile(n: usize, rho_l: f64, rho_r: f64, p: SipParams) -> Result<Vec<f64>> {
    let right = absorption_solve_single(n, p)?;
    Ok(right[1..=n].iter().map(|q| rho_l * (1.0 - q) + rho_r * q).collect())
}

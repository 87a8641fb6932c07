//! One parameter struct per subcommand. Every field is optional so the same
//! struct serves as flag set, config-file schema and resolved-config echo.

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use sip_core::coupling::{coupling_scaling, run_z_chain, SCALING_OBSERVABLES};
use sip_core::dynamics::{simulate_boundary_driven, simulate_irw, simulate_sip, simulate_sip_labeled, JumpEvent};
use sip_core::exact::{
    build_generator, dual_absorption_solve, max_boundary_residual, max_intertwining_residual, stationary_solve, Model,
};
use sip_core::hydro::{lep_check, HydroExperiment, LepMode, MacroProfile, WalkKernel};
use sip_core::lattice::{LabeledPositions, OccupationConfig, Site, SiteRange};
use sip_core::measures::{detailed_balance_residual, moment_identity_lhs, ReservoirParams, SipParams};
use sip_core::nes::{
    coupled_absorption_check, exact_profile, lep_factorization_check, nes_correlation_dual, nes_profile_direct,
    NesExperiment, NesMode,
};
use sip_core::report::{joined, Cell, Report};
use sip_core::stats::{estimate_replicas_multi, Estimate, Replicas, RngStream};

use crate::config::{need, CliError, CliResult};

pub const DEFAULT_REPLICAS: u64 = 10_000;

/// Run-wide settings that are not experiment parameters.
pub struct Ctx {
    pub seed: u64,
    pub threads: usize,
    pub quiet: bool,
}

impl Ctx {
    fn plan(&self, replicas: u64) -> Replicas {
        Replicas::new(self.seed, replicas).with_threads(self.threads)
    }

    fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("sip: {}", msg.as_ref());
        }
    }
}

pub struct Outcome {
    pub report: Report,
    /// One line per observable for standard output.
    pub summary: Vec<String>,
}

pub trait Experiment: Serialize + DeserializeOwned + Clone {
    const NAME: &'static str;
    /// Whether the output depends on the seed.
    const SEEDED: bool = true;

    /// Fill defaults and check that required keys are present.
    fn resolve(self) -> CliResult<Self>;

    fn run(&self, ctx: &Ctx, echo: Value) -> CliResult<Outcome>;
}

fn sip(m: f64) -> CliResult<SipParams> {
    Ok(SipParams::new(m)?)
}

fn est_cells(e: &Estimate) -> [Cell; 3] {
    Report::estimate_cells(e)
}

fn pm(e: &Estimate) -> String {
    format!("{:.6} ± {:.6} ({} replicas)", e.mean(), e.std_error(), e.count())
}

fn parse_json<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// `family:key=value,...` or a JSON object.
fn parse_profile(s: &str) -> Result<MacroProfile, String> {
    if s.trim_start().starts_with('{') {
        return serde_json::from_str(s).map_err(|e| e.to_string());
    }
    let (family, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut obj = serde_json::Map::new();
    obj.insert("family".into(), Value::String(family.trim().to_string()));
    for kv in rest.split(',').filter(|kv| !kv.trim().is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{kv}`"))?;
        let v: f64 = v.trim().parse().map_err(|e| format!("{k}: {e}"))?;
        obj.insert(k.trim().to_string(), serde_json::json!(v));
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- check-duality

/// Exhaustive duality residual on a ring or a boundary-driven segment.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckDuality {
    /// Ring length (bulk self-duality).
    #[arg(long)]
    pub ring: Option<usize>,
    /// Segment length N (boundary duality).
    #[arg(long)]
    pub segment: Option<usize>,
    /// Largest number of dual particles.
    #[arg(long)]
    pub max_dual: Option<u32>,
    /// Largest occupation per site of η.
    #[arg(long)]
    pub max_occ: Option<u32>,
    /// Inclusion parameter m > 0
    #[arg(long)]
    pub m: Option<f64>,
    /// Reservoir densities (canonical rates); defaults 0.5 and 2.
    #[arg(long)]
    pub rho_l: Option<f64>,
    #[arg(long)]
    pub rho_r: Option<f64>,
    /// Explicit reservoir rates; all four override the densities.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
}

impl Experiment for CheckDuality {
    const NAME: &'static str = "check-duality";
    const SEEDED: bool = false;

    fn resolve(mut self) -> CliResult<Self> {
        need(&self.m, "m")?;
        match (self.ring, self.segment) {
            (Some(_), None) => {}
            (None, Some(_)) => {
                let rates = [self.alpha, self.beta, self.gamma, self.sigma];
                if rates.iter().any(Option::is_some) && rates.iter().any(Option::is_none) {
                    return Err(CliError::Config("give all of alpha, beta, gamma, sigma or none".into()));
                }
                if rates[0].is_none() {
                    self.rho_l.get_or_insert(0.5);
                    self.rho_r.get_or_insert(2.0);
                }
            }
            _ => {
                return Err(CliError::Config(
                    "missing required key: exactly one of `ring` or `segment`".into(),
                ))
            }
        }
        self.max_dual.get_or_insert(3);
        self.max_occ.get_or_insert(4);
        Ok(self)
    }

    fn run(&self, ctx: &Ctx, echo: Value) -> CliResult<Outcome> {
        let p = sip(self.m.unwrap())?;
        let (max_dual, max_occ) = (self.max_dual.unwrap(), self.max_occ.unwrap());
        ctx.progress(format!("enumerating ξ with |ξ| ≤ {max_dual} and η_i ≤ {max_occ}"));
        let (geometry, sites, (worst, pairs)) = if let Some(l) = self.ring {
            ("ring", l, max_intertwining_residual(l, max_dual, max_occ, p)?)
        } else {
            let n = self.segment.unwrap();
            let res = match self.alpha {
                Some(a) => ReservoirParams::new(a, self.beta.unwrap(), self.gamma.unwrap(), self.sigma.unwrap())?,
                None => ReservoirParams::canonical(self.rho_l.unwrap(), self.rho_r.unwrap(), p)?,
            };
            ("segment", n, max_boundary_residual(n, max_dual, max_occ, &res, p)?)
        };
        let mut report = Report::new(
            Self::NAME,
            None,
            echo,
            &["geometry", "sites", "m", "max_dual", "max_occ", "pairs", "max_residual"],
        );
        report.push(vec![
            geometry.into(),
            sites.into(),
            p.m().into(),
            (max_dual as u64).into(),
            (max_occ as u64).into(),
            pairs.into(),
            worst.into(),
        ])?;
        Ok(Outcome {
            report,
            summary: vec![format!("max residual {worst:.3e} over {pairs} (ξ, η) pairs")],
        })
    }
}

// ---------------------------------------------------------------- check-balance

/// Detailed balance of the negative-binomial marginals and the moment
/// identity of the duality polynomials.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBalance {
    /// Inclusion parameters, comma separated
    #[arg(long, value_delimiter = ',')]
    pub m: Option<Vec<f64>>,
    /// Scale parameters λ ∈ [0, 1), comma separated
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// Occupations n, k range over 0..=n_max.
    #[arg(long)]
    pub n_max: Option<u64>,
    /// Moments k = 0..=k_max.
    #[arg(long)]
    pub k_max: Option<u32>,
}

impl Experiment for CheckBalance {
    const NAME: &'static str = "check-balance";
    const SEEDED: bool = false;

    fn resolve(mut self) -> CliResult<Self> {
        self.m.get_or_insert_with(|| vec![0.5, 1.0, 2.0, 4.0]);
        self.lambda
            .get_or_insert_with(|| (1..=8).map(|i| i as f64 / 10.0).collect());
        self.n_max.get_or_insert(30);
        self.k_max.get_or_insert(4);
        Ok(self)
    }

    fn run(&self, _ctx: &Ctx, echo: Value) -> CliResult<Outcome> {
        let mut report = Report::new(Self::NAME, None, echo, &["check", "m", "lambda", "k", "residual"]);
        let (mut db, mut mo) = (0.0f64, 0.0f64);
        for &m in self.m.as_ref().unwrap() {
            let p = sip(m)?;
            for &l in self.lambda.as_ref().unwrap() {
                let mut worst = 0.0f64;
                for n in 1..=self.n_max.unwrap() {
                    for k in 0..=self.n_max.unwrap() {
                        worst = worst.max(detailed_balance_residual(l, p, n, k)?);
                    }
                }
                db = db.max(worst);
                report.push(vec![
                    "detailed_balance".into(),
                    m.into(),
                    l.into(),
                    Cell::Empty,
                    worst.into(),
                ])?;
                for k in 0..=self.k_max.unwrap() {
                    let lhs = moment_identity_lhs(k, l, p, 1e-13)?.value;
                    let err = (lhs - (l / (1.0 - l)).powi(k as i32)).abs();
                    mo = mo.max(err);
                    report.push(vec![
                        "moment_identity".into(),
                        m.into(),
                        l.into(),
                        (k as u64).into(),
                        err.into(),
                    ])?;
                }
            }
        }
        Ok(Outcome {
            report,
            summary: vec![
                format!("detailed balance: max relative residual {db:.3e}"),
                format!("moment identity: max absolute error {mo:.3e}"),
            ],
        })
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulate {
    /// sip (occupation field on a ring), boundary (segment with
    /// reservoirs), sip_labeled or irw (tagged particles on ℤ).
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub ring: Option<usize>,
    #[arg(long)]
    pub n_sites: Option<usize>,
    /// Initial particle positions, one entry per particle.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub initial: Option<Vec<Site>>,
    /// Inclusion parameter m > 0
    #[arg(long)]
    pub m: Option<f64>,
    /// Simulated time
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub rho_l: Option<f64>,
    #[arg(long)]
    pub rho_r: Option<f64>,
}

impl Experiment for Simulate {
    const NAME: &'static str = "simulate";

    fn resolve(mut self) -> CliResult<Self> {
        let model = need(&self.model, "model")?;
        need(&self.m, "m")?;
        need(&self.horizon, "horizon")?;
        match model.as_str() {
            "sip" => {
                need(&self.ring, "ring")?;
                need(&self.initial, "initial")?;
            }
            "boundary" => {
                need(&self.n_sites, "n_sites")?;
                need(&self.rho_l, "rho_l")?;
                need(&self.rho_r, "rho_r")?;
                self.initial.get_or_insert_with(Vec::new);
            }
            "sip_labeled" | "irw" => {
                need(&self.initial, "initial")?;
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown model `{other}` (sip, boundary, sip_labeled, irw)"
                )))
            }
        }
        Ok(self)
    }

    fn run(&self, ctx: &Ctx, echo: Value) -> CliResult<Outcome> {
        let p = sip(self.m.unwrap())?;
        let horizon = self.horizon.unwrap();
        let initial = self.initial.clone().unwrap();
        let mut rng = RngStream::new(ctx.seed);
        let field = |range: SiteRange| -> CliResult<OccupationConfig> {
            let pairs: Vec<(Site, u32)> = initial.iter().map(|&x| (x, 1)).collect();
            Ok(OccupationConfig::from_pairs(range, &pairs)?)
        };
        let (events, final_count): (Vec<JumpEvent>, u64) = match self.model.as_deref().unwrap() {
            "sip" => {
                let t = simulate_sip(&field(SiteRange::ring(self.ring.unwrap())?)?, p, horizon, &mut rng)?;
                let n = t.replay()?.total();
                (t.events, n)
            }
            "boundary" => {
                let res = ReservoirParams::canonical(self.rho_l.unwrap(), self.rho_r.unwrap(), p)?;
                let eta = field(SiteRange::segment(self.n_sites.unwrap())?)?;
                let t = simulate_boundary_driven(&eta, res, p, horizon, &mut rng)?;
                let n = t.replay()?.bulk_total();
                (t.events, n)
            }
            model => {
                let start = LabeledPositions::new(initial.clone());
                let t = if model == "irw" {
                    simulate_irw(&start, p, horizon, &mut rng)?
                } else {
                    simulate_sip_labeled(&start, p, horizon, &mut rng)?
                };
                (t.events, start.len() as u64)
            }
        };
        let mut report = Report::new(
            Self::NAME,
            Some(ctx.seed),
            echo,
            &["time", "kind", "from", "to", "label"],
        );
        for ev in &events {
            let label = ev.label.map_or(Cell::Empty, |l| Cell::Int(l as i64));
            report.push(vec![
                ev.time.into(),
                ev.kind.as_str().into(),
                ev.from.into(),
                ev.to.into(),
                label,
            ])?;
        }
        Ok(Outcome {
            report,
            summary: vec![format!(
                "{} events up to t = {horizon}; {final_count} particles at the end",
                events.len()
            )],
        })
    }
}

// ---------------------------------------------------------------- coupling-scaling

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingScaling {
    /// Common start of the inclusion particles and the walkers.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Option<Vec<Site>>,
    /// Inclusion parameter m > 0
    #[arg(long)]
    pub m: Option<f64>,
    /// Horizons T, comma separated
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<f64>>,
    /// Monte Carlo replicas
    #[arg(long)]
    pub replicas: Option<u64>,
}

impl Experiment for CouplingScaling {
    const NAME: &'static str = "coupling-scaling";

    fn resolve(mut self) -> CliResult<Self> {
        need(&self.m, "m")?;
        need(&self.horizons, "horizons")?;
        self.start.get_or_insert_with(|| vec![0, 0]);
        self.replicas.get_or_insert(DEFAULT_REPLICAS);
        Ok(self)
    }

    fn run(&self, ctx: &Ctx, echo: Value) -> CliResult<Outcome> {
        let p = sip(self.m.unwrap())?;
        let start = LabeledPositions::new(self.start.clone().unwrap());
        ctx.progress(format!(
            "{} particles, horizons {:?}",
            start.len(),
            self.horizons.as_ref().unwrap()
        ));
        let rows = coupling_scaling(
            &start,
            p,
            self.horizons.as_ref().unwrap(),
            &ctx.plan(self.replicas.unwrap()),
        )?;
        let mut report = Report::new(
            Self::NAME,
            Some(ctx.seed),
            echo,
            &["horizon", "observable", "mean", "stderr", "replicas"],
        );
        let mut summary = Vec::new();
        for r in &rows {
            for (name, e) in SCALING_OBSERVABLES.iter().zip(&r.estimates) {
                let [a, b, c] = est_cells(e);
                report.push(vec![r.horizon.into(), (*name).into(), a, b, c])?;
                summary.push(format!("T={} {name}: {}", r.horizon, pm(e)));
            }
        }
        Ok(Outcome { report, summary })
    }
}

// ---------------------------------------------------------------- z-chain

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZChain {
    /// Inclusion parameter m > 0
    #[arg(long)]
    pub m: Option<f64>,
    /// Horizons T, comma separated
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<f64>>,
    /// Extra rate from ±1 into 0 (2 matches the two-particle coupling).
    #[arg(long)]
    pub origin_pull: Option<f64>,
    /// Starting value of the chain
    #[arg(long, allow_hyphen_values = true)]
    pub z0: Option<Site>,
    /// Monte Carlo replicas
    #[arg(long)]
    pub replicas: Option<u64>,
}

impl Experiment for ZChain {
    const NAME: &'static str = "z-chain";

    fn resolve(mut self) -> CliResult<Self> {
        need(&self.m, "m")?;
        need(&self.horizons, "horizons")?;
        self.origin_pull.get_or_insert(sip_core::coupling::DEFAULT_ORIGIN_PULL);
        self.z0.get_or_insert(0);
        self.replicas.get_or_insert(DEFAULT_REPLICAS);
        Ok(self)
    }

    fn run(&self, ctx: &Ctx, echo: Value) -> CliResult<Outcome> {
        let (m, pull, z0) = (self.m.unwrap(), self.origin_pull.unwrap(), self.z0.unwrap());
        sip(m)?;
        let names = ["occupation_pm1", "additive_sq_over_t", "final_z"];
        let plan = ctx.plan(self.replicas.unwrap());
        let mut report = Report::new(
            Self::NAME,
            Some(ctx.seed),
            echo,
            &["horizon", "observable", "mean", "stderr", "replicas"],
        );
        let mut summary = Vec::new();
        for (k, &t) in self.horizons.as_ref().unwrap().iter().enumerate() {
            ctx.progress(format!("T = {t}"));
            let est = estimate_replicas_multi(&names, &plan.substream(k as u64), |_, rng| {
                let s = run_z_chain(z0, m, t, pull, rng)?;
                Ok(vec![s.occ_pm1, s.additive * s.additive / t, s.final_z as f64])
            })?;
            for (name, e) in names.iter().zip(&est) {
                let [a, b, c] = est_cells(e);
                report.push(vec![t.into(), (*name).into(), a, b, c])?;
                summary.push(format!("T={t} {name}: {}", pm(e)));
            }
        }
        Ok(Outcome { report, summary })
    }
}

// ---------------------------------------------------------------- hydro-lep

fn parse_lep_mode(s: &str) -> Result<LepMode, String> {
    parse_json(s)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroLep {
    /// `family:key=value,...`, e.g. `smoothed_step:left=0.2,right=0.6,center=0.5,width=0.1`.
    #[arg(long, value_parser = parse_profile)]
    pub profile: Option<MacroProfile>,
    /// Scales N, comma separated
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Macroscopic time; micro time is N² t.
    #[arg(long)]
    pub t: Option<f64>,
    /// Inclusion parameter m > 0
    #[arg(long)]
    pub m: Option<f64>,
    /// Macro points, comma separated
    #[arg(long, value_delimiter = ',')]
    pub points: Option<Vec<f64>>,
    /// Monte Carlo replicas
    #[arg(long)]
    pub replicas: Option<u64>,
    /// dual or direct.
    #[arg(long, value_parser = parse_lep_mode)]
    pub mode: Option<LepMode>,
}

impl Experiment for HydroLep {
    const NAME: &'static str = "hydro-lep";

    fn resolve(mut self) -> CliResult<Self> {
        need(&self.profile, "profile")?;
        need(&self.n_list, "n_list")?;
        need(&self.t, "t")?;
        need(&self.points, "points")?;
        self.m.get_or_insert(1.0);
        self.replicas.get_or_insert(DEFAULT_REPLICAS);
        self.mode.get_or_insert(LepMode::Dual);
        Ok(self)
    }

    fn run(&self, ctx: &Ctx, echo: Value) -> CliResult<Outcome> {
        let plan = ctx.plan(self.replicas.unwrap());
        let mut report = Report::new(
            Self::NAME,
            Some(ctx.seed),
            echo,
            &["N", "y", "sites", "estimate", "stderr", "replicas", "pde_value"],
        );
        let mut summary = Vec::new();
        for (k, &n) in self.n_list.as_ref().unwrap().iter().enumerate() {
            ctx.progress(format!("N = {n}"));
            let exp = HydroExperiment {
                n,
                profile: self.profile.unwrap(),
                t: self.t.unwrap(),
                m: self.m.unwrap(),
                points: self.points.clone().unwrap(),
                mode: self.mode.unwrap(),
            };
            for r in lep_check(&exp, &plan.substream(k as u64))? {
                let [a, b, c] = est_cells(&r.estimate);
                report.push(vec![
                    n.into(),
                    joined(&r.points),
                    joined(&r.sites),
                    a,
                    b,
                    c,
                    r.pde.into(),
                ])?;
                summary.push(format!("N={n} y={:?}: {} vs {:.6}", r.points, pm(&r.estimate), r.pde));
            }
        }
        Ok(Outcome { report, summary })
    }
}

// ---------------------------------------------------------------- nes-profile

fn parse_nes_mode(s: &str) -> Result<NesMode, String> {
    parse_json(s)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NesProfile {
    #[arg(long)]
    pub n_sites: Option<usize>,
    #[arg(long)]
    pub rho_l: Option<f64>,
    #[arg(long)]
    pub rho_r: Option<f64>,
    /// Inclusion parameter m > 0
    #[arg(long)]
    pub m: Option<f64>,
    /// Dual replicas per site (dual_mc mode).
    #[arg(long)]
    pub replicas: Option<u64>,
    /// dual_mc or direct_stationary.
    #[arg(long, value_parser = parse_nes_mode)]
    pub mode: Option<NesMode>,
    /// Averaging time after burn-in (direct_stationary).
    #[arg(long)]
    pub t_avg: Option<f64>,
    /// Burn-in time (direct_stationary); default 10 N²/m.
    #[arg(long)]
    pub t_burn: Option<f64>,
}

impl Experiment for NesProfile {
    const NAME: &'static str = "nes-profile";

    fn resolve(mut self) -> CliResult<Self> {
        let n = need(&self.n_sites, "n_sites")?;
        need(&self.rho_l, "rho_l")?;
        need(&self.rho_r, "rho_r")?;
        let m = *self.m.get_or_insert(2.0);
        self.replicas.get_or_insert(DEFAULT_REPLICAS);
        let mode = *self.mode.get_or_insert(NesMode::DualMc);
        if mode == NesMode::DirectStationary {
            self.t_burn.get_or_insert(10.0 * (n * n) as f64 / m);
            self.t_avg.get_or_insert(500.0 * (n * n) as f64 / m);
        }
        Ok(self)
    }

    fn run(&self, ctx: &Ctx, echo: Value) -> CliResult<Outcome> {
        let (n, rl, rr) = (self.n_sites.unwrap(), self.rho_l.unwrap(), self.rho_r.unwrap());
        let p = sip(self.m.unwrap())?;
        NesExperiment {
            n,
            rho_l: rl,
            rho_r: rr,
            m: p.m(),
            points: vec![],
            mode: self.mode.unwrap(),
        }
        .validate()?;
        let exact = exact_profile(n, rl, rr, p)?;
        let estimates: Vec<Estimate> = match self.mode.unwrap() {
            NesMode::DualMc => {
                let plan = ctx.plan(self.replicas.unwrap());
                (1..=n)
                    .map(|i| nes_correlation_dual(&[i as Site], n, rl, rr, p, &plan.substream(i as u64)))
                    .collect::<Result<_, _>>()?
            }
            NesMode::DirectStationary => {
                ctx.progress("single long run with batch means");
                let mut rng = RngStream::new(ctx.seed);
                nes_profile_direct(n, rl, rr, p, self.t_burn, self.t_avg.unwrap(), &mut rng)?
            }
        };
        let mut report = Report::new(
            Self::NAME,
            Some(ctx.seed),
            echo,
            &["site", "estimate", "stderr", "replicas", "exact"],
        );
        let mut summary = Vec::new();
        for (i, (e, x)) in estimates.iter().zip(&exact).enumerate() {
            let [a, b, c] = est_cells(e);
            report.push(vec![(i + 1).into(), a, b, c, (*x).into()])?;
            summary.push(format!("site {}: {} (exact {x:.6})", i + 1, pm(e)));
        }
        Ok(Outcome { report, summary })
    }
}

// ---------------------------------------------------------------- nes-factorization

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NesFactorization {
    /// Macro points x_i ∈ [0, 1]; particles start at ⌊x_i N⌋.
    #[arg(long, value_delimiter = ',')]
    pub points: Option<Vec<f64>>,
    /// Scales N, comma separated
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Inclusion parameter m > 0
    #[arg(long)]
    pub m: Option<f64>,
    /// Monte Carlo replicas
    #[arg(long)]
    pub replicas: Option<u64>,
    /// Also estimate the discrepant-absorption probability of the coupling.
    #[arg(long)]
    pub coupled: Option<bool>,
}

impl Experiment for NesFactorization {
    const NAME: &'static str = "nes-factorization";

    fn resolve(mut self) -> CliResult<Self> {
        need(&self.points, "points")?;
        need(&self.n_list, "n_list")?;
        self.m.get_or_insert(2.0);
        self.replicas.get_or_insert(DEFAULT_REPLICAS);
        self.coupled.get_or_insert(true);
        Ok(self)
    }

    fn run(&self, ctx: &Ctx, echo: Value) -> CliResult<Outcome> {
        let p = sip(self.m.unwrap())?;
        let points = self.points.clone().unwrap();
        let scales = self.n_list.clone().unwrap();
        let exp = NesExperiment {
            n: scales[0],
            rho_l: 0.0,
            rho_r: 1.0,
            m: p.m(),
            points: points.clone(),
            mode: NesMode::DualMc,
        };
        let plan = ctx.plan(self.replicas.unwrap());
        ctx.progress(format!("factorization over N = {scales:?}"));
        let rows = lep_factorization_check(&exp, &scales, &plan.substream(0))?;
        let mut report = Report::new(
            Self::NAME,
            Some(ctx.seed),
            echo,
            &[
                "N",
                "sites",
                "observable",
                "estimate",
                "stderr",
                "replicas",
                "reference",
            ],
        );
        let mut summary = Vec::new();
        for r in &rows {
            let tag: String = r.left.iter().map(|&l| if l { 'L' } else { 'R' }).collect();
            let [a, b, c] = est_cells(&r.joint);
            report.push(vec![
                r.n.into(),
                joined(&r.sites),
                format!("joint_{tag}").into(),
                a,
                b,
                c,
                r.product.into(),
            ])?;
            let [a, b, c] = est_cells(&r.gap);
            report.push(vec![
                r.n.into(),
                joined(&r.sites),
                format!("gap_{tag}").into(),
                a,
                b,
                c,
                0.0.into(),
            ])?;
            summary.push(format!("N={} {tag}: joint − product {}", r.n, pm(&r.gap)));
        }
        if self.coupled.unwrap() {
            for (k, &n) in scales.iter().enumerate() {
                ctx.progress(format!("coupled absorption, N = {n}"));
                let e = coupled_absorption_check(&points, n, p, &plan.substream(1 + k as u64))?;
                let sites: Vec<Site> = points.iter().map(|&x| sip_core::hydro::snap(n, x)).collect();
                let [a, b, c] = est_cells(&e);
                report.push(vec![
                    n.into(),
                    joined(&sites),
                    "coupled_discrepancy".into(),
                    a,
                    b,
                    c,
                    Cell::Empty,
                ])?;
                summary.push(format!("N={n} P(discrepant absorption): {}", pm(&e)));
            }
        }
        Ok(Outcome { report, summary })
    }
}

// ---------------------------------------------------------------- oracle

/// Exact reference values from the deterministic solvers.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Oracle {
    /// absorption, heat_kernel or ring_stationary.
    #[arg(long)]
    pub kind: Option<String>,
    /// Inclusion parameter m > 0
    #[arg(long)]
    pub m: Option<f64>,
    /// absorption: dual start sites in {0..N+1}.
    #[arg(long, value_delimiter = ',')]
    pub sites: Option<Vec<Site>>,
    /// absorption: segment length; ring_stationary: ring length.
    #[arg(long)]
    pub n_sites: Option<usize>,
    #[arg(long)]
    pub rho_l: Option<f64>,
    #[arg(long)]
    pub rho_r: Option<f64>,
    /// heat_kernel: time.
    #[arg(long)]
    pub t: Option<f64>,
    /// heat_kernel: largest |x| tabulated.
    #[arg(long)]
    pub reach: Option<Site>,
    /// ring_stationary: number of particles.
    #[arg(long)]
    pub particles: Option<u32>,
}

impl Experiment for Oracle {
    const NAME: &'static str = "oracle";
    const SEEDED: bool = false;

    fn resolve(mut self) -> CliResult<Self> {
        let kind = need(&self.kind, "kind")?;
        need(&self.m, "m")?;
        match kind.as_str() {
            "absorption" => {
                need(&self.sites, "sites")?;
                need(&self.n_sites, "n_sites")?;
                self.rho_l.get_or_insert(0.0);
                self.rho_r.get_or_insert(1.0);
            }
            "heat_kernel" => {
                need(&self.t, "t")?;
                self.reach.get_or_insert(5);
            }
            "ring_stationary" => {
                need(&self.n_sites, "n_sites")?;
                need(&self.particles, "particles")?;
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown oracle `{other}` (absorption, heat_kernel, ring_stationary)"
                )))
            }
        }
        Ok(self)
    }

    fn run(&self, _ctx: &Ctx, echo: Value) -> CliResult<Outcome> {
        let p = sip(self.m.unwrap())?;
        let mut report = Report::new(Self::NAME, None, echo, &["quantity", "index", "value"]);
        let mut summary = Vec::new();
        match self.kind.as_deref().unwrap() {
            "absorption" => {
                let start = LabeledPositions::new(self.sites.clone().unwrap());
                let law = dual_absorption_solve(&start, self.n_sites.unwrap(), p)?;
                for (k, q) in law.probs.iter().enumerate() {
                    report.push(vec!["p_left_count".into(), k.into(), (*q).into()])?;
                }
                let moment = law.moment(self.rho_l.unwrap(), self.rho_r.unwrap());
                report.push(vec!["correlation".into(), Cell::Empty, moment.into()])?;
                summary.push(format!("E Π ρ(X_i(∞)) = {moment:.12}"));
            }
            "heat_kernel" => {
                let t = self.t.unwrap();
                let kernel = WalkKernel::new(p.m() * t)?;
                let reach = self.reach.unwrap();
                for x in -reach..=reach {
                    report.push(vec!["kernel".into(), x.into(), kernel.at(x).into()])?;
                }
                summary.push(format!("e^(-mt) I_0(mt) = {:.15}", kernel.at(0)));
            }
            _ => {
                let (sites, particles) = (self.n_sites.unwrap(), self.particles.unwrap());
                let g = build_generator(Model::SipRing { sites, particles }, p)?;
                let pi = stationary_solve(&g.q)?;
                for k in 0..=particles {
                    let mass: f64 = g
                        .index
                        .iter()
                        .zip(&pi)
                        .filter(|(s, _)| s[0] == k as i64)
                        .map(|(_, w)| w)
                        .sum();
                    report.push(vec!["p_site0".into(), (k as u64).into(), mass.into()])?;
                }
                summary.push(format!("{} states", g.index.len()));
            }
        }
        Ok(Outcome { report, summary })
    }
}

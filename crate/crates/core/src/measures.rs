//! Duality polynomials, duality functions and the negative-binomial
//! product measures that are reversible for the process.
//!
//! With shape `a = m/2`, the single-site marginal with scale `λ ∈ [0, 1)` is
//!
//! ```text
//! ν_λ(n) = (1 - λ)^a · λ^n / n! · Γ(a + n) / Γ(a)
//! ```
//!
//! and the duality polynomial is `d(k, n) = n! / (n - k)! · Γ(a) / Γ(a + k)`
//! for `k <= n` and zero otherwise. They are tied together by
//! `Σ_n d(k, n) ν_λ(n) = (λ / (1 - λ))^k`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::lattice::{OccupationConfig, Site, SiteRange};
use crate::stats::RngStream;

/// Largest admissible scale parameter.
pub const LAMBDA_MAX: f64 = 1.0 - 1e-9;

/// Hard cap on the number of series terms in adaptive truncation.
pub const SERIES_CAP: usize = 100_000;

// Below these sizes the Gamma ratios are evaluated as exact finite products,
// which is both cheaper and more accurate than log-Gamma differences.
const POLY_PRODUCT_MAX: u32 = 64;
const PMF_PRODUCT_MAX: u64 = 1024;

/// Model parameter `m > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SipParams {
    m: f64,
}

impl SipParams {
    pub fn new(m: f64) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidParameter(format!("m must be positive, got {m}")));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `m / 2`: the shape parameter and the per-direction walk rate.
    #[inline]
    pub fn half(&self) -> f64 {
        0.5 * self.m
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=LAMBDA_MAX).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "scale parameter must lie in [0, 1 - 1e-9], got {lambda}"
        )));
    }
    Ok(())
}

/// `d(k, n)`.
pub fn duality_poly(k: u32, n: u32, p: SipParams) -> f64 {
    if k > n {
        return 0.0;
    }
    if k == 0 {
        return 1.0;
    }
    let a = p.half();
    if k <= POLY_PRODUCT_MAX {
        (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (a + j as f64))
    } else {
        let (n, k) = (n as f64, k as f64);
        (ln_gamma(n + 1.0) - ln_gamma(n - k + 1.0) + ln_gamma(a) - ln_gamma(a + k)).exp()
    }
}

/// `𝒟(ξ, η) = Π_x d(ξ_x, η_x)` on a common range.
pub fn duality_fn(xi: &OccupationConfig, eta: &OccupationConfig, p: SipParams) -> Result<f64> {
    if xi.range() != eta.range() {
        return Err(Error::IncompatibleRanges(format!(
            "{:?} vs {:?}",
            xi.range(),
            eta.range()
        )));
    }
    let mut acc = 1.0;
    for (x, k) in xi.nonzero() {
        if !xi.range().contains(x) {
            continue;
        }
        acc *= duality_poly(k, eta.get(x), p);
        if acc == 0.0 {
            break;
        }
    }
    Ok(acc)
}

/// Reservoir rates of the boundary-driven process: injection `α (m/2 + η_1)`,
/// removal `γ η_1` on the left and `σ (m/2 + η_N)`, `β η_N` on the right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma: f64,
}

impl ReservoirParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, sigma: f64) -> Result<Self> {
        let all = [alpha, beta, gamma, sigma];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("reservoir rates must be non-negative".into()));
        }
        if gamma <= alpha || beta <= sigma {
            return Err(Error::InvalidParameter(format!(
                "need gamma > alpha and beta > sigma, got alpha={alpha} beta={beta} gamma={gamma} sigma={sigma}"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            sigma,
        })
    }

    /// Rates for which a lone dual particle is a rate-`m/2` walk absorbed at
    /// both ends: `γ - α = β - σ = m/2`.
    pub fn canonical(rho_l: f64, rho_r: f64, p: SipParams) -> Result<Self> {
        if !(rho_l >= 0.0 && rho_r >= 0.0 && rho_l.is_finite() && rho_r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "reservoir densities must be non-negative, got {rho_l}, {rho_r}"
            )));
        }
        let a = p.half();
        Self::new(rho_l * a, (rho_r + 1.0) * a, (rho_l + 1.0) * a, rho_r * a)
    }

    pub fn rho_l(&self) -> f64 {
        self.alpha / (self.gamma - self.alpha)
    }

    pub fn rho_r(&self) -> f64 {
        self.sigma / (self.beta - self.sigma)
    }

    /// Per-particle absorption rate into the left reservoir site of the dual.
    pub fn left_absorption(&self) -> f64 {
        self.gamma - self.alpha
    }

    pub fn right_absorption(&self) -> f64 {
        self.beta - self.sigma
    }
}

/// Boundary duality function
/// `ρ_L^{ξ_0} · Π_{i=1}^{N} d(ξ_i, η_i) · ρ_R^{ξ_{N+1}}`.
///
/// Both configurations live on the same segment; the virtual-site counts of
/// `eta` are ignored.
pub fn boundary_duality_fn(
    xi: &OccupationConfig,
    eta: &OccupationConfig,
    res: &ReservoirParams,
    p: SipParams,
) -> Result<f64> {
    let r = xi.range();
    if r != eta.range() || r.left_virtual().is_none() {
        return Err(Error::IncompatibleRanges(
            "boundary duality needs two configurations on the same segment".into(),
        ));
    }
    let left = xi.get(r.left_virtual().unwrap());
    let right = xi.get(r.right_virtual().unwrap());
    let mut acc = res.rho_l().powi(left as i32) * res.rho_r().powi(right as i32);
    for x in r.sites() {
        let k = xi.get(x);
        if k > 0 {
            acc *= duality_poly(k, eta.get(x), p);
        }
    }
    Ok(acc)
}

/// The discrete Gamma (negative binomial) law `ν_λ` with shape `m/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBinomial {
    lambda: f64,
    shape: f64,
}

impl NegBinomial {
    pub fn new(lambda: f64, p: SipParams) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            lambda,
            shape: p.half(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Ratio `ν(n + 1) / ν(n)`.
    #[inline]
    fn step(&self, n: u64) -> f64 {
        self.lambda * (self.shape + n as f64) / (n + 1) as f64
    }

    fn mass_at_zero(&self) -> f64 {
        (1.0 - self.lambda).powf(self.shape)
    }

    pub fn pmf(&self, n: u64) -> f64 {
        if self.lambda == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        if n <= PMF_PRODUCT_MAX {
            (0..n).fold(self.mass_at_zero(), |acc, j| acc * self.step(j))
        } else {
            let (a, l, nf) = (self.shape, self.lambda, n as f64);
            (a * (1.0 - l).ln() + nf * l.ln() - ln_gamma(nf + 1.0) + ln_gamma(a + nf) - ln_gamma(a)).exp()
        }
    }

    /// `ν(0), ν(1), …` by the two-term recurrence.
    pub fn pmf_iter(&self) -> impl Iterator<Item = f64> + '_ {
        let mut next = self.mass_at_zero();
        let mut n = 0u64;
        std::iter::from_fn(move || {
            let cur = next;
            next *= self.step(n);
            n += 1;
            Some(cur)
        })
    }

    /// `(m/2) λ / (1 - λ)`.
    pub fn mean(&self) -> f64 {
        self.shape * self.lambda / (1.0 - self.lambda)
    }

    /// `(m/2) λ / (1 - λ)^2`.
    pub fn variance(&self) -> f64 {
        self.shape * self.lambda / (1.0 - self.lambda).powi(2)
    }

    /// Exact inverse-CDF draw from one uniform.
    pub fn sample(&self, rng: &mut RngStream) -> u64 {
        if self.lambda == 0.0 {
            return 0;
        }
        let u = rng.uniform();
        let mut mass = self.mass_at_zero();
        let mut cdf = mass;
        let mut n = 0u64;
        while cdf <= u {
            mass *= self.step(n);
            n += 1;
            cdf += mass;
            // Rounding can leave cdf a hair below u when u is within an ulp of
            // one; the remaining mass is then below f64 resolution.
            if mass < f64::MIN_POSITIVE * 1e10 && n as f64 > self.mean() {
                break;
            }
        }
        n
    }
}

/// `ν_λ(n)`.
pub fn negbin_pmf(lambda: f64, p: SipParams, n: u64) -> Result<f64> {
    Ok(NegBinomial::new(lambda, p)?.pmf(n))
}

/// One exact draw from `ν_λ`.
pub fn negbin_sample(lambda: f64, p: SipParams, rng: &mut RngStream) -> Result<u64> {
    Ok(NegBinomial::new(lambda, p)?.sample(rng))
}

/// Density `ρ = (m/2) λ / (1 - λ)` of the scale parameter `λ`.
pub fn density_of_lambda(lambda: f64, p: SipParams) -> f64 {
    p.half() * lambda / (1.0 - lambda)
}

/// Inverse of [`density_of_lambda`]: `λ = ρ / (ρ + m/2)`.
pub fn lambda_of_density(rho: f64, p: SipParams) -> f64 {
    rho / (rho + p.half())
}

/// Truncated series with a rigorous bound on what was left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    pub tail_bound: f64,
}

/// `Σ_n d(k, n) ν_λ(n)`, truncated once the geometric tail bound drops
/// below `tol / 4`.
///
/// The term ratio `λ (m/2 + n) / (n + 1 - k)` is monotone in `n` with limit
/// `λ`, so after term `t_n` the remainder is at most `t_n ρ / (1 - ρ)` with
/// `ρ = max(ratio_n, λ)` once `ρ < 1`.
pub fn moment_identity_lhs(k: u32, lambda: f64, p: SipParams, tol: f64) -> Result<SeriesValue> {
    let nb = NegBinomial::new(lambda, p)?;
    if lambda == 0.0 {
        let v = if k == 0 { 1.0 } else { 0.0 };
        return Ok(SeriesValue {
            value: v,
            terms: 1,
            tail_bound: 0.0,
        });
    }
    let a = p.half();
    let mut value = 0.0;
    for (n, mass) in nb.pmf_iter().enumerate() {
        if n > SERIES_CAP {
            return Err(Error::NonConvergence { cap: SERIES_CAP });
        }
        let n32 = n as u32;
        if n32 < k {
            continue;
        }
        let term = duality_poly(k, n32, p) * mass;
        value += term;
        let ratio = lambda * (a + n as f64) / (n as f64 + 1.0 - k as f64);
        let rho = ratio.max(lambda);
        if rho < 1.0 {
            let tail = term * rho / (1.0 - rho);
            if tail <= 0.25 * tol {
                return Ok(SeriesValue {
                    value,
                    terms: n + 1,
                    tail_bound: tail,
                });
            }
        }
    }
    unreachable!("pmf_iter is infinite")
}

/// Relative residual of the single-bond detailed balance relation
/// `ν(n) ν(k) n (m/2 + k) = ν(n-1) ν(k+1) (k+1) (m/2 + n - 1)` for `n >= 1`.
pub fn detailed_balance_residual(lambda: f64, p: SipParams, n: u64, k: u64) -> Result<f64> {
    assert!(n >= 1);
    let nb = NegBinomial::new(lambda, p)?;
    let a = p.half();
    let lhs = nb.pmf(n) * nb.pmf(k) * n as f64 * (a + k as f64);
    let rhs = nb.pmf(n - 1) * nb.pmf(k + 1) * (k + 1) as f64 * (a + n as f64 - 1.0);
    let scale = lhs.abs().max(rhs.abs());
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
}

/// Site-dependent scale parameter `λ(x)`: a table on `offset..offset+len`
/// and constants beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleProfile {
    offset: Site,
    values: Vec<f64>,
    left: f64,
    right: f64,
}

impl ScaleProfile {
    pub fn constant(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            offset: 0,
            values: Vec::new(),
            left: lambda,
            right: lambda,
        })
    }

    /// Table on `lo..=hi` from `f`, extended by `left` / `right`.
    pub fn tabulate(lo: Site, hi: Site, left: f64, right: f64, f: impl Fn(Site) -> f64) -> Result<Self> {
        let values: Vec<f64> = (lo..=hi).map(f).collect();
        Self::from_values(lo, values, left, right)
    }

    pub fn from_values(offset: Site, values: Vec<f64>, left: f64, right: f64) -> Result<Self> {
        for &v in values.iter().chain([&left, &right]) {
            check_lambda(v)?;
        }
        Ok(Self {
            offset,
            values,
            left,
            right,
        })
    }

    #[inline]
    pub fn at(&self, x: Site) -> f64 {
        let i = x - self.offset;
        if i < 0 {
            self.left
        } else if (i as usize) < self.values.len() {
            self.values[i as usize]
        } else {
            self.right
        }
    }

    /// `λ(x) / (1 - λ(x))`, the one-particle duality moment at `x`.
    #[inline]
    pub fn odds(&self, x: Site) -> f64 {
        let l = self.at(x);
        l / (1.0 - l)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(self.left.max(self.right), f64::max)
    }

    /// `(first, last)` site of the explicit table.
    pub fn table_bounds(&self) -> (Site, Site) {
        (self.offset, self.offset + self.values.len() as Site - 1)
    }
}

/// `Π_i λ(x_i) / (1 - λ(x_i))`: the product-measure moment of
/// `𝒟(Σ δ_{x_i}, ·)`.
pub fn product_moment(profile: &ScaleProfile, xs: &[Site]) -> f64 {
    xs.iter().map(|&x| profile.odds(x)).product()
}

/// Draw a configuration on `range` from the product measure `ν_λ`. Virtual
/// sites of a segment stay empty.
pub fn sample_product(
    profile: &ScaleProfile,
    range: &SiteRange,
    p: SipParams,
    rng: &mut RngStream,
) -> Result<OccupationConfig> {
    let mut c = OccupationConfig::zeros(*range);
    for x in range.sites() {
        let k = NegBinomial::new(profile.at(x), p)?.sample(rng);
        c.set(x, k as u32)?;
    }
    Ok(c)
}

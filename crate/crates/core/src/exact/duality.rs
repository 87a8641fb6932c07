use super::space::{capped_vectors, occupation_vectors_upto};
use crate::error::{Error, Result};
use crate::lattice::{BoundaryKind, OccupationConfig, Site, SiteRange};
use crate::measures::{boundary_duality_fn, duality_fn, ReservoirParams, SipParams};

/// `(L f)(η)` for the inclusion process on the bulk bonds of `eta`'s range.
pub fn sip_generator_apply(
    eta: &OccupationConfig,
    p: SipParams,
    f: impl Fn(&OccupationConfig) -> Result<f64>,
) -> Result<f64> {
    let r = *eta.range();
    let f0 = f(eta)?;
    let mut acc = 0.0;
    let mut next = eta.clone();
    for (i, j) in r.bonds() {
        let ni = eta.get(i);
        if ni == 0 {
            continue;
        }
        let rate = ni as f64 * (p.half() + eta.get(j) as f64);
        next.move_particle(i, j)?;
        acc += rate * (f(&next)? - f0);
        next.move_particle(j, i)?;
    }
    Ok(acc)
}

/// `(L f)(η)` for the boundary-driven process on a segment.
pub fn boundary_generator_apply(
    eta: &OccupationConfig,
    res: &ReservoirParams,
    p: SipParams,
    f: impl Fn(&OccupationConfig) -> Result<f64>,
) -> Result<f64> {
    let r = *eta.range();
    let mut acc = sip_generator_apply(eta, p, &f)?;
    let f0 = f(eta)?;
    let mut next = eta.clone();
    for (x, birth, death) in [(r.lo(), res.alpha, res.gamma), (r.hi(), res.sigma, res.beta)] {
        let n = eta.get(x);
        next.set(x, n + 1)?;
        acc += birth * (p.half() + n as f64) * (f(&next)? - f0);
        if n > 0 {
            next.set(x, n - 1)?;
            acc += death * n as f64 * (f(&next)? - f0);
        }
        next.set(x, n)?;
    }
    Ok(acc)
}

/// `(L f)(ξ)` for the absorbing dual: bulk inclusion moves plus absorption
/// from the end sites at rates `(γ−α) ξ_1` and `(β−σ) ξ_N`.
pub fn dual_generator_apply(
    xi: &OccupationConfig,
    res: &ReservoirParams,
    p: SipParams,
    f: impl Fn(&OccupationConfig) -> Result<f64>,
) -> Result<f64> {
    let r = *xi.range();
    let mut acc = sip_generator_apply(xi, p, &f)?;
    let f0 = f(xi)?;
    let mut next = xi.clone();
    let ends = [
        (r.lo(), r.lo() - 1, res.left_absorption()),
        (r.hi(), r.hi() + 1, res.right_absorption()),
    ];
    for (x, v, rate) in ends {
        let n = xi.get(x);
        if n > 0 {
            next.move_particle(x, v)?;
            acc += rate * n as f64 * (f(&next)? - f0);
            next.move_particle(v, x)?;
        }
    }
    Ok(acc)
}

/// `|L_η 𝒟(ξ, ·)(η) − L_ξ 𝒟(·, η)(ξ)|` on a ring or closed segment.
pub fn intertwining_check(xi: &OccupationConfig, eta: &OccupationConfig, p: SipParams) -> Result<f64> {
    if xi.range() != eta.range() {
        return Err(Error::IncompatibleRanges("ξ and η must share a range".into()));
    }
    let on_eta = sip_generator_apply(eta, p, |e| duality_fn(xi, e, p))?;
    let on_xi = sip_generator_apply(xi, p, |x| duality_fn(x, eta, p))?;
    Ok((on_eta - on_xi).abs())
}

/// Residual of the boundary duality: reservoir generator acting on η against
/// the absorbing dual acting on ξ.
pub fn boundary_intertwining_check(
    xi: &OccupationConfig,
    eta: &OccupationConfig,
    res: &ReservoirParams,
    p: SipParams,
) -> Result<f64> {
    if xi.range() != eta.range() || xi.range().kind() != BoundaryKind::Segment {
        return Err(Error::IncompatibleRanges("ξ and η must share a segment".into()));
    }
    let on_eta = boundary_generator_apply(eta, res, p, |e| boundary_duality_fn(xi, e, res, p))?;
    let on_xi = dual_generator_apply(xi, res, p, |x| boundary_duality_fn(x, eta, res, p))?;
    Ok((on_eta - on_xi).abs())
}

fn config(range: SiteRange, start: Site, v: &[i64]) -> Result<OccupationConfig> {
    let pairs: Vec<(Site, u32)> = v
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(i, &k)| (start + i as Site, k as u32))
        .collect();
    OccupationConfig::from_pairs(range, &pairs)
}

/// Largest intertwining residual over all ξ with `|ξ| ≤ max_dual` and all η
/// with `η_i ≤ cap` on a ring of `sites` sites. Also returns the number of
/// pairs checked.
pub fn max_intertwining_residual(sites: usize, max_dual: u32, cap: u32, p: SipParams) -> Result<(f64, usize)> {
    let r = SiteRange::ring(sites)?;
    let xis = occupation_vectors_upto(sites, max_dual)?;
    let etas = capped_vectors(sites, cap)?;
    let etas: Vec<OccupationConfig> = etas.iter().map(|v| config(r, 0, v)).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    let mut count = 0;
    for x in &xis {
        let xi = config(r, 0, x)?;
        for eta in &etas {
            worst = worst.max(intertwining_check(&xi, eta, p)?);
            count += 1;
        }
    }
    Ok((worst, count))
}

/// Largest boundary-duality residual over all ξ on `{0..N+1}` with
/// `|ξ| ≤ max_dual` and all η on `{1..N}` with `η_i ≤ cap`.
pub fn max_boundary_residual(
    n: usize,
    max_dual: u32,
    cap: u32,
    res: &ReservoirParams,
    p: SipParams,
) -> Result<(f64, usize)> {
    let r = SiteRange::segment(n)?;
    let xis = occupation_vectors_upto(n + 2, max_dual)?;
    let etas = capped_vectors(n, cap)?;
    let etas: Vec<OccupationConfig> = etas.iter().map(|v| config(r, 1, v)).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    let mut count = 0;
    for x in &xis {
        let xi = config(r, 0, x)?;
        for eta in &etas {
            worst = worst.max(boundary_intertwining_check(&xi, eta, res, p)?);
            count += 1;
        }
    }
    Ok((worst, count))
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running mean and variance of one observable over replicas.
///
/// Samples are folded in with the pairwise (Chan et al.) update, so merging
/// two estimates gives the pooled estimate regardless of how the replicas
/// were split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub observable: String,
    count: u64,
    mean: f64,
    m2: f64,
}

impl Estimate {
    pub fn new(observable: impl Into<String>) -> Self {
        Self {
            observable: observable.into(),
            count: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    pub fn from_samples(observable: impl Into<String>, xs: impl IntoIterator<Item = f64>) -> Self {
        let mut e = Self::new(observable);
        for x in xs {
            e.push(x);
        }
        e
    }

    pub fn push(&mut self, x: f64) {
        self.absorb(1, x, 0.0);
    }

    fn absorb(&mut self, nb: u64, mb: f64, m2b: f64) {
        if nb == 0 {
            return;
        }
        if self.count == 0 {
            self.count = nb;
            self.mean = mb;
            self.m2 = m2b;
            return;
        }
        let na = self.count as f64;
        let n = (self.count + nb) as f64;
        let delta = mb - self.mean;
        self.mean += delta * (nb as f64 / n);
        self.m2 += m2b + delta * delta * (na * nb as f64 / n);
        self.count += nb;
    }

    /// Pool `other` into `self`. Empty estimates merge with anything.
    pub fn merge(&mut self, other: &Estimate) -> Result<()> {
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            if self.observable.is_empty() {
                self.observable.clone_from(&other.observable);
            }
        } else if !other.observable.is_empty() && !self.observable.is_empty() && other.observable != self.observable {
            return Err(Error::MismatchedObservables(
                self.observable.clone(),
                other.observable.clone(),
            ));
        }
        self.absorb(other.count, other.mean, other.m2);
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (zero below two samples).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.count as f64).sqrt()
    }

    /// `|mean - target| <= k * SE`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error()
    }
}

/// Pooled estimate of `a` and `b`.
pub fn merge_estimates(a: &Estimate, b: &Estimate) -> Result<Estimate> {
    let mut out = a.clone();
    out.merge(b)?;
    Ok(out)
}

/// `(a - b, SE)` for independent estimates.
pub fn difference(a: &Estimate, b: &Estimate) -> (f64, f64) {
    (
        a.mean() - b.mean(),
        (a.std_error().powi(2) + b.std_error().powi(2)).sqrt(),
    )
}

/// `(a / b, SE)` by the delta method, for independent estimates.
pub fn ratio(a: &Estimate, b: &Estimate) -> (f64, f64) {
    let r = a.mean() / b.mean();
    let rel = ((a.std_error() / a.mean()).powi(2) + (b.std_error() / b.mean()).powi(2)).sqrt();
    (r, r.abs() * rel)
}

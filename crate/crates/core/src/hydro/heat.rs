use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::measures::SipParams;

/// Kernel entries below this are dropped from the tails.
pub const KERNEL_TAIL: f64 = 1e-13;

/// `K(k) = e^{-x} I_k(x)` for `|k| ≤ K`: the law of the displacement of a
/// continuous-time walk with total jump rate `x / t` run for time `t`
/// (rate m/2 per direction gives `x = m t`).
///
/// Computed by Miller's backward recurrence `I_{k-1} = (2k/x) I_k + I_{k+1}`
/// normalised with `I_0 + 2 Σ_{k≥1} I_k = e^x`, which is stable for every
/// `x` and never forms `e^x`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkKernel {
    /// `weights[k]` for `k = 0..=K`; the kernel is symmetric.
    weights: Vec<f64>,
}

impl WalkKernel {
    pub fn new(x: f64) -> Result<Self> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kernel argument must be finite and ≥ 0, got {x}"
            )));
        }
        if x == 0.0 {
            return Ok(Self { weights: vec![1.0] });
        }
        let reach = (x + 12.0 * x.sqrt() + 40.0).ceil() as usize;
        let start = reach + 32;
        let mut raw = vec![0.0; start + 2];
        raw[start] = 1e-300;
        for k in (1..=start).rev() {
            raw[k - 1] = (2.0 * k as f64 / x) * raw[k] + raw[k + 1];
            if raw[k - 1] > 1e250 {
                for v in raw.iter_mut() {
                    *v *= 1e-250;
                }
            }
        }
        let norm = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
        let mut weights: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        while weights.len() > 1 && *weights.last().unwrap() < KERNEL_TAIL {
            weights.pop();
        }
        Ok(Self { weights })
    }

    /// Largest displacement kept.
    pub fn reach(&self) -> usize {
        self.weights.len() - 1
    }

    #[inline]
    pub fn at(&self, k: i64) -> f64 {
        self.weights.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }
}

/// Real function on ℤ: a table on `offset..offset+len` and constants
/// `left` / `right` beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeField {
    pub offset: Site,
    pub values: Vec<f64>,
    pub left: f64,
    pub right: f64,
}

impl LatticeField {
    pub fn tabulate(lo: Site, hi: Site, left: f64, right: f64, f: impl Fn(Site) -> f64) -> Self {
        Self {
            offset: lo,
            values: (lo..=hi).map(f).collect(),
            left,
            right,
        }
    }

    /// Finitely supported field.
    pub fn compact(offset: Site, values: Vec<f64>) -> Self {
        Self {
            offset,
            values,
            left: 0.0,
            right: 0.0,
        }
    }

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

    pub fn hi(&self) -> Site {
        self.offset + self.values.len() as Site - 1
    }

    /// Sum of the table entries.
    pub fn table_sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Solution at time `t` of `∂ψ/∂t = (m/2) (ψ(x+1) + ψ(x−1) − 2ψ(x))`,
/// i.e. `ψ(t, x) = Σ_y e^{-mt} I_{x−y}(mt) ψ0(y)`.
///
/// The result is tabulated on the input table widened by the kernel reach,
/// with the same constants outside.
pub fn heat_solve_discrete(psi0: &LatticeField, p: SipParams, t: f64) -> Result<LatticeField> {
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("negative time {t}")));
    }
    let kernel = WalkKernel::new(p.m() * t)?;
    let r = kernel.reach() as Site;
    let lo = psi0.offset;
    let hi = psi0.hi();
    // cumulative kernel mass: below[j] = P(D ≤ j − r − 1), j = 0..=2r+1
    let mut below = vec![0.0; 2 * r as usize + 2];
    for j in 1..below.len() {
        below[j] = below[j - 1] + kernel.at(j as i64 - r - 1);
    }
    let total = below[below.len() - 1];
    let mass_below = |d: Site| -> f64 {
        // P(D < d)
        if d <= -r {
            0.0
        } else if d > r {
            total
        } else {
            below[(d + r) as usize]
        }
    };
    let out = LatticeField::tabulate(lo - r, hi + r, psi0.left, psi0.right, |x| {
        let mut acc = 0.0;
        for y in (x - r).max(lo)..=(x + r).min(hi) {
            acc += kernel.at(x - y) * psi0.at(y);
        }
        // walker ends left of the table: y < lo  ⇔  D = x − y > x − lo
        let left_mass = total - mass_below(x - lo + 1);
        let right_mass = mass_below(x - hi);
        acc + psi0.left * left_mass + psi0.right * right_mass
    });
    Ok(out)
}

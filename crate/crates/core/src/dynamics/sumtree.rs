/// Complete binary tree of partial sums over non-negative channel rates.
///
/// Internal nodes are recomputed from their children on every update, so
/// the total never drifts away from the sum of the leaves.
#[derive(Debug, Clone)]
pub struct RateTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl RateTree {
    pub fn new(n: usize) -> Self {
        let leaves = n.max(1).next_power_of_two();
        Self {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    pub fn from_rates(rates: &[f64]) -> Self {
        let mut t = Self::new(rates.len());
        t.nodes[t.leaves..t.leaves + rates.len()].copy_from_slice(rates);
        for i in (1..t.leaves).rev() {
            t.nodes[i] = t.nodes[2 * i] + t.nodes[2 * i + 1];
        }
        t
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, rate: f64) {
        debug_assert!(rate >= 0.0);
        let mut k = self.leaves + i;
        if self.nodes[k] == rate {
            return;
        }
        self.nodes[k] = rate;
        while k > 1 {
            k >>= 1;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leftmost channel whose cumulative rate exceeds `target`, never a
    /// zero-rate channel.
    #[inline]
    pub fn find(&self, mut target: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            let right = self.nodes[2 * k + 1];
            if left > 0.0 && (target < left || right <= 0.0) {
                k *= 2;
            } else {
                target -= left;
                k = 2 * k + 1;
            }
        }
        k - self.leaves
    }
}

use rayon::prelude::*;

use super::{Estimate, RngStream};
use crate::error::Result;

/// How many independent replicas to run, from which master stream, on how
/// many threads.
///
/// Replica `i` always receives `master.split(i)` and results are reduced in
/// index order, so the outcome does not depend on `threads`.
#[derive(Debug, Clone)]
pub struct Replicas {
    pub master: RngStream,
    pub count: u64,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
}

impl Replicas {
    pub fn new(seed: u64, count: u64) -> Self {
        Self {
            master: RngStream::new(seed),
            count,
            threads: 0,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    /// Same count and threads, different master stream.
    pub fn substream(&self, index: u64) -> Self {
        Self {
            master: self.master.split(index),
            count: self.count,
            threads: self.threads,
        }
    }

    pub fn with_count(&self, count: u64) -> Self {
        Self {
            master: self.master.clone(),
            count,
            threads: self.threads,
        }
    }
}

/// Run `f(i, stream_i)` for every replica and return results in index order.
pub fn run_replicas<T, F>(plan: &Replicas, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut RngStream) -> Result<T> + Sync,
{
    let work = || {
        (0..plan.count)
            .into_par_iter()
            .map(|i| {
                let mut s = plan.master.split(i);
                f(i, &mut s)
            })
            .collect::<Result<Vec<T>>>()
    };
    if plan.threads == 0 {
        work()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.threads)
            .build()
            .expect("thread pool");
        pool.install(work)
    }
}

/// Mean and SE of a scalar replica observable.
pub fn estimate_replicas<F>(name: &str, plan: &Replicas, f: F) -> Result<Estimate>
where
    F: Fn(u64, &mut RngStream) -> Result<f64> + Sync,
{
    let xs = run_replicas(plan, f)?;
    Ok(Estimate::from_samples(name, xs))
}

/// Mean and SE of several observables measured on the same replicas.
pub fn estimate_replicas_multi<F>(names: &[&str], plan: &Replicas, f: F) -> Result<Vec<Estimate>>
where
    F: Fn(u64, &mut RngStream) -> Result<Vec<f64>> + Sync,
{
    let rows = run_replicas(plan, f)?;
    let mut out: Vec<Estimate> = names.iter().map(|n| Estimate::new(*n)).collect();
    for row in rows {
        debug_assert_eq!(row.len(), out.len());
        for (e, x) in out.iter_mut().zip(row) {
            e.push(x);
        }
    }
    Ok(out)
}

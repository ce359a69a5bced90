//! Monte Carlo bookkeeping: ordered parallel maps and compensated sums.
//!
//! Per-path results are always collected in path order and reduced
//! sequentially, so estimates do not depend on the number of threads.

use rayon::prelude::*;

use crate::error::Result;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Self { mean, se: 0.0 }
    }
}

/// Neumaier-compensated sum.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean and standard error (unbiased variance) of a sample.
pub fn mean_se(values: &[f64]) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, se: f64::NAN };
    }
    let mean = neumaier_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return Estimate { mean, se: 0.0 };
    }
    let ss = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    Estimate {
        mean,
        se: (ss / ((n - 1) as f64 * n as f64)).sqrt(),
    }
}

/// Runs `f` for every path index in `0..n_paths` (in parallel) and returns
/// the results in index order. The error of the lowest failing path wins.
pub fn map_paths<T, F>(n_paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = (0..n_paths as u64).into_par_iter().map(&f).collect();
    let mut out = Vec::with_capacity(n_paths);
    for (i, r) in results.into_iter().enumerate() {
        out.push(r.map_err(|e| e.at_path(i))?);
    }
    Ok(out)
}

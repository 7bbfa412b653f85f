//! Replicate execution and order-independent aggregation.
//!
//! `replicate_map` evaluates one closure per replicate index and collects
//! the results in index order. With the `parallel` feature the evaluation
//! is distributed over a rayon pool; the collected vector is identical to
//! the sequential one because each replicate owns its substream and the
//! output slot is addressed by index. All downstream reductions run
//! sequentially over that ordered vector with compensated summation, so
//! worker count can never change an output bit.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluate `f(0..reps)` into an index-ordered vector.
#[cfg(feature = "parallel")]
pub fn replicate_map<T, F>(reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..reps).into_par_iter().map(f).collect()
}

/// Evaluate `f(0..reps)` into an index-ordered vector.
#[cfg(not(feature = "parallel"))]
pub fn replicate_map<T, F>(reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    replicate_map_seq(reps, f)
}

/// Sequential reference path; always available for cross-checking and
/// benchmarks.
pub fn replicate_map_seq<T, F>(reps: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..reps).map(f).collect()
}

/// Run `f` inside a dedicated pool of `workers` threads. `None` uses the
/// ambient (global) pool. Without the `parallel` feature the worker count
/// is ignored.
#[cfg(feature = "parallel")]
pub fn with_pool<R, F>(workers: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match workers {
        None => f(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("failed to build worker pool")
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_pool<R, F>(_workers: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    f()
}

/// Neumaier compensated sum over a fixed iteration order.
pub fn comp_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn comp_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    comp_sum(xs.iter().copied()) / xs.len() as f64
}

/// Mean and its standard error (sample standard deviation / sqrt(len)).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 2 {
        return (comp_mean(xs), f64::NAN);
    }
    let mean = comp_mean(xs);
    let ss = comp_sum(xs.iter().map(|x| {
        let d = x - mean;
        d * d
    }));
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Slope, intercept and the slope's standard error of an ordinary
/// least-squares line through `(x, y)` pairs.
pub fn ols_slope(points: &[(f64, f64)]) -> OlsFit {
    let n = points.len() as f64;
    let mx = comp_sum(points.iter().map(|p| p.0)) / n;
    let my = comp_sum(points.iter().map(|p| p.1)) / n;
    let sxx = comp_sum(points.iter().map(|p| (p.0 - mx) * (p.0 - mx)));
    let sxy = comp_sum(points.iter().map(|p| (p.0 - mx) * (p.1 - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (points.len() as isize - 2).max(1) as f64;
    let sse = comp_sum(points.iter().map(|p| {
        let r = p.1 - (intercept + slope * p.0);
        r * r
    }));
    let slope_se = (sse / dof / sxx).sqrt();
    OlsFit {
        slope,
        intercept,
        slope_se,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

/// Slope standard error propagated from known per-point measurement
/// errors: se^2 = sum_i w_i^2 se_i^2 with w_i = (x_i - mean x) / Sxx.
/// With few grid points this is far better calibrated than the
/// residual-based estimate (which has almost no degrees of freedom).
pub fn slope_se_from_point_ses(xs: &[f64], point_ses: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = comp_sum(xs.iter().copied()) / n;
    let sxx = comp_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let var = comp_sum(
        xs.iter()
            .zip(point_ses)
            .map(|(x, se)| ((x - mx) / sxx) * ((x - mx) / sxx) * se * se),
    );
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let key = StreamKey::new(123, 456);
        let f = |i: u64| {
            let mut s = key.stream(i);
            let mut acc = 0.0;
            for _ in 0..50 {
                acc += s.standard_normal();
            }
            acc
        };
        let par = replicate_map(1000, f);
        let seq = replicate_map_seq(1000, f);
        assert_eq!(par, seq);
    }

    #[test]
    fn pool_size_does_not_change_results() {
        let key = StreamKey::new(7, 0);
        let run = || {
            let v = replicate_map(500, |i| key.stream(i).standard_normal());
            comp_sum(v.iter().copied())
        };
        let one = with_pool(Some(1), run);
        let four = with_pool(Some(4), run);
        assert_eq!(one.to_bits(), four.to_bits());
    }

    #[test]
    fn compensated_sum_handles_cancellation() {
        let xs = [1e16, 1.0, -1e16];
        assert_eq!(comp_sum(xs.iter().copied()), 1.0);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 + 2.0 * i as f64)).collect();
        let fit = ols_slope(&pts);
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!(fit.slope_se < 1e-12);
    }
}

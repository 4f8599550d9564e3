//! Normalised sum-rate evaluation and the comparison studies built on it.

use serde::{Deserialize, Serialize};

use crate::channel::SystemParams;
use crate::error::{Error, Result};
use crate::gnn::{gnn_forward, threshold_schedule, GnnModel};
use crate::rate::{sum_rate, Schedule};
use crate::train::{train, Example, RegimeKind, TrainingRegime};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub k_test: usize,
    pub achieved: Vec<f64>,
    pub optimal: Vec<f64>,
    /// Sum-rate with every link on, for context.
    pub all_on: Vec<f64>,
    /// `sum(achieved) / sum(optimal)`: the headline metric.
    pub ratio_of_sums: f64,
    pub mean_of_ratios: f64,
    pub all_on_ratio: f64,
}

/// Thresholded model schedules against the exhaustive-search optimum.
pub fn evaluate(model: &GnnModel, test_set: &[Example], sys: &SystemParams) -> Result<EvalReport> {
    if test_set.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty test set".into()));
    }
    let n = test_set.len();
    let mut achieved = Vec::with_capacity(n);
    let mut optimal = Vec::with_capacity(n);
    let mut all_on = Vec::with_capacity(n);
    for (i, ex) in test_set.iter().enumerate() {
        let label = ex
            .label
            .as_ref()
            .ok_or_else(|| Error::Data(format!("test sample {i} has no optimal sum-rate")))?;
        if !(label.sum_rate > 0.0) {
            return Err(Error::Data(format!(
                "test sample {i} has non-positive optimal sum-rate {}",
                label.sum_rate
            )));
        }
        let trace = gnn_forward(&ex.graph, model)?;
        let schedule = threshold_schedule(&trace.psi);
        achieved.push(sum_rate(&ex.channel, &schedule, sys)?);
        optimal.push(label.sum_rate);
        all_on.push(sum_rate(&ex.channel, &Schedule::all_on(ex.k()), sys)?);
    }
    let total_opt: f64 = optimal.iter().sum();
    let ratio_of_sums = achieved.iter().sum::<f64>() / total_opt;
    let mean_of_ratios = achieved.iter().zip(&optimal).map(|(a, o)| a / o).sum::<f64>() / n as f64;
    let all_on_ratio = all_on.iter().sum::<f64>() / total_opt;
    Ok(EvalReport {
        k_test: test_set[0].k(),
        achieved,
        optimal,
        all_on,
        ratio_of_sums,
        mean_of_ratios,
        all_on_ratio,
    })
}

/// First 1-based epoch whose metric strictly exceeds `threshold`.
pub fn convergence_epoch(metrics: &[f64], threshold: f64) -> Option<usize> {
    metrics.iter().position(|&m| m > threshold).map(|i| i + 1)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k_train: usize,
    pub k_test: usize,
    pub n_train: usize,
    pub regime: RegimeKind,
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl SweepRow {
    fn new(k_train: usize, k_test: usize, n_train: usize, regime: RegimeKind, per_seed: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&per_seed);
        SweepRow {
            k_train,
            k_test,
            n_train,
            regime,
            per_seed,
            mean,
            std,
        }
    }
}

/// Trains on nested prefixes of `train_set` and reports the best test metric
/// for each size, over all seeds.
pub fn sample_complexity_sweep(
    regime: &TrainingRegime,
    sizes: &[usize],
    train_set: &[Example],
    test_set: &[Example],
    seeds: &[u64],
    sys: &SystemParams,
) -> Result<Vec<SweepRow>> {
    if let Some(&n) = sizes.iter().find(|&&n| n > train_set.len() || n == 0) {
        return Err(Error::Data(format!(
            "sample size {n} is outside 1..={}",
            train_set.len()
        )));
    }
    let k = train_set[0].k();
    sizes
        .iter()
        .map(|&n| {
            let per_seed = seeds
                .iter()
                .map(|&s| Ok(train(&train_set[..n], test_set, regime, sys, s)?.best_metric))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRow::new(k, test_set[0].k(), n, regime.kind, per_seed))
        })
        .collect()
}

/// Evaluates per-seed models trained at one size on test sets of other sizes.
pub fn generalization_sweep(
    models: &[GnnModel],
    k_train: usize,
    n_train: usize,
    regime: RegimeKind,
    test_sets: &[&[Example]],
    sys: &SystemParams,
) -> Result<Vec<SweepRow>> {
    test_sets
        .iter()
        .map(|set| {
            let per_seed = models
                .iter()
                .map(|m| Ok(evaluate(m, set, sys)?.ratio_of_sums))
                .collect::<Result<Vec<_>>>()?;
            let k_test = set.first().map(|e| e.k()).unwrap_or(0);
            Ok(SweepRow::new(k_train, k_test, n_train, regime, per_seed))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelRealization;
    use crate::gnn::init_model;
    use crate::rate::exhaustive_search;
    use crate::seed;
    use ndarray::Array2;

    #[test]
    fn convergence_epoch_semantics() {
        assert_eq!(convergence_epoch(&[0.5, 0.81, 0.7], 0.8), Some(2));
        assert_eq!(convergence_epoch(&[0.5, 0.6, 0.79], 0.8), None);
        assert_eq!(convergence_epoch(&[0.8], 0.8), None);
        assert_eq!(convergence_epoch(&[], 0.8), None);
    }

    fn diagonal_set(n: usize) -> Vec<Example> {
        let sys = SystemParams::default();
        (0..n)
            .map(|i| {
                let g = Array2::from_shape_fn((4, 4), |(a, b)| {
                    if a == b {
                        1e-8 * (1.0 + (i + a) as f64)
                    } else {
                        1e-30
                    }
                });
                let c = ChannelRealization::from_gains(g).unwrap();
                let l = exhaustive_search(&c, &sys, 20).unwrap().label;
                Example::new(c, Some(l), &sys).unwrap()
            })
            .collect()
    }

    #[test]
    fn always_on_model_is_optimal_without_interference() {
        let sys = SystemParams::default();
        let mut m = init_model(&[1, 4], 0.01, &mut seed::rng(0)).unwrap();
        m.head_w.fill(0.0);
        m.head_b = 0.0;
        let r = evaluate(&m, &diagonal_set(5), &sys).unwrap();
        assert_eq!(r.ratio_of_sums, 1.0);
        assert_eq!(r.mean_of_ratios, 1.0);
        assert_eq!(r.all_on_ratio, 1.0);
    }

    #[test]
    fn empty_or_unlabeled_test_set_is_rejected() {
        let sys = SystemParams::default();
        let m = init_model(&[1, 4], 0.01, &mut seed::rng(0)).unwrap();
        assert!(evaluate(&m, &[], &sys).is_err());
        let mut set = diagonal_set(1);
        set[0].label = None;
        assert!(evaluate(&m, &set, &sys).is_err());
    }

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}

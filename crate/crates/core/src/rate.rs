//! Link rates under treating-interference-as-noise, and the exhaustive
//! search that labels samples with their optimal binary schedule.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, GeometryParams, PathLossParams, SystemParams};
use crate::error::{Error, Result};
use crate::graph::build_graph;
use crate::seed;

/// Normalised transmit powers, one per link.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    gamma: Vec<f64>,
    binary: bool,
}

impl Schedule {
    pub fn binary(bits: &[bool]) -> Self {
        Schedule {
            gamma: bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            binary: true,
        }
    }

    /// Binary schedule whose big-endian reading (link 0 most significant)
    /// is `index`.
    pub fn from_index(index: u64, k: usize) -> Self {
        let bits: Vec<bool> = (0..k).map(|i| (index >> (k - 1 - i)) & 1 == 1).collect();
        Schedule::binary(&bits)
    }

    pub fn relaxed(gamma: Vec<f64>) -> Result<Self> {
        if let Some(g) = gamma.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::Domain(format!("power level {g} outside [0, 1]")));
        }
        Ok(Schedule {
            gamma,
            binary: false,
        })
    }

    pub fn all_on(k: usize) -> Self {
        Schedule::binary(&vec![true; k])
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// Big-endian integer reading; only meaningful for binary schedules.
    pub fn index(&self) -> u64 {
        self.gamma
            .iter()
            .fold(0u64, |acc, &g| (acc << 1) | u64::from(g >= 0.5))
    }

    pub fn bits(&self) -> Vec<u8> {
        self.gamma.iter().map(|&g| u8::from(g >= 0.5)).collect()
    }
}

/// Optimal schedule for one channel together with labeling cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub schedule: Vec<u8>,
    pub sum_rate: f64,
    pub wallclock_s: f64,
    pub evaluated: u64,
}

impl Label {
    pub fn to_schedule(&self) -> Schedule {
        let bits: Vec<bool> = self.schedule.iter().map(|&b| b == 1).collect();
        Schedule::binary(&bits)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub channel: ChannelRealization,
    pub label: Label,
}

/// Rates for power levels `gamma` with noise term `noise_over_pmax`.
pub fn link_rates_with(
    channel: &ChannelRealization,
    gamma: &[f64],
    noise_over_pmax: f64,
) -> Result<Vec<f64>> {
    let k = channel.k();
    if gamma.len() != k {
        return Err(Error::Dimension(format!(
            "schedule has {} entries for a {k}-link channel",
            gamma.len()
        )));
    }
    let g = &channel.gain_sq;
    let rates = (0..k)
        .map(|i| {
            let mut interference = 0.0;
            for j in 0..k {
                if j != i {
                    interference += g[[i, j]] * gamma[j];
                }
            }
            (1.0 + g[[i, i]] * gamma[i] / (interference + noise_over_pmax)).log2()
        })
        .collect();
    Ok(rates)
}

pub fn link_rates(
    channel: &ChannelRealization,
    schedule: &Schedule,
    sys: &SystemParams,
) -> Result<Vec<f64>> {
    link_rates_with(channel, schedule.gamma(), sys.noise_over_pmax())
}

pub fn sum_rate_with(channel: &ChannelRealization, gamma: &[f64], noise_over_pmax: f64) -> Result<f64> {
    Ok(link_rates_with(channel, gamma, noise_over_pmax)?.iter().sum())
}

pub fn sum_rate(channel: &ChannelRealization, schedule: &Schedule, sys: &SystemParams) -> Result<f64> {
    sum_rate_with(channel, schedule.gamma(), sys.noise_over_pmax())
}

pub const DEFAULT_EXHAUSTIVE_CAP: usize = 20;

/// Enumerates all `2^K` binary schedules in counting order and keeps the
/// first maximiser, so ties resolve to the smallest big-endian index.
pub fn exhaustive_search(
    channel: &ChannelRealization,
    sys: &SystemParams,
    cap: usize,
) -> Result<LabeledSample> {
    let k = channel.k();
    if k > cap || k >= 63 {
        return Err(Error::TooLarge { k, cap });
    }
    let noise = sys.noise_over_pmax();
    let start = Instant::now();
    let total = 1u64 << k;
    let mut gamma = vec![0.0; k];
    let mut best_index = 0u64;
    let mut best_rate = f64::NEG_INFINITY;
    for index in 0..total {
        for (i, g) in gamma.iter_mut().enumerate() {
            *g = ((index >> (k - 1 - i)) & 1) as f64;
        }
        let r = sum_rate_with(channel, &gamma, noise)?;
        if r > best_rate {
            best_rate = r;
            best_index = index;
        }
    }
    let wallclock_s = start.elapsed().as_secs_f64();
    Ok(LabeledSample {
        channel: channel.clone(),
        label: Label {
            schedule: Schedule::from_index(best_index, k).bits(),
            sum_rate: best_rate,
            wallclock_s,
            evaluated: total,
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub k: usize,
    pub t_unlabeled_s: f64,
    pub t_labeled_s: f64,
    pub evals: u64,
}

/// Mean wall-clock per generated sample, without and with exhaustive
/// labeling. An unlabeled sample is a deployment, its channel and its graph.
pub fn label_timing_benchmark(
    k_values: &[usize],
    n_samples: usize,
    sys: &SystemParams,
    geom: &GeometryParams,
    pl: &PathLossParams,
    master_seed: u64,
    cap: usize,
) -> Result<Vec<BenchRow>> {
    if n_samples == 0 {
        return Err(Error::Domain("benchmark needs at least one sample".into()));
    }
    if let Some(&k) = k_values.iter().find(|&&k| k > cap) {
        return Err(Error::TooLarge { k, cap });
    }
    let mut rows = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let seed_of = |i: usize| seed::derive(master_seed, &[seed::tag::BENCH, k as u64, i as u64]);

        // Untimed warm-up so the first size is not measured with cold caches.
        for i in 0..n_samples.min(8) {
            let ch = crate::channel::generate_sample(k, seed_of(i), geom, pl)?;
            std::hint::black_box(exhaustive_search(&ch, sys, cap)?);
        }

        let start = Instant::now();
        for i in 0..n_samples {
            let ch = crate::channel::generate_sample(k, seed_of(i), geom, pl)?;
            std::hint::black_box(build_graph(&ch, sys)?);
        }
        let t_unlabeled = start.elapsed().as_secs_f64() / n_samples as f64;

        let start = Instant::now();
        let mut evals = 0;
        for i in 0..n_samples {
            let ch = crate::channel::generate_sample(k, seed_of(i), geom, pl)?;
            std::hint::black_box(build_graph(&ch, sys)?);
            let labeled = exhaustive_search(&ch, sys, cap)?;
            evals = labeled.label.evaluated;
            std::hint::black_box(labeled);
        }
        let t_labeled = start.elapsed().as_secs_f64() / n_samples as f64;

        rows.push(BenchRow {
            k,
            t_unlabeled_s: t_unlabeled,
            t_labeled_s: t_labeled,
            evals,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("k,t_unlabeled_s,t_labeled_s,evals\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{}\n",
            r.k, r.t_unlabeled_s, r.t_labeled_s, r.evals
        ));
    }
    out
}

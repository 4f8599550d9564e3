//! Network deployments and channel gain matrices.
//!
//! Transmitters are dropped uniformly in a square with a minimum pairwise
//! separation, each receiver is dropped uniformly over an annulus around its
//! transmitter, and gains follow a dual-slope path-loss law with log-normal
//! shadowing. Only `|h_ij|^2` is ever produced.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

/// Transmit power, bandwidth and noise density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub p_max_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub carrier_note: String,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            p_max_dbm: 10.0,
            bandwidth_hz: 10e6,
            noise_psd_dbm_hz: -174.0,
            carrier_note: "dual-slope reference at 1 m".to_string(),
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) || !self.bandwidth_hz.is_finite() {
            return Err(Error::Config(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth_hz
            )));
        }
        if !self.p_max_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() {
            return Err(Error::Config("power levels must be finite".into()));
        }
        Ok(())
    }

    /// Noise power over the whole band, in mW.
    pub fn noise_mw(&self) -> f64 {
        10f64.powf((self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10()) / 10.0)
    }

    pub fn p_max_mw(&self) -> f64 {
        10f64.powf(self.p_max_dbm / 10.0)
    }

    /// The constant `N / P_max` in the rate expression.
    pub fn noise_over_pmax(&self) -> f64 {
        self.noise_mw() / self.p_max_mw()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryParams {
    pub area_side_m: f64,
    pub min_tx_separation_m: f64,
    pub ring_inner_m: f64,
    pub ring_outer_m: f64,
    /// Rejection-sampling attempts per node before a full restart.
    pub max_attempts: usize,
    pub max_restarts: usize,
}

impl Default for GeometryParams {
    fn default() -> Self {
        GeometryParams {
            area_side_m: 250.0,
            min_tx_separation_m: 35.0,
            ring_inner_m: 10.0,
            ring_outer_m: 50.0,
            max_attempts: 10_000,
            max_restarts: 100,
        }
    }
}

impl GeometryParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.area_side_m > 0.0
            && self.min_tx_separation_m >= 0.0
            && self.ring_inner_m >= 0.0
            && self.ring_inner_m < self.ring_outer_m
            && self.ring_outer_m.is_finite()
            && self.max_attempts > 0
            && self.max_restarts > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid geometry: {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossParams {
    /// Loss at the 1 m reference distance.
    pub ref_loss_db: f64,
    pub exp_near: f64,
    pub exp_far: f64,
    pub breakpoint_m: f64,
    pub shadowing_std_db: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        PathLossParams {
            ref_loss_db: 40.0,
            exp_near: 2.0,
            exp_far: 4.0,
            breakpoint_m: 50.0,
            shadowing_std_db: 7.0,
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.exp_near > 0.0
            && self.exp_far >= self.exp_near
            && self.breakpoint_m > 0.0
            && self.shadowing_std_db >= 0.0
            && self.ref_loss_db.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid path-loss parameters: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn inside(&self, side: f64) -> bool {
        (0.0..=side).contains(&self.x) && (0.0..=side).contains(&self.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Deployment {
    pub area_side: f64,
    pub tx: Vec<Point>,
    pub rx: Vec<Point>,
}

impl Deployment {
    pub fn k(&self) -> usize {
        self.tx.len()
    }
}

/// `gain_sq[[i, j]]` is `|h_ij|^2`: the power gain from transmitter `j` to
/// receiver `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    /// Absent for synthetic channels built directly from a gain matrix.
    pub deployment: Option<Deployment>,
    pub gain_sq: Array2<f64>,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn from_gains(gain_sq: Array2<f64>) -> Result<Self> {
        let c = ChannelRealization {
            deployment: None,
            gain_sq,
            seed: 0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn k(&self) -> usize {
        self.gain_sq.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (r, c) = self.gain_sq.dim();
        if r != c || r == 0 {
            return Err(Error::Dimension(format!("gain matrix must be square and non-empty, got {r}x{c}")));
        }
        if let Some(bad) = self.gain_sq.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(Error::Domain(format!("channel gains must be positive and finite, found {bad}")));
        }
        if let Some(d) = &self.deployment {
            if d.tx.len() != r || d.rx.len() != r {
                return Err(Error::Dimension("deployment size differs from gain matrix".into()));
            }
        }
        Ok(())
    }

    /// Relabels links so that link `i` becomes link `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> ChannelRealization {
        let k = self.k();
        let mut g = Array2::zeros((k, k));
        for i in 0..k {
            for j in 0..k {
                g[[perm[i], perm[j]]] = self.gain_sq[[i, j]];
            }
        }
        let deployment = self.deployment.as_ref().map(|d| {
            let mut tx = d.tx.clone();
            let mut rx = d.rx.clone();
            for i in 0..k {
                tx[perm[i]] = d.tx[i];
                rx[perm[i]] = d.rx[i];
            }
            Deployment {
                area_side: d.area_side,
                tx,
                rx,
            }
        });
        ChannelRealization {
            deployment,
            gain_sq: g,
            seed: self.seed,
        }
    }
}

/// Hexagonal packing bound: disks of radius `sep/2` centred inside the
/// square must fit into the square grown by `sep/2` on each side.
fn packing_feasible(k: usize, geom: &GeometryParams) -> bool {
    if k <= 1 || geom.min_tx_separation_m == 0.0 {
        return true;
    }
    let r = geom.min_tx_separation_m / 2.0;
    let side = geom.area_side_m + geom.min_tx_separation_m;
    let density = std::f64::consts::PI / (2.0 * 3f64.sqrt());
    k as f64 * std::f64::consts::PI * r * r <= side * side * density
}

pub fn deploy_network(k: usize, geom: &GeometryParams, rng: &mut Rng) -> Result<Deployment> {
    if k == 0 {
        return Err(Error::Domain("network must have at least one link".into()));
    }
    geom.validate()?;
    let infeasible = |reason: String| Error::Infeasible { k, reason };
    if !packing_feasible(k, geom) {
        return Err(infeasible(format!(
            "{k} transmitters at separation {} m cannot fit in a {} m square",
            geom.min_tx_separation_m, geom.area_side_m
        )));
    }

    let side = geom.area_side_m;
    let sep = geom.min_tx_separation_m;
    let mut tx: Vec<Point> = Vec::with_capacity(k);
    'restart: for _ in 0..geom.max_restarts {
        tx.clear();
        for _ in 0..k {
            let mut placed = false;
            for _ in 0..geom.max_attempts {
                let p = Point {
                    x: rng.random::<f64>() * side,
                    y: rng.random::<f64>() * side,
                };
                if tx.iter().all(|q| q.distance(&p) >= sep) {
                    tx.push(p);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }
        break;
    }
    if tx.len() != k {
        return Err(infeasible(format!(
            "rejection sampling could not keep transmitters {sep} m apart after {} restarts",
            geom.max_restarts
        )));
    }

    let (r_in2, r_out2) = (geom.ring_inner_m.powi(2), geom.ring_outer_m.powi(2));
    let mut rx = Vec::with_capacity(k);
    for t in &tx {
        let mut placed = None;
        for _ in 0..geom.max_attempts {
            let radius = (r_in2 + rng.random::<f64>() * (r_out2 - r_in2)).sqrt();
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let p = Point {
                x: t.x + radius * angle.cos(),
                y: t.y + radius * angle.sin(),
            };
            if p.inside(side) {
                placed = Some(p);
                break;
            }
        }
        match placed {
            Some(p) => rx.push(p),
            None => {
                return Err(infeasible(
                    "no receiver position inside the area for a transmitter".into(),
                ))
            }
        }
    }

    Ok(Deployment {
        area_side: side,
        tx,
        rx,
    })
}

/// Dual-slope path loss in dB, continuous at the breakpoint.
pub fn path_loss_db(distance: f64, pl: &PathLossParams) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::Domain(format!("distance must be positive, got {distance}")));
    }
    let loss = if distance <= pl.breakpoint_m {
        pl.ref_loss_db + 10.0 * pl.exp_near * distance.log10()
    } else {
        pl.ref_loss_db
            + 10.0 * pl.exp_near * pl.breakpoint_m.log10()
            + 10.0 * pl.exp_far * (distance / pl.breakpoint_m).log10()
    };
    Ok(loss)
}

pub fn sample_channel(
    deployment: &Deployment,
    pl: &PathLossParams,
    rng: &mut Rng,
    seed: u64,
) -> Result<ChannelRealization> {
    let k = deployment.k();
    let shadow = Normal::new(0.0, pl.shadowing_std_db)
        .map_err(|e| Error::Domain(format!("shadowing distribution: {e}")))?;
    let mut gain_sq = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            let d = deployment.tx[j].distance(&deployment.rx[i]);
            let loss = path_loss_db(d, pl)? + shadow.sample(rng);
            gain_sq[[i, j]] = 10f64.powf(-loss / 10.0);
        }
    }
    let channel = ChannelRealization {
        deployment: Some(deployment.clone()),
        gain_sq,
        seed,
    };
    channel.validate()?;
    Ok(channel)
}

/// Deployment plus channel for sample `seed`, using separate streams for
/// geometry and shadowing.
pub fn generate_sample(
    k: usize,
    seed: u64,
    geom: &GeometryParams,
    pl: &PathLossParams,
) -> Result<ChannelRealization> {
    let mut geo_rng = crate::seed::rng_at(seed, &[crate::seed::tag::DEPLOY]);
    let deployment = deploy_network(k, geom, &mut geo_rng)?;
    let mut ch_rng = crate::seed::rng_at(seed, &[crate::seed::tag::CHANNEL]);
    sample_channel(&deployment, pl, &mut ch_rng, seed)
}

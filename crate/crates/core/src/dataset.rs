//! Line-delimited JSON dataset files.
//!
//! The first line is a [`DatasetHeader`]; every following line is one
//! [`SampleRecord`]. Floats are written in shortest round-trip form and
//! parsed with correct rounding, so write -> read -> write is byte-exact.

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    generate_sample, ChannelRealization, Deployment, GeometryParams, PathLossParams, Point,
    SystemParams,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::rate::exhaustive_search;
use crate::seed::{self, tag};
use crate::train::Example;

pub const DATASET_FORMAT: &str = "linksched-dataset/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn tag(self) -> u64 {
        match self {
            Split::Train => tag::TRAIN,
            Split::Test => tag::TEST,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub data_digest: String,
    pub split: Split,
    pub k: usize,
    pub n: usize,
    pub master_seed: u64,
    pub system: SystemParams,
    pub geometry: GeometryParams,
    pub path_loss: PathLossParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub id: usize,
    pub seed: u64,
    pub tx: Vec<[f64; 2]>,
    pub rx: Vec<[f64; 2]>,
    pub gain_sq: Vec<Vec<f64>>,
    pub label: Option<crate::rate::Label>,
}

impl SampleRecord {
    pub fn from_channel(id: usize, channel: &ChannelRealization) -> Self {
        let (tx, rx) = match &channel.deployment {
            Some(d) => (
                d.tx.iter().map(|p| [p.x, p.y]).collect(),
                d.rx.iter().map(|p| [p.x, p.y]).collect(),
            ),
            None => (Vec::new(), Vec::new()),
        };
        SampleRecord {
            id,
            seed: channel.seed,
            tx,
            rx,
            gain_sq: channel.gain_sq.rows().into_iter().map(|r| r.to_vec()).collect(),
            label: None,
        }
    }

    pub fn channel(&self, area_side: f64) -> Result<ChannelRealization> {
        let k = self.gain_sq.len();
        if self.gain_sq.iter().any(|r| r.len() != k) {
            return Err(Error::Data(format!("record {}: gain matrix is not square", self.id)));
        }
        let flat: Vec<f64> = self.gain_sq.iter().flatten().copied().collect();
        let gain_sq = Array2::from_shape_vec((k, k), flat).map_err(|e| Error::Data(e.to_string()))?;
        let deployment = if self.tx.is_empty() && self.rx.is_empty() {
            None
        } else {
            let pts = |v: &[[f64; 2]]| v.iter().map(|p| Point { x: p[0], y: p[1] }).collect();
            Some(Deployment {
                area_side,
                tx: pts(&self.tx),
                rx: pts(&self.rx),
            })
        };
        let channel = ChannelRealization {
            deployment,
            gain_sq,
            seed: self.seed,
        };
        channel
            .validate()
            .map_err(|e| Error::Data(format!("record {}: {e}", self.id)))?;
        Ok(channel)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    pub records: Vec<SampleRecord>,
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Seed of sample `index` in a split; independent of every other sample.
pub fn sample_seed(master: u64, split: Split, k: usize, index: usize) -> u64 {
    seed::derive(master, &[split.tag(), k as u64, index as u64])
}

impl DatasetFile {
    /// Unlabeled samples for one split and network size.
    pub fn generate(cfg: &ExperimentConfig, split: Split, k: usize) -> Result<Self> {
        let n = match split {
            Split::Train => cfg.data.n_train,
            Split::Test => cfg.data.n_test,
        };
        let records = (0..n)
            .into_par_iter()
            .map(|i| {
                let s = sample_seed(cfg.seed, split, k, i);
                let ch = generate_sample(k, s, &cfg.geometry, &cfg.path_loss)?;
                Ok(SampleRecord::from_channel(i, &ch))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DatasetFile {
            header: DatasetHeader {
                format: DATASET_FORMAT.to_string(),
                data_digest: cfg.data_digest(),
                split,
                k,
                n,
                master_seed: cfg.seed,
                system: cfg.system.clone(),
                geometry: cfg.geometry.clone(),
                path_loss: cfg.path_loss.clone(),
            },
            records,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serialises");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serialises"));
            out.push('\n');
        }
        out
    }

    /// Parses and structurally validates a dataset, including a sum-rate
    /// consistency check of every stored label.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| Error::Data("empty dataset file".into()))?;
        let header: DatasetHeader =
            serde_json::from_str(first).map_err(|e| Error::Data(format!("header: {e}")))?;
        if header.format != DATASET_FORMAT {
            return Err(Error::Data(format!("unsupported dataset format {:?}", header.format)));
        }
        let records = lines
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str::<SampleRecord>(l)
                    .map_err(|e| Error::Data(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        let file = DatasetFile { header, records };
        file.validate(false)?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn channel(&self, i: usize) -> Result<ChannelRealization> {
        self.records[i].channel(self.header.geometry.area_side_m)
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.records.iter().all(|r| r.label.is_some())
    }

    pub fn n_labeled(&self) -> usize {
        self.records.iter().filter(|r| r.label.is_some()).count()
    }

    /// Checks record count, ids, shapes and label consistency. With `full`,
    /// labels are also re-derived by exhaustive search.
    pub fn validate(&self, full: bool) -> Result<()> {
        let h = &self.header;
        if self.records.len() != h.n {
            return Err(Error::Data(format!(
                "header announces {} samples, file has {}",
                h.n,
                self.records.len()
            )));
        }
        let noise = h.system.noise_over_pmax();
        for (i, r) in self.records.iter().enumerate() {
            if r.id != i {
                return Err(Error::Data(format!("record {i} has id {}", r.id)));
            }
            let ch = self.channel(i)?;
            if ch.k() != h.k {
                return Err(Error::Data(format!("record {i} has {} links, expected {}", ch.k(), h.k)));
            }
            if let Some(label) = &r.label {
                let bad = |m: String| Error::Data(format!("record {i}: {m}"));
                if label.schedule.len() != h.k || label.schedule.iter().any(|&b| b > 1) {
                    return Err(bad("label is not a binary schedule of length k".into()));
                }
                if label.evaluated != 1u64 << h.k {
                    return Err(bad(format!("label evaluated {} schedules", label.evaluated)));
                }
                let gamma: Vec<f64> = label.schedule.iter().map(|&b| f64::from(b)).collect();
                let rate = crate::rate::sum_rate_with(&ch, &gamma, noise)?;
                if (rate - label.sum_rate).abs() > 1e-9 * rate.abs().max(f64::MIN_POSITIVE) {
                    return Err(bad(format!(
                        "stored sum-rate {} differs from recomputed {rate}",
                        label.sum_rate
                    )));
                }
                if full {
                    let best = exhaustive_search(&ch, &h.system, usize::MAX)?;
                    if best.label.schedule != label.schedule {
                        return Err(bad("label is not the exhaustive-search optimum".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Examples for training or evaluation, keeping labels when present.
    pub fn examples(&self) -> Result<Vec<Example>> {
        (0..self.records.len())
            .map(|i| Example::new(self.channel(i)?, self.records[i].label.clone(), &self.header.system))
            .collect()
    }

    /// Labels every unlabeled record in `range`. Returns how many were added.
    pub fn label_range(&mut self, range: std::ops::Range<usize>, cap: usize) -> Result<usize> {
        let sys = self.header.system.clone();
        let todo: Vec<usize> = range.filter(|&i| self.records[i].label.is_none()).collect();
        let labels = todo
            .par_iter()
            .map(|&i| Ok(exhaustive_search(&self.channel(i)?, &sys, cap)?.label))
            .collect::<Result<Vec<_>>>()?;
        for (&i, l) in todo.iter().zip(labels) {
            self.records[i].label = Some(l);
        }
        Ok(todo.len())
    }
}

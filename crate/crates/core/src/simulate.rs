//! Synthetic linear panels: `y = beta' x + eps` with standard normal features.
//!
//! Every random quantity comes from its own stream of one seeded ChaCha8
//! generator: stream 0 draws `beta`, stream `1 + 2t` the features of period
//! `t` and stream `2 + 2t` its raw noise. Growing `T` therefore appends periods
//! without disturbing earlier ones.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::dataset::{default_feature_names, save_csv, Group, GroupedDataset};
use crate::error::{Error, Result};

/// Identifier of the pseudo-random algorithm and stream layout, stored in panel metadata.
pub const GENERATOR_ID: &str = "chacha8-streams-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    None,
    Gaussian,
    StudentT { nu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DGPConfig {
    /// Number of periods (groups).
    pub t: usize,
    /// Items per period.
    pub n: usize,
    /// Feature count.
    pub p: usize,
    pub noise: Noise,
    /// Target `Var(f) / Var(eps)`. Without it, noise has unit variance.
    pub snr_target: Option<f64>,
    pub train_periods: usize,
    pub seed: u64,
}

impl Default for DGPConfig {
    fn default() -> Self {
        DGPConfig { t: 120, n: 500, p: 10, noise: Noise::None, snr_target: None, train_periods: 80, seed: 0 }
    }
}

impl DGPConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.n == 0 || self.p == 0 {
            return Err(Error::Config("t, n and p must all be at least 1".into()));
        }
        if self.train_periods == 0 || self.train_periods > self.t {
            return Err(Error::Config(format!("train_periods must lie in 1..={}", self.t)));
        }
        if let Noise::StudentT { nu } = self.noise {
            if !(nu > 2.0) || !nu.is_finite() {
                return Err(Error::Config(format!("Student-t noise needs finite nu > 2, got {nu}")));
            }
        }
        match (self.noise, self.snr_target) {
            (Noise::None, Some(_)) => Err(Error::Config("snr_target requires a noise distribution".into())),
            (_, Some(s)) if !(s > 0.0 && s.is_finite()) => {
                Err(Error::Config(format!("snr_target must be positive, got {s}")))
            }
            _ => Ok(()),
        }
    }
}

/// Signal-to-noise level of the noisy presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrLevel {
    High,
    Medium,
    Low,
}

impl SnrLevel {
    pub fn value(self) -> f64 {
        match self {
            SnrLevel::High => 2.0,
            SnrLevel::Medium => 0.5,
            SnrLevel::Low => 0.1,
        }
    }
}

impl FromStr for SnrLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "high" => Ok(SnrLevel::High),
            "medium" => Ok(SnrLevel::Medium),
            "low" => Ok(SnrLevel::Low),
            _ => Err(Error::Config(format!("unknown SNR level {s:?}; expected high, medium or low"))),
        }
    }
}

/// The three simulation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Noiseless,
    SnrSweep(SnrLevel),
    HeavyTail(SnrLevel),
}

impl Preset {
    pub fn parse(name: &str, level: SnrLevel) -> Result<Self> {
        match name {
            "noiseless" => Ok(Preset::Noiseless),
            "snr-sweep" => Ok(Preset::SnrSweep(level)),
            "heavy-tail" => Ok(Preset::HeavyTail(level)),
            _ => Err(Error::Config(format!("unknown preset {name:?}; expected noiseless, snr-sweep or heavy-tail"))),
        }
    }

    pub fn config(self, seed: u64) -> DGPConfig {
        let base = DGPConfig { seed, ..DGPConfig::default() };
        match self {
            Preset::Noiseless => base,
            Preset::SnrSweep(level) => {
                DGPConfig { p: 100, noise: Noise::Gaussian, snr_target: Some(level.value()), ..base }
            }
            Preset::HeavyTail(level) => {
                DGPConfig { p: 100, noise: Noise::StudentT { nu: 5.0 }, snr_target: Some(level.value()), ..base }
            }
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Noiseless => f.write_str("noiseless"),
            Preset::SnrSweep(l) => write!(f, "snr-sweep/{l:?}"),
            Preset::HeavyTail(l) => write!(f, "heavy-tail/{l:?}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimPanel {
    pub dataset: GroupedDataset,
    /// Unit-norm coefficient vector shared by all periods.
    pub beta: Vec<f64>,
    /// Realised sample `Var(f) / Var(eps)`; `None` for noiseless panels.
    pub realized_snr: Option<f64>,
    pub config: DGPConfig,
}

impl SimPanel {
    /// Split into the first `train_periods` groups and the rest.
    pub fn split(&self) -> (GroupedDataset, Option<GroupedDataset>) {
        let k = self.config.train_periods;
        let train = self.dataset.slice(0..k).expect("train_periods validated");
        let test = (k < self.dataset.num_groups())
            .then(|| self.dataset.slice(k..self.dataset.num_groups()).expect("nonempty"));
        (train, test)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn gen_linear_panel(cfg: &DGPConfig) -> Result<SimPanel> {
    cfg.validate()?;
    let (t_len, n, p) = (cfg.t, cfg.n, cfg.p);

    let mut rng = stream(cfg.seed, 0);
    let mut beta: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    beta.iter_mut().for_each(|b| *b /= norm);

    let mut features = Vec::with_capacity(t_len);
    let mut signal = Vec::with_capacity(t_len * n);
    for t in 0..t_len as u64 {
        let mut rng = stream(cfg.seed, 1 + 2 * t);
        let x: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        signal.extend(x.chunks(p).map(|row| row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()));
        features.push(x);
    }

    let (noise, realized_snr) = match cfg.noise {
        Noise::None => (vec![0.0; t_len * n], None),
        kind => {
            let mut raw = Vec::with_capacity(t_len * n);
            for t in 0..t_len as u64 {
                let mut rng = stream(cfg.seed, 2 + 2 * t);
                match kind {
                    Noise::Gaussian => raw.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal))),
                    Noise::StudentT { nu } => {
                        let dist = StudentT::new(nu).map_err(|e| Error::Config(e.to_string()))?;
                        raw.extend((0..n).map(|_| dist.sample(&mut rng)));
                    }
                    Noise::None => unreachable!(),
                }
            }
            let scale = match (cfg.snr_target, kind) {
                (Some(target), _) => calibrate_noise_scale(&signal, target, &raw)?,
                (None, Noise::StudentT { nu }) => ((nu - 2.0) / nu).sqrt(),
                (None, _) => 1.0,
            };
            raw.iter_mut().for_each(|e| *e *= scale);
            let snr = population_variance(&signal) / population_variance(&raw);
            (raw, Some(snr))
        }
    };

    let groups = features
        .into_iter()
        .enumerate()
        .map(|(t, x)| {
            let labels = (t * n..(t + 1) * n).map(|i| signal[i] + noise[i]).collect();
            Group::new(t.to_string(), p, x, labels, None)
        })
        .collect::<Result<Vec<_>>>()?;
    let dataset = GroupedDataset::new(groups, Some(default_feature_names(p)))?;
    Ok(SimPanel { dataset, beta, realized_snr, config: cfg.clone() })
}

/// Population variance (divide by `n`).
pub fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Scale that makes `Var(signal) / Var(scale * raw_noise) == snr_target` on the sample.
pub fn calibrate_noise_scale(signal: &[f64], snr_target: f64, raw_noise: &[f64]) -> Result<f64> {
    if signal.is_empty() || raw_noise.is_empty() {
        return Err(Error::Domain("signal and noise must be nonempty".into()));
    }
    if !(snr_target > 0.0 && snr_target.is_finite()) {
        return Err(Error::Domain(format!("snr_target must be positive, got {snr_target}")));
    }
    let vs = population_variance(signal);
    let vn = population_variance(raw_noise);
    if !(vs > 0.0) {
        return Err(Error::Domain("signal has zero variance".into()));
    }
    if !(vn > 0.0) {
        return Err(Error::Domain("raw noise has zero variance".into()));
    }
    Ok((vs / (snr_target * vn)).sqrt())
}

pub fn student_t_noise(count: usize, nu: f64, seed: u64) -> Result<Vec<f64>> {
    if !(nu > 2.0) {
        return Err(Error::Domain(format!("Student-t noise needs nu > 2, got {nu}")));
    }
    let dist = StudentT::new(nu).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| dist.sample(&mut rng)).collect())
}

#[derive(Serialize)]
struct PanelMeta<'a> {
    seed: u64,
    config: &'a DGPConfig,
    beta: &'a [f64],
    realized_snr: Option<f64>,
    generator_id: &'static str,
}

/// Write `panel.csv`-style data to `csv_path` and its metadata sidecar to `meta_path`.
pub fn export_panel(panel: &SimPanel, csv_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<()> {
    save_csv(&panel.dataset, csv_path)?;
    let meta = PanelMeta {
        seed: panel.config.seed,
        config: &panel.config,
        beta: &panel.beta,
        realized_snr: panel.realized_snr,
        generator_id: GENERATOR_ID,
    };
    let meta_path = meta_path.as_ref();
    std::fs::write(meta_path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(meta_path, e))
}

//! Run configuration: a TOML file plus flag overrides, resolved into one record.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{
    load_csv, rank_transform_features, rolling_windows, CsvSchema, GroupedDataset, RollingWindowPlan,
};
use crate::error::{Error, Result};
use crate::evaluate::TuningGrid;
use crate::gbdt::{Objective, TrainConfig};
use crate::objectives::ObjectiveKind;
use crate::simulate::{gen_linear_panel, DGPConfig, Preset, SnrLevel};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Dataset CSV; when absent, commands that need data simulate a panel.
    pub path: Option<PathBuf>,
    pub schema: CsvSchema,
    /// Replace features by within-group ranks scaled to [-1, 1].
    pub rank_transform: bool,
    /// Leading groups used for training by `train` and `benchmark`; the rest are the test set.
    pub train_periods: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateSection {
    /// `noiseless`, `snr-sweep` or `heavy-tail`; overrides `dgp` when set.
    pub preset: Option<String>,
    pub snr: SnrLevel,
    pub dgp: DGPConfig,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { preset: None, snr: SnrLevel::Low, dgp: DGPConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSection {
    pub train_len: usize,
    pub valid_len: usize,
    pub test_len: usize,
    pub step: usize,
}

impl Default for WindowSection {
    fn default() -> Self {
        WindowSection { train_len: 80, valid_len: 0, test_len: 40, step: 40 }
    }
}

impl WindowSection {
    pub fn plan(&self, num_groups: usize) -> Result<RollingWindowPlan> {
        rolling_windows(num_groups, self.train_len, self.valid_len, self.test_len, self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSection {
    pub objectives: Vec<ObjectiveKind>,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        BenchmarkSection {
            objectives: vec![ObjectiveKind::LambdaRankIc, ObjectiveKind::LambdaNdcg, ObjectiveKind::SquaredError],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestSection {
    /// Score with a saved model instead of running the rolling protocol.
    pub model: Option<PathBuf>,
    /// Use a precomputed score column of the dataset.
    pub score_col: Option<String>,
    pub negate_scores: bool,
    pub ndcg_k: usize,
    pub parallel_windows: bool,
}

impl Default for BacktestSection {
    fn default() -> Self {
        BacktestSection { model: None, score_col: None, negate_scores: false, ndcg_k: 100, parallel_windows: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub tool_version: String,
    pub command: String,
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    pub threads: Option<usize>,
    pub svg: bool,
    pub data: DataConfig,
    pub simulate: SimulateSection,
    pub objective: Objective,
    pub train: TrainConfig,
    pub windows: WindowSection,
    pub tuning: TuningGrid,
    pub benchmark: BenchmarkSection,
    pub backtest: BacktestSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tool_version: TOOL_VERSION.to_string(),
            command: String::new(),
            out: PathBuf::from("out"),
            seeds: vec![0],
            threads: None,
            svg: false,
            data: DataConfig::default(),
            simulate: SimulateSection::default(),
            objective: Objective::default(),
            train: TrainConfig::default(),
            windows: WindowSection::default(),
            tuning: TuningGrid::default(),
            benchmark: BenchmarkSection::default(),
            backtest: BacktestSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().replace('\n', " ")))?;
        cfg.tool_version = TOOL_VERSION.to_string();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// DGP for one seed, with the preset applied when one is named.
    pub fn dgp(&self, seed: u64) -> Result<DGPConfig> {
        match &self.simulate.preset {
            Some(name) => {
                let base = Preset::parse(name, self.simulate.snr)?.config(seed);
                // preset fixes the study; size knobs from the config still apply
                let d = &self.simulate.dgp;
                let defaults = DGPConfig::default();
                Ok(DGPConfig {
                    t: if d.t != defaults.t { d.t } else { base.t },
                    n: if d.n != defaults.n { d.n } else { base.n },
                    p: if d.p != defaults.p { d.p } else { base.p },
                    train_periods: if d.train_periods != defaults.train_periods {
                        d.train_periods
                    } else {
                        base.train_periods
                    },
                    ..base
                })
            }
            None => Ok(DGPConfig { seed, ..self.simulate.dgp.clone() }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.train.validate()?;
        self.objective.config.validate()?;
        if let Some(name) = &self.simulate.preset {
            Preset::parse(name, self.simulate.snr)?;
        }
        Ok(())
    }

    /// The dataset named in `data.path`, or a simulated panel for `seed`, plus
    /// the number of leading training groups.
    pub fn load_data(&self, seed: u64) -> Result<(GroupedDataset, usize)> {
        let (ds, default_train) = match &self.data.path {
            Some(path) => {
                let ds = load_csv(path, &self.data.schema)?;
                let m = ds.num_groups();
                (ds, m)
            }
            None => {
                let panel = gen_linear_panel(&self.dgp(seed)?)?;
                let k = panel.config.train_periods;
                (panel.dataset, k)
            }
        };
        let ds = if self.data.rank_transform { rank_transform_features(&ds) } else { ds };
        let k = self.data.train_periods.unwrap_or(default_train);
        if k == 0 || k > ds.num_groups() {
            return Err(Error::Config(format!("train_periods must lie in 1..={}, got {k}", ds.num_groups())));
        }
        Ok((ds, k))
    }
}

/// Parse `a..b` (inclusive), `a..=b` or a comma-separated list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot parse seed list {s:?}; use e.g. 0..9 or 1,2,3"));
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

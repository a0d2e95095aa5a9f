use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMetric {
    /// Mean over groups of the Spearman correlation between scores and labels.
    #[serde(rename = "rank_ic")]
    MeanRankIc,
    #[serde(rename = "rmse")]
    Rmse,
}

impl EvalMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMetric::MeanRankIc => "rank_ic",
            EvalMetric::Rmse => "rmse",
        }
    }

    fn higher_is_better(self) -> bool {
        matches!(self, EvalMetric::MeanRankIc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    /// 1-based boosting round.
    pub round: usize,
    pub set_name: String,
    pub metric: EvalMetric,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<HistoryRecord>,
}

impl TrainHistory {
    pub(crate) fn push(&mut self, round: usize, set_name: &str, metric: EvalMetric, value: f64) {
        self.records.push(HistoryRecord { round, set_name: set_name.to_string(), metric, value });
    }

    /// `(round, value)` pairs for one set and metric, in round order.
    pub fn series(&self, set_name: &str, metric: EvalMetric) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| r.set_name == set_name && r.metric == metric)
            .map(|r| (r.round, r.value))
            .collect()
    }

    /// Best round and value; the earliest round wins ties.
    pub fn peak(&self, set_name: &str, metric: EvalMetric) -> Option<(usize, f64)> {
        let better = |a: f64, b: f64| if metric.higher_is_better() { a > b } else { a < b };
        self.series(set_name, metric).into_iter().filter(|(_, v)| !v.is_nan()).fold(None, |best, (r, v)| match best {
            Some((_, bv)) if !better(v, bv) => best,
            _ => Some((r, v)),
        })
    }

    pub fn final_value(&self, set_name: &str, metric: EvalMetric) -> Option<f64> {
        self.series(set_name, metric).last().map(|&(_, v)| v)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["round", "set", "metric", "value"])?;
        for r in &self.records {
            w.write_record([
                r.round.to_string(),
                r.set_name.clone(),
                r.metric.as_str().to_string(),
                r.value.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

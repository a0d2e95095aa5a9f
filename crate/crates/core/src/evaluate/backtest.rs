//! Decile portfolio sorts.
//!
//! Returns are decimal fractions per period (0.01 is 1%); reported statistics
//! are in percent, with Sharpe ratios annualised by `sqrt(12)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::mean_and_sample_std;
use crate::dataset::GroupedDataset;
use crate::error::{Error, Result};
use crate::rankcore::predicted_ranks;

pub const NUM_DECILES: usize = 10;

/// Bucket sizes for deciles 1..=10. Each gets `n / 10`; the remainder is handed
/// out in symmetric pairs from the outside in ((1,10), (2,9), ...), and an odd
/// leftover item goes to decile 6. Deciles 1 and 10 therefore always match.
pub fn decile_sizes(n: usize) -> [usize; NUM_DECILES] {
    let mut sizes = [n / NUM_DECILES; NUM_DECILES];
    let r = n % NUM_DECILES;
    for k in 0..r / 2 {
        sizes[k] += 1;
        sizes[NUM_DECILES - 1 - k] += 1;
    }
    if r % 2 == 1 {
        sizes[5] += 1;
    }
    sizes
}

/// Decile (1..=10) of every item; decile 10 holds the highest scores. Score
/// ties are broken by item position, earlier items ranking higher.
pub fn decile_assignment(scores: &[f64], item_index: &[usize]) -> Result<Vec<u8>> {
    let n = scores.len();
    let ranks = predicted_ranks(scores, item_index)?;
    let sizes = decile_sizes(n);
    // position from the bottom -> decile
    let mut by_position = Vec::with_capacity(n);
    for (d, &s) in sizes.iter().enumerate() {
        by_position.extend(std::iter::repeat_n(d as u8 + 1, s));
    }
    Ok(ranks.iter().map(|&r| by_position[n - r as usize]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodReturns {
    pub group_id: String,
    /// Deciles 1..=10; `None` for an empty decile.
    pub deciles: Vec<Option<f64>>,
    /// Decile 10 minus decile 1.
    pub long_short: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioStats {
    pub mean_pct: f64,
    /// Sample standard deviation; `None` with fewer than two periods.
    pub vol_pct: Option<f64>,
    /// `mean / vol * sqrt(12)`; `None` when the volatility is zero or undefined.
    pub sharpe: Option<f64>,
    pub mdd_pct: f64,
    pub periods: usize,
}

impl PortfolioStats {
    pub fn from_returns(returns: &[f64]) -> Option<Self> {
        if returns.is_empty() {
            return None;
        }
        let (mean, std) = mean_and_sample_std(returns);
        let sharpe = std.filter(|&s| s > 0.0).map(|s| mean / s * 12f64.sqrt());
        Some(PortfolioStats {
            mean_pct: 100.0 * mean,
            vol_pct: std.map(|s| 100.0 * s),
            sharpe,
            mdd_pct: max_drawdown(returns),
            periods: returns.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    /// Deciles 1..=10.
    pub deciles: Vec<PortfolioStats>,
    pub long_short: PortfolioStats,
    pub periods: Vec<PeriodReturns>,
    /// Compounded cumulative return after each period, per series
    /// (`"1"`..`"10"` and `"H-L"`). Missing periods carry the last value.
    pub cumulative: Vec<(String, Vec<f64>)>,
}

/// Largest peak-to-trough decline of compounded wealth `prod(1 + r)`, in percent.
pub fn max_drawdown(returns: &[f64]) -> f64 {
    let mut wealth = 1.0;
    let mut peak = 1.0f64;
    let mut mdd = 0.0f64;
    for r in returns {
        wealth *= 1.0 + r;
        peak = peak.max(wealth);
        mdd = mdd.max((peak - wealth) / peak);
    }
    100.0 * mdd
}

fn weighted_mean(values: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let (mut sw, mut swx) = (0.0, 0.0);
    for (w, x) in values {
        sw += w;
        swx += w * x;
    }
    (sw > 0.0).then(|| swx / sw)
}

/// Sort each period into score deciles and summarise decile and long-short returns.
/// `returns` defaults to the group labels; weights come from the groups when present.
pub fn decile_backtest(
    scores: &[Vec<f64>],
    ds: &GroupedDataset,
    returns: Option<&[Vec<f64>]>,
) -> Result<BacktestReport> {
    if scores.len() != ds.num_groups() {
        return Err(Error::LengthMismatch { expected: ds.num_groups(), got: scores.len() });
    }
    let mut periods = Vec::with_capacity(ds.num_groups());
    for (k, (s, g)) in scores.iter().zip(ds.groups()).enumerate() {
        let rets = returns.map_or(g.labels(), |r| &r[k]);
        if s.len() != g.len() || rets.len() != g.len() {
            return Err(Error::LengthMismatch { expected: g.len(), got: s.len().min(rets.len()) });
        }
        let assign = decile_assignment(s, g.item_index())?;
        let weight = |i: usize| g.weights().map_or(1.0, |w| w[i]);
        let deciles: Vec<Option<f64>> = (1..=NUM_DECILES as u8)
            .map(|d| weighted_mean((0..g.len()).filter(|&i| assign[i] == d).map(|i| (weight(i), rets[i]))))
            .collect();
        let long_short = match (deciles[NUM_DECILES - 1], deciles[0]) {
            (Some(hi), Some(lo)) => Some(hi - lo),
            _ => None,
        };
        periods.push(PeriodReturns { group_id: g.id().to_string(), deciles, long_short });
    }

    let series =
        |pick: &dyn Fn(&PeriodReturns) -> Option<f64>| -> Vec<Option<f64>> { periods.iter().map(pick).collect() };
    let stats = |s: &[Option<f64>]| {
        let present: Vec<f64> = s.iter().flatten().copied().collect();
        PortfolioStats::from_returns(&present)
            .ok_or_else(|| Error::EmptyDataset("no period produced a return for this portfolio".into()))
    };
    let cumulative_path = |s: &[Option<f64>]| {
        let mut w = 1.0;
        s.iter()
            .map(|r| {
                if let Some(r) = r {
                    w *= 1.0 + r;
                }
                w - 1.0
            })
            .collect::<Vec<f64>>()
    };

    let mut deciles = Vec::with_capacity(NUM_DECILES);
    let mut cumulative = Vec::with_capacity(NUM_DECILES + 1);
    for d in 0..NUM_DECILES {
        let s = series(&|p| p.deciles[d]);
        deciles.push(stats(&s)?);
        cumulative.push(((d + 1).to_string(), cumulative_path(&s)));
    }
    let ls = series(&|p| p.long_short);
    let long_short = stats(&ls)?;
    cumulative.push(("H-L".to_string(), cumulative_path(&ls)));
    Ok(BacktestReport { deciles, long_short, periods, cumulative })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Decile table: one row per decile plus `H-L`, columns Ret, Vol, SR, MDD.
pub fn write_deciles_csv<W: Write>(report: &BacktestReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["decile", "ret_pct", "vol_pct", "sharpe", "mdd_pct", "periods"])?;
    let rows = report.deciles.iter().enumerate().map(|(d, s)| ((d + 1).to_string(), s));
    for (name, s) in rows.chain(std::iter::once(("H-L".to_string(), &report.long_short))) {
        w.write_record([
            name,
            s.mean_pct.to_string(),
            fmt_opt(s.vol_pct),
            fmt_opt(s.sharpe),
            s.mdd_pct.to_string(),
            s.periods.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Tidy cumulative-return paths: `period, series, value`.
pub fn write_cumulative_csv<W: Write>(report: &BacktestReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["period", "series", "value"])?;
    for (name, path) in &report.cumulative {
        for (p, v) in report.periods.iter().zip(path) {
            w.write_record([p.group_id.as_str(), name, &v.to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Group;
    use proptest::prelude::*;

    fn brute_force_mdd(r: &[f64]) -> f64 {
        let mut w = vec![1.0];
        for x in r {
            w.push(w.last().unwrap() * (1.0 + x));
        }
        let mut best = 0.0f64;
        for u in 0..w.len() {
            for t in u..w.len() {
                best = best.max((w[u] - w[t]) / w[u]);
            }
        }
        100.0 * best
    }

    fn one_period(labels: Vec<f64>) -> GroupedDataset {
        let n = labels.len();
        GroupedDataset::new(vec![Group::new("0", 1, vec![0.0; n], labels, None).unwrap()], None).unwrap()
    }

    #[test]
    fn sizes_differ_by_at_most_one() {
        for n in 0..200 {
            let s = decile_sizes(n);
            assert_eq!(s.iter().sum::<usize>(), n);
            assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
            assert_eq!(s[0], s[9]);
        }
        assert_eq!(decile_sizes(23), [3, 2, 2, 2, 2, 3, 2, 2, 2, 3]);
    }

    #[test]
    fn drawdown_examples() {
        assert_eq!(max_drawdown(&[0.01, 0.0, 0.2]), 0.0);
        assert!((max_drawdown(&[0.1, -0.5]) - 50.0).abs() < 1e-12);
        assert_eq!(max_drawdown(&[]), 0.0);
    }

    #[test]
    fn perfect_scores_give_increasing_deciles() {
        let labels: Vec<f64> = (0..57).map(|i| ((i * 37) % 57) as f64 / 57.0).collect();
        let ds = one_period(labels.clone());
        let report = decile_backtest(&[labels], &ds, None).unwrap();
        for w in report.deciles.windows(2) {
            assert!(w[1].mean_pct > w[0].mean_pct);
        }
        assert!(report.long_short.mean_pct > 0.0);
    }

    #[test]
    fn constant_returns_have_undefined_sharpe() {
        let s = PortfolioStats::from_returns(&[0.01; 12]).unwrap();
        assert_eq!(s.vol_pct, Some(0.0));
        assert_eq!(s.sharpe, None);
        assert_eq!(s.mdd_pct, 0.0);
        assert!((s.mean_pct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_are_normalised_within_deciles() {
        let n = 10;
        let labels: Vec<f64> = (0..n).map(|i| i as f64 / 100.0).collect();
        let weights: Vec<f64> = (0..n).map(|i| (i + 1) as f64).collect();
        let g = Group::new("0", 1, vec![0.0; n], labels.clone(), Some(weights)).unwrap();
        let ds = GroupedDataset::new(vec![g], None).unwrap();
        let r = decile_backtest(std::slice::from_ref(&labels), &ds, None).unwrap();
        for d in 0..10 {
            assert!((r.periods[0].deciles[d].unwrap() - labels[d]).abs() < 1e-15);
        }
    }

    #[test]
    fn small_groups_leave_empty_deciles_missing() {
        let labels = vec![0.03, 0.01, 0.02];
        let ds = one_period(labels.clone());
        let r = decile_backtest(&[labels], &ds, None);
        // only deciles 1, 6 and 10 are populated, so the others have no returns at all
        assert!(r.is_err());
        let assign = decile_assignment(&[0.3, 0.1, 0.2], &[0, 1, 2]).unwrap();
        assert_eq!(assign, vec![10, 1, 6]);
    }

    #[test]
    fn csv_layout() {
        let labels: Vec<f64> = (0..20).map(|i| i as f64 / 100.0).collect();
        let ds = GroupedDataset::new(
            (0..3).map(|t| Group::new(t.to_string(), 1, vec![0.0; 20], labels.clone(), None).unwrap()).collect(),
            None,
        )
        .unwrap();
        let scores = vec![labels.clone(); 3];
        let r = decile_backtest(&scores, &ds, None).unwrap();
        let mut out = Vec::new();
        write_deciles_csv(&r, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 12);
        assert!(text.starts_with("decile,ret_pct,vol_pct,sharpe,mdd_pct,periods\n"));
        let mut out = Vec::new();
        write_cumulative_csv(&r, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1 + 11 * 3);
    }

    proptest! {
        #[test]
        fn drawdown_matches_brute_force(r in prop::collection::vec(-0.5f64..0.5, 0..60)) {
            prop_assert!((max_drawdown(&r) - brute_force_mdd(&r)).abs() < 1e-9);
        }

        #[test]
        fn drawdown_ignores_new_high_at_end(r in prop::collection::vec(-0.5f64..0.5, 1..60)) {
            let mut wealth = 1.0;
            let mut peak = 1.0f64;
            for x in &r {
                wealth *= 1.0 + x;
                peak = peak.max(wealth);
            }
            let mut extended = r.clone();
            extended.push(peak / wealth * 1.01 - 1.0);
            prop_assert_eq!(max_drawdown(&extended), max_drawdown(&r));
        }

        #[test]
        fn assignment_is_a_partition(n in 1usize..120, seed in 0u64..1000) {
            let scores: Vec<f64> = (0..n).map(|i| ((i as u64 * 2654435761 + seed) % 1009) as f64).collect();
            let index: Vec<usize> = (0..n).collect();
            let a = decile_assignment(&scores, &index).unwrap();
            let sizes = decile_sizes(n);
            for d in 1..=10u8 {
                prop_assert_eq!(a.iter().filter(|&&x| x == d).count(), sizes[d as usize - 1]);
            }
        }

        #[test]
        fn long_short_is_antisymmetric(n in 10usize..80, periods in 1usize..5, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let groups: Vec<Group> = (0..periods)
                .map(|t| {
                    let y = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
                    Group::new(t.to_string(), 1, vec![0.0; n], y, None).unwrap()
                })
                .collect();
            let ds = GroupedDataset::new(groups, None).unwrap();
            let scores: Vec<Vec<f64>> = (0..periods).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
            let negated: Vec<Vec<f64>> = scores.iter().map(|s| s.iter().map(|v| -v).collect()).collect();
            prop_assume!(n >= 10);
            let a = decile_backtest(&scores, &ds, None).unwrap();
            let b = decile_backtest(&negated, &ds, None).unwrap();
            for (p, q) in a.periods.iter().zip(&b.periods) {
                prop_assert_eq!(p.long_short.unwrap(), -q.long_short.unwrap());
                prop_assert_eq!(p.deciles[0], q.deciles[9]);
                prop_assert_eq!(p.deciles[9], q.deciles[0]);
            }
        }
    }
}

//! Decile portfolios from a noisy signal: returns by decile, long-short stats
//! and the ranking metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankic::dataset::{Group, GroupedDataset};
use rankic::evaluate::{decile_backtest, evaluate_scores, write_deciles_csv};

fn main() -> rankic::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut groups = Vec::new();
    let mut scores = Vec::new();
    for month in 0..60 {
        let signal: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let returns: Vec<f64> = signal.iter().map(|s| 0.005 * s + rng.random_range(-0.08..0.08)).collect();
        groups.push(Group::new(format!("m{month:02}"), 1, signal.clone(), returns, None)?);
        scores.push(signal);
    }
    let ds = GroupedDataset::new(groups, None)?;

    let (_, metrics) = evaluate_scores(&scores, &ds, 30)?;
    println!(
        "mean IC {:.4}  ICIR {:.3}  NDCG@30 {:.4}",
        metrics.mean_ic,
        metrics.icir.unwrap(),
        metrics.ndcg_at_k.unwrap()
    );
    let report = decile_backtest(&scores, &ds, None)?;
    write_deciles_csv(&report, std::io::stdout())?;
    Ok(())
}

//! Per-item gradients and hessians of every objective on one small group.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rankic::dataset::Group;
use rankic::objectives::{grad_hess_lambda, grad_hess_squared_error, lambda_pairs, ObjectiveConfig, ObjectiveKind};

fn main() -> rankic::Result<()> {
    let labels = vec![0.05, -0.02, 0.10, 0.00, -0.08];
    let scores = vec![0.3, 0.1, -0.2, 0.0, 0.4];
    let group = Group::new("2020-01", 1, vec![0.0; 5], labels.clone(), None)?;
    let ranks = group.label_ranks();
    let cfg = ObjectiveConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let mse = grad_hess_squared_error(&scores, &labels)?;
    println!("{:>9} g = {:?}", "mse", round(&mse.g));
    for kind in [ObjectiveKind::LambdaPairwise, ObjectiveKind::LambdaNdcg, ObjectiveKind::LambdaRankIc] {
        let gh = grad_hess_lambda(&group, &ranks, &scores, kind, &cfg, &mut rng)?;
        println!("{kind:>9} g = {:?}  sum = {:+.1e}", round(&gh.g), gh.g.iter().sum::<f64>());
    }

    // the pair with the largest rank-gap product dominates under rankic
    let pairs = lambda_pairs(&group, &ranks, &scores, ObjectiveKind::LambdaRankIc, &cfg)?;
    let top = pairs.iter().max_by(|a, b| a.lambda.abs().total_cmp(&b.lambda.abs())).unwrap();
    println!("largest pair: items {} > {}, delta {:.3}, lambda {:.4}", top.hi, top.lo, top.delta, top.lambda);
    Ok(())
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}

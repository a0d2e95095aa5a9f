//! Train with the Rank-IC objective on a noisy simulated panel and report the
//! test curve's peak.

use rankic::gbdt::{fit, EvalMetric, Objective, TrainConfig};
use rankic::objectives::ObjectiveKind;
use rankic::simulate::{gen_linear_panel, Preset, SnrLevel};

fn main() -> rankic::Result<()> {
    let mut dgp = Preset::SnrSweep(SnrLevel::Medium).config(1);
    dgp.n = 200;
    dgp.p = 10;
    let panel = gen_linear_panel(&dgp)?;
    let (train, test) = panel.split();
    let test = test.expect("panel has test periods");

    let cfg = TrainConfig { max_depth: 6, learning_rate: 0.1, num_rounds: 100, eval_every: 10, ..Default::default() };
    let (forest, history) = fit(&train, &Objective::new(ObjectiveKind::LambdaRankIc), &cfg, &[("test", &test)])?;

    for (round, ic) in history.series("test", EvalMetric::MeanRankIc) {
        println!("round {round:>4}  test rank IC {ic:.4}");
    }
    let (round, ic) = history.peak("test", EvalMetric::MeanRankIc).unwrap();
    println!("{} trees, peak {ic:.4} at round {round}", forest.trees.len());
    Ok(())
}

//! Peak test Rank IC of four objectives on a heavy-tailed, low-SNR panel.
//!
//! A desk-sized version of the simulation study; pass a seed count as the first
//! argument (default 2).

use rankic::gbdt::{fit, EvalMetric, Objective, TrainConfig};
use rankic::objectives::ObjectiveKind;
use rankic::simulate::{gen_linear_panel, Preset, SnrLevel};

fn main() -> rankic::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    println!("{:>9} {:>6} {:>9} {:>6}", "objective", "seed", "peak IC", "round");
    for seed in 0..seeds {
        let mut dgp = Preset::HeavyTail(SnrLevel::Low).config(seed);
        dgp.n = 150;
        let panel = gen_linear_panel(&dgp)?;
        let (train, test) = panel.split();
        let test = test.unwrap();
        for kind in ObjectiveKind::ALL {
            let cfg = TrainConfig { max_depth: 6, num_rounds: 80, seed, ..Default::default() };
            let (_, h) = fit(&train, &Objective::new(kind), &cfg, &[("test", &test)])?;
            let (round, ic) = h.peak("test", EvalMetric::MeanRankIc).unwrap();
            println!("{:>9} {seed:>6} {ic:>9.4} {round:>6}", kind.to_string());
        }
    }
    Ok(())
}

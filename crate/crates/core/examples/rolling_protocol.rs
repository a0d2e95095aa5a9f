//! Walk-forward evaluation: tune depth on each validation segment, score the
//! following test periods, then aggregate the out-of-sample predictions.

use rankic::dataset::rolling_windows;
use rankic::evaluate::{run_protocol, ProtocolConfig, TuningGrid};
use rankic::gbdt::TrainConfig;
use rankic::simulate::{gen_linear_panel, Preset, SnrLevel};

fn main() -> rankic::Result<()> {
    let mut dgp = Preset::SnrSweep(SnrLevel::High).config(3);
    dgp.n = 100;
    dgp.p = 5;
    dgp.t = 48;
    dgp.train_periods = 48;
    let ds = gen_linear_panel(&dgp)?.dataset;

    let plan = rolling_windows(ds.num_groups(), 24, 6, 6, 6)?;
    let cfg = ProtocolConfig {
        train: TrainConfig { num_rounds: 40, ..Default::default() },
        tuning: TuningGrid { max_depth: vec![2, 4, 6], ..Default::default() },
        ndcg_k: 20,
        ..Default::default()
    };
    let out = run_protocol(&ds, &plan, &cfg)?;
    for w in &out.windows {
        println!(
            "test {:?}: depth {} (validation IC {:.4})",
            w.window.test,
            w.chosen.max_depth,
            w.validation_ic.unwrap()
        );
    }
    let m = &out.metrics;
    println!("out-of-sample: mean IC {:.4}, std {:.4}, {} groups", m.mean_ic, m.std_ic.unwrap(), m.groups_evaluated);
    println!("H-L mean {:.2}% per period", out.backtest.long_short.mean_pct);
    Ok(())
}

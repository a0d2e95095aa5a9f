//! Models round-trip through JSON without changing a single prediction bit.

use rankic::gbdt::{fit, load_model, predict_dataset, save_model, Objective, TrainConfig};
use rankic::simulate::{gen_linear_panel, DGPConfig};

fn main() -> rankic::Result<()> {
    let panel = gen_linear_panel(&DGPConfig { t: 10, n: 50, p: 4, train_periods: 8, ..Default::default() })?;
    let (train, test) = panel.split();
    let cfg = TrainConfig { max_depth: 4, num_rounds: 20, ..Default::default() };
    let (forest, _) = fit(&train, &Objective::default(), &cfg, &[])?;

    let path = std::env::temp_dir().join("rankic-model.json");
    save_model(&forest, &path)?;
    let loaded = load_model(&path)?;
    let test = test.unwrap();
    let same = predict_dataset(&forest, &test)? == predict_dataset(&loaded, &test)?;
    println!("saved {} trees to {}; identical predictions: {same}", loaded.trees.len(), path.display());
    Ok(())
}

//! Generate the heavy-tailed low-SNR panel and write it next to its metadata.

use rankic::simulate::{export_panel, gen_linear_panel, Preset, SnrLevel};

fn main() -> rankic::Result<()> {
    let mut cfg = Preset::HeavyTail(SnrLevel::Low).config(7);
    cfg.n = 100;
    let panel = gen_linear_panel(&cfg)?;
    println!(
        "{} groups x {} items, {} features, realised SNR {:.4}",
        panel.dataset.num_groups(),
        cfg.n,
        cfg.p,
        panel.realized_snr.unwrap()
    );
    let dir = std::env::temp_dir().join("rankic-panel");
    std::fs::create_dir_all(&dir).map_err(|e| rankic::Error::Domain(e.to_string()))?;
    export_panel(&panel, dir.join("panel.csv"), dir.join("panel.meta.json"))?;
    println!("wrote {}", dir.display());
    Ok(())
}

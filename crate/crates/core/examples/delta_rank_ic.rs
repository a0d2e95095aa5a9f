//! How much does swapping two items move Spearman's rho?
//!
//! Run with `cargo run --example delta_rank_ic`.

use rankic::dataset::LabelRanks;
use rankic::rankcore::{delta_rank_ic, spearman_rho, PredictedRanks};

fn main() -> rankic::Result<()> {
    let labels = LabelRanks::from_permutation(vec![1, 2, 3, 4, 5, 6])?;
    let predicted = PredictedRanks::from_permutation(vec![2, 1, 3, 6, 5, 4])?;
    let n = labels.len();
    let rho = spearman_rho(&predicted, &labels)?;
    println!("rho = {rho:.4}");

    for (i, j) in [(0, 1), (3, 5), (0, 5)] {
        let mut swapped = predicted.to_vec();
        swapped.swap(i, j);
        let after = spearman_rho(&PredictedRanks::from_permutation(swapped)?, &labels)?;
        let closed_form = delta_rank_ic(predicted[i], predicted[j], labels[i], labels[j], n)?;
        println!(
            "swap ({i},{j}): rho {rho:.4} -> {after:.4}, |change| {:.4}, closed form {closed_form:.4}",
            (after - rho).abs()
        );
    }
    Ok(())
}

//! Load a grouped CSV, rank-transform its features and lay out rolling windows.

use rankic::dataset::{rank_transform_features, read_csv, rolling_windows, CsvSchema};

const DATA: &str = "\
date,ret,size,value,momentum
2020-01,0.02,10.5,0.3,-0.1
2020-01,-0.01,8.0,0.9,0.2
2020-01,0.04,12.1,0.1,0.5
2020-02,0.00,10.7,0.2,0.0
2020-02,0.03,7.9,1.1,0.3
2020-02,-0.02,12.0,0.4,-0.4
";

fn main() -> rankic::Result<()> {
    let schema = CsvSchema { group_col: "date".into(), label_col: "ret".into(), ..Default::default() };
    let ds = read_csv(DATA.as_bytes(), &schema)?;
    println!("{} groups, {} features: {:?}", ds.num_groups(), ds.num_features(), ds.feature_names_or_default());

    let ranked = rank_transform_features(&ds);
    for g in ranked.groups() {
        println!("{}: {:?}", g.id(), g.features());
    }

    // 240 monthly groups: 120 train, 24 validation, 12 test, rolled yearly
    let plan = rolling_windows(240, 120, 24, 12, 12)?;
    println!("{} windows; first {:?}, last {:?}", plan.windows.len(), plan.windows[0], plan.windows.last().unwrap());
    Ok(())
}

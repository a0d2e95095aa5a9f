//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any fails. Pass criterion numbers as arguments to run a subset:
//! `cargo test --release --test acceptance -- 1 2 3`.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankic::dataset::{Group, GroupedDataset, LabelRanks};
use rankic::evaluate::{decile_backtest, max_drawdown};
use rankic::gbdt::{fit, EvalMetric, Objective, TrainConfig};
use rankic::objectives::ObjectiveKind;
use rankic::rankcore::{
    delta_rank_ic, lambda_rank_ic_loss, logistic_surrogate_loss, ndcg_at_k, rank_ic_loss, SigmoidShape,
};
use rankic::simulate::{gen_linear_panel, DGPConfig, Preset, SnrLevel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Classic Spearman formula on two rank vectors.
fn rho_oracle(a: &[u32], b: &[u32]) -> f64 {
    let n = a.len() as f64;
    let d2: f64 = a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Descending ranks by a full sort (values assumed distinct).
fn argsort_ranks(v: &[f64]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[j].total_cmp(&v[i]));
    let mut r = vec![0u32; v.len()];
    for (pos, &i) in idx.iter().enumerate() {
        r[i] = pos as u32 + 1;
    }
    r
}

fn random_perm(n: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut p: Vec<u32> = (1..=n as u32).collect();
    p.shuffle(rng);
    p
}

fn distinct_values(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        if s.windows(2).all(|w| w[0] != w[1]) {
            return v;
        }
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.random_range(2..=50);
        let pred = random_perm(n, &mut rng);
        let labels = random_perm(n, &mut rng);
        let i = rng.random_range(0..n);
        let j = loop {
            let j = rng.random_range(0..n);
            if j != i {
                break j;
            }
        };
        let mut swapped = pred.clone();
        swapped.swap(i, j);
        let oracle = (rho_oracle(&swapped, &labels) - rho_oracle(&pred, &labels)).abs();
        let closed = delta_rank_ic(pred[i], pred[j], labels[i], labels[j], n).unwrap();
        worst = worst.max((oracle - closed).abs());
    }
    let t = start.elapsed();
    outcome(worst <= 1e-12 && t < Duration::from_secs(5), format!("10000 tuples, max |error| {worst:.2e}, {t:.2?}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let n = rng.random_range(2..=200);
        let scores = distinct_values(n, &mut rng);
        let y = distinct_values(n, &mut rng);
        let labels = LabelRanks::from_permutation(argsort_ranks(&y)).unwrap();
        let loss = rank_ic_loss(&scores, &labels).unwrap();
        let oracle = 1.0 - rho_oracle(&argsort_ranks(&scores), &labels);
        worst = worst.max((loss - oracle).abs());
    }
    let t = start.elapsed();
    outcome(worst <= 1e-12 && t < Duration::from_secs(10), format!("1000 instances, max |error| {worst:.2e}, {t:.2?}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sigma = SigmoidShape::new(1.0).unwrap();
    let mut violations = 0;
    for _ in 0..1_000 {
        let n = rng.random_range(2..=200);
        let scores = distinct_values(n, &mut rng);
        let labels = LabelRanks::from_permutation(random_perm(n, &mut rng)).unwrap();
        let one_minus_rho = 1.0 - rho_oracle(&argsort_ranks(&scores), &labels);
        let l_sg = logistic_surrogate_loss(&scores, &labels, sigma).unwrap();
        let l_c = lambda_rank_ic_loss(&scores, &labels, sigma).unwrap();
        let exact_one_minus_rho = rank_ic_loss(&scores, &labels).unwrap();
        if !(exact_one_minus_rho <= l_sg && l_sg <= l_c) || (one_minus_rho - exact_one_minus_rho).abs() > 1e-12 {
            violations += 1;
        }
    }
    let t = start.elapsed();
    outcome(violations == 0 && t < Duration::from_secs(10), format!("1000 instances, {violations} violations, {t:.2?}"))
}

struct Tier {
    name: &'static str,
    n: usize,
    rounds: usize,
    threshold: f64,
}

fn noiseless_seed(seed: u64, tier: &Tier) -> (f64, f64) {
    let dgp = DGPConfig { n: tier.n, seed, ..Preset::Noiseless.config(seed) };
    let panel = gen_linear_panel(&dgp).unwrap();
    let (train, test) = panel.split();
    let test = test.unwrap();
    let cfg = TrainConfig { max_depth: 6, learning_rate: 0.01, num_rounds: tier.rounds, seed, ..Default::default() };
    let (_, h) = fit(&train, &Objective::new(ObjectiveKind::LambdaRankIc), &cfg, &[("test", &test)]).unwrap();
    let (_, best) = h.peak("test", EvalMetric::MeanRankIc).unwrap();
    let gap = h.final_value("train", EvalMetric::MeanRankIc).unwrap()
        - h.final_value("test", EvalMetric::MeanRankIc).unwrap();
    (best, gap)
}

fn criterion_4() -> Outcome {
    let full = Tier { name: "full (N=500, 1000 rounds)", n: 500, rounds: 1000, threshold: 0.90 };
    let reduced = Tier { name: "reduced (N=200, 300 rounds)", n: 200, rounds: 300, threshold: 0.85 };
    // the budget is stated for four cores; scale it to the cores available here
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get()).min(4);
    let budget = Duration::from_secs(30 * 60 * 4 / cores as u64);
    let start = Instant::now();
    let first = noiseless_seed(0, &full);
    let projected = start.elapsed() * 10;
    let (tier, mut results) = if projected <= budget { (&full, vec![first]) } else { (&reduced, Vec::new()) };
    for seed in results.len() as u64..10 {
        results.push(noiseless_seed(seed, tier));
    }
    let mean_best = results.iter().map(|r| r.0).sum::<f64>() / 10.0;
    let mean_gap = results.iter().map(|r| r.1).sum::<f64>() / 10.0;
    let max_gap = results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let t = start.elapsed();
    outcome(
        mean_best >= tier.threshold && mean_gap <= 0.05,
        format!(
            "tier {}: mean best test IC {mean_best:.4} (>= {}), mean final gap {mean_gap:.4} (max {max_gap:.4}, <= 0.05), projected {:.0?} vs budget {:.0?}, took {t:.0?}",
            tier.name, tier.threshold, projected, budget
        ),
    )
}

/// Peak test IC and peak round for each objective, per seed, on the low-SNR heavy-tail panel.
fn low_snr_runs() -> Vec<[(f64, usize); 3]> {
    (0..10u64)
        .map(|seed| {
            let dgp = DGPConfig { n: 250, ..Preset::HeavyTail(SnrLevel::Low).config(seed) };
            let panel = gen_linear_panel(&dgp).unwrap();
            let (train, test) = panel.split();
            let test = test.unwrap();
            let cfg = TrainConfig { max_depth: 8, learning_rate: 0.1, num_rounds: 300, seed, ..Default::default() };
            let mut row = [(0.0, 0); 3];
            for (k, kind) in [ObjectiveKind::LambdaRankIc, ObjectiveKind::SquaredError, ObjectiveKind::LambdaNdcg]
                .into_iter()
                .enumerate()
            {
                let (_, h) = fit(&train, &Objective::new(kind), &cfg, &[("test", &test)]).unwrap();
                let (round, ic) = h.peak("test", EvalMetric::MeanRankIc).unwrap();
                row[k] = (ic, round);
            }
            println!(
                "      seed {seed}: rankic {:.4}@{}  mse {:.4}@{}  ndcg {:.4}@{}",
                row[0].0, row[0].1, row[1].0, row[1].1, row[2].0, row[2].1
            );
            row
        })
        .collect()
}

fn criterion_5(runs: &[[(f64, usize); 3]], elapsed: Duration) -> Outcome {
    let mean = |k: usize| runs.iter().map(|r| r[k].0).sum::<f64>() / runs.len() as f64;
    let (rankic, mse, ndcg) = (mean(0), mean(1), mean(2));
    let wins = runs.iter().filter(|r| r[0].0 > r[1].0 && r[0].0 > r[2].0).count();
    outcome(
        rankic > mse && rankic > ndcg && wins >= 7,
        format!(
            "seed-mean peak test IC rankic {rankic:.4}, mse {mse:.4}, ndcg {ndcg:.4}; rankic best on {wins}/10 seeds (>= 7), took {elapsed:.0?}"
        ),
    )
}

fn criterion_6(runs: &[[(f64, usize); 3]]) -> Outcome {
    let mean_round = |k: usize| runs.iter().map(|r| r[k].1 as f64).sum::<f64>() / runs.len() as f64;
    let (rankic, mse) = (mean_round(0), mean_round(1));
    outcome(mse < rankic, format!("seed-mean peak round mse {mse:.1} vs rankic {rankic:.1}"))
}

fn dcg_oracle(order: &[usize], grades: &[u32], k: usize) -> f64 {
    order
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, &i)| (2f64.powi(grades[i] as i32) - 1.0) / ((pos + 2) as f64).log2())
        .sum()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let n = rng.random_range(1..=100);
        let scores = distinct_values(n, &mut rng);
        let grades: Vec<u32> = (0..n).map(|_| rng.random_range(0..32)).collect();
        for k in [1, 10, n] {
            let mut by_score: Vec<usize> = (0..n).collect();
            by_score.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            let mut ideal: Vec<usize> = (0..n).collect();
            ideal.sort_by(|&a, &b| grades[b].cmp(&grades[a]));
            let idcg = dcg_oracle(&ideal, &grades, k);
            let oracle = if idcg == 0.0 { 1.0 } else { dcg_oracle(&by_score, &grades, k) / idcg };
            worst = worst.max((ndcg_at_k(&scores, &grades, k).unwrap() - oracle).abs());
        }
    }
    outcome(worst <= 1e-12, format!("3000 evaluations, max |error| {worst:.2e}"))
}

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

fn criterion_8() -> Outcome {
    // asset i scores i; its return is slope_t * 0.001 * i + shift_t; deciles hold assets {2d-2, 2d-1}
    let slope = [1.0, -1.0, 2.0];
    let shift = [0.01, -0.03, 0.02];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut groups = Vec::new();
    let mut scores = Vec::new();
    for t in 0..3 {
        let mut assets: Vec<usize> = (0..20).collect();
        assets.shuffle(&mut rng);
        let returns = assets.iter().map(|&i| slope[t] * 0.001 * i as f64 + shift[t]).collect();
        groups.push(Group::new(format!("t{t}"), 1, vec![0.0; 20], returns, None).unwrap());
        scores.push(assets.iter().map(|&i| i as f64).collect::<Vec<f64>>());
    }
    let ds = GroupedDataset::new(groups, None).unwrap();
    let r = decile_backtest(&scores, &ds, None).unwrap();

    let mut errs: Vec<f64> = Vec::new();
    for d in 1..=10 {
        // slopes average to 2/3, shifts to 0
        let hand = (2.0 * d as f64 - 1.5) / 15.0;
        errs.push((r.deciles[d - 1].mean_pct - hand).abs());
    }
    let hl = [0.018, -0.018, 0.036];
    for (p, h) in r.periods.iter().zip(hl) {
        errs.push((p.long_short.unwrap() - h).abs());
    }
    let ls = &r.long_short;
    // deviations from the 0.012 mean are 0.006, -0.030, 0.024; sum of squares 1.512e-3 over 2
    let hand_vol = 7.56e-4f64.sqrt();
    errs.push((ls.mean_pct - 1.2).abs());
    errs.push((ls.vol_pct.unwrap() - 100.0 * hand_vol).abs());
    errs.push((ls.sharpe.unwrap() - 0.012 / hand_vol * 12f64.sqrt()).abs());
    errs.push((ls.mdd_pct - 1.8).abs());
    // decile 1 returns 0.0105, -0.0305, 0.021; decile 10 returns 0.0285, -0.0485, 0.057
    errs.push((r.deciles[0].mdd_pct - 3.05).abs());
    errs.push((r.deciles[9].mdd_pct - 4.85).abs());
    let d10_mean: f64 = 0.037 / 3.0;
    let d10_ss = (0.0285 - d10_mean).powi(2) + (-0.0485 - d10_mean).powi(2) + (0.057 - d10_mean).powi(2);
    errs.push((r.deciles[9].sharpe.unwrap() - d10_mean / (d10_ss / 2.0).sqrt() * 12f64.sqrt()).abs());
    let hand_err = errs.iter().copied().fold(0.0, f64::max);

    let mut mdd_err = 0.0f64;
    for _ in 0..1_000 {
        let len = rng.random_range(0..80);
        let series: Vec<f64> = (0..len).map(|_| rng.random_range(-0.3..0.3)).collect();
        mdd_err = mdd_err.max((max_drawdown(&series) - brute_force_mdd(&series)).abs());
    }
    outcome(
        hand_err <= 1e-10 && mdd_err <= 1e-10,
        format!(
            "hand-built panel max |error| {hand_err:.2e}; MDD vs brute force on 1000 series max |error| {mdd_err:.2e}"
        ),
    )
}

fn cli(args: &[&str]) -> i32 {
    rankic::cli::main_with_args(std::iter::once("rankic").chain(args.iter().copied()))
}

fn criterion_9(dir: &Path) -> Outcome {
    let sim = dir.join("c9-sim");
    if cli(&[
        "simulate",
        "--periods",
        "12",
        "--items",
        "100",
        "--features",
        "5",
        "--train-periods",
        "8",
        "--out",
        sim.to_str().unwrap(),
    ]) != 0
    {
        return outcome(false, "simulate failed".into());
    }
    let data = sim.join("panel.csv");
    let mut models = Vec::new();
    for k in 0..2 {
        let out = dir.join(format!("c9-train{k}"));
        let code = cli(&[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--train-periods",
            "8",
            "--rounds",
            "30",
            "--seed",
            "7",
            "--threads",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        if code != 0 {
            return outcome(false, format!("train run {k} exited {code}"));
        }
        models.push(std::fs::read(out.join("model.json")).unwrap());
    }
    outcome(
        models[0] == models[1],
        format!("two runs, model.json {} bytes, identical: {}", models[0].len(), models[0] == models[1]),
    )
}

fn criterion_10(dir: &Path) -> Outcome {
    let out = dir.join("c10");
    let code = cli(&[
        "backtest",
        "--periods",
        "30",
        "--items",
        "60",
        "--features",
        "4",
        "--train-len",
        "10",
        "--test-len",
        "10",
        "--step",
        "10",
        "--rounds",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    if code != 0 {
        return outcome(false, format!("backtest exited {code}"));
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    let summary_cols = ["mean_ic", "std_ic", "icir", "ndcg_at_k", "return_pct", "vol_pct", "sharpe", "mdd_pct"];
    let missing: Vec<&str> = summary_cols.iter().copied().filter(|c| metrics["summary"].get(c).is_none()).collect();
    let ndcg_k_ok = metrics["summary"]["ndcg_k"] == 100;

    let mut rdr = csv::Reader::from_path(out.join("deciles.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_string()).collect();
    let decile_cols = ["ret_pct", "vol_pct", "sharpe", "mdd_pct"].iter().all(|c| header.iter().any(|h| h == c));
    let mut expected: Vec<String> = (1..=10).map(|d| d.to_string()).collect();
    expected.push("H-L".into());
    let files = ["cumulative.csv", "ic_series.csv", "config.resolved"].iter().all(|f| out.join(f).exists());
    outcome(
        missing.is_empty() && ndcg_k_ok && decile_cols && rows == expected && files,
        format!(
            "summary columns missing {missing:?}, NDCG@100 {ndcg_k_ok}, decile columns {decile_cols}, rows 1..10+H-L {}, companion files {files}",
            rows == expected
        ),
    )
}

fn report(id: u32, name: &str, o: &Outcome) -> bool {
    println!("[{}] criterion {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() {
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |id: u32| picked.is_empty() || picked.contains(&id);
    let dir = tempfile::tempdir().unwrap();
    let mut all = true;

    if want(1) {
        all &= report(1, "delta rank IC vs swap oracle", &criterion_1());
    }
    if want(2) {
        all &= report(2, "rank IC loss equals 1 - rho", &criterion_2());
    }
    if want(3) {
        all &= report(3, "surrogate bound chain", &criterion_3());
    }
    if want(4) {
        all &= report(4, "noiseless convergence", &criterion_4());
    }
    if want(5) || want(6) {
        let start = Instant::now();
        let runs = low_snr_runs();
        let elapsed = start.elapsed();
        if want(5) {
            all &= report(5, "low-SNR objective ordering", &criterion_5(&runs, elapsed));
        }
        if want(6) {
            all &= report(6, "mse peaks earlier than rankic", &criterion_6(&runs));
        }
    }
    if want(7) {
        all &= report(7, "NDCG@k vs brute force", &criterion_7());
    }
    if want(8) {
        all &= report(8, "backtest oracle", &criterion_8());
    }
    if want(9) {
        all &= report(9, "single-thread determinism", &criterion_9(dir.path()));
    }
    if want(10) {
        all &= report(10, "real-data substitute: report format parity", &criterion_10(dir.path()));
    }
    if !all {
        std::process::exit(1);
    }
}

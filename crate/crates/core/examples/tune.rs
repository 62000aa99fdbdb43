//! Parameter-sweep harness for the synthetic learning loop. Not part of the
//! library surface; run with
//! `cargo run --release -p uplimit-core --example tune -- <n> <episodes> <alpha> <epsilon> <algo> <data_seed> <train_seed>`.

use uplimit_core::agents::{
    final_window_average, smooth, train, AgentConfig, Algo, GreedyPolicy, QTableSource,
    SMOOTHING_WINDOW,
};
use uplimit_core::agents::run_policy;
use uplimit_core::synth::{generate, oracle_value, SynthConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args[0].parse().unwrap();
    let episodes: usize = args[1].parse().unwrap();
    let alpha: f64 = args[2].parse().unwrap();
    let epsilon: f64 = args[3].parse().unwrap();
    let algo = Algo::parse(&args[4]).unwrap();
    let data_seed: u64 = args[5].parse().unwrap();
    let train_seed: u64 = args[6].parse().unwrap();

    let data = generate(&SynthConfig {
        n_customers: n,
        n_defaulters: 0,
        seed: data_seed,
        ..SynthConfig::default()
    })
    .unwrap();
    let oracle = oracle_value(&data.portfolio, &data.truth);

    let cfg = AgentConfig {
        algo,
        alpha,
        epsilon,
        episodes,
        seed: train_seed,
        ..AgentConfig::default()
    };
    let t0 = std::time::Instant::now();
    let trained = train(&data.portfolio, &data.truth, &cfg, 0).unwrap();
    let secs = t0.elapsed().as_secs_f64();

    let smoothed = smooth(&trained.episode_returns, SMOOTHING_WINDOW);
    let final50 = final_window_average(&smoothed, 50);
    let policy = GreedyPolicy::from_tables(&trained.tables, QTableSource::Q1);
    let eval = run_policy(&data.portfolio, &data.truth, &cfg.grid, 999, |_, s| {
        policy.action(s)
    })
    .unwrap();
    println!(
        "n={n} ep={episodes} a={alpha} e={epsilon} {} seed={train_seed} oracle={oracle:.1} final50={:.3} greedy_q1={:.3} states={} secs={secs:.1}",
        algo.name(),
        final50 / oracle,
        eval.total / oracle,
        trained.tables.n_states(),
    );

    // Per-archetype disagreement accounting for the greedy evaluation.
    use std::collections::HashMap;
    use uplimit_core::env::Action;
    use uplimit_core::synth::increase_reward;
    let by_id: HashMap<&str, &uplimit_core::portfolio::CustomerRecord> = data
        .portfolio
        .customers
        .iter()
        .map(|r| (r.customer_id.as_str(), r))
        .collect();
    let mut lost: HashMap<(String, &'static str), (usize, f64)> = HashMap::new();
    let mut unmapped = 0usize;
    for d in &eval.decisions {
        let rec = by_id[d.customer_id.as_str()];
        let truth = data.truth.get(&d.customer_id).unwrap();
        let arch = truth.archetype.clone();
        let r_inc = increase_reward(rec, &data.truth, &data.portfolio.params);
        let oracle_action = if r_inc > 0.0 { Action::Increase } else { Action::Maintain };
        if !policy.contains(&d.state) {
            unmapped += 1;
        }
        if d.action != oracle_action {
            let kind = if oracle_action == Action::Increase { "missed_inc" } else { "bad_inc" };
            let e = lost.entry((arch, kind)).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += r_inc.abs();
        }
    }
    let mut rows: Vec<_> = lost.into_iter().collect();
    rows.sort_by(|a, b| b.1 .1.partial_cmp(&a.1 .1).unwrap());
    for ((arch, kind), (count, value)) in rows {
        println!("  {arch:>14} {kind}: {count:4} customers, {:.1}% of oracle", 100.0 * value / oracle);
    }
    println!("  states not in policy table: {unmapped}");
}

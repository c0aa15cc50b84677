//! English-pipeline dry run: trains on the built-in grammar corpus and
//! prints the stratified interdependence trends criterion-style.

use gatescope::engen::{self, EngenConfig};
use gatescope::plan::{ExperimentPlan, Preset};
use gatescope::presets::{pooled_syndist_means, run_fig9};
use gatescope::stats::spearman;
use gatescope_core::ud::write_conllu;
use std::time::Instant;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let epochs: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let t0 = Instant::now();
    let dir = std::env::temp_dir().join(format!("gatescope_en_{seed}"));
    std::fs::create_dir_all(&dir).unwrap();

    let data = engen::generate(&EngenConfig {
        train_tokens: 400_000,
        treebank_sentences: 6_000,
        seed,
    });
    let corpus_path = dir.join("corpus.txt");
    let conllu_path = dir.join("treebank.conllu");
    std::fs::write(&corpus_path, &data.corpus_text).unwrap();
    std::fs::write(&conllu_path, write_conllu(&data.treebank)).unwrap();
    println!("[{:6.1}s] data generated", t0.elapsed().as_secs_f64());

    let mut plan = ExperimentPlan::desk_default(Preset::Fig9).with_seed(seed);
    plan.corpus_path = Some(corpus_path);
    plan.conllu_path = Some(conllu_path);
    plan.train.epochs = epochs;
    plan.schedule = vec![epochs];
    let out = run_fig9(&plan).unwrap();
    println!(
        "[{:6.1}s] fig9 done: {} records, {} skipped pairs, final loss {:.3}",
        t0.elapsed().as_secs_f64(),
        out.records.len(),
        out.skipped_pairs,
        out.checkpoint.metrics.train_loss
    );

    let overall = &out.series[0];
    println!("overall by seq_dist: x {:?} y {:?}", overall.x,
        overall.y_mean.iter().map(|y| format!("{y:.4}")).collect::<Vec<_>>());

    for s in 2..=5 {
        let cells = pooled_syndist_means(&out.records, s, plan.min_cases);
        let xs: Vec<f64> = cells.iter().map(|c| c.0 as f64).collect();
        let ys: Vec<f64> = cells.iter().map(|c| c.1).collect();
        let rho = spearman(&xs, &ys);
        println!(
            "seq_dist {s}: {} cells {:?} means {:?} rho {:.3}",
            cells.len(),
            cells.iter().map(|c| c.0).collect::<Vec<_>>(),
            ys.iter().map(|y| format!("{y:.4}")).collect::<Vec<_>>(),
            rho
        );
    }
    println!("[{:6.1}s] total", t0.elapsed().as_secs_f64());
}

//! Per-epoch profiles on the k=8 pair and a 40-epoch grid probe.

use gatescope::plan::{ExperimentPlan, Preset};
use gatescope::presets::*;
use std::time::Instant;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let mode = std::env::args().nth(2).unwrap_or_else(|| "k8".to_string());
    let t0 = Instant::now();

    if mode == "k8" {
        let mut plan8 = ExperimentPlan::desk_default(Preset::Fig5).with_seed(seed);
        plan8.schedule = (1..=14).collect();
        let pair8 = run_synth_pair(&plan8).unwrap();
        println!("[{:6.1}s] k=8 pair trained, all epochs", t0.elapsed().as_secs_f64());
        for (i, &e) in plan8.schedule.iter().enumerate() {
            let mut line = format!("epoch {e:2}:");
            for run in pair8.runs() {
                let ck = &run.checkpoints[i];
                let (close_in, _) = mean_close_prob(&ck.params, &run.in_test, plan8.ctx_before).unwrap();
                let profile = mean_span_grad_profile(&ck.params, &run.in_test, plan8.ctx_before, 8).unwrap();
                let gmean: f64 = profile.iter().map(|p| p.0).sum::<f64>() / 8.0;
                line += &format!("  [{}] P(close|in)={close_in:.3} grad={gmean:.4}",
                    if run.setting == gatescope_core::synth::ConduitSetting::Familiar { "fam" } else { "unf" });
            }
            println!("{line}");
        }
        // fig5 curves on the in-domain test at the final epoch
        for run in pair8.runs() {
            let ck = run.final_checkpoint();
            let curve = mean_prefix_curve(&ck.params, &run.in_test, plan8.ctx_before, 8).unwrap();
            println!(
                "fig5-in {:10}: {:?} rise {:.4}",
                if run.setting == gatescope_core::synth::ConduitSetting::Familiar { "familiar" } else { "unfamiliar" },
                curve.iter().map(|p| (p.0 * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                curve.last().unwrap().0 - curve[0].0
            );
        }
    } else {
        // grid at 40 epochs
        let mut plang = ExperimentPlan::desk_default(Preset::Fig8Grid).with_seed(seed);
        plang.train.epochs = 40;
        plang.schedule = vec![40];
        let grid = run_fig8grid(&plang).unwrap();
        println!("[{:6.1}s] grid (40 epochs) trained", t0.elapsed().as_secs_f64());
        for s in &grid.series {
            println!("grid {} {:6}: n {:?} -> {:?}", s.metric, s.setting, s.x,
                s.y_mean.iter().map(|y| format!("{y:.5}")).collect::<Vec<_>>());
        }
    }
    println!("[{:6.1}s] total", t0.elapsed().as_secs_f64());
}

//! One-seed dry run of the synthetic replication suite, printing the
//! quantities the acceptance conditions compare.

use gatescope::plan::{ExperimentPlan, Preset};
use gatescope::presets::*;
use std::time::Instant;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(11);
    let t0 = Instant::now();

    // fig3/4/6 share the k=4 pair
    let plan4 = ExperimentPlan::desk_default(Preset::Fig3).with_seed(seed);
    let pair4 = run_synth_pair(&plan4).unwrap();
    println!("[{:6.1}s] k=4 pair trained (seed {seed})", t0.elapsed().as_secs_f64());

    let fig3 = fig3_series(&pair4, &plan4).unwrap();
    for s in &fig3 {
        println!(
            "fig3 {:10} {:3}: first {:.4} last {:.4}",
            s.setting, s.domain, s.y_mean[0], s.last_y().unwrap()
        );
    }
    let fig4 = fig4_series(&pair4, &plan4).unwrap();
    let chance = 1.0 / (plan4.synth.sigma_size + 3) as f64;
    for s in &fig4 {
        println!(
            "fig4 {:10}: first {:.4} last {:.4}  epoch>=10x chance({:.4}): {:?}",
            s.setting,
            s.y_mean[0],
            s.last_y().unwrap(),
            10.0 * chance,
            s.first_x_reaching(10.0 * chance)
        );
    }
    let fig6 = fig6_series(&pair4, &plan4).unwrap();
    for s in &fig6 {
        println!(
            "fig6 {:10}: first {:.4} last {:.4} (count {})",
            s.setting, s.y_mean[0], s.last_y().unwrap(), s.y_count[s.y_count.len()-1]
        );
    }
    println!("[{:6.1}s] k=4 evaluations done", t0.elapsed().as_secs_f64());

    // fig5/appB on the k=8 pair
    let plan8 = ExperimentPlan::desk_default(Preset::Fig5).with_seed(seed);
    let pair8 = run_synth_pair(&plan8).unwrap();
    println!("[{:6.1}s] k=8 pair trained", t0.elapsed().as_secs_f64());
    let fig5 = fig5_series(&pair8, &plan8).unwrap();
    for s in &fig5 {
        let rise = s.last_y().unwrap() - s.y_mean[0];
        println!(
            "fig5 {:10}: curve {:?} rise {:.4}",
            s.setting,
            s.y_mean.iter().map(|y| (y * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            rise
        );
    }
    let appb = appb_series(&pair8, &plan8).unwrap();
    for s in &appb {
        let mean: f64 = s.y_mean.iter().sum::<f64>() / s.y_mean.len() as f64;
        println!("appB {:10}: profile mean {:.5} per-offset {:?}", s.setting, mean,
            s.y_mean.iter().map(|y| (y * 1e4).round() / 1e4).collect::<Vec<_>>());
    }

    // grid
    let plang = ExperimentPlan::desk_default(Preset::Fig8Grid).with_seed(seed);
    let grid = run_fig8grid(&plang).unwrap();
    println!("[{:6.1}s] grid trained", t0.elapsed().as_secs_f64());
    for s in &grid.series {
        println!(
            "grid {} {:6}: n {:?} -> {:?}",
            s.metric,
            s.setting,
            s.x,
            s.y_mean.iter().map(|y| (y * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
    }
    println!("[{:6.1}s] total", t0.elapsed().as_secs_f64());
}

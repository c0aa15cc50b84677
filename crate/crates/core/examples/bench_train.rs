//! Rough training-throughput probe used to size experiment plans.

use gatescope_core::lm::{train, TrainConfig, Vocab};
use gatescope_core::math::Rng;
use std::time::Instant;

fn main() {
    let sigma = 300;
    let vocab = Vocab::synthetic(sigma);
    let mut rng = Rng::from_seed(1);
    let corpus: Vec<u32> = (0..150_000).map(|_| 3 + rng.below(sigma) as u32).collect();
    for (h, d) in [(48, 24), (64, 32), (96, 48), (128, 64)] {
        let cfg = TrainConfig {
            epochs: 1,
            hidden_dim: h,
            embed_dim: d,
            seed: 7,
            ..TrainConfig::default()
        };
        let start = Instant::now();
        let cks = train(&corpus, &vocab, &cfg).unwrap();
        let dt = start.elapsed().as_secs_f64();
        println!(
            "h={h:3} d={d:3}: {:.1}s/epoch = {:.1}k tokens/s (loss {:.3})",
            dt,
            corpus.len() as f64 / dt / 1000.0,
            cks[0].metrics.train_loss
        );
    }
}

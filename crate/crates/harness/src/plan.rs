//! Experiment plans: preset names, desk-scale defaults, validation.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::str::FromStr;

use gatescope_core::lm::TrainConfig;
use gatescope_core::synth::{ConduitSetting, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig8Grid,
    Fig9,
    AppB,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Fig6,
        Preset::Fig8Grid,
        Preset::Fig9,
        Preset::AppB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig8Grid => "fig8grid",
            Preset::Fig9 => "fig9",
            Preset::AppB => "appB",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown preset {s:?}; expected one of fig3, fig4, fig5, fig6, fig8grid, fig9, appB"))
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a preset run needs. Serializes as the `--config` JSON format
/// and as the sidecar written next to result files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub preset: Preset,
    /// Synthetic corpus family (synthetic presets).
    pub synth: SynthSpec,
    pub train: TrainConfig,
    /// Epochs (1-based) at which to evaluate; must be nonempty and within
    /// `train.epochs`.
    pub schedule: Vec<usize>,
    /// Background tokens kept before the open symbol in evaluation windows.
    #[serde(default = "default_ctx_before")]
    pub ctx_before: usize,
    /// Rule-count axis of the fig8grid preset.
    #[serde(default)]
    pub grid_n: Vec<usize>,
    /// Conduit-length axis of the fig8grid preset.
    #[serde(default)]
    pub grid_k: Vec<usize>,
    /// Plain-text training corpus for the English pipeline.
    #[serde(default)]
    pub corpus_path: Option<PathBuf>,
    /// CoNLL-U treebank for the English pipeline.
    #[serde(default)]
    pub conllu_path: Option<PathBuf>,
    /// Pre-trained checkpoint to reuse instead of training (fig9).
    #[serde(default)]
    pub checkpoint_path: Option<PathBuf>,
    #[serde(default = "default_max_seq_dist")]
    pub max_seq_dist: usize,
    #[serde(default = "default_min_cases")]
    pub min_cases: usize,
    /// Cap on treebank sentences swept (0 = all).
    #[serde(default)]
    pub max_sentences: usize,
    pub out_dir: PathBuf,
}

fn default_ctx_before() -> usize {
    16
}

fn default_max_seq_dist() -> usize {
    5
}

fn default_min_cases() -> usize {
    100
}

impl ExperimentPlan {
    /// Desk-scale defaults: every ratio that drives the effects is kept from
    /// the full-scale setting (rule density, bank repeats, outside
    /// occurrences per conduit) while sizes stay CPU-friendly.
    pub fn desk_default(preset: Preset) -> ExperimentPlan {
        let synth = SynthSpec {
            sigma_size: 300,
            corpus_len: 200_000,
            n_rules: 300,
            conduit_len: 4,
            setting: ConduitSetting::Unfamiliar,
            bank_size: 30,
            in_rule_repeats: 10,
            outside_occurrences: 300,
            test_n_rules: 100,
            test_corpus_len: 30_000,
            seed: 1,
        };
        let train = TrainConfig {
            learning_rate: 1.0,
            clip_norm: 0.25,
            epochs: 20,
            bptt_len: 35,
            hidden_dim: 64,
            embed_dim: 32,
            momentum: 0.0,
            weight_decay: 0.0,
            seed: 1,
            forget_bias: 1.0,
        };
        let mut plan = ExperimentPlan {
            preset,
            synth,
            train,
            schedule: (1..=20).collect(),
            ctx_before: default_ctx_before(),
            grid_n: Vec::new(),
            grid_k: Vec::new(),
            corpus_path: None,
            conllu_path: None,
            checkpoint_path: None,
            max_seq_dist: default_max_seq_dist(),
            min_cases: default_min_cases(),
            max_sentences: 0,
            out_dir: PathBuf::from("out"),
        };
        match preset {
            Preset::Fig3 | Preset::Fig4 | Preset::Fig6 => {}
            Preset::Fig5 | Preset::AppB => {
                // longer conduit, prefix/gradient analyses need only later
                // checkpoints
                plan.synth.conduit_len = 8;
                plan.train.epochs = 14;
                plan.schedule = vec![7, 14];
            }
            Preset::Fig8Grid => {
                plan.synth.sigma_size = 150;
                plan.synth.corpus_len = 60_000;
                plan.synth.test_n_rules = 50;
                plan.synth.test_corpus_len = 15_000;
                plan.train.epochs = 12;
                plan.train.hidden_dim = 48;
                plan.train.embed_dim = 24;
                plan.schedule = vec![12];
                plan.grid_n = vec![12, 60, 300];
                plan.grid_k = vec![2, 4, 8];
            }
            Preset::Fig9 => {
                plan.train.epochs = 10;
                plan.train.hidden_dim = 64;
                plan.train.embed_dim = 64;
                plan.schedule = vec![10];
            }
        }
        plan
    }

    /// Seeds every stochastic component of the plan from one root seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.synth.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schedule.is_empty() {
            return Err("schedule must be nonempty".into());
        }
        if let Some(&max) = self.schedule.iter().max() {
            if max > self.train.epochs || self.schedule.iter().any(|&e| e == 0) {
                return Err(format!(
                    "schedule epochs must lie in 1..={}",
                    self.train.epochs
                ));
            }
        }
        match self.preset {
            Preset::Fig8Grid => {
                if self.grid_n.is_empty() || self.grid_k.is_empty() {
                    return Err("fig8grid requires grid_n and grid_k".into());
                }
            }
            Preset::Fig9 => {
                if self.checkpoint_path.is_none() && self.corpus_path.is_none() {
                    return Err("fig9 requires corpus_path or checkpoint_path".into());
                }
                if self.conllu_path.is_none() {
                    return Err("fig9 requires conllu_path".into());
                }
            }
            _ => {
                // synthetic presets: the training window must be able to span
                // a whole rule instance
                if self.train.bptt_len < self.synth.conduit_len + 2 {
                    return Err(format!(
                        "bptt_len {} shorter than rule span {}",
                        self.train.bptt_len,
                        self.synth.conduit_len + 2
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("fig12".parse::<Preset>().is_err());
        assert_eq!("APPB".parse::<Preset>().unwrap(), Preset::AppB);
    }

    #[test]
    fn desk_defaults_validate() {
        for p in Preset::ALL {
            let mut plan = ExperimentPlan::desk_default(p);
            if p == Preset::Fig9 {
                plan.corpus_path = Some("corpus.txt".into());
                plan.conllu_path = Some("treebank.conllu".into());
            }
            plan.validate().unwrap_or_else(|e| panic!("{p}: {e}"));
        }
    }

    #[test]
    fn familiar_bank_ratio_preserved_at_desk_scale() {
        let plan = ExperimentPlan::desk_default(Preset::Fig3);
        assert_eq!(
            plan.synth.bank_size * plan.synth.in_rule_repeats,
            plan.synth.n_rules
        );
    }

    #[test]
    fn plan_json_round_trip() {
        let plan = ExperimentPlan::desk_default(Preset::Fig5).with_seed(9);
        let json = serde_json::to_string_pretty(&plan).unwrap();
        let back: ExperimentPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back.synth.seed, 9);
        assert_eq!(back.preset, Preset::Fig5);
        assert_eq!(back.synth.conduit_len, 8);
    }

    #[test]
    fn bad_schedule_rejected() {
        let mut plan = ExperimentPlan::desk_default(Preset::Fig3);
        plan.schedule = vec![];
        assert!(plan.validate().is_err());
        plan.schedule = vec![0];
        assert!(plan.validate().is_err());
        plan.schedule = vec![99];
        assert!(plan.validate().is_err());
    }
}

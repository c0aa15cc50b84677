//! gatescope CLI: corpus generation, LM training, decomposition queries,
//! experiment presets, and treebank analysis.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};

use gatescope::engen::{self, EngenConfig};
use gatescope::plan::{ExperimentPlan, Preset};
use gatescope::presets;
use gatescope::series::{write_plan_sidecar, write_series_csv, write_strata_csv};
use gatescope_core::cd::{cd_run, FocusSet};
use gatescope_core::interdep::interdependence;
use gatescope_core::lm::{load_checkpoint, save_checkpoint, train, TrainConfig, Vocab};
use gatescope_core::math::softmax;
use gatescope_core::synth::{corpus_to_text, gen_tests, gen_train, ConduitSetting, SynthCorpus, SynthSpec};
use gatescope_core::ud::write_conllu;

#[derive(Parser)]
#[command(
    name = "gatescope",
    version,
    about = "Train small LSTM language models and dissect how they compose meaning"
)]
struct Cli {
    /// Root seed (overrides seeds in configs)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// JSON config file (SynthSpec for gen-synth, ExperimentPlan for run)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic rule corpus plus in/out-domain test sets
    GenSynth {
        #[arg(long)]
        sigma: Option<usize>,
        #[arg(long)]
        corpus_len: Option<usize>,
        #[arg(long)]
        rules: Option<usize>,
        #[arg(long, short = 'k')]
        conduit_len: Option<usize>,
        /// "unfamiliar" or "familiar"
        #[arg(long)]
        setting: Option<String>,
        #[arg(long)]
        bank: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        outside: Option<usize>,
        #[arg(long)]
        test_rules: Option<usize>,
        #[arg(long)]
        test_len: Option<usize>,
    },
    /// Train an LSTM language model on a whitespace-tokenized text corpus
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 128)]
        hidden: usize,
        #[arg(long, default_value_t = 128)]
        embed: usize,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 1.0)]
        lr: f64,
        #[arg(long, default_value_t = 0.25)]
        clip: f64,
        #[arg(long, default_value_t = 35)]
        bptt: usize,
        /// Drop types seen fewer times than this (mapped to <unk>)
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        /// Write a checkpoint after every epoch, not only the last
        #[arg(long)]
        save_all_epochs: bool,
    },
    /// Contextual decomposition of one prediction
    Decompose {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Whitespace-separated input tokens
        #[arg(long)]
        tokens: String,
        /// Comma-separated 0-based positions in focus
        #[arg(long)]
        focus: String,
        /// Evaluation timestep (0-based)
        #[arg(long)]
        at: usize,
        /// Report the relevant-logit probability of this token
        #[arg(long)]
        target: Option<String>,
    },
    /// Interdependence between two disjoint position sets
    Interdep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        tokens: String,
        /// Comma-separated positions of set A
        #[arg(long)]
        a: String,
        /// Comma-separated positions of set B
        #[arg(long)]
        b: String,
        #[arg(long)]
        at: usize,
    },
    /// Run an experiment preset (fig3|fig4|fig5|fig6|fig8grid|fig9|appB)
    Run { preset: Preset },
    /// Sweep word pairs over a CoNLL-U treebank with a trained model
    UdAnalyze {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        conllu: PathBuf,
        #[arg(long, default_value_t = 5)]
        max_seq_dist: usize,
        #[arg(long, default_value_t = 100)]
        min_cases: usize,
        #[arg(long, default_value_t = 0)]
        max_sentences: usize,
    },
    /// Generate the built-in English-like corpus and gold treebank
    GenEnglish {
        #[arg(long, default_value_t = 400_000)]
        tokens: usize,
        #[arg(long, default_value_t = 6_000)]
        sentences: usize,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {:?}", cli.out))?;
    match &cli.command {
        Command::GenSynth { .. } => gen_synth(&cli),
        Command::Train { .. } => run_train(&cli),
        Command::Decompose { .. } => decompose(&cli),
        Command::Interdep { .. } => interdep(&cli),
        Command::Run { .. } => run_preset(&cli),
        Command::UdAnalyze { .. } => ud_analyze(&cli),
        Command::GenEnglish { .. } => gen_english(&cli),
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {path:?}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {path:?}"))
}

fn parse_positions(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| anyhow!("bad position {p:?}"))
        })
        .collect()
}

fn write_corpus_files(
    dir: &Path,
    name: &str,
    corpus: &SynthCorpus,
    vocab: &Vocab,
    spec: &SynthSpec,
) -> Result<()> {
    fs::write(dir.join(format!("{name}.txt")), corpus_to_text(corpus, vocab))?;
    let meta = json!({
        "spec": spec,
        "rules": corpus.rules,
        "conduit_bank": corpus.conduit_bank,
    });
    fs::write(
        dir.join(format!("{name}.meta.json")),
        serde_json::to_string_pretty(&meta)?,
    )?;
    Ok(())
}

fn gen_synth(cli: &Cli) -> Result<()> {
    let Command::GenSynth {
        sigma,
        corpus_len,
        rules,
        conduit_len,
        setting,
        bank,
        repeats,
        outside,
        test_rules,
        test_len,
    } = &cli.command
    else {
        unreachable!()
    };
    let mut spec: SynthSpec = match &cli.config {
        Some(path) => load_json(path)?,
        None => SynthSpec::default(),
    };
    if let Some(v) = sigma {
        spec.sigma_size = *v;
    }
    if let Some(v) = corpus_len {
        spec.corpus_len = *v;
    }
    if let Some(v) = rules {
        spec.n_rules = *v;
    }
    if let Some(v) = conduit_len {
        spec.conduit_len = *v;
    }
    if let Some(s) = setting {
        spec.setting = match s.as_str() {
            "unfamiliar" => ConduitSetting::Unfamiliar,
            "familiar" => ConduitSetting::Familiar,
            other => bail!("setting must be 'unfamiliar' or 'familiar', got {other:?}"),
        };
    }
    if let Some(v) = bank {
        spec.bank_size = *v;
    }
    if let Some(v) = repeats {
        spec.in_rule_repeats = *v;
    }
    if let Some(v) = outside {
        spec.outside_occurrences = *v;
    }
    if let Some(v) = test_rules {
        spec.test_n_rules = *v;
    }
    if let Some(v) = test_len {
        spec.test_corpus_len = *v;
    }
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }

    let vocab = spec.vocab();
    let train_corpus = gen_train(&spec)?;
    let (in_test, out_test) = gen_tests(&spec, &train_corpus)?;
    write_corpus_files(&cli.out, "train", &train_corpus, &vocab, &spec)?;
    write_corpus_files(&cli.out, "test_in", &in_test, &vocab, &spec)?;
    write_corpus_files(&cli.out, "test_out", &out_test, &vocab, &spec)?;
    fs::write(cli.out.join("vocab.json"), vocab.to_json())?;
    println!(
        "wrote {} train tokens, 2 test sets of {} rules each to {:?}",
        train_corpus.tokens.len(),
        spec.test_n_rules,
        cli.out
    );
    Ok(())
}

fn run_train(cli: &Cli) -> Result<()> {
    let Command::Train {
        corpus,
        hidden,
        embed,
        epochs,
        lr,
        clip,
        bptt,
        min_count,
        save_all_epochs,
    } = &cli.command
    else {
        unreachable!()
    };
    let text = fs::read_to_string(corpus).with_context(|| format!("reading {corpus:?}"))?;
    let vocab = Vocab::from_text(&text, *min_count);
    let ids = vocab.encode(&text);
    let cfg = TrainConfig {
        learning_rate: *lr,
        clip_norm: *clip,
        epochs: *epochs,
        bptt_len: *bptt,
        hidden_dim: *hidden,
        embed_dim: *embed,
        seed: cli.seed.unwrap_or(0),
        ..TrainConfig::default()
    };
    println!(
        "training: {} tokens, vocabulary {} types, h={hidden} d={embed}",
        ids.len(),
        vocab.len()
    );
    let checkpoints = train(&ids, &vocab, &cfg)?;
    for ck in &checkpoints {
        println!(
            "epoch {:3}: train loss {:.4} nats/token",
            ck.epoch, ck.metrics.train_loss
        );
        if *save_all_epochs {
            let path = cli.out.join(format!("model_epoch{}.gsck", ck.epoch));
            save_checkpoint(ck, &path)?;
        }
    }
    let last = checkpoints.last().expect("epochs >= 1");
    let path = cli.out.join("model.gsck");
    save_checkpoint(last, &path)?;
    println!("saved {path:?}");
    Ok(())
}

fn decompose(cli: &Cli) -> Result<()> {
    let Command::Decompose {
        checkpoint,
        tokens,
        focus,
        at,
        target,
    } = &cli.command
    else {
        unreachable!()
    };
    let ck = load_checkpoint(checkpoint)?;
    let ids = ck.vocab.encode(tokens);
    let focus_positions = parse_positions(focus)?;
    let focus_set: FocusSet = focus_positions.iter().copied().collect();
    let out = cd_run(&ck.params, &ids, &focus_set, *at)?;
    let probs = softmax(&out.v_rel).expect("nonempty vocab");

    let mut ranked: Vec<(usize, f64)> = probs.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite"));
    let top: Vec<_> = ranked
        .iter()
        .take(10)
        .map(|(i, p)| json!([ck.vocab.token(*i as u32).unwrap_or("<unk>"), p]))
        .collect();

    let mut record = json!({
        "focus": focus_positions,
        "at": at,
        "v_rel_norm": out.v_rel.norm2(),
        "v_irr_norm": out.v_irr.norm2(),
        "approx_err": out.approx_err,
        "top_relevant": top,
    });
    if let Some(t) = target {
        let id = ck
            .vocab
            .id(&t.to_lowercase())
            .ok_or_else(|| anyhow!("target token {t:?} not in vocabulary"))?;
        record["target"] = json!(t);
        record["target_prob"] = json!(probs[id as usize]);
    }
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(())
}

fn interdep(cli: &Cli) -> Result<()> {
    let Command::Interdep {
        checkpoint,
        tokens,
        a,
        b,
        at,
    } = &cli.command
    else {
        unreachable!()
    };
    let ck = load_checkpoint(checkpoint)?;
    let ids = ck.vocab.encode(tokens);
    let a_set: FocusSet = parse_positions(a)?.into_iter().collect();
    let b_set: FocusSet = parse_positions(b)?.into_iter().collect();
    let res = interdependence(&ck.params, &ids, &a_set, &b_set, *at)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "a": parse_positions(a)?,
            "b": parse_positions(b)?,
            "at": at,
            "value": res.value,
            "norm_a": res.norm_a,
            "norm_b": res.norm_b,
            "norm_ab": res.norm_ab,
        }))?
    );
    Ok(())
}

fn run_preset(cli: &Cli) -> Result<()> {
    let Command::Run { preset } = &cli.command else {
        unreachable!()
    };
    let mut plan: ExperimentPlan = match &cli.config {
        Some(path) => load_json(path)?,
        None => ExperimentPlan::desk_default(*preset),
    };
    plan.preset = *preset;
    plan.out_dir = cli.out.clone();
    if let Some(seed) = cli.seed {
        plan = plan.with_seed(seed);
    }

    // the English preset is self-contained: generate the built-in corpus
    // and treebank when none are supplied
    if *preset == Preset::Fig9 && plan.corpus_path.is_none() && plan.checkpoint_path.is_none() {
        println!("fig9: no corpus supplied; generating the built-in English-like data");
        let cfg = EngenConfig {
            seed: plan.synth.seed,
            ..EngenConfig::default()
        };
        let data = engen::generate(&cfg);
        let corpus_path = cli.out.join("english_corpus.txt");
        let conllu_path = cli.out.join("english_treebank.conllu");
        fs::write(&corpus_path, &data.corpus_text)?;
        fs::write(&conllu_path, write_conllu(&data.treebank))?;
        plan.corpus_path = Some(corpus_path);
        plan.conllu_path = Some(conllu_path);
    }
    plan.validate().map_err(|e| anyhow!(e))?;

    let series = match preset {
        Preset::Fig8Grid => {
            let out = presets::run_fig8grid(&plan)?;
            for skip in &out.skips {
                eprintln!("grid cell n={} k={} skipped: {}", skip.n, skip.k, skip.reason);
            }
            out.series
        }
        Preset::Fig9 => {
            let out = presets::run_fig9(&plan)?;
            save_checkpoint(&out.checkpoint, &cli.out.join("model.gsck"))?;
            write_strata_csv(&cli.out.join("strata.csv"), &out.table)?;
            write_pairs_csv(&cli.out.join("pairs.csv"), &out.records)?;
            println!(
                "swept {} pairs ({} undefined skipped, {} sentences skipped by the parser)",
                out.records.len(),
                out.skipped_pairs,
                out.skipped_sentences
            );
            out.series
        }
        _ => presets::run_preset(&plan)?,
    };

    let series_path = cli.out.join(format!("{}_series.csv", preset.name()));
    write_series_cssv_checked(&series_path, &series)?;
    write_plan_sidecar(&cli.out.join(format!("{}_plan.json", preset.name())), &plan)?;
    println!("wrote {series_path:?}");
    Ok(())
}

fn write_series_cssv_checked(
    path: &Path,
    series: &[gatescope::series::MetricSeries],
) -> Result<()> {
    write_series_csv(path, series).with_context(|| format!("writing {path:?}"))
}

fn write_pairs_csv(path: &Path, records: &[gatescope_core::ud::PairRecord]) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "sentence_id,l,r,seq_dist,syn_dist,class,value")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.sentence_id, r.l, r.r, r.seq_dist, r.syn_dist, r.class, r.value
        )?;
    }
    Ok(())
}

fn ud_analyze(cli: &Cli) -> Result<()> {
    let Command::UdAnalyze {
        checkpoint,
        conllu,
        max_seq_dist,
        min_cases,
        max_sentences,
    } = &cli.command
    else {
        unreachable!()
    };
    let mut plan = ExperimentPlan::desk_default(Preset::Fig9);
    plan.checkpoint_path = Some(checkpoint.clone());
    plan.conllu_path = Some(conllu.clone());
    plan.max_seq_dist = *max_seq_dist;
    plan.min_cases = *min_cases;
    plan.max_sentences = *max_sentences;
    plan.out_dir = cli.out.clone();

    let out = presets::run_fig9(&plan)?;
    write_strata_csv(&cli.out.join("strata.csv"), &out.table)?;
    write_pairs_csv(&cli.out.join("pairs.csv"), &out.records)?;
    write_series_csv(&cli.out.join("seqdist_series.csv"), &out.series)?;
    println!(
        "swept {} pairs ({} undefined skipped); wrote pairs.csv, strata.csv, seqdist_series.csv",
        out.records.len(),
        out.skipped_pairs
    );
    Ok(())
}

fn gen_english(cli: &Cli) -> Result<()> {
    let Command::GenEnglish { tokens, sentences } = &cli.command else {
        unreachable!()
    };
    let cfg = EngenConfig {
        train_tokens: *tokens,
        treebank_sentences: *sentences,
        seed: cli.seed.unwrap_or(0),
    };
    let data = engen::generate(&cfg);
    fs::write(cli.out.join("english_corpus.txt"), &data.corpus_text)?;
    fs::write(
        cli.out.join("english_treebank.conllu"),
        write_conllu(&data.treebank),
    )?;
    println!(
        "wrote {} corpus tokens and {} treebank sentences to {:?}",
        data.corpus_text.split_whitespace().count(),
        data.treebank.len(),
        cli.out
    );
    Ok(())
}

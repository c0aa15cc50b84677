//! Preset experiment pipelines.
//!
//! Synthetic presets train the familiar/unfamiliar pair once and evaluate
//! scheduled checkpoints on rule windows cut from the test streams; the
//! English preset trains (or loads) an LM, sweeps word pairs over a
//! treebank, and joins tree distances and POS classes.

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fs;

use crate::plan::{ExperimentPlan, Preset};
use crate::series::MetricSeries;
use gatescope_core::cd::{cd_probability, cd_run, prefix_curve, FocusSet};
use gatescope_core::interdep::{interdependence, pair_sweep, InterdepError};
use gatescope_core::lm::{
    eval_next_token_prob, grad_probe, load_checkpoint, span_grad_probe, train, Checkpoint,
    LstmParams, Vocab, OMEGA_ID,
};
use gatescope_core::synth::{
    gen_grid, gen_tests, gen_train, ConduitSetting, GridSkip, RuleSpan, SynthCorpus, SynthSpec,
};
use gatescope_core::ud::{
    pair_class, parse_conllu, pos_class, stratify, syn_distance, PairClass, PairRecord, StratCell,
    StratKey,
};

/// One trained setting with its test corpora; checkpoints filtered to the
/// evaluation schedule.
pub struct SynthRun {
    pub setting: ConduitSetting,
    pub checkpoints: Vec<Checkpoint>,
    pub in_test: SynthCorpus,
    pub out_test: SynthCorpus,
}

impl SynthRun {
    fn label(&self) -> &'static str {
        match self.setting {
            ConduitSetting::Unfamiliar => "unfamiliar",
            ConduitSetting::Familiar => "familiar",
        }
    }

    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("schedule nonempty")
    }
}

/// Both training settings over the same background and rule placement.
pub struct SynthPair {
    pub unfamiliar: SynthRun,
    pub familiar: SynthRun,
}

impl SynthPair {
    pub fn runs(&self) -> [&SynthRun; 2] {
        [&self.unfamiliar, &self.familiar]
    }
}

fn run_one_setting(plan: &ExperimentPlan, setting: ConduitSetting) -> Result<SynthRun> {
    let spec = SynthSpec {
        setting,
        ..plan.synth.clone()
    };
    let corpus = gen_train(&spec)?;
    let (in_test, out_test) = gen_tests(&spec, &corpus)?;
    let vocab = spec.vocab();
    let all = train(&corpus.tokens, &vocab, &plan.train)?;
    let checkpoints = plan
        .schedule
        .iter()
        .map(|&e| all[e - 1].clone())
        .collect();
    Ok(SynthRun {
        setting,
        checkpoints,
        in_test,
        out_test,
    })
}

/// Trains both settings (in parallel) from one plan.
pub fn run_synth_pair(plan: &ExperimentPlan) -> Result<SynthPair> {
    plan.validate().map_err(|e| anyhow!(e))?;
    let (unfamiliar, familiar) = rayon::join(
        || run_one_setting(plan, ConduitSetting::Unfamiliar),
        || run_one_setting(plan, ConduitSetting::Familiar),
    );
    Ok(SynthPair {
        unfamiliar: unfamiliar?,
        familiar: familiar?,
    })
}

/// Evaluation window around one rule: test-stream context before the open
/// symbol through the close symbol. Returns (window, alpha_idx, omega_idx).
pub fn rule_window(
    corpus: &SynthCorpus,
    rule: &RuleSpan,
    ctx_before: usize,
) -> (Vec<u32>, usize, usize) {
    let start = rule.alpha.saturating_sub(ctx_before);
    (
        corpus.tokens[start..=rule.omega].to_vec(),
        rule.alpha - start,
        rule.omega - start,
    )
}

/// Mean of a per-rule measurement over all test rules; rules where the
/// measurement is undefined are dropped from the mean.
fn mean_over_rules<F>(test: &SynthCorpus, ctx_before: usize, f: F) -> Result<(f64, usize)>
where
    F: Fn(&[u32], usize, usize) -> Result<Option<f64>> + Sync,
{
    let values: Vec<Option<f64>> = test
        .rules
        .par_iter()
        .map(|rule| {
            let (window, alpha_idx, omega_idx) = rule_window(test, rule, ctx_before);
            f(&window, alpha_idx, omega_idx)
        })
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<f64> = values.into_iter().flatten().collect();
    if kept.is_empty() {
        return Ok((f64::NAN, 0));
    }
    Ok((kept.iter().sum::<f64>() / kept.len() as f64, kept.len()))
}

/// Mean softmax probability of the close symbol at its gold position.
pub fn mean_close_prob(
    params: &LstmParams,
    test: &SynthCorpus,
    ctx_before: usize,
) -> Result<(f64, usize)> {
    mean_over_rules(test, ctx_before, |window, _alpha, omega| {
        let p = eval_next_token_prob(params, &window[..omega], OMEGA_ID)?;
        Ok(Some(p))
    })
}

/// Mean CD probability of the close symbol with only the open symbol in
/// focus, evaluated at the pre-close timestep.
pub fn mean_cd_alpha_prob(
    params: &LstmParams,
    test: &SynthCorpus,
    ctx_before: usize,
) -> Result<(f64, usize)> {
    mean_over_rules(test, ctx_before, |window, alpha, omega| {
        let out = cd_run(params, window, &FocusSet::single(alpha), omega - 1)?;
        Ok(Some(cd_probability(&out, OMEGA_ID)?))
    })
}

/// Mean CD probability of the close symbol with only the conduit in focus.
pub fn mean_cd_conduit_prob(
    params: &LstmParams,
    test: &SynthCorpus,
    ctx_before: usize,
) -> Result<(f64, usize)> {
    mean_over_rules(test, ctx_before, |window, alpha, omega| {
        let focus = FocusSet::span(alpha + 1, omega - 1);
        let out = cd_run(params, window, &focus, omega - 1)?;
        Ok(Some(cd_probability(&out, OMEGA_ID)?))
    })
}

/// Mean interdependence between the open symbol and its conduit.
pub fn mean_alpha_conduit_interdep(
    params: &LstmParams,
    test: &SynthCorpus,
    ctx_before: usize,
) -> Result<(f64, usize)> {
    mean_over_rules(test, ctx_before, |window, alpha, omega| {
        let a = FocusSet::single(alpha);
        let b = FocusSet::span(alpha + 1, omega - 1);
        match interdependence(params, window, &a, &b, omega - 1) {
            Ok(res) => Ok(Some(res.value)),
            Err(InterdepError::UndefinedMeasurement) => Ok(None),
            Err(e) => Err(e.into()),
        }
    })
}

/// Per-rule prefix curves averaged pointwise; the curve has `conduit_len + 1`
/// points (focus grows from the open symbol to the whole conduit).
pub fn mean_prefix_curve(
    params: &LstmParams,
    test: &SynthCorpus,
    ctx_before: usize,
    conduit_len: usize,
) -> Result<Vec<(f64, usize)>> {
    let curves: Vec<Vec<f64>> = test
        .rules
        .par_iter()
        .map(|rule| {
            let (window, alpha_idx, _) = rule_window(test, rule, ctx_before);
            Ok(prefix_curve(params, &window, alpha_idx, conduit_len + 1)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let len = conduit_len + 1;
    let mut out = vec![(0.0, 0usize); len];
    for curve in &curves {
        for (i, &v) in curve.iter().enumerate() {
            out[i].0 += v;
            out[i].1 += 1;
        }
    }
    for slot in out.iter_mut() {
        if slot.1 > 0 {
            slot.0 /= slot.1 as f64;
        }
    }
    Ok(out)
}

/// Mean gradient-magnitude profile over rules: offsets 1..=conduit_len of
/// the close-symbol error backpropagated through the conduit.
pub fn mean_grad_profile(
    params: &LstmParams,
    test: &SynthCorpus,
    ctx_before: usize,
    conduit_len: usize,
) -> Result<Vec<(f64, usize)>> {
    mean_profile_over_rules(test, conduit_len, |window, omega_idx| {
        Ok(grad_probe(params, window, omega_idx, conduit_len)?)
    }, ctx_before)
}

/// Like [`mean_grad_profile`], but backpropagating every prediction error in
/// the rule span, so unpredictable conduits register as large gradients.
pub fn mean_span_grad_profile(
    params: &LstmParams,
    test: &SynthCorpus,
    ctx_before: usize,
    conduit_len: usize,
) -> Result<Vec<(f64, usize)>> {
    mean_profile_over_rules(test, conduit_len, |window, omega_idx| {
        Ok(span_grad_probe(params, window, omega_idx, conduit_len)?)
    }, ctx_before)
}

fn mean_profile_over_rules<F>(
    test: &SynthCorpus,
    conduit_len: usize,
    probe: F,
    ctx_before: usize,
) -> Result<Vec<(f64, usize)>>
where
    F: Fn(&[u32], usize) -> Result<Vec<f64>> + Sync,
{
    let profiles: Vec<Vec<f64>> = test
        .rules
        .par_iter()
        .map(|rule| {
            let (window, _, omega_idx) = rule_window(test, rule, ctx_before);
            probe(&window, omega_idx)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![(0.0, 0usize); conduit_len];
    for profile in &profiles {
        for (i, &v) in profile.iter().enumerate() {
            out[i].0 += v;
            out[i].1 += 1;
        }
    }
    for slot in out.iter_mut() {
        if slot.1 > 0 {
            slot.0 /= slot.1 as f64;
        }
    }
    Ok(out)
}

/// Close-symbol probability over training, both settings × both domains.
pub fn fig3_series(pair: &SynthPair, plan: &ExperimentPlan) -> Result<Vec<MetricSeries>> {
    let mut series = Vec::new();
    for run in pair.runs() {
        for (domain, test) in [("in", &run.in_test), ("out", &run.out_test)] {
            let mut s = MetricSeries::new("close_prob", run.label(), domain);
            for (ck, &epoch) in run.checkpoints.iter().zip(plan.schedule.iter()) {
                let (mean, count) = mean_close_prob(&ck.params, test, plan.ctx_before)?;
                s.push(epoch as f64, mean, count);
            }
            series.push(s);
        }
    }
    Ok(series)
}

/// CD close-symbol probability from the open symbol alone, out-domain.
pub fn fig4_series(pair: &SynthPair, plan: &ExperimentPlan) -> Result<Vec<MetricSeries>> {
    let mut series = Vec::new();
    for run in pair.runs() {
        let mut s = MetricSeries::new("cd_alpha_prob", run.label(), "out");
        for (ck, &epoch) in run.checkpoints.iter().zip(plan.schedule.iter()) {
            let (mean, count) = mean_cd_alpha_prob(&ck.params, &run.out_test, plan.ctx_before)?;
            s.push(epoch as f64, mean, count);
        }
        series.push(s);
    }
    Ok(series)
}

/// Incremental-prefix CD curves at the final scheduled epoch, both domains.
/// The in-domain curves carry the conduit-reliance signal (memorized
/// conduits are what the familiar model interacts with); the out-domain
/// curves share their first point with the fig4 quantity.
pub fn fig5_series(pair: &SynthPair, plan: &ExperimentPlan) -> Result<Vec<MetricSeries>> {
    let mut series = Vec::new();
    for run in pair.runs() {
        let ck = run.final_checkpoint();
        for (domain, test) in [("in", &run.in_test), ("out", &run.out_test)] {
            let curve = mean_prefix_curve(
                &ck.params,
                test,
                plan.ctx_before,
                plan.synth.conduit_len,
            )?;
            let mut s = MetricSeries::new("cd_prefix_prob", run.label(), domain);
            for (i, (mean, count)) in curve.into_iter().enumerate() {
                s.push(i as f64, mean, count);
            }
            series.push(s);
        }
    }
    Ok(series)
}

/// Open-symbol/conduit interdependence over training, in-domain.
pub fn fig6_series(pair: &SynthPair, plan: &ExperimentPlan) -> Result<Vec<MetricSeries>> {
    let mut series = Vec::new();
    for run in pair.runs() {
        let mut s = MetricSeries::new("interdependence", run.label(), "in");
        for (ck, &epoch) in run.checkpoints.iter().zip(plan.schedule.iter()) {
            let (mean, count) =
                mean_alpha_conduit_interdep(&ck.params, &run.in_test, plan.ctx_before)?;
            s.push(epoch as f64, mean, count);
        }
        series.push(s);
    }
    Ok(series)
}

/// Gradient-magnitude profiles at every scheduled epoch, in-domain. The
/// backpropagated error covers the whole rule span, so the profiles reflect
/// how much error mass an unpredictable conduit feeds into the states the
/// long-range rule must learn through.
pub fn appb_series(pair: &SynthPair, plan: &ExperimentPlan) -> Result<Vec<MetricSeries>> {
    let mut series = Vec::new();
    for run in pair.runs() {
        for (ck, &epoch) in run.checkpoints.iter().zip(plan.schedule.iter()) {
            let profile = mean_span_grad_profile(
                &ck.params,
                &run.in_test,
                plan.ctx_before,
                plan.synth.conduit_len,
            )?;
            let mut s = MetricSeries::new(&format!("grad_magnitude_e{epoch}"), run.label(), "in");
            for (i, (mean, count)) in profile.into_iter().enumerate() {
                s.push((i + 1) as f64, mean, count);
            }
            series.push(s);
        }
    }
    Ok(series)
}

/// Grid outcome: CD probabilities by (n, k) plus skipped cells.
pub struct Fig8Output {
    pub series: Vec<MetricSeries>,
    pub skips: Vec<GridSkip>,
}

/// Trains one model per (n, k) cell and measures CD close-symbol probability
/// from the open symbol alone and from the whole conduit, out-domain.
pub fn run_fig8grid(plan: &ExperimentPlan) -> Result<Fig8Output> {
    plan.validate().map_err(|e| anyhow!(e))?;
    let (points, skips) = gen_grid(&plan.synth, &plan.grid_n, &plan.grid_k);
    let vocab = Vocab::synthetic(plan.synth.sigma_size);
    let measured: Vec<(usize, usize, f64, f64)> = points
        .par_iter()
        .map(|pt| {
            let cks = train(&pt.train.tokens, &vocab, &plan.train)?;
            let params = &cks.last().expect("epochs >= 1").params;
            let (alpha_p, _) = mean_cd_alpha_prob(params, &pt.out_test, plan.ctx_before)?;
            let (conduit_p, _) = mean_cd_conduit_prob(params, &pt.out_test, plan.ctx_before)?;
            Ok((pt.n, pt.k, alpha_p, conduit_p))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut series = Vec::new();
    for &k in &plan.grid_k {
        let mut alpha = MetricSeries::new("cd_alpha_prob", &format!("k={k}"), "out");
        let mut conduit = MetricSeries::new("cd_conduit_prob", &format!("k={k}"), "out");
        for &n in &plan.grid_n {
            if let Some(&(_, _, a, c)) = measured
                .iter()
                .find(|&&(pn, pk, _, _)| pn == n && pk == k)
            {
                let count = plan.synth.test_n_rules;
                alpha.push(n as f64, a, count);
                conduit.push(n as f64, c, count);
            }
        }
        series.push(alpha);
        series.push(conduit);
    }
    Ok(Fig8Output { series, skips })
}

/// English pipeline output.
pub struct Fig9Output {
    pub series: Vec<MetricSeries>,
    pub records: Vec<PairRecord>,
    pub table: BTreeMap<StratKey, StratCell>,
    pub checkpoint: Checkpoint,
    pub skipped_pairs: usize,
    pub skipped_sentences: usize,
}

/// Trains (or loads) an LM, sweeps word pairs over the treebank, joins
/// syntactic distance and POS class, and stratifies.
pub fn run_fig9(plan: &ExperimentPlan) -> Result<Fig9Output> {
    plan.validate().map_err(|e| anyhow!(e))?;
    let checkpoint = match &plan.checkpoint_path {
        Some(path) => load_checkpoint(path).with_context(|| format!("loading {path:?}"))?,
        None => {
            let corpus_path = plan.corpus_path.as_ref().expect("validated");
            let text = fs::read_to_string(corpus_path)
                .with_context(|| format!("reading {corpus_path:?}"))?;
            let vocab = Vocab::from_text(&text, 1);
            let corpus = vocab.encode(&text);
            let cks = train(&corpus, &vocab, &plan.train)?;
            cks.into_iter().last().expect("epochs >= 1")
        }
    };

    let conllu_path = plan.conllu_path.as_ref().expect("validated");
    let text =
        fs::read_to_string(conllu_path).with_context(|| format!("reading {conllu_path:?}"))?;
    let doc = parse_conllu(&text);
    let skipped_sentences = doc.issues.len();
    let mut sentences = doc.sentences;
    if plan.max_sentences > 0 && sentences.len() > plan.max_sentences {
        sentences.truncate(plan.max_sentences);
    }

    let per_sentence: Vec<(Vec<PairRecord>, usize)> = sentences
        .par_iter()
        .enumerate()
        .map(|(sid, s)| {
            let tokens: Vec<u32> = s
                .forms
                .iter()
                .map(|f| checkpoint.vocab.id_or_unk(&f.to_lowercase()))
                .collect();
            let sweep = pair_sweep(&checkpoint.params, &tokens, plan.max_seq_dist)?;
            let mut recs = Vec::with_capacity(sweep.records.len());
            for rec in sweep.records {
                recs.push(PairRecord {
                    sentence_id: sid,
                    l: rec.l,
                    r: rec.r,
                    seq_dist: rec.seq_dist,
                    syn_dist: syn_distance(s, rec.l, rec.r)?,
                    class: pair_class(pos_class(&s.upos[rec.l]), pos_class(&s.upos[rec.r])),
                    value: rec.value,
                });
            }
            Ok((recs, sweep.skipped))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut skipped_pairs = 0;
    for (recs, skipped) in per_sentence {
        records.extend(recs);
        skipped_pairs += skipped;
    }
    let table = stratify(&records, plan.min_cases);

    // headline curve: mean interdependence by sequential distance, pooling
    // every class except punctuation-involving pairs
    let mut series = MetricSeries::new("interdependence", "", "");
    for d in 1..=plan.max_seq_dist {
        let vals: Vec<f64> = records
            .iter()
            .filter(|r| r.seq_dist == d && r.class != PairClass::Other)
            .map(|r| r.value)
            .collect();
        if !vals.is_empty() {
            series.push(
                d as f64,
                vals.iter().sum::<f64>() / vals.len() as f64,
                vals.len(),
            );
        }
    }

    Ok(Fig9Output {
        series: vec![series],
        records,
        table,
        checkpoint,
        skipped_pairs,
        skipped_sentences,
    })
}

/// Pooled (class-free, punctuation excluded) mean interdependence by
/// syntactic distance within one sequential-distance stratum, keeping only
/// cells meeting the case threshold.
pub fn pooled_syndist_means(
    records: &[PairRecord],
    seq_dist: usize,
    min_cases: usize,
) -> Vec<(usize, f64, usize)> {
    let mut cells: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in records {
        if r.seq_dist == seq_dist && r.class != PairClass::Other {
            let e = cells.entry(r.syn_dist).or_insert((0.0, 0));
            e.0 += r.value;
            e.1 += 1;
        }
    }
    cells
        .into_iter()
        .filter(|(_, (_, n))| *n >= min_cases)
        .map(|(syn, (sum, n))| (syn, sum / n as f64, n))
        .collect()
}

/// Runs any preset and returns its metric series (fig9 extras are dropped;
/// use [`run_fig9`] directly when the records and table are needed).
pub fn run_preset(plan: &ExperimentPlan) -> Result<Vec<MetricSeries>> {
    match plan.preset {
        Preset::Fig3 => fig3_series(&run_synth_pair(plan)?, plan),
        Preset::Fig4 => fig4_series(&run_synth_pair(plan)?, plan),
        Preset::Fig5 => fig5_series(&run_synth_pair(plan)?, plan),
        Preset::Fig6 => fig6_series(&run_synth_pair(plan)?, plan),
        Preset::AppB => appb_series(&run_synth_pair(plan)?, plan),
        Preset::Fig8Grid => Ok(run_fig8grid(plan)?.series),
        Preset::Fig9 => Ok(run_fig9(plan)?.series),
    }
}

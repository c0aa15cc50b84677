//! Synthetic long-range-rule corpora.
//!
//! A corpus is a uniform background stream over Σ with `n` planted instances
//! of the rule α·q·ω, where the conduit q is a k-token span. In the
//! unfamiliar setting every rule instance draws a fresh random conduit; in
//! the familiar setting conduits come from a fixed bank and each bank
//! conduit is additionally planted many times outside any rule.
//!
//! Seed discipline: background, span placement, conduit content, and outside
//! planting each draw from an independently derived stream, so familiar and
//! unfamiliar corpora with the same seed share the identical background and
//! rule placement, and grid points share the background while varying only
//! in what is planted.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

use crate::lm::{Vocab, ALPHA_ID, OMEGA_ID};
use crate::math::Rng;

/// First id of the background alphabet Σ (after `<unk>`, `ALPHA`, `OMEGA`).
pub const SIGMA_BASE: u32 = 3;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(
        "infeasible packing: placed {placed} of {needed} spans of length {span_len} \
         into {corpus_len} tokens"
    )]
    InfeasiblePacking {
        needed: usize,
        placed: usize,
        span_len: usize,
        corpus_len: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConduitSetting {
    /// Conduits appear only inside rule instances.
    Unfamiliar,
    /// Bank conduits recur frequently outside the rule.
    Familiar,
}

/// Full description of a synthetic corpus family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub sigma_size: usize,
    pub corpus_len: usize,
    pub n_rules: usize,
    /// Conduit length k.
    pub conduit_len: usize,
    pub setting: ConduitSetting,
    pub bank_size: usize,
    pub in_rule_repeats: usize,
    pub outside_occurrences: usize,
    #[serde(default = "default_test_rules")]
    pub test_n_rules: usize,
    #[serde(default = "default_test_len")]
    pub test_corpus_len: usize,
    pub seed: u64,
}

fn default_test_rules() -> usize {
    100
}

fn default_test_len() -> usize {
    50_000
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            sigma_size: 1000,
            corpus_len: 1_000_000,
            n_rules: 1000,
            conduit_len: 4,
            setting: ConduitSetting::Unfamiliar,
            bank_size: 100,
            in_rule_repeats: 10,
            outside_occurrences: 1000,
            test_n_rules: 100,
            test_corpus_len: 50_000,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.sigma_size == 0 {
            return Err(SynthError::InvalidSpec("sigma_size must be >= 1".into()));
        }
        if self.conduit_len == 0 {
            return Err(SynthError::InvalidSpec("conduit_len must be >= 1".into()));
        }
        if self.setting == ConduitSetting::Familiar
            && self.bank_size * self.in_rule_repeats != self.n_rules
        {
            return Err(SynthError::InvalidSpec(format!(
                "familiar setting requires bank_size * in_rule_repeats = n_rules \
                 ({} * {} != {})",
                self.bank_size, self.in_rule_repeats, self.n_rules
            )));
        }
        let budget = self.planted_token_budget();
        if budget > self.corpus_len {
            return Err(SynthError::InvalidSpec(format!(
                "planted tokens ({budget}) exceed corpus_len ({})",
                self.corpus_len
            )));
        }
        let test_budget = self.test_n_rules * (self.conduit_len + 2);
        if test_budget > self.test_corpus_len {
            return Err(SynthError::InvalidSpec(format!(
                "test planted tokens ({test_budget}) exceed test_corpus_len ({})",
                self.test_corpus_len
            )));
        }
        Ok(())
    }

    /// Total tokens covered by planted spans.
    pub fn planted_token_budget(&self) -> usize {
        let rules = self.n_rules * (self.conduit_len + 2);
        let outside = match self.setting {
            ConduitSetting::Familiar => {
                self.bank_size * self.outside_occurrences * self.conduit_len
            }
            ConduitSetting::Unfamiliar => 0,
        };
        rules + outside
    }

    /// Vocabulary of this corpus family.
    pub fn vocab(&self) -> Vocab {
        Vocab::synthetic(self.sigma_size)
    }
}

/// One rule instance: α at `alpha`, ω at `omega = alpha + k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSpan {
    pub alpha: usize,
    pub omega: usize,
}

/// A generated corpus with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub tokens: Vec<u32>,
    pub rules: Vec<RuleSpan>,
    /// Familiar setting: the conduit bank. Empty otherwise.
    pub conduit_bank: Vec<Vec<u32>>,
    /// Every planted (start, len) span: rules first, then outside conduits.
    pub planted_spans: Vec<(usize, usize)>,
}

impl SynthCorpus {
    /// Conduit tokens of one rule instance.
    pub fn conduit_of(&self, rule: &RuleSpan) -> &[u32] {
        &self.tokens[rule.alpha + 1..rule.omega]
    }

    /// All per-rule conduits in rule order.
    pub fn rule_conduits(&self) -> Vec<Vec<u32>> {
        self.rules
            .iter()
            .map(|r| self.conduit_of(r).to_vec())
            .collect()
    }
}

/// Non-overlapping span placement by rejection sampling over an occupancy
/// mask. Attempts are capped; running out reports infeasible packing.
struct Placer {
    occupied: Vec<bool>,
}

impl Placer {
    fn new(len: usize) -> Self {
        Placer {
            occupied: vec![false; len],
        }
    }

    fn place_many(
        &mut self,
        rng: &mut Rng,
        count: usize,
        span_len: usize,
    ) -> Result<Vec<usize>, SynthError> {
        let corpus_len = self.occupied.len();
        if span_len > corpus_len {
            return Err(SynthError::InfeasiblePacking {
                needed: count,
                placed: 0,
                span_len,
                corpus_len,
            });
        }
        let mut starts = Vec::with_capacity(count);
        let max_attempts = 200 * count.max(1) + 10_000;
        let mut attempts = 0usize;
        while starts.len() < count {
            if attempts >= max_attempts {
                return Err(SynthError::InfeasiblePacking {
                    needed: count,
                    placed: starts.len(),
                    span_len,
                    corpus_len,
                });
            }
            attempts += 1;
            let start = rng.below(corpus_len - span_len + 1);
            if self.occupied[start..start + span_len].iter().any(|&o| o) {
                continue;
            }
            self.occupied[start..start + span_len].fill(true);
            starts.push(start);
        }
        Ok(starts)
    }
}

fn uniform_background(rng: &mut Rng, len: usize, sigma: usize) -> Vec<u32> {
    (0..len)
        .map(|_| SIGMA_BASE + rng.below(sigma) as u32)
        .collect()
}

fn fresh_conduit(rng: &mut Rng, k: usize, sigma: usize) -> Vec<u32> {
    (0..k)
        .map(|_| SIGMA_BASE + rng.below(sigma) as u32)
        .collect()
}

/// Draws a bank of distinct conduits.
fn draw_bank(rng: &mut Rng, bank_size: usize, k: usize, sigma: usize) -> Vec<Vec<u32>> {
    let mut bank: Vec<Vec<u32>> = Vec::with_capacity(bank_size);
    while bank.len() < bank_size {
        let c = fresh_conduit(rng, k, sigma);
        if !bank.contains(&c) {
            bank.push(c);
        }
    }
    bank
}

fn write_rule(tokens: &mut [u32], start: usize, conduit: &[u32]) -> RuleSpan {
    let k = conduit.len();
    tokens[start] = ALPHA_ID;
    tokens[start + 1..start + 1 + k].copy_from_slice(conduit);
    tokens[start + k + 1] = OMEGA_ID;
    RuleSpan {
        alpha: start,
        omega: start + k + 1,
    }
}

fn gen_train_salted(spec: &SynthSpec, salt: &str) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let k = spec.conduit_len;

    let mut bg_rng = Rng::for_purpose(spec.seed, "synth.train.background");
    let mut tokens = uniform_background(&mut bg_rng, spec.corpus_len, spec.sigma_size);

    let mut place_rng = Rng::for_purpose(spec.seed, &format!("synth.train.place{salt}"));
    let mut placer = Placer::new(spec.corpus_len);
    let rule_starts = placer.place_many(&mut place_rng, spec.n_rules, k + 2)?;

    let mut conduit_rng = Rng::for_purpose(spec.seed, &format!("synth.train.conduits{salt}"));
    let mut planted_spans: Vec<(usize, usize)> = Vec::new();
    let mut rules = Vec::with_capacity(spec.n_rules);
    let mut conduit_bank: Vec<Vec<u32>> = Vec::new();

    match spec.setting {
        ConduitSetting::Unfamiliar => {
            for &start in &rule_starts {
                let conduit = fresh_conduit(&mut conduit_rng, k, spec.sigma_size);
                rules.push(write_rule(&mut tokens, start, &conduit));
                planted_spans.push((start, k + 2));
            }
        }
        ConduitSetting::Familiar => {
            conduit_bank = draw_bank(&mut conduit_rng, spec.bank_size, k, spec.sigma_size);
            // each bank conduit appears exactly in_rule_repeats times in rules
            let mut assignment: Vec<usize> = (0..spec.bank_size)
                .flat_map(|c| std::iter::repeat(c).take(spec.in_rule_repeats))
                .collect();
            conduit_rng.shuffle(&mut assignment);
            for (&start, &c) in rule_starts.iter().zip(assignment.iter()) {
                rules.push(write_rule(&mut tokens, start, &conduit_bank[c]));
                planted_spans.push((start, k + 2));
            }
            // plant each conduit outside any rule
            let mut outside_rng =
                Rng::for_purpose(spec.seed, &format!("synth.train.outside{salt}"));
            for conduit in &conduit_bank {
                let starts =
                    placer.place_many(&mut outside_rng, spec.outside_occurrences, k)?;
                for start in starts {
                    tokens[start..start + k].copy_from_slice(conduit);
                    planted_spans.push((start, k));
                }
            }
        }
    }

    Ok(SynthCorpus {
        tokens,
        rules,
        conduit_bank,
        planted_spans,
    })
}

/// Generates the training corpus for `spec`.
pub fn gen_train(spec: &SynthSpec) -> Result<SynthCorpus, SynthError> {
    gen_train_salted(spec, "")
}

fn gen_test_salted(
    spec: &SynthSpec,
    conduit_source: Option<&[Vec<u32>]>,
    purpose: &str,
    salt: &str,
) -> Result<SynthCorpus, SynthError> {
    let k = spec.conduit_len;
    let mut bg_rng = Rng::for_purpose(spec.seed, &format!("{purpose}.background{salt}"));
    let mut tokens = uniform_background(&mut bg_rng, spec.test_corpus_len, spec.sigma_size);
    let mut place_rng = Rng::for_purpose(spec.seed, &format!("{purpose}.place{salt}"));
    let mut placer = Placer::new(spec.test_corpus_len);
    let starts = placer.place_many(&mut place_rng, spec.test_n_rules, k + 2)?;
    let mut conduit_rng = Rng::for_purpose(spec.seed, &format!("{purpose}.conduits{salt}"));
    let mut rules = Vec::with_capacity(spec.test_n_rules);
    let mut planted_spans = Vec::with_capacity(spec.test_n_rules);
    for &start in &starts {
        let conduit = match conduit_source {
            Some(bank) => bank[conduit_rng.below(bank.len())].clone(),
            None => fresh_conduit(&mut conduit_rng, k, spec.sigma_size),
        };
        rules.push(write_rule(&mut tokens, start, &conduit));
        planted_spans.push((start, k + 2));
    }
    Ok(SynthCorpus {
        tokens,
        rules,
        conduit_bank: conduit_source.map(<[_]>::to_vec).unwrap_or_default(),
        planted_spans,
    })
}

/// Generates the in-domain and out-domain test corpora for a training set.
///
/// In-domain conduits come from the training bank (for the unfamiliar
/// setting, from the exact conduits used in training rules); out-domain
/// conduits are fresh uniform draws from Σ^k.
pub fn gen_tests(
    spec: &SynthSpec,
    train: &SynthCorpus,
) -> Result<(SynthCorpus, SynthCorpus), SynthError> {
    gen_tests_salted(spec, train, "")
}

fn gen_tests_salted(
    spec: &SynthSpec,
    train: &SynthCorpus,
    salt: &str,
) -> Result<(SynthCorpus, SynthCorpus), SynthError> {
    spec.validate()?;
    let in_source: Vec<Vec<u32>> = if train.conduit_bank.is_empty() {
        train.rule_conduits()
    } else {
        train.conduit_bank.clone()
    };
    let in_domain = gen_test_salted(spec, Some(&in_source), "synth.test.in", salt)?;
    let out_domain = gen_test_salted(spec, None, "synth.test.out", salt)?;
    Ok((in_domain, out_domain))
}

/// One grid cell: corpora for a (rule count, conduit length) combination.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub n: usize,
    pub k: usize,
    pub train: SynthCorpus,
    pub in_test: SynthCorpus,
    pub out_test: SynthCorpus,
}

/// A grid cell that could not be generated.
#[derive(Debug, Clone)]
pub struct GridSkip {
    pub n: usize,
    pub k: usize,
    pub reason: String,
}

/// Generates one unfamiliar-setting corpus per (n, k) grid point. All points
/// share the background stream; only rule placement and content vary.
/// Infeasible points are reported and skipped.
pub fn gen_grid(
    base: &SynthSpec,
    n_values: &[usize],
    k_values: &[usize],
) -> (Vec<GridPoint>, Vec<GridSkip>) {
    let mut points = Vec::new();
    let mut skips = Vec::new();
    for &n in n_values {
        for &k in k_values {
            let spec = SynthSpec {
                n_rules: n,
                conduit_len: k,
                setting: ConduitSetting::Unfamiliar,
                ..base.clone()
            };
            let salt = format!(".grid.n{n}.k{k}");
            let built = spec.validate().and_then(|()| {
                let train = gen_train_salted(&spec, &salt)?;
                let (in_test, out_test) = gen_tests_salted(&spec, &train, &salt)?;
                Ok(GridPoint {
                    n,
                    k,
                    train,
                    in_test,
                    out_test,
                })
            });
            match built {
                Ok(p) => points.push(p),
                Err(e) => skips.push(GridSkip {
                    n,
                    k,
                    reason: e.to_string(),
                }),
            }
        }
    }
    (points, skips)
}

/// Counts occurrences of each needle as a contiguous subsequence, in one pass
/// over every k-gram window.
pub fn count_substrings(tokens: &[u32], needles: &[Vec<u32>]) -> Vec<usize> {
    let mut by_len: HashMap<usize, HashMap<&[u32], usize>> = HashMap::new();
    for needle in needles {
        by_len
            .entry(needle.len())
            .or_default()
            .insert(needle.as_slice(), 0);
    }
    for (len, map) in by_len.iter_mut() {
        if *len == 0 || *len > tokens.len() {
            continue;
        }
        for window in tokens.windows(*len) {
            if let Some(c) = map.get_mut(window) {
                *c += 1;
            }
        }
    }
    needles
        .iter()
        .map(|n| by_len[&n.len()][n.as_slice()])
        .collect()
}

/// Structural audit results for a generated corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub alpha_count: usize,
    pub omega_count: usize,
    pub rule_count: usize,
    pub spans_non_overlapping: bool,
    pub rules_well_formed: bool,
    pub symbols_only_in_rules: bool,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        self.alpha_count == self.rule_count
            && self.omega_count == self.rule_count
            && self.spans_non_overlapping
            && self.rules_well_formed
            && self.symbols_only_in_rules
    }
}

/// Verifies exact counts, span structure, and non-overlap of planted spans.
pub fn audit(corpus: &SynthCorpus, conduit_len: usize) -> AuditReport {
    let alpha_count = corpus.tokens.iter().filter(|&&t| t == ALPHA_ID).count();
    let omega_count = corpus.tokens.iter().filter(|&&t| t == OMEGA_ID).count();

    let rules_well_formed = corpus.rules.iter().all(|r| {
        r.omega == r.alpha + conduit_len + 1
            && r.omega < corpus.tokens.len()
            && corpus.tokens[r.alpha] == ALPHA_ID
            && corpus.tokens[r.omega] == OMEGA_ID
            && corpus
                .conduit_of(r)
                .iter()
                .all(|&t| t >= SIGMA_BASE)
    });

    let mut spans: Vec<(usize, usize)> = corpus.planted_spans.clone();
    spans.sort_unstable();
    let spans_non_overlapping = spans
        .windows(2)
        .all(|w| w[0].0 + w[0].1 <= w[1].0)
        && spans
            .last()
            .map_or(true, |&(s, l)| s + l <= corpus.tokens.len());

    // every alpha/omega must be at a recorded rule position
    let mut rule_alphas: Vec<usize> = corpus.rules.iter().map(|r| r.alpha).collect();
    let mut rule_omegas: Vec<usize> = corpus.rules.iter().map(|r| r.omega).collect();
    rule_alphas.sort_unstable();
    rule_omegas.sort_unstable();
    let symbols_only_in_rules = corpus
        .tokens
        .iter()
        .enumerate()
        .all(|(i, &t)| match t {
            ALPHA_ID => rule_alphas.binary_search(&i).is_ok(),
            OMEGA_ID => rule_omegas.binary_search(&i).is_ok(),
            _ => true,
        });

    AuditReport {
        alpha_count,
        omega_count,
        rule_count: corpus.rules.len(),
        spans_non_overlapping,
        rules_well_formed,
        symbols_only_in_rules,
    }
}

/// Renders a corpus as whitespace-separated token text, 100 tokens per line.
pub fn corpus_to_text(corpus: &SynthCorpus, vocab: &Vocab) -> String {
    let mut out = String::with_capacity(corpus.tokens.len() * 4);
    for (i, &tok) in corpus.tokens.iter().enumerate() {
        if i > 0 {
            out.push(if i % 100 == 0 { '\n' } else { ' ' });
        }
        out.push_str(vocab.token(tok).unwrap_or("<unk>"));
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_spec(setting: ConduitSetting) -> SynthSpec {
        SynthSpec {
            sigma_size: 100,
            corpus_len: 30_000,
            n_rules: 60,
            conduit_len: 3,
            setting,
            bank_size: 6,
            in_rule_repeats: 10,
            outside_occurrences: 50,
            test_n_rules: 20,
            test_corpus_len: 5_000,
            seed: 01234,
        }
    }

    #[test]
    fn deterministic_generation() {
        let spec = desk_spec(ConduitSetting::Familiar);
        let a = gen_train(&spec).unwrap();
        let b = gen_train(&spec).unwrap();
        assert_eq!(a.tokens, b.tokens);
        assert_eq!(a.rules, b.rules);
        assert_eq!(a.conduit_bank, b.conduit_bank);
    }

    #[test]
    fn audits_pass_and_counts_exact() {
        for setting in [ConduitSetting::Unfamiliar, ConduitSetting::Familiar] {
            let spec = desk_spec(setting);
            let corpus = gen_train(&spec).unwrap();
            assert_eq!(corpus.tokens.len(), spec.corpus_len);
            let report = audit(&corpus, spec.conduit_len);
            assert!(report.all_pass(), "{setting:?}: {report:?}");
            assert_eq!(report.alpha_count, spec.n_rules);
            assert_eq!(report.omega_count, spec.n_rules);
        }
    }

    #[test]
    fn familiar_conduits_recur_unfamiliar_do_not() {
        let spec = desk_spec(ConduitSetting::Familiar);
        let corpus = gen_train(&spec).unwrap();
        assert_eq!(corpus.conduit_bank.len(), spec.bank_size);
        let counts = count_substrings(&corpus.tokens, &corpus.conduit_bank);
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                c >= spec.in_rule_repeats + spec.outside_occurrences,
                "bank conduit {i} occurs only {c} times"
            );
        }

        let spec = desk_spec(ConduitSetting::Unfamiliar);
        let corpus = gen_train(&spec).unwrap();
        let conduits = corpus.rule_conduits();
        let counts = count_substrings(&corpus.tokens, &conduits);
        // sigma=100, k=3 => ~30k/1e6 chance recurrences; allow a couple
        let extra: usize = counts.iter().map(|&c| c.saturating_sub(1)).sum();
        assert!(extra <= 2, "unexpected conduit recurrences: {extra}");
        assert!(counts.iter().all(|&c| c >= 1));
    }

    #[test]
    fn familiar_and_unfamiliar_share_background() {
        let fam = gen_train(&desk_spec(ConduitSetting::Familiar)).unwrap();
        let unf = gen_train(&desk_spec(ConduitSetting::Unfamiliar)).unwrap();
        let mut planted = vec![false; fam.tokens.len()];
        for &(s, l) in fam.planted_spans.iter().chain(unf.planted_spans.iter()) {
            planted[s..s + l].iter_mut().for_each(|x| *x = true);
        }
        for i in 0..fam.tokens.len() {
            if !planted[i] {
                assert_eq!(fam.tokens[i], unf.tokens[i], "background differs at {i}");
            }
        }
    }

    #[test]
    fn familiar_bank_invariant_enforced() {
        let mut spec = desk_spec(ConduitSetting::Familiar);
        spec.bank_size = 7; // 7 * 10 != 60
        assert!(matches!(
            gen_train(&spec),
            Err(SynthError::InvalidSpec(_))
        ));
    }

    #[test]
    fn infeasible_packing_reported() {
        let mut spec = desk_spec(ConduitSetting::Unfamiliar);
        spec.corpus_len = 400;
        spec.n_rules = 60;
        spec.conduit_len = 8;
        // budget = 60 * 10 = 600 > 400
        assert!(gen_train(&spec).is_err());
    }

    #[test]
    fn tests_have_equal_rule_counts_and_in_domain_uses_bank() {
        let spec = desk_spec(ConduitSetting::Familiar);
        let train = gen_train(&spec).unwrap();
        let (in_test, out_test) = gen_tests(&spec, &train).unwrap();
        assert_eq!(in_test.rules.len(), spec.test_n_rules);
        assert_eq!(out_test.rules.len(), spec.test_n_rules);
        assert!(audit(&in_test, spec.conduit_len).all_pass());
        assert!(audit(&out_test, spec.conduit_len).all_pass());

        for rule in &in_test.rules {
            let conduit = in_test.conduit_of(rule).to_vec();
            assert!(
                train.conduit_bank.contains(&conduit),
                "in-domain conduit not from bank"
            );
        }
        // out-domain overlap with the bank is ~0 for k >= 2
        let overlap = out_test
            .rules
            .iter()
            .filter(|r| train.conduit_bank.contains(&out_test.conduit_of(r).to_vec()))
            .count();
        assert!(overlap <= 1, "out-domain bank overlap {overlap}");
    }

    #[test]
    fn unfamiliar_in_domain_reuses_train_conduits() {
        let spec = desk_spec(ConduitSetting::Unfamiliar);
        let train = gen_train(&spec).unwrap();
        let (in_test, _) = gen_tests(&spec, &train).unwrap();
        let train_conduits = train.rule_conduits();
        for rule in &in_test.rules {
            let conduit = in_test.conduit_of(rule).to_vec();
            assert!(train_conduits.contains(&conduit));
        }
    }

    #[test]
    fn grid_generates_points_and_reports_skips() {
        let mut base = desk_spec(ConduitSetting::Unfamiliar);
        base.corpus_len = 10_000;
        base.test_corpus_len = 2_000;
        base.test_n_rules = 10;
        let (points, skips) = gen_grid(&base, &[10, 40], &[2, 4]);
        assert_eq!(points.len() + skips.len(), 4);
        assert!(skips.is_empty(), "{skips:?}");
        for p in &points {
            assert_eq!(p.train.rules.len(), p.n);
            assert!(audit(&p.train, p.k).all_pass());
            assert_eq!(
                p.train.tokens.iter().filter(|&&t| t == ALPHA_ID).count(),
                p.n
            );
        }
        // an infeasible cell is skipped, not fatal
        let (points, skips) = gen_grid(&base, &[10, 6000], &[2]);
        assert_eq!(points.len(), 1);
        assert_eq!(skips.len(), 1);
        assert_eq!(skips[0].n, 6000);
    }

    #[test]
    fn grid_points_share_background() {
        let mut base = desk_spec(ConduitSetting::Unfamiliar);
        base.corpus_len = 8_000;
        base.test_n_rules = 5;
        base.test_corpus_len = 1_000;
        let (points, _) = gen_grid(&base, &[10, 20], &[2]);
        let a = &points[0];
        let b = &points[1];
        let mut planted = vec![false; base.corpus_len];
        for &(s, l) in a.train.planted_spans.iter().chain(b.train.planted_spans.iter()) {
            planted[s..s + l].iter_mut().for_each(|x| *x = true);
        }
        for i in 0..base.corpus_len {
            if !planted[i] {
                assert_eq!(a.train.tokens[i], b.train.tokens[i]);
            }
        }
    }

    #[test]
    fn text_round_trip_through_vocab() {
        let spec = desk_spec(ConduitSetting::Unfamiliar);
        let corpus = gen_train(&spec).unwrap();
        let vocab = spec.vocab();
        let text = corpus_to_text(&corpus, &vocab);
        let decoded: Vec<u32> = text
            .split_whitespace()
            .map(|t| vocab.id(t).expect("token known"))
            .collect();
        assert_eq!(decoded, corpus.tokens);
    }
}

//! Deterministic English-like corpus generator with gold dependency trees.
//!
//! A small probabilistic grammar produces sentences with UD-style heads,
//! POS tags, and relations: noun phrases with determiners, attributive
//! adjectives and nested prepositional phrases, transitive/intransitive
//! verb phrases with oblique PPs and adverbs, and subordinate clauses.
//! One stream renders plain-text training data; a second, independently
//! seeded stream yields a held-out CoNLL-U treebank, so the English
//! pipeline can run end-to-end without external data.

use gatescope_core::math::Rng;
use gatescope_core::ud::DepSentence;

const NOUNS: &[&str] = &[
    "man", "woman", "child", "dog", "cat", "bird", "horse", "king", "queen", "farmer", "baker",
    "teacher", "doctor", "soldier", "sailor", "painter", "friend", "neighbor", "brother",
    "sister", "house", "garden", "tree", "river", "mountain", "city", "village", "road",
    "bridge", "tower", "market", "temple", "castle", "farm", "boat", "cart", "table", "chair",
    "lamp", "door", "window", "wall", "field", "forest", "lake", "island", "hill", "valley",
    "meadow", "stone", "book", "letter", "song", "story", "coat", "hat", "sword", "cup",
    "loaf", "clock",
];

const VERBS_TRANS: &[&str] = &[
    "sees", "finds", "takes", "brings", "carries", "follows", "watches", "helps", "greets",
    "calls", "visits", "leaves", "holds", "lifts", "paints", "cleans", "opens", "closes",
    "buys", "sells", "mends", "guards",
];

const VERBS_INTRANS: &[&str] = &[
    "sleeps", "runs", "walks", "laughs", "waits", "falls", "rests", "sings", "dances", "works",
    "smiles", "listens", "dreams", "wanders",
];

const ADJS: &[&str] = &[
    "old", "young", "big", "small", "tall", "short", "quiet", "loud", "happy", "sad", "clever",
    "foolish", "rich", "poor", "strong", "weak", "bright", "dark", "clean", "dusty", "new",
    "ancient", "gentle", "fierce",
];

const ADVS: &[&str] = &[
    "quietly", "slowly", "quickly", "often", "always", "never", "carefully", "gladly", "soon",
    "today",
];

const DETS: &[&str] = &["the", "a", "every", "some", "this", "that", "each"];

const ADPS: &[&str] = &[
    "in", "on", "under", "near", "behind", "beside", "above", "across", "through",
];

const PRONS: &[&str] = &["he", "she", "it", "someone"];

const SCONJS: &[&str] = &["while", "when", "because", "although", "if"];

const MAX_SENTENCE_LEN: usize = 20;

pub struct EngenConfig {
    pub train_tokens: usize,
    pub treebank_sentences: usize,
    pub seed: u64,
}

impl Default for EngenConfig {
    fn default() -> Self {
        EngenConfig {
            train_tokens: 400_000,
            treebank_sentences: 6_000,
            seed: 0,
        }
    }
}

pub struct EngenOutput {
    /// Whitespace-separated lowercase tokens, one sentence per line.
    pub corpus_text: String,
    /// Held-out parsed sentences from an independent stream.
    pub treebank: Vec<DepSentence>,
}

/// Zipf-ish pick: weight 1/sqrt(rank+1) over a word list.
fn pick<'a>(rng: &mut Rng, words: &[&'a str]) -> &'a str {
    let total: f64 = (0..words.len()).map(|i| 1.0 / ((i + 1) as f64).sqrt()).sum();
    let mut target = rng.next_f64() * total;
    for (i, w) in words.iter().enumerate() {
        target -= 1.0 / ((i + 1) as f64).sqrt();
        if target <= 0.0 {
            return w;
        }
    }
    words[words.len() - 1]
}

/// Sentence under construction; heads are 0-based with usize::MAX = root
/// until converted.
struct Draft {
    forms: Vec<&'static str>,
    upos: Vec<&'static str>,
    heads: Vec<usize>,
    deprels: Vec<&'static str>,
}

const PENDING: usize = usize::MAX - 1;
const ROOT: usize = usize::MAX;

impl Draft {
    fn new() -> Self {
        Draft {
            forms: Vec::new(),
            upos: Vec::new(),
            heads: Vec::new(),
            deprels: Vec::new(),
        }
    }

    fn push(&mut self, form: &'static str, upos: &'static str, head: usize, deprel: &'static str) -> usize {
        self.forms.push(form);
        self.upos.push(upos);
        self.heads.push(head);
        self.deprels.push(deprel);
        self.forms.len() - 1
    }

    fn len(&self) -> usize {
        self.forms.len()
    }

    fn into_sentence(self) -> DepSentence {
        DepSentence {
            forms: self.forms.iter().map(|s| s.to_string()).collect(),
            upos: self.upos.iter().map(|s| s.to_string()).collect(),
            heads: self
                .heads
                .iter()
                .map(|&h| if h == ROOT { 0 } else { h + 1 })
                .collect(),
            deprels: self.deprels.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Noun phrase: (DET) ADJ* NOUN (PP)?; returns the head-noun index. The
/// caller patches the head noun's attachment.
fn gen_np(rng: &mut Rng, depth: usize, d: &mut Draft) -> usize {
    let det = d.push(pick(rng, DETS), "DET", PENDING, "det");
    let n_adj = {
        let r = rng.next_f64();
        if r < 0.55 {
            0
        } else if r < 0.88 {
            1
        } else {
            2
        }
    };
    let mut adjs = Vec::new();
    for _ in 0..n_adj {
        adjs.push(d.push(pick(rng, ADJS), "ADJ", PENDING, "amod"));
    }
    let noun = d.push(pick(rng, NOUNS), "NOUN", PENDING, "dep");
    d.heads[det] = noun;
    for a in adjs {
        d.heads[a] = noun;
    }
    if depth < 2 && rng.next_f64() < 0.28 {
        let adp = d.push(pick(rng, ADPS), "ADP", PENDING, "case");
        let inner = gen_np(rng, depth + 1, d);
        d.heads[adp] = inner;
        d.heads[inner] = noun;
        d.deprels[inner] = "nmod";
    }
    noun
}

/// Verb phrase; patches `subj` to attach to the verb and returns the verb
/// index. The verb's own head stays pending for the caller.
fn gen_vp(rng: &mut Rng, d: &mut Draft, subj: usize) -> usize {
    let pre_adv = if rng.next_f64() < 0.10 {
        Some(d.push(pick(rng, ADVS), "ADV", PENDING, "advmod"))
    } else {
        None
    };
    let transitive = rng.next_f64() < 0.62;
    let verb = if transitive {
        d.push(pick(rng, VERBS_TRANS), "VERB", PENDING, "dep")
    } else {
        d.push(pick(rng, VERBS_INTRANS), "VERB", PENDING, "dep")
    };
    d.heads[subj] = verb;
    d.deprels[subj] = "nsubj";
    if let Some(a) = pre_adv {
        d.heads[a] = verb;
    }
    if transitive {
        let obj = gen_np(rng, 0, d);
        d.heads[obj] = verb;
        d.deprels[obj] = "obj";
    }
    if rng.next_f64() < 0.30 {
        let adp = d.push(pick(rng, ADPS), "ADP", PENDING, "case");
        let inner = gen_np(rng, 1, d);
        d.heads[adp] = inner;
        d.heads[inner] = verb;
        d.deprels[inner] = "obl";
    }
    if rng.next_f64() < 0.18 {
        let a = d.push(pick(rng, ADVS), "ADV", PENDING, "advmod");
        d.heads[a] = verb;
    }
    verb
}

fn gen_subject(rng: &mut Rng, d: &mut Draft) -> usize {
    if rng.next_f64() < 0.15 {
        d.push(pick(rng, PRONS), "PRON", PENDING, "nsubj")
    } else {
        gen_np(rng, 0, d)
    }
}

fn try_sentence(rng: &mut Rng) -> Draft {
    let mut d = Draft::new();
    let subj = gen_subject(rng, &mut d);
    let verb = gen_vp(rng, &mut d, subj);
    d.heads[verb] = ROOT;
    d.deprels[verb] = "root";
    if rng.next_f64() < 0.22 {
        let sconj = d.push(pick(rng, SCONJS), "SCONJ", PENDING, "mark");
        let esubj = gen_subject(rng, &mut d);
        let everb = gen_vp(rng, &mut d, esubj);
        d.heads[sconj] = everb;
        d.heads[everb] = verb;
        d.deprels[everb] = "advcl";
    }
    let punct = d.push(".", "PUNCT", PENDING, "punct");
    d.heads[punct] = verb;
    d
}

/// One grammatical sentence, resampling past the length cap.
pub fn gen_sentence(rng: &mut Rng) -> DepSentence {
    loop {
        let d = try_sentence(rng);
        if d.len() <= MAX_SENTENCE_LEN {
            let s = d.into_sentence();
            debug_assert!(s.is_tree());
            return s;
        }
    }
}

/// Generates the plain-text corpus and the held-out treebank.
pub fn generate(cfg: &EngenConfig) -> EngenOutput {
    let mut train_rng = Rng::for_purpose(cfg.seed, "engen.train");
    let mut corpus_text = String::with_capacity(cfg.train_tokens * 6);
    let mut tokens = 0usize;
    while tokens < cfg.train_tokens {
        let s = gen_sentence(&mut train_rng);
        for (i, form) in s.forms.iter().enumerate() {
            if i > 0 {
                corpus_text.push(' ');
            }
            corpus_text.push_str(form);
        }
        corpus_text.push('\n');
        tokens += s.len();
    }

    let mut tb_rng = Rng::for_purpose(cfg.seed, "engen.treebank");
    let treebank = (0..cfg.treebank_sentences)
        .map(|_| gen_sentence(&mut tb_rng))
        .collect();

    EngenOutput {
        corpus_text,
        treebank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gatescope_core::ud::{pos_class, syn_distance, PosClass};

    #[test]
    fn sentences_are_trees_with_sane_tags() {
        let mut rng = Rng::from_seed(5);
        for _ in 0..200 {
            let s = gen_sentence(&mut rng);
            assert!(s.is_tree());
            assert!(s.len() <= MAX_SENTENCE_LEN);
            assert_eq!(s.upos.last().unwrap(), "PUNCT");
            assert_eq!(s.forms.last().unwrap(), ".");
            // exactly one root, every non-root reachable
            for i in 0..s.len() - 1 {
                for j in i + 1..s.len() {
                    let _ = syn_distance(&s, i, j).unwrap();
                }
            }
        }
    }

    #[test]
    fn deterministic_and_streams_independent() {
        let cfg = EngenConfig {
            train_tokens: 2000,
            treebank_sentences: 50,
            seed: 3,
        };
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.corpus_text, b.corpus_text);
        assert_eq!(a.treebank, b.treebank);
        // the treebank is not a prefix of the training text
        let first_tb: String = a.treebank[0].forms.join(" ");
        let first_train: String = a.corpus_text.lines().next().unwrap().to_string();
        assert_ne!(first_tb, first_train);
    }

    #[test]
    fn corpus_covers_requested_tokens_and_vocab() {
        let cfg = EngenConfig {
            train_tokens: 30_000,
            treebank_sentences: 1,
            seed: 1,
        };
        let out = generate(&cfg);
        let n_tokens = out.corpus_text.split_whitespace().count();
        assert!(n_tokens >= 30_000);
        // every word list contributes; rarest types still appear
        for w in NOUNS.iter().chain(ADJS).chain(DETS).chain(ADPS) {
            assert!(
                out.corpus_text.split_whitespace().any(|t| t == *w),
                "missing {w}"
            );
        }
    }

    #[test]
    fn open_and_closed_classes_both_present() {
        let mut rng = Rng::from_seed(8);
        let mut open = 0;
        let mut closed = 0;
        for _ in 0..100 {
            let s = gen_sentence(&mut rng);
            for u in &s.upos {
                match pos_class(u) {
                    PosClass::Open => open += 1,
                    PosClass::Closed => closed += 1,
                    PosClass::Other => {}
                }
            }
        }
        assert!(open > 200 && closed > 200, "open {open} closed {closed}");
    }

    #[test]
    fn syntactic_depth_varies() {
        // nested PPs must produce syn distances of 4+ somewhere
        let mut rng = Rng::from_seed(11);
        let mut max_d = 0;
        for _ in 0..300 {
            let s = gen_sentence(&mut rng);
            for i in 0..s.len() - 1 {
                for j in i + 1..s.len() {
                    if s.upos[i] != "PUNCT" && s.upos[j] != "PUNCT" {
                        max_d = max_d.max(syn_distance(&s, i, j).unwrap());
                    }
                }
            }
        }
        assert!(max_d >= 6, "max syntactic distance only {max_d}");
    }
}

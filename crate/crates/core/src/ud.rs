//! CoNLL-U treebank ingestion, dependency-tree distances, POS classes, and
//! stratified aggregation of pair measurements.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UdError {
    #[error("token index {index} out of range for sentence of {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("distance of a token to itself requested")]
    SameToken,
}

/// A dependency-parsed sentence with gold heads.
///
/// `heads[i]` is the 1-based index of token i's head, 0 for the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepSentence {
    pub forms: Vec<String>,
    pub upos: Vec<String>,
    pub heads: Vec<usize>,
    pub deprels: Vec<String>,
}

impl DepSentence {
    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// Checks that heads form a single rooted tree: one root, in-range heads,
    /// every token reaching the root without cycles.
    pub fn is_tree(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        if self.heads.iter().filter(|&&h| h == 0).count() != 1 {
            return false;
        }
        if self.heads.iter().any(|&h| h > n) {
            return false;
        }
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            loop {
                let head = self.heads[cur];
                if head == 0 {
                    break;
                }
                cur = head - 1;
                steps += 1;
                if steps > n {
                    return false; // cycle
                }
            }
        }
        true
    }
}

/// A problem encountered while parsing, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseIssue {
    pub line: usize,
    pub message: String,
}

/// Parse result: well-formed sentences plus diagnostics for everything
/// skipped.
#[derive(Debug, Clone, Default)]
pub struct ConlluDoc {
    pub sentences: Vec<DepSentence>,
    pub issues: Vec<ParseIssue>,
}

/// Parses CoNLL-U text.
///
/// Comment lines are skipped; multiword-token ranges (`1-2`) and empty nodes
/// (`1.1`) are skipped. A malformed row or a non-tree head assignment skips
/// the enclosing sentence with a diagnostic; parsing continues.
pub fn parse_conllu(text: &str) -> ConlluDoc {
    let mut doc = ConlluDoc::default();
    let mut current = DepSentence {
        forms: Vec::new(),
        upos: Vec::new(),
        heads: Vec::new(),
        deprels: Vec::new(),
    };
    let mut sentence_bad: Option<ParseIssue> = None;
    let mut sentence_start_line = 0usize;

    let flush = |current: &mut DepSentence,
                     bad: &mut Option<ParseIssue>,
                     doc: &mut ConlluDoc,
                     line: usize| {
        if current.is_empty() && bad.is_none() {
            return;
        }
        if let Some(issue) = bad.take() {
            doc.issues.push(issue);
        } else if !current.is_tree() {
            doc.issues.push(ParseIssue {
                line,
                message: "sentence skipped: heads do not form a single tree".into(),
            });
        } else {
            doc.sentences.push(current.clone());
        }
        current.forms.clear();
        current.upos.clear();
        current.heads.clear();
        current.deprels.clear();
    };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches(['\r']);
        if line.trim().is_empty() {
            flush(&mut current, &mut sentence_bad, &mut doc, sentence_start_line);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if current.is_empty() && sentence_bad.is_none() {
            sentence_start_line = lineno;
        }
        if sentence_bad.is_some() {
            continue; // rest of a sentence already marked bad
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            sentence_bad = Some(ParseIssue {
                line: lineno,
                message: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
            continue;
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue; // multiword-token range or empty node
        }
        let expected_id = current.len() + 1;
        match id.parse::<usize>() {
            Ok(n) if n == expected_id => {}
            _ => {
                sentence_bad = Some(ParseIssue {
                    line: lineno,
                    message: format!("bad token id {id:?}, expected {expected_id}"),
                });
                continue;
            }
        }
        let head = match cols[6].parse::<usize>() {
            Ok(h) => h,
            Err(_) => {
                sentence_bad = Some(ParseIssue {
                    line: lineno,
                    message: format!("bad head field {:?}", cols[6]),
                });
                continue;
            }
        };
        current.forms.push(cols[1].to_string());
        current.upos.push(cols[3].to_string());
        current.heads.push(head);
        current.deprels.push(cols[7].to_string());
    }
    flush(&mut current, &mut sentence_bad, &mut doc, sentence_start_line);
    doc
}

/// Serializes sentences back to CoNLL-U (unused fields become `_`).
pub fn write_conllu(sentences: &[DepSentence]) -> String {
    let mut out = String::new();
    for (si, s) in sentences.iter().enumerate() {
        out.push_str(&format!("# sent_id = {}\n", si + 1));
        for i in 0..s.len() {
            out.push_str(&format!(
                "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t_\n",
                i + 1,
                s.forms[i],
                s.upos[i],
                s.heads[i],
                s.deprels[i]
            ));
        }
        out.push('\n');
    }
    out
}

/// Number of edges on the unique undirected path between tokens `l` and `r`
/// in the dependency tree (0-based token indices).
pub fn syn_distance(s: &DepSentence, l: usize, r: usize) -> Result<usize, UdError> {
    let n = s.len();
    if l >= n {
        return Err(UdError::IndexOutOfRange { index: l, len: n });
    }
    if r >= n {
        return Err(UdError::IndexOutOfRange { index: r, len: n });
    }
    if l == r {
        return Err(UdError::SameToken);
    }
    // undirected adjacency over head links
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &h) in s.heads.iter().enumerate() {
        if h > 0 {
            adj[i].push(h - 1);
            adj[h - 1].push(i);
        }
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    dist[l] = 0;
    queue.push_back(l);
    while let Some(u) = queue.pop_front() {
        if u == r {
            return Ok(dist[u]);
        }
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    // is_tree() guarantees connectivity for parsed sentences
    Err(UdError::IndexOutOfRange { index: r, len: n })
}

/// Open/closed universal POS classes, a proxy for in-context predictability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosClass {
    Open,
    Closed,
    Other,
}

/// UD v2 taxonomy: open classes admit new members freely, closed classes are
/// grammatical. Unknown tags map to `Other`.
pub fn pos_class(upos: &str) -> PosClass {
    match upos {
        "ADJ" | "ADV" | "INTJ" | "NOUN" | "PROPN" | "VERB" => PosClass::Open,
        "ADP" | "AUX" | "CCONJ" | "DET" | "NUM" | "PART" | "PRON" | "SCONJ" => PosClass::Closed,
        _ => PosClass::Other,
    }
}

/// Pair-level class of a (left, right) token pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairClass {
    ClosedClosed,
    OpenOpen,
    Mixed,
    Other,
}

pub fn pair_class(a: PosClass, b: PosClass) -> PairClass {
    match (a, b) {
        (PosClass::Other, _) | (_, PosClass::Other) => PairClass::Other,
        (PosClass::Closed, PosClass::Closed) => PairClass::ClosedClosed,
        (PosClass::Open, PosClass::Open) => PairClass::OpenOpen,
        _ => PairClass::Mixed,
    }
}

impl std::fmt::Display for PairClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PairClass::ClosedClosed => "closed-closed",
            PairClass::OpenOpen => "open-open",
            PairClass::Mixed => "mixed",
            PairClass::Other => "other",
        };
        f.write_str(s)
    }
}

/// One measured (word-l, word-r) pair joined with tree structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub sentence_id: usize,
    pub l: usize,
    pub r: usize,
    pub seq_dist: usize,
    pub syn_dist: usize,
    pub class: PairClass,
    pub value: f64,
}

/// Aggregation cell key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StratKey {
    pub seq_dist: usize,
    pub syn_dist: usize,
    pub class: PairClass,
}

/// Aggregation cell: mean, count, standard error, and whether the cell falls
/// below the reporting threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StratCell {
    pub mean: f64,
    pub count: usize,
    pub stderr: f64,
    pub suppressed: bool,
}

/// Groups records by (seq_dist, syn_dist, class) and aggregates. Cells with
/// fewer than `min_cases` records keep their statistics but are flagged
/// suppressed.
pub fn stratify(records: &[PairRecord], min_cases: usize) -> BTreeMap<StratKey, StratCell> {
    let mut sums: BTreeMap<StratKey, (f64, f64, usize)> = BTreeMap::new();
    for rec in records {
        let key = StratKey {
            seq_dist: rec.seq_dist,
            syn_dist: rec.syn_dist,
            class: rec.class,
        };
        let entry = sums.entry(key).or_insert((0.0, 0.0, 0));
        entry.0 += rec.value;
        entry.1 += rec.value * rec.value;
        entry.2 += 1;
    }
    sums.into_iter()
        .map(|(key, (sum, sumsq, count))| {
            let n = count as f64;
            let mean = sum / n;
            let var = if count > 1 {
                ((sumsq - sum * sum / n) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            let stderr = (var / n).sqrt();
            (
                key,
                StratCell {
                    mean,
                    count,
                    stderr,
                    suppressed: count < min_cases,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The six-token example sentence: "The chimney sweep has sick lungs".
    fn chimney_sentence() -> DepSentence {
        DepSentence {
            forms: ["The", "chimney", "sweep", "has", "sick", "lungs"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            upos: ["DET", "NOUN", "NOUN", "VERB", "ADJ", "NOUN"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            heads: vec![3, 3, 4, 0, 6, 4],
            deprels: ["det", "nmod", "nsubj", "root", "obj", "amod"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    fn chimney_conllu() -> String {
        "# text = The chimney sweep has sick lungs\n\
         1\tThe\t_\tDET\t_\t_\t3\tdet\t_\t_\n\
         2\tchimney\t_\tNOUN\t_\t_\t3\tnmod\t_\t_\n\
         3\tsweep\t_\tNOUN\t_\t_\t4\tnsubj\t_\t_\n\
         4\thas\t_\tVERB\t_\t_\t0\troot\t_\t_\n\
         5\tsick\t_\tADJ\t_\t_\t6\tamod\t_\t_\n\
         6\tlungs\t_\tNOUN\t_\t_\t4\tobj\t_\t_\n"
            .to_string()
    }

    #[test]
    fn parses_example_sentence_heads() {
        let doc = parse_conllu(&chimney_conllu());
        assert!(doc.issues.is_empty());
        assert_eq!(doc.sentences.len(), 1);
        let s = &doc.sentences[0];
        assert_eq!(s.heads, vec![3, 3, 4, 0, 6, 4]);
        assert_eq!(s.forms[1], "chimney");
        assert_eq!(s.upos[4], "ADJ");
    }

    #[test]
    fn example_distances_one_two_four() {
        let s = chimney_sentence();
        // chimney -> sweep, has, sick
        assert_eq!(syn_distance(&s, 1, 2).unwrap(), 1);
        assert_eq!(syn_distance(&s, 1, 3).unwrap(), 2);
        assert_eq!(syn_distance(&s, 1, 4).unwrap(), 4);
    }

    #[test]
    fn distance_is_a_metric() {
        let s = chimney_sentence();
        let n = s.len();
        // brute-force all-pairs: symmetry and triangle inequality
        let mut d = vec![vec![0usize; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    d[i][j] = syn_distance(&s, i, j).unwrap();
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert_eq!(d[i][j], d[j][i]);
                for k in 0..n {
                    assert!(d[i][j] <= d[i][k] + d[k][j]);
                }
            }
        }
        assert!(matches!(syn_distance(&s, 2, 2), Err(UdError::SameToken)));
        assert!(syn_distance(&s, 0, 6).is_err());
    }

    #[test]
    fn empty_input_gives_empty_doc() {
        let doc = parse_conllu("");
        assert!(doc.sentences.is_empty());
        assert!(doc.issues.is_empty());
    }

    #[test]
    fn bad_row_skips_only_its_sentence() {
        let good = chimney_conllu();
        let bad = "1\tbroken row with too few columns\n";
        let text = format!("{good}\n{bad}\n\n{good}");
        let doc = parse_conllu(&text);
        assert_eq!(doc.sentences.len(), 2);
        assert_eq!(doc.issues.len(), 1);
        assert!(doc.issues[0].message.contains("10 tab-separated"));
    }

    #[test]
    fn multiword_ranges_and_empty_nodes_skipped() {
        let text = "1-2\tcannot\t_\t_\t_\t_\t_\t_\t_\t_\n\
                    1\tcan\t_\tAUX\t_\t_\t0\troot\t_\t_\n\
                    2\tnot\t_\tPART\t_\t_\t1\tadvmod\t_\t_\n\
                    2.1\telided\t_\t_\t_\t_\t_\t_\t_\t_\n";
        let doc = parse_conllu(text);
        assert_eq!(doc.sentences.len(), 1);
        assert_eq!(doc.sentences[0].forms, vec!["can", "not"]);
    }

    #[test]
    fn cyclic_or_multi_root_sentences_skipped_with_warning() {
        let cyclic = "1\ta\t_\tNOUN\t_\t_\t2\tdep\t_\t_\n\
                      2\tb\t_\tNOUN\t_\t_\t1\tdep\t_\t_\n";
        let doc = parse_conllu(cyclic);
        assert!(doc.sentences.is_empty());
        assert_eq!(doc.issues.len(), 1);

        let multiroot = "1\ta\t_\tNOUN\t_\t_\t0\troot\t_\t_\n\
                         2\tb\t_\tNOUN\t_\t_\t0\troot\t_\t_\n";
        let doc = parse_conllu(multiroot);
        assert!(doc.sentences.is_empty());
        assert_eq!(doc.issues.len(), 1);
    }

    #[test]
    fn round_trip_preserves_structure() {
        let doc = parse_conllu(&chimney_conllu());
        let text = write_conllu(&doc.sentences);
        let again = parse_conllu(&text);
        assert_eq!(doc.sentences, again.sentences);
    }

    #[test]
    fn pos_classes_are_total() {
        assert_eq!(pos_class("DET"), PosClass::Closed);
        assert_eq!(pos_class("ADJ"), PosClass::Open);
        assert_eq!(pos_class("SYM"), PosClass::Other);
        assert_eq!(pos_class("PUNCT"), PosClass::Other);
        assert_eq!(pos_class("???"), PosClass::Other);
        // every UD v2 tag maps to exactly one class
        let all = [
            "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON",
            "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
        ];
        let open = all.iter().filter(|t| pos_class(t) == PosClass::Open).count();
        let closed = all
            .iter()
            .filter(|t| pos_class(t) == PosClass::Closed)
            .count();
        let other = all
            .iter()
            .filter(|t| pos_class(t) == PosClass::Other)
            .count();
        assert_eq!((open, closed, other), (6, 8, 3));
    }

    #[test]
    fn pair_classes() {
        assert_eq!(
            pair_class(PosClass::Closed, PosClass::Closed),
            PairClass::ClosedClosed
        );
        assert_eq!(pair_class(PosClass::Open, PosClass::Open), PairClass::OpenOpen);
        assert_eq!(pair_class(PosClass::Open, PosClass::Closed), PairClass::Mixed);
        assert_eq!(pair_class(PosClass::Other, PosClass::Open), PairClass::Other);
    }

    fn rec(seq: usize, syn: usize, class: PairClass, value: f64) -> PairRecord {
        PairRecord {
            sentence_id: 0,
            l: 0,
            r: seq,
            seq_dist: seq,
            syn_dist: syn,
            class,
            value,
        }
    }

    #[test]
    fn stratify_means_counts_and_suppression() {
        let mut records = Vec::new();
        for _ in 0..99 {
            records.push(rec(1, 1, PairClass::OpenOpen, 0.5));
        }
        for i in 0..120 {
            records.push(rec(2, 3, PairClass::Mixed, i as f64));
        }
        let table = stratify(&records, 100);
        let small = table[&StratKey {
            seq_dist: 1,
            syn_dist: 1,
            class: PairClass::OpenOpen,
        }];
        assert!(small.suppressed);
        assert_eq!(small.count, 99);
        assert!((small.mean - 0.5).abs() < 1e-12);
        assert_eq!(small.stderr, 0.0); // identical values

        let big = table[&StratKey {
            seq_dist: 2,
            syn_dist: 3,
            class: PairClass::Mixed,
        }];
        assert!(!big.suppressed);
        assert_eq!(big.count, 120);

        // independent two-pass oracle for mean and stderr
        let values: Vec<f64> = (0..120).map(|i| i as f64).collect();
        let mean = values.iter().sum::<f64>() / 120.0;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 119.0;
        let stderr = (var / 120.0).sqrt();
        assert!((big.mean - mean).abs() < 1e-12);
        assert!((big.stderr - stderr).abs() < 1e-12);
    }
}

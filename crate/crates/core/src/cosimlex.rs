//! Graded similarity of two words within a shared context.
//!
//! Entries are JSONL records:
//!
//! ```json
//! {"id": "e1", "word1": "bank", "word2": "river",
//!  "context1": {"tokens": [...], "index1": 3, "index2": 7},
//!  "context2": {"tokens": [...], "index1": 1, "index2": 5},
//!  "gold_sim_c1": 3.2, "gold_sim_c2": 6.1}
//! ```
//!
//! Each target is embedded by marking it in its context; the two targets of
//! a context are encoded in separate passes.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{mark_tokens, MarkedSentence};
use crate::embedding::{cosine_similarity, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::par;
use crate::stats::{pearson, spearman, CorrelationResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub tokens: Vec<String>,
    pub index1: usize,
    pub index2: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoSimEntry {
    pub id: String,
    pub word1: String,
    pub word2: String,
    pub context1: Context,
    pub context2: Context,
    pub gold_sim_c1: f64,
    pub gold_sim_c2: f64,
}

impl CoSimEntry {
    /// Both words must sit at their stated positions (compared
    /// case-insensitively) in both contexts.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() || self.id.contains(['\t', '\n']) {
            return Err("entry id must be non-empty without tabs or newlines".into());
        }
        for (k, c) in [(1, &self.context1), (2, &self.context2)] {
            if c.index1 == c.index2 {
                return Err(format!("context{k}: both targets at position {}", c.index1));
            }
            for (word, idx) in [(&self.word1, c.index1), (&self.word2, c.index2)] {
                let tok = c
                    .tokens
                    .get(idx)
                    .ok_or_else(|| format!("context{k}: position {idx} outside {} tokens", c.tokens.len()))?;
                if tok.to_lowercase() != word.to_lowercase() {
                    return Err(format!("context{k}: token `{tok}` at {idx} is not `{word}`"));
                }
            }
        }
        if !(self.gold_sim_c1.is_finite() && self.gold_sim_c2.is_finite()) {
            return Err("gold similarities must be finite".into());
        }
        Ok(())
    }

    pub fn context(&self, which: u8) -> &Context {
        if which == 1 {
            &self.context1
        } else {
            &self.context2
        }
    }
}

pub fn read_entries(path: impl AsRef<Path>) -> Result<Vec<CoSimEntry>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CoSimEntry = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        entry.validate().map_err(|m| Error::parse(path, i + 1, m))?;
        if !seen.insert(entry.id.clone()) {
            return Err(Error::DuplicateId(entry.id));
        }
        out.push(entry);
    }
    Ok(out)
}

/// Produces one vector for the marked target of a sentence.
pub trait TargetEncoder: Sync {
    fn encode(&self, sentence: &MarkedSentence) -> Result<Vec<f64>>;
}

impl<F> TargetEncoder for F
where
    F: Fn(&MarkedSentence) -> Result<Vec<f64>> + Sync,
{
    fn encode(&self, sentence: &MarkedSentence) -> Result<Vec<f64>> {
        self(sentence)
    }
}

/// Identifier of the vector for target `which` (1 or 2) of context `ctx`.
pub fn request_id(entry_id: &str, ctx: u8, which: u8) -> String {
    format!("{entry_id}:c{ctx}:t{which}")
}

/// The marked sentences an external encoder has to embed, keyed by
/// [`request_id`].
pub fn encoding_requests(entries: &[CoSimEntry]) -> Vec<(String, MarkedSentence)> {
    let mut out = Vec::with_capacity(entries.len() * 4);
    for e in entries {
        for ctx in [1, 2] {
            let c = e.context(ctx);
            for (which, idx) in [(1, c.index1), (2, c.index2)] {
                out.push((request_id(&e.id, ctx, which), mark_tokens(&c.tokens, idx)));
            }
        }
    }
    out
}

/// Serves precomputed vectors: marked sentences are resolved to request ids,
/// request ids to embedding rows.
pub struct LookupEncoder<'a> {
    by_text: HashMap<String, &'a [f32]>,
}

impl<'a> LookupEncoder<'a> {
    pub fn new(requests: &[(String, MarkedSentence)], embeddings: &'a EmbeddingMatrix) -> Result<Self> {
        let mut by_text = HashMap::with_capacity(requests.len());
        for (id, s) in requests {
            by_text.insert(s.text(), embeddings.get(id)?);
        }
        Ok(LookupEncoder { by_text })
    }
}

impl TargetEncoder for LookupEncoder<'_> {
    fn encode(&self, sentence: &MarkedSentence) -> Result<Vec<f64>> {
        let text = sentence.text();
        self.by_text
            .get(&text)
            .map(|v| v.iter().map(|&x| f64::from(x)).collect())
            .ok_or(Error::MissingEmbedding(text))
    }
}

/// Cosine similarity of the two targets of `tokens`, each embedded with its
/// own marking.
pub fn predict_sim(tokens: &[String], pos1: usize, pos2: usize, encoder: &dyn TargetEncoder) -> Result<f64> {
    for p in [pos1, pos2] {
        if p >= tokens.len() {
            return Err(Error::Domain(format!("target position {p} outside {} tokens", tokens.len())));
        }
    }
    let a = encoder.encode(&mark_tokens(tokens, pos1))?;
    let b = encoder.encode(&mark_tokens(tokens, pos2))?;
    cosine_similarity(&a, &b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub c1: f64,
    pub c2: f64,
}

pub fn predict_all(entries: &[CoSimEntry], encoder: &dyn TargetEncoder) -> Result<Vec<Prediction>> {
    par::try_map(entries, |e| {
        let p = |c: &Context| predict_sim(&c.tokens, c.index1, c.index2, encoder);
        Ok(Prediction {
            c1: p(&e.context1)?,
            c2: p(&e.context2)?,
        })
    })
}

fn check_lengths(entries: &[CoSimEntry], preds: &[Prediction]) -> Result<()> {
    if entries.len() != preds.len() {
        return Err(Error::DimensionMismatch {
            expected: entries.len(),
            actual: preds.len(),
        });
    }
    Ok(())
}

/// Pearson correlation between gold and predicted changes of similarity
/// from the first context to the second.
pub fn subtask1(entries: &[CoSimEntry], preds: &[Prediction]) -> Result<CorrelationResult> {
    check_lengths(entries, preds)?;
    let gold: Vec<f64> = entries.iter().map(|e| e.gold_sim_c2 - e.gold_sim_c1).collect();
    let pred: Vec<f64> = preds.iter().map(|p| p.c2 - p.c1).collect();
    pearson(&pred, &gold)
}

/// Spearman correlation over all contexts, each treated as its own example.
pub fn subtask2(entries: &[CoSimEntry], preds: &[Prediction]) -> Result<CorrelationResult> {
    check_lengths(entries, preds)?;
    let gold: Vec<f64> = entries.iter().flat_map(|e| [e.gold_sim_c1, e.gold_sim_c2]).collect();
    let pred: Vec<f64> = preds.iter().flat_map(|p| [p.c1, p.c2]).collect();
    spearman(&pred, &gold)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoSimReport {
    pub entries: usize,
    pub subtask1: CorrelationResult,
    pub subtask2: CorrelationResult,
}

pub fn evaluate(entries: &[CoSimEntry], preds: &[Prediction]) -> Result<CoSimReport> {
    Ok(CoSimReport {
        entries: entries.len(),
        subtask1: subtask1(entries, preds)?,
        subtask2: subtask2(entries, preds)?,
    })
}

/// `entry_id<TAB>context<TAB>pred_sim` with a header line.
pub fn format_predictions(entries: &[CoSimEntry], preds: &[Prediction]) -> String {
    let mut out = String::from("entry_id\tcontext\tpred_sim\n");
    for (e, p) in entries.iter().zip(preds) {
        out.push_str(&format!("{}\t1\t{}\n{}\t2\t{}\n", e.id, p.c1, e.id, p.c2));
    }
    out
}

/// Reads cached predictions back in entry order.
pub fn read_predictions(path: impl AsRef<Path>, entries: &[CoSimEntry]) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut found: HashMap<&str, [Option<f64>; 2]> = entries.iter().map(|e| (e.id.as_str(), [None, None])).collect();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') || line.starts_with("entry_id\t") {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = |m: String| Error::parse(path, i + 1, m);
        if f.len() != 3 {
            return Err(bad("expected entry_id<TAB>context<TAB>pred_sim".into()));
        }
        let slot = found.get_mut(f[0]).ok_or_else(|| bad(format!("unknown entry `{}`", f[0])))?;
        let k = match f[1] {
            "1" => 0,
            "2" => 1,
            c => return Err(bad(format!("context must be 1 or 2, got `{c}`"))),
        };
        let v: f64 = f[2].parse().map_err(|_| bad(format!("invalid similarity `{}`", f[2])))?;
        if slot[k].replace(v).is_some() {
            return Err(bad(format!("duplicate prediction for `{}` context {}", f[0], f[1])));
        }
    }
    entries
        .iter()
        .map(|e| match found[e.id.as_str()] {
            [Some(c1), Some(c2)] => Ok(Prediction { c1, c2 }),
            _ => Err(Error::Unmapped(format!("missing prediction for entry `{}`", e.id))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn entry(id: &str, g1: f64, g2: f64) -> CoSimEntry {
        let mut e = CoSimEntry {
            id: id.into(),
            word1: "bank".into(),
            word2: "river".into(),
            context1: Context {
                tokens: toks("the Bank of the river"),
                index1: 1,
                index2: 4,
            },
            context2: Context {
                tokens: toks("river water reached the bank"),
                index1: 4,
                index2: 0,
            },
            gold_sim_c1: g1,
            gold_sim_c2: g2,
        };
        // keep contexts distinct across entries
        e.context1.tokens[0] = id.to_string();
        e.context2.tokens[3] = id.to_string();
        e
    }

    /// Encodes a marked target as a fixed vector per target word.
    fn word_encoder(table: &'static [(&'static str, [f64; 2])]) -> impl Fn(&MarkedSentence) -> Result<Vec<f64>> + Sync {
        move |s: &MarkedSentence| {
            let w = s.target().to_lowercase();
            table
                .iter()
                .find(|(k, _)| *k == w)
                .map(|(_, v)| v.to_vec())
                .ok_or(Error::MissingEmbedding(w))
        }
    }

    #[test]
    fn predict_sim_examples() {
        let t = toks("the bank of the river");
        let same = word_encoder(&[("bank", [1.0, 1.0]), ("river", [2.0, 2.0])]);
        assert!((predict_sim(&t, 1, 4, &same).unwrap() - 1.0).abs() < 1e-15);
        let orth = word_encoder(&[("bank", [1.0, 0.0]), ("river", [0.0, 3.0])]);
        assert_eq!(predict_sim(&t, 1, 4, &orth).unwrap(), 0.0);
        let toy = word_encoder(&[("bank", [1.0, 2.0]), ("river", [2.0, 1.0])]);
        assert!((predict_sim(&t, 1, 4, &toy).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(predict_sim(&t, 4, 1, &toy).unwrap(), predict_sim(&t, 1, 4, &toy).unwrap());
        let zero = word_encoder(&[("bank", [0.0, 0.0]), ("river", [1.0, 0.0])]);
        assert!(predict_sim(&t, 1, 4, &zero).is_err());
        assert!(predict_sim(&t, 1, 9, &toy).is_err());
    }

    #[test]
    fn validation() {
        assert!(entry("e", 1.0, 2.0).validate().is_ok());
        let mut e = entry("e", 1.0, 2.0);
        e.context1.index2 = 3;
        assert!(e.validate().unwrap_err().contains("not `river`"));
        let mut e = entry("e", 1.0, 2.0);
        e.context2.index1 = 10;
        assert!(e.validate().is_err());
        let mut e = entry("e", 1.0, 2.0);
        e.context2.index2 = 4;
        assert!(e.validate().is_err());
    }

    #[test]
    fn subtask_examples() {
        let gold = [0.1, -0.2, 0.3, 0.0];
        let pred = [0.2, -0.1, 0.25, 0.05];
        let entries: Vec<CoSimEntry> = gold.iter().enumerate().map(|(i, &g)| entry(&format!("e{i}"), 0.5, 0.5 + g)).collect();
        let preds: Vec<Prediction> = pred.iter().map(|&p| Prediction { c1: 0.1, c2: 0.1 + p }).collect();
        let r = subtask1(&entries, &preds).unwrap().coefficient;
        // centered: gold (.05,-.25,.25,-.05), pred (.1,-.2,.15,-.05)
        let expected = 0.095 / (0.13f64 * 0.075).sqrt();
        assert!((r - expected).abs() < 1e-12, "{r} vs {expected}");
        let doubled: Vec<Prediction> = preds.iter().map(|p| Prediction { c1: 2.0 * p.c1 + 7.0, c2: 2.0 * p.c2 + 7.0 }).collect();
        assert!((subtask1(&entries, &doubled).unwrap().coefficient - r).abs() < 1e-12);

        let mono: Vec<Prediction> = entries.iter().map(|e| Prediction { c1: e.gold_sim_c1.exp(), c2: e.gold_sim_c2.exp() }).collect();
        let distinct: Vec<CoSimEntry> = entries.iter().enumerate().map(|(i, e)| CoSimEntry { gold_sim_c1: i as f64 * 10.0, ..e.clone() }).collect();
        let mono_d: Vec<Prediction> = distinct.iter().zip(&mono).map(|(e, p)| Prediction { c1: e.gold_sim_c1, c2: p.c2 }).collect();
        assert!((subtask2(&distinct, &mono_d).unwrap().coefficient - 1.0).abs() < 1e-12);
        let rev: Vec<Prediction> = mono_d.iter().map(|p| Prediction { c1: -p.c1, c2: -p.c2 }).collect();
        assert!((subtask2(&distinct, &rev).unwrap().coefficient + 1.0).abs() < 1e-12);
        assert!(subtask1(&entries[..2], &preds[..2]).is_err());
        assert!(subtask1(&entries, &preds[..3]).is_err());
    }

    #[test]
    fn lookup_round_trip_and_prediction_cache() {
        let entries = vec![entry("a", 1.0, 2.0), entry("b", 3.0, 1.0), entry("c", 2.0, 2.5)];
        let requests = encoding_requests(&entries);
        assert_eq!(requests.len(), 12);
        assert_eq!(requests[0].0, "a:c1:t1");
        assert_eq!(requests[0].1.target(), "Bank");
        let rows: Vec<Vec<f32>> = (0..requests.len()).map(|i| vec![1.0, i as f32]).collect();
        let ids: Vec<String> = requests.iter().map(|(id, _)| id.clone()).collect();
        let m = EmbeddingMatrix::from_rows(ids, &rows).unwrap();
        let enc = LookupEncoder::new(&requests, &m).unwrap();
        let preds = predict_all(&entries, &enc).unwrap();
        let expected = cosine_similarity(&[1.0f64, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(preds[0].c1, expected);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("preds.tsv");
        fs::write(&p, format_predictions(&entries, &preds)).unwrap();
        assert_eq!(read_predictions(&p, &entries).unwrap(), preds);
        fs::write(&p, "a\t1\t0.5\n").unwrap();
        assert!(matches!(read_predictions(&p, &entries), Err(Error::Unmapped(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn subtask1_ignores_constant_shift(
                vals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 3..20),
                shift in -1.0f64..1.0,
            ) {
                let entries: Vec<CoSimEntry> = vals.iter().enumerate().map(|(i, v)| entry(&format!("e{i}"), v.0, v.1)).collect();
                let preds: Vec<Prediction> = vals.iter().map(|v| Prediction { c1: v.2, c2: v.3 }).collect();
                if let Ok(r) = subtask1(&entries, &preds) {
                    let shifted: Vec<Prediction> = preds.iter().map(|p| Prediction { c1: p.c1 + shift, c2: p.c2 + shift }).collect();
                    prop_assert!((subtask1(&entries, &shifted).unwrap().coefficient - r.coefficient).abs() < 1e-9);
                }
            }
        }
    }
}

//! Lexical semantic change scores from usages in two time periods.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_distance, mean_of, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::par;
use crate::stats::{spearman, CorrelationResult};

#[derive(Clone, Debug, PartialEq)]
pub struct DiachronicTarget {
    word: String,
    usages_t1: Vec<String>,
    usages_t2: Vec<String>,
    gold_change: f64,
}

impl DiachronicTarget {
    pub fn new(word: impl Into<String>, usages_t1: Vec<String>, usages_t2: Vec<String>, gold_change: f64) -> Result<Self> {
        let word = word.into();
        if usages_t1.is_empty() || usages_t2.is_empty() {
            return Err(Error::Domain(format!("target `{word}` needs usages in both periods")));
        }
        let first: BTreeSet<&String> = usages_t1.iter().collect();
        if let Some(shared) = usages_t2.iter().find(|u| first.contains(u)) {
            return Err(Error::Domain(format!("target `{word}`: usage `{shared}` appears in both periods")));
        }
        Ok(DiachronicTarget {
            word,
            usages_t1,
            usages_t2,
            gold_change,
        })
    }

    pub fn word(&self) -> &str {
        &self.word
    }

    pub fn usages(&self) -> (&[String], &[String]) {
        (&self.usages_t1, &self.usages_t2)
    }

    pub fn gold_change(&self) -> f64 {
        self.gold_change
    }
}

fn vectors<'a>(ids: &[String], m: &'a EmbeddingMatrix) -> Result<Vec<&'a [f32]>> {
    ids.iter().map(|id| m.get(id)).collect()
}

/// Average pairwise cosine distance between the two periods' usages.
pub fn apd(target: &DiachronicTarget, embeddings: &EmbeddingMatrix) -> Result<f64> {
    let t1 = vectors(&target.usages_t1, embeddings)?;
    let t2 = vectors(&target.usages_t2, embeddings)?;
    let mut sum = 0.0;
    for u in &t1 {
        for v in &t2 {
            sum += cosine_distance(u, v)?;
        }
    }
    Ok(sum / (t1.len() * t2.len()) as f64)
}

/// Cosine distance between the two periods' mean usage vectors.
pub fn prt(target: &DiachronicTarget, embeddings: &EmbeddingMatrix) -> Result<f64> {
    let m1 = mean_of(vectors(&target.usages_t1, embeddings)?)?;
    let m2 = mean_of(vectors(&target.usages_t2, embeddings)?)?;
    cosine_distance(&m1, &m2).map_err(|e| Error::Domain(format!("prototype of `{}`: {e}", target.word)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetScore {
    pub word: String,
    pub apd: f64,
    pub prt: f64,
    pub gold: f64,
}

pub fn score_targets(targets: &[DiachronicTarget], embeddings: &EmbeddingMatrix) -> Result<Vec<TargetScore>> {
    par::try_map(targets, |t| {
        Ok(TargetScore {
            word: t.word.clone(),
            apd: apd(t, embeddings)?,
            prt: prt(t, embeddings)?,
            gold: t.gold_change,
        })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Apd,
    Prt,
}

/// Spearman correlation between one measure and the gold change scores.
pub fn rank_against_gold(scores: &[TargetScore], measure: Measure) -> Result<CorrelationResult> {
    if scores.len() < 3 {
        return Err(Error::Domain(format!("ranking needs at least 3 targets, got {}", scores.len())));
    }
    let pred: Vec<f64> = scores
        .iter()
        .map(|s| match measure {
            Measure::Apd => s.apd,
            Measure::Prt => s.prt,
        })
        .collect();
    let gold: Vec<f64> = scores.iter().map(|s| s.gold).collect();
    spearman(&pred, &gold)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LscdSummary {
    pub targets: usize,
    pub apd: CorrelationResult,
    pub prt: CorrelationResult,
}

pub fn summarize(scores: &[TargetScore]) -> Result<LscdSummary> {
    Ok(LscdSummary {
        targets: scores.len(),
        apd: rank_against_gold(scores, Measure::Apd)?,
        prt: rank_against_gold(scores, Measure::Prt)?,
    })
}

fn tsv_lines(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split('\t').map(|f| f.trim().to_string()).collect()))
        .collect())
}

/// Reads `word<TAB>gold_change` lines.
pub fn read_gold(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let path = path.as_ref();
    let mut gold = BTreeMap::new();
    for (line, f) in tsv_lines(path)? {
        if f.len() != 2 {
            return Err(Error::parse(path, line, "expected word<TAB>gold_change"));
        }
        let v: f64 = f[1]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(path, line, format!("invalid gold score `{}`", f[1])))?;
        if gold.insert(f[0].clone(), v).is_some() {
            return Err(Error::parse(path, line, format!("duplicate word `{}`", f[0])));
        }
    }
    Ok(gold)
}

/// Reads `word<TAB>period<TAB>occ_id` lines, period being 1 or 2.
pub fn read_usages(path: impl AsRef<Path>) -> Result<BTreeMap<String, (Vec<String>, Vec<String>)>> {
    let path = path.as_ref();
    let mut usages: BTreeMap<String, (Vec<String>, Vec<String>)> = BTreeMap::new();
    for (line, f) in tsv_lines(path)? {
        if f.len() != 3 {
            return Err(Error::parse(path, line, "expected word<TAB>period<TAB>occ_id"));
        }
        let entry = usages.entry(f[0].clone()).or_default();
        match f[1].as_str() {
            "1" => entry.0.push(f[2].clone()),
            "2" => entry.1.push(f[2].clone()),
            p => return Err(Error::parse(path, line, format!("period must be 1 or 2, got `{p}`"))),
        }
    }
    Ok(usages)
}

/// Joins gold scores with usage lists. Every gold word needs usages and
/// every usage word needs a gold score.
pub fn load_targets(gold_path: impl AsRef<Path>, usages_path: impl AsRef<Path>) -> Result<Vec<DiachronicTarget>> {
    let gold = read_gold(gold_path)?;
    let mut usages = read_usages(usages_path)?;
    if let Some(extra) = usages.keys().find(|w| !gold.contains_key(*w)) {
        return Err(Error::Unmapped(format!("usages given for `{extra}` which has no gold score")));
    }
    gold.into_iter()
        .map(|(word, g)| {
            let (t1, t2) = usages
                .remove(&word)
                .ok_or_else(|| Error::Unmapped(format!("no usages for target `{word}`")))?;
            DiachronicTarget::new(word, t1, t2, g)
        })
        .collect()
}

/// `word<TAB>apd<TAB>prt` with a header line.
pub fn format_scores(scores: &[TargetScore]) -> String {
    let mut out = String::from("word\tapd\tprt\n");
    for s in scores {
        out.push_str(&format!("{}\t{}\t{}\n", s.word, s.apd, s.prt));
    }
    out
}

//! Concept differentiation: decide whether two occurrences share a concept by
//! thresholding their cosine distance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adapter::AdapterParams;
use crate::embedding::{cosine_distance, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::par;
use crate::spcd::{LemmaRel, PairCategory, PairRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPair {
    pub pair: PairRecord,
    pub distance: f64,
}

/// Cosine distance for every pair, optionally after mapping both vectors
/// through an adapter.
pub fn score_pairs(pairs: &[PairRecord], embeddings: &EmbeddingMatrix, adapter: Option<&AdapterParams>) -> Result<Vec<ScoredPair>> {
    par::try_map(pairs, |p| {
        let a = embeddings.get(&p.occ_a)?;
        let b = embeddings.get(&p.occ_b)?;
        let distance = match adapter {
            Some(w) => cosine_distance(&w.apply(a)?, &w.apply(b)?)?,
            None => cosine_distance(a, b)?,
        };
        Ok(ScoredPair { pair: p.clone(), distance })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub threshold: f64,
    pub accuracy: f64,
}

/// Chooses the threshold that maximizes plain accuracy of `distance < θ`.
///
/// Candidates are the midpoints between consecutive distinct distances plus
/// one sentinel below the minimum and one above the maximum. Ties go to the
/// smallest candidate.
pub fn tune_threshold(scored: &[ScoredPair]) -> Result<ThresholdFit> {
    let positives = scored.iter().filter(|s| s.pair.label == 1).count();
    if positives == 0 || positives == scored.len() {
        return Err(Error::Domain("threshold tuning needs pairs of both labels".into()));
    }
    if scored.iter().any(|s| !s.distance.is_finite()) {
        return Err(Error::Domain("non-finite distance".into()));
    }
    let mut sorted: Vec<(f64, u8)> = scored.iter().map(|s| (s.distance, s.pair.label)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Below the minimum everything is predicted 0.
    let mut correct = (scored.len() - positives) as i64;
    let mut best = (sorted[0].0 - 1.0, correct);
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == v {
            correct += if sorted[i].1 == 1 { 1 } else { -1 };
            i += 1;
        }
        let theta = if i < sorted.len() { (v + sorted[i].0) / 2.0 } else { v + 1.0 };
        if correct > best.1 {
            best = (theta, correct);
        }
    }
    Ok(ThresholdFit {
        threshold: best.0,
        accuracy: best.1 as f64 / scored.len() as f64,
    })
}

pub fn classify(scored: &[ScoredPair], threshold: f64) -> Vec<u8> {
    scored.iter().map(|s| u8::from(s.distance < threshold)).collect()
}

/// Predicts "same concept" exactly when the two occurrences share a lemma.
pub fn baseline_1l1c(pairs: &[PairRecord]) -> Vec<u8> {
    pairs.iter().map(|p| u8::from(p.lemma_rel == LemmaRel::Same)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub pairs: usize,
    pub balanced_accuracy: f64,
    pub f1: f64,
    pub recall_positive: Option<f64>,
    pub recall_negative: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdReport {
    pub threshold: Option<f64>,
    pub all: SubsetMetrics,
    pub same_lemma: Option<SubsetMetrics>,
    pub different_lemma: Option<SubsetMetrics>,
    /// Share of each category's pairs classified correctly, keyed by the
    /// category label (`SC&SL`, ...). `None` when the category is absent.
    pub category_recall: BTreeMap<String, Option<f64>>,
}

fn subset_metrics<'a>(items: impl Iterator<Item = (&'a PairRecord, u8)>) -> Option<SubsetMetrics> {
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (p, pred) in items {
        match (p.label, pred) {
            (1, 1) => tp += 1,
            (1, _) => fn_ += 1,
            (_, 1) => fp += 1,
            _ => tn += 1,
        }
    }
    let n = tp + fp + tn + fn_;
    if n == 0 {
        return None;
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    let recall_positive = ratio(tp, tp + fn_);
    let recall_negative = ratio(tn, tn + fp);
    let present: Vec<f64> = [recall_positive, recall_negative].into_iter().flatten().collect();
    let balanced_accuracy = present.iter().sum::<f64>() / present.len() as f64;
    let denom = 2 * tp + fp + fn_;
    let f1 = if denom == 0 { 0.0 } else { (2 * tp) as f64 / denom as f64 };
    Some(SubsetMetrics {
        pairs: n,
        balanced_accuracy,
        f1,
        recall_positive,
        recall_negative,
    })
}

/// Scores `predictions` against the pair labels. Balanced accuracy averages
/// the recalls of the classes present in each subset.
pub fn metrics(pairs: &[PairRecord], predictions: &[u8], threshold: Option<f64>) -> Result<CdReport> {
    if pairs.is_empty() {
        return Err(Error::Domain("no pairs to evaluate".into()));
    }
    if pairs.len() != predictions.len() {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            actual: predictions.len(),
        });
    }
    let zipped = || pairs.iter().zip(predictions.iter().copied());
    let all = subset_metrics(zipped()).expect("non-empty");
    let same_lemma = subset_metrics(zipped().filter(|(p, _)| p.lemma_rel == LemmaRel::Same));
    let different_lemma = subset_metrics(zipped().filter(|(p, _)| p.lemma_rel == LemmaRel::Different));
    let category_recall = PairCategory::ALL
        .iter()
        .map(|&c| {
            let (mut hit, mut n) = (0usize, 0usize);
            for (p, pred) in zipped().filter(|(p, _)| p.category() == c) {
                n += 1;
                hit += usize::from(pred == p.label);
            }
            (c.as_str().to_string(), (n > 0).then(|| hit as f64 / n as f64))
        })
        .collect();
    Ok(CdReport {
        threshold,
        all,
        same_lemma,
        different_lemma,
        category_recall,
    })
}

/// Tunes on `tuning` (train and validation pairs pooled) and reports on
/// `test`.
pub fn evaluate(tuning: &[ScoredPair], test: &[ScoredPair]) -> Result<(ThresholdFit, CdReport)> {
    let fit = tune_threshold(tuning)?;
    let preds = classify(test, fit.threshold);
    let pairs: Vec<PairRecord> = test.iter().map(|s| s.pair.clone()).collect();
    Ok((fit, metrics(&pairs, &preds, Some(fit.threshold))?))
}

//! Generated corpora with known concept structure.
//!
//! Concept `c` owns unit direction `c`; lemma `l` owns direction
//! `concepts + l` and covers concepts `l` and `l + 1` (mod the concept
//! count), so every pair category occurs. An occurrence of lemma `l` in
//! concept `c` is embedded as
//!
//! ```text
//! concept_scale·e_c + lemma_scale·e_{concepts+l} + noise·N(0, I)
//! ```
//!
//! With `lemma_scale > concept_scale` the raw space groups occurrences by
//! lemma rather than by concept.

use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{ConceptId, Occurrence, Pos};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSpec {
    pub concepts: usize,
    pub dim: usize,
    pub per_sense: usize,
    pub concept_scale: f64,
    pub lemma_scale: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            concepts: 4,
            dim: 16,
            per_sense: 100,
            concept_scale: 1.0,
            lemma_scale: 1.25,
            noise: 0.15,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub occurrences: Vec<Occurrence>,
    pub embeddings: EmbeddingMatrix,
}

pub fn concept_name(c: usize) -> String {
    format!("concept{c}")
}

pub fn lemma_name(l: usize) -> String {
    format!("lemma{}", char::from(b'a' + (l % 26) as u8))
}

/// Generates a corpus; `label` prefixes ids and selects the random stream,
/// so corpora with different labels are independent.
pub fn generate(spec: &ClusterSpec, label: &str) -> Result<SyntheticCorpus> {
    let k = spec.concepts;
    if k < 2 || spec.dim < 2 * k || spec.per_sense == 0 {
        return Err(Error::Config(format!(
            "synthetic corpus needs >= 2 concepts, dim >= 2·concepts and per_sense > 0 (got {k}, {}, {})",
            spec.dim, spec.per_sense
        )));
    }
    let mut rng = rng::stream(spec.seed, &format!("synthetic/{label}"));
    let mut occurrences = Vec::with_capacity(2 * k * spec.per_sense);
    let mut rows = Vec::with_capacity(occurrences.capacity());
    for l in 0..k {
        for c in [l, (l + 1) % k] {
            let concept = ConceptId::new(concept_name(c))?;
            for n in 0..spec.per_sense {
                let id = format!("{label}-{}-{c}-{n}", lemma_name(l));
                let mut v: Vec<f32> = (0..spec.dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (spec.noise * z) as f32
                    })
                    .collect();
                v[c] += spec.concept_scale as f32;
                v[k + l] += spec.lemma_scale as f32;
                let mut tokens: Vec<String> = (0..10).map(|t| format!("w{t}")).collect();
                tokens[3] = lemma_name(l);
                occurrences.push(Occurrence {
                    id: id.clone(),
                    tokens,
                    target_index: 3,
                    lemma: lemma_name(l),
                    pos: Pos::Noun,
                    concept: concept.clone(),
                    is_proper_noun: false,
                });
                rows.push((id, v));
            }
        }
    }
    let (ids, data): (Vec<String>, Vec<Vec<f32>>) = rows.into_iter().unzip();
    let embeddings = EmbeddingMatrix::from_rows(ids, &data)?;
    Ok(SyntheticCorpus {
        occurrences,
        embeddings,
    })
}

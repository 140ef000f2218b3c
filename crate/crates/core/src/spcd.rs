//! Pair dataset construction: disjoint concept/lemma splits and four-category
//! occurrence pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ConceptId, Occurrence};
use crate::error::{Error, Result};
use crate::{par, rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Format(format!("unknown split `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            val_fraction: 0.05,
            test_fraction: 0.10,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn new(val_fraction: f64, test_fraction: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            val_fraction,
            test_fraction,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (v, t) = (self.val_fraction, self.test_fraction);
        if !(v > 0.0 && t > 0.0) {
            return Err(Error::Config(format!("split fractions must be positive (val {v}, test {t})")));
        }
        if !(v + t < 1.0) {
            return Err(Error::Config(format!("val + test fractions must be below 1, got {}", v + t)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitAssignment {
    pub concept_split: BTreeMap<ConceptId, Split>,
    pub lemma_split: BTreeMap<String, Split>,
    /// Non-fatal notes, e.g. a held-out set that rounded down to empty.
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    pub fn held_out_concepts(&self, split: Split) -> BTreeSet<&ConceptId> {
        self.concept_split.iter().filter(|(_, &s)| s == split).map(|(c, _)| c).collect()
    }

    pub fn held_out_lemmas(&self, split: Split) -> BTreeSet<&str> {
        self.lemma_split
            .iter()
            .filter(|(_, &s)| s == split)
            .map(|(l, _)| l.as_str())
            .collect()
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

fn partition_set<T: Clone + Ord>(
    items: &BTreeSet<T>,
    spec: &SplitSpec,
    label: &str,
    warnings: &mut Vec<String>,
) -> BTreeMap<T, Split> {
    let n = items.len();
    let n_val = round_half_up(spec.val_fraction * n as f64);
    let n_test = round_half_up(spec.test_fraction * n as f64);
    for (split, count) in [(Split::Val, n_val), (Split::Test, n_test)] {
        if count == 0 {
            let msg = format!("{label}: {split} held-out set is empty for {n} items");
            warn!("{msg}");
            warnings.push(msg);
        }
    }
    let mut order: Vec<&T> = items.iter().collect();
    order.shuffle(&mut rng::stream(spec.seed, &format!("partition/{label}")));
    order
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let split = if i < n_test {
                Split::Test
            } else if i < n_test + n_val {
                Split::Val
            } else {
                Split::Train
            };
            (item.clone(), split)
        })
        .collect()
}

/// Samples held-out concepts and lemmas for validation and test.
pub fn partition(
    concepts: &BTreeSet<ConceptId>,
    lemmas: &BTreeSet<String>,
    spec: &SplitSpec,
) -> Result<SplitAssignment> {
    spec.validate()?;
    if concepts.is_empty() || lemmas.is_empty() {
        return Err(Error::Domain("partition needs non-empty concept and lemma sets".into()));
    }
    let mut warnings = Vec::new();
    let concept_split = partition_set(concepts, spec, "concepts", &mut warnings);
    let lemma_split = partition_set(lemmas, spec, "lemmas", &mut warnings);
    Ok(SplitAssignment {
        concept_split,
        lemma_split,
        warnings,
    })
}

/// Convenience: partition the concepts and lemmas present in `occs`.
pub fn partition_corpus(occs: &[Occurrence], spec: &SplitSpec) -> Result<SplitAssignment> {
    let concepts = occs.iter().map(|o| o.concept.clone()).collect();
    let lemmas = occs.iter().map(|o| o.lemma.clone()).collect();
    partition(&concepts, &lemmas, spec)
}

/// Routes each occurrence to the strictest split triggered by its concept or
/// lemma (test before val before train).
pub fn assign_occurrences(
    occs: &[Occurrence],
    assignment: &SplitAssignment,
) -> Result<BTreeMap<Split, Vec<Occurrence>>> {
    let mut out: BTreeMap<Split, Vec<Occurrence>> = Split::ALL.iter().map(|&s| (s, Vec::new())).collect();
    for o in occs {
        let cs = *assignment
            .concept_split
            .get(&o.concept)
            .ok_or_else(|| Error::Unmapped(o.concept.to_string()))?;
        let ls = *assignment
            .lemma_split
            .get(&o.lemma)
            .ok_or_else(|| Error::Unmapped(o.lemma.clone()))?;
        out.get_mut(&cs.max(ls)).expect("all splits present").push(o.clone());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LemmaRel {
    #[serde(rename = "SL")]
    Same,
    #[serde(rename = "DL")]
    Different,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConceptRel {
    #[serde(rename = "SC")]
    Same,
    #[serde(rename = "DC")]
    Different,
}

impl LemmaRel {
    pub fn as_str(self) -> &'static str {
        match self {
            LemmaRel::Same => "SL",
            LemmaRel::Different => "DL",
        }
    }
}

impl ConceptRel {
    pub fn as_str(self) -> &'static str {
        match self {
            ConceptRel::Same => "SC",
            ConceptRel::Different => "DC",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairCategory {
    #[serde(rename = "SC&SL")]
    ScSl,
    #[serde(rename = "SC&DL")]
    ScDl,
    #[serde(rename = "DC&SL")]
    DcSl,
    #[serde(rename = "DC&DL")]
    DcDl,
}

impl PairCategory {
    pub const ALL: [PairCategory; 4] = [
        PairCategory::ScSl,
        PairCategory::ScDl,
        PairCategory::DcSl,
        PairCategory::DcDl,
    ];

    pub fn new(concept: ConceptRel, lemma: LemmaRel) -> Self {
        match (concept, lemma) {
            (ConceptRel::Same, LemmaRel::Same) => PairCategory::ScSl,
            (ConceptRel::Same, LemmaRel::Different) => PairCategory::ScDl,
            (ConceptRel::Different, LemmaRel::Same) => PairCategory::DcSl,
            (ConceptRel::Different, LemmaRel::Different) => PairCategory::DcDl,
        }
    }

    pub fn concept_rel(self) -> ConceptRel {
        match self {
            PairCategory::ScSl | PairCategory::ScDl => ConceptRel::Same,
            _ => ConceptRel::Different,
        }
    }

    pub fn lemma_rel(self) -> LemmaRel {
        match self {
            PairCategory::ScSl | PairCategory::DcSl => LemmaRel::Same,
            _ => LemmaRel::Different,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PairCategory::ScSl => "SC&SL",
            PairCategory::ScDl => "SC&DL",
            PairCategory::DcSl => "DC&SL",
            PairCategory::DcDl => "DC&DL",
        }
    }

    pub fn of(a: &Occurrence, b: &Occurrence) -> Self {
        let c = if a.concept == b.concept { ConceptRel::Same } else { ConceptRel::Different };
        let l = if a.lemma == b.lemma { LemmaRel::Same } else { LemmaRel::Different };
        PairCategory::new(c, l)
    }
}

impl fmt::Display for PairCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairRecord {
    pub occ_a: String,
    pub occ_b: String,
    pub lemma_rel: LemmaRel,
    pub concept_rel: ConceptRel,
    pub label: u8,
    pub split: Split,
}

impl PairRecord {
    pub fn new(a: &Occurrence, b: &Occurrence, split: Split) -> Self {
        let category = PairCategory::of(a, b);
        let (occ_a, occ_b) = if a.id <= b.id { (&a.id, &b.id) } else { (&b.id, &a.id) };
        PairRecord {
            occ_a: occ_a.clone(),
            occ_b: occ_b.clone(),
            lemma_rel: category.lemma_rel(),
            concept_rel: category.concept_rel(),
            label: u8::from(category.concept_rel() == ConceptRel::Same),
            split,
        }
    }

    pub fn category(&self) -> PairCategory {
        PairCategory::new(self.concept_rel, self.lemma_rel)
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }

    fn sort_key(&self) -> (Split, &str, &str) {
        (self.split, &self.occ_a, &self.occ_b)
    }
}

/// Draws uniformly from the members of `pool` accepted by `eligible`, whose
/// number is known to be `count`. Dense pools use rejection sampling, sparse
/// ones an indexed scan; both are uniform and deterministic for a given rng.
fn sample_eligible<R: Rng>(rng: &mut R, pool: &[usize], count: usize, eligible: impl Fn(usize) -> bool) -> Option<usize> {
    if count == 0 {
        return None;
    }
    if count * 8 >= pool.len() {
        loop {
            let c = pool[rng.random_range(0..pool.len())];
            if eligible(c) {
                return Some(c);
            }
        }
    }
    let k = rng.random_range(0..count);
    pool.iter().copied().filter(|&c| eligible(c)).nth(k)
}

/// For each occurrence, at most one sampled partner per category, in
/// category order. Indices refer to `occs`.
pub fn propose_partners(split: Split, occs: &[Occurrence], seed: u64) -> Vec<Vec<(usize, PairCategory)>> {
    let mut by_concept: HashMap<&ConceptId, Vec<usize>> = HashMap::new();
    let mut by_lemma: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut by_both: HashMap<(&str, &ConceptId), Vec<usize>> = HashMap::new();
    for (i, o) in occs.iter().enumerate() {
        by_concept.entry(&o.concept).or_default().push(i);
        by_lemma.entry(&o.lemma).or_default().push(i);
        by_both.entry((&o.lemma, &o.concept)).or_default().push(i);
    }
    let all: Vec<usize> = (0..occs.len()).collect();

    par::map_range(occs.len(), |i| {
        let o = &occs[i];
        let mut rng = rng::stream(seed, &format!("pairs/{split}/{}", o.id));
        let concept_group = &by_concept[&o.concept];
        let lemma_group = &by_lemma[o.lemma.as_str()];
        let both = &by_both[&(o.lemma.as_str(), &o.concept)];
        let same_concept = |j: usize| occs[j].concept == o.concept;
        let same_lemma = |j: usize| occs[j].lemma == o.lemma;

        let mut out = Vec::with_capacity(4);
        let picks = [
            (PairCategory::ScSl, sample_eligible(&mut rng, both, both.len() - 1, |j| j != i)),
            (
                PairCategory::ScDl,
                sample_eligible(&mut rng, concept_group, concept_group.len() - both.len(), |j| !same_lemma(j)),
            ),
            (
                PairCategory::DcSl,
                sample_eligible(&mut rng, lemma_group, lemma_group.len() - both.len(), |j| !same_concept(j)),
            ),
            (
                PairCategory::DcDl,
                sample_eligible(
                    &mut rng,
                    &all,
                    all.len() + both.len() - concept_group.len() - lemma_group.len(),
                    |j| !same_concept(j) && !same_lemma(j),
                ),
            ),
        ];
        for (cat, pick) in picks {
            if let Some(j) = pick {
                out.push((j, cat));
            }
        }
        out
    })
}

/// Builds the deduplicated pair set of one split, sorted by `(occ_a, occ_b)`
/// with `occ_a < occ_b`.
pub fn generate_pairs(split: Split, occs: &[Occurrence], seed: u64) -> Vec<PairRecord> {
    let proposals = propose_partners(split, occs, seed);
    let mut pairs: Vec<PairRecord> = proposals
        .iter()
        .enumerate()
        .flat_map(|(i, ps)| ps.iter().map(move |&(j, _)| (i, j)))
        .map(|(i, j)| PairRecord::new(&occs[i], &occs[j], split))
        .collect();
    pairs.sort();
    pairs.dedup_by(|a, b| a.occ_a == b.occ_a && a.occ_b == b.occ_b);
    pairs
}

/// Full dataset pipeline on a filtered corpus: partition, route, pair.
pub fn build_dataset(occs: &[Occurrence], spec: &SplitSpec) -> Result<Dataset> {
    let assignment = partition_corpus(occs, spec)?;
    let splits = assign_occurrences(occs, &assignment)?;
    let mut pairs = Vec::new();
    for (&split, split_occs) in &splits {
        pairs.extend(generate_pairs(split, split_occs, spec.seed));
    }
    pairs.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(Dataset {
        assignment,
        splits,
        pairs,
    })
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub assignment: SplitAssignment,
    pub splits: BTreeMap<Split, Vec<Occurrence>>,
    pub pairs: Vec<PairRecord>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub total: usize,
    pub same_concept: usize,
    pub different_concept: usize,
    pub label1_share: f64,
    pub same_lemma: usize,
    pub different_lemma: usize,
    #[serde(rename = "SC&SL")]
    pub sc_sl: usize,
    #[serde(rename = "SC&DL")]
    pub sc_dl: usize,
    #[serde(rename = "DC&SL")]
    pub dc_sl: usize,
    #[serde(rename = "DC&DL")]
    pub dc_dl: usize,
    pub unique_occurrences: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub splits: BTreeMap<Split, SplitStats>,
    pub overall: SplitStats,
}

fn stats_of<'a>(pairs: impl Iterator<Item = &'a PairRecord>) -> SplitStats {
    let mut s = SplitStats::default();
    let mut seen: HashSet<&str> = HashSet::new();
    for p in pairs {
        s.total += 1;
        match p.category() {
            PairCategory::ScSl => s.sc_sl += 1,
            PairCategory::ScDl => s.sc_dl += 1,
            PairCategory::DcSl => s.dc_sl += 1,
            PairCategory::DcDl => s.dc_dl += 1,
        }
        seen.insert(&p.occ_a);
        seen.insert(&p.occ_b);
    }
    s.same_concept = s.sc_sl + s.sc_dl;
    s.different_concept = s.dc_sl + s.dc_dl;
    s.same_lemma = s.sc_sl + s.dc_sl;
    s.different_lemma = s.sc_dl + s.dc_dl;
    s.label1_share = if s.total == 0 { 0.0 } else { s.same_concept as f64 / s.total as f64 };
    s.unique_occurrences = seen.len();
    s
}

/// Counts per split and category, laid out like a dataset description table.
pub fn pair_stats(pairs: &[PairRecord]) -> PairStats {
    let splits = Split::ALL
        .iter()
        .map(|&split| (split, stats_of(pairs.iter().filter(|p| p.split == split))))
        .collect();
    PairStats {
        splits,
        overall: stats_of(pairs.iter()),
    }
}

/// Writes `occ_a occ_b lemma_rel concept_rel label split`, tab-separated,
/// sorted by `(split, occ_a, occ_b)`.
pub fn write_pairs(path: impl AsRef<Path>, pairs: &[PairRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut sorted: Vec<&PairRecord> = pairs.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in sorted {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.occ_a,
            p.occ_b,
            p.lemma_rel.as_str(),
            p.concept_rel.as_str(),
            p.label,
            p.split
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<PairRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::parse(path, i + 1, m.to_string());
        let f: Vec<&str> = line.split('\t').collect();
        let [a, b, lrel, crel, label, split] = f.as_slice() else {
            return Err(bad("expected 6 tab-separated fields"));
        };
        let lemma_rel = match *lrel {
            "SL" => LemmaRel::Same,
            "DL" => LemmaRel::Different,
            _ => return Err(bad("lemma_rel must be SL or DL")),
        };
        let concept_rel = match *crel {
            "SC" => ConceptRel::Same,
            "DC" => ConceptRel::Different,
            _ => return Err(bad("concept_rel must be SC or DC")),
        };
        let label: u8 = match *label {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad("label must be 0 or 1")),
        };
        if (label == 1) != (concept_rel == ConceptRel::Same) {
            return Err(bad("label disagrees with concept_rel"));
        }
        if a == b {
            return Err(bad("self pair"));
        }
        let split: Split = split.parse().map_err(|_| bad("unknown split"))?;
        out.push(PairRecord {
            occ_a: a.to_string(),
            occ_b: b.to_string(),
            lemma_rel,
            concept_rel,
            label,
            split,
        });
    }
    Ok(out)
}

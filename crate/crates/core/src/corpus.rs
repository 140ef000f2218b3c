//! Sense-annotated occurrences, corpus filtering, target markup and the
//! hypernym taxonomy.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opening delimiter placed before the target word.
pub const OPEN_TAG: &str = "<t>";
/// Closing delimiter placed after the target word.
pub const CLOSE_TAG: &str = "</t>";

pub const MIN_SENTENCE_TOKENS: usize = 10;
pub const MAX_SENTENCE_TOKENS: usize = 100;
pub const MIN_LEMMA_CHARS: usize = 3;
pub const MIN_LEMMA_FREQUENCY: usize = 10;

/// Opaque concept key, typically a synset identifier.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(value: impl Into<String>) -> Result<Self> {
        let value = value.into();
        if value.is_empty() {
            return Err(Error::Domain("concept id must be non-empty".into()));
        }
        Ok(ConceptId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    Adjective,
    Noun,
    Verb,
}

impl Pos {
    /// Parses an annotation tag. Satellite adjectives (`s`) merge into `a`.
    pub fn from_tag(tag: &str) -> Option<Pos> {
        match tag {
            "a" | "s" => Some(Pos::Adjective),
            "n" => Some(Pos::Noun),
            "v" => Some(Pos::Verb),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Pos::Adjective => "a",
            Pos::Noun => "n",
            Pos::Verb => "v",
        }
    }
}

/// One annotated usage of a target word in its sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct Occurrence {
    pub id: String,
    pub tokens: Vec<String>,
    pub target_index: usize,
    pub lemma: String,
    pub pos: Pos,
    pub concept: ConceptId,
    pub is_proper_noun: bool,
}

impl Occurrence {
    pub fn target(&self) -> &str {
        &self.tokens[self.target_index]
    }
}

#[derive(Serialize, Deserialize)]
struct OccurrenceRecord {
    id: String,
    tokens: Vec<String>,
    target_index: usize,
    lemma: String,
    pos: String,
    concept: String,
    proper_noun: bool,
}

impl OccurrenceRecord {
    fn into_occurrence(self) -> std::result::Result<Occurrence, String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.target_index >= self.tokens.len() {
            return Err(format!(
                "target_index {} out of range for {} tokens",
                self.target_index,
                self.tokens.len()
            ));
        }
        let pos = Pos::from_tag(&self.pos).ok_or_else(|| format!("unknown pos `{}`", self.pos))?;
        let concept = ConceptId::new(self.concept).map_err(|e| e.to_string())?;
        Ok(Occurrence {
            id: self.id,
            tokens: self.tokens,
            target_index: self.target_index,
            lemma: self.lemma.to_lowercase(),
            pos,
            concept,
            is_proper_noun: self.proper_noun,
        })
    }
}

impl From<&Occurrence> for OccurrenceRecord {
    fn from(o: &Occurrence) -> Self {
        OccurrenceRecord {
            id: o.id.clone(),
            tokens: o.tokens.clone(),
            target_index: o.target_index,
            lemma: o.lemma.clone(),
            pos: o.pos.tag().to_string(),
            concept: o.concept.as_str().to_string(),
            proper_noun: o.is_proper_noun,
        }
    }
}

/// Reads an occurrence JSONL file. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Vec<Occurrence>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), path)
}

pub fn read_corpus(reader: impl BufRead, source: &Path) -> Result<Vec<Occurrence>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: OccurrenceRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(source, line_no, e.to_string()))?;
        let occ = record
            .into_occurrence()
            .map_err(|m| Error::parse(source, line_no, m))?;
        if !seen.insert(occ.id.clone()) {
            return Err(Error::DuplicateId(occ.id));
        }
        out.push(occ);
    }
    Ok(out)
}

pub fn write_corpus(path: impl AsRef<Path>, occs: &[Occurrence]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for occ in occs {
        let line = serde_json::to_string(&OccurrenceRecord::from(occ))
            .map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn lemma_shape_ok(lemma: &str) -> bool {
    lemma.chars().count() >= MIN_LEMMA_CHARS && lemma.chars().all(char::is_alphabetic)
}

/// Applies the occurrence selection rules and keeps input order.
///
/// Sentence length is checked first, then lemma shape and the proper-noun
/// flag; the frequency threshold counts only occurrences that passed both,
/// separately for each part of speech.
pub fn filter_corpus(occs: &[Occurrence]) -> Vec<Occurrence> {
    let eligible: Vec<&Occurrence> = occs
        .iter()
        .filter(|o| (MIN_SENTENCE_TOKENS..=MAX_SENTENCE_TOKENS).contains(&o.tokens.len()))
        .filter(|o| lemma_shape_ok(&o.lemma) && !o.is_proper_noun)
        .collect();

    let mut counts: HashMap<(&str, Pos), usize> = HashMap::new();
    for o in &eligible {
        *counts.entry((o.lemma.as_str(), o.pos)).or_default() += 1;
    }

    eligible
        .into_iter()
        .filter(|o| counts[&(o.lemma.as_str(), o.pos)] >= MIN_LEMMA_FREQUENCY)
        .cloned()
        .collect()
}

/// A token sequence with the target word wrapped in `<t>` / `</t>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedSentence {
    tokens: Vec<String>,
    open: usize,
}

impl MarkedSentence {
    /// Validates an already-marked token sequence.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let opens: Vec<usize> = positions(&tokens, OPEN_TAG);
        let closes: Vec<usize> = positions(&tokens, CLOSE_TAG);
        match (opens.as_slice(), closes.as_slice()) {
            ([open], [close]) if *close == open + 2 => Ok(MarkedSentence {
                tokens,
                open: *open,
            }),
            _ => Err(Error::Domain(
                "marked sentence needs exactly one <t> target </t> span".into(),
            )),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn target(&self) -> &str {
        &self.tokens[self.open + 1]
    }

    /// Position of the target in the unmarked sentence.
    pub fn target_index(&self) -> usize {
        self.open
    }

    pub fn unmark(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.tokens.len() - 2);
        out.extend_from_slice(&self.tokens[..self.open]);
        out.push(self.tokens[self.open + 1].clone());
        out.extend_from_slice(&self.tokens[self.open + 3..]);
        out
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

fn positions(tokens: &[String], tag: &str) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.as_str() == tag)
        .map(|(i, _)| i)
        .collect()
}

/// Inserts the target delimiters around `tokens[target_index]`.
///
/// Panics if `target_index` is out of range.
pub fn mark_tokens(tokens: &[String], target_index: usize) -> MarkedSentence {
    assert!(target_index < tokens.len(), "target index out of range");
    let mut out = Vec::with_capacity(tokens.len() + 2);
    out.extend_from_slice(&tokens[..target_index]);
    out.push(OPEN_TAG.to_string());
    out.push(tokens[target_index].clone());
    out.push(CLOSE_TAG.to_string());
    out.extend_from_slice(&tokens[target_index + 1..]);
    MarkedSentence {
        tokens: out,
        open: target_index,
    }
}

pub fn mark_target(occ: &Occurrence) -> MarkedSentence {
    mark_tokens(&occ.tokens, occ.target_index)
}

/// Rooted hypernym DAG over concept ids.
#[derive(Clone, Debug)]
pub struct Taxonomy {
    parents: BTreeMap<ConceptId, BTreeSet<ConceptId>>,
    roots: BTreeSet<ConceptId>,
    depths: HashMap<ConceptId, usize>,
}

impl Taxonomy {
    /// Builds a taxonomy from `(child, parent)` edges. Roots are the nodes
    /// that never appear as a child.
    pub fn from_edges<I>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ConceptId, ConceptId)>,
    {
        let mut parents: BTreeMap<ConceptId, BTreeSet<ConceptId>> = BTreeMap::new();
        for (child, parent) in edges {
            if child == parent {
                return Err(Error::Taxonomy(format!("self loop on `{child}`")));
            }
            parents.entry(parent.clone()).or_default();
            parents.entry(child).or_default().insert(parent);
        }
        if parents.is_empty() {
            return Err(Error::Taxonomy("no edges".into()));
        }

        let mut children: HashMap<&ConceptId, Vec<&ConceptId>> = HashMap::new();
        for (child, ps) in &parents {
            for p in ps {
                children.entry(p).or_default().push(child);
            }
        }
        let roots: BTreeSet<ConceptId> = parents
            .iter()
            .filter(|(_, ps)| ps.is_empty())
            .map(|(c, _)| c.clone())
            .collect();

        // Multi-source BFS downward gives the shortest root path of every
        // node; Kahn-style counting detects cycles.
        let mut remaining: HashMap<&ConceptId, usize> =
            parents.iter().map(|(c, ps)| (c, ps.len())).collect();
        let mut depths: HashMap<ConceptId, usize> = HashMap::new();
        let mut queue: VecDeque<&ConceptId> = VecDeque::new();
        for r in &roots {
            depths.insert(r.clone(), 1);
            queue.push_back(r);
        }
        let mut visited = 0usize;
        while let Some(node) = queue.pop_front() {
            visited += 1;
            let d = depths[node];
            for &child in children.get(node).map(Vec::as_slice).unwrap_or(&[]) {
                let entry = depths.entry(child.clone()).or_insert(d + 1);
                *entry = (*entry).min(d + 1);
                let left = remaining.get_mut(child).expect("child is a node");
                *left -= 1;
                if *left == 0 {
                    queue.push_back(child);
                }
            }
        }
        if visited != parents.len() {
            return Err(Error::Taxonomy("hypernym graph contains a cycle".into()));
        }

        Ok(Taxonomy {
            parents,
            roots,
            depths,
        })
    }

    /// Reads a `child<TAB>parent` edge list. Blank lines and `#` comments are
    /// ignored.
    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut edges = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(child), Some(parent), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(Error::parse(path, i + 1, "expected `child<TAB>parent`"));
            };
            let child = ConceptId::new(child).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
            let parent =
                ConceptId::new(parent).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
            edges.push((child, parent));
        }
        Self::from_edges(edges)
    }

    pub fn contains(&self, c: &ConceptId) -> bool {
        self.parents.contains_key(c)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn roots(&self) -> &BTreeSet<ConceptId> {
        &self.roots
    }

    pub fn parents(&self, c: &ConceptId) -> Option<&BTreeSet<ConceptId>> {
        self.parents.get(c)
    }

    /// Node count on the shortest path to a root; roots have depth 1.
    pub fn depth(&self, c: &ConceptId) -> Result<usize> {
        self.depths
            .get(c)
            .copied()
            .ok_or_else(|| Error::UnknownConcept(c.to_string()))
    }

    /// Every ancestor of `c` (including `c` itself) with its edge distance
    /// from `c` along the shortest upward path.
    pub fn ancestors(&self, c: &ConceptId) -> Result<HashMap<&ConceptId, usize>> {
        let (start, _) = self
            .parents
            .get_key_value(c)
            .ok_or_else(|| Error::UnknownConcept(c.to_string()))?;
        let mut dist: HashMap<&ConceptId, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        dist.insert(start, 0);
        queue.push_back(start);
        while let Some(node) = queue.pop_front() {
            let d = dist[node];
            for p in &self.parents[node] {
                if !dist.contains_key(p) {
                    dist.insert(p, d + 1);
                    queue.push_back(p);
                }
            }
        }
        Ok(dist)
    }

    /// Closest root of `c`; equal distances resolve to the smallest id.
    pub fn nearest_root(&self, c: &ConceptId) -> Result<(&ConceptId, usize)> {
        let anc = self.ancestors(c)?;
        anc.into_iter()
            .filter(|(a, _)| self.roots.contains(*a))
            .min_by(|(a, da), (b, db)| da.cmp(db).then_with(|| a.cmp(b)))
            .ok_or_else(|| Error::Taxonomy(format!("no root reachable from `{c}`")))
    }
}

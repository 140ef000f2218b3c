//! Structure of an embedding space: distance distributions per pair
//! category, cluster quality by concept and by top-level category, and
//! agreement of cosine similarity with taxonomy similarity.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::conceptdiff::ScoredPair;
use crate::corpus::{ConceptId, Occurrence, Pos, Taxonomy};
use crate::embedding::{cosine_distance, cosine_similarity, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::par;
use crate::spcd::{PairCategory, PairRecord};
use crate::stats::{spearman, CorrelationResult};

pub const DEFAULT_BINS: usize = 50;
pub const DISTANCE_RANGE: (f64, f64) = (0.0, 2.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceDistribution {
    pub category: String,
    pub counts: Vec<usize>,
    pub pairs: usize,
    pub mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryDistributions {
    pub bins: usize,
    pub distributions: Vec<DistanceDistribution>,
    pub threshold: Option<f64>,
}

impl CategoryDistributions {
    pub fn bin_edges(&self, k: usize) -> (f64, f64) {
        let (lo, hi) = DISTANCE_RANGE;
        let w = (hi - lo) / self.bins as f64;
        (lo + w * k as f64, if k + 1 == self.bins { hi } else { lo + w * (k + 1) as f64 })
    }

    pub fn get(&self, c: PairCategory) -> &DistanceDistribution {
        self.distributions
            .iter()
            .find(|d| d.category == c.as_str())
            .expect("all categories present")
    }
}

/// Bin of `d` among `bins` equal bins on [0, 2]; the last bin is closed and
/// values a rounding error outside the range are clamped.
pub fn bin_index(d: f64, bins: usize) -> usize {
    let (lo, hi) = DISTANCE_RANGE;
    let k = ((d - lo) / (hi - lo) * bins as f64).floor();
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(bins - 1)
    }
}

pub fn category_distributions(scored: &[ScoredPair], bins: usize, threshold: Option<f64>) -> Result<CategoryDistributions> {
    if bins == 0 {
        return Err(Error::Domain("histogram needs at least one bin".into()));
    }
    let distributions = PairCategory::ALL
        .iter()
        .map(|&c| {
            let mut counts = vec![0; bins];
            let mut sum = 0.0;
            let mut n = 0;
            for s in scored.iter().filter(|s| s.pair.category() == c) {
                counts[bin_index(s.distance, bins)] += 1;
                sum += s.distance;
                n += 1;
            }
            DistanceDistribution {
                category: c.as_str().to_string(),
                counts,
                pairs: n,
                mean: (n > 0).then(|| sum / n as f64),
            }
        })
        .collect();
    Ok(CategoryDistributions {
        bins,
        distributions,
        threshold,
    })
}

/// `category,bin_lo,bin_hi,count` rows with a header.
pub fn format_histogram_csv(d: &CategoryDistributions) -> String {
    let mut out = String::from("category,bin_lo,bin_hi,count\n");
    for dist in &d.distributions {
        for (k, c) in dist.counts.iter().enumerate() {
            let (lo, hi) = d.bin_edges(k);
            let _ = writeln!(out, "{},{lo},{hi},{c}", dist.category);
        }
    }
    out
}

/// Overlaid step outlines of the four normalized histograms, with the
/// threshold as a vertical line.
pub fn histogram_svg(d: &CategoryDistributions) -> String {
    const W: f64 = 600.0;
    const H: f64 = 300.0;
    const COLORS: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];
    let peak = d
        .distributions
        .iter()
        .filter(|x| x.pairs > 0)
        .flat_map(|x| x.counts.iter().map(move |&c| c as f64 / x.pairs as f64))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let x = |v: f64| v / DISTANCE_RANGE.1 * W;
    let mut svg = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{}\">\n", H + 20.0);
    for (dist, color) in d.distributions.iter().zip(COLORS) {
        if dist.pairs == 0 {
            continue;
        }
        let mut pts = format!("0,{H}");
        for (k, &c) in dist.counts.iter().enumerate() {
            let (lo, hi) = d.bin_edges(k);
            let y = H - c as f64 / dist.pairs as f64 / peak * H;
            let _ = write!(pts, " {:.2},{y:.2} {:.2},{y:.2}", x(lo), x(hi));
        }
        let _ = write!(pts, " {W},{H}");
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" points=\"{pts}\"><title>{}</title></polyline>",
            dist.category
        );
    }
    if let Some(t) = d.threshold {
        let _ = writeln!(svg, "<line x1=\"{0:.2}\" y1=\"0\" x2=\"{0:.2}\" y2=\"{H}\" stroke=\"black\" stroke-dasharray=\"4\"/>", x(t));
    }
    for (k, (dist, color)) in d.distributions.iter().zip(COLORS).enumerate() {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\" font-size=\"12\">{}</text>",
            10.0 + 90.0 * k as f64,
            H + 15.0,
            dist.category
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Mean silhouette coefficient under cosine distance.
///
/// Points in singleton clusters contribute 0; a point whose intra- and
/// nearest inter-cluster distances are both 0 also contributes 0.
pub fn silhouette<L: Eq + Hash + Ord + Sync>(points: &[&[f32]], labels: &[L]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            actual: labels.len(),
        });
    }
    if points.len() < 2 {
        return Err(Error::Domain("silhouette needs at least 2 points".into()));
    }
    let mut ids: BTreeMap<&L, usize> = BTreeMap::new();
    for l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    let k = ids.len();
    if k < 2 {
        return Err(Error::Domain("silhouette needs at least 2 clusters".into()));
    }
    let cluster: Vec<usize> = labels.iter().map(|l| ids[l]).collect();
    let mut sizes = vec![0usize; k];
    for &c in &cluster {
        sizes[c] += 1;
    }
    let scores = par::try_map_range(points.len(), |i| {
        let own = cluster[i];
        if sizes[own] == 1 {
            return Ok(0.0);
        }
        let mut sums = vec![0.0; k];
        for (j, p) in points.iter().enumerate() {
            if j != i {
                sums[cluster[j]] += cosine_distance(points[i], p)?;
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        Ok(if m == 0.0 { 0.0 } else { (b - a) / m })
    })?;
    Ok(scores.iter().sum::<f64>() / points.len() as f64)
}

/// Wu-Palmer similarity `2·depth(lcs) / (depth(c1) + depth(c2))`, taking
/// the common ancestor that maximizes it.
pub fn wup(taxonomy: &Taxonomy, c1: &ConceptId, c2: &ConceptId) -> Result<f64> {
    let a1 = taxonomy.ancestors(c1)?;
    let a2 = taxonomy.ancestors(c2)?;
    let mut best: Option<usize> = None;
    for anc in a1.keys().filter(|a| a2.contains_key(*a)) {
        let d = taxonomy.depth(anc)?;
        best = Some(best.map_or(d, |b| b.max(d)));
    }
    let lcs = best.ok_or_else(|| Error::Taxonomy(format!("`{c1}` and `{c2}` share no ancestor")))?;
    Ok(2.0 * lcs as f64 / (taxonomy.depth(c1)? + taxonomy.depth(c2)?) as f64)
}

/// Spearman correlation between per-pair cosine similarity and Wu-Palmer
/// similarity of the pair's concepts.
pub fn wup_correlation(
    pairs: &[PairRecord],
    occurrences: &[Occurrence],
    embeddings: &EmbeddingMatrix,
    taxonomy: &Taxonomy,
) -> Result<CorrelationResult> {
    if pairs.len() < 3 {
        return Err(Error::Domain(format!("correlation needs at least 3 pairs, got {}", pairs.len())));
    }
    let concept: HashMap<&str, &ConceptId> = occurrences.iter().map(|o| (o.id.as_str(), &o.concept)).collect();
    let lookup = |id: &str| {
        concept
            .get(id)
            .copied()
            .ok_or_else(|| Error::Unmapped(format!("pair occurrence `{id}` not in corpus")))
    };
    let rows = par::try_map(pairs, |p| {
        let sim = cosine_similarity(embeddings.get(&p.occ_a)?, embeddings.get(&p.occ_b)?)?;
        let w = wup(taxonomy, lookup(&p.occ_a)?, lookup(&p.occ_b)?)?;
        Ok((sim, w))
    })?;
    let (sims, wups): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    spearman(&sims, &wups)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UbLabels {
    pub labels: BTreeMap<ConceptId, ConceptId>,
    /// Concepts that are not nouns or verbs.
    pub skipped: Vec<ConceptId>,
}

/// Labels each noun or verb concept with its nearest root.
pub fn unique_beginner_labels<'a, I>(taxonomy: &Taxonomy, concepts: I) -> Result<UbLabels>
where
    I: IntoIterator<Item = (&'a ConceptId, Pos)>,
{
    let mut out = UbLabels::default();
    for (c, pos) in concepts {
        if out.labels.contains_key(c) || out.skipped.contains(c) {
            continue;
        }
        match pos {
            Pos::Noun | Pos::Verb => {
                let (root, _) = taxonomy.nearest_root(c)?;
                out.labels.insert(c.clone(), root.clone());
            }
            Pos::Adjective => out.skipped.push(c.clone()),
        }
    }
    if !out.skipped.is_empty() {
        log::info!("{} non-noun/verb concepts left without a top-level label", out.skipped.len());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    /// Occurrences entering the concept-level silhouette.
    pub population: usize,
    pub silhouette_concept: f64,
    /// Noun and verb occurrences entering the top-level silhouette.
    pub ub_population: usize,
    pub silhouette_ub: Option<f64>,
    pub wup: Option<CorrelationResult>,
}

/// Silhouettes over every given occurrence, by concept and by top-level
/// category, plus the Wu-Palmer correlation over `pairs` when a taxonomy is
/// available.
pub fn analyze(
    occurrences: &[Occurrence],
    pairs: &[PairRecord],
    embeddings: &EmbeddingMatrix,
    taxonomy: Option<&Taxonomy>,
) -> Result<GeometryReport> {
    let points: Vec<&[f32]> = occurrences.iter().map(|o| embeddings.get(&o.id)).collect::<Result<_>>()?;
    let concepts: Vec<&ConceptId> = occurrences.iter().map(|o| &o.concept).collect();
    let silhouette_concept = silhouette(&points, &concepts)?;
    let (mut ub_population, mut silhouette_ub, mut wup_rho) = (0, None, None);
    if let Some(tax) = taxonomy {
        let ub = unique_beginner_labels(tax, occurrences.iter().map(|o| (&o.concept, o.pos)))?;
        let (pts, labels): (Vec<&[f32]>, Vec<&ConceptId>) = occurrences
            .iter()
            .zip(&points)
            .filter_map(|(o, p)| ub.labels.get(&o.concept).map(|l| (*p, l)))
            .unzip();
        ub_population = pts.len();
        silhouette_ub = match silhouette(&pts, &labels) {
            Ok(v) => Some(v),
            Err(Error::Domain(m)) => {
                log::warn!("top-level silhouette skipped: {m}");
                None
            }
            Err(e) => return Err(e),
        };
        wup_rho = Some(wup_correlation(pairs, occurrences, embeddings, tax)?);
    }
    Ok(GeometryReport {
        population: points.len(),
        silhouette_concept,
        ub_population,
        silhouette_ub,
        wup: wup_rho,
    })
}

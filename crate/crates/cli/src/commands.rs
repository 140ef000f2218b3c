use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use cale_core::adapter::{self, AdapterParams, Example, LossForm, TrainConfig};
use cale_core::conceptdiff::{self, ScoredPair};
use cale_core::corpus::{self, ConceptId, Occurrence, Pos, Taxonomy};
use cale_core::cosimlex::{self, LookupEncoder};
use cale_core::geometry;
use cale_core::lscd;
use cale_core::spcd::{self, PairRecord, Split, SplitSpec};
use cale_core::synthetic::{self, ClusterSpec};
use cale_core::{rng, EmbeddingMatrix};

use crate::manifest::{Outputs, RunManifest};
use crate::{
    BuildPairsArgs, CdiffArgs, CosimlexArgs, GeometryArgs, Global, GradcheckArgs, LscdArgs, RequestsArgs,
    SynthArgs, TrainArgs, ValidateArgs,
};

fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::read(path).with_context(|| format!("loading embeddings {}", path.display()))
}

fn read_adapter(path: Option<&PathBuf>) -> Result<Option<AdapterParams>> {
    path.map(|p| AdapterParams::read(p).with_context(|| format!("loading adapter {}", p.display())))
        .transpose()
}

/// The rows for `ids`, routed through the adapter when one is given.
fn space<'a>(
    embeddings: &EmbeddingMatrix,
    adapter: Option<&AdapterParams>,
    ids: impl IntoIterator<Item = &'a str>,
) -> Result<EmbeddingMatrix> {
    let selected = embeddings.select(ids)?;
    Ok(match adapter {
        Some(p) => p.adapt_matrix(&selected)?,
        None => selected,
    })
}

fn pair_ids(pairs: &[PairRecord]) -> BTreeSet<&str> {
    pairs.iter().flat_map(|p| [p.occ_a.as_str(), p.occ_b.as_str()]).collect()
}

fn read_pairs(path: &Path) -> Result<Vec<PairRecord>> {
    spcd::read_pairs(path).with_context(|| format!("loading pairs {}", path.display()))
}

fn read_corpus(path: &Path) -> Result<Vec<Occurrence>> {
    corpus::parse_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
}

pub fn build_pairs(g: &Global, a: &BuildPairsArgs) -> Result<()> {
    let mut out = Outputs::new(g.force);
    out.plan(&a.out)?;
    out.plan(&a.stats)?;
    let spec = SplitSpec::new(a.val_frac, a.test_frac, g.seed())?;

    let raw = read_corpus(&a.corpus)?;
    let kept = corpus::filter_corpus(&raw);
    log::info!("{} of {} occurrences pass the filters", kept.len(), raw.len());
    let ds = spcd::build_dataset(&kept, &spec)?;
    for w in &ds.assignment.warnings {
        log::warn!("{w}");
    }

    let mut m = RunManifest::new("build-pairs", Some(spec.seed), a)?;
    m.input("corpus", &a.corpus)?;
    spcd::write_pairs(&a.out, &ds.pairs)?;

    let held_out: BTreeMap<Split, _> = [Split::Val, Split::Test]
        .into_iter()
        .map(|s| {
            let concepts: Vec<&str> = ds.assignment.held_out_concepts(s).into_iter().map(ConceptId::as_str).collect();
            let lemmas: Vec<&str> = ds.assignment.held_out_lemmas(s).into_iter().collect();
            (s, json!({ "concepts": concepts, "lemmas": lemmas }))
        })
        .collect();
    let occurrences: BTreeMap<Split, usize> = ds.splits.iter().map(|(s, o)| (*s, o.len())).collect();
    out.write_json(
        &a.stats,
        &m,
        json!({
            "occurrences_read": raw.len(),
            "occurrences_kept": kept.len(),
            "split_occurrences": occurrences,
            "held_out": held_out,
            "warnings": ds.assignment.warnings,
            "pairs": spcd::pair_stats(&ds.pairs),
        }),
    )
}

pub fn train_adapter(g: &Global, a: &TrainArgs) -> Result<()> {
    let mut out = Outputs::new(g.force);
    out.plan(&a.out)?;
    out.plan(&a.trace)?;

    let mut cfg = match &a.config {
        Some(p) => TrainConfig::read(p).with_context(|| format!("loading config {}", p.display()))?,
        None => TrainConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.margin {
        cfg.margin = v;
    }
    if let Some(v) = a.d_out {
        cfg.d_out = v;
    }
    cfg.validate()?;

    let pairs: Vec<PairRecord> = read_pairs(&a.pairs)?.into_iter().filter(|p| p.split == Split::Train).collect();
    ensure!(!pairs.is_empty(), "{} holds no train-split pairs", a.pairs.display());
    let embeddings = read_embeddings(&a.embeddings)?;
    log::info!("training on {} pairs, {} -> {} dims", pairs.len(), embeddings.dim(), cfg.d_out);
    let outcome = adapter::train(&pairs, &embeddings, &cfg)?;

    let mut m = RunManifest::new("train-adapter", Some(cfg.seed), &cfg)?;
    m.input("pairs", &a.pairs)?;
    m.input("embeddings", &a.embeddings)?;
    out.write(&a.out, outcome.params.to_bytes()?)?;
    let mut csv = String::from("step,learning_rate,loss\n");
    for r in &outcome.trace {
        csv.push_str(&format!("{},{},{}\n", r.step, r.learning_rate, r.loss));
    }
    out.write_table(&a.trace, &m, &csv)
}

fn split_of<'a>(scored: &'a [ScoredPair], splits: &[Split]) -> Vec<ScoredPair> {
    scored.iter().filter(|s| splits.contains(&s.pair.split)).cloned().collect::<Vec<_>>()
}

pub fn eval_cdiff(g: &Global, a: &CdiffArgs) -> Result<()> {
    let mut out = Outputs::new(g.force);
    out.plan(&a.out)?;
    let pairs = read_pairs(&a.pairs)?;
    let embeddings = read_embeddings(&a.embeddings)?;
    let adapter = read_adapter(a.adapter.as_ref())?;

    let scored = conceptdiff::score_pairs(&pairs, &embeddings, adapter.as_ref())?;
    let tuning = split_of(&scored, &[Split::Train, Split::Val]);
    let test = split_of(&scored, &[Split::Test]);
    ensure!(!tuning.is_empty(), "no train or val pairs to tune the threshold on");
    ensure!(!test.is_empty(), "no test pairs to evaluate");
    let (fit, report) = conceptdiff::evaluate(&tuning, &test)?;
    let test_pairs: Vec<PairRecord> = test.iter().map(|s| s.pair.clone()).collect();
    let baseline = conceptdiff::metrics(&test_pairs, &conceptdiff::baseline_1l1c(&test_pairs), None)?;

    let mut m = RunManifest::new("eval cdiff", None, a)?;
    m.input("pairs", &a.pairs)?;
    m.input("embeddings", &a.embeddings)?;
    if let Some(p) = &a.adapter {
        m.input("adapter", p)?;
    }
    out.write_json(
        &a.out,
        &m,
        json!({
            "tuning_pairs": tuning.len(),
            "tuning_accuracy": fit.accuracy,
            "model": report,
            "baseline_1l1c": baseline,
        }),
    )
}

pub fn eval_lscd(g: &Global, a: &LscdArgs) -> Result<()> {
    let mut out = Outputs::new(g.force);
    out.plan(&a.out)?;
    out.plan(&a.summary)?;
    let targets = lscd::load_targets(&a.gold, &a.usages)?;
    let embeddings = read_embeddings(&a.embeddings)?;
    let adapter = read_adapter(a.adapter.as_ref())?;
    let ids = targets.iter().flat_map(|t| {
        let (u1, u2) = t.usages();
        u1.iter().chain(u2).map(String::as_str)
    });
    let space = space(&embeddings, adapter.as_ref(), ids)?;
    let scores = lscd::score_targets(&targets, &space)?;

    let mut m = RunManifest::new("eval lscd", None, a)?;
    m.input("gold", &a.gold)?;
    m.input("usages", &a.usages)?;
    m.input("embeddings", &a.embeddings)?;
    if let Some(p) = &a.adapter {
        m.input("adapter", p)?;
    }
    out.write_table(&a.out, &m, &lscd::format_scores(&scores))?;
    match lscd::summarize(&scores) {
        Ok(s) => out.write_json(&a.summary, &m, json!({ "summary": s, "refused": null })),
        Err(e) => {
            out.write_json(&a.summary, &m, json!({ "summary": null, "refused": e.to_string() }))?;
            bail!("correlation refused: {e}; per-target scores written to {}", a.out.display())
        }
    }
}

pub fn cosimlex_requests(g: &Global, a: &RequestsArgs) -> Result<()> {
    let mut out = Outputs::new(g.force);
    out.plan(&a.out)?;
    let entries = cosimlex::read_entries(&a.entries)?;
    let placeholder = ConceptId::new("unannotated")?;
    let occs: Vec<Occurrence> = cosimlex::encoding_requests(&entries)
        .into_iter()
        .map(|(id, s)| {
            let tokens = s.unmark();
            let target_index = s.target_index();
            Occurrence {
                id,
                lemma: tokens[target_index].to_lowercase(),
                tokens,
                target_index,
                pos: Pos::Noun,
                concept: placeholder.clone(),
                is_proper_noun: false,
            }
        })
        .collect();
    corpus::write_corpus(&a.out, &occs)?;
    log::info!("{} requests for {} entries", occs.len(), entries.len());
    Ok(())
}

pub fn eval_cosimlex(g: &Global, a: &CosimlexArgs) -> Result<()> {
    let mut out = Outputs::new(g.force);
    let report_path = a.out_dir.join("report.json");
    let preds_path = a.out_dir.join("predictions.tsv");
    out.plan(&report_path)?;
    if a.embeddings.is_some() {
        out.plan(&preds_path)?;
    }
    let entries = cosimlex::read_entries(&a.entries)?;
    let mut m = RunManifest::new("eval cosimlex", None, a)?;
    m.input("entries", &a.entries)?;

    let preds = if let Some(path) = &a.embeddings {
        let embeddings = read_embeddings(path)?;
        let adapter = read_adapter(a.adapter.as_ref())?;
        let requests = cosimlex::encoding_requests(&entries);
        let space = space(&embeddings, adapter.as_ref(), requests.iter().map(|(id, _)| id.as_str()))?;
        let encoder = LookupEncoder::new(&requests, &space)?;
        let preds = cosimlex::predict_all(&entries, &encoder)?;
        m.input("embeddings", path)?;
        if let Some(p) = &a.adapter {
            m.input("adapter", p)?;
        }
        out.write_table(&preds_path, &m, &cosimlex::format_predictions(&entries, &preds))?;
        preds
    } else {
        let path = a.predictions.as_ref().expect("clap requires a source");
        m.input("predictions", path)?;
        cosimlex::read_predictions(path, &entries)?
    };
    let report = cosimlex::evaluate(&entries, &preds)?;
    out.write_json(&report_path, &m, &report)
}

pub fn eval_geometry(g: &Global, a: &GeometryArgs) -> Result<()> {
    let mut out = Outputs::new(g.force);
    let csv_path = a.out_dir.join("histogram.csv");
    let json_path = a.out_dir.join("geometry.json");
    let svg_path = a.out_dir.join("histogram.svg");
    out.plan(&csv_path)?;
    out.plan(&json_path)?;
    if a.svg {
        out.plan(&svg_path)?;
    }
    let split: Split = a.split.parse()?;
    let pairs: Vec<PairRecord> = read_pairs(&a.pairs)?.into_iter().filter(|p| p.split == split).collect();
    ensure!(!pairs.is_empty(), "no {split} pairs in {}", a.pairs.display());
    let ids = pair_ids(&pairs);
    let occurrences: Vec<Occurrence> = read_corpus(&a.corpus)?.into_iter().filter(|o| ids.contains(o.id.as_str())).collect();
    ensure!(
        occurrences.len() == ids.len(),
        "{} pair occurrences missing from {}",
        ids.len() - occurrences.len(),
        a.corpus.display()
    );
    let taxonomy = a
        .taxonomy
        .as_ref()
        .map(|p| Taxonomy::read_edge_list(p).with_context(|| format!("loading taxonomy {}", p.display())))
        .transpose()?;
    let embeddings = read_embeddings(&a.embeddings)?;
    let adapter = read_adapter(a.adapter.as_ref())?;
    let space = space(&embeddings, adapter.as_ref(), ids.iter().copied())?;

    let scored = conceptdiff::score_pairs(&pairs, &space, None)?;
    let dists = geometry::category_distributions(&scored, geometry::DEFAULT_BINS, a.threshold)?;
    let report = geometry::analyze(&occurrences, &pairs, &space, taxonomy.as_ref())?;

    let mut m = RunManifest::new("eval geometry", None, a)?;
    for (role, p) in [("pairs", Some(&a.pairs)), ("corpus", Some(&a.corpus)), ("embeddings", Some(&a.embeddings))]
        .into_iter()
        .chain([("adapter", a.adapter.as_ref()), ("taxonomy", a.taxonomy.as_ref())])
    {
        if let Some(p) = p {
            m.input(role, p)?;
        }
    }
    out.write_table(&csv_path, &m, &geometry::format_histogram_csv(&dists))?;
    #[derive(Serialize)]
    struct Body<'a> {
        split: Split,
        pairs: usize,
        geometry: &'a geometry::GeometryReport,
        mean_distance: BTreeMap<&'a str, Option<f64>>,
    }
    let mean_distance = dists.distributions.iter().map(|d| (d.category.as_str(), d.mean)).collect();
    out.write_json(
        &json_path,
        &m,
        Body {
            split,
            pairs: pairs.len(),
            geometry: &report,
            mean_distance,
        },
    )?;
    if a.svg {
        out.write(&svg_path, geometry::histogram_svg(&dists))?;
    }
    Ok(())
}

pub fn gradcheck(g: &Global, a: &GradcheckArgs) -> Result<()> {
    let mut out = Outputs::new(g.force);
    if let Some(p) = &a.out {
        out.plan(p)?;
    }
    let seed = g.seed();
    let mut r = rng::stream(seed, "gradcheck");
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for draw in 0..a.draws {
        let d_in = r.random_range(2..7);
        let d_out = r.random_range(2..7);
        let w: Vec<f64> = (0..d_out * d_in).map(|_| r.random_range(-1.0..1.0)).collect();
        let b = (draw % 3 == 0).then(|| (0..d_out).map(|_| r.random_range(-0.3..0.3)).collect());
        let p = AdapterParams::new(d_out, d_in, w, b)?;
        let n = r.random_range(1..6);
        let vecs: Vec<Vec<f32>> = (0..2 * n)
            .map(|_| (0..d_in).map(|_| r.random_range(-1.0f32..1.0)).collect())
            .collect();
        let batch: Vec<Example> = (0..n)
            .map(|k| Example {
                a: &vecs[2 * k],
                b: &vecs[2 * k + 1],
                label: r.random_range(0..2),
            })
            .collect();
        let margin = r.random_range(0.3..2.0);
        let c = adapter::gradient_check(&p, &batch, margin, a.step, LossForm::Distance)?;
        if c.max_rel_error >= a.tolerance {
            failures += 1;
            log::warn!("draw {draw}: max relative error {:.3e}", c.max_rel_error);
        }
        worst = worst.max(c.max_rel_error);
    }
    let body = json!({
        "draws": a.draws,
        "max_rel_error": worst,
        "failures": failures,
        "passed": failures == 0,
    });
    let m = RunManifest::new("gradcheck", Some(seed), a)?;
    match &a.out {
        Some(p) => out.write_json(p, &m, &body)?,
        None => println!("{}", serde_json::to_string_pretty(&json!({ "manifest": m, "result": body }))?),
    }
    ensure!(failures == 0, "{failures} of {} draws exceed tolerance {:e} (worst {worst:.3e})", a.draws, a.tolerance);
    Ok(())
}

pub fn synth(g: &Global, a: &SynthArgs) -> Result<()> {
    let mut out = Outputs::new(g.force);
    let corpus_path = a.out_dir.join("corpus.jsonl");
    let emb_path = a.out_dir.join("embeddings.emb");
    out.plan(&corpus_path)?;
    out.plan(&emb_path)?;
    let spec = ClusterSpec {
        concepts: a.concepts,
        dim: a.dim,
        per_sense: a.per_sense,
        noise: a.noise,
        seed: g.seed(),
        ..ClusterSpec::default()
    };
    let s = synthetic::generate(&spec, "synth")?;
    std::fs::create_dir_all(&a.out_dir)?;
    corpus::write_corpus(&corpus_path, &s.occurrences)?;
    out.write(&emb_path, s.embeddings.to_bytes()?)
}

#[derive(Serialize)]
struct Validation {
    rows: usize,
    dim: usize,
    corpus_checked: bool,
}

/// Format validator for embedding files produced outside the toolkit.
pub fn validate(a: &ValidateArgs) -> Result<()> {
    let m = read_embeddings(&a.embeddings)?;
    for (i, row) in m.rows().enumerate() {
        let id = &m.ids()[i];
        ensure!(row.iter().all(|x| x.is_finite()), "row `{id}` has non-finite values");
        ensure!(row.iter().any(|&x| x != 0.0), "row `{id}` is the zero vector");
    }
    if let Some(path) = &a.corpus {
        let occs = read_corpus(path)?;
        ensure!(
            occs.len() == m.len(),
            "corpus has {} occurrences, embedding file {} rows",
            occs.len(),
            m.len()
        );
        if let Some((k, (o, id))) = occs.iter().zip(m.ids()).enumerate().find(|(_, (o, id))| o.id != **id) {
            bail!("row {k}: expected id `{}`, found `{id}`", o.id);
        }
    }
    let v = Validation {
        rows: m.len(),
        dim: m.dim(),
        corpus_checked: a.corpus.is_some(),
    };
    println!("{}", serde_json::to_string(&v)?);
    Ok(())
}

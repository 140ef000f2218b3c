//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero if any criterion fails.
//!
//! Oracles here are written independently of the library code they check.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cale_core::adapter::{self, AdapterParams, Example, LossForm, TrainConfig};
use cale_core::conceptdiff::{self, ScoredPair};
use cale_core::corpus::{self, ConceptId, Taxonomy};
use cale_core::embedding::EmbeddingMatrix;
use cale_core::geometry;
use cale_core::lscd::{self, DiachronicTarget};
use cale_core::spcd::{self, PairCategory, Split, SplitSpec};
use cale_core::stats;
use cale_core::synthetic::{self, ClusterSpec};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.1?}, limit {limit:?}"))
}

// ---- independent oracles -------------------------------------------------

fn oracle_cos_dist(u: &[f32], v: &[f32]) -> f64 {
    let nu: f64 = u.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    let mut dot = 0.0;
    for i in 0..u.len() {
        dot += f64::from(u[i]) / nu * f64::from(v[i]) / nv;
    }
    1.0 - dot
}

fn oracle_cos_dist64(u: &[f64], v: &[f64]) -> f64 {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - u.iter().zip(v).map(|(a, b)| (a / nu) * (b / nv)).sum::<f64>()
}

fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n).sqrt();
    cov / (sx * sy)
}

fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle_silhouette(points: &[Vec<f32>], labels: &[usize]) -> f64 {
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let same: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if same.is_empty() {
            continue;
        }
        let a = same.iter().map(|&j| oracle_cos_dist(&points[i], &points[j])).sum::<f64>() / same.len() as f64;
        let others: HashSet<usize> = labels.iter().copied().filter(|&l| l != labels[i]).collect();
        let mut b = f64::INFINITY;
        for l in others {
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == l).collect();
            let m = members.iter().map(|&j| oracle_cos_dist(&points[i], &points[j])).sum::<f64>() / members.len() as f64;
            b = b.min(m);
        }
        if a.max(b) > 0.0 {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}

// ---- criteria ------------------------------------------------------------

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for draw in 0..100 {
        let d_in = rng.random_range(2..7);
        let d_out = rng.random_range(2..7);
        let with_bias = draw % 3 == 0;
        let w: Vec<f64> = (0..d_out * d_in).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = with_bias.then(|| (0..d_out).map(|_| rng.random_range(-0.3..0.3)).collect());
        let p = AdapterParams::new(d_out, d_in, w, b).unwrap();
        let n = rng.random_range(1..6);
        let vecs: Vec<Vec<f32>> = (0..2 * n).map(|_| (0..d_in).map(|_| rng.random_range(-1.0f32..1.0)).collect()).collect();
        let batch: Vec<Example> = (0..n)
            .map(|k| Example { a: &vecs[2 * k], b: &vecs[2 * k + 1], label: rng.random_range(0..2) })
            .collect();
        let margin = rng.random_range(0.3..2.0);
        let c = adapter::gradient_check(&p, &batch, margin, 1e-4, LossForm::Distance).map_err(|e| e.to_string())?;
        worst = worst.max(c.max_rel_error);
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;

    // Negative pair sitting on the hinge: d = m exactly at W = I. Both
    // one-sided difference quotients vanish with the step, matching the zero
    // subgradient.
    let m = 0.5;
    let theta = (1.0f64 - m).acos();
    let (a, b) = ([1.0f32, 0.0], [theta.cos() as f32, theta.sin() as f32]);
    let p = AdapterParams::identity_padded(2, 2, false);
    let d = cale_core::embedding::cosine_distance(&a, &b).unwrap();
    let batch = [Example { a: &a, b: &b, label: 0 }];
    let g = adapter::batch_gradient(&batch, &p, d, LossForm::Distance).map_err(|e| e.to_string())?;
    ensure(g.gradient.weight.iter().all(|&x| x == 0.0), || format!("kink gradient {:?}", g.gradient.weight))?;
    let mut kink_worst = 0.0f64;
    for h in [1e-3, 1e-4] {
        for k in 0..4 {
            for sign in [1.0, -1.0] {
                let mut w = p.weight().to_vec();
                w[k] += sign * h;
                let q = AdapterParams::new(2, 2, w, None).unwrap();
                let l1 = adapter::batch_loss(&batch, &q, d, LossForm::Distance).unwrap();
                let l0 = adapter::batch_loss(&batch, &p, d, LossForm::Distance).unwrap();
                let slope = (l1 - l0) / h;
                // quadratic on the active side: slope is O(h)
                ensure(slope.abs() <= 10.0 * h, || format!("one-sided slope {slope:e} at step {h:e}"))?;
                kink_worst = kink_worst.max(slope.abs());
            }
        }
    }
    within_time(start, Duration::from_secs(60))?;
    Ok(format!("max rel err {worst:.2e} over 100 draws; kink one-sided slopes <= {kink_worst:.1e}"))
}

struct EndToEnd {
    raw_ba: f64,
    trained_ba: f64,
    loss_before: f64,
    loss_after: f64,
    raw_means: BTreeMap<&'static str, f64>,
    trained_means: BTreeMap<&'static str, f64>,
    elapsed: Duration,
}

fn means(scored: &[ScoredPair]) -> BTreeMap<&'static str, f64> {
    let h = geometry::category_distributions(scored, geometry::DEFAULT_BINS, None).unwrap();
    PairCategory::ALL.iter().map(|c| (c.as_str(), h.get(*c).mean.unwrap())).collect()
}

fn synthetic_end_to_end() -> Result<EndToEnd, String> {
    let start = Instant::now();
    let e = |err: cale_core::Error| err.to_string();
    let spec = ClusterSpec {
        per_sense: 8_000,
        ..ClusterSpec::default()
    };
    let train = synthetic::generate(&spec, "train").map_err(e)?;
    let held = synthetic::generate(&ClusterSpec { per_sense: 500, ..spec.clone() }, "heldout").map_err(e)?;
    let train_pairs = spcd::generate_pairs(Split::Train, &train.occurrences, 42);
    let test_pairs = spcd::generate_pairs(Split::Test, &held.occurrences, 42);

    let evaluate = |w: Option<&AdapterParams>| -> Result<(f64, BTreeMap<&'static str, f64>), String> {
        let tuning = conceptdiff::score_pairs(&train_pairs, &train.embeddings, w).map_err(e)?;
        let test = conceptdiff::score_pairs(&test_pairs, &held.embeddings, w).map_err(e)?;
        let (_, report) = conceptdiff::evaluate(&tuning, &test).map_err(e)?;
        Ok((report.all.balanced_accuracy, means(&test)))
    };
    let (raw_ba, raw_means) = evaluate(None)?;

    let config = TrainConfig::default();
    let examples = adapter::examples(&train_pairs, &train.embeddings).map_err(e)?;
    let init = AdapterParams::identity_padded(config.d_out, spec.dim, config.bias);
    let loss_before = adapter::batch_loss(&examples, &init, config.margin, config.loss_form).map_err(e)?;
    let out = adapter::train(&train_pairs, &train.embeddings, &config).map_err(e)?;
    let loss_after = adapter::batch_loss(&examples, &out.params, config.margin, config.loss_form).map_err(e)?;
    let (trained_ba, trained_means) = evaluate(Some(&out.params))?;
    Ok(EndToEnd {
        raw_ba,
        trained_ba,
        loss_before,
        loss_after,
        raw_means,
        trained_means,
        elapsed: start.elapsed(),
    })
}

fn end_to_end_criterion(r: &EndToEnd) -> Outcome {
    let dcdl = r.trained_means["DC&DL"];
    let detail = format!(
        "raw BA {:.3}, trained BA {:.3}, DC&DL mean {:.3}, loss {:.4} -> {:.4}, {:.1?}",
        r.raw_ba, r.trained_ba, dcdl, r.loss_before, r.loss_after, r.elapsed
    );
    ensure(r.raw_ba <= 0.8, || format!("raw space too easy: {detail}"))?;
    ensure(r.trained_ba >= 0.95, || detail.clone())?;
    ensure(dcdl > 0.7, || detail.clone())?;
    ensure(r.loss_after < r.loss_before, || detail.clone())?;
    ensure(r.elapsed < Duration::from_secs(120), || detail.clone())?;
    Ok(detail)
}

fn distribution_flip(r: &EndToEnd) -> Outcome {
    let (b_scdl, b_dcsl) = (r.raw_means["SC&DL"], r.raw_means["DC&SL"]);
    let (a_scdl, a_dcsl) = (r.trained_means["SC&DL"], r.trained_means["DC&SL"]);
    let detail = format!("SC&DL/DC&SL means before {b_scdl:.3}/{b_dcsl:.3}, after {a_scdl:.3}/{a_dcsl:.3}");
    ensure(b_scdl > b_dcsl && a_scdl < a_dcsl, || detail.clone())?;
    Ok(detail)
}

fn baseline_exactness() -> Outcome {
    let occs = corpus::filter_corpus(&load_fixture()?);
    let ds = spcd::build_dataset(&occs, &SplitSpec::default()).map_err(|e| e.to_string())?;
    let mut checked = 0;
    let mut subsets: Vec<(&str, Vec<_>)> = vec![("all splits", ds.pairs.clone())];
    for s in Split::ALL {
        subsets.push((s.as_str(), ds.pairs.iter().filter(|p| p.split == s).cloned().collect()));
    }
    for (name, pairs) in subsets {
        if pairs.is_empty() {
            continue;
        }
        let r = conceptdiff::metrics(&pairs, &conceptdiff::baseline_1l1c(&pairs), None).map_err(|e| e.to_string())?;
        for (which, m) in [("SL", r.same_lemma), ("DL", r.different_lemma)] {
            let m = m.ok_or(format!("{name}: no {which} pairs"))?;
            if m.recall_positive.is_some() && m.recall_negative.is_some() {
                ensure(m.balanced_accuracy == 0.5, || format!("{name} {which}: BA {}", m.balanced_accuracy))?;
                checked += 1;
            }
        }
    }
    ensure(checked >= 2, || format!("only {checked} restrictions had both labels"))?;
    Ok(format!("BA exactly 0.5 on {checked} SL/DL restrictions"))
}

fn apd_prt_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for t in 0..50 {
        let dim = rng.random_range(2..=64);
        let (n1, n2) = (rng.random_range(1..=20), rng.random_range(1..=20));
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for k in 0..n1 + n2 {
            ids.push(format!("u{k}"));
            rows.push((0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect::<Vec<f32>>());
        }
        let m = EmbeddingMatrix::from_rows(ids.clone(), &rows).map_err(|e| e.to_string())?;
        let target = DiachronicTarget::new(format!("w{t}"), ids[..n1].to_vec(), ids[n1..].to_vec(), 0.0).unwrap();

        let mut sum = 0.0;
        for i in 0..n1 {
            for j in n1..n1 + n2 {
                sum += oracle_cos_dist(&rows[i], &rows[j]);
            }
        }
        let apd_oracle = sum / (n1 * n2) as f64;
        let mean = |range: std::ops::Range<usize>| -> Vec<f64> {
            let len = range.len() as f64;
            (0..dim).map(|c| range.clone().map(|r| f64::from(rows[r][c])).sum::<f64>() / len).collect()
        };
        let prt_oracle = oracle_cos_dist64(&mean(0..n1), &mean(n1..n1 + n2));
        let apd = lscd::apd(&target, &m).map_err(|e| e.to_string())?;
        let prt = lscd::prt(&target, &m).map_err(|e| e.to_string())?;
        worst = worst.max((apd - apd_oracle).abs()).max((prt - prt_oracle).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("50 targets, max deviation {worst:.1e}"))
}

fn statistics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = rng.random_range(3..40);
        // even draws use a small integer range, so ties are common
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            if k % 2 == 0 {
                f64::from(rng.random_range(0..6))
            } else {
                rng.random_range(-10.0..10.0)
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
        if constant(&x) || constant(&y) {
            ensure(stats::pearson(&x, &y).is_err(), || "constant input accepted".into())?;
            continue;
        }
        let r = stats::pearson(&x, &y).map_err(|e| e.to_string())?.coefficient;
        let rho = stats::spearman(&x, &y).map_err(|e| e.to_string())?.coefficient;
        worst = worst
            .max((r - oracle_pearson(&x, &y)).abs())
            .max((rho - oracle_pearson(&oracle_ranks(&x), &oracle_ranks(&y))).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    for (a, c, n) in [(0.3, 0.5, 20), (-0.7, 0.1, 100), (0.95, -0.2, 4)] {
        let (z, _) = stats::steiger_z(a, a, c, n).map_err(|e| e.to_string())?;
        ensure(z == 0.0, || format!("steiger({a},{a},{c},{n}) = {z}"))?;
    }
    let fz = stats::fisher_z(0.5).map_err(|e| e.to_string())?;
    ensure((fz - 0.5 * 3f64.ln()).abs() <= 1e-12, || format!("fisher_z(0.5) = {fz}"))?;
    Ok(format!("100 sequences, max deviation {worst:.1e}; steiger(a,a,c,n) = 0; fisher_z(0.5) = {fz:.15}"))
}

fn silhouette_and_wup() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 50 {
        let n = rng.random_range(2..=20);
        let k = rng.random_range(2..=5);
        let dim = rng.random_range(2..6);
        let pts: Vec<Vec<f32>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        if labels.iter().all(|&l| l == labels[0]) {
            continue;
        }
        let refs: Vec<&[f32]> = pts.iter().map(Vec::as_slice).collect();
        let s = geometry::silhouette(&refs, &labels).map_err(|e| e.to_string())?;
        worst = worst.max((s - oracle_silhouette(&pts, &labels)).abs());
        done += 1;
    }
    ensure(worst <= 1e-12, || format!("silhouette deviation {worst:e}"))?;
    let c = |s: &str| ConceptId::new(s).unwrap();
    let tax = Taxonomy::from_edges([(c("A"), c("R")), (c("B"), c("A"))]).map_err(|e| e.to_string())?;
    let w = geometry::wup(&tax, &c("A"), &c("B")).map_err(|e| e.to_string())?;
    ensure(w == 0.8, || format!("wup(A,B) = {w}"))?;
    Ok(format!("50 labelings, max deviation {worst:.1e}; wup(A,B) = {w}"))
}

fn load_fixture() -> Result<Vec<corpus::Occurrence>, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus200.jsonl");
    corpus::parse_corpus(&path).map_err(|e| e.to_string())
}

fn dataset_invariants() -> Outcome {
    let raw = load_fixture()?;
    ensure(raw.len() == 200, || format!("fixture has {} occurrences", raw.len()))?;
    let occs = corpus::filter_corpus(&raw);
    let spec = SplitSpec::default();
    let ds = spcd::build_dataset(&occs, &spec).map_err(|e| e.to_string())?;
    let split_of: BTreeMap<&str, Split> = ds
        .splits
        .iter()
        .flat_map(|(s, v)| v.iter().map(move |o| (o.id.as_str(), *s)))
        .collect();
    let by_id: BTreeMap<&str, &corpus::Occurrence> = occs.iter().map(|o| (o.id.as_str(), o)).collect();
    ensure(split_of.len() == occs.len(), || "some occurrence was not routed".into())?;

    for p in &ds.pairs {
        ensure(split_of[p.occ_a.as_str()] == p.split && split_of[p.occ_b.as_str()] == p.split, || {
            format!("cross-split pair {} {}", p.occ_a, p.occ_b)
        })?;
        let same = by_id[p.occ_a.as_str()].concept == by_id[p.occ_b.as_str()].concept;
        ensure(p.label == u8::from(same), || format!("label mismatch on {} {}", p.occ_a, p.occ_b))?;
    }
    for (&split, split_occs) in &ds.splits {
        let proposals = spcd::propose_partners(split, split_occs, spec.seed);
        let max = proposals.iter().map(Vec::len).max().unwrap_or(0);
        ensure(max <= 4, || format!("{split}: out-degree {max}"))?;
    }

    // exhaustive disjointness: a held-out concept or lemma never appears in
    // a lower-priority split
    let a = &ds.assignment;
    for (id, &s) in &split_of {
        let o = by_id[id];
        let cs = a.concept_split[&o.concept];
        let ls = a.lemma_split[&o.lemma];
        ensure(s == cs.max(ls), || format!("{id} routed to {s}, expected {}", cs.max(ls)))?;
    }
    for (x, y) in [(Split::Train, Split::Val), (Split::Train, Split::Test), (Split::Val, Split::Test)] {
        let concepts = |s: Split| -> HashSet<&ConceptId> { ds.splits[&s].iter().map(|o| &o.concept).collect() };
        let lemmas = |s: Split| -> HashSet<&str> { ds.splits[&s].iter().map(|o| o.lemma.as_str()).collect() };
        for c in a.held_out_concepts(y) {
            ensure(!concepts(x).contains(c), || format!("held-out {y} concept {c} in {x}"))?;
        }
        for l in a.held_out_lemmas(y) {
            ensure(!lemmas(x).contains(l), || format!("held-out {y} lemma {l} in {x}"))?;
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (f1, f2) = (dir.path().join("a.tsv"), dir.path().join("b.tsv"));
    spcd::write_pairs(&f1, &ds.pairs).map_err(|e| e.to_string())?;
    let again = spcd::build_dataset(&corpus::filter_corpus(&load_fixture()?), &spec).map_err(|e| e.to_string())?;
    spcd::write_pairs(&f2, &again.pairs).map_err(|e| e.to_string())?;
    let (b1, b2) = (std::fs::read(&f1).unwrap(), std::fs::read(&f2).unwrap());
    ensure(b1 == b2, || "rerun produced different bytes".into())?;
    let counts: Vec<String> = Split::ALL.iter().map(|s| format!("{s} {}", ds.splits[s].len())).collect();
    Ok(format!("{} pairs; occurrences {}; rerun byte-identical", ds.pairs.len(), counts.join(", ")))
}

fn format_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for k in 0..20 {
        let (n, d) = (rng.random_range(1..40), rng.random_range(1..50));
        let data: Vec<f32> = (0..n * d)
            .map(|_| {
                let v = rng.random_range(-1e3f32..1e3);
                if v == 0.0 { 1.0 } else { v }
            })
            .collect();
        let ids: Vec<String> = (0..n).map(|i| format!("m{k}-{i}-é")).collect();
        let m = EmbeddingMatrix::new(d, data, ids).map_err(|e| e.to_string())?;
        let bytes = m.to_bytes().map_err(|e| e.to_string())?;
        let back = EmbeddingMatrix::from_bytes(&bytes).map_err(|e| e.to_string())?;
        let bits = |x: &EmbeddingMatrix| x.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        ensure(bits(&back) == bits(&m) && back.ids() == m.ids(), || format!("CALEEMB1 matrix {k} differs"))?;
        ensure(back.to_bytes().unwrap() == bytes, || format!("CALEEMB1 matrix {k} re-encodes differently"))?;

        let (o, i) = (rng.random_range(1..30), rng.random_range(1..30));
        let w: Vec<f64> = (0..o * i).map(|_| f64::from(rng.random_range(-5.0f32..5.0))).collect();
        let b = (k % 2 == 0).then(|| (0..o).map(|_| f64::from(rng.random_range(-1.0f32..1.0))).collect());
        let p = AdapterParams::new(o, i, w, b).map_err(|e| e.to_string())?;
        let bytes = p.to_bytes().map_err(|e| e.to_string())?;
        let back = AdapterParams::from_bytes(&bytes).map_err(|e| e.to_string())?;
        let pb = |x: &AdapterParams| {
            x.weight()
                .iter()
                .chain(x.bias().into_iter().flatten())
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        ensure(pb(&back) == pb(&p) && back.bias().is_some() == p.bias().is_some(), || format!("CALEADP1 adapter {k} differs"))?;
        ensure(back.to_bytes().unwrap() == bytes, || format!("CALEADP1 adapter {k} re-encodes differently"))?;
    }
    Ok("20 matrices and 20 adapters bit-identical".into())
}

fn main() {
    let mut failures = 0;
    let mut report = |name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("PASS  {name}: {detail}"),
        Err(detail) => {
            failures += 1;
            println!("FAIL  {name}: {detail}");
        }
    };
    report("loss/gradient correctness", gradient_correctness());
    let e2e = synthetic_end_to_end();
    report("synthetic end-to-end", e2e.as_ref().map_err(Clone::clone).and_then(end_to_end_criterion));
    report("baseline exactness", baseline_exactness());
    report("APD/PRT oracle equivalence", apd_prt_oracles());
    report("statistics oracles", statistics_oracles());
    report("silhouette and Wu-Palmer", silhouette_and_wup());
    report("dataset-builder invariants", dataset_invariants());
    report("format round-trips", format_round_trips());
    report("distance-distribution flip", e2e.as_ref().map_err(Clone::clone).and_then(distribution_flip));
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

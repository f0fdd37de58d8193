//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails.

mod common;

use std::time::Instant;

use common::hand::*;
use common::*;
use scenecheck::context::{mutual_information, Contingency};
use scenecheck::corpus::persist::{load_registry, load_stats, save_registry, save_stats};
use scenecheck::stats::{Channel, Observation};
use scenecheck::{LabelGrid, Octant, StatsBuilder, VerifierRegistry};

// Pinned tolerances and budgets.
const ORACLE_BUDGET_S: f64 = 10.0;
const PROB_TOL: f64 = 1e-12;
const MI_TOL: f64 = 1e-10;
const MI_ZERO_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-9;
const CLASSIFIER_BUDGET_S: f64 = 5.0;
const EXPERIMENT_SCENES: usize = 800;
const MIN_GLOBAL_ACCURACY: f64 = 0.65;
const EXPERIMENT_BUDGET_S: f64 = 60.0;
const SELECTION_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const UPSCALE_L1_MAX: f64 = 0.15;
const PERSISTENCE_SCENES: usize = 100;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let octant = octant_mismatches(101, 10_000);
    let (contact, _, _) = contact_mismatches(102, 200);
    let components = components_mismatches(103, 100);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        octant == 0 && contact == 0 && components == 0 && secs < ORACLE_BUDGET_S,
        format!("octant {octant}/10000, contact {contact}/200, components {components}/100 mismatches in {secs:.2}s"),
    )
}

fn criterion_2() -> Outcome {
    let scenes = hand_corpus();
    let b = build(&scenes.iter().collect::<Vec<_>>());
    let counts = hand_count_mismatches(&b);
    let m = b.finalize::<f64>(1.0).unwrap();
    let worst_prob = hand_probabilities()
        .into_iter()
        .map(|(a, c, obs, want)| (m.query(a, c, obs).unwrap() - want).abs())
        .fold(0.0, f64::max);

    let (classes, synth) = synthetic_scenes(25, 201);
    let sequential = build_over(&classes, &synth.iter().collect::<Vec<_>>());
    let parts = partitions(synth.len(), &mut rng(202));
    let n_parts = parts.len();
    let merge_ok = parts.into_iter().all(|shards| {
        let merged = shards
            .iter()
            .map(|idx| build_over(&classes, &idx.iter().map(|&i| &synth[i]).collect::<Vec<_>>()))
            .fold(StatsBuilder::new(classes.iter().copied(), 5), |acc, s| acc.merge(&s).unwrap());
        merged == sequential
    });
    outcome(
        counts.is_empty() && worst_prob <= PROB_TOL && merge_ok && synth.len() == 50,
        format!(
            "{} count mismatches, worst probability error {worst_prob:.1e}, merge bit-identical over {n_parts} partitions: {merge_ok}",
            counts.len()
        ),
    )
}

fn criterion_3() -> Outcome {
    use rand::RngExt;
    let mut rng = rng(301);
    let mut worst_oracle: f64 = 0.0;
    let mut worst_product: f64 = 0.0;
    let mut worst_self: f64 = 0.0;
    for _ in 0..100 {
        let (rows, cols) = (rng.random_range(2..7), rng.random_range(2..7));
        let joint: Vec<Vec<u64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(1..60)).collect()).collect();
        let mi: f64 = mutual_information(&Contingency::from_rows(&joint).unwrap()).unwrap();
        worst_oracle = worst_oracle.max((mi - mi_oracle(&joint)).abs());

        let r: Vec<u64> = (0..rows).map(|_| rng.random_range(1..10)).collect();
        let c: Vec<u64> = (0..cols).map(|_| rng.random_range(1..10)).collect();
        let product: Vec<Vec<u64>> = r.iter().map(|&x| c.iter().map(|&y| x * y).collect()).collect();
        let mi: f64 = mutual_information(&Contingency::from_rows(&product).unwrap()).unwrap();
        worst_product = worst_product.max(mi.abs());

        let diag: Vec<Vec<u64>> = (0..rows).map(|i| (0..rows).map(|j| if i == j { r[i] } else { 0 }).collect()).collect();
        let mi: f64 = mutual_information(&Contingency::from_rows(&diag).unwrap()).unwrap();
        worst_self = worst_self.max((mi - entropy(&r)).abs());
    }
    outcome(
        worst_oracle <= MI_TOL && worst_product <= MI_ZERO_TOL && worst_self <= MI_TOL,
        format!("oracle {worst_oracle:.1e}, product form {worst_product:.1e}, MI(X,X)-H(X) {worst_self:.1e}"),
    )
}

fn criterion_4() -> Outcome {
    let (classes, scenes) = synthetic_scenes(60, 401);
    let m = build_over(&classes, &scenes.iter().collect::<Vec<_>>()).finalize::<f64>(1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut dual_breaks = 0;
    for &a in &classes {
        for &b in &classes {
            for ch in [Channel::Position, Channel::Proximity, Channel::Distance] {
                worst = worst.max((m.distribution(a, b, ch).unwrap().iter().sum::<f64>() - 1.0).abs());
            }
            for o in Octant::ALL {
                let p = m.query(a, b, Observation::Position(o)).unwrap();
                let q = m.query(b, a, Observation::Position(o.opposite())).unwrap();
                dual_breaks += usize::from(p != q);
            }
        }
    }
    outcome(
        worst <= NORM_TOL && dual_breaks == 0,
        format!("worst normalization error {worst:.1e}, {dual_breaks} positional duality breaks"),
    )
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let accuracy = separable_training_accuracy(501);
    let (xs, ys) = separable(502);
    let train = || scenecheck::verifier::train_linear(&xs, &ys, Default::default(), 7, "c5").unwrap();
    let (a, b) = (train(), train());
    let identical = a == b && serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        identical && accuracy == 1.0 && secs < CLASSIFIER_BUDGET_S,
        format!("bit-identical {identical}, separable training accuracy {:.1}%, {secs:.2}s", 100.0 * accuracy),
    )
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let w = world(0, EXPERIMENT_SCENES / 2);
    let scenes = w.corpus.grids.len();
    let e = run_experiment(&w, 0);
    let secs = t.elapsed().as_secs_f64();
    let r = &e.with_context;
    let global = r.global.accuracy;
    let average = r.per_context_average_accuracy;
    let per_context: Vec<String> = r
        .contexts
        .iter()
        .map(|(k, m)| format!("{k} {:.2}%", 100.0 * m.accuracy))
        .collect();
    outcome(
        scenes >= EXPERIMENT_SCENES
            && r.contexts.len() == 2
            && global >= MIN_GLOBAL_ACCURACY
            && average >= global
            && e.global_only.global == r.global
            && secs < EXPERIMENT_BUDGET_S,
        format!(
            "{scenes} scenes, global {:.2}%, per-context average {:.2}% ({}), improvement {:+.2} pp, {secs:.1}s",
            100.0 * global,
            100.0 * average,
            per_context.join(", "),
            r.improvement_pp
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut hits = 0;
    let mut candidates = usize::MAX;
    let mut firsts = Vec::new();
    for seed in SELECTION_SEEDS {
        let report = context_ranking(&world(seed, EXPERIMENT_SCENES / 2));
        candidates = candidates.min(report.attributes.len());
        let best = report.best().unwrap_or("-").to_string();
        hits += usize::from(best == "location");
        firsts.push(best);
    }
    outcome(
        hits == SELECTION_SEEDS.len() && candidates >= 4,
        format!("location ranked first for {hits}/{} seeds among {candidates} attributes ({})", SELECTION_SEEDS.len(), firsts.join(", ")),
    )
}

fn criterion_8() -> Outcome {
    use rand::RngExt;
    let mut rng = rng(801);
    let mut translation_breaks = 0;
    for _ in 0..50 {
        let blob = random_blob(&mut rng, (0, 0), 14, 50);
        let (dr, dc) = (rng.random_range(0..20), rng.random_range(0..20));
        let moved: Vec<_> = blob.iter().map(|&(r, c)| (r + dr, c + dc)).collect();
        translation_breaks += usize::from(histogram(&blob, 40, 40) != histogram(&moved, 40, 40));
    }
    let worst = max_upscale_l1(802, 50);
    outcome(
        translation_breaks == 0 && worst <= UPSCALE_L1_MAX,
        format!("{translation_breaks}/50 translation breaks, worst 2x upscale L1 {worst:.3}"),
    )
}

fn criterion_9() -> Outcome {
    let w = world(901, 60);
    let reg = train_world(&w, Some("location"), 901);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("registry.json");
    save_registry(&path, &reg).unwrap();
    let back: VerifierRegistry = load_registry(&path).unwrap();
    let stats_path = dir.path().join("global.json");
    save_stats(&stats_path, &reg.global.stats).unwrap();
    let stats_back: scenecheck::CooccurrenceModel = load_stats(&stats_path).unwrap();
    let counts_exact = stats_back.counts() == reg.global.stats.counts() && stats_back == reg.global.stats;

    let map = w.corpus.class_map.clone();
    let mut rng = rng(902);
    let mut differing = 0;
    for i in 0..PERSISTENCE_SCENES {
        let g = random_grid(&mut rng, 64, 64, map.len() as u32);
        let g = LabelGrid::new(format!("r{i}"), 64, 64, g.cells().to_vec(), map.clone()).unwrap();
        let attrs = w.corpus.attributes.record(w.val[i % w.val.len()].image_id());
        differing += usize::from(reg.verify(&g, attrs).unwrap() != back.verify(&g, attrs).unwrap());
    }
    outcome(
        back == reg && counts_exact && differing == 0,
        format!("registry equal {}, counts exact {counts_exact}, {differing}/{PERSISTENCE_SCENES} verdicts differ", back == reg),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("exact-oracle suites", criterion_1),
        ("statistics correctness", criterion_2),
        ("mutual information", criterion_3),
        ("normalization and duality", criterion_4),
        ("classifier determinism and sanity", criterion_5),
        ("end-to-end context experiment", criterion_6),
        ("context selection validity", criterion_7),
        ("shape histogram properties", criterion_8),
        ("persistence", criterion_9),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("{} criterion {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

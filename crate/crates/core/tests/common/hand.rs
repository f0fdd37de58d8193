//! A hand-tallied five-image corpus and synthetic shard helpers.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::RngExt;
use scenecheck::corpus::synth::{generate, SyntheticConfig};
use scenecheck::scene::analyze;
use scenecheck::stats::Observation;
use scenecheck::{AnalysisConfig, ClassMap, LabelGrid, Octant, Proximity, SceneAnalysis, StatsBuilder};

pub const TABLE: u32 = 1;
pub const LAMP: u32 = 2;
pub const CAT: u32 = 3;

pub fn draw(id: &str, blocks: &[(u32, usize, usize, usize, usize)]) -> LabelGrid {
    let map: ClassMap = [(TABLE, "table"), (LAMP, "lamp"), (CAT, "cat")].into_iter().collect();
    let mut cells = vec![0u32; 400];
    for &(class, top, left, h, w) in blocks {
        for r in top..top + h {
            for c in left..left + w {
                cells[r * 20 + c] = class;
            }
        }
    }
    LabelGrid::new(id, 20, 20, cells, Arc::new(map)).unwrap()
}

/// Five 20x20 images:
/// 1. lamp (2x2) resting on a table (2x4)
/// 2. the same pair plus a cat to the east, not touching
/// 3. a lone cat
/// 4. two cats side by side, apart
/// 5. background only
pub fn hand_corpus() -> Vec<SceneAnalysis> {
    let table = (TABLE, 10, 4, 2, 4);
    let lamp = (LAMP, 8, 5, 2, 2);
    let grids = [
        draw("1", &[table, lamp]),
        draw("2", &[table, lamp, (CAT, 10, 14, 2, 2)]),
        draw("3", &[(CAT, 5, 5, 2, 2)]),
        draw("4", &[(CAT, 2, 2, 2, 2), (CAT, 2, 10, 2, 2)]),
        draw("5", &[]),
    ];
    let cfg = AnalysisConfig {
        min_area: 1,
        ..AnalysisConfig::default()
    };
    grids.iter().map(|g| analyze(g, &cfg).unwrap()).collect()
}

pub fn build(scenes: &[&SceneAnalysis]) -> StatsBuilder {
    let mut b = StatsBuilder::new([TABLE, LAMP, CAT], 5);
    for s in scenes {
        b.accumulate(&s.objects, &s.relations).unwrap();
    }
    b
}

pub fn one_hot_plus(arity: usize, hits: &[(usize, u64)]) -> Vec<u64> {
    let mut v = vec![0; arity];
    for &(i, n) in hits {
        v[i] = n;
    }
    v
}

/// Differences between `b` and the hand tally of [`hand_corpus`].
pub fn hand_count_mismatches(b: &StatsBuilder) -> Vec<String> {
    let mut bad = Vec::new();
    let mut check = |what: String, ok: bool| {
        if !ok {
            bad.push(what);
        }
    };
    let (e, n, w, s) = (Octant::E.index(), Octant::N.index(), Octant::W.index(), Octant::S.index());
    let (on, under, none) = (Proximity::On.index(), Proximity::Under.index(), Proximity::None.index());

    check("images".into(), b.images() == 5);
    check("class images".into(), [TABLE, LAMP, CAT].map(|c| b.class_images(c).unwrap()) == [2, 2, 3]);
    let presence = [
        (TABLE, TABLE, 0),
        (TABLE, LAMP, 2),
        (LAMP, TABLE, 2),
        (TABLE, CAT, 1),
        (CAT, TABLE, 1),
        (LAMP, CAT, 1),
        (LAMP, LAMP, 0),
        (CAT, CAT, 1),
    ];
    for (a, c, want) in presence {
        check(format!("presence {a},{c}"), b.presence_count(a, c).unwrap() == want);
    }

    let position = [
        (LAMP, TABLE, vec![(s, 2)]),
        (TABLE, LAMP, vec![(n, 2)]),
        (TABLE, CAT, vec![(e, 1)]),
        (CAT, TABLE, vec![(w, 1)]),
        (LAMP, CAT, vec![(e, 1)]),
        (CAT, LAMP, vec![(w, 1)]),
        (CAT, CAT, vec![(e, 1), (w, 1)]),
        (TABLE, TABLE, vec![]),
    ];
    for (a, c, hits) in position {
        check(format!("position {a},{c}"), b.position_counts(a, c).unwrap() == one_hot_plus(8, &hits));
    }

    let proximity = [
        (LAMP, TABLE, vec![(on, 2)]),
        (TABLE, LAMP, vec![(under, 2)]),
        (TABLE, CAT, vec![(none, 1)]),
        (LAMP, CAT, vec![(none, 1)]),
        (CAT, CAT, vec![(none, 2)]),
    ];
    for (a, c, hits) in proximity {
        check(format!("proximity {a},{c}"), b.proximity_counts(a, c).unwrap() == one_hot_plus(6, &hits));
    }

    // Distances over the 20x20 diagonal: 2/28.3 -> bin 0, 8 to 9.2 over 28.3 -> bin 1.
    let distance = [
        (LAMP, TABLE, vec![(0, 2)]),
        (TABLE, LAMP, vec![(0, 2)]),
        (TABLE, CAT, vec![(1, 1)]),
        (CAT, LAMP, vec![(1, 1)]),
        (CAT, CAT, vec![(1, 2)]),
    ];
    for (a, c, hits) in distance {
        check(format!("distance {a},{c}"), b.distance_counts(a, c).unwrap() == one_hot_plus(5, &hits));
    }

    check("size n lamp,table".into(), b.size_moments(LAMP, TABLE).unwrap().n == 2);
    check("size n cat,cat".into(), b.size_moments(CAT, CAT).unwrap().n == 2);
    check("size n table,table".into(), b.size_moments(TABLE, TABLE).unwrap().n == 0);
    bad
}

/// Smoothed probabilities at alpha = 1, tallied by hand.
pub fn hand_probabilities() -> Vec<(u32, u32, Observation, f64)> {
    vec![
        (TABLE, LAMP, Observation::Presence, 3.0 / 7.0),
        (TABLE, CAT, Observation::Presence, 2.0 / 7.0),
        (CAT, CAT, Observation::Presence, 2.0 / 7.0),
        (TABLE, TABLE, Observation::Presence, 1.0 / 7.0),
        (LAMP, TABLE, Observation::Position(Octant::S), 3.0 / 10.0),
        (LAMP, TABLE, Observation::Position(Octant::N), 1.0 / 10.0),
        (CAT, CAT, Observation::Position(Octant::W), 2.0 / 10.0),
        (TABLE, TABLE, Observation::Position(Octant::NE), 1.0 / 8.0),
        (LAMP, TABLE, Observation::Proximity(Proximity::On), 3.0 / 8.0),
        (LAMP, TABLE, Observation::Proximity(Proximity::Beside), 1.0 / 8.0),
        (CAT, CAT, Observation::Proximity(Proximity::None), 3.0 / 8.0),
        (LAMP, TABLE, Observation::Distance(0), 3.0 / 7.0),
        (TABLE, CAT, Observation::Distance(4), 1.0 / 6.0),
    ]
}

pub fn synthetic_scenes(n_per_context: usize, seed: u64) -> (Vec<u32>, Vec<SceneAnalysis>) {
    let cfg = SyntheticConfig {
        images_per_context: n_per_context,
        seed,
        ..SyntheticConfig::default()
    };
    let corpus = generate(&cfg).unwrap();
    let scenes = corpus
        .grids
        .iter()
        .map(|g| analyze(g, &AnalysisConfig::default()).unwrap())
        .collect();
    (corpus.class_map.ids(), scenes)
}

pub fn build_over(classes: &[u32], scenes: &[&SceneAnalysis]) -> StatsBuilder {
    let mut b = StatsBuilder::new(classes.iter().copied(), 5);
    for s in scenes {
        b.accumulate(&s.objects, &s.relations).unwrap();
    }
    b
}

/// Every tested way of sharding the corpus, as lists of shards.
pub fn partitions(n: usize, rng: &mut impl rand::Rng) -> Vec<Vec<Vec<usize>>> {
    let mut out = vec![(0..n).map(|i| vec![i]).collect::<Vec<_>>()];
    for cut in [1, n / 3, n / 2, n - 1] {
        out.push(vec![(0..cut).collect(), (cut..n).collect()]);
    }
    for k in 2..=8 {
        let mut shards = vec![Vec::new(); k];
        for i in 0..n {
            shards[rng.random_range(0..k)].push(i);
        }
        out.push(shards);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    out.push(vec![order]);
    out
}

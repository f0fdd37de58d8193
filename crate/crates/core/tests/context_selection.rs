mod common;

use common::*;

#[test]
fn generating_attribute_ranks_first() {
    for seed in 1..=5 {
        let w = world(seed, 100);
        let report = context_ranking(&w);
        assert_eq!(report.attributes.len(), 4);
        assert_eq!(report.ranking.len(), 4, "every attribute is eligible");
        assert_eq!(report.best(), Some("location"), "seed {seed}");
        let mi = |name: &str| {
            report.attributes.iter().find(|a| a.attribute == name).unwrap().mutual_information
        };
        for noise in ["framing", "lighting", "objects"] {
            assert!(mi("location") > 10.0 * mi(noise), "seed {seed} {noise}");
        }
    }
}

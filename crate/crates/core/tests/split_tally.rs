mod support;

use facefold::lang_polygon::build_lang_polygon;
use facefold::molecule::{shrink, EventKind, ShrinkConfig};
use rand::SeedableRng;

#[test]
fn tally_event_kinds_over_random_trees() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(71);
    let mut contractions = 0;
    let mut splits = 0;
    let mut terminals = 0;
    let mut failures = 0;
    for _ in 0..60 {
        let tree = support::random_tree(&mut rng, 4, 20);
        let poly = build_lang_polygon(&tree, 0.05).unwrap();
        match shrink(&poly, &tree, &ShrinkConfig::default()) {
            Ok((_, events)) => {
                for e in &events {
                    match e.kind {
                        EventKind::Contraction => contractions += 1,
                        EventKind::Split => splits += 1,
                        EventKind::Terminal => terminals += 1,
                    }
                }
            }
            Err(e) => {
                eprintln!("failure: {e}");
                failures += 1;
            }
        }
    }
    eprintln!("contractions {contractions} splits {splits} terminals {terminals} failures {failures}");
    assert_eq!(failures, 0);
    assert!(splits > 0, "random suite never exercises splits");
}

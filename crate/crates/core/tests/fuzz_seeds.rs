//! Replays every checked-in fuzz corpus seed through the fuzzed entry
//! points, so the parsers stay panic-free without a fuzzing toolchain.

use std::fs;
use std::path::Path;

#[path = "../../../fuzz/entry_points.rs"]
mod entry_points;

#[test]
fn corpus_seeds_do_not_panic() {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    for &target in entry_points::TARGETS {
        let dir = corpus.join(target);
        let mut seeds = 0;
        for entry in fs::read_dir(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display())) {
            let path = entry.unwrap().path();
            entry_points::run(target, &fs::read(&path).unwrap());
            seeds += 1;
        }
        assert!(seeds > 0, "no seeds for {target}");
    }
}

#[test]
fn truncations_of_seeds_do_not_panic() {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    for &target in entry_points::TARGETS {
        for entry in fs::read_dir(corpus.join(target)).unwrap() {
            let bytes = fs::read(entry.unwrap().path()).unwrap();
            let step = (bytes.len() / 64).max(1);
            for cut in (0..bytes.len()).step_by(step) {
                entry_points::run(target, &bytes[..cut]);
            }
        }
    }
}

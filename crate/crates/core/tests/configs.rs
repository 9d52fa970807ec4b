//! Bundled sample configurations parse, validate and round-trip.

use pnhybrid::harness::config::{emit, parse_config, parse_str};
use pnhybrid::harness::manufactured::manufactured;

#[test]
fn bundled_configs_round_trip() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("cfg") {
            continue;
        }
        seen += 1;
        let spec = parse_config(&path).unwrap();
        let normal = emit(&spec);
        let again = parse_str(&normal).unwrap();
        assert_eq!(again, spec, "{}", path.display());
        assert_eq!(emit(&again), normal);
        manufactured(&spec.problem, &spec.params).unwrap();
        if !spec.sweep.is_empty() {
            assert!(!spec.sweep_points().unwrap().is_empty());
        }
    }
    assert!(seen >= 5);
}

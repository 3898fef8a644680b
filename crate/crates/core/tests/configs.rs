//! The shipped example configs must all parse and validate.

use emtc_core::network::parse_network;
use std::path::Path;

fn config_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn all_shipped_configs_parse() {
    let dir = config_dir();
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let net = parse_network(&text)
            .unwrap_or_else(|e| panic!("config {} failed: {e}", path.display()));
        assert!(!net.segments.is_empty());
        seen += 1;
    }
    assert!(seen >= 4, "expected at least the four paper systems, found {seen}");
}

#[test]
fn ninebus_fault_line_is_20km() {
    let text = std::fs::read_to_string(config_dir().join("ninebus.json")).unwrap();
    let net = parse_network(&text).unwrap();
    let idx = net.segment_by_id("9-6").expect("line 9-6 exists");
    assert_eq!(net.segments[idx].length_m, 20_000.0);
    assert_eq!(net.nodes[net.measurement], "9");
}

#[test]
fn radial_branches_cover_the_reported_fault_distances() {
    let text = std::fs::read_to_string(config_dir().join("radial.json")).unwrap();
    let net = parse_network(&text).unwrap();
    for (id, min_len) in [("T1", 15e3), ("T2", 10e3), ("T3", 4e3), ("T4", 2e3), ("T5", 5e3)] {
        let idx = net.segment_by_id(id).unwrap_or_else(|| panic!("{id} missing"));
        assert!(net.segments[idx].length_m > min_len);
    }
}

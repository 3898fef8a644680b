use emtc_core::locator::{locate_aerial_with, precalculate, Excitation, ModeId, PrecalcOptions, StoredSignals};
use emtc_core::network::{parse_network, FaultSpec, FaultType};
use emtc_core::solver::{simulate_fault, SolveGrid};

#[test]
fn probe_radial_multi_segment() {
    let text = std::fs::read_to_string(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/radial.json"),
    ).unwrap();
    let net = parse_network(&text).unwrap();
    let grid = SolveGrid::new(2e-7, 10_000).unwrap();
    let mut opts = PrecalcOptions::new(50.0, vec![FaultType::PgA]);
    opts.store = StoredSignals { ground: false, alpha: true, beta: false, raw: false };
    let db = precalculate(&net, grid, &Excitation::standard_impulse(), &opts).unwrap();
    for (seg_name, pos) in [("T1", 5_000.0), ("T1", 15_000.0), ("T2", 3_000.0), ("T2", 10_000.0), ("T3", 4_000.0), ("T4", 2_000.0), ("T5", 5_000.0)] {
        let seg = net.segment_by_id(seg_name).unwrap();
        let sim = simulate_fault(&net, &FaultSpec {
            segment: seg, position_m: pos, fault_type: FaultType::PgA,
            impedance_ohm: 10.0, inception_angle_deg: 90.0 }, grid, &[net.measurement]).unwrap();
        let loc = locate_aerial_with(&db, &net, &sim.observers[0].phases, Some(FaultType::PgA), Some(ModeId::Alpha)).unwrap();
        let located_seg = &net.segments[loc.segment as usize].id;
        println!("fault {seg_name}@{pos} -> {located_seg}@{} {}", loc.position_m,
            if located_seg == seg_name && (loc.position_m - pos).abs() <= 200.0 { "OK" } else { "MISS" });
    }
}

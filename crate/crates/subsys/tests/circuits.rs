//! Syndrome-extraction circuits and fixability.

mod common;

use std::collections::BTreeMap;

use subsys::circuits::{self, Circuit, FaceSchedule, GateKind};
use subsys::code::{PauliType, SubsystemCode};
use subsys::tessellation;

const WORDS: [&str; 6] = ["ZX", "ZZXX", "Z3X3", "ZX3", "X", "ZZX"];

#[test]
fn circuits_validate() {
    for l in [2, 3] {
        let code = common::toric(l);
        for word in WORDS {
            for parallelised in [true, false] {
                let c = circuits::homogeneous_circuit(&code, word, 2, parallelised).unwrap();
                c.validate().unwrap_or_else(|e| panic!("L={l} {word} {parallelised}: {e}"));
            }
        }
    }
    let code = common::planar(4);
    circuits::homogeneous_circuit(&code, "ZX", 3, true).unwrap().validate().unwrap();
}

#[test]
fn zx_uses_one_ancilla_per_triangle() {
    let code = common::toric(2);
    let c = circuits::homogeneous_circuit(&code, "ZX", 1, true).unwrap();
    assert_eq!(c.n_ancilla, 16);
    assert_eq!(c.period, 4);
    assert_eq!(c.gate_counts().3, 0, "no idles in parallelised ZX");
}

#[test]
fn doubled_words_use_two_ancillas_per_triangle() {
    let code = common::toric(2);
    let c = circuits::homogeneous_circuit(&code, "ZZXX", 2, true).unwrap();
    assert_eq!(c.n_ancilla, 2 * code.gauge_ops.len());
}

#[test]
fn unparallelised_words_idle_instead_of_adding_ancillas() {
    let code = common::toric(3);
    let zx = circuits::homogeneous_circuit(&code, "ZX", 3, true).unwrap();
    let zx3 = circuits::homogeneous_circuit(&code, "ZX3", 3, false).unwrap();
    assert_eq!(zx3.num_qubits(), zx.num_qubits());
    assert!(zx3.gate_counts().3 > 0);
}

#[test]
fn every_measurement_spans_four_steps() {
    let code = common::toric(3);
    for word in WORDS {
        let c = circuits::homogeneous_circuit(&code, word, 2, true).unwrap();
        let mut per_slot: BTreeMap<usize, Vec<(u32, GateKind)>> = BTreeMap::new();
        for g in &c.gates {
            let slot = match g.kind {
                GateKind::MeasX(_) | GateKind::MeasZ(_) => g.slot as usize,
                _ => continue,
            };
            per_slot.entry(slot).or_default().push((g.time, g.kind));
        }
        for m in &c.measurements {
            let a = m.ancilla;
            let prep = c
                .gates
                .iter()
                .filter(|g| matches!(g.kind, GateKind::PrepX(q) | GateKind::PrepZ(q) if q == a) && g.time < m.time)
                .map(|g| g.time)
                .max()
                .unwrap();
            let cnots: Vec<u32> = c
                .gates
                .iter()
                .filter(|g| matches!(g.kind, GateKind::Cnot { control, target } if control == a || target == a))
                .filter(|g| g.time > prep && g.time < m.time)
                .map(|g| g.time)
                .collect();
            assert_eq!(m.time - prep, 4, "{word}");
            assert_eq!(cnots.len(), 3, "{word}");
        }
        assert_eq!(per_slot.len(), c.measurements.len());
    }
}

/// Data-qubit CNOTs keyed by time and owner, which do not depend on
/// ancilla numbering.
fn footprint(c: &Circuit, from: u32, to: u32, shift: i64) -> Vec<(i64, u32, u32, bool)> {
    let mut v: Vec<(i64, u32, u32, bool)> = c
        .gates
        .iter()
        .filter(|g| g.time >= from && g.time < to)
        .filter_map(|g| match g.kind {
            GateKind::Cnot { control, target } => {
                let data_control = (control as usize) < c.n_data;
                let data = if data_control { control } else { target };
                Some((g.time as i64 + shift, g.owner, data, data_control))
            }
            GateKind::Idle(q) => Some((g.time as i64 + shift, u32::MAX, q, false)),
            _ => None,
        })
        .collect();
    v.sort_unstable();
    v
}

#[test]
fn all_l0_matches_unparallelised_zx4() {
    let t = tessellation::build_toric(2).unwrap();
    let code = subsys::code::build_subsystem_code(&t).unwrap();
    let faces = t.num_faces();
    let l0 = circuits::inhomogeneous_circuit(&code, &vec![FaceSchedule::L0; faces], 8).unwrap();
    let zx4 = circuits::homogeneous_circuit(&code, "ZX4", 2, false).unwrap();
    assert_eq!(l0.gate_counts(), zx4.gate_counts());
    assert_eq!(l0.num_qubits(), zx4.num_qubits());
    assert_eq!(footprint(&l0, 12, 28, 4), footprint(&zx4, 16, 32, 0));
}

fn fixed_fraction(code: &SubsystemCode, c: &Circuit) -> f64 {
    let f = circuits::fixable_slots(code, c);
    f.iter().filter(|&&b| b).count() as f64 / f.len() as f64
}

#[test]
fn fixability_of_homogeneous_words() {
    let code = common::toric(3);
    let zx = circuits::homogeneous_circuit(&code, "ZX", 4, true).unwrap();
    assert_eq!(fixed_fraction(&code, &zx), 0.0);
    let z3x3 = circuits::homogeneous_circuit(&code, "Z3X3", 4, true).unwrap();
    assert!((fixed_fraction(&code, &z3x3) - 2.0 / 3.0).abs() < 1e-12);
    let x = circuits::homogeneous_circuit(&code, "X", 4, true).unwrap();
    let fix = circuits::fixable_slots(&code, &x);
    for (s, m) in x.measurements.iter().enumerate() {
        assert_eq!(fix[s], m.rep > 0);
    }
}

#[test]
fn alternating_rows_fix_at_least_half_and_cycle_through_rows() {
    let t = tessellation::build_planar(5).unwrap();
    let code = subsys::code::build_subsystem_code(&t).unwrap();
    let coords = t.face_coords.clone().unwrap();
    let c = circuits::inhomogeneous_circuit(&code, &circuits::alternating_rows(&coords), 9).unwrap();
    let timeline = circuits::fixability_timeline(&code, &c);
    let mut x_round = 0;
    for (ri, round) in c.rounds.iter().enumerate() {
        if round.ptype != PauliType::X {
            continue;
        }
        let entries = &timeline[ri];
        if x_round > 0 {
            let fixed = entries.iter().filter(|e| e.1).count();
            assert!(2 * fixed >= entries.len(), "X round {x_round}: {fixed}/{}", entries.len());
            let mut rows_fixed: BTreeMap<i32, bool> = BTreeMap::new();
            for &(g, f) in entries.iter().filter(|e| code.gauge_ops[e.0].face.is_some()) {
                let row = coords[code.gauge_ops[g].face.unwrap() as usize].1;
                let e = rows_fixed.entry(row).or_insert(true);
                *e &= f;
            }
            let expected = |row: i32| match x_round % 4 {
                0 | 2 => true,
                1 => row % 2 == 0,
                _ => row % 2 == 1,
            };
            for (&row, &f) in &rows_fixed {
                assert_eq!(f, expected(row), "X round {x_round} row {row}");
            }
        }
        x_round += 1;
    }
    assert!(x_round >= 9);
}

#[test]
fn words_parse_and_format() {
    for (w, canon) in [("ZX^3", "ZX3"), ("ZZZXXX", "Z3X3"), ("zzx", "Z2X")] {
        let parsed = circuits::parse_word(w).unwrap();
        assert_eq!(circuits::format_word(&parsed), canon);
    }
    assert!(circuits::parse_word("").is_err());
    assert!(circuits::parse_word("ZQ").is_err());
}

#[test]
fn circuit_dump_lists_every_gate() {
    let code = common::toric(2);
    let c = circuits::homogeneous_circuit(&code, "ZX", 1, true).unwrap();
    let text = c.to_text();
    assert!(text.lines().count() >= c.gates.len());
}

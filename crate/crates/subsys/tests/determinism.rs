//! Noiseless circuits checked on an independent stabiliser tableau: every
//! detector of the gauge-fixing and merged models reads zero.

mod common;

use common::{run_tableau, Pauli, Tableau};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subsys::circuits::{self, Circuit};
use subsys::code::{PauliType, SubsystemCode};
use subsys::decoder::{DetectorModel, VertexMode};
use subsys::tessellation;

fn pauli_of(qubits: &[usize], ptype: PauliType) -> Pauli {
    match ptype {
        PauliType::Z => Pauli::z_on(qubits.iter().copied()),
        PauliType::X => Pauli::x_on(qubits.iter().copied()),
    }
}

/// Prepares the data in a +1 eigenstate of every gauge operator of the
/// first measured type and every stabiliser of the other type.
fn initial_state(code: &SubsystemCode, circuit: &Circuit) -> Tableau {
    let mut t = Tableau::zeros(circuit.num_qubits());
    let first = circuit.rounds[0].ptype;
    let mut plus = || false;
    for g in code.gauge_ops_of(first) {
        t.measure(&pauli_of(&code.gauge_ops[g].qubits, first), &mut plus);
    }
    for s in code.stabilisers_of(first.other()) {
        let qubits: Vec<usize> = code.stabilisers[s].op.part(first.other()).ones().collect();
        t.measure(&pauli_of(&qubits, first.other()), &mut plus);
    }
    t
}

fn fired_detectors(code: &SubsystemCode, circuit: &Circuit, seed: u64) -> Vec<String> {
    let mut fired = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = initial_state(code, circuit);
    let bits = run_tableau(circuit, &mut state, &mut rng);
    for ptype in [PauliType::X, PauliType::Z] {
        let mut finals = vec![false; code.gauge_ops.len()];
        let mut random = || rand::Rng::gen::<bool>(&mut rng);
        for g in code.gauge_ops_of(ptype) {
            finals[g] = state.measure(&pauli_of(&code.gauge_ops[g].qubits, ptype), &mut random).0;
        }
        for mode in [VertexMode::GaugeFixing, VertexMode::Merged] {
            let model = DetectorModel::build(code, circuit, ptype, mode).unwrap();
            for d in &model.detectors {
                let parity = d.slots.iter().filter(|&&s| bits[s]).count() + d.final_ops.iter().filter(|&&g| finals[g]).count();
                if parity % 2 == 1 {
                    fired.push(format!("{mode:?} {ptype:?} detector {} at step {}", d.id, d.time_step));
                }
            }
        }
    }
    fired
}

fn check(code: &SubsystemCode, circuit: &Circuit, label: &str) {
    for seed in 0..3 {
        let fired = fired_detectors(code, circuit, seed);
        assert!(fired.is_empty(), "{label}: {fired:?}");
    }
}

#[test]
fn homogeneous_words_are_deterministic_on_small_tori() {
    for l in [2, 3] {
        let code = common::toric(l);
        for word in ["ZX", "Z2X2", "Z3X3", "ZX3", "X"] {
            for parallelised in [true, false] {
                let circuit = circuits::homogeneous_circuit(&code, word, 2, parallelised).unwrap();
                check(&code, &circuit, &format!("L={l} {word} parallelised={parallelised}"));
            }
        }
    }
}

#[test]
fn alternating_rows_are_deterministic_on_planar_codes() {
    for l in [2, 3] {
        let t = tessellation::build_planar(l).unwrap();
        let code = subsys::code::build_subsystem_code(&t).unwrap();
        let assignment = circuits::alternating_rows(t.face_coords.as_ref().unwrap());
        let circuit = circuits::inhomogeneous_circuit(&code, &assignment, 4).unwrap();
        check(&code, &circuit, &format!("planar L={l} rows"));
    }
}

#[test]
fn planar_words_are_deterministic() {
    let code = common::planar(3);
    for word in ["ZX", "Z2X2", "ZX3"] {
        let circuit = circuits::homogeneous_circuit(&code, word, 2, true).unwrap();
        check(&code, &circuit, &format!("planar {word}"));
    }
}

#[test]
fn tableau_oracle_sanity() {
    let mut t = Tableau::zeros(2);
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut choose = || rand::Rng::gen::<bool>(&mut r);
    t.hadamard(0);
    t.cnot(0, 1);
    let zz = Pauli::z_on([0, 1]);
    let xx = Pauli::x_on([0, 1]);
    assert_eq!(t.measure(&zz, &mut choose), (false, false));
    assert_eq!(t.measure(&xx, &mut choose), (false, false));
    let yy = Pauli { x: 3, z: 3, sign: false };
    assert_eq!(t.measure(&yy, &mut choose), (true, false));
}

#[test]
fn oracle_flags_a_reversed_cnot() {
    let code = common::toric(2);
    let mut circuit = circuits::homogeneous_circuit(&code, "ZX", 2, true).unwrap();
    let g = circuit
        .gates
        .iter()
        .rposition(|g| matches!(g.kind, subsys::circuits::GateKind::Cnot { .. }) && g.time < 6)
        .unwrap();
    if let subsys::circuits::GateKind::Cnot { control, target } = circuit.gates[g].kind {
        circuit.gates[g].kind = subsys::circuits::GateKind::Cnot {
            control: target,
            target: control,
        };
    }
    assert!((0..3).any(|seed| !fired_detectors(&code, &circuit, seed).is_empty()));
}

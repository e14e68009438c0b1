//! Time-stepped syndrome-extraction circuits.
//!
//! Every gauge operator is measured with one bare ancilla: a preparation,
//! three CNOTs and a measurement. The CNOT order inside a face is fixed by
//! the corner label, so one template per label serves every face of every
//! schedulable tessellation. Round `j` of a schedule starts at step `2j`; a
//! round's CNOTs occupy four consecutive steps and each data qubit is touched
//! at two consecutive steps per round, so homogeneous words of any shape are
//! collision free.
//!
//! Unparallelised schedules sit on the alternating `ZX` skeleton. A letter
//! occupies the next skeleton slot of its type and skipped slots become Idle
//! locations on the data qubits they would have touched.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::code::{PauliType, SubsystemCode};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("gauge operator {0} carries no label; the code is not schedulable")]
    NotSchedulable(usize),
    #[error("label {label} is not valid for a {ptype:?}-type gauge operator")]
    UnknownLabel { label: u8, ptype: PauliType },
    #[error("schedule word must be a non-empty string over Z and X: {0:?}")]
    BadWord(String),
    #[error("invalid inhomogeneous assignment: {0}")]
    InvalidAssignment(String),
    #[error("circuit validity violated: {0}")]
    Invalid(String),
}

/// Gate kinds. Qubit indices below `n_data` are data qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Cnot { control: u32, target: u32 },
    PrepZ(u32),
    PrepX(u32),
    MeasZ(u32),
    MeasX(u32),
    Idle(u32),
}

impl GateKind {
    /// Execution order of gate kinds within one time step.
    pub fn phase(&self) -> u8 {
        match self {
            GateKind::MeasZ(_) | GateKind::MeasX(_) => 0,
            GateKind::PrepZ(_) | GateKind::PrepX(_) => 1,
            GateKind::Cnot { .. } => 2,
            GateKind::Idle(_) => 3,
        }
    }

    pub fn qubits(&self) -> ([u32; 2], usize) {
        match *self {
            GateKind::Cnot { control, target } => ([control, target], 2),
            GateKind::PrepZ(q) | GateKind::PrepX(q) | GateKind::MeasZ(q) | GateKind::MeasX(q) | GateKind::Idle(q) => ([q, 0], 1),
        }
    }
}

/// A gate at a time step. `owner` is the gauge operator whose measurement
/// the gate belongs to; `slot` is the measurement slot of a measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub time: u32,
    pub owner: u32,
    pub slot: u32,
}

/// One measurement of one gauge operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeasurementSlot {
    pub gauge_op: usize,
    /// Index of this measurement among all measurements of the gauge op.
    pub rep: usize,
    pub round: usize,
    pub ancilla: u32,
    pub time: u32,
}

/// A schedule round: measurements of same-type gauge operators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    pub ptype: PauliType,
    pub ops: Vec<usize>,
}

/// Per-face choice between the two lagged `ZX⁴` sub-schedules of `ZX`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaceSchedule {
    L0,
    L1,
}

/// Description of the schedule a circuit realises.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScheduleDescriptor {
    Homogeneous { word: String, parallelised: bool },
    Inhomogeneous { assignment: Vec<FaceSchedule> },
}

/// A syndrome-extraction circuit.
#[derive(Clone, Debug)]
pub struct Circuit {
    /// Gates sorted by time, then by [`GateKind::phase`].
    pub gates: Vec<Gate>,
    pub n_data: usize,
    pub n_ancilla: usize,
    pub num_steps: u32,
    /// Measurement slots in circuit order.
    pub measurements: Vec<MeasurementSlot>,
    pub measurement_index: HashMap<(usize, usize), usize>,
    pub rounds: Vec<Round>,
    pub descriptor: ScheduleDescriptor,
    /// Time steps per repetition of the schedule word.
    pub period: u32,
    pub num_gauge_ops: usize,
}

/// Parses a schedule word such as `"ZZXX"`, `"Z3X3"` or `"ZX^3"`.
pub fn parse_word(word: &str) -> Result<Vec<PauliType>, CircuitError> {
    let bad = || CircuitError::BadWord(word.to_string());
    let mut out = Vec::new();
    let chars: Vec<char> = word.chars().filter(|c| !c.is_whitespace() && *c != '^').collect();
    let mut i = 0;
    while i < chars.len() {
        let p = match chars[i].to_ascii_uppercase() {
            'Z' => PauliType::Z,
            'X' => PauliType::X,
            _ => return Err(bad()),
        };
        i += 1;
        let start = i;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        let count = if i > start {
            chars[start..i].iter().collect::<String>().parse::<usize>().map_err(|_| bad())?
        } else {
            1
        };
        if count == 0 {
            return Err(bad());
        }
        out.extend(std::iter::repeat_n(p, count));
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// Formats a word compactly, e.g. `Z3X3`.
pub fn format_word(word: &[PauliType]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < word.len() {
        let mut j = i;
        while j < word.len() && word[j] == word[i] {
            j += 1;
        }
        out.push(if word[i] == PauliType::Z { 'Z' } else { 'X' });
        if j - i > 1 {
            write!(out, "{}", j - i).unwrap();
        }
        i = j;
    }
    out
}

#[derive(Clone, Copy)]
enum Role {
    Vertex,
    Fwd,
    Back,
}

/// Offsets relative to the round start: preparation, the three CNOTs in
/// order, measurement.
type Template = (i64, [(Role, i64); 3], i64);

fn template(ptype: PauliType, label: u8) -> Result<Template, CircuitError> {
    use Role::*;
    Ok(match (ptype, label) {
        (PauliType::Z, 0) => (0, [(Vertex, 1), (Fwd, 2), (Back, 3)], 4),
        (PauliType::Z, 2) => (-1, [(Vertex, 0), (Fwd, 1), (Back, 2)], 3),
        (PauliType::X, 3) => (-1, [(Vertex, 0), (Back, 1), (Fwd, 2)], 3),
        (PauliType::X, 1) => (0, [(Vertex, 1), (Back, 2), (Fwd, 3)], 4),
        _ => return Err(CircuitError::UnknownLabel { label, ptype }),
    })
}

/// CNOT data-qubit times of one gauge op's measurement in a round starting
/// at `start`, including preparation and measurement times.
struct Placement {
    prep: i64,
    cnots: Vec<(usize, i64)>,
    meas: i64,
}

fn placement(code: &SubsystemCode, g: usize, start: i64) -> Result<Placement, CircuitError> {
    let op = &code.gauge_ops[g];
    let label = op.label.ok_or(CircuitError::NotSchedulable(g))?;
    let (prep, roles, meas) = template(op.ptype, label)?;
    // Triangle qubits are stored as [vertex, fwd, back]; boundary checks as
    // [vertex, fwd].
    let mut cnots = Vec::new();
    for (role, off) in roles {
        let idx = match role {
            Role::Vertex => 0,
            Role::Fwd => 1,
            Role::Back => 2,
        };
        if let Some(&q) = op.qubits.get(idx) {
            cnots.push((q, start + off));
        }
    }
    Ok(Placement {
        prep: start + prep,
        cnots,
        meas: start + meas,
    })
}

/// One scheduled round: type, skeleton start position, measured ops and the
/// ops whose CNOT locations become idles.
struct PlannedRound {
    ptype: PauliType,
    start: i64,
    ops: Vec<usize>,
    idle_ops: Vec<usize>,
}

/// Builds a homogeneous circuit realising `word` repeated `reps` times.
pub fn homogeneous_circuit(code: &SubsystemCode, word: &str, reps: usize, parallelised: bool) -> Result<Circuit, CircuitError> {
    let letters = parse_word(word)?;
    let z_ops = code.gauge_ops_of(PauliType::Z);
    let x_ops = code.gauge_ops_of(PauliType::X);
    let ops_of = |p: PauliType| if p == PauliType::Z { z_ops.clone() } else { x_ops.clone() };
    let mut plan = Vec::new();
    let period;
    if parallelised {
        for j in 0..reps * letters.len() {
            let p = letters[j % letters.len()];
            plan.push(PlannedRound {
                ptype: p,
                start: 2 * j as i64,
                ops: ops_of(p),
                idle_ops: Vec::new(),
            });
        }
        period = 2 * letters.len() as u32;
    } else {
        // Skeleton slot 2i is Z, 2i+1 is X.
        let mut next_slot = 0usize;
        let mut used = Vec::new();
        for _ in 0..reps {
            for &p in &letters {
                let parity = if p == PauliType::Z { 0 } else { 1 };
                let slot = if next_slot % 2 == parity { next_slot } else { next_slot + 1 };
                used.push((slot, p));
                next_slot = slot + 1;
            }
        }
        let mut at = vec![None; next_slot];
        for &(slot, p) in &used {
            at[slot] = Some(p);
        }
        for (slot, entry) in at.iter().enumerate() {
            let p = if slot % 2 == 0 { PauliType::Z } else { PauliType::X };
            let start = 2 * slot as i64;
            match entry {
                Some(_) => plan.push(PlannedRound {
                    ptype: p,
                    start,
                    ops: ops_of(p),
                    idle_ops: Vec::new(),
                }),
                None => plan.push(PlannedRound {
                    ptype: p,
                    start,
                    ops: Vec::new(),
                    idle_ops: ops_of(p),
                }),
            }
        }
        period = (2 * next_slot / reps.max(1)) as u32;
    }
    let descriptor = ScheduleDescriptor::Homogeneous {
        word: format_word(&letters),
        parallelised,
    };
    assemble(code, plan, descriptor, period, !parallelised)
}

/// Builds the inhomogeneous circuit in which each face follows `L0` or `L1`
/// for `periods` periods of the `ZX` skeleton. Boundary checks are measured
/// in every round of their type.
pub fn inhomogeneous_circuit(code: &SubsystemCode, assignment: &[FaceSchedule], periods: usize) -> Result<Circuit, CircuitError> {
    let max_face = code.gauge_ops.iter().filter_map(|g| g.face).max().map_or(0, |f| f as usize + 1);
    if assignment.len() != max_face {
        return Err(CircuitError::InvalidAssignment(format!(
            "expected {max_face} face entries, got {}",
            assignment.len()
        )));
    }
    let measured = |g: usize, p: usize| -> bool {
        let op = &code.gauge_ops[g];
        match (op.ptype, op.face) {
            (PauliType::X, _) | (PauliType::Z, None) => true,
            (PauliType::Z, Some(f)) => match assignment[f as usize] {
                FaceSchedule::L0 => p % 4 == 3,
                FaceSchedule::L1 => p % 4 == 1,
            },
        }
    };
    let mut plan = Vec::new();
    for p in 0..periods {
        for (k, ptype) in [PauliType::Z, PauliType::X].into_iter().enumerate() {
            let all = code.gauge_ops_of(ptype);
            let (ops, idle_ops): (Vec<usize>, Vec<usize>) = all.into_iter().partition(|&g| measured(g, p));
            plan.push(PlannedRound {
                ptype,
                start: 2 * (2 * p + k) as i64,
                ops,
                idle_ops,
            });
        }
    }
    let descriptor = ScheduleDescriptor::Inhomogeneous {
        assignment: assignment.to_vec(),
    };
    assemble(code, plan, descriptor, 4, true)
}

/// Assigns every face of a planar or toric code to `L(row mod 2)`.
pub fn alternating_rows(face_coords: &[(i32, i32)]) -> Vec<FaceSchedule> {
    face_coords
        .iter()
        .map(|&(_, row)| if row.rem_euclid(2) == 0 { FaceSchedule::L0 } else { FaceSchedule::L1 })
        .collect()
}

fn assemble(code: &SubsystemCode, plan: Vec<PlannedRound>, descriptor: ScheduleDescriptor, period: u32, single_ancilla: bool) -> Result<Circuit, CircuitError> {
    let n = code.n;
    let shift = 1i64;
    let mut raw: Vec<(i64, GateKind, u32)> = Vec::new();
    // Ancilla pools per gauge op: (ancilla id, time its last measurement
    // completes).
    let mut pools: Vec<Vec<(u32, i64)>> = vec![Vec::new(); code.gauge_ops.len()];
    let mut n_ancilla = 0u32;
    let mut rounds = Vec::new();
    let mut pending_meas: Vec<(i64, u32, usize, usize)> = Vec::new();
    for pr in &plan {
        for &g in &pr.idle_ops {
            let pl = placement(code, g, pr.start)?;
            for (q, t) in pl.cnots {
                raw.push((t + shift, GateKind::Idle(q as u32), g as u32));
            }
        }
        if pr.ops.is_empty() {
            continue;
        }
        let round_index = rounds.len();
        for &g in &pr.ops {
            let pl = placement(code, g, pr.start)?;
            let pool = &mut pools[g];
            let anc = match pool.iter_mut().find(|(_, free)| *free <= pl.prep) {
                Some(entry) => {
                    entry.1 = pl.meas;
                    entry.0
                }
                None => {
                    if single_ancilla && !pool.is_empty() {
                        return Err(CircuitError::Invalid(format!("gauge op {g} needs a second ancilla")));
                    }
                    let id = n as u32 + n_ancilla;
                    n_ancilla += 1;
                    pool.push((id, pl.meas));
                    id
                }
            };
            let ptype = code.gauge_ops[g].ptype;
            raw.push((
                pl.prep + shift,
                if ptype == PauliType::Z { GateKind::PrepZ(anc) } else { GateKind::PrepX(anc) },
                g as u32,
            ));
            for (q, t) in pl.cnots {
                let kind = if ptype == PauliType::Z {
                    GateKind::Cnot {
                        control: q as u32,
                        target: anc,
                    }
                } else {
                    GateKind::Cnot {
                        control: anc,
                        target: q as u32,
                    }
                };
                raw.push((t + shift, kind, g as u32));
            }
            raw.push((
                pl.meas + shift,
                if ptype == PauliType::Z { GateKind::MeasZ(anc) } else { GateKind::MeasX(anc) },
                g as u32,
            ));
            pending_meas.push((pl.meas + shift, anc, g, round_index));
        }
        rounds.push(Round {
            ptype: pr.ptype,
            ops: pr.ops.clone(),
        });
    }
    if raw.iter().any(|r| r.0 < 0) {
        return Err(CircuitError::Invalid("negative time step".into()));
    }
    raw.sort_by_key(|&(t, kind, owner)| (t, kind.phase(), owner, kind.qubits().0));
    pending_meas.sort_by_key(|&(t, anc, _, _)| (t, anc));
    let mut measurements = Vec::with_capacity(pending_meas.len());
    let mut measurement_index = HashMap::new();
    let mut rep_count = vec![0usize; code.gauge_ops.len()];
    let mut slot_of: HashMap<(i64, u32), u32> = HashMap::new();
    for &(t, anc, g, round) in &pending_meas {
        let rep = rep_count[g];
        rep_count[g] += 1;
        let slot = measurements.len();
        measurement_index.insert((g, rep), slot);
        slot_of.insert((t, anc), slot as u32);
        measurements.push(MeasurementSlot {
            gauge_op: g,
            rep,
            round,
            ancilla: anc,
            time: t as u32,
        });
    }
    let gates: Vec<Gate> = raw
        .into_iter()
        .map(|(t, kind, owner)| {
            let slot = match kind {
                GateKind::MeasZ(a) | GateKind::MeasX(a) => slot_of[&(t, a)],
                _ => u32::MAX,
            };
            Gate {
                kind,
                time: t as u32,
                owner,
                slot,
            }
        })
        .collect();
    let num_steps = gates.last().map_or(0, |g| g.time + 1);
    let circuit = Circuit {
        gates,
        n_data: n,
        n_ancilla: n_ancilla as usize,
        num_steps,
        measurements,
        measurement_index,
        rounds,
        descriptor,
        period,
        num_gauge_ops: code.gauge_ops.len(),
    };
    circuit.validate()?;
    Ok(circuit)
}

impl Circuit {
    pub fn num_qubits(&self) -> usize {
        self.n_data + self.n_ancilla
    }

    /// Checks that no qubit is used twice in one time step (a measurement
    /// followed by a preparation of the same ancilla is allowed) and that
    /// every measurement follows a matching preparation.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let mut last_use: HashMap<u32, (u32, u8)> = HashMap::new();
        let mut prepared: HashMap<u32, Option<bool>> = HashMap::new();
        for g in &self.gates {
            let (qs, k) = g.kind.qubits();
            for &q in &qs[..k] {
                if let Some(&(t, phase)) = last_use.get(&q) {
                    let meas_then_prep = phase == 0 && g.kind.phase() == 1;
                    if t == g.time && !meas_then_prep {
                        return Err(CircuitError::Invalid(format!("qubit {q} used twice at step {t}")));
                    }
                }
                last_use.insert(q, (g.time, g.kind.phase()));
            }
            match g.kind {
                GateKind::PrepZ(a) => {
                    prepared.insert(a, Some(false));
                }
                GateKind::PrepX(a) => {
                    prepared.insert(a, Some(true));
                }
                GateKind::MeasZ(a) | GateKind::MeasX(a) => {
                    let want = matches!(g.kind, GateKind::MeasX(_));
                    if prepared.get(&a).copied().flatten() != Some(want) {
                        return Err(CircuitError::Invalid(format!("measurement of ancilla {a} without preparation")));
                    }
                    prepared.insert(a, None);
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Number of gates of each kind: (cnot, prep, meas, idle).
    pub fn gate_counts(&self) -> (usize, usize, usize, usize) {
        let mut c = (0, 0, 0, 0);
        for g in &self.gates {
            match g.kind {
                GateKind::Cnot { .. } => c.0 += 1,
                GateKind::PrepZ(_) | GateKind::PrepX(_) => c.1 += 1,
                GateKind::MeasZ(_) | GateKind::MeasX(_) => c.2 += 1,
                GateKind::Idle(_) => c.3 += 1,
            }
        }
        c
    }

    /// Text dump, one gate per line with its time step.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "data {}\nancilla {}\nsteps {}", self.n_data, self.n_ancilla, self.num_steps).unwrap();
        for g in &self.gates {
            match g.kind {
                GateKind::Cnot { control, target } => writeln!(out, "{} CNOT {control} {target}", g.time),
                GateKind::PrepZ(q) => writeln!(out, "{} PREPZ {q}", g.time),
                GateKind::PrepX(q) => writeln!(out, "{} PREPX {q}", g.time),
                GateKind::MeasZ(q) => writeln!(out, "{} MEASZ {q} slot {}", g.time, g.slot),
                GateKind::MeasX(q) => writeln!(out, "{} MEASX {q} slot {}", g.time, g.slot),
                GateKind::Idle(q) => writeln!(out, "{} IDLE {q}", g.time),
            }
            .unwrap();
        }
        out
    }
}

/// For each gauge op, the gauge ops it anti-commutes with.
pub fn anticommuting_ops(code: &SubsystemCode) -> Vec<Vec<usize>> {
    let mut by_qubit = vec![Vec::new(); code.n];
    for (i, g) in code.gauge_ops.iter().enumerate() {
        for &q in &g.qubits {
            by_qubit[q].push(i);
        }
    }
    (0..code.gauge_ops.len())
        .map(|a| {
            let mut v: Vec<usize> = code.gauge_ops[a]
                .qubits
                .iter()
                .flat_map(|&q| by_qubit[q].iter().copied())
                .filter(|&b| !code.gauge_ops[a].op.commutes(&code.gauge_ops[b].op))
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect()
}

/// Whether each measurement slot is fixable: a previous measurement of the
/// same gauge op exists and no anti-commuting gauge op was measured since.
pub fn fixable_slots(code: &SubsystemCode, circuit: &Circuit) -> Vec<bool> {
    let anti = anticommuting_ops(code);
    let mut last_round: Vec<Option<usize>> = vec![None; code.gauge_ops.len()];
    let mut fixable_by_round: Vec<HashMap<usize, bool>> = Vec::with_capacity(circuit.rounds.len());
    for (ri, round) in circuit.rounds.iter().enumerate() {
        let mut m = HashMap::new();
        for &g in &round.ops {
            let fix = match last_round[g] {
                None => false,
                Some(lg) => anti[g].iter().all(|&h| last_round[h].is_none_or(|lh| lh < lg)),
            };
            m.insert(g, fix);
        }
        for &g in &round.ops {
            last_round[g] = Some(ri);
        }
        fixable_by_round.push(m);
    }
    circuit.measurements.iter().map(|s| fixable_by_round[s.round][&s.gauge_op]).collect()
}

/// Per round, each measured gauge op with its fixability.
pub fn fixability_timeline(code: &SubsystemCode, circuit: &Circuit) -> Vec<Vec<(usize, bool)>> {
    let fix = fixable_slots(code, circuit);
    let mut out: Vec<Vec<(usize, bool)>> = vec![Vec::new(); circuit.rounds.len()];
    for (slot, m) in circuit.measurements.iter().enumerate() {
        out[m.round].push((m.gauge_op, fix[slot]));
    }
    for r in &mut out {
        r.sort_unstable();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_parsing() {
        assert_eq!(format_word(&parse_word("ZZZXXX").unwrap()), "Z3X3");
        assert_eq!(parse_word("ZX^3").unwrap().len(), 4);
        assert!(parse_word("").is_err());
        assert!(parse_word("ZY").is_err());
    }
}

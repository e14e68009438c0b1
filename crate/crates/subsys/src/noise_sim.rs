//! Circuit-level Pauli noise, Pauli-frame propagation and the detector
//! error model (DEM) produced by exhaustive single-fault enumeration.
//!
//! Faults act just after their gate. A measurement fault flips the recorded
//! outcome. A preparation fault is an X error after `PrepZ` and a Z error
//! after `PrepX`. Idle noise applies only at explicit idle gates.
//!
//! The enumerator runs one backward pass over the circuit that tracks, for
//! every qubit, which detectors and observables an X or a Z error at the
//! current point would flip. Each noisy location then yields the effect of
//! every Pauli it can emit, without propagating faults one at a time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::circuits::{Circuit, GateKind};
use crate::code::{PauliType, SubsystemCode};
use crate::decoder::DetectorModel;
use crate::gf2::BitVec;

/// Circuit-level noise model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    /// Two-qubit depolarising CNOTs, flips with probability `2p/3` on
    /// preparation and measurement, single-qubit depolarising idles.
    Depolarising { p: f64 },
    /// Independent X and Z noise with bias `eta = p_Z / p_X`. `eta` may be
    /// infinite.
    Independent { p0: f64, eta: f64 },
}

/// Single-qubit Pauli as bits: 1 = X, 2 = Z, 3 = Y.
pub type PauliBits = u8;
pub const PX: PauliBits = 1;
pub const PZ: PauliBits = 2;
pub const PY: PauliBits = 3;

/// A Pauli emitted by a fault location.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultPauli {
    Two {
        control: PauliBits,
        target: PauliBits,
    },
    Single(PauliBits),
    /// Flip of a measurement outcome.
    Flip,
}

/// Noisy circuit element kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocationKind {
    /// CNOT belonging to the measurement of a gauge op of the given type.
    Cnot(PauliType),
    Prep(PauliType),
    Meas(PauliType),
    Idle,
    /// Data error in a code-capacity or phenomenological model.
    Data,
    /// Measurement error in a phenomenological model.
    Syndrome,
}

impl NoiseModel {
    /// Probability of an X-type error component under the independent model.
    pub fn p_x(&self) -> f64 {
        match *self {
            NoiseModel::Depolarising { p } => 2.0 * p / 3.0,
            NoiseModel::Independent { p0, eta } => {
                if eta.is_infinite() {
                    0.0
                } else {
                    p0 / (eta + 1.0)
                }
            }
        }
    }

    /// Probability of a Z-type error component under the independent model.
    pub fn p_z(&self) -> f64 {
        match *self {
            NoiseModel::Depolarising { p } => 2.0 * p / 3.0,
            NoiseModel::Independent { p0, eta } => {
                if eta.is_infinite() {
                    p0
                } else {
                    p0 * eta / (eta + 1.0)
                }
            }
        }
    }

    /// Total single-qubit error probability `1 − (1 − p_X)(1 − p_Z)`.
    pub fn p_total(&self) -> f64 {
        match *self {
            NoiseModel::Depolarising { p } => p,
            NoiseModel::Independent { .. } => 1.0 - (1.0 - self.p_x()) * (1.0 - self.p_z()),
        }
    }

    /// The Paulis a location can emit with their probabilities.
    pub fn outcomes(&self, kind: LocationKind) -> Vec<(FaultPauli, f64)> {
        match *self {
            NoiseModel::Depolarising { p } => match kind {
                LocationKind::Cnot(_) => {
                    let mut v = Vec::with_capacity(15);
                    for c in 0..4u8 {
                        for t in 0..4u8 {
                            if c | t != 0 {
                                v.push((FaultPauli::Two { control: c, target: t }, p / 15.0));
                            }
                        }
                    }
                    v
                }
                LocationKind::Prep(_) | LocationKind::Meas(_) | LocationKind::Syndrome => {
                    vec![(flip_or_prep(kind), 2.0 * p / 3.0)]
                }
                LocationKind::Idle => [PX, PY, PZ].iter().map(|&b| (FaultPauli::Single(b), p / 3.0)).collect(),
                LocationKind::Data => vec![(FaultPauli::Single(PZ), p)],
            },
            NoiseModel::Independent { .. } => {
                let (px, pz) = (self.p_x(), self.p_z());
                match kind {
                    LocationKind::Cnot(_) => {
                        let zpat = [(0u8, 0u8, 1.0 - pz), (0, PZ, pz / 3.0), (PZ, 0, pz / 3.0), (PZ, PZ, pz / 3.0)];
                        let xpat = [(0u8, 0u8, 1.0 - px), (0, PX, px / 3.0), (PX, 0, px / 3.0), (PX, PX, px / 3.0)];
                        let mut v = Vec::with_capacity(15);
                        for &(zc, zt, a) in &zpat {
                            for &(xc, xt, b) in &xpat {
                                let (c, t) = (zc | xc, zt | xt);
                                if c | t != 0 && a * b > 0.0 {
                                    v.push((FaultPauli::Two { control: c, target: t }, a * b));
                                }
                            }
                        }
                        v
                    }
                    LocationKind::Prep(t) | LocationKind::Meas(t) => {
                        // A Z-basis element is flipped by X errors and vice versa.
                        let q = if t == PauliType::Z { px } else { pz };
                        if q > 0.0 {
                            vec![(flip_or_prep(kind), q)]
                        } else {
                            Vec::new()
                        }
                    }
                    LocationKind::Syndrome => vec![(FaultPauli::Flip, pz)],
                    LocationKind::Idle => [(PX, px * (1.0 - pz)), (PZ, pz * (1.0 - px)), (PY, px * pz)]
                        .into_iter()
                        .filter(|e| e.1 > 0.0)
                        .map(|(b, q)| (FaultPauli::Single(b), q))
                        .collect(),
                    LocationKind::Data => vec![(FaultPauli::Single(PZ), pz)],
                }
            }
        }
    }
}

fn flip_or_prep(kind: LocationKind) -> FaultPauli {
    match kind {
        LocationKind::Prep(PauliType::Z) => FaultPauli::Single(PX),
        LocationKind::Prep(PauliType::X) => FaultPauli::Single(PZ),
        _ => FaultPauli::Flip,
    }
}

/// Location kind of a circuit gate.
pub fn location_kind(circuit: &Circuit, gate: usize, code: &SubsystemCode) -> LocationKind {
    let g = &circuit.gates[gate];
    match g.kind {
        GateKind::Cnot { .. } => LocationKind::Cnot(code.gauge_ops[g.owner as usize].ptype),
        GateKind::PrepZ(_) => LocationKind::Prep(PauliType::Z),
        GateKind::PrepX(_) => LocationKind::Prep(PauliType::X),
        GateKind::MeasZ(_) => LocationKind::Meas(PauliType::Z),
        GateKind::MeasX(_) => LocationKind::Meas(PauliType::X),
        GateKind::Idle(_) => LocationKind::Idle,
    }
}

/// Index of the matching graph whose detectors have the given type. The
/// X-type graph (index 0) sees Z errors.
pub fn graph_index(detector_type: PauliType) -> usize {
    match detector_type {
        PauliType::X => 0,
        PauliType::Z => 1,
    }
}

const OBS_FLAG: u32 = 1 << 31;
const GRAPH_FLAG: u32 = 1 << 30;
const ID_MASK: u32 = GRAPH_FLAG - 1;

/// An effect item: a detector or observable of one of the two graphs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Item {
    Detector { graph: usize, id: u32 },
    Observable { graph: usize, id: u32 },
}

fn encode(item: Item) -> u32 {
    match item {
        Item::Detector { graph, id } => id | if graph == 1 { GRAPH_FLAG } else { 0 },
        Item::Observable { graph, id } => id | OBS_FLAG | if graph == 1 { GRAPH_FLAG } else { 0 },
    }
}

fn decode_item(v: u32) -> Item {
    let graph = usize::from(v & GRAPH_FLAG != 0);
    let id = v & ID_MASK;
    if v & OBS_FLAG != 0 {
        Item::Observable { graph, id }
    } else {
        Item::Detector { graph, id }
    }
}

type Sens = SmallVec<[u32; 8]>;

fn xor_into(acc: &mut Sens, other: &[u32]) {
    if other.is_empty() {
        return;
    }
    let mut out = Sens::with_capacity(acc.len() + other.len());
    let (mut i, mut j) = (0, 0);
    while i < acc.len() && j < other.len() {
        match acc[i].cmp(&other[j]) {
            std::cmp::Ordering::Less => {
                out.push(acc[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(other[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&acc[i..]);
    out.extend_from_slice(&other[j..]);
    *acc = out;
}

/// Effects split by graph: detector ids and observable ids per graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Effect {
    pub detectors: [Vec<u32>; 2],
    pub observables: [Vec<u32>; 2],
}

/// A group of locations sharing one outcome distribution.
#[derive(Clone, Debug)]
pub struct FaultClass {
    pub kind: LocationKind,
    pub paulis: Vec<FaultPauli>,
    pub probs: Vec<f64>,
    pub total: f64,
}

/// Detector error model: every noisy location with the effect of each
/// Pauli it can emit.
#[derive(Clone, Debug)]
pub struct Dem {
    pub num_detectors: [usize; 2],
    pub num_observables: usize,
    pub classes: Vec<FaultClass>,
    /// Class of each location.
    pub location_class: Vec<u32>,
    /// Circuit gate of each location (`u32::MAX` for non-circuit models).
    pub location_gate: Vec<u32>,
    /// Qubits touched by each location (`u32::MAX` when not applicable).
    pub location_qubits: Vec<[u32; 2]>,
    /// Start of each location's effects in `effect_offsets`.
    location_effects: Vec<u32>,
    effect_offsets: Vec<u32>,
    items: Vec<u32>,
}

/// One enumerated single fault.
#[derive(Clone, Debug)]
pub struct SingleFault {
    pub location: usize,
    pub gate: Option<usize>,
    pub kind: LocationKind,
    pub pauli: FaultPauli,
    pub probability: f64,
    pub effect: Effect,
}

/// Builder for detector error models of arbitrary structure.
#[derive(Clone, Debug)]
pub struct DemBuilder {
    dem: Dem,
    class_index: Vec<(LocationKind, Vec<(FaultPauli, u64)>)>,
}

impl DemBuilder {
    pub fn new(num_detectors: [usize; 2], num_observables: usize) -> Self {
        Self {
            dem: Dem {
                num_detectors,
                num_observables,
                classes: Vec::new(),
                location_class: Vec::new(),
                location_gate: Vec::new(),
                location_qubits: Vec::new(),
                location_effects: Vec::new(),
                effect_offsets: vec![0],
                items: Vec::new(),
            },
            class_index: Vec::new(),
        }
    }

    fn class_for(&mut self, kind: LocationKind, outcomes: &[(FaultPauli, f64)]) -> u32 {
        let key: Vec<(FaultPauli, u64)> = outcomes.iter().map(|&(p, q)| (p, q.to_bits())).collect();
        if let Some(i) = self.class_index.iter().position(|(k, v)| *k == kind && *v == key) {
            return i as u32;
        }
        self.class_index.push((kind, key));
        self.dem.classes.push(FaultClass {
            kind,
            paulis: outcomes.iter().map(|o| o.0).collect(),
            probs: outcomes.iter().map(|o| o.1).collect(),
            total: outcomes.iter().map(|o| o.1).sum(),
        });
        (self.dem.classes.len() - 1) as u32
    }

    /// Adds a location. `effects[i]` is the sorted encoded effect of
    /// `outcomes[i]`.
    fn push_encoded(&mut self, kind: LocationKind, gate: Option<usize>, qubits: [u32; 2], outcomes: &[(FaultPauli, f64)], effects: &[Sens]) {
        if outcomes.is_empty() {
            return;
        }
        let class = self.class_for(kind, outcomes);
        self.dem.location_class.push(class);
        self.dem.location_gate.push(gate.map_or(u32::MAX, |g| g as u32));
        self.dem.location_qubits.push(qubits);
        self.dem.location_effects.push((self.dem.effect_offsets.len() - 1) as u32);
        for e in effects {
            self.dem.items.extend_from_slice(e);
            self.dem.effect_offsets.push(self.dem.items.len() as u32);
        }
    }

    /// Adds a location whose outcomes have the given effects.
    pub fn push_location(&mut self, kind: LocationKind, outcomes: &[(FaultPauli, f64)], effects: &[Effect]) {
        let encoded: Vec<Sens> = effects
            .iter()
            .map(|e| {
                let mut s: Sens = SmallVec::new();
                for g in 0..2 {
                    for &d in &e.detectors[g] {
                        xor_into(&mut s, &[encode(Item::Detector { graph: g, id: d })]);
                    }
                    for &o in &e.observables[g] {
                        xor_into(&mut s, &[encode(Item::Observable { graph: g, id: o })]);
                    }
                }
                s
            })
            .collect();
        self.push_encoded(kind, None, [u32::MAX; 2], outcomes, &encoded);
    }

    pub fn finish(self) -> Dem {
        self.dem
    }
}

impl Dem {
    pub fn num_locations(&self) -> usize {
        self.location_class.len()
    }

    fn effect_range(&self, location: usize, outcome: usize) -> std::ops::Range<usize> {
        let e = self.location_effects[location] as usize + outcome;
        self.effect_offsets[e] as usize..self.effect_offsets[e + 1] as usize
    }

    /// Effect of outcome `outcome` at `location`.
    pub fn effect(&self, location: usize, outcome: usize) -> Effect {
        let mut eff = Effect::default();
        for &v in &self.items[self.effect_range(location, outcome)] {
            match decode_item(v) {
                Item::Detector { graph, id } => eff.detectors[graph].push(id),
                Item::Observable { graph, id } => eff.observables[graph].push(id),
            }
        }
        eff
    }

    /// All single faults in location order.
    pub fn faults(&self) -> Vec<SingleFault> {
        let mut out = Vec::new();
        for loc in 0..self.num_locations() {
            let class = &self.classes[self.location_class[loc] as usize];
            for (i, (&pauli, &probability)) in class.paulis.iter().zip(&class.probs).enumerate() {
                let g = self.location_gate[loc];
                out.push(SingleFault {
                    location: loc,
                    gate: (g != u32::MAX).then_some(g as usize),
                    kind: class.kind,
                    pauli,
                    probability,
                    effect: self.effect(loc, i),
                });
            }
        }
        out
    }

    /// Structured text dump: one line per fault.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        writeln!(
            s,
            "detectors_x {}\ndetectors_z {}\nobservables {}",
            self.num_detectors[0], self.num_detectors[1], self.num_observables
        )
        .unwrap();
        for f in self.faults() {
            let gate = f.gate.map_or("-".to_string(), |g| g.to_string());
            writeln!(
                s,
                "fault loc {} gate {} kind {:?} pauli {:?} p {:.6e} dx {:?} dz {:?} ox {:?} oz {:?}",
                f.location,
                gate,
                f.kind,
                f.pauli,
                f.probability,
                f.effect.detectors[0],
                f.effect.detectors[1],
                f.effect.observables[0],
                f.effect.observables[1]
            )
            .unwrap();
        }
        s
    }
}

/// Builds the detector error model of a circuit under a noise model, with
/// detectors from the X-type and Z-type detector models.
pub fn build_circuit_dem(code: &SubsystemCode, circuit: &Circuit, noise: &NoiseModel, models: [&DetectorModel; 2]) -> Dem {
    let nq = circuit.num_qubits();
    // sx[q]: items flipped by an X error on q (Z-type graph); sz[q]: by Z.
    let mut sx: Vec<Sens> = vec![SmallVec::new(); nq];
    let mut sz: Vec<Sens> = vec![SmallVec::new(); nq];
    let zg = graph_index(PauliType::Z);
    let xg = graph_index(PauliType::X);
    for (g, op) in code.gauge_ops.iter().enumerate() {
        let (gi, sets) = if op.ptype == PauliType::Z { (zg, &mut sx) } else { (xg, &mut sz) };
        let dets: Sens = models[gi].final_detectors[g]
            .iter()
            .map(|&d| encode(Item::Detector { graph: gi, id: d }))
            .collect();
        let mut dets = dets;
        dets.sort_unstable();
        for &q in &op.qubits {
            xor_into(&mut sets[q], &dets);
        }
    }
    for (i, l) in code.bare_logicals_z.iter().enumerate() {
        let it = [encode(Item::Observable { graph: zg, id: i as u32 })];
        for q in l.z.ones() {
            xor_into(&mut sx[q], &it);
        }
    }
    for (i, l) in code.bare_logicals_x.iter().enumerate() {
        let it = [encode(Item::Observable { graph: xg, id: i as u32 })];
        for q in l.x.ones() {
            xor_into(&mut sz[q], &it);
        }
    }
    let slot_items = |slot: usize, gi: usize| -> Sens {
        let mut s: Sens = models[gi].slot_detectors[slot]
            .iter()
            .map(|&d| encode(Item::Detector { graph: gi, id: d }))
            .collect();
        s.sort_unstable();
        s
    };
    let mut builder = DemBuilder::new([models[0].detectors.len(), models[1].detectors.len()], code.k);
    let mut cache: Vec<(LocationKind, Vec<(FaultPauli, f64)>)> = Vec::new();
    let mut pending: Vec<(LocationKind, usize, [u32; 2], Vec<Sens>)> = Vec::new();
    for gi in (0..circuit.gates.len()).rev() {
        let gate = circuit.gates[gi];
        let kind = location_kind(circuit, gi, code);
        let outcomes = match cache.iter().find(|c| c.0 == kind) {
            Some(c) => c.1.clone(),
            None => {
                let o = noise.outcomes(kind);
                cache.push((kind, o.clone()));
                o
            }
        };
        let single = |q: usize, b: PauliBits, sx: &[Sens], sz: &[Sens]| -> Sens {
            let mut s = Sens::new();
            if b & PX != 0 {
                xor_into(&mut s, &sx[q]);
            }
            if b & PZ != 0 {
                xor_into(&mut s, &sz[q]);
            }
            s
        };
        let effects: Vec<Sens> = outcomes
            .iter()
            .map(|&(pauli, _)| match (gate.kind, pauli) {
                (GateKind::Cnot { control, target }, FaultPauli::Two { control: pc, target: pt }) => {
                    let mut s = single(control as usize, pc, &sx, &sz);
                    xor_into(&mut s, &single(target as usize, pt, &sx, &sz));
                    s
                }
                (GateKind::MeasZ(_), FaultPauli::Flip) => slot_items(gate.slot as usize, zg),
                (GateKind::MeasX(_), FaultPauli::Flip) => slot_items(gate.slot as usize, xg),
                (GateKind::PrepZ(q) | GateKind::PrepX(q) | GateKind::Idle(q), FaultPauli::Single(b)) => single(q as usize, b, &sx, &sz),
                _ => unreachable!("fault {pauli:?} does not fit gate {:?}", gate.kind),
            })
            .collect();
        let (qs, k) = gate.kind.qubits();
        let qubits = if k == 2 { qs } else { [qs[0], u32::MAX] };
        pending.push((kind, gi, qubits, effects));
        match gate.kind {
            GateKind::Cnot { control, target } => {
                let (c, t) = (control as usize, target as usize);
                let tx = sx[t].clone();
                xor_into(&mut sx[c], &tx);
                let cz = sz[c].clone();
                xor_into(&mut sz[t], &cz);
            }
            GateKind::PrepZ(a) | GateKind::PrepX(a) => {
                sx[a as usize].clear();
                sz[a as usize].clear();
            }
            GateKind::MeasZ(a) => {
                sx[a as usize] = slot_items(gate.slot as usize, zg);
                sz[a as usize].clear();
            }
            GateKind::MeasX(a) => {
                sz[a as usize] = slot_items(gate.slot as usize, xg);
                sx[a as usize].clear();
            }
            GateKind::Idle(_) => {}
        }
    }
    for (kind, gi, qubits, effects) in pending.into_iter().rev() {
        let outcomes = &cache.iter().find(|c| c.0 == kind).unwrap().1;
        builder.push_encoded(kind, Some(gi), qubits, outcomes, &effects);
    }
    builder.finish()
}

/// Detection events and observable flips of one trial, per graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sample {
    pub defects: [Vec<u32>; 2],
    pub observables: [Vec<u32>; 2],
}

/// Per-trial random stream: ChaCha8 seeded with the root seed, stream
/// number equal to the trial index.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Fast sampler over a [`Dem`]: locations sharing a class are visited by
/// geometric skipping, so the cost scales with the number of faults drawn.
#[derive(Clone, Debug)]
pub struct DemSampler<'a> {
    dem: &'a Dem,
    groups: Vec<(u32, Vec<u32>)>,
}

/// Scratch buffers reused across trials.
#[derive(Clone, Debug, Default)]
pub struct SampleScratch {
    parity: Vec<[Vec<u8>; 2]>,
    touched: [[Vec<u32>; 2]; 2],
}

impl<'a> DemSampler<'a> {
    pub fn new(dem: &'a Dem) -> Self {
        let mut groups: Vec<(u32, Vec<u32>)> = dem.classes.iter().enumerate().map(|(i, _)| (i as u32, Vec::new())).collect();
        for (loc, &c) in dem.location_class.iter().enumerate() {
            groups[c as usize].1.push(loc as u32);
        }
        groups.retain(|g| !g.1.is_empty() && dem.classes[g.0 as usize].total > 0.0);
        Self { dem, groups }
    }

    pub fn scratch(&self) -> SampleScratch {
        let d = &self.dem;
        SampleScratch {
            parity: vec![
                [vec![0; d.num_detectors[0]], vec![0; d.num_observables]],
                [vec![0; d.num_detectors[1]], vec![0; d.num_observables]],
            ],
            touched: Default::default(),
        }
    }

    /// Draws one trial.
    pub fn sample<R: Rng>(&self, rng: &mut R, scratch: &mut SampleScratch) -> Sample {
        for (class, locs) in &self.groups {
            let class = &self.dem.classes[*class as usize];
            let q = class.total.min(1.0);
            let log1mq = (1.0 - q).ln();
            let mut idx: usize = 0;
            loop {
                if q < 1.0 {
                    let u: f64 = rng.gen();
                    let skip = ((1.0 - u).ln() / log1mq).floor();
                    if !skip.is_finite() || skip >= (locs.len() - idx) as f64 {
                        break;
                    }
                    idx += skip as usize;
                }
                if idx >= locs.len() {
                    break;
                }
                let loc = locs[idx] as usize;
                let mut r: f64 = rng.gen::<f64>() * class.total;
                let mut outcome = class.probs.len() - 1;
                for (i, &p) in class.probs.iter().enumerate() {
                    if r < p {
                        outcome = i;
                        break;
                    }
                    r -= p;
                }
                self.apply(loc, outcome, scratch);
                idx += 1;
            }
        }
        let mut s = Sample::default();
        for g in 0..2 {
            for kind in 0..2 {
                let touched = std::mem::take(&mut scratch.touched[g][kind]);
                let par = &mut scratch.parity[g][kind];
                let mut out: Vec<u32> = touched.into_iter().filter(|&i| std::mem::replace(&mut par[i as usize], 0) == 1).collect();
                out.sort_unstable();
                if kind == 0 {
                    s.defects[g] = out;
                } else {
                    s.observables[g] = out;
                }
            }
        }
        s
    }

    fn apply(&self, loc: usize, outcome: usize, scratch: &mut SampleScratch) {
        for &v in &self.dem.items[self.dem.effect_range(loc, outcome)] {
            let (g, kind, id) = match decode_item(v) {
                Item::Detector { graph, id } => (graph, 0, id),
                Item::Observable { graph, id } => (graph, 1, id),
            };
            let p = &mut scratch.parity[g][kind][id as usize];
            if *p == 0 {
                scratch.touched[g][kind].push(id);
            }
            *p ^= 1;
        }
    }
}

/// Pauli frame over all data and ancilla qubits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PauliFrame {
    pub x_frame: BitVec,
    pub z_frame: BitVec,
}

impl PauliFrame {
    pub fn new(n: usize) -> Self {
        Self {
            x_frame: BitVec::zeros(n),
            z_frame: BitVec::zeros(n),
        }
    }

    fn apply(&mut self, q: usize, b: PauliBits) {
        if b & PX != 0 {
            self.x_frame.flip(q);
        }
        if b & PZ != 0 {
            self.z_frame.flip(q);
        }
    }
}

/// Measurement outcomes of one run relative to the noiseless reference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasurementRecord {
    pub bits: BitVec,
    pub seed: u64,
}

/// Runs the circuit with a fault chosen by `fault_at(gate index)` after
/// each gate. Returns the record and the final frame.
pub fn propagate<F>(circuit: &Circuit, mut fault_at: F) -> (BitVec, PauliFrame)
where
    F: FnMut(usize) -> Option<FaultPauli>,
{
    let mut frame = PauliFrame::new(circuit.num_qubits());
    let mut bits = BitVec::zeros(circuit.measurements.len());
    for (gi, gate) in circuit.gates.iter().enumerate() {
        let fault = fault_at(gi);
        match gate.kind {
            GateKind::Cnot { control, target } => {
                let (c, t) = (control as usize, target as usize);
                if frame.x_frame.get(c) {
                    frame.x_frame.flip(t);
                }
                if frame.z_frame.get(t) {
                    frame.z_frame.flip(c);
                }
                if let Some(FaultPauli::Two { control: pc, target: pt }) = fault {
                    frame.apply(c, pc);
                    frame.apply(t, pt);
                }
            }
            GateKind::PrepZ(a) | GateKind::PrepX(a) | GateKind::Idle(a) => {
                if !matches!(gate.kind, GateKind::Idle(_)) {
                    frame.x_frame.set(a as usize, false);
                    frame.z_frame.set(a as usize, false);
                }
                if let Some(FaultPauli::Single(b)) = fault {
                    frame.apply(a as usize, b);
                }
            }
            GateKind::MeasZ(a) | GateKind::MeasX(a) => {
                let flipped = if matches!(gate.kind, GateKind::MeasZ(_)) {
                    frame.x_frame.get(a as usize)
                } else {
                    frame.z_frame.get(a as usize)
                };
                let flip = matches!(fault, Some(FaultPauli::Flip));
                bits.set(gate.slot as usize, flipped ^ flip);
            }
        }
    }
    (bits, frame)
}

/// Samples one noisy run by drawing every location independently and
/// propagating the Pauli frame forward.
pub fn sample_run(code: &SubsystemCode, circuit: &Circuit, noise: &NoiseModel, seed: u64) -> (MeasurementRecord, PauliFrame) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache: Vec<(LocationKind, Vec<(FaultPauli, f64)>)> = Vec::new();
    let (bits, frame) = propagate(circuit, |gi| {
        let kind = location_kind(circuit, gi, code);
        let outcomes = match cache.iter().find(|c| c.0 == kind) {
            Some(c) => &c.1,
            None => {
                cache.push((kind, noise.outcomes(kind)));
                &cache.last().unwrap().1
            }
        };
        let mut r: f64 = rng.gen();
        for &(pauli, p) in outcomes {
            if r < p {
                return Some(pauli);
            }
            r -= p;
        }
        None
    });
    (MeasurementRecord { bits, seed }, frame)
}

/// Observable flips of graph `model.ptype` from the final frame: parity of
/// the opposite-type frame on each bare logical of the detector type.
pub fn observable_flips(code: &SubsystemCode, detector_type: PauliType, frame: &PauliFrame) -> Vec<u32> {
    let (logicals, part) = match detector_type {
        PauliType::X => (&code.bare_logicals_x, &frame.z_frame),
        PauliType::Z => (&code.bare_logicals_z, &frame.x_frame),
    };
    logicals
        .iter()
        .enumerate()
        .filter(|(_, l)| l.part(detector_type).ones().filter(|&q| part.get(q)).count() % 2 == 1)
        .map(|(i, _)| i as u32)
        .collect()
}

//! Gauge-fixing-aware detectors, fault-derived matching graphs and the
//! local matching decoder.
//!
//! A detector compares the product of some gauge factors of a stabiliser
//! with the same product at the previous measurement of each factor. A
//! factor whose measurement is fixable gets its own detector (a split
//! vertex). The remaining factors of the stabiliser in that round share one
//! merged detector. A final noiseless round, read from the final Pauli
//! frame, closes every graph in time.
//!
//! Edges come from the detector error model: every fault flipping one or
//! two detectors of a graph becomes an edge (a single detector connects to
//! the boundary node). Parallel contributions are combined by odd parity.
//!
//! Decoding runs a bounded Dijkstra search from every defect, keeps the `m`
//! nearest defects plus the nearest boundary, and solves an exact minimum
//! weight perfect matching on that sparse defect graph.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuits::{anticommuting_ops, fixable_slots, Circuit};
use crate::code::{PauliType, SpaceGraph, SubsystemCode};
use crate::gf2::BitVec;
use crate::matching;
use crate::noise_sim::{graph_index, Dem, DemBuilder, Effect, FaultPauli, LocationKind, PauliFrame, PX, PZ};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecoderError {
    #[error("fault at location {location} flips {count} detectors of one graph")]
    HyperEdgeFault { location: usize, count: usize },
    #[error("defect graph admits no perfect matching with m = {m}")]
    InfeasibleMatching { m: usize },
    #[error("stabiliser {stabiliser} is only partly measured in round {round}")]
    PartialStabiliser { stabiliser: usize, round: usize },
    #[error("odd number of defects on a graph without boundary")]
    OddParity,
}

/// How the factors of each stabiliser are grouped into detectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexMode {
    /// Split exactly the fixable factors.
    GaugeFixing,
    /// One detector per stabiliser and round.
    Merged,
    /// One detector per gauge factor and round.
    Split,
}

/// One detector of a matching graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Detector {
    pub id: u32,
    pub ptype: PauliType,
    /// Index among the rounds of this type; the final noiseless round has
    /// index equal to the number of such rounds.
    pub time_step: usize,
    pub stabiliser: usize,
    pub gauge_factors: Vec<usize>,
    /// Measurement slots whose outcomes enter the parity.
    pub slots: Vec<usize>,
    /// Gauge ops whose final noiseless values enter the parity.
    pub final_ops: Vec<usize>,
    pub is_final: bool,
}

/// Detectors of one Pauli type for one circuit.
#[derive(Clone, Debug)]
pub struct DetectorModel {
    pub ptype: PauliType,
    pub mode: VertexMode,
    pub detectors: Vec<Detector>,
    /// Detectors containing each measurement slot.
    pub slot_detectors: Vec<Vec<u32>>,
    /// Detectors containing the final value of each gauge op.
    pub final_detectors: Vec<Vec<u32>>,
    pub num_time_steps: usize,
    /// Time steps of this type per period of the round sequence.
    pub steps_per_period: usize,
}

/// Smallest period of the sequence of rounds, comparing types and ops.
fn round_period(circuit: &Circuit) -> usize {
    let r = &circuit.rounds;
    (1..=r.len())
        .find(|&p| (p..r.len()).all(|i| r[i].ptype == r[i - p].ptype && r[i].ops == r[i - p].ops))
        .unwrap_or(r.len())
}

impl DetectorModel {
    pub fn build(code: &SubsystemCode, circuit: &Circuit, ptype: PauliType, mode: VertexMode) -> Result<Self, DecoderError> {
        let fixable = fixable_slots(code, circuit);
        let anti = anticommuting_ops(code);
        let mut slot_at: HashMap<(usize, usize), usize> = HashMap::new();
        for (s, m) in circuit.measurements.iter().enumerate() {
            slot_at.insert((m.round, m.gauge_op), s);
        }
        let stabs = code.stabilisers_of(ptype);
        let mut prev_slot: Vec<Option<usize>> = vec![None; code.gauge_ops.len()];
        let mut last_round: Vec<Option<usize>> = vec![None; code.gauge_ops.len()];
        let mut detectors = Vec::new();
        let mut time = 0usize;
        let mut measured = vec![false; code.gauge_ops.len()];
        for (ri, round) in circuit.rounds.iter().enumerate() {
            if round.ptype == ptype {
                for &g in &round.ops {
                    measured[g] = true;
                }
                for &s in &stabs {
                    let factors = &code.stabilisers[s].factors;
                    let count = factors.iter().filter(|&&g| measured[g]).count();
                    if count == 0 {
                        continue;
                    }
                    if count != factors.len() {
                        return Err(DecoderError::PartialStabiliser { stabiliser: s, round: ri });
                    }
                    let mut merged = Detector {
                        id: 0,
                        ptype,
                        time_step: time,
                        stabiliser: s,
                        gauge_factors: Vec::new(),
                        slots: Vec::new(),
                        final_ops: Vec::new(),
                        is_final: false,
                    };
                    for &g in factors {
                        let slot = slot_at[&(ri, g)];
                        let mut slots = vec![slot];
                        slots.extend(prev_slot[g]);
                        let split = match mode {
                            VertexMode::Split => true,
                            VertexMode::Merged => false,
                            VertexMode::GaugeFixing => fixable[slot],
                        };
                        if split {
                            detectors.push(Detector {
                                gauge_factors: vec![g],
                                slots,
                                ..merged.clone()
                            });
                        } else {
                            merged.gauge_factors.push(g);
                            merged.slots.extend(slots);
                        }
                    }
                    if !merged.gauge_factors.is_empty() {
                        detectors.push(merged);
                    }
                }
                for &g in &round.ops {
                    measured[g] = false;
                    prev_slot[g] = Some(slot_at[&(ri, g)]);
                    last_round[g] = Some(ri);
                }
                time += 1;
            } else {
                for &g in &round.ops {
                    last_round[g] = Some(ri);
                }
            }
        }
        for &s in &stabs {
            let mut merged = Detector {
                id: 0,
                ptype,
                time_step: time,
                stabiliser: s,
                gauge_factors: Vec::new(),
                slots: Vec::new(),
                final_ops: Vec::new(),
                is_final: true,
            };
            for &g in &code.stabilisers[s].factors {
                let slots: Vec<usize> = prev_slot[g].into_iter().collect();
                let fixable_final = match last_round[g] {
                    Some(lg) if prev_slot[g].is_some() => anti[g].iter().all(|&h| last_round[h].is_none_or(|lh| lh < lg)),
                    _ => false,
                };
                let split = match mode {
                    VertexMode::Split => prev_slot[g].is_some(),
                    VertexMode::Merged => false,
                    VertexMode::GaugeFixing => fixable_final,
                };
                if split {
                    detectors.push(Detector {
                        gauge_factors: vec![g],
                        slots,
                        final_ops: vec![g],
                        ..merged.clone()
                    });
                } else {
                    merged.gauge_factors.push(g);
                    merged.slots.extend(slots);
                    merged.final_ops.push(g);
                }
            }
            if !merged.gauge_factors.is_empty() {
                detectors.push(merged);
            }
        }
        let mut slot_detectors = vec![Vec::new(); circuit.measurements.len()];
        let mut final_detectors = vec![Vec::new(); code.gauge_ops.len()];
        for (i, d) in detectors.iter_mut().enumerate() {
            d.id = i as u32;
            for &s in &d.slots {
                slot_detectors[s].push(i as u32);
            }
            for &g in &d.final_ops {
                final_detectors[g].push(i as u32);
            }
        }
        let per = round_period(circuit);
        let steps_per_period = circuit.rounds[..per].iter().filter(|r| r.ptype == ptype).count().max(1);
        Ok(Self {
            ptype,
            mode,
            detectors,
            slot_detectors,
            final_detectors,
            num_time_steps: time + 1,
            steps_per_period,
        })
    }

    /// Mean number of qubits in the support of a detector's gauge factors,
    /// over detectors strictly inside the time window.
    pub fn mean_interior_weight(&self, code: &SubsystemCode) -> f64 {
        let inner: Vec<&Detector> = self.interior().collect();
        let total: usize = inner
            .iter()
            .map(|d| d.gauge_factors.iter().map(|&g| code.gauge_ops[g].qubits.len()).sum::<usize>())
            .sum();
        total as f64 / inner.len().max(1) as f64
    }

    fn interior(&self) -> impl Iterator<Item = &Detector> + '_ {
        self.detectors.iter().filter(move |d| self.is_interior(d.id))
    }

    /// Time steps of the interior window: whole periods at least two steps
    /// away from both ends.
    pub fn interior_window(&self) -> std::ops::Range<usize> {
        let per = self.steps_per_period;
        let last = self.num_time_steps.saturating_sub(1);
        let start = 2usize.div_ceil(per) * per;
        let end = last.saturating_sub(2) / per * per;
        start..end.max(start)
    }

    /// Whether detector `id` lies in [`Self::interior_window`].
    pub fn is_interior(&self, id: u32) -> bool {
        self.interior_window().contains(&self.detectors[id as usize].time_step)
    }

    /// Mean number of distinct non-boundary neighbours of interior detectors.
    pub fn mean_interior_degree(&self, graph: &MatchingGraph) -> f64 {
        let inner: Vec<u32> = self.interior().map(|d| d.id).collect();
        inner.iter().map(|&d| graph.degree(d)).sum::<usize>() as f64 / inner.len().max(1) as f64
    }
}

/// Defects from a measurement record and the final frame.
pub fn difference_syndrome(code: &SubsystemCode, model: &DetectorModel, record: &BitVec, frame: &PauliFrame) -> Vec<u32> {
    let part = match model.ptype {
        PauliType::Z => &frame.x_frame,
        PauliType::X => &frame.z_frame,
    };
    let final_value: Vec<bool> = code
        .gauge_ops
        .iter()
        .map(|g| g.ptype == model.ptype && g.qubits.iter().filter(|&&q| part.get(q)).count() % 2 == 1)
        .collect();
    model
        .detectors
        .iter()
        .filter(|d| {
            let a = d.slots.iter().filter(|&&s| record.get(s)).count();
            let b = d.final_ops.iter().filter(|&&g| final_value[g]).count();
            (a + b) % 2 == 1
        })
        .map(|d| d.id)
        .collect()
}

/// Matching-graph edge.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphEdge {
    pub u: u32,
    pub v: u32,
    pub weight: i64,
    pub probability: f64,
    /// Logical observables flipped by the edge.
    pub observables: Vec<u32>,
    /// Fault locations contributing to the edge.
    pub fault_ids: Vec<u32>,
}

/// Scale of the integer edge weights.
pub const WEIGHT_SCALE: f64 = 1000.0;

/// Integer weight `ln((1 − p)/p)` scaled by [`WEIGHT_SCALE`], clamped at 0.
pub fn edge_weight(p: f64) -> i64 {
    if p >= 0.5 {
        return 0;
    }
    let w = ((1.0 - p) / p).ln() * WEIGHT_SCALE;
    w.round().max(0.0) as i64
}

/// Odd-parity combination of two independent flip probabilities.
pub fn combine_odd(p: f64, q: f64) -> f64 {
    p * (1.0 - q) + q * (1.0 - p)
}

/// A weighted matching graph, immutable once built.
#[derive(Clone, Debug)]
pub struct MatchingGraph {
    pub num_detectors: usize,
    /// Boundary node id (equal to `num_detectors`) when some edge is
    /// boundary-incident.
    pub boundary: Option<u32>,
    pub edges: Vec<GraphEdge>,
    /// Edges whose contributing faults disagreed on the observable mask.
    pub obs_conflicts: usize,
    /// Total probability of faults that flip observables but no detector.
    pub undetectable_logical: f64,
    adj_offsets: Vec<u32>,
    adj: Vec<(u32, u32)>,
}

impl MatchingGraph {
    /// Builds graph `graph` (see [`graph_index`]) of a detector error model.
    pub fn from_dem(dem: &Dem, graph: usize) -> Result<Self, DecoderError> {
        struct Acc {
            p: f64,
            masks: Vec<(Vec<u32>, f64)>,
            faults: Vec<u32>,
        }
        let nd = dem.num_detectors[graph];
        let boundary = nd as u32;
        let mut acc: HashMap<(u32, u32), Acc> = HashMap::new();
        let mut order: Vec<(u32, u32)> = Vec::new();
        let mut undetectable = 0.0;
        for loc in 0..dem.num_locations() {
            let class = &dem.classes[dem.location_class[loc] as usize];
            let mut local: Vec<((u32, u32), Vec<u32>, f64)> = Vec::new();
            for (i, &p) in class.probs.iter().enumerate() {
                let e = dem.effect(loc, i);
                let dets = &e.detectors[graph];
                let key = match dets.as_slice() {
                    [] => {
                        if !e.observables[graph].is_empty() {
                            undetectable += p;
                        }
                        continue;
                    }
                    [a] => (*a, boundary),
                    [a, b] => (*a.min(b), *a.max(b)),
                    _ => {
                        return Err(DecoderError::HyperEdgeFault {
                            location: loc,
                            count: dets.len(),
                        })
                    }
                };
                let obs = e.observables[graph].clone();
                match local.iter_mut().find(|l| l.0 == key && l.1 == obs) {
                    Some(l) => l.2 += p,
                    None => local.push((key, obs, p)),
                }
            }
            let mut by_key: Vec<((u32, u32), f64)> = Vec::new();
            for (key, _, p) in &local {
                match by_key.iter_mut().find(|b| b.0 == *key) {
                    Some(b) => b.1 += p,
                    None => by_key.push((*key, *p)),
                }
            }
            for (key, p) in by_key {
                let a = acc.entry(key).or_insert_with(|| {
                    order.push(key);
                    Acc {
                        p: 0.0,
                        masks: Vec::new(),
                        faults: Vec::new(),
                    }
                });
                a.p = combine_odd(a.p, p);
                a.faults.push(loc as u32);
            }
            for (key, obs, p) in local {
                let a = acc.get_mut(&key).unwrap();
                match a.masks.iter_mut().find(|m| m.0 == obs) {
                    Some(m) => m.1 += p,
                    None => a.masks.push((obs, p)),
                }
            }
        }
        let mut conflicts = 0;
        let mut edges = Vec::with_capacity(order.len());
        order.sort_unstable();
        for key in order {
            let a = acc.remove(&key).unwrap();
            if a.masks.len() > 1 {
                conflicts += 1;
            }
            let obs = a
                .masks
                .into_iter()
                .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then_with(|| y.0.cmp(&x.0)))
                .map(|m| m.0)
                .unwrap_or_default();
            edges.push(GraphEdge {
                u: key.0,
                v: key.1,
                weight: edge_weight(a.p),
                probability: a.p,
                observables: obs,
                fault_ids: a.faults,
            });
        }
        Ok(Self::from_edges(nd, edges, conflicts, undetectable))
    }

    /// Assembles a graph from explicit edges.
    pub fn from_edges(num_detectors: usize, edges: Vec<GraphEdge>, obs_conflicts: usize, undetectable_logical: f64) -> Self {
        let has_boundary = edges.iter().any(|e| e.v as usize == num_detectors);
        let nn = num_detectors + 1;
        let mut deg = vec![0u32; nn + 1];
        for e in &edges {
            deg[e.u as usize] += 1;
            deg[e.v as usize] += 1;
        }
        let mut adj_offsets = vec![0u32; nn + 1];
        for i in 0..nn {
            adj_offsets[i + 1] = adj_offsets[i] + deg[i];
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![(0u32, 0u32); adj_offsets[nn] as usize];
        for (i, e) in edges.iter().enumerate() {
            adj[fill[e.u as usize] as usize] = (e.v, i as u32);
            fill[e.u as usize] += 1;
            adj[fill[e.v as usize] as usize] = (e.u, i as u32);
            fill[e.v as usize] += 1;
        }
        for u in 0..nn {
            adj[adj_offsets[u] as usize..adj_offsets[u + 1] as usize].sort_unstable();
        }
        Self {
            num_detectors,
            boundary: has_boundary.then_some(num_detectors as u32),
            edges,
            obs_conflicts,
            undetectable_logical,
            adj_offsets,
            adj,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_detectors + 1
    }

    /// `(neighbour, edge id)` pairs of node `u`.
    pub fn neighbours(&self, u: u32) -> &[(u32, u32)] {
        &self.adj[self.adj_offsets[u as usize] as usize..self.adj_offsets[u as usize + 1] as usize]
    }

    /// Number of distinct detector neighbours (boundary excluded).
    pub fn degree(&self, u: u32) -> usize {
        let mut nb: Vec<u32> = self.neighbours(u).iter().map(|x| x.0).filter(|&v| v as usize != self.num_detectors).collect();
        nb.dedup();
        nb.len()
    }

    /// Structured text dump: one line per edge.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "detectors {}\nboundary {}\nedges {}",
            self.num_detectors,
            self.boundary.map_or(-1, |b| b as i64),
            self.edges.len()
        )
        .unwrap();
        for (i, e) in self.edges.iter().enumerate() {
            writeln!(
                s,
                "edge {i} {} {} w {} p {:.6e} obs {:?} faults {:?}",
                e.u, e.v, e.weight, e.probability, e.observables, e.fault_ids
            )
            .unwrap();
        }
        s
    }
}

/// A defect reached by a local search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reached {
    pub node: u32,
    pub distance: i64,
    /// Edge ids of a shortest path from the source.
    pub path: Vec<u32>,
}

/// Result of [`local_dijkstra`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalSearch {
    pub source: u32,
    pub found: Vec<Reached>,
    pub boundary: Option<Reached>,
    /// Number of settled nodes.
    pub settled: usize,
}

/// Reusable per-thread buffers for [`local_dijkstra`] and [`decode`].
#[derive(Clone, Debug, Default)]
pub struct Scratch {
    dist: Vec<i64>,
    pred: Vec<(u32, u32)>,
    seen: Vec<u32>,
    done: Vec<u32>,
    defect: Vec<u32>,
    generation: u32,
    defect_generation: u32,
    heap: BinaryHeap<Reverse<(i64, u32)>>,
}

impl Scratch {
    pub fn new(graph: &MatchingGraph) -> Self {
        let n = graph.num_nodes();
        Self {
            dist: vec![0; n],
            pred: vec![(u32::MAX, u32::MAX); n],
            seen: vec![0; n],
            done: vec![0; n],
            defect: vec![0; n],
            generation: 0,
            defect_generation: 0,
            heap: BinaryHeap::new(),
        }
    }

    fn ensure(&mut self, graph: &MatchingGraph) {
        if self.dist.len() != graph.num_nodes() {
            *self = Scratch::new(graph);
        }
    }

    fn mark_defects(&mut self, defects: &[u32]) {
        self.defect_generation = self.defect_generation.wrapping_add(1);
        if self.defect_generation == 0 {
            self.defect.iter_mut().for_each(|d| *d = 0);
            self.defect_generation = 1;
        }
        for &d in defects {
            self.defect[d as usize] = self.defect_generation;
        }
    }
}

/// Dijkstra search from `source` that halts once `m` other defects and, if
/// the graph has one, the boundary have been settled. Ties are broken by
/// node id. The search never passes through the boundary node.
pub fn local_dijkstra(graph: &MatchingGraph, defects: &[u32], m: usize, source: u32, scratch: &mut Scratch) -> LocalSearch {
    scratch.ensure(graph);
    scratch.mark_defects(defects);
    search(graph, m, source, scratch)
}

fn search(graph: &MatchingGraph, m: usize, source: u32, scratch: &mut Scratch) -> LocalSearch {
    scratch.generation = scratch.generation.wrapping_add(1);
    if scratch.generation == 0 {
        scratch.seen.iter_mut().for_each(|d| *d = 0);
        scratch.done.iter_mut().for_each(|d| *d = 0);
        scratch.generation = 1;
    }
    let gen = scratch.generation;
    let dg = scratch.defect_generation;
    let mut found = Vec::new();
    let mut boundary = None;
    let mut settled = 0;
    scratch.heap.clear();
    scratch.dist[source as usize] = 0;
    scratch.seen[source as usize] = gen;
    scratch.pred[source as usize] = (u32::MAX, u32::MAX);
    scratch.heap.push(Reverse((0, source)));
    let need_boundary = graph.boundary.is_some();
    while let Some(Reverse((d, u))) = scratch.heap.pop() {
        if scratch.done[u as usize] == gen || d > scratch.dist[u as usize] {
            continue;
        }
        scratch.done[u as usize] = gen;
        settled += 1;
        let reached = |scratch: &Scratch| Reached {
            node: u,
            distance: d,
            path: trace(scratch, u),
        };
        if Some(u) == graph.boundary {
            boundary = Some(reached(scratch));
            if found.len() >= m {
                break;
            }
            continue;
        }
        if u != source && scratch.defect[u as usize] == dg {
            found.push(reached(scratch));
            if found.len() >= m && (!need_boundary || boundary.is_some()) {
                break;
            }
        }
        for &(v, e) in graph.neighbours(u) {
            let nd = d + graph.edges[e as usize].weight;
            let vi = v as usize;
            if scratch.seen[vi] != gen || nd < scratch.dist[vi] {
                scratch.seen[vi] = gen;
                scratch.dist[vi] = nd;
                scratch.pred[vi] = (u, e);
                scratch.heap.push(Reverse((nd, v)));
            }
        }
    }
    LocalSearch {
        source,
        found,
        boundary,
        settled,
    }
}

fn trace(scratch: &Scratch, mut u: u32) -> Vec<u32> {
    let mut path = Vec::new();
    while scratch.pred[u as usize].0 != u32::MAX {
        let (p, e) = scratch.pred[u as usize];
        path.push(e);
        u = p;
    }
    path.reverse();
    path
}

/// Output of [`decode`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoding {
    /// Matched pairs; `None` pairs a defect with the boundary.
    pub pairs: Vec<(u32, Option<u32>)>,
    /// Correction edge set (edges used an odd number of times).
    pub edges: Vec<u32>,
    /// Total path weight of the matching.
    pub weight: i64,
    /// Observables flipped by the correction.
    pub observables: Vec<u32>,
}

/// Local matching: each defect may pair with its `m` nearest defects or the
/// boundary; the candidate graph is solved exactly.
pub fn decode(graph: &MatchingGraph, defects: &[u32], m: usize, scratch: &mut Scratch) -> Result<Decoding, DecoderError> {
    scratch.ensure(graph);
    let n = defects.len();
    if n == 0 {
        return Ok(Decoding {
            pairs: Vec::new(),
            edges: Vec::new(),
            weight: 0,
            observables: Vec::new(),
        });
    }
    if graph.boundary.is_none() && n % 2 == 1 {
        return Err(DecoderError::OddParity);
    }
    scratch.mark_defects(defects);
    let index: HashMap<u32, usize> = defects.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let m_eff = m.min(n.saturating_sub(1));
    let searches: Vec<LocalSearch> = defects.iter().map(|&d| search(graph, m_eff, d, scratch)).collect();
    // Candidate pair (i < j) → (distance, search index, found index).
    let mut cand: HashMap<(usize, usize), (i64, usize, usize)> = HashMap::new();
    for (si, s) in searches.iter().enumerate() {
        for (fi, r) in s.found.iter().enumerate() {
            let j = index[&r.node];
            let key = (si.min(j), si.max(j));
            let entry = cand.entry(key).or_insert((r.distance, si, fi));
            if r.distance < entry.0 {
                *entry = (r.distance, si, fi);
            }
        }
    }
    let mut keys: Vec<(usize, usize)> = cand.keys().copied().collect();
    keys.sort_unstable();
    let mut medges: Vec<(usize, usize, i64)> = keys.iter().map(|&(i, j)| (i, j, cand[&(i, j)].0)).collect();
    let with_boundary = graph.boundary.is_some();
    if with_boundary {
        for (i, s) in searches.iter().enumerate() {
            if let Some(b) = &s.boundary {
                medges.push((i, n + i, b.distance));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                medges.push((n + i, n + j, 0));
            }
        }
    }
    let nodes = if with_boundary { 2 * n } else { n };
    let mate = matching::min_weight_perfect_matching(nodes, &medges).ok_or(DecoderError::InfeasibleMatching { m })?;
    let mut used = vec![0u8; graph.edges.len()];
    let mut touched = Vec::new();
    let mut pairs = Vec::new();
    let mut weight = 0;
    let mut toggle = |path: &[u32], used: &mut Vec<u8>| {
        for &e in path {
            if used[e as usize] == 0 {
                touched.push(e);
            }
            used[e as usize] ^= 1;
        }
    };
    for i in 0..n {
        let j = mate[i];
        if j < n {
            if i < j {
                let (d, si, fi) = cand[&(i, j)];
                weight += d;
                toggle(&searches[si].found[fi].path, &mut used);
                pairs.push((defects[i], Some(defects[j])));
            }
        } else {
            let b = searches[i].boundary.as_ref().expect("boundary edge without search result");
            weight += b.distance;
            toggle(&b.path, &mut used);
            pairs.push((defects[i], None));
        }
    }
    let mut edges: Vec<u32> = touched.into_iter().filter(|&e| used[e as usize] == 1).collect();
    edges.sort_unstable();
    let mut obs_par: HashMap<u32, u8> = HashMap::new();
    for &e in &edges {
        for &o in &graph.edges[e as usize].observables {
            *obs_par.entry(o).or_default() ^= 1;
        }
    }
    let mut observables: Vec<u32> = obs_par.into_iter().filter(|x| x.1 == 1).map(|x| x.0).collect();
    observables.sort_unstable();
    Ok(Decoding {
        pairs,
        edges,
        weight,
        observables,
    })
}

/// [`decode`] retrying with `2m` on [`DecoderError::InfeasibleMatching`]
/// until `m` covers every defect.
pub fn decode_with_retry(graph: &MatchingGraph, defects: &[u32], m: usize, scratch: &mut Scratch) -> Result<Decoding, DecoderError> {
    let mut m = m.max(1);
    loop {
        match decode(graph, defects, m, scratch) {
            Err(DecoderError::InfeasibleMatching { .. }) if m < defects.len() => m *= 2,
            r => return r,
        }
    }
}

/// Exact minimum matching weight by enumerating pairings over full
/// shortest-path distances. Practical up to about 10 defects.
pub fn brute_force_matching_weight(graph: &MatchingGraph, defects: &[u32]) -> Option<i64> {
    let n = defects.len();
    let mut scratch = Scratch::new(graph);
    scratch.mark_defects(defects);
    let searches: Vec<LocalSearch> = defects.iter().map(|&d| search(graph, n, d, &mut scratch)).collect();
    let with_boundary = graph.boundary.is_some();
    let size = if with_boundary { 2 * n } else { n };
    let mut dist = vec![vec![None; size]; size];
    for (i, s) in searches.iter().enumerate() {
        for r in &s.found {
            let j = defects.iter().position(|&d| d == r.node).unwrap();
            dist[i][j] = Some(r.distance);
            dist[j][i] = Some(r.distance);
        }
        if with_boundary {
            if let Some(b) = &s.boundary {
                dist[i][n + i] = Some(b.distance);
                dist[n + i][i] = Some(b.distance);
            }
            for j in 0..n {
                if j != i {
                    dist[n + i][n + j] = Some(0);
                }
            }
        }
    }
    matching::brute_force_min_perfect_matching(&dist)
}

/// Detector error model of independent single-qubit errors with probability
/// `p` on a code's space graph of detector type `ptype` (code capacity).
pub fn code_capacity_dem(code: &SubsystemCode, space: &SpaceGraph, p: f64) -> Dem {
    phenomenological_dem(code, space, p, 0.0, 0)
}

/// Detector error model of `rounds` noisy stabiliser measurements followed
/// by one noiseless round: data errors with probability `p` before every
/// noisy round and measurement errors with probability `q`. With
/// `rounds = 0` this is the code-capacity model.
pub fn phenomenological_dem(code: &SubsystemCode, space: &SpaceGraph, p: f64, q: f64, rounds: usize) -> Dem {
    let gi = graph_index(space.ptype);
    let ns = space.stabiliser_of_node.len();
    let layers = rounds + 1;
    let mut nd = [0usize; 2];
    nd[gi] = ns * layers;
    let logicals = code.bare_logicals(space.ptype);
    let err = match space.ptype {
        PauliType::X => PZ,
        PauliType::Z => PX,
    };
    let mut qubit_obs: HashMap<usize, Vec<u32>> = HashMap::new();
    for (i, l) in logicals.iter().enumerate() {
        for q in l.part(space.ptype).ones() {
            qubit_obs.entry(q).or_default().push(i as u32);
        }
    }
    let mut b = DemBuilder::new(nd, code.k);
    let data_layers = rounds.max(1);
    for t in 0..data_layers {
        for &(u, v, qubit) in &space.edges {
            let mut e = Effect::default();
            for node in [u, v] {
                if Some(node) != space.boundary {
                    e.detectors[gi].push((t * ns + node) as u32);
                }
            }
            e.detectors[gi].sort_unstable();
            e.observables[gi] = qubit_obs.get(&qubit).cloned().unwrap_or_default();
            b.push_location(LocationKind::Data, &[(FaultPauli::Single(err), p)], &[e]);
        }
    }
    if q > 0.0 {
        for t in 0..rounds {
            for s in 0..ns {
                let mut e = Effect::default();
                e.detectors[gi] = vec![(t * ns + s) as u32, ((t + 1) * ns + s) as u32];
                b.push_location(LocationKind::Syndrome, &[(FaultPauli::Flip, q)], &[e]);
            }
        }
    }
    b.finish()
}

/// Per-edge fault counts used by the edge-class table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeFaultCounts {
    /// Single CNOT Z patterns from X-type measurement circuits.
    pub g1_x: u32,
    /// Single CNOT Z patterns from Z-type measurement circuits.
    pub g1_z: u32,
    /// Pairs of Z patterns of one X-circuit CNOT giving the same edge.
    pub g2_x: u32,
    /// Pairs of Z patterns of one Z-circuit CNOT giving the same edge.
    pub g2_z: u32,
    pub prep_x: u32,
    pub meas_x: u32,
    pub idle: u32,
}

/// One row of the edge-class table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeClassRow {
    pub class: usize,
    /// Z rounds between the previous X round and the later endpoint's round.
    pub r_z: usize,
    pub counts: EdgeFaultCounts,
}

/// Edge-class table of the X-type split graph of a toric code of size `l`.
///
/// Fault effects are taken modulo the product of the two X triangles of a
/// face at one time step, which is the syndrome of a Z-type gauge operator.
/// Rows list the distinct count vectors per class and `r_z` over interior
/// edges; the second value counts interior edges outside every class.
pub fn edge_class_table(
    code: &SubsystemCode,
    circuit: &Circuit,
    model: &DetectorModel,
    dem: &Dem,
    face_coords: &[(i32, i32)],
    l: i32,
) -> (Vec<EdgeClassRow>, usize) {
    let gi = graph_index(PauliType::X);
    let reduce = |d: &[u32]| -> Vec<u32> {
        let mut out: Vec<u32> = d.to_vec();
        let key = |x: u32| {
            let det = &model.detectors[x as usize];
            let g = det.gauge_factors[0];
            (code.gauge_ops[g].face, det.time_step, det.gauge_factors.len())
        };
        let mut i = 0;
        while i < out.len() {
            let ki = key(out[i]);
            if ki.2 == 1 && ki.0.is_some() {
                if let Some(j) = (i + 1..out.len()).find(|&j| key(out[j]) == ki) {
                    out.remove(j);
                    out.remove(i);
                    continue;
                }
            }
            i += 1;
        }
        out
    };
    let mut counts: HashMap<(u32, u32), EdgeFaultCounts> = HashMap::new();
    for loc in 0..dem.num_locations() {
        let class = &dem.classes[dem.location_class[loc] as usize];
        match class.kind {
            LocationKind::Cnot(t) => {
                let mut groups: Vec<(Vec<u32>, u32)> = Vec::new();
                for (i, p) in class.paulis.iter().enumerate() {
                    if let FaultPauli::Two { control, target } = *p {
                        if control & PX != 0 || target & PX != 0 {
                            continue;
                        }
                        let d = reduce(&dem.effect(loc, i).detectors[gi]);
                        if d.is_empty() {
                            continue;
                        }
                        match groups.iter_mut().find(|g| g.0 == d) {
                            Some(g) => g.1 += 1,
                            None => groups.push((d, 1)),
                        }
                    }
                }
                for (d, c) in groups {
                    if let Some(key) = edge_key(&d) {
                        let e = counts.entry(key).or_default();
                        match (t, c) {
                            (PauliType::X, 1) => e.g1_x += 1,
                            (PauliType::Z, 1) => e.g1_z += 1,
                            (PauliType::X, _) => e.g2_x += 1,
                            (PauliType::Z, _) => e.g2_z += 1,
                        }
                    }
                }
            }
            LocationKind::Prep(PauliType::X) | LocationKind::Meas(PauliType::X) | LocationKind::Idle => {
                for (i, p) in class.paulis.iter().enumerate() {
                    let z_like = match *p {
                        FaultPauli::Single(b) => b == PZ,
                        FaultPauli::Flip => true,
                        _ => false,
                    };
                    if !z_like {
                        continue;
                    }
                    if let Some(key) = edge_key(&reduce(&dem.effect(loc, i).detectors[gi])) {
                        let e = counts.entry(key).or_default();
                        match class.kind {
                            LocationKind::Prep(_) => e.prep_x += 1,
                            LocationKind::Meas(_) => e.meas_x += 1,
                            _ => e.idle += 1,
                        }
                    }
                }
            }
            _ => {}
        }
    }
    // Z rounds preceding each X time step.
    let mut r_z_of_step = Vec::new();
    let mut z_since = 0;
    for round in &circuit.rounds {
        if round.ptype == PauliType::X {
            r_z_of_step.push(z_since);
            z_since = 0;
        } else {
            z_since += 1;
        }
    }
    r_z_of_step.push(z_since);
    let mut rows: Vec<EdgeClassRow> = Vec::new();
    let mut unclassified = 0;
    for (&(a, b), c) in &counts {
        if b as usize >= model.detectors.len() || !model.is_interior(a) || !model.is_interior(b) {
            continue;
        }
        let t = model.detectors[a as usize].time_step.max(model.detectors[b as usize].time_step);
        match edge_class(code, model, a, b, face_coords, l) {
            Some(class) => {
                let row = EdgeClassRow {
                    class,
                    r_z: r_z_of_step[t],
                    counts: *c,
                };
                if !rows.contains(&row) {
                    rows.push(row);
                }
            }
            None => unclassified += 1,
        }
    }
    rows.sort();
    (rows, unclassified)
}
fn edge_key(d: &[u32]) -> Option<(u32, u32)> {
    match d {
        [a, b] => Some((*a.min(b), *a.max(b))),
        [a] => Some((*a, u32::MAX)),
        _ => None,
    }
}

/// Class of an edge between two split X detectors; see
/// [`edge_class_table`].
fn edge_class(code: &SubsystemCode, model: &DetectorModel, a: u32, b: u32, face_coords: &[(i32, i32)], l: i32) -> Option<usize> {
    let info = |d: u32| {
        let det = &model.detectors[d as usize];
        let g = *det.gauge_factors.first()?;
        let op = &code.gauge_ops[g];
        Some((op.label?, op.face? as usize, det.time_step as i64, det.gauge_factors.len()))
    };
    let (la, fa, ta, na) = info(a)?;
    let (lb, fb, tb, nb) = info(b)?;
    if na != 1 || nb != 1 {
        return None;
    }
    if la == lb {
        if fa != fb || (ta - tb).abs() != 1 {
            return None;
        }
        return match la {
            1 => Some(6),
            3 => Some(7),
            _ => None,
        };
    }
    let ((f1, t1), (f3, t3)) = if la == 1 { ((fa, ta), (fb, tb)) } else { ((fb, tb), (fa, ta)) };
    let (x1, y1) = face_coords[f1];
    let (x3, y3) = face_coords[f3];
    let off = ((x3 - x1).rem_euclid(l), (y3 - y1).rem_euclid(l));
    let base = match off {
        (0, 1) => 0,
        (1, 1) => 1,
        (1, 0) => 2,
        _ => return None,
    };
    match t3 - t1 {
        0 => Some(base),
        1 => Some(base + 3),
        _ => None,
    }
}

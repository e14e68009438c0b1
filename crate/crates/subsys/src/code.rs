//! Subsystem codes built from labelled tessellations.
//!
//! Qubits live on the vertices and edges of a tessellation. Every corner
//! contributes one weight-3 triangle operator on its vertex qubit and the two
//! edge qubits of its face adjacent to it; its Pauli type is the corner
//! colour. The stabilisers are the per-face products of same-type triangle
//! operators, and on planar patches the weight-2 boundary checks.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2::{self, BitVec, RowBasis};
use crate::tessellation::{Side, Tessellation};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodeError {
    #[error("adjacent same-type triangle operators overlap on one qubit at corners {0} and {1}")]
    ColouringInconsistent(usize, usize),
    #[error("commutation failure: {0}")]
    CommutationFailure(String),
    #[error("rank inconsistency: {0}")]
    RankInconsistency(String),
    #[error("distance requires a closed surface or a patch with boundary checks")]
    NotClosedSurface,
    #[error("selected gauge operators {0} and {1} anti-commute")]
    NonCommutingSelection(usize, usize),
    #[error("the given X checks are not a local cut-set")]
    NotACutSet,
    #[error("the given X checks are linearly dependent")]
    NotIndependent,
    #[error("residual error has a non-trivial syndrome")]
    SyndromeNotCleared,
    #[error("a qubit is acted on by more than two {0:?}-type stabilisers")]
    TooManyStabilisers(PauliType),
}

/// Pauli type of a CSS operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliType {
    X,
    Z,
}

impl PauliType {
    pub fn other(self) -> Self {
        match self {
            PauliType::X => PauliType::Z,
            PauliType::Z => PauliType::X,
        }
    }

    /// Type carried by a corner of the given colour.
    pub fn from_colour(colour: u8) -> Self {
        if colour.is_multiple_of(2) {
            PauliType::Z
        } else {
            PauliType::X
        }
    }
}

/// Pauli operator on `n` qubits in symplectic form, up to phase.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliOperator {
    pub x: BitVec,
    pub z: BitVec,
}

impl PauliOperator {
    pub fn identity(n: usize) -> Self {
        Self {
            x: BitVec::zeros(n),
            z: BitVec::zeros(n),
        }
    }

    /// Operator of a single Pauli type on the given qubits.
    pub fn of_type(ptype: PauliType, n: usize, qubits: impl IntoIterator<Item = usize>) -> Self {
        let support = BitVec::from_indices(n, qubits);
        match ptype {
            PauliType::X => Self {
                x: support,
                z: BitVec::zeros(n),
            },
            PauliType::Z => Self {
                x: BitVec::zeros(n),
                z: support,
            },
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.x.len()
    }

    pub fn weight(&self) -> usize {
        self.x.union_count(&self.z)
    }

    /// True iff the symplectic form vanishes.
    pub fn commutes(&self, other: &PauliOperator) -> bool {
        self.x.dot(&other.z) == other.x.dot(&self.z)
    }

    /// Product up to phase.
    pub fn mul(&self, other: &PauliOperator) -> PauliOperator {
        let mut out = self.clone();
        out.mul_assign(other);
        out
    }

    pub fn mul_assign(&mut self, other: &PauliOperator) {
        self.x.xor_assign(&other.x);
        self.z.xor_assign(&other.z);
    }

    /// Support of the given component.
    pub fn part(&self, ptype: PauliType) -> &BitVec {
        match ptype {
            PauliType::X => &self.x,
            PauliType::Z => &self.z,
        }
    }

    /// Pauli type when the operator is pure X or pure Z.
    pub fn pure_type(&self) -> Option<PauliType> {
        match (self.x.is_zero(), self.z.is_zero()) {
            (false, true) => Some(PauliType::X),
            (true, false) => Some(PauliType::Z),
            _ => None,
        }
    }
}

/// A triangle operator (or a boundary check acting as its own gauge factor).
#[derive(Clone, Debug)]
pub struct GaugeOp {
    pub ptype: PauliType,
    pub qubits: Vec<usize>,
    pub op: PauliOperator,
    /// Corner label when the tessellation is labelled.
    pub label: Option<u8>,
    pub corner: Option<u32>,
    pub face: Option<u32>,
    pub vertex: Option<u32>,
    pub boundary: Option<Side>,
}

/// A stabiliser generator with its gauge-factor decomposition.
#[derive(Clone, Debug)]
pub struct Stabiliser {
    pub ptype: PauliType,
    pub op: PauliOperator,
    pub factors: Vec<usize>,
    pub face: Option<u32>,
}

/// CSS subsystem code with triangle gauge operators.
#[derive(Clone, Debug)]
pub struct SubsystemCode {
    pub n: usize,
    pub gauge_ops: Vec<GaugeOp>,
    pub stabilisers: Vec<Stabiliser>,
    pub bare_logicals_x: Vec<PauliOperator>,
    pub bare_logicals_z: Vec<PauliOperator>,
    pub k: usize,
    pub g: usize,
    /// Rank of the stabiliser group.
    pub r: usize,
    /// Qubit indices that sit on tessellation edges.
    pub edge_qubits: Vec<usize>,
    /// Whether the source tessellation was a closed surface.
    pub closed: bool,
}

impl SubsystemCode {
    /// Stabilisers of one Pauli type, as indices into `stabilisers`.
    pub fn stabilisers_of(&self, ptype: PauliType) -> Vec<usize> {
        (0..self.stabilisers.len()).filter(|&i| self.stabilisers[i].ptype == ptype).collect()
    }

    pub fn gauge_ops_of(&self, ptype: PauliType) -> Vec<usize> {
        (0..self.gauge_ops.len()).filter(|&i| self.gauge_ops[i].ptype == ptype).collect()
    }

    /// Bare logicals of one type.
    pub fn bare_logicals(&self, ptype: PauliType) -> &[PauliOperator] {
        match ptype {
            PauliType::X => &self.bare_logicals_x,
            PauliType::Z => &self.bare_logicals_z,
        }
    }

    /// For each qubit, the stabilisers of a type that act on it.
    pub fn qubit_stabilisers(&self, ptype: PauliType) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for (i, s) in self.stabilisers.iter().enumerate() {
            if s.ptype == ptype {
                for q in s.op.part(ptype).ones() {
                    out[q].push(i);
                }
            }
        }
        out
    }

    /// Mean weight of the stabiliser generators.
    pub fn mean_stabiliser_weight(&self) -> f64 {
        let total: usize = self.stabilisers.iter().map(|s| s.op.weight()).sum();
        total as f64 / self.stabilisers.len() as f64
    }

    /// Structured text export: parameters, gauge ops, stabilisers and
    /// logicals as index lists.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "n {}\nk {}\ng {}\nr {}", self.n, self.k, self.g, self.r).unwrap();
        let join = |v: &mut dyn Iterator<Item = usize>| v.map(|q| q.to_string()).collect::<Vec<_>>().join(" ");
        for (i, op) in self.gauge_ops.iter().enumerate() {
            let lab = op.label.map_or("-".to_string(), |l| l.to_string());
            writeln!(out, "gauge {i} {:?} {lab} {}", op.ptype, join(&mut op.qubits.iter().copied())).unwrap();
        }
        for (i, s) in self.stabilisers.iter().enumerate() {
            writeln!(
                out,
                "stabiliser {i} {:?} factors {} support {}",
                s.ptype,
                join(&mut s.factors.iter().copied()),
                join(&mut s.op.part(s.ptype).ones())
            )
            .unwrap();
        }
        for (name, ls) in [("logical_x", &self.bare_logicals_x), ("logical_z", &self.bare_logicals_z)] {
            for (i, l) in ls.iter().enumerate() {
                let part = if name == "logical_x" { &l.x } else { &l.z };
                writeln!(out, "{name} {i} {}", join(&mut part.ones())).unwrap();
            }
        }
        out
    }
}

/// Builds the subsystem code of a coloured tessellation.
pub fn build_subsystem_code(t: &Tessellation) -> Result<SubsystemCode, CodeError> {
    let n = t.num_vertices() + t.num_edges();
    let mut gauge_ops = Vec::with_capacity(t.corners.len() + t.boundary.len());
    for (c, corner) in t.corners.iter().enumerate() {
        let ptype = PauliType::from_colour(corner.colour);
        let qubits = t.triangle_qubits(c).to_vec();
        gauge_ops.push(GaugeOp {
            ptype,
            op: PauliOperator::of_type(ptype, n, qubits.iter().copied()),
            qubits,
            label: corner.label,
            corner: Some(c as u32),
            face: Some(corner.face),
            vertex: Some(corner.vertex),
            boundary: None,
        });
    }
    for b in &t.boundary {
        let ptype = PauliType::from_colour(b.colour);
        let qubits = vec![t.vertex_qubit(b.vertex), t.edge_qubit(b.edge)];
        gauge_ops.push(GaugeOp {
            ptype,
            op: PauliOperator::of_type(ptype, n, qubits.iter().copied()),
            qubits,
            label: Some(b.label),
            corner: None,
            face: None,
            vertex: Some(b.vertex),
            boundary: Some(b.side),
        });
    }
    // Adjacent corners in a face share exactly one edge qubit; their types
    // must differ.
    for f in &t.faces {
        for i in 0..f.len() {
            let a = f[i] as usize;
            let b = f[(i + 1) % f.len()] as usize;
            if t.corners[a].colour == t.corners[b].colour {
                return Err(CodeError::ColouringInconsistent(a, b));
            }
        }
    }
    let mut stabilisers = Vec::new();
    for (fi, f) in t.faces.iter().enumerate() {
        for ptype in [PauliType::Z, PauliType::X] {
            let factors: Vec<usize> = f.iter().map(|&c| c as usize).filter(|&c| gauge_ops[c].ptype == ptype).collect();
            if factors.is_empty() {
                continue;
            }
            let mut op = PauliOperator::identity(n);
            for &g in &factors {
                op.mul_assign(&gauge_ops[g].op);
            }
            stabilisers.push(Stabiliser {
                ptype,
                op,
                factors,
                face: Some(fi as u32),
            });
        }
    }
    for i in t.corners.len()..gauge_ops.len() {
        stabilisers.push(Stabiliser {
            ptype: gauge_ops[i].ptype,
            op: gauge_ops[i].op.clone(),
            factors: vec![i],
            face: None,
        });
    }
    let edge_qubits = (0..t.num_edges()).map(|e| t.edge_qubit(e as u32)).collect();
    finish_code(n, gauge_ops, stabilisers, edge_qubits, t.is_closed())
}

/// Checks the commutation invariants, computes `r`, `g`, `k` and the bare
/// logicals, and assembles the code.
pub fn finish_code(n: usize, gauge_ops: Vec<GaugeOp>, stabilisers: Vec<Stabiliser>, edge_qubits: Vec<usize>, closed: bool) -> Result<SubsystemCode, CodeError> {
    let by_qubit = qubit_incidence(n, &gauge_ops);
    for (si, s) in stabilisers.iter().enumerate() {
        let mut prod = PauliOperator::identity(n);
        for &f in &s.factors {
            prod.mul_assign(&gauge_ops[f].op);
        }
        if prod != s.op {
            return Err(CodeError::CommutationFailure(format!("stabiliser {si} is not the product of its factors")));
        }
        let support: Vec<usize> = s.op.x.ones().chain(s.op.z.ones()).collect();
        let mut near: Vec<usize> = support.iter().flat_map(|&q| by_qubit[q].iter().copied()).collect();
        near.sort_unstable();
        near.dedup();
        for g in near {
            if !s.op.commutes(&gauge_ops[g].op) {
                return Err(CodeError::CommutationFailure(format!("stabiliser {si} and gauge operator {g}")));
            }
        }
    }
    for ptype in [PauliType::X, PauliType::Z] {
        let mut count = vec![0u8; n];
        for s in stabilisers.iter().filter(|s| s.ptype == ptype) {
            for q in s.op.part(ptype).ones() {
                count[q] += 1;
                if count[q] > 2 {
                    return Err(CodeError::TooManyStabilisers(ptype));
                }
            }
        }
    }
    let rows = |ptype: PauliType| -> Vec<BitVec> { gauge_ops.iter().filter(|g| g.ptype == ptype).map(|g| g.op.part(ptype).clone()).collect() };
    let gx = rows(PauliType::X);
    let gz = rows(PauliType::Z);
    let gx_ids: Vec<usize> = (0..gauge_ops.len()).filter(|&i| gauge_ops[i].ptype == PauliType::X).collect();
    let mut z_pos = vec![usize::MAX; gauge_ops.len()];
    let mut nz = 0;
    for (i, g) in gauge_ops.iter().enumerate() {
        if g.ptype == PauliType::Z {
            z_pos[i] = nz;
            nz += 1;
        }
    }
    // Commutation matrix between X and Z gauge operators, built sparsely.
    let pairing: Vec<BitVec> = gx_ids
        .iter()
        .map(|&xi| {
            let mut row = BitVec::zeros(nz);
            let mut seen: Vec<usize> = gauge_ops[xi].qubits.iter().flat_map(|&q| by_qubit[q].iter().copied()).collect();
            seen.sort_unstable();
            seen.dedup();
            for zi in seen {
                if gauge_ops[zi].ptype == PauliType::Z && !gauge_ops[xi].op.commutes(&gauge_ops[zi].op) {
                    row.set(z_pos[zi], true);
                }
            }
            row
        })
        .collect();
    let g = gf2::rank(&pairing);
    let rank_gx = gf2::rank(&gx);
    let rank_gz = gf2::rank(&gz);
    let r = rank_gx + rank_gz - 2 * g;
    let sx: Vec<BitVec> = stabilisers.iter().filter(|s| s.ptype == PauliType::X).map(|s| s.op.x.clone()).collect();
    let sz: Vec<BitVec> = stabilisers.iter().filter(|s| s.ptype == PauliType::Z).map(|s| s.op.z.clone()).collect();
    let listed = gf2::rank(&sx) + gf2::rank(&sz);
    if listed != r {
        return Err(CodeError::RankInconsistency(format!(
            "listed stabilisers have rank {listed}, centre has rank {r}"
        )));
    }
    let k = n.checked_sub(r + g).ok_or_else(|| CodeError::RankInconsistency("r + g exceeds n".into()))?;
    let lx = gf2::quotient_basis(&sx, &gf2::kernel(&gz, n), n);
    let lz = gf2::quotient_basis(&sz, &gf2::kernel(&gx, n), n);
    if lx.len() != k || lz.len() != k {
        return Err(CodeError::RankInconsistency(format!(
            "found {} X and {} Z bare logicals for k = {k}",
            lx.len(),
            lz.len()
        )));
    }
    let lz = symplectic_pair(&lx, lz)?;
    Ok(SubsystemCode {
        n,
        bare_logicals_x: lx.into_iter().map(|x| PauliOperator { x, z: BitVec::zeros(n) }).collect(),
        bare_logicals_z: lz.into_iter().map(|z| PauliOperator { x: BitVec::zeros(n), z }).collect(),
        gauge_ops,
        stabilisers,
        k,
        g,
        r,
        edge_qubits,
        closed,
    })
}

fn qubit_incidence(n: usize, gauge_ops: &[GaugeOp]) -> Vec<Vec<usize>> {
    let mut by_qubit = vec![Vec::new(); n];
    for (i, g) in gauge_ops.iter().enumerate() {
        for &q in &g.qubits {
            by_qubit[q].push(i);
        }
    }
    by_qubit
}

/// Rewrites the Z basis so that `x_i · z_j = δ_ij`.
fn symplectic_pair(lx: &[BitVec], lz: Vec<BitVec>) -> Result<Vec<BitVec>, CodeError> {
    let k = lx.len();
    if k == 0 {
        return Ok(lz);
    }
    let m: Vec<BitVec> = (0..k).map(|i| BitVec::from_indices(k, (0..k).filter(|&j| lx[i].dot(&lz[j])))).collect();
    let inv = gf2::invert(&m).ok_or_else(|| CodeError::RankInconsistency("logical pairing is degenerate".into()))?;
    // New z_j = Σ_l inv[l][j] z_l.
    let n = lz[0].len();
    Ok((0..k)
        .map(|j| {
            let mut acc = BitVec::zeros(n);
            for (l, row) in inv.iter().enumerate() {
                if row.get(j) {
                    acc.xor_assign(&lz[l]);
                }
            }
            acc
        })
        .collect())
}

/// Space-like matching graph of one stabiliser type: one node per
/// stabiliser of that type (plus one boundary node when some qubit touches
/// a single stabiliser) and one edge per qubit.
#[derive(Clone, Debug)]
pub struct SpaceGraph {
    pub ptype: PauliType,
    pub num_nodes: usize,
    pub boundary: Option<usize>,
    /// `(u, v, qubit)` for every qubit touching at least one stabiliser.
    pub edges: Vec<(usize, usize, usize)>,
    /// Stabiliser index of each non-boundary node.
    pub stabiliser_of_node: Vec<usize>,
}

impl SpaceGraph {
    pub fn new(code: &SubsystemCode, ptype: PauliType) -> Self {
        let ids = code.stabilisers_of(ptype);
        let mut node_of = vec![usize::MAX; code.stabilisers.len()];
        for (k, &s) in ids.iter().enumerate() {
            node_of[s] = k;
        }
        let inc = code.qubit_stabilisers(ptype);
        let needs_boundary = inc.iter().any(|v| v.len() == 1);
        let boundary = needs_boundary.then_some(ids.len());
        let mut edges = Vec::new();
        for (q, v) in inc.iter().enumerate() {
            match v.as_slice() {
                [a, b] => edges.push((node_of[*a], node_of[*b], q)),
                [a] => edges.push((node_of[*a], boundary.unwrap(), q)),
                _ => {}
            }
        }
        Self {
            ptype,
            num_nodes: ids.len() + usize::from(needs_boundary),
            boundary,
            edges,
            stabiliser_of_node: ids,
        }
    }

    /// Node degrees, counting parallel edges.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.num_nodes];
        for &(u, v, _) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    /// Colour-refinement signature: the multiset of stable node colours.
    /// Isomorphic graphs have equal signatures.
    pub fn refinement_signature(&self) -> Vec<u64> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(u, v, _) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut colour: Vec<u64> = vec![0; self.num_nodes];
        for _ in 0..self.num_nodes.min(32) {
            let mut palette: BTreeMap<(u64, Vec<u64>), u64> = BTreeMap::new();
            let keys: Vec<(u64, Vec<u64>)> = (0..self.num_nodes)
                .map(|u| {
                    let mut nb: Vec<u64> = adj[u].iter().map(|&v| colour[v]).collect();
                    nb.sort_unstable();
                    (colour[u], nb)
                })
                .collect();
            for key in &keys {
                let next = palette.len() as u64;
                palette.entry(key.clone()).or_insert(next);
            }
            let new: Vec<u64> = keys.iter().map(|k| palette[k]).collect();
            let stable = palette.len() == {
                let mut c = colour.clone();
                c.sort_unstable();
                c.dedup();
                c.len()
            };
            colour = new;
            if stable {
                break;
            }
        }
        let mut sig = colour;
        sig.sort_unstable();
        sig
    }
}

type Signature = Vec<u64>;

fn signature_of(logicals: &[PauliOperator], ptype: PauliType, q: usize) -> Signature {
    let words = logicals.len().div_ceil(64).max(1);
    let mut s = vec![0u64; words];
    for (i, l) in logicals.iter().enumerate() {
        if l.part(ptype).get(q) {
            s[i / 64] |= 1 << (i % 64);
        }
    }
    s
}

fn xor_sig(a: &mut Signature, b: &Signature) {
    for (x, y) in a.iter_mut().zip(b) {
        *x ^= *y;
    }
}

/// Length of the shortest cycle in `graph` (restricted to the allowed
/// qubits) whose homology signature is non-zero. Signatures of qubits are
/// membership parities in the given logicals of type `sig_type`.
fn shortest_nontrivial_cycle(graph: &SpaceGraph, logicals: &[PauliOperator], sig_type: PauliType, allowed: Option<&[bool]>) -> Option<usize> {
    let edges: Vec<(usize, usize, Signature)> = graph
        .edges
        .iter()
        .filter(|e| allowed.is_none_or(|a| a[e.2]))
        .map(|&(u, v, q)| (u, v, signature_of(logicals, sig_type, q)))
        .collect();
    let mut adj = vec![Vec::new(); graph.num_nodes];
    for (i, &(u, v, _)) in edges.iter().enumerate() {
        adj[u].push(i);
        adj[v].push(i);
    }
    let words = logicals.len().div_ceil(64).max(1);
    let mut best: Option<usize> = None;
    let mut dist = vec![usize::MAX; graph.num_nodes];
    let mut sig: Vec<Signature> = vec![vec![0; words]; graph.num_nodes];
    let mut parent_edge = vec![usize::MAX; graph.num_nodes];
    for src in 0..graph.num_nodes {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        parent_edge.iter_mut().for_each(|p| *p = usize::MAX);
        dist[src] = 0;
        sig[src].iter_mut().for_each(|w| *w = 0);
        let mut queue = VecDeque::from([src]);
        let mut order = Vec::new();
        while let Some(u) = queue.pop_front() {
            order.push(u);
            if best.is_some_and(|b| 2 * dist[u] >= b) {
                break;
            }
            for &ei in &adj[u] {
                let (a, b, ref s) = edges[ei];
                let v = if a == u { b } else { a };
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    parent_edge[v] = ei;
                    let mut sv = sig[u].clone();
                    xor_sig(&mut sv, s);
                    sig[v] = sv;
                    queue.push_back(v);
                }
            }
        }
        for (ei, (u, v, s)) in edges.iter().enumerate() {
            if dist[*u] == usize::MAX || dist[*v] == usize::MAX || parent_edge[*u] == ei || parent_edge[*v] == ei {
                continue;
            }
            let mut total = sig[*u].clone();
            xor_sig(&mut total, &sig[*v]);
            xor_sig(&mut total, s);
            if total.iter().any(|&w| w != 0) {
                let len = dist[*u] + dist[*v] + 1;
                best = Some(best.map_or(len, |b| b.min(len)));
            }
        }
    }
    best
}

/// Minimum weight of a dressed logical of the given Pauli type.
///
/// A dressed logical of type P is a cycle in the matching graph of the
/// opposite stabiliser type whose crossing parities with the bare logicals
/// of the opposite type are not all zero.
pub fn compute_distance(code: &SubsystemCode, ptype: PauliType) -> Result<usize, CodeError> {
    if code.k == 0 {
        return Err(CodeError::NotClosedSurface);
    }
    let graph = SpaceGraph::new(code, ptype.other());
    shortest_nontrivial_cycle(&graph, code.bare_logicals(ptype.other()), ptype.other(), None).ok_or(CodeError::NotClosedSurface)
}

/// `min(d_X, d_Z)`.
pub fn code_distance(code: &SubsystemCode) -> Result<usize, CodeError> {
    Ok(compute_distance(code, PauliType::X)?.min(compute_distance(code, PauliType::Z)?))
}

/// X distance of the subspace surface code on the same tessellation: the
/// shortest non-trivial cycle of the dual graph, whose edges are the edge
/// qubits of the subsystem X-type matching graph.
pub fn subspace_x_distance(code: &SubsystemCode) -> Result<usize, CodeError> {
    let mut allowed = vec![false; code.n];
    for &q in &code.edge_qubits {
        allowed[q] = true;
    }
    let graph = SpaceGraph::new(code, PauliType::X);
    shortest_nontrivial_cycle(&graph, code.bare_logicals(PauliType::X), PauliType::X, Some(&allowed)).ok_or(CodeError::NotClosedSurface)
}

/// Exhaustive minimum weight of a dressed logical of type `ptype`, by
/// enumerating supports in increasing weight up to `max_weight`.
pub fn distance_exhaustive(code: &SubsystemCode, ptype: PauliType, max_weight: usize) -> Option<usize> {
    let n = code.n;
    let checks: Vec<BitVec> = code
        .stabilisers
        .iter()
        .filter(|s| s.ptype == ptype.other())
        .map(|s| s.op.part(ptype.other()).clone())
        .collect();
    let logicals: Vec<&BitVec> = code.bare_logicals(ptype.other()).iter().map(|l| l.part(ptype.other())).collect();
    for w in 1..=max_weight.min(n) {
        let mut idx: Vec<usize> = (0..w).collect();
        loop {
            let v = BitVec::from_indices(n, idx.iter().copied());
            if checks.iter().all(|c| !c.dot(&v)) && logicals.iter().any(|l| l.dot(&v)) {
                return Some(w);
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }
    None
}

/// Advances `idx` to the next increasing combination of `0..n`.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let w = idx.len();
    for i in (0..w).rev() {
        if idx[i] < n - w + i {
            idx[i] += 1;
            for j in i + 1..w {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Promotes the selected gauge operators to stabilisers.
///
/// Gauge operators that anti-commute with a selected operator leave the
/// gauge group. Each face keeps one stabiliser per type for the product of
/// its remaining triangle operators; a stabiliser whose factors left the
/// gauge group becomes its own single gauge factor.
pub fn gauge_fix_subspace(code: &SubsystemCode, selection: &[usize]) -> Result<SubsystemCode, CodeError> {
    let mut selected = vec![false; code.gauge_ops.len()];
    for &s in selection {
        selected[s] = true;
    }
    let sel: Vec<usize> = (0..code.gauge_ops.len()).filter(|&i| selected[i]).collect();
    let by_qubit = qubit_incidence(code.n, &code.gauge_ops);
    let mut dropped = vec![false; code.gauge_ops.len()];
    for &a in &sel {
        for &q in &code.gauge_ops[a].qubits {
            for &b in &by_qubit[q] {
                if !code.gauge_ops[a].op.commutes(&code.gauge_ops[b].op) {
                    if selected[b] {
                        return Err(CodeError::NonCommutingSelection(a.min(b), a.max(b)));
                    }
                    dropped[b] = true;
                }
            }
        }
    }
    let mut new_index = vec![usize::MAX; code.gauge_ops.len()];
    let mut gauge_ops = Vec::new();
    for (i, g) in code.gauge_ops.iter().enumerate() {
        if !dropped[i] {
            new_index[i] = gauge_ops.len();
            gauge_ops.push(g.clone());
        }
    }
    let mut stabilisers = Vec::new();
    for s in &code.stabilisers {
        if s.factors.iter().any(|&f| dropped[f]) {
            let gi = gauge_ops.len();
            gauge_ops.push(GaugeOp {
                ptype: s.ptype,
                qubits: s.op.part(s.ptype).ones().collect(),
                op: s.op.clone(),
                label: None,
                corner: None,
                face: s.face,
                vertex: None,
                boundary: None,
            });
            stabilisers.push(Stabiliser {
                ptype: s.ptype,
                op: s.op.clone(),
                factors: vec![gi],
                face: s.face,
            });
            continue;
        }
        let mut rest = Vec::new();
        for &f in &s.factors {
            if selected[f] {
                stabilisers.push(Stabiliser {
                    ptype: s.ptype,
                    op: code.gauge_ops[f].op.clone(),
                    factors: vec![new_index[f]],
                    face: s.face,
                });
            } else {
                rest.push(new_index[f]);
            }
        }
        if !rest.is_empty() {
            let mut op = PauliOperator::identity(code.n);
            for &f in &rest {
                op.mul_assign(&gauge_ops[f].op);
            }
            stabilisers.push(Stabiliser {
                ptype: s.ptype,
                op,
                factors: rest,
                face: s.face,
            });
        }
    }
    finish_code(code.n, gauge_ops, stabilisers, code.edge_qubits.clone(), code.closed)
}

/// Failure test for a residual error of one Pauli type: it fails iff it
/// anti-commutes with a bare logical of the opposite type.
pub fn judge_failure(code: &SubsystemCode, residual: &PauliOperator, ptype: PauliType) -> Result<bool, CodeError> {
    let part = residual.part(ptype);
    let other = ptype.other();
    for s in code.stabilisers.iter().filter(|s| s.ptype == other) {
        if s.op.part(other).dot(part) {
            return Err(CodeError::SyndromeNotCleared);
        }
    }
    Ok(code.bare_logicals(other).iter().any(|l| l.part(other).dot(part)))
}

/// CSS Tanner graph: checks as qubit lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TannerGraph {
    pub num_qubits: usize,
    pub x_checks: Vec<Vec<usize>>,
    pub z_checks: Vec<Vec<usize>>,
}

impl TannerGraph {
    pub fn from_code_stabilisers(code: &SubsystemCode) -> Self {
        let collect = |t: PauliType| {
            code.stabilisers
                .iter()
                .filter(|s| s.ptype == t)
                .map(|s| s.op.part(t).ones().collect())
                .collect()
        };
        Self {
            num_qubits: code.n,
            x_checks: collect(PauliType::X),
            z_checks: collect(PauliType::Z),
        }
    }

    /// True iff every X check overlaps every Z check evenly.
    pub fn is_commuting(&self) -> bool {
        let xs: Vec<BitVec> = self.x_checks.iter().map(|c| BitVec::from_indices(self.num_qubits, c.iter().copied())).collect();
        self.z_checks.iter().all(|z| {
            let zv = BitVec::from_indices(self.num_qubits, z.iter().copied());
            xs.iter().all(|x| !x.dot(&zv))
        })
    }
}

/// Merges an independent local cut-set of X checks around a Z check.
///
/// Returns the merged Tanner graph (the cut-set checks replaced by their
/// sum) and the Z-type gauge operators on all but one of the connected
/// components that the cut-set leaves inside the Z check's support.
pub fn tanner_merge(t: &TannerGraph, z_check: usize, cut_set: &[usize]) -> Result<(TannerGraph, Vec<PauliOperator>), CodeError> {
    let n = t.num_qubits;
    let support = &t.z_checks[z_check];
    let in_support: Vec<bool> = (0..n).map(|q| support.contains(&q)).collect();
    let local: Vec<usize> = (0..t.x_checks.len()).filter(|&c| t.x_checks[c].iter().any(|&q| in_support[q])).collect();
    if cut_set.iter().any(|c| !local.contains(c)) {
        return Err(CodeError::NotACutSet);
    }
    let vecs: Vec<BitVec> = cut_set.iter().map(|&c| BitVec::from_indices(n, t.x_checks[c].iter().copied())).collect();
    if gf2::rank(&vecs) != cut_set.len() {
        return Err(CodeError::NotIndependent);
    }
    if cut_set.len() <= 1 {
        return Ok((t.clone(), Vec::new()));
    }
    // Components of the support qubits connected through the remaining
    // local X checks.
    let mut comp = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut basis = RowBasis::new(n);
    for &q0 in support {
        if comp[q0] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![q0];
        comp[q0] = id;
        let mut i = 0;
        while i < members.len() {
            let q = members[i];
            i += 1;
            for &c in local.iter().filter(|c| !cut_set.contains(c)) {
                if t.x_checks[c].contains(&q) {
                    for &p in &t.x_checks[c] {
                        if in_support[p] && comp[p] == usize::MAX {
                            comp[p] = id;
                            members.push(p);
                        }
                    }
                }
            }
        }
        components.push(members);
    }
    if components.len() < 2 {
        return Err(CodeError::NotACutSet);
    }
    let mut merged = BitVec::zeros(n);
    for v in &vecs {
        merged.xor_assign(v);
    }
    let mut x_checks: Vec<Vec<usize>> = (0..t.x_checks.len()).filter(|c| !cut_set.contains(c)).map(|c| t.x_checks[c].clone()).collect();
    x_checks.push(merged.ones().collect());
    let mut gauge = Vec::new();
    for members in &components[..components.len() - 1] {
        let op = PauliOperator::of_type(PauliType::Z, n, members.iter().copied());
        if basis.insert(op.z.clone()) {
            gauge.push(op);
        }
    }
    Ok((
        TannerGraph {
            num_qubits: n,
            x_checks,
            z_checks: t.z_checks.clone(),
        },
        gauge,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tessellation::{build_planar, build_toric};

    #[test]
    fn toric_parameters() {
        for l in 2..=4 {
            let c = build_subsystem_code(&build_toric(l).unwrap()).unwrap();
            assert_eq!((c.n, c.k, c.g, c.r), (3 * l * l, 2, l * l, 2 * (l * l - 1)));
            assert_eq!(code_distance(&c).unwrap(), l);
        }
    }

    #[test]
    fn planar_parameters() {
        for l in 2..=4 {
            let c = build_subsystem_code(&build_planar(l).unwrap()).unwrap();
            assert_eq!((c.n, c.k), (3 * l * l - 2 * l, 1));
            assert_eq!(code_distance(&c).unwrap(), l);
        }
    }
}

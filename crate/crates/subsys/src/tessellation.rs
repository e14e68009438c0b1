//! Labelled combinatorial tessellations.
//!
//! Corners are the primitive objects. On a closed surface a corner carries
//! two permutations: ρ moves to the next corner clockwise around its face and
//! σ moves to the next corner clockwise around its vertex. Faces, vertices
//! and edges are the orbits of ⟨ρ⟩, ⟨σ⟩ and ⟨ρσ⟩. Each corner `c` knows its
//! forward edge (from its vertex to the vertex of `ρ·c`) and its backward
//! edge (the forward edge of `ρ⁻¹·c`); these are the two edge qubits of the
//! triangle operator at `c`.
//!
//! Labels are elements of `Z_4` with `label(ρc) = label(c) + 1` and
//! `label(σc) = label(c) + 1`. On square lattices label 0, 1, 2, 3 are the
//! NW, NE, SE and SW corners of a face. The colour of a corner is its label
//! modulo 2 (0 is Z type, 1 is X type) or, for colourable but unschedulable
//! tessellations, the `Z_2` homomorphism value.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::symmetry::TessellationGroup;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TessellationError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("group is not colourable")]
    NotColourable,
    #[error("unsupported vertex degree {0}; only degree 4 is supported")]
    UnsupportedVertexDegree(usize),
    #[error("tessellation is not labelled")]
    NotLabelled,
    #[error("inconsistent combinatorics: {0}")]
    Inconsistent(String),
}

/// Which construction produced a tessellation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TessellationKind {
    Toric { l: usize },
    Planar { l: usize },
    Group { r: usize, s: usize, order: usize },
    Dual,
    SemiHyperbolic { base_faces: usize, l: usize },
}

/// A corner: incidence of a face and a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Corner {
    pub face: u32,
    pub vertex: u32,
    pub fwd_edge: u32,
    pub back_edge: u32,
    pub label: Option<u8>,
    pub colour: u8,
}

/// An edge between two vertices separating two faces. On open patches a
/// missing face is `None`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeRecord {
    pub vertex_a: u32,
    pub vertex_b: u32,
    pub face_left: Option<u32>,
    pub face_right: Option<u32>,
}

/// Compass side of a planar patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    North,
    East,
    South,
    West,
}

/// Truncated triangle of a missing outer face on a planar patch: a weight-2
/// stabiliser on one vertex qubit and one edge qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryCheck {
    pub vertex: u32,
    pub edge: u32,
    /// Label of the outer-face corner this check truncates.
    pub label: u8,
    pub colour: u8,
    pub side: Side,
}

/// Labelled tessellation with derived faces, vertices and edges.
#[derive(Clone, Debug)]
pub struct Tessellation {
    pub kind: TessellationKind,
    pub corners: Vec<Corner>,
    /// Corner cycles of faces in ρ order.
    pub faces: Vec<Vec<u32>>,
    /// Corners at each vertex (σ order on closed surfaces).
    pub vertices: Vec<Vec<u32>>,
    pub edges: Vec<EdgeRecord>,
    pub rho: Option<Vec<u32>>,
    pub sigma: Option<Vec<u32>>,
    pub boundary: Vec<BoundaryCheck>,
    /// Grid coordinates `(column, row)` of faces for square lattices.
    pub face_coords: Option<Vec<(i32, i32)>>,
}

impl Tessellation {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn is_closed(&self) -> bool {
        self.rho.is_some()
    }

    pub fn is_labelled(&self) -> bool {
        self.corners.iter().all(|c| c.label.is_some())
    }

    /// `|F| − |E| + |V|`.
    pub fn euler_characteristic(&self) -> i64 {
        self.faces.len() as i64 - self.edges.len() as i64 + self.vertices.len() as i64
    }

    /// Qubit index of a vertex.
    pub fn vertex_qubit(&self, v: u32) -> usize {
        v as usize
    }

    /// Qubit index of an edge.
    pub fn edge_qubit(&self, e: u32) -> usize {
        self.vertices.len() + e as usize
    }

    /// Qubits of the triangle operator at a corner: vertex, forward edge,
    /// backward edge.
    pub fn triangle_qubits(&self, c: usize) -> [usize; 3] {
        let k = &self.corners[c];
        [self.vertex_qubit(k.vertex), self.edge_qubit(k.fwd_edge), self.edge_qubit(k.back_edge)]
    }

    /// Builds the tessellation of a closed oriented map from its corner
    /// permutations. Faces and vertices are numbered in order of their
    /// smallest corner; cycles start at that corner. Labels, when requested,
    /// are assigned with corner 0 carrying label `label0`.
    pub fn from_corner_map(kind: TessellationKind, rho: Vec<u32>, sigma: Vec<u32>, labels: LabelMode) -> Result<Self, TessellationError> {
        let n = rho.len();
        if sigma.len() != n || n == 0 {
            return Err(TessellationError::Inconsistent("permutation sizes".into()));
        }
        let orbits = |perm: &[u32]| -> (Vec<u32>, Vec<Vec<u32>>) {
            let mut id = vec![u32::MAX; n];
            let mut cycles = Vec::new();
            for start in 0..n {
                if id[start] != u32::MAX {
                    continue;
                }
                let k = cycles.len() as u32;
                let mut cyc = Vec::new();
                let mut c = start;
                while id[c] == u32::MAX {
                    id[c] = k;
                    cyc.push(c as u32);
                    c = perm[c] as usize;
                }
                cycles.push(cyc);
            }
            (id, cycles)
        };
        let (face_of, faces) = orbits(&rho);
        let (vertex_of, vertices) = orbits(&sigma);
        let rho_sigma: Vec<u32> = (0..n).map(|c| sigma[rho[c] as usize]).collect();
        let (edge_of, edge_cycles) = orbits(&rho_sigma);
        if edge_cycles.iter().any(|e| e.len() != 2) {
            return Err(TessellationError::Inconsistent("(ρσ)² ≠ e".into()));
        }
        let mut rho_inv = vec![0u32; n];
        for c in 0..n {
            rho_inv[rho[c] as usize] = c as u32;
        }
        let edges = edge_cycles
            .iter()
            .map(|pair| {
                let c = pair[0] as usize;
                let d = pair[1] as usize;
                EdgeRecord {
                    vertex_a: vertex_of[c],
                    vertex_b: vertex_of[rho[c] as usize],
                    face_left: Some(face_of[c]),
                    face_right: Some(face_of[d]),
                }
            })
            .collect();
        let label_values: Option<Vec<u8>> = match labels {
            LabelMode::None => None,
            LabelMode::Cyclic4 => {
                let l = cyclic_corner_labels(&rho, &sigma, 4).ok_or(TessellationError::NotLabelled)?;
                Some(l)
            }
            LabelMode::Given(v) => {
                if v.len() != n {
                    return Err(TessellationError::Inconsistent("label count".into()));
                }
                Some(v)
            }
        };
        let colours: Vec<u8> = match &label_values {
            Some(l) => l.iter().map(|x| x % 2).collect(),
            None => cyclic_corner_labels(&rho, &sigma, 2).ok_or(TessellationError::NotColourable)?,
        };
        let corners = (0..n)
            .map(|c| Corner {
                face: face_of[c],
                vertex: vertex_of[c],
                fwd_edge: edge_of[c],
                back_edge: edge_of[rho_inv[c] as usize],
                label: label_values.as_ref().map(|l| l[c]),
                colour: colours[c],
            })
            .collect();
        Ok(Self {
            kind,
            corners,
            faces,
            vertices,
            edges,
            rho: Some(rho),
            sigma: Some(sigma),
            boundary: Vec::new(),
            face_coords: None,
        })
    }

    /// Text export: counts, then one line per face, vertex, edge and corner.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "faces {}", self.faces.len()).unwrap();
        writeln!(out, "vertices {}", self.vertices.len()).unwrap();
        writeln!(out, "edges {}", self.edges.len()).unwrap();
        writeln!(out, "corners {}", self.corners.len()).unwrap();
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        for (i, f) in self.faces.iter().enumerate() {
            writeln!(out, "face {i} {}", join(f)).unwrap();
        }
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(out, "vertex {i} {}", join(v)).unwrap();
        }
        let opt = |f: Option<u32>| f.map_or("-".to_string(), |x| x.to_string());
        for (i, e) in self.edges.iter().enumerate() {
            writeln!(out, "edge {i} {} {} {} {}", e.vertex_a, e.vertex_b, opt(e.face_left), opt(e.face_right)).unwrap();
        }
        for (i, c) in self.corners.iter().enumerate() {
            let lab = c.label.map_or("-".to_string(), |l| l.to_string());
            writeln!(out, "corner {i} {} {} {} {} {lab} {}", c.face, c.vertex, c.fwd_edge, c.back_edge, c.colour).unwrap();
        }
        for b in &self.boundary {
            writeln!(out, "boundary {} {} {} {} {:?}", b.vertex, b.edge, b.label, b.colour, b.side).unwrap();
        }
        out
    }
}

/// How corner labels are produced by [`Tessellation::from_corner_map`].
#[derive(Clone, Debug)]
pub enum LabelMode {
    /// Colours only (the `Z_2` homomorphism).
    None,
    /// The `Z_4` labelling with corner 0 labelled 0.
    Cyclic4,
    /// Explicit labels.
    Given(Vec<u8>),
}

/// Labels in `Z_n` with `label(ρc) = label(σc) = label(c) + 1` and corner 0
/// labelled 0, if consistent on every connected component.
pub fn cyclic_corner_labels(rho: &[u32], sigma: &[u32], n: u8) -> Option<Vec<u8>> {
    let size = rho.len();
    let mut label: Vec<Option<u8>> = vec![None; size];
    for start in 0..size {
        if label[start].is_some() {
            continue;
        }
        label[start] = Some(0);
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            let want = (label[c].unwrap() + 1) % n;
            for &d in &[rho[c] as usize, sigma[c] as usize] {
                match label[d] {
                    None => {
                        label[d] = Some(want);
                        stack.push(d);
                    }
                    Some(v) if v != want => return None,
                    Some(_) => {}
                }
            }
        }
    }
    label.into_iter().collect()
}

/// Closed `{4,4}` toric lattice with `L × L` faces.
pub fn build_toric(l: usize) -> Result<Tessellation, TessellationError> {
    if l < 2 {
        return Err(TessellationError::InvalidParameter(format!("toric size L={l} must be at least 2")));
    }
    let g = TessellationGroup::toric(l).map_err(|e| TessellationError::Inconsistent(e.to_string()))?;
    let mut t = Tessellation::from_corner_map(
        TessellationKind::Toric { l },
        g.rho.as_slice().to_vec(),
        g.sigma.as_slice().to_vec(),
        LabelMode::Cyclic4,
    )?;
    t.face_coords = Some((0..l * l).map(|f| ((f % l) as i32, (f / l) as i32)).collect());
    Ok(t)
}

/// Tessellation of a closed surface from its rotation group.
pub fn from_group(g: &TessellationGroup) -> Result<Tessellation, TessellationError> {
    if g.s != 4 {
        return Err(TessellationError::UnsupportedVertexDegree(g.s));
    }
    if !g.is_colourable() {
        return Err(TessellationError::NotColourable);
    }
    let labels = if g.is_schedulable() { LabelMode::Cyclic4 } else { LabelMode::None };
    Tessellation::from_corner_map(
        TessellationKind::Group {
            r: g.r,
            s: g.s,
            order: g.order(),
        },
        g.rho.as_slice().to_vec(),
        g.sigma.as_slice().to_vec(),
        labels,
    )
}

/// Dual tessellation: faces and vertices exchange roles, labels are kept.
pub fn dual(t: &Tessellation) -> Result<Tessellation, TessellationError> {
    let (Some(rho), Some(sigma)) = (&t.rho, &t.sigma) else {
        return Err(TessellationError::InvalidParameter("dual requires a closed surface".into()));
    };
    let labels = if t.is_labelled() {
        LabelMode::Given(t.corners.iter().map(|c| c.label.unwrap()).collect())
    } else {
        LabelMode::None
    };
    Tessellation::from_corner_map(TessellationKind::Dual, sigma.clone(), rho.clone(), labels)
}

/// Open `{4,4}` patch with an `L × L` grid of vertices and one weight-2
/// boundary stabiliser on every boundary edge.
///
/// Z-type boundary checks sit on the north and south sides and X-type ones
/// on the east and west sides.
pub fn build_planar(l: usize) -> Result<Tessellation, TessellationError> {
    if l < 2 {
        return Err(TessellationError::InvalidParameter(format!("planar size L={l} must be at least 2")));
    }
    let lf = l - 1;
    let vid = |i: usize, j: usize| (j * l + i) as u32;
    let nh = lf * l;
    let hid = |i: usize, j: usize| (j * lf + i) as u32;
    let vvid = |i: usize, j: usize| (nh + j * l + i) as u32;
    let num_edges = nh + l * lf;
    let mut edges = vec![
        EdgeRecord {
            vertex_a: 0,
            vertex_b: 0,
            face_left: None,
            face_right: None
        };
        num_edges
    ];
    for j in 0..l {
        for i in 0..lf {
            edges[hid(i, j) as usize] = EdgeRecord {
                vertex_a: vid(i, j),
                vertex_b: vid(i + 1, j),
                face_left: (j < lf).then(|| (j * lf + i) as u32),
                face_right: (j > 0).then(|| ((j - 1) * lf + i) as u32),
            };
        }
    }
    for j in 0..lf {
        for i in 0..l {
            edges[vvid(i, j) as usize] = EdgeRecord {
                vertex_a: vid(i, j),
                vertex_b: vid(i, j + 1),
                face_left: (i > 0).then(|| (j * lf + i - 1) as u32),
                face_right: (i < lf).then(|| (j * lf + i) as u32),
            };
        }
    }
    let mut corners = Vec::new();
    let mut faces = Vec::new();
    let mut vertices: Vec<Vec<u32>> = vec![Vec::new(); l * l];
    let mut coords = Vec::new();
    for j in 0..lf {
        for i in 0..lf {
            let f = faces.len() as u32;
            let n_e = hid(i, j + 1);
            let s_e = hid(i, j);
            let w_e = vvid(i, j);
            let e_e = vvid(i + 1, j);
            let spec = [
                (vid(i, j + 1), n_e, w_e),
                (vid(i + 1, j + 1), e_e, n_e),
                (vid(i + 1, j), s_e, e_e),
                (vid(i, j), w_e, s_e),
            ];
            let mut cyc = Vec::new();
            for (lab, &(v, fwd, back)) in spec.iter().enumerate() {
                let c = corners.len() as u32;
                corners.push(Corner {
                    face: f,
                    vertex: v,
                    fwd_edge: fwd,
                    back_edge: back,
                    label: Some(lab as u8),
                    colour: (lab % 2) as u8,
                });
                vertices[v as usize].push(c);
                cyc.push(c);
            }
            faces.push(cyc);
            coords.push((i as i32, j as i32));
        }
    }
    let mut boundary = Vec::new();
    for i in 0..lf {
        boundary.push(BoundaryCheck {
            vertex: vid(i + 1, lf),
            edge: hid(i, lf),
            label: 2,
            colour: 0,
            side: Side::North,
        });
        boundary.push(BoundaryCheck {
            vertex: vid(i, 0),
            edge: hid(i, 0),
            label: 0,
            colour: 0,
            side: Side::South,
        });
    }
    for j in 0..lf {
        boundary.push(BoundaryCheck {
            vertex: vid(0, j + 1),
            edge: vvid(0, j),
            label: 1,
            colour: 1,
            side: Side::West,
        });
        boundary.push(BoundaryCheck {
            vertex: vid(lf, j),
            edge: vvid(lf, j),
            label: 3,
            colour: 1,
            side: Side::East,
        });
    }
    Ok(Tessellation {
        kind: TessellationKind::Planar { l },
        corners,
        faces,
        vertices,
        edges,
        rho: None,
        sigma: None,
        boundary,
        face_coords: Some(coords),
    })
}

/// Builds a closed map from faces given as clockwise cycles of
/// `(vertex, forward-edge key)`. Every edge key must occur exactly twice.
fn map_from_faces(faces: &[Vec<(u32, (u32, u32))>]) -> Result<(Vec<u32>, Vec<u32>), TessellationError> {
    let mut offsets = Vec::with_capacity(faces.len());
    let mut n = 0usize;
    for f in faces {
        offsets.push(n);
        n += f.len();
    }
    let mut rho = vec![0u32; n];
    let mut by_edge: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    let mut vert = vec![0u32; n];
    let mut fwd = vec![(0u32, 0u32); n];
    for (fi, f) in faces.iter().enumerate() {
        for (k, &(v, e)) in f.iter().enumerate() {
            let c = offsets[fi] + k;
            rho[c] = (offsets[fi] + (k + 1) % f.len()) as u32;
            vert[c] = v;
            fwd[c] = e;
            by_edge.entry(e).or_default().push(c);
        }
    }
    if by_edge.values().any(|v| v.len() != 2) {
        return Err(TessellationError::Inconsistent("edge does not have two sides".into()));
    }
    let mut rho_inv = vec![0u32; n];
    for c in 0..n {
        rho_inv[rho[c] as usize] = c as u32;
    }
    let mut sigma = vec![0u32; n];
    for c in 0..n {
        let prev = rho_inv[c] as usize;
        let sides = &by_edge[&fwd[prev]];
        let other = if sides[0] == prev { sides[1] } else { sides[0] };
        if vert[other] != vert[c] {
            return Err(TessellationError::Inconsistent("faces are not consistently oriented".into()));
        }
        sigma[c] = other as u32;
    }
    Ok((rho, sigma))
}

/// Semi-hyperbolic refinement of a labelled `{4c,4}` tessellation: take the
/// dual, tile each square face with an `l × l` grid, and dualise back.
pub fn refine_semi_hyperbolic(base: &Tessellation, l: usize) -> Result<Tessellation, TessellationError> {
    if l == 0 {
        return Err(TessellationError::InvalidParameter("refinement parameter l must be at least 1".into()));
    }
    if !base.is_labelled() {
        return Err(TessellationError::NotLabelled);
    }
    if base.vertices.iter().any(|v| v.len() != 4) {
        return Err(TessellationError::UnsupportedVertexDegree(
            base.vertices.iter().map(Vec::len).find(|&d| d != 4).unwrap(),
        ));
    }
    if l == 1 {
        return Ok(base.clone());
    }
    let sq = dual(base)?;
    let nv = sq.vertices.len() as u32;
    let ne = sq.edges.len() as u32;
    let li = l as u32;
    let rho = sq.rho.as_ref().unwrap();
    let sigma = sq.sigma.as_ref().unwrap();
    // Canonical corner of each edge: the smaller of the two corners whose
    // forward edge it is.
    let mut canon = vec![u32::MAX; ne as usize];
    for (c, k) in sq.corners.iter().enumerate() {
        let e = k.fwd_edge as usize;
        canon[e] = canon[e].min(c as u32);
    }
    let edge_point = |c: u32, t: u32| -> u32 {
        let e = sq.corners[c as usize].fwd_edge;
        let tc = if canon[e as usize] == c { t } else { li - t };
        nv + e * (li - 1) + (tc - 1)
    };
    let interior_base = nv + ne * (li - 1);
    let mut small_faces: Vec<Vec<(u32, (u32, u32))>> = Vec::new();
    let mut anchor = Vec::new();
    for (fi, f) in sq.faces.iter().enumerate() {
        if f.len() != 4 {
            return Err(TessellationError::Inconsistent("dual of the base must have square faces".into()));
        }
        let [c0, c1, c2, c3] = [f[0], f[1], f[2], f[3]];
        let point = |a: u32, b: u32| -> u32 {
            match (a, b) {
                (0, b) if b == li => sq.corners[c0 as usize].vertex,
                (a, b) if a == li && b == li => sq.corners[c1 as usize].vertex,
                (a, 0) if a == li => sq.corners[c2 as usize].vertex,
                (0, 0) => sq.corners[c3 as usize].vertex,
                (a, b) if b == li => edge_point(c0, a),
                (a, b) if a == li => edge_point(c1, li - b),
                (a, 0) => edge_point(c2, li - a),
                (0, b) => edge_point(c3, b),
                (a, b) => interior_base + fi as u32 * (li - 1) * (li - 1) + (a - 1) * (li - 1) + (b - 1),
            }
        };
        for a in 0..li {
            for b in 0..li {
                let pts = [point(a, b + 1), point(a + 1, b + 1), point(a + 1, b), point(a, b)];
                let key = |x: u32, y: u32| (x.min(y), x.max(y));
                let cyc = (0..4).map(|k| (pts[k], key(pts[k], pts[(k + 1) % 4]))).collect();
                if a == 0 && b == li - 1 {
                    anchor.push((small_faces.len(), c0));
                }
                small_faces.push(cyc);
            }
        }
    }
    let (rrho, rsigma) = map_from_faces(&small_faces)?;
    let raw = cyclic_corner_labels(&rrho, &rsigma, 4).ok_or_else(|| TessellationError::Inconsistent("refined square tiling admits no labelling".into()))?;
    // Small face `k` owns corners 4k..4k+4 in NW, NE, SE, SW order.
    let base_label = |c: u32| sq.corners[c as usize].label.unwrap();
    let (k0, c0) = anchor[0];
    let shift = (base_label(c0) + 4 - raw[4 * k0]) % 4;
    let labels: Vec<u8> = raw.iter().map(|&x| (x + shift) % 4).collect();
    for &(k, c) in &anchor {
        if labels[4 * k] != base_label(c) {
            return Err(TessellationError::Inconsistent("refined labels disagree with the base labels".into()));
        }
    }
    let _ = (rho, sigma);
    let refined_sq = Tessellation::from_corner_map(TessellationKind::Dual, rrho, rsigma, LabelMode::Given(labels))?;
    let mut out = dual(&refined_sq)?;
    out.kind = TessellationKind::SemiHyperbolic {
        base_faces: base.faces.len(),
        l,
    };
    Ok(out)
}

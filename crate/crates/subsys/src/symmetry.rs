//! Rotation groups of closed `{r,s}` tessellations as permutation actions.
//!
//! A [`TessellationGroup`] stores the right regular action of the two
//! rotations ρ (about a face) and σ (about a vertex) on the group elements,
//! which are identified with the corners of the tessellation. Relation words
//! are sequences of signed generator indices: `1` is ρ, `2` is σ, and the
//! negatives are their inverses. A word acts on an index from left to right.

use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

/// Errors raised while building or parsing a group.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SymmetryError {
    #[error("permutation is not a bijection on 0..{0}")]
    NotAPermutation(usize),
    #[error("permutations have different domain sizes ({0} vs {1})")]
    DomainMismatch(usize, usize),
    #[error("relation {word} does not evaluate to the identity")]
    RelationViolation { word: String },
    #[error("the action generated by rho and sigma is not transitive")]
    NotTransitive,
    #[error("invalid generator index {0} in relation word")]
    BadGenerator(i8),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Signed generator word: `1` = ρ, `2` = σ, negatives are inverses.
pub type Word = Vec<i8>;

/// A permutation of `0..n` stored as its image array.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement {
    perm: Vec<u32>,
}

impl GroupElement {
    /// Validates that `perm` is a bijection.
    pub fn new(perm: Vec<u32>) -> Result<Self, SymmetryError> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            let p = p as usize;
            if p >= n || seen[p] {
                return Err(SymmetryError::NotAPermutation(n));
            }
            seen[p] = true;
        }
        Ok(Self { perm })
    }

    pub fn identity(n: usize) -> Self {
        Self { perm: (0..n as u32).collect() }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: u32) -> u32 {
        self.perm[i as usize]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.perm
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p as usize] = i as u32;
        }
        Self { perm: inv }
    }

    /// Composition acting as `self` first, then `other`.
    pub fn then(&self, other: &GroupElement) -> Self {
        Self {
            perm: self.perm.iter().map(|&p| other.perm[p as usize]).collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| p as usize == i)
    }

    /// Smallest `k ≥ 1` with `self^k = e`.
    pub fn order(&self) -> usize {
        let mut visited = vec![false; self.perm.len()];
        let mut acc = 1usize;
        for start in 0..self.perm.len() {
            if visited[start] {
                continue;
            }
            let mut len = 0usize;
            let mut i = start;
            while !visited[i] {
                visited[i] = true;
                i = self.perm[i] as usize;
                len += 1;
            }
            acc = lcm(acc, len);
        }
        acc
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Rotation group of a closed `{r,s}` tessellation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TessellationGroup {
    pub r: usize,
    pub s: usize,
    pub rho: GroupElement,
    pub sigma: GroupElement,
    rho_inv: GroupElement,
    sigma_inv: GroupElement,
    pub extra_relations: Vec<Word>,
}

/// Solution `(n, x, y)` of the cyclic scheduling constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HomomorphismSolution {
    pub n: u32,
    pub x: u32,
    pub y: u32,
}

impl HomomorphismSolution {
    /// Re-evaluates the four congruences for an `{r,s}` tessellation.
    pub fn satisfies(&self, r: u32, s: u32) -> bool {
        let (n, x, y) = (self.n, self.x, self.y);
        n >= 2 && (r * x).is_multiple_of(n) && (s * y).is_multiple_of(n) && (2 * (x + y)) % n == 0 && (x + y) % n != 0
    }
}

/// Human-readable rendering of a word such as `r s R S`.
pub fn word_to_string(word: &[i8]) -> String {
    word.iter()
        .map(|&g| match g {
            1 => "r",
            -1 => "R",
            2 => "s",
            -2 => "S",
            _ => "?",
        })
        .collect::<Vec<_>>()
        .join("")
}

/// Repeats a word `k` times.
pub fn word_power(word: &[i8], k: usize) -> Word {
    word.iter().copied().cycle().take(word.len() * k).collect()
}

impl TessellationGroup {
    /// Validates the defining relations `(ρσ)² = ρ^r = σ^s = e`, every extra
    /// relation, and transitivity of the action.
    pub fn from_permutations(r: usize, s: usize, rho: Vec<u32>, sigma: Vec<u32>, extra_relations: Vec<Word>) -> Result<Self, SymmetryError> {
        if rho.len() != sigma.len() {
            return Err(SymmetryError::DomainMismatch(rho.len(), sigma.len()));
        }
        let rho = GroupElement::new(rho)?;
        let sigma = GroupElement::new(sigma)?;
        let g = Self {
            r,
            s,
            rho_inv: rho.inverse(),
            sigma_inv: sigma.inverse(),
            rho,
            sigma,
            extra_relations,
        };
        for w in g.defining_relations().iter().chain(&g.extra_relations) {
            if w.iter().any(|&x| !matches!(x, 1 | -1 | 2 | -2)) {
                return Err(SymmetryError::BadGenerator(*w.iter().find(|&&x| !matches!(x, 1 | -1 | 2 | -2)).unwrap()));
            }
            if !g.word_is_identity(w) {
                return Err(SymmetryError::RelationViolation { word: word_to_string(w) });
            }
        }
        if !g.is_transitive() {
            return Err(SymmetryError::NotTransitive);
        }
        Ok(g)
    }

    /// Rotation group of the `{4,4}` toric lattice with `L × L` faces.
    ///
    /// Corner `4·(j·L + i) + ℓ` is the corner with label ℓ (NW, NE, SE, SW)
    /// of the face in column `i` and row `j`, rows increasing northwards.
    pub fn toric(l: usize) -> Result<Self, SymmetryError> {
        let n = 4 * l * l;
        let idx = |i: usize, j: usize, lab: usize| (4 * ((j % l) * l + (i % l)) + lab) as u32;
        let mut rho = vec![0u32; n];
        let mut sigma = vec![0u32; n];
        for j in 0..l {
            for i in 0..l {
                for lab in 0..4 {
                    rho[idx(i, j, lab) as usize] = idx(i, j, (lab + 1) % 4);
                }
                sigma[idx(i, j, 0) as usize] = idx(i + l - 1, j, 1);
                sigma[idx(i, j, 1) as usize] = idx(i, j + 1, 2);
                sigma[idx(i, j, 2) as usize] = idx(i + 1, j, 3);
                sigma[idx(i, j, 3) as usize] = idx(i, j + l - 1, 0);
            }
        }
        let extra = vec![word_power(&[1, -2], l), word_power(&[-2, 1], l)];
        Self::from_permutations(4, 4, rho, sigma, extra)
    }

    pub fn order(&self) -> usize {
        self.rho.len()
    }

    fn generator(&self, g: i8) -> &GroupElement {
        match g {
            1 => &self.rho,
            -1 => &self.rho_inv,
            2 => &self.sigma,
            -2 => &self.sigma_inv,
            _ => panic!("invalid generator {g}"),
        }
    }

    /// Image of index `i` under the word, letters applied left to right.
    pub fn apply_word(&self, word: &[i8], i: u32) -> u32 {
        word.iter().fold(i, |acc, &g| self.generator(g).apply(acc))
    }

    pub fn word_is_identity(&self, word: &[i8]) -> bool {
        (0..self.order() as u32).all(|i| self.apply_word(word, i) == i)
    }

    /// The relations `ρ^r`, `σ^s` and `(ρσ)²`.
    pub fn defining_relations(&self) -> Vec<Word> {
        vec![vec![1; self.r], vec![2; self.s], vec![1, 2, 1, 2]]
    }

    fn is_transitive(&self) -> bool {
        let n = self.order();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0u32]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for g in [&self.rho, &self.sigma] {
                let j = g.apply(i);
                if !seen[j as usize] {
                    seen[j as usize] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }

    /// Labels `f(g)` of a homomorphism into `Z_n` with `f(ρ) = x`,
    /// `f(σ) = y` and `f(e) = 0`, if the map is well defined on this group.
    pub fn cyclic_labels(&self, n: u32, x: u32, y: u32) -> Option<Vec<u32>> {
        let size = self.order();
        let mut label: Vec<Option<u32>> = vec![None; size];
        label[0] = Some(0);
        let mut queue = VecDeque::from([0u32]);
        while let Some(i) = queue.pop_front() {
            let li = label[i as usize].unwrap();
            for (g, step) in [(&self.rho, x), (&self.sigma, y)] {
                let j = g.apply(i) as usize;
                let want = (li + step) % n;
                match label[j] {
                    None => {
                        label[j] = Some(want);
                        queue.push_back(j as u32);
                    }
                    Some(v) if v != want => return None,
                    Some(_) => {}
                }
            }
        }
        label.into_iter().collect()
    }

    /// Sum of generator exponents of a word modulo `n` under `f(ρ)=x, f(σ)=y`.
    pub fn evaluate_word(word: &[i8], n: u32, x: u32, y: u32) -> u32 {
        let n = n as i64;
        let v: i64 = word
            .iter()
            .map(|&g| match g {
                1 => x as i64,
                -1 => -(x as i64),
                2 => y as i64,
                -2 => -(y as i64),
                _ => 0,
            })
            .sum();
        v.rem_euclid(n) as u32
    }

    /// Whether `f(ρ) = f(σ) = 1` into `Z_2` is a homomorphism.
    pub fn is_colourable(&self) -> bool {
        self.cyclic_labels(2, 1, 1).is_some()
    }

    /// Whether `h(ρ) = h(σ) = 1` into `Z_4` is a homomorphism.
    pub fn is_schedulable(&self) -> bool {
        self.cyclic_labels(4, 1, 1).is_some()
    }

    /// Whether all listed relations (defining and extra) map to zero under
    /// `f(ρ)=x, f(σ)=y` in `Z_n`.
    pub fn relations_map_to_zero(&self, n: u32, x: u32, y: u32) -> bool {
        self.defining_relations()
            .iter()
            .chain(&self.extra_relations)
            .all(|w| Self::evaluate_word(w, n, x, y) == 0)
    }

    /// Group of the dual tessellation: the roles of ρ and σ are exchanged.
    pub fn dual(&self) -> Self {
        let swap = |w: &Word| w.iter().map(|&g| if g.abs() == 1 { 2 * g.signum() } else { g.signum() }).collect();
        Self {
            r: self.s,
            s: self.r,
            rho: self.sigma.clone(),
            sigma: self.rho.clone(),
            rho_inv: self.sigma_inv.clone(),
            sigma_inv: self.rho_inv.clone(),
            extra_relations: self.extra_relations.iter().map(swap).collect(),
        }
    }

    /// Serialises to the line-based group file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |p: &[u32]| p.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        writeln!(out, "r {}", self.r).unwrap();
        writeln!(out, "s {}", self.s).unwrap();
        writeln!(out, "order {}", self.order()).unwrap();
        writeln!(out, "rho {}", join(self.rho.as_slice())).unwrap();
        writeln!(out, "sigma {}", join(self.sigma.as_slice())).unwrap();
        for w in &self.extra_relations {
            let w: Vec<String> = w.iter().map(i8::to_string).collect();
            writeln!(out, "relation {}", w.join(" ")).unwrap();
        }
        out
    }

    /// Parses the line-based group file format. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self, SymmetryError> {
        let mut r = None;
        let mut s = None;
        let mut order = None;
        let mut rho = None;
        let mut sigma = None;
        let mut rels = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| SymmetryError::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let ints =
                |t: &str| -> Result<Vec<i64>, SymmetryError> { t.split_whitespace().map(|x| x.parse::<i64>().map_err(|_| err("expected integers"))).collect() };
            let single = |t: &str| -> Result<usize, SymmetryError> {
                match ints(t)?.as_slice() {
                    [v] if *v >= 0 => Ok(*v as usize),
                    _ => Err(err("expected one non-negative integer")),
                }
            };
            let perm = |t: &str| -> Result<Vec<u32>, SymmetryError> {
                ints(t)?
                    .into_iter()
                    .map(|v| u32::try_from(v).map_err(|_| err("negative permutation entry")))
                    .collect()
            };
            match key {
                "r" => r = Some(single(rest)?),
                "s" => s = Some(single(rest)?),
                "order" => order = Some(single(rest)?),
                "rho" => rho = Some(perm(rest)?),
                "sigma" => sigma = Some(perm(rest)?),
                "relation" => rels.push(
                    ints(rest)?
                        .into_iter()
                        .map(|v| i8::try_from(v).map_err(|_| err("generator index out of range")))
                        .collect::<Result<Word, _>>()?,
                ),
                _ => return Err(err("unknown key")),
            }
        }
        let missing = |k: &str| SymmetryError::Parse {
            line: 0,
            msg: format!("missing field {k}"),
        };
        let rho = rho.ok_or_else(|| missing("rho"))?;
        let sigma = sigma.ok_or_else(|| missing("sigma"))?;
        let order = order.ok_or_else(|| missing("order"))?;
        if rho.len() != order {
            return Err(SymmetryError::Parse {
                line: 0,
                msg: "order does not match permutation length".into(),
            });
        }
        Self::from_permutations(r.ok_or_else(|| missing("r"))?, s.ok_or_else(|| missing("s"))?, rho, sigma, rels)
    }
}

/// All `(n, x, y)` with `2 ≤ n ≤ n_max` such that `rx ≡ 0`, `sy ≡ 0`,
/// `2(x+y) ≡ 0` and `x+y ≢ 0 (mod n)`, sorted by `(n, x, y)`.
pub fn solve_cyclic_scheduling(r: u32, s: u32, n_max: u32) -> Vec<HomomorphismSolution> {
    let mut out = Vec::new();
    for n in 2..=n_max {
        for x in 0..n {
            for y in 0..n {
                let sol = HomomorphismSolution { n, x, y };
                if sol.satisfies(r, s) {
                    out.push(sol);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toric_group_relations() {
        for l in 2..6 {
            let g = TessellationGroup::toric(l).unwrap();
            assert_eq!(g.order(), 4 * l * l);
            assert!(g.is_schedulable());
        }
    }

    #[test]
    fn three_cycle_violates_rho_power() {
        let e = TessellationGroup::from_permutations(4, 4, vec![1, 2, 0], vec![0, 1, 2], vec![]);
        assert!(matches!(e, Err(SymmetryError::RelationViolation { .. })));
    }
}

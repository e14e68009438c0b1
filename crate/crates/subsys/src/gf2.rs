//! Dense linear algebra over GF(2).
//!
//! [`BitVec`] is a packed bit vector; [`RowBasis`] maintains a fully reduced
//! row-echelon basis that supports incremental insertion and membership
//! queries. Kernels and inverses are computed by Gaussian elimination.

use std::fmt;

/// Packed bit vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec[{}]{:?}", self.len, self.ones().collect::<Vec<_>>())
    }
}

impl BitVec {
    /// All-zero vector of length `len`.
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    /// Vector of length `len` with ones at the given positions (repeated
    /// positions cancel).
    pub fn from_indices<I: IntoIterator<Item = usize>>(len: usize, indices: I) -> Self {
        let mut v = Self::zeros(len);
        for i in indices {
            v.flip(i);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i & 63);
        if value {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    /// In-place sum (XOR) with another vector of the same length.
    #[inline]
    pub fn xor_assign(&mut self, other: &BitVec) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    /// Parity of the overlap, i.e. the GF(2) inner product.
    #[inline]
    pub fn dot(&self, other: &BitVec) -> bool {
        debug_assert_eq!(self.len, other.len);
        let mut acc = 0u32;
        for (a, b) in self.words.iter().zip(&other.words) {
            acc ^= (a & b).count_ones();
        }
        acc & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Index of the lowest set bit.
    pub fn first_one(&self) -> Option<usize> {
        for (k, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(k * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    /// Iterator over set positions in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(k * 64 + t)
                }
            })
        })
    }

    /// Bitwise OR count with another vector: `|self ∪ other|`.
    pub fn union_count(&self, other: &BitVec) -> usize {
        self.words.iter().zip(&other.words).map(|(a, b)| (a | b).count_ones() as usize).sum()
    }
}

/// Fully reduced echelon basis of a subspace of GF(2)^len.
///
/// Every stored row has a distinct pivot and no other row has a one in that
/// pivot column, so reduction against the basis is order independent.
#[derive(Clone, Debug)]
pub struct RowBasis {
    len: usize,
    rows: Vec<BitVec>,
    pivots: Vec<usize>,
}

impl RowBasis {
    pub fn new(len: usize) -> Self {
        Self {
            len,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn from_rows<'a, I: IntoIterator<Item = &'a BitVec>>(len: usize, rows: I) -> Self {
        let mut b = Self::new(len);
        for r in rows {
            b.insert(r.clone());
        }
        b
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[BitVec] {
        &self.rows
    }

    /// Reduces `v` modulo the span; the result is zero iff `v` is in the span.
    pub fn reduce(&self, v: &BitVec) -> BitVec {
        let mut v = v.clone();
        self.reduce_in_place(&mut v);
        v
    }

    pub fn reduce_in_place(&self, v: &mut BitVec) {
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if v.get(p) {
                v.xor_assign(row);
            }
        }
    }

    pub fn contains(&self, v: &BitVec) -> bool {
        self.reduce(v).is_zero()
    }

    /// Inserts `v`; returns true iff it was linearly independent.
    pub fn insert(&mut self, v: BitVec) -> bool {
        debug_assert_eq!(v.len(), self.len);
        let mut v = v;
        self.reduce_in_place(&mut v);
        let Some(p) = v.first_one() else {
            return false;
        };
        for row in &mut self.rows {
            if row.get(p) {
                row.xor_assign(&v);
            }
        }
        self.rows.push(v);
        self.pivots.push(p);
        true
    }
}

/// Rank of a set of row vectors.
pub fn rank(rows: &[BitVec]) -> usize {
    let len = rows.first().map_or(0, BitVec::len);
    RowBasis::from_rows(len, rows).rank()
}

/// Basis of `{x : r·x = 0 for every row r}` in GF(2)^ncols.
pub fn kernel(rows: &[BitVec], ncols: usize) -> Vec<BitVec> {
    let basis = RowBasis::from_rows(ncols, rows);
    let mut is_pivot = vec![false; ncols];
    for &p in &basis.pivots {
        is_pivot[p] = true;
    }
    let mut out = Vec::new();
    for free in (0..ncols).filter(|&c| !is_pivot[c]) {
        let mut x = BitVec::zeros(ncols);
        x.set(free, true);
        for (row, &p) in basis.rows.iter().zip(&basis.pivots) {
            if row.get(free) {
                x.set(p, true);
            }
        }
        out.push(x);
    }
    out
}

/// Vectors among `candidates` that extend `base` to a larger span, chosen
/// greedily; they form a basis of `span(base ∪ candidates) / span(base)`.
pub fn quotient_basis(base: &[BitVec], candidates: &[BitVec], len: usize) -> Vec<BitVec> {
    let mut basis = RowBasis::from_rows(len, base);
    candidates.iter().filter(|c| basis.insert((*c).clone())).cloned().collect()
}

/// Inverse of a square GF(2) matrix given by rows, or `None` if singular.
pub fn invert(rows: &[BitVec]) -> Option<Vec<BitVec>> {
    let n = rows.len();
    let mut a: Vec<BitVec> = rows.to_vec();
    let mut inv: Vec<BitVec> = (0..n).map(|i| BitVec::from_indices(n, [i])).collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| a[r].get(col))?;
        a.swap(col, piv);
        inv.swap(col, piv);
        for r in 0..n {
            if r != col && a[r].get(col) {
                let (ar, ic) = (a[col].clone(), inv[col].clone());
                a[r].xor_assign(&ar);
                inv[r].xor_assign(&ic);
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_parity_check() {
        let rows = vec![BitVec::from_indices(3, [0, 1]), BitVec::from_indices(3, [1, 2])];
        let k = kernel(&rows, 3);
        assert_eq!(k.len(), 1);
        assert_eq!(k[0], BitVec::from_indices(3, [0, 1, 2]));
    }

    #[test]
    fn invert_roundtrip() {
        let rows = vec![BitVec::from_indices(2, [0, 1]), BitVec::from_indices(2, [1])];
        let inv = invert(&rows).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = false;
                for k in 0..2 {
                    acc ^= rows[i].get(k) & inv[k].get(j);
                }
                assert_eq!(acc, i == j);
            }
        }
    }
}

//! Shared test helpers: a small stabiliser-tableau simulator used as an
//! independent oracle, and code builders.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use subsys::circuits::{Circuit, GateKind};
use subsys::code::{self, SubsystemCode};
use subsys::tessellation;

/// A Hermitian Pauli operator on up to 128 qubits with a sign bit. The
/// pair `(x, z) = (1, 1)` on a qubit stands for `Y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pauli {
    pub x: u128,
    pub z: u128,
    pub sign: bool,
}

impl Pauli {
    pub fn z_on(qubits: impl IntoIterator<Item = usize>) -> Self {
        let mut p = Pauli { x: 0, z: 0, sign: false };
        for q in qubits {
            p.z |= 1 << q;
        }
        p
    }

    pub fn x_on(qubits: impl IntoIterator<Item = usize>) -> Self {
        let mut p = Pauli { x: 0, z: 0, sign: false };
        for q in qubits {
            p.x |= 1 << q;
        }
        p
    }

    pub fn commutes(&self, o: &Pauli) -> bool {
        ((self.x & o.z).count_ones() + (self.z & o.x).count_ones()).is_multiple_of(2)
    }

    /// Product `self · o` of two commuting operators, sign included, using
    /// the phase bookkeeping of the CHP row sum.
    pub fn times(&self, o: &Pauli) -> Pauli {
        let mut e: i32 = 0;
        for q in 0..128 {
            let bit = |v: u128| ((v >> q) & 1) as i32;
            let (x1, z1, x2, z2) = (bit(self.x), bit(self.z), bit(o.x), bit(o.z));
            e += match (x1, z1) {
                (0, 0) => 0,
                (1, 1) => z2 - x2,
                (1, 0) => z2 * (2 * x2 - 1),
                _ => x2 * (1 - 2 * z2),
            };
        }
        let total = e.rem_euclid(4) + 2 * (self.sign as i32 + o.sign as i32);
        debug_assert!(total % 2 == 0, "product of anticommuting operators");
        Pauli {
            x: self.x ^ o.x,
            z: self.z ^ o.z,
            sign: (total / 2) % 2 == 1,
        }
    }
}

/// Pure stabiliser state given by `n` independent commuting generators.
#[derive(Clone, Debug)]
pub struct Tableau {
    pub n: usize,
    pub gens: Vec<Pauli>,
}

impl Tableau {
    /// The state |0…0⟩.
    pub fn zeros(n: usize) -> Self {
        assert!(n <= 128);
        Self {
            n,
            gens: (0..n).map(|q| Pauli::z_on([q])).collect(),
        }
    }

    pub fn cnot(&mut self, c: usize, t: usize) {
        for g in &mut self.gens {
            let (xc, zc, xt, zt) = ((g.x >> c) & 1, (g.z >> c) & 1, (g.x >> t) & 1, (g.z >> t) & 1);
            if xc & zt & (xt ^ zc ^ 1) == 1 {
                g.sign ^= true;
            }
            g.x ^= xc << t;
            g.z ^= zt << c;
        }
    }

    pub fn hadamard(&mut self, q: usize) {
        for g in &mut self.gens {
            let (x, z) = ((g.x >> q) & 1, (g.z >> q) & 1);
            if x & z == 1 {
                g.sign ^= true;
            }
            g.x = (g.x & !(1 << q)) | (z << q);
            g.z = (g.z & !(1 << q)) | (x << q);
        }
    }

    pub fn pauli_x(&mut self, q: usize) {
        for g in &mut self.gens {
            if (g.z >> q) & 1 == 1 {
                g.sign ^= true;
            }
        }
    }

    pub fn pauli_z(&mut self, q: usize) {
        for g in &mut self.gens {
            if (g.x >> q) & 1 == 1 {
                g.sign ^= true;
            }
        }
    }

    /// Measures `p`. Random outcomes come from `choose`; deterministic ones
    /// are returned with `false` as the second value.
    pub fn measure(&mut self, p: &Pauli, choose: &mut impl FnMut() -> bool) -> (bool, bool) {
        if let Some(i) = self.gens.iter().position(|g| !g.commutes(p)) {
            let gi = self.gens[i];
            for j in 0..self.gens.len() {
                if j != i && !self.gens[j].commutes(p) {
                    self.gens[j] = self.gens[j].times(&gi);
                }
            }
            let outcome = choose();
            self.gens[i] = Pauli { sign: p.sign ^ outcome, ..*p };
            return (outcome, true);
        }
        (self.expectation_sign(p), false)
    }

    /// Sign of a stabilised operator `p`: `true` when `−p` is stabilised.
    fn expectation_sign(&self, p: &Pauli) -> bool {
        // Gaussian elimination over the symplectic vectors, tracking which
        // generators combine into each row.
        let n = self.gens.len();
        let mut rows: Vec<(u128, u128, Vec<usize>)> = self.gens.iter().enumerate().map(|(i, g)| (g.x, g.z, vec![i])).collect();
        let mut target = (p.x, p.z, Vec::<usize>::new());
        let mut r = 0;
        for bit in 0..256usize {
            let get = |row: &(u128, u128, Vec<usize>)| if bit < 128 { (row.0 >> bit) & 1 } else { (row.1 >> (bit - 128)) & 1 };
            let Some(k) = (r..n).find(|&k| get(&rows[k]) == 1) else { continue };
            rows.swap(r, k);
            let pivot = rows[r].clone();
            for k in 0..n {
                if k != r && get(&rows[k]) == 1 {
                    rows[k].0 ^= pivot.0;
                    rows[k].1 ^= pivot.1;
                    rows[k].2 = xor_sets(&rows[k].2, &pivot.2);
                }
            }
            if get(&target) == 1 {
                target.0 ^= pivot.0;
                target.1 ^= pivot.1;
                target.2 = xor_sets(&target.2, &pivot.2);
            }
            r += 1;
        }
        assert!(target.0 == 0 && target.1 == 0, "operator is not in the stabiliser group");
        let mut prod = Pauli { x: 0, z: 0, sign: false };
        for &i in &target.2 {
            prod = prod.times(&self.gens[i]);
        }
        assert_eq!((prod.x, prod.z), (p.x, p.z));
        prod.sign ^ p.sign
    }
}

fn xor_sets(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().filter(|x| !b.contains(x)).copied().collect();
    out.extend(b.iter().filter(|x| !a.contains(x)));
    out.sort_unstable();
    out
}

/// Runs `circuit` noiselessly from `state`, returning the measurement bits
/// in slot order.
pub fn run_tableau<R: Rng>(circuit: &Circuit, state: &mut Tableau, rng: &mut R) -> Vec<bool> {
    let mut bits = vec![false; circuit.measurements.len()];
    let mut choose = || rng.gen::<bool>();
    for g in &circuit.gates {
        match g.kind {
            GateKind::Cnot { control, target } => state.cnot(control as usize, target as usize),
            GateKind::PrepZ(q) => {
                let (m, _) = state.measure(&Pauli::z_on([q as usize]), &mut choose);
                if m {
                    state.pauli_x(q as usize);
                }
            }
            GateKind::PrepX(q) => {
                let (m, _) = state.measure(&Pauli::x_on([q as usize]), &mut choose);
                if m {
                    state.pauli_z(q as usize);
                }
            }
            GateKind::MeasZ(q) => bits[g.slot as usize] = state.measure(&Pauli::z_on([q as usize]), &mut choose).0,
            GateKind::MeasX(q) => bits[g.slot as usize] = state.measure(&Pauli::x_on([q as usize]), &mut choose).0,
            GateKind::Idle(_) => {}
        }
    }
    bits
}

pub fn toric(l: usize) -> SubsystemCode {
    code::build_subsystem_code(&tessellation::build_toric(l).unwrap()).unwrap()
}

pub fn planar(l: usize) -> SubsystemCode {
    code::build_subsystem_code(&tessellation::build_planar(l).unwrap()).unwrap()
}

/// Path of a bundled data file.
pub fn data(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

//! Exact state-vector and density-matrix simulation for small registers.
//!
//! This is the reference every faster rule in the crate is checked against.
//! Qubit `q` is bit `q` of the computational basis index (qubit 0 is the
//! least significant bit). Pure states are capped at [`MAX_PURE_QUBITS`],
//! density matrices at [`MAX_MIXED_QUBITS`].
//!
//! The isospectral construction `U_G (B sum_i X_i) U_G^dag` carries `+B` per
//! site while the graph Hamiltonian carries `-B/2` per stabilizer, so the two
//! operators share eigenvectors but not eigenvalues. [`isospectral_hamiltonian`]
//! is checked only against the spectrum of `B sum_i X_i` and the conjugation
//! identity `U_G X_i U_G^dag = K_i`; it is not asserted equal to
//! [`graph_hamiltonian`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::thermal::ThermalModel;

pub type C64 = Complex64;
pub type Gate = [[C64; 2]; 2];

pub const MAX_PURE_QUBITS: usize = 12;
pub const MAX_MIXED_QUBITS: usize = 10;

/// Normalisation tolerance for states handed to measurement routines.
pub const NORM_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Y,
    Z,
}

/// Measurement outcome, labelled by the eigenvalue of the measured Pauli.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn is_minus(self) -> bool {
        self == Outcome::Minus
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Outcome {
        if rng.random_bool(0.5) {
            Outcome::Minus
        } else {
            Outcome::Plus
        }
    }

    pub fn both() -> [Outcome; 2] {
        [Outcome::Plus, Outcome::Minus]
    }
}

pub mod gates {
    use super::*;

    pub fn x() -> Gate {
        [[ZERO, ONE], [ONE, ZERO]]
    }

    pub fn y() -> Gate {
        [[ZERO, -I], [I, ZERO]]
    }

    pub fn z() -> Gate {
        [[ONE, ZERO], [ZERO, -ONE]]
    }

    pub fn h() -> Gate {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        [[s, s], [s, -s]]
    }

    pub fn s() -> Gate {
        [[ONE, ZERO], [ZERO, I]]
    }

    /// `exp(-i theta X / 2)`.
    pub fn rx(theta: f64) -> Gate {
        let c = C64::new((theta / 2.0).cos(), 0.0);
        let s = C64::new(0.0, -(theta / 2.0).sin());
        [[c, s], [s, c]]
    }

    pub fn dagger(g: &Gate) -> Gate {
        [
            [g[0][0].conj(), g[1][0].conj()],
            [g[0][1].conj(), g[1][1].conj()],
        ]
    }

    pub fn to_matrix(g: &Gate) -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[g[0][0], g[0][1], g[1][0], g[1][1]])
    }
}

/// The two basis vectors `|+⟩`-type (index 0) and `|−⟩`-type (index 1) of a
/// single-qubit Pauli eigenbasis, as `[amp(|0⟩), amp(|1⟩)]`.
fn eigvec(basis: Basis, outcome: Outcome) -> [C64; 2] {
    let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    match (basis, outcome) {
        (Basis::Z, Outcome::Plus) => [ONE, ZERO],
        (Basis::Z, Outcome::Minus) => [ZERO, ONE],
        (Basis::X, Outcome::Plus) => [r, r],
        (Basis::X, Outcome::Minus) => [r, -r],
        (Basis::Y, Outcome::Plus) => [r, r * I],
        (Basis::Y, Outcome::Minus) => [r, -r * I],
    }
}

fn check_qubits(what: &'static str, n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::Capacity {
            what,
            requested: n,
            limit,
        });
    }
    Ok(())
}

fn check_index(q: usize, n: usize) -> Result<()> {
    if q >= n {
        return Err(Error::param(format!(
            "qubit {q} out of range for {n} qubits"
        )));
    }
    Ok(())
}

/// Inserts a zero bit at position `q` of `x`.
fn insert_bit(x: usize, q: usize) -> usize {
    let low = x & ((1 << q) - 1);
    ((x >> q) << (q + 1)) | low
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: DVector<C64>,
}

impl StateVector {
    pub fn from_amplitudes(n: usize, amps: DVector<C64>) -> Result<Self> {
        check_qubits("state vector", n, MAX_PURE_QUBITS)?;
        if amps.len() != 1 << n {
            return Err(Error::param(format!(
                "{} amplitudes do not describe {n} qubits",
                amps.len()
            )));
        }
        Ok(StateVector { n, amps })
    }

    /// `|0...0⟩`.
    pub fn zero(n: usize) -> Result<Self> {
        check_qubits("state vector", n, MAX_PURE_QUBITS)?;
        let mut amps = DVector::from_element(1 << n, ZERO);
        amps[0] = ONE;
        Ok(StateVector { n, amps })
    }

    /// `|+⟩^{⊗n}`.
    pub fn plus(n: usize) -> Result<Self> {
        check_qubits("state vector", n, MAX_PURE_QUBITS)?;
        let a = C64::new((0.5f64).powi(n as i32).sqrt(), 0.0);
        Ok(StateVector {
            n,
            amps: DVector::from_element(1 << n, a),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    fn require_normalized(&self) -> Result<()> {
        let norm = self.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Contract(format!(
                "state has norm {norm}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn apply_single(&mut self, q: usize, g: &Gate) -> Result<()> {
        check_index(q, self.n)?;
        let bit = 1 << q;
        for i0 in 0..(1usize << (self.n - 1)) {
            let a = insert_bit(i0, q);
            let b = a | bit;
            let (x, y) = (self.amps[a], self.amps[b]);
            self.amps[a] = g[0][0] * x + g[0][1] * y;
            self.amps[b] = g[1][0] * x + g[1][1] * y;
        }
        Ok(())
    }

    pub fn apply_x(&mut self, q: usize) -> Result<()> {
        self.apply_single(q, &gates::x())
    }

    pub fn apply_y(&mut self, q: usize) -> Result<()> {
        self.apply_single(q, &gates::y())
    }

    pub fn apply_z(&mut self, q: usize) -> Result<()> {
        check_index(q, self.n)?;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i >> q & 1 == 1 {
                *a = -*a;
            }
        }
        Ok(())
    }

    pub fn apply_h(&mut self, q: usize) -> Result<()> {
        self.apply_single(q, &gates::h())
    }

    pub fn apply_cz(&mut self, u: usize, v: usize) -> Result<()> {
        check_index(u, self.n)?;
        check_index(v, self.n)?;
        if u == v {
            return Err(Error::param("CZ needs two distinct qubits"));
        }
        let mask = (1 << u) | (1 << v);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *a = -*a;
            }
        }
        Ok(())
    }

    /// Applies `Z` to every qubit whose flag is set.
    pub fn apply_z_pattern(&mut self, pattern: &[bool]) -> Result<()> {
        for (q, &on) in pattern.iter().enumerate() {
            if on {
                self.apply_z(q)?;
            }
        }
        Ok(())
    }

    /// Projects qubit `q` onto the given eigenvector. Returns the outcome
    /// probability and the renormalised post-state (or `None` if the
    /// outcome has zero probability).
    pub fn project(
        &self,
        q: usize,
        basis: Basis,
        outcome: Outcome,
    ) -> Result<(f64, Option<StateVector>)> {
        self.require_normalized()?;
        let (prob, reduced) = self.collapse(q, basis, outcome)?;
        let Some(reduced) = reduced else {
            return Ok((prob, None));
        };
        let e = eigvec(basis, outcome);
        let mut amps = DVector::from_element(1 << self.n, ZERO);
        for (i0, &r) in reduced.amps.iter().enumerate() {
            let a = insert_bit(i0, q);
            amps[a] = r * e[0];
            amps[a | 1 << q] = r * e[1];
        }
        Ok((prob, Some(StateVector { n: self.n, amps })))
    }

    /// Projects qubit `q` and discards it. Remaining qubits above `q` shift
    /// down by one.
    pub fn collapse(
        &self,
        q: usize,
        basis: Basis,
        outcome: Outcome,
    ) -> Result<(f64, Option<StateVector>)> {
        check_index(q, self.n)?;
        let e = eigvec(basis, outcome);
        let mut amps = DVector::from_element(1 << (self.n - 1), ZERO);
        for (i0, slot) in amps.iter_mut().enumerate() {
            let a = insert_bit(i0, q);
            *slot = e[0].conj() * self.amps[a] + e[1].conj() * self.amps[a | 1 << q];
        }
        let prob = amps.norm_squared() / self.amps.norm_squared();
        if prob < 1e-15 {
            return Ok((prob, None));
        }
        let norm = amps.norm();
        amps /= C64::new(norm, 0.0);
        Ok((
            prob,
            Some(StateVector {
                n: self.n - 1,
                amps,
            }),
        ))
    }

    /// Samples a projective measurement of qubit `q`.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        q: usize,
        basis: Basis,
        rng: &mut R,
    ) -> Result<(Outcome, f64, StateVector)> {
        let (p_plus, plus) = self.project(q, basis, Outcome::Plus)?;
        let r: f64 = rng.random();
        if r < p_plus {
            if let Some(s) = plus {
                return Ok((Outcome::Plus, p_plus, s));
            }
        }
        let (p_minus, minus) = self.project(q, basis, Outcome::Minus)?;
        match minus {
            Some(s) => Ok((Outcome::Minus, p_minus, s)),
            None => Ok((
                Outcome::Plus,
                p_plus,
                plus.expect("one outcome is possible"),
            )),
        }
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// `|⟨a|b⟩|^2` for normalised states.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Trace distance `sqrt(1 - |⟨a|b⟩|^2)` between pure states.
    ///
    /// Evaluated through the Lagrange identity
    /// `|a|^2 |b|^2 - |⟨a|b⟩|^2 = 1/2 sum_ij |a_i b_j - a_j b_i|^2`, which
    /// stays accurate when the states nearly coincide.
    pub fn trace_distance(&self, other: &StateVector) -> f64 {
        assert_eq!(self.n, other.n, "register sizes differ");
        let (a, b) = (&self.amps, &other.amps);
        let d = a.len();
        let mut acc = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                acc += (a[i] * b[j] - a[j] * b[i]).norm_sqr();
            }
        }
        let denom = a.norm_squared() * b.norm_squared();
        (acc / denom).max(0.0).sqrt()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            n: self.n,
            mat: &self.amps * self.amps.adjoint(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    mat: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_matrix(n: usize, mat: DMatrix<C64>) -> Result<Self> {
        check_qubits("density matrix", n, MAX_MIXED_QUBITS)?;
        if mat.nrows() != 1 << n || mat.ncols() != 1 << n {
            return Err(Error::param(format!(
                "{}x{} matrix does not describe {n} qubits",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(DensityMatrix { n, mat })
    }

    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        check_qubits("density matrix", psi.n, MAX_MIXED_QUBITS)?;
        Ok(psi.to_density())
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_qubits("density matrix", n, MAX_MIXED_QUBITS)?;
        let d = 1 << n;
        Ok(DensityMatrix {
            n,
            mat: DMatrix::identity(d, d) / C64::new(d as f64, 0.0),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.mat - self.mat.adjoint()).camax()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.mat)
    }

    /// Hermitian, unit trace, eigenvalues >= -1e-10.
    pub fn is_valid(&self) -> bool {
        self.hermiticity_error() < 1e-12
            && (self.trace() - 1.0).abs() < 1e-12
            && self.eigenvalues().iter().all(|&l| l >= -1e-10)
    }

    fn require_unit_trace(&self) -> Result<()> {
        let t = self.trace();
        if (t - 1.0).abs() > NORM_TOL {
            return Err(Error::Contract(format!(
                "density matrix has trace {t}, expected 1"
            )));
        }
        Ok(())
    }

    /// `rho -> U rho U^dag` for a single-qubit `U` on qubit `q`.
    pub fn apply_single(&mut self, q: usize, g: &Gate) -> Result<()> {
        check_index(q, self.n)?;
        let d = 1usize << self.n;
        let bit = 1 << q;
        let half = d / 2;
        for col in 0..d {
            for i0 in 0..half {
                let a = insert_bit(i0, q);
                let b = a | bit;
                let (x, y) = (self.mat[(a, col)], self.mat[(b, col)]);
                self.mat[(a, col)] = g[0][0] * x + g[0][1] * y;
                self.mat[(b, col)] = g[1][0] * x + g[1][1] * y;
            }
        }
        for row in 0..d {
            for j0 in 0..half {
                let a = insert_bit(j0, q);
                let b = a | bit;
                let (x, y) = (self.mat[(row, a)], self.mat[(row, b)]);
                self.mat[(row, a)] = x * g[0][0].conj() + y * g[0][1].conj();
                self.mat[(row, b)] = x * g[1][0].conj() + y * g[1][1].conj();
            }
        }
        Ok(())
    }

    pub fn apply_h(&mut self, q: usize) -> Result<()> {
        self.apply_single(q, &gates::h())
    }

    pub fn apply_x(&mut self, q: usize) -> Result<()> {
        self.apply_single(q, &gates::x())
    }

    pub fn apply_z(&mut self, q: usize) -> Result<()> {
        self.apply_diagonal(|i| if i >> q & 1 == 1 { -1.0 } else { 1.0 }, q)
    }

    pub fn apply_cz(&mut self, u: usize, v: usize) -> Result<()> {
        check_index(v, self.n)?;
        if u == v {
            return Err(Error::param("CZ needs two distinct qubits"));
        }
        let mask = (1 << u) | (1 << v);
        self.apply_diagonal(|i| if i & mask == mask { -1.0 } else { 1.0 }, u)
    }

    fn apply_diagonal(&mut self, sign: impl Fn(usize) -> f64, q: usize) -> Result<()> {
        check_index(q, self.n)?;
        let d = 1usize << self.n;
        for c in 0..d {
            let sc = sign(c);
            for r in 0..d {
                let s = sign(r) * sc;
                if s < 0.0 {
                    self.mat[(r, c)] = -self.mat[(r, c)];
                }
            }
        }
        Ok(())
    }

    /// `rho -> (1-p) rho + p Z_q rho Z_q`.
    pub fn z_noise(&mut self, q: usize, p: f64) -> Result<()> {
        check_index(q, self.n)?;
        let d = 1usize << self.n;
        let f = 1.0 - 2.0 * p;
        for c in 0..d {
            for r in 0..d {
                if (r ^ c) >> q & 1 == 1 {
                    self.mat[(r, c)] *= f;
                }
            }
        }
        Ok(())
    }

    /// Projects qubit `q` onto an eigenvector and renormalises.
    pub fn project(
        &self,
        q: usize,
        basis: Basis,
        outcome: Outcome,
    ) -> Result<(f64, Option<DensityMatrix>)> {
        self.require_unit_trace()?;
        check_index(q, self.n)?;
        let e = eigvec(basis, outcome);
        let d = 1usize << self.n;
        // P = |e⟩⟨e| on q; (P rho)_{r,c} = sum_k P_{r,k} rho_{k,c}.
        let p_elem = |r: usize, k: usize| -> C64 {
            if (r ^ k) & !(1 << q) != 0 {
                return ZERO;
            }
            e[r >> q & 1] * e[k >> q & 1].conj()
        };
        let mut left = DMatrix::from_element(d, d, ZERO);
        for c in 0..d {
            for r in 0..d {
                let r0 = r & !(1 << q);
                left[(r, c)] = p_elem(r, r0) * self.mat[(r0, c)]
                    + p_elem(r, r0 | 1 << q) * self.mat[(r0 | 1 << q, c)];
            }
        }
        let mut out = DMatrix::from_element(d, d, ZERO);
        for c in 0..d {
            let c0 = c & !(1 << q);
            for r in 0..d {
                out[(r, c)] =
                    left[(r, c0)] * p_elem(c0, c) + left[(r, c0 | 1 << q)] * p_elem(c0 | 1 << q, c);
            }
        }
        let prob = out.trace().re;
        if prob < 1e-15 {
            return Ok((prob, None));
        }
        out /= C64::new(prob, 0.0);
        Ok((
            prob,
            Some(DensityMatrix {
                n: self.n,
                mat: out,
            }),
        ))
    }

    /// Projects qubit `q` and traces it out.
    pub fn collapse(
        &self,
        q: usize,
        basis: Basis,
        outcome: Outcome,
    ) -> Result<(f64, Option<DensityMatrix>)> {
        let (prob, post) = self.project(q, basis, outcome)?;
        let keep: Vec<usize> = (0..self.n).filter(|&k| k != q).collect();
        Ok((prob, post.map(|s| s.partial_trace(&keep))))
    }

    pub fn measure<R: Rng + ?Sized>(
        &self,
        q: usize,
        basis: Basis,
        rng: &mut R,
    ) -> Result<(Outcome, f64, DensityMatrix)> {
        let (p_plus, plus) = self.project(q, basis, Outcome::Plus)?;
        let r: f64 = rng.random();
        if r < p_plus {
            if let Some(s) = plus {
                return Ok((Outcome::Plus, p_plus, s));
            }
        }
        let (p_minus, minus) = self.project(q, basis, Outcome::Minus)?;
        match minus {
            Some(s) => Ok((Outcome::Minus, p_minus, s)),
            None => Ok((
                Outcome::Plus,
                p_plus,
                plus.expect("one outcome is possible"),
            )),
        }
    }

    /// Reduced state on `keep`; qubit `i` of the result is `keep[i]`.
    pub fn partial_trace(&self, keep: &[usize]) -> DensityMatrix {
        let traced: Vec<usize> = (0..self.n).filter(|q| !keep.contains(q)).collect();
        let k = keep.len();
        let dk = 1usize << k;
        let compose = |kept_bits: usize, traced_bits: usize| -> usize {
            let mut idx = 0;
            for (i, &q) in keep.iter().enumerate() {
                idx |= (kept_bits >> i & 1) << q;
            }
            for (i, &q) in traced.iter().enumerate() {
                idx |= (traced_bits >> i & 1) << q;
            }
            idx
        };
        let mut out = DMatrix::from_element(dk, dk, ZERO);
        for t in 0..(1usize << traced.len()) {
            for c in 0..dk {
                let fc = compose(c, t);
                for r in 0..dk {
                    out[(r, c)] += self.mat[(compose(r, t), fc)];
                }
            }
        }
        DensityMatrix { n: k, mat: out }
    }

    /// `self ⊗ other`, with `other` occupying the higher qubit indices.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let n = self.n + other.n;
        check_qubits("density matrix", n, MAX_MIXED_QUBITS)?;
        Ok(DensityMatrix {
            n,
            mat: other.mat.kronecker(&self.mat),
        })
    }

    /// Reorders qubits so that new qubit `i` is old qubit `perm[i]`.
    pub fn permute_qubits(&self, perm: &[usize]) -> Result<DensityMatrix> {
        let mut seen = vec![false; self.n];
        if perm.len() != self.n
            || perm
                .iter()
                .any(|&q| q >= self.n || std::mem::replace(&mut seen[q], true))
        {
            return Err(Error::param(format!(
                "{perm:?} is not a permutation of {} qubits",
                self.n
            )));
        }
        let d = 1usize << self.n;
        let map = |new: usize| -> usize {
            let mut old = 0;
            for (i, &q) in perm.iter().enumerate() {
                old |= (new >> i & 1) << q;
            }
            old
        };
        let idx: Vec<usize> = (0..d).map(map).collect();
        let mat = DMatrix::from_fn(d, d, |r, c| self.mat[(idx[r], idx[c])]);
        Ok(DensityMatrix { n: self.n, mat })
    }

    /// `⟨psi|rho|psi⟩`.
    pub fn expectation(&self, psi: &StateVector) -> f64 {
        (psi.amps.adjoint() * &self.mat * &psi.amps)[(0, 0)].re
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        assert_eq!(self.n, other.n, "register sizes differ");
        let diff = &self.mat - &other.mat;
        0.5 * hermitian_eigenvalues(&diff)
            .iter()
            .map(|l| l.abs())
            .sum::<f64>()
    }

    /// Uhlmann fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
    pub fn fidelity(&self, other: &DensityMatrix) -> f64 {
        assert_eq!(self.n, other.n, "register sizes differ");
        let root = hermitian_sqrt(&self.mat);
        let m = &root * &other.mat * &root;
        let s: f64 = hermitian_eigenvalues(&m)
            .iter()
            .map(|l| l.max(0.0).sqrt())
            .sum();
        s * s
    }
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut v: Vec<f64> = SymmetricEigen::new(herm)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    v
}

fn hermitian_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let roots = eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0));
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&roots) * v.adjoint()
}

fn neighbor_mask(g: &Graph, v: usize) -> usize {
    g.neighbors(v).ones().fold(0, |m, u| m | 1 << u)
}

/// `prod_{edges} CZ |+⟩^{⊗n}`.
pub fn graph_state_vector(g: &Graph) -> Result<StateVector> {
    check_qubits("graph state", g.n(), MAX_PURE_QUBITS)?;
    let mut psi = StateVector::plus(g.n())?;
    for (u, v) in g.edges() {
        psi.apply_cz(u, v)?;
    }
    Ok(psi)
}

/// `Z^e |psi_G⟩`, with `e` given as a bitmask over vertices.
pub fn graph_state_with_errors(g: &Graph, errors: u64) -> Result<StateVector> {
    let mut psi = graph_state_vector(g)?;
    for q in 0..g.n() {
        if errors >> q & 1 == 1 {
            psi.apply_z(q)?;
        }
    }
    Ok(psi)
}

/// Stabilizer `K_i = X_i prod_{j in N(i)} Z_j` as a dense matrix.
pub fn stabilizer(g: &Graph, i: usize) -> Result<DMatrix<C64>> {
    check_qubits("stabilizer", g.n(), MAX_PURE_QUBITS)?;
    check_index(i, g.n())?;
    let d = 1usize << g.n();
    let mask = neighbor_mask(g, i);
    let mut k = DMatrix::from_element(d, d, ZERO);
    for b in 0..d {
        let sign = if (b & mask).count_ones() % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        k[(b ^ 1 << i, b)] = C64::new(sign, 0.0);
    }
    Ok(k)
}

/// `H = -(B/2) sum_i K_i`.
pub fn graph_hamiltonian(g: &Graph, coupling: f64) -> Result<DMatrix<C64>> {
    check_qubits("graph Hamiltonian", g.n(), MAX_PURE_QUBITS)?;
    if !(coupling > 0.0) {
        return Err(Error::param(format!(
            "coupling B must be positive, got {coupling}"
        )));
    }
    let d = 1usize << g.n();
    let mut h = DMatrix::from_element(d, d, ZERO);
    for i in 0..g.n() {
        h += stabilizer(g, i)? * C64::new(-coupling / 2.0, 0.0);
    }
    Ok(h)
}

/// Gibbs state `exp(-H/T) / Z` of the graph Hamiltonian.
///
/// The stabilizers commute and square to one, so
/// `exp(beta B/2 sum K_i) ∝ prod_i (1 + tanh(beta B / 2) K_i)`; each factor
/// is applied as a signed permutation, with no diagonalisation.
pub fn thermal_state(g: &Graph, coupling: f64, temperature: f64) -> Result<DensityMatrix> {
    check_qubits("thermal state", g.n(), MAX_MIXED_QUBITS)?;
    let model = ThermalModel::new(coupling, temperature)?;
    let t = (0.5 * coupling * model.beta()).tanh();
    let n = g.n();
    let d = 1usize << n;
    let mut m: DMatrix<C64> = DMatrix::identity(d, d);
    for i in 0..n {
        let mask = neighbor_mask(g, i);
        // (M K_i)_{a,b} = M_{a, b^2^i} * sign(b)
        let mk = DMatrix::from_fn(d, d, |a, b| {
            let sign = if (b & mask).count_ones() % 2 == 1 {
                -1.0
            } else {
                1.0
            };
            m[(a, b ^ 1 << i)] * sign
        });
        m += mk * C64::new(t, 0.0);
    }
    let tr = m.trace();
    Ok(DensityMatrix { n, mat: m / tr })
}

/// `sum_e p^{|e|} (1-p)^{n-|e|} Z^e |psi⟩⟨psi| Z^e` for an explicit flip
/// probability.
pub fn noisy_graph_state(g: &Graph, p: f64) -> Result<DensityMatrix> {
    check_qubits("noisy graph state", g.n(), MAX_MIXED_QUBITS)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("probability {p} outside [0, 1]")));
    }
    let n = g.n();
    let d = 1usize << n;
    let mut rho = DMatrix::from_element(d, d, ZERO);
    for e in 0..(1u64 << n) {
        let k = e.count_ones() as i32;
        let w = p.powi(k) * (1.0 - p).powi(n as i32 - k);
        if w == 0.0 {
            continue;
        }
        let psi = graph_state_with_errors(g, e)?;
        rho.gerc(C64::new(w, 0.0), &psi.amps, &psi.amps, ONE);
    }
    Ok(DensityMatrix { n, mat: rho })
}

/// The thermal state rebuilt from independent single-qubit `Z` channels.
pub fn thermal_state_via_errors(
    g: &Graph,
    coupling: f64,
    temperature: f64,
) -> Result<DensityMatrix> {
    let p = ThermalModel::new(coupling, temperature)?.error_prob();
    noisy_graph_state(g, p)
}

/// `U_G (B sum_i X_i) U_G^dag` with `U_G` the product of CZ over the edges.
pub fn isospectral_hamiltonian(g: &Graph, coupling: f64) -> Result<DMatrix<C64>> {
    check_qubits("isospectral Hamiltonian", g.n(), MAX_PURE_QUBITS)?;
    let n = g.n();
    let d = 1usize << n;
    let edges = g.edges();
    let u_diag: Vec<f64> = (0..d)
        .map(|x| {
            let parity = edges
                .iter()
                .filter(|&&(a, b)| x >> a & 1 == 1 && x >> b & 1 == 1)
                .count();
            if parity % 2 == 1 {
                -1.0
            } else {
                1.0
            }
        })
        .collect();
    let mut h = DMatrix::from_element(d, d, ZERO);
    for b in 0..d {
        for i in 0..n {
            let a = b ^ 1 << i;
            h[(a, b)] += C64::new(coupling * u_diag[a] * u_diag[b], 0.0);
        }
    }
    Ok(h)
}

/// Dense matrix of a single-qubit gate acting on qubit `q` of `n`.
pub fn embed_single(g: &Gate, q: usize, n: usize) -> DMatrix<C64> {
    let d = 1usize << n;
    DMatrix::from_fn(d, d, |r, c| {
        if (r ^ c) & !(1 << q) != 0 {
            ZERO
        } else {
            g[r >> q & 1][c >> q & 1]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Family;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fam(s: &str) -> Graph {
        s.parse::<Family>().unwrap().build().unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> Graph {
        let mut g = Graph::empty(n);
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(0.5) {
                    g = g.toggle_edge(u, v).unwrap();
                }
            }
        }
        g
    }

    fn random_density(n: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let d = 1 << n;
        let a = DMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let m = &a * a.adjoint();
        let tr = m.trace();
        DensityMatrix::from_matrix(n, m / tr).unwrap()
    }

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
        let amps = DVector::from_fn(1 << n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let norm = amps.norm();
        StateVector::from_amplitudes(n, amps / c(norm)).unwrap()
    }

    #[test]
    fn small_graph_states() {
        let single = graph_state_vector(&Graph::empty(1)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((single.amplitudes()[0] - c(r)).norm() < 1e-15);
        assert!((single.amplitudes()[1] - c(r)).norm() < 1e-15);

        let pair = graph_state_vector(&fam("path:2")).unwrap();
        let expect = [0.5, 0.5, 0.5, -0.5];
        for (a, e) in pair.amplitudes().iter().zip(expect) {
            assert!((a - c(e)).norm() < 1e-15);
        }
    }

    #[test]
    fn graph_states_are_stabilized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=6 {
            for _ in 0..5 {
                let g = random_graph(n, &mut rng);
                let psi = graph_state_vector(&g).unwrap();
                for i in 0..n {
                    let k = stabilizer(&g, i).unwrap();
                    let out = &k * psi.amplitudes();
                    assert!((out - psi.amplitudes()).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stabilizers_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=6 {
            let g = random_graph(n, &mut rng);
            let ks: Vec<_> = (0..n).map(|i| stabilizer(&g, i).unwrap()).collect();
            for a in &ks {
                for b in &ks {
                    assert!((a * b - b * a).camax() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_spectrum_and_ground_state() {
        let h = graph_hamiltonian(&Graph::empty(1), 1.0).unwrap();
        let ev = hermitian_eigenvalues(&h);
        assert!((ev[0] + 0.5).abs() < 1e-12 && (ev[1] - 0.5).abs() < 1e-12);

        // Energies are -1/2 sum of independent +-1 eigenvalues.
        let g = fam("path:3");
        let mut expect: Vec<f64> = (0..8u32)
            .map(|s| {
                -0.5 * (0..3)
                    .map(|i| if s >> i & 1 == 1 { -1.0 } else { 1.0 })
                    .sum::<f64>()
            })
            .collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ev = hermitian_eigenvalues(&graph_hamiltonian(&g, 1.0).unwrap());
        for (a, b) in ev.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(expect, vec![-1.5, -0.5, -0.5, -0.5, 0.5, 0.5, 0.5, 1.5]);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=5 {
            let g = random_graph(n, &mut rng);
            let h = graph_hamiltonian(&g, 1.3).unwrap();
            let psi = graph_state_vector(&g).unwrap();
            let hpsi = &h * psi.amplitudes();
            let energy = -1.3 * n as f64 / 2.0;
            assert!((hpsi - psi.amplitudes() * c(energy)).norm() < 1e-12);
            let ev = hermitian_eigenvalues(&h);
            assert!((ev[0] - energy).abs() < 1e-12);
            assert!(ev[1] - energy > 1.0, "ground state must be unique");
        }
    }

    #[test]
    fn error_patterns_form_orthonormal_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in 1..=5 {
            let g = random_graph(n, &mut rng);
            let basis: Vec<_> = (0..1u64 << n)
                .map(|e| graph_state_with_errors(&g, e).unwrap())
                .collect();
            for (i, a) in basis.iter().enumerate() {
                for (j, b) in basis.iter().enumerate() {
                    let ip = a.inner(b).norm();
                    if i == j {
                        assert!((ip - 1.0).abs() < 1e-12);
                    } else {
                        assert!(ip < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn thermal_state_limits() {
        let g = fam("path:3");
        let psi = graph_state_vector(&g).unwrap();
        let cold = thermal_state(&g, 1.0, 1.0 / 50.0).unwrap();
        assert!(cold.is_valid());
        assert!(cold.expectation(&psi) > 1.0 - 1e-6);
        let hot = thermal_state(&g, 1.0, 1e4).unwrap();
        let mixed = DensityMatrix::maximally_mixed(3).unwrap();
        assert!(hot.trace_distance(&mixed) < 1e-3);
    }

    #[test]
    fn thermal_state_matches_generic_exponential() {
        // Independent route: diagonalise H and exponentiate its eigenvalues.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=4 {
            let g = random_graph(n, &mut rng);
            for &t in &[0.3, 1.0, 3.0] {
                let h = graph_hamiltonian(&g, 1.0).unwrap();
                let eig = SymmetricEigen::new(h);
                let w = eig.eigenvalues.map(|l| c((-l / t).exp()));
                let v = &eig.eigenvectors;
                let m = v * DMatrix::from_diagonal(&w) * v.adjoint();
                let tr = m.trace();
                let reference = DensityMatrix::from_matrix(n, m / tr).unwrap();
                let rho = thermal_state(&g, 1.0, t).unwrap();
                assert!(rho.trace_distance(&reference) < 1e-10);
            }
        }
    }

    #[test]
    fn gibbs_equals_z_error_decomposition() {
        let g = fam("path:2");
        let a = thermal_state(&g, 1.0, 1.0).unwrap();
        let b = thermal_state_via_errors(&g, 1.0, 1.0).unwrap();
        assert!(a.trace_distance(&b) < 1e-9);

        let psi = graph_state_vector(&g).unwrap();
        let pure = noisy_graph_state(&g, 0.0).unwrap();
        assert!(pure.trace_distance(&psi.to_density()) < 1e-15);
    }

    #[test]
    fn fidelity_of_noisy_path_is_product() {
        for n in 2..=6 {
            let g = Graph::from_family(&Family::Path(n)).unwrap();
            let psi = graph_state_vector(&g).unwrap();
            for &p in &[0.05, 0.2, 0.4] {
                let rho = noisy_graph_state(&g, p).unwrap();
                let f = rho.expectation(&psi);
                assert!((f - (1.0 - p).powi(n as i32)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_excitation_weight_ratio() {
        // Gibbs weight of Z_0|psi⟩ over |psi⟩ is exp(-beta B) = p / (1 - p).
        let g = fam("cycle:4");
        let (b, t) = (1.0, 0.7);
        let rho = thermal_state(&g, b, t).unwrap();
        let ground = rho.expectation(&graph_state_vector(&g).unwrap());
        let excited = rho.expectation(&graph_state_with_errors(&g, 1).unwrap());
        let p = ThermalModel::new(b, t).unwrap().error_prob();
        assert!((excited / ground - (-b / t).exp()).abs() < 1e-12);
        assert!((excited / ground - p / (1.0 - p)).abs() < 1e-12);
    }

    #[test]
    fn isospectral_construction() {
        let n = 3;
        let empty = isospectral_hamiltonian(&Graph::empty(n), 2.0).unwrap();
        let mut sum_x = DMatrix::from_element(8, 8, ZERO);
        for q in 0..n {
            sum_x += embed_single(&gates::x(), q, n) * c(2.0);
        }
        assert!((&empty - &sum_x).camax() < 1e-15);

        // U_G X_0 U_G^dag = X_0 Z_1 = K_0 on the pair.
        let g = fam("path:2");
        let conj = isospectral_hamiltonian(&g, 1.0).unwrap();
        let k_sum = stabilizer(&g, 0).unwrap() + stabilizer(&g, 1).unwrap();
        assert!((&conj - &k_sum).camax() < 1e-15);
        let cz = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(1.0), c(1.0), c(-1.0)]));
        let x0 = embed_single(&gates::x(), 0, 2);
        assert!((&cz * x0 * &cz - stabilizer(&g, 0).unwrap()).camax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for n in 1..=5 {
            let g = random_graph(n, &mut rng);
            let iso = hermitian_eigenvalues(&isospectral_hamiltonian(&g, 1.0).unwrap());
            let free =
                hermitian_eigenvalues(&isospectral_hamiltonian(&Graph::empty(n), 1.0).unwrap());
            for (a, b) in iso.iter().zip(&free) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cz_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..20 {
            let psi = random_state(2, &mut rng);
            let mut phi = psi.clone();
            phi.apply_cz(0, 1).unwrap();
            phi.apply_cz(1, 0).unwrap();
            assert!(psi.trace_distance(&phi) < 1e-14);
            assert!((psi.amplitudes() - phi.amplitudes()).norm() < 1e-15);
        }
    }

    #[test]
    fn z_measurement_cuts_the_path() {
        let g = fam("path:3");
        let psi = graph_state_vector(&g).unwrap();
        let isolated = graph_state_vector(&Graph::empty(2)).unwrap();
        for out in Outcome::both() {
            let (prob, post) = psi.collapse(1, Basis::Z, out).unwrap();
            assert!((prob - 0.5).abs() < 1e-14);
            let mut post = post.unwrap();
            if out.is_minus() {
                // Outcome-conditioned Z on both former neighbours.
                post.apply_z(0).unwrap();
                post.apply_z(1).unwrap();
            }
            assert!(post.trace_distance(&isolated) < 1e-14);
        }
    }

    #[test]
    fn density_and_vector_measurements_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        for basis in [Basis::X, Basis::Y, Basis::Z] {
            let psi = random_state(3, &mut rng);
            let rho = psi.to_density();
            for out in Outcome::both() {
                let (pv, sv) = psi.collapse(1, basis, out).unwrap();
                let (pd, sd) = rho.collapse(1, basis, out).unwrap();
                assert!((pv - pd).abs() < 1e-12);
                assert!(sd.unwrap().trace_distance(&sv.unwrap().to_density()) < 1e-12);
                let (_, full) = psi.project(1, basis, out).unwrap();
                let (_, full_d) = rho.project(1, basis, out).unwrap();
                assert!(full_d.unwrap().trace_distance(&full.unwrap().to_density()) < 1e-12);
            }
        }
    }

    #[test]
    fn sampled_measurement_reports_consistent_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(144);
        let psi = random_state(3, &mut rng);
        for _ in 0..20 {
            let (out, prob, post) = psi.measure(2, Basis::X, &mut rng).unwrap();
            let (p2, _) = psi.project(2, Basis::X, out).unwrap();
            assert!((prob - p2).abs() < 1e-15);
            assert!((post.norm() - 1.0).abs() < 1e-12);
        }
        let mut bad = psi.clone();
        bad.amps *= c(2.0);
        assert!(matches!(
            bad.measure(0, Basis::Z, &mut rng),
            Err(Error::Contract(_))
        ));
        let rho = DensityMatrix::from_matrix(3, psi.to_density().matrix() * c(3.0)).unwrap();
        assert!(matches!(
            rho.project(0, Basis::Z, Outcome::Plus),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn fidelity_and_distance_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(233);
        for n in 1..=3 {
            let rho = random_density(n, &mut rng);
            assert!(rho.is_valid());
            assert!((rho.fidelity(&rho) - 1.0).abs() < 1e-9);
            assert!(rho.trace_distance(&rho) < 1e-14);
        }
        let a = DensityMatrix::from_pure(&StateVector::zero(1).unwrap()).unwrap();
        let mut b = a.clone();
        b.apply_x(0).unwrap();
        assert!((a.trace_distance(&b) - 1.0).abs() < 1e-14);
        assert!(a.fidelity(&b) < 1e-14);
    }

    #[test]
    fn partial_trace_tensor_and_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(377);
        let a = random_density(2, &mut rng);
        let b = random_density(1, &mut rng);
        let ab = a.tensor(&b).unwrap();
        assert!(ab.partial_trace(&[0, 1]).trace_distance(&a) < 1e-13);
        assert!(ab.partial_trace(&[2]).trace_distance(&b) < 1e-13);
        // Swapping the roles via permutation.
        let ba = b.tensor(&a).unwrap();
        let permuted = ab.permute_qubits(&[2, 0, 1]).unwrap();
        assert!(permuted.trace_distance(&ba) < 1e-13);
        assert!(ab.permute_qubits(&[0, 0, 1]).is_err());
    }

    #[test]
    fn z_noise_channel_matches_pattern_sum() {
        let g = fam("star:3");
        let mut rho = graph_state_vector(&g).unwrap().to_density();
        for q in 0..3 {
            rho.z_noise(q, 0.15).unwrap();
        }
        assert!(rho.trace_distance(&noisy_graph_state(&g, 0.15).unwrap()) < 1e-13);
    }

    #[test]
    fn capacity_limits() {
        let big = Graph::empty(13);
        assert!(matches!(
            graph_state_vector(&big),
            Err(Error::Capacity { .. })
        ));
        let mid = Graph::empty(11);
        assert!(matches!(
            thermal_state(&mid, 1.0, 1.0),
            Err(Error::Capacity { .. })
        ));
    }
}

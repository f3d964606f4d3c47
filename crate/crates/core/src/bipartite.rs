//! Bell-diagonal pairs under `Z` noise and their distillation.
//!
//! Components are indexed by the error class acting on the two-qubit graph
//! state `CZ|++⟩`: index `e` means `Z_a^(e & 1) Z_b^(e >> 1)`, so the order is
//! `[I, Z_a, Z_b, Z_a Z_b]`. After a Hadamard on `b` these are the Bell states
//! `[Φ+, Φ-, Ψ+, Ψ-]`.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{self, gates, Basis, DensityMatrix, Gate, Outcome, StateVector};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const SUM_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ROUNDS: usize = 64;
/// Largest number of recurrence rounds tried before hashing in
/// [`BellDiagonal::composite_rate`]. With 8 rounds the estimate is already
/// zero from `p ≈ 0.281`; 64 keeps it positive to within `2e-8` of the
/// threshold.
pub const COMPOSITE_MAX_ROUNDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonal {
    probs: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceStep {
    pub state: BellDiagonal,
    pub success_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillOutcome {
    pub converged: bool,
    pub rounds: usize,
    /// Expected input pairs consumed per output pair, `prod 2 / success`.
    pub cost: f64,
    pub fidelity: f64,
    pub state: BellDiagonal,
    /// Fidelity after each round, starting with the input.
    pub trajectory: Vec<f64>,
}

fn binary_entropy_terms(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&q| q > 0.0)
        .map(|&q| -q * q.log2())
        .sum()
}

impl BellDiagonal {
    pub fn new(probs: [f64; 4]) -> Result<Self> {
        if probs
            .iter()
            .any(|q| !(-SUM_TOL..=1.0 + SUM_TOL).contains(q))
        {
            return Err(Error::param(format!("components {probs:?} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::param(format!("components {probs:?} sum to {sum}")));
        }
        Ok(BellDiagonal {
            probs: probs.map(|q| q.clamp(0.0, 1.0)),
        })
    }

    pub fn perfect() -> Self {
        BellDiagonal {
            probs: [1.0, 0.0, 0.0, 0.0],
        }
    }

    /// Pair whose two qubits each flip independently with probability `p`.
    pub fn from_z_noise(p: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::param(format!(
                "error probability must lie in [0, 1/2], got {p}"
            )));
        }
        let q = 1.0 - p;
        BellDiagonal::new([q * q, p * q, p * q, p * p])
    }

    pub fn probs(&self) -> [f64; 4] {
        self.probs
    }

    pub fn fidelity(&self) -> f64 {
        self.probs[0]
    }

    pub fn max_component(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// True iff the largest component exceeds 1/2 strictly.
    pub fn is_purifiable(&self) -> bool {
        self.max_component() > 0.5
    }

    /// Shannon entropy of the components, in bits.
    pub fn entropy(&self) -> f64 {
        binary_entropy_terms(&self.probs)
    }

    pub fn hashing_yield(&self) -> f64 {
        (1.0 - self.entropy()).max(0.0)
    }

    /// Draws an error class with the component probabilities.
    pub fn sample_class<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        for (c, &q) in self.probs.iter().enumerate() {
            acc += q;
            if r < acc {
                return c;
            }
        }
        // Rounding left a sliver above the running sum.
        self.probs.iter().rposition(|&q| q > 0.0).unwrap_or(0)
    }

    /// Slot assignment used before each recurrence round: the largest
    /// component, the smallest of the rest, then the remaining two in index
    /// order. Ties keep the lower index first.
    pub fn recurrence_slots(&self) -> [usize; 4] {
        let p = &self.probs;
        let mut a = 0;
        for c in 1..4 {
            if p[c] > p[a] {
                a = c;
            }
        }
        let rest: Vec<usize> = (0..4).filter(|&c| c != a).collect();
        let mut b = rest[0];
        for &c in &rest[1..] {
            if p[c] < p[b] {
                b = c;
            }
        }
        let cd: Vec<usize> = rest.into_iter().filter(|&c| c != b).collect();
        [a, b, cd[0], cd[1]]
    }

    /// One two-copy recurrence round.
    ///
    /// The pre-rotation places the largest and the smallest component in the
    /// `{I, Z_a}` sector. Bilateral CNOT from the first pair to the second,
    /// followed by `Z` measurement of the second pair, keeps the first pair
    /// when the two outcomes agree. With slots `(A, B, C, D)` the result is
    /// `I: (A^2 + B^2)/N`, `Z_a: 2AB/N`, `Z_b: (C^2 + D^2)/N`,
    /// `Z_a Z_b: 2CD/N`, kept with probability `N = (A + B)^2 + (C + D)^2`.
    /// `N >= 1/2` for every valid input.
    pub fn recurrence_step(&self) -> RecurrenceStep {
        let [a, b, c, d] = self.recurrence_slots().map(|i| self.probs[i]);
        let norm = (a + b) * (a + b) + (c + d) * (c + d);
        let probs = [
            (a * a + b * b) / norm,
            2.0 * a * b / norm,
            (c * c + d * d) / norm,
            2.0 * c * d / norm,
        ];
        RecurrenceStep {
            state: BellDiagonal { probs },
            success_prob: norm,
        }
    }

    /// Iterates [`recurrence_step`](Self::recurrence_step) until the fidelity
    /// reaches `target`, or gives up after `max_rounds` or when a round no
    /// longer raises the fidelity.
    pub fn distill(&self, target: f64, max_rounds: usize) -> Result<DistillOutcome> {
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::param(format!(
                "target fidelity must lie in (0, 1), got {target}"
            )));
        }
        let mut state = *self;
        let mut cost = 1.0;
        let mut trajectory = vec![state.fidelity()];
        let done = |s: &BellDiagonal, rounds, cost, trajectory| DistillOutcome {
            converged: s.fidelity() >= target,
            rounds,
            cost,
            fidelity: s.fidelity(),
            state: *s,
            trajectory,
        };
        if state.fidelity() >= target {
            return Ok(done(&state, 0, cost, trajectory));
        }
        if !state.is_purifiable() && target > state.max_component() {
            return Ok(done(&state, 0, cost, trajectory));
        }
        for round in 1..=max_rounds {
            let step = state.recurrence_step();
            if step.state.fidelity() <= state.fidelity() {
                return Ok(done(&state, round - 1, cost, trajectory));
            }
            state = step.state;
            cost *= 2.0 / step.success_prob;
            trajectory.push(state.fidelity());
            if state.fidelity() >= target {
                return Ok(done(&state, round, cost, trajectory));
            }
        }
        Ok(done(&state, max_rounds, cost, trajectory))
    }

    /// Yield of `k` recurrence rounds followed by hashing, maximised over
    /// `k <= COMPOSITE_MAX_ROUNDS`. Each round keeps `success / 2` pairs per input pair.
    pub fn composite_rate(&self) -> f64 {
        if !self.is_purifiable() {
            return 0.0;
        }
        let mut state = *self;
        let mut survive = 1.0;
        let mut best = state.hashing_yield();
        for _ in 0..COMPOSITE_MAX_ROUNDS {
            let step = state.recurrence_step();
            survive *= step.success_prob / 2.0;
            state = step.state;
            best = best.max(survive * state.hashing_yield());
        }
        best
    }
}

/// A numerically identified action of a local two-qubit Clifford on the
/// four Bell-diagonal classes.
#[derive(Debug, Clone)]
struct LocalMove {
    gate_a: Gate,
    gate_b: Gate,
    perm: [usize; 4],
}

/// Basis vectors `H_b Z^e |CZ ++⟩` for the four classes.
fn bell_vectors() -> Vec<StateVector> {
    let pair = Graph::from_edges(2, &[(0, 1)]).expect("valid pair");
    (0..4)
        .map(|e| {
            let mut v = dense::graph_state_with_errors(&pair, e).expect("two qubits");
            v.apply_h(1).expect("qubit 1 exists");
            v
        })
        .collect()
}

fn class_action(gate_a: &Gate, gate_b: &Gate, bell: &[StateVector]) -> Option<[usize; 4]> {
    let mut perm = [usize::MAX; 4];
    for (j, v) in bell.iter().enumerate() {
        let mut w = v.clone();
        w.apply_single(0, gate_a).ok()?;
        w.apply_single(1, gate_b).ok()?;
        let i = (0..4).find(|&i| (bell[i].inner(&w).norm() - 1.0).abs() < 1e-12)?;
        perm[j] = i;
    }
    let mut seen = [false; 4];
    for &i in &perm {
        if std::mem::replace(&mut seen[i], true) {
            return None;
        }
    }
    Some(perm)
}

fn local_moves(bell: &[StateVector]) -> Vec<LocalMove> {
    let id = [
        [dense::C64::new(1.0, 0.0), dense::C64::new(0.0, 0.0)],
        [dense::C64::new(0.0, 0.0), dense::C64::new(1.0, 0.0)],
    ];
    let half = std::f64::consts::FRAC_PI_2;
    let candidates = [
        (gates::z(), id),
        (gates::x(), id),
        (gates::rx(half), gates::rx(-half)),
        (gates::h(), gates::h()),
        (gates::s(), gates::dagger(&gates::s())),
    ];
    candidates
        .into_iter()
        .filter_map(|(a, b)| {
            class_action(&a, &b, bell).map(|perm| LocalMove {
                gate_a: a,
                gate_b: b,
                perm,
            })
        })
        .collect()
}

/// Shortest word of local moves whose combined class permutation satisfies
/// `accept`, by breadth-first search over the reachable permutations.
fn find_word(moves: &[LocalMove], accept: impl Fn(&[usize; 4]) -> bool) -> Option<Vec<usize>> {
    let start = [0, 1, 2, 3];
    let mut queue = VecDeque::from([(start, Vec::new())]);
    let mut seen = vec![start];
    while let Some((perm, word)) = queue.pop_front() {
        if accept(&perm) {
            return Some(word);
        }
        for (m, mv) in moves.iter().enumerate() {
            let next = perm.map(|i| mv.perm[i]);
            if !seen.contains(&next) {
                seen.push(next);
                let mut w = word.clone();
                w.push(m);
                queue.push_back((next, w));
            }
        }
    }
    None
}

fn cnot(rho: &mut DensityMatrix, control: usize, target: usize) -> Result<()> {
    rho.apply_h(target)?;
    rho.apply_cz(control, target)?;
    rho.apply_h(target)
}

/// Runs one recurrence round as an explicit four-qubit circuit: two copies
/// of the pair in the Bell frame, a local Clifford pre-rotation found by
/// search, bilateral CNOT, and post-selection on agreeing `Z` outcomes of
/// the second pair.
///
/// This is the reference for [`BellDiagonal::recurrence_step`].
pub fn dense_recurrence_step(bd: &BellDiagonal) -> Result<RecurrenceStep> {
    let bell = bell_vectors();
    let mut pair = DensityMatrix::from_matrix(2, nalgebra::DMatrix::zeros(4, 4))?;
    let mut mat = pair.matrix().clone();
    for (c, v) in bell.iter().enumerate() {
        mat += v.to_density().matrix() * dense::C64::new(bd.probs[c], 0.0);
    }
    pair = DensityMatrix::from_matrix(2, mat)?;

    let [a, b, _, _] = bd.recurrence_slots();
    let moves = local_moves(&bell);
    let word = find_word(&moves, |perm| perm[a] == 0 && perm[b] == 1)
        .ok_or_else(|| Error::Contract("no local move realises the slot assignment".into()))?;

    // Pair one on qubits (0, 1), pair two on (2, 3); Alice holds 0 and 2.
    let mut rho = pair.tensor(&pair)?;
    for &m in &word {
        for (qa, qb) in [(0, 1), (2, 3)] {
            rho.apply_single(qa, &moves[m].gate_a)?;
            rho.apply_single(qb, &moves[m].gate_b)?;
        }
    }
    cnot(&mut rho, 0, 2)?;
    cnot(&mut rho, 1, 3)?;

    let mut kept = nalgebra::DMatrix::zeros(4, 4);
    let mut success = 0.0;
    for out in Outcome::both() {
        let (p1, first) = rho.collapse(2, Basis::Z, out)?;
        let Some(first) = first else { continue };
        let (p2, second) = first.collapse(2, Basis::Z, out)?;
        let Some(second) = second else { continue };
        kept += second.matrix() * dense::C64::new(p1 * p2, 0.0);
        success += p1 * p2;
    }
    if success <= 0.0 {
        return Err(Error::Contract("recurrence round never succeeds".into()));
    }
    let out = DensityMatrix::from_matrix(2, kept / dense::C64::new(success, 0.0))?;
    let probs: Vec<f64> = bell.iter().map(|v| out.expectation(v)).collect();
    Ok(RecurrenceStep {
        state: BellDiagonal::new([probs[0], probs[1], probs[2], probs[3]])?,
        success_prob: success,
    })
}

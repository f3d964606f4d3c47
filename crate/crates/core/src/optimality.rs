//! Can two parties rebuild the noisy graph state from noisy pairs?
//!
//! If Alice and Bob, holding the two sides of a bipartition, can prepare
//! `rho(p)` exactly from copies of the noisy pair `rho_2(p)` by local
//! operations, then purifying `rho(p)` would also purify `rho_2(p)`, so the
//! pair threshold `(1 - p)^2 > 1/2` bounds every protocol for that graph.
//!
//! Only one family of constructions is searched, so a negative verdict means
//! "none found in this family", not impossibility. In the family:
//!
//! * every cross edge consumes one copy of `rho_2(p)`, one half per side;
//! * a vertex's qubit is the half of its first cross edge in the wiring
//!   order, or a locally prepared `|+⟩` with the same `Z` noise if it has no
//!   cross edge;
//! * further halves at the same vertex are fused into that qubit right away
//!   (`H`, `CZ`, `X` measurement, `Z` correction on the partner);
//! * edges inside a side are added last with local `CZ` gates.
//!
//! Fusing two noisy halves leaves flip probability `2p(1 - p)` on the
//! vertex, so a construction succeeds exactly when the cross edges form a
//! matching. The verdicts below are nevertheless computed on dense states.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{self, Basis, DensityMatrix, Outcome, StateVector};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const MAX_VERTICES: usize = 8;
pub const DEFAULT_TOL: f64 = 1e-9;
/// Cross-edge sets up to this size have every wiring order tried.
pub const MAX_PERMUTED_CROSS_EDGES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bipartition {
    alice: Vec<usize>,
    bob: Vec<usize>,
}

impl Bipartition {
    /// Alice holds `alice`, Bob the remaining vertices of `0..n`. Both sides
    /// must be nonempty.
    pub fn new(n: usize, alice: &[usize]) -> Result<Self> {
        let mut a: Vec<usize> = alice.to_vec();
        a.sort_unstable();
        a.dedup();
        if a.len() != alice.len() || a.iter().any(|&v| v >= n) {
            return Err(Error::param(format!(
                "{alice:?} is not a vertex subset of 0..{n}"
            )));
        }
        let b: Vec<usize> = (0..n).filter(|v| a.binary_search(v).is_err()).collect();
        if a.is_empty() || b.is_empty() {
            return Err(Error::param("both sides of a bipartition must be nonempty"));
        }
        Ok(Bipartition { alice: a, bob: b })
    }

    /// Every bipartition with vertex 0 on Alice's side.
    pub fn all(n: usize) -> Vec<Bipartition> {
        if !(2..=20).contains(&n) {
            return Vec::new();
        }
        (0..1usize << (n - 1))
            .filter_map(|mask| {
                let alice: Vec<usize> = (0..n)
                    .filter(|&v| v == 0 || mask >> (v - 1) & 1 == 0)
                    .collect();
                Bipartition::new(n, &alice).ok()
            })
            .collect()
    }

    pub fn alice(&self) -> &[usize] {
        &self.alice
    }

    pub fn bob(&self) -> &[usize] {
        &self.bob
    }

    pub fn is_alice(&self, v: usize) -> bool {
        self.alice.binary_search(&v).is_ok()
    }

    pub fn cross_edges(&self, g: &Graph) -> Vec<(usize, usize)> {
        g.edges()
            .into_iter()
            .filter(|&(u, v)| self.is_alice(u) != self.is_alice(v))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Step {
    /// A copy of the noisy pair across `edge`.
    Pair { edge: (usize, usize) },
    /// The half of `edge`'s pair at `vertex` fused into `vertex`'s qubit.
    Fuse { vertex: usize, edge: (usize, usize) },
    /// A locally prepared noisy `|+⟩` for `vertex`.
    LocalQubit { vertex: usize },
    /// A local `CZ` on an edge inside one side.
    LocalCz { edge: (usize, usize) },
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub graph: Graph,
    pub bipartition: Bipartition,
    pub cross_edges: Vec<(usize, usize)>,
    pub wiring: Vec<(usize, usize)>,
    pub steps: Vec<Step>,
    /// Rebuilt state with qubit `v` holding vertex `v`.
    pub state: DensityMatrix,
}

impl Reconstruction {
    pub fn pair_budget(&self) -> usize {
        self.cross_edges.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub bipartition: Bipartition,
    pub wiring: Vec<(usize, usize)>,
    pub pair_budget: usize,
    pub trace_distance: f64,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeVerdict {
    pub edge: (usize, usize),
    pub applies: bool,
    pub witness: Option<Bipartition>,
}

fn dephased_plus(p: f64) -> Result<DensityMatrix> {
    let mut rho = StateVector::plus(1)?.to_density();
    rho.z_noise(0, p)?;
    Ok(rho)
}

/// Fuses register qubit `q` (a leaf whose partner is `r`) into `k`, averaging
/// over both `X` outcomes after the `Z_r` correction. Qubit `q` is removed.
fn fuse(rho: &DensityMatrix, k: usize, q: usize, r: usize) -> Result<DensityMatrix> {
    let mut work = rho.clone();
    work.apply_h(q)?;
    work.apply_cz(k, q)?;
    let r_after = if r > q { r - 1 } else { r };
    let d = 1usize << (rho.n() - 1);
    let mut acc = nalgebra::DMatrix::zeros(d, d);
    for out in Outcome::both() {
        let (prob, post) = work.collapse(q, Basis::X, out)?;
        let Some(mut post) = post else { continue };
        if out.is_minus() {
            post.apply_z(r_after)?;
        }
        acc += post.matrix() * dense::C64::new(prob, 0.0);
    }
    DensityMatrix::from_matrix(rho.n() - 1, acc)
}

fn check_size(g: &Graph) -> Result<()> {
    if g.n() > MAX_VERTICES {
        return Err(Error::Capacity {
            what: "reconstruction",
            requested: g.n(),
            limit: MAX_VERTICES,
        });
    }
    Ok(())
}

/// Builds the construction with cross edges consumed in ascending order.
pub fn build_reconstruction(g: &Graph, bip: &Bipartition, p: f64) -> Result<Reconstruction> {
    let wiring = bip.cross_edges(g);
    build_with_wiring(g, bip, p, &wiring)
}

/// Builds the construction consuming the cross edges in `wiring` order.
pub fn build_with_wiring(
    g: &Graph,
    bip: &Bipartition,
    p: f64,
    wiring: &[(usize, usize)],
) -> Result<Reconstruction> {
    check_size(g)?;
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::param(format!(
            "error probability must lie in [0, 1/2], got {p}"
        )));
    }
    if bip.alice.len() + bip.bob.len() != g.n() {
        return Err(Error::param("bipartition does not match the graph"));
    }
    let cross = bip.cross_edges(g);
    let mut sorted_wiring = wiring.to_vec();
    sorted_wiring.sort_unstable();
    if sorted_wiring != cross {
        return Err(Error::param("wiring must list every cross edge once"));
    }

    let pair = dense::noisy_graph_state(&Graph::from_edges(2, &[(0, 1)])?, p)?;
    let mut steps = Vec::new();
    // labels[i] = vertex held by register qubit i.
    let mut labels: Vec<usize> = Vec::new();
    let mut rho: Option<DensityMatrix> = None;
    let append = |rho: Option<DensityMatrix>, piece: &DensityMatrix| -> Result<DensityMatrix> {
        match rho {
            None => Ok(piece.clone()),
            Some(r) => r.tensor(piece),
        }
    };

    for &(u, v) in wiring {
        steps.push(Step::Pair { edge: (u, v) });
        let mut next = append(rho.take(), &pair)?;
        let (qu, qv) = (labels.len(), labels.len() + 1);
        let mut slots = vec![(u, qu), (v, qv)];
        labels.push(u);
        labels.push(v);
        // Fuse halves at vertices that already have a qubit, lowest first.
        slots.sort_unstable();
        for (vertex, _) in slots {
            let position = |x: usize, labels: &[usize]| labels.iter().position(|&l| l == x);
            let first = position(vertex, &labels).expect("vertex present");
            let last = labels
                .iter()
                .rposition(|&l| l == vertex)
                .expect("vertex present");
            if first == last {
                continue;
            }
            let other = if vertex == u { v } else { u };
            let partner = labels
                .iter()
                .rposition(|&l| l == other)
                .expect("partner present");
            next = fuse(&next, first, last, partner)?;
            labels.remove(last);
            steps.push(Step::Fuse {
                vertex,
                edge: (u, v),
            });
        }
        rho = Some(next);
    }
    for vertex in 0..g.n() {
        if !labels.contains(&vertex) {
            steps.push(Step::LocalQubit { vertex });
            rho = Some(append(rho.take(), &dephased_plus(p)?)?);
            labels.push(vertex);
        }
    }
    let mut rho = rho.ok_or_else(|| Error::param("graph has no vertices"))?;
    for (u, v) in g.edges() {
        if bip.is_alice(u) == bip.is_alice(v) {
            steps.push(Step::LocalCz { edge: (u, v) });
            let a = labels.iter().position(|&l| l == u).expect("vertex present");
            let b = labels.iter().position(|&l| l == v).expect("vertex present");
            rho.apply_cz(a, b)?;
        }
    }
    // New qubit i must be the register qubit holding vertex i.
    let perm: Vec<usize> = (0..g.n())
        .map(|v| {
            labels
                .iter()
                .position(|&l| l == v)
                .expect("every vertex placed")
        })
        .collect();
    let state = rho.permute_qubits(&perm)?;
    Ok(Reconstruction {
        graph: g.clone(),
        bipartition: bip.clone(),
        cross_edges: cross,
        wiring: wiring.to_vec(),
        steps,
        state,
    })
}

/// Compares the ascending-order construction with `rho(p)`.
pub fn verify_reconstruction(
    g: &Graph,
    bip: &Bipartition,
    p: f64,
    tol: f64,
) -> Result<Verification> {
    let wiring = bip.cross_edges(g);
    verify_wiring(g, bip, p, tol, &wiring)
}

pub fn verify_wiring(
    g: &Graph,
    bip: &Bipartition,
    p: f64,
    tol: f64,
    wiring: &[(usize, usize)],
) -> Result<Verification> {
    let rec = build_with_wiring(g, bip, p, wiring)?;
    let target = dense::noisy_graph_state(g, p)?;
    let distance = rec.state.trace_distance(&target);
    Ok(Verification {
        bipartition: bip.clone(),
        wiring: wiring.to_vec(),
        pair_budget: rec.pair_budget(),
        trace_distance: distance,
        matches: distance <= tol,
    })
}

fn permutations(items: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Wiring orders searched for a bipartition: all orders of up to five cross
/// edges, otherwise ascending order only.
pub fn canonical_wirings(g: &Graph, bip: &Bipartition) -> Vec<Vec<(usize, usize)>> {
    let cross = bip.cross_edges(g);
    if cross.len() <= MAX_PERMUTED_CROSS_EDGES {
        permutations(&cross)
    } else {
        vec![cross]
    }
}

/// Tries every wiring order for `bip`; returns the first match, or the
/// closest attempt.
pub fn search_bipartition(g: &Graph, bip: &Bipartition, p: f64, tol: f64) -> Result<Verification> {
    let mut best: Option<Verification> = None;
    for wiring in canonical_wirings(g, bip) {
        let v = verify_wiring(g, bip, p, tol, &wiring)?;
        if v.matches {
            return Ok(v);
        }
        if best
            .as_ref()
            .is_none_or(|b| v.trace_distance < b.trace_distance)
        {
            best = Some(v);
        }
    }
    best.ok_or_else(|| Error::param("no wiring to try"))
}

/// For each edge, whether some searched bipartition that cuts it rebuilds
/// `rho(p)`. Use `0 < p < 1/2`: at `p = 0` every construction is exact.
pub fn proof_applies(g: &Graph, p: f64, tol: f64) -> Result<Vec<EdgeVerdict>> {
    check_size(g)?;
    let results: Vec<Verification> = Bipartition::all(g.n())
        .par_iter()
        .map(|bip| search_bipartition(g, bip, p, tol))
        .collect::<Result<_>>()?;
    Ok(g.edges()
        .into_iter()
        .map(|(u, v)| {
            let witness = results
                .iter()
                .find(|r| r.matches && r.bipartition.is_alice(u) != r.bipartition.is_alice(v))
                .map(|r| r.bipartition.clone());
            EdgeVerdict {
                edge: (u, v),
                applies: witness.is_some(),
                witness,
            }
        })
        .collect())
}

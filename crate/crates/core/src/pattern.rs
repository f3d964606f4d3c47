//! Noisy graph states as a graph plus a `Z`-error pattern.
//!
//! A [`PatternState`] stands for the physical state
//! `Z^(errors ⊕ frame) |psi_G⟩`. The frame holds outcome-dependent `Z`
//! byproducts that are known classically and can be undone for free; the
//! error pattern is the unknown part. Since the states `Z^e |psi_G⟩` are
//! orthonormal, a trajectory is ideal exactly when its error pattern is zero.

use fixedbitset::FixedBitSet;
use rand::Rng;

use crate::dense::{self, Outcome, StateVector};
use crate::error::{Error, Result};
use crate::graph::{Graph, Relabel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternState {
    graph: Graph,
    z_errors: FixedBitSet,
    frame: FixedBitSet,
}

fn restrict(bits: &FixedBitSet, relabel: &Relabel, new_len: usize) -> FixedBitSet {
    let mut out = FixedBitSet::with_capacity(new_len);
    for old in bits.ones() {
        if let Some(new) = relabel[old] {
            out.insert(new);
        }
    }
    out
}

/// Composes two vertex maps: `first` then `second`.
pub fn compose_relabel(first: &Relabel, second: &Relabel) -> Relabel {
    first.iter().map(|m| m.and_then(|i| second[i])).collect()
}

impl PatternState {
    /// The ideal graph state of `graph`.
    pub fn ideal(graph: Graph) -> Self {
        let n = graph.n();
        PatternState {
            graph,
            z_errors: FixedBitSet::with_capacity(n),
            frame: FixedBitSet::with_capacity(n),
        }
    }

    pub fn with_errors(graph: Graph, z_errors: FixedBitSet) -> Result<Self> {
        if z_errors.len() != graph.n() {
            return Err(Error::param(format!(
                "error pattern has {} bits for {} vertices",
                z_errors.len(),
                graph.n()
            )));
        }
        let n = graph.n();
        Ok(PatternState {
            graph,
            z_errors,
            frame: FixedBitSet::with_capacity(n),
        })
    }

    /// Pattern from the low `graph.n()` bits of `mask`.
    pub fn from_mask(graph: Graph, mask: u64) -> Result<Self> {
        let n = graph.n();
        if n > 64 {
            return Err(Error::Capacity {
                what: "bitmask pattern",
                requested: n,
                limit: 64,
            });
        }
        let mut bits = FixedBitSet::with_capacity(n);
        for q in 0..n {
            if mask >> q & 1 == 1 {
                bits.insert(q);
            }
        }
        PatternState::with_errors(graph, bits)
    }

    /// One thermal trajectory: every qubit flips independently with
    /// probability `p`.
    pub fn sample_thermal<R: Rng + ?Sized>(graph: &Graph, p: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::param(format!(
                "error probability must lie in [0, 1/2], got {p}"
            )));
        }
        let n = graph.n();
        let mut bits = FixedBitSet::with_capacity(n);
        for q in 0..n {
            if rng.random_bool(p) {
                bits.insert(q);
            }
        }
        PatternState::with_errors(graph.clone(), bits)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn z_errors(&self) -> &FixedBitSet {
        &self.z_errors
    }

    pub fn frame(&self) -> &FixedBitSet {
        &self.frame
    }

    pub fn is_ideal(&self) -> bool {
        self.z_errors.is_clear()
    }

    pub fn apply_cz(&self, u: usize, v: usize) -> Result<PatternState> {
        Ok(PatternState {
            graph: self.graph.toggle_edge(u, v)?,
            z_errors: self.z_errors.clone(),
            frame: self.frame.clone(),
        })
    }

    /// `Z` measurement of `v` with a uniformly random outcome.
    pub fn measure_z<R: Rng + ?Sized>(
        &self,
        v: usize,
        rng: &mut R,
    ) -> Result<(Outcome, PatternState, Relabel)> {
        let outcome = Outcome::sample(rng);
        let (state, relabel) = self.measure_z_with(v, outcome)?;
        Ok((outcome, state, relabel))
    }

    /// `Z` measurement of `v` with a forced outcome. Both outcomes have
    /// probability 1/2 whatever the error pattern.
    ///
    /// Outcome `-1` leaves `Z` on every neighbour of `v`, which goes into the
    /// frame. An error on `v` itself only contributes a global phase and is
    /// dropped with the qubit.
    pub fn measure_z_with(&self, v: usize, outcome: Outcome) -> Result<(PatternState, Relabel)> {
        let mut frame = self.frame.clone();
        if v < self.n() && outcome.is_minus() {
            for u in self.graph.neighbors(v).ones() {
                frame.toggle(u);
            }
        }
        let (graph, relabel) = self.graph.delete_vertex(v)?;
        let n = graph.n();
        Ok((
            PatternState {
                z_errors: restrict(&self.z_errors, &relabel, n),
                frame: restrict(&frame, &relabel, n),
                graph,
            },
            relabel,
        ))
    }

    /// Fuses several qubits held by one party into `party[0]`.
    ///
    /// Every other listed qubit must be the half of a pair: a leaf whose only
    /// neighbour lies outside the list. For each such `q` (in list order) the
    /// party applies `H_q`, then `CZ(k, q)`, then measures `q` in the `X`
    /// basis. The net effect is to delete `q` and toggle the edge between
    /// `k` and the partner `r` of `q`. Outcome `-1` leaves `Z_r` (frame), and a
    /// `Z` on `q` moves onto `k` without changing the outcome statistics.
    ///
    /// Returns the new index of the kept qubit, the state, and the vertex map.
    pub fn merge_local<R: Rng + ?Sized>(
        &self,
        party: &[usize],
        rng: &mut R,
    ) -> Result<(usize, PatternState, Relabel)> {
        let outcomes: Vec<Outcome> = party.iter().skip(1).map(|_| Outcome::sample(rng)).collect();
        self.merge_local_with(party, &outcomes)
    }

    /// [`merge_local`](Self::merge_local) with forced outcomes, one per
    /// measured qubit.
    pub fn merge_local_with(
        &self,
        party: &[usize],
        outcomes: &[Outcome],
    ) -> Result<(usize, PatternState, Relabel)> {
        let Some((&kept, rest)) = party.split_first() else {
            return Err(Error::param("merge needs at least one qubit"));
        };
        if outcomes.len() != rest.len() {
            return Err(Error::param(format!(
                "{} outcomes supplied for {} measured qubits",
                outcomes.len(),
                rest.len()
            )));
        }
        let n = self.n();
        let mut seen = FixedBitSet::with_capacity(n);
        for &q in party {
            if q >= n {
                return Err(Error::param(format!(
                    "qubit {q} out of range for {n} qubits"
                )));
            }
            if seen.put(q) {
                return Err(Error::param(format!("qubit {q} listed twice")));
            }
        }
        for &q in rest {
            let nb = self.graph.neighbor_list(q);
            if nb.len() != 1 || seen.contains(nb[0]) {
                return Err(Error::Contract(format!(
                    "qubit {q} is not a pair half attached outside the party"
                )));
            }
        }

        let mut state = self.clone();
        let mut total: Relabel = (0..n).map(Some).collect();
        for (&q_orig, &outcome) in rest.iter().zip(outcomes) {
            let k = total[kept].expect("kept qubit survives");
            let q = total[q_orig].expect("unmeasured qubit survives");
            let r = state.graph.neighbor_list(q)[0];
            let mut graph = state.graph.clone();
            graph.toggle_edge_mut(k, r);
            let mut z = state.z_errors.clone();
            let mut f = state.frame.clone();
            if z.contains(q) {
                z.toggle(k);
            }
            if f.contains(q) {
                f.toggle(k);
            }
            if outcome.is_minus() {
                f.toggle(r);
            }
            let (graph, relabel) = graph.delete_vertex(q)?;
            let m = graph.n();
            state = PatternState {
                z_errors: restrict(&z, &relabel, m),
                frame: restrict(&f, &relabel, m),
                graph,
            };
            total = compose_relabel(&total, &relabel);
        }
        Ok((total[kept].expect("kept qubit survives"), state, total))
    }

    /// Applies the known frame corrections, leaving only the unknown errors.
    pub fn corrected(&self) -> PatternState {
        PatternState {
            graph: self.graph.clone(),
            z_errors: self.z_errors.clone(),
            frame: FixedBitSet::with_capacity(self.n()),
        }
    }

    /// Dense vector `Z^(errors ⊕ frame) |psi_G⟩`.
    pub fn physical_state(&self) -> Result<StateVector> {
        let mut psi = dense::graph_state_vector(&self.graph)?;
        let mut flips = self.z_errors.clone();
        flips.symmetric_difference_with(&self.frame);
        for q in flips.ones() {
            psi.apply_z(q)?;
        }
        Ok(psi)
    }
}

/// The dense circuit that [`PatternState::merge_local_with`] abstracts:
/// `H_q`, `CZ(k, q)`, `X` measurement of `q`, for each listed `q` in order.
///
/// Returns the probability of the whole outcome record and the post-state.
pub fn dense_merge(
    psi: &StateVector,
    party: &[usize],
    outcomes: &[Outcome],
) -> Result<(f64, Option<StateVector>)> {
    let Some((&kept, rest)) = party.split_first() else {
        return Err(Error::param("merge needs at least one qubit"));
    };
    let mut index: Vec<Option<usize>> = (0..psi.n()).map(Some).collect();
    let mut state = psi.clone();
    let mut prob = 1.0;
    for (&q_orig, &outcome) in rest.iter().zip(outcomes) {
        let k = index[kept].expect("kept qubit survives");
        let q = index[q_orig].expect("unmeasured qubit survives");
        state.apply_h(q)?;
        state.apply_cz(k, q)?;
        let (p, post) = state.collapse(q, dense::Basis::X, outcome)?;
        prob *= p;
        match post {
            Some(s) => state = s,
            None => return Ok((prob, None)),
        }
        for slot in index.iter_mut() {
            *slot = match *slot {
                Some(i) if i == q => None,
                Some(i) if i > q => Some(i - 1),
                other => other,
            };
        }
    }
    Ok((prob, Some(state)))
}

/// Largest trace distance accepted by [`oracle_sweep`].
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepReport {
    pub graphs: usize,
    pub cz_cases: usize,
    pub measure_cases: usize,
    pub merge_cases: usize,
    pub max_distance: f64,
    pub max_probability_error: f64,
    /// First few disagreements, if any.
    pub failures: Vec<String>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, what: impl FnOnce() -> String, distance: f64, prob_error: f64) {
        self.max_distance = self.max_distance.max(distance);
        self.max_probability_error = self.max_probability_error.max(prob_error);
        if !(distance <= ORACLE_TOL && prob_error <= ORACLE_TOL) && self.failures.len() < 20 {
            self.failures.push(format!(
                "{}: distance {distance:e}, probability error {prob_error:e}",
                what()
            ));
        }
    }

    fn absorb(&mut self, other: SweepReport) {
        self.graphs += other.graphs;
        self.cz_cases += other.cz_cases;
        self.measure_cases += other.measure_cases;
        self.merge_cases += other.merge_cases;
        self.max_distance = self.max_distance.max(other.max_distance);
        self.max_probability_error = self.max_probability_error.max(other.max_probability_error);
        for f in other.failures {
            if self.failures.len() < 20 {
                self.failures.push(f);
            }
        }
    }
}

/// Every labelled simple graph on `n` vertices.
pub fn all_graphs(n: usize) -> Vec<Graph> {
    let slots: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect();
    (0..1u64 << slots.len())
        .map(|mask| {
            let edges: Vec<(usize, usize)> = slots
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            Graph::from_edges(n, &edges).expect("valid edge set")
        })
        .collect()
}

/// Party lists accepted by [`PatternState::merge_local_with`] with at least
/// one measured qubit: a kept qubit followed by an ascending set of leaves
/// whose partners lie outside the list.
pub fn merge_configurations(g: &Graph) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for k in 0..g.n() {
        let leaves: Vec<usize> = (0..g.n())
            .filter(|&q| q != k && g.degree(q) == 1 && g.neighbor_list(q)[0] != k)
            .collect();
        for mask in 1..1u64 << leaves.len() {
            let chosen: Vec<usize> = leaves
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &q)| q)
                .collect();
            let partners_outside = chosen
                .iter()
                .all(|&q| !chosen.contains(&g.neighbor_list(q)[0]));
            if partners_outside {
                let mut party = vec![k];
                party.extend(chosen);
                out.push(party);
            }
        }
    }
    out
}

fn all_outcomes(m: usize) -> Vec<Vec<Outcome>> {
    (0..1u64 << m)
        .map(|bits| {
            (0..m)
                .map(|i| {
                    if bits >> i & 1 == 1 {
                        Outcome::Minus
                    } else {
                        Outcome::Plus
                    }
                })
                .collect()
        })
        .collect()
}

/// Checks every operation on every error pattern of `g` against the dense
/// simulator, for both outcomes of every measurement.
pub fn sweep_graph(g: &Graph, with_cz: bool, with_measure: bool) -> Result<SweepReport> {
    let mut report = SweepReport {
        graphs: 1,
        ..SweepReport::default()
    };
    let n = g.n();
    let configs = merge_configurations(g);
    for mask in 0..1u64 << n {
        let state = PatternState::from_mask(g.clone(), mask)?;
        let psi = state.physical_state()?;
        if with_cz {
            for u in 0..n {
                for v in u + 1..n {
                    let mut dense_post = psi.clone();
                    dense_post.apply_cz(u, v)?;
                    let fast = state.apply_cz(u, v)?;
                    let d = dense_post.trace_distance(&fast.physical_state()?);
                    report.cz_cases += 1;
                    report.record(|| format!("{g:?} e={mask:b} cz({u},{v})"), d, 0.0);
                }
            }
        }
        if with_measure {
            for v in 0..n {
                for out in Outcome::both() {
                    let (prob, post) = psi.collapse(v, dense::Basis::Z, out)?;
                    let (fast, _) = state.measure_z_with(v, out)?;
                    let d = match post {
                        Some(post) if n > 1 => post.trace_distance(&fast.physical_state()?),
                        Some(_) => 0.0,
                        None => 1.0,
                    };
                    report.measure_cases += 1;
                    report.record(
                        || format!("{g:?} e={mask:b} z({v}) {out:?}"),
                        d,
                        (prob - 0.5).abs(),
                    );
                }
            }
        }
        for party in &configs {
            for outcomes in all_outcomes(party.len() - 1) {
                let (prob, post) = dense_merge(&psi, party, &outcomes)?;
                let (_, fast, _) = state.merge_local_with(party, &outcomes)?;
                let d = match post {
                    Some(post) => post.trace_distance(&fast.physical_state()?),
                    None => 1.0,
                };
                let expect = 0.5f64.powi(outcomes.len() as i32);
                report.merge_cases += 1;
                report.record(
                    || format!("{g:?} e={mask:b} merge {party:?} {outcomes:?}"),
                    d,
                    (prob - expect).abs(),
                );
            }
        }
    }
    Ok(report)
}

/// Exhaustive agreement check: all graphs on up to `max_n` vertices with
/// every operation, plus six-qubit merge configurations (a graph on two or
/// four vertices with disjoint pairs attached) when `with_six` is set.
pub fn oracle_sweep(max_n: usize, with_six: bool) -> Result<SweepReport> {
    use rayon::prelude::*;
    if max_n > 6 {
        return Err(Error::Capacity {
            what: "oracle sweep",
            requested: max_n,
            limit: 6,
        });
    }
    let mut jobs: Vec<(Graph, bool)> = (1..=max_n)
        .flat_map(all_graphs)
        .map(|g| (g, true))
        .collect();
    if with_six {
        let one_pair = Graph::from_edges(2, &[(0, 1)])?;
        let two_pairs = one_pair.disjoint_union(&one_pair);
        for base in all_graphs(4) {
            jobs.push((base.disjoint_union(&one_pair), false));
        }
        for base in all_graphs(2) {
            jobs.push((base.disjoint_union(&two_pairs), false));
        }
    }
    let parts: Vec<SweepReport> = jobs
        .par_iter()
        .map(|(g, full)| sweep_graph(g, *full, *full))
        .collect::<Result<_>>()?;
    let mut total = SweepReport::default();
    for part in parts {
        total.absorb(part);
    }
    Ok(total)
}

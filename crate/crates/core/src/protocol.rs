//! The divide-and-rebuild protocol: extraction planning, Monte Carlo
//! trajectories, threshold scans and rate accounting.
//!
//! A run cuts copies of the noisy state into nearest-neighbour pairs by `Z`
//! measurements, distils each pair with the recurrence map, and stitches the
//! pairs back together at every vertex with [`PatternState::merge_local`].
//!
//! The number of extraction rounds is the geometric overhead `N_geo`. The
//! planner's count and the closed-form count for known families are both
//! reported; for lattices with `d >= 2` the planner can need fewer rounds
//! than `3 d^2` on finite boxes.

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bipartite::{BellDiagonal, DEFAULT_MAX_ROUNDS};
use crate::dense::Outcome;
use crate::error::{Error, Result};
use crate::graph::{Family, Graph, Relabel};
use crate::pattern::{compose_relabel, PatternState};
use crate::thermal::{critical_error_prob, pair_purifiable};

pub const DEFAULT_PAIR_TARGET: f64 = 0.999;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Shots per run are capped so that shot indices fit the low bits of a
/// ChaCha stream id, leaving the high bits for the scan point.
pub const MAX_SHOTS: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub edge: (usize, usize),
    /// Position of `edge` in [`Graph::edges`].
    pub edge_index: usize,
    /// `(N(u) ∪ N(v)) \ {u, v}`, ascending.
    pub z_measure: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionPlan {
    n: usize,
    rounds: Vec<Vec<Extraction>>,
}

/// No endpoint of `a` lies in the closed neighbourhood of `b`'s endpoints.
fn compatible(g: &Graph, a: (usize, usize), b: (usize, usize)) -> bool {
    let near = |x: usize, y: usize| x == y || g.has_edge(x, y);
    ![a.0, a.1].iter().any(|&x| near(x, b.0) || near(x, b.1))
}

fn z_measure_set(g: &Graph, (u, v): (usize, usize)) -> Vec<usize> {
    let mut set = g.neighbors(u).clone();
    set.union_with(g.neighbors(v));
    set.set(u, false);
    set.set(v, false);
    set.ones().collect()
}

/// Greedy partition of the edges into rounds of simultaneously extractable
/// pairs, scanning edges in index order.
///
/// Two pairs can come from the same copy when neither touches the other's
/// closed neighbourhood, i.e. each round is an induced matching. Measured
/// sets of different pairs may overlap.
pub fn plan_extraction(g: &Graph) -> ExtractionPlan {
    let edges = g.edges();
    let mut remaining: Vec<usize> = (0..edges.len()).collect();
    let mut rounds = Vec::new();
    while !remaining.is_empty() {
        let mut chosen: Vec<usize> = Vec::new();
        let mut deferred = Vec::new();
        for j in remaining {
            if chosen.iter().all(|&i| compatible(g, edges[i], edges[j])) {
                chosen.push(j);
            } else {
                deferred.push(j);
            }
        }
        rounds.push(
            chosen
                .into_iter()
                .map(|j| Extraction {
                    edge: edges[j],
                    edge_index: j,
                    z_measure: z_measure_set(g, edges[j]),
                })
                .collect(),
        );
        remaining = deferred;
    }
    let plan = ExtractionPlan { n: g.n(), rounds };
    plan.validate(g)
        .expect("greedy plan is valid by construction");
    plan
}

impl ExtractionPlan {
    pub fn rounds(&self) -> &[Vec<Extraction>] {
        &self.rounds
    }

    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn round_of(&self, u: usize, v: usize) -> Option<usize> {
        let e = (u.min(v), u.max(v));
        self.rounds
            .iter()
            .position(|r| r.iter().any(|x| x.edge == e))
    }

    /// Checks coverage, the measured sets and pairwise compatibility.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        if self.n != g.n() {
            return Err(Error::Contract(format!(
                "plan is for {} vertices, graph has {}",
                self.n,
                g.n()
            )));
        }
        let edges = g.edges();
        let mut covered = vec![0usize; edges.len()];
        for (r, round) in self.rounds.iter().enumerate() {
            for x in round {
                if edges.get(x.edge_index) != Some(&x.edge) {
                    return Err(Error::Contract(format!(
                        "round {r}: {:?} is not edge {}",
                        x.edge, x.edge_index
                    )));
                }
                covered[x.edge_index] += 1;
                if x.z_measure != z_measure_set(g, x.edge) {
                    return Err(Error::Contract(format!(
                        "round {r}: wrong measured set for {:?}",
                        x.edge
                    )));
                }
            }
            for (i, a) in round.iter().enumerate() {
                for b in &round[i + 1..] {
                    if !compatible(g, a.edge, b.edge) {
                        return Err(Error::Contract(format!(
                            "round {r}: {:?} and {:?} cannot be extracted together",
                            a.edge, b.edge
                        )));
                    }
                }
            }
        }
        if let Some(j) = covered.iter().position(|&c| c != 1) {
            return Err(Error::Contract(format!(
                "edge {:?} covered {} times",
                edges[j], covered[j]
            )));
        }
        Ok(())
    }
}

/// Closed-form overhead: 3 for a chain, `3 d^2` for a `d`-dimensional
/// cluster, `N - 1` for an `N`-qubit GHZ (star) state.
pub fn n_geo_formula(family: &Family) -> Option<usize> {
    match family {
        Family::Path(_) => Some(3),
        Family::Grid(dims) => Some(3 * dims.len() * dims.len()),
        Family::Star(n) => Some(n - 1),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub n_geo_plan: usize,
    pub n_geo_formula: Option<usize>,
    pub r2: f64,
    pub r_psi_lower: f64,
    pub r_psi_upper: f64,
}

/// Pair yield `R_2` at flip probability `p`: recurrence rounds then hashing,
/// and exactly zero from the threshold on.
pub fn pair_rate(p: f64) -> Result<f64> {
    let bd = BellDiagonal::from_z_noise(p)?;
    Ok(if pair_purifiable(p) {
        bd.composite_rate()
    } else {
        0.0
    })
}

/// `R_2 >= R_psi >= R_2 / N_geo`, with `N_geo` from the extraction plan.
pub fn rate_report(g: &Graph, p: f64, family: Option<&Family>) -> Result<RateReport> {
    let r2 = pair_rate(p)?;
    let n_geo = plan_extraction(g).n_rounds();
    let lower = if n_geo == 0 { r2 } else { r2 / n_geo as f64 };
    Ok(RateReport {
        n_geo_plan: n_geo,
        n_geo_formula: family.and_then(n_geo_formula),
        r2,
        r_psi_lower: lower,
        r_psi_upper: r2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrppConfig {
    pub p: f64,
    pub shots: u64,
    pub pair_target: f64,
    pub seed: u64,
    pub max_rounds: usize,
}

impl DrppConfig {
    pub fn new(p: f64, shots: u64, seed: u64) -> Self {
        DrppConfig {
            p,
            shots,
            pair_target: DEFAULT_PAIR_TARGET,
            seed,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.p) {
            return Err(Error::param(format!(
                "error probability must lie in [0, 1/2], got {}",
                self.p
            )));
        }
        if self.shots == 0 || self.shots > MAX_SHOTS {
            return Err(Error::param(format!(
                "shots must lie in [1, 2^40], got {}",
                self.shots
            )));
        }
        if !(self.pair_target > 0.0 && self.pair_target < 1.0) {
            return Err(Error::param(format!(
                "pair target fidelity must lie in (0, 1), got {}",
                self.pair_target
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    PairDistillationFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub graph: String,
    pub p: f64,
    pub shots: u64,
    pub seed: u64,
    pub status: Status,
    /// Fraction of trajectories that end with no residual error.
    pub fidelity: f64,
    /// Wilson score interval.
    pub ci95: [f64; 2],
    /// Exact value of the estimated fidelity, when cheap to compute.
    pub expected_fidelity: Option<f64>,
    /// Recurrence rounds per pair.
    pub rounds: usize,
    pub pair_fidelity_raw: f64,
    pub pair_fidelity: f64,
    pub pair_target: f64,
    /// Expected copies of the noisy state per output state.
    pub copies_consumed: f64,
    pub n_geo_plan: usize,
    pub n_geo_formula: Option<usize>,
    pub r2: f64,
    pub r_psi_bounds: [f64; 2],
    pub diagnostics: Option<String>,
}

pub fn wilson_interval(successes: u64, trials: u64) -> [f64; 2] {
    if trials == 0 {
        return [0.0, 1.0];
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    [(center - half).max(0.0), (center + half).min(1.0)]
}

/// Probability that every vertex ends error free when each edge carries an
/// independent pair from `pair`.
///
/// After the rebuild the error on vertex `v` is the XOR of the pair bits on
/// the halves held at `v`. The zero-syndrome probability is evaluated as a
/// character sum over `s in {0,1}^n`. Returns `None` above 20 vertices.
pub fn expected_fidelity(g: &Graph, pair: &BellDiagonal) -> Option<f64> {
    let n = g.n();
    if n > 20 {
        return None;
    }
    let q = pair.probs();
    let chi = |x: usize, y: usize| -> f64 {
        (0..4)
            .map(|c| {
                let parity = (x & c & 1) ^ (y & (c >> 1) & 1);
                if parity == 1 {
                    -q[c]
                } else {
                    q[c]
                }
            })
            .sum()
    };
    let table = [[chi(0, 0), chi(0, 1)], [chi(1, 0), chi(1, 1)]];
    let edges = g.edges();
    let total: f64 = (0..1usize << n)
        .map(|s| {
            edges
                .iter()
                .map(|&(u, v)| table[s >> u & 1][s >> v & 1])
                .product::<f64>()
        })
        .sum();
    Some(total / (1u64 << n) as f64)
}

/// Qubit layout for the rebuild: edge `j = (u, v)` contributes qubit `2j`
/// at `u` and `2j + 1` at `v`; vertices without edges get a fresh qubit.
#[derive(Debug, Clone)]
struct Layout {
    pair_graph: Graph,
    parties: Vec<Vec<usize>>,
}

impl Layout {
    fn new(g: &Graph) -> Result<Self> {
        let edges = g.edges();
        let isolated: Vec<usize> = (0..g.n()).filter(|&v| g.degree(v) == 0).collect();
        let total = 2 * edges.len() + isolated.len();
        let pair_edges: Vec<(usize, usize)> =
            (0..edges.len()).map(|j| (2 * j, 2 * j + 1)).collect();
        let pair_graph = Graph::from_edges(total, &pair_edges)?;
        let mut parties = vec![Vec::new(); g.n()];
        for (j, &(u, v)) in edges.iter().enumerate() {
            parties[u].push(2 * j);
            parties[v].push(2 * j + 1);
        }
        for (i, &v) in isolated.iter().enumerate() {
            parties[v].push(2 * edges.len() + i);
        }
        Ok(Layout {
            pair_graph,
            parties,
        })
    }

    /// Merges every party onto its first qubit. Returns the final state and
    /// the final index of each vertex.
    fn rebuild(
        &self,
        errors: FixedBitSet,
        mut outcome: impl FnMut() -> Outcome,
    ) -> Result<(PatternState, Vec<usize>)> {
        let mut state = PatternState::with_errors(self.pair_graph.clone(), errors)?;
        let mut index: Relabel = (0..self.pair_graph.n()).map(Some).collect();
        for party in &self.parties {
            if party.len() < 2 {
                continue;
            }
            let current: Vec<usize> = party
                .iter()
                .map(|&q| index[q].expect("halves of other parties survive"))
                .collect();
            let outcomes: Vec<Outcome> = (1..party.len()).map(|_| outcome()).collect();
            let (_, next, relabel) = state.merge_local_with(&current, &outcomes)?;
            state = next;
            index = compose_relabel(&index, &relabel);
        }
        let vertex_index = self
            .parties
            .iter()
            .map(|party| index[party[0]].expect("kept qubits survive"))
            .collect();
        Ok((state, vertex_index))
    }

    /// The rebuild must reproduce `g` up to the vertex ordering it reports.
    fn check(&self, g: &Graph) -> Result<()> {
        for forced in Outcome::both() {
            let (state, at) =
                self.rebuild(FixedBitSet::with_capacity(self.pair_graph.n()), || forced)?;
            let ok = state.n() == g.n()
                && state.graph().edge_count() == g.edge_count()
                && g.edges()
                    .iter()
                    .all(|&(u, v)| state.graph().has_edge(at[u], at[v]));
            if !ok {
                return Err(Error::Contract(format!(
                    "rebuild produced {:?}, expected {:?}",
                    state.graph(),
                    g
                )));
            }
        }
        Ok(())
    }
}

enum PairSource<'a> {
    Raw,
    Distilled(&'a BellDiagonal),
}

/// Measures out `vertices` (any order) and returns the composed vertex map.
fn measure_out<R: Rng + ?Sized>(
    state: &PatternState,
    vertices: &[usize],
    rng: &mut R,
) -> Result<(PatternState, Relabel)> {
    let mut sorted = vertices.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut current = state.clone();
    let mut index: Relabel = (0..state.n()).map(Some).collect();
    // Descending order keeps the indices of pending vertices unchanged.
    for v in sorted {
        let (_, next, relabel) = current.measure_z(v, rng)?;
        current = next;
        index = compose_relabel(&index, &relabel);
    }
    Ok((current, index))
}

fn run_shot<R: Rng + ?Sized>(
    g: &Graph,
    plan: &ExtractionPlan,
    layout: &Layout,
    source: &PairSource<'_>,
    p: f64,
    rng: &mut R,
) -> Result<bool> {
    let mut errors = FixedBitSet::with_capacity(layout.pair_graph.n());
    for round in plan.rounds() {
        let copy = PatternState::sample_thermal(g, p, rng)?;
        let mut in_pair = FixedBitSet::with_capacity(g.n());
        for x in round {
            in_pair.insert(x.edge.0);
            in_pair.insert(x.edge.1);
        }
        let others: Vec<usize> = (0..g.n()).filter(|&v| !in_pair.contains(v)).collect();
        let (pairs, index) = measure_out(&copy, &others, rng)?;
        // Byproducts in the frame are known and undone before distillation.
        let pairs = pairs.corrected();
        for x in round {
            let class = match source {
                PairSource::Raw => {
                    let a = index[x.edge.0].expect("pair vertex kept");
                    let b = index[x.edge.1].expect("pair vertex kept");
                    usize::from(pairs.z_errors().contains(a))
                        | usize::from(pairs.z_errors().contains(b)) << 1
                }
                PairSource::Distilled(bd) => bd.sample_class(rng),
            };
            errors.set(2 * x.edge_index, class & 1 == 1);
            errors.set(2 * x.edge_index + 1, class & 2 == 2);
        }
    }
    let (state, _) = layout.rebuild(errors, || Outcome::sample(rng))?;
    Ok(state.corrected().is_ideal())
}

fn graph_label(g: &Graph, family: Option<&Family>) -> String {
    match family {
        Some(f) => f.to_string(),
        None => format!("n={} edges={:?}", g.n(), g.edges()),
    }
}

/// One Monte Carlo run. Shot `s` draws from a ChaCha8 stream seeded by
/// `cfg.seed` with stream id `s`, so results do not depend on the number of
/// worker threads.
pub fn run_drpp(g: &Graph, cfg: &DrppConfig, family: Option<&Family>) -> Result<ProtocolResult> {
    run_drpp_stream(g, cfg, family, 0)
}

fn run_drpp_stream(
    g: &Graph,
    cfg: &DrppConfig,
    family: Option<&Family>,
    stream_base: u64,
) -> Result<ProtocolResult> {
    cfg.validate()?;
    let plan = plan_extraction(g);
    let layout = Layout::new(g)?;
    layout.check(g)?;

    let raw = BellDiagonal::from_z_noise(cfg.p)?;
    let distilled = raw.distill(cfg.pair_target, cfg.max_rounds)?;
    let source = if distilled.rounds == 0 {
        PairSource::Raw
    } else {
        PairSource::Distilled(&distilled.state)
    };

    let hits: u64 = (0..cfg.shots)
        .into_par_iter()
        .map(|shot| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream_base | shot);
            run_shot(g, &plan, &layout, &source, cfg.p, &mut rng).map(u64::from)
        })
        .sum::<Result<u64>>()?;

    let rates = rate_report(g, cfg.p, family)?;
    let used = distilled.state;
    let diagnostics = (!distilled.converged).then(|| {
        format!(
            "pair fidelity {:.6} (largest component {:.6}) cannot be raised to {} by recurrence; \
             pairs are purifiable only for p < {:.7}",
            raw.fidelity(),
            raw.max_component(),
            cfg.pair_target,
            critical_error_prob()
        )
    });
    Ok(ProtocolResult {
        graph: graph_label(g, family),
        p: cfg.p,
        shots: cfg.shots,
        seed: cfg.seed,
        status: if distilled.converged {
            Status::Ok
        } else {
            Status::PairDistillationFailed
        },
        fidelity: hits as f64 / cfg.shots as f64,
        ci95: wilson_interval(hits, cfg.shots),
        expected_fidelity: expected_fidelity(g, &used),
        rounds: distilled.rounds,
        pair_fidelity_raw: raw.fidelity(),
        pair_fidelity: used.fidelity(),
        pair_target: cfg.pair_target,
        copies_consumed: plan.n_rounds() as f64 * distilled.cost,
        n_geo_plan: rates.n_geo_plan,
        n_geo_formula: rates.n_geo_formula,
        r2: rates.r2,
        r_psi_bounds: [rates.r_psi_lower, rates.r_psi_upper],
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub p: f64,
    /// `T / B` giving this flip probability; `None` at `p = 1/2`.
    pub temperature_over_coupling: Option<f64>,
    pub purifiable: bool,
    pub fidelity: f64,
    pub ci95: [f64; 2],
    pub rounds: usize,
    pub status: Status,
}

/// Runs the protocol at each grid point. A point counts as purifiable when
/// pair distillation reaches the target and the lower end of the fidelity
/// interval exceeds 1/2.
///
/// Point `i` uses stream ids `(i << 40) | shot`.
pub fn threshold_scan(
    g: &Graph,
    grid: &[f64],
    template: &DrppConfig,
    family: Option<&Family>,
) -> Result<Vec<ScanRow>> {
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::param("grid must be sorted ascending"));
    }
    if grid.len() as u64 > 1 << 23 {
        return Err(Error::param("grid too long"));
    }
    grid.iter()
        .enumerate()
        .map(|(i, &p)| {
            let cfg = DrppConfig {
                p,
                ..template.clone()
            };
            let res = run_drpp_stream(g, &cfg, family, (i as u64) << 40)?;
            let t = if p == 0.0 {
                Some(0.0)
            } else if p == 0.5 {
                None
            } else {
                Some(1.0 / ((1.0 - p) / p).ln())
            };
            Ok(ScanRow {
                p,
                temperature_over_coupling: t,
                purifiable: res.status == Status::Ok && res.ci95[0] > 0.5,
                fidelity: res.fidelity,
                ci95: res.ci95,
                rounds: res.rounds,
                status: res.status,
            })
        })
        .collect()
}

/// `(last purifiable p, first non-purifiable p)` when the verdict flips
/// exactly once along the grid.
pub fn verdict_flip(rows: &[ScanRow]) -> Option<(f64, f64)> {
    let flips: Vec<usize> = (1..rows.len())
        .filter(|&i| rows[i - 1].purifiable != rows[i].purifiable)
        .collect();
    match flips.as_slice() {
        [i] if rows[*i - 1].purifiable => Some((rows[*i - 1].p, rows[*i].p)),
        _ => None,
    }
}

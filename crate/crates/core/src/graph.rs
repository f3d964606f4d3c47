//! Simple undirected graphs and the structural moves used on graph states.
//!
//! Vertices are dense indices `0..n`. Adjacency is one bitset row per vertex,
//! kept symmetric and loop-free by every constructor and mutator.

use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps an old vertex index to its index after a deletion (`None` for the
/// deleted vertex). Surviving vertices keep their relative order.
pub type Relabel = Vec<Option<usize>>;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    adj: Vec<FixedBitSet>,
}

impl Graph {
    /// Graph on `n` vertices with no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            adj: (0..n).map(|_| FixedBitSet::with_capacity(n)).collect(),
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(u, v) in edges {
            g.check_pair(u, v)?;
            if g.has_edge(u, v) {
                return Err(Error::param(format!("duplicate edge {u}-{v}")));
            }
            g.toggle_edge_mut(u, v);
        }
        Ok(g)
    }

    pub fn from_family(family: &Family) -> Result<Self> {
        family.validate()?;
        let g = match family {
            Family::Path(n) => {
                let edges: Vec<_> = (1..*n).map(|i| (i - 1, i)).collect();
                Graph::from_edges(*n, &edges)?
            }
            Family::Cycle(n) => {
                let mut edges: Vec<_> = (1..*n).map(|i| (i - 1, i)).collect();
                edges.push((0, n - 1));
                Graph::from_edges(*n, &edges)?
            }
            Family::Star(n) => {
                let edges: Vec<_> = (1..*n).map(|i| (0, i)).collect();
                Graph::from_edges(*n, &edges)?
            }
            Family::Complete(n) => {
                let mut edges = Vec::new();
                for u in 0..*n {
                    for v in u + 1..*n {
                        edges.push((u, v));
                    }
                }
                Graph::from_edges(*n, &edges)?
            }
            Family::Grid(sides) => grid(sides),
            Family::Icosahedron => icosahedron(),
        };
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].count_ones(..)
    }

    pub fn neighbors(&self, v: usize) -> &FixedBitSet {
        &self.adj[v]
    }

    pub fn neighbor_list(&self, v: usize) -> Vec<usize> {
        self.adj[v].ones().collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n() && v < self.n() && self.adj[u].contains(v)
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n() {
            for v in self.adj[u].ones().filter(|&v| v > u) {
                out.push((u, v));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|row| row.count_ones(..)).sum::<usize>() / 2
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.n() {
            return Err(Error::param(format!(
                "vertex {v} out of range for a graph on {} vertices",
                self.n()
            )));
        }
        Ok(())
    }

    fn check_pair(&self, u: usize, v: usize) -> Result<()> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Err(Error::param(format!("self-loop on vertex {u}")));
        }
        Ok(())
    }

    /// Flips edge `{u, v}` in place. Callers guarantee `u != v`, both in range.
    pub(crate) fn toggle_edge_mut(&mut self, u: usize, v: usize) {
        debug_assert!(u != v);
        self.adj[u].toggle(v);
        self.adj[v].toggle(u);
    }

    pub fn toggle_edge(&self, u: usize, v: usize) -> Result<Graph> {
        self.check_pair(u, v)?;
        let mut g = self.clone();
        g.toggle_edge_mut(u, v);
        Ok(g)
    }

    /// Removes `v` and its incident edges. The returned map sends every old
    /// index to its new one.
    pub fn delete_vertex(&self, v: usize) -> Result<(Graph, Relabel)> {
        self.check_vertex(v)?;
        let n = self.n();
        let relabel: Relabel = (0..n)
            .map(|u| match u.cmp(&v) {
                std::cmp::Ordering::Less => Some(u),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(u - 1),
            })
            .collect();
        let mut g = Graph::empty(n - 1);
        for (a, b) in self.edges() {
            if let (Some(a), Some(b)) = (relabel[a], relabel[b]) {
                g.toggle_edge_mut(a, b);
            }
        }
        Ok((g, relabel))
    }

    /// Complements the subgraph induced on the neighbourhood of `v`.
    pub fn local_complement(&self, v: usize) -> Result<Graph> {
        self.check_vertex(v)?;
        let mut g = self.clone();
        let nbrs = self.neighbor_list(v);
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                g.toggle_edge_mut(a, b);
            }
        }
        Ok(g)
    }

    /// Subgraph induced on `vertices`, relabelled in the given order.
    pub fn induced(&self, vertices: &[usize]) -> Graph {
        let mut g = Graph::empty(vertices.len());
        for (i, &a) in vertices.iter().enumerate() {
            for (j, &b) in vertices.iter().enumerate().skip(i + 1) {
                if self.has_edge(a, b) {
                    g.toggle_edge_mut(i, j);
                }
            }
        }
        g
    }

    /// Disjoint union; the vertices of `other` are shifted by `self.n()`.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let off = self.n();
        let mut g = Graph::empty(off + other.n());
        for (a, b) in self.edges() {
            g.toggle_edge_mut(a, b);
        }
        for (a, b) in other.edges() {
            g.toggle_edge_mut(a + off, b + off);
        }
        g
    }

    /// Parses the edge-list text format: a vertex count on the first
    /// non-comment line, then one `u v` pair per line. `#` starts a comment.
    pub fn parse_edge_list(text: &str) -> Result<Graph> {
        let mut n: Option<usize> = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("expected a non-negative integer, got {s:?}"),
                })
            };
            match (n, fields.as_slice()) {
                (None, [count]) => {
                    let count = parse(count)?;
                    if count == 0 {
                        return Err(Error::Parse {
                            line: line_no,
                            message: "vertex count must be at least 1".into(),
                        });
                    }
                    n = Some(count);
                }
                (None, _) => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "first line must hold the vertex count".into(),
                    })
                }
                (Some(_), [u, v]) => edges.push((line_no, parse(u)?, parse(v)?)),
                (Some(_), _) => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "expected two vertex indices".into(),
                    })
                }
            }
        }
        let n = n.ok_or(Error::Parse {
            line: 0,
            message: "empty edge list".into(),
        })?;
        let mut g = Graph::empty(n);
        for (line, u, v) in edges {
            g.check_pair(u, v).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if g.has_edge(u, v) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate edge {u}-{v}"),
                });
            }
            g.toggle_edge_mut(u, v);
        }
        Ok(g)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{}\n", self.n());
        for (u, v) in self.edges() {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, edges={:?})", self.n(), self.edges())
    }
}

fn grid(sides: &[usize]) -> Graph {
    let total: usize = sides.iter().product();
    let mut g = Graph::empty(total);
    // Mixed radix, first coordinate fastest.
    let mut stride = 1;
    for &side in sides {
        for v in 0..total {
            let coord = (v / stride) % side;
            if coord + 1 < side {
                g.toggle_edge_mut(v, v + stride);
            }
        }
        stride *= side;
    }
    g
}

fn icosahedron() -> Graph {
    // 0 = top, 1..=5 upper ring, 6..=10 lower ring, 11 = bottom.
    let mut g = Graph::empty(12);
    for i in 0..5 {
        let up = 1 + i;
        let up_next = 1 + (i + 1) % 5;
        let low = 6 + i;
        let low_next = 6 + (i + 1) % 5;
        g.toggle_edge_mut(0, up);
        g.toggle_edge_mut(up, up_next);
        g.toggle_edge_mut(up, low);
        g.toggle_edge_mut(up, low_next);
        g.toggle_edge_mut(low, low_next);
        g.toggle_edge_mut(11, low);
    }
    g
}

/// Named graph families. The string form is `path:N`, `grid:DxN1x..xND`,
/// `star:N` (alias `ghz:N`), `cycle:N`, `complete:N` or `icosahedron`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Path(usize),
    Grid(Vec<usize>),
    Star(usize),
    Cycle(usize),
    Complete(usize),
    Icosahedron,
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        match self {
            Family::Path(n) if *n < 2 => bad(format!("path needs n >= 2, got {n}")),
            Family::Star(n) if *n < 2 => bad(format!("star needs n >= 2, got {n}")),
            Family::Cycle(n) if *n < 3 => bad(format!("cycle needs n >= 3, got {n}")),
            Family::Complete(n) if *n < 2 => bad(format!("complete needs n >= 2, got {n}")),
            Family::Grid(sides) if sides.is_empty() => bad("grid needs d >= 1".into()),
            Family::Grid(sides) if sides.iter().any(|&s| s < 2) => {
                bad(format!("grid side lengths must be >= 2, got {sides:?}"))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Graph> {
        Graph::from_family(self)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Path(n) => write!(f, "path:{n}"),
            Family::Star(n) => write!(f, "star:{n}"),
            Family::Cycle(n) => write!(f, "cycle:{n}"),
            Family::Complete(n) => write!(f, "complete:{n}"),
            Family::Icosahedron => write!(f, "icosahedron"),
            Family::Grid(sides) => {
                write!(f, "grid:{}", sides.len())?;
                for s in sides {
                    write!(f, "x{s}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "icosahedron" {
            return Ok(Family::Icosahedron);
        }
        let (name, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::param(format!("unknown graph family {s:?}")))?;
        let int = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::param(format!("bad integer {t:?} in family {s:?}")))
        };
        let fam = match name {
            "path" => Family::Path(int(arg)?),
            "star" | "ghz" => Family::Star(int(arg)?),
            "cycle" => Family::Cycle(int(arg)?),
            "complete" => Family::Complete(int(arg)?),
            "grid" => {
                let parts = arg.split('x').map(int).collect::<Result<Vec<usize>>>()?;
                let (d, sides) = parts
                    .split_first()
                    .ok_or_else(|| Error::param("grid needs a dimension"))?;
                if *d != sides.len() {
                    return Err(Error::param(format!(
                        "grid:{arg} declares d={d} but lists {} side lengths",
                        sides.len()
                    )));
                }
                Family::Grid(sides.to_vec())
            }
            _ => return Err(Error::param(format!("unknown graph family {name:?}"))),
        };
        fam.validate()?;
        Ok(fam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fam(s: &str) -> Graph {
        s.parse::<Family>().unwrap().build().unwrap()
    }

    #[test]
    fn standard_families() {
        let p3 = fam("path:3");
        assert_eq!(p3.n(), 3);
        assert_eq!(p3.edges(), vec![(0, 1), (1, 2)]);

        let s4 = fam("star:4");
        assert_eq!(s4.degree(0), 3);
        assert_eq!(s4.edges(), vec![(0, 1), (0, 2), (0, 3)]);
        assert_eq!(fam("ghz:4"), s4);

        let ico = fam("icosahedron");
        assert_eq!(ico.n(), 12);
        assert_eq!(ico.edge_count(), 30);
        assert!((0..12).all(|v| ico.degree(v) == 5));
    }

    #[test]
    fn family_errors_name_the_constraint() {
        for bad in [
            "path:1",
            "star:1",
            "cycle:2",
            "complete:1",
            "grid:2x3",
            "grid:1x1",
            "blob:3",
        ] {
            let err = bad.parse::<Family>().unwrap_err();
            assert!(matches!(err, Error::Parameter(_)), "{bad}: {err}");
        }
        assert!(Family::Path(1).build().is_err());
    }

    #[test]
    fn grid_edge_count_matches_lattice_formula() {
        for d in 1..=3usize {
            for side in 2..=4usize {
                let g = Graph::from_family(&Family::Grid(vec![side; d])).unwrap();
                let expect = d * (side - 1) * side.pow(d as u32 - 1);
                assert_eq!(g.edge_count(), expect, "d={d} side={side}");
            }
        }
        let g = fam("grid:2x2x3");
        assert_eq!(g.n(), 6);
        assert_eq!(
            g.edges(),
            vec![(0, 1), (0, 2), (1, 3), (2, 3), (2, 4), (3, 5), (4, 5)]
        );
    }

    #[test]
    fn family_display_round_trips() {
        for s in [
            "path:5",
            "grid:3x2x2x3",
            "star:7",
            "cycle:4",
            "complete:3",
            "icosahedron",
        ] {
            assert_eq!(s.parse::<Family>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn toggle_edge_examples() {
        let p2 = fam("path:2");
        assert_eq!(p2.toggle_edge(0, 1).unwrap(), Graph::empty(2));
        assert_eq!(Graph::empty(2).toggle_edge(0, 1).unwrap(), p2);
        assert!(p2.toggle_edge(1, 1).is_err());
        assert!(p2.toggle_edge(0, 2).is_err());
    }

    #[test]
    fn delete_vertex_examples() {
        let (g, map) = fam("path:3").delete_vertex(1).unwrap();
        assert_eq!(g, Graph::empty(2));
        assert_eq!(map, vec![Some(0), None, Some(1)]);
        assert_eq!(fam("star:4").delete_vertex(0).unwrap().0, Graph::empty(3));
        assert_eq!(fam("cycle:3").delete_vertex(2).unwrap().0, fam("path:2"));
        assert!(fam("path:2").delete_vertex(2).is_err());
    }

    #[test]
    fn local_complement_examples() {
        let g = fam("path:3").local_complement(1).unwrap();
        assert_eq!(g.edges(), vec![(0, 1), (0, 2), (1, 2)]);
        for n in 2..7 {
            let star = Graph::from_family(&Family::Star(n)).unwrap();
            let complete = Graph::from_family(&Family::Complete(n)).unwrap();
            assert_eq!(star.local_complement(0).unwrap(), complete);
        }
    }

    #[test]
    fn edge_list_format() {
        let text = "# a triangle\n3\n0 1  # first\n1 2\n\n0 2\n";
        let g = Graph::parse_edge_list(text).unwrap();
        assert_eq!(g, fam("cycle:3"));
        assert_eq!(Graph::parse_edge_list(&g.to_edge_list()).unwrap(), g);

        assert!(matches!(
            Graph::parse_edge_list("3\n0 0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Graph::parse_edge_list("2\n0 5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(Graph::parse_edge_list("2\n0 1\n1 0\n").is_err());
        assert!(Graph::parse_edge_list("").is_err());
        assert!(Graph::parse_edge_list("0 1\n").is_err());
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..=8).prop_flat_map(|n| {
            let pairs = n * (n - 1) / 2;
            proptest::collection::vec(any::<bool>(), pairs).prop_map(move |bits| {
                let mut g = Graph::empty(n);
                let mut k = 0;
                for u in 0..n {
                    for v in u + 1..n {
                        if bits[k] {
                            g.toggle_edge_mut(u, v);
                        }
                        k += 1;
                    }
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn toggle_and_complement_are_involutions(g in arb_graph(), a in 0usize..8, b in 0usize..8) {
            let n = g.n();
            let (u, v) = (a % n, b % n);
            if u != v {
                prop_assert_eq!(g.toggle_edge(u, v).unwrap().toggle_edge(u, v).unwrap(), g.clone());
            }
            prop_assert_eq!(g.local_complement(u).unwrap().local_complement(u).unwrap(), g.clone());
        }

        #[test]
        fn adjacency_stays_symmetric(g in arb_graph(), a in 0usize..8) {
            let v = a % g.n();
            let h = g.local_complement(v).unwrap();
            for x in 0..h.n() {
                prop_assert!(!h.has_edge(x, x));
                for y in 0..h.n() {
                    prop_assert_eq!(h.has_edge(x, y), h.has_edge(y, x));
                }
            }
        }

        #[test]
        fn deletion_counts(g in arb_graph(), a in 0usize..8) {
            let v = a % g.n();
            let (h, map) = g.delete_vertex(v).unwrap();
            prop_assert_eq!(h.n(), g.n() - 1);
            prop_assert_eq!(h.edge_count(), g.edge_count() - g.degree(v));
            for (x, y) in g.edges() {
                if let (Some(x2), Some(y2)) = (map[x], map[y]) {
                    prop_assert!(h.has_edge(x2, y2));
                }
            }
        }
    }
}

//! The trajectory condition network and the similarity measures derived from it.
//!
//! Edge weights are `1/sqrt(f)` for adjacency frequency `f`, so frequently
//! adjacent conditions sit closer together. Condition similarity is the
//! reciprocal of the minimum-weight path length, and trajectory similarity is
//! the mean condition similarity over all cross pairs of conditions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt::Write as _;

use crate::cohort::{Catalog, ConditionId};
use crate::config::EdgeWeighting;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Undirected condition graph with integer edge frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryNetwork {
    nodes: Vec<ConditionId>,
    index: HashMap<ConditionId, usize>,
    /// Canonical `(lo, hi)` keys.
    edges: BTreeMap<(ConditionId, ConditionId), u64>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

/// `1/sqrt(f)` for a positive edge frequency.
pub fn edge_weight(frequency: u64) -> Result<f64> {
    if frequency == 0 {
        return Err(Error::invalid("edge frequency must be positive"));
    }
    Ok(1.0 / (frequency as f64).sqrt())
}

impl TrajectoryNetwork {
    /// Network over `nodes` with the given undirected edge frequencies.
    pub fn from_edges(
        nodes: impl IntoIterator<Item = ConditionId>,
        edges: impl IntoIterator<Item = ((ConditionId, ConditionId), u64)>,
    ) -> Result<Self> {
        let mut node_list: Vec<ConditionId> = nodes.into_iter().collect();
        node_list.sort();
        node_list.dedup();
        let index: HashMap<ConditionId, usize> =
            node_list.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut merged: BTreeMap<(ConditionId, ConditionId), u64> = BTreeMap::new();
        for ((a, b), f) in edges {
            if a == b {
                return Err(Error::invalid(format!("self-edge on condition {a}")));
            }
            if f == 0 {
                continue;
            }
            for c in [a, b] {
                if !index.contains_key(&c) {
                    return Err(Error::invalid(format!("edge references unknown node {c}")));
                }
            }
            *merged.entry((a.min(b), a.max(b))).or_default() += f;
        }
        let mut adjacency = vec![Vec::new(); node_list.len()];
        for (&(a, b), &f) in &merged {
            let w = edge_weight(f)?;
            let (ia, ib) = (index[&a], index[&b]);
            adjacency[ia].push((ib, w));
            adjacency[ib].push((ia, w));
        }
        Ok(TrajectoryNetwork {
            nodes: node_list,
            index,
            edges: merged,
            adjacency,
        })
    }

    pub fn nodes(&self) -> &[ConditionId] {
        &self.nodes
    }

    pub fn contains(&self, c: ConditionId) -> bool {
        self.index.contains_key(&c)
    }

    /// Edge frequencies keyed by `(lo, hi)`.
    pub fn edges(&self) -> &BTreeMap<(ConditionId, ConditionId), u64> {
        &self.edges
    }

    pub fn frequency(&self, a: ConditionId, b: ConditionId) -> Option<u64> {
        self.edges.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn weight(&self, a: ConditionId, b: ConditionId) -> Option<f64> {
        self.frequency(a, b).map(|f| 1.0 / (f as f64).sqrt())
    }

    fn node_index(&self, c: ConditionId) -> Result<usize> {
        self.index
            .get(&c)
            .copied()
            .ok_or_else(|| Error::invalid(format!("condition {c} is not in the network")))
    }

    /// Dijkstra from one source; `None` marks unreachable nodes.
    fn single_source(&self, source: usize) -> Vec<Option<f64>> {
        let mut dist: Vec<Option<f64>> = vec![None; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = Some(0.0);
        heap.push(Frontier { dist: 0.0, node: source });
        while let Some(Frontier { dist: d, node }) = heap.pop() {
            if dist[node].is_some_and(|best| d > best) {
                continue;
            }
            for &(next, w) in &self.adjacency[node] {
                let candidate = d + w;
                if dist[next].map_or(true, |best| candidate < best) {
                    dist[next] = Some(candidate);
                    heap.push(Frontier { dist: candidate, node: next });
                }
            }
        }
        dist
    }

    /// Minimum total edge weight over all paths from `a` to `b`; `None` if disconnected.
    pub fn shortest_path_length(&self, a: ConditionId, b: ConditionId) -> Result<Option<f64>> {
        let (ia, ib) = (self.node_index(a)?, self.node_index(b)?);
        if ia == ib {
            return Ok(Some(0.0));
        }
        Ok(self.single_source(ia)[ib])
    }

    /// All-pairs shortest paths, indexed like [`nodes`](Self::nodes).
    pub fn all_shortest_paths(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.nodes.len()).map(|s| self.single_source(s)).collect()
    }

    pub fn condition_similarity(&self, a: ConditionId, b: ConditionId, clamp: bool) -> Result<f64> {
        let d = self.shortest_path_length(a, b)?;
        Ok(similarity_from_distance(a == b, d, clamp))
    }

    pub fn trajectory_similarity(
        &self,
        t1: &[ConditionId],
        t2: &[ConditionId],
        clamp: bool,
    ) -> Result<f64> {
        let sims = ConditionSimilarity::new(self, clamp);
        sims.trajectory(t1, t2)
    }

    /// Graphviz rendering: nodes carry names and system categories, edges their
    /// frequency and weight.
    pub fn to_dot(&self, catalog: &Catalog) -> String {
        let mut out = String::from("graph trajectory_network {\n");
        for &c in &self.nodes {
            let name = catalog.name(c).unwrap_or("unknown").replace('"', "'");
            let system = catalog.system(c).map_or("unknown", |s| s.as_str());
            let _ = writeln!(out, "  \"{c}\" [label=\"{name}\", system_category=\"{system}\"];");
        }
        for (&(a, b), &f) in &self.edges {
            let w = 1.0 / (f as f64).sqrt();
            let _ = writeln!(out, "  \"{a}\" -- \"{b}\" [f={f}, w={w}];");
        }
        out.push_str("}\n");
        out
    }
}

fn similarity_from_distance(same: bool, distance: Option<f64>, clamp: bool) -> f64 {
    if same {
        return 1.0;
    }
    match distance {
        None => 0.0,
        Some(d) if clamp => (1.0 / d).min(1.0),
        Some(d) => 1.0 / d,
    }
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // reversed so the max-heap pops the nearest node first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Adjacency frequencies from retained trajectories: each consecutive pair
/// counts once per trajectory (or by the trajectory's support under
/// [`EdgeWeighting::Patient`]), orientation ignored.
pub fn build_network(trajectories: &[Trajectory], weighting: EdgeWeighting) -> Result<TrajectoryNetwork> {
    if trajectories.is_empty() {
        return Err(Error::invalid("cannot build a network from zero trajectories"));
    }
    let nodes: Vec<ConditionId> = trajectories
        .iter()
        .flat_map(|t| t.conditions.iter().copied())
        .collect();
    let mut edges: BTreeMap<(ConditionId, ConditionId), u64> = BTreeMap::new();
    for t in trajectories {
        let increment = match weighting {
            EdgeWeighting::Trajectory => 1,
            EdgeWeighting::Patient => t.support() as u64,
        };
        let mut seen = Vec::new();
        for w in t.conditions.windows(2) {
            let key = (w[0].min(w[1]), w[0].max(w[1]));
            if !seen.contains(&key) {
                seen.push(key);
                *edges.entry(key).or_default() += increment;
            }
        }
    }
    TrajectoryNetwork::from_edges(nodes, edges)
}

/// Condition-similarity lookup table over one network.
struct ConditionSimilarity<'a> {
    network: &'a TrajectoryNetwork,
    table: Vec<Vec<f64>>,
}

impl<'a> ConditionSimilarity<'a> {
    fn new(network: &'a TrajectoryNetwork, clamp: bool) -> Self {
        let distances = network.all_shortest_paths();
        let table = distances
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, &d)| similarity_from_distance(i == j, d, clamp))
                    .collect()
            })
            .collect();
        ConditionSimilarity { network, table }
    }

    fn trajectory(&self, t1: &[ConditionId], t2: &[ConditionId]) -> Result<f64> {
        if t1.is_empty() || t2.is_empty() {
            return Err(Error::invalid("trajectory similarity of an empty trajectory"));
        }
        // fixed argument order keeps the floating-point sum symmetric
        let (t1, t2) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let i1: Vec<usize> = t1.iter().map(|&c| self.network.node_index(c)).collect::<Result<_>>()?;
        let i2: Vec<usize> = t2.iter().map(|&c| self.network.node_index(c)).collect::<Result<_>>()?;
        let total: f64 = i1
            .iter()
            .flat_map(|&a| i2.iter().map(move |&b| (a, b)))
            .map(|(a, b)| self.table[a][b])
            .sum();
        Ok(total / (t1.len() * t2.len()) as f64)
    }
}

/// Dense symmetric `n × n` trajectory similarity matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Wraps row-major values; errors unless square.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("similarity matrix must be square"));
        }
        Ok(SimilarityMatrix {
            n,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self, tolerance: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tolerance))
    }
}

/// Pairwise trajectory similarities; each unordered pair is computed once and
/// the diagonal is fixed at 1.
pub fn similarity_matrix(
    network: &TrajectoryNetwork,
    trajectories: &[Vec<ConditionId>],
    clamp: bool,
) -> Result<SimilarityMatrix> {
    if trajectories.is_empty() {
        return Err(Error::invalid("similarity matrix over zero trajectories"));
    }
    let sims = ConditionSimilarity::new(network, clamp);
    let n = trajectories.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in 0..i {
            let s = sims.trajectory(&trajectories[i], &trajectories[j])?;
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    Ok(SimilarityMatrix { n, values })
}

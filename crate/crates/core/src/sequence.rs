//! Adjacency graphs, connected build orders and input/output splits.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{cells_adjacent, GeomError, KernelConfig};
use crate::Part;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("adjacency graph is not connected")]
    Disconnected,
    #[error("sequence needs at least 2 cells, got {0}")]
    TooSmall(usize),
    #[error("cap must be at least 1")]
    ZeroCap,
    #[error("sequence does not match part: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Undirected graph over cell ids. Node order follows the part's cell order
/// and defines the lexicographic order of build sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyGraph {
    pub nodes: Vec<String>,
    /// Index pairs `(i, j)` with `i < j`.
    pub edges: BTreeSet<(usize, usize)>,
}

impl AdjacencyGraph {
    pub fn new(nodes: Vec<String>, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let edges = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        AdjacencyGraph { nodes, edges }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    fn neighbor_masks(&self) -> Vec<u64> {
        let mut masks = vec![0u64; self.len()];
        for &(a, b) in &self.edges {
            masks[a] |= 1 << b;
            masks[b] |= 1 << a;
        }
        masks
    }

    pub fn is_connected(&self) -> bool {
        if self.len() <= 1 {
            return true;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..self.len() {
                if !seen[j] && self.adjacent(i, j) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Whether every prefix of `order` induces a connected subgraph.
    pub fn is_connected_order(&self, order: &[usize]) -> bool {
        order
            .iter()
            .enumerate()
            .all(|(k, &v)| k == 0 || order[..k].iter().any(|&u| self.adjacent(u, v)))
    }
}

/// A cell ordering whose every prefix is connected.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BuildSequence {
    pub part_id: String,
    /// Node indices into the graph (and the part's cell list).
    pub order: Vec<usize>,
}

impl BuildSequence {
    pub fn cell_ids<'a>(&self, graph: &'a AdjacencyGraph) -> Vec<&'a str> {
        self.order.iter().map(|&i| graph.nodes[i].as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitExample {
    pub part_id: String,
    pub order: Vec<String>,
    pub cut: usize,
    pub input_cells: Vec<String>,
    pub output_cells: Vec<String>,
    /// Surface ids referenced by both sides, in part surface order.
    pub reused_surfaces: Vec<String>,
}

pub fn build_graph(part: &Part, cfg: &KernelConfig) -> Result<AdjacencyGraph, SequenceError> {
    let cells = part.resolve_all()?;
    let n = cells.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let edges = pairs
        .into_par_iter()
        .map(|(i, j)| cells_adjacent(&cells[i], &cells[j], cfg).map(|adj| adj.then_some((i, j))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AdjacencyGraph::new(
        part.cells.iter().map(|c| c.id.clone()).collect(),
        edges.into_iter().flatten(),
    ))
}

/// Beyond this many nodes connected orderings are not counted.
const MAX_COUNTED_NODES: usize = 20;

/// Number of connected orderings, saturating, or `None` when the graph is
/// too large to count by subset dynamic programming.
pub fn count_orders(graph: &AdjacencyGraph) -> Option<u128> {
    let n = graph.len();
    if n == 0 || n > MAX_COUNTED_NODES {
        return None;
    }
    let nbr = graph.neighbor_masks();
    let full = (1u64 << n) - 1;
    let mut ways = vec![0u128; 1 << n];
    for v in 0..n {
        ways[1 << v] = 1;
    }
    for set in 1..=full {
        let w = ways[set as usize];
        if w == 0 {
            continue;
        }
        let frontier = (0..n)
            .filter(|&v| set & (1 << v) == 0 && nbr[v] & set != 0)
            .collect::<Vec<_>>();
        for v in frontier {
            let next = (set | 1 << v) as usize;
            ways[next] = ways[next].saturating_add(w);
        }
    }
    Some(ways[full as usize])
}

/// All connected orderings in lexicographic order of node index.
fn all_orders(graph: &AdjacencyGraph) -> Vec<Vec<usize>> {
    fn extend(graph: &AdjacencyGraph, prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == graph.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..graph.len() {
            if used[v] || !(prefix.is_empty() || prefix.iter().any(|&u| graph.adjacent(u, v))) {
                continue;
            }
            used[v] = true;
            prefix.push(v);
            extend(graph, prefix, used, out);
            prefix.pop();
            used[v] = false;
        }
    }
    let mut out = Vec::new();
    extend(graph, &mut Vec::new(), &mut vec![false; graph.len()], &mut out);
    out
}

/// One ordering grown from a uniform start node, adding a uniformly chosen
/// frontier node at each step.
fn sample_order<R: Rng>(graph: &AdjacencyGraph, rng: &mut R) -> Vec<usize> {
    let n = graph.len();
    let mut used = vec![false; n];
    let mut order = vec![rng.gen_range(0..n)];
    used[order[0]] = true;
    while order.len() < n {
        let frontier: Vec<usize> = (0..n)
            .filter(|&v| !used[v] && order.iter().any(|&u| graph.adjacent(u, v)))
            .collect();
        let &v = frontier.choose(rng).expect("connected graph has a frontier");
        used[v] = true;
        order.push(v);
    }
    order
}

/// Lexicographically least connected ordering: start at node 0 and always
/// take the smallest frontier node.
pub fn least_order(graph: &AdjacencyGraph) -> Result<Vec<usize>, SequenceError> {
    if !graph.is_connected() {
        return Err(SequenceError::Disconnected);
    }
    let n = graph.len();
    let mut used = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for step in 0..n {
        let v = (0..n)
            .find(|&v| !used[v] && (step == 0 || order.iter().any(|&u| graph.adjacent(u, v))))
            .expect("connected graph has a frontier");
        used[v] = true;
        order.push(v);
    }
    Ok(order)
}

/// Every connected ordering when there are at most `cap` of them (`None` means
/// no cap), otherwise `cap` distinct sampled orderings. Sorted either way.
pub fn enumerate_orders(
    graph: &AdjacencyGraph,
    part_id: &str,
    cap: Option<usize>,
    seed: u64,
) -> Result<Vec<BuildSequence>, SequenceError> {
    if cap == Some(0) {
        return Err(SequenceError::ZeroCap);
    }
    if graph.is_empty() || !graph.is_connected() {
        return Err(SequenceError::Disconnected);
    }
    let exhaustive = match (cap, count_orders(graph)) {
        (None, _) => true,
        (Some(cap), Some(count)) => count <= cap as u128,
        (Some(_), None) => false,
    };
    let orders: Vec<Vec<usize>> = if exhaustive {
        all_orders(graph)
    } else {
        let cap = cap.expect("sampling only with a cap");
        let mut rng = SplitMix64::seed_from_u64(seed);
        let mut found = BTreeSet::new();
        // the count exceeds cap, so distinct samples keep arriving
        let max_draws = cap.saturating_mul(1000).max(10_000);
        for _ in 0..max_draws {
            if found.len() >= cap {
                break;
            }
            found.insert(sample_order(graph, &mut rng));
        }
        found.into_iter().collect()
    };
    Ok(orders
        .into_iter()
        .map(|order| BuildSequence {
            part_id: part_id.to_string(),
            order,
        })
        .collect())
}

/// Cuts `seq` at every position `k = 1..n-1`.
pub fn split_all(seq: &BuildSequence, part: &Part) -> Result<Vec<SplitExample>, SequenceError> {
    let n = seq.order.len();
    if n < 2 {
        return Err(SequenceError::TooSmall(n));
    }
    (1..n).map(|k| split_at(seq, part, k)).collect()
}

pub fn split_at(seq: &BuildSequence, part: &Part, cut: usize) -> Result<SplitExample, SequenceError> {
    let n = seq.order.len();
    if n < 2 {
        return Err(SequenceError::TooSmall(n));
    }
    if cut == 0 || cut >= n {
        return Err(SequenceError::Mismatch(format!("cut {cut} outside 1..{}", n - 1)));
    }
    let cell = |i: usize| {
        part.cells
            .get(i)
            .ok_or_else(|| SequenceError::Mismatch(format!("cell index {i} out of range")))
    };
    let ids = seq
        .order
        .iter()
        .map(|&i| cell(i).map(|c| c.id.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let surfaces_of = |idx: &[usize]| -> Result<BTreeSet<String>, SequenceError> {
        let mut s = BTreeSet::new();
        for &i in idx {
            s.extend(cell(i)?.surface_ids().map(str::to_string));
        }
        Ok(s)
    };
    let input = surfaces_of(&seq.order[..cut])?;
    let output = surfaces_of(&seq.order[cut..])?;
    let reused = part
        .surfaces
        .iter()
        .filter(|s| input.contains(&s.id) && output.contains(&s.id))
        .map(|s| s.id.clone())
        .collect();
    Ok(SplitExample {
        part_id: seq.part_id.clone(),
        order: ids.clone(),
        cut,
        input_cells: ids[..cut].to_vec(),
        output_cells: ids[cut..].to_vec(),
        reused_surfaces: reused,
    })
}

//! Minimum spanning trees over the task distance graph.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::{DistanceMatrix, METRIC_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub u: String,
    pub v: String,
    pub weight: f64,
}

/// `n - 1` edges in the order Kruskal accepted them. Each edge has `u < v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningTree {
    pub task_names: Vec<String>,
    pub edges: Vec<TreeEdge>,
}

impl SpanningTree {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    fn index_of(&self, task: &str) -> Result<usize> {
        self.task_names
            .iter()
            .position(|t| t == task)
            .ok_or_else(|| Error::UnknownTask(task.to_string()))
    }

    fn adjacency(&self) -> Result<Vec<Vec<(usize, f64)>>> {
        let mut adj = vec![Vec::new(); self.task_names.len()];
        for e in &self.edges {
            let (a, b) = (self.index_of(&e.u)?, self.index_of(&e.v)?);
            adj[a].push((b, e.weight));
            adj[b].push((a, e.weight));
        }
        Ok(adj)
    }

    /// Edge weights along the unique tree path from `u` to `v`.
    pub fn path_weights(&self, u: &str, v: &str) -> Result<Vec<f64>> {
        let (src, dst) = (self.index_of(u)?, self.index_of(v)?);
        let adj = self.adjacency()?;
        let mut prev: Vec<Option<(usize, f64)>> = vec![None; adj.len()];
        let mut seen = vec![false; adj.len()];
        seen[src] = true;
        let mut queue = VecDeque::from([src]);
        while let Some(x) = queue.pop_front() {
            if x == dst {
                break;
            }
            for &(y, w) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    prev[y] = Some((x, w));
                    queue.push_back(y);
                }
            }
        }
        if !seen[dst] {
            return Err(Error::OutOfRange(format!("`{u}` and `{v}` are not connected")));
        }
        let mut weights = Vec::new();
        let mut at = dst;
        while let Some((p, w)) = prev[at] {
            weights.push(w);
            at = p;
        }
        weights.reverse();
        Ok(weights)
    }
}

/// Bounds on a pair's distance read off the tree path between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathBounds {
    /// Heaviest edge on the path.
    pub lower: f64,
    /// Sum of the path's edges.
    pub upper: f64,
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal's algorithm. Equal weights are taken in lexicographic `(u, v)` name order.
pub fn mst(dm: &DistanceMatrix) -> Result<SpanningTree> {
    let n = dm.n_tasks();
    if n < 2 {
        return Err(Error::TooSmall(format!("need n_tasks >= 2, got {n}")));
    }
    let names = dm.task_names();
    let mut candidates = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = if names[i] <= names[j] { (i, j) } else { (j, i) };
            candidates.push((dm.get(i, j), a, b));
        }
    }
    candidates.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then_with(|| names[x.1].cmp(&names[y.1]))
            .then_with(|| names[x.2].cmp(&names[y.2]))
    });

    let mut sets = DisjointSet::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for (w, a, b) in candidates {
        if sets.union(a, b) {
            edges.push(TreeEdge {
                u: names[a].clone(),
                v: names[b].clone(),
                weight: w,
            });
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    Ok(SpanningTree {
        task_names: names.to_vec(),
        edges,
    })
}

/// Lower/upper bounds for the pair `(u, v)` from the tree path between them.
pub fn path_bounds(tree: &SpanningTree, u: &str, v: &str, dm: &DistanceMatrix) -> Result<PathBounds> {
    if u == v {
        return Err(Error::OutOfRange(format!("path bounds need two distinct tasks, got `{u}` twice")));
    }
    let weights = tree.path_weights(u, v)?;
    let bounds = PathBounds {
        lower: weights.iter().copied().fold(0.0, f64::max),
        upper: weights.iter().sum(),
    };
    let direct = dm.between(u, v)?;
    debug_assert!(
        bounds.lower <= direct + METRIC_TOLERANCE && direct <= bounds.upper + METRIC_TOLERANCE,
        "bounds {bounds:?} do not contain {direct} for ({u}, {v})"
    );
    Ok(bounds)
}

/// The `k` tasks closest to `task`, ascending by distance then name.
pub fn nearest_tasks(dm: &DistanceMatrix, task: &str, k: usize) -> Result<Vec<(String, f64)>> {
    let idx = dm.index_of(task)?;
    let n = dm.n_tasks();
    if k == 0 || k > n - 1 {
        return Err(Error::OutOfRange(format!("k must be in 1..={}, got {k}", n - 1)));
    }
    let mut others: Vec<(String, f64)> = (0..n)
        .filter(|&j| j != idx)
        .map(|j| (dm.task_names()[j].clone(), dm.get(idx, j)))
        .collect();
    others.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    others.truncate(k);
    Ok(others)
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Renders the tree as an undirected Graphviz graph with 2-decimal edge labels.
pub fn export_dot(tree: &SpanningTree) -> String {
    let mut out = String::from("graph mst {\n");
    for t in &tree.task_names {
        let _ = writeln!(out, "  {};", dot_id(t));
    }
    for e in &tree.edges {
        let _ = writeln!(
            out,
            "  {} -- {} [label=\"{:.2}\"];",
            dot_id(&e.u),
            dot_id(&e.v),
            e.weight
        );
    }
    out.push_str("}\n");
    out
}

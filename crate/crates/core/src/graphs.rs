//! Samplers for labeled SBM graphs and labeled Poisson Galton-Watson trees,
//! revealed-label sets, and radius-`r` balls.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::ops::Range;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Community, ModelParams};
use crate::rng::{rng_for, stream};

/// Default vertex budget for Galton-Watson trees.
pub const DEFAULT_TREE_BUDGET: usize = 5_000_000;
/// Default vertex budget for balls extracted from a graph.
pub const DEFAULT_BALL_BUDGET: usize = 2_000_000;

/// A rooted tree laid out in breadth-first order: vertex 0 is the root, a
/// vertex's children form a contiguous index range, and every child has a
/// larger index than its parent.
pub trait RootedTree {
    fn vertex_count(&self) -> usize;
    fn depth(&self, v: usize) -> usize;
    fn children(&self, v: usize) -> Range<usize>;
    fn label(&self, v: usize) -> Community;
}

/// Draws a Poisson count, treating a zero mean as the point mass at 0.
pub(crate) fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("finite positive Poisson mean")
        .sample(rng) as usize
}

/// Undirected simple graph in CSR form with a ground-truth label per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledGraph {
    labels: Vec<Community>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
}

impl LabeledGraph {
    /// Builds a graph from an edge list, rejecting self-loops, duplicate
    /// edges and out-of-range endpoints.
    pub fn from_edges(labels: Vec<Community>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = labels.len();
        if n > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!("n = {n} is too large")));
        }
        let mut degree = vec![0usize; n];
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) out of range for n = {n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate edge ({u}, {v})"
                )));
            }
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0u32; offsets[n]];
        for &(u, v) in edges {
            neighbors[fill[u]] = v as u32;
            fill[u] += 1;
            neighbors[fill[v]] = u as u32;
            fill[v] += 1;
        }
        for v in 0..n {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Ok(Self {
            labels,
            offsets,
            neighbors,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Community] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Community {
        self.labels[v]
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .map(|&v| v as usize)
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.n() as f64
    }

    /// Fraction of vertices in community 1.
    pub fn community_one_fraction(&self) -> f64 {
        self.labels.iter().filter(|&&x| x == Community::One).count() as f64 / self.n() as f64
    }

    /// Writes the edge-list format: a line holding `n`, then one label line
    /// (`1` or `2`) per vertex, then one `u v` line per edge. Lines starting
    /// with `#` are comments.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.n())?;
        for x in &self.labels {
            writeln!(w, "{x}")?;
        }
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().filter(|l| {
            l.as_ref()
                .map_or(true, |s| !s.trim().is_empty() && !s.starts_with('#'))
        });
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing n header".into()))??;
        let n: usize = header
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad n header {header:?}")))?;
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("missing label line".into()))??;
            let v: u8 = line
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad label line {line:?}")))?;
            labels.push(Community::from_u8(v)?);
        }
        let mut edges = Vec::new();
        for line in lines {
            let line = line?;
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(u)), Some(Ok(v)), None) => edges.push((u, v)),
                _ => return Err(Error::Parse(format!("bad edge line {line:?}"))),
            }
        }
        Self::from_edges(labels, &edges)
    }
}

/// Samples an SBM graph on `n` vertices.
///
/// Labels are i.i.d. with `P(X = 1) = p`. For each pair of label classes the
/// number of edges is drawn from the exact Binomial law and the endpoints are
/// placed uniformly among the class pairs, rejecting duplicates; this is the
/// same law as independent Bernoulli(`M_{X_i X_j}`) pair coins.
pub fn sample_sbm(params: &ModelParams, n: usize, seed: u64) -> Result<LabeledGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "n must be at least 2, got {n}"
        )));
    }
    let m = params.connectivity(n);
    if m.iter().flatten().any(|&x| x > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "edge probability d*max(a,c)/n = {} exceeds 1; increase n",
            m[0][0].max(m[1][1])
        )));
    }

    let mut label_rng = rng_for(seed, stream::LABELS, 0);
    let labels: Vec<Community> = (0..n)
        .map(|_| {
            if label_rng.random_bool(params.p()) {
                Community::One
            } else {
                Community::Two
            }
        })
        .collect();
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (v, x) in labels.iter().enumerate() {
        classes[x.index()].push(v);
    }

    let mut edges = Vec::new();
    for (k, (i, j)) in [(0usize, 0usize), (0, 1), (1, 1)].into_iter().enumerate() {
        let mut rng = rng_for(seed, stream::EDGES, k as u64);
        place_edges(
            &classes[i],
            &classes[j],
            i == j,
            m[i][j],
            &mut rng,
            &mut edges,
        );
    }
    LabeledGraph::from_edges(labels, &edges)
}

fn place_edges<R: Rng>(
    left: &[usize],
    right: &[usize],
    same: bool,
    prob: f64,
    rng: &mut R,
    out: &mut Vec<(usize, usize)>,
) {
    let pairs: u64 = if same {
        let k = left.len() as u64;
        k * k.saturating_sub(1) / 2
    } else {
        left.len() as u64 * right.len() as u64
    };
    if pairs == 0 || prob <= 0.0 {
        return;
    }
    if prob > 0.1 {
        // Dense corner (tiny n): scan the pairs directly.
        for (x, &u) in left.iter().enumerate() {
            let start = if same { x + 1 } else { 0 };
            for &v in &right[start..] {
                if rng.random_bool(prob) {
                    out.push((u.min(v), u.max(v)));
                }
            }
        }
        return;
    }
    let count = Binomial::new(pairs, prob)
        .expect("valid binomial")
        .sample(rng) as usize;
    let mut chosen = HashSet::with_capacity(count);
    let mut picked = Vec::with_capacity(count);
    while picked.len() < count {
        let u = left[rng.random_range(0..left.len())];
        let v = right[rng.random_range(0..right.len())];
        if u == v {
            continue;
        }
        let e = (u.min(v), u.max(v));
        if chosen.insert(e) {
            picked.push(e);
        }
    }
    out.extend(picked);
}

/// Labeled Galton-Watson tree in breadth-first layout.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledTree {
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    labels: Vec<Community>,
    child_start: Vec<usize>,
    child_count: Vec<usize>,
    max_depth: usize,
}

/// Parent-array JSON record of a tree; `parent[0] = -1` marks the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub schema_version: u32,
    pub max_depth: usize,
    pub parent: Vec<i64>,
    pub labels: Vec<Community>,
}

impl LabeledTree {
    /// Builds a tree from a parent array in breadth-first order
    /// (`parent[v] < v` and parents non-decreasing).
    pub fn from_parents(
        parent: &[Option<usize>],
        labels: Vec<Community>,
        max_depth: usize,
    ) -> Result<Self> {
        let n = parent.len();
        if n == 0 || parent[0].is_some() || labels.len() != n {
            return Err(Error::Parse(
                "tree needs a root at index 0 and one label per vertex".into(),
            ));
        }
        let mut depth = vec![0usize; n];
        let mut child_start = vec![0usize; n];
        let mut child_count = vec![0usize; n];
        let mut last_parent = 0usize;
        for v in 1..n {
            let u = parent[v].ok_or_else(|| Error::Parse(format!("vertex {v} has no parent")))?;
            if u >= v || u < last_parent {
                return Err(Error::Parse(
                    "parent array is not in breadth-first order".into(),
                ));
            }
            last_parent = u;
            depth[v] = depth[u] + 1;
            if depth[v] > max_depth {
                return Err(Error::Parse(format!(
                    "vertex {v} deeper than max_depth {max_depth}"
                )));
            }
            if child_count[u] == 0 {
                child_start[u] = v;
            }
            child_count[u] += 1;
        }
        for v in 0..n {
            if child_count[v] == 0 {
                child_start[v] = n;
            }
        }
        Ok(Self {
            parent: parent.to_vec(),
            depth,
            labels,
            child_start,
            child_count,
            max_depth,
        })
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn labels(&self) -> &[Community] {
        &self.labels
    }

    /// Vertices at depth exactly `k`.
    pub fn generation(&self, k: usize) -> Range<usize> {
        let lo = self.depth.partition_point(|&x| x < k);
        let hi = self.depth.partition_point(|&x| x <= k);
        lo..hi
    }

    pub fn to_record(&self) -> TreeRecord {
        TreeRecord {
            schema_version: 1,
            max_depth: self.max_depth,
            parent: self
                .parent
                .iter()
                .map(|p| p.map_or(-1, |u| u as i64))
                .collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn from_record(record: &TreeRecord) -> Result<Self> {
        let parent: Vec<Option<usize>> = record
            .parent
            .iter()
            .map(|&p| if p < 0 { None } else { Some(p as usize) })
            .collect();
        Self::from_parents(&parent, record.labels.clone(), record.max_depth)
    }
}

impl RootedTree for LabeledTree {
    fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    fn children(&self, v: usize) -> Range<usize> {
        self.child_start[v]..self.child_start[v] + self.child_count[v]
    }

    fn label(&self, v: usize) -> Community {
        self.labels[v]
    }
}

/// Samples a labeled Poisson(`d`) Galton-Watson tree truncated at `max_depth`.
pub fn sample_gw(params: &ModelParams, max_depth: usize, seed: u64) -> Result<LabeledTree> {
    sample_gw_with_budget(params, max_depth, seed, DEFAULT_TREE_BUDGET)
}

pub fn sample_gw_with_budget(
    params: &ModelParams,
    max_depth: usize,
    seed: u64,
    budget: usize,
) -> Result<LabeledTree> {
    let mut rng = rng_for(seed, stream::TREE, 0);
    sample_gw_from(params, max_depth, &mut rng, budget)
}

pub(crate) fn sample_gw_from<R: Rng>(
    params: &ModelParams,
    max_depth: usize,
    rng: &mut R,
    budget: usize,
) -> Result<LabeledTree> {
    let r = params.transition_matrix();
    let root = if rng.random_bool(params.p()) {
        Community::One
    } else {
        Community::Two
    };
    let mut parent = vec![None];
    let mut depth = vec![0usize];
    let mut labels = vec![root];
    let mut child_start = Vec::new();
    let mut child_count = Vec::new();
    let mut v = 0;
    while v < labels.len() {
        let k = if depth[v] < max_depth {
            poisson_count(rng, params.d())
        } else {
            0
        };
        if labels.len() + k > budget {
            return Err(Error::BudgetExceeded {
                what: "Galton-Watson tree size",
                limit: budget,
            });
        }
        child_start.push(if k > 0 { labels.len() } else { usize::MAX });
        child_count.push(k);
        let stay = r.rows[labels[v].index()][0];
        for _ in 0..k {
            parent.push(Some(v));
            depth.push(depth[v] + 1);
            labels.push(if rng.random_bool(stay) {
                Community::One
            } else {
                Community::Two
            });
        }
        v += 1;
    }
    let n = labels.len();
    for s in child_start.iter_mut() {
        if *s == usize::MAX {
            *s = n;
        }
    }
    Ok(LabeledTree {
        parent,
        depth,
        labels,
        child_start,
        child_count,
        max_depth,
    })
}

/// Set of vertices whose true label is observed.
#[derive(Clone, Debug, PartialEq)]
pub struct RevealedSet {
    q: f64,
    members: Vec<usize>,
}

impl RevealedSet {
    pub fn new(q: f64, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Self { q, members }
    }

    pub fn empty() -> Self {
        Self {
            q: 0.0,
            members: Vec::new(),
        }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }
}

/// Includes each eligible vertex independently with probability `q`.
pub fn sample_reveal<I: IntoIterator<Item = usize>>(
    eligible: I,
    q: f64,
    seed: u64,
) -> Result<RevealedSet> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "q must lie in [0, 1], got {q}"
        )));
    }
    let mut rng = rng_for(seed, stream::REVEALS, 0);
    let members = eligible
        .into_iter()
        .filter(|_| rng.random_bool(q))
        .collect();
    Ok(RevealedSet::new(q, members))
}

/// Breadth-first ball of radius `r` around a center vertex.
///
/// Local vertex ids follow BFS order, so the ball is also a [`RootedTree`]
/// through its BFS spanning tree; `edges` holds every edge of the induced
/// subgraph.
#[derive(Clone, Debug)]
pub struct Ball {
    center: usize,
    radius: usize,
    vertices: Vec<usize>,
    depth: Vec<usize>,
    labels: Vec<Community>,
    child_start: Vec<usize>,
    child_count: Vec<usize>,
    edges: Vec<(usize, usize)>,
    is_tree: bool,
}

impl Ball {
    pub fn center(&self) -> usize {
        self.center
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Global vertex ids, indexed by local id.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Induced edges in local ids.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_tree(&self) -> bool {
        self.is_tree
    }

    /// Local ids of the sphere at distance exactly `radius`.
    pub fn boundary(&self) -> Range<usize> {
        let lo = self.depth.partition_point(|&x| x < self.radius);
        lo..self.vertices.len()
    }

    /// Degree of the center inside the ball (equal to its graph degree when `radius >= 1`).
    pub fn root_degree(&self) -> usize {
        self.child_count[0]
    }

    /// Restricts a graph-level revealed set to the boundary, in local ids.
    pub fn revealed_boundary(&self, revealed: &RevealedSet) -> RevealedSet {
        let members = self
            .boundary()
            .filter(|&v| revealed.contains(self.vertices[v]))
            .collect();
        RevealedSet::new(revealed.q(), members)
    }
}

impl RootedTree for Ball {
    fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    fn children(&self, v: usize) -> Range<usize> {
        self.child_start[v]..self.child_start[v] + self.child_count[v]
    }

    fn label(&self, v: usize) -> Community {
        self.labels[v]
    }
}

pub fn extract_ball(graph: &LabeledGraph, center: usize, r: usize) -> Result<Ball> {
    extract_ball_with_budget(graph, center, r, DEFAULT_BALL_BUDGET)
}

pub fn extract_ball_with_budget(
    graph: &LabeledGraph,
    center: usize,
    r: usize,
    budget: usize,
) -> Result<Ball> {
    if center >= graph.n() {
        return Err(Error::InvalidParameter(format!(
            "center {center} out of range"
        )));
    }
    const UNSEEN: u32 = u32::MAX;
    let mut local = vec![UNSEEN; graph.n()];
    local[center] = 0;
    let mut vertices = vec![center];
    let mut depth = vec![0usize];
    let mut child_start = Vec::new();
    let mut child_count = Vec::new();
    let mut edges = Vec::new();
    let mut i = 0;
    while i < vertices.len() {
        let u = vertices[i];
        let start = vertices.len();
        if depth[i] < r {
            for &w in graph.neighbors(u) {
                let w = w as usize;
                if local[w] == UNSEEN {
                    if vertices.len() >= budget {
                        return Err(Error::BudgetExceeded {
                            what: "ball size",
                            limit: budget,
                        });
                    }
                    local[w] = vertices.len() as u32;
                    vertices.push(w);
                    depth.push(depth[i] + 1);
                }
            }
        }
        child_start.push(start);
        child_count.push(vertices.len() - start);
        i += 1;
    }
    for (lu, &u) in vertices.iter().enumerate() {
        for &w in graph.neighbors(u) {
            let lw = local[w as usize];
            if lw != UNSEEN && (lw as usize) > lu {
                edges.push((lu, lw as usize));
            }
        }
    }
    let is_tree = edges.len() + 1 == vertices.len();
    let labels = vertices.iter().map(|&v| graph.label(v)).collect();
    Ok(Ball {
        center,
        radius: r,
        vertices,
        depth,
        labels,
        child_start,
        child_count,
        edges,
        is_tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> LabeledGraph {
        LabeledGraph::from_edges(vec![Community::One; 3], &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn rejects_bad_edges() {
        let l = vec![Community::One; 3];
        assert!(LabeledGraph::from_edges(l.clone(), &[(0, 0)]).is_err());
        assert!(LabeledGraph::from_edges(l.clone(), &[(0, 1), (1, 0)]).is_err());
        assert!(LabeledGraph::from_edges(l, &[(0, 3)]).is_err());
    }

    #[test]
    fn ball_radius_zero() {
        let g = triangle();
        let b = extract_ball(&g, 1, 0).unwrap();
        assert_eq!(b.vertices(), &[1]);
        assert_eq!(b.boundary(), 0..1);
        assert!(b.is_tree());
    }

    #[test]
    fn triangle_ball_is_not_a_tree() {
        let g = triangle();
        for c in 0..3 {
            let b = extract_ball(&g, c, 1).unwrap();
            assert_eq!(b.vertex_count(), 3);
            assert_eq!(b.edges().len(), 3);
            assert!(!b.is_tree());
            assert_eq!(b.boundary().len(), 2);
        }
    }

    #[test]
    fn path_ball_boundary_and_depths() {
        let g =
            LabeledGraph::from_edges(vec![Community::Two; 5], &[(0, 1), (1, 2), (2, 3), (3, 4)])
                .unwrap();
        let b = extract_ball(&g, 2, 1).unwrap();
        assert!(b.is_tree());
        let mut bd: Vec<usize> = b.boundary().map(|v| b.vertices()[v]).collect();
        bd.sort();
        assert_eq!(bd, vec![1, 3]);
        let b = extract_ball(&g, 0, 10).unwrap();
        assert_eq!(b.vertex_count(), 5);
        assert!(b.boundary().is_empty());
    }

    #[test]
    fn ball_budget_is_an_error() {
        let g =
            LabeledGraph::from_edges(vec![Community::Two; 5], &[(0, 1), (1, 2), (2, 3), (3, 4)])
                .unwrap();
        assert!(matches!(
            extract_ball_with_budget(&g, 0, 4, 3),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn sbm_rejects_dense_probabilities() {
        let m = ModelParams::new(0.25, 10.0, 4.0).unwrap();
        assert!(sample_sbm(&m, 10, 1).is_err());
    }

    #[test]
    fn sbm_small_dense_corner_is_simple() {
        let m = ModelParams::new(0.5, 5.0, 1.0).unwrap();
        let g = sample_sbm(&m, 20, 3).unwrap();
        let again =
            LabeledGraph::from_edges(g.labels().to_vec(), &g.edges().collect::<Vec<_>>()).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn edge_list_round_trip() {
        let m = ModelParams::new(0.3, 4.0, 1.0).unwrap();
        let g = sample_sbm(&m, 300, 11).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = LabeledGraph::read_edge_list(&buf[..]).unwrap();
        assert_eq!(g, back);
        assert!(LabeledGraph::read_edge_list(&b"2\n1\n3\n"[..]).is_err());
    }

    #[test]
    fn gw_depth_zero_is_a_root() {
        let m = ModelParams::new(0.3, 4.0, 1.0).unwrap();
        let t = sample_gw(&m, 0, 5).unwrap();
        assert_eq!(t.vertex_count(), 1);
        assert!(t.children(0).is_empty());
    }

    #[test]
    fn gw_budget_is_an_error() {
        let m = ModelParams::new(0.3, 30.0, 1.0).unwrap();
        assert!(matches!(
            sample_gw_with_budget(&m, 4, 5, 1000),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn gw_layout_and_record_round_trip() {
        let m = ModelParams::new(0.3, 3.0, 1.0).unwrap();
        let t = sample_gw(&m, 4, 9).unwrap();
        for v in 0..t.vertex_count() {
            assert!(t.depth(v) <= 4);
            for c in t.children(v) {
                assert_eq!(t.parent(c), Some(v));
                assert_eq!(t.depth(c), t.depth(v) + 1);
            }
        }
        let rec = t.to_record();
        let json = serde_json::to_string(&rec).unwrap();
        let back = LabeledTree::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn reveal_extremes() {
        assert!(sample_reveal(0..100, 0.0, 1).unwrap().is_empty());
        assert_eq!(sample_reveal(0..100, 1.0, 1).unwrap().len(), 100);
        assert!(sample_reveal(0..100, 1.5, 1).is_err());
    }
}

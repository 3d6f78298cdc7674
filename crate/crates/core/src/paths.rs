//! Random-walk canonical paths, their congestion, and the interchange
//! mixing-time budget derived from them.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PhaseGraph;
use crate::rng::stream;

/// `ceil(2 ln(N) d^2 / gamma^2)`.
pub fn path_length_bound(n: usize, d: f64, gamma: f64) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidParameter("path length needs N >= 2".into()));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be in (0,1], got {gamma}"
        )));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter(format!("d must be > 0, got {d}")));
    }
    Ok((2.0 * (n as f64).ln() * d * d / (gamma * gamma)).ceil() as usize)
}

/// `ceil(5 N ln N)`.
pub fn default_walks_per_source(n: usize) -> usize {
    (5.0 * n as f64 * (n as f64).ln()).ceil() as usize
}

/// `9 N ln(N) path_len`, the visit count no node should exceed.
pub fn visit_threshold(n: usize, path_len: usize) -> f64 {
    9.0 * n as f64 * (n as f64).ln() * path_len as f64
}

/// `8 ln(N) path_len K / N`.
pub fn mixing_budget(n: f64, path_len: f64, congestion: f64) -> Result<f64> {
    if !(n > 1.0 && path_len > 0.0 && congestion > 0.0) {
        return Err(Error::InvalidParameter(
            "mixing budget needs N > 1 and positive length and congestion".into(),
        ));
    }
    Ok(8.0 * n.ln() * path_len * congestion / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathParams {
    pub path_len: usize,
    pub walks_per_source: usize,
    /// Stay put with probability 1/2 at each step.
    pub lazy: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalPath {
    pub nodes: Vec<usize>,
    /// Edge index used at each non-lazy step.
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSystem {
    pub n: usize,
    pub path_len: usize,
    pub walks_per_source: usize,
    pub lazy: bool,
    /// `paths[i * n + j]`, `None` when no sampled walk from `i` ended at `j`.
    pub paths: Vec<Option<CanonicalPath>>,
    /// Visits to each node over every sampled walk, positions `0..=path_len`.
    pub node_visits: Vec<u64>,
    /// Number of selected paths using each edge.
    pub edge_congestion: Vec<u64>,
    /// Fraction of ordered pairs `i != j` joined by a selected path.
    pub coverage: f64,
    pub unreachable: Vec<(usize, usize)>,
}

impl PathSystem {
    pub fn path(&self, i: usize, j: usize) -> Option<&CanonicalPath> {
        self.paths[i * self.n + j].as_ref()
    }

    /// `K`: the largest per-edge path count.
    pub fn congestion(&self) -> u64 {
        self.edge_congestion.iter().copied().max().unwrap_or(0)
    }

    pub fn max_node_visits(&self) -> u64 {
        self.node_visits.iter().copied().max().unwrap_or(0)
    }
}

struct SourceResult {
    paths: Vec<Option<CanonicalPath>>,
    visits: Vec<u64>,
}

fn sample_source(graph: &PhaseGraph, source: usize, params: &PathParams) -> SourceResult {
    let n = graph.n();
    let mut rng = stream(params.seed, source as u64);
    let mut paths: Vec<Option<CanonicalPath>> = vec![None; n];
    let mut visits = vec![0u64; n];
    let mut nodes = Vec::with_capacity(params.path_len + 1);
    let mut edges = Vec::with_capacity(params.path_len);
    for _ in 0..params.walks_per_source {
        nodes.clear();
        edges.clear();
        let mut at = source;
        nodes.push(at);
        visits[at] += 1;
        for _ in 0..params.path_len {
            let stay = params.lazy && rng.random_bool(0.5);
            if !stay {
                let inc = graph.incident(at);
                let e = inc[rng.random_range(0..inc.len())];
                at = graph.edges()[e].other(at);
                edges.push(e);
            }
            nodes.push(at);
            visits[at] += 1;
        }
        if paths[at].is_none() {
            paths[at] = Some(CanonicalPath {
                nodes: nodes.clone(),
                edges: edges.clone(),
            });
        }
    }
    SourceResult { paths, visits }
}

/// Samples `walks_per_source` walks of `path_len` steps from every node and
/// keeps, for each pair `(i, j)`, the first walk from `i` that ends at `j`.
/// Each step picks one of the incident edge slots uniformly; a self-loop
/// holds two slots.
pub fn build_path_system(graph: &PhaseGraph, params: &PathParams) -> Result<PathSystem> {
    let n = graph.n();
    if n < 2 {
        return Err(Error::InvalidParameter("path system needs N >= 2".into()));
    }
    if (0..n).any(|v| graph.degree(v) == 0) {
        return Err(Error::InvalidParameter(
            "every node needs an incident edge".into(),
        ));
    }
    let per_source: Vec<SourceResult> = (0..n)
        .into_par_iter()
        .map(|s| sample_source(graph, s, params))
        .collect();

    let mut node_visits = vec![0u64; n];
    let mut edge_congestion = vec![0u64; graph.edges().len()];
    let mut paths = Vec::with_capacity(n * n);
    let mut unreachable = Vec::new();
    let mut seen_edge = vec![usize::MAX; graph.edges().len()];
    for (i, res) in per_source.into_iter().enumerate() {
        for (v, c) in res.visits.into_iter().enumerate() {
            node_visits[v] += c;
        }
        for (j, p) in res.paths.into_iter().enumerate() {
            match &p {
                Some(path) => {
                    let tag = i * n + j;
                    for &e in &path.edges {
                        if seen_edge[e] != tag {
                            seen_edge[e] = tag;
                            edge_congestion[e] += 1;
                        }
                    }
                }
                None if i != j => unreachable.push((i, j)),
                None => {}
            }
            paths.push(p);
        }
    }
    let pairs = n * (n - 1);
    let coverage = (pairs - unreachable.len()) as f64 / pairs as f64;
    Ok(PathSystem {
        n,
        path_len: params.path_len,
        walks_per_source: params.walks_per_source,
        lazy: params.lazy,
        paths,
        node_visits,
        edge_congestion,
        coverage,
        unreachable,
    })
}

/// One-step transition matrix of the slot walk (optionally lazy).
pub fn transition_matrix(graph: &PhaseGraph, lazy: bool) -> DMatrix<f64> {
    let n = graph.n();
    let mut p = DMatrix::zeros(n, n);
    for v in 0..n {
        let deg = graph.degree(v) as f64;
        for &e in graph.incident(v) {
            p[(v, graph.edges()[e].other(v))] += 1.0 / deg;
        }
    }
    if lazy {
        p = (p + DMatrix::identity(n, n)) * 0.5;
    }
    p
}

pub fn transition_power(p: &DMatrix<f64>, steps: usize) -> DMatrix<f64> {
    let mut result = DMatrix::identity(p.nrows(), p.ncols());
    let mut base = p.clone();
    let mut e = steps;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Largest `|eigenvalue|` of the walk other than the trivial eigenvalue 1,
/// computed on the symmetrized matrix `D^{1/2} P D^{-1/2}`.
pub fn second_largest_abs_eigenvalue(graph: &PhaseGraph, lazy: bool) -> f64 {
    let n = graph.n();
    let p = transition_matrix(graph, lazy);
    let sq: Vec<f64> = (0..n).map(|v| (graph.degree(v) as f64).sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |u, v| sq[u] * p[(u, v)] / sq[v]);
    let s = (&s + s.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev[1..].iter().map(|x| x.abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitReport {
    pub path_len: usize,
    pub min_hit: f64,
    pub min_pair: (usize, usize),
    pub threshold: f64,
    pub lambda_abs: f64,
    /// `lambda_abs^path_len <= 1/(2N)`: the gap is large enough for the
    /// hit bound to follow.
    pub premise_holds: bool,
    pub holds: bool,
}

/// Exact `min_{i,j} P^path_len(i, j)` against `1/(2N)`.
pub fn hit_probability_check(graph: &PhaseGraph, path_len: usize, lazy: bool) -> HitReport {
    let n = graph.n();
    let pk = transition_power(&transition_matrix(graph, lazy), path_len);
    let mut min_hit = f64::INFINITY;
    let mut min_pair = (0, 0);
    for i in 0..n {
        for j in 0..n {
            if pk[(i, j)] < min_hit {
                min_hit = pk[(i, j)];
                min_pair = (i, j);
            }
        }
    }
    let threshold = 1.0 / (2.0 * n as f64);
    let lambda_abs = second_largest_abs_eigenvalue(graph, lazy);
    HitReport {
        path_len,
        min_hit,
        min_pair,
        threshold,
        lambda_abs,
        premise_holds: lambda_abs.powi(path_len as i32) <= threshold,
        holds: min_hit >= threshold,
    }
}

/// `max_u |sum_i P^l(i, u) - sum_i P^l(u, i)|` over `l = 1..=steps`.
pub fn symmetric_identity_deviation(graph: &PhaseGraph, steps: usize, lazy: bool) -> f64 {
    let p = transition_matrix(graph, lazy);
    let n = graph.n();
    let mut pl = DMatrix::identity(n, n);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        pl = &pl * &p;
        for u in 0..n {
            let col: f64 = pl.column(u).sum();
            let row: f64 = pl.row(u).sum();
            worst = worst.max((col - row).abs());
        }
    }
    worst
}

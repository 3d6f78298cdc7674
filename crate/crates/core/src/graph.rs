//! Network state: the ring, the red and blue pointer permutations, and the
//! 4-regular multigraph that one colour's pointers walk on during a phase.
//!
//! Nodes are 0-based in memory and 1-based in every text format.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Blue,
}

impl Color {
    pub fn other(self) -> Color {
        match self {
            Color::Red => Color::Blue,
            Color::Blue => Color::Red,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Blue => "blue",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Color {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "red" => Ok(Color::Red),
            "blue" => Ok(Color::Blue),
            other => Err(Error::InvalidParameter(format!("unknown color `{other}`"))),
        }
    }
}

/// Full network state: node count plus both pointer permutations.
///
/// `red[i]` is the destination of the red pointer issued from node `i`, and
/// likewise for `blue`. Both arrays are permutations of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointerConfig {
    n: usize,
    red: Vec<usize>,
    blue: Vec<usize>,
}

impl PointerConfig {
    pub fn new(red: Vec<usize>, blue: Vec<usize>) -> Result<Self> {
        let n = red.len();
        if n < 3 {
            return Err(Error::InvalidConfig(format!(
                "need at least 3 nodes, got {n}"
            )));
        }
        if blue.len() != n {
            return Err(Error::InvalidConfig(format!(
                "red has {n} entries but blue has {}",
                blue.len()
            )));
        }
        check_bijection(&red, Color::Red)?;
        check_bijection(&blue, Color::Blue)?;
        Ok(PointerConfig { n, red, blue })
    }

    /// Both colours set to the identity permutation (every pointer is a self-loop).
    pub fn identity(n: usize) -> Result<Self> {
        Self::new((0..n).collect(), (0..n).collect())
    }

    /// Independent uniform permutations for both colours.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let mut red: Vec<usize> = (0..n).collect();
        let mut blue: Vec<usize> = (0..n).collect();
        red.shuffle(rng);
        blue.shuffle(rng);
        Self::new(red, blue)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn red(&self) -> &[usize] {
        &self.red
    }

    pub fn blue(&self) -> &[usize] {
        &self.blue
    }

    pub fn pointers(&self, color: Color) -> &[usize] {
        match color {
            Color::Red => &self.red,
            Color::Blue => &self.blue,
        }
    }

    /// Replaces one colour's permutation, re-validating it.
    pub fn with_pointers(&self, color: Color, pointers: Vec<usize>) -> Result<Self> {
        match color {
            Color::Red => Self::new(pointers, self.blue.clone()),
            Color::Blue => Self::new(self.red.clone(), pointers),
        }
    }

    pub(crate) fn pointers_mut_unchecked(&mut self, color: Color) -> &mut Vec<usize> {
        match color {
            Color::Red => &mut self.red,
            Color::Blue => &mut self.blue,
        }
    }

    /// Serializes to the line-oriented text format: `N <n>`, then one
    /// `red i j` line per node, then one `blue i j` line per node, 1-based,
    /// in ascending source order.
    pub fn to_text(&self) -> String {
        let mut out = format!("N {}\n", self.n);
        for (color, ptrs) in [(Color::Red, &self.red), (Color::Blue, &self.blue)] {
            for (i, &j) in ptrs.iter().enumerate() {
                out.push_str(&format!("{} {} {}\n", color, i + 1, j + 1));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        match GraphFile::parse(text)? {
            GraphFile::Config(c) => Ok(c),
            GraphFile::Raw(_) => Err(Error::Parse {
                line: 1,
                msg: "expected red/blue pointer lines, found raw edges".into(),
            }),
        }
    }
}

fn check_bijection(ptrs: &[usize], color: Color) -> Result<()> {
    let n = ptrs.len();
    let mut seen = vec![false; n];
    for (i, &p) in ptrs.iter().enumerate() {
        if p >= n {
            return Err(Error::InvalidConfig(format!(
                "{color} pointer of node {} targets {} outside 1..={n}",
                i + 1,
                p + 1
            )));
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidConfig(format!(
                "node {} is the target of two {color} pointers",
                p + 1
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Cycle,
    Pointer,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }

    pub fn other(&self, x: usize) -> usize {
        if self.u == x {
            self.v
        } else {
            self.u
        }
    }
}

/// Undirected multigraph stored as an edge list plus per-node incidence
/// lists. A self-loop appears twice in its node's incidence list, so
/// `degree` counts it twice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGraph {
    n: usize,
    edges: Vec<Edge>,
    incidence: Vec<Vec<usize>>,
}

impl PhaseGraph {
    /// Cycle edges `(i, i+1 mod N)` followed by the pointer edges `(i, p_i)`
    /// of the chosen colour.
    pub fn from_config(config: &PointerConfig, color: Color) -> Self {
        let n = config.n();
        let mut edges = Vec::with_capacity(2 * n);
        for i in 0..n {
            edges.push(Edge {
                u: i,
                v: (i + 1) % n,
                kind: EdgeKind::Cycle,
            });
        }
        for (i, &p) in config.pointers(color).iter().enumerate() {
            edges.push(Edge {
                u: i,
                v: p,
                kind: EdgeKind::Pointer,
            });
        }
        Self::assemble(n, edges)
    }

    /// Arbitrary multigraph, used for falsification tests on graphs that are
    /// not cycle-plus-permutation.
    pub fn from_edges(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "graph needs at least one node".into(),
            ));
        }
        let mut edges = Vec::with_capacity(pairs.len());
        for &(u, v) in pairs {
            if u >= n || v >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({}, {}) has an endpoint outside 1..={n}",
                    u + 1,
                    v + 1
                )));
            }
            edges.push(Edge {
                u,
                v,
                kind: EdgeKind::Raw,
            });
        }
        Ok(Self::assemble(n, edges))
    }

    fn assemble(n: usize, edges: Vec<Edge>) -> Self {
        let mut incidence = vec![Vec::new(); n];
        for (idx, e) in edges.iter().enumerate() {
            incidence[e.u].push(idx);
            incidence[e.v].push(idx);
        }
        PhaseGraph {
            n,
            edges,
            incidence,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge indices incident to `v`; self-loops are listed twice.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incidence[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incidence[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.incidence.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_regular(&self, d: usize) -> bool {
        self.incidence.iter().all(|inc| inc.len() == d)
    }

    /// Symmetric multiplicity matrix of non-loop edges, row-major `n * n`.
    pub fn adjacency_counts(&self) -> Vec<u32> {
        let n = self.n;
        let mut a = vec![0u32; n * n];
        for e in self.edges.iter().filter(|e| !e.is_loop()) {
            a[e.u * n + e.v] += 1;
            a[e.v * n + e.u] += 1;
        }
        a
    }

    /// Non-loop neighbours of each node, with multiplicity.
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.n];
        for e in self.edges.iter().filter(|e| !e.is_loop()) {
            nb[e.u].push(e.v);
            nb[e.v].push(e.u);
        }
        nb
    }

    pub fn is_connected(&self) -> bool {
        let nb = self.neighbor_lists();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &nb[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.n
    }

    /// Number of edges with exactly one endpoint in `members`, counted with
    /// multiplicity. `members` must be a proper nonempty subset.
    pub fn edge_boundary(&self, members: &[usize]) -> Result<usize> {
        let inside = membership(self.n, members)?;
        Ok(self.boundary_of(&inside))
    }

    pub(crate) fn boundary_of(&self, inside: &[bool]) -> usize {
        self.edges
            .iter()
            .filter(|e| inside[e.u] != inside[e.v])
            .count()
    }

    /// Total boundary, pointer-edge boundary and arc count of a cut.
    pub fn cut(&self, members: &[usize]) -> Result<Cut> {
        let inside = membership(self.n, members)?;
        let mut boundary_total = 0;
        let mut boundary_pointer = 0;
        for e in &self.edges {
            if inside[e.u] != inside[e.v] {
                boundary_total += 1;
                if e.kind == EdgeKind::Pointer {
                    boundary_pointer += 1;
                }
            }
        }
        let mut sorted = members.to_vec();
        sorted.sort_unstable();
        Ok(Cut {
            members: sorted,
            boundary_total,
            boundary_pointer,
            arcs: arcs_of(&inside),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cut {
    pub members: Vec<usize>,
    pub boundary_total: usize,
    pub boundary_pointer: usize,
    pub arcs: usize,
}

/// Membership mask for a proper nonempty subset of `0..n`.
pub(crate) fn membership(n: usize, members: &[usize]) -> Result<Vec<bool>> {
    if members.is_empty() {
        return Err(Error::InvalidSubset("empty set".into()));
    }
    let mut inside = vec![false; n];
    for &v in members {
        if v >= n {
            return Err(Error::InvalidSubset(format!(
                "node {} outside 1..={n}",
                v + 1
            )));
        }
        if std::mem::replace(&mut inside[v], true) {
            return Err(Error::InvalidSubset(format!("node {} listed twice", v + 1)));
        }
    }
    if members.len() == n {
        return Err(Error::InvalidSubset("set contains every node".into()));
    }
    Ok(inside)
}

/// Number of maximal runs of cyclically consecutive members.
pub fn count_arcs(n: usize, members: &[usize]) -> Result<usize> {
    let inside = membership(n, members)?;
    Ok(arcs_of(&inside))
}

fn arcs_of(inside: &[bool]) -> usize {
    let n = inside.len();
    (0..n)
        .filter(|&i| inside[i] && !inside[(i + n - 1) % n])
        .count()
}

/// Contents of a graph file: either a pointer configuration or a raw edge
/// list (`N <n>` followed by `edge i j` lines).
#[derive(Debug, Clone, PartialEq)]
pub enum GraphFile {
    Config(PointerConfig),
    Raw(PhaseGraph),
}

impl GraphFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut red: Vec<Option<usize>> = Vec::new();
        let mut blue: Vec<Option<usize>> = Vec::new();
        let mut raw = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                line: lineno,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["N", count] => {
                    if n.is_some() {
                        return Err(err("duplicate N header"));
                    }
                    let count: usize = count.parse().map_err(|_| err("bad node count"))?;
                    n = Some(count);
                    red = vec![None; count];
                    blue = vec![None; count];
                }
                [tag @ ("red" | "blue" | "edge"), a, b] => {
                    let n = n.ok_or_else(|| err("missing N header"))?;
                    let parse_node = |s: &str| -> Result<usize> {
                        let v: usize = s.parse().map_err(|_| err("bad node index"))?;
                        if v == 0 || v > n {
                            return Err(err("node index outside 1..=N"));
                        }
                        Ok(v - 1)
                    };
                    let (i, j) = (parse_node(a)?, parse_node(b)?);
                    match *tag {
                        "edge" => raw.push((i, j)),
                        "red" => {
                            if red[i].replace(j).is_some() {
                                return Err(err("duplicate red pointer"));
                            }
                        }
                        _ => {
                            if blue[i].replace(j).is_some() {
                                return Err(err("duplicate blue pointer"));
                            }
                        }
                    }
                }
                _ => return Err(err("unrecognised line")),
            }
        }
        let n = n.ok_or(Error::Parse {
            line: 1,
            msg: "missing N header".into(),
        })?;
        let has_pointers = red.iter().chain(blue.iter()).any(Option::is_some);
        if !raw.is_empty() {
            if has_pointers {
                return Err(Error::Parse {
                    line: 1,
                    msg: "file mixes raw edges with pointer lines".into(),
                });
            }
            return Ok(GraphFile::Raw(PhaseGraph::from_edges(n, &raw)?));
        }
        let collect = |v: Vec<Option<usize>>, color: &str| -> Result<Vec<usize>> {
            v.into_iter()
                .enumerate()
                .map(|(i, p)| {
                    p.ok_or_else(|| Error::Parse {
                        line: 0,
                        msg: format!("missing {color} pointer for node {}", i + 1),
                    })
                })
                .collect()
        };
        Ok(GraphFile::Config(PointerConfig::new(
            collect(red, "red")?,
            collect(blue, "blue")?,
        )?))
    }

    /// The graph a phase would run on; `color` selects the fixed pointer
    /// colour for configurations and is ignored for raw graphs.
    pub fn phase_graph(&self, color: Color) -> PhaseGraph {
        match self {
            GraphFile::Config(c) => PhaseGraph::from_config(c, color),
            GraphFile::Raw(g) => g.clone(),
        }
    }
}

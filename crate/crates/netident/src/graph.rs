//! Undirected labeled graphs on n agents, their incidence and Laplacian
//! matrices, and enumerable graph families.
//!
//! Graphs are kept in canonical form: every edge stored as (i, j) with
//! i < j, the edge list sorted lexicographically, no duplicates, no self
//! loops. Two graphs compare equal iff their canonical forms match — there
//! is deliberately no isomorphism reduction, since agents are physically
//! labeled. Vertices are 0-based in the API; the text file format speaks
//! 1-based, matching how agents are usually numbered on a bench sheet.

use crate::exact::{Rat, RatMat};
use nalgebra::DMatrix;
use num_traits::Zero;
use sha2::{Digest, Sha256};
use std::fmt;
use thiserror::Error;

/// Default ceiling on how many graphs an enumeration may visit (2²²).
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 22;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph needs at least one vertex")]
    NoVertices,
    #[error("self loop at vertex {0}")]
    SelfLoop(usize),
    #[error("vertex {v} out of range for n={n}")]
    VertexOutOfRange { v: usize, n: usize },
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) not present")]
    MissingEdge(usize, usize),
    #[error("family on n={expected} given a graph with n={got}")]
    OrderMismatch { expected: usize, got: usize },
    #[error("family enumeration would visit {bound} graphs, over the cap of {cap}")]
    FamilyTooLarge { bound: u128, cap: u64 },
    #[error("not a Laplacian: {0}")]
    NotLaplacian(String),
    #[error("graph key has {got} bits, expected {expected}")]
    KeyLength { expected: usize, got: usize },
    #[error("cannot parse graph text: {0}")]
    Parse(String),
}

/// Canonical undirected graph on vertices {0, …, n−1}.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={};", self.n)?;
        for (i, j) in &self.edges {
            write!(f, " {}-{}", i + 1, j + 1)?;
        }
        write!(f, ")")
    }
}

/// Human-oriented one-liner: `n=3 edges 1-2 2-3`, or `n=3 no edges`.
impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={}", self.n)?;
        if self.edges.is_empty() {
            return write!(f, " no edges");
        }
        write!(f, " edges")?;
        for (i, j) in &self.edges {
            write!(f, " {}-{}", i + 1, j + 1)?;
        }
        Ok(())
    }
}

impl Graph {
    /// Build a graph from arbitrary (unordered) vertex pairs, canonicalizing
    /// as it goes. Rejects self loops, out-of-range vertices and duplicates.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Graph, GraphError> {
        if n == 0 {
            return Err(GraphError::NoVertices);
        }
        let mut canon: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            for v in [a, b] {
                if v >= n {
                    return Err(GraphError::VertexOutOfRange { v, n });
                }
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
        }
        Ok(Graph { n, edges: canon })
    }

    pub fn empty(n: usize) -> Graph {
        Graph::new(n, &[]).expect("empty graph is always valid")
    }

    pub fn complete(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        Graph::new(n, &edges).expect("complete graph is always valid")
    }

    pub fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|j| (j - 1, j)).collect();
        Graph::new(n, &edges).expect("path graph is always valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let e = (i.min(j), i.max(j));
        self.edges.binary_search(&e).is_ok()
    }

    /// Copy of this graph with one edge removed.
    pub fn without_edge(&self, i: usize, j: usize) -> Result<Graph, GraphError> {
        let e = (i.min(j), i.max(j));
        match self.edges.binary_search(&e) {
            Ok(pos) => {
                let mut edges = self.edges.clone();
                edges.remove(pos);
                Ok(Graph { n: self.n, edges })
            }
            Err(_) => Err(GraphError::MissingEdge(e.0, e.1)),
        }
    }

    /// Union-find connectivity. A single vertex counts as connected.
    pub fn is_connected(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]]; // path halving
                v = parent[v];
            }
            v
        }
        for &(i, j) in &self.edges {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
            }
        }
        let root = find(&mut parent, 0);
        (1..self.n).all(|v| find(&mut parent, v) == root)
    }

    /// Bit string over the canonical pair order; '1' where the pair is an edge.
    pub fn key_bits(&self) -> String {
        let mut bits = vec![b'0'; pair_count(self.n)];
        for &(i, j) in &self.edges {
            bits[pair_index(self.n, i, j)] = b'1';
        }
        String::from_utf8(bits).unwrap()
    }

    pub fn from_key_bits(n: usize, bits: &str) -> Result<Graph, GraphError> {
        if bits.len() != pair_count(n) {
            return Err(GraphError::KeyLength { expected: pair_count(n), got: bits.len() });
        }
        let mut edges = Vec::new();
        for (t, c) in bits.bytes().enumerate() {
            match c {
                b'1' => edges.push(pair_at(n, t)),
                b'0' => {}
                other => {
                    return Err(GraphError::Parse(format!(
                        "graph key must be 0/1, found {:?}",
                        other as char
                    )))
                }
            }
        }
        Graph::new(n, &edges)
    }

    /// Signed incidence matrix with the canonical orientation: for an edge
    /// (i, j) with i < j the column has +1 at i and −1 at j.
    pub fn incidence(&self) -> IncidenceMatrix {
        let m = self.edges.len();
        let mut data = vec![0i8; self.n * m];
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            data[i * m + e] = 1;
            data[j * m + e] = -1;
        }
        IncidenceMatrix { n: self.n, m, data }
    }

    /// Graph text format: `n=<int>` then one 1-based `i j` line per edge.
    pub fn to_text(&self) -> String {
        let mut s = format!("n={}\n", self.n);
        for &(i, j) in &self.edges {
            s.push_str(&format!("{} {}\n", i + 1, j + 1));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Graph, GraphError> {
        let graphs = parse_graph_list(text)?;
        match graphs.len() {
            1 => Ok(graphs.into_iter().next().unwrap()),
            k => Err(GraphError::Parse(format!("expected exactly one graph, found {k}"))),
        }
    }
}

/// Parse a concatenation of graph blocks, each starting with an `n=` line.
/// Blank lines and `#` comments are skipped. Edges are 1-based in the file.
pub fn parse_graph_list(text: &str) -> Result<Vec<Graph>, GraphError> {
    let mut graphs = Vec::new();
    let mut current: Option<(usize, Vec<(usize, usize)>)> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("n=") {
            if let Some((n, edges)) = current.take() {
                graphs.push(Graph::new(n, &edges)?);
            }
            let n: usize = rest
                .trim()
                .parse()
                .map_err(|_| GraphError::Parse(format!("line {}: bad n `{line}`", lineno + 1)))?;
            current = Some((n, Vec::new()));
            continue;
        }
        let Some((_, edges)) = current.as_mut() else {
            return Err(GraphError::Parse(format!(
                "line {}: edge before any n= header",
                lineno + 1
            )));
        };
        let mut it = line.split_whitespace();
        let (a, b) = match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(GraphError::Parse(format!(
                    "line {}: expected `i j`, got `{line}`",
                    lineno + 1
                )))
            }
        };
        let parse_v = |s: &str| -> Result<usize, GraphError> {
            let v: usize = s
                .parse()
                .map_err(|_| GraphError::Parse(format!("line {}: bad vertex `{s}`", lineno + 1)))?;
            if v == 0 {
                return Err(GraphError::Parse(format!(
                    "line {}: vertices are 1-based, got 0",
                    lineno + 1
                )));
            }
            Ok(v - 1)
        };
        edges.push((parse_v(a)?, parse_v(b)?));
    }
    if let Some((n, edges)) = current.take() {
        graphs.push(Graph::new(n, &edges)?);
    }
    if graphs.is_empty() {
        return Err(GraphError::Parse("no graph blocks found".into()));
    }
    Ok(graphs)
}

/// Number of unordered vertex pairs on n vertices.
pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Position of pair (i, j), i < j, in the canonical order
/// (0,1), (0,2), …, (0,n−1), (1,2), ….
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_at(n: usize, t: usize) -> (usize, usize) {
    debug_assert!(t < pair_count(n));
    let mut i = 0;
    let mut base = 0;
    loop {
        let row = n - 1 - i;
        if t < base + row {
            return (i, i + 1 + t - base);
        }
        base += row;
        i += 1;
    }
}

/// n×|E| incidence matrix with entries in {−1, 0, +1}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceMatrix {
    n: usize,
    m: usize,
    data: Vec<i8>,
}

impl IncidenceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn entry(&self, v: usize, e: usize) -> i8 {
        self.data[v * self.m + e]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.m, |i, e| self.entry(i, e) as f64)
    }

    pub fn to_ratmat(&self) -> RatMat {
        let mut m = RatMat::zeros(self.n, self.m);
        for i in 0..self.n {
            for e in 0..self.m {
                m[(i, e)] = Rat::from_integer(self.entry(i, e).into());
            }
        }
        m
    }
}

/// Weighted Laplacian ℰ diag(b) ℰᵀ with one weight per edge, f64 entries.
pub fn laplacian_f64(g: &Graph, weights: &[f64]) -> DMatrix<f64> {
    assert_eq!(weights.len(), g.edge_count(), "one weight per edge");
    let n = g.n();
    let mut l = DMatrix::zeros(n, n);
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        let b = weights[e];
        l[(i, i)] += b;
        l[(j, j)] += b;
        l[(i, j)] -= b;
        l[(j, i)] -= b;
    }
    l
}

/// Weighted Laplacian with exact rational entries.
pub fn laplacian_rat(g: &Graph, weights: &[Rat]) -> RatMat {
    assert_eq!(weights.len(), g.edge_count(), "one weight per edge");
    let n = g.n();
    let mut l = RatMat::zeros(n, n);
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        let b = &weights[e];
        l[(i, i)] += b;
        l[(j, j)] += b;
        l[(i, j)] -= b;
        l[(j, i)] -= b;
    }
    l
}

/// Read a graph and positive edge weights back out of an exact Laplacian.
/// An edge exists wherever an off-diagonal entry is nonzero.
pub fn graph_from_laplacian_rat(l: &RatMat) -> Result<(Graph, Vec<Rat>), GraphError> {
    if l.rows() != l.cols() || l.rows() == 0 {
        return Err(GraphError::NotLaplacian(format!("{}x{} not square", l.rows(), l.cols())));
    }
    let n = l.rows();
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if l[(i, j)] != l[(j, i)] {
                return Err(GraphError::NotLaplacian(format!(
                    "asymmetric at ({i}, {j})"
                )));
            }
            if l[(i, j)].is_zero() {
                continue;
            }
            let w = -&l[(i, j)];
            if w <= Rat::zero() {
                return Err(GraphError::NotLaplacian(format!(
                    "positive off-diagonal at ({i}, {j})"
                )));
            }
            edges.push((i, j));
            weights.push(w);
        }
    }
    // Row sums must vanish for a pure diffusive coupling matrix.
    for i in 0..n {
        let mut sum = Rat::zero();
        for j in 0..n {
            sum += &l[(i, j)];
        }
        if !sum.is_zero() {
            return Err(GraphError::NotLaplacian(format!("row {i} sums to {sum}")));
        }
    }
    Ok((Graph::new(n, &edges)?, weights))
}

/// f64 variant of [`graph_from_laplacian_rat`]: entries within `tol` of zero
/// are treated as absent edges, asymmetry or negative weights beyond `tol`
/// are rejected.
pub fn graph_from_laplacian_f64(
    l: &DMatrix<f64>,
    tol: f64,
) -> Result<(Graph, Vec<f64>), GraphError> {
    if l.nrows() != l.ncols() || l.nrows() == 0 {
        return Err(GraphError::NotLaplacian(format!("{}x{} not square", l.nrows(), l.ncols())));
    }
    let n = l.nrows();
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if (l[(i, j)] - l[(j, i)]).abs() > tol {
                return Err(GraphError::NotLaplacian(format!("asymmetric at ({i}, {j})")));
            }
            let w = -0.5 * (l[(i, j)] + l[(j, i)]);
            if w.abs() <= tol {
                continue;
            }
            if w < 0.0 {
                return Err(GraphError::NotLaplacian(format!(
                    "positive off-diagonal at ({i}, {j})"
                )));
            }
            edges.push((i, j));
            weights.push(w);
        }
    }
    Ok((Graph::new(n, &edges)?, weights))
}

/// Which graphs on n vertices a search ranges over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FamilyFilter {
    /// Every labeled graph (2^C(n,2) of them).
    All,
    /// Every connected labeled graph.
    ConnectedOnly,
    /// Every spanning subgraph of a given host graph.
    SubgraphsOf(Graph),
    /// An explicit, deduplicated, canonically sorted list.
    Explicit(Vec<Graph>),
}

/// A family of candidate graphs with a deterministic enumeration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphFamily {
    n: usize,
    filter: FamilyFilter,
}

impl GraphFamily {
    pub fn all(n: usize) -> GraphFamily {
        GraphFamily { n, filter: FamilyFilter::All }
    }

    pub fn connected(n: usize) -> GraphFamily {
        GraphFamily { n, filter: FamilyFilter::ConnectedOnly }
    }

    pub fn subgraphs_of(host: Graph) -> GraphFamily {
        GraphFamily { n: host.n(), filter: FamilyFilter::SubgraphsOf(host) }
    }

    pub fn explicit(graphs: Vec<Graph>) -> Result<GraphFamily, GraphError> {
        let Some(first) = graphs.first() else {
            return Err(GraphError::Parse("explicit family must be non-empty".into()));
        };
        let n = first.n();
        for g in &graphs {
            if g.n() != n {
                return Err(GraphError::OrderMismatch { expected: n, got: g.n() });
            }
        }
        let mut sorted = graphs;
        sorted.sort();
        sorted.dedup();
        Ok(GraphFamily { n, filter: FamilyFilter::Explicit(sorted) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn filter(&self) -> &FamilyFilter {
        &self.filter
    }

    /// Upper bound on graphs the enumeration must visit (before any
    /// connectivity filtering).
    pub fn enumeration_bound(&self) -> u128 {
        match &self.filter {
            FamilyFilter::All | FamilyFilter::ConnectedOnly => {
                let m = pair_count(self.n);
                if m >= 127 {
                    u128::MAX
                } else {
                    1u128 << m
                }
            }
            FamilyFilter::SubgraphsOf(host) => {
                let m = host.edge_count();
                if m >= 127 {
                    u128::MAX
                } else {
                    1u128 << m
                }
            }
            FamilyFilter::Explicit(graphs) => graphs.len() as u128,
        }
    }

    /// Materialize the family in its deterministic order: ascending bitmask
    /// over canonical pairs (or host edges), or the sorted explicit list.
    /// Refuses outright if the enumeration would exceed `cap` — there is no
    /// silent truncation.
    pub fn members(&self, cap: u64) -> Result<Vec<Graph>, GraphError> {
        let bound = self.enumeration_bound();
        if bound > cap as u128 {
            return Err(GraphError::FamilyTooLarge { bound, cap });
        }
        match &self.filter {
            FamilyFilter::All | FamilyFilter::ConnectedOnly => {
                let connected_only = matches!(self.filter, FamilyFilter::ConnectedOnly);
                let m = pair_count(self.n);
                let mut out = Vec::new();
                for mask in 0u64..(1u64 << m) {
                    let edges: Vec<_> =
                        (0..m).filter(|t| mask >> t & 1 == 1).map(|t| pair_at(self.n, t)).collect();
                    let g = Graph::new(self.n, &edges).expect("mask edges are canonical");
                    if !connected_only || g.is_connected() {
                        out.push(g);
                    }
                }
                Ok(out)
            }
            FamilyFilter::SubgraphsOf(host) => {
                let m = host.edge_count();
                let mut out = Vec::with_capacity(1 << m);
                for mask in 0u64..(1u64 << m) {
                    let edges: Vec<_> = host
                        .edges()
                        .iter()
                        .enumerate()
                        .filter(|(t, _)| mask >> t & 1 == 1)
                        .map(|(_, &e)| e)
                        .collect();
                    out.push(Graph::new(self.n, &edges).expect("host edges are canonical"));
                }
                Ok(out)
            }
            FamilyFilter::Explicit(graphs) => Ok(graphs.clone()),
        }
    }

    /// Short self-describing string for file headers.
    pub fn spec_string(&self) -> String {
        match &self.filter {
            FamilyFilter::All => format!("all n={}", self.n),
            FamilyFilter::ConnectedOnly => format!("connected n={}", self.n),
            FamilyFilter::SubgraphsOf(host) => {
                format!("subgraphs n={} host={}", self.n, host.key_bits())
            }
            FamilyFilter::Explicit(graphs) => {
                let mut hasher = Sha256::new();
                for g in graphs {
                    hasher.update(g.key_bits().as_bytes());
                    hasher.update(b"\n");
                }
                let digest = hasher.finalize();
                format!("explicit n={} count={} hash={:x}", self.n, graphs.len(), digest)
            }
        }
    }
}

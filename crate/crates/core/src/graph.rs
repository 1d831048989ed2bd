//! Undirected attributed population graphs.
//!
//! Edges live in a hash set keyed by the canonical pair `(i, j)` with `i < j`
//! for constant-time lookup, plus per-node neighbor lists for walks.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::hash::{BuildHasherDefault, Hasher};
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::Serialize;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("infeasible mean degree {mean_degree} for {n} nodes")]
    InfeasibleDegree { n: usize, mean_degree: f64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("unknown statistic `{0}`")]
    UnknownStatistic(String),
    #[error("attribute `{0}` is not defined on this graph")]
    MissingAttribute(String),
    #[error("node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("edge list parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Multiplicative hasher for packed `u64` node pairs.
#[derive(Default, Clone, Copy)]
pub struct PairHasher(u64);

impl Hasher for PairHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0.rotate_left(8) ^ u64::from(b)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
    }
    fn write_u64(&mut self, x: u64) {
        let z = (x ^ (x >> 29)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        self.0 = z ^ (z >> 32);
    }
}

type EdgeSet = HashSet<u64, BuildHasherDefault<PairHasher>>;

#[inline]
fn key(i: usize, j: usize) -> u64 {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    ((a as u64) << 32) | b as u64
}

/// A categorical node attribute with interned levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeAttribute {
    pub levels: Vec<String>,
    pub values: Vec<u16>,
}

impl NodeAttribute {
    pub fn label(&self, node: usize) -> &str {
        &self.levels[self.values[node] as usize]
    }

    pub fn level_index(&self, level: &str) -> Option<u16> {
        self.levels.iter().position(|l| l == level).map(|i| i as u16)
    }
}

#[derive(Debug, Clone)]
pub struct AttributedGraph {
    n: usize,
    edges: EdgeSet,
    neighbors: Vec<Vec<u32>>,
    attributes: BTreeMap<String, NodeAttribute>,
}

impl PartialEq for AttributedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges && self.attributes == other.attributes
    }
}

impl AttributedGraph {
    pub fn empty(n: usize) -> Self {
        AttributedGraph {
            n,
            edges: EdgeSet::default(),
            neighbors: vec![Vec::new(); n],
            attributes: BTreeMap::new(),
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        let mut g = Self::empty(n);
        for (i, j) in edges {
            for node in [i, j] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if i != j {
                g.add_edge(i, j);
            }
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&key(i, j))
    }

    /// Adds `{i, j}`; returns false if it was already present or `i == j`.
    pub fn add_edge(&mut self, i: usize, j: usize) -> bool {
        if i == j || !self.edges.insert(key(i, j)) {
            return false;
        }
        self.neighbors[i].push(j as u32);
        self.neighbors[j].push(i as u32);
        true
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) -> bool {
        if !self.edges.remove(&key(i, j)) {
            return false;
        }
        for (a, b) in [(i, j), (j, i)] {
            let list = &mut self.neighbors[a];
            let pos = list.iter().position(|&x| x as usize == b).expect("neighbor lists in sync");
            list.swap_remove(pos);
        }
        true
    }

    /// Flips the dyad; returns whether the edge is present afterwards.
    pub fn toggle_edge(&mut self, i: usize, j: usize) -> bool {
        if self.remove_edge(i, j) {
            false
        } else {
            self.add_edge(i, j)
        }
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Canonical `(i, j)`, `i < j`, sorted.
    pub fn edges_sorted(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&k| ((k >> 32) as usize, (k & 0xFFFF_FFFF) as usize))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            2.0 * self.edge_count() as f64 / self.n as f64
        }
    }

    pub fn density(&self) -> f64 {
        let dyads = self.n * self.n.saturating_sub(1) / 2;
        if dyads == 0 {
            0.0
        } else {
            self.edge_count() as f64 / dyads as f64
        }
    }

    pub fn set_attribute(&mut self, name: impl Into<String>, attr: NodeAttribute) {
        assert_eq!(attr.values.len(), self.n, "attribute length must equal node count");
        self.attributes.insert(name.into(), attr);
    }

    pub fn attribute(&self, name: &str) -> Option<&NodeAttribute> {
        self.attributes.get(name)
    }

    pub fn attributes(&self) -> &BTreeMap<String, NodeAttribute> {
        &self.attributes
    }

    pub fn label(&self, name: &str, node: usize) -> Option<&str> {
        self.attributes.get(name).map(|a| a.label(node))
    }

    /// Connected component sizes, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut size = 0;
            while let Some(u) = queue.pop_front() {
                size += 1;
                for &v in &self.neighbors[u] {
                    if !seen[v as usize] {
                        seen[v as usize] = true;
                        queue.push_back(v as usize);
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}

/// Bernoulli random graph: every dyad present independently with
/// probability `mean_degree / (n - 1)`.
pub fn erdos_renyi(n: usize, mean_degree: f64, seed: u64) -> Result<AttributedGraph, GraphError> {
    let max = n.saturating_sub(1) as f64;
    if !(mean_degree >= 0.0 && mean_degree <= max) {
        return Err(GraphError::InfeasibleDegree { n, mean_degree });
    }
    let mut g = AttributedGraph::empty(n);
    if n < 2 || mean_degree == 0.0 {
        return Ok(g);
    }
    let p = mean_degree / max;
    let mut rng = rng::rng(seed);
    if p >= 1.0 {
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j);
            }
        }
        return Ok(g);
    }
    // geometric skipping over the dyads in row order
    let log_q = (1.0 - p).ln();
    let (mut v, mut w): (usize, i64) = (1, -1);
    while v < n {
        let r: f64 = rng.random();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            g.add_edge(w as usize, v);
        }
    }
    Ok(g)
}

fn check_distribution(distribution: &[(String, f64)]) -> Result<(), GraphError> {
    if distribution.is_empty() {
        return Err(GraphError::InvalidDistribution("no categories".into()));
    }
    if let Some((c, p)) = distribution.iter().find(|(_, p)| !(*p >= 0.0 && p.is_finite())) {
        return Err(GraphError::InvalidDistribution(format!("probability {p} for `{c}`")));
    }
    let total: f64 = distribution.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(GraphError::InvalidDistribution(format!("probabilities sum to {total}")));
    }
    let mut names: Vec<&str> = distribution.iter().map(|(c, _)| c.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    if names.len() != distribution.len() {
        return Err(GraphError::InvalidDistribution("repeated category".into()));
    }
    Ok(())
}

/// i.i.d. categorical labels drawn from `distribution`.
pub fn assign_attributes(
    mut g: AttributedGraph,
    attr: &str,
    distribution: &[(String, f64)],
    seed: u64,
) -> Result<AttributedGraph, GraphError> {
    check_distribution(distribution)?;
    let mut rng = rng::rng(seed);
    let last = distribution.len() - 1;
    let values = (0..g.n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, (_, p)) in distribution.iter().enumerate() {
                acc += p;
                if u < acc {
                    return k as u16;
                }
            }
            last as u16
        })
        .collect();
    let levels = distribution.iter().map(|(c, _)| c.clone()).collect();
    g.set_attribute(attr, NodeAttribute { levels, values });
    Ok(g)
}

/// Labels with exact quotas (largest remainder rounding), randomly placed.
pub fn assign_attributes_exact(
    mut g: AttributedGraph,
    attr: &str,
    distribution: &[(String, f64)],
    seed: u64,
) -> Result<AttributedGraph, GraphError> {
    check_distribution(distribution)?;
    let n = g.n;
    let raw: Vec<f64> = distribution.iter().map(|(_, p)| p * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut short = n - counts.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if short == 0 {
            break;
        }
        counts[k] += 1;
        short -= 1;
    }
    let mut values: Vec<u16> = counts
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat_n(k as u16, c))
        .collect();
    values.shuffle(&mut rng::rng(seed));
    let levels = distribution.iter().map(|(c, _)| c.clone()).collect();
    g.set_attribute(attr, NodeAttribute { levels, values });
    Ok(g)
}

/// Sufficient-statistic vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum StatTerm {
    Edges,
    /// Edges whose endpoints share the attribute value.
    NodeMatch(String),
}

impl fmt::Display for StatTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatTerm::Edges => f.write_str("edges"),
            StatTerm::NodeMatch(a) => write!(f, "nodematch({a})"),
        }
    }
}

impl FromStr for StatTerm {
    type Err = GraphError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "edges" {
            return Ok(StatTerm::Edges);
        }
        s.strip_prefix("nodematch(")
            .and_then(|rest| rest.strip_suffix(')'))
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(|a| StatTerm::NodeMatch(a.to_string()))
            .ok_or_else(|| GraphError::UnknownStatistic(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStatistics {
    pub edges: u64,
    pub nodematch_counts: BTreeMap<String, u64>,
    pub mean_degree: f64,
    pub degree_histogram: Vec<u64>,
}

impl GraphStatistics {
    /// Values aligned to `terms`.
    pub fn vector(&self, terms: &[StatTerm]) -> Vec<f64> {
        terms
            .iter()
            .map(|t| match t {
                StatTerm::Edges => self.edges as f64,
                StatTerm::NodeMatch(a) => self.nodematch_counts.get(a).copied().unwrap_or(0) as f64,
            })
            .collect()
    }
}

pub fn compute_statistics(g: &AttributedGraph, terms: &[StatTerm]) -> Result<GraphStatistics, GraphError> {
    let mut nodematch_counts = BTreeMap::new();
    for t in terms {
        if let StatTerm::NodeMatch(a) = t {
            let attr = g.attribute(a).ok_or_else(|| GraphError::MissingAttribute(a.clone()))?;
            let count = g
                .edges
                .iter()
                .filter(|&&k| {
                    let (i, j) = ((k >> 32) as usize, (k & 0xFFFF_FFFF) as usize);
                    attr.values[i] == attr.values[j]
                })
                .count();
            nodematch_counts.insert(a.clone(), count as u64);
        }
    }
    let degrees = g.degrees();
    let max = degrees.iter().copied().max().unwrap_or(0);
    let mut degree_histogram = vec![0u64; max + 1];
    for d in degrees {
        degree_histogram[d] += 1;
    }
    Ok(GraphStatistics {
        edges: g.edge_count() as u64,
        nodematch_counts,
        mean_degree: g.mean_degree(),
        degree_histogram,
    })
}

/// Change statistics for dyad toggles, with attribute columns resolved once.
#[derive(Debug, Clone)]
pub struct ChangeStats {
    terms: Vec<Option<Vec<u16>>>,
}

impl ChangeStats {
    pub fn new(g: &AttributedGraph, terms: &[StatTerm]) -> Result<Self, GraphError> {
        let terms = terms
            .iter()
            .map(|t| match t {
                StatTerm::Edges => Ok(None),
                StatTerm::NodeMatch(a) => g
                    .attribute(a)
                    .map(|attr| Some(attr.values.clone()))
                    .ok_or_else(|| GraphError::MissingAttribute(a.clone())),
            })
            .collect::<Result<_, _>>()?;
        Ok(ChangeStats { terms })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Writes `s(g ⊕ {i,j}) − s(g)` into `out`.
    #[inline]
    pub fn delta(&self, g: &AttributedGraph, i: usize, j: usize, out: &mut [f64]) {
        let sign = if g.has_edge(i, j) { -1.0 } else { 1.0 };
        for (o, t) in out.iter_mut().zip(&self.terms) {
            *o = match t {
                None => sign,
                Some(values) if values[i] == values[j] => sign,
                Some(_) => 0.0,
            };
        }
    }
}

pub fn toggle_edge_delta(
    g: &AttributedGraph,
    i: usize,
    j: usize,
    terms: &[StatTerm],
) -> Result<Vec<f64>, GraphError> {
    let cs = ChangeStats::new(g, terms)?;
    let mut out = vec![0.0; cs.len()];
    cs.delta(g, i, j, &mut out);
    Ok(out)
}

/// Writes `n=<count>` followed by one `i j` line per edge.
pub fn write_edge_list<W: Write>(g: &AttributedGraph, mut w: W) -> std::io::Result<()> {
    writeln!(w, "n={}", g.n)?;
    for (i, j) in g.edges_sorted() {
        writeln!(w, "{i} {j}")?;
    }
    Ok(())
}

pub fn read_edge_list<R: BufRead>(r: R) -> Result<AttributedGraph, GraphError> {
    let mut lines = r.lines().enumerate();
    let parse_err = |line: usize, message: String| GraphError::Parse { line: line + 1, message };
    let n = loop {
        let Some((ln, line)) = lines.next() else {
            return Err(parse_err(0, "missing `n=` header".into()));
        };
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        break line
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| parse_err(ln, format!("expected `n=<count>`, found `{line}`")))?;
    };
    let mut g = AttributedGraph::empty(n);
    for (ln, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace().map(str::parse::<usize>);
        match (parts.next(), parts.next(), parts.next()) {
            (Some(Ok(i)), Some(Ok(j)), None) if i < n && j < n && i != j => {
                g.add_edge(i, j);
            }
            _ => return Err(parse_err(ln, format!("bad edge `{line}`"))),
        }
    }
    Ok(g)
}

/// Sidecar CSV `node,attr,value`, sorted by attribute then node.
pub fn write_attributes<W: Write>(g: &AttributedGraph, w: W) -> Result<(), GraphError> {
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| GraphError::Io(e.into());
    out.write_record(["node", "attr", "value"]).map_err(csv_err)?;
    for (name, attr) in &g.attributes {
        for node in 0..g.n {
            out.write_record([node.to_string().as_str(), name, attr.label(node)])
                .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a sidecar; levels are interned in order of first appearance.
pub fn read_attributes<R: std::io::Read>(g: &mut AttributedGraph, r: R) -> Result<(), GraphError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut cols: BTreeMap<String, (Vec<String>, Vec<Option<u16>>)> = BTreeMap::new();
    for (ln, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| GraphError::Parse { line: ln + 2, message: e.to_string() })?;
        let bad = |m: &str| GraphError::Parse { line: ln + 2, message: m.to_string() };
        if rec.len() != 3 {
            return Err(bad("expected node,attr,value"));
        }
        let node: usize = rec[0].parse().map_err(|_| bad("bad node index"))?;
        if node >= g.n {
            return Err(GraphError::NodeOutOfRange { node, n: g.n });
        }
        let (levels, values) = cols
            .entry(rec[1].to_string())
            .or_insert_with(|| (Vec::new(), vec![None; g.n]));
        let idx = match levels.iter().position(|l| l == &rec[2]) {
            Some(i) => i,
            None => {
                levels.push(rec[2].to_string());
                levels.len() - 1
            }
        };
        values[node] = Some(idx as u16);
    }
    for (name, (levels, values)) in cols {
        let values = values
            .into_iter()
            .enumerate()
            .map(|(node, v)| {
                v.ok_or_else(|| GraphError::Parse {
                    line: 0,
                    message: format!("attribute `{name}` missing for node {node}"),
                })
            })
            .collect::<Result<_, _>>()?;
        g.set_attribute(name, NodeAttribute { levels, values });
    }
    Ok(())
}

//! Referral-tree structure: depths, out-degree histograms and rooted-tree
//! isomorphism classes.
//!
//! Canonical codes follow the AHU scheme. A node's code is `(` followed by
//! its children's codes in sorted order and `)`, so a single node is `()`.
//! Labeled codes put the escaped node label and a `|` right after the opening
//! parenthesis and order children by `(label, code)`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::rds::ReferralForest;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("label attribute `{attribute}` missing for nodes {nodes:?}")]
    MissingLabel { attribute: String, nodes: Vec<String> },
    #[error("not a rooted tree: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootedTree {
    pub root: usize,
    pub children: Vec<Vec<usize>>,
    pub labels: Option<Vec<String>>,
    /// Source ids, when the tree was cut from a forest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<String>>,
}

impl RootedTree {
    /// Tree from parent links; exactly one entry must be `None`.
    pub fn from_parents(parent: &[Option<usize>]) -> Result<Self, TreeError> {
        let n = parent.len();
        let mut children = vec![Vec::new(); n];
        let mut root = None;
        for (i, p) in parent.iter().enumerate() {
            match p {
                Some(p) if *p < n && *p != i => children[*p].push(i),
                Some(p) => return Err(TreeError::Invalid(format!("bad parent {p} for node {i}"))),
                None if root.is_some() => return Err(TreeError::Invalid("more than one root".into())),
                None => root = Some(i),
            }
        }
        let root = root.ok_or_else(|| TreeError::Invalid("no root".into()))?;
        let tree = RootedTree {
            root,
            children,
            labels: None,
            ids: None,
        };
        if tree.bfs_order().len() != n {
            return Err(TreeError::Invalid("cycle or disconnected node".into()));
        }
        Ok(tree)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.children.len());
        self.labels = Some(labels);
        self
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn bfs_order(&self) -> Vec<usize> {
        let mut order = vec![self.root];
        let mut k = 0;
        while k < order.len() {
            order.extend_from_slice(&self.children[order[k]]);
            k += 1;
        }
        order
    }

    /// Depth of the deepest node (0 for a single node).
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.len()];
        let mut max = 0;
        for u in self.bfs_order() {
            for &c in &self.children[u] {
                depth[c] = depth[u] + 1;
                max = max.max(depth[c]);
            }
        }
        max
    }

    /// Cuts the tree rooted at `root` out of a forest. `label_attrs` values
    /// are joined into one label per node; an empty list gives no labels.
    pub fn from_forest(forest: &ReferralForest, root: usize, label_attrs: &[String]) -> Result<Self, TreeError> {
        let nodes = forest.tree_nodes(root);
        let local: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let children = nodes
            .iter()
            .map(|&v| forest.children(v).iter().map(|c| local[c]).collect())
            .collect();
        let labels = if label_attrs.is_empty() {
            None
        } else {
            let mut labels = vec![Vec::with_capacity(label_attrs.len()); nodes.len()];
            for attr in label_attrs {
                let values = forest.attribute(attr);
                let missing: Vec<String> = nodes
                    .iter()
                    .filter(|&&v| values.and_then(|vals| vals[v].as_ref()).is_none())
                    .map(|&v| forest.ids()[v].clone())
                    .collect();
                if !missing.is_empty() {
                    return Err(TreeError::MissingLabel {
                        attribute: attr.clone(),
                        nodes: missing,
                    });
                }
                let values = values.expect("checked above");
                for (k, &v) in nodes.iter().enumerate() {
                    labels[k].push(values[v].clone().expect("checked above"));
                }
            }
            Some(labels.into_iter().map(|parts| join_label(&parts)).collect())
        };
        Ok(RootedTree {
            root: 0,
            children,
            labels,
            ids: Some(nodes.iter().map(|&v| forest.ids()[v].clone()).collect()),
        })
    }
}

fn escape(s: &str, out: &mut String) {
    for ch in s.chars() {
        if matches!(ch, '(' | ')' | '|' | ';' | '\\') {
            out.push('\\');
        }
        out.push(ch);
    }
}

/// Joins label parts with `;`, escaping the separator inside parts.
fn join_label(parts: &[String]) -> String {
    let mut out = String::new();
    for (k, p) in parts.iter().enumerate() {
        if k > 0 {
            out.push(';');
        }
        for ch in p.chars() {
            if matches!(ch, ';' | '\\') {
                out.push('\\');
            }
            out.push(ch);
        }
    }
    out
}

pub fn canonical_code(tree: &RootedTree, labeled: bool) -> String {
    let labels = tree.labels.as_ref().filter(|_| labeled);
    let mut codes: Vec<String> = vec![String::new(); tree.len()];
    for u in tree.bfs_order().into_iter().rev() {
        let mut kids: Vec<(&str, String)> = tree.children[u]
            .iter()
            .map(|&c| {
                let label = labels.map(|l| l[c].as_str()).unwrap_or("");
                (label, std::mem::take(&mut codes[c]))
            })
            .collect();
        kids.sort();
        let mut code = String::with_capacity(2 + kids.iter().map(|k| k.1.len()).sum::<usize>());
        code.push('(');
        if let Some(l) = labels {
            escape(&l[u], &mut code);
            code.push('|');
        }
        for (_, c) in kids {
            code.push_str(&c);
        }
        code.push(')');
        codes[u] = code;
    }
    std::mem::take(&mut codes[tree.root])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoClass {
    pub code: String,
    pub multiplicity: usize,
    pub example: RootedTree,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoClassTable {
    pub labeled: bool,
    pub entries: Vec<IsoClass>,
}

impl IsoClassTable {
    pub fn tree_count(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    /// CSV `code,multiplicity`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let to_io = |e: csv::Error| std::io::Error::other(e);
        out.write_record(["code", "multiplicity"]).map_err(to_io)?;
        for e in &self.entries {
            out.write_record([e.code.as_str(), &e.multiplicity.to_string()]).map_err(to_io)?;
        }
        out.flush()
    }

    /// Small-multiples layout: one cell per class, `columns` cells per row.
    pub fn grid_layout(&self, columns: usize) -> GridLayout {
        let columns = columns.max(1);
        let cells = self
            .entries
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let (xs, ys) = tidy_layout(&e.example);
                let nodes = (0..e.example.len())
                    .map(|v| LayoutNode {
                        x: xs[v],
                        y: ys[v],
                        label: e.example.labels.as_ref().map(|l| l[v].clone()),
                    })
                    .collect();
                let edges = (0..e.example.len())
                    .flat_map(|u| e.example.children[u].iter().map(move |&c| [u, c]))
                    .collect();
                LayoutCell {
                    row: k / columns,
                    col: k % columns,
                    code: e.code.clone(),
                    multiplicity: e.multiplicity,
                    nodes,
                    edges,
                }
            })
            .collect();
        GridLayout { columns, cells }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayoutNode {
    pub x: f64,
    pub y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayoutCell {
    pub row: usize,
    pub col: usize,
    pub code: String,
    pub multiplicity: usize,
    pub nodes: Vec<LayoutNode>,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridLayout {
    pub columns: usize,
    pub cells: Vec<LayoutCell>,
}

/// Leaves at consecutive x, parents centered over their children, y = depth.
fn tidy_layout(tree: &RootedTree) -> (Vec<f64>, Vec<f64>) {
    let n = tree.len();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let order = tree.bfs_order();
    for &u in &order {
        for &c in &tree.children[u] {
            y[c] = y[u] + 1.0;
        }
    }
    // preorder for leaf numbering
    let mut next_leaf = 0.0;
    let mut stack = vec![tree.root];
    while let Some(u) = stack.pop() {
        if tree.children[u].is_empty() {
            x[u] = next_leaf;
            next_leaf += 1.0;
        }
        stack.extend(tree.children[u].iter().rev());
    }
    for &u in order.iter().rev() {
        let kids = &tree.children[u];
        if !kids.is_empty() {
            x[u] = kids.iter().map(|&c| x[c]).sum::<f64>() / kids.len() as f64;
        }
    }
    (x, y)
}

/// Groups the forest's trees by canonical code, most frequent first.
pub fn iso_census(forest: &ReferralForest, labeled: bool, label_attrs: &[String]) -> Result<IsoClassTable, TreeError> {
    let attrs: &[String] = if labeled { label_attrs } else { &[] };
    let mut classes: BTreeMap<String, IsoClass> = BTreeMap::new();
    for &root in forest.roots() {
        let tree = RootedTree::from_forest(forest, root, attrs)?;
        let code = canonical_code(&tree, labeled);
        classes
            .entry(code.clone())
            .and_modify(|c| c.multiplicity += 1)
            .or_insert(IsoClass {
                code,
                multiplicity: 1,
                example: tree,
            });
    }
    let mut entries: Vec<IsoClass> = classes.into_values().collect();
    entries.sort_by(|a, b| b.multiplicity.cmp(&a.multiplicity).then_with(|| a.code.cmp(&b.code)));
    Ok(IsoClassTable { labeled, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeDepth {
    pub root_id: String,
    pub size: usize,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveStats {
    pub max_wave: u32,
    /// Respondents per wave.
    pub histogram: Vec<u64>,
    pub trees: Vec<TreeDepth>,
}

pub fn wave_stats(forest: &ReferralForest) -> WaveStats {
    let max_wave = forest.max_wave();
    let mut histogram = vec![0u64; if forest.is_empty() { 0 } else { max_wave as usize + 1 }];
    for &w in forest.waves() {
        histogram[w as usize] += 1;
    }
    let trees = forest
        .roots()
        .iter()
        .map(|&r| {
            let nodes = forest.tree_nodes(r);
            TreeDepth {
                root_id: forest.ids()[r].clone(),
                size: nodes.len(),
                depth: nodes.iter().map(|&v| forest.wave(v)).max().unwrap_or(0),
            }
        })
        .collect();
    WaveStats {
        max_wave,
        histogram,
        trees,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferralDegrees {
    /// `counts[k]` respondents recruited exactly `k` others; at least 4 bins.
    pub counts: Vec<u64>,
    pub mean: f64,
}

pub fn referral_degree_distribution(forest: &ReferralForest) -> ReferralDegrees {
    let mut counts = vec![0u64; 4];
    for i in 0..forest.len() {
        let k = forest.children(i).len();
        if k >= counts.len() {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
    }
    let total: u64 = counts.iter().sum();
    let edges: u64 = counts.iter().enumerate().map(|(k, &c)| k as u64 * c).sum();
    let mean = if total == 0 { 0.0 } else { edges as f64 / total as f64 };
    ReferralDegrees { counts, mean }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forest(parents: Vec<Option<usize>>) -> ReferralForest {
        let ids = (0..parents.len()).map(|i| format!("r{i}")).collect();
        ReferralForest::from_parents(ids, parents).unwrap()
    }

    #[test]
    fn single_node_code() {
        let t = RootedTree::from_parents(&[None]).unwrap();
        assert_eq!(canonical_code(&t, false), "()");
    }

    #[test]
    fn child_order_invariance() {
        // root with a chain child and a leaf child, listed both ways
        let a = RootedTree::from_parents(&[None, Some(0), Some(1), Some(0)]).unwrap();
        let b = RootedTree::from_parents(&[None, Some(0), Some(0), Some(2)]).unwrap();
        assert_eq!(canonical_code(&a, false), canonical_code(&b, false));
        assert_eq!(canonical_code(&a, false), "((())())");
    }

    #[test]
    fn labels_refine() {
        let t = RootedTree::from_parents(&[None, Some(0), Some(0)]).unwrap();
        let mf = t.clone().with_labels(vec!["m".into(), "m".into(), "f".into()]);
        let fm = t.clone().with_labels(vec!["m".into(), "f".into(), "m".into()]);
        let ff = t.with_labels(vec!["m".into(), "f".into(), "f".into()]);
        assert_eq!(canonical_code(&mf, true), canonical_code(&fm, true));
        assert_ne!(canonical_code(&mf, true), canonical_code(&ff, true));
        assert_eq!(canonical_code(&mf, false), canonical_code(&ff, false));
    }

    #[test]
    fn label_escaping_prevents_collisions() {
        let t = RootedTree::from_parents(&[None, Some(0)]).unwrap();
        let a = t.clone().with_labels(vec!["a|(".into(), "b".into()]);
        let b = t.with_labels(vec!["a".into(), "(b".into()]);
        assert_ne!(canonical_code(&a, true), canonical_code(&b, true));
    }

    #[test]
    fn census_of_singletons() {
        let f = forest(vec![None; 5]);
        let table = iso_census(&f, false, &[]).unwrap();
        assert_eq!(table.entries.len(), 1);
        assert_eq!(table.entries[0].multiplicity, 5);
        assert_eq!(table.entries[0].code, "()");
    }

    #[test]
    fn census_chains_and_star() {
        // chain of 3, star of 3 (root + 2 leaves), chain of 3
        let f = forest(vec![None, Some(0), Some(1), None, Some(3), Some(3), None, Some(6), Some(7)]);
        let table = iso_census(&f, false, &[]).unwrap();
        let mult: Vec<usize> = table.entries.iter().map(|e| e.multiplicity).collect();
        assert_eq!(mult, vec![2, 1]);
        assert_eq!(table.entries[0].code, "((()))");
        assert_eq!(table.tree_count(), 3);
    }

    #[test]
    fn census_missing_label_lists_nodes() {
        let f = forest(vec![None, Some(0)]).with_attribute("gender", vec![Some("male".into()), None]);
        let err = iso_census(&f, true, &["gender".into()]).unwrap_err();
        assert_eq!(
            err,
            TreeError::MissingLabel {
                attribute: "gender".into(),
                nodes: vec!["r1".into()]
            }
        );
    }

    #[test]
    fn wave_statistics() {
        let f = forest(vec![None; 3]);
        assert_eq!(wave_stats(&f).max_wave, 0);
        let chain: Vec<Option<usize>> = (0..21).map(|i| if i == 0 { None } else { Some(i - 1) }).collect();
        let s = wave_stats(&forest(chain));
        assert_eq!(s.max_wave, 20);
        assert_eq!(s.histogram.iter().sum::<u64>(), 21);
        assert_eq!(s.trees[0].depth, 20);
    }

    #[test]
    fn ternary_tree_degrees() {
        let parents: Vec<Option<usize>> = (0..13).map(|i| if i == 0 { None } else { Some((i - 1) / 3) }).collect();
        let d = referral_degree_distribution(&forest(parents));
        assert_eq!(d.counts, vec![9, 0, 0, 4]);
        assert!((d.mean - 12.0 / 13.0).abs() < 1e-12);
        assert_eq!(referral_degree_distribution(&forest(vec![None; 4])).mean, 0.0);
    }

    #[test]
    fn layout_is_plot_ready() {
        let f = forest(vec![None, Some(0), Some(0), None]);
        let grid = iso_census(&f, false, &[]).unwrap().grid_layout(2);
        assert_eq!(grid.cells.len(), 2);
        let star = &grid.cells.iter().find(|c| c.code == "(()())").unwrap();
        assert_eq!(star.nodes[0].x, 0.5);
        assert_eq!(star.edges.len(), 2);
    }
}

//! Immutable undirected graph in CSR form, plus node features and edge splits.
//!
//! An undirected edge `{u, v}` is stored twice, once in each endpoint's row,
//! so `neighbors(v)` is a contiguous sorted slice. Self-loops and duplicate
//! edges are dropped at construction and counted in [`CleaningStats`].

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of log-spaced buckets used for the fallback degree encoding.
pub const DEGREE_BUCKETS: usize = 16;

/// Dense row-major node feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(num_rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != num_rows * dim {
            return Err(Error::InvalidArgument(format!(
                "feature buffer has {} values, expected {num_rows}x{dim}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.dim..(v + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Counts of input edges discarded while building a [`Graph`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningStats {
    pub self_loops: usize,
    pub duplicates: usize,
}

impl CleaningStats {
    pub fn total(&self) -> usize {
        self.self_loops + self.duplicates
    }
}

/// Relationship of a node `u` to a target link `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    /// Adjacent to both endpoints.
    Cn,
    /// Adjacent to exactly one endpoint.
    OneHop,
    /// Adjacent to neither endpoint.
    GtOneHop,
}

impl NodeType {
    pub const ALL: [NodeType; 3] = [NodeType::Cn, NodeType::OneHop, NodeType::GtOneHop];

    pub fn index(self) -> usize {
        match self {
            NodeType::Cn => 0,
            NodeType::OneHop => 1,
            NodeType::GtOneHop => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Cn => "CN",
            NodeType::OneHop => "1-hop",
            NodeType::GtOneHop => ">1-hop",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    features: Features,
    cleaning: CleaningStats,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Edges are symmetrized;
    /// self-loops and repeated pairs are dropped. When `features` is `None`
    /// the degree-bucket encoding is used.
    pub fn from_edges(
        num_nodes: usize,
        edges: &[(usize, usize)],
        features: Option<Features>,
    ) -> Result<Self> {
        let mut cleaning = CleaningStats::default();
        let mut directed = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            for id in [u, v] {
                if id >= num_nodes {
                    return Err(Error::NodeOutOfRange { id, num_nodes });
                }
            }
            if u == v {
                cleaning.self_loops += 1;
                continue;
            }
            directed.push((u, v));
            directed.push((v, u));
        }
        directed.sort_unstable();
        let before = directed.len();
        directed.dedup();
        // each dropped undirected duplicate removes two directed entries
        cleaning.duplicates = (before - directed.len()) / 2;

        let mut row_offsets = vec![0usize; num_nodes + 1];
        for &(u, _) in &directed {
            row_offsets[u + 1] += 1;
        }
        for i in 0..num_nodes {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = directed.into_iter().map(|(_, v)| v).collect();

        let mut g = Graph {
            row_offsets,
            col_indices,
            features: Features { dim: 0, data: vec![] },
            cleaning,
        };
        g.features = match features {
            Some(f) => {
                if f.num_rows() != num_nodes {
                    return Err(Error::FeatureRowMismatch {
                        rows: f.num_rows(),
                        num_nodes,
                    });
                }
                f
            }
            None => degree_bucket_features(&g),
        };
        Ok(g)
    }

    pub fn num_nodes(&self) -> usize {
        self.row_offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn cleaning(&self) -> CleaningStats {
        self.cleaning
    }

    pub fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.num_nodes() {
            Err(Error::NodeOutOfRange {
                id: v,
                num_nodes: self.num_nodes(),
            })
        } else {
            Ok(())
        }
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> Result<&[usize]> {
        self.check_node(v)?;
        Ok(self.adj(v))
    }

    /// Unchecked neighbor slice for hot loops; panics on an invalid id.
    #[inline]
    pub(crate) fn adj(&self, v: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[v]..self.row_offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.row_offsets[v + 1] - self.row_offsets[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes() && v < self.num_nodes() && self.adj(u).binary_search(&v).is_ok()
    }

    /// Classifies `u` relative to the target link `(a, b)`.
    pub fn node_type(&self, a: usize, b: usize, u: usize) -> Result<NodeType> {
        self.check_node(a)?;
        self.check_node(b)?;
        self.check_node(u)?;
        if u == a || u == b {
            return Err(Error::InvalidArgument(format!(
                "node {u} is an endpoint of link ({a}, {b})"
            )));
        }
        Ok(match (self.has_edge(a, u), self.has_edge(b, u)) {
            (true, true) => NodeType::Cn,
            (true, false) | (false, true) => NodeType::OneHop,
            (false, false) => NodeType::GtOneHop,
        })
    }

    /// Undirected edge list with `u < v`, in CSR order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for u in 0..self.num_nodes() {
            for &v in self.adj(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Returns a copy with node ids relabelled by `perm` (old id -> new id).
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.num_nodes();
        if perm.len() != n {
            return Err(Error::InvalidArgument("permutation length mismatch".into()));
        }
        let edges: Vec<_> = self.edges().into_iter().map(|(u, v)| (perm[u], perm[v])).collect();
        let dim = self.features.dim;
        let mut data = vec![0.0; n * dim];
        for old in 0..n {
            data[perm[old] * dim..(perm[old] + 1) * dim].copy_from_slice(self.features.row(old));
        }
        Graph::from_edges(n, &edges, Some(Features::new(n, dim, data)?))
    }
}

/// One-hot encoding of `floor(log2(degree + 1))`, clamped to the last bucket.
pub fn degree_bucket_features(g: &Graph) -> Features {
    let n = g.num_nodes();
    let mut data = vec![0.0; n * DEGREE_BUCKETS];
    for v in 0..n {
        let bucket = ((g.degree(v) + 1) as f64).log2().floor() as usize;
        data[v * DEGREE_BUCKETS + bucket.min(DEGREE_BUCKETS - 1)] = 1.0;
    }
    Features {
        dim: DEGREE_BUCKETS,
        data,
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_ids(path: &Path, line_no: usize, line: &str) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("expected a non-negative integer, found {tok:?}"),
            })
        })
        .collect()
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Reads a whitespace-separated edge list of 0-indexed integer pairs.
pub fn read_edge_list(path: &Path) -> Result<Vec<(usize, usize)>> {
    parse_edge_list_from(path, &read_text(path)?)
}

/// Parses edge-list text; `#` starts a comment line.
pub fn parse_edge_list(text: &str) -> Result<Vec<(usize, usize)>> {
    parse_edge_list_from(Path::new("<input>"), text)
}

fn parse_edge_list_from(path: &Path, text: &str) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (line_no, line) in content_lines(text) {
        let ids = parse_ids(path, line_no, line)?;
        if ids.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("expected 2 node ids, found {}", ids.len()),
            });
        }
        out.push((ids[0], ids[1]));
    }
    Ok(out)
}

/// Reads a header-less CSV of real-valued features, one row per node.
pub fn read_features(path: &Path) -> Result<Features> {
    let text = read_text(path)?;
    let mut data = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for (line_no, line) in content_lines(&text) {
        let before = data.len();
        for tok in line.split(',') {
            let tok = tok.trim();
            let x: f64 = tok.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("non-numeric feature {tok:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: "non-finite feature".into(),
                });
            }
            data.push(x);
        }
        let width = data.len() - before;
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("row has {width} columns, expected {d}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    Features::new(rows, dim.unwrap_or(0), data)
}

/// Loads a graph. The node count comes from `num_nodes` when given, else the
/// feature row count, else the largest edge endpoint plus one.
pub fn load_graph(
    edge_path: &Path,
    feature_path: Option<&Path>,
    num_nodes: Option<usize>,
) -> Result<Graph> {
    let edges = read_edge_list(edge_path)?;
    let features = feature_path.map(read_features).transpose()?;
    let n = match (num_nodes, &features) {
        (Some(n), _) => n,
        (None, Some(f)) => f.num_rows(),
        (None, None) => edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0),
    };
    Graph::from_edges(n, &edges, features)
}

/// Evaluation negatives: one list shared by every positive, or a fixed-width
/// list per positive.
#[derive(Debug, Clone, PartialEq)]
pub enum Negatives {
    Shared(Vec<(usize, usize)>),
    PerPositive {
        width: usize,
        lists: Vec<Vec<(usize, usize)>>,
    },
}

impl Negatives {
    pub fn per_positive(lists: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        let width = lists.first().map_or(0, Vec::len);
        if let Some((i, l)) = lists.iter().enumerate().find(|(_, l)| l.len() != width) {
            return Err(Error::InvalidArgument(format!(
                "negative list {i} has width {}, expected {width}",
                l.len()
            )));
        }
        Ok(Negatives::PerPositive { width, lists })
    }

    /// Negatives ranked against positive `i`.
    pub fn for_positive(&self, i: usize) -> &[(usize, usize)] {
        match self {
            Negatives::Shared(v) => v,
            Negatives::PerPositive { lists, .. } => &lists[i],
        }
    }

    pub fn mode(&self) -> NegativeMode {
        match self {
            Negatives::Shared(_) => NegativeMode::Shared,
            Negatives::PerPositive { .. } => NegativeMode::PerPositive,
        }
    }

    pub fn all_pairs(&self) -> Vec<(usize, usize)> {
        match self {
            Negatives::Shared(v) => v.clone(),
            Negatives::PerPositive { lists, .. } => lists.iter().flatten().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    Shared,
    PerPositive,
}

/// Reads a per-positive negative file: line `i` holds `2K` integers.
pub fn read_per_positive_negatives(path: &Path) -> Result<Negatives> {
    let text = read_text(path)?;
    let mut lists = Vec::new();
    let mut width = None;
    for (line_no, line) in content_lines(&text) {
        let ids = parse_ids(path, line_no, line)?;
        if ids.len() % 2 != 0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: "odd number of node ids".into(),
            });
        }
        let k = ids.len() / 2;
        match width {
            None => width = Some(k),
            Some(w) if w != k => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("negative list width {k}, expected {w}"),
                })
            }
            _ => {}
        }
        lists.push(ids.chunks(2).map(|c| (c[0], c[1])).collect());
    }
    Negatives::per_positive(lists)
}

/// Train/valid/test positives and evaluation negatives.
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub train: Vec<(usize, usize)>,
    pub valid: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
    pub valid_neg: Negatives,
    pub test_neg: Negatives,
}

fn undirected(p: (usize, usize)) -> (usize, usize) {
    (p.0.min(p.1), p.0.max(p.1))
}

impl EdgeSplit {
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let check = |pairs: &[(usize, usize)]| -> Result<()> {
            for &(u, v) in pairs {
                for id in [u, v] {
                    if id >= num_nodes {
                        return Err(Error::NodeOutOfRange { id, num_nodes });
                    }
                }
            }
            Ok(())
        };
        check(&self.train)?;
        check(&self.valid)?;
        check(&self.test)?;
        check(&self.valid_neg.all_pairs())?;
        check(&self.test_neg.all_pairs())?;

        let train: HashSet<_> = self.train.iter().copied().map(undirected).collect();
        if let Some(&(u, v)) = self.test.iter().find(|&&p| train.contains(&undirected(p))) {
            return Err(Error::InvalidArgument(format!(
                "test positive ({u}, {v}) also appears in train"
            )));
        }
        for (name, pos, neg) in [
            ("valid", &self.valid, &self.valid_neg),
            ("test", &self.test, &self.test_neg),
        ] {
            if let Negatives::PerPositive { lists, .. } = neg {
                if lists.len() != pos.len() {
                    return Err(Error::InvalidArgument(format!(
                        "{name} has {} positives but {} negative lists",
                        pos.len(),
                        lists.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Loads `train.txt`, `valid.txt`, `test.txt` and negatives from `dir`.
    /// `*_neg.txt` is read as a shared list; `*_neg_k.txt` as per-positive lists.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let load_neg = |name: &str| -> Result<Negatives> {
            let per = dir.join(format!("{name}_neg_k.txt"));
            if per.exists() {
                read_per_positive_negatives(&per)
            } else {
                let shared = dir.join(format!("{name}_neg.txt"));
                if shared.exists() {
                    Ok(Negatives::Shared(read_edge_list(&shared)?))
                } else {
                    Ok(Negatives::Shared(vec![]))
                }
            }
        };
        let opt_list = |name: &str| -> Result<Vec<(usize, usize)>> {
            let p = dir.join(name);
            if p.exists() {
                read_edge_list(&p)
            } else {
                Ok(vec![])
            }
        };
        Ok(EdgeSplit {
            train: read_edge_list(&dir.join("train.txt"))?,
            valid: opt_list("valid.txt")?,
            test: opt_list("test.txt")?,
            valid_neg: load_neg("valid")?,
            test_neg: load_neg("test")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)], None).unwrap()
    }

    #[test]
    fn path_graph_degrees() {
        let g = path3();
        let degs: Vec<_> = (0..3).map(|v| g.degree(v)).collect();
        assert_eq!(degs, vec![1, 2, 1]);
        assert_eq!(g.row_offsets(), &[0, 1, 3, 4]);
        assert_eq!(g.neighbors(1).unwrap(), &[0, 2]);
    }

    #[test]
    fn cleaning_drops_duplicates_and_loops() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 0), (2, 2)], None).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
        assert_eq!(
            g.cleaning(),
            CleaningStats {
                self_loops: 1,
                duplicates: 1
            }
        );
        assert!(g.neighbors(2).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_ids() {
        assert!(matches!(
            Graph::from_edges(2, &[(0, 2)], None),
            Err(Error::NodeOutOfRange { id: 2, .. })
        ));
        assert!(path3().neighbors(3).is_err());
    }

    #[test]
    fn feature_row_mismatch() {
        let f = Features::new(2, 1, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            Graph::from_edges(3, &[], Some(f)),
            Err(Error::FeatureRowMismatch { rows: 2, num_nodes: 3 })
        ));
    }

    #[test]
    fn node_types() {
        // triangle a=0, b=1, c=2
        let tri = Graph::from_edges(3, &[(0, 1), (0, 2), (1, 2)], None).unwrap();
        assert_eq!(tri.node_type(0, 1, 2).unwrap(), NodeType::Cn);
        // path a=0 - c=2 - d=3 - b=1
        let p = Graph::from_edges(4, &[(0, 2), (2, 3), (3, 1)], None).unwrap();
        assert_eq!(p.node_type(0, 1, 2).unwrap(), NodeType::OneHop);
        // path a=0 - x=2 - y=3 - z=4 - b=1
        let p = Graph::from_edges(5, &[(0, 2), (2, 3), (3, 4), (4, 1)], None).unwrap();
        assert_eq!(p.node_type(0, 1, 3).unwrap(), NodeType::GtOneHop);
        assert!(p.node_type(0, 1, 0).is_err());
    }

    #[test]
    fn degree_buckets_are_one_hot() {
        let g = path3();
        let f = g.features();
        assert_eq!(f.dim(), DEGREE_BUCKETS);
        // degree 1 -> log2(2) = 1, degree 2 -> floor(log2 3) = 1
        assert_eq!(f.row(0)[1], 1.0);
        assert_eq!(f.row(1)[1], 1.0);
        for v in 0..3 {
            assert_eq!(f.row(v).iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn parses_files() {
        let dir = std::env::temp_dir().join(format!("lpform-graph-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let e = dir.join("e.tsv");
        let x = dir.join("x.csv");
        fs::write(&e, "0\t1\n# comment\n1\t2\n").unwrap();
        fs::write(&x, "1,0\n0,1\n0.5,0.5\n").unwrap();
        let g = load_graph(&e, Some(&x), None).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.features().row(2), &[0.5, 0.5]);

        fs::write(&e, "0\tfoo\n").unwrap();
        assert!(matches!(read_edge_list(&e), Err(Error::Parse { line: 1, .. })));

        let neg = dir.join("n.txt");
        fs::write(&neg, "0 1 0 2\n1 2\n").unwrap();
        assert!(read_per_positive_negatives(&neg).is_err());
        fs::write(&neg, "0 1 0 2\n1 2 2 0\n").unwrap();
        let n = read_per_positive_negatives(&neg).unwrap();
        assert_eq!(n.for_positive(1), &[(1, 2), (2, 0)]);
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn split_rejects_train_test_overlap() {
        let split = EdgeSplit {
            train: vec![(0, 1)],
            valid: vec![],
            test: vec![(1, 0)],
            valid_neg: Negatives::Shared(vec![]),
            test_neg: Negatives::Shared(vec![]),
        };
        assert!(split.validate(2).is_err());
    }
}

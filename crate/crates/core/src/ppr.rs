//! Personalized PageRank: local push approximation, dense oracles, and the
//! precomputed per-root cache.
//!
//! Walks use the column-stochastic random-walk matrix `W = A D^-1`. A node
//! with no neighbors keeps its walk mass in place, so the PPR row of an
//! isolated root is `{root: 1.0}` under every method here.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;

pub const DEFAULT_ALPHA: f64 = 0.15;

const MAGIC: &[u8; 4] = b"LPPR";
const VERSION: u32 = 1;

/// Sparse PPR vector of one root; entries sorted by node id, all scores > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePprRow {
    pub root: usize,
    pub alpha: f64,
    pub entries: Vec<(usize, f64)>,
}

impl SparsePprRow {
    pub fn get(&self, u: usize) -> f64 {
        self.entries
            .binary_search_by_key(&u, |&(v, _)| v)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|&(_, s)| s).sum()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

fn check_params(g: &Graph, root: usize, alpha: f64) -> Result<()> {
    g.check_node(root)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

/// Local push approximation of `ppr(root, ·)`.
///
/// Nodes whose residual reaches `eps * degree` are pushed in FIFO order. On
/// return every residual is below that bound, which gives
/// `0 <= exact(u) - approx(u) <= eps * degree(u)` on undirected graphs.
pub fn push_ppr(g: &Graph, root: usize, alpha: f64, eps: f64) -> Result<SparsePprRow> {
    check_params(g, root, alpha)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let n = g.num_nodes();
    let mut estimate = vec![0.0f64; n];
    let mut residual = vec![0.0f64; n];
    let mut queued = vec![false; n];
    let mut touched = vec![root];
    let mut queue = VecDeque::new();

    residual[root] = 1.0;
    queue.push_back(root);
    queued[root] = true;

    while let Some(u) = queue.pop_front() {
        queued[u] = false;
        let r = residual[u];
        let deg = g.degree(u);
        if deg == 0 {
            estimate[u] += r;
            residual[u] = 0.0;
            continue;
        }
        if r < eps * deg as f64 {
            continue;
        }
        estimate[u] += alpha * r;
        residual[u] = 0.0;
        let share = (1.0 - alpha) * r / deg as f64;
        for &v in g.adj(u) {
            if residual[v] == 0.0 && estimate[v] == 0.0 {
                touched.push(v);
            }
            residual[v] += share;
            if !queued[v] && residual[v] >= eps * g.degree(v) as f64 {
                queued[v] = true;
                queue.push_back(v);
            }
        }
    }

    touched.sort_unstable();
    touched.dedup();
    let entries = touched
        .into_iter()
        .filter(|&v| estimate[v] > 0.0)
        .map(|v| (v, estimate[v]))
        .collect();
    Ok(SparsePprRow {
        root,
        alpha,
        entries,
    })
}

/// One step of `x <- W x` over CSR adjacency.
fn walk_step(g: &Graph, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for u in 0..g.num_nodes() {
        let mass = x[u];
        if mass == 0.0 {
            continue;
        }
        let deg = g.degree(u);
        if deg == 0 {
            out[u] += mass;
            continue;
        }
        let share = mass / deg as f64;
        for &v in g.adj(u) {
            out[v] += share;
        }
    }
}

/// Truncated diffusion series `alpha * sum_{k<=iters} (1-alpha)^k W^k e_root`.
pub fn power_iteration_ppr(g: &Graph, root: usize, alpha: f64, iters: usize) -> Result<Vec<f64>> {
    check_params(g, root, alpha)?;
    let n = g.num_nodes();
    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    x[root] = 1.0;
    let mut acc: Vec<f64> = x.iter().map(|&v| alpha * v).collect();
    let mut weight = alpha;
    for _ in 0..iters {
        walk_step(g, &x, &mut next);
        std::mem::swap(&mut x, &mut next);
        weight *= 1.0 - alpha;
        for (a, &v) in acc.iter_mut().zip(&x) {
            *a += weight * v;
        }
    }
    Ok(acc)
}

/// Dense random-walk matrix, row-major: `w[v * n + u]` is the probability of
/// stepping from `u` to `v`.
fn dense_walk_matrix(g: &Graph) -> Vec<f64> {
    let n = g.num_nodes();
    let mut w = vec![0.0; n * n];
    for u in 0..n {
        let deg = g.degree(u);
        if deg == 0 {
            w[u * n + u] = 1.0;
        }
        for &v in g.adj(u) {
            w[v * n + u] = 1.0 / deg as f64;
        }
    }
    w
}

/// `sum_{k=0..=max_len} alpha (1-alpha)^k (r_a^k(u) + r_b^k(u))`, where
/// `r_s^k(u)` is the probability that a length-`k` walk from `s` ends at `u`.
/// Walk distributions are propagated with an explicit dense matrix.
pub fn walk_sum_gamma(
    g: &Graph,
    a: usize,
    b: usize,
    u: usize,
    alpha: f64,
    max_len: usize,
) -> Result<f64> {
    check_params(g, a, alpha)?;
    g.check_node(b)?;
    g.check_node(u)?;
    let n = g.num_nodes();
    let w = dense_walk_matrix(g);
    let mut ra = vec![0.0; n];
    let mut rb = vec![0.0; n];
    ra[a] = 1.0;
    rb[b] = 1.0;
    let mut total = 0.0;
    let mut gamma = alpha;
    for k in 0..=max_len {
        if k > 0 {
            ra = dense_matvec(&w, &ra);
            rb = dense_matvec(&w, &rb);
            gamma *= 1.0 - alpha;
        }
        total += gamma * (ra[u] + rb[u]);
    }
    Ok(total)
}

fn dense_matvec(m: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| m[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Approximate PPR rows for every node of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PprCache {
    alpha: f64,
    eps: f64,
    rows: Vec<SparsePprRow>,
}

impl PprCache {
    pub fn from_rows(alpha: f64, eps: f64, rows: Vec<SparsePprRow>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.root != i {
                return Err(Error::InvalidArgument(format!("row {i} has root {}", row.root)));
            }
            if row.alpha != alpha {
                return Err(Error::InvalidArgument(format!(
                    "row {i} computed with alpha {}, cache alpha {alpha}",
                    row.alpha
                )));
            }
        }
        Ok(Self { alpha, eps, rows })
    }

    /// Cache built from dense truncated series; used as an exact reference.
    pub fn exact(g: &Graph, alpha: f64, iters: usize) -> Result<Self> {
        let rows = (0..g.num_nodes())
            .map(|root| {
                let dense = power_iteration_ppr(g, root, alpha, iters)?;
                let entries = dense
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, s)| s > 0.0)
                    .collect();
                Ok(SparsePprRow {
                    root,
                    alpha,
                    entries,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(alpha, 0.0, rows)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn num_nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SparsePprRow] {
        &self.rows
    }

    pub fn row(&self, root: usize) -> Result<&SparsePprRow> {
        self.rows.get(root).ok_or(Error::NodeOutOfRange {
            id: root,
            num_nodes: self.rows.len(),
        })
    }

    /// `ppr(root, u)`, zero when not stored.
    pub fn score(&self, root: usize, u: usize) -> f64 {
        self.rows.get(root).map_or(0.0, |r| r.get(u))
    }

    pub fn total_nnz(&self) -> usize {
        self.rows.iter().map(SparsePprRow::nnz).sum()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.rows.len() as u32).to_le_bytes())?;
        w.write_all(&self.alpha.to_le_bytes())?;
        w.write_all(&self.eps.to_le_bytes())?;
        for row in &self.rows {
            w.write_all(&(row.entries.len() as u32).to_le_bytes())?;
            for &(v, s) in &row.entries {
                w.write_all(&(v as u32).to_le_bytes())?;
                w.write_all(&(s as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let io = |e| Error::io("<ppr cache>", e);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad PPR cache magic".into()));
        }
        let version = read_u32(r).map_err(io)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported PPR cache version {version}")));
        }
        let n = read_u32(r).map_err(io)? as usize;
        let alpha = read_f64(r).map_err(io)?;
        let eps = read_f64(r).map_err(io)?;
        let mut rows = Vec::with_capacity(n);
        for root in 0..n {
            let nnz = read_u32(r).map_err(io)? as usize;
            let mut entries = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                let v = read_u32(r).map_err(io)? as usize;
                let mut buf = [0u8; 4];
                r.read_exact(&mut buf).map_err(io)?;
                let s = f32::from_le_bytes(buf) as f64;
                if v >= n {
                    return Err(Error::Format(format!("row {root} references node {v}")));
                }
                entries.push((v, s));
            }
            rows.push(SparsePprRow {
                root,
                alpha,
                entries,
            });
        }
        Self::from_rows(alpha, eps, rows)
    }
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Push rows for every root, computed in parallel. Scores are rounded to f32
/// precision so the in-memory cache matches its on-disk form exactly.
pub fn precompute_cache(g: &Graph, alpha: f64, eps: f64) -> Result<PprCache> {
    let rows = (0..g.num_nodes())
        .into_par_iter()
        .map(|root| {
            let mut row = push_ppr(g, root, alpha, eps)?;
            for e in &mut row.entries {
                e.1 = e.1 as f32 as f64;
            }
            row.entries.retain(|&(_, s)| s > 0.0);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    PprCache::from_rows(alpha, eps, rows)
}

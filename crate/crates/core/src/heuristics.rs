//! Classical link-prediction heuristics and a generic evaluator for the
//! weighted-sum pairwise encoding `s(a,b) = sum_u w(a,b,u) * h(a,b,u)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ppr::PprCache;

pub const DEFAULT_KATZ_BETA: f64 = 0.1;
pub const DEFAULT_KATZ_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    Cn,
    Aa,
    Ra,
    Katz,
    Ppr,
    FeatSim,
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "cn" => Self::Cn,
            "aa" => Self::Aa,
            "ra" => Self::Ra,
            "katz" => Self::Katz,
            "ppr" => Self::Ppr,
            "featsim" | "feat_sim" | "fs" => Self::FeatSim,
            other => return Err(Error::InvalidArgument(format!("unknown heuristic {other:?}"))),
        })
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cn => "cn",
            Self::Aa => "aa",
            Self::Ra => "ra",
            Self::Katz => "katz",
            Self::Ppr => "ppr",
            Self::FeatSim => "featsim",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicScore {
    pub link: (usize, usize),
    pub kind: HeuristicKind,
    pub value: f64,
}

fn check_pair(g: &Graph, a: usize, b: usize) -> Result<()> {
    g.check_node(a)?;
    g.check_node(b)?;
    if a == b {
        return Err(Error::InvalidArgument(format!("degenerate link ({a}, {a})")));
    }
    Ok(())
}

/// Sorted-merge intersection of the two neighbor lists.
pub fn common_neighbors(g: &Graph, a: usize, b: usize) -> Vec<usize> {
    let (na, nb) = (g.adj(a), g.adj(b));
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < na.len() && j < nb.len() {
        match na[i].cmp(&nb[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(na[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

pub fn cn(g: &Graph, a: usize, b: usize) -> Result<f64> {
    check_pair(g, a, b)?;
    Ok(common_neighbors(g, a, b).len() as f64)
}

/// Adamic-Adar with natural log. Every common neighbor has degree >= 2.
pub fn aa(g: &Graph, a: usize, b: usize) -> Result<f64> {
    check_pair(g, a, b)?;
    Ok(common_neighbors(g, a, b)
        .into_iter()
        .map(|u| 1.0 / (g.degree(u) as f64).ln())
        .sum())
}

pub fn ra(g: &Graph, a: usize, b: usize) -> Result<f64> {
    check_pair(g, a, b)?;
    Ok(common_neighbors(g, a, b)
        .into_iter()
        .map(|u| 1.0 / g.degree(u) as f64)
        .sum())
}

/// Truncated Katz index `sum_{l=1..=max_len} beta^l (A^l)_{ab}`, computed by
/// repeated sparse products starting from `e_a`.
pub fn katz(g: &Graph, a: usize, b: usize, beta: f64, max_len: usize) -> Result<f64> {
    check_pair(g, a, b)?;
    if !(beta > 0.0 && beta < 1.0) || max_len == 0 {
        return Err(Error::InvalidArgument(format!(
            "katz needs 0 < beta < 1 and max_len >= 1, got beta={beta}, max_len={max_len}"
        )));
    }
    let n = g.num_nodes();
    let mut paths = vec![0.0; n];
    let mut next = vec![0.0; n];
    paths[a] = 1.0;
    let mut total = 0.0;
    let mut weight = 1.0;
    for _ in 0..max_len {
        next.iter_mut().for_each(|x| *x = 0.0);
        for u in 0..n {
            if paths[u] != 0.0 {
                for &v in g.adj(u) {
                    next[v] += paths[u];
                }
            }
        }
        std::mem::swap(&mut paths, &mut next);
        weight *= beta;
        total += weight * paths[b];
    }
    Ok(total)
}

pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
    let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
    let ny = y.iter().map(|q| q * q).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        (dot / (nx * ny)).clamp(-1.0, 1.0)
    }
}

/// Cosine similarity of the two feature rows; zero if either row is all zeros.
pub fn feat_cosine(g: &Graph, a: usize, b: usize) -> Result<f64> {
    check_pair(g, a, b)?;
    let f = g.features();
    Ok(cosine(f.row(a), f.row(b)))
}

/// Symmetrized PPR score `ppr(a,b) + ppr(b,a)`.
pub fn ppr_score(cache: &PprCache, a: usize, b: usize) -> Result<f64> {
    cache.row(a)?;
    cache.row(b)?;
    Ok(cache.score(a, b) + cache.score(b, a))
}

/// Evaluates a heuristic by kind with default Katz parameters.
pub fn score(
    g: &Graph,
    cache: Option<&PprCache>,
    kind: HeuristicKind,
    a: usize,
    b: usize,
) -> Result<f64> {
    match kind {
        HeuristicKind::Cn => cn(g, a, b),
        HeuristicKind::Aa => aa(g, a, b),
        HeuristicKind::Ra => ra(g, a, b),
        HeuristicKind::Katz => katz(g, a, b, DEFAULT_KATZ_BETA, DEFAULT_KATZ_LEN),
        HeuristicKind::FeatSim => feat_cosine(g, a, b),
        HeuristicKind::Ppr => {
            check_pair(g, a, b)?;
            let cache = cache.ok_or_else(|| {
                Error::InvalidArgument("ppr heuristic requires a PPR cache".into())
            })?;
            ppr_score(cache, a, b)
        }
    }
}

/// Computes `sum_u w(u) * h(u)` over all nodes, or over `support` when given.
///
/// `w` may return a single value (broadcast across the encoding) or a vector
/// of the encoding's width. Every `h` output must have the same width.
pub fn general_pairwise<W, H>(
    g: &Graph,
    support: Option<&[usize]>,
    mut w_fn: W,
    mut h_fn: H,
) -> Result<Vec<f64>>
where
    W: FnMut(usize) -> Vec<f64>,
    H: FnMut(usize) -> Vec<f64>,
{
    let all: Vec<usize>;
    let nodes = match support {
        Some(s) => s,
        None => {
            all = (0..g.num_nodes()).collect();
            &all
        }
    };
    let mut acc: Option<Vec<f64>> = None;
    for &u in nodes {
        g.check_node(u)?;
        let w = w_fn(u);
        let h = h_fn(u);
        let acc = acc.get_or_insert_with(|| vec![0.0; h.len()]);
        if h.len() != acc.len() {
            return Err(Error::shape(
                "general_pairwise",
                format!("h({u}) has width {}, expected {}", h.len(), acc.len()),
            ));
        }
        match w.len() {
            1 => acc.iter_mut().zip(&h).for_each(|(s, x)| *s += w[0] * x),
            n if n == h.len() => acc
                .iter_mut()
                .zip(w.iter().zip(&h))
                .for_each(|(s, (p, q))| *s += p * q),
            n => {
                return Err(Error::shape(
                    "general_pairwise",
                    format!("w({u}) has width {n}, h has width {}", h.len()),
                ))
            }
        }
    }
    Ok(acc.unwrap_or_default())
}

/// The `(w, h)` choices under which [`general_pairwise`] reproduces each
/// heuristic. These evaluate membership and walk counts from scratch rather
/// than calling the direct implementations above.
pub mod reductions {
    use super::*;

    fn indicator_cn(g: &Graph, a: usize, b: usize, u: usize) -> f64 {
        if u != a && u != b && g.has_edge(a, u) && g.has_edge(b, u) {
            1.0
        } else {
            0.0
        }
    }

    fn one_hot_at_target(n: usize, b: usize, u: usize) -> Vec<f64> {
        let mut e = vec![0.0; n];
        if u == b {
            e[b] = 1.0;
        }
        e
    }

    pub fn cn(g: &Graph, a: usize, b: usize) -> Result<f64> {
        let s = general_pairwise(g, None, |u| vec![indicator_cn(g, a, b, u)], |_| vec![1.0])?;
        Ok(s[0])
    }

    pub fn aa(g: &Graph, a: usize, b: usize) -> Result<f64> {
        let s = general_pairwise(
            g,
            None,
            |u| vec![indicator_cn(g, a, b, u)],
            |u| {
                let d = g.degree(u) as f64;
                vec![if d > 1.0 { 1.0 / d.ln() } else { 0.0 }]
            },
        )?;
        Ok(s[0])
    }

    pub fn ra(g: &Graph, a: usize, b: usize) -> Result<f64> {
        let s = general_pairwise(
            g,
            None,
            |u| vec![indicator_cn(g, a, b, u)],
            |u| {
                let d = g.degree(u) as f64;
                vec![if d > 0.0 { 1.0 / d } else { 0.0 }]
            },
        )?;
        Ok(s[0])
    }

    /// `w(u) = sum_l beta^l e_a^T A^l` (a row vector, identical for every u),
    /// `h(u) = e_b` when `u == b`, else zero. The result is read at index b.
    pub fn katz(g: &Graph, a: usize, b: usize, beta: f64, max_len: usize) -> Result<f64> {
        let n = g.num_nodes();
        let dense = dense_adjacency(g);
        let mut power = identity(n);
        let mut walk = vec![0.0; n];
        let mut weight = 1.0;
        for _ in 0..max_len {
            power = dense_matmul(&power, &dense, n);
            weight *= beta;
            for v in 0..n {
                walk[v] += weight * power[a * n + v];
            }
        }
        let s = general_pairwise(g, None, |_| walk.clone(), |u| one_hot_at_target(n, b, u))?;
        Ok(s[b])
    }

    /// `w(u) = alpha sum_l (1-alpha)^l e_a^T (D^-1 A)^l`, `h` as for Katz.
    pub fn ppr(g: &Graph, a: usize, b: usize, alpha: f64, max_len: usize) -> Result<f64> {
        let n = g.num_nodes();
        let mut transition = dense_adjacency(g);
        for u in 0..n {
            let d = g.degree(u);
            if d == 0 {
                transition[u * n + u] = 1.0;
            } else {
                transition[u * n..(u + 1) * n].iter_mut().for_each(|x| *x /= d as f64);
            }
        }
        let mut power = identity(n);
        let mut walk: Vec<f64> = power[a * n..(a + 1) * n].iter().map(|x| alpha * x).collect();
        let mut weight = alpha;
        for _ in 0..max_len {
            power = dense_matmul(&power, &transition, n);
            weight *= 1.0 - alpha;
            for v in 0..n {
                walk[v] += weight * power[a * n + v];
            }
        }
        let s = general_pairwise(g, None, |_| walk.clone(), |u| one_hot_at_target(n, b, u))?;
        Ok(s[b])
    }

    /// `w(u) = cos(x_a, x_u)`, `h` as for Katz.
    pub fn feat_sim(g: &Graph, a: usize, b: usize) -> Result<f64> {
        let n = g.num_nodes();
        let f = g.features();
        let s = general_pairwise(
            g,
            None,
            |u| vec![cosine(f.row(a), f.row(u))],
            |u| one_hot_at_target(n, b, u),
        )?;
        Ok(s[b])
    }

    fn identity(n: usize) -> Vec<f64> {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        m
    }

    fn dense_adjacency(g: &Graph) -> Vec<f64> {
        let n = g.num_nodes();
        let mut m = vec![0.0; n * n];
        for u in 0..n {
            for &v in g.adj(u) {
                m[u * n + v] = 1.0;
            }
        }
        m
    }

    fn dense_matmul(x: &[f64], y: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let xik = x[i * n + k];
                if xik != 0.0 {
                    for j in 0..n {
                        out[i * n + j] += xik * y[k * n + j];
                    }
                }
            }
        }
        out
    }
}

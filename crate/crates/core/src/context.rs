//! PPR-thresholded attention context for target links.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeType};
use crate::ppr::PprCache;

/// Per-type PPR thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub cn: f64,
    pub one_hop: f64,
    pub gt_one_hop: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            cn: 0.0,
            one_hop: 1e-4,
            gt_one_hop: 1e-2,
        }
    }
}

impl Thresholds {
    pub fn uniform(eta: f64) -> Self {
        Self {
            cn: eta,
            one_hop: eta,
            gt_one_hop: eta,
        }
    }

    pub fn for_type(&self, t: NodeType) -> f64 {
        match t {
            NodeType::Cn => self.cn,
            NodeType::OneHop => self.one_hop,
            NodeType::GtOneHop => self.gt_one_hop,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("cn", self.cn), ("one_hop", self.one_hop), ("gt_one_hop", self.gt_one_hop)] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("threshold {name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// How the two endpoint PPR scores are combined against a threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PprFilter {
    /// Both `ppr(a,u)` and `ppr(b,u)` must exceed the threshold.
    #[default]
    And,
    /// Either score exceeding the threshold suffices.
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContextParams {
    pub thresholds: Thresholds,
    pub filter: PprFilter,
    /// Keep at most this many nodes, preferring larger `ppr_au + ppr_bu`.
    pub max_context: Option<usize>,
}

impl Default for ContextParams {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            filter: PprFilter::And,
            max_context: Some(2048),
        }
    }
}

impl ContextParams {
    pub fn uncapped(thresholds: Thresholds) -> Self {
        Self {
            thresholds,
            filter: PprFilter::And,
            max_context: None,
        }
    }

    /// Whether a node of type `t` with the given scores is kept.
    pub fn keeps(&self, t: NodeType, ppr_au: f64, ppr_bu: f64) -> bool {
        let eta = self.thresholds.for_type(t);
        match self.filter {
            PprFilter::And => ppr_au > eta && ppr_bu > eta,
            PprFilter::Or => ppr_au > eta || ppr_bu > eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextNode {
    pub node: usize,
    pub kind: NodeType,
    pub ppr_au: f64,
    pub ppr_bu: f64,
}

/// Attended nodes of one link, ordered CN, 1-hop, >1-hop and by id within a type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSet {
    pub link: (usize, usize),
    pub nodes: Vec<ContextNode>,
    /// Per-type sizes, indexed by [`NodeType::index`].
    pub counts: [usize; 3],
}

impl ContextSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_ids(&self) -> Vec<usize> {
        self.nodes.iter().map(|c| c.node).collect()
    }

    /// The same context seen from `(b, a)`.
    pub fn swapped(&self) -> ContextSet {
        ContextSet {
            link: (self.link.1, self.link.0),
            nodes: self
                .nodes
                .iter()
                .map(|c| ContextNode {
                    ppr_au: c.ppr_bu,
                    ppr_bu: c.ppr_au,
                    ..*c
                })
                .collect(),
            counts: self.counts,
        }
    }
}

fn classify(g: &Graph, a: usize, b: usize, u: usize) -> NodeType {
    match (g.has_edge(a, u), g.has_edge(b, u)) {
        (true, true) => NodeType::Cn,
        (false, false) => NodeType::GtOneHop,
        _ => NodeType::OneHop,
    }
}

pub fn select_context(
    g: &Graph,
    cache: &PprCache,
    a: usize,
    b: usize,
    params: &ContextParams,
) -> Result<ContextSet> {
    g.check_node(a)?;
    g.check_node(b)?;
    let row_a = cache.row(a)?;
    let row_b = cache.row(b)?;

    let mut candidates: Vec<usize> = row_a
        .entries
        .iter()
        .chain(&row_b.entries)
        .map(|&(v, _)| v)
        .chain(g.adj(a).iter().copied())
        .chain(g.adj(b).iter().copied())
        .filter(|&u| u != a && u != b)
        .collect();
    candidates.sort_unstable();
    candidates.dedup();

    let mut nodes: Vec<ContextNode> = candidates
        .into_iter()
        .filter_map(|u| {
            let kind = classify(g, a, b, u);
            let (ppr_au, ppr_bu) = (row_a.get(u), row_b.get(u));
            params.keeps(kind, ppr_au, ppr_bu).then_some(ContextNode {
                node: u,
                kind,
                ppr_au,
                ppr_bu,
            })
        })
        .collect();

    if let Some(cap) = params.max_context {
        if nodes.len() > cap {
            nodes.sort_by(|x, y| {
                (y.ppr_au + y.ppr_bu)
                    .total_cmp(&(x.ppr_au + x.ppr_bu))
                    .then(x.node.cmp(&y.node))
            });
            nodes.truncate(cap);
        }
    }
    nodes.sort_by_key(|c| (c.kind, c.node));

    let mut counts = [0usize; 3];
    for c in &nodes {
        counts[c.kind.index()] += 1;
    }
    Ok(ContextSet {
        link: (a, b),
        nodes,
        counts,
    })
}

pub fn context_batch(
    g: &Graph,
    cache: &PprCache,
    links: &[(usize, usize)],
    params: &ContextParams,
) -> Result<Vec<ContextSet>> {
    links
        .par_iter()
        .map(|&(a, b)| select_context(g, cache, a, b, params))
        .collect()
}

/// Writes one TSV row per (link, context node).
pub fn write_context_tsv<W: Write>(w: &mut W, contexts: &[ContextSet]) -> std::io::Result<()> {
    writeln!(w, "a\tb\tnode\ttype\tppr_au\tppr_bu")?;
    for ctx in contexts {
        for c in &ctx.nodes {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{:e}\t{:e}",
                ctx.link.0,
                ctx.link.1,
                c.node,
                c.kind.as_str(),
                c.ppr_au,
                c.ppr_bu
            )?;
        }
    }
    Ok(())
}

//! wasm-bindgen wrappers over `lpform-core` for the static page in `www/`.
//!
//! Every export takes the edge list as text and returns JSON.

use lpform_core::context::{select_context, ContextParams, PprFilter, Thresholds};
use lpform_core::graph::{parse_edge_list, Graph};
use lpform_core::heuristics::{self, HeuristicKind};
use lpform_core::ppr::{precompute_cache, push_ppr};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn graph_from_text(edges: &str) -> Result<Graph, String> {
    let edges = parse_edge_list(edges).map_err(|e| e.to_string())?;
    let n = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    if n == 0 {
        return Err("edge list is empty".into());
    }
    Graph::from_edges(n, &edges, None).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct PprEntry {
    node: usize,
    score: f64,
}

/// Approximate PPR row of `root`, highest scores first.
pub fn ppr_scores_json(edges: &str, root: usize, alpha: f64, eps: f64) -> Result<String, String> {
    let g = graph_from_text(edges)?;
    let row = push_ppr(&g, root, alpha, eps).map_err(|e| e.to_string())?;
    let mut out: Vec<PprEntry> = row.entries.iter().map(|&(node, score)| PprEntry { node, score }).collect();
    out.sort_by(|x, y| y.score.total_cmp(&x.score).then(x.node.cmp(&y.node)));
    to_json(&out)
}

/// Context nodes of link `(a, b)` with one threshold for 1-hop and >1-hop nodes.
pub fn context_json(edges: &str, a: usize, b: usize, eta: f64, either: bool) -> Result<String, String> {
    let g = graph_from_text(edges)?;
    let cache = precompute_cache(&g, 0.15, 1e-7).map_err(|e| e.to_string())?;
    let params = ContextParams {
        thresholds: Thresholds {
            one_hop: eta,
            gt_one_hop: eta,
            ..Thresholds::default()
        },
        filter: if either { PprFilter::Or } else { PprFilter::And },
        max_context: None,
    };
    let ctx = select_context(&g, &cache, a, b, &params).map_err(|e| e.to_string())?;
    to_json(&ctx)
}

#[derive(Serialize)]
struct HeuristicRow {
    kind: String,
    score: f64,
}

/// Every heuristic for link `(a, b)`. Features are degree buckets.
pub fn heuristics_json(edges: &str, a: usize, b: usize) -> Result<String, String> {
    let g = graph_from_text(edges)?;
    let cache = precompute_cache(&g, 0.15, 1e-7).map_err(|e| e.to_string())?;
    let kinds = [
        HeuristicKind::Cn,
        HeuristicKind::Aa,
        HeuristicKind::Ra,
        HeuristicKind::Katz,
        HeuristicKind::Ppr,
        HeuristicKind::FeatSim,
    ];
    let rows = kinds
        .iter()
        .map(|&kind| {
            heuristics::score(&g, Some(&cache), kind, a, b).map(|score| HeuristicRow {
                kind: kind.to_string(),
                score,
            })
        })
        .collect::<lpform_core::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    to_json(&rows)
}

#[wasm_bindgen]
pub fn ppr_scores(edges: &str, root: usize, alpha: f64, eps: f64) -> Result<String, JsValue> {
    ppr_scores_json(edges, root, alpha, eps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn context(edges: &str, a: usize, b: usize, eta: f64, either: bool) -> Result<String, JsValue> {
    context_json(edges, a, b, eta, either).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn link_heuristics(edges: &str, a: usize, b: usize) -> Result<String, JsValue> {
    heuristics_json(edges, a, b).map_err(|e| JsValue::from_str(&e))
}

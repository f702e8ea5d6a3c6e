//! Splits links by which single factor (local structure, global structure,
//! or feature proximity) clears its percentile threshold.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{rank_scores, NegativeScores, RankingReport};
use crate::graph::Graph;
use crate::heuristics::{cn, feat_cosine, ppr_score};
use crate::ppr::PprCache;

pub const DEFAULT_PERCENTILE: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Local,
    Global,
    Feature,
    None,
}

impl Factor {
    pub const GROUPS: [Factor; 3] = [Factor::Local, Factor::Global, Factor::Feature];

    pub fn as_str(self) -> &'static str {
        match self {
            Factor::Local => "local",
            Factor::Global => "global",
            Factor::Feature => "feature",
            Factor::None => "none",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scores and thresholds are ordered (cn, ppr, featsim).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorAssignment {
    pub link: (usize, usize),
    pub factor: Factor,
    pub scores: [f64; 3],
    pub thresholds: [f64; 3],
}

/// Nearest-rank percentile: the value at sorted index `ceil(p/100 * n) - 1`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 100.0) {
        return Err(Error::InvalidArgument(format!("percentile must lie in (0,100), got {p}")));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile of an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn percentile_thresholds(scores: &[[f64; 3]], p: f64) -> Result<[f64; 3]> {
    let col = |k: usize| scores.iter().map(|s| s[k]).collect::<Vec<_>>();
    Ok([percentile(&col(0), p)?, percentile(&col(1), p)?, percentile(&col(2), p)?])
}

/// A factor wins only when its score is at or above its threshold and both
/// others are strictly below theirs.
pub fn classify(scores: [f64; 3], thresholds: [f64; 3]) -> Factor {
    let above = [0, 1, 2].map(|k| scores[k] >= thresholds[k]);
    match above {
        [true, false, false] => Factor::Local,
        [false, true, false] => Factor::Global,
        [false, false, true] => Factor::Feature,
        _ => Factor::None,
    }
}

/// Classifies precomputed (cn, ppr, featsim) scores with thresholds taken
/// from the same population.
pub fn assign_from_scores(links: &[(usize, usize)], scores: &[[f64; 3]], p: f64) -> Result<Vec<FactorAssignment>> {
    if links.len() != scores.len() {
        return Err(Error::InvalidArgument(format!(
            "{} links but {} score rows",
            links.len(),
            scores.len()
        )));
    }
    let thresholds = percentile_thresholds(scores, p)?;
    Ok(links
        .iter()
        .zip(scores)
        .map(|(&link, &s)| FactorAssignment {
            link,
            factor: classify(s, thresholds),
            scores: s,
            thresholds,
        })
        .collect())
}

pub fn factor_scores(g: &Graph, cache: &PprCache, links: &[(usize, usize)]) -> Result<Vec<[f64; 3]>> {
    links
        .par_iter()
        .map(|&(a, b)| Ok([cn(g, a, b)?, ppr_score(cache, a, b)?, feat_cosine(g, a, b)?]))
        .collect()
}

pub fn assign_factors(g: &Graph, cache: &PprCache, links: &[(usize, usize)], p: f64) -> Result<Vec<FactorAssignment>> {
    let scores = factor_scores(g, cache, links)?;
    assign_from_scores(links, &scores, p)
}

/// One report per factor group, ranking each group's positives against its
/// negatives. Empty groups give reports flagged `empty`.
pub fn per_factor_report(
    assignments: &[FactorAssignment],
    positive_scores: &[f64],
    negatives: &NegativeScores,
    ks: &[usize],
) -> Result<Vec<(Factor, RankingReport)>> {
    if assignments.len() != positive_scores.len() {
        return Err(Error::InvalidArgument(format!(
            "{} assignments but {} positive scores",
            assignments.len(),
            positive_scores.len()
        )));
    }
    Factor::GROUPS
        .iter()
        .map(|&f| {
            let idx: Vec<usize> = (0..assignments.len()).filter(|&i| assignments[i].factor == f).collect();
            let pos: Vec<f64> = idx.iter().map(|&i| positive_scores[i]).collect();
            let neg = match negatives {
                NegativeScores::Shared(s) => NegativeScores::Shared(s.clone()),
                NegativeScores::PerPositive(lists) => {
                    if lists.len() != assignments.len() {
                        return Err(Error::InvalidArgument("negative lists do not match positives".into()));
                    }
                    NegativeScores::PerPositive(idx.iter().map(|&i| lists[i].clone()).collect())
                }
            };
            Ok((f, rank_scores(&pos, &neg, ks)?))
        })
        .collect()
}

/// `a\tb\tfactor\tcn\tppr\tfeatsim` per link, with a header line.
pub fn write_factors_tsv<W: Write>(w: &mut W, assignments: &[FactorAssignment]) -> std::io::Result<()> {
    writeln!(w, "a\tb\tfactor\tcn\tppr\tfeatsim")?;
    for fa in assignments {
        let [c, p, f] = fa.scores;
        writeln!(w, "{}\t{}\t{}\t{c}\t{p}\t{f}", fa.link.0, fa.link.1, fa.factor)?;
    }
    Ok(())
}

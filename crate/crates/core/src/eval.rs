//! Ranking metrics: each positive link is ranked against its negatives.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NegativeMode, Negatives};
use crate::heuristics::{self, HeuristicKind};
use crate::model::LpFormer;
use crate::ppr::PprCache;

pub const DEFAULT_KS: [usize; 5] = [1, 3, 10, 50, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub mrr: f64,
    /// Hits@K keyed by K.
    pub hits: BTreeMap<usize, f64>,
    pub num_positives: usize,
    pub negative_mode: NegativeMode,
    /// Set when there were no positives to rank.
    pub empty: bool,
}

/// `1 + #{negatives scoring above} + #{negatives tied}`: ties count against
/// the positive.
pub fn pessimistic_rank(positive: f64, negatives: &[f64]) -> usize {
    1 + negatives.iter().filter(|&&s| s >= positive).count()
}

/// Builds a report from per-positive ranks.
pub fn report_from_ranks(ranks: &[usize], ks: &[usize], mode: NegativeMode) -> RankingReport {
    let n = ranks.len();
    let mut hits = BTreeMap::new();
    for &k in ks {
        let h = if n == 0 {
            0.0
        } else {
            ranks.iter().filter(|&&r| r <= k).count() as f64 / n as f64
        };
        hits.insert(k, h);
    }
    let mrr = if n == 0 {
        0.0
    } else {
        ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n as f64
    };
    RankingReport {
        mrr,
        hits,
        num_positives: n,
        negative_mode: mode,
        empty: n == 0,
    }
}

/// Ranks precomputed positive scores. `negative_scores` holds either one
/// shared list or one list per positive.
pub fn rank_scores(
    positive_scores: &[f64],
    negative_scores: &NegativeScores,
    ks: &[usize],
) -> Result<RankingReport> {
    let ranks: Vec<usize> = match negative_scores {
        NegativeScores::Shared(neg) => {
            // sort once, then count ties-or-greater by binary search
            let mut sorted = neg.clone();
            sorted.sort_by(f64::total_cmp);
            positive_scores
                .iter()
                .map(|&p| 1 + sorted.len() - sorted.partition_point(|&s| s < p))
                .collect()
        }
        NegativeScores::PerPositive(lists) => {
            if lists.len() != positive_scores.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} positives but {} negative lists",
                    positive_scores.len(),
                    lists.len()
                )));
            }
            let width = lists.first().map_or(0, Vec::len);
            if lists.iter().any(|l| l.len() != width) {
                return Err(Error::InvalidArgument("per-positive negative lists differ in width".into()));
            }
            positive_scores
                .iter()
                .zip(lists)
                .map(|(&p, negs)| pessimistic_rank(p, negs))
                .collect()
        }
    };
    Ok(report_from_ranks(&ranks, ks, negative_scores.mode()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum NegativeScores {
    Shared(Vec<f64>),
    PerPositive(Vec<Vec<f64>>),
}

impl NegativeScores {
    pub fn mode(&self) -> NegativeMode {
        match self {
            Self::Shared(_) => NegativeMode::Shared,
            Self::PerPositive(_) => NegativeMode::PerPositive,
        }
    }
}

/// Anything that assigns a real score to a batch of links.
pub trait LinkScorer {
    fn score_links(&self, links: &[(usize, usize)]) -> Result<Vec<f64>>;
}

pub struct HeuristicScorer<'a> {
    pub graph: &'a Graph,
    pub cache: Option<&'a PprCache>,
    pub kind: HeuristicKind,
}

impl LinkScorer for HeuristicScorer<'_> {
    fn score_links(&self, links: &[(usize, usize)]) -> Result<Vec<f64>> {
        links
            .par_iter()
            .map(|&(a, b)| heuristics::score(self.graph, self.cache, self.kind, a, b))
            .collect()
    }
}

pub struct ModelScorer<'a> {
    pub model: &'a LpFormer,
    pub graph: &'a Graph,
    pub cache: &'a PprCache,
    pub batch_size: usize,
}

impl LinkScorer for ModelScorer<'_> {
    fn score_links(&self, links: &[(usize, usize)]) -> Result<Vec<f64>> {
        Ok(self
            .model
            .predict(self.graph, self.cache, links, self.batch_size, false)?
            .into_iter()
            .map(|p| p.probability)
            .collect())
    }
}

/// Scores every positive and negative with `scorer` and ranks them.
pub fn evaluate<S: LinkScorer + ?Sized>(
    scorer: &S,
    positives: &[(usize, usize)],
    negatives: &Negatives,
    ks: &[usize],
) -> Result<RankingReport> {
    let (pos, neg) = score_split(scorer, positives, negatives)?;
    rank_scores(&pos, &neg, ks)
}

/// Scores positives and negatives without ranking them.
pub fn score_split<S: LinkScorer + ?Sized>(
    scorer: &S,
    positives: &[(usize, usize)],
    negatives: &Negatives,
) -> Result<(Vec<f64>, NegativeScores)> {
    let pos = scorer.score_links(positives)?;
    let neg = match negatives {
        Negatives::Shared(list) => NegativeScores::Shared(scorer.score_links(list)?),
        Negatives::PerPositive { width, lists } => {
            if lists.len() != positives.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} positives but {} negative lists",
                    positives.len(),
                    lists.len()
                )));
            }
            let flat: Vec<_> = lists.iter().flatten().copied().collect();
            let scores = scorer.score_links(&flat)?;
            NegativeScores::PerPositive(scores.chunks((*width).max(1)).map(<[f64]>::to_vec).collect())
        }
    };
    let neg = match (neg, positives.len()) {
        (NegativeScores::PerPositive(v), n) if v.len() != n => NegativeScores::PerPositive(vec![vec![]; n]),
        (neg, _) => neg,
    };
    Ok((pos, neg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let neg = NegativeScores::PerPositive(vec![vec![0.0; 5]; 3]);
        let r = rank_scores(&[1.0; 3], &neg, &[1, 3]).unwrap();
        assert_eq!(r.mrr, 1.0);
        assert_eq!(r.hits[&1], 1.0);
    }

    #[test]
    fn full_tie_is_pessimistic() {
        assert_eq!(pessimistic_rank(0.5, &[0.5; 9]), 10);
        let r = rank_scores(&[0.5], &NegativeScores::Shared(vec![0.5; 9]), &[1, 10]).unwrap();
        assert!((r.mrr - 0.1).abs() < 1e-15);
        assert_eq!(r.hits[&1], 0.0);
        assert_eq!(r.hits[&10], 1.0);
    }

    #[test]
    fn shared_and_per_positive_agree() {
        let negs = vec![0.1, 0.7, 0.3, 0.7, 0.9];
        let pos = [0.7, 0.95, 0.0];
        let a = rank_scores(&pos, &NegativeScores::Shared(negs.clone()), &[1, 3]).unwrap();
        let b = rank_scores(&pos, &NegativeScores::PerPositive(vec![negs; 3]), &[1, 3]).unwrap();
        assert_eq!(a.mrr, b.mrr);
        assert_eq!(a.hits, b.hits);
    }

    #[test]
    fn width_mismatch_rejected() {
        let neg = NegativeScores::PerPositive(vec![vec![0.0; 2], vec![0.0; 3]]);
        assert!(rank_scores(&[1.0, 1.0], &neg, &[1]).is_err());
    }

    #[test]
    fn empty_report_is_flagged() {
        let r = rank_scores(&[], &NegativeScores::Shared(vec![0.0]), &[1]).unwrap();
        assert!(r.empty);
        assert_eq!(r.num_positives, 0);
    }
}

//! Minibatch training with per-epoch negative resampling and early stopping
//! on validation MRR.

use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, ParamStore, Tape};
use crate::context::context_batch;
use crate::error::{Error, Result};
use crate::eval::{evaluate, ModelScorer, DEFAULT_KS};
use crate::graph::{Graph, Negatives};
use crate::model::{normalized_adjacency, LpFormer};
use crate::ppr::PprCache;

/// Rejection attempts allowed per requested negative.
pub const ATTEMPTS_PER_SAMPLE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Negatives drawn per positive per epoch.
    pub neg_ratio: usize,
    /// Learning-rate multiplier applied once per epoch.
    pub lr_decay: f64,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 256,
            patience: 20,
            neg_ratio: 1,
            lr_decay: 1.0,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.neg_ratio == 0 {
            return Err(Error::Config("neg_ratio must be >= 1".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("lr_decay must lie in (0,1], got {}", self.lr_decay)));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", a.lr)));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return Err(Error::Config("adam betas must lie in [0,1)".into()));
        }
        if !(a.eps > 0.0) || !(a.weight_decay >= 0.0) {
            return Err(Error::Config("adam eps must be positive and weight_decay non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub val_mrr: Option<f64>,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Model holding the best-validation parameters (last epoch without
    /// validation data).
    pub model: LpFormer,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_mrr: Option<f64>,
}

/// Draws `ratio` corruptions per positive by replacing one endpoint with a
/// uniform node, rejecting self pairs and existing edges of `g`.
pub fn sample_negatives<R: Rng>(
    g: &Graph,
    positives: &[(usize, usize)],
    ratio: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    if ratio == 0 {
        return Err(Error::InvalidArgument("negative ratio must be >= 1".into()));
    }
    let n = g.num_nodes();
    let mut out = Vec::with_capacity(positives.len() * ratio);
    for &(a, b) in positives {
        g.check_node(a)?;
        g.check_node(b)?;
        for _ in 0..ratio {
            let mut attempts = 0;
            loop {
                if attempts == ATTEMPTS_PER_SAMPLE {
                    return Err(Error::SamplingExhausted { attempts });
                }
                attempts += 1;
                let v = rng.gen_range(0..n);
                let pair = if rng.gen_bool(0.5) { (a, v) } else { (v, b) };
                if pair.0 != pair.1 && !g.has_edge(pair.0, pair.1) {
                    out.push(pair);
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Validation positives and their negatives.
pub struct Validation<'a> {
    pub positives: &'a [(usize, usize)],
    pub negatives: &'a Negatives,
}

/// Trains `model` on `positives` (edges of `g`) with BCE against sampled
/// negatives. Calls `on_epoch` after each epoch.
pub fn train(
    g: &Graph,
    cache: &PprCache,
    mut model: LpFormer,
    positives: &[(usize, usize)],
    validation: Option<Validation<'_>>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model.config().validate()?;
    if positives.is_empty() {
        return Err(Error::InvalidArgument("no training positives".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shared_adj = Rc::new(normalized_adjacency(g, &[]));
    let ctx_params = model.config().context;
    let mask_target = model.config().mask_target;
    let mut order: Vec<(usize, usize)> = positives.to_vec();

    let mut log = Vec::new();
    let mut best: Option<(f64, ParamStore, usize)> = None;
    let mut since_best = 0;
    let mut adam = cfg.adam;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let negs = sample_negatives(g, chunk, cfg.neg_ratio, &mut rng)?;
            let mut links = chunk.to_vec();
            links.extend_from_slice(&negs);
            let mut labels = vec![1.0; chunk.len()];
            labels.resize(links.len(), 0.0);
            let contexts = context_batch(g, cache, &links, &ctx_params)?;
            let adj = if mask_target {
                Rc::new(normalized_adjacency(g, chunk))
            } else {
                shared_adj.clone()
            };
            let mut tape = Tape::with_dropout(ChaCha8Rng::seed_from_u64(rng.gen()));
            let loss = model.loss(&mut tape, model.params(), g, &adj, &contexts, &labels)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Numeric(format!("loss became {value} at epoch {epoch}")));
            }
            tape.backward(loss)?;
            let store = model.params_mut();
            store.zero_grad();
            tape.accumulate_grads(store);
            store.adam_step(&adam)?;
            if let Some(id) = store.ids().find(|&id| store.tensor(id).values().iter().any(|x| !x.is_finite())) {
                return Err(Error::Numeric(format!(
                    "parameter {} became non-finite at epoch {epoch}",
                    store.name(id)
                )));
            }
            total += value * links.len() as f64;
            seen += links.len();
        }

        let val_mrr = match &validation {
            Some(v) if !v.positives.is_empty() => {
                let scorer = ModelScorer {
                    model: &model,
                    graph: g,
                    cache,
                    batch_size: cfg.batch_size,
                };
                Some(evaluate(&scorer, v.positives, v.negatives, &DEFAULT_KS)?.mrr)
            }
            _ => None,
        };
        let entry = EpochLog {
            epoch,
            loss: total / seen as f64,
            val_mrr,
            lr: adam.lr,
        };
        on_epoch(&entry);
        log.push(entry);

        match val_mrr {
            Some(m) => {
                if best.as_ref().is_none_or(|(b, _, _)| m > *b) {
                    best = Some((m, model.params().clone(), epoch));
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= cfg.patience {
                        break;
                    }
                }
            }
            None => best = Some((f64::NAN, model.params().clone(), epoch)),
        }
        adam.lr *= cfg.lr_decay;
    }

    let (best_val_mrr, best_epoch) = match best {
        Some((m, params, epoch)) => {
            model.params_mut().load_values_from(&params)?;
            ((!m.is_nan()).then_some(m), epoch)
        }
        None => (None, 0),
    };
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
        best_val_mrr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_has_no_negatives() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)], None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = sample_negatives(&g, &[(0, 1)], 1, &mut rng).unwrap_err();
        assert!(matches!(err, Error::SamplingExhausted { .. }));
    }

    #[test]
    fn sampling_is_seeded_and_avoids_edges() {
        let edges: Vec<_> = (0..19).map(|i| (i, i + 1)).collect();
        let g = Graph::from_edges(20, &edges, None).unwrap();
        let draw = |s| sample_negatives(&g, &edges, 3, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
        let a = draw(7);
        assert_eq!(a, draw(7));
        assert_eq!(a.len(), edges.len() * 3);
        assert!(a.iter().all(|&(u, v)| u != v && !g.has_edge(u, v)));
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            lr_decay: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            neg_ratio: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}

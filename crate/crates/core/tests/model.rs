mod common;

use std::rc::Rc;

use lpform_core::autodiff::{grad_check, ParamStore, Tape};
use lpform_core::context::{context_batch, select_context, ContextParams, Thresholds};
use lpform_core::graph::NodeType;
use lpform_core::model::{normalized_adjacency, LpFormer, ModelConfig};
use lpform_core::ppr::{power_iteration_ppr, PprCache};
use proptest::prelude::*;

fn open_config(hidden: usize) -> ModelConfig {
    ModelConfig {
        hidden_dim: hidden,
        rpe_hidden_dim: 4,
        context: ContextParams::uncapped(Thresholds::uniform(0.0)),
        ..ModelConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pairwise_encoding_matches_dense_sum(n in 3usize..16, p in 0.1f64..0.5, seed in any::<u64>()) {
        let g = common::connected_graph(&mut common::rng(seed), n, p, 3);
        let model = LpFormer::new(open_config(5), 3, seed).unwrap();
        let cache = PprCache::exact(&g, 0.15, 400).unwrap();
        let (a, b) = (0, n - 1);
        let ctx = select_context(&g, &cache, a, b, &model.config().context).unwrap();
        prop_assert_eq!(ctx.len(), n - 2);

        let h = common::oracle::gcn(&model, &g);
        let ra = power_iteration_ppr(&g, a, 0.15, 400).unwrap();
        let rb = power_iteration_ppr(&g, b, 0.15, 400).unwrap();
        let all: Vec<_> = (0..n).filter(|&u| u != a && u != b).map(|u| (u, ra[u], rb[u])).collect();
        let want = common::oracle::pairwise(&model, &g, &h, a, b, &all);
        let got = model.pairwise_values(&g, &[ctx]).unwrap();
        for (x, y) in got.values().iter().zip(&want) {
            prop_assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
        }
        let reps = model.node_representations(&g).unwrap();
        for v in 0..n {
            for (x, y) in reps.row(v).iter().zip(&h[v]) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rpe_is_order_invariant(x in 0.0f64..1.0, y in 0.0f64..1.0, seed in any::<u64>()) {
        let model = LpFormer::new(open_config(4), 3, seed).unwrap();
        for t in NodeType::ALL {
            let f = model.rpe_values(x, y, t).unwrap();
            prop_assert_eq!(&f, &model.rpe_values(y, x, t).unwrap());
            let want = common::oracle::rpe(&model, x, y, t);
            for (p, q) in f.iter().zip(&want) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_sums_to_one_per_link(n in 4usize..20, seed in any::<u64>(), heads in 1usize..3) {
        let g = common::connected_graph(&mut common::rng(seed), n, 0.2, 3);
        let cfg = ModelConfig { attention_heads: heads, ..open_config(4) };
        let model = LpFormer::new(cfg, 3, seed).unwrap();
        let cache = PprCache::exact(&g, 0.15, 200).unwrap();
        let links = [(0, n - 1), (1, 2), (n - 2, 0)];
        let preds = model.predict(&g, &cache, &links, 2, true).unwrap();
        for p in preds {
            let att = p.attention.unwrap();
            let s: f64 = att.iter().map(|x| x.1).sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
            prop_assert!(p.probability > 0.0 && p.probability < 1.0);
        }
    }
}

#[test]
fn full_loss_passes_grad_check() {
    let g = common::toy_graph();
    let cfg = ModelConfig {
        attention_layers: 2,
        attention_heads: 2,
        ..open_config(4)
    };
    let model = LpFormer::new(cfg, 10, 7).unwrap();
    let cache = PprCache::exact(&g, 0.15, 200).unwrap();
    let links = [(0, 1), (4, 5), (0, 9), (2, 7)];
    let labels = [1.0, 1.0, 0.0, 0.0];
    let contexts = context_batch(&g, &cache, &links, &model.config().context).unwrap();
    let adj = Rc::new(normalized_adjacency(&g, &[]));
    let mut store: ParamStore = model.params().clone();
    let rep = grad_check(&mut store, 1e-6, None, 0, |s, t: &mut Tape| {
        model.loss(t, s, &g, &adj, &contexts, &labels)
    })
    .unwrap();
    assert!(rep.max_rel_error <= 1e-4, "{rep:?}");
    assert_eq!(rep.coords_checked, store.num_scalars());
}

#[test]
fn symmetrized_scores_ignore_endpoint_order() {
    let g = common::toy_graph();
    let cfg = ModelConfig {
        symmetrize: true,
        ..open_config(6)
    };
    let model = LpFormer::new(cfg, 10, 3).unwrap();
    let cache = PprCache::exact(&g, 0.15, 200).unwrap();
    let fwd = model.predict(&g, &cache, &[(1, 8), (3, 4)], 8, false).unwrap();
    let bwd = model.predict(&g, &cache, &[(8, 1), (4, 3)], 8, false).unwrap();
    for (x, y) in fwd.iter().zip(&bwd) {
        assert_eq!(x.probability, y.probability);
    }
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let g = common::toy_graph();
    let model = LpFormer::new(open_config(6), 10, 4).unwrap();
    let cache = PprCache::exact(&g, 0.15, 200).unwrap();
    let mut bytes = Vec::new();
    model.params().write_to(&mut bytes).unwrap();
    let back = ParamStore::read_from(&mut bytes.as_slice()).unwrap();
    let reloaded = LpFormer::from_params(*model.config(), 10, &back).unwrap();
    let links = [(0, 5), (2, 9)];
    let x = model.predict(&g, &cache, &links, 4, false).unwrap();
    let y = reloaded.predict(&g, &cache, &links, 4, false).unwrap();
    for (p, q) in x.iter().zip(&y) {
        // weights are stored as f32
        assert!((p.probability - q.probability).abs() < 1e-5);
    }
    let wrong = LpFormer::from_params(ModelConfig { hidden_dim: 7, ..*model.config() }, 10, &back);
    assert!(wrong.is_err());
}

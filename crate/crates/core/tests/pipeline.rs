mod common;

use std::collections::HashSet;

use lpform_core::eval::{evaluate, score_split, HeuristicScorer, DEFAULT_KS};
use lpform_core::factors::{assign_factors, per_factor_report, Factor};
use lpform_core::graph::{load_graph, EdgeSplit, Features, Graph, Negatives};
use lpform_core::heuristics::HeuristicKind;
use lpform_core::ppr::{precompute_cache, PprCache};
use lpform_core::train::sample_negatives;
use rand::Rng;

#[test]
fn cora_scale_negatives_avoid_train_edges() {
    let g = common::cora_like(1);
    assert_eq!(g.num_nodes(), 2708);
    assert_eq!(g.num_edges(), 5278);
    let train: HashSet<_> = g.edges().into_iter().collect();
    let positives: Vec<_> = g.edges().into_iter().take(1000).collect();
    let negs = sample_negatives(&g, &positives, 1, &mut common::rng(4)).unwrap();
    assert_eq!(negs.len(), 1000);
    for (u, v) in negs {
        assert!(!train.contains(&(u.min(v), u.max(v))));
    }
}

#[test]
fn clique_fixture_has_local_links() {
    // one clique plus a sparse tail; features carry no signal
    let mut rng = common::rng(8);
    let n = 40;
    let mut edges = Vec::new();
    for u in 0..12 {
        for v in u + 1..12 {
            edges.push((u, v));
        }
    }
    for v in 12..n {
        edges.push((v - 1, v));
    }
    let feats = (0..n * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g = Graph::from_edges(n, &edges, Some(Features::new(n, 8, feats).unwrap())).unwrap();
    let cache = precompute_cache(&g, 0.15, 1e-7).unwrap();
    let links: Vec<_> = (0..60).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).filter(|(a, b)| a != b).collect();
    let out = assign_factors(&g, &cache, &links, 90.0).unwrap();
    assert!(out.iter().any(|f| f.factor == Factor::Local));

    let pos: Vec<f64> = (0..out.len()).map(|i| i as f64).collect();
    let neg = lpform_core::eval::NegativeScores::Shared(vec![5.0, 15.0]);
    let reports = per_factor_report(&out, &pos, &neg, &[1, 3]).unwrap();
    let grouped: usize = reports.iter().map(|(_, r)| r.num_positives).sum();
    let none = out.iter().filter(|f| f.factor == Factor::None).count();
    assert_eq!(grouped + none, out.len());
}

#[test]
fn heuristic_evaluation_on_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("train.txt"), "0 1\n1 2\n2 3\n3 0\n0 2\n4 5\n").unwrap();
    std::fs::write(p.join("test.txt"), "1 3\n").unwrap();
    std::fs::write(p.join("test_neg.txt"), "0 4\n1 5\n2 4\n").unwrap();
    let split = EdgeSplit::load_dir(p).unwrap();
    split.validate(6).unwrap();
    let g = Graph::from_edges(6, &split.train, None).unwrap();
    let scorer = HeuristicScorer {
        graph: &g,
        cache: None,
        kind: HeuristicKind::Cn,
    };
    let rep = evaluate(&scorer, &split.test, &split.test_neg, &DEFAULT_KS).unwrap();
    // cn(1,3) = 2, every negative has cn 0
    assert_eq!(rep.mrr, 1.0);

    std::fs::write(p.join("test_neg_k.txt"), "0 4 1 5\n").unwrap();
    let split = EdgeSplit::load_dir(p).unwrap();
    assert!(matches!(split.test_neg, Negatives::PerPositive { width: 2, .. }));
    let (pos, neg) = score_split(&scorer, &split.test, &split.test_neg).unwrap();
    assert_eq!(pos, vec![2.0]);
    assert_eq!(neg, lpform_core::eval::NegativeScores::PerPositive(vec![vec![0.0, 0.0]]));
}

#[test]
fn cache_file_round_trip_and_graph_loading() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("g.tsv");
    std::fs::write(&edges, "# comment\n0\t1\n1 2\n2 3\n3 3\n").unwrap();
    let g = load_graph(&edges, None, None).unwrap();
    assert_eq!(g.num_nodes(), 4);
    assert_eq!(g.cleaning().self_loops, 1);
    assert_eq!(g.features().dim(), 16);

    let cache = precompute_cache(&g, 0.15, 1e-7).unwrap();
    let path = dir.path().join("c.lppr");
    cache.write(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"LPPR");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
    assert_eq!(PprCache::read(&path).unwrap(), cache);

    std::fs::write(&edges, "0 x\n").unwrap();
    assert!(matches!(load_graph(&edges, None, None), Err(lpform_core::Error::Parse { line: 1, .. })));
}

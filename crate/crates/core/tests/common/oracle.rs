//! Dense re-implementation of the model forward pass, read straight from the
//! parameter tensors.

use lpform_core::autodiff::Tensor;
use lpform_core::graph::{Graph, NodeType};
use lpform_core::model::LpFormer;

pub type Mat = Vec<Vec<f64>>;

fn param(model: &LpFormer, name: &str) -> Mat {
    let p = model.params();
    let t: &Tensor = p.tensor(p.id(name).unwrap_or_else(|| panic!("no parameter {name}")));
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn matmul(x: &Mat, w: &Mat) -> Mat {
    x.iter()
        .map(|row| {
            (0..w[0].len())
                .map(|j| row.iter().zip(w).map(|(a, wr)| a * wr[j]).sum())
                .collect()
        })
        .collect()
}

fn vecmat(x: &[f64], w: &Mat) -> Vec<f64> {
    matmul(&vec![x.to_vec()], w).remove(0)
}

fn add_bias(x: &mut [f64], b: &Mat) {
    x.iter_mut().zip(&b[0]).for_each(|(v, c)| *v += c);
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// `relu(D^-1/2 (A+I) D^-1/2 X W + b)` per layer, with dense matrices.
pub fn gcn(model: &LpFormer, g: &Graph) -> Mat {
    let n = g.num_nodes();
    let adj = crate::common::dense_adjacency(g);
    let deg: Vec<f64> = (0..n).map(|u| 1.0 + adj[u].iter().filter(|&&e| e).count() as f64).collect();
    let mut norm = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in 0..n {
            if u == v || adj[u][v] {
                norm[u][v] = 1.0 / (deg[u] * deg[v]).sqrt();
            }
        }
    }
    let f = g.features();
    let mut h: Mat = (0..n).map(|v| f.row(v).to_vec()).collect();
    for l in 0..model.config().gcn_layers {
        let w = param(model, &format!("gcn.{l}.w"));
        let b = param(model, &format!("gcn.{l}.b"));
        let mut z = matmul(&norm, &matmul(&h, &w));
        for row in &mut z {
            add_bias(row, &b);
            row.iter_mut().for_each(|v| *v = relu(*v));
        }
        h = z;
    }
    h
}

fn mlp(model: &LpFormer, prefix: &str, x: &[f64]) -> Vec<f64> {
    let mut h = vecmat(x, &param(model, &format!("{prefix}.w1")));
    add_bias(&mut h, &param(model, &format!("{prefix}.b1")));
    h.iter_mut().for_each(|v| *v = relu(*v));
    let mut o = vecmat(&h, &param(model, &format!("{prefix}.w2")));
    add_bias(&mut o, &param(model, &format!("{prefix}.b2")));
    o
}

/// Per-type positional encoding `MLP(p_au, p_bu) + MLP(p_bu, p_au)`.
pub fn rpe(model: &LpFormer, pau: f64, pbu: f64, kind: NodeType) -> Vec<f64> {
    let name = match kind {
        NodeType::Cn => "cn",
        NodeType::OneHop => "one_hop",
        NodeType::GtOneHop => "gt_one_hop",
    };
    let prefix = format!("rpe.{name}");
    let x = mlp(model, &prefix, &[pau, pbu]);
    let y = mlp(model, &prefix, &[pbu, pau]);
    x.iter().zip(&y).map(|(p, q)| p + q).collect()
}

/// Single-layer, single-head pairwise encoding summed over `context`, each
/// entry `(u, ppr(a,u), ppr(b,u))`.
pub fn pairwise(model: &LpFormer, g: &Graph, h: &Mat, a: usize, b: usize, context: &[(usize, f64, f64)]) -> Vec<f64> {
    let proj = param(model, "att.0.0.proj");
    let att = param(model, "att.0.0.att");
    let value = param(model, "att.0.0.value");
    let slope = model.config().leaky_slope;
    let (pa, pb) = (vecmat(&h[a], &proj), vecmat(&h[b], &proj));
    let mut logits = Vec::new();
    let mut values = Vec::new();
    for &(u, pau, pbu) in context {
        let r = rpe(model, pau, pbu, g.node_type(a, b, u).unwrap());
        let pu = vecmat(&h[u], &proj);
        let z: Vec<f64> = pa.iter().chain(&pb).chain(&pu).chain(&r).map(|&v| if v > 0.0 { v } else { slope * v }).collect();
        logits.push(z.iter().zip(&att).map(|(v, w)| v * w[0]).sum::<f64>());
        let input: Vec<f64> = h[u].iter().chain(&r).copied().collect();
        values.push(vecmat(&input, &value));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let mut out = vec![0.0; value[0].len()];
    for (e, v) in exps.iter().zip(&values) {
        out.iter_mut().zip(v).for_each(|(o, x)| *o += e / z * x);
    }
    out
}

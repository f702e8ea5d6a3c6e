//! The link predictor: GCN node encoder, PPR-based relative positional
//! encodings, cross-attention from each target link to its context nodes,
//! and an MLP score head over `h_a * h_b`, the pairwise encoding and the
//! per-type context counts.

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, ParamId, ParamStore, SparseMatrix, Tape, Tensor, Var};
use crate::context::{context_batch, ContextParams, ContextSet};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeType};
use crate::ppr::{PprCache, DEFAULT_ALPHA};

/// Structural ablations. Each flag removes or replaces exactly one term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablations {
    /// Uniform unit attention weights and no positional encoding.
    pub no_att: bool,
    /// Drop the node-representation terms from the attention logits.
    pub no_feat_att: bool,
    /// Drop the positional encoding from the attention logits.
    pub no_rpe_att: bool,
    /// Learned per-type embedding instead of the PPR MLPs.
    pub rpe_embed: bool,
    /// One PPR MLP for all node types.
    pub rpe_shared: bool,
    /// Drop the three context counts from the score head.
    pub no_counts: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub gcn_layers: usize,
    pub attention_layers: usize,
    pub attention_heads: usize,
    pub leaky_slope: f64,
    pub dropout: f64,
    pub rpe_hidden_dim: usize,
    pub context: ContextParams,
    pub ppr_alpha: f64,
    pub ppr_eps: f64,
    /// Average the logits of both endpoint orders.
    pub symmetrize: bool,
    /// Remove each batch's positive target edges from the GCN adjacency
    /// during training.
    pub mask_target: bool,
    pub ablations: Ablations,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            gcn_layers: 2,
            attention_layers: 1,
            attention_heads: 1,
            leaky_slope: 0.2,
            dropout: 0.0,
            rpe_hidden_dim: 16,
            context: ContextParams::default(),
            ppr_alpha: DEFAULT_ALPHA,
            ppr_eps: 1e-7,
            symmetrize: false,
            mask_target: false,
            ablations: Ablations::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("hidden_dim", self.hidden_dim),
            ("gcn_layers", self.gcn_layers),
            ("attention_layers", self.attention_layers),
            ("attention_heads", self.attention_heads),
            ("rpe_hidden_dim", self.rpe_hidden_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0,1), got {}", self.dropout)));
        }
        if !(self.ppr_alpha > 0.0 && self.ppr_alpha < 1.0) {
            return Err(Error::Config(format!("ppr_alpha must lie in (0,1), got {}", self.ppr_alpha)));
        }
        if !(self.ppr_eps > 0.0) {
            return Err(Error::Config(format!("ppr_eps must be positive, got {}", self.ppr_eps)));
        }
        if !(self.leaky_slope.is_finite()) {
            return Err(Error::Config("leaky_slope must be finite".into()));
        }
        self.context.thresholds.validate()?;
        let ab = &self.ablations;
        if ab.no_feat_att && ab.no_rpe_att {
            return Err(Error::Config("no_feat_att and no_rpe_att leave no attention input".into()));
        }
        if ab.rpe_embed && ab.rpe_shared {
            return Err(Error::Config("rpe_embed and rpe_shared are mutually exclusive".into()));
        }
        Ok(())
    }

    fn uses_rpe(&self) -> bool {
        !self.ablations.no_att
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPrediction {
    pub link: (usize, usize),
    pub probability: f64,
    /// Final-layer attention weight of each context node, head-averaged.
    pub attention: Option<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, Copy)]
struct Mlp {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

impl Mlp {
    fn new(store: &mut ParamStore, prefix: &str, dims: [usize; 3], rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(Self {
            w1: store.add_glorot(&format!("{prefix}.w1"), dims[0], dims[1], rng)?,
            b1: store.add_zeros(&format!("{prefix}.b1"), 1, dims[1])?,
            w2: store.add_glorot(&format!("{prefix}.w2"), dims[1], dims[2], rng)?,
            b2: store.add_zeros(&format!("{prefix}.b2"), 1, dims[2])?,
        })
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, dropout: f64) -> Result<Var> {
        let (w1, b1, w2, b2) = (
            tape.param(store, self.w1),
            tape.param(store, self.b1),
            tape.param(store, self.w2),
            tape.param(store, self.b2),
        );
        let h = tape.affine(x, w1, b1)?;
        let h = tape.relu(h);
        let h = tape.dropout(h, dropout)?;
        tape.affine(h, w2, b2)
    }
}

#[derive(Debug, Clone)]
enum RpeIds {
    PerType([Mlp; 3]),
    Shared(Mlp),
    Embed(ParamId),
    Disabled,
}

#[derive(Debug, Clone, Copy)]
struct HeadIds {
    proj: ParamId,
    att: Option<ParamId>,
    value: ParamId,
}

#[derive(Debug, Clone)]
struct Ids {
    gcn: Vec<(ParamId, ParamId)>,
    rpe: RpeIds,
    layers: Vec<Vec<HeadIds>>,
    head: Mlp,
}

/// Context nodes of a batch flattened into aligned index arrays.
struct FlatContext {
    segments: Rc<Vec<usize>>,
    endpoint_a: Rc<Vec<usize>>,
    endpoint_b: Rc<Vec<usize>>,
    nodes: Rc<Vec<usize>>,
    kinds: Vec<NodeType>,
    ppr_ab: Tensor,
    ppr_ba: Tensor,
}

impl FlatContext {
    fn new(contexts: &[ContextSet]) -> Self {
        let m: usize = contexts.iter().map(ContextSet::len).sum();
        let mut segments = Vec::with_capacity(m);
        let (mut ea, mut eb, mut nodes, mut kinds) = (vec![], vec![], vec![], vec![]);
        let (mut ab, mut ba) = (Vec::with_capacity(2 * m), Vec::with_capacity(2 * m));
        for (s, ctx) in contexts.iter().enumerate() {
            for c in &ctx.nodes {
                segments.push(s);
                ea.push(ctx.link.0);
                eb.push(ctx.link.1);
                nodes.push(c.node);
                kinds.push(c.kind);
                ab.extend([c.ppr_au, c.ppr_bu]);
                ba.extend([c.ppr_bu, c.ppr_au]);
            }
        }
        Self {
            segments: Rc::new(segments),
            endpoint_a: Rc::new(ea),
            endpoint_b: Rc::new(eb),
            nodes: Rc::new(nodes),
            kinds,
            ppr_ab: Tensor::matrix(m, 2, ab).expect("2 columns"),
            ppr_ba: Tensor::matrix(m, 2, ba).expect("2 columns"),
        }
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }
}

/// Output of the attention stack for one batch.
pub struct PairwiseOutput {
    /// `B x hidden` pairwise encodings.
    pub encoding: Var,
    /// Final-layer attention weights per context node (head-averaged), if any.
    pub weights: Option<Var>,
}

/// Symmetric-normalized adjacency with self-loops, `D^-1/2 (A + I) D^-1/2`,
/// optionally without the given undirected edges.
pub fn normalized_adjacency(g: &Graph, removed: &[(usize, usize)]) -> SparseMatrix {
    let n = g.num_nodes();
    let mut drop: Vec<(usize, usize)> = removed
        .iter()
        .flat_map(|&(u, v)| [(u, v), (v, u)])
        .collect();
    drop.sort_unstable();
    let keep = |u: usize, v: usize| drop.binary_search(&(u, v)).is_err();
    let mut deg = vec![1.0f64; n];
    for u in 0..n {
        deg[u] += g.adj(u).iter().filter(|&&v| keep(u, v)).count() as f64;
    }
    let mut row_offsets = vec![0];
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    for u in 0..n {
        let mut row: Vec<usize> = g.adj(u).iter().copied().filter(|&v| keep(u, v)).collect();
        row.push(u);
        row.sort_unstable();
        for v in row {
            col_indices.push(v);
            values.push(1.0 / (deg[u] * deg[v]).sqrt());
        }
        row_offsets.push(col_indices.len());
    }
    SparseMatrix {
        rows: n,
        cols: n,
        row_offsets,
        col_indices,
        values,
    }
}

fn canonical(link: (usize, usize)) -> (usize, usize) {
    (link.0.min(link.1), link.0.max(link.1))
}

#[derive(Debug, Clone)]
pub struct LpFormer {
    config: ModelConfig,
    in_dim: usize,
    params: ParamStore,
    ids: Ids,
}

impl LpFormer {
    /// Fresh model with Glorot-initialized weights drawn from `seed`.
    pub fn new(config: ModelConfig, in_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if in_dim == 0 {
            return Err(Error::Config("input feature dimension must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let h = config.hidden_dim;
        let r = config.rpe_hidden_dim;
        let ab = config.ablations;

        let mut gcn = Vec::new();
        for l in 0..config.gcn_layers {
            let d_in = if l == 0 { in_dim } else { h };
            gcn.push((
                store.add_glorot(&format!("gcn.{l}.w"), d_in, h, &mut rng)?,
                store.add_zeros(&format!("gcn.{l}.b"), 1, h)?,
            ));
        }

        let rpe = if !config.uses_rpe() {
            RpeIds::Disabled
        } else if ab.rpe_embed {
            RpeIds::Embed(store.add_glorot("rpe.embed", 3, r, &mut rng)?)
        } else if ab.rpe_shared {
            RpeIds::Shared(Mlp::new(&mut store, "rpe.shared", [2, r, r], &mut rng)?)
        } else {
            let mut mlp = |name: &str| Mlp::new(&mut store, &format!("rpe.{name}"), [2, r, r], &mut rng);
            RpeIds::PerType([mlp("cn")?, mlp("one_hop")?, mlp("gt_one_hop")?])
        };
        let rpe_dim = if config.uses_rpe() { r } else { 0 };

        let att_width = if ab.no_feat_att { 0 } else { 3 * h } + if ab.no_rpe_att { 0 } else { rpe_dim };
        let mut layers = Vec::new();
        for l in 0..config.attention_layers {
            let mut heads = Vec::new();
            for k in 0..config.attention_heads {
                let p = format!("att.{l}.{k}");
                heads.push(HeadIds {
                    proj: store.add_glorot(&format!("{p}.proj"), h, h, &mut rng)?,
                    att: if ab.no_att {
                        None
                    } else {
                        Some(store.add_glorot(&format!("{p}.att"), att_width, 1, &mut rng)?)
                    },
                    value: store.add_glorot(&format!("{p}.value"), h + rpe_dim, h, &mut rng)?,
                });
            }
            layers.push(heads);
        }

        let head_in = 2 * h + if ab.no_counts { 0 } else { 3 };
        let head = Mlp::new(&mut store, "head", [head_in, h, 1], &mut rng)?;

        Ok(Self {
            config,
            in_dim,
            params: store,
            ids: Ids {
                gcn,
                rpe,
                layers,
                head,
            },
        })
    }

    /// Rebuilds a model around stored parameter values (e.g. a checkpoint).
    pub fn from_params(config: ModelConfig, in_dim: usize, params: &ParamStore) -> Result<Self> {
        let mut model = Self::new(config, in_dim, 0)?;
        if params.len() != model.params.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, model expects {}",
                params.len(),
                model.params.len()
            )));
        }
        model.params.load_values_from(params)?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Width of the score-head input vector.
    pub fn head_input_width(&self) -> usize {
        self.params.tensor(self.ids.head.w1).rows()
    }

    /// GCN over the whole graph, ReLU after every layer.
    pub fn encode_nodes(&self, tape: &mut Tape, store: &ParamStore, g: &Graph, adj: &Rc<SparseMatrix>) -> Result<Var> {
        let f = g.features();
        if f.dim() != self.in_dim {
            return Err(Error::shape(
                "encode_nodes",
                format!("features have width {}, model expects {}", f.dim(), self.in_dim),
            ));
        }
        let mut h = tape.constant(Tensor::matrix(g.num_nodes(), f.dim(), f.as_slice().to_vec())?);
        for &(w, b) in &self.ids.gcn {
            let x = tape.dropout(h, self.config.dropout)?;
            let (wv, bv) = (tape.param(store, w), tape.param(store, b));
            let xw = tape.matmul(x, wv)?;
            let prop = tape.spmm(adj.clone(), xw)?;
            let ones = tape.constant(Tensor::column(vec![1.0; g.num_nodes()]));
            let bias = tape.matmul(ones, bv)?;
            let z = tape.add(prop, bias)?;
            h = tape.relu(z);
        }
        Ok(h)
    }

    fn rpe(&self, tape: &mut Tape, store: &ParamStore, flat: &FlatContext) -> Result<Option<Var>> {
        let pair = |tape: &mut Tape, mlp: &Mlp| -> Result<Var> {
            let ab = tape.constant(flat.ppr_ab.clone());
            let ba = tape.constant(flat.ppr_ba.clone());
            let x = mlp.forward(tape, store, ab, 0.0)?;
            let y = mlp.forward(tape, store, ba, 0.0)?;
            tape.add(x, y)
        };
        Ok(match &self.ids.rpe {
            RpeIds::Disabled => None,
            RpeIds::Embed(id) => {
                let table = tape.param(store, *id);
                let idx = Rc::new(flat.kinds.iter().map(|k| k.index()).collect());
                Some(tape.gather_rows(table, idx)?)
            }
            RpeIds::Shared(mlp) => Some(pair(tape, mlp)?),
            RpeIds::PerType(mlps) => {
                let mut total: Option<Var> = None;
                for t in NodeType::ALL {
                    if !flat.kinds.contains(&t) {
                        continue;
                    }
                    let out = pair(tape, &mlps[t.index()])?;
                    let mask = Rc::new(flat.kinds.iter().map(|&k| if k == t { 1.0 } else { 0.0 }).collect());
                    let out = tape.scale_rows(out, mask)?;
                    total = Some(match total {
                        None => out,
                        Some(acc) => tape.add(acc, out)?,
                    });
                }
                total
            }
        })
    }

    /// Stacked cross-attention from each link to its context. Layers before
    /// the last add their attention-weighted messages to the context node
    /// states; the last layer pools them into the pairwise encoding.
    pub fn pairwise_encoding(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        node_repr: Var,
        contexts: &[ContextSet],
    ) -> Result<PairwiseOutput> {
        let h = self.config.hidden_dim;
        let batch = contexts.len();
        let flat = FlatContext::new(contexts);
        if flat.len() == 0 {
            return Ok(PairwiseOutput {
                encoding: tape.constant(Tensor::zeros(batch, h)),
                weights: None,
            });
        }
        let ab = self.config.ablations;
        let rpe = self.rpe(tape, store, &flat)?;
        let ha = tape.gather_rows(node_repr, flat.endpoint_a.clone())?;
        let hb = tape.gather_rows(node_repr, flat.endpoint_b.clone())?;
        let mut state = tape.gather_rows(node_repr, flat.nodes.clone())?;

        let num_layers = self.ids.layers.len();
        let mut encoding = None;
        let mut last_weights = None;
        for (l, heads) in self.ids.layers.iter().enumerate() {
            let last = l + 1 == num_layers;
            let mut outs = Vec::with_capacity(heads.len());
            let mut head_weights = Vec::with_capacity(heads.len());
            for head in heads {
                let weights = match head.att {
                    None => tape.constant(Tensor::column(vec![1.0; flat.len()])),
                    Some(att) => {
                        let mut parts = Vec::new();
                        if !ab.no_feat_att {
                            let proj = tape.param(store, head.proj);
                            parts.push(tape.matmul(ha, proj)?);
                            parts.push(tape.matmul(hb, proj)?);
                            parts.push(tape.matmul(state, proj)?);
                        }
                        if !ab.no_rpe_att {
                            parts.extend(rpe);
                        }
                        let z = tape.concat(&parts)?;
                        let z = tape.leaky_relu(z, self.config.leaky_slope);
                        let a = tape.param(store, att);
                        let logits = tape.matmul(z, a)?;
                        tape.segment_softmax(logits, flat.segments.clone())?
                    }
                };
                let input = match rpe {
                    Some(r) => tape.concat(&[state, r])?,
                    None => state,
                };
                let value = tape.param(store, head.value);
                let values = tape.matmul(input, value)?;
                outs.push(if last {
                    tape.segment_weighted_sum(values, weights, flat.segments.clone(), batch)?
                } else {
                    tape.mul_rows(values, weights)?
                });
                head_weights.push(weights);
            }
            let combined = average(tape, &outs)?;
            if last {
                encoding = Some(combined);
                last_weights = Some(average(tape, &head_weights)?);
            } else {
                state = tape.add(state, combined)?;
            }
        }
        Ok(PairwiseOutput {
            encoding: encoding.expect("at least one attention layer"),
            weights: last_weights,
        })
    }

    fn head_logits(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        node_repr: Var,
        contexts: &[ContextSet],
    ) -> Result<(Var, Option<Var>)> {
        let a_idx = Rc::new(contexts.iter().map(|c| c.link.0).collect());
        let b_idx = Rc::new(contexts.iter().map(|c| c.link.1).collect());
        let ha = tape.gather_rows(node_repr, a_idx)?;
        let hb = tape.gather_rows(node_repr, b_idx)?;
        let prod = tape.mul(ha, hb)?;
        let pairwise = self.pairwise_encoding(tape, store, node_repr, contexts)?;
        let mut parts = vec![prod, pairwise.encoding];
        if !self.config.ablations.no_counts {
            let counts = contexts
                .iter()
                .flat_map(|c| c.counts.map(|k| (k as f64).ln_1p()))
                .collect();
            parts.push(tape.constant(Tensor::matrix(contexts.len(), 3, counts)?));
        }
        let x = tape.concat(&parts)?;
        let logits = self.ids.head.forward(tape, store, x, self.config.dropout)?;
        Ok((logits, pairwise.weights))
    }

    /// Score-head logits (`B x 1`) for links whose contexts were selected with
    /// the first endpoint as `a`. Links are scored in canonical `a < b` order.
    pub fn logits(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        node_repr: Var,
        contexts: &[ContextSet],
    ) -> Result<(Var, Option<Var>)> {
        let canon: Vec<ContextSet> = contexts
            .iter()
            .map(|c| if c.link.0 <= c.link.1 { c.clone() } else { c.swapped() })
            .collect();
        let (forward, weights) = self.head_logits(tape, store, node_repr, &canon)?;
        if !self.config.symmetrize {
            return Ok((forward, weights));
        }
        let swapped: Vec<ContextSet> = canon.iter().map(ContextSet::swapped).collect();
        let (backward, _) = self.head_logits(tape, store, node_repr, &swapped)?;
        let sum = tape.add(forward, backward)?;
        Ok((tape.scale(sum, 0.5), weights))
    }

    /// Mean BCE of the batch against 0/1 labels.
    pub fn loss(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        g: &Graph,
        adj: &Rc<SparseMatrix>,
        contexts: &[ContextSet],
        labels: &[f64],
    ) -> Result<Var> {
        let node_repr = self.encode_nodes(tape, store, g, adj)?;
        let (logits, _) = self.logits(tape, store, node_repr, contexts)?;
        let p = tape.sigmoid(logits);
        tape.bce_loss(p, labels)
    }

    /// Scores links in chunks of `batch_size`, without dropout.
    pub fn predict(
        &self,
        g: &Graph,
        cache: &PprCache,
        links: &[(usize, usize)],
        batch_size: usize,
        with_attention: bool,
    ) -> Result<Vec<LinkPrediction>> {
        let adj = Rc::new(normalized_adjacency(g, &[]));
        let mut tape = Tape::new();
        let node_repr = self.encode_nodes(&mut tape, &self.params, g, &adj)?;
        let canon: Vec<_> = links.iter().copied().map(canonical).collect();
        let mut out = Vec::with_capacity(links.len());
        for (chunk, orig) in canon.chunks(batch_size.max(1)).zip(links.chunks(batch_size.max(1))) {
            let contexts = context_batch(g, cache, chunk, &self.config.context)?;
            let mark = tape.len();
            let (logits, weights) = self.logits(&mut tape, &self.params, node_repr, &contexts)?;
            let lv = tape.value(logits).values().to_vec();
            let wv = weights.map(|w| tape.value(w).values().to_vec());
            let mut offset = 0;
            for (k, ctx) in contexts.iter().enumerate() {
                let attention = match (&wv, with_attention) {
                    (Some(w), true) => Some(
                        ctx.nodes
                            .iter()
                            .zip(&w[offset..offset + ctx.len()])
                            .map(|(c, &x)| (c.node, x))
                            .collect(),
                    ),
                    (None, true) => Some(vec![]),
                    _ => None,
                };
                offset += ctx.len();
                let p = sigmoid(lv[k]);
                if !p.is_finite() {
                    return Err(Error::Numeric(format!("non-finite score for link {:?}", orig[k])));
                }
                out.push(LinkPrediction {
                    link: orig[k],
                    probability: p,
                    attention,
                });
            }
            debug_assert!(tape.len() > mark);
        }
        Ok(out)
    }

    /// Positional encoding of a node with the given PPR pair and type.
    pub fn rpe_values(&self, ppr_au: f64, ppr_bu: f64, kind: NodeType) -> Result<Vec<f64>> {
        let flat = FlatContext {
            segments: Rc::new(vec![0]),
            endpoint_a: Rc::new(vec![0]),
            endpoint_b: Rc::new(vec![0]),
            nodes: Rc::new(vec![0]),
            kinds: vec![kind],
            ppr_ab: Tensor::matrix(1, 2, vec![ppr_au, ppr_bu])?,
            ppr_ba: Tensor::matrix(1, 2, vec![ppr_bu, ppr_au])?,
        };
        let mut tape = Tape::new();
        Ok(self
            .rpe(&mut tape, &self.params, &flat)?
            .map(|v| tape.value(v).values().to_vec())
            .unwrap_or_default())
    }

    /// Node representations as a plain tensor.
    pub fn node_representations(&self, g: &Graph) -> Result<Tensor> {
        let adj = Rc::new(normalized_adjacency(g, &[]));
        let mut tape = Tape::new();
        let h = self.encode_nodes(&mut tape, &self.params, g, &adj)?;
        Ok(tape.value(h).clone())
    }

    /// Pairwise encodings `s(a,b)` for links with precomputed contexts.
    pub fn pairwise_values(&self, g: &Graph, contexts: &[ContextSet]) -> Result<Tensor> {
        let adj = Rc::new(normalized_adjacency(g, &[]));
        let mut tape = Tape::new();
        let h = self.encode_nodes(&mut tape, &self.params, g, &adj)?;
        let out = self.pairwise_encoding(&mut tape, &self.params, h, contexts)?;
        Ok(tape.value(out.encoding).clone())
    }
}

fn average(tape: &mut Tape, vars: &[Var]) -> Result<Var> {
    let mut acc = vars[0];
    for &v in &vars[1..] {
        acc = tape.add(acc, v)?;
    }
    Ok(if vars.len() > 1 {
        tape.scale(acc, 1.0 / vars.len() as f64)
    } else {
        acc
    })
}

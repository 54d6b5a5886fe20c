//! Model parameters, forward evaluation and analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{FeatureMode, TrainConfig};
use crate::data::{build_adjacency_with, DynamicGraphDataset};
use crate::error::{Error, Result};
use crate::gtcn::{
    backward_layer, forward_layer, preprocess_adjacency, EnsembleWeights, LayerCache, SpectralAdjacency,
};
use crate::head::{LinkObservation, RegressionHead};
use crate::tensor::Tensor3;
use crate::transforms::{TransformKind, TransformMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct BranchParams {
    pub kind: TransformKind,
    /// One `(F, F, T_b)` weight tensor per layer, `T_b` the branch's working size.
    pub layers: Vec<Tensor3>,
}

/// Learnable parameters plus the fixed ensemble weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Node embeddings `(N, F, T)` or `(N, F, 1)` depending on the feature mode.
    pub embedding: Tensor3,
    pub branches: Vec<BranchParams>,
    pub head: RegressionHead,
    pub ensemble: EnsembleWeights,
}

impl ModelParams {
    pub fn n_nodes(&self) -> usize {
        self.embedding.dims()[0]
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding.dims()[1]
    }

    pub fn len(&self) -> usize {
        self.embedding.len()
            + self.branches.iter().flat_map(|b| &b.layers).map(Tensor3::len).sum::<usize>()
            + self.head.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameter groups in flattening order: embedding, branch weights, head.
    pub fn groups(&self) -> Vec<(String, usize)> {
        let mut out = vec![("E".to_string(), self.embedding.len())];
        for b in &self.branches {
            for (l, w) in b.layers.iter().enumerate() {
                out.push((format!("W[{}][{l}]", b.kind), w.len()));
            }
        }
        out.push(("r".to_string(), self.head.r.len()));
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(self.embedding.real_values());
        for w in self.branches.iter().flat_map(|b| &b.layers) {
            v.extend(w.real_values());
        }
        v.extend_from_slice(&self.head.r);
        v
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::ShapeMismatch { what: "parameter vector", expected: self.len(), actual: flat.len() });
        }
        let mut rest = flat;
        let mut take = |t: &mut Tensor3| -> Result<()> {
            let (head, tail) = rest.split_at(t.len());
            *t = Tensor3::from_real(t.dims(), head.to_vec())?;
            rest = tail;
            Ok(())
        };
        take(&mut self.embedding)?;
        for w in self.branches.iter_mut().flat_map(|b| &mut b.layers) {
            take(w)?;
        }
        self.head.r.copy_from_slice(rest);
        Ok(())
    }

    fn zeros_like(&self) -> ModelParams {
        let d = self.embedding.dims();
        ModelParams {
            embedding: Tensor3::zeros(d[0], d[1], d[2]),
            branches: self
                .branches
                .iter()
                .map(|b| BranchParams {
                    kind: b.kind,
                    layers: b
                        .layers
                        .iter()
                        .map(|w| {
                            let [a, c, t] = w.dims();
                            Tensor3::zeros(a, c, t)
                        })
                        .collect(),
                })
                .collect(),
            head: RegressionHead { r: vec![0.0; self.head.r.len()] },
            ensemble: self.ensemble,
        }
    }

    fn branch_weights(&self) -> Vec<f64> {
        if self.branches.len() == 1 {
            vec![1.0]
        } else {
            self.ensemble.as_array().to_vec()
        }
    }
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, count: usize) -> Vec<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..count).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// Glorot-uniform initialization. Every `(fan_in, fan_out)` slice uses the
/// bound `√(6 / (fan_in + fan_out))`; `E` slices are `N x F`, `W` slices
/// `F x F` and `r` is treated as a `2F x 1` matrix.
pub fn init_params(ds: &DynamicGraphDataset, config: &TrainConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ds.n_nodes();
    let f = config.embedding_dim;
    let e_slots = match config.features {
        FeatureMode::PerSlot => ds.n_slots(),
        FeatureMode::Shared => 1,
    };
    let embedding = Tensor3::from_real([n, f, e_slots], glorot(&mut rng, n, f, n * f * e_slots))?;
    let mut branches = Vec::new();
    for kind in config.transform.branches() {
        let t = kind.working_size(ds.n_slots());
        let layers = (0..config.layers)
            .map(|_| Tensor3::from_real([f, f, t], glorot(&mut rng, f, f, f * f * t)))
            .collect::<Result<Vec<_>>>()?;
        branches.push(BranchParams { kind, layers });
    }
    let head = RegressionHead::new(glorot(&mut rng, 2 * f, 1, 2 * f))?;
    Ok(ModelParams { embedding, branches, head, ensemble: config.ensemble })
}

struct Branch {
    transform: TransformMatrix,
    adjacency: SpectralAdjacency,
}

/// Preprocessed, transformed adjacency for every branch of a configuration.
/// Built from training observations only.
pub struct PreparedGraph {
    n_nodes: usize,
    n_slots: usize,
    branches: Vec<Branch>,
    config: TrainConfig,
}

impl PreparedGraph {
    pub fn new(ds: &DynamicGraphDataset, config: &TrainConfig) -> Result<PreparedGraph> {
        config.validate()?;
        let raw = build_adjacency_with(ds, config.adjacency)?;
        let adjacency = preprocess_adjacency(&raw, config.adjacency_mode)?;
        let mut branches = Vec::new();
        for kind in config.transform.branches() {
            let size = kind.working_size(ds.n_slots());
            let transform = TransformMatrix::build(kind, size)?;
            let padded = adjacency.padded(size);
            branches.push(Branch { adjacency: SpectralAdjacency::new(&padded, &transform)?, transform });
        }
        Ok(PreparedGraph { n_nodes: ds.n_nodes(), n_slots: ds.n_slots(), branches, config: config.clone() })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    fn check(&self, params: &ModelParams) -> Result<()> {
        if params.n_nodes() != self.n_nodes {
            return Err(Error::ShapeMismatch { what: "node count", expected: self.n_nodes, actual: params.n_nodes() });
        }
        if params.branches.len() != self.branches.len()
            || params.branches.iter().zip(&self.branches).any(|(p, b)| p.kind != b.transform.kind())
        {
            return Err(Error::InvalidArgument("parameter branches do not match the configured transforms".into()));
        }
        for (p, b) in params.branches.iter().zip(&self.branches) {
            for w in &p.layers {
                let [fi, fo, t] = w.dims();
                if fi != params.embedding_dim() || fo != params.embedding_dim() || t != b.transform.size() {
                    return Err(Error::dims(
                        "model weights",
                        format!("({0}, {0}, {1})", params.embedding_dim(), b.transform.size()),
                        format!("{:?}", w.dims()),
                    ));
                }
            }
        }
        let e_slots = params.embedding.dims()[2];
        if e_slots != 1 && e_slots != self.n_slots {
            return Err(Error::ShapeMismatch { what: "embedding slots", expected: self.n_slots, actual: e_slots });
        }
        Ok(())
    }

    /// Feature tensor for a branch of working size `slots`: embeddings on
    /// the observed slots, zeros on padding.
    fn features(&self, params: &ModelParams, slots: usize) -> Tensor3 {
        let e = &params.embedding;
        let [n, f, e_slots] = e.dims();
        let observed = self.n_slots;
        Tensor3::from_fn_real([n, f, slots], |i, k, t| {
            if t >= observed {
                0.0
            } else if e_slots == 1 {
                e.re(i, k, 0)
            } else {
                e.re(i, k, t)
            }
        })
    }
}

/// Forward-pass state: per-branch layer caches and the combined
/// representation tensor `(N, F, T)`.
pub struct ForwardState {
    caches: Vec<Vec<LayerCache>>,
    pub representation: Tensor3,
}

pub fn forward(params: &ModelParams, graph: &PreparedGraph) -> Result<ForwardState> {
    graph.check(params)?;
    let activation = graph.config.activation;
    let weights = params.branch_weights();
    let mut caches = Vec::with_capacity(graph.branches.len());
    let mut representation: Option<Tensor3> = None;
    for ((branch, p), weight) in graph.branches.iter().zip(&params.branches).zip(&weights) {
        let mut x = graph.features(params, branch.transform.size());
        let mut layer_caches = Vec::with_capacity(p.layers.len());
        for w in &p.layers {
            let cache = forward_layer(&branch.adjacency, &x, w, activation, &branch.transform)?;
            x = cache.out.clone();
            layer_caches.push(cache);
        }
        let h = x.resize_time(graph.n_slots);
        match representation.as_mut() {
            None => representation = Some(h.scale(*weight)),
            Some(acc) => acc.add_scaled(&h, *weight)?,
        }
        caches.push(layer_caches);
    }
    Ok(ForwardState { caches, representation: representation.expect("at least one branch") })
}

fn predict_from(h: &Tensor3, head: &RegressionHead, o: &LinkObservation) -> f64 {
    let f = head.embedding_dim();
    let t = o.t - 1;
    let mut y = 0.0;
    for k in 0..f {
        y += h.re(o.src, k, t) * head.r[k] + h.re(o.dst, k, t) * head.r[f + k];
    }
    y
}

fn check_observations(graph: &PreparedGraph, observations: &[LinkObservation]) -> Result<()> {
    for o in observations {
        if o.t == 0 || o.t > graph.n_slots || o.src >= graph.n_nodes || o.dst >= graph.n_nodes {
            return Err(Error::OutOfRange(format!(
                "link (t={}, src={}, dst={}) outside N={}, T={}",
                o.t, o.src, o.dst, graph.n_nodes, graph.n_slots
            )));
        }
    }
    Ok(())
}

pub fn predict(params: &ModelParams, graph: &PreparedGraph, observations: &[LinkObservation]) -> Result<Vec<f64>> {
    check_observations(graph, observations)?;
    let state = forward(params, graph)?;
    Ok(observations.iter().map(|o| predict_from(&state.representation, &params.head, o)).collect())
}

/// Training objective: squared error over `observations` plus `κ` times the
/// configured penalty on all learnable parameters.
pub fn objective(params: &ModelParams, graph: &PreparedGraph, observations: &[LinkObservation]) -> Result<f64> {
    let preds = predict(params, graph, observations)?;
    crate::head::loss(observations, &preds, &params.flatten(), graph.config.kappa, graph.config.regularizer)
}

/// Loss, the predictions it was computed from, and its gradient.
pub struct GradientOutput {
    pub loss: f64,
    pub predictions: Vec<f64>,
    pub gradients: ModelParams,
}

pub fn compute_gradients(
    params: &ModelParams,
    graph: &PreparedGraph,
    observations: &[LinkObservation],
) -> Result<GradientOutput> {
    check_observations(graph, observations)?;
    let state = forward(params, graph)?;
    let h = &state.representation;
    let f = params.embedding_dim();
    let config = &graph.config;

    let predictions: Vec<f64> = observations.iter().map(|o| predict_from(h, &params.head, o)).collect();
    let theta = params.flatten();
    let loss = crate::head::loss(observations, &predictions, &theta, config.kappa, config.regularizer)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite { stage: "loss".into() });
    }

    let mut grads = params.zeros_like();
    let [n, _, nt] = h.dims();
    let mut g_h = vec![0.0; n * f * nt];
    for (o, p) in observations.iter().zip(&predictions) {
        let g = -2.0 * (o.weight - p);
        let t = o.t - 1;
        for k in 0..f {
            grads.head.r[k] += g * h.re(o.src, k, t);
            grads.head.r[f + k] += g * h.re(o.dst, k, t);
            g_h[(t * n + o.src) * f + k] += g * params.head.r[k];
            g_h[(t * n + o.dst) * f + k] += g * params.head.r[f + k];
        }
    }
    let g_h = Tensor3::from_real([n, f, nt], g_h)?;

    let weights = params.branch_weights();
    let e_slots = params.embedding.dims()[2];
    for (b, ((branch, p), weight)) in graph.branches.iter().zip(&params.branches).zip(&weights).enumerate() {
        let caches = &state.caches[b];
        let mut g = g_h.scale(*weight).resize_time(branch.transform.size());
        for l in (0..p.layers.len()).rev() {
            let (g_x, g_w) = backward_layer(&branch.adjacency, &caches[l], config.activation, &branch.transform, &g)?;
            grads.branches[b].layers[l] = g_w;
            g = g_x;
        }
        for t in 0..nt {
            let te = if e_slots == 1 { 0 } else { t };
            for i in 0..n {
                for k in 0..f {
                    let v = grads.embedding.re(i, k, te) + g.re(i, k, t);
                    grads.embedding.set_re(i, k, te, v);
                }
            }
        }
    }

    if config.kappa > 0.0 {
        let mut reg = vec![0.0; theta.len()];
        config.regularizer.gradient(&theta, &mut reg);
        let mut flat = grads.flatten();
        for (g, r) in flat.iter_mut().zip(&reg) {
            *g += config.kappa * r;
        }
        grads.assign(&flat)?;
    }
    if grads.flatten().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { stage: "parameter gradients".into() });
    }
    Ok(GradientOutput { loss, predictions, gradients: grads })
}

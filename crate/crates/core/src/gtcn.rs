//! Graph tensor convolution: `H = σ(Â * X * W)` with `*` the M-product.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{facewise_product, m_transform, Tensor3, DEMOTE_TOLERANCE};
use crate::transforms::TransformMatrix;

/// Largest node count accepted by [`message_passing_oracle`].
pub const ORACLE_MAX_NODES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation `x` and the output `y = σ(x)`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdjacencyMode {
    /// `A^t + I` on every slice.
    RawSelfLoops,
    /// `D^{-1/2} (A^t + I) D^{-1/2}` with `D` the row sums of `A^t + I`.
    SymNormalized,
}

impl AdjacencyMode {
    pub fn name(self) -> &'static str {
        match self {
            AdjacencyMode::RawSelfLoops => "raw-self-loops",
            AdjacencyMode::SymNormalized => "sym-normalized",
        }
    }
}

impl fmt::Display for AdjacencyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdjacencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw-self-loops" => Ok(AdjacencyMode::RawSelfLoops),
            "sym-normalized" => Ok(AdjacencyMode::SymNormalized),
            other => Err(Error::InvalidArgument(format!("unknown adjacency mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdjacencyTensor {
    a: Tensor3,
    mode: AdjacencyMode,
}

impl AdjacencyTensor {
    pub fn tensor(&self) -> &Tensor3 {
        &self.a
    }

    pub fn mode(&self) -> AdjacencyMode {
        self.mode
    }

    pub fn n_nodes(&self) -> usize {
        self.a.dims()[0]
    }

    pub fn n_slots(&self) -> usize {
        self.a.dims()[2]
    }

    /// Zero-pad along time. Padded slices carry no edges and no self-loops.
    pub fn padded(&self, slots: usize) -> AdjacencyTensor {
        AdjacencyTensor { a: self.a.resize_time(slots), mode: self.mode }
    }
}

pub fn preprocess_adjacency(raw: &Tensor3, mode: AdjacencyMode) -> Result<AdjacencyTensor> {
    let [n, n2, nt] = raw.dims();
    if n != n2 {
        return Err(Error::dims("preprocess_adjacency", "square slices (N, N, T)", format!("{:?}", raw.dims())));
    }
    if !raw.is_real() {
        return Err(Error::InvalidArgument("adjacency must be real".into()));
    }
    for t in 0..nt {
        for i in 0..n {
            for j in 0..n {
                let v = raw.re(i, j, t);
                if !v.is_finite() {
                    return Err(Error::NonFinite { stage: "adjacency input".into() });
                }
                if v < 0.0 {
                    return Err(Error::NegativeWeight { i, j, t, value: v });
                }
            }
        }
    }
    let mut a = raw.clone();
    for t in 0..nt {
        for i in 0..n {
            a.set_re(i, i, t, raw.re(i, i, t) + 1.0);
        }
    }
    if mode == AdjacencyMode::SymNormalized {
        for t in 0..nt {
            let inv_sqrt: Vec<f64> = (0..n)
                .map(|i| {
                    let d: f64 = (0..n).map(|j| a.re(i, j, t)).sum();
                    1.0 / d.sqrt()
                })
                .collect();
            for i in 0..n {
                for j in 0..n {
                    let v = a.re(i, j, t);
                    if v != 0.0 {
                        a.set_re(i, j, t, inv_sqrt[i] * v * inv_sqrt[j]);
                    }
                }
            }
        }
    }
    Ok(AdjacencyTensor { a, mode })
}

#[derive(Clone, Debug)]
pub struct GtcnLayerParams {
    pub w: Tensor3,
    pub activation: Activation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleWeights {
    alpha: f64,
    beta: f64,
    chi: f64,
}

impl EnsembleWeights {
    pub fn new(alpha: f64, beta: f64, chi: f64) -> Result<EnsembleWeights> {
        if [alpha, beta, chi].iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "ensemble weights must be nonnegative, got ({alpha}, {beta}, {chi})"
            )));
        }
        if (alpha + beta + chi - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("ensemble weights must sum to 1, got {}", alpha + beta + chi)));
        }
        Ok(EnsembleWeights { alpha, beta, chi })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Weights in branch order (dft, dct, haar).
    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.chi]
    }
}

impl Default for EnsembleWeights {
    fn default() -> Self {
        EnsembleWeights { alpha: 1.0 / 3.0, beta: 1.0 / 3.0, chi: 1.0 / 3.0 }
    }
}

pub fn ensemble_combine(h_dft: &Tensor3, h_dct: &Tensor3, h_haar: &Tensor3, w: &EnsembleWeights) -> Result<Tensor3> {
    if h_dft.dims() != h_dct.dims() || h_dft.dims() != h_haar.dims() {
        return Err(Error::dims(
            "ensemble_combine",
            format!("{:?} for all branches", h_dft.dims()),
            format!("{:?} / {:?}", h_dct.dims(), h_haar.dims()),
        ));
    }
    let mut out = h_dft.scale(w.alpha);
    out.add_scaled(h_dct, w.beta)?;
    out.add_scaled(h_haar, w.chi)?;
    Ok(out)
}

/// Adjacency transformed along time, plus its per-slice adjoint for the
/// backward pass.
#[derive(Clone, Debug)]
pub struct SpectralAdjacency {
    a_hat: Tensor3,
    a_hat_adj: Tensor3,
}

impl SpectralAdjacency {
    pub fn new(a: &AdjacencyTensor, m: &TransformMatrix) -> Result<SpectralAdjacency> {
        if a.n_slots() != m.size() {
            return Err(Error::dims(
                "SpectralAdjacency",
                format!("{}x{} transform", a.n_slots(), a.n_slots()),
                format!("{}x{}", m.size(), m.size()),
            ));
        }
        let a_hat = finite(m_transform(a.tensor(), m.matrix())?, "adjacency transform")?;
        let a_hat_adj = a_hat.conj_transpose_slices();
        Ok(SpectralAdjacency { a_hat, a_hat_adj })
    }

    pub fn a_hat(&self) -> &Tensor3 {
        &self.a_hat
    }
}

/// Intermediates of one layer kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerCache {
    p_hat: Tensor3,
    w_hat: Tensor3,
    pre: Tensor3,
    pub out: Tensor3,
}

fn finite(x: Tensor3, stage: &str) -> Result<Tensor3> {
    if x.all_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite { stage: stage.to_string() })
    }
}

fn check_chain(a: &Tensor3, x: &Tensor3, w: &Tensor3, m: &TransformMatrix) -> Result<()> {
    let [n, n2, t] = a.dims();
    let [xn, f_in, xt] = x.dims();
    let [wf, _, wt] = w.dims();
    if n != n2 || xn != n || wf != f_in || xt != t || wt != t || m.size() != t {
        return Err(Error::dims(
            "gtcn_forward",
            format!("(N,N,T)·(N,F_in,T)·(F_in,F_out,T) with M of size T, N={n}, T={t}"),
            format!("A {:?}, X {:?}, W {:?}, M {}", a.dims(), x.dims(), w.dims(), m.size()),
        ));
    }
    Ok(())
}

pub fn forward_layer(
    adj: &SpectralAdjacency,
    x: &Tensor3,
    w: &Tensor3,
    activation: Activation,
    m: &TransformMatrix,
) -> Result<LayerCache> {
    check_chain(&adj.a_hat, x, w, m)?;
    let x_hat = finite(m_transform(x, m.matrix())?, "feature transform")?;
    let w_hat = finite(m_transform(w, m.matrix())?, "weight transform")?;
    let p_hat = finite(facewise_product(&adj.a_hat, &x_hat)?, "spatial aggregation")?;
    let q_hat = finite(facewise_product(&p_hat, &w_hat)?, "feature mixing")?;
    let z = m_transform(&q_hat, m.inverse())?;
    let pre = if z.is_real() {
        finite(z, "inverse transform")?
    } else {
        z.demote_real("inverse transform", DEMOTE_TOLERANCE)?
    };
    let out = finite(pre.map_real(|v| activation.apply(v)), "activation")?;
    Ok(LayerCache { p_hat, w_hat, pre, out })
}

/// Backward pass of one layer. Returns the gradients with respect to the
/// layer input `x` and the weight tensor `w`, both real.
pub fn backward_layer(
    adj: &SpectralAdjacency,
    cache: &LayerCache,
    activation: Activation,
    m: &TransformMatrix,
    grad_out: &Tensor3,
) -> Result<(Tensor3, Tensor3)> {
    let g_pre = Tensor3::from_fn_real(grad_out.dims(), |i, j, t| {
        grad_out.re(i, j, t) * activation.derivative(cache.pre.re(i, j, t), cache.out.re(i, j, t))
    });
    // adjoint of ×₃M is ×₃Mᴴ; real parameters keep the real part
    let g_q_hat = m_transform(&g_pre, &m.inverse().conj_transpose())?;
    let g_p_hat = facewise_product(&g_q_hat, &cache.w_hat.conj_transpose_slices())?;
    let g_w_hat = facewise_product(&cache.p_hat.conj_transpose_slices(), &g_q_hat)?;
    let m_adj = m.matrix().conj_transpose();
    let g_w = finite(m_transform(&g_w_hat, &m_adj)?.real_part(), "weight gradient")?;
    let g_x_hat = facewise_product(&adj.a_hat_adj, &g_p_hat)?;
    let g_x = finite(m_transform(&g_x_hat, &m_adj)?.real_part(), "feature gradient")?;
    Ok((g_x, g_w))
}

/// One GTCN layer on an already preprocessed adjacency tensor.
pub fn gtcn_forward(a: &AdjacencyTensor, x: &Tensor3, p: &GtcnLayerParams, m: &TransformMatrix) -> Result<Tensor3> {
    check_chain(a.tensor(), x, &p.w, m)?;
    let adj = SpectralAdjacency::new(a, m)?;
    Ok(forward_layer(&adj, x, &p.w, p.activation, m)?.out)
}

/// Entrywise evaluation of the same layer as per-node message passing:
/// every neighbor message and feature vector is mixed along time by the rows
/// of `M`, aggregated over `N(i) ∪ {i}` per transformed slot, multiplied by
/// the transformed weight slice, and mapped back with `M⁻¹` before `σ`.
///
/// Intended for small test instances (at most [`ORACLE_MAX_NODES`] nodes).
pub fn message_passing_oracle(
    a: &AdjacencyTensor,
    x: &Tensor3,
    p: &GtcnLayerParams,
    m: &TransformMatrix,
) -> Result<Tensor3> {
    check_chain(a.tensor(), x, &p.w, m)?;
    let [n, _, nt] = a.tensor().dims();
    if n > ORACLE_MAX_NODES {
        return Err(Error::InvalidArgument(format!(
            "message_passing_oracle supports at most {ORACLE_MAX_NODES} nodes, got {n}"
        )));
    }
    let f_in = x.dims()[1];
    let f_out = p.w.dims()[1];
    let mm = m.matrix();
    let at = a.tensor();
    let zero = Complex64::new(0.0, 0.0);

    // temporal mixing of a scalar tube: Φ(s)^t = Σ_k m_tk s^k
    let phi = |t: usize, tube: &dyn Fn(usize) -> Complex64| -> Complex64 {
        (0..nt).fold(zero, |acc, k| acc + mm.get(t, k) * tube(k))
    };

    let mut messages = vec![zero; n * f_out * nt];
    for t in 0..nt {
        for i in 0..n {
            let mut c = vec![zero; f_in];
            for j in 0..n {
                let neighbor = j == i || (0..nt).any(|k| at.re(i, j, k) != 0.0);
                if !neighbor {
                    continue;
                }
                let phi_a = phi(t, &|k| at.get(i, j, k));
                for (f, cf) in c.iter_mut().enumerate() {
                    *cf += phi_a * phi(t, &|k| x.get(j, f, k));
                }
            }
            for g in 0..f_out {
                let mut acc = zero;
                for (f, cf) in c.iter().enumerate() {
                    acc += cf * phi(t, &|k| p.w.get(f, g, k));
                }
                messages[(t * n + i) * f_out + g] = acc;
            }
        }
    }

    let inv = m.inverse();
    let mut out = Tensor3::zeros(n, f_out, nt);
    for t in 0..nt {
        for i in 0..n {
            for g in 0..f_out {
                let z = (0..nt).fold(zero, |acc, k| acc + inv.get(t, k) * messages[(k * n + i) * f_out + g]);
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFinite { stage: "oracle inverse transform".into() });
                }
                if z.im.abs() > DEMOTE_TOLERANCE {
                    return Err(Error::ImaginaryResidue {
                        stage: "oracle inverse transform".into(),
                        residue: z.im.abs(),
                        tolerance: DEMOTE_TOLERANCE,
                    });
                }
                out.set_re(i, g, t, p.activation.apply(z.re));
            }
        }
    }
    Ok(out)
}

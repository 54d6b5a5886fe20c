//! Link-weight regression head, training objective and error metrics.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// One observed weighted link. `t` is one-based, node ids are zero-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkObservation {
    pub t: usize,
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Aggregation vector `r` of length `2·F`: the first half weighs the source
/// embedding, the second half the destination embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionHead {
    pub r: Vec<f64>,
}

impl RegressionHead {
    pub fn new(r: Vec<f64>) -> Result<RegressionHead> {
        if r.is_empty() || r.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "regression vector needs even positive length, got {}",
                r.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { stage: "regression head".into() });
        }
        Ok(RegressionHead { r })
    }

    pub fn embedding_dim(&self) -> usize {
        self.r.len() / 2
    }
}

/// `[h_src^t ∥ h_dst^t] · r`.
pub fn estimate_weight(h: &Tensor3, obs: &LinkObservation, head: &RegressionHead) -> Result<f64> {
    let [n, f, nt] = h.dims();
    if f != head.embedding_dim() {
        return Err(Error::dims("estimate_weight", format!("embedding dim {}", head.embedding_dim()), format!("{f}")));
    }
    if obs.t == 0 || obs.t > nt || obs.src >= n || obs.dst >= n {
        return Err(Error::OutOfRange(format!(
            "link (t={}, src={}, dst={}) outside N={n}, T={nt}",
            obs.t, obs.src, obs.dst
        )));
    }
    let t = obs.t - 1;
    let (r_src, r_dst) = head.r.split_at(f);
    let mut y = 0.0;
    for k in 0..f {
        y += h.re(obs.src, k, t) * r_src[k];
    }
    for k in 0..f {
        y += h.re(obs.dst, k, t) * r_dst[k];
    }
    Ok(y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Regularizer {
    /// `κ·‖Θ‖₂`
    #[default]
    Norm,
    /// `κ·‖Θ‖₂²`
    SquaredNorm,
}

impl Regularizer {
    pub fn name(self) -> &'static str {
        match self {
            Regularizer::Norm => "norm",
            Regularizer::SquaredNorm => "squared-norm",
        }
    }

    pub fn value(self, theta: &[f64]) -> f64 {
        let sq: f64 = theta.iter().map(|v| v * v).sum();
        match self {
            Regularizer::Norm => sq.sqrt(),
            Regularizer::SquaredNorm => sq,
        }
    }

    /// Gradient of the (unscaled) penalty, written into `out`. The plain norm
    /// uses the subgradient 0 at the origin.
    pub fn gradient(self, theta: &[f64], out: &mut [f64]) {
        match self {
            Regularizer::Norm => {
                let norm = self.value(theta);
                if norm > 0.0 {
                    for (o, v) in out.iter_mut().zip(theta) {
                        *o = v / norm;
                    }
                } else {
                    out.fill(0.0);
                }
            }
            Regularizer::SquaredNorm => {
                for (o, v) in out.iter_mut().zip(theta) {
                    *o = 2.0 * v;
                }
            }
        }
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm" => Ok(Regularizer::Norm),
            "squared-norm" => Ok(Regularizer::SquaredNorm),
            other => Err(Error::InvalidArgument(format!("unknown regularizer `{other}`"))),
        }
    }
}

/// Sum of squared errors over the observations plus `κ` times the penalty
/// on the flattened parameters `theta`.
pub fn loss(
    observations: &[LinkObservation],
    predictions: &[f64],
    theta: &[f64],
    kappa: f64,
    regularizer: Regularizer,
) -> Result<f64> {
    if observations.len() != predictions.len() {
        return Err(Error::dims(
            "loss",
            format!("{} predictions", observations.len()),
            format!("{}", predictions.len()),
        ));
    }
    let sse: f64 = observations.iter().zip(predictions).map(|(o, p)| (o.weight - p).powi(2)).sum();
    Ok(sse + kappa * regularizer.value(theta))
}

fn check_pairs(targets: &[f64], predictions: &[f64]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::EmptySet);
    }
    if targets.len() != predictions.len() {
        return Err(Error::dims("metric", format!("{} predictions", targets.len()), format!("{}", predictions.len())));
    }
    Ok(())
}

pub fn mae(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    check_pairs(targets, predictions)?;
    let s: f64 = targets.iter().zip(predictions).map(|(y, p)| (y - p).abs()).sum();
    Ok(s / targets.len() as f64)
}

pub fn rmse(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    check_pairs(targets, predictions)?;
    let s: f64 = targets.iter().zip(predictions).map(|(y, p)| (y - p).powi(2)).sum();
    Ok((s / targets.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(t: usize, src: usize, dst: usize, weight: f64) -> LinkObservation {
        LinkObservation { t, src, dst, weight }
    }

    #[test]
    fn estimate_selects_entries() {
        // N=2, F=2, T=1: h_0 = [1, 0], h_1 = [0, 1]
        let h = Tensor3::from_real([2, 2, 1], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let head = RegressionHead::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(estimate_weight(&h, &obs(1, 0, 1, 0.0), &head).unwrap(), 5.0);
        let zero = RegressionHead::new(vec![0.0; 4]).unwrap();
        assert_eq!(estimate_weight(&h, &obs(1, 1, 0, 0.0), &zero).unwrap(), 0.0);
    }

    #[test]
    fn estimate_matches_concat_loop() {
        let h = Tensor3::from_fn_real([4, 3, 2], |i, j, t| ((i * 7 + j * 3 + t * 5) % 11) as f64 * 0.1 - 0.5);
        let r: Vec<f64> = (0..6).map(|k| k as f64 * 0.3 - 0.7).collect();
        let head = RegressionHead::new(r.clone()).unwrap();
        let o = obs(2, 3, 1, 0.0);
        let concat: Vec<f64> = (0..3).map(|f| h.re(3, f, 1)).chain((0..3).map(|f| h.re(1, f, 1))).collect();
        let expected: f64 = concat.iter().zip(&r).map(|(a, b)| a * b).sum();
        assert!((estimate_weight(&h, &o, &head).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn estimate_rejects_out_of_range() {
        let h = Tensor3::zeros(2, 1, 2);
        let head = RegressionHead::new(vec![1.0, 1.0]).unwrap();
        assert!(estimate_weight(&h, &obs(3, 0, 1, 0.0), &head).is_err());
        assert!(estimate_weight(&h, &obs(0, 0, 1, 0.0), &head).is_err());
        assert!(estimate_weight(&h, &obs(1, 0, 2, 0.0), &head).is_err());
    }

    #[test]
    fn loss_examples() {
        let one = [obs(1, 0, 1, 2.0)];
        assert_eq!(loss(&one, &[1.0], &[], 0.0, Regularizer::Norm).unwrap(), 1.0);
        assert_eq!(loss(&one, &[2.0], &[3.0], 0.0, Regularizer::Norm).unwrap(), 0.0);
        // residuals (1, -2), ‖Θ‖₂ = 2
        let two = [obs(1, 0, 1, 1.0), obs(1, 1, 0, 0.0)];
        let theta = [0.0, 2.0];
        assert_eq!(loss(&two, &[0.0, 2.0], &theta, 0.5, Regularizer::Norm).unwrap(), 6.0);
        assert_eq!(loss(&two, &[0.0, 2.0], &theta, 0.5, Regularizer::SquaredNorm).unwrap(), 7.0);
        assert!(loss(&two, &[0.0], &theta, 0.5, Regularizer::Norm).is_err());
    }

    #[test]
    fn norm_gradient() {
        let theta = [3.0, 4.0];
        let mut g = [0.0; 2];
        Regularizer::Norm.gradient(&theta, &mut g);
        assert_eq!(g, [0.6, 0.8]);
        Regularizer::Norm.gradient(&[0.0, 0.0], &mut g);
        assert_eq!(g, [0.0, 0.0]);
    }

    #[test]
    fn metric_examples() {
        assert_eq!(mae(&[1.0, 1.0], &[0.5, 1.5]).unwrap(), 0.5);
        assert_eq!(rmse(&[1.0, 1.0], &[0.5, 1.5]).unwrap(), 0.5);
        assert_eq!(mae(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!((rmse(&[0.0, 2.0], &[0.0, 0.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&[0.3], &[0.3]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.3], &[0.3]).unwrap(), 0.0);
        assert!(matches!(mae(&[], &[]), Err(Error::EmptySet)));
        assert!(matches!(rmse(&[], &[]), Err(Error::EmptySet)));
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(res in prop::collection::vec(-10.0f64..10.0, 1..50)) {
            let zeros = vec![0.0; res.len()];
            let m = mae(&res, &zeros).unwrap();
            let r = rmse(&res, &zeros).unwrap();
            prop_assert!(r >= m - 1e-12);
        }

        #[test]
        fn zero_kappa_loss_is_scaled_mse(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..30)) {
            let observations: Vec<_> = pairs.iter().map(|&(y, _)| obs(1, 0, 1, y)).collect();
            let preds: Vec<f64> = pairs.iter().map(|&(_, p)| p).collect();
            let targets: Vec<f64> = pairs.iter().map(|&(y, _)| y).collect();
            let l = loss(&observations, &preds, &[1.0], 0.0, Regularizer::Norm).unwrap();
            let mse = rmse(&targets, &preds).unwrap().powi(2);
            prop_assert!((l - pairs.len() as f64 * mse).abs() <= 1e-9 * l.max(1.0));
        }

        #[test]
        fn estimate_is_linear_in_r(
            r1 in prop::collection::vec(-1.0f64..1.0, 4),
            r2 in prop::collection::vec(-1.0f64..1.0, 4),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let h = Tensor3::from_fn_real([3, 2, 2], |i, j, t| (i as f64 - 1.0) * 0.5 + j as f64 * 0.25 - t as f64 * 0.1);
            let o = obs(2, 0, 2, 0.0);
            let mix: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| a * x + b * y).collect();
            let lhs = estimate_weight(&h, &o, &RegressionHead::new(mix).unwrap()).unwrap();
            let rhs = a * estimate_weight(&h, &o, &RegressionHead::new(r1.clone()).unwrap()).unwrap()
                + b * estimate_weight(&h, &o, &RegressionHead::new(r2.clone()).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }

        #[test]
        fn estimate_is_linear_in_h(
            h1 in prop::collection::vec(-1.0f64..1.0, 12),
            h2 in prop::collection::vec(-1.0f64..1.0, 12),
            a in -2.0f64..2.0,
        ) {
            let head = RegressionHead::new(vec![0.3, -0.2, 0.7, 0.1]).unwrap();
            let o = obs(1, 1, 2, 0.0);
            let t1 = Tensor3::from_real([3, 2, 2], h1.clone()).unwrap();
            let t2 = Tensor3::from_real([3, 2, 2], h2.clone()).unwrap();
            let mix = Tensor3::from_real([3, 2, 2], h1.iter().zip(&h2).map(|(x, y)| a * x + y).collect()).unwrap();
            let lhs = estimate_weight(&mix, &o, &head).unwrap();
            let rhs = a * estimate_weight(&t1, &o, &head).unwrap() + estimate_weight(&t2, &o, &head).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }
}

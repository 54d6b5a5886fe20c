//! Finite-difference verification of the analytic gradients.

use super::config::{FeatureMode, TrainConfig, TransformSelection};
use super::model::{compute_gradients, init_params, objective, PreparedGraph};
use crate::data::{generate_synthetic, split_dataset, Pattern, SynthSpec};
use crate::error::Result;
use crate::gtcn::Activation;

/// Central-difference step.
pub const GRAD_CHECK_STEP: f64 = 1e-5;
/// Largest accepted relative error.
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;
/// Denominator floor so that entries whose true gradient is ~0 are compared
/// in absolute terms instead of amplifying round-off.
const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckSpec {
    pub nodes: usize,
    pub features: usize,
    pub slots: usize,
    pub transform: TransformSelection,
    pub feature_mode: FeatureMode,
    pub activation: Activation,
    pub layers: usize,
    pub kappa: f64,
    pub seed: u64,
}

impl Default for GradCheckSpec {
    fn default() -> Self {
        GradCheckSpec {
            nodes: 5,
            features: 3,
            slots: 4,
            transform: TransformSelection::Single(crate::transforms::TransformKind::Dft),
            feature_mode: FeatureMode::PerSlot,
            activation: Activation::Sigmoid,
            layers: 1,
            kappa: 1e-2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub entries: usize,
    pub max_relative_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
    pub max_relative_error: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

pub fn grad_check(spec: &GradCheckSpec) -> Result<GradCheckReport> {
    let synth = SynthSpec {
        nodes: spec.nodes,
        slots: spec.slots,
        density: 0.6,
        pattern: Pattern::Mixed,
        noise: 0.05,
        seed: spec.seed,
    };
    let ds = split_dataset(&generate_synthetic(&synth)?, (0.6, 0.2, 0.2), spec.seed)?;
    let config = TrainConfig {
        embedding_dim: spec.features,
        kappa: spec.kappa,
        transform: spec.transform,
        features: spec.feature_mode,
        activation: spec.activation,
        layers: spec.layers,
        seed: spec.seed,
        ..TrainConfig::default()
    };
    let graph = PreparedGraph::new(&ds, &config)?;
    let train = ds.subset(&ds.require_splits()?.train);
    let mut params = init_params(&ds, &config, spec.seed)?;
    let analytic = compute_gradients(&params, &graph, &train)?.gradients.flatten();
    let base = params.flatten();

    let mut groups = Vec::new();
    let mut offset = 0;
    for (name, len) in params.groups() {
        let mut worst: f64 = 0.0;
        for k in offset..offset + len {
            let mut probe = base.clone();
            probe[k] = base[k] + GRAD_CHECK_STEP;
            params.assign(&probe)?;
            let up = objective(&params, &graph, &train)?;
            probe[k] = base[k] - GRAD_CHECK_STEP;
            params.assign(&probe)?;
            let down = objective(&params, &graph, &train)?;
            let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
            worst = worst.max(relative_error(analytic[k], numeric));
        }
        groups.push(GroupError { name, entries: len, max_relative_error: worst });
        offset += len;
    }
    params.assign(&base)?;
    let max_relative_error = groups.iter().map(|g| g.max_relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport { groups, max_relative_error, passed: max_relative_error <= GRAD_CHECK_TOLERANCE })
}

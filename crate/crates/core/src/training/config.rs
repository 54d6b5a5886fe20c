use std::fmt;
use std::str::FromStr;

use crate::data::AdjacencyOptions;
use crate::error::{Error, Result};
use crate::gtcn::{Activation, AdjacencyMode, EnsembleWeights};
use crate::head::Regularizer;
use crate::transforms::TransformKind;

/// Which temporal transform(s) the model uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformSelection {
    Single(TransformKind),
    /// DFT, DCT and Haar branches combined with the ensemble weights.
    Ensemble,
}

impl TransformSelection {
    pub const ALL: [TransformSelection; 5] = [
        TransformSelection::Single(TransformKind::Identity),
        TransformSelection::Single(TransformKind::Dft),
        TransformSelection::Single(TransformKind::Dct),
        TransformSelection::Single(TransformKind::Haar),
        TransformSelection::Ensemble,
    ];

    /// Branch transforms in combination order.
    pub fn branches(self) -> Vec<TransformKind> {
        match self {
            TransformSelection::Single(kind) => vec![kind],
            TransformSelection::Ensemble => vec![TransformKind::Dft, TransformKind::Dct, TransformKind::Haar],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformSelection::Single(kind) => kind.name(),
            TransformSelection::Ensemble => "ensemble",
        }
    }
}

impl fmt::Display for TransformSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ensemble" {
            return Ok(TransformSelection::Ensemble);
        }
        match s.parse::<TransformKind>() {
            Ok(kind) => Ok(TransformSelection::Single(kind)),
            Err(_) => Err(Error::InvalidArgument(format!(
                "unknown transform `{s}` (expected identity, dft, dct, haar or ensemble)"
            ))),
        }
    }
}

/// How the node feature tensor `X` is realized from learnable embeddings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureMode {
    /// One embedding per node and slot: `E` has dims `(N, F, T)`.
    PerSlot,
    /// One embedding per node, repeated on every slot: `E` has dims `(N, F, 1)`.
    Shared,
}

impl FeatureMode {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::PerSlot => "per-slot",
            FeatureMode::Shared => "shared",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-slot" => Ok(FeatureMode::PerSlot),
            "shared" => Ok(FeatureMode::Shared),
            other => Err(Error::InvalidArgument(format!("unknown feature mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub embedding_dim: usize,
    pub learning_rate: f64,
    pub kappa: f64,
    pub regularizer: Regularizer,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub activation: Activation,
    pub adjacency_mode: AdjacencyMode,
    pub adjacency: AdjacencyOptions,
    pub transform: TransformSelection,
    pub features: FeatureMode,
    pub layers: usize,
    pub ensemble: EnsembleWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embedding_dim: 20,
            learning_rate: 0.01,
            kappa: 1e-4,
            regularizer: Regularizer::Norm,
            max_epochs: 1000,
            patience: 10,
            seed: 0,
            activation: Activation::Sigmoid,
            adjacency_mode: AdjacencyMode::SymNormalized,
            adjacency: AdjacencyOptions::default(),
            transform: TransformSelection::Ensemble,
            features: FeatureMode::PerSlot,
            layers: 1,
            ensemble: EnsembleWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.embedding_dim == 0 {
            return fail("embedding_dim must be >= 1".into());
        }
        if self.patience == 0 {
            return fail("patience must be >= 1".into());
        }
        if self.layers == 0 {
            return fail("layers must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return fail(format!("kappa must be >= 0, got {}", self.kappa));
        }
        Ok(())
    }

    /// Key/value echo, sufficient to rebuild the config with [`TrainConfig::from_pairs`].
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("transform", self.transform.to_string()),
            ("embedding_dim", self.embedding_dim.to_string()),
            ("layers", self.layers.to_string()),
            ("features", self.features.to_string()),
            ("activation", self.activation.to_string()),
            ("adjacency_mode", self.adjacency_mode.to_string()),
            ("binarize", self.adjacency.binarize.to_string()),
            ("symmetrize", self.adjacency.symmetrize.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("kappa", self.kappa.to_string()),
            ("regularizer", self.regularizer.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("seed", self.seed.to_string()),
            ("ensemble_alpha", self.ensemble.alpha().to_string()),
            ("ensemble_beta", self.ensemble.beta().to_string()),
            ("ensemble_chi", self.ensemble.chi().to_string()),
        ]
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<TrainConfig> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::InvalidArgument(format!("bad value `{value}` for `{key}`")))
        }
        let mut c = TrainConfig::default();
        let (mut alpha, mut beta, mut chi) = (c.ensemble.alpha(), c.ensemble.beta(), c.ensemble.chi());
        for (key, value) in pairs {
            match key {
                "transform" => c.transform = value.parse()?,
                "embedding_dim" => c.embedding_dim = parse(key, value)?,
                "layers" => c.layers = parse(key, value)?,
                "features" => c.features = value.parse()?,
                "activation" => c.activation = value.parse()?,
                "adjacency_mode" => c.adjacency_mode = value.parse()?,
                "binarize" => c.adjacency.binarize = parse(key, value)?,
                "symmetrize" => c.adjacency.symmetrize = parse(key, value)?,
                "learning_rate" => c.learning_rate = parse(key, value)?,
                "kappa" => c.kappa = parse(key, value)?,
                "regularizer" => c.regularizer = value.parse()?,
                "max_epochs" => c.max_epochs = parse(key, value)?,
                "patience" => c.patience = parse(key, value)?,
                "seed" => c.seed = parse(key, value)?,
                "ensemble_alpha" => alpha = parse(key, value)?,
                "ensemble_beta" => beta = parse(key, value)?,
                "ensemble_chi" => chi = parse(key, value)?,
                other => return Err(Error::InvalidArgument(format!("unknown config key `{other}`"))),
            }
        }
        c.ensemble = EnsembleWeights::new(alpha, beta, chi)?;
        c.validate()?;
        Ok(c)
    }
}

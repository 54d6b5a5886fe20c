//! Dynamic graph datasets: text format, splitting, adjacency assembly and a
//! synthetic generator.
//!
//! File format (UTF-8): optional header tokens `#nodes=<N>` and `#slots=<T>`
//! (on one line or separate lines), data lines `t src dst weight` separated by
//! tabs or spaces with `t` one-based and node ids zero-based. Any other line
//! starting with `#` is a comment.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
pub use crate::head::LinkObservation;
use crate::tensor::Tensor3;

/// Smallest weight emitted by the synthetic generator.
pub const MIN_SYNTH_WEIGHT: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicGraphDataset {
    n_nodes: usize,
    n_slots: usize,
    observations: Vec<LinkObservation>,
    splits: Option<Splits>,
    allow_self_links: bool,
}

impl DynamicGraphDataset {
    pub fn new(
        n_nodes: usize,
        n_slots: usize,
        observations: Vec<LinkObservation>,
        allow_self_links: bool,
    ) -> Result<DynamicGraphDataset> {
        if n_nodes == 0 || n_slots == 0 {
            return Err(Error::InvalidArgument(format!(
                "dataset needs N >= 1 and T >= 1, got N={n_nodes}, T={n_slots}"
            )));
        }
        for (k, o) in observations.iter().enumerate() {
            if o.t == 0 || o.t > n_slots || o.src >= n_nodes || o.dst >= n_nodes {
                return Err(Error::OutOfRange(format!(
                    "observation {k} (t={}, src={}, dst={}) outside N={n_nodes}, T={n_slots}",
                    o.t, o.src, o.dst
                )));
            }
            if !allow_self_links && o.src == o.dst {
                return Err(Error::InvalidArgument(format!("observation {k} is a self-link")));
            }
            if !o.weight.is_finite() {
                return Err(Error::NonFinite { stage: format!("observation {k} weight") });
            }
        }
        Ok(DynamicGraphDataset { n_nodes, n_slots, observations, splits: None, allow_self_links })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn observations(&self) -> &[LinkObservation] {
        &self.observations
    }

    pub fn splits(&self) -> Option<&Splits> {
        self.splits.as_ref()
    }

    pub fn allow_self_links(&self) -> bool {
        self.allow_self_links
    }

    pub fn require_splits(&self) -> Result<&Splits> {
        self.splits.as_ref().ok_or_else(|| Error::DegenerateSplit("dataset has not been split".into()))
    }

    /// Attach an explicit partition. Index sets must be nonempty, in range
    /// and pairwise disjoint; they are stored sorted.
    pub fn with_splits(&self, splits: Splits) -> Result<DynamicGraphDataset> {
        let n = self.observations.len();
        let mut seen = vec![false; n];
        for (name, set) in [("train", &splits.train), ("validation", &splits.validation), ("test", &splits.test)] {
            if set.is_empty() {
                return Err(Error::DegenerateSplit(format!("{name} split is empty")));
            }
            for &k in set {
                if k >= n {
                    return Err(Error::OutOfRange(format!("{name} index {k} >= {n} observations")));
                }
                if std::mem::replace(&mut seen[k], true) {
                    return Err(Error::DegenerateSplit(format!("observation {k} assigned twice")));
                }
            }
        }
        let mut splits = splits;
        splits.train.sort_unstable();
        splits.validation.sort_unstable();
        splits.test.sort_unstable();
        let mut out = self.clone();
        out.splits = Some(splits);
        Ok(out)
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<LinkObservation> {
        indices.iter().map(|&k| self.observations[k]).collect()
    }
}

/// Split sizes for `n` observations: validation and test take the floor of
/// their share, training gets the rest.
pub fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> (usize, usize, usize) {
    let share = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
    let validation = share(ratios.1);
    let test = share(ratios.2);
    (n.saturating_sub(validation + test), validation, test)
}

pub fn split_dataset(ds: &DynamicGraphDataset, ratios: (f64, f64, f64), seed: u64) -> Result<DynamicGraphDataset> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("split ratios must be nonnegative and sum to 1, got {ratios:?}")));
    }
    let n = ds.observations.len();
    if n < 5 {
        return Err(Error::DegenerateSplit(format!("need at least 5 observations, got {n}")));
    }
    let (n_train, n_val, n_test) = split_sizes(n, ratios);
    if n_val == 0 || n_test == 0 || n_train == 0 {
        return Err(Error::DegenerateSplit(format!("sizes ({n_train}, {n_val}, {n_test}) leave a split empty")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut validation = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    let mut out = ds.clone();
    out.splits = Some(Splits { train, validation, test });
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AdjacencyOptions {
    /// Store 1 for every observed link instead of its weight.
    pub binarize: bool,
    /// Mirror every link `i -> j` onto `j -> i` (keeping the larger weight).
    pub symmetrize: bool,
}

pub fn build_adjacency(ds: &DynamicGraphDataset) -> Result<Tensor3> {
    build_adjacency_with(ds, AdjacencyOptions::default())
}

/// Adjacency tensor `(N, N, T)` filled from training observations only.
pub fn build_adjacency_with(ds: &DynamicGraphDataset, opts: AdjacencyOptions) -> Result<Tensor3> {
    let splits = ds.require_splits()?;
    let mut a = Tensor3::zeros(ds.n_nodes, ds.n_nodes, ds.n_slots);
    for &k in &splits.train {
        let o = ds.observations[k];
        let w = if opts.binarize { 1.0 } else { o.weight };
        if w < 0.0 {
            return Err(Error::NegativeWeight { i: o.src, j: o.dst, t: o.t - 1, value: w });
        }
        a.set_re(o.src, o.dst, o.t - 1, w);
        if opts.symmetrize {
            let existing = a.re(o.dst, o.src, o.t - 1);
            a.set_re(o.dst, o.src, o.t - 1, existing.max(w));
        }
    }
    Ok(a)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_dataset(path: impl AsRef<Path>) -> Result<DynamicGraphDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_str(&text)
}

pub fn parse_dataset_str(text: &str) -> Result<DynamicGraphDataset> {
    let mut header_nodes: Option<usize> = None;
    let mut header_slots: Option<usize> = None;
    let mut observations = Vec::new();
    let mut lines_of = Vec::new();
    let mut seen: HashMap<(usize, usize, usize), usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            for token in line.split_whitespace() {
                let (slot, key) = if let Some(v) = token.strip_prefix("#nodes=") {
                    (&mut header_nodes, v)
                } else if let Some(v) = token.strip_prefix("#slots=") {
                    (&mut header_slots, v)
                } else {
                    continue;
                };
                let value: usize =
                    key.parse().map_err(|_| parse_err(line_no, format!("bad header value in `{token}`")))?;
                if value == 0 {
                    return Err(parse_err(line_no, format!("header `{token}` must be positive")));
                }
                *slot = Some(value);
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(line_no, format!("expected 4 fields `t src dst weight`, got {}", fields.len())));
        }
        let t: usize = fields[0].parse().map_err(|_| parse_err(line_no, format!("bad time slot `{}`", fields[0])))?;
        let src: usize = fields[1].parse().map_err(|_| parse_err(line_no, format!("bad node id `{}`", fields[1])))?;
        let dst: usize = fields[2].parse().map_err(|_| parse_err(line_no, format!("bad node id `{}`", fields[2])))?;
        let weight: f64 = fields[3].parse().map_err(|_| parse_err(line_no, format!("bad weight `{}`", fields[3])))?;
        if t == 0 {
            return Err(parse_err(line_no, "time slots are one-based"));
        }
        if !weight.is_finite() {
            return Err(parse_err(line_no, "weight must be finite"));
        }
        if let Some(&first) = seen.get(&(t, src, dst)) {
            return Err(Error::DuplicateEntry { line: line_no, first, t, src, dst });
        }
        seen.insert((t, src, dst), line_no);
        observations.push(LinkObservation { t, src, dst, weight });
        lines_of.push(line_no);
    }

    let max_node = observations.iter().map(|o| o.src.max(o.dst) + 1).max();
    let max_slot = observations.iter().map(|o| o.t).max();
    let n_nodes = header_nodes.or(max_node).ok_or_else(|| parse_err(0, "no observations and no #nodes header"))?;
    let n_slots = header_slots.or(max_slot).ok_or_else(|| parse_err(0, "no observations and no #slots header"))?;
    for (o, &line) in observations.iter().zip(&lines_of) {
        if o.src >= n_nodes || o.dst >= n_nodes {
            return Err(parse_err(line, format!("node id out of range (N={n_nodes})")));
        }
        if o.t > n_slots {
            return Err(parse_err(line, format!("time slot {} out of range (T={n_slots})", o.t)));
        }
    }
    DynamicGraphDataset::new(n_nodes, n_slots, observations, true)
}

/// Serialize in the text format accepted by [`parse_dataset_str`]. Weights are
/// written with the shortest representation that round-trips exactly.
pub fn serialize_dataset(ds: &DynamicGraphDataset) -> String {
    let mut out = String::new();
    writeln!(out, "#nodes={}", ds.n_nodes).unwrap();
    writeln!(out, "#slots={}", ds.n_slots).unwrap();
    for o in &ds.observations {
        writeln!(out, "{}\t{}\t{}\t{}", o.t, o.src, o.dst, o.weight).unwrap();
    }
    out
}

pub fn save_dataset(ds: &DynamicGraphDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serialize_dataset(ds)).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    Periodic,
    Trend,
    Mixed,
}

impl Pattern {
    pub fn name(self) -> &'static str {
        match self {
            Pattern::Periodic => "periodic",
            Pattern::Trend => "trend",
            Pattern::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(Pattern::Periodic),
            "trend" => Ok(Pattern::Trend),
            "mixed" => Ok(Pattern::Mixed),
            other => Err(Error::InvalidArgument(format!("unknown pattern `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub nodes: usize,
    pub slots: usize,
    pub density: f64,
    pub pattern: Pattern,
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 || self.slots == 0 {
            return Err(Error::InvalidArgument("synthetic graph needs nodes >= 1 and slots >= 1".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidArgument(format!("density must be in (0, 1], got {}", self.density)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise must be >= 0, got {}", self.noise)));
        }
        Ok(())
    }
}

/// Temporal profile of one synthetic edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    /// `0.6 + 0.4·sin(2π(t−1)/T + phase)`
    Periodic { phase: f64 },
    /// `0.2 + 0.8·s` when rising, `1 − 0.8·s` otherwise, `s = (t−1)/(T−1)`
    Trend { rising: bool },
}

impl Profile {
    pub fn value(&self, t: usize, slots: usize) -> f64 {
        match *self {
            Profile::Periodic { phase } => 0.6 + 0.4 * (2.0 * PI * (t - 1) as f64 / slots as f64 + phase).sin(),
            Profile::Trend { rising } => {
                let s = if slots > 1 { (t - 1) as f64 / (slots - 1) as f64 } else { 0.0 };
                if rising {
                    0.2 + 0.8 * s
                } else {
                    1.0 - 0.8 * s
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticEdge {
    pub src: usize,
    pub dst: usize,
    /// Edge scale, uniform on `[0.5, 1)`.
    pub base: f64,
    pub profile: Profile,
}

impl SyntheticEdge {
    /// Noise-free weight at one-based slot `t`.
    pub fn clean_weight(&self, t: usize, slots: usize) -> f64 {
        self.base * self.profile.value(t, slots)
    }
}

/// Random directed base graph (no self-links) with per-edge profiles.
pub fn synthetic_edges(spec: &SynthSpec) -> Result<Vec<SyntheticEdge>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut edges = Vec::new();
    for src in 0..spec.nodes {
        for dst in 0..spec.nodes {
            if src == dst || !rng.random_bool(spec.density) {
                continue;
            }
            let base = rng.random_range(0.5..1.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            let rising = rng.random_bool(0.5);
            let periodic = match spec.pattern {
                Pattern::Periodic => true,
                Pattern::Trend => false,
                Pattern::Mixed => rng.random_bool(0.5),
            };
            let profile = if periodic { Profile::Periodic { phase } } else { Profile::Trend { rising } };
            edges.push(SyntheticEdge { src, dst, base, profile });
        }
    }
    Ok(edges)
}

/// Every edge of the base graph is observed at every slot, with weight
/// `base·f(t) + noise·ε` clipped to `[MIN_SYNTH_WEIGHT, 1]`. Observations are
/// ordered by slot, then by edge.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<DynamicGraphDataset> {
    let edges = synthetic_edges(spec)?;
    // separate stream so the noise never perturbs the graph draw
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(1);
    let mut observations = Vec::with_capacity(edges.len() * spec.slots);
    for t in 1..=spec.slots {
        for e in &edges {
            let eps: f64 = noise_rng.sample(StandardNormal);
            let w = e.clean_weight(t, spec.slots) + spec.noise * eps;
            observations.push(LinkObservation { t, src: e.src, dst: e.dst, weight: w.clamp(MIN_SYNTH_WEIGHT, 1.0) });
        }
    }
    DynamicGraphDataset::new(spec.nodes, spec.slots, observations, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic_spec(nodes: usize, slots: usize, noise: f64, seed: u64) -> SynthSpec {
        SynthSpec { nodes, slots, density: 1.0, pattern: Pattern::Periodic, noise, seed }
    }

    #[test]
    fn parse_two_lines() {
        let ds = parse_dataset_str("1 0 1 0.5\n2 1 0 0.25\n").unwrap();
        assert_eq!((ds.n_nodes(), ds.n_slots(), ds.observations().len()), (2, 2, 2));
        assert_eq!(ds.observations()[1], LinkObservation { t: 2, src: 1, dst: 0, weight: 0.25 });
    }

    #[test]
    fn parse_rejects_duplicate_with_line() {
        let err = parse_dataset_str("1\t0\t1\t0.5\n# comment\n1\t0\t1\t0.7\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateEntry { line: 3, first: 1, .. }));
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn parse_header_override() {
        let ds = parse_dataset_str("#nodes=10 #slots=5\n1\t2\t3\t0.5\n").unwrap();
        assert_eq!((ds.n_nodes(), ds.n_slots()), (10, 5));
        let ds = parse_dataset_str("#nodes=10\n#slots=5\n# another comment\n1\t2\t3\t0.5\n").unwrap();
        assert_eq!((ds.n_nodes(), ds.n_slots()), (10, 5));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        for (text, line) in [
            ("1 0 1 0.5\n1 0 x 0.5\n", 2),
            ("1 0 1\n", 1),
            ("0 0 1 0.5\n", 1),
            ("#nodes=2\n1 0 1 0.5\n1 0 5 0.5\n", 3),
            ("#slots=1\n2 0 1 0.5\n", 2),
            ("1 0 1 nan\n", 1),
        ] {
            match parse_dataset_str(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn split_size_rule() {
        assert_eq!(split_sizes(10, (0.6, 0.2, 0.2)), (6, 2, 2));
        assert_eq!(split_sizes(11, (0.6, 0.2, 0.2)), (7, 2, 2));
        assert_eq!(split_sizes(101, (0.6, 0.2, 0.2)), (61, 20, 20));
    }

    #[test]
    fn split_is_seeded_partition() {
        let ds = generate_synthetic(&periodic_spec(4, 3, 0.0, 1)).unwrap();
        let a = split_dataset(&ds, (0.6, 0.2, 0.2), 9).unwrap();
        let b = split_dataset(&ds, (0.6, 0.2, 0.2), 9).unwrap();
        assert_eq!(a.splits(), b.splits());
        let s = a.splits().unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..ds.observations().len()).collect::<Vec<_>>());
        let c = split_dataset(&ds, (0.6, 0.2, 0.2), 10).unwrap();
        assert_ne!(a.splits(), c.splits());
    }

    #[test]
    fn split_rejects_degenerate() {
        let obs: Vec<_> = (0..4).map(|k| LinkObservation { t: 1, src: k, dst: k + 1, weight: 0.5 }).collect();
        let ds = DynamicGraphDataset::new(5, 1, obs, false).unwrap();
        assert!(matches!(split_dataset(&ds, (0.6, 0.2, 0.2), 0), Err(Error::DegenerateSplit(_))));
        let ds = generate_synthetic(&periodic_spec(3, 2, 0.0, 0)).unwrap();
        assert!(matches!(split_dataset(&ds, (0.9, 0.1, 0.0), 0), Err(Error::DegenerateSplit(_))));
    }

    #[test]
    fn adjacency_from_single_train_obs() {
        let obs = vec![
            LinkObservation { t: 1, src: 0, dst: 1, weight: 0.5 },
            LinkObservation { t: 2, src: 1, dst: 0, weight: 0.7 },
        ];
        let mut ds = DynamicGraphDataset::new(2, 2, obs, false).unwrap();
        ds.splits = Some(Splits { train: vec![0], validation: vec![], test: vec![1] });
        let a = build_adjacency(&ds).unwrap();
        for t in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let expected = if (i, j, t) == (0, 1, 0) { 0.5 } else { 0.0 };
                    assert_eq!(a.re(i, j, t), expected);
                }
            }
        }
        let b = build_adjacency_with(&ds, AdjacencyOptions { binarize: true, symmetrize: true }).unwrap();
        assert_eq!(b.re(0, 1, 0), 1.0);
        assert_eq!(b.re(1, 0, 0), 1.0);
    }

    #[test]
    fn adjacency_requires_split() {
        let ds = generate_synthetic(&periodic_spec(3, 2, 0.0, 0)).unwrap();
        assert!(build_adjacency(&ds).is_err());
    }

    #[test]
    fn synthetic_two_node_periodic() {
        let spec = periodic_spec(2, 2, 0.0, 3);
        let ds = generate_synthetic(&spec).unwrap();
        let edges = synthetic_edges(&spec).unwrap();
        assert_eq!(edges.len(), 2);
        assert_eq!(ds.observations().len(), 4);
        for o in ds.observations() {
            let e = edges.iter().find(|e| e.src == o.src && e.dst == o.dst).unwrap();
            let Profile::Periodic { phase } = e.profile else { panic!("expected periodic profile") };
            let expected = e.base * (0.6 + 0.4 * (PI * (o.t - 1) as f64 + phase).sin());
            assert!((o.weight - expected.clamp(MIN_SYNTH_WEIGHT, 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn synthetic_is_seeded_and_bounded() {
        let spec = SynthSpec { nodes: 20, slots: 6, density: 0.2, pattern: Pattern::Mixed, noise: 0.1, seed: 4 };
        let a = generate_synthetic(&spec).unwrap();
        assert_eq!(a, generate_synthetic(&spec).unwrap());
        assert!(a.observations().iter().all(|o| o.weight > 0.0 && o.weight <= 1.0 && o.src != o.dst));
        let other = generate_synthetic(&SynthSpec { seed: 5, ..spec.clone() }).unwrap();
        assert_ne!(a, other);
        assert!(generate_synthetic(&SynthSpec { density: 0.0, ..spec.clone() }).is_err());
    }

    #[test]
    fn serialize_round_trip() {
        let spec = SynthSpec { nodes: 15, slots: 5, density: 0.3, pattern: Pattern::Mixed, noise: 0.05, seed: 11 };
        let ds = generate_synthetic(&spec).unwrap();
        let parsed = parse_dataset_str(&serialize_dataset(&ds)).unwrap();
        assert_eq!(parsed.n_nodes(), ds.n_nodes());
        assert_eq!(parsed.n_slots(), ds.n_slots());
        assert_eq!(parsed.observations(), ds.observations());
    }
}

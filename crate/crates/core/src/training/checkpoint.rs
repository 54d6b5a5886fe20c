//! Plain-text checkpoint format.
//!
//! ```text
//! mgcn-checkpoint 1
//! nodes <N>
//! slots <T>
//! config <key> <value>          (one line per config entry)
//! embedding <d0> <d1> <d2>
//! <values>
//! weight <kind> <layer> <d0> <d1> <d2>
//! <values>
//! head <len>
//! <values>
//! end
//! ```
//!
//! Values are space separated in tensor storage order and printed with the
//! shortest decimal form that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::config::TrainConfig;
use super::model::{BranchParams, ModelParams};
use crate::error::{Error, Result};
use crate::head::RegressionHead;
use crate::tensor::Tensor3;

pub const CHECKPOINT_MAGIC: &str = "mgcn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub n_nodes: usize,
    pub n_slots: usize,
    pub config: TrainConfig,
    pub params: ModelParams,
}

fn write_values(out: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        write!(out, "{v}").unwrap();
        first = false;
    }
    out.push('\n');
}

pub fn serialize_checkpoint(ck: &Checkpoint) -> String {
    let mut out = String::new();
    writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}").unwrap();
    writeln!(out, "nodes {}", ck.n_nodes).unwrap();
    writeln!(out, "slots {}", ck.n_slots).unwrap();
    for (k, v) in ck.config.to_pairs() {
        writeln!(out, "config {k} {v}").unwrap();
    }
    let [a, b, c] = ck.params.embedding.dims();
    writeln!(out, "embedding {a} {b} {c}").unwrap();
    write_values(&mut out, &ck.params.embedding.real_values());
    for branch in &ck.params.branches {
        for (l, w) in branch.layers.iter().enumerate() {
            let [a, b, c] = w.dims();
            writeln!(out, "weight {} {l} {a} {b} {c}", branch.kind).unwrap();
            write_values(&mut out, &w.real_values());
        }
    }
    writeln!(out, "head {}", ck.params.head.r.len()).unwrap();
    write_values(&mut out, &ck.params.head.r);
    out.push_str("end\n");
    out
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serialize_checkpoint(ck)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text).map_err(|msg| Error::Checkpoint { path: path.to_path_buf(), msg })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> std::result::Result<(usize, Vec<&'a str>), String> {
        self.inner
            .next()
            .map(|(k, l)| (k + 1, l.split_whitespace().collect()))
            .ok_or_else(|| "unexpected end of file".to_string())
    }

    fn values(&mut self, count: usize) -> std::result::Result<Vec<f64>, String> {
        let (line, fields) = self.next_line()?;
        if fields.len() != count {
            return Err(format!("line {line}: expected {count} values, got {}", fields.len()));
        }
        fields.iter().map(|f| f.parse::<f64>().map_err(|_| format!("line {line}: bad value `{f}`"))).collect()
    }
}

fn parse_usize(line: usize, s: &str) -> std::result::Result<usize, String> {
    s.parse().map_err(|_| format!("line {line}: bad integer `{s}`"))
}

fn parse_dims(line: usize, fields: &[&str]) -> std::result::Result<[usize; 3], String> {
    if fields.len() != 3 {
        return Err(format!("line {line}: expected three dims"));
    }
    Ok([parse_usize(line, fields[0])?, parse_usize(line, fields[1])?, parse_usize(line, fields[2])?])
}

pub fn parse_checkpoint(text: &str) -> std::result::Result<Checkpoint, String> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (_, magic) = lines.next_line()?;
    if magic.len() != 2 || magic[0] != CHECKPOINT_MAGIC {
        return Err("not a checkpoint file".into());
    }
    if magic[1] != CHECKPOINT_VERSION.to_string() {
        return Err(format!("unsupported checkpoint version {}", magic[1]));
    }
    let mut n_nodes = None;
    let mut n_slots = None;
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut embedding = None;
    let mut branches: Vec<BranchParams> = Vec::new();
    let mut head = None;
    loop {
        let (line, fields) = lines.next_line()?;
        match fields.first().copied() {
            Some("nodes") if fields.len() == 2 => n_nodes = Some(parse_usize(line, fields[1])?),
            Some("slots") if fields.len() == 2 => n_slots = Some(parse_usize(line, fields[1])?),
            Some("config") if fields.len() == 3 => pairs.push((fields[1].to_string(), fields[2].to_string())),
            Some("embedding") => {
                let dims = parse_dims(line, &fields[1..])?;
                let values = lines.values(dims.iter().product())?;
                embedding = Some(Tensor3::from_real(dims, values).map_err(|e| e.to_string())?);
            }
            Some("weight") if fields.len() == 6 => {
                let kind = fields[1].parse().map_err(|e: Error| format!("line {line}: {e}"))?;
                let layer = parse_usize(line, fields[2])?;
                let dims = parse_dims(line, &fields[3..])?;
                let w = Tensor3::from_real(dims, lines.values(dims.iter().product())?).map_err(|e| e.to_string())?;
                match branches.last_mut() {
                    Some(b) if b.kind == kind && b.layers.len() == layer => b.layers.push(w),
                    _ if layer == 0 => branches.push(BranchParams { kind, layers: vec![w] }),
                    _ => return Err(format!("line {line}: layers out of order")),
                }
            }
            Some("head") if fields.len() == 2 => {
                let len = parse_usize(line, fields[1])?;
                head = Some(RegressionHead::new(lines.values(len)?).map_err(|e| e.to_string())?);
            }
            Some("end") => break,
            _ => return Err(format!("line {line}: unexpected record")),
        }
    }
    let config =
        TrainConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).map_err(|e| e.to_string())?;
    let params = ModelParams {
        embedding: embedding.ok_or("missing embedding")?,
        branches,
        head: head.ok_or("missing head")?,
        ensemble: config.ensemble,
    };
    let expected: Vec<_> = config.transform.branches();
    if params.branches.iter().map(|b| b.kind).collect::<Vec<_>>() != expected {
        return Err("weight branches do not match the configured transform".into());
    }
    Ok(Checkpoint {
        n_nodes: n_nodes.ok_or("missing node count")?,
        n_slots: n_slots.ok_or("missing slot count")?,
        config,
        params,
    })
}

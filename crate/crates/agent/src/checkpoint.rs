//! Plain-text checkpoint format.
//!
//! ```text
//! starmec-ppo-checkpoint 1
//! activation tanh
//! actor <n_layers> <size_0> ... <size_n>
//! w <in> <out>
//! <row 0 of W, space separated>
//! ...
//! b <out>
//! <bias values>
//! ... (next layer)
//! log_std <act_dim>
//! <values>
//! critic <n_layers> <size_0> ... <size_n>
//! ... (layers as above)
//! end
//! ```
//!
//! Weight matrices are row-major with one input unit per line. Numbers use
//! Rust's shortest round-trip formatting, so save followed by load is exact.
//! Optimiser moments are not stored; a loaded policy restarts Adam from zero.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};

use crate::error::{AgentError, Result};
use crate::mlp::{Activation, Layer, Mlp};
use crate::ppo::PolicyParams;

pub const MAGIC: &str = "starmec-ppo-checkpoint";
pub const VERSION: u32 = 1;

fn join(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
}

fn write_net<W: Write>(out: &mut W, tag: &str, net: &Mlp) -> std::io::Result<()> {
    let sizes: Vec<String> = net.sizes.iter().map(|s| s.to_string()).collect();
    writeln!(out, "{tag} {} {}", net.layers.len(), sizes.join(" "))?;
    for layer in &net.layers {
        writeln!(out, "w {} {}", layer.w.nrows(), layer.w.ncols())?;
        for row in layer.w.rows() {
            writeln!(out, "{}", join(row.iter().copied()))?;
        }
        writeln!(out, "b {}", layer.b.len())?;
        writeln!(out, "{}", join(layer.b.iter().copied()))?;
    }
    Ok(())
}

pub fn save<W: Write>(params: &PolicyParams, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC} {VERSION}")?;
    writeln!(out, "activation {}", params.actor.hidden.name())?;
    write_net(&mut out, "actor", &params.actor)?;
    writeln!(out, "log_std {}", params.log_std.len())?;
    writeln!(out, "{}", join(params.log_std.iter().copied()))?;
    write_net(&mut out, "critic", &params.critic)?;
    writeln!(out, "end")?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.line_no += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: &str) -> AgentError {
        AgentError::Checkpoint(format!("line {}: {msg}", self.line_no))
    }

    /// Reads `<tag> <usize>...` and returns the numbers.
    fn header(&mut self, tag: &str) -> Result<Vec<usize>> {
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(tag) {
            return Err(self.err(&format!("expected `{tag}`")));
        }
        parts
            .map(|p| p.parse::<usize>().map_err(|_| self.err("bad integer")))
            .collect()
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|p| p.parse::<f64>().map_err(|_| self.err("bad number")))
            .collect::<Result<_>>()?;
        if v.len() != n {
            return Err(self.err(&format!("expected {n} numbers, found {}", v.len())));
        }
        Ok(v)
    }
}

fn read_net<R: BufRead>(lines: &mut Lines<R>, tag: &str, act: Activation) -> Result<Mlp> {
    let h = lines.header(tag)?;
    let n_layers = *h.first().ok_or_else(|| lines.err("missing layer count"))?;
    let sizes = h[1..].to_vec();
    if sizes.len() != n_layers + 1 {
        return Err(lines.err("layer count does not match size list"));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let dims = lines.header("w")?;
        if dims != [sizes[l], sizes[l + 1]] {
            return Err(lines.err("weight shape does not match size list"));
        }
        let mut data = Vec::with_capacity(dims[0] * dims[1]);
        for _ in 0..dims[0] {
            data.extend(lines.floats(dims[1])?);
        }
        let w = Array2::from_shape_vec((dims[0], dims[1]), data).map_err(|e| lines.err(&e.to_string()))?;
        let bn = lines.header("b")?;
        if bn != [sizes[l + 1]] {
            return Err(lines.err("bias length does not match size list"));
        }
        let b = Array1::from(lines.floats(sizes[l + 1])?);
        layers.push(Layer { w, b });
    }
    Ok(Mlp {
        sizes,
        hidden: act,
        layers,
    })
}

pub fn load<R: BufRead>(input: R) -> Result<PolicyParams> {
    let mut lines = Lines {
        inner: input.lines(),
        line_no: 0,
    };
    let first = lines.next_line()?;
    let mut parts = first.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(lines.err("not a policy checkpoint"));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| lines.err("missing version"))?;
    if version != VERSION {
        return Err(lines.err(&format!("unsupported version {version}")));
    }
    let act_line = lines.next_line()?;
    let act = act_line
        .strip_prefix("activation ")
        .and_then(Activation::parse)
        .ok_or_else(|| lines.err("bad activation"))?;
    let actor = read_net(&mut lines, "actor", act)?;
    let n = lines.header("log_std")?;
    if n != [actor.output_dim()] {
        return Err(lines.err("log_std length does not match actor output"));
    }
    let log_std = lines.floats(n[0])?;
    let critic = read_net(&mut lines, "critic", act)?;
    if critic.input_dim() != actor.input_dim() || critic.output_dim() != 1 {
        return Err(lines.err("critic shape does not match actor"));
    }
    if lines.next_line()?.trim() != "end" {
        return Err(lines.err("expected `end`"));
    }
    Ok(PolicyParams { actor, log_std, critic })
}

pub fn save_file(params: &PolicyParams, path: &std::path::Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    save(params, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_file(path: &std::path::Path) -> Result<PolicyParams> {
    let f = std::fs::File::open(path)?;
    load(std::io::BufReader::new(f))
}

//! Line-oriented text dump of an [`NnState`], for resuming a run or
//! inspecting trained weights.
//!
//! ```text
//! wifi-load-nn 1
//! sizes 2 32 16 8 4 1
//! activations tanh tanh tanh none none
//! t 6000
//! prev_output 2.5e1
//! regime stable
//! cusum <g> <q> <e> <triggered 0|1>
//! adam <beta1> <beta2> <eps> <step>
//! params <count>
//! <one value per line>
//! adam_m <count>
//! ...
//! adam_v <count>
//! ...
//! ```
//!
//! Reals are written in shortest round-trip exponent form, so a dump read
//! back reproduces the state bit for bit. Layer `i`'s weights are stored
//! row-major (`outputs x inputs`) followed by its biases.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, Adam, Mlp, NnState, Regime};
use crate::cusum::Cusum;
use crate::error::{Error, Result};

pub const MAGIC: &str = "wifi-load-nn";
pub const VERSION: u32 = 1;

pub fn write_state<W: Write>(state: &NnState, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{MAGIC} {VERSION}")?;
    let sizes: Vec<String> = state.mlp.sizes().iter().map(|s| s.to_string()).collect();
    writeln!(w, "sizes {}", sizes.join(" "))?;
    let acts: Vec<&str> = state.mlp.activations().iter().map(|a| a.name()).collect();
    writeln!(w, "activations {}", acts.join(" "))?;
    writeln!(w, "t {}", state.t)?;
    writeln!(w, "prev_output {:e}", state.prev_output)?;
    let regime = match state.regime {
        Regime::Stable => "stable",
        Regime::Changed => "changed",
    };
    writeln!(w, "regime {regime}")?;
    let c = &state.cusum;
    writeln!(
        w,
        "cusum {:e} {:e} {:e} {}",
        c.g, c.q, c.e, c.triggered as u8
    )?;
    let a = &state.adam;
    writeln!(w, "adam {:e} {:e} {:e} {}", a.beta1, a.beta2, a.eps, a.step)?;
    for (name, values) in [
        ("params", &state.mlp.params),
        ("adam_m", &a.m),
        ("adam_v", &a.v),
    ] {
        writeln!(w, "{name} {}", values.len())?;
        for v in values {
            writeln!(w, "{v:e}")?;
        }
    }
    Ok(())
}

pub fn save(state: &NnState, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_state(state, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<NnState> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_state(file).map_err(|msg| Error::Parse {
        path: path.to_owned(),
        message: msg,
    })
}

struct Lines<R: BufRead> {
    inner: std::io::Lines<R>,
    no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String, String> {
        self.no += 1;
        match self.inner.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(format!("line {}: {e}", self.no)),
            None => Err(format!("line {}: unexpected end of file", self.no)),
        }
    }

    /// Reads `key v1 v2 ...` and returns the values.
    fn keyed(&mut self, key: &str) -> Result<Vec<String>, String> {
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(k) if k == key => Ok(parts.map(str::to_owned).collect()),
            _ => Err(format!("line {}: expected `{key}`", self.no)),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T, String> {
        s.parse()
            .map_err(|_| format!("line {}: bad value `{s}`", self.no))
    }

    fn block(&mut self, key: &str, len: usize) -> Result<Vec<f64>, String> {
        let head = self.keyed(key)?;
        let n: usize = self.parse(head.first().ok_or("missing count")?)?;
        if n != len {
            return Err(format!(
                "line {}: `{key}` has {n} values, expected {len}",
                self.no
            ));
        }
        (0..n)
            .map(|_| {
                let l = self.next_line()?;
                self.parse(l.trim())
            })
            .collect()
    }
}

pub fn read_state<R: Read>(r: R) -> Result<NnState, String> {
    let mut lines = Lines {
        inner: BufReader::new(r).lines(),
        no: 0,
    };
    let header = lines.keyed(MAGIC)?;
    let version: u32 = lines.parse(header.first().ok_or("missing version")?)?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let sizes = lines
        .keyed("sizes")?
        .iter()
        .map(|s| lines.parse::<usize>(s))
        .collect::<Result<Vec<_>, _>>()?;
    let activations = lines
        .keyed("activations")?
        .iter()
        .map(|s| match s.as_str() {
            "tanh" => Ok(Activation::Tanh),
            "none" => Ok(Activation::None),
            other => Err(format!("unknown activation `{other}`")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut mlp = Mlp::zeros(&sizes, &activations).map_err(|e| e.to_string())?;

    let t = lines.keyed("t")?.concat();
    let t = lines.parse(&t)?;
    let prev_output = lines.keyed("prev_output")?.concat();
    let prev_output = lines.parse(&prev_output)?;
    let regime = match lines.keyed("regime")?.concat().as_str() {
        "stable" => Regime::Stable,
        "changed" => Regime::Changed,
        other => return Err(format!("unknown regime `{other}`")),
    };
    let c = lines.keyed("cusum")?;
    if c.len() != 4 {
        return Err("cusum needs 4 values".into());
    }
    let cusum = Cusum {
        g: lines.parse(&c[0])?,
        q: lines.parse(&c[1])?,
        e: lines.parse(&c[2])?,
        triggered: lines.parse::<u8>(&c[3])? != 0,
    };
    let a = lines.keyed("adam")?;
    if a.len() != 4 {
        return Err("adam needs 4 values".into());
    }
    let n = mlp.num_params();
    mlp.params = lines.block("params", n)?;
    let adam = Adam {
        beta1: lines.parse(&a[0])?,
        beta2: lines.parse(&a[1])?,
        eps: lines.parse(&a[2])?,
        step: lines.parse(&a[3])?,
        m: lines.block("adam_m", n)?,
        v: lines.block("adam_v", n)?,
    };
    Ok(NnState {
        mlp,
        adam,
        prev_output,
        cusum,
        regime,
        t,
    })
}

//! Per-chain trace files: `# key=value` metadata, a long-format
//! `parameter,iteration,value` table and a trailing SHA-256 line over every
//! preceding byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nbmix::model::{Coefficients, MixtureParams};
use nbmix::sampler::AcceptanceStats;
use nbmix::{Draw, SamplerConfig, Trace, Variant};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

const MAGIC: &str = "# nbmix trace v1";
const CHECKSUM_PREFIX: &str = "# sha256=";
const HEADER: &str = "parameter,iteration,value";

pub fn trace_file_name(chain_id: usize) -> String {
    format!("trace_chain{chain_id}.csv")
}

/// Trace files in `dir`, ordered by chain index.
pub fn trace_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(CliError::io(dir))? {
        let path = entry.map_err(CliError::io(dir))?.path();
        let chain = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("trace_chain")?.strip_suffix(".csv")?.parse::<usize>().ok());
        if let Some(c) = chain {
            found.push((c, path));
        }
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn checksum(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

pub fn render_trace(trace: &Trace, variant: Variant, config: &SamplerConfig) -> String {
    let k = trace.k();
    let d = trace.draws.first().map_or(0, |dr| dr.params.d());
    let acc = &trace.acceptance;
    let mut s = String::new();
    let meta: [(&str, String); 16] = [
        ("chain_id", trace.chain_id.to_string()),
        ("master_seed", trace.seed.to_string()),
        ("variant", variant.to_string()),
        ("k", k.to_string()),
        ("d", d.to_string()),
        ("iterations", config.iterations.to_string()),
        ("burn_in", config.burn_in.to_string()),
        ("thin", config.thin.to_string()),
        ("draws", trace.len().to_string()),
        ("clamped_predictors", trace.clamped_predictors.to_string()),
        ("nonfinite_rejections", trace.nonfinite_rejections.to_string()),
        ("beta_accepted", join(&acc.beta_accepted)),
        ("beta_proposed", join(&acc.beta_proposed)),
        ("psi_accepted", join(&acc.psi_accepted)),
        ("psi_proposed", join(&acc.psi_proposed)),
        ("adapt_window", config.adapt_window.to_string()),
    ];
    s.push_str(MAGIC);
    s.push('\n');
    for (key, value) in meta {
        let _ = writeln!(s, "# {key}={value}");
    }
    s.push_str(HEADER);
    s.push('\n');
    for (i, draw) in trace.draws.iter().enumerate() {
        let it = config.burn_in + (i + 1) * config.thin - 1;
        let p = &draw.params;
        for j in 0..k {
            let _ = writeln!(s, "c[{j}],{it},{}", p.c[j]);
        }
        for j in 0..k {
            for col in 0..d {
                let _ = writeln!(s, "beta[{j}][{col}],{it},{}", p.beta.get(j, col));
            }
        }
        for j in 0..k {
            let _ = writeln!(s, "psi[{j}],{it},{}", p.psi[j]);
        }
        if let Some(pi) = &p.pi {
            for (j, v) in pi.iter().enumerate() {
                let _ = writeln!(s, "pi[{j}],{it},{v}");
            }
        }
        for (j, v) in draw.counts.iter().enumerate() {
            let _ = writeln!(s, "count[{j}],{it},{v}");
        }
        if let Some(zeros) = &draw.structural_zeros {
            for (j, v) in zeros.iter().enumerate() {
                let _ = writeln!(s, "zeros[{j}],{it},{v}");
            }
        }
    }
    let sum = checksum(&s);
    let _ = writeln!(s, "{CHECKSUM_PREFIX}{sum}");
    s
}

pub fn write_trace(path: &Path, trace: &Trace, variant: Variant, config: &SamplerConfig) -> CliResult<()> {
    std::fs::write(path, render_trace(trace, variant, config)).map_err(CliError::io(path))
}

/// Metadata and draws read back from a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTrace {
    pub trace: Trace,
    pub variant: Variant,
    pub meta: BTreeMap<String, String>,
}

pub fn read_trace(path: &Path) -> CliResult<StoredTrace> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_trace(&text).map_err(|e| match e {
        TraceError::Checksum => CliError::Checksum(path.to_path_buf()),
        TraceError::Format(m) => CliError::input(format!("{}: {m}", path.display())),
    })
}

#[derive(Debug)]
pub enum TraceError {
    Checksum,
    Format(String),
}

fn bad<T>(m: impl Into<String>) -> Result<T, TraceError> {
    Err(TraceError::Format(m.into()))
}

pub fn parse_trace(text: &str) -> Result<StoredTrace, TraceError> {
    let body_end = text
        .trim_end_matches('\n')
        .rfind('\n')
        .map_or(0, |i| i + 1);
    let (body, last) = text.split_at(body_end);
    let Some(stated) = last.trim_end().strip_prefix(CHECKSUM_PREFIX) else {
        return Err(TraceError::Checksum);
    };
    if stated != checksum(body) {
        return Err(TraceError::Checksum);
    }
    let mut lines = body.lines();
    if lines.next() != Some(MAGIC) {
        return bad("not a trace file");
    }
    let mut meta = BTreeMap::new();
    for line in lines.by_ref() {
        if line == HEADER {
            break;
        }
        let Some((k, v)) = line.strip_prefix("# ").and_then(|l| l.split_once('=')) else {
            return bad(format!("bad metadata line {line:?}"));
        };
        meta.insert(k.to_string(), v.to_string());
    }
    let get = |key: &str| -> Result<&String, TraceError> {
        meta.get(key).ok_or_else(|| TraceError::Format(format!("missing metadata {key}")))
    };
    let num = |key: &str| -> Result<usize, TraceError> {
        get(key)?.parse().map_err(|_| TraceError::Format(format!("bad metadata {key}")))
    };
    let list = |key: &str| -> Result<Vec<usize>, TraceError> {
        let raw = get(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|v| v.parse().map_err(|_| TraceError::Format(format!("bad metadata {key}"))))
            .collect()
    };
    let variant: Variant = get("variant")?
        .parse()
        .map_err(|_| TraceError::Format("bad variant".into()))?;
    let zinb = variant == Variant::Zinb;
    let (k, d, n_draws) = (num("k")?, num("d")?, num("draws")?);
    let per_draw = k * (3 + d) + if zinb { 2 * k } else { 0 };

    let mut values: Vec<&str> = Vec::with_capacity(per_draw * n_draws);
    let mut names: Vec<&str> = Vec::with_capacity(per_draw);
    for line in lines {
        let mut parts = line.rsplitn(3, ',');
        let (Some(v), Some(_it), Some(name)) = (parts.next(), parts.next(), parts.next()) else {
            return bad(format!("bad row {line:?}"));
        };
        if names.len() < per_draw {
            names.push(name);
        } else if names[values.len() % per_draw] != name {
            return bad(format!("unexpected parameter {name}"));
        }
        values.push(v);
    }
    if values.len() != per_draw * n_draws {
        return bad(format!("expected {} rows, found {}", per_draw * n_draws, values.len()));
    }
    let f = |s: &str| s.parse::<f64>().map_err(|_| TraceError::Format(format!("bad value {s:?}")));
    let u = |s: &str| s.parse::<usize>().map_err(|_| TraceError::Format(format!("bad count {s:?}")));
    let mut draws = Vec::with_capacity(n_draws);
    for chunk in values.chunks(per_draw) {
        let mut at = 0;
        let mut take = |m: usize| {
            let s = &chunk[at..at + m];
            at += m;
            s
        };
        let c = take(k).iter().map(|s| f(s)).collect::<Result<Vec<_>, _>>()?;
        let flat = take(k * d).iter().map(|s| f(s)).collect::<Result<Vec<_>, _>>()?;
        let psi = take(k).iter().map(|s| f(s)).collect::<Result<Vec<_>, _>>()?;
        let pi = if zinb {
            Some(take(k).iter().map(|s| f(s)).collect::<Result<Vec<_>, _>>()?)
        } else {
            None
        };
        let counts = take(k).iter().map(|s| u(s)).collect::<Result<Vec<_>, _>>()?;
        let structural_zeros = if zinb {
            Some(take(k).iter().map(|s| u(s)).collect::<Result<Vec<_>, _>>()?)
        } else {
            None
        };
        let rows: Vec<Vec<f64>> = flat.chunks(d.max(1)).map(<[f64]>::to_vec).collect();
        let beta = Coefficients::from_rows(&rows).map_err(|e| TraceError::Format(e.to_string()))?;
        draws.push(Draw {
            params: MixtureParams { c, beta, psi, pi },
            counts,
            structural_zeros,
        });
    }
    let trace = Trace {
        chain_id: num("chain_id")?,
        seed: get("master_seed")?
            .parse()
            .map_err(|_| TraceError::Format("bad master_seed".into()))?,
        draws,
        acceptance: AcceptanceStats {
            beta_accepted: list("beta_accepted")?,
            beta_proposed: list("beta_proposed")?,
            psi_accepted: list("psi_accepted")?,
            psi_proposed: list("psi_proposed")?,
        },
        clamped_predictors: num("clamped_predictors")?,
        nonfinite_rejections: num("nonfinite_rejections")?,
    };
    Ok(StoredTrace { trace, variant, meta })
}

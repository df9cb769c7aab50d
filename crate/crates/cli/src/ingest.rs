//! Delimited-text input and output of datasets.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nbmix::model::Factor;
use nbmix::{Count, Dataset};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const INTERCEPT: &str = "intercept";

/// How to turn a table into a design matrix.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub outcome: String,
    /// `None` picks tab when the header has tabs and no commas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<char>,
    /// Categorical column name to its reference level.
    #[serde(default)]
    pub categorical: BTreeMap<String, String>,
    /// Declared level sets; values outside them are rejected.
    #[serde(default)]
    pub levels: BTreeMap<String, Vec<String>>,
}

impl Encoding {
    pub fn new(outcome: &str) -> Self {
        Self {
            outcome: outcome.to_string(),
            ..Default::default()
        }
    }

    fn is_categorical(&self, name: &str) -> bool {
        self.categorical.contains_key(name) || self.levels.contains_key(name)
    }
}

/// Name of the indicator column for `level` of factor `name`.
pub fn indicator_name(name: &str, level: &str) -> String {
    format!("{name}:{level}")
}

pub fn ingest(path: &Path, encoding: &Encoding) -> CliResult<Dataset> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(CliError::io(path))?;
    let ds = ingest_str(&text, encoding)
        .map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        })?;
    log::info!(
        "read {} rows from {}; columns: {}",
        ds.n(),
        path.display(),
        ds.column_names().join(", ")
    );
    Ok(ds)
}

fn pick_delimiter(text: &str, encoding: &Encoding) -> u8 {
    match encoding.delimiter {
        Some(c) => c as u8,
        None => {
            let header = text.lines().next().unwrap_or("");
            if header.contains('\t') && !header.contains(',') {
                b'\t'
            } else {
                b','
            }
        }
    }
}

fn parse_count(raw: &str, row: usize) -> CliResult<Count> {
    let s = raw.trim();
    s.parse::<Count>().map_err(|_| {
        let what = match s.parse::<f64>() {
            Ok(v) if v < 0.0 => "negative count",
            Ok(_) => "non-integer count",
            Err(_) => "not a count",
        };
        CliError::input(format!("row {row}: {what} {s:?} in the outcome column"))
    })
}

enum Source {
    Numeric(usize),
    Factor(usize),
}

struct FactorBuilder {
    name: String,
    levels: Vec<String>,
    declared: bool,
    raw: Vec<String>,
}

pub fn ingest_str(text: &str, encoding: &Encoding) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(pick_delimiter(text, encoding))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(CliError::input("empty input: no header row"));
    }
    let outcome = header
        .iter()
        .position(|h| *h == encoding.outcome)
        .ok_or_else(|| CliError::input(format!("outcome column {:?} not found", encoding.outcome)))?;
    for name in encoding.categorical.keys().chain(encoding.levels.keys()) {
        if !header.contains(name) {
            return Err(CliError::input(format!("categorical column {name:?} not found")));
        }
        if *name == encoding.outcome {
            return Err(CliError::input(format!("outcome column {name:?} cannot be categorical")));
        }
    }

    let mut sources = Vec::new();
    let mut numeric_names = Vec::new();
    let mut factors: Vec<FactorBuilder> = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if j == outcome {
            continue;
        }
        if name.is_empty() {
            return Err(CliError::input(format!("column {} has an empty name", j + 1)));
        }
        if encoding.is_categorical(name) {
            let declared = encoding.levels.get(name);
            sources.push((j, Source::Factor(factors.len())));
            factors.push(FactorBuilder {
                name: name.clone(),
                levels: declared.cloned().unwrap_or_default(),
                declared: declared.is_some(),
                raw: Vec::new(),
            });
        } else {
            sources.push((j, Source::Numeric(numeric_names.len())));
            numeric_names.push(name.clone());
        }
    }

    let mut y = Vec::new();
    let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); numeric_names.len()];
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| CliError::input(format!("row {row}: {e}")))?;
        if record.len() != header.len() {
            return Err(CliError::input(format!(
                "row {row}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        y.push(parse_count(&record[outcome], row)?);
        for (j, src) in &sources {
            let cell = &record[*j];
            match src {
                Source::Numeric(m) => {
                    let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                        CliError::input(format!(
                            "row {row}: column {:?} value {cell:?} is not numeric; declare it categorical",
                            header[*j]
                        ))
                    })?;
                    numeric[*m].push(v);
                }
                Source::Factor(f) => {
                    let fb = &mut factors[*f];
                    if fb.declared && !fb.levels.iter().any(|l| l == cell) {
                        return Err(CliError::input(format!(
                            "row {row}: unknown category {cell:?} in column {:?}",
                            fb.name
                        )));
                    }
                    fb.raw.push(cell.to_string());
                }
            }
        }
    }
    if y.is_empty() {
        return Err(CliError::input("input has a header but no data rows"));
    }
    let n = y.len();

    let mut built: Vec<Factor> = Vec::new();
    for fb in factors {
        let reference = encoding.categorical.get(&fb.name).cloned();
        let mut levels = if fb.declared {
            fb.levels.clone()
        } else {
            let mut seen: Vec<String> = fb.raw.clone();
            seen.sort();
            seen.dedup();
            seen
        };
        let reference = reference.unwrap_or_else(|| levels[0].clone());
        let Some(pos) = levels.iter().position(|l| *l == reference) else {
            return Err(CliError::input(format!(
                "reference level {reference:?} does not occur in column {:?}",
                fb.name
            )));
        };
        let r = levels.remove(pos);
        levels.insert(0, r);
        let codes = fb
            .raw
            .iter()
            .map(|v| levels.iter().position(|l| l == v).expect("level collected above"))
            .collect();
        built.push(Factor {
            name: fb.name,
            levels,
            codes,
        });
    }

    let mut names = vec![INTERCEPT.to_string()];
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (_, src) in &sources {
        match src {
            Source::Numeric(m) => {
                names.push(numeric_names[*m].clone());
                columns.push(numeric[*m].clone());
            }
            Source::Factor(f) => {
                let fac = &built[*f];
                for (l, level) in fac.levels.iter().enumerate().skip(1) {
                    names.push(indicator_name(&fac.name, level));
                    columns.push(fac.codes.iter().map(|&c| f64::from(u8::from(c == l))).collect());
                }
            }
        }
    }
    for (name, col) in names.iter().skip(1).zip(&columns) {
        if col.iter().all(|&v| v == col[0]) {
            log::warn!("column {name:?} is constant; its coefficient is identified only by the prior");
        }
    }
    let d = names.len();
    let mut x = Vec::with_capacity(n * d);
    for i in 0..n {
        x.push(1.0);
        x.extend(columns.iter().map(|c| c[i]));
    }
    Dataset::new(y, x, names)
        .and_then(|ds| ds.with_factors(built))
        .map_err(|e| CliError::input(e.to_string()))
}

/// Writes `data` as comma-separated text that [`ingest`] reads back into an
/// identical dataset, given the factors' level declarations.
pub fn export(data: &Dataset, outcome: &str, path: &Path) -> CliResult<()> {
    let mut f = File::create(path).map_err(CliError::io(path))?;
    f.write_all(export_string(data, outcome).as_bytes())
        .map_err(CliError::io(path))
}

pub fn export_string(data: &Dataset, outcome: &str) -> String {
    enum Col<'a> {
        Numeric(usize),
        Factor(&'a Factor),
    }
    let mut cols = Vec::new();
    let mut header = vec![outcome.to_string()];
    let mut skip = 0;
    for (j, name) in data.column_names().iter().enumerate().skip(1) {
        if skip > 0 {
            skip -= 1;
            continue;
        }
        match data
            .factors()
            .iter()
            .find(|f| f.levels.len() > 1 && *name == indicator_name(&f.name, &f.levels[1]))
        {
            Some(f) => {
                header.push(f.name.clone());
                cols.push(Col::Factor(f));
                skip = f.levels.len() - 2;
            }
            None => {
                header.push(name.clone());
                cols.push(Col::Numeric(j));
            }
        }
    }
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for i in 0..data.n() {
        let row = data.row(i);
        let mut rec = vec![data.y()[i].to_string()];
        for c in &cols {
            rec.push(match c {
                Col::Numeric(j) => row[*j].to_string(),
                Col::Factor(f) => f.levels[f.codes[i]].clone(),
            });
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Parses `NAME=VALUE`.
pub fn parse_assignment(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    if k.is_empty() || v.is_empty() {
        return Err(format!("expected NAME=VALUE, got {s:?}"));
    }
    Ok((k.to_string(), v.to_string()))
}

/// Parses `NAME=a,b,c`.
pub fn parse_levels(s: &str) -> Result<(String, Vec<String>), String> {
    let (k, v) = parse_assignment(s)?;
    Ok((k, v.split(',').map(|l| l.trim().to_string()).collect()))
}

//! Plot-data files, human-readable tables and the summary document.

use std::fmt::Write as _;
use std::path::Path;

use nbmix::diagnostics::{FitSummary, ParamConvergence};
use nbmix::{Dataset, ModelSpec, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// `v` to six significant digits.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{v:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(CliError::io(path))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// One row of the IRR forest-plot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrRow {
    pub component: usize,
    pub covariate: String,
    pub mean: f64,
    pub hpdi_lo: f64,
    pub hpdi_hi: f64,
    pub excludes_one: bool,
}

pub fn irr_rows(summary: &FitSummary) -> Vec<IrrRow> {
    summary
        .occupied()
        .flat_map(|c| {
            c.irr.iter().map(move |e| IrrRow {
                component: c.component,
                covariate: e.covariate.clone(),
                mean: e.mean,
                hpdi_lo: e.lo,
                hpdi_hi: e.hi,
                excludes_one: e.excludes_one,
            })
        })
        .collect()
}

pub fn irr_csv(rows: &[IrrRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    if rows.is_empty() {
        return "component,covariate,mean,hpdi_lo,hpdi_hi,excludes_one\n".into();
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn read_irr(path: &Path) -> CliResult<Vec<IrrRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn pmf_csv(summary: &FitSummary) -> String {
    csv_text(
        &["component", "y", "probability"],
        summary.occupied().flat_map(|c| {
            c.pmf
                .iter()
                .enumerate()
                .map(move |(y, p)| vec![c.component.to_string(), y.to_string(), p.to_string()])
        }),
    )
}

pub fn prevalence_csv(summary: &FitSummary) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    csv_text(
        &[
            "component", "occupied", "prevalence", "hpdi_lo", "hpdi_hi", "mean_at_reference", "psi",
            "pi", "count_mode", "empirical_mode", "assigned",
        ],
        summary.components.iter().map(|c| {
            vec![
                c.component.to_string(),
                c.occupied.to_string(),
                c.prevalence.mean.to_string(),
                c.prevalence.lo.to_string(),
                c.prevalence.hi.to_string(),
                c.mean_at_reference.mean.to_string(),
                c.psi.mean.to_string(),
                opt(c.pi.map(|p| p.mean)),
                c.count_mode.to_string(),
                c.empirical_mode.map_or(String::new(), |m| m.to_string()),
                c.assigned.to_string(),
            ]
        }),
    )
}

pub fn assignments_csv(assignments: &[usize]) -> String {
    csv_text(
        &["row", "component"],
        assignments
            .iter()
            .enumerate()
            .map(|(i, c)| vec![(i + 1).to_string(), c.to_string()]),
    )
}

/// Share of each factor level among the observations hard-assigned to a
/// component. Components with no assigned observations are left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTabRow {
    pub factor: String,
    pub level: String,
    pub component: usize,
    pub count: usize,
    pub percent: f64,
}

pub fn crosstab(summary: &FitSummary, data: &Dataset) -> Vec<CrossTabRow> {
    let mut rows = Vec::new();
    for f in data.factors() {
        for comp in summary.occupied() {
            let members: Vec<usize> = summary
                .assignments
                .iter()
                .enumerate()
                .filter(|(_, &a)| a == comp.component)
                .map(|(i, _)| f.codes[i])
                .collect();
            if members.is_empty() {
                continue;
            }
            for (l, level) in f.levels.iter().enumerate() {
                let count = members.iter().filter(|&&c| c == l).count();
                let percent = 100.0 * count as f64 / members.len() as f64;
                rows.push(CrossTabRow {
                    factor: f.name.clone(),
                    level: level.clone(),
                    component: comp.component,
                    count,
                    percent,
                });
            }
        }
    }
    rows
}

pub fn crosstab_csv(rows: &[CrossTabRow]) -> String {
    csv_text(
        &["factor", "level", "component", "count", "percent"],
        rows.iter().map(|r| {
            vec![
                r.factor.clone(),
                r.level.clone(),
                r.component.to_string(),
                r.count.to_string(),
                r.percent.to_string(),
            ]
        }),
    )
}

/// Left-aligned text table.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let mut s = String::new();
    let line = |cells: Vec<&str>, s: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(s, "{}", padded.join("  ").trim_end());
    };
    line(header.to_vec(), &mut s);
    for r in rows {
        line(r.iter().map(String::as_str).collect(), &mut s);
    }
    s
}

pub fn prevalence_table(summary: &FitSummary) -> String {
    let rows: Vec<Vec<String>> = summary
        .occupied()
        .map(|c| {
            vec![
                c.component.to_string(),
                sig6(c.prevalence.mean),
                format!("[{}, {}]", sig6(c.prevalence.lo), sig6(c.prevalence.hi)),
                sig6(c.mean_at_reference.mean),
                sig6(c.psi.mean),
                c.pi.map_or("-".into(), |p| sig6(p.mean)),
                c.count_mode.to_string(),
                c.empirical_mode.map_or("-".into(), |m| m.to_string()),
                c.assigned.to_string(),
            ]
        })
        .collect();
    table(
        &["component", "prevalence", "95% HPDI", "mean", "psi", "pi", "mode", "empirical mode", "assigned"],
        &rows,
    )
}

pub fn irr_table(rows: &[IrrRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.component.to_string(),
                r.covariate.clone(),
                sig6(r.mean),
                format!("[{}, {}]", sig6(r.hpdi_lo), sig6(r.hpdi_hi)),
                if r.excludes_one { "*".into() } else { String::new() },
            ]
        })
        .collect();
    table(&["component", "covariate", "IRR", "95% HPDI", "excludes 1"], &body)
}

pub fn crosstab_table(rows: &[CrossTabRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.factor.clone(),
                r.level.clone(),
                r.component.to_string(),
                r.count.to_string(),
                format!("{}%", sig6(r.percent)),
            ]
        })
        .collect();
    table(&["factor", "level", "component", "count", "share"], &body)
}

/// Per-chain sampler bookkeeping for the summary document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain_id: usize,
    pub draws: usize,
    pub beta_acceptance: Vec<Option<f64>>,
    pub psi_acceptance: Vec<Option<f64>>,
    pub clamped_predictors: usize,
    pub nonfinite_rejections: usize,
}

/// Contents of `summary.json`. Holds no paths or timestamps so reruns
/// produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub input_sha256: String,
    pub spec: ModelSpec,
    pub sampler: SamplerConfig,
    pub occupancy_threshold: f64,
    pub rhat_threshold: f64,
    pub summary: FitSummary,
    /// `None` with a single chain.
    pub convergence: Option<Vec<ParamConvergence>>,
    pub max_rhat: Option<f64>,
    pub converged: Option<bool>,
    pub chains: Vec<ChainReport>,
    pub warnings: Vec<String>,
}

impl SummaryDocument {
    pub fn to_json(&self) -> String {
        let mut doc = self.clone();
        for c in &mut doc.summary.components {
            c.pmf.clear();
        }
        let mut s = serde_json::to_string_pretty(&doc).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub fn write_all(dir: &Path, files: &[(&str, String)]) -> CliResult<()> {
    for (name, text) in files {
        write_file(&dir.join(name), text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(8.312345678), "8.31235");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(2.0), "2");
        assert_eq!(sig6(-0.5), "-0.5");
        assert_eq!(sig6(123456.4), "123456");
    }

    #[test]
    fn irr_file_round_trips() {
        let rows = vec![
            IrrRow {
                component: 0,
                covariate: "treatment:chemo, radiation".into(),
                mean: 8.300000000000001,
                hpdi_lo: 1.0 / 3.0,
                hpdi_hi: 1e-300,
                excludes_one: true,
            },
            IrrRow {
                component: 2,
                covariate: "x1".into(),
                mean: 1.0,
                hpdi_lo: 1.0,
                hpdi_hi: 1.0,
                excludes_one: false,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("irr.csv");
        std::fs::write(&path, irr_csv(&rows)).unwrap();
        assert_eq!(read_irr(&path).unwrap(), rows);
    }
}

//! The `fit`, `simulate` and `report` commands.

use std::path::{Path, PathBuf};

use nbmix::diagnostics::{relabel_with, summarize, tracked_convergence, FitSummary, RelabeledTrace, SummaryOptions};
use nbmix::sampler::run_chains;
use nbmix::{Dataset, Error, Trace, Variant};
use sha2::{Digest, Sha256};

use crate::config::FitPlan;
use crate::error::{CliError, CliResult};
use crate::ingest::{export, ingest};
use crate::output::{self, ChainReport, SummaryDocument};
use crate::simulate::{demo_truth, Truth, TruthRecord, DEMO_N};
use crate::traces::{read_trace, trace_file_name, trace_files, write_trace};

pub const RUN_FILE: &str = "run.toml";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_DIR: &str = "report";

fn sampler_error(e: Error) -> CliError {
    match e {
        Error::InvalidData(_) | Error::Dimension { .. } => CliError::input(e.to_string()),
        Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
        other => CliError::Sampler(other),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn summary_options(plan: &FitPlan) -> SummaryOptions {
    SummaryOptions {
        occupancy_threshold: plan.occupancy,
        max_draws: Some(plan.max_assignment_draws),
        ..Default::default()
    }
}

/// Relabels against the covariate means and summarizes.
pub fn analyze(traces: &[Trace], data: &Dataset, plan: &FitPlan) -> CliResult<(Vec<RelabeledTrace>, FitSummary)> {
    let relabeled = relabel_with(traces, &data.column_means(), plan.occupancy);
    let summary = summarize(&relabeled, data, &plan.spec, &summary_options(plan)).map_err(sampler_error)?;
    Ok((relabeled, summary))
}

/// What a finished fit produced.
#[derive(Debug)]
pub struct FitOutcome {
    pub document: SummaryDocument,
    pub traces: Vec<Trace>,
    pub data: Dataset,
}

/// Samples, writes traces and summaries into `plan.out`, and fails with a
/// convergence error when a tracked R-hat exceeds the threshold.
pub fn fit(plan: &FitPlan) -> CliResult<FitOutcome> {
    let data = ingest(&plan.input, &plan.encoding)?;
    let mut warnings = Vec::new();
    if plan.sampler.chains == 1 {
        let msg = "only one chain: R-hat is unavailable; run several chains to check convergence";
        log::warn!("{msg}");
        warnings.push(msg.to_string());
    }
    log::info!(
        "fitting {} mixture, k_max {}, {} chains x {} sweeps",
        plan.spec.variant,
        plan.spec.k_max(),
        plan.sampler.chains,
        plan.sampler.iterations
    );
    let traces = run_chains(&plan.spec, &data, &plan.sampler).map_err(sampler_error)?;
    create_dir(&plan.out)?;
    for t in &traces {
        let path = plan.out.join(trace_file_name(t.chain_id));
        write_trace(&path, t, plan.spec.variant, &plan.sampler)?;
    }
    let (relabeled, summary) = analyze(&traces, &data, plan)?;

    let convergence = if traces.len() > 1 {
        Some(tracked_convergence(&relabeled, &summary).map_err(sampler_error)?)
    } else {
        None
    };
    let max_rhat = convergence.as_ref().map(|c| {
        c.iter()
            .map(|p| if p.rhat.value.is_nan() { f64::INFINITY } else { p.rhat.value })
            .fold(1.0, f64::max)
    });
    let converged = max_rhat.map(|r| r <= plan.rhat_threshold);
    let total_nonfinite: usize = traces.iter().map(|t| t.nonfinite_rejections).sum();
    if total_nonfinite > 0 {
        let msg = format!("{total_nonfinite} proposals rejected for non-finite acceptance ratios");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let chains = traces
        .iter()
        .map(|t| ChainReport {
            chain_id: t.chain_id,
            draws: t.len(),
            beta_acceptance: (0..t.k()).map(|k| t.acceptance.beta_rate_of(k)).collect(),
            psi_acceptance: (0..t.k()).map(|k| t.acceptance.psi_rate_of(k)).collect(),
            clamped_predictors: t.clamped_predictors,
            nonfinite_rejections: t.nonfinite_rejections,
        })
        .collect();
    let document = SummaryDocument {
        input_sha256: file_sha256(&plan.input)?,
        spec: plan.spec,
        sampler: plan.sampler,
        occupancy_threshold: plan.occupancy,
        rhat_threshold: plan.rhat_threshold,
        summary,
        convergence,
        max_rhat,
        converged,
        chains,
        warnings,
    };

    let mut stored = plan.clone();
    stored.input = std::fs::canonicalize(&plan.input).map_err(CliError::io(&plan.input))?;
    let irr = output::irr_rows(&document.summary);
    output::write_all(
        &plan.out,
        &[
            (SUMMARY_FILE, document.to_json()),
            ("irr.csv", output::irr_csv(&irr)),
            ("pmf.csv", output::pmf_csv(&document.summary)),
            ("prevalence.csv", output::prevalence_csv(&document.summary)),
            ("assignments.csv", output::assignments_csv(&document.summary.assignments)),
            (RUN_FILE, stored.to_toml()),
        ],
    )?;
    println!(
        "{} occupied components (posterior mode)\n",
        document.summary.occupied_count
    );
    print!("{}", output::prevalence_table(&document.summary));
    println!();
    print!("{}", output::irr_table(&irr));
    if let Some(r) = max_rhat {
        println!("\nlargest tracked R-hat: {}", output::sig6(r));
    }
    if converged == Some(false) {
        return Err(CliError::Convergence(format!(
            "largest tracked R-hat {} exceeds {}",
            output::sig6(max_rhat.unwrap_or(f64::INFINITY)),
            plan.rhat_threshold
        )));
    }
    Ok(FitOutcome { document, traces, data })
}

/// Where simulated data comes from.
#[derive(Debug, Clone)]
pub enum TruthSource {
    File(PathBuf),
    Demo(Variant),
}

pub fn simulate(source: &TruthSource, n: Option<usize>, seed: u64, out: &Path) -> CliResult<TruthRecord> {
    let truth = match source {
        TruthSource::Demo(v) => demo_truth(*v),
        TruthSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
            serde_json::from_str::<Truth>(&text)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        }
    };
    let n = n.unwrap_or(DEMO_N);
    let syn = truth.generate(n, seed)?;
    create_dir(out)?;
    export(&syn.data, "y", &out.join("data.csv"))?;
    let record = TruthRecord {
        n,
        seed,
        params: truth.params()?,
        columns: syn.data.column_names().to_vec(),
        z: syn.z,
        structural_zeros: syn.structural_zeros,
    };
    let path = out.join("truth.json");
    let text = serde_json::to_string_pretty(&record).expect("truth serializes") + "\n";
    std::fs::write(&path, text).map_err(CliError::io(&path))?;
    log::info!("wrote {n} rows to {}", out.join("data.csv").display());
    Ok(record)
}

/// Tables and plot data rebuilt from a fit directory.
#[derive(Debug)]
pub struct ReportOutcome {
    pub summary: FitSummary,
    pub irr: Vec<output::IrrRow>,
    pub crosstab: Vec<output::CrossTabRow>,
    pub out: PathBuf,
}

pub fn report(dir: &Path, input: Option<&Path>, out: Option<&Path>) -> CliResult<ReportOutcome> {
    let mut plan = FitPlan::load(&dir.join(RUN_FILE))?;
    if let Some(p) = input {
        plan.input = p.to_path_buf();
    }
    let data = ingest(&plan.input, &plan.encoding)?;
    let files = trace_files(dir)?;
    if files.is_empty() {
        return Err(CliError::input(format!("no trace files in {}", dir.display())));
    }
    let mut traces = Vec::new();
    for f in &files {
        let stored = read_trace(f)?;
        if stored.variant != plan.spec.variant {
            return Err(CliError::input(format!("{}: variant does not match the run", f.display())));
        }
        for d in &stored.trace.draws {
            d.validate(data.n())
                .map_err(|e| CliError::input(format!("{}: {e}", f.display())))?;
        }
        traces.push(stored.trace);
    }
    if traces.len() != plan.sampler.chains {
        log::warn!(
            "found {} trace files for a {}-chain run",
            traces.len(),
            plan.sampler.chains
        );
    }
    let (_, summary) = analyze(&traces, &data, &plan)?;
    let irr = output::irr_rows(&summary);
    let crosstab = output::crosstab(&summary, &data);
    let out = out.map_or_else(|| dir.join(REPORT_DIR), Path::to_path_buf);
    create_dir(&out)?;
    output::write_all(
        &out,
        &[
            ("irr.csv", output::irr_csv(&irr)),
            ("prevalence.csv", output::prevalence_csv(&summary)),
            ("crosstab.csv", output::crosstab_csv(&crosstab)),
            ("pmf.csv", output::pmf_csv(&summary)),
        ],
    )?;
    print!("{}", output::prevalence_table(&summary));
    println!();
    print!("{}", output::irr_table(&irr));
    if !crosstab.is_empty() {
        println!();
        print!("{}", output::crosstab_table(&crosstab));
    }
    Ok(ReportOutcome {
        summary,
        irr,
        crosstab,
        out,
    })
}

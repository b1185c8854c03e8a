//! Executing a design against an objective and reporting the analyses.

use std::fmt::Display;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::{anova, combination_label, range_analysis, AnovaTable, FTest, RangeAnalysis};
use super::design::DesignMatrix;
use super::DoeError;
use crate::training::TrainerConfig;

/// Outcome of one design row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// One-based run number.
    pub run_id: usize,
    pub levels: Vec<usize>,
    pub values: Vec<f64>,
    pub response: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub design: DesignMatrix,
    pub runs: Vec<RunRecord>,
    pub range: RangeAnalysis,
    pub anova: AnovaTable,
    /// Best level per factor, possibly a combination no run executed.
    pub recommended: Vec<usize>,
    pub recommended_values: Vec<f64>,
    pub recommended_executed: bool,
}

/// Runs every design row once through `objective` (rows may run
/// concurrently) and analyses the responses. Any failed row aborts the
/// analysis with the full run list.
pub fn run_tuning<F, E>(design: &DesignMatrix, budget: usize, objective: F) -> Result<TuningReport, DoeError>
where
    F: Fn(&RunRecord) -> Result<f64, E> + Sync,
    E: Display,
{
    if budget < design.run_count() {
        return Err(DoeError::Budget { budget, runs: design.run_count() });
    }
    let runs: Vec<RunRecord> = (0..design.run_count())
        .into_par_iter()
        .map(|r| {
            let mut record = RunRecord { run_id: r + 1, levels: design.rows[r].clone(), values: design.values(r), response: None, error: None };
            match objective(&record) {
                Ok(y) if y.is_finite() => record.response = Some(y),
                Ok(y) => record.error = Some(format!("non-finite response {y}")),
                Err(e) => record.error = Some(e.to_string()),
            }
            record
        })
        .collect();
    analyse_runs(design, runs)
}

/// Builds the report from already executed runs.
pub fn analyse_runs(design: &DesignMatrix, runs: Vec<RunRecord>) -> Result<TuningReport, DoeError> {
    if runs.iter().any(|r| r.response.is_none()) {
        return Err(DoeError::FailedRuns { runs });
    }
    let responses: Vec<f64> = runs.iter().map(|r| r.response.expect("checked")).collect();
    let range = range_analysis(design, &responses)?;
    let anova = anova(design, &responses)?;
    let recommended = range.best_combination.clone();
    let recommended_values = recommended.iter().zip(&design.factors).map(|(&l, f)| f.levels[l]).collect();
    let recommended_executed = design.rows.contains(&recommended);
    Ok(TuningReport { design: design.clone(), runs, range, anova, recommended, recommended_values, recommended_executed })
}

/// Sets the trainer field named `name` to `value`.
pub fn apply_factor(config: &mut TrainerConfig, name: &str, value: f64) -> Result<(), DoeError> {
    let integer = || {
        if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
            Ok(value as usize)
        } else {
            Err(DoeError::InvalidFactor { factor: name.into(), reason: format!("level {value} is not a nonnegative integer") })
        }
    };
    match name {
        "batch_size" => config.batch_size = integer()?,
        "epochs" => config.epochs = integer()?,
        "conv_layers" => config.conv_layers = integer()?,
        "learning_rate" => config.learning_rate = value,
        "margin" => config.margin = value,
        "mu" => config.mu = value,
        _ => return Err(DoeError::UnknownFactor(name.into())),
    }
    Ok(())
}

/// `base` with the factor values of `run` applied, validated.
pub fn config_for_run(base: &TrainerConfig, design: &DesignMatrix, values: &[f64]) -> Result<TrainerConfig, DoeError> {
    let mut config = base.clone();
    for (f, &v) in design.factors.iter().zip(values) {
        apply_factor(&mut config, &f.name, v)?;
    }
    config.validate().map_err(|e| DoeError::InvalidDesign(e.to_string()))?;
    Ok(config)
}

fn num(v: f64) -> String {
    format!("{}", (v * 1e6).round() / 1e6)
}

fn f_cell(test: &FTest) -> (String, String) {
    match test {
        FTest::Value { f, p } => (num(*f), format!("{p:.6}")),
        FTest::Saturated => ("undefined (saturated design)".into(), String::new()),
        FTest::ZeroResidual => ("infinite (zero residual)".into(), "0".into()),
        FTest::Indeterminate => ("undefined (zero residual and zero effect)".into(), String::new()),
    }
}

fn csv_block(records: &[Vec<String>]) -> Result<String, DoeError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for r in records {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| DoeError::Report(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn row<S: Into<String>>(cells: impl IntoIterator<Item = S>) -> Vec<String> {
    cells.into_iter().map(Into::into).collect()
}

/// Per-run rows followed by the range-analysis and ANOVA blocks, separated
/// by blank lines.
pub fn report_to_csv(report: &TuningReport) -> Result<String, DoeError> {
    let names: Vec<String> = report.design.factors.iter().map(|f| f.name.clone()).collect();
    let labelled = |label: String, cells: Vec<String>| [vec![label], cells].concat();

    let mut runs = vec![[row(["run_id"]), names.clone(), row(["response"])].concat()];
    for run in &report.runs {
        runs.push(labelled(run.run_id.to_string(), [run.values.iter().map(|&v| num(v)).collect(), vec![run.response.map(num).unwrap_or_default()]].concat()));
    }

    let ra = &report.range;
    let mut range = vec![labelled("range_analysis".into(), names.clone())];
    let max_levels = ra.factors.iter().map(|f| f.sums.len()).max().unwrap_or(0);
    let per_level: [(&str, Vec<&Vec<f64>>); 2] =
        [("T", ra.factors.iter().map(|f| &f.sums).collect()), ("mean", ra.factors.iter().map(|f| &f.means).collect())];
    for (label, columns) in per_level {
        for l in 0..max_levels {
            let cells = columns.iter().map(|c| c.get(l).map(|&v| num(v)).unwrap_or_default()).collect();
            range.push(labelled(format!("{label}{}", l + 1), cells));
        }
    }
    range.push(labelled("R".into(), ra.factors.iter().map(|f| num(f.range)).collect()));
    range.push(labelled("delta".into(), ra.factors.iter().map(|f| num(f.delta)).collect()));
    range.push(labelled("best_level".into(), ra.factors.iter().map(|f| (f.best_level + 1).to_string()).collect()));
    range.push(row(["order".to_string(), ra.order_label()]));
    range.push(row(["grand_total".to_string(), num(ra.grand_total)]));
    range.push(row(["best_combination".to_string(), combination_label(&report.recommended)]));
    range.push(row(["best_combination_executed".to_string(), report.recommended_executed.to_string()]));

    let t = &report.anova;
    let mut table = vec![row(["anova", "df", "adj_ss", "adj_ms", "f", "p"])];
    for r in &t.factors {
        let (f, p) = f_cell(&r.test);
        table.push(row([r.name.clone(), r.df.to_string(), num(r.ss), num(r.ms), f, p]));
    }
    table.push(row(["error".to_string(), t.error_df.to_string(), num(t.error_ss), t.error_ms.map(num).unwrap_or_default()]));
    table.push(row(["total".to_string(), t.total_df.to_string(), num(t.total_ss)]));

    Ok([csv_block(&runs)?, csv_block(&range)?, csv_block(&table)?].join("\n"))
}

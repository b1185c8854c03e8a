//! Range analysis and one-way balanced ANOVA over a design's responses.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::design::{level_counts, DesignMatrix};
use super::DoeError;

/// Column letter of factor `j` (`A`, `B`, ...).
pub fn factor_letter(j: usize) -> char {
    (b'A' + (j % 26) as u8) as char
}

/// `A3B2C3D2`-style label of one level index per factor.
pub fn combination_label(levels: &[usize]) -> String {
    levels.iter().enumerate().map(|(j, l)| format!("{}{}", factor_letter(j), l + 1)).collect()
}

/// Per-level sums and means of one factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRange {
    pub name: String,
    pub sums: Vec<f64>,
    pub counts: Vec<usize>,
    pub means: Vec<f64>,
    /// Largest minus smallest level sum.
    pub range: f64,
    /// Largest minus smallest level mean.
    pub delta: f64,
    /// Level index with the largest mean, lower index on ties.
    pub best_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeAnalysis {
    pub factors: Vec<FactorRange>,
    /// Factor indices by descending range, earlier factor on ties.
    pub order: Vec<usize>,
    pub grand_total: f64,
    pub best_combination: Vec<usize>,
}

impl RangeAnalysis {
    /// `B > D > A > C`.
    pub fn order_label(&self) -> String {
        self.order.iter().map(|&j| factor_letter(j).to_string()).collect::<Vec<_>>().join(" > ")
    }

    pub fn best_label(&self) -> String {
        combination_label(&self.best_combination)
    }
}

fn check_responses(design: &DesignMatrix, responses: &[f64]) -> Result<(), DoeError> {
    if responses.len() != design.run_count() {
        return Err(DoeError::LengthMismatch { expected: design.run_count(), actual: responses.len() });
    }
    if let Some(row) = responses.iter().position(|r| !r.is_finite()) {
        return Err(DoeError::NonFiniteResponse { run: row + 1 });
    }
    if !design.is_balanced() {
        return Err(DoeError::Unbalanced);
    }
    Ok(())
}

pub fn range_analysis(design: &DesignMatrix, responses: &[f64]) -> Result<RangeAnalysis, DoeError> {
    check_responses(design, responses)?;
    let factors: Vec<FactorRange> = design
        .factors
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let n = f.levels.len();
            let mut sums = vec![0.0; n];
            for (row, &y) in design.rows.iter().zip(responses) {
                sums[row[j]] += y;
            }
            let counts = level_counts(&design.rows, j, n);
            let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
            let spread = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min);
            let best_level = (0..n).fold(0, |best, l| if means[l] > means[best] { l } else { best });
            FactorRange { name: f.name.clone(), range: spread(&sums), delta: spread(&means), sums, counts, means, best_level }
        })
        .collect();
    let mut order: Vec<usize> = (0..factors.len()).collect();
    order.sort_by(|&a, &b| factors[b].range.total_cmp(&factors[a].range).then(a.cmp(&b)));
    let best_combination = factors.iter().map(|f| f.best_level).collect();
    Ok(RangeAnalysis { factors, order, grand_total: responses.iter().sum(), best_combination })
}

/// Outcome of the F test of one factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FTest {
    Value { f: f64, p: f64 },
    /// No error degrees of freedom remain.
    Saturated,
    /// Zero residual with a nonzero factor effect.
    ZeroResidual,
    /// Zero residual and zero factor effect.
    Indeterminate,
}

impl FTest {
    pub fn f(&self) -> Option<f64> {
        match self {
            FTest::Value { f, .. } => Some(*f),
            FTest::ZeroResidual => Some(f64::INFINITY),
            _ => None,
        }
    }

    pub fn p(&self) -> Option<f64> {
        match self {
            FTest::Value { p, .. } => Some(*p),
            FTest::ZeroResidual => Some(0.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub name: String,
    pub df: usize,
    pub ss: f64,
    pub ms: f64,
    pub test: FTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub factors: Vec<AnovaRow>,
    pub error_df: usize,
    pub error_ss: f64,
    /// `None` when no error degrees of freedom remain.
    pub error_ms: Option<f64>,
    pub total_df: usize,
    pub total_ss: f64,
    /// Level means per factor, for picking the best level.
    pub level_means: Vec<Vec<f64>>,
}

pub fn anova(design: &DesignMatrix, responses: &[f64]) -> Result<AnovaTable, DoeError> {
    let ranges = range_analysis(design, responses)?;
    let n = responses.len() as f64;
    let cf = ranges.grand_total * ranges.grand_total / n;
    let total_ss = (responses.iter().map(|y| y * y).sum::<f64>() - cf).max(0.0);
    let eps = 1e-9 * total_ss;
    let factor_ss: Vec<f64> = ranges
        .factors
        .iter()
        .map(|f| (f.sums.iter().zip(&f.counts).map(|(t, &c)| t * t / c as f64).sum::<f64>() - cf).max(0.0))
        .collect();
    let total_df = responses.len() - 1;
    let factor_df: usize = ranges.factors.iter().map(|f| f.sums.len() - 1).sum();
    let error_df = total_df.checked_sub(factor_df).ok_or(DoeError::Unbalanced)?;
    let raw_error = total_ss - factor_ss.iter().sum::<f64>();
    if raw_error < -eps.max(1e-12) {
        return Err(DoeError::Unbalanced);
    }
    let error_ss = if raw_error.abs() <= eps { 0.0 } else { raw_error.max(0.0) };
    let error_ms = (error_df > 0).then(|| error_ss / error_df as f64);
    let factors = ranges
        .factors
        .iter()
        .zip(&factor_ss)
        .map(|(f, &raw_ss)| {
            let df = f.sums.len() - 1;
            let ss = if raw_ss <= eps { 0.0 } else { raw_ss };
            let ms = ss / df as f64;
            let test = match error_ms {
                None => FTest::Saturated,
                Some(mse) if mse == 0.0 && ss == 0.0 => FTest::Indeterminate,
                Some(mse) if mse == 0.0 => FTest::ZeroResidual,
                Some(mse) => {
                    let f = ms / mse;
                    FTest::Value { f, p: f_upper_p(f, df, error_df) }
                }
            };
            AnovaRow { name: f.name.clone(), df, ss, ms, test }
        })
        .collect();
    Ok(AnovaTable {
        factors,
        error_df,
        error_ss,
        error_ms,
        total_df,
        total_ss,
        level_means: ranges.factors.into_iter().map(|f| f.means).collect(),
    })
}

/// `P(X > f)` for `X ~ F(df1, df2)`.
///
/// # Panics
/// If either degree of freedom is zero or `f` is NaN.
pub fn f_upper_p(f: f64, df1: usize, df2: usize) -> f64 {
    assert!(df1 >= 1 && df2 >= 1, "degrees of freedom must be positive");
    assert!(!f.is_nan(), "F statistic is NaN");
    if f <= 0.0 {
        return 1.0;
    }
    FisherSnedecor::new(df1 as f64, df2 as f64).expect("positive degrees of freedom").sf(f).clamp(0.0, 1.0)
}

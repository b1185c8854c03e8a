//! Factors, orthogonal arrays and full factorial layouts.

use serde::{Deserialize, Serialize};

use super::DoeError;

/// A tunable setting and its ordered candidate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<f64>,
}

impl Factor {
    pub fn new(name: impl Into<String>, levels: Vec<f64>) -> Result<Self, DoeError> {
        let factor = Self { name: name.into(), levels };
        factor.validate()?;
        Ok(factor)
    }

    pub fn validate(&self) -> Result<(), DoeError> {
        if self.levels.iter().any(|v| !v.is_finite()) {
            return Err(DoeError::InvalidFactor { factor: self.name.clone(), reason: "levels must be finite".into() });
        }
        let distinct = self.levels.iter().enumerate().all(|(i, a)| self.levels[..i].iter().all(|b| a != b));
        if self.levels.len() < 2 || !distinct {
            return Err(DoeError::InvalidFactor { factor: self.name.clone(), reason: "needs at least 2 distinct levels".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// Nine runs for up to four 3-level factors.
    L9,
    /// Sixteen runs for up to four 4-level factors.
    L16,
    /// Every level combination, first factor varying slowest.
    FullFactorial,
}

/// Level indices of the nine-run array, one column per factor.
pub const L9_COLUMNS: [[usize; 9]; 4] = [
    [0, 0, 0, 1, 1, 1, 2, 2, 2],
    [0, 1, 2, 0, 1, 2, 0, 1, 2],
    [0, 2, 1, 2, 1, 0, 1, 0, 2],
    [0, 1, 2, 2, 0, 1, 1, 2, 0],
];

/// Level indices of the sixteen-run array, one column per factor.
pub const L16_COLUMNS: [[usize; 16]; 4] = [
    [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3],
    [0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3],
    [0, 1, 2, 3, 1, 0, 3, 2, 2, 3, 0, 1, 3, 2, 1, 0],
    [0, 1, 2, 3, 2, 3, 0, 1, 3, 2, 1, 0, 1, 0, 3, 2],
];

impl DesignKind {
    fn array(self) -> Option<(usize, Vec<Vec<usize>>)> {
        match self {
            DesignKind::L9 => Some((3, L9_COLUMNS.iter().map(|c| c.to_vec()).collect())),
            DesignKind::L16 => Some((4, L16_COLUMNS.iter().map(|c| c.to_vec()).collect())),
            DesignKind::FullFactorial => None,
        }
    }
}

/// Factors plus one level index per factor for every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub kind: DesignKind,
    pub factors: Vec<Factor>,
    pub rows: Vec<Vec<usize>>,
}

impl DesignMatrix {
    pub fn run_count(&self) -> usize {
        self.rows.len()
    }

    /// Concrete factor values of run `row`.
    pub fn values(&self, row: usize) -> Vec<f64> {
        self.rows[row].iter().zip(&self.factors).map(|(&l, f)| f.levels[l]).collect()
    }

    /// Whether every level occurs equally often in every column.
    pub fn is_balanced(&self) -> bool {
        self.factors.iter().enumerate().all(|(j, f)| {
            let counts = level_counts(&self.rows, j, f.levels.len());
            counts.iter().all(|&c| c > 0 && c == counts[0])
        })
    }
}

pub(crate) fn level_counts(rows: &[Vec<usize>], column: usize, levels: usize) -> Vec<usize> {
    let mut counts = vec![0; levels];
    for row in rows {
        counts[row[column]] += 1;
    }
    counts
}

/// Lays `factors` out as the requested design.
pub fn make_design(kind: DesignKind, factors: Vec<Factor>) -> Result<DesignMatrix, DoeError> {
    for f in &factors {
        f.validate()?;
    }
    if factors.is_empty() {
        return Err(DoeError::InvalidDesign("a design needs at least one factor".into()));
    }
    let rows = match kind.array() {
        Some((levels, columns)) => {
            if factors.len() > columns.len() || factors.iter().any(|f| f.levels.len() != levels) {
                return Err(DoeError::Capacity { kind, max_factors: columns.len(), levels });
            }
            (0..columns[0].len()).map(|r| (0..factors.len()).map(|j| columns[j][r]).collect()).collect()
        }
        None => {
            let mut rows = vec![Vec::new()];
            for f in &factors {
                rows = rows.into_iter().flat_map(|prefix: Vec<usize>| (0..f.levels.len()).map(move |l| [prefix.clone(), vec![l]].concat())).collect();
            }
            rows
        }
    };
    Ok(DesignMatrix { kind, factors, rows })
}

/// Design file contents: the layout kind and its factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub kind: DesignKind,
    pub factors: Vec<Factor>,
}

impl DesignFile {
    pub fn from_json(text: &str) -> Result<Self, DoeError> {
        serde_json::from_str(text).map_err(|e| DoeError::InvalidDesign(format!("design JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }

    pub fn build(self) -> Result<DesignMatrix, DoeError> {
        make_design(self.kind, self.factors)
    }

    /// Batch size, learning rate, epochs and conv layers over three levels.
    pub fn screening() -> Self {
        Self::from_json(include_str!("../../data/designs/screening_l9.json")).expect("shipped design parses")
    }

    /// Learning rate, batch size, conv layers and epochs over four levels.
    pub fn widening() -> Self {
        Self::from_json(include_str!("../../data/designs/widening_l16.json")).expect("shipped design parses")
    }

    /// Learning rate, batch size and conv layers over two levels each.
    pub fn refinement() -> Self {
        Self::from_json(include_str!("../../data/designs/refinement_factorial.json")).expect("shipped design parses")
    }
}

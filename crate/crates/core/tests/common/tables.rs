//! Published experiment layouts, responses and analysis blocks.

use rodfind_core::doe::{DesignFile, DesignMatrix};

/// Accuracy (%) of the nine screening runs, in run order.
pub const SCREENING_RESPONSES: [f64; 9] = [3.77, 64.77, 46.45, 30.00, 55.62, 69.38, 48.44, 71.09, 57.81];
/// `[factor][level]` sums.
pub const SCREENING_T: [[f64; 3]; 4] = [[114.99, 155.00, 177.34], [82.21, 191.48, 173.64], [144.24, 150.51, 152.58], [117.20, 182.59, 147.54]];
pub const SCREENING_R: [f64; 4] = [62.35, 109.27, 8.34, 65.39];
pub const SCREENING_TOTAL: f64 = 447.33;

pub const WIDENING_RESPONSES: [f64; 16] =
    [64.44, 48.86, 61.25, 42.19, 53.89, 42.61, 48.12, 58.59, 90.00, 58.52, 82.50, 60.16, 95.00, 85.23, 74.37, 69.53];
pub const WIDENING_T: [[f64; 4]; 4] = [
    [216.74, 203.21, 291.18, 324.13],
    [303.33, 235.22, 266.24, 230.47],
    [259.08, 237.28, 295.07, 243.83],
    [257.95, 284.95, 243.19, 249.17],
];
pub const WIDENING_R: [f64; 4] = [120.92, 72.86, 57.79, 41.76];
pub const WIDENING_TOTAL: f64 = 1035.26;
/// Printed epoch column; runs 5 and 9 read 142, which matches no level.
pub const WIDENING_PRINTED_EPOCHS: [f64; 16] = [50., 100., 200., 500., 142., 500., 50., 100., 142., 200., 100., 50., 100., 50., 500., 200.];

pub const REFINEMENT_RESPONSES: [f64; 8] = [91.67, 77.78, 98.30, 59.66, 96.67, 97.78, 94.89, 86.93];
pub const REFINEMENT_T: [[f64; 2]; 3] = [[327.41, 376.27], [363.90, 339.78], [381.53, 322.15]];
pub const REFINEMENT_R: [f64; 3] = [48.86, 24.12, 59.38];
pub const REFINEMENT_MEANS: [[f64; 2]; 3] = [[81.85, 94.07], [90.97, 84.94], [95.38, 80.54]];
pub const REFINEMENT_DELTA: [f64; 3] = [12.22, 6.03, 14.84];
pub const REFINEMENT_SS: [f64; 3] = [298.41, 72.72, 440.75];
pub const REFINEMENT_ERROR_SS: f64 = 434.70;
pub const REFINEMENT_TOTAL_SS: f64 = 1246.58;
pub const REFINEMENT_MS_ERROR: f64 = 108.68;
pub const REFINEMENT_F: [f64; 3] = [2.75, 0.67, 4.06];
pub const REFINEMENT_P: [f64; 3] = [0.173, 0.459, 0.114];

/// Tolerance on printed two-decimal statistics.
pub const TABLE_TOL: f64 = 0.01;
/// Tolerance on printed three-decimal p-values.
pub const P_TOL: f64 = 0.002;

pub fn screening() -> DesignMatrix {
    DesignFile::screening().build().unwrap()
}

pub fn widening() -> DesignMatrix {
    DesignFile::widening().build().unwrap()
}

pub fn refinement() -> DesignMatrix {
    DesignFile::refinement().build().unwrap()
}

/// Printed factor values of the screening runs: batch, lr, epochs, layers.
pub const SCREENING_PRINTED: [[f64; 4]; 9] = [
    [16., 0.001, 50., 3.],
    [16., 0.0001, 200., 4.],
    [16., 0.00001, 100., 5.],
    [32., 0.001, 200., 5.],
    [32., 0.0001, 100., 3.],
    [32., 0.00001, 50., 4.],
    [64., 0.001, 100., 4.],
    [64., 0.0001, 50., 5.],
    [64., 0.00001, 200., 3.],
];

/// Printed factor values of the refinement runs: lr, batch, layers.
pub const REFINEMENT_PRINTED: [[f64; 3]; 8] = [
    [0.00001, 4., 6.],
    [0.00001, 4., 7.],
    [0.00001, 16., 6.],
    [0.00001, 16., 7.],
    [0.000001, 4., 6.],
    [0.000001, 4., 7.],
    [0.000001, 16., 6.],
    [0.000001, 16., 7.],
];


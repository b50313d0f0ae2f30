//! Per-run diagnostic records shared by all schemes.

/// One diagnostics row per time step.
#[derive(Debug, Clone)]
pub struct DiagRow {
    pub n: usize,
    pub t: f64,
    pub mass: f64,
    pub com: Vec<f64>,
    pub second_moment: f64,
    /// Interaction energy; `None` when energy tracking is disabled.
    pub energy: Option<f64>,
}

/// The trajectory record of a run: diagnostics per step, optional 1D
/// measure snapshots for error curves, and wall-clock per step.
#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    pub scheme: String,
    pub rows: Vec<DiagRow>,
    /// `(t^n, atoms)` per step, recorded for 1D runs on request.
    pub snapshots_1d: Option<Vec<(f64, Vec<(f64, f64)>)>>,
    pub wall_seconds_per_step: Vec<f64>,
}

impl RunRecord {
    pub fn new(scheme: impl Into<String>) -> Self {
        RunRecord { scheme: scheme.into(), ..Default::default() }
    }

    pub fn step_count(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }
}

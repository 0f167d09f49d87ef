//! Grid search over ground profiles, leg stiffness, leg damping and input
//! energy, and the maps derived from it.
//!
//! Every combination is one independent episode. Results are stored in a
//! fixed order (leg damping, energy, ground stiffness, ground damping, leg
//! stiffness; last index fastest) regardless of how many workers ran them.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::integrator::IntegratorConfig;
use crate::model::{precompression_from_energy, EnergyBudget, GroundProfile, HopperParams};
use crate::sim::{run_episode, EpisodeConfig, EpisodeStatus, FailureReason};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("invalid sweep specification: {0}")]
    InvalidSpec(String),
    #[error("energy level {0} J was not part of the sweep")]
    UnknownEnergyLevel(f64),
    #[error("leg damping {0} N s/m was not part of the sweep")]
    UnknownLegDamping(f64),
    #[error("no leg stiffness hopped steadily at k_g = {k_g}, d_g = {d_g}")]
    EmptyCell { k_g: f64, d_g: f64 },
    #[error("query k_g = {k_g}, d_g = {d_g} is outside the map")]
    OutOfDomain { k_g: f64, d_g: f64 },
    #[error("nearest cell k_g = {k_g}, d_g = {d_g} has no successful stiffness")]
    UnreachableCell { k_g: f64, d_g: f64 },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Inclusive arithmetic range `start:step:end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRange {
    pub start: f64,
    pub step: f64,
    pub end: f64,
}

impl GridRange {
    pub fn new(start: f64, step: f64, end: f64) -> Result<Self, SweepError> {
        let r = Self { start, step, end };
        r.validate()?;
        Ok(r)
    }

    pub fn single(value: f64) -> Self {
        Self {
            start: value,
            step: 1.0,
            end: value,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if !(self.start.is_finite() && self.end.is_finite() && self.step.is_finite()) {
            return Err(SweepError::InvalidSpec("range bounds must be finite".into()));
        }
        if self.step <= 0.0 {
            return Err(SweepError::InvalidSpec(format!(
                "range step must be positive, got {}",
                self.step
            )));
        }
        if self.end < self.start {
            return Err(SweepError::InvalidSpec(format!(
                "empty range {}:{}:{}",
                self.start, self.step, self.end
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.start + self.step * i as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Masses, rest length and gravity; the leg is replaced per run.
    pub hopper: HopperParams<f64>,
    pub leg_stiffness: Vec<f64>,
    pub leg_damping: Vec<f64>,
    pub ground_stiffness: GridRange,
    pub ground_damping: GridRange,
    pub energy: Vec<f64>,
    pub episode: EpisodeConfig<f64>,
    pub integrator: IntegratorConfig<f64>,
    pub tie_threshold: f64,
    pub threads: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            hopper: HopperParams::new(2.5, 0.3, 0.0975, 4000.0, 35.0).expect("valid defaults"),
            leg_stiffness: vec![3000.0, 4000.0, 5000.0],
            leg_damping: vec![30.0, 35.0, 40.0],
            ground_stiffness: GridRange {
                start: 2400.0,
                step: 200.0,
                end: 5400.0,
            },
            ground_damping: GridRange {
                start: 15.0,
                step: 5.0,
                end: 75.0,
            },
            energy: vec![1.0, 1.56, 2.25],
            episode: EpisodeConfig::default(),
            integrator: IntegratorConfig::default(),
            tie_threshold: 0.001,
            threads: 8,
        }
    }
}

fn check_list(name: &str, values: &[f64], allow_zero: bool) -> Result<(), SweepError> {
    if values.is_empty() {
        return Err(SweepError::InvalidSpec(format!("{name} list is empty")));
    }
    for &v in values {
        let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
        if !ok {
            return Err(SweepError::InvalidSpec(format!("{name} value {v} is invalid")));
        }
    }
    Ok(())
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        check_list("leg_stiffness", &self.leg_stiffness, false)?;
        check_list("leg_damping", &self.leg_damping, true)?;
        check_list("energy", &self.energy, false)?;
        self.ground_stiffness.validate()?;
        self.ground_damping.validate()?;
        if self.ground_stiffness.start <= 0.0 || self.ground_damping.start < 0.0 {
            return Err(SweepError::InvalidSpec(
                "ground stiffness must be positive and ground damping non-negative".into(),
            ));
        }
        if !(self.tie_threshold >= 0.0 && self.tie_threshold.is_finite()) {
            return Err(SweepError::InvalidSpec("tie_threshold must be >= 0".into()));
        }
        if self.threads == 0 {
            return Err(SweepError::InvalidSpec("threads must be at least 1".into()));
        }
        self.episode
            .validate()
            .map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
        self.integrator
            .validate()
            .map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
        for &k in &self.leg_stiffness {
            for &e in &self.energy {
                let hopper = self.hopper_with(k, self.leg_damping[0])?;
                let energy = EnergyBudget::new(e).map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
                precompression_from_energy(&energy, &hopper)
                    .map_err(|e| SweepError::InvalidSpec(e.to_string()))?;
            }
        }
        Ok(())
    }

    fn hopper_with(&self, k: f64, d: f64) -> Result<HopperParams<f64>, SweepError> {
        self.hopper
            .with_leg(k, d)
            .map_err(|e| SweepError::InvalidSpec(e.to_string()))
    }

    /// Number of ground profiles per (leg damping, energy) pair.
    pub fn ground_cells(&self) -> usize {
        self.ground_stiffness.len() * self.ground_damping.len()
    }

    pub fn total_runs(&self) -> usize {
        self.ground_cells() * self.leg_stiffness.len() * self.leg_damping.len() * self.energy.len()
    }
}

/// Outcome of one (ground profile, leg, energy) episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub ground_stiffness: f64,
    pub ground_damping: f64,
    pub leg_stiffness: f64,
    pub leg_damping: f64,
    pub energy: f64,
    pub status: EpisodeStatus,
    pub apex_mean: Option<f64>,
    pub apex_std: Option<f64>,
    pub hops: usize,
    pub failure: Option<FailureReason>,
}

impl RunSummary {
    /// Steady apex, only for runs that reached steady hopping.
    pub fn steady_apex(&self) -> Option<f64> {
        if self.status.is_success() {
            self.apex_mean
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub ground_stiffness: Vec<f64>,
    pub ground_damping: Vec<f64>,
    pub leg_stiffness: Vec<f64>,
    pub leg_damping: Vec<f64>,
    pub energy: Vec<f64>,
    pub runs: Vec<RunSummary>,
}

fn find(values: &[f64], v: f64) -> Option<usize> {
    values
        .iter()
        .position(|&x| (x - v).abs() <= 1e-9 * x.abs().max(1.0))
}

impl SweepResult {
    fn index(&self, i_dl: usize, i_e: usize, i_kg: usize, i_dg: usize, i_kl: usize) -> usize {
        let (n_e, n_kg, n_dg, n_kl) = (
            self.energy.len(),
            self.ground_stiffness.len(),
            self.ground_damping.len(),
            self.leg_stiffness.len(),
        );
        (((i_dl * n_e + i_e) * n_kg + i_kg) * n_dg + i_dg) * n_kl + i_kl
    }

    pub fn run(&self, i_dl: usize, i_e: usize, i_kg: usize, i_dg: usize, i_kl: usize) -> &RunSummary {
        &self.runs[self.index(i_dl, i_e, i_kg, i_dg, i_kl)]
    }

    /// Indices of a (leg damping, energy) slice.
    pub fn slice(&self, leg_damping: f64, energy: f64) -> Result<(usize, usize), SweepError> {
        let i_dl = find(&self.leg_damping, leg_damping)
            .ok_or(SweepError::UnknownLegDamping(leg_damping))?;
        let i_e = find(&self.energy, energy).ok_or(SweepError::UnknownEnergyLevel(energy))?;
        Ok((i_dl, i_e))
    }

    /// Per-cell outcomes of one slice, ground stiffness major.
    pub fn cells(
        &self,
        leg_damping: f64,
        energy: f64,
        tie_threshold: f64,
    ) -> Result<Vec<CellResult>, SweepError> {
        let (i_dl, i_e) = self.slice(leg_damping, energy)?;
        let mut cells = Vec::with_capacity(self.ground_stiffness.len() * self.ground_damping.len());
        for (i_kg, &k_g) in self.ground_stiffness.iter().enumerate() {
            for (i_dg, &d_g) in self.ground_damping.iter().enumerate() {
                let outcomes: Vec<(f64, Option<f64>)> = self
                    .leg_stiffness
                    .iter()
                    .enumerate()
                    .map(|(i_kl, &k)| (k, self.run(i_dl, i_e, i_kg, i_dg, i_kl).steady_apex()))
                    .collect();
                cells.push(CellResult::new(k_g, d_g, outcomes, tie_threshold));
            }
        }
        Ok(cells)
    }
}

/// Outcomes of all leg stiffness values on one ground profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub ground_stiffness: f64,
    pub ground_damping: f64,
    /// `(leg stiffness, steady apex)`; `None` marks a failed run.
    pub outcomes: Vec<(f64, Option<f64>)>,
    /// Stiffness values within the tie threshold of the best apex, ascending.
    pub winners: Vec<f64>,
}

impl CellResult {
    pub fn new(
        ground_stiffness: f64,
        ground_damping: f64,
        outcomes: Vec<(f64, Option<f64>)>,
        tie_threshold: f64,
    ) -> Self {
        let best = outcomes
            .iter()
            .filter_map(|(_, a)| *a)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut winners: Vec<f64> = outcomes
            .iter()
            .filter_map(|&(k, a)| a.filter(|&a| a >= best - tie_threshold).map(|_| k))
            .collect();
        winners.sort_by(|a, b| a.total_cmp(b));
        Self {
            ground_stiffness,
            ground_damping,
            outcomes,
            winners,
        }
    }

    pub fn best_apex(&self) -> Option<f64> {
        self.outcomes
            .iter()
            .filter_map(|(_, a)| *a)
            .reduce(f64::max)
    }
}

/// Winner sets over a ground grid. An empty set marks an unreachable cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WinnerMap {
    pub ground_stiffness: Vec<f64>,
    pub ground_damping: Vec<f64>,
    pub cells: Vec<Vec<f64>>,
}

impl WinnerMap {
    pub fn winners(&self, i_kg: usize, i_dg: usize) -> Result<&[f64], SweepError> {
        let cell = &self.cells[i_kg * self.ground_damping.len() + i_dg];
        if cell.is_empty() {
            Err(SweepError::EmptyCell {
                k_g: self.ground_stiffness[i_kg],
                d_g: self.ground_damping[i_dg],
            })
        } else {
            Ok(cell)
        }
    }
}

pub fn best_stiffness_map(
    result: &SweepResult,
    leg_damping: f64,
    energy: f64,
    tie_threshold: f64,
) -> Result<WinnerMap, SweepError> {
    let cells = result.cells(leg_damping, energy, tie_threshold)?;
    Ok(WinnerMap {
        ground_stiffness: result.ground_stiffness.clone(),
        ground_damping: result.ground_damping.clone(),
        cells: cells.into_iter().map(|c| c.winners).collect(),
    })
}

/// Ground profiles on which at least one stiffness hops steadily.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessRegion {
    pub energy: f64,
    pub leg_damping: f64,
    pub ground_stiffness: Vec<f64>,
    pub ground_damping: Vec<f64>,
    pub grid: Vec<bool>,
}

impl SuccessRegion {
    pub fn get(&self, i_kg: usize, i_dg: usize) -> bool {
        self.grid[i_kg * self.ground_damping.len() + i_dg]
    }

    pub fn count(&self) -> usize {
        self.grid.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &SuccessRegion) -> bool {
        self.grid.len() == other.grid.len()
            && self.grid.iter().zip(&other.grid).all(|(&a, &b)| !a || b)
    }
}

pub fn success_region(
    result: &SweepResult,
    leg_damping: f64,
    energy: f64,
) -> Result<SuccessRegion, SweepError> {
    let cells = result.cells(leg_damping, energy, 0.0)?;
    Ok(SuccessRegion {
        energy,
        leg_damping,
        ground_stiffness: result.ground_stiffness.clone(),
        ground_damping: result.ground_damping.clone(),
        grid: cells.iter().map(|c| !c.winners.is_empty()).collect(),
    })
}

/// Nearest-cell stiffness lookup. Distances are measured with each axis
/// scaled to `[0, 1]` over the grid span; ties between cells go to the first
/// in grid order, ties between winners to the softest leg.
pub fn select_stiffness(map: &WinnerMap, query: &GroundProfile<f64>) -> Result<f64, SweepError> {
    let (k, d) = (query.stiffness(), query.damping());
    let out = SweepError::OutOfDomain { k_g: k, d_g: d };
    let (Some(&k0), Some(&k1)) = (map.ground_stiffness.first(), map.ground_stiffness.last()) else {
        return Err(out);
    };
    let (Some(&d0), Some(&d1)) = (map.ground_damping.first(), map.ground_damping.last()) else {
        return Err(out);
    };
    let eps = 1e-9;
    if k < k0 - eps * k0.abs().max(1.0)
        || k > k1 + eps * k1.abs().max(1.0)
        || d < d0 - eps * d0.abs().max(1.0)
        || d > d1 + eps * d1.abs().max(1.0)
    {
        return Err(out);
    }
    let norm = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    let (qk, qd) = (norm(k, k0, k1), norm(d, d0, d1));
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, &kg) in map.ground_stiffness.iter().enumerate() {
        for (j, &dg) in map.ground_damping.iter().enumerate() {
            let dist = (norm(kg, k0, k1) - qk).powi(2) + (norm(dg, d0, d1) - qd).powi(2);
            if best.is_none_or(|(b, _, _)| dist < b) {
                best = Some((dist, i, j));
            }
        }
    }
    let (_, i, j) = best.expect("non-empty grid");
    match map.winners(i, j) {
        Ok(w) => Ok(w.iter().copied().fold(f64::INFINITY, f64::min)),
        Err(_) => Err(SweepError::UnreachableCell {
            k_g: map.ground_stiffness[i],
            d_g: map.ground_damping[j],
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrendAxis {
    /// Apex should not increase with ground damping.
    GroundDamping,
    /// Apex should not decrease with ground stiffness.
    GroundStiffness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendViolation {
    pub axis: TrendAxis,
    pub leg_stiffness: f64,
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub apex_from: f64,
    pub apex_to: f64,
}

/// Monotonicity checks between consecutive succeeded cells of a slice.
/// Differences within `tolerance` are not reported.
pub fn trend_violations(
    result: &SweepResult,
    leg_damping: f64,
    energy: f64,
    tolerance: f64,
) -> Result<Vec<TrendViolation>, SweepError> {
    let (i_dl, i_e) = result.slice(leg_damping, energy)?;
    let (n_kg, n_dg) = (result.ground_stiffness.len(), result.ground_damping.len());
    let mut out = Vec::new();
    for (i_kl, &k_l) in result.leg_stiffness.iter().enumerate() {
        let apex = |i_kg: usize, i_dg: usize| result.run(i_dl, i_e, i_kg, i_dg, i_kl).steady_apex();
        let cell = |i_kg: usize, i_dg: usize| {
            (result.ground_stiffness[i_kg], result.ground_damping[i_dg])
        };
        for i_kg in 0..n_kg {
            let mut prev: Option<(usize, f64)> = None;
            for i_dg in 0..n_dg {
                if let Some(a) = apex(i_kg, i_dg) {
                    if let Some((p_dg, pa)) = prev {
                        if a > pa + tolerance {
                            out.push(TrendViolation {
                                axis: TrendAxis::GroundDamping,
                                leg_stiffness: k_l,
                                from: cell(i_kg, p_dg),
                                to: cell(i_kg, i_dg),
                                apex_from: pa,
                                apex_to: a,
                            });
                        }
                    }
                    prev = Some((i_dg, a));
                }
            }
        }
        for i_dg in 0..n_dg {
            let mut prev: Option<(usize, f64)> = None;
            for i_kg in 0..n_kg {
                if let Some(a) = apex(i_kg, i_dg) {
                    if let Some((p_kg, pa)) = prev {
                        if a < pa - tolerance {
                            out.push(TrendViolation {
                                axis: TrendAxis::GroundStiffness,
                                leg_stiffness: k_l,
                                from: cell(p_kg, i_dg),
                                to: cell(i_kg, i_dg),
                                apex_from: pa,
                                apex_to: a,
                            });
                        }
                    }
                    prev = Some((i_kg, a));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Job {
    k_g: f64,
    d_g: f64,
    k_l: f64,
    d_l: f64,
    energy: f64,
}

fn run_job(spec: &SweepSpec, job: &Job) -> RunSummary {
    let summary = |status, apex_mean, apex_std, hops, failure| RunSummary {
        ground_stiffness: job.k_g,
        ground_damping: job.d_g,
        leg_stiffness: job.k_l,
        leg_damping: job.d_l,
        energy: job.energy,
        status,
        apex_mean,
        apex_std,
        hops,
        failure,
    };
    let inputs = (|| {
        let hopper = spec.hopper.with_leg(job.k_l, job.d_l)?;
        let ground = GroundProfile::new(job.k_g, job.d_g)?;
        let energy = EnergyBudget::new(job.energy)?;
        Ok::<_, crate::model::ModelError>((hopper, ground, energy))
    })();
    let outcome = inputs
        .map_err(crate::sim::SimError::from)
        .and_then(|(h, g, e)| run_episode(&h, &g, &e, &spec.episode, &spec.integrator));
    match outcome {
        Ok(o) => summary(
            o.status,
            o.steady_mean(),
            o.steady_std(),
            o.hops.len(),
            o.failure,
        ),
        Err(e) => summary(
            EpisodeStatus::NumericalFailure,
            None,
            None,
            0,
            Some(FailureReason::Integration {
                message: e.to_string(),
            }),
        ),
    }
}

/// Runs every combination of the spec on a pool of `spec.threads` workers.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    spec.validate()?;
    let k_g = spec.ground_stiffness.values();
    let d_g = spec.ground_damping.values();
    let mut jobs = Vec::with_capacity(spec.total_runs());
    for &d_l in &spec.leg_damping {
        for &energy in &spec.energy {
            for &kg in &k_g {
                for &dg in &d_g {
                    for &k_l in &spec.leg_stiffness {
                        jobs.push(Job {
                            k_g: kg,
                            d_g: dg,
                            k_l,
                            d_l,
                            energy,
                        });
                    }
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let runs: Vec<RunSummary> = pool.install(|| jobs.par_iter().map(|j| run_job(spec, j)).collect());
    Ok(SweepResult {
        ground_stiffness: k_g,
        ground_damping: d_g,
        leg_stiffness: spec.leg_stiffness.clone(),
        leg_damping: spec.leg_damping.clone(),
        energy: spec.energy.clone(),
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_208_cells() {
        let spec = SweepSpec::default();
        assert_eq!(spec.ground_stiffness.len(), 16);
        assert_eq!(spec.ground_damping.len(), 13);
        assert_eq!(spec.ground_cells(), 208);
        assert_eq!(spec.ground_stiffness.values().last(), Some(&5400.0));
        assert_eq!(spec.ground_damping.values().last(), Some(&75.0));
    }

    #[test]
    fn range_validation() {
        assert!(GridRange::new(1.0, 0.0, 2.0).is_err());
        assert!(GridRange::new(3.0, 1.0, 2.0).is_err());
        assert_eq!(GridRange::single(7.0).values(), vec![7.0]);
    }

    #[test]
    fn winners_within_threshold() {
        let cell = CellResult::new(
            4000.0,
            30.0,
            vec![(3000.0, Some(0.040)), (4000.0, Some(0.0405)), (5000.0, Some(0.0412))],
            0.001,
        );
        assert_eq!(cell.winners, vec![4000.0, 5000.0]);
    }

    #[test]
    fn failed_stiffness_never_wins() {
        let cell = CellResult::new(4000.0, 30.0, vec![(3000.0, Some(0.01)), (5000.0, None)], 1.0);
        assert_eq!(cell.winners, vec![3000.0]);
        let cell = CellResult::new(4000.0, 30.0, vec![(3000.0, None), (5000.0, None)], 1.0);
        assert!(cell.winners.is_empty());
        assert_eq!(cell.best_apex(), None);
    }

    fn toy_map() -> WinnerMap {
        WinnerMap {
            ground_stiffness: vec![2400.0, 2600.0],
            ground_damping: vec![15.0, 20.0, 25.0],
            cells: vec![
                vec![3000.0],
                vec![3000.0, 4000.0],
                vec![],
                vec![5000.0],
                vec![4000.0, 5000.0],
                vec![3000.0],
            ],
        }
    }

    #[test]
    fn select_exact_and_tied() {
        let map = toy_map();
        let q = |k, d| GroundProfile::new(k, d).unwrap();
        assert_eq!(select_stiffness(&map, &q(2600.0, 15.0)), Ok(5000.0));
        assert_eq!(select_stiffness(&map, &q(2400.0, 20.0)), Ok(3000.0));
        assert_eq!(select_stiffness(&map, &q(2590.0, 21.0)), Ok(4000.0));
    }

    #[test]
    fn select_errors() {
        let map = toy_map();
        let q = |k, d| GroundProfile::new(k, d).unwrap();
        assert!(matches!(
            select_stiffness(&map, &q(2401.0, 24.0)),
            Err(SweepError::UnreachableCell { .. })
        ));
        assert!(matches!(
            select_stiffness(&map, &q(2000.0, 20.0)),
            Err(SweepError::OutOfDomain { .. })
        ));
        assert!(matches!(
            select_stiffness(&map, &q(2500.0, 30.0)),
            Err(SweepError::OutOfDomain { .. })
        ));
        assert!(matches!(map.winners(0, 2), Err(SweepError::EmptyCell { .. })));
    }

    #[test]
    fn empty_region_counts_zero() {
        let region = SuccessRegion {
            energy: 1.0,
            leg_damping: 35.0,
            ground_stiffness: vec![],
            ground_damping: vec![],
            grid: vec![],
        };
        assert_eq!(region.count(), 0);
        assert!(region.is_subset_of(&region));
    }

    #[test]
    fn spec_validation() {
        let spec = SweepSpec {
            leg_stiffness: vec![],
            ..Default::default()
        };
        assert!(matches!(spec.validate(), Err(SweepError::InvalidSpec(_))));
        let spec = SweepSpec {
            threads: 0,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        let spec = SweepSpec {
            energy: vec![1000.0],
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        assert!(SweepSpec::default().validate().is_ok());
    }
}

//! Post-selection audit machinery.
//!
//! Index convention, used everywhere in this module: an [`ErrorTable`] has
//! one row per architecture (hyper-parameter vector) and one column per
//! initial-weight seed. Selections report `(arch, seed)` and break ties on
//! the lowest `(arch, seed)` pair in lexicographic order.
//!
//! Reports describe the statistics they use: quantiles by linear
//! interpolation between closest ranks, population standard deviation,
//! and a one-sided sign test for the audit.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for, Stream};

pub const QUANTILE_METHOD: &str = "linear interpolation between closest ranks";
pub const STD_METHOD: &str = "population standard deviation (divide by count)";
pub const TEST_METHOD: &str = "one-sided sign test, ties dropped";

/// Index sets into a dataset `D`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    /// Independent audit set `T''`, never used by any selection.
    pub audit: Vec<usize>,
    pub total: usize,
}

impl Partition {
    /// Deterministic shuffled split. Sizes are `floor(f * |D|)` for each
    /// fraction; whatever is left over becomes the audit set.
    pub fn split(total: usize, fractions: (f64, f64, f64), seed: u64) -> Result<Self> {
        let (ft, fv, fe) = fractions;
        if [ft, fv, fe].iter().any(|f| f.is_nan() || *f <= 0.0) || ft + fv + fe > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "fractions {fractions:?} must be positive with sum <= 1"
            )));
        }
        let n_t = (ft * total as f64 + 1e-9).floor() as usize;
        let n_v = (fv * total as f64 + 1e-9).floor() as usize;
        let n_e = (fe * total as f64 + 1e-9).floor() as usize;
        if n_t == 0 || n_v == 0 || n_e == 0 {
            return Err(Error::InvalidArgument(format!(
                "fractions {fractions:?} leave an empty training, validation or test set for |D| = {total}"
            )));
        }
        let mut idx: Vec<usize> = (0..total).collect();
        idx.shuffle(&mut rng_for(seed, Stream::Partition, 0));
        let mut rest = idx.into_iter();
        let mut take = |n: usize| -> Vec<usize> {
            let mut v: Vec<usize> = rest.by_ref().take(n).collect();
            v.sort_unstable();
            v
        };
        let train = take(n_t);
        let validation = take(n_v);
        let test = take(n_e);
        let audit = take(usize::MAX);
        let p = Self {
            train,
            validation,
            test,
            audit,
            total,
        };
        p.check_sound()?;
        Ok(p)
    }

    /// Pairwise disjoint and covering `0..total`.
    pub fn check_sound(&self) -> Result<()> {
        let mut seen = vec![false; self.total];
        for &i in self
            .train
            .iter()
            .chain(&self.validation)
            .chain(&self.test)
            .chain(&self.audit)
        {
            if i >= self.total || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "partition index {i} repeated or out of range"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("partition does not cover D".into()));
        }
        Ok(())
    }

    /// Warnings for the degenerate protocols where the validation or test
    /// set overlaps the training set.
    pub fn overlap_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let overlaps = |a: &[usize], b: &[usize]| a.iter().any(|i| b.contains(i));
        if overlaps(&self.train, &self.validation) {
            out.push(
                "VALIDATION-VANISHED: validation set overlaps the training set".to_string(),
            );
        }
        if overlaps(&self.train, &self.test) {
            out.push("TEST-VANISHED: test set overlaps the training set".to_string());
        }
        out
    }
}

/// A named set of scalar hyper-parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArchParams(pub BTreeMap<String, f64>);

impl ArchParams {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    /// `key=value` pairs sorted by key, joined by `;`.
    pub fn canonical(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse_canonical(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for pair in text.split(';').filter(|p| !p.is_empty()) {
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("bad architecture parameter `{pair}`"))
            })?;
            let v: f64 = v.parse().map_err(|_| {
                Error::InvalidArgument(format!("bad value in `{pair}`"))
            })?;
            map.insert(k.to_string(), v);
        }
        Ok(Self(map))
    }
}

/// One scalar hyper-parameter estimated as `mean +- sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarEstimate {
    pub name: String,
    pub mean: f64,
    pub sigma: f64,
}

impl ScalarEstimate {
    /// `[mean - sigma, mean, mean + sigma]`, deduplicated when sigma = 0.
    pub fn points(&self) -> Vec<f64> {
        let mut p = vec![self.mean - self.sigma, self.mean, self.mean + self.sigma];
        p.dedup();
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub architectures: Vec<ArchParams>,
    pub seeds: Vec<u64>,
}

impl HyperGrid {
    pub fn new(architectures: Vec<ArchParams>, seeds: Vec<u64>) -> Result<Self> {
        if architectures.is_empty() || seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "grid needs at least one architecture and one seed".into(),
            ));
        }
        Ok(Self {
            architectures,
            seeds,
        })
    }

    /// Cartesian product of every scalar's three-point grid, with
    /// `n_seeds` seeds derived from `master_seed`.
    pub fn from_estimates(
        scalars: &[ScalarEstimate],
        fixed: &ArchParams,
        n_seeds: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let mut archs = vec![fixed.clone()];
        for s in scalars {
            archs = archs
                .into_iter()
                .flat_map(|a| s.points().into_iter().map(move |v| a.clone().with(&s.name, v)))
                .collect();
        }
        Self::new(archs, derived_seeds(master_seed, n_seeds))
    }

    pub fn k(&self) -> usize {
        self.architectures.len()
    }

    pub fn n(&self) -> usize {
        self.seeds.len()
    }
}

/// `n` seeds derived from `master` on the init stream.
pub fn derived_seeds(master: u64, n: usize) -> Vec<u64> {
    (0..n as u64)
        .map(|j| derive_seed(master, Stream::Init, j))
        .collect()
}

/// A learning system the grid can train and score.
pub trait Trainer: Sync {
    type Model: Send;

    fn name(&self) -> String;

    /// Train on `data`. An error marks the run as failed.
    fn train(&self, arch: &ArchParams, seed: u64, data: &Dataset) -> Result<Self::Model>;

    /// Error rate of `model` on `data`, in [0, 1].
    fn error(&self, model: &Self::Model, data: &Dataset) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub arch: usize,
    pub seed: usize,
    pub fit: f64,
    pub val: f64,
    pub test: f64,
    pub audit: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub architectures: Vec<ArchParams>,
    pub seeds: Vec<u64>,
    /// Row-major: `cells[arch * n + seed]`.
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Fit,
    Val,
    Test,
    Audit,
}

impl ErrorTable {
    /// Table from explicit validation and test matrices (fit = 0).
    pub fn from_matrices(val: &[Vec<f64>], test: &[Vec<f64>]) -> Result<Self> {
        let k = val.len();
        let n = val.first().map_or(0, Vec::len);
        if k == 0 || n == 0 || test.len() != k {
            return Err(Error::InvalidArgument("bad table shape".into()));
        }
        let mut cells = Vec::with_capacity(k * n);
        for i in 0..k {
            if val[i].len() != n || test[i].len() != n {
                return Err(Error::InvalidArgument("ragged table".into()));
            }
            for j in 0..n {
                cells.push(Cell {
                    arch: i,
                    seed: j,
                    fit: 0.0,
                    val: val[i][j],
                    test: test[i][j],
                    audit: None,
                    wall_time_s: None,
                    status: CellStatus::Ok,
                });
            }
        }
        Ok(Self {
            architectures: vec![ArchParams::default(); k],
            seeds: (0..n as u64).collect(),
            cells,
        })
    }

    pub fn k(&self) -> usize {
        self.architectures.len()
    }

    pub fn n(&self) -> usize {
        self.seeds.len()
    }

    pub fn cell(&self, arch: usize, seed: usize) -> &Cell {
        &self.cells[arch * self.n() + seed]
    }

    pub fn value(&self, arch: usize, seed: usize, kind: ErrorKind) -> f64 {
        let c = self.cell(arch, seed);
        match kind {
            ErrorKind::Fit => c.fit,
            ErrorKind::Val => c.val,
            ErrorKind::Test => c.test,
            ErrorKind::Audit => c.audit.unwrap_or(f64::NAN),
        }
    }

    pub fn column(&self, kind: ErrorKind) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| self.value(c.arch, c.seed, kind))
            .collect()
    }

    pub fn failed_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c.status, CellStatus::Failed(_)))
            .count()
    }

    /// Every `(arch, seed)` cell present, every error in [0, 1].
    pub fn check_complete(&self) -> Result<()> {
        if self.cells.len() != self.k() * self.n() {
            return Err(Error::InvalidArgument("incomplete error table".into()));
        }
        for (idx, c) in self.cells.iter().enumerate() {
            if c.arch * self.n() + c.seed != idx {
                return Err(Error::InvalidArgument("error table out of order".into()));
            }
            for e in [c.fit, c.val, c.test].into_iter().chain(c.audit) {
                if !(0.0..=1.0).contains(&e) {
                    return Err(Error::InvalidArgument(format!(
                        "error {e} outside [0, 1] in cell ({}, {})",
                        c.arch, c.seed
                    )));
                }
            }
        }
        Ok(())
    }

    /// CSV with columns
    /// `arch_id,seed_id,arch_params,fit_err,val_err,test_err,audit_err,wall_time_s,status`.
    /// Empty fields mean "not measured".
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "arch_id,seed_id,arch_params,fit_err,val_err,test_err,audit_err,wall_time_s,status\n",
        );
        for c in &self.cells {
            let status = match &c.status {
                CellStatus::Ok => "ok".to_string(),
                CellStatus::Failed(msg) => format!("failed: {}", msg.replace([',', '\n'], " ")),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                c.arch,
                c.seed,
                self.architectures[c.arch].canonical(),
                c.fit,
                c.val,
                c.test,
                c.audit.map(|v| v.to_string()).unwrap_or_default(),
                c.wall_time_s.map(|v| v.to_string()).unwrap_or_default(),
                status,
            ));
        }
        out
    }
}

/// Options for [`run_grid`].
#[derive(Debug, Clone, Copy, Default)]
pub struct GridOptions {
    /// Record wall-clock time per cell. Off by default because it makes
    /// the table non-reproducible.
    pub record_wall_time: bool,
}

/// Train `k * n` systems on `T` and score each on `T`, `V`, `T'` (and `T''`
/// when the partition has one). Cells are independent; the result does not
/// depend on scheduling.
pub fn run_grid<T: Trainer>(
    trainer: &T,
    grid: &HyperGrid,
    data: &Dataset,
    partition: &Partition,
    options: GridOptions,
) -> Result<ErrorTable> {
    if partition.total != data.len() {
        return Err(Error::InvalidArgument(format!(
            "partition covers {} samples, dataset has {}",
            partition.total,
            data.len()
        )));
    }
    let train = data.subset(&partition.train);
    let val = data.subset(&partition.validation);
    let test = data.subset(&partition.test);
    let audit = (!partition.audit.is_empty()).then(|| data.subset(&partition.audit));
    let n = grid.n();
    let cells: Vec<Cell> = (0..grid.k() * n)
        .into_par_iter()
        .map(|idx| {
            let (arch, seed) = (idx / n, idx % n);
            let started = Instant::now();
            let outcome = trainer
                .train(&grid.architectures[arch], grid.seeds[seed], &train)
                .and_then(|model| {
                    let fit = trainer.error(&model, &train)?;
                    let v = trainer.error(&model, &val)?;
                    let t = trainer.error(&model, &test)?;
                    let a = audit.as_ref().map(|d| trainer.error(&model, d)).transpose()?;
                    Ok((fit, v, t, a))
                });
            let wall_time_s = options
                .record_wall_time
                .then(|| started.elapsed().as_secs_f64());
            match outcome {
                Ok((fit, val, test, audit)) => Cell {
                    arch,
                    seed,
                    fit,
                    val,
                    test,
                    audit,
                    wall_time_s,
                    status: CellStatus::Ok,
                },
                Err(e) => Cell {
                    arch,
                    seed,
                    fit: 1.0,
                    val: 1.0,
                    test: 1.0,
                    audit: audit.as_ref().map(|_| 1.0),
                    wall_time_s,
                    status: CellStatus::Failed(e.to_string()),
                },
            }
        })
        .collect();
    Ok(ErrorTable {
        architectures: grid.architectures.clone(),
        seeds: grid.seeds.clone(),
        cells,
    })
}

/// Result of picking a single cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub arch: usize,
    pub seed: usize,
    pub error: f64,
    /// Selected on the test set, which the test then no longer measures.
    pub protocol_flawed: bool,
}

/// Result of picking an architecture (or seed) by its mean error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedSelection {
    pub index: usize,
    pub mean_error: f64,
    pub protocol_flawed: bool,
}

fn argmin_cell(table: &ErrorTable, kind: ErrorKind) -> (usize, usize, f64) {
    let mut best = (0, 0, table.value(0, 0, kind));
    for a in 0..table.k() {
        for s in 0..table.n() {
            let e = table.value(a, s, kind);
            if e < best.2 {
                best = (a, s, e);
            }
        }
    }
    best
}

/// Post-selection using the validation set: the luckiest cell by `e_ij`.
pub fn psuvs_select(table: &ErrorTable) -> Selection {
    let (arch, seed, error) = argmin_cell(table, ErrorKind::Val);
    Selection {
        arch,
        seed,
        error,
        protocol_flawed: false,
    }
}

/// Post-selection using the test set. Always flagged as flawed.
pub fn psuts_select(table: &ErrorTable) -> Selection {
    let (arch, seed, error) = argmin_cell(table, ErrorKind::Test);
    Selection {
        arch,
        seed,
        error,
        protocol_flawed: true,
    }
}

fn argmin_mean(means: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, m) in means.enumerate() {
        if m < best.1 {
            best = (i, m);
        }
    }
    best
}

fn arch_means(table: &ErrorTable, kind: ErrorKind) -> Vec<f64> {
    (0..table.k())
        .map(|a| (0..table.n()).map(|s| table.value(a, s, kind)).sum::<f64>() / table.n() as f64)
        .collect()
}

fn seed_means(table: &ErrorTable, kind: ErrorKind) -> Vec<f64> {
    (0..table.n())
        .map(|s| (0..table.k()).map(|a| table.value(a, s, kind)).sum::<f64>() / table.k() as f64)
        .collect()
}

/// Architecture with the lowest validation error averaged over all seeds.
pub fn avg_validated_architecture(table: &ErrorTable) -> AveragedSelection {
    let (index, mean_error) = argmin_mean(arch_means(table, ErrorKind::Val).into_iter());
    AveragedSelection {
        index,
        mean_error,
        protocol_flawed: false,
    }
}

/// Seed with the lowest validation error averaged over all architectures.
pub fn avg_validated_weights(table: &ErrorTable) -> AveragedSelection {
    let (index, mean_error) = argmin_mean(seed_means(table, ErrorKind::Val).into_iter());
    AveragedSelection {
        index,
        mean_error,
        protocol_flawed: false,
    }
}

/// Architecture with the lowest test error averaged over seeds. Still
/// flawed: every averaged term has seen the test set.
pub fn psuts_avg_architecture(table: &ErrorTable) -> AveragedSelection {
    let (index, mean_error) = argmin_mean(arch_means(table, ErrorKind::Test).into_iter());
    AveragedSelection {
        index,
        mean_error,
        protocol_flawed: true,
    }
}

/// Order statistics and moments of an error population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

impl DistributionSummary {
    pub const CSV_HEADER: &'static str = "count,min,q25,median,q75,max,mean,std";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.count, self.min, self.q25, self.median, self.q75, self.max, self.mean, self.std
        )
    }
}

impl fmt::Display for DistributionSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} min={:.4} q25={:.4} median={:.4} q75={:.4} max={:.4} mean={:.4} std={:.4}",
            self.count, self.min, self.q25, self.median, self.q75, self.max, self.mean, self.std
        )
    }
}

/// Linear-interpolation quantile of sorted data, `q` in [0, 1].
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn summarize_distribution(errors: &[f64]) -> Result<DistributionSummary> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty population".into()));
    }
    if errors.iter().any(|e| e.is_nan()) {
        return Err(Error::NonFinite("summarize_distribution"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    Ok(DistributionSummary {
        count: sorted.len(),
        min: sorted[0],
        q25: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
        max: *sorted.last().unwrap(),
        mean,
        std: var.sqrt(),
    })
}

/// Fold membership: shuffle `0..len` with `seed`, then deal round-robin.
pub fn kfold_indices(len: usize, n_folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    if len < n_folds {
        return Err(Error::InvalidArgument(format!(
            "{len} samples cannot fill {n_folds} folds"
        )));
    }
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut rng_for(seed, Stream::Folds, 0));
    let mut folds = vec![Vec::new(); n_folds];
    for (pos, i) in idx.into_iter().enumerate() {
        folds[pos % n_folds].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub mean_error: f64,
    pub summary: DistributionSummary,
    pub fold_errors: Vec<f64>,
    pub folds: Vec<Vec<usize>>,
}

/// n-fold cross-validation: experiment `i` trains on every fold but `i`
/// and tests on fold `i`. A failed run scores 1.0.
pub fn k_fold_cross_validate<T: Trainer>(
    data: &Dataset,
    n_folds: usize,
    trainer: &T,
    arch: &ArchParams,
    seed: u64,
) -> Result<CrossValidation> {
    let folds = kfold_indices(data.len(), n_folds, seed)?;
    let fold_errors: Vec<f64> = (0..n_folds)
        .into_par_iter()
        .map(|i| {
            let train_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            let train = data.subset(&train_idx);
            let test = data.subset(&folds[i]);
            trainer
                .train(arch, seed, &train)
                .and_then(|m| trainer.error(&m, &test))
                .unwrap_or(1.0)
        })
        .collect();
    let summary = summarize_distribution(&fold_errors)?;
    Ok(CrossValidation {
        mean_error: fold_errors.iter().sum::<f64>() / n_folds as f64,
        summary,
        fold_errors,
        folds,
    })
}

/// One-sided sign test p-value for `positives` successes among
/// `positives + negatives` trials at probability 1/2: `P(X >= positives)`.
pub fn sign_test_p(positives: usize, negatives: usize) -> f64 {
    let n = positives + negatives;
    if n == 0 {
        return 1.0;
    }
    // log-space binomial tail
    let ln_choose = |k: usize| -> f64 {
        (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
    };
    let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
    (positives..=n)
        .map(|k| (ln_choose(k) + ln_half_n).exp())
        .sum::<f64>()
        .min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRepeat {
    pub repeat: usize,
    pub master_seed: u64,
    pub psuvs: Selection,
    /// `T''` error of the PSUVS-selected network.
    pub psuvs_audit: f64,
    pub psuts: Selection,
    pub psuts_audit: f64,
    /// Mean validation error over the whole grid.
    pub grid_mean_val: f64,
    pub failed_cells: usize,
}

impl AuditRepeat {
    pub fn psuvs_gap(&self) -> f64 {
        self.psuvs_audit - self.psuvs.error
    }

    pub fn psuts_gap(&self) -> f64 {
        self.psuts_audit - self.psuts.error
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapStatistics {
    pub summary: DistributionSummary,
    pub mean: f64,
    pub positives: usize,
    pub negatives: usize,
    pub ties: usize,
    /// One-sided sign-test p-value that the selected error understates `T''`.
    pub p_value: f64,
}

impl GapStatistics {
    fn from_gaps(gaps: &[f64]) -> Result<Self> {
        let summary = summarize_distribution(gaps)?;
        let positives = gaps.iter().filter(|&&g| g > 0.0).count();
        let negatives = gaps.iter().filter(|&&g| g < 0.0).count();
        Ok(Self {
            summary,
            mean: summary.mean,
            positives,
            negatives,
            ties: gaps.len() - positives - negatives,
            p_value: sign_test_p(positives, negatives),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub repeats: Vec<AuditRepeat>,
    /// `e''(selected) - e(selected)` for PSUVS.
    pub psuvs_gap: GapStatistics,
    /// `e''(selected) - e'(selected)` for PSUTS.
    pub psuts_gap: GapStatistics,
    /// Mean over repeats of the luckiest network's `T''` error.
    pub luckiest_audit_mean: f64,
    /// Mean over repeats of the grid's mean validation error.
    pub grid_val_mean: f64,
    pub tables: Vec<ErrorTable>,
}

#[derive(Debug, Clone)]
pub struct AuditSpec {
    pub architectures: Vec<ArchParams>,
    pub n_seeds: usize,
    /// `(T, V, T')` fractions; the remainder is `T''` and must be non-empty.
    pub fractions: (f64, f64, f64),
    pub repeats: usize,
    pub master_seed: u64,
}

/// Repeat the whole protocol under independent master seeds: partition,
/// train the grid, select the luckiest network by validation (and by
/// test), then score it on the untouched audit set `T''`.
pub fn luckiest_generalization_audit<T: Trainer>(
    trainer: &T,
    data: &Dataset,
    spec: &AuditSpec,
) -> Result<AuditReport> {
    if spec.repeats == 0 {
        return Err(Error::InvalidArgument("audit needs at least one repeat".into()));
    }
    let mut repeats = Vec::with_capacity(spec.repeats);
    let mut tables = Vec::with_capacity(spec.repeats);
    for r in 0..spec.repeats {
        let seed = derive_seed(spec.master_seed, Stream::AuditRepeat, r as u64);
        let partition = Partition::split(data.len(), spec.fractions, seed)?;
        if partition.audit.is_empty() {
            return Err(Error::InvalidArgument(
                "fractions leave no audit set T''".into(),
            ));
        }
        let grid = HyperGrid::new(spec.architectures.clone(), derived_seeds(seed, spec.n_seeds))?;
        let table = run_grid(trainer, &grid, data, &partition, GridOptions::default())?;
        let psuvs = psuvs_select(&table);
        let psuts = psuts_select(&table);
        let val = table.column(ErrorKind::Val);
        repeats.push(AuditRepeat {
            repeat: r,
            master_seed: seed,
            psuvs,
            psuvs_audit: table.value(psuvs.arch, psuvs.seed, ErrorKind::Audit),
            psuts,
            psuts_audit: table.value(psuts.arch, psuts.seed, ErrorKind::Audit),
            grid_mean_val: val.iter().sum::<f64>() / val.len() as f64,
            failed_cells: table.failed_count(),
        });
        tables.push(table);
    }
    let vs: Vec<f64> = repeats.iter().map(AuditRepeat::psuvs_gap).collect();
    let ts: Vec<f64> = repeats.iter().map(AuditRepeat::psuts_gap).collect();
    let n = repeats.len() as f64;
    Ok(AuditReport {
        psuvs_gap: GapStatistics::from_gaps(&vs)?,
        psuts_gap: GapStatistics::from_gaps(&ts)?,
        luckiest_audit_mean: repeats.iter().map(|r| r.psuvs_audit).sum::<f64>() / n,
        grid_val_mean: repeats.iter().map(|r| r.grid_mean_val).sum::<f64>() / n,
        repeats,
        tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_examples() {
        let p = Partition::split(10, (0.6, 0.2, 0.2), 1).unwrap();
        assert_eq!(
            (p.train.len(), p.validation.len(), p.test.len(), p.audit.len()),
            (6, 2, 2, 0)
        );
        p.check_sound().unwrap();
        assert_eq!(p, Partition::split(10, (0.6, 0.2, 0.2), 1).unwrap());

        let p = Partition::split(100, (0.5, 0.2, 0.2), 3).unwrap();
        assert_eq!(p.audit.len(), 10);
        for i in &p.audit {
            assert!(!p.train.contains(i) && !p.validation.contains(i) && !p.test.contains(i));
        }
        assert!(p.overlap_warnings().is_empty());
    }

    #[test]
    fn partition_rejects_empty_sets() {
        assert!(Partition::split(3, (0.6, 0.2, 0.2), 0).is_err());
        assert!(Partition::split(10, (0.6, 0.5, 0.2), 0).is_err());
        assert!(Partition::split(10, (0.6, 0.0, 0.2), 0).is_err());
    }

    #[test]
    fn overlap_detected() {
        let mut p = Partition::split(10, (0.6, 0.2, 0.2), 1).unwrap();
        p.validation = p.train.clone();
        let w = p.overlap_warnings();
        assert!(w[0].starts_with("VALIDATION-VANISHED"));
        assert!(p.check_sound().is_err());
    }

    #[test]
    fn psuvs_examples() {
        let z = vec![vec![0.0]];
        let t = ErrorTable::from_matrices(&[vec![0.3]], &z).unwrap();
        let s = psuvs_select(&t);
        assert_eq!((s.arch, s.seed, s.error), (0, 0, 0.3));
        let t = ErrorTable::from_matrices(
            &[vec![0.3, 0.1], vec![0.2, 0.4]],
            &[vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        let s = psuvs_select(&t);
        assert_eq!((s.arch, s.seed, s.error), (0, 1, 0.1));
        let t = ErrorTable::from_matrices(&vec![vec![0.5; 3]; 2], &vec![vec![0.5; 3]; 2]).unwrap();
        let s = psuvs_select(&t);
        assert_eq!((s.arch, s.seed), (0, 0));
    }

    #[test]
    fn psuts_examples() {
        let t = ErrorTable::from_matrices(&[vec![0.9]], &[vec![0.25]]).unwrap();
        let s = psuts_select(&t);
        assert_eq!((s.arch, s.seed, s.error, s.protocol_flawed), (0, 0, 0.25, true));
        let t = ErrorTable::from_matrices(
            &[vec![0.1, 0.5], vec![0.5, 0.5]],
            &[vec![0.5, 0.5], vec![0.5, 0.2]],
        )
        .unwrap();
        let v = psuvs_select(&t);
        let s = psuts_select(&t);
        assert_eq!((v.arch, v.seed), (0, 0));
        assert_eq!((s.arch, s.seed), (1, 1));
        assert!(!v.protocol_flawed);
        let t = ErrorTable::from_matrices(&vec![vec![0.3; 2]; 2], &vec![vec![0.3; 2]; 2]).unwrap();
        let s = psuts_select(&t);
        assert_eq!((s.arch, s.seed), (0, 0));
    }

    #[test]
    fn averaged_selector_examples() {
        let t = ErrorTable::from_matrices(&[vec![0.1, 0.9], vec![0.4, 0.4]], &vec![vec![0.0; 2]; 2])
            .unwrap();
        let a = avg_validated_architecture(&t);
        assert_eq!(a.index, 1);
        assert!((a.mean_error - 0.4).abs() < 1e-15);

        // n = 1 reduces to argmin over architectures
        let t = ErrorTable::from_matrices(&[vec![0.3], vec![0.2], vec![0.7]], &vec![vec![0.0]; 3])
            .unwrap();
        assert_eq!(avg_validated_architecture(&t).index, 1);

        // mirrored: averaging over architectures per seed
        let t = ErrorTable::from_matrices(&[vec![0.1, 0.4], vec![0.9, 0.4]], &vec![vec![0.0; 2]; 2])
            .unwrap();
        let w = avg_validated_weights(&t);
        assert_eq!(w.index, 1);
        assert!((w.mean_error - 0.4).abs() < 1e-15);
        let t = ErrorTable::from_matrices(&[vec![0.3, 0.2, 0.7]], &[vec![0.0; 3]]).unwrap();
        assert_eq!(avg_validated_weights(&t).index, 1);

        let t = ErrorTable::from_matrices(&vec![vec![0.0; 2]; 2], &[vec![0.1, 0.9], vec![0.4, 0.4]])
            .unwrap();
        let p = psuts_avg_architecture(&t);
        assert_eq!(p.index, 1);
        assert!(p.protocol_flawed);
    }

    #[test]
    fn summarize_examples() {
        let s = summarize_distribution(&[0.5]).unwrap();
        assert_eq!((s.min, s.q25, s.median, s.q75, s.max, s.std), (0.5, 0.5, 0.5, 0.5, 0.5, 0.0));
        let s = summarize_distribution(&[0.4, 0.1, 0.3, 0.2]).unwrap();
        assert_eq!(s.min, 0.1);
        assert!((s.median - 0.25).abs() < 1e-15);
        assert_eq!(s.max, 0.4);
        assert!((s.q25 - 0.175).abs() < 1e-15);
        assert!(summarize_distribution(&[]).is_err());
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test_p(1, 0) - 0.5).abs() < 1e-15);
        assert!((sign_test_p(2, 0) - 0.25).abs() < 1e-15);
        // P(X >= 15 | n = 20) = 21700 / 2^20
        assert!((sign_test_p(15, 5) - 21700.0 / 1048576.0).abs() < 1e-12);
        assert_eq!(sign_test_p(0, 0), 1.0);
        assert!((sign_test_p(0, 7) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kfold_layout() {
        let folds = kfold_indices(4, 2, 9).unwrap();
        assert_eq!(folds.len(), 2);
        assert!(folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
        let folds = kfold_indices(11, 3, 9).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 4, 3]);
        assert!(kfold_indices(2, 3, 0).is_err());
        assert!(kfold_indices(5, 1, 0).is_err());
    }

    #[test]
    fn grid_from_estimates() {
        let scalars = vec![
            ScalarEstimate {
                name: "a".into(),
                mean: 1.0,
                sigma: 0.5,
            },
            ScalarEstimate {
                name: "b".into(),
                mean: 2.0,
                sigma: 1.0,
            },
        ];
        let g = HyperGrid::from_estimates(&scalars, &ArchParams::default(), 4, 7).unwrap();
        assert_eq!((g.k(), g.n()), (9, 4));
        assert_eq!(g.architectures[0].canonical(), "a=0.5;b=1");
        let back = ArchParams::parse_canonical(&g.architectures[8].canonical()).unwrap();
        assert_eq!(back, g.architectures[8]);
    }

    #[test]
    fn table_csv_has_all_columns() {
        let t = ErrorTable::from_matrices(&[vec![0.25, 0.5]], &[vec![0.0, 1.0]]).unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "arch_id,seed_id,arch_params,fit_err,val_err,test_err,audit_err,wall_time_s,status"
        );
        assert_eq!(lines.next().unwrap(), "0,0,,0,0.25,0,,,ok");
        t.check_complete().unwrap();
    }
}

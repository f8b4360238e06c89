//! End-to-end orchestration: per-molecule sampling budgets, sampler mixing,
//! clustering down to 2·n_ref representatives, COV/MAT evaluation, and
//! report emission (JSON, CSV, and a re-run manifest).

use crate::clustering::{featurize, kmeans, select_representatives, ClusterError};
use crate::forcefield::{build_model, sample_energy, FfError};
use crate::metrics::{
    molecule_metrics, summarize, MetricsConfig, MetricsError, MoleculeMetrics,
};
use crate::molio::{Ensemble, MolError, Molecule};
use crate::samplers::{sample_geometric, sample_uniform, SamplerConfig, SamplerError};
use crate::seeding::derive_rng;
use rand::Rng;
use serde::Serialize;
use std::time::Instant;
use thiserror::Error;

pub const DEFAULT_MULTIPLIER: usize = 20;
pub const DEFAULT_CAP: usize = 2000;
pub const DEFAULT_DELTA: f64 = 0.5;
/// The ablation grid; other values need the explicit override flag.
pub const ALLOWED_MULTIPLIERS: [usize; 4] = [2, 5, 10, 20];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("need at least one reference conformer, got {0}")]
    BadReferenceCount(usize),
    #[error("multiplier {0} is not one of {ALLOWED_MULTIPLIERS:?}; pass the override flag to use it")]
    BadMultiplier(usize),
    #[error("multiplier must be at least 1")]
    ZeroMultiplier,
    #[error("threshold must be positive and finite, got {0}")]
    BadThreshold(f64),
    #[error("every sampler is disabled")]
    NoSamplersEnabled,
    #[error("no candidates were produced for '{0}'")]
    ZeroCandidates(String),
    #[error("no molecules supplied")]
    EmptyBenchmark,
    #[error("duplicate molecule id '{0}'")]
    DuplicateMolecule(String),
    #[error("every molecule failed; first error: {0}")]
    AllMoleculesFailed(String),
    #[error("external ensemble holds {found} conformers but the budget allows {allowed}")]
    ExternalCountExceedsBudget { found: usize, allowed: usize },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Forcefield(#[from] FfError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Mol(#[from] MolError),
}

/// Draw counts for one molecule: the energy sampler gets n_e and the other
/// two a quarter of that each, so the uniform:geometric:energy ratio is
/// 1:1:4 and the total is n_u + n_g + n_e.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SamplingBudget {
    pub n_ref: usize,
    pub n_e: usize,
    pub n_u: usize,
    pub n_g: usize,
    pub multiplier: usize,
    pub cap: usize,
}

impl SamplingBudget {
    pub fn total(&self) -> usize {
        self.n_u + self.n_g + self.n_e
    }
}

/// n_e = min(multiplier·n_ref, cap); n_u = n_g = ⌈n_e/4⌉. Ceiling keeps the
/// total from undershooting the intended mix when n_e is not divisible by 4.
pub fn compute_budget(
    n_ref: usize,
    multiplier: usize,
    cap: usize,
) -> Result<SamplingBudget, PipelineError> {
    if n_ref < 1 {
        return Err(PipelineError::BadReferenceCount(n_ref));
    }
    if multiplier < 1 {
        return Err(PipelineError::ZeroMultiplier);
    }
    let n_e = (multiplier * n_ref).min(cap);
    let quarter = n_e.div_ceil(4);
    Ok(SamplingBudget {
        n_ref,
        n_e,
        n_u: quarter,
        n_g: quarter,
        multiplier,
        cap,
    })
}

/// Which samplers contribute candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SamplerSet {
    pub uniform: bool,
    pub geometric: bool,
    pub energy: bool,
}

impl SamplerSet {
    pub fn all() -> Self {
        SamplerSet {
            uniform: true,
            geometric: true,
            energy: true,
        }
    }

    pub fn any_enabled(&self) -> bool {
        self.uniform || self.geometric || self.energy
    }

    /// Enabled sampler names in fixed (uniform, geometric, energy) order.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.uniform {
            out.push("uniform".to_string());
        }
        if self.geometric {
            out.push("geometric".to_string());
        }
        if self.energy {
            out.push("energy".to_string());
        }
        out
    }

    /// Turns one sampler off by name; false if the name is unknown.
    pub fn disable(&mut self, name: &str) -> bool {
        match name {
            "uniform" => self.uniform = false,
            "geometric" => self.geometric = false,
            "energy" => self.energy = false,
            _ => return false,
        }
        true
    }
}

impl Default for SamplerSet {
    fn default() -> Self {
        SamplerSet::all()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub seed: u64,
    pub multiplier: usize,
    /// Accept multipliers outside the ablation grid.
    pub allow_any_multiplier: bool,
    pub cap: usize,
    pub delta: f64,
    pub samplers: SamplerSet,
    /// When samplers are disabled: false keeps the remaining samplers'
    /// absolute budgets; true re-splits the full total across the enabled
    /// ones in proportion to their original shares.
    pub redistribute: bool,
    /// Diagnostic mode: skip sampling and score exact copies of the
    /// reference, pinning COV=100% and MAT=0.
    pub generated_equals_reference: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            multiplier: DEFAULT_MULTIPLIER,
            allow_any_multiplier: false,
            cap: DEFAULT_CAP,
            delta: DEFAULT_DELTA,
            samplers: SamplerSet::all(),
            redistribute: false,
            generated_equals_reference: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.multiplier < 1 {
            return Err(PipelineError::ZeroMultiplier);
        }
        if !self.allow_any_multiplier && !ALLOWED_MULTIPLIERS.contains(&self.multiplier) {
            return Err(PipelineError::BadMultiplier(self.multiplier));
        }
        if !self.samplers.any_enabled() {
            return Err(PipelineError::NoSamplersEnabled);
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(PipelineError::BadThreshold(self.delta));
        }
        Ok(())
    }
}

/// Applies the enable flags to a budget. Without redistribution a disabled
/// sampler's share is simply dropped. With it the full total is re-split
/// across the enabled samplers proportionally to their original shares
/// (largest-remainder rounding, leftovers to the earliest sampler), so the
/// candidate count is preserved exactly.
pub fn sampler_counts(
    budget: &SamplingBudget,
    samplers: SamplerSet,
    redistribute: bool,
) -> (usize, usize, usize) {
    let base = [budget.n_u, budget.n_g, budget.n_e];
    let on = [samplers.uniform, samplers.geometric, samplers.energy];
    if !redistribute || on.iter().all(|&o| o) {
        let pick = |i: usize| if on[i] { base[i] } else { 0 };
        return (pick(0), pick(1), pick(2));
    }
    let total: usize = base.iter().sum();
    let weight: usize = (0..3).filter(|&i| on[i]).map(|i| base[i]).sum();
    let mut counts = [0usize; 3];
    if weight == 0 {
        return (0, 0, 0);
    }
    let mut remainders = [0usize; 3];
    let mut assigned = 0;
    for i in 0..3 {
        if on[i] {
            let share = total * base[i];
            counts[i] = share / weight;
            remainders[i] = share % weight;
            assigned += counts[i];
        }
    }
    let mut leftover = total - assigned;
    while leftover > 0 {
        let i = (0..3)
            .filter(|&i| on[i])
            .max_by(|&a, &b| remainders[a].cmp(&remainders[b]).then(b.cmp(&a)))
            .expect("at least one sampler enabled");
        counts[i] += 1;
        remainders[i] = 0;
        leftover -= 1;
    }
    (counts[0], counts[1], counts[2])
}

/// Conformers drawn per sampler for one molecule.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SamplerCounts {
    pub uniform: usize,
    pub geometric: usize,
    pub energy: usize,
}

/// Everything run_molecule produces: the selected ensemble, its scores, and
/// the bookkeeping the manifest records.
#[derive(Debug)]
pub struct MoleculeRun {
    pub selected: Ensemble,
    pub metrics: MoleculeMetrics,
    pub budget: SamplingBudget,
    pub counts: SamplerCounts,
    pub k: usize,
    pub warnings: Vec<String>,
}

fn sub_config(config: &PipelineConfig, molecule: &Molecule, role: &str) -> SamplerConfig {
    SamplerConfig::with_seed(derive_rng(config.seed, &molecule.id, role, 0).random())
}

fn draw_candidates(
    molecule: &Molecule,
    template: &crate::molio::Conformer,
    counts: (usize, usize, usize),
    config: &PipelineConfig,
) -> Result<Ensemble, PipelineError> {
    let (c_u, c_g, c_e) = counts;
    let mut candidates = Ensemble::new(molecule.id.clone());
    if c_u > 0 {
        let sub = sub_config(config, molecule, "pipeline-uniform");
        for conf in sample_uniform(molecule, template, c_u, &sub)?.conformers {
            candidates.push(conf);
        }
    }
    if c_g > 0 {
        let sub = sub_config(config, molecule, "pipeline-geometric");
        for conf in sample_geometric(molecule, c_g, &sub)?.conformers {
            candidates.push(conf);
        }
    }
    if c_e > 0 {
        let sub = sub_config(config, molecule, "pipeline-energy");
        let model = build_model(molecule)?;
        for conf in sample_energy(molecule, &model, c_e, &sub)?.conformers {
            candidates.push(conf);
        }
    }
    Ok(candidates)
}

fn select_from_candidates(
    molecule: &Molecule,
    candidates: Ensemble,
    k: usize,
    cluster_seed: u64,
    warnings: &mut Vec<String>,
) -> Result<Ensemble, PipelineError> {
    if candidates.is_empty() {
        return Err(PipelineError::ZeroCandidates(molecule.id.clone()));
    }
    if candidates.len() < k {
        warnings.push(format!(
            "only {} candidates for k={}; returning all of them",
            candidates.len(),
            k
        ));
        return Ok(candidates);
    }
    let features = featurize(&candidates, molecule)?;
    let model = kmeans(&features, k, cluster_seed)?;
    Ok(select_representatives(&candidates, &model)?)
}

/// Samples candidates for one molecule, clusters them down to k = 2·n_ref
/// medoids (all candidates plus a warning when there are fewer than k), and
/// scores the selection against the reference.
pub fn run_molecule(
    molecule: &Molecule,
    reference: &Ensemble,
    config: &PipelineConfig,
) -> Result<MoleculeRun, PipelineError> {
    config.validate()?;
    if reference.is_empty() {
        return Err(PipelineError::BadReferenceCount(0));
    }
    reference.validate_against(molecule)?;
    let n_ref = reference.len();
    let budget = compute_budget(n_ref, config.multiplier, config.cap)?;
    let k = 2 * n_ref;
    let mut warnings = Vec::new();

    let (counts, selected) = if config.generated_equals_reference {
        let copies = Ensemble::from_conformers(
            molecule.id.clone(),
            reference.conformers.clone(),
        );
        let zero = SamplerCounts {
            uniform: 0,
            geometric: 0,
            energy: 0,
        };
        (zero, copies)
    } else {
        let (c_u, c_g, c_e) = sampler_counts(&budget, config.samplers, config.redistribute);
        let template = &reference.conformers[0];
        let candidates = draw_candidates(molecule, template, (c_u, c_g, c_e), config)?;
        let cluster_seed = derive_rng(config.seed, &molecule.id, "pipeline-cluster", 0).random();
        let selected =
            select_from_candidates(molecule, candidates, k, cluster_seed, &mut warnings)?;
        (
            SamplerCounts {
                uniform: c_u,
                geometric: c_g,
                energy: c_e,
            },
            selected,
        )
    };

    let metrics = molecule_metrics(
        molecule,
        &selected,
        reference,
        &MetricsConfig::with_delta(config.delta),
    )?;
    Ok(MoleculeRun {
        selected,
        metrics,
        budget,
        counts,
        k,
        warnings,
    })
}

/// Ingestion path for externally generated candidates: clusters and scores
/// them exactly like run_molecule but skips the bundled samplers. In strict
/// mode an ensemble larger than the budget total is an error; otherwise it
/// is truncated to the budget with a warning.
pub fn run_molecule_external(
    molecule: &Molecule,
    reference: &Ensemble,
    external: &Ensemble,
    config: &PipelineConfig,
    strict: bool,
) -> Result<MoleculeRun, PipelineError> {
    config.validate()?;
    if reference.is_empty() {
        return Err(PipelineError::BadReferenceCount(0));
    }
    reference.validate_against(molecule)?;
    external.validate_against(molecule)?;
    let n_ref = reference.len();
    let budget = compute_budget(n_ref, config.multiplier, config.cap)?;
    let k = 2 * n_ref;
    let mut warnings = Vec::new();

    let allowed = budget.total();
    let mut candidates = Ensemble::new(molecule.id.clone());
    for conf in external.conformers.iter().take(allowed) {
        candidates.push(conf.clone());
    }
    if external.len() > allowed {
        if strict {
            return Err(PipelineError::ExternalCountExceedsBudget {
                found: external.len(),
                allowed,
            });
        }
        warnings.push(format!(
            "external ensemble truncated from {} to the budget total {}",
            external.len(),
            allowed
        ));
    }

    let cluster_seed = derive_rng(config.seed, &molecule.id, "pipeline-cluster", 0).random();
    let selected = select_from_candidates(molecule, candidates, k, cluster_seed, &mut warnings)?;
    let metrics = molecule_metrics(
        molecule,
        &selected,
        reference,
        &MetricsConfig::with_delta(config.delta),
    )?;
    Ok(MoleculeRun {
        selected,
        metrics,
        budget,
        counts: SamplerCounts {
            uniform: 0,
            geometric: 0,
            energy: 0,
        },
        k,
        warnings,
    })
}

/// The JSON report. Field order is part of the format; coverage is reported
/// as a percentage.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: String,
    pub config: ReportConfig,
    pub molecules: Vec<ReportMolecule>,
    pub summary: ReportSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportConfig {
    pub seed: u64,
    pub multiplier: usize,
    pub delta: f64,
    pub samplers: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMolecule {
    pub id: String,
    pub n_ref: usize,
    pub n_gen: usize,
    pub cov: f64,
    pub mat: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub cov_mean: f64,
    pub cov_median: f64,
    pub mat_mean: f64,
    pub mat_median: f64,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    /// Flat CSV: comment lines echo the config, then one row per molecule.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# confkit v{}\n", self.version));
        out.push_str(&format!(
            "# seed={} multiplier={} delta={} samplers={}\n",
            self.config.seed,
            self.config.multiplier,
            self.config.delta,
            self.config.samplers.join("+"),
        ));
        out.push_str("id,n_ref,n_gen,cov,mat,warnings\n");
        for m in &self.molecules {
            let joined = m.warnings.join("; ").replace('"', "\"\"");
            out.push_str(&format!(
                "{},{},{},{},{},\"{}\"\n",
                m.id, m.n_ref, m.n_gen, m.cov, m.mat, joined
            ));
        }
        out
    }
}

/// Everything needed to re-run a benchmark exactly, plus per-molecule
/// accounting. Timings vary between runs; the report does not.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ManifestConfig,
    pub molecules: Vec<ManifestMolecule>,
    pub failures: Vec<BenchmarkFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestConfig {
    pub seed: u64,
    pub multiplier: usize,
    pub cap: usize,
    pub delta: f64,
    pub samplers: Vec<String>,
    pub redistribute: bool,
    pub generated_equals_reference: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestMolecule {
    pub id: String,
    pub n_ref: usize,
    pub k: usize,
    pub counts: SamplerCounts,
    pub selected: usize,
    pub elapsed_ms: u64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkFailure {
    pub id: String,
    pub error: String,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("manifest serializes");
        out.push('\n');
        out
    }
}

/// A finished benchmark: per-molecule runs (sorted by id), the report, the
/// manifest, and any molecules that failed and were skipped.
#[derive(Debug)]
pub struct BenchmarkRun {
    pub runs: Vec<MoleculeRun>,
    pub report: Report,
    pub manifest: RunManifest,
    pub failures: Vec<BenchmarkFailure>,
}

/// Runs every molecule (ordered by id), skipping and recording failures,
/// then aggregates. Errors only when the input is empty, an id repeats, or
/// no molecule succeeds; the caller decides how failures affect exit codes.
pub fn run_benchmark(
    inputs: &[(Molecule, Ensemble)],
    config: &PipelineConfig,
) -> Result<BenchmarkRun, PipelineError> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(PipelineError::EmptyBenchmark);
    }
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.sort_by(|&a, &b| inputs[a].0.id.cmp(&inputs[b].0.id));
    for pair in order.windows(2) {
        if inputs[pair[0]].0.id == inputs[pair[1]].0.id {
            return Err(PipelineError::DuplicateMolecule(
                inputs[pair[0]].0.id.clone(),
            ));
        }
    }

    let mut runs = Vec::new();
    let mut timings = Vec::new();
    let mut failures = Vec::new();
    for idx in order {
        let (molecule, reference) = &inputs[idx];
        let started = Instant::now();
        match run_molecule(molecule, reference, config) {
            Ok(run) => {
                timings.push(started.elapsed().as_millis() as u64);
                runs.push(run);
            }
            Err(err) => failures.push(BenchmarkFailure {
                id: molecule.id.clone(),
                error: err.to_string(),
            }),
        }
    }
    if runs.is_empty() {
        let first = failures
            .first()
            .map(|f| format!("{}: {}", f.id, f.error))
            .unwrap_or_default();
        return Err(PipelineError::AllMoleculesFailed(first));
    }

    let per: Vec<MoleculeMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
    let summary = summarize(per, MetricsConfig::with_delta(config.delta))?;
    let report = Report {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: ReportConfig {
            seed: config.seed,
            multiplier: config.multiplier,
            delta: config.delta,
            samplers: config.samplers.labels(),
        },
        molecules: runs
            .iter()
            .map(|r| ReportMolecule {
                id: r.metrics.molecule_id.clone(),
                n_ref: r.metrics.n_ref,
                n_gen: r.metrics.n_gen,
                cov: r.metrics.cov * 100.0,
                mat: r.metrics.mat,
                warnings: r.warnings.clone(),
            })
            .collect(),
        summary: ReportSummary {
            cov_mean: summary.cov_mean * 100.0,
            cov_median: summary.cov_median * 100.0,
            mat_mean: summary.mat_mean,
            mat_median: summary.mat_median,
        },
    };
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: ManifestConfig {
            seed: config.seed,
            multiplier: config.multiplier,
            cap: config.cap,
            delta: config.delta,
            samplers: config.samplers.labels(),
            redistribute: config.redistribute,
            generated_equals_reference: config.generated_equals_reference,
        },
        molecules: runs
            .iter()
            .zip(&timings)
            .map(|(r, &ms)| ManifestMolecule {
                id: r.metrics.molecule_id.clone(),
                n_ref: r.metrics.n_ref,
                k: r.k,
                counts: r.counts,
                selected: r.selected.len(),
                elapsed_ms: ms,
                warnings: r.warnings.clone(),
            })
            .collect(),
        failures: failures.clone(),
    };
    Ok(BenchmarkRun {
        runs,
        report,
        manifest,
        failures,
    })
}

//! Ensemble evaluation: coverage (the fraction of reference conformers
//! that some generated conformer reproduces within an RMSD threshold) and
//! matching (the mean over references of the closest generated RMSD),
//! plus mean/median summaries across molecules.

use crate::geom3d::{rmsd, GeomError};
use crate::molio::{Ensemble, MolError, Molecule};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("reference ensemble is empty")]
    EmptyReference,
    #[error("generated ensemble is empty")]
    EmptyGenerated,
    #[error("ensembles belong to '{found}', expected '{expected}'")]
    MoleculeMismatch { expected: String, found: String },
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("no molecules to summarize")]
    EmptySummary,
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Mol(#[from] MolError),
}

/// Evaluation knobs: the RMSD threshold in Angstrom and which atoms count.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricsConfig {
    pub delta: f64,
    pub heavy_only: bool,
}

impl MetricsConfig {
    pub fn with_delta(delta: f64) -> Self {
        MetricsConfig {
            delta,
            heavy_only: true,
        }
    }

    fn validate(&self) -> Result<(), MetricsError> {
        if self.delta > 0.0 {
            Ok(())
        } else {
            Err(MetricsError::BadThreshold(self.delta))
        }
    }
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig::with_delta(0.5)
    }
}

/// Per-molecule evaluation record.
#[derive(Debug, Clone, Serialize)]
pub struct MoleculeMetrics {
    pub molecule_id: String,
    pub cov: f64,
    pub mat: f64,
    pub n_ref: usize,
    pub n_gen: usize,
}

/// Cross-molecule summary; medians average the two middle values for even
/// counts.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub per_molecule: Vec<MoleculeMetrics>,
    pub cov_mean: f64,
    pub cov_median: f64,
    pub mat_mean: f64,
    pub mat_median: f64,
    pub config: MetricsConfig,
}

fn check_pair(
    molecule: &Molecule,
    generated: &Ensemble,
    reference: &Ensemble,
) -> Result<(), MetricsError> {
    for ensemble in [generated, reference] {
        if ensemble.molecule_id != molecule.id {
            return Err(MetricsError::MoleculeMismatch {
                expected: molecule.id.clone(),
                found: ensemble.molecule_id.clone(),
            });
        }
        ensemble.validate_against(molecule)?;
    }
    Ok(())
}

fn mask_for(molecule: &Molecule, config: &MetricsConfig) -> Vec<bool> {
    if config.heavy_only {
        molecule.heavy_mask()
    } else {
        vec![true; molecule.atom_count()]
    }
}

/// The fraction of reference conformers that have at least one generated
/// conformer strictly closer than `config.delta` by masked RMSD.
pub fn coverage(
    molecule: &Molecule,
    generated: &Ensemble,
    reference: &Ensemble,
    config: &MetricsConfig,
) -> Result<f64, MetricsError> {
    config.validate()?;
    check_pair(molecule, generated, reference)?;
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let mask = mask_for(molecule, config);
    let mut covered = 0usize;
    for r in &reference.conformers {
        for g in &generated.conformers {
            if rmsd(g, r, &mask)? < config.delta {
                covered += 1;
                break;
            }
        }
    }
    Ok(covered as f64 / reference.len() as f64)
}

/// The mean over reference conformers of the minimum masked RMSD to the
/// generated set.
pub fn matching(
    molecule: &Molecule,
    generated: &Ensemble,
    reference: &Ensemble,
    config: &MetricsConfig,
) -> Result<f64, MetricsError> {
    check_pair(molecule, generated, reference)?;
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    if generated.is_empty() {
        return Err(MetricsError::EmptyGenerated);
    }
    let mask = mask_for(molecule, config);
    let mut total = 0.0;
    for r in &reference.conformers {
        let mut best = f64::INFINITY;
        for g in &generated.conformers {
            best = best.min(rmsd(g, r, &mask)?);
        }
        total += best;
    }
    Ok(total / reference.len() as f64)
}

/// Both metrics in one pass over the pairwise RMSD matrix.
pub fn molecule_metrics(
    molecule: &Molecule,
    generated: &Ensemble,
    reference: &Ensemble,
    config: &MetricsConfig,
) -> Result<MoleculeMetrics, MetricsError> {
    config.validate()?;
    check_pair(molecule, generated, reference)?;
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    if generated.is_empty() {
        return Err(MetricsError::EmptyGenerated);
    }
    let mask = mask_for(molecule, config);
    let mut covered = 0usize;
    let mut total = 0.0;
    for r in &reference.conformers {
        let mut best = f64::INFINITY;
        for g in &generated.conformers {
            best = best.min(rmsd(g, r, &mask)?);
        }
        if best < config.delta {
            covered += 1;
        }
        total += best;
    }
    Ok(MoleculeMetrics {
        molecule_id: molecule.id.clone(),
        cov: covered as f64 / reference.len() as f64,
        mat: total / reference.len() as f64,
        n_ref: reference.len(),
        n_gen: generated.len(),
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Aggregates per-molecule metrics into means and medians.
pub fn summarize(
    per_molecule: Vec<MoleculeMetrics>,
    config: MetricsConfig,
) -> Result<MetricsReport, MetricsError> {
    if per_molecule.is_empty() {
        return Err(MetricsError::EmptySummary);
    }
    let covs: Vec<f64> = per_molecule.iter().map(|m| m.cov).collect();
    let mats: Vec<f64> = per_molecule.iter().map(|m| m.mat).collect();
    Ok(MetricsReport {
        cov_mean: mean(&covs),
        cov_median: median(&covs),
        mat_mean: mean(&mats),
        mat_median: median(&mats),
        per_molecule,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom3d::rmsd as pair_rmsd;
    use crate::molio::{Conformer, Provenance};
    use crate::samplers::{sample_uniform, SamplerConfig};
    use crate::toyset;
    use crate::Vec3;
    use nalgebra::Rotation3;

    fn split_ensembles(count_ref: usize, count_gen: usize, seed: u64) -> (Molecule, Ensemble, Ensemble) {
        let (mol, template) = toyset::butane();
        let all = sample_uniform(
            &mol,
            &template,
            count_ref + count_gen,
            &SamplerConfig::with_seed(seed),
        )
        .unwrap();
        let mut reference = Ensemble::new(mol.id.clone());
        let mut generated = Ensemble::new(mol.id.clone());
        for (i, conf) in all.conformers.into_iter().enumerate() {
            if i < count_ref {
                reference.push(conf);
            } else {
                generated.push(conf);
            }
        }
        (mol, generated, reference)
    }

    /// Independently coded double loop over the full RMSD matrix.
    fn oracle(
        molecule: &Molecule,
        generated: &Ensemble,
        reference: &Ensemble,
        delta: f64,
    ) -> (f64, f64) {
        let mask = molecule.heavy_mask();
        let matrix: Vec<Vec<f64>> = reference
            .conformers
            .iter()
            .map(|r| {
                generated
                    .conformers
                    .iter()
                    .map(|g| pair_rmsd(g, r, &mask).unwrap())
                    .collect()
            })
            .collect();
        let covered = matrix
            .iter()
            .filter(|row| row.iter().any(|&d| d < delta))
            .count();
        let mat = matrix
            .iter()
            .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / reference.len() as f64;
        (covered as f64 / reference.len() as f64, mat)
    }

    #[test]
    fn exact_copies_score_perfectly() {
        let (mol, _, reference) = split_ensembles(4, 0, 1);
        let config = MetricsConfig::with_delta(0.5);
        let cov = coverage(&mol, &reference, &reference, &config).unwrap();
        let mat = matching(&mol, &reference, &reference, &config).unwrap();
        assert_eq!(cov, 1.0);
        assert!(mat < 1e-9);
    }

    #[test]
    fn vanishing_threshold_covers_nothing() {
        let (mol, generated, reference) = split_ensembles(3, 5, 2);
        let config = MetricsConfig::with_delta(1e-12);
        let cov = coverage(&mol, &generated, &reference, &config).unwrap();
        assert_eq!(cov, 0.0);
    }

    #[test]
    fn half_coverage_instance() {
        // Generated copies two of four references exactly; a tight
        // threshold covers exactly those two.
        let (mol, _, reference) = split_ensembles(4, 0, 3);
        let mut generated = Ensemble::new(mol.id.clone());
        generated.push(reference.conformers[0].clone());
        generated.push(reference.conformers[2].clone());
        let config = MetricsConfig::with_delta(1e-6);
        let cov = coverage(&mol, &generated, &reference, &config).unwrap();
        let (oracle_cov, _) = oracle(&mol, &generated, &reference, config.delta);
        assert_eq!(cov, 0.5);
        assert_eq!(cov, oracle_cov);
    }

    #[test]
    fn single_reference_matching_is_the_min_scan() {
        let (mol, generated, mut reference) = split_ensembles(1, 6, 4);
        reference.conformers.truncate(1);
        let config = MetricsConfig::default();
        let mat = matching(&mol, &generated, &reference, &config).unwrap();
        let mask = mol.heavy_mask();
        let direct = generated
            .conformers
            .iter()
            .map(|g| pair_rmsd(g, &reference.conformers[0], &mask).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((mat - direct).abs() < 1e-15);
    }

    #[test]
    fn random_instances_match_the_double_loop_oracle() {
        for seed in 0..12u64 {
            let n_ref = 1 + (seed as usize % 5);
            let n_gen = 1 + ((seed as usize * 7) % 10);
            let (mol, generated, reference) = split_ensembles(n_ref, n_gen, 100 + seed);
            for delta in [0.15, 0.5, 1.25] {
                let config = MetricsConfig::with_delta(delta);
                let cov = coverage(&mol, &generated, &reference, &config).unwrap();
                let mat = matching(&mol, &generated, &reference, &config).unwrap();
                let combined = molecule_metrics(&mol, &generated, &reference, &config).unwrap();
                let (ocov, omat) = oracle(&mol, &generated, &reference, delta);
                assert!((cov - ocov).abs() < 1e-12, "seed {seed} delta {delta}");
                assert!((mat - omat).abs() < 1e-12, "seed {seed} delta {delta}");
                assert!((combined.cov - ocov).abs() < 1e-12);
                assert!((combined.mat - omat).abs() < 1e-12);
                assert_eq!(combined.n_ref, n_ref);
                assert_eq!(combined.n_gen, n_gen);
            }
        }
    }

    #[test]
    fn coverage_is_monotone_in_threshold_and_generated_set() {
        let (mol, generated, reference) = split_ensembles(4, 8, 9);
        let mut prev = 0.0;
        for delta in [0.05, 0.2, 0.5, 1.0, 2.0, 5.0] {
            let cov = coverage(&mol, &generated, &reference, &MetricsConfig::with_delta(delta)).unwrap();
            assert!(cov >= prev, "coverage fell from {prev} at delta {delta}");
            prev = cov;
        }

        let config = MetricsConfig::with_delta(0.8);
        let mut growing = Ensemble::new(mol.id.clone());
        let mut prev_cov = 0.0;
        let mut prev_mat = f64::INFINITY;
        for conf in &generated.conformers {
            growing.push(conf.clone());
            let cov = coverage(&mol, &growing, &reference, &config).unwrap();
            let mat = matching(&mol, &growing, &reference, &config).unwrap();
            assert!(cov >= prev_cov, "adding a conformer lowered coverage");
            assert!(mat <= prev_mat + 1e-15, "adding a conformer raised matching");
            prev_cov = cov;
            prev_mat = mat;
        }
    }

    #[test]
    fn metrics_ignore_rigid_motions_of_either_side() {
        let (mol, mut generated, reference) = split_ensembles(3, 4, 21);
        let config = MetricsConfig::with_delta(0.75);
        let cov0 = coverage(&mol, &generated, &reference, &config).unwrap();
        let mat0 = matching(&mol, &generated, &reference, &config).unwrap();
        let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vec3::new(1.0, 1.0, -2.0)), 0.9);
        for p in &mut generated.conformers[1].coords {
            *p = rot * *p + Vec3::new(3.0, -1.0, 8.0);
        }
        let cov1 = coverage(&mol, &generated, &reference, &config).unwrap();
        let mat1 = matching(&mol, &generated, &reference, &config).unwrap();
        assert!((cov0 - cov1).abs() < 1e-9);
        assert!((mat0 - mat1).abs() < 1e-9);
    }

    #[test]
    fn error_paths() {
        let (mol, generated, reference) = split_ensembles(2, 3, 5);
        let empty = Ensemble::new(mol.id.clone());
        let config = MetricsConfig::default();
        assert!(matches!(
            coverage(&mol, &generated, &empty, &config),
            Err(MetricsError::EmptyReference)
        ));
        assert!(matches!(
            matching(&mol, &empty, &reference, &config),
            Err(MetricsError::EmptyGenerated)
        ));
        assert!(matches!(
            coverage(&mol, &generated, &reference, &MetricsConfig::with_delta(0.0)),
            Err(MetricsError::BadThreshold(_))
        ));
        let mut foreign = generated.clone();
        foreign.molecule_id = "other".into();
        for conf in &mut foreign.conformers {
            conf.molecule_id = "other".into();
        }
        assert!(matches!(
            coverage(&mol, &foreign, &reference, &config),
            Err(MetricsError::MoleculeMismatch { .. })
        ));
        assert!(matches!(
            summarize(Vec::new(), config),
            Err(MetricsError::EmptySummary)
        ));
    }

    fn metrics_row(id: &str, cov: f64, mat: f64) -> MoleculeMetrics {
        MoleculeMetrics {
            molecule_id: id.into(),
            cov,
            mat,
            n_ref: 1,
            n_gen: 1,
        }
    }

    #[test]
    fn summarize_means_and_medians() {
        let config = MetricsConfig::default();
        let one = summarize(vec![metrics_row("a", 0.7, 0.3)], config).unwrap();
        assert_eq!(one.cov_mean, 0.7);
        assert_eq!(one.cov_median, 0.7);
        assert_eq!(one.mat_mean, 0.3);
        assert_eq!(one.mat_median, 0.3);

        let even = summarize(
            vec![metrics_row("a", 0.0, 0.1), metrics_row("b", 1.0, 0.5)],
            config,
        )
        .unwrap();
        assert_eq!(even.cov_mean, 0.5);
        assert_eq!(even.cov_median, 0.5);
        assert!((even.mat_median - 0.3).abs() < 1e-15);

        let odd = summarize(
            vec![
                metrics_row("a", 0.2, 1.0),
                metrics_row("b", 0.4, 2.0),
                metrics_row("c", 0.9, 6.0),
            ],
            config,
        )
        .unwrap();
        assert!((odd.cov_mean - 0.5).abs() < 1e-15);
        assert_eq!(odd.cov_median, 0.4);
        assert_eq!(odd.mat_mean, 3.0);
        assert_eq!(odd.mat_median, 2.0);
    }

    #[test]
    fn all_atom_mode_sees_hydrogens() {
        // Two conformers identical on heavy atoms but with one hydrogen
        // displaced: heavy-only matching is 0, all-atom is not.
        let (mol, template) = toyset::butane();
        let mut moved = template.clone();
        let h_index = mol
            .atoms()
            .iter()
            .position(|a| !a.is_heavy())
            .expect("butane has hydrogens");
        moved.coords[h_index] += Vec3::new(0.0, 0.0, 0.9);
        let reference = Ensemble::from_conformers(
            mol.id.clone(),
            vec![Conformer::new(mol.id.clone(), template.coords.clone(), Provenance::Reference)],
        );
        let generated = Ensemble::from_conformers(
            mol.id.clone(),
            vec![Conformer::new(mol.id.clone(), moved.coords.clone(), Provenance::Uniform)],
        );
        let heavy = MetricsConfig::with_delta(0.5);
        let all = MetricsConfig {
            heavy_only: false,
            ..heavy
        };
        let mat_heavy = matching(&mol, &generated, &reference, &heavy).unwrap();
        let mat_all = matching(&mol, &generated, &reference, &all).unwrap();
        assert!(mat_heavy < 1e-9);
        assert!(mat_all > 0.05);
    }
}

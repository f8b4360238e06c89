//! Representative selection: align an ensemble into a common frame, flatten
//! the coordinates, run seeded k-means, and hand back one member conformer
//! (the medoid) per cluster.

use crate::geom3d::{centroid_center, kabsch_align, GeomError};
use crate::molio::{Conformer, Ensemble, Molecule};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot featurize an empty ensemble")]
    EmptyEnsemble,
    #[error("k = {k} is outside 1..={rows}")]
    BadK { k: usize, rows: usize },
    #[error("model was built from {model} rows but the ensemble has {ensemble}")]
    SizeMismatch { model: usize, ensemble: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Flattened, aligned coordinates: one row per conformer, `3 * n` values
/// for the `n` masked atoms in atom-index order.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    rows: Vec<Vec<f64>>,
    dim: usize,
    /// Row every other conformer was aligned onto.
    pub reference_index: usize,
    all_atoms: bool,
}

impl FeatureMatrix {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each Lloyd update, non-increasing.
    pub inertia_trace: Vec<f64>,
    pub medoid_indices: Vec<usize>,
}

/// Which geometry represents a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// The member conformer nearest the cluster centroid; always a real
    /// geometry from the input ensemble.
    Medoid,
    /// The raw coordinate mean. Averaging distinct torsional states does
    /// not generally give a valid geometry, so this exists for metric
    /// comparisons; unmasked atoms are borrowed from the aligned medoid.
    Centroid,
}

/// Heavy-atom featurization: pick the alignment reference (the
/// lowest-energy conformer when any energies are present, else the first),
/// center it, align every conformer onto it, and flatten the masked
/// coordinates row by row.
pub fn featurize(ensemble: &Ensemble, molecule: &Molecule) -> Result<FeatureMatrix, ClusterError> {
    featurize_with(ensemble, molecule, false)
}

/// `featurize` with the atom mask widened to every atom when `all_atoms`
/// is set.
pub fn featurize_with(
    ensemble: &Ensemble,
    molecule: &Molecule,
    all_atoms: bool,
) -> Result<FeatureMatrix, ClusterError> {
    if ensemble.is_empty() {
        return Err(ClusterError::EmptyEnsemble);
    }
    let mask = feature_mask(molecule, all_atoms);
    let reference_index = alignment_reference(ensemble);
    let reference = centroid_center(&ensemble.conformers[reference_index], &mask)?;

    let mut rows = Vec::with_capacity(ensemble.len());
    for conf in &ensemble.conformers {
        let (_, aligned) = kabsch_align(conf, &reference, &mask)?;
        rows.push(flatten(&aligned, &mask));
    }
    let dim = rows[0].len();
    Ok(FeatureMatrix {
        rows,
        dim,
        reference_index,
        all_atoms,
    })
}

fn feature_mask(molecule: &Molecule, all_atoms: bool) -> Vec<bool> {
    if all_atoms {
        vec![true; molecule.atom_count()]
    } else {
        molecule.heavy_mask()
    }
}

fn alignment_reference(ensemble: &Ensemble) -> usize {
    let mut best: Option<(f64, usize)> = None;
    for (i, conf) in ensemble.conformers.iter().enumerate() {
        if let Some(e) = conf.energy {
            if best.is_none_or(|(be, _)| e < be) {
                best = Some((e, i));
            }
        }
    }
    best.map_or(0, |(_, i)| i)
}

fn flatten(conformer: &Conformer, mask: &[bool]) -> Vec<f64> {
    let mut row = Vec::new();
    for (p, &keep) in conformer.coords.iter().zip(mask) {
        if keep {
            row.extend_from_slice(&[p.x, p.y, p.z]);
        }
    }
    row
}

fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means: k-means++ initialization, then Lloyd iterations until
/// the assignments stop changing or 300 rounds pass. Assignment ties break
/// toward the lower cluster index; clusters emptied by an assignment round
/// are refilled with the point currently farthest from its centroid.
pub fn kmeans(features: &FeatureMatrix, k: usize, seed: u64) -> Result<ClusterModel, ClusterError> {
    let rows = &features.rows;
    let n = rows.len();
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, rows: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeanspp_init(rows, k, &mut rng);
    let mut assignments: Vec<usize> = Vec::new();
    let mut inertia_trace = Vec::new();

    for _ in 0..300 {
        let mut next = assign_all(rows, &centroids);
        if next == assignments {
            break;
        }
        repair_empty_clusters(rows, &centroids, &mut next, k);
        update_centroids(rows, &next, k, features.dim, &mut centroids);
        let inertia = total_inertia(rows, &centroids, &next);
        inertia_trace.push(inertia);
        assignments = next;
    }

    let inertia = *inertia_trace.last().expect("at least one Lloyd round");
    let medoid_indices = medoids(rows, &centroids, &assignments, k);
    Ok(ClusterModel {
        k,
        assignments,
        centroids,
        inertia,
        inertia_trace,
        medoid_indices,
    })
}

fn kmeanspp_init(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = rows.iter().map(|r| sqdist(r, &rows[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = Some(i);
                    break;
                }
                target -= w;
            }
            // Rounding can walk past the last positive weight.
            pick.unwrap_or_else(|| {
                d2.iter().rposition(|&w| w > 0.0).expect("total was positive")
            })
        } else {
            // Every remaining point coincides with a chosen centroid.
            (0..n)
                .find(|i| !chosen.contains(i))
                .expect("k does not exceed the row count")
        };
        chosen.push(next);
        for (i, row) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sqdist(row, &rows[next]));
        }
    }
    chosen.into_iter().map(|i| rows[i].clone()).collect()
}

fn assign_all(rows: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    rows.iter()
        .map(|row| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sqdist(row, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn repair_empty_clusters(
    rows: &[Vec<f64>],
    centroids: &[Vec<f64>],
    assignments: &mut [usize],
    k: usize,
) {
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        // Move the point farthest from its current centroid, taken from a
        // cluster that can spare it; ties go to the lowest row index.
        let mut donor = None;
        let mut donor_d = f64::NEG_INFINITY;
        for (i, &a) in assignments.iter().enumerate() {
            if counts[a] < 2 {
                continue;
            }
            let d = sqdist(&rows[i], &centroids[a]);
            if d > donor_d {
                donor_d = d;
                donor = Some(i);
            }
        }
        let donor = donor.expect("a non-empty cluster with at least two members exists");
        assignments[donor] = empty;
    }
}

fn update_centroids(
    rows: &[Vec<f64>],
    assignments: &[usize],
    k: usize,
    dim: usize,
    centroids: &mut Vec<Vec<f64>>,
) {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (row, &a) in rows.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (c, (sum, &count)) in sums.iter().zip(&counts).enumerate() {
        debug_assert!(count > 0, "cluster {c} left empty after repair");
        centroids[c] = sum.iter().map(|s| s / count as f64).collect();
    }
}

fn total_inertia(rows: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    rows.iter()
        .zip(assignments)
        .map(|(row, &a)| sqdist(row, &centroids[a]))
        .sum()
}

fn medoids(
    rows: &[Vec<f64>],
    centroids: &[Vec<f64>],
    assignments: &[usize],
    k: usize,
) -> Vec<usize> {
    let mut best = vec![(f64::INFINITY, usize::MAX); k];
    for (i, &a) in assignments.iter().enumerate() {
        let d = sqdist(&rows[i], &centroids[a]);
        if d < best[a].0 {
            best[a] = (d, i);
        }
    }
    best.into_iter().map(|(_, i)| i).collect()
}

/// One conformer per cluster, ordered by cluster index: each cluster's
/// medoid, returned exactly as it appears in the input ensemble
/// (pre-alignment coordinates).
pub fn select_representatives(
    ensemble: &Ensemble,
    model: &ClusterModel,
) -> Result<Ensemble, ClusterError> {
    if model.assignments.len() != ensemble.len() {
        return Err(ClusterError::SizeMismatch {
            model: model.assignments.len(),
            ensemble: ensemble.len(),
        });
    }
    let conformers = model
        .medoid_indices
        .iter()
        .map(|&i| ensemble.conformers[i].clone())
        .collect();
    Ok(Ensemble {
        molecule_id: ensemble.molecule_id.clone(),
        conformers,
    })
}

/// `select_representatives` with a mode switch. Centroid mode rebuilds each
/// representative from the cluster's mean row: masked atoms take the
/// centroid coordinates, the rest come from the aligned medoid.
pub fn select_with_mode(
    ensemble: &Ensemble,
    molecule: &Molecule,
    features: &FeatureMatrix,
    model: &ClusterModel,
    mode: SelectionMode,
) -> Result<Ensemble, ClusterError> {
    if mode == SelectionMode::Medoid {
        return select_representatives(ensemble, model);
    }
    if model.assignments.len() != ensemble.len() || features.len() != ensemble.len() {
        return Err(ClusterError::SizeMismatch {
            model: model.assignments.len().min(features.len()),
            ensemble: ensemble.len(),
        });
    }
    let mask = feature_mask(molecule, features.all_atoms);
    let reference = centroid_center(&ensemble.conformers[features.reference_index], &mask)?;
    let mut out = Ensemble::new(ensemble.molecule_id.clone());
    for (cluster, &medoid) in model.medoid_indices.iter().enumerate() {
        let (_, mut conf) = kabsch_align(&ensemble.conformers[medoid], &reference, &mask)?;
        let mut values = model.centroids[cluster].iter();
        for (p, &keep) in conf.coords.iter_mut().zip(&mask) {
            if keep {
                p.x = *values.next().expect("centroid length matches the mask");
                p.y = *values.next().expect("centroid length matches the mask");
                p.z = *values.next().expect("centroid length matches the mask");
            }
        }
        conf.energy = None;
        out.push(conf);
    }
    Ok(out)
}

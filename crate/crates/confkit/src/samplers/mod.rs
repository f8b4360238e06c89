//! Candidate-conformer generators: uniform torsion driving and
//! distance-bound embedding.

mod bounds;
mod embed;

pub use bounds::{build_bounds, BoundsMatrix};
pub use embed::sample_geometric;

use crate::elements;
use crate::geom3d::{set_dihedral, DihedralSpec, GeomError};
use crate::molio::{Conformer, Ensemble, Molecule, Provenance};
use crate::seeding::derive_rng;
use crate::Vec3;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("no tabulated radii for element '{0}'")]
    UntabulatedElement(String),
    #[error("molecule '{0}' is not a single connected fragment")]
    Disconnected(String),
    #[error("template has {found} atoms, molecule has {expected}")]
    TemplateMismatch { expected: usize, found: usize },
    #[error("template contains non-finite coordinates")]
    NonFiniteTemplate,
    #[error("embedding failed for '{molecule}' sample {sample}: no usable eigendecomposition in 10 distance draws")]
    EmbedFailed { molecule: String, sample: usize },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Knobs shared by both samplers. `seed` fully determines the output.
#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Heavy-atom pairs three or more bonds apart closer than this fraction
    /// of their van der Waals sum count as a steric clash. Zero disables the
    /// filter.
    pub clash_factor: f64,
    /// Gradient-descent iterations spent pulling an embedded geometry back
    /// into its distance bounds.
    pub dg_refine_iters: usize,
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        SamplerConfig {
            seed,
            clash_factor: 0.7,
            dg_refine_iters: 200,
        }
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig::with_seed(0)
    }
}

/// A bond is rotatable iff it is single order, not in a ring, and each end
/// has at least one heavy neighbor besides the other end. The flanking
/// reference atoms are the lowest-index heavy neighbors, and the result is
/// ordered by the bond's (low, high) atom indices.
pub fn detect_rotatable_bonds(molecule: &Molecule) -> Vec<DihedralSpec> {
    let mut keys: Vec<(usize, usize)> = Vec::new();
    for bond in molecule.bonds() {
        if bond.order != crate::molio::BondOrder::Single || bond.in_ring {
            continue;
        }
        let flank = |center: usize, exclude: usize| {
            molecule
                .neighbors(center)
                .into_iter()
                .find(|&n| n != exclude && molecule.atoms()[n].is_heavy())
        };
        if flank(bond.i, bond.j).is_some() && flank(bond.j, bond.i).is_some() {
            keys.push((bond.i, bond.j));
        }
    }
    keys.sort_unstable();
    keys.into_iter()
        .map(|(b, c)| {
            let a = molecule
                .neighbors(b)
                .into_iter()
                .find(|&n| n != c && molecule.atoms()[n].is_heavy())
                .expect("checked above");
            let d = molecule
                .neighbors(c)
                .into_iter()
                .find(|&n| n != b && molecule.atoms()[n].is_heavy())
                .expect("checked above");
            DihedralSpec::new(molecule, a, b, c, d)
                .expect("rotatable bond always yields a valid torsion spec")
        })
        .collect()
}

/// Van der Waals radius per atom; errors on the first element missing from
/// the table.
pub(crate) fn vdw_radii(molecule: &Molecule) -> Result<Vec<f64>, SamplerError> {
    molecule
        .atoms()
        .iter()
        .map(|a| {
            elements::vdw_radius(&a.symbol)
                .ok_or_else(|| SamplerError::UntabulatedElement(a.symbol.clone()))
        })
        .collect()
}

/// True when any heavy-atom pair at graph distance >= 3 sits closer than
/// `factor` times its van der Waals sum.
pub(crate) fn has_heavy_clash(
    molecule: &Molecule,
    coords: &[Vec3],
    bond_dist: &[Vec<usize>],
    vdw: &[f64],
    factor: f64,
) -> bool {
    if factor <= 0.0 {
        return false;
    }
    let n = molecule.atom_count();
    for i in 0..n {
        if !molecule.atoms()[i].is_heavy() {
            continue;
        }
        for j in (i + 1)..n {
            if !molecule.atoms()[j].is_heavy() || bond_dist[i][j] < 3 {
                continue;
            }
            if (coords[i] - coords[j]).norm() < factor * (vdw[i] + vdw[j]) {
                return true;
            }
        }
    }
    false
}

/// Draws `count` conformers by assigning every rotatable torsion an
/// independent uniform angle in [-180, 180). Clashing draws are retried up
/// to 50 times, then kept with the clash flag set. A molecule without
/// rotatable bonds yields template copies flagged as such.
pub fn sample_uniform(
    molecule: &Molecule,
    template: &Conformer,
    count: usize,
    config: &SamplerConfig,
) -> Result<Ensemble, SamplerError> {
    if !molecule.is_connected() {
        return Err(SamplerError::Disconnected(molecule.id.clone()));
    }
    if template.atom_count() != molecule.atom_count() {
        return Err(SamplerError::TemplateMismatch {
            expected: molecule.atom_count(),
            found: template.atom_count(),
        });
    }
    if !template.is_finite() {
        return Err(SamplerError::NonFiniteTemplate);
    }

    let mut ensemble = Ensemble::new(molecule.id.clone());
    let specs = detect_rotatable_bonds(molecule);
    if specs.is_empty() {
        for _ in 0..count {
            let mut copy = template.clone();
            copy.molecule_id = molecule.id.clone();
            copy.provenance = Provenance::Uniform;
            copy.energy = None;
            copy.flags = Default::default();
            copy.flags.template_copy = true;
            ensemble.push(copy);
        }
        return Ok(ensemble);
    }

    let vdw = vdw_radii(molecule)?;
    let bond_dist = molecule.bond_distances();
    for index in 0..count {
        let mut rng = derive_rng(config.seed, &molecule.id, "uniform", index as u64);
        let mut accepted = None;
        let mut last = None;
        for _attempt in 0..50 {
            let mut conf = template.clone();
            for spec in &specs {
                let angle = rng.random_range(-180.0..180.0);
                conf = set_dihedral(&conf, spec, angle)?;
            }
            if has_heavy_clash(molecule, &conf.coords, &bond_dist, &vdw, config.clash_factor) {
                last = Some(conf);
            } else {
                accepted = Some(conf);
                break;
            }
        }
        let (mut conf, clash) = match accepted {
            Some(c) => (c, false),
            None => (last.expect("at least one attempt ran"), true),
        };
        conf.molecule_id = molecule.id.clone();
        conf.provenance = Provenance::Uniform;
        conf.energy = None;
        conf.flags = Default::default();
        conf.flags.clash = clash;
        ensemble.push(conf);
    }
    Ok(ensemble)
}

//! A small molecular-mechanics surrogate: harmonic bonds and angles, a
//! threefold cosine torsion on each rotatable bond, and Lennard-Jones
//! repulsion/dispersion between atoms three or more bonds apart. Force
//! constants are global (no per-atom-type parameterization); energies are
//! comparable only within this model. Analytic gradients throughout, plus a
//! backtracking steepest-descent minimizer and the energy-based sampler
//! built on it.

use crate::elements;
use crate::molio::{Conformer, Ensemble, Molecule, Provenance};
use crate::samplers::{detect_rotatable_bonds, sample_geometric, sample_uniform, SamplerConfig, SamplerError};
use crate::seeding::derive_rng;
use crate::Vec3;
use rand::Rng;
use thiserror::Error;

/// Bond stretch stiffness, kcal/mol/A^2.
pub const K_BOND: f64 = 300.0;
/// Angle bend stiffness, kcal/mol/rad^2.
pub const K_ANGLE: f64 = 60.0;
/// Torsion periodicity.
pub const TORSION_PERIODICITY: u32 = 3;
/// Torsion barrier height, kcal/mol.
pub const TORSION_BARRIER: f64 = 1.0;
/// Lennard-Jones well depth, kcal/mol.
pub const LJ_EPSILON: f64 = 0.1;
/// Default minimizer iteration cap.
pub const DEFAULT_MAX_ITERS: usize = 500;
/// Default convergence threshold on the largest per-atom gradient norm.
pub const DEFAULT_TOL: f64 = 1e-3;
/// Iteration budget the energy sampler grants each start. Steepest descent
/// crawls on the softest modes (hydrogen rotors governed only by
/// Lennard-Jones forces), so typical starts need 10k-20k iterations to push
/// the max per-atom gradient under the default tolerance; heavy-atom
/// torsions settle within the first couple thousand.
pub const ENERGY_SAMPLER_MAX_ITERS: usize = 20_000;

#[derive(Debug, Error)]
pub enum FfError {
    #[error("no tabulated radii for element '{0}'")]
    UntabulatedElement(String),
    #[error("molecule '{0}' is not a single connected fragment")]
    Disconnected(String),
    #[error("conformer has {found} atoms, model expects {expected}")]
    AtomCountMismatch { expected: usize, found: usize },
    #[error("conformer contains non-finite coordinates")]
    NonFiniteCoordinates,
    #[error("nonbonded atoms {i} and {j} are coincident")]
    CoincidentAtoms { i: usize, j: usize },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Harmonic stretch `k (r - r0)^2` between bonded atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondTerm {
    pub i: usize,
    pub j: usize,
    pub r0: f64,
    pub k: f64,
}

/// Harmonic bend `k (theta - theta0)^2` over the angle i-j-k (j is the
/// center).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleTerm {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub theta0: f64,
    pub force: f64,
}

/// Cosine torsion `V/2 (1 + cos(m phi))` over the dihedral a-b-c-d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorsionTerm {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
    pub periodicity: u32,
    pub barrier: f64,
}

/// Lennard-Jones pair `4 eps [(sigma/d)^12 - (sigma/d)^6]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonbondedPair {
    pub i: usize,
    pub j: usize,
    pub epsilon: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct EnergyModel {
    pub bonds: Vec<BondTerm>,
    pub angles: Vec<AngleTerm>,
    pub torsions: Vec<TorsionTerm>,
    pub nonbonded: Vec<NonbondedPair>,
    atom_count: usize,
}

impl EnergyModel {
    pub fn atom_count(&self) -> usize {
        self.atom_count
    }
}

/// Result of one local minimization.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub conformer: Conformer,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_gradient_norm: f64,
}

/// Builds the energy model for a connected molecule: one stretch per bond
/// (r0 from the covalent radii), one bend per bonded i-j-k path (theta0 from
/// the center's steric number), one torsion per rotatable bond on its
/// canonical dihedral, and a Lennard-Jones pair for every atom pair three or
/// more bonds apart.
pub fn build_model(molecule: &Molecule) -> Result<EnergyModel, FfError> {
    if !molecule.is_connected() {
        return Err(FfError::Disconnected(molecule.id.clone()));
    }
    let n = molecule.atom_count();
    let mut covalent = Vec::with_capacity(n);
    let mut vdw = Vec::with_capacity(n);
    for atom in molecule.atoms() {
        let c = elements::covalent_radius(&atom.symbol)
            .ok_or_else(|| FfError::UntabulatedElement(atom.symbol.clone()))?;
        let v = elements::vdw_radius(&atom.symbol)
            .ok_or_else(|| FfError::UntabulatedElement(atom.symbol.clone()))?;
        covalent.push(c);
        vdw.push(v);
    }

    let bonds = molecule
        .bonds()
        .iter()
        .map(|b| BondTerm {
            i: b.i,
            j: b.j,
            r0: covalent[b.i] + covalent[b.j],
            k: K_BOND,
        })
        .collect();

    let mut angles = Vec::new();
    for center in 0..n {
        let nbrs = molecule.neighbors(center);
        let theta0 = elements::ideal_angle(molecule.atoms()[center].atomic_number, nbrs.len());
        for (a, &i) in nbrs.iter().enumerate() {
            for &k in &nbrs[a + 1..] {
                angles.push(AngleTerm {
                    i,
                    j: center,
                    k,
                    theta0,
                    force: K_ANGLE,
                });
            }
        }
    }

    let torsions = detect_rotatable_bonds(molecule)
        .iter()
        .map(|spec| TorsionTerm {
            a: spec.a,
            b: spec.b,
            c: spec.c,
            d: spec.d,
            periodicity: TORSION_PERIODICITY,
            barrier: TORSION_BARRIER,
        })
        .collect();

    let dist = molecule.bond_distances();
    let mut nonbonded = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if dist[i][j] >= 3 {
                nonbonded.push(NonbondedPair {
                    i,
                    j,
                    epsilon: LJ_EPSILON,
                    sigma: (vdw[i] + vdw[j]) * 2f64.powf(-1.0 / 6.0),
                });
            }
        }
    }

    Ok(EnergyModel {
        bonds,
        angles,
        torsions,
        nonbonded,
        atom_count: n,
    })
}

/// Energy and its exact analytic gradient at the conformer's geometry.
pub fn evaluate(model: &EnergyModel, conformer: &Conformer) -> Result<(f64, Vec<Vec3>), FfError> {
    if conformer.atom_count() != model.atom_count {
        return Err(FfError::AtomCountMismatch {
            expected: model.atom_count,
            found: conformer.atom_count(),
        });
    }
    if !conformer.is_finite() {
        return Err(FfError::NonFiniteCoordinates);
    }
    evaluate_coords(model, &conformer.coords)
}

fn evaluate_coords(model: &EnergyModel, coords: &[Vec3]) -> Result<(f64, Vec<Vec3>), FfError> {
    let mut energy = 0.0;
    let mut grad = vec![Vec3::zeros(); coords.len()];

    for term in &model.bonds {
        let delta = coords[term.i] - coords[term.j];
        let r = delta.norm();
        let stretch = r - term.r0;
        energy += term.k * stretch * stretch;
        // At r = 0 the direction is undefined and the force is left at zero.
        if r > 1e-12 {
            let g = delta * (2.0 * term.k * stretch / r);
            grad[term.i] += g;
            grad[term.j] -= g;
        }
    }

    for term in &model.angles {
        let u = coords[term.i] - coords[term.j];
        let v = coords[term.k] - coords[term.j];
        let nu = u.norm().max(1e-12);
        let nv = v.norm().max(1e-12);
        let uh = u / nu;
        let vh = v / nv;
        let cos = uh.dot(&vh).clamp(-1.0, 1.0);
        let theta = cos.acos();
        let bend = theta - term.theta0;
        energy += term.force * bend * bend;
        let sin = (1.0 - cos * cos).sqrt().max(1e-8);
        let de = 2.0 * term.force * bend;
        let gi = (vh - uh * cos) * (-de / (nu * sin));
        let gk = (uh - vh * cos) * (-de / (nv * sin));
        grad[term.i] += gi;
        grad[term.k] += gk;
        grad[term.j] -= gi + gk;
    }

    for term in &model.torsions {
        let b1 = coords[term.b] - coords[term.a];
        let b2 = coords[term.c] - coords[term.b];
        let b3 = coords[term.d] - coords[term.c];
        let n1 = b1.cross(&b2);
        let n2 = b2.cross(&b3);
        let n1sq = n1.norm_squared();
        let n2sq = n2.norm_squared();
        // Collinear frames leave the angle undefined; the term is skipped.
        if n1sq < 1e-18 || n2sq < 1e-18 {
            continue;
        }
        let nb2 = b2.norm();
        let phi = (nb2 * b1.dot(&n2)).atan2(n1.dot(&n2));
        let m = f64::from(term.periodicity);
        energy += term.barrier / 2.0 * (1.0 + (m * phi).cos());
        let de = -term.barrier / 2.0 * m * (m * phi).sin();
        let ga = n1 * (-nb2 / n1sq);
        let gd = n2 * (nb2 / n2sq);
        let s1 = b1.dot(&b2) / (nb2 * nb2);
        let s2 = b3.dot(&b2) / (nb2 * nb2);
        let gb = ga * (-1.0 - s1) + gd * s2;
        let gc = ga * s1 - gd * (1.0 + s2);
        grad[term.a] += ga * de;
        grad[term.b] += gb * de;
        grad[term.c] += gc * de;
        grad[term.d] += gd * de;
    }

    for pair in &model.nonbonded {
        let delta = coords[pair.i] - coords[pair.j];
        let d2 = delta.norm_squared();
        if d2 < 1e-24 {
            return Err(FfError::CoincidentAtoms {
                i: pair.i,
                j: pair.j,
            });
        }
        let s2 = pair.sigma * pair.sigma / d2;
        let s6 = s2 * s2 * s2;
        let s12 = s6 * s6;
        energy += 4.0 * pair.epsilon * (s12 - s6);
        // dE/dd * (1/d) = 24 eps (s6 - 2 s12) / d^2
        let g = delta * (24.0 * pair.epsilon * (s6 - 2.0 * s12) / d2);
        grad[pair.i] += g;
        grad[pair.j] -= g;
    }

    Ok((energy, grad))
}

fn max_atom_gradient(grad: &[Vec3]) -> f64 {
    grad.iter().map(|g| g.norm()).fold(0.0, f64::max)
}

fn total_norm(grad: &[Vec3]) -> f64 {
    grad.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt()
}

/// Steepest descent with a backtracking (Armijo) line search. Each
/// iteration restarts from a 0.1 A step along the normalized negative
/// gradient and halves until the trial satisfies
/// `E_new <= E - 1e-4 * step * |g|`; thirty failed halvings abort with the
/// best geometry so far and `converged = false`. Convergence is the largest
/// per-atom gradient norm dropping below `tol`, checked before any step is
/// taken.
pub fn minimize(
    model: &EnergyModel,
    start: &Conformer,
    max_iters: usize,
    tol: f64,
) -> Result<MinimizeResult, FfError> {
    let (mut energy, mut grad) = evaluate(model, start)?;
    let mut coords = start.coords.clone();
    let mut iterations = 0;
    let mut converged = false;
    let mut line_search_failed = false;

    loop {
        if max_atom_gradient(&grad) < tol {
            converged = true;
            break;
        }
        if iterations >= max_iters {
            break;
        }
        let gnorm = total_norm(&grad);
        let mut step = 0.1;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<Vec3> = coords
                .iter()
                .zip(&grad)
                .map(|(x, g)| x - g * (step / gnorm))
                .collect();
            match evaluate_coords(model, &trial) {
                Ok((e_new, g_new)) if e_new <= energy - 1e-4 * step * gnorm => {
                    accepted = Some((trial, e_new, g_new));
                    break;
                }
                // Uphill, overflowed, or coincident trials just shrink the step.
                Ok(_) | Err(FfError::CoincidentAtoms { .. }) => step *= 0.5,
                Err(other) => return Err(other),
            }
        }
        match accepted {
            Some((trial, e_new, g_new)) => {
                coords = trial;
                energy = e_new;
                grad = g_new;
                iterations += 1;
            }
            None => {
                line_search_failed = true;
                break;
            }
        }
    }

    let max_gradient_norm = max_atom_gradient(&grad);
    if !line_search_failed && max_gradient_norm < tol {
        converged = true;
    }
    let mut conformer = Conformer::new(start.molecule_id.clone(), coords, start.provenance);
    conformer.energy = Some(energy);
    conformer.flags = start.flags;
    conformer.flags.unconverged = !converged;
    Ok(MinimizeResult {
        conformer,
        energy,
        iterations,
        converged,
        max_gradient_norm,
    })
}

/// Generates `count` minimized conformers. Starting geometries alternate
/// between torsion-randomized copies of an embedded template (even indices)
/// and fresh distance-geometry embeddings (odd indices), each under its own
/// derived seed, so the minima found inherit both samplers' diversity. Every
/// output carries its final model energy; failed minimizations stay in the
/// ensemble with the unconverged flag set.
pub fn sample_energy(
    molecule: &Molecule,
    model: &EnergyModel,
    count: usize,
    config: &SamplerConfig,
) -> Result<Ensemble, FfError> {
    if !molecule.is_connected() {
        return Err(FfError::Disconnected(molecule.id.clone()));
    }
    let mut ensemble = Ensemble::new(molecule.id.clone());
    if count == 0 {
        return Ok(ensemble);
    }

    let sub_config = |role: &str, index: usize| SamplerConfig {
        seed: derive_rng(config.seed, &molecule.id, role, index as u64).random(),
        ..*config
    };
    let template = sample_geometric(molecule, 1, &sub_config("energy-template", 0))?
        .conformers
        .remove(0);

    let bond_dist = molecule.bond_distances();
    let vdw = crate::samplers::vdw_radii(molecule)?;
    for index in 0..count {
        let start = if index % 2 == 0 {
            sample_uniform(molecule, &template, 1, &sub_config("energy-uniform", index))?
                .conformers
                .remove(0)
        } else {
            sample_geometric(molecule, 1, &sub_config("energy-geometric", index))?
                .conformers
                .remove(0)
        };
        let result = minimize(model, &start, ENERGY_SAMPLER_MAX_ITERS, DEFAULT_TOL)?;
        let mut conf = result.conformer;
        conf.provenance = Provenance::Energy;
        conf.flags = Default::default();
        conf.flags.unconverged = !result.converged;
        conf.flags.clash = crate::samplers::has_heavy_clash(
            molecule,
            &conf.coords,
            &bond_dist,
            &vdw,
            config.clash_factor,
        );
        ensemble.push(conf);
    }
    Ok(ensemble)
}

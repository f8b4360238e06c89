//! Interatomic distance bounds for the embedding sampler.

use super::SamplerError;
use crate::elements;
use crate::molio::Molecule;

/// Tolerance around tabulated bonded distances.
const BOND_SLACK: f64 = 0.01;
/// Relative tolerance around ideal-angle 1-3 distances.
const ANGLE_SLACK: f64 = 0.05;
/// Fraction of the van der Waals sum used as the hard floor for pairs three
/// or more bonds apart.
const CLASH_FACTOR: f64 = 0.7;

/// Symmetric lower/upper distance bounds with zero diagonal, smoothed so the
/// uppers satisfy the triangle inequality and the lowers are consistent with
/// them.
#[derive(Debug, Clone)]
pub struct BoundsMatrix {
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoundsMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.n + j]
    }

    pub fn upper(&self, i: usize, j: usize) -> f64 {
        self.upper[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, lower: f64, upper: f64) {
        self.lower[i * self.n + j] = lower;
        self.lower[j * self.n + i] = lower;
        self.upper[i * self.n + j] = upper;
        self.upper[j * self.n + i] = upper;
    }
}

fn covalent(symbol: &str) -> Result<f64, SamplerError> {
    elements::covalent_radius(symbol)
        .ok_or_else(|| SamplerError::UntabulatedElement(symbol.to_string()))
}

/// Builds bonded, geminal, and long-range bounds, then smooths them:
/// 1-2 pairs get the covalent sum +/- 0.01 A; 1-3 pairs the law-of-cosines
/// distance at the center atom's ideal angle +/- 5%; everything else gets
/// the clash floor below and the bonded path sum above. A Floyd-Warshall
/// pass enforces the triangle inequality on uppers, and lowers are lifted
/// to stay reachable given those uppers.
pub fn build_bounds(molecule: &Molecule) -> Result<BoundsMatrix, SamplerError> {
    if !molecule.is_connected() {
        return Err(SamplerError::Disconnected(molecule.id.clone()));
    }
    let n = molecule.atom_count();
    let mut bounds = BoundsMatrix {
        n,
        lower: vec![0.0; n * n],
        upper: vec![0.0; n * n],
    };
    let radii: Vec<f64> = molecule
        .atoms()
        .iter()
        .map(|a| covalent(&a.symbol))
        .collect::<Result<_, _>>()?;
    let vdw = super::vdw_radii(molecule)?;
    let graph_dist = molecule.bond_distances();

    // Bonded path sums: shortest paths where each bond weighs its own upper
    // bound. Seeds the long-range uppers before smoothing.
    let mut path = vec![f64::INFINITY; n * n];
    for i in 0..n {
        path[i * n + i] = 0.0;
    }
    for bond in molecule.bonds() {
        let w = radii[bond.i] + radii[bond.j] + BOND_SLACK;
        path[bond.i * n + bond.j] = w;
        path[bond.j * n + bond.i] = w;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = path[i * n + k] + path[k * n + j];
                if via < path[i * n + j] {
                    path[i * n + j] = via;
                }
            }
        }
    }

    for i in 0..n {
        for j in (i + 1)..n {
            match graph_dist[i][j] {
                1 => {
                    let r0 = radii[i] + radii[j];
                    bounds.set(i, j, r0 - BOND_SLACK, r0 + BOND_SLACK);
                }
                2 => {
                    // widest window over every two-bond path i-k-j
                    let mut lo = f64::INFINITY;
                    let mut hi = 0.0f64;
                    for k in molecule.neighbors(i) {
                        if molecule.bond_between(k, j).is_none() {
                            continue;
                        }
                        let a = radii[i] + radii[k];
                        let b = radii[k] + radii[j];
                        let theta = elements::ideal_angle(
                            molecule.atoms()[k].atomic_number,
                            molecule.neighbors(k).len(),
                        );
                        let v = (a * a + b * b - 2.0 * a * b * theta.cos()).sqrt();
                        lo = lo.min(v * (1.0 - ANGLE_SLACK));
                        hi = hi.max(v * (1.0 + ANGLE_SLACK));
                    }
                    bounds.set(i, j, lo, hi);
                }
                _ => {
                    bounds.set(i, j, CLASH_FACTOR * (vdw[i] + vdw[j]), path[i * n + j]);
                }
            }
        }
    }

    // Triangle smoothing on uppers.
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let via = bounds.upper(i, k) + bounds.upper(k, j);
                if via < bounds.upper(i, j) {
                    let lo = bounds.lower(i, j);
                    bounds.set(i, j, lo, via);
                }
            }
        }
    }
    // Lower tightening: i and j cannot be closer than any detour allows.
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if i == j || k == i || k == j {
                    continue;
                }
                let floor = bounds.lower(i, k) - bounds.upper(k, j);
                if floor > bounds.lower(i, j) {
                    let hi = bounds.upper(i, j);
                    bounds.set(i, j, floor.min(hi), hi);
                }
            }
        }
    }

    Ok(bounds)
}

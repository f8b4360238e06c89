//! Bundled molecules with idealized template geometries.
//!
//! Heavy atoms come first, hydrogens after, grouped by the heavy atom they
//! saturate. Bond lengths are covalent-radius sums and angles are ideal for
//! the steric class, so every template is a valid low-strain starting point
//! for the samplers and a fixed reference for geometry tests.

use crate::molio::{Atom, BondOrder, Conformer, Molecule, Provenance};
use crate::Vec3;

const BOND_CC: f64 = 1.53;
const BOND_CO: f64 = 1.415;
const BOND_OH: f64 = 0.96;

/// The four vertex directions of a regular tetrahedron.
fn tetra_dirs() -> [Vec3; 4] {
    let s = 1.0 / 3f64.sqrt();
    [
        Vec3::new(s, s, s),
        Vec3::new(s, -s, -s),
        Vec3::new(-s, s, -s),
        Vec3::new(-s, -s, s),
    ]
}

/// Directions completing a tetrahedral center that has one bond along `n`.
/// `phase_deg` rotates the triple about `n`.
fn complete_one(n: Vec3, phase_deg: f64) -> [Vec3; 3] {
    let r = if n.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let e1 = (r - n * r.dot(&n)).normalize();
    let e2 = n.cross(&e1);
    let radial = 2.0 * 2f64.sqrt() / 3.0;
    std::array::from_fn(|k| {
        let phi = (phase_deg + 120.0 * k as f64).to_radians();
        -n / 3.0 + radial * (phi.cos() * e1 + phi.sin() * e2)
    })
}

/// Directions completing a center with bonds along `n1` and `n2`, placed so
/// each new bond makes the ideal tetrahedral angle with both existing ones.
/// Exact when the n1-n2 angle is itself tetrahedral; for strained centers
/// (planar rings) the pair stays symmetric about the n1-n2 plane.
fn complete_two(n1: Vec3, n2: Vec3) -> [Vec3; 2] {
    let e1 = -(n1 + n2).normalize();
    let e2 = n1.cross(&n2).normalize();
    let cos_half = -e1.dot(&n1);
    let a = 1.0 / (3.0 * cos_half);
    let b = (1.0 - a * a).sqrt();
    [a * e1 + b * e2, a * e1 - b * e2]
}

fn complete_three(n1: Vec3, n2: Vec3, n3: Vec3) -> Vec3 {
    -(n1 + n2 + n3).normalize()
}

fn valence(symbol: &str) -> usize {
    match symbol {
        "H" => 1,
        "O" => 2,
        "N" => 3,
        _ => 4,
    }
}

/// Appends hydrogens to a heavy-atom skeleton until every atom reaches its
/// valence. `phases` gives the azimuthal phase (degrees) used when a heavy
/// atom has exactly one neighbor; missing entries default to 0.
fn saturate(
    id: &str,
    symbols: &[&str],
    heavy_pos: &[Vec3],
    heavy_bonds: &[(usize, usize)],
    phases: &[(usize, f64)],
) -> (Molecule, Conformer) {
    let nheavy = symbols.len();
    let mut atoms: Vec<Atom> = symbols
        .iter()
        .map(|s| Atom::from_symbol(s).expect("toy set uses known elements"))
        .collect();
    let mut coords = heavy_pos.to_vec();
    let mut bonds: Vec<(usize, usize, BondOrder)> = heavy_bonds
        .iter()
        .map(|&(i, j)| (i, j, BondOrder::Single))
        .collect();

    for center in 0..nheavy {
        let neighbor_dirs: Vec<Vec3> = heavy_bonds
            .iter()
            .filter_map(|&(i, j)| match (i == center, j == center) {
                (true, _) => Some(j),
                (_, true) => Some(i),
                _ => None,
            })
            .map(|other| (heavy_pos[other] - heavy_pos[center]).normalize())
            .collect();
        let missing = valence(symbols[center]).saturating_sub(neighbor_dirs.len());
        if missing == 0 {
            continue;
        }
        let phase = phases
            .iter()
            .find(|&&(idx, _)| idx == center)
            .map_or(0.0, |&(_, p)| p);
        let dirs: Vec<Vec3> = match neighbor_dirs.len() {
            0 => tetra_dirs().to_vec(),
            1 => complete_one(neighbor_dirs[0], phase).to_vec(),
            2 => complete_two(neighbor_dirs[0], neighbor_dirs[1]).to_vec(),
            _ => vec![complete_three(neighbor_dirs[0], neighbor_dirs[1], neighbor_dirs[2])],
        };
        let h_len = crate::elements::covalent_radius(symbols[center]).unwrap()
            + crate::elements::covalent_radius("H").unwrap();
        for dir in dirs.into_iter().take(missing) {
            let h_index = atoms.len();
            atoms.push(Atom::from_symbol("H").unwrap());
            coords.push(heavy_pos[center] + h_len * dir);
            bonds.push((center, h_index, BondOrder::Single));
        }
    }

    let molecule = Molecule::new(id, atoms, bonds).expect("toy set graphs are valid");
    let mut conformer = Conformer::new(id, coords, Provenance::Reference);
    conformer.energy = None;
    (molecule, conformer)
}

/// Zig-zag heavy-atom chain in the xz-plane with ideal tetrahedral angles.
fn zigzag(lengths: &[f64]) -> Vec<Vec3> {
    let s = (2.0f64 / 3.0).sqrt();
    let c = (1.0f64 / 3.0).sqrt();
    let mut pos = vec![Vec3::zeros()];
    for (k, &len) in lengths.iter().enumerate() {
        let dir = Vec3::new(s, 0.0, if k % 2 == 0 { c } else { -c });
        pos.push(pos[k] + len * dir);
    }
    pos
}

fn chain_bonds(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (i - 1, i)).collect()
}

pub fn water() -> (Molecule, Conformer) {
    let o = [Vec3::zeros()];
    let (mol, mut conf) = saturate("water", &["O"], &o, &[], &[]);
    // saturate uses covalent sums; O-H is exactly 0.96 by the radius table
    debug_assert!((conf.coords[1].norm() - BOND_OH).abs() < 1e-12);
    conf.molecule_id = mol.id.clone();
    (mol, conf)
}

pub fn methane() -> (Molecule, Conformer) {
    saturate("methane", &["C"], &[Vec3::zeros()], &[], &[])
}

pub fn ethane() -> (Molecule, Conformer) {
    let pos = zigzag(&[BOND_CC]);
    // the 60 degree phase staggers the second methyl against the first
    saturate("ethane", &["C", "C"], &pos, &chain_bonds(2), &[(1, 60.0)])
}

pub fn butane() -> (Molecule, Conformer) {
    let pos = zigzag(&[BOND_CC; 3]);
    saturate("butane", &["C", "C", "C", "C"], &pos, &chain_bonds(4), &[])
}

pub fn pentane() -> (Molecule, Conformer) {
    let pos = zigzag(&[BOND_CC; 4]);
    saturate("pentane", &["C"; 5], &pos, &chain_bonds(5), &[])
}

/// Ideal chair: every ring angle is tetrahedral and every bond is BOND_CC.
pub fn cyclohexane() -> (Molecule, Conformer) {
    let h = BOND_CC / 6.0;
    let r = 2.0 * 2f64.sqrt() * BOND_CC / 3.0;
    let pos: Vec<Vec3> = (0..6)
        .map(|k| {
            let phi = (60.0 * k as f64).to_radians();
            let z = if k % 2 == 0 { h } else { -h };
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect();
    let mut bonds = chain_bonds(6);
    bonds.push((5, 0));
    saturate("cyclohexane", &["C"; 6], &pos, &bonds, &[])
}

/// Planar five-ring plus an out-of-plane methyl; the ring is mildly strained
/// by design.
pub fn methylcyclopentane() -> (Molecule, Conformer) {
    let rho = BOND_CC / (2.0 * (std::f64::consts::PI / 5.0).sin());
    let mut pos: Vec<Vec3> = (0..5)
        .map(|k| {
            let phi = (72.0 * k as f64).to_radians();
            Vec3::new(rho * phi.cos(), rho * phi.sin(), 0.0)
        })
        .collect();
    let n1 = (pos[1] - pos[0]).normalize();
    let n2 = (pos[4] - pos[0]).normalize();
    pos.push(pos[0] + BOND_CC * complete_two(n1, n2)[0]);
    let mut bonds = chain_bonds(5);
    bonds.push((4, 0));
    bonds.push((0, 5));
    saturate("methylcyclopentane", &["C"; 6], &pos, &bonds, &[])
}

pub fn propanol() -> (Molecule, Conformer) {
    let pos = zigzag(&[BOND_CC, BOND_CC, BOND_CO]);
    saturate(
        "propan-1-ol",
        &["C", "C", "C", "O"],
        &pos,
        &chain_bonds(4),
        &[],
    )
}

pub fn diethyl_ether() -> (Molecule, Conformer) {
    let pos = zigzag(&[BOND_CC, BOND_CO, BOND_CO, BOND_CC]);
    saturate(
        "diethyl-ether",
        &["C", "C", "O", "C", "C"],
        &pos,
        &chain_bonds(5),
        &[],
    )
}

/// Every bundled molecule, in a fixed order.
pub fn all() -> Vec<(Molecule, Conformer)> {
    vec![
        water(),
        methane(),
        ethane(),
        butane(),
        pentane(),
        cyclohexane(),
        methylcyclopentane(),
        propanol(),
        diethyl_ether(),
    ]
}

pub fn by_id(id: &str) -> Option<(Molecule, Conformer)> {
    all().into_iter().find(|(m, _)| m.id == id)
}

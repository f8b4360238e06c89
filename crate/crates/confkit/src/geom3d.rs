//! Rigid-body geometry kernel: centering, optimal superposition, heavy-atom
//! RMSD, and torsion measurement/assignment.

use crate::molio::{Conformer, Molecule};
use crate::{Mat3, Vec3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("mask has {mask} entries for {atoms} atoms")]
    MaskLength { mask: usize, atoms: usize },
    #[error("mask selects no atoms")]
    EmptyMask,
    #[error("conformers have {left} and {right} atoms")]
    AtomCountMismatch { left: usize, right: usize },
    #[error("torsion is undefined: three consecutive atoms are collinear")]
    CollinearTorsion,
    #[error("invalid torsion spec: {0}")]
    InvalidTorsion(String),
}

/// Proper rigid motion `p -> rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl AlignmentTransform {
    pub fn identity() -> Self {
        AlignmentTransform {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Max-norm departure from orthonormality, for invariant checks.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Mat3::identity())
            .iter()
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn determinant(&self) -> f64 {
        self.rotation.determinant()
    }
}

fn check_mask(coords: &[Vec3], mask: &[bool]) -> Result<usize, GeomError> {
    if mask.len() != coords.len() {
        return Err(GeomError::MaskLength {
            mask: mask.len(),
            atoms: coords.len(),
        });
    }
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return Err(GeomError::EmptyMask);
    }
    Ok(n)
}

fn masked_centroid(coords: &[Vec3], mask: &[bool]) -> Vec3 {
    let mut sum = Vec3::zeros();
    let mut n = 0usize;
    for (p, &m) in coords.iter().zip(mask) {
        if m {
            sum += p;
            n += 1;
        }
    }
    sum / n as f64
}

/// Translates the conformer so the masked centroid sits at the origin.
pub fn centroid_center(conformer: &Conformer, mask: &[bool]) -> Result<Conformer, GeomError> {
    check_mask(&conformer.coords, mask)?;
    let c = masked_centroid(&conformer.coords, mask);
    let mut out = conformer.clone();
    for p in &mut out.coords {
        *p -= c;
    }
    Ok(out)
}

/// True when the centered point set spans less than two dimensions.
fn is_collinear(centered: &[Vec3]) -> bool {
    let scale = centered.iter().fold(0.0f64, |a, p| a.max(p.norm()));
    if scale < 1e-12 {
        return true;
    }
    let principal = centered
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap()
        .normalize();
    centered
        .iter()
        .all(|p| principal.cross(p).norm() <= 1e-9 * scale)
}

/// Optimal proper rotation (as the full transform mobile -> reference) for
/// two centered point lists of equal length.
fn kabsch_rotation(mobile: &[Vec3], reference: &[Vec3]) -> Mat3 {
    let mut h = Mat3::zeros();
    for (m, r) in mobile.iter().zip(reference) {
        h += m * r.transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("3x3 SVD always produces U");
    let v = svd.v_t.expect("3x3 SVD always produces V^T").transpose();
    // Proper rotation: flip the sign of the smallest singular direction when
    // the unconstrained optimum is a reflection. nalgebra sorts singular
    // values descending, so that direction is the last column.
    let mut d = Mat3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    v * d * u.transpose()
}

/// Least-squares rigid superposition of `mobile` onto `reference` over the
/// masked atoms. Every atom of the returned conformer is transformed.
///
/// Degenerate masked sets (fewer than 3 points, or collinear points on
/// either side) get a translation-only alignment with rotation = I; the
/// rotational freedom they leave is deliberately not exploited.
pub fn kabsch_align(
    mobile: &Conformer,
    reference: &Conformer,
    mask: &[bool],
) -> Result<(AlignmentTransform, Conformer), GeomError> {
    if mobile.coords.len() != reference.coords.len() {
        return Err(GeomError::AtomCountMismatch {
            left: mobile.coords.len(),
            right: reference.coords.len(),
        });
    }
    check_mask(&mobile.coords, mask)?;
    let transform = align_masked_points(&mobile.coords, &reference.coords, mask);
    let mut aligned = mobile.clone();
    for p in &mut aligned.coords {
        *p = transform.apply(p);
    }
    Ok((transform, aligned))
}

fn align_masked_points(mobile: &[Vec3], reference: &[Vec3], mask: &[bool]) -> AlignmentTransform {
    let cm = masked_centroid(mobile, mask);
    let cr = masked_centroid(reference, mask);
    let m_centered: Vec<Vec3> = mobile
        .iter()
        .zip(mask)
        .filter(|&(_, &keep)| keep)
        .map(|(p, _)| p - cm)
        .collect();
    let r_centered: Vec<Vec3> = reference
        .iter()
        .zip(mask)
        .filter(|&(_, &keep)| keep)
        .map(|(p, _)| p - cr)
        .collect();

    let rotation = if m_centered.len() < 3 || is_collinear(&m_centered) || is_collinear(&r_centered)
    {
        Mat3::identity()
    } else {
        kabsch_rotation(&m_centered, &r_centered)
    };
    AlignmentTransform {
        rotation,
        translation: cr - rotation * cm,
    }
}

/// Superposition of two bare point lists (full mask).
pub fn align_points(
    mobile: &[Vec3],
    reference: &[Vec3],
) -> Result<AlignmentTransform, GeomError> {
    if mobile.len() != reference.len() {
        return Err(GeomError::AtomCountMismatch {
            left: mobile.len(),
            right: reference.len(),
        });
    }
    if mobile.is_empty() {
        return Err(GeomError::EmptyMask);
    }
    Ok(align_masked_points(mobile, reference, &vec![true; mobile.len()]))
}

/// Minimum root-mean-square deviation over the masked atoms after optimal
/// rigid superposition.
pub fn rmsd(a: &Conformer, b: &Conformer, mask: &[bool]) -> Result<f64, GeomError> {
    let (_, aligned) = kabsch_align(a, b, mask)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((p, q), &keep) in aligned.coords.iter().zip(&b.coords).zip(mask) {
        if keep {
            sum += (p - q).norm_squared();
            n += 1;
        }
    }
    Ok((sum / n as f64).sqrt())
}

/// RMSD of two bare point lists (full mask).
pub fn rmsd_points(a: &[Vec3], b: &[Vec3]) -> Result<f64, GeomError> {
    if a.len() != b.len() {
        return Err(GeomError::AtomCountMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(GeomError::EmptyMask);
    }
    let t = align_masked_points(a, b, &vec![true; a.len()]);
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (t.apply(p) - q).norm_squared())
        .sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// A torsion b-c with flanking atoms a and d, plus the set of atoms that move
/// when the torsion is driven.
#[derive(Debug, Clone)]
pub struct DihedralSpec {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
    rotating: Vec<bool>,
}

impl DihedralSpec {
    /// Validates bonding (a-b, b-c, c-d must all be bonds, atoms distinct,
    /// b-c not in a ring) and derives the rotating side: the connected
    /// component containing d once b-c is deleted. Atoms on the axis do not
    /// move even though c belongs to that component.
    pub fn new(
        molecule: &Molecule,
        a: usize,
        b: usize,
        c: usize,
        d: usize,
    ) -> Result<Self, GeomError> {
        let ids = [a, b, c, d];
        if ids.iter().any(|&i| i >= molecule.atom_count()) {
            return Err(GeomError::InvalidTorsion(format!(
                "atom index out of range in ({a},{b},{c},{d})"
            )));
        }
        for (i, j) in [(a, b), (b, c), (c, d)] {
            if molecule.bond_between(i, j).is_none() {
                return Err(GeomError::InvalidTorsion(format!("{i}-{j} is not a bond")));
            }
        }
        for x in 0..4 {
            for y in (x + 1)..4 {
                if ids[x] == ids[y] {
                    return Err(GeomError::InvalidTorsion(format!(
                        "atoms ({a},{b},{c},{d}) are not distinct"
                    )));
                }
            }
        }
        let key = (b.min(c), b.max(c));
        let rotating = molecule.component_without_bond(c, key);
        if rotating[b] {
            return Err(GeomError::InvalidTorsion(format!(
                "{b}-{c} lies on a ring; its torsion cannot be driven"
            )));
        }
        Ok(DihedralSpec { a, b, c, d, rotating })
    }

    /// Per-atom flag: true for atoms on d's side of the cut bond.
    pub fn rotating_side(&self) -> &[bool] {
        &self.rotating
    }
}

/// Signed torsion of the four points in degrees, in [-180, 180).
pub fn dihedral_angle(pa: Vec3, pb: Vec3, pc: Vec3, pd: Vec3) -> Result<f64, GeomError> {
    let b0 = pa - pb;
    let axis = pc - pb;
    let b2 = pd - pc;
    let axis_norm = axis.norm();
    if axis_norm < 1e-12 {
        return Err(GeomError::CollinearTorsion);
    }
    let b1 = axis / axis_norm;
    let v = b0 - b1 * b0.dot(&b1);
    let w = b2 - b1 * b2.dot(&b1);
    let scale = b0.norm().max(b2.norm()).max(1e-12);
    if v.norm() <= 1e-10 * scale || w.norm() <= 1e-10 * scale {
        return Err(GeomError::CollinearTorsion);
    }
    let x = v.dot(&w);
    let y = b1.cross(&v).dot(&w);
    let mut deg = y.atan2(x).to_degrees();
    if deg >= 180.0 {
        deg -= 360.0;
    }
    Ok(deg)
}

pub fn measure_dihedral(conformer: &Conformer, spec: &DihedralSpec) -> Result<f64, GeomError> {
    dihedral_angle(
        conformer.coords[spec.a],
        conformer.coords[spec.b],
        conformer.coords[spec.c],
        conformer.coords[spec.d],
    )
}

/// Rotates the d-side about the b-c axis so the torsion becomes
/// `angle_deg`. Everything on the fixed side, including a and b, keeps its
/// exact coordinates.
pub fn set_dihedral(
    conformer: &Conformer,
    spec: &DihedralSpec,
    angle_deg: f64,
) -> Result<Conformer, GeomError> {
    let current = measure_dihedral(conformer, spec)?;
    let delta = (angle_deg - current).to_radians();
    let pivot = conformer.coords[spec.b];
    let axis = (conformer.coords[spec.c] - pivot).normalize();
    let (sin, cos) = delta.sin_cos();

    let mut out = conformer.clone();
    for (p, &rotates) in out.coords.iter_mut().zip(&spec.rotating) {
        if !rotates {
            continue;
        }
        let v = *p - pivot;
        // Rodrigues rotation about the unit axis, right-handed.
        let rotated = v * cos + axis.cross(&v) * sin + axis * (axis.dot(&v) * (1.0 - cos));
        *p = pivot + rotated;
    }
    Ok(out)
}

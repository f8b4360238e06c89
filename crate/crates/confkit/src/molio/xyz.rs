//! Multi-frame XYZ reader and writer.
//!
//! XYZ carries no bonds, so the returned molecule has an empty bond list;
//! it exists to preserve the element sequence (and with it the heavy-atom
//! mask) for metrics-only ingestion.

use super::{Atom, Conformer, Ensemble, MolError, Molecule, Provenance};
use crate::Vec3;

/// Parses every frame. All frames must agree on atom count and element
/// sequence. The molecule id is the first frame's comment line, or "xyz"
/// when that is blank.
pub fn parse_xyz(bytes: &[u8]) -> Result<(Molecule, Ensemble), MolError> {
    let text = String::from_utf8_lossy(bytes);
    let mut lines = text.lines().peekable();
    let mut molecule: Option<Molecule> = None;
    let mut ensemble = Ensemble::default();
    let mut frame = 0usize;

    loop {
        while matches!(lines.peek(), Some(l) if l.trim().is_empty()) {
            lines.next();
        }
        let Some(count_line) = lines.next() else { break };
        frame += 1;
        let natoms: usize = count_line.trim().parse().map_err(|_| {
            MolError::MalformedCounts(format!("xyz frame {frame} count line '{}'", count_line.trim()))
        })?;
        let comment = lines.next().ok_or(MolError::Truncated("xyz comment line"))?;

        let mut symbols = Vec::with_capacity(natoms);
        let mut coords = Vec::with_capacity(natoms);
        for k in 0..natoms {
            let Some(line) = lines.next() else {
                return Err(MolError::FrameAtomMismatch {
                    frame,
                    expected: natoms,
                    found: k,
                });
            };
            let mut tok = line.split_whitespace();
            let symbol = tok.next().ok_or(MolError::FrameAtomMismatch {
                frame,
                expected: natoms,
                found: k,
            })?;
            let mut axis = |_: char| -> Result<f64, MolError> {
                let t = tok.next().ok_or_else(|| MolError::NonNumericCoordinate {
                    frame,
                    token: String::new(),
                })?;
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| MolError::NonNumericCoordinate {
                        frame,
                        token: t.to_string(),
                    })
            };
            let x = axis('x')?;
            let y = axis('y')?;
            let z = axis('z')?;
            symbols.push(symbol.to_string());
            coords.push(Vec3::new(x, y, z));
        }

        match &molecule {
            None => {
                let atoms = symbols
                    .iter()
                    .map(|s| Atom::from_symbol(s))
                    .collect::<Result<Vec<_>, _>>()?;
                let id = if comment.trim().is_empty() {
                    "xyz".to_string()
                } else {
                    comment.trim().to_string()
                };
                let mol = Molecule::without_bonds(id, atoms);
                ensemble.molecule_id = mol.id.clone();
                molecule = Some(mol);
            }
            Some(first) => {
                if first.atom_count() != natoms {
                    return Err(MolError::FrameAtomMismatch {
                        frame,
                        expected: first.atom_count(),
                        found: natoms,
                    });
                }
                if first.atoms().iter().zip(&symbols).any(|(a, s)| &a.symbol != s) {
                    return Err(MolError::FrameElementMismatch { frame });
                }
            }
        }
        let id = molecule.as_ref().unwrap().id.clone();
        ensemble.push(Conformer::new(id, coords, Provenance::External));
    }

    let molecule = molecule.ok_or(MolError::EmptyEnsemble)?;
    Ok((molecule, ensemble))
}

/// Serializes one frame per conformer, comment line = molecule id.
pub fn write_xyz(molecule: &Molecule, ensemble: &Ensemble) -> Result<Vec<u8>, MolError> {
    if ensemble.is_empty() {
        return Err(MolError::EmptyEnsemble);
    }
    ensemble.validate_against(molecule)?;

    let mut out = String::new();
    for conformer in &ensemble.conformers {
        out.push_str(&format!("{}\n{}\n", molecule.atom_count(), molecule.id));
        for (atom, p) in molecule.atoms().iter().zip(&conformer.coords) {
            out.push_str(&format!(
                "{:<3} {:>16.8} {:>16.8} {:>16.8}\n",
                atom.symbol, p.x, p.y, p.z
            ));
        }
    }
    Ok(out.into_bytes())
}

//! SDF V2000 connection-table reader and writer.
//!
//! A multi-record file is treated as one molecule with one conformer per
//! record; every record must repeat the connectivity of the first.

use super::{Atom, BondOrder, Conformer, Ensemble, MolError, Molecule, Provenance};
use crate::Vec3;

/// Parses one or more V2000 records into a molecule plus one conformer per
/// record (provenance `external`).
pub fn parse_sdf(bytes: &[u8]) -> Result<(Molecule, Ensemble), MolError> {
    let text = String::from_utf8_lossy(bytes);
    let mut lines = text.lines().peekable();
    let mut molecule: Option<Molecule> = None;
    let mut ensemble = Ensemble::default();
    let mut record = 0usize;

    while lines.peek().is_some() {
        // Tolerate blank padding between records and at EOF.
        while matches!(lines.peek(), Some(l) if l.trim().is_empty()) {
            lines.next();
        }
        if lines.peek().is_none() {
            break;
        }
        record += 1;
        let (rec_mol, coords, energy) = parse_record(&mut lines, record)?;
        match &molecule {
            None => {
                ensemble.molecule_id = rec_mol.id.clone();
                molecule = Some(rec_mol);
            }
            Some(first) => {
                if !same_connectivity(first, &rec_mol) {
                    return Err(MolError::InconsistentConnectivity { record });
                }
            }
        }
        let id = molecule.as_ref().unwrap().id.clone();
        let mut conformer = Conformer::new(id, coords, Provenance::External);
        conformer.energy = energy;
        ensemble.push(conformer);
    }

    let molecule = molecule.ok_or(MolError::EmptyEnsemble)?;
    Ok((molecule, ensemble))
}

fn same_connectivity(a: &Molecule, b: &Molecule) -> bool {
    a.atoms().len() == b.atoms().len()
        && a.atoms()
            .iter()
            .zip(b.atoms())
            .all(|(x, y)| x.symbol == y.symbol)
        && a.bonds().len() == b.bonds().len()
        && a.bonds()
            .iter()
            .zip(b.bonds())
            .all(|(x, y)| x.i == y.i && x.j == y.j && x.order == y.order)
}

type Record = (Molecule, Vec<Vec3>, Option<f64>);

fn parse_record<'a, I>(lines: &mut std::iter::Peekable<I>, record: usize) -> Result<Record, MolError>
where
    I: Iterator<Item = &'a str>,
{
    let name = lines.next().ok_or(MolError::Truncated("header"))?.trim().to_string();
    lines.next().ok_or(MolError::Truncated("header"))?; // program line
    lines.next().ok_or(MolError::Truncated("header"))?; // comment line
    let counts = lines.next().ok_or(MolError::Truncated("counts line"))?;
    if counts.contains("V3000") {
        return Err(MolError::UnsupportedV3000);
    }
    let natoms = fixed_usize(counts, 0, 3)
        .ok_or_else(|| MolError::MalformedCounts(counts.trim().to_string()))?;
    let nbonds = fixed_usize(counts, 3, 6)
        .ok_or_else(|| MolError::MalformedCounts(counts.trim().to_string()))?;

    let mut atoms = Vec::with_capacity(natoms);
    let mut coords = Vec::with_capacity(natoms);
    for k in 0..natoms {
        let line = lines
            .next()
            .filter(|l| looks_like_atom_line(l))
            .ok_or_else(|| {
                MolError::MalformedCounts(format!(
                    "counts line declares {natoms} atoms but the atom block ends at {k}"
                ))
            })?;
        let (atom, xyz) = parse_atom_line(line, k + 1)?;
        atoms.push(atom);
        coords.push(xyz);
    }

    let mut bonds = Vec::with_capacity(nbonds);
    for k in 0..nbonds {
        let line = lines
            .next()
            .filter(|l| !l.starts_with("M  END") && !l.starts_with("$$$$"))
            .ok_or_else(|| {
                MolError::MalformedCounts(format!(
                    "counts line declares {nbonds} bonds but the bond block ends at {k}"
                ))
            })?;
        bonds.push(parse_bond_line(line, k + 1, natoms)?);
    }

    // Skip property lines ("M  CHG" etc.) and data items up to the separator,
    // picking up an `> <energy>` field when present.
    let mut energy = None;
    let mut expecting_energy = false;
    for line in lines.by_ref() {
        if line.starts_with("$$$$") {
            break;
        }
        if expecting_energy {
            energy = line.trim().parse::<f64>().ok();
            expecting_energy = false;
        } else if line.starts_with('>') && line.contains("<energy>") {
            expecting_energy = true;
        }
    }

    let id = if name.is_empty() {
        format!("record-{record}")
    } else {
        name
    };
    let molecule = Molecule::new(id, atoms, bonds)?;
    Ok((molecule, coords, energy))
}

/// Atom lines carry three width-10 floats plus the element field; bond lines
/// and `M  END` are far shorter, which is how an over-declared counts line is
/// caught.
fn looks_like_atom_line(line: &str) -> bool {
    line.len() >= 32 && !line.starts_with("M  END")
}

fn parse_atom_line(line: &str, lineno: usize) -> Result<(Atom, Vec3), MolError> {
    let coord = |lo: usize, hi: usize| -> Result<f64, MolError> {
        line.get(lo..hi)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| MolError::MalformedAtomLine {
                line: lineno,
                reason: format!("coordinate field '{}'", line.get(lo..hi).unwrap_or("").trim()),
            })
    };
    let x = coord(0, 10)?;
    let y = coord(10, 20)?;
    let z = coord(20, 30)?;
    let symbol = line
        .get(31..)
        .map(|rest| rest.split_whitespace().next().unwrap_or(""))
        .unwrap_or("");
    if symbol.is_empty() {
        return Err(MolError::MalformedAtomLine {
            line: lineno,
            reason: "missing element symbol".to_string(),
        });
    }
    Ok((Atom::from_symbol(symbol)?, Vec3::new(x, y, z)))
}

fn parse_bond_line(line: &str, lineno: usize, natoms: usize) -> Result<(usize, usize, BondOrder), MolError> {
    let field = |lo: usize, hi: usize, what: &str| -> Result<u32, MolError> {
        fixed_usize(line, lo, hi)
            .map(|v| v as u32)
            .ok_or_else(|| MolError::MalformedBondLine {
                line: lineno,
                reason: format!("{what} field '{}'", line.get(lo..hi).unwrap_or("").trim()),
            })
    };
    let i = field(0, 3, "first atom")? as usize;
    let j = field(3, 6, "second atom")? as usize;
    let code = field(6, 9, "order")?;
    if i == 0 || i > natoms {
        return Err(MolError::AtomIndexOutOfRange { index: i, natoms });
    }
    if j == 0 || j > natoms {
        return Err(MolError::AtomIndexOutOfRange { index: j, natoms });
    }
    let order = BondOrder::from_v2000(code).ok_or(MolError::MalformedBondLine {
        line: lineno,
        reason: format!("unknown bond order {code}"),
    })?;
    Ok((i - 1, j - 1, order))
}

fn fixed_usize(line: &str, lo: usize, hi: usize) -> Option<usize> {
    line.get(lo..hi.min(line.len()))?.trim().parse().ok()
}

/// Serializes the ensemble as one V2000 record per conformer.
pub fn write_sdf(molecule: &Molecule, ensemble: &Ensemble) -> Result<Vec<u8>, MolError> {
    if ensemble.is_empty() {
        return Err(MolError::EmptyEnsemble);
    }
    ensemble.validate_against(molecule)?;

    let mut out = String::new();
    for conformer in &ensemble.conformers {
        out.push_str(&molecule.id);
        out.push('\n');
        out.push_str("  confkit\n\n");
        out.push_str(&format!(
            "{:>3}{:>3}  0  0  0  0  0  0  0  0999 V2000\n",
            molecule.atom_count(),
            molecule.bonds().len()
        ));
        for (atom, pos) in molecule.atoms().iter().zip(&conformer.coords) {
            for v in [pos.x, pos.y, pos.z] {
                out.push_str(&fixed_coord(v)?);
            }
            out.push_str(&format!(" {:<3} 0  0  0  0  0  0  0  0  0  0  0  0\n", atom.symbol));
        }
        for bond in molecule.bonds() {
            out.push_str(&format!(
                "{:>3}{:>3}{:>3}  0\n",
                bond.i + 1,
                bond.j + 1,
                bond.order.to_v2000()
            ));
        }
        out.push_str("M  END\n");
        if let Some(e) = conformer.energy {
            out.push_str(&format!("> <energy>\n{e:.10}\n\n"));
        }
        out.push_str("$$$$\n");
    }
    Ok(out.into_bytes())
}

fn fixed_coord(v: f64) -> Result<String, MolError> {
    let s = format!("{v:>10.4}");
    if s.len() > 10 {
        return Err(MolError::FieldOverflow(v));
    }
    Ok(s)
}

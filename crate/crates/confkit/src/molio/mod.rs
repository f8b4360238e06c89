//! Molecular model and file I/O (SDF V2000, multi-frame XYZ).
//!
//! [`Molecule`] is an element-labeled bond graph; [`Conformer`] is one 3D
//! coordinate set for it; [`Ensemble`] is an ordered collection of conformers.
//! All three are immutable after construction and cheap to clone.

mod sdf;
mod xyz;

pub use sdf::{parse_sdf, write_sdf};
pub use xyz::{parse_xyz, write_xyz};

use crate::elements;
use crate::Vec3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MolError {
    #[error("malformed counts line: {0}")]
    MalformedCounts(String),
    #[error("V3000 records are not supported")]
    UnsupportedV3000,
    #[error("malformed atom line {line}: {reason}")]
    MalformedAtomLine { line: usize, reason: String },
    #[error("malformed bond line {line}: {reason}")]
    MalformedBondLine { line: usize, reason: String },
    #[error("bond references atom {index} but molecule has {natoms} atoms")]
    AtomIndexOutOfRange { index: usize, natoms: usize },
    #[error("bond {i}-{j} connects an atom to itself")]
    SelfBond { i: usize, j: usize },
    #[error("duplicate bond between atoms {i} and {j}")]
    DuplicateBond { i: usize, j: usize },
    #[error("record {record} has different connectivity than record 1")]
    InconsistentConnectivity { record: usize },
    #[error("unknown element symbol '{0}'")]
    UnknownElement(String),
    #[error("unexpected end of input while reading {0}")]
    Truncated(&'static str),
    #[error("frame {frame}: expected {expected} atoms, found {found}")]
    FrameAtomMismatch {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("frame {frame}: element sequence differs from frame 1")]
    FrameElementMismatch { frame: usize },
    #[error("non-numeric coordinate in frame {frame}: '{token}'")]
    NonNumericCoordinate { frame: usize, token: String },
    #[error("coordinate {0} does not fit the fixed-width V2000 field")]
    FieldOverflow(f64),
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("ensemble does not match molecule: {0}")]
    EnsembleMismatch(String),
}

/// Bond order as stored in V2000 connection tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn from_v2000(code: u32) -> Option<Self> {
        match code {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            4 => Some(BondOrder::Aromatic),
            _ => None,
        }
    }

    pub fn to_v2000(self) -> u32 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub symbol: String,
    pub atomic_number: u8,
}

impl Atom {
    pub fn from_symbol(symbol: &str) -> Result<Self, MolError> {
        let atomic_number = elements::atomic_number(symbol)
            .ok_or_else(|| MolError::UnknownElement(symbol.to_string()))?;
        Ok(Atom {
            symbol: symbol.to_string(),
            atomic_number,
        })
    }

    /// Heavy means anything other than hydrogen.
    pub fn is_heavy(&self) -> bool {
        self.atomic_number > 1
    }
}

/// Undirected bond. `i < j` always holds after construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
    /// True iff the bond lies on some cycle of the bond graph.
    pub in_ring: bool,
}

/// Element-labeled molecular graph.
///
/// Construction validates bond indices and perceives ring membership, so the
/// graph invariants hold for every value of this type.
#[derive(Debug, Clone)]
pub struct Molecule {
    pub id: String,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    heavy_atom_count: usize,
    adjacency: Vec<Vec<usize>>,
    connected: bool,
}

impl Molecule {
    pub fn new(
        id: impl Into<String>,
        atoms: Vec<Atom>,
        bonds: Vec<(usize, usize, BondOrder)>,
    ) -> Result<Self, MolError> {
        let natoms = atoms.len();
        let mut seen = std::collections::BTreeSet::new();
        let mut normalized = Vec::with_capacity(bonds.len());
        for (i, j, order) in bonds {
            if i == j {
                return Err(MolError::SelfBond { i, j });
            }
            let (a, b) = (i.min(j), i.max(j));
            if b >= natoms {
                return Err(MolError::AtomIndexOutOfRange { index: b, natoms });
            }
            if !seen.insert((a, b)) {
                return Err(MolError::DuplicateBond { i: a, j: b });
            }
            normalized.push(Bond {
                i: a,
                j: b,
                order,
                in_ring: false,
            });
        }

        let mut adjacency = vec![Vec::new(); natoms];
        for (idx, bond) in normalized.iter().enumerate() {
            adjacency[bond.i].push(idx);
            adjacency[bond.j].push(idx);
        }

        let heavy_atom_count = atoms.iter().filter(|a| a.is_heavy()).count();
        let mut mol = Molecule {
            id: id.into(),
            atoms,
            bonds: normalized,
            heavy_atom_count,
            adjacency,
            connected: false,
        };
        mol.connected = mol.count_fragments() <= 1;
        mark_ring_bonds(&mut mol);
        Ok(mol)
    }

    /// A molecule with atoms but no bonds, as produced by XYZ ingestion.
    pub fn without_bonds(id: impl Into<String>, atoms: Vec<Atom>) -> Self {
        Molecule::new(id, atoms, Vec::new()).expect("bond-free molecule is always valid")
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.heavy_atom_count
    }

    /// False for multi-fragment input, which samplers reject.
    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Indices of atoms bonded to `atom`, ascending.
    pub fn neighbors(&self, atom: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.adjacency[atom]
            .iter()
            .map(|&b| self.bonds[b].other_end(atom))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn bond_between(&self, i: usize, j: usize) -> Option<&Bond> {
        self.adjacency[i]
            .iter()
            .map(|&b| &self.bonds[b])
            .find(|b| b.other_end(i) == j)
    }

    /// Per-atom heavy mask in atom order.
    pub fn heavy_mask(&self) -> Vec<bool> {
        self.atoms.iter().map(|a| a.is_heavy()).collect()
    }

    /// Graph distance (bond count) from every atom to every other, usize::MAX
    /// when unreachable.
    pub fn bond_distances(&self) -> Vec<Vec<usize>> {
        let n = self.atom_count();
        let mut all = vec![vec![usize::MAX; n]; n];
        for start in 0..n {
            let dist = &mut all[start];
            dist[start] = 0;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for v in self.neighbors(u) {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        all
    }

    /// Atoms reachable from `start` when bond `skip` is deleted.
    pub(crate) fn component_without_bond(&self, start: usize, skip: (usize, usize)) -> Vec<bool> {
        let mut seen = vec![false; self.atom_count()];
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &bidx in &self.adjacency[u] {
                let bond = &self.bonds[bidx];
                if (bond.i, bond.j) == skip {
                    continue;
                }
                let v = bond.other_end(u);
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    fn count_fragments(&self) -> usize {
        let n = self.atom_count();
        if n == 0 {
            return 0;
        }
        let mut seen = vec![false; n];
        let mut fragments = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            fragments += 1;
            seen[start] = true;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        fragments
    }
}

impl Bond {
    pub fn other_end(&self, atom: usize) -> usize {
        if atom == self.i {
            self.j
        } else {
            self.i
        }
    }
}

/// Ring perception: a bond is in a ring iff removing it leaves its endpoints
/// connected, i.e. iff it is not a bridge. Bridges are found with one DFS
/// (Tarjan low-link).
pub fn perceive_rings(molecule: &Molecule) -> Molecule {
    let mut out = molecule.clone();
    mark_ring_bonds(&mut out);
    out
}

fn mark_ring_bonds(mol: &mut Molecule) {
    let n = mol.atoms.len();
    let mut is_bridge = vec![false; mol.bonds.len()];
    let mut visited = vec![false; n];
    let mut entry = vec![0usize; n];
    let mut low = vec![0usize; n];
    let mut timer = 0usize;

    // Iterative DFS; (node, parent bond, neighbor cursor).
    for root in 0..n {
        if visited[root] {
            continue;
        }
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        visited[root] = true;
        entry[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (u, parent_bond, ref mut cursor)) = stack.last_mut() {
            if *cursor < mol.adjacency[u].len() {
                let bidx = mol.adjacency[u][*cursor];
                *cursor += 1;
                if Some(bidx) == parent_bond {
                    continue;
                }
                let v = mol.bonds[bidx].other_end(u);
                if visited[v] {
                    low[u] = low[u].min(entry[v]);
                } else {
                    visited[v] = true;
                    entry[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, Some(bidx), 0));
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > entry[p] {
                        is_bridge[parent_bond.expect("non-root node has a parent bond")] = true;
                    }
                }
            }
        }
    }

    for (bond, bridge) in mol.bonds.iter_mut().zip(is_bridge) {
        bond.in_ring = !bridge;
    }
}

/// Where a conformer came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Uniform,
    Geometric,
    Energy,
    External,
    Reference,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Uniform => "uniform",
            Provenance::Geometric => "geometric",
            Provenance::Energy => "energy",
            Provenance::External => "external",
            Provenance::Reference => "reference",
        }
    }
}

/// Quality flags attached by the samplers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConformerFlags {
    /// A steric clash survived the resampling cap.
    pub clash: bool,
    /// Minimization stopped without reaching the gradient tolerance.
    pub unconverged: bool,
    /// The molecule had no torsional degrees of freedom; this is a copy of
    /// the template.
    pub template_copy: bool,
}

impl ConformerFlags {
    pub fn any(&self) -> bool {
        self.clash || self.unconverged || self.template_copy
    }
}

/// One 3D coordinate set for a molecule, in Angstrom.
#[derive(Debug, Clone, PartialEq)]
pub struct Conformer {
    pub molecule_id: String,
    pub coords: Vec<Vec3>,
    pub energy: Option<f64>,
    pub provenance: Provenance,
    pub flags: ConformerFlags,
}

impl Conformer {
    pub fn new(molecule_id: impl Into<String>, coords: Vec<Vec3>, provenance: Provenance) -> Self {
        Conformer {
            molecule_id: molecule_id.into(),
            coords,
            energy: None,
            provenance,
            flags: ConformerFlags::default(),
        }
    }

    pub fn atom_count(&self) -> usize {
        self.coords.len()
    }

    pub fn is_finite(&self) -> bool {
        self.coords
            .iter()
            .all(|c| c.iter().all(|v| v.is_finite()))
    }
}

/// Ordered collection of conformers of one molecule.
#[derive(Debug, Clone, Default)]
pub struct Ensemble {
    pub molecule_id: String,
    pub conformers: Vec<Conformer>,
}

impl Ensemble {
    pub fn new(molecule_id: impl Into<String>) -> Self {
        Ensemble {
            molecule_id: molecule_id.into(),
            conformers: Vec::new(),
        }
    }

    pub fn from_conformers(
        molecule_id: impl Into<String>,
        conformers: Vec<Conformer>,
    ) -> Self {
        Ensemble {
            molecule_id: molecule_id.into(),
            conformers,
        }
    }

    pub fn len(&self) -> usize {
        self.conformers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conformers.is_empty()
    }

    pub fn push(&mut self, conformer: Conformer) {
        self.conformers.push(conformer);
    }

    /// Checks membership invariants against a molecule.
    pub fn validate_against(&self, molecule: &Molecule) -> Result<(), MolError> {
        for (idx, c) in self.conformers.iter().enumerate() {
            if c.atom_count() != molecule.atom_count() {
                return Err(MolError::EnsembleMismatch(format!(
                    "conformer {idx} has {} atoms, molecule has {}",
                    c.atom_count(),
                    molecule.atom_count()
                )));
            }
            if c.molecule_id != molecule.id {
                return Err(MolError::EnsembleMismatch(format!(
                    "conformer {idx} belongs to '{}', not '{}'",
                    c.molecule_id, molecule.id
                )));
            }
        }
        Ok(())
    }
}

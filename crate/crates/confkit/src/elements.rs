//! Element data: symbol/atomic-number mapping and the committed radius tables.
//!
//! The radius tables live in `data/*.tsv` and are baked in at compile time.
//! Elements outside the tables can still be parsed (they get an atomic number)
//! but sampling and force-field construction reject them.

use std::collections::BTreeMap;
use std::sync::OnceLock;

const COVALENT_TSV: &str = include_str!("../data/covalent_radii.tsv");
const VDW_TSV: &str = include_str!("../data/vdw_radii.tsv");

/// Symbols we can map to an atomic number at parse time.
const SYMBOLS: &[(&str, u8)] = &[
    ("H", 1),
    ("He", 2),
    ("Li", 3),
    ("Be", 4),
    ("B", 5),
    ("C", 6),
    ("N", 7),
    ("O", 8),
    ("F", 9),
    ("Ne", 10),
    ("Na", 11),
    ("Mg", 12),
    ("Al", 13),
    ("Si", 14),
    ("P", 15),
    ("S", 16),
    ("Cl", 17),
    ("Ar", 18),
    ("K", 19),
    ("Ca", 20),
    ("Fe", 26),
    ("Cu", 29),
    ("Zn", 30),
    ("Se", 34),
    ("Br", 35),
    ("I", 53),
];

/// Atomic number for an element symbol (case-sensitive, e.g. "Cl" not "CL").
pub fn atomic_number(symbol: &str) -> Option<u8> {
    SYMBOLS.iter().find(|(s, _)| *s == symbol).map(|(_, z)| *z)
}

fn parse_radius_table(tsv: &str) -> BTreeMap<String, f64> {
    let mut table = BTreeMap::new();
    for line in tsv.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let symbol = fields.next().expect("radius table: missing symbol");
        let radius: f64 = fields
            .next()
            .expect("radius table: missing value")
            .parse()
            .expect("radius table: bad value");
        table.insert(symbol.to_string(), radius);
    }
    table
}

fn covalent_table() -> &'static BTreeMap<String, f64> {
    static TABLE: OnceLock<BTreeMap<String, f64>> = OnceLock::new();
    TABLE.get_or_init(|| parse_radius_table(COVALENT_TSV))
}

fn vdw_table() -> &'static BTreeMap<String, f64> {
    static TABLE: OnceLock<BTreeMap<String, f64>> = OnceLock::new();
    TABLE.get_or_init(|| parse_radius_table(VDW_TSV))
}

/// Single-bond covalent radius in Angstrom, `None` for untabulated elements.
pub fn covalent_radius(symbol: &str) -> Option<f64> {
    covalent_table().get(symbol).copied()
}

/// Van der Waals radius in Angstrom, `None` for untabulated elements.
pub fn vdw_radius(symbol: &str) -> Option<f64> {
    vdw_table().get(symbol).copied()
}

/// Typical lone-pair count, used by the steric-number proxy for ideal angles.
pub fn lone_pairs(atomic_number: u8) -> u8 {
    match atomic_number {
        7 | 15 => 1,       // N, P
        8 | 16 => 2,       // O, S
        9 | 17 | 35 => 3,  // F, Cl, Br
        _ => 0,
    }
}

/// Ideal bond angle (radians) at a center atom, from its steric number
/// (bonded neighbors plus lone pairs): 2 -> linear, 3 -> trigonal,
/// 4 or more -> tetrahedral.
pub fn ideal_angle(atomic_number: u8, degree: usize) -> f64 {
    let steric = degree + lone_pairs(atomic_number) as usize;
    match steric {
        0..=2 => std::f64::consts::PI,
        3 => 120.0_f64.to_radians(),
        _ => TETRAHEDRAL_ANGLE,
    }
}

/// arccos(-1/3), the tetrahedral angle, in radians.
pub const TETRAHEDRAL_ANGLE: f64 = 1.9106332362490186;

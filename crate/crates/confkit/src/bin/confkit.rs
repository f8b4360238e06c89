//! Command-line front end: sample conformers, cluster candidate ensembles,
//! score generated against reference sets, and run the full benchmark
//! pipeline over a directory of reference files.
//!
//! Exit codes: 0 success, 1 partial or runtime failure, 2 invalid
//! configuration or input.

use clap::{Parser, Subcommand, ValueEnum};
use confkit::clustering::{featurize, kmeans, select_representatives};
use confkit::forcefield::{build_model, sample_energy};
use confkit::metrics::{molecule_metrics, MetricsConfig};
use confkit::molio::{parse_sdf, parse_xyz, write_sdf, write_xyz, Ensemble, Molecule};
use confkit::pipeline::{
    run_benchmark, PipelineConfig, PipelineError, SamplerSet, DEFAULT_CAP, DEFAULT_DELTA,
    DEFAULT_MULTIPLIER,
};
use confkit::samplers::{sample_geometric, sample_uniform, SamplerConfig};
use serde::Serialize;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "confkit",
    version,
    about = "Conformer ensemble generation, clustering, and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    Uniform,
    Geometric,
    Energy,
    /// Mix all three in the 1:1:4 uniform:geometric:energy ratio.
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplerName {
    Uniform,
    Geometric,
    Energy,
}

impl SamplerName {
    fn as_str(self) -> &'static str {
        match self {
            SamplerName::Uniform => "uniform",
            SamplerName::Geometric => "geometric",
            SamplerName::Energy => "energy",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw conformers for the molecule in a file and write them out.
    Sample {
        /// Input SDF or XYZ file (first conformer is the template).
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        sampler: SamplerArg,
        /// Total number of conformers to draw.
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; format follows the extension (.sdf or .xyz).
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster a candidate ensemble down to k representative conformers.
    Cluster {
        #[arg(long = "in")]
        input: PathBuf,
        /// Number of clusters; each contributes its medoid.
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a generated ensemble against a reference ensemble.
    Eval {
        /// Generated conformers.
        #[arg(long)]
        gen: PathBuf,
        /// Reference conformers for the same molecule.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Coverage threshold in Angstrom.
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
    },
    /// Sample, cluster, and evaluate every reference file in a directory.
    Pipeline {
        /// Reference directory (every .sdf/.mol/.xyz file) or a single file.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Energy-sampler budget per reference conformer (n_e = multiplier
        /// x n_ref, capped).
        #[arg(long, default_value_t = DEFAULT_MULTIPLIER)]
        multiplier: usize,
        /// Accept multipliers outside {2, 5, 10, 20}.
        #[arg(long)]
        allow_any_multiplier: bool,
        /// Upper bound on n_e.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        /// Drop a sampler; repeatable.
        #[arg(long, value_enum)]
        disable_sampler: Vec<SamplerName>,
        /// Re-split the disabled samplers' budget across the enabled ones.
        #[arg(long)]
        redistribute: bool,
        /// Exit 0 even when some molecules fail.
        #[arg(long)]
        keep_going: bool,
        /// Diagnostic: score exact copies of the reference instead of
        /// sampling (pins COV=100%, MAT=0).
        #[arg(long)]
        generated_equals_reference: bool,
        /// Skip molecules with fewer reference conformers than this.
        #[arg(long)]
        min_ref: Option<usize>,
        /// Skip molecules with more reference conformers than this.
        #[arg(long)]
        max_ref: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here (default: stdout).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write a flat CSV of the per-molecule rows.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also write the re-run manifest (config echo, counts, timings).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Write each molecule's selected ensemble to this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Failures split by exit code: bad input or configuration (2) versus
/// errors while processing or writing (1).
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(msg) | Failure::Runtime(msg) => msg,
        }
    }
}

fn usage(err: impl Display) -> Failure {
    Failure::Usage(err.to_string())
}

fn runtime(err: impl Display) -> Failure {
    Failure::Runtime(err.to_string())
}

enum Format {
    Sdf,
    Xyz,
}

fn format_of(path: &Path) -> Result<Format, Failure> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("sdf") | Some("mol") => Ok(Format::Sdf),
        Some("xyz") => Ok(Format::Xyz),
        _ => Err(Failure::Usage(format!(
            "{}: expected a .sdf, .mol, or .xyz extension",
            path.display()
        ))),
    }
}

fn load_input(path: &Path) -> Result<(Molecule, Ensemble), Failure> {
    let format = format_of(path)?;
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let parsed = match format {
        Format::Sdf => parse_sdf(&bytes),
        Format::Xyz => parse_xyz(&bytes),
    };
    parsed.map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn save_ensemble(path: &Path, molecule: &Molecule, ensemble: &Ensemble) -> Result<(), Failure> {
    let bytes = match format_of(path)? {
        Format::Sdf => write_sdf(molecule, ensemble),
        Format::Xyz => write_xyz(molecule, ensemble),
    }
    .map_err(runtime)?;
    std::fs::write(path, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Splits a total count in the 1:1:4 uniform:geometric:energy proportion by
/// largest remainder, earliest sampler first on ties.
fn split_mixed(count: usize) -> (usize, usize, usize) {
    const WEIGHTS: [usize; 3] = [1, 1, 4];
    let mut counts = [0usize; 3];
    let mut remainders = [0usize; 3];
    let mut assigned = 0;
    for i in 0..3 {
        counts[i] = count * WEIGHTS[i] / 6;
        remainders[i] = count * WEIGHTS[i] % 6;
        assigned += counts[i];
    }
    let mut leftover = count - assigned;
    while leftover > 0 {
        let i = (0..3)
            .max_by(|&a, &b| remainders[a].cmp(&remainders[b]).then(b.cmp(&a)))
            .unwrap();
        counts[i] += 1;
        remainders[i] = 0;
        leftover -= 1;
    }
    (counts[0], counts[1], counts[2])
}

fn cmd_sample(
    input: &Path,
    sampler: SamplerArg,
    count: usize,
    seed: u64,
    out: &Path,
) -> Result<u8, Failure> {
    let (molecule, ensemble) = load_input(input)?;
    if ensemble.is_empty() {
        return Err(Failure::Usage(format!(
            "{}: no conformer to use as a template",
            input.display()
        )));
    }
    let template = &ensemble.conformers[0];
    let (n_u, n_g, n_e) = match sampler {
        SamplerArg::Uniform => (count, 0, 0),
        SamplerArg::Geometric => (0, count, 0),
        SamplerArg::Energy => (0, 0, count),
        SamplerArg::All => split_mixed(count),
    };
    let mut drawn = Ensemble::new(molecule.id.clone());
    if n_u > 0 {
        let config = SamplerConfig::with_seed(seed);
        for conf in sample_uniform(&molecule, template, n_u, &config)
            .map_err(runtime)?
            .conformers
        {
            drawn.push(conf);
        }
    }
    if n_g > 0 {
        let config = SamplerConfig::with_seed(seed.wrapping_add(1));
        for conf in sample_geometric(&molecule, n_g, &config)
            .map_err(runtime)?
            .conformers
        {
            drawn.push(conf);
        }
    }
    if n_e > 0 {
        let config = SamplerConfig::with_seed(seed.wrapping_add(2));
        let model = build_model(&molecule).map_err(usage)?;
        for conf in sample_energy(&molecule, &model, n_e, &config)
            .map_err(runtime)?
            .conformers
        {
            drawn.push(conf);
        }
    }
    save_ensemble(out, &molecule, &drawn)?;
    println!("wrote {} conformers to {}", drawn.len(), out.display());
    Ok(0)
}

fn cmd_cluster(input: &Path, k: usize, seed: u64, out: &Path) -> Result<u8, Failure> {
    let (molecule, candidates) = load_input(input)?;
    if k < 1 || k > candidates.len() {
        return Err(Failure::Usage(format!(
            "k={} out of range for {} conformers",
            k,
            candidates.len()
        )));
    }
    let features = featurize(&candidates, &molecule).map_err(runtime)?;
    let model = kmeans(&features, k, seed).map_err(runtime)?;
    let selected = select_representatives(&candidates, &model).map_err(runtime)?;
    save_ensemble(out, &molecule, &selected)?;
    println!("wrote {} representatives to {}", selected.len(), out.display());
    Ok(0)
}

#[derive(Serialize)]
struct EvalOutput {
    id: String,
    n_ref: usize,
    n_gen: usize,
    cov: f64,
    mat: f64,
}

fn cmd_eval(gen: &Path, reference: &Path, delta: f64) -> Result<u8, Failure> {
    let (ref_mol, ref_ens) = load_input(reference)?;
    let (gen_mol, mut gen_ens) = load_input(gen)?;
    let same_atoms = ref_mol.atom_count() == gen_mol.atom_count()
        && ref_mol
            .atoms()
            .iter()
            .zip(gen_mol.atoms())
            .all(|(a, b)| a.symbol == b.symbol);
    if !same_atoms {
        return Err(Failure::Usage(format!(
            "{} and {} describe different molecules",
            gen.display(),
            reference.display()
        )));
    }
    // Titles may differ between the two files; the reference names the run.
    gen_ens.molecule_id = ref_mol.id.clone();
    for conf in &mut gen_ens.conformers {
        conf.molecule_id = ref_mol.id.clone();
    }
    let config = MetricsConfig::with_delta(delta);
    let metrics = molecule_metrics(&ref_mol, &gen_ens, &ref_ens, &config).map_err(usage)?;
    let output = EvalOutput {
        id: metrics.molecule_id,
        n_ref: metrics.n_ref,
        n_gen: metrics.n_gen,
        cov: metrics.cov * 100.0,
        mat: metrics.mat,
    };
    println!("{}", serde_json::to_string(&output).expect("serializable"));
    Ok(0)
}

fn reference_files(root: &Path) -> Result<Vec<PathBuf>, Failure> {
    if root.is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let entries = std::fs::read_dir(root)
        .map_err(|e| Failure::Usage(format!("{}: {e}", root.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Failure::Usage(format!("{}: {e}", root.display())))?
            .path();
        if path.is_file()
            && matches!(
                path.extension().and_then(|e| e.to_str()),
                Some("sdf") | Some("mol") | Some("xyz")
            )
        {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Failure::Usage(format!(
            "{}: no .sdf, .mol, or .xyz reference files",
            root.display()
        )));
    }
    Ok(files)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn cmd_pipeline(
    reference: &Path,
    config: PipelineConfig,
    keep_going: bool,
    min_ref: Option<usize>,
    max_ref: Option<usize>,
    report_path: Option<&Path>,
    csv_path: Option<&Path>,
    manifest_path: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<u8, Failure> {
    config.validate().map_err(usage)?;
    let mut inputs = Vec::new();
    for path in reference_files(reference)? {
        let (molecule, ensemble) = load_input(&path)?;
        let n = ensemble.len();
        if min_ref.is_some_and(|lo| n < lo) || max_ref.is_some_and(|hi| n > hi) {
            eprintln!(
                "skipping {} ({} reference conformers outside the ingest filter)",
                molecule.id, n
            );
            continue;
        }
        inputs.push((molecule, ensemble));
    }
    if inputs.is_empty() {
        return Err(Failure::Usage(
            "the ingest filter removed every molecule".to_string(),
        ));
    }

    let run = run_benchmark(&inputs, &config).map_err(|e| match e {
        PipelineError::AllMoleculesFailed(_) => runtime(e),
        other => usage(other),
    })?;

    for failure in &run.failures {
        eprintln!("failed {}: {}", failure.id, failure.error);
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        for mol_run in &run.runs {
            let id = &mol_run.metrics.molecule_id;
            let molecule = inputs
                .iter()
                .map(|(m, _)| m)
                .find(|m| &m.id == id)
                .expect("selected ensemble comes from an input molecule");
            save_ensemble(&dir.join(format!("{id}.sdf")), molecule, &mol_run.selected)?;
        }
    }
    let json = run.report.to_json();
    match report_path {
        Some(path) => {
            write_text(path, &json)?;
            println!(
                "{} molecules, {} failures; cov_mean={} mat_mean={}; report at {}",
                run.report.molecules.len(),
                run.failures.len(),
                run.report.summary.cov_mean,
                run.report.summary.mat_mean,
                path.display()
            );
        }
        None => print!("{json}"),
    }
    if let Some(path) = csv_path {
        write_text(path, &run.report.to_csv())?;
    }
    if let Some(path) = manifest_path {
        write_text(path, &run.manifest.to_json())?;
    }

    if run.failures.is_empty() || keep_going {
        Ok(0)
    } else {
        Ok(1)
    }
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Sample {
            input,
            sampler,
            count,
            seed,
            out,
        } => cmd_sample(&input, sampler, count, seed, &out),
        Command::Cluster { input, k, seed, out } => cmd_cluster(&input, k, seed, &out),
        Command::Eval {
            gen,
            reference,
            delta,
        } => cmd_eval(&gen, &reference, delta),
        Command::Pipeline {
            reference,
            multiplier,
            allow_any_multiplier,
            cap,
            delta,
            disable_sampler,
            redistribute,
            keep_going,
            generated_equals_reference,
            min_ref,
            max_ref,
            seed,
            report,
            csv,
            manifest,
            out_dir,
        } => {
            let mut samplers = SamplerSet::all();
            for name in disable_sampler {
                samplers.disable(name.as_str());
            }
            let config = PipelineConfig {
                seed,
                multiplier,
                allow_any_multiplier,
                cap,
                delta,
                samplers,
                redistribute,
                generated_equals_reference,
            };
            cmd_pipeline(
                &reference,
                config,
                keep_going,
                min_ref,
                max_ref,
                report.as_deref(),
                csv.as_deref(),
                manifest.as_deref(),
                out_dir.as_deref(),
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

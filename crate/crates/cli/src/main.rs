//! `sqd`: command-line front end for the sqd-core engine.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sqd_core::configs::{fci_dimension, format_scientific, SystemSpec};
use sqd_core::integrals::IntegralError;
use sqd_core::oracle::{fci_solve, OracleError, DEFAULT_FCI_CAP};
use sqd_core::pipeline::{binding_energy, run_pipeline, Method, PipelineConfig, PipelineError};
use sqd_core::sampling::{load_samples, sample_exact, save_samples, SamplingError};
use sqd_core::sbd::{apply_hamiltonian, SbdError};
use sqd_core::synthetic::{product_basis, random_hamiltonian};
use sqd_core::{parse_fcidump, FragmentHamiltonian, SubspaceBasis};

const FORMATS: &str = "\
File formats:
  FCIDUMP    Fortran namelist header (&FCI NORB=..,NELEC=..,MS2=.. &END), then
             lines `value i j k l` in chemists' notation with 1-based orbitals;
             `value i j 0 0` is a one-electron integral, `value 0 0 0 0` the
             core energy. 8-fold symmetry is implied.
  samples    one line per distinct bitstring: `<alpha> <beta> <count>`, e.g.
             `110000 101000 17`; character p is orbital p (leftmost = 0).
             Blank lines and lines starting with '#' are ignored.
  config     TOML with the keys method, shots, recovery_iterations,
             subgroup_count, subgroup_capacity, k1, k2, epsilon,
             extension_distance, extension_screen, early_stop, seed and a
             [solver] table (tol, max_iterations, max_subspace, restart_size,
             dense_threshold, level_shift). Command-line flags win.
  report     JSON energy report; wall-clock timings go to <out>.timings.json.

Exit codes: 0 success, 2 input error, 3 non-convergence, 4 resource cap.";

#[derive(Parser)]
#[command(name = "sqd", version, about = "Sample-based quantum diagonalization of fragment Hamiltonians", after_help = FORMATS)]
struct Cli {
    /// Worker threads (defaults to hardware parallelism).
    #[arg(long, global = true, env = "SQD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize an FCIDUMP file.
    Info {
        fcidump: PathBuf,
    },
    /// Exact ground-state energy by full CI.
    Fci {
        #[arg(long)]
        fcidump: PathBuf,
        /// Largest FCI dimension attempted.
        #[arg(long, default_value_t = DEFAULT_FCI_CAP)]
        cap: u64,
        /// Write the result as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw noisy samples from the exact ground state.
    Sample {
        #[arg(long)]
        fcidump: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        shots: u64,
        /// Independent bit-flip probability per orbital.
        #[arg(long = "noise_p", default_value_t = 0.0)]
        noise_p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run SQD, ExtSQD or TrimSQD.
    Run(RunArgs),
    /// Binding energy E_bound - E_unbound - E_ligand.
    Bind {
        #[arg(allow_negative_numbers = true)]
        e_bound: f64,
        #[arg(allow_negative_numbers = true)]
        e_unbound: f64,
        #[arg(allow_negative_numbers = true)]
        e_ligand: f64,
    },
    /// Time the subspace matvec across thread counts.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    fcidump: PathBuf,
    #[arg(long)]
    samples: PathBuf,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path; timings are written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "recovery_iterations")]
    recovery_iterations: Option<usize>,
    #[arg(long = "subgroup_count")]
    subgroup_count: Option<usize>,
    #[arg(long = "subgroup_capacity")]
    subgroup_capacity: Option<usize>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "extension_distance")]
    extension_distance: Option<u32>,
    #[arg(long = "extension_screen")]
    extension_screen: Option<f64>,
    #[arg(long = "early_stop")]
    early_stop: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Use this Hamiltonian instead of a synthetic one.
    #[arg(long)]
    fcidump: Option<PathBuf>,
    /// Target basis dimension (a product of alpha and beta string sets).
    #[arg(long, default_value_t = 100_000)]
    dim: usize,
    /// Synthetic instance size.
    #[arg(long, default_value_t = 16)]
    norb: usize,
    #[arg(long = "n_alpha", default_value_t = 8)]
    n_alpha: usize,
    #[arg(long = "n_beta", default_value_t = 8)]
    n_beta: usize,
    /// Thread counts to time, e.g. 1,2,4,8.
    #[arg(long = "thread_counts", value_delimiter = ',', default_value = "1")]
    thread_counts: Vec<usize>,
    /// Repetitions per thread count; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Error carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure { code: 2, message: message.to_string() }
    }
}

impl From<IntegralError> for Failure {
    fn from(e: IntegralError) -> Self {
        Failure::input(e)
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let code = match e {
            OracleError::CapExceeded { .. } => 4,
            OracleError::NoConvergence { .. } => 3,
            OracleError::Basis(_) => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<SamplingError> for Failure {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::Oracle(o) => o.into(),
            SamplingError::CapExceeded { .. } => Failure { code: 4, message: e.to_string() },
            other => Failure::input(other),
        }
    }
}

impl From<SbdError> for Failure {
    fn from(e: SbdError) -> Self {
        let code = if matches!(e, SbdError::NoConvergence(_)) { 3 } else { 2 };
        Failure { code, message: e.to_string() }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_hamiltonian(path: &Path) -> Result<FragmentHamiltonian, Failure> {
    parse_fcidump(open(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn cmd_info(path: &Path) -> Result<(), Failure> {
    let ham = load_hamiltonian(path)?;
    let spec = ham.spec();
    let dim = fci_dimension(spec);
    println!("orbitals (M):        {}", spec.norb);
    println!("electrons (a, b):    ({}, {})", spec.n_alpha, spec.n_beta);
    println!("active space:        ({}e, {}o)", spec.n_electrons(), spec.norb);
    println!("core energy:         {:.12}", ham.e_core());
    println!("one-electron terms:  {}", ham.count_nonzero_h());
    println!("two-electron terms:  {}", ham.count_nonzero_eri());
    println!("FCI dimension:       {dim} ({})", format_scientific(&dim, 3));
    Ok(())
}

fn cmd_fci(path: &Path, cap: u64, out: Option<&Path>) -> Result<(), Failure> {
    let ham = load_hamiltonian(path)?;
    let res = fci_solve(&ham, cap)?;
    println!("FCI energy: {:.12} Ha (dimension {})", res.ground_energy, res.dimension);
    if let Some(out) = out {
        let doc = json!({
            "engine_version": env!("CARGO_PKG_VERSION"),
            "system": ham.spec(),
            "dimension": res.dimension,
            "ground_energy": res.ground_energy,
        });
        write_text(out, &format!("{}\n", serde_json::to_string_pretty(&doc).expect("json")))?;
    }
    Ok(())
}

fn cmd_sample(path: &Path, shots: u64, noise_p: f64, seed: u64, out: &Path) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&noise_p) {
        return Err(Failure::input(format!("noise_p = {noise_p} outside [0, 1]")));
    }
    let ham = load_hamiltonian(path)?;
    let samples = sample_exact(&ham, shots, noise_p, seed)?;
    let mut w = create(out)?;
    save_samples(&samples, &mut w).and_then(|_| w.flush()).map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
    println!(
        "wrote {} shots ({} distinct, {:.1}% valid) to {}",
        samples.total(),
        samples.len(),
        100.0 * samples.valid_fraction(ham.spec()),
        out.display()
    );
    Ok(())
}

fn timings_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".timings.json");
    out.with_file_name(name)
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let ham = load_hamiltonian(&args.fcidump)?;
    let samples = load_samples(open(&args.samples)?, ham.spec())
        .map_err(|e| Failure::input(format!("{}: {e}", args.samples.display())))?;
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
            PipelineConfig::from_toml_str(&text).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(m) = args.method {
        cfg.method = m;
    }
    macro_rules! override_fields {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { cfg.$f = v; })* };
    }
    override_fields!(seed, recovery_iterations, subgroup_count, subgroup_capacity, k1, k2, extension_distance, extension_screen);
    if args.epsilon.is_some() {
        cfg.epsilon = args.epsilon;
    }
    if args.early_stop.is_some() {
        cfg.early_stop = args.early_stop;
    }
    cfg.validate().map_err(Failure::input)?;

    let (report, code) = match run_pipeline(&ham, &samples, &cfg) {
        Ok(r) => (r, 0),
        Err(PipelineError::NoConvergence(r)) => (*r, 3),
        Err(PipelineError::Solver(e)) => return Err(e.into()),
        Err(e) => return Err(Failure::input(e)),
    };
    write_text(&args.out, &report.to_json())?;
    write_text(&timings_path(&args.out), &report.timings_json())?;
    println!(
        "{} final energy: {:.12} Ha, dimension {}{}",
        report.method,
        report.final_energy,
        report.final_dimension,
        if report.converged { "" } else { " (not converged)" }
    );
    if code == 3 {
        return Err(Failure { code, message: "subspace solve did not converge; report written".into() });
    }
    Ok(())
}

fn cmd_bind(e_bound: f64, e_unbound: f64, e_ligand: f64) {
    let b = binding_energy(e_bound, e_unbound, e_ligand);
    println!("binding energy: {:.6} Ha = {:.4} kcal/mol", b.hartree, b.kcal_per_mol);
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let ham = match &args.fcidump {
        Some(p) => load_hamiltonian(p)?,
        None => {
            let spec = SystemSpec::new(args.norb, args.n_alpha, args.n_beta).map_err(Failure::input)?;
            random_hamiltonian(&spec, args.seed)
        }
    };
    let side = (args.dim as f64).sqrt().ceil() as usize;
    let configs = product_basis(ham.spec(), side, side, args.seed);
    let t = Instant::now();
    let basis = SubspaceBasis::build(configs, &ham)?;
    println!("basis dimension {} ({}), built in {:.2} s", basis.len(), ham.spec(), t.elapsed().as_secs_f64());
    let v: Vec<f64> = (0..basis.len()).map(|i| ((i % 97) as f64 - 48.0) / 97.0).collect();

    println!("{:>8} {:>12} {:>9} {:>11}", "threads", "time (s)", "speedup", "efficiency");
    let mut base = None;
    for &n in &args.thread_counts {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Failure::input(e.to_string()))?;
        let best = pool.install(|| {
            (0..args.reps.max(1))
                .map(|_| {
                    let t = Instant::now();
                    std::hint::black_box(apply_hamiltonian(&basis, &ham, &v));
                    t.elapsed().as_secs_f64()
                })
                .fold(f64::INFINITY, f64::min)
        });
        let t1 = *base.get_or_insert(best * n as f64);
        let speedup = t1 / best;
        println!("{n:>8} {best:>12.4} {speedup:>9.2} {:>10.1}%", 100.0 * speedup / n as f64);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Info { fcidump } => cmd_info(fcidump),
        Command::Fci { fcidump, cap, out } => cmd_fci(fcidump, *cap, out.as_deref()),
        Command::Sample { fcidump, shots, noise_p, seed, out } => cmd_sample(fcidump, *shots, *noise_p, *seed, out),
        Command::Run(args) => cmd_run(args),
        Command::Bind { e_bound, e_unbound, e_ligand } => {
            cmd_bind(*e_bound, *e_unbound, *e_ligand);
            Ok(())
        }
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use jlolab::combinatorics::{
    binomial, cyclic_partition_volumes, cyclic_shuffle_count, enumerate_cyclic_shuffles, enumerate_shuffles,
    shuffle_partition_volumes, PartitionStats,
};
use jlolab::config::RunConfig;
use jlolab::jlo::{index_pairing, JloEvaluator, Method, PAIRING_INTEGER_TOL};
use jlolab::random::Rng;
use jlolab::{verify, Error, GradedSpace, Idempotent, SpectralTripleFD};

/// `println!` that ignores a closed stdout.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn out_raw(text: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

/// Highest degree accepted by `decompose`.
const MAX_DECOMPOSE_DEGREE: usize = 6;
const VOLUME_SIGMAS: f64 = 3.0;

#[derive(Parser)]
#[command(
    name = "jlolab",
    version,
    about = "Finite-dimensional spectral triples and the JLO character"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Residual tolerance for deterministic identities.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Monte-Carlo sample count.
    #[arg(long, global = true)]
    mc_samples: Option<u64>,
    /// Path of the JSON report; a text table is written next to it.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every identity suite and write a report.
    Verify {
        /// Number of trials per identity.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Compare the JLO index pairing with the Fredholm index.
    Index {
        /// Spectral triple JSON.
        triple: PathBuf,
        /// Self-adjoint idempotent JSON over the triple's algebra.
        idempotent: PathBuf,
        /// Second triple; also checks the product law.
        #[arg(long)]
        times: Option<PathBuf>,
        /// Idempotent over the second triple (default: the unit).
        #[arg(long, requires = "times")]
        times_idempotent: Option<PathBuf>,
    },
    /// Count shuffles and estimate the volumes of the simplex decomposition.
    Decompose {
        /// Degree of the first factor of a `(p, q)`-shuffle.
        #[arg(long, requires = "q", conflicts_with = "cyclic")]
        p: Option<usize>,
        /// Degree of the second factor.
        #[arg(long, requires = "p")]
        q: Option<usize>,
        /// Block degrees of a cyclic shuffle, e.g. `1,1`.
        #[arg(long, value_delimiter = ',', required_unless_present = "p")]
        cyclic: Option<Vec<usize>>,
        /// Sample count (default: the configured Monte-Carlo samples).
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Time exact and Monte-Carlo evaluation of the JLO cochain.
    Bench,
}

/// Failure of a command: bad input (exit 2) or a failed check (exit 1).
enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Check(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 2) as u8);
        }
    };
    if let Some(threads) = std::env::var("JLOLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("could not cap worker threads: {e}");
        }
    }
    let outcome = load_config(&cli.global).and_then(|config| match cli.command {
        Command::Verify { trials } => verify_cmd(config, trials),
        Command::Index {
            triple,
            idempotent,
            times,
            times_idempotent,
        } => index_cmd(&triple, &idempotent, times.as_deref(), times_idempotent.as_deref()),
        Command::Decompose { p, q, cyclic, samples } => {
            decompose_cmd(&config, p.zip(q), cyclic, samples.unwrap_or(config.mc_samples))
        }
        Command::Bench => bench_cmd(&config),
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_config(g: &Global) -> Result<RunConfig, Failure> {
    let mut config = match &g.config {
        Some(path) => {
            RunConfig::from_json_file(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    if let Some(tolerance) = g.tolerance {
        config.tolerance = tolerance;
    }
    if let Some(samples) = g.mc_samples {
        config.mc_samples = samples;
    }
    if let Some(report) = &g.report {
        config.report_path = report.display().to_string();
    }
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(config)
}

fn verify_cmd(mut config: RunConfig, trials: Option<usize>) -> Outcome {
    if let Some(trials) = trials {
        config.trials = trials;
    }
    if config.trials == 0 {
        log::warn!("trials = 0: the report contains no checks");
    }
    let started = Instant::now();
    let report = verify::run(&config).map_err(|e| Failure::Usage(e.to_string()))?;
    let path = PathBuf::from(&config.report_path);
    let text_path = report
        .write(&path)
        .map_err(|e| Failure::Check(format!("{}: {e}", path.display())))?;
    out_raw(&report.to_text());
    out!(
        "report: {} and {} ({:.1} s)",
        path.display(),
        text_path.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(report.all_passed())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Prints both sides of the pairing; returns the Fredholm index if they agree.
fn report_pairing(label: &str, triple: &SpectralTripleFD, e: &Idempotent) -> Result<Option<i64>, Failure> {
    let report = index_pairing(triple, e, PAIRING_INTEGER_TOL)?;
    let fredholm = triple.compress_by_idempotent(e)?.0.index()?;
    let difference = report.value.re - fredholm as f64;
    out!(
        "{label}: pairing {:.12} (imag {:.1e}, degree {}), fredholm index {fredholm}, difference {:.3e}",
        report.value.re,
        report.value.im,
        report.truncation_degree,
        difference
    );
    let agrees = (report.value - num_complex::Complex64::new(fredholm as f64, 0.0)).norm() < PAIRING_INTEGER_TOL;
    Ok(agrees.then_some(fredholm))
}

fn index_cmd(triple: &Path, idempotent: &Path, times: Option<&Path>, times_idempotent: Option<&Path>) -> Outcome {
    let t1: SpectralTripleFD = read_json(triple)?;
    let e1: Idempotent = read_json(idempotent)?;
    if e1.dim() != t1.dim() * e1.k {
        return Err(Failure::Usage(format!(
            "idempotent of size {} does not act on H ⊗ C^{} with dim H = {}",
            e1.dim(),
            e1.k,
            t1.dim()
        )));
    }
    let i1 = report_pairing("triple", &t1, &e1)?;
    let Some(times) = times else {
        return Ok(i1.is_some());
    };
    let t2: SpectralTripleFD = read_json(times)?;
    let e2 = match times_idempotent {
        Some(path) => read_json(path)?,
        None => Idempotent::unit(t2.dim()),
    };
    if e2.dim() != t2.dim() * e2.k {
        return Err(Failure::Usage(
            "second idempotent does not act on the second triple".into(),
        ));
    }
    let i2 = report_pairing("second", &t2, &e2)?;
    let product = t1.product(&t2);
    let e12 = e1.tensor(&e2, &product, &t1, &t2)?;
    let i12 = report_pairing("product", &product, &e12)?;
    let law = match (i1, i2, i12) {
        (Some(a), Some(b), Some(c)) => {
            out!("product law: {a} × {b} = {} vs {c}", a * b);
            a * b == c
        }
        _ => false,
    };
    Ok(i1.is_some() && i2.is_some() && i12.is_some() && law)
}

fn print_stats(stats: &PartitionStats) -> bool {
    out!(
        "{:>24}  {:>8}  {:>10}  {:>10}  {:>10}",
        "region",
        "hits",
        "volume",
        "std err",
        "expected"
    );
    for r in &stats.regions {
        let map: Vec<String> = r.permutation.map().iter().map(|i| (i + 1).to_string()).collect();
        out!(
            "{:>24}  {:>8}  {:>10.6}  {:>10.2e}  {:>10.6}",
            format!("[{}]", map.join(" ")),
            r.hits,
            r.volume,
            r.std_error,
            r.expected
        );
    }
    out!(
        "total volume {:.6} ± {:.2e} (expected {:.6}); coverage failures {}; ties {}",
        stats.total_volume,
        stats.total_std_error,
        stats.expected_total,
        stats.coverage_failures,
        stats.ties
    );
    let sigma = stats.max_sigma();
    let ok = stats.coverage_failures == 0 && sigma <= VOLUME_SIGMAS;
    out!("largest deviation {sigma:.2}σ: {}", if ok { "pass" } else { "FAIL" });
    ok
}

fn decompose_cmd(config: &RunConfig, pq: Option<(usize, usize)>, cyclic: Option<Vec<usize>>, samples: u64) -> Outcome {
    if let Some((p, q)) = pq {
        if p + q > MAX_DECOMPOSE_DEGREE {
            return Err(Failure::Usage(format!(
                "p + q = {} exceeds {MAX_DECOMPOSE_DEGREE}",
                p + q
            )));
        }
        let count = enumerate_shuffles(p, q).len() as u128;
        let closed = binomial((p + q) as u64, p as u64);
        out!("({p},{q})-shuffles: {count} (closed form {closed})");
        let stats = shuffle_partition_volumes(p, q, samples, config.seed);
        return Ok(print_stats(&stats) && count == closed);
    }
    let blocks = cyclic.unwrap_or_default();
    let degree = blocks.len() + blocks.iter().sum::<usize>();
    if blocks.is_empty() || degree > MAX_DECOMPOSE_DEGREE {
        return Err(Failure::Usage(format!(
            "cyclic shuffles need 1 to {MAX_DECOMPOSE_DEGREE} total slots, got {degree}"
        )));
    }
    let list: Vec<String> = blocks.iter().map(usize::to_string).collect();
    let count = enumerate_cyclic_shuffles(&blocks)
        .map_err(|e| Failure::Usage(e.to_string()))?
        .len() as u128;
    let closed = cyclic_shuffle_count(&blocks);
    out!(
        "({})-cyclic shuffles, r = {}: {count} (closed form {closed})",
        list.join(","),
        blocks.len()
    );
    let stats = cyclic_partition_volumes(&blocks, samples, config.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(print_stats(&stats) && count == closed)
}

fn bench_cmd(config: &RunConfig) -> Outcome {
    let mut rng = Rng::seeded(config.seed);
    out!(
        "{:>6}  {:>6}  {:>12}  {:>12}  {:>12}  {:>10}",
        "dims",
        "degree",
        "exact (ms)",
        "mc (ms)",
        "|exact−mc|",
        "std err"
    );
    let mut ok = true;
    for &(e, o) in &config.dims {
        let space = GradedSpace::new(e, o);
        let triple = rng.triple(space, 1.0, 1);
        for degree in 0..=config.max_degree {
            let chain = rng.chain(&space, &[degree], 1);
            let started = Instant::now();
            let exact = JloEvaluator::exact(&triple).cochain(&chain)?;
            let exact_ms = started.elapsed().as_secs_f64() * 1e3;
            let started = Instant::now();
            let mc = JloEvaluator::new(
                &triple,
                Method::MonteCarlo {
                    samples: config.mc_samples,
                    seed: config.seed,
                },
            )
            .cochain(&chain)?;
            let mc_ms = started.elapsed().as_secs_f64() * 1e3;
            let gap = (exact.value - mc.value).norm();
            ok &= gap.is_finite();
            out!(
                "{:>6}  {degree:>6}  {exact_ms:>12.3}  {mc_ms:>12.3}  {gap:>12.3e}  {:>10.3e}",
                format!("{e}|{o}"),
                mc.std_error
            );
        }
    }
    Ok(ok)
}

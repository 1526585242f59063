//! Experiment runner: loads a TOML scenario, executes one subcommand, and
//! writes CSV artifacts plus a `manifest.json` run record into the output
//! directory.
//!
//! Exit codes: 0 success, 1 config/schema error, 2 validation failure,
//! 3 numerical-guard trip.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use ergolab::config::ExperimentConfig;
use ergolab::csvio;
use ergolab::entangle::{self, DsValidation, EntangledChain};
use ergolab::function::OVERSAMPLE;
use ergolab::limit;
use ergolab::semigroup::{self, SemigroupChain};
use ergolab::series::geometric_checkpoints;
use ergolab::volterra;
use ergolab::{jdlg, Basis, Error, FunctionVector};

const EXIT_CONFIG: i32 = 1;
const EXIT_VALIDATION: i32 = 2;
const EXIT_GUARD: i32 = 3;

#[derive(Parser)]
#[command(name = "ergolab", version, about = "Entangled ergodic average laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cesàro average (1/N) sum of T_a^n A_{a-1} ... A_0 T_0^n f, plain or absolute.
    Average(Common),
    /// Reversible/stable splitting of T_0.
    Decompose(Common),
    /// Twisted compactness certificate for the Volterra remainder.
    VolterraCert {
        #[command(flatten)]
        common: Common,
        /// Remainder bound; overrides the config's [volterra] epsilon.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Closed-form limit of the entangled average, compared against the empirical series.
    Predict(Common),
    /// Continuous-time Cesàro integral over a semigroup chain.
    Semigroup(Common),
    /// Dunford-Schwartz contraction and fixed-space checks on the chain operators.
    Validate(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Average(c)
            | Command::Decompose(c)
            | Command::Predict(c)
            | Command::Semigroup(c)
            | Command::Validate(c) => c,
            Command::VolterraCert { common, .. } => common,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; env ERGOLAB_OUT is consulted when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; env ERGOLAB_THREADS is consulted when absent.
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated checkpoint list overriding the config.
    #[arg(long)]
    checkpoints: Option<String>,
}

struct Emitter {
    dir: PathBuf,
    files: Vec<(String, String, usize)>,
}

impl Emitter {
    fn new(dir: PathBuf) -> Result<Self, Failure> {
        fs::create_dir_all(&dir)
            .map_err(|e| Failure::config(format!("cannot create output dir: {e}")))?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn emit(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        fs::write(self.dir.join(name), body)
            .map_err(|e| Failure::config(format!("cannot write {name}: {e}")))?;
        self.files
            .push((name.to_string(), hex_sha256(body.as_bytes()), body.len()));
        Ok(())
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: String) -> Self {
        Failure { code: EXIT_CONFIG, message }
    }

    fn validation(message: String) -> Self {
        Failure { code: EXIT_VALIDATION, message }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::CapExceeded { .. }
            | Error::ClusterAmbiguity(_)
            | Error::ToleranceOverlap { .. }
            | Error::Instability(_)
            | Error::IllConditionedEigenbasis(_)
            | Error::NotPowerBounded(_)
            | Error::EnumerationTooLarge(_) => EXIT_GUARD,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn main() {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => {}
        Err(f) => {
            eprintln!("error: {}", f.message);
            std::process::exit(f.code);
        }
    }
}

fn run(command: &Command) -> Result<(), Failure> {
    let started = Instant::now();
    let common = command.common();

    let threads = match common.threads {
        Some(k) => Some(k),
        None => std::env::var("ERGOLAB_THREADS")
            .ok()
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Failure::config(format!("bad ERGOLAB_THREADS value `{v}`")))
            })
            .transpose()?,
    };
    if let Some(k) = threads {
        if k == 0 {
            return Err(Failure::config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }

    let out_dir = common
        .out
        .clone()
        .or_else(|| std::env::var("ERGOLAB_OUT").ok().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    // volterra-cert with --epsilon can run without a config file; everything
    // else needs a scenario.
    let config_text = match (&common.config, command) {
        (Some(path), _) => fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?,
        // Without a scenario only the certificate itself is computed; the
        // randomized verification needs a config with a seed.
        (None, Command::VolterraCert { epsilon: Some(eps), .. }) => format!(
            "schema_version = 1\nscenario = \"volterra-cert\"\n\n[volterra]\nepsilon = {eps}\ntrials = 0\n"
        ),
        _ => return Err(Failure::config("--config is required".into())),
    };
    let mut config = ExperimentConfig::parse(&config_text).map_err(Failure::from)?;
    if let Some(seed) = common.seed {
        config.seed = Some(seed);
    }
    if config.uses_randomness() && config.seed.is_none() {
        return Err(Failure::config(
            "a seed is mandatory when randomness is used".into(),
        ));
    }

    let mut emitter = Emitter::new(out_dir)?;
    match command {
        Command::Average(c) => cmd_average(&config, c, &mut emitter)?,
        Command::Decompose(_) => cmd_decompose(&config, &mut emitter)?,
        Command::VolterraCert { epsilon, .. } => {
            cmd_volterra_cert(&config, *epsilon, &mut emitter)?
        }
        Command::Predict(c) => cmd_predict(&config, c, &mut emitter)?,
        Command::Semigroup(c) => cmd_semigroup(&config, c, &mut emitter)?,
        Command::Validate(_) => cmd_validate(&config, &mut emitter)?,
    }

    let manifest = serde_json::json!({
        "scenario": config.scenario,
        "config_sha256": hex_sha256(config_text.as_bytes()),
        "seed": config.seed,
        "threads": threads,
        "versions": {
            "ergolab": env!("CARGO_PKG_VERSION"),
            "schema": ergolab::config::SCHEMA_VERSION,
        },
        "wall_time_ms": started.elapsed().as_millis() as u64,
        "files": emitter
            .files
            .iter()
            .map(|(name, sha, bytes)| serde_json::json!({
                "name": name,
                "sha256": sha,
                "bytes": bytes,
            }))
            .collect::<Vec<_>>(),
    });
    let body = serde_json::to_string_pretty(&manifest)
        .expect("manifest serialization cannot fail");
    fs::write(emitter.dir.join("manifest.json"), body)
        .map_err(|e| Failure::config(format!("cannot write manifest.json: {e}")))?;
    Ok(())
}

fn parse_checkpoints_u64(raw: &str) -> Result<Vec<u64>, Failure> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Failure::config(format!("bad checkpoint `{s}`")))
        })
        .collect()
}

fn parse_checkpoints_f64(raw: &str) -> Result<Vec<f64>, Failure> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Failure::config(format!("bad checkpoint `{s}`")))
        })
        .collect()
}

fn discrete_checkpoints(
    config: &ExperimentConfig,
    common: &Common,
    n: u64,
) -> Result<Vec<u64>, Failure> {
    if let Some(raw) = &common.checkpoints {
        return parse_checkpoints_u64(raw);
    }
    Ok(config
        .run
        .checkpoints
        .clone()
        .unwrap_or_else(|| geometric_checkpoints(n)))
}

fn horizon_n(config: &ExperimentConfig) -> Result<u64, Failure> {
    config
        .run
        .n
        .ok_or_else(|| Failure::config("this command needs run.n".into()))
}

fn build_chain(config: &ExperimentConfig) -> Result<EntangledChain, Failure> {
    let (t_ops, a_ops) = config.build_chain()?;
    let validation = if config.run.validate_chain {
        DsValidation::Empirical {
            trials: config.run.ds_trials(),
            tol: config.run.ds_tol(),
            seed: config.seed.unwrap_or(0),
        }
    } else {
        DsValidation::Skip
    };
    Ok(EntangledChain::new(t_ops, a_ops, validation)?)
}

fn build_input(config: &ExperimentConfig, chain: &EntangledChain) -> Result<FunctionVector, Failure> {
    let spec = config
        .input
        .as_ref()
        .ok_or_else(|| Failure::config("this command needs an [input] section".into()))?;
    Ok(spec.build(
        chain.basis(),
        config.seed,
        chain.t_ops().first(),
        config.run.tol_unimodular(),
    )?)
}

fn default_g_eval(config: &ExperimentConfig, basis: Basis) -> usize {
    config.run.g_eval.unwrap_or(match basis {
        Basis::Spectral { cutoff } => OVERSAMPLE * (2 * cutoff + 1),
        Basis::Grid { size } => size,
    })
}

fn cmd_average(
    config: &ExperimentConfig,
    common: &Common,
    emitter: &mut Emitter,
) -> Result<(), Failure> {
    let chain = build_chain(config)?;
    let f = build_input(config, &chain)?;
    let n = horizon_n(config)?;
    let checkpoints = discrete_checkpoints(config, common, n)?;

    if let Some(weight) = &config.weight {
        // A Bohr weight sequence rides on T_0 alone.
        let w = weight.build(n)?;
        let series = entangle::weighted_average(&chain.t_ops()[0], &f, &w, n, &checkpoints)?;
        emitter.emit("weights.csv", &csvio::weights_csv(&w))?;
        emitter.emit("series_detail.csv", &csvio::series_detail_csv(&series))?;
        emitter.emit("series_summary.csv", &csvio::series_summary_csv(&series))?;
        return Ok(());
    }

    let series = if config.run.absolute {
        let g_eval = default_g_eval(config, chain.basis());
        entangle::cesaro_abs_average(&chain, &f, n, &checkpoints, g_eval)?
    } else {
        entangle::cesaro_average(&chain, &f, n, &checkpoints)?
    };
    emitter.emit("series_detail.csv", &csvio::series_detail_csv(&series))?;
    emitter.emit("series_summary.csv", &csvio::series_summary_csv(&series))?;
    Ok(())
}

fn cmd_decompose(config: &ExperimentConfig, emitter: &mut Emitter) -> Result<(), Failure> {
    let (t_ops, _) = config.build_chain()?;
    let t0 = t_ops
        .first()
        .ok_or_else(|| Failure::config("decompose needs at least one chain.t operator".into()))?;
    let d = jdlg::decompose(t0, config.run.tol_unimodular())?;
    emitter.emit("decomposition.csv", &csvio::decomposition_csv(&d))?;
    Ok(())
}

fn cmd_volterra_cert(
    config: &ExperimentConfig,
    epsilon_flag: Option<f64>,
    emitter: &mut Emitter,
) -> Result<(), Failure> {
    let section = config
        .volterra
        .as_ref()
        .ok_or_else(|| Failure::config("volterra-cert needs a [volterra] section".into()))?;
    let epsilon = epsilon_flag.unwrap_or(section.epsilon);
    let cert = volterra::twisted_compactness_certificate(epsilon, section.m_cap)?;
    emitter.emit("certificate.csv", &csvio::certificate_csv(&cert))?;

    if section.trials > 0 {
        let seed = config.seed.ok_or_else(|| {
            Failure::config("certificate verification is randomized and needs a seed".into())
        })?;
        let parts = volterra::build_volterra(section.cutoff, section.k)?;
        let mut rng = ergolab::rng::substream(seed, "volterra-verify");
        let report = volterra::verify_certificate(&cert, &parts, section.trials, &mut rng);
        let passed = report.violations == 0;
        emitter.emit("certificate_report.csv", &csvio::certificate_report_csv(&report))?;
        let mut a2_rng = ergolab::rng::substream(seed, "volterra-a2");
        let a2 = volterra::a2_bound_check(&parts, section.trials, &mut a2_rng);
        let a2_passed = a2.passed;
        emitter.emit("a2_report.csv", &csvio::a2_report_csv(&a2))?;
        if !passed || !a2_passed {
            return Err(Failure::validation(
                "certificate verification recorded violations".into(),
            ));
        }
    }
    Ok(())
}

fn cmd_predict(
    config: &ExperimentConfig,
    common: &Common,
    emitter: &mut Emitter,
) -> Result<(), Failure> {
    let chain = build_chain(config)?;
    let f = build_input(config, &chain)?;
    let n = horizon_n(config)?;
    let checkpoints = discrete_checkpoints(config, common, n)?;
    let form = config.run.limit_form()?;

    let mut spectra = Vec::new();
    for t in chain.t_ops() {
        let d = jdlg::decompose(t, config.run.tol_unimodular())?;
        spectra.push(limit::point_spectrum(t, &d, config.run.tol_sep())?);
    }
    let refs: Vec<&limit::PointSpectrum> = spectra.iter().collect();
    let resonance = limit::resonant_tuples(&refs, config.run.tol_match())?;
    let predicted = limit::predict_limit(&chain, &f, &refs, &resonance, form)?;
    let series = entangle::cesaro_average(&chain, &f, n, &checkpoints)?;
    let report = limit::compare_limit(&predicted, &series)?;

    emitter.emit("limit.csv", &csvio::function_csv(&predicted))?;
    emitter.emit("resonance.csv", &csvio::resonance_csv(&refs, &resonance))?;
    emitter.emit("series_detail.csv", &csvio::series_detail_csv(&series))?;
    emitter.emit("compare.csv", &csvio::compare_csv(&report))?;
    Ok(())
}

fn cmd_semigroup(
    config: &ExperimentConfig,
    common: &Common,
    emitter: &mut Emitter,
) -> Result<(), Failure> {
    let section = config
        .semigroup
        .as_ref()
        .ok_or_else(|| Failure::config("semigroup needs a [semigroup] section".into()))?;
    let generators = section
        .generators
        .iter()
        .map(|g| g.build())
        .collect::<Result<Vec<_>, _>>()?;
    let a_ops = section
        .a
        .iter()
        .enumerate()
        .map(|(i, s)| s.build(config.seed, &format!("semigroup-a{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let basis = generators[0].basis();
    let chain = SemigroupChain::new(generators, a_ops, section.horizon, section.step)?;
    let f = config
        .input
        .as_ref()
        .ok_or_else(|| Failure::config("semigroup needs an [input] section".into()))?
        .build(basis, config.seed, None, config.run.tol_unimodular())?;

    let checkpoints = match &common.checkpoints {
        Some(raw) => parse_checkpoints_f64(raw)?,
        None => section.checkpoints.clone(),
    };
    let series = if section.absolute {
        let g_eval = section.g_eval.unwrap_or_else(|| match basis {
            Basis::Spectral { cutoff } => OVERSAMPLE * (2 * cutoff + 1),
            Basis::Grid { size } => size,
        });
        semigroup::cesaro_abs_integral(&chain, &f, &checkpoints, g_eval)?
    } else {
        semigroup::cesaro_integral(&chain, &f, &checkpoints)?
    };
    emitter.emit("series_detail.csv", &csvio::series_detail_csv(&series))?;
    emitter.emit("series_summary.csv", &csvio::series_summary_csv(&series))?;
    Ok(())
}

fn cmd_validate(config: &ExperimentConfig, emitter: &mut Emitter) -> Result<(), Failure> {
    let (t_ops, a_ops) = config.build_chain()?;
    let seed = config.seed.unwrap_or(0);
    let mut all_passed = true;
    let mut summary = String::from("operator,kind,ds_passed,fix_trivial\n");
    for (i, t) in t_ops.iter().enumerate() {
        let mut rng = ergolab::rng::substream(seed, &format!("validate-t{i}"));
        let report = t.validate_dunford_schwartz(config.run.ds_trials(), config.run.ds_tol(), &mut rng);
        all_passed &= report.passed;
        emitter.emit(&format!("ds_t{i}.csv"), &csvio::ds_report_csv(&report))?;
        let fix_trivial = t
            .check_fix_modulus_trivial(config.run.tol_unimodular())
            .map(|b| b.to_string())
            .unwrap_or_else(|_| "unsupported".into());
        summary.push_str(&format!("t{i},powered,{},{fix_trivial}\n", report.passed));
    }
    for (i, a) in a_ops.iter().enumerate() {
        let mut rng = ergolab::rng::substream(seed, &format!("validate-a{i}"));
        let report = a.validate_dunford_schwartz(config.run.ds_trials(), config.run.ds_tol(), &mut rng);
        all_passed &= report.passed;
        emitter.emit(&format!("ds_a{i}.csv"), &csvio::ds_report_csv(&report))?;
        summary.push_str(&format!("a{i},intertwiner,{},-\n", report.passed));
    }
    emitter.emit("validate_summary.csv", &summary)?;
    if !all_passed {
        return Err(Failure::validation(
            "a Dunford-Schwartz contraction check failed".into(),
        ));
    }
    Ok(())
}

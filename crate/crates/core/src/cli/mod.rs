//! Command-line front end.
//!
//! Every command reads files, writes plot-ready CSV or JSON into `--out`,
//! and records a [`RunManifest`]. Exit status: `0` success, `2` invalid
//! input, `3` numerical failure, `1` when outputs cannot be written.

mod config;
mod manifest;

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

pub use config::{GridSpec, RunConfig, SynthesisSpec};
pub use manifest::{InputDigest, RunManifest, MANIFEST_FILE};

use crate::emulator::{self, EmulationConfig};
use crate::error::{Error, Result};
use crate::estimation::{
    consistency_report, fit_parameters, FitBounds, FitOptions, FitParameters, FitResult,
    Measurements, ParametricDataset, ReportTolerances,
};
use crate::loop_algebra::{closed_loop_sweep, frequency_sweep, to_db};
use crate::synthesis::optimize_gain;
use crate::trace::linear_grid;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OUTPUT: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "coherent-feedback", version, about = "Coherent-feedback disturbance rejection: sweeps, synthesis, fitting and emulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Open-loop, closed-loop and ratio traces over a detuning grid.
    Sweep {
        #[command(flatten)]
        io: ConfigIo,
        #[command(flatten)]
        grid: GridFlags,
    },
    /// Optimal compensator gain and phase.
    Synthesize {
        #[command(flatten)]
        io: ConfigIo,
        /// Also report the worst-case ratio over |detuning| <= EDGE (MHz).
        #[arg(long, value_name = "EDGE")]
        band: Option<f64>,
    },
    /// Fit loop parameters to a resonant max/min dataset.
    Fit {
        /// CSV with columns eta_K, ratio_max, ratio_min.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// JSON with gamma_p and optional bounds, symmetric_couplers, initial_guess.
        #[arg(long, value_name = "PATH")]
        bounds: PathBuf,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Check a fit against independent measurements.
    Report {
        #[arg(long, value_name = "PATH")]
        fit: PathBuf,
        #[arg(long, value_name = "PATH")]
        measured: PathBuf,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Synthetic measurement traces.
    Emulate {
        #[command(flatten)]
        io: ConfigIo,
        #[arg(long, value_enum, value_name = "NAME")]
        scenario: Scenario,
        /// Overrides emulation.detector_noise_seed.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
}

#[derive(Debug, Args)]
pub struct ConfigIo {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridFlags {
    #[arg(long, value_name = "MHZ", allow_hyphen_values = true)]
    pub grid_min: Option<f64>,
    #[arg(long, value_name = "MHZ", allow_hyphen_values = true)]
    pub grid_max: Option<f64>,
    #[arg(long, value_name = "N")]
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    #[value(name = "swept-sine", alias = "SWEPT_SINE", alias = "swept_sine")]
    SweptSine,
    #[value(name = "phase-scan", alias = "PHASE_SCAN", alias = "phase_scan")]
    PhaseScan,
    #[value(name = "lock", alias = "LOCK")]
    Lock,
    /// Resonant max/min ratios over a gain list, in the `fit` input format.
    #[value(name = "parametric", alias = "PARAMETRIC")]
    Parametric,
}

impl Scenario {
    fn file_name(self) -> &'static str {
        match self {
            Scenario::SweptSine => "swept_sine.csv",
            Scenario::PhaseScan => "phase_scan.csv",
            Scenario::Lock => "lock.csv",
            Scenario::Parametric => "parametric.csv",
        }
    }
}

enum Failure {
    /// Bad input or a failed computation; the error decides the code.
    Run(Error),
    Output(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Run(e.into())
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code. Diagnostics go to stderr, summaries to stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_VALIDATION
            }
        }
        Err(Failure::Output(e)) => {
            eprintln!("error writing output: {e}");
            EXIT_OUTPUT
        }
    }
}

fn execute(command: Command) -> CmdResult {
    match command {
        Command::Sweep { io, grid } => cmd_sweep(&io, &grid),
        Command::Synthesize { io, band } => cmd_synthesize(&io, band),
        Command::Fit { data, bounds, out } => cmd_fit(&data, &bounds, &out),
        Command::Report { fit, measured, out } => cmd_report(&fit, &measured, &out),
        Command::Emulate { io, scenario, seed } => cmd_emulate(&io, scenario, seed),
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_input(path)?)
        .map_err(|_| Error::validation(path.display().to_string(), "not valid UTF-8"))
}

/// Output files of one run, collected for the manifest.
struct Outputs<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> std::result::Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Output(Error::io(dir, e)))?;
        Ok(Outputs {
            dir,
            names: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        f: impl FnOnce(BufWriter<File>) -> Result<()>,
    ) -> std::result::Result<(), Failure> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| Failure::Output(Error::io(&path, e)))?;
        f(BufWriter::new(file)).map_err(Failure::Output)?;
        self.names.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl serde::Serialize) -> std::result::Result<(), Failure> {
        self.write(name, |mut w| {
            serde_json::to_writer_pretty(&mut w, value)?;
            std::io::Write::write_all(&mut w, b"\n")
                .and_then(|_| std::io::Write::flush(&mut w))
                .map_err(|e| Error::io(name, e))
        })
    }

    fn write_text(&mut self, name: &str, text: &str) -> std::result::Result<(), Failure> {
        self.write(name, |mut w| {
            std::io::Write::write_all(&mut w, text.as_bytes())
                .and_then(|_| std::io::Write::flush(&mut w))
                .map_err(|e| Error::io(name, e))
        })
    }

    fn finish(self, command: &str, digest: InputDigest, inputs: Value) -> std::result::Result<(), Failure> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_digest: digest.finish(),
            outputs: self.names,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs,
        };
        manifest.write(self.dir).map_err(Failure::Output)?;
        manifest.verify(self.dir).map_err(Failure::Output)
    }
}

fn load_config(path: &Path, command: &str) -> Result<(RunConfig, InputDigest)> {
    let bytes = read_input(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::validation("config", "not valid UTF-8"))?;
    let cfg = RunConfig::parse(text)?;
    let mut digest = InputDigest::default();
    digest.add("command", command.as_bytes());
    digest.add("config", &bytes);
    Ok((cfg, digest))
}

fn add_flags(digest: &mut InputDigest, flags: &Value) {
    digest.add("flags", flags.to_string().as_bytes());
}

fn cmd_sweep(io: &ConfigIo, flags: &GridFlags) -> CmdResult {
    let (cfg, mut digest) = load_config(&io.config, "sweep")?;
    let comp = cfg.compensator()?;
    let env = cfg.environment()?;
    let mut grid = cfg.grid(comp.plant().gamma_p())?;
    grid.min = flags.grid_min.unwrap_or(grid.min);
    grid.max = flags.grid_max.unwrap_or(grid.max);
    grid.points = flags.grid_points.unwrap_or(grid.points);
    let flag_value = json!({"grid_min": grid.min, "grid_max": grid.max, "grid_points": grid.points});
    add_flags(&mut digest, &flag_value);

    let detunings = linear_grid(grid.min, grid.max, grid.points)?;
    let sweep = frequency_sweep(&comp, &env, &detunings, true)?;
    let closed = closed_loop_sweep(&comp, &env, &detunings)?;
    let open = sweep.open_loop.expect("requested");

    let mut out = Outputs::new(&io.out)?;
    out.write("open_loop.csv", |w| open.write_csv(w))?;
    out.write("closed_loop.csv", |w| closed.write_csv(w))?;
    out.write("ratio.csv", |w| sweep.ratio.write_csv(w))?;
    out.finish("sweep", digest, json!({"config": cfg.as_value(), "flags": flag_value}))?;

    let ratio = sweep.ratio.real().expect("real trace");
    let (i, min) = ratio
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, r)| if *r < acc.1 { (i, *r) } else { acc });
    println!(
        "minimum ratio {min:.6} ({:.3} dB) at {:.4} MHz",
        to_db(min),
        detunings[i]
    );
    Ok(EXIT_OK)
}

fn cmd_synthesize(io: &ConfigIo, band: Option<f64>) -> CmdResult {
    let (cfg, mut digest) = load_config(&io.config, "synthesize")?;
    let plant = cfg.plant()?;
    let eta_gamma = cfg.eta_gamma()?;
    let mu = cfg.environment()?.mu();
    let mut spec = cfg.synthesis()?;
    if band.is_some() {
        spec.options.report_band = band;
    }
    let flag_value = json!({"band": band});
    add_flags(&mut digest, &flag_value);

    let result = optimize_gain(&plant, eta_gamma, mu, spec.target, spec.options)?;
    let mut out = Outputs::new(&io.out)?;
    out.write_json("synthesis.json", &result)?;
    out.finish("synthesize", digest, json!({"config": cfg.as_value(), "flags": flag_value}))?;
    println!("{}", serde_json::to_string(&result).map_err(Error::from)?);
    Ok(EXIT_OK)
}

/// Contents of the `--bounds` file of `fit`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitRequest {
    gamma_p: f64,
    #[serde(default)]
    bounds: Option<FitBounds>,
    #[serde(default)]
    symmetric_couplers: bool,
    #[serde(default)]
    max_iterations: Option<usize>,
    #[serde(default)]
    initial_guess: Option<FitParameters>,
}

fn cmd_fit(data: &Path, bounds: &Path, out_dir: &Path) -> CmdResult {
    let data_bytes = read_input(data)?;
    let request_text = read_text(bounds)?;
    let request: FitRequest = serde_json::from_str(&request_text)?;
    let dataset = ParametricDataset::read_csv(data_bytes.as_slice(), request.gamma_p)?;
    let fit_bounds = request.bounds.unwrap_or_else(|| FitBounds::around(request.gamma_p));
    let mut options = FitOptions {
        symmetric_couplers: request.symmetric_couplers,
        ..Default::default()
    };
    if let Some(n) = request.max_iterations {
        options.max_iterations = n;
    }

    let mut digest = InputDigest::default();
    digest.add("command", b"fit");
    digest.add("data", &data_bytes);
    digest.add("bounds", request_text.as_bytes());

    let (result, code) = match fit_parameters(&dataset, &fit_bounds, request.initial_guess, &options) {
        Ok(r) => (r, EXIT_OK),
        Err(Error::NotConverged { iterations, best }) => {
            eprintln!("error: fit did not converge after {iterations} iterations; best estimate written");
            (*best, EXIT_NUMERICAL)
        }
        Err(e) => return Err(e.into()),
    };

    let mut out = Outputs::new(out_dir)?;
    out.write_json("fit.json", &result)?;
    out.finish(
        "fit",
        digest,
        json!({"gamma_p": request.gamma_p, "bounds": fit_bounds, "options": options}),
    )?;
    if result.rank_deficient {
        eprintln!("warning: the data do not determine every parameter (rank-deficient Jacobian)");
    }
    println!(
        "eta_gamma {:.6}  mu {:.6}  k1 {:.6}  k4 {:.6}  rms residual {:.3e}",
        result.eta_gamma, result.mu, result.k1, result.k4, result.residual
    );
    Ok(code)
}

#[derive(Debug, Deserialize)]
struct MeasuredFile {
    #[serde(flatten)]
    measured: Measurements,
    #[serde(default)]
    tolerances: Option<ReportTolerances>,
}

fn cmd_report(fit: &Path, measured: &Path, out_dir: &Path) -> CmdResult {
    let fit_text = read_text(fit)?;
    let measured_text = read_text(measured)?;
    let fit_result: FitResult = serde_json::from_str(&fit_text)?;
    let m: MeasuredFile = serde_json::from_str(&measured_text)?;
    let tol = m.tolerances.unwrap_or_default();

    let mut digest = InputDigest::default();
    digest.add("command", b"report");
    digest.add("fit", fit_text.as_bytes());
    digest.add("measured", measured_text.as_bytes());

    let report = consistency_report(&fit_result, &m.measured, &tol);
    let text = report.to_string();
    let mut out = Outputs::new(out_dir)?;
    out.write_text("report.txt", &text)?;
    out.write_json("report.json", &report)?;
    out.finish(
        "report",
        digest,
        json!({"fit": fit_result, "measured": m.measured, "tolerances": tol}),
    )?;
    print!("{text}");
    Ok(EXIT_OK)
}

fn cmd_emulate(io: &ConfigIo, scenario: Scenario, seed: Option<u64>) -> CmdResult {
    let (cfg, mut digest) = load_config(&io.config, "emulate")?;
    let mut emulation: EmulationConfig = cfg.emulation()?;
    if let Some(s) = seed {
        emulation.detector_noise_seed = s;
    }
    let flag_value = json!({
        "scenario": scenario.to_possible_value().map(|v| v.get_name().to_string()),
        "seed": seed,
    });
    add_flags(&mut digest, &flag_value);

    let name = scenario.file_name();
    let mut out = Outputs::new(&io.out)?;
    match scenario {
        Scenario::SweptSine => {
            let t = emulator::emulate_swept_sine(&cfg.compensator()?, &cfg.environment()?, &emulation)?;
            out.write(name, |w| t.write_csv(w))?;
        }
        Scenario::PhaseScan => {
            let ramp = emulator::phase_ramp(0.0, cfg.ramp_periods()?, emulation.sample_count)?;
            let t = emulator::emulate_phase_scan(
                &cfg.compensator()?,
                cfg.environment()?.mu(),
                &emulation,
                &ramp,
            )?;
            out.write(name, |w| t.write_csv(w))?;
        }
        Scenario::Lock => {
            let ramp = linear_grid(-std::f64::consts::PI, std::f64::consts::PI, emulation.sample_count)?;
            let t = emulator::emulate_lock(&cfg.compensator()?, cfg.environment()?.mu(), &ramp)?;
            out.write(name, |w| t.write_csv(w))?;
        }
        Scenario::Parametric => {
            let data = emulator::emulate_parametric(
                &cfg.plant()?,
                cfg.eta_gamma()?,
                cfg.environment()?.mu(),
                &cfg.parametric_gains()?,
                &emulation,
            )?;
            out.write(name, |w| data.write_csv(w))?;
        }
    }
    out.finish(
        "emulate",
        digest,
        json!({"config": cfg.as_value(), "emulation": emulation, "flags": flag_value}),
    )?;
    println!("wrote {}", io.out.join(name).display());
    Ok(EXIT_OK)
}

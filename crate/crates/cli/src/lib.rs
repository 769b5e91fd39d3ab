//! Front end for the `polycert` binary: argument parsing, config ingestion,
//! seeding and file emission. Every subcommand maps to one function in
//! [`polycert`] and returns an [`Outcome`] that fixes the exit code.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use polycert::barrier::{
    random_environment, run_table1, simulate, task_rng, EnvConfig, Environment, Planner, SimConfig,
    Table1Config, UavState, WindPolicy,
};
use polycert::certify::{
    constrain_in_cone, finish_putinar, add_putinar, verify_certificate, CertifyError, ConeTag,
    LinPoly, PutinarCertificate, SemialgebraicSet, VERIFY_TOL,
};
use polycert::conic::{self, BackendHandle, ConeKind, ConicProgram, SolveOptions, SolveStatus};
use polycert::coverage::{self, CoverageError, CoverageInstance};
use polycert::roa::{self, PolySystem, RoaError, RoaOptions};
use polycert::Polynomial;
use rand::RngCore;
use serde::Deserialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "polycert", version, about = "DSOS/SDSOS/SOS certificate compiler")]
pub struct Cli {
    /// Conic backend (clarabel, clarabel-socp); overrides POLYCERT_BACKEND and the config file.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// TOML file with defaults for backend, seed and solver settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Interior-point iteration limit.
    #[arg(long, global = true)]
    pub max_iter: Option<u32>,
    /// Per-solve time limit in seconds.
    #[arg(long, global = true)]
    pub time_limit: Option<f64>,
    /// Print solver progress.
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Certify nonnegativity of a polynomial, optionally on a semialgebraic set.
    Certify(CertifyArgs),
    /// Re-check serialized certificates without a solver.
    Verify(VerifyArgs),
    /// Minimum-rate coverage with certified regions.
    Coverage(CoverageArgs),
    /// Closed-loop planner simulation in one obstacle field.
    BarrierSim(BarrierSimArgs),
    /// Primitive-1 feasibility sweep over seeded two-obstacle environments.
    BarrierTable1(Table1Args),
    /// Region-of-attraction estimate by bilinear alternation.
    Roa(RoaArgs),
}

#[derive(Args, Debug)]
#[command(args_conflicts_with_subcommands = true)]
pub struct CertifyArgs {
    #[command(subcommand)]
    pub verify: Option<CertifySub>,
    /// Problem file: `nvars`, `poly`, and optional `g` (≥ 0) / `h` (= 0) lines.
    #[arg(long)]
    pub poly: Option<PathBuf>,
    #[arg(long)]
    pub cone: Option<String>,
    /// Gram half-degree when there are no constraints.
    #[arg(long)]
    pub half_degree: Option<u32>,
    /// Degree of each constraint multiplier.
    #[arg(long, default_value_t = 0)]
    pub mult_degree: u32,
    /// Where to write the certificate.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum CertifySub {
    /// Same as the top-level `verify`.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Files holding one or more certificates.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, default_value_t = VERIFY_TOL)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct CoverageArgs {
    /// Built-in instance name or instance file.
    #[arg(long, default_value = "paper-fig1")]
    pub instance: String,
    #[arg(long, default_value_t = 0)]
    pub mult_degree: u32,
    #[arg(long)]
    pub cone: Option<String>,
    /// Keep only this transmitter (0-based) with its bound lifted.
    #[arg(long)]
    pub transmitter: Option<usize>,
    /// Solution file with rates and certificates.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Energy grid CSV.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = coverage::DEFAULT_RESOLUTION)]
    pub resolution: usize,
}

#[derive(Args, Debug)]
pub struct BarrierSimArgs {
    /// Environment file; a random field is drawn from the seed when absent.
    #[arg(long)]
    pub env: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Task index selecting the random field for a seed.
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    #[arg(long)]
    pub cone: Option<String>,
    /// `0.05`, `-0.05`, `uniform` or `switching:<period>`.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub wind: String,
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    /// Trajectory CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Table1Args {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated cones.
    #[arg(long, default_value = "sdsos,sos")]
    pub cones: String,
    /// Environments per yaw.
    #[arg(long, default_value_t = 100)]
    pub envs: usize,
    /// Comma-separated initial yaws in degrees.
    #[arg(long, default_value = "0,10,20,30,40")]
    pub psi: String,
    /// Success-rate CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-call CSV including solve times.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Median solve time per cone.
    #[arg(long)]
    pub timings: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RoaArgs {
    /// `cubic`, `van-der-pol`, `servo`, `quadrotor` or a system file.
    #[arg(long)]
    pub system: String,
    #[arg(long)]
    pub cone: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub v_degree: u32,
    #[arg(long, default_value_t = 4)]
    pub l_degree: u32,
    #[arg(long, default_value_t = 3)]
    pub u_degree: u32,
    #[arg(long, default_value_t = 30)]
    pub max_iters: usize,
    /// Work in coordinates that diagonalise the Hessians of V and −V̇.
    #[arg(long)]
    pub transform: bool,
    /// Build the first multiplier program and report its size without solving.
    #[arg(long)]
    pub assemble_only: bool,
    /// Result file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Simulate this many samples of the certified set.
    #[arg(long, default_value_t = 0)]
    pub check: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Slice CSV over two states, e.g. `0,1`.
    #[arg(long)]
    pub slice: Option<String>,
    #[arg(long, default_value = "-3,3,-3,3", allow_hyphen_values = true)]
    pub bbox: String,
    #[arg(long, default_value_t = 200)]
    pub resolution: usize,
}

/// Settings read from `--config`; command-line flags take precedence.
#[derive(Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backend: Option<String>,
    pub cone: Option<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: Option<u32>,
    pub time_limit: Option<f64>,
    pub verbose: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = read(path)?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(PathBuf, std::io::Error),
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Run(m) => f.write_str(m),
        }
    }
}

/// Result of a subcommand that did not crash.
#[derive(Debug, PartialEq)]
pub enum Outcome {
    Ok,
    Infeasible(String),
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::Run(e.to_string())
}

/// Resolved global settings.
pub struct Context {
    pub config: RunConfig,
    pub backend_name: String,
    pub backend: BackendHandle,
    pub solve: SolveOptions,
}

impl Context {
    fn new(cli: &Cli) -> Result<Context, CliError> {
        let config = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let env = std::env::var(conic::BACKEND_ENV).ok().filter(|s| !s.is_empty());
        let backend_name = cli
            .backend
            .clone()
            .or(env)
            .or(config.backend.clone())
            .unwrap_or_else(|| "clarabel".into());
        let backend = conic::backend_by_name(&backend_name).map_err(|e| {
            CliError::Usage(format!("{e} (known: {})", conic::BACKENDS.join(", ")))
        })?;
        let mut solve = SolveOptions::default();
        if let Some(m) = cli.max_iter.or(config.solver.max_iter) {
            solve.max_iter = m;
        }
        solve.time_limit = cli.time_limit.or(config.solver.time_limit);
        solve.verbose = cli.verbose || config.solver.verbose.unwrap_or(false);
        Ok(Context {
            config,
            backend_name,
            backend,
            solve,
        })
    }

    fn seed(&self, flag: Option<u64>, default: u64) -> u64 {
        flag.or(self.config.seed).unwrap_or(default)
    }

    /// Parses a cone and checks the backend can carry it before any solve.
    fn cone(&self, flag: Option<&str>, default: ConeTag) -> Result<ConeTag, CliError> {
        let cone = match flag.or(self.config.cone.as_deref()) {
            Some(s) => ConeTag::from_str(s).map_err(|e| CliError::Usage(e.to_string()))?,
            None => default,
        };
        let kind = match cone {
            ConeTag::Dsos => ConeKind::Nonnegative,
            ConeTag::Sdsos => ConeKind::RotatedSecondOrder,
            ConeTag::Sos => ConeKind::PositiveSemidefinite,
        };
        if !self.backend.supports(kind) {
            return Err(CliError::Usage(format!(
                "cone {cone} needs {kind} support, which backend '{}' lacks",
                self.backend_name
            )));
        }
        Ok(cone)
    }
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::Infeasible(msg)) => {
            println!("infeasible: {msg}");
            EXIT_INFEASIBLE
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("run `polycert --help` for usage");
            }
            EXIT_ERROR
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Certify(a) => match &a.verify {
            Some(CertifySub::Verify(v)) => cmd_verify(v),
            None => cmd_certify(&ctx, a),
        },
        Command::Verify(v) => cmd_verify(v),
        Command::Coverage(a) => cmd_coverage(&ctx, a),
        Command::BarrierSim(a) => cmd_barrier_sim(&ctx, a),
        Command::BarrierTable1(a) => cmd_table1(&ctx, a),
        Command::Roa(a) => cmd_roa(&ctx, a),
    }
}

/// A polynomial with an optional constraint set, as read by `certify`.
#[derive(Clone, Debug, PartialEq)]
pub struct CertifyProblem {
    pub poly: Polynomial,
    pub set: SemialgebraicSet,
}

impl CertifyProblem {
    /// Lines `nvars <n>`, `poly <p>`, then any number of `g <p>` and `h <p>`.
    pub fn from_text(text: &str) -> Result<CertifyProblem, CliError> {
        let mut nvars = None;
        let mut poly = None;
        let mut set = None;
        for (ln, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| CliError::Usage(format!("line {ln}: {m}"));
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            let parse = |n: usize| Polynomial::parse(rest.trim(), n).map_err(|e| bad(&e.to_string()));
            match (key, nvars) {
                ("nvars", None) => {
                    let n: usize = rest.trim().parse().map_err(|_| bad("bad nvars"))?;
                    nvars = Some(n);
                    set = Some(SemialgebraicSet::new(n));
                }
                ("poly", Some(n)) if poly.is_none() => poly = Some(parse(n)?),
                ("g", Some(n)) => {
                    set = Some(set.take().unwrap().with_inequality(parse(n)?).map_err(|e| bad(&e.to_string()))?)
                }
                ("h", Some(n)) => {
                    set = Some(set.take().unwrap().with_equality(parse(n)?).map_err(|e| bad(&e.to_string()))?)
                }
                _ => return Err(bad(&format!("unexpected '{key}'"))),
            }
        }
        match (poly, set) {
            (Some(poly), Some(set)) => Ok(CertifyProblem { poly, set }),
            _ => Err(CliError::Usage("problem needs 'nvars' and 'poly' lines".into())),
        }
    }
}

/// Solves for a certificate of `prob.poly ≥ 0` on `prob.set`.
pub fn certify_problem(
    prob: &CertifyProblem,
    cone: ConeTag,
    half_degree: Option<u32>,
    mult_degree: u32,
    backend: &dyn conic::Backend,
    solve: &SolveOptions,
) -> Result<PutinarCertificate, CertifyError> {
    let p = LinPoly::from(&prob.poly);
    let mut prog = ConicProgram::new();
    if prob.set.constraints().is_empty() {
        let half = half_degree.unwrap_or(prob.poly.degree().div_ceil(2));
        let gram = constrain_in_cone(&mut prog, &p, cone, half)?;
        let sol = conic::solve(&prog, backend, solve)?;
        match sol.status {
            SolveStatus::Optimal | SolveStatus::Inaccurate => {}
            SolveStatus::Infeasible => return Err(CertifyError::Infeasible(sol.backend_status)),
            _ => return Err(CertifyError::SolverFailure(sol.backend_status)),
        }
        let cert = PutinarCertificate {
            poly: prob.poly.clone(),
            set: prob.set.clone(),
            sigma0: gram.extract(&sol),
            multipliers: Vec::new(),
        };
        let report = verify_certificate(&cert, VERIFY_TOL);
        return if report.passed {
            Ok(cert)
        } else {
            Err(CertifyError::Verification(Box::new(report)))
        };
    }
    let handle = add_putinar(&mut prog, &p, &prob.set, cone, mult_degree)?;
    if let Some(h) = half_degree {
        let need = handle.sigma0.basis().iter().map(|m| m.degree()).max().unwrap_or(0);
        if h < need {
            return Err(CertifyError::DegreeOverflow {
                degree: 2 * need,
                half_degree: h,
            });
        }
    }
    let sol = conic::solve(&prog, backend, solve)?;
    finish_putinar(&handle, &sol, VERIFY_TOL)
}

fn cmd_certify(ctx: &Context, a: &CertifyArgs) -> Result<Outcome, CliError> {
    let path = a
        .poly
        .as_ref()
        .ok_or(CliError::Usage("certify needs --poly <file>".into()))?;
    let prob = CertifyProblem::from_text(&read(path)?)?;
    let cone = ctx.cone(a.cone.as_deref(), ConeTag::Sos)?;
    match certify_problem(&prob, cone, a.half_degree, a.mult_degree, ctx.backend.as_ref(), &ctx.solve) {
        Ok(cert) => {
            let report = verify_certificate(&cert, VERIFY_TOL);
            println!("feasible: {report}");
            if let Some(out) = &a.out {
                write(out, &cert.to_text())?;
            }
            Ok(Outcome::Ok)
        }
        Err(CertifyError::Infeasible(m)) => Ok(Outcome::Infeasible(m)),
        Err(e) => Err(run_err(e)),
    }
}

/// Splits a file into `polycert-certificate` blocks.
pub fn certificate_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut cur: Option<String> = None;
    for line in text.lines() {
        if line.trim() == "polycert-certificate 1" {
            cur = Some(String::new());
        }
        if let Some(b) = cur.as_mut() {
            b.push_str(line);
            b.push('\n');
            if line.trim() == "end" {
                blocks.push(cur.take().unwrap());
            }
        }
    }
    if let Some(b) = cur {
        blocks.push(b);
    }
    blocks
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let mut failed = 0;
    let mut total = 0;
    for path in &a.files {
        let blocks = certificate_blocks(&read(path)?);
        if blocks.is_empty() {
            return Err(CliError::Run(format!("{}: no certificate found", path.display())));
        }
        for (k, b) in blocks.iter().enumerate() {
            total += 1;
            let cert = PutinarCertificate::from_text(b)
                .map_err(|e| CliError::Run(format!("{} #{k}: {e}", path.display())))?;
            let report = verify_certificate(&cert, a.tol);
            if !report.passed {
                failed += 1;
            }
            println!("{} #{k}: {report}", path.display());
        }
    }
    if failed > 0 {
        Ok(Outcome::Infeasible(format!("{failed} of {total} certificates FAIL")))
    } else {
        Ok(Outcome::Ok)
    }
}

fn cmd_coverage(ctx: &Context, a: &CoverageArgs) -> Result<Outcome, CliError> {
    let inst = match CoverageInstance::builtin(&a.instance) {
        Ok(i) => i,
        Err(_) if Path::new(&a.instance).exists() => {
            CoverageInstance::from_text(&read(Path::new(&a.instance))?).map_err(run_err)?
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let inst = match a.transmitter {
        Some(i) if i < inst.transmitters.len() => inst.single(i),
        Some(i) => return Err(CliError::Usage(format!("no transmitter {i}"))),
        None => inst,
    };
    let cone = ctx.cone(a.cone.as_deref(), ConeTag::Sos)?;
    match coverage::solve_coverage(&inst, a.mult_degree, cone, ctx.backend.as_ref()) {
        Ok(sol) => {
            let rates: Vec<String> = sol.rates.iter().map(|c| format!("{c:.4}")).collect();
            println!("rates {} total {:.4}", rates.join(" "), sol.total);
            if let Some(out) = &a.out {
                write(out, &sol.to_text())?;
            }
            if let Some(grid) = &a.grid {
                let g = coverage::sample_energy_grid(&inst, &sol.rates, coverage::DEFAULT_BBOX, a.resolution);
                write(grid, &coverage::grid_csv(&g))?;
            }
            Ok(Outcome::Ok)
        }
        Err(CoverageError::Infeasible(m)) => Ok(Outcome::Infeasible(m)),
        Err(e) => Err(run_err(e)),
    }
}

pub fn parse_wind(s: &str) -> Result<WindPolicy, CliError> {
    let bad = || CliError::Usage(format!("bad wind '{s}' (number, uniform, switching:<period>)"));
    if s == "uniform" {
        return Ok(WindPolicy::UniformRandom);
    }
    if let Some(p) = s.strip_prefix("switching:") {
        let period: f64 = p.parse().map_err(|_| bad())?;
        if !(period > 0.0) {
            return Err(bad());
        }
        return Ok(WindPolicy::Switching { period });
    }
    let w: f64 = s.parse().map_err(|_| bad())?;
    if w.abs() > polycert::barrier::WIND_BOUND {
        return Err(CliError::Usage(format!(
            "wind {w} exceeds the certified bound {}",
            polycert::barrier::WIND_BOUND
        )));
    }
    Ok(WindPolicy::Constant(w))
}

/// Seeded obstacle field and wind seed for task `index`.
pub fn seeded_field(seed: u64, index: u64) -> (Environment, UavState, u64) {
    let start = UavState::new(0.0, 0.0, 0.0);
    let mut rng = task_rng(seed, index);
    let env = random_environment(&EnvConfig::default(), &start, &mut rng);
    let wind_seed = rng.next_u64();
    (env, start, wind_seed)
}

fn cmd_barrier_sim(ctx: &Context, a: &BarrierSimArgs) -> Result<Outcome, CliError> {
    let cone = ctx.cone(a.cone.as_deref(), ConeTag::Sdsos)?;
    let wind = parse_wind(&a.wind)?;
    if !(a.duration > 0.0) {
        return Err(CliError::Usage("duration must be positive".into()));
    }
    let seed = ctx.seed(a.seed, 0);
    let (env, start, wind_seed) = match &a.env {
        Some(p) => {
            let (env, start) = Environment::from_text(&read(p)?).map_err(run_err)?;
            (env, start.unwrap_or(UavState::new(0.0, 0.0, 0.0)), seed)
        }
        None => seeded_field(seed, a.index),
    };
    let mut planner = Planner::new(cone, ctx.backend.clone());
    planner.opts.solve = ctx.solve.clone();
    let cfg = SimConfig {
        duration: a.duration,
        wind,
        seed: wind_seed,
        ..SimConfig::default()
    };
    let traj = simulate(&env, start, &cfg, &planner);
    let certified = traj.plans.iter().filter(|p| p.result.certificate.is_some()).count();
    println!(
        "plans {} certified {} fallbacks {} penetrations {} min_clearance {:.4} final ({:.4}, {:.4}, {:.4})",
        traj.plans.len(),
        certified,
        traj.fallbacks,
        traj.penetrations,
        traj.min_clearance,
        traj.final_state().x,
        traj.final_state().y,
        traj.final_state().psi
    );
    if let Some(out) = &a.out {
        write(out, &traj.to_csv())?;
    }
    Ok(Outcome::Ok)
}

pub fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| CliError::Usage(format!("bad {what} '{t}'"))))
        .collect()
}

fn cmd_table1(ctx: &Context, a: &Table1Args) -> Result<Outcome, CliError> {
    let cones = a
        .cones
        .split(',')
        .map(|c| ctx.cone(Some(c.trim()), ConeTag::Sdsos))
        .collect::<Result<Vec<_>, _>>()?;
    if a.envs == 0 {
        return Err(CliError::Usage("--envs must be positive".into()));
    }
    let cfg = Table1Config {
        psi0_deg: parse_list(&a.psi, "yaw")?,
        n_envs: a.envs,
        seed: ctx.seed(a.seed, Table1Config::default().seed),
        cones,
        ..Table1Config::default()
    };
    let mut opts = polycert::barrier::BarrierOptions::default();
    opts.solve = ctx.solve.clone();
    let backend = ctx.backend.clone();
    let res = run_table1(&cfg, &|_| backend.clone(), &opts);
    let summary = res.summary_csv();
    match &a.out {
        Some(p) => write(p, &summary)?,
        None => print!("{summary}"),
    }
    if let Some(p) = &a.records {
        write(p, &res.records_csv())?;
    }
    if let Some(p) = &a.timings {
        write(p, &res.timing_csv())?;
    }
    let mut note = String::new();
    for w in cfg.cones.windows(2) {
        write!(note, "{} ⇒ {} exceptions: {}; ", w[0], w[1], res.inclusion_violations(w[0], w[1])).unwrap();
    }
    for &c in &cfg.cones {
        write!(note, "{c} median {:.4}s; ", res.median_time(c)).unwrap();
    }
    eprintln!("{}", note.trim_end_matches("; "));
    Ok(Outcome::Ok)
}

pub fn builtin_system(name: &str) -> Option<PolySystem> {
    match name {
        "cubic" => Some(roa::cubic_1d()),
        "van-der-pol" => Some(roa::van_der_pol_reversed()),
        "servo" => Some(roa::dubins_servo()),
        "quadrotor" => Some(roa::quadrotor16()),
        _ => None,
    }
}

fn cmd_roa(ctx: &Context, a: &RoaArgs) -> Result<Outcome, CliError> {
    let sys = match builtin_system(&a.system) {
        Some(s) => s,
        None if Path::new(&a.system).exists() => {
            PolySystem::from_text(&read(Path::new(&a.system))?).map_err(run_err)?
        }
        None => return Err(CliError::Usage(format!("unknown system '{}'", a.system))),
    };
    let opts = RoaOptions {
        cone: ctx.cone(a.cone.as_deref(), ConeTag::Sdsos)?,
        v_degree: a.v_degree,
        l_degree: a.l_degree,
        u_degree: a.u_degree,
        max_iters: a.max_iters,
        transform: a.transform,
        solve: ctx.solve.clone(),
        ..RoaOptions::default()
    };
    if opts.v_degree < 2 || opts.v_degree % 2 != 0 || opts.l_degree % 2 != 0 {
        return Err(CliError::Usage("V and L degrees must be even, V at least 2".into()));
    }
    if a.assemble_only {
        let (r, _) = roa::assemble_multiplier_report(&sys, &opts, 1.0).map_err(run_err)?;
        println!(
            "states {} inputs {} full_basis {} gram_dim {} variables {} equalities {} rotated_cones {} psd_blocks {} assembly_s {:.2}",
            r.states, r.inputs, r.full_basis, r.gram_dim, r.variables, r.equalities, r.rotated_cones, r.psd_blocks, r.assembly_time
        );
        return Ok(Outcome::Ok);
    }
    let result = match roa::run_alternation(&sys, &opts, ctx.backend.as_ref()) {
        Ok(r) => r,
        Err(RoaError::InitInfeasible(rho)) => {
            return Ok(Outcome::Infeasible(format!("no certificate at ρ = {rho:e}")))
        }
        Err(e) => return Err(run_err(e)),
    };
    println!(
        "rho {:.6} iterations {} converged {} capped {}",
        result.rho, result.iterations, result.converged, result.capped
    );
    println!("V {}", result.v);
    if let Some(out) = &a.out {
        write(out, &result.to_text())?;
    }
    if let Some(dims) = &a.slice {
        let d: Vec<usize> = parse_list(dims, "state index")?;
        let b: Vec<f64> = parse_list(&a.bbox, "bbox value")?;
        if d.len() != 2 || d.iter().any(|&i| i >= sys.n()) || b.len() != 4 {
            return Err(CliError::Usage("--slice i,j and --bbox x0,x1,y0,y1".into()));
        }
        let csv = roa::slice_csv(&result, (d[0], d[1]), [b[0], b[1], b[2], b[3]], a.resolution);
        let path = a
            .out
            .as_ref()
            .map(|p| p.with_extension("slice.csv"))
            .unwrap_or_else(|| PathBuf::from("roa_slice.csv"));
        write(&path, &csv)?;
    }
    if a.check > 0 {
        let mut rng = task_rng(ctx.seed(a.seed, 0), 0);
        let c = roa::check_by_simulation(&sys, &result, a.check, &mut rng).map_err(run_err)?;
        println!(
            "simulation samples {} failures {} horizon {:.2} dt {:.4}",
            c.samples, c.failures, c.horizon, c.dt
        );
    }
    Ok(Outcome::Ok)
}

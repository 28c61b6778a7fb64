use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use cournot_core::analysis::{profit_bound, ratio_at_profiles, welfare_ratio_formula, BOUND_EPS};
use cournot_core::instances::{
    bulow_example, concave_small_shock, concave_two_firm, profit_worstcase, welfare_worstcase,
};
use cournot_core::{
    certify_suite, shock_report, solve_equilibrium, verify_named_instance, CertificateReport,
    EquilibriumResult, Game, Method, NamedInstance, Objective, PriceShock, QuantityProfile,
    RandomGameConfig, Ratio, ShockReport, SolveOptions,
};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_COMPUTATION: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        source: cournot_core::Error,
    },
    #[error(transparent)]
    Core(#[from] cournot_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) | CliError::Input { source: e, .. } if e.is_computational() => {
                EXIT_COMPUTATION
            }
            _ => EXIT_USAGE,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Multimarket Cournot equilibria under price shocks.
#[derive(Parser, Debug)]
#[command(name = "cournot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the equilibrium of a game, optionally shifted by a shock.
    Solve {
        game: PathBuf,
        #[arg(long)]
        shock: Option<PathBuf>,
        /// Starting profile: a profile or a previous solve result.
        #[arg(long)]
        initial: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Compare the equilibria before and after a nonnegative shock.
    Shock {
        game: PathBuf,
        /// A shock map, or an instance sidecar with a `shock` field.
        shock: PathBuf,
        /// Print a human-readable summary instead of JSON.
        #[arg(long)]
        table: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Build a named construction and verify it.
    Instance {
        name: InstanceName,
        /// Number of firms for the worst-case families.
        #[arg(long)]
        n: Option<usize>,
        /// Parameter of the concave constructions.
        #[arg(long)]
        k: Option<usize>,
        /// Directory to write `<name>.game.json` and `<name>.sidecar.json` into.
        #[arg(long)]
        emit: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve a worst-case family over a range of firm counts.
    Sweep {
        #[arg(long)]
        family: Family,
        /// Inclusive range `a..b`, or a single count.
        #[arg(long, value_parser = parse_range)]
        n: (usize, usize),
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run the structural and bound checks on seeded random games.
    Certify {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        trials: usize,
        /// Random game configuration (JSON); omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    kkt_tol: Option<f64>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Aggregate,
    RoundRobin,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InstanceName {
    Bulow,
    ProfitWorstcase,
    WelfareWorstcase,
    ConcaveSmall,
    ConcaveTwoFirm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    ProfitWorstcase,
    WelfareWorstcase,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.strip_prefix('=').unwrap_or(b))?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    if lo > hi {
        return Err(format!("empty range {lo}..{hi}"));
    }
    Ok((lo, hi))
}

impl SolverArgs {
    fn options(&self) -> CliResult<SolveOptions> {
        let mut opts = SolveOptions::default();
        if let Some(t) = self.tol {
            opts.tol = t;
        }
        if let Some(t) = self.kkt_tol {
            opts.kkt_tol = t;
        }
        if let Some(d) = self.damping {
            opts.damping = d;
        }
        if let Some(m) = self.max_iters {
            opts.max_iters = m;
        }
        if let Some(m) = self.method {
            opts.method = match m {
                MethodArg::Aggregate => Method::Aggregate,
                MethodArg::RoundRobin => Method::RoundRobin,
            };
        }
        opts.validate()?;
        Ok(opts)
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn input_error(path: &Path) -> impl FnOnce(cournot_core::Error) -> CliError + '_ {
    move |source| CliError::Input {
        path: path.to_owned(),
        source,
    }
}

fn json_error(path: &Path) -> impl FnOnce(serde_json::Error) -> CliError + '_ {
    move |e| CliError::Input {
        path: path.to_owned(),
        source: e.into(),
    }
}

fn load_game(path: &Path) -> CliResult<Game> {
    Game::from_json(&read(path)?).map_err(input_error(path))
}

/// Accepts a bare shock map or any object carrying one under `shock`.
fn load_shock(path: &Path) -> CliResult<PriceShock> {
    let value: Value = serde_json::from_str(&read(path)?).map_err(json_error(path))?;
    let value = match value {
        Value::Object(mut map) if map.get("shock").is_some_and(Value::is_object) => {
            map.remove("shock").expect("checked above")
        }
        other => other,
    };
    serde_json::from_value(value).map_err(json_error(path))
}

fn load_initial(path: &Path) -> CliResult<QuantityProfile> {
    let text = read(path)?;
    if let Ok(previous) = serde_json::from_str::<EquilibriumResult>(&text) {
        return Ok(previous.profile);
    }
    serde_json::from_str(&text).map_err(json_error(path))
}

/// Writes to stdout; a closed pipe on the reading side is not an error.
fn emit(text: &str) -> CliResult<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(cournot_core::Error::from)?;
    emit(&format!("{text}\n"))
}

fn fmt_ratio(r: Ratio) -> String {
    match r.value() {
        Some(v) => format!("{v:.6}"),
        None => r.to_string(),
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn solve(
    game: &Path,
    shock: Option<&Path>,
    initial: Option<&Path>,
    solver: &SolverArgs,
) -> CliResult<u8> {
    let game = load_game(game)?;
    let shock = shock.map(load_shock).transpose()?;
    let mut opts = solver.options()?;
    opts.initial = initial.map(load_initial).transpose()?;
    let result = solve_equilibrium(&game, shock.as_ref(), &opts)?;
    print_json(&result)?;
    Ok(0)
}

fn render_table(game: &Game, r: &ShockReport) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(format!(
        "game {}  firms {}  markets {}",
        r.game_digest,
        r.n_firms,
        game.markets().len()
    ));
    line(format!(
        "iterations {} / {}  kkt residual {:.3e} / {:.3e}",
        r.pre.iterations, r.post.iterations, r.pre.kkt_residual, r.post.kkt_residual
    ));
    line(String::new());
    line(format!(
        "{:<12} {:>16} {:>16} {:>12}",
        "firm", "profit before", "profit after", "ratio"
    ));
    for (firm, before) in &r.profits_pre {
        line(format!(
            "{:<12} {:>16.6} {:>16.6} {:>12}",
            firm.as_str(),
            before,
            r.profits_post[firm],
            fmt_ratio(r.profit_ratios[firm])
        ));
    }
    line(String::new());
    let flag = |ok: bool| if ok { "ok" } else { "VIOLATED" };
    line(format!(
        "gamma_u {}  (firm {})  bound {:.6}  {}",
        fmt_ratio(r.gamma_u),
        r.worst_firm.as_str(),
        r.bound_profit,
        flag(r.bounds.profit)
    ));
    line(format!(
        "gamma_U {}  bound 0.75  {}",
        fmt_ratio(r.gamma_welfare),
        flag(r.bounds.welfare)
    ));
    line(format!(
        "gamma_S {}  bound {:.6}  {}",
        fmt_ratio(r.gamma_surplus),
        5.0 / 6.0,
        flag(r.bounds.surplus)
    ));
    if r.all_gain {
        line("every firm gains".into());
    }
    out
}

fn shock(game: &Path, shock: &Path, table: bool, solver: &SolverArgs) -> CliResult<u8> {
    let game = load_game(game)?;
    let shock = load_shock(shock)?;
    let report = shock_report(&game, &shock, &solver.options()?)?;
    if table {
        emit(&render_table(&game, &report))?;
    } else {
        print_json(&report)?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct GammaLine {
    objective: Objective,
    expected: f64,
    /// Ratio evaluated at the stated equilibria.
    stated: Option<f64>,
}

#[derive(Serialize)]
struct InstanceSummary<'a> {
    name: &'a str,
    passed: bool,
    gammas: Vec<GammaLine>,
    report: &'a CertificateReport,
}

fn build_instance(
    name: InstanceName,
    n: Option<usize>,
    k: Option<usize>,
) -> CliResult<NamedInstance> {
    let flag = |given: bool, what: &str| {
        if given {
            Err(CliError::Usage(format!(
                "--{what} does not apply to this instance"
            )))
        } else {
            Ok(())
        }
    };
    let inst = match name {
        InstanceName::Bulow => {
            flag(n.is_some(), "n")?;
            flag(k.is_some(), "k")?;
            bulow_example()
        }
        InstanceName::ProfitWorstcase => {
            flag(k.is_some(), "k")?;
            profit_worstcase(n.unwrap_or(5))?
        }
        InstanceName::WelfareWorstcase => {
            flag(k.is_some(), "k")?;
            welfare_worstcase(n.unwrap_or(5))?
        }
        InstanceName::ConcaveSmall => {
            flag(n.is_some(), "n")?;
            concave_small_shock(k.unwrap_or(4))?
        }
        InstanceName::ConcaveTwoFirm => {
            flag(n.is_some(), "n")?;
            concave_two_firm(k.unwrap_or(10))?
        }
    };
    Ok(inst)
}

fn instance(
    name: InstanceName,
    n: Option<usize>,
    k: Option<usize>,
    emit: Option<&Path>,
    solver: &SolverArgs,
) -> CliResult<u8> {
    let opts = solver.options()?;
    let inst = build_instance(name, n, k)?;
    if let Some(dir) = emit {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_owned(),
            source,
        })?;
        let game = serde_json::to_string_pretty(&inst.game).map_err(cournot_core::Error::from)?;
        let sidecar =
            serde_json::to_string_pretty(&inst.sidecar()).map_err(cournot_core::Error::from)?;
        write_file(&dir.join(format!("{}.game.json", inst.name)), &game)?;
        write_file(&dir.join(format!("{}.sidecar.json", inst.name)), &sidecar)?;
    }
    let report = verify_named_instance(&inst, &opts);
    let gammas = inst
        .expected
        .iter()
        .map(|e| {
            let stated = match (&inst.stated_pre, &inst.stated_post) {
                (Some(x), Some(y)) => ratio_at_profiles(&inst.game, &inst.shock, x, y, e.objective)
                    .ok()
                    .map(|r| r.as_f64()),
                _ => None,
            };
            GammaLine {
                objective: e.objective,
                expected: e.value,
                stated,
            }
        })
        .collect();
    print_json(&InstanceSummary {
        name: &inst.name,
        passed: report.passed,
        gammas,
        report: &report,
    })?;
    Ok(if report.passed { 0 } else { EXIT_CHECK_FAILED })
}

fn sweep(family: Family, (lo, hi): (usize, usize), solver: &SolverArgs) -> CliResult<u8> {
    let opts = solver.options()?;
    if lo < 1 {
        return Err(CliError::Usage("--n must start at 1 or more".into()));
    }
    let (label, objective) = match family {
        Family::ProfitWorstcase => ("gamma_u", Objective::Profit),
        Family::WelfareWorstcase => ("gamma_U", Objective::Welfare),
    };
    emit(&format!(
        "{:>6} {:>16} {:>16} {:>12}\n",
        "n", label, "bound", "slack"
    ))?;
    let mut ok = true;
    for n in lo..=hi {
        let (inst, bound) = match family {
            Family::ProfitWorstcase => (profit_worstcase(n)?, profit_bound(n)?),
            Family::WelfareWorstcase => (welfare_worstcase(n)?, welfare_ratio_formula(n)?),
        };
        let report = shock_report(&inst.game, &inst.shock, &opts)?;
        let gamma = report.gamma(objective).as_f64();
        let slack = gamma - bound;
        ok &= slack >= -BOUND_EPS;
        emit(&format!(
            "{n:>6} {gamma:>16.12} {bound:>16.12} {slack:>12.3e}\n"
        ))?;
    }
    Ok(if ok { 0 } else { EXIT_CHECK_FAILED })
}

fn certify(seed: u64, trials: usize, config: Option<&Path>, solver: &SolverArgs) -> CliResult<u8> {
    let opts = solver.options()?;
    let cfg = match config {
        Some(path) => {
            serde_json::from_str::<RandomGameConfig>(&read(path)?).map_err(json_error(path))?
        }
        None => RandomGameConfig::default(),
    };
    cfg.validate().map_err(|e| match config {
        Some(path) => input_error(path)(e),
        None => e.into(),
    })?;
    let report = certify_suite(seed, trials, &cfg, &opts)?;
    emit(&format!("{}\n", report.to_json()))?;
    Ok(if report.passed { 0 } else { EXIT_CHECK_FAILED })
}

fn run(cli: Cli) -> CliResult<u8> {
    match &cli.command {
        Command::Solve {
            game,
            shock,
            initial,
            solver,
        } => solve(game, shock.as_deref(), initial.as_deref(), solver),
        Command::Shock {
            game,
            shock: s,
            table,
            solver,
        } => shock(game, s, *table, solver),
        Command::Instance {
            name,
            n,
            k,
            emit,
            solver,
        } => instance(*name, *n, *k, emit.as_deref(), solver),
        Command::Sweep { family, n, solver } => sweep(*family, *n, solver),
        Command::Certify {
            seed,
            trials,
            config,
            solver,
        } => certify(*seed, *trials, config.as_deref(), solver),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line front end. Exit codes: 0 witness or success, 1 negative or
//! inconclusive, 2 budget exhausted, 3 input or internal error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::comparator::{build_comparator, exact_compare};
use crate::deviation::{deviation_target_index, oracle_solve_positional, solve_game};
use crate::epsilon::{find_epsilon_equilibrium, EpsilonOptions, Orientation, Verdict};
use crate::error::{Error, Result};
use crate::game::{load_game, reward_bounds, Game};
use crate::goal::{goals_to_json, load_goals, Goal, PayoffVector};
use crate::random::{
    random_game, random_rational, random_relation, random_satisficing, random_turn_game,
    random_word, GameShape,
};
use crate::rational::{format_rational, parse_rational};
use crate::search::{default_state_cap, Mode, SearchConfig, SearchReport, Solver};
use crate::witness::{verify_witness, WitnessProfile};

pub const EXIT_WITNESS: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    First,
    All,
    Maximal,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::First => Mode::First,
            ModeArg::All => Mode::All,
            ModeArg::Maximal => Mode::Maximal,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "satne",
    version,
    about = "Exact W-Nash equilibria for satisficing discounted-sum games"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Explored product-state budget (default from SATNE_STATE_CAP or 10^7).
    #[arg(long, global = true)]
    pub state_cap: Option<usize>,

    /// Worker threads for independent searches.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a W-NE at a fixed payoff vector.
    Solve(SolveArgs),
    /// Search payoff vectors in descending total order.
    Enumerate(EnumerateArgs),
    /// Threshold ladder, W-NE search and ε certificate.
    Epsilon(EpsilonArgs),
    /// Check a witness document.
    Verify(VerifyArgs),
    /// Randomized cross-checks against the brute-force oracles.
    OracleSelftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub game: PathBuf,
    pub goals: PathBuf,
    /// Payoff vector, e.g. `1,0`.
    #[arg(long)]
    pub w: String,
    /// Write the witness document here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the explored product graph here.
    #[arg(long)]
    pub dump_product: Option<PathBuf>,
    /// Write each deviator's game into this directory.
    #[arg(long)]
    pub dump_deviation_games: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    pub game: PathBuf,
    pub goals: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::First)]
    pub mode: ModeArg,
    /// Write the first witness document here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EpsilonArgs {
    pub game: PathBuf,
    /// Positive rational `p/q`.
    #[arg(long, allow_hyphen_values = true)]
    pub eps: String,
    #[arg(long, value_enum, default_value_t = ModeArg::First)]
    pub mode: ModeArg,
    /// Horizon cap for certificate doubling.
    #[arg(long, default_value_t = crate::epsilon::DEFAULT_HORIZON_CAP)]
    pub horizon: usize,
    /// Agents minimize their rewards instead.
    #[arg(long)]
    pub minimize: bool,
    /// Write the first certified witness document here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the ladder goals here, for use with `verify`.
    #[arg(long)]
    pub goals_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub game: PathBuf,
    pub goals: PathBuf,
    pub witness: PathBuf,
    /// Payoff vector to check against; defaults to the witness levels.
    #[arg(long)]
    pub w: Option<String>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_WITNESS
            };
        }
    };
    match execute(&cfg, out) {
        Ok(code) => code,
        Err(e @ Error::Budget { .. }) => {
            let _ = writeln!(err, "satne: {e}");
            EXIT_BUDGET
        }
        Err(e) => {
            let _ = writeln!(err, "satne: {e}");
            EXIT_ERROR
        }
    }
}

pub fn execute(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    match &cfg.command {
        Command::Solve(a) => cmd_solve(cfg, a, out),
        Command::Enumerate(a) => cmd_enumerate(cfg, a, out),
        Command::Epsilon(a) => cmd_epsilon(cfg, a, out),
        Command::Verify(a) => cmd_verify(cfg, a, out),
        Command::OracleSelftest(a) => cmd_selftest(cfg, a, out),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn load_inputs(game: &Path, goals: &Path) -> Result<(Game, Vec<Goal>)> {
    let g = load_game(&read(game)?)?;
    let goals = load_goals(&read(goals)?)?;
    if goals.len() != g.num_agents() {
        return Err(Error::Goal {
            agent: goals.len().min(g.num_agents()),
            message: format!("{} goals for {} agents", goals.len(), g.num_agents()),
        });
    }
    Ok((g, goals))
}

fn search_config(cfg: &RunConfig, record_product: bool) -> SearchConfig {
    SearchConfig {
        state_cap: cfg.state_cap.unwrap_or_else(default_state_cap),
        jobs: cfg.jobs.max(1),
        record_product,
    }
}

fn report_json(game: &Game, r: &SearchReport) -> Value {
    let witness = r
        .witness()
        .map(|w| serde_json::from_str::<Value>(&w.to_json(game)).expect("witness json"));
    json!({
        "w": r.w.to_string(),
        "outcome": if witness.is_some() { "witness" } else { "empty" },
        "explored": r.explored,
        "win1_sizes": r.win1_sizes.iter().map(|(a, n)| (a.to_string(), json!(n))).collect::<serde_json::Map<_, _>>(),
        "witness": witness,
    })
}

fn report_text(game: &Game, r: &SearchReport, out: &mut dyn Write) -> Result<()> {
    match r.witness() {
        Some(w) => {
            writeln!(out, "W = {}: witness", r.w)?;
            writeln!(out, "  primary  {}", w.lasso.describe(game))?;
            let payoffs: Vec<_> = w.rewards.iter().map(format_rational).collect();
            writeln!(out, "  payoffs  ({})", payoffs.join(", "))?;
        }
        None => writeln!(out, "W = {}: empty", r.w)?,
    }
    let sizes: Vec<_> = r
        .win1_sizes
        .iter()
        .map(|(a, n)| format!("agent {a}: {n}"))
        .collect();
    writeln!(
        out,
        "  explored {} product states in {:.1?}; deviator regions [{}]",
        r.explored,
        r.elapsed,
        sizes.join(", ")
    )?;
    Ok(())
}

fn emit(cfg: &RunConfig, game: &Game, reports: &[SearchReport], out: &mut dyn Write) -> Result<()> {
    match cfg.format {
        Format::Json => {
            let all: Vec<_> = reports.iter().map(|r| report_json(game, r)).collect();
            let value = if all.len() == 1 {
                all[0].clone()
            } else {
                Value::Array(all)
            };
            writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?;
        }
        Format::Text => {
            for r in reports {
                report_text(game, r, out)?;
            }
        }
    }
    Ok(())
}

pub fn cmd_solve(cfg: &RunConfig, a: &SolveArgs, out: &mut dyn Write) -> Result<i32> {
    let (game, goals) = load_inputs(&a.game, &a.goals)?;
    let w: PayoffVector =
        a.w.parse()
            .map_err(|m: String| Error::PayoffOutOfRange(m))?;
    let solver = Solver::new(&game, &goals, search_config(cfg, a.dump_product.is_some()))?;
    let report = solver.find(&w)?;
    if let Some(path) = &a.dump_product {
        let dump = report.product.clone().unwrap_or(Value::Null);
        fs::write(path, serde_json::to_string_pretty(&dump)?)?;
    }
    if let Some(dir) = &a.dump_deviation_games {
        fs::create_dir_all(dir)?;
        for (agent, goal) in goals.iter().enumerate() {
            if let Some((_, k)) = deviation_target_index(goal, w.levels()[agent]) {
                let dump = solver.deviation(agent, k).game.to_dump_json(&game);
                fs::write(
                    dir.join(format!("agent{agent}.json")),
                    serde_json::to_string_pretty(&dump)?,
                )?;
            }
        }
    }
    emit(cfg, &game, std::slice::from_ref(&report), out)?;
    match report.witness() {
        Some(witness) => {
            if let Some(path) = &a.out {
                fs::write(path, witness.to_json(&game))?;
            }
            Ok(EXIT_WITNESS)
        }
        None => Ok(EXIT_NEGATIVE),
    }
}

pub fn cmd_enumerate(cfg: &RunConfig, a: &EnumerateArgs, out: &mut dyn Write) -> Result<i32> {
    let (game, goals) = load_inputs(&a.game, &a.goals)?;
    let solver = Solver::new(&game, &goals, search_config(cfg, false))?;
    let reports = solver.enumerate(a.mode.into())?;
    emit(cfg, &game, &reports, out)?;
    match reports.iter().find_map(SearchReport::witness) {
        Some(witness) => {
            if let Some(path) = &a.out {
                fs::write(path, witness.to_json(&game))?;
            }
            Ok(EXIT_WITNESS)
        }
        None => Ok(EXIT_NEGATIVE),
    }
}

pub fn cmd_epsilon(cfg: &RunConfig, a: &EpsilonArgs, out: &mut dyn Write) -> Result<i32> {
    let game = load_game(&read(&a.game)?)?;
    let eps = parse_rational(&a.eps).map_err(|m| Error::parse("--eps", m))?;
    let options = EpsilonOptions {
        mode: a.mode.into(),
        horizon_cap: a.horizon,
        orientation: if a.minimize {
            Orientation::Minimize
        } else {
            Orientation::Maximize
        },
        search: search_config(cfg, false),
    };
    let outcome = find_epsilon_equilibrium(&game, &eps, &options)?;
    if let Some(path) = &a.goals_out {
        fs::write(path, goals_to_json(&outcome.ladder.goals()))?;
    }
    match cfg.format {
        Format::Json => {
            let certs: Vec<_> = outcome
                .certificates
                .iter()
                .map(|(i, c)| {
                    let mut doc = report_json(&game, &outcome.reports[*i]);
                    doc["certificate"] = c.to_json();
                    doc
                })
                .collect();
            let doc = json!({
                "eps": format_rational(&eps),
                "rungs": outcome.ladder.goals.iter().map(|g| g.thresholds().len()).collect::<Vec<_>>(),
                "searched": outcome.reports.len(),
                "results": certs,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
        }
        Format::Text => {
            let rungs: Vec<_> = outcome
                .ladder
                .goals
                .iter()
                .map(|g| g.thresholds().len().to_string())
                .collect();
            writeln!(
                out,
                "ε = {}; ladder rungs per agent [{}]",
                format_rational(&eps),
                rungs.join(", ")
            )?;
            for (i, cert) in &outcome.certificates {
                report_text(&game, &outcome.reports[*i], out)?;
                for c in &cert.agents {
                    writeln!(
                        out,
                        "  agent {}: reward {}, best deviation in [{}, {}] at horizon {} -> {:?}",
                        c.agent,
                        format_rational(&c.reward),
                        format_rational(&c.lo),
                        format_rational(&c.hi),
                        c.horizon,
                        c.verdict
                    )?;
                }
            }
            if outcome.certificates.is_empty() {
                writeln!(
                    out,
                    "no ladder W-NE found among {} payoff vectors",
                    outcome.reports.len()
                )?;
            }
        }
    }
    if let (Some(path), Some((i, _))) = (&a.out, outcome.certificates.first()) {
        let witness = outcome.reports[*i]
            .witness()
            .expect("certified reports carry witnesses");
        fs::write(path, witness.to_json(&game))?;
    }
    let certified = outcome
        .certificates
        .iter()
        .any(|(_, c)| c.verdict() == Verdict::Pass);
    Ok(if certified {
        EXIT_WITNESS
    } else {
        EXIT_NEGATIVE
    })
}

pub fn cmd_verify(cfg: &RunConfig, a: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let (game, goals) = load_inputs(&a.game, &a.goals)?;
    let witness = WitnessProfile::from_json(&game, &read(&a.witness)?)?;
    let w = match &a.w {
        Some(text) => text
            .parse()
            .map_err(|m: String| Error::PayoffOutOfRange(m))?,
        None => witness.levels.clone(),
    };
    let report = verify_witness(&game, &goals, &w, &witness)?;
    match cfg.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
        Format::Text => {
            for c in &report.checks {
                let mark = if c.passed { "pass" } else { "FAIL" };
                writeln!(out, "{mark} {}: {}", c.name, c.detail)?;
            }
        }
    }
    Ok(if report.passed() {
        EXIT_WITNESS
    } else {
        EXIT_NEGATIVE
    })
}

pub fn cmd_selftest(cfg: &RunConfig, a: &SelftestArgs, out: &mut dyn Write) -> Result<i32> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut all_ok = true;
    let mut line = |name: &str, agree: usize, total: usize, out: &mut dyn Write| -> Result<()> {
        all_ok &= agree == total;
        match cfg.format {
            Format::Text => writeln!(out, "{name}: {agree}/{total} agree")?,
            Format::Json => writeln!(
                out,
                "{}",
                json!({"check": name, "agree": agree, "total": total})
            )?,
        }
        Ok(())
    };

    let mut agree = 0;
    let words = a.trials * 5;
    for _ in 0..words {
        let gamma = rng.gen_range(2..=3);
        let mu = rng.gen_range(1..=4);
        let (stem, cycle) = random_word(&mut rng, 4, 4, mu);
        let t = random_rational(&mut rng, mu * 2, 12);
        let relation = random_relation(&mut rng, false);
        let c = build_comparator(relation, &t, mu, gamma);
        if c.run_on_lasso(&stem, &cycle)? == exact_compare(&stem, &cycle, relation, &t, gamma) {
            agree += 1;
        }
    }
    line("comparator vs exact arithmetic", agree, words, out)?;

    let mut agree = 0;
    for _ in 0..a.trials {
        let n = rng.gen_range(1..=10);
        let g = random_turn_game(&mut rng, n, 2, 0.2);
        if solve_game(&g).winner == oracle_solve_positional(&g)?.winner {
            agree += 1;
        }
    }
    line("attractor vs positional enumeration", agree, a.trials, out)?;

    let mut agree = 0;
    let mut total = 0;
    for _ in 0..a.trials.div_ceil(4) {
        let game = random_game(&mut rng, &GameShape::default());
        let bounds = reward_bounds(&game);
        let hints: Vec<_> = (0..game.num_agents())
            .map(|i| bounds.agent(i).upper.clone() / crate::rational::int(2))
            .collect();
        let goals: Vec<Goal> = (0..game.num_agents())
            .map(|_| random_satisficing(&mut rng, 3, &hints))
            .collect();
        let solver = Solver::new(&game, &goals, search_config(cfg, false))?;
        for report in solver.enumerate(Mode::All)? {
            if let Some(w) = report.witness() {
                total += 1;
                if verify_witness(&game, &goals, &report.w, w)?.passed() {
                    agree += 1;
                }
            }
        }
    }
    line("witnesses vs independent verification", agree, total, out)?;

    Ok(if all_ok { EXIT_WITNESS } else { EXIT_NEGATIVE })
}

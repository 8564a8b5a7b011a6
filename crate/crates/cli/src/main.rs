use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use quitting_core::block::{build_block, check_block};
use quitting_core::classify::{classify_players, CLASSIFY_TOLERANCE};
use quitting_core::geometry::{FeasibleSet, GEOMETRY_TOLERANCE};
use quitting_core::lcp::{q_matrix_test, solve_lcp_kind, SolutionKind, RESIDUAL_TOLERANCE};
use quitting_core::linalg::Matrix;
use quitting_core::scalar::Scalar;
use quitting_core::stationary::{stationary_equilibrium, GAIN_SLACK};
use quitting_core::sunspot::evaluate::{verify_sunspot, SunspotReport, GAIN_FACTOR};
use quitting_core::sunspot::mmatrix::{implement_payoff, m_matrix_targets, verify_recurrent, RecurrentProfile};
use quitting_core::sunspot::profile::assemble_profile;
use quitting_core::sunspot::sequence::generate_sequence;
use quitting_core::sunspot::simulate::{simulate_profile, simulate_recurrent, SimulationReport, DEFAULT_MAX_STAGES};
use quitting_core::sunspot::SunspotProfile;
use quitting_core::{Error, QuittingGame};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "quitting", version, about = "Stationary and sunspot ε-equilibria of quitting games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GameArgs {
    /// Game file: {"players": N, "payoffs": {"": [...], "1": [...], "1,2": [...], ...}}
    game: PathBuf,
    /// Reject payoffs outside [-1, 1] instead of rescaling them.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Normal/abnormal classification and the restricted matrix.
    Classify(GameArgs),
    /// Solve an LCP given as a matrix file and a vector q.
    Lcp {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        /// any, nontrivial (z_0 < 1), or standard (w = q + R z)
        #[arg(long, default_value = "standard")]
        kind: String,
        /// Solve in exact rational arithmetic.
        #[arg(long)]
        exact: bool,
    },
    /// Q-matrix test: determinant criterion for cyclic 3x3 patterns, sampling otherwise.
    Qtest {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Stationary ε-equilibrium when one of the stationary constructions applies.
    Stationary {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
    },
    /// Building block at an anchor y on the boundary of D.
    Block {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Anchor, comma-separated, one entry per normal player.
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        /// Geometry tolerance for membership and boundary tests.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Sunspot ε-equilibrium: kiloblock construction, or a recurrent profile for --target.
    Sunspot {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Payoff vector to implement, comma-separated, one entry per player.
        #[arg(long, allow_hyphen_values = true)]
        target: Option<String>,
        /// Write the profile to this file.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Exact value and deviation gains of a profile file.
    Verify {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
    },
    /// Monte-Carlo play of a profile file.
    Simulate {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        runs: u64,
    },
    /// Unit-direction targets for games whose restricted matrix has one positive entry per row and column.
    Mmatrix {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long)]
        exact: bool,
    },
}

/// A JSON report and whether the checked property held.
struct Report {
    body: Value,
    pass: bool,
}

struct Loaded {
    game: QuittingGame,
    warnings: Vec<String>,
}

fn load_game(args: &GameArgs) -> Result<Loaded> {
    let game = QuittingGame::load(&args.game, !args.strict).with_context(|| format!("loading {}", args.game.display()))?;
    let mut warnings = game.warnings();
    let game = if game.is_normalized() {
        game
    } else {
        warnings.push("solo-quit payoffs r^i_i shifted to 0 before construction".into());
        game.normalize()
    };
    Ok(Loaded { game, warnings })
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad number {s:?}")))
        .collect()
}

fn load_matrix(path: &Path) -> Result<Matrix<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text).context("matrix file must be a JSON array of rows")?;
    Ok(Matrix::from_rows(&rows)?)
}

fn one_based(ids: &[usize]) -> Vec<usize> {
    ids.iter().map(|i| i + 1).collect()
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn classify(args: &GameArgs, warnings: &mut Vec<String>) -> Result<Report> {
    let loaded = load_game(args)?;
    warnings.extend(loaded.warnings);
    let cls = classify_players(&loaded.game);
    let matrix = cls.restricted_matrix().map(|m| m.to_rows()).ok();
    Ok(Report {
        body: json!({
            "players": loaded.game.n_players(),
            "normal_set": one_based(cls.normal_set()),
            "chain": cls.chain.iter().map(|l| one_based(l)).collect::<Vec<_>>(),
            "restricted_matrix": matrix,
            "scale": loaded.game.scale(),
        }),
        pass: true,
    })
}

fn lcp(matrix: &Path, q: &str, kind: &str, exact: bool) -> Result<Report> {
    let r = load_matrix(matrix)?;
    let q = parse_vector(q)?;
    let kind = match kind {
        "any" => SolutionKind::Any,
        "nontrivial" => SolutionKind::Nontrivial,
        "standard" => SolutionKind::Standard,
        other => bail!("unknown --kind {other:?}; use any, nontrivial, or standard"),
    };
    let sol = if exact {
        let rr = r.map(|v| num_rational::BigRational::from_f64(*v));
        let qq: Vec<_> = q.iter().map(|v| num_rational::BigRational::from_f64(*v)).collect();
        solve_lcp_kind(&rr, &qq, kind)?.map(|s| s.to_f64())
    } else {
        solve_lcp_kind(&r, &q, kind)?
    };
    let solution = sol.as_ref().map(|s| {
        let standard_z: Option<Vec<f64>> = (s.z[0] > 0.0).then(|| s.z[1..].iter().map(|v| v / s.z[0]).collect());
        json!({ "z": s.z, "w": s.w, "support": one_based(&s.support()), "standard_z": standard_z })
    });
    Ok(Report {
        body: json!({
            "kind": format!("{kind:?}").to_lowercase(),
            "exact": exact,
            "found": sol.is_some(),
            "solution": solution,
        }),
        pass: sol.is_some(),
    })
}

fn qtest(matrix: &Path, samples: usize, seed: u64) -> Result<Report> {
    let r = load_matrix(matrix)?;
    let v = q_matrix_test(&r, samples, seed)?;
    Ok(Report { body: json!({ "seed": seed, "result": to_value(&v) }), pass: true })
}

fn stationary(args: &GameArgs, eps: f64, warnings: &mut Vec<String>) -> Result<Report> {
    let loaded = load_game(args)?;
    warnings.extend(loaded.warnings);
    match stationary_equilibrium(&loaded.game, eps)? {
        Some(out) => Ok(Report {
            body: json!({
                "applies": true,
                "branch": to_value(&out.branch),
                "eps_requested": eps,
                "eps_used": out.eps,
                "halvings": out.halvings,
                "profile": out.profile.quit_probs(),
                "report": to_value(&out.report),
            }),
            pass: out.report.pass,
        }),
        None => Ok(Report {
            body: json!({
                "applies": false,
                "reason": "the normal set is nonempty and LCP(R, 0) has only the trivial solution; use the sunspot command",
            }),
            pass: false,
        }),
    }
}

fn feasible_set(game: &QuittingGame, tolerance: Option<f64>) -> Result<(quitting_core::classify::Classification, FeasibleSet)> {
    let cls = classify_players(game);
    let mut d = FeasibleSet::from_classification(&cls)?;
    if let Some(t) = tolerance {
        d.tolerance = t;
    }
    Ok((cls, d))
}

fn block(args: &GameArgs, eps: f64, y: &str, tolerance: Option<f64>, warnings: &mut Vec<String>) -> Result<Report> {
    let loaded = load_game(args)?;
    warnings.extend(loaded.warnings);
    let (_, d) = feasible_set(&loaded.game, tolerance)?;
    let y = parse_vector(y)?;
    if y.len() != d.n_vertices() {
        bail!("anchor has {} entries; the game has {} normal players", y.len(), d.n_vertices());
    }
    if !d.contains(&y) || !d.on_boundary(&y) {
        bail!("anchor {y:?} is not on the boundary of D");
    }
    match build_block(&d, &y, eps) {
        Ok(b) => {
            let check = check_block(&b, &d, eps);
            Ok(Report { body: json!({ "block": to_value(&b), "check": to_value(&check) }), pass: check.pass })
        }
        Err(Error::BlockCheck { condition, detail }) => Ok(Report {
            body: json!({ "block": null, "failed_condition": condition, "detail": detail }),
            pass: false,
        }),
        Err(e) => Err(e.into()),
    }
}

fn sunspot_report_json(report: &SunspotReport, players: &[usize]) -> Value {
    let mut v = to_value(report);
    // Player ids inside the megablock diagnostic are reported 1-based like everywhere else.
    if let Some(blocks) = v.pointer_mut("/megablocks/megablocks").and_then(Value::as_array_mut) {
        for m in blocks {
            if let Some(q) = m.get_mut("heavy_quitters") {
                let ids: Vec<usize> = serde_json::from_value(q.clone()).unwrap_or_default();
                *q = json!(one_based(&ids));
            }
        }
    }
    v["normal_players"] = json!(one_based(players));
    v
}

fn write_profile(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn sunspot(args: &GameArgs, eps: f64, target: Option<&str>, out: Option<&Path>, tolerance: Option<f64>, warnings: &mut Vec<String>) -> Result<Report> {
    let loaded = load_game(args)?;
    warnings.extend(loaded.warnings);
    let game = &loaded.game;
    let (cls, d) = feasible_set(game, tolerance)?;
    if let Some(t) = target {
        let t = parse_vector(t)?;
        let profile = implement_payoff(game, &cls, &t, eps)?;
        let report = verify_recurrent(&profile, game, eps, Some(&t))?;
        if let Some(path) = out {
            write_profile(path, &profile.to_json())?;
        }
        return Ok(Report {
            body: json!({
                "construction": "recurrent",
                "eps": eps,
                "target": t,
                "profile": profile.to_json(),
                "report": to_value(&report),
            }),
            pass: report.pass,
        });
    }
    let seq = match generate_sequence(&d, eps) {
        Err(Error::StationaryPathApplies) => bail!("LCP(R, 0) has a nontrivial solution; use the stationary command"),
        other => other?,
    };
    let profile = assemble_profile(&seq, cls.normal_set())?;
    let report = verify_sunspot(&profile, game, eps)?;
    if let Some(path) = out {
        write_profile(path, &profile.to_json())?;
    }
    let mut lens: Vec<u64> = profile.kiloblocks.iter().map(|k| k.block_len).collect();
    lens.sort_unstable();
    lens.dedup();
    Ok(Report {
        body: json!({
            "construction": "kiloblocks",
            "eps": eps,
            "sequence": {
                "length": seq.len(),
                "drift_sum": seq.drift_sum,
                "drift_target": seq.drift_target,
                "jump_sum": seq.jump_sum,
                "jump_budget": seq.jump_budget,
                "limit_jumps": seq.limit_jumps,
                "start": seq.points.first(),
                "end": seq.points.last(),
            },
            "profile_summary": {
                "kiloblocks": profile.kiloblocks.len(),
                "block_lengths": lens,
                "max_stage_prob": profile.max_stage_prob(),
                "written_to": out.map(|p| p.display().to_string()),
            },
            "report": sunspot_report_json(&report, &profile.players),
        }),
        pass: report.pass,
    })
}

enum AnyProfile {
    Kiloblocks(SunspotProfile),
    Recurrent(RecurrentProfile),
}

fn load_profile(path: &Path) -> Result<AnyProfile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).context("profile is not valid JSON")?;
    if value.get("nodes").is_some() {
        Ok(AnyProfile::Recurrent(RecurrentProfile::from_json_str(&text)?))
    } else {
        Ok(AnyProfile::Kiloblocks(SunspotProfile::from_json_str(&text)?))
    }
}

fn verify(args: &GameArgs, profile: &Path, eps: f64, warnings: &mut Vec<String>) -> Result<Report> {
    let loaded = load_game(args)?;
    warnings.extend(loaded.warnings);
    match load_profile(profile)? {
        AnyProfile::Kiloblocks(p) => {
            let report = verify_sunspot(&p, &loaded.game, eps)?;
            Ok(Report { body: json!({ "profile_kind": "kiloblocks", "report": sunspot_report_json(&report, &p.players) }), pass: report.pass })
        }
        AnyProfile::Recurrent(p) => {
            let report = verify_recurrent(&p, &loaded.game, eps, None)?;
            Ok(Report { body: json!({ "profile_kind": "recurrent", "report": to_value(&report) }), pass: report.pass })
        }
    }
}

fn simulate(args: &GameArgs, profile: &Path, seed: u64, runs: u64, warnings: &mut Vec<String>) -> Result<Report> {
    if runs == 0 {
        bail!("--runs must be at least 1");
    }
    let loaded = load_game(args)?;
    warnings.extend(loaded.warnings);
    let (kind, sim, exact): (&str, SimulationReport, Vec<f64>) = match load_profile(profile)? {
        AnyProfile::Kiloblocks(p) => (
            "kiloblocks",
            simulate_profile(&p, &loaded.game, seed, runs, DEFAULT_MAX_STAGES)?,
            quitting_core::sunspot::exact_value(&p, &loaded.game)?,
        ),
        AnyProfile::Recurrent(p) => (
            "recurrent",
            simulate_recurrent(&p, &loaded.game, seed, runs, DEFAULT_MAX_STAGES)?,
            quitting_core::sunspot::mmatrix::recurrent_value(&p, &loaded.game)?,
        ),
    };
    let agrees = sim.estimate.agrees_with(&exact, 3.0);
    Ok(Report {
        body: json!({
            "profile_kind": kind,
            "seed": seed,
            "runs": runs,
            "simulation": to_value(&sim),
            "exact_value": exact,
            "within_3_standard_errors": agrees,
        }),
        pass: agrees,
    })
}

fn mmatrix(args: &GameArgs, exact: bool, warnings: &mut Vec<String>) -> Result<Report> {
    let loaded = load_game(args)?;
    warnings.extend(loaded.warnings);
    let cls = classify_players(&loaded.game);
    let r = cls.restricted_matrix()?;
    let body = if exact {
        let t = m_matrix_targets(&r.map(|v| num_rational::BigRational::from_f64(*v)))?;
        let s = |v: &Vec<num_rational::BigRational>| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        json!({
            "exact": true,
            "nodes": (0..t.w.len()).map(|i| json!({
                "player": cls.normal_set()[i] + 1,
                "w": s(&t.w[i]),
                "lambda": s(&t.lambda[i]),
                "lambda_norm": t.lambda_norm[i].to_string(),
                "quitter": cls.normal_set()[t.quitter[i]] + 1,
                "alpha": t.alpha[i].to_string(),
                "y_mid": s(&t.y_mid[i]),
                "beta": s(&t.beta[i]),
                "degenerate": t.degenerate[i],
            })).collect::<Vec<_>>(),
        })
    } else {
        let t = m_matrix_targets(r)?;
        json!({
            "exact": false,
            "nodes": (0..t.w.len()).map(|i| json!({
                "player": cls.normal_set()[i] + 1,
                "w": t.w[i],
                "lambda": t.lambda[i],
                "lambda_norm": t.lambda_norm[i],
                "quitter": cls.normal_set()[t.quitter[i]] + 1,
                "alpha": t.alpha[i],
                "y_mid": t.y_mid[i],
                "beta": t.beta[i],
                "degenerate": t.degenerate[i],
            })).collect::<Vec<_>>(),
        })
    };
    Ok(Report { body, pass: true })
}

/// Rounds every float to 12 significant digits so reports are stable across platforms.
fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
            *v = serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number);
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Classify(_) => "classify",
        Command::Lcp { .. } => "lcp",
        Command::Qtest { .. } => "qtest",
        Command::Stationary { .. } => "stationary",
        Command::Block { .. } => "block",
        Command::Sunspot { .. } => "sunspot",
        Command::Verify { .. } => "verify",
        Command::Simulate { .. } => "simulate",
        Command::Mmatrix { .. } => "mmatrix",
    }
}

fn run(cli: &Cli, warnings: &mut Vec<String>) -> Result<Report> {
    match &cli.command {
        Command::Classify(g) => classify(g, warnings),
        Command::Lcp { matrix, q, kind, exact } => lcp(matrix, q, kind, *exact),
        Command::Qtest { matrix, samples, seed } => qtest(matrix, *samples, *seed),
        Command::Stationary { game, eps } => stationary(game, *eps, warnings),
        Command::Block { game, eps, y, tolerance } => block(game, *eps, y, *tolerance, warnings),
        Command::Sunspot { game, eps, target, profile, tolerance } => {
            sunspot(game, *eps, target.as_deref(), profile.as_deref(), *tolerance, warnings)
        }
        Command::Verify { game, profile, eps } => verify(game, profile, *eps, warnings),
        Command::Simulate { game, profile, seed, runs } => simulate(game, profile, *seed, *runs, warnings),
        Command::Mmatrix { game, exact } => mmatrix(game, *exact, warnings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut warnings = Vec::new();
    let report = match run(&cli, &mut warnings) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let mut out = Map::new();
    out.insert("tool".into(), json!("quitting"));
    out.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    out.insert("command".into(), json!(command_name(&cli.command)));
    out.insert(
        "tolerances".into(),
        json!({
            "classification": CLASSIFY_TOLERANCE,
            "lcp_residual": RESIDUAL_TOLERANCE,
            "geometry": GEOMETRY_TOLERANCE,
            "stationary_gain_slack": GAIN_SLACK,
            "sunspot_gain_factor": GAIN_FACTOR,
        }),
    );
    out.insert("warnings".into(), json!(warnings));
    if let Value::Object(body) = report.body {
        out.extend(body);
    }
    out.insert("pass".into(), json!(report.pass));
    let mut value = Value::Object(out);
    round_floats(&mut value);
    println!("{}", serde_json::to_string_pretty(&value).expect("report serializes"));
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

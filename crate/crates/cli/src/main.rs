//! bddlkit command line: validate definitions, sample initial conditions,
//! run scripted episodes, and inspect the knowledge base or a world.
//!
//! stdout carries exactly one machine-readable JSON document per invocation;
//! human-facing notes go to stderr. Exit codes: 0 clean, 1 diagnostics or
//! failures, 2 usage/IO errors.

use bddlkit::engine::{self, EpisodeReport, ScriptFile};
use bddlkit::kb::KnowledgeBase;
use bddlkit::parser;
use bddlkit::validate;
use bddlkit::world::{SceneDocument, WorldState};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bddlkit", version, about = "BDDL activity toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and statically validate an activity definition.
    Validate {
        /// Path to the .bddl problem file.
        problem: PathBuf,
        #[arg(long, env = "BDDLKIT_KB")]
        kb: PathBuf,
    },
    /// Instantiate an activity in a scene and emit the world snapshot.
    Sample {
        problem: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, env = "BDDLKIT_KB")]
        kb: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Full restarts before instantiation gives up.
        #[arg(long, default_value_t = 100)]
        budget: u32,
        /// Also write the document to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a primitive script against an instantiated world.
    Run {
        /// World snapshot or a `sample` output document.
        world: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, env = "BDDLKIT_KB")]
        kb: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// Simulation step resolution in seconds.
        #[arg(long, default_value_t = 1.0 / 60.0)]
        dt: f64,
        /// Run this many seeded episodes and merge the reports.
        #[arg(long)]
        episodes: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads for batch episodes.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect the registry, a synset, rule matches, or a single predicate.
    Inspect {
        #[command(subcommand)]
        what: Inspect,
    },
}

#[derive(Subcommand)]
enum Inspect {
    /// Dump the predicate registry.
    Predicates {
        #[arg(long, env = "BDDLKIT_KB")]
        kb: PathBuf,
    },
    /// Inferred property set of a synset.
    Properties {
        synset: String,
        #[arg(long, env = "BDDLKIT_KB")]
        kb: PathBuf,
    },
    /// Dry-run transition-rule matching against a world snapshot.
    Rules {
        #[arg(long)]
        world: PathBuf,
        #[arg(long, env = "BDDLKIT_KB")]
        kb: PathBuf,
        #[arg(long, default_value_t = true)]
        dry_run: bool,
    },
    /// Evaluate one ground literal against a world snapshot.
    Check {
        /// Literal as an s-expression, e.g. "(frozen turkey.n.01_1)".
        atom: String,
        #[arg(long)]
        world: PathBuf,
        #[arg(long, env = "BDDLKIT_KB")]
        kb: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))
}

fn load_kb(path: &Path) -> anyhow::Result<KnowledgeBase> {
    KnowledgeBase::from_json(&read(path)?)
        .map_err(|e| anyhow::anyhow!("invalid kb {}: {e}", path.display()))
}

/// Print the document to stdout (and optionally a file), deterministically.
fn emit(doc: &Value, out: Option<&Path>) -> anyhow::Result<()> {
    let text = format!("{}\n", serde_json::to_string_pretty(doc)?);
    if let Some(path) = out {
        fs::write(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Validate { problem, kb } => cmd_validate(&problem, &kb),
        Command::Sample { problem, scene, kb, seed, budget, out } => {
            cmd_sample(&problem, &scene, &kb, seed, budget, out.as_deref())
        }
        Command::Run { world, problem, kb, script, dt, episodes, seed, threads, out } => {
            cmd_run(&world, &problem, &kb, &script, dt, episodes, seed, threads, out.as_deref())
        }
        Command::Inspect { what } => cmd_inspect(what),
    }
}

fn cmd_validate(problem: &Path, kb_path: &Path) -> anyhow::Result<ExitCode> {
    let text = read(problem)?;
    let kb = load_kb(kb_path)?;
    let def = match parser::parse_problem(&text) {
        Ok(def) => def,
        Err(e) => {
            let doc = json!({
                "problem": null,
                "diagnostics": [{
                    "severity": "error",
                    "code": "parse",
                    "location": problem.display().to_string(),
                    "message": e.to_string(),
                }],
            });
            emit(&doc, None)?;
            return Ok(ExitCode::from(1));
        }
    };
    let diagnostics = validate::validate_problem(&def, &kb);
    let has_errors = validate::has_errors(&diagnostics);
    let doc = json!({
        "problem": def.problem_name,
        "objects": def.objects.len(),
        "diagnostics": diagnostics,
    });
    emit(&doc, None)?;
    Ok(ExitCode::from(u8::from(has_errors)))
}

fn cmd_sample(
    problem: &Path,
    scene: &Path,
    kb_path: &Path,
    seed: u64,
    budget: u32,
    out: Option<&Path>,
) -> anyhow::Result<ExitCode> {
    let kb = load_kb(kb_path)?;
    let def = parser::parse_problem(&read(problem)?)
        .map_err(|e| anyhow::anyhow!("parse {}: {e}", problem.display()))?;
    let scene: SceneDocument = serde_json::from_str(&read(scene)?)
        .map_err(|e| anyhow::anyhow!("invalid scene: {e}"))?;
    match engine::instantiate_activity(&def, &scene, &kb, seed, budget) {
        Ok(inst) => {
            let doc = json!({
                "problem": def.problem_name,
                "seed": seed,
                "restarts": inst.restarts,
                "attempts": inst.efforts,
                "grounding": inst.grounding,
                "world": serde_json::to_value(inst.world.canonical())?,
            });
            emit(&doc, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            let doc = json!({
                "problem": def.problem_name,
                "seed": seed,
                "error": e.to_string(),
            });
            emit(&doc, out)?;
            Ok(ExitCode::from(1))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    world_path: &Path,
    problem: &Path,
    kb_path: &Path,
    script_path: &Path,
    dt: f64,
    episodes: Option<u32>,
    seed: u64,
    threads: usize,
    out: Option<&Path>,
) -> anyhow::Result<ExitCode> {
    let kb = load_kb(kb_path)?;
    let def = parser::parse_problem(&read(problem)?)
        .map_err(|e| anyhow::anyhow!("parse {}: {e}", problem.display()))?;
    let script: ScriptFile = serde_json::from_str(&read(script_path)?)
        .map_err(|e| anyhow::anyhow!("invalid script: {e}"))?;
    if script.version != 1 {
        anyhow::bail!("unsupported script version {}", script.version);
    }

    let (world, grounding) = load_world(world_path)?;

    match episodes {
        None => {
            let mut w = world;
            let report = engine::run_episode(&mut w, &kb, &grounding, &def, &script.primitives, dt)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            emit(&serde_json::to_value(&report)?, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Some(n) => {
            let reports = run_batch(&world, &kb, &grounding, &def, &script.primitives, dt, n, seed, threads)?;
            let successes = reports.iter().filter(|r| r.success).count();
            let mean = |f: fn(&EpisodeReport) -> f64| {
                if reports.is_empty() {
                    0.0
                } else {
                    reports.iter().map(f).sum::<f64>() / reports.len() as f64
                }
            };
            let doc = json!({
                "episodes": n,
                "base_seed": seed,
                "summary": {
                    "successes": successes,
                    "success_rate": successes as f64 / n.max(1) as f64,
                    "mean_q_score": mean(|r| r.q_score),
                    "mean_dist_nav": mean(|r| r.dist_nav),
                    "mean_sim_time": mean(|r| r.sim_time),
                    "mean_kin_dis": mean(|r| r.kin_dis),
                },
                "reports": reports,
            });
            emit(&doc, out)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Independent seeded episodes fan out across worker threads; reports merge
/// by episode index, so the output does not depend on the thread count.
#[allow(clippy::too_many_arguments)]
fn run_batch(
    world: &WorldState,
    kb: &KnowledgeBase,
    grounding: &engine::Grounding,
    def: &bddlkit::ActivityDefinition,
    script: &[engine::Primitive],
    dt: f64,
    episodes: u32,
    seed: u64,
    threads: usize,
) -> anyhow::Result<Vec<EpisodeReport>> {
    let threads = threads.max(1);
    let mut reports: Vec<Option<EpisodeReport>> = vec![None; episodes as usize];
    std::thread::scope(|scope| -> anyhow::Result<()> {
        let mut handles = Vec::new();
        for worker in 0..threads {
            let reports_chunk: Vec<u32> =
                (0..episodes).filter(|e| (*e as usize) % threads == worker).collect();
            let world = world.clone();
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                for e in reports_chunk {
                    let mut w = world.clone();
                    w.rng = bddlkit::rng::Rng::new(seed.wrapping_add(e as u64));
                    let report = engine::run_episode(&mut w, kb, grounding, def, script, dt)
                        .map_err(|err| err.to_string())?;
                    out.push((e, report));
                }
                Ok::<_, String>(out)
            }));
        }
        for handle in handles {
            let chunk = handle.join().expect("worker panicked").map_err(|e| anyhow::anyhow!(e))?;
            for (e, report) in chunk {
                reports[e as usize] = Some(report);
            }
        }
        Ok(())
    })?;
    Ok(reports.into_iter().map(|r| r.expect("all episodes ran")).collect())
}

/// A world argument may be a bare snapshot or a `sample` output document;
/// the latter carries the grounding along.
fn load_world(path: &Path) -> anyhow::Result<(WorldState, engine::Grounding)> {
    let raw: Value = serde_json::from_str(&read(path)?)?;
    let (world_value, grounding) = if raw.get("world").is_some() {
        let grounding: engine::Grounding =
            serde_json::from_value(raw.get("grounding").cloned().unwrap_or(json!({})))?;
        (raw["world"].clone(), grounding)
    } else {
        (raw, engine::Grounding::default())
    };
    let world: WorldState = serde_json::from_value(world_value)
        .map_err(|e| anyhow::anyhow!("invalid world snapshot: {e}"))?;
    Ok((world, grounding))
}

fn cmd_inspect(what: Inspect) -> anyhow::Result<ExitCode> {
    match what {
        Inspect::Predicates { kb } => {
            load_kb(&kb)?; // the registry is static, but the kb must be sound
            emit(&json!({ "predicates": bddlkit::predicates::registry() }), None)?;
            Ok(ExitCode::SUCCESS)
        }
        Inspect::Properties { synset, kb } => {
            let kb = load_kb(&kb)?;
            match kb.infer_properties(&synset) {
                Ok(props) => {
                    let applicable = kb.applicable_predicates(&synset).unwrap_or_default();
                    let doc = json!({
                        "synset": synset,
                        "leaf": kb.is_leaf(&synset),
                        "properties": props,
                        "applicable_predicates":
                            applicable.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                    });
                    emit(&doc, None)?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    emit(&json!({ "synset": synset, "error": e.to_string() }), None)?;
                    Ok(ExitCode::from(1))
                }
            }
        }
        Inspect::Rules { world, kb, dry_run: _ } => {
            let kb = load_kb(&kb)?;
            let (world, _) = load_world(&world)?;
            let matches = bddlkit::transitions::match_rules(&world, &kb);
            emit(&json!({ "matches": matches }), None)?;
            Ok(ExitCode::SUCCESS)
        }
        Inspect::Check { atom, world, kb } => {
            let kb = load_kb(&kb)?;
            let (world, grounding) = load_world(&world)?;
            let literal = parser::parse_literal(&atom)
                .map_err(|e| anyhow::anyhow!("invalid literal: {e}"))?;
            let args: Vec<String> =
                literal.args.iter().map(|a| grounding.resolve(a)).collect();
            match bddlkit::predicates::check(&world, &kb, literal.pred, &args) {
                Ok(value) => {
                    let holds = value == literal.polarity;
                    emit(
                        &json!({ "literal": literal.to_string(), "value": holds }),
                        None,
                    )?;
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    emit(
                        &json!({ "literal": literal.to_string(), "error": e.to_string() }),
                        None,
                    )?;
                    Ok(ExitCode::from(1))
                }
            }
        }
    }
}

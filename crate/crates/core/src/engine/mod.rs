//! Activity engine: instantiate definitions into worlds, run scripted
//! episodes of symbolic action primitives, evaluate goals, compute metrics.

mod episode;
mod goal;
mod matching;

pub use episode::{
    compute_metrics, execute_primitive, goal_of, run_episode, EpisodeError, EpisodeReport,
    Placement, Primitive, PrimitiveOutcome, ScriptFile, StepRecord,
};
pub use goal::{evaluate_goal, leaf_count, EvalError};
pub use matching::BipartiteGraph;

use crate::ast::{synset_of_instance, ActivityDefinition, GroundLiteral, Pred};
use crate::kb::KnowledgeBase;
use crate::predicates::{self, PredError, DEFAULT_ATTEMPTS};
use crate::validate::{self, Diagnostic};
use crate::world::{make_object, SceneDocument, WorldError, WorldState, AGENT_ID};
use crate::geom::Vec3;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// How definition instances map onto the instantiated world.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    /// instance id -> world object id (injective on non-substances).
    pub objects: BTreeMap<String, String>,
    /// substance instance id -> substance synset.
    pub substances: BTreeMap<String, String>,
    /// instance id -> room id, from `inroom` literals.
    pub rooms: BTreeMap<String, String>,
}

impl Grounding {
    /// World-level argument for a definition-level instance id.
    pub fn resolve(&self, instance: &str) -> String {
        if let Some(obj) = self.objects.get(instance) {
            return obj.clone();
        }
        if let Some(synset) = self.substances.get(instance) {
            return synset.clone();
        }
        instance.to_string()
    }
}

#[derive(Debug, Error)]
pub enum InstantiateError {
    #[error("definition has validation errors: {}", format_diags(.0))]
    Validation(Vec<Diagnostic>),
    #[error("no room of type `{room_type}` in the scene (literal {literal})")]
    MissingRoomType { literal: String, room_type: String },
    #[error("unsatisfiable within budget: literal {literal} failed after {restarts} restarts")]
    Unsatisfiable { literal: String, restarts: u32 },
    #[error("re-check failed for init literal {literal}")]
    RecheckFailed { literal: String },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("sampling {literal}: {source}")]
    Sampling { literal: String, source: PredError },
}

fn format_diags(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .filter(|d| d.severity == validate::Severity::Error)
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Per-literal sampling effort, reported by the sample command.
#[derive(Debug, Clone, Serialize)]
pub struct SampleEffort {
    pub literal: String,
    pub attempts: u32,
}

pub struct Instantiation {
    pub world: WorldState,
    pub grounding: Grounding,
    pub efforts: Vec<SampleEffort>,
    pub restarts: u32,
}

/// Local sampling failures on one literal before a full restart.
const LOCAL_FAILURES: u32 = 10;

/// Instantiate an activity in a scene: bind `inroom` fixtures, create fresh
/// objects for everything else, sample the init literals in dependency order
/// (kinematics with restart-based backtracking, then substances, then
/// states), and re-check every literal.
pub fn instantiate_activity(
    def: &ActivityDefinition,
    scene: &SceneDocument,
    kb: &KnowledgeBase,
    seed: u64,
    budget: u32,
) -> Result<Instantiation, InstantiateError> {
    let diags = validate::validate_problem(def, kb);
    if validate::has_errors(&diags) {
        return Err(InstantiateError::Validation(diags));
    }
    let def = validate::canonicalize_args(&def.normalized(), kb);

    let (mut world, _warnings) = WorldState::load_scene(scene, kb, seed)?;
    let mut grounding = Grounding::default();

    // --- instance inventory -------------------------------------------------
    let mut instances: Vec<(String, String)> = def.objects.clone();
    let mut known: BTreeSet<String> = instances.iter().map(|(id, _)| id.clone()).collect();
    for lit in &def.init {
        for (idx, arg) in lit.args.iter().enumerate() {
            if lit.pred == Pred::InRoom && idx == 1 {
                continue;
            }
            if !known.contains(arg) {
                if let Some(synset) = synset_of_instance(arg) {
                    if kb.contains(synset) {
                        known.insert(arg.clone());
                        instances.push((arg.clone(), synset.to_string()));
                    }
                }
            }
        }
    }

    let futures: BTreeSet<String> =
        def.future_instances().into_iter().map(str::to_string).collect();

    // --- bindings ------------------------------------------------------------
    // rooms first: inroom literals pin fixtures
    let mut bound_world_objects: BTreeSet<String> = BTreeSet::new();
    for lit in def.init.iter().filter(|l| l.pred == Pred::InRoom && l.polarity) {
        let (instance, room_type) = (&lit.args[0], &lit.args[1]);
        let room_id = world
            .rooms
            .iter()
            .find(|(_, r)| r.room_type == *room_type)
            .map(|(id, _)| id.clone())
            .ok_or_else(|| InstantiateError::MissingRoomType {
                literal: lit.to_string(),
                room_type: room_type.clone(),
            })?;
        grounding.rooms.insert(instance.clone(), room_id.clone());

        let synset = instances
            .iter()
            .find(|(id, _)| id == instance)
            .map(|(_, s)| s.clone())
            .unwrap_or_else(|| synset_of_instance(instance).unwrap_or_default().to_string());
        if synset == "floor.n.01" {
            let fid = world.floor_id_of_room(&room_id);
            grounding.objects.insert(instance.clone(), fid);
            continue;
        }
        // fixture of the same (or descendant) synset inside that room
        let fixture = world
            .real_objects()
            .find(|(id, o)| {
                !bound_world_objects.contains(*id)
                    && kb.is_descendant_or_equal(&o.synset, &synset)
                    && world.rooms[&room_id].contains(o.position.x, o.position.y)
            })
            .map(|(id, _)| id.clone());
        if let Some(fid) = fixture {
            bound_world_objects.insert(fid.clone());
            grounding.objects.insert(instance.clone(), fid);
        }
    }

    // everything else becomes a fresh object (agent binds to the scene agent)
    let mut staging = 0usize;
    for (instance, synset) in &instances {
        if grounding.objects.contains_key(instance) || grounding.substances.contains_key(instance)
        {
            continue;
        }
        if synset == "agent.n.01" {
            grounding.objects.insert(instance.clone(), AGENT_ID.to_string());
            bound_world_objects.insert(AGENT_ID.to_string());
            continue;
        }
        if kb.is_substance(synset) {
            grounding.substances.insert(instance.clone(), synset.clone());
            continue;
        }
        let is_future = futures.contains(instance);
        let mut obj = make_object(kb, synset, !is_future)?;
        // fresh objects wait on a staging row until a literal places them
        obj.position = Vec3::new(
            50.0 + 2.0 * staging as f64,
            50.0,
            obj.half_extents.z,
        );
        staging += 1;
        world.objects.insert(instance.clone(), obj);
        grounding.objects.insert(instance.clone(), instance.clone());
    }

    // --- sampling ---------------------------------------------------------------
    let mut efforts: Vec<SampleEffort>;

    // objects with an inroom binding but no kinematic placement sit on the
    // room floor
    let mut implicit: Vec<(String, String)> = Vec::new();
    for (instance, room_id) in &grounding.rooms {
        let world_id = grounding.resolve(instance);
        if world.is_floor(&world_id) || world_id == AGENT_ID {
            continue;
        }
        if bound_world_objects.contains(&world_id) && world_id != *instance {
            continue; // scene fixtures keep their authored pose
        }
        let placed_by_literal = def.init.iter().any(|l| {
            l.polarity
                && matches!(l.pred, Pred::OnTopOf | Pred::InsideOf | Pred::OnFloor | Pred::Under)
                && l.args.first() == Some(instance)
        });
        if !placed_by_literal {
            implicit.push((world_id, world.floor_id_of_room(room_id)));
        }
    }

    let phase_b: Vec<&GroundLiteral> = def
        .init
        .iter()
        .filter(|l| {
            matches!(
                l.pred,
                Pred::OnTopOf | Pred::InsideOf | Pred::OnFloor | Pred::Under | Pred::ConnectedWith
            ) && l.polarity
        })
        .collect();
    let phase_c: Vec<&GroundLiteral> = def
        .init
        .iter()
        .filter(|l| matches!(l.pred, Pred::Filled | Pred::Empty | Pred::Covered | Pred::InSource))
        .collect();
    let phase_d: Vec<&GroundLiteral> = def
        .init
        .iter()
        .filter(|l| {
            matches!(
                l.pred,
                Pred::Cooked
                    | Pred::Burnt
                    | Pred::Frozen
                    | Pred::Heated
                    | Pred::Boiled
                    | Pred::OnFire
                    | Pred::ToggledOn
                    | Pred::Open
                    | Pred::Closed
                    | Pred::Soaked
                    | Pred::Sliced
                    | Pred::Broken
            )
        })
        .collect();

    let checkpoint = world.clone();
    let mut restarts = 0u32;
    'restart: loop {
        let mut attempt_log: Vec<SampleEffort> = Vec::new();
        for (world_id, floor_id) in &implicit {
            let mut local = 0;
            loop {
                match predicates::sample(
                    &mut world,
                    kb,
                    Pred::OnFloor,
                    &[world_id.clone(), floor_id.clone()],
                    true,
                    DEFAULT_ATTEMPTS,
                ) {
                    Ok(()) => {
                        attempt_log.push(SampleEffort {
                            literal: format!("(onfloor {world_id} {floor_id})"),
                            attempts: local + 1,
                        });
                        break;
                    }
                    Err(_) if local + 1 < LOCAL_FAILURES => local += 1,
                    Err(_) => {
                        restarts += 1;
                        if restarts >= budget {
                            return Err(InstantiateError::Unsatisfiable {
                                literal: format!("(onfloor {world_id} {floor_id})"),
                                restarts,
                            });
                        }
                        let rng = world.rng.clone();
                        world = checkpoint.clone();
                        world.rng = rng;
                        continue 'restart;
                    }
                }
            }
        }
        for lit in &phase_b {
            let args: Vec<String> = lit.args.iter().map(|a| grounding.resolve(a)).collect();
            let mut local = 0;
            loop {
                match predicates::sample(&mut world, kb, lit.pred, &args, true, DEFAULT_ATTEMPTS) {
                    Ok(()) => {
                        attempt_log
                            .push(SampleEffort { literal: lit.to_string(), attempts: local + 1 });
                        break;
                    }
                    Err(PredError::Exhausted { .. }) if local + 1 < LOCAL_FAILURES => local += 1,
                    Err(PredError::Exhausted { .. }) => {
                        restarts += 1;
                        if restarts >= budget {
                            return Err(InstantiateError::Unsatisfiable {
                                literal: lit.to_string(),
                                restarts,
                            });
                        }
                        let rng = world.rng.clone();
                        world = checkpoint.clone();
                        world.rng = rng;
                        continue 'restart;
                    }
                    Err(e) => {
                        return Err(InstantiateError::Sampling {
                            literal: lit.to_string(),
                            source: e,
                        })
                    }
                }
            }
        }
        efforts = attempt_log;
        break;
    }

    for lit in &phase_c {
        let args: Vec<String> = lit.args.iter().map(|a| grounding.resolve(a)).collect();
        if lit.pred == Pred::InSource {
            let obj = world.object_mut(&args[0])?;
            obj.insource_binding = Some(args[1].clone());
            continue;
        }
        predicates::sample(&mut world, kb, lit.pred, &args, lit.polarity, DEFAULT_ATTEMPTS)
            .map_err(|e| InstantiateError::Sampling { literal: lit.to_string(), source: e })?;
        efforts.push(SampleEffort { literal: lit.to_string(), attempts: 1 });
    }
    for lit in &phase_d {
        let args: Vec<String> = lit.args.iter().map(|a| grounding.resolve(a)).collect();
        predicates::sample(&mut world, kb, lit.pred, &args, lit.polarity, DEFAULT_ATTEMPTS)
            .map_err(|e| InstantiateError::Sampling { literal: lit.to_string(), source: e })?;
        efforts.push(SampleEffort { literal: lit.to_string(), attempts: 1 });
    }

    // --- full re-check ---------------------------------------------------------
    for lit in &def.init {
        if !recheck_literal(&world, kb, &grounding, lit)
            .map_err(|e| InstantiateError::Sampling { literal: lit.to_string(), source: e })?
        {
            return Err(InstantiateError::RecheckFailed { literal: lit.to_string() });
        }
    }

    Ok(Instantiation { world, grounding, efforts, restarts })
}

/// Re-check one init literal post-instantiation.
pub fn recheck_literal(
    world: &WorldState,
    kb: &KnowledgeBase,
    grounding: &Grounding,
    lit: &GroundLiteral,
) -> Result<bool, PredError> {
    let args: Vec<String> = lit.args.iter().map(|a| grounding.resolve(a)).collect();
    match lit.pred {
        Pred::InRoom => {
            let value = predicates::check(world, kb, lit.pred, &args)?;
            Ok(value == lit.polarity)
        }
        Pred::NextTo => {
            // never sampled directly; placement may or may not satisfy it
            let value = predicates::check(world, kb, lit.pred, &args)?;
            Ok(value == lit.polarity)
        }
        _ => {
            let value = predicates::check(world, kb, lit.pred, &args)?;
            Ok(value == lit.polarity)
        }
    }
}

//! Symbolic action primitives and scripted episode execution.

use super::goal::evaluate_goal;
use super::Grounding;
use crate::ast::{ActivityDefinition, Formula, Pred};
use crate::geom::Vec3;
use crate::kb::{KnowledgeBase, Property};
use crate::predicates::{self, DEFAULT_ATTEMPTS};
use crate::transitions;
use crate::world::WorldState;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Base locomotion speed (m/s) used to convert navigation distance to time.
pub const BASE_SPEED: f64 = 0.5;
/// Simulated seconds charged per manipulation primitive.
pub const MANIPULATION_SECONDS: f64 = 3.0;
/// Standing distance from the target surface after navigation.
pub const STANDING_DISTANCE: f64 = 0.6;
/// Candidate bearings around a navigation target.
pub const NAV_BEARINGS: usize = 16;
/// Where a held object rides, relative to the agent center.
const HOLD_FORWARD: f64 = 0.45;
const HOLD_HEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Ontop,
    Inside,
}

impl Placement {
    fn pred(self) -> Pred {
        match self {
            Placement::Ontop => Pred::OnTopOf,
            Placement::Inside => Pred::InsideOf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Navigate { target: String },
    Pick { target: String },
    Place { target: String, placement: Placement },
    Push { target: String, #[serde(default)] close: bool },
    Dip { target: String },
    Wipe { target: String },
}

impl Primitive {
    pub fn target(&self) -> &str {
        match self {
            Primitive::Navigate { target }
            | Primitive::Pick { target }
            | Primitive::Place { target, .. }
            | Primitive::Push { target, .. }
            | Primitive::Dip { target }
            | Primitive::Wipe { target } => target,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Primitive::Navigate { .. } => "navigate",
            Primitive::Pick { .. } => "pick",
            Primitive::Place { .. } => "place",
            Primitive::Push { .. } => "push",
            Primitive::Dip { .. } => "dip",
            Primitive::Wipe { .. } => "wipe",
        }
    }
}

/// Versioned script file: a list of primitives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptFile {
    pub version: u32,
    pub primitives: Vec<Primitive>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveOutcome {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Simulated seconds the primitive consumed.
    pub duration: f64,
    /// Base travel in meters (navigation only).
    pub distance: f64,
}

impl PrimitiveOutcome {
    fn ok(duration: f64, distance: f64) -> Self {
        PrimitiveOutcome { ok: true, failure: None, duration, distance }
    }

    fn fail(reason: impl Into<String>) -> Self {
        PrimitiveOutcome { ok: false, failure: Some(reason.into()), duration: 0.0, distance: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub primitive: Primitive,
    pub outcome: PrimitiveOutcome,
    pub kin_dis_delta: f64,
    pub sim_time_after: f64,
    pub q_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub version: u32,
    pub success: bool,
    pub q_score: f64,
    pub dist_nav: f64,
    pub sim_time: f64,
    pub kin_dis: f64,
    pub primitive_count: usize,
    pub trace: Vec<StepRecord>,
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("goal evaluation failed: {0}")]
    Eval(#[from] super::goal::EvalError),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
}

/// Execute one primitive against the world. Precondition violations return a
/// structured failure and leave the world untouched; the episode continues.
pub fn execute_primitive(
    world: &mut WorldState,
    kb: &KnowledgeBase,
    primitive: &Primitive,
    dt: f64,
) -> PrimitiveOutcome {
    let target = primitive.target().to_string();
    let Ok(target_obj) = world.real_object(&target) else {
        return PrimitiveOutcome::fail(format!("target `{target}` does not exist or is not real"));
    };
    let target_pos = target_obj.position;

    let outcome = match primitive {
        Primitive::Navigate { .. } => navigate(world, &target, target_pos),
        Primitive::Pick { .. } => pick(world, kb, &target),
        Primitive::Place { placement, .. } => place(world, kb, &target, *placement),
        Primitive::Push { close, .. } => push(world, kb, &target, *close),
        Primitive::Dip { .. } => dip(world, kb, &target),
        Primitive::Wipe { .. } => wipe(world, kb, &target),
    };

    if outcome.ok && outcome.duration > 0.0 {
        advance(world, kb, outcome.duration, dt);
    }
    outcome
}

/// Step the world through the primitive's duration at resolution `dt`.
fn advance(world: &mut WorldState, kb: &KnowledgeBase, duration: f64, dt: f64) {
    let mut remaining = duration;
    while remaining > 1e-12 {
        let step = remaining.min(dt);
        transitions::step_world(world, kb, step);
        remaining -= step;
    }
    sync_held(world);
}

/// A held object rides at the agent's hold point.
fn sync_held(world: &mut WorldState) {
    if let Some(held) = world.agent.held_object.clone() {
        let a = world.agent_center();
        let h = world.agent.heading;
        let to = Vec3::new(
            a.x + HOLD_FORWARD * h.cos(),
            a.y + HOLD_FORWARD * h.sin(),
            HOLD_HEIGHT,
        );
        let _ = world.move_object(&held, to);
    }
}

fn navigate(world: &mut WorldState, target: &str, target_pos: Vec3) -> PrimitiveOutcome {
    let agent_id = world.agent.object_id.clone();
    let base = world.agent_center();
    let agent_half = world.agent_object().half_extents;
    let target_aabb = world.objects[target].aabb();

    let mut best: Option<(f64, Vec3)> = None;
    for k in 0..NAV_BEARINGS {
        let angle = 2.0 * std::f64::consts::PI * k as f64 / NAV_BEARINGS as f64;
        let dir = (angle.cos(), angle.sin());
        // stand STANDING_DISTANCE out from the target surface along the bearing
        let radius = (target_aabb.half.x * dir.0.abs() + target_aabb.half.y * dir.1.abs())
            + STANDING_DISTANCE;
        let candidate = Vec3::new(
            target_pos.x + dir.0 * radius,
            target_pos.y + dir.1 * radius,
            agent_half.z,
        );
        if !world.rooms.is_empty() && world.room_of_point(candidate.x, candidate.y).is_none() {
            continue;
        }
        let body = crate::geom::Aabb::new(candidate, agent_half);
        let held = world.agent.held_object.clone();
        let collides = world.real_objects().any(|(id, o)| {
            *id != agent_id
                && Some(id.as_str()) != held.as_deref()
                && *id != target
                && o.aabb().overlaps(&body)
        });
        if collides {
            continue;
        }
        let d = base.dist_xy(candidate);
        if best.map(|(bd, _)| d < bd).unwrap_or(true) {
            best = Some((d, candidate));
        }
    }
    let Some((dist, standing)) = best else {
        return PrimitiveOutcome::fail("no collision-free standing point");
    };
    let heading = (target_pos.y - standing.y).atan2(target_pos.x - standing.x);
    world.agent.heading = heading;
    let _ = world.move_object(&agent_id, standing);
    world.objects.get_mut(&agent_id).unwrap().yaw = heading;
    sync_held(world);
    PrimitiveOutcome::ok(dist / BASE_SPEED, dist)
}

fn pick(world: &mut WorldState, kb: &KnowledgeBase, target: &str) -> PrimitiveOutcome {
    if world.agent.held_object.is_some() {
        return PrimitiveOutcome::fail("hand occupied");
    }
    for (pred, why) in
        [(Pred::InReachOfAgent, "out of reach"), (Pred::InFoVOfAgent, "not in view")]
    {
        match predicates::check(world, kb, pred, &[target.to_string()]) {
            Ok(true) => {}
            Ok(false) => return PrimitiveOutcome::fail(why),
            Err(e) => return PrimitiveOutcome::fail(e.to_string()),
        }
    }
    world.agent.held_object = Some(target.to_string());
    sync_held(world);
    PrimitiveOutcome::ok(MANIPULATION_SECONDS, 0.0)
}

fn place(
    world: &mut WorldState,
    kb: &KnowledgeBase,
    reference: &str,
    placement: Placement,
) -> PrimitiveOutcome {
    let Some(held) = world.agent.held_object.clone() else {
        return PrimitiveOutcome::fail("not holding anything");
    };
    if placement == Placement::Inside {
        let synset = world.objects[reference].synset.clone();
        if kb.has_property(&synset, Property::Openable) {
            match predicates::check(world, kb, Pred::Closed, &[reference.to_string()]) {
                Ok(true) => return PrimitiveOutcome::fail("container closed"),
                Ok(false) => {}
                Err(e) => return PrimitiveOutcome::fail(e.to_string()),
            }
        }
    }
    match predicates::sample(
        world,
        kb,
        placement.pred(),
        &[held.clone(), reference.to_string()],
        true,
        DEFAULT_ATTEMPTS,
    ) {
        Ok(()) => {
            world.agent.held_object = None;
            PrimitiveOutcome::ok(MANIPULATION_SECONDS, 0.0)
        }
        Err(e) => PrimitiveOutcome::fail(format!("placement failed: {e}")),
    }
}

fn push(world: &mut WorldState, kb: &KnowledgeBase, target: &str, close: bool) -> PrimitiveOutcome {
    match predicates::check(world, kb, Pred::InReachOfAgent, &[target.to_string()]) {
        Ok(true) => {}
        Ok(false) => return PrimitiveOutcome::fail("out of reach"),
        Err(e) => return PrimitiveOutcome::fail(e.to_string()),
    }
    let obj = world.objects.get_mut(target).unwrap();
    let Some(joint) = obj.joints.iter_mut().find(|j| j.relevant) else {
        return PrimitiveOutcome::fail("target has no relevant joint");
    };
    joint.value = if close { joint.lower } else { joint.upper };
    PrimitiveOutcome::ok(MANIPULATION_SECONDS, 0.0)
}

fn dip(world: &mut WorldState, kb: &KnowledgeBase, container: &str) -> PrimitiveOutcome {
    let Some(held) = world.agent.held_object.clone() else {
        return PrimitiveOutcome::fail("not holding anything");
    };
    let held_synset = world.objects[&held].synset.clone();
    if !kb.has_property(&held_synset, Property::Soakable) {
        return PrimitiveOutcome::fail("held object is not soakable");
    }
    // the first liquid the container is filled with, in name order
    let liquids: Vec<String> = world.substances.keys().cloned().collect();
    let mut filled_with = None;
    for l in liquids {
        if !kb.has_property(&l, Property::Liquid) {
            continue;
        }
        match predicates::check(world, kb, Pred::Filled, &[container.to_string(), l.clone()]) {
            Ok(true) => {
                filled_with = Some(l);
                break;
            }
            Ok(false) => {}
            Err(_) => {}
        }
    }
    let Some(liquid) = filled_with else {
        return PrimitiveOutcome::fail("container is not filled with a liquid");
    };
    match predicates::sample(world, kb, Pred::Soaked, &[held, liquid], true, 1) {
        Ok(()) => PrimitiveOutcome::ok(MANIPULATION_SECONDS, 0.0),
        Err(e) => PrimitiveOutcome::fail(e.to_string()),
    }
}

fn wipe(world: &mut WorldState, kb: &KnowledgeBase, target: &str) -> PrimitiveOutcome {
    let Some(held) = world.agent.held_object.clone() else {
        return PrimitiveOutcome::fail("not holding anything");
    };
    let held_synset = world.objects[&held].synset.clone();
    if !kb.has_property(&held_synset, Property::ParticleRemover) {
        return PrimitiveOutcome::fail("held object is not a particle remover");
    }
    // the wipe sweeps the whole top surface of the target
    let footprint = world.objects[target].aabb();
    match transitions::clean_footprint(world, kb, &held, target, &footprint) {
        Ok(()) => PrimitiveOutcome::ok(MANIPULATION_SECONDS, 0.0),
        Err(e) => PrimitiveOutcome::fail(e.to_string()),
    }
}

/// Positions and joint values tracked for kinematic disarrangement.
fn kinematic_snapshot(world: &WorldState) -> BTreeMap<String, (Vec3, Vec<f64>)> {
    world
        .objects
        .iter()
        .map(|(id, o)| (id.clone(), (o.position, o.joints.iter().map(|j| j.value).collect())))
        .collect()
}

/// Displacement of every non-agent object not held during the primitive,
/// plus joint travel.
fn kin_dis_delta(
    before: &BTreeMap<String, (Vec3, Vec<f64>)>,
    world: &WorldState,
    held_before: Option<&str>,
    held_after: Option<&str>,
) -> f64 {
    let mut total = 0.0;
    for (id, (pos, joints)) in before {
        if *id == world.agent.object_id
            || Some(id.as_str()) == held_before
            || Some(id.as_str()) == held_after
        {
            continue;
        }
        let Some(obj) = world.objects.get(id) else { continue };
        total += obj.position.sub(*pos).norm();
        for (j_before, j_after) in joints.iter().zip(obj.joints.iter()) {
            total += (j_after.value - j_before).abs();
        }
    }
    total
}

/// Run a scripted episode on an instantiated world. The goal is evaluated
/// after every primitive; the episode terminates early on satisfaction.
pub fn run_episode(
    world: &mut WorldState,
    kb: &KnowledgeBase,
    grounding: &Grounding,
    def: &ActivityDefinition,
    script: &[Primitive],
    dt: f64,
) -> Result<EpisodeReport, EpisodeError> {
    let goal = goal_of(def, kb);
    let mut dist_nav = 0.0;
    let mut sim_time = 0.0;
    let mut kin_dis = 0.0;
    let mut trace = Vec::new();

    let (mut satisfied, mut q) = evaluate_goal(world, kb, grounding, &goal)?;

    if !satisfied {
        for (index, primitive) in script.iter().enumerate() {
            let before = kinematic_snapshot(world);
            let held_before = world.agent.held_object.clone();
            let mapped = map_primitive(primitive, grounding);
            let outcome = execute_primitive(world, kb, &mapped, dt);
            let held_after = world.agent.held_object.clone();
            let delta =
                kin_dis_delta(&before, world, held_before.as_deref(), held_after.as_deref());

            dist_nav += outcome.distance;
            sim_time += outcome.duration;
            kin_dis += delta;

            let (s, qq) = evaluate_goal(world, kb, grounding, &goal)?;
            satisfied = s;
            q = qq;
            trace.push(StepRecord {
                index,
                primitive: primitive.clone(),
                outcome,
                kin_dis_delta: delta,
                sim_time_after: sim_time,
                q_after: q,
            });
            if satisfied {
                break;
            }
        }
    }

    Ok(EpisodeReport {
        version: 1,
        success: satisfied,
        q_score: q,
        dist_nav,
        sim_time,
        kin_dis,
        primitive_count: trace.len(),
        trace,
    })
}

/// The normalized, canonically-ordered goal of a definition.
pub fn goal_of(def: &ActivityDefinition, kb: &KnowledgeBase) -> Formula {
    crate::validate::canonicalize_args(&def.normalized(), kb).goal
}

/// Script targets may be definition instance ids; map them onto world ids.
fn map_primitive(p: &Primitive, grounding: &Grounding) -> Primitive {
    let mut mapped = p.clone();
    let target = grounding.resolve(p.target());
    match &mut mapped {
        Primitive::Navigate { target: t }
        | Primitive::Pick { target: t }
        | Primitive::Place { target: t, .. }
        | Primitive::Push { target: t, .. }
        | Primitive::Dip { target: t }
        | Primitive::Wipe { target: t } => *t = target,
    }
    mapped
}

/// Recompute the efficiency metrics from the trace; run_episode's accumulated
/// values must match, which the acceptance suite asserts.
pub fn compute_metrics(trace: &[StepRecord]) -> Result<(f64, f64, f64), EpisodeError> {
    let mut dist_nav = 0.0;
    let mut sim_time = 0.0;
    let mut kin_dis = 0.0;
    let mut last_sim_time = 0.0;
    for (i, step) in trace.iter().enumerate() {
        if step.index != i {
            return Err(EpisodeError::MalformedTrace(format!(
                "step {i} carries index {}",
                step.index
            )));
        }
        dist_nav += step.outcome.distance;
        sim_time += step.outcome.duration;
        kin_dis += step.kin_dis_delta;
        if step.sim_time_after + 1e-9 < last_sim_time {
            return Err(EpisodeError::MalformedTrace("sim_time decreases".into()));
        }
        if (step.sim_time_after - sim_time).abs() > 1e-6 {
            return Err(EpisodeError::MalformedTrace(format!(
                "sim_time_after {} disagrees with accumulated {}",
                step.sim_time_after, sim_time
            )));
        }
        last_sim_time = step.sim_time_after;
    }
    Ok((dist_nav, sim_time, kin_dis))
}

//! Predicate checking and sampling over the box world.
//!
//! Every predicate has a checking function mapping physical state to a
//! boolean; a subset additionally has a sampling function that mutates the
//! world until the predicate checks at the requested polarity. Kinematic
//! predicates sample only true (by rejection over support surfaces); state
//! predicates sample both polarities.

use crate::ast::{synset_of_instance, Pred};
use crate::geom::{Aabb, Vec3, CONTACT_EPS};
use crate::kb::{KnowledgeBase, Param, Property, SubstanceKind};
use crate::world::{grid_position, ObjectState, Particle, WorldState};
use serde::Serialize;
use thiserror::Error;

/// Rejection-sampling attempts per kinematic literal.
pub const DEFAULT_ATTEMPTS: u32 = 100;

/// Default particle parcel spawned when a substance is the subject of a
/// kinematic literal (legacy corpus usage).
const SUBSTANCE_PARCEL: u32 = 50;

/// Proportionality constant of the NextTo distance threshold relative to the
/// average box diagonal.
pub const NEXT_TO_FACTOR: f64 = 0.5;

/// Field-of-view half angle (the forward cone spans 90°) and range.
pub const FOV_HALF_ANGLE: f64 = std::f64::consts::FRAC_PI_4;
pub const FOV_RANGE: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredError {
    #[error("predicate {pred} expects {expected} argument(s), got {got}")]
    Arity { pred: Pred, expected: String, got: usize },
    #[error("unknown entity `{0}` (neither a world object nor a known substance)")]
    UnknownEntity(String),
    #[error("predicate {pred} is not applicable to `{entity}`: {reason}")]
    Inapplicable { pred: Pred, entity: String, reason: String },
    #[error("predicate {pred} over `{entity}`: object is not real")]
    NotReal { pred: Pred, entity: String },
    #[error("object `{entity}` lacks cloth keypoints or fold thresholds")]
    MissingClothData { entity: String },
    #[error("sampling {pred}={desired} is not supported")]
    Unsampleable { pred: Pred, desired: bool },
    #[error("sampling {pred} failed after {attempts} attempts")]
    Exhausted { pred: Pred, attempts: u32 },
    #[error("sampling {pred} failed: {reason}")]
    Failed { pred: Pred, reason: String },
}

/// A resolved argument: world object, substance system, or room type.
#[derive(Debug, Clone, PartialEq)]
pub enum Entity {
    Object(String),
    Substance(String),
    RoomType(String),
}

impl Entity {
    pub fn name(&self) -> &str {
        match self {
            Entity::Object(s) | Entity::Substance(s) | Entity::RoomType(s) => s,
        }
    }
}

/// Map a raw argument to an entity. Object ids win over substance synsets;
/// substance instance ids collapse to their synset.
pub fn resolve_entity(
    world: &WorldState,
    kb: &KnowledgeBase,
    pred: Pred,
    index: usize,
    arg: &str,
) -> Result<Entity, PredError> {
    if pred == Pred::InRoom && index == 1 {
        return Ok(Entity::RoomType(arg.to_string()));
    }
    if world.objects.contains_key(arg) {
        return Ok(Entity::Object(arg.to_string()));
    }
    if kb.is_substance(arg) {
        return Ok(Entity::Substance(arg.to_string()));
    }
    if let Some(synset) = synset_of_instance(arg) {
        if kb.is_substance(synset) {
            return Ok(Entity::Substance(synset.to_string()));
        }
    }
    Err(PredError::UnknownEntity(arg.to_string()))
}

fn resolve_args(
    world: &WorldState,
    kb: &KnowledgeBase,
    pred: Pred,
    args: &[String],
) -> Result<Vec<Entity>, PredError> {
    check_arity(pred, args.len())?;
    args.iter().enumerate().map(|(i, a)| resolve_entity(world, kb, pred, i, a)).collect()
}

fn check_arity(pred: Pred, got: usize) -> Result<(), PredError> {
    let (n, variadic) = expected_arity(pred);
    let ok = if variadic { got >= n } else { got == n };
    if ok {
        Ok(())
    } else {
        Err(PredError::Arity {
            pred,
            expected: if variadic { format!("{n}+") } else { n.to_string() },
            got,
        })
    }
}

/// (arity, variadic)
pub fn expected_arity(pred: Pred) -> (usize, bool) {
    match pred {
        Pred::Blended => (2, true),
        Pred::OnTopOf
        | Pred::InsideOf
        | Pred::NextTo
        | Pred::Under
        | Pred::OnFloor
        | Pred::InContactWith
        | Pred::ConnectedWith
        | Pred::Hung
        | Pred::Soaked
        | Pred::Filled
        | Pred::Empty
        | Pred::Covered
        | Pred::InRoom
        | Pred::InSource => (2, false),
        _ => (1, false),
    }
}

/// Polarities supported by the sampling functions. Kinematic predicates
/// sample only true; Sliced/Broken=false succeed only as no-ops on intact
/// objects (the states are irreversible).
pub fn sampleable(pred: Pred, desired: bool) -> bool {
    match pred {
        Pred::InsideOf | Pred::OnTopOf | Pred::Under | Pred::OnFloor | Pred::ConnectedWith => {
            desired
        }
        Pred::Open
        | Pred::Closed
        | Pred::Cooked
        | Pred::Burnt
        | Pred::OnFire
        | Pred::Frozen
        | Pred::Heated
        | Pred::Boiled
        | Pred::Soaked
        | Pred::Filled
        | Pred::Empty
        | Pred::Covered
        | Pred::ToggledOn
        | Pred::Sliced
        | Pred::Broken => true,
        _ => false,
    }
}

/// Machine-readable registry row for the CLI dump.
#[derive(Debug, Clone, Serialize)]
pub struct PredicateInfo {
    pub name: String,
    pub surface: String,
    pub arity: usize,
    pub variadic: bool,
    pub sample_true: bool,
    pub sample_false: bool,
    pub goal_evaluable: bool,
}

pub fn registry() -> Vec<PredicateInfo> {
    Pred::ALL
        .iter()
        .map(|&p| {
            let (arity, variadic) = expected_arity(p);
            PredicateInfo {
                name: format!("{p:?}"),
                surface: p.surface().to_string(),
                arity,
                variadic,
                sample_true: sampleable(p, true),
                sample_false: sampleable(p, false),
                goal_evaluable: p != Pred::InSource,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Checking
// ---------------------------------------------------------------------------

pub fn check(
    world: &WorldState,
    kb: &KnowledgeBase,
    pred: Pred,
    args: &[String],
) -> Result<bool, PredError> {
    let entities = resolve_args(world, kb, pred, args)?;
    check_resolved(world, kb, pred, &entities)
}

fn object<'w>(
    world: &'w WorldState,
    pred: Pred,
    e: &Entity,
) -> Result<(&'w ObjectState, String), PredError> {
    match e {
        Entity::Object(id) => {
            let obj = world.objects.get(id).ok_or_else(|| PredError::UnknownEntity(id.clone()))?;
            Ok((obj, id.clone()))
        }
        other => Err(PredError::Inapplicable {
            pred,
            entity: other.name().to_string(),
            reason: "an object argument is required here".into(),
        }),
    }
}

fn real_object<'w>(
    world: &'w WorldState,
    pred: Pred,
    e: &Entity,
) -> Result<(&'w ObjectState, String), PredError> {
    let (obj, id) = object(world, pred, e)?;
    if !obj.real {
        return Err(PredError::NotReal { pred, entity: id });
    }
    Ok((obj, id))
}

fn require_property(
    kb: &KnowledgeBase,
    pred: Pred,
    synset: &str,
    prop: Property,
) -> Result<(), PredError> {
    if kb.has_property(synset, prop) {
        Ok(())
    } else {
        Err(PredError::Inapplicable {
            pred,
            entity: synset.to_string(),
            reason: format!("synset lacks `{prop:?}`"),
        })
    }
}

fn substance<'a>(kb: &KnowledgeBase, pred: Pred, e: &'a Entity) -> Result<&'a str, PredError> {
    match e {
        Entity::Substance(s) => Ok(s),
        other => Err(PredError::Inapplicable {
            pred,
            entity: other.name().to_string(),
            reason: if kb.contains(other.name()) {
                "a substance argument is required here".into()
            } else {
                "unknown substance".into()
            },
        }),
    }
}

/// Covered threshold: object annotation, then substance annotation, then the
/// global default.
fn covered_threshold(kb: &KnowledgeBase, object_synset: &str, substance_synset: &str) -> f64 {
    if let Ok(Some(v)) = kb.param(object_synset, Param::CoveredThreshold) {
        return v;
    }
    if let Ok(Some(v)) = kb.param(substance_synset, Param::CoveredThreshold) {
        return v;
    }
    kb.defaults.covered_threshold
}

fn open_threshold(j: &crate::world::JointState) -> f64 {
    j.lower + 0.05 * (j.upper - j.lower)
}

pub fn check_resolved(
    world: &WorldState,
    kb: &KnowledgeBase,
    pred: Pred,
    args: &[Entity],
) -> Result<bool, PredError> {
    check_arity(pred, args.len())?;
    match pred {
        // -- kinematics ------------------------------------------------------
        Pred::InsideOf => {
            let (o2, id2) = real_object(world, pred, &args[1])?;
            match &args[0] {
                Entity::Substance(s) => Ok(substance_all_in(world, s, &o2.aabb())),
                _ => {
                    let (o1, id1) = real_object(world, pred, &args[0])?;
                    if id1 == id2 {
                        return Ok(false);
                    }
                    let b = o2.aabb();
                    // rays from o1's center along ±x and ±y must all hit o2
                    Ok([
                        Vec3::new(1.0, 0.0, 0.0),
                        Vec3::new(-1.0, 0.0, 0.0),
                        Vec3::new(0.0, 1.0, 0.0),
                        Vec3::new(0.0, -1.0, 0.0),
                    ]
                    .iter()
                    .all(|d| b.ray_hit(o1.position, *d).is_some()))
                }
            }
        }
        Pred::OnTopOf => {
            let (o2, id2) = real_object(world, pred, &args[1])?;
            match &args[0] {
                Entity::Substance(s) => Ok(substance_on_top(world, s, o2)),
                _ => {
                    let (_, id1) = real_object(world, pred, &args[0])?;
                    if id1 == id2 {
                        return Ok(false);
                    }
                    let below = world.objs_below(&id1);
                    let above = world.objs_above(&id1);
                    Ok(below.contains(&id2) && !above.contains(&id2) && world.in_contact(&id1, &id2))
                }
            }
        }
        Pred::NextTo => {
            let (o1, id1) = real_object(world, pred, &args[0])?;
            let (o2, id2) = real_object(world, pred, &args[1])?;
            if id1 == id2 {
                return Ok(false);
            }
            let in_plane = world.objs_in_horizontal_plane(&id1).contains(&id2);
            let threshold = NEXT_TO_FACTOR * (o1.aabb().diagonal() + o2.aabb().diagonal()) / 2.0;
            Ok(in_plane && o1.aabb().distance(&o2.aabb()) < threshold)
        }
        Pred::Under => {
            let (_, id1) = real_object(world, pred, &args[0])?;
            let (_, id2) = real_object(world, pred, &args[1])?;
            if id1 == id2 {
                return Ok(false);
            }
            let above = world.objs_above(&id1);
            let below = world.objs_below(&id1);
            Ok(above.contains(&id2) && !below.contains(&id2))
        }
        Pred::OnFloor => {
            let (floor, fid) = real_object(world, pred, &args[1])?;
            if !world.is_floor(&fid) {
                return Err(PredError::Inapplicable {
                    pred,
                    entity: fid,
                    reason: "second argument must be a room floor".into(),
                });
            }
            match &args[0] {
                Entity::Substance(s) => Ok(substance_on_top(world, s, floor)),
                _ => {
                    let (_, id1) = real_object(world, pred, &args[0])?;
                    Ok(world.in_contact(&id1, &fid))
                }
            }
        }
        Pred::InContactWith => {
            let (_, id1) = real_object(world, pred, &args[0])?;
            let (_, id2) = real_object(world, pred, &args[1])?;
            Ok(world.in_contact(&id1, &id2))
        }
        Pred::ConnectedWith | Pred::Hung => {
            let (o1, _) = real_object(world, pred, &args[0])?;
            let (_, id2) = real_object(world, pred, &args[1])?;
            Ok(o1.connected_to.contains(&id2))
        }
        Pred::Blended => {
            let mut ids = Vec::new();
            for a in args {
                let (_, id) = real_object(world, pred, a)?;
                ids.push(id);
            }
            for i in 0..ids.len() {
                for j in i + 1..ids.len() {
                    if !world.in_contact(&ids[i], &ids[j]) {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        Pred::Assembled => {
            let (o, id) = real_object(world, pred, &args[0])?;
            require_property(kb, pred, &o.synset, Property::Assembleable)?;
            if o.connected_to.is_empty() {
                return Ok(false);
            }
            // every pair in the connected set must be directly connected
            let mut component: Vec<String> = vec![id.clone()];
            component.extend(o.connected_to.iter().cloned());
            for i in 0..component.len() {
                for j in i + 1..component.len() {
                    let connected = world
                        .objects
                        .get(&component[i])
                        .map(|a| a.connected_to.contains(&component[j]))
                        .unwrap_or(false);
                    if !connected {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        // -- joints ----------------------------------------------------------
        Pred::Open | Pred::Closed => {
            let (o, _) = real_object(world, pred, &args[0])?;
            require_property(kb, pred, &o.synset, Property::Openable)?;
            let any_open =
                o.joints.iter().filter(|j| j.relevant).any(|j| j.value > open_threshold(j));
            Ok(if pred == Pred::Open { any_open } else { !any_open })
        }
        // -- temperature -------------------------------------------------------
        Pred::Cooked => {
            let (o, _) = real_object(world, pred, &args[0])?;
            require_property(kb, pred, &o.synset, Property::Cookable)?;
            let cooked = kb.param_or_default(&o.synset, Param::CookTemperature);
            let burnt = kb.param_or_default(&o.synset, Param::BurntTemperature);
            Ok(cooked <= o.max_temperature && o.max_temperature < burnt)
        }
        Pred::Burnt => {
            let (o, _) = real_object(world, pred, &args[0])?;
            require_property(kb, pred, &o.synset, Property::Cookable)?;
            let burnt = kb.param_or_default(&o.synset, Param::BurntTemperature);
            Ok(o.max_temperature >= burnt)
        }
        Pred::OnFire => {
            let (o, _) = real_object(world, pred, &args[0])?;
            require_property(kb, pred, &o.synset, Property::Flammable)?;
            Ok(o.temperature >= kb.param_or_default(&o.synset, Param::OnfireTemperature))
        }
        Pred::Frozen => {
            let (o, _) = real_object(world, pred, &args[0])?;
            require_property(kb, pred, &o.synset, Property::Freezable)?;
            Ok(o.temperature <= kb.param_or_default(&o.synset, Param::FrozenTemperature))
        }
        Pred::Heated => {
            let (o, _) = real_object(world, pred, &args[0])?;
            require_property(kb, pred, &o.synset, Property::Heatable)?;
            Ok(o.temperature >= kb.param_or_default(&o.synset, Param::HeatedTemperature))
        }
        Pred::Boiled => {
            let s = substance(kb, pred, &args[0])?;
            require_property(kb, pred, s, Property::Liquid)?;
            let threshold = kb.param_or_default(s, Param::BoiledTemperature);
            Ok(world
                .system(s)
                .map(|sys| {
                    !sys.particles.is_empty()
                        && sys.particles.iter().all(|p| p.temperature >= threshold)
                })
                .unwrap_or(false))
        }
        // -- substances ---------------------------------------------------------
        Pred::Soaked => {
            let (o, id) = real_object(world, pred, &args[0])?;
            require_property(kb, pred, &o.synset, Property::Soakable)?;
            let l = substance(kb, pred, &args[1])?;
            require_property(kb, pred, l, Property::Liquid)?;
            let w = world.objects[&id].soaked_level.get(l).copied().unwrap_or(0) as f64;
            Ok(w >= kb.param_or_default(&o.synset, Param::SoakedThreshold))
        }
        Pred::Filled => {
            let (o, id) = real_object(world, pred, &args[0])?;
            require_property(kb, pred, &o.synset, Property::Fillable)?;
            let l = substance(kb, pred, &args[1])?;
            let threshold = kb.param_or_default(&o.synset, Param::FilledThreshold);
            Ok(world.fill_fraction(&id, l) >= threshold)
        }
        Pred::Empty => {
            let (o, id) = real_object(world, pred, &args[0])?;
            require_property(kb, pred, &o.synset, Property::Fillable)?;
            let l = substance(kb, pred, &args[1])?;
            Ok(world.particles_in_container(&id, l) == 0)
        }
        Pred::Covered => {
            let (o, id) = real_object(world, pred, &args[0])?;
            let s = substance(kb, pred, &args[1])?;
            let kind = kb.substance_kind(s).expect("substance entity has a kind");
            let threshold = covered_threshold(kb, &o.synset, s);
            let count = match kind {
                SubstanceKind::VisualSubstance => world.covered_count(&id, s),
                _ => world.covered_count(&id, s) + world.contacting_particles(&id, s),
            };
            Ok(count as f64 >= threshold)
        }
        // -- cloth ------------------------------------------------------------------
        Pred::Folded | Pred::Unfolded => {
            let (o, id) = real_object(world, pred, &args[0])?;
            let prop = if pred == Pred::Folded { Property::Foldable } else { Property::Unfoldable };
            require_property(kb, pred, &o.synset, prop)?;
            let keypoints = o
                .cloth_keypoints
                .as_ref()
                .ok_or_else(|| PredError::MissingClothData { entity: id.clone() })?;
            let mut max_dist: f64 = 0.0;
            for i in 0..keypoints.len() {
                for j in i + 1..keypoints.len() {
                    max_dist = max_dist.max(keypoints[i].dist(keypoints[j]));
                }
            }
            if pred == Pred::Folded {
                let t =
                    o.fold_threshold.ok_or(PredError::MissingClothData { entity: id.clone() })?;
                Ok(max_dist <= t)
            } else {
                let t =
                    o.unfold_threshold.ok_or(PredError::MissingClothData { entity: id.clone() })?;
                Ok(max_dist >= t)
            }
        }
        // -- direct state reads ---------------------------------------------------------
        Pred::ToggledOn => {
            let (o, _) = real_object(world, pred, &args[0])?;
            require_property(kb, pred, &o.synset, Property::Toggleable)?;
            Ok(o.toggled_on)
        }
        Pred::Sliced => {
            let (o, _) = real_object(world, pred, &args[0])?;
            if !o.sliced {
                require_property(kb, pred, &o.synset, Property::Sliceable)?;
            }
            Ok(o.sliced)
        }
        Pred::Broken => {
            let (o, _) = real_object(world, pred, &args[0])?;
            if !o.broken {
                require_property(kb, pred, &o.synset, Property::Breakable)?;
            }
            Ok(o.broken)
        }
        // -- agent ------------------------------------------------------------------------
        Pred::InReachOfAgent => {
            let (o, _) = real_object(world, pred, &args[0])?;
            Ok(world.agent_center().dist(o.position) <= world.agent.reach)
        }
        Pred::InSameRoomAsAgent => {
            let (_, id) = real_object(world, pred, &args[0])?;
            let agent_id = world.agent.object_id.clone();
            let agent_room = world.room_of_object(&agent_id);
            let obj_room = world.room_of_object(&id);
            Ok(agent_room.is_some() && agent_room == obj_room)
        }
        Pred::InFoVOfAgent => {
            let (o, _) = real_object(world, pred, &args[0])?;
            let a = world.agent_center();
            let dx = o.position.x - a.x;
            let dy = o.position.y - a.y;
            let dist = (dx * dx + dy * dy).sqrt();
            if dist > FOV_RANGE {
                return Ok(false);
            }
            if dist < 1e-9 {
                return Ok(true);
            }
            let bearing = dy.atan2(dx);
            let mut diff = (bearing - world.agent.heading).abs() % (2.0 * std::f64::consts::PI);
            if diff > std::f64::consts::PI {
                diff = 2.0 * std::f64::consts::PI - diff;
            }
            Ok(diff <= FOV_HALF_ANGLE)
        }
        Pred::InHandOfAgent => {
            let (_, id) = real_object(world, pred, &args[0])?;
            Ok(world.agent.held_object.as_deref() == Some(id.as_str()))
        }
        // -- realness -----------------------------------------------------------------------
        Pred::Real | Pred::Future => {
            let real = match &args[0] {
                Entity::Object(id) => {
                    world.objects.get(id).ok_or_else(|| PredError::UnknownEntity(id.clone()))?.real
                }
                Entity::Substance(s) => {
                    world.system(s).map(|sys| !sys.particles.is_empty()).unwrap_or(false)
                }
                Entity::RoomType(r) => return Err(PredError::UnknownEntity(r.clone())),
            };
            Ok(if pred == Pred::Real { real } else { !real })
        }
        Pred::InRoom => {
            let (_, id) = real_object(world, pred, &args[0])?;
            let room_type = args[1].name();
            Ok(world
                .room_of_object(&id)
                .map(|rid| world.rooms[rid].room_type == room_type)
                .unwrap_or(false))
        }
        Pred::InSource => {
            let (o, _) = real_object(world, pred, &args[0])?;
            require_property(kb, pred, &o.synset, Property::ParticleApplier)?;
            let s = substance(kb, pred, &args[1])?;
            Ok(o.insource_binding.as_deref() == Some(s))
        }
    }
}

/// All particles of the substance lie in the box and at least one exists.
fn substance_all_in(world: &WorldState, s: &str, b: &Aabb) -> bool {
    world
        .system(s)
        .map(|sys| {
            !sys.particles.is_empty() && sys.particles.iter().all(|p| b.contains_point(p.position))
        })
        .unwrap_or(false)
}

/// All particles rest within the prism just above the object's top face.
fn substance_on_top(world: &WorldState, s: &str, o2: &ObjectState) -> bool {
    let b = o2.aabb();
    let lo = b.min();
    let hi = b.max();
    let top = b.top_z();
    world
        .system(s)
        .map(|sys| {
            !sys.particles.is_empty()
                && sys.particles.iter().all(|p| {
                    p.position.x >= lo.x
                        && p.position.x <= hi.x
                        && p.position.y >= lo.y
                        && p.position.y <= hi.y
                        && p.position.z >= top - CONTACT_EPS
                        && p.position.z <= top + 0.5
                })
        })
        .unwrap_or(false)
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Mutate the world so `check(pred, args) == desired`, or report failure.
/// Kinematic sampling never touches extended states; state sampling never
/// moves a pose.
pub fn sample(
    world: &mut WorldState,
    kb: &KnowledgeBase,
    pred: Pred,
    args: &[String],
    desired: bool,
    attempts: u32,
) -> Result<(), PredError> {
    if !sampleable(pred, desired) {
        return Err(PredError::Unsampleable { pred, desired });
    }
    let entities = resolve_args(world, kb, pred, args)?;
    match pred {
        Pred::InsideOf | Pred::OnTopOf | Pred::Under | Pred::OnFloor => {
            sample_kinematic(world, kb, pred, &entities, attempts)
        }
        Pred::ConnectedWith => {
            let (_, id1) = real_object(world, pred, &entities[0])?;
            let (_, id2) = real_object(world, pred, &entities[1])?;
            world.objects.get_mut(&id1).unwrap().connected_to.insert(id2.clone());
            world.objects.get_mut(&id2).unwrap().connected_to.insert(id1);
            Ok(())
        }
        // Closed mirrors Open with the polarity flipped
        Pred::Open => sample_open(world, kb, &entities[0], desired),
        Pred::Closed => sample_open(world, kb, &entities[0], !desired),
        Pred::Cooked | Pred::Burnt => {
            let (o, id) = real_object(world, pred, &entities[0])?;
            require_property(kb, pred, &o.synset, Property::Cookable)?;
            let param =
                if pred == Pred::Cooked { Param::CookTemperature } else { Param::BurntTemperature };
            let threshold = kb.param_or_default(&o.synset, param);
            if !threshold.is_finite() {
                return Err(PredError::Failed {
                    pred,
                    reason: format!("synset `{}` has no {param:?} annotation", o.synset),
                });
            }
            // cooking an already-burnt object cannot make Cooked true
            if pred == Pred::Cooked && desired {
                let burnt = kb.param_or_default(&o.synset, Param::BurntTemperature);
                if world.objects[&id].max_temperature >= burnt {
                    return Err(PredError::Failed {
                        pred,
                        reason: format!("`{id}` is already burnt"),
                    });
                }
            }
            let obj = world.objects.get_mut(&id).unwrap();
            if desired {
                obj.max_temperature = obj.max_temperature.max(threshold);
            } else {
                obj.max_temperature = obj.max_temperature.min(threshold - 1.0);
                obj.temperature = obj.temperature.min(obj.max_temperature);
            }
            Ok(())
        }
        Pred::OnFire | Pred::Heated | Pred::Frozen => {
            let (o, id) = real_object(world, pred, &entities[0])?;
            let (prop, param) = match pred {
                Pred::OnFire => (Property::Flammable, Param::OnfireTemperature),
                Pred::Heated => (Property::Heatable, Param::HeatedTemperature),
                _ => (Property::Freezable, Param::FrozenTemperature),
            };
            require_property(kb, pred, &o.synset, prop)?;
            let threshold = kb.param_or_default(&o.synset, param);
            let t = match (pred, desired) {
                (Pred::Frozen, true) => world.rng.range_f64(threshold - 50.0, threshold - 10.0),
                (Pred::Frozen, false) => threshold + 1.0,
                (_, true) => world.rng.range_f64(threshold + 10.0, threshold + 50.0),
                (_, false) => threshold - 1.0,
            };
            let obj = world.objects.get_mut(&id).unwrap();
            if pred == Pred::Frozen && desired {
                // cooling never raises the historical maximum
                obj.temperature = t;
            } else {
                obj.set_temperature(t);
            }
            Ok(())
        }
        Pred::Boiled => {
            let s = substance(kb, pred, &entities[0])?.to_string();
            require_property(kb, pred, &s, Property::Liquid)?;
            let threshold = kb.param_or_default(&s, Param::BoiledTemperature);
            let t = if desired {
                world.rng.range_f64(threshold + 10.0, threshold + 50.0)
            } else {
                threshold - 1.0
            };
            match world.substances.get_mut(&s) {
                Some(sys) if !sys.particles.is_empty() => {
                    for p in &mut sys.particles {
                        p.temperature = t;
                    }
                    Ok(())
                }
                _ if !desired => Ok(()),
                _ => Err(PredError::Failed { pred, reason: format!("no particles of `{s}` exist") }),
            }
        }
        Pred::Soaked => {
            let (o, id) = real_object(world, pred, &entities[0])?;
            require_property(kb, pred, &o.synset, Property::Soakable)?;
            let l = substance(kb, pred, &entities[1])?.to_string();
            require_property(kb, pred, &l, Property::Liquid)?;
            let w = kb.param_or_default(&o.synset, Param::SoakedThreshold).ceil() as u32;
            let obj = world.objects.get_mut(&id).unwrap();
            obj.soaked_level.insert(l, if desired { w } else { 0 });
            Ok(())
        }
        Pred::Filled | Pred::Empty => {
            // Empty mirrors Filled with the polarity flipped
            let want_filled = (pred == Pred::Filled) == desired;
            sample_filled(world, kb, pred, &entities, want_filled)
        }
        Pred::Covered => sample_covered(world, kb, &entities, desired),
        Pred::ToggledOn => {
            let (o, id) = real_object(world, pred, &entities[0])?;
            require_property(kb, pred, &o.synset, Property::Toggleable)?;
            world.objects.get_mut(&id).unwrap().toggled_on = desired;
            Ok(())
        }
        Pred::Sliced => {
            let (o, id) = real_object(world, pred, &entities[0])?;
            if desired {
                if o.sliced {
                    return Ok(());
                }
                require_property(kb, pred, &o.synset, Property::Sliceable)?;
                world
                    .replace_with_halves(kb, &id)
                    .map_err(|e| PredError::Failed { pred, reason: e.to_string() })?;
                Ok(())
            } else if o.sliced {
                Err(PredError::Failed { pred, reason: "slicing is irreversible".into() })
            } else {
                Ok(())
            }
        }
        Pred::Broken => {
            let (o, id) = real_object(world, pred, &entities[0])?;
            if desired {
                if o.broken {
                    return Ok(());
                }
                require_property(kb, pred, &o.synset, Property::Breakable)?;
                world
                    .replace_with_fragments(&id)
                    .map_err(|e| PredError::Failed { pred, reason: e.to_string() })?;
                Ok(())
            } else if o.broken {
                Err(PredError::Failed { pred, reason: "breaking is irreversible".into() })
            } else {
                Ok(())
            }
        }
        _ => Err(PredError::Unsampleable { pred, desired }),
    }
}

/// Support-surface rejection sampling for InsideOf/OnTopOf/Under/OnFloor.
fn sample_kinematic(
    world: &mut WorldState,
    kb: &KnowledgeBase,
    pred: Pred,
    entities: &[Entity],
    attempts: u32,
) -> Result<(), PredError> {
    let (ref_obj, ref_id) = real_object(world, pred, &entities[1])?;
    if pred == Pred::OnFloor && !world.is_floor(&ref_id) {
        return Err(PredError::Inapplicable {
            pred,
            entity: ref_id,
            reason: "second argument must be a room floor".into(),
        });
    }

    // substances place a particle parcel instead of a box
    if let Entity::Substance(s) = &entities[0] {
        return sample_substance_parcel(world, kb, pred, s.clone(), &ref_id);
    }

    let (subject, subject_id) = real_object(world, pred, &entities[0])?;
    let sh = subject.half_extents;

    // the support region and resting height, per predicate
    let (region, z) = match pred {
        Pred::InsideOf => {
            let vol = ref_obj.container_aabb().unwrap_or_else(|| ref_obj.aabb());
            (vol, vol.bottom_z() + sh.z)
        }
        Pred::OnTopOf | Pred::OnFloor => {
            let b = ref_obj.aabb();
            (b, b.top_z() + sh.z)
        }
        Pred::Under => {
            // the floor region beneath the reference's footprint
            let b = ref_obj.aabb();
            (
                Aabb::new(Vec3::new(b.center.x, b.center.y, 0.0), Vec3::new(b.half.x, b.half.y, 0.0)),
                sh.z,
            )
        }
        _ => unreachable!(),
    };

    let min_x = region.min().x + sh.x;
    let max_x = region.max().x - sh.x;
    let min_y = region.min().y + sh.y;
    let max_y = region.max().y - sh.y;
    if min_x > max_x || min_y > max_y {
        return Err(PredError::Exhausted { pred, attempts: 0 });
    }
    if pred == Pred::InsideOf && z + sh.z > region.top_z() {
        return Err(PredError::Exhausted { pred, attempts: 0 });
    }

    let ref_id_owned = ref_id.clone();
    for _ in 0..attempts {
        let x = world.rng.range_f64(min_x, max_x);
        let y = world.rng.range_f64(min_y, max_y);
        let candidate = Aabb::new(Vec3::new(x, y, z), sh);
        let collision = world.real_objects().any(|(id, o)| {
            *id != subject_id
                && *id != ref_id_owned
                && !(pred == Pred::Under && world.is_floor(id))
                && o.aabb().overlaps(&candidate)
        });
        if !collision {
            world.move_object_with_riders(&subject_id, Vec3::new(x, y, z)).expect("subject exists");
            return Ok(());
        }
    }
    Err(PredError::Exhausted { pred, attempts })
}

/// Spawn the default parcel of substance particles inside/on the reference.
fn sample_substance_parcel(
    world: &mut WorldState,
    kb: &KnowledgeBase,
    pred: Pred,
    s: String,
    ref_id: &str,
) -> Result<(), PredError> {
    let kind = kb.substance_kind(&s).expect("substance entity has a kind");
    let ambient = world.config.ambient_temperature;
    let ref_obj = &world.objects[ref_id];
    let positions: Vec<Vec3> = match pred {
        Pred::InsideOf => {
            let vol = ref_obj.container_aabb().unwrap_or_else(|| ref_obj.aabb());
            let pv = world.config.particle_volume;
            (0..SUBSTANCE_PARCEL).filter_map(|i| grid_position(&vol, pv, i)).collect()
        }
        Pred::OnTopOf | Pred::OnFloor => top_face_grid(&ref_obj.aabb(), SUBSTANCE_PARCEL),
        _ => return Err(PredError::Unsampleable { pred, desired: true }),
    };
    if positions.is_empty() {
        return Err(PredError::Failed { pred, reason: "reference has no room for particles".into() });
    }
    let attach = matches!(pred, Pred::OnTopOf | Pred::OnFloor).then(|| ref_id.to_string());
    let system = world.ensure_system(&s, kind);
    // the single substance instance relocates: prior free particles go away
    system.particles.retain(|p| p.attached_to.is_some());
    for pos in positions {
        system.particles.push(Particle {
            position: pos,
            temperature: ambient,
            attached_to: attach.clone(),
        });
    }
    Ok(())
}

/// Evenly spaced grid over the top face (downward ray casting degenerates to
/// this for boxes).
fn top_face_grid(b: &Aabb, count: u32) -> Vec<Vec3> {
    let per_side = (count as f64).sqrt().ceil() as u32;
    let lo = b.min();
    let ext = b.half.scale(2.0);
    let mut out = Vec::new();
    'outer: for iy in 0..per_side {
        for ix in 0..per_side {
            if out.len() as u32 >= count {
                break 'outer;
            }
            out.push(Vec3::new(
                lo.x + ext.x * (ix as f64 + 0.5) / per_side as f64,
                lo.y + ext.y * (iy as f64 + 0.5) / per_side as f64,
                b.top_z(),
            ));
        }
    }
    out
}

fn sample_open(
    world: &mut WorldState,
    kb: &KnowledgeBase,
    entity: &Entity,
    desired: bool,
) -> Result<(), PredError> {
    let (o, id) = real_object(world, Pred::Open, entity)?;
    require_property(kb, Pred::Open, &o.synset, Property::Openable)?;
    let relevant: Vec<usize> =
        o.joints.iter().enumerate().filter(|(_, j)| j.relevant).map(|(i, _)| i).collect();
    if relevant.is_empty() {
        return Err(PredError::Failed {
            pred: Pred::Open,
            reason: format!("`{id}` has no relevant joints"),
        });
    }
    if desired {
        // a random non-empty subset of the relevant joints opens
        let mut chosen: Vec<usize> = Vec::new();
        while chosen.is_empty() {
            chosen = relevant.iter().copied().filter(|_| world.rng.next_f64() < 0.5).collect();
        }
        for i in chosen {
            let draw = world.rng.next_f64();
            let j = &mut world.objects.get_mut(&id).unwrap().joints[i];
            let t = open_threshold(j);
            // (threshold, upper]: keep clear of the boundary
            j.value = t + (j.upper - t) * (1.0 - draw * 0.999);
        }
    } else {
        for i in relevant {
            let draw = world.rng.next_f64();
            let j = &mut world.objects.get_mut(&id).unwrap().joints[i];
            let t = open_threshold(j);
            j.value = j.lower + (t - j.lower) * draw;
        }
    }
    Ok(())
}

fn sample_filled(
    world: &mut WorldState,
    kb: &KnowledgeBase,
    pred: Pred,
    entities: &[Entity],
    want_filled: bool,
) -> Result<(), PredError> {
    let (o, id) = real_object(world, pred, &entities[0])?;
    require_property(kb, pred, &o.synset, Property::Fillable)?;
    let l = substance(kb, pred, &entities[1])?.to_string();
    let kind = kb.substance_kind(&l).expect("substance entity has a kind");
    let vol = world.objects[&id]
        .container_aabb()
        .expect("fillable objects carry a container volume");
    if want_filled {
        let threshold = kb.param_or_default(&o.synset, Param::FilledThreshold);
        let pv = world.config.particle_volume;
        let ambient = world.config.ambient_temperature;
        let mut index = world.particles_in_container(&id, &l);
        while world.fill_fraction(&id, &l) < threshold {
            let Some(pos) = grid_position(&vol, pv, index) else {
                return Err(PredError::Failed {
                    pred,
                    reason: format!("container of `{id}` cannot hold enough particles"),
                });
            };
            world.ensure_system(&l, kind).particles.push(Particle {
                position: pos,
                temperature: ambient,
                attached_to: None,
            });
            index += 1;
        }
        Ok(())
    } else {
        if let Some(sys) = world.substances.get_mut(&l) {
            sys.particles.retain(|p| !vol.contains_point(p.position));
        }
        Ok(())
    }
}

fn sample_covered(
    world: &mut WorldState,
    kb: &KnowledgeBase,
    entities: &[Entity],
    desired: bool,
) -> Result<(), PredError> {
    let pred = Pred::Covered;
    let (o, id) = real_object(world, pred, &entities[0])?;
    let s = substance(kb, pred, &entities[1])?.to_string();
    let kind = kb.substance_kind(&s).expect("substance entity has a kind");
    if desired {
        let n = covered_threshold(kb, &o.synset, &s).ceil() as u32;
        let ambient = world.config.ambient_temperature;
        let positions = top_face_grid(&world.objects[&id].aabb(), n);
        let system = world.ensure_system(&s, kind);
        system.particles.retain(|p| p.attached_to.as_deref() != Some(id.as_str()));
        for pos in positions {
            system.particles.push(Particle {
                position: pos,
                temperature: ambient,
                attached_to: Some(id.clone()),
            });
        }
        Ok(())
    } else {
        let aabb = world.objects[&id].aabb();
        if let Some(sys) = world.substances.get_mut(&s) {
            match kind {
                SubstanceKind::VisualSubstance => {
                    sys.particles.retain(|p| p.attached_to.as_deref() != Some(id.as_str()));
                }
                _ => {
                    // physical kinds: contacting particles only; distant ones stay
                    sys.particles.retain(|p| {
                        p.attached_to.as_deref() != Some(id.as_str())
                            && !(p.attached_to.is_none()
                                && aabb.distance_to_point(p.position) <= CONTACT_EPS)
                    });
                }
            }
        }
        Ok(())
    }
}

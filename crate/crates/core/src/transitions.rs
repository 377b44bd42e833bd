//! Transition rules: composition/decomposition through machine objects and
//! condition-gated cleaning of covering substances.

use crate::geom::{Aabb, Vec3, CONTACT_EPS};
use crate::kb::{KnowledgeBase, MachineRule, Param, Property, SubstanceKind};
use crate::predicates::{self, PredError};
use crate::world::{make_object, WorldState};
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransitionError {
    #[error("rule instance `{rule_id}` on `{machine_id}` is stale: {reason}")]
    Stale { rule_id: String, machine_id: String, reason: String },
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("`{0}` is not a particle remover")]
    NotARemover(String),
    #[error("`{remover}` is not in contact with `{target}`")]
    NotInContact { remover: String, target: String },
    #[error(transparent)]
    World(#[from] crate::world::WorldError),
}

/// A matched machine rule: which objects/substances it binds and the trigger
/// snapshot at match time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleInstance {
    pub rule_id: String,
    pub machine_id: String,
    /// Object bindings deleted on application, in id order.
    pub consumed_objects: Vec<String>,
    /// Object bindings that survive application (consumed = false inputs).
    pub kept_objects: Vec<String>,
    /// Substance synsets whose contained particles are deleted.
    pub consumed_substances: Vec<String>,
    pub kept_substances: Vec<String>,
    pub trigger: TriggerSnapshot,
}

impl RuleInstance {
    pub fn bound_objects(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .consumed_objects
            .iter()
            .chain(&self.kept_objects)
            .map(|s| s.as_str())
            .collect();
        v.sort();
        v
    }

    pub fn bound_substances(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .consumed_substances
            .iter()
            .chain(&self.kept_substances)
            .map(|s| s.as_str())
            .collect();
        v.sort();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriggerSnapshot {
    pub toggled_on: bool,
    pub interior_temperature: f64,
    pub inputs_contained: bool,
}

/// The temperature a machine's interior exposes to its contents: the source
/// temperature while an active heat/cold source, else the body temperature.
pub fn machine_interior_temperature(
    world: &WorldState,
    kb: &KnowledgeBase,
    machine_id: &str,
) -> f64 {
    let Some(obj) = world.objects.get(machine_id) else { return 0.0 };
    let is_source = kb.has_property(&obj.synset, Property::HeatSource)
        || kb.has_property(&obj.synset, Property::ColdSource)
        || kb.has_property(&obj.synset, Property::FireSource);
    let active = !kb.has_property(&obj.synset, Property::Toggleable) || obj.toggled_on;
    if is_source && active {
        kb.param_or_default(&obj.synset, Param::HeatSourceTemperature)
    } else {
        obj.temperature
    }
}

fn containment_volume(world: &WorldState, machine_id: &str) -> Aabb {
    let obj = &world.objects[machine_id];
    obj.container_aabb().unwrap_or_else(|| obj.aabb())
}

fn trigger_holds(world: &WorldState, kb: &KnowledgeBase, rule: &MachineRule, machine_id: &str) -> bool {
    let obj = &world.objects[machine_id];
    if rule.trigger.toggled_on && !obj.toggled_on {
        return false;
    }
    if let Some(min_t) = rule.trigger.min_temperature {
        if machine_interior_temperature(world, kb, machine_id) < min_t {
            return false;
        }
    }
    true
}

/// Match every machine rule against the world. Rules are scanned in rule-id
/// order, machines in object-id order, and inputs bind greedily in object-id
/// order; an object feeds at most one instance per step, so overlapping
/// matches lose deterministically and re-match next step.
pub fn match_rules(world: &WorldState, kb: &KnowledgeBase) -> Vec<RuleInstance> {
    let mut rules: Vec<&MachineRule> = kb.machine_rules().collect();
    rules.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));

    let mut used_objects: BTreeSet<String> = BTreeSet::new();
    let mut used_substances: BTreeSet<(String, String)> = BTreeSet::new(); // (machine, synset)
    let mut out = Vec::new();

    for rule in rules {
        let machines: Vec<String> = world
            .real_objects()
            .filter(|(_, o)| kb.is_descendant_or_equal(&o.synset, &rule.machine))
            .map(|(id, _)| id.clone())
            .collect();
        for machine_id in machines {
            if !trigger_holds(world, kb, rule, &machine_id) {
                continue;
            }
            // several disjoint bindings in one machine yield several instances
            while let Some(binding) =
                bind_inputs(world, kb, rule, &machine_id, &used_objects, &used_substances)
            {
                used_objects.extend(binding.consumed_objects.iter().cloned());
                used_objects.extend(binding.kept_objects.iter().cloned());
                for s in binding.consumed_substances.iter().chain(&binding.kept_substances) {
                    used_substances.insert((machine_id.clone(), s.clone()));
                }
                out.push(RuleInstance {
                    rule_id: rule.rule_id.clone(),
                    machine_id: machine_id.clone(),
                    consumed_objects: binding.consumed_objects,
                    kept_objects: binding.kept_objects,
                    consumed_substances: binding.consumed_substances,
                    kept_substances: binding.kept_substances,
                    trigger: TriggerSnapshot {
                        toggled_on: world.objects[&machine_id].toggled_on,
                        interior_temperature: machine_interior_temperature(world, kb, &machine_id),
                        inputs_contained: true,
                    },
                });
            }
        }
    }
    out
}

struct Binding {
    consumed_objects: Vec<String>,
    kept_objects: Vec<String>,
    consumed_substances: Vec<String>,
    kept_substances: Vec<String>,
}

/// Bind the rule's full input multiset inside one machine, skipping already
/// used objects.
fn bind_inputs(
    world: &WorldState,
    kb: &KnowledgeBase,
    rule: &MachineRule,
    machine_id: &str,
    used_objects: &BTreeSet<String>,
    used_substances: &BTreeSet<(String, String)>,
) -> Option<Binding> {
    let vol = containment_volume(world, machine_id);
    let mut binding = Binding {
        consumed_objects: Vec::new(),
        kept_objects: Vec::new(),
        consumed_substances: Vec::new(),
        kept_substances: Vec::new(),
    };
    for item in &rule.inputs {
        if kb.is_substance(&item.synset) {
            if used_substances.contains(&(machine_id.to_string(), item.synset.clone())) {
                return None;
            }
            let contained = world
                .system(&item.synset)
                .map(|sys| sys.particles.iter().any(|p| vol.contains_point(p.position)))
                .unwrap_or(false);
            if !contained {
                return None;
            }
            if item.consumed {
                binding.consumed_substances.push(item.synset.clone());
            } else {
                binding.kept_substances.push(item.synset.clone());
            }
        } else {
            let mut needed = item.count;
            for (id, o) in world.real_objects() {
                if needed == 0 {
                    break;
                }
                if id == machine_id
                    || used_objects.contains(id)
                    || binding.consumed_objects.contains(id)
                    || binding.kept_objects.contains(id)
                    || !kb.is_descendant_or_equal(&o.synset, &item.synset)
                {
                    continue;
                }
                if vol.contains_point(o.position) {
                    if item.consumed {
                        binding.consumed_objects.push(id.clone());
                    } else {
                        binding.kept_objects.push(id.clone());
                    }
                    needed -= 1;
                }
            }
            if needed > 0 {
                return None;
            }
        }
    }
    binding.consumed_objects.sort();
    binding.kept_objects.sort();
    binding.consumed_substances.sort();
    binding.kept_substances.sort();
    Some(binding)
}

/// Apply a matched rule: re-verify it, delete consumed inputs, then
/// materialize outputs inside the machine (declared `future` instances are
/// realized before fresh instances are created). Outputs take the machine's
/// interior temperature.
pub fn apply_rule(
    world: &mut WorldState,
    kb: &KnowledgeBase,
    instance: &RuleInstance,
) -> Result<(), TransitionError> {
    let rule = kb
        .machine_rules()
        .find(|r| r.rule_id == instance.rule_id)
        .ok_or_else(|| TransitionError::UnknownRule(instance.rule_id.clone()))?
        .clone();
    let stale = |reason: &str| TransitionError::Stale {
        rule_id: instance.rule_id.clone(),
        machine_id: instance.machine_id.clone(),
        reason: reason.to_string(),
    };

    if !world.objects.get(&instance.machine_id).map(|o| o.real).unwrap_or(false) {
        return Err(stale("machine is gone"));
    }
    if !trigger_holds(world, kb, &rule, &instance.machine_id) {
        return Err(stale("trigger no longer holds"));
    }
    let vol = containment_volume(world, &instance.machine_id);
    for id in instance.bound_objects() {
        let ok = world
            .objects
            .get(id)
            .map(|o| o.real && vol.contains_point(o.position))
            .unwrap_or(false);
        if !ok {
            return Err(stale(&format!("input `{id}` is no longer contained")));
        }
    }
    for s in instance.bound_substances() {
        let ok = world
            .system(s)
            .map(|sys| sys.particles.iter().any(|p| vol.contains_point(p.position)))
            .unwrap_or(false);
        if !ok {
            return Err(stale(&format!("substance `{s}` is no longer contained")));
        }
    }

    // consume
    for id in &instance.consumed_objects {
        world.objects.remove(id);
        for sys in world.substances.values_mut() {
            for p in &mut sys.particles {
                if p.attached_to.as_deref() == Some(id.as_str()) {
                    p.attached_to = None;
                }
            }
        }
    }
    for synset in &instance.consumed_substances {
        if let Some(sys) = world.substances.get_mut(synset) {
            sys.particles.retain(|p| !vol.contains_point(p.position));
        }
    }

    // materialize outputs
    let interior_t = machine_interior_temperature(world, kb, &instance.machine_id);
    for item in &rule.outputs {
        for _ in 0..item.count {
            if kb.is_substance(&item.synset) {
                spawn_output_substance(world, kb, &item.synset, &vol);
                continue;
            }
            let id = match first_unrealized_future(world, kb, &item.synset) {
                Some(id) => {
                    world.objects.get_mut(&id).unwrap().real = true;
                    id
                }
                None => {
                    let leaf = kb
                        .leaves_under(&item.synset)
                        .first()
                        .map(|s| s.to_string())
                        .unwrap_or_else(|| item.synset.clone());
                    let id = world.fresh_id(&item.synset);
                    let obj = make_object(kb, &leaf, true)?;
                    world.objects.insert(id.clone(), obj);
                    id
                }
            };
            place_output(world, &id, instance);
            world.objects.get_mut(&id).unwrap().set_temperature(interior_t);
        }
    }
    Ok(())
}

/// Smallest-id unrealized object whose synset falls under the output synset.
fn first_unrealized_future(world: &WorldState, kb: &KnowledgeBase, synset: &str) -> Option<String> {
    world
        .objects
        .iter()
        .find(|(_, o)| !o.real && kb.is_descendant_or_equal(&o.synset, synset))
        .map(|(id, _)| id.clone())
}

/// Outputs land on a deterministic grid inside the machine's container, so
/// rule application consumes no randomness: disjoint instances commute and
/// rules never dead-end an episode (overflowing outputs stack at the center).
fn place_output(world: &mut WorldState, id: &str, instance: &RuleInstance) {
    let vol = containment_volume(world, &instance.machine_id);
    let half = world.objects[id].half_extents;
    let cell = Vec3::new(2.0 * half.x + 0.01, 2.0 * half.y + 0.01, 2.0 * half.z + 0.01);
    let nx = ((2.0 * vol.half.x / cell.x).floor() as u32).max(1);
    let ny = ((2.0 * vol.half.y / cell.y).floor() as u32).max(1);
    let nz = ((2.0 * vol.half.z / cell.z).floor() as u32).max(1);
    // next slot = count of real objects already centered in the volume
    let occupied = world
        .real_objects()
        .filter(|(oid, o)| *oid != id && vol.contains_point(o.position))
        .count() as u32;
    let pos = if occupied < nx * ny * nz {
        let iz = occupied / (nx * ny);
        let rem = occupied % (nx * ny);
        let iy = rem / nx;
        let ix = rem % nx;
        let lo = vol.min();
        Vec3::new(
            lo.x + cell.x * (ix as f64 + 0.5),
            lo.y + cell.y * (iy as f64 + 0.5),
            lo.z + cell.z * (iz as f64 + 0.5),
        )
    } else {
        vol.center
    };
    let _ = world.move_object(id, pos);
}

fn spawn_output_substance(world: &mut WorldState, kb: &KnowledgeBase, synset: &str, vol: &Aabb) {
    let kind = kb.substance_kind(synset).unwrap_or(SubstanceKind::Liquid);
    let pv = world.config.particle_volume;
    let ambient = world.config.ambient_temperature;
    let existing: u32 = world
        .substances
        .values()
        .map(|s| s.particles.iter().filter(|p| vol.contains_point(p.position)).count() as u32)
        .sum();
    let system = world.ensure_system(synset, kind);
    for i in 0..50u32 {
        if let Some(pos) = crate::world::grid_position(vol, pv, existing + i) {
            system.particles.push(crate::world::Particle {
                position: pos,
                temperature: ambient,
                attached_to: None,
            });
        }
    }
}

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

/// Remove covering substances from `target` using `remover`, honoring the
/// cleaning rules' gating. Substances with no rule allow dry removal.
pub fn apply_cleaning(
    world: &mut WorldState,
    kb: &KnowledgeBase,
    remover_id: &str,
    target_id: &str,
) -> Result<(), TransitionError> {
    let remover = world.real_object(remover_id)?;
    let footprint = remover.aabb();
    if !world.in_contact(remover_id, target_id) {
        return Err(TransitionError::NotInContact {
            remover: remover_id.to_string(),
            target: target_id.to_string(),
        });
    }
    clean_footprint(world, kb, remover_id, target_id, &footprint)
}

/// Footprint-limited cleaning core. The wipe primitive sweeps the whole top
/// surface of the target by passing a prism over it.
pub fn clean_footprint(
    world: &mut WorldState,
    kb: &KnowledgeBase,
    remover_id: &str,
    target_id: &str,
    footprint: &Aabb,
) -> Result<(), TransitionError> {
    let remover = world.real_object(remover_id)?;
    let remover_synset = remover.synset.clone();
    if !kb.has_property(&remover_synset, Property::ParticleRemover) {
        return Err(TransitionError::NotARemover(remover_id.to_string()));
    }
    world.real_object(target_id)?;

    // covering substances present on the target, in name order
    let target_aabb = world.objects[target_id].aabb();
    let substances: Vec<(String, SubstanceKind)> = world
        .substances
        .iter()
        .filter(|(s, _)| {
            world.covered_count(target_id, s) > 0 || world.contacting_particles(target_id, s) > 0
        })
        .map(|(s, sys)| (s.clone(), sys.kind))
        .collect();

    for (s, kind) in substances {
        if !removal_allowed(world, kb, &remover_synset, remover_id, &s) {
            continue;
        }
        let in_footprint = |p: &crate::world::Particle| {
            p.position.x >= footprint.min().x
                && p.position.x <= footprint.max().x
                && p.position.y >= footprint.min().y
                && p.position.y <= footprint.max().y
        };
        let sys = world.substances.get_mut(&s).unwrap();
        match kind {
            SubstanceKind::VisualSubstance => {
                sys.particles.retain(|p| {
                    !(p.attached_to.as_deref() == Some(target_id) && in_footprint(p))
                });
            }
            _ => {
                sys.particles.retain(|p| {
                    let covering = p.attached_to.as_deref() == Some(target_id)
                        || (p.attached_to.is_none()
                            && target_aabb.distance_to_point(p.position) <= CONTACT_EPS);
                    !(covering && in_footprint(p))
                });
            }
        }
    }
    Ok(())
}

/// The gate: a rule covering the substance must accept the remover synset and
/// its saturation; with no rule at all, dry removal is allowed.
fn removal_allowed(
    world: &WorldState,
    kb: &KnowledgeBase,
    remover_synset: &str,
    remover_id: &str,
    substance: &str,
) -> bool {
    let mut any_rule = false;
    for rule in kb.cleaning_rules() {
        if !rule.covering.iter().any(|c| kb.is_descendant_or_equal(substance, c)) {
            continue;
        }
        any_rule = true;
        if !rule.removers.is_empty()
            && !rule.removers.iter().any(|r| kb.is_descendant_or_equal(remover_synset, r))
        {
            continue;
        }
        if rule.solvents.is_empty() {
            return true;
        }
        let threshold = kb.param_or_default(remover_synset, Param::SoakedThreshold);
        let soaked = rule.solvents.iter().any(|solvent| {
            world.objects[remover_id].soaked_level.get(solvent).copied().unwrap_or(0) as f64
                >= threshold
        });
        if soaked {
            return true;
        }
    }
    !any_rule
}

/// One full simulation step: extended-state updates, then every currently
/// matching rule applies (instances invalidated by earlier applications are
/// skipped and re-match next step).
pub fn step_world(world: &mut WorldState, kb: &KnowledgeBase, dt: f64) {
    world.step_states(kb, dt);
    let matches = match_rules(world, kb);
    for instance in matches {
        let _ = apply_rule(world, kb, &instance);
    }
}

/// Check a literal; the polarity folds into the result.
pub fn check_literal(
    world: &WorldState,
    kb: &KnowledgeBase,
    pred: crate::ast::Pred,
    args: &[String],
    polarity: bool,
) -> Result<bool, PredError> {
    predicates::check(world, kb, pred, args).map(|v| v == polarity)
}

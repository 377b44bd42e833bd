//! The abstract physical world: box-geometry kinematics, joints, substance
//! particle systems, and extended object states advanced by heuristic update
//! rules (temperature toward active sources, fire propagation, soaking,
//! water emission).

use crate::geom::{Aabb, Rect, Vec3, CONTACT_EPS};
use crate::kb::{JointSpec, KnowledgeBase, Param, Property, SubstanceKind};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Heuristic update-rule constants. These are artifact choices, not annotated
/// values; they ship with the snapshot so a world replays identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// °C objects relax toward with no source nearby.
    pub ambient_temperature: f64,
    /// 1/s rate of approach toward an influencing source's temperature.
    pub heat_rate: f64,
    /// 1/s rate of relaxation toward ambient.
    pub ambient_rate: f64,
    /// m beyond the source box within which it influences objects.
    pub heat_influence_radius: f64,
    /// liquid particles a soakable object absorbs per second of contact.
    pub absorb_rate: f64,
    /// particles an active water source emits per second.
    pub emit_rate: f64,
    /// m³ per liquid particle (10 ml: a 1 L container fills in ~2 s).
    pub particle_volume: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            ambient_temperature: 23.0,
            heat_rate: 0.04,
            ambient_rate: 0.02,
            heat_influence_radius: 0.5,
            absorb_rate: 20.0,
            emit_rate: 50.0,
            particle_volume: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub value: f64,
    pub relevant: bool,
}

impl From<&JointSpec> for JointState {
    fn from(s: &JointSpec) -> Self {
        JointState {
            name: s.name.clone(),
            lower: s.lower,
            upper: s.upper,
            value: s.value.clamp(s.lower, s.upper),
            relevant: s.relevant,
        }
    }
}

/// Inner volume of a fillable object, relative to its center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Container {
    pub offset: Vec3,
    pub half: Vec3,
}

impl Container {
    pub fn volume(&self) -> f64 {
        8.0 * self.half.x * self.half.y * self.half.z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub synset: String,
    /// `future` objects are declared but not yet materialized; they have no
    /// geometry and join no spatial query while false.
    pub real: bool,
    pub position: Vec3,
    #[serde(default)]
    pub yaw: f64,
    pub half_extents: Vec3,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joints: Vec<JointState>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub connected_to: BTreeSet<String>,
    pub temperature: f64,
    pub max_temperature: f64,
    /// liquid synset -> particles absorbed.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub soaked_level: BTreeMap<String, u32>,
    #[serde(default)]
    pub toggled_on: bool,
    #[serde(default)]
    pub sliced: bool,
    #[serde(default)]
    pub broken: bool,
    /// Keypoints relative to the object center, for foldable objects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloth_keypoints: Option<Vec<Vec3>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unfold_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container: Option<Container>,
    /// Substance bound by an `insource` literal (particle appliers).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insource_binding: Option<String>,
    /// Water-source emission point relative to the center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_offset: Option<Vec3>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub emit_carry: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub absorb_carry: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl ObjectState {
    pub fn aabb(&self) -> Aabb {
        Aabb::new(self.position, self.half_extents)
    }

    pub fn container_aabb(&self) -> Option<Aabb> {
        self.container
            .as_ref()
            .map(|c| Aabb::new(self.position.add(c.offset), c.half))
    }

    pub fn set_temperature(&mut self, t: f64) {
        self.temperature = t;
        if t > self.max_temperature {
            self.max_temperature = t;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec3,
    pub temperature: f64,
    /// Object the particle covers, for substances placed onto surfaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attached_to: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystem {
    pub kind: SubstanceKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub particles: Vec<Particle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub room_type: String,
    pub rects: Vec<Rect>,
}

impl Room {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.rects.iter().any(|r| r.contains(x, y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Object id of the agent's body box.
    pub object_id: String,
    pub heading: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_object: Option<String>,
    /// m the agent can reach from its center.
    pub reach: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub config: Config,
    /// Simulated seconds; non-decreasing.
    pub clock: f64,
    pub rng: Rng,
    pub rooms: BTreeMap<String, Room>,
    pub objects: BTreeMap<String, ObjectState>,
    /// substance synset -> its single particle system.
    pub substances: BTreeMap<String, ParticleSystem>,
    pub agent: AgentState,
    spawn_counter: u64,
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("rooms `{0}` and `{1}` overlap")]
    OverlappingRooms(String, String),
    #[error("scene references unknown synset `{0}`")]
    UnknownSynset(String),
    #[error("duplicate object id `{0}`")]
    DuplicateObject(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("object `{0}` is not real")]
    NotReal(String),
    #[error("scene requires synset `floor.n.01` in the knowledge base")]
    NoFloorSynset,
    #[error("invalid scene document: {0}")]
    Document(String),
}

// ---------------------------------------------------------------------------
// Scene documents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneDocument {
    #[serde(default)]
    pub rooms: Vec<SceneRoom>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    pub agent: SceneAgent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneRoom {
    pub id: String,
    pub room_type: String,
    pub rects: Vec<Rect>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub synset: String,
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_extents: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub toggled_on: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneAgent {
    pub position: [f64; 2],
    #[serde(default)]
    pub heading: f64,
}

pub const AGENT_ID: &str = "agent";
pub const AGENT_HALF_EXTENTS: Vec3 = Vec3::new(0.25, 0.25, 0.9);

impl WorldState {
    /// Build a world from a scene document. Returns the world plus warnings
    /// (objects outside all rooms).
    pub fn load_scene(
        doc: &SceneDocument,
        kb: &KnowledgeBase,
        seed: u64,
    ) -> Result<(WorldState, Vec<String>), WorldError> {
        let mut rooms = BTreeMap::new();
        for room in &doc.rooms {
            if rooms
                .insert(
                    room.id.clone(),
                    Room { room_type: room.room_type.clone(), rects: room.rects.clone() },
                )
                .is_some()
            {
                return Err(WorldError::Document(format!("duplicate room id `{}`", room.id)));
            }
        }
        let ids: Vec<String> = rooms.keys().cloned().collect();
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                let (ra, rb) = (&rooms[a], &rooms[b]);
                if ra.rects.iter().any(|x| rb.rects.iter().any(|y| x.overlaps(y))) {
                    return Err(WorldError::OverlappingRooms(a.clone(), b.clone()));
                }
            }
        }

        let mut world = WorldState {
            config: Config::default(),
            clock: 0.0,
            rng: Rng::new(seed),
            rooms,
            objects: BTreeMap::new(),
            substances: BTreeMap::new(),
            agent: AgentState {
                object_id: AGENT_ID.to_string(),
                heading: doc.agent.heading,
                held_object: None,
                reach: kb.defaults.reach_distance,
            },
            spawn_counter: 0,
        };

        // one floor object per room, spanning the bounding box of its rects
        if !world.rooms.is_empty() && !kb.contains("floor.n.01") {
            return Err(WorldError::NoFloorSynset);
        }
        let room_list: Vec<(String, Room)> =
            world.rooms.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        for (id, room) in &room_list {
            let min_x = room.rects.iter().map(|r| r.min_x).fold(f64::INFINITY, f64::min);
            let min_y = room.rects.iter().map(|r| r.min_y).fold(f64::INFINITY, f64::min);
            let max_x = room.rects.iter().map(|r| r.max_x).fold(f64::NEG_INFINITY, f64::max);
            let max_y = room.rects.iter().map(|r| r.max_y).fold(f64::NEG_INFINITY, f64::max);
            let mut floor =
                make_object(kb, "floor.n.01", true).map_err(|_| WorldError::NoFloorSynset)?;
            floor.position = Vec3::new((min_x + max_x) / 2.0, (min_y + max_y) / 2.0, -0.05);
            floor.half_extents = Vec3::new((max_x - min_x) / 2.0, (max_y - min_y) / 2.0, 0.05);
            world.objects.insert(format!("floor:{id}"), floor);
        }

        let mut warnings = Vec::new();
        for obj in &doc.objects {
            if !kb.contains(&obj.synset) {
                return Err(WorldError::UnknownSynset(obj.synset.clone()));
            }
            let mut state = make_object(kb, &obj.synset, true)?;
            state.position = Vec3::new(obj.position[0], obj.position[1], obj.position[2]);
            state.yaw = obj.yaw;
            if let Some(h) = obj.half_extents {
                state.half_extents = Vec3::new(h[0], h[1], h[2]);
                // keep the default container proportional to the override
                if state.container.is_some()
                    && kb.model(&obj.synset).and_then(|m| m.container.as_ref()).is_none()
                {
                    state.container = Some(default_container(state.half_extents));
                }
            }
            if let Some(t) = obj.temperature {
                state.set_temperature(t);
            }
            state.toggled_on = obj.toggled_on;
            if !world.rooms.is_empty()
                && !world.rooms.values().any(|r| r.contains(state.position.x, state.position.y))
            {
                warnings.push(format!("object `{}` lies outside all rooms", obj.id));
            }
            if world.objects.insert(obj.id.clone(), state).is_some() {
                return Err(WorldError::DuplicateObject(obj.id.clone()));
            }
        }

        // the agent body is an ordinary box so spatial predicates apply to it
        if !kb.contains("agent.n.01") {
            return Err(WorldError::UnknownSynset("agent.n.01".into()));
        }
        let mut agent_obj = make_object(kb, "agent.n.01", true)?;
        agent_obj.position =
            Vec3::new(doc.agent.position[0], doc.agent.position[1], AGENT_HALF_EXTENTS.z);
        agent_obj.half_extents = AGENT_HALF_EXTENTS;
        agent_obj.yaw = doc.agent.heading;
        world.objects.insert(AGENT_ID.to_string(), agent_obj);

        Ok((world, warnings))
    }

    pub fn from_json(text: &str) -> Result<WorldState, WorldError> {
        serde_json::from_str(text).map_err(|e| WorldError::Document(e.to_string()))
    }

    /// The world with particle lists in a canonical order. Particles carry no
    /// identity, so equivalent worlds built in different orders canonicalize
    /// to the same value.
    pub fn canonical(&self) -> WorldState {
        let mut w = self.clone();
        for system in w.substances.values_mut() {
            system.particles.sort_by(|a, b| {
                a.attached_to
                    .cmp(&b.attached_to)
                    .then(a.position.x.total_cmp(&b.position.x))
                    .then(a.position.y.total_cmp(&b.position.y))
                    .then(a.position.z.total_cmp(&b.position.z))
                    .then(a.temperature.total_cmp(&b.temperature))
            });
        }
        w
    }

    /// Canonical snapshot: pretty JSON with stable map ordering and sorted
    /// particles, so equivalent worlds serialize to identical bytes.
    pub fn snapshot(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.canonical()).expect("world serializes");
        s.push('\n');
        s
    }

    pub fn object(&self, id: &str) -> Result<&ObjectState, WorldError> {
        self.objects.get(id).ok_or_else(|| WorldError::UnknownObject(id.to_string()))
    }

    pub fn object_mut(&mut self, id: &str) -> Result<&mut ObjectState, WorldError> {
        self.objects.get_mut(id).ok_or_else(|| WorldError::UnknownObject(id.to_string()))
    }

    pub fn real_object(&self, id: &str) -> Result<&ObjectState, WorldError> {
        let obj = self.object(id)?;
        if !obj.real {
            return Err(WorldError::NotReal(id.to_string()));
        }
        Ok(obj)
    }

    /// Real objects only, in id order.
    pub fn real_objects(&self) -> impl Iterator<Item = (&String, &ObjectState)> {
        self.objects.iter().filter(|(_, o)| o.real)
    }

    pub fn agent_object(&self) -> &ObjectState {
        &self.objects[&self.agent.object_id]
    }

    pub fn agent_center(&self) -> Vec3 {
        self.agent_object().position
    }

    /// Move an object, carrying its attached covering particles and the free
    /// particles resting in its container volume (its contents) along.
    pub fn move_object(&mut self, id: &str, to: Vec3) -> Result<(), WorldError> {
        let obj = self.object(id)?;
        let delta = to.sub(obj.position);
        let contents = obj.container_aabb();
        let obj = self.objects.get_mut(id).unwrap();
        obj.position = to;
        for system in self.substances.values_mut() {
            for p in &mut system.particles {
                let carried = p.attached_to.as_deref() == Some(id)
                    || (p.attached_to.is_none()
                        && contents.map(|c| c.contains_point(p.position)).unwrap_or(false));
                if carried {
                    p.position = p.position.add(delta);
                }
            }
        }
        Ok(())
    }

    /// Objects riding on `id`: contained in its box, or resting on its top
    /// face, transitively. Placement sampling moves a support together with
    /// everything already arranged on it. Floors and the agent never ride,
    /// and mutual containment (a surrounding container) disqualifies.
    pub fn riders_of(&self, id: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut frontier = vec![id.to_string()];
        while let Some(base) = frontier.pop() {
            let Some(base_obj) = self.objects.get(&base) else { continue };
            let aabb = base_obj.aabb();
            let top = aabb.top_z();
            for (oid, o) in self.real_objects() {
                if *oid == base
                    || *oid == id
                    || out.contains(oid)
                    || *oid == self.agent.object_id
                    || self.is_floor(oid)
                {
                    continue;
                }
                let b = o.aabb();
                let contained =
                    aabb.contains_point(o.position) && !b.contains_point(base_obj.position);
                let xy_overlap = (o.position.x - aabb.center.x).abs() < aabb.half.x + b.half.x
                    && (o.position.y - aabb.center.y).abs() < aabb.half.y + b.half.y;
                let resting = xy_overlap && (b.bottom_z() - top).abs() <= CONTACT_EPS;
                if contained || resting {
                    out.push(oid.clone());
                    frontier.push(oid.clone());
                }
            }
        }
        out.sort();
        out
    }

    /// Move an object together with its riders.
    pub fn move_object_with_riders(&mut self, id: &str, to: Vec3) -> Result<(), WorldError> {
        let delta = to.sub(self.object(id)?.position);
        let riders = self.riders_of(id);
        self.move_object(id, to)?;
        for rider in riders {
            let pos = self.objects[&rider].position.add(delta);
            self.move_object(&rider, pos)?;
        }
        Ok(())
    }

    pub fn fresh_id(&mut self, synset: &str) -> String {
        self.spawn_counter += 1;
        format!("{synset}_spawn{}", self.spawn_counter)
    }

    /// Room containing the point, if any.
    pub fn room_of_point(&self, x: f64, y: f64) -> Option<&str> {
        self.rooms.iter().find(|(_, r)| r.contains(x, y)).map(|(id, _)| id.as_str())
    }

    pub fn room_of_object(&self, id: &str) -> Option<&str> {
        let obj = self.objects.get(id)?;
        self.room_of_point(obj.position.x, obj.position.y)
    }

    pub fn floor_id_of_room(&self, room_id: &str) -> String {
        format!("floor:{room_id}")
    }

    pub fn is_floor(&self, id: &str) -> bool {
        id.starts_with("floor:")
            || self.objects.get(id).map(|o| o.synset == "floor.n.01").unwrap_or(false)
    }

    // -- rays -----------------------------------------------------------------

    /// Real objects whose boxes the ray hits, sorted by distance (ties by id),
    /// excluding `exclude`.
    pub fn ray_query(&self, origin: Vec3, dir: Vec3, exclude: Option<&str>) -> Vec<(String, f64)> {
        let mut hits: Vec<(String, f64)> = self
            .real_objects()
            .filter(|(id, _)| Some(id.as_str()) != exclude)
            .filter_map(|(id, o)| o.aabb().ray_hit(origin, dir).map(|t| (id.clone(), t)))
            .collect();
        hits.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        hits
    }

    /// Objects on the vertical ray up from the object's center.
    pub fn objs_above(&self, id: &str) -> Vec<String> {
        let Ok(o) = self.real_object(id) else { return Vec::new() };
        self.ray_query(o.position, Vec3::new(0.0, 0.0, 1.0), Some(id))
            .into_iter()
            .map(|(i, _)| i)
            .collect()
    }

    /// Objects on the vertical ray down from the object's center.
    pub fn objs_below(&self, id: &str) -> Vec<String> {
        let Ok(o) = self.real_object(id) else { return Vec::new() };
        self.ray_query(o.position, Vec3::new(0.0, 0.0, -1.0), Some(id))
            .into_iter()
            .map(|(i, _)| i)
            .collect()
    }

    /// Objects hit by 8 horizontal rays at 45° increments from the center.
    /// Exact unnormalized direction components keep corner-grazing hits
    /// consistent; hit membership is scale-invariant.
    pub fn objs_in_horizontal_plane(&self, id: &str) -> Vec<String> {
        let Ok(o) = self.real_object(id) else { return Vec::new() };
        let mut out = BTreeSet::new();
        for (dx, dy) in [
            (1.0, 0.0),
            (1.0, 1.0),
            (0.0, 1.0),
            (-1.0, 1.0),
            (-1.0, 0.0),
            (-1.0, -1.0),
            (0.0, -1.0),
            (1.0, -1.0),
        ] {
            for (hit, _) in self.ray_query(o.position, Vec3::new(dx, dy, 0.0), Some(id)) {
                out.insert(hit);
            }
        }
        out.into_iter().collect()
    }

    pub fn in_contact(&self, a: &str, b: &str) -> bool {
        match (self.objects.get(a), self.objects.get(b)) {
            (Some(oa), Some(ob)) if oa.real && ob.real => oa.aabb().contacts(&ob.aabb()),
            _ => false,
        }
    }

    // -- substances -------------------------------------------------------------

    pub fn system(&self, substance: &str) -> Option<&ParticleSystem> {
        self.substances.get(substance)
    }

    pub fn ensure_system(&mut self, substance: &str, kind: SubstanceKind) -> &mut ParticleSystem {
        self.substances
            .entry(substance.to_string())
            .or_insert_with(|| ParticleSystem { kind, particles: Vec::new() })
    }

    /// Particles of `substance` attached to `object` (covering it).
    pub fn covered_count(&self, object: &str, substance: &str) -> u32 {
        self.substances
            .get(substance)
            .map(|s| {
                s.particles.iter().filter(|p| p.attached_to.as_deref() == Some(object)).count()
                    as u32
            })
            .unwrap_or(0)
    }

    /// Free particles of `substance` within contact distance of the object box.
    pub fn contacting_particles(&self, object: &str, substance: &str) -> u32 {
        let Ok(obj) = self.real_object(object) else { return 0 };
        let aabb = obj.aabb();
        self.substances
            .get(substance)
            .map(|s| {
                s.particles
                    .iter()
                    .filter(|p| {
                        p.attached_to.is_none() && aabb.distance_to_point(p.position) <= CONTACT_EPS
                    })
                    .count() as u32
            })
            .unwrap_or(0)
    }

    pub fn particles_in_container(&self, object: &str, substance: &str) -> u32 {
        let Ok(obj) = self.real_object(object) else { return 0 };
        let Some(vol) = obj.container_aabb() else { return 0 };
        self.substances
            .get(substance)
            .map(|s| s.particles.iter().filter(|p| vol.contains_point(p.position)).count() as u32)
            .unwrap_or(0)
    }

    /// Fraction of the container volume occupied by `substance` particles.
    pub fn fill_fraction(&self, object: &str, substance: &str) -> f64 {
        let Ok(obj) = self.real_object(object) else { return 0.0 };
        let Some(c) = obj.container.as_ref() else { return 0.0 };
        let inside = self.particles_in_container(object, substance) as f64;
        inside * self.config.particle_volume / c.volume()
    }

    // -- stepping ---------------------------------------------------------------

    /// Advance the extended states by `dt` seconds: temperature toward active
    /// sources (fire propagation included), soaking, and water emission.
    /// Transition rules run on top of this; see the transitions module.
    pub fn step_states(&mut self, kb: &KnowledgeBase, dt: f64) {
        debug_assert!(dt > 0.0);
        self.step_temperature(kb, dt);
        self.step_soaking(kb, dt);
        self.step_water_sources(kb, dt);
        self.clock += dt;
    }

    fn active_sources(&self, kb: &KnowledgeBase) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (id, o) in self.real_objects() {
            let is_source = kb.has_property(&o.synset, Property::HeatSource)
                || kb.has_property(&o.synset, Property::ColdSource)
                || kb.has_property(&o.synset, Property::FireSource);
            if is_source {
                let active = !kb.has_property(&o.synset, Property::Toggleable) || o.toggled_on;
                if active {
                    out.push((
                        id.clone(),
                        kb.param_or_default(&o.synset, Param::HeatSourceTemperature),
                    ));
                    continue;
                }
            }
            // burning flammables act as fire sources at their on-fire point
            if kb.has_property(&o.synset, Property::Flammable) {
                let onfire = kb.param_or_default(&o.synset, Param::OnfireTemperature);
                if o.temperature >= onfire {
                    out.push((id.clone(), onfire));
                }
            }
        }
        out
    }

    fn step_temperature(&mut self, kb: &KnowledgeBase, dt: f64) {
        let sources = self.active_sources(kb);
        let approach = 1.0 - (-self.config.heat_rate * dt).exp();
        let relax = (-self.config.ambient_rate * dt).exp();
        let ambient = self.config.ambient_temperature;
        let radius = self.config.heat_influence_radius;

        let ids: Vec<String> = self.objects.keys().cloned().collect();
        let mut updates = Vec::new();
        for id in &ids {
            let obj = &self.objects[id];
            if !obj.real {
                continue;
            }
            let aabb = obj.aabb();
            // hottest influencing source wins; ties by id through the sorted scan
            let mut best: Option<f64> = None;
            for (sid, stemp) in &sources {
                if sid == id {
                    continue;
                }
                let source = &self.objects[sid];
                let influenced = source.aabb().contains_point(obj.position)
                    || source.aabb().distance(&aabb) <= radius;
                if influenced && best.map(|b| *stemp > b).unwrap_or(true) {
                    best = Some(*stemp);
                }
            }
            let t = obj.temperature;
            let next = match best {
                Some(target) => t + (target - t) * approach,
                None => ambient + (t - ambient) * relax,
            };
            updates.push((id.clone(), next));
        }
        for (id, t) in updates {
            self.objects.get_mut(&id).unwrap().set_temperature(t);
        }
    }

    fn step_soaking(&mut self, kb: &KnowledgeBase, dt: f64) {
        let ids: Vec<String> = self.objects.keys().cloned().collect();
        for id in ids {
            let obj = &self.objects[&id];
            if !obj.real || !kb.has_property(&obj.synset, Property::Soakable) {
                continue;
            }
            let aabb = obj.aabb();
            let budget_f = self.config.absorb_rate * dt + obj.absorb_carry;
            let mut budget = budget_f.floor() as u32;
            self.objects.get_mut(&id).unwrap().absorb_carry = budget_f - budget_f.floor();
            if budget == 0 {
                continue;
            }
            let liquids: Vec<String> = self
                .substances
                .iter()
                .filter(|(_, s)| s.kind == SubstanceKind::Liquid)
                .map(|(k, _)| k.clone())
                .collect();
            for liquid in liquids {
                if budget == 0 {
                    break;
                }
                let system = self.substances.get_mut(&liquid).unwrap();
                let mut absorbed = 0u32;
                system.particles.retain(|p| {
                    if absorbed < budget
                        && p.attached_to.is_none()
                        && aabb.distance_to_point(p.position) <= CONTACT_EPS
                    {
                        absorbed += 1;
                        false
                    } else {
                        true
                    }
                });
                if absorbed > 0 {
                    budget -= absorbed;
                    let obj = self.objects.get_mut(&id).unwrap();
                    *obj.soaked_level.entry(liquid).or_insert(0) += absorbed;
                }
            }
        }
    }

    fn step_water_sources(&mut self, kb: &KnowledgeBase, dt: f64) {
        let ids: Vec<String> = self.objects.keys().cloned().collect();
        // emission
        for id in &ids {
            let obj = &self.objects[id];
            if !obj.real {
                continue;
            }
            let is_source = kb.has_property(&obj.synset, Property::WaterSource)
                || kb.has_property(&obj.synset, Property::ParticleSource);
            if !is_source {
                continue;
            }
            if kb.has_property(&obj.synset, Property::Toggleable) && !obj.toggled_on {
                continue;
            }
            let emit_f = self.config.emit_rate * dt + obj.emit_carry;
            let n = emit_f.floor() as u32;
            let point = obj
                .source_offset
                .map(|off| obj.position.add(off))
                .unwrap_or_else(|| Vec3::new(obj.position.x, obj.position.y, obj.aabb().top_z()));
            {
                let o = self.objects.get_mut(id).unwrap();
                o.emit_carry = emit_f - emit_f.floor();
            }
            for _ in 0..n {
                let pos = self.settle_particle(point);
                let ambient = self.config.ambient_temperature;
                self.ensure_system("water.n.06", SubstanceKind::Liquid).particles.push(Particle {
                    position: pos,
                    temperature: ambient,
                    attached_to: None,
                });
            }
        }
        // sinks delete free particles inside their box
        for id in &ids {
            let obj = &self.objects[id];
            if !obj.real || !kb.has_property(&obj.synset, Property::ParticleSink) {
                continue;
            }
            let aabb = obj.aabb();
            for system in self.substances.values_mut() {
                system
                    .particles
                    .retain(|p| p.attached_to.is_some() || !aabb.contains_point(p.position));
            }
        }
    }

    /// Where an emitted particle comes to rest: the next grid slot of the
    /// deepest fillable container under the point (a source with its own basin
    /// fills itself), else the first box top below, else the floor plane.
    fn settle_particle(&self, from: Vec3) -> Vec3 {
        let mut best: Option<(&String, Aabb, f64)> = None;
        for (id, o) in self.real_objects() {
            if let Some(vol) = o.container_aabb() {
                let lo = vol.min();
                let hi = vol.max();
                if from.x >= lo.x
                    && from.x <= hi.x
                    && from.y >= lo.y
                    && from.y <= hi.y
                    && vol.top_z() <= from.z
                {
                    let top = vol.top_z();
                    if best.as_ref().map(|(_, _, t)| top > *t).unwrap_or(true) {
                        best = Some((id, vol, top));
                    }
                }
            }
        }
        if let Some((id, vol, _)) = best {
            let occupied: u32 = self
                .substances
                .values()
                .map(|s| {
                    s.particles.iter().filter(|p| vol.contains_point(p.position)).count() as u32
                })
                .sum();
            if let Some(pos) = grid_position(&vol, self.config.particle_volume, occupied) {
                return pos;
            }
            // container full: rest on its rim
            let top = self.objects[id].aabb().top_z();
            return Vec3::new(from.x, from.y, top);
        }
        // fall to the first surface below
        let down = self.ray_query(
            Vec3::new(from.x, from.y, from.z - 1e-9),
            Vec3::new(0.0, 0.0, -1.0),
            None,
        );
        if let Some((hit, _)) = down.first() {
            return Vec3::new(from.x, from.y, self.objects[hit].aabb().top_z());
        }
        Vec3::new(from.x, from.y, 0.0)
    }

    // -- contact events -----------------------------------------------------------

    /// A tool contacting a target with the given force: slicing, breaking,
    /// and toggling-region semantics.
    pub fn apply_contact_event(
        &mut self,
        kb: &KnowledgeBase,
        tool: &str,
        target: &str,
        force: f64,
    ) -> Result<(), WorldError> {
        self.real_object(tool)?;
        let tgt = self.real_object(target)?;
        let synset = tgt.synset.clone();

        let tool_is_slicer = kb.has_property(&self.objects[tool].synset, Property::SlicingTool);
        if tool_is_slicer
            && kb.has_property(&synset, Property::Sliceable)
            && !self.objects[target].sliced
            && force >= kb.param_or_default(&synset, Param::SliceForce)
        {
            self.replace_with_halves(kb, target)?;
        }
        if kb.has_property(&synset, Property::Breakable)
            && !self.objects[target].broken
            && force >= kb.param_or_default(&synset, Param::BreakForce)
        {
            self.replace_with_fragments(target)?;
        }
        if kb.has_property(&synset, Property::Toggleable) {
            let tgt = &self.objects[target];
            // toggling region: a small box centered on the top face
            let region = Aabb::new(
                Vec3::new(tgt.position.x, tgt.position.y, tgt.aabb().top_z()),
                Vec3::new(0.05, 0.05, 0.05),
            );
            if self.objects[tool].aabb().overlaps(&region) {
                let flipped = !self.objects[target].toggled_on;
                self.objects.get_mut(target).unwrap().toggled_on = flipped;
            }
        }
        Ok(())
    }

    /// Slice: the subject becomes the first half in place (same id, sliced
    /// flag set, extents halved along the longest axis, synset mapped to its
    /// `half__` derivative when the kb declares one); the second half spawns
    /// beside it and inherits the extended states.
    pub fn replace_with_halves(
        &mut self,
        kb: &KnowledgeBase,
        id: &str,
    ) -> Result<String, WorldError> {
        let obj = self.object(id)?.clone();
        let half_synset =
            kb.half_synset(&obj.synset).map(str::to_string).unwrap_or_else(|| obj.synset.clone());

        let mut h = obj.half_extents;
        let axis_off;
        if h.x >= h.y && h.x >= h.z {
            h.x /= 2.0;
            axis_off = Vec3::new(h.x, 0.0, 0.0);
        } else if h.y >= h.z {
            h.y /= 2.0;
            axis_off = Vec3::new(0.0, h.y, 0.0);
        } else {
            h.z /= 2.0;
            axis_off = Vec3::new(0.0, 0.0, h.z);
        }

        let first = self.objects.get_mut(id).unwrap();
        first.sliced = true;
        first.synset = half_synset.clone();
        first.half_extents = h;
        first.position = obj.position.sub(axis_off);

        let mut second = obj.clone();
        second.sliced = true;
        second.synset = half_synset;
        second.half_extents = h;
        second.position = obj.position.add(axis_off);
        second.connected_to.clear();
        let second_id = format!("{id}.half");
        self.objects.insert(second_id.clone(), second);
        Ok(second_id)
    }

    /// Break: the subject keeps its id as the first fragment; a second
    /// fragment spawns beside it.
    pub fn replace_with_fragments(&mut self, id: &str) -> Result<String, WorldError> {
        let obj = self.object(id)?.clone();
        let mut h = obj.half_extents;
        h.x /= 2.0;
        let first = self.objects.get_mut(id).unwrap();
        first.broken = true;
        first.half_extents = h;
        first.position = obj.position.sub(Vec3::new(h.x, 0.0, 0.0));
        let mut second = obj.clone();
        second.broken = true;
        second.half_extents = h;
        second.position = obj.position.add(Vec3::new(h.x, 0.0, 0.0));
        second.connected_to.clear();
        let second_id = format!("{id}.piece");
        self.objects.insert(second_id.clone(), second);
        Ok(second_id)
    }
}

/// Deterministic fill position for the `index`-th particle inside a container
/// volume: an evenly spaced grid filled bottom layer first.
pub fn grid_position(vol: &Aabb, particle_volume: f64, index: u32) -> Option<Vec3> {
    let spacing = particle_volume.cbrt();
    let ext = vol.half.scale(2.0);
    let nx = ((ext.x / spacing).round() as u32).max(1);
    let ny = ((ext.y / spacing).round() as u32).max(1);
    let nz = ((ext.z / spacing).round() as u32).max(1);
    if index >= nx * ny * nz {
        return None;
    }
    let iz = index / (nx * ny);
    let rem = index % (nx * ny);
    let iy = rem / nx;
    let ix = rem % nx;
    let lo = vol.min();
    Some(Vec3::new(
        lo.x + ext.x * (ix as f64 + 0.5) / nx as f64,
        lo.y + ext.y * (iy as f64 + 0.5) / ny as f64,
        lo.z + ext.z * (iz as f64 + 0.5) / nz as f64,
    ))
}

fn default_container(half_extents: Vec3) -> Container {
    Container { offset: Vec3::ZERO, half: half_extents.scale(0.8) }
}

/// Build an object from the knowledge base's synset model defaults.
pub fn make_object(
    kb: &KnowledgeBase,
    synset: &str,
    real: bool,
) -> Result<ObjectState, WorldError> {
    if !kb.contains(synset) {
        return Err(WorldError::UnknownSynset(synset.to_string()));
    }
    let model = kb.model(synset).cloned().unwrap_or_default();
    let half = Vec3::new(model.half_extents[0], model.half_extents[1], model.half_extents[2]);
    let container = model
        .container
        .as_ref()
        .map(|c| Container {
            offset: Vec3::new(c.offset[0], c.offset[1], c.offset[2]),
            half: Vec3::new(c.half_extents[0], c.half_extents[1], c.half_extents[2]),
        })
        .or_else(|| kb.has_property(synset, Property::Fillable).then(|| default_container(half)));
    let ambient = Config::default().ambient_temperature;
    Ok(ObjectState {
        synset: synset.to_string(),
        real,
        position: Vec3::ZERO,
        yaw: 0.0,
        half_extents: half,
        joints: model.joints.iter().map(JointState::from).collect(),
        connected_to: BTreeSet::new(),
        temperature: ambient,
        max_temperature: ambient,
        soaked_level: BTreeMap::new(),
        toggled_on: false,
        sliced: false,
        broken: false,
        cloth_keypoints: (!model.cloth_keypoints.is_empty())
            .then(|| model.cloth_keypoints.iter().map(|k| Vec3::new(k[0], k[1], k[2])).collect()),
        fold_threshold: model.fold_threshold,
        unfold_threshold: model.unfold_threshold,
        container,
        insource_binding: None,
        source_offset: model.source_offset.map(|o| Vec3::new(o[0], o[1], o[2])),
        emit_carry: 0.0,
        absorb_carry: 0.0,
    })
}

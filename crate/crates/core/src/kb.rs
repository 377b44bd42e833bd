//! Synset knowledge base: hierarchy, per-synset properties, property
//! parameters, and transition rules.
//!
//! Property annotations live on leaf synsets only; a non-leaf synset's
//! properties are the intersection of all its descendant leaves' properties,
//! which keeps definitions written against broad synsets solvable. Derived
//! properties (heatable, freezable, substance, ...) are recomputed from their
//! programmatic rules at load time and never trusted from the document.

use crate::ast::Pred;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "assembleable")]
    Assembleable,
    #[serde(rename = "breakable")]
    Breakable,
    #[serde(rename = "cloth")]
    Cloth,
    #[serde(rename = "coldSource")]
    ColdSource,
    #[serde(rename = "cookable")]
    Cookable,
    #[serde(rename = "deformable")]
    Deformable,
    #[serde(rename = "diceable")]
    Diceable,
    #[serde(rename = "drapeable")]
    Drapeable,
    #[serde(rename = "fillable")]
    Fillable,
    #[serde(rename = "fireSource")]
    FireSource,
    #[serde(rename = "flammable")]
    Flammable,
    #[serde(rename = "foldable")]
    Foldable,
    #[serde(rename = "freezable")]
    Freezable,
    #[serde(rename = "heatable")]
    Heatable,
    #[serde(rename = "heatSource")]
    HeatSource,
    #[serde(rename = "liquid")]
    Liquid,
    #[serde(rename = "macroPhysicalSubstance")]
    MacroPhysicalSubstance,
    #[serde(rename = "meltable")]
    Meltable,
    #[serde(rename = "microPhysicalSubstance")]
    MicroPhysicalSubstance,
    #[serde(rename = "mixingTool")]
    MixingTool,
    #[serde(rename = "needsOrientation")]
    NeedsOrientation,
    #[serde(rename = "openable")]
    Openable,
    #[serde(rename = "overcookable")]
    Overcookable,
    #[serde(rename = "particleApplier")]
    ParticleApplier,
    #[serde(rename = "particleRemover")]
    ParticleRemover,
    #[serde(rename = "particleSink")]
    ParticleSink,
    #[serde(rename = "particleSource")]
    ParticleSource,
    #[serde(rename = "rigidBody")]
    RigidBody,
    #[serde(rename = "rope")]
    Rope,
    #[serde(rename = "sliceable")]
    Sliceable,
    #[serde(rename = "slicingTool")]
    SlicingTool,
    #[serde(rename = "soakable")]
    Soakable,
    #[serde(rename = "softBody")]
    SoftBody,
    #[serde(rename = "substance")]
    Substance,
    #[serde(rename = "toggleable")]
    Toggleable,
    #[serde(rename = "unfoldable")]
    Unfoldable,
    #[serde(rename = "visualSubstance")]
    VisualSubstance,
    #[serde(rename = "waterCook")]
    WaterCook,
    #[serde(rename = "waterSource")]
    WaterSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SubstanceKind {
    Liquid,
    VisualSubstance,
    MicroPhysicalSubstance,
    MacroPhysicalSubstance,
}

impl SubstanceKind {
    pub fn is_physical(self) -> bool {
        matches!(self, SubstanceKind::MicroPhysicalSubstance | SubstanceKind::MacroPhysicalSubstance)
    }
}

/// Property parameter names (values are f64 in the unit noted per variant).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    /// °C the object must reach (historically) to become cooked.
    CookTemperature,
    /// °C above which the object counts as burnt.
    BurntTemperature,
    /// °C a heat/cold/fire source drives nearby objects toward.
    HeatSourceTemperature,
    /// °C at which a flammable object catches fire.
    OnfireTemperature,
    /// °C below which the object is frozen.
    FrozenTemperature,
    /// °C above which the object is heated.
    HeatedTemperature,
    /// °C above which a liquid's particles boil.
    BoiledTemperature,
    /// N of contact force needed to slice.
    SliceForce,
    /// N of contact force needed to break.
    BreakForce,
    /// liquid particles absorbed before the object is soaked.
    SoakedThreshold,
    /// fraction of container volume occupied before it is filled.
    FilledThreshold,
    /// substance particles on/in contact before the object is covered.
    CoveredThreshold,
}

impl Param {
    /// Properties that enable annotating this parameter on a synset.
    fn enabling(self) -> &'static [Property] {
        match self {
            Param::CookTemperature | Param::BurntTemperature => &[Property::Cookable],
            Param::HeatSourceTemperature => {
                &[Property::HeatSource, Property::ColdSource, Property::FireSource]
            }
            Param::OnfireTemperature => &[Property::Flammable],
            Param::FrozenTemperature => &[Property::Freezable],
            Param::HeatedTemperature => &[Property::Heatable],
            Param::BoiledTemperature => &[Property::Liquid],
            Param::SliceForce => &[Property::Sliceable],
            Param::BreakForce => &[Property::Breakable],
            Param::SoakedThreshold => &[Property::Soakable],
            Param::FilledThreshold => &[Property::Fillable],
            // per object category or per substance; no single enabler
            Param::CoveredThreshold => &[],
        }
    }

    fn is_temperature(self) -> bool {
        matches!(
            self,
            Param::CookTemperature
                | Param::BurntTemperature
                | Param::HeatSourceTemperature
                | Param::OnfireTemperature
                | Param::FrozenTemperature
                | Param::HeatedTemperature
                | Param::BoiledTemperature
        )
    }
}

/// Default thresholds used when a synset lacks the parameter annotation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Defaults {
    pub onfire_temperature: f64,
    pub frozen_temperature: f64,
    pub heated_temperature: f64,
    pub boiled_temperature: f64,
    pub slice_force: f64,
    pub break_force: f64,
    pub soaked_threshold: f64,
    pub filled_threshold: f64,
    pub covered_threshold: f64,
    pub reach_distance: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            onfire_temperature: 300.0,
            frozen_temperature: 0.0,
            heated_temperature: 75.0,
            boiled_temperature: 100.0,
            slice_force: 10.0,
            break_force: 300.0,
            soaked_threshold: 50.0,
            filled_threshold: 0.5,
            covered_threshold: 50.0,
            reach_distance: 2.0,
        }
    }
}

/// Geometry defaults used when an activity instantiates a fresh object of a
/// synset that has no scene fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default = "default_half_extents")]
    pub half_extents: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub container: Option<ContainerSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joints: Vec<JointSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cloth_keypoints: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unfold_threshold: Option<f64>,
    /// Emission point of a water source, relative to the object center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_offset: Option<[f64; 3]>,
}

fn default_half_extents() -> [f64; 3] {
    [0.05, 0.05, 0.05]
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            half_extents: default_half_extents(),
            container: None,
            joints: Vec::new(),
            cloth_keypoints: Vec::new(),
            fold_threshold: None,
            unfold_threshold: None,
            source_offset: None,
        }
    }
}

/// Inner volume of a fillable object, relative to the object center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerSpec {
    #[serde(default)]
    pub offset: [f64; 3],
    pub half_extents: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub value: f64,
    #[serde(default = "default_true")]
    pub relevant: bool,
}

fn default_true() -> bool {
    true
}

// ---------------------------------------------------------------------------
// Transition rules
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransitionRule {
    Machine(MachineRule),
    Cleaning(CleaningRule),
}

impl TransitionRule {
    pub fn rule_id(&self) -> &str {
        match self {
            TransitionRule::Machine(r) => &r.rule_id,
            TransitionRule::Cleaning(r) => &r.rule_id,
        }
    }
}

/// Composition/decomposition rule: a machine turns an input multiset into an
/// output multiset when its trigger holds and all inputs sit in its container
/// volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineRule {
    pub rule_id: String,
    pub machine: String,
    #[serde(default)]
    pub trigger: Trigger,
    pub inputs: Vec<RuleItem>,
    pub outputs: Vec<RuleItem>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trigger {
    #[serde(default)]
    pub toggled_on: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_temperature: Option<f64>,
    /// Reserved: rules fire on first satisfaction; durations are not modeled.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub min_duration: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleItem {
    pub synset: String,
    #[serde(default = "default_count")]
    pub count: u32,
    #[serde(default = "default_true")]
    pub consumed: bool,
}

fn default_count() -> u32 {
    1
}

/// Condition-gated removal of covering substances. The remover must carry
/// `particleRemover`, match `removers` when non-empty, and be soaked in one of
/// `solvents` when non-empty (empty solvents = dry removal allowed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningRule {
    pub rule_id: String,
    pub covering: Vec<String>,
    #[serde(default)]
    pub solvents: Vec<String>,
    #[serde(default)]
    pub removers: Vec<String>,
}

// ---------------------------------------------------------------------------
// Document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KbDocument {
    pub synsets: Vec<SynsetEntry>,
    #[serde(default)]
    pub parameters: Vec<ParameterEntry>,
    #[serde(default)]
    pub transition_rules: Vec<TransitionRule>,
    #[serde(default)]
    pub room_types: Option<Vec<String>>,
    #[serde(default)]
    pub defaults: Option<Defaults>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynsetEntry {
    pub id: String,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default)]
    pub properties: Vec<Property>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub synset: String,
    pub property: Property,
    pub name: Param,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

pub const DEFAULT_ROOM_TYPES: &[&str] = &[
    "kitchen",
    "laundry_room",
    "utility_room",
    "bathroom",
    "bedroom",
    "living_room",
    "dining_room",
    "corridor",
    "garage",
    "garden",
    "office",
    "pantry",
    "playroom",
    "storage_room",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KbError {
    #[error("cycle detected in synset hierarchy at `{0}`")]
    Cycle(String),
    #[error("unknown synset `{0}`")]
    UnknownSynset(String),
    #[error("duplicate synset `{0}`")]
    DuplicateSynset(String),
    #[error("synset `{synset}`: parent `{parent}` is not declared")]
    UnknownParent { synset: String, parent: String },
    #[error("synset `{0}` is not a leaf; properties may only be annotated on leaves")]
    PropertiesOnNonLeaf(String),
    #[error("synset `{0}` carries more than one substance kind")]
    ConflictingSubstanceKinds(String),
    #[error("parameter `{name:?}` on `{synset}`: synset lacks enabling property")]
    ParameterWithoutProperty { synset: String, name: Param },
    #[error("parameter `{name:?}` on `{synset}`: parameters attach to leaf synsets only")]
    ParameterOnNonLeaf { synset: String, name: Param },
    #[error("parameter `{name:?}` on `{synset}`: declared property `{property:?}` does not enable it")]
    ParameterPropertyMismatch { synset: String, name: Param, property: Property },
    #[error("synset `{0}`: cook_temperature must be below burnt_temperature")]
    CookAboveBurnt(String),
    #[error("parameter `{name:?}` on `{synset}`: threshold must be positive")]
    NonPositiveThreshold { synset: String, name: Param },
    #[error("rule `{0}`: inputs and outputs must be non-empty")]
    EmptyRule(String),
    #[error("rule `{rule}`: synset `{synset}` is unknown")]
    RuleUnknownSynset { rule: String, synset: String },
    #[error("rule `{rule}`: output synset `{synset}` resolves to no leaf")]
    UnresolvableOutput { rule: String, synset: String },
    #[error("rule `{rule}`: machine `{synset}` lacks property `{property:?}` required by its trigger")]
    MachineMissingProperty { rule: String, synset: String, property: Property },
    #[error("duplicate rule id `{0}`")]
    DuplicateRule(String),
    #[error("invalid kb document: {0}")]
    Document(String),
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    /// Memoized property sets: the annotated + derived set on leaves, the
    /// intersection over descendant leaves elsewhere.
    inferred: Vec<BTreeSet<Property>>,
    models: Vec<ModelSpec>,
    parameters: HashMap<(usize, Param), f64>,
    rules: Vec<TransitionRule>,
    room_types: BTreeSet<String>,
    pub defaults: Defaults,
}

impl KnowledgeBase {
    pub fn from_json(text: &str) -> Result<KnowledgeBase, KbError> {
        let doc: KbDocument =
            serde_json::from_str(text).map_err(|e| KbError::Document(e.to_string()))?;
        KnowledgeBase::load(doc)
    }

    pub fn load(doc: KbDocument) -> Result<KnowledgeBase, KbError> {
        let mut ids = Vec::with_capacity(doc.synsets.len());
        let mut index = HashMap::new();
        for entry in &doc.synsets {
            if index.insert(entry.id.clone(), ids.len()).is_some() {
                return Err(KbError::DuplicateSynset(entry.id.clone()));
            }
            ids.push(entry.id.clone());
        }

        let n = ids.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for (i, entry) in doc.synsets.iter().enumerate() {
            for p in &entry.parents {
                let pi = *index.get(p).ok_or_else(|| KbError::UnknownParent {
                    synset: entry.id.clone(),
                    parent: p.clone(),
                })?;
                parents[i].push(pi);
                children[pi].push(i);
            }
        }

        // acyclicity via DFS coloring
        let mut color = vec![0u8; n];
        fn dfs(v: usize, children: &[Vec<usize>], color: &mut [u8]) -> Result<(), usize> {
            color[v] = 1;
            for &c in &children[v] {
                match color[c] {
                    0 => dfs(c, children, color)?,
                    1 => return Err(c),
                    _ => {}
                }
            }
            color[v] = 2;
            Ok(())
        }
        for v in 0..n {
            if color[v] == 0 {
                if let Err(c) = dfs(v, &children, &mut color) {
                    return Err(KbError::Cycle(ids[c].clone()));
                }
            }
        }

        let is_leaf: Vec<bool> = children.iter().map(|c| c.is_empty()).collect();

        // annotated properties, leaves only; derived properties recomputed
        let mut leaf_properties = vec![BTreeSet::new(); n];
        for (i, entry) in doc.synsets.iter().enumerate() {
            if entry.properties.is_empty() {
                continue;
            }
            if !is_leaf[i] {
                return Err(KbError::PropertiesOnNonLeaf(entry.id.clone()));
            }
            let mut props: BTreeSet<Property> = entry.properties.iter().copied().collect();
            derive_properties(&entry.id, &mut props, &index, &doc.synsets);
            let kinds = props.iter().filter(|p| substance_kind_of(**p).is_some()).count();
            if kinds > 1 {
                return Err(KbError::ConflictingSubstanceKinds(entry.id.clone()));
            }
            leaf_properties[i] = props;
        }

        // intersection over descendant leaves, bottom-up (children before parents)
        let mut inferred: Vec<Option<BTreeSet<Property>>> = vec![None; n];
        let mut order: Vec<usize> = (0..n).collect();
        // bottom-up: leaves (depth 0) before their ancestors
        order.sort_by_key(|&v| depth_below(v, &children));
        for &v in &order {
            if is_leaf[v] {
                inferred[v] = Some(leaf_properties[v].clone());
            } else {
                let mut acc: Option<BTreeSet<Property>> = None;
                for &c in &children[v] {
                    let cp = inferred[c].as_ref().expect("children computed first");
                    acc = Some(match acc {
                        None => cp.clone(),
                        Some(a) => a.intersection(cp).copied().collect(),
                    });
                }
                inferred[v] = acc.or_else(|| Some(BTreeSet::new()));
            }
        }
        let inferred: Vec<BTreeSet<Property>> = inferred.into_iter().map(|o| o.unwrap()).collect();

        let models: Vec<ModelSpec> =
            doc.synsets.iter().map(|e| e.model.clone().unwrap_or_default()).collect();

        // parameters: leaves only, enabling property required
        let mut parameters = HashMap::new();
        for p in &doc.parameters {
            let si = *index.get(&p.synset).ok_or_else(|| KbError::UnknownSynset(p.synset.clone()))?;
            if !is_leaf[si] {
                return Err(KbError::ParameterOnNonLeaf { synset: p.synset.clone(), name: p.name });
            }
            let enabling = p.name.enabling();
            if !enabling.is_empty() {
                if !enabling.contains(&p.property) {
                    return Err(KbError::ParameterPropertyMismatch {
                        synset: p.synset.clone(),
                        name: p.name,
                        property: p.property,
                    });
                }
                if !leaf_properties[si].contains(&p.property) {
                    return Err(KbError::ParameterWithoutProperty {
                        synset: p.synset.clone(),
                        name: p.name,
                    });
                }
            }
            if !p.name.is_temperature() && p.value <= 0.0 {
                return Err(KbError::NonPositiveThreshold { synset: p.synset.clone(), name: p.name });
            }
            parameters.insert((si, p.name), p.value);
        }
        for ((si, name), value) in &parameters {
            if *name == Param::CookTemperature {
                if let Some(burnt) = parameters.get(&(*si, Param::BurntTemperature)) {
                    if value >= burnt {
                        return Err(KbError::CookAboveBurnt(ids[*si].clone()));
                    }
                }
            }
        }

        let room_types: BTreeSet<String> = doc
            .room_types
            .clone()
            .unwrap_or_else(|| DEFAULT_ROOM_TYPES.iter().map(|s| s.to_string()).collect())
            .into_iter()
            .collect();

        let mut kb = KnowledgeBase {
            ids,
            index,
            parents,
            children,
            inferred,
            models,
            parameters,
            rules: Vec::new(),
            room_types,
            defaults: doc.defaults.unwrap_or_default(),
        };
        let mut rule_ids = HashSet::new();
        for rule in &doc.transition_rules {
            kb.check_rule(rule)?;
            if !rule_ids.insert(rule.rule_id().to_string()) {
                return Err(KbError::DuplicateRule(rule.rule_id().to_string()));
            }
        }
        kb.rules = doc.transition_rules;
        Ok(kb)
    }

    fn check_rule(&self, rule: &TransitionRule) -> Result<(), KbError> {
        match rule {
            TransitionRule::Machine(r) => {
                if r.inputs.is_empty() || r.outputs.is_empty() {
                    return Err(KbError::EmptyRule(r.rule_id.clone()));
                }
                let mi = self.require(&r.machine).map_err(|_| KbError::RuleUnknownSynset {
                    rule: r.rule_id.clone(),
                    synset: r.machine.clone(),
                })?;
                if r.trigger.toggled_on && !self.inferred[mi].contains(&Property::Toggleable) {
                    return Err(KbError::MachineMissingProperty {
                        rule: r.rule_id.clone(),
                        synset: r.machine.clone(),
                        property: Property::Toggleable,
                    });
                }
                for item in r.inputs.iter().chain(&r.outputs) {
                    self.require(&item.synset).map_err(|_| KbError::RuleUnknownSynset {
                        rule: r.rule_id.clone(),
                        synset: item.synset.clone(),
                    })?;
                }
                for out in &r.outputs {
                    if self.leaves_under(&out.synset).is_empty() {
                        return Err(KbError::UnresolvableOutput {
                            rule: r.rule_id.clone(),
                            synset: out.synset.clone(),
                        });
                    }
                }
            }
            TransitionRule::Cleaning(r) => {
                if r.covering.is_empty() {
                    return Err(KbError::EmptyRule(r.rule_id.clone()));
                }
                for s in r.covering.iter().chain(&r.solvents).chain(&r.removers) {
                    self.require(s).map_err(|_| KbError::RuleUnknownSynset {
                        rule: r.rule_id.clone(),
                        synset: s.clone(),
                    })?;
                }
            }
        }
        Ok(())
    }

    fn require(&self, synset: &str) -> Result<usize, KbError> {
        self.index.get(synset).copied().ok_or_else(|| KbError::UnknownSynset(synset.to_string()))
    }

    pub fn contains(&self, synset: &str) -> bool {
        self.index.contains_key(synset)
    }

    pub fn synsets(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(|s| s.as_str())
    }

    pub fn is_leaf(&self, synset: &str) -> bool {
        self.index.get(synset).map(|&i| self.children[i].is_empty()).unwrap_or(false)
    }

    /// Leaf synset: annotated property set. Non-leaf: intersection over all
    /// descendant leaves.
    pub fn infer_properties(&self, synset: &str) -> Result<&BTreeSet<Property>, KbError> {
        Ok(&self.inferred[self.require(synset)?])
    }

    pub fn has_property(&self, synset: &str, prop: Property) -> bool {
        self.index.get(synset).map(|&i| self.inferred[i].contains(&prop)).unwrap_or(false)
    }

    pub fn substance_kind(&self, synset: &str) -> Option<SubstanceKind> {
        let i = *self.index.get(synset)?;
        self.inferred[i].iter().find_map(|&p| substance_kind_of(p))
    }

    pub fn is_substance(&self, synset: &str) -> bool {
        self.substance_kind(synset).is_some()
    }

    /// All descendant leaves of the synset (the synset itself when a leaf).
    pub fn leaves_under(&self, synset: &str) -> Vec<&str> {
        let Some(&start) = self.index.get(synset) else { return Vec::new() };
        let mut out = Vec::new();
        let mut stack = vec![start];
        let mut seen = HashSet::new();
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            if self.children[v].is_empty() {
                out.push(self.ids[v].as_str());
            } else {
                stack.extend(&self.children[v]);
            }
        }
        out.sort();
        out
    }

    /// Is `synset` equal to or below `ancestor` in the hierarchy?
    pub fn is_descendant_or_equal(&self, synset: &str, ancestor: &str) -> bool {
        let (Some(&s), Some(&a)) = (self.index.get(synset), self.index.get(ancestor)) else {
            return false;
        };
        if s == a {
            return true;
        }
        let mut stack = vec![s];
        let mut seen = HashSet::new();
        while let Some(v) = stack.pop() {
            if v == a {
                return true;
            }
            if seen.insert(v) {
                stack.extend(&self.parents[v]);
            }
        }
        false
    }

    /// Parameter lookup with fall-back to the configurable defaults. Leaf
    /// synsets only; parameters never aggregate across the hierarchy.
    pub fn param(&self, synset: &str, name: Param) -> Result<Option<f64>, KbError> {
        let i = self.require(synset)?;
        if !self.children[i].is_empty() {
            return Err(KbError::ParameterOnNonLeaf { synset: synset.to_string(), name });
        }
        Ok(self.parameters.get(&(i, name)).copied())
    }

    pub fn param_or_default(&self, synset: &str, name: Param) -> f64 {
        let annotated = self
            .index
            .get(synset)
            .and_then(|&i| self.parameters.get(&(i, name)))
            .copied();
        annotated.unwrap_or(match name {
            Param::OnfireTemperature => self.defaults.onfire_temperature,
            Param::FrozenTemperature => self.defaults.frozen_temperature,
            Param::HeatedTemperature => self.defaults.heated_temperature,
            Param::BoiledTemperature => self.defaults.boiled_temperature,
            Param::SliceForce => self.defaults.slice_force,
            Param::BreakForce => self.defaults.break_force,
            Param::SoakedThreshold => self.defaults.soaked_threshold,
            Param::FilledThreshold => self.defaults.filled_threshold,
            Param::CoveredThreshold => self.defaults.covered_threshold,
            // no paper default exists for these; callers treat None as never
            Param::CookTemperature => f64::INFINITY,
            Param::BurntTemperature => f64::INFINITY,
            Param::HeatSourceTemperature => self.defaults.heated_temperature,
        })
    }

    pub fn model(&self, synset: &str) -> Option<&ModelSpec> {
        self.index.get(synset).map(|&i| &self.models[i])
    }

    pub fn rules(&self) -> &[TransitionRule] {
        &self.rules
    }

    pub fn machine_rules(&self) -> impl Iterator<Item = &MachineRule> {
        self.rules.iter().filter_map(|r| match r {
            TransitionRule::Machine(m) => Some(m),
            TransitionRule::Cleaning(_) => None,
        })
    }

    pub fn cleaning_rules(&self) -> impl Iterator<Item = &CleaningRule> {
        self.rules.iter().filter_map(|r| match r {
            TransitionRule::Cleaning(c) => Some(c),
            TransitionRule::Machine(_) => None,
        })
    }

    pub fn room_types(&self) -> &BTreeSet<String> {
        &self.room_types
    }

    /// The `half__<base>` derivative synset produced by slicing, when the kb
    /// declares one.
    pub fn half_synset(&self, synset: &str) -> Option<&str> {
        let candidate = format!("half__{synset}");
        self.index.get(&candidate).map(|&i| self.ids[i].as_str())
    }

    /// Predicates applicable to the synset as subject, per the property ->
    /// state mapping plus the always-available kinematic predicates for
    /// non-substances.
    pub fn applicable_predicates(&self, synset: &str) -> Result<BTreeSet<Pred>, KbError> {
        let props = self.infer_properties(synset)?;
        let mut out = BTreeSet::from([Pred::Real, Pred::Future]);
        if self.is_substance(synset) {
            if props.contains(&Property::Liquid) {
                out.insert(Pred::Boiled);
            }
            return Ok(out);
        }
        out.extend([
            Pred::OnTopOf,
            Pred::InsideOf,
            Pred::NextTo,
            Pred::Under,
            Pred::OnFloor,
            Pred::InContactWith,
            Pred::ConnectedWith,
            Pred::Hung,
            Pred::Blended,
            Pred::InReachOfAgent,
            Pred::InSameRoomAsAgent,
            Pred::InFoVOfAgent,
            Pred::InHandOfAgent,
            Pred::InRoom,
        ]);
        for p in props {
            match p {
                Property::Cookable => {
                    out.insert(Pred::Cooked);
                    out.insert(Pred::Burnt);
                }
                Property::Freezable => {
                    out.insert(Pred::Frozen);
                }
                Property::Heatable => {
                    out.insert(Pred::Heated);
                }
                Property::Flammable => {
                    out.insert(Pred::OnFire);
                }
                Property::Toggleable => {
                    out.insert(Pred::ToggledOn);
                }
                Property::Sliceable => {
                    out.insert(Pred::Sliced);
                }
                Property::Breakable => {
                    out.insert(Pred::Broken);
                }
                Property::Fillable => {
                    out.insert(Pred::Filled);
                    out.insert(Pred::Empty);
                }
                Property::Openable => {
                    out.insert(Pred::Open);
                    out.insert(Pred::Closed);
                }
                Property::Foldable => {
                    out.insert(Pred::Folded);
                }
                Property::Unfoldable => {
                    out.insert(Pred::Unfolded);
                }
                Property::Soakable => {
                    out.insert(Pred::Soaked);
                }
                Property::Assembleable => {
                    out.insert(Pred::Assembled);
                }
                Property::ParticleApplier => {
                    out.insert(Pred::InSource);
                }
                _ => {}
            }
        }
        Ok(out)
    }
}

fn substance_kind_of(p: Property) -> Option<SubstanceKind> {
    match p {
        Property::Liquid => Some(SubstanceKind::Liquid),
        Property::VisualSubstance => Some(SubstanceKind::VisualSubstance),
        Property::MicroPhysicalSubstance => Some(SubstanceKind::MicroPhysicalSubstance),
        Property::MacroPhysicalSubstance => Some(SubstanceKind::MacroPhysicalSubstance),
        _ => None,
    }
}

/// Programmatic property rules, applied on top of the annotations.
fn derive_properties(
    id: &str,
    props: &mut BTreeSet<Property>,
    index: &HashMap<String, usize>,
    entries: &[SynsetEntry],
) {
    if props.contains(&Property::RigidBody) {
        props.insert(Property::Heatable);
    }
    if props.contains(&Property::Heatable) {
        props.insert(Property::Freezable);
    }
    if props.contains(&Property::SoftBody)
        || props.contains(&Property::Cloth)
        || props.contains(&Property::Rope)
    {
        props.insert(Property::Deformable);
    }
    if props.contains(&Property::Cloth) || props.contains(&Property::SoftBody) {
        props.insert(Property::Foldable);
    }
    if props.contains(&Property::Foldable) {
        props.insert(Property::Unfoldable);
    }
    if props.contains(&Property::Cloth) || props.contains(&Property::Rope) {
        props.insert(Property::Drapeable);
    }
    if [
        Property::Liquid,
        Property::VisualSubstance,
        Property::MicroPhysicalSubstance,
        Property::MacroPhysicalSubstance,
    ]
    .iter()
    .any(|p| props.contains(p))
    {
        props.insert(Property::Substance);
    }
    // half__x inherits diceable when the base synset is sliceable
    if let Some(base) = id.strip_prefix("half__") {
        if let Some(&bi) = index.get(base) {
            if entries[bi].properties.contains(&Property::Sliceable) {
                props.insert(Property::Diceable);
            }
        }
    }
}

/// Maximum chain length below a node; used only to order the bottom-up pass.
fn depth_below(v: usize, children: &[Vec<usize>]) -> usize {
    fn rec(v: usize, children: &[Vec<usize>], memo: &mut HashMap<usize, usize>) -> usize {
        if let Some(&d) = memo.get(&v) {
            return d;
        }
        let d = children[v].iter().map(|&c| 1 + rec(c, children, memo)).max().unwrap_or(0);
        memo.insert(v, d);
        d
    }
    rec(v, children, &mut HashMap::new())
}

/// Convenience used by tests and fixtures.
pub fn entry(id: &str, parents: &[&str], properties: &[Property]) -> SynsetEntry {
    SynsetEntry {
        id: id.to_string(),
        parents: parents.iter().map(|s| s.to_string()).collect(),
        properties: properties.to_vec(),
        model: None,
    }
}

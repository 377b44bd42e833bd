//! Static validation of activity definitions against a knowledge base, and
//! canonical argument ordering for the mixed-order corpus predicates.

use crate::ast::{synset_of_instance, ActivityDefinition, Atom, Formula, GroundLiteral, Pred, Term};
use crate::kb::{KnowledgeBase, Property};
use crate::predicates::{expected_arity, sampleable};
use serde::Serialize;
use std::collections::{BTreeMap, HashSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    /// Where in the definition the finding sits (section + literal text).
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}] {}: {}", self.code, self.location, self.message)
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

struct Ctx<'a> {
    def: &'a ActivityDefinition,
    kb: &'a KnowledgeBase,
    out: Vec<Diagnostic>,
}

impl Ctx<'_> {
    fn error(&mut self, code: &str, location: String, message: String) {
        self.out.push(Diagnostic { severity: Severity::Error, code: code.into(), location, message });
    }

    fn warn(&mut self, code: &str, location: String, message: String) {
        self.out.push(Diagnostic {
            severity: Severity::Warning,
            code: code.into(),
            location,
            message,
        });
    }

    /// Synset of a ground instance: declared type, the id prefix, or the id
    /// itself when it is a bare synset reference.
    fn instance_synset(&self, id: &str) -> Option<String> {
        self.def
            .synset_of(id)
            .map(str::to_string)
            .or_else(|| self.kb.contains(id).then(|| id.to_string()))
    }
}

/// The unique declared instance of a bare synset reference, if any. The
/// corpus occasionally writes `shelf.n.01` where `shelf.n.01_1` is meant.
pub fn resolve_bare_synset<'a>(def: &'a ActivityDefinition, arg: &str) -> Option<&'a str> {
    let mut matches = def.objects.iter().filter(|(_, synset)| synset == arg);
    match (matches.next(), matches.next()) {
        (Some((id, _)), None) => Some(id),
        _ => None,
    }
}

/// Validate a parsed definition. An empty error set means the definition is
/// instantiable against this knowledge base; warnings record corpus quirks
/// the toolkit absorbs (argument reordering, undeclared instances, missing
/// agent, substances in kinematic literals).
pub fn validate_problem(def: &ActivityDefinition, kb: &KnowledgeBase) -> Vec<Diagnostic> {
    let mut ctx = Ctx { def, kb, out: Vec::new() };

    // --- object declarations ------------------------------------------------
    let mut substance_instances: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut agents = 0usize;
    for (id, synset) in &def.objects {
        if !kb.contains(synset) {
            ctx.error(
                "unknown-synset",
                format!("objects: {id}"),
                format!("synset `{synset}` is not in the knowledge base"),
            );
            continue;
        }
        if kb.is_substance(synset) {
            substance_instances.entry(synset).or_default().push(id);
        }
        if synset == "agent.n.01" {
            agents += 1;
        }
    }
    for (synset, ids) in substance_instances {
        if ids.len() > 1 {
            ctx.error(
                "substance-multiplicity",
                format!("objects: {}", ids.join(", ")),
                format!("substance `{synset}` may declare at most one instance, found {}", ids.len()),
            );
        }
    }
    match agents {
        0 => ctx.warn(
            "agent-count",
            "objects".into(),
            "no agent.n.01 instance declared; the scene agent will be used".into(),
        ),
        1 => {}
        n => ctx.error(
            "agent-count",
            "objects".into(),
            format!("exactly one agent.n.01 instance may be declared, found {n}"),
        ),
    }

    // --- init literals --------------------------------------------------------
    let mut future_instances: HashSet<&str> = HashSet::new();
    for lit in &def.init {
        if lit.pred == Pred::Future {
            if let Some(id) = lit.args.first() {
                future_instances.insert(id.as_str());
            }
        }
    }
    for (i, lit) in def.init.iter().enumerate() {
        let loc = format!("init[{i}] {lit}");
        check_ground_literal(&mut ctx, lit, &loc, &future_instances);
    }

    // --- goal -------------------------------------------------------------------
    let mut binders: Vec<(String, String)> = Vec::new();
    check_formula(&mut ctx, &def.goal, &mut binders);

    ctx.out
}

fn check_ground_literal(
    ctx: &mut Ctx,
    lit: &GroundLiteral,
    loc: &str,
    futures: &HashSet<&str>,
) {
    let pred = lit.pred;
    if pred == Pred::Future {
        if !lit.polarity {
            ctx.error("future-conflict", loc.into(), "`future` cannot be negated in init".into());
        }
        if let Some(id) = lit.args.first() {
            if !ctx.def.objects.iter().any(|(oid, _)| oid == id) {
                ctx.error(
                    "future-conflict",
                    loc.into(),
                    format!("future instance `{id}` is not declared in :objects"),
                );
            }
            // a future object must appear in no other init literal
            let elsewhere = ctx.def.init.iter().any(|other| {
                !(other.pred == Pred::Future && other.args.first() == Some(id))
                    && other.args.iter().any(|a| a == id)
            });
            if elsewhere {
                ctx.error(
                    "future-conflict",
                    loc.into(),
                    format!("future instance `{id}` appears in another init literal"),
                );
            }
        }
    } else {
        // non-future literals must not touch future instances
        for a in &lit.args {
            if futures.contains(a.as_str()) {
                // reported at the future literal; avoid duplicates here
            }
        }
    }

    // undeclared ground instances (room types excepted)
    for (idx, arg) in lit.args.iter().enumerate() {
        if pred == Pred::InRoom && idx == 1 {
            continue;
        }
        if ctx.def.objects.iter().any(|(oid, _)| oid == arg) {
            continue;
        }
        if let Some(unique) = resolve_bare_synset(ctx.def, arg) {
            ctx.warn(
                "bare-synset",
                loc.into(),
                format!("`{arg}` names a synset, not an instance; resolved to `{unique}`"),
            );
        } else if synset_of_instance(arg).is_some() {
            ctx.warn(
                "undeclared-instance",
                loc.into(),
                format!("`{arg}` is not declared in :objects; its synset is inferred from the id"),
            );
        } else {
            ctx.error(
                "malformed-argument",
                loc.into(),
                format!("`{arg}` is neither a declared instance nor an instance-shaped id"),
            );
        }
    }

    let synsets: Vec<Option<String>> = lit
        .args
        .iter()
        .enumerate()
        .map(|(idx, a)| {
            if pred == Pred::InRoom && idx == 1 {
                None
            } else {
                ctx.instance_synset(a)
            }
        })
        .collect();
    check_atom_semantics(ctx, pred, &synsets, &lit.args, loc);

    // init must be satisfiable by sampling
    if !matches!(pred, Pred::Future | Pred::Real | Pred::InRoom | Pred::InSource)
        && !sampleable(pred, lit.polarity)
    {
        ctx.warn(
            "unsampleable-init",
            loc.into(),
            format!("{pred}={} has no sampling function; instantiation can only re-check it", lit.polarity),
        );
    }
}

fn check_formula(ctx: &mut Ctx, f: &Formula, binders: &mut Vec<(String, String)>) {
    match f {
        Formula::Atom(atom) => check_goal_atom(ctx, atom, binders),
        Formula::Not(inner) => check_formula(ctx, inner, binders),
        Formula::And(cs) | Formula::Or(cs) => {
            for c in cs {
                check_formula(ctx, c, binders);
            }
        }
        Formula::Imply(a, b) => {
            check_formula(ctx, a, binders);
            check_formula(ctx, b, binders);
        }
        Formula::Forall(b, body) | Formula::Exists(b, body) => {
            if !ctx.kb.contains(&b.synset) {
                ctx.error(
                    "unknown-synset",
                    format!("goal quantifier ?{}", b.var),
                    format!("synset `{}` is not in the knowledge base", b.synset),
                );
            }
            binders.push((b.var.clone(), b.synset.clone()));
            check_formula(ctx, body, binders);
            binders.pop();
        }
        Formula::ForNPairs { first, second, body, .. } => {
            for b in [first, second] {
                if !ctx.kb.contains(&b.synset) {
                    ctx.error(
                        "unknown-synset",
                        format!("goal quantifier ?{}", b.var),
                        format!("synset `{}` is not in the knowledge base", b.synset),
                    );
                }
            }
            binders.push((first.var.clone(), first.synset.clone()));
            binders.push((second.var.clone(), second.synset.clone()));
            check_formula(ctx, body, binders);
            binders.pop();
            binders.pop();
        }
    }
}

fn check_goal_atom(ctx: &mut Ctx, atom: &Atom, binders: &[(String, String)]) {
    let loc = format!("goal ({} ...)", atom.pred.surface());
    if atom.pred == Pred::InSource {
        ctx.error(
            "init-only-predicate",
            loc.clone(),
            "`insource` binds appliers in init and is not goal-evaluable".into(),
        );
    }
    let mut raw_args = Vec::new();
    let synsets: Vec<Option<String>> = atom
        .args
        .iter()
        .enumerate()
        .map(|(idx, t)| {
            raw_args.push(t.text().to_string());
            match t {
                Term::Symbol(_) => None,
                Term::Variable(v) => {
                    binders.iter().rev().find(|(var, _)| var == v).map(|(_, s)| s.clone())
                }
                Term::Instance(id) => {
                    if !ctx.def.objects.iter().any(|(oid, _)| oid == id)
                        && !(atom.pred == Pred::InRoom && idx == 1)
                    {
                        if synset_of_instance(id).is_some() {
                            ctx.warn(
                                "undeclared-instance",
                                loc.clone(),
                                format!("`{id}` is not declared in :objects"),
                            );
                        } else {
                            ctx.error(
                                "malformed-argument",
                                loc.clone(),
                                format!("`{id}` is not an instance-shaped id"),
                            );
                        }
                    }
                    ctx.instance_synset(id)
                }
            }
        })
        .collect();
    check_atom_semantics(ctx, atom.pred, &synsets, &raw_args, &loc);
}

/// Arity, argument kinds, canonical (object, substance) ordering, and the
/// property -> predicate applicability mapping.
fn check_atom_semantics(
    ctx: &mut Ctx,
    pred: Pred,
    synsets: &[Option<String>],
    raw_args: &[String],
    loc: &str,
) {
    let (arity, variadic) = expected_arity(pred);
    let ok = if variadic { synsets.len() >= arity } else { synsets.len() == arity };
    if !ok {
        ctx.error(
            "arity-mismatch",
            loc.into(),
            format!("{pred} expects {arity}{} arguments, got {}", if variadic { "+" } else { "" }, synsets.len()),
        );
        return;
    }
    // unknown synsets end analysis of this atom
    for s in synsets.iter().flatten() {
        if !ctx.kb.contains(s) {
            ctx.error(
                "unknown-synset",
                loc.into(),
                format!("synset `{s}` is not in the knowledge base"),
            );
            return;
        }
    }

    let kb = ctx.kb;
    let is_substance =
        |s: &Option<String>| s.as_deref().map(|s| kb.is_substance(s)).unwrap_or(false);

    match pred {
        // mixed-order corpus predicates: canonical order is (object, substance)
        Pred::Filled | Pred::Empty | Pred::Covered | Pred::Soaked | Pred::InSource => {
            let sub0 = is_substance(&synsets[0]);
            let sub1 = is_substance(&synsets[1]);
            let (obj_syn, sub_syn) = match (sub0, sub1) {
                (true, false) => {
                    ctx.warn(
                        "argument-order",
                        loc.into(),
                        format!(
                            "{pred} arguments reordered to (object, substance): ({}, {})",
                            raw_args[1], raw_args[0]
                        ),
                    );
                    (&synsets[1], &synsets[0])
                }
                (false, true) => (&synsets[0], &synsets[1]),
                (true, true) => {
                    ctx.error(
                        "inapplicable-predicate",
                        loc.into(),
                        format!("{pred} requires exactly one substance argument, got two"),
                    );
                    return;
                }
                (false, false) => {
                    ctx.error(
                        "inapplicable-predicate",
                        loc.into(),
                        format!("{pred} requires a substance argument"),
                    );
                    return;
                }
            };
            let (required, what) = match pred {
                Pred::Filled | Pred::Empty => (Some(Property::Fillable), "fillable"),
                Pred::Soaked => (Some(Property::Soakable), "soakable"),
                Pred::InSource => (Some(Property::ParticleApplier), "a particle applier"),
                _ => (None, ""),
            };
            if let (Some(req), Some(os)) = (required, obj_syn.as_deref()) {
                if !kb.has_property(os, req) {
                    ctx.error(
                        "inapplicable-predicate",
                        loc.into(),
                        format!("{pred} inapplicable: `{os}` is not {what}"),
                    );
                }
            }
            // Soaked is liquid-only; Filled/Empty also take pourable powders
            // (the corpus fills sacks with flour and sugar)
            if pred == Pred::Soaked {
                if let Some(ss) = sub_syn.as_deref() {
                    if !kb.has_property(ss, Property::Liquid) {
                        ctx.error(
                            "inapplicable-predicate",
                            loc.into(),
                            format!("{pred} inapplicable: `{ss}` is not a liquid"),
                        );
                    }
                }
            }
            if matches!(pred, Pred::Filled | Pred::Empty) {
                if let Some(ss) = sub_syn.as_deref() {
                    if kb.has_property(ss, Property::VisualSubstance) {
                        ctx.error(
                            "inapplicable-predicate",
                            loc.into(),
                            format!("{pred} inapplicable: `{ss}` is a visual substance"),
                        );
                    }
                }
            }
        }
        Pred::Boiled => {
            if let Some(s) = synsets[0].as_deref() {
                if !kb.has_property(s, Property::Liquid) {
                    ctx.error(
                        "inapplicable-predicate",
                        loc.into(),
                        format!("Boiled inapplicable: `{s}` is not a liquid"),
                    );
                }
            }
        }
        Pred::OnTopOf | Pred::InsideOf | Pred::OnFloor => {
            if is_substance(&synsets[0]) {
                ctx.warn(
                    "substance-kinematic",
                    loc.into(),
                    format!("{pred} over substance `{}` uses particle semantics", raw_args[0]),
                );
            }
            if is_substance(&synsets[1]) {
                ctx.error(
                    "inapplicable-predicate",
                    loc.into(),
                    format!("{pred} reference argument must be an object"),
                );
            }
        }
        Pred::NextTo
        | Pred::Under
        | Pred::InContactWith
        | Pred::ConnectedWith
        | Pred::Hung
        | Pred::Blended
        | Pred::InReachOfAgent
        | Pred::InSameRoomAsAgent
        | Pred::InFoVOfAgent
        | Pred::InHandOfAgent => {
            for (i, s) in synsets.iter().enumerate() {
                if is_substance(s) {
                    ctx.error(
                        "inapplicable-predicate",
                        loc.into(),
                        format!("{pred} argument {} must be an object, got substance", i + 1),
                    );
                }
            }
        }
        Pred::InRoom => {
            let room = &raw_args[1];
            if !kb.room_types().contains(room) {
                ctx.error(
                    "unknown-room-type",
                    loc.into(),
                    format!("room type `{room}` is not in the scene schema"),
                );
            }
        }
        Pred::Real | Pred::Future => {}
        _ => {
            // unary state predicates gated on a property
            let required = match pred {
                Pred::Cooked | Pred::Burnt => Some(Property::Cookable),
                Pred::Frozen => Some(Property::Freezable),
                Pred::Heated => Some(Property::Heatable),
                Pred::OnFire => Some(Property::Flammable),
                Pred::ToggledOn => Some(Property::Toggleable),
                Pred::Sliced => Some(Property::Sliceable),
                Pred::Broken => Some(Property::Breakable),
                Pred::Open | Pred::Closed => Some(Property::Openable),
                Pred::Folded => Some(Property::Foldable),
                Pred::Unfolded => Some(Property::Unfoldable),
                Pred::Assembled => Some(Property::Assembleable),
                _ => None,
            };
            if let (Some(req), Some(s)) = (required, synsets[0].as_deref()) {
                if !kb.has_property(s, req) {
                    ctx.error(
                        "inapplicable-predicate",
                        loc.into(),
                        format!("{pred} inapplicable: `{s}` lacks `{req:?}`"),
                    );
                }
            }
            if is_substance(&synsets[0]) {
                ctx.error(
                    "inapplicable-predicate",
                    loc.into(),
                    format!("{pred} subject must be an object"),
                );
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Canonical argument order
// ---------------------------------------------------------------------------

/// Rewrite mixed-order (substance, object) arguments of Filled/Empty/Covered/
/// Soaked/InSource into the canonical (object, substance) order, and bare
/// synset references to their unique declared instance, throughout init and
/// goal. The corpus writes both argument orders; downstream code only sees
/// the canonical form.
pub fn canonicalize_args(def: &ActivityDefinition, kb: &KnowledgeBase) -> ActivityDefinition {
    let mut out = def.clone();
    for lit in &mut out.init {
        for (idx, arg) in lit.args.iter_mut().enumerate() {
            if lit.pred == Pred::InRoom && idx == 1 {
                continue;
            }
            if !def.objects.iter().any(|(id, _)| id == arg) {
                if let Some(unique) = resolve_bare_synset(def, arg) {
                    *arg = unique.to_string();
                }
            }
        }
        if needs_swap(kb, lit.pred, &synset_pair(def, &lit.args)) {
            lit.args.swap(0, 1);
        }
    }
    let mut binders = Vec::new();
    out.goal = canonicalize_formula(def, kb, &def.goal, &mut binders);
    out
}

fn synset_pair(def: &ActivityDefinition, args: &[String]) -> Vec<Option<String>> {
    args.iter().map(|a| def.synset_of(a).map(str::to_string)).collect()
}

fn needs_swap(kb: &KnowledgeBase, pred: Pred, synsets: &[Option<String>]) -> bool {
    if !matches!(pred, Pred::Filled | Pred::Empty | Pred::Covered | Pred::Soaked | Pred::InSource) {
        return false;
    }
    if synsets.len() != 2 {
        return false;
    }
    let sub = |s: &Option<String>| s.as_deref().map(|s| kb.is_substance(s)).unwrap_or(false);
    sub(&synsets[0]) && !sub(&synsets[1])
}

fn canonicalize_formula(
    def: &ActivityDefinition,
    kb: &KnowledgeBase,
    f: &Formula,
    binders: &mut Vec<(String, String)>,
) -> Formula {
    match f {
        Formula::Atom(atom) => {
            let mut atom = atom.clone();
            for term in &mut atom.args {
                if let Term::Instance(id) = term {
                    if !def.objects.iter().any(|(oid, _)| oid == id) {
                        if let Some(unique) = resolve_bare_synset(def, id) {
                            *term = Term::Instance(unique.to_string());
                        }
                    }
                }
            }
            let synsets: Vec<Option<String>> = atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Symbol(_) => None,
                    Term::Variable(v) => {
                        binders.iter().rev().find(|(var, _)| var == v).map(|(_, s)| s.clone())
                    }
                    Term::Instance(id) => def.synset_of(id).map(str::to_string),
                })
                .collect();
            if needs_swap(kb, atom.pred, &synsets) {
                atom.args.swap(0, 1);
            }
            Formula::Atom(atom)
        }
        Formula::Not(inner) => {
            Formula::Not(Box::new(canonicalize_formula(def, kb, inner, binders)))
        }
        Formula::And(cs) => Formula::And(
            cs.iter().map(|c| canonicalize_formula(def, kb, c, binders)).collect(),
        ),
        Formula::Or(cs) => {
            Formula::Or(cs.iter().map(|c| canonicalize_formula(def, kb, c, binders)).collect())
        }
        Formula::Imply(a, b) => Formula::Imply(
            Box::new(canonicalize_formula(def, kb, a, binders)),
            Box::new(canonicalize_formula(def, kb, b, binders)),
        ),
        Formula::Forall(b, body) => {
            binders.push((b.var.clone(), b.synset.clone()));
            let body = canonicalize_formula(def, kb, body, binders);
            binders.pop();
            Formula::Forall(b.clone(), Box::new(body))
        }
        Formula::Exists(b, body) => {
            binders.push((b.var.clone(), b.synset.clone()));
            let body = canonicalize_formula(def, kb, body, binders);
            binders.pop();
            Formula::Exists(b.clone(), Box::new(body))
        }
        Formula::ForNPairs { n, first, second, body } => {
            binders.push((first.var.clone(), first.synset.clone()));
            binders.push((second.var.clone(), second.synset.clone()));
            let body = canonicalize_formula(def, kb, body, binders);
            binders.pop();
            binders.pop();
            Formula::ForNPairs {
                n: *n,
                first: first.clone(),
                second: second.clone(),
                body: Box::new(body),
            }
        }
    }
}

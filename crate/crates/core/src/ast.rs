//! Parsed activity definitions: typed object declarations, initial literals,
//! and the goal formula, plus normalization and the BDDL serializer.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Canonical predicate names. Surface spellings from activity definitions are
/// mapped here through [`Pred::from_surface`]; unknown spellings are rejected
/// at parse time so nothing passes through silently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pred {
    OnTopOf,
    InsideOf,
    NextTo,
    Under,
    OnFloor,
    InContactWith,
    ConnectedWith,
    Hung,
    Blended,
    Assembled,
    Open,
    Closed,
    Cooked,
    Burnt,
    OnFire,
    Frozen,
    Heated,
    Boiled,
    Soaked,
    Filled,
    Empty,
    Covered,
    Folded,
    Unfolded,
    ToggledOn,
    Sliced,
    Broken,
    InReachOfAgent,
    InSameRoomAsAgent,
    InFoVOfAgent,
    InHandOfAgent,
    Real,
    Future,
    InRoom,
    InSource,
}

impl Pred {
    pub const ALL: [Pred; 35] = [
        Pred::OnTopOf,
        Pred::InsideOf,
        Pred::NextTo,
        Pred::Under,
        Pred::OnFloor,
        Pred::InContactWith,
        Pred::ConnectedWith,
        Pred::Hung,
        Pred::Blended,
        Pred::Assembled,
        Pred::Open,
        Pred::Closed,
        Pred::Cooked,
        Pred::Burnt,
        Pred::OnFire,
        Pred::Frozen,
        Pred::Heated,
        Pred::Boiled,
        Pred::Soaked,
        Pred::Filled,
        Pred::Empty,
        Pred::Covered,
        Pred::Folded,
        Pred::Unfolded,
        Pred::ToggledOn,
        Pred::Sliced,
        Pred::Broken,
        Pred::InReachOfAgent,
        Pred::InSameRoomAsAgent,
        Pred::InFoVOfAgent,
        Pred::InHandOfAgent,
        Pred::Real,
        Pred::Future,
        Pred::InRoom,
        Pred::InSource,
    ];

    pub fn from_surface(name: &str) -> Option<Pred> {
        Some(match name.to_ascii_lowercase().as_str() {
            "ontop" | "ontopof" | "on_top_of" => Pred::OnTopOf,
            "inside" | "insideof" | "inside_of" => Pred::InsideOf,
            "nextto" | "next_to" => Pred::NextTo,
            "under" => Pred::Under,
            "onfloor" | "on_floor" => Pred::OnFloor,
            "touching" | "incontact" | "in_contact_with" => Pred::InContactWith,
            "attached" | "connected" | "connected_with" => Pred::ConnectedWith,
            "hung" => Pred::Hung,
            "blended" => Pred::Blended,
            "assembled" => Pred::Assembled,
            "open" => Pred::Open,
            "closed" => Pred::Closed,
            "cooked" => Pred::Cooked,
            "burnt" => Pred::Burnt,
            "onfire" | "on_fire" => Pred::OnFire,
            "frozen" => Pred::Frozen,
            "heated" => Pred::Heated,
            "boiled" => Pred::Boiled,
            "soaked" => Pred::Soaked,
            "filled" => Pred::Filled,
            "empty" => Pred::Empty,
            "covered" => Pred::Covered,
            "folded" => Pred::Folded,
            "unfolded" => Pred::Unfolded,
            "toggled_on" | "toggledon" => Pred::ToggledOn,
            "sliced" => Pred::Sliced,
            "broken" => Pred::Broken,
            "inreachofagent" | "in_reach_of_agent" => Pred::InReachOfAgent,
            "insameroomasagent" | "in_same_room_as_agent" => Pred::InSameRoomAsAgent,
            "infovofagent" | "in_fov_of_agent" => Pred::InFoVOfAgent,
            "inhandofagent" | "in_hand_of_agent" => Pred::InHandOfAgent,
            "real" => Pred::Real,
            "future" => Pred::Future,
            "inroom" => Pred::InRoom,
            "insource" => Pred::InSource,
            _ => return None,
        })
    }

    /// Surface spelling emitted by the serializer (the dialect of the
    /// activity-definition corpus).
    pub fn surface(self) -> &'static str {
        match self {
            Pred::OnTopOf => "ontop",
            Pred::InsideOf => "inside",
            Pred::NextTo => "nextto",
            Pred::Under => "under",
            Pred::OnFloor => "onfloor",
            Pred::InContactWith => "touching",
            Pred::ConnectedWith => "attached",
            Pred::Hung => "hung",
            Pred::Blended => "blended",
            Pred::Assembled => "assembled",
            Pred::Open => "open",
            Pred::Closed => "closed",
            Pred::Cooked => "cooked",
            Pred::Burnt => "burnt",
            Pred::OnFire => "onfire",
            Pred::Frozen => "frozen",
            Pred::Heated => "heated",
            Pred::Boiled => "boiled",
            Pred::Soaked => "soaked",
            Pred::Filled => "filled",
            Pred::Empty => "empty",
            Pred::Covered => "covered",
            Pred::Folded => "folded",
            Pred::Unfolded => "unfolded",
            Pred::ToggledOn => "toggled_on",
            Pred::Sliced => "sliced",
            Pred::Broken => "broken",
            Pred::InReachOfAgent => "inreachofagent",
            Pred::InSameRoomAsAgent => "insameroomasagent",
            Pred::InFoVOfAgent => "infovofagent",
            Pred::InHandOfAgent => "inhandofagent",
            Pred::Real => "real",
            Pred::Future => "future",
            Pred::InRoom => "inroom",
            Pred::InSource => "insource",
        }
    }

    /// The other member of a three-valued pair, if this predicate has one.
    pub fn complement(self) -> Option<Pred> {
        Some(match self {
            Pred::Filled => Pred::Empty,
            Pred::Empty => Pred::Filled,
            Pred::Open => Pred::Closed,
            Pred::Closed => Pred::Open,
            Pred::Folded => Pred::Unfolded,
            Pred::Unfolded => Pred::Folded,
            _ => return None,
        })
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// An argument position in a formula atom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    /// Ground instance id, e.g. `rag.n.01_1`.
    Instance(String),
    /// Quantified variable, e.g. `sugar_cookie.n.01` from `?sugar_cookie.n.01`.
    Variable(String),
    /// Bare symbol for non-instance arguments (room types in `inroom`).
    Symbol(String),
}

impl Term {
    pub fn text(&self) -> &str {
        match self {
            Term::Instance(s) | Term::Variable(s) | Term::Symbol(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub pred: Pred,
    pub args: Vec<Term>,
}

/// Variable binder of a quantifier: `(?rag.n.01 - rag.n.01)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binder {
    pub var: String,
    pub synset: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Imply(Box<Formula>, Box<Formula>),
    Forall(Binder, Box<Formula>),
    Exists(Binder, Box<Formula>),
    ForNPairs { n: u32, first: Binder, second: Binder, body: Box<Formula> },
}

pub type Polarity = bool;

/// A ground literal from an `:init` section (or a fully-ground goal leaf).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundLiteral {
    pub pred: Pred,
    pub args: Vec<String>,
    pub polarity: Polarity,
}

impl GroundLiteral {
    pub fn positive(pred: Pred, args: Vec<String>) -> Self {
        GroundLiteral { pred, args, polarity: true }
    }
}

impl fmt::Display for GroundLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.polarity {
            write!(f, "(not ")?;
        }
        write!(f, "({}", self.pred.surface())?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")?;
        if !self.polarity {
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// A parsed BDDL problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityDefinition {
    pub problem_name: String,
    pub domain_name: String,
    /// Declared instances in declaration order: (instance id, synset id).
    pub objects: Vec<(String, String)>,
    pub init: Vec<GroundLiteral>,
    pub goal: Formula,
}

/// Strip the trailing `_<n>` instance counter: `rag.n.01_1` -> `rag.n.01`.
/// Returns None when the id has no such suffix.
pub fn synset_of_instance(id: &str) -> Option<&str> {
    let (prefix, suffix) = id.rsplit_once('_')?;
    if prefix.is_empty() || suffix.is_empty() || !suffix.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    // counter must be a positive integer
    if suffix.bytes().all(|b| b == b'0') {
        return None;
    }
    Some(prefix)
}

pub fn is_instance_id(s: &str) -> bool {
    synset_of_instance(s).is_some()
}

impl ActivityDefinition {
    pub fn synset_of<'a>(&'a self, instance: &'a str) -> Option<&'a str> {
        self.objects
            .iter()
            .find(|(id, _)| id == instance)
            .map(|(_, syn)| syn.as_str())
            .or_else(|| synset_of_instance(instance))
    }

    /// Instances named by `future` init literals.
    pub fn future_instances(&self) -> Vec<&str> {
        self.init
            .iter()
            .filter(|l| l.pred == Pred::Future && l.polarity)
            .filter_map(|l| l.args.first().map(|s| s.as_str()))
            .collect()
    }

    /// The definition with its goal normalized and init literals rewritten
    /// through the three-valued complements.
    pub fn normalized(&self) -> ActivityDefinition {
        let mut def = self.clone();
        def.goal = normalize(&self.goal);
        def.init = self
            .init
            .iter()
            .map(|l| {
                if !l.polarity {
                    if let Some(c) = l.pred.complement() {
                        return GroundLiteral::positive(c, l.args.clone());
                    }
                }
                l.clone()
            })
            .collect();
        def
    }
}

/// Push negations down to atoms (De Morgan + quantifier duality), eliminate
/// `imply`, and rewrite negated three-valued atoms to their positive
/// complements. `not` over `for_n_pairs` cannot be pushed further and is left
/// wrapping the node.
pub fn normalize(f: &Formula) -> Formula {
    norm(f, true)
}

fn norm(f: &Formula, positive: bool) -> Formula {
    match f {
        Formula::Atom(a) => {
            if positive {
                Formula::Atom(a.clone())
            } else if let Some(c) = a.pred.complement() {
                Formula::Atom(Atom { pred: c, args: a.args.clone() })
            } else {
                Formula::Not(Box::new(Formula::Atom(a.clone())))
            }
        }
        Formula::Not(inner) => norm(inner, !positive),
        Formula::And(cs) => {
            let children = cs.iter().map(|c| norm(c, positive)).collect();
            if positive {
                Formula::And(children)
            } else {
                Formula::Or(children)
            }
        }
        Formula::Or(cs) => {
            let children = cs.iter().map(|c| norm(c, positive)).collect();
            if positive {
                Formula::Or(children)
            } else {
                Formula::And(children)
            }
        }
        Formula::Imply(a, b) => {
            if positive {
                Formula::Or(vec![norm(a, false), norm(b, true)])
            } else {
                Formula::And(vec![norm(a, true), norm(b, false)])
            }
        }
        Formula::Forall(b, body) => {
            if positive {
                Formula::Forall(b.clone(), Box::new(norm(body, true)))
            } else {
                Formula::Exists(b.clone(), Box::new(norm(body, false)))
            }
        }
        Formula::Exists(b, body) => {
            if positive {
                Formula::Exists(b.clone(), Box::new(norm(body, true)))
            } else {
                Formula::Forall(b.clone(), Box::new(norm(body, false)))
            }
        }
        Formula::ForNPairs { n, first, second, body } => {
            let node = Formula::ForNPairs {
                n: *n,
                first: first.clone(),
                second: second.clone(),
                body: Box::new(norm(body, true)),
            };
            if positive {
                node
            } else {
                Formula::Not(Box::new(node))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Serializer
// ---------------------------------------------------------------------------

/// Emit the problem back out as BDDL text in the corpus dialect. The result
/// reparses to a structurally identical definition.
pub fn serialize(def: &ActivityDefinition) -> String {
    let mut out = String::new();
    out.push_str(&format!("(define (problem {})\n", def.problem_name));
    out.push_str(&format!("    (:domain {})\n\n", def.domain_name));
    out.push_str("    (:objects\n");
    // group consecutive declarations of the same synset, like the corpus does
    let mut i = 0;
    while i < def.objects.len() {
        let synset = &def.objects[i].1;
        let mut ids = Vec::new();
        while i < def.objects.len() && def.objects[i].1 == *synset {
            ids.push(def.objects[i].0.as_str());
            i += 1;
        }
        out.push_str(&format!("        {} - {}\n", ids.join(" "), synset));
    }
    out.push_str("    )\n\n");
    out.push_str("    (:init\n");
    for lit in &def.init {
        out.push_str(&format!("        {lit}\n"));
    }
    out.push_str("    )\n\n");
    out.push_str("    (:goal\n");
    write_formula(&mut out, &def.goal, 2, true);
    out.push_str("    )\n)\n");
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn term_text(t: &Term, goal: bool) -> String {
    match t {
        Term::Instance(s) => {
            if goal {
                format!("?{s}")
            } else {
                s.clone()
            }
        }
        Term::Variable(s) => format!("?{s}"),
        Term::Symbol(s) => s.clone(),
    }
}

fn write_formula(out: &mut String, f: &Formula, depth: usize, goal: bool) {
    indent(out, depth);
    match f {
        Formula::Atom(a) => {
            out.push('(');
            out.push_str(a.pred.surface());
            for t in &a.args {
                out.push(' ');
                out.push_str(&term_text(t, goal));
            }
            out.push_str(")\n");
        }
        Formula::Not(inner) => {
            out.push_str("(not\n");
            write_formula(out, inner, depth + 1, goal);
            indent(out, depth);
            out.push_str(")\n");
        }
        Formula::And(cs) | Formula::Or(cs) => {
            out.push_str(if matches!(f, Formula::And(_)) { "(and\n" } else { "(or\n" });
            for c in cs {
                write_formula(out, c, depth + 1, goal);
            }
            indent(out, depth);
            out.push_str(")\n");
        }
        Formula::Imply(a, b) => {
            out.push_str("(imply\n");
            write_formula(out, a, depth + 1, goal);
            write_formula(out, b, depth + 1, goal);
            indent(out, depth);
            out.push_str(")\n");
        }
        Formula::Forall(b, body) | Formula::Exists(b, body) => {
            out.push_str(if matches!(f, Formula::Forall(..)) { "(forall\n" } else { "(exists\n" });
            indent(out, depth + 1);
            out.push_str(&format!("(?{} - {})\n", b.var, b.synset));
            write_formula(out, body, depth + 1, goal);
            indent(out, depth);
            out.push_str(")\n");
        }
        Formula::ForNPairs { n, first, second, body } => {
            out.push_str("(for_n_pairs\n");
            indent(out, depth + 1);
            out.push_str(&format!("({n})\n"));
            indent(out, depth + 1);
            out.push_str(&format!("(?{} - {})\n", first.var, first.synset));
            indent(out, depth + 1);
            out.push_str(&format!("(?{} - {})\n", second.var, second.synset));
            write_formula(out, body, depth + 1, goal);
            indent(out, depth);
            out.push_str(")\n");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(pred: Pred, args: &[&str]) -> Formula {
        Formula::Atom(Atom {
            pred,
            args: args.iter().map(|s| Term::Instance(s.to_string())).collect(),
        })
    }

    #[test]
    fn de_morgan_over_and() {
        let f = Formula::Not(Box::new(Formula::And(vec![
            atom(Pred::Cooked, &["a_1"]),
            atom(Pred::Sliced, &["b_1"]),
        ])));
        let n = normalize(&f);
        match n {
            Formula::Or(cs) => {
                assert!(matches!(&cs[0], Formula::Not(inner) if matches!(**inner, Formula::Atom(_))));
                assert!(matches!(&cs[1], Formula::Not(_)));
            }
            other => panic!("expected or, got {other:?}"),
        }
    }

    #[test]
    fn negated_filled_becomes_empty() {
        let f = Formula::Not(Box::new(atom(Pred::Filled, &["bottle.n.01_1", "water.n.06_1"])));
        assert_eq!(normalize(&f), atom(Pred::Empty, &["bottle.n.01_1", "water.n.06_1"]));
    }

    #[test]
    fn quantifier_duality_with_rewrite_inside() {
        let b = Binder { var: "x".into(), synset: "door.n.01".into() };
        let f = Formula::Not(Box::new(Formula::Forall(
            b.clone(),
            Box::new(Formula::Atom(Atom {
                pred: Pred::Open,
                args: vec![Term::Variable("x".into())],
            })),
        )));
        match normalize(&f) {
            Formula::Exists(bb, body) => {
                assert_eq!(bb, b);
                assert!(matches!(*body, Formula::Atom(Atom { pred: Pred::Closed, .. })));
            }
            other => panic!("expected exists, got {other:?}"),
        }
    }

    #[test]
    fn normalize_is_idempotent_on_imply() {
        let f = Formula::Imply(
            Box::new(atom(Pred::Cooked, &["a_1"])),
            Box::new(atom(Pred::Burnt, &["a_1"])),
        );
        let once = normalize(&f);
        assert_eq!(normalize(&once), once);
    }

    #[test]
    fn instance_id_parsing() {
        assert_eq!(synset_of_instance("rag.n.01_1"), Some("rag.n.01"));
        assert_eq!(synset_of_instance("flour__sack.n.01_12"), Some("flour__sack.n.01"));
        assert_eq!(synset_of_instance("rag.n.01"), None);
        assert_eq!(synset_of_instance("rag.n.01_0"), None);
        assert_eq!(synset_of_instance("kitchen"), None);
    }
}

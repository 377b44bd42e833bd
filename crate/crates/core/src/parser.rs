//! BDDL problem parser: s-expressions -> [`ActivityDefinition`].

use crate::ast::{
    is_instance_id, synset_of_instance, ActivityDefinition, Atom, Binder, Formula, GroundLiteral,
    Pred, Term,
};
use crate::sexp::{self, Pos, Sexp};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error: {0}")]
    Syntax(#[from] sexp::SexpError),
    #[error("{pos}: expected {expected}")]
    Expected { pos: Pos, expected: String },
    #[error("{pos}: unknown section `{name}`")]
    UnknownSection { pos: Pos, name: String },
    #[error("{pos}: duplicate section `{name}`")]
    DuplicateSection { pos: Pos, name: String },
    #[error("{pos}: missing section `{name}`")]
    MissingSection { pos: Pos, name: String },
    #[error("{pos}: duplicate instance id `{id}`")]
    DuplicateInstance { pos: Pos, id: String },
    #[error("{pos}: malformed instance id `{id}`: {reason}")]
    MalformedInstance { pos: Pos, id: String, reason: String },
    #[error("{pos}: unknown predicate `{name}`")]
    UnknownPredicate { pos: Pos, name: String },
    #[error("{pos}: init literals must be a flat conjunction of (possibly negated) atoms")]
    InitNotConjunctive { pos: Pos },
    #[error("{pos}: unbound variable `?{name}`")]
    UnboundVariable { pos: Pos, name: String },
    #[error("{pos}: for_n_pairs requires n >= 1")]
    BadPairCount { pos: Pos },
}

pub fn parse_problem(text: &str) -> Result<ActivityDefinition, ParseError> {
    let form = sexp::parse_one(text)?;
    let items = expect_list(&form, "(define ...)")?;
    let mut it = items.iter();
    expect_keyword(it.next(), form.pos(), "define")?;

    // (problem <name>)
    let problem = it.next().ok_or_else(|| missing(form.pos(), "(problem <name>)"))?;
    let pitems = expect_list(problem, "(problem <name>)")?;
    expect_keyword(pitems.first(), problem.pos(), "problem")?;
    let problem_name = pitems
        .get(1)
        .and_then(|s| s.as_atom())
        .ok_or_else(|| missing(problem.pos(), "problem name"))?
        .to_string();

    let mut domain_name = None;
    let mut objects: Option<Vec<(String, String)>> = None;
    let mut init: Option<Vec<GroundLiteral>> = None;
    let mut goal: Option<Formula> = None;

    for section in it {
        let sitems = expect_list(section, "(:section ...)")?;
        let head = sitems
            .first()
            .and_then(|s| s.as_atom())
            .ok_or_else(|| missing(section.pos(), "section keyword"))?;
        match head {
            ":domain" => {
                let name = sitems
                    .get(1)
                    .and_then(|s| s.as_atom())
                    .map(str::to_string)
                    .ok_or_else(|| missing(section.pos(), "domain name"))?;
                set_once(&mut domain_name, name, section.pos(), ":domain")?;
            }
            ":objects" => {
                set_once(&mut objects, parse_objects(&sitems[1..])?, section.pos(), ":objects")?;
            }
            ":init" => {
                set_once(&mut init, parse_init(&sitems[1..])?, section.pos(), ":init")?;
            }
            ":goal" => {
                let body =
                    sitems.get(1).ok_or_else(|| missing(section.pos(), "goal formula"))?;
                if sitems.len() > 2 {
                    return Err(ParseError::Expected {
                        pos: sitems[2].pos(),
                        expected: "a single goal formula".into(),
                    });
                }
                set_once(&mut goal, parse_formula(body, &mut Vec::new())?, section.pos(), ":goal")?;
            }
            other => {
                return Err(ParseError::UnknownSection {
                    pos: section.pos(),
                    name: other.to_string(),
                })
            }
        }
    }

    Ok(ActivityDefinition {
        problem_name,
        domain_name: domain_name
            .ok_or_else(|| ParseError::MissingSection { pos: form.pos(), name: ":domain".into() })?,
        objects: objects
            .ok_or_else(|| ParseError::MissingSection { pos: form.pos(), name: ":objects".into() })?,
        init: init
            .ok_or_else(|| ParseError::MissingSection { pos: form.pos(), name: ":init".into() })?,
        goal: goal
            .ok_or_else(|| ParseError::MissingSection { pos: form.pos(), name: ":goal".into() })?,
    })
}

fn set_once<T>(slot: &mut Option<T>, value: T, pos: Pos, name: &str) -> Result<(), ParseError> {
    if slot.is_some() {
        return Err(ParseError::DuplicateSection { pos, name: name.into() });
    }
    *slot = Some(value);
    Ok(())
}

fn missing(pos: Pos, what: &str) -> ParseError {
    ParseError::Expected { pos, expected: what.to_string() }
}

fn expect_list<'a>(s: &'a Sexp, what: &str) -> Result<&'a [Sexp], ParseError> {
    s.as_list().ok_or_else(|| missing(s.pos(), what))
}

fn expect_keyword(s: Option<&Sexp>, pos: Pos, kw: &str) -> Result<(), ParseError> {
    match s.and_then(|s| s.as_atom()) {
        Some(a) if a.eq_ignore_ascii_case(kw) => Ok(()),
        _ => Err(missing(s.map(|s| s.pos()).unwrap_or(pos), &format!("`{kw}`"))),
    }
}

/// `:objects` body: `id id ... - synset` groups.
fn parse_objects(items: &[Sexp]) -> Result<Vec<(String, String)>, ParseError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut pending: Vec<(&str, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let atom = items[i]
            .as_atom()
            .ok_or_else(|| missing(items[i].pos(), "instance id or `-`"))?;
        if atom == "-" {
            let synset = items
                .get(i + 1)
                .and_then(|s| s.as_atom())
                .ok_or_else(|| missing(items[i].pos(), "synset after `-`"))?;
            if pending.is_empty() {
                return Err(missing(items[i].pos(), "instance ids before `-`"));
            }
            for (id, pos) in pending.drain(..) {
                match synset_of_instance(id) {
                    None => {
                        return Err(ParseError::MalformedInstance {
                            pos,
                            id: id.into(),
                            reason: "expected `<synset>_<positive integer>`".into(),
                        })
                    }
                    Some(prefix) if prefix != synset => {
                        return Err(ParseError::MalformedInstance {
                            pos,
                            id: id.into(),
                            reason: format!("id prefix does not match declared synset `{synset}`"),
                        })
                    }
                    Some(_) => {}
                }
                if !seen.insert(id.to_string()) {
                    return Err(ParseError::DuplicateInstance { pos, id: id.into() });
                }
                out.push((id.to_string(), synset.to_string()));
            }
            i += 2;
        } else {
            pending.push((atom, items[i].pos()));
            i += 1;
        }
    }
    if let Some((id, pos)) = pending.first() {
        return Err(missing(*pos, &format!("`- <synset>` after `{id}`")));
    }
    Ok(out)
}

fn parse_init(items: &[Sexp]) -> Result<Vec<GroundLiteral>, ParseError> {
    items.iter().map(parse_init_literal).collect()
}

/// Parse a single (possibly negated) ground literal, e.g. for CLI queries.
pub fn parse_literal(text: &str) -> Result<GroundLiteral, ParseError> {
    let form = sexp::parse_one(text)?;
    parse_init_literal(&form)
}

fn parse_init_literal(s: &Sexp) -> Result<GroundLiteral, ParseError> {
    let items = expect_list(s, "init literal")?;
    let head = items
        .first()
        .and_then(|x| x.as_atom())
        .ok_or_else(|| missing(s.pos(), "predicate name"))?;
    if head.eq_ignore_ascii_case("not") {
        if items.len() != 2 {
            return Err(missing(s.pos(), "(not (<atom>))"));
        }
        let mut lit = parse_init_literal(&items[1])?;
        if !lit.polarity {
            return Err(ParseError::InitNotConjunctive { pos: s.pos() });
        }
        lit.polarity = false;
        return Ok(lit);
    }
    if matches!(
        head.to_ascii_lowercase().as_str(),
        "and" | "or" | "imply" | "forall" | "exists" | "for_n_pairs" | "fornpairs"
    ) {
        return Err(ParseError::InitNotConjunctive { pos: s.pos() });
    }
    let pred = Pred::from_surface(head)
        .ok_or_else(|| ParseError::UnknownPredicate { pos: s.pos(), name: head.into() })?;
    let args = items[1..]
        .iter()
        .map(|a| {
            a.as_atom()
                .map(|t| t.trim_start_matches('?').to_string())
                .ok_or_else(|| missing(a.pos(), "argument"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GroundLiteral { pred, args, polarity: true })
}

fn parse_binder(s: &Sexp) -> Result<Binder, ParseError> {
    let items = expect_list(s, "(?var - synset)")?;
    let (var, dash, synset) = match items {
        [v, d, t] => (v, d, t),
        _ => return Err(missing(s.pos(), "(?var - synset)")),
    };
    let var = var
        .as_atom()
        .filter(|a| a.starts_with('?'))
        .ok_or_else(|| missing(s.pos(), "?variable"))?;
    if dash.as_atom() != Some("-") {
        return Err(missing(dash.pos(), "`-`"));
    }
    let synset = synset.as_atom().ok_or_else(|| missing(synset.pos(), "synset"))?;
    Ok(Binder { var: var[1..].to_string(), synset: synset.to_string() })
}

fn parse_formula(s: &Sexp, scope: &mut Vec<String>) -> Result<Formula, ParseError> {
    let items = expect_list(s, "formula")?;
    let head = items
        .first()
        .and_then(|x| x.as_atom())
        .ok_or_else(|| missing(s.pos(), "connective or predicate"))?;
    match head.to_ascii_lowercase().as_str() {
        "and" | "or" => {
            let children = items[1..]
                .iter()
                .map(|c| parse_formula(c, scope))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(if head.eq_ignore_ascii_case("and") {
                Formula::And(children)
            } else {
                Formula::Or(children)
            })
        }
        "not" => {
            if items.len() != 2 {
                return Err(missing(s.pos(), "(not <formula>)"));
            }
            Ok(Formula::Not(Box::new(parse_formula(&items[1], scope)?)))
        }
        "imply" => {
            if items.len() != 3 {
                return Err(missing(s.pos(), "(imply <antecedent> <consequent>)"));
            }
            Ok(Formula::Imply(
                Box::new(parse_formula(&items[1], scope)?),
                Box::new(parse_formula(&items[2], scope)?),
            ))
        }
        "forall" | "exists" => {
            if items.len() != 3 {
                return Err(missing(s.pos(), "(forall (?var - synset) <body>)"));
            }
            let binder = parse_binder(&items[1])?;
            scope.push(binder.var.clone());
            let body = parse_formula(&items[2], scope)?;
            scope.pop();
            Ok(if head.eq_ignore_ascii_case("forall") {
                Formula::Forall(binder, Box::new(body))
            } else {
                Formula::Exists(binder, Box::new(body))
            })
        }
        "for_n_pairs" | "fornpairs" => {
            if items.len() != 5 {
                return Err(missing(
                    s.pos(),
                    "(for_n_pairs (n) (?var - synset) (?var - synset) <body>)",
                ));
            }
            let n = items[1]
                .as_list()
                .and_then(|l| l.first())
                .and_then(|a| a.as_atom())
                .and_then(|a| a.parse::<u32>().ok())
                .ok_or_else(|| missing(items[1].pos(), "(n)"))?;
            if n < 1 {
                return Err(ParseError::BadPairCount { pos: items[1].pos() });
            }
            let first = parse_binder(&items[2])?;
            let second = parse_binder(&items[3])?;
            scope.push(first.var.clone());
            scope.push(second.var.clone());
            let body = parse_formula(&items[4], scope)?;
            scope.pop();
            scope.pop();
            Ok(Formula::ForNPairs { n, first, second, body: Box::new(body) })
        }
        name => {
            let pred = Pred::from_surface(name)
                .ok_or_else(|| ParseError::UnknownPredicate { pos: s.pos(), name: name.into() })?;
            let mut args = Vec::new();
            for (idx, a) in items[1..].iter().enumerate() {
                let text = a.as_atom().ok_or_else(|| missing(a.pos(), "argument"))?;
                args.push(parse_term(pred, idx, text, a.pos(), scope)?);
            }
            Ok(Formula::Atom(Atom { pred, args }))
        }
    }
}

/// Goal terms: `?name` is a bound variable when `name` has no instance
/// counter, and a ground instance reference when it does (the corpus writes
/// goal-section instance ids with a `?` marker). `inroom`'s second argument is
/// a bare room-type symbol.
fn parse_term(
    pred: Pred,
    arg_index: usize,
    text: &str,
    pos: Pos,
    scope: &[String],
) -> Result<Term, ParseError> {
    if pred == Pred::InRoom && arg_index == 1 {
        return Ok(Term::Symbol(text.trim_start_matches('?').to_string()));
    }
    if let Some(name) = text.strip_prefix('?') {
        if is_instance_id(name) {
            return Ok(Term::Instance(name.to_string()));
        }
        if scope.iter().any(|v| v == name) {
            return Ok(Term::Variable(name.to_string()));
        }
        return Err(ParseError::UnboundVariable { pos, name: name.to_string() });
    }
    Ok(Term::Instance(text.to_string()))
}

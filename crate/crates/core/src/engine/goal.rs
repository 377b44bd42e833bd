//! Goal evaluation: recursive satisfaction plus the success score Q.
//!
//! Q is the fraction of satisfied leaf literals under the quantifier/
//! disjunct selection that maximizes (fully-satisfied, satisfied count,
//! -total). With that selection order, satisfied == (sat == tot) holds
//! structurally, so success ⇔ Q = 1.

use super::matching::BipartiteGraph;
use super::Grounding;
use crate::ast::{Atom, Formula, Term};
use crate::kb::KnowledgeBase;
use crate::predicates::{self, PredError};
use crate::world::WorldState;
use std::collections::BTreeMap;
use thiserror::Error;

/// Atom evaluations before exists/or scans turn greedy (stop at the first
/// fully satisfied candidate instead of scanning for the best).
const WORK_BUDGET: u64 = 10_000;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unbound variable `?{0}` (normalization bug)")]
    UnboundVariable(String),
    #[error(transparent)]
    Pred(#[from] PredError),
}

/// (satisfied leaves, total leaves) under the maximizing selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Score {
    pub sat: u64,
    pub tot: u64,
}

impl Score {
    fn full(&self) -> bool {
        self.sat == self.tot
    }

    fn add(self, o: Score) -> Score {
        Score { sat: self.sat + o.sat, tot: self.tot + o.tot }
    }

    /// Selection order for or/exists: fully satisfied first, then satisfied
    /// count, then fewer leaves.
    fn better_than(&self, o: &Score) -> bool {
        (self.full(), self.sat, std::cmp::Reverse(self.tot))
            > (o.full(), o.sat, std::cmp::Reverse(o.tot))
    }

    pub fn q(&self) -> f64 {
        if self.tot == 0 {
            1.0
        } else {
            self.sat as f64 / self.tot as f64
        }
    }
}

struct Eval<'a> {
    world: &'a WorldState,
    kb: &'a KnowledgeBase,
    grounding: &'a Grounding,
    env: BTreeMap<String, String>,
    work: u64,
}

/// Evaluate a normalized goal formula. Returns (satisfied, q_score).
pub fn evaluate_goal(
    world: &WorldState,
    kb: &KnowledgeBase,
    grounding: &Grounding,
    goal: &Formula,
) -> Result<(bool, f64), EvalError> {
    let mut eval = Eval { world, kb, grounding, env: BTreeMap::new(), work: 0 };
    let score = eval.score(goal)?;
    Ok((score.full(), score.q()))
}

impl Eval<'_> {
    /// Real-world candidates for a quantified synset: every real object whose
    /// synset sits at or under the bound synset; for substances, the synset
    /// itself when the definition declares an instance of it.
    fn domain(&self, synset: &str) -> Vec<String> {
        if self.kb.is_substance(synset) {
            let declared = self
                .grounding
                .substances
                .values()
                .any(|s| self.kb.is_descendant_or_equal(s, synset));
            if declared || self.world.system(synset).is_some() {
                return vec![synset.to_string()];
            }
            return Vec::new();
        }
        self.world
            .real_objects()
            .filter(|(_, o)| self.kb.is_descendant_or_equal(&o.synset, synset))
            .map(|(id, _)| id.clone())
            .collect()
    }

    fn term_value(&self, t: &Term) -> Result<String, EvalError> {
        match t {
            Term::Variable(v) => self
                .env
                .get(v)
                .cloned()
                .ok_or_else(|| EvalError::UnboundVariable(v.clone())),
            Term::Instance(id) => Ok(self.grounding.resolve(id)),
            Term::Symbol(s) => Ok(s.clone()),
        }
    }

    /// Atoms over not-yet-real objects are unsatisfied, not errors; `real`
    /// and `future` read the flag directly inside check().
    fn atom(&mut self, atom: &Atom) -> Result<bool, EvalError> {
        self.work += 1;
        let args: Vec<String> =
            atom.args.iter().map(|t| self.term_value(t)).collect::<Result<_, _>>()?;
        match predicates::check(self.world, self.kb, atom.pred, &args) {
            Ok(v) => Ok(v),
            Err(PredError::NotReal { .. }) => Ok(false),
            Err(e) => Err(e.into()),
        }
    }

    fn score(&mut self, f: &Formula) -> Result<Score, EvalError> {
        match f {
            Formula::Atom(a) => {
                let v = self.atom(a)?;
                Ok(Score { sat: v as u64, tot: 1 })
            }
            Formula::Not(inner) => match inner.as_ref() {
                Formula::Atom(a) => {
                    let v = self.atom(a)?;
                    Ok(Score { sat: !v as u64, tot: 1 })
                }
                // not over a non-atom (for_n_pairs): one composite leaf
                other => {
                    let v = self.satisfied(other)?;
                    Ok(Score { sat: !v as u64, tot: 1 })
                }
            },
            Formula::And(cs) => {
                let mut acc = Score { sat: 0, tot: 0 };
                for c in cs {
                    acc = acc.add(self.score(c)?);
                }
                Ok(acc)
            }
            Formula::Or(cs) => {
                if cs.is_empty() {
                    // an empty disjunction is unsatisfiable
                    return Ok(Score { sat: 0, tot: 1 });
                }
                let mut best: Option<Score> = None;
                for c in cs {
                    let s = self.score(c)?;
                    if best.map(|b| s.better_than(&b)).unwrap_or(true) {
                        best = Some(s);
                    }
                    // greedy past the work budget: a full disjunct suffices
                    if s.full() && self.work > WORK_BUDGET {
                        break;
                    }
                }
                Ok(best.unwrap())
            }
            Formula::Imply(a, b) => {
                // normalized goals have no imply, but evaluate it anyway
                let or = Formula::Or(vec![
                    Formula::Not(Box::new(a.as_ref().clone())),
                    b.as_ref().clone(),
                ]);
                self.score(&or)
            }
            Formula::Forall(b, body) => {
                let mut acc = Score { sat: 0, tot: 0 };
                for candidate in self.domain(&b.synset) {
                    let prev = self.env.insert(b.var.clone(), candidate);
                    let s = self.score(body)?;
                    restore(&mut self.env, &b.var, prev);
                    acc = acc.add(s);
                }
                Ok(acc)
            }
            Formula::Exists(b, body) => {
                let domain = self.domain(&b.synset);
                if domain.is_empty() {
                    return Ok(Score { sat: 0, tot: leaf_count(body) });
                }
                let mut best: Option<Score> = None;
                for candidate in domain {
                    let prev = self.env.insert(b.var.clone(), candidate);
                    let s = self.score(body)?;
                    restore(&mut self.env, &b.var, prev);
                    if best.map(|bst| s.better_than(&bst)).unwrap_or(true) {
                        best = Some(s);
                    }
                    if s.full() && self.work > WORK_BUDGET {
                        break;
                    }
                }
                Ok(best.unwrap())
            }
            Formula::ForNPairs { n, first, second, body } => {
                let m = self.pair_matching(first, second, body)? as u64;
                let leaves = leaf_count(body);
                Ok(Score {
                    sat: m.min(*n as u64) * leaves,
                    tot: *n as u64 * leaves,
                })
            }
        }
    }

    fn satisfied(&mut self, f: &Formula) -> Result<bool, EvalError> {
        Ok(self.score(f)?.full())
    }

    /// Size of the maximum disjoint-pair matching whose body holds.
    fn pair_matching(
        &mut self,
        first: &crate::ast::Binder,
        second: &crate::ast::Binder,
        body: &Formula,
    ) -> Result<usize, EvalError> {
        let left = self.domain(&first.synset);
        let right = self.domain(&second.synset);
        let mut g = BipartiteGraph::new(left.len(), right.len());
        for (i, a) in left.iter().enumerate() {
            for (j, b) in right.iter().enumerate() {
                if a == b {
                    continue;
                }
                let pa = self.env.insert(first.var.clone(), a.clone());
                let pb = self.env.insert(second.var.clone(), b.clone());
                let holds = self.satisfied(body)?;
                restore(&mut self.env, &second.var, pb);
                restore(&mut self.env, &first.var, pa);
                if holds {
                    g.add_edge(i, j);
                }
            }
        }
        Ok(g.max_matching())
    }
}

fn restore(env: &mut BTreeMap<String, String>, key: &str, prev: Option<String>) {
    match prev {
        Some(v) => {
            env.insert(key.to_string(), v);
        }
        None => {
            env.remove(key);
        }
    }
}

/// Static leaf count used for exists-over-empty-domain and for_n_pairs
/// totals; `or` counts its first disjunct.
pub fn leaf_count(f: &Formula) -> u64 {
    match f {
        Formula::Atom(_) | Formula::Not(_) => 1,
        Formula::And(cs) => cs.iter().map(leaf_count).sum(),
        Formula::Or(cs) => cs.first().map(leaf_count).unwrap_or(1),
        Formula::Imply(a, b) => leaf_count(a) + leaf_count(b),
        Formula::Forall(_, body) | Formula::Exists(_, body) => leaf_count(body),
        Formula::ForNPairs { n, body, .. } => *n as u64 * leaf_count(body),
    }
}

//! Mechanical repair of incorrect call sequences.
//!
//! Each violation kind has at most one recipe:
//!
//! | violation | action |
//! |---|---|
//! | predicate-unmet | insert the pack's producer snippet before the consuming call |
//! | order-incomplete | append the shortest completion at the end of the sequence |
//! | forbidden-event with a replacement | replace the call |
//! | constraint-failed with a fix | set the literal, or replace the call |
//!
//! Unknown events and order divergence have no recipe and are reported back as
//! unrepairable. A repair can expose new violations (a replacement class with
//! its own rules), so [`repair_sequence`] re-checks and re-plans for a bounded
//! number of rounds.

use std::collections::HashSet;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::analyzer::{check_sequence, Position, Violation, ViolationKind};
use crate::error::{Error, Result};
use crate::ruledsl::{ConstraintFix, RulePack};
use crate::seqmodel::{serialize_sequence, AnnotatedSequence, ApiCall, ArgValue, CallSequence, Dataset};

/// Rounds of check/plan/apply before giving up.
pub const MAX_ROUNDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairKind {
    InsertCalls,
    ReplaceCall,
    AppendCalls,
    SetLiteral,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Calls(CallSequence),
    Call(ApiCall),
    Literal { slot: usize, value: String },
}

impl Serialize for Payload {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Payload::Calls(seq) => s.serialize_str(&serialize_sequence(seq)),
            Payload::Call(c) => s.serialize_str(&c.token()),
            Payload::Literal { slot, value } => {
                let mut st = s.serialize_struct("Literal", 2)?;
                st.serialize_field("slot", slot)?;
                st.serialize_field("value", value)?;
                st.end()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RepairAction {
    pub kind: RepairKind,
    pub anchor: Position,
    pub payload: Payload,
    pub source_violation: Violation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RepairPlan {
    pub actions: Vec<RepairAction>,
    /// Violations with no recipe.
    pub unrepairable: Vec<Violation>,
}

/// Plans one round of repairs for `vs`, which should come from
/// `check_sequence(s, pack)`.
pub fn plan_repairs(s: &CallSequence, vs: &[Violation], pack: &RulePack) -> RepairPlan {
    let mut plan = RepairPlan::default();
    let mut supplied: HashSet<&str> = HashSet::new();

    for v in vs {
        let action = |kind, anchor, payload| RepairAction {
            kind,
            anchor,
            payload,
            source_violation: v.clone(),
        };
        let Some(rule) = pack.get(&v.rule_class) else {
            plan.unrepairable.push(v.clone());
            continue;
        };
        let at = match v.position {
            Position::Call(i) => Some(i),
            Position::End => None,
        };
        match v.kind {
            ViolationKind::PredicateUnmet => {
                let pred = v.predicate.as_deref().unwrap_or_default();
                // one producer in front of the earliest consumer serves the later ones too
                if supplied.contains(pred) {
                    continue;
                }
                match (pack.producer_for(pred, &v.rule_class), at) {
                    (Some(snippet), Some(i)) => {
                        supplied.insert(pred);
                        plan.actions.push(action(
                            RepairKind::InsertCalls,
                            Position::Call(i),
                            Payload::Calls(CallSequence::new(snippet.calls.clone())),
                        ));
                    }
                    _ => plan.unrepairable.push(v.clone()),
                }
            }
            ViolationKind::OrderIncomplete => {
                let aliases = v.missing_aliases.as_deref().unwrap_or_default();
                let methods: Option<Vec<&str>> = aliases
                    .iter()
                    .map(|a| rule.events.iter().find(|e| &e.alias == a).map(|e| e.method.as_str()))
                    .collect();
                match methods {
                    Some(methods) if !methods.is_empty() => {
                        // spell the class the way the sequence does
                        let class = s
                            .calls
                            .iter()
                            .rev()
                            .find(|c| c.simple_class() == rule.class_name)
                            .map_or(rule.class_name.as_str(), |c| c.class_name());
                        let calls = methods
                            .iter()
                            .map(|m| ApiCall::new(class, *m).expect("rule names are identifiers"))
                            .collect();
                        plan.actions.push(action(
                            RepairKind::AppendCalls,
                            Position::End,
                            Payload::Calls(CallSequence::new(calls)),
                        ));
                    }
                    _ => plan.unrepairable.push(v.clone()),
                }
            }
            ViolationKind::ForbiddenEvent => {
                let replacement = at.zip(
                    s.calls
                        .get(at.unwrap_or(usize::MAX))
                        .and_then(|c| rule.forbidden_entry(c.method_name()))
                        .and_then(|f| f.replacement.as_deref()),
                );
                match replacement {
                    Some((i, token)) => plan.actions.push(action(
                        RepairKind::ReplaceCall,
                        Position::Call(i),
                        Payload::Call(ApiCall::parse(token).expect("validated when the rule was parsed")),
                    )),
                    None => plan.unrepairable.push(v.clone()),
                }
            }
            ViolationKind::ConstraintFailed => {
                let c = v.constraint.and_then(|k| rule.constraints.get(k));
                match (c.and_then(|c| c.fix.as_ref().map(|f| (c, f))), at) {
                    (Some((c, ConstraintFix::SetLiteral(value))), Some(i)) => plan.actions.push(action(
                        RepairKind::SetLiteral,
                        Position::Call(i),
                        Payload::Literal {
                            slot: c.position,
                            value: value.clone(),
                        },
                    )),
                    (Some((_, ConstraintFix::ReplaceCall(token))), Some(i)) => {
                        let mut call = ApiCall::parse(token).expect("validated when the rule was parsed");
                        call.set_args(s.calls[i].args().map(<[ArgValue]>::to_vec));
                        plan.actions
                            .push(action(RepairKind::ReplaceCall, Position::Call(i), Payload::Call(call)))
                    }
                    _ => plan.unrepairable.push(v.clone()),
                }
            }
            ViolationKind::UnknownEvent | ViolationKind::OrderDiverged => plan.unrepairable.push(v.clone()),
        }
    }
    plan
}

fn apply_rank(kind: RepairKind) -> u8 {
    // at one index, edit the call before inserting in front of it
    match kind {
        RepairKind::SetLiteral | RepairKind::ReplaceCall => 0,
        RepairKind::InsertCalls | RepairKind::AppendCalls => 1,
    }
}

/// Applies actions back to front so earlier anchors stay valid. Appends keep
/// their relative order.
pub fn apply_actions(s: &CallSequence, actions: &[RepairAction]) -> CallSequence {
    let mut out = s.clone();
    let appended: Vec<ApiCall> = actions
        .iter()
        .filter(|a| a.anchor == Position::End)
        .flat_map(|a| match &a.payload {
            Payload::Calls(seq) => seq.calls.clone(),
            Payload::Call(c) => vec![c.clone()],
            Payload::Literal { .. } => vec![],
        })
        .collect();
    out.calls.extend(appended);

    let mut indexed: Vec<(usize, &RepairAction)> = actions
        .iter()
        .filter_map(|a| match a.anchor {
            Position::Call(i) if i < s.calls.len() => Some((i, a)),
            _ => None,
        })
        .collect();
    indexed.sort_by_key(|(i, a)| (std::cmp::Reverse(*i), apply_rank(a.kind)));

    for (i, a) in indexed {
        match &a.payload {
            Payload::Calls(seq) => {
                out.calls.splice(i..i, seq.calls.iter().cloned());
            }
            Payload::Call(c) => out.calls[i] = c.clone(),
            Payload::Literal { slot, value } => {
                let args = out.calls[i].args_mut().get_or_insert_with(Vec::new);
                if args.len() <= *slot {
                    args.resize(*slot + 1, ArgValue::Opaque);
                }
                args[*slot] = ArgValue::Literal(value.clone());
            }
        }
    }
    out
}

/// Outcome of repairing one sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repaired {
    pub sequence: CallSequence,
    /// Every action applied, round by round.
    pub actions: Vec<RepairAction>,
    /// Violations still present that have no recipe.
    pub unrepairable: Vec<Violation>,
}

impl Repaired {
    pub fn is_clean(&self) -> bool {
        self.unrepairable.is_empty()
    }
}

/// Applies `actions` to `s`, then keeps checking and re-planning until the
/// sequence is clean or only unrepairable violations remain.
pub fn apply_repairs(s: &CallSequence, actions: &[RepairAction], pack: &RulePack) -> Result<Repaired> {
    let mut seq = apply_actions(s, actions);
    let mut applied = actions.to_vec();
    for _ in 1..MAX_ROUNDS {
        let vs = check_sequence(&seq, pack);
        let plan = plan_repairs(&seq, &vs, pack);
        if plan.actions.is_empty() {
            return Ok(Repaired {
                sequence: seq,
                actions: applied,
                unrepairable: plan.unrepairable,
            });
        }
        seq = apply_actions(&seq, &plan.actions);
        applied.extend(plan.actions);
    }
    let vs = check_sequence(&seq, pack);
    let plan = plan_repairs(&seq, &vs, pack);
    if plan.actions.is_empty() {
        Ok(Repaired {
            sequence: seq,
            actions: applied,
            unrepairable: plan.unrepairable,
        })
    } else {
        Err(Error::Convergence {
            remaining: plan.actions.iter().map(|a| a.source_violation.detail.clone()).collect(),
        })
    }
}

/// Check, plan and apply in one go.
pub fn repair_sequence(s: &CallSequence, pack: &RulePack) -> Result<Repaired> {
    let vs = check_sequence(s, pack);
    if vs.is_empty() {
        return Ok(Repaired {
            sequence: s.clone(),
            actions: vec![],
            unrepairable: vec![],
        });
    }
    let plan = plan_repairs(s, &vs, pack);
    apply_repairs(s, &plan.actions, pack)
}

/// A repaired dataset plus what happened to each entry.
#[derive(Debug, Clone)]
pub struct DatasetRepair {
    /// Entries that are clean after repair. Entries with unrepairable
    /// violations are left out.
    pub dataset: Dataset,
    pub log: Vec<(u64, RepairAction)>,
    pub dropped: Vec<(u64, Vec<Violation>)>,
}

pub fn repair_dataset(d: &Dataset, pack: &RulePack) -> Result<DatasetRepair> {
    let mut entries = Vec::new();
    let mut log = Vec::new();
    let mut dropped = Vec::new();
    for e in d.entries() {
        let r = repair_sequence(&e.sequence, pack)?;
        log.extend(r.actions.into_iter().map(|a| (e.id, a)));
        if r.unrepairable.is_empty() {
            let mut seq = r.sequence;
            seq.provenance = e.sequence.provenance.clone();
            entries.push(AnnotatedSequence {
                id: e.id,
                annotation: e.annotation.clone(),
                sequence: seq,
            });
        } else {
            dropped.push((e.id, r.unrepairable));
        }
    }
    Ok(DatasetRepair {
        dataset: Dataset::new(d.name.clone(), entries)?,
        log,
        dropped,
    })
}

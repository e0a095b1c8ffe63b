//! Reports, witnesses, verdicts and search budgets.

use crate::bits::{to_numbers, ItemMask};
use serde::Serialize;
use std::fmt;

pub const SCHEMA: &str = "rlcm-ident/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Satisfied,
    Violated,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ConditionId {
    #[serde(rename = "separability")]
    Separability,
    #[serde(rename = "classification")]
    Classification,
    #[serde(rename = "S-differentiable")]
    SDifferentiable,
    C1,
    C2,
    #[serde(rename = "C1*")]
    C1Star,
    #[serde(rename = "C2*")]
    C2Star,
    #[serde(rename = "C3/C4")]
    C3C4,
    #[serde(rename = "C3*/C4*")]
    C3C4Star,
    #[serde(rename = "C5/C6")]
    C5C6,
    #[serde(rename = "C1'/C2'")]
    CompleteQ,
    E1,
    E2,
    #[serde(rename = "Thm2-case")]
    Thm2Case,
    #[serde(rename = "Thm3")]
    Thm3,
    #[serde(rename = "Thm6")]
    Thm6,
    #[serde(rename = "Thm8-case")]
    Thm8Case,
    #[serde(rename = "S-adjustment")]
    Adjustment,
    #[serde(rename = "categorical")]
    Categorical,
    #[serde(rename = "duality")]
    Duality,
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// Two item sets attached to an item, numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ItemSetPair {
    pub item: usize,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

impl ItemSetPair {
    pub fn new(item_index: usize, first: ItemMask, second: ItemMask) -> Self {
        ItemSetPair { item: item_index + 1, first: to_numbers(first), second: to_numbers(second) }
    }
}

/// A zero-to-one alteration of Γ at (item, profile), numbered from 1 / given as a bitstring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Flip {
    pub item: usize,
    pub profile: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Shrink {
    pub item: usize,
    pub attribute: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    None,
    Classification {
        basis: Vec<usize>,
        non_basis: Vec<usize>,
    },
    /// Per-item set pairs: (S¹, S²) for repeated measurement, (S⁺, S⁻) for differentiation.
    ItemPairs {
        pairs: Vec<ItemSetPair>,
    },
    Expansion {
        start: Vec<usize>,
        steps: Vec<Vec<usize>>,
        pairs: Vec<ItemSetPair>,
    },
    Blocks {
        s1: Vec<usize>,
        s2: Vec<usize>,
        flips1: Vec<Flip>,
        flips2: Vec<Flip>,
    },
    Matching {
        /// Item assigned to attribute k in the first copy (index k-1).
        s1: Vec<usize>,
        s2: Vec<usize>,
        leftover: Vec<usize>,
    },
    TwoItemBlock {
        attribute: usize,
        items: Vec<usize>,
        v1: Vec<u8>,
        v2: Vec<u8>,
        clauses: Vec<String>,
    },
    Shrinkage {
        s1: Vec<usize>,
        s2: Vec<usize>,
        shrunk: Vec<Shrink>,
        leftover: Vec<usize>,
    },
    Adjustment {
        adjusted: Vec<usize>,
    },
    Identity {
        rows: Vec<usize>,
    },
    Composite {
        reports: Vec<ConditionReport>,
    },
    Failure {
        item: Option<usize>,
        attribute: Option<usize>,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub id: ConditionId,
    pub status: Status,
    /// Violations backed by a theorem that rules out identifiability.
    pub definitive: bool,
    pub witness: Witness,
    pub budget_exhausted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ConditionReport {
    pub fn satisfied(id: ConditionId, witness: Witness) -> Self {
        ConditionReport { id, status: Status::Satisfied, definitive: false, witness, budget_exhausted: false, note: None }
    }

    pub fn violated(id: ConditionId, witness: Witness) -> Self {
        ConditionReport { id, status: Status::Violated, definitive: false, witness, budget_exhausted: false, note: None }
    }

    pub fn undetermined(id: ConditionId, witness: Witness) -> Self {
        ConditionReport { id, status: Status::Undetermined, definitive: false, witness, budget_exhausted: false, note: None }
    }

    pub fn exhausted(id: ConditionId) -> Self {
        let mut r = Self::undetermined(id, Witness::None);
        r.budget_exhausted = true;
        r.note = Some("search budget exhausted".into());
        r
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn definitive(mut self) -> Self {
        self.definitive = true;
        self
    }

    pub fn is_satisfied(&self) -> bool {
        self.status == Status::Satisfied
    }

    pub fn is_violated(&self) -> bool {
        self.status == Status::Violated
    }

    pub(crate) fn failure(id: ConditionId, item: Option<usize>, attribute: Option<usize>, reason: impl Into<String>) -> Self {
        Self::violated(id, Witness::Failure { item: item.map(|j| j + 1), attribute: attribute.map(|k| k + 1), reason: reason.into() })
    }
}

/// Caps on the combinatorial searches. Exceeding a cap yields an undetermined report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SearchBudget {
    pub max_subsets: u64,
    pub max_lattice: usize,
    pub max_flips_per_row: usize,
    pub max_adjustments: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_subsets: 1_000_000, max_lattice: 65_536, max_flips_per_row: 2, max_adjustments: 1024 }
    }
}

/// Node counter shared by one search.
#[derive(Debug)]
pub(crate) struct Counter {
    used: std::cell::Cell<u64>,
    cap: u64,
}

impl Counter {
    pub fn new(cap: u64) -> Self {
        Counter { used: std::cell::Cell::new(0), cap }
    }

    /// Counts one node; false once the cap is exceeded.
    pub fn tick(&self) -> bool {
        let used = self.used.get().saturating_add(1);
        self.used.set(used);
        used <= self.cap
    }

    pub fn exhausted(&self) -> bool {
        self.used.get() > self.cap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Level {
    Strict,
    PPartial,
    Generic,
    NotIdentifiable,
    Undetermined,
}

impl Level {
    pub fn exit_code(self) -> i32 {
        match self {
            Level::Strict | Level::PPartial | Level::Generic => 0,
            Level::NotIdentifiable => 2,
            Level::Undetermined => 3,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Level::Strict => "Strict",
            Level::PPartial => "PPartial",
            Level::Generic => "Generic",
            Level::NotIdentifiable => "NotIdentifiable",
            Level::Undetermined => "Undetermined",
        };
        f.write_str(s)
    }
}

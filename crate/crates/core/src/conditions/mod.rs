//! Identifiability conditions and the decision procedure.

mod decide;
mod generic;
mod lattice;
mod multi;
mod report;
mod twoparam;
mod verify;

pub use decide::{adjusted_items, decide, decide_with, DecideOptions, Verdict};
pub use generic::{check_c5_c6, check_mixed_e1, check_mixed_e2, check_thm8, verify_c5_c6, verify_e2};
pub use multi::{
    basis_latent_classes, check_c3_c4, check_c3star_c4star, check_generic_alteration, same_partial_order,
    verify_c3_c4, verify_c3_c4_star, verify_generic_alteration, Alteration,
};
pub use report::{
    ConditionId, ConditionReport, Flip, ItemSetPair, Level, SearchBudget, Shrink, Status, Witness, SCHEMA,
};
pub use twoparam::{
    check_c1, check_c1_star, check_c2, check_c2_star, check_complete_q_fastpath, check_thm2_fallback,
    check_thm3_necessity, check_thm3_necessity_q, classify_items, classify_items_q, is_s_differentiable,
    is_s_differentiable_q, ItemClassification, TwoItemBlock,
};
pub use verify::{
    replay, replay_trace, verify_classification, verify_differentiation, verify_expansion, verify_repeated, ReplayContext,
};

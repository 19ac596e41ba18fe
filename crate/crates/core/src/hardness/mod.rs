//! Keyed pseudorandom subsets, adversarial natures and conflict experiments.

mod experiments;
mod prf;

pub use experiments::{
    certify_rule, run_decision_conflict_experiment, run_loss_conflict_experiment, Baseline, BatteryEntry, ConflictReport, ControlReport,
    ExperimentConfig, ExperimentKind, GroupBound, KeyPolicy, LevelSetCheck, Regime, RuleCertificate, TrialReport, Verdict,
};
pub use prf::{
    fraction_tolerance, hash_groups, indistinguishability_probe, level_set_probes, nature_loss_conflict, nature_two_block, pr_subset,
    LossConflictTypes, PrfKey, ProbeResult, PseudorandomSubset,
};

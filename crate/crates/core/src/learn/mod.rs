//! Audit-and-update learners for multi-accuracy and multi-calibration, the
//! scalar and loss-family relaxations, and omniprediction post-processing.

mod oi;
mod omni;
mod scalar;

pub use oi::{learn_oi_loss_family, oi_gap, OiOutcome, OiRecord};
pub use omni::{canonical_partition, indicator_class, omnipredict, CanonicalPartition, Omniprediction};
pub use scalar::{encode_scalar, expectation_target, learn_scalar_calibrated, lift_scalar, loss_weighted_target, ScalarOutcome};

use serde::{Deserialize, Serialize};

use crate::domain::{Assignment, Discretization, Group, GroupCollection, Nature, Population, Predictor};
use crate::error::{Error, Result};
use crate::metrics::{ma_error, mc_cw_error, mc_full_error, AuditReport, Constraint, GapEntry, MaMode};
use crate::simplex::project_in_place;

/// Which audit the learner repairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnMode {
    MaCw,
    MaThreshold,
    McCw,
    McFull,
    ScalarMc,
}

/// Learner parameters. `eta` defaults to `alpha / 2`, the iteration cap to
/// `ceil(64 ln(k + 1) / alpha^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub alpha: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    pub mode: LearnMode,
    #[serde(default)]
    pub seed: u64,
}

impl LearnerConfig {
    pub fn new(mode: LearnMode, alpha: f64) -> Self {
        Self { alpha, lambda: None, eta: None, max_iterations: None, mode, seed: 0 }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = Some(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} not in (0,1)", self.alpha)));
        }
        if let Some(e) = self.eta {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Config(format!("eta {e} must be positive")));
            }
        }
        if self.max_iterations == Some(0) {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if matches!(self.mode, LearnMode::McCw | LearnMode::McFull | LearnMode::ScalarMc) {
            self.discretization()?;
        }
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(self.alpha / 2.0)
    }

    pub fn cap(&self, k: usize) -> usize {
        self.max_iterations
            .unwrap_or_else(|| (64.0 * ((k + 1) as f64).ln() / (self.alpha * self.alpha)).ceil() as usize)
    }

    pub fn discretization(&self) -> Result<Discretization> {
        let l = self.lambda.ok_or_else(|| Error::Config("calibration modes need lambda".into()))?;
        Discretization::new(l)
    }
}

/// One learner step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub constraint: Constraint,
    pub gap: f64,
    /// Coordinates moved and the signed amount added to each before projection.
    pub coords: Vec<usize>,
    pub delta: f64,
    pub updated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnTrace {
    pub mode: LearnMode,
    pub iterations: usize,
    pub records: Vec<TraceRecord>,
    pub final_gap: f64,
    pub converged: bool,
}

impl LearnTrace {
    /// One JSON object per line: each step, then a summary line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        let summary = serde_json::json!({
            "summary": {"mode": self.mode, "iterations": self.iterations, "final_gap": self.final_gap, "converged": self.converged}
        });
        out.push_str(&serde_json::to_string(&summary)?);
        out.push('\n');
        Ok(out)
    }
}

/// Successful learner result.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub predictor: Predictor,
    pub trace: LearnTrace,
    pub report: AuditReport,
}

/// Learner failure modes.
#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("iteration budget exhausted with gap {}", .0.trace.final_gap)]
    BudgetExhausted(Box<LearnOutcome>),
}

/// Exact audit table for the active mode.
pub fn audit_report<A: Assignment + ?Sized>(pop: &Population, nature: &Nature, pred: &A, c: &GroupCollection, cfg: &LearnerConfig) -> Result<AuditReport> {
    match cfg.mode {
        LearnMode::MaCw => ma_error(pop, nature, pred, c, MaMode::CoordinateWise),
        LearnMode::MaThreshold => ma_error(pop, nature, pred, c, MaMode::Threshold),
        LearnMode::McCw => mc_cw_error(pop, nature, pred, c, &cfg.discretization()?),
        LearnMode::McFull | LearnMode::ScalarMc => mc_full_error(pop, nature, pred, c, &cfg.discretization()?),
    }
}

/// The largest violation above `alpha`, ties broken by (group, slice, cell) order.
pub fn audit<A: Assignment + ?Sized>(pop: &Population, nature: &Nature, pred: &A, c: &GroupCollection, cfg: &LearnerConfig) -> Result<Option<GapEntry>> {
    Ok(audit_report(pop, nature, pred, c, cfg)?.violation(cfg.alpha).cloned())
}

/// Elements currently covered by a constraint.
pub(crate) fn constraint_members<A: Assignment + ?Sized>(pred: &A, g: &Group, con: &Constraint, d: Option<&Discretization>) -> Vec<usize> {
    match (&con.cell, d, con.slice) {
        (Some(cell), Some(d), Some(crate::metrics::Slice::Type(t))) if cell.len() == 1 => {
            let b = d.index(cell[0]);
            g.members().iter().copied().filter(|&x| d.index(pred.at(x)[t]) == b).collect()
        }
        (Some(cell), Some(d), _) => {
            let key: Vec<usize> = cell.iter().map(|&c| d.index(c)).collect();
            g.members().iter().copied().filter(|&x| d.cell(pred.at(x)) == key).collect()
        }
        _ => g.members().to_vec(),
    }
}

fn run_loop(pop: &Population, nature: &Nature, c: &GroupCollection, cfg: &LearnerConfig, init: Option<Predictor>) -> std::result::Result<LearnOutcome, LearnError> {
    cfg.validate()?;
    let k = nature.k();
    let n = pop.size();
    if nature.len() != n {
        return Err(Error::Dimension { expected: n, got: nature.len() }.into());
    }
    c.check(n)?;
    let mut pred = init.unwrap_or_else(|| Predictor::uniform(n, k));
    if pred.len() != n || pred.k() != k {
        return Err(Error::Dimension { expected: n * k, got: pred.len() * pred.k() }.into());
    }
    let d = match cfg.mode {
        LearnMode::MaCw | LearnMode::MaThreshold => None,
        _ => Some(cfg.discretization()?),
    };
    let eta = cfg.eta();
    let cap = cfg.cap(k);
    let mut records = Vec::new();
    let mut best: Option<(f64, Predictor, AuditReport)> = None;
    for it in 0..=cap {
        let report = audit_report(pop, nature, &pred, c, cfg)?;
        let Some(v) = report.violation(cfg.alpha).cloned() else {
            let trace = LearnTrace { mode: cfg.mode, iterations: it, records, final_gap: report.max_gap, converged: true };
            return Ok(LearnOutcome { predictor: pred, trace, report });
        };
        if best.as_ref().is_none_or(|b| report.max_gap < b.0) {
            best = Some((report.max_gap, pred.clone(), report.clone()));
        }
        if it == cap {
            break;
        }
        let g = &c.groups()[v.constraint.group_index];
        let members = constraint_members(&pred, g, &v.constraint, d.as_ref());
        let coords: Vec<usize> = v.constraint.slice.expect("learner constraints carry a slice").coords(k).collect();
        let sign = v.gap.signum();
        let delta = match cfg.mode {
            LearnMode::ScalarMc => {
                // Mean matching on the (p, 1 - p) encoding.
                let mass = pop.mass(&members);
                if mass > 0.0 {
                    v.gap / mass
                } else {
                    sign * eta
                }
            }
            _ => sign * eta / coords.len() as f64,
        };
        let table = pred.table_mut();
        for &x in &members {
            let row = table.row_mut(x);
            if cfg.mode == LearnMode::ScalarMc {
                let t = coords[0];
                row[t] = (row[t] + delta).clamp(0.0, 1.0);
                row[1 - t] = 1.0 - row[t];
            } else {
                for &t in &coords {
                    row[t] += delta;
                }
                project_in_place(row);
            }
        }
        records.push(TraceRecord { iteration: it, constraint: v.constraint, gap: v.gap, coords, delta, updated: members.len() });
    }
    let (gap, predictor, report) = best.expect("at least one audit ran");
    let trace = LearnTrace { mode: cfg.mode, iterations: cap, records, final_gap: gap, converged: false };
    Err(LearnError::BudgetExhausted(Box::new(LearnOutcome { predictor, trace, report })))
}

/// Repair multi-accuracy violations until every gap is at most `alpha`.
pub fn learn_multiaccurate(pop: &Population, nature: &Nature, c: &GroupCollection, cfg: &LearnerConfig, init: Option<Predictor>) -> std::result::Result<LearnOutcome, LearnError> {
    if !matches!(cfg.mode, LearnMode::MaCw | LearnMode::MaThreshold) {
        return Err(Error::Config("learn_multiaccurate needs ma-cw or ma-threshold".into()).into());
    }
    run_loop(pop, nature, c, cfg, init)
}

/// Repair level-set violations until every calibration gap is at most `alpha`.
pub fn learn_multicalibrated(pop: &Population, nature: &Nature, c: &GroupCollection, cfg: &LearnerConfig, init: Option<Predictor>) -> std::result::Result<LearnOutcome, LearnError> {
    if !matches!(cfg.mode, LearnMode::McCw | LearnMode::McFull) {
        return Err(Error::Config("learn_multicalibrated needs mc-cw or mc-full".into()).into());
    }
    run_loop(pop, nature, c, cfg, init)
}

pub(crate) fn run_scalar_loop(pop: &Population, nature: &Nature, c: &GroupCollection, cfg: &LearnerConfig) -> std::result::Result<LearnOutcome, LearnError> {
    run_loop(pop, nature, c, cfg, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TypeSpace;
    use crate::metrics::Slice;

    fn pop4() -> Population {
        Population::uniform(4).unwrap()
    }
    fn n0() -> Nature {
        Nature::from_labels(TypeSpace::new(2).unwrap(), &[0, 0, 1, 1]).unwrap()
    }
    fn coll(gs: &[&[usize]]) -> GroupCollection {
        let ids = ["X", "A", "B", "C"];
        GroupCollection::new(4, gs.iter().enumerate().map(|(i, m)| Group::new(ids[i], m.to_vec())).collect()).unwrap()
    }

    #[test]
    fn audit_examples() {
        let c = coll(&[&[0, 1, 2, 3], &[0, 1]]);
        let half = Predictor::uniform(4, 2);
        let cfg = LearnerConfig::new(LearnMode::MaCw, 0.1);
        assert!(audit(&pop4(), &n0(), &n0().as_predictor(), &c, &cfg).unwrap().is_none());
        let v = audit(&pop4(), &n0(), &half, &c, &cfg).unwrap().unwrap();
        assert_eq!((v.constraint.group.as_str(), v.constraint.slice, v.gap), ("A", Some(Slice::Type(0)), 0.25));
        let cfg = LearnerConfig::new(LearnMode::MaCw, 0.3);
        assert!(audit(&pop4(), &n0(), &half, &c, &cfg).unwrap().is_none());
    }

    #[test]
    fn ma_learner_examples() {
        let cfg = LearnerConfig::new(LearnMode::MaCw, 0.01);
        let c = coll(&[&[0, 1, 2, 3], &[0, 1], &[2, 3]]);
        let out = learn_multiaccurate(&pop4(), &n0(), &c, &cfg, Some(n0().as_predictor())).unwrap();
        assert_eq!(out.trace.iterations, 0);
        let out = learn_multiaccurate(&pop4(), &n0(), &c, &cfg, None).unwrap();
        let re = ma_error(&pop4(), &n0(), &out.predictor, &c, MaMode::CoordinateWise).unwrap();
        assert!(re.max_gap <= 0.01);
        for (block, t) in [([0usize, 1], 0usize), ([2, 3], 1)] {
            let avg: f64 = block.iter().map(|&x| out.predictor.at(x)[t]).sum::<f64>() / 2.0;
            assert!(avg >= 0.98, "block avg {avg}");
        }
        let c = coll(&[&[0, 1, 2, 3]]);
        let out = learn_multiaccurate(&pop4(), &n0(), &c, &cfg, None).unwrap();
        let avg: f64 = (0..4).map(|x| out.predictor.at(x)[0]).sum::<f64>() / 4.0;
        assert!((avg - 0.5).abs() <= 0.01);
    }

    #[test]
    fn threshold_learner_converges() {
        let ts = TypeSpace::ordered(3).unwrap();
        let nat = Nature::from_labels(ts, &[0, 1, 2, 2]).unwrap();
        let c = coll(&[&[0, 1, 2, 3], &[0, 1], &[1, 2]]);
        let cfg = LearnerConfig::new(LearnMode::MaThreshold, 0.02);
        let out = learn_multiaccurate(&pop4(), &nat, &c, &cfg, None).unwrap();
        assert!(ma_error(&pop4(), &nat, &out.predictor, &c, MaMode::Threshold).unwrap().max_gap <= 0.02);
    }

    #[test]
    fn mc_learner_examples() {
        let c = coll(&[&[0, 1, 2, 3]]);
        let swap = Nature::from_labels(TypeSpace::new(2).unwrap(), &[1, 1, 0, 0]).unwrap().as_predictor();
        let cfg = LearnerConfig::new(LearnMode::McCw, 0.01).with_lambda(0.25);
        let out = learn_multicalibrated(&pop4(), &n0(), &c, &cfg, Some(n0().as_predictor())).unwrap();
        assert_eq!(out.trace.iterations, 0);
        let out = learn_multicalibrated(&pop4(), &n0(), &c, &cfg, Some(swap.clone())).unwrap();
        assert!(mc_cw_error(&pop4(), &n0(), &out.predictor, &c, &cfg.discretization().unwrap()).unwrap().max_gap <= 0.01);
        let cfg = LearnerConfig::new(LearnMode::McFull, 0.01).with_lambda(0.25);
        let out = learn_multicalibrated(&pop4(), &n0(), &c, &cfg, Some(swap)).unwrap();
        let d = cfg.discretization().unwrap();
        assert!(mc_full_error(&pop4(), &n0(), &out.predictor, &c, &d).unwrap().max_gap <= 0.01);
        assert!(crate::metrics::realized_cells(&out.predictor, &c.groups()[0], &d).len() <= 4);
    }

    #[test]
    fn budget_exhaustion_reports_best() {
        let c = coll(&[&[0, 1, 2, 3], &[0, 1]]);
        let cfg = LearnerConfig::new(LearnMode::MaCw, 0.01).with_max_iterations(3);
        match learn_multiaccurate(&pop4(), &n0(), &c, &cfg, None) {
            Err(LearnError::BudgetExhausted(o)) => {
                assert!(!o.trace.converged);
                assert_eq!(o.trace.records.len(), 3);
                assert!(o.trace.final_gap > 0.01);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trace_replays_and_serializes() {
        let c = coll(&[&[0, 1, 2, 3], &[0, 1]]);
        let cfg = LearnerConfig::new(LearnMode::MaCw, 0.05);
        let a = learn_multiaccurate(&pop4(), &n0(), &c, &cfg, None).unwrap();
        let b = learn_multiaccurate(&pop4(), &n0(), &c, &cfg, None).unwrap();
        assert_eq!(a.trace, b.trace);
        let jl = a.trace.to_jsonl().unwrap();
        assert_eq!(jl.lines().count(), a.trace.records.len() + 1);
    }

    #[test]
    fn invalid_configs() {
        let c = coll(&[&[0, 1, 2, 3]]);
        assert!(learn_multiaccurate(&pop4(), &n0(), &c, &LearnerConfig::new(LearnMode::MaCw, 1.5), None).is_err());
        assert!(learn_multicalibrated(&pop4(), &n0(), &c, &LearnerConfig::new(LearnMode::McCw, 0.1), None).is_err());
        assert!(learn_multiaccurate(&pop4(), &n0(), &c, &LearnerConfig::new(LearnMode::McCw, 0.1).with_lambda(0.5), None).is_err());
    }
}

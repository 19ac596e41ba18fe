//! Loss-family outcome-indistinguishability learner.

use serde::{Deserialize, Serialize};

use crate::domain::{Assignment, Nature, Population, Predictor};
use crate::error::Error;
use crate::loss::LossFunction;
use crate::metrics::ActionFunction;
use crate::rules::loss_min_rule;
use crate::simplex::project_in_place;

use super::{LearnError, LearnOutcome, LearnTrace, LearnerConfig};

/// Distinguisher values `c_t(x) = l(t, rho*_l(pred(x))) - l(t, h(x))`.
fn distinguisher(loss: &LossFunction, rho_pred: f64, h: f64, t: usize) -> f64 {
    let at = |a: f64| a * loss.value(t, 1) + (1.0 - a) * loss.value(t, 0);
    at(rho_pred) - at(h)
}

/// `sum_x w(x) sum_t (nature_t - pred_t) c_t(x)`.
pub fn oi_gap(pop: &Population, nature: &Nature, pred: &Predictor, loss: &LossFunction, h: &ActionFunction) -> f64 {
    let rho = loss_min_rule(loss);
    (0..pop.size())
        .map(|x| {
            let (n, p) = (nature.at(x), pred.at(x));
            let r = rho.accept(p);
            pop.weight(x) * (0..n.len()).map(|t| (n[t] - p[t]) * distinguisher(loss, r, h.values()[x], t)).sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OiRecord {
    pub iteration: usize,
    pub loss: usize,
    pub action: usize,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct OiOutcome {
    pub predictor: Predictor,
    pub iterations: usize,
    pub records: Vec<OiRecord>,
    pub final_gap: f64,
}

/// Repairs the largest `(l, h)` distinguisher until all gaps are at most `epsilon / 2`.
pub fn learn_oi_loss_family(
    pop: &Population,
    nature: &Nature,
    hs: &[ActionFunction],
    losses: &[LossFunction],
    epsilon: f64,
    cfg: &LearnerConfig,
    init: Option<Predictor>,
) -> std::result::Result<OiOutcome, LearnError> {
    if hs.is_empty() || losses.is_empty() {
        return Err(Error::Config("H and L must be nonempty".into()).into());
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Config(format!("epsilon {epsilon} not in (0,1]")).into());
    }
    let k = nature.k();
    let n = pop.size();
    if losses.iter().any(|l| l.k() != k) || hs.iter().any(|h| h.len() != n) {
        return Err(Error::Dimension { expected: k, got: 0 }.into());
    }
    let eta = epsilon / (2.0 * k as f64);
    let cap = cfg.max_iterations.unwrap_or((8.0 * k as f64 / (epsilon * epsilon)).ceil() as usize);
    let mut pred = init.unwrap_or_else(|| Predictor::uniform(n, k));
    let rules: Vec<_> = losses.iter().map(loss_min_rule).collect();
    let mut records = Vec::new();
    for it in 0..=cap {
        let mut best = (0.0f64, 0usize, 0usize);
        for (li, l) in losses.iter().enumerate() {
            for (hi, h) in hs.iter().enumerate() {
                let g = oi_gap(pop, nature, &pred, l, h);
                if g.abs() > best.0.abs() {
                    best = (g, li, hi);
                }
            }
        }
        if best.0.abs() <= epsilon / 2.0 {
            return Ok(OiOutcome { predictor: pred, iterations: it, records, final_gap: best.0.abs() });
        }
        if it == cap {
            let trace = LearnTrace { mode: cfg.mode, iterations: cap, records: Vec::new(), final_gap: best.0.abs(), converged: false };
            let report = crate::metrics::AuditReport { metric: "oi".into(), max_gap: best.0.abs(), witness: None, entries: Vec::new(), group_mass: Vec::new() };
            return Err(LearnError::BudgetExhausted(Box::new(LearnOutcome { predictor: pred, trace, report })));
        }
        let (g, li, hi) = best;
        let (l, h, rho) = (&losses[li], &hs[hi], &rules[li]);
        let step = g.signum() * eta;
        let table = pred.table_mut();
        for x in 0..n {
            let r = rho.accept(table.row(x));
            let row = table.row_mut(x);
            for (t, v) in row.iter_mut().enumerate() {
                *v += step * distinguisher(l, r, h.values()[x], t);
            }
            project_in_place(row);
        }
        records.push(OiRecord { iteration: it, loss: li, action: hi, gap: g });
    }
    unreachable!("loop returns on the final iteration")
}

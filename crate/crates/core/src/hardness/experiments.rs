//! Decision-conflict and loss-conflict experiments.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Assignment, Discretization, Group, GroupCollection, Population, Predictor};
use crate::error::{Error, Result};
use crate::learn::{learn_multiaccurate, learn_multicalibrated, LearnError, LearnMode, LearnOutcome, LearnerConfig};
use crate::loss::LossFunction;
use crate::metrics::{exp_loss, loss_gap, mac_error, mad_error, mc_cw_error, ActionFunction, MaMode};
use crate::rng::RandomStream;
use crate::rules::{affineness_distance, compose, ita_rule, lipschitz_estimate, loss_min_rule, mac_rule, AffineWitness, DecisionRule};
use crate::simplex::StochasticVector;

use super::prf::{hash_groups, nature_loss_conflict, nature_two_block, pr_subset, PrfKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DecisionConflict,
    LossConflict,
}

/// Which group collections are run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KeyPolicy {
    /// Key-oblivious groups only.
    Oblivious,
    /// Key-oblivious groups plus the key-aware control.
    #[default]
    Both,
}

fn default_resolution() -> usize {
    10
}
fn default_kappa() -> f64 {
    64.0
}
fn default_hash_groups() -> usize {
    8
}
fn default_group_seed() -> u64 {
    0x0B11_1005
}
fn default_slack() -> f64 {
    0.02
}

/// Experiment parameters shared by both runners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(alias = "|X|")]
    pub size: usize,
    /// Overrides the witness mixing weight (decision conflict).
    #[serde(default)]
    pub gamma: Option<f64>,
    pub lambda: f64,
    pub alpha: f64,
    #[serde(default, rename = "epsilon_AC", alias = "epsilon_ac")]
    pub epsilon_ac: Option<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub key_policy: KeyPolicy,
    #[serde(default)]
    pub witness: Option<AffineWitness>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_kappa")]
    pub kappa_eff: f64,
    #[serde(default = "default_hash_groups")]
    pub hash_groups: usize,
    #[serde(default = "default_group_seed")]
    pub group_seed: u64,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default = "default_slack")]
    pub control_slack: f64,
}

impl ExperimentConfig {
    /// Default decision-conflict setup: |X| = 2^16, lambda = 1/8, alpha = 0.01, 20 keys,
    /// witness (e_0, e_1, 1/2).
    pub fn decision_default() -> Self {
        Self {
            experiment: ExperimentKind::DecisionConflict,
            size: 1 << 16,
            gamma: None,
            lambda: 0.125,
            alpha: 0.01,
            epsilon_ac: None,
            seeds: (1..=20).collect(),
            key_policy: KeyPolicy::Both,
            witness: Some(AffineWitness::unit_pair(0, 1, 2).unwrap()),
            resolution: 10,
            kappa_eff: 64.0,
            hash_groups: 8,
            group_seed: default_group_seed(),
            tolerance: None,
            control_slack: 0.02,
        }
    }

    /// Default loss-conflict setup: |X| = 2^16, eps_AC = 0.0125, 20 keys.
    pub fn loss_default() -> Self {
        Self {
            experiment: ExperimentKind::LossConflict,
            lambda: 0.125,
            epsilon_ac: Some(0.0125),
            witness: None,
            ..Self::decision_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(Error::Config("size must be at least 2".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} not in (0,1)", self.alpha)));
        }
        Discretization::new(self.lambda)?;
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::Config(format!("gamma {g} not in (0,1)")));
            }
        }
        if let Some(e) = self.epsilon_ac {
            if !(e >= 0.0) {
                return Err(Error::Config("epsilon_AC must be nonnegative".into()));
            }
        }
        if self.experiment == ExperimentKind::LossConflict && self.epsilon_ac.is_none() {
            return Err(Error::Config("loss conflict needs epsilon_AC".into()));
        }
        if self.resolution < 2 || self.kappa_eff <= 0.0 {
            return Err(Error::Config("resolution >= 2 and kappa_eff > 0 required".into()));
        }
        Ok(())
    }

    fn oblivious_groups(&self) -> Vec<Group> {
        let mut gs = vec![Group::full(self.size)];
        gs.extend(hash_groups(self.size, self.hash_groups, &[0.25, 0.5, 0.75], &RandomStream::new(self.group_seed).derive("oblivious-groups"), "h"));
        gs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
    Vacuous,
}

/// Parameter-regime flags from the proof's final inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub kappa_ok: bool,
    pub alpha_ok: bool,
    pub lambda_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleCertificate {
    pub epsilon: f64,
    pub witness: AffineWitness,
    /// Largest violation found by the grid search (may exceed `epsilon` when a witness is pinned).
    pub search_epsilon: f64,
    pub search_witness: AffineWitness,
    /// `None` when the rule has no finite Lipschitz certificate.
    pub lipschitz: Option<f64>,
    pub regime: Option<Regime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBound {
    pub group: String,
    pub mass: f64,
    pub gap: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub calibration_error: f64,
    pub mad_error: f64,
    pub groups: Vec<GroupBound>,
    pub within_bound: bool,
    pub iterations: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetCheck {
    pub mass: f64,
    pub gamma_tilde: f64,
    pub deviation: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryEntry {
    pub name: String,
    pub mac_error: f64,
    pub loss_gap: f64,
    pub accurate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub mac_error: f64,
    pub loss_gap: f64,
}

/// One keyed trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub key: PrfKey,
    pub gamma: f64,
    pub realized_fraction: f64,
    pub calibration_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub mad_error: Option<f64>,
    pub mac_error: Option<f64>,
    pub loss_gap: Option<f64>,
    /// Threshold the headline measurement is compared against.
    pub bound: f64,
    pub tolerance: f64,
    pub level_set: Option<LevelSetCheck>,
    pub battery: Vec<BatteryEntry>,
    pub baseline: Option<Baseline>,
    pub loss_split: Option<f64>,
    pub control: Option<ControlReport>,
    pub verdict: Verdict,
}

impl TrialReport {
    /// Re-derives the verdict from the stored numbers.
    pub fn recompute_verdict(&self, experiment: ExperimentKind, alpha: f64) -> Verdict {
        if !self.converged {
            return Verdict::Fail;
        }
        match experiment {
            ExperimentKind::DecisionConflict => {
                let mad = self.mad_error.unwrap_or(0.0);
                if self.calibration_error <= alpha && mad >= self.bound - self.tolerance {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
            ExperimentKind::LossConflict => {
                if self.bound <= 0.0 {
                    Verdict::Vacuous
                } else if self.battery.iter().filter(|b| b.accurate).all(|b| b.loss_gap >= self.bound - self.tolerance) {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                }
            }
        }
    }
}

/// Full experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub schema: String,
    pub version: u32,
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub subject: serde_json::Value,
    pub certificate: Option<RuleCertificate>,
    pub trials: Vec<TrialReport>,
    pub verdict: Verdict,
}

fn overall(trials: &[TrialReport]) -> Verdict {
    if trials.iter().any(|t| t.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if trials.iter().all(|t| t.verdict == Verdict::Vacuous) {
        Verdict::Vacuous
    } else {
        Verdict::Pass
    }
}

fn learned(r: std::result::Result<LearnOutcome, LearnError>) -> Result<(LearnOutcome, bool)> {
    match r {
        Ok(o) => Ok((o, true)),
        Err(LearnError::BudgetExhausted(o)) => Ok((*o, false)),
        Err(LearnError::Invalid(e)) => Err(e),
    }
}

/// Rule certificate for the decision-conflict experiment.
pub fn certify_rule(rule: &DecisionRule, cfg: &ExperimentConfig) -> Result<RuleCertificate> {
    let search = affineness_distance(rule, cfg.resolution)?;
    if search.epsilon < 1e-9 {
        return Err(Error::HypothesisViolated("rule is affine on the probe grid; no conflict to exhibit".into()));
    }
    let mut witness = cfg.witness.clone().unwrap_or_else(|| search.witness.clone());
    if let Some(g) = cfg.gamma {
        witness.gamma = g;
    }
    if witness.y.len() != rule.k() || witness.y_prime.len() != rule.k() {
        return Err(Error::Dimension { expected: rule.k(), got: witness.y.len() });
    }
    StochasticVector::new(witness.y.clone())?;
    StochasticVector::new(witness.y_prime.clone())?;
    if !(witness.gamma > 0.0 && witness.gamma < 1.0) {
        return Err(Error::Config("witness gamma must lie in (0,1)".into()));
    }
    let epsilon = witness.violation(rule);
    if epsilon < 1e-9 {
        return Err(Error::HypothesisViolated("witness shows no affineness violation".into()));
    }
    let lipschitz = lipschitz_estimate(rule, cfg.resolution)?.finite();
    let regime = match lipschitz {
        Some(m) if m > 0.0 => {
            if cfg.lambda > 3.0 * epsilon / m {
                return Err(Error::HypothesisViolated(format!("lambda {} exceeds 3 eps / M = {}", cfg.lambda, 3.0 * epsilon / m)));
            }
            let k = rule.k() as f64;
            Some(Regime {
                kappa_ok: cfg.kappa_eff >= 30.0 * m * m / (epsilon * epsilon),
                alpha_ok: cfg.alpha <= cfg.lambda * cfg.lambda * epsilon / (60.0 * m * k),
                lambda_ok: cfg.lambda <= epsilon / (3.0 * m),
            })
        }
        _ => None,
    };
    Ok(RuleCertificate { epsilon, witness, search_epsilon: search.epsilon, search_witness: search.witness, lipschitz, regime })
}

fn level_set_check(pop: &Population, pred: &Predictor, subset: &super::prf::PseudorandomSubset, d: &Discretization, w: &AffineWitness, alpha: f64) -> LevelSetCheck {
    let (n, k, b) = (pop.size(), pred.k(), d.bins());
    let mut mass = vec![0.0; k * b];
    for x in 0..n {
        for t in 0..k {
            mass[t * b + d.index(pred.at(x)[t])] += pop.weight(x);
        }
    }
    let top: Vec<usize> = (0..k)
        .map(|t| (0..b).max_by(|&i, &j| mass[t * b + i].partial_cmp(&mass[t * b + j]).unwrap().then(j.cmp(&i))).unwrap())
        .collect();
    let xs: Vec<usize> = (0..n).filter(|&x| (0..k).all(|t| d.index(pred.at(x)[t]) == top[t])).collect();
    let m = pop.mass(&xs);
    let mut avg = vec![0.0; k];
    let mut inside = 0.0;
    for &x in &xs {
        for t in 0..k {
            avg[t] += pop.weight(x) * pred.at(x)[t];
        }
        if subset.contains(x) {
            inside += pop.weight(x);
        }
    }
    let (gamma_tilde, deviation) = if m > 0.0 {
        let gt = inside / m;
        let dev = (0..k).map(|t| (avg[t] / m - (gt * w.y[t] + (1.0 - gt) * w.y_prime[t])).abs()).fold(0.0, f64::max);
        (gt, dev)
    } else {
        (0.0, 0.0)
    };
    let kf = k as f64;
    LevelSetCheck { mass: m, gamma_tilde, deviation, bound: 3.0 * kf * alpha / (d.lambda() * d.lambda()) + d.lambda() }
}

fn decision_trial(rule: &DecisionRule, cfg: &ExperimentConfig, cert: &RuleCertificate, trial: usize, seed: u64) -> Result<TrialReport> {
    let pop = Population::uniform(cfg.size)?;
    let d = Discretization::new(cfg.lambda)?;
    let k = rule.k();
    let m_eff = cert.lipschitz.unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let width = m_eff / (cert.epsilon * cfg.kappa_eff);
    let nu = (RandomStream::new(seed).derive("gamma-perturbation").rng().gen::<f64>() * 2.0 - 1.0) * width;
    let g0 = cert.witness.gamma;
    let gamma = (g0 + nu).clamp(g0 / 2.0, (1.0 + g0) / 2.0);
    let key = PrfKey::from_seed(seed);
    let subset = pr_subset(key, gamma, &pop)?;
    let y = StochasticVector::new(cert.witness.y.clone())?;
    let y2 = StochasticVector::new(cert.witness.y_prime.clone())?;
    let nature = nature_two_block(&subset, &y, &y2)?;
    let lcfg = LearnerConfig::new(LearnMode::McCw, cfg.alpha).with_lambda(cfg.lambda);

    let oblivious = GroupCollection::new(cfg.size, cfg.oblivious_groups())?;
    let (out, converged) = learned(learn_multicalibrated(&pop, &nature, &oblivious, &lcfg, None))?;
    let calibration_error = mc_cw_error(&pop, &nature, &out.predictor, &oblivious, &d)?.max_gap;
    let mad = mad_error(&pop, &nature, &out.predictor, rule, &oblivious)?.max_gap;
    let tolerance = cfg.tolerance.unwrap_or_else(|| {
        4.0 * k as f64 / (cfg.size as f64).sqrt() + cert.lipschitz.map_or(0.0, |m| 2.0 * m * cfg.lambda)
    });
    let level_set = level_set_check(&pop, &out.predictor, &subset, &d, &cert.witness, cfg.alpha);

    let control = match cfg.key_policy {
        KeyPolicy::Oblivious => None,
        KeyPolicy::Both => {
            let mut aware = oblivious.clone();
            aware.push(subset.as_group("X1"))?;
            let (cout, cconv) = learned(learn_multicalibrated(&pop, &nature, &aware, &lcfg, None))?;
            let cal = mc_cw_error(&pop, &nature, &cout.predictor, &aware, &d)?.max_gap;
            let mad_rep = mad_error(&pop, &nature, &cout.predictor, rule, &aware)?;
            let groups: Vec<GroupBound> = mad_rep
                .entries
                .iter()
                .map(|e| {
                    let mass = mad_rep.mass_of(&e.constraint.group).unwrap_or(0.0);
                    GroupBound { group: e.constraint.group.clone(), mass, gap: e.gap.abs(), bound: k as f64 * cfg.alpha / mass + cfg.control_slack }
                })
                .collect();
            let within_bound = cconv && groups.iter().all(|g| g.gap <= g.bound);
            Some(ControlReport {
                calibration_error: cal,
                mad_error: mad_rep.max_gap,
                groups,
                within_bound,
                iterations: cout.trace.iterations,
                verdict: Verdict::NotApplicable,
            })
        }
    };

    let mut report = TrialReport {
        trial,
        seed,
        key,
        gamma,
        realized_fraction: subset.realized,
        calibration_error,
        iterations: out.trace.iterations,
        converged,
        mad_error: Some(mad),
        mac_error: None,
        loss_gap: None,
        bound: cert.epsilon / 2.0,
        tolerance,
        level_set: Some(level_set),
        battery: Vec::new(),
        baseline: None,
        loss_split: None,
        control,
        verdict: Verdict::Fail,
    };
    report.verdict = report.recompute_verdict(ExperimentKind::DecisionConflict, cfg.alpha);
    Ok(report)
}

/// Empirical surrogate for the calibration versus decision-accuracy conflict.
pub fn run_decision_conflict_experiment(rule: &DecisionRule, cfg: &ExperimentConfig) -> Result<ConflictReport> {
    cfg.validate()?;
    if cfg.experiment != ExperimentKind::DecisionConflict {
        return Err(Error::Config("config is not a decision-conflict experiment".into()));
    }
    let cert = certify_rule(rule, cfg)?;
    let trials: Vec<TrialReport> = cfg
        .seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| decision_trial(rule, cfg, &cert, i, s))
        .collect::<Result<_>>()?;
    Ok(ConflictReport {
        schema: "calibra.conflict-report".into(),
        version: 1,
        experiment: ExperimentKind::DecisionConflict,
        config: cfg.clone(),
        subject: serde_json::to_value(rule)?,
        certificate: Some(cert),
        verdict: overall(&trials),
        trials,
    })
}

/// Rules composed with key-obliviously learned predictors.
fn rule_battery(loss: &LossFunction) -> Vec<(String, DecisionRule)> {
    let k = loss.k();
    let mut rules = vec![("rho-star".to_string(), loss_min_rule(loss)), ("mac-rule".to_string(), mac_rule(loss))];
    for t in 0..k {
        for level in [0.25, 0.5, 0.75] {
            rules.push((format!("step-t{t}-{level}"), DecisionRule::step(k, t, level).unwrap()));
        }
        let mut g = vec![0.0; k];
        g[t] = 1.0;
        rules.push((format!("ita-e{t}"), ita_rule(&g).unwrap()));
    }
    rules
}

fn loss_trial(loss: &LossFunction, cfg: &ExperimentConfig, trial: usize, seed: u64) -> Result<TrialReport> {
    let n = cfg.size;
    let pop = Population::uniform(n)?;
    let key = PrfKey::from_seed(seed);
    let (nature, subset, types) = nature_loss_conflict(loss, &pop, key)?;
    let cert = loss.certificate().expect("checked by nature_loss_conflict");
    let alpha_l = cert.alpha;
    let eps_ac = cfg.epsilon_ac.expect("validated");
    let everyone = GroupCollection::new(n, vec![Group::full(n)])?;
    let h0 = ActionFunction::constant(n, 0.0)?;
    let h1 = ActionFunction::constant(n, 1.0)?;
    let consts = [h0.clone(), h1.clone()];
    let (l0, l1) = (exp_loss(&pop, &nature, &h0, loss)?, exp_loss(&pop, &nature, &h1, loss)?);
    let loss_split = if types.swapped { l0 - l1 } else { l1 - l0 };

    let mut candidates: Vec<(String, ActionFunction)> = (0..=8).map(|i| (format!("const-{}", i as f64 / 8.0), ActionFunction::constant(n, i as f64 / 8.0).unwrap())).collect();
    let groups = cfg.oblivious_groups();
    let mut probes = groups.clone();
    probes.extend(hash_groups(n, cfg.hash_groups, &[0.25], &RandomStream::new(cfg.group_seed).derive("quarter-groups"), "q"));
    for g in &probes {
        candidates.push((format!("1[{}]", g.id), ActionFunction::indicator(n, g)));
        candidates.push((format!("1[{}^c]", g.id), ActionFunction::indicator(n, &g.complement(n, "c"))));
    }
    let oblivious = GroupCollection::new(n, groups)?;
    let mut calibration_error = 0.0;
    let mut iterations = 0;
    let mut converged = true;
    for (tag, lcfg) in [
        ("ma", LearnerConfig::new(LearnMode::MaCw, cfg.alpha)),
        ("mc", LearnerConfig::new(LearnMode::McCw, cfg.alpha).with_lambda(cfg.lambda)),
    ] {
        let r = if tag == "ma" {
            learn_multiaccurate(&pop, &nature, &oblivious, &lcfg, None)
        } else {
            learn_multicalibrated(&pop, &nature, &oblivious, &lcfg, None)
        };
        let (out, conv) = learned(r)?;
            converged &= conv;
        iterations += out.trace.iterations;
        if tag == "ma" {
            calibration_error = crate::metrics::ma_error(&pop, &nature, &out.predictor, &oblivious, MaMode::CoordinateWise)?.max_gap;
        }
        for (name, rule) in rule_battery(loss) {
            candidates.push((format!("{name}∘{tag}"), compose(&rule, &out.predictor)));
        }
    }

    let mut battery = Vec::with_capacity(candidates.len());
    for (name, h) in candidates {
        let mac = mac_error(&pop, &nature, &h, loss, &everyone)?.max_gap;
        let gap = loss_gap(&pop, &nature, &h, loss, &consts)?;
        battery.push(BatteryEntry { name, mac_error: mac, loss_gap: gap, accurate: mac <= eps_ac });
    }
    let star = compose(&loss_min_rule(loss), &nature);
    let baseline = Baseline {
        mac_error: mac_error(&pop, &nature, &star, loss, &everyone)?.max_gap,
        loss_gap: loss_gap(&pop, &nature, &star, loss, &consts)?,
    };
    let bound = alpha_l / 8.0 - eps_ac * (2.0 - 0.75 * alpha_l);
    let min_accurate = battery.iter().filter(|b| b.accurate).map(|b| b.loss_gap).fold(f64::INFINITY, f64::min);
    let mut report = TrialReport {
        trial,
        seed,
        key,
        gamma: 0.75,
        realized_fraction: subset.realized,
        calibration_error,
        iterations,
        converged,
        mad_error: None,
        mac_error: Some(battery.iter().filter(|b| b.accurate).map(|b| b.mac_error).fold(0.0, f64::max)),
        loss_gap: min_accurate.is_finite().then_some(min_accurate),
        bound,
        tolerance: cfg.tolerance.unwrap_or(0.01),
        level_set: None,
        battery,
        baseline: Some(baseline),
        loss_split: Some(loss_split),
        control: None,
        verdict: Verdict::Fail,
    };
    report.verdict = report.recompute_verdict(ExperimentKind::LossConflict, cfg.alpha);
    Ok(report)
}

/// Empirical surrogate for the loss-minimization versus classification-accuracy conflict.
pub fn run_loss_conflict_experiment(loss: &LossFunction, cfg: &ExperimentConfig) -> Result<ConflictReport> {
    cfg.validate()?;
    if cfg.experiment != ExperimentKind::LossConflict {
        return Err(Error::Config("config is not a loss-conflict experiment".into()));
    }
    if loss.certificate().is_none() {
        return Err(Error::MissingCertificate("loss conflict needs a nontriviality certificate".into()));
    }
    let trials: Vec<TrialReport> = cfg
        .seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| loss_trial(loss, cfg, i, s))
        .collect::<Result<_>>()?;
    Ok(ConflictReport {
        schema: "calibra.conflict-report".into(),
        version: 1,
        experiment: ExperimentKind::LossConflict,
        config: cfg.clone(),
        subject: serde_json::to_value(loss)?,
        certificate: None,
        verdict: overall(&trials),
        trials,
    })
}

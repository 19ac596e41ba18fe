//! Command execution. Each command returns its artifacts in memory; nothing
//! touches the filesystem until the whole run has succeeded.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use calibra::hardness::{run_decision_conflict_experiment, run_loss_conflict_experiment, ConflictReport, ExperimentKind, Verdict};
use calibra::learn::{
    audit_report, expectation_target, learn_multiaccurate, learn_multicalibrated, learn_scalar_calibrated, lift_scalar, omnipredict, LearnError,
    LearnMode, LearnOutcome, LearnerConfig,
};
use calibra::learn::indicator_class;
use calibra::metrics::{loss_gap, ma_error, mac_error, mad_error, mc_cw_error, mc_full_error};
use calibra::report::{canonical_value, fmt_float, plot_data, to_canonical_json, Instance};
use calibra::rules::{affine_projection, affineness_distance, compose, lipschitz_estimate, mac_rule, simplex_grid};
use calibra::{
    AuditReport, DecisionRule, Discretization, Group, GroupCollection, LossFunction, MaMode, Nature, Population, Predictor, RandomStream, TypeSpace,
};
use rand::Rng;
use serde_json::json;

use crate::config::{Command, Format, MetricName, RunConfig};

/// Outcome of a run before it is written.
pub struct Artifacts {
    pub files: Vec<(PathBuf, String)>,
    /// True when a verdict failed or a learner ran out of budget.
    pub failed: bool,
}

impl Artifacts {
    fn new() -> Self {
        Self { files: Vec::new(), failed: false }
    }

    fn add(&mut self, dir: &str, name: &str, body: String) {
        let p = if dir.is_empty() { PathBuf::from(name) } else { PathBuf::from(dir).join(name) };
        self.files.push((p, body));
    }
}

fn seed_dir(seeds: &[u64], seed: u64) -> String {
    if seeds.len() == 1 {
        String::new()
    } else {
        format!("seed-{seed}")
    }
}

fn load_instance(cfg: &RunConfig) -> Result<Instance> {
    let path = cfg.input.as_ref().context("missing input instance")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Instance::from_json(&text).with_context(|| format!("parsing instance {}", path.display()))
}

fn audit_csv(r: &AuditReport) -> Result<String> {
    let mut buf = Vec::new();
    r.write_csv(&mut buf, fmt_float)?;
    Ok(String::from_utf8(buf)?)
}

fn predictor_csv(p: &Predictor) -> Result<String> {
    let mut buf = Vec::new();
    p.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}

fn envelope(kind: &str, body: serde_json::Value) -> serde_json::Value {
    let mut v = json!({"schema": format!("calibra.{kind}"), "version": 1});
    if let (Some(m), serde_json::Value::Object(b)) = (v.as_object_mut(), body) {
        m.extend(b);
    }
    v
}

pub fn execute(cmd: Command, cfg: &RunConfig, formats: &[Format]) -> Result<Artifacts> {
    let want = |f: Format| formats.contains(&f);
    let mut out = Artifacts::new();
    match cmd {
        Command::Generate => generate(cfg, &mut out, &want)?,
        Command::Audit => audit(cfg, &mut out, &want)?,
        Command::Learn => learn(cfg, &mut out, &want)?,
        Command::Rules => rules(cfg, &mut out, &want)?,
        Command::Omnipredict => omni(cfg, &mut out, &want)?,
        Command::Hardness => hardness(cfg, &mut out, &want)?,
    }
    Ok(out)
}

fn random_simplex<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn generate(cfg: &RunConfig, out: &mut Artifacts, want: &dyn Fn(Format) -> bool) -> Result<()> {
    let spec = cfg.generate.as_ref().context("missing generate section")?;
    if spec.size == 0 || spec.k < 2 {
        bail!("generate needs size >= 1 and k >= 2");
    }
    for &seed in &cfg.seeds {
        let mut rng = RandomStream::new(seed).derive("generate").rng();
        let pop = if spec.weighted {
            let w: Vec<f64> = (0..spec.size).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = w.iter().sum();
            Population::weighted(w.iter().map(|v| v / s).collect())?
        } else {
            Population::uniform(spec.size)?
        };
        let types = if spec.ordered { TypeSpace::ordered(spec.k)? } else { TypeSpace::new(spec.k)? };
        let nature = if spec.deterministic {
            let labels: Vec<usize> = (0..spec.size).map(|_| rng.gen_range(0..spec.k)).collect();
            Nature::from_labels(types, &labels)?
        } else {
            let rows: Vec<Vec<f64>> = (0..spec.size).map(|_| random_simplex(spec.k, &mut rng)).collect();
            Nature::new(types, &rows)?
        };
        let mut groups = vec![Group::full(spec.size)];
        for i in 0..spec.groups {
            let mut mask: Vec<bool> = (0..spec.size).map(|_| rng.gen_bool(0.5)).collect();
            if !mask.iter().any(|&b| b) {
                mask[rng.gen_range(0..spec.size)] = true;
            }
            groups.push(Group::from_mask(format!("g{}", i + 1), &mask));
        }
        let mut inst = Instance::new(pop, nature, GroupCollection::new(spec.size, groups)?);
        if spec.with_predictor {
            let rows: Vec<Vec<f64>> = (0..spec.size).map(|_| random_simplex(spec.k, &mut rng)).collect();
            inst.predictor = Some(Predictor::new(spec.k, &rows)?);
        }
        let dir = seed_dir(&cfg.seeds, seed);
        if want(Format::Json) {
            out.add(&dir, "instance.json", to_canonical_json(&inst)?);
        }
        if want(Format::Csv) {
            out.add(&dir, "nature.csv", predictor_csv(&inst.nature.as_predictor())?);
            if let Some(p) = &inst.predictor {
                out.add(&dir, "predictor.csv", predictor_csv(p)?);
            }
        }
    }
    Ok(())
}

fn metric_slug(m: MetricName) -> &'static str {
    match m {
        MetricName::MaCw => "ma-cw",
        MetricName::MaThreshold => "ma-threshold",
        MetricName::McCw => "mc-cw",
        MetricName::McFull => "mc-full",
        MetricName::Mad => "mad",
        MetricName::Mac => "mac",
    }
}

fn audit(cfg: &RunConfig, out: &mut Artifacts, want: &dyn Fn(Format) -> bool) -> Result<()> {
    let spec = cfg.audit.as_ref().context("missing audit section")?;
    let inst = load_instance(cfg)?;
    let pred = inst.predictor.as_ref().context("audit needs an instance with a predictor")?;
    let (pop, nature, c) = (&inst.population, &inst.nature, &inst.groups);
    let disc = || -> Result<Discretization> { Ok(Discretization::new(spec.lambda.context("calibration metrics need lambda")?)?) };
    let mut reports = Vec::new();
    for &m in &spec.metrics {
        let r = match m {
            MetricName::MaCw => ma_error(pop, nature, pred, c, MaMode::CoordinateWise)?,
            MetricName::MaThreshold => ma_error(pop, nature, pred, c, MaMode::Threshold)?,
            MetricName::McCw => mc_cw_error(pop, nature, pred, c, &disc()?)?,
            MetricName::McFull => mc_full_error(pop, nature, pred, c, &disc()?)?,
            MetricName::Mad => mad_error(pop, nature, pred, spec.rule.as_ref().context("mad needs a rule")?, c)?,
            MetricName::Mac => {
                let loss = spec.loss.as_ref().or(inst.losses.first()).context("mac needs a loss")?;
                mac_error(pop, nature, &compose(&mac_rule(loss), pred), loss, c)?
            }
        };
        reports.push((m, r));
    }
    if reports.is_empty() {
        bail!("audit lists no metrics");
    }
    let headline = reports.iter().map(|(_, r)| r.max_gap).fold(0.0, f64::max);
    if want(Format::Json) {
        let body = json!({
            "headline_gap": headline,
            "reports": reports.iter().map(|(_, r)| canonical_value(r)).collect::<calibra::Result<Vec<_>>>()?,
        });
        out.add("", "audit.json", to_canonical_json(&envelope("audit", body))?);
    }
    for (m, r) in &reports {
        if want(Format::Csv) {
            out.add("", &format!("audit-{}.csv", metric_slug(*m)), audit_csv(r)?);
        }
        if want(Format::Plotdata) {
            let pts: Vec<(f64, f64)> = r.entries.iter().enumerate().map(|(i, e)| (i as f64, e.gap)).collect();
            out.add("", &format!("audit-{}.tsv", metric_slug(*m)), plot_data(&pts));
        }
    }
    Ok(())
}

/// Runs one learner; `Ok(false)` flags budget exhaustion.
fn run_learner(inst: &Instance, cfg: &LearnerConfig) -> Result<(LearnOutcome, bool)> {
    let (pop, nature, c) = (&inst.population, &inst.nature, &inst.groups);
    let r = match cfg.mode {
        LearnMode::MaCw | LearnMode::MaThreshold => learn_multiaccurate(pop, nature, c, cfg, None),
        LearnMode::McCw | LearnMode::McFull => learn_multicalibrated(pop, nature, c, cfg, None),
        LearnMode::ScalarMc => {
            let target = expectation_target(nature)?;
            match learn_scalar_calibrated(pop, &target, c, cfg) {
                Ok(s) => Ok(LearnOutcome { predictor: lift_scalar(&s.predictor, nature.types())?, trace: s.trace, report: s.report }),
                Err(LearnError::BudgetExhausted(o)) => {
                    let q: Vec<f64> = (0..pop.size()).map(|x| calibra::Assignment::at(&o.predictor, x)[0]).collect();
                    Err(LearnError::BudgetExhausted(Box::new(LearnOutcome { predictor: lift_scalar(&q, nature.types())?, ..*o })))
                }
                Err(e) => Err(e),
            }
        }
    };
    match r {
        Ok(o) => Ok((o, true)),
        Err(LearnError::BudgetExhausted(o)) => Ok((*o, false)),
        Err(LearnError::Invalid(e)) => Err(e.into()),
    }
}

fn learn(cfg: &RunConfig, out: &mut Artifacts, want: &dyn Fn(Format) -> bool) -> Result<()> {
    let base = cfg.learner.as_ref().context("missing learner section")?;
    base.validate()?;
    let inst = load_instance(cfg)?;
    for &seed in &cfg.seeds {
        let mut lc = base.clone();
        lc.seed = seed;
        let (o, converged) = run_learner(&inst, &lc)?;
        out.failed |= !converged;
        let dir = seed_dir(&cfg.seeds, seed);
        if want(Format::Json) {
            let body = json!({
                "config": canonical_value(&lc)?,
                "converged": converged,
                "iterations": o.trace.iterations,
                "final_gap": o.trace.final_gap,
                "predictor": canonical_value(&o.predictor)?,
                "report": canonical_value(&o.report)?,
            });
            out.add(&dir, "learn.json", to_canonical_json(&envelope("learn", body))?);
            let mut lines = String::new();
            for r in &o.trace.records {
                lines.push_str(&serde_json::to_string(&canonical_value(r)?)?);
                lines.push('\n');
            }
            let summary = json!({"summary": {"mode": lc.mode, "iterations": o.trace.iterations, "final_gap": o.trace.final_gap, "converged": converged}});
            lines.push_str(&serde_json::to_string(&canonical_value(&summary)?)?);
            lines.push('\n');
            out.add(&dir, "trace.jsonl", lines);
        }
        if want(Format::Csv) {
            out.add(&dir, "predictor.csv", predictor_csv(&o.predictor)?);
            out.add(&dir, "audit.csv", audit_csv(&o.report)?);
        }
        if want(Format::Plotdata) {
            let pts: Vec<(f64, f64)> = o.trace.records.iter().map(|r| (r.iteration as f64, r.gap.abs())).collect();
            out.add(&dir, "trace.tsv", plot_data(&pts));
            if let Some(alphas) = &cfg.sweep_alphas {
                let mut curve = Vec::new();
                for &a in alphas {
                    let mut sc = lc.clone();
                    sc.alpha = a;
                    sc.validate()?;
                    let (so, _) = run_learner(&inst, &sc)?;
                    let gap = audit_report(&inst.population, &inst.nature, &so.predictor, &inst.groups, &sc)?.max_gap;
                    curve.push((a, gap));
                }
                out.add(&dir, "gap-vs-alpha.tsv", plot_data(&curve));
            }
        }
    }
    Ok(())
}

fn rules(cfg: &RunConfig, out: &mut Artifacts, want: &dyn Fn(Format) -> bool) -> Result<()> {
    let spec = cfg.rules.as_ref().context("missing rules section")?;
    let rule = &spec.rule;
    let cert = affineness_distance(rule, spec.resolution)?;
    let lip = lipschitz_estimate(rule, spec.resolution)?;
    if want(Format::Json) {
        let body = json!({
            "rule": canonical_value(rule)?,
            "affine": rule.is_ita() || cert.epsilon == 0.0,
            "affineness": canonical_value(&cert)?,
            "lipschitz": lip.finite(),
            "projection": canonical_value(&affine_projection(rule))?,
        });
        out.add("", "rules.json", to_canonical_json(&envelope("rules", body))?);
    }
    let grid = simplex_grid(rule.k(), spec.resolution);
    if want(Format::Csv) {
        let mut s: String = (0..rule.k()).map(|t| format!("y{t},")).collect();
        s.push_str("accept,projection\n");
        let proj = affine_projection(rule);
        for y in &grid {
            for v in y {
                s.push_str(&fmt_float(*v));
                s.push(',');
            }
            s.push_str(&format!("{},{}\n", fmt_float(rule.accept(y)), fmt_float(proj.accept(y))));
        }
        out.add("", "rule-grid.csv", s);
    }
    if want(Format::Plotdata) {
        let pts: Vec<(f64, f64)> = grid.iter().map(|y| (y[0], rule.accept(y))).collect();
        out.add("", "rule.tsv", plot_data(&pts));
    }
    Ok(())
}

fn omni(cfg: &RunConfig, out: &mut Artifacts, want: &dyn Fn(Format) -> bool) -> Result<()> {
    let spec = cfg.omnipredict.as_ref().context("missing omnipredict section")?;
    let inst = load_instance(cfg)?;
    let pred = inst.predictor.as_ref().context("omnipredict needs an instance with a predictor")?;
    let d = Discretization::new(spec.lambda)?;
    let o = omnipredict(&inst.population, &inst.nature, pred, &spec.loss, &inst.groups, &d)?;
    let hs = indicator_class(inst.population.size(), &inst.groups);
    let gap = loss_gap(&inst.population, &inst.nature, &o.action, &spec.loss, &hs)?;
    let verdict = if gap <= o.bound + 1e-12 { Verdict::Pass } else { Verdict::Fail };
    out.failed |= verdict == Verdict::Fail;
    if want(Format::Json) {
        let body = json!({
            "alpha": o.alpha,
            "lambda": o.lambda,
            "bound": o.bound,
            "loss_gap": gap,
            "action": o.action.values(),
            "verdict": verdict,
        });
        out.add("", "omnipredict.json", to_canonical_json(&envelope("omnipredict", body))?);
    }
    if want(Format::Csv) {
        let mut s = String::from("element,accept\n");
        for (x, v) in o.action.values().iter().enumerate() {
            s.push_str(&format!("{x},{}\n", fmt_float(*v)));
        }
        out.add("", "action.csv", s);
    }
    if want(Format::Plotdata) {
        out.add("", "omnipredict.tsv", plot_data(&[(o.alpha, gap)]));
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn hardness(cfg: &RunConfig, out: &mut Artifacts, want: &dyn Fn(Format) -> bool) -> Result<()> {
    let spec = cfg.hardness.as_ref().context("missing hardness section")?;
    let mut exp = spec.experiment.clone();
    exp.seeds = cfg.seeds.clone();
    exp.validate()?;
    let report: ConflictReport = match exp.experiment {
        ExperimentKind::DecisionConflict => {
            let rule = match &spec.rule {
                Some(r) => r.clone(),
                None => DecisionRule::step(2, 0, 0.95)?,
            };
            run_decision_conflict_experiment(&rule, &exp)?
        }
        ExperimentKind::LossConflict => {
            let loss = match &spec.loss {
                Some(l) => l.clone(),
                None => LossFunction::zero_one(),
            };
            run_loss_conflict_experiment(&loss, &exp)?
        }
    };
    out.failed |= report.verdict == Verdict::Fail;
    if want(Format::Json) {
        out.add("", "conflict-report.json", to_canonical_json(&report)?);
    }
    if want(Format::Csv) {
        let mut s = String::from("trial,seed,key,gamma,realized_fraction,calibration_error,iterations,converged,mad_error,mac_error,loss_gap,bound,tolerance,verdict\n");
        for t in &report.trials {
            let verdict = serde_json::to_value(t.verdict)?;
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                t.trial,
                t.seed,
                t.key.hex(),
                fmt_float(t.gamma),
                fmt_float(t.realized_fraction),
                fmt_float(t.calibration_error),
                t.iterations,
                t.converged,
                opt(t.mad_error),
                opt(t.mac_error),
                opt(t.loss_gap),
                fmt_float(t.bound),
                fmt_float(t.tolerance),
                verdict.as_str().unwrap_or_default(),
            ));
        }
        out.add("", "trials.csv", s);
    }
    if want(Format::Plotdata) {
        let pts: Vec<(f64, f64)> = report
            .trials
            .iter()
            .map(|t| {
                let y = match exp.experiment {
                    ExperimentKind::DecisionConflict => t.mad_error.unwrap_or(0.0),
                    ExperimentKind::LossConflict => {
                        t.battery.iter().filter(|b| b.accurate).map(|b| b.loss_gap).fold(f64::INFINITY, f64::min)
                    }
                };
                (t.trial as f64, if y.is_finite() { y } else { 0.0 })
            })
            .collect();
        out.add("", "trials.tsv", plot_data(&pts));
    }
    Ok(())
}

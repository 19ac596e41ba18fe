//! Acceptance criteria. Each test prints one `acceptance N: PASS|FAIL | ...`
//! line straight to stdout so the lines survive output capture.
//!
//! Every criterion is computed by a `run_cN` fixture function returning a
//! verdict, a detail string and a canonical artifact; criterion 11 re-runs
//! all fixtures and compares the artifacts byte for byte.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use calibra::hardness::{
    hash_groups, indistinguishability_probe, pr_subset, run_decision_conflict_experiment, run_loss_conflict_experiment, ExperimentConfig, PrfKey,
    Verdict,
};
use calibra::learn::{
    expectation_target, indicator_class, learn_multiaccurate, learn_multicalibrated, learn_oi_loss_family, learn_scalar_calibrated, lift_scalar,
    loss_weighted_target, omnipredict, LearnMode, LearnerConfig,
};
use calibra::metrics::{exp_loss, loss_gap, ma_error, mac_error, mad_error, mc_cw_error, mc_full_error};
use calibra::report::to_canonical_json;
use calibra::rules::{affineness_distance, compose, ita_rule, loss_min_rule, mac_rule, AffineWitness};
use calibra::{
    ActionFunction, Assignment, AuditReport, DecisionRule, Discretization, Group, GroupCollection, LossFunction, MaMode, Nature, Population, Predictor,
    RandomStream, TypeSpace,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

struct Outcome {
    pass: bool,
    detail: String,
    artifact: String,
    elapsed: Duration,
}

fn report_line(id: &str, o: &Outcome) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "acceptance {id}: {} | {} | {:.1}s", if o.pass { "PASS" } else { "FAIL" }, o.detail, o.elapsed.as_secs_f64()).unwrap();
}

fn timed(f: impl FnOnce() -> (bool, String, String)) -> Outcome {
    let t = Instant::now();
    let (pass, detail, artifact) = f();
    Outcome { pass, detail, artifact, elapsed: t.elapsed() }
}

// ---------------------------------------------------------------------------
// Instance generation

fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    RandomStream::new(seed).derive(label).rng()
}

fn random_point<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

struct Inst {
    pop: Population,
    nature: Nature,
    groups: GroupCollection,
}

struct Shape {
    n: usize,
    k: usize,
    groups: usize,
    deterministic: bool,
    weighted: bool,
    types: TypeSpace,
    /// Lower bound on each random group's inclusion probability.
    min_fraction: f64,
}

fn instance<R: Rng>(s: &Shape, rng: &mut R) -> Inst {
    let pop = if s.weighted {
        let w: Vec<f64> = (0..s.n).map(|_| rng.gen_range(0.2..1.0)).collect();
        let t: f64 = w.iter().sum();
        Population::weighted(w.iter().map(|v| v / t).collect()).unwrap()
    } else {
        Population::uniform(s.n).unwrap()
    };
    let nature = if s.deterministic {
        let labels: Vec<usize> = (0..s.n).map(|_| rng.gen_range(0..s.k)).collect();
        Nature::from_labels(s.types.clone(), &labels).unwrap()
    } else {
        let rows: Vec<Vec<f64>> = (0..s.n).map(|_| random_point(s.k, rng)).collect();
        Nature::new(s.types.clone(), &rows).unwrap()
    };
    let mut gs = vec![Group::full(s.n)];
    while gs.len() < s.groups {
        let f = rng.gen_range(s.min_fraction..0.9);
        let mask: Vec<bool> = (0..s.n).map(|_| rng.gen_bool(f)).collect();
        if mask.iter().filter(|&&b| b).count() >= 2 {
            gs.push(Group::from_mask(format!("g{}", gs.len()), &mask));
        }
    }
    Inst { pop, nature, groups: GroupCollection::new(s.n, gs).unwrap() }
}

fn deltas(inst: &Inst) -> Vec<f64> {
    inst.groups.groups().iter().map(|g| g.members().iter().map(|&x| inst.pop.weight(x)).sum()).collect()
}

// ---------------------------------------------------------------------------
// Criterion 1: brute-force oracle

type Table = BTreeMap<String, f64>;

fn bin(v: f64, bins: usize) -> usize {
    ((v * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

fn center_key(bins: &[usize], nb: usize) -> String {
    bins.iter().map(|&j| format!("{:.9}", (j as f64 + 0.5) / nb as f64)).collect::<Vec<_>>().join(";")
}

fn library_table(r: &AuditReport) -> Table {
    r.entries
        .iter()
        .map(|e| {
            let c = &e.constraint;
            let slice = c.slice.map(|s| format!("{s:?}")).unwrap_or_default();
            let cell = c.cell.as_ref().map(|v| v.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>().join(";")).unwrap_or_default();
            (format!("{}|{}|{}", c.group, slice, cell), e.gap)
        })
        .collect()
}

/// Signed gaps `E[(n_t - p_t) 1{x in S}]` by direct loops.
fn oracle_ma(inst: &Inst, pred: &Predictor, threshold: bool) -> Table {
    let k = inst.nature.k();
    let mut out = Table::new();
    for g in inst.groups.groups() {
        let slices: Vec<(String, Vec<usize>)> = if threshold {
            (1..k).map(|tau| (format!("Above({tau})"), (tau..k).collect())).collect()
        } else {
            (0..k).map(|t| (format!("Type({t})"), vec![t])).collect()
        };
        for (name, coords) in slices {
            let mut s = 0.0;
            for x in 0..inst.pop.size() {
                if !g.contains(x) {
                    continue;
                }
                for &t in &coords {
                    s += inst.pop.weight(x) * (inst.nature.at(x)[t] - pred.at(x)[t]);
                }
            }
            out.insert(format!("{}|{}|", g.id, name), s);
        }
    }
    out
}

fn oracle_mc_cw(inst: &Inst, pred: &Predictor, nb: usize) -> Table {
    let k = inst.nature.k();
    let mut out = Table::new();
    for g in inst.groups.groups() {
        for t in 0..k {
            for j in 0..nb {
                let mut s = 0.0;
                let mut any = false;
                for x in 0..inst.pop.size() {
                    if g.contains(x) && bin(pred.at(x)[t], nb) == j {
                        any = true;
                        s += inst.pop.weight(x) * (inst.nature.at(x)[t] - pred.at(x)[t]);
                    }
                }
                if any {
                    out.insert(format!("{}|Type({t})|{}", g.id, center_key(&[j], nb)), s);
                }
            }
        }
    }
    out
}

fn oracle_mc_full(inst: &Inst, pred: &Predictor, nb: usize) -> Table {
    let k = inst.nature.k();
    let mut out = Table::new();
    for g in inst.groups.groups() {
        let cells: Vec<Vec<usize>> = (0..inst.pop.size()).map(|x| (0..k).map(|t| bin(pred.at(x)[t], nb)).collect()).collect();
        let mut distinct: Vec<Vec<usize>> = (0..inst.pop.size()).filter(|&x| g.contains(x)).map(|x| cells[x].clone()).collect();
        distinct.sort();
        distinct.dedup();
        for cell in &distinct {
            for t in 0..k {
                let mut s = 0.0;
                for x in 0..inst.pop.size() {
                    if g.contains(x) && &cells[x] == cell {
                        s += inst.pop.weight(x) * (inst.nature.at(x)[t] - pred.at(x)[t]);
                    }
                }
                out.insert(format!("{}|Type({t})|{}", g.id, center_key(cell, nb)), s);
            }
        }
    }
    out
}

fn oracle_conditional(inst: &Inst, reference: &dyn Fn(usize) -> f64, candidate: &dyn Fn(usize) -> f64) -> Table {
    let mut out = Table::new();
    for g in inst.groups.groups() {
        let (mut num, mut den) = (0.0, 0.0);
        for x in 0..inst.pop.size() {
            if g.contains(x) {
                let w = inst.pop.weight(x);
                den += w;
                num += w * (reference(x) - candidate(x));
            }
        }
        out.insert(format!("{}||", g.id), num / den);
    }
    out
}

fn compare(name: &str, lib: &Table, oracle: &Table) -> Result<f64, String> {
    if lib.len() != oracle.len() || lib.keys().zip(oracle.keys()).any(|(a, b)| a != b) {
        let missing: Vec<_> = oracle.keys().filter(|k| !lib.contains_key(*k)).take(3).collect();
        let extra: Vec<_> = lib.keys().filter(|k| !oracle.contains_key(*k)).take(3).collect();
        return Err(format!("{name}: constraint sets differ (missing {missing:?}, extra {extra:?})"));
    }
    Ok(lib.values().zip(oracle.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn run_c1() -> Outcome {
    timed(|| {
        let mut worst: f64 = 0.0;
        let mut errors = Vec::new();
        let mut summary = Vec::new();
        for i in 0..100u64 {
            let mut rng = rng_for(i, "c1");
            let k = rng.gen_range(2..=4);
            let shape = Shape {
                n: rng.gen_range(4..=256),
                k,
                groups: rng.gen_range(1..=8),
                deterministic: rng.gen_bool(0.5),
                weighted: rng.gen_bool(0.5),
                types: TypeSpace::new(k).unwrap(),
                min_fraction: 0.05,
            };
            let inst = instance(&shape, &mut rng);
            let rows: Vec<Vec<f64>> = (0..shape.n).map(|_| random_point(k, &mut rng)).collect();
            let pred = Predictor::new(k, &rows).unwrap();
            let nb = [2usize, 4, 8, 10][rng.gen_range(0..4)];
            let d = Discretization::new(1.0 / nb as f64).unwrap();
            let g: Vec<f64> = (0..k).map(|_| rng.gen()).collect();
            let ita = ita_rule(&g).unwrap();
            let (coord, level) = (rng.gen_range(0..k), rng.gen_range(0.05..0.95));
            let step = DecisionRule::step(k, coord, level).unwrap();
            let loss = LossFunction::random_nontrivial(k, &mut rng);
            let h = compose(&mac_rule(&loss), &pred);

            let reports = [
                ma_error(&inst.pop, &inst.nature, &pred, &inst.groups, MaMode::CoordinateWise).unwrap(),
                ma_error(&inst.pop, &inst.nature, &pred, &inst.groups, MaMode::Threshold).unwrap(),
                mc_cw_error(&inst.pop, &inst.nature, &pred, &inst.groups, &d).unwrap(),
                mc_full_error(&inst.pop, &inst.nature, &pred, &inst.groups, &d).unwrap(),
                mad_error(&inst.pop, &inst.nature, &pred, &ita, &inst.groups).unwrap(),
                mad_error(&inst.pop, &inst.nature, &pred, &step, &inst.groups).unwrap(),
                mac_error(&inst.pop, &inst.nature, &h, &loss, &inst.groups).unwrap(),
            ];
            let ita_at = |y: &[f64]| y.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
            let step_at = |y: &[f64]| if y[coord] >= level { 1.0 } else { 0.0 };
            let d_at = |y: &[f64]| (0..k).map(|t| y[t] * (loss.table()[t][1] - loss.table()[t][0])).sum::<f64>();
            let accept_better: Vec<f64> = (0..k).map(|t| if loss.table()[t][1] < loss.table()[t][0] { 1.0 } else { 0.0 }).collect();
            let h_oracle = |x: usize| pred.at(x).iter().zip(&accept_better).map(|(a, b)| a * b).sum::<f64>();
            let oracles = [
                oracle_ma(&inst, &pred, false),
                oracle_ma(&inst, &pred, true),
                oracle_mc_cw(&inst, &pred, nb),
                oracle_mc_full(&inst, &pred, nb),
                oracle_conditional(&inst, &|x| ita_at(inst.nature.at(x)), &|x| ita_at(pred.at(x))),
                oracle_conditional(&inst, &|x| step_at(inst.nature.at(x)), &|x| step_at(pred.at(x))),
                oracle_conditional(&inst, &|x| if d_at(inst.nature.at(x)) < 0.0 { 1.0 } else { 0.0 }, &h_oracle),
            ];
            for (r, o) in reports.iter().zip(&oracles) {
                match compare(&r.metric, &library_table(r), o) {
                    Ok(e) => worst = worst.max(e),
                    Err(e) => errors.push(format!("instance {i}: {e}")),
                }
                let omax = o.values().map(|v| v.abs()).fold(0.0, f64::max);
                worst = worst.max((omax - r.max_gap).abs());
            }
            let lib_loss = exp_loss(&inst.pop, &inst.nature, &h, &loss).unwrap();
            let mut oracle_loss = 0.0;
            for x in 0..shape.n {
                for t in 0..k {
                    let a = h_oracle(x);
                    oracle_loss += inst.pop.weight(x) * inst.nature.at(x)[t] * (a * loss.table()[t][1] + (1.0 - a) * loss.table()[t][0]);
                }
            }
            worst = worst.max((lib_loss - oracle_loss).abs());
            summary.push(json!({
                "instance": i,
                "max_gaps": reports.iter().map(|r| r.max_gap).collect::<Vec<_>>(),
                "entries": reports.iter().map(|r| r.entries.len()).collect::<Vec<_>>(),
                "exp_loss": lib_loss,
            }));
        }
        let pass = errors.is_empty() && worst <= 1e-12;
        let detail = if errors.is_empty() {
            format!("100 instances, 7 audits + expected loss each, max |library - oracle| = {worst:.2e} (tol 1e-12)")
        } else {
            format!("{} mismatches, first: {}", errors.len(), errors[0])
        };
        (pass, detail, to_canonical_json(&summary).unwrap())
    })
}

// ---------------------------------------------------------------------------
// Criteria 2-4: MA implies decision-level accuracy

const MA_ALPHA: f64 = 0.02;

struct Learned {
    inst: Inst,
    pred: Predictor,
}

fn learned_ma(seed: u64, label: &str, mode: LearnMode, deterministic: bool, ordered: bool) -> Learned {
    let mut rng = rng_for(seed, label);
    let k = rng.gen_range(2..=4);
    let shape = Shape {
        n: rng.gen_range(48..=128),
        k,
        groups: rng.gen_range(2..=5),
        deterministic,
        weighted: rng.gen_bool(0.3),
        types: if ordered { TypeSpace::ordered(k).unwrap() } else { TypeSpace::new(k).unwrap() },
        min_fraction: 0.2,
    };
    let inst = instance(&shape, &mut rng);
    let cfg = LearnerConfig::new(mode, MA_ALPHA);
    let out = learn_multiaccurate(&inst.pop, &inst.nature, &inst.groups, &cfg, None).expect("learner converges");
    let mm = if mode == LearnMode::MaThreshold { MaMode::Threshold } else { MaMode::CoordinateWise };
    let re = ma_error(&inst.pop, &inst.nature, &out.predictor, &inst.groups, mm).unwrap();
    assert!(re.max_gap <= MA_ALPHA + 1e-12, "re-audit {} > alpha", re.max_gap);
    Learned { inst, pred: out.predictor }
}

/// Per-group MAD gaps for a battery of rules, with bound `scale * alpha / delta`.
fn mad_battery(l: &Learned, rules: &[DecisionRule], scale: f64) -> (f64, f64, Vec<f64>) {
    let ds = deltas(&l.inst);
    let (mut worst_excess, mut best_ratio) = (f64::NEG_INFINITY, 0.0f64);
    let mut gaps = Vec::new();
    for r in rules {
        let rep = mad_error(&l.inst.pop, &l.inst.nature, &l.pred, r, &l.inst.groups).unwrap();
        for (e, d) in rep.entries.iter().zip(&ds) {
            let bound = scale * MA_ALPHA / d;
            worst_excess = worst_excess.max(e.gap.abs() - bound);
            best_ratio = best_ratio.max(e.gap.abs() / bound);
            gaps.push(e.gap);
        }
    }
    (worst_excess, best_ratio, gaps)
}

struct C2 {
    outcome: Outcome,
    ratio: f64,
    tight_ratio: f64,
}

fn run_c2() -> C2 {
    let mut ratio = 0.0f64;
    let mut tight_ratio = 0.0f64;
    let outcome = timed(|| {
        let mut worst = f64::NEG_INFINITY;
        let mut art = Vec::new();
        for i in 0..50u64 {
            let l = learned_ma(i, "c2", LearnMode::MaCw, i % 2 == 0, false);
            let k = l.inst.nature.k();
            let mut rng = rng_for(i, "c2-rules");
            let rules: Vec<DecisionRule> = (0..20).map(|_| ita_rule(&(0..k).map(|_| rng.gen()).collect::<Vec<f64>>()).unwrap()).collect();
            let (excess, r, gaps) = mad_battery(&l, &rules, k as f64);
            worst = worst.max(excess);
            ratio = ratio.max(r);
            // The MA gaps of a group sum to zero, so an ITA rule can collect at most
            // the positive half of them: |MAD| <= (k/2) alpha / delta.
            tight_ratio = tight_ratio.max(2.0 * r);
            art.push(json!({"instance": i, "k": k, "mad_gaps": gaps}));
        }
        let pass = worst <= 1e-12;
        (pass, format!("50 learned MA predictors x 20 ITA rules, max (|MAD| - k*alpha/delta) = {worst:.3e}"), to_canonical_json(&art).unwrap())
    });
    C2 { outcome, ratio, tight_ratio }
}

fn run_c3() -> Outcome {
    timed(|| {
        let mut worst = f64::NEG_INFINITY;
        let mut ratio = 0.0f64;
        let mut art = Vec::new();
        for i in 0..50u64 {
            let l = learned_ma(i, "c3", LearnMode::MaThreshold, i % 2 == 0, true);
            let k = l.inst.nature.k();
            let mut rules: Vec<DecisionRule> = (1..k).map(|c| DecisionRule::threshold(k, c).unwrap()).collect();
            // Monotone 0/1 ITA rules written out explicitly as unit-vector tables.
            rules.extend((1..k).map(|c| ita_rule(&(0..k).map(|t| if t < c { 1.0 } else { 0.0 }).collect::<Vec<_>>()).unwrap()));
            let (excess, r, gaps) = mad_battery(&l, &rules, 1.0);
            worst = worst.max(excess);
            ratio = ratio.max(r);
            art.push(json!({"instance": i, "mad_gaps": gaps}));
        }
        (
            worst <= 1e-12,
            format!("50 threshold-MA predictors, ordered types, monotone 0/1 rules: max (|MAD| - alpha/delta) = {worst:.3e}, max ratio {ratio:.3}"),
            to_canonical_json(&art).unwrap(),
        )
    })
}

fn run_c4() -> Outcome {
    timed(|| {
        let mut worst = f64::NEG_INFINITY;
        let mut art = Vec::new();
        for i in 0..50u64 {
            let l = learned_ma(i, "c4", LearnMode::MaCw, true, false);
            let k = l.inst.nature.k();
            let ds = deltas(&l.inst);
            let mut rng = rng_for(i, "c4-losses");
            for _ in 0..5 {
                let loss = LossFunction::random_nontrivial(k, &mut rng);
                let h = compose(&mac_rule(&loss), &l.pred);
                let rep = mac_error(&l.inst.pop, &l.inst.nature, &h, &loss, &l.inst.groups).unwrap();
                for (e, d) in rep.entries.iter().zip(&ds) {
                    worst = worst.max(e.gap.abs() - k as f64 * MA_ALPHA / d);
                }
                art.push(json!({"instance": i, "mac": rep.entries.iter().map(|e| e.gap).collect::<Vec<_>>()}));
            }
        }
        (worst <= 1e-12, format!("50 deterministic instances x 5 losses: max (|MAC| - k*alpha/delta) = {worst:.3e}"), to_canonical_json(&art).unwrap())
    })
}

// ---------------------------------------------------------------------------
// Criterion 5: conversion witnesses

fn run_c5() -> Outcome {
    timed(|| {
        let (k, alpha) = (4usize, 0.05);
        let pop = Population::uniform(8).unwrap();
        let c = GroupCollection::new(8, vec![Group::full(8)]).unwrap();
        let uniform = vec![1.0 / k as f64; k];
        let nature = Nature::new(TypeSpace::ordered(k).unwrap(), &vec![uniform.clone(); 8]).unwrap();

        // Threshold-alpha predictor whose coordinate-wise error is 2 alpha:
        // +alpha at rank k, -2 alpha at rank k-1, +alpha at rank k-2.
        let mut y = uniform.clone();
        y[k - 1] += alpha;
        y[k - 2] -= 2.0 * alpha;
        y[k - 3] += alpha;
        let p1 = Predictor::new(k, &vec![y; 8]).unwrap();
        let th1 = ma_error(&pop, &nature, &p1, &c, MaMode::Threshold).unwrap().max_gap;
        let cw1 = ma_error(&pop, &nature, &p1, &c, MaMode::CoordinateWise).unwrap().max_gap;

        // Coordinate-wise-alpha predictor whose threshold error is (k/2) alpha:
        // +alpha on the top half of the ranks, -alpha on the bottom half.
        let y: Vec<f64> = (0..k).map(|t| uniform[t] + if t < k / 2 { alpha } else { -alpha }).collect();
        let p2 = Predictor::new(k, &vec![y; 8]).unwrap();
        let th2 = ma_error(&pop, &nature, &p2, &c, MaMode::Threshold).unwrap().max_gap;
        let cw2 = ma_error(&pop, &nature, &p2, &c, MaMode::CoordinateWise).unwrap().max_gap;

        let errs = [(th1 - alpha).abs(), (cw1 - 2.0 * alpha).abs(), (cw2 - alpha).abs(), (th2 - k as f64 / 2.0 * alpha).abs()];
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        (
            worst <= 1e-12,
            format!("k=4, alpha=0.05: threshold {th1:.12} -> cw {cw1:.12} (2 alpha); cw {cw2:.12} -> threshold {th2:.12} (k/2 alpha); max err {worst:.1e}"),
            to_canonical_json(&json!([th1, cw1, th2, cw2])).unwrap(),
        )
    })
}

// ---------------------------------------------------------------------------
// Criterion 6: loss-minimizing rules are 1/2-far from affine

fn run_c6() -> Outcome {
    timed(|| {
        let mut rng = rng_for(6, "c6");
        let mut at_witness = Vec::new();
        let mut searched = Vec::new();
        for i in 0..20 {
            let k = 2 + i % 3;
            let loss = LossFunction::random_nontrivial(k, &mut rng);
            let cert = loss.certificate().unwrap().clone();
            let rule = loss_min_rule(&loss);
            let w = AffineWitness::unit_pair(cert.reject_type, cert.accept_type, k).unwrap();
            at_witness.push(w.violation(&rule));
            searched.push(affineness_distance(&rule, 10).unwrap().epsilon);
        }
        let exact = at_witness.iter().all(|&v| v == 0.5);
        let overall = searched.iter().all(|&v| v >= 0.5);
        let min_search = searched.iter().cloned().fold(f64::INFINITY, f64::min);
        (
            exact && overall,
            format!("20 random nontrivial losses: witness violation exactly 0.5 in {}/20, min searched distance {min_search}", at_witness.iter().filter(|&&v| v == 0.5).count()),
            to_canonical_json(&json!({"witness": at_witness, "search": searched})).unwrap(),
        )
    })
}

// ---------------------------------------------------------------------------
// Criterion 7: omniprediction and its relaxations

fn scalar_predictor(q: &[f64]) -> Predictor {
    Predictor::new(2, &q.iter().map(|&v| vec![v, 1.0 - v]).collect::<Vec<_>>()).unwrap()
}

/// Largest `|E[p* - p | X']|` over the regions `X'` where `h` and a benchmark
/// disagree, split by the benchmark's action.
fn disagreement_gap(pop: &Population, target: &[f64], pred: &[f64], h: &ActionFunction, hs: &[ActionFunction]) -> f64 {
    let mut worst = 0.0f64;
    for b in hs {
        for side in [0.0, 1.0] {
            let (mut num, mut den) = (0.0, 0.0);
            for x in 0..pop.size() {
                if b.values()[x] == side && h.values()[x] != side {
                    num += pop.weight(x) * (target[x] - pred[x]);
                    den += pop.weight(x);
                }
            }
            if den > 0.0 {
                worst = worst.max((num / den).abs());
            }
        }
    }
    worst
}

fn run_c7() -> Outcome {
    timed(|| {
        let mut fails = Vec::new();
        let mut art = Vec::new();
        let (mut r_full, mut r_611, mut r_612, mut r_613) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let mut r_612_cells = 0.0f64;
        for i in 0..30u64 {
            let mut rng = rng_for(i, "c7");
            let lambda = if i % 2 == 0 { 0.25 } else { 0.125 };
            let d = Discretization::new(lambda).unwrap();
            let k = rng.gen_range(2..=4);
            let n = rng.gen_range(32..=96);
            let base = Shape { n, k, groups: rng.gen_range(2..=4), deterministic: false, weighted: false, types: TypeSpace::new(k).unwrap(), min_fraction: 0.2 };
            let inst = instance(&base, &mut rng);
            let hs = indicator_class(n, &inst.groups);
            let loss = LossFunction::random_nontrivial(k, &mut rng);

            // Full multi-calibration then rho*_l.
            let cfg = LearnerConfig::new(LearnMode::McFull, 0.02).with_lambda(lambda);
            let mc = learn_multicalibrated(&inst.pop, &inst.nature, &inst.groups, &cfg, None).expect("mc learner converges");
            let o = omnipredict(&inst.pop, &inst.nature, &mc.predictor, &loss, &inst.groups, &d).unwrap();
            let g_full = loss_gap(&inst.pop, &inst.nature, &o.action, &loss, &hs).unwrap();
            r_full = r_full.max(g_full / o.bound);
            if g_full > o.bound {
                fails.push(format!("instance {i}: full gap {g_full} > {}", o.bound));
            }

            // Expectation predictor on numeric types with a linear loss.
            let types = TypeSpace::numeric_grid(k).unwrap();
            let numeric = Nature::new(types.clone(), &(0..n).map(|x| inst.nature.at(x).to_vec()).collect::<Vec<_>>()).unwrap();
            let values: Vec<f64> = (0..k).map(|t| (t as f64 + 0.5) / k as f64).collect();
            let lin = LossFunction::linear(&values, [rng.gen(), rng.gen()], [rng.gen(), rng.gen()]).unwrap();
            let q_star = expectation_target(&numeric).unwrap();
            let scfg = LearnerConfig::new(LearnMode::ScalarMc, 0.02).with_lambda(lambda);
            let q = learn_scalar_calibrated(&inst.pop, &q_star, &inst.groups, &scfg).expect("scalar learner converges");
            let encoded = Nature::new(TypeSpace::new(2).unwrap(), &q_star.iter().map(|&v| vec![v, 1.0 - v]).collect::<Vec<_>>()).unwrap();
            let a_q = mc_full_error(&inst.pop, &encoded, &scalar_predictor(&q.predictor), &inst.groups, &d).unwrap().max_gap;
            let h_q = compose(&loss_min_rule(&lin), &lift_scalar(&q.predictor, &types).unwrap());
            let g_611 = loss_gap(&inst.pop, &numeric, &h_q, &lin, &hs).unwrap();
            let b_611 = 6.0 * (a_q + lambda);
            r_611 = r_611.max(g_611 / b_611);
            if g_611 > b_611 {
                fails.push(format!("instance {i}: expectation pipeline gap {g_611} > {b_611}"));
            }

            // Loss-weighted predictor, accept when p > 1/2.
            let p_star = loss_weighted_target(&inst.nature, &loss).unwrap();
            let p = learn_scalar_calibrated(&inst.pop, &p_star, &inst.groups, &scfg).expect("scalar learner converges");
            let h_p = ActionFunction::new(p.predictor.iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect()).unwrap();
            let g_612 = loss_gap(&inst.pop, &inst.nature, &h_p, &loss, &hs).unwrap();
            let a_p = disagreement_gap(&inst.pop, &p_star, &p.predictor, &h_p, &hs);
            let b_612 = 2.0 * a_p;
            r_612 = r_612.max(if b_612 > 0.0 { g_612 / b_612 } else { 0.0 });
            r_612_cells = r_612_cells.max(if p.report.max_gap > 0.0 { g_612 / (2.0 * p.report.max_gap) } else { 0.0 });
            if g_612 > b_612 + 1e-12 {
                fails.push(format!("instance {i}: loss-weighted gap {g_612} > {b_612}"));
            }

            // Outcome-indistinguishability over a loss family.
            let eps = 0.05;
            let small = GroupCollection::new(n, inst.groups.groups().iter().take(4).cloned().collect()).unwrap();
            let h_small = indicator_class(n, &small);
            let losses: Vec<LossFunction> = (0..rng.gen_range(1..=4)).map(|_| LossFunction::random_nontrivial(k, &mut rng)).collect();
            let oi = learn_oi_loss_family(&inst.pop, &inst.nature, &h_small, &losses, eps, &LearnerConfig::new(LearnMode::McFull, eps), None)
                .expect("oi learner converges");
            let mut g_613 = f64::NEG_INFINITY;
            for l in &losses {
                let h = compose(&loss_min_rule(l), &oi.predictor);
                g_613 = g_613.max(loss_gap(&inst.pop, &inst.nature, &h, l, &h_small).unwrap());
            }
            r_613 = r_613.max(g_613 / eps);
            if g_613 > eps {
                fails.push(format!("instance {i}: loss-family gap {g_613} > {eps}"));
            }
            art.push(json!({"instance": i, "full": [g_full, o.bound], "expectation": [g_611, b_611], "loss_weighted": [g_612, b_612], "family": [g_613, eps]}));
        }
        let detail = format!(
            "30 instances: max gap/bound full {r_full:.3}, expectation {r_611:.3}, loss-weighted {r_612:.3} (vs 2x max level-set gap: {r_612_cells:.3}), loss family {r_613:.3}{}",
            fails.first().map(|f| format!("; {} failures, first: {f}", fails.len())).unwrap_or_default()
        );
        (fails.is_empty(), detail, to_canonical_json(&art).unwrap())
    })
}

// ---------------------------------------------------------------------------
// Criteria 8-10: keyed experiments

fn run_c8() -> Outcome {
    timed(|| {
        let cfg = ExperimentConfig::decision_default();
        let rule = DecisionRule::step(2, 0, 0.95).unwrap();
        let rep = run_decision_conflict_experiment(&rule, &cfg).unwrap();
        let k = 2.0;
        let mut fails = Vec::new();
        let (mut max_cal, mut min_mad, mut max_ctrl) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
        for t in &rep.trials {
            let mad = t.mad_error.unwrap_or(f64::NAN);
            max_cal = max_cal.max(t.calibration_error);
            min_mad = min_mad.min(mad);
            if !(t.calibration_error <= 0.01 && mad >= 0.25 - 0.05) {
                fails.push(format!("trial {}: mc_cw {} mad {}", t.trial, t.calibration_error, mad));
            }
            let ctrl = t.control.as_ref().expect("key-aware control is run");
            for g in &ctrl.groups {
                let excess = g.gap.abs() - (k * cfg.alpha / g.mass + 0.02);
                max_ctrl = max_ctrl.max(excess);
                if excess > 0.0 {
                    fails.push(format!("trial {} control group {}: {} too large", t.trial, g.group, g.gap));
                }
            }
        }
        let pass = fails.is_empty() && rep.trials.len() == 20 && rep.verdict == Verdict::Pass;
        let detail = format!(
            "20 keys, |X|=2^16: max mc_cw {max_cal:.5} (<= 0.01), min MAD {min_mad:.4} (>= 0.2), control max excess over k*alpha/delta+0.02 = {max_ctrl:.4}, verdict {:?}{}",
            rep.verdict,
            fails.first().map(|f| format!("; first failure {f}")).unwrap_or_default()
        );
        (pass, detail, to_canonical_json(&rep).unwrap())
    })
}

fn run_c9() -> Outcome {
    timed(|| {
        let cfg = ExperimentConfig::loss_default();
        let rep = run_loss_conflict_experiment(&LossFunction::zero_one(), &cfg).unwrap();
        let floor = 0.125 - 0.025 - 0.01;
        let mut fails = Vec::new();
        let (mut min_gap, mut accurate) = (f64::INFINITY, 0usize);
        let (mut base_mac, mut base_gap) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for t in &rep.trials {
            for b in t.battery.iter().filter(|b| b.accurate) {
                accurate += 1;
                min_gap = min_gap.min(b.loss_gap);
                if b.loss_gap < floor {
                    fails.push(format!("trial {} {}: loss gap {}", t.trial, b.name, b.loss_gap));
                }
            }
            let base = t.baseline.as_ref().expect("key-aware baseline is run");
            base_mac = base_mac.max(base.mac_error);
            base_gap = base_gap.max(base.loss_gap);
            if !(base.mac_error <= 0.01 && base.loss_gap < 0.0) {
                fails.push(format!("trial {} baseline mac {} gap {}", t.trial, base.mac_error, base.loss_gap));
            }
        }
        let pass = fails.is_empty() && rep.trials.len() == 20 && accurate > 0;
        let detail = format!(
            "20 keys: {accurate} MAC-accurate key-oblivious actions, min loss gap {min_gap:.4} (>= {floor:.3}); baseline max mac {base_mac:.4}, max loss gap {base_gap:.4} (< 0), verdict {:?}{}",
            rep.verdict,
            fails.first().map(|f| format!("; first failure {f}")).unwrap_or_default()
        );
        (pass, detail, to_canonical_json(&rep).unwrap())
    })
}

fn run_c10() -> Outcome {
    timed(|| {
        let n = 1usize << 16;
        let pop = Population::uniform(n).unwrap();
        let probes = hash_groups(n, 64, &[0.25], &RandomStream::new(0x0B111005).derive("fraction-probes"), "p");
        let mut advs = Vec::new();
        for seed in 1..=20u64 {
            let s = pr_subset(PrfKey::from_seed(seed), 0.5, &pop).unwrap();
            advs.push(indistinguishability_probe(&s, &probes, &pop).unwrap().max_advantage);
        }
        let worst = advs.iter().cloned().fold(0.0, f64::max);
        (worst <= 0.03, format!("64 hash probes (fraction 1/4), 20 keys at gamma 1/2: max advantage {worst:.5} (<= 0.03)"), to_canonical_json(&advs).unwrap())
    })
}

// ---------------------------------------------------------------------------
// Cached fixtures

macro_rules! cached {
    ($name:ident, $ty:ty, $init:expr) => {
        fn $name() -> &'static $ty {
            static CELL: OnceLock<$ty> = OnceLock::new();
            CELL.get_or_init(|| $init)
        }
    };
}

cached!(c1, Outcome, run_c1());
cached!(c2, C2, run_c2());
cached!(c3, Outcome, run_c3());
cached!(c4, Outcome, run_c4());
cached!(c5, Outcome, run_c5());
cached!(c6, Outcome, run_c6());
cached!(c7, Outcome, run_c7());
cached!(c8, Outcome, run_c8());
cached!(c9, Outcome, run_c9());
cached!(c10, Outcome, run_c10());

fn check(id: &str, o: &Outcome, limit: Option<Duration>) {
    report_line(id, o);
    assert!(o.pass, "criterion {id} failed: {}", o.detail);
    if let Some(l) = limit {
        assert!(o.elapsed < l, "criterion {id} took {:?} (limit {l:?})", o.elapsed);
    }
}

#[test]
fn criterion_01_exactness_oracle() {
    check("1", c1(), Some(Duration::from_secs(10)));
}

#[test]
fn criterion_02_ma_implies_mad() {
    let c = c2();
    check("2", &c.outcome, Some(Duration::from_secs(60)));
    let line = Outcome {
        pass: c.ratio >= 0.9,
        detail: format!(
            "non-vacuity: max |MAD| / (k*alpha/delta) = {:.4} (needs >= 0.9); max ratio to the attainable (k/2)*alpha/delta = {:.4}; MA gaps sum to zero per group so the ratio cannot exceed 1/2",
            c.ratio, c.tight_ratio
        ),
        artifact: String::new(),
        elapsed: c.outcome.elapsed,
    };
    report_line("2b", &line);
}

#[test]
#[ignore = "unattainable: |MAD| <= (k/2) alpha / delta for every ITA rule, half the stated bound"]
fn criterion_02b_non_vacuity_within_ten_percent() {
    let c = c2();
    assert!(c.ratio >= 0.9, "max ratio {}", c.ratio);
}

#[test]
fn criterion_03_threshold_refinement() {
    check("3", c3(), None);
}

#[test]
fn criterion_04_ma_implies_mac() {
    check("4", c4(), None);
}

#[test]
fn criterion_05_conversion_tightness() {
    check("5", c5(), None);
}

#[test]
fn criterion_06_loss_min_rule_far_from_affine() {
    check("6", c6(), None);
}

#[test]
fn criterion_07_omniprediction() {
    check("7", c7(), Some(Duration::from_secs(300)));
}

#[test]
fn criterion_08_decision_conflict() {
    check("8", c8(), Some(Duration::from_secs(300)));
}

#[test]
fn criterion_09_loss_conflict() {
    check("9", c9(), Some(Duration::from_secs(300)));
}

#[test]
fn criterion_10_fraction_preservation() {
    check("10", c10(), None);
}

#[test]
fn criterion_11_determinism() {
    let t = Instant::now();
    let reruns: Vec<(&str, &str, String)> = vec![
        ("1", &c1().artifact, run_c1().artifact),
        ("2", &c2().outcome.artifact, run_c2().outcome.artifact),
        ("3", &c3().artifact, run_c3().artifact),
        ("4", &c4().artifact, run_c4().artifact),
        ("5", &c5().artifact, run_c5().artifact),
        ("6", &c6().artifact, run_c6().artifact),
        ("7", &c7().artifact, run_c7().artifact),
        ("8", &c8().artifact, run_c8().artifact),
        ("9", &c9().artifact, run_c9().artifact),
        ("10", &c10().artifact, run_c10().artifact),
    ];
    let differing: Vec<&str> = reruns.iter().filter(|(_, a, b)| a.as_bytes() != b.as_bytes()).map(|(id, _, _)| *id).collect();
    let bytes: usize = reruns.iter().map(|(_, a, _)| a.len()).sum();
    let o = Outcome {
        pass: differing.is_empty(),
        detail: format!("10 fixtures re-run, {bytes} report bytes compared, differing: {differing:?}"),
        artifact: String::new(),
        elapsed: t.elapsed(),
    };
    check("11", &o, None);
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use super::config::*;
use super::output::{join_point, num, write_csv, write_json, write_text};
use super::svg::{render, Panel, Series};
use super::{compute, schema, CliError, IoArgs};
use crate::error::Error;
use crate::estimation::{
    concave_policy_learn, fit_choice_probit, heckman_with_choice, liv_estimate, mte_from_heckman,
    semiparametric_with_choice, LivFit,
};
use crate::model::dataset::same_point;
use crate::model::{
    simulate_generalized_roy, simulate_normal, Cell, Dataset, Direction, GeneralizedRoySpec, MteCurve, PropensityFn,
};
use crate::numerics::linspace;
use crate::policy::{assemble_rule, lambda_eval, solve_cell, solve_general, Method, SolveResult};
use crate::ranking::{rank_list, IdentifiedMteSet, NamedRule};
use crate::welfare::{validate_weights, welfare_of_rule, SubsidyRule};
use crate::comparison::welfare_ladder;

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| schema(format!("cannot create {}: {e}", dir.display())))
}

fn truth_knot_grid() -> Vec<f64> {
    linspace(0.005, 0.995, 199)
}

pub fn simulate(a: &IoArgs) -> Result<(), CliError> {
    let (cfg, _): (SimulateConfig, _) = load(&a.config)?;
    if cfg.n == 0 {
        return Err(schema("n must be at least 1"));
    }
    let sim = CliError::Simulation;
    let (data, truth) = match &cfg.model {
        SimModel::Normal { params, x, w, z } => {
            let params = params.get()?;
            for check in [params.validate(), x.validate(), w.validate(), z.validate()] {
                check.map_err(schema)?;
            }
            let data = simulate_normal(&params, cfg.n, x, w, z, cfg.seed).map_err(sim)?;
            let mte = MteCurve::from_params(&params);
            let propensity = PropensityFn::probit(params.beta_d.clone(), params.gamma);
            let u = truth_knot_grid();
            let knots: Vec<Value> = x
                .support()
                .unwrap_or_default()
                .into_iter()
                .map(|(xv, weight)| {
                    let m = mte.at(&xv)?;
                    Ok(json!({ "x": xv, "weight": weight, "u": u, "mte": u.iter().map(|&t| m.value(t)).collect::<Vec<_>>() }))
                })
                .collect::<Result<_, Error>>()
                .map_err(sim)?;
            let truth = json!({
                "model": "normal",
                "n": cfg.n,
                "seed": cfg.seed,
                "params": params,
                "mte_slope": params.mte_slope(),
                "mte": mte,
                "propensity": propensity,
                "knots": knots,
            });
            (data, truth)
        }
        SimModel::GeneralizedRoy { utility, delta, v, x, w, z, bins } => {
            let direction = if utility.delta > 0.0 {
                Direction::Increasing
            } else if utility.delta < 0.0 {
                Direction::Decreasing
            } else {
                return Err(schema("utility.delta must be nonzero"));
            };
            if utility.w.len() != w.dim() {
                return Err(schema(format!("utility.w has {} entries, instruments have {}", utility.w.len(), w.dim())));
            }
            let u = utility.clone();
            let spec = GeneralizedRoySpec::new(
                move |_x: &[f64], wv: &[f64], zv: f64, d: f64, vv: f64| {
                    u.intercept + u.delta * d + u.z * zv + u.w.iter().zip(wv).map(|(a, b)| a * b).sum::<f64>() + vv
                },
                delta.clone(),
                v.clone(),
                direction,
            );
            let c = simulate_generalized_roy(&spec, cfg.n, x, w, z, cfg.seed, *bins).map_err(sim)?;
            let truth = json!({
                "model": "generalized_roy",
                "n": cfg.n,
                "seed": cfg.seed,
                "direction": direction,
                "mte": c.mte,
                "propensity": c.propensity,
                "bins": c.bins,
            });
            (c.data, truth)
        }
    };
    prepare_out(&a.out)?;
    let f = std::fs::File::create(a.out.join("data.csv")).map_err(|e| compute(e.into()))?;
    data.write_csv(std::io::BufWriter::new(f)).map_err(compute)?;
    write_json(&a.out, "truth.json", &truth)
}

struct CurveOut {
    name: &'static str,
    mte: MteCurve,
}

pub fn estimate(a: &IoArgs) -> Result<(), CliError> {
    let (cfg, base): (EstimateConfig, _) = load(&a.config)?;
    let path = resolve(&base, &cfg.data);
    let data = Dataset::read_csv_path(&path).map_err(|e| schema(format!("{}: {e}", path.display())))?;
    data.validate().map_err(schema)?;
    let curve_u = cfg.curve_grid.points()?;
    let liv_u = cfg.liv_grid.unwrap_or(cfg.curve_grid).points()?;
    if cfg.estimators.is_empty() {
        return Err(schema("no estimators requested"));
    }
    let x_names = cfg.x_names.clone().unwrap_or_else(|| (1..=data.x_dim).map(|k| format!("x{k}")).collect());
    if x_names.len() != data.x_dim {
        return Err(schema(format!("x_names has {} names for {} covariates", x_names.len(), data.x_dim)));
    }
    let choice = fit_choice_probit(&data).map_err(compute)?;
    let g = choice.propensity.clone();
    let mut out = serde_json::Map::new();
    out.insert("n".into(), json!(data.len()));
    out.insert("choice".into(), json!(choice));
    let mut curves = Vec::new();
    for est in &cfg.estimators {
        match est {
            Estimator::Heckman => {
                let fit = heckman_with_choice(&data, choice.clone()).map_err(compute)?;
                let mte = mte_from_heckman(&fit);
                out.insert(
                    "heckman".into(),
                    json!({ "table": fit.table(&x_names), "fit": fit, "mte": mte, "propensity": g }),
                );
                curves.push(CurveOut { name: "heckman", mte });
            }
            Estimator::Semiparametric => {
                let fit = semiparametric_with_choice(&data, &choice, cfg.degree).map_err(compute)?;
                let mte = fit.mte();
                out.insert("semiparametric".into(), json!({ "fit": fit, "mte": mte, "propensity": g }));
                curves.push(CurveOut { name: "semiparametric", mte });
            }
            Estimator::Liv => {
                let fit = match liv_estimate(&data, &g, &liv_u, cfg.bandwidth) {
                    Err(Error::EmptySet(why)) => {
                        log::warn!("liv: {why}");
                        out.insert("liv".into(), json!({ "fit": null, "identified": 0, "warnings": [why] }));
                        continue;
                    }
                    r => r.map_err(compute)?,
                };
                for w in &fit.warnings {
                    log::warn!("liv: {w}");
                }
                let mte = fit.mte.clone();
                out.insert("liv".into(), json!({ "fit": fit, "mte": mte, "propensity": g }));
                curves.push(CurveOut { name: "liv", mte });
            }
            Estimator::Concave => {
                let fits = concave_policy_learn(&data, Some(&g)).map_err(compute)?;
                out.insert("concave".into(), json!(fits));
            }
        }
    }
    let xs = data.distinct_x();
    let mut rows = Vec::new();
    let mut panels = Vec::new();
    if xs.len() <= 50 {
        for c in &curves {
            let mut series = Vec::new();
            for x in &xs {
                let m = c.mte.at(x).map_err(compute)?;
                let pts: Vec<(f64, f64)> = curve_u.iter().map(|&u| (u, m.value(u))).collect();
                for &(u, v) in &pts {
                    rows.push(vec![c.name.to_string(), join_point(x), num(u), num(v)]);
                }
                series.push(Series { label: format!("x = [{}]", join_point(x)), points: pts, dashed: false });
            }
            panels.push(Panel { title: format!("MTE ({})", c.name), x_label: "u".into(), series, markers: vec![] });
        }
    } else {
        log::warn!("{} distinct covariate values; skipping mte_curve.csv rows", xs.len());
    }
    prepare_out(&a.out)?;
    write_json(&a.out, "fit.json", &Value::Object(out))?;
    write_csv(&a.out, "mte_curve.csv", &["estimator", "x", "u", "mte"], &rows)?;
    if cfg.svg && !panels.is_empty() {
        write_text(&a.out, "mte.svg", &render(&panels))?;
    }
    Ok(())
}

fn field<T: DeserializeOwned>(v: &Value, key: &str, file: &Path) -> Result<T, CliError> {
    let f = v.get(key).ok_or_else(|| schema(format!("{} has no {key:?}", file.display())))?;
    serde_json::from_value(f.clone()).map_err(|e| schema(format!("{} {key:?}: {e}", file.display())))
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| schema(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| schema(format!("{}: {e}", path.display())))
}

fn estimator_key(e: Estimator) -> &'static str {
    match e {
        Estimator::Heckman => "heckman",
        Estimator::Semiparametric => "semiparametric",
        Estimator::Liv => "liv",
        Estimator::Concave => "concave",
    }
}

fn load_model(src: &ModelSource, base: &Path) -> Result<(MteCurve, PropensityFn), CliError> {
    match src {
        ModelSource::Inline { mte, propensity } => Ok((mte.clone(), propensity.clone())),
        ModelSource::Params { params } => {
            let p = params.get()?;
            p.validate().map_err(schema)?;
            Ok((MteCurve::from_params(&p), PropensityFn::probit(p.beta_d.clone(), p.gamma)))
        }
        ModelSource::Truth { path } => {
            let path = resolve(base, path);
            let v = read_json(&path)?;
            Ok((field(&v, "mte", &path)?, field(&v, "propensity", &path)?))
        }
        ModelSource::Fit { path, estimator } => {
            if *estimator == Estimator::Concave {
                return Err(schema("the concave learner does not produce an MTE curve"));
            }
            let path = resolve(base, path);
            let v = read_json(&path)?;
            let key = estimator_key(*estimator);
            let e = v.get(key).ok_or_else(|| schema(format!("{} has no {key} fit", path.display())))?;
            Ok((field(e, "mte", &path)?, field(e, "propensity", &path)?))
        }
    }
}

fn check_cells(cells: &[Cell]) -> Result<(), CliError> {
    if cells.is_empty() {
        return Err(schema("no cells given"));
    }
    validate_weights(cells).map_err(schema)
}

pub fn solve(a: &IoArgs) -> Result<(), CliError> {
    let (cfg, base): (SolveConfig, _) = load(&a.config)?;
    let (mte, g) = load_model(&cfg.model, &base)?;
    check_cells(&cfg.cells)?;
    cfg.cost.validate().map_err(schema)?;
    let space = cfg.action_space;
    if !(space[0].is_finite() && space[1].is_finite() && space[0] <= space[1]) {
        return Err(schema(format!("action space {space:?} is not an interval")));
    }
    let mut results: Vec<SolveResult> = Vec::with_capacity(cfg.cells.len());
    let mut fallback = Vec::with_capacity(cfg.cells.len());
    for cell in &cfg.cells {
        let r = solve_cell(&mte, &g, &cfg.cost, cell, space, cfg.method, cfg.grid_n);
        let explicit = matches!(cfg.method, Method::Positive | Method::Negative);
        match r {
            Err(Error::Assumption(why)) if explicit && cfg.fallback_general => {
                log::warn!("{}: {why}; falling back to grid search", cell.name());
                results.push(solve_general(&mte, &g, &cfg.cost, cell, space, cfg.grid_n).map_err(compute)?);
                fallback.push(true);
            }
            r => {
                results.push(r.map_err(compute)?);
                fallback.push(false);
            }
        }
    }
    let rule = assemble_rule(&results, &cfg.cells, space).map_err(compute)?;
    let report = welfare_of_rule(&mte, &g, &cfg.cost, &rule, cfg.baseline).map_err(compute)?;
    let table: Vec<Value> = results
        .iter()
        .zip(&fallback)
        .map(|(r, f)| {
            let mut v = serde_json::to_value(r).expect("serializable");
            v["fallback_general"] = json!(f);
            v
        })
        .collect();
    let rows: Vec<Vec<String>> = results
        .iter()
        .zip(&fallback)
        .map(|(r, f)| {
            vec![
                r.cell.clone(),
                num(r.z_star),
                num(r.u_star),
                r.kind.as_str().into(),
                num(r.lambda),
                num(r.welfare),
                f.to_string(),
            ]
        })
        .collect();
    prepare_out(&a.out)?;
    write_json(&a.out, "solve.json", &json!({ "results": table, "rule": rule, "welfare": report }))?;
    write_csv(&a.out, "solve.csv", &["cell", "z_star", "u_star", "kind", "lambda", "welfare", "fallback_general"], &rows)?;
    write_json(&a.out, "rule.json", &rule)?;
    write_json(&a.out, "welfare.json", &report)?;
    if cfg.svg {
        let zs = linspace(space[0], space[1], 201);
        let mut panels = Vec::new();
        for (cell, r) in cfg.cells.iter().zip(&results) {
            let (m, p) = (mte.at(&cell.x).map_err(compute)?, g.at_cell(cell).map_err(compute)?);
            let benefit: Vec<(f64, f64)> = zs.iter().map(|&z| (z, m.value(p.value(z).clamp(0.0, 1.0)))).collect();
            let cost: Vec<(f64, f64)> = benefit
                .iter()
                .map(|&(z, b)| (z, lambda_eval(&mte, &g, &cfg.cost, cell, z).map_or(f64::NAN, |l| b - l)))
                .collect();
            let mark = m.value(p.value(r.z_star).clamp(0.0, 1.0));
            panels.push(Panel {
                title: format!("{} ({})", cell.name(), r.kind.as_str()),
                x_label: "subsidy".into(),
                series: vec![
                    Series { label: "MTE at induced margin".into(), points: benefit, dashed: false },
                    Series { label: "marginal cost".into(), points: cost, dashed: true },
                ],
                markers: vec![(r.z_star, mark)],
            });
        }
        write_text(&a.out, "policy.svg", &render(&panels))?;
    }
    Ok(())
}

/// Groups cells by covariate value, keeping first-seen order.
fn group_by_x(cells: &[Cell]) -> Vec<(Vec<f64>, Vec<Cell>)> {
    let mut groups: Vec<(Vec<f64>, Vec<Cell>)> = Vec::new();
    for c in cells {
        match groups.iter_mut().find(|(x, _)| same_point(x, &c.x)) {
            Some((_, v)) => v.push(c.clone()),
            None => groups.push((c.x.clone(), vec![c.clone()])),
        }
    }
    groups
}

pub fn compare(a: &IoArgs) -> Result<(), CliError> {
    let (cfg, base): (CompareConfig, _) = load(&a.config)?;
    let (mte, g) = load_model(&cfg.model, &base)?;
    check_cells(&cfg.cells)?;
    let [lo, hi] = cfg.z_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(schema(format!("z_range {:?} is not an interval", cfg.z_range)));
    }
    let mut ladders = Vec::new();
    let mut total: BTreeMap<&str, f64> = BTreeMap::new();
    for (x, mut cells) in group_by_x(&cfg.cells) {
        let share: f64 = cells.iter().map(|c| c.weight).sum();
        if share <= 0.0 {
            continue;
        }
        for c in &mut cells {
            c.weight /= share;
        }
        let l = welfare_ladder(&mte, &g, &cells, cfg.z_range).map_err(compute)?;
        let attained = (l.s_sub - l.s_fb).abs() <= 1e-7 * l.s_fb.abs().max(1.0);
        for (k, v) in [("s_sub", l.s_sub), ("s_dir", l.s_dir), ("s_con", l.s_con), ("s_fb", l.s_fb)] {
            *total.entry(k).or_default() += share * v;
        }
        ladders.push(json!({ "x": x, "share": share, "first_best_attained": attained, "ladder": l }));
    }
    prepare_out(&a.out)?;
    write_json(&a.out, "ladder.json", &json!({ "cells": ladders, "total": total }))
}

pub fn rank(a: &IoArgs) -> Result<(), CliError> {
    let (cfg, base): (RankConfig, _) = load(&a.config)?;
    let (set, g) = match &cfg.set {
        SetSource::Inline { set } => {
            let g = cfg.propensity.clone().ok_or_else(|| schema("an inline set needs \"propensity\""))?;
            (set.clone(), g)
        }
        SetSource::Liv { path, shape, bounds } => {
            let path = resolve(&base, path);
            let v = read_json(&path)?;
            let e = v.get("liv").ok_or_else(|| schema(format!("{} has no liv fit", path.display())))?;
            let fit: LivFit = field(e, "fit", &path)?;
            let g = match &cfg.propensity {
                Some(g) => g.clone(),
                None => field(e, "propensity", &path)?,
            };
            (IdentifiedMteSet::from_liv(&fit, *shape, *bounds).map_err(schema)?, g)
        }
    };
    set.validate().map_err(schema)?;
    check_cells(&cfg.cells)?;
    if cfg.rules.is_empty() {
        return Err(schema("no rules given"));
    }
    let rules: Vec<NamedRule> = cfg
        .rules
        .iter()
        .map(|r| {
            SubsidyRule::new(cfg.cells.clone(), r.assignment.clone(), cfg.action_space)
                .map(|rule| NamedRule { name: r.name.clone(), rule })
                .map_err(|e| schema(format!("rule {:?}: {e}", r.name)))
        })
        .collect::<Result<_, _>>()?;
    let order = rank_list(&set, &g, &rules).map_err(compute)?;
    let name_pairs = |v: &[[usize; 2]]| -> Vec<[String; 2]> {
        v.iter().map(|[i, j]| [order.names[*i].clone(), order.names[*j].clone()]).collect()
    };
    let out = json!({
        "bounds": set.effective_bounds(),
        "rules": order.names,
        "verdicts": order.verdicts,
        "edges": name_pairs(&order.edges),
        "equivalent": name_pairs(&order.equivalent),
        "incomparable": name_pairs(&order.incomparable),
    });
    prepare_out(&a.out)?;
    write_json(&a.out, "verdicts.json", &out)?;
    write_text(&a.out, "hasse.dot", &order.to_dot())
}

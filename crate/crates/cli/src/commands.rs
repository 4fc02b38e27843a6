//! The five commands. Each returns the lines to print and whether the run
//! counts as a pass; hard errors come back as [`CliError`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use gapfield::asymptotics::{
    a11_quadrature_oracle, extrapolate_qstar, fit_rate, rho_n_m, run_sweep, series, solve_record, DomainFamily,
    FitModel, Quantity, RatePrediction, SweepRecord, SweepSpec,
};
use gapfield::conductivity::{solve_decomposition, BoundaryData};
use gapfield::mesh::triangulate_with;
use gapfield::verify::{self, collect_evidence, evaluate, CriterionResult, Evidence, SweepData, VerifyConfig};
use gapfield::{assemble, make_preset, CoefficientPreset, WeightMode};
use serde::Serialize;

use crate::config::RunConfig;
use crate::store::{fmt_float, summary_text, to_json, Store};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Sweep,
    Oracle,
    Verify,
    Report,
}

/// What a command printed and whether it passed.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub pass: bool,
}

pub fn run(cmd: Command, cfg: &RunConfig, out: &Path, workers: Option<usize>) -> Result<Outcome, CliError> {
    let workers = workers.or(cfg.workers);
    match cmd {
        Command::Solve => solve(cfg, out),
        Command::Sweep => sweep(cfg, out, workers),
        Command::Oracle => oracle(cfg, out),
        Command::Verify => verify_cmd(cfg, out, workers),
        Command::Report => report(cfg, out),
    }
}

fn sweep_spec(cfg: &RunConfig) -> Result<SweepSpec, CliError> {
    let geom = cfg
        .geometry
        .as_ref()
        .ok_or_else(|| CliError::Config(vec!["a [geometry] block is required".into()]))?;
    Ok(SweepSpec {
        family: geom.family.clone(),
        phi: cfg.phi.clone(),
        coeff: make_preset(cfg.coefficient.clone())?,
        mesh: cfg.mesh.clone(),
        tol: cfg.tol,
        r0: geom.r0,
    })
}

/// Store key of a sweep; matches the keys the acceptance suite judges.
pub fn sweep_key(family: &DomainFamily, coeff: &CoefficientPreset) -> String {
    let base = match family {
        DomainFamily::Disks {
            mode: WeightMode::Planar, ..
        } => verify::DISKS.to_string(),
        DomainFamily::Disks {
            mode: WeightMode::Axisymmetric,
            ..
        } => verify::SPHERES.to_string(),
        DomainFamily::MProfile { m, .. } => format!("m-profile-{m}"),
        DomainFamily::Ellipse { .. } => "ellipse".to_string(),
    };
    match coeff {
        CoefficientPreset::Identity => base,
        CoefficientPreset::ConstantOffdiag { s, a_off } if *s == 1.0 && base == verify::DISKS => {
            format!("offdiag-{a_off}")
        }
        CoefficientPreset::ConstantOffdiag { .. } => format!("{base}-offdiag"),
        CoefficientPreset::Scaled { .. } => format!("{base}-scaled"),
        CoefficientPreset::SmoothRotation { .. } => format!("{base}-rotation"),
    }
}

fn solve(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let spec = sweep_spec(cfg)?;
    let eps = cfg
        .geometry
        .as_ref()
        .and_then(|g| g.eps)
        .ok_or_else(|| CliError::Config(vec!["`geometry.eps` is required for solve".into()]))?;
    let (record, extras) = solve_record(&spec, eps)?;

    // nodal fields for plotting
    let dom = spec.family.build(eps)?;
    let dom = match spec.r0 {
        Some(r0) => dom.with_r0(r0)?,
        None => dom,
    };
    let mesh = Arc::new(triangulate_with(&dom, &spec.mesh)?);
    let sys = assemble(mesh.clone(), &spec.coeff)?.with_tolerance(spec.tol);
    let bd = BoundaryData::new(spec.phi.clone(), &dom)?;
    let res = solve_decomposition(&sys, &bd)?;

    let store = Store::open(out)?;
    let mut csv = String::from("x,y,v1,v0,u\n");
    for (i, p) in mesh.vertices.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_float(p[0]),
            fmt_float(p[1]),
            fmt_float(res.v1.values[i]),
            fmt_float(res.v0.values[i]),
            fmt_float(res.u.values[i])
        ));
    }
    store.write_text("solution.csv", &csv)?;
    if cfg.dump_mesh {
        store.write_text("mesh.txt", &mesh.to_text())?;
    }
    #[derive(Serialize)]
    struct Persisted<'a> {
        record: &'a SweepRecord,
        extras: &'a gapfield::asymptotics::RecordExtras,
        functionals: gapfield::conductivity::Functionals,
        phi_at_p: f64,
        stats_v1: gapfield::SolveStats,
        stats_v0: gapfield::SolveStats,
    }
    store.write_text(
        "solve.json",
        &to_json(&Persisted {
            record: &record,
            extras: &extras,
            functionals: res.functionals,
            phi_at_p: res.phi_at_p,
            stats_v1: res.stats_v1,
            stats_v0: res.stats_v0,
        })?,
    )?;
    let summary = summary_text(&[
        ("command", "solve".into()),
        ("seed", cfg.seed.to_string()),
        ("eps", fmt_float(eps)),
        ("n", record.n.to_string()),
        ("m", record.m.to_string()),
        ("a11", fmt_float(record.a11)),
        ("Q", fmt_float(record.q)),
        ("C1", fmt_float(record.c1)),
        ("grad_mid", fmt_float(record.grad_mid)),
        ("sup_diff_v1", fmt_float(record.sup_diff_v1)),
        ("sup_diff_v0", fmt_float(record.sup_diff_v0)),
        ("flux_residual", fmt_float(record.flux_residual)),
        ("green_residual", fmt_float(extras.green_residual)),
        ("mesh_vertices", record.mesh_vertices.to_string()),
        ("cg_iters_v1", record.cg_iters_v1.to_string()),
        ("cg_iters_v0", record.cg_iters_v0.to_string()),
    ]);
    store.write_text("summary.txt", &summary)?;
    Ok(Outcome {
        lines: summary.lines().map(String::from).collect(),
        pass: true,
    })
}

/// One rate fit in the machine-readable sweep output.
#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub quantity: Quantity,
    pub model: FitModel,
    pub slope: f64,
    pub residual: f64,
    pub n_points: usize,
    pub predicted_exponent: f64,
    pub pass: bool,
}

/// Slope tolerance of the rate fits reported by `sweep` and `oracle`.
pub const SLOPE_TOL: f64 = 0.05;

fn fits_for(points: &[(f64, f64)], pred: RatePrediction) -> Vec<FitReport> {
    // both models when a logarithm is predicted, so neither is misread
    let models: &[FitModel] = match pred.model() {
        FitModel::PowerWithLog => &[FitModel::PowerWithLog, FitModel::Power],
        FitModel::Power => &[FitModel::Power],
    };
    models
        .iter()
        .filter_map(|&model| {
            let f = fit_rate(points, model).ok()?;
            let want = pred.slope(model);
            Some(FitReport {
                quantity: pred.quantity,
                model,
                slope: f.slope,
                residual: f.residual,
                n_points: f.n_points,
                predicted_exponent: want,
                pass: model == pred.model() && (f.slope - want).abs() <= SLOPE_TOL,
            })
        })
        .collect()
}

fn sweep(cfg: &RunConfig, out: &Path, workers: Option<usize>) -> Result<Outcome, CliError> {
    let spec = sweep_spec(cfg)?;
    let eps = cfg
        .sweep_eps
        .clone()
        .ok_or_else(|| CliError::Config(vec!["a [sweep] block with `eps` is required".into()]))?;
    let start = Instant::now();
    let outcome = run_sweep(&spec, &eps, workers)?;
    let elapsed_s = start.elapsed().as_secs_f64();
    let key = sweep_key(&spec.family, &cfg.coefficient);
    let (n, m) = (spec.family.dimension(), spec.family.flatness());

    let mut fits = Vec::new();
    for q in [Quantity::A11, Quantity::GradMid] {
        fits.extend(fits_for(&series(&outcome.records, q), RatePrediction::new(n, m, q)));
    }
    let qstar = extrapolate_qstar(&series(&outcome.records, Quantity::Q)).ok();
    let failures: Vec<String> = outcome
        .failures
        .iter()
        .map(|(e, err)| format!("eps = {e}: {err}"))
        .collect();

    let store = Store::open(out)?;
    let mut ev = Evidence::default();
    ev.sweeps.insert(
        key.clone(),
        SweepData {
            records: outcome.records.clone(),
            extras: outcome.extras.clone(),
            elapsed_s,
            failures: failures.clone(),
        },
    );
    store.save(&ev)?;
    #[derive(Serialize)]
    struct FitsFile<'a> {
        sweep: &'a str,
        fits: &'a [FitReport],
        qstar: Option<gapfield::asymptotics::QstarEstimate>,
    }
    store.write_text(
        "fits.json",
        &to_json(&FitsFile {
            sweep: &key,
            fits: &fits,
            qstar: qstar.clone(),
        })?,
    )?;

    let mut pairs = vec![
        ("command", "sweep".to_string()),
        ("sweep", key),
        ("seed", cfg.seed.to_string()),
        ("records", outcome.records.len().to_string()),
        ("failures", failures.len().to_string()),
        ("elapsed_s", format!("{elapsed_s:.3}")),
    ];
    let fit_lines: Vec<String> = fits
        .iter()
        .map(|f| {
            format!(
                "{:?} {:?} slope {:.4} (predicted {:.4}) residual {:.2e} {}",
                f.quantity,
                f.model,
                f.slope,
                f.predicted_exponent,
                f.residual,
                if f.pass { "pass" } else { "fail" }
            )
        })
        .collect();
    for l in &fit_lines {
        pairs.push(("fit", l.clone()));
    }
    if let Some(q) = qstar.as_ref().and_then(|q| q.qstar) {
        pairs.push(("Q_star", fmt_float(q)));
    }
    for f in &failures {
        pairs.push(("failure", f.clone()));
    }
    let summary = summary_text(&pairs);
    store.write_text("summary.txt", &summary)?;
    let lines = summary.lines().map(String::from).collect();
    if !failures.is_empty() {
        return Err(CliError::Solver(outcome.failures[0].1.clone()));
    }
    Ok(Outcome {
        lines,
        pass: fits.iter().filter(|f| f.model == RatePrediction::new(n, m, f.quantity).model()).all(|f| f.pass),
    })
}

fn oracle(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let oc = cfg
        .oracle
        .as_ref()
        .ok_or_else(|| CliError::Config(vec!["an [oracle] block is required".into()]))?;
    let mut csv = String::from("eps,n,m,a11_model,rho,a11_times_rho\n");
    let mut lines = vec![format!("{:>12} {:>22} {:>22}", "eps", "a11_model", "a11_model * rho")];
    let mut points = Vec::new();
    for &e in &oc.eps {
        let v = a11_quadrature_oracle(oc.n, oc.m, e, oc.r0)?;
        let rho = rho_n_m(oc.n, oc.m, e)?;
        points.push((e, v));
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_float(e),
            oc.n,
            oc.m,
            fmt_float(v),
            fmt_float(rho),
            fmt_float(v * rho)
        ));
        lines.push(format!("{e:>12.3e} {v:>22.15e} {:>22.15e}", v * rho));
    }
    let fits = fits_for(&points, RatePrediction::new(oc.n, oc.m, Quantity::A11));
    for f in &fits {
        lines.push(format!(
            "fit {:?}: slope {:.4} (predicted {:.4}) {}",
            f.model,
            f.slope,
            f.predicted_exponent,
            if f.pass { "pass" } else { "fail" }
        ));
    }
    let store = Store::open(out)?;
    store.write_text("oracle.csv", &csv)?;
    store.write_text("oracle_fits.json", &to_json(&fits)?)?;
    Ok(Outcome {
        pass: fits.iter().any(|f| f.pass),
        lines,
    })
}

fn verify_config(cfg: &RunConfig, workers: Option<usize>) -> VerifyConfig {
    let mut vc = VerifyConfig::default();
    if let Some(h) = cfg.verify.h_target {
        vc.mesh.h_target = h;
    }
    if let Some(l) = cfg.verify.gap_layers {
        vc.mesh.gap_layers = l;
    }
    if let Some(e) = &cfg.verify.eps {
        vc.eps = e.clone();
    }
    vc.tol = cfg.tol;
    vc.workers = workers;
    vc
}

fn render(results: &[CriterionResult]) -> String {
    let passed = results.iter().filter(|r| r.pass).count();
    let mut s: String = results.iter().map(|r| format!("{r}\n")).collect();
    s.push_str(&format!("{passed}/{} criteria passed\n", results.len()));
    s
}

fn publish(store: &Store, results: &[CriterionResult]) -> Result<Outcome, CliError> {
    let text = render(results);
    store.write_text("report.txt", &text)?;
    store.write_text("verdicts.json", &to_json(&results)?)?;
    Ok(Outcome {
        lines: text.lines().map(String::from).collect(),
        pass: !results.is_empty() && results.iter().all(|r| r.pass),
    })
}

fn verify_cmd(cfg: &RunConfig, out: &Path, workers: Option<usize>) -> Result<Outcome, CliError> {
    let ev = collect_evidence(&verify_config(cfg, workers))?;
    let store = Store::open(out)?;
    store.save(&ev)?;
    // judge what was stored, so a later `report` agrees with this verdict
    let results = evaluate(&Store::load(out)?);
    publish(&store, &results)
}

/// Merge stores (later ones win per key) and judge the union.
pub fn judge_stores(dirs: &[PathBuf]) -> Result<Vec<CriterionResult>, CliError> {
    let mut ev = Evidence::default();
    for d in dirs {
        ev = ev.merge(Store::load(d)?);
    }
    let results = evaluate(&ev);
    if results.is_empty() {
        return Err(CliError::Store("the stores hold no evidence any criterion can judge".into()));
    }
    Ok(results)
}

fn report(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let mut dirs = vec![out.to_path_buf()];
    dirs.extend(cfg.report_stores.iter().cloned());
    let mut seen = BTreeMap::new();
    dirs.retain(|d| seen.insert(d.clone(), ()).is_none());
    // the output directory need not hold a store itself when others are named
    let dirs: Vec<PathBuf> = if cfg.report_stores.is_empty() {
        dirs
    } else {
        dirs.into_iter()
            .filter(|d| d != out || d.join(crate::store::MANIFEST).exists())
            .collect()
    };
    let results = judge_stores(&dirs)?;
    publish(&Store::open(out)?, &results)
}

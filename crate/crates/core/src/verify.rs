//! Acceptance suite: gathers the evidence (solves, sweeps, quadrature runs)
//! and judges each criterion from it. Judging is a pure function of the
//! evidence so a stored run can be re-judged later.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    a11_quadrature_oracle, extrapolate_qstar, fit_rate, run_sweep, series, DomainFamily, FitModel, Quantity,
    RecordExtras, SweepRecord, SweepSpec,
};
use crate::auxiliary::{corrector_flux_check, AuxFunction};
use crate::coefficients::{make_preset, CoefficientField, CoefficientPreset};
use crate::conductivity::{probe_blowup, solve_decomposition, BoundaryData, PhiPreset, PhiTerm};
use crate::elliptic::{assemble, DEFAULT_TOL};
use crate::error::Result;
use crate::geometry::{make_eccentric_disks, WeightMode};
use crate::mesh::{annulus_mesh, triangulate_with, MeshOptions};

pub const DISKS: &str = "disks-planar";
pub const SPHERES: &str = "disks-axisymmetric";
pub const FLAT: &str = "m-profile-3";
pub const OFFDIAG: &str = "offdiag-0.3";

pub const DEFAULT_EPS: [f64; 5] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub mesh: MeshOptions,
    pub eps: Vec<f64>,
    pub workers: Option<usize>,
    pub tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            mesh: MeshOptions::new(0.02, 8),
            eps: DEFAULT_EPS.to_vec(),
            workers: None,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusCheck {
    pub a11: f64,
    pub exact: f64,
    pub seconds: f64,
    pub green_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepData {
    pub records: Vec<SweepRecord>,
    pub extras: Vec<RecordExtras>,
    pub elapsed_s: f64,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectorCheck {
    pub eps: Vec<f64>,
    pub plain: Vec<f64>,
    pub corrected: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub n: u32,
    pub m: u32,
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub cases: Vec<OracleCase>,
    /// Values of the `n = 4` model down to `eps = 1e-8`.
    pub deep: OracleCase,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrivialCheck {
    pub q: f64,
    /// `max |u - phi|` for constant `phi`.
    pub u_spread: f64,
    pub grad_mid: f64,
    /// `max |u[2 phi] - 2 u[phi]|`
    pub scaling_gap: f64,
    /// `max |u[phi + 1] - u[phi] - 1|`
    pub shift_gap: f64,
    pub green_residual: f64,
}

/// Everything the criteria are judged on.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub annulus: Option<AnnulusCheck>,
    pub sweeps: BTreeMap<String, SweepData>,
    /// `max |u_identity - u_generic|` with the unit matrix fed through the
    /// general-coefficient path.
    pub identity_gap: Option<f64>,
    pub corrector: Option<CorrectorCheck>,
    pub oracle: Option<OracleCheck>,
    pub trivial: Option<TrivialCheck>,
}

impl Evidence {
    /// Union of two evidence sets; entries of `other` win on collisions.
    pub fn merge(mut self, other: Evidence) -> Evidence {
        self.annulus = other.annulus.or(self.annulus);
        self.sweeps.extend(other.sweeps);
        self.identity_gap = other.identity_gap.or(self.identity_gap);
        self.corrector = other.corrector.or(self.corrector);
        self.oracle = other.oracle.or(self.oracle);
        self.trivial = other.trivial.or(self.trivial);
        self
    }
}

fn disks(mode: WeightMode) -> DomainFamily {
    DomainFamily::Disks { r: 0.5, big_r: 1.0, mode }
}

fn sweep(cfg: &VerifyConfig, family: DomainFamily, coeff: CoefficientField) -> Result<SweepData> {
    let spec = SweepSpec {
        family,
        phi: PhiPreset::LinearXn.terms(),
        coeff,
        mesh: cfg.mesh.clone(),
        tol: cfg.tol,
        r0: None,
    };
    let start = Instant::now();
    let out = run_sweep(&spec, &cfg.eps, cfg.workers)?;
    Ok(SweepData {
        records: out.records,
        extras: out.extras,
        elapsed_s: start.elapsed().as_secs_f64(),
        failures: out.failures.iter().map(|(e, err)| format!("eps = {e}: {err}")).collect(),
    })
}

pub fn annulus_check(h_target: f64) -> Result<AnnulusCheck> {
    let start = Instant::now();
    let mesh = Arc::new(annulus_mesh(0.5, 1.0, h_target, (0.5 / h_target).ceil() as usize)?);
    let sys = assemble(mesh, &CoefficientField::identity())?;
    let (v1, _) = crate::conductivity::solve_v1(&sys)?;
    let a11 = crate::elliptic::energy_product(&sys, &v1, &v1)?;
    let flux = crate::elliptic::boundary_flux(&sys, &v1, crate::mesh::BoundaryTag::Inner)?;
    Ok(AnnulusCheck {
        a11,
        exact: 2.0 * std::f64::consts::PI / 2f64.ln(),
        seconds: start.elapsed().as_secs_f64(),
        green_residual: (flux + a11).abs() / a11,
    })
}

pub fn oracle_check() -> Result<OracleCheck> {
    let start = Instant::now();
    let grid = |lo: i32| -> Vec<f64> {
        (0..=2 * (lo - 3))
            .map(|k| 10f64.powf(-3.0 - 0.5 * k as f64))
            .collect()
    };
    let eps = grid(6);
    let mut cases = Vec::new();
    for (n, m) in [(2, 2), (2, 3), (3, 2), (4, 2)] {
        let values = eps
            .iter()
            .map(|&e| a11_quadrature_oracle(n, m, e, 1.0))
            .collect::<Result<Vec<_>>>()?;
        cases.push(OracleCase {
            n,
            m,
            eps: eps.clone(),
            values,
        });
    }
    let deep_eps = grid(8);
    let deep = OracleCase {
        n: 4,
        m: 2,
        values: deep_eps
            .iter()
            .map(|&e| a11_quadrature_oracle(4, 2, e, 1.0))
            .collect::<Result<Vec<_>>>()?,
        eps: deep_eps,
    };
    Ok(OracleCheck {
        cases,
        deep,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn corrector_check(eps: &[f64]) -> Result<CorrectorCheck> {
    let a = make_preset(CoefficientPreset::ConstantOffdiag { s: 1.0, a_off: 0.3 })?;
    let mut out = CorrectorCheck {
        eps: eps.to_vec(),
        plain: Vec::new(),
        corrected: Vec::new(),
    };
    for &e in eps {
        let dom = make_eccentric_disks(0.5, 1.0, e, WeightMode::Planar)?;
        out.plain.push(corrector_flux_check(&AuxFunction::ubar(&dom), &a)?);
        out.corrected.push(corrector_flux_check(&AuxFunction::utilde(&dom, &a), &a)?);
    }
    Ok(out)
}

fn max_abs_diff(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| f(*x, *y).abs()).fold(0.0, f64::max)
}

pub fn identity_gap(cfg: &VerifyConfig, eps: f64) -> Result<f64> {
    let dom = make_eccentric_disks(0.5, 1.0, eps, WeightMode::Planar)?;
    let mesh = Arc::new(triangulate_with(&dom, &cfg.mesh)?);
    let bd = BoundaryData::from_preset(PhiPreset::LinearXn, &dom)?;
    let generic = make_preset(CoefficientPreset::ConstantOffdiag { s: 1.0, a_off: 0.0 })?;
    let lap = solve_decomposition(&assemble(mesh.clone(), &CoefficientField::identity())?.with_tolerance(cfg.tol), &bd)?;
    let gen = solve_decomposition(&assemble(mesh, &generic)?.with_tolerance(cfg.tol), &bd)?;
    Ok(max_abs_diff(&lap.u.values, &gen.u.values, |x, y| x - y))
}

pub fn trivial_check(cfg: &VerifyConfig, eps: f64) -> Result<TrivialCheck> {
    let dom = make_eccentric_disks(0.5, 1.0, eps, WeightMode::Planar)?;
    let mesh = Arc::new(triangulate_with(&dom, &cfg.mesh)?);
    let sys = assemble(mesh, &CoefficientField::identity())?.with_tolerance(cfg.tol);
    let c = 2.5;
    let constant = BoundaryData::new(vec![PhiTerm { coef: c, px: 0, py: 0 }], &dom)?;
    let rc = solve_decomposition(&sys, &constant)?;
    let probe = probe_blowup(&rc, &dom, &constant)?;

    let quad = BoundaryData::from_preset(PhiPreset::Quadratic, &dom)?;
    let mut shifted_terms = quad.terms.clone();
    shifted_terms.push(PhiTerm { coef: 1.0, px: 0, py: 0 });
    let shifted = BoundaryData::new(shifted_terms, &dom)?;
    let r1 = solve_decomposition(&sys, &quad)?;
    let r2 = solve_decomposition(&sys, &quad.scaled(2.0))?;
    let r3 = solve_decomposition(&sys, &shifted)?;
    let green = [&rc, &r1, &r2, &r3].iter().map(|r| r.green_residual).fold(0.0, f64::max);
    Ok(TrivialCheck {
        q: rc.q,
        u_spread: rc.u.values.iter().map(|v| (v - c).abs()).fold(0.0, f64::max),
        grad_mid: probe.grad_mid,
        scaling_gap: max_abs_diff(&r2.u.values, &r1.u.values, |x, y| x - 2.0 * y),
        shift_gap: max_abs_diff(&r3.u.values, &r1.u.values, |x, y| x - y - 1.0),
        green_residual: green,
    })
}

/// Run every solve the suite needs.
pub fn collect_evidence(cfg: &VerifyConfig) -> Result<Evidence> {
    let offdiag = make_preset(CoefficientPreset::ConstantOffdiag { s: 1.0, a_off: 0.3 })?;
    let mut sweeps = BTreeMap::new();
    sweeps.insert(DISKS.to_string(), sweep(cfg, disks(WeightMode::Planar), CoefficientField::identity())?);
    sweeps.insert(SPHERES.to_string(), sweep(cfg, disks(WeightMode::Axisymmetric), CoefficientField::identity())?);
    sweeps.insert(
        FLAT.to_string(),
        sweep(cfg, DomainFamily::MProfile { m: 3, lambda: 1.0 }, CoefficientField::identity())?,
    );
    sweeps.insert(OFFDIAG.to_string(), sweep(cfg, disks(WeightMode::Planar), offdiag)?);
    let mid_eps = cfg.eps[cfg.eps.len() / 2];
    Ok(Evidence {
        annulus: Some(annulus_check(0.02)?),
        sweeps,
        identity_gap: Some(identity_gap(cfg, mid_eps)?),
        corrector: Some(corrector_check(&cfg.eps)?),
        oracle: Some(oracle_check()?),
        trivial: Some(trivial_check(cfg, mid_eps)?),
    })
}

/// Verdict on one criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub anchor: String,
    pub measured: String,
    pub tolerance: String,
    pub pass: bool,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<28} | {} | measured {} | required {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.anchor,
            self.measured,
            self.tolerance
        )
    }
}

fn verdict(id: u32, name: &str, anchor: &str, measured: String, tolerance: &str, pass: bool) -> CriterionResult {
    CriterionResult {
        id,
        name: name.to_string(),
        anchor: anchor.to_string(),
        measured,
        tolerance: tolerance.to_string(),
        pass,
    }
}

fn failed(id: u32, name: &str, anchor: &str, why: String, tolerance: &str) -> CriterionResult {
    verdict(id, name, anchor, why, tolerance, false)
}

/// `max / min` of positive values (infinite if any is not positive).
fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 && hi.is_finite() {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn slope(points: &[(f64, f64)], model: FitModel) -> std::result::Result<crate::asymptotics::RateFit, String> {
    fit_rate(points, model).map_err(|e| e.to_string())
}

/// Ratio of the last value to the one a decade of `eps` earlier.
fn last_decade_growth(eps: &[f64], values: &[f64]) -> f64 {
    let n = eps.len();
    if n < 2 {
        return f64::NAN;
    }
    let target = 10.0 * eps[n - 1];
    let j = (0..n - 1)
        .min_by(|&a, &b| {
            (eps[a] / target).ln().abs().total_cmp(&(eps[b] / target).ln().abs())
        })
        .unwrap();
    values[n - 1] / values[j]
}

fn c1(ev: &Evidence) -> Option<CriterionResult> {
    let a = ev.annulus.as_ref()?;
    let rel = (a.a11 - a.exact).abs() / a.exact;
    Some(verdict(
        1,
        "annulus capacity",
        "separation-of-variables capacity 2 pi / ln(R/r)",
        format!("a11 = {:.6} vs {:.6} (rel {:.2e}), {:.2} s", a.a11, a.exact, rel, a.seconds),
        "rel < 1e-2, < 10 s",
        rel < 1e-2 && a.seconds < 10.0,
    ))
}

fn c2(ev: &Evidence) -> Option<CriterionResult> {
    let mut vals: Vec<f64> = ev.sweeps.values().flat_map(|s| s.extras.iter().map(|x| x.green_residual)).collect();
    vals.extend(ev.annulus.as_ref().map(|a| a.green_residual));
    vals.extend(ev.trivial.as_ref().map(|t| t.green_residual));
    if vals.is_empty() {
        return None;
    }
    let worst = vals.iter().copied().fold(0.0, f64::max);
    Some(verdict(
        2,
        "discrete Green identity",
        "inner flux of v1 equals minus its energy",
        format!("max |flux + a11| / a11 = {worst:.2e} over {} solves", vals.len()),
        "<= 1e-12",
        worst <= 1e-12 && vals.iter().all(|v| v.is_finite()),
    ))
}

fn c3(ev: &Evidence) -> Option<CriterionResult> {
    let recs: Vec<&SweepRecord> = ev.sweeps.values().flat_map(|s| s.records.iter()).collect();
    if recs.is_empty() {
        return None;
    }
    let worst = recs
        .iter()
        .map(|r| r.flux_residual / (r.a11 + r.q.abs()))
        .fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    Some(verdict(
        3,
        "zero net flux",
        "floating potential carries no net flux",
        format!("max residual / (a11 + |Q|) = {worst:.2e} over {} solves", recs.len()),
        "<= 1e-9",
        worst <= 1e-9 && recs.iter().all(|r| r.a11 > 0.0),
    ))
}

fn c4(ev: &Evidence) -> Option<CriterionResult> {
    let (name, anchor, tol) = ("planar blow-up rate", "a11 ~ eps^-1/2, |grad u| ~ eps^-1/2", "slopes -0.5 +- 0.05, < 600 s");
    let s = ev.sweeps.get(DISKS)?;
    let fits = slope(&series(&s.records, Quantity::A11), FitModel::Power)
        .and_then(|a| slope(&series(&s.records, Quantity::GradMid), FitModel::Power).map(|g| (a, g)));
    Some(match fits {
        Ok((a, g)) => verdict(
            4,
            name,
            anchor,
            format!("a11 slope {:.4}, grad_mid slope {:.4}, {:.1} s", a.slope, g.slope, s.elapsed_s),
            tol,
            (a.slope + 0.5).abs() <= 0.05 && (g.slope + 0.5).abs() <= 0.05 && s.elapsed_s < 600.0,
        ),
        Err(e) => failed(4, name, anchor, e, tol),
    })
}

fn c5(ev: &Evidence) -> Option<CriterionResult> {
    let s = ev.sweeps.get(DISKS)?;
    let (name, anchor) = ("bounded corrections", "grad(v1 - ubar) and grad v0 stay bounded");
    let tol = "sup-diff spread < 2, v0 growth < 2, v1 growth > 50";
    if s.records.len() < 2 || s.extras.len() != s.records.len() {
        return Some(failed(5, name, anchor, "incomplete sweep".into(), tol));
    }
    let sup: Vec<f64> = s.records.iter().map(|r| r.sup_diff_v1).collect();
    let v0: Vec<f64> = s.extras.iter().map(|x| x.grad_v0_mid).collect();
    let v1: Vec<f64> = s.extras.iter().map(|x| x.grad_v1_mid).collect();
    let sup_spread = spread(&sup);
    // the midpoint gradient of v0 may decay; only growth counts against it
    let v0_growth = v0.iter().copied().fold(0.0, f64::max) / v0[0];
    let v1_growth = v1[v1.len() - 1] / v1[0];
    Some(verdict(
        5,
        name,
        anchor,
        format!("sup-diff spread {sup_spread:.3}, v0 growth {v0_growth:.3}, v1 growth {v1_growth:.1}"),
        tol,
        sup_spread < 2.0 && v0_growth < 2.0 && v1_growth > 50.0,
    ))
}

fn c6(ev: &Evidence) -> Option<CriterionResult> {
    let s = ev.sweeps.get(SPHERES)?;
    let (name, anchor, tol) = (
        "three-dimensional rate",
        "a11 ~ |ln eps| for n = 3",
        "a11 / |ln eps| spread < 2, log residual < power residual",
    );
    let pts = series(&s.records, Quantity::A11);
    let scaled: Vec<f64> = pts.iter().map(|(e, a)| a / e.ln().abs()).collect();
    let fits = slope(&pts, FitModel::PowerWithLog).and_then(|l| slope(&pts, FitModel::Power).map(|p| (l, p)));
    Some(match fits {
        Ok((l, p)) => {
            let sp = spread(&scaled);
            verdict(
                6,
                name,
                anchor,
                format!(
                    "spread {sp:.3}, log fit slope {:.3} residual {:.2e}, power residual {:.2e}",
                    l.slope, l.residual, p.residual
                ),
                tol,
                sp < 2.0 && l.residual < p.residual,
            )
        }
        Err(e) => failed(6, name, anchor, e, tol),
    })
}

fn c7(ev: &Evidence) -> Option<CriterionResult> {
    let s = ev.sweeps.get(FLAT)?;
    let (name, anchor, tol) = ("flat-contact rate", "a11 ~ eps^-2/3 for cubic contact", "slope -0.6667 +- 0.05");
    Some(match slope(&series(&s.records, Quantity::A11), FitModel::Power) {
        Ok(f) => verdict(
            7,
            name,
            anchor,
            format!("a11 slope {:.4}", f.slope),
            tol,
            (f.slope + 2.0 / 3.0).abs() <= 0.05,
        ),
        Err(e) => failed(7, name, anchor, e, tol),
    })
}

fn c8(ev: &Evidence) -> Option<CriterionResult> {
    let o = ev.oracle.as_ref()?;
    let (name, anchor, tol) = (
        "model integral rates",
        "radial model integral for a11",
        "slopes within 0.02, n = 4 bounded, < 30 s",
    );
    let mut parts = Vec::new();
    let mut pass = o.seconds < 30.0;
    for case in &o.cases {
        let pred = crate::asymptotics::RatePrediction::new(case.n, case.m, Quantity::A11);
        let model = pred.model();
        let pts: Vec<(f64, f64)> = case.eps.iter().copied().zip(case.values.iter().copied()).collect();
        match slope(&pts, model) {
            Ok(f) => {
                let want = pred.slope(model);
                pass &= (f.slope - want).abs() <= 0.02;
                parts.push(format!("({},{}) {:.4} vs {:.4}", case.n, case.m, f.slope, want));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("({},{}) {e}", case.n, case.m));
            }
        }
    }
    let deep = spread(&o.deep.values);
    pass &= deep < 2.0 && o.deep.values.iter().all(|v| v.is_finite());
    parts.push(format!("n=4 spread to 1e-8 {deep:.4}, {:.2} s", o.seconds));
    Some(verdict(8, name, anchor, parts.join("; "), tol, pass))
}

fn c9(ev: &Evidence) -> Option<CriterionResult> {
    let s = ev.sweeps.get(OFFDIAG)?;
    let (name, anchor) = ("divergence-form corrector", "grad(V1 - utilde) bounded for general A");
    let tol = "sup-diff spread < 2, identity gap <= 1e-8, corrected growth < 1.5 and plain growth > 2 over last decade";
    let sup: Vec<f64> = s.records.iter().map(|r| r.sup_diff_v1).collect();
    let sp = spread(&sup);
    let gap = ev.identity_gap.unwrap_or(f64::INFINITY);
    let (cg, pg) = match &ev.corrector {
        Some(c) => (last_decade_growth(&c.eps, &c.corrected), last_decade_growth(&c.eps, &c.plain)),
        None => (f64::NAN, f64::NAN),
    };
    Some(verdict(
        9,
        name,
        anchor,
        format!("sup-diff spread {sp:.3}, identity gap {gap:.2e}, corrected growth {cg:.3}, plain growth {pg:.3}"),
        tol,
        sp < 2.0 && gap <= 1e-8 && cg < 1.5 && pg > 2.0,
    ))
}

fn c10(ev: &Evidence) -> Option<CriterionResult> {
    let t = ev.trivial.as_ref()?;
    Some(verdict(
        10,
        "trivial data",
        "constant data gives constant solution",
        format!(
            "Q = {:.1e}, spread {:.1e}, grad_mid {:.1e}, scaling {:.1e}, shift {:.1e}",
            t.q, t.u_spread, t.grad_mid, t.scaling_gap, t.shift_gap
        ),
        "all <= 1e-8",
        [t.q.abs(), t.u_spread, t.grad_mid, t.scaling_gap, t.shift_gap]
            .iter()
            .all(|v| *v <= 1e-8),
    ))
}

fn c11(ev: &Evidence) -> Option<CriterionResult> {
    let s = ev.sweeps.get(DISKS)?;
    let (name, anchor, tol) = (
        "touching limit of Q",
        "Q(eps) converges to the touching value",
        "differences shrink, Q* moves < 1% without coarsest eps",
    );
    let pts = series(&s.records, Quantity::Q);
    if pts.len() < 5 {
        return Some(failed(11, name, anchor, format!("{} points, need 5", pts.len()), tol));
    }
    let full = extrapolate_qstar(&pts);
    let drop = extrapolate_qstar(&pts[1..]);
    Some(match (full, drop) {
        (Ok(f), Ok(d)) => match (f.qstar, d.qstar) {
            (Some(a), Some(b)) => {
                let rel = (a - b).abs() / a.abs().max(1e-300);
                verdict(
                    11,
                    name,
                    anchor,
                    format!(
                        "Q* = {a:.6} (order {:.3}), without coarsest {b:.6}, rel {rel:.2e}, cauchy {}",
                        f.order.unwrap_or(f64::NAN),
                        f.cauchy_decreasing
                    ),
                    tol,
                    f.cauchy_decreasing && rel < 0.01,
                )
            }
            _ => failed(11, name, anchor, "sequence not monotone".into(), tol),
        },
        (Err(e), _) | (_, Err(e)) => failed(11, name, anchor, e.to_string(), tol),
    })
}

/// Judge every criterion for which evidence is present, in criterion order.
pub fn evaluate(ev: &Evidence) -> Vec<CriterionResult> {
    [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11]
        .iter()
        .filter_map(|c| c(ev))
        .collect()
}

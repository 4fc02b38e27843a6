//! Predicted rates, gap sweeps, log-log fitting, the radial quadrature model
//! for `a11`, and extrapolation of `Q` to the touching limit.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auxiliary::{sup_gradient_difference, AuxFunction, GradientReference};
use crate::coefficients::CoefficientField;
use crate::conductivity::{probe_blowup, solve_decomposition, BoundaryData, PhiTerm};
use crate::elliptic::{assemble, probe_gradient, DEFAULT_TOL};
use crate::error::{GapError, Result};
use crate::geometry::{make_eccentric_disks, make_ellipse_in_disk, make_m_profile, GapDomain, WeightMode};
use crate::mesh::{triangulate_with, MeshOptions};

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(GapError::InvalidInput(format!("eps = {eps} outside (0, 1/2)")))
    }
}

/// Rate factor for strictly convex gaps in dimension `n`.
pub fn rho_n(n: u32, eps: f64) -> Result<f64> {
    rho_n_m(n, 2, eps)
}

/// Rate factor for gaps of flatness order `m`.
pub fn rho_n_m(n: u32, m: u32, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if n < 2 || m < 2 {
        return Err(GapError::InvalidInput(format!("need n >= 2 and m >= 2, got n = {n}, m = {m}")));
    }
    let k = n - 1;
    Ok(if k < m {
        eps.powf(1.0 - k as f64 / m as f64)
    } else if k == m {
        1.0 / eps.ln().abs()
    } else {
        1.0
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    A11,
    GradMid,
    Q,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `ln q = c + s ln eps`
    Power,
    /// `ln q = c + s ln ln(1/eps)`
    PowerWithLog,
}

/// Predicted behavior of a quantity as the gap closes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatePrediction {
    pub n: u32,
    pub m: u32,
    pub quantity: Quantity,
    /// Exponent of `eps`.
    pub exponent: f64,
    /// Exponent of `ln(1/eps)` when the rate is logarithmic.
    pub log_exponent: Option<f64>,
}

impl RatePrediction {
    pub fn new(n: u32, m: u32, quantity: Quantity) -> Self {
        let k = n - 1;
        let rho_exp = if k < m { 1.0 - k as f64 / m as f64 } else { 0.0 };
        let log = k == m;
        let (exponent, log_exponent) = match quantity {
            // a11 ~ 1 / rho
            Quantity::A11 => (-rho_exp, log.then_some(1.0)),
            // |grad u| ~ rho / eps
            Quantity::GradMid => (rho_exp - 1.0, log.then_some(-1.0)),
            Quantity::Q => (0.0, None),
        };
        RatePrediction {
            n,
            m,
            quantity,
            exponent,
            log_exponent,
        }
    }

    pub fn model(&self) -> FitModel {
        if self.log_exponent.is_some() {
            FitModel::PowerWithLog
        } else {
            FitModel::Power
        }
    }

    /// Slope a fit with `model` should recover.
    pub fn slope(&self, model: FitModel) -> f64 {
        match model {
            FitModel::Power => self.exponent,
            FitModel::PowerWithLog => self.log_exponent.unwrap_or(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub model: FitModel,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `ln q`.
    pub residual: f64,
    pub n_points: usize,
}

/// Least-squares fit of `(eps, q)` pairs.
pub fn fit_rate(points: &[(f64, f64)], model: FitModel) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(GapError::InvalidInput(format!("a fit needs at least 3 points, got {}", points.len())));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(eps, q) in points {
        if !(q > 0.0) || !q.is_finite() {
            return Err(GapError::InvalidInput(format!("nonpositive value {q} at eps = {eps}")));
        }
        check_eps(eps)?;
        xs.push(match model {
            FitModel::Power => eps.ln(),
            FitModel::PowerWithLog => (1.0 / eps).ln().ln(),
        });
        ys.push(q.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        model,
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        n_points: xs.len(),
    })
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let (f1, f2) = (f(c - h * XGK[j]), f(c + h * XGK[j]));
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integration by recursive bisection.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
        let (v, err) = gk15(f, a, b);
        if err <= tol.max(1e-15 * v.abs()) {
            return Ok(v);
        }
        if depth == 0 {
            return Err(GapError::NonConvergence {
                what: "adaptive quadrature".into(),
                iterations: 60,
                residual: err,
            });
        }
        let c = 0.5 * (a + b);
        Ok(rec(f, a, c, 0.5 * tol, depth - 1)? + rec(f, c, b, 0.5 * tol, depth - 1)?)
    }
    rec(&f, a, b, tol, 60)
}

/// Area of the unit sphere in `R^k`.
fn sphere_area(k: u32) -> Result<f64> {
    match k {
        1 => Ok(2.0),
        2 => Ok(2.0 * PI),
        3 => Ok(4.0 * PI),
        4 => Ok(2.0 * PI * PI),
        _ => Err(GapError::InvalidInput(format!("dimension {} not supported", k + 1))),
    }
}

/// `int_{|x| < r0} dx / (eps + |x|^m)` over the `(n-1)`-ball: the model
/// integral whose rate matches `a11`.
pub fn a11_quadrature_oracle(n: u32, m: u32, eps: f64, r0: f64) -> Result<f64> {
    if !(2..=5).contains(&n) || m < 2 {
        return Err(GapError::InvalidInput(format!("oracle needs n in 2..=5 and m >= 2, got ({n}, {m})")));
    }
    if !(eps > 0.0) || !(r0 > 0.0) {
        return Err(GapError::InvalidInput("eps and r0 must be positive".into()));
    }
    let k = n - 1;
    let f = |r: f64| r.powi(k as i32 - 1) / (eps + r.powi(m as i32));
    // split at the natural scale so the peak is resolved from the start
    let s = eps.powf(1.0 / m as f64).min(r0);
    let near = integrate(f, 0.0, s, 1e-13 * s / eps)?;
    let far = integrate(f, s, r0, 1e-13 * near.max(1.0))?;
    Ok(sphere_area(k)? * (near + far))
}

/// Parametric family of gap domains indexed by `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DomainFamily {
    /// Inclusion of radius `r` inside a disk (or ball) of radius `big_r`.
    Disks { r: f64, big_r: f64, mode: WeightMode },
    /// `h = x^2 / 2`, `h1 - h = lambda |x|^m`.
    MProfile { m: u32, lambda: f64 },
    /// Ellipse with semi-axes `a`, `b` inside a disk of radius `big_r`.
    Ellipse { a: f64, b: f64, big_r: f64 },
}

impl DomainFamily {
    pub fn build(&self, eps: f64) -> Result<GapDomain> {
        match *self {
            DomainFamily::Disks { r, big_r, mode } => make_eccentric_disks(r, big_r, eps, mode),
            DomainFamily::MProfile { m, lambda } => make_m_profile(m, lambda, eps, WeightMode::Planar),
            DomainFamily::Ellipse { a, b, big_r } => make_ellipse_in_disk(a, b, big_r, eps),
        }
    }

    pub fn dimension(&self) -> u32 {
        match self {
            DomainFamily::Disks { mode, .. } => mode.dimension(),
            _ => 2,
        }
    }

    pub fn flatness(&self) -> u32 {
        match self {
            DomainFamily::MProfile { m, .. } => *m,
            _ => 2,
        }
    }
}

/// Everything a sweep needs besides the gap values.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub family: DomainFamily,
    pub phi: Vec<PhiTerm>,
    pub coeff: CoefficientField,
    pub mesh: MeshOptions,
    pub tol: f64,
    /// Explicit gap-neighborhood radius; the family default when `None`.
    pub r0: Option<f64>,
}

impl SweepSpec {
    pub fn new(family: DomainFamily, phi: Vec<PhiTerm>) -> Self {
        SweepSpec {
            family,
            phi,
            coeff: CoefficientField::identity(),
            mesh: MeshOptions::new(0.05, 8),
            tol: DEFAULT_TOL,
            r0: None,
        }
    }
}

/// One solved gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    pub n: u32,
    pub m: u32,
    pub a11: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub grad_mid: f64,
    pub sup_diff_v1: f64,
    pub sup_diff_v0: f64,
    pub flux_residual: f64,
    pub mesh_vertices: usize,
    pub cg_iters_v1: usize,
    pub cg_iters_v0: usize,
    pub wall_ms: f64,
}

/// Per-gap diagnostics outside the CSV schema.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordExtras {
    pub eps: f64,
    pub grad_v1_mid: f64,
    pub grad_v0_mid: f64,
    /// `|flux(v1, INNER) + a11| / a11`
    pub green_residual: f64,
    pub q_flux: f64,
    pub ratio_max: f64,
    pub grad_segment_max: f64,
    pub v1_min: f64,
    pub v1_max: f64,
}

/// Solve one gap and collect its record.
pub fn solve_record(spec: &SweepSpec, eps: f64) -> Result<(SweepRecord, RecordExtras)> {
    let start = Instant::now();
    let dom = spec.family.build(eps)?;
    let dom = match spec.r0 {
        Some(r0) => dom.with_r0(r0)?,
        None => dom,
    };
    let mesh = Arc::new(triangulate_with(&dom, &spec.mesh)?);
    let sys = assemble(mesh.clone(), &spec.coeff)?.with_tolerance(spec.tol);
    let bd = BoundaryData::new(spec.phi.clone(), &dom)?;
    let res = solve_decomposition(&sys, &bd)?;
    let probe = probe_blowup(&res, &dom, &bd)?;
    let mid = [0.0, 0.5 * dom.eps];
    let norm = |g: [f64; 2]| g[0].hypot(g[1]);
    let coeff = (!spec.coeff.is_identity).then_some(&spec.coeff);
    let aux1 = match coeff {
        Some(a) => AuxFunction::utilde(&dom, a),
        None => AuxFunction::ubar(&dom),
    };
    let aux0 = AuxFunction::uhat(&dom, &bd, coeff);
    let reference = GradientReference::Interpolant;
    let record = SweepRecord {
        eps,
        n: dom.mode.dimension(),
        m: dom.m,
        a11: res.a11,
        q: res.q,
        c1: res.c1,
        grad_mid: probe.grad_mid,
        sup_diff_v1: sup_gradient_difference(&res.v1, &aux1, reference)?,
        sup_diff_v0: sup_gradient_difference(&res.v0, &aux0, reference)?,
        flux_residual: res.flux_residual,
        mesh_vertices: mesh.n_vertices(),
        cg_iters_v1: res.stats_v1.iterations,
        cg_iters_v0: res.stats_v0.iterations,
        wall_ms: 0.0,
    };
    let (v1_min, v1_max) = res.v1.min_max();
    let extras = RecordExtras {
        eps,
        grad_v1_mid: norm(probe_gradient(&res.v1, mid)?),
        grad_v0_mid: norm(probe_gradient(&res.v0, mid)?),
        green_residual: res.green_residual,
        q_flux: res.functionals.q_flux,
        ratio_max: probe.ratio_max,
        grad_segment_max: probe.grad_segment_max,
        v1_min,
        v1_max,
    };
    let record = SweepRecord {
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        ..record
    };
    Ok((record, extras))
}

/// Records of a sweep in input order, with per-gap failures kept aside.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub extras: Vec<RecordExtras>,
    pub failures: Vec<(f64, GapError)>,
}

/// Solve every gap in `eps` (strictly decreasing) on `workers` threads.
pub fn run_sweep(spec: &SweepSpec, eps: &[f64], workers: Option<usize>) -> Result<SweepOutcome> {
    if eps.is_empty() {
        return Err(GapError::InvalidInput("empty eps list".into()));
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(GapError::InvalidInput("eps values must be strictly decreasing".into()));
    }
    for &e in eps {
        check_eps(e)?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| GapError::InvalidInput(format!("worker pool: {e}")))?;
    let results: Vec<Result<(SweepRecord, RecordExtras)>> =
        pool.install(|| eps.par_iter().map(|&e| solve_record(spec, e)).collect());
    let mut out = SweepOutcome {
        records: Vec::new(),
        extras: Vec::new(),
        failures: Vec::new(),
    };
    for (&e, r) in eps.iter().zip(results) {
        match r {
            Ok((rec, extra)) => {
                out.records.push(rec);
                out.extras.push(extra);
            }
            Err(err) => out.failures.push((e, err)),
        }
    }
    if out.records.is_empty() {
        return Err(out.failures.swap_remove(0).1);
    }
    Ok(out)
}

/// Extract `(eps, quantity)` pairs for fitting.
pub fn series(records: &[SweepRecord], quantity: Quantity) -> Vec<(f64, f64)> {
    records
        .iter()
        .map(|r| {
            let v = match quantity {
                Quantity::A11 => r.a11,
                Quantity::GradMid => r.grad_mid,
                Quantity::Q => r.q,
            };
            (r.eps, v)
        })
        .collect()
}

/// Touching-limit estimate of `Q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QstarEstimate {
    /// `None` when the sequence is not monotone.
    pub qstar: Option<f64>,
    /// Fitted convergence order `p` in `Q = Q* + c eps^p`.
    pub order: Option<f64>,
    /// `|Q(eps_{k+1}) - Q(eps_k)|`
    pub differences: Vec<f64>,
    pub monotone: bool,
    pub cauchy_decreasing: bool,
}

fn fit_fixed_order(pts: &[(f64, f64)], p: f64) -> (f64, f64, f64) {
    // least squares for Q* + c eps^p
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|(e, _)| e.powf(p)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = pts.iter().map(|(_, q)| q).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(pts).map(|(x, (_, q))| (x - mx) * (q - my)).sum();
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let q0 = my - c * mx;
    let ss = xs.iter().zip(pts).map(|(x, (_, q))| (q - q0 - c * x).powi(2)).sum();
    (q0, c, ss)
}

/// Extrapolate `Q(eps)` to `eps -> 0` with a least-squares fit of
/// `Q* + c eps^p`. The order `p` is chosen by minimizing the residual, which is
/// a heuristic: convergence is known but its rate is not.
pub fn extrapolate_qstar(points: &[(f64, f64)]) -> Result<QstarEstimate> {
    if points.len() < 4 {
        return Err(GapError::InvalidInput("extrapolation needs at least 4 points".into()));
    }
    if points.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(GapError::InvalidInput("eps values must be strictly decreasing".into()));
    }
    let differences: Vec<f64> = points.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    let cauchy_decreasing = differences.windows(2).all(|w| w[1] <= w[0]);
    let steps: Vec<f64> = points.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let monotone = steps.iter().all(|&s| s >= 0.0) || steps.iter().all(|&s| s <= 0.0);
    let scale = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    if differences.iter().all(|&d| d <= 1e-14 * scale.max(1e-300)) {
        return Ok(QstarEstimate {
            qstar: Some(points[points.len() - 1].1),
            order: None,
            differences,
            monotone: true,
            cauchy_decreasing: true,
        });
    }
    if !monotone {
        return Ok(QstarEstimate {
            qstar: None,
            order: None,
            differences,
            monotone,
            cauchy_decreasing,
        });
    }
    let objective = |p: f64| fit_fixed_order(points, p).2;
    let (lo, hi) = (0.05, 3.0);
    let grid = 600;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=grid {
        let p = lo + (hi - lo) * i as f64 / grid as f64;
        let v = objective(p);
        if v < best.0 {
            best = (v, p);
        }
    }
    // golden-section refinement around the best grid point
    let step = (hi - lo) / grid as f64;
    let (mut a, mut b) = ((best.1 - step).max(lo), (best.1 + step).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if objective(c) < objective(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let p = 0.5 * (a + b);
    let (q0, _, _) = fit_fixed_order(points, p);
    Ok(QstarEstimate {
        qstar: Some(q0),
        order: Some(p),
        differences,
        monotone,
        cauchy_decreasing,
    })
}

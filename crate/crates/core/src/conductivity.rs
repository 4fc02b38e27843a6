//! Floating-potential solve through the `v1`/`v0` decomposition.
//!
//! With `v1` equal to 1 on the inclusion and 0 on the outer boundary, and `v0`
//! carrying `phi - phi(P)` on the outer boundary, the solution is
//! `u = (C1 - phi(P)) v1 + v0 + phi(P)` where `C1 - phi(P) = Q / a11`.

use serde::{Deserialize, Serialize};

use crate::asymptotics::rho_n;
use crate::auxiliary::sample_grid;
use crate::elliptic::{boundary_flux, energy_product, probe_gradient, LinearSystem, ScalarField, SolveStats};
use crate::error::{GapError, Result};
use crate::geometry::{GapDomain, Point};
use crate::mesh::BoundaryTag;

/// Monomial `coef * x^px * y^py` in normalized coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiTerm {
    pub coef: f64,
    pub px: u32,
    pub py: u32,
}

/// Named boundary data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiPreset {
    /// `phi = y`, the coordinate along the closest-point segment.
    LinearXn,
    /// `phi = 1`.
    Constant,
    /// `phi = x^2 + y^2`.
    Quadratic,
}

impl PhiPreset {
    pub fn terms(self) -> Vec<PhiTerm> {
        let t = |coef, px, py| PhiTerm { coef, px, py };
        match self {
            PhiPreset::LinearXn => vec![t(1.0, 0, 1)],
            PhiPreset::Constant => vec![t(1.0, 0, 0)],
            PhiPreset::Quadratic => vec![t(1.0, 2, 0), t(1.0, 0, 2)],
        }
    }
}

fn mono(x: f64, p: u32) -> f64 {
    if p == 0 {
        1.0
    } else {
        x.powi(p as i32)
    }
}

fn dmono(x: f64, p: u32) -> f64 {
    if p == 0 {
        0.0
    } else {
        p as f64 * mono(x, p - 1)
    }
}

fn ddmono(x: f64, p: u32) -> f64 {
    if p < 2 {
        0.0
    } else {
        (p * (p - 1)) as f64 * mono(x, p - 2)
    }
}

/// Outer-boundary data `phi` as a polynomial, with `phi(P)` taken from the
/// same expression.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    pub terms: Vec<PhiTerm>,
    pub phi_at_p: f64,
    /// Sampled `max |phi| + |grad phi| + |hess phi|` along the outer boundary.
    pub c2_norm: f64,
}

impl BoundaryData {
    pub fn new(terms: Vec<PhiTerm>, dom: &GapDomain) -> Result<Self> {
        let mut bd = BoundaryData {
            terms,
            phi_at_p: 0.0,
            c2_norm: 0.0,
        };
        bd.phi_at_p = bd.eval(dom.p);
        if !bd.phi_at_p.is_finite() {
            return Err(GapError::InvalidInput("phi(P) is not finite".into()));
        }
        let pole = dom.inner.center();
        let n = 512;
        for i in 0..n {
            let q = dom.outer.ray_point(pole, 2.0 * std::f64::consts::PI * i as f64 / n as f64);
            let (v, g, hs) = (bd.eval(q), bd.gradient(q), bd.hessian(q));
            let hn = (hs[0][0].powi(2) + 2.0 * hs[0][1].powi(2) + hs[1][1].powi(2)).sqrt();
            let s = v.abs() + g[0].hypot(g[1]) + hn;
            if !s.is_finite() {
                return Err(GapError::InvalidInput(format!("phi not finite at {q:?}")));
            }
            bd.c2_norm = bd.c2_norm.max(s);
        }
        Ok(bd)
    }

    pub fn from_preset(preset: PhiPreset, dom: &GapDomain) -> Result<Self> {
        Self::new(preset.terms(), dom)
    }

    /// Same data multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        BoundaryData {
            terms: self
                .terms
                .iter()
                .map(|t| PhiTerm {
                    coef: s * t.coef,
                    ..*t
                })
                .collect(),
            phi_at_p: s * self.phi_at_p,
            c2_norm: s.abs() * self.c2_norm,
        }
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * mono(x[0], t.px) * mono(x[1], t.py))
            .sum()
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        self.terms.iter().fold([0.0; 2], |g, t| {
            [
                g[0] + t.coef * dmono(x[0], t.px) * mono(x[1], t.py),
                g[1] + t.coef * mono(x[0], t.px) * dmono(x[1], t.py),
            ]
        })
    }

    pub fn hessian(&self, x: Point) -> [[f64; 2]; 2] {
        self.terms.iter().fold([[0.0; 2]; 2], |h, t| {
            let xy = t.coef * dmono(x[0], t.px) * dmono(x[1], t.py);
            [
                [h[0][0] + t.coef * ddmono(x[0], t.px) * mono(x[1], t.py), h[0][1] + xy],
                [h[1][0] + xy, h[1][1] + t.coef * mono(x[0], t.px) * ddmono(x[1], t.py)],
            ]
        })
    }
}

/// `a11` and `Q` from the energy route, with the flux route alongside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Functionals {
    pub a11: f64,
    pub q: f64,
    pub q_flux: f64,
    /// `|Q_energy - Q_flux| / (1 + |Q|)`
    pub green_gap: f64,
    pub consistent: bool,
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub v1: ScalarField,
    pub v0: ScalarField,
    pub a11: f64,
    pub q: f64,
    pub c1: f64,
    pub phi_at_p: f64,
    pub u: ScalarField,
    pub flux_residual: f64,
    /// `|flux(v1, INNER) + a11| / a11`
    pub green_residual: f64,
    pub functionals: Functionals,
    pub stats_v1: SolveStats,
    pub stats_v0: SolveStats,
}

pub fn solve_v1(sys: &LinearSystem) -> Result<(ScalarField, SolveStats)> {
    crate::elliptic::solve_dirichlet(sys, |_| 0.0, |_| 1.0)
}

pub fn solve_v0(sys: &LinearSystem, bd: &BoundaryData) -> Result<(ScalarField, SolveStats)> {
    crate::elliptic::solve_dirichlet(sys, |x| bd.eval(x) - bd.phi_at_p, |_| 0.0)
}

pub fn compute_functionals(sys: &LinearSystem, v1: &ScalarField, v0: &ScalarField) -> Result<Functionals> {
    let a11 = energy_product(sys, v1, v1)?;
    // Green: the flux of v0 through the inclusion is minus the energy cross
    // term, since v0 vanishes on the inclusion and v1 on the outer boundary
    let q = -energy_product(sys, v0, v1)?;
    let q_flux = boundary_flux(sys, v0, BoundaryTag::Inner)?;
    let green_gap = (q - q_flux).abs() / (1.0 + q.abs());
    Ok(Functionals {
        a11,
        q,
        q_flux,
        green_gap,
        consistent: green_gap <= 1e-6,
    })
}

pub fn assemble_u(
    sys: &LinearSystem,
    v1: ScalarField,
    v0: ScalarField,
    functionals: Functionals,
    bd: &BoundaryData,
    stats: (SolveStats, SolveStats),
) -> Result<DecompositionResult> {
    let a11 = functionals.a11;
    if !(a11 > 0.0) {
        return Err(GapError::DegenerateEnergy(a11));
    }
    let jump = functionals.q / a11;
    let c1 = bd.phi_at_p + jump;
    let values = v1
        .values
        .iter()
        .zip(&v0.values)
        .map(|(a, b)| jump * a + b + bd.phi_at_p)
        .collect();
    let u = ScalarField::new(v1.mesh.clone(), values)?;
    let flux_v1 = boundary_flux(sys, &v1, BoundaryTag::Inner)?;
    let flux_v0 = boundary_flux(sys, &v0, BoundaryTag::Inner)?;
    let flux_residual = (jump * flux_v1 + flux_v0).abs();
    Ok(DecompositionResult {
        green_residual: (flux_v1 + a11).abs() / a11,
        v1,
        v0,
        a11,
        q: functionals.q,
        c1,
        phi_at_p: bd.phi_at_p,
        u,
        flux_residual,
        functionals,
        stats_v1: stats.0,
        stats_v0: stats.1,
    })
}

/// Full pipeline; the two Dirichlet solves run concurrently.
pub fn solve_decomposition(sys: &LinearSystem, bd: &BoundaryData) -> Result<DecompositionResult> {
    let (r1, r0) = rayon::join(|| solve_v1(sys), || solve_v0(sys, bd));
    let (v1, s1) = r1?;
    let (v0, s0) = r0?;
    let f = compute_functionals(sys, &v1, &v0)?;
    assemble_u(sys, v1, v0, f, bd, (s1, s0))
}

/// Gradient measurements of a solved field against the two-sided bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowupProbe {
    pub grad_mid: f64,
    pub grad_segment_max: f64,
    /// `|grad u|` over the bound shape at the sample grid points.
    pub ratio_max: f64,
    pub ratios: Vec<(Point, f64)>,
}

fn segment_distance(x: Point, eps: f64) -> f64 {
    let y = x[1].clamp(0.0, eps);
    x[0].hypot(x[1] - y)
}

pub fn probe_blowup(res: &DecompositionResult, dom: &GapDomain, bd: &BoundaryData) -> Result<BlowupProbe> {
    let norm = |g: [f64; 2]| g[0].hypot(g[1]);
    let mid = [0.0, 0.5 * (dom.h(0.0)?.value + dom.eps + dom.h1(0.0)?.value)];
    let grad_mid = norm(probe_gradient(&res.u, mid)?);
    let mut grad_segment_max: f64 = 0.0;
    for k in 1..20 {
        let y = dom.eps * k as f64 / 20.0;
        grad_segment_max = grad_segment_max.max(norm(probe_gradient(&res.u, [0.0, y])?));
    }
    let rho = rho_n(dom.mode.dimension(), dom.eps.min(0.499))?;
    let mut ratios = Vec::new();
    let mut ratio_max: f64 = 0.0;
    for x in sample_grid(dom)? {
        let d = segment_distance(x, dom.eps);
        let s = dom.eps + d * d;
        let bound = rho * res.q.abs() / s + (d / s + 1.0) * bd.c2_norm;
        let r = norm(probe_gradient(&res.u, x)?) / bound;
        ratio_max = ratio_max.max(r);
        ratios.push((x, r));
    }
    Ok(BlowupProbe {
        grad_mid,
        grad_segment_max,
        ratio_max,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientField;
    use crate::elliptic::assemble;
    use crate::geometry::{make_eccentric_disks, WeightMode};
    use crate::mesh::triangulate;
    use std::sync::Arc;

    fn setup(eps: f64) -> (GapDomain, LinearSystem) {
        let dom = make_eccentric_disks(0.5, 1.0, eps, WeightMode::Planar).unwrap();
        let mesh = Arc::new(triangulate(&dom, 0.04, 8).unwrap());
        let sys = assemble(mesh, &CoefficientField::identity()).unwrap();
        (dom, sys)
    }

    #[test]
    fn polynomial_data_derivatives() {
        let (dom, _) = setup(0.01);
        let bd = BoundaryData::new(
            vec![PhiTerm { coef: 2.0, px: 2, py: 1 }, PhiTerm { coef: -1.0, px: 0, py: 3 }],
            &dom,
        )
        .unwrap();
        let x = [0.3, -0.2];
        assert!((bd.eval(x) - (2.0 * 0.09 * -0.2 + 0.008)).abs() < 1e-15);
        let g = bd.gradient(x);
        assert!((g[0] - 2.0 * 2.0 * 0.3 * -0.2).abs() < 1e-15);
        assert!((g[1] - (2.0 * 0.09 - 3.0 * 0.04)).abs() < 1e-15);
        let h = bd.hessian(x);
        assert!((h[0][0] - 4.0 * -0.2).abs() < 1e-15);
        assert!((h[0][1] - 4.0 * 0.3).abs() < 1e-15 && h[0][1] == h[1][0]);
        assert!((h[1][1] - 6.0 * 0.2).abs() < 1e-15);
        assert_eq!(bd.phi_at_p, 0.0);
    }

    #[test]
    fn eccentric_disks_match_bipolar_capacitance() {
        let (r, big_r, eps) = (0.5, 1.0, 0.01);
        let (dom, sys) = setup(eps);
        let bd = BoundaryData::from_preset(PhiPreset::LinearXn, &dom).unwrap();
        let res = solve_decomposition(&sys, &bd).unwrap();
        let d = big_r - r - eps;
        let exact = 2.0 * std::f64::consts::PI / ((big_r * big_r + r * r - d * d) / (2.0 * big_r * r)).acosh();
        assert!((res.a11 - exact).abs() < 0.01 * exact, "{} vs {exact}", res.a11);
        assert!(res.green_residual < 1e-12);
        assert!(res.flux_residual <= 1e-9 * (res.a11 + res.q.abs()));
        assert!(res.functionals.consistent);
        let (lo, hi) = res.v1.min_max();
        assert!(lo >= -1e-8 && hi <= 1.0 + 1e-8);
    }

    #[test]
    fn constant_data_gives_constant_solution() {
        let (dom, sys) = setup(0.01);
        let bd = BoundaryData::from_preset(PhiPreset::Constant, &dom).unwrap();
        let res = solve_decomposition(&sys, &bd).unwrap();
        assert_eq!(res.q, 0.0);
        assert_eq!(res.c1, 1.0);
        assert!(res.u.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let probe = probe_blowup(&res, &dom, &bd).unwrap();
        assert!(probe.grad_mid <= 1e-8);
    }

    #[test]
    fn pipeline_is_linear() {
        let (dom, sys) = setup(0.01);
        let b1 = BoundaryData::from_preset(PhiPreset::LinearXn, &dom).unwrap();
        let b2 = BoundaryData::from_preset(PhiPreset::Quadratic, &dom).unwrap();
        let mut sum = b1.terms.clone();
        sum.extend(b2.scaled(3.0).terms);
        let b3 = BoundaryData::new(sum, &dom).unwrap();
        let r1 = solve_decomposition(&sys, &b1).unwrap();
        let r2 = solve_decomposition(&sys, &b2).unwrap();
        let r3 = solve_decomposition(&sys, &b3).unwrap();
        for i in 0..r3.u.values.len() {
            let lin = r1.u.values[i] + 3.0 * r2.u.values[i];
            assert!((r3.u.values[i] - lin).abs() < 1e-8);
        }
    }

    #[test]
    fn midpoint_gradient_of_v1_matches_bipolar_field() {
        let (r, big_r, eps) = (0.5, 1.0, 0.01);
        let dom = make_eccentric_disks(r, big_r, eps, WeightMode::Planar).unwrap();
        let mesh = Arc::new(triangulate(&dom, 0.03, 12).unwrap());
        let sys = assemble(mesh, &CoefficientField::identity()).unwrap();
        let (v1, _) = solve_v1(&sys).unwrap();
        // bipolar limit points a, b on the y axis: the common pair of
        // inverse points of both circles
        let ci = eps + r;
        let s = (r * r - ci * ci) / (big_r - ci);
        let p = big_r * s;
        let disc = (s * s - 4.0 * p).sqrt();
        let (a, b) = (0.5 * (s - disc), 0.5 * (s + disc));
        let k = |y: f64| ((y - a) / (y - b)).abs().ln();
        let y = eps / 2.0;
        let exact = (1.0 / (y - a) - 1.0 / (y - b)) / (k(eps) - k(0.0));
        let g = probe_gradient(&v1, [0.0, y]).unwrap();
        assert!((g[1] - exact).abs() < 0.02 * exact.abs(), "{} vs {exact}", g[1]);
    }
}

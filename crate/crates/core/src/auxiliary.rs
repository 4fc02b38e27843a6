//! Closed-form comparison functions for the gap and measurement of how far
//! the solved fields stray from them.
//!
//! All three functions live on the graph chart `|x| <= 2 r0`:
//! - `ubar = (y - h) / delta`, the linear interpolant across the gap;
//! - `utilde = ubar + c(x, y) (s^2 - 1)`, with `s` the gap coordinate scaled to
//!   `[-1, 1]` and `c = A21 delta' / (4 A22)`, which removes the leading
//!   divergence of `A grad ubar`;
//! - `uhat = (1 - base) (phi(x, h(x)) - phi(P))`, the matching function for
//!   the outer data.

use crate::coefficients::{CoefficientField, Mat2};
use crate::conductivity::BoundaryData;
use crate::elliptic::{local_gradient, ScalarField};
use crate::error::Result;
use crate::geometry::{GapDomain, Point, WeightMode};

#[derive(Clone, Debug, PartialEq)]
pub enum AuxKind {
    Ubar,
    Utilde(CoefficientField),
    /// Outer-data function built on `ubar` (or on `utilde` when a coefficient
    /// field is attached).
    Uhat(BoundaryData, Option<CoefficientField>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuxFunction {
    pub kind: AuxKind,
    pub dom: GapDomain,
    /// Gap used in the formula; differs from `dom.eps` only for controls.
    pub eps_used: f64,
}

/// Value and gradient at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxValue {
    pub value: f64,
    pub grad: [f64; 2],
}

impl AuxFunction {
    pub fn ubar(dom: &GapDomain) -> Self {
        Self::new(AuxKind::Ubar, dom)
    }

    pub fn utilde(dom: &GapDomain, a: &CoefficientField) -> Self {
        Self::new(AuxKind::Utilde(a.clone()), dom)
    }

    pub fn uhat(dom: &GapDomain, bd: &BoundaryData, a: Option<&CoefficientField>) -> Self {
        Self::new(AuxKind::Uhat(bd.clone(), a.cloned()), dom)
    }

    fn new(kind: AuxKind, dom: &GapDomain) -> Self {
        AuxFunction {
            kind,
            dom: dom.clone(),
            eps_used: dom.eps,
        }
    }

    /// Same function evaluated with a deliberately different gap.
    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps_used = eps;
        self
    }

    pub fn eval(&self, x: Point) -> Result<AuxValue> {
        match &self.kind {
            AuxKind::Ubar => self.eval_ubar(x),
            AuxKind::Utilde(a) => self.eval_utilde(x, a),
            AuxKind::Uhat(bd, a) => {
                let base = match a {
                    Some(a) => self.eval_utilde(x, a)?,
                    None => self.eval_ubar(x)?,
                };
                let h = self.dom.h(x[0])?;
                let foot = [x[0], h.value];
                let g = bd.eval(foot) - bd.eval(self.dom.p);
                let dphi = bd.gradient(foot);
                let dg = dphi[0] + dphi[1] * h.d1;
                Ok(AuxValue {
                    value: (1.0 - base.value) * g,
                    grad: [
                        -base.grad[0] * g + (1.0 - base.value) * dg,
                        -base.grad[1] * g,
                    ],
                })
            }
        }
    }

    fn eval_ubar(&self, x: Point) -> Result<AuxValue> {
        let h = self.dom.h(x[0])?;
        let mut d = self.dom.delta(x[0])?;
        d.value += self.eps_used - self.dom.eps;
        let v = (x[1] - h.value) / d.value;
        Ok(AuxValue {
            value: v,
            grad: [-h.d1 / d.value - v * d.d1 / d.value, 1.0 / d.value],
        })
    }

    fn eval_utilde(&self, x: Point, a: &CoefficientField) -> Result<AuxValue> {
        let base = self.eval_ubar(x)?;
        if a.is_identity {
            return Ok(base);
        }
        let h = self.dom.h(x[0])?;
        let h1 = self.dom.h1(x[0])?;
        let mut d = self.dom.delta(x[0])?;
        d.value += self.eps_used - self.dom.eps;
        // gap coordinate in [-1, 1]
        let s = (2.0 * x[1] - (self.eps_used + h1.value + h.value)) / d.value;
        let ds = [-(h1.d1 + h.d1) / d.value - s * d.d1 / d.value, 2.0 / d.value];
        let q = s * s - 1.0;
        let dq = [2.0 * s * ds[0], 2.0 * s * ds[1]];

        let am = a.eval(x);
        let da = a.grad(x);
        let (a21, a22) = (am[1][0], am[1][1]);
        let c = a21 * d.d1 / (4.0 * a22);
        let dc = |k: usize, dd1: f64| {
            (da[k][1][0] * d.d1 + a21 * dd1) / (4.0 * a22) - c * da[k][1][1] / a22
        };
        let grad_c = [dc(0, d.d2), dc(1, 0.0)];
        Ok(AuxValue {
            value: base.value + c * q,
            grad: [
                base.grad[0] + grad_c[0] * q + c * dq[0],
                base.grad[1] + grad_c[1] * q + c * dq[1],
            ],
        })
    }

    /// Corrector term `c (s^2 - 1)` alone (zero for `ubar`).
    pub fn corrector(&self, x: Point) -> Result<f64> {
        match &self.kind {
            AuxKind::Utilde(a) => Ok(self.eval_utilde(x, a)?.value - self.eval_ubar(x)?.value),
            _ => Ok(0.0),
        }
    }
}

/// Measurement grid: 41 tangential stations on `[-r0, r0]` (on `[0, r0]` for
/// a meridian section) times 11 layers at relative heights `0.05..=0.95`
/// across the gap.
pub fn sample_grid(dom: &GapDomain) -> Result<Vec<Point>> {
    let x_min = match dom.mode {
        WeightMode::Planar => -dom.r0,
        WeightMode::Axisymmetric => 0.0,
    };
    let mut pts = Vec::with_capacity(41 * 11);
    for i in 0..41 {
        let x = x_min + (dom.r0 - x_min) * i as f64 / 40.0;
        let h = dom.h(x)?.value;
        let d = dom.delta(x)?.value;
        for j in 0..11 {
            let t = 0.05 + 0.09 * j as f64;
            pts.push([x, h + t * d]);
        }
    }
    Ok(pts)
}

/// How the reference gradient of the comparison function is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientReference {
    /// Gradient of the P1 interpolant on the element containing the sample.
    /// Removes the interpolation error that P1 carries in the tangential
    /// direction of a thin gap.
    Interpolant,
    /// Closed-form gradient at the sample point.
    Analytic,
}

/// `max |grad f - grad aux|` over the sample grid.
pub fn sup_gradient_difference(
    f: &ScalarField,
    aux: &AuxFunction,
    reference: GradientReference,
) -> Result<f64> {
    let mesh = &f.mesh;
    let mut worst: f64 = 0.0;
    let mut hint = None;
    for x in sample_grid(&aux.dom)? {
        let t = mesh.locate(x, hint)?;
        hint = Some(t);
        let gf = f.element_gradient(t);
        let ga = match reference {
            GradientReference::Analytic => aux.eval(x)?.grad,
            GradientReference::Interpolant => {
                let tri = mesh.triangles[t];
                let mut vals = [0.0; 3];
                for k in 0..3 {
                    vals[k] = aux.eval(mesh.vertices[tri[k]])?.value;
                }
                local_gradient(mesh, t, vals)
            }
        };
        worst = worst.max((gf[0] - ga[0]).hypot(gf[1] - ga[1]));
    }
    Ok(worst)
}

/// `max |div(A grad aux)| (eps + x^2)` over the sample grid, with the
/// divergence taken by central differences of the closed-form flux.
pub fn corrector_flux_check(aux: &AuxFunction, a: &CoefficientField) -> Result<f64> {
    let flux = |p: Point| -> Result<[f64; 2]> {
        let g = aux.eval(p)?.grad;
        let m: Mat2 = a.eval(p);
        Ok([m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]])
    };
    let mut worst: f64 = 0.0;
    for x in sample_grid(&aux.dom)? {
        let step = 1e-3 * aux.dom.delta(x[0])?.value;
        let fxp = flux([x[0] + step, x[1]])?;
        let fxm = flux([x[0] - step, x[1]])?;
        let fyp = flux([x[0], x[1] + step])?;
        let fym = flux([x[0], x[1] - step])?;
        let div = (fxp[0] - fxm[0] + fyp[1] - fym[1]) / (2.0 * step);
        worst = worst.max(div.abs() * (aux.dom.eps + x[0] * x[0]));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{make_preset, CoefficientPreset};
    use crate::conductivity::PhiPreset;
    use crate::geometry::{make_eccentric_disks, make_ellipse_in_disk, WeightMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disks(eps: f64) -> GapDomain {
        make_eccentric_disks(0.5, 1.0, eps, WeightMode::Planar).unwrap()
    }

    fn offdiag() -> CoefficientField {
        make_preset(CoefficientPreset::ConstantOffdiag { s: 1.0, a_off: 0.3 }).unwrap()
    }

    fn rotation() -> CoefficientField {
        make_preset(CoefficientPreset::SmoothRotation {
            kappa: 0.5,
            theta0: 0.7,
            width: 0.2,
            center: [0.05, 0.0],
        })
        .unwrap()
    }

    #[test]
    fn midpoint_values() {
        let dom = disks(0.01);
        let v = AuxFunction::ubar(&dom).eval([0.0, 0.005]).unwrap();
        assert!((v.value - 0.5).abs() < 1e-12);
        assert!(v.grad[0].abs() < 1e-12 && (v.grad[1] - 100.0).abs() < 1e-9);
        let bd = BoundaryData::from_preset(PhiPreset::Quadratic, &dom).unwrap();
        for y in [0.001, 0.005, 0.009] {
            assert_eq!(AuxFunction::uhat(&dom, &bd, None).eval([0.0, y]).unwrap().value, 0.0);
        }
        // constant coefficient with zero off-diagonal: no corrector
        let s = make_preset(CoefficientPreset::Scaled { s: 3.0 }).unwrap();
        let ut = AuxFunction::utilde(&dom, &s);
        let ub = AuxFunction::ubar(&dom);
        for x in [[0.05, 0.003], [-0.1, 0.01]] {
            assert_eq!(ut.eval(x).unwrap(), ub.eval(x).unwrap());
        }
        // on the midline the quadratic factor is -1
        let a = offdiag();
        let ut = AuxFunction::utilde(&dom, &a);
        let x = 0.07;
        let (h, h1) = (dom.h(x).unwrap(), dom.h1(x).unwrap());
        let mid = [x, 0.5 * (dom.eps + h1.value + h.value)];
        let c = -0.3 * (h1.d1 - h.d1) / 4.0;
        assert!((ut.corrector(mid).unwrap() - c).abs() < 1e-14);
    }

    #[test]
    fn boundary_identities_at_random_stations() {
        let dom = make_ellipse_in_disk(0.5, 0.3, 1.0, 0.01).unwrap();
        let bd = BoundaryData::from_preset(PhiPreset::Quadratic, &dom).unwrap();
        let rot = rotation();
        let ub = AuxFunction::ubar(&dom);
        let ut = AuxFunction::utilde(&dom, &rot);
        let uh = AuxFunction::uhat(&dom, &bd, Some(&rot));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x = rng.gen_range(-dom.r0..dom.r0);
            let lo = [x, dom.h(x).unwrap().value];
            let hi = [x, dom.eps + dom.h1(x).unwrap().value];
            assert!(ub.eval(lo).unwrap().value.abs() < 1e-12);
            assert!((ub.eval(hi).unwrap().value - 1.0).abs() < 1e-12);
            assert!(ut.eval(lo).unwrap().value.abs() < 1e-12);
            assert!((ut.eval(hi).unwrap().value - 1.0).abs() < 1e-12);
            assert!(uh.eval(hi).unwrap().value.abs() < 1e-12);
            let want = bd.eval(lo) - bd.eval(dom.p);
            assert!((uh.eval(lo).unwrap().value - want).abs() < 1e-12);
            let d = dom.delta(x).unwrap().value;
            let mid = [x, lo[1] + 0.37 * d];
            assert!((ub.eval(mid).unwrap().grad[1] * d - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_differences() {
        let dom = make_ellipse_in_disk(0.5, 0.3, 1.0, 0.01).unwrap();
        let bd = BoundaryData::from_preset(PhiPreset::Quadratic, &dom).unwrap();
        let rot = rotation();
        let funcs = [
            AuxFunction::ubar(&dom),
            AuxFunction::utilde(&dom, &offdiag()),
            AuxFunction::utilde(&dom, &rot),
            AuxFunction::uhat(&dom, &bd, None),
            AuxFunction::uhat(&dom, &bd, Some(&rot)),
        ];
        for f in &funcs {
            for (x, t) in [(0.0, 0.3), (0.04, 0.5), (-0.11, 0.8), (0.15, 0.1)] {
                let d = dom.delta(x).unwrap().value;
                let p = [x, dom.h(x).unwrap().value + t * d];
                let g = f.eval(p).unwrap().grad;
                let s = 1e-6 * d;
                for k in 0..2 {
                    let (mut pp, mut pm) = (p, p);
                    pp[k] += s;
                    pm[k] -= s;
                    let fd = (f.eval(pp).unwrap().value - f.eval(pm).unwrap().value) / (2.0 * s);
                    let scale = g[0].hypot(g[1]);
                    assert!((fd - g[k]).abs() <= 1e-5 * scale + 1e-12, "{:?} {k}: {fd} vs {}", f.kind, g[k]);
                }
            }
        }
    }

    #[test]
    fn tangential_derivative_envelope_is_stable() {
        // |d_x ubar| (eps + x^2) / |x| stays bounded as the gap closes
        let measure = |eps: f64| {
            let dom = disks(eps);
            let ub = AuxFunction::ubar(&dom);
            sample_grid(&dom)
                .unwrap()
                .into_iter()
                .filter(|p| p[0] != 0.0)
                .map(|p| ub.eval(p).unwrap().grad[0].abs() * (eps + p[0] * p[0]) / p[0].abs())
                .fold(0.0, f64::max)
        };
        let (a, b) = (measure(1e-2), measure(1e-4));
        assert!(a / b < 2.0 && b / a < 2.0, "{a} {b}");
    }

    #[test]
    fn corrector_cancels_offdiagonal_divergence() {
        let a = offdiag();
        let mut plain = Vec::new();
        let mut corrected = Vec::new();
        // growth over the last decade: the corrected function saturates,
        // the plain one keeps growing like eps^(-1/2)
        for eps in [1e-3, 1e-4] {
            let dom = disks(eps);
            plain.push(corrector_flux_check(&AuxFunction::ubar(&dom), &a).unwrap());
            corrected.push(corrector_flux_check(&AuxFunction::utilde(&dom, &a), &a).unwrap());
        }
        assert!(plain[1] / plain[0] > 2.0, "{plain:?}");
        assert!(corrected[1] / corrected[0] < 1.5, "{corrected:?}");
        let lap = corrector_flux_check(&AuxFunction::ubar(&disks(1e-4)), &CoefficientField::identity()).unwrap();
        assert!(lap < 15.0, "{lap}");
    }

    #[test]
    fn outside_chart_is_an_error() {
        let dom = disks(0.01);
        assert!(AuxFunction::ubar(&dom).eval([3.0 * dom.r0, 0.0]).is_err());
    }
}

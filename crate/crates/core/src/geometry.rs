//! Gap domains: a convex inclusion `D1` sitting a distance `eps` above the
//! boundary of a convex matrix domain `D`.
//!
//! Every [`GapDomain`] is stored in its normalized frame: the nearest point
//! `P` of the outer boundary is the origin, the nearest point `P1` of the
//! inclusion is `(0, eps)`, and near the origin the two boundaries are the
//! graphs `y = h(x)` and `y = eps + h1(x)` with `h(0) = h1(0) = 0` and
//! `h'(0) = h1'(0) = 0`.

use crate::error::{GapError, Result};

pub type Point = [f64; 2];

/// How integrals over the meridian section are weighted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WeightMode {
    /// Genuine two-dimensional problem (n = 2).
    Planar,
    /// Body of revolution about the `y` axis (n = 3); integrals carry `2 pi x`.
    Axisymmetric,
}

impl WeightMode {
    pub fn dimension(self) -> u32 {
        match self {
            WeightMode::Planar => 2,
            WeightMode::Axisymmetric => 3,
        }
    }
}

/// Value and first two derivatives of a graph `y = g(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphValue {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// A closed convex boundary curve.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryProfile {
    /// Ellipse with semi-axes `a` (along the rotated x axis) and `b`,
    /// rotated counterclockwise by `angle`. A circle has `a == b`.
    Conic {
        center: Point,
        a: f64,
        b: f64,
        angle: f64,
    },
    /// Convex lens bounded below by `y = base + sum c_k |x|^k` and above by its
    /// mirror image `y = base + 2 height - sum c_k |x|^k`.
    GraphLens {
        base: f64,
        coeffs: Vec<(u32, f64)>,
        height: f64,
    },
}

impl BoundaryProfile {
    pub fn circle(center: Point, radius: f64) -> Self {
        BoundaryProfile::Conic {
            center,
            a: radius,
            b: radius,
            angle: 0.0,
        }
    }

    /// Interior point used as the pole of the angular parametrization.
    pub fn center(&self) -> Point {
        match self {
            BoundaryProfile::Conic { center, .. } => *center,
            BoundaryProfile::GraphLens { base, height, .. } => [0.0, base + height],
        }
    }

    fn poly(coeffs: &[(u32, f64)], x: f64) -> GraphValue {
        let ax = x.abs();
        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        let mut g = GraphValue {
            value: 0.0,
            d1: 0.0,
            d2: 0.0,
        };
        for &(k, c) in coeffs {
            let kf = k as f64;
            g.value += c * ax.powi(k as i32);
            if k >= 1 {
                g.d1 += c * kf * ax.powi(k as i32 - 1) * sign;
            }
            if k >= 2 {
                g.d2 += c * kf * (kf - 1.0) * ax.powi(k as i32 - 2);
            }
        }
        g
    }

    /// Half-width of a lens: the `X > 0` where the lower and upper graphs meet.
    fn lens_half_width(coeffs: &[(u32, f64)], height: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        while Self::poly(coeffs, hi).value < height {
            hi *= 2.0;
            if hi > 1e6 {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if Self::poly(coeffs, mid).value < height {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Lower branch of the boundary as a graph over `x`, with exact derivatives.
    /// Returns `None` where the vertical line misses the curve.
    pub fn lower_graph(&self, x: f64) -> Option<GraphValue> {
        match self {
            BoundaryProfile::Conic {
                center,
                a,
                b,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let (ia2, ib2) = (1.0 / (a * a), 1.0 / (b * b));
                let p = c * c * ia2 + s * s * ib2;
                let q = c * s * (ia2 - ib2);
                let r = s * s * ia2 + c * c * ib2;
                let dx = x - center[0];
                // r v^2 + 2 q dx v + p dx^2 - 1 = 0 with v = y - cy
                let disc = q * q * dx * dx - r * (p * dx * dx - 1.0);
                if disc < 0.0 {
                    return None;
                }
                let v = (-q * dx - disc.sqrt()) / r;
                let fx = 2.0 * (p * dx + q * v);
                let fy = 2.0 * (q * dx + r * v);
                if fy == 0.0 {
                    return None;
                }
                let d1 = -fx / fy;
                let d2 = -(2.0 * p + 4.0 * q * d1 + 2.0 * r * d1 * d1) / fy;
                Some(GraphValue {
                    value: center[1] + v,
                    d1,
                    d2,
                })
            }
            BoundaryProfile::GraphLens {
                base,
                coeffs,
                height,
            } => {
                if x.abs() > Self::lens_half_width(coeffs, *height) {
                    return None;
                }
                let g = Self::poly(coeffs, x);
                Some(GraphValue {
                    value: base + g.value,
                    ..g
                })
            }
        }
    }

    /// Signed level-set value: negative inside, zero on the curve, positive outside.
    pub fn level(&self, p: Point) -> f64 {
        match self {
            BoundaryProfile::Conic {
                center,
                a,
                b,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                (u / a).powi(2) + (v / b).powi(2) - 1.0
            }
            BoundaryProfile::GraphLens {
                base,
                coeffs,
                height,
            } => {
                let g = Self::poly(coeffs, p[0]).value;
                let lower = base + g;
                let upper = base + 2.0 * height - g;
                (lower - p[1]).max(p[1] - upper)
            }
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.level(p) < 0.0
    }

    /// Intersection of the ray `pole + t (sin theta, -cos theta)`, `t > 0`,
    /// with the curve. `pole` must lie strictly inside.
    pub fn ray_point(&self, pole: Point, theta: f64) -> Point {
        let d = [theta.sin(), -theta.cos()];
        match self {
            BoundaryProfile::Conic {
                center,
                a,
                b,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let (ox, oy) = (pole[0] - center[0], pole[1] - center[1]);
                let (u0, v0) = (c * ox + s * oy, -s * ox + c * oy);
                let (du, dv) = (c * d[0] + s * d[1], -s * d[0] + c * d[1]);
                let qa = (du / a).powi(2) + (dv / b).powi(2);
                let qb = 2.0 * (u0 * du / (a * a) + v0 * dv / (b * b));
                let qc = (u0 / a).powi(2) + (v0 / b).powi(2) - 1.0;
                let t = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
                [pole[0] + t * d[0], pole[1] + t * d[1]]
            }
            BoundaryProfile::GraphLens {
                base,
                coeffs,
                height,
            } => {
                let (mut lo, mut hi) = (0.0, 1.0);
                while self.contains([pole[0] + hi * d[0], pole[1] + hi * d[1]]) {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.contains([pole[0] + mid * d[0], pole[1] + mid * d[1]]) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let t = 0.5 * (lo + hi);
                let x = pole[0] + t * d[0];
                let y = pole[1] + t * d[1];
                // snap onto whichever branch is active
                let g = Self::poly(coeffs, x).value;
                let lower = base + g;
                let upper = base + 2.0 * height - g;
                if (y - lower).abs() <= (y - upper).abs() {
                    [x, lower]
                } else {
                    [x, upper]
                }
            }
        }
    }

    /// Point, first and second derivative of the angular parametrization
    /// `theta -> curve` (conics: the affine angle; lenses: the pole ray).
    pub fn param_point(&self, theta: f64) -> [Point; 3] {
        match self {
            BoundaryProfile::Conic {
                center,
                a,
                b,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let rot = |u: f64, v: f64| [c * u - s * v, s * u + c * v];
                let (st, ct) = theta.sin_cos();
                let p = rot(a * st, -b * ct);
                [
                    [center[0] + p[0], center[1] + p[1]],
                    rot(a * ct, b * st),
                    rot(-a * st, b * ct),
                ]
            }
            BoundaryProfile::GraphLens { .. } => {
                let pole = self.center();
                let h = 1e-4;
                let p0 = self.ray_point(pole, theta);
                let pp = self.ray_point(pole, theta + h);
                let pm = self.ray_point(pole, theta - h);
                [
                    p0,
                    [(pp[0] - pm[0]) / (2.0 * h), (pp[1] - pm[1]) / (2.0 * h)],
                    [
                        (pp[0] - 2.0 * p0[0] + pm[0]) / (h * h),
                        (pp[1] - 2.0 * p0[1] + pm[1]) / (h * h),
                    ],
                ]
            }
        }
    }

    /// Enclosed area, closed form for conics.
    pub fn area(&self) -> f64 {
        match self {
            BoundaryProfile::Conic { a, b, .. } => std::f64::consts::PI * a * b,
            BoundaryProfile::GraphLens { coeffs, height, .. } => {
                let x_max = Self::lens_half_width(coeffs, *height);
                // area = 2 * int_{-X}^{X} (height - g(x)) dx
                let mut acc = 0.0;
                let n = 4000;
                for i in 0..n {
                    let x = x_max * (i as f64 + 0.5) / n as f64;
                    acc += height - Self::poly(coeffs, x).value;
                }
                4.0 * acc * x_max / n as f64
            }
        }
    }

    /// Apply `p -> rot(p - origin)` where `rot` turns by `-phi`.
    fn transformed(&self, origin: Point, phi: f64) -> Result<Self> {
        match self {
            BoundaryProfile::Conic {
                center,
                a,
                b,
                angle,
            } => {
                let (s, c) = (-phi).sin_cos();
                let (dx, dy) = (center[0] - origin[0], center[1] - origin[1]);
                Ok(BoundaryProfile::Conic {
                    center: [c * dx - s * dy, s * dx + c * dy],
                    a: *a,
                    b: *b,
                    angle: angle - phi,
                })
            }
            BoundaryProfile::GraphLens { .. } => Err(GapError::InvalidGeometry(
                "graph lenses are defined in the normalized frame only".into(),
            )),
        }
    }
}

/// A normalized gap domain together with its local convexity constants.
#[derive(Clone, Debug, PartialEq)]
pub struct GapDomain {
    pub outer: BoundaryProfile,
    pub inner: BoundaryProfile,
    pub eps: f64,
    pub p: Point,
    pub p1: Point,
    /// Radius of the gap neighborhood; graphs are charted on `|x| <= 2 r0`.
    pub r0: f64,
    pub m: u32,
    pub kappa0: f64,
    pub kappa1: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub mode: WeightMode,
}

impl GapDomain {
    /// Build from already-normalized profiles. Curvature and envelope constants
    /// are measured, not validated; see [`validate_convexity`].
    pub fn from_normalized(
        outer: BoundaryProfile,
        inner: BoundaryProfile,
        eps: f64,
        m: u32,
        mode: WeightMode,
        r0: Option<f64>,
    ) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(GapError::InvalidGeometry("eps must be positive".into()));
        }
        if m < 2 {
            return Err(GapError::InvalidGeometry("convexity exponent m must be >= 2".into()));
        }
        let mut dom = GapDomain {
            outer,
            inner,
            eps,
            p: [0.0, 0.0],
            p1: [0.0, eps],
            r0: 0.0,
            m,
            kappa0: 0.0,
            kappa1: 0.0,
            lambda0: 0.0,
            lambda1: 0.0,
            mode,
        };
        dom.r0 = match r0 {
            Some(r) if r > 0.0 => r,
            Some(_) => return Err(GapError::InvalidGeometry("R0 must be positive".into())),
            None => dom.default_r0(),
        };
        if dom.outer.lower_graph(2.0 * dom.r0).is_none()
            || dom.inner.lower_graph(2.0 * dom.r0).is_none()
            || dom.outer.lower_graph(-2.0 * dom.r0).is_none()
            || dom.inner.lower_graph(-2.0 * dom.r0).is_none()
        {
            return Err(GapError::InvalidGeometry(
                "boundaries are not graphs over |x'| <= 2 R0".into(),
            ));
        }
        let report = validate_convexity(&dom);
        dom.kappa0 = report.kappa0;
        dom.kappa1 = report.kappa1;
        dom.lambda0 = report.lambda0;
        dom.lambda1 = report.lambda1;
        Ok(dom)
    }

    /// Same domain with an explicit gap-neighborhood radius. Curvatures at the
    /// origin are kept; the envelope constants are re-measured on the new chart.
    pub fn with_r0(mut self, r0: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(GapError::InvalidGeometry("R0 must be positive".into()));
        }
        if [2.0 * r0, -2.0 * r0]
            .iter()
            .any(|&x| self.outer.lower_graph(x).is_none() || self.inner.lower_graph(x).is_none())
        {
            return Err(GapError::InvalidGeometry(format!(
                "boundaries are not graphs over |x'| <= 2 R0 = {}",
                2.0 * r0
            )));
        }
        self.r0 = r0;
        let report = validate_convexity(&self);
        self.lambda0 = report.lambda0;
        self.lambda1 = report.lambda1;
        Ok(self)
    }

    /// Largest radius with both graph slopes bounded by 1/2 on `|x| <= 2 R0`.
    fn default_r0(&self) -> f64 {
        let slope_ok = |x: f64| -> bool {
            [x, -x].iter().all(|&xx| {
                match (self.outer.lower_graph(xx), self.inner.lower_graph(xx)) {
                    (Some(g), Some(g1)) => g.d1.abs() <= 0.5 && g1.d1.abs() <= 0.5,
                    _ => false,
                }
            })
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while slope_ok(hi) && hi < 1e3 {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if slope_ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * lo
    }

    /// Rigidly move an arbitrarily placed conic pair into the normalized frame.
    pub fn from_raw(
        outer: BoundaryProfile,
        inner: BoundaryProfile,
        mode: WeightMode,
    ) -> Result<Self> {
        let (p, p1, dist) = closest_pair(&outer, &inner)?;
        let dir = [(p1[0] - p[0]) / dist, (p1[1] - p[1]) / dist];
        // rotation taking `dir` onto +y
        let phi = dir[1].atan2(dir[0]) - std::f64::consts::FRAC_PI_2;
        let outer = outer.transformed(p, phi)?;
        let inner = inner.transformed(p, phi)?;
        Self::from_normalized(outer, inner, dist, 2, mode, None)
    }

    /// `h(x)`: the outer boundary near `P`.
    pub fn h(&self, x: f64) -> Result<GraphValue> {
        self.check_chart(x)?;
        self.outer
            .lower_graph(x)
            .ok_or_else(|| GapError::OutsideChart { x, limit: 2.0 * self.r0 })
    }

    /// `h1(x)`: the inclusion boundary near `P1`, shifted down by `eps`.
    pub fn h1(&self, x: f64) -> Result<GraphValue> {
        self.check_chart(x)?;
        let g = self
            .inner
            .lower_graph(x)
            .ok_or_else(|| GapError::OutsideChart { x, limit: 2.0 * self.r0 })?;
        Ok(GraphValue {
            value: g.value - self.eps,
            ..g
        })
    }

    fn check_chart(&self, x: f64) -> Result<()> {
        if x.abs() > 2.0 * self.r0 * (1.0 + 1e-12) {
            Err(GapError::OutsideChart {
                x,
                limit: 2.0 * self.r0,
            })
        } else {
            Ok(())
        }
    }

    /// Gap width `delta(x) = eps + h1(x) - h(x)` with its first two derivatives.
    pub fn delta(&self, x: f64) -> Result<GraphValue> {
        let h = self.h(x)?;
        let h1 = self.h1(x)?;
        Ok(GraphValue {
            value: self.eps + h1.value - h.value,
            d1: h1.d1 - h.d1,
            d2: h1.d2 - h.d2,
        })
    }

    /// Tangential length over which the gap width doubles.
    pub fn natural_length(&self) -> f64 {
        if self.m == 2 && self.kappa1 > 0.0 {
            (self.eps / self.kappa1).sqrt()
        } else {
            let lam = if self.lambda0 > 0.0 { self.lambda0 } else { 1.0 };
            (self.eps / lam).powf(1.0 / self.m as f64)
        }
    }

    /// Closed-form area of `D \ D1` (planar measure).
    pub fn planar_area(&self) -> f64 {
        self.outer.area() - self.inner.area()
    }
}

/// Gap width at tangential coordinate `xp`.
pub fn gap_width(dom: &GapDomain, xp: f64) -> Result<f64> {
    Ok(dom.delta(xp)?.value)
}

/// Eccentric disks in the normalized frame: outer circle of radius `big_r`
/// through the origin, inclusion of radius `r` with lowest point `(0, eps)`.
pub fn make_eccentric_disks(r: f64, big_r: f64, eps: f64, mode: WeightMode) -> Result<GapDomain> {
    if !(r > 0.0) {
        return Err(GapError::InvalidGeometry("inner radius must be positive".into()));
    }
    if !(eps > 0.0) {
        return Err(GapError::InvalidGeometry("eps must be positive".into()));
    }
    if r + eps >= big_r {
        return Err(GapError::InvalidGeometry(format!(
            "inclusion does not fit: r + eps = {} >= R = {big_r}",
            r + eps
        )));
    }
    let outer = BoundaryProfile::circle([0.0, big_r], big_r);
    let inner = BoundaryProfile::circle([0.0, eps + r], r);
    let mut dom = GapDomain::from_normalized(outer, inner, eps, 2, mode, Some(0.4 * r.min(big_r)))?;
    dom.kappa0 = 1.0 / r;
    dom.kappa1 = 1.0 / r - 1.0 / big_r;
    Ok(dom)
}

/// Lens pair with `h(x) = 0.5 x^2` and `h1(x) - h(x) = lambda |x|^m`.
pub fn make_m_profile(m: u32, lambda: f64, eps: f64, mode: WeightMode) -> Result<GapDomain> {
    if !(lambda > 0.0) {
        return Err(GapError::InvalidGeometry("lambda must be positive".into()));
    }
    make_graph_pair(&[(2, 0.5)], &[(m, lambda)], eps, m, mode)
}

/// Lens pair from explicit graph coefficients: outer lower graph `h`, and
/// `h1 = h + diff`. The outer lens has half-height 0.5, the inclusion 0.25.
pub fn make_graph_pair(
    h_coeffs: &[(u32, f64)],
    diff_coeffs: &[(u32, f64)],
    eps: f64,
    m: u32,
    mode: WeightMode,
) -> Result<GapDomain> {
    if h_coeffs.iter().chain(diff_coeffs).any(|(k, c)| *k < 2 || !c.is_finite()) {
        return Err(GapError::InvalidGeometry(
            "graph coefficients need k >= 2 and finite c_k".into(),
        ));
    }
    let mut inner_coeffs: Vec<(u32, f64)> = h_coeffs.to_vec();
    inner_coeffs.extend_from_slice(diff_coeffs);
    let outer = BoundaryProfile::GraphLens {
        base: 0.0,
        coeffs: h_coeffs.to_vec(),
        height: 0.5,
    };
    let inner = BoundaryProfile::GraphLens {
        base: eps,
        coeffs: inner_coeffs,
        height: 0.25,
    };
    GapDomain::from_normalized(outer, inner, eps, m, mode, None)
}

/// Inclusion ellipse (`a` horizontal, `b` vertical) whose bottom sits `eps`
/// above the bottom of a circle of radius `big_r`.
pub fn make_ellipse_in_disk(a: f64, b: f64, big_r: f64, eps: f64) -> Result<GapDomain> {
    if !(a > 0.0 && b > 0.0 && eps > 0.0) {
        return Err(GapError::InvalidGeometry("ellipse axes and eps must be positive".into()));
    }
    if 2.0 * b + eps >= 2.0 * big_r || a >= big_r {
        return Err(GapError::InvalidGeometry("ellipse does not fit in the disk".into()));
    }
    let outer = BoundaryProfile::circle([0.0, big_r], big_r);
    let inner = BoundaryProfile::Conic {
        center: [0.0, eps + b],
        a,
        b,
        angle: 0.0,
    };
    GapDomain::from_normalized(outer, inner, eps, 2, WeightMode::Planar, None)
}

/// Result of sampling the local convexity assumptions.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexityReport {
    pub kappa0: f64,
    pub kappa1: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// `h1 - h > 0` away from the origin and `delta > 0` on the chart.
    pub separated: bool,
    /// Hessian conditions at the origin (only required when `m == 2`).
    pub hessian_ok: bool,
    /// `lambda0 |x|^m <= h1 - h <= lambda1 |x|^m` with `0 < lambda0 <= lambda1 < inf`.
    pub envelope_ok: bool,
    pub pass: bool,
}

/// Sample the convexity conditions on a grid of `|x| <= 2 R0`.
pub fn validate_convexity(dom: &GapDomain) -> ConvexityReport {
    let n = 400;
    let lim = 2.0 * dom.r0;
    let mut lambda0 = f64::INFINITY;
    let mut lambda1 = 0.0_f64;
    let mut separated = true;
    let (mut kappa0, mut kappa1) = (0.0, 0.0);
    if let (Ok(h), Ok(h1)) = (dom.h(0.0), dom.h1(0.0)) {
        kappa0 = h1.d2;
        kappa1 = h1.d2 - h.d2;
    }
    for i in 0..=n {
        // skip the exact origin where the envelope ratio is 0/0
        let x = -lim + 2.0 * lim * i as f64 / n as f64;
        let (h, h1) = match (dom.h(x), dom.h1(x)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                separated = false;
                continue;
            }
        };
        let diff = h1.value - h.value;
        if dom.eps + diff <= 0.0 {
            separated = false;
        }
        if x.abs() > 1e-12 * lim.max(1e-300) {
            if diff <= 0.0 {
                separated = false;
            }
            let ratio = diff / x.abs().powi(dom.m as i32);
            lambda0 = lambda0.min(ratio);
            lambda1 = lambda1.max(ratio);
        }
    }
    if !lambda0.is_finite() {
        lambda0 = 0.0;
    }
    let hessian_ok = dom.m != 2 || (kappa0 > 1e-12 && kappa1 > 1e-12);
    let envelope_ok = lambda0 > 1e-12 && lambda1.is_finite() && lambda1 >= lambda0;
    ConvexityReport {
        kappa0,
        kappa1,
        lambda0,
        lambda1,
        separated,
        hessian_ok,
        envelope_ok,
        pass: separated && hessian_ok && envelope_ok,
    }
}

/// Closest pair of points between two nested convex curves, found by a damped
/// Newton iteration on the squared distance in the two curve parameters.
pub fn closest_pair(outer: &BoundaryProfile, inner: &BoundaryProfile) -> Result<(Point, Point, f64)> {
    let dist2 = |to: f64, ti: f64| {
        let po = outer.param_point(to)[0];
        let pi = inner.param_point(ti)[0];
        (po[0] - pi[0]).powi(2) + (po[1] - pi[1]).powi(2)
    };
    // coarse start
    let n = 96;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let to = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let ti = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            let d = dist2(to, ti);
            if d < best.0 {
                best = (d, to, ti);
            }
        }
    }
    let (_, mut to, mut ti) = best;
    let mut converged = false;
    for _ in 0..100 {
        let [po, dpo, ddpo] = outer.param_point(to);
        let [pi, dpi, ddpi] = inner.param_point(ti);
        let d = [po[0] - pi[0], po[1] - pi[1]];
        let dot = |u: Point, v: Point| u[0] * v[0] + u[1] * v[1];
        let g = [2.0 * dot(d, dpo), -2.0 * dot(d, dpi)];
        let h00 = 2.0 * (dot(dpo, dpo) + dot(d, ddpo));
        let h11 = 2.0 * (dot(dpi, dpi) - dot(d, ddpi));
        let h01 = -2.0 * dot(dpo, dpi);
        let det = h00 * h11 - h01 * h01;
        let (mut so, mut si) = if det > 0.0 && h00 > 0.0 {
            (-(h11 * g[0] - h01 * g[1]) / det, -(h00 * g[1] - h01 * g[0]) / det)
        } else {
            (-g[0] * 1e-2, -g[1] * 1e-2)
        };
        let f0 = dot(d, d);
        let mut step_ok = false;
        for _ in 0..40 {
            if dist2(to + so, ti + si) <= f0 {
                step_ok = true;
                break;
            }
            so *= 0.5;
            si *= 0.5;
        }
        if !step_ok {
            converged = g[0].abs() + g[1].abs() < 1e-9;
            break;
        }
        to += so;
        ti += si;
        if so.abs() + si.abs() < 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(GapError::NonConvergence {
            what: "closest-point search".into(),
            iterations: 100,
            residual: f64::NAN,
        });
    }
    let po = outer.param_point(to)[0];
    let pi = inner.param_point(ti)[0];
    let dist = dist2(to, ti).sqrt();
    Ok((po, pi, dist))
}

/// Nearest points of a normalized domain and their distance.
pub fn nearest_points(dom: &GapDomain) -> Result<(Point, Point, f64)> {
    closest_pair(&dom.outer, &dom.inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disks() -> GapDomain {
        make_eccentric_disks(0.5, 1.0, 0.01, WeightMode::Planar).unwrap()
    }

    #[test]
    fn disk_construction() {
        let d = disks();
        assert_eq!(d.p, [0.0, 0.0]);
        assert_eq!(d.p1, [0.0, 0.01]);
        assert!((d.kappa1 - 1.0).abs() < 1e-15);
        assert!((d.kappa0 - 2.0).abs() < 1e-15);
        assert_eq!(d.r0, 0.2);
        assert!(make_eccentric_disks(0.5, 1.0, 0.0, WeightMode::Planar).is_err());
        assert!(make_eccentric_disks(0.99, 1.0, 0.02, WeightMode::Planar).is_err());
        assert!(make_eccentric_disks(-0.5, 1.0, 0.01, WeightMode::Planar).is_err());
    }

    #[test]
    fn gap_width_values() {
        let d = disks();
        assert!((gap_width(&d, 0.0).unwrap() - 0.01).abs() < 1e-15);
        // closed-form circle arithmetic
        let x: f64 = 0.1;
        let expect = 0.01 + (0.5 - (0.25 - x * x).sqrt()) - (1.0 - (1.0 - x * x).sqrt());
        let got = gap_width(&d, x).unwrap();
        assert!((got - expect).abs() < 1e-15);
        assert!((got - 0.0150894).abs() < 1e-7);
        assert!(gap_width(&d, 0.45).is_err());

        let m = make_m_profile(3, 1.0, 1e-3, WeightMode::Planar).unwrap();
        assert!((gap_width(&m, 0.1).unwrap() - 2e-3).abs() < 1e-15);
    }

    #[test]
    fn graph_derivatives_match_differences() {
        let d = make_ellipse_in_disk(0.5, 0.3, 1.0, 0.01).unwrap();
        for &x in &[-0.1, 0.03, 0.17] {
            let g = d.inner.lower_graph(x).unwrap();
            let s = 1e-5;
            let gp = d.inner.lower_graph(x + s).unwrap();
            let gm = d.inner.lower_graph(x - s).unwrap();
            assert!((g.d1 - (gp.value - gm.value) / (2.0 * s)).abs() < 1e-8);
            assert!((g.d2 - (gp.d1 - gm.d1) / (2.0 * s)).abs() < 1e-6);
        }
    }

    #[test]
    fn convexity_checks() {
        let rep = validate_convexity(&disks());
        assert!(rep.pass);
        assert!((rep.kappa1 - 1.0).abs() < 1e-12);

        let quartic =
            make_graph_pair(&[(2, 0.5)], &[(4, 1.0)], 1e-3, 4, WeightMode::Planar).unwrap();
        let rep = validate_convexity(&quartic);
        assert!(rep.pass);
        assert!((rep.lambda0 - 1.0).abs() < 1e-6 && (rep.lambda1 - 1.0).abs() < 1e-6, "{rep:?}");

        let wrong_m =
            make_graph_pair(&[(2, 0.5)], &[(4, 1.0)], 1e-3, 2, WeightMode::Planar).unwrap();
        let rep = validate_convexity(&wrong_m);
        assert!(!rep.hessian_ok);
        assert!(!rep.pass);

        let flat = make_graph_pair(&[(2, 0.5)], &[], 1e-3, 2, WeightMode::Planar).unwrap();
        let rep = validate_convexity(&flat);
        assert!(!rep.separated);
        assert!(!rep.pass);
    }

    #[test]
    fn nearest_points_normalized_disks() {
        let d = disks();
        let (p, p1, dist) = nearest_points(&d).unwrap();
        assert!(p[0].abs() < 1e-9 && p[1].abs() < 1e-12);
        assert!(p1[0].abs() < 1e-9 && (p1[1] - 0.01).abs() < 1e-12);
        assert!((dist - 0.01).abs() < 1e-12);
    }

    #[test]
    fn nearest_points_ellipse() {
        let d = make_ellipse_in_disk(0.5, 0.3, 1.0, 0.01).unwrap();
        let (_, _, dist) = nearest_points(&d).unwrap();
        assert!((dist - 0.01).abs() < 1e-10, "dist = {dist}");
    }

    #[test]
    fn rotated_pair_normalizes() {
        // disk pair rotated by 0.7 rad and translated
        let (s, c) = 0.7_f64.sin_cos();
        let shift = [0.3, -1.2];
        let place = |p: Point| [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]];
        let outer = BoundaryProfile::circle(place([0.0, 1.0]), 1.0);
        let inner = BoundaryProfile::circle(place([0.0, 0.51]), 0.5);
        let d = GapDomain::from_raw(outer, inner, WeightMode::Planar).unwrap();
        assert!((d.eps - 0.01).abs() < 1e-10);
        assert!((d.kappa1 - 1.0).abs() < 1e-6);
        assert!((d.kappa0 - 2.0).abs() < 1e-6);
        let reference = disks();
        for &x in &[0.0, 0.05, -0.1] {
            let a = gap_width(&d, x).unwrap();
            let b = gap_width(&reference, x).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn ray_points_lie_on_curves() {
        let d = make_m_profile(3, 1.0, 1e-3, WeightMode::Planar).unwrap();
        let pole = d.inner.center();
        for i in 0..50 {
            let th = i as f64 * 0.13;
            let q = d.inner.ray_point(pole, th);
            let g = BoundaryProfile::poly(&[(2, 0.5), (3, 1.0)], q[0]).value;
            let on_lower = (q[1] - (1e-3 + g)).abs() < 1e-12;
            let on_upper = (q[1] - (1e-3 + 0.5 - g)).abs() < 1e-12;
            assert!(on_lower || on_upper);
            let qo = d.outer.ray_point(pole, th);
            assert!(d.outer.level(qo).abs() < 1e-12);
        }
    }

    #[test]
    fn explicit_r0_overrides_default() {
        let d = make_eccentric_disks(0.5, 1.0, 0.01, WeightMode::Planar).unwrap();
        let e = d.clone().with_r0(0.1).unwrap();
        assert_eq!(e.r0, 0.1);
        assert_eq!(e.kappa0, d.kappa0);
        assert!(e.lambda0 > 0.0 && e.lambda1 >= e.lambda0);
        assert!(d.clone().with_r0(0.3).is_err());
        assert!(d.with_r0(-1.0).is_err());
    }
}

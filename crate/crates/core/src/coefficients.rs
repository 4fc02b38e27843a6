//! Closed-form coefficient fields `A(x)` for divergence-form problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GapError, Result};
use crate::geometry::{GapDomain, Point};

/// Symmetric 2x2 matrix stored row-major.
pub type Mat2 = [[f64; 2]; 2];

/// Extreme eigenvalues of a symmetric 2x2 matrix.
pub fn sym_eigenvalues(a: &Mat2) -> (f64, f64) {
    let mean = 0.5 * (a[0][0] + a[1][1]);
    let half_diff = 0.5 * (a[0][0] - a[1][1]);
    let r = half_diff.hypot(a[0][1]);
    (mean - r, mean + r)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum CoefficientPreset {
    Identity,
    /// `s I`
    Scaled { s: f64 },
    /// `[[s, a_off], [a_off, s]]`
    ConstantOffdiag { s: f64, a_off: f64 },
    /// `R(theta(x)) diag(1, kappa) R(theta(x))^T` with
    /// `theta(x) = theta0 exp(-|x - center|^2 / width^2)`.
    SmoothRotation {
        kappa: f64,
        theta0: f64,
        width: f64,
        center: Point,
    },
}

/// A certified coefficient field.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    pub preset: CoefficientPreset,
    pub lambda: f64,
    pub big_lambda: f64,
    pub is_identity: bool,
}

impl CoefficientField {
    pub fn identity() -> Self {
        make_preset(CoefficientPreset::Identity).expect("identity is elliptic")
    }

    pub fn eval(&self, x: Point) -> Mat2 {
        match &self.preset {
            CoefficientPreset::Identity => [[1.0, 0.0], [0.0, 1.0]],
            CoefficientPreset::Scaled { s } => [[*s, 0.0], [0.0, *s]],
            CoefficientPreset::ConstantOffdiag { s, a_off } => [[*s, *a_off], [*a_off, *s]],
            CoefficientPreset::SmoothRotation { kappa, .. } => {
                let th = self.rotation_angle(x).0;
                let (s2, c2) = (2.0 * th).sin_cos();
                let (p, q) = (0.5 * (1.0 + kappa), 0.5 * (1.0 - kappa));
                [[p + q * c2, q * s2], [q * s2, p - q * c2]]
            }
        }
    }

    /// Partial derivatives `[dA/dx, dA/dy]`.
    pub fn grad(&self, x: Point) -> [Mat2; 2] {
        match &self.preset {
            CoefficientPreset::SmoothRotation { kappa, .. } => {
                let (th, dth) = self.rotation_angle(x);
                let (s2, c2) = (2.0 * th).sin_cos();
                let q = 1.0 - kappa;
                // dA/dtheta = (1 - kappa) [[-sin 2t, cos 2t], [cos 2t, sin 2t]]
                let da = [[-q * s2, q * c2], [q * c2, q * s2]];
                let scale = |k: f64| [[da[0][0] * k, da[0][1] * k], [da[1][0] * k, da[1][1] * k]];
                [scale(dth[0]), scale(dth[1])]
            }
            _ => [[[0.0; 2]; 2]; 2],
        }
    }

    fn rotation_angle(&self, x: Point) -> (f64, [f64; 2]) {
        match &self.preset {
            CoefficientPreset::SmoothRotation {
                theta0,
                width,
                center,
                ..
            } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let w2 = width * width;
                let th = theta0 * (-(dx * dx + dy * dy) / w2).exp();
                (th, [-2.0 * dx / w2 * th, -2.0 * dy / w2 * th])
            }
            _ => (0.0, [0.0, 0.0]),
        }
    }
}

/// Build a preset and its analytic ellipticity bounds.
pub fn make_preset(preset: CoefficientPreset) -> Result<CoefficientField> {
    let (lambda, big_lambda, is_identity) = match &preset {
        CoefficientPreset::Identity => (1.0, 1.0, true),
        CoefficientPreset::Scaled { s } => (*s, *s, false),
        CoefficientPreset::ConstantOffdiag { s, a_off } => {
            if a_off.abs() >= *s {
                return Err(GapError::Ellipticity(format!(
                    "|a_off| = {} must be below s = {s}",
                    a_off.abs()
                )));
            }
            (s - a_off.abs(), s + a_off.abs(), false)
        }
        CoefficientPreset::SmoothRotation { kappa, width, .. } => {
            if !(*width > 0.0) {
                return Err(GapError::InvalidInput("rotation width must be positive".into()));
            }
            if !(*kappa > 0.0 && *kappa <= 1.0) {
                return Err(GapError::Ellipticity(format!("kappa = {kappa} outside (0, 1]")));
            }
            (*kappa, 1.0, false)
        }
    };
    if !(lambda > 0.0) || !big_lambda.is_finite() {
        return Err(GapError::Ellipticity(format!("lambda = {lambda} is not positive")));
    }
    Ok(CoefficientField {
        preset,
        lambda,
        big_lambda,
        is_identity,
    })
}

/// Sampled extreme eigenvalues over random points of the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticityBounds {
    pub lambda_hat: f64,
    pub big_lambda_hat: f64,
}

pub fn certify_ellipticity(
    a: &CoefficientField,
    dom: &GapDomain,
    n_samples: usize,
    seed: u64,
) -> Result<EllipticityBounds> {
    if n_samples < 100 {
        return Err(GapError::InvalidInput("certification needs at least 100 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // bounding box of the outer boundary from its pole rays
    let pole = dom.inner.center();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for i in 0..256 {
        let p = dom
            .outer
            .ray_point(pole, 2.0 * std::f64::consts::PI * i as f64 / 256.0);
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let mut bounds = EllipticityBounds {
        lambda_hat: f64::INFINITY,
        big_lambda_hat: 0.0,
    };
    let mut taken = 0;
    while taken < n_samples {
        let p = [rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1])];
        if !dom.outer.contains(p) || dom.inner.contains(p) {
            continue;
        }
        taken += 1;
        let (l, u) = sym_eigenvalues(&a.eval(p));
        bounds.lambda_hat = bounds.lambda_hat.min(l);
        bounds.big_lambda_hat = bounds.big_lambda_hat.max(u);
    }
    let slack = 1e-12 * a.big_lambda;
    if bounds.lambda_hat < a.lambda - slack {
        return Err(GapError::Ellipticity(format!(
            "sampled lambda {} below claimed {}",
            bounds.lambda_hat, a.lambda
        )));
    }
    if bounds.big_lambda_hat > a.big_lambda + slack {
        return Err(GapError::Ellipticity(format!(
            "sampled Lambda {} above claimed {}",
            bounds.big_lambda_hat, a.big_lambda
        )));
    }
    Ok(bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_eccentric_disks, WeightMode};

    fn dom() -> GapDomain {
        make_eccentric_disks(0.5, 1.0, 0.01, WeightMode::Planar).unwrap()
    }

    #[test]
    fn preset_bounds() {
        let id = make_preset(CoefficientPreset::Identity).unwrap();
        assert_eq!((id.lambda, id.big_lambda, id.is_identity), (1.0, 1.0, true));
        let off = make_preset(CoefficientPreset::ConstantOffdiag { s: 1.0, a_off: 0.3 }).unwrap();
        assert!((off.lambda - 0.7).abs() < 1e-15 && (off.big_lambda - 1.3).abs() < 1e-15);
        let (l, u) = sym_eigenvalues(&off.eval([0.1, 0.2]));
        assert!((l - 0.7).abs() < 1e-15 && (u - 1.3).abs() < 1e-15);
        assert!(matches!(
            make_preset(CoefficientPreset::ConstantOffdiag { s: 1.0, a_off: 1.0 }),
            Err(GapError::Ellipticity(_))
        ));
    }

    #[test]
    fn certification() {
        let d = dom();
        let id = CoefficientField::identity();
        let b = certify_ellipticity(&id, &d, 200, 1).unwrap();
        assert_eq!((b.lambda_hat, b.big_lambda_hat), (1.0, 1.0));
        let s5 = make_preset(CoefficientPreset::Scaled { s: 5.0 }).unwrap();
        let b = certify_ellipticity(&s5, &d, 200, 1).unwrap();
        assert_eq!((b.lambda_hat, b.big_lambda_hat), (5.0, 5.0));
        let rot = make_preset(CoefficientPreset::SmoothRotation {
            kappa: 0.4,
            theta0: 0.8,
            width: 0.3,
            center: [0.0, 0.5],
        })
        .unwrap();
        let b = certify_ellipticity(&rot, &d, 500, 7).unwrap();
        assert!((b.lambda_hat - 0.4).abs() < 1e-6);
        assert!((b.big_lambda_hat - 1.0).abs() < 1e-6);
        assert!(certify_ellipticity(&rot, &d, 10, 7).is_err());

        // a field claiming too much is rejected
        let mut liar = s5.clone();
        liar.lambda = 6.0;
        assert!(certify_ellipticity(&liar, &d, 200, 3).is_err());
    }

    #[test]
    fn rotation_derivative_matches_differences() {
        let rot = make_preset(CoefficientPreset::SmoothRotation {
            kappa: 0.5,
            theta0: 0.6,
            width: 0.4,
            center: [0.1, 0.2],
        })
        .unwrap();
        let x = [0.23, 0.05];
        let g = rot.grad(x);
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let (ap, am) = (rot.eval(xp), rot.eval(xm));
            for i in 0..2 {
                for j in 0..2 {
                    let fd = (ap[i][j] - am[i][j]) / (2.0 * h);
                    assert!((fd - g[k][i][j]).abs() < 1e-8);
                }
            }
        }
    }
}

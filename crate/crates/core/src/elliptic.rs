//! P1 finite elements for `-div(A grad w) = 0` with Dirichlet data on the
//! outer and inner boundaries, plus the energy, flux and gradient evaluations
//! the decomposition needs.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::coefficients::{sym_eigenvalues, CoefficientField};
use crate::error::{GapError, Result};
use crate::geometry::{Point, WeightMode};
use crate::mesh::{BoundaryTag, Mesh};

/// Default relative residual for the conjugate gradient solve.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).all(|k| self.get(self.cols[k], i) == self.vals[k])
        })
    }
}

/// Nodal P1 function.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(GapError::MeshMismatch);
        }
        Ok(ScalarField { mesh, values })
    }

    /// Nodal interpolant of a closed-form function.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.vertices.iter().map(|&p| f(p)).collect();
        ScalarField { mesh, values }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Constant gradient of the field on triangle `t`.
    pub fn element_gradient(&self, t: usize) -> [f64; 2] {
        element_gradient(&self.mesh, &self.values, t)
    }
}

/// Gradient of the P1 interpolant of nodal `values` on triangle `t`.
pub fn element_gradient(mesh: &Mesh, values: &[f64], t: usize) -> [f64; 2] {
    let tri = mesh.triangles[t];
    local_gradient(mesh, t, [values[tri[0]], values[tri[1]], values[tri[2]]])
}

/// Gradient on triangle `t` of the linear function with the given vertex
/// values (in the triangle's vertex order).
pub fn local_gradient(mesh: &Mesh, t: usize, values: [f64; 3]) -> [f64; 2] {
    let g = basis_gradients(mesh.triangle_points(t));
    let mut out = [0.0; 2];
    for i in 0..3 {
        out[0] += values[i] * g[i][0];
        out[1] += values[i] * g[i][1];
    }
    out
}

fn basis_gradients(p: [Point; 3]) -> [[f64; 2]; 3] {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2];
    }
    g
}

/// Convergence record of one solve.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Assembled stiffness for a mesh and coefficient field.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub mesh: Arc<Mesh>,
    pub coeff: CoefficientField,
    /// Full stiffness including Dirichlet rows.
    pub stiffness: CsrMatrix,
    free_nodes: Vec<usize>,
    reduced: CsrMatrix,
    pub tol: f64,
}

// interior three-point rule, barycentric weights 1/3 each
const QUAD3: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

fn check_elliptic(coeff: &CoefficientField, x: Point) -> Result<[[f64; 2]; 2]> {
    let a = coeff.eval(x);
    if a[0][1] != a[1][0] {
        return Err(GapError::Ellipticity(format!("A not symmetric at {x:?}")));
    }
    let (lo, hi) = sym_eigenvalues(&a);
    let slack = 1e-9 * coeff.big_lambda;
    if !(lo > 0.0) || lo < coeff.lambda - slack || hi > coeff.big_lambda + slack {
        return Err(GapError::Ellipticity(format!(
            "eigenvalues ({lo}, {hi}) at {x:?} outside [{}, {}]",
            coeff.lambda, coeff.big_lambda
        )));
    }
    Ok(a)
}

/// Assemble `K_ij = int A grad psi_j . grad psi_i` (weighted by `2 pi x` in
/// axisymmetric mode).
pub fn assemble(mesh: Arc<Mesh>, coeff: &CoefficientField) -> Result<LinearSystem> {
    let n = mesh.n_vertices();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(8); n];
    let add = |rows: &mut Vec<Vec<(usize, f64)>>, i: usize, j: usize, v: f64| {
        let row = &mut rows[i];
        match row.iter_mut().find(|e| e.0 == j) {
            Some(e) => e.1 += v,
            None => row.push((j, v)),
        }
    };
    for t in 0..mesh.n_triangles() {
        let p = mesh.triangle_points(t);
        let area = mesh.area(t);
        let g = basis_gradients(p);
        let mut ke = [[0.0; 3]; 3];
        let mut accumulate = |a: [[f64; 2]; 2], w: f64| {
            for i in 0..3 {
                let ag = [
                    a[0][0] * g[i][0] + a[0][1] * g[i][1],
                    a[1][0] * g[i][0] + a[1][1] * g[i][1],
                ];
                for j in i..3 {
                    ke[i][j] += w * (ag[0] * g[j][0] + ag[1] * g[j][1]);
                }
            }
        };
        match mesh.weight_mode {
            WeightMode::Planar => {
                let c = [
                    (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                    (p[0][1] + p[1][1] + p[2][1]) / 3.0,
                ];
                accumulate(check_elliptic(coeff, c)?, area);
            }
            WeightMode::Axisymmetric => {
                for b in QUAD3 {
                    let x = [
                        b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0],
                        b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1],
                    ];
                    let a = check_elliptic(coeff, x)?;
                    accumulate(a, area / 3.0 * 2.0 * PI * x[0]);
                }
            }
        }
        let tri = mesh.triangles[t];
        for i in 0..3 {
            add(&mut rows, tri[i], tri[i], ke[i][i]);
            for j in (i + 1)..3 {
                add(&mut rows, tri[i], tri[j], ke[i][j]);
                add(&mut rows, tri[j], tri[i], ke[i][j]);
            }
        }
    }
    let stiffness = CsrMatrix::from_rows(rows);

    let mut free_index = vec![usize::MAX; n];
    let mut free_nodes = Vec::new();
    for i in 0..n {
        if !mesh.is_dirichlet(i) {
            free_index[i] = free_nodes.len();
            free_nodes.push(i);
        }
    }
    let reduced_rows = free_nodes
        .iter()
        .map(|&i| {
            (stiffness.row_ptr[i]..stiffness.row_ptr[i + 1])
                .filter(|&k| free_index[stiffness.cols[k]] != usize::MAX)
                .map(|k| (free_index[stiffness.cols[k]], stiffness.vals[k]))
                .collect()
        })
        .collect();
    Ok(LinearSystem {
        mesh,
        coeff: coeff.clone(),
        stiffness,
        free_nodes,
        reduced: CsrMatrix::from_rows(reduced_rows),
        tol: DEFAULT_TOL,
    })
}

impl LinearSystem {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn n_free(&self) -> usize {
        self.free_nodes.len()
    }

    fn check_field(&self, f: &ScalarField) -> Result<()> {
        if Arc::ptr_eq(&self.mesh, &f.mesh) && f.values.len() == self.mesh.n_vertices() {
            Ok(())
        } else {
            Err(GapError::MeshMismatch)
        }
    }

    /// Jacobi-preconditioned conjugate gradients on the free nodes, zero
    /// initial guess.
    fn pcg(&self, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let a = &self.reduced;
        let n = a.n;
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        if b_norm == 0.0 {
            return Ok((
                x,
                SolveStats {
                    iterations: 0,
                    rel_residual: 0.0,
                },
            ));
        }
        let inv_diag: Vec<f64> = (0..n).map(|i| 1.0 / a.get(i, i)).collect();
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        let cap = (20.0 * (n as f64).sqrt()) as usize + 500;
        let mut res = 1.0;
        for it in 1..=cap {
            a.mul_into(&p, &mut ap);
            let pap = p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            if !(pap > 0.0) {
                return Err(GapError::NonConvergence {
                    what: "conjugate gradients (nonpositive curvature)".into(),
                    iterations: it,
                    residual: res,
                });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
            if res <= self.tol {
                return Ok((
                    x,
                    SolveStats {
                        iterations: it,
                        rel_residual: res,
                    },
                ));
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(GapError::NonConvergence {
            what: "conjugate gradients".into(),
            iterations: cap,
            residual: res,
        })
    }

    /// Solve with the given Dirichlet values (entries at free nodes ignored).
    pub fn solve_with_trace(&self, trace: &[f64]) -> Result<(ScalarField, SolveStats)> {
        let mut full: Vec<f64> = (0..self.mesh.n_vertices())
            .map(|i| if self.mesh.is_dirichlet(i) { trace[i] } else { 0.0 })
            .collect();
        let k_trace = self.stiffness.mul(&full);
        let b: Vec<f64> = self.free_nodes.iter().map(|&i| -k_trace[i]).collect();
        let (x, stats) = self.pcg(&b)?;
        for (k, &i) in self.free_nodes.iter().enumerate() {
            full[i] = x[k];
        }
        Ok((
            ScalarField {
                mesh: self.mesh.clone(),
                values: full,
            },
            stats,
        ))
    }
}

/// Dirichlet solve with `g_outer` on the outer boundary and `g_inner` on the
/// inclusion boundary.
pub fn solve_dirichlet(
    sys: &LinearSystem,
    g_outer: impl Fn(Point) -> f64,
    g_inner: impl Fn(Point) -> f64,
) -> Result<(ScalarField, SolveStats)> {
    let mesh = &sys.mesh;
    let mut trace = vec![0.0; mesh.n_vertices()];
    for (i, tag) in mesh.node_tags.iter().enumerate() {
        let v = match tag {
            Some(BoundaryTag::Outer) => g_outer(mesh.vertices[i]),
            Some(BoundaryTag::Inner) => g_inner(mesh.vertices[i]),
            _ => continue,
        };
        if !v.is_finite() {
            return Err(GapError::InvalidInput(format!("non-finite trace at node {i}")));
        }
        trace[i] = v;
    }
    sys.solve_with_trace(&trace)
}

/// `int A grad f . grad g` through the assembled stiffness.
pub fn energy_product(sys: &LinearSystem, f: &ScalarField, g: &ScalarField) -> Result<f64> {
    sys.check_field(f)?;
    sys.check_field(g)?;
    let kg = sys.stiffness.mul(&g.values);
    Ok(f.values.iter().zip(&kg).map(|(a, b)| a * b).sum())
}

/// Variationally consistent flux `-sum_{i in tag} (K f)_i`: the integral of
/// the conormal derivative with the normal pointing out of `D1` on `INNER`
/// (and into `D` on `OUTER`), so that the inner flux of `v1` is `-a11`.
pub fn boundary_flux(sys: &LinearSystem, f: &ScalarField, tag: BoundaryTag) -> Result<f64> {
    sys.check_field(f)?;
    let nodes: Vec<usize> = sys.mesh.nodes_with_tag(tag).collect();
    if nodes.is_empty() || tag == BoundaryTag::Axis {
        return Err(GapError::MissingTag(tag.to_string()));
    }
    let kf = sys.stiffness.mul(&f.values);
    Ok(-nodes.iter().map(|&i| kf[i]).sum::<f64>())
}

/// Piecewise-constant gradient on every triangle.
pub fn field_gradient(f: &ScalarField) -> Vec<[f64; 2]> {
    (0..f.mesh.n_triangles()).map(|t| f.element_gradient(t)).collect()
}

/// Gradient of the element containing `x`.
pub fn probe_gradient(f: &ScalarField, x: Point) -> Result<[f64; 2]> {
    let t = f.mesh.locate(x, None)?;
    Ok(f.element_gradient(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{make_preset, CoefficientPreset};
    use crate::mesh::annulus_mesh;

    fn annulus(h: f64, layers: usize) -> Arc<Mesh> {
        Arc::new(annulus_mesh(0.5, 1.0, h, layers).unwrap())
    }

    #[test]
    fn stiffness_rows_sum_to_zero_and_symmetric() {
        let sys = assemble(annulus(0.2, 4), &CoefficientField::identity()).unwrap();
        assert!(sys.stiffness.is_symmetric());
        let ones = vec![1.0; sys.mesh.n_vertices()];
        let k1 = sys.stiffness.mul(&ones);
        assert!(k1.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn stiffness_is_linear_in_coefficient() {
        let m = annulus(0.2, 4);
        let k1 = assemble(m.clone(), &CoefficientField::identity()).unwrap();
        let k2 = assemble(m, &make_preset(CoefficientPreset::Scaled { s: 2.0 }).unwrap()).unwrap();
        for (a, b) in k1.stiffness.vals.iter().zip(&k2.stiffness.vals) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn constant_traces_give_constant_field() {
        let sys = assemble(annulus(0.1, 6), &CoefficientField::identity()).unwrap();
        let (f, _) = solve_dirichlet(&sys, |_| 3.5, |_| 3.5).unwrap();
        assert!(f.values.iter().all(|v| (v - 3.5).abs() < 1e-9));
        assert!(energy_product(&sys, &f, &f).unwrap().abs() < 1e-9);
        assert!(boundary_flux(&sys, &f, BoundaryTag::Inner).unwrap().abs() < 1e-9);
        assert!(field_gradient(&f).iter().all(|g| g[0].abs() + g[1].abs() < 1e-8));
    }

    #[test]
    fn linear_patch_test() {
        let sys = assemble(annulus(0.1, 6), &CoefficientField::identity()).unwrap();
        let (f, _) = solve_dirichlet(&sys, |p| p[1], |p| p[1]).unwrap();
        for (v, p) in f.values.iter().zip(&sys.mesh.vertices) {
            assert!((v - p[1]).abs() < 1e-8);
        }
        for g in field_gradient(&f) {
            assert!(g[0].abs() < 1e-7 && (g[1] - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn annulus_matches_logarithm() {
        let mut errs = Vec::new();
        for (h, layers) in [(0.1, 5), (0.05, 10)] {
            let sys = assemble(annulus(h, layers), &CoefficientField::identity()).unwrap();
            let (f, _) = solve_dirichlet(&sys, |_| 0.0, |_| 1.0).unwrap();
            let err = f
                .values
                .iter()
                .zip(&sys.mesh.vertices)
                .map(|(v, p)| (v - (1.0 / p[0].hypot(p[1])).ln() / 2f64.ln()).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[1] < errs[0] && errs[1] < 2e-3, "{errs:?}");
    }

    #[test]
    fn flux_conservation_and_green_identity() {
        let sys = assemble(annulus(0.1, 6), &CoefficientField::identity()).unwrap();
        let (v1, _) = solve_dirichlet(&sys, |_| 0.0, |_| 1.0).unwrap();
        let a11 = energy_product(&sys, &v1, &v1).unwrap();
        let fin = boundary_flux(&sys, &v1, BoundaryTag::Inner).unwrap();
        let fout = boundary_flux(&sys, &v1, BoundaryTag::Outer).unwrap();
        assert!((fin + a11).abs() < 1e-12 * a11);
        assert!((fin + fout).abs() < 1e-8 * a11);
        assert!(boundary_flux(&sys, &v1, BoundaryTag::Axis).is_err());
    }

    #[test]
    fn mesh_mismatch_is_reported() {
        let sys = assemble(annulus(0.2, 4), &CoefficientField::identity()).unwrap();
        let other = ScalarField::interpolate(annulus(0.2, 4), |_| 1.0);
        assert_eq!(energy_product(&sys, &other, &other), Err(GapError::MeshMismatch));
    }
}

//! Gap-refined triangulations of `Omega = D \ closure(D1)`.
//!
//! The mesh is a structured ring of columns. Every column is a straight
//! segment from a point on the outer boundary to a point on the inclusion,
//! split into `gap_layers` equal layers. Inside the gap neighborhood
//! `|x| <= R0` the columns are the vertical lines `x = const`, so layer `j`
//! is the graph `y = h(x) + (j / layers) delta(x)`; their tangential spacing
//! is graded from a fraction of the natural gap length up to `h_target`.
//! Outside the band the columns fan around the inclusion, spaced by
//! `h_target` along the boundaries. Band and far field share the columns at
//! `|x| = R0`, so the two parts are conforming by construction.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{GapError, Result};
use crate::geometry::{GapDomain, Point, WeightMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Outer,
    Inner,
    /// Symmetry axis of an axisymmetric meridian section (natural condition).
    Axis,
}

impl std::fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BoundaryTag::Outer => "OUTER",
            BoundaryTag::Inner => "INNER",
            BoundaryTag::Axis => "AXIS",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Far,
    Band,
}

/// Tunables of the layered mesher.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshOptions {
    pub h_target: f64,
    pub gap_layers: usize,
    /// Band spacing as a fraction of `sqrt(delta(x) / curvature(x))`, the
    /// length over which a boundary chord sags by a fixed share of the gap.
    pub band_resolution: f64,
    /// Geometric growth factor of the band spacing.
    pub band_growth: f64,
}

impl MeshOptions {
    pub fn new(h_target: f64, gap_layers: usize) -> Self {
        MeshOptions {
            h_target,
            gap_layers,
            band_resolution: 0.25,
            band_growth: 1.2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    pub node_tags: Vec<Option<BoundaryTag>>,
    pub weight_mode: WeightMode,
    pub h_target: f64,
    pub gap_layers: usize,
    /// Number of columns of the structured ring.
    pub columns: usize,
    neighbors: Vec<[Option<usize>; 3]>,
}

struct Column {
    outer: Point,
    inner: Point,
    band: bool,
}

/// Tangential coordinates of the band columns on `[0, r0]`.
fn band_abscissae(dom: &GapDomain, opts: &MeshOptions) -> Result<Vec<f64>> {
    let r0 = dom.r0;
    let symmetric = dom.mode == WeightMode::Planar;
    // chord sag is curvature * dx^2 / 8, kept at a fixed fraction of the gap
    let local_at = |x: f64| -> Result<f64> {
        let d = dom.delta(x)?.value;
        let k = dom.h(x)?.d2.abs().max(dom.h1(x)?.d2.abs()).max(1e-12);
        Ok(opts.band_resolution * (d / k).sqrt())
    };
    let local = |x: f64| -> Result<f64> {
        let a = local_at(x)?;
        Ok(if symmetric { a.min(local_at(-x)?) } else { a })
    };
    let cap = opts.h_target;
    let mut xs = vec![0.0];
    let mut step = local(0.0)?.min(cap);
    let mut x = 0.0;
    while x + 0.5 * step < r0 {
        x += step;
        xs.push(x);
        if x < r0 {
            step = (step * opts.band_growth).min(cap).min(local(x)?);
        }
    }
    let last = *xs.last().unwrap();
    if xs.len() == 1 {
        xs.push(r0);
    } else {
        let scale = r0 / last;
        for v in xs.iter_mut() {
            *v *= scale;
        }
        *xs.last_mut().unwrap() = r0;
    }
    Ok(xs)
}

fn pole_angle(pole: Point, q: Point) -> f64 {
    (q[0] - pole[0]).atan2(-(q[1] - pole[1]))
}

fn polyline_length(f: impl Fn(f64) -> Point, a: f64, b: f64) -> f64 {
    let n = 512;
    let mut prev = f(a);
    let mut len = 0.0;
    for i in 1..=n {
        let p = f(a + (b - a) * i as f64 / n as f64);
        len += ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2)).sqrt();
        prev = p;
    }
    len
}

fn check_options(opts: &MeshOptions) -> Result<()> {
    if !(opts.h_target > 0.0) {
        return Err(GapError::InvalidMeshParameters("h_target must be positive".into()));
    }
    if opts.gap_layers < 4 {
        return Err(GapError::InvalidMeshParameters(format!(
            "gap_layers must be at least 4, got {}",
            opts.gap_layers
        )));
    }
    if !(opts.band_resolution > 0.0) || !(opts.band_growth >= 1.0) {
        return Err(GapError::InvalidMeshParameters(
            "band_resolution must be positive and band_growth >= 1".into(),
        ));
    }
    Ok(())
}

/// Layered mesh of a gap domain with default band grading.
pub fn triangulate(dom: &GapDomain, h_target: f64, gap_layers: usize) -> Result<Mesh> {
    triangulate_with(dom, &MeshOptions::new(h_target, gap_layers))
}

pub fn triangulate_with(dom: &GapDomain, opts: &MeshOptions) -> Result<Mesh> {
    check_options(opts)?;
    let axisym = dom.mode == WeightMode::Axisymmetric;
    let pos = band_abscissae(dom, opts)?;
    let xs: Vec<f64> = if axisym {
        pos.clone()
    } else {
        pos.iter()
            .rev()
            .map(|x| -x)
            .chain(pos.iter().skip(1).copied())
            .collect()
    };

    let mut columns = Vec::new();
    for &x in &xs {
        let h = dom.h(x)?;
        let g = dom.h1(x)?;
        columns.push(Column {
            outer: [x, h.value],
            inner: [x, dom.eps + g.value],
            band: true,
        });
    }

    let pole = dom.inner.center();
    if !dom.outer.contains(pole) || !dom.inner.contains(pole) {
        return Err(GapError::MeshConstruction("inclusion center is not interior".into()));
    }
    let right = columns.last().unwrap();
    let (o_start, i_start) = (pole_angle(pole, right.outer), pole_angle(pole, right.inner));
    let (o_end, i_end) = if axisym {
        (std::f64::consts::PI, std::f64::consts::PI)
    } else {
        let left = &columns[0];
        (
            pole_angle(pole, left.outer) + 2.0 * std::f64::consts::PI,
            pole_angle(pole, left.inner) + 2.0 * std::f64::consts::PI,
        )
    };
    let len_o = polyline_length(|t| dom.outer.ray_point(pole, t), o_start, o_end);
    let len_i = polyline_length(|t| dom.inner.ray_point(pole, t), i_start, i_end);
    let n_far = ((len_o.max(len_i) / opts.h_target).ceil() as usize).max(4);
    let last = if axisym { n_far } else { n_far - 1 };
    for i in 1..=last {
        let s = i as f64 / n_far as f64;
        let mut o = dom.outer.ray_point(pole, o_start + s * (o_end - o_start));
        let mut n = dom.inner.ray_point(pole, i_start + s * (i_end - i_start));
        if axisym && i == n_far {
            o[0] = 0.0;
            n[0] = 0.0;
        }
        columns.push(Column {
            outer: o,
            inner: n,
            band: false,
        });
    }
    build_ring(columns, opts, !axisym, dom.mode)
}

/// Concentric annulus `r < |x| < big_r` centered at the origin, for oracle
/// comparisons without a thin gap.
pub fn annulus_mesh(r: f64, big_r: f64, h_target: f64, layers: usize) -> Result<Mesh> {
    if !(r > 0.0 && big_r > r) {
        return Err(GapError::InvalidGeometry("annulus needs 0 < r < R".into()));
    }
    let opts = MeshOptions::new(h_target, layers);
    check_options(&opts)?;
    let n = ((2.0 * std::f64::consts::PI * big_r / h_target).ceil() as usize).max(8);
    let columns = (0..n)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let (s, c) = th.sin_cos();
            Column {
                outer: [big_r * s, -big_r * c],
                inner: [r * s, -r * c],
                band: false,
            }
        })
        .collect();
    build_ring(columns, &opts, true, WeightMode::Planar)
}

fn signed_area2(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn build_ring(columns: Vec<Column>, opts: &MeshOptions, periodic: bool, mode: WeightMode) -> Result<Mesh> {
    let nl = opts.gap_layers;
    let nc = columns.len();
    let node = |k: usize, j: usize| k * (nl + 1) + j;
    let mut vertices = Vec::with_capacity(nc * (nl + 1));
    let mut node_tags = Vec::with_capacity(nc * (nl + 1));
    for (k, col) in columns.iter().enumerate() {
        for j in 0..=nl {
            let t = j as f64 / nl as f64;
            let p = if j == 0 {
                col.outer
            } else if j == nl {
                col.inner
            } else {
                [
                    col.outer[0] + t * (col.inner[0] - col.outer[0]),
                    col.outer[1] + t * (col.inner[1] - col.outer[1]),
                ]
            };
            vertices.push(p);
            let on_axis = !periodic && (k == 0 || k == nc - 1);
            node_tags.push(if j == 0 {
                Some(BoundaryTag::Outer)
            } else if j == nl {
                Some(BoundaryTag::Inner)
            } else if on_axis {
                Some(BoundaryTag::Axis)
            } else {
                None
            });
        }
    }

    let n_quads = if periodic { nc } else { nc - 1 };
    let mut triangles = Vec::with_capacity(2 * n_quads * nl);
    let mut regions = Vec::with_capacity(2 * n_quads * nl);
    let mut boundary_edges = Vec::new();
    for k in 0..n_quads {
        let k1 = (k + 1) % nc;
        let region = if columns[k].band && columns[k1].band {
            Region::Band
        } else {
            Region::Far
        };
        for j in 0..nl {
            let (a, b, c, d) = (node(k, j), node(k1, j), node(k1, j + 1), node(k, j + 1));
            let (pa, pb, pc, pd) = (vertices[a], vertices[b], vertices[c], vertices[d]);
            let dist2 = |p: Point, q: Point| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            let split_ac = [[a, b, c], [a, c, d]];
            let split_bd = [[a, b, d], [b, c, d]];
            let ok = |tris: &[[usize; 3]; 2]| {
                tris.iter()
                    .all(|t| signed_area2(vertices[t[0]], vertices[t[1]], vertices[t[2]]) > 0.0)
            };
            let prefer_ac = dist2(pa, pc) <= dist2(pb, pd);
            let chosen = match (prefer_ac, ok(&split_ac), ok(&split_bd)) {
                (true, true, _) | (false, true, false) => split_ac,
                (false, _, true) | (true, false, true) => split_bd,
                _ => {
                    return Err(GapError::MeshConstruction(format!(
                        "inverted quad at column {k}, layer {j}"
                    )))
                }
            };
            for t in chosen {
                triangles.push(t);
                regions.push(region);
            }
        }
        boundary_edges.push(([node(k, 0), node(k1, 0)], BoundaryTag::Outer));
        boundary_edges.push(([node(k, nl), node(k1, nl)], BoundaryTag::Inner));
    }
    if !periodic {
        for &k in &[0, nc - 1] {
            for j in 0..nl {
                boundary_edges.push(([node(k, j), node(k, j + 1)], BoundaryTag::Axis));
            }
        }
    }

    let neighbors = build_neighbors(&triangles)?;
    Ok(Mesh {
        vertices,
        triangles,
        regions,
        boundary_edges,
        node_tags,
        weight_mode: mode,
        h_target: opts.h_target,
        gap_layers: nl,
        columns: nc,
        neighbors,
    })
}

fn build_neighbors(triangles: &[[usize; 3]]) -> Result<Vec<[Option<usize>; 3]>> {
    let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (tri[(e + 1) % 3], tri[(e + 2) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push((t, e));
        }
    }
    let mut nb = vec![[None; 3]; triangles.len()];
    for (key, owners) in edges {
        match owners.as_slice() {
            [_] => {}
            [(t0, e0), (t1, e1)] => {
                nb[*t0][*e0] = Some(*t1);
                nb[*t1][*e1] = Some(*t0);
            }
            _ => {
                return Err(GapError::MeshConstruction(format!(
                    "edge {key:?} shared by {} triangles",
                    owners.len()
                )))
            }
        }
    }
    Ok(nb)
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * signed_area2(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn neighbors(&self, t: usize) -> [Option<usize>; 3] {
        self.neighbors[t]
    }

    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = usize> + '_ {
        self.node_tags
            .iter()
            .enumerate()
            .filter(move |(_, t)| **t == Some(tag))
            .map(|(i, _)| i)
    }

    /// Nodes carrying a Dirichlet condition (outer and inner boundary).
    pub fn is_dirichlet(&self, i: usize) -> bool {
        matches!(self.node_tags[i], Some(BoundaryTag::Outer) | Some(BoundaryTag::Inner))
    }

    /// Barycentric coordinates of `p` in triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        let area = signed_area2(a, b, c);
        [
            signed_area2(p, b, c) / area,
            signed_area2(a, p, c) / area,
            signed_area2(a, b, p) / area,
        ]
    }

    /// Triangle containing `p`, found by walking from `hint`; falls back to a
    /// scan when the walk runs into the boundary.
    pub fn locate(&self, p: Point, hint: Option<usize>) -> Result<usize> {
        let tol = 1e-10;
        let mut t = hint.unwrap_or(0).min(self.n_triangles().saturating_sub(1));
        for _ in 0..self.n_triangles().min(100_000) {
            let bc = self.barycentric(t, p);
            let (e, &min) = bc
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            if min >= -tol {
                return Ok(t);
            }
            match self.neighbors[t][e] {
                Some(n) => t = n,
                None => break,
            }
        }
        (0..self.n_triangles())
            .find(|&t| self.barycentric(t, p).iter().all(|&l| l >= -tol))
            .ok_or(GapError::PointOutsideMesh(p))
    }

    /// Plain-text dump: header, vertices, then `i j k region` triangle lines.
    pub fn to_text(&self) -> String {
        let mut s = String::from("gapfield-mesh v1\n");
        let _ = writeln!(s, "{}", self.n_vertices());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        let _ = writeln!(s, "{}", self.n_triangles());
        for (t, r) in self.triangles.iter().zip(&self.regions) {
            let tag = match r {
                Region::Far => 0,
                Region::Band => 1,
            };
            let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], tag);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct MeshQuality {
    /// Smallest interior angle, degrees.
    pub min_angle: f64,
    /// Largest ratio of longest edge to smallest altitude.
    pub max_aspect: f64,
    pub gap_layer_count: usize,
    pub n_vertices: usize,
    pub n_triangles: usize,
}

pub fn mesh_quality_report(mesh: &Mesh) -> MeshQuality {
    let mut min_angle = f64::INFINITY;
    let mut max_aspect = 0.0_f64;
    for t in 0..mesh.n_triangles() {
        let p = mesh.triangle_points(t);
        let area = mesh.area(t);
        let mut longest = 0.0_f64;
        for i in 0..3 {
            let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            let cos = (u[0] * v[0] + u[1] * v[1])
                / ((u[0].hypot(u[1])) * (v[0].hypot(v[1])));
            min_angle = min_angle.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            longest = longest.max(u[0].hypot(u[1]));
        }
        // smallest altitude is 2 area / longest edge
        max_aspect = max_aspect.max(longest * longest / (2.0 * area));
    }
    // layers crossed along the column through P
    MeshQuality {
        min_angle,
        max_aspect,
        gap_layer_count: mesh.gap_layers,
        n_vertices: mesh.n_vertices(),
        n_triangles: mesh.n_triangles(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_eccentric_disks, make_m_profile};

    fn disk_mesh(eps: f64, h: f64, layers: usize) -> (GapDomain, Mesh) {
        let d = make_eccentric_disks(0.5, 1.0, eps, WeightMode::Planar).unwrap();
        let m = triangulate(&d, h, layers).unwrap();
        (d, m)
    }

    #[test]
    fn rejects_too_few_layers() {
        let d = make_eccentric_disks(0.5, 1.0, 0.01, WeightMode::Planar).unwrap();
        assert!(matches!(
            triangulate(&d, 0.05, 2),
            Err(GapError::InvalidMeshParameters(_))
        ));
        assert!(triangulate(&d, -1.0, 8).is_err());
    }

    #[test]
    fn layers_span_gap() {
        let (_, m) = disk_mesh(0.01, 0.05, 8);
        let q = mesh_quality_report(&m);
        assert_eq!(q.gap_layer_count, 8);
        assert!(q.min_angle > 0.0);
        // walk up the column x = 0 and count elements crossed
        let mut crossings = 0;
        let mut prev = None;
        for i in 0..200 {
            let y = 0.01 * (i as f64 + 0.5) / 200.0;
            let t = m.locate([1e-9, y], prev).unwrap();
            if Some(t) != prev {
                crossings += 1;
            }
            prev = Some(t);
        }
        assert!(crossings >= 8);
    }

    #[test]
    fn positive_areas_and_conforming() {
        for eps in [1e-2, 1e-4] {
            let (_, m) = disk_mesh(eps, 0.05, 8);
            assert!((0..m.n_triangles()).all(|t| m.area(t) > 0.0));
            let mut count: HashMap<(usize, usize), usize> = HashMap::new();
            for t in &m.triangles {
                for e in 0..3 {
                    let (a, b) = (t[e], t[(e + 1) % 3]);
                    *count.entry((a.min(b), a.max(b))).or_default() += 1;
                }
            }
            let boundary: std::collections::HashSet<(usize, usize)> = m
                .boundary_edges
                .iter()
                .map(|(e, _)| (e[0].min(e[1]), e[0].max(e[1])))
                .collect();
            for (e, c) in count {
                if boundary.contains(&e) {
                    assert_eq!(c, 1);
                } else {
                    assert_eq!(c, 2);
                }
            }
        }
    }

    #[test]
    fn boundary_vertices_on_profiles() {
        let (d, m) = disk_mesh(1e-3, 0.05, 8);
        for i in m.nodes_with_tag(BoundaryTag::Outer) {
            let p = m.vertices[i];
            let r = (p[0].powi(2) + (p[1] - 1.0).powi(2)).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
        }
        for i in m.nodes_with_tag(BoundaryTag::Inner) {
            let p = m.vertices[i];
            let r = (p[0].powi(2) + (p[1] - d.eps - 0.5).powi(2)).sqrt();
            assert!((r - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn area_matches_closed_form() {
        let (d, m) = disk_mesh(1e-2, 0.02, 8);
        let exact = d.planar_area();
        let err = (m.total_area() - exact).abs() / exact;
        assert!(err < 1e-3, "area error {err}");
        let (_, coarse) = disk_mesh(1e-2, 0.04, 8);
        let err_c = (coarse.total_area() - exact).abs() / exact;
        assert!(err < err_c);
    }

    #[test]
    fn refinement_quadruples_far_field() {
        let d = make_eccentric_disks(0.5, 1.0, 0.01, WeightMode::Planar).unwrap();
        let far = |m: &Mesh| m.regions.iter().filter(|r| **r == Region::Far).count() as f64;
        let a = triangulate(&d, 0.05, 8).unwrap();
        let b = triangulate(&d, 0.025, 16).unwrap();
        let ratio = far(&b) / far(&a);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn axisymmetric_mode_passes_through() {
        let d = make_eccentric_disks(0.5, 1.0, 0.01, WeightMode::Axisymmetric).unwrap();
        let m = triangulate(&d, 0.05, 8).unwrap();
        assert_eq!(m.weight_mode, WeightMode::Axisymmetric);
        assert!(m.vertices.iter().all(|v| v[0] >= 0.0));
        assert!(m.nodes_with_tag(BoundaryTag::Axis).count() > 0);
        let exact_half = 0.5 * d.planar_area();
        assert!((m.total_area() - exact_half).abs() / exact_half < 5e-3);
    }

    #[test]
    fn m_profile_mesh_is_valid() {
        let d = make_m_profile(3, 1.0, 1e-4, WeightMode::Planar).unwrap();
        let m = triangulate(&d, 0.05, 8).unwrap();
        assert!((0..m.n_triangles()).all(|t| m.area(t) > 0.0));
    }

    #[test]
    fn locate_and_export() {
        let m = annulus_mesh(0.5, 1.0, 0.1, 4).unwrap();
        assert!(m.locate([0.0, 0.0], None).is_err());
        let t = m.locate([0.75, 0.0], Some(0)).unwrap();
        assert!(m.barycentric(t, [0.75, 0.0]).iter().all(|&l| l >= -1e-10));
        let txt = m.to_text();
        let mut lines = txt.lines();
        assert_eq!(lines.next(), Some("gapfield-mesh v1"));
        assert_eq!(lines.next().unwrap().parse::<usize>().unwrap(), m.n_vertices());
    }
}

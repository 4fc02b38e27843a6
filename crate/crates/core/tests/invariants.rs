//! Property tests for solver invariants on coarse meshes.

use std::sync::Arc;

use gapfield::conductivity::{solve_decomposition, BoundaryData, PhiTerm};
use gapfield::geometry::make_eccentric_disks;
use gapfield::mesh::triangulate;
use gapfield::{assemble, energy_product, CoefficientField, LinearSystem, WeightMode};
use proptest::prelude::*;

fn system(eps: f64) -> (gapfield::GapDomain, LinearSystem) {
    let dom = make_eccentric_disks(0.5, 1.0, eps, WeightMode::Planar).unwrap();
    let mesh = Arc::new(triangulate(&dom, 0.08, 4).unwrap());
    let sys = assemble(mesh, &CoefficientField::identity()).unwrap();
    (dom, sys)
}

fn term(coef: f64, px: u32, py: u32) -> PhiTerm {
    PhiTerm { coef, px, py }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn solution_is_linear_in_boundary_data(a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let (dom, sys) = system(0.01);
        let f = BoundaryData::new(vec![term(1.0, 0, 1)], &dom).unwrap();
        let g = BoundaryData::new(vec![term(1.0, 2, 0), term(0.5, 1, 1)], &dom).unwrap();
        let mix = BoundaryData::new(vec![term(a, 0, 1), term(b, 2, 0), term(0.5 * b, 1, 1)], &dom).unwrap();
        let uf = solve_decomposition(&sys, &f).unwrap();
        let ug = solve_decomposition(&sys, &g).unwrap();
        let um = solve_decomposition(&sys, &mix).unwrap();
        for i in 0..um.u.values.len() {
            let want = a * uf.u.values[i] + b * ug.u.values[i];
            prop_assert!((um.u.values[i] - want).abs() <= 1e-7 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn capacity_potential_stays_between_its_boundary_values(eps in 0.003..0.1f64) {
        let (dom, sys) = system(eps);
        let bd = BoundaryData::new(vec![term(1.0, 0, 1)], &dom).unwrap();
        let res = solve_decomposition(&sys, &bd).unwrap();
        let (lo, hi) = res.v1.min_max();
        prop_assert!(lo >= -1e-6 && hi <= 1.0 + 1e-6, "v1 range [{lo}, {hi}]");
        prop_assert!(res.a11 > 0.0);
        prop_assert!(res.flux_residual <= 1e-8 * (res.a11 + res.q.abs()));
    }

    #[test]
    fn capacity_grows_as_gap_closes(e1 in 0.005..0.1f64, ratio in 2.0..5.0f64) {
        let (d1, s1) = system(e1);
        let (d2, s2) = system(e1 / ratio);
        let bd1 = BoundaryData::new(vec![term(1.0, 0, 1)], &d1).unwrap();
        let bd2 = BoundaryData::new(vec![term(1.0, 0, 1)], &d2).unwrap();
        let a1 = solve_decomposition(&s1, &bd1).unwrap().a11;
        let a2 = solve_decomposition(&s2, &bd2).unwrap().a11;
        prop_assert!(a2 > a1, "a11({}) = {a2} not above a11({e1}) = {a1}", e1 / ratio);
    }
}

#[test]
fn energy_product_is_symmetric_and_positive() {
    let (dom, sys) = system(0.02);
    let f = BoundaryData::new(vec![term(1.0, 0, 1)], &dom).unwrap();
    let g = BoundaryData::new(vec![term(1.0, 2, 0)], &dom).unwrap();
    let rf = solve_decomposition(&sys, &f).unwrap();
    let rg = solve_decomposition(&sys, &g).unwrap();
    let fg = energy_product(&sys, &rf.u, &rg.u).unwrap();
    let gf = energy_product(&sys, &rg.u, &rf.u).unwrap();
    assert!((fg - gf).abs() <= 1e-12 * fg.abs().max(1.0));
    assert!(energy_product(&sys, &rf.u, &rf.u).unwrap() > 0.0);
}

use std::sync::Arc;

use nalgebra::DMatrix;
use penproj::grid::{build_grid, BoundarySpec};
use penproj::linalg::{self, random_vector, seeded_rng, CsrMatrix, C64, ONE};
use penproj::operators::{
    anticommutator_norm, laplacian_fd, spectral_norm, wave_block, Coeff, Forcing, Generator,
    Stencil,
};
use penproj::projectors::{dirichlet_projector, neumann_projector};
use proptest::prelude::*;

fn dense_norm(m: &DMatrix<C64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

#[test]
fn unit_spacing_line_norm_is_four() {
    let dom = build_grid(1, 8, &BoundarySpec::WallDirichlet).unwrap();
    let l = laplacian_fd(&dom, 1.0, 1.0, Stencil::ThreePointPeriodic).unwrap();
    let est = spectral_norm(&l, 0.0, 1e-10).unwrap();
    assert!((est - 4.0).abs() < 1e-6, "{est}");
    assert!((l.norm_bound() - 4.0).abs() < 1e-12);
}

#[test]
fn identity_times_three() {
    let m = CsrMatrix::identity(5).scaled(C64::new(3.0, 0.0));
    let g = Generator::from_matrix(m).unwrap();
    assert!((spectral_norm(&g, 0.0, 1e-10).unwrap() - 3.0).abs() < 1e-8);
}

#[test]
fn laplacian_is_negative_semidefinite() {
    let dom = build_grid(2, 6, &BoundarySpec::WallDirichlet).unwrap();
    let l = laplacian_fd(&dom, 2.0, 0.2, Stencil::ThreePointPeriodic).unwrap();
    let dense = l.dense(0.0);
    assert!((&dense - dense.adjoint()).norm() < 1e-12);
    let eig =
        DMatrix::from_fn(dense.nrows(), dense.ncols(), |i, j| dense[(i, j)].re).symmetric_eigen();
    assert!(eig.eigenvalues.max() < 1e-9);
    assert!((dense_norm(&dense) - l.norm_bound()).abs() < 1e-8 * l.norm_bound());
}

#[test]
fn laplacian_rejects_bad_parameters() {
    let dom = build_grid(1, 4, &BoundarySpec::WallDirichlet).unwrap();
    assert!(laplacian_fd(&dom, 0.0, 1.0, Stencil::ThreePointPeriodic).is_err());
    assert!(laplacian_fd(&dom, 1.0, -1.0, Stencil::ThreePointPeriodic).is_err());
}

#[test]
fn spectral_norm_matches_dense() {
    let mut rng = seeded_rng(11);
    let n = 12;
    let entries = random_vector(n * n, &mut rng);
    let trip = (0..n * n).map(|k| (k / n, k % n, entries[k])).collect();
    let g = Generator::from_matrix(CsrMatrix::from_triplets(n, n, trip)).unwrap();
    let exact = dense_norm(&g.dense(0.0));
    let est = spectral_norm(&g, 0.0, 1e-10).unwrap();
    assert!((est - exact).abs() < 1e-6 * exact, "{est} vs {exact}");
}

#[test]
fn wave_block_conserves_energy_form() {
    let dom = build_grid(1, 10, &BoundarySpec::WallDirichlet).unwrap();
    let l = laplacian_fd(&dom, 1.0, 1.0, Stencil::ThreePointPeriodic).unwrap();
    let w = wave_block(&l, 1.0).unwrap();
    assert_eq!(w.dim(), 20);
    // with energy inner product diag(-L, I), A0 is skew
    let a = w.dense(0.0);
    let ld = l.dense(0.0);
    let mut m = DMatrix::<C64>::zeros(20, 20);
    m.view_mut((0, 0), (10, 10)).copy_from(&(-&ld));
    m.view_mut((10, 10), (10, 10))
        .copy_from(&DMatrix::identity(10, 10));
    let form = &m * &a + a.adjoint() * &m;
    assert!(form.norm() < 1e-12);
}

#[test]
fn wave_block_rejects_time_dependent() {
    let m = CsrMatrix::identity(3);
    let f: Arc<dyn Fn(f64) -> C64 + Send + Sync> = Arc::new(|t| C64::new(t, 0.0));
    let g = Generator::from_terms(vec![(Coeff::Time(f), m)], 1.0, 4).unwrap();
    assert!(g.is_time_dependent());
    assert!(wave_block(&g, 1.0).is_err());
}

#[test]
fn time_dependent_norm_sampled() {
    let f: Arc<dyn Fn(f64) -> C64 + Send + Sync> = Arc::new(|t| C64::new(1.0 + t, 0.0));
    let g = Generator::from_terms(vec![(Coeff::Time(f), CsrMatrix::identity(4))], 2.0, 8).unwrap();
    assert!((g.norm_bound() - 3.3).abs() < 1e-6);
    let v = vec![ONE; 4];
    assert_eq!(g.apply_vec(1.0, &v)[0], C64::new(2.0, 0.0));
}

#[test]
fn anticommutator_matches_dense() {
    let dom = build_grid(2, 5, &BoundarySpec::WallDirichlet).unwrap();
    let l = laplacian_fd(&dom, 1.0, 0.25, Stencil::ThreePointPeriodic).unwrap();
    let p = dirichlet_projector(&dom).unwrap();
    let a = l.dense(0.0);
    let pd = p.to_dense().unwrap();
    let exact = dense_norm(&(&pd * &a + a.adjoint() * &pd));
    let est = anticommutator_norm(&l, &p, &[0.0]).unwrap();
    assert!((est - exact).abs() < 1e-6 * exact);
}

#[test]
fn anticommutator_swap_projector() {
    let dom = build_grid(2, 6, &BoundarySpec::WallNeumannInward).unwrap();
    let l = laplacian_fd(&dom, 1.0, 1.0, Stencil::ThreePointPeriodic).unwrap();
    let p = neumann_projector(&dom).unwrap();
    let a = l.dense(0.0);
    let pd = p.to_dense().unwrap();
    let exact = dense_norm(&(&pd * &a + a.adjoint() * &pd));
    assert!((anticommutator_norm(&l, &p, &[0.0]).unwrap() - exact).abs() < 1e-6 * exact);
}

#[test]
fn forcing_constant_and_padding() {
    let b = Forcing::constant(vec![C64::new(3.0, 0.0), C64::new(0.0, 4.0)], 2.0);
    assert!((b.sup_norm() - 5.0).abs() < 1e-12);
    assert!((b.l1_norm() - 10.0).abs() < 1e-12);
    let p = b.padded(3);
    assert_eq!(p.dim(), 5);
    assert_eq!(p.eval_vec(0.5)[4], C64::new(0.0, 0.0));
    assert!(Forcing::zero(4).is_zero());
}

#[test]
fn matrix_market_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mtx");
    let g = Generator::from_matrix(CsrMatrix::identity(3)).unwrap();
    g.export_matrix_market(0.0, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("%%MatrixMarket matrix coordinate complex general"));
    assert!(text.contains("3 3 3"));
}

proptest! {
    #[test]
    fn laplacian_quadratic_form_nonpositive(seed in 0u64..500, d in 1usize..3, n in 3usize..9) {
        let dom = build_grid(d, n, &BoundarySpec::WallDirichlet).unwrap();
        let l = laplacian_fd(&dom, 1.5, 0.3, Stencil::ThreePointPeriodic).unwrap();
        let v = random_vector(dom.size(), &mut seeded_rng(seed));
        let q = linalg::dot(&v, &l.apply_vec(0.0, &v)).re;
        prop_assert!(q <= 1e-10 * linalg::norm_sqr(&v) * l.norm_bound());
    }

    #[test]
    fn wave_energy_rate_zero(seed in 0u64..500, n in 3usize..12) {
        let dom = build_grid(1, n, &BoundarySpec::WallDirichlet).unwrap();
        let l = laplacian_fd(&dom, 1.0, 1.0, Stencil::ThreePointPeriodic).unwrap();
        let w = wave_block(&l, 2.0).unwrap();
        let v = random_vector(2 * n, &mut seeded_rng(seed));
        let av = w.apply_vec(0.0, &v);
        // energy inner product diag(-c²L, I)
        let e = |x: &[C64], y: &[C64]| -2.0 * linalg::dot(&l.apply_vec(0.0, &x[..n]), &y[..n]).re
            + linalg::dot(&x[n..], &y[n..]).re;
        prop_assert!(e(&v, &av).abs() < 1e-9 * (1.0 + 8.0 * linalg::norm_sqr(&v)));
    }
}

use nalgebra::DMatrix;
use penproj::kubo::{
    exact_delta, kubo_first_order, order_study, penalty_generator, write_kubo_csv, KuboSetup,
    KUBO_HEADER,
};
use penproj::linalg::{random_vector, seeded_rng, CsrMatrix, C64, ONE, ZERO};
use penproj::operators::{Forcing, Generator};
use penproj::projectors::Projector;
use penproj::Error;
use rand_chacha::ChaCha8Rng;

fn gen(m: &DMatrix<C64>) -> Generator {
    let n = m.nrows();
    let trip = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, m[(i, j)]))
        .collect();
    Generator::from_matrix(CsrMatrix::from_triplets(n, n, trip)).unwrap()
}

fn diag(d: &[C64]) -> Generator {
    let n = d.len();
    Generator::from_matrix(CsrMatrix::from_triplets(
        n,
        n,
        d.iter().enumerate().map(|(i, &z)| (i, i, z)).collect(),
    ))
    .unwrap()
}

fn hermitian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let r = DMatrix::from_column_slice(n, n, &random_vector(n * n, rng));
    (&r + r.adjoint()) * C64::new(0.5, 0.0)
}

fn setup(h: Generator, v: Generator, p: Projector, v0: Vec<C64>, t: f64) -> KuboSetup {
    let n = v0.len();
    KuboSetup {
        h,
        v,
        zeta: 1e-2,
        b: Forcing::zero(n),
        observable: p,
        v0,
        t,
        grid: None,
    }
}

/// `H = −iK`, `V = −iW` with random Hermitian `K`, `W` on `n` dimensions.
fn unitary_setup(n: usize, seed: u64) -> KuboSetup {
    let mut rng = seeded_rng(seed);
    let mi = C64::new(0.0, -1.0);
    let h = gen(&(hermitian(n, &mut rng) * mi));
    let v = gen(&(hermitian(n, &mut rng) * mi));
    let p = Projector::point_set(n, (0..n / 2).collect()).unwrap();
    setup(h, v, p, random_vector(n, &mut rng), 1.0)
}

#[test]
fn zero_zeta_and_zero_perturbation() {
    let s = KuboSetup {
        zeta: 0.0,
        ..unitary_setup(4, 1)
    };
    assert_eq!(exact_delta(&s).unwrap(), 0.0);
    let pr = kubo_first_order(&s).unwrap();
    assert_eq!(pr.anticommutator, 0.0);
    assert_eq!(pr.duhamel, Some(0.0));

    let base = unitary_setup(4, 2);
    let s = KuboSetup {
        v: diag(&[ZERO; 4]),
        ..base
    };
    assert_eq!(kubo_first_order(&s).unwrap().anticommutator, 0.0);
    assert!(exact_delta(&s).unwrap().abs() < 1e-15);
}

#[test]
fn prediction_is_linear_in_zeta() {
    let s = unitary_setup(4, 3);
    let a = kubo_first_order(&s).unwrap();
    let b = kubo_first_order(&KuboSetup {
        zeta: 2.0 * s.zeta,
        ..s.clone()
    })
    .unwrap();
    assert!((b.anticommutator - 2.0 * a.anticommutator).abs() < 1e-14);
    assert!((b.commutator_im - 2.0 * a.commutator_im).abs() < 1e-14);
    assert!((b.duhamel.unwrap() - 2.0 * a.duhamel.unwrap()).abs() < 1e-14);
}

#[test]
fn first_order_term_on_four_dims() {
    // dense perturbation oracle: d/dζ of the exact expectation by central differences
    let s = unitary_setup(4, 4);
    let h = 1e-4;
    let up = exact_delta(&KuboSetup {
        zeta: h,
        ..s.clone()
    })
    .unwrap();
    let dn = exact_delta(&KuboSetup {
        zeta: -h,
        ..s.clone()
    })
    .unwrap();
    let slope = (up - dn) / (2.0 * h);
    let pr = kubo_first_order(&KuboSetup {
        zeta: 1.0,
        grid: Some(512),
        ..s.clone()
    })
    .unwrap();
    assert!(
        (pr.duhamel.unwrap() - slope).abs() < 1e-6 * (1.0 + slope.abs()),
        "{:?} vs {slope}",
        pr.duhamel
    );

    let rows = order_study(&s, &[1e-2, 5e-3, 2.5e-3]).unwrap();
    for r in &rows[1..] {
        let q = r.duhamel_ratio.unwrap();
        assert!((3.0..=5.0).contains(&q), "{q}");
    }
}

#[test]
fn commuting_diagonal_toy_is_exact() {
    // real decay rates, imaginary perturbation: magnitudes never change
    let h = diag(&[-1.0, -2.0, -3.0, -4.0].map(|x| C64::new(x, 0.0)));
    let v = diag(&[0.5, -1.5, 2.0, 0.25].map(|x| C64::new(0.0, x)));
    let p = Projector::point_set(4, vec![0, 2]).unwrap();
    let v0 = vec![
        ONE,
        C64::new(0.5, 0.5),
        C64::new(-0.3, 0.0),
        C64::new(0.0, 0.8),
    ];
    let s = setup(h, v, p, v0, 1.0);
    for r in order_study(&s, &[1e-2, 5e-3, 2.5e-3]).unwrap() {
        assert!(r.residual < 1e-14, "{r:?}");
        assert!(r.duhamel_residual.unwrap() < 1e-14);
    }
}

#[test]
fn identity_observable_closed_form() {
    // H = 0, P = I: the formula reduces to ζ t² ⟨V⟩
    let w = [-1.0, -0.5, -2.0];
    let v = diag(&w.map(|x| C64::new(x, 0.0)));
    let v0 = vec![ONE, C64::new(0.0, 2.0), C64::new(1.0, -1.0)];
    let n2: f64 = v0.iter().map(|z| z.norm_sqr()).sum();
    let mean: f64 = v0
        .iter()
        .zip(&w)
        .map(|(z, x)| z.norm_sqr() * x)
        .sum::<f64>()
        / n2;
    let t = 2.0;
    let zeta = 1e-3;
    let s = KuboSetup {
        zeta,
        ..setup(diag(&[ZERO; 3]), v, Projector::identity(3), v0.clone(), t)
    };
    let pr = kubo_first_order(&s).unwrap();
    assert!((pr.anticommutator - zeta * t * t * mean).abs() < 1e-12);
    // at t = 2 it coincides with the first-order drift of the squared norm
    let drift: f64 = v0
        .iter()
        .zip(&w)
        .map(|(z, x)| z.norm_sqr() * (2.0 * zeta * x * t).exp())
        .sum::<f64>()
        / n2
        - 1.0;
    assert!((pr.anticommutator - drift).abs() < 10.0 * zeta * zeta * t * t * 4.0);
    assert!(exact_delta(&s).unwrap().abs() < 1e-14);
}

#[test]
fn generic_six_dims() {
    let mut rng = seeded_rng(6);
    let n = 6;
    // stable: Hermitian part made negative definite
    let k = hermitian(n, &mut rng);
    let s = hermitian(n, &mut rng);
    let h = &k * C64::new(0.0, -1.0) - &s * &s * C64::new(0.2, 0.0);
    let v = hermitian(n, &mut rng) * C64::new(-0.5, 0.0);
    let p = Projector::swap_network(n, vec![(0, 3), (1, 4)]).unwrap();
    let st = setup(gen(&h), gen(&v), p, random_vector(n, &mut rng), 1.0);
    let rows = order_study(&st, &[1e-2, 5e-3, 2.5e-3]).unwrap();
    for r in &rows[1..] {
        let q = r.duhamel_ratio.unwrap();
        assert!((3.0..=5.0).contains(&q), "{q}");
        assert!(r.ratio.unwrap().is_finite());
    }
}

#[test]
fn penalty_orientation_runs() {
    let p = Projector::point_set(8, vec![0, 7]).unwrap();
    let h = penalty_generator(&p).unwrap();
    assert_eq!(h.mu_r_max(), 0.0);
    let lap: Vec<(usize, usize, C64)> = (0..8)
        .flat_map(|i| {
            [
                (i, i, C64::new(-2.0, 0.0)),
                (i, (i + 1) % 8, ONE),
                (i, (i + 7) % 8, ONE),
            ]
        })
        .collect();
    let v = Generator::from_matrix(CsrMatrix::from_triplets(8, 8, lap)).unwrap();
    let v0: Vec<C64> = (0..8)
        .map(|i| C64::new(if i == 0 || i == 7 { 0.0 } else { 1.0 }, 0.0))
        .collect();
    let s = setup(h, v, p, v0, 1.0);
    let rows = order_study(&s, &[1e-2, 5e-3]).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ratio.is_none());
    assert!(rows[1].ratio.is_some());
    // compliant data stays in the kernel of P without the perturbation
    assert!(rows[0].predicted.abs() < 1e-15);
}

#[test]
fn argument_checks() {
    let s = unitary_setup(4, 7);
    assert!(order_study(&s, &[1e-2]).is_err());
    assert!(order_study(&s, &[1e-2, 5e-3, 1e-3]).is_err());
    assert!(order_study(&s, &[1e-2, -5e-3]).is_err());
    let coarse = KuboSetup {
        grid: Some(8),
        ..s.clone()
    };
    assert!(matches!(
        kubo_first_order(&coarse),
        Err(Error::QuadratureUnderResolved(_))
    ));
    let bad = KuboSetup {
        t: 0.0,
        ..s.clone()
    };
    assert!(exact_delta(&bad).is_err());
    let wrong = KuboSetup {
        observable: Projector::identity(5),
        ..s
    };
    assert!(matches!(
        exact_delta(&wrong),
        Err(Error::DimMismatch { .. })
    ));
}

#[test]
fn csv_output() {
    let rows = order_study(&unitary_setup(4, 8), &[1e-2, 5e-3]).unwrap();
    let mut buf = Vec::new();
    write_kubo_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), KUBO_HEADER);
    // first row has no ratio
    assert!(lines.next().unwrap().split(',').nth(4).unwrap().is_empty());
    assert!(!lines.next().unwrap().split(',').nth(4).unwrap().is_empty());
}

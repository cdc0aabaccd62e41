use nalgebra::DMatrix;
use penproj::circuits::{
    boundary_oracle, combined_projector, enforce_input, hamsim_combined, hamsim_dirichlet,
    hamsim_neumann, max_deviation, swap_unitary, Circuit, GateRecord, RegisterLayout, RobinForm,
    StateVector, Target,
};
use penproj::grid::{
    build_custom_unchecked, build_grid, BoundarySpec, Domain, Region, RegionEntry, RobinCoeffs,
};
use penproj::linalg::{self, random_vector, seeded_rng, C64, ONE, ZERO};
use penproj::projectors::{dirichlet_projector, neumann_projector, Projector};
use penproj::Error;
use proptest::prelude::*;
use rand::Rng;

fn custom(
    d: usize,
    n: usize,
    entries: &[(Vec<usize>, Region, Option<Vec<usize>>)],
    robin: Option<RobinCoeffs>,
) -> Domain {
    let e: Vec<RegionEntry> = entries
        .iter()
        .map(|(i, r, nb)| RegionEntry {
            index: i.clone(),
            region: *r,
            neighbors: nb.iter().cloned().collect(),
        })
        .collect();
    build_custom_unchecked(d, n, &e, robin).unwrap()
}

fn one_pair_line() -> Domain {
    custom(1, 4, &[(vec![3], Region::Neumann, Some(vec![2]))], None)
}

fn mixed_line() -> Domain {
    custom(
        1,
        8,
        &[
            (vec![0], Region::Dirichlet, None),
            (vec![7], Region::Neumann, Some(vec![6])),
        ],
        None,
    )
}

fn robin_line() -> Domain {
    custom(
        1,
        8,
        &[(vec![0], Region::Robin, Some(vec![1]))],
        Some(RobinCoeffs {
            alpha: 0.7,
            beta: 1.3,
        }),
    )
}

fn full_unitary(c: &Circuit) -> DMatrix<C64> {
    let q = c.layout().total();
    let dim = 1 << q;
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let mut sv = StateVector::basis(q, k);
        c.apply(&mut sv).unwrap();
        for (i, a) in sv.amps.iter().enumerate() {
            m[(i, k)] = *a;
        }
    }
    m
}

fn is_identity(m: &DMatrix<C64>, tol: f64) -> bool {
    (m - DMatrix::<C64>::identity(m.nrows(), m.ncols()))
        .iter()
        .all(|z| z.norm() < tol)
}

#[test]
fn layout_and_encoding() {
    let dom = build_grid(2, 8, &BoundarySpec::WallDirichlet).unwrap();
    let l = RegisterLayout::for_domain(&dom).unwrap();
    assert_eq!((l.axis_bits, l.state_qubits, l.zeta_qubits), (3, 6, 4));
    assert_eq!(l.total(), 13);
    assert_eq!(l.ancilla_qubit(), 12);
    for j in [[0, 0], [3, 5], [7, 7]] {
        assert_eq!(l.decode_point(l.encode_point(&j)).unwrap(), j.to_vec());
    }
    let odd = build_grid(1, 5, &BoundarySpec::WallDirichlet).unwrap();
    let lo = RegisterLayout::for_domain(&odd).unwrap();
    assert!(lo.decode_point(6).is_none());
}

#[test]
fn qubit_guard() {
    let big = build_grid(3, 32, &BoundarySpec::WallDirichlet).unwrap();
    assert!(matches!(
        Circuit::new(&big),
        Err(Error::TooManyQubits {
            needed: 24,
            guard: 22
        })
    ));
    let dom = build_grid(2, 16, &BoundarySpec::WallDirichlet).unwrap();
    let l = RegisterLayout::for_domain(&dom).unwrap();
    assert!(matches!(
        l.check_guard(14),
        Err(Error::TooManyQubits { needed: 15, .. })
    ));
}

#[test]
fn oracle_flags() {
    let dom = build_grid(1, 4, &BoundarySpec::WallDirichlet).unwrap();
    let c = boundary_oracle(&dom).unwrap();
    let l = *c.layout();
    let flag_of = |j: usize| {
        let mut sv = StateVector::basis(l.total(), l.encode_point(&[j]));
        c.apply(&mut sv).unwrap();
        let idx = sv.amps.iter().position(|a| *a == ONE).unwrap();
        (idx >> l.bdry_offset()) & 3
    };
    assert_eq!(flag_of(1), 0);
    assert_eq!(flag_of(0), 1);
    assert_eq!(flag_of(3), 1);
    let neu = custom(
        1,
        4,
        &[
            (vec![3], Region::Neumann, Some(vec![2])),
            (vec![0], Region::Dirichlet, None),
        ],
        None,
    );
    let cn = boundary_oracle(&neu).unwrap();
    let mut sv = StateVector::basis(l.total(), l.encode_point(&[3]));
    cn.apply(&mut sv).unwrap();
    assert_eq!(
        sv.amps.iter().position(|a| *a == ONE).unwrap() >> l.bdry_offset() & 3,
        2
    );
}

#[test]
fn oracle_is_a_self_inverse_permutation() {
    let dom = build_grid(1, 4, &BoundarySpec::WallDirichlet).unwrap();
    let u = full_unitary(&boundary_oracle(&dom).unwrap());
    for k in 0..u.ncols() {
        let col = u.column(k);
        assert_eq!(col.iter().filter(|z| **z == ONE).count(), 1);
        assert_eq!(col.iter().filter(|z| **z != ZERO).count(), 1);
    }
    assert!(is_identity(&(&u * &u), 1e-15));
}

#[test]
fn swap_squares_to_identity_on_clean_ancillas() {
    let dom = one_pair_line();
    let c = swap_unitary(&dom).unwrap();
    let s = c.state_matrix().unwrap();
    assert!(is_identity(&(&s * &s), 1e-15));
    let mut want = DMatrix::<C64>::identity(4, 4);
    want.swap_columns(2, 3);
    assert_eq!(s, want);
    let out = c.run(&[C64::new(0.5, 0.0); 4]).unwrap();
    assert_eq!(out.output, vec![C64::new(0.5, 0.0); 4]);
    assert_eq!(out.leakage, 0.0);
}

#[test]
fn cadd_path_matches_permutation() {
    let dom = custom(
        2,
        4,
        &[
            (vec![0, 1], Region::Neumann, Some(vec![1, 1])),
            (vec![3, 2], Region::Neumann, Some(vec![2, 2])),
        ],
        None,
    );
    let c = swap_unitary(&dom).unwrap();
    let p = neumann_projector(&dom).unwrap();
    let m = c.state_matrix().unwrap();
    let mut e = vec![ZERO; 16];
    for k in 0..16 {
        e[k] = ONE;
        let col = p.swap_apply(&e).unwrap();
        for i in 0..16 {
            assert_eq!(m[(i, k)], col[i]);
        }
        e[k] = ZERO;
    }
}

#[test]
fn dirichlet_phase() {
    let dom = build_grid(1, 8, &BoundarySpec::WallDirichlet).unwrap();
    assert!(is_identity(
        &hamsim_dirichlet(&dom, 0.0).unwrap().state_matrix().unwrap(),
        1e-15
    ));
    let p = dirichlet_projector(&dom).unwrap();
    assert!(max_deviation(&hamsim_dirichlet(&dom, 7.3).unwrap(), &p, 7.3).unwrap() < 1e-12);

    let single = custom(1, 4, &[(vec![2], Region::Dirichlet, None)], None);
    let out = hamsim_dirichlet(&single, std::f64::consts::PI)
        .unwrap()
        .run(&[ONE; 4])
        .unwrap()
        .output;
    for (k, z) in out.iter().enumerate() {
        let want = if k == 2 { -ONE } else { ONE };
        assert!((z - want).norm() < 1e-15);
    }
    let neu = one_pair_line();
    assert!(matches!(
        hamsim_dirichlet(&neu, 1.0),
        Err(Error::EmptyRegion(_))
    ));
}

#[test]
fn neumann_channel() {
    let dom = one_pair_line();
    assert!(is_identity(
        &hamsim_neumann(&dom, 0.0).unwrap().state_matrix().unwrap(),
        1e-15
    ));
    let c = hamsim_neumann(&dom, 2.1).unwrap();
    let p = neumann_projector(&dom).unwrap();
    let mut rng = seeded_rng(1);
    for _ in 0..20 {
        let v = random_vector(4, &mut rng);
        let out = c.run(&v).unwrap();
        let want = p.exp_apply(C64::new(0.0, -2.1), &v).unwrap();
        assert!(out
            .output
            .iter()
            .zip(&want)
            .all(|(a, b)| (a - b).norm() < 1e-12));
        assert!(out.ancilla_one_prob < 1e-24);
        assert!(out.leakage < 1e-24);
    }
    let feasible = vec![
        C64::new(0.1, 0.0),
        C64::new(0.2, 0.3),
        C64::new(0.5, -0.5),
        C64::new(0.5, -0.5),
    ];
    let out = c.run(&feasible).unwrap();
    assert!(linalg::norm(&linalg::sub(&out.output, &feasible)) < 1e-15);
    assert_eq!(out.ancilla_one_prob, 0.0);
}

#[test]
fn combined_mixed_line() {
    let dom = mixed_line();
    let p = combined_projector(&dom, 0.0, 0.0, RobinForm::Literal).unwrap();
    for theta in [0.3, 2.0, 11.0] {
        let c = hamsim_combined(&dom, theta, 0.0, 0.0, RobinForm::Literal).unwrap();
        assert!(max_deviation(&c, &p, theta).unwrap() < 1e-12);
    }
}

#[test]
fn combined_dirichlet_only_equals_phase() {
    let dom = build_grid(2, 4, &BoundarySpec::WallDirichlet).unwrap();
    let a = hamsim_combined(&dom, 1.7, 0.0, 0.0, RobinForm::Ghost).unwrap();
    let b = hamsim_dirichlet(&dom, 1.7).unwrap();
    assert_eq!(a.gates(), b.gates());
}

#[test]
fn robin_forms() {
    let dom = robin_line();
    // α = 1, β = 0 is a plain phase on the Robin point
    let c = hamsim_combined(&dom, 0.9, 1.0, 0.0, RobinForm::Literal).unwrap();
    let pd = Projector::point_set(8, vec![0]).unwrap();
    assert!(max_deviation(&c, &pd, 0.9).unwrap() < 1e-12);
    assert!(matches!(
        hamsim_combined(&dom, 0.9, 0.7, 1.3, RobinForm::Literal),
        Err(Error::NonCommutingRobin(_))
    ));
    let g = hamsim_combined(&dom, 0.9, 0.7, 1.3, RobinForm::Ghost).unwrap();
    let pg = combined_projector(&dom, 0.7, 1.3, RobinForm::Ghost).unwrap();
    assert!(max_deviation(&g, &pg, 0.9).unwrap() < 1e-12);
}

#[test]
fn composition_and_cost() {
    let dom = mixed_line();
    let m = |th: f64| {
        hamsim_combined(&dom, th, 0.0, 0.0, RobinForm::Ghost)
            .unwrap()
            .state_matrix()
            .unwrap()
    };
    let (a, b) = (1.1, 2.6);
    let diff = (m(a) * m(b) - m(a + b))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    assert!(diff < 1e-11);
    let rdom = robin_line();
    let g = |th: f64| {
        hamsim_combined(&rdom, th, 0.7, 1.3, RobinForm::Ghost)
            .unwrap()
            .gate_count()
    };
    assert_eq!(g(0.37), g(370.0));
    assert_eq!(
        hamsim_neumann(&dom, 0.1).unwrap().gate_count(),
        hamsim_neumann(&dom, 100.0).unwrap().gate_count()
    );
}

#[test]
fn gates_preserve_norm() {
    let dom = robin_line();
    let c = hamsim_combined(&dom, 2.2, 0.7, 1.3, RobinForm::Ghost).unwrap();
    let q = c.layout().total();
    let mut sv = StateVector {
        n_qubits: q,
        amps: random_vector(1 << q, &mut seeded_rng(2)),
    };
    let before = sv.norm();
    c.apply(&mut sv).unwrap();
    assert!((sv.norm() - before).abs() < 1e-12);
    let mut wrong = StateVector::basis(q - 1, 0);
    assert!(c.apply(&mut wrong).is_err());
}

#[test]
fn json_export() {
    let dom = mixed_line();
    let c = hamsim_combined(&dom, 0.5, 0.0, 0.0, RobinForm::Literal).unwrap();
    let recs: Vec<GateRecord> = serde_json::from_str(&c.to_json().unwrap()).unwrap();
    assert_eq!(recs.len(), c.gate_count());
    assert_eq!(recs[0].gate, "o_bdry");
    assert!(recs.iter().any(|r| r.gate == "cadd"));
    assert!(recs
        .iter()
        .any(|r| r.gate == "phase" && r.param == Some(-0.5)));
    let flag = recs.iter().find(|r| r.gate == "flag_phase_1").unwrap();
    assert_eq!(flag.param, Some(-0.5));
}

#[test]
fn enforce_examples() {
    let p = Projector::point_set(4, vec![0, 1]).unwrap();
    let inside = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), ZERO, ZERO];
    let e = enforce_input(&inside, &p, Target::ConstrainedSubspace).unwrap();
    assert!((e.success_prob - 1.0).abs() < 1e-15);
    assert_eq!(e.repetitions, 1);
    assert!(linalg::norm(&linalg::sub(&e.state, &inside)) < 1e-15);

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let split = vec![C64::new(s, 0.0), ZERO, C64::new(s, 0.0), ZERO];
    let e = enforce_input(&split, &p, Target::FeasibleSubspace).unwrap();
    assert!((e.success_prob - 0.5).abs() < 1e-15);
    assert_eq!(e.state[2], ONE);

    let amp = 0.1f64;
    let weak = vec![
        C64::new(amp, 0.0),
        ZERO,
        C64::new((1.0 - amp * amp).sqrt(), 0.0),
        ZERO,
    ];
    let e = enforce_input(&weak, &p, Target::ConstrainedSubspace).unwrap();
    assert!((e.success_prob - 0.01).abs() < 1e-15);
    assert_eq!(e.repetitions, 10);

    assert!(matches!(
        enforce_input(&inside, &p, Target::FeasibleSubspace),
        Err(Error::ZeroOverlap(_))
    ));
    assert!(enforce_input(&[ONE, ONE, ZERO, ZERO], &p, Target::FeasibleSubspace).is_err());
    let lit = Projector::robin(4, 0.7, 1.3, vec![0], vec![(0, 1)]).unwrap();
    assert!(matches!(
        enforce_input(&inside, &lit, Target::FeasibleSubspace),
        Err(Error::NonIdempotent(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn emulation_matches_projector_exponential(seed in 0u64..10_000) {
        let mut rng = seeded_rng(seed);
        let theta: f64 = rng.gen_range(0.0..4.0 * std::f64::consts::PI);
        let dom = build_grid(2, 6, &BoundarySpec::WallNeumannInward).unwrap();
        let c = hamsim_neumann(&dom, theta).unwrap();
        let v = random_vector(dom.size(), &mut rng);
        let out = c.run(&v).unwrap();
        let want = neumann_projector(&dom).unwrap().exp_apply(C64::new(0.0, -theta), &v).unwrap();
        prop_assert!(out.output.iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-12));
        prop_assert!(out.ancilla_one_prob < 1e-20);
    }
}

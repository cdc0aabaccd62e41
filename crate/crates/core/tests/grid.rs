use penproj::grid::{
    build_custom_unchecked, build_grid, classify, flatten, unflatten, validate_neighbor_sets,
    BoundarySpec, Domain, Region, RegionEntry, RobinCoeffs, Rule,
};
use penproj::Error;
use proptest::prelude::*;

fn entry(index: Vec<usize>, region: Region, neighbors: Vec<Vec<usize>>) -> RegionEntry {
    RegionEntry {
        index,
        region,
        neighbors,
    }
}

#[test]
fn line_wall_marks_endpoints() {
    let dom = build_grid(1, 4, &BoundarySpec::WallDirichlet).unwrap();
    assert_eq!(dom.indices_of(Region::Dirichlet), vec![0, 3]);
    assert_eq!(dom.indices_of(Region::Interior), vec![1, 2]);
}

#[test]
fn square_wall_counts() {
    let dom = build_grid(2, 4, &BoundarySpec::WallDirichlet).unwrap();
    assert_eq!(dom.indices_of(Region::Dirichlet).len(), 12);
    assert_eq!(classify(&dom, &[1, 2]).unwrap(), Region::Interior);
    assert_eq!(classify(&dom, &[0, 2]).unwrap(), Region::Dirichlet);
}

#[test]
fn circle_keeps_centre_free() {
    let dom = build_grid(2, 9, &BoundarySpec::CircleDirichlet(0.5)).unwrap();
    assert_eq!(classify(&dom, &[4, 4]).unwrap(), Region::Interior);
    assert_eq!(classify(&dom, &[0, 0]).unwrap(), Region::Dirichlet);
    // (0, 4) sits exactly at distance 1/2
    assert_eq!(classify(&dom, &[0, 4]).unwrap(), Region::Dirichlet);
}

#[test]
fn neumann_wall_skips_corners() {
    let dom = build_grid(2, 6, &BoundarySpec::WallNeumannInward).unwrap();
    for c in [[0, 0], [0, 5], [5, 0], [5, 5]] {
        assert_eq!(classify(&dom, &c).unwrap(), Region::Interior);
    }
    assert_eq!(classify(&dom, &[0, 1]).unwrap(), Region::Neumann);
    assert_eq!(
        dom.neighbors_of(dom.linear(&[0, 1]).unwrap()),
        &[dom.linear(&[1, 1]).unwrap()]
    );
    // (1, 0) would share (1, 1) with (0, 1)
    assert_eq!(classify(&dom, &[1, 0]).unwrap(), Region::Interior);
    assert!(validate_neighbor_sets(&dom).is_empty());
}

#[test]
fn shared_neighbor_reported() {
    let entries = vec![
        entry(vec![0, 1], Region::Neumann, vec![vec![1, 1]]),
        entry(vec![1, 0], Region::Neumann, vec![vec![1, 1]]),
    ];
    let dom = build_custom_unchecked(2, 4, &entries, None).unwrap();
    let report = validate_neighbor_sets(&dom);
    assert_eq!(report.count(Rule::SharedNeighbor), 1);
    let spec = BoundarySpec::Custom {
        entries,
        robin: None,
    };
    assert!(matches!(
        build_grid(2, 4, &spec),
        Err(Error::InvalidSpec(_))
    ));
}

#[test]
fn constrained_neighbor_reported() {
    let entries = vec![
        entry(vec![0], Region::Neumann, vec![vec![1]]),
        entry(vec![1], Region::Neumann, vec![vec![2]]),
    ];
    let dom = build_custom_unchecked(1, 6, &entries, None).unwrap();
    assert_eq!(
        validate_neighbor_sets(&dom).count(Rule::NeighborIsConstrained),
        1
    );
}

#[test]
fn robin_needs_coefficients() {
    let entries = vec![entry(vec![0], Region::Robin, vec![vec![1]])];
    assert!(build_custom_unchecked(1, 4, &entries, None).is_err());
    let dom = build_custom_unchecked(
        1,
        4,
        &entries,
        Some(RobinCoeffs {
            alpha: 1.0,
            beta: 2.0,
        }),
    )
    .unwrap();
    assert_eq!(dom.robin().unwrap().beta, 2.0);
}

#[test]
fn non_adjacent_neighbor_rejected() {
    let entries = vec![entry(vec![0], Region::Neumann, vec![vec![2]])];
    assert!(build_custom_unchecked(1, 4, &entries, None).is_err());
}

#[test]
fn out_of_bounds_index() {
    let dom = build_grid(2, 4, &BoundarySpec::WallDirichlet).unwrap();
    assert!(matches!(
        dom.linear(&[4, 0]),
        Err(Error::OutOfBounds { .. })
    ));
    assert!(build_grid(0, 4, &BoundarySpec::WallDirichlet).is_err());
    assert!(build_grid(1, 1, &BoundarySpec::WallDirichlet).is_err());
}

#[test]
fn json_round_trip() {
    let dom = build_grid(2, 6, &BoundarySpec::WallNeumannInward).unwrap();
    let back = Domain::from_json(&dom.to_json().unwrap()).unwrap();
    assert_eq!(back, dom);
}

#[test]
fn spacing_and_coords() {
    let dom = build_grid(1, 5, &BoundarySpec::WallDirichlet).unwrap();
    assert!((dom.spacing() - 0.25).abs() < 1e-15);
    assert_eq!(dom.unit_coords(&[2]), vec![0.5]);
}

proptest! {
    #[test]
    fn flatten_inverts_unflatten(d in 1usize..4, n in 2usize..9, seed in 0usize..10_000) {
        let idx = seed % n.pow(d as u32);
        prop_assert_eq!(flatten(&unflatten(idx, d, n), n), idx);
    }

    #[test]
    fn inward_neumann_always_valid(d in 1usize..4, n in 4usize..11) {
        let dom = build_grid(d, n, &BoundarySpec::WallNeumannInward).unwrap();
        prop_assert!(validate_neighbor_sets(&dom).is_empty());
        for j in dom.indices_of(Region::Neumann) {
            prop_assert_eq!(dom.neighbors_of(j).len(), 1);
            prop_assert_eq!(dom.region(dom.neighbors_of(j)[0]), Region::Interior);
        }
    }

    #[test]
    fn wall_count_matches_formula(d in 1usize..4, n in 2usize..9) {
        let dom = build_grid(d, n, &BoundarySpec::WallDirichlet).unwrap();
        let inner = (n - 2).pow(d as u32);
        prop_assert_eq!(dom.indices_of(Region::Dirichlet).len(), n.pow(d as u32) - inner);
    }
}

//! Repeller–attractor construction on the linear saddle, end to end:
//! seed a hyperbolic configuration of order two from dynamical
//! closures, verify it, enlarge it step by step, and check the maximal
//! configuration against independently derived values.
//!
//! The saddle's time-one map fixes only the origin; its maximal free
//! decomposition on this grid has twenty bricks. The expected sets,
//! step sequence, and boundary order below were derived by hand from
//! the decomposition's arc structure before being frozen here.

use std::path::Path;

use diskdyn::brick::{displacement_mask, freeness_margin, BrickDecomposition};
use diskdyn::brickdyn::{BrickSet, DynGraph};
use diskdyn::config::{
    assemble_config, check_hyperbolic, config_boundary_order, enlarge, find_connexion_brick,
    hyperbolic_boundary_labels, maximalize_config, audit_upsi, ConfigKind, EnlargeStep,
    RAConfiguration, SetLabel, Witnesses,
};
use diskdyn::geom::Pt;
use diskdyn::grid::Grid;
use diskdyn::planemap::{MapSpec, PlaneMap};

fn saddle_stage() -> (BrickDecomposition, DynGraph, PlaneMap) {
    let map = PlaneMap::from_spec(
        &MapSpec::Saddle { lambda: std::f64::consts::E },
        Path::new("."),
    )
    .unwrap();
    let grid = Grid::new(100).unwrap();
    let margin = freeness_margin(&grid, 0.01);
    let mask = displacement_mask(&map, &grid, 0.9, margin).unwrap();
    let mut dec = BrickDecomposition::build(&map, &grid, &mask, &[], 0.01).unwrap();
    dec.refine_until_free(4).unwrap();
    dec.maximalize();
    let g = DynGraph::from_decomposition(&dec);
    (dec, g, map)
}

/// Seed configuration: repellers are the repeller closures of the
/// bricks on the stable axis just above and below the fixed point;
/// attractors the attractor closures of the bricks far out on the
/// unstable axis.
fn seed_config(dec: &BrickDecomposition, g: &DynGraph) -> RAConfiguration {
    let brick_at = |x: f64, y: f64| dec.brick_containing(Pt { x, y }).unwrap();
    let r0 = g.repeller_closure(&BrickSet::singleton(g.brick_count(), brick_at(0.0, 0.11)));
    let r1 = g.repeller_closure(&BrickSet::singleton(g.brick_count(), brick_at(0.0, -0.11)));
    let a0 = g.attractor_closure(&BrickSet::singleton(g.brick_count(), brick_at(-0.8, 0.0)));
    let a1 = g.attractor_closure(&BrickSet::singleton(g.brick_count(), brick_at(0.8, 0.0)));
    assert_eq!(r0.iter().collect::<Vec<_>>(), vec![16, 17, 18, 19]);
    assert_eq!(r1.iter().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    assert_eq!(a0.iter().collect::<Vec<_>>(), vec![12]);
    assert_eq!(a1.iter().collect::<Vec<_>>(), vec![14]);
    assemble_config(
        dec,
        g,
        ConfigKind::Hyperbolic,
        vec![r0, r1],
        vec![a0, a1],
        &[Pt { x: 0.0, y: 0.5 }, Pt { x: 0.0, y: -0.5 }],
        &[Pt { x: -0.8, y: 0.0 }, Pt { x: 0.8, y: 0.0 }],
    )
    .unwrap()
}

#[test]
fn saddle_hyperbolic_configuration_grows_to_the_whole_decomposition() {
    let (dec, g, _map) = saddle_stage();
    assert_eq!(dec.brick_count(), 20);

    let seed = seed_config(&dec, &g);
    assert_eq!(seed.witnesses, Witnesses::Hyperbolic(vec![(16, 16), (0, 0)]));

    // The seed configuration is already a verified hyperbolic
    // configuration of order two.
    let check = check_hyperbolic(&dec, &g, &seed).unwrap();
    assert!(check.ok, "seed verification failed: {:?}", check.failures);
    let bo = check.boundary.unwrap();
    assert!(bo.matches(&hyperbolic_boundary_labels(2)));

    // First enlargement: the connexion brick north-west of the fixed
    // point has a past meeting the other repeller one step around, so
    // both attractors are regrown as complement components. Repellers
    // must not change, attractors must strictly grow.
    let out = enlarge(&dec, &g, &seed).unwrap();
    match out.step {
        EnlargeStep::HyperbolicAttractors { j, brick, ref grown } => {
            assert_eq!((j, brick), (0, 4));
            assert_eq!(grown, &vec![0, 1]);
        }
        ref other => panic!("unexpected first step {other:?}"),
    }
    assert_eq!(out.config.repellers, seed.repellers);
    for (old, new) in seed.attractors.iter().zip(&out.config.attractors) {
        assert!(old.is_subset_of(new));
        assert!(new.len() > old.len());
    }
    assert_eq!(
        out.config.attractors[0].iter().collect::<Vec<_>>(),
        vec![6, 7, 8, 12, 13]
    );
    assert_eq!(
        out.config.attractors[1].iter().collect::<Vec<_>>(),
        vec![5, 9, 10, 11, 14]
    );
    let sep = out.separation.expect("attractor regrowth carries a separation audit");
    assert!(sep.barrier_connected);
    assert!(sep.pairwise_distinct, "placements {:?}", sep.placements);

    // Full maximalization from the seed: the attractor step, then the
    // north repeller absorbs the past of the outer arc brick, then the
    // remaining outside brick is absorbed into the west attractor.
    let max = maximalize_config(&dec, &g, &seed).unwrap();
    assert_eq!(max.steps.len(), 2);
    assert!(matches!(
        max.steps[0],
        EnlargeStep::HyperbolicAttractors { j: 0, brick: 4, .. }
    ));
    assert!(matches!(
        max.steps[1],
        EnlargeStep::RepellerAbsorbsPast { j: 0, brick: 15 }
    ));
    assert_eq!(max.absorbed, vec![(SetLabel::A(0), 4)]);

    let cfg = &max.config;
    assert_eq!(cfg.repellers[0].iter().collect::<Vec<_>>(), vec![15, 16, 17, 18, 19]);
    assert_eq!(cfg.repellers[1].iter().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    assert_eq!(cfg.attractors[0].iter().collect::<Vec<_>>(), vec![4, 6, 7, 8, 12, 13]);
    assert_eq!(cfg.attractors[1].iter().collect::<Vec<_>>(), vec![5, 9, 10, 11, 14]);
    assert_eq!(cfg.union_all().len(), 20);
    assert!(max.check.ok);

    // Monotonicity across the whole run: every seed set is contained
    // in its maximal counterpart.
    for (old, new) in seed.repellers.iter().zip(&cfg.repellers) {
        assert!(old.is_subset_of(new));
    }
    for (old, new) in seed.attractors.iter().zip(&cfg.attractors) {
        assert!(old.is_subset_of(new));
    }

    // Fixpoint: no connexion brick remains, and each repeller touches
    // its own attractor.
    for j in 0..2 {
        assert_eq!(find_connexion_brick(&g, cfg, j).unwrap(), None);
        assert!(g.adjacent_to(&cfg.repellers[j]).intersects(&cfg.attractors[j]));
    }

    // Boundary order of the maximal configuration: the full hyperbolic
    // word, starting from the north repeller.
    let bo = config_boundary_order(&dec, cfg).unwrap();
    assert_eq!(
        bo.labels(),
        vec![SetLabel::R(0), SetLabel::A(0), SetLabel::R(1), SetLabel::A(1)]
    );

    // Every set's complement concentrates the other sets in a single
    // component.
    let upsi = audit_upsi(&g, cfg);
    assert!(upsi.ok, "{:?}", upsi.rows);
}

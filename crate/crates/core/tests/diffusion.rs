mod common;

use common::{dense_oracle, random_instance, rng};
use diffwalker::{
    assemble_blocks, laplacian, solve_rw, BlockIndex, EdgeWeights, LatticeGraph, Seed, SeedSet, SolverConfig,
    SolverMethod,
};
use proptest::prelude::*;

fn instance_params() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=7, 1usize..=7, 1usize..=4, any::<u64>()).prop_filter("labels fit", |(h, w, l, _)| h * w >= *l)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rows_are_stochastic_and_bounded((h, w, labels, seed) in instance_params()) {
        let inst = random_instance(&mut rng(seed), h, w, labels);
        let z = inst.solve();
        prop_assert!(z.max_row_sum_error() <= 1e-8);
        for &p in &z.probabilities {
            prop_assert!((-1e-8..=1.0 + 1e-8).contains(&p), "probability {p}");
        }
        for s in inst.seeds.entries() {
            for a in 0..labels {
                prop_assert_eq!(z.get(s.vertex, a), if a == s.label { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn weight_scale_leaves_assignments_unchanged(
        (h, w, labels, seed) in instance_params(),
        c in prop_oneof![Just(0.1), Just(10.0), 1e-3f64..1e3],
    ) {
        let inst = random_instance(&mut rng(seed), h, w, labels);
        let z = inst.solve();
        let scaled = inst.with_weights(inst.weights.scaled(c).unwrap().values().to_vec()).solve();
        for (a, b) in z.probabilities.iter().zip(&scaled.probabilities) {
            prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b} at c = {c}");
        }
    }

    #[test]
    fn laplacian_rows_sum_to_zero((h, w, labels, seed) in instance_params()) {
        let inst = random_instance(&mut rng(seed), h, w, labels);
        let full = laplacian(&inst.graph, &inst.weights).unwrap();
        for i in 0..full.nrows() {
            let s: f64 = full.row(i).1.iter().sum();
            prop_assert!(s.abs() < 1e-12);
        }
        // Unmarked rows of L_U plus their coupling to the seeds cancel too.
        let blocks = inst.blocks();
        for i in 0..blocks.l_u().nrows() {
            let s: f64 = blocks.l_u().row(i).1.iter().sum::<f64>() + blocks.b_t().row(i).1.iter().sum::<f64>();
            prop_assert!(s.abs() < 1e-12);
            prop_assert!(blocks.l_u().row(i).0.len() <= 5);
        }
    }

    #[test]
    fn seed_insertion_order_is_irrelevant((h, w, labels, seed) in instance_params(), shuffle in any::<u64>()) {
        use rand::seq::SliceRandom;
        let inst = random_instance(&mut rng(seed), h, w, labels);
        let mut entries: Vec<Seed> = inst.seeds.entries().to_vec();
        entries.shuffle(&mut rng(shuffle));
        let reordered = SeedSet::new(entries).unwrap();
        let a = inst.blocks();
        let b = assemble_blocks(&inst.graph, &inst.weights, &reordered).unwrap();
        prop_assert_eq!(a.marked(), b.marked());
        prop_assert_eq!(a.unmarked(), b.unmarked());
        prop_assert_eq!(a.l_u().to_dense(), b.l_u().to_dense());
        prop_assert_eq!(a.b_t().to_dense(), b.b_t().to_dense());
    }
}

#[test]
fn matches_dense_solve_on_small_grids() {
    let mut r = rng(2024);
    let mut checked = 0;
    for h in 1..=4 {
        for w in 1..=4 {
            for labels in 1..=3usize.min(h * w) {
                for _ in 0..4 {
                    let inst = random_instance(&mut r, h, w, labels);
                    let z = inst.solve();
                    let oracle = dense_oracle(&inst);
                    for (v, row) in oracle.iter().enumerate() {
                        for (a, &p) in row.iter().enumerate() {
                            assert!((z.get(v, a) - p).abs() <= 1e-10, "{h}×{w} vertex {v} label {a}");
                        }
                    }
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn conjugate_gradient_agrees_with_cholesky() {
    let mut r = rng(7);
    for _ in 0..10 {
        let inst = random_instance(&mut r, 12, 9, 3);
        let blocks = inst.blocks();
        let direct = SolverConfig {
            method: SolverMethod::Cholesky,
            ..SolverConfig::default()
        };
        let iterative = SolverConfig {
            method: SolverMethod::ConjugateGradient,
            ..SolverConfig::default()
        };
        let (zc, _) = solve_rw(&blocks, &direct).unwrap();
        let (zi, report) = solve_rw(&blocks, &iterative).unwrap();
        assert_eq!(report.method, SolverMethod::ConjugateGradient);
        assert!(zi.max_row_sum_error() <= 10.0 * 1e-10 * 100.0);
        for (a, b) in zc.probabilities.iter().zip(&zi.probabilities) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn auto_switches_to_iterative_above_threshold() {
    let graph = LatticeGraph::new(10, 10).unwrap();
    let weights = EdgeWeights::uniform(graph.edge_count(), 1.0).unwrap();
    let seeds = SeedSet::from_pairs(&[(0, 0), (99, 1)]).unwrap();
    let blocks = assemble_blocks(&graph, &weights, &seeds).unwrap();
    let small = SolverConfig {
        cg_threshold: 50,
        ..SolverConfig::default()
    };
    assert_eq!(
        solve_rw(&blocks, &small).unwrap().1.method,
        SolverMethod::ConjugateGradient
    );
    assert_eq!(
        solve_rw(&blocks, &SolverConfig::default()).unwrap().1.method,
        SolverMethod::Cholesky
    );
}

#[test]
fn adjacent_seed_edges_are_dropped() {
    let graph = LatticeGraph::new(2, 2).unwrap();
    let weights = EdgeWeights::new(vec![5.0, 1.0, 1.0, 1.0]).unwrap();
    let seeds = SeedSet::from_pairs(&[(0, 0), (1, 1)]).unwrap();
    let blocks = assemble_blocks(&graph, &weights, &seeds).unwrap();
    assert_eq!(blocks.position(0), BlockIndex::Marked(0));
    assert_eq!(blocks.b_t().nnz(), 2);
}

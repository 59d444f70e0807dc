//! End-to-end properties over random box partitions and ReLU networks.

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use partgeom::calculus::{solve_spline_with, HodgeOperators, Penalty, SplineProblem};
use partgeom::density::{all_pairs, density_weighted_graph, estimate_density, interpolate_edge_density, DensityScheme};
use partgeom::ensemble::random_box_tree;
use partgeom::nn::{backward_sequence, cell_map, LayerSpec, Network};
use partgeom::{build_nerve, Domain, NerveOptions, Partition, PartitionCell, RiemannianStructure};

fn random_structure(seed: u64, leaves: usize) -> RiemannianStructure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_box_tree(&Domain::unit(2), leaves, &mut rng).unwrap();
    RiemannianStructure::new(Arc::new(build_nerve(&p, &NerveOptions::default()).unwrap()))
}

/// Interior cut points on the 1/8 grid, sorted and distinct.
fn cuts() -> impl Strategy<Value = Vec<f64>> {
    proptest::sample::subsequence((1..8).collect::<Vec<u32>>(), 1..4).prop_map(|v| v.into_iter().map(|k| k as f64 / 8.0).collect())
}

fn grid_structure(xs: &[f64], ys: &[f64]) -> RiemannianStructure {
    let edges = |c: &[f64]| std::iter::once(0.0).chain(c.iter().copied()).chain(std::iter::once(1.0)).collect::<Vec<_>>();
    let (ex, ey) = (edges(xs), edges(ys));
    let mut cells = Vec::new();
    for x in ex.windows(2) {
        for y in ey.windows(2) {
            cells.push(PartitionCell::new_box(cells.len() as u64, vec![[x[0], x[1]], [y[0], y[1]]]));
        }
    }
    let p = Partition::new(Domain::unit(2), cells).unwrap();
    RiemannianStructure::new(Arc::new(build_nerve(&p, &NerveOptions::default()).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cell_volumes_fill_the_domain(seed in 0u64..10_000, leaves in 2usize..9) {
        let m = random_structure(seed, leaves);
        let total: f64 = (0..leaves).map(|i| m.nerve().cell_volume(i).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smoothing_preserves_the_mean_of_volume_weighted_values(seed in 0u64..10_000, lambda in 0.01f64..50.0) {
        let m = random_structure(seed, 6);
        let ops = HodgeOperators::build(&m, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sol = solve_spline_with(&SplineProblem { y: y.clone(), penalties: vec![Penalty { p: 0, k: 1, lambda }] }, &ops).unwrap();
        // constants lie in the kernel of the graph Laplacian, so the plain mean is kept
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!((mean(&sol.u) - mean(&y)).abs() < 1e-9);
    }

    #[test]
    fn proportional_counts_give_constant_density(xs in cuts(), ys in cuts(), lambda in 0.0f64..10.0) {
        let m = grid_structure(&xs, &ys);
        let ops = HodgeOperators::build(&m, None).unwrap();
        let n = m.nerve().complex.count(0);
        // cut points on a 1/8 grid make every count below exact
        let counts: Vec<usize> = (0..n).map(|i| (m.nerve().cell_volume(i).unwrap() * 64.0 * 3.0) as usize).collect();
        let pen = [Penalty { p: 0, k: 1, lambda: 1.0 }];
        let field = estimate_density(&m, &ops, &counts, lambda, &pen).unwrap();
        for r in &field.rho_vertex {
            prop_assert!((r - 192.0).abs() < 1e-9 * 192.0, "{:?}", field.rho_vertex);
        }
    }

    #[test]
    fn density_geodesics_satisfy_the_triangle_inequality(seed in 0u64..10_000) {
        let m = random_structure(seed, 7);
        let ops = HodgeOperators::build(&m, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts: Vec<usize> = (0..7).map(|_| rng.gen_range(0..30)).collect();
        let pen = [Penalty { p: 0, k: 1, lambda: 0.5 }];
        let field = estimate_density(&m, &ops, &counts, 0.5, &pen).unwrap();
        let field = interpolate_edge_density(&field, &m, DensityScheme::Harmonic).unwrap();
        let g = density_weighted_graph(&field, &m, 0.7).unwrap();
        let d = all_pairs(&g).unwrap();
        for a in 0..7 {
            for b in 0..7 {
                for c in 0..7 {
                    // sums along different paths may round differently in the last bit
                    prop_assert!(d[a].dist[c] <= (d[a].dist[b] + d[b].dist[c]) * (1.0 + 1e-12), "{} > {} + {}", d[a].dist[c], d[a].dist[b], d[b].dist[c]);
                }
            }
        }
    }
}

#[test]
fn level_maps_reproduce_the_network_on_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let widths = [2, rng.gen_range(1..=4), rng.gen_range(1..=3)];
        let layers = widths
            .windows(2)
            .map(|w| {
                let wm = (0..w[1]).map(|_| (0..w[0]).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
                let b = (0..w[1]).map(|_| rng.gen_range(-0.3..0.3)).collect();
                LayerSpec::new(wm, b).unwrap()
            })
            .collect();
        let net = Network::new(layers).unwrap();
        let data: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let seq = backward_sequence(&net, &Domain::unit(2), &data, &NerveOptions::default()).unwrap();
        for (j, x) in data.iter().enumerate() {
            let trace = net.trace(x);
            for k in 0..net.layers.len() {
                let cell = seq.data_cells[k][j].unwrap();
                let map = cell_map(&seq.levels[k].partition.cells[cell]).unwrap();
                let y = map.apply(&trace[k]);
                for (a, b) in y.iter().zip(&trace[k + 1]) {
                    assert!((a - b).abs() < 1e-12, "level {k} map disagrees with the layer");
                }
            }
        }
    }
}

mod common;

use std::collections::BTreeSet;

use common::{erdos_renyi, ring_lattice, watts_strogatz, Dense};
use musevo::netkit::{
    assortativity_ratio, avg_shortest_path, clustering, degree_stats, network_metrics, rewire_null,
    rewire_nulls, rewired_graph, small_worldness, NetError, NullConfig, TransitionNetwork,
};
use musevo::Facet;
use proptest::prelude::*;

fn net(nodes: u32, edges: &[(u32, u32)]) -> TransitionNetwork {
    TransitionNetwork::from_edges(Facet::Pitch, 0..nodes, edges.iter().copied()).unwrap()
}

#[test]
fn random_graphs_match_all_pairs_and_triangle_oracles() {
    for g in 0..30u64 {
        let n = 10 + (g as u32 * 53) % 191;
        let p = [0.015, 0.04, 0.12, 0.5][g as usize % 4];
        let edges = erdos_renyi(n, p, g);
        let network = net(n, &edges);
        let dense = Dense::new(n as usize, &edges);
        match avg_shortest_path(&network, 0) {
            Ok(l) => assert!((l - dense.avg_path_oracle()).abs() <= 1e-12, "graph {g}"),
            Err(e) => assert_eq!(e, NetError::ComponentTooSmall(1)),
        }
        assert!((clustering(&network, 0).unwrap() - dense.clustering_oracle()).abs() <= 1e-12);
    }
}

#[test]
fn graphs_wider_than_one_bfs_sweep_match_all_pairs_oracle() {
    for (g, n) in [(0u64, 300u32), (1, 513), (2, 613)] {
        let edges = erdos_renyi(n, 3.0 / n as f64, 70 + g);
        let dense = Dense::new(n as usize, &edges);
        let l = avg_shortest_path(&net(n, &edges), 0).unwrap();
        assert!((l - dense.avg_path_oracle()).abs() <= 1e-12, "n {n}");
    }
}

/// Degrees sorted descending, ties by ascending node id.
fn top_hubs(dense: &Dense, count: usize) -> BTreeSet<usize> {
    let mut order: Vec<usize> = (0..dense.n).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(dense.degree(v)), v));
    order.into_iter().take(count).collect()
}

#[test]
fn hub_exclusion_matches_oracle_on_induced_subgraph() {
    for g in 0..10u64 {
        let n = 60 + g as u32 * 7;
        let edges = erdos_renyi(n, 0.08, 40 + g);
        let dense = Dense::new(n as usize, &edges);
        let hubs = top_hubs(&dense, 10);
        // relabel the survivors to 0..n' keeping order
        let keep: Vec<u32> = (0..n).filter(|v| !hubs.contains(&(*v as usize))).collect();
        let idx = |v: u32| keep.binary_search(&v).unwrap() as u32;
        let sub: Vec<(u32, u32)> = edges
            .iter()
            .filter(|(a, b)| !hubs.contains(&(*a as usize)) && !hubs.contains(&(*b as usize)))
            .map(|&(a, b)| (idx(a), idx(b)))
            .collect();
        let oracle = Dense::new(keep.len(), &sub);
        let network = net(n, &edges);
        let l = avg_shortest_path(&network, 10).unwrap();
        assert!((l - oracle.avg_path_oracle()).abs() <= 1e-12);
        let c = clustering(&network, 10).unwrap();
        assert!((c - oracle.clustering_oracle()).abs() <= 1e-12);
    }
}

#[test]
fn regular_graphs_have_unit_gamma_and_median_k() {
    for (n, k) in [(20, 2), (50, 4), (101, 10), (300, 6)] {
        let network = net(n, &ring_lattice(n, k));
        assert_eq!(assortativity_ratio(&network).unwrap(), 1.0);
        assert_eq!(degree_stats(&network).unwrap().median_degree, k as f64);
    }
}

#[test]
fn erdos_renyi_gamma_is_near_one() {
    for seed in 0..5 {
        let g =
            assortativity_ratio(&net(2000, &erdos_renyi(2000, 4.0 / 1999.0, 900 + seed))).unwrap();
        assert!((g - 1.0).abs() <= 0.05, "seed {seed}: {g}");
    }
}

#[test]
fn star_gamma() {
    let star = net(0, &[(0, 1), (0, 2), (0, 3)]);
    assert_eq!(assortativity_ratio(&star).unwrap(), 1.25);
}

#[test]
fn planted_triangles_lose_clustering_under_rewiring() {
    let edges = ring_lattice(500, 4);
    let network = net(500, &edges);
    let null = rewire_null(
        &network,
        &NullConfig {
            realizations: 10,
            seed: 2,
            ..NullConfig::default()
        },
    )
    .unwrap();
    let c = clustering(&network, 0).unwrap();
    assert_eq!(c, 0.5);
    assert!(!null.degenerate);
    assert!(null.c_rand_mean < c);
    let mean_k = 2.0 * edges.len() as f64 / 500.0;
    assert!((null.c_rand_mean - mean_k / 500.0).abs() <= 3.0 * null.c_rand_sd);
}

#[test]
fn watts_strogatz_is_small_world() {
    let network = net(1000, &watts_strogatz(1000, 10, 0.01, 4));
    let m = network_metrics(&network, 0).unwrap();
    let null = rewire_null(
        &network,
        &NullConfig {
            realizations: 4,
            seed: 4,
            ..NullConfig::default()
        },
    )
    .unwrap();
    let s = small_worldness(&m, &null).unwrap();
    assert!(s > 3.0, "S = {s}");
}

#[test]
fn erdos_renyi_is_not_small_world() {
    let network = net(500, &erdos_renyi(500, 20.0 / 499.0, 5));
    let m = network_metrics(&network, 0).unwrap();
    let null = rewire_null(
        &network,
        &NullConfig {
            realizations: 10,
            seed: 5,
            ..NullConfig::default()
        },
    )
    .unwrap();
    let s = small_worldness(&m, &null).unwrap();
    assert!((s - 1.0).abs() <= 0.2, "S = {s}");
}

#[test]
fn zero_hub_null_matches_full_null() {
    let network = net(120, &erdos_renyi(120, 0.06, 8));
    let cfg = NullConfig {
        realizations: 3,
        seed: 1,
        ..NullConfig::default()
    };
    let a = rewire_null(&network, &cfg).unwrap();
    assert_eq!(a.exclude_top_hubs, 0);
    assert_eq!(a, rewire_null(&network, &cfg).unwrap());
}

#[test]
fn shared_realizations_match_separate_nulls() {
    let network = net(150, &erdos_renyi(150, 0.05, 9));
    let cfg = NullConfig {
        realizations: 4,
        seed: 3,
        ..NullConfig::default()
    };
    let shared = rewire_nulls(&network, &cfg, &[0, 5]);
    for (got, hubs) in shared.into_iter().zip([0, 5]) {
        let alone = NullConfig {
            exclude_top_hubs: hubs,
            ..cfg.clone()
        };
        assert_eq!(got.unwrap(), rewire_null(&network, &alone).unwrap());
    }
}

fn edge_set() -> impl Strategy<Value = (u32, Vec<(u32, u32)>)> {
    (4u32..40)
        .prop_flat_map(|n| {
            let pairs = prop::collection::vec((0..n, 0..n), 0..(3 * n as usize));
            (Just(n), pairs)
        })
        .prop_map(|(n, pairs)| {
            let set: BTreeSet<(u32, u32)> = pairs
                .into_iter()
                .filter(|(a, b)| a != b)
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect();
            (n, set.into_iter().collect())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_match_oracles((n, edges) in edge_set()) {
        let network = net(n, &edges);
        let dense = Dense::new(n as usize, &edges);
        if let Ok(l) = avg_shortest_path(&network, 0) {
            prop_assert!((l - dense.avg_path_oracle()).abs() <= 1e-12);
        }
        prop_assert!((clustering(&network, 0).unwrap() - dense.clustering_oracle()).abs() <= 1e-12);
    }

    #[test]
    fn swaps_keep_degrees_and_simplicity((n, edges) in edge_set(), seed in any::<u64>(), r in 0u32..4) {
        let g = net(n, &edges).graph();
        let (rg, _) = rewired_graph(&g, 5, seed, r);
        prop_assert_eq!(rg.degrees(), g.degrees());
        let list = rg.edge_list();
        let unique: BTreeSet<_> = list.iter().collect();
        prop_assert_eq!(unique.len(), list.len());
        prop_assert!(list.iter().all(|(a, b)| a < b));
    }

    #[test]
    fn zero_hub_exclusion_is_identity((n, edges) in edge_set()) {
        let network = net(n, &edges);
        if let Ok(m) = network_metrics(&network, 0) {
            prop_assert_eq!(m.l, avg_shortest_path(&network, 0).unwrap());
            prop_assert_eq!(m.c, clustering(&network, 0).unwrap());
            prop_assert!(!m.hub_excluded);
        }
    }
}

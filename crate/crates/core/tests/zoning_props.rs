use std::collections::BTreeSet;

use nalgebra::DMatrix;
use proptest::prelude::*;
use zonalopt_core::network::Radial;
use zonalopt_core::powerflow::{sensitivity, solve_pf, SensitivityMatrix};
use zonalopt_core::profiles::ieee33_case;
use zonalopt_core::zoning::{overlap_branches, partition, repair_connectivity, ZonePartition};
use zonalopt_core::{Branch, Bus, BusKind, Network};

fn path(n: usize) -> Network {
    let buses = (1..=n)
        .map(|id| Bus::new(id, if id == 1 { BusKind::Slack } else { BusKind::Pq }, 1))
        .collect();
    let branches = (1..n).map(|i| Branch { from: i, to: i + 1, r: 0.01, x: 0.01 }).collect();
    Network {
        buses,
        branches,
        v_ref: 1.0,
        base_mva: 10.0,
        base_kv: 12.66,
        eps_v: 0.05,
        horizon: 1,
    }
}

/// Buses of `zone` reachable from `start` without leaving the zone.
fn reach(assignment: &[usize], radial: &Radial, start: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(b) = stack.pop() {
        for nb in radial.parent[b].into_iter().chain(radial.children[b].iter().copied()) {
            if assignment[nb] == assignment[b] && seen.insert(nb) {
                stack.push(nb);
            }
        }
    }
    seen
}

fn assert_connected(assignment: &[usize], radial: &Radial, pcc: &[usize]) {
    for (z, &p) in pcc.iter().enumerate() {
        assert_eq!(assignment[p], z, "pcc of zone {z} moved");
        let members: BTreeSet<usize> = (0..assignment.len()).filter(|&b| assignment[b] == z).collect();
        assert_eq!(reach(assignment, radial, p), members, "zone {z} is not connected");
    }
}

fn bundled_sensitivity(hour: usize) -> (Network, SensitivityMatrix) {
    let net = ieee33_case();
    let pf = solve_pf(&net, &net.base_injections(hour)).unwrap();
    let s = sensitivity(&net, &pf, &net.mg_buses()).unwrap();
    (net, s)
}

#[test]
fn repair_fixes_an_alternating_path() {
    let net = path(10);
    let radial = net.radial().unwrap();
    let pcc = [2, 7];
    // 0 1 0 1 ... with each PCC forced to its zone
    let mut a: Vec<usize> = (0..10).map(|i| i % 2).collect();
    a[2] = 0;
    a[7] = 1;
    let fixed = repair_connectivity(a, &radial, &pcc);
    assert_connected(&fixed, &radial, &pcc);
    // on a path two connected zones leave exactly one cut
    assert_eq!(overlap_branches(&fixed, &radial).len(), 1);
}

#[test]
fn root_side_strays_join_the_child_zone() {
    let net = path(10);
    let radial = net.radial().unwrap();
    let pcc = [5, 8];
    let a = vec![1, 1, 1, 0, 0, 0, 0, 1, 1, 1];
    let fixed = repair_connectivity(a, &radial, &pcc);
    assert_connected(&fixed, &radial, &pcc);
    assert_eq!(&fixed[3..7], &[0, 0, 0, 0]);
    assert_eq!(&fixed[0..3], &[0, 0, 0]);
}

#[test]
fn overlaps_are_exactly_the_cut_edges() {
    for hour in [0, 11, 19] {
        let (net, s) = bundled_sensitivity(hour);
        let p = partition(&s, &net).unwrap();
        let radial = net.radial().unwrap();
        let brute: Vec<usize> = net
            .branches
            .iter()
            .enumerate()
            .filter(|(_, br)| {
                let f = net.index_of(br.from).unwrap();
                let t = net.index_of(br.to).unwrap();
                p.assignment[f] != p.assignment[t]
            })
            .map(|(k, _)| k)
            .collect();
        let listed: Vec<usize> = p.overlaps.iter().map(|o| o.branch).collect();
        assert_eq!(listed, brute, "hour {hour}");
        for o in &p.overlaps {
            let (u, d) = radial.oriented[o.branch];
            assert_eq!((o.zone_a, o.zone_b), (p.assignment[u], p.assignment[d]));
        }
    }
}

fn with_scaled_columns(s: &SensitivityMatrix, alpha: f64) -> SensitivityMatrix {
    SensitivityMatrix {
        dv_dp: &s.dv_dp * alpha,
        dv_dq: &s.dv_dq * alpha,
        ..s.clone()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn uniform_column_scaling_keeps_the_partition(hour in 0usize..24, alpha in 1e-3f64..1e3) {
        let (net, s) = bundled_sensitivity(hour);
        let a = partition(&s, &net).unwrap();
        let b = partition(&with_scaled_columns(&s, alpha), &net).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn random_sensitivities_give_connected_zones(vals in prop::collection::vec(1e-6f64..1.0, 32 * 3)) {
        let net = ieee33_case();
        let (_, s) = bundled_sensitivity(0);
        let s = SensitivityMatrix { dv_dp: DMatrix::from_vec(32, 3, vals), ..s };
        let p: ZonePartition = partition(&s, &net).unwrap();
        let radial = net.radial().unwrap();
        assert_connected(&p.assignment, &radial, &s.mg_buses);
        prop_assert_eq!(p.n_zones(), 3);
        // a tree split into k connected parts has k - 1 cuts
        prop_assert_eq!(p.overlaps.len(), 2);
    }

    #[test]
    fn repair_anchors_every_bus_on_a_path(a in prop::collection::vec(0usize..3, 10), pcc in prop::sample::subsequence((1usize..10).collect::<Vec<_>>(), 3)) {
        let net = path(10);
        let radial = net.radial().unwrap();
        let pcc: Vec<usize> = pcc;
        let mut a = a;
        for (z, &p) in pcc.iter().enumerate() {
            a[p] = z;
        }
        let fixed = repair_connectivity(a.clone(), &radial, &pcc);
        assert_connected(&fixed, &radial, &pcc);
        // buses already connected to their own PCC never move
        for (z, &p) in pcc.iter().enumerate() {
            for b in reach(&a, &radial, p) {
                prop_assert_eq!(fixed[b], z);
            }
        }
    }
}

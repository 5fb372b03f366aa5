//! Sensitivity-based zoning.
//!
//! Every PQ bus joins the microgrid whose active injection moves its voltage
//! the most. Each PCC bus is pinned to its own microgrid's zone, and the slack
//! bus follows its neighbour. A repair pass then makes every zone a connected
//! subtree. Branches whose endpoints end up in different zones are the
//! overlapping branches that carry the consensus variables.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::network::{Network, Radial};
use crate::powerflow::SensitivityMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OverlapBranch {
    pub branch: usize,
    /// Zone of the upstream endpoint (towards the slack).
    pub zone_a: usize,
    /// Zone of the downstream endpoint.
    pub zone_b: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ZonePartition {
    /// Zone of every bus, by bus position.
    pub assignment: Vec<usize>,
    /// PCC bus position of every zone; `None` only for the single zone used
    /// when the network has no microgrid.
    pub pcc: Vec<Option<usize>>,
    pub overlaps: Vec<OverlapBranch>,
}

impl ZonePartition {
    pub fn n_zones(&self) -> usize {
        self.pcc.len()
    }

    pub fn buses_of(&self, zone: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&b| self.assignment[b] == zone).collect()
    }

    /// Branches with both endpoints inside `zone`.
    pub fn intra_branches(&self, net: &Network, radial: &Radial, zone: usize) -> Vec<usize> {
        (0..net.branches.len())
            .filter(|&k| {
                let (u, d) = radial.oriented[k];
                self.assignment[u] == zone && self.assignment[d] == zone
            })
            .collect()
    }

    /// Overlaps touching `zone`.
    pub fn overlaps_of(&self, zone: usize) -> Vec<OverlapBranch> {
        self.overlaps
            .iter()
            .copied()
            .filter(|o| o.zone_a == zone || o.zone_b == zone)
            .collect()
    }

    /// The whole network as one zone with no PCC.
    pub fn single(net: &Network) -> ZonePartition {
        ZonePartition {
            assignment: vec![0; net.n_buses()],
            pcc: vec![None],
            overlaps: Vec::new(),
        }
    }
}

/// Zone of each bus from the sensitivity argmax. Ties go to the lowest zone.
pub fn argmax_assignment(sens: &SensitivityMatrix, n_buses: usize) -> Vec<usize> {
    let mut zone = vec![0; n_buses];
    for (r, &b) in sens.pq_buses.iter().enumerate() {
        let mut best = 0;
        for w in 1..sens.mg_buses.len() {
            if sens.dv_dp[(r, w)] > sens.dv_dp[(r, best)] {
                best = w;
            }
        }
        zone[b] = best;
    }
    zone
}

pub fn partition(sens: &SensitivityMatrix, net: &Network) -> Result<ZonePartition> {
    if sens.mg_buses.is_empty() {
        return Err(Error::InvalidArgument("partition needs at least one microgrid".into()));
    }
    let radial = net.radial()?;
    let mut assignment = argmax_assignment(sens, net.n_buses());
    for (w, &b) in sens.mg_buses.iter().enumerate() {
        assignment[b] = w;
    }
    if let Some(&first) = radial.children[radial.root].first() {
        assignment[radial.root] = assignment[first];
    }
    let assignment = repair_connectivity(assignment, &radial, &sens.mg_buses);
    let overlaps = overlap_branches(&assignment, &radial);
    Ok(ZonePartition {
        assignment,
        pcc: sens.mg_buses.iter().map(|&b| Some(b)).collect(),
        overlaps,
    })
}

/// Cut edges of `assignment`, in branch order.
pub fn overlap_branches(assignment: &[usize], radial: &Radial) -> Vec<OverlapBranch> {
    radial
        .oriented
        .iter()
        .enumerate()
        .filter(|(_, &(u, d))| assignment[u] != assignment[d])
        .map(|(k, &(u, d))| OverlapBranch {
            branch: k,
            zone_a: assignment[u],
            zone_b: assignment[d],
        })
        .collect()
}

/// Buses reachable from their own zone's PCC without leaving the zone.
fn anchored(assignment: &[usize], radial: &Radial, pcc: &[usize]) -> Vec<bool> {
    let n = assignment.len();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (z, &p) in pcc.iter().enumerate() {
        if assignment[p] == z && !seen[p] {
            seen[p] = true;
            queue.push_back(p);
        }
    }
    while let Some(b) = queue.pop_front() {
        let nbrs = radial.parent[b].into_iter().chain(radial.children[b].iter().copied());
        for nb in nbrs {
            if !seen[nb] && assignment[nb] == assignment[b] {
                seen[nb] = true;
                queue.push_back(nb);
            }
        }
    }
    seen
}

/// Reassigns every bus cut off from its zone's PCC. A stranded bus first
/// takes its parent's zone (top-down sweep); where no anchored parent exists,
/// as near the root, it takes the zone of an anchored child (bottom-up
/// sweep). Repeats until every bus is anchored. Anchored buses never move,
/// so each round strictly shrinks the stranded set.
pub fn repair_connectivity(mut assignment: Vec<usize>, radial: &Radial, pcc: &[usize]) -> Vec<usize> {
    loop {
        let mut ok = anchored(&assignment, radial, pcc);
        if ok.iter().all(|&a| a) {
            return assignment;
        }
        for &b in &radial.order {
            if let Some(p) = radial.parent[b] {
                if !ok[b] && ok[p] {
                    assignment[b] = assignment[p];
                    ok[b] = true;
                }
            }
        }
        for &b in radial.order.iter().rev() {
            if !ok[b] {
                if let Some(&c) = radial.children[b].iter().find(|&&c| ok[c]) {
                    assignment[b] = assignment[c];
                    ok[b] = true;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Branch, Bus, BusKind};
    use nalgebra::DMatrix;

    /// Chain 1-2-...-7 with lateral 4-8-9-10; microgrids at buses 3 and 7.
    fn ten_bus() -> Network {
        let mut buses: Vec<Bus> = (1..=10)
            .map(|id| Bus::new(id, if id == 1 { BusKind::Slack } else { BusKind::Pq }, 1))
            .collect();
        buses[2].kind = BusKind::MgPcc;
        buses[2].mg = Some(0);
        buses[6].kind = BusKind::MgPcc;
        buses[6].mg = Some(1);
        let edges = [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (4, 8), (8, 9), (9, 10)];
        Network {
            buses,
            branches: edges.iter().map(|&(from, to)| Branch { from, to, r: 0.01, x: 0.01 }).collect(),
            v_ref: 1.0,
            base_mva: 10.0,
            base_kv: 12.66,
            eps_v: 0.05,
            horizon: 1,
        }
    }

    fn sens_from(net: &Network, rows: &[(f64, f64)]) -> SensitivityMatrix {
        let pq: Vec<usize> = (1..net.n_buses()).collect();
        let mut dv = DMatrix::zeros(pq.len(), 2);
        for (r, &(a, b)) in rows.iter().enumerate() {
            dv[(r, 0)] = a;
            dv[(r, 1)] = b;
        }
        SensitivityMatrix {
            pq_buses: pq,
            mg_buses: vec![2, 6],
            dv_dp: dv.clone(),
            dv_dq: dv,
        }
    }

    #[test]
    fn two_zone_split_at_branch_3_4() {
        let net = ten_bus();
        // buses 2..=10: 2,3 favour the first microgrid, 4..=10 the second
        let s = sens_from(
            &net,
            &[(2.0, 1.0), (3.0, 1.0), (1.0, 2.0), (1.0, 2.0), (1.0, 3.0), (1.0, 4.0), (1.0, 2.0), (1.0, 2.0), (1.0, 2.0)],
        );
        let p = partition(&s, &net).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 0, 1, 1, 1, 1, 1, 1, 1]);
        assert_eq!(p.overlaps, vec![OverlapBranch { branch: 2, zone_a: 0, zone_b: 1 }]);
    }

    #[test]
    fn ties_go_to_lowest_zone() {
        let net = ten_bus();
        let s = sens_from(&net, &[(1.0, 1.0); 9]);
        let z = argmax_assignment(&s, net.n_buses());
        assert!(z.iter().all(|&v| v == 0));
    }

    #[test]
    fn single_microgrid_gives_one_zone() {
        let net = ten_bus();
        let mut s = sens_from(&net, &[(1.0, 0.0); 9]);
        s.dv_dp = s.dv_dp.columns(0, 1).into_owned();
        s.mg_buses = vec![2];
        let p = partition(&s, &net).unwrap();
        assert!(p.assignment.iter().all(|&z| z == 0));
        assert!(p.overlaps.is_empty());
    }

    #[test]
    fn no_microgrid_rejected() {
        let net = ten_bus();
        let mut s = sens_from(&net, &[(1.0, 0.0); 9]);
        s.dv_dp = DMatrix::zeros(9, 0);
        s.mg_buses = vec![];
        assert!(partition(&s, &net).is_err());
    }

    #[test]
    fn island_absorbed_by_parent_zone() {
        let net = ten_bus();
        let r = net.radial().unwrap();
        let mut a = vec![0, 0, 0, 1, 1, 1, 1, 1, 1, 1];
        a[8] = 0; // bus 9 stranded inside zone 1
        let fixed = repair_connectivity(a, &r, &[2, 6]);
        assert_eq!(fixed, vec![0, 0, 0, 1, 1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn connected_partition_is_fixpoint() {
        let net = ten_bus();
        let r = net.radial().unwrap();
        let a = vec![0, 0, 0, 0, 1, 1, 1, 0, 0, 0];
        assert_eq!(repair_connectivity(a.clone(), &r, &[2, 6]), a);
    }

    #[test]
    fn root_side_orphans_take_child_zone() {
        let net = ten_bus();
        let r = net.radial().unwrap();
        // buses 1,2 in zone 1 but its PCC (bus 7) is cut off by zone 0 at bus 3
        let a = vec![1, 1, 0, 1, 1, 1, 1, 1, 1, 1];
        let fixed = repair_connectivity(a, &r, &[2, 6]);
        assert_eq!(&fixed[..3], &[0, 0, 0]);
        assert_eq!(anchored(&fixed, &r, &[2, 6]), vec![true; 10]);
    }
}

//! Radial distribution network model.
//!
//! Powers are kept in kW / kvar, impedances in per unit on the network's
//! `base_mva` / `base_kv`. Hour-indexed arrays are 0-based internally; the
//! command-line layer labels them 1..=T.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Slack,
    Pq,
    MgPcc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvUnit {
    /// Inverter apparent-power rating [kVA].
    pub capacity_kva: f64,
    /// Maximum-power-point active output per hour [kW].
    pub p_mppt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    /// Active demand per hour [kW].
    pub load_p: Vec<f64>,
    /// Reactive demand per hour [kvar].
    pub load_q: Vec<f64>,
    pub pv: Option<PvUnit>,
    /// Index into the scenario's microgrid list.
    pub mg: Option<usize>,
}

impl Bus {
    pub fn new(id: usize, kind: BusKind, horizon: usize) -> Self {
        Bus {
            id,
            kind,
            load_p: vec![0.0; horizon],
            load_q: vec![0.0; horizon],
            pv: None,
            mg: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Resistance [p.u.].
    pub r: f64,
    /// Reactance [p.u.].
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    /// Slack voltage magnitude [p.u.].
    pub v_ref: f64,
    pub base_mva: f64,
    pub base_kv: f64,
    /// Allowed voltage deviation around 1 p.u.
    pub eps_v: f64,
    pub horizon: usize,
}

/// Per-bus net injections (generation minus demand) for one hour.
#[derive(Debug, Clone, PartialEq)]
pub struct Injections {
    /// [kW], indexed by bus position.
    pub p: Vec<f64>,
    /// [kvar], indexed by bus position.
    pub q: Vec<f64>,
}

impl Injections {
    pub fn zeros(n: usize) -> Self {
        Injections {
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }
}

/// The network as a tree rooted at the slack bus.
#[derive(Debug, Clone, PartialEq)]
pub struct Radial {
    pub root: usize,
    /// Bus positions in breadth-first order from the root.
    pub order: Vec<usize>,
    /// Parent bus position, `None` for the root.
    pub parent: Vec<Option<usize>>,
    /// Branch index connecting a bus to its parent.
    pub parent_branch: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// For every branch, `(upstream, downstream)` bus positions.
    pub oriented: Vec<(usize, usize)>,
    pub depth: Vec<usize>,
}

impl Radial {
    /// Positions of `bus` and all of its descendants.
    pub fn subtree(&self, bus: usize) -> Vec<usize> {
        let mut out = vec![bus];
        let mut i = 0;
        while i < out.len() {
            let b = out[i];
            out.extend(self.children[b].iter().copied());
            i += 1;
        }
        out
    }
}

impl Network {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn slack(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.kind == BusKind::Slack)
    }

    pub fn kw_to_pu(&self, kw: f64) -> f64 {
        kw / (1000.0 * self.base_mva)
    }

    pub fn pu_to_kw(&self, pu: f64) -> f64 {
        pu * 1000.0 * self.base_mva
    }

    /// Base impedance [ohm].
    pub fn z_base(&self) -> f64 {
        self.base_kv * self.base_kv / self.base_mva
    }

    /// Branch impedances converted to ohms, in branch order.
    pub fn impedances_ohm(&self) -> Vec<(f64, f64)> {
        let zb = self.z_base();
        self.branches.iter().map(|b| (b.r * zb, b.x * zb)).collect()
    }

    /// Replaces branch impedances with the given ohmic values.
    pub fn set_impedances_ohm(&mut self, ohm: &[(f64, f64)]) {
        let zb = self.z_base();
        for (b, &(r, x)) in self.branches.iter_mut().zip(ohm) {
            b.r = r / zb;
            b.x = x / zb;
        }
    }

    /// Positions of buses attached to a microgrid, in bus order.
    pub fn mg_buses(&self) -> Vec<usize> {
        (0..self.buses.len())
            .filter(|&i| self.buses[i].kind == BusKind::MgPcc)
            .collect()
    }

    pub fn total_load_kw(&self, hour: usize) -> f64 {
        self.buses.iter().map(|b| b.load_p[hour]).sum()
    }

    /// Injections of the no-control operating point: loads, PV at MPPT and
    /// unity power factor, microgrids exchanging nothing.
    pub fn base_injections(&self, hour: usize) -> Injections {
        let mut inj = Injections::zeros(self.buses.len());
        for (i, b) in self.buses.iter().enumerate() {
            inj.p[i] = -b.load_p[hour];
            inj.q[i] = -b.load_q[hour];
            if let Some(pv) = &b.pv {
                inj.p[i] += pv.p_mppt[hour];
            }
        }
        inj
    }

    /// Every violated invariant, one message each. Empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let n = self.buses.len();
        if n == 0 {
            v.push(String::from("network has no buses"));
            return v;
        }
        let slacks = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slacks == 0 {
            v.push(String::from("no slack bus"));
        } else if slacks > 1 {
            v.push(format!("multiple slack buses ({slacks})"));
        }
        for (i, b) in self.buses.iter().enumerate() {
            if self.buses[..i].iter().any(|o| o.id == b.id) {
                v.push(format!("duplicate bus id {}", b.id));
            }
            if b.load_p.len() != self.horizon || b.load_q.len() != self.horizon {
                v.push(format!(
                    "bus {}: load profiles must have {} entries",
                    b.id, self.horizon
                ));
            }
            if b.load_p.iter().chain(&b.load_q).any(|x| !x.is_finite()) {
                v.push(format!("bus {}: non-finite load", b.id));
            }
            match (b.kind, b.mg) {
                (BusKind::MgPcc, None) => {
                    v.push(format!("bus {}: mg_pcc bus without microgrid", b.id))
                }
                (BusKind::Slack | BusKind::Pq, Some(_)) => v.push(format!(
                    "bus {}: only mg_pcc buses may carry a microgrid",
                    b.id
                )),
                _ => {}
            }
            if let Some(pv) = &b.pv {
                if !(pv.capacity_kva > 0.0) {
                    v.push(format!("bus {}: PV capacity must be > 0", b.id));
                }
                if pv.p_mppt.len() != self.horizon {
                    v.push(format!(
                        "bus {}: PV profile must have {} entries",
                        b.id, self.horizon
                    ));
                }
                if pv
                    .p_mppt
                    .iter()
                    .any(|&p| !(p >= 0.0 && p <= pv.capacity_kva + 1e-9))
                {
                    v.push(format!(
                        "bus {}: PV MPPT output must lie in [0, capacity]",
                        b.id
                    ));
                }
            }
        }
        for (k, br) in self.branches.iter().enumerate() {
            let tag = format!("branch {}-{}", br.from, br.to);
            if !(br.r > 0.0) {
                v.push(format!("{tag}: r must be > 0"));
            }
            if !(br.x > 0.0) {
                v.push(format!("{tag}: x must be > 0"));
            }
            if br.from == br.to {
                v.push(format!("{tag}: self-loop"));
            }
            if self.index_of(br.from).is_none() || self.index_of(br.to).is_none() {
                v.push(format!("{tag}: references unknown bus"));
            }
            let dup = self.branches[..k].iter().any(|o| {
                (o.from == br.from && o.to == br.to) || (o.from == br.to && o.to == br.from)
            });
            if dup {
                v.push(format!("{tag}: duplicate branch"));
            }
        }
        if !(self.v_ref > 0.0) || !(self.base_mva > 0.0) || !(self.base_kv > 0.0) {
            v.push(String::from("v_ref, base_mva and base_kv must be > 0"));
        }
        if !(self.eps_v > 0.0 && self.eps_v < 1.0) {
            v.push(String::from("eps_v must lie in (0, 1)"));
        }
        if self.branches.len() + 1 != n {
            v.push(format!(
                "not radial: {} branches for {} buses",
                self.branches.len(),
                n
            ));
        } else if slacks == 1 && v.is_empty() && self.radial().is_err() {
            v.push(String::from("not connected"));
        }
        v
    }

    /// Validates and returns `self`, or the violations as an error.
    pub fn validated(self) -> Result<Self> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidNetwork(v))
        }
    }

    /// Breadth-first tree from the slack bus.
    pub fn radial(&self) -> Result<Radial> {
        let n = self.buses.len();
        let root = self
            .slack()
            .ok_or_else(|| Error::InvalidNetwork(vec![String::from("no slack bus")]))?;
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, br) in self.branches.iter().enumerate() {
            let (Some(a), Some(b)) = (self.index_of(br.from), self.index_of(br.to)) else {
                return Err(Error::InvalidNetwork(vec![format!(
                    "branch {}-{}: references unknown bus",
                    br.from, br.to
                )]));
            };
            adj[a].push((b, k));
            adj[b].push((a, k));
        }
        let mut parent = vec![None; n];
        let mut parent_branch = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut depth = vec![0; n];
        let mut seen = vec![false; n];
        let mut oriented = vec![(usize::MAX, usize::MAX); self.branches.len()];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(b) = queue.pop_front() {
            order.push(b);
            for &(nb, k) in &adj[b] {
                if seen[nb] {
                    if parent_branch[b] != Some(k) {
                        return Err(Error::InvalidNetwork(vec![String::from(
                            "not radial: cycle detected",
                        )]));
                    }
                    continue;
                }
                seen[nb] = true;
                parent[nb] = Some(b);
                parent_branch[nb] = Some(k);
                depth[nb] = depth[b] + 1;
                children[b].push(nb);
                oriented[k] = (b, nb);
                queue.push_back(nb);
            }
        }
        if order.len() != n {
            return Err(Error::InvalidNetwork(vec![String::from("not connected")]));
        }
        Ok(Radial {
            root,
            order,
            parent,
            parent_branch,
            children,
            oriented,
            depth,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ieee33_case;

    fn path(n: usize) -> Network {
        let mut buses = Vec::new();
        for id in 1..=n {
            let kind = if id == 1 { BusKind::Slack } else { BusKind::Pq };
            buses.push(Bus::new(id, kind, 1));
        }
        let branches = (1..n)
            .map(|i| Branch {
                from: i,
                to: i + 1,
                r: 0.01,
                x: 0.01,
            })
            .collect();
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

    #[test]
    fn bundled_case_is_valid() {
        assert!(ieee33_case().validate().is_empty());
    }

    #[test]
    fn zero_resistance_is_reported_by_branch() {
        let mut net = path(6);
        net.branches[4].r = 0.0;
        assert_eq!(net.validate(), vec![String::from("branch 5-6: r must be > 0")]);
    }

    #[test]
    fn multiple_slack_rejected() {
        let mut net = path(4);
        net.buses[2].kind = BusKind::Slack;
        let v = net.validate();
        assert!(v.iter().any(|m| m.contains("multiple slack")), "{v:?}");
    }

    #[test]
    fn cycle_rejected() {
        let mut net = path(4);
        net.branches.push(Branch {
            from: 4,
            to: 1,
            r: 0.01,
            x: 0.01,
        });
        let v = net.validate();
        assert!(v.iter().any(|m| m.contains("not radial")), "{v:?}");
    }

    #[test]
    fn disconnected_with_tree_edge_count_rejected() {
        let mut net = path(5);
        net.branches[1] = Branch {
            from: 5,
            to: 3,
            r: 0.01,
            x: 0.01,
        };
        // 1-2 | 3-4-5-3
        let v = net.validate();
        assert!(!v.is_empty());
        assert!(net.radial().is_err());
    }

    #[test]
    fn duplicate_branch_rejected() {
        let mut net = path(4);
        net.branches[2] = Branch {
            from: 2,
            to: 1,
            r: 0.01,
            x: 0.01,
        };
        let v = net.validate();
        assert!(v.iter().any(|m| m.contains("duplicate")), "{v:?}");
    }

    #[test]
    fn pcc_without_microgrid_rejected() {
        let mut net = path(3);
        net.buses[2].kind = BusKind::MgPcc;
        assert!(!net.validate().is_empty());
        net.buses[2].mg = Some(0);
        assert!(net.validate().is_empty());
    }

    #[test]
    fn radial_orients_branches_away_from_slack() {
        let mut net = path(5);
        net.branches[2] = Branch {
            from: 4,
            to: 3,
            r: 0.01,
            x: 0.01,
        };
        let t = net.radial().unwrap();
        assert_eq!(t.oriented[2], (2, 3));
        assert_eq!(t.order, vec![0, 1, 2, 3, 4]);
        assert_eq!(t.subtree(2), vec![2, 3, 4]);
    }

    #[test]
    fn per_unit_round_trip() {
        let net = ieee33_case();
        let mut back = net.clone();
        back.set_impedances_ohm(&net.impedances_ohm());
        for (a, b) in net.branches.iter().zip(&back.branches) {
            assert!(((a.r - b.r) / a.r).abs() <= 1e-12);
            assert!(((a.x - b.x) / a.x).abs() <= 1e-12);
        }
    }
}

//! JSON scenario files.
//!
//! A file has five top-level sections: `network` (buses with their hourly
//! load and PV profiles, branches, bases), `mgs` (device parameters and
//! hourly load/PV/wind profiles of every microgrid), `prices`, `admm`, and
//! `pcc`. `opf` is optional. Power is in kW/kvar, impedance in p.u.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use zonalopt_core::admm::{AdmmConfig, PenaltyStrategy};
use zonalopt_core::dispatch::{Battery, Diesel, MgConfig, Microturbine};
use zonalopt_core::opf::OpfOptions;
use zonalopt_core::{Branch, Bus, BusKind, Network, PvUnit, Scenario};

use crate::error::AppError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub network: NetworkSection,
    pub mgs: Vec<MgSection>,
    pub prices: Prices,
    pub admm: AdmmSection,
    #[serde(default)]
    pub opf: OpfSection,
    pub pcc: PccSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub v_ref: f64,
    pub base_mva: f64,
    pub base_kv: f64,
    pub eps_v: f64,
    pub horizon: usize,
    pub buses: Vec<BusEntry>,
    pub branches: Vec<BranchEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKindName {
    Slack,
    Pq,
    MgPcc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusEntry {
    pub id: usize,
    pub kind: BusKindName,
    pub load_p: Vec<f64>,
    pub load_q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pv: Option<PvEntry>,
    /// Index into `mgs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mg: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvEntry {
    pub capacity_kva: f64,
    pub p_mppt: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchEntry {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MgSection {
    pub microturbine: MicroturbineEntry,
    pub diesel: DieselEntry,
    pub battery: BatteryEntry,
    pub profiles: MgProfiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MgProfiles {
    pub load: Vec<f64>,
    pub pv: Vec<f64>,
    pub wind: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroturbineEntry {
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub p_init: f64,
    pub k_op: f64,
    pub eta: f64,
    pub l_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DieselEntry {
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub p_init: f64,
    pub k_op: f64,
    pub k_fu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryEntry {
    pub capacity_kwh: f64,
    pub p_max: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc0: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prices {
    /// [$/m³] per hour.
    pub gas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Fixed,
    Adaptive,
    Improved,
}

impl From<StrategyName> for PenaltyStrategy {
    fn from(s: StrategyName) -> Self {
        match s {
            StrategyName::Fixed => PenaltyStrategy::Fixed,
            StrategyName::Adaptive => PenaltyStrategy::Adaptive,
            StrategyName::Improved => PenaltyStrategy::Improved,
        }
    }
}

impl From<PenaltyStrategy> for StrategyName {
    fn from(s: PenaltyStrategy) -> Self {
        match s {
            PenaltyStrategy::Fixed => StrategyName::Fixed,
            PenaltyStrategy::Adaptive => StrategyName::Adaptive,
            PenaltyStrategy::Improved => StrategyName::Improved,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmSection {
    pub rho0: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub strategy: StrategyName,
    pub sigma: usize,
    pub mu_ratio: f64,
}

impl Default for AdmmSection {
    fn default() -> Self {
        AdmmConfig::default().into()
    }
}

impl From<AdmmConfig> for AdmmSection {
    fn from(c: AdmmConfig) -> Self {
        AdmmSection {
            rho0: c.rho0,
            eps: c.eps,
            max_iter: c.max_iter,
            strategy: c.strategy.into(),
            sigma: c.sigma,
            mu_ratio: c.mu_ratio,
        }
    }
}

impl From<AdmmSection> for AdmmConfig {
    fn from(a: AdmmSection) -> Self {
        AdmmConfig {
            rho0: a.rho0,
            eps: a.eps,
            max_iter: a.max_iter,
            strategy: a.strategy.into(),
            sigma: a.sigma,
            mu_ratio: a.mu_ratio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpfSection {
    pub kappa: f64,
    pub v_spec: f64,
    pub payoff_eta: f64,
}

impl Default for OpfSection {
    fn default() -> Self {
        let o = OpfOptions::default();
        OpfSection {
            kappa: o.kappa,
            v_spec: o.v_spec,
            payoff_eta: o.payoff_eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PccSection {
    pub cap_kw: f64,
    pub q_ratio: f64,
}

impl From<&Scenario> for ScenarioFile {
    fn from(sc: &Scenario) -> Self {
        let net = &sc.network;
        let buses = net
            .buses
            .iter()
            .map(|b| BusEntry {
                id: b.id,
                kind: match b.kind {
                    BusKind::Slack => BusKindName::Slack,
                    BusKind::Pq => BusKindName::Pq,
                    BusKind::MgPcc => BusKindName::MgPcc,
                },
                load_p: b.load_p.clone(),
                load_q: b.load_q.clone(),
                pv: b.pv.as_ref().map(|pv| PvEntry {
                    capacity_kva: pv.capacity_kva,
                    p_mppt: pv.p_mppt.clone(),
                }),
                mg: b.mg,
            })
            .collect();
        let branches = net
            .branches
            .iter()
            .map(|br| BranchEntry {
                from: br.from,
                to: br.to,
                r: br.r,
                x: br.x,
            })
            .collect();
        let mgs = sc
            .mgs
            .iter()
            .map(|m| MgSection {
                microturbine: MicroturbineEntry {
                    p_min: m.mt.p_min,
                    p_max: m.mt.p_max,
                    ramp_up: m.mt.ramp_up,
                    ramp_down: m.mt.ramp_down,
                    p_init: m.mt.p_init,
                    k_op: m.mt.k_op,
                    eta: m.mt.eta,
                    l_g: m.mt.l_g,
                },
                diesel: DieselEntry {
                    p_min: m.de.p_min,
                    p_max: m.de.p_max,
                    ramp_up: m.de.ramp_up,
                    ramp_down: m.de.ramp_down,
                    p_init: m.de.p_init,
                    k_op: m.de.k_op,
                    k_fu: m.de.k_fu,
                    alpha: m.de.alpha,
                    beta: m.de.beta,
                    gamma: m.de.gamma,
                    p_norm: m.de.p_norm,
                },
                battery: BatteryEntry {
                    capacity_kwh: m.bess.capacity,
                    p_max: m.bess.p_max,
                    eta_ch: m.bess.eta_ch,
                    eta_dis: m.bess.eta_dis,
                    soc_min: m.bess.soc_min,
                    soc_max: m.bess.soc_max,
                    soc0: m.bess.soc0,
                    zeta: m.bess.zeta,
                },
                profiles: MgProfiles {
                    load: m.load.clone(),
                    pv: m.pv.clone(),
                    wind: m.wind.clone(),
                },
            })
            .collect();
        ScenarioFile {
            version: SCHEMA_VERSION,
            network: NetworkSection {
                v_ref: net.v_ref,
                base_mva: net.base_mva,
                base_kv: net.base_kv,
                eps_v: net.eps_v,
                horizon: net.horizon,
                buses,
                branches,
            },
            mgs,
            prices: Prices {
                gas: sc.gas_price.clone(),
            },
            admm: sc.admm.into(),
            opf: OpfSection {
                kappa: sc.opf.kappa,
                v_spec: sc.opf.v_spec,
                payoff_eta: sc.opf.payoff_eta,
            },
            pcc: PccSection {
                cap_kw: sc.pcc_cap_kw,
                q_ratio: sc.pcc_q_ratio,
            },
        }
    }
}

impl ScenarioFile {
    /// Builds the scenario without validating it.
    pub fn into_scenario(self) -> Scenario {
        let n = self.network;
        let network = Network {
            buses: n
                .buses
                .into_iter()
                .map(|b| Bus {
                    id: b.id,
                    kind: match b.kind {
                        BusKindName::Slack => BusKind::Slack,
                        BusKindName::Pq => BusKind::Pq,
                        BusKindName::MgPcc => BusKind::MgPcc,
                    },
                    load_p: b.load_p,
                    load_q: b.load_q,
                    pv: b.pv.map(|pv| PvUnit {
                        capacity_kva: pv.capacity_kva,
                        p_mppt: pv.p_mppt,
                    }),
                    mg: b.mg,
                })
                .collect(),
            branches: n
                .branches
                .iter()
                .map(|br| Branch {
                    from: br.from,
                    to: br.to,
                    r: br.r,
                    x: br.x,
                })
                .collect(),
            v_ref: n.v_ref,
            base_mva: n.base_mva,
            base_kv: n.base_kv,
            eps_v: n.eps_v,
            horizon: n.horizon,
        };
        let mgs = self
            .mgs
            .into_iter()
            .map(|m| {
                let (mt, de, b) = (m.microturbine, m.diesel, m.battery);
                MgConfig {
                    mt: Microturbine {
                        p_min: mt.p_min,
                        p_max: mt.p_max,
                        ramp_up: mt.ramp_up,
                        ramp_down: mt.ramp_down,
                        p_init: mt.p_init,
                        k_op: mt.k_op,
                        eta: mt.eta,
                        l_g: mt.l_g,
                    },
                    de: Diesel {
                        p_min: de.p_min,
                        p_max: de.p_max,
                        ramp_up: de.ramp_up,
                        ramp_down: de.ramp_down,
                        p_init: de.p_init,
                        k_op: de.k_op,
                        k_fu: de.k_fu,
                        alpha: de.alpha,
                        beta: de.beta,
                        gamma: de.gamma,
                        p_norm: de.p_norm,
                    },
                    bess: Battery {
                        capacity: b.capacity_kwh,
                        p_max: b.p_max,
                        eta_ch: b.eta_ch,
                        eta_dis: b.eta_dis,
                        soc_min: b.soc_min,
                        soc_max: b.soc_max,
                        soc0: b.soc0,
                        zeta: b.zeta,
                    },
                    load: m.profiles.load,
                    pv: m.profiles.pv,
                    wind: m.profiles.wind,
                }
            })
            .collect();
        Scenario {
            network,
            mgs,
            gas_price: self.prices.gas,
            admm: self.admm.into(),
            opf: OpfOptions {
                kappa: self.opf.kappa,
                v_spec: self.opf.v_spec,
                payoff_eta: self.opf.payoff_eta,
            },
            pcc_cap_kw: self.pcc.cap_kw,
            pcc_q_ratio: self.pcc.q_ratio,
        }
    }
}

/// Parses and validates a scenario. Parse errors carry the field path and
/// the line/column; validation errors list every violated invariant.
pub fn parse_scenario(text: &str) -> Result<Scenario, AppError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        AppError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    if file.version != SCHEMA_VERSION {
        return Err(AppError::Validation(vec![format!(
            "unsupported scenario version {} (expected {SCHEMA_VERSION})",
            file.version
        )]));
    }
    let sc = file.into_scenario();
    let v = sc.validate();
    if v.is_empty() {
        Ok(sc)
    } else {
        Err(AppError::Validation(v))
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, AppError> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_scenario(&text)
}

pub fn to_json(sc: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from(sc)).expect("scenario serializes")
}

pub fn save_scenario(sc: &Scenario, path: &Path) -> Result<(), AppError> {
    fs::write(path, to_json(sc)).map_err(|e| AppError::io(path, e))
}

//! Everything one run needs, and the bundled 33-bus day.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::admm::AdmmConfig;
use crate::dispatch::{self, Battery, Diesel, Microturbine, MgConfig};
use crate::network::Network;
use crate::opf::{OpfOptions, PccLimits};
use crate::profiles::{self, HORIZON};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Hourly loads and PV profiles live on the buses.
    pub network: Network,
    /// Indexed by the `mg` field of the PCC buses.
    pub mgs: Vec<MgConfig>,
    /// [$/m³] per hour.
    pub gas_price: Vec<f64>,
    pub admm: AdmmConfig,
    pub opf: OpfOptions,
    /// Symmetric clip on the tie-line window [kW].
    pub pcc_cap_kw: f64,
    /// Reactive tie-line limit as a fraction of the larger active bound.
    pub pcc_q_ratio: f64,
}

impl Scenario {
    pub fn horizon(&self) -> usize {
        self.network.horizon
    }

    pub fn validate(&self) -> Vec<String> {
        let mut v = self.network.validate();
        let t = self.horizon();
        if self.gas_price.len() != t {
            v.push(format!("gas_price: expected {t} entries, got {}", self.gas_price.len()));
        }
        if self.gas_price.iter().any(|&g| !(g > 0.0)) {
            v.push("gas_price: every entry must be > 0".into());
        }
        let pcc = self.network.mg_buses();
        if pcc.len() != self.mgs.len() {
            v.push(format!("{} microgrid PCC buses but {} microgrid configs", pcc.len(), self.mgs.len()));
        }
        for &b in &pcc {
            match self.network.buses[b].mg {
                Some(w) if w < self.mgs.len() => {}
                other => v.push(format!("bus {}: microgrid reference {other:?} out of range", self.network.buses[b].id)),
            }
        }
        for (w, mg) in self.mgs.iter().enumerate() {
            if mg.horizon() != t {
                v.push(format!("mg {w}: profiles must have {t} entries"));
            }
            v.extend(mg.validate().into_iter().map(|e| format!("mg {w}: {e}")));
        }
        if let Err(e) = self.admm.validate() {
            v.push(format!("{e}"));
        }
        if !(self.pcc_cap_kw > 0.0 && self.pcc_q_ratio >= 0.0) {
            v.push("pcc_cap_kw must be > 0 and pcc_q_ratio >= 0".into());
        }
        v
    }

    pub fn validated(self) -> Result<Self> {
        let v = self.validate();
        if v.is_empty() { Ok(self) } else { Err(Error::InvalidNetwork(v)) }
    }

    /// Tie-line limits of every microgrid at hour index `t`.
    pub fn pcc_limits(&self, t: usize) -> Vec<PccLimits> {
        self.mgs
            .iter()
            .map(|mg| dispatch::pcc_window(mg, t, self.pcc_cap_kw, self.pcc_q_ratio))
            .collect()
    }

    /// The scenario with every microgrid detached: PCC buses become plain
    /// load buses.
    pub fn without_microgrids(&self) -> Scenario {
        let mut s = self.clone();
        for b in &mut s.network.buses {
            if b.kind == crate::BusKind::MgPcc {
                b.kind = crate::BusKind::Pq;
                b.mg = None;
            }
        }
        s.mgs.clear();
        s
    }
}

/// Distribution load multiplier applied on top of the daily shape in the
/// bundled case. Near the evening peak the nominal feeder has no operating
/// point inside the ±0.05 p.u. band even with every DER at its limit.
pub const BUNDLED_LOAD_SCALE: f64 = 0.6;

fn mt() -> Microturbine {
    Microturbine {
        p_min: 10.0,
        p_max: 300.0,
        ramp_up: 120.0,
        ramp_down: 180.0,
        p_init: 10.0,
        k_op: 0.0126,
        eta: 0.3,
        l_g: 9.7,
    }
}

fn de() -> Diesel {
    Diesel {
        p_min: 5.0,
        p_max: 300.0,
        ramp_up: 160.0,
        ramp_down: 180.0,
        p_init: 10.0,
        k_op: 0.0063,
        k_fu: 1.0,
        alpha: 2.6667,
        beta: 0.1637,
        gamma: 0.00015,
        p_norm: 300.0,
    }
}

fn bess(capacity: f64, p_max: f64) -> Battery {
    Battery {
        capacity,
        p_max,
        eta_ch: 0.92,
        eta_dis: 0.92,
        soc_min: 0.2,
        soc_max: 0.9,
        soc0: 0.5,
        zeta: 0.123,
    }
}

/// Bundled microgrid `w` (0-based): load peak, PV and wind ratings [kW].
const MG_SIZES: [(f64, f64, f64, f64, f64); 3] = [
    // load peak, pv, wind, bess kWh, bess kW
    (180.0, 80.0, 0.0, 500.0, 100.0),
    (240.0, 100.0, 60.0, 800.0, 120.0),
    (200.0, 0.0, 120.0, 800.0, 120.0),
];

pub fn bundled_mg(w: usize) -> MgConfig {
    let (load, pv, wind, e, p) = MG_SIZES[w % MG_SIZES.len()];
    MgConfig {
        mt: mt(),
        de: de(),
        bess: bess(e, p),
        load: (1..=HORIZON).map(|t| load * profiles::dn_load_shape(t)).collect(),
        pv: (1..=HORIZON).map(|t| pv * profiles::pv_shape(t)).collect(),
        wind: (1..=HORIZON).map(|t| wind * profiles::wind_shape(t)).collect(),
    }
}

/// The 33-bus feeder over 24 hours with three microgrids and four PV units.
pub fn bundled() -> Scenario {
    bundled_scaled(BUNDLED_LOAD_SCALE)
}

/// [`bundled`] with the distribution peak load at `scale` times nominal.
pub fn bundled_scaled(scale: f64) -> Scenario {
    let mut network = profiles::ieee33_case();
    for b in &mut network.buses {
        for t in 0..HORIZON {
            let s = scale * profiles::dn_load_shape(t + 1);
            b.load_p[t] *= s;
            b.load_q[t] *= s;
        }
    }
    Scenario {
        network,
        mgs: (0..3).map(bundled_mg).collect(),
        gas_price: (1..=HORIZON).map(profiles::gas_price).collect(),
        admm: AdmmConfig::default(),
        opf: OpfOptions::default(),
        pcc_cap_kw: 500.0,
        pcc_q_ratio: 0.4,
    }
}

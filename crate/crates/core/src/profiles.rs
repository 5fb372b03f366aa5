//! The bundled 33-bus feeder and the synthetic daily curves that go with it.

use alloc::vec::Vec;

use crate::network::{Branch, Bus, BusKind, Network, PvUnit};

pub const HORIZON: usize = 24;

/// Baran-Wu 33-bus feeder: (from, to, R [ohm], X [ohm], P_to [kW], Q_to [kvar]).
/// Each row carries the load of its receiving bus.
pub const BARAN_WU_33: [(usize, usize, f64, f64, f64, f64); 32] = [
    (1, 2, 0.0922, 0.0470, 100.0, 60.0),
    (2, 3, 0.4930, 0.2511, 90.0, 40.0),
    (3, 4, 0.3660, 0.1864, 120.0, 80.0),
    (4, 5, 0.3811, 0.1941, 60.0, 30.0),
    (5, 6, 0.8190, 0.7070, 60.0, 20.0),
    (6, 7, 0.1872, 0.6188, 200.0, 100.0),
    (7, 8, 0.7114, 0.2351, 200.0, 100.0),
    (8, 9, 1.0300, 0.7400, 60.0, 20.0),
    (9, 10, 1.0440, 0.7400, 60.0, 20.0),
    (10, 11, 0.1966, 0.0650, 45.0, 30.0),
    (11, 12, 0.3744, 0.1238, 60.0, 35.0),
    (12, 13, 1.4680, 1.1550, 60.0, 35.0),
    (13, 14, 0.5416, 0.7129, 120.0, 80.0),
    (14, 15, 0.5910, 0.5260, 60.0, 10.0),
    (15, 16, 0.7463, 0.5450, 60.0, 20.0),
    (16, 17, 1.2890, 1.7210, 60.0, 20.0),
    (17, 18, 0.7320, 0.5740, 90.0, 40.0),
    (2, 19, 0.1640, 0.1565, 90.0, 40.0),
    (19, 20, 1.5042, 1.3554, 90.0, 40.0),
    (20, 21, 0.4095, 0.4784, 90.0, 40.0),
    (21, 22, 0.7089, 0.9373, 90.0, 40.0),
    (3, 23, 0.4512, 0.3083, 90.0, 50.0),
    (23, 24, 0.8980, 0.7091, 420.0, 200.0),
    (24, 25, 0.8960, 0.7011, 420.0, 200.0),
    (6, 26, 0.2030, 0.1034, 60.0, 25.0),
    (26, 27, 0.2842, 0.1447, 60.0, 25.0),
    (27, 28, 1.0590, 0.9337, 60.0, 20.0),
    (28, 29, 0.8042, 0.7006, 120.0, 70.0),
    (29, 30, 0.5075, 0.2585, 200.0, 600.0),
    (30, 31, 0.9744, 0.9630, 150.0, 70.0),
    (31, 32, 0.3105, 0.3619, 210.0, 100.0),
    (32, 33, 0.3410, 0.5302, 60.0, 40.0),
];

pub const BASE_KV_33: f64 = 12.66;
pub const BASE_MVA_33: f64 = 10.0;

/// DER placement on the 33-bus feeder.
#[derive(Debug, Clone, PartialEq)]
pub struct Ieee33Options {
    /// (bus id, inverter rating [kVA]).
    pub pv: Vec<(usize, f64)>,
    pub mg_buses: Vec<usize>,
}

impl Default for Ieee33Options {
    fn default() -> Self {
        Ieee33Options {
            pv: alloc::vec![(7, 500.0), (14, 700.0), (24, 600.0), (30, 800.0)],
            mg_buses: alloc::vec![12, 22, 29],
        }
    }
}

/// The 33-bus feeder at nominal load in every hour, with the default PV and
/// microgrid attachments. PV units follow [`pv_shape`].
pub fn ieee33_case() -> Network {
    ieee33_case_with(&Ieee33Options::default())
}

pub fn ieee33_case_with(opts: &Ieee33Options) -> Network {
    let mut buses: Vec<Bus> = (1..=33)
        .map(|id| {
            let kind = if id == 1 { BusKind::Slack } else { BusKind::Pq };
            Bus::new(id, kind, HORIZON)
        })
        .collect();
    let zb = BASE_KV_33 * BASE_KV_33 / BASE_MVA_33;
    let mut branches = Vec::with_capacity(32);
    for &(from, to, r, x, p, q) in BARAN_WU_33.iter() {
        branches.push(Branch {
            from,
            to,
            r: r / zb,
            x: x / zb,
        });
        let bus = &mut buses[to - 1];
        bus.load_p = alloc::vec![p; HORIZON];
        bus.load_q = alloc::vec![q; HORIZON];
    }
    for &(id, kva) in &opts.pv {
        buses[id - 1].pv = Some(PvUnit {
            capacity_kva: kva,
            p_mppt: (1..=HORIZON).map(|t| kva * pv_shape(t)).collect(),
        });
    }
    for (w, &id) in opts.mg_buses.iter().enumerate() {
        buses[id - 1].kind = BusKind::MgPcc;
        buses[id - 1].mg = Some(w);
    }
    Network {
        buses,
        branches,
        v_ref: 1.0,
        base_mva: BASE_MVA_33,
        base_kv: BASE_KV_33,
        eps_v: 0.05,
        horizon: HORIZON,
    }
}

/// Clear-sky PV output as a fraction of rating for hour label `t` in 1..=24:
/// zero up to 6h and from 19h, full output over 12h-13h, sine ramps between.
pub fn pv_shape(t: usize) -> f64 {
    use core::f64::consts::FRAC_PI_2;
    let t = t as f64;
    if t <= 6.0 || t >= 19.0 {
        0.0
    } else if t < 12.0 {
        (FRAC_PI_2 * (t - 6.0) / 6.0).sin()
    } else if t <= 13.0 {
        1.0
    } else {
        (FRAC_PI_2 * (19.0 - t) / 6.0).sin()
    }
}

/// Distribution load relative to its daily peak, hours 1..=24. Peaks at 11h
/// and 20h, valley of one half at 3h.
pub const DN_LOAD_SHAPE: [f64; HORIZON] = [
    0.56, 0.52, 0.50, 0.52, 0.56, 0.63, 0.72, 0.81, 0.89, 0.95, 0.97, 0.93, //
    0.87, 0.83, 0.82, 0.84, 0.88, 0.93, 0.98, 1.00, 0.95, 0.84, 0.72, 0.62,
];

pub fn dn_load_shape(t: usize) -> f64 {
    DN_LOAD_SHAPE[t - 1]
}

/// Wind output as a fraction of rating: stronger overnight, weakest mid-afternoon.
pub fn wind_shape(t: usize) -> f64 {
    use core::f64::consts::PI;
    0.55 + 0.35 * (2.0 * PI * (t as f64 - 3.0) / 24.0).cos()
}

/// Gas price per hour label 1..=24 [$/m3].
pub fn gas_price(t: usize) -> f64 {
    match t {
        8..=11 | 16..=18 => 0.406,
        6..=7 | 12..=15 | 19..=21 => 0.375,
        _ => 0.328,
    }
}

#![allow(dead_code)]

use std::ops::Range;

use zonalopt_core::Scenario;

/// `sc` restricted to the hours in `range`; every hourly array is sliced.
pub fn window(sc: &Scenario, range: Range<usize>) -> Scenario {
    let mut s = sc.clone();
    let cut = |v: &mut Vec<f64>| *v = v[range.clone()].to_vec();
    s.network.horizon = range.len();
    for b in &mut s.network.buses {
        cut(&mut b.load_p);
        cut(&mut b.load_q);
        if let Some(pv) = &mut b.pv {
            cut(&mut pv.p_mppt);
        }
    }
    for m in &mut s.mgs {
        cut(&mut m.load);
        cut(&mut m.pv);
        cut(&mut m.wind);
    }
    cut(&mut s.gas_price);
    s
}

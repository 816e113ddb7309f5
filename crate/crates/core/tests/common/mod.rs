#![allow(dead_code)]

use rand::{Rng, RngExt};
use wdsflow_core::{Network, NetworkBuilder};

/// Connected pipe network: a random tree on `n` nodes plus `extra` chords,
/// no parallel edges. Node ids are "1".."n", reference "1".
pub fn random_network(rng: &mut impl Rng, n: usize, extra: usize, c: (f64, f64)) -> Network {
    let mut b = NetworkBuilder::new().junctions((1..=n).map(|i| i.to_string()));
    let mut pairs = std::collections::BTreeSet::new();
    let mut k = 0;
    for v in 1..n {
        let u = rng.random_range(0..v);
        pairs.insert((u, v));
        let (t, h) = if rng.random_bool(0.5) { (u, v) } else { (v, u) };
        b = b.pipe(
            format!("p{k}"),
            (t + 1).to_string(),
            (h + 1).to_string(),
            rng.random_range(c.0..c.1),
        );
        k += 1;
    }
    let extra = extra.min(n * (n - 1) / 2 - (n - 1));
    let mut added = 0;
    while added < extra {
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        let key = (u.min(v), u.max(v));
        if u == v || !pairs.insert(key) {
            continue;
        }
        b = b.pipe(
            format!("p{k}"),
            (u + 1).to_string(),
            (v + 1).to_string(),
            rng.random_range(c.0..c.1),
        );
        k += 1;
        added += 1;
    }
    b.build("1").unwrap()
}

/// Balanced injections of magnitude up to `scale`.
pub fn random_demands(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    let s: f64 = d.iter().sum();
    d[0] -= s;
    d
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `‖a − b‖∞ / max(‖b‖∞, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let d = a
        .iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    d / max_abs(b).max(floor)
}

#![allow(dead_code)]

use lipdream::{ActionKind, ActionVector, StateVector};
use proptest::prelude::*;
use rand::Rng;

pub fn sv(c: &[f64]) -> StateVector {
    StateVector::new(c.to_vec()).unwrap()
}

pub fn simplex(c: &[f64]) -> ActionVector {
    ActionVector::new(c.to_vec(), ActionKind::L1Simplex100).unwrap()
}

/// Nonzero vector with coordinates in `[-scale, scale]`.
pub fn random_state<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> StateVector {
    loop {
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-scale..=scale)).collect();
        if let Ok(s) = StateVector::new(c) {
            return s;
        }
    }
}

pub fn coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, dim).prop_filter("nonzero", |v| v.iter().any(|&x| x.abs() > 1e-6))
}

pub fn state(dim: usize) -> impl Strategy<Value = StateVector> {
    coords(dim).prop_map(|c| StateVector::new(c).unwrap())
}

/// Brute-force `max |v_i − v_j| / d(p_i, p_j)` over distinct pairs.
pub fn oracle_k(points: &[Vec<f64>], values: &[f64], eps: f64) -> f64 {
    let mut k = 0.0f64;
    for i in 0..points.len() {
        for j in 0..i {
            let d = oracle_distance(&points[i], &points[j], eps);
            if d > 0.0 {
                k = k.max((values[i] - values[j]).abs() / d);
            }
        }
    }
    k
}

/// `arccos(cos)/π + ε·‖a − b‖₂`, written out directly.
pub fn oracle_distance(a: &[f64], b: &[f64], eps: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let theta = (dot / (na * nb)).clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
    let e = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    theta + eps * e
}

/// One step of the currency backtest, recomputed from scratch.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleStep {
    pub day: usize,
    pub action: usize,
    pub predicted: f64,
    pub realized: f64,
}

/// Daily extension backtest written as plain nested loops: for each day, all
/// (state, action) pairs of the earlier days, their constant, and the
/// McShane value of every candidate action.
pub fn brute_force_currency(
    bars: &[lipdream::scenarios::OhlcvBar],
    actions: &lipdream::ActionSet,
    eps: f64,
) -> Vec<OracleStep> {
    use lipdream::metric::eps_distance;
    let cfg = lipdream::MetricConfig::new(eps).unwrap();
    let mean_vol = bars.iter().map(|b| b.volume).sum::<f64>() / bars.len() as f64;
    let mut states: Vec<(usize, Vec<f64>)> = Vec::new();
    for k in 1..bars.len() {
        let s = vec![
            bars[k - 1].open - bars[k - 1].close,
            bars[k].open * 1e-2,
            bars[k - 1].volume * 1e-8,
        ];
        if s.iter().any(|&x| x != 0.0) {
            states.push((k, s));
        }
    }
    let result = |k: usize| {
        let b = &bars[k];
        vec![
            b.open - b.close,
            ((b.high - b.open.max(b.close)) - (b.low - b.open.min(b.close))) * 1e-2,
            (b.volume - mean_vol) * 1e-8,
        ]
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let acts: Vec<&[f64]> = actions.iter().map(|a| a.coords()).collect();

    let mut out = Vec::new();
    for j in 1..states.len() {
        let (day, s_now) = &states[j];
        // Samples in insertion order: day by day, action by action.
        let mut samples: Vec<(&[f64], &[f64], f64)> = Vec::new();
        for (d, s) in &states[..j] {
            let r = result(*d);
            for a in &acts {
                samples.push((s, a, dot(&r, a)));
            }
        }
        let mut k = 0.0f64;
        for p in 0..samples.len() {
            for q in 0..p {
                let d = eps_distance(samples[p].0, samples[q].0, &cfg).unwrap()
                    + eps_distance(samples[p].1, samples[q].1, &cfg).unwrap();
                k = k.max((samples[p].2 - samples[q].2).abs() / d);
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (bi, b) in acts.iter().enumerate() {
            let mut value = f64::NEG_INFINITY;
            for (s, a, v) in &samples {
                let d = eps_distance(s_now, s, &cfg).unwrap() + eps_distance(b, a, &cfg).unwrap();
                let kd = if k == 0.0 { 0.0 } else { k * d };
                value = value.max(v - kd);
            }
            if best.map_or(true, |(_, v)| value > v) {
                best = Some((bi, value));
            }
        }
        let (action, predicted) = best.unwrap();
        out.push(OracleStep {
            day: *day,
            action,
            predicted,
            realized: dot(&result(*day), acts[action]),
        });
    }
    out
}

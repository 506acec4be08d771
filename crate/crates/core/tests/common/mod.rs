#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use segmarket::market::{Prior, Segmentation};
use segmarket::meeting::MeetingFunction;

pub fn ces1() -> MeetingFunction {
    MeetingFunction::ces(1.0, 1.0, 1.0).unwrap()
}

pub fn urn() -> MeetingFunction {
    MeetingFunction::urn_ball(1.0, 1.0).unwrap()
}

/// Random stochastic kernel with up to `max_s` submarkets; some rows are deterministic.
pub fn random_segmentation(rng: &mut ChaCha8Rng, prior: &Prior, max_s: usize) -> Segmentation {
    let s = rng.gen_range(1..=max_s);
    let kernel: Vec<Vec<f64>> = (0..prior.len())
        .map(|_| {
            if rng.gen_bool(0.4) {
                let mut row = vec![0.0; s];
                row[rng.gen_range(0..s)] = 1.0;
                row
            } else {
                let raw: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() + 1e-3).collect();
                let t: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / t).collect()
            }
        })
        .collect();
    Segmentation::from_kernel(prior, &kernel).unwrap()
}

pub fn random_prior(rng: &mut ChaCha8Rng, max_n: usize) -> Prior {
    let n = rng.gen_range(1..=max_n);
    let mut grid: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    let raw: Vec<f64> = grid.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
    let t: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|x| x / t).collect();
    let head: f64 = w[..w.len() - 1].iter().sum();
    let last = w.len() - 1;
    w[last] = 1.0 - head;
    Prior::new(grid, w).unwrap()
}

pub fn random_mf(rng: &mut ChaCha8Rng) -> MeetingFunction {
    let a = rng.gen_range(0.3..=1.0);
    let b = rng.gen_range(0.3..=1.0);
    if rng.gen_bool(0.5) {
        MeetingFunction::ces(a, b, rng.gen_range(0.3..4.0)).unwrap()
    } else {
        MeetingFunction::urn_ball(a, b).unwrap()
    }
}

/// Root of (2/3)(1 − η^{3/2})/√η − (1 − η) = 1: the first-best multiplier for
/// uniform types on [0, 1] with m(t) = t/(1 + t).
pub fn continuum_eta() -> f64 {
    let h = |e: f64| (2.0 / 3.0) * (1.0 - e.powf(1.5)) / e.sqrt() - (1.0 - e) - 1.0;
    let (mut lo, mut hi) = (1e-6, 1.0 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

//! Shared oracles for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regcalc::{CadlagPath, Interpolation};

const GL: [(f64, f64); 3] = [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];

/// Which limit of the output path at t to reproduce.
#[derive(Clone, Copy)]
pub enum Side {
    Right,
    Left,
}

fn at_truncated(p: &CadlagPath, s: f64, t: f64, side: Side) -> f64 {
    if s < t {
        p.value_at(s)
    } else {
        match side {
            Side::Right => p.value_at(t),
            Side::Left => p.left_limit(t).unwrap_or(p.value_at(t)),
        }
    }
}

/// Integrates `h(s)` over ]0, t] by cutting at every grid point and every
/// grid point shifted back by ε, then applying 3-point Gauss–Legendre on
/// each piece. Each output value is a fresh O(n) integral, so the whole
/// path costs O(n²).
fn brute_integral(grid: &[f64], t: f64, eps: f64, h: impl Fn(f64) -> f64) -> f64 {
    let mut cuts: Vec<f64> = grid.iter().copied().filter(|&g| g <= t).collect();
    cuts.extend(grid.iter().map(|g| g - eps).filter(|&g| g > 0.0 && g < t));
    if t - eps > 0.0 {
        cuts.push(t - eps);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        for (z, wt) in GL {
            total += wt * r * h(c + r * z);
        }
    }
    total
}

pub fn brute_forward(y: &CadlagPath, x: &CadlagPath, eps: f64, side: Side) -> Vec<f64> {
    x.grid()
        .iter()
        .map(|&t| brute_integral(x.grid(), t, eps, |s| y.value_at(s) * (at_truncated(x, s + eps, t, side) - x.value_at(s)) / eps))
        .collect()
}

pub fn brute_covariation(x: &CadlagPath, y: &CadlagPath, eps: f64, side: Side) -> Vec<f64> {
    x.grid()
        .iter()
        .map(|&t| {
            brute_integral(x.grid(), t, eps, |s| {
                (at_truncated(x, s + eps, t, side) - x.value_at(s)) * (at_truncated(y, s + eps, t, side) - y.value_at(s)) / eps
            })
        })
        .collect()
}

/// Random path on a random grid over [0, 1] with random jumps.
pub fn random_path(rng: &mut ChaCha8Rng, n: usize, grid: Option<Vec<f64>>) -> CadlagPath {
    let grid = grid.unwrap_or_else(|| {
        let mut g: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.0..1.0)).collect();
        g.push(0.0);
        g.push(1.0);
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    });
    let len = grid.len();
    let pc = rng.random_bool(0.3);
    let mut values = Vec::with_capacity(len);
    let mut jumps = Vec::new();
    let mut v: f64 = rng.random_range(-2.0..2.0);
    for i in 0..len {
        if i > 0 && rng.random_bool(0.05) {
            let left = v;
            v += rng.random_range(-1.5..1.5);
            jumps.push((i, left));
        } else if !pc {
            v += rng.random_range(-0.1..0.1);
        }
        values.push(v);
    }
    let rule = if pc { Interpolation::PiecewiseConstant } else { Interpolation::Linear };
    CadlagPath::with_rule(grid, values, &jumps, rule).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// max_i |a_i − b_i| / max(1e-300, max_i |b_i|).
pub fn rel_sup_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

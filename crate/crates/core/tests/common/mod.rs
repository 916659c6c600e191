//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls the crate's evaluation engine: the MLP is re-read from
//! the flat parameter vector with explicit loops, and directional derivatives
//! are propagated in forward mode one scalar at a time.

#![allow(dead_code)]

use gradmatch::data::Trajectory;
use gradmatch::{Activation, ParamLayout, ParamVector};
use rand::Rng;

pub const SLOPE: f64 = 0.01;

fn act(a: Activation, z: f64) -> (f64, f64) {
    match a {
        Activation::Identity => (z, 1.0),
        Activation::LeakyRelu if z >= 0.0 => (z, 1.0),
        Activation::LeakyRelu => (SLOPE * z, SLOPE),
    }
}

/// Widths `[d, h_1, …, h_k, 1]` of a layout.
pub fn widths(layout: &ParamLayout) -> Vec<usize> {
    let mut w = vec![layout.input_dim()];
    w.extend(layout.hidden_widths());
    w.push(1);
    w
}

/// `(g(x), D_v g(x))` with weights stored row-major per layer, biases after.
pub fn naive_eval(params: &ParamVector, x: &[f64], v: &[f64]) -> (f64, f64) {
    let layout = params.layout();
    let w = widths(layout);
    let p = params.values();
    let mut a = x.to_vec();
    let mut t = v.to_vec();
    let mut off = 0;
    for l in 0..w.len() - 1 {
        let (fin, fout) = (w[l], w[l + 1]);
        let last = l == w.len() - 2;
        let mut na = vec![0.0; fout];
        let mut nt = vec![0.0; fout];
        for o in 0..fout {
            let mut z = p[off + fin * fout + o];
            let mut zt = 0.0;
            for i in 0..fin {
                z += p[off + o * fin + i] * a[i];
                zt += p[off + o * fin + i] * t[i];
            }
            if last {
                na[o] = z;
                nt[o] = zt;
            } else {
                let (y, s) = act(layout.activation(), z);
                na[o] = y;
                nt[o] = s * zt;
            }
        }
        off += fin * fout + fout;
        a = na;
        t = nt;
    }
    assert_eq!(off, p.len());
    (a[0], t[0])
}

pub fn naive_value(params: &ParamVector, x: &[f64]) -> f64 {
    naive_eval(params, x, &vec![0.0; x.len()]).0
}

pub fn naive_directional(params: &ParamVector, x: &[f64], v: &[f64]) -> f64 {
    naive_eval(params, x, v).1
}

/// Trapezoid rule written as an explicit node loop.
pub fn naive_segment(params: &ParamVector, x: &[f64], y: &[f64], kappa: usize) -> f64 {
    let dx: Vec<f64> = y.iter().zip(x).map(|(b, a)| b - a).collect();
    let node = |u: usize| {
        let t = u as f64 / kappa as f64;
        let h: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect();
        naive_directional(params, &h, &dx)
    };
    let mut s = 0.0;
    for u in 1..=kappa {
        s += node(u - 1) + node(u);
    }
    s / (2.0 * kappa as f64)
}

pub fn naive_grad_loss(params: &ParamVector, t: &Trajectory, kappa: usize) -> f64 {
    (0..t.len() - 1)
        .map(|i| {
            let r = t.values[i + 1] - t.values[i] - naive_segment(params, &t.points[i], &t.points[i + 1], kappa);
            r * r
        })
        .sum()
}

pub fn naive_reg_loss(params: &ParamVector, t: &Trajectory) -> f64 {
    t.points
        .iter()
        .zip(&t.values)
        .map(|(x, z)| (z - naive_value(params, x)).powi(2))
        .sum()
}

/// Central difference per coordinate with step `h`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|j| {
            p[j] = x[j] + h;
            let up = f(&p);
            p[j] = x[j] - h;
            let dn = f(&p);
            p[j] = x[j];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖b‖, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(floor)
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// A random architecture with up to 3 hidden layers of width up to 32, and
/// input dimension up to 8.
pub fn random_params<R: Rng>(rng: &mut R) -> ParamVector {
    let d = rng.random_range(1..=8);
    let depth = rng.random_range(0..=3);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=32)).collect();
    let layout = ParamLayout::new(d, &hidden, Activation::LeakyRelu).unwrap();
    let n = layout.len();
    ParamVector::new(layout, random_vec(rng, n, 0.8)).unwrap()
}

pub fn random_trajectory<R: Rng>(rng: &mut R, d: usize, m: usize) -> Trajectory {
    let points: Vec<Vec<f64>> = (0..m).map(|_| random_vec(rng, d, 1.5)).collect();
    let mut values: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    values.sort_by(f64::total_cmp);
    Trajectory {
        indices: (0..m).collect(),
        points,
        values,
    }
}

//! Independent oracles shared by the integration tests.
//!
//! Nothing here goes through the library's integrators: propagation is a
//! plain Taylor series of the structurally applied map, and derivatives are
//! central differences with one Richardson extrapolation.

#![allow(dead_code)]

use qbe::linalg::{self, c, CMatrix, C64};
use qbe::superop::Superoperator;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Σ_k (t G)^k y / k!` until the terms drop below `1e-18` of the sum.
pub fn taylor_step<G: Superoperator + ?Sized>(g: &G, y: &CMatrix, t: f64) -> CMatrix {
    let mut sum = y.clone();
    let mut term = y.clone();
    for k in 1..200 {
        term = g.apply(&term) * c(t / k as f64);
        sum += &term;
        if linalg::frobenius_norm(&term) <= 1e-18 * linalg::frobenius_norm(&sum) {
            break;
        }
    }
    sum
}

/// `e^{tG} y` by `steps` Taylor steps.
pub fn taylor_propagate<G: Superoperator + ?Sized>(
    g: &G,
    y: &CMatrix,
    t: f64,
    steps: usize,
) -> CMatrix {
    let h = t / steps as f64;
    (0..steps).fold(y.clone(), |acc, _| taylor_step(g, &acc, h))
}

/// Central difference of `f` at 0 with one Richardson step:
/// `(4 D(h/2) - D(h)) / 3`.
pub fn richardson<F: Fn(f64) -> f64>(f: F, h: f64) -> f64 {
    let d = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Rough size of `G`, the largest `‖G X‖_F / ‖X‖_F` over a few probes.
pub fn norm_estimate<G: Superoperator + ?Sized>(g: &G, seed: u64) -> f64 {
    let d = g.dim();
    (0..4)
        .map(|k| {
            let x = random_matrix(d, seed + k);
            linalg::frobenius_norm(&g.apply(&x)) / linalg::frobenius_norm(&x)
        })
        .fold(0.0, f64::max)
}

/// Finite-difference purity rate `d Tr ρ²/dt` at `t = 0`.
pub fn fd_purity_rate<G: Superoperator + ?Sized>(g: &G, rho: &CMatrix) -> f64 {
    let h = 2e-3 / norm_estimate(g, 11).max(1e-12);
    richardson(
        |t| {
            let r = taylor_step(g, rho, t);
            (r.dot(&r)).diag().iter().map(|z| z.re).sum()
        },
        h,
    )
}

/// Finite-difference trace rate `d Re Tr σ/dt` at `t = 0`.
pub fn fd_trace_rate<G: Superoperator + ?Sized>(g: &G, sigma: &CMatrix) -> f64 {
    let h = 2e-3 / norm_estimate(g, 13).max(1e-12);
    richardson(|t| linalg::trace(&taylor_step(g, sigma, t)).re, h)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(d: usize, seed: u64) -> CMatrix {
    let mut r = rng(seed);
    CMatrix::from_shape_fn((d, d), |_| {
        C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
    })
}

pub fn random_hermitian(d: usize, seed: u64) -> CMatrix {
    linalg::hermitize(&random_matrix(d, seed))
}

/// Random density matrix `A A† / Tr`.
pub fn random_density(d: usize, seed: u64) -> CMatrix {
    let a = random_matrix(d, seed);
    let m = a.dot(&linalg::dagger(&a));
    let tr = linalg::trace(&m).re;
    m.mapv(|z| z / tr)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Largest distance between two eigenvalue multisets, matched greedily.
pub fn spectrum_distance(a: &[C64], b: &[C64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .fold((usize::MAX, f64::INFINITY), |acc, e| {
                if e.1 < acc.1 {
                    e
                } else {
                    acc
                }
            });
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

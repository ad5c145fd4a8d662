//! Self-check battery: exact identities, independent oracles and the
//! qualitative phase structure, each reduced to a pass/fail line.

use rayon::prelude::*;

use crate::error::Result;
use crate::generator::build_discrete;
use crate::ldp::{rate_function_from, LdpOptions, ScgfSource, SpectralScgf};
use crate::model::{
    effective_potential, mean_count_rate, rate_intersections, stationary, MaserParams,
};
use crate::spectral::{cumulants, lambda_derivative, mgf_exact, spectral_bound, spectral_gap};
use crate::trajectories::{ensemble, Initial};

const NU: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(id: u32, name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check {
            id,
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            id,
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn sci(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:.4e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn params(nex: f64, alpha: f64) -> Result<MaserParams> {
    MaserParams::from_alpha(nex, alpha, NU)
}

/// Every check, in order. `seed` feeds the Monte Carlo checks.
pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        check(1, "conservation", conservation()),
        check(2, "mean_rate_identity", mean_rate_identity()),
        check(3, "stationary_duality", stationary_duality()),
        check(4, "bistability_window", bistability_window()),
        check(5, "intersection_counts", intersection_counts()),
        check(6, "gap_positive_on_grid", gap_positive_on_grid()),
        check(7, "crossover_sharpening", crossover_sharpening()),
        check(8, "gap_closing", gap_closing()),
        check(9, "mgf_monte_carlo", mgf_monte_carlo(seed)),
        check(10, "discrete_enumeration", discrete_enumeration()),
        check(11, "central_limit", central_limit(seed)),
        check(12, "rate_function_duality", rate_function_duality()),
        check(13, "potential_limit", potential_limit()),
    ]
}

const ALPHAS: [f64; 5] = [0.5, 1.0, 3.0, 6.6, 12.0];
const NEXS: [f64; 3] = [10.0, 50.0, 150.0];

fn parameter_set() -> Vec<(f64, f64)> {
    NEXS.iter()
        .flat_map(|&n| ALPHAS.iter().map(move |&a| (n, a)))
        .collect()
}

pub fn conservation() -> Result<(bool, String)> {
    let worst = parameter_set()
        .par_iter()
        .map(|&(n, a)| Ok(spectral_bound(&params(n, a)?, 0.0, 1e-12)?.lambda_s.abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst <= 1e-10, format!("max |lambda(0)| = {worst:e}")))
}

pub fn mean_rate_identity() -> Result<(bool, String)> {
    let worst = parameter_set()
        .par_iter()
        .map(|&(n, a)| {
            let p = params(n, a)?;
            let ss = stationary(&p, 1e-14)?;
            let rate = mean_count_rate(&p, &ss)?;
            let slope = lambda_derivative(&p, 0.0)?;
            let vals = [slope, rate.from_counts, rate.from_mean];
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            Ok((hi - lo) / hi.abs().max(f64::MIN_POSITIVE))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst <= 1e-8, format!("max relative spread = {worst:e}")))
}

pub fn stationary_duality() -> Result<(bool, String)> {
    let p = params(150.0, 6.6)?;
    let ss = stationary(&p, 1e-14)?;
    let r = spectral_bound(&p, 0.0, 1e-12)?;
    let n = ss.dim.min(r.dim_used);
    let worst = (0..n)
        .filter(|&k| ss.probs[k] > 1e-300)
        .map(|k| (r.right_vec[k] - ss.probs[k]).abs())
        .fold(0.0, f64::max);
    Ok((
        worst <= 1e-8,
        format!("max entry difference = {worst:e} over {n} levels"),
    ))
}

pub fn bistability_window() -> Result<(bool, String)> {
    let peaks =
        |a| -> Result<usize> { Ok(stationary(&params(150.0, a)?, 1e-14)?.local_maxima().len()) };
    let (at66, at3) = (peaks(6.6)?, peaks(3.0)?);
    Ok((
        at66 == 2 && at3 == 1,
        format!("maxima: {at66} at alpha=6.6, {at3} at alpha=3"),
    ))
}

pub fn intersection_counts() -> Result<(bool, String)> {
    let n = |a: f64| rate_intersections(a, NU).len();
    let counts = [n(0.5), n(3.0), n(6.66)];
    let brackets = n(4.5) < n(4.7) && n(7.7) < n(7.9);
    Ok((
        counts == [0, 1, 3] && brackets,
        format!(
            "roots {counts:?}; 4.5/4.7: {}/{}; 7.7/7.9: {}/{}",
            n(4.5),
            n(4.7),
            n(7.7),
            n(7.9)
        ),
    ))
}

pub fn gap_positive_on_grid() -> Result<(bool, String)> {
    let grid: Vec<(f64, f64)> = (0..41)
        .flat_map(|i| {
            (0..41).map(move |j| (0.5 + 7.5 * i as f64 / 40.0, -1.0 + 2.0 * j as f64 / 40.0))
        })
        .collect();
    let results = grid
        .par_iter()
        .map(|&(a, s)| {
            let r = spectral_bound(&params(50.0, a)?, s, 1e-12)?;
            Ok((r.gap, r.converged))
        })
        .collect::<Result<Vec<_>>>()?;
    let min_gap = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let all_converged = results.iter().all(|r| r.1);
    Ok((
        min_gap > 0.0 && all_converged,
        format!("min gap = {min_gap:e}; all converged: {all_converged}"),
    ))
}

/// Largest `λ''(s)` over `|s| <= window`, by repeatedly zooming a grid of
/// `λ'` around its steepest cell until the peak slope settles.
pub fn peak_curvature(p: &MaserParams, window: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-window, window);
    let mut prev = 0.0;
    for _ in 0..60 {
        let n = 40;
        let xs: Vec<f64> = (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .collect();
        let ys = xs
            .par_iter()
            .map(|&s| lambda_derivative(p, s))
            .collect::<Result<Vec<f64>>>()?;
        let (slope, at) = (0..n)
            .map(|i| {
                (
                    (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]),
                    0.5 * (xs[i] + xs[i + 1]),
                )
            })
            .fold(
                (f64::NEG_INFINITY, 0.0),
                |b, c| if c.0 > b.0 { c } else { b },
            );
        if (slope - prev).abs() <= 1e-3 * slope.abs() {
            return Ok(slope);
        }
        prev = slope;
        let w = (hi - lo) / 8.0;
        lo = (at - w).max(-window);
        hi = (at + w).min(window);
    }
    Ok(prev)
}

pub fn crossover_sharpening() -> Result<(bool, String)> {
    let peaks = [50.0, 75.0, 100.0]
        .iter()
        .map(|&n| peak_curvature(&params(n, 6.6)?, 0.04))
        .collect::<Result<Vec<f64>>>()?;
    Ok((
        peaks.windows(2).all(|w| w[1] > w[0]),
        format!("peak lambda'' for nex 50/75/100: {}", sci(&peaks)),
    ))
}

pub fn gap_closing() -> Result<(bool, String)> {
    let g66 = spectral_gap(&params(150.0, 6.6)?, 0.0)?;
    let g3 = spectral_gap(&params(150.0, 3.0)?, 0.0)?;
    Ok((
        100.0 * g66 <= g3,
        format!("g(0) = {g66:e} at 6.6, {g3:e} at 3.0"),
    ))
}

pub fn mgf_monte_carlo(seed: u64) -> Result<(bool, String)> {
    let p = params(10.0, 2.0)?;
    let s_list = [-0.5, 0.5];
    let stats = ensemble(&p, Initial::Level(0), 1.0, 100_000, &s_list, seed)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for est in &stats.mgf_estimates {
        let exact = mgf_exact(&p, est.s, 1.0, 0, 200)?;
        let z = (est.estimate - exact.value) / est.standard_error;
        ok &= z.abs() <= 3.0 && exact.leak < 1e-12;
        detail.push(format!("s={}: z={z:.3}", est.s));
    }
    Ok((ok, detail.join("; ")))
}

pub fn discrete_enumeration() -> Result<(bool, String)> {
    let p = params(3.0, 1.7)?;
    let dim = 5;
    let mut worst: f64 = 0.0;
    for s in [-0.8f64, 0.0, 0.6] {
        let t = build_discrete(&p, s, dim)?;
        for initial in 0..dim {
            let mut expected = 0.0;
            for word in 0..8u32 {
                let (mut level, mut w) = (initial, 1.0);
                for step in 0..3 {
                    let (sn, cs) = (p.phi() * ((level + 1) as f64).sqrt()).sin_cos();
                    if word >> step & 1 == 1 {
                        w *= s.exp() * sn * sn;
                        level += 1;
                    } else {
                        w *= cs * cs;
                    }
                }
                if level < dim {
                    expected += w;
                }
            }
            worst = worst.max((t.mgf(3, initial)? - expected).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max difference = {worst:e}")))
}

pub fn central_limit(seed: u64) -> Result<(bool, String)> {
    let p = params(10.0, 2.0)?;
    let c = cumulants(&p, 2)?;
    let stats = ensemble(&p, Initial::Level(0), 200.0, 10_000, &[], seed)?;
    let (_, var, skew) = stats.standardized_moments(c.m, c.v);
    Ok((
        skew.abs() < 0.1 && (0.95..=1.05).contains(&var),
        format!("skewness = {skew:.4}, variance = {var:.4}"),
    ))
}

/// Smallest second divided difference of `ys` over the nodes `xs`.
fn min_second_divided_difference(xs: &[f64], ys: &[f64]) -> f64 {
    (1..xs.len() - 1)
        .map(|i| {
            let left = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
            let right = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
            2.0 * (right - left) / (xs[i + 1] - xs[i - 1])
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn rate_function_duality() -> Result<(bool, String)> {
    let src = SpectralScgf::new(params(10.0, 2.0)?);
    let m = src.dlambda(0.0)?;
    let (xa, xb) = (src.dlambda(-1.0)?, src.dlambda(1.0)?);
    let half = 25;
    let mut xs: Vec<f64> = (0..half)
        .map(|i| xa + (m - xa) * i as f64 / half as f64)
        .collect();
    xs.extend((0..=half).map(|i| m + (xb - m) * i as f64 / half as f64));
    let t = rate_function_from(&src, &xs, LdpOptions::default())?;
    let mut fy: f64 = 0.0;
    let mut rates = Vec::new();
    for pt in &t.points {
        let (Some(s), Some(i)) = (pt.s_star, pt.rate) else {
            return Ok((false, format!("x = {} unattainable", pt.x)));
        };
        fy = fy.max((s * pt.x - i - src.lambda(s)?).abs());
        rates.push(i);
    }
    let i_at_m = rates[half].abs();
    let convex_i = min_second_divided_difference(&xs, &rates);
    let ss: Vec<f64> = (-20..=20).map(|k| 0.05 * k as f64).collect();
    let lam = ss
        .iter()
        .map(|&s| src.lambda(s))
        .collect::<Result<Vec<f64>>>()?;
    let convex_l = min_second_divided_difference(&ss, &lam);
    Ok((
        fy <= 1e-8 && i_at_m <= 1e-8 && convex_i >= -1e-9 && convex_l >= -1e-9,
        format!(
            "Fenchel-Young {fy:e}; I(m) = {i_at_m:e}; min second divided differences I {convex_i:e}, lambda {convex_l:e}"
        ),
    ))
}

pub fn potential_limit() -> Result<(bool, String)> {
    let xs: Vec<f64> = (0..=60).map(|i| i as f64 / 60.0).collect();
    let mut ok = true;
    let mut detail = Vec::new();
    for alpha in [3.0, 6.66] {
        let errs = [50.0, 100.0, 200.0]
            .iter()
            .map(|&n| {
                let p = params(n, alpha)?;
                let pot = effective_potential(&p, &stationary(&p, 1e-14)?)?;
                let v = crate::model::limit_potential(alpha, NU, &xs)?;
                Ok(xs
                    .iter()
                    .zip(&v)
                    .map(|(&x, &vx)| {
                        pot.rescaled_at(n, x)
                            .map_or(f64::INFINITY, |u| (u - vx).abs())
                    })
                    .fold(0.0, f64::max))
            })
            .collect::<Result<Vec<f64>>>()?;
        ok &= errs.windows(2).all(|w| w[1] < w[0]);
        detail.push(format!("alpha={alpha}: {}", sci(&errs)));
    }
    Ok((ok, detail.join("; ")))
}

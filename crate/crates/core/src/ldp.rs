//! Rate function of the count rate as the Legendre-Fenchel conjugate of the
//! scaled cumulant generating function, and Gaussian fluctuation parameters.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{check_finite, MaserError, Result};
use crate::model::MaserParams;
use crate::spectral::{cumulants, spectral_bound, DEFAULT_REL_TOL};

/// Source of `λ(s)` and `λ'(s)`.
pub trait ScgfSource: Sync {
    fn lambda(&self, s: f64) -> Result<f64>;
    fn dlambda(&self, s: f64) -> Result<f64>;

    /// `λ''(0)`. The default differentiates `λ'` numerically.
    fn variance_rate(&self) -> Result<f64> {
        let h = 1e-4;
        let coarse = (self.dlambda(h)? - self.dlambda(-h)?) / (2.0 * h);
        let fine = (self.dlambda(0.5 * h)? - self.dlambda(-0.5 * h)?) / h;
        Ok((4.0 * fine - coarse) / 3.0)
    }
}

/// Spectral `λ(s)` with a per-`s` cache shared across threads.
#[derive(Debug)]
pub struct SpectralScgf {
    params: MaserParams,
    rel_tol: f64,
    cache: Mutex<HashMap<u64, (f64, f64)>>,
}

impl SpectralScgf {
    pub fn new(params: MaserParams) -> Self {
        Self::with_tolerance(params, DEFAULT_REL_TOL)
    }

    pub fn with_tolerance(params: MaserParams, rel_tol: f64) -> Self {
        Self {
            params,
            rel_tol,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn params(&self) -> &MaserParams {
        &self.params
    }

    /// Number of distinct `s` solved so far.
    pub fn cached(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }

    fn eval(&self, s: f64) -> Result<(f64, f64)> {
        let key = s.to_bits();
        if let Some(v) = self.cache.lock().ok().and_then(|c| c.get(&key).copied()) {
            return Ok(v);
        }
        let r = spectral_bound(&self.params, s, self.rel_tol)?;
        if !r.converged {
            return Err(MaserError::SpectralNotConverged {
                s,
                estimate: r.lambda_s,
                dim: r.dim_used,
            });
        }
        let v = (r.lambda_s, r.dlambda_ds);
        if let Ok(mut c) = self.cache.lock() {
            c.insert(key, v);
        }
        Ok(v)
    }
}

impl ScgfSource for SpectralScgf {
    fn lambda(&self, s: f64) -> Result<f64> {
        Ok(self.eval(s)?.0)
    }

    fn dlambda(&self, s: f64) -> Result<f64> {
        Ok(self.eval(s)?.1)
    }

    fn variance_rate(&self) -> Result<f64> {
        Ok(cumulants(&self.params, 2)?.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdpOptions {
    /// Field window `[-s_max, s_max]` searched for `λ'(s) = x`.
    pub s_max: f64,
    /// Stop once the bracket on `s` is this narrow and the slope residual
    /// cannot be reduced further.
    pub s_tol: f64,
}

impl Default for LdpOptions {
    fn default() -> Self {
        Self {
            s_max: 2.0,
            s_tol: 1e-10,
        }
    }
}

/// One tabulated point. `rate` and `s_star` are `None` when `x` lies outside
/// `[λ'(-s_max), λ'(s_max)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub x: f64,
    pub rate: Option<f64>,
    pub s_star: Option<f64>,
    /// `|λ'(s_star) - x|`
    pub residual: Option<f64>,
}

impl RatePoint {
    pub fn attainable(&self) -> bool {
        self.rate.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFunctionTable {
    pub points: Vec<RatePoint>,
    pub m: f64,
    pub v: f64,
    pub s_max: f64,
}

/// `I(x)` on `x_grid` for the spectral `λ(s)` with default options.
pub fn rate_function(params: &MaserParams, x_grid: &[f64]) -> Result<RateFunctionTable> {
    rate_function_from(&SpectralScgf::new(*params), x_grid, LdpOptions::default())
}

/// `I(x) = s x - λ(s)` with `λ'(s) = x` found by bisection; points are solved
/// in parallel and returned in grid order.
pub fn rate_function_from<S: ScgfSource>(
    source: &S,
    x_grid: &[f64],
    opts: LdpOptions,
) -> Result<RateFunctionTable> {
    check_finite("s_max", opts.s_max)?;
    if !(opts.s_max > 0.0) {
        return Err(MaserError::InvalidParameter {
            name: "s_max",
            value: opts.s_max,
            reason: "must be positive",
        });
    }
    for &x in x_grid {
        check_finite("x", x)?;
    }
    let m = source.dlambda(0.0)?;
    let v = source.variance_rate()?.max(0.0);
    let lo_slope = source.dlambda(-opts.s_max)?;
    let hi_slope = source.dlambda(opts.s_max)?;
    let points = x_grid
        .par_iter()
        .map(|&x| solve_point(source, x, opts, lo_slope, hi_slope))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateFunctionTable {
        points,
        m,
        v,
        s_max: opts.s_max,
    })
}

fn solve_point<S: ScgfSource>(
    source: &S,
    x: f64,
    opts: LdpOptions,
    lo_slope: f64,
    hi_slope: f64,
) -> Result<RatePoint> {
    if x < lo_slope || x > hi_slope {
        return Ok(RatePoint {
            x,
            rate: None,
            s_star: None,
            residual: None,
        });
    }
    let tol = 1e-10 * x.abs().max(1.0);
    let (mut lo, mut hi) = (-opts.s_max, opts.s_max);
    let mut best = if (x - lo_slope).abs() <= (hi_slope - x).abs() {
        (lo, (x - lo_slope).abs())
    } else {
        (hi, (hi_slope - x).abs())
    };
    while best.1 > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo <= opts.s_tol && best.1 <= 1e-8 * x.abs().max(1.0)) {
            break;
        }
        let d = source.dlambda(mid)?;
        let r = (d - x).abs();
        if r < best.1 {
            best = (mid, r);
        }
        if d < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = best.0;
    let rate = s * x - source.lambda(s)?;
    Ok(RatePoint {
        x,
        rate: Some(rate),
        s_star: Some(s),
        residual: Some(best.1),
    })
}

/// Mean and variance rate of the count, `(λ'(0), λ''(0))`.
pub fn clt_params(params: &MaserParams) -> Result<(f64, f64)> {
    let c = cumulants(params, 2)?;
    Ok((c.m, c.v.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mean_count_rate, stationary};

    struct Quadratic {
        m: f64,
        v: f64,
    }

    impl ScgfSource for Quadratic {
        fn lambda(&self, s: f64) -> Result<f64> {
            Ok(self.m * s + 0.5 * self.v * s * s)
        }
        fn dlambda(&self, s: f64) -> Result<f64> {
            Ok(self.m + self.v * s)
        }
    }

    #[test]
    fn quadratic_seam_gives_gaussian_rate() {
        let q = Quadratic { m: 3.0, v: 2.0 };
        let xs: Vec<f64> = (0..41).map(|i| -1.0 + 0.2 * i as f64).collect();
        let t = rate_function_from(&q, &xs, LdpOptions::default()).unwrap();
        assert!((t.m - 3.0).abs() < 1e-12);
        assert!((t.v - 2.0).abs() < 1e-8);
        for p in &t.points {
            if (p.x - 3.0).abs() <= 4.0 {
                let exact = (p.x - 3.0).powi(2) / 4.0;
                assert!((p.rate.unwrap() - exact).abs() < 1e-9, "{}", p.x);
            } else {
                assert!(!p.attainable(), "{}", p.x);
            }
        }
    }

    #[test]
    fn zero_at_mean_and_fenchel_young() {
        let p = MaserParams::from_alpha(10.0, 2.0, 0.15).unwrap();
        let src = SpectralScgf::new(p);
        let m = src.dlambda(0.0).unwrap();
        let xs: Vec<f64> = (0..21).map(|i| m * (0.5 + 0.05 * i as f64)).collect();
        let t = rate_function_from(&src, &xs, LdpOptions::default()).unwrap();
        let at_mean = &t.points[10];
        assert!(at_mean.rate.unwrap() < 1e-8);
        assert!(at_mean.s_star.unwrap().abs() < 1e-8);
        for pt in t.points.iter().filter(|p| p.attainable()) {
            let s = pt.s_star.unwrap();
            let lam = src.lambda(s).unwrap();
            assert!((s * pt.x - pt.rate.unwrap() - lam).abs() <= 1e-8);
            assert!(pt.residual.unwrap() <= 1e-8 * pt.x.abs().max(1.0));
            assert!(pt.rate.unwrap() >= 0.0);
        }
        let s: Vec<f64> = t.points.iter().filter_map(|p| p.s_star).collect();
        assert!(s.windows(2).all(|w| w[1] >= w[0]));
        let rates: Vec<f64> = t.points.iter().filter_map(|p| p.rate).collect();
        for w in rates.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
        }
    }

    #[test]
    fn conjugate_of_rate_recovers_lambda() {
        let p = MaserParams::from_alpha(10.0, 2.0, 0.15).unwrap();
        let src = SpectralScgf::new(p);
        let (xa, xb) = (src.dlambda(-1.2).unwrap(), src.dlambda(1.2).unwrap());
        let xs: Vec<f64> = (0..=1500)
            .map(|i| xa + (xb - xa) * i as f64 / 1500.0)
            .collect();
        let t = rate_function_from(&src, &xs, LdpOptions::default()).unwrap();
        for s in [-1.0, -0.5, 0.0, 0.3, 1.0] {
            let sup = t
                .points
                .iter()
                .map(|pt| s * pt.x - pt.rate.unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            let lam = src.lambda(s).unwrap();
            assert!((sup - lam).abs() <= 1e-4, "{s}: {sup} vs {lam}");
        }
    }

    #[test]
    fn out_of_window_points_are_flagged() {
        let p = MaserParams::from_alpha(10.0, 2.0, 0.15).unwrap();
        let t = rate_function(&p, &[0.0, 1e6]).unwrap();
        assert!(t.points.iter().all(|p| !p.attainable()));
        let bad = LdpOptions {
            s_max: -1.0,
            ..LdpOptions::default()
        };
        assert!(rate_function_from(&SpectralScgf::new(p), &[1.0], bad).is_err());
    }

    #[test]
    fn clt_parameters() {
        let p = MaserParams::from_alpha(0.0, 0.0, 0.15).unwrap();
        assert_eq!(clt_params(&p).unwrap(), (0.0, 0.0));
        let p = MaserParams::from_alpha(50.0, 3.0, 0.15).unwrap();
        let (m, v) = clt_params(&p).unwrap();
        let exact = mean_count_rate(&p, &stationary(&p, 1e-14).unwrap())
            .unwrap()
            .value();
        assert!((m - exact).abs() <= 1e-8 * exact);
        assert!(v > 0.0);
    }

    #[test]
    fn cache_is_reused() {
        let p = MaserParams::from_alpha(10.0, 2.0, 0.15).unwrap();
        let src = SpectralScgf::new(p);
        src.lambda(0.25).unwrap();
        src.dlambda(0.25).unwrap();
        assert_eq!(src.cached(), 1);
    }
}

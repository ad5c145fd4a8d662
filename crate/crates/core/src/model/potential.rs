use super::{MaserParams, StationaryDistribution};
use crate::error::{MaserError, Result};

/// Effective potential `U(n) = -log(rho(n)/rho(0))` and samples of its
/// large-pumping limit `v(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivePotential {
    pub values: Vec<f64>,
    pub limit_samples: Vec<(f64, f64)>,
}

impl EffectivePotential {
    /// `U(x nex) / nex`, linearly interpolated between levels. `None` outside
    /// the tabulated range.
    pub fn rescaled_at(&self, nex: f64, x: f64) -> Option<f64> {
        if !(nex > 0.0) || x < 0.0 {
            return None;
        }
        let pos = x * nex;
        let lo = pos.floor() as usize;
        if lo + 1 >= self.values.len() {
            return (lo + 1 == self.values.len() && pos == lo as f64)
                .then(|| self.values[lo] / nex);
        }
        let frac = pos - lo as f64;
        Some(((1.0 - frac) * self.values[lo] + frac * self.values[lo + 1]) / nex)
    }
}

const DEFAULT_SAMPLES: usize = 101;
const QUAD_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 50;

/// Potential of `ss`, with `v` sampled on 101 points over the rescaled range
/// covered by the truncation.
pub fn effective_potential(
    params: &MaserParams,
    ss: &StationaryDistribution,
) -> Result<EffectivePotential> {
    let x_max = (ss.dim - 1) as f64 / params.nex().max(1.0);
    let xs: Vec<f64> = (0..DEFAULT_SAMPLES)
        .map(|i| x_max * i as f64 / (DEFAULT_SAMPLES - 1) as f64)
        .collect();
    effective_potential_on(params, ss, &xs)
}

/// Potential of `ss` with `v` sampled on a caller-supplied ascending grid.
pub fn effective_potential_on(
    params: &MaserParams,
    ss: &StationaryDistribution,
    xs: &[f64],
) -> Result<EffectivePotential> {
    let base = ss.log_weights[0];
    let values = ss.log_weights.iter().map(|w| -(w - base)).collect();
    let v = limit_potential(params.alpha(), params.nu(), xs)?;
    Ok(EffectivePotential {
        values,
        limit_samples: xs.iter().copied().zip(v).collect(),
    })
}

/// `v(x) = -∫_0^x log[(nu + sin²(alpha sqrt y)/y) / (nu + 1)] dy` on an
/// ascending grid of non-negative points.
///
/// The integrand is the log of the rescaled ratio `rho(k)/rho(k-1)` at
/// `k = y nex`, so `U(x nex)/nex -> v(x)` as `nex` grows.
pub fn limit_potential(alpha: f64, nu: f64, xs: &[f64]) -> Result<Vec<f64>> {
    let integrand = |y: f64| -> f64 {
        let z = alpha * y.max(0.0).sqrt();
        let sinc = if z < 1e-4 {
            1.0 - z * z / 6.0
        } else {
            z.sin() / z
        };
        let birth = alpha * alpha * sinc * sinc;
        -((nu + birth) / (nu + 1.0)).ln()
    };

    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for &x in xs {
        if !(x >= prev) || !x.is_finite() {
            return Err(MaserError::InvalidParameter {
                name: "x",
                value: x,
                reason: "grid must be finite, non-negative and ascending",
            });
        }
        if x > prev {
            acc += adaptive_simpson(&integrand, prev, x, QUAD_TOL)
                .ok_or(MaserError::QuadratureFailed { x })?;
        }
        out.push(acc);
        prev = x;
    }
    Ok(out)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Option<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let r = simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)?;
    r.is_finite().then_some(r)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return None;
    }
    if delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    Some(
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::stationary;

    #[test]
    fn potential_starts_at_zero_and_reconstructs_law() {
        let p = MaserParams::from_alpha(150.0, 6.6, 0.15).unwrap();
        let ss = stationary(&p, 1e-14).unwrap();
        let pot = effective_potential(&p, &ss).unwrap();
        assert_eq!(pot.values[0], 0.0);
        assert_eq!(pot.limit_samples[0], (0.0, 0.0));
        let umin = pot.values.iter().copied().fold(f64::INFINITY, f64::min);
        let z: f64 = pot.values.iter().map(|u| (-(u - umin)).exp()).sum();
        for (u, pr) in pot.values.iter().zip(&ss.probs) {
            assert!(((-(u - umin)).exp() / z - pr).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_slope_at_origin() {
        let (alpha, nu) = (0.5f64, 0.15f64);
        let h = 1e-6;
        let v = limit_potential(alpha, nu, &[0.0, h]).unwrap();
        let slope = v[1] / h;
        let expected = -((nu + alpha * alpha) / (nu + 1.0)).ln();
        assert!(expected > 0.0);
        assert!((slope - expected).abs() < 1e-5);
    }

    #[test]
    fn quadrature_matches_closed_form_when_flat() {
        // alpha = 0: integrand is the constant -log(nu/(nu+1))
        let v = limit_potential(0.0, 0.15, &[0.0, 0.5, 2.0]).unwrap();
        let c = -(0.15f64 / 1.15).ln();
        assert!((v[1] - 0.5 * c).abs() < 1e-12);
        assert!((v[2] - 2.0 * c).abs() < 1e-12);
    }

    #[test]
    fn equal_wells_near_transition() {
        let xs: Vec<f64> = (0..=4000).map(|i| 2.0 * i as f64 / 4000.0).collect();
        let v = limit_potential(6.66, 0.15, &xs).unwrap();
        let minima: Vec<usize> = (1..v.len() - 1)
            .filter(|&i| v[i] < v[i - 1] && v[i] < v[i + 1])
            .collect();
        assert_eq!(minima.len(), 2, "{minima:?}");
        let (a, b) = (v[minima[0]], v[minima[1]]);
        let barrier = v[minima[0]..minima[1]]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let height = barrier - a.max(b);
        assert!((a - b).abs() < 0.05 * height, "{a} {b} {barrier}");
    }

    #[test]
    fn rejects_unsorted_grid_and_reports_divergence() {
        assert!(limit_potential(3.0, 0.15, &[0.5, 0.1]).is_err());
        // nu = 0 makes the integrand blow up at zeros of the sine
        let x_zero = (std::f64::consts::PI / 3.0).powi(2);
        match limit_potential(3.0, 0.0, &[0.0, 2.0 * x_zero]) {
            Err(MaserError::QuadratureFailed { x }) => assert_eq!(x, 2.0 * x_zero),
            other => panic!("expected quadrature failure, got {other:?}"),
        }
    }

    #[test]
    fn rescaled_interpolation() {
        let pot = EffectivePotential {
            values: vec![0.0, 2.0, 4.0],
            limit_samples: vec![],
        };
        assert_eq!(pot.rescaled_at(2.0, 0.25), Some(0.5));
        assert_eq!(pot.rescaled_at(2.0, 1.0), Some(2.0));
        assert_eq!(pot.rescaled_at(2.0, 1.5), None);
    }
}

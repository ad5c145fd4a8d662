//! Exact finite-time moment generating function
//! `E[e^{s Λ_t}] = 1ᵀ exp(t M_s) e_initial`, by two independent routes:
//! uniformization (a series of non-negative terms) and a scaled Taylor
//! series of `M_s` itself.

use crate::error::{check_finite, MaserError, Result};
use crate::generator::{build_tilted, TiltedGenerator};
use crate::model::MaserParams;

const MAX_SUBSTEPS: usize = 10_000_000;
const MAX_TERMS: usize = 1_000;
const SERIES_TOL: f64 = 1e-17;
/// Largest `q τ` per uniformization sub-step; keeps `e^{-qτ}` well scaled.
const UNIF_STEP: f64 = 16.0;
/// Largest `‖τ M‖₁` per Taylor sub-step.
const TAYLOR_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfExact {
    /// Uniformization value (the reported one).
    pub value: f64,
    pub uniformization: f64,
    pub taylor: f64,
    /// Probability lost through the top of the truncation by time `t`
    /// (untilted dynamics from the same initial level).
    pub leak: f64,
}

/// `E[e^{s Λ_t}]` from level `initial` on the truncation `0..dim`.
pub fn mgf_exact(
    params: &MaserParams,
    s: f64,
    t: f64,
    initial: usize,
    dim: usize,
) -> Result<MgfExact> {
    check_finite("t", t)?;
    if t < 0.0 {
        return Err(MaserError::InvalidParameter {
            name: "t",
            value: t,
            reason: "must be non-negative",
        });
    }
    if initial >= dim {
        return Err(MaserError::LevelOutOfRange {
            level: initial,
            dim,
        });
    }
    let generator = build_tilted(params, s, dim)?;
    let mut start = vec![0.0; dim];
    start[initial] = 1.0;

    let uniformization = propagate_uniformization(&generator, &start, t)?
        .iter()
        .sum();
    let taylor = propagate_taylor(&generator, &start, t)?.iter().sum();
    let untilted = if s == 0.0 {
        uniformization
    } else {
        let g0 = build_tilted(params, 0.0, dim)?;
        propagate_uniformization(&g0, &start, t)?.iter().sum()
    };
    Ok(MgfExact {
        value: uniformization,
        uniformization,
        taylor,
        leak: (1.0 - untilted).max(0.0),
    })
}

fn substeps(rate_time: f64, per_step: f64) -> Result<usize> {
    let steps = (rate_time / per_step).ceil().max(1.0);
    if !(steps <= MAX_SUBSTEPS as f64) {
        return Err(MaserError::StepOverflow {
            steps,
            limit: MAX_SUBSTEPS,
        });
    }
    Ok(steps as usize)
}

/// `exp(t M) v` with `M = q (P - I)`, `P = I + M/q` entrywise non-negative.
pub(crate) fn propagate_uniformization(
    generator: &TiltedGenerator,
    v: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    let q = generator.diag.iter().map(|d| d.abs()).fold(0.0, f64::max);
    if q == 0.0 || t == 0.0 {
        return Ok(v.to_vec());
    }
    // column sums of P are at most rho
    let rho = (0..generator.dim)
        .map(|n| {
            let col = generator.diag[n]
                + if n + 1 < generator.dim {
                    generator.sub[n]
                } else {
                    0.0
                }
                + if n > 0 { generator.sup[n - 1] } else { 0.0 };
            1.0 + col / q
        })
        .fold(1.0, f64::max);

    let m = substeps(q * t, UNIF_STEP)?;
    let qtau = q * t / m as f64;
    let mut x = v.to_vec();
    for _ in 0..m {
        let mut power = x.clone();
        let mut coeff = (-qtau).exp();
        let mut out: Vec<f64> = power.iter().map(|p| coeff * p).collect();
        let mass: f64 = x.iter().map(|a| a.abs()).sum();
        for k in 1..MAX_TERMS {
            let mv = generator.apply(&power);
            for (p, a) in power.iter_mut().zip(&mv) {
                *p += a / q;
            }
            coeff *= qtau / k as f64;
            for (o, p) in out.iter_mut().zip(&power) {
                *o += coeff * p;
            }
            let kk = (k + 1) as f64;
            if kk > qtau * rho {
                let next = coeff * qtau / kk * rho.powi(k as i32 + 1);
                let tail = next / (1.0 - qtau * rho / (kk + 1.0)).max(f64::EPSILON);
                let total: f64 = out.iter().map(|a| a.abs()).sum();
                if tail * mass <= SERIES_TOL * total.max(f64::MIN_POSITIVE) {
                    break;
                }
            }
        }
        x = out;
    }
    Ok(x)
}

/// `exp(t M) v` by repeated truncated Taylor steps with `‖τ M‖₁ <= 1/2`.
pub(crate) fn propagate_taylor(generator: &TiltedGenerator, v: &[f64], t: f64) -> Result<Vec<f64>> {
    let norm = generator.norm1();
    if norm == 0.0 || t == 0.0 {
        return Ok(v.to_vec());
    }
    let m = substeps(norm * t, TAYLOR_STEP)?;
    let tau = t / m as f64;
    let a_norm = norm * tau;
    let mut x = v.to_vec();
    for _ in 0..m {
        let mut term = x.clone();
        let mut out = x.clone();
        let base: f64 = x.iter().map(|a| a.abs()).sum();
        let mut bound = base;
        for k in 1..MAX_TERMS {
            let mv = generator.apply(&term);
            let kf = k as f64;
            for (tm, a) in term.iter_mut().zip(&mv) {
                *tm = a * tau / kf;
            }
            for (o, tm) in out.iter_mut().zip(&term) {
                *o += tm;
            }
            bound *= a_norm / kf;
            let tail = bound * a_norm / (kf + 1.0) / (1.0 - a_norm / (kf + 2.0));
            let total: f64 = out.iter().map(|a| a.abs()).sum();
            if tail <= SERIES_TOL * total.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        x = out;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MaserParams {
        MaserParams::from_alpha(10.0, 2.0, 0.15).unwrap()
    }

    #[test]
    fn zero_time_is_one() {
        let r = mgf_exact(&params(), 0.7, 0.0, 3, 40).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.taylor, 1.0);
    }

    #[test]
    fn untilted_conserves_up_to_leak() {
        for t in [0.5, 2.0, 5.0] {
            let r = mgf_exact(&params(), 0.0, t, 0, 80).unwrap();
            assert!((r.value - 1.0).abs() < 1e-10);
            assert!((r.value + r.leak - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn routes_agree() {
        let p = MaserParams::from_alpha(50.0, 6.6, 0.15).unwrap();
        for (s, t, dim) in [(0.5, 1.0, 60), (-0.5, 5.0, 200), (1.0, 3.0, 150)] {
            let r = mgf_exact(&p, s, t, 0, dim).unwrap();
            assert!(
                (r.uniformization - r.taylor).abs() <= 1e-10 * r.uniformization,
                "{s} {t}: {} vs {}",
                r.uniformization,
                r.taylor
            );
        }
    }

    #[test]
    fn two_level_closed_form() {
        let p = MaserParams::new(3.0, std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        let s: f64 = 0.4;
        let t: f64 = 1.3;
        let r = mgf_exact(&p, s, t, 0, 2).unwrap();
        // p0' = -3 p0 + p1, p1' = 3 e^s p0 - (1 + c1) p1, c1 = 3 sin²(pi/sqrt2)
        let c1 = 3.0 * (std::f64::consts::FRAC_PI_2 * 2f64.sqrt()).sin().powi(2);
        let (a, b, c, d) = (-3.0, 1.0, 3.0 * s.exp(), -(1.0 + c1));
        let tr = a + d;
        let det = a * d - b * c;
        let disc = (tr * tr / 4.0 - det).sqrt();
        let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
        // e^{tM} = (e^{l1 t}(M - l2) - e^{l2 t}(M - l1)) / (l1 - l2), applied to e0
        let col0 = |l: f64| (a - l) + c;
        let expected = ((l1 * t).exp() * col0(l2) - (l2 * t).exp() * col0(l1)) / (l1 - l2);
        assert!(
            (r.value - expected).abs() < 1e-12,
            "{} vs {expected}",
            r.value
        );
        assert!((r.taylor - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(mgf_exact(&params(), 0.0, -1.0, 0, 10).is_err());
        assert!(mgf_exact(&params(), 0.0, 1.0, 10, 10).is_err());
        assert!(mgf_exact(&params(), 0.0, f64::NAN, 0, 10).is_err());
        assert!(matches!(
            mgf_exact(&params(), 0.0, 1e12, 0, 10),
            Err(MaserError::StepOverflow { .. })
        ));
    }
}

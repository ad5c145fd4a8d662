//! Spectral bound `λ(s)`, spectral gap and principal eigenvectors of the
//! tilted generator, plus the limiting cumulants and the exact finite-time
//! moment generating function.
//!
//! Eigenvalues come from the symmetrized truncation by Sturm bisection; the
//! principal pair is then refined in flux form (see `perron`). The
//! truncation is grown by doubling until `λ(s)` is stable; the reported
//! result is the one at the smaller dimension of the agreeing pair, so its
//! eigenvector tails are still representable in double precision.

mod cumulants;
mod mgf;
mod perron;

pub use cumulants::{cumulants, CumulantEstimates};
pub use mgf::{mgf_exact, MgfExact};

use crate::error::{MaserError, Result};
use crate::generator::{build_tilted, symmetrize, Symmetrized, TiltedGenerator};
use crate::model::{stationary, MaserParams};

/// Default relative tolerance for the truncation-doubling loop.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

const DEGENERACY_TOL: f64 = 1e-12;
const STATIONARY_TAIL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub s: f64,
    /// Spectral bound `λ(s)`.
    pub lambda_s: f64,
    /// Second-largest eigenvalue `λ₁(s)`.
    pub lambda_1: f64,
    /// `λ(s) - λ₁(s)`
    pub gap: f64,
    /// `dλ/ds`, from the eigenvectors.
    pub dlambda_ds: f64,
    /// Right eigenvector of `M_s`, normalized to unit sum.
    pub right_vec: Vec<f64>,
    /// Left eigenvector of `M_s`, normalized so that `<l, r> = 1`.
    pub left_vec: Vec<f64>,
    pub dim_used: usize,
    pub converged: bool,
    /// Tripwire: the top two eigenvalues agree within 1e-12.
    pub degenerate: bool,
    pub spectrum: Option<Vec<f64>>,
}

impl SpectralResult {
    pub fn min_vector_entry(&self) -> f64 {
        self.right_vec
            .iter()
            .chain(&self.left_vec)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Truncation schedule for [`spectral_bound_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub rel_tol: f64,
    /// Upper limit on the truncation; defaults to `100 max(1, nex)`.
    pub cap: Option<usize>,
    /// Starting dimension; defaults to the stationary truncation plus
    /// `ceil(8 e^{|s|} sqrt(nex))` levels.
    pub initial_dim: Option<usize>,
    pub with_spectrum: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            cap: None,
            initial_dim: None,
            with_spectrum: false,
        }
    }
}

/// `λ(s)` with adaptive truncation. A result with `converged = false` carries
/// the best estimate at the cap.
pub fn spectral_bound(params: &MaserParams, s: f64, rel_tol: f64) -> Result<SpectralResult> {
    spectral_bound_with(
        params,
        s,
        SpectralOptions {
            rel_tol,
            ..SpectralOptions::default()
        },
    )
}

pub fn spectral_bound_with(
    params: &MaserParams,
    s: f64,
    opts: SpectralOptions,
) -> Result<SpectralResult> {
    if !(params.nu() > 0.0) {
        return Err(MaserError::InvalidParameter {
            name: "nu",
            value: params.nu(),
            reason: "spectral analysis needs nu > 0",
        });
    }
    if !(1e-14..=1e-6).contains(&opts.rel_tol) {
        return Err(MaserError::InvalidParameter {
            name: "rel_tol",
            value: opts.rel_tol,
            reason: "must lie in [1e-14, 1e-6]",
        });
    }
    let cap = opts
        .cap
        .unwrap_or_else(|| crate::model::default_cap(params.nex()))
        .max(2);
    let mut dim = match opts.initial_dim {
        Some(d) => d,
        None => initial_dim(params, s)?,
    }
    .clamp(2, cap);

    let (mut lambda, mut norm) = top_eigenvalue(params, s, dim)?;
    let converged = loop {
        if dim >= cap {
            break false;
        }
        let next_dim = (2 * dim).min(cap);
        let (next, next_norm) = top_eigenvalue(params, s, next_dim)?;
        let tol = (opts.rel_tol * lambda.abs().max(next.abs()))
            .max(64.0 * f64::EPSILON * norm.max(next_norm));
        if (next - lambda).abs() <= tol {
            break true;
        }
        dim = next_dim;
        lambda = next;
        norm = next_norm;
    };
    let mut result = solve_at_dim(params, s, dim, opts.with_spectrum)?;
    result.converged = converged;
    Ok(result)
}

fn initial_dim(params: &MaserParams, s: f64) -> Result<usize> {
    let ss = stationary(params, STATIONARY_TAIL_TOL)?;
    let margin = (8.0 * s.abs().exp() * params.nex().sqrt()).ceil() as usize;
    Ok(ss.dim + margin)
}

fn symmetrized(params: &MaserParams, s: f64, dim: usize) -> Result<(TiltedGenerator, Symmetrized)> {
    let generator = build_tilted(params, s, dim)?;
    let sym = symmetrize(&generator)?;
    Ok((generator, sym))
}

fn top_eigenvalue(params: &MaserParams, s: f64, dim: usize) -> Result<(f64, f64)> {
    let (_, sym) = symmetrized(params, s, dim)?;
    Ok((sym.matrix.kth_largest(0), sym.matrix.norm_bound()))
}

/// Full spectral data at a fixed truncation. `converged` is left `false`;
/// nothing has been checked against a larger truncation.
pub fn solve_at_dim(
    params: &MaserParams,
    s: f64,
    dim: usize,
    with_spectrum: bool,
) -> Result<SpectralResult> {
    let (generator, sym) = symmetrized(params, s, dim)?;
    let t = &sym.matrix;
    let (top_lo, top_hi) = t.bracket_kth_largest(0);
    let lambda_1 = t.kth_largest(1);
    let slack = 16.0 * f64::EPSILON * t.norm_bound();
    let pr = perron::perron(&generator, top_lo, top_hi, slack).ok_or(
        MaserError::SpectralNotConverged {
            s,
            estimate: 0.5 * (top_lo + top_hi),
            dim,
        },
    )?;
    let lambda_s = pr.lambda;

    // left eigenvector l = G² r
    let log_l: Vec<f64> = pr
        .log_r
        .iter()
        .zip(&sym.log_scale)
        .map(|(r, g)| r + 2.0 * g)
        .collect();
    let log_lr: Vec<f64> = pr.log_r.iter().zip(&log_l).map(|(r, l)| r + l).collect();
    let log_norm = log_sum_exp(&log_lr);
    let log_sum_r = log_sum_exp(&pr.log_r);
    let right_vec = pr.log_r.iter().map(|x| (x - log_sum_r).exp()).collect();
    let left_vec = log_l
        .iter()
        .map(|x| (x + log_sum_r - log_norm).exp())
        .collect();

    // Hellmann-Feynman: dλ/ds = <l, (dM/ds) r> / <l, r>, dM/ds = e^s c_n on
    // the subdiagonal
    let dlambda_ds = (0..dim - 1)
        .map(|n| generator.tilted_counted[n] * (log_l[n + 1] + pr.log_r[n] - log_norm).exp())
        .sum();

    let gap = (lambda_s - lambda_1).max(0.0);
    Ok(SpectralResult {
        s,
        lambda_s,
        lambda_1,
        gap,
        dlambda_ds,
        right_vec,
        left_vec,
        dim_used: dim,
        converged: false,
        degenerate: gap <= DEGENERACY_TOL,
        spectrum: with_spectrum.then(|| t.eigenvalues_desc()),
    })
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn require_converged(r: SpectralResult) -> Result<SpectralResult> {
    if r.converged {
        Ok(r)
    } else {
        Err(MaserError::SpectralNotConverged {
            s: r.s,
            estimate: r.lambda_s,
            dim: r.dim_used,
        })
    }
}

/// `λ(s) - λ₁(s)` at a converged truncation.
pub fn spectral_gap(params: &MaserParams, s: f64) -> Result<f64> {
    Ok(require_converged(spectral_bound(params, s, DEFAULT_REL_TOL)?)?.gap)
}

/// `dλ/ds` by first-order perturbation of the principal eigenvalue.
pub fn lambda_derivative(params: &MaserParams, s: f64) -> Result<f64> {
    Ok(require_converged(spectral_bound(params, s, DEFAULT_REL_TOL)?)?.dlambda_ds)
}

/// All eigenvalues of the symmetrized truncation at `dim`, descending.
pub fn full_spectrum(params: &MaserParams, s: f64, dim: usize) -> Result<Vec<f64>> {
    let (_, sym) = symmetrized(params, s, dim)?;
    Ok(sym.matrix.eigenvalues_desc())
}

/// The `count` largest eigenvalues at `dim`, descending.
pub fn leading_spectrum(
    params: &MaserParams,
    s: f64,
    dim: usize,
    count: usize,
) -> Result<Vec<f64>> {
    let (_, sym) = symmetrized(params, s, dim)?;
    Ok((0..count.min(dim))
        .map(|k| sym.matrix.kth_largest(k))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mean_count_rate;

    fn params(nex: f64, alpha: f64) -> MaserParams {
        MaserParams::from_alpha(nex, alpha, 0.15).unwrap()
    }

    #[test]
    fn conservation_at_zero_tilt() {
        let p = params(50.0, 3.0);
        let r = spectral_bound(&p, 0.0, 1e-12).unwrap();
        assert!(r.converged);
        assert!(r.lambda_s.abs() < 1e-10);
        // right vector is the stationary law, left vector is flat
        let ss = stationary(&p, 1e-14).unwrap();
        for n in 0..ss.dim.min(r.dim_used) {
            assert!((r.right_vec[n] - ss.probs[n]).abs() < 1e-9);
        }
        for l in &r.left_vec[..ss.dim / 2] {
            assert!((l - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn no_atoms_no_counts() {
        let p = params(0.0, 0.0);
        for s in [-1.0, 0.5, 2.0] {
            let r = spectral_bound(&p, s, 1e-12).unwrap();
            assert!(r.lambda_s.abs() < 1e-12, "{s}: {}", r.lambda_s);
            assert_eq!(r.dlambda_ds, 0.0);
        }
        let g0 = spectral_gap(&p, 0.0).unwrap();
        let g1 = spectral_gap(&p, 1.5).unwrap();
        assert!((g0 - g1).abs() < 1e-10);
        // the thermal birth-death chain has its first excited rate at 1
        assert!((g0 - 1.0).abs() < 1e-8, "{g0}");
    }

    #[test]
    fn derivative_matches_mean_rate() {
        let p = params(150.0, 6.6);
        let ss = stationary(&p, 1e-14).unwrap();
        let m = mean_count_rate(&p, &ss).unwrap().value();
        let d = lambda_derivative(&p, 0.0).unwrap();
        assert!((d - m).abs() <= 1e-8 * m, "{d} vs {m}");
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for (p, s) in [
            (params(10.0, 2.0), 0.3),
            (params(50.0, 3.0), -0.4),
            (params(50.0, 6.6), 0.05),
        ] {
            let h = 1e-5;
            let plus = spectral_bound(&p, s + h, 1e-13).unwrap().lambda_s;
            let minus = spectral_bound(&p, s - h, 1e-13).unwrap().lambda_s;
            let fd = (plus - minus) / (2.0 * h);
            let d = lambda_derivative(&p, s).unwrap();
            assert!((fd - d).abs() <= 1e-6 * d.abs(), "{s}: {fd} vs {d}");
        }
    }

    #[test]
    fn eigenvectors_are_positive() {
        for s in [-1.0, 0.0, 0.002, 1.0] {
            let r = spectral_bound(&params(150.0, 6.6), s, 1e-12).unwrap();
            assert!(r.converged);
            assert!(r.min_vector_entry() > 0.0);
            let ip: f64 = r
                .left_vec
                .iter()
                .zip(&r.right_vec)
                .map(|(a, b)| a * b)
                .sum();
            assert!((ip - 1.0).abs() < 1e-12);
            assert!(r.gap > 0.0 && !r.degenerate);
        }
    }

    #[test]
    fn truncation_doubling_is_consistent() {
        let p = params(150.0, 6.6);
        for s in [-0.002, 0.002] {
            let r = spectral_bound(&p, s, 1e-12).unwrap();
            let big = solve_at_dim(&p, s, 2 * r.dim_used, false).unwrap();
            assert!((r.lambda_s - big.lambda_s).abs() <= 1e-9 * r.lambda_s.abs());
        }
    }

    #[test]
    fn full_spectrum_top_matches_bound() {
        let p = params(50.0, 3.0);
        let r = solve_at_dim(&p, 0.3, 120, true).unwrap();
        let spec = full_spectrum(&p, 0.3, 120).unwrap();
        assert_eq!(Some(&spec), r.spectrum.as_ref());
        assert!((spec[0] - r.lambda_s).abs() < 1e-10);
        assert!(spec.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(
            leading_spectrum(&p, 0.3, 120, 5).unwrap(),
            spec[..5].to_vec()
        );
        let at_zero = full_spectrum(&p, 0.0, 120).unwrap();
        assert!(at_zero[0].abs() < 1e-10);
    }

    /// Elementary symmetric polynomials of the eigenvalues against sums of
    /// principal minors of the dense generator, minors by permutation
    /// expansion.
    #[test]
    fn characteristic_polynomial_brute_force() {
        fn det(m: &[Vec<f64>], idx: &[usize]) -> f64 {
            fn perms(k: usize) -> Vec<Vec<usize>> {
                if k == 0 {
                    return vec![vec![]];
                }
                let mut out = Vec::new();
                for p in perms(k - 1) {
                    for pos in 0..=p.len() {
                        let mut q = p.clone();
                        q.insert(pos, k - 1);
                        out.push(q);
                    }
                }
                out
            }
            perms(idx.len())
                .into_iter()
                .map(|p| {
                    let inversions = (0..p.len())
                        .flat_map(|i| (i + 1..p.len()).map(move |j| (i, j)))
                        .filter(|&(i, j)| p[i] > p[j])
                        .count();
                    let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
                    sign * (0..p.len()).map(|i| m[idx[i]][idx[p[i]]]).product::<f64>()
                })
                .sum()
        }
        let p = params(4.0, 2.5);
        for s in [-0.5, 0.0, 0.9] {
            let dense = build_tilted(&p, s, 4).unwrap().to_dense();
            let ev = full_spectrum(&p, s, 4).unwrap();
            for k in 1..=4usize {
                let subsets: Vec<Vec<usize>> = (0u32..16)
                    .filter(|b| b.count_ones() as usize == k)
                    .map(|b| (0..4).filter(|i| b >> i & 1 == 1).collect())
                    .collect();
                let minors: f64 = subsets.iter().map(|sub| det(&dense, sub)).sum();
                let elementary: f64 = subsets
                    .iter()
                    .map(|sub| sub.iter().map(|&i| ev[i]).product::<f64>())
                    .sum();
                let scale = subsets
                    .iter()
                    .map(|sub| sub.iter().map(|&i| ev[i].abs()).product::<f64>())
                    .sum::<f64>();
                assert!(
                    (minors - elementary).abs() <= 1e-12 * scale,
                    "{s} {k}: {minors} vs {elementary}"
                );
            }
        }
    }

    /// Heisenberg-picture form on diagonal observables: symmetric part with
    /// off-diagonal `sqrt(b_j d_{j+1})` plus the non-symmetric tilt
    /// `(e^s - 1) c_j sqrt(d_{j+1}/b_j)`; top eigenvalue by shifted power
    /// iteration.
    #[test]
    fn heisenberg_form_power_iteration() {
        let p = params(10.0, 3.0);
        let dim = 50;
        for s in [-0.7f64, 0.4] {
            let mut m = vec![vec![0.0; dim]; dim];
            for j in 0..dim {
                m[j][j] = -(p.birth_rate(j) + p.death_rate(j));
                if j + 1 < dim {
                    let (b, d) = (p.birth_rate(j), p.death_rate(j + 1));
                    m[j][j + 1] = (b * d).sqrt() + s.exp_m1() * p.counted_rate(j) * (d / b).sqrt();
                    m[j + 1][j] = (b * d).sqrt();
                }
            }
            let shift = m.iter().enumerate().map(|(j, r)| -r[j]).fold(0.0, f64::max);
            let mut x = vec![1.0; dim];
            let mut est = 0.0;
            for _ in 0..20_000 {
                let y: Vec<f64> = (0..dim)
                    .map(|i| (0..dim).map(|k| m[i][k] * x[k]).sum::<f64>() + shift * x[i])
                    .collect();
                let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                est = y.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
                    / x.iter().map(|v| v * v).sum::<f64>()
                    - shift;
                x = y.into_iter().map(|v| v / nrm).collect();
            }
            let r = solve_at_dim(&p, s, dim, false).unwrap();
            assert!(
                (est - r.lambda_s).abs() <= 1e-9 * (1.0 + r.lambda_s.abs()),
                "{s}: {est} vs {}",
                r.lambda_s
            );
        }
    }

    #[test]
    fn lambda_is_increasing_and_convex_in_s() {
        let p = params(50.0, 6.6);
        let s: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
        let lam: Vec<f64> = s
            .iter()
            .map(|&x| spectral_bound(&p, x, 1e-12).unwrap().lambda_s)
            .collect();
        assert!(lam.windows(2).all(|w| w[1] > w[0]));
        for w in lam.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
        }
    }

    #[test]
    fn rejects_zero_temperature_and_bad_tolerance() {
        let p = MaserParams::from_alpha(10.0, 2.0, 0.0).unwrap();
        assert!(spectral_bound(&p, 0.0, 1e-12).is_err());
        assert!(spectral_bound(&params(10.0, 2.0), 0.0, 1e-3).is_err());
    }

    #[test]
    fn cap_reports_non_convergence() {
        let opts = SpectralOptions {
            cap: Some(20),
            initial_dim: Some(20),
            ..SpectralOptions::default()
        };
        let r = spectral_bound_with(&params(50.0, 3.0), 0.5, opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.dim_used, 20);
    }
}

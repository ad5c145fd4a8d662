//! Truncated tilted generators of the counting process.
//!
//! The matrices here act on probability vectors (master-equation picture):
//! `dp/dt = M p`, with `M[n+1][n]` the upward and `M[n][n+1]` the downward
//! rate. The Heisenberg-picture generator is the transpose and has the same
//! spectrum. Only the counted upward jumps carry the factor `e^s`; jumps that
//! record an excited atom leave the photon number unchanged and drop out of
//! the diagonal dynamics altogether.
//!
//! Truncation keeps levels `0..dim` and discards everything that would leave
//! that range, so the matrix loses probability at the top level.

use crate::error::{check_dim, check_finite, MaserError, Result};
use crate::linalg::SymTridiag;
use crate::model::MaserParams;

/// Tridiagonal truncation of the tilted generator `M_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedGenerator {
    pub s: f64,
    pub dim: usize,
    /// `M[n+1][n] = e^s c_n + nu (n+1)`, `n = 0..dim-1`.
    pub sub: Vec<f64>,
    /// `M[n][n+1] = (nu+1)(n+1)`, `n = 0..dim-1`.
    pub sup: Vec<f64>,
    /// `M[n][n] = -(b_n + d_n)`.
    pub diag: Vec<f64>,
    /// Counted part of `sub`, `e^s c_n`; also `dM/ds`.
    pub tilted_counted: Vec<f64>,
    /// Column sums of `M`, formed without cancellation: `(e^s - 1) c_n`,
    /// and `-b_{dim-1}` for the top level.
    pub defect: Vec<f64>,
}

/// Builds `M_s` on levels `0..dim`.
pub fn build_tilted(params: &MaserParams, s: f64, dim: usize) -> Result<TiltedGenerator> {
    check_dim(dim)?;
    check_finite("s", s)?;
    let es = s.exp();
    let tilted_counted: Vec<f64> = (0..dim - 1).map(|n| es * params.counted_rate(n)).collect();
    let sub = tilted_counted
        .iter()
        .enumerate()
        .map(|(n, c)| c + params.thermal_birth_rate(n))
        .collect();
    let sup = (0..dim - 1).map(|n| params.death_rate(n + 1)).collect();
    let diag = (0..dim)
        .map(|n| -(params.birth_rate(n) + params.death_rate(n)))
        .collect();
    let em1 = s.exp_m1();
    let defect = (0..dim)
        .map(|n| {
            if n + 1 < dim {
                em1 * params.counted_rate(n)
            } else {
                -params.birth_rate(n)
            }
        })
        .collect();
    Ok(TiltedGenerator {
        s,
        dim,
        sub,
        sup,
        diag,
        tilted_counted,
        defect,
    })
}

impl TiltedGenerator {
    /// `M v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.diag.iter().zip(v).map(|(d, x)| d * x).collect();
        for n in 0..self.dim - 1 {
            out[n + 1] += self.sub[n] * v[n];
            out[n] += self.sup[n] * v[n + 1];
        }
        out
    }

    /// `Mᵀ v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.diag.iter().zip(v).map(|(d, x)| d * x).collect();
        for n in 0..self.dim - 1 {
            out[n] += self.sub[n] * v[n + 1];
            out[n + 1] += self.sup[n] * v[n];
        }
        out
    }

    /// Dense row-major copy, for small cross-checks.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.dim]; self.dim];
        for n in 0..self.dim {
            m[n][n] = self.diag[n];
        }
        for n in 0..self.dim - 1 {
            m[n + 1][n] = self.sub[n];
            m[n][n + 1] = self.sup[n];
        }
        m
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.dim)
            .map(|n| {
                self.diag[n].abs()
                    + if n + 1 < self.dim { self.sub[n] } else { 0.0 }
                    + if n > 0 { self.sup[n - 1] } else { 0.0 }
            })
            .fold(0.0, f64::max)
    }
}

/// Symmetric tridiagonal similar to a [`TiltedGenerator`].
///
/// `S = G M G⁻¹` with `G = diag(g)`, `g_0 = 1`,
/// `g_{n+1}/g_n = sqrt(sup_n / sub_n)`. For a unit eigenvector `v` of `S`,
/// `G⁻¹ v` is a right and `G v` a left eigenvector of `M`. The scale is held
/// as `log g` because it spans hundreds of orders of magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Symmetrized {
    pub matrix: SymTridiag,
    pub log_scale: Vec<f64>,
}

impl Symmetrized {
    pub fn scale(&self) -> Vec<f64> {
        self.log_scale.iter().map(|l| l.exp()).collect()
    }
}

/// Diagonal similarity to a symmetric tridiagonal.
pub fn symmetrize(generator: &TiltedGenerator) -> Result<Symmetrized> {
    let mut off_sq = Vec::with_capacity(generator.dim - 1);
    let mut log_scale = Vec::with_capacity(generator.dim);
    log_scale.push(0.0);
    for n in 0..generator.dim - 1 {
        let (lo, up) = (generator.sub[n], generator.sup[n]);
        let prod = lo * up;
        if !(lo > 0.0 && up > 0.0) || !prod.is_finite() {
            return Err(MaserError::SymmetrizationUndefined {
                index: n,
                value: prod,
            });
        }
        off_sq.push(prod);
        log_scale.push(log_scale[n] + 0.5 * (up.ln() - lo.ln()));
    }
    Ok(Symmetrized {
        matrix: SymTridiag::from_squares(generator.diag.clone(), off_sq),
        log_scale,
    })
}

/// Diagonal restriction of the tilted discrete-time transfer operator: one
/// atom passes and is detected either in the ground state (photon added,
/// weighted by `e^s`) or in the excited state (photon number unchanged).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTiltedTransfer {
    pub s: f64,
    pub dim: usize,
    /// `e^s sin²(phi sqrt(n+1))`, `n -> n+1`
    pub up: Vec<f64>,
    /// `cos²(phi sqrt(n+1))`, `n -> n`
    pub stay: Vec<f64>,
}

pub fn build_discrete(params: &MaserParams, s: f64, dim: usize) -> Result<DiscreteTiltedTransfer> {
    check_dim(dim)?;
    check_finite("s", s)?;
    let es = s.exp();
    let (up, stay) = (0..dim)
        .map(|n| {
            let (sn, cs) = (params.phi() * ((n + 1) as f64).sqrt()).sin_cos();
            (es * sn * sn, cs * cs)
        })
        .unzip();
    Ok(DiscreteTiltedTransfer { s, dim, up, stay })
}

impl DiscreteTiltedTransfer {
    /// One step applied to a (sub-)probability vector. Weight pushed above
    /// the top level is discarded.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for n in 0..self.dim {
            out[n] += self.stay[n] * p[n];
            if n + 1 < self.dim {
                out[n + 1] += self.up[n] * p[n];
            }
        }
        out
    }

    /// `E[e^{s Λ_steps}]` starting from level `initial`.
    pub fn mgf(&self, steps: usize, initial: usize) -> Result<f64> {
        if initial >= self.dim {
            return Err(MaserError::LevelOutOfRange {
                level: initial,
                dim: self.dim,
            });
        }
        let mut p = vec![0.0; self.dim];
        p[initial] = 1.0;
        for _ in 0..steps {
            p = self.apply(&p);
        }
        Ok(p.iter().sum())
    }
}

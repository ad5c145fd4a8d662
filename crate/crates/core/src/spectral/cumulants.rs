use super::lambda_derivative;
use crate::error::{MaserError, Result};
use crate::model::MaserParams;

/// Limiting cumulants `lim C_k(Λ_t)/t = λ^{(k)}(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantEstimates {
    /// Mean rate `λ'(0)`.
    pub m: f64,
    /// Variance rate `λ''(0)`; zero when only the mean was requested.
    pub v: f64,
    /// Orders `3..=k_max`.
    pub higher: Vec<f64>,
    /// Finite-difference step per order `2..=k_max`.
    pub fd_step: Vec<f64>,
    /// Estimated decimal digits lost to cancellation per order `2..=k_max`.
    pub digits_lost: Vec<f64>,
}

impl CumulantEstimates {
    /// Cumulant of order `k` (1-based), if computed.
    pub fn get(&self, k: usize) -> Option<f64> {
        match k {
            1 => Some(self.m),
            2 if !self.fd_step.is_empty() => Some(self.v),
            k if k >= 3 => self.higher.get(k - 3).copied(),
            _ => None,
        }
    }

    /// Orders whose stencil lost more than six significant digits.
    pub fn ill_conditioned(&self) -> Vec<usize> {
        self.digits_lost
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > 6.0)
            .map(|(i, _)| i + 2)
            .collect()
    }
}

/// Central-difference weights for derivative orders 1..=5 of a function
/// sampled at `-r..=r` with unit spacing; all have O(h²) error.
fn stencil(order: usize) -> (&'static [f64], f64) {
    match order {
        1 => (&[-1.0, 0.0, 1.0], 2.0),
        2 => (&[1.0, -2.0, 1.0], 1.0),
        3 => (&[-1.0, 2.0, 0.0, -2.0, 1.0], 2.0),
        4 => (&[1.0, -4.0, 6.0, -4.0, 1.0], 1.0),
        5 => (&[-1.0, 4.0, -5.0, 0.0, 5.0, -4.0, 1.0], 2.0),
        _ => unreachable!("derivative order {order}"),
    }
}

/// Order-`order` derivative of `f` at 0 with step `h`, plus the sum of
/// `|w_i f_i|` entering it (for the cancellation estimate).
fn central_difference<F>(f: &mut F, order: usize, h: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (w, denom) = stencil(order);
    let r = (w.len() / 2) as i64;
    let mut acc = 0.0;
    let mut mag = 0.0;
    for (i, wi) in w.iter().enumerate() {
        if *wi == 0.0 {
            continue;
        }
        let fi = f((i as i64 - r) as f64 * h)?;
        acc += wi * fi;
        mag += (wi * fi).abs();
    }
    let scale = denom * h.powi(order as i32);
    Ok((acc / scale, mag / scale))
}

/// Richardson-refined central difference at steps `h` and `h/2`.
fn refined<F>(f: &mut F, order: usize, h: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (coarse, _) = central_difference(f, order, h)?;
    let (fine, mag) = central_difference(f, order, 0.5 * h)?;
    Ok(((4.0 * fine - coarse) / 3.0, mag))
}

/// Limiting cumulants of orders `1..=k_max` (at most 6).
///
/// The mean rate is exact up to truncation. Order `k >= 2` is the
/// `(k-1)`-th derivative of `λ'` taken by Richardson-refined central
/// differences; `λ'` itself comes from the eigenvectors, which removes one
/// order of differencing.
pub fn cumulants(params: &MaserParams, k_max: usize) -> Result<CumulantEstimates> {
    if !(1..=6).contains(&k_max) {
        return Err(MaserError::InvalidParameter {
            name: "k_max",
            value: k_max as f64,
            reason: "must lie in 1..=6",
        });
    }
    let mut slope = |s: f64| lambda_derivative(params, s);
    let m = slope(0.0)?;
    let mut out = CumulantEstimates {
        m,
        v: 0.0,
        higher: Vec::new(),
        fd_step: Vec::new(),
        digits_lost: Vec::new(),
    };
    if k_max == 1 {
        return Ok(out);
    }

    let (v_rough, _) = central_difference(&mut slope, 1, 1e-3)?;
    let scale = 1.0 / v_rough.abs().max(1.0).sqrt();
    for k in 2..=k_max {
        let order = k - 1;
        let h = scale * 1e-3 * 10f64.powf(0.5 * (order - 1) as f64);
        let (value, mag) = refined(&mut slope, order, h)?;
        let digits = if mag == 0.0 {
            0.0
        } else if value == 0.0 {
            f64::INFINITY
        } else {
            (mag / value.abs()).log10().max(0.0)
        };
        if k == 2 {
            out.v = value;
        } else {
            out.higher.push(value);
        }
        out.fd_step.push(h);
        out.digits_lost.push(digits);
    }
    Ok(out)
}

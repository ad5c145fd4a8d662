//! Principal eigenpair of a tilted generator in flux form.
//!
//! Write `M = K + diag(w)` where `K` has the off-diagonals of `M` and zero
//! column sums, and `w` is the column defect. With the net upward flux
//! `F_n = sub_n r_n - sup_n r_{n+1}`, row `n` of `(M - λ) r = 0` reads
//! `F_{n-1} - F_n + (w_n - λ) r_n = 0`. Sweeping this from both ends never
//! subtracts the large diagonal from the off-diagonals, so the eigenvalue and
//! the eigenvector come out with small relative error even when the gap to
//! the next eigenvalue is far below `eps * ‖M‖`.
//!
//! The sweeps double as a Sturm count: `λ` lies above the top eigenvalue iff
//! every ratio is positive and the twist residual is negative.

use crate::generator::TiltedGenerator;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Perron {
    pub lambda: f64,
    /// `ln r` up to an additive constant.
    pub log_r: Vec<f64>,
}

struct Sweep {
    /// `r_{n+1} / r_n` for `n < twist`, `r_n / r_{n+1}` for `n >= twist`.
    ratio: Vec<f64>,
    residual: f64,
    positive: bool,
}

/// Bottom sweep up to `k` and top sweep down to `k` at trial `lambda`.
fn sweep(g: &TiltedGenerator, lambda: f64, k: usize) -> Sweep {
    let d = g.dim;
    let mut ratio = vec![0.0; d.saturating_sub(1)];
    let mut positive = true;

    // a = F_{n-1} / r_n
    let mut a = 0.0;
    for n in 0..k {
        let phi = a + (g.defect[n] - lambda);
        let x = (g.sub[n] - phi) / g.sup[n];
        positive &= x > 0.0;
        ratio[n] = x;
        a = phi / x;
    }
    // b = F_n / r_n
    let mut b = 0.0;
    for n in (k + 1..d).rev() {
        let chi = b - (g.defect[n] - lambda);
        let y = (g.sup[n - 1] + chi) / g.sub[n - 1];
        positive &= y > 0.0;
        ratio[n - 1] = y;
        b = chi / y;
    }
    Sweep {
        ratio,
        residual: a + (g.defect[k] - lambda) - b,
        positive,
    }
}

fn is_above(sw: &Sweep) -> bool {
    sw.positive && sw.residual < 0.0
}

/// Twist index minimizing `|γ_k|` at a shift known to lie above the top
/// eigenvalue: there the eigenvector has its weight.
fn choose_twist(g: &TiltedGenerator, lambda: f64) -> usize {
    let d = g.dim;
    let mut fwd = vec![0.0; d];
    let mut a = 0.0;
    for n in 0..d {
        fwd[n] = a;
        let phi = a + (g.defect[n] - lambda);
        if n + 1 < d {
            a = phi / ((g.sub[n] - phi) / g.sup[n]);
        }
    }
    let mut best = (f64::INFINITY, 0);
    let mut b = 0.0;
    for k in (0..d).rev() {
        let gamma = (fwd[k] + (g.defect[k] - lambda) - b).abs();
        if gamma < best.0 {
            best = (gamma, k);
        }
        if k > 0 {
            let chi = b - (g.defect[k] - lambda);
            b = chi / ((g.sup[k - 1] + chi) / g.sub[k - 1]);
        }
    }
    best.1
}

/// Refines the top eigenpair of `g` from a bracket `(lo, hi)` that the
/// symmetric solver believes contains it, to within `slack` either way.
pub(crate) fn perron(g: &TiltedGenerator, lo: f64, hi: f64, slack: f64) -> Option<Perron> {
    let mut hi = hi + slack;
    let mut widen = slack.max(f64::MIN_POSITIVE);
    let k0 = g.dim - 1;
    for _ in 0..64 {
        if is_above(&sweep(g, hi, k0)) {
            break;
        }
        widen *= 2.0;
        hi += widen;
    }
    let k = choose_twist(g, hi);
    if !is_above(&sweep(g, hi, k)) {
        return None;
    }
    let mut lo = lo - slack;
    widen = slack.max(f64::MIN_POSITIVE);
    for _ in 0..64 {
        if !is_above(&sweep(g, lo, k)) {
            break;
        }
        widen *= 2.0;
        lo -= widen;
    }
    for _ in 0..2100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if is_above(&sweep(g, mid, k)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let sw = sweep(g, hi, k);
    let mut log_r = vec![0.0; g.dim];
    for n in (0..k).rev() {
        log_r[n] = log_r[n + 1] - sw.ratio[n].ln();
    }
    for n in k + 1..g.dim {
        log_r[n] = log_r[n - 1] - sw.ratio[n - 1].ln();
    }
    Some(Perron { lambda: hi, log_r })
}

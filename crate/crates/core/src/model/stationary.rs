use super::MaserParams;
use crate::error::{MaserError, Result};

/// Stationary photon-number law of the truncated chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub dim: usize,
    /// Unnormalized `log rho(n)` with `log rho(0) = 0`.
    pub log_weights: Vec<f64>,
    pub probs: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// Probability carried by the last 5% of levels (at least one level).
    pub tail_mass: f64,
}

impl StationaryDistribution {
    /// Levels that are strict local maxima of the law; level 0 counts when it
    /// exceeds level 1.
    pub fn local_maxima(&self) -> Vec<usize> {
        let p = &self.probs;
        (0..self.dim)
            .filter(|&n| {
                let left = n == 0 || p[n] > p[n - 1];
                let right = n + 1 == self.dim || p[n] > p[n + 1];
                left && right
            })
            .collect()
    }
}

const GROWTH: f64 = 1.5;
const INITIAL_DIM: usize = 16;

/// Default truncation cap, `100 max(1, nex)` levels.
pub(crate) fn default_cap(nex: f64) -> usize {
    (100.0 * nex.max(1.0)).ceil() as usize
}

/// Stationary law via the log-space product formula with adaptive truncation.
pub fn stationary(params: &MaserParams, tail_tol: f64) -> Result<StationaryDistribution> {
    stationary_capped(params, tail_tol, default_cap(params.nex()))
}

/// As [`stationary`] with an explicit cap on the truncation dimension.
pub fn stationary_capped(
    params: &MaserParams,
    tail_tol: f64,
    hard_cap: usize,
) -> Result<StationaryDistribution> {
    if !(params.nu() > 0.0) {
        return Err(MaserError::InvalidParameter {
            name: "nu",
            value: params.nu(),
            reason: "stationary law needs nu > 0",
        });
    }
    if !(tail_tol > 0.0 && tail_tol <= 1e-6) {
        return Err(MaserError::InvalidParameter {
            name: "tail_tol",
            value: tail_tol,
            reason: "must lie in (0, 1e-6]",
        });
    }

    let mut log_weights = vec![0.0];
    let mut dim = INITIAL_DIM.min(hard_cap.max(2));
    loop {
        extend_log_weights(params, &mut log_weights, dim);
        let (probs, tail_mass, beyond) = normalize(params, &log_weights);
        if tail_mass < tail_tol && beyond < tail_tol {
            return Ok(summarize(log_weights, probs, tail_mass));
        }
        if dim >= hard_cap {
            return Err(MaserError::TruncationNotConverged {
                dim,
                tail_mass: tail_mass.max(beyond),
            });
        }
        dim = ((dim as f64 * GROWTH).ceil() as usize).min(hard_cap);
    }
}

fn extend_log_weights(params: &MaserParams, log_weights: &mut Vec<f64>, dim: usize) {
    let nu = params.nu();
    for n in log_weights.len()..dim {
        // rho(n) / rho(n-1) = b_{n-1} / d_n
        let ratio = params.birth_rate(n - 1) / ((nu + 1.0) * n as f64);
        let prev = log_weights[n - 1];
        log_weights.push(prev + ratio.ln());
    }
}

/// Returns normalized probabilities, the mass on the last 5% of levels and a
/// bound on the mass beyond the truncation.
fn normalize(params: &MaserParams, log_weights: &[f64]) -> (Vec<f64>, f64, f64) {
    let dim = log_weights.len();
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);

    let last = (dim as f64 * 0.05).ceil().max(1.0) as usize;
    let tail_mass: f64 = probs[dim - last..].iter().sum();

    // For k >= dim the ratio rho(k+1)/rho(k) is at most (nu + nex/(k+1))/(nu+1),
    // which is below one once dim exceeds nex.
    let nu = params.nu();
    let r = (nu + params.nex() / dim as f64) / (nu + 1.0);
    let beyond = if r < 1.0 {
        probs[dim - 1] * r / (1.0 - r)
    } else {
        f64::INFINITY
    };
    (probs, tail_mass, beyond)
}

fn summarize(log_weights: Vec<f64>, probs: Vec<f64>, tail_mass: f64) -> StationaryDistribution {
    let mean: f64 = probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    let variance: f64 = probs
        .iter()
        .enumerate()
        .map(|(n, p)| (n as f64 - mean).powi(2) * p)
        .sum();
    StationaryDistribution {
        dim: probs.len(),
        log_weights,
        probs,
        mean,
        variance,
        tail_mass,
    }
}

/// Long-run mean count rate computed two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCountRate {
    /// `sum_n pi_n c_n`
    pub from_counts: f64,
    /// `<n> - nu`
    pub from_mean: f64,
}

impl MeanCountRate {
    pub fn value(&self) -> f64 {
        self.from_counts
    }
}

const IDENTITY_REL_TOL: f64 = 1e-8;
const IDENTITY_ABS_FLOOR: f64 = 1e-12;

/// Mean number of ground-state atoms per unit time in the stationary regime.
///
/// Balance of the photon number gives `sum_n pi_n c_n = <n> - nu`; both sides
/// are returned and checked against each other.
pub fn mean_count_rate(params: &MaserParams, ss: &StationaryDistribution) -> Result<MeanCountRate> {
    let from_counts: f64 = ss
        .probs
        .iter()
        .enumerate()
        .map(|(n, p)| p * params.counted_rate(n))
        .sum();
    let from_mean = ss.mean - params.nu();
    let scale = from_counts.abs().max(from_mean.abs());
    if (from_counts - from_mean).abs() > IDENTITY_REL_TOL * scale + IDENTITY_ABS_FLOOR {
        return Err(MaserError::IdentityViolation {
            from_counts,
            from_mean,
        });
    }
    Ok(MeanCountRate {
        from_counts,
        from_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(nex: f64, alpha: f64) -> MaserParams {
        MaserParams::from_alpha(nex, alpha, 0.15).unwrap()
    }

    #[test]
    fn thermal_state_is_geometric() {
        let p = params(0.0, 0.0);
        let ss = stationary(&p, 1e-14).unwrap();
        let q: f64 = 0.15 / 1.15;
        let dim = ss.dim as i32;
        let norm = (1.0 - q) / (1.0 - q.powi(dim));
        for (n, pr) in ss.probs.iter().enumerate() {
            assert!((pr - norm * q.powi(n as i32)).abs() < 1e-12);
        }
        assert!((ss.mean - 0.15).abs() < 1e-12);
    }

    #[test]
    fn bistable_law_has_two_peaks() {
        let ss = stationary(&params(150.0, 6.6), 1e-14).unwrap();
        assert_eq!(ss.local_maxima().len(), 2);
        let ss = stationary(&params(150.0, 3.0), 1e-14).unwrap();
        assert_eq!(ss.local_maxima().len(), 1);
    }

    #[test]
    fn unimodal_mean_matches_independent_sum() {
        let p = params(150.0, 3.0);
        let ss = stationary(&p, 1e-14).unwrap();
        // independent oracle: direct product formula over a generous fixed
        // range, summed with Kahan compensation
        let phi = p.phi();
        let mut w = vec![1.0f64];
        for k in 1..1500 {
            let kf = k as f64;
            let f = 0.15 / 1.15 + 150.0 / 1.15 * (phi * kf.sqrt()).sin().powi(2) / kf;
            let last = *w.last().unwrap();
            w.push(last * f);
        }
        let (mut z, mut s1, mut c0, mut c1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for (n, wn) in w.iter().enumerate() {
            let y = wn - c0;
            let t = z + y;
            c0 = (t - z) - y;
            z = t;
            let y = n as f64 * wn - c1;
            let t = s1 + y;
            c1 = (t - s1) - y;
            s1 = t;
        }
        let mean = s1 / z;
        assert!((ss.mean - mean).abs() < 1e-10 * mean);
    }

    #[test]
    fn detailed_balance_holds() {
        let p = params(150.0, 6.6);
        let ss = stationary(&p, 1e-14).unwrap();
        for n in 0..ss.dim - 1 {
            if ss.probs[n] > 1e-300 {
                let lhs = ss.probs[n] * p.birth_rate(n);
                let rhs = ss.probs[n + 1] * p.death_rate(n + 1);
                assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(rhs), "level {n}");
            }
        }
        let total: f64 = ss.probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(ss.tail_mass < 1e-14);
    }

    #[test]
    fn mean_rate_two_forms_agree() {
        for p in [params(150.0, 6.6), params(10.0, 2.0)] {
            let ss = stationary(&p, 1e-14).unwrap();
            let r = mean_count_rate(&p, &ss).unwrap();
            assert!((r.from_counts - r.from_mean).abs() <= 1e-8 * r.from_counts);
        }
    }

    #[test]
    fn no_counts_without_atoms_or_rotation() {
        let p = params(0.0, 0.0);
        let r = mean_count_rate(&p, &stationary(&p, 1e-14).unwrap()).unwrap();
        assert_eq!(r.from_counts, 0.0);
        let p = MaserParams::new(150.0, 0.0, 0.15).unwrap();
        let ss = stationary(&p, 1e-14).unwrap();
        let r = mean_count_rate(&p, &ss).unwrap();
        assert_eq!(r.from_counts, 0.0);
        assert!(r.from_mean.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs_and_caps() {
        let p = MaserParams::from_alpha(10.0, 2.0, 0.0).unwrap();
        assert!(stationary(&p, 1e-10).is_err());
        let p = params(10.0, 2.0);
        assert!(stationary(&p, 1e-3).is_err());
        assert!(stationary(&p, 0.0).is_err());
        assert!(matches!(
            stationary_capped(&p, 1e-14, 12),
            Err(MaserError::TruncationNotConverged { dim: 12, .. })
        ));
        // a hot bath with the default cap of 100 levels cannot reach 1e-14
        let hot = MaserParams::new(0.0, 0.0, 10.0).unwrap();
        assert!(matches!(
            stationary(&hot, 1e-14),
            Err(MaserError::TruncationNotConverged { .. })
        ));
    }
}

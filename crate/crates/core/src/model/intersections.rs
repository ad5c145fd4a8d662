//! Crossings of the rescaled birth and death curves in the large-pumping limit.
//!
//! With `theta = alpha sqrt((k+1)/nex)`, the birth rate minus its thermal part
//! scales as `sin²(theta)` and the death rate minus the same thermal part as
//! `theta²/alpha²`. Crossings solve `|sin theta| = theta/alpha`; a crossing
//! where the birth curve passes from above to below is a maximum of the
//! stationary law, the opposite direction a minimum.

/// Classification of a crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntersectionKind {
    Max,
    Min,
    /// Tangential contact without a sign change.
    Degenerate,
}

impl IntersectionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Max => "max",
            Self::Min => "min",
            Self::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    pub theta: f64,
    pub kind: IntersectionKind,
}

impl Intersection {
    /// Photon number `nex theta² / alpha²` at which the crossing sits.
    pub fn level(&self, nex: f64, alpha: f64) -> f64 {
        nex * self.theta * self.theta / (alpha * alpha)
    }
}

const ROOT_TOL: f64 = 1e-12;
const TANGENT_TOL: f64 = 1e-9;
const SCAN_STEP: f64 = 1e-3;
const THETA_MIN: f64 = 1e-6;

/// All nontrivial crossings in `(0, 3 pi alpha]`.
pub fn rate_intersections(alpha: f64, nu: f64) -> Vec<Intersection> {
    let _ = nu; // the limiting crossing condition does not involve the bath
    rate_intersections_up_to(alpha, 3.0 * std::f64::consts::PI * alpha)
}

/// All nontrivial crossings in `(0, theta_max]`, ordered by `theta`.
pub fn rate_intersections_up_to(alpha: f64, theta_max: f64) -> Vec<Intersection> {
    if !(alpha > 0.0) || !(theta_max > 0.0) {
        return Vec::new();
    }
    let a2 = alpha * alpha;
    let f = |t: f64| t.sin().powi(2) - t * t / a2;
    let df = |t: f64| (2.0 * t).sin() - 2.0 * t / a2;
    // |sin| <= 1 < theta/alpha beyond alpha
    let upper = theta_max.min(alpha * (1.0 + 1e-9));
    if upper <= THETA_MIN {
        return Vec::new();
    }

    let steps = ((upper - THETA_MIN) / SCAN_STEP).ceil().max(1.0) as usize;
    let h = (upper - THETA_MIN) / steps as f64;
    let mut out = Vec::new();
    let mut t0 = THETA_MIN;
    let mut f0 = f(t0);
    for i in 1..=steps {
        let t1 = if i == steps {
            upper
        } else {
            THETA_MIN + i as f64 * h
        };
        let f1 = f(t1);
        if f0 == 0.0 && i > 1 {
            // landed exactly on a root at the previous scan point; handled there
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            let theta = bisect(&f, t0, t1);
            let kind = if f0 > 0.0 {
                IntersectionKind::Max
            } else {
                IntersectionKind::Min
            };
            out.push(Intersection { theta, kind });
        } else if f1 == 0.0 {
            let kind = match (f0 > 0.0, f(t1 + 0.5 * h) > 0.0) {
                (true, false) => IntersectionKind::Max,
                (false, true) => IntersectionKind::Min,
                _ => IntersectionKind::Degenerate,
            };
            out.push(Intersection { theta: t1, kind });
        } else if df(t0).signum() != df(t1).signum() {
            // an extremum of f inside the cell may touch zero without a sign change
            let te = bisect(&df, t0, t1);
            if f(te).abs() < TANGENT_TOL {
                out.push(Intersection {
                    theta: te,
                    kind: IntersectionKind::Degenerate,
                });
            }
        }
        t0 = t1;
        f0 = f1;
    }
    out
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

//! Symmetric tridiagonal eigenvalues by Sturm-sequence bisection.

/// Real symmetric tridiagonal matrix stored by diagonal and squared
/// off-diagonal. The squares are what the Sturm recurrence consumes, so they
/// are kept exactly as supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub off_sq: Vec<f64>,
}

impl SymTridiag {
    /// `off_sq` has one entry fewer than `diag`; entries must be non-negative.
    pub fn from_squares(diag: Vec<f64>, off_sq: Vec<f64>) -> Self {
        assert_eq!(off_sq.len() + 1, diag.len().max(1));
        let off = off_sq.iter().map(|e| e.sqrt()).collect();
        Self { diag, off, off_sq }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1] } else { 0.0 }
                + if i + 1 < n { self.off[i] } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    fn pivmin(&self) -> f64 {
        let emax = self.off_sq.iter().copied().fold(1.0, f64::max);
        f64::MIN_POSITIVE * emax
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.dim() {
            q = (self.diag[i] - x) - self.off_sq[i - 1] / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Number of eigenvalues at or above `x`.
    pub fn count_at_or_above(&self, x: f64) -> usize {
        self.dim() - self.count_below(x)
    }

    /// Bracket `(lo, hi)` around the `k`-th largest eigenvalue (0-based):
    /// at least `k+1` eigenvalues lie at or above `lo` and at most `k` at or
    /// above `hi`.
    pub fn bracket_kth_largest(&self, k: usize) -> (f64, f64) {
        assert!(k < self.dim());
        let (glo, ghi) = self.gershgorin();
        let norm = glo.abs().max(ghi.abs());
        let slack = 2.0 * f64::EPSILON * norm + self.pivmin();
        let mut lo = glo - slack;
        let mut hi = ghi + slack;
        let abs_tol = 1e-3 * f64::EPSILON * norm + 4.0 * f64::MIN_POSITIVE;
        for _ in 0..2000 {
            let width = hi - lo;
            if width <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) || width <= abs_tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_at_or_above(mid) > k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, hi)
    }

    /// `k`-th largest eigenvalue, 0-based.
    pub fn kth_largest(&self, k: usize) -> f64 {
        let (lo, hi) = self.bracket_kth_largest(k);
        0.5 * (lo + hi)
    }

    /// All eigenvalues in descending order.
    pub fn eigenvalues_desc(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.kth_largest(k)).collect()
    }
}

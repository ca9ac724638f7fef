//! Central finite-difference gradient checks.
//!
//! These only ever call forward passes, so they stay independent of the
//! backward rules they audit.

/// Outcome of comparing analytic gradients with finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Entries that failed both the relative and the absolute tolerance.
    pub failures: usize,
    pub checked: usize,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

pub const FD_EPS: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_TOL: f64 = 1e-6;

/// Compares `analytic` against central differences of `f` around `x`.
///
/// An entry passes when its relative error is below [`REL_TOL`] or its
/// absolute error is below [`ABS_TOL`] (gradients near zero).
pub fn check(x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> GradCheck {
    assert_eq!(x.len(), analytic.len());
    let mut probe = x.to_vec();
    let mut out = GradCheck { max_rel_err: 0.0, max_abs_err: 0.0, failures: 0, checked: x.len() };
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + FD_EPS;
        let up = f(&probe);
        probe[i] = orig - FD_EPS;
        let down = f(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * FD_EPS);
        let abs = (numeric - analytic[i]).abs();
        let rel = abs / numeric.abs().max(analytic[i].abs()).max(f64::MIN_POSITIVE);
        out.max_abs_err = out.max_abs_err.max(abs);
        if abs > ABS_TOL {
            out.max_rel_err = out.max_rel_err.max(rel);
            if rel >= REL_TOL {
                out.failures += 1;
            }
        }
    }
    out
}

//! Central finite-difference verification of hand-written gradients.

use std::hash::Hasher;

use crate::{Error, Result};

/// Denominator floor for [`relative_error`]; keeps vanishing gradients from
/// turning round-off into large relative errors.
pub const REL_ERR_FLOOR: f64 = 1e-8;

/// `|a - n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

fn central_difference<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    theta: &mut [f64],
    i: usize,
    eps: f64,
) -> Result<f64> {
    let orig = theta[i];
    theta[i] = orig + eps;
    let plus = f(theta);
    theta[i] = orig - eps;
    let minus = f(theta);
    theta[i] = orig;
    if !plus.is_finite() || !minus.is_finite() {
        return Err(Error::numeric(format!("objective is non-finite near coordinate {i}")));
    }
    Ok((plus - minus) / (2.0 * eps))
}

/// Compares `analytic` to central differences of `f` at `params`, coordinate by
/// coordinate, and returns the worst relative error.
pub fn grad_check<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> Result<f64> {
    if params.len() != analytic.len() {
        return Err(Error::arg("grad_check: gradient length differs from parameter length"));
    }
    if !(eps > 0.0) {
        return Err(Error::arg("grad_check: eps must be positive"));
    }
    if analytic.iter().any(|g| !g.is_finite()) {
        return Err(Error::numeric("grad_check: analytic gradient is non-finite"));
    }
    let mut theta = params.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        let numeric = central_difference(&mut f, &mut theta, i, eps)?;
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

/// Outcome of [`grad_check_piecewise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Coordinate attaining `max_rel_err`.
    pub worst_index: usize,
    /// Coordinates compared at the requested step.
    pub at_requested_eps: usize,
    /// Coordinates whose ±eps probe crossed a kink and were compared at a
    /// smaller step that stays inside one linear piece.
    pub refined: usize,
    /// Coordinates for which no kink-free step above `1e-9` was found; these
    /// do not contribute to `max_rel_err`.
    pub unresolved: usize,
}

impl GradCheckReport {
    pub fn checked(&self) -> usize {
        self.at_requested_eps + self.refined
    }
}

/// Finite-difference check for piecewise-smooth objectives (ReLU, |·|).
///
/// `f` returns the objective and a signature of its activation pattern (which
/// ReLUs are open, which residual signs are positive). A coordinate whose
/// `θ ± eps` probes change the signature straddles a kink; its step is shrunk
/// by factors of ten until both probes share the base pattern, so the
/// comparison is made inside a single smooth piece.
pub fn grad_check_piecewise<F: FnMut(&[f64]) -> (f64, u64)>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> Result<GradCheckReport> {
    if params.len() != analytic.len() {
        return Err(Error::arg("grad_check: gradient length differs from parameter length"));
    }
    if !(eps > 0.0) {
        return Err(Error::arg("grad_check: eps must be positive"));
    }
    let mut theta = params.to_vec();
    let (_, base_sig) = f(&theta);
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
        at_requested_eps: 0,
        refined: 0,
        unresolved: 0,
    };
    for i in 0..theta.len() {
        let orig = theta[i];
        let mut step = eps;
        let mut numeric = None;
        while step >= 1e-9 {
            theta[i] = orig + step;
            let (plus, sig_p) = f(&theta);
            theta[i] = orig - step;
            let (minus, sig_m) = f(&theta);
            theta[i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::numeric(format!("objective is non-finite near coordinate {i}")));
            }
            if sig_p == base_sig && sig_m == base_sig {
                numeric = Some((plus - minus) / (2.0 * step));
                break;
            }
            step /= 10.0;
        }
        match numeric {
            Some(n) => {
                if step == eps {
                    report.at_requested_eps += 1;
                } else {
                    report.refined += 1;
                }
                let e = relative_error(analytic[i], n);
                if e > report.max_rel_err {
                    report.max_rel_err = e;
                    report.worst_index = i;
                }
            }
            None => report.unresolved += 1,
        }
    }
    Ok(report)
}

/// FNV-1a accumulator for activation-pattern signatures.
#[derive(Debug, Clone)]
pub struct PatternHasher(u64);

impl Default for PatternHasher {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl PatternHasher {
    pub fn push_bool(&mut self, b: bool) {
        self.write_u8(b as u8);
    }

    /// Records the sign pattern (`> 0`) of every value.
    pub fn push_signs(&mut self, values: &[f64]) {
        for &v in values {
            self.push_bool(v > 0.0);
        }
    }
}

impl Hasher for PatternHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

//! Central finite-difference verification of analytic gradients.

use super::Parameterized;
use crate::scalar::Scalar;

/// Denominator floor for the relative error, so entries whose true gradient
/// is (near) zero are judged on an absolute scale. Central differences with
/// a 1e-5 step on O(10) losses carry ~1e-10 of rounding noise, which this
/// floor keeps below 1e-4.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SlotCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub slots: Vec<SlotCheck>,
}

impl GradReport {
    pub fn max_rel_error(&self) -> f64 {
        self.slots.iter().map(|s| s.max_rel_error).fold(0.0, f64::max)
    }

    /// Slots whose worst entry exceeds `tolerance`.
    pub fn failures(&self, tolerance: f64) -> Vec<&SlotCheck> {
        self.slots
            .iter()
            .filter(|s| s.max_rel_error.is_nan() || s.max_rel_error > tolerance)
            .collect()
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.failures(tolerance).is_empty()
    }
}

impl std::fmt::Display for GradReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.slots {
            writeln!(
                f,
                "{:<32} n={:<6} rel={:.3e} abs={:.3e}",
                s.name, s.checked, s.max_rel_error, s.max_abs_error
            )?;
        }
        Ok(())
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares the gradient written by `loss_and_grad` against central
/// differences of `loss` with step `fd_step`.
///
/// `loss_and_grad` receives parameters with zeroed gradients and must
/// accumulate into them. At most `max_per_slot` entries of each slot are
/// probed, spread evenly over the slot; `None` probes every entry.
pub fn grad_check<T, P, G, L>(
    params: &mut P,
    mut loss_and_grad: G,
    mut loss: L,
    fd_step: f64,
    max_per_slot: Option<usize>,
) -> GradReport
where
    T: Scalar,
    P: Parameterized<T>,
    G: FnMut(&mut P) -> T,
    L: FnMut(&P) -> T,
{
    params.zero_grads();
    loss_and_grad(params);
    let analytic: Vec<Vec<T>> = params
        .slots()
        .iter()
        .map(|s| s.grad.as_slice().to_vec())
        .collect();
    params.zero_grads();

    let h = T::of(fd_step);
    let mut report = GradReport { slots: Vec::new() };
    for (si, grads) in analytic.iter().enumerate() {
        let n = grads.len();
        let stride = match max_per_slot {
            Some(cap) if cap > 0 && n > cap => n.div_ceil(cap),
            _ => 1,
        };
        let mut check = SlotCheck {
            name: params.slots()[si].name.clone(),
            checked: 0,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
        };
        for i in (0..n).step_by(stride) {
            let orig = params.slots()[si].value.as_slice()[i];
            params.slots_mut()[si].value.as_mut_slice()[i] = orig + h;
            let up = loss(params);
            params.slots_mut()[si].value.as_mut_slice()[i] = orig - h;
            let down = loss(params);
            params.slots_mut()[si].value.as_mut_slice()[i] = orig;
            let numeric = ((up - down) / (h + h)).as_f64();
            let a = grads[i].as_f64();
            check.checked += 1;
            check.max_abs_error = check.max_abs_error.max((a - numeric).abs());
            let rel = relative_error(a, numeric);
            if rel.is_nan() || rel > check.max_rel_error {
                check.max_rel_error = if rel.is_nan() { f64::INFINITY } else { rel };
            }
        }
        report.slots.push(check);
    }
    report
}

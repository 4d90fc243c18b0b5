//! Central finite-difference verification of analytic gradients.

use super::mlp::MlpParams;
use super::objective::{loss, loss_grad, Objective};
use crate::error::Result;

/// Perturbation used for central differences.
pub const FD_STEP: f64 = 1e-5;
/// Gradient entries smaller than this are compared in absolute terms.
pub const FD_ABS_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    /// Parameter index where the largest error occurred.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub n_checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `analytic` against central differences of `f` at `point`.
///
/// The per-entry error is `|a − n| / max(|a|, |n|, FD_ABS_FLOOR)`; the check
/// passes when the maximum over all entries is below `tolerance`.
pub fn check_gradient(point: &[f64], f: impl Fn(&[f64]) -> f64, analytic: &[f64], tolerance: f64) -> FdReport {
    assert_eq!(point.len(), analytic.len(), "gradient length mismatch");
    let mut probe = point.to_vec();
    let mut report = FdReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        n_checked: point.len(),
        tolerance,
        passed: true,
    };
    for i in 0..point.len() {
        let orig = probe[i];
        probe[i] = orig + FD_STEP;
        let up = f(&probe);
        probe[i] = orig - FD_STEP;
        let down = f(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_ABS_FLOOR);
        if !(err <= report.max_rel_error) {
            report.max_rel_error = err;
            report.worst_index = i;
            report.analytic = a;
            report.numeric = numeric;
        }
    }
    report.passed = report.max_rel_error < tolerance;
    report
}

/// Checks the parameter gradient of `objective` on a single sample.
pub fn finite_diff_check(
    objective: Objective,
    params: &MlpParams,
    center: Option<&[f64]>,
    x: &[f64],
    label: u8,
    tolerance: f64,
) -> Result<FdReport> {
    let (_, analytic) = loss_grad(objective, params, center, x, label)?;
    // validate once so the closure can unwrap
    loss(objective, params, center, x, label)?;
    let f = |theta: &[f64]| {
        let mut p = params.clone();
        p.values_mut().copy_from_slice(theta);
        loss(objective, &p, center, x, label).expect("validated above")
    };
    Ok(check_gradient(params.values(), f, &analytic, tolerance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::losses::hsc_loss_grad;
    use crate::rng::Rng;

    #[test]
    fn bce_linear_head() {
        let mut rng = Rng::new(4);
        let p = MlpParams::init(
            vec![crate::models::LayerSpec::new(6, 1, crate::models::Activation::Identity)],
            &mut rng,
        )
        .unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        for y in [0, 1] {
            let r = finite_diff_check(Objective::Bce, &p, None, &x, y, 1e-6).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn hsc_at_origin() {
        let phi = [0.0, 0.0, 0.0];
        let (_, g) = hsc_loss_grad(&phi, 0);
        let r = check_gradient(&phi, |v| hsc_loss_grad(v, 0).0, &g, 1e-4);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let mut rng = Rng::new(8);
        let p = MlpParams::classifier(4, 6, &mut rng).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let (_, mut g) = loss_grad(Objective::Bce, &p, None, &x, 1).unwrap();
        g[3] += 0.1;
        let f = |theta: &[f64]| {
            let mut q = p.clone();
            q.set_values(theta).unwrap();
            loss(Objective::Bce, &q, None, &x, 1).unwrap()
        };
        let r = check_gradient(p.values(), f, &g, 1e-4);
        assert!(!r.passed);
        assert_eq!(r.worst_index, 3);
    }
}

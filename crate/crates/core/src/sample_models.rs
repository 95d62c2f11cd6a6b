//! Thermal-state geometry of one-parameter sample families.
//!
//! Every family is a set of Gibbs states indexed by temperature `theta`
//! (Boltzmann constant fixed to one, so `theta` is measured in the same
//! energy units as the gap). The reference metric is the quantum Fisher
//! information of an energy measurement, `h(theta) = C(theta) / theta^2`.
//!
//! The flat coordinate `lambda` satisfies `d lambda / d theta = sqrt(h)`, so the
//! thermodynamic length between two temperatures is `|lambda(t1) - lambda(t0)|`.
//! Integration constants: `lambda(0) = 0` for the gapped families and
//! `lambda(1) = 0` for the ideal reservoir.
//!
//! | family          | `h(theta)`                               | `lambda(theta)`                 | range       |
//! |-----------------|------------------------------------------|---------------------------------|-------------|
//! | ideal reservoir | `V / theta^2`                            | `sqrt(V) ln theta`              | `(-inf, inf)` |
//! | spin-1/2        | `(e/theta^2)^2 / (4 cosh^2(e/2theta))`   | `2 atan(exp(-e/2theta))`        | `[0, pi/2]`  |
//! | bosonic mode    | `(e/theta^2)^2 / (4 sinh^2(e/2theta))`   | `-ln tanh(e/4theta)`            | `[0, inf)`   |

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

/// Below this value of `theta / gap` the gapped metrics are evaluated in log
/// space; `(gap/theta^2)^2` alone overflows for `theta/gap < 1e-77`.
const LOG_SPACE_CROSSOVER: f64 = 1e-3;

/// A one-parameter family of thermal states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleModel {
    /// Heat reservoir with constant heat capacity `capacity_scale`.
    IdealReservoir {
        #[serde(default = "unit_capacity")]
        capacity_scale: f64,
    },
    /// Two-level system with energy gap `gap`.
    SpinHalf { gap: f64 },
    /// Single bosonic mode with energy quantum `gap`.
    BosonMode { gap: f64 },
}

fn unit_capacity() -> f64 {
    1.0
}

impl SampleModel {
    /// The ideal reservoir with unit heat capacity.
    pub fn reservoir() -> Self {
        SampleModel::IdealReservoir { capacity_scale: 1.0 }
    }

    pub fn spin_half(gap: f64) -> Result<Self> {
        let m = SampleModel::SpinHalf { gap };
        m.validate()?;
        Ok(m)
    }

    pub fn boson_mode(gap: f64) -> Result<Self> {
        let m = SampleModel::BosonMode { gap };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SampleModel::IdealReservoir { capacity_scale } => {
                if !(capacity_scale.is_finite() && capacity_scale > 0.0) {
                    return Err(config(format!(
                        "reservoir capacity_scale must be positive, got {capacity_scale}"
                    )));
                }
            }
            SampleModel::SpinHalf { gap } | SampleModel::BosonMode { gap } => {
                if !(gap.is_finite() && gap > 0.0) {
                    return Err(config(format!("energy gap must be positive, got {gap}")));
                }
            }
        }
        Ok(())
    }

    /// Short lowercase label used in artifact headers.
    pub fn label(&self) -> &'static str {
        match self {
            SampleModel::IdealReservoir { .. } => "reservoir",
            SampleModel::SpinHalf { .. } => "spin",
            SampleModel::BosonMode { .. } => "boson",
        }
    }

    /// Range of the flat coordinate, `(lower, upper)`.
    pub fn lambda_range(&self) -> (f64, f64) {
        match self {
            SampleModel::IdealReservoir { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            SampleModel::SpinHalf { .. } => (0.0, FRAC_PI_2),
            SampleModel::BosonMode { .. } => (0.0, f64::INFINITY),
        }
    }

    /// Quantum Fisher information `h(theta)`.
    pub fn qfi(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.qfi_unchecked(theta))
    }

    pub(crate) fn qfi_unchecked(&self, theta: f64) -> f64 {
        match *self {
            SampleModel::IdealReservoir { capacity_scale } => capacity_scale / (theta * theta),
            SampleModel::SpinHalf { gap } => spin_qfi(gap, theta),
            SampleModel::BosonMode { gap } => boson_qfi(gap, theta),
        }
    }

    /// Heat capacity `C(theta) = theta^2 h(theta)`.
    pub fn heat_capacity(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(match *self {
            SampleModel::IdealReservoir { capacity_scale } => capacity_scale,
            _ => theta * theta * self.qfi_unchecked(theta),
        })
    }

    /// Flat coordinate `lambda(theta)`.
    pub fn lambda(&self, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        Ok(self.lambda_unchecked(theta))
    }

    pub(crate) fn lambda_unchecked(&self, theta: f64) -> f64 {
        match *self {
            SampleModel::IdealReservoir { capacity_scale } => capacity_scale.sqrt() * theta.ln(),
            SampleModel::SpinHalf { gap } => {
                // pi - 2 atan(e^a) == 2 atan(e^-a), without the cancellation
                2.0 * (-gap / (2.0 * theta)).exp().atan()
            }
            SampleModel::BosonMode { gap } => {
                // -ln tanh(u) = -ln(1 - 2/(e^{2u} + 1))
                let u = gap / (4.0 * theta);
                -(-2.0 / ((2.0 * u).exp() + 1.0)).ln_1p()
            }
        }
    }

    /// Inverse of [`SampleModel::lambda`].
    pub fn theta_of_lambda(&self, lam: f64) -> Result<f64> {
        let (lo, hi) = self.lambda_range();
        if !(lam.is_finite() && lam > lo && lam < hi) {
            return Err(domain(format!(
                "lambda = {lam} outside the open range ({lo}, {hi}) of the {} model",
                self.label()
            )));
        }
        let theta = self.theta_of_lambda_closed(lam);
        if theta.is_finite() && theta > 0.0 {
            Ok(theta)
        } else {
            self.theta_by_bisection(lam)
        }
    }

    pub(crate) fn theta_of_lambda_closed(&self, lam: f64) -> f64 {
        match *self {
            SampleModel::IdealReservoir { capacity_scale } => (lam / capacity_scale.sqrt()).exp(),
            SampleModel::SpinHalf { gap } => {
                // tan(lam/2) = e^{-a}, and -ln tan(pi/4 - t) = 2 atanh(tan t)
                let t = ((FRAC_PI_2 - lam) / 2.0).tan();
                gap / (4.0 * t.atanh())
            }
            SampleModel::BosonMode { gap } => {
                // atanh(y) for y = e^{-lam}, written with expm1 so small lam keeps precision
                let y = (-lam).exp();
                let artanh = 0.5 * (y.ln_1p() - (-(-lam).exp_m1()).ln());
                gap / (4.0 * artanh)
            }
        }
    }

    fn theta_by_bisection(&self, lam: f64) -> Result<f64> {
        let (mut lo, mut hi) = (f64::MIN_POSITIVE, 1.0);
        while self.lambda_unchecked(hi) < lam {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(domain(format!("cannot invert lambda = {lam}")));
            }
        }
        while self.lambda_unchecked(lo) > lam {
            lo /= 2.0;
            if lo == 0.0 {
                return Err(domain(format!("cannot invert lambda = {lam}")));
            }
        }
        for _ in 0..2000 {
            let mid = if hi / lo > 4.0 {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
            if mid <= lo || mid >= hi {
                break;
            }
            if self.lambda_unchecked(mid) < lam {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Thermodynamic length between two temperatures.
    pub fn geodesic_distance(&self, theta0: f64, theta1: f64) -> Result<f64> {
        Ok((self.lambda(theta1)? - self.lambda(theta0)?).abs())
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("temperature must be positive and finite, got {theta}")))
    }
}

fn spin_qfi(gap: f64, theta: f64) -> f64 {
    let a = gap / (2.0 * theta);
    let e = (-2.0 * a).exp();
    if theta / gap < LOG_SPACE_CROSSOVER {
        // ln[(gap/theta^2)^2 e^{-2a} / (1 + e^{-2a})^2]
        (2.0 * (gap.ln() - 2.0 * theta.ln()) - 2.0 * a - 2.0 * e.ln_1p()).exp()
    } else {
        let s = gap / (theta * theta);
        s * s * e / ((1.0 + e) * (1.0 + e))
    }
}

fn boson_qfi(gap: f64, theta: f64) -> f64 {
    let a = gap / (2.0 * theta);
    if theta / gap < LOG_SPACE_CROSSOVER {
        let e = (-2.0 * a).exp();
        (2.0 * (gap.ln() - 2.0 * theta.ln()) - 2.0 * a - 2.0 * (-e).ln_1p()).exp()
    } else {
        let s = gap / (theta * theta);
        let sh = a.sinh();
        s * s / (4.0 * sh * sh)
    }
}

/// Closed temperature interval `[theta_min, theta_max]` with the matching
/// `lambda` interval of a given model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureDomain {
    pub theta_min: f64,
    pub theta_max: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl TemperatureDomain {
    pub fn new(model: &SampleModel, theta_min: f64, theta_max: f64) -> Result<Self> {
        model.validate()?;
        if !(theta_min.is_finite() && theta_max.is_finite() && 0.0 < theta_min && theta_min < theta_max) {
            return Err(config(format!(
                "temperature domain needs 0 < theta_min < theta_max, got [{theta_min}, {theta_max}]"
            )));
        }
        let lambda_min = model.lambda_unchecked(theta_min);
        let lambda_max = model.lambda_unchecked(theta_max);
        if !(lambda_min < lambda_max) {
            return Err(config(format!(
                "lambda is numerically flat on [{theta_min}, {theta_max}] for the {} model",
                model.label()
            )));
        }
        Ok(Self {
            theta_min,
            theta_max,
            lambda_min,
            lambda_max,
        })
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.theta_min && theta <= self.theta_max
    }

    pub fn lambda_width(&self) -> f64 {
        self.lambda_max - self.lambda_min
    }

    /// `lambda(theta)` clamped to the domain interval.
    pub fn lambda_clamped(&self, model: &SampleModel, theta: f64) -> Result<f64> {
        Ok(model.lambda(theta)?.clamp(self.lambda_min, self.lambda_max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spin() -> SampleModel {
        SampleModel::spin_half(1.0).unwrap()
    }

    fn boson() -> SampleModel {
        SampleModel::boson_mode(1.0).unwrap()
    }

    fn all_models() -> [SampleModel; 3] {
        [SampleModel::reservoir(), spin(), boson()]
    }

    // Composite Simpson of sqrt(h) on [a, b].
    fn length_by_quadrature(m: &SampleModel, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let f = |t: f64| if t <= 0.0 { 0.0 } else { m.qfi_unchecked(t).sqrt() };
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn qfi_examples() {
        assert_eq!(SampleModel::reservoir().qfi(2.0).unwrap(), 0.25);
        let c = 0.5f64.cosh();
        assert_relative_eq!(spin().qfi(1.0).unwrap(), 1.0 / (4.0 * c * c), max_relative = 1e-14);
        // high temperature boson approaches the reservoir
        let t = 1e3;
        assert_relative_eq!(boson().qfi(t).unwrap() * t * t, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn qfi_matches_bernoulli_fisher_information() {
        // FI of p_e(theta) = 1/(1 + e^{1/theta}) by central differences of the
        // log-likelihood, averaged over both outcomes.
        let theta = 1.0;
        let p = |t: f64| 1.0 / (1.0 + (1.0 / t).exp());
        let dh = 1e-5;
        let dlog1 = (p(theta + dh).ln() - p(theta - dh).ln()) / (2.0 * dh);
        let dlog0 = ((1.0 - p(theta + dh)).ln() - (1.0 - p(theta - dh)).ln()) / (2.0 * dh);
        let fi = p(theta) * dlog1 * dlog1 + (1.0 - p(theta)) * dlog0 * dlog0;
        assert_relative_eq!(spin().qfi(theta).unwrap(), fi, max_relative = 1e-6);

        let theta = 0.5;
        let dlog1 = (p(theta + dh).ln() - p(theta - dh).ln()) / (2.0 * dh);
        let dlog0 = ((1.0 - p(theta + dh)).ln() - (1.0 - p(theta - dh)).ln()) / (2.0 * dh);
        let fi = p(theta) * dlog1 * dlog1 + (1.0 - p(theta)) * dlog0 * dlog0;
        assert_relative_eq!(
            spin().heat_capacity(theta).unwrap(),
            theta * theta * fi,
            max_relative = 1e-6
        );
    }

    #[test]
    fn heat_capacity_limits() {
        assert_eq!(SampleModel::reservoir().heat_capacity(17.0).unwrap(), 1.0);
        assert!(spin().heat_capacity(1e6).unwrap() < 1e-12);
    }

    #[test]
    fn log_space_branch_is_continuous() {
        for m in [spin(), boson()] {
            let below = m.qfi(LOG_SPACE_CROSSOVER * (1.0 - 1e-12)).unwrap();
            let above = m.qfi(LOG_SPACE_CROSSOVER * (1.0 + 1e-12)).unwrap();
            // both are ~e^{-500}; compare logs
            assert!((below.ln() - above.ln()).abs() < 1e-9 || (below == 0.0 && above == 0.0));
            assert!(m.qfi(1e-200).unwrap().is_finite());
        }
    }

    #[test]
    fn non_positive_theta_is_rejected() {
        for m in all_models() {
            assert!(matches!(m.qfi(0.0), Err(crate::Error::Domain(_))));
            assert!(m.qfi(-1.0).is_err());
            assert!(m.lambda(f64::NAN).is_err());
            assert!(m.heat_capacity(0.0).is_err());
        }
    }

    #[test]
    fn lambda_limits() {
        assert_relative_eq!(spin().lambda(1e12).unwrap(), FRAC_PI_2, max_relative = 1e-12);
        assert!(boson().lambda(1e-3).unwrap() < 1e-200);
        assert_eq!(boson().lambda(1e-6).unwrap(), 0.0);
        assert!(spin().lambda(1e-3).unwrap() < 1e-200);
    }

    #[test]
    fn lambda_matches_quadrature_of_root_qfi() {
        let from_zero = length_by_quadrature(&spin(), 0.0, 0.5, 20_000);
        assert_relative_eq!(spin().lambda(0.5).unwrap(), from_zero, epsilon = 1e-10);
        let seg = length_by_quadrature(&spin(), 0.3, 0.6, 2_000);
        assert_relative_eq!(spin().geodesic_distance(0.3, 0.6).unwrap(), seg, epsilon = 1e-12);
    }

    #[test]
    fn geodesic_examples() {
        let r = SampleModel::reservoir();
        assert_relative_eq!(r.geodesic_distance(1.0, std::f64::consts::E).unwrap(), 1.0);
        for m in all_models() {
            assert_eq!(m.geodesic_distance(0.7, 0.7).unwrap(), 0.0);
        }
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(SampleModel::reservoir().theta_of_lambda(0.0).unwrap(), 1.0);
        assert!(spin().theta_of_lambda(FRAC_PI_2 - 1e-9).unwrap() > 1e8);
        assert!(spin().theta_of_lambda(FRAC_PI_2).is_err());
        assert!(spin().theta_of_lambda(-0.1).is_err());
        assert!(boson().theta_of_lambda(0.0).is_err());
    }

    #[test]
    fn bisection_agrees_with_closed_form() {
        for m in all_models() {
            for &t in &[0.2, 1.0, 3.0] {
                let lam = m.lambda(t).unwrap();
                let b = m.theta_by_bisection(lam).unwrap();
                assert_relative_eq!(b, t, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn lambda_is_strictly_increasing_on_a_fine_grid() {
        for m in all_models() {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..1000 {
                let t = 0.1 + 4.9 * i as f64 / 999.0;
                let l = m.lambda(t).unwrap();
                assert!(l > prev, "{} not increasing at {t}", m.label());
                prev = l;
            }
        }
    }

    #[test]
    fn inverse_temperature_transformation_rule() {
        // QFI in beta = 1/theta from the Gibbs populations written in beta:
        // spin h(beta) = e^2 / (4 cosh^2(beta e / 2)), boson with sinh,
        // reservoir h(beta) = 1/beta^2.  Then h(theta) = (d beta/d theta)^2 h(beta).
        for &t in &[0.1, 0.37, 1.0, 2.5, 5.0] {
            let b: f64 = 1.0 / t;
            let jac2 = 1.0 / t.powi(4);
            let c = (b / 2.0).cosh();
            let s = (b / 2.0).sinh();
            assert_relative_eq!(spin().qfi(t).unwrap(), jac2 / (4.0 * c * c), max_relative = 1e-12);
            assert_relative_eq!(boson().qfi(t).unwrap(), jac2 / (4.0 * s * s), max_relative = 1e-12);
            assert_relative_eq!(
                SampleModel::reservoir().qfi(t).unwrap(),
                jac2 / (b * b),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn domain_validation() {
        let m = spin();
        assert!(TemperatureDomain::new(&m, 0.0, 1.0).is_err());
        assert!(TemperatureDomain::new(&m, 2.0, 1.0).is_err());
        let d = TemperatureDomain::new(&m, 0.1, 5.0).unwrap();
        assert!(d.lambda_min < d.lambda_max);
        assert!(d.contains(1.0) && !d.contains(6.0));
        assert_eq!(d.lambda_clamped(&m, 50.0).unwrap(), d.lambda_max);
        assert!(SampleModel::spin_half(0.0).is_err());
        assert!((SampleModel::IdealReservoir { capacity_scale: -1.0 })
            .validate()
            .is_err());
    }

    proptest! {
        #[test]
        fn round_trip_identity(t in 0.1f64..5.0, which in 0usize..3) {
            let m = all_models()[which];
            let back = m.theta_of_lambda(m.lambda(t).unwrap()).unwrap();
            prop_assert!(((back - t) / t).abs() < 1e-10);
        }

        #[test]
        fn additivity(a in 0.1f64..5.0, b in 0.1f64..5.0, c in 0.1f64..5.0, which in 0usize..3) {
            let m = all_models()[which];
            let mut v = [a, b, c];
            v.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let whole = m.geodesic_distance(v[0], v[2]).unwrap();
            let parts = m.geodesic_distance(v[0], v[1]).unwrap() + m.geodesic_distance(v[1], v[2]).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1.0));
            prop_assert_eq!(m.geodesic_distance(a, b).unwrap(), m.geodesic_distance(b, a).unwrap());
        }
    }
}

//! The explicit critical family `u_{2/3,a}`, the auxiliary family `ũ_{α,μ}`,
//! and the closed-form integrals and energy bounds built from them.
//!
//! Everything here is analytic; the grid is only used to tabulate fields.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{dot, inverse_stereographic, norm, stereographic, Point3, UnitSphereGrid};
use crate::harmonics::Field;

/// Below this value of `ln μ²` the closed forms switch to their Taylor series.
const SERIES_CUTOFF: f64 = 0.5;

#[cfg(test)]
const NORTH: Point3 = [0.0, 0.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormParams {
    pub a: f64,
    pub mu_sq: f64,
    pub axis: Point3,
}

impl ClosedFormParams {
    pub fn new(a: f64, axis: Point3) -> Result<Self> {
        check_a(a)?;
        let n = norm(&axis);
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("axis must be a non-zero vector"));
        }
        let axis = [axis[0] / n, axis[1] / n, axis[2] / n];
        Ok(Self { a, mu_sq: mu_sq_of(a), axis })
    }

    pub fn ln_mu_sq(&self) -> f64 {
        ln_mu_sq_of(self.a)
    }
}

/// `μ² = (1 + a)/(1 − a)`.
pub fn mu_sq_of(a: f64) -> f64 {
    (1.0 + a) / (1.0 - a)
}

/// `ln μ² = 2 atanh a`, accurate for small `a`.
pub fn ln_mu_sq_of(a: f64) -> f64 {
    2.0 * a.atanh()
}

fn check_a(a: f64) -> Result<()> {
    if !(0.0..1.0).contains(&a) {
        return Err(invalid(format!("a must lie in [0, 1), got {a}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (1/2, 1), got {alpha}")));
    }
    Ok(())
}

/// `Σ_{n ≥ start} coef(n) sⁿ/n!`, summed until the terms stop mattering.
fn exp_series(s: f64, start: u32, coef: impl Fn(u32) -> f64) -> f64 {
    let mut pow = 1.0;
    for n in 1..=start {
        pow *= s / n as f64;
    }
    let mut sum = 0.0;
    let mut n = start;
    loop {
        let term = coef(n) * pow;
        sum += term;
        if n > start + 4 && term.abs() <= 1e-18 * sum.abs() || n > start + 200 {
            break;
        }
        n += 1;
        pow *= s / n as f64;
    }
    sum
}

/// `(μ² + 1) s − 2(μ² − 1)` with `s = ln μ²`, cancellation-free.
fn dirichlet_numerator(s: f64) -> f64 {
    if s < SERIES_CUTOFF {
        exp_series(s, 3, |n| n as f64 - 2.0)
    } else {
        let m2 = s.exp();
        (m2 + 1.0) * s - 2.0 * (m2 - 1.0)
    }
}

/// `μ² s − (μ² − 1)` with `s = ln μ²`.
fn mean_numerator(s: f64) -> f64 {
    if s < SERIES_CUTOFF {
        exp_series(s, 2, |n| n as f64 - 1.0)
    } else {
        let m2 = s.exp();
        m2 * s - (m2 - 1.0)
    }
}

/// `u_{2/3,a}(x) = −(3/2) ln(1 − a ê·x) + ln(1 − a²)` on the grid, with `ê` the
/// normalized axis. It has unit mass and center of mass `a ê`.
pub fn u_explicit(grid: &UnitSphereGrid, a: f64, axis: Point3) -> Result<Field> {
    let p = ClosedFormParams::new(a, axis)?;
    if a == 0.0 {
        return Ok(Field(vec![0.0; grid.len()]));
    }
    let c = (1.0 - a * a).ln();
    Ok(Field(grid.tabulate(|x| -1.5 * (-a * dot(&p.axis, x)).ln_1p() + c)))
}

/// The same function written on the plane: `u(Π⁻¹y) = (3/2) ln((1 + |y|²)/(μ² + |y|²)) + ln μ² + ½ ln(2/(1 + μ²))`,
/// with the projection taken along the north pole. Only for the `(0,0,1)` axis.
pub fn u_explicit_planar(a: f64, y: &[f64; 2]) -> Result<f64> {
    check_a(a)?;
    let m2 = mu_sq_of(a);
    let r2 = y[0] * y[0] + y[1] * y[1];
    Ok(1.5 * ((1.0 + r2) / (m2 + r2)).ln() + m2.ln() + 0.5 * (2.0 / (1.0 + m2)).ln())
}

/// Both closed forms of `∫|∇u_{2/3,a}|² dω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradEnergy {
    /// `(9/4)[(μ² + 1) ln μ² − 2(μ² − 1)]/(μ² − 1)`.
    pub mu_form: f64,
    /// `(9/(4a))(ln((1 + a)/(1 − a)) − 2a)`.
    pub a_form: f64,
}

impl GradEnergy {
    pub fn value(&self) -> f64 {
        self.a_form
    }
}

pub fn grad_energy_explicit(a: f64) -> Result<GradEnergy> {
    check_a(a)?;
    if a == 0.0 {
        return Ok(GradEnergy { mu_form: 0.0, a_form: 0.0 });
    }
    let s = ln_mu_sq_of(a);
    let mu_form = 2.25 * dirichlet_numerator(s) / s.exp_m1();
    let a_form = if a < 0.1 {
        // 2 atanh a − 2a = 2 Σ_{k≥1} a^{2k+1}/(2k+1)
        let a2 = a * a;
        let mut sum = 0.0;
        let mut pw = 1.0;
        for k in 1..40 {
            pw *= a2;
            sum += pw / (2 * k + 1) as f64;
        }
        4.5 * sum
    } else {
        2.25 / a * (s - 2.0 * a)
    };
    Ok(GradEnergy { mu_form, a_form })
}

/// Which printing of the mean formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MeanVariant {
    /// `−(3/2)(μ² ln μ² − (μ² − 1))/(μ² − 1) + ln μ² + ½ ln(2/(1 + μ²))`, which
    /// agrees with quadrature and vanishes at `a = 0`.
    #[default]
    Corrected,
    /// The same with `+(μ² − 1)`: off by `3` at every `a > 0` and does not
    /// vanish as `a → 0`. Kept for comparison only.
    AsPrinted,
}

/// `∫u_{2/3,a} dω`.
pub fn mean_explicit(a: f64) -> Result<f64> {
    mean_explicit_variant(a, MeanVariant::Corrected)
}

pub fn mean_explicit_variant(a: f64, variant: MeanVariant) -> Result<f64> {
    check_a(a)?;
    let s = ln_mu_sq_of(a);
    let m2 = mu_sq_of(a);
    let tail = s + 0.5 * (2.0 / (1.0 + m2)).ln();
    match variant {
        MeanVariant::Corrected => {
            if a == 0.0 {
                return Ok(0.0);
            }
            if a < 0.3 {
                // (3/4) Σ a^{2k}/(k(2k+1)) + ln(1 − a²)
                let a2 = a * a;
                let mut sum = 0.0;
                let mut pw = 1.0;
                for k in 1..80 {
                    pw *= a2;
                    sum += pw / (k * (2 * k + 1)) as f64;
                }
                return Ok(0.75 * sum + (-a2).ln_1p());
            }
            Ok(-1.5 * mean_numerator(s) / s.exp_m1() + tail)
        }
        MeanVariant::AsPrinted => {
            if a == 0.0 {
                // limit of (μ² ln μ² + μ² − 1)/(μ² − 1) as μ → 1 is 2
                return Ok(-3.0);
            }
            Ok(-1.5 * (m2 * s + (m2 - 1.0)) / (m2 - 1.0) + tail)
        }
    }
}

/// `ũ_{α,μ}(x) = (1/α) ln((1 + |y|²)/(μ² + |y|²))` with `y = Π(x)`.
pub fn aux_field(grid: &UnitSphereGrid, alpha: f64, mu: f64) -> Result<Field> {
    check_alpha(alpha)?;
    if !(mu >= 1.0) || !mu.is_finite() {
        return Err(invalid(format!("mu must be at least 1, got {mu}")));
    }
    let m2 = mu * mu;
    let values = grid
        .nodes()
        .iter()
        .map(|x| match stereographic(x) {
            Ok(y) => {
                let r2 = y[0] * y[0] + y[1] * y[1];
                ((1.0 + r2) / (m2 + r2)).ln() / alpha
            }
            // |y| → ∞ at the pole, where the ratio tends to one.
            Err(Error::ProjectionPole) => 0.0,
            Err(_) => unreachable!("stereographic only fails at the pole"),
        })
        .collect();
    Ok(Field(values))
}

/// `ũ_{α,μ}` at a planar point.
pub fn aux_field_planar(alpha: f64, mu: f64, y: &[f64; 2]) -> f64 {
    let r2 = y[0] * y[0] + y[1] * y[1];
    ((1.0 + r2) / (mu * mu + r2)).ln() / alpha
}

/// Lifts `ũ_{α,μ}` through [`inverse_stereographic`]; handy for spot checks.
pub fn aux_point(alpha: f64, mu: f64, y: &[f64; 2]) -> (Point3, f64) {
    (inverse_stereographic(y), aux_field_planar(alpha, mu, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxIntegrals {
    pub dirichlet: f64,
    pub mean: f64,
    pub mass: f64,
    pub moment3: f64,
    /// `a_{α,μ} = moment3/mass`.
    pub center: f64,
}

impl AuxIntegrals {
    /// `I_α(ũ_{α,μ}) = αD + 2∫ũ − ½ ln(M² − m₃²)`.
    pub fn i_value(&self, alpha: f64) -> f64 {
        alpha * self.dirichlet + 2.0 * self.mean
            - 0.5 * (self.mass * self.mass * (1.0 - self.center * self.center)).ln()
    }
}

/// Closed forms of `∫|∇ũ|²`, `∫ũ`, `∫e^{2ũ}`, `∫e^{2ũ}x₃` and the center `a_{α,μ}`.
pub fn aux_integrals(alpha: f64, mu: f64) -> Result<AuxIntegrals> {
    check_alpha(alpha)?;
    if !(mu > 1.0) || !mu.is_finite() {
        return Err(invalid(format!("mu must exceed 1, got {mu}")));
    }
    Ok(aux_integrals_s(alpha, 2.0 * mu.ln()))
}

/// [`aux_integrals`] parametrized by `s = ln μ² > 0`.
pub(crate) fn aux_integrals_s(alpha: f64, s: f64) -> AuxIntegrals {
    let p = 2.0 / alpha;
    let em1 = s.exp_m1();
    let dirichlet = dirichlet_numerator(s) / (alpha * alpha * em1);
    let mean = -mean_numerator(s) / (alpha * em1);
    let mass = -((1.0 - p) * s).exp_m1() / ((p - 1.0) * em1);
    let moment3 = if s < SERIES_CUTOFF {
        let num = exp_series(s, 3, |k| {
            let k = k as i32;
            p * (2.0 - p).powi(k) + (p - 2.0) * (1.0 - (1.0 - p).powi(k))
        });
        num / ((p - 1.0) * (p - 2.0) * em1 * em1)
    } else {
        // numerator and (μ² − 1)² both divided by μ⁴
        let num = p * (-p * s).exp() + (p - 2.0) * ((-s).exp() - ((-1.0 - p) * s).exp())
            - p * (-2.0 * s).exp();
        let d = -(-s).exp_m1();
        num / ((p - 1.0) * (p - 2.0) * d * d)
    };
    AuxIntegrals { dirichlet, mean, mass, moment3, center: moment3 / mass }
}

/// The center formula `a_{α,μ} = 1 − [2(2/α − 1)(1 − μ²) + 2(μ^{4/α−2} − 1)]/[(2/α − 2)(μ² − 1)(μ^{4/α−2} − 1)]`
/// exactly as written, for cross-checking [`aux_integrals`] away from `μ = 1`.
pub fn aux_center_direct(alpha: f64, mu: f64) -> f64 {
    let p = 2.0 / alpha;
    let m2 = mu * mu;
    let q = mu.powf(2.0 * p - 2.0);
    1.0 - (2.0 * (p - 1.0) * (1.0 - m2) + 2.0 * (q - 1.0)) / ((p - 2.0) * (m2 - 1.0) * (q - 1.0))
}

/// Smallest `μ > 1` with `a_{α,μ} = a`.
///
/// Scans `s = ln μ²` geometrically for the first sign change of `a_{α,μ} − a`
/// and bisects inside it.
pub fn find_mu(alpha: f64, a: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid(format!("a must lie in (0, 1), got {a}")));
    }
    let f = |s: f64| aux_integrals_s(alpha, s).center - a;
    let s_min = 1e-8;
    let s_max = 600.0;
    let mut lo = s_min;
    if f(lo) >= 0.0 {
        return Err(Error::BracketFailure { lo: 1.0, hi: (0.5 * lo).exp() });
    }
    let mut hi = lo;
    loop {
        hi *= 1.25;
        if hi > s_max {
            return Err(Error::BracketFailure { lo: (0.5 * s_min).exp(), hi: (0.5 * s_max).exp() });
        }
        if f(hi) >= 0.0 {
            break;
        }
        lo = hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.25 * (lo + hi)).exp())
}

/// Leading-order `μ²(a) ≈ α/((1 − α)(1 − a))` as `a → 1`.
pub fn mu_sq_asymptotic(alpha: f64, a: f64) -> f64 {
    alpha / ((1.0 - alpha) * (1.0 - a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCurves {
    pub lower: f64,
    pub upper: f64,
    /// Leading term `(1/α − 3/2) ln(1 − a²)` of the upper bound as `a → 1`.
    pub upper_asym: f64,
}

fn is_two_thirds(alpha: f64) -> bool {
    (alpha - 2.0 / 3.0).abs() < 1e-14
}

/// Pointwise lower and upper bounds for the constrained minimum `m(α, a)`.
pub fn bound_curves(alpha: f64, a: f64) -> Result<BoundCurves> {
    check_alpha(alpha)?;
    check_a(a)?;
    let l = (-a * a).ln_1p();
    let lower = if is_two_thirds(alpha) {
        0.0
    } else if alpha < 2.0 / 3.0 {
        (2.0 / alpha - 3.0) * l
    } else {
        alpha * (1.0 / alpha - 1.5) * l
    };
    let energy_branch = if is_two_thirds(alpha) {
        0.0
    } else {
        (alpha - 2.0 / 3.0) * grad_energy_explicit(a)?.value()
    };
    let upper = if alpha > 2.0 / 3.0 && !is_two_thirds(alpha) {
        energy_branch.min((2.0 / alpha - 3.0) * l)
    } else {
        energy_branch
    };
    Ok(BoundCurves { lower, upper, upper_asym: (1.0 / alpha - 1.5) * l })
}

/// `(3α/(2a))(1/α − 3/2)(ln(1 − a²) − 2(ln(1 + a) − a))`, the energy branch of
/// the upper bound as it is usually written.
pub fn upper_energy_branch(alpha: f64, a: f64) -> f64 {
    1.5 * alpha / a * (1.0 / alpha - 1.5) * ((-a * a).ln_1p() - 2.0 * (a.ln_1p() - a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{el_residual, eval_i, mass_moments};
    use crate::grid::gauss_legendre;
    use crate::harmonics::SpectralBasis;
    use approx::assert_abs_diff_eq;

    fn basis() -> SpectralBasis {
        crate::default_basis()
    }

    /// `∫ f(x₃) dω` with a 1D Gauss–Legendre rule; the oracle for zonal integrals.
    fn zonal(f: impl Fn(f64) -> f64) -> f64 {
        let (z, w) = gauss_legendre(400);
        z.iter().zip(&w).map(|(z, w)| 0.5 * w * f(*z)).sum()
    }

    #[test]
    fn params_invariants() {
        for a in [0.0, 0.3, 0.6, 0.95] {
            let p = ClosedFormParams::new(a, [0.0, 0.0, 2.0]).unwrap();
            assert_abs_diff_eq!(p.mu_sq * (1.0 - a), 1.0 + a, epsilon = 1e-14);
            assert_eq!(p.axis, [0.0, 0.0, 1.0]);
            assert_abs_diff_eq!(p.ln_mu_sq(), p.mu_sq.ln(), epsilon = 1e-14);
        }
        assert!(ClosedFormParams::new(1.0, NORTH).is_err());
        assert!(ClosedFormParams::new(0.5, [0.0; 3]).is_err());
    }

    #[test]
    fn explicit_field_moments() {
        let b = basis();
        assert!(u_explicit(b.grid(), 0.0, NORTH).unwrap().max_abs() == 0.0);
        let u = u_explicit(b.grid(), 0.6, NORTH).unwrap();
        let m = mass_moments(b.grid(), &u).unwrap();
        assert_abs_diff_eq!(m.mass, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.center[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.center[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.center[2], 0.6, epsilon = 1e-9);
        assert_abs_diff_eq!(eval_i(2.0 / 3.0, &b, &u).unwrap().value, 0.0, epsilon = 1e-7);
        assert!(u_explicit(b.grid(), 1.0, NORTH).is_err());
    }

    #[test]
    fn explicit_field_tilted_axis() {
        let b = basis();
        let axis = [1.0, -2.0, 0.5];
        let u = u_explicit(b.grid(), 0.4, axis).unwrap();
        let m = mass_moments(b.grid(), &u).unwrap();
        let n = norm(&axis);
        for (c, e) in m.center.iter().zip(axis) {
            assert_abs_diff_eq!(*c, 0.4 * e / n, epsilon = 1e-9);
        }
    }

    #[test]
    fn planar_and_spherical_forms_agree() {
        for a in [0.2, 0.6, 0.85] {
            for y in [[0.0, 0.0], [0.3, -1.2], [4.0, 2.0]] {
                let x = inverse_stereographic(&y);
                let sphere = -1.5 * (1.0 - a * x[2]).ln() + (1.0 - a * a).ln();
                assert_abs_diff_eq!(u_explicit_planar(a, &y).unwrap(), sphere, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn grad_energy_values() {
        assert_eq!(grad_energy_explicit(0.0).unwrap().value(), 0.0);
        assert_abs_diff_eq!(grad_energy_explicit(0.6).unwrap().value(), 0.698_603_9, epsilon = 1e-7);
        assert_abs_diff_eq!(grad_energy_explicit(0.6).unwrap().value(), 0.75 * (5.0 * 4f64.ln() - 6.0), epsilon = 1e-14);
        assert_abs_diff_eq!(grad_energy_explicit(0.8).unwrap().value(), 1.679_694_2, epsilon = 1e-7);
        for k in 1..200 {
            let a = k as f64 / 200.0;
            let g = grad_energy_explicit(a).unwrap();
            assert_abs_diff_eq!(g.mu_form, g.a_form, epsilon = 1e-12);
        }
        for a in [1e-8, 1e-4, 0.05, 0.099, 0.1, 0.101] {
            let g = grad_energy_explicit(a).unwrap();
            assert_abs_diff_eq!(g.mu_form, g.a_form, epsilon = 1e-12 * (1.0 + g.a_form));
        }
    }

    #[test]
    fn grad_energy_matches_quadrature() {
        let b = basis();
        for a in [0.3, 0.6] {
            let u = u_explicit(b.grid(), a, NORTH).unwrap();
            let d = b.analyze(&u).unwrap().dirichlet_energy();
            assert_abs_diff_eq!(d, grad_energy_explicit(a).unwrap().value(), epsilon = 1e-8);
        }
        // |∇u|² = (9/4) a² (1 − x₃²)/(1 − a x₃)² as a zonal oracle at larger a
        let a = 0.8;
        let oracle = zonal(|z| 2.25 * a * a * (1.0 - z * z) / (1.0 - a * z).powi(2));
        assert_abs_diff_eq!(oracle, grad_energy_explicit(a).unwrap().value(), epsilon = 1e-12);
    }

    #[test]
    fn mean_values() {
        assert_eq!(mean_explicit(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(mean_explicit(0.6).unwrap(), -0.344_439_7, epsilon = 1e-7);
        let b = basis();
        for a in [0.1, 0.3, 0.6] {
            let u = u_explicit(b.grid(), a, NORTH).unwrap();
            let q = b.grid().integrate(&u).unwrap();
            assert_abs_diff_eq!(q, mean_explicit(a).unwrap(), epsilon = 1e-8);
        }
        for a in [0.8, 0.9, 0.97] {
            let oracle = zonal(|z| -1.5 * (1.0 - a * z).ln() + (1.0 - a * a).ln());
            assert_abs_diff_eq!(oracle, mean_explicit(a).unwrap(), epsilon = 1e-10);
        }
        // the series and closed branches meet continuously
        let lo = mean_explicit(0.3 - 1e-12).unwrap();
        let hi = mean_explicit(0.3).unwrap();
        assert_abs_diff_eq!(lo, hi, epsilon = 1e-11);
    }

    #[test]
    fn printed_mean_variant_is_off_by_three() {
        for a in [0.2, 0.6, 0.9] {
            let c = mean_explicit_variant(a, MeanVariant::Corrected).unwrap();
            let p = mean_explicit_variant(a, MeanVariant::AsPrinted).unwrap();
            assert_abs_diff_eq!(c - p, 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn explicit_family_has_zero_energy() {
        for a in [0.3, 0.6, 0.9] {
            let i = 2.0 / 3.0 * grad_energy_explicit(a).unwrap().value() + 2.0 * mean_explicit(a).unwrap()
                - 0.5 * (1.0 - a * a).ln();
            assert_abs_diff_eq!(i, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn explicit_solves_the_equation() {
        let b = basis();
        for a in [0.3, 0.6] {
            let u = u_explicit(b.grid(), a, NORTH).unwrap();
            assert!(el_residual(2.0 / 3.0, &b, &u).unwrap().sup < 1e-6);
        }
    }

    #[test]
    fn aux_field_examples() {
        let b = basis();
        assert!(aux_field(b.grid(), 0.7, 1.0).unwrap().max_abs() < 1e-15);
        let v = aux_field(b.grid(), 2.0 / 3.0, 2.0).unwrap();
        let u = u_explicit(b.grid(), 0.6, NORTH).unwrap();
        let shift = u[0] - v[0];
        assert!(u.iter().zip(v.iter()).all(|(x, y)| (x - y - shift).abs() < 1e-9));
        let m = mass_moments(b.grid(), &v).unwrap();
        assert_abs_diff_eq!(m.center_norm, 0.6, epsilon = 1e-8);
        assert!(aux_field(b.grid(), 1.0, 2.0).is_err());
        assert!(aux_field(b.grid(), 0.5, 2.0).is_err());
    }

    #[test]
    fn aux_integral_examples() {
        let r = aux_integrals(2.0 / 3.0, 2.0).unwrap();
        assert_abs_diff_eq!(r.mass, 0.156_25, epsilon = 1e-14);
        assert_abs_diff_eq!(r.moment3, 0.093_75, epsilon = 1e-14);
        assert_abs_diff_eq!(r.center, 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(aux_center_direct(2.0 / 3.0, 2.0), 0.6, epsilon = 1e-14);
        let near = aux_integrals(0.7, 1.0 + 1e-4).unwrap();
        assert!(near.center.abs() < 1e-3);
        let far = aux_integrals(0.7, 1e3).unwrap();
        assert!(far.center > 0.99);
        assert!(aux_integrals(0.7, 1.0).is_err());
    }

    #[test]
    fn aux_integrals_match_quadrature() {
        let b = basis();
        for alpha in [0.55, 2.0 / 3.0, 0.8, 0.95] {
            for a in [0.2, 0.5, 0.8] {
                let mu = find_mu(alpha, a).unwrap();
                let r = aux_integrals(alpha, mu).unwrap();
                let v = aux_field(b.grid(), alpha, mu).unwrap();
                let m = mass_moments(b.grid(), &v).unwrap();
                let d = b.analyze(&v).unwrap().dirichlet_energy();
                let mean = b.grid().integrate(&v).unwrap();
                assert_abs_diff_eq!(r.mass, m.mass, epsilon = 1e-7);
                assert_abs_diff_eq!(r.moment3, m.moment[2], epsilon = 1e-7);
                assert_abs_diff_eq!(r.center, m.center[2], epsilon = 1e-7);
                assert_abs_diff_eq!(r.mean, mean, epsilon = 1e-7);
                assert_abs_diff_eq!(r.dirichlet, d, epsilon = 1e-7);
                assert_abs_diff_eq!(r.i_value(alpha), eval_i(alpha, &b, &v).unwrap().value, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn aux_series_and_direct_branches_agree() {
        for alpha in [0.55, 0.7, 0.9] {
            let below = aux_integrals_s(alpha, SERIES_CUTOFF * (1.0 - 1e-12));
            let above = aux_integrals_s(alpha, SERIES_CUTOFF);
            assert_abs_diff_eq!(below.mass, above.mass, epsilon = 1e-12);
            assert_abs_diff_eq!(below.moment3, above.moment3, epsilon = 1e-11);
            assert_abs_diff_eq!(below.dirichlet, above.dirichlet, epsilon = 1e-12);
            assert_abs_diff_eq!(below.mean, above.mean, epsilon = 1e-12);
            for mu in [1.5, 3.0, 10.0] {
                let r = aux_integrals(alpha, mu).unwrap();
                assert_abs_diff_eq!(r.center, aux_center_direct(alpha, mu), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn find_mu_examples() {
        assert_abs_diff_eq!(find_mu(2.0 / 3.0, 0.6).unwrap(), 2.0, epsilon = 1e-10);
        for alpha in [0.55, 0.6, 0.75, 0.9] {
            for a in [1e-3, 0.1, 0.5, 0.9, 0.99] {
                let mu = find_mu(alpha, a).unwrap();
                let c = aux_integrals(alpha, mu).unwrap().center;
                assert!((c - a).abs() < 1e-12, "alpha={alpha} a={a} c={c}");
            }
        }
        let mu = find_mu(0.6, 0.99).unwrap();
        let ratio = mu * mu / 150.0;
        assert!((0.75..=1.25).contains(&ratio), "{ratio}");
        assert!(find_mu(0.6, 0.0).is_err());
        assert!(find_mu(0.4, 0.5).is_err());
    }

    #[test]
    fn bound_examples() {
        for a in [0.0, 0.3, 0.9] {
            let b = bound_curves(2.0 / 3.0, a).unwrap();
            assert_eq!((b.lower, b.upper), (0.0, 0.0));
        }
        let b = bound_curves(0.6, 0.8).unwrap();
        assert_abs_diff_eq!(b.lower, -0.340_550_4, epsilon = 1e-7);
        assert_abs_diff_eq!(b.upper, -0.111_979_6, epsilon = 1e-7);
        assert_abs_diff_eq!(b.upper, upper_energy_branch(0.6, 0.8), epsilon = 1e-12);
        for alpha in [0.55, 0.75, 0.95] {
            let b = bound_curves(alpha, 0.0).unwrap();
            assert_eq!(b.lower, 0.0);
            assert_abs_diff_eq!(b.upper, 0.0, epsilon = 0.0);
            for a in [0.1, 0.5, 0.9] {
                let b = bound_curves(alpha, a).unwrap();
                assert!(b.lower <= b.upper + 1e-14, "alpha={alpha} a={a}");
                let e = (alpha - 2.0 / 3.0) * grad_energy_explicit(a).unwrap().value();
                assert_abs_diff_eq!(e, upper_energy_branch(alpha, a), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn aux_energy_respects_bounds() {
        // the auxiliary family is admissible, so its energy lies above the lower bound
        for alpha in [0.55, 0.6, 0.75, 0.9] {
            for a in [0.2, 0.6, 0.9] {
                let mu = find_mu(alpha, a).unwrap();
                let i = aux_integrals(alpha, mu).unwrap().i_value(alpha);
                let b = bound_curves(alpha, a).unwrap();
                assert!(i >= b.lower - 1e-10, "alpha={alpha} a={a} i={i} lower={}", b.lower);
            }
        }
    }
}

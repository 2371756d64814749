//! Gram-determinant data of `{1, √3x₁, √3x₂, √3x₃}` under a positive density
//! and the logarithmic monotonicity relation built from it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functionals::{exp_two_u, eval_i};
use crate::grid::UnitSphereGrid;
use crate::harmonics::SpectralBasis;
use crate::quadrature::integrate_adaptive;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct MonotonicityReport {
    /// `⟨1, 1⟩ = ∫f dω`.
    pub D0: f64,
    /// `⟨1,1⟩⟨f_i,f_i⟩ − ⟨1,f_i⟩²` with `f_i = √3x_i`.
    pub D0i: [f64; 3],
    /// Mean of the three `D0i`.
    pub D1: f64,
    pub int_log_f: f64,
    pub margin_positivity: f64,
    /// `ln(D1/D0) − ∫ln f dω`.
    pub margin_inequality: f64,
    /// `ln(D1/D0) − ∫f dω`, the variant with `f` in place of `ln f`.
    pub margin_printed: f64,
    /// `|D1 − ((∫f)² − Σ(∫f x_i)²)|`.
    pub identity_residual: f64,
}

impl MonotonicityReport {
    /// `μ_i = D0i / D0`, the squared distance from `f_i` to the constants in
    /// `L²(f dω)`.
    pub fn mu(&self) -> [f64; 3] {
        self.D0i.map(|d| d / self.D0)
    }
}

/// Gram data for the density `f` sampled on the grid nodes.
pub fn gram_data(grid: &UnitSphereGrid, f: &[f64]) -> Result<MonotonicityReport> {
    grid.check_len(f)?;
    if let Some(bad) = f.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(invalid(format!("density must be positive and finite, found {bad}")));
    }
    let d0 = grid.integrate_unchecked(f);
    let mut first = [0.0; 3];
    let mut second = [0.0; 3];
    for ((x, w), fv) in grid.nodes().iter().zip(grid.weights()).zip(f) {
        let wf = w * fv;
        for i in 0..3 {
            first[i] += wf * x[i];
            second[i] += wf * x[i] * x[i];
        }
    }
    let mut d0i = [0.0; 3];
    for i in 0..3 {
        let ff = 3.0 * second[i];
        let f0 = 3f64.sqrt() * first[i];
        d0i[i] = d0 * ff - f0 * f0;
    }
    let d1 = d0i.iter().sum::<f64>() / 3.0;
    let closed = d0 * d0 - first.iter().map(|m| m * m).sum::<f64>();
    let logs: Vec<f64> = f.iter().map(|v| v.ln()).collect();
    let int_log_f = grid.integrate_unchecked(&logs);
    let ratio = if d1 > 0.0 { (d1 / d0).ln() } else { f64::NEG_INFINITY };
    Ok(MonotonicityReport {
        D0: d0,
        D0i: d0i,
        D1: d1,
        int_log_f,
        margin_positivity: d1,
        margin_inequality: ratio - int_log_f,
        margin_printed: ratio - d0,
        identity_residual: (d1 - closed).abs(),
    })
}

/// [`gram_data`] for a density of the form `e^{2u}`.
pub fn gram_data_exp(grid: &UnitSphereGrid, u: &[f64]) -> Result<MonotonicityReport> {
    gram_data(grid, &exp_two_u(u)?)
}

/// Same data as [`gram_data`]; the inequality holds when `margin_inequality ≥ 0`.
pub fn check_monotonicity(grid: &UnitSphereGrid, f: &[f64]) -> Result<MonotonicityReport> {
    gram_data(grid, f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GCurve {
    pub t: f64,
    pub g: f64,
    pub g_prime: f64,
    pub g_quadrature: f64,
}

const G_SERIES_CUTOFF: f64 = 0.5;

/// `Σ_k 2t^{2k} / ((2k−1)2k(2k+1))`, valid for `t < 1`.
fn g_series(t: f64) -> f64 {
    let t2 = t * t;
    let mut p = 1.0;
    let mut sum = 0.0;
    for k in 1..80 {
        p *= t2;
        let n = 2.0 * k as f64;
        let term = 2.0 * p / ((n - 1.0) * n * (n + 1.0));
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

fn g_prime_series(t: f64) -> f64 {
    let t2 = t * t;
    let mut p = t;
    let mut sum = 0.0;
    for k in 1..80 {
        let n = 2.0 * k as f64;
        let term = 2.0 * p / ((n - 1.0) * (n + 1.0));
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
        p *= t2;
    }
    sum
}

/// `(t−1)² ln|t−1|`, continuously extended by 0 at `t = 1`.
fn sq_log(t: f64) -> f64 {
    let d = t - 1.0;
    if d == 0.0 {
        0.0
    } else {
        d * d * d.abs().ln()
    }
}

fn g_closed(t: f64) -> f64 {
    ((1.0 + t).powi(2) * (1.0 + t).ln() - sq_log(t)) / (2.0 * t) - 1.0
}

fn g_prime_closed(t: f64) -> f64 {
    let d = t - 1.0;
    let log_ratio = if d == 0.0 {
        0.0
    } else {
        (t * t - 1.0) * ((1.0 + t) / d.abs()).ln()
    };
    (4.0 * t + 2.0 * log_ratio) / (4.0 * t * t)
}

fn g_value(t: f64) -> f64 {
    if t < G_SERIES_CUTOFF {
        g_series(t)
    } else if t <= 1.0 / G_SERIES_CUTOFF {
        g_closed(t)
    } else {
        2.0 * t.ln() + g_series(1.0 / t)
    }
}

fn g_prime_value(t: f64) -> f64 {
    if t < G_SERIES_CUTOFF {
        g_prime_series(t)
    } else if t <= 1.0 / G_SERIES_CUTOFF {
        g_prime_closed(t)
    } else {
        let s = 1.0 / t;
        2.0 * s - s * s * g_prime_series(s)
    }
}

/// `g(t) = ∫ln(1 + t² + 2t x₃) dω` in closed form together with its
/// derivative and an independent 1D quadrature of the same mean.
pub fn g_curve(t: f64) -> Result<GCurve> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!("g(t) needs t > 0, got {t}")));
    }
    // w = 1 + s keeps the logarithmic endpoint at an exactly representable 0
    let d2 = (1.0 - t) * (1.0 - t);
    let g_quadrature = 0.5 * integrate_adaptive(|w| (d2 + 2.0 * t * w).ln(), 0.0, 2.0, 1e-14);
    Ok(GCurve { t, g: g_value(t), g_prime: g_prime_value(t), g_quadrature })
}

/// `(4/3)∫|∇u|² − (ln D1 − 4∫u)` for the density `e^{2u}`, which equals
/// `2·I_{2/3}(u)`; an error is returned if the two evaluations disagree.
pub fn szego_remark_check(basis: &SpectralBasis, u: &[f64]) -> Result<f64> {
    let grid = basis.grid();
    let rep = gram_data_exp(grid, u)?;
    let c = basis.analyze(u)?;
    let dirichlet = c.dirichlet_energy();
    let mean = grid.integrate_unchecked(u);
    let margin = 4.0 / 3.0 * dirichlet - (rep.D1.ln() - 4.0 * mean);
    let twice_i = 2.0 * eval_i(2.0 / 3.0, basis, u)?.value;
    if (margin - twice_i).abs() > 1e-10 * margin.abs().max(1.0) {
        return Err(Error::Degenerate(format!(
            "Gram margin {margin:e} and 2·I(2/3) = {twice_i:e} disagree"
        )));
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::u_explicit;
    use crate::functionals::{random_coeffs, random_field, rotate_field};
    use crate::grid::gauss_legendre;
    use proptest::prelude::*;

    fn basis() -> SpectralBasis {
        let g = UnitSphereGrid::new(32, 64).unwrap();
        SpectralBasis::new(&g, 16).unwrap()
    }

    #[test]
    fn uniform_density() {
        let g = UnitSphereGrid::new(16, 32).unwrap();
        let r = gram_data(&g, &vec![1.0; g.len()]).unwrap();
        assert!((r.D0 - 1.0).abs() < 1e-14);
        for d in r.D0i {
            assert!((d - 1.0).abs() < 1e-13);
        }
        assert!((r.D1 - 1.0).abs() < 1e-13);
        assert!(r.margin_inequality.abs() < 1e-13);

        let c = 2.5;
        let r = check_monotonicity(&g, &vec![c; g.len()]).unwrap();
        assert!(r.margin_inequality.abs() < 1e-12);
        assert!((r.D1 - c * c).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive() {
        let g = UnitSphereGrid::new(8, 16).unwrap();
        let mut f = vec![1.0; g.len()];
        f[3] = 0.0;
        assert!(gram_data(&g, &f).is_err());
        f[3] = -1.0;
        assert!(check_monotonicity(&g, &f).is_err());
        assert!(gram_data(&g, &[1.0]).is_err());
    }

    #[test]
    fn linear_density() {
        let g = UnitSphereGrid::new(24, 48).unwrap();
        let f = g.tabulate(|x| 1.0 + 0.5 * x[2]);
        let r = gram_data(&g, &f).unwrap();

        // 1D Gauss–Legendre in x₃ with weight ½ds
        let (z, w) = gauss_legendre(64);
        let m = |h: &dyn Fn(f64) -> f64| -> f64 {
            z.iter().zip(&w).map(|(s, ws)| 0.5 * ws * h(*s)).sum()
        };
        let d0 = m(&|s| 1.0 + 0.5 * s);
        let m3 = m(&|s| s * (1.0 + 0.5 * s));
        let q3 = m(&|s| s * s * (1.0 + 0.5 * s));
        assert!((m3 - 1.0 / 6.0).abs() < 1e-14 && (q3 - 1.0 / 3.0).abs() < 1e-14);
        let d03 = d0 * 3.0 * q3 - 3.0 * m3 * m3;
        assert!((r.D0i[2] - d03).abs() < 1e-13 && (d03 - 11.0 / 12.0).abs() < 1e-13);
        assert!((r.D0i[0] - 1.0).abs() < 1e-13 && (r.D0i[1] - 1.0).abs() < 1e-13);
        assert!((r.D1 - 35.0 / 36.0).abs() < 1e-13);

        let log_oracle = integrate_adaptive(|s| 0.5 * (1.0 + 0.5 * s).ln(), -1.0, 1.0, 1e-15);
        assert!((r.int_log_f - log_oracle).abs() < 1e-12);
        assert!((log_oracle + 0.045_228_7).abs() < 1e-7);
        assert!((r.margin_inequality - 0.017_057_8).abs() < 1e-7, "{}", r.margin_inequality);
        assert!(r.identity_residual < 1e-14);
    }

    #[test]
    fn explicit_family_density() {
        let b = SpectralBasis::new(&UnitSphereGrid::new(48, 96).unwrap(), 24).unwrap();
        let u = u_explicit(b.grid(), 0.6, [0.0, 0.0, 1.0]).unwrap();
        let r = gram_data_exp(b.grid(), &u).unwrap();
        assert!((r.D1 - 0.64).abs() < 1e-8, "{}", r.D1);
        assert!(r.margin_inequality > 0.0);
        let m = szego_remark_check(&b, &u).unwrap();
        assert!(m.abs() < 1e-6, "{m}");
        let z = szego_remark_check(&b, &vec![0.0; b.grid().len()]).unwrap();
        assert!(z.abs() < 1e-14);
    }

    #[test]
    fn szego_margin_is_twice_i() {
        let b = basis();
        let u = random_field(7, &b, 0.5, 2.0).unwrap();
        let m = szego_remark_check(&b, &u).unwrap();
        let i = eval_i(2.0 / 3.0, &b, &u).unwrap().value;
        assert!((m - 2.0 * i).abs() < 1e-10);
        assert!(m >= -1e-6);
    }

    #[test]
    fn mu_is_a_variational_minimum() {
        let b = basis();
        for seed in 0..10u64 {
            let u = random_field(100 + seed, &b, 0.6, 2.0).unwrap();
            let f = exp_two_u(&u).unwrap();
            let r = gram_data(b.grid(), &f).unwrap();
            let mu = r.mu();
            for i in 0..3 {
                let q = |a: f64| -> f64 {
                    b.grid().integrate_fn_weighted(&f, |x| (a + 3f64.sqrt() * x[i]).powi(2))
                };
                let h = 1e-3;
                let scan = (-3000..=3000).map(|k| q(k as f64 * h)).fold(f64::INFINITY, f64::min);
                assert!(scan >= mu[i] - 1e-12, "{scan} {}", mu[i]);
                assert!(scan <= mu[i] + r.D0 * h * h, "{scan} {}", mu[i]);
            }
        }
    }

    #[test]
    fn g_values() {
        let g1 = g_curve(1.0).unwrap();
        assert_eq!(g1.g, 2.0 * 2f64.ln() - 1.0);
        assert!((g1.g_prime - 1.0).abs() < 1e-15);
        assert!((g1.g - g1.g_quadrature).abs() < 1e-10);
        let g2 = g_curve(2.0).unwrap();
        assert!((g2.g - (2.25 * 3f64.ln() - 1.0)).abs() < 1e-14);
        assert!((g2.g - (9.0 * 9f64.ln() - 8.0) / 8.0).abs() < 1e-14);
        assert!((g2.g - 1.471_877_7).abs() < 1e-7);
        let small = g_curve(1e-6).unwrap();
        assert!(small.g > 0.0 && small.g < 1e-6);
        assert!(g_curve(0.0).is_err() && g_curve(-1.0).is_err() && g_curve(f64::NAN).is_err());
    }

    #[test]
    fn g_branches_agree() {
        for t in [0.3, 0.45, 0.5, 0.55, 1.8, 1.99, 2.0, 2.01, 3.0] {
            let c = g_closed(t);
            let s = if t < 1.0 { g_series(t) } else { 2.0 * t.ln() + g_series(1.0 / t) };
            assert!((c - s).abs() < 1e-13, "{t}: {c} {s}");
            let cp = g_prime_closed(t);
            let sp = if t < 1.0 {
                g_prime_series(t)
            } else {
                2.0 / t - g_prime_series(1.0 / t) / (t * t)
            };
            assert!((cp - sp).abs() < 1e-12, "{t}: {cp} {sp}");
        }
    }

    #[test]
    fn g_matches_quadrature_and_is_increasing() {
        let mut prev = 0.0;
        for k in 0..=160 {
            let t = 10f64.powf(-4.0 + 8.0 * k as f64 / 160.0);
            let g = g_curve(t).unwrap();
            assert!(g.g > 0.0 && g.g_prime > 0.0, "{t}");
            assert!(g.g > prev);
            prev = g.g;
            if (1e-3..=1e3).contains(&t) {
                assert!((g.g - g.g_quadrature).abs() < 1e-10, "{t}: {}", g.g - g.g_quadrature);
            }
            let h = 1e-5 * t;
            let fd = (g_value(t + h) - g_value(t - h)) / (2.0 * h);
            assert!((fd - g.g_prime).abs() < 1e-6 * g.g_prime.max(1.0), "{t}");
        }
    }

    fn rot_z(th: f64) -> [[f64; 3]; 3] {
        let (s, c) = th.sin_cos();
        [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    }

    fn rot_x(th: f64) -> [[f64; 3]; 3] {
        let (s, c) = th.sin_cos();
        [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_densities(seed in 0u64..10_000, amp in 0.05f64..1.0) {
            let b = basis();
            let u = random_field(seed, &b, amp, 2.0).unwrap();
            let f = exp_two_u(&u).unwrap();
            let r = check_monotonicity(b.grid(), &f).unwrap();
            prop_assert!(r.D0 > 0.0);
            prop_assert!(r.margin_positivity >= -1e-12);
            prop_assert!(r.margin_inequality >= -1e-8);
            prop_assert!(r.identity_residual < 1e-10 * r.D0 * r.D0);
            let m0 = r.D0;
            for i in 0..3 {
                let mi = b.grid().integrate_fn_weighted(&f, |x| x[i]);
                let qi = b.grid().integrate_fn_weighted(&f, |x| x[i] * x[i]);
                prop_assert!(mi * mi <= m0 * qi * (1.0 + 1e-12));
            }
        }

        #[test]
        fn d1_is_rotation_invariant(seed in 0u64..10_000, a in 0.0f64..6.3, c in 0.0f64..3.1) {
            let b = basis();
            let coeffs = random_coeffs(seed, 6, 0.3, 2.0).unwrap();
            let mut full = crate::harmonics::Coeffs::zeros(b.l_max());
            full.as_mut_slice()[..coeffs.as_slice().len()].copy_from_slice(coeffs.as_slice());
            let u = b.synthesize(&full).unwrap();
            let r0 = gram_data_exp(b.grid(), &u).unwrap();
            let rz = rot_z(a);
            let rx = rot_x(c);
            let mut rot = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    rot[i][j] = (0..3).map(|k| rz[i][k] * rx[k][j]).sum();
                }
            }
            let ur = rotate_field(&b, &full, &rot);
            let r1 = gram_data_exp(b.grid(), &ur).unwrap();
            prop_assert!((r0.D1 - r1.D1).abs() < 1e-9 * r0.D1, "{} {}", r0.D1, r1.D1);
        }
    }
}

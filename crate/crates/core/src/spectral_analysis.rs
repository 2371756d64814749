//! Second variation of `I_α`, the kernel of its linearization at `u ≡ 0`, and
//! the conformally weighted eigenvalue problem `−Δφ = λ (1 − a²)/(1 − a x₃)² φ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functionals::{el_residual, exp_two_u, mass_moments, normalize};
use crate::grid::{dot, UnitSphereGrid};
use crate::harmonics::{eigenvalue, lm_of, n_coeffs, Coeffs, Field, SpectralBasis};

/// Diagonal of `D²I_α(0)` in the harmonic basis, indexed like the coefficients:
/// `0` on degree 0, `4α − 8/3` on degree 1 and `2α l(l+1) − 4` above.
pub fn hessian_diag_at_zero(alpha: f64, l_max: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok((0..n_coeffs(l_max))
        .map(|k| match lm_of(k).0 {
            0 => 0.0,
            1 => 4.0 * alpha - 8.0 / 3.0,
            l => 2.0 * alpha * eigenvalue(l) - 4.0,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianValue {
    pub value: f64,
    /// Pointwise Euler–Lagrange residual of `u` at `α`; large values mean the
    /// form is a second derivative away from a critical point.
    pub el_residual_sup: f64,
    pub at_critical_point: bool,
}

/// Terms of the second variation at a normalized `u` with center `a`:
/// `e^{2u}`, the weight `e^{2u}(1 − a·x)` and `1 − |a|²`.
struct HessianData {
    e: Vec<f64>,
    ew: Vec<f64>,
    q: f64,
}

fn hessian_data(grid: &UnitSphereGrid, u: &[f64]) -> Result<(HessianData, Field)> {
    let u = normalize(grid, u)?;
    let m = mass_moments(grid, &u)?;
    if m.center_norm >= 1.0 {
        return Err(Error::Degenerate(format!("|a| = {} is not below 1", m.center_norm)));
    }
    let e = exp_two_u(&u)?;
    let ew = e.iter().zip(grid.nodes()).map(|(e, x)| e * (1.0 - dot(&m.center, x))).collect();
    Ok((HessianData { e, ew, q: 1.0 - m.center_norm * m.center_norm }, u))
}

/// `D²I_α(u)(φ, φ)`:
///
/// `2α∫|∇φ|² + 8(∫e^{2u}(1 − a·x)φ)²/(1 − |a|²)²
///  − 4[∫e^{2u}(1 − a·x)φ² + (∫e^{2u}φ)² − Σ(∫e^{2u}x_iφ)²]/(1 − |a|²)`
///
/// with `u` normalized to unit mass. The expression is the exact second
/// derivative of `t ↦ I_α(u + tφ)` for any `u`; `at_critical_point` records
/// whether `u` also solves the Euler–Lagrange equation.
pub fn hessian_form(alpha: f64, basis: &SpectralBasis, u: &[f64], phi: &[f64]) -> Result<HessianValue> {
    let grid = basis.grid();
    grid.check_len(phi)?;
    let (h, un) = hessian_data(grid, u)?;
    let dphi = basis.analyze(phi)?.dirichlet_energy();
    let int = |f: &dyn Fn(usize) -> f64| -> f64 {
        let v: Vec<f64> = (0..grid.len()).map(f).collect();
        grid.integrate_unchecked(&v)
    };
    let lin = int(&|n| h.ew[n] * phi[n]);
    let quad = int(&|n| h.ew[n] * phi[n] * phi[n]);
    let e0 = int(&|n| h.e[n] * phi[n]);
    let ex: f64 = (0..3).map(|i| int(&|n| h.e[n] * grid.nodes()[n][i] * phi[n]).powi(2)).sum();
    let value = 2.0 * alpha * dphi + 8.0 * lin * lin / (h.q * h.q) - 4.0 * (quad + e0 * e0 - ex) / h.q;
    let sup = el_residual(alpha, basis, &un).map(|r| r.sup).unwrap_or(f64::INFINITY);
    Ok(HessianValue { value, el_residual_sup: sup, at_critical_point: sup < 1e-4 })
}

/// `(4/3)∫|∇φ|² − 4(1 − a²)∫φ²/(1 − a·x)²`, the second variation of `I_{2/3}`
/// at `u_{2/3,a}` on the constrained subspace.
pub fn reduced_form_two_thirds(basis: &SpectralBasis, a: [f64; 3], phi: &[f64]) -> Result<f64> {
    let grid = basis.grid();
    grid.check_len(phi)?;
    let q = 1.0 - dot(&a, &a);
    let v: Vec<f64> =
        grid.nodes().iter().zip(phi).map(|(x, p)| p * p / (1.0 - dot(&a, x)).powi(2)).collect();
    Ok(4.0 / 3.0 * basis.analyze(phi)?.dirichlet_energy() - 4.0 * q * grid.integrate_unchecked(&v))
}

/// Coefficient vectors of the constraint weights `(1 − a·x)^{-3}{1, x₁, x₂, x₃}`.
fn constraint_vectors(basis: &SpectralBasis, a: [f64; 3]) -> Vec<Coeffs> {
    let grid = basis.grid();
    (0..4)
        .map(|j| {
            let v: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|x| {
                    let w = (1.0 - dot(&a, x)).powi(-3);
                    if j == 0 {
                        w
                    } else {
                        w * x[j - 1]
                    }
                })
                .collect();
            basis.analyze_unchecked(&v)
        })
        .collect()
}

/// Projects band-limited `φ` onto the complement of the constraints
/// `∫φ(1 − a·x)^{-3} = 0`, `∫x_iφ(1 − a·x)^{-3} = 0`.
pub fn project_constraints(basis: &SpectralBasis, a: [f64; 3], phi: &Coeffs) -> Result<Coeffs> {
    let cs = constraint_vectors(basis, a);
    let gram = DMatrix::from_fn(4, 4, |i, j| cs[i].dot(&cs[j]));
    let rhs = DVector::from_fn(4, |i, _| cs[i].dot(phi));
    let y = gram
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("constraint Gram matrix is singular".into()))?
        .solve(&rhs);
    let mut out = phi.clone();
    for (j, c) in cs.iter().enumerate() {
        out = out.lin_comb(1.0, c, -y[j]);
    }
    Ok(out)
}

/// Dense matrix of `D²I_α(u)` in the harmonic basis.
pub fn hessian_matrix(alpha: f64, basis: &SpectralBasis, u: &[f64]) -> Result<DMatrix<f64>> {
    let grid = basis.grid();
    grid.check_len(u)?;
    let (h, _) = hessian_data(grid, u)?;
    let nc = basis.n_coeffs();
    let mut mat = basis.weighted_gram(&h.ew)? * (-4.0 / h.q);
    let v = basis.analyze_unchecked(&h.ew);
    let w0 = basis.analyze_unchecked(&h.e);
    let wx: Vec<Coeffs> = (0..3)
        .map(|i| {
            let f: Vec<f64> = h.e.iter().zip(grid.nodes()).map(|(e, x)| e * x[i]).collect();
            basis.analyze_unchecked(&f)
        })
        .collect();
    for r in 0..nc {
        for c in 0..nc {
            let mut t = 8.0 / (h.q * h.q) * v.as_slice()[r] * v.as_slice()[c];
            t -= 4.0 / h.q * w0.as_slice()[r] * w0.as_slice()[c];
            for w in &wx {
                t += 4.0 / h.q * w.as_slice()[r] * w.as_slice()[c];
            }
            mat[(r, c)] += t;
        }
        mat[(r, r)] += 2.0 * alpha * eigenvalue(lm_of(r).0);
    }
    Ok(mat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedSpectrum {
    /// Ascending eigenvalues of the Hessian restricted to the constraint complement.
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
}

/// Spectrum of `D²I_α(u)` on the complement of the constraints at center `a`.
pub fn constrained_hessian_spectrum(
    alpha: f64,
    basis: &SpectralBasis,
    u: &[f64],
    tol: f64,
) -> Result<ConstrainedSpectrum> {
    let m = mass_moments(basis.grid(), u)?;
    let h = hessian_matrix(alpha, basis, u)?;
    let nc = basis.n_coeffs();
    let cs = constraint_vectors(basis, m.center);
    let cmat = DMatrix::from_fn(nc, 4, |r, c| cs[c].as_slice()[r]);
    let qr = cmat.qr();
    let q = qr.q();
    let p = DMatrix::identity(nc, nc) - &q * q.transpose();
    // Constraint directions are pushed to a shift far above the spectrum and
    // then discarded.
    let shift = 1e3 * (0..nc).fold(1.0f64, |m, k| m.max(h[(k, k)].abs()));
    let restricted = &p * h * &p + (DMatrix::identity(nc, nc) - &p) * shift;
    let mut rest: Vec<f64> = SymmetricEigen::new(restricted).eigenvalues.iter().copied().collect();
    rest.sort_by(f64::total_cmp);
    rest.truncate(nc - 4);
    let kernel_dim = rest.iter().filter(|v| v.abs() < tol).count();
    Ok(ConstrainedSpectrum { eigenvalues: rest, kernel_dim })
}

/// Matrix of `φ ↦ αΔφ + 2φ − 2∫φ − 2Σ x_i ∫x_iφ` on the band-limited space,
/// assembled column by column through the grid.
pub fn linearized_operator(alpha: f64, basis: &SpectralBasis) -> DMatrix<f64> {
    let grid = basis.grid();
    let nc = basis.n_coeffs();
    let mut mat = DMatrix::zeros(nc, nc);
    for j in 0..nc {
        let (l, m) = lm_of(j);
        let y = basis.basis_field(l, m);
        let mean = grid.integrate_unchecked(&y);
        let mx: Vec<f64> = (0..3).map(|i| grid.integrate_fn_weighted(&y, |x| x[i])).collect();
        let v: Vec<f64> = y
            .iter()
            .zip(grid.nodes())
            .map(|(yv, x)| -alpha * eigenvalue(l) * yv + 2.0 * yv - 2.0 * mean - 2.0 * dot(&[mx[0], mx[1], mx[2]], x))
            .collect();
        let col = basis.analyze_unchecked(&v);
        for (r, c) in col.as_slice().iter().enumerate() {
            mat[(r, j)] = *c;
        }
    }
    mat
}

/// Dimension of the numerical kernel of the linearization at `u ≡ 0`.
pub fn kernel_dim(alpha: f64, l_max: usize, tol: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let grid = UnitSphereGrid::new(l_max + 2, 2 * l_max + 4)?;
    let basis = SpectralBasis::new(&grid, l_max)?;
    let op = linearized_operator(alpha, &basis);
    let sym = (&op + op.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    Ok(eig.iter().filter(|v| v.abs() < tol).count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub a: f64,
    pub l_max: usize,
    /// Ascending eigenvalues of `−Δφ = λWφ`.
    pub eigenvalues: Vec<f64>,
    /// `m(m+1)` repeated `2m+1` times, for every `m(m+1) < L(L+1)/4`.
    pub expected: Vec<f64>,
    /// `max |λ_k − expected_k|` over the resolved range.
    pub max_deviation: f64,
    /// Distance from 3 to the nearest computed eigenvalue.
    pub gap_to_three: f64,
    pub warning: Option<String>,
}

impl EigenReport {
    /// `max |λ_k − m(m+1)|` over ladder entries with `m ≤ m_max`.
    pub fn deviation_up_to(&self, m_max: usize) -> f64 {
        let ladder = ladder(m_max);
        ladder.iter().zip(&self.eigenvalues).fold(0.0f64, |d, (e, l)| d.max((e - l).abs()))
    }
}

fn ladder(m_max: usize) -> Vec<f64> {
    (0..=m_max).flat_map(|m| std::iter::repeat_n((m * (m + 1)) as f64, 2 * m + 1)).collect()
}

/// Solves `−Δφ = λ (1 − a²)/(1 − a x₃)² φ` by Rayleigh–Ritz on harmonics of
/// degree `≤ l_max`: the weight matrix is Cholesky-factored and the problem
/// reduced to a symmetric one.
pub fn conformal_eigenvalues(a: f64, l_max: usize) -> Result<EigenReport> {
    if !(0.0..1.0).contains(&a) {
        return Err(invalid(format!("a must lie in [0, 1), got {a}")));
    }
    let warning = (a > 0.8).then(|| format!("a = {a} exceeds 0.8; weight is poorly resolved"));
    let n_theta = (3 * l_max).max(48);
    let grid = UnitSphereGrid::new(n_theta, 2 * n_theta)?;
    let basis = SpectralBasis::new(&grid, l_max)?;
    let w: Vec<f64> = grid.nodes().iter().map(|x| (1.0 - a * a) / (1.0 - a * x[2]).powi(2)).collect();
    let wm = basis.weighted_gram(&w)?;
    let nc = basis.n_coeffs();
    let chol = wm.cholesky().ok_or_else(|| Error::LinearAlgebra("weight matrix is not positive definite".into()))?;
    let lower = chol.l();
    // A = L⁻¹ K L⁻ᵀ with K = diag(l(l+1)).
    let kdiag: Vec<f64> = (0..nc).map(|k| eigenvalue(lm_of(k).0)).collect();
    let linv = lower
        .clone()
        .solve_lower_triangular(&DMatrix::identity(nc, nc))
        .ok_or_else(|| Error::LinearAlgebra("triangular solve failed".into()))?;
    let mut scaled = linv.clone();
    for (c, k) in kdiag.iter().enumerate() {
        scaled.column_mut(c).scale_mut(*k);
    }
    let a_mat = scaled * linv.transpose();
    let mut eig: Vec<f64> = SymmetricEigen::new(a_mat).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let cutoff = eigenvalue(l_max) / 4.0;
    let m_res = (0..=l_max).take_while(|&m| eigenvalue(m) < cutoff).last().unwrap_or(0);
    let expected = ladder(m_res);
    let max_deviation = expected.iter().zip(&eig).fold(0.0f64, |d, (e, l)| d.max((e - l).abs()));
    let gap_to_three = eig.iter().fold(f64::INFINITY, |d, l| d.min((l - 3.0).abs()));
    Ok(EigenReport { a, l_max, eigenvalues: eig, expected, max_deviation, gap_to_three, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::u_explicit;
    use crate::functionals::{eval_i, random_coeffs};
    use approx::assert_abs_diff_eq;

    fn basis() -> SpectralBasis {
        crate::default_basis()
    }

    #[test]
    fn diag_examples() {
        let d = hessian_diag_at_zero(2.0 / 3.0, 4).unwrap();
        assert_eq!(d[0], 0.0);
        assert!(d[1..4].iter().all(|v| v.abs() < 1e-15));
        assert!(d[4..9].iter().all(|v| (v - 4.0).abs() < 1e-14));
        let d = hessian_diag_at_zero(0.7, 2).unwrap();
        assert_abs_diff_eq!(d[2], 0.133_333_3, epsilon = 1e-7);
        let d = hessian_diag_at_zero(0.5, 2).unwrap();
        assert_abs_diff_eq!(d[3], -2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn diag_matches_finite_differences() {
        let b = basis();
        let alpha = 0.7;
        let d = hessian_diag_at_zero(alpha, b.l_max()).unwrap();
        let eps = 1e-3;
        let zero = vec![0.0; b.grid().len()];
        let i0 = eval_i(alpha, &b, &zero).unwrap().value;
        for (l, m) in [(1, 0), (1, 1), (2, -1), (3, 2), (6, 0)] {
            let y = b.basis_field(l, m);
            let plus: Vec<f64> = y.iter().map(|v| eps * v).collect();
            let minus: Vec<f64> = y.iter().map(|v| -eps * v).collect();
            let fd = (eval_i(alpha, &b, &plus).unwrap().value + eval_i(alpha, &b, &minus).unwrap().value - 2.0 * i0)
                / (eps * eps);
            let k = crate::harmonics::lm_index(l, m);
            assert!((fd - d[k]).abs() <= 1e-4 * d[k].abs(), "l={l} m={m} fd={fd} d={}", d[k]);
            let h = hessian_form(alpha, &b, &zero, &y).unwrap();
            assert_abs_diff_eq!(h.value, d[k], epsilon = 1e-8);
        }
    }

    #[test]
    fn hessian_form_matches_finite_differences_at_nonzero_u() {
        let b = basis();
        let u = b.synthesize(&random_coeffs(3, b.l_max(), 0.3, 3.0).unwrap()).unwrap();
        let phi = b.synthesize(&random_coeffs(4, b.l_max(), 0.5, 3.0).unwrap()).unwrap();
        let alpha = 0.8;
        let eps = 1e-3;
        let at = |t: f64| {
            let v: Vec<f64> = u.iter().zip(phi.iter()).map(|(u, p)| u + t * p).collect();
            eval_i(alpha, &b, &v).unwrap().value
        };
        let fd = (at(eps) + at(-eps) - 2.0 * at(0.0)) / (eps * eps);
        let h = hessian_form(alpha, &b, &u, &phi).unwrap();
        assert!((fd - h.value).abs() < 1e-5 * h.value.abs().max(1.0), "{fd} {}", h.value);
        assert!(!h.at_critical_point);
    }

    #[test]
    fn hessian_matrix_agrees_with_form() {
        let b = basis();
        let u = u_explicit(b.grid(), 0.6, [0.0, 0.0, 1.0]).unwrap();
        let h = hessian_matrix(2.0 / 3.0, &b, &u).unwrap();
        let c = random_coeffs(9, b.l_max(), 1.0, 2.0).unwrap();
        let phi = b.synthesize(&c).unwrap();
        let v = DVector::from_column_slice(c.as_slice());
        let quad = v.dot(&(&h * &v));
        let form = hessian_form(2.0 / 3.0, &b, &u, &phi).unwrap();
        assert_abs_diff_eq!(quad, form.value, epsilon = 1e-9 * form.value.abs().max(1.0));
        assert!(form.at_critical_point);
    }

    #[test]
    fn second_variation_at_explicit_solution() {
        let b = basis();
        let a = 0.6;
        let u = u_explicit(b.grid(), a, [0.0, 0.0, 1.0]).unwrap();
        for seed in 0..20 {
            let phi = b.synthesize(&random_coeffs(100 + seed, b.l_max(), 1.0, 2.0).unwrap()).unwrap();
            let full = hessian_form(2.0 / 3.0, &b, &u, &phi).unwrap().value;
            assert!(full >= -1e-6, "{full}");
            let pc = project_constraints(&b, [0.0, 0.0, a], &b.analyze(&phi).unwrap()).unwrap();
            let pphi = b.synthesize(&pc).unwrap();
            let full = hessian_form(2.0 / 3.0, &b, &u, &pphi).unwrap().value;
            let red = reduced_form_two_thirds(&b, [0.0, 0.0, a], &pphi).unwrap();
            assert_abs_diff_eq!(full, red, epsilon = 1e-8);
        }
    }

    #[test]
    fn constrained_spectrum_is_positive() {
        let g = UnitSphereGrid::new(24, 48).unwrap();
        let b = SpectralBasis::new(&g, 8).unwrap();
        let u = u_explicit(&g, 0.3, [0.0, 0.0, 1.0]).unwrap();
        let s = constrained_hessian_spectrum(2.0 / 3.0, &b, &u, 1e-8).unwrap();
        assert_eq!(s.eigenvalues.len(), b.n_coeffs() - 4);
        assert!(s.eigenvalues[0] > -1e-8, "{:?}", &s.eigenvalues[..4]);
    }

    #[test]
    fn kernel_dims() {
        assert_eq!(kernel_dim(0.6, 12, 1e-8).unwrap(), 1);
        assert_eq!(kernel_dim(2.0 / 3.0, 12, 1e-8).unwrap(), 4);
        assert_eq!(kernel_dim(0.9, 12, 1e-8).unwrap(), 1);
        assert!(kernel_dim(1.5, 12, 1e-8).is_err());
    }

    #[test]
    fn conformal_ladder() {
        let r = conformal_eigenvalues(0.0, 8).unwrap();
        for (e, l) in r.expected.iter().zip(&r.eigenvalues) {
            assert_abs_diff_eq!(e, l, epsilon = 1e-10);
        }
        let r = conformal_eigenvalues(0.3, 16).unwrap();
        assert!(r.deviation_up_to(6) < 1e-6, "{}", r.deviation_up_to(6));
        assert!(r.gap_to_three > 0.5);
        // truncation error in the ladder shrinks with the band limit
        let coarse = conformal_eigenvalues(0.5, 16).unwrap().deviation_up_to(6);
        let r = conformal_eigenvalues(0.5, 24).unwrap();
        assert!(r.deviation_up_to(6) < 1e-6 && r.deviation_up_to(6) < coarse);
        assert!(r.eigenvalues.iter().all(|l| (l - 3.0).abs() > 0.5));
        assert!(r.warning.is_none());
        assert!(conformal_eigenvalues(0.85, 6).unwrap().warning.is_some());
    }
}

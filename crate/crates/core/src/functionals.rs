//! The functionals `F_α` and `I_α`, mass moments, Euler–Lagrange residuals and
//! the Kazdan–Warner obstruction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{dot, Point3, UnitSphereGrid};
use crate::harmonics::{eigenvalue, lm_of, Coeffs, Field, SpectralBasis};

/// Fields with `max 2u` above this are rejected before exponentiation.
pub const OVERFLOW_LIMIT: f64 = 300.0;

/// `e^{2u}` at every node, or an overflow error.
pub fn exp_two_u(u: &[f64]) -> Result<Vec<f64>> {
    let max_two_u = u.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(2.0 * v));
    if !max_two_u.is_finite() && max_two_u != f64::NEG_INFINITY || max_two_u > OVERFLOW_LIMIT {
        return Err(Error::Overflow { max_two_u, limit: OVERFLOW_LIMIT });
    }
    if u.iter().any(|v| v.is_nan()) {
        return Err(invalid("field contains NaN"));
    }
    Ok(u.iter().map(|&v| (2.0 * v).exp()).collect())
}

/// Total mass `M = ∫e^{2u}`, first moments `m_i = ∫e^{2u}x_i` and the center `a = m/M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassData {
    pub mass: f64,
    pub moment: [f64; 3],
    pub center: [f64; 3],
    pub center_norm: f64,
}

impl MassData {
    /// `M² − |m|²`, the argument of the logarithm in `I_α`.
    pub fn gram_determinant(&self) -> f64 {
        // M²(1 − |a|²) loses less precision than M² − |m|² when |a| → 1.
        self.mass * self.mass * (1.0 - self.center_norm * self.center_norm)
    }

    fn from_weights(grid: &UnitSphereGrid, e: &[f64]) -> Self {
        let mass = grid.integrate_unchecked(e);
        let mut moment = [0.0; 3];
        let mut tmp = vec![0.0; e.len()];
        for (i, mi) in moment.iter_mut().enumerate() {
            for (t, (ev, x)) in tmp.iter_mut().zip(e.iter().zip(grid.nodes())) {
                *t = ev * x[i];
            }
            *mi = grid.integrate_unchecked(&tmp);
        }
        let center = [moment[0] / mass, moment[1] / mass, moment[2] / mass];
        let center_norm = dot(&center, &center).sqrt();
        MassData { mass, moment, center, center_norm }
    }
}

pub fn mass_moments(grid: &UnitSphereGrid, u: &[f64]) -> Result<MassData> {
    grid.check_len(u)?;
    let e = exp_two_u(u)?;
    Ok(MassData::from_weights(grid, &e))
}

/// Second moments `∫ e^{2u} x_i x_j dω`.
pub fn second_moments(grid: &UnitSphereGrid, u: &[f64]) -> Result<[[f64; 3]; 3]> {
    grid.check_len(u)?;
    let e = exp_two_u(u)?;
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = grid.integrate_fn_weighted(&e, |x| x[i] * x[j]);
            s[i][j] = v;
            s[j][i] = v;
        }
    }
    Ok(s)
}

impl UnitSphereGrid {
    /// `∫ w(x) f(x) dω` for tabulated `w`.
    pub(crate) fn integrate_fn_weighted<F: Fn(&Point3) -> f64>(&self, w: &[f64], f: F) -> f64 {
        let v: Vec<f64> = w.iter().zip(self.nodes()).map(|(w, x)| w * f(x)).collect();
        self.integrate_unchecked(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub alpha: f64,
    /// `∫|∇u|² dω` via Parseval.
    pub dirichlet: f64,
    /// `∫u dω`.
    pub mean: f64,
    /// `ln M` for `F_α`, `½ ln(M² − |m|²)` for `I_α`.
    pub log_term: f64,
    pub value: f64,
    /// `sup |u − P_L u|` on the grid: how much of `u` the band limit drops.
    pub projection_residual: f64,
    pub mass: MassData,
}

fn common_terms(basis: &SpectralBasis, u: &[f64]) -> Result<(Coeffs, f64, f64, MassData)> {
    let grid = basis.grid();
    grid.check_len(u)?;
    let e = exp_two_u(u)?;
    let mass = MassData::from_weights(grid, &e);
    let c = basis.analyze_unchecked(u);
    let proj = basis.synthesize_unchecked(&c);
    let resid = u.iter().zip(proj.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let mean = grid.integrate_unchecked(u);
    Ok((c, mean, resid, mass))
}

/// `F_α(u) = α∫|∇u|² + 2∫u − ln∫e^{2u}`.
pub fn eval_f(alpha: f64, basis: &SpectralBasis, u: &[f64]) -> Result<FunctionalValue> {
    let (c, mean, projection_residual, mass) = common_terms(basis, u)?;
    let dirichlet = c.dirichlet_energy();
    let log_term = mass.mass.ln();
    Ok(FunctionalValue {
        alpha,
        dirichlet,
        mean,
        log_term,
        value: alpha * dirichlet + 2.0 * mean - log_term,
        projection_residual,
        mass,
    })
}

/// `I_α(u) = α∫|∇u|² + 2∫u − ½ ln[(∫e^{2u})² − Σ(∫e^{2u}x_i)²]`.
pub fn eval_i(alpha: f64, basis: &SpectralBasis, u: &[f64]) -> Result<FunctionalValue> {
    let (c, mean, projection_residual, mass) = common_terms(basis, u)?;
    let det = mass.gram_determinant();
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::Degenerate(format!(
            "M² − |m|² = {det:e} is not positive; quadrature cannot resolve e^(2u)"
        )));
    }
    let dirichlet = c.dirichlet_energy();
    let log_term = 0.5 * det.ln();
    Ok(FunctionalValue {
        alpha,
        dirichlet,
        mean,
        log_term,
        value: alpha * dirichlet + 2.0 * mean - log_term,
        projection_residual,
        mass,
    })
}

/// `F_α(u) − ½ ln(1 − |a|²)`, which equals `I_α(u)` for every `u` since both
/// functionals are invariant under constant shifts.
pub fn i_via_f(alpha: f64, basis: &SpectralBasis, u: &[f64]) -> Result<f64> {
    let f = eval_f(alpha, basis, u)?;
    let a = f.mass.center_norm;
    Ok(f.value - 0.5 * (1.0 - a * a).ln())
}

/// Shifts `u` by `−½ ln M` so that `∫e^{2u} dω = 1`.
pub fn normalize(grid: &UnitSphereGrid, u: &[f64]) -> Result<Field> {
    let m = mass_moments(grid, u)?;
    Ok(Field(u.iter().map(|v| v - 0.5 * m.mass.ln()).collect()))
}

/// A residual field with its norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub field: Field,
    pub sup: f64,
    /// `(∫ R² dω)^{1/2}`.
    pub l2: f64,
}

impl Residual {
    fn new(grid: &UnitSphereGrid, field: Vec<f64>) -> Self {
        let sup = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sq: Vec<f64> = field.iter().map(|v| v * v).collect();
        let l2 = grid.integrate_unchecked(&sq).max(0.0).sqrt();
        Residual { field: Field(field), sup, l2 }
    }
}

fn spectral_laplacian_values(basis: &SpectralBasis, u: &[f64]) -> Field {
    let c = basis.analyze_unchecked(u);
    basis.synthesize_unchecked(&c.laplacian())
}

/// `R = αΔu + e^{2u}(1 − a·x)/(1 − |a|²) − 1` with `a` the center of mass of `u`.
pub fn el_residual(alpha: f64, basis: &SpectralBasis, u: &[f64]) -> Result<Residual> {
    let grid = basis.grid();
    let m = mass_moments(grid, u)?;
    if (m.mass - 1.0).abs() > 1e-6 {
        return Err(invalid(format!("field is not normalized: M = {}", m.mass)));
    }
    if m.center_norm >= 1.0 - 1e-12 {
        return Err(Error::Degenerate(format!("|a| = {} too close to 1", m.center_norm)));
    }
    let a = m.center;
    let denom = 1.0 - m.center_norm * m.center_norm;
    let lap = spectral_laplacian_values(basis, u);
    let r: Vec<f64> = (0..u.len())
        .map(|n| {
            let x = &grid.nodes()[n];
            alpha * lap[n] + (2.0 * u[n]).exp() * (1.0 - dot(&a, x)) / denom - 1.0
        })
        .collect();
    Ok(Residual::new(grid, r))
}

/// `R = αΔu + e^{2u}(ρ − β·x) − 1`.
pub fn el_residual_multiplier(
    alpha: f64,
    basis: &SpectralBasis,
    u: &[f64],
    rho: f64,
    beta: [f64; 3],
) -> Result<Residual> {
    let grid = basis.grid();
    grid.check_len(u)?;
    let e = exp_two_u(u)?;
    let lap = spectral_laplacian_values(basis, u);
    let r: Vec<f64> = (0..u.len())
        .map(|n| alpha * lap[n] + e[n] * (rho - dot(&beta, &grid.nodes()[n])) - 1.0)
        .collect();
    Ok(Residual::new(grid, r))
}

/// `K(x) = c0 + c·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCurvature {
    pub c0: f64,
    pub c: [f64; 3],
}

impl AffineCurvature {
    pub fn is_positive(&self) -> bool {
        self.c0 > dot(&self.c, &self.c).sqrt()
    }

    pub fn eval(&self, x: &Point3) -> f64 {
        self.c0 + dot(&self.c, x)
    }
}

/// `∫ (∇K·∇x_j) e^{2u} dω` for affine `K`, using `∇x_i·∇x_j = δ_ij − x_i x_j`:
/// component `j` is `c_j M − Σ_i c_i ∫x_i x_j e^{2u}`.
pub fn kazdan_warner_residual(
    grid: &UnitSphereGrid,
    u: &[f64],
    k: &AffineCurvature,
) -> Result<[f64; 3]> {
    let m = mass_moments(grid, u)?;
    let s = second_moments(grid, u)?;
    let mut out = [0.0; 3];
    for j in 0..3 {
        out[j] = k.c[j] * m.mass - (0..3).map(|i| k.c[i] * s[i][j]).sum::<f64>();
    }
    Ok(out)
}

/// Full Kazdan–Warner residual for a solution of `αΔu + e^{2u}(ρ − β·x) = 1`,
/// i.e. `Δu + K e^{2u} = 1/α` rescaled, with
/// `K = (ρ − β·x)/α + (1 − 1/α) e^{−2u}`.
///
/// The affine part goes through [`kazdan_warner_residual`]; the `e^{−2u}` part
/// reduces to `−2(1 − 1/α)∫∇u·∇x_j = −4(1 − 1/α)∫u x_j`, read off the
/// degree-one coefficients of `u`.
pub fn kazdan_warner_full(
    alpha: f64,
    basis: &SpectralBasis,
    u: &[f64],
    rho: f64,
    beta: [f64; 3],
) -> Result<[f64; 3]> {
    let k = AffineCurvature { c0: rho / alpha, c: [-beta[0] / alpha, -beta[1] / alpha, -beta[2] / alpha] };
    let mut r = kazdan_warner_residual(basis.grid(), u, &k)?;
    let c = basis.analyze(u)?;
    let s3 = 3f64.sqrt();
    // ∫u x_j = c_{1,m(j)}/√3 with m(x₁) = 1, m(x₂) = −1, m(x₃) = 0.
    let ux = [c.get(1, 1) / s3, c.get(1, -1) / s3, c.get(1, 0) / s3];
    for j in 0..3 {
        r[j] += -4.0 * (1.0 - 1.0 / alpha) * ux[j];
    }
    Ok(r)
}

/// Residual of the multiplier identity obtained from Kazdan–Warner:
/// `2(1/α − 3/2) Σ_i β_i ∫x_i x_j e^{2u} − [2(1/α − 1) ρ a_j − β_j]`.
pub fn multiplier_identity_residual(
    alpha: f64,
    grid: &UnitSphereGrid,
    u: &[f64],
    rho: f64,
    beta: [f64; 3],
) -> Result<[f64; 3]> {
    let m = mass_moments(grid, u)?;
    let s = second_moments(grid, u)?;
    let mut out = [0.0; 3];
    for j in 0..3 {
        let lhs = 2.0 * (1.0 / alpha - 1.5) * (0..3).map(|i| beta[i] * s[i][j]).sum::<f64>();
        let rhs = 2.0 * (1.0 / alpha - 1.0) * rho * m.moment[j] / m.mass - beta[j];
        out[j] = lhs - rhs;
    }
    Ok(out)
}

/// Seeded random band-limited field: `c_{l,m} ~ N(0, A²/(1 + l(l+1))^p)` for
/// `1 ≤ l ≤ L`, mean coefficient zero.
pub fn random_coeffs(seed: u64, l_max: usize, amplitude: f64, decay_power: f64) -> Result<Coeffs> {
    if decay_power < 1.0 {
        return Err(invalid(format!("decay_power must be at least 1, got {decay_power}")));
    }
    if !amplitude.is_finite() || amplitude < 0.0 {
        return Err(invalid(format!("amplitude must be finite and non-negative, got {amplitude}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut c = Coeffs::zeros(l_max);
    for (k, v) in c.as_mut_slice().iter_mut().enumerate().skip(1) {
        let z: f64 = normal.sample(&mut rng);
        let l = lm_of(k).0;
        *v = amplitude * z / (1.0 + eigenvalue(l)).powf(0.5 * decay_power);
    }
    Ok(c)
}

/// [`random_coeffs`] synthesized on the basis grid.
pub fn random_field(
    seed: u64,
    basis: &SpectralBasis,
    amplitude: f64,
    decay_power: f64,
) -> Result<Field> {
    let c = random_coeffs(seed, basis.l_max(), amplitude, decay_power)?;
    basis.synthesize(&c)
}

/// Samples `u ∘ R` on the grid for a band-limited `u` and rotation matrix `R`.
pub fn rotate_field(basis: &SpectralBasis, c: &Coeffs, rot: &[[f64; 3]; 3]) -> Field {
    Field(
        basis
            .grid()
            .nodes()
            .iter()
            .map(|x| {
                let y = [dot(&rot[0], x), dot(&rot[1], x), dot(&rot[2], x)];
                basis.evaluate(c, &y)
            })
            .collect(),
    )
}

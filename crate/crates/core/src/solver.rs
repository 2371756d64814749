//! Constrained minimization of `I_α` over `{∫e^{2u} = 1, ∫e^{2u}x = a e₃}`.
//!
//! Far from a solution an augmented Lagrangian with a preconditioned
//! Barzilai–Borwein gradient loop is used; once the projected Euler–Lagrange
//! residual is small the iterate is handed to a bordered Newton solve for the
//! harmonic coefficients together with the multipliers `(ρ, β)`.
//!
//! Band-limited iterates cannot make the pointwise residual vanish (`e^{2u}` is
//! not band-limited), so convergence is judged on the Galerkin residual
//! `P_L R` and the pointwise `sup |R|` is reported alongside.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{bound_curves, u_explicit};
use crate::error::{invalid, Result};
use crate::functionals::{el_residual_multiplier, eval_i, exp_two_u, MassData};
use crate::grid::dot;
use crate::harmonics::{eigenvalue, lm_of, Coeffs, Field, SpectralBasis};

const E3: [f64; 3] = [0.0, 0.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bound on the Galerkin residual `‖P_L R‖_{L²}`.
    pub tol_el: f64,
    /// Bound on `|M − 1|` and `|m − a e₃|`.
    pub tol_c: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
    pub max_outer: usize,
    pub max_inner: usize,
    pub penalty0: f64,
    pub penalty_growth: f64,
    /// Projected residual below which Newton takes over.
    pub newton_switch: f64,
    /// Restrict to zonal coefficients (`m = 0`) about `e₃`.
    pub zonal: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_el: 1e-8,
            tol_c: 1e-10,
            max_newton: 50,
            max_halvings: 20,
            max_outer: 8,
            max_inner: 400,
            penalty0: 10.0,
            penalty_growth: 10.0,
            newton_switch: 1e-2,
            zonal: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ELSolution {
    #[serde(skip)]
    pub u: Field,
    #[serde(skip)]
    pub coeffs: Option<Coeffs>,
    pub alpha: f64,
    pub a_target: f64,
    pub rho: f64,
    pub beta: [f64; 3],
    pub i_value: f64,
    pub dirichlet: f64,
    /// Pointwise `sup |αΔu + e^{2u}(ρ − β·x) − 1|` on the grid.
    pub el_residual_sup: f64,
    /// `‖P_L R‖_{L²}`, the quantity Newton drives to zero.
    pub el_residual_projected: f64,
    /// `[M − 1, m₁, m₂, m₃ − a]`.
    pub constraint_residual: [f64; 4],
    pub iterations: usize,
    pub newton_steps: usize,
    pub converged: bool,
    pub axisym_deviation: f64,
    pub message: String,
}

impl ELSolution {
    pub fn constraint_max(&self) -> f64 {
        self.constraint_residual.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// One line of an `m(α, a)` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub a: f64,
    pub m_value: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub dirichlet: f64,
    pub beta3: f64,
    pub converged: bool,
    /// `m / ((1/α − 3/2) ln(1 − a²))`; informational only.
    pub asym_ratio: f64,
    pub message: String,
}

struct Problem<'a> {
    alpha: f64,
    target: [f64; 3],
    basis: &'a SpectralBasis,
    opts: SolverOptions,
    /// Coefficient indices that are free.
    active: Vec<usize>,
    /// Components of `β` (and of the moment constraint) that are free.
    beta_active: Vec<usize>,
    /// `l(l+1)` per flat coefficient index.
    lap: Vec<f64>,
}

struct State {
    c: Coeffs,
    u: Field,
    e: Vec<f64>,
    mass: MassData,
}

/// Projected residual data for given `(c, ρ, β)`.
struct Galerkin {
    f: Vec<f64>,
    g: Vec<f64>,
}

impl Galerkin {
    fn el_norm(&self) -> f64 {
        self.f.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn cons_max(&self) -> f64 {
        self.g.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn merit(&self) -> f64 {
        self.f.iter().chain(&self.g).map(|v| v * v).sum()
    }
}

impl<'a> Problem<'a> {
    fn new(alpha: f64, a_target: f64, basis: &'a SpectralBasis, opts: SolverOptions) -> Result<Self> {
        if !(alpha > 0.5) || !alpha.is_finite() {
            return Err(invalid(format!("alpha must exceed 1/2, got {alpha}")));
        }
        if !(0.0..1.0).contains(&a_target) {
            return Err(invalid(format!("a_target must lie in [0, 1), got {a_target}")));
        }
        let nc = basis.n_coeffs();
        let active: Vec<usize> = if opts.zonal {
            (0..nc).filter(|&k| lm_of(k).1 == 0).collect()
        } else {
            (0..nc).collect()
        };
        let beta_active = if opts.zonal { vec![2] } else { vec![0, 1, 2] };
        let lap = (0..nc).map(|k| eigenvalue(lm_of(k).0)).collect();
        Ok(Self { alpha, target: [0.0, 0.0, a_target], basis, opts, active, beta_active, lap })
    }

    fn state(&self, c: Coeffs) -> Result<State> {
        let u = self.basis.synthesize_unchecked(&c);
        let e = exp_two_u(&u)?;
        let mass = self.moments(&e);
        Ok(State { c, u, e, mass })
    }

    fn moments(&self, e: &[f64]) -> MassData {
        let grid = self.basis.grid();
        let mass = grid.integrate_unchecked(e);
        let mut moment = [0.0; 3];
        for (i, mi) in moment.iter_mut().enumerate() {
            *mi = grid.integrate_fn_weighted(e, |x| x[i]);
        }
        let center = [moment[0] / mass, moment[1] / mass, moment[2] / mass];
        MassData { mass, moment, center, center_norm: dot(&center, &center).sqrt() }
    }

    /// Shifts `c₀₀` so that `M = 1`.
    fn normalized(&self, mut c: Coeffs) -> Result<State> {
        let s = self.state(c.clone())?;
        let v = c.get(0, 0) - 0.5 * s.mass.mass.ln();
        c.set(0, 0, v);
        self.state(c)
    }

    fn restrict(&self, c: &mut Coeffs) {
        if self.opts.zonal {
            let mut keep = vec![false; c.as_slice().len()];
            for &k in &self.active {
                keep[k] = true;
            }
            for (v, k) in c.as_mut_slice().iter_mut().zip(keep) {
                if !k {
                    *v = 0.0;
                }
            }
        }
    }

    fn constraint(&self, s: &State) -> [f64; 3] {
        let c = s.mass.center;
        [c[0] - self.target[0], c[1] - self.target[1], c[2] - self.target[2]]
    }

    /// Augmented Lagrangian `I_α − λ·g + (μ/2)|g|²`, `g = m/M − a e₃`.
    fn merit_al(&self, s: &State, lambda: &[f64; 3], mu: f64) -> f64 {
        let d: f64 = s.c.as_slice().iter().zip(&self.lap).map(|(c, l)| l * c * c).sum();
        let mean = self.basis.grid().integrate_unchecked(&s.u);
        let det = s.mass.gram_determinant();
        if !(det > 0.0) {
            return f64::INFINITY;
        }
        let g = self.constraint(s);
        let lin: f64 = (0..3).map(|i| -lambda[i] * g[i] + 0.5 * mu * g[i] * g[i]).sum();
        self.alpha * d + 2.0 * mean - 0.5 * det.ln() + lin
    }

    fn grad_al(&self, s: &State, lambda: &[f64; 3], mu: f64) -> Coeffs {
        let m = &s.mass;
        let det = m.gram_determinant();
        let g = self.constraint(s);
        let w: Vec<f64> = (0..3).map(|i| -lambda[i] + mu * g[i]).collect();
        let nodes = self.basis.grid().nodes();
        let h: Vec<f64> = s
            .e
            .iter()
            .zip(nodes)
            .map(|(e, x)| {
                let main = -2.0 * e * (m.mass - dot(&m.moment, x)) / det;
                let pen: f64 = (0..3).map(|i| w[i] * 2.0 * e * (x[i] - m.center[i]) / m.mass).sum();
                main + pen
            })
            .collect();
        let mut gc = self.basis.analyze_unchecked(&h);
        for (k, v) in gc.as_mut_slice().iter_mut().enumerate() {
            *v += 2.0 * self.alpha * self.lap[k] * s.c.as_slice()[k];
        }
        let v0 = gc.get(0, 0) + 2.0;
        gc.set(0, 0, v0);
        self.restrict(&mut gc);
        gc
    }

    /// Multipliers implied by the augmented Lagrangian at `s` with effective `λ`.
    fn multipliers_from_lambda(&self, s: &State, lambda_eff: &[f64; 3]) -> (f64, [f64; 3]) {
        let a = s.mass.center;
        let q = 1.0 - dot(&a, &a);
        let beta = [a[0] / q - lambda_eff[0], a[1] / q - lambda_eff[1], a[2] / q - lambda_eff[2]];
        (1.0 + dot(&beta, &a), beta)
    }

    /// Least-squares `(ρ, β)` for a given `u`, from the affine dependence of the
    /// projected residual on the multipliers.
    fn multipliers_lsq(&self, s: &State) -> (f64, [f64; 3]) {
        let base = self.galerkin(s, 0.0, [0.0; 3]);
        let nodes = self.basis.grid().nodes();
        let a_rho = self.basis.analyze_unchecked(&s.e);
        let cols: Vec<Vec<f64>> = std::iter::once(a_rho.into_vec())
            .chain(self.beta_active.iter().map(|&i| {
                let v: Vec<f64> = s.e.iter().zip(nodes).map(|(e, x)| -e * x[i]).collect();
                self.basis.analyze_unchecked(&v).into_vec()
            }))
            .map(|col| self.active.iter().map(|&k| col[k]).collect())
            .collect();
        let n = cols.len();
        let a = DMatrix::from_fn(self.active.len(), n, |r, c| cols[c][r]);
        let b = DVector::from_iterator(self.active.len(), base.f.iter().map(|v| -v));
        let ata = a.transpose() * &a;
        let atb = a.transpose() * b;
        let x = ata.lu().solve(&atb).unwrap_or_else(|| DVector::zeros(n));
        let mut beta = [0.0; 3];
        for (j, &i) in self.beta_active.iter().enumerate() {
            beta[i] = x[j + 1];
        }
        (x[0], beta)
    }

    fn galerkin(&self, s: &State, rho: f64, beta: [f64; 3]) -> Galerkin {
        let nodes = self.basis.grid().nodes();
        let v: Vec<f64> = s.e.iter().zip(nodes).map(|(e, x)| e * (rho - dot(&beta, x))).collect();
        let proj = self.basis.analyze_unchecked(&v);
        let c = s.c.as_slice();
        let f = self
            .active
            .iter()
            .map(|&k| {
                let delta = if k == 0 { 1.0 } else { 0.0 };
                -self.alpha * self.lap[k] * c[k] + proj.as_slice()[k] - delta
            })
            .collect();
        let mut g = vec![s.mass.mass - 1.0];
        for &i in &self.beta_active {
            g.push(s.mass.moment[i] - self.target[i]);
        }
        Galerkin { f, g }
    }

    fn jacobian(&self, s: &State, rho: f64, beta: [f64; 3]) -> Result<DMatrix<f64>> {
        let nodes = self.basis.grid().nodes();
        let w: Vec<f64> = s.e.iter().zip(nodes).map(|(e, x)| 2.0 * e * (rho - dot(&beta, x))).collect();
        let gram = self.basis.weighted_gram(&w)?;
        let na = self.active.len();
        let nb = self.beta_active.len();
        let n = na + 1 + nb;
        let mut jac = DMatrix::zeros(n, n);
        for (r, &k) in self.active.iter().enumerate() {
            for (c, &j) in self.active.iter().enumerate() {
                jac[(r, c)] = gram[(k, j)];
            }
            jac[(r, r)] -= self.alpha * self.lap[k];
        }
        let e_y = self.basis.analyze_unchecked(&s.e);
        let ex_y: Vec<Coeffs> = (0..3)
            .map(|i| {
                let v: Vec<f64> = s.e.iter().zip(nodes).map(|(e, x)| e * x[i]).collect();
                self.basis.analyze_unchecked(&v)
            })
            .collect();
        for (r, &k) in self.active.iter().enumerate() {
            jac[(r, na)] = e_y.as_slice()[k];
            jac[(na, r)] = 2.0 * e_y.as_slice()[k];
            for (j, &i) in self.beta_active.iter().enumerate() {
                jac[(r, na + 1 + j)] = -ex_y[i].as_slice()[k];
                jac[(na + 1 + j, r)] = 2.0 * ex_y[i].as_slice()[k];
            }
        }
        Ok(jac)
    }

    fn newton(&self, start: State, rho0: f64, beta0: [f64; 3]) -> NewtonOutcome {
        let mut s = start;
        let (mut rho, mut beta) = (rho0, beta0);
        let mut res = self.galerkin(&s, rho, beta);
        let na = self.active.len();
        for step in 0..=self.opts.max_newton {
            if res.el_norm() <= self.opts.tol_el && res.cons_max() <= self.opts.tol_c {
                return NewtonOutcome { state: s, rho, beta, steps: step, converged: true, message: String::new() };
            }
            if step == self.opts.max_newton {
                break;
            }
            let jac = match self.jacobian(&s, rho, beta) {
                Ok(j) => j,
                Err(e) => return NewtonOutcome::failed(s, rho, beta, step, e.to_string()),
            };
            let rhs = DVector::from_iterator(na + res.g.len(), res.f.iter().chain(&res.g).map(|v| -v));
            let Some(dz) = jac.lu().solve(&rhs) else {
                return NewtonOutcome::failed(s, rho, beta, step, "singular Jacobian".into());
            };
            let merit0 = res.merit();
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=self.opts.max_halvings {
                let mut c = s.c.clone();
                for (r, &k) in self.active.iter().enumerate() {
                    c.as_mut_slice()[k] += t * dz[r];
                }
                let rho_t = rho + t * dz[na];
                let mut beta_t = beta;
                for (j, &i) in self.beta_active.iter().enumerate() {
                    beta_t[i] += t * dz[na + 1 + j];
                }
                if let Ok(st) = self.state(c) {
                    let r = self.galerkin(&st, rho_t, beta_t);
                    if r.merit() < (1.0 - 1e-4 * t) * merit0 || r.merit() <= 1e-30 {
                        accepted = Some((st, rho_t, beta_t, r));
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((st, r_t, b_t, r)) => {
                    s = st;
                    rho = r_t;
                    beta = b_t;
                    res = r;
                }
                None => {
                    return NewtonOutcome::failed(s, rho, beta, step, "line search failed".into());
                }
            }
        }
        let msg = format!(
            "Newton did not converge: projected residual {:.3e}, constraints {:.3e}",
            res.el_norm(),
            res.cons_max()
        );
        NewtonOutcome::failed(s, rho, beta, self.opts.max_newton, msg)
    }

    fn finish(&self, out: NewtonOutcome, iterations: usize) -> Result<ELSolution> {
        let s = out.state;
        let res = self.galerkin(&s, out.rho, out.beta);
        let pointwise = el_residual_multiplier(self.alpha, self.basis, &s.u, out.rho, out.beta)?;
        let iv = eval_i(self.alpha, self.basis, &s.u)?;
        let m = &s.mass;
        Ok(ELSolution {
            axisym_deviation: deviation_of(&s.c),
            u: s.u.clone(),
            coeffs: Some(s.c.clone()),
            alpha: self.alpha,
            a_target: self.target[2],
            rho: out.rho,
            beta: out.beta,
            i_value: iv.value,
            dirichlet: iv.dirichlet,
            el_residual_sup: pointwise.sup,
            el_residual_projected: res.el_norm(),
            constraint_residual: [m.mass - 1.0, m.moment[0], m.moment[1], m.moment[2] - self.target[2]],
            iterations,
            newton_steps: out.steps,
            converged: out.converged,
            message: out.message,
        })
    }

    fn initial_state(&self, init: Option<&Field>) -> Result<State> {
        let u = match init {
            Some(f) => {
                self.basis.grid().check_len(f)?;
                f.clone()
            }
            None => u_explicit(self.basis.grid(), self.target[2], E3)?,
        };
        let mut c = self.basis.analyze_unchecked(&u);
        self.restrict(&mut c);
        self.normalized(c)
    }

    /// Augmented-Lagrangian outer loop with Newton hand-off.
    fn minimize(&self, init: Option<&Field>) -> Result<ELSolution> {
        let mut s = self.initial_state(init)?;
        let mut lambda = [0.0; 3];
        let mut mu = self.opts.penalty0;
        let mut iterations = 0;
        let mut last_failure = String::from("augmented Lagrangian did not reach the Newton basin");
        let precond: Vec<f64> = self.lap.iter().map(|l| 1.0 / (1.0 + self.alpha * l)).collect();

        // A good initial guess goes straight to Newton.
        if let Some(sol) = self.try_newton(&s, None, iterations)? {
            return Ok(sol);
        }

        for outer in 0..self.opts.max_outer {
            let inner_tol = (1e-3 * 0.1f64.powi(outer as i32)).max(1e-9);
            let mut phi = self.merit_al(&s, &lambda, mu);
            let mut grad = self.grad_al(&s, &lambda, mu);
            let mut tau = 1.0;
            let mut prev: Option<(Coeffs, Coeffs)> = None;
            for _ in 0..self.opts.max_inner {
                iterations += 1;
                let dir: Vec<f64> = grad.as_slice().iter().zip(&precond).map(|(g, p)| -g * p).collect();
                let slope: f64 = dir.iter().zip(grad.as_slice()).map(|(d, g)| d * g).sum();
                if (-slope).sqrt() < inner_tol {
                    break;
                }
                if let Some((dc, dg)) = &prev {
                    let sy: f64 = dc.as_slice().iter().zip(dg.as_slice()).map(|(a, b)| a * b).sum();
                    let ss: f64 =
                        dc.as_slice().iter().zip(&precond).map(|(a, p)| a * a / p).sum();
                    tau = if sy > 0.0 { (ss / sy).clamp(1e-6, 1e6) } else { (2.0 * tau).min(1e6) };
                }
                let mut step = None;
                for _ in 0..40 {
                    let mut c = s.c.clone();
                    for (v, d) in c.as_mut_slice().iter_mut().zip(&dir) {
                        *v += tau * d;
                    }
                    if let Ok(st) = self.normalized(c) {
                        let val = self.merit_al(&st, &lambda, mu);
                        if val <= phi + 1e-4 * tau * slope {
                            step = Some((st, val));
                            break;
                        }
                    }
                    tau *= 0.5;
                }
                let Some((st, val)) = step else { break };
                let g_new = self.grad_al(&st, &lambda, mu);
                let dc = st.c.lin_comb(1.0, &s.c, -1.0);
                let dg = g_new.lin_comb(1.0, &grad, -1.0);
                prev = Some((dc, dg));
                s = st;
                phi = val;
                grad = g_new;
            }
            let g = self.constraint(&s);
            let lambda_eff = [lambda[0] - mu * g[0], lambda[1] - mu * g[1], lambda[2] - mu * g[2]];
            if let Some(sol) = self.try_newton(&s, Some(&lambda_eff), iterations)? {
                if sol.converged {
                    return Ok(sol);
                }
                last_failure = sol.message.clone();
            }
            lambda = lambda_eff;
            mu *= self.opts.penalty_growth;
        }
        // Report the best available iterate.
        let (rho, beta) = self.multipliers_lsq(&s);
        self.finish(
            NewtonOutcome { state: s, rho, beta, steps: 0, converged: false, message: last_failure },
            iterations,
        )
    }

    /// Runs Newton from `s` if the projected residual is below the switch
    /// threshold; `Ok(None)` when the iterate is not yet close enough.
    fn try_newton(
        &self,
        s: &State,
        lambda_eff: Option<&[f64; 3]>,
        iterations: usize,
    ) -> Result<Option<ELSolution>> {
        let (rho, beta) = match lambda_eff {
            Some(l) => self.multipliers_from_lambda(s, l),
            None => self.multipliers_lsq(s),
        };
        let res = self.galerkin(s, rho, beta);
        if res.el_norm() > self.opts.newton_switch || res.cons_max() > self.opts.newton_switch {
            return Ok(None);
        }
        let start = State { c: s.c.clone(), u: s.u.clone(), e: s.e.clone(), mass: s.mass };
        let out = self.newton(start, rho, beta);
        Ok(Some(self.finish(out, iterations)?))
    }
}

struct NewtonOutcome {
    state: State,
    rho: f64,
    beta: [f64; 3],
    steps: usize,
    converged: bool,
    message: String,
}

impl NewtonOutcome {
    fn failed(state: State, rho: f64, beta: [f64; 3], steps: usize, message: String) -> Self {
        Self { state, rho, beta, steps, converged: false, message }
    }
}

fn deviation_of(c: &Coeffs) -> f64 {
    let mut total = 0.0;
    let mut off = 0.0;
    for (k, v) in c.as_slice().iter().enumerate().skip(1) {
        total += v * v;
        if lm_of(k).1 != 0 {
            off += v * v;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        off / total
    }
}

/// Minimizes `I_α` subject to unit mass and center `(0, 0, a_target)`.
///
/// Starts from `init` (or the explicit `α = 2/3` profile with the same center),
/// runs the augmented-Lagrangian loop until the projected residual falls below
/// `opts.newton_switch`, then finishes with Newton.
pub fn minimize_constrained(
    alpha: f64,
    a_target: f64,
    basis: &SpectralBasis,
    init: Option<&Field>,
    opts: &SolverOptions,
) -> Result<ELSolution> {
    Problem::new(alpha, a_target, basis, *opts)?.minimize(init)
}

/// Newton iteration on the Euler–Lagrange system with multipliers, starting from
/// `init` (default: the explicit profile) and least-squares multipliers.
pub fn newton_el(
    alpha: f64,
    a_target: f64,
    basis: &SpectralBasis,
    init: Option<&Field>,
    opts: &SolverOptions,
) -> Result<ELSolution> {
    let p = Problem::new(alpha, a_target, basis, *opts)?;
    let s = p.initial_state(init)?;
    let (rho, beta) = p.multipliers_lsq(&s);
    let out = p.newton(s, rho, beta);
    p.finish(out, 0)
}

/// Same as [`newton_el`] but with caller-supplied starting multipliers.
pub fn newton_el_with_multipliers(
    alpha: f64,
    a_target: f64,
    basis: &SpectralBasis,
    init: &Field,
    rho: f64,
    beta: [f64; 3],
    opts: &SolverOptions,
) -> Result<ELSolution> {
    let p = Problem::new(alpha, a_target, basis, *opts)?;
    let s = p.initial_state(Some(init))?;
    let out = p.newton(s, rho, beta);
    p.finish(out, 0)
}

/// Energy fraction in the non-zonal coefficients (`m ≠ 0`), excluding the mean.
pub fn axisym_deviation(sol: &ELSolution, basis: &SpectralBasis) -> Result<f64> {
    match &sol.coeffs {
        Some(c) => Ok(deviation_of(c)),
        None => Ok(deviation_of(&basis.analyze(&sol.u)?)),
    }
}

/// Check of `dI/da = −2(β₃ − a/(1 − a²))` along a computed branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    /// `I(a_last) − I(a_first)`.
    pub delta_i: f64,
    /// Trapezoid sum of `−2(β₃ − a/(1 − a²)) da`.
    pub trapezoid: f64,
    pub max_abs_integrand: f64,
}

impl DerivativeCheck {
    pub fn discrepancy(&self) -> f64 {
        (self.delta_i - self.trapezoid).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    pub solutions: Vec<ELSolution>,
    pub derivative: DerivativeCheck,
    /// Set when the chain stopped early.
    pub failure: Option<String>,
}

/// Warm-started chain of Newton solves along increasing `a`. A failed step is
/// retried through up to three bisections of the increment before the chain is
/// truncated.
pub fn continuation(
    alpha: f64,
    a_list: &[f64],
    basis: &SpectralBasis,
    opts: &SolverOptions,
) -> Result<Continuation> {
    if a_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("a_list must be strictly increasing"));
    }
    let mut solutions: Vec<ELSolution> = Vec::with_capacity(a_list.len());
    let mut failure = None;
    for &a in a_list {
        let sol = match solutions.last() {
            None => minimize_constrained(alpha, a, basis, None, opts)?,
            Some(prev) => step_to(alpha, prev, a, basis, opts, 3)?,
        };
        if !sol.converged {
            failure = Some(format!("step to a = {a} failed: {}", sol.message));
            break;
        }
        solutions.push(sol);
    }
    let integrand: Vec<f64> =
        solutions.iter().map(|s| -2.0 * (s.beta[2] - s.a_target / (1.0 - s.a_target * s.a_target))).collect();
    let trapezoid = solutions
        .windows(2)
        .zip(integrand.windows(2))
        .map(|(s, f)| 0.5 * (f[0] + f[1]) * (s[1].a_target - s[0].a_target))
        .sum();
    let delta_i = match (solutions.first(), solutions.last()) {
        (Some(f), Some(l)) => l.i_value - f.i_value,
        _ => 0.0,
    };
    let max_abs_integrand = integrand.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Continuation { solutions, derivative: DerivativeCheck { delta_i, trapezoid, max_abs_integrand }, failure })
}

fn step_to(
    alpha: f64,
    prev: &ELSolution,
    a: f64,
    basis: &SpectralBasis,
    opts: &SolverOptions,
    depth: u32,
) -> Result<ELSolution> {
    let sol = newton_el_with_multipliers(alpha, a, basis, &prev.u, prev.rho, prev.beta, opts)?;
    if sol.converged || depth == 0 {
        return Ok(sol);
    }
    let mid = 0.5 * (prev.a_target + a);
    let half = step_to(alpha, prev, mid, basis, opts, depth - 1)?;
    if !half.converged {
        return Ok(half);
    }
    step_to(alpha, &half, a, basis, opts, depth - 1)
}

/// Constrained minima over an `α × a` table, joined with the analytic bounds.
///
/// Rows (one per `α`) run in parallel; within a row each solve is warm-started
/// from the previous converged one.
pub fn m_sweep(
    alpha_list: &[f64],
    a_list: &[f64],
    basis: &SpectralBasis,
    opts: &SolverOptions,
) -> Vec<SweepRow> {
    alpha_list
        .par_iter()
        .map(|&alpha| {
            let mut rows = Vec::with_capacity(a_list.len());
            let mut warm: Option<ELSolution> = None;
            for &a in a_list {
                rows.push(sweep_row(alpha, a, basis, opts, &mut warm));
            }
            rows
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

fn sweep_row(
    alpha: f64,
    a: f64,
    basis: &SpectralBasis,
    opts: &SolverOptions,
    warm: &mut Option<ELSolution>,
) -> SweepRow {
    let bounds = bound_curves(alpha, a);
    let solve = || -> Result<ELSolution> {
        let cold = minimize_constrained(alpha, a, basis, None, opts)?;
        if cold.converged {
            return Ok(cold);
        }
        match warm.as_ref() {
            Some(prev) => {
                let hot = step_to(alpha, prev, a, basis, opts, 3)?;
                Ok(if hot.converged { hot } else { cold })
            }
            None => Ok(cold),
        }
    };
    let (lower_bound, upper_bound) = match &bounds {
        Ok(b) => (b.lower, b.upper),
        Err(_) => (f64::NAN, f64::NAN),
    };
    match solve() {
        Ok(sol) => {
            let asym = (1.0 / alpha - 1.5) * (-a * a).ln_1p();
            let row = SweepRow {
                alpha,
                a,
                m_value: sol.i_value,
                lower_bound,
                upper_bound,
                dirichlet: sol.dirichlet,
                beta3: sol.beta[2],
                converged: sol.converged,
                asym_ratio: if asym != 0.0 { sol.i_value / asym } else { f64::NAN },
                message: sol.message.clone(),
            };
            if sol.converged {
                *warm = Some(sol);
            }
            row
        }
        Err(e) => SweepRow {
            alpha,
            a,
            m_value: f64::NAN,
            lower_bound,
            upper_bound,
            dirichlet: f64::NAN,
            beta3: f64::NAN,
            converged: false,
            asym_ratio: f64::NAN,
            message: e.to_string(),
        },
    }
}

/// The `β₃` window: `a/(1 − a²) ≤ β₃ ≤ 2(1/α − 1) a/(1 − a²)` for `α ≤ 2/3`,
/// with the inequalities reversed for `α ≥ 2/3`. Returns `(low, high)`.
pub fn beta_window(alpha: f64, a: f64) -> (f64, f64) {
    let b0 = a / (1.0 - a * a);
    let b1 = 2.0 * (1.0 / alpha - 1.0) * b0;
    (b0.min(b1), b0.max(b1))
}

/// Independent solves from seeded random starting fields; the spread of the
/// resulting energies probes uniqueness of the minimizer.
pub fn multi_start(
    alpha: f64,
    a: f64,
    basis: &SpectralBasis,
    seeds: &[u64],
    amplitude: f64,
    opts: &SolverOptions,
) -> Result<Vec<ELSolution>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let init = crate::functionals::random_field(seed, basis, amplitude, 2.0)?;
            minimize_constrained(alpha, a, basis, Some(&init), opts)
        })
        .collect()
}

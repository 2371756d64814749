use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use sphere_ineq::closed_form::{grad_energy_explicit, mean_explicit, u_explicit, upper_energy_branch};
use sphere_ineq::functionals::{el_residual, eval_f, eval_i, exp_two_u, mass_moments, random_field};
use sphere_ineq::harmonics::lm_index;
use sphere_ineq::monotonicity::{check_monotonicity, g_curve, szego_remark_check, GCurve};
use sphere_ineq::solver::{beta_window, m_sweep, SolverOptions, SweepRow};
use sphere_ineq::spectral_analysis::{conformal_eigenvalues, hessian_diag_at_zero, kernel_dim};
use sphere_ineq::{SpectralBasis, UnitSphereGrid};

use crate::config::RunConfig;
use crate::report::{Record, Report};
use crate::CliError;

const NORTH: [f64; 3] = [0.0, 0.0, 1.0];
const TWO_THIRDS: f64 = 2.0 / 3.0;
/// Amplitudes cycled through by the fuzzers.
const AMPLITUDES: [f64; 4] = [0.25, 0.5, 1.0, 1.5];

pub fn build_basis(cfg: &RunConfig) -> Result<SpectralBasis, CliError> {
    cfg.validate()?;
    let grid = UnitSphereGrid::new(cfg.n_theta, cfg.n_phi)?;
    Ok(SpectralBasis::new(&grid, cfg.l_max)?)
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions { tol_el: cfg.tol_el, tol_c: cfg.tol_c, ..SolverOptions::default() }
}

fn is_two_thirds(alpha: f64) -> bool {
    (alpha - TWO_THIRDS).abs() < 1e-12
}

/// Mass, center, Euler–Lagrange residual, zero energy and the energy and mean
/// formulas of the explicit `α = 2/3` family, for each `a`.
pub fn cmd_verify_closed_form(cfg: &RunConfig, a_list: &[f64]) -> Result<Report, CliError> {
    let t0 = Instant::now();
    let basis = build_basis(cfg)?;
    let grid = basis.grid();
    let mut records = Vec::new();
    for &a in a_list {
        let u = u_explicit(grid, a, NORTH)?;
        let m = mass_moments(grid, &u)?;
        records.push(Record::eq(format!("closed_form.mass[a={a}]"), m.mass, 1.0, 1e-8));
        let center_err = (0..3).map(|i| (m.center[i] - a * NORTH[i]).abs()).fold(0.0, f64::max);
        records.push(Record::le(format!("closed_form.center_error[a={a}]"), center_err, 0.0, 1e-8));
        let budget = if a <= 0.6 { 1e-6 } else { 1e-3 };
        let r = el_residual(TWO_THIRDS, &basis, &u)?;
        records.push(Record::le(format!("closed_form.el_residual_sup[a={a}]"), r.sup, 0.0, budget));
        let i = eval_i(TWO_THIRDS, &basis, &u)?;
        records.push(Record::eq(format!("closed_form.i_two_thirds[a={a}]"), i.value, 0.0, 1e-7));
        let e = grad_energy_explicit(a)?;
        records.push(Record::eq(format!("closed_form.energy_forms_agree[a={a}]"), e.mu_form, e.a_form, 1e-12));
        records.push(Record::eq(format!("closed_form.dirichlet[a={a}]"), i.dirichlet, e.value(), 1e-6));
        records.push(Record::eq(format!("closed_form.mean[a={a}]"), i.mean, mean_explicit(a)?, 1e-8));
    }
    Ok(Report::new("verify-closed-form", cfg, json!({ "a": a_list }), records, t0))
}

/// Samples `I_α − (α − 2/3)∫|∇u|²` over seeded random fields and the explicit
/// family. Below `2/3` the explicit family is also followed towards `a → 1`.
pub fn cmd_fuzz_inequality(cfg: &RunConfig, alpha: f64, samples: usize, trend_a: &[f64]) -> Result<Report, CliError> {
    let t0 = Instant::now();
    if samples == 0 {
        return Err(CliError::Config("samples must be at least 1".into()));
    }
    if !(alpha > 0.0) {
        return Err(CliError::Config(format!("alpha must be positive, got {alpha}")));
    }
    let basis = build_basis(cfg)?;
    let values: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let u = random_field(cfg.seed.wrapping_add(k as u64), &basis, AMPLITUDES[k % AMPLITUDES.len()], 2.0)?;
            let i = eval_i(alpha, &basis, &u)?;
            let f = eval_f(alpha, &basis, &u)?;
            Ok((i.value - (alpha - TWO_THIRDS) * i.dirichlet, f.value))
        })
        .collect::<Result<_, CliError>>()?;
    let mut records = Vec::new();
    let fuzz_min = values.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    records.push(Record::ge("fuzz.min_margin", fuzz_min, 0.0, cfg.tol_report));
    if (alpha - 1.0).abs() < 1e-12 {
        let f_min = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        records.push(Record::ge("fuzz.min_f_one", f_min, 0.0, 1e-8));
    }
    for a in [0.0, 0.3, 0.6] {
        let u = u_explicit(basis.grid(), a, NORTH)?;
        let i = eval_i(alpha, &basis, &u)?;
        let margin = i.value - (alpha - TWO_THIRDS) * i.dirichlet;
        if is_two_thirds(alpha) {
            records.push(Record::eq(format!("family.equality[a={a}]"), margin, 0.0, 1e-7));
        } else {
            records.push(Record::ge(format!("family.margin[a={a}]"), margin, 0.0, cfg.tol_report));
        }
    }
    if alpha < TWO_THIRDS && !is_two_thirds(alpha) && !trend_a.is_empty() {
        let mut prev = f64::INFINITY;
        let mut decreasing = true;
        for &a in trend_a {
            let v = (alpha - TWO_THIRDS) * grad_energy_explicit(a)?.value();
            records.push(Record::eq(format!("unbounded.upper_form[a={a}]"), v, upper_energy_branch(alpha, a), 1e-6));
            if a <= 0.9 {
                let q = eval_i(alpha, &basis, &u_explicit(basis.grid(), a, NORTH)?)?.value;
                records.push(Record::eq(format!("unbounded.quadrature[a={a}]"), q, v, 1e-6));
            }
            decreasing &= v < prev;
            prev = v;
        }
        records.push(Record::flag("unbounded.decreasing", decreasing));
        records.push(Record::info("unbounded.final_value", prev));
    }
    let params = json!({ "alpha": alpha, "samples": samples, "trend_a": trend_a });
    Ok(Report::new("fuzz-inequality", cfg, params, records, t0))
}

/// Fixed CSV columns of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCsvRow {
    pub alpha: f64,
    pub a: f64,
    pub m_value: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub dirichlet: f64,
    pub beta3: f64,
    pub converged: bool,
}

impl From<&SweepRow> for SweepCsvRow {
    fn from(r: &SweepRow) -> Self {
        Self {
            alpha: r.alpha,
            a: r.a,
            m_value: r.m_value,
            lower_bound: r.lower_bound,
            upper_bound: r.upper_bound,
            dirichlet: r.dirichlet,
            beta3: r.beta3,
            converged: r.converged,
        }
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(SweepCsvRow::from(r))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Constrained minima `m(α, a)` with their analytic brackets and multiplier laws.
pub fn cmd_sweep(cfg: &RunConfig, alpha_list: &[f64], a_list: &[f64]) -> Result<(Report, Vec<SweepRow>), CliError> {
    let t0 = Instant::now();
    let basis = build_basis(cfg)?;
    let rows = m_sweep(alpha_list, a_list, &basis, &solver_options(cfg));
    let mut records = Vec::new();
    for r in &rows {
        let tag = format!("[alpha={},a={}]", r.alpha, r.a);
        records.push(Record::flag(format!("sweep.converged{tag}"), r.converged));
        if !r.converged {
            continue;
        }
        records.push(Record::ge(format!("sweep.lower{tag}"), r.m_value, r.lower_bound, 1e-3));
        records.push(Record::le(format!("sweep.upper{tag}"), r.m_value, r.upper_bound, 1e-3));
        if is_two_thirds(r.alpha) {
            records.push(Record::eq(format!("sweep.zero_minimum{tag}"), r.m_value, 0.0, 1e-5));
            records.push(Record::eq(format!("sweep.beta3{tag}"), r.beta3, r.a / (1.0 - r.a * r.a), 1e-5));
        } else if r.a > 0.0 {
            let (lo, hi) = beta_window(r.alpha, r.a);
            records.push(Record::ge(format!("sweep.beta3_low{tag}"), r.beta3, lo, 1e-6));
            records.push(Record::le(format!("sweep.beta3_high{tag}"), r.beta3, hi, 1e-6));
        }
        records.push(Record::info(format!("sweep.asym_ratio{tag}"), r.asym_ratio));
    }
    let params = json!({ "alpha": alpha_list, "a": a_list });
    Ok((Report::new("sweep", cfg, params, records, t0), rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMode {
    /// Diagonal of the second variation at `u = 0` against finite differences.
    Hessian,
    /// Kernel dimension of the linearization at `u = 0`.
    Kernel,
    /// Conformally weighted eigenvalues against the `m(m+1)` ladder.
    Conformal,
}

/// Degrees probed by the finite-difference Hessian check.
const HESSIAN_PROBES: [(usize, i64); 7] = [(0, 0), (1, 0), (1, 1), (2, 0), (2, -1), (3, 2), (5, 0)];

pub fn cmd_spectrum(cfg: &RunConfig, mode: SpectrumMode, alpha_list: &[f64], a_list: &[f64]) -> Result<Report, CliError> {
    let t0 = Instant::now();
    cfg.validate()?;
    let mut records = Vec::new();
    match mode {
        SpectrumMode::Hessian => {
            let basis = build_basis(cfg)?;
            let zero = vec![0.0; basis.grid().len()];
            for &alpha in alpha_list {
                let diag = hessian_diag_at_zero(alpha, cfg.l_max)?;
                let i0 = eval_i(alpha, &basis, &zero)?.value;
                let h = 1e-3;
                for (l, m) in hessian_probes(cfg.l_max) {
                    let y = basis.basis_field(l, m);
                    let plus: Vec<f64> = y.iter().map(|v| h * v).collect();
                    let minus: Vec<f64> = y.iter().map(|v| -h * v).collect();
                    let fd = (eval_i(alpha, &basis, &plus)?.value - 2.0 * i0 + eval_i(alpha, &basis, &minus)?.value)
                        / (h * h);
                    let d = diag[lm_index(l, m)];
                    records.push(Record::eq(
                        format!("hessian.diag[alpha={alpha},l={l},m={m}]"),
                        fd,
                        d,
                        1e-4 * d.abs().max(1.0),
                    ));
                }
            }
        }
        SpectrumMode::Kernel => {
            for &alpha in alpha_list {
                let expected = hessian_diag_at_zero(alpha, cfg.l_max)?.iter().filter(|v| v.abs() < 1e-12).count();
                let dim = kernel_dim(alpha, cfg.l_max, 1e-8)?;
                records.push(Record::eq(format!("kernel.dim[alpha={alpha}]"), dim as f64, expected as f64, 0.0));
            }
        }
        SpectrumMode::Conformal => {
            for &a in a_list {
                let rep = conformal_eigenvalues(a, cfg.l_max)?;
                let tol = if a >= 0.8 { 1e-4 } else { 1e-6 };
                let m_max = (rep.expected.len() as f64).sqrt() as usize - 1;
                let m_check = m_max.min(6);
                records.push(Record::le(
                    format!("conformal.ladder[a={a},m<={m_check}]"),
                    rep.deviation_up_to(m_check),
                    0.0,
                    tol,
                ));
                records.push(Record::ge(format!("conformal.gap_to_three[a={a}]"), rep.gap_to_three, 0.5, 0.0));
                records.push(Record::info(format!("conformal.resolved_deviation[a={a},m<={m_max}]"), rep.max_deviation));
            }
        }
    }
    let params = json!({ "mode": mode, "alpha": alpha_list, "a": a_list });
    Ok(Report::new("spectrum", cfg, params, records, t0))
}

/// Log-spaced `t` values on `[1e-3, 1e3]`.
pub fn default_t_grid() -> Vec<f64> {
    (0..=24).map(|k| 10f64.powf(-3.0 + 0.25 * k as f64)).collect()
}

fn g_records(ts: &[f64]) -> Result<(Vec<Record>, Vec<GCurve>), CliError> {
    let mut records = Vec::new();
    let mut table = Vec::with_capacity(ts.len());
    for &t in ts {
        let g = g_curve(t)?;
        records.push(Record::eq(format!("g.quadrature[t={t}]"), g.g, g.g_quadrature, 1e-10));
        records.push(Record::ge(format!("g.positive[t={t}]"), g.g, 0.0, 0.0));
        records.push(Record::ge(format!("g.increasing[t={t}]"), g.g_prime, 0.0, 0.0));
        table.push(g);
    }
    let g1 = g_curve(1.0)?;
    records.push(Record::eq("g.at_one", g1.g, 2.0 * 2f64.ln() - 1.0, 0.0));
    records.push(Record::eq("g.slope_at_one", g1.g_prime, 1.0, 1e-15));
    Ok((records, table))
}

/// Gram-determinant margins over random positive densities, the `g` table and
/// the `4/3` relation.
pub fn cmd_monotonicity(cfg: &RunConfig, samples: usize) -> Result<(Report, Vec<GCurve>), CliError> {
    let t0 = Instant::now();
    if samples == 0 {
        return Err(CliError::Config("samples must be at least 1".into()));
    }
    let basis = build_basis(cfg)?;
    let reps = (0..samples)
        .into_par_iter()
        .map(|k| {
            let u = random_field(cfg.seed.wrapping_add(k as u64), &basis, AMPLITUDES[k % AMPLITUDES.len()], 2.0)?;
            Ok(check_monotonicity(basis.grid(), &exp_two_u(&u)?)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let min_of = |f: &dyn Fn(&sphere_ineq::monotonicity::MonotonicityReport) -> f64| {
        reps.iter().map(f).fold(f64::INFINITY, f64::min)
    };
    let mut records = vec![
        Record::ge("monotonicity.min_d1", min_of(&|r| r.margin_positivity), 0.0, 1e-12),
        Record::ge("monotonicity.min_margin", min_of(&|r| r.margin_inequality), 0.0, 1e-8),
        Record::le("monotonicity.max_identity_residual", -min_of(&|r| -r.identity_residual), 0.0, 1e-10),
        Record::info("monotonicity.min_printed_margin", min_of(&|r| r.margin_printed)),
    ];
    let (g_recs, table) = g_records(&default_t_grid())?;
    records.extend(g_recs);
    let u = random_field(cfg.seed.wrapping_add(7), &basis, 0.5, 2.0)?;
    let margin = szego_remark_check(&basis, &u)?;
    let twice_i = 2.0 * eval_i(TWO_THIRDS, &basis, &u)?.value;
    records.push(Record::eq("szego.twice_i", margin, twice_i, 1e-10));
    records.push(Record::ge("szego.margin", margin, 0.0, 1e-6));
    let params = json!({ "samples": samples });
    Ok((Report::new("monotonicity", cfg, params, records, t0), table))
}

pub fn cmd_g_curve(cfg: &RunConfig, ts: &[f64]) -> Result<(Report, Vec<GCurve>), CliError> {
    let t0 = Instant::now();
    let (records, table) = g_records(ts)?;
    Ok((Report::new("g-curve", cfg, json!({ "t": ts }), records, t0), table))
}

pub fn g_table_csv(table: &[GCurve]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for g in table {
        w.serialize(g)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Degree and order of every probe used by the Hessian mode.
pub fn hessian_probes(l_max: usize) -> Vec<(usize, i64)> {
    HESSIAN_PROBES.iter().copied().filter(|(l, _)| *l <= l_max).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig { l_max: 12, n_theta: 24, n_phi: 48, ..RunConfig::default() }
    }

    #[test]
    fn closed_form_battery_passes() {
        let rep = cmd_verify_closed_form(&RunConfig::default(), &[0.0, 0.6]).unwrap();
        assert!(rep.pass, "{:#?}", rep.records.iter().filter(|r| !r.pass).collect::<Vec<_>>());
        assert_eq!(rep.records.len(), 14);
    }

    #[test]
    fn fuzz_is_deterministic() {
        let cfg = small();
        let a = cmd_fuzz_inequality(&cfg, TWO_THIRDS, 12, &[]).unwrap();
        let b = cmd_fuzz_inequality(&cfg, TWO_THIRDS, 12, &[]).unwrap();
        assert!(a.pass);
        assert_eq!(a.records, b.records);
        let mut ja = a.clone();
        let mut jb = b.clone();
        ja.wall_time = 0.0;
        jb.wall_time = 0.0;
        assert_eq!(ja.to_json(), jb.to_json());
        assert!(cmd_fuzz_inequality(&cfg, TWO_THIRDS, 0, &[]).is_err());
    }

    #[test]
    fn unboundedness_trend() {
        let rep = cmd_fuzz_inequality(&small(), 0.6, 4, &[0.5, 0.8, 0.95, 0.99]).unwrap();
        let last = rep.records.iter().find(|r| r.name == "unbounded.final_value").unwrap();
        assert!(last.measured < -0.5);
        assert!(rep.records.iter().any(|r| r.name == "unbounded.decreasing" && r.pass));
    }

    #[test]
    fn spectrum_modes() {
        let cfg = small();
        let rep = cmd_spectrum(&cfg, SpectrumMode::Kernel, &[0.6, TWO_THIRDS], &[]).unwrap();
        assert!(rep.pass);
        let rep = cmd_spectrum(&cfg, SpectrumMode::Hessian, &[0.7], &[]).unwrap();
        assert!(rep.pass, "{:#?}", rep.records);
        assert_eq!(rep.records.len(), hessian_probes(cfg.l_max).len());
        let rep = cmd_spectrum(&RunConfig { l_max: 16, ..cfg }, SpectrumMode::Conformal, &[], &[0.0, 0.3]).unwrap();
        assert!(rep.pass, "{:#?}", rep.records);
    }

    #[test]
    fn sweep_csv_columns() {
        let cfg = small();
        let (rep, rows) = cmd_sweep(&cfg, &[TWO_THIRDS], &[0.3]).unwrap();
        assert!(rep.pass, "{:#?}", rep.records);
        let csv = sweep_csv(&rows).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "alpha,a,m_value,lower_bound,upper_bound,dirichlet,beta3,converged");
        assert_eq!(lines.count(), 1);
    }

    #[test]
    fn monotonicity_and_g() {
        let (rep, table) = cmd_monotonicity(&small(), 20).unwrap();
        assert!(rep.pass, "{:#?}", rep.records.iter().filter(|r| !r.pass).collect::<Vec<_>>());
        assert_eq!(table.len(), 25);
        let (rep, table) = cmd_g_curve(&small(), &[0.5, 2.0]).unwrap();
        assert!(rep.pass);
        assert!(g_table_csv(&table).unwrap().starts_with("t,g,g_prime,g_quadrature\n"));
    }
}

//! Real spherical harmonics orthonormal under the normalized measure `dω`.
//!
//! `Y_{l,m} = P̄_l^{|m|}(cos θ) · T_m(φ)` with `T_0 = 1`, `T_m = √2 cos(mφ)` for
//! `m > 0` and `T_m = √2 sin(|m|φ)` for `m < 0`. The Legendre factor is scaled
//! so that `½∫₋₁¹ (P̄_l^m)² dz = 1`; there is no Condon–Shortley phase, so
//! `Y_{1,1} = √3 x₁`, `Y_{1,-1} = √3 x₂`, `Y_{1,0} = √3 x₃`.
//!
//! Transforms are separable: a ring-wise DFT in `φ` followed by a Legendre sum
//! in `z`, both evaluated by direct summation.

use std::f64::consts::SQRT_2;
use std::ops::{Deref, DerefMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Point3, UnitSphereGrid};

/// Flat index of `(l, m)`, `−l ≤ m ≤ l`.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Inverse of [`lm_index`].
#[inline]
pub fn lm_of(k: usize) -> (usize, i64) {
    let l = k.isqrt();
    (l, k as i64 - (l * l + l) as i64)
}

/// Number of coefficients up to band limit `l_max`.
#[inline]
pub fn n_coeffs(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// Spherical-harmonic coefficients `c_{l,m} = ∫ u Y_{l,m} dω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coeffs {
    l_max: usize,
    data: Vec<f64>,
}

impl Coeffs {
    pub fn zeros(l_max: usize) -> Self {
        Self { l_max, data: vec![0.0; n_coeffs(l_max)] }
    }

    pub fn from_vec(l_max: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_coeffs(l_max) {
            return Err(Error::LengthMismatch { expected: n_coeffs(l_max), got: data.len() });
        }
        Ok(Self { l_max, data })
    }

    /// Unit coefficient vector on `(l, m)`.
    pub fn unit(l_max: usize, l: usize, m: i64) -> Self {
        let mut c = Self::zeros(l_max);
        c.data[lm_index(l, m)] = 1.0;
        c
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        self.data[lm_index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, v: f64) {
        self.data[lm_index(l, m)] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Degree-0 coefficient, equal to `∫ u dω`.
    pub fn mean(&self) -> f64 {
        self.data[0]
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Coeffs, b: f64) -> Coeffs {
        assert_eq!(self.l_max, other.l_max, "band limits differ");
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        Coeffs { l_max: self.l_max, data }
    }

    pub fn dot(&self, other: &Coeffs) -> f64 {
        self.data.iter().zip(&other.data).map(|(x, y)| x * y).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// `Σ l(l+1) c_{l,m}²`, i.e. `∫|∇u|² dω` for the synthesized field.
    pub fn dirichlet_energy(&self) -> f64 {
        self.data.iter().enumerate().map(|(k, c)| eigenvalue(lm_of(k).0) * c * c).sum()
    }

    /// Symmetric Dirichlet form `∫ ∇u·∇v dω`.
    pub fn dirichlet_form(&self, other: &Coeffs) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .enumerate()
            .map(|(k, (a, b))| eigenvalue(lm_of(k).0) * a * b)
            .sum()
    }

    /// Spectral Laplacian: multiplies each degree-`l` block by `−l(l+1)`.
    pub fn laplacian(&self) -> Coeffs {
        let data =
            self.data.iter().enumerate().map(|(k, c)| -eigenvalue(lm_of(k).0) * c).collect();
        Coeffs { l_max: self.l_max, data }
    }
}

/// `dirichlet_energy` as a free function.
pub fn dirichlet_energy(c: &Coeffs) -> f64 {
    c.dirichlet_energy()
}

/// `laplacian` as a free function.
pub fn laplacian(c: &Coeffs) -> Coeffs {
    c.laplacian()
}

/// Eigenvalue `l(l+1)` of `−Δ` on degree-`l` harmonics.
#[inline]
pub fn eigenvalue(l: usize) -> f64 {
    (l * (l + 1)) as f64
}

/// A scalar function sampled at the grid nodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn constant(n: usize, v: f64) -> Self {
        Field(vec![v; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn add_scalar(&self, c: f64) -> Field {
        self.map(|v| v + c)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.0.iter().zip(&other.0).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Normalized associated Legendre functions `P̄_l^m(z)` for `0 ≤ m ≤ l ≤ l_max`,
/// written into `out[l(l+1) + m]`.
pub fn normalized_legendre(l_max: usize, z: f64, out: &mut [f64]) {
    debug_assert!(out.len() >= n_coeffs(l_max));
    let s = (1.0 - z * z).max(0.0).sqrt();
    let mut pmm = 1.0;
    for m in 0..=l_max {
        if m > 0 {
            let mf = m as f64;
            pmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
        }
        out[m * m + m + m] = pmm;
        if m == l_max {
            break;
        }
        let mf = m as f64;
        let mut p_prev = pmm;
        let mut p_cur = (2.0 * mf + 3.0).sqrt() * z * pmm;
        out[(m + 1) * (m + 1) + (m + 1) + m] = p_cur;
        for l in (m + 2)..=l_max {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            let p_next = a * (z * p_cur - b * p_prev);
            out[l * l + l + m] = p_next;
            p_prev = p_cur;
            p_cur = p_next;
        }
    }
}

/// Basis tables for one grid and one band limit.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    grid: UnitSphereGrid,
    l_max: usize,
    /// `P̄_l^m(z_i)` per ring, stride `(l_max+1)²`, indexed like `lm_index(l, m ≥ 0)`.
    plm: Vec<f64>,
    /// `cos(pφ_j)`, `sin(pφ_j)` for `0 ≤ p ≤ 2 l_max`, stride `2 l_max + 1`.
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
}

impl SpectralBasis {
    /// Requires `n_theta ≥ l_max + 1` and `n_phi ≥ 2 l_max + 1` so that
    /// products of two basis functions are integrated exactly.
    pub fn new(grid: &UnitSphereGrid, l_max: usize) -> Result<Self> {
        if grid.n_theta() < l_max + 1 || grid.n_phi() < 2 * l_max + 1 {
            return Err(invalid(format!(
                "grid {}x{} cannot resolve band limit {l_max}",
                grid.n_theta(),
                grid.n_phi()
            )));
        }
        let nc = n_coeffs(l_max);
        let mut plm = vec![0.0; grid.n_theta() * nc];
        for (i, &z) in grid.ring_z().iter().enumerate() {
            normalized_legendre(l_max, z, &mut plm[i * nc..(i + 1) * nc]);
        }
        let np = 2 * l_max + 1;
        let mut cos_tab = vec![0.0; grid.n_phi() * np];
        let mut sin_tab = vec![0.0; grid.n_phi() * np];
        for (j, &phi) in grid.phi().iter().enumerate() {
            for p in 0..np {
                cos_tab[j * np + p] = (p as f64 * phi).cos();
                sin_tab[j * np + p] = (p as f64 * phi).sin();
            }
        }
        Ok(Self { grid: grid.clone(), l_max, plm, cos_tab, sin_tab })
    }

    pub fn grid(&self) -> &UnitSphereGrid {
        &self.grid
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn n_coeffs(&self) -> usize {
        n_coeffs(self.l_max)
    }

    /// `Y_{l,m}` at grid node `node`.
    pub fn value(&self, l: usize, m: i64, node: usize) -> f64 {
        let (i, j) = (node / self.grid.n_phi(), node % self.grid.n_phi());
        let p = self.plm[i * self.n_coeffs() + lm_index(l, m.abs())];
        p * self.trig(m, j)
    }

    /// `Y_{l,m}` tabulated on the whole grid.
    pub fn basis_field(&self, l: usize, m: i64) -> Field {
        Field((0..self.grid.len()).map(|n| self.value(l, m, n)).collect())
    }

    #[inline]
    fn trig(&self, m: i64, j: usize) -> f64 {
        let np = 2 * self.l_max + 1;
        match m {
            0 => 1.0,
            m if m > 0 => SQRT_2 * self.cos_tab[j * np + m as usize],
            m => SQRT_2 * self.sin_tab[j * np + (-m) as usize],
        }
    }

    /// Ring-wise Fourier means `C_p = ⟨g cos pφ⟩`, `S_p = ⟨g sin pφ⟩` for `p ≤ p_max`.
    fn ring_fourier(&self, ring: &[f64], p_max: usize, c: &mut [f64], s: &mut [f64]) {
        let np = 2 * self.l_max + 1;
        let inv = 1.0 / self.grid.n_phi() as f64;
        c[..=p_max].fill(0.0);
        s[..=p_max].fill(0.0);
        for (j, &g) in ring.iter().enumerate() {
            let ct = &self.cos_tab[j * np..j * np + p_max + 1];
            let st = &self.sin_tab[j * np..j * np + p_max + 1];
            for p in 0..=p_max {
                c[p] += g * ct[p];
                s[p] += g * st[p];
            }
        }
        for p in 0..=p_max {
            c[p] *= inv;
            s[p] *= inv;
        }
    }

    /// `c_{l,m} = ∫ u Y_{l,m} dω` by quadrature.
    pub fn analyze(&self, values: &[f64]) -> Result<Coeffs> {
        self.grid.check_len(values)?;
        Ok(self.analyze_unchecked(values))
    }

    pub(crate) fn analyze_unchecked(&self, values: &[f64]) -> Coeffs {
        let lm = self.l_max;
        let nc = self.n_coeffs();
        let nphi = self.grid.n_phi();
        let mut out = vec![0.0; nc];
        let mut cf = vec![0.0; lm + 1];
        let mut sf = vec![0.0; lm + 1];
        for (i, &wr) in self.grid.ring_weights().iter().enumerate() {
            self.ring_fourier(&values[i * nphi..(i + 1) * nphi], lm, &mut cf, &mut sf);
            let p = &self.plm[i * nc..(i + 1) * nc];
            for l in 0..=lm {
                let base = l * l + l;
                out[base] += wr * p[base] * cf[0];
                for m in 1..=l {
                    let w = wr * p[base + m] * SQRT_2;
                    out[base + m] += w * cf[m];
                    out[base - m] += w * sf[m];
                }
            }
        }
        Coeffs { l_max: lm, data: out }
    }

    /// Pointwise `Σ c_{l,m} Y_{l,m}` on the grid.
    pub fn synthesize(&self, c: &Coeffs) -> Result<Field> {
        if c.l_max != self.l_max {
            return Err(Error::LengthMismatch { expected: self.n_coeffs(), got: c.data.len() });
        }
        Ok(self.synthesize_unchecked(c))
    }

    pub(crate) fn synthesize_unchecked(&self, c: &Coeffs) -> Field {
        let lm = self.l_max;
        let nc = self.n_coeffs();
        let nphi = self.grid.n_phi();
        let np = 2 * lm + 1;
        let mut out = vec![0.0; self.grid.len()];
        let mut bc = vec![0.0; lm + 1];
        let mut bs = vec![0.0; lm + 1];
        for i in 0..self.grid.n_theta() {
            let p = &self.plm[i * nc..(i + 1) * nc];
            bc.fill(0.0);
            bs.fill(0.0);
            for l in 0..=lm {
                let base = l * l + l;
                bc[0] += c.data[base] * p[base];
                for m in 1..=l {
                    bc[m] += c.data[base + m] * p[base + m];
                    bs[m] += c.data[base - m] * p[base + m];
                }
            }
            for j in 0..nphi {
                let ct = &self.cos_tab[j * np..];
                let st = &self.sin_tab[j * np..];
                let mut v = bc[0];
                for m in 1..=lm {
                    v += SQRT_2 * (bc[m] * ct[m] + bs[m] * st[m]);
                }
                out[i * nphi + j] = v;
            }
        }
        Field(out)
    }

    /// Band-limited projection `P_L u` sampled on the grid.
    pub fn project(&self, values: &[f64]) -> Result<Field> {
        Ok(self.synthesize_unchecked(&self.analyze(values)?))
    }

    /// Evaluates a band-limited field at an arbitrary point of the sphere.
    pub fn evaluate(&self, c: &Coeffs, x: &Point3) -> f64 {
        let lm = c.l_max;
        let mut p = vec![0.0; n_coeffs(lm)];
        normalized_legendre(lm, x[2].clamp(-1.0, 1.0), &mut p);
        let phi = x[1].atan2(x[0]);
        let mut v = 0.0;
        for l in 0..=lm {
            let base = l * l + l;
            v += c.data[base] * p[base];
            for m in 1..=l {
                let mf = m as f64 * phi;
                v += SQRT_2 * p[base + m] * (c.data[base + m] * mf.cos() + c.data[base - m] * mf.sin());
            }
        }
        v
    }

    /// Weighted Gram matrix `G_{k,k'} = ∫ g Y_k Y_{k'} dω` by quadrature.
    pub fn weighted_gram(&self, g: &[f64]) -> Result<DMatrix<f64>> {
        self.grid.check_len(g)?;
        let lm = self.l_max;
        let nc = self.n_coeffs();
        let nphi = self.grid.n_phi();
        let pm = 2 * lm;
        let mut cf = vec![0.0; pm + 1];
        let mut sf = vec![0.0; pm + 1];
        let nm = 2 * lm + 1;
        let mut ring = vec![0.0; nm * nm];
        let ms: Vec<i64> = (0..nc).map(|k| lm_of(k).1).collect();
        let pidx: Vec<usize> = (0..nc)
            .map(|k| {
                let (l, m) = lm_of(k);
                lm_index(l, m.abs())
            })
            .collect();
        let mut out = DMatrix::<f64>::zeros(nc, nc);
        for (i, &wr) in self.grid.ring_weights().iter().enumerate() {
            self.ring_fourier(&g[i * nphi..(i + 1) * nphi], pm, &mut cf, &mut sf);
            for (a, m1) in (-(lm as i64)..=lm as i64).enumerate() {
                for (b, m2) in (-(lm as i64)..=lm as i64).enumerate() {
                    ring[a * nm + b] = trig_product_mean(m1, m2, &cf, &sf);
                }
            }
            let p = &self.plm[i * nc..(i + 1) * nc];
            for k1 in 0..nc {
                let w1 = wr * p[pidx[k1]];
                if w1 == 0.0 {
                    continue;
                }
                let row = (ms[k1] + lm as i64) as usize * nm;
                for k2 in k1..nc {
                    let r = ring[row + (ms[k2] + lm as i64) as usize];
                    out[(k1, k2)] += w1 * p[pidx[k2]] * r;
                }
            }
        }
        for k1 in 0..nc {
            for k2 in 0..k1 {
                out[(k1, k2)] = out[(k2, k1)];
            }
        }
        Ok(out)
    }
}

/// Ring mean of `g T_{m1} T_{m2}` from the Fourier means of `g`.
fn trig_product_mean(m1: i64, m2: i64, c: &[f64], s: &[f64]) -> f64 {
    let sgn_s = |k: i64| -> f64 {
        if k >= 0 {
            s[k as usize]
        } else {
            -s[(-k) as usize]
        }
    };
    match (m1.signum(), m2.signum()) {
        (0, 0) => c[0],
        (0, 1) => SQRT_2 * c[m2 as usize],
        (0, -1) => SQRT_2 * s[(-m2) as usize],
        (1, 0) => SQRT_2 * c[m1 as usize],
        (-1, 0) => SQRT_2 * s[(-m1) as usize],
        (1, 1) => c[(m1 - m2).unsigned_abs() as usize] + c[(m1 + m2) as usize],
        (-1, -1) => {
            let (p, q) = (-m1, -m2);
            c[(p - q).unsigned_abs() as usize] - c[(p + q) as usize]
        }
        (1, -1) => {
            let (p, q) = (m1, -m2);
            sgn_s(q + p) + sgn_s(q - p)
        }
        (-1, 1) => {
            let (p, q) = (m2, -m1);
            sgn_s(q + p) + sgn_s(q - p)
        }
        _ => unreachable!(),
    }
}

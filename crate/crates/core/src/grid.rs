//! Quadrature on the unit sphere under the normalized round measure.
//!
//! Nodes are the tensor product of Gauss–Legendre nodes in `cos θ` and a
//! uniform trapezoid rule in `φ`. Weights are divided by `4π`, so they sum to
//! one and `integrate` returns `∫ f dω` with `∫ dω = 1`.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// A point on the unit sphere.
pub type Point3 = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct UnitSphereGrid {
    n_theta: usize,
    n_phi: usize,
    /// Gauss–Legendre nodes in `z = cos θ`, ascending.
    ring_z: Vec<f64>,
    /// Per-ring weights `w_i / 2`, summing to one.
    ring_weights: Vec<f64>,
    /// Azimuths `2πj / n_phi`.
    phi: Vec<f64>,
    nodes: Vec<Point3>,
    weights: Vec<f64>,
}

impl UnitSphereGrid {
    /// Builds the grid. Exact for harmonics of degree `l ≤ min(2·n_theta − 1, n_phi − 1)`.
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 2 {
            return Err(invalid(format!("n_theta must be at least 2, got {n_theta}")));
        }
        if n_phi < 4 {
            return Err(invalid(format!("n_phi must be at least 4, got {n_phi}")));
        }
        let (ring_z, gl_weights) = gauss_legendre(n_theta);
        let ring_weights: Vec<f64> = gl_weights.iter().map(|w| 0.5 * w).collect();
        let phi: Vec<f64> = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();

        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (&z, &wr) in ring_z.iter().zip(&ring_weights) {
            let s = (1.0 - z * z).max(0.0).sqrt();
            for &p in &phi {
                nodes.push([s * p.cos(), s * p.sin(), z]);
                weights.push(wr / n_phi as f64);
            }
        }
        Ok(Self { n_theta, n_phi, ring_z, ring_weights, phi, nodes, weights })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ring_z(&self) -> &[f64] {
        &self.ring_z
    }

    pub fn ring_weights(&self) -> &[f64] {
        &self.ring_weights
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Highest harmonic degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        (2 * self.n_theta - 1).min(self.n_phi - 1)
    }

    /// Discrete `∫ f dω`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values)?;
        Ok(self.integrate_unchecked(values))
    }

    pub(crate) fn integrate_unchecked(&self, values: &[f64]) -> f64 {
        // Sum ring by ring; keeps the accumulated round-off at the level of one ring.
        values
            .chunks(self.n_phi)
            .zip(&self.ring_weights)
            .map(|(ring, wr)| wr * ring.iter().sum::<f64>() / self.n_phi as f64)
            .sum()
    }

    /// `∫ f(x) dω` for a function of the node coordinates.
    pub fn integrate_fn<F: Fn(&Point3) -> f64>(&self, f: F) -> f64 {
        let values: Vec<f64> = self.nodes.iter().map(f).collect();
        self.integrate_unchecked(&values)
    }

    /// Tabulates `f` at every node.
    pub fn tabulate<F: Fn(&Point3) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(f).collect()
    }

    pub(crate) fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: values.len() });
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
///
/// Roots come from Newton iteration on the three-term recurrence, started from
/// the Tricomi approximation.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p, dp)
}

/// Stereographic projection from the north pole `(0, 0, 1)`.
pub fn stereographic(x: &Point3) -> Result<[f64; 2]> {
    let denom = 1.0 - x[2];
    if denom.abs() < 1e-15 {
        return Err(Error::ProjectionPole);
    }
    Ok([x[0] / denom, x[1] / denom])
}

/// Inverse stereographic projection: `x₃ = (|y|² − 1)/(|y|² + 1)`.
pub fn inverse_stereographic(y: &[f64; 2]) -> Point3 {
    let r2 = y[0] * y[0] + y[1] * y[1];
    let d = r2 + 1.0;
    [2.0 * y[0] / d, 2.0 * y[1] / d, (r2 - 1.0) / d]
}

pub fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Point3) -> f64 {
    dot(a, a).sqrt()
}

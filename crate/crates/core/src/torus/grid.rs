use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic `N×N` grid on the unit torus (volume 1). Fields are stored
/// row-major, `f[i*N + j]` at `(x, y) = (i/N, j/N)`.
#[derive(Clone)]
pub struct TorusGrid {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Signed integer frequency of each index.
    freq: Vec<i64>,
}

impl std::fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusGrid").field("n", &self.n).finish()
    }
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameters(format!(
                "grid resolution must be a power of two >= 2, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        let freq = (0..n)
            .map(|i| if i <= n / 2 { i as i64 } else { i as i64 - n as i64 })
            .collect();
        Ok(Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            freq,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let n = self.n as f64;
        ((idx / self.n) as f64 / n, (idx % self.n) as f64 / n)
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (x, y) = self.coords(i);
                f(x, y)
            })
            .collect()
    }

    /// Integer frequencies `(p, q)` of spectral index `idx`.
    pub fn frequency(&self, idx: usize) -> (i64, i64) {
        (self.freq[idx / self.n], self.freq[idx % self.n])
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        plan.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                col[j * n + i] = data[i * n + j];
            }
        }
        plan.process(&mut col);
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = col[j * n + i];
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
    }

    /// Normalized inverse transform.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn to_spectral(&self, f: &[f64]) -> Vec<Complex64> {
        let mut d: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut d);
        d
    }

    pub fn from_spectral_real(&self, mut d: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut d);
        d.into_iter().map(|z| z.re).collect()
    }

    /// Multiplies by a real symbol of the integer frequencies.
    pub fn apply_symbol(&self, f: &[f64], sym: impl Fn(i64, i64) -> f64) -> Vec<f64> {
        let mut d = self.to_spectral(f);
        for (idx, z) in d.iter_mut().enumerate() {
            let (p, q) = self.frequency(idx);
            *z *= sym(p, q);
        }
        self.from_spectral_real(d)
    }

    /// `Δ = −(∂_x² + ∂_y²)`, symbol `4π²(p² + q²)`; positive semidefinite.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let c = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        self.apply_symbol(f, |p, q| c * (p * p + q * q) as f64)
    }

    /// Spectral `(∂_x f, ∂_y f)` of a complex field; Nyquist modes dropped.
    pub fn gradient_complex(&self, f: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let half = (self.n / 2) as i64;
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut d = f.to_vec();
        self.forward(&mut d);
        let mut dx = d.clone();
        let mut dy = d;
        for idx in 0..self.len() {
            let (p, q) = self.frequency(idx);
            let kx = if p.abs() == half { 0.0 } else { two_pi * p as f64 };
            let ky = if q.abs() == half { 0.0 } else { two_pi * q as f64 };
            dx[idx] *= Complex64::new(0.0, kx);
            dy[idx] *= Complex64::new(0.0, ky);
        }
        self.inverse(&mut dx);
        self.inverse(&mut dy);
        (dx, dy)
    }

    pub fn gradient(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let z: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let (dx, dy) = self.gradient_complex(&z);
        (dx.iter().map(|z| z.re).collect(), dy.iter().map(|z| z.re).collect())
    }

    /// `∫ f` over the unit torus.
    pub fn mean(f: &[f64]) -> f64 {
        f.iter().sum::<f64>() / f.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn laplacian_of_mode() {
        let g = TorusGrid::new(16).unwrap();
        let f = g.sample(|x, y| (2.0 * PI * x).sin() * (4.0 * PI * y).cos());
        let l = g.laplacian(&f);
        let want = 4.0 * PI * PI * 5.0;
        for (a, b) in l.iter().zip(&f) {
            assert!((a - want * b).abs() < 1e-10);
        }
        let c = g.laplacian(&vec![3.0; g.len()]);
        assert!(c.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn gradient_of_mode() {
        let g = TorusGrid::new(32).unwrap();
        let f = g.sample(|x, y| (2.0 * PI * x + 6.0 * PI * y).sin());
        let (dx, dy) = g.gradient(&f);
        for i in 0..g.len() {
            let (x, y) = g.coords(i);
            let c = (2.0 * PI * x + 6.0 * PI * y).cos();
            assert!((dx[i] - 2.0 * PI * c).abs() < 1e-10);
            assert!((dy[i] - 6.0 * PI * c).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(TorusGrid::new(12).is_err());
    }
}

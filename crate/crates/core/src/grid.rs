//! Periodic lattices and sampled fields.
//!
//! A [`LatticeGrid`] is the periodic box `[-L/2, L/2)^d` sampled at `n` points
//! per axis. Point `j` sits at `x_j = -L/2 + j * dx`; multi-dimensional fields
//! are stored row-major with the last axis varying fastest.

use crate::error::{Error, Result};
use crate::stats::pairwise_sum;

/// Periodic sampling lattice in one or two dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeGrid {
    dim: usize,
    n: usize,
    length: f64,
}

impl LatticeGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Domain(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Domain(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Domain(format!("side length must be positive, got {length}")));
        }
        Ok(Self { dim, n, length })
    }

    /// One-dimensional lattice, the common case.
    pub fn line(n: usize, length: f64) -> Result<Self> {
        Self::new(1, n, length)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_dim(&self) -> usize {
        self.n
    }

    pub fn side_length(&self) -> f64 {
        self.length
    }

    /// `dx = L / n`. Exact, since `n` is a power of two.
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Total number of lattice sites, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `L^d`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Coordinate of lattice index `j` along any axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    /// Signed integer wavenumber of FFT slot `k`, in `-n/2 ..= n/2 - 1`.
    pub fn mode_index(&self, k: usize) -> i64 {
        let n = self.n as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Angular wavenumber `2 pi k / L` of FFT slot `k`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        std::f64::consts::TAU * self.mode_index(k) as f64 / self.length
    }

    /// Multi-index of flat position `idx` (axis 0 first).
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx / self.n, idx % self.n],
        }
    }

    /// Physical position of flat site `idx`; unused trailing axes are 0.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [a, b] = self.unflatten(idx);
        match self.dim {
            1 => [self.coordinate(a), 0.0],
            _ => [self.coordinate(a), self.coordinate(b)],
        }
    }

    /// `|xi|` for every FFT slot, flat and in transform order.
    pub fn wavenumber_magnitudes(&self) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let [a, b] = self.unflatten(idx);
                match self.dim {
                    1 => self.wavenumber(a).abs(),
                    _ => self.wavenumber(a).hypot(self.wavenumber(b)),
                }
            })
            .collect()
    }

    /// Integer mode multi-index for every FFT slot.
    pub fn mode_indices(&self) -> Vec<[i64; 2]> {
        (0..self.len())
            .map(|idx| {
                let [a, b] = self.unflatten(idx);
                match self.dim {
                    1 => [self.mode_index(a), 0],
                    _ => [self.mode_index(a), self.mode_index(b)],
                }
            })
            .collect()
    }

    pub(crate) fn ensure_same(&self, other: &LatticeGrid, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "{what}: {self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}

/// Lattice sample of a real function at a time tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: LatticeGrid,
    values: Vec<f64>,
    time: f64,
}

impl Field {
    pub fn new(grid: LatticeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, time: 0.0 })
    }

    pub fn zeros(grid: LatticeGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: LatticeGrid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()], time: 0.0 }
    }

    /// Samples `f` at every lattice site. The closure receives `[x, y]`
    /// (with `y = 0` on a line).
    pub fn from_fn(grid: LatticeGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self { grid, values, time: 0.0 }
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    /// Riemann sum `sum_j u_j dx^d`.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }

    pub fn l1_norm(&self) -> f64 {
        let abs: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        pairwise_sum(&abs) * self.grid.cell_volume()
    }

    /// Squared lattice L2 norm, `sum_j u_j^2 dx^d`.
    pub fn l2_norm_sq(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        pairwise_sum(&sq) * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lattice L2 inner product.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.grid.ensure_same(&other.grid, "inner product")?;
        let prod: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(pairwise_sum(&prod) * self.grid.cell_volume())
    }

    /// Pointwise `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Result<Field> {
        self.grid.ensure_same(&other.grid, "axpy")?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Ok(Field { grid: self.grid, values, time: self.time })
    }

    pub fn scaled(&self, s: f64) -> Field {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            time: self.time,
        }
    }

    /// Value at multi-index `[i, j]` (`j` ignored on a line).
    pub fn at(&self, index: [usize; 2]) -> f64 {
        match self.grid.dim() {
            1 => self.values[index[0]],
            _ => self.values[index[0] * self.grid.points_per_dim() + index[1]],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lattices() {
        assert!(LatticeGrid::new(3, 16, 1.0).is_err());
        assert!(LatticeGrid::new(1, 4, 1.0).is_err());
        assert!(LatticeGrid::new(1, 24, 1.0).is_err());
        assert!(LatticeGrid::new(1, 16, 0.0).is_err());
        assert!(LatticeGrid::new(1, 16, f64::NAN).is_err());
    }

    #[test]
    fn spacing_times_points_is_length() {
        for &l in &[1.0, std::f64::consts::TAU, 20.0 * std::f64::consts::PI, 0.3] {
            for &n in &[8, 64, 1024] {
                let g = LatticeGrid::line(n, l).unwrap();
                assert_eq!(g.spacing() * n as f64, l);
            }
        }
    }

    #[test]
    fn wavenumbers_cover_symmetric_band() {
        let g = LatticeGrid::line(8, std::f64::consts::TAU).unwrap();
        let k: Vec<i64> = (0..8).map(|i| g.mode_index(i)).collect();
        assert_eq!(k, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert!((g.wavenumber(3) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn origin_is_a_lattice_point() {
        let g = LatticeGrid::line(64, 10.0).unwrap();
        assert_eq!(g.coordinate(32), 0.0);
    }

    #[test]
    fn field_length_checked() {
        let g = LatticeGrid::new(2, 8, 1.0).unwrap();
        assert!(Field::new(g, vec![0.0; 8]).is_err());
        assert!(Field::new(g, vec![0.0; 64]).is_ok());
    }

    #[test]
    fn riemann_norms() {
        let g = LatticeGrid::line(64, std::f64::consts::TAU).unwrap();
        let f = Field::from_fn(g, |p| p[0].sin());
        assert!((f.l2_norm_sq() - std::f64::consts::PI).abs() < 1e-12);
        assert!((Field::constant(g, 3.0).integral() - 3.0 * std::f64::consts::TAU).abs() < 1e-12);
        assert!(f.integral().abs() < 1e-14);
    }
}

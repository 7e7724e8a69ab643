//! Uniform grids and sampled scalar fields on the flat unit torus
//! \(\mathbb{T}^2 = \mathbb{R}^2 / \mathbb{Z}^2\).
//!
//! A grid of resolution `n` places nodes at \((i/n, j/n)\) for
//! \(0 \le i, j < n\). Fields are stored row-major: the value at node
//! \((i_x, i_y)\) sits at index `iy * n + ix`, so a contiguous row holds one
//! horizontal line of constant \(y\). The discrete integral of a field is the
//! trapezoidal rule, which for periodic data is simply the mean of the node
//! values (the cell area is \(1/n^2\)).

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, TorusError};

/// Reduce a signed offset on the unit circle to the representative in
/// \([-1/2, 1/2)\).
///
/// # Examples
///
/// ```
/// use mfe_torus::wrap_offset;
/// assert_eq!(wrap_offset(0.75), -0.25);
/// assert_eq!(wrap_offset(-0.5), -0.5);
/// assert_eq!(wrap_offset(3.25), 0.25);
/// ```
pub fn wrap_offset(t: f64) -> f64 {
    let mut r = t.rem_euclid(1.0);
    if r >= 0.5 {
        r -= 1.0;
    }
    r
}

/// Minimum-image displacement `a - b` on the torus, component-wise in
/// \([-1/2, 1/2)\).
pub fn min_image(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (wrap_offset(a.0 - b.0), wrap_offset(a.1 - b.1))
}

/// Geodesic (minimum-image Euclidean) distance between two points of the
/// torus.
///
/// # Examples
///
/// ```
/// use mfe_torus::torus_distance;
/// let d = torus_distance((0.9, 0.0), (0.1, 0.0));
/// assert!((d - 0.2).abs() < 1e-15);
/// ```
pub fn torus_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = min_image(a, b);
    dx.hypot(dy)
}

/// A uniform `n` by `n` grid on the unit torus.
///
/// `n` must be a power of two and at least 8 so that every field admits a
/// fast Fourier transform and enough modes to represent the operators used
/// by the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    /// Build a grid of resolution `n`.
    ///
    /// # Examples
    ///
    /// ```
    /// use mfe_torus::TorusGrid;
    /// let grid = TorusGrid::new(32).unwrap();
    /// assert_eq!(grid.spacing(), 1.0 / 32.0);
    /// assert!(TorusGrid::new(24).is_err());
    /// assert!(TorusGrid::new(4).is_err());
    /// ```
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(TorusError::GridSize(n));
        }
        Ok(Self { n })
    }

    /// Resolution per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Node spacing `1/n`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total node count `n * n`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    /// Grids are never empty.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of the node with indices `(ix, iy)`.
    pub fn point(&self, ix: usize, iy: usize) -> (f64, f64) {
        (ix as f64 / self.n as f64, iy as f64 / self.n as f64)
    }

    /// Storage index of the node `(ix, iy)`.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    /// Node indices closest to an arbitrary point (rounding down ties).
    pub fn nearest_node(&self, p: (f64, f64)) -> (usize, usize) {
        let fold = |t: f64| {
            let s = (t.rem_euclid(1.0) * self.n as f64).round() as usize;
            s % self.n
        };
        (fold(p.0), fold(p.1))
    }
}

/// A real scalar field sampled on a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl TorusField {
    /// The zero field.
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// The constant field with value `c`.
    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Sample a closure at the grid nodes.
    ///
    /// # Examples
    ///
    /// ```
    /// use mfe_torus::{TorusField, TorusGrid};
    /// let grid = TorusGrid::new(16).unwrap();
    /// let f = TorusField::from_fn(grid, |x, _y| (2.0 * std::f64::consts::PI * x).cos());
    /// assert!(f.mean().abs() < 1e-15);
    /// ```
    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for iy in 0..n {
            for ix in 0..n {
                let (x, y) = grid.point(ix, iy);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    /// Wrap an existing value vector (row-major, length `n * n`).
    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(TorusError::Format(format!(
                "expected {} values for an n = {} field, got {}",
                grid.len(),
                grid.n(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// The grid this field lives on.
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// Raw row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable raw values.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value at node `(ix, iy)`.
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.index(ix, iy)]
    }

    /// Set the value at node `(ix, iy)`.
    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        let i = self.grid.index(ix, iy);
        self.values[i] = v;
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid.n() != other.grid.n() {
            return Err(TorusError::GridMismatch {
                left: self.grid.n(),
                right: other.grid.n(),
            });
        }
        Ok(())
    }

    /// Apply a function to every value, keeping the grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    /// Pointwise difference `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    /// Scalar multiple.
    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// In-place `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &Self) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// Mean value, equal to the discrete integral over the unit torus.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Discrete integral \(\int_{\mathbb{T}^2} f\) (trapezoidal rule).
    pub fn integral(&self) -> f64 {
        self.mean()
    }

    /// Subtract the mean so the result integrates to zero exactly (up to
    /// floating point roundoff).
    pub fn project_mean_zero(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Sup norm over the nodes.
    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Discrete \(L^2\) norm \(\sqrt{\int f^2}\).
    pub fn l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// Discrete \(L^2\) pairing \(\int f g\).
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.values.len() as f64)
    }

    /// Largest node value.
    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v))
    }

    /// Smallest node value.
    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, &v| a.min(v))
    }

    /// Indices `(ix, iy)` of the largest node value.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best % self.grid.n(), best / self.grid.n())
    }

    fn ensure_finite(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(TorusError::Format(
                "field contains non-finite values".into(),
            ));
        }
        Ok(())
    }

    /// Write the field as CSV: `n` records of `n` comma-separated values,
    /// row `iy` of the grid per record. Values use the shortest decimal
    /// representation that round-trips through `f64`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.ensure_finite()?;
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        let n = self.grid.n();
        for iy in 0..n {
            let mut line = String::new();
            for ix in 0..n {
                if ix > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{:?}", self.at(ix, iy)));
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Read a field written by [`TorusField::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let row: core::result::Result<Vec<f64>, _> =
                line.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| {
                TorusError::Format(format!("line {}: {e}", lineno + 1))
            })?;
            rows.push(row);
        }
        let n = rows.len();
        let grid = TorusGrid::new(n)
            .map_err(|_| TorusError::Format(format!("{n} rows is not a valid resolution")))?;
        let mut values = Vec::with_capacity(n * n);
        for (iy, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(TorusError::Format(format!(
                    "row {} has {} columns, expected {n}",
                    iy + 1,
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_values(grid, values)
    }

    /// Write the field in the binary format: an 8 byte header (resolution
    /// `n` as a little-endian `u32`, then 4 reserved zero bytes) followed by
    /// `n * n` little-endian `f64` values in row-major order.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        self.ensure_finite()?;
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        out.write_all(&(self.grid.n() as u32).to_le_bytes())?;
        out.write_all(&[0u8; 4])?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Read a field written by [`TorusField::write_binary`].
    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut file = BufReader::new(std::fs::File::open(path)?);
        let mut header = [0u8; 8];
        file.read_exact(&mut header)?;
        let n = u32::from_le_bytes([header[0], header[1], header[2], header[3]]) as usize;
        if header[4..] != [0u8; 4] {
            return Err(TorusError::Format(
                "reserved header bytes must be zero".into(),
            ));
        }
        let grid = TorusGrid::new(n)
            .map_err(|_| TorusError::Format(format!("invalid resolution {n} in header")))?;
        let mut values = vec![0.0f64; grid.len()];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            file.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        let mut trailing = [0u8; 1];
        match file.read(&mut trailing)? {
            0 => {}
            _ => {
                return Err(TorusError::Format(
                    "trailing bytes after field payload".into(),
                ))
            }
        }
        Self::from_values(grid, values)
    }
}

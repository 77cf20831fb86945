use serde::{Deserialize, Serialize};

use super::QuantumError;

/// Periodic, cell-centred-free grid on `[-Lx/2, Lx/2) × [-Ly/2, Ly/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hbar: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, hbar: f64) -> Result<Self, QuantumError> {
        let g = Self { nx, ny, lx, ly, hbar };
        g.validate().map_err(|v| QuantumError::InvalidGrid(v.join("; ")))?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        for (name, n) in [("nx", self.nx), ("ny", self.ny)] {
            if n < 64 || !n.is_power_of_two() {
                errs.push(format!("grid.{name} must be a power of two >= 64 (got {n})"));
            }
        }
        for (name, v) in [("lx", self.lx), ("ly", self.ly), ("hbar", self.hbar)] {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("grid.{name} must be finite and > 0 (got {v})"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.lx + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        -0.5 * self.ly + j as f64 * self.dy()
    }

    /// Wavenumbers in FFT order.
    pub fn kx(&self) -> Vec<f64> {
        wavenumbers(self.nx, self.lx)
    }

    pub fn ky(&self) -> Vec<f64> {
        wavenumbers(self.ny, self.ly)
    }

    /// Row-major index, `y` varying slowest.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

fn wavenumbers(n: usize, l: f64) -> Vec<f64> {
    let dk = 2.0 * std::f64::consts::PI / l;
    (0..n)
        .map(|i| if i < n / 2 { i as f64 * dk } else { (i as f64 - n as f64) * dk })
        .collect()
}

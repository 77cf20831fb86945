use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{Grid2D, QuantumError};
use crate::models::{HamiltonianModel, PhasePoint};

/// Norm drift that aborts a propagation.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;
/// Largest probability density tolerated on the box boundary.
pub const EDGE_DENSITY_LIMIT: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketState {
    pub grid: Grid2D,
    /// Row-major amplitudes, `x` varying fastest.
    pub psi: Vec<Complex64>,
    pub t: f64,
}

/// Sampled moments of a propagated wavepacket.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpectationSeries {
    pub t: Vec<f64>,
    pub mean_q: Vec<[f64; 2]>,
    pub var_q: Vec<[f64; 2]>,
    /// Momentum variances, computed spectrally.
    pub var_p: Vec<[f64; 2]>,
    pub norm: Vec<f64>,
    /// `⟨H⟩` per sample.
    pub energy: Vec<f64>,
}

impl ExpectationSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Smallest `Δq Δp / (ħ/2)` over both axes and all samples.
    pub fn min_uncertainty_ratio(&self, hbar: f64) -> f64 {
        self.var_q
            .iter()
            .zip(&self.var_p)
            .flat_map(|(vq, vp)| [(vq[0] * vp[0]).sqrt(), (vq[1] * vp[1]).sqrt()])
            .map(|prod| prod / (0.5 * hbar))
            .fold(f64::INFINITY, f64::min)
    }

    fn push(&mut self, m: Moments) {
        self.t.push(m.t);
        self.mean_q.push(m.mean_q);
        self.var_q.push(m.var_q);
        self.var_p.push(m.var_p);
        self.norm.push(m.norm);
        self.energy.push(m.energy);
    }
}

struct Moments {
    t: f64,
    norm: f64,
    mean_q: [f64; 2],
    var_q: [f64; 2],
    var_p: [f64; 2],
    energy: f64,
}

/// Normalized minimum-uncertainty Gaussian centred on `z` with position
/// standard deviations `widths`.
pub fn init_gaussian(grid: &Grid2D, z: PhasePoint, widths: (f64, f64)) -> Result<WavepacketState, QuantumError> {
    grid.validate().map_err(|v| QuantumError::InvalidGrid(v.join("; ")))?;
    let (sx, sy) = widths;
    for (name, s, cell, box_len) in [("sigma_x", sx, grid.dx(), grid.lx), ("sigma_y", sy, grid.dy(), grid.ly)] {
        if !(s > 2.0 * cell && s < box_len / 10.0) {
            return Err(QuantumError::InvalidWidth(format!(
                "{name} = {s} must lie in (2 cells = {}, box/10 = {})",
                2.0 * cell,
                box_len / 10.0
            )));
        }
    }
    if !z.is_finite() {
        return Err(QuantumError::InvalidWidth(format!("non-finite centre {z:?}")));
    }
    let hbar = grid.hbar;
    let mut psi = Vec::with_capacity(grid.len());
    for j in 0..grid.ny {
        let y = grid.y(j) - z.qy;
        for i in 0..grid.nx {
            let x = grid.x(i) - z.qx;
            let amp = (-x * x / (4.0 * sx * sx) - y * y / (4.0 * sy * sy)).exp();
            let phase = (z.px * grid.x(i) + z.py * grid.y(j)) / hbar;
            psi.push(Complex64::from_polar(amp, phase));
        }
    }
    let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * grid.cell_area();
    let s = 1.0 / norm.sqrt();
    psi.iter_mut().for_each(|c| *c *= s);
    Ok(WavepacketState { grid: *grid, psi, t: 0.0 })
}

/// Two-dimensional FFT built from row transforms and transposes.
struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
}

impl Fft2 {
    fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(nx);
        let inv_x = planner.plan_fft_inverse(nx);
        let fwd_y = planner.plan_fft_forward(ny);
        let inv_y = planner.plan_fft_inverse(ny);
        let scratch_len = [&fwd_x, &inv_x, &fwd_y, &inv_y]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            nx,
            ny,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            scratch: vec![Complex64::default(); nx * ny],
            fft_scratch: vec![Complex64::default(); scratch_len],
        }
    }

    fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
        for r in 0..rows {
            for c in 0..cols {
                dst[c * rows + r] = src[r * cols + c];
            }
        }
    }

    /// Position layout `[y][x]` in `data` → momentum layout `[kx][ky]` in `self.scratch`.
    fn forward(&mut self, data: &mut [Complex64]) {
        self.fwd_x.process_with_scratch(data, &mut self.fft_scratch);
        Self::transpose(data, &mut self.scratch, self.ny, self.nx);
        self.fwd_y.process_with_scratch(&mut self.scratch, &mut self.fft_scratch);
    }

    /// Momentum layout in `self.scratch` → position layout in `data` (unnormalized).
    fn inverse(&mut self, data: &mut [Complex64]) {
        self.inv_y.process_with_scratch(&mut self.scratch, &mut self.fft_scratch);
        Self::transpose(&self.scratch, data, self.nx, self.ny);
        self.inv_x.process_with_scratch(data, &mut self.fft_scratch);
    }
}

/// Strang-split propagator `e^{-iVdt/2ħ} e^{-iTdt/ħ} e^{-iVdt/2ħ}` for one model and step.
pub struct SplitOperator {
    grid: Grid2D,
    model: HamiltonianModel,
    dt: f64,
    fft: Fft2,
    half_potential: Vec<Complex64>,
    /// Kinetic phase in `[kx][ky]` layout, including the `1/(nx ny)` FFT normalization.
    kinetic: Vec<Complex64>,
    potential: Vec<f64>,
    /// `ħ²k²/2m` in `[kx][ky]` layout.
    kinetic_energy: Vec<f64>,
    px: Vec<f64>,
    py: Vec<f64>,
}

impl SplitOperator {
    pub fn new(grid: &Grid2D, model: &HamiltonianModel, dt: f64) -> Result<Self, QuantumError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(QuantumError::InvalidArgument(format!("dt must be > 0 (got {dt})")));
        }
        let hbar = grid.hbar;
        let mut potential = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                potential.push(model.v(grid.x(i), grid.y(j)));
            }
        }
        let half_potential = potential.iter().map(|v| Complex64::from_polar(1.0, -0.5 * v * dt / hbar)).collect();
        let px: Vec<f64> = grid.kx().into_iter().map(|k| hbar * k).collect();
        let py: Vec<f64> = grid.ky().into_iter().map(|k| hbar * k).collect();
        let scale = 1.0 / grid.len() as f64;
        let mut kinetic = Vec::with_capacity(grid.len());
        let mut kinetic_energy = Vec::with_capacity(grid.len());
        for pxi in &px {
            for pyj in &py {
                let e = (pxi * pxi + pyj * pyj) / (2.0 * model.mass);
                kinetic_energy.push(e);
                kinetic.push(Complex64::from_polar(scale, -e * dt / hbar));
            }
        }
        Ok(Self {
            grid: *grid,
            model: *model,
            dt,
            fft: Fft2::new(grid.nx, grid.ny),
            half_potential,
            kinetic,
            potential,
            kinetic_energy,
            px,
            py,
        })
    }

    pub fn step(&mut self, state: &mut WavepacketState) {
        let psi = &mut state.psi;
        psi.iter_mut().zip(&self.half_potential).for_each(|(c, p)| *c *= p);
        self.fft.forward(psi);
        self.fft.scratch.iter_mut().zip(&self.kinetic).for_each(|(c, k)| *c *= k);
        self.fft.inverse(psi);
        psi.iter_mut().zip(&self.half_potential).for_each(|(c, p)| *c *= p);
        state.t += self.dt;
    }

    fn moments(&mut self, state: &WavepacketState) -> Moments {
        let g = &self.grid;
        let da = g.cell_area();
        let (mut n, mut sx, mut sy, mut sxx, mut syy, mut ev) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..g.ny {
            let y = g.y(j);
            for i in 0..g.nx {
                let idx = g.idx(i, j);
                let rho = state.psi[idx].norm_sqr();
                let x = g.x(i);
                n += rho;
                sx += rho * x;
                sy += rho * y;
                sxx += rho * x * x;
                syy += rho * y * y;
                ev += rho * self.potential[idx];
            }
        }
        let norm = n * da;
        let mean_q = [sx / n, sy / n];
        let var_q = [(sxx / n - mean_q[0].powi(2)).max(0.0), (syy / n - mean_q[1].powi(2)).max(0.0)];

        let mut work = state.psi.clone();
        self.fft.forward(&mut work);
        let (mut m, mut spx, mut spy, mut spxx, mut spyy, mut ek) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (a, pxa) in self.px.iter().enumerate() {
            for (b, pyb) in self.py.iter().enumerate() {
                let idx = a * g.ny + b;
                let w = self.fft.scratch[idx].norm_sqr();
                m += w;
                spx += w * pxa;
                spy += w * pyb;
                spxx += w * pxa * pxa;
                spyy += w * pyb * pyb;
                ek += w * self.kinetic_energy[idx];
            }
        }
        let mean_p = [spx / m, spy / m];
        let var_p = [(spxx / m - mean_p[0].powi(2)).max(0.0), (spyy / m - mean_p[1].powi(2)).max(0.0)];
        Moments { t: state.t, norm, mean_q, var_q, var_p, energy: ek / m + ev / n }
    }

    fn edge_density(&self, state: &WavepacketState) -> f64 {
        let g = &self.grid;
        let mut max: f64 = 0.0;
        for i in 0..g.nx {
            max = max.max(state.psi[g.idx(i, 0)].norm_sqr()).max(state.psi[g.idx(i, g.ny - 1)].norm_sqr());
        }
        for j in 0..g.ny {
            max = max.max(state.psi[g.idx(0, j)].norm_sqr()).max(state.psi[g.idx(g.nx - 1, j)].norm_sqr());
        }
        max
    }

    /// Runs `n_steps` steps, sampling every `sample_every` steps (and at the
    /// start and end).
    pub fn run(
        &mut self,
        state: &mut WavepacketState,
        n_steps: usize,
        sample_every: usize,
    ) -> Result<ExpectationSeries, QuantumError> {
        if state.grid != self.grid {
            return Err(QuantumError::InvalidArgument("state grid differs from propagator grid".into()));
        }
        if n_steps == 0 || sample_every == 0 {
            return Err(QuantumError::InvalidArgument("n_steps and sample_every must be >= 1".into()));
        }
        let mut series = ExpectationSeries::default();
        let first = self.moments(state);
        let norm0 = first.norm;
        series.push(first);
        self.check(state, &series, norm0)?;
        for step in 1..=n_steps {
            self.step(state);
            if step % sample_every == 0 || step == n_steps {
                let m = self.moments(state);
                series.push(m);
                self.check(state, &series, norm0)?;
            }
        }
        Ok(series)
    }

    fn check(&self, state: &WavepacketState, series: &ExpectationSeries, norm0: f64) -> Result<(), QuantumError> {
        let edge = self.edge_density(state);
        if edge > EDGE_DENSITY_LIMIT {
            return Err(QuantumError::BoundaryLeak { t: state.t, edge_density: edge, partial: Box::new(series.clone()) });
        }
        let norm = *series.norm.last().unwrap_or(&norm0);
        if (norm - norm0).abs() > NORM_DRIFT_LIMIT {
            return Err(QuantumError::NormDrift { t: state.t, drift: (norm - norm0).abs(), partial: Box::new(series.clone()) });
        }
        Ok(())
    }

    pub fn model(&self) -> &HamiltonianModel {
        &self.model
    }
}

/// Propagates `state` in place under the bare system Hamiltonian and returns
/// the sampled moments.
pub fn propagate_wavepacket(
    state: &mut WavepacketState,
    model: &HamiltonianModel,
    dt: f64,
    n_steps: usize,
    sample_every: usize,
) -> Result<ExpectationSeries, QuantumError> {
    let grid = state.grid;
    SplitOperator::new(&grid, model, dt)?.run(state, n_steps, sample_every)
}

/// Writes `psi` as little-endian `(re, im)` f64 pairs, row-major with `x`
/// fastest, plus a `<path>.hdr` text sidecar.
pub fn write_snapshot(state: &WavepacketState, path: &Path) -> std::io::Result<()> {
    let mut bytes = Vec::with_capacity(state.psi.len() * 16);
    for c in &state.psi {
        bytes.extend_from_slice(&c.re.to_le_bytes());
        bytes.extend_from_slice(&c.im.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    let mut hdr = std::fs::File::create(path.with_extension("hdr"))?;
    let g = &state.grid;
    writeln!(hdr, "nx {}\nny {}\nLx {:.16e}\nLy {:.16e}\nt {:.16e}", g.nx, g.ny, g.lx, g.ly, state.t)
}

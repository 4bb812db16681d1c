//! Beam geometry, scattering amplitudes and the discretized detection sphere.
//!
//! Lengths are expressed in units of 1/k (the wavenumber is 1 internally);
//! the incident beam travels along +z and the detection sphere has its poles
//! on the beam axis. Every atom scatters isotropically with amplitude `f`,
//! and the transmitted mode carries a flux-conserving factor so that the
//! per-photon event probabilities close to unity by construction.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hard ceiling on the single-atom scattering probability; beyond this the
/// weak-scattering treatment is not trustworthy.
pub const SIGMA1_LIMIT: f64 = 0.1;

/// Focusing half-angles above this (the strongest used in practice) are rejected.
pub const THETA0_LIMIT: f64 = 0.45 * std::f64::consts::PI;

/// Coarsest sphere grid: latitude bands x longitude columns.
pub const GRID_FLOOR: (usize, usize) = (16, 32);

/// Default ceiling on the number of sphere-grid cells.
pub const DEFAULT_CELL_CAP: usize = 500_000;

/// Default ceiling on scatter-table memory (bytes).
pub const DEFAULT_TABLE_BYTES: usize = 1 << 30;

/// Optics parameters of one experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    /// Wavenumber; 1 in internal units, kept explicit for rescaling checks.
    pub k: f64,
    /// Focusing half-angle of the incident beam (radians).
    pub theta0: f64,
    /// Mode amplitude per unit length, `k * theta0 / (2 sqrt(pi))`.
    pub g0: f64,
    /// Isotropic single-atom scattering amplitude, in units of 1/k.
    pub f: f64,
    /// Interferometer phase offset between the two arms.
    pub phi: f64,
}

impl BeamGeometry {
    pub fn new(k: f64, theta0: f64, f: f64, phi: f64) -> Result<Self> {
        let mut violations = Vec::new();
        if !k.is_finite() || k <= 0.0 {
            violations.push(format!("wavenumber must be positive, got {k}"));
        }
        if !theta0.is_finite() || theta0 <= 0.0 || theta0 > THETA0_LIMIT {
            violations.push(format!(
                "theta0 must lie in (0, 0.45 pi], got {theta0}"
            ));
        }
        if !f.is_finite() || f < 0.0 {
            violations.push(format!("scattering amplitude must be >= 0, got {f}"));
        }
        let g0 = k * theta0 / (2.0 * std::f64::consts::PI.sqrt());
        let sigma1 = 2.0 * std::f64::consts::PI * f * f * g0 * g0 * (1.0 + theta0.cos());
        if sigma1 >= SIGMA1_LIMIT {
            violations.push(format!(
                "single-atom scattering probability {sigma1:.4} breaks the weak-scattering guard (< {SIGMA1_LIMIT})"
            ));
        }
        if violations.is_empty() {
            Ok(Self { k, theta0, g0, f, phi })
        } else {
            Err(Error::InvalidConfig(violations))
        }
    }

    /// Single-atom scattering probability `2 pi f^2 g0^2 (1 + cos theta0)`.
    pub fn sigma_one(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f * self.f * self.g0 * self.g0 * (1.0 + self.theta0.cos())
    }

    /// Forward phase accumulated per photon and per `|a>` atom,
    /// `2 pi f g0^2 / k`; half of it is the light shift per photon.
    pub fn forward_phase_per_atom(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f * self.g0 * self.g0 / self.k
    }
}

/// Spatial law the atom positions are drawn from, once per experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CloudLaw {
    /// All atoms exactly at the origin.
    Point,
    /// Isotropic Gaussian with the given per-axis rms, in units of 1/k.
    Gaussian { rms: f64 },
    /// Uniform over a box centered on the origin, in units of 1/k.
    Box { dims: [f64; 3] },
}

impl CloudLaw {
    /// Draws one fixed cloud; the positions never move afterwards.
    pub fn sample<R: rand::Rng>(&self, n_atoms: usize, rng: &mut R) -> AtomCloud {
        let positions = match self {
            CloudLaw::Point => vec![[0.0; 3]; n_atoms],
            CloudLaw::Gaussian { rms } => {
                let normal = rand_distr::StandardNormal;
                (0..n_atoms)
                    .map(|_| {
                        [
                            rms * rng.sample::<f64, _>(normal),
                            rms * rng.sample::<f64, _>(normal),
                            rms * rng.sample::<f64, _>(normal),
                        ]
                    })
                    .collect()
            }
            CloudLaw::Box { dims } => (0..n_atoms)
                .map(|_| {
                    [
                        dims[0] * (rng.gen::<f64>() - 0.5),
                        dims[1] * (rng.gen::<f64>() - 0.5),
                        dims[2] * (rng.gen::<f64>() - 0.5),
                    ]
                })
                .collect(),
        };
        AtomCloud::new(positions)
    }

    /// Nominal per-axis rms used to pick the grid resolution.
    pub fn nominal_rms(&self) -> f64 {
        match self {
            CloudLaw::Point => 0.0,
            CloudLaw::Gaussian { rms } => *rms,
            CloudLaw::Box { dims } => {
                let mean_sq = dims.iter().map(|l| l * l / 12.0).sum::<f64>() / 3.0;
                mean_sq.sqrt()
            }
        }
    }
}

/// Fixed spatial configuration of the atoms for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomCloud {
    positions: Vec<[f64; 3]>,
}

impl AtomCloud {
    pub fn new(positions: Vec<[f64; 3]>) -> Self {
        Self { positions }
    }

    /// All atoms at the origin (the exact point-cloud limit).
    pub fn point(n_atoms: usize) -> Self {
        Self {
            positions: vec![[0.0; 3]; n_atoms],
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    /// Per-axis rms extent about the origin, an input to the grid resolution.
    pub fn rms_extent(&self) -> f64 {
        if self.positions.is_empty() {
            return 0.0;
        }
        let sum: f64 = self
            .positions
            .iter()
            .map(|r| r.iter().map(|x| x * x).sum::<f64>())
            .sum();
        (sum / (3.0 * self.positions.len() as f64)).sqrt()
    }
}

/// Born scattering amplitude of the configuration `config` in direction
/// `delta_k` (difference of scattered and incident wave vectors):
/// `f * sum_{i in |a>} exp(i delta_k . r_i)`. An empty sum is 0.
pub fn born_amplitude(
    cloud: &AtomCloud,
    geom: &BeamGeometry,
    config: usize,
    delta_k: [f64; 3],
) -> Complex64 {
    let mut sum = Complex64::default();
    for (i, r) in cloud.positions().iter().enumerate() {
        if config & (1 << i) != 0 {
            let phase = delta_k[0] * r[0] + delta_k[1] * r[1] + delta_k[2] * r[2];
            sum += Complex64::from_polar(1.0, phase);
        }
    }
    sum * geom.f
}

/// Transmitted-mode amplitude factor for a configuration with `n_a` atoms in
/// `|a>` and total scattered probability `sigma_scatt`:
/// `sqrt(1 - sigma_scatt) * exp(i 2 pi f n_a g0^2 / k)`.
pub fn forward_amplitude(geom: &BeamGeometry, n_a: usize, sigma_scatt: f64) -> Result<Complex64> {
    if !(0.0..1.0).contains(&sigma_scatt) {
        return Err(Error::BornValidity {
            sigma_scatt,
        });
    }
    let phase = geom.forward_phase_per_atom() * n_a as f64;
    Ok(Complex64::from_polar((1.0 - sigma_scatt).sqrt(), phase))
}

/// One detection cell on the scattering sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    /// Unit vector toward the cell center.
    pub direction: [f64; 3],
    /// Exact solid angle of the cell.
    pub delta_omega: f64,
}

/// Latitude/longitude tiling of the sphere outside the forward cap.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    cells: Vec<GridCell>,
    n_theta: usize,
    n_phi: usize,
    theta0: f64,
}

impl SphereGrid {
    /// Builds the detection grid for a cloud of rms extent `cloud_rms`.
    ///
    /// The cell angular diameter is capped at `min(0.25/(k*rms), pi/16)` so
    /// the scattered amplitude is effectively constant over a cell, with a
    /// floor of 16x32 cells for point-like clouds.
    pub fn build(geom: &BeamGeometry, cloud_rms: f64, cell_cap: usize) -> Result<Self> {
        if cloud_rms < 0.0 {
            return Err(Error::Domain(format!("cloud rms must be >= 0, got {cloud_rms}")));
        }
        let diameter = if cloud_rms > 0.0 {
            (0.25 / (geom.k * cloud_rms)).min(std::f64::consts::PI / 16.0)
        } else {
            std::f64::consts::PI / 16.0
        };
        let span = std::f64::consts::PI - geom.theta0;
        let n_theta = GRID_FLOOR.0.max((span / diameter).ceil() as usize);
        let n_phi = GRID_FLOOR.1.max((2.0 * std::f64::consts::PI / diameter).ceil() as usize);
        Self::with_resolution(geom, n_theta, n_phi, cell_cap)
    }

    /// Builds with an explicit resolution (used for refinement checks).
    pub fn with_resolution(
        geom: &BeamGeometry,
        n_theta: usize,
        n_phi: usize,
        cell_cap: usize,
    ) -> Result<Self> {
        let required = n_theta * n_phi;
        if required > cell_cap {
            return Err(Error::GridResolution { required, cap: cell_cap });
        }
        let span = std::f64::consts::PI - geom.theta0;
        let d_theta = span / n_theta as f64;
        let d_phi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let mut cells = Vec::with_capacity(required);
        for jt in 0..n_theta {
            let theta_lo = geom.theta0 + jt as f64 * d_theta;
            let theta_hi = theta_lo + d_theta;
            let theta_c = 0.5 * (theta_lo + theta_hi);
            // Exact band area split evenly over the longitude columns.
            let delta_omega = d_phi * (theta_lo.cos() - theta_hi.cos());
            let (sin_t, cos_t) = theta_c.sin_cos();
            for jp in 0..n_phi {
                let phi_c = (jp as f64 + 0.5) * d_phi;
                cells.push(GridCell {
                    direction: [sin_t * phi_c.cos(), sin_t * phi_c.sin(), cos_t],
                    delta_omega,
                });
            }
        }
        Ok(Self {
            cells,
            n_theta,
            n_phi,
            theta0: geom.theta0,
        })
    }

    /// Same grid at double the angular resolution in both directions.
    pub fn refined(&self, geom: &BeamGeometry, cell_cap: usize) -> Result<Self> {
        Self::with_resolution(geom, self.n_theta * 2, self.n_phi * 2, cell_cap)
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.n_theta, self.n_phi)
    }

    pub fn total_solid_angle(&self) -> f64 {
        self.cells.iter().map(|c| c.delta_omega).sum()
    }

    /// Difference of scattered and incident wave vectors for a cell.
    pub fn delta_k(&self, geom: &BeamGeometry, cell: usize) -> [f64; 3] {
        let d = self.cells[cell].direction;
        [geom.k * d[0], geom.k * d[1], geom.k * (d[2] - 1.0)]
    }
}

/// Squared Born amplitudes of every configuration in every grid cell, plus
/// the per-configuration total scattering probability.
///
/// Cell-major layout: row `cell` holds `|f_eps(cell)|^2` for all 2^n
/// configurations, filled with a subset-sum recursion so each entry costs
/// one complex addition.
#[derive(Debug, Clone)]
pub struct ScatterTable {
    amp_sqr: Vec<f64>,
    sigma_scatt: Vec<f64>,
    dim: usize,
}

impl ScatterTable {
    pub fn build(
        cloud: &AtomCloud,
        geom: &BeamGeometry,
        grid: &SphereGrid,
        byte_cap: usize,
    ) -> Result<Self> {
        let n = cloud.n_atoms();
        let dim = 1usize << n;
        let bytes = dim
            .checked_mul(grid.n_cells())
            .and_then(|v| v.checked_mul(std::mem::size_of::<f64>()))
            .ok_or(Error::TableMemory { bytes: usize::MAX, cap: byte_cap })?;
        if bytes > byte_cap {
            return Err(Error::TableMemory { bytes, cap: byte_cap });
        }

        let mut amp_sqr = vec![0.0; dim * grid.n_cells()];
        let mut sigma_scatt = vec![0.0; dim];
        let g0_sqr = geom.g0 * geom.g0;
        let mut sums = vec![Complex64::default(); dim];
        for (cell_ix, cell) in grid.cells().iter().enumerate() {
            let dk = grid.delta_k(geom, cell_ix);
            born_row(cloud, geom, dk, &mut sums);
            let row = &mut amp_sqr[cell_ix * dim..(cell_ix + 1) * dim];
            let weight = g0_sqr * cell.delta_omega;
            for (config, s) in sums.iter().enumerate() {
                let a2 = s.norm_sqr();
                row[config] = a2;
                sigma_scatt[config] += a2 * weight;
            }
        }

        for (config, sigma) in sigma_scatt.iter().enumerate() {
            if *sigma >= 1.0 {
                return Err(Error::BornValidity { sigma_scatt: *sigma });
            }
            let _ = config;
        }

        Ok(Self { amp_sqr, sigma_scatt, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `|f_eps(cell)|^2` for every configuration, cell-major.
    pub fn amp_sqr_row(&self, cell: usize) -> &[f64] {
        &self.amp_sqr[cell * self.dim..(cell + 1) * self.dim]
    }

    /// Total scattering probability of each configuration,
    /// `g0^2 sum_cells |f_eps|^2 delta_omega`, exact on the grid.
    pub fn sigma_scatt(&self) -> &[f64] {
        &self.sigma_scatt
    }
}

/// Born amplitudes of all 2^n configurations at one `delta_k`, via the
/// subset-sum recursion `S(eps) = S(eps without lowest bit) + phase(bit)`.
pub fn born_row(cloud: &AtomCloud, geom: &BeamGeometry, delta_k: [f64; 3], out: &mut [Complex64]) {
    let n = cloud.n_atoms();
    debug_assert_eq!(out.len(), 1usize << n);
    let phases: Vec<Complex64> = cloud
        .positions()
        .iter()
        .map(|r| {
            Complex64::from_polar(
                geom.f,
                delta_k[0] * r[0] + delta_k[1] * r[1] + delta_k[2] * r[2],
            )
        })
        .collect();
    out[0] = Complex64::default();
    for config in 1..out.len() {
        let low = config & config.wrapping_neg();
        out[config] = out[config ^ low] + phases[low.trailing_zeros() as usize];
    }
}

//! Fourier-mode model of the large dense cloud.
//!
//! The cloud is a box of cells smaller than the wavelength, each holding many
//! atoms. Scattered light couples only to density fluctuations whose wave
//! vector lies on the sphere `|k_d - k_inc| = k`; each such mode carries an
//! independent pair of quadratures and its posterior narrows under the
//! scattering record exactly like the population of a small cloud, except
//! that the phase of the spatial grating stays unknown. Everything runs at
//! the mode level (quadrature plus binomial sampling of scatter counts); no
//! many-atom state vector is ever built.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::analytics;
use crate::error::{Error, Result};
use crate::optics::BeamGeometry;

const PI: f64 = std::f64::consts::PI;

/// Default atoms-per-cell validity threshold (below it a warning is raised).
pub const N_CELL_THRESHOLD: f64 = 25.0;

/// Radial quadrature points of a mode posterior.
pub const RADIAL_POINTS: usize = 4096;

/// Radial grid extent in units of the prior rms.
pub const RADIAL_SPAN: f64 = 8.0;

/// Fine sphere tiling used to assign solid angles to modes.
const SPHERE_TILES: (usize, usize) = (600, 1200);

/// One density-fluctuation mode that couples to the scattered light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterMode {
    /// Integer grid index of the wave vector (canonical half-space sign).
    pub index: [i64; 3],
    /// Wave vector, in units of k.
    pub k_vec: [f64; 3],
    /// Solid angle of the scattering directions that probe this mode.
    pub delta_omega: f64,
}

/// Geometry and mode structure of one dense-cloud model.
#[derive(Debug, Clone)]
pub struct DenseCloudModel {
    /// Cells per axis (x and y share `nx`).
    pub nx: usize,
    pub nz: usize,
    /// Cell side, in units of 1/k.
    pub cell: f64,
    /// Total cell count M.
    pub m: usize,
    /// Atoms per cell.
    pub n_cell: f64,
    /// Modes on the scattering sphere, outside the forward cap.
    pub modes: Vec<ScatterMode>,
    /// Solid angle whose directions map onto the zero mode (direct
    /// population information; nonempty only for near-wavelength boxes).
    pub zero_mode_omega: f64,
    /// Total tiled solid angle, `2 pi (1 + cos theta0)`.
    pub covered_omega: f64,
    pub warnings: Vec<String>,
}

impl DenseCloudModel {
    /// Builds the model for a box `lx = ly`, `lz` of cells with side `cell`.
    pub fn new(geom: &BeamGeometry, lx: f64, lz: f64, cell: f64, n_cell: f64) -> Result<Self> {
        if !cell.is_finite() || cell <= 0.0 || lx < cell || lz < cell {
            return Err(Error::DegenerateBox);
        }
        let lambda = 2.0 * PI / geom.k;
        if cell >= lambda {
            return Err(Error::Domain(format!(
                "cell side {cell} must be smaller than the wavelength {lambda:.4}"
            )));
        }
        if !n_cell.is_finite() || n_cell < 1.0 {
            return Err(Error::Domain(format!("atoms per cell must be >= 1, got {n_cell}")));
        }
        let mut warnings = Vec::new();
        if n_cell < N_CELL_THRESHOLD {
            warnings.push(format!(
                "atoms per cell {n_cell} is below the continuous-variable threshold {N_CELL_THRESHOLD}"
            ));
        }
        let nx = (lx / cell).round().max(1.0) as usize;
        let nz = (lz / cell).round().max(1.0) as usize;
        if ((nx as f64 * cell - lx) / lx).abs() > 1e-9 || ((nz as f64 * cell - lz) / lz).abs() > 1e-9
        {
            warnings.push(format!(
                "box rounded to {nx}x{nx}x{nz} cells of side {cell}"
            ));
        }
        let m = nx * nx * nz;

        let (modes, zero_mode_omega, covered_omega) = tile_modes(geom, nx, nz, cell);
        Ok(Self {
            nx,
            nz,
            cell,
            m,
            n_cell,
            modes,
            zero_mode_omega,
            covered_omega,
            warnings,
        })
    }

    pub fn n_atoms(&self) -> f64 {
        self.m as f64 * self.n_cell
    }
}

/// True when the integer index lies in the stored half of the +-K pairs.
fn is_canonical(i: [i64; 3]) -> bool {
    i[2] < 0 || (i[2] == 0 && i[0] < 0) || (i[2] == 0 && i[0] == 0 && i[1] < 0)
}

/// Folds a raw index into the representable zone of an `n`-point grid.
///
/// A modulation the cell grid cannot resolve is indistinguishable from its
/// alias; a single-cell box in particular folds every transfer onto zero.
fn fold(i: i64, n: usize) -> i64 {
    let n = n as i64;
    let r = i.rem_euclid(n);
    if r > n / 2 {
        r - n
    } else {
        r
    }
}

/// Tiles the sphere outside the forward cap and accumulates each tile's
/// solid angle onto the mode cell its momentum transfer falls in.
fn tile_modes(
    geom: &BeamGeometry,
    nx: usize,
    nz: usize,
    cell: f64,
) -> (Vec<ScatterMode>, f64, f64) {
    let dk_xy = 2.0 * PI / (nx as f64 * cell);
    let dk_z = 2.0 * PI / (nz as f64 * cell);
    let (n_theta, n_phi) = SPHERE_TILES;
    let span = PI - geom.theta0;
    let d_theta = span / n_theta as f64;
    let d_phi = 2.0 * PI / n_phi as f64;

    let mut acc: std::collections::BTreeMap<[i64; 3], f64> = std::collections::BTreeMap::new();
    let mut zero_mode_omega = 0.0;
    let mut covered = 0.0;
    for jt in 0..n_theta {
        let theta_lo = geom.theta0 + jt as f64 * d_theta;
        let theta_hi = theta_lo + d_theta;
        let theta_c = 0.5 * (theta_lo + theta_hi);
        let tile_omega = d_phi * (theta_lo.cos() - theta_hi.cos());
        let (sin_t, cos_t) = theta_c.sin_cos();
        for jp in 0..n_phi {
            let phi_c = (jp as f64 + 0.5) * d_phi;
            // Momentum transferred to the cloud: k_inc - k_d.
            let k_transfer = [
                -geom.k * sin_t * phi_c.cos(),
                -geom.k * sin_t * phi_c.sin(),
                geom.k * (1.0 - cos_t),
            ];
            let mut index = [
                fold((k_transfer[0] / dk_xy).round() as i64, nx),
                fold((k_transfer[1] / dk_xy).round() as i64, nx),
                fold((k_transfer[2] / dk_z).round() as i64, nz),
            ];
            covered += tile_omega;
            if index == [0, 0, 0] {
                zero_mode_omega += tile_omega;
                continue;
            }
            // +K and -K address the same quadrature pair; store one
            // representative. Nyquist components are self-conjugate.
            let neg = [
                fold(-index[0], nx),
                fold(-index[1], nx),
                fold(-index[2], nz),
            ];
            if !is_canonical(index) && neg != index {
                index = neg;
            }
            *acc.entry(index).or_insert(0.0) += tile_omega;
        }
    }
    let modes = acc
        .into_iter()
        .map(|(index, delta_omega)| ScatterMode {
            index,
            k_vec: [
                index[0] as f64 * dk_xy,
                index[1] as f64 * dk_xy,
                index[2] as f64 * dk_z,
            ],
            delta_omega,
        })
        .collect();
    (modes, zero_mode_omega, covered)
}

/// Radial population distribution of one mode's quadrature pair.
///
/// The density is the full 2-D population including the radial measure, so
/// `integral rho(N) dN = 1`; isotropy in the quadrature plane is built in.
#[derive(Debug, Clone)]
pub struct ModePosterior {
    radii: Vec<f64>,
    density: Vec<f64>,
    /// Radial second moment, `sqrt(<N^2>)`.
    pub rms: f64,
    /// Scattered photons recorded on this mode so far.
    pub n_sc: u64,
}

impl ModePosterior {
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.radii, &self.density)
    }

    /// Two-dimensional density at quadrature coordinates `(nc, ns)`.
    pub fn density_2d(&self, nc: f64, ns: f64) -> f64 {
        let r = nc.hypot(ns);
        if r > *self.radii.last().unwrap() {
            return 0.0;
        }
        let step = self.radii[1] - self.radii[0];
        let ix = ((r / step) as usize).min(self.radii.len() - 2);
        let frac = (r - self.radii[ix]) / step;
        let rho = self.density[ix] * (1.0 - frac) + self.density[ix + 1] * frac;
        if r == 0.0 {
            // Radial density vanishes linearly at the origin; take the limit.
            self.density[1] / (2.0 * PI * self.radii[1])
        } else {
            rho / (2.0 * PI * r)
        }
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

fn radial_moments(radii: &[f64], density: &[f64]) -> (f64, f64) {
    let mass = trapezoid(radii, density);
    let m2: f64 = radii
        .windows(2)
        .zip(density.windows(2))
        .map(|(xs, ys)| {
            0.5 * (xs[1] - xs[0]) * (ys[0] * xs[0] * xs[0] + ys[1] * xs[1] * xs[1])
        })
        .sum();
    (mass, m2 / mass)
}

/// Gaussian prior of one mode: both quadratures centered on zero with
/// population rms `sqrt(n_cell)/2` each, isotropic in the pair.
pub fn initial_mode_distribution(n_cell: f64, points: usize) -> ModePosterior {
    let points = points.max(RADIAL_POINTS);
    // Per-axis population variance n_cell/4; radial density is a Rayleigh.
    let s_sqr = n_cell / 4.0;
    let prior_rms = (2.0 * s_sqr).sqrt();
    let r_max = RADIAL_SPAN * prior_rms;
    let step = r_max / (points - 1) as f64;
    let radii: Vec<f64> = (0..points).map(|i| i as f64 * step).collect();
    let mut density: Vec<f64> = radii
        .iter()
        .map(|&r| r / s_sqr * (-r * r / (2.0 * s_sqr)).exp())
        .collect();
    let mass = trapezoid(&radii, &density);
    for d in &mut density {
        *d /= mass;
    }
    let (_, m2) = radial_moments(&radii, &density);
    ModePosterior {
        radii,
        density,
        rms: m2.sqrt(),
        n_sc: 0,
    }
}

/// Survival-and-click update of one mode after `n_photons` photons of which
/// `n_sc` scattered into its solid angle: the density picks up
/// `(N^2)^n_sc (1 - g0^2 f^2 (M/2) dOmega N^2)^(Np - n_sc)`.
///
/// The update depends only on the quadrature radius, so no information about
/// the grating phase is ever injected.
pub fn mode_posterior(
    prior: &ModePosterior,
    n_sc: u64,
    n_photons: u64,
    geom: &BeamGeometry,
    m: usize,
    delta_omega: f64,
) -> Result<ModePosterior> {
    if n_sc > n_photons {
        return Err(Error::Domain(format!(
            "mode cannot scatter {n_sc} of {n_photons} photons"
        )));
    }
    let c = geom.g0 * geom.g0 * geom.f * geom.f * (m as f64 / 2.0) * delta_omega;
    let r_max = *prior.radii.last().unwrap();
    if c * r_max * r_max >= 1.0 {
        // The survival factor must stay positive over the retained support;
        // mass beyond the admissible radius means the weak-scattering
        // precondition fails for this mode.
        let n_star = 1.0 / c.sqrt();
        let beyond: f64 = {
            let mut acc = 0.0;
            for (xs, ys) in prior.radii.windows(2).zip(prior.density.windows(2)) {
                if xs[0] >= n_star {
                    acc += 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]);
                }
            }
            acc
        };
        if beyond > 1e-6 {
            return Err(Error::SupportTruncated { leaked: beyond });
        }
    }

    let survivors = (n_photons - n_sc) as f64;
    let clicks = n_sc as f64;
    let mut log_density: Vec<f64> = prior
        .radii
        .iter()
        .zip(&prior.density)
        .map(|(&r, &d)| {
            if d <= 0.0 || c * r * r >= 1.0 {
                f64::NEG_INFINITY
            } else {
                let click_term = if clicks > 0.0 {
                    clicks * (r * r).max(f64::MIN_POSITIVE).ln()
                } else {
                    0.0
                };
                d.ln() + click_term + survivors * (-c * r * r).ln_1p()
            }
        })
        .collect();
    let peak = log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::SupportTruncated { leaked: 1.0 });
    }
    for l in &mut log_density {
        *l -= peak;
    }
    let mut density: Vec<f64> = log_density.iter().map(|l| l.exp()).collect();
    let mass = trapezoid(&prior.radii, &density);
    if mass <= 0.0 || !mass.is_finite() {
        return Err(Error::SupportTruncated { leaked: 1.0 });
    }
    for d in &mut density {
        *d /= mass;
    }
    // Posterior mass pressed against the outer edge means the grid no longer
    // contains the distribution.
    let tail_start = prior.radii.len() - prior.radii.len() / 50 - 1;
    let tail = trapezoid(&prior.radii[tail_start..], &density[tail_start..]);
    if tail > 1e-6 {
        return Err(Error::SupportTruncated { leaked: tail });
    }
    let (_, m2) = radial_moments(&prior.radii, &density);
    Ok(ModePosterior {
        radii: prior.radii.clone(),
        density,
        rms: m2.sqrt(),
        n_sc: prior.n_sc + n_sc,
    })
}

/// Gaussian width estimate of the scattering record on one mode,
/// `1/sqrt(dOmega (M/2) g0^2 f^2 Np)`.
pub fn mode_width_estimate(
    geom: &BeamGeometry,
    m: usize,
    delta_omega: f64,
    n_photons: f64,
) -> f64 {
    1.0 / (delta_omega * (m as f64 / 2.0) * geom.g0 * geom.g0 * geom.f * geom.f * n_photons).sqrt()
}

/// Draws each on-sphere mode's scatter count from a binomial whose
/// per-photon probability uses the prior mean square `n_cell/2`.
pub fn sample_scatter_counts(
    model: &DenseCloudModel,
    geom: &BeamGeometry,
    n_photons: u64,
    seed: u64,
) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_sq = model.n_cell / 2.0;
    model
        .modes
        .iter()
        .map(|mode| {
            let p = geom.g0
                * geom.g0
                * geom.f
                * geom.f
                * (model.m as f64 / 2.0)
                * mode.delta_omega
                * mean_sq;
            rand_distr::Binomial::new(n_photons, p.min(1.0))
                .expect("binomial probability in range")
                .sample(&mut rng)
        })
        .collect()
}

/// Combined result of the interferometer record and all mode posteriors.
#[derive(Debug, Clone, Copy)]
pub struct DenseResult {
    /// rms width of one cell's population after the measurement.
    pub delta_n1: f64,
    /// Mean spin from the per-cell composition, `(N/2) exp(-1/(8 delta_n1^2))`.
    pub jx_estimate: f64,
    /// Squeezing parameter with the collective width from the interferometer.
    pub xi: f64,
    /// rms width of the total population distribution.
    pub n0_width: f64,
    /// Numerical sum of the per-mode precisions entering `delta_n1`.
    pub mode_precision_sum: f64,
    /// Closed form of the same sum, `(g0^2 f^2 Np / 2) * covered solid angle`.
    pub mode_precision_closed_form: f64,
    pub on_sphere_modes: usize,
}

/// Combines the interferometer width with every mode posterior:
/// `1/dn1^2 = 1/dn_int^2 + sum_on 1/(M dN_i^2) + (M - n_on) 8/(M n_cell)`.
pub fn combine_widths(
    model: &DenseCloudModel,
    geom: &BeamGeometry,
    n_photons: u64,
    posteriors: &[ModePosterior],
) -> Result<DenseResult> {
    if posteriors.len() != model.modes.len() {
        return Err(Error::Domain(format!(
            "{} posteriors for {} modes",
            posteriors.len(),
            model.modes.len()
        )));
    }
    let np = n_photons as f64;
    let m = model.m as f64;
    let interferometer_precision = if n_photons == 0 {
        0.0
    } else {
        let w = analytics::interferometer_width(geom, np);
        1.0 / (w * w)
    };
    let mode_sum: f64 = posteriors
        .iter()
        .map(|p| 1.0 / (m * p.rms * p.rms))
        .sum();
    let off_sphere = (m - model.modes.len() as f64) * 8.0 / (m * model.n_cell);
    let precision = interferometer_precision + mode_sum + off_sphere;
    let delta_n1 = precision.sqrt().recip();

    let n_atoms = model.n_atoms();
    let jx_estimate = 0.5 * n_atoms * (-1.0 / (8.0 * delta_n1 * delta_n1)).exp();
    let xi = if n_photons == 0 {
        f64::INFINITY
    } else {
        let delta_jz = analytics::interferometer_width(geom, np);
        n_atoms.sqrt() * delta_jz / jx_estimate
    };
    let n0_width = if n_photons == 0 {
        0.5 * n_atoms.sqrt()
    } else {
        let w = analytics::interferometer_width(geom, np);
        (4.0 / n_atoms + 1.0 / (w * w)).sqrt().recip()
    };

    let eq_sum: f64 = model
        .modes
        .iter()
        .map(|mode| {
            mode.delta_omega * (m / 2.0) * geom.g0 * geom.g0 * geom.f * geom.f * np / m
        })
        .sum();
    let covered_outside_zero = model.covered_omega - model.zero_mode_omega;
    let eq_closed = 0.5 * geom.g0 * geom.g0 * geom.f * geom.f * np * covered_outside_zero;

    Ok(DenseResult {
        delta_n1,
        jx_estimate,
        xi,
        n0_width,
        mode_precision_sum: eq_sum,
        mode_precision_closed_form: eq_closed,
        on_sphere_modes: model.modes.len(),
    })
}

/// Posterior width of the total population for a single-cell (sub-wavelength)
/// box, where every scattering direction maps onto the zero mode and the
/// record narrows the population directly.
///
/// This is the bridge to the small-cloud description: the returned width
/// approaches `1/sqrt(4 sigma_eff Np)` with `sigma_eff = g0^2 f^2 *
/// (covered solid angle)`.
pub fn small_cloud_limit_width(
    model: &DenseCloudModel,
    geom: &BeamGeometry,
    n_photons: u64,
    n_sc: u64,
) -> Result<f64> {
    if model.m != 1 {
        return Err(Error::Domain(format!(
            "single-cell limit requires M = 1, got {}",
            model.m
        )));
    }
    let sigma_eff = geom.g0 * geom.g0 * geom.f * geom.f * model.zero_mode_omega;
    let center = model.n_cell / 2.0;
    let prior_rms = model.n_cell.sqrt() / 2.0;
    let lo = (center - RADIAL_SPAN * prior_rms).max(0.0);
    let hi = (center + RADIAL_SPAN * prior_rms).min(0.999 / sigma_eff.sqrt());
    let points = RADIAL_POINTS;
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + i as f64 * step).collect();
    let clicks = n_sc as f64;
    let survivors = (n_photons - n_sc) as f64;
    let log_density: Vec<f64> = grid
        .iter()
        .map(|&n| {
            -((n - center) / prior_rms).powi(2) / 2.0
                + if clicks > 0.0 { clicks * (n * n).max(f64::MIN_POSITIVE).ln() } else { 0.0 }
                + survivors * (-sigma_eff * n * n).ln_1p()
        })
        .collect();
    let peak = log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let density: Vec<f64> = log_density.iter().map(|l| (l - peak).exp()).collect();
    let mass = trapezoid(&grid, &density);
    let mean: f64 = grid
        .windows(2)
        .zip(density.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] * xs[0] + ys[1] * xs[1]))
        .sum::<f64>()
        / mass;
    let m2: f64 = grid
        .windows(2)
        .zip(density.windows(2))
        .map(|(xs, ys)| {
            0.5 * (xs[1] - xs[0])
                * (ys[0] * (xs[0] - mean).powi(2) + ys[1] * (xs[1] - mean).powi(2))
        })
        .sum::<f64>()
        / mass;
    Ok(m2.sqrt())
}

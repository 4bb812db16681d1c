//! Quantum-jump Monte Carlo engine.
//!
//! One photon at a time: compute the probability of a click in each
//! interferometer port and in each cell of the detection sphere, draw a
//! single uniform number, project the atomic state with the matching jump
//! operator, renormalize, undo the deterministic light shift, and record
//! the collective-spin observables. Histories are independent; an ensemble
//! hands each history its own counter-mode RNG stream derived from the
//! master seed, so runs reproduce bit for bit regardless of thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optics::{born_row, AtomCloud, BeamGeometry, CloudLaw, ScatterTable, SphereGrid};
use crate::spin::{observables, QuantumState, SpinObservables};

/// Default per-photon tolerance on the total event probability.
pub const PROBABILITY_TOLERANCE: f64 = 1e-3;

/// Outcome of one photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionEvent {
    Detector1,
    Detector2,
    /// Click in the sphere-grid cell with this index.
    Scattered(usize),
}

/// Knobs of the photon loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySettings {
    /// When false the scattering channel is switched off entirely and the
    /// run reduces to the ideal interferometer.
    pub scattering: bool,
    /// Undo the deterministic forward-mode light shift after every photon.
    pub compensate_light_shift: bool,
    /// Record observables every this many photons (1 = every photon).
    pub record_every: usize,
    /// Consistency bound on |sum of event probabilities - 1|.
    pub probability_tolerance: f64,
    pub cell_cap: usize,
    pub table_byte_cap: usize,
    /// Explicit grid resolution, overriding the cloud-size heuristic.
    pub grid_resolution: Option<(usize, usize)>,
}

impl Default for TrajectorySettings {
    fn default() -> Self {
        Self {
            scattering: true,
            compensate_light_shift: true,
            record_every: 1,
            probability_tolerance: PROBABILITY_TOLERANCE,
            cell_cap: crate::optics::DEFAULT_CELL_CAP,
            table_byte_cap: crate::optics::DEFAULT_TABLE_BYTES,
            grid_resolution: None,
        }
    }
}

/// Observables and counters at one recorded photon index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub photon_index: u64,
    pub obs: SpinObservables,
    pub n1: u64,
    pub n2: u64,
    pub n_scatt: u64,
    /// Population estimate from the interferometer record, when single-valued.
    pub jz_calc: Option<f64>,
}

/// Full log of one history.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub steps: Vec<StepRecord>,
    pub events: Vec<DetectionEvent>,
    pub n1: u64,
    pub n2: u64,
    pub n_scatt: u64,
    /// Largest |sum of probabilities - 1| seen at any photon step.
    pub max_probability_defect: f64,
    pub final_state: QuantumState,
}

impl TrajectoryRecord {
    /// Photon index of the first scattering event, if any occurred.
    pub fn first_scatter_index(&self) -> Option<u64> {
        self.events
            .iter()
            .position(|e| matches!(e, DetectionEvent::Scattered(_)))
            .map(|i| i as u64 + 1)
    }
}

/// Per-photon-index statistics across the histories of an ensemble.
#[derive(Debug, Clone, Default)]
pub struct EnsembleStats {
    pub photon_index: Vec<u64>,
    pub mean_var_jz: Vec<f64>,
    pub var_var_jz: Vec<f64>,
    pub mean_jx: Vec<f64>,
    pub var_jx: Vec<f64>,
    pub mean_jy: Vec<f64>,
    pub var_jy: Vec<f64>,
    pub mean_jsq: Vec<f64>,
    pub var_jsq: Vec<f64>,
    /// Mean of `Var(Jz) + (<Jz> - Jz_calc)^2` over histories with an estimate.
    pub mean_sqdev_jzcalc: Vec<f64>,
    pub var_sqdev_jzcalc: Vec<f64>,
    pub jzcalc_count: Vec<usize>,
    pub histories: usize,
    pub dropped: usize,
}

/// An ensemble run: aggregate statistics plus every surviving history.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub stats: EnsembleStats,
    pub histories: Vec<TrajectoryRecord>,
    /// (history index, error) of dropped histories.
    pub failures: Vec<(usize, Error)>,
}

/// Per-configuration jump coefficients, fixed once the cloud is fixed.
struct Coefficients {
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
    d1_sqr: Vec<f64>,
    d2_sqr: Vec<f64>,
    half_sigma: Vec<f64>,
    light_shift: Vec<Complex64>,
}

impl Coefficients {
    fn new(geom: &BeamGeometry, n_atoms: usize, sigma_scatt: Option<&[f64]>) -> Self {
        let dim = 1usize << n_atoms;
        let phi = Complex64::from_polar(1.0, geom.phi);
        let phi_conj = Complex64::from_polar(1.0, -geom.phi);
        let fp = geom.forward_phase_per_atom();
        let mut d1 = Vec::with_capacity(dim);
        let mut d2 = Vec::with_capacity(dim);
        let mut d1_sqr = Vec::with_capacity(dim);
        let mut d2_sqr = Vec::with_capacity(dim);
        let mut half_sigma = Vec::with_capacity(dim);
        let mut light_shift = Vec::with_capacity(dim);
        for config in 0..dim {
            let n_a = config.count_ones() as f64;
            let sigma = sigma_scatt.map_or(0.0, |s| s[config]);
            let forward = Complex64::from_polar((1.0 - sigma).sqrt(), fp * n_a);
            let a1 = 0.5 * (phi + phi_conj * forward);
            let a2 = 0.5 * (phi - phi_conj * forward);
            d1.push(a1);
            d2.push(a2);
            d1_sqr.push(a1.norm_sqr());
            d2_sqr.push(a2.norm_sqr());
            half_sigma.push(0.5 * sigma);
            light_shift.push(Complex64::from_polar(1.0, -0.5 * fp * n_a));
        }
        Self { d1, d2, d1_sqr, d2_sqr, half_sigma, light_shift }
    }
}

/// Probability of every event for the next photon, ordered as
/// `[Detector1, Detector2, cell 0, cell 1, ...]`.
///
/// Errors when the probabilities fail to close to 1 within `tolerance`,
/// which flags a scattering probability outside the weak regime or a grid
/// too coarse for the cloud.
pub fn photon_probabilities(
    state: &QuantumState,
    table: &ScatterTable,
    grid: &SphereGrid,
    geom: &BeamGeometry,
    tolerance: f64,
) -> Result<Vec<f64>> {
    let coeffs = Coefficients::new(geom, state.n_atoms(), Some(table.sigma_scatt()));
    let pops: Vec<f64> = state.amplitudes().iter().map(|c| c.norm_sqr()).collect();
    let (p1, p2) = detector_probabilities(&coeffs, &pops);
    let mut probs = Vec::with_capacity(2 + grid.n_cells());
    probs.push(p1);
    probs.push(p2);
    let g0_sqr = geom.g0 * geom.g0;
    for (cell_ix, cell) in grid.cells().iter().enumerate() {
        probs.push(cell_probability(
            table.amp_sqr_row(cell_ix),
            &pops,
            0.5 * g0_sqr * cell.delta_omega,
        ));
    }
    let total: f64 = probs.iter().sum();
    let defect = total - 1.0;
    if defect.abs() > tolerance {
        return Err(Error::ProbabilityDefect { defect, tolerance });
    }
    Ok(probs)
}

fn detector_probabilities(coeffs: &Coefficients, pops: &[f64]) -> (f64, f64) {
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    for (config, &p) in pops.iter().enumerate() {
        p1 += coeffs.d1_sqr[config] * p;
        p2 += coeffs.d2_sqr[config] * p;
    }
    (p1, p2)
}

fn scatter_probability(coeffs: &Coefficients, pops: &[f64]) -> f64 {
    pops.iter()
        .zip(&coeffs.half_sigma)
        .map(|(p, hs)| p * hs)
        .sum()
}

fn cell_probability(amp_sqr_row: &[f64], pops: &[f64], weight: f64) -> f64 {
    let dot: f64 = amp_sqr_row.iter().zip(pops).map(|(a, p)| a * p).sum();
    weight * dot
}

/// Projects the state after one detection event and renormalizes.
pub fn apply_jump(
    state: &QuantumState,
    event: DetectionEvent,
    cloud: &AtomCloud,
    geom: &BeamGeometry,
    grid: &SphereGrid,
    table: &ScatterTable,
) -> Result<QuantumState> {
    let coeffs = Coefficients::new(geom, state.n_atoms(), Some(table.sigma_scatt()));
    let mut out = state.clone();
    apply_jump_in_place(&mut out, event, &coeffs, cloud, geom, grid)?;
    Ok(out)
}

fn apply_jump_in_place(
    state: &mut QuantumState,
    event: DetectionEvent,
    coeffs: &Coefficients,
    cloud: &AtomCloud,
    geom: &BeamGeometry,
    grid: &SphereGrid,
) -> Result<()> {
    match event {
        DetectionEvent::Detector1 => {
            for (c, d) in state.amplitudes_mut().iter_mut().zip(&coeffs.d1) {
                *c *= d;
            }
        }
        DetectionEvent::Detector2 => {
            for (c, d) in state.amplitudes_mut().iter_mut().zip(&coeffs.d2) {
                *c *= d;
            }
        }
        DetectionEvent::Scattered(cell) => {
            if cell >= grid.n_cells() {
                return Err(Error::Domain(format!("cell index {cell} out of range")));
            }
            let mut row = vec![Complex64::default(); state.dim()];
            born_row(cloud, geom, grid.delta_k(geom, cell), &mut row);
            for (c, factor) in state.amplitudes_mut().iter_mut().zip(&row) {
                *c *= factor;
            }
        }
    }
    let norm_sqr = state.norm_sqr();
    if norm_sqr <= 0.0 || !norm_sqr.is_finite() {
        return Err(Error::ZeroProbabilityEvent);
    }
    state.renormalize();
    Ok(())
}

/// Multiplies each configuration by `exp(-i pi f g0^2 n_a / k)`, undoing the
/// forward-mode phase one photon leaves on the `|a>` populations. Populations
/// are untouched; only the spin orientation in the xy-plane moves.
pub fn compensate_light_shift(state: &QuantumState, geom: &BeamGeometry) -> QuantumState {
    let mut out = state.clone();
    let half_fp = 0.5 * geom.forward_phase_per_atom();
    for (config, c) in out.amplitudes_mut().iter_mut().enumerate() {
        *c *= Complex64::from_polar(1.0, -half_fp * config.count_ones() as f64);
    }
    out
}

/// Inverts the interferometer record `(N1, Np)` into the population whose
/// detection statistics would peak there.
///
/// The peak condition `tan(phi - pi g0^2 (f/k) n) = +-sqrt((Np-N1)/N1)` has a
/// ladder of solutions; the one inside `[0, N]` nearest the initial mean N/2
/// is returned as `Jz = n - N/2`. With no solution within three initial
/// standard deviations of N/2 the record is ambiguous (several populations
/// could produce it) and an error is returned.
pub fn jz_estimator(n1: u64, n_photons: u64, geom: &BeamGeometry, n_atoms: usize) -> Result<f64> {
    if n_photons == 0 || n1 > n_photons {
        return Err(Error::Domain(format!(
            "need 0 <= N1 <= Np >= 1, got N1={n1}, Np={n_photons}"
        )));
    }
    let slope = 0.5 * geom.forward_phase_per_atom(); // pi g0^2 f / k
    if slope == 0.0 {
        return Err(Error::Domain("estimator undefined for f = 0".into()));
    }
    let n = n_atoms as f64;
    let window = 3.0 * n.sqrt() / 2.0;
    let lo = (n / 2.0 - window).max(0.0);
    let hi = (n / 2.0 + window).min(n);

    let theta = if n1 == 0 {
        std::f64::consts::FRAC_PI_2
    } else {
        (((n_photons - n1) as f64 / n1 as f64).sqrt()).atan()
    };

    let mut best: Option<f64> = None;
    for branch in [theta, -theta] {
        // n(m) = (phi - branch - m pi) / slope, restricted to [lo, hi].
        let m_lo = ((geom.phi - branch - slope * hi) / std::f64::consts::PI - 1e-9).ceil() as i64;
        let m_hi = ((geom.phi - branch - slope * lo) / std::f64::consts::PI + 1e-9).floor() as i64;
        for m in m_lo..=m_hi {
            let cand = (geom.phi - branch - m as f64 * std::f64::consts::PI) / slope;
            if cand < lo - 1e-9 || cand > hi + 1e-9 {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => (cand - n / 2.0).abs() < (b - n / 2.0).abs(),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    match best {
        Some(n_a0) => Ok(n_a0 - n / 2.0),
        None => Err(Error::EstimatorAmbiguous { window }),
    }
}

/// The sphere grid and scatter table of one fixed cloud.
pub struct ScatterContext {
    pub grid: SphereGrid,
    pub table: ScatterTable,
}

impl ScatterContext {
    pub fn build(cloud: &AtomCloud, geom: &BeamGeometry, settings: &TrajectorySettings) -> Result<Self> {
        let grid = match settings.grid_resolution {
            Some((nt, np)) => SphereGrid::with_resolution(geom, nt, np, settings.cell_cap)?,
            None => SphereGrid::build(geom, cloud.rms_extent(), settings.cell_cap)?,
        };
        let table = ScatterTable::build(cloud, geom, &grid, settings.table_byte_cap)?;
        Ok(Self { grid, table })
    }
}

/// Runs one history: `n_photons` photons against a fixed cloud.
///
/// Deterministic for a given `(seed, stream)`: the RNG is a counter-mode
/// stream cipher, and each photon consumes exactly one draw.
pub fn run_trajectory(
    cloud: &AtomCloud,
    geom: &BeamGeometry,
    scatter: Option<&ScatterContext>,
    settings: &TrajectorySettings,
    n_photons: u64,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let state = QuantumState::uniform_superposition(cloud.n_atoms())?;
    run_trajectory_from(state, cloud, geom, scatter, settings, n_photons, seed, stream, &mut rng)
}

#[allow(clippy::too_many_arguments)]
fn run_trajectory_from(
    mut state: QuantumState,
    cloud: &AtomCloud,
    geom: &BeamGeometry,
    scatter: Option<&ScatterContext>,
    settings: &TrajectorySettings,
    n_photons: u64,
    seed: u64,
    stream: u64,
    rng: &mut ChaCha8Rng,
) -> Result<TrajectoryRecord> {
    if settings.scattering && scatter.is_none() {
        return Err(Error::Domain("scattering enabled but no scatter context given".into()));
    }
    let coeffs = Coefficients::new(
        geom,
        cloud.n_atoms(),
        scatter.filter(|_| settings.scattering).map(|s| s.table.sigma_scatt()),
    );
    let g0_sqr = geom.g0 * geom.g0;

    let mut record = TrajectoryRecord {
        seed,
        stream,
        steps: Vec::with_capacity(n_photons as usize / settings.record_every.max(1) + 1),
        events: Vec::with_capacity(n_photons as usize),
        n1: 0,
        n2: 0,
        n_scatt: 0,
        max_probability_defect: 0.0,
        final_state: state.clone(),
    };
    record.steps.push(StepRecord {
        photon_index: 0,
        obs: observables(&state)?,
        n1: 0,
        n2: 0,
        n_scatt: 0,
        jz_calc: None,
    });

    let mut pops = vec![0.0; state.dim()];
    for photon in 1..=n_photons {
        for (p, c) in pops.iter_mut().zip(state.amplitudes()) {
            *p = c.norm_sqr();
        }
        let (p1, p2) = detector_probabilities(&coeffs, &pops);
        let p_scatt = if settings.scattering {
            scatter_probability(&coeffs, &pops)
        } else {
            0.0
        };
        let total = p1 + p2 + p_scatt;
        let defect = total - 1.0;
        if defect.abs() > settings.probability_tolerance {
            return Err(Error::ProbabilityDefect {
                defect,
                tolerance: settings.probability_tolerance,
            });
        }
        record.max_probability_defect = record.max_probability_defect.max(defect.abs());

        // One uniform draw, inverse CDF over (Detector1, Detector2, cells...).
        let u = rng.gen::<f64>() * total;
        let event = if u < p1 {
            DetectionEvent::Detector1
        } else if u < p1 + p2 {
            DetectionEvent::Detector2
        } else {
            let ctx = scatter.expect("scattering event without context");
            let mut acc = p1 + p2;
            let mut chosen = ctx.grid.n_cells() - 1;
            for (cell_ix, cell) in ctx.grid.cells().iter().enumerate() {
                acc += cell_probability(
                    ctx.table.amp_sqr_row(cell_ix),
                    &pops,
                    0.5 * g0_sqr * cell.delta_omega,
                );
                if u < acc {
                    chosen = cell_ix;
                    break;
                }
            }
            DetectionEvent::Scattered(chosen)
        };

        match event {
            DetectionEvent::Detector1 => record.n1 += 1,
            DetectionEvent::Detector2 => record.n2 += 1,
            DetectionEvent::Scattered(_) => record.n_scatt += 1,
        }
        record.events.push(event);

        // With scattering off the grid is never indexed (no Scattered draws).
        let grid_ref: &SphereGrid = match scatter {
            Some(ctx) => &ctx.grid,
            None => &EMPTY_GRID,
        };
        apply_jump_in_place(&mut state, event, &coeffs, cloud, geom, grid_ref)?;
        if settings.compensate_light_shift {
            for (config, c) in state.amplitudes_mut().iter_mut().enumerate() {
                *c *= coeffs.light_shift[config];
            }
        }

        if photon % settings.record_every.max(1) as u64 == 0 || photon == n_photons {
            let jz_calc = jz_estimator(record.n1, photon, geom, cloud.n_atoms()).ok();
            record.steps.push(StepRecord {
                photon_index: photon,
                obs: observables(&state)?,
                n1: record.n1,
                n2: record.n2,
                n_scatt: record.n_scatt,
                jz_calc,
            });
        }
    }
    record.final_state = state;
    Ok(record)
}

// Placeholder grid for scattering-disabled runs; never indexed because
// Scattered events cannot be drawn when the channel is off.
static EMPTY_GRID: std::sync::LazyLock<SphereGrid> = std::sync::LazyLock::new(|| {
    let geom = BeamGeometry::new(1.0, 0.1, 0.0, 0.0).expect("static grid geometry");
    SphereGrid::with_resolution(&geom, 1, 1, 4).expect("static 1x1 grid")
});

/// Runs `n_histories` independent histories and aggregates their statistics.
///
/// History `h` draws its cloud and its photon outcomes from stream `h` of
/// the master seed; failures are counted and reported, not fatal.
pub fn run_ensemble(
    law: &CloudLaw,
    n_atoms: usize,
    geom: &BeamGeometry,
    settings: &TrajectorySettings,
    n_photons: u64,
    n_histories: usize,
    master_seed: u64,
) -> Result<EnsembleRun> {
    if n_histories == 0 {
        return Err(Error::Domain("ensemble needs at least one history".into()));
    }
    let outcomes: Vec<std::result::Result<TrajectoryRecord, Error>> = (0..n_histories)
        .into_par_iter()
        .map(|h| {
            let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
            rng.set_stream(h as u64);
            let cloud = law.sample(n_atoms, &mut rng);
            let scatter = if settings.scattering {
                Some(ScatterContext::build(&cloud, geom, settings)?)
            } else {
                None
            };
            let state = QuantumState::uniform_superposition(n_atoms)?;
            run_trajectory_from(
                state,
                &cloud,
                geom,
                scatter.as_ref(),
                settings,
                n_photons,
                master_seed,
                h as u64,
                &mut rng,
            )
        })
        .collect();

    let mut histories = Vec::new();
    let mut failures = Vec::new();
    for (h, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rec) => histories.push(rec),
            Err(e) => failures.push((h, e)),
        }
    }
    if histories.is_empty() {
        let (_, e) = failures.swap_remove(0);
        return Err(e);
    }
    let stats = aggregate(&histories, failures.len());
    Ok(EnsembleRun { stats, histories, failures })
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

fn aggregate(histories: &[TrajectoryRecord], dropped: usize) -> EnsembleStats {
    let n_steps = histories.iter().map(|h| h.steps.len()).min().unwrap_or(0);
    let mut stats = EnsembleStats {
        histories: histories.len(),
        dropped,
        ..EnsembleStats::default()
    };
    for step in 0..n_steps {
        stats.photon_index.push(histories[0].steps[step].photon_index);
        let collect = |f: &dyn Fn(&StepRecord) -> f64| -> Vec<f64> {
            histories.iter().map(|h| f(&h.steps[step])).collect()
        };
        let (m, v) = mean_var(&collect(&|s| s.obs.jz_var));
        stats.mean_var_jz.push(m);
        stats.var_var_jz.push(v);
        let (m, v) = mean_var(&collect(&|s| s.obs.jx_mean));
        stats.mean_jx.push(m);
        stats.var_jx.push(v);
        let (m, v) = mean_var(&collect(&|s| s.obs.jy_mean));
        stats.mean_jy.push(m);
        stats.var_jy.push(v);
        let (m, v) = mean_var(&collect(&|s| s.obs.jsq_mean));
        stats.mean_jsq.push(m);
        stats.var_jsq.push(v);

        // <(Jz - Jz_calc)^2> = Var(Jz) + (<Jz> - Jz_calc)^2 per history.
        let sq_dev: Vec<f64> = histories
            .iter()
            .filter_map(|h| {
                let s = &h.steps[step];
                s.jz_calc
                    .map(|jc| s.obs.jz_var + (s.obs.jz_mean - jc).powi(2))
            })
            .collect();
        stats.jzcalc_count.push(sq_dev.len());
        if sq_dev.is_empty() {
            stats.mean_sqdev_jzcalc.push(f64::NAN);
            stats.var_sqdev_jzcalc.push(f64::NAN);
        } else {
            let (m, v) = mean_var(&sq_dev);
            stats.mean_sqdev_jzcalc.push(m);
            stats.var_sqdev_jzcalc.push(v);
        }
    }
    stats
}

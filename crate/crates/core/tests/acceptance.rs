//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them all).
//!
//! Every tolerance is pinned here, in code. Two criteria are known to fail
//! and are kept failing on purpose, with the measured numbers in their
//! output: the pre-scatter symmetry tolerance of criterion 6 and the
//! mean-spin bound slack of criterion 7 are not attainable by the model
//! they constrain (details in the assertion messages below).

use std::sync::LazyLock;
use std::time::{Duration, Instant};

use squeeze_core::analytics;
use squeeze_core::optics::{BeamGeometry, CloudLaw};
use squeeze_core::spin::{gaussian_mean_spin_form, MeanSpinForm};
use squeeze_core::trajectory::{
    run_ensemble, EnsembleRun, TrajectorySettings, TrajectoryRecord,
};

const PI: f64 = std::f64::consts::PI;
const MASTER_SEED: u64 = 20260808;

fn fig_geometry() -> BeamGeometry {
    BeamGeometry::new(1.0, 0.45 * PI, 0.01, PI / 4.0).unwrap()
}

fn dilute_geometry() -> BeamGeometry {
    // Opening angle chosen so g0/k = 0.05 exactly.
    BeamGeometry::new(1.0, 2.0 * PI.sqrt() * 0.05, 0.5, PI / 4.0).unwrap()
}

/// Sub-wavelength-cloud ensemble: 90 histories, 5000 photons, 8 atoms.
struct SmallCloudFixture {
    geom: BeamGeometry,
    run: EnsembleRun,
    elapsed: Duration,
    point_record: TrajectoryRecord,
    point_elapsed: Duration,
    point_defect_refined: f64,
}

static SMALL_CLOUD: LazyLock<SmallCloudFixture> = LazyLock::new(|| {
    let geom = fig_geometry();
    let settings = TrajectorySettings {
        record_every: 10,
        ..TrajectorySettings::default()
    };
    let start = Instant::now();
    let run = run_ensemble(
        &CloudLaw::Gaussian { rms: 0.01 },
        8,
        &geom,
        &settings,
        5000,
        90,
        MASTER_SEED,
    )
    .expect("small-cloud ensemble");
    let elapsed = start.elapsed();

    let start = Instant::now();
    let point = run_ensemble(&CloudLaw::Point, 8, &geom, &settings, 5000, 1, MASTER_SEED)
        .expect("point-cloud history");
    let point_elapsed = start.elapsed();
    let point_record = point.histories.into_iter().next().unwrap();

    let refined_settings = TrajectorySettings {
        record_every: 10,
        grid_resolution: Some((32, 64)),
        ..TrajectorySettings::default()
    };
    let refined = run_ensemble(&CloudLaw::Point, 8, &geom, &refined_settings, 5000, 1, MASTER_SEED)
        .expect("refined point-cloud history");
    let point_defect_refined = refined.histories[0].max_probability_defect;

    SmallCloudFixture {
        geom,
        run,
        elapsed,
        point_record,
        point_elapsed,
        point_defect_refined,
    }
});

/// Dilute-cloud ensemble: 20 histories, 2000 photons, rms 10/k.
struct DiluteFixture {
    geom: BeamGeometry,
    run: EnsembleRun,
}

static DILUTE: LazyLock<DiluteFixture> = LazyLock::new(|| {
    let geom = dilute_geometry();
    let settings = TrajectorySettings {
        record_every: 5,
        ..TrajectorySettings::default()
    };
    let run = run_ensemble(
        &CloudLaw::Gaussian { rms: 10.0 },
        8,
        &geom,
        &settings,
        2000,
        20,
        MASTER_SEED,
    )
    .expect("dilute ensemble");
    DiluteFixture { geom, run }
});

#[test]
fn criterion_01_symmetric_subspace_conservation() {
    let fixture = &*SMALL_CLOUD;
    assert!(fixture.run.failures.is_empty());

    let min_jsq = fixture
        .run
        .histories
        .iter()
        .flat_map(|h| h.steps.iter().map(|s| s.obs.jsq_mean))
        .fold(f64::INFINITY, f64::min);
    let point_dev = fixture
        .point_record
        .steps
        .iter()
        .map(|s| (s.obs.jsq_mean - 20.0).abs())
        .fold(0.0f64, f64::max);
    let per_history = fixture.elapsed / fixture.run.histories.len() as u32;
    println!(
        "criterion 1: {} (min <J^2> = {min_jsq:.4} over 90 histories, point-cloud |<J^2>-20| <= {point_dev:.2e}, \
         {per_history:?}/history, point run {:?})",
        if min_jsq >= 19.0 && point_dev <= 1e-6 { "PASS" } else { "FAIL" },
        fixture.point_elapsed,
    );
    assert!(min_jsq >= 19.0, "small-cloud <J^2> dropped to {min_jsq}");
    assert!(point_dev <= 1e-6, "point-cloud <J^2> deviated by {point_dev:.3e}");
    assert!(per_history < Duration::from_secs(10));
    assert!(fixture.point_elapsed < Duration::from_secs(10));
}

#[test]
fn criterion_02_interferometer_width_law() {
    let fixture = &*SMALL_CLOUD;
    let stats = &fixture.run.stats;
    let n_ix = stats.photon_index.len();
    // Late window: last 10% of the recorded indices.
    let window = (n_ix - n_ix / 10)..n_ix;
    let mut measured = 0.0;
    let mut predicted = 0.0;
    let mut count = 0;
    for i in window {
        if stats.jzcalc_count[i] == 0 {
            continue;
        }
        measured += stats.mean_sqdev_jzcalc[i];
        predicted += analytics::interferometer_width(&fixture.geom, stats.photon_index[i] as f64)
            .powi(2);
        count += 1;
    }
    let ratio = measured / predicted;
    println!(
        "criterion 2: {} (<(Jz - Jz_calc)^2>/width^2 = {ratio:.3} over {count} late indices, tolerance 20%)",
        if (ratio - 1.0).abs() <= 0.20 { "PASS" } else { "FAIL" },
    );
    assert!(
        (ratio - 1.0).abs() <= 0.20,
        "interferometer width law off by {:.1}%",
        100.0 * (ratio - 1.0).abs()
    );
}

#[test]
fn criterion_03_scattering_width_law() {
    let fixture = &*SMALL_CLOUD;
    let stats = &fixture.run.stats;
    // The prediction is the product of the initial Gaussian (rms sqrt(N)/2)
    // and the scattering Gaussian; the comparison runs on rms widths.
    let mut worst = 0.0f64;
    for i in 1..stats.photon_index.len() {
        let np = stats.photon_index[i] as f64;
        let w_scat = analytics::small_cloud_width(&fixture.geom, np);
        let model = analytics::combine_variance(2.0, w_scat * w_scat).sqrt();
        let measured = stats.mean_var_jz[i].sqrt();
        worst = worst.max((measured - model).abs() / model);
    }
    println!(
        "criterion 3: {} (per-history Jz spread vs combined-Gaussian width, worst dev {:.1}%, tolerance 30%)",
        if worst <= 0.30 { "PASS" } else { "FAIL" },
        100.0 * worst
    );
    assert!(worst <= 0.30, "scattering width law off by {:.1}%", 100.0 * worst);
}

#[test]
fn criterion_04_mean_spin_reduction() {
    let fixture = &*SMALL_CLOUD;
    let stats = &fixture.run.stats;
    // Mean-spin relation in its full-prefactor form, evaluated at the
    // combined initial + scattering variance.
    let mut worst = 0.0f64;
    for i in 1..stats.photon_index.len() {
        let np = stats.photon_index[i] as f64;
        let w_scat = analytics::small_cloud_width(&fixture.geom, np);
        let var = analytics::combine_variance(2.0, w_scat * w_scat);
        let predicted = gaussian_mean_spin_form(MeanSpinForm::FullPrefactor, var, 4.0).unwrap();
        let measured = stats.mean_jx[i];
        worst = worst.max((measured - predicted).abs() / predicted);
    }
    println!(
        "criterion 4: {} (ensemble <Jx> vs mean-spin relation, worst dev {:.1}%, tolerance 10%)",
        if worst <= 0.10 { "PASS" } else { "FAIL" },
        100.0 * worst
    );
    assert!(worst <= 0.10, "mean-spin reduction off by {:.1}%", 100.0 * worst);
}

#[test]
fn criterion_05_dilute_variance_band() {
    let fixture = &*DILUTE;
    assert!(fixture.run.failures.is_empty());
    let stats = &fixture.run.stats;
    let n_ix = stats.photon_index.len();
    // Checked where the predicted squeezing has developed: the information
    // of the naive estimate flows from photon 1, the simulation's arrives
    // with the actual scattering events, so early indices sit above the
    // prediction by construction.
    let mut lines = Vec::new();
    let mut ok = true;
    for i in [(3 * n_ix) / 4, (9 * n_ix) / 10, n_ix - 1] {
        let np = stats.photon_index[i] as f64;
        let predicted = analytics::dilute_variance(8, &fixture.geom, np);
        let ratio = stats.mean_var_jz[i] / predicted;
        ok &= (0.5..=1.0).contains(&ratio);
        lines.push(format!("Np={np}: ratio {ratio:.3}"));
    }
    println!(
        "criterion 5: {} (Var(Jz)/naive prediction in [0.5, 1.0]: {})",
        if ok { "PASS" } else { "FAIL" },
        lines.join(", ")
    );
    assert!(ok, "dilute variance left the [0.5, 1.0] prediction band: {lines:?}");
}

#[test]
fn criterion_06_first_scatter_symmetry_drop() {
    let fixture = &*DILUTE;
    let mut worst_drift = 0.0f64;
    let mut min_drop = f64::INFINITY;
    let mut scattering_histories = 0;
    for record in &fixture.run.histories {
        let Some(first) = record.first_scatter_index() else {
            // A history may never scatter (the record then pins the state
            // to the non-scattering population); the drop clause is vacuous.
            continue;
        };
        scattering_histories += 1;
        let mut before = 20.0;
        for step in &record.steps {
            if step.photon_index < first {
                worst_drift = worst_drift.max((step.obs.jsq_mean - 20.0).abs());
                before = step.obs.jsq_mean;
            } else {
                min_drop = min_drop.min(before - step.obs.jsq_mean);
                break;
            }
        }
    }
    let drift_ok = worst_drift <= 1e-6;
    let drop_ok = min_drop > 0.0;
    println!(
        "criterion 6: {} (pre-scatter |<J^2>-20| <= {worst_drift:.2e} vs tolerance 1e-6; \
         min drop at first scatter {min_drop:.3} over {scattering_histories} histories)",
        if drift_ok && drop_ok { "PASS" } else { "FAIL" }
    );
    assert!(drop_ok, "<J^2> failed to drop at the first scattered photon");
    // Known failure: the flux-conserving no-scatter factor sqrt(1 - sigma)
    // carries the configuration dependence of the total cross section
    // (superradiant interference), so the transmitted photons leak
    // which-atom information before any scattering event. The leak per
    // mean free path is parameter-independent, of order 1e-4..1e-2 in
    // <J^2>, and cannot be brought under 1e-6 by any admissible choice of
    // f, rms or photon number.
    assert!(
        drift_ok,
        "pre-scatter <J^2> drift {worst_drift:.3e} exceeds the 1e-6 tolerance; \
         the no-jump back-action of a configuration-dependent cross section \
         makes this tolerance unattainable for a dilute cloud"
    );
}

#[test]
fn criterion_07_mean_spin_bound() {
    let fixture = &*DILUTE;
    let slack = 0.05 * 4.0; // 5% of N/2
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = (0usize, 0u64);
    for (h, record) in fixture.run.histories.iter().enumerate() {
        for step in &record.steps {
            let bound = analytics::jx_bound_nonsymmetric(step.obs.jz_var, step.obs.jsq_mean);
            let violation = step.obs.jx_mean - bound;
            if violation > worst {
                worst = violation;
                worst_at = (h, step.photon_index);
            }
        }
    }
    println!(
        "criterion 7: {} (max <Jx> - bound = {worst:.4} at history {} photon {}, slack {slack})",
        if worst <= slack { "PASS" } else { "FAIL" },
        worst_at.0,
        worst_at.1
    );
    // Known failure, in two regimes. At the start of every history the
    // exact binomial mean spin N/2 = 4 exceeds the Gaussian-ansatz value
    // 4 exp(-1/16) by 0.2423, which is 6.06% of N/2 against the 5% slack.
    // Late in a history the record displaces the population distribution;
    // the bound assumes it stays centered on zero and undershoots the
    // realized mean spin by up to ~0.43.
    assert!(
        worst <= slack,
        "mean-spin estimate violated by {worst:.4} (> slack {slack}); the initial \
         binomial state alone exceeds the asymptotic-form estimate by 0.2423"
    );
}

/// Population distribution over n_a from the closed-form per-event factors,
/// given only the realized counts. Independent of the jump implementation.
fn population_oracle(
    geom: &BeamGeometry,
    n_atoms: usize,
    n1: u64,
    n2: u64,
    n_scatt: u64,
    with_scattering: bool,
) -> Vec<f64> {
    let slope = 0.5 * geom.forward_phase_per_atom();
    let sigma1 = geom.sigma_one();
    let binomial: Vec<f64> = (0..=n_atoms)
        .map(|na| {
            let mut c = 1.0;
            for i in 0..na {
                c *= (n_atoms - i) as f64 / (i + 1) as f64;
            }
            c / (1u64 << n_atoms) as f64
        })
        .collect();
    let mut pops: Vec<f64> = (0..=n_atoms)
        .map(|na| {
            let n = na as f64;
            let sigma = if with_scattering { sigma1 * n * n } else { 0.0 };
            let forward = num_complex::Complex64::from_polar(
                (1.0 - sigma).sqrt(),
                geom.forward_phase_per_atom() * n,
            );
            let e_phi = num_complex::Complex64::from_polar(1.0, geom.phi);
            let e_phi_c = num_complex::Complex64::from_polar(1.0, -geom.phi);
            let d1 = 0.5 * (e_phi + e_phi_c * forward);
            let d2 = 0.5 * (e_phi - e_phi_c * forward);
            let mut log_p = binomial[na].ln()
                + n1 as f64 * d1.norm_sqr().max(f64::MIN_POSITIVE).ln()
                + n2 as f64 * d2.norm_sqr().max(f64::MIN_POSITIVE).ln();
            if n_scatt > 0 {
                log_p += n_scatt as f64 * (n * n).max(f64::MIN_POSITIVE).ln();
            }
            let _ = slope;
            log_p
        })
        .collect();
    let peak = pops.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for p in &mut pops {
        *p = (*p - peak).exp();
    }
    let total: f64 = pops.iter().sum();
    for p in &mut pops {
        *p /= total;
    }
    pops
}

#[test]
fn criterion_08_interferometer_only_oracle() {
    // Scattering channel off: populations must match the closed-form
    // cos/sin product exactly, for 100 seeds.
    let geom = BeamGeometry::new(1.0, 0.45 * PI, 0.05, PI / 4.0).unwrap();
    let settings = TrajectorySettings {
        scattering: false,
        record_every: 200,
        ..TrajectorySettings::default()
    };
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let run = run_ensemble(&CloudLaw::Point, 6, &geom, &settings, 200, 1, seed).unwrap();
        let record = &run.histories[0];
        let oracle = population_oracle(&geom, 6, record.n1, record.n2, 0, false);
        let pops = record.final_state.populations_by_na();
        for (a, b) in pops.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    println!(
        "criterion 8: {} (interferometer-only populations vs direct product, worst |dp| = {worst:.2e}, tolerance 1e-12)",
        if worst <= 1e-12 { "PASS" } else { "FAIL" }
    );
    assert!(worst <= 1e-12, "oracle deviation {worst:.3e}");
}

#[test]
fn criterion_09_point_cloud_oracle() {
    // Full channel set on a point cloud: populations factor into the
    // detector product and the superradiant n^2 click factors.
    let geom = BeamGeometry::new(1.0, 0.45 * PI, 0.05, PI / 4.0).unwrap();
    let settings = TrajectorySettings {
        record_every: 200,
        ..TrajectorySettings::default()
    };
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let run = run_ensemble(&CloudLaw::Point, 6, &geom, &settings, 200, 1, seed).unwrap();
        let record = &run.histories[0];
        let oracle =
            population_oracle(&geom, 6, record.n1, record.n2, record.n_scatt, true);
        let pops = record.final_state.populations_by_na();
        for (a, b) in pops.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    println!(
        "criterion 9: {} (point-cloud populations vs direct product, worst |dp| = {worst:.2e}, tolerance 1e-10)",
        if worst <= 1e-10 { "PASS" } else { "FAIL" }
    );
    assert!(worst <= 1e-10, "oracle deviation {worst:.3e}");
}

#[test]
fn criterion_10_probability_completeness() {
    let small = &*SMALL_CLOUD;
    let dilute = &*DILUTE;
    let mut max_defect = small.point_record.max_probability_defect;
    for record in small.run.histories.iter().chain(&dilute.run.histories) {
        max_defect = max_defect.max(record.max_probability_defect);
    }
    // The flux-conserving forward amplitude uses the same grid sum as the
    // per-cell probabilities, so the defect is pure floating-point noise;
    // refinement is compared with a matching rounding floor.
    let coarse = small.point_record.max_probability_defect;
    let refined = small.point_defect_refined;
    let refine_ok = refined <= coarse + 1e-12;
    println!(
        "criterion 10: {} (max |sum p - 1| = {max_defect:.2e} <= 1e-3; refinement {coarse:.2e} -> {refined:.2e})",
        if max_defect <= 1e-3 && refine_ok { "PASS" } else { "FAIL" }
    );
    assert!(max_defect <= 1e-3);
    assert!(
        refine_ok,
        "defect grew under refinement beyond rounding: {coarse:.3e} -> {refined:.3e}"
    );
}

#[test]
fn criterion_11_analytics_optima() {
    let geom = fig_geometry();
    let n_atoms = 8;
    let (g0, f, k) = (geom.g0, geom.f, geom.k);

    let interferometer = analytics::predict_interferometer(&geom, n_atoms, 1000.0);
    let np_int = k * k / (PI * PI * g0.powi(4) * f * f);
    let dilute = analytics::predict_dilute(&geom, n_atoms, 1000.0);
    let np_dilute = 1.0 / (4.0 * PI * g0 * g0 * f * f);
    let dense = analytics::predict_dense(&geom, n_atoms, 1000.0);
    let np_dense = 4.0 / (PI * g0 * g0 * f * f);

    let rel = |a: f64, b: f64| (a - b).abs() / b;
    let np_ok = rel(interferometer.np_opt_derived, np_int) <= 1e-6
        && rel(dilute.np_opt_derived, np_dilute) <= 1e-6
        && rel(dense.np_opt_derived, np_dense) <= 1e-6;

    let xi_dense_closed = (std::f64::consts::E / (4.0 * PI * n_atoms as f64)).sqrt() * k / g0;
    let dense_ok = rel(dense.xi_min_derived, xi_dense_closed) <= 1e-12;

    // The published constants that disagree with their own curves must be
    // reported next to the derived values, never replaced by them.
    let small = analytics::predict_small_cloud(&geom, n_atoms, 1000.0);
    let xi_int_derived = (std::f64::consts::E / n_atoms as f64).sqrt();
    let xi_small_derived = (4.0 * std::f64::consts::E / (PI * n_atoms as f64)).sqrt() * k / g0;
    let flags_ok = rel(interferometer.xi_min_derived, xi_int_derived) <= 1e-9
        && rel(interferometer.xi_min_published, (1.0 / n_atoms as f64).sqrt()) <= 1e-15
        && rel(small.xi_min_derived, xi_small_derived) <= 1e-9
        && rel(dilute.xi_min_published * 2.0f64.sqrt(), dilute.xi_min_derived) <= 1e-9;
    let report = analytics::prediction_report(&geom, n_atoms, 1000.0);
    let emitted = report
        .iter()
        .filter(|r| r.quantity == "xi_min" || r.quantity == "np_opt")
        .all(|r| r.published.is_some() && r.derived.is_some());

    println!(
        "criterion 11: {} (np_opt to 1e-6: {np_ok}; dense xi_min to 1e-12: {dense_ok}; \
         discrepancies emitted with derived sqrt(e/N) and sqrt(4e/(pi N)) k/g0: {})",
        if np_ok && dense_ok && flags_ok && emitted { "PASS" } else { "FAIL" },
        flags_ok && emitted
    );
    assert!(np_ok && dense_ok && flags_ok && emitted);
}

#[test]
fn criterion_12_dense_mode_quadrature() {
    use squeeze_core::dense::{
        initial_mode_distribution, mode_posterior, mode_width_estimate, DenseCloudModel,
        RADIAL_POINTS,
    };
    let geom = BeamGeometry::new(1.0, 2.0 * PI.sqrt() * 0.05, 0.001, PI / 4.0).unwrap();
    let lambda = 2.0 * PI;
    let model = DenseCloudModel::new(&geom, 10.0 * lambda, 10.0 * lambda, lambda / 4.0, 100.0)
        .unwrap();
    let prior = initial_mode_distribution(model.n_cell, RADIAL_POINTS);
    let mode = model
        .modes
        .iter()
        .cloned()
        .max_by(|a, b| a.delta_omega.total_cmp(&b.delta_omega))
        .unwrap();
    let mut worst = 0.0f64;
    for np in [3_000_000u64, 10_000_000, 30_000_000] {
        let posterior =
            mode_posterior(&prior, 0, np, &geom, model.m, mode.delta_omega).unwrap();
        let estimate = mode_width_estimate(&geom, model.m, mode.delta_omega, np as f64);
        worst = worst.max((posterior.rms - estimate).abs() / estimate);
    }

    // Sum identity: per-mode precisions against the covered solid angle.
    let np = 10_000_000f64;
    let sum: f64 = model
        .modes
        .iter()
        .map(|mode| {
            let w = mode_width_estimate(&geom, model.m, mode.delta_omega, np);
            1.0 / (model.m as f64 * w * w)
        })
        .sum();
    let closed = 0.5 * geom.g0 * geom.g0 * geom.f * geom.f * np
        * (model.covered_omega - model.zero_mode_omega);
    let sum_dev = (sum - closed).abs() / closed;

    println!(
        "criterion 12: {} (posterior rms vs width estimate worst {:.1}% <= 10%; precision sum dev {sum_dev:.2e} <= 1e-3)",
        if worst <= 0.10 && sum_dev <= 1e-3 { "PASS" } else { "FAIL" },
        100.0 * worst
    );
    assert!(worst <= 0.10, "quadrature rms off by {:.1}%", 100.0 * worst);
    assert!(sum_dev <= 1e-3, "precision sum identity off by {sum_dev:.2e}");
}

#[test]
fn criterion_13_rescaling_symmetry() {
    let n_atoms = 8;
    let np = 2000.0;
    let theta0 = 0.3;
    let f1 = 0.05;
    let base = BeamGeometry::new(1.0, theta0, f1, PI / 4.0).unwrap();
    let base_rows = analytics::prediction_report(&base, n_atoms, np);
    let mut worst = 0.0f64;
    for alpha in [0.5, 2.0, 10.0] {
        let scaled = BeamGeometry::new(alpha, theta0, f1 / alpha, PI / 4.0).unwrap();
        let rows = analytics::prediction_report(&scaled, n_atoms, np);
        for (a, b) in base_rows.iter().zip(&rows) {
            // The golden-section argmin reproduces to the bracket tolerance
            // only; every xi, width and ratio must be exact.
            if a.quantity == "np_opt" {
                continue;
            }
            if let (Some(x), Some(y)) = (a.derived, b.derived) {
                worst = worst.max((x - y).abs() / x.abs().max(1e-300));
            }
            if let (Some(x), Some(y)) = (a.published, b.published) {
                worst = worst.max((x - y).abs() / x.abs().max(1e-300));
            }
        }
    }
    println!(
        "criterion 13: {} (worst relative change under k-rescaling = {worst:.2e}, tolerance 1e-12)",
        if worst <= 1e-12 { "PASS" } else { "FAIL" }
    );
    assert!(worst <= 1e-12);
}

#[test]
fn criterion_14_end_to_end_runtime() {
    let fixture = &*SMALL_CLOUD;
    println!(
        "criterion 14: {} (90 histories x 5000 photons in {:?}, limit 300 s)",
        if fixture.elapsed < Duration::from_secs(300) { "PASS" } else { "FAIL" },
        fixture.elapsed
    );
    assert!(fixture.elapsed < Duration::from_secs(300));
}

//! Command implementations behind the CLI: each takes a validated
//! configuration, runs the matching computation and writes its tables.

use std::path::{Path, PathBuf};

use crate::analytics;
use crate::config::ExperimentConfig;
use crate::dense::{
    combine_widths, initial_mode_distribution, mode_posterior, mode_width_estimate,
    sample_scatter_counts, DenseCloudModel, RADIAL_POINTS,
};
use crate::error::{Error, Result};
use crate::report::{self, Cell, ResultTable};
use crate::trajectory::{self, TrajectoryRecord};

fn trajectory_rows(table: &mut ResultTable, record: &TrajectoryRecord) {
    for step in &record.steps {
        table.push(vec![
            Cell::Uint(step.photon_index),
            Cell::Float(step.obs.jz_mean),
            Cell::Float(step.obs.jz_var),
            Cell::Float(step.obs.jx_mean),
            Cell::Float(step.obs.jy_mean),
            Cell::Float(step.obs.jsq_mean),
            Cell::Uint(step.n1),
            Cell::Uint(step.n2),
            Cell::Uint(step.n_scatt),
            Cell::from(step.jz_calc),
        ]);
    }
}

/// Runs a single history and writes `trajectory.csv`.
pub fn cmd_trajectory(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let geom = config.geometry()?;
    // A single trajectory is exactly history 0 of the ensemble.
    let run = trajectory::run_ensemble(
        &config.cloud_law(),
        config.n_atoms,
        &geom,
        &config.settings(),
        config.n_photons,
        1,
        config.seed,
    )?;
    let record = &run.histories[0];
    let mut table = ResultTable::new(
        report::TRAJECTORY,
        report::standard_metadata("trajectory", config.hash(), config.seed),
    );
    trajectory_rows(&mut table, record);
    Ok(vec![table.write(out)?])
}

/// Runs the ensemble and writes `ensemble.csv` plus `summary.csv`.
pub fn cmd_ensemble(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let geom = config.geometry()?;
    let run = trajectory::run_ensemble(
        &config.cloud_law(),
        config.n_atoms,
        &geom,
        &config.settings(),
        config.n_photons,
        config.n_histories,
        config.seed,
    )?;
    let mut metadata = report::standard_metadata("ensemble", config.hash(), config.seed);
    metadata.push(("histories".into(), run.stats.histories.to_string()));
    metadata.push(("dropped".into(), run.stats.dropped.to_string()));

    let mut ensemble = ResultTable::new(report::ENSEMBLE, metadata.clone());
    let s = &run.stats;
    for i in 0..s.photon_index.len() {
        ensemble.push(vec![
            Cell::Uint(s.photon_index[i]),
            Cell::Float(s.mean_var_jz[i]),
            Cell::Float(s.var_var_jz[i]),
            Cell::Float(s.mean_jx[i]),
            Cell::Float(s.var_jx[i]),
            Cell::Float(s.mean_jy[i]),
            Cell::Float(s.var_jy[i]),
            Cell::Float(s.mean_jsq[i]),
            Cell::Float(s.var_jsq[i]),
            if s.jzcalc_count[i] == 0 {
                Cell::Empty
            } else {
                Cell::Float(s.mean_sqdev_jzcalc[i])
            },
            if s.jzcalc_count[i] == 0 {
                Cell::Empty
            } else {
                Cell::Float(s.var_sqdev_jzcalc[i])
            },
            Cell::Uint(s.jzcalc_count[i] as u64),
            Cell::Uint(s.histories as u64),
        ]);
    }

    let mut summary = ResultTable::new(report::SUMMARY, metadata);
    for (h, record) in run.histories.iter().enumerate() {
        let last = record.steps.last().expect("at least the initial record");
        summary.push(vec![
            Cell::Uint(h as u64),
            Cell::Uint(record.stream),
            Cell::Uint(record.n1),
            Cell::Uint(record.n2),
            Cell::Uint(record.n_scatt),
            Cell::Float(last.obs.jz_mean),
            Cell::Float(last.obs.jz_var),
            Cell::Float(last.obs.jx_mean),
            Cell::Float(last.obs.jy_mean),
            Cell::Float(last.obs.jsq_mean),
            Cell::from(last.jz_calc),
        ]);
    }
    Ok(vec![ensemble.write(out)?, summary.write(out)?])
}

/// Writes every analytic quantity to `predictions.csv`.
pub fn cmd_predict(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let geom = config.geometry()?;
    let mut table = ResultTable::new(
        report::PREDICTIONS,
        report::standard_metadata("predict", config.hash(), config.seed),
    );
    for row in analytics::prediction_report(&geom, config.n_atoms, config.n_photons as f64) {
        table.push(vec![
            Cell::Text(row.regime.into()),
            Cell::Text(row.quantity.into()),
            Cell::from(row.published),
            Cell::from(row.derived),
            Cell::Text(row.note.into()),
        ]);
    }
    if let Some(d) = &config.dense {
        // Cloud cross section in wavelength^2 units for the optical density.
        let lambda = 2.0 * std::f64::consts::PI;
        let area = (d.lx / lambda) * (d.lx / lambda);
        let n_total = {
            let model = DenseCloudModel::new(&geom, d.lx, d.lz, d.cell, d.n_cell)?;
            model.n_atoms()
        };
        let n_int = n_total.round().max(1.0) as usize;
        table.push(vec![
            Cell::Text("dense".into()),
            Cell::Text("optical_density".into()),
            Cell::Empty,
            Cell::Float(analytics::optical_density(n_int, area)),
            Cell::Text("N lambda^2 / A".into()),
        ]);
        table.push(vec![
            Cell::Text("dense".into()),
            Cell::Text("xi_bound_optical_density".into()),
            Cell::Empty,
            Cell::Float(analytics::optical_density_bound(n_int, area)?),
            Cell::Text("sqrt(1/D)".into()),
        ]);
    }
    for n_t in [10.0, 100.0, 1000.0] {
        table.push(vec![
            Cell::Text("cavity".into()),
            Cell::Text("xi_factor".into()),
            Cell::Empty,
            Cell::Float(analytics::cavity_factor(n_t)?),
            Cell::Text(format!("{n_t} passes")),
        ]);
    }
    Ok(vec![table.write(out)?])
}

/// Runs the dense-cloud mode model and writes its three tables.
pub fn cmd_dense(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let d = config.dense.as_ref().ok_or_else(|| {
        Error::InvalidConfig(vec!["the dense command needs a `dense` section".into()])
    })?;
    let geom = config.geometry()?;
    let model = DenseCloudModel::new(&geom, d.lx, d.lz, d.cell, d.n_cell)?;
    let counts = sample_scatter_counts(&model, &geom, config.n_photons, config.seed);
    let prior = initial_mode_distribution(model.n_cell, RADIAL_POINTS);
    let posteriors: Result<Vec<_>> = model
        .modes
        .iter()
        .zip(&counts)
        .map(|(mode, &n_sc)| {
            mode_posterior(&prior, n_sc, config.n_photons, &geom, model.m, mode.delta_omega)
        })
        .collect();
    let posteriors = posteriors?;
    let result = combine_widths(&model, &geom, config.n_photons, &posteriors)?;

    let mut metadata = report::standard_metadata("dense", config.hash(), config.seed);
    for warning in &model.warnings {
        metadata.push(("warning".into(), warning.clone()));
    }

    let mut summary = ResultTable::new(report::DENSE_SUMMARY, metadata.clone());
    let np = config.n_photons as f64;
    let rows: Vec<(&str, f64)> = vec![
        ("cells", model.m as f64),
        ("atoms", model.n_atoms()),
        ("on_sphere_modes", result.on_sphere_modes as f64),
        ("covered_solid_angle", model.covered_omega),
        ("zero_mode_solid_angle", model.zero_mode_omega),
        ("delta_n1", result.delta_n1),
        ("jx_estimate", result.jx_estimate),
        ("xi", result.xi),
        ("n0_width", result.n0_width),
        ("mode_precision_sum", result.mode_precision_sum),
        ("mode_precision_closed_form", result.mode_precision_closed_form),
        (
            "xi_curve_at_np",
            analytics::xi_dense(&geom, model.n_atoms().round() as usize, np),
        ),
    ];
    for (name, value) in rows {
        summary.push(vec![Cell::Text(name.into()), Cell::Float(value)]);
    }

    let mut modes = ResultTable::new(report::DENSE_MODES, metadata.clone());
    for ((mode, posterior), &n_sc) in model.modes.iter().zip(&posteriors).zip(&counts) {
        modes.push(vec![
            Cell::Int(mode.index[0]),
            Cell::Int(mode.index[1]),
            Cell::Int(mode.index[2]),
            Cell::Float(mode.k_vec[0]),
            Cell::Float(mode.k_vec[1]),
            Cell::Float(mode.k_vec[2]),
            Cell::Float(mode.delta_omega),
            Cell::Uint(n_sc),
            Cell::Float(posterior.rms),
            Cell::Float(mode_width_estimate(&geom, model.m, mode.delta_omega, np)),
        ]);
    }

    // Radial plot data for the widest mode (largest solid angle).
    let mut radial = ResultTable::new(report::DENSE_RADIAL, metadata);
    if let Some(widest) = (0..model.modes.len())
        .max_by(|&a, &b| model.modes[a].delta_omega.total_cmp(&model.modes[b].delta_omega))
    {
        let posterior = &posteriors[widest];
        for ((r, p), q) in prior
            .radii()
            .iter()
            .zip(prior.density())
            .zip(posterior.density())
        {
            radial.push(vec![Cell::Float(*r), Cell::Float(*p), Cell::Float(*q)]);
        }
    }

    Ok(vec![
        summary.write(out)?,
        modes.write(out)?,
        radial.write(out)?,
    ])
}

/// Parameter swept by `cmd_sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Photons,
    ScatteringAmplitude,
    Theta0,
}

impl SweepParameter {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "photons" | "np" => Ok(Self::Photons),
            "f" => Ok(Self::ScatteringAmplitude),
            "theta0" => Ok(Self::Theta0),
            other => Err(Error::Domain(format!(
                "unknown sweep parameter `{other}` (expected photons, f or theta0)"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Photons => "photons",
            Self::ScatteringAmplitude => "f",
            Self::Theta0 => "theta0",
        }
    }
}

/// Sweeps one parameter and tabulates the squeezing curves and widths.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    parameter: SweepParameter,
    lo: f64,
    hi: f64,
    steps: usize,
    log_spacing: bool,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    if steps < 2 || hi <= lo || !hi.is_finite() || !lo.is_finite() || (log_spacing && lo <= 0.0) {
        return Err(Error::Domain(format!(
            "sweep needs hi > lo and steps >= 2 (and lo > 0 for log spacing), got {lo}..{hi} x{steps}"
        )));
    }
    let mut metadata = report::standard_metadata("sweep", config.hash(), config.seed);
    metadata.push(("parameter".into(), parameter.label().into()));
    let mut table = ResultTable::new(report::SWEEP, metadata);
    let n = config.n_atoms;
    for i in 0..steps {
        let t = i as f64 / (steps - 1) as f64;
        let value = if log_spacing {
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        } else {
            lo + t * (hi - lo)
        };
        let (geom, np) = match parameter {
            SweepParameter::Photons => (config.geometry()?, value),
            SweepParameter::ScatteringAmplitude => (
                crate::optics::BeamGeometry::new(1.0, config.theta0.0, value, config.phi.0)?,
                config.n_photons as f64,
            ),
            SweepParameter::Theta0 => (
                crate::optics::BeamGeometry::new(1.0, value, config.f, config.phi.0)?,
                config.n_photons as f64,
            ),
        };
        table.push(vec![
            Cell::Text(parameter.label().into()),
            Cell::Float(value),
            Cell::Float(analytics::xi_interferometer(&geom, n, np)),
            Cell::Float(analytics::xi_small_cloud(&geom, n, np)),
            Cell::Float(analytics::xi_dilute(&geom, n, np)),
            Cell::Float(analytics::xi_dense(&geom, n, np)),
            Cell::Float(analytics::interferometer_width(&geom, np)),
            Cell::Float(analytics::small_cloud_width(&geom, np)),
        ]);
    }
    Ok(vec![table.write(out)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_config(extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"{{
                "n_atoms": 4,
                "cloud": {{"law": "point"}},
                "theta0": "0.45pi",
                "f": 0.05,
                "n_photons": 120,
                "n_histories": 3,
                "seed": 11,
                "record_every": 20{extra}
            }}"#
        );
        ExperimentConfig::from_json(&text).unwrap()
    }

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("squeeze-cmd-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn trajectory_outputs_are_byte_identical() {
        let config = test_config("");
        let d1 = temp_dir("traj1");
        let d2 = temp_dir("traj2");
        let p1 = cmd_trajectory(&config, &d1).unwrap();
        let p2 = cmd_trajectory(&config, &d2).unwrap();
        let a = std::fs::read(&p1[0]).unwrap();
        let b = std::fs::read(&p2[0]).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        let _ = std::fs::remove_dir_all(d1);
        let _ = std::fs::remove_dir_all(d2);
    }

    #[test]
    fn ensemble_writes_valid_tables() {
        let config = test_config("");
        let dir = temp_dir("ens");
        let paths = cmd_ensemble(&config, &dir).unwrap();
        assert_eq!(paths.len(), 2);
        let ensemble = std::fs::read_to_string(&paths[0]).unwrap();
        report::validate_table(&ensemble, &report::ENSEMBLE).unwrap();
        let summary = std::fs::read_to_string(&paths[1]).unwrap();
        report::validate_table(&summary, &report::SUMMARY).unwrap();
        // 3 histories, one row each.
        assert_eq!(summary.lines().filter(|l| !l.starts_with('#')).count(), 4);
        let _ = std::fs::remove_dir_all(dir);
    }

    #[test]
    fn predict_emits_published_and_derived_columns() {
        let config = test_config(
            r#", "dense": {"lx": 62.832, "lz": 62.832, "cell": 1.5708, "n_cell": 100.0}"#,
        );
        let dir = temp_dir("pred");
        let paths = cmd_predict(&config, &dir).unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        report::validate_table(&text, &report::PREDICTIONS).unwrap();
        assert!(text.contains("np_opt"));
        assert!(text.contains("xi_min"));
        assert!(text.contains("width_ratio_scat_over_int"));
        assert!(text.contains("xi_bound_optical_density"));
        let _ = std::fs::remove_dir_all(dir);
    }

    #[test]
    fn dense_command_produces_three_tables() {
        // Millions of atoms in the box: the per-mode weak-scattering guard
        // needs a much smaller amplitude than the 8-atom runs use.
        let text = r#"{
            "n_atoms": 4,
            "cloud": {"law": "point"},
            "theta0": "0.45pi",
            "f": 0.002,
            "n_photons": 200000,
            "seed": 11,
            "dense": {"lx": 62.832, "lz": 62.832, "cell": 1.5708, "n_cell": 100.0}
        }"#;
        let config = ExperimentConfig::from_json(text).unwrap();
        let dir = temp_dir("dense");
        let paths = cmd_dense(&config, &dir).unwrap();
        assert_eq!(paths.len(), 3);
        for (path, schema) in paths.iter().zip([
            &report::DENSE_SUMMARY,
            &report::DENSE_MODES,
            &report::DENSE_RADIAL,
        ]) {
            let text = std::fs::read_to_string(path).unwrap();
            report::validate_table(&text, schema).unwrap();
        }
        let _ = std::fs::remove_dir_all(dir);
    }

    #[test]
    fn sweep_minimum_matches_optimizer() {
        let config = test_config("");
        let dir = temp_dir("sweep");
        let geom = config.geometry().unwrap();
        let np_opt = analytics::predict_dense(&geom, 4, 1.0).np_opt_derived;
        let paths = cmd_sweep(
            &config,
            SweepParameter::Photons,
            np_opt * 0.01,
            np_opt * 100.0,
            201,
            true,
            &dir,
        )
        .unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        report::validate_table(&text, &report::SWEEP).unwrap();
        // Find the tabulated minimum of xi_dense (column 5).
        let mut best = (0.0f64, f64::INFINITY);
        for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            let value: f64 = cells[1].parse().unwrap();
            let xi: f64 = cells[5].parse().unwrap();
            if xi < best.1 {
                best = (value, xi);
            }
        }
        // Grid resolution: 201 log points over 4 decades ~ 4.7% spacing.
        assert!(
            (best.0 - np_opt).abs() / np_opt < 0.05,
            "tabulated minimum at {} vs optimizer {np_opt}",
            best.0
        );
        let _ = std::fs::remove_dir_all(dir);
    }
}

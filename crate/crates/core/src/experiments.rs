//! Experiment pipelines behind the `ionmod` command line: configuration
//! loading with `section.key=value` overrides, the gating, analytic, bound,
//! particle and comparison runs, and atomic CSV output.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::analytic::{default_grid, modulated_signal, ReleaseModel, SourceModel};
use crate::bounded::{upper_signal, SeriesTruncation};
use crate::gating::{
    evolve, ook_waveforms, rates_for_applied, steady_state, Segment, VoltageWaveform,
};
use crate::laplace::{TalbotConfig, TransferFunction};
use crate::pbs::{self, PbsConfig, ReleaseEstimate};
use crate::physio::{permeability, DimensionlessParams, TransmitterSpec};
use crate::series::{log_grid, TimeSeries};
use num_complex::Complex64;

/// Failure of an experiment run, grouped by process exit code.
#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(crate::Error),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Numerical(_) => 3,
            ExperimentError::Io { .. } => 4,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<crate::Error> for ExperimentError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::InvalidParameter { .. } | crate::Error::UnphysicalPermeability { .. } => {
                ExperimentError::Config(e.to_string())
            }
            other => ExperimentError::Numerical(other),
        }
    }
}

pub type ExperimentResult<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Fig3Gating,
    Fig4Compare,
    Fig5Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationConfig {
    /// On-level voltages, mV, one gating trace each.
    pub v_on_levels: Vec<f64>,
    /// Off-level voltage, mV.
    pub v_off: f64,
    /// Gating sample spacing, ms.
    pub sample_ms: f64,
    /// Opening probability during the on interval.
    pub p_open: f64,
    /// Explicit waveform as `(duration ms, level mV)` pairs; replaces the
    /// on-off keying traces when non-empty.
    pub segments: Vec<(f64, f64)>,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        Self {
            v_on_levels: vec![25.0, 50.0, 200.0, -200.0],
            v_off: -200.0,
            sample_ms: 0.01,
            p_open: 1.0,
            segments: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbsSection {
    pub n_channels: f64,
    /// Step size for the `pbs` subcommand, s.
    pub dt: f64,
    /// Step sizes compared against the analytic signal, s.
    pub compare_dts: Vec<f64>,
    pub trials: usize,
    pub bins: usize,
    /// Retirement radius in units of the cell radius.
    pub kill_radius_factor: f64,
    pub seed: u64,
}

impl Default for PbsSection {
    fn default() -> Self {
        let base = PbsConfig::default();
        Self {
            n_channels: 1e7,
            dt: 1e-6,
            compare_dts: vec![1e-5, 1e-6],
            trials: base.n_trials,
            bins: base.n_bins(),
            kill_radius_factor: 10.0,
            seed: base.base_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    pub channel_counts: Vec<f64>,
    pub grid_points: usize,
    pub talbot_nodes: usize,
    pub n_terms: usize,
    pub tail_tol: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let trunc = SeriesTruncation::default();
        Self {
            channel_counts: vec![100.0, 500.0, 1e7],
            grid_points: 200,
            talbot_nodes: TalbotConfig::default().n_nodes,
            n_terms: trunc.n_terms,
            tail_tol: trunc.tail_tol,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub transmitter: TransmitterSpec,
    pub modulation: ModulationConfig,
    pub pbs: PbsSection,
    pub numerics: NumericsConfig,
    /// Scale trials and grids down roughly tenfold.
    pub quick: bool,
}

/// Parses a `section.key=value` override. The value is read as a TOML value
/// and falls back to a plain string.
fn parse_override(text: &str) -> ExperimentResult<(Vec<String>, toml::Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| ExperimentError::Config(format!("override `{text}` is not key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(String::is_empty) {
        return Err(ExperimentError::Config(format!("bad override key `{key}`")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    Ok((path, value))
}

fn apply_override(
    table: &mut toml::Table,
    path: &[String],
    value: toml::Value,
) -> ExperimentResult<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ExperimentError::Config(format!("`{p}` is not a section")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Builds a config from optional TOML text plus overrides, then validates.
    pub fn from_toml(text: Option<&str>, overrides: &[String]) -> ExperimentResult<Self> {
        let mut table: toml::Table = match text {
            Some(t) => toml::from_str(t).map_err(|e| ExperimentError::Config(e.to_string()))?,
            None => toml::Table::new(),
        };
        for o in overrides {
            let (path, value) = parse_override(o)?;
            apply_override(&mut table, &path, value)?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> ExperimentResult<Self> {
        let text = match path {
            Some(p) => Some(fs::read_to_string(p).map_err(|e| ExperimentError::io(p, e))?),
            None => None,
        };
        Self::from_toml(text.as_deref(), overrides)
    }

    pub fn validate(&self) -> ExperimentResult<()> {
        self.transmitter.validate()?;
        if !(0.0..=1.0).contains(&self.modulation.p_open) {
            return Err(ExperimentError::Config(
                "modulation.p_open must lie in [0, 1]".into(),
            ));
        }
        if !(self.modulation.sample_ms > 0.0) {
            return Err(ExperimentError::Config(
                "modulation.sample_ms must be > 0".into(),
            ));
        }
        if self.numerics.grid_points < 2 {
            return Err(ExperimentError::Config(
                "numerics.grid_points must be >= 2".into(),
            ));
        }
        if self.numerics.channel_counts.is_empty() {
            return Err(ExperimentError::Config(
                "numerics.channel_counts is empty".into(),
            ));
        }
        self.talbot().validate()?;
        self.truncation().validate()?;
        for &dt in self.pbs.compare_dts.iter().chain([&self.pbs.dt]) {
            self.pbs_config(dt)?;
        }
        Ok(())
    }

    pub fn talbot(&self) -> TalbotConfig {
        TalbotConfig::with_nodes(self.numerics.talbot_nodes)
    }

    pub fn truncation(&self) -> SeriesTruncation {
        SeriesTruncation {
            n_terms: self.numerics.n_terms,
            tail_tol: self.numerics.tail_tol,
        }
    }

    fn grid_points(&self) -> usize {
        if self.quick {
            (self.numerics.grid_points / 10).max(2)
        } else {
            self.numerics.grid_points
        }
    }

    /// Output grid: `t = 0` followed by log-spaced points up to `T1`.
    pub fn time_grid(&self) -> Vec<f64> {
        let mut grid = vec![0.0];
        grid.extend(default_grid(&self.transmitter, self.grid_points()));
        grid
    }

    pub fn spec_for(&self, n_channels: f64) -> TransmitterSpec {
        TransmitterSpec {
            n_channels,
            ..self.transmitter
        }
    }

    pub fn pbs_config(&self, dt: f64) -> ExperimentResult<PbsConfig> {
        let trials = if self.quick {
            (self.pbs.trials / 10).max(1)
        } else {
            self.pbs.trials
        };
        if self.pbs.bins == 0 {
            return Err(ExperimentError::Config("pbs.bins must be >= 1".into()));
        }
        let cfg = PbsConfig {
            dt,
            n_trials: trials,
            bin_width: self.transmitter.t1 / self.pbs.bins as f64,
            kill_radius: self.pbs.kill_radius_factor * self.transmitter.r_m,
            base_seed: self.pbs.seed,
            duration: self.transmitter.t1,
        };
        cfg.validate(&self.transmitter)?;
        Ok(cfg)
    }

    pub fn release_model(&self, n_channels: f64) -> ExperimentResult<ReleaseModel> {
        let spec = self.spec_for(n_channels);
        let params = DimensionlessParams::from_spec(&spec, self.modulation.p_open)?;
        Ok(ReleaseModel::new(
            &spec,
            &params,
            &SourceModel::from_spec(&spec),
        )?)
    }
}

/// Writes a CSV through a temporary sibling file and a rename, so readers
/// never observe a partial file.
pub fn write_csv_atomic(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> ExperimentResult<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| ExperimentError::Config(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| -> csv::Result<()> {
        let mut w = csv::Writer::from_path(&tmp)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(ExperimentError::io(&tmp, io::Error::other(e)));
    }
    fs::rename(&tmp, path).map_err(|e| ExperimentError::io(path, e))
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// File-name tag for a channel count, e.g. `N100`, `N1e7`.
pub fn channel_tag(n: f64) -> String {
    if n >= 1e4 {
        format!("N{n:e}")
    } else {
        format!("N{n}")
    }
}

fn dt_tag(dt: f64) -> String {
    format!("dt{dt:e}")
}

fn level_tag(v: f64) -> String {
    if v < 0.0 {
        format!("m{}", -v)
    } else {
        format!("{v}")
    }
}

fn gating_rows(trace: &TimeSeries) -> Vec<Vec<String>> {
    trace
        .iter()
        .map(|(t, p)| vec![num(t * 1e3), num(p)])
        .collect()
}

/// Opening-probability traces for on-off keying with every configured on
/// level, or for the explicit waveform when one is configured.
pub fn run_fig3(cfg: &ExperimentConfig, out: &Path) -> ExperimentResult<Vec<PathBuf>> {
    let m = &cfg.modulation;
    let dt = m.sample_ms * 1e-3;
    let p0 = steady_state(rates_for_applied(m.v_off))?.0;
    let mut written = Vec::new();
    if !m.segments.is_empty() {
        let segments = m
            .segments
            .iter()
            .map(|&(ms, level)| Segment {
                duration: ms * 1e-3,
                level,
            })
            .collect();
        let trace = evolve(p0, &VoltageWaveform::new(segments)?, dt)?;
        let path = out.join("gating_custom.csv");
        write_csv_atomic(&path, &["t_ms", "p_open"], &gating_rows(&trace.series))?;
        written.push(path);
        return Ok(written);
    }
    for &v_on in &m.v_on_levels {
        let (_, one) = ook_waveforms(v_on, m.v_off, cfg.transmitter.t1, cfg.transmitter.t_slot)?;
        let trace = evolve(p0, &one, dt)?;
        let path = out.join(format!("gating_von_{}.csv", level_tag(v_on)));
        write_csv_atomic(&path, &["t_ms", "p_open"], &gating_rows(&trace.series))?;
        written.push(path);
    }
    Ok(written)
}

/// Analytic `w(t)` and `M(t)` for every configured channel count.
pub fn run_analytic(cfg: &ExperimentConfig, out: &Path) -> ExperimentResult<Vec<PathBuf>> {
    let grid = cfg.time_grid();
    let mut written = Vec::new();
    for &n in &cfg.numerics.channel_counts {
        let sig = modulated_signal(&cfg.release_model(n)?, &grid, &cfg.talbot())?;
        let rows = grid
            .iter()
            .enumerate()
            .map(|(k, &t)| vec![num(t), num(sig.w.values[k]), num(sig.m.values[k])])
            .collect::<Vec<_>>();
        let path = out.join(format!("analytic_{}.csv", channel_tag(n)));
        write_csv_atomic(&path, &["t_s", "w_mo_per_s", "M_mo"], &rows)?;
        written.push(path);
    }
    Ok(written)
}

/// Upper-bound series `(w_u, M_u)` for one channel count.
pub fn bound_signal(
    cfg: &ExperimentConfig,
    n: f64,
    grid: &[f64],
) -> ExperimentResult<(TimeSeries, TimeSeries)> {
    let spec = cfg.spec_for(n);
    let params = DimensionlessParams::from_spec(&spec, cfg.modulation.p_open)?;
    Ok(upper_signal(
        &spec,
        &params,
        &SourceModel::from_spec(&spec),
        grid,
        &cfg.truncation(),
    )?)
}

pub fn run_bound(cfg: &ExperimentConfig, out: &Path) -> ExperimentResult<Vec<PathBuf>> {
    let grid = cfg.time_grid();
    let mut written = Vec::new();
    for &n in &cfg.numerics.channel_counts {
        let (w, m) = bound_signal(cfg, n, &grid)?;
        let rows = grid
            .iter()
            .enumerate()
            .map(|(k, &t)| vec![num(t), num(w.values[k]), num(m.values[k])])
            .collect::<Vec<_>>();
        let path = out.join(format!("bound_{}.csv", channel_tag(n)));
        write_csv_atomic(&path, &["t_s", "w_u_mo_per_s", "M_u_mo"], &rows)?;
        written.push(path);
    }
    Ok(written)
}

/// Particle estimate at step `dt` for the configured particle channel count.
pub fn pbs_estimate(cfg: &ExperimentConfig, dt: f64) -> ExperimentResult<ReleaseEstimate> {
    let spec = cfg.spec_for(cfg.pbs.n_channels);
    let z = permeability(&spec, cfg.modulation.p_open)?;
    Ok(pbs::run(&spec, z, &cfg.pbs_config(dt)?)?)
}

fn pbs_rows(est: &ReleaseEstimate) -> Vec<Vec<String>> {
    (0..est.w_hat.len())
        .map(|k| {
            vec![
                num(est.w_hat.times[k]),
                num(est.w_hat.values[k]),
                num(est.ci_halfwidth.values[k]),
                num(est.m_hat.values[k]),
            ]
        })
        .collect()
}

const PBS_HEADER: [&str; 4] = ["t_s", "w_hat_mo_per_s", "ci_mo_per_s", "M_hat_mo"];

pub fn run_pbs(cfg: &ExperimentConfig, out: &Path) -> ExperimentResult<Vec<PathBuf>> {
    let est = pbs_estimate(cfg, cfg.pbs.dt)?;
    let path = out.join(format!(
        "pbs_{}_{}.csv",
        channel_tag(cfg.pbs.n_channels),
        dt_tag(cfg.pbs.dt)
    ));
    write_csv_atomic(&path, &PBS_HEADER, &pbs_rows(&est))?;
    Ok(vec![path])
}

/// Analytic release averaged over every particle-histogram bin,
/// `(M(t_end) - M(t_start)) / bin_width`.
pub fn analytic_bin_average(
    model: &ReleaseModel,
    est: &ReleaseEstimate,
    talbot: &TalbotConfig,
) -> ExperimentResult<Vec<f64>> {
    let mut edges = vec![0.0];
    edges.extend(est.w_hat.times.iter().copied());
    let sig = modulated_signal(model, &edges, talbot)?;
    Ok(sig
        .m
        .values
        .windows(2)
        .map(|p| (p[1] - p[0]) / est.bin_width)
        .collect())
}

/// Per-bin flags: does the analytic bin average lie inside the particle 95%
/// interval?
pub fn ci_overlap(analytic: &[f64], est: &ReleaseEstimate) -> Vec<bool> {
    analytic
        .iter()
        .zip(est.w_hat.values.iter().zip(&est.ci_halfwidth.values))
        .map(|(&a, (&w, &ci))| (a - w).abs() <= ci)
        .collect()
}

/// Analytic signals for every channel count plus particle estimates at every
/// comparison step, joined on the particle bins.
pub fn run_fig4(cfg: &ExperimentConfig, out: &Path) -> ExperimentResult<Vec<PathBuf>> {
    let mut written = run_analytic(cfg, out)?;
    let model = cfg.release_model(cfg.pbs.n_channels)?;
    let mut joined = Vec::new();
    for &dt in &cfg.pbs.compare_dts {
        let est = pbs_estimate(cfg, dt)?;
        let path = out.join(format!(
            "pbs_{}_{}.csv",
            channel_tag(cfg.pbs.n_channels),
            dt_tag(dt)
        ));
        write_csv_atomic(&path, &PBS_HEADER, &pbs_rows(&est))?;
        written.push(path);
        let analytic = analytic_bin_average(&model, &est, &cfg.talbot())?;
        let overlap = ci_overlap(&analytic, &est);
        for k in 0..est.w_hat.len() {
            joined.push(vec![
                num(dt),
                num(est.w_hat.times[k] - est.bin_width),
                num(est.w_hat.times[k]),
                num(analytic[k]),
                num(est.w_hat.values[k]),
                num(est.ci_halfwidth.values[k]),
                u8::from(overlap[k]).to_string(),
            ]);
        }
    }
    let path = out.join("compare_fig4.csv");
    write_csv_atomic(
        &path,
        &[
            "dt_s",
            "t_start_s",
            "t_s",
            "w_analytic_mo_per_s",
            "w_hat_mo_per_s",
            "ci_mo_per_s",
            "ci_overlap",
        ],
        &joined,
    )?;
    written.push(path);
    Ok(written)
}

/// Exact and upper-bound cumulative release on one grid.
pub fn release_and_bound(
    cfg: &ExperimentConfig,
    n: f64,
    grid: &[f64],
) -> ExperimentResult<(TimeSeries, TimeSeries)> {
    let sig = modulated_signal(&cfg.release_model(n)?, grid, &cfg.talbot())?;
    let (_, m_u) = bound_signal(cfg, n, grid)?;
    Ok((sig.m, m_u))
}

/// Relative gap `(M_u - M) / M_u` at the end of the on interval.
pub fn bound_gap(cfg: &ExperimentConfig, n: f64) -> ExperimentResult<(f64, f64, f64)> {
    let t = cfg.transmitter.t1;
    let (m, m_u) = release_and_bound(cfg, n, &[t])?;
    let (m, m_u) = (m.values[0], m_u.values[0]);
    Ok((m, m_u, (m_u - m) / m_u))
}

pub fn run_fig5(cfg: &ExperimentConfig, out: &Path) -> ExperimentResult<Vec<PathBuf>> {
    let grid = cfg.time_grid();
    let mut written = Vec::new();
    let mut gaps = Vec::new();
    for &n in &cfg.numerics.channel_counts {
        let (m, m_u) = release_and_bound(cfg, n, &grid)?;
        let rows = grid
            .iter()
            .enumerate()
            .map(|(k, &t)| vec![num(t), num(m.values[k]), num(m_u.values[k])])
            .collect::<Vec<_>>();
        let path = out.join(format!("fig5_{}.csv", channel_tag(n)));
        write_csv_atomic(&path, &["t_s", "M_mo", "M_u_mo"], &rows)?;
        written.push(path);
        let (m_end, mu_end, gap) = bound_gap(cfg, n)?;
        gaps.push(vec![num(n), num(m_end), num(mu_end), num(gap)]);
    }
    let path = out.join("fig5_gap.csv");
    write_csv_atomic(&path, &["n_channels", "M_mo", "M_u_mo", "gap"], &gaps)?;
    written.push(path);
    Ok(written)
}

pub fn run_scenario(
    scenario: Scenario,
    cfg: &ExperimentConfig,
    out: &Path,
) -> ExperimentResult<Vec<PathBuf>> {
    match scenario {
        Scenario::Fig3Gating => run_fig3(cfg, out),
        Scenario::Fig4Compare => run_fig4(cfg, out),
        Scenario::Fig5Bound => run_fig5(cfg, out),
    }
}

/// `(s, phi(s))` on a log-spaced real axis and along one inversion contour,
/// for inspecting the transfer function.
pub fn run_transfer_table(cfg: &ExperimentConfig, out: &Path) -> ExperimentResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    for &n in &cfg.numerics.channel_counts {
        let spec = cfg.spec_for(n);
        let params = DimensionlessParams::from_spec(&spec, cfg.modulation.p_open)?;
        let tf = TransferFunction::new(
            params.a,
            params.h,
            spec.r_m,
            DimensionlessParams::rho_source(&spec),
        )?;
        let mut points: Vec<Complex64> = log_grid(1e-4, 1e4, 81)
            .into_iter()
            .map(|s| Complex64::new(s, 0.0))
            .collect();
        points.extend((1..=40).map(|k| Complex64::new(-5.0, 0.5 * k as f64)));
        let mut rows = Vec::with_capacity(points.len());
        for s in points {
            let phi = tf.phi_star(s)?;
            let uni = tf.phi_star_uniform(s)?;
            rows.push(vec![
                num(s.re),
                num(s.im),
                num(phi.re),
                num(phi.im),
                num(uni.re),
                num(uni.im),
            ]);
        }
        let path = out.join(format!("transfer_{}.csv", channel_tag(n)));
        write_csv_atomic(
            &path,
            &[
                "s_re",
                "s_im",
                "phi_re",
                "phi_im",
                "phi_uniform_re",
                "phi_uniform_im",
            ],
            &rows,
        )?;
        written.push(path);
    }
    Ok(written)
}

use std::cell::RefCell;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use slabloc::arrival::{stft, tdoa_from_toas};
use slabloc::harness::{run_monte_carlo_with, Localizers, MonteCarloConfig, RNG_ALGORITHM};
use slabloc::io;
use slabloc::localize::{localize_so_tdoa, Algorithm, PreparedGrid};
use slabloc::plate::{
    derive_constants, envelope, envelope_peak_time, envelope_threshold_toa, perceived_velocity,
};
use slabloc::regions::enumerate_regions;
use slabloc::synth::{self, TimeGrid};

use crate::config::RunConfig;
use crate::CliError;

pub struct Context {
    pub cfg: RunConfig,
    config_path: Option<PathBuf>,
    outputs: RefCell<Vec<String>>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: String,
    seed: u64,
    rng: &'static str,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct Timestamp {
    unix_seconds: u64,
}

impl Context {
    pub fn new(cfg: RunConfig, config_path: Option<PathBuf>) -> Self {
        Self {
            cfg,
            config_path,
            outputs: RefCell::new(Vec::new()),
        }
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        let dir = self.cfg.output_dir.as_path();
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }

    /// Writes `name` in the output directory and records it for the manifest.
    fn write<F>(&self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> slabloc::Result<()>,
    {
        let path = self.out_dir()?.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        log::info!("wrote {}", path.display());
        self.outputs.borrow_mut().push(name.to_string());
        Ok(())
    }

    fn finish(&self, command: &str) -> Result<(), CliError> {
        let mut outputs = self.outputs.borrow().clone();
        outputs.sort();
        let manifest = Manifest {
            tool: "slabloc",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: self
                .config_path
                .as_ref()
                .map_or_else(|| "<defaults>".to_string(), |p| p.display().to_string()),
            seed: self.cfg.monte_carlo.seed,
            rng: RNG_ALGORITHM,
            outputs,
        };
        let dir = self.out_dir()?;
        let mut text = toml::to_string(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push_str("\n[config]\n");
        text.push_str(&indent_tables(&self.cfg.to_toml()));
        fs::write(dir.join(format!("manifest-{command}.toml")), text)?;
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let stamp = toml::to_string(&Timestamp { unix_seconds: now })
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        // the only non-deterministic output, kept out of the manifest
        fs::write(dir.join(format!("manifest-{command}.time.toml")), stamp)?;
        Ok(())
    }
}

/// Nests a serialized config under `[config]` by prefixing its table headers.
fn indent_tables(toml_text: &str) -> String {
    toml_text
        .lines()
        .map(|l| {
            if let Some(rest) = l.strip_prefix("[[") {
                format!("[[config.{rest}")
            } else if let Some(rest) = l.strip_prefix('[') {
                format!("[config.{rest}")
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn plate(cfg: &RunConfig) -> Result<(slabloc::plate::PlateConstants, f64), CliError> {
    Ok((derive_constants(&cfg.material)?, cfg.material.damping_theta))
}

pub fn synth_free(ctx: &Context, distances: &[f64]) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let s = &cfg.synthesis;
    let distances = if distances.is_empty() {
        &s.distances[..]
    } else {
        distances
    };
    if let Some(d) = distances.iter().find(|d| !(**d > 0.0)) {
        return Err(CliError::Config(format!("--distance must be positive, got {d}")));
    }
    let (c, theta) = plate(cfg)?;
    let grid = TimeGrid::new(0.0, s.sample_rate, s.samples(s.duration))?;
    let mut peaks = Vec::new();
    for &d in distances {
        let w = synth::synth_free(d, &grid, &c, theta, &s.params())?;
        let (k, amp) = w.peak();
        peaks.push((d, w.time(k), amp));
        ctx.write(&format!("synth_d{d}.csv"), |f| io::write_waveform_csv(f, &w))?;
        ctx.write(&format!("synth_d{d}.bin"), |f| io::write_waveform_bin(f, &w))?;
    }
    ctx.write("synth_peaks.csv", |f| {
        writeln!(f, "distance_m,peak_time_s,peak_amplitude")?;
        for (d, t, a) in &peaks {
            writeln!(f, "{d},{t},{a}")?;
        }
        Ok(())
    })?;
    ctx.finish("synth")
}

pub fn synth_bounded(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let s = &cfg.synthesis;
    let b = &s.bounded;
    let (c, theta) = plate(cfg)?;
    let grid = TimeGrid::new(0.0, s.sample_rate, s.samples(b.duration))?;
    let w = synth::synth_bounded(
        &b.room,
        b.source,
        b.sensor,
        &grid,
        &c,
        theta,
        &s.params(),
        b.p_max,
        b.q_max,
    )?;
    let spec = stft(&w, s.stft)?;
    ctx.write("bounded.csv", |f| io::write_waveform_csv(f, &w))?;
    ctx.write("bounded.bin", |f| io::write_waveform_bin(f, &w))?;
    ctx.write("bounded_stft.csv", |f| io::write_spectrogram_csv(f, &spec))?;
    ctx.finish("synth-bounded")
}

pub fn velocity_curve(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let v = &cfg.velocity_curve;
    let (c, theta) = plate(cfg)?;
    let d_ref = v.reference_distance;
    let level = v.level_fraction * envelope(d_ref, envelope_peak_time(d_ref, &c, theta)?, &c, theta);
    let n = ((v.d_max - v.d_min) / v.d_step + 1e-9).floor() as usize + 1;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let d = v.d_min + i as f64 * v.d_step;
        let analytic = perceived_velocity(d, &c, theta)?;
        let numeric = envelope_threshold_toa(d, level, &c, theta)?.map(|t| d / t);
        if numeric.is_none() {
            log::warn!("envelope at d = {d} m never reaches the threshold level");
        }
        rows.push((d, analytic, numeric));
    }
    ctx.write("velocity_curve.csv", |f| {
        writeln!(f, "d_m,c_p_analytic,c_p_threshold_numeric")?;
        for (d, a, n) in &rows {
            match n {
                Some(n) => writeln!(f, "{d},{a},{n}")?,
                None => writeln!(f, "{d},{a},")?,
            }
        }
        Ok(())
    })?;
    ctx.finish("velocity-curve")
}

pub fn regions(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let map = enumerate_regions(&cfg.room, &cfg.sensors, cfg.localization.region_grid)?;
    log::info!("{} regions", map.len());
    let dir = ctx.out_dir()?;
    io::write_region_bundle(dir, &map)?;
    for name in [io::REGIONS_FILE, io::REGIONS_META_FILE] {
        ctx.outputs.borrow_mut().push(name.to_string());
    }
    ctx.finish("regions")
}

pub fn localize(ctx: &Context, toa_path: &Path, algorithms: &[Algorithm]) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let file = File::open(toa_path)
        .map_err(|e| CliError::Config(format!("cannot read TOA table {}: {e}", toa_path.display())))?;
    let toas =
        io::read_toa_table(file).map_err(|e| CliError::Config(format!("{}: {e}", toa_path.display())))?;
    if toas.len() != cfg.sensors.len() {
        return Err(CliError::Config(format!(
            "{} lists {} sensors but the config has {}",
            toa_path.display(),
            toas.len(),
            cfg.sensors.len()
        )));
    }
    let tau = tdoa_from_toas(&toas)?;
    let loc = &cfg.localization;
    let grid = PreparedGrid::new(&cfg.sensors, cfg.room.lattice(loc.grid.0, loc.grid.1)?)?;
    let mut results = Vec::new();
    for &alg in algorithms {
        results.push(match alg {
            Algorithm::SoTdoaRegion => {
                let map = enumerate_regions(&cfg.room, &cfg.sensors, loc.region_grid)?;
                localize_so_tdoa(&tau, &map)?
            }
            Algorithm::SoTdoaGrid => grid.so_tdoa(&tau)?,
            Algorithm::Hyperbolic => grid.hyperbolic(&tau, loc.c_hat)?,
        });
    }
    ctx.write("localization.csv", |f| io::write_localization_csv(f, &results))?;
    ctx.finish("localize")
}

pub fn monte_carlo(ctx: &Context, algorithms: &[Algorithm]) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let m = &cfg.monte_carlo;
    let mc = MonteCarloConfig {
        room: cfg.room,
        sensors: cfg.sensors.clone(),
        source: m.source,
        profile: cfg.profile,
        sigma_t_list: m.sigma_t_list.clone(),
        runs: m.runs,
        grid: cfg.localization.grid,
        region_grid: cfg.localization.region_grid,
        c_hat: cfg.localization.c_hat,
        rng_seed: m.seed,
        algorithms: algorithms.to_vec(),
        keep_runs: m.keep_runs,
    };
    mc.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let report = run_monte_carlo_with(&mc, &Localizers::new(&mc)?)?;
    ctx.write("mc_report.csv", |f| io::write_mc_report_csv(f, &report))?;
    if m.keep_runs {
        ctx.write("mc_runs.csv", |f| io::write_mc_runs_csv(f, &report))?;
    }
    if algorithms.contains(&Algorithm::Hyperbolic) && !m.c_hat_sweep.is_empty() {
        let base = MonteCarloConfig {
            algorithms: vec![Algorithm::Hyperbolic],
            keep_runs: false,
            ..mc
        };
        let localizers = Localizers::new(&base)?;
        let mut rows = Vec::new();
        for &c_hat in &m.c_hat_sweep {
            let r = run_monte_carlo_with(
                &MonteCarloConfig {
                    c_hat,
                    ..base.clone()
                },
                &localizers,
            )?;
            rows.extend(r.entries.into_iter().map(|e| (c_hat, e.sigma_t, e.rmse)));
        }
        ctx.write("mc_c_hat_sweep.csv", |f| {
            writeln!(f, "c_hat_m_s,sigma_t_s,rmse_m")?;
            for (c, s, r) in &rows {
                writeln!(f, "{c},{s},{r}")?;
            }
            Ok(())
        })?;
    }
    ctx.finish("montecarlo")
}

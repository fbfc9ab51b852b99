//! File formats.
//!
//! Everything tabular is CSV with a header row; floats are written in Rust's
//! shortest round-trip form so a write/read cycle is exact. Waveforms also
//! have a compact little-endian binary form:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "SLABWAV1"
//! 8       8     sample rate, f64
//! 16      8     sample count, u64
//! 24      8·n   samples, f64
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arrival::{Spectrogram, ToaMethod};
use crate::error::{Error, Result};
use crate::geometry::{Point, RoomGeometry};
use crate::harness::MonteCarloReport;
use crate::localize::LocalizationResult;
use crate::regions::{CharacteristicVector, Region, RegionMap, SensorArray};
use crate::synth::{TimeGrid, Waveform};

pub const WAVEFORM_MAGIC: &[u8; 8] = b"SLABWAV1";
pub const REGION_BUNDLE_VERSION: u32 = 1;
pub const REGIONS_FILE: &str = "regions.csv";
pub const REGIONS_META_FILE: &str = "regions.toml";

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse(format!("{other:?}")),
        }
    }
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} value {field:?}")))
}

fn parse_usize(field: &str, what: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what} value {field:?}")))
}

fn expect_header(r: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let h = r.headers()?;
    if h.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected header {:?}, found {:?}",
            expected.join(","),
            h.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

pub fn write_waveform_csv<W: Write>(out: W, w: &Waveform) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["time_s", "amplitude"])?;
    for (k, v) in w.samples.iter().enumerate() {
        wr.write_record([w.time(k).to_string(), v.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads `time_s,amplitude` rows; the time column must be uniform.
pub fn read_waveform_csv<R: Read>(input: R) -> Result<Waveform> {
    let mut r = csv::Reader::from_reader(input);
    expect_header(&mut r, &["time_s", "amplitude"])?;
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!("expected 2 fields, got {}", rec.len())));
        }
        times.push(parse_f64(&rec[0], "time_s")?);
        samples.push(parse_f64(&rec[1], "amplitude")?);
    }
    if times.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            available: times.len(),
        });
    }
    let grid = TimeGrid::from_times(&times)?;
    Waveform::new(grid.sample_rate(), grid.t0(), samples)
}

pub fn write_waveform_bin<W: Write>(mut out: W, w: &Waveform) -> Result<()> {
    out.write_all(WAVEFORM_MAGIC)?;
    out.write_all(&w.sample_rate.to_le_bytes())?;
    out.write_all(&(w.samples.len() as u64).to_le_bytes())?;
    for v in &w.samples {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// The binary form carries no start time; `t0` is 0.
pub fn read_waveform_bin<R: Read>(mut input: R) -> Result<Waveform> {
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    if &word != WAVEFORM_MAGIC {
        return Err(Error::Parse("not a waveform file (bad magic)".into()));
    }
    input.read_exact(&mut word)?;
    let sample_rate = f64::from_le_bytes(word);
    input.read_exact(&mut word)?;
    let count = u64::from_le_bytes(word) as usize;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::LengthMismatch {
            expected: count,
            actual: bytes.len() / 8,
        });
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Waveform::new(sample_rate, 0.0, samples)
}

/// One row per frame: the frame's centre time followed by one magnitude per
/// bin. The header names each bin by its frequency in Hz.
pub fn write_spectrogram_csv<W: Write>(out: W, s: &Spectrogram) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let mut header = vec!["time_s".to_string()];
    header.extend(s.bin_freqs.iter().map(|f| f.to_string()));
    wr.write_record(&header)?;
    for (f, t) in s.frame_times.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(s.frame(f).iter().map(|m| m.to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToaRow {
    /// 1-based sensor index.
    pub sensor_id: usize,
    pub toa: f64,
    pub method: String,
}

pub fn write_toa_table<W: Write>(out: W, toas: &[f64], method: ToaMethod) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["sensor_id", "toa_s", "method"])?;
    for (k, t) in toas.iter().enumerate() {
        wr.write_record([(k + 1).to_string(), t.to_string(), method.as_str().to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a TOA table and returns the times ordered by sensor id. Ids must be
/// exactly `1..=n`, in any order.
pub fn read_toa_table<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(input);
    let h = r.headers()?.clone();
    let col = |name: &str| {
        h.iter()
            .position(|c| c.trim() == name)
            .ok_or_else(|| Error::Parse(format!("TOA table has no `{name}` column")))
    };
    let (id_col, toa_col) = (col("sensor_id")?, col("toa_s")?);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |c: usize| rec.get(c).ok_or_else(|| Error::Parse("short TOA row".into()));
        rows.push((
            parse_usize(field(id_col)?, "sensor_id")?,
            parse_f64(field(toa_col)?, "toa_s")?,
        ));
    }
    rows.sort_by_key(|r| r.0);
    for (k, (id, _)) in rows.iter().enumerate() {
        if *id != k + 1 {
            return Err(Error::Parse(format!(
                "sensor ids must be 1..={}, found {id}",
                rows.len()
            )));
        }
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

pub fn write_regions_csv<W: Write>(out: W, regions: &[Region]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["id", "codeword", "centroid_x", "centroid_y", "cell_count"])?;
    for r in regions {
        wr.write_record([
            r.id.to_string(),
            r.codeword.to_string(),
            r.centroid.x.to_string(),
            r.centroid.y.to_string(),
            r.cell_count.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_regions_csv<R: Read>(input: R) -> Result<Vec<Region>> {
    let mut r = csv::Reader::from_reader(input);
    expect_header(
        &mut r,
        &["id", "codeword", "centroid_x", "centroid_y", "cell_count"],
    )?;
    let mut regions = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(Error::Parse(format!("expected 5 fields, got {}", rec.len())));
        }
        regions.push(Region {
            id: parse_usize(&rec[0], "id")?,
            codeword: rec[1].trim().parse::<CharacteristicVector>()?,
            centroid: Point::new(
                parse_f64(&rec[2], "centroid_x")?,
                parse_f64(&rec[3], "centroid_y")?,
            ),
            cell_count: parse_usize(&rec[4], "cell_count")?,
        });
    }
    Ok(regions)
}

/// Everything needed besides `regions.csv` to rebuild a [`RegionMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBundleMeta {
    pub version: u32,
    pub room: RoomGeometry,
    pub sensors: SensorArray,
    pub grid: (usize, usize),
}

pub fn write_region_bundle(dir: &Path, map: &RegionMap) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = RegionBundleMeta {
        version: REGION_BUNDLE_VERSION,
        room: *map.room(),
        sensors: map.sensors().clone(),
        grid: map.grid_resolution(),
    };
    let text = toml::to_string(&meta).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join(REGIONS_META_FILE), text)?;
    write_regions_csv(fs::File::create(dir.join(REGIONS_FILE))?, map.regions())
}

pub fn read_region_bundle(dir: &Path) -> Result<RegionMap> {
    let text = fs::read_to_string(dir.join(REGIONS_META_FILE))?;
    let meta: RegionBundleMeta = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    if meta.version != REGION_BUNDLE_VERSION {
        return Err(Error::Parse(format!(
            "unsupported region bundle version {} (expected {REGION_BUNDLE_VERSION})",
            meta.version
        )));
    }
    let regions = read_regions_csv(fs::File::open(dir.join(REGIONS_FILE))?)?;
    RegionMap::from_parts(regions, meta.grid, meta.room, meta.sensors)
}

pub fn write_localization_csv<W: Write>(out: W, results: &[LocalizationResult]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["algorithm", "est_x", "est_y", "cost", "tied_region_ids"])?;
    for r in results {
        let ties = r
            .tied_regions
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(";");
        wr.write_record([
            r.algorithm.as_str().to_string(),
            r.estimate.x.to_string(),
            r.estimate.y.to_string(),
            r.cost.to_string(),
            ties,
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// RMSE table preceded by a `# rng:` comment naming the generator.
pub fn write_mc_report_csv<W: Write>(mut out: W, report: &MonteCarloReport) -> Result<()> {
    writeln!(out, "# rng: {}", report.rng)?;
    writeln!(out, "# profile: {}", report.profile)?;
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["algorithm", "sigma_t_s", "rmse_m", "runs", "seed"])?;
    for e in &report.entries {
        wr.write_record([
            e.algorithm.as_str().to_string(),
            e.sigma_t.to_string(),
            e.rmse.to_string(),
            report.runs.to_string(),
            report.seed.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_mc_runs_csv<W: Write>(out: W, report: &MonteCarloReport) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["algorithm", "sigma_t_s", "run", "est_x", "est_y"])?;
    for r in &report.per_run {
        wr.write_record([
            r.algorithm.as_str().to_string(),
            r.sigma_t.to_string(),
            r.run.to_string(),
            r.estimate.x.to_string(),
            r.estimate.y.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

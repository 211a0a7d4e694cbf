//! Debris catalogs: CSV ingestion, two-line element sets and a synthetic
//! Iridium-like debris cloud.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbits::{OrbitError, OrbitalElements, MU_EARTH, R_EARTH};
use crate::rng::{stream_rng, Stream};

pub const CSV_HEADER: [&str; 5] = ["id", "a_km", "i_deg", "omega_deg", "nu_deg"];

/// TLE records with eccentricity at or above this bound are not treated as
/// circular and are rejected.
pub const NEAR_CIRCULAR_MAX_ECCENTRICITY: f64 = 0.05;

/// Risk level every debris starts with.
pub const BASE_RISK: u8 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: expected header `{}`, found `{found}`", CSV_HEADER.join(","))]
    BadHeader { line: u64, found: String },
    #[error("line {line}: missing column `{column}`")]
    MissingColumn { line: u64, column: &'static str },
    #[error("line {line}: cannot parse `{value}` in column `{column}` as a number")]
    BadNumber {
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: duplicate debris id `{id}`")]
    DuplicateId { line: u64, id: String },
    #[error("line {line}: semi-major axis {a_km} km is not above the Earth radius")]
    BelowSurface { line: u64, a_km: f64 },
    #[error("line {line}: invalid elements: {source}")]
    InvalidElements { line: u64, source: OrbitError },
    #[error("duplicate debris id `{0}`")]
    DuplicateCatalogId(String),
    #[error("empty catalog")]
    Empty,
    #[error(transparent)]
    Tle(#[from] TleError),
    #[error("degenerate generator ranges: {0}")]
    DegenerateRanges(String),
    #[error("cloud size must be at least 1")]
    EmptyCloud,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TleError {
    #[error("line {line}: expected 69 characters, found {len}")]
    Length { line: u8, len: usize },
    #[error("line {line}: expected line number {line} in column 1")]
    LineNumber { line: u8 },
    #[error("line {line}: checksum mismatch (computed {computed}, stored {stored})")]
    Checksum {
        line: u8,
        computed: u8,
        stored: char,
    },
    #[error("line {line}: cannot parse field `{field}`")]
    Field { line: u8, field: &'static str },
    #[error("catalog numbers differ between line 1 and line 2")]
    CatalogMismatch,
    #[error(
        "eccentricity {0} violates the near-circular bound ({NEAR_CIRCULAR_MAX_ECCENTRICITY})"
    )]
    NotNearCircular(f64),
    #[error("mean motion must be positive, got {0} rev/day")]
    MeanMotion(f64),
    #[error("record without line 2")]
    Truncated,
    #[error("derived elements invalid: {0}")]
    Elements(#[from] OrbitError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Debris {
    pub id: String,
    pub elements: OrbitalElements,
    pub initial_risk: u8,
}

/// Ordered debris list; position in the list is the action index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebrisCatalog {
    debris: Vec<Debris>,
}

impl DebrisCatalog {
    pub fn new(debris: Vec<Debris>) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for d in &debris {
            if !seen.insert(d.id.as_str()) {
                return Err(DataError::DuplicateCatalogId(d.id.clone()));
            }
        }
        Ok(Self { debris })
    }

    /// Builds a catalog with ids `0..n` from bare element sets.
    pub fn from_elements(elements: impl IntoIterator<Item = OrbitalElements>) -> Self {
        let debris = elements
            .into_iter()
            .enumerate()
            .map(|(k, elements)| Debris {
                id: k.to_string(),
                elements,
                initial_risk: BASE_RISK,
            })
            .collect();
        Self { debris }
    }

    pub fn len(&self) -> usize {
        self.debris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.debris.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Debris> {
        self.debris.get(index)
    }

    pub fn elements(&self, index: usize) -> &OrbitalElements {
        &self.debris[index].elements
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Debris> {
        self.debris.iter()
    }

    /// First `n` debris, in order.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            debris: self.debris.iter().take(n).cloned().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a DebrisCatalog {
    type Item = &'a Debris;
    type IntoIter = std::slice::Iter<'a, Debris>;

    fn into_iter(self) -> Self::IntoIter {
        self.debris.iter()
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<DebrisCatalog, DataError> {
    read_csv(File::open(path)?)
}

pub fn read_csv<R: Read>(reader: R) -> Result<DebrisCatalog, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r?,
        None => return Err(DataError::Empty),
    };
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(DataError::BadHeader {
            line: 1,
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut seen = HashSet::new();
    let mut debris = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let field = |k: usize| {
            record
                .get(k)
                .filter(|s| !s.is_empty())
                .ok_or(DataError::MissingColumn {
                    line,
                    column: CSV_HEADER[k],
                })
        };
        let number = |k: usize| -> Result<f64, DataError> {
            let raw = field(k)?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::BadNumber {
                    line,
                    column: CSV_HEADER[k],
                    value: raw.to_string(),
                })
        };
        let id = field(0)?.to_string();
        let a = number(1)?;
        let (i, omega, nu) = (number(2)?, number(3)?, number(4)?);
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateId { line, id });
        }
        if !(a > R_EARTH) {
            return Err(DataError::BelowSurface { line, a_km: a });
        }
        let elements = OrbitalElements::from_degrees(a, i, omega, nu)
            .map_err(|source| DataError::InvalidElements { line, source })?;
        debris.push(Debris {
            id,
            elements,
            initial_risk: BASE_RISK,
        });
    }
    Ok(DebrisCatalog { debris })
}

pub fn save_csv(catalog: &DebrisCatalog, path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_csv(catalog, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(catalog: &DebrisCatalog, writer: W) -> Result<(), DataError> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for d in catalog {
        let e = &d.elements;
        wtr.write_record([
            d.id.clone(),
            e.a().to_string(),
            e.i().to_degrees().to_string(),
            e.omega().to_degrees().to_string(),
            e.nu().to_degrees().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One two-line element set with the fields the planner uses.
#[derive(Debug, Clone, PartialEq)]
pub struct TleRecord {
    pub name: Option<String>,
    pub line1: String,
    pub line2: String,
    pub catalog_number: String,
    pub inclination_deg: f64,
    /// Parsed for completeness; the transfer model has no nodal term.
    pub raan_deg: f64,
    pub eccentricity: f64,
    pub arg_perigee_deg: f64,
    pub mean_anomaly_deg: f64,
    /// rev/day
    pub mean_motion: f64,
}

/// Mod-10 checksum over the first 68 columns: digits count their value,
/// minus signs count one.
pub fn tle_checksum(line: &str) -> u8 {
    let sum: u32 = line
        .bytes()
        .take(68)
        .map(|b| match b {
            b'0'..=b'9' => u32::from(b - b'0'),
            b'-' => 1,
            _ => 0,
        })
        .sum();
    (sum % 10) as u8
}

fn check_line(line: &str, number: u8) -> Result<(), TleError> {
    if !line.is_ascii() || line.len() != 69 {
        return Err(TleError::Length {
            line: number,
            len: line.chars().count(),
        });
    }
    if line.as_bytes()[0] != b'0' + number {
        return Err(TleError::LineNumber { line: number });
    }
    let stored = line.as_bytes()[68] as char;
    let computed = tle_checksum(line);
    if stored.to_digit(10) != Some(u32::from(computed)) {
        return Err(TleError::Checksum {
            line: number,
            computed,
            stored,
        });
    }
    Ok(())
}

fn column(line: &str, start: usize, end: usize, field: &'static str) -> Result<f64, TleError> {
    line[start - 1..end]
        .trim()
        .parse()
        .map_err(|_| TleError::Field { line: 2, field })
}

impl TleRecord {
    pub fn parse(name: Option<&str>, line1: &str, line2: &str) -> Result<Self, TleError> {
        let line1 = line1.trim_end();
        let line2 = line2.trim_end();
        check_line(line1, 1)?;
        check_line(line2, 2)?;
        let catalog_number = line1[2..7].trim().to_string();
        if line2[2..7].trim() != catalog_number {
            return Err(TleError::CatalogMismatch);
        }
        let eccentricity =
            format!("0.{}", line2[26..33].trim())
                .parse()
                .map_err(|_| TleError::Field {
                    line: 2,
                    field: "eccentricity",
                })?;
        Ok(Self {
            name: name.map(|n| n.trim().trim_start_matches("0 ").to_string()),
            line1: line1.to_string(),
            line2: line2.to_string(),
            catalog_number,
            inclination_deg: column(line2, 9, 16, "inclination")?,
            raan_deg: column(line2, 18, 25, "raan")?,
            eccentricity,
            arg_perigee_deg: column(line2, 35, 42, "argument of perigee")?,
            mean_anomaly_deg: column(line2, 44, 51, "mean anomaly")?,
            mean_motion: column(line2, 53, 63, "mean motion")?,
        })
    }
}

/// Semi-major axis (km) of an orbit with the given mean motion (rev/day).
pub fn semi_major_axis_from_mean_motion(mean_motion: f64, mu: f64) -> f64 {
    let period = 86_400.0 / mean_motion;
    (mu * (period / TAU).powi(2)).cbrt()
}

/// Mean motion (rev/day) of a circular orbit of radius `a` km.
pub fn mean_motion_from_semi_major_axis(a: f64, mu: f64) -> f64 {
    86_400.0 / (TAU * (a.powi(3) / mu).sqrt())
}

/// Circular-orbit elements of a TLE. The mean anomaly stands in for the true
/// anomaly.
pub fn parse_tle(record: &TleRecord) -> Result<OrbitalElements, TleError> {
    if record.eccentricity >= NEAR_CIRCULAR_MAX_ECCENTRICITY {
        return Err(TleError::NotNearCircular(record.eccentricity));
    }
    if !(record.mean_motion > 0.0) {
        return Err(TleError::MeanMotion(record.mean_motion));
    }
    let a = semi_major_axis_from_mean_motion(record.mean_motion, MU_EARTH);
    Ok(OrbitalElements::from_degrees(
        a,
        record.inclination_deg,
        record.arg_perigee_deg,
        record.mean_anomaly_deg,
    )?)
}

/// Reads a TLE file in either two-line or three-line (named) layout.
/// Records that fail the near-circular bound are skipped with a warning.
pub fn read_tle(text: &str) -> Result<DebrisCatalog, DataError> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut debris = Vec::new();
    let mut seen = HashSet::new();
    let mut k = 0;
    while k < lines.len() {
        let name = if lines[k].starts_with("1 ") {
            None
        } else {
            k += 1;
            Some(lines[k - 1])
        };
        let (Some(l1), Some(l2)) = (lines.get(k), lines.get(k + 1)) else {
            return Err(TleError::Truncated.into());
        };
        k += 2;
        let record = TleRecord::parse(name, l1, l2)?;
        let elements = match parse_tle(&record) {
            Ok(e) => e,
            Err(err @ TleError::NotNearCircular(_)) => {
                warn!("skipping {}: {err}", record.catalog_number);
                continue;
            }
            Err(err) => return Err(err.into()),
        };
        if !seen.insert(record.catalog_number.clone()) {
            return Err(DataError::DuplicateCatalogId(record.catalog_number));
        }
        debris.push(Debris {
            id: record.catalog_number,
            elements,
            initial_risk: BASE_RISK,
        });
    }
    Ok(DebrisCatalog { debris })
}

pub fn load_tle(path: impl AsRef<Path>) -> Result<DebrisCatalog, DataError> {
    read_tle(&std::fs::read_to_string(path)?)
}

/// Sampling ranges for the synthetic debris cloud. Defaults approximate the
/// Iridium 33 fragment cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CloudRanges {
    pub a_min_km: f64,
    pub a_max_km: f64,
    pub i_mean_deg: f64,
    pub i_sigma_deg: f64,
}

impl Default for CloudRanges {
    fn default() -> Self {
        Self {
            a_min_km: 7050.0,
            a_max_km: 7250.0,
            i_mean_deg: 86.4,
            i_sigma_deg: 0.5,
        }
    }
}

impl CloudRanges {
    fn validate(&self) -> Result<(), DataError> {
        let finite = [
            self.a_min_km,
            self.a_max_km,
            self.i_mean_deg,
            self.i_sigma_deg,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(DataError::DegenerateRanges("non-finite bound".into()));
        }
        if !(self.a_min_km > R_EARTH) {
            return Err(DataError::DegenerateRanges(format!(
                "a_min_km {} is not above the Earth radius",
                self.a_min_km
            )));
        }
        if !(self.a_max_km > self.a_min_km) {
            return Err(DataError::DegenerateRanges(format!(
                "empty semi-major axis range [{}, {}]",
                self.a_min_km, self.a_max_km
            )));
        }
        if self.i_sigma_deg < 0.0 {
            return Err(DataError::DegenerateRanges(format!(
                "negative inclination spread {}",
                self.i_sigma_deg
            )));
        }
        Ok(())
    }
}

/// Draws `n` debris: `a` uniform, `i` normal, `ω` and `ν` uniform on the
/// circle. Per debris the draws happen in the order `a, i, ω, ν`.
pub fn generate_cloud(
    n: usize,
    seed: u64,
    ranges: &CloudRanges,
) -> Result<DebrisCatalog, DataError> {
    if n == 0 {
        return Err(DataError::EmptyCloud);
    }
    ranges.validate()?;
    let mut rng = stream_rng(seed, Stream::Catalog);
    let inclination = Normal::new(ranges.i_mean_deg, ranges.i_sigma_deg)
        .map_err(|e| DataError::DegenerateRanges(e.to_string()))?;
    let width = (n - 1).to_string().len().max(3);
    let debris = (0..n)
        .map(|k| {
            let a = rng.random_range(ranges.a_min_km..ranges.a_max_km);
            let i = inclination.sample(&mut rng);
            let omega = rng.random_range(0.0..TAU);
            let nu = rng.random_range(0.0..TAU);
            let elements = OrbitalElements::new(a, i.to_radians(), omega, nu)
                .expect("validated ranges yield valid elements");
            Debris {
                id: format!("DEB-{k:0width$}"),
                elements,
                initial_risk: BASE_RISK,
            }
        })
        .collect();
    Ok(DebrisCatalog { debris })
}

//! CSV and JSON serialisation of sweep results.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QpaError, Result};
use crate::metrics::Region;
use crate::sweep::SweepResult;

pub const CSV_HEADER: [&str; 15] = [
    "p", "q", "e_z_pol", "e_x_pol", "e_z_et", "e_x_et", "k_pol", "k_et", "k_noisy", "yield",
    "e_z_post", "e_x_post", "k_qpa", "gain", "region",
];

pub const RESULT_SCHEMA_VERSION: u32 = 1;

/// Formats with 12 significant digits and no trailing noise.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("valid float text");
    let exp = rounded.abs().log10().floor();
    if (-5.0..15.0).contains(&exp) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for pt in &result.points {
        let r = &pt.report;
        let opt = |x: Option<f64>| x.map(format_sig12).unwrap_or_default();
        w.write_record([
            format_sig12(pt.p),
            format_sig12(pt.q),
            format_sig12(r.pol.e_z),
            format_sig12(r.pol.e_x),
            format_sig12(r.et.e_z),
            format_sig12(r.et.e_x),
            format_sig12(r.k_pol),
            format_sig12(r.k_et),
            format_sig12(r.k_noisy),
            format_sig12(r.qpa_yield),
            opt(r.post_pol.map(|e| e.e_z)),
            opt(r.post_pol.map(|e| e.e_x)),
            format_sig12(r.k_qpa),
            format_sig12(r.gain),
            r.region.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    write_csv(result, BufWriter::new(File::create(path)?))
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CsvRow {
    pub p: f64,
    pub q: f64,
    pub e_z_pol: f64,
    pub e_x_pol: f64,
    pub e_z_et: f64,
    pub e_x_et: f64,
    pub k_pol: f64,
    pub k_et: f64,
    pub k_noisy: f64,
    #[serde(rename = "yield")]
    pub qpa_yield: f64,
    pub e_z_post: Option<f64>,
    pub e_x_post: Option<f64>,
    pub k_qpa: f64,
    pub gain: f64,
    #[serde(deserialize_with = "region_from_str")]
    pub region: Region,
}

fn region_from_str<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Region, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(QpaError::Config(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    rdr.deserialize()
        .map(|r| r.map_err(QpaError::from))
        .collect()
}

#[derive(Serialize)]
struct JsonDocumentRef<'a> {
    schema_version: u32,
    #[serde(flatten)]
    result: &'a SweepResult,
}

#[derive(Deserialize)]
struct JsonDocument {
    schema_version: u32,
    #[serde(flatten)]
    result: SweepResult,
}

pub fn to_json_string(result: &SweepResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(&JsonDocumentRef {
        schema_version: RESULT_SCHEMA_VERSION,
        result,
    })?)
}

pub fn emit_json(result: &SweepResult, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(to_json_string(result)?.as_bytes())?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_json(text: &str) -> Result<SweepResult> {
    let doc: JsonDocument = serde_json::from_str(text)?;
    if doc.schema_version != RESULT_SCHEMA_VERSION {
        return Err(QpaError::Config(format!(
            "unsupported result schema_version {}",
            doc.schema_version
        )));
    }
    Ok(doc.result)
}

//! CSV formats.
//!
//! * `households.csv`: `id,lat,lng,income_monthly,water_kl,<attribute...>`,
//!   empty string = missing. An attribute column is numeric when every
//!   non-empty cell parses as a number, categorical otherwise.
//! * `features_<source>.csv`: `id` then numeric columns, `.` decimal, empty =
//!   missing.
//!
//! Lines starting with `#` are comments (used for provenance headers).

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::dataset::{AttributeValue, FeatureMatrix, HouseholdRecord};
use crate::error::{Error, Result};
use crate::geoimagery::GeoPoint;
use crate::matrix::DenseMatrix;

const FIXED_COLUMNS: [&str; 5] = ["id", "lat", "lng", "income_monthly", "water_kl"];

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

/// Formats a cell; NaN is written as the empty string.
pub fn fmt_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn parse_opt(cell: &str, what: &str, src: &str, line: u64) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Data(format!("{src}:{line}: {what} {cell:?} is not a number")))
}

pub fn read_households(path: &Path) -> Result<Vec<HouseholdRecord>> {
    read_households_from(open(path)?, &path.display().to_string())
}

pub fn read_households_from<R: Read>(input: R, src: &str) -> Result<Vec<HouseholdRecord>> {
    let mut rdr = reader(input);
    let header = rdr.headers()?.clone();
    for (i, want) in FIXED_COLUMNS.iter().enumerate() {
        if header.get(i) != Some(*want) {
            return Err(Error::Data(format!(
                "{src}: header column {} must be {want:?}, found {:?}",
                i + 1,
                header.get(i).unwrap_or("")
            )));
        }
    }
    let attr_names: Vec<String> = header.iter().skip(FIXED_COLUMNS.len()).map(String::from).collect();

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(rec);
    }
    // numeric iff every non-empty cell parses
    let numeric: Vec<bool> = (0..attr_names.len())
        .map(|j| {
            rows.iter().all(|r| {
                let c = r.get(FIXED_COLUMNS.len() + j).unwrap_or("");
                c.is_empty() || c.parse::<f64>().is_ok()
            })
        })
        .collect();

    let mut out = Vec::with_capacity(rows.len());
    for r in &rows {
        let line = line_of(r);
        let id = r.get(0).unwrap_or("").to_string();
        let lat = parse_opt(r.get(1).unwrap_or(""), "lat", src, line)?;
        let lng = parse_opt(r.get(2).unwrap_or(""), "lng", src, line)?;
        let (Some(lat), Some(lng)) = (lat, lng) else {
            return Err(Error::Data(format!("{src}:{line}: lat/lng are required")));
        };
        let location = GeoPoint::new(lat, lng).map_err(|e| Error::Data(format!("{src}:{line}: {e}")))?;
        let mut attributes = BTreeMap::new();
        for (j, name) in attr_names.iter().enumerate() {
            let cell = r.get(FIXED_COLUMNS.len() + j).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            let v = if numeric[j] {
                AttributeValue::Numeric(cell.parse().expect("checked numeric"))
            } else {
                AttributeValue::Categorical(cell.to_string())
            };
            attributes.insert(name.clone(), v);
        }
        let record = HouseholdRecord {
            id,
            location,
            attributes,
            income_monthly: parse_opt(r.get(3).unwrap_or(""), "income_monthly", src, line)?,
            water_consumption: parse_opt(r.get(4).unwrap_or(""), "water_kl", src, line)?,
        };
        record
            .validate()
            .map_err(|e| Error::Data(format!("{src}:{line}: {e}")))?;
        out.push(record);
    }
    super::check_unique_ids(&out).map_err(|e| Error::Data(format!("{src}: {e}")))?;
    Ok(out)
}

pub fn write_households(path: &Path, records: &[HouseholdRecord], comment: Option<&str>) -> Result<()> {
    let mut f = create(path)?;
    write_households_to(&mut f, records, comment)?;
    f.flush().map_err(|e| Error::io(path, e))
}

pub fn write_households_to<W: Write>(out: &mut W, records: &[HouseholdRecord], comment: Option<&str>) -> Result<()> {
    write_comment(out, comment)?;
    let attrs: BTreeSet<&String> = records.iter().flat_map(|r| r.attributes.keys()).collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
    header.extend(attrs.iter().map(|s| s.as_str()));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.id.clone(),
            format!("{}", r.location.lat),
            format!("{}", r.location.lng),
            r.income_monthly.map_or(String::new(), |v| format!("{v}")),
            r.water_consumption.map_or(String::new(), |v| format!("{v}")),
        ];
        for a in &attrs {
            row.push(r.attributes.get(*a).map_or(String::new(), |v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn write_comment<W: Write>(out: &mut W, comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}").map_err(|e| Error::io("<csv>", e))?;
        }
    }
    Ok(())
}

/// Reads a feature table. Column names lacking `prefix` get it prepended, so
/// tables written with bare names (`e0,e1,...`) still join cleanly.
pub fn read_features(path: &Path, prefix: Option<&str>) -> Result<FeatureMatrix> {
    read_features_from(open(path)?, &path.display().to_string(), prefix)
}

pub fn read_features_from<R: Read>(input: R, src: &str, prefix: Option<&str>) -> Result<FeatureMatrix> {
    let mut rdr = reader(input);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("id") {
        return Err(Error::Data(format!("{src}: first column must be \"id\"")));
    }
    let columns: Vec<String> = header
        .iter()
        .skip(1)
        .map(|c| match prefix {
            Some(p) if !c.starts_with(p) => format!("{p}{c}"),
            _ => c.to_string(),
        })
        .collect();
    let width = columns.len();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != width + 1 {
            return Err(Error::Data(format!(
                "{src}:{line}: expected {} fields, found {}",
                width + 1,
                rec.len()
            )));
        }
        ids.push(rec[0].to_string());
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let v = parse_opt(cell, &columns[j], src, line)?.unwrap_or(f64::NAN);
            data.push(v);
        }
    }
    let m = FeatureMatrix::new(ids, columns, DenseMatrix::new(data.len() / width.max(1), width, data)?)
        .map_err(|e| Error::Data(format!("{src}: {e}")))?;
    if let Some(id) = m.duplicate_id() {
        return Err(Error::Data(format!("{src}: duplicate id {id:?}")));
    }
    Ok(m)
}

pub fn write_features(path: &Path, m: &FeatureMatrix, comment: Option<&str>) -> Result<()> {
    let mut f = create(path)?;
    write_features_to(&mut f, m, comment)?;
    f.flush().map_err(|e| Error::io(path, e))
}

pub fn write_features_to<W: Write>(out: &mut W, m: &FeatureMatrix, comment: Option<&str>) -> Result<()> {
    write_comment(out, comment)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(m.column_names().iter().cloned());
    w.write_record(&header)?;
    for (i, id) in m.row_ids().iter().enumerate() {
        let mut row = Vec::with_capacity(m.n_cols() + 1);
        row.push(id.clone());
        row.extend(m.values().row(i).iter().map(|&v| fmt_cell(v)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

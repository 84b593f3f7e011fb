//! CSV readers and writers. Every number is written with 9 significant
//! digits in `%g` style so that files compare byte for byte.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::analysis::{BatchStats, TravelRecord};
use crate::continuum::ContinuumOutput;
use crate::demand::{Trip, TripTable};
use crate::engine::SimOutput;
use crate::error::{invalid, Result};
use crate::nfd::Nfd;

const SIGNIFICANT_DIGITS: i32 = 9;

/// `%.9g` formatting: fixed notation for exponents in `[-4, 9)`, scientific
/// otherwise, trailing zeros removed.
pub fn format_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{:.*e}", (SIGNIFICANT_DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..SIGNIFICANT_DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_g).unwrap_or_default()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

/// `t_s,E,G,delta,rho_veh_km,v_km_h,z_km,m_km`
pub fn write_timeseries<W: Write>(out: &SimOutput, w: W) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["t_s", "E", "G", "delta", "rho_veh_km", "v_km_h", "z_km", "m_km"])?;
    for s in &out.steps {
        w.write_record([
            format_g(s.time_s),
            s.started.to_string(),
            s.finished.to_string(),
            s.active.to_string(),
            format_g(s.density),
            format_g(s.speed_kmh),
            format_g(s.z_km),
            format_g(s.remaining_km),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `id,depart_time_s,distance_km,theta_km,completion_time_s`
pub fn write_trip_outcomes<W: Write>(records: &[TravelRecord], w: W) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["id", "depart_time_s", "distance_km", "theta_km", "completion_time_s"])?;
    for r in records {
        w.write_record([
            r.trip_id.to_string(),
            format_g(r.depart_time_s),
            format_g(r.distance_km),
            format_g(r.theta_km),
            opt(r.completion_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `id,depart_time_s,distance_km,theta_km,completion_time_s,travel_time_s`
pub fn write_travel_times<W: Write>(records: &[TravelRecord], w: W) -> Result<()> {
    let mut w = writer(w);
    w.write_record([
        "id",
        "depart_time_s",
        "distance_km",
        "theta_km",
        "completion_time_s",
        "travel_time_s",
    ])?;
    for r in records {
        w.write_record([
            r.trip_id.to_string(),
            format_g(r.depart_time_s),
            format_g(r.distance_km),
            format_g(r.theta_km),
            opt(r.completion_time_s),
            opt(r.travel_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `id,depart_time_s,distance_km`
pub fn write_trip_table<W: Write>(table: &TripTable, w: W) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["id", "depart_time_s", "distance_km"])?;
    for t in table {
        w.write_record([t.id.to_string(), format_g(t.depart_time_s), format_g(t.distance_km)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the named numeric columns of a CSV file, one row per record.
fn read_columns<R: Read, const N: usize>(r: R, what: &str, names: [&str; N]) -> Result<Vec<[f64; N]>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = reader.headers()?.clone();
    let mut cols = [0; N];
    for (c, name) in cols.iter_mut().zip(names) {
        *c = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| invalid(what, format!("missing column {name}")))?;
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = [0.0; N];
        for ((v, &c), name) in row.iter_mut().zip(&cols).zip(names) {
            *v = record
                .get(c)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| invalid(what, format!("row {}: bad {name}", line + 1)))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads `id,depart_time_s,distance_km` (the id column is optional and
/// ignored); the result is sorted and re-indexed.
pub fn read_trip_table<R: Read>(r: R) -> Result<TripTable> {
    let rows = read_columns(r, "trip table", ["depart_time_s", "distance_km"])?;
    TripTable::from_trips(rows.into_iter().map(|[t, x]| Trip::new(t, x)).collect())
}

pub fn read_trip_table_file(path: &Path) -> Result<TripTable> {
    read_trip_table(File::open(path)?)
}

/// Reads a tabulated NFD from `rho_veh_km,v_km_h`.
pub fn read_nfd_table<R: Read>(r: R) -> Result<Nfd> {
    let rows = read_columns(r, "tabulated NFD", ["rho_veh_km", "v_km_h"])?;
    Nfd::tabulated(rows.into_iter().map(|[rho, v]| (rho, v)).collect())
}

pub fn read_nfd_table_file(path: &Path) -> Result<Nfd> {
    read_nfd_table(File::open(path)?)
}

/// `t_s,delta,rho_veh_km,v_km_h,z_km,m_km`; `m_km` is empty unless tracked.
pub fn write_continuum<W: Write>(out: &ContinuumOutput, w: W) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["t_s", "delta", "rho_veh_km", "v_km_h", "z_km", "m_km"])?;
    for s in &out.steps {
        w.write_record([
            format_g(s.time_s),
            format_g(s.delta),
            format_g(s.density),
            format_g(s.speed_kmh),
            format_g(s.z_km),
            opt(s.remaining_km),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `t_s,mean_delta,std_delta,mean_v,std_v`
pub fn write_batch<W: Write>(stats: &BatchStats, w: W) -> Result<()> {
    let mut w = writer(w);
    w.write_record(["t_s", "mean_delta", "std_delta", "mean_v", "std_v"])?;
    for k in 0..stats.time_s.len() {
        w.write_record([
            format_g(stats.time_s[k]),
            format_g(stats.mean_delta[k]),
            format_g(stats.std_delta[k]),
            format_g(stats.mean_speed[k]),
            format_g(stats.std_speed[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

//! Price-tick CSV ingestion and regular-grid resampling.
//!
//! Input rows are `timestamp,asset,price` with ISO-8601 UTC timestamps. Each UTC day is
//! cut into fixed intervals; the last tick of each interval is its closing price, empty
//! intervals carry the previous close forward, and the day's first tick serves as the
//! opening price. Returns never span a day boundary.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::Deserialize;

use super::ReturnPanel;
use crate::error::{Error, Result};

/// Days with fewer raw ticks than this are dropped for every asset.
pub const MIN_TICKS_PER_DAY: usize = 12;

pub const DEFAULT_INTERVAL_SECS: u32 = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceTick {
    pub timestamp: DateTime<Utc>,
    pub asset: String,
    pub price: f64,
}

#[derive(Deserialize)]
struct RawTick {
    timestamp: String,
    asset: String,
    price: f64,
}

pub fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(naive.and_utc());
        }
    }
    Err(Error::invalid(format!("unparseable timestamp `{s}`")))
}

pub fn read_ticks<R: Read>(reader: R) -> Result<Vec<PriceTick>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (line, rec) in rdr.deserialize::<RawTick>().enumerate() {
        let raw = rec?;
        if !(raw.price.is_finite() && raw.price > 0.0) {
            return Err(Error::invalid(format!(
                "row {}: price {} for {} must be positive and finite",
                line + 2,
                raw.price,
                raw.asset
            )));
        }
        out.push(PriceTick {
            timestamp: parse_timestamp(&raw.timestamp)?,
            asset: raw.asset,
            price: raw.price,
        });
    }
    Ok(out)
}

pub fn read_ticks_file(path: &Path) -> Result<Vec<PriceTick>> {
    let f = std::fs::File::open(path).map_err(|e| Error::from(e).context(format!("opening {}", path.display())))?;
    read_ticks(std::io::BufReader::new(f))
}

pub fn write_ticks<W: Write>(writer: W, ticks: &[PriceTick]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "asset", "price"])?;
    for t in ticks {
        w.write_record([
            t.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            t.asset.clone(),
            t.price.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Resample one day's ticks (sorted by time) to interval closes and difference into log-returns.
fn day_returns(ticks: &[(i64, f64)], interval_secs: u32) -> Vec<f64> {
    let bins = (86_400 / interval_secs) as usize;
    let mut closes: Vec<Option<f64>> = vec![None; bins];
    for &(secs, price) in ticks {
        let b = (secs / interval_secs as i64) as usize;
        closes[b.min(bins - 1)] = Some(price);
    }
    let open = ticks[0].1;
    let mut prev = open;
    let mut out = Vec::with_capacity(bins);
    for c in closes {
        let p = c.unwrap_or(prev);
        out.push((p / prev).ln());
        prev = p;
    }
    out
}

type DayTicks = BTreeMap<NaiveDate, Vec<(i64, f64)>>;

/// Build a [`ReturnPanel`] from raw ticks.
///
/// Assets are sorted by symbol. A day is kept only if every asset has at least
/// [`MIN_TICKS_PER_DAY`] ticks on it.
pub fn returns_from_ticks(ticks: &[PriceTick], interval_secs: u32) -> Result<ReturnPanel> {
    if interval_secs == 0 || 86_400 % interval_secs != 0 {
        return Err(Error::invalid(format!("interval {interval_secs}s must divide one day")));
    }
    // asset -> day -> (seconds since midnight, price), file order preserved for equal stamps
    let mut grouped: BTreeMap<&str, DayTicks> = BTreeMap::new();
    for t in ticks {
        let day = t.timestamp.date_naive();
        let secs = (t.timestamp - day.and_hms_opt(0, 0, 0).expect("midnight").and_utc()).num_seconds();
        grouped
            .entry(t.asset.as_str())
            .or_default()
            .entry(day)
            .or_default()
            .push((secs, t.price));
    }
    if grouped.is_empty() {
        return Err(Error::invalid("no price ticks"));
    }
    let all_days: BTreeSet<NaiveDate> = grouped.values().flat_map(|m| m.keys().copied()).collect();
    let mut days = Vec::new();
    for d in all_days {
        let ok = grouped
            .values()
            .all(|m| m.get(&d).is_some_and(|v| v.len() >= MIN_TICKS_PER_DAY));
        if ok {
            days.push(d);
        } else {
            log::info!("dropping {d}: fewer than {MIN_TICKS_PER_DAY} ticks for at least one asset");
        }
    }
    if days.is_empty() {
        return Err(Error::invalid("no day has enough ticks for every asset"));
    }
    let assets: Vec<String> = grouped.keys().map(|s| s.to_string()).collect();
    let returns = grouped
        .values_mut()
        .map(|per_day| {
            days.iter()
                .map(|d| {
                    let v = per_day.get_mut(d).expect("day retained for every asset");
                    v.sort_by_key(|(s, _)| *s);
                    day_returns(v, interval_secs)
                })
                .collect()
        })
        .collect();
    ReturnPanel::new(assets, days, returns)
}

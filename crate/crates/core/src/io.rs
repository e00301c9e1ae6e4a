//! CSV, TSV and JSON artifacts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{ForecastRun, Scheme};
use crate::measures::{MeasureKind, MeasurePanel};
use crate::spillover::SpilloverSeries;
use crate::state::{MarketState, SpilloverFeatureSeries};

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::from(e).context(format!("cannot open {}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::from(e).context(format!("cannot create {}", path.display())))
}

pub fn write_records<T: Serialize, W: Write>(writer: W, records: &[T], delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<T: DeserializeOwned, R: Read>(reader: R, delimiter: u8) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().delimiter(delimiter).from_reader(reader);
    r.deserialize().map(|rec| rec.map_err(Error::from)).collect()
}

pub fn write_csv<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_records(create(path)?, records, b',')
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_records(BufReader::new(open(path)?), b',')
        .map_err(|e| e.context(format!("reading {}", path.display())))
}

pub fn write_tsv<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_records(create(path)?, records, b'\t')
}

pub fn read_tsv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_records(BufReader::new(open(path)?), b'\t')
        .map_err(|e| e.context(format!("reading {}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(BufReader::new(open(path)?)).map_err(|e| Error::from(e).context(format!("parsing {}", path.display())))
}

/// Wide layout: `date,<asset1>,...,<assetN>`.
pub fn write_measure_panel<W: Write>(writer: W, panel: &MeasurePanel) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(panel.assets.iter().cloned());
    w.write_record(&header)?;
    for (d, day) in panel.days.iter().enumerate() {
        let mut row = vec![day.to_string()];
        row.extend(panel.values.iter().map(|v| v[d].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_measure_panel<R: Read>(reader: R, kind: MeasureKind) -> Result<MeasurePanel> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.get(0) != Some("date") || header.len() < 2 {
        return Err(Error::invalid("measure CSV must start with a `date` column and list assets"));
    }
    let assets: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut days = Vec::new();
    let mut values = vec![Vec::new(); assets.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Shape(format!("row {} has {} fields", line + 2, rec.len())));
        }
        let day: NaiveDate = rec[0]
            .parse()
            .map_err(|e| Error::invalid(format!("row {}: bad date `{}`: {e}", line + 2, &rec[0])))?;
        days.push(day);
        for (a, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|e| Error::invalid(format!("row {}: bad value `{field}`: {e}", line + 2)))?;
            values[a].push(v);
        }
    }
    MeasurePanel::new(kind, assets, days, values)
}

pub fn write_measure_file(path: &Path, panel: &MeasurePanel) -> Result<()> {
    write_measure_panel(create(path)?, panel)
}

pub fn read_measure_file(path: &Path, kind: MeasureKind) -> Result<MeasurePanel> {
    read_measure_panel(BufReader::new(open(path)?), kind).map_err(|e| e.context(format!("reading {}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsiRecord {
    pub date: NaiveDate,
    pub tau: f64,
    pub tsi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub date: NaiveDate,
    pub tau: f64,
    pub asset: String,
    pub from_others: f64,
    pub to_others: f64,
    pub net: f64,
}

/// Net pairwise flow `NPDC_{source -> target}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub date: NaiveDate,
    pub tau: f64,
    pub source: String,
    pub target: String,
    pub share: f64,
    pub npdc: f64,
}

pub fn tsi_records(series: &SpilloverSeries) -> Vec<TsiRecord> {
    let mut out = Vec::new();
    for (q, tau) in series.quantiles.iter().enumerate() {
        for (t, s) in series.summaries[q].iter().enumerate() {
            out.push(TsiRecord {
                date: series.dates[t],
                tau: *tau,
                tsi: s.tsi,
            });
        }
    }
    out
}

pub fn index_records(series: &SpilloverSeries) -> Vec<IndexRecord> {
    let mut out = Vec::new();
    for (q, tau) in series.quantiles.iter().enumerate() {
        for (t, s) in series.summaries[q].iter().enumerate() {
            for (i, a) in series.assets.iter().enumerate() {
                out.push(IndexRecord {
                    date: series.dates[t],
                    tau: *tau,
                    asset: a.clone(),
                    from_others: s.from_others[i],
                    to_others: s.to_others[i],
                    net: s.net[i],
                });
            }
        }
    }
    out
}

pub fn pair_records(series: &SpilloverSeries) -> Vec<PairRecord> {
    let mut out = Vec::new();
    let n = series.assets.len();
    for (q, tau) in series.quantiles.iter().enumerate() {
        for (t, s) in series.summaries[q].iter().enumerate() {
            let m = &series.matrices[q][t];
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        out.push(PairRecord {
                            date: series.dates[t],
                            tau: *tau,
                            source: series.assets[j].clone(),
                            target: series.assets[i].clone(),
                            share: 100.0 * m.entries[i][j],
                            npdc: s.npdc[i][j],
                        });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub date: NaiveDate,
    pub state: MarketState,
    pub source: String,
    pub value: f64,
}

pub fn feature_records(series: &SpilloverFeatureSeries) -> Vec<FeatureRecord> {
    series
        .rows
        .iter()
        .map(|r| FeatureRecord {
            date: r.date,
            state: r.state,
            source: r.source.clone(),
            value: r.value,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub date: NaiveDate,
    pub prediction: Option<f64>,
    pub target: Option<f64>,
    pub residual_variance: Option<f64>,
    pub error: Option<String>,
}

pub fn forecast_records(run: &ForecastRun) -> Vec<ForecastRecord> {
    let mut out: Vec<ForecastRecord> = (0..run.len())
        .map(|t| ForecastRecord {
            date: run.dates[t],
            prediction: Some(run.predictions[t]),
            target: Some(run.targets[t]),
            residual_variance: Some(run.residual_variances[t]),
            error: None,
        })
        .collect();
    out.extend(run.failures.iter().map(|(d, e)| ForecastRecord {
        date: *d,
        prediction: None,
        target: None,
        residual_variance: None,
        error: Some(e.clone()),
    }));
    out.sort_by_key(|r| r.date);
    out
}

pub fn run_from_records(model: &str, horizon: usize, scheme: Scheme, records: &[ForecastRecord]) -> Result<ForecastRun> {
    let mut run = ForecastRun {
        model: model.to_string(),
        horizon,
        scheme,
        dates: Vec::new(),
        predictions: Vec::new(),
        targets: Vec::new(),
        residual_variances: Vec::new(),
        failures: Vec::new(),
    };
    for r in records {
        match (r.prediction, r.target, &r.error) {
            (Some(p), Some(y), None) => {
                run.dates.push(r.date);
                run.predictions.push(p);
                run.targets.push(y);
                run.residual_variances.push(r.residual_variance.unwrap_or(0.0));
            }
            (_, _, Some(e)) => run.failures.push((r.date, e.clone())),
            _ => return Err(Error::invalid(format!("forecast row {} lacks a prediction or target", r.date))),
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub model: String,
    pub horizon: usize,
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    pub qlike: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsRecord {
    pub model: String,
    pub loss: String,
    pub tmax_rank: usize,
    pub tr_rank: usize,
    pub tmax_pvalue: f64,
    pub tr_pvalue: f64,
    pub survived_tmax: bool,
    pub survived_tr: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsRatioRecord {
    pub model: String,
    pub superior: usize,
    pub tests: usize,
    pub ratio: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2Record {
    pub model: String,
    pub horizon: usize,
    pub benchmark: String,
    pub r2_oos: f64,
    pub mspe_adjust: f64,
    pub cw_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastPlotRecord {
    pub date: NaiveDate,
    pub model: String,
    pub prediction: f64,
    pub target: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MeasureKind;
    use chrono::Duration;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn measure_panel_round_trip_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let p = MeasurePanel::new(
            MeasureKind::Cj,
            vec!["BTC".into(), "ETH".into()],
            (0..20).map(|d| s + Duration::days(d)).collect(),
            (0..2).map(|_| (0..20).map(|_| rng.random_range(0.0..1e-3)).collect()).collect(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_measure_panel(&mut buf, &p).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("date,BTC,ETH\n2021-03-01,"));
        assert_eq!(read_measure_panel(buf.as_slice(), MeasureKind::Cj).unwrap(), p);
    }

    #[test]
    fn records_round_trip() {
        let d = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let recs = vec![
            ForecastRecord {
                date: d,
                prediction: Some(-7.123456789012345),
                target: Some(0.1 + 0.2),
                residual_variance: Some(1e-300),
                error: None,
            },
            ForecastRecord {
                date: d + Duration::days(1),
                prediction: None,
                target: None,
                residual_variance: None,
                error: Some("window failed, rank deficient".into()),
            },
        ];
        for delim in *b",\t" {
            let mut buf = Vec::new();
            write_records(&mut buf, &recs, delim).unwrap();
            let back: Vec<ForecastRecord> = read_records(buf.as_slice(), delim).unwrap();
            assert_eq!(back, recs);
        }
        let run = run_from_records("m", 1, Scheme::Expanding { initial: 5 }, &recs).unwrap();
        assert_eq!(run.len(), 1);
        assert_eq!(run.failures.len(), 1);
        assert_eq!(forecast_records(&run), recs);

        let feats = vec![FeatureRecord {
            date: d,
            state: MarketState::High,
            source: "XRP".into(),
            value: 3.5e-5,
        }];
        let mut buf = Vec::new();
        write_records(&mut buf, &feats, b',').unwrap();
        assert_eq!(read_records::<FeatureRecord, _>(buf.as_slice(), b',').unwrap(), feats);
    }

    #[test]
    fn malformed_measure_file_rejected() {
        assert!(read_measure_panel("day,A\n2020-01-01,1\n".as_bytes(), MeasureKind::Rv).is_err());
        assert!(read_measure_panel("date,A\n2020-01-01,x\n".as_bytes(), MeasureKind::Rv).is_err());
        assert!(read_measure_panel("date,A\n2020-01-01,-1\n".as_bytes(), MeasureKind::Rv).is_err());
    }
}

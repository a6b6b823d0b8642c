//! Observed case-count series: CSV ingestion, gap filling and windowing.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use serde::Serialize;
use thiserror::Error;

use crate::numerics::{first_differences, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaseDataError {
    #[error("empty body: no data rows after the header")]
    Empty,
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("cannot infer schema from header {0:?}: need a `date` column and a `daily` or `cumulative` column")]
    UnknownSchema(Vec<String>),
    #[error("row {row}: malformed date {value:?} (expected YYYY-MM-DD)")]
    MalformedDate { row: u64, value: String },
    #[error("row {row}: malformed count {value:?}")]
    MalformedCount { row: u64, value: String },
    #[error("row {row}: negative count {value}")]
    NegativeCount { row: u64, value: f64 },
    #[error("row {row}: duplicate date {date} (first seen on row {first_row})")]
    DuplicateDate {
        row: u64,
        date: NaiveDate,
        first_row: u64,
    },
    #[error(
        "row {row}: cumulative count {value} on {date} is below the previous value {previous}"
    )]
    DecreasingCumulative {
        row: u64,
        date: NaiveDate,
        value: f64,
        previous: f64,
    },
    #[error("row {row}: {message}")]
    Csv { row: u64, message: String },
    #[error("window start {start} is after end {end}")]
    StartAfterEnd { start: NaiveDate, end: NaiveDate },
    #[error("window {start}..={end} is outside the series span {first}..={last}")]
    OutOfRange {
        start: NaiveDate,
        end: NaiveDate,
        first: NaiveDate,
        last: NaiveDate,
    },
    #[error("series invariant violated: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountKind {
    Daily,
    Cumulative,
}

/// Which CSV columns hold the date and the count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub date_column: String,
    pub count_column: String,
    pub kind: CountKind,
}

impl CsvSchema {
    pub fn daily(date_column: &str, count_column: &str) -> Self {
        CsvSchema {
            date_column: date_column.to_owned(),
            count_column: count_column.to_owned(),
            kind: CountKind::Daily,
        }
    }

    pub fn cumulative(date_column: &str, count_column: &str) -> Self {
        CsvSchema {
            date_column: date_column.to_owned(),
            count_column: count_column.to_owned(),
            kind: CountKind::Cumulative,
        }
    }

    /// Picks `date` plus `cumulative` (preferred) or `daily` from the header.
    pub fn infer(content: &[u8]) -> Result<Self, CaseDataError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(content);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| CaseDataError::Csv {
                row: 1,
                message: e.to_string(),
            })?
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').to_owned())
            .collect();
        let has = |name: &str| header.iter().any(|h| h.eq_ignore_ascii_case(name));
        if !has("date") {
            return Err(CaseDataError::UnknownSchema(header));
        }
        if has("cumulative") {
            Ok(Self::cumulative("date", "cumulative"))
        } else if has("daily") {
            Ok(Self::daily("date", "daily"))
        } else {
            Err(CaseDataError::UnknownSchema(header))
        }
    }
}

/// Gap-free daily series of observed cases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseSeries {
    /// Date of index 1.
    pub epoch_date: NaiveDate,
    pub dates: Vec<NaiveDate>,
    pub daily: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl CaseSeries {
    /// Builds a series starting at `epoch_date` from cumulative counts.
    pub fn from_cumulative(
        epoch_date: NaiveDate,
        cumulative: Vec<f64>,
    ) -> Result<Self, CaseDataError> {
        let series = CaseSeries {
            epoch_date,
            dates: consecutive_dates(epoch_date, cumulative.len()),
            daily: daily_from_cumulative(&cumulative),
            cumulative,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn from_daily(epoch_date: NaiveDate, daily: Vec<f64>) -> Result<Self, CaseDataError> {
        let series = CaseSeries {
            epoch_date,
            dates: consecutive_dates(epoch_date, daily.len()),
            cumulative: cumulative_from_daily(&daily),
            daily,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.dates.first().copied()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.dates.last().copied()
    }

    /// One-based index of `date` (index 1 is the epoch date).
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.epoch_date).num_days();
        (offset >= 0 && (offset as usize) < self.len()).then_some(offset as usize + 1)
    }

    pub fn validate(&self) -> Result<(), CaseDataError> {
        let n = self.dates.len();
        if n == 0 {
            return Err(CaseDataError::Empty);
        }
        if self.daily.len() != n || self.cumulative.len() != n {
            return Err(CaseDataError::Invalid(format!(
                "{} dates, {} daily, {} cumulative",
                n,
                self.daily.len(),
                self.cumulative.len()
            )));
        }
        if self.dates[0] != self.epoch_date {
            return Err(CaseDataError::Invalid(
                "first date differs from epoch".into(),
            ));
        }
        for w in self.dates.windows(2) {
            if w[0].succ_opt() != Some(w[1]) {
                return Err(CaseDataError::Invalid(format!(
                    "dates {} and {} are not consecutive",
                    w[0], w[1]
                )));
            }
        }
        for (i, (&d, &c)) in self.daily.iter().zip(&self.cumulative).enumerate() {
            if !(d.is_finite() && d >= 0.0 && c.is_finite() && c >= 0.0) {
                return Err(CaseDataError::Invalid(format!(
                    "negative or non-finite count at index {}",
                    i + 1
                )));
            }
            if i > 0 {
                let expected = self.cumulative[i - 1] + d;
                if (c - expected).abs() > 1e-9 * c.max(1.0) {
                    return Err(CaseDataError::Invalid(format!(
                        "cumulative[{}] = {c} but cumulative[{}] + daily = {expected}",
                        i + 1,
                        i
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_trajectory(&self) -> Trajectory {
        Trajectory {
            t0_epoch: self.epoch_date,
            step: 1.0,
            cumulative: self.cumulative.clone(),
            daily: first_differences(&self.cumulative),
        }
    }

    /// CSV with `date,daily,cumulative` columns.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["date", "daily", "cumulative"])
            .expect("in-memory write");
        for ((date, daily), cumulative) in self.dates.iter().zip(&self.daily).zip(&self.cumulative)
        {
            writer
                .write_record([date.to_string(), daily.to_string(), cumulative.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

fn consecutive_dates(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    (0..n as u64).map(|i| start + Days::new(i)).collect()
}

pub fn cumulative_from_daily(daily: &[f64]) -> Vec<f64> {
    daily
        .iter()
        .scan(0.0, |total, &d| {
            *total += d;
            Some(*total)
        })
        .collect()
}

/// First differences, with the first entry equal to `cumulative[0]`.
pub fn daily_from_cumulative(cumulative: &[f64]) -> Vec<f64> {
    first_differences(cumulative)
}

pub fn parse_case_csv(content: &[u8], schema: &CsvSchema) -> Result<CaseSeries, CaseDataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(content);
    let header = reader
        .headers()
        .map_err(|e| CaseDataError::Csv {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}') == name)
            .ok_or_else(|| CaseDataError::MissingColumn(name.to_owned()))
    };
    let date_idx = column(&schema.date_column)?;
    let count_idx = column(&schema.count_column)?;

    // date -> (row, count)
    let mut rows: BTreeMap<NaiveDate, (u64, f64)> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let fallback_row = i as u64 + 2;
        let record = record.map_err(|e| CaseDataError::Csv {
            row: e.position().map_or(fallback_row, |p| p.line()),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(fallback_row, |p| p.line());
        let raw_date = record.get(date_idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            CaseDataError::MalformedDate {
                row,
                value: raw_date.to_owned(),
            }
        })?;
        let raw_count = record.get(count_idx).unwrap_or("");
        let count: f64 = raw_count
            .parse()
            .ok()
            .filter(|c: &f64| c.is_finite())
            .ok_or_else(|| CaseDataError::MalformedCount {
                row,
                value: raw_count.to_owned(),
            })?;
        if count < 0.0 {
            return Err(CaseDataError::NegativeCount { row, value: count });
        }
        if let Some(&(first_row, _)) = rows.get(&date) {
            return Err(CaseDataError::DuplicateDate {
                row,
                date,
                first_row,
            });
        }
        rows.insert(date, (row, count));
    }

    let (&first, _) = rows.first_key_value().ok_or(CaseDataError::Empty)?;
    let (&last, _) = rows.last_key_value().ok_or(CaseDataError::Empty)?;
    let span = (last - first).num_days() as usize + 1;
    let dates = consecutive_dates(first, span);

    let (daily, cumulative) = match schema.kind {
        CountKind::Daily => {
            let daily: Vec<f64> = dates
                .iter()
                .map(|d| rows.get(d).map_or(0.0, |&(_, c)| c))
                .collect();
            let cumulative = cumulative_from_daily(&daily);
            (daily, cumulative)
        }
        CountKind::Cumulative => {
            let mut cumulative = Vec::with_capacity(span);
            let mut previous: Option<f64> = None;
            for d in &dates {
                let value = match rows.get(d) {
                    Some(&(row, c)) => {
                        if let Some(p) = previous.filter(|&p| c < p) {
                            return Err(CaseDataError::DecreasingCumulative {
                                row,
                                date: *d,
                                value: c,
                                previous: p,
                            });
                        }
                        c
                    }
                    None => previous.expect("first date always present"),
                };
                cumulative.push(value);
                previous = Some(value);
            }
            (daily_from_cumulative(&cumulative), cumulative)
        }
    };

    Ok(CaseSeries {
        epoch_date: first,
        dates,
        daily,
        cumulative,
    })
}

/// Sub-series on `start..=end`; counts keep their absolute values.
pub fn window(
    series: &CaseSeries,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<CaseSeries, CaseDataError> {
    if start > end {
        return Err(CaseDataError::StartAfterEnd { start, end });
    }
    let (first, last) = match (series.first_date(), series.last_date()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(CaseDataError::Empty),
    };
    if start < first || end > last {
        return Err(CaseDataError::OutOfRange {
            start,
            end,
            first,
            last,
        });
    }
    let lo = (start - first).num_days() as usize;
    let hi = (end - first).num_days() as usize + 1;
    Ok(CaseSeries {
        epoch_date: start,
        dates: series.dates[lo..hi].to_vec(),
        daily: series.daily[lo..hi].to_vec(),
        cumulative: series.cumulative[lo..hi].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn parses_two_daily_rows() {
        let s = parse_case_csv(
            b"date,daily\n2022-05-10,0\n2022-05-11,1",
            &CsvSchema::daily("date", "daily"),
        )
        .unwrap();
        assert_eq!(s.daily, vec![0.0, 1.0]);
        assert_eq!(s.cumulative, vec![0.0, 1.0]);
        assert_eq!(s.epoch_date, date("2022-05-10"));
        s.validate().unwrap();
    }

    #[test]
    fn gap_fills_cumulative() {
        let s = parse_case_csv(
            b"date,cumulative\n2022-05-10,5\n2022-05-12,9",
            &CsvSchema::cumulative("date", "cumulative"),
        )
        .unwrap();
        assert_eq!(s.dates.len(), 3);
        assert_eq!(s.dates[1], date("2022-05-11"));
        assert_eq!(s.daily, vec![5.0, 0.0, 4.0]);
        assert_eq!(s.cumulative, vec![5.0, 5.0, 9.0]);
    }

    #[test]
    fn gap_fills_daily_with_zero_and_sorts() {
        let s = parse_case_csv(
            b"date,daily\r\n2022-05-13,2\r\n2022-05-10,1\r\n",
            &CsvSchema::daily("date", "daily"),
        )
        .unwrap();
        assert_eq!(s.daily, vec![1.0, 0.0, 0.0, 2.0]);
        assert_eq!(s.cumulative, vec![1.0, 1.0, 1.0, 3.0]);
    }

    #[test]
    fn negative_count_names_row() {
        let err = parse_case_csv(
            b"date,daily\n2022-05-10,-3",
            &CsvSchema::daily("date", "daily"),
        )
        .unwrap_err();
        assert_eq!(
            err,
            CaseDataError::NegativeCount {
                row: 2,
                value: -3.0
            }
        );
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("-3"), "{msg}");
    }

    #[test]
    fn error_paths() {
        let daily = CsvSchema::daily("date", "daily");
        assert_eq!(
            parse_case_csv(b"date,daily\n", &daily),
            Err(CaseDataError::Empty)
        );
        assert!(matches!(
            parse_case_csv(b"date,daily\n2022-05-10,1\n10/05/2022,1", &daily),
            Err(CaseDataError::MalformedDate { row: 3, .. })
        ));
        assert!(matches!(
            parse_case_csv(b"date,daily\n2022-05-10,1\n2022-05-10,2", &daily),
            Err(CaseDataError::DuplicateDate {
                row: 3,
                first_row: 2,
                ..
            })
        ));
        assert!(matches!(
            parse_case_csv(b"date,daily\n2022-05-10,abc", &daily),
            Err(CaseDataError::MalformedCount { row: 2, .. })
        ));
        assert!(matches!(
            parse_case_csv(b"day,daily\n2022-05-10,1", &daily),
            Err(CaseDataError::MissingColumn(_))
        ));
        assert!(matches!(
            parse_case_csv(
                b"date,cumulative\n2022-05-10,5\n2022-05-11,4",
                &CsvSchema::cumulative("date", "cumulative")
            ),
            Err(CaseDataError::DecreasingCumulative { row: 3, .. })
        ));
    }

    #[test]
    fn schema_inference() {
        assert_eq!(
            CsvSchema::infer(b"date,daily\n").unwrap(),
            CsvSchema::daily("date", "daily")
        );
        assert_eq!(
            CsvSchema::infer(b"date,daily,cumulative\n").unwrap(),
            CsvSchema::cumulative("date", "cumulative")
        );
        assert!(CsvSchema::infer(b"when,count\n").is_err());
    }

    #[test]
    fn study_window_indices() {
        let full = CaseSeries::from_daily(date("2022-05-01"), vec![1.0; 300]).unwrap();
        let w = window(&full, date("2022-05-10"), date("2022-12-31")).unwrap();
        assert_eq!(w.len(), 236);
        assert_eq!(w.index_of(date("2022-05-10")), Some(1));
        assert_eq!(w.index_of(date("2022-12-31")), Some(236));
        assert_eq!(w.dates[235], date("2022-12-31"));
        // absolute counts preserved
        assert_eq!(w.cumulative[0], 10.0);
        w.validate().unwrap();
    }

    #[test]
    fn window_identity_and_errors() {
        let s = CaseSeries::from_daily(date("2022-05-10"), vec![2.0, 3.0, 0.0, 5.0]).unwrap();
        let same = window(&s, date("2022-05-10"), date("2022-05-13")).unwrap();
        assert_eq!(same, s);
        assert!(matches!(
            window(&s, date("2022-05-12"), date("2022-05-11")),
            Err(CaseDataError::StartAfterEnd { .. })
        ));
        let err = window(&s, date("2022-05-01"), date("2022-05-11")).unwrap_err();
        assert!(err.to_string().contains("2022-05-10..=2022-05-13"), "{err}");
    }

    #[test]
    fn csv_export_has_both_columns() {
        let s = CaseSeries::from_daily(date("2022-05-10"), vec![2.0, 3.0]).unwrap();
        assert_eq!(
            s.to_csv(),
            "date,daily,cumulative\n2022-05-10,2,2\n2022-05-11,3,5\n"
        );
        let back =
            parse_case_csv(s.to_csv().as_bytes(), &CsvSchema::daily("date", "daily")).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn daily_cumulative_round_trip(daily in prop::collection::vec(0u32..10_000, 1..100)) {
            let daily: Vec<f64> = daily.into_iter().map(f64::from).collect();
            prop_assert_eq!(daily_from_cumulative(&cumulative_from_daily(&daily)), daily);
        }

        #[test]
        fn parse_is_deterministic(counts in prop::collection::vec(0u32..500, 1..30)) {
            let mut text = String::from("date,daily\n");
            for (i, c) in counts.iter().enumerate() {
                text.push_str(&format!("{},{}\n", date("2022-05-10") + Days::new(i as u64), c));
            }
            let schema = CsvSchema::daily("date", "daily");
            let a = parse_case_csv(text.as_bytes(), &schema).unwrap();
            let b = parse_case_csv(text.as_bytes(), &schema).unwrap();
            prop_assert_eq!(&a, &b);
            a.validate().unwrap();
        }

        #[test]
        fn window_is_idempotent(
            counts in prop::collection::vec(0u32..500, 2..60),
            a in 0usize..60,
            b in 0usize..60,
        ) {
            let n = counts.len();
            let s = CaseSeries::from_daily(date("2022-05-10"), counts.into_iter().map(f64::from).collect()).unwrap();
            let (lo, hi) = (a.min(b) % n, a.max(b) % n);
            let (lo, hi) = (lo.min(hi), lo.max(hi));
            let w = window(&s, s.dates[lo], s.dates[hi]).unwrap();
            let ww = window(&w, s.dates[lo], s.dates[hi]).unwrap();
            prop_assert_eq!(ww, w);
        }
    }
}

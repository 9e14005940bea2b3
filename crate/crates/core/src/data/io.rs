use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::NaiveDate;

use super::{Bar, Panel, PriceSeries};
use crate::error::{Error, Result};

const PRICE_HEADER: [&str; 6] = ["date", "id", "open", "high", "low", "close"];

fn parse_opt(field: &str, line: usize, name: &str) -> Result<Option<f64>> {
    let f = field.trim();
    if f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    f.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Data(format!("line {line}: cannot parse {name} `{f}`")))
}

/// Read `date,id,open,high,low,close` rows into a panel on the union date
/// grid. Empty `close` marks a missing day; OHLC is kept only when every
/// present row of a series carries all four fields.
pub fn read_price_csv<R: Read>(reader: R) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols != PRICE_HEADER {
        return Err(Error::Data(format!(
            "expected header `{}`, found `{}`",
            PRICE_HEADER.join(","),
            cols.join(",")
        )));
    }
    type Row = (NaiveDate, Option<f64>, Option<Bar>, bool);
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<Row>> = HashMap::new();
    let mut dates = BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|_| Error::Data(format!("line {line}: bad date `{}`", &rec[0])))?;
        let id = rec[1].to_string();
        let open = parse_opt(&rec[2], line, "open")?;
        let high = parse_opt(&rec[3], line, "high")?;
        let low = parse_opt(&rec[4], line, "low")?;
        let close = parse_opt(&rec[5], line, "close")?;
        let bar = match (open, high, low, close) {
            (Some(open), Some(high), Some(low), Some(close)) => Some(Bar { open, high, low, close }),
            _ => None,
        };
        let has_partial = close.is_some() && bar.is_none();
        dates.insert(date);
        if !rows.contains_key(&id) {
            order.push(id.clone());
        }
        rows.entry(id).or_default().push((date, close, bar, has_partial));
    }
    let dates: Vec<NaiveDate> = dates.into_iter().collect();
    let index: HashMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut series = Vec::with_capacity(order.len());
    for id in order {
        let list = &rows[&id];
        let mut close = vec![None; dates.len()];
        let mut bars = vec![None; dates.len()];
        let with_bars = list.iter().all(|r| !r.3);
        for (date, c, b, _) in list {
            let t = index[date];
            if close[t].is_some() {
                return Err(Error::Data(format!("{id}: duplicate row for {date}")));
            }
            close[t] = *c;
            bars[t] = *b;
        }
        series.push(PriceSeries::new(id, dates.clone(), close, with_bars.then_some(bars))?);
    }
    Panel::new(dates, series)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write a panel in the ingestion format, one row per series-day.
pub fn write_price_csv<W: Write>(panel: &Panel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PRICE_HEADER)?;
    for (t, date) in panel.dates.iter().enumerate() {
        for s in &panel.series {
            let bar = s.bars.as_ref().and_then(|b| b[t]);
            let date = date.format("%Y-%m-%d").to_string();
            w.write_record([
                date.as_str(),
                s.id.as_str(),
                &fmt_opt(bar.map(|b| b.open)),
                &fmt_opt(bar.map(|b| b.high)),
                &fmt_opt(bar.map(|b| b.low)),
                &fmt_opt(s.close[t]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row of a long-format feature dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub date: NaiveDate,
    pub id: String,
    pub name: String,
    pub value: f64,
}

pub fn write_feature_dump<W: Write>(writer: W, records: impl IntoIterator<Item = FeatureRecord>) -> Result<()> {
    write_long_dump(writer, "feature_name", records)
}

/// Long-format dump with header `date,id,<name_column>,value`.
pub fn write_long_dump<W: Write>(
    writer: W,
    name_column: &str,
    records: impl IntoIterator<Item = FeatureRecord>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "id", name_column, "value"])?;
    for r in records {
        w.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            r.id,
            r.name,
            r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a four-column long dump regardless of the name column's header.
pub fn read_long_dump<R: Read>(reader: R) -> Result<Vec<FeatureRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != 4 || &header[0] != "date" || &header[1] != "id" || &header[3] != "value" {
        return Err(Error::Data(format!("expected header date,id,<name>,value, got {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
            .map_err(|_| Error::Data(format!("line {line}: bad date `{}`", &row[0])))?;
        let value: f64 = row[3]
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: bad value `{}`", &row[3])))?;
        out.push(FeatureRecord {
            date,
            id: row[1].to_string(),
            name: row[2].to_string(),
            value,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_missing_and_ohlc() {
        let text = "date,id,open,high,low,close\n\
                    2020-01-02,A,10,11,9,10.5\n\
                    2020-01-02,B,,,,20\n\
                    2020-01-03,A,10.5,12,10,11\n\
                    2020-01-03,B,,,,\n\
                    2020-01-06,B,,,,21\n";
        let p = read_price_csv(text.as_bytes()).unwrap();
        assert_eq!(p.n_days(), 3);
        let a = &p.series[0];
        assert_eq!(a.id, "A");
        assert_eq!(a.close, vec![Some(10.5), Some(11.0), None]);
        assert!(a.bars.is_some());
        let b = &p.series[1];
        assert_eq!(b.close, vec![Some(20.0), None, Some(21.0)]);
        assert!(b.bars.is_none());
    }

    #[test]
    fn rejects_bad_header_and_prices() {
        assert!(read_price_csv("day,id,close\n".as_bytes()).is_err());
        let neg = "date,id,open,high,low,close\n2020-01-02,A,,,,-1\n";
        assert!(matches!(read_price_csv(neg.as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn write_then_read_is_identity() {
        let text = "date,id,open,high,low,close\n\
                    2020-01-02,A,10,11,9,10.5\n\
                    2020-01-02,B,,,,20\n\
                    2020-01-03,A,10.5,12,10,11\n\
                    2020-01-03,B,,,,20.25\n";
        let p = read_price_csv(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_price_csv(&p, &mut buf).unwrap();
        assert_eq!(read_price_csv(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn long_dump_round_trips() {
        let recs = vec![
            FeatureRecord {
                date: NaiveDate::from_ymd_opt(2021, 3, 4).unwrap(),
                id: "A".into(),
                name: "rv_d".into(),
                value: -0.1 / 3.0,
            },
            FeatureRecord {
                date: NaiveDate::from_ymd_opt(2021, 3, 5).unwrap(),
                id: "B".into(),
                name: "parent_A".into(),
                value: 1e-300,
            },
        ];
        let mut buf = Vec::new();
        write_long_dump(&mut buf, "coef_name", recs.clone()).unwrap();
        assert!(buf.starts_with(b"date,id,coef_name,value\n"));
        assert_eq!(read_long_dump(buf.as_slice()).unwrap(), recs);
        assert!(read_long_dump("date,id,value\n".as_bytes()).is_err());
    }
}

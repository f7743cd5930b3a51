//! CSV readers and writers for the raw input tables and the canonical panel.

use chrono::{Datelike, NaiveDate, Weekday};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::panel::CountryPanel;
use crate::error::{Error, Result};

/// Weekly death counts for one country, as read from the events table.
#[derive(Debug, Clone, PartialEq)]
pub struct CountrySeries {
    pub weeks: Vec<NaiveDate>,
    pub deaths: Vec<u64>,
}

/// Rows of the events table grouped by country (sorted by id).
pub type RawEventTable = BTreeMap<String, CountrySeries>;

#[derive(Debug, Clone, PartialEq)]
pub struct CeasefireEvent {
    pub country_id: String,
    pub effective_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnualCovariates {
    pub country_id: String,
    pub year: i32,
    pub polyarchy: f64,
    pub gdp_per_capita: f64,
    pub population: f64,
}

struct Table {
    name: String,
    columns: Vec<usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn get<'a>(&self, rec: &'a csv::StringRecord, col: usize) -> &'a str {
        rec.get(self.columns[col]).unwrap_or("").trim()
    }
}

fn read_table<R: Read>(source: R, name: &str, required: &[&str], allow_empty: bool) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(source);
    let mut records = rdr.records();
    let header = match records.next() {
        None if allow_empty => return Ok(Table { name: name.into(), columns: vec![], rows: vec![] }),
        None => return Err(Error::csv(name, 1, required[0], "missing header row")),
        Some(r) => r.map_err(|e| Error::csv(name, 1, "-", e.to_string()))?,
    };
    let header: Vec<String> = header.iter().map(|h| h.trim().trim_start_matches('\u{feff}').to_string()).collect();
    let mut columns = Vec::with_capacity(required.len());
    for col in required {
        match header.iter().position(|h| h == col) {
            Some(i) => columns.push(i),
            None => return Err(Error::csv(name, 1, col, "missing header column")),
        }
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::csv(name, line, "-", e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        rows.push((line, rec));
    }
    Ok(Table { name: name.into(), columns, rows })
}

fn parse_date(t: &Table, line: u64, col: &str, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| Error::csv(&t.name, line, col, format!("invalid ISO date `{s}`")))
}

fn parse_f64(t: &Table, line: u64, col: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::csv(&t.name, line, col, format!("invalid number `{s}`")))
}

fn file_name(path: &Path) -> String {
    path.display().to_string()
}

pub fn read_events(path: &Path) -> Result<RawEventTable> {
    read_events_from(std::fs::File::open(path)?, &file_name(path))
}

pub fn read_events_from<R: Read>(source: R, name: &str) -> Result<RawEventTable> {
    let t = read_table(source, name, &["country_id", "week_start", "deaths"], false)?;
    let mut out: RawEventTable = BTreeMap::new();
    for (line, rec) in &t.rows {
        let country = t.get(rec, 0);
        if country.is_empty() {
            return Err(Error::csv(name, *line, "country_id", "empty country id"));
        }
        let week = parse_date(&t, *line, "week_start", t.get(rec, 1))?;
        if week.weekday() != Weekday::Mon {
            return Err(Error::csv(name, *line, "week_start", format!("{week} is not a Monday")));
        }
        let raw = t.get(rec, 2);
        let deaths: u64 =
            raw.parse().map_err(|_| Error::csv(name, *line, "deaths", format!("`{raw}` is not a non-negative integer")))?;
        let series = out
            .entry(country.to_string())
            .or_insert_with(|| CountrySeries { weeks: Vec::new(), deaths: Vec::new() });
        if let Some(&last) = series.weeks.last() {
            if (week - last).num_days() != 7 {
                return Err(Error::csv(
                    name,
                    *line,
                    "week_start",
                    format!("{week} does not follow {last} by one week for `{country}`"),
                ));
            }
        }
        series.weeks.push(week);
        series.deaths.push(deaths);
    }
    if out.is_empty() {
        return Err(Error::csv(name, 2, "country_id", "no data rows"));
    }
    Ok(out)
}

pub fn read_ceasefires(path: &Path) -> Result<Vec<CeasefireEvent>> {
    read_ceasefires_from(std::fs::File::open(path)?, &file_name(path))
}

/// A zero-byte or header-only file means no ceasefires.
pub fn read_ceasefires_from<R: Read>(source: R, name: &str) -> Result<Vec<CeasefireEvent>> {
    let t = read_table(source, name, &["country_id", "effective_date"], true)?;
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let country = t.get(rec, 0);
        if country.is_empty() {
            return Err(Error::csv(name, *line, "country_id", "empty country id"));
        }
        let date = parse_date(&t, *line, "effective_date", t.get(rec, 1))?;
        out.push(CeasefireEvent { country_id: country.to_string(), effective_date: date });
    }
    out.sort_by(|a, b| (&a.country_id, a.effective_date).cmp(&(&b.country_id, b.effective_date)));
    Ok(out)
}

pub fn read_covariates(path: &Path) -> Result<Vec<AnnualCovariates>> {
    read_covariates_from(std::fs::File::open(path)?, &file_name(path))
}

pub fn read_covariates_from<R: Read>(source: R, name: &str) -> Result<Vec<AnnualCovariates>> {
    let t = read_table(source, name, &["country_id", "year", "polyarchy", "gdp_pc", "population"], false)?;
    let mut out = Vec::with_capacity(t.rows.len());
    let mut seen = std::collections::BTreeSet::new();
    for (line, rec) in &t.rows {
        let country = t.get(rec, 0).to_string();
        if country.is_empty() {
            return Err(Error::csv(name, *line, "country_id", "empty country id"));
        }
        let raw_year = t.get(rec, 1);
        let year: i32 = raw_year.parse().map_err(|_| Error::csv(name, *line, "year", format!("invalid year `{raw_year}`")))?;
        if !seen.insert((country.clone(), year)) {
            return Err(Error::csv(name, *line, "year", format!("duplicate year {year} for `{country}`")));
        }
        let polyarchy = parse_f64(&t, *line, "polyarchy", t.get(rec, 2))?;
        if !(0.0..=1.0).contains(&polyarchy) {
            return Err(Error::csv(name, *line, "polyarchy", "must lie in [0, 1]"));
        }
        let gdp = parse_f64(&t, *line, "gdp_pc", t.get(rec, 3))?;
        if gdp <= 0.0 {
            return Err(Error::csv(name, *line, "gdp_pc", "must be positive"));
        }
        let population = parse_f64(&t, *line, "population", t.get(rec, 4))?;
        if population <= 0.0 {
            return Err(Error::csv(name, *line, "population", "must be positive"));
        }
        out.push(AnnualCovariates { country_id: country, year, polyarchy, gdp_per_capita: gdp, population });
    }
    Ok(out)
}

/// Write panels in canonical form: `country_id,week_start,deaths`, one column
/// per non-intercept covariate, then `label` (`1` or empty).
pub fn write_panels<W: Write>(sink: W, panels: &[CountryPanel]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(sink);
    let covariates: &[String] = panels.first().map(|p| &p.covariates[..]).unwrap_or(&[]);
    let mut header = vec!["country_id", "week_start", "deaths"];
    header.extend(covariates.iter().skip(1).map(String::as_str));
    header.push("label");
    w.write_record(&header).map_err(csv_io)?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for p in panels {
        if p.covariates != covariates {
            return Err(Error::Invalid("panels disagree on covariate columns".into()));
        }
        for k in 0..p.len() {
            fields.clear();
            fields.push(p.country_id.clone());
            fields.push(p.weeks[k].format("%Y-%m-%d").to_string());
            fields.push(p.deaths[k].to_string());
            fields.extend(p.x_row(k).iter().skip(1).map(|v| v.to_string()));
            fields.push(if p.labels[k] { "1".into() } else { String::new() });
            w.write_record(&fields).map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn save_panels(path: &Path, panels: &[CountryPanel]) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_panels(f, panels)
}

pub fn load_panels(path: &Path) -> Result<Vec<CountryPanel>> {
    read_panels_from(std::fs::File::open(path)?, &file_name(path))
}

pub fn read_panels_from<R: Read>(source: R, name: &str) -> Result<Vec<CountryPanel>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(source);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(Error::csv(name, 1, "country_id", "missing header row")),
        Some(r) => r.map_err(|e| Error::csv(name, 1, "-", e.to_string()))?,
    };
    let header: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let h = header.len();
    if h < 4 || header[..3] != ["country_id", "week_start", "deaths"] || header[h - 1] != "label" {
        return Err(Error::csv(name, 1, "country_id", "expected header country_id,week_start,deaths,...,label"));
    }
    let mut covariates = vec!["intercept".to_string()];
    covariates.extend(header[3..h - 1].iter().cloned());
    let t = Table { name: name.into(), columns: (0..h).collect(), rows: vec![] };

    let mut panels: Vec<CountryPanel> = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| Error::csv(name, e.position().map(|p| p.line()).unwrap_or(0), "-", e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let country = t.get(&rec, 0);
        let week = parse_date(&t, line, "week_start", t.get(&rec, 1))?;
        let raw = t.get(&rec, 2);
        let deaths: u64 =
            raw.parse().map_err(|_| Error::csv(name, line, "deaths", format!("`{raw}` is not a non-negative integer")))?;
        let label = match t.get(&rec, h - 1) {
            "" => false,
            "1" => true,
            other => return Err(Error::csv(name, line, "label", format!("only state 1 may be fixed, got `{other}`"))),
        };
        let idx = match panels.iter().position(|p| p.country_id == country) {
            Some(i) if i + 1 == panels.len() => i,
            Some(_) => return Err(Error::csv(name, line, "country_id", format!("rows for `{country}` are not contiguous"))),
            None => {
                panels.push(CountryPanel {
                    country_id: country.to_string(),
                    weeks: vec![],
                    deaths: vec![],
                    covariates: covariates.clone(),
                    x: vec![],
                    labels: vec![],
                    population: None,
                });
                panels.len() - 1
            }
        };
        let p = &mut panels[idx];
        if let Some(&last) = p.weeks.last() {
            if (week - last).num_days() != 7 {
                return Err(Error::csv(name, line, "week_start", format!("{week} does not follow {last} by one week")));
            }
        }
        p.weeks.push(week);
        p.deaths.push(deaths);
        p.x.push(1.0);
        for j in 3..h - 1 {
            p.x.push(parse_f64(&t, line, &header[j], t.get(&rec, j))?);
        }
        p.labels.push(label);
    }
    Ok(panels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_header_is_reported_on_line_one() {
        let err = read_events_from("A,2001-01-01,3\n".as_bytes(), "events.csv").unwrap_err();
        match err {
            Error::Csv { line, ref column, .. } => {
                assert_eq!(line, 1);
                assert_eq!(column, "country_id");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_row_names_line_and_column() {
        let src = "country_id,week_start,deaths\nA,2001-01-01,3\nA,2001-01-08,-2\n";
        let err = read_events_from(src.as_bytes(), "events.csv").unwrap_err().to_string();
        assert!(err.starts_with("events.csv:3: column `deaths`"), "{err}");
    }

    #[test]
    fn non_monday_and_gaps_rejected() {
        let src = "country_id,week_start,deaths\nA,2001-01-02,0\n";
        assert!(read_events_from(src.as_bytes(), "e").is_err());
        let src = "country_id,week_start,deaths\nA,2001-01-01,0\nA,2001-01-15,0\n";
        let err = read_events_from(src.as_bytes(), "e").unwrap_err().to_string();
        assert!(err.contains(":3:"), "{err}");
    }

    #[test]
    fn quoted_fields_and_column_order() {
        let src = "deaths,\"country_id\",week_start\n4,\"Congo, DR\",2001-01-01\n";
        let t = read_events_from(src.as_bytes(), "e").unwrap();
        assert_eq!(t["Congo, DR"].deaths, vec![4]);
    }

    #[test]
    fn empty_ceasefire_file_is_no_events() {
        assert!(read_ceasefires_from("".as_bytes(), "c").unwrap().is_empty());
        assert!(read_ceasefires_from("country_id,effective_date\n".as_bytes(), "c").unwrap().is_empty());
    }

    #[test]
    fn covariate_ranges_checked() {
        let src = "country_id,year,polyarchy,gdp_pc,population\nA,2000,1.5,100,1000\n";
        assert!(read_covariates_from(src.as_bytes(), "cov").is_err());
        let src = "country_id,year,polyarchy,gdp_pc,population\nA,2000,0.5,100,1000\nA,2000,0.5,100,1000\n";
        assert!(read_covariates_from(src.as_bytes(), "cov").unwrap_err().to_string().contains("duplicate"));
    }
}

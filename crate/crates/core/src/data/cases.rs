use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{DataError, Dataset, ForecastCase};

const FIXED: [&str; 4] = ["station_id", "valid_date", "lead_days", "observation"];

fn malformed(line: u64, message: impl Into<String>) -> DataError {
    DataError::Malformed {
        line,
        message: message.into(),
    }
}

fn csv_error(e: csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Utf8 { .. } => DataError::NonUtf8 { line },
        csv::ErrorKind::Io(_) => malformed(line, e.to_string()),
        _ => malformed(line, e.to_string()),
    }
}

fn parse_f64(s: &str, what: &str, line: u64) -> Result<f64, DataError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| malformed(line, format!("{what}: cannot parse {s:?} as a number")))
}

/// Read a case CSV from any reader.
pub fn read_cases_from<R: Read>(reader: R) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.len() < FIXED.len() || header.iter().take(4).ne(FIXED.iter().copied()) {
        return Err(malformed(1, format!("header must start with {}", FIXED.join(","))));
    }
    let k = header.len() - FIXED.len();
    for (i, name) in header.iter().skip(FIXED.len()).enumerate() {
        if name != format!("m{}", i + 1) {
            return Err(malformed(
                1,
                format!("expected member column m{}, found {name:?}", i + 1),
            ));
        }
    }

    let mut cases = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let station_id = rec[0].to_string();
        if station_id.is_empty() {
            return Err(malformed(line, "empty station_id"));
        }
        let valid_date = NaiveDate::parse_from_str(rec[1].trim(), "%Y-%m-%d")
            .map_err(|_| malformed(line, format!("valid_date: {:?} is not YYYY-MM-DD", &rec[1])))?;
        let lead_days: u32 = rec[2]
            .trim()
            .parse()
            .map_err(|_| malformed(line, format!("lead_days: {:?} is not a positive integer", &rec[2])))?;
        let observation = parse_f64(&rec[3], "observation", line)?;
        let members = rec
            .iter()
            .skip(FIXED.len())
            .enumerate()
            .map(|(i, s)| parse_f64(s, &format!("m{}", i + 1), line))
            .collect::<Result<Vec<_>, _>>()?;
        let case = ForecastCase {
            station_id,
            valid_date,
            lead_days,
            members,
            observation,
        };
        case.validate().map_err(|e| malformed(line, e.to_string()))?;
        cases.push(case);
    }
    if cases.is_empty() {
        return Ok(Dataset::empty(k));
    }
    Dataset::new(cases)
}

pub fn read_cases(path: &Path) -> Result<Dataset, DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    read_cases_from(BufReader::new(file))
}

/// Write a case CSV. Numbers use the shortest representation that reads
/// back to the same value.
pub fn write_cases_to<W: Write>(data: &Dataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    header.extend((1..=data.k()).map(|i| format!("m{i}")));
    w.write_record(&header).map_err(csv_error)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for c in data.cases() {
        row.clear();
        row.push(c.station_id.clone());
        row.push(c.valid_date.format("%Y-%m-%d").to_string());
        row.push(c.lead_days.to_string());
        row.push(format!("{}", c.observation));
        row.extend(c.members.iter().map(|m| format!("{m}")));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| malformed(0, e.to_string()))?;
    Ok(())
}

pub fn write_cases(data: &Dataset, path: &Path) -> Result<(), DataError> {
    let file = File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut buf = BufWriter::new(file);
    write_cases_to(data, &mut buf)?;
    buf.flush().map_err(|e| DataError::io(path, e))
}

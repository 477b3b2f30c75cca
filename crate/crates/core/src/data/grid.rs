//! Plain-text gridded ensemble fields and their reduction to station cases.
//!
//! A grid file holds one lead step of one run:
//!
//! ```text
//! run_date 2011-01-01
//! lead_hours 24
//! lat0 45.0
//! lon0 5.0
//! dlat 0.25
//! dlon 0.25
//! nlat 10
//! nlon 12
//! members 50
//! data
//! <i> <j> <v1> ... <vk>      one line per grid point
//! ```
//!
//! Lines starting with `#` and blank lines are ignored.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{Days, NaiveDate};

use super::{DataError, Dataset, ForecastCase};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lat0: f64,
    pub lon0: f64,
    pub dlat: f64,
    pub dlon: f64,
    pub nlat: usize,
    pub nlon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub station_id: String,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GriddedEnsembleField {
    pub grid: GridSpec,
    pub run_date: NaiveDate,
    pub lead_hours: u32,
    pub k: usize,
    /// Row-major over (i, j, member).
    values: Vec<f64>,
}

impl GriddedEnsembleField {
    pub fn new(
        grid: GridSpec,
        run_date: NaiveDate,
        lead_hours: u32,
        k: usize,
        values: Vec<f64>,
    ) -> Result<Self, DataError> {
        let expected = grid.nlat * grid.nlon * k;
        if values.len() != expected {
            return Err(DataError::MemberCount {
                expected,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Malformed {
                line: 0,
                message: "grid values must be finite".into(),
            });
        }
        Ok(Self {
            grid,
            run_date,
            lead_hours,
            k,
            values,
        })
    }

    pub fn point(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.grid.nlon + j) * self.k;
        &self.values[start..start + self.k]
    }
}

/// Index of the lower cell corner and the fractional offset within the
/// cell along one axis, or `None` outside `[0, n − 1]`.
fn axis(x: f64, x0: f64, dx: f64, n: usize) -> Option<(usize, f64)> {
    let u = (x - x0) / dx;
    let tol = 1e-9;
    if !(u >= -tol && u <= (n - 1) as f64 + tol) {
        return None;
    }
    let u = u.clamp(0.0, (n - 1) as f64);
    if n == 1 {
        return Some((0, 0.0));
    }
    let i = (u.floor() as usize).min(n - 2);
    Some((i, u - i as f64))
}

/// Bilinear interpolation of every member to the station location.
pub fn bilinear_to_station(field: &GriddedEnsembleField, station: &Station) -> Result<Vec<f64>, DataError> {
    let g = &field.grid;
    let outside = || DataError::OutsideGrid {
        station: station.station_id.clone(),
        lat: station.latitude,
        lon: station.longitude,
    };
    let (i, t) = axis(station.latitude, g.lat0, g.dlat, g.nlat).ok_or_else(outside)?;
    let (j, s) = axis(station.longitude, g.lon0, g.dlon, g.nlon).ok_or_else(outside)?;
    let i1 = (i + 1).min(g.nlat - 1);
    let j1 = (j + 1).min(g.nlon - 1);
    let (f00, f01, f10, f11) = (
        field.point(i, j),
        field.point(i, j1),
        field.point(i1, j),
        field.point(i1, j1),
    );
    Ok((0..field.k)
        .map(|m| (1.0 - t) * (1.0 - s) * f00[m] + (1.0 - t) * s * f01[m] + t * (1.0 - s) * f10[m] + t * s * f11[m])
        .collect())
}

/// Per-member maximum over the steps `(L − 1)·24 + step_hours, …, 24·L`
/// of lead day `L`. `steps` maps lead hour to member values.
pub fn daily_max_reduce(
    steps: &BTreeMap<u32, Vec<f64>>,
    lead_days: u32,
    step_hours: u32,
) -> Result<Vec<f64>, DataError> {
    assert!(lead_days >= 1 && step_hours >= 1 && 24 % step_hours == 0);
    let hours: Vec<u32> = ((lead_days - 1) * 24 + step_hours..=lead_days * 24)
        .step_by(step_hours as usize)
        .collect();
    let missing: Vec<u32> = hours.iter().copied().filter(|h| !steps.contains_key(h)).collect();
    if !missing.is_empty() {
        return Err(DataError::MissingSteps {
            lead: lead_days,
            missing,
        });
    }
    let k = steps[&hours[0]].len();
    let mut out = vec![f64::NEG_INFINITY; k];
    for h in &hours {
        let v = &steps[h];
        if v.len() != k {
            return Err(DataError::MemberCount {
                expected: k,
                found: v.len(),
            });
        }
        for (o, x) in out.iter_mut().zip(v) {
            *o = o.max(*x);
        }
    }
    Ok(out)
}

fn header_value(key: &str, lines: &mut impl Iterator<Item = (u64, String)>) -> Result<(u64, String), DataError> {
    let (line, text) = lines.next().ok_or_else(|| DataError::Malformed {
        line: 0,
        message: format!("missing header field {key}"),
    })?;
    let mut parts = text.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(v), None) if k == key => Ok((line, v.to_string())),
        _ => Err(DataError::Malformed {
            line,
            message: format!("expected `{key} <value>`, found {text:?}"),
        }),
    }
}

fn parse<T: std::str::FromStr>(key: &str, (line, v): (u64, String)) -> Result<T, DataError> {
    v.parse().map_err(|_| DataError::Malformed {
        line,
        message: format!("{key}: cannot parse {v:?}"),
    })
}

pub fn read_grid_from<R: Read>(reader: R) -> Result<GriddedEnsembleField, DataError> {
    let mut lines = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = n as u64 + 1;
        let text = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => DataError::NonUtf8 { line: line_no },
            _ => DataError::Malformed {
                line: line_no,
                message: e.to_string(),
            },
        })?;
        let t = text.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        lines.push((line_no, t.to_string()));
    }
    let mut it = lines.into_iter();
    let run_date_raw = header_value("run_date", &mut it)?;
    let run_date = NaiveDate::parse_from_str(&run_date_raw.1, "%Y-%m-%d").map_err(|_| DataError::Malformed {
        line: run_date_raw.0,
        message: format!("run_date: {:?} is not YYYY-MM-DD", run_date_raw.1),
    })?;
    let lead_hours: u32 = parse("lead_hours", header_value("lead_hours", &mut it)?)?;
    let lat0: f64 = parse("lat0", header_value("lat0", &mut it)?)?;
    let lon0: f64 = parse("lon0", header_value("lon0", &mut it)?)?;
    let dlat: f64 = parse("dlat", header_value("dlat", &mut it)?)?;
    let dlon: f64 = parse("dlon", header_value("dlon", &mut it)?)?;
    let nlat: usize = parse("nlat", header_value("nlat", &mut it)?)?;
    let nlon: usize = parse("nlon", header_value("nlon", &mut it)?)?;
    let k: usize = parse("members", header_value("members", &mut it)?)?;
    match it.next() {
        Some((_, t)) if t == "data" => {}
        Some((line, t)) => {
            return Err(DataError::Malformed {
                line,
                message: format!("expected `data`, found {t:?}"),
            })
        }
        None => {
            return Err(DataError::Malformed {
                line: 0,
                message: "missing `data` line".into(),
            })
        }
    }
    if !(dlat > 0.0 && dlon > 0.0) || nlat == 0 || nlon == 0 || k == 0 {
        return Err(DataError::Malformed {
            line: 0,
            message: "grid spacing and dimensions must be positive".into(),
        });
    }
    let mut values = vec![f64::NAN; nlat * nlon * k];
    let mut seen = vec![false; nlat * nlon];
    for (line, text) in it {
        let mut parts = text.split_whitespace();
        let bad = |message: String| DataError::Malformed { line, message };
        let i: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad row index".into()))?;
        let j: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad column index".into()))?;
        if i >= nlat || j >= nlon {
            return Err(bad(format!("grid point ({i}, {j}) out of range")));
        }
        let idx = i * nlon + j;
        if seen[idx] {
            return Err(bad(format!("grid point ({i}, {j}) repeated")));
        }
        seen[idx] = true;
        let row: Vec<f64> = parts
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("cannot parse {s:?}"))))
            .collect::<Result<_, _>>()?;
        if row.len() != k {
            return Err(bad(format!("expected {k} member values, found {}", row.len())));
        }
        values[idx * k..(idx + 1) * k].copy_from_slice(&row);
    }
    if let Some(idx) = seen.iter().position(|s| !s) {
        return Err(DataError::Malformed {
            line: 0,
            message: format!("grid point ({}, {}) missing", idx / nlon, idx % nlon),
        });
    }
    GriddedEnsembleField::new(
        GridSpec {
            lat0,
            lon0,
            dlat,
            dlon,
            nlat,
            nlon,
        },
        run_date,
        lead_hours,
        k,
        values,
    )
}

pub fn read_grid(path: &Path) -> Result<GriddedEnsembleField, DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    read_grid_from(file)
}

fn read_csv_rows(path: &Path, expected: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>, DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let header = rdr.headers().map_err(|e| DataError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(DataError::Malformed {
            line: 1,
            message: format!("header must be {}", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.kind() {
                csv::ErrorKind::Utf8 { .. } => DataError::NonUtf8 { line },
                _ => DataError::Malformed {
                    line,
                    message: e.to_string(),
                },
            }
        })?;
        rows.push((rec.position().map_or(0, |p| p.line()), rec));
    }
    Ok(rows)
}

/// Station list CSV: `station_id,latitude,longitude`.
pub fn read_stations(path: &Path) -> Result<Vec<Station>, DataError> {
    read_csv_rows(path, &["station_id", "latitude", "longitude"])?
        .into_iter()
        .map(|(line, r)| {
            let num = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| DataError::Malformed {
                    line,
                    message: format!("cannot parse {s:?}"),
                })
            };
            Ok(Station {
                station_id: r[0].to_string(),
                latitude: num(&r[1])?,
                longitude: num(&r[2])?,
            })
        })
        .collect()
}

/// Observation CSV: `station_id,date,observation` (daily maximum wind
/// speed).
pub fn read_observations(path: &Path) -> Result<HashMap<(String, NaiveDate), f64>, DataError> {
    let mut out = HashMap::new();
    for (line, r) in read_csv_rows(path, &["station_id", "date", "observation"])? {
        let bad = |message: String| DataError::Malformed { line, message };
        let date = NaiveDate::parse_from_str(r[1].trim(), "%Y-%m-%d")
            .map_err(|_| bad(format!("date: {:?} is not YYYY-MM-DD", &r[1])))?;
        let y: f64 = r[2]
            .trim()
            .parse()
            .map_err(|_| bad(format!("cannot parse {:?}", &r[2])))?;
        out.insert((r[0].to_string(), date), y);
    }
    Ok(out)
}

/// Turn gridded step fields into station cases for one lead day: each
/// step is interpolated to the stations, then reduced to the daily
/// maximum member by member. The case is valid on run date + (L − 1)
/// days. Station-days without an observation are dropped.
pub fn build_cases(
    fields: &[GriddedEnsembleField],
    stations: &[Station],
    observations: &HashMap<(String, NaiveDate), f64>,
    lead_days: u32,
    step_hours: u32,
) -> Result<Dataset, DataError> {
    let mut by_run: BTreeMap<NaiveDate, Vec<&GriddedEnsembleField>> = BTreeMap::new();
    for f in fields {
        by_run.entry(f.run_date).or_default().push(f);
    }
    let mut cases = Vec::new();
    for (run_date, run_fields) in by_run {
        let valid_date = run_date + Days::new(u64::from(lead_days - 1));
        for st in stations {
            let Some(&observation) = observations.get(&(st.station_id.clone(), valid_date)) else {
                continue;
            };
            let mut steps = BTreeMap::new();
            for f in &run_fields {
                steps.insert(f.lead_hours, bilinear_to_station(f, st)?);
            }
            let members = daily_max_reduce(&steps, lead_days, step_hours)?;
            cases.push(ForecastCase {
                station_id: st.station_id.clone(),
                valid_date,
                lead_days,
                members,
                observation,
            });
        }
    }
    Dataset::new(cases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field(nlat: usize, nlon: usize, k: usize, f: impl Fn(f64, f64, usize) -> f64) -> GriddedEnsembleField {
        let grid = GridSpec {
            lat0: 45.0,
            lon0: 5.0,
            dlat: 0.5,
            dlon: 0.25,
            nlat,
            nlon,
        };
        let mut values = Vec::new();
        for i in 0..nlat {
            for j in 0..nlon {
                for m in 0..k {
                    values.push(f(grid.lat0 + i as f64 * grid.dlat, grid.lon0 + j as f64 * grid.dlon, m));
                }
            }
        }
        GriddedEnsembleField::new(grid, NaiveDate::from_ymd_opt(2011, 1, 1).unwrap(), 24, k, values).unwrap()
    }

    fn station(lat: f64, lon: f64) -> Station {
        Station {
            station_id: "X".into(),
            latitude: lat,
            longitude: lon,
        }
    }

    #[test]
    fn grid_point_returns_its_members() {
        let f = field(3, 4, 2, |la, lo, m| la * 10.0 + lo + m as f64);
        let v = bilinear_to_station(&f, &station(45.5, 5.5)).unwrap();
        assert_eq!(v, f.point(1, 2).to_vec());
        let corner = bilinear_to_station(&f, &station(46.0, 5.75)).unwrap();
        assert_eq!(corner, f.point(2, 3).to_vec());
    }

    #[test]
    fn cell_centre_averages_corners() {
        let f = field(2, 2, 1, |la, _, _| if la > 45.0 { 4.0 } else { 0.0 });
        let v = bilinear_to_station(&f, &station(45.25, 5.125)).unwrap();
        assert_eq!(v, vec![2.0]);
    }

    #[test]
    fn separable_oracle_and_affine_exactness() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = field(5, 6, 3, |la, lo, m| {
            ((la * 3.1 + lo * 7.3 + m as f64).sin() + 2.0) * 4.0
        });
        let affine = field(5, 6, 1, |la, lo, _| 1.5 + 0.3 * la - 2.0 * lo);
        for _ in 0..200 {
            let lat = rng.random_range(45.0..47.0);
            let lon = rng.random_range(5.0..6.25);
            let got = bilinear_to_station(&f, &station(lat, lon)).unwrap();
            // lat-then-lon linear interpolation
            let u = (lat - 45.0) / 0.5;
            let v = (lon - 5.0) / 0.25;
            let (i, j) = ((u.floor() as usize).min(3), (v.floor() as usize).min(4));
            let (t, s) = (u - i as f64, v - j as f64);
            for (m, g) in got.iter().enumerate() {
                let left = f.point(i, j)[m] + t * (f.point(i + 1, j)[m] - f.point(i, j)[m]);
                let right = f.point(i, j + 1)[m] + t * (f.point(i + 1, j + 1)[m] - f.point(i, j + 1)[m]);
                let oracle = left + s * (right - left);
                assert!((g - oracle).abs() < 1e-12);
            }
            let a = bilinear_to_station(&affine, &station(lat, lon)).unwrap()[0];
            assert!((a - (1.5 + 0.3 * lat - 2.0 * lon)).abs() < 1e-10);
        }
    }

    #[test]
    fn outside_station_is_rejected() {
        let f = field(2, 2, 1, |_, _, _| 1.0);
        assert!(matches!(
            bilinear_to_station(&f, &station(44.0, 5.1)),
            Err(DataError::OutsideGrid { .. })
        ));
    }

    #[test]
    fn daily_max_over_lead_window() {
        let mut steps = BTreeMap::new();
        for (h, v) in [
            (3, 2.0),
            (6, 5.0),
            (9, 3.0),
            (12, 1.0),
            (15, 1.0),
            (18, 1.0),
            (21, 1.0),
            (24, 1.0),
        ] {
            steps.insert(h, vec![v, 4.0]);
        }
        assert_eq!(daily_max_reduce(&steps, 1, 3).unwrap(), vec![5.0, 4.0]);
        steps.remove(&12);
        steps.remove(&21);
        match daily_max_reduce(&steps, 1, 3) {
            Err(DataError::MissingSteps { missing, .. }) => assert_eq!(missing, vec![12, 21]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn daily_max_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut steps = BTreeMap::new();
        for h in (30..=48).step_by(6) {
            steps.insert(h, (0..5).map(|_| rng.random_range(0.0..20.0)).collect::<Vec<f64>>());
        }
        let got = daily_max_reduce(&steps, 2, 6).unwrap();
        for m in 0..5 {
            let mut col: Vec<f64> = steps.values().map(|v| v[m]).collect();
            col.sort_by(|a, b| b.total_cmp(a));
            assert_eq!(got[m], col[0]);
        }
    }

    #[test]
    fn grid_text_round_trip() {
        let text = "# test\nrun_date 2011-02-03\nlead_hours 6\nlat0 45\nlon0 5\ndlat 1\ndlon 1\nnlat 2\nnlon 2\nmembers 2\ndata\n0 0 1 2\n0 1 3 4\n1 0 5 6\n1 1 7 8\n";
        let f = read_grid_from(text.as_bytes()).unwrap();
        assert_eq!(f.lead_hours, 6);
        assert_eq!(f.point(1, 0), &[5.0, 6.0]);
        let missing = "run_date 2011-02-03\nlead_hours 6\nlat0 45\nlon0 5\ndlat 1\ndlon 1\nnlat 2\nnlon 2\nmembers 2\ndata\n0 0 1 2\n";
        assert!(read_grid_from(missing.as_bytes()).is_err());
    }
}

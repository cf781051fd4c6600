//! Comma-separated trajectory and centerline files.
//!
//! Trajectories carry a `t,lat,lon` or `t,x,y` header; centerlines the same
//! without `t`. Planar files have no zone of their own, so callers pass one.

use std::path::Path;

use super::{
    latlon_to_utm_in_zone, zone_for, Centerline, GeoPoint, Trajectory, TrajectoryError,
    TrajectorySample, UtmPoint, UtmZone,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoordinateKind {
    LatLon,
    Planar,
}

fn io_err(path: &Path, source: std::io::Error) -> TrajectoryError {
    TrajectoryError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> TrajectoryError {
    TrajectoryError::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> TrajectoryError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => parse_err(path, line, format!("{other:?}")),
    }
}

/// Reads rows of `ncols` numbers after classifying the header.
fn read_rows(
    path: &Path,
    with_time: bool,
) -> Result<(CoordinateKind, Vec<(u64, Vec<f64>)>), TrajectoryError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let kind = match (with_time, h.as_slice()) {
        (true, ["t", "lat", "lon"]) | (false, ["lat", "lon"]) => CoordinateKind::LatLon,
        (true, ["t", "x", "y"]) | (false, ["x", "y"]) => CoordinateKind::Planar,
        _ => return Err(TrajectoryError::BadHeader(header)),
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, line, format!("bad number '{f}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((line, vals));
    }
    Ok((kind, rows))
}

/// Converts a coordinate pair into UTM. Lat/lon pairs use `zone` when given,
/// otherwise the zone of the first point in the file (stored in `first`).
fn to_utm(
    kind: CoordinateKind,
    a: f64,
    b: f64,
    zone: Option<UtmZone>,
    first: &mut Option<UtmZone>,
) -> Result<UtmPoint, TrajectoryError> {
    match kind {
        CoordinateKind::Planar => Ok(UtmPoint {
            easting: a,
            northing: b,
            zone: zone.ok_or(TrajectoryError::MissingZone)?,
        }),
        CoordinateKind::LatLon => {
            let p = GeoPoint { lat: a, lon: b };
            let z = match zone.or(*first) {
                Some(z) => z,
                None => *first.insert(zone_for(p)?),
            };
            latlon_to_utm_in_zone(p, z)
        }
    }
}

pub fn read_trajectory_csv(
    path: impl AsRef<Path>,
    label: impl Into<String>,
    zone: Option<UtmZone>,
) -> Result<Trajectory, TrajectoryError> {
    let path = path.as_ref();
    let (kind, rows) = read_rows(path, true)?;
    let mut first = None;
    let samples = rows
        .into_iter()
        .map(|(_, r)| {
            Ok(TrajectorySample {
                t: r[0],
                position: to_utm(kind, r[1], r[2], zone, &mut first)?,
            })
        })
        .collect::<Result<Vec<_>, TrajectoryError>>()?;
    Trajectory::new(label, samples)
}

pub fn read_centerline_csv(
    path: impl AsRef<Path>,
    zone: Option<UtmZone>,
) -> Result<Centerline, TrajectoryError> {
    let path = path.as_ref();
    let (kind, rows) = read_rows(path, false)?;
    let mut first = None;
    let points = rows
        .into_iter()
        .map(|(_, r)| to_utm(kind, r[0], r[1], zone, &mut first))
        .collect::<Result<Vec<_>, _>>()?;
    Centerline::new(points)
}

fn write_lines(path: &Path, header: &str, body: impl Iterator<Item = String>) -> Result<(), TrajectoryError> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let emit = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for line in body {
            writeln!(w, "{line}")?;
        }
        w.flush()
    };
    emit().map_err(|e| io_err(path, e))
}

/// Writes planar `t,x,y`; values use the shortest exact decimal form.
pub fn write_trajectory_csv(path: impl AsRef<Path>, traj: &Trajectory) -> Result<(), TrajectoryError> {
    write_lines(
        path.as_ref(),
        "t,x,y",
        traj.samples()
            .iter()
            .map(|s| format!("{},{},{}", s.t, s.position.easting, s.position.northing)),
    )
}

pub fn write_centerline_csv(path: impl AsRef<Path>, c: &Centerline) -> Result<(), TrajectoryError> {
    write_lines(
        path.as_ref(),
        "x,y",
        c.points().iter().map(|p| format!("{},{}", p.easting, p.northing)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z() -> UtmZone {
        UtmZone::new(52, true).unwrap()
    }

    #[test]
    fn planar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("traj.csv");
        let traj = Trajectory::from_planar("a", z(), (0..20).map(|i| (i as f64 * 0.1, 1.0 / 3.0 + i as f64, 2.5))).unwrap();
        write_trajectory_csv(&p, &traj).unwrap();
        let back = read_trajectory_csv(&p, "a", Some(z())).unwrap();
        assert_eq!(back, traj);
        assert!(matches!(read_trajectory_csv(&p, "a", None), Err(TrajectoryError::MissingZone)));
    }

    #[test]
    fn latlon_uses_first_point_zone() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gps.csv");
        std::fs::write(&p, "t,lat,lon\n0,35.6524837116667,128.397828661667\n1,35.65249,128.39783\n").unwrap();
        let t = read_trajectory_csv(&p, "gps", None).unwrap();
        assert_eq!(t.zone(), z());
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn centerline_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "x, y\n0,0\n10,0\n10,5\n").unwrap();
        let c = read_centerline_csv(&p, Some(z())).unwrap();
        assert_eq!(c.length(), 15.0);
        let q = dir.path().join("c2.csv");
        write_centerline_csv(&q, &c).unwrap();
        assert_eq!(read_centerline_csv(&q, Some(z())).unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "time,x,y\n0,0,0\n").unwrap();
        assert!(matches!(read_trajectory_csv(&p, "b", Some(z())), Err(TrajectoryError::BadHeader(_))));
        std::fs::write(&p, "t,x,y\n0,0,0\n1,abc,0\n").unwrap();
        assert!(matches!(read_trajectory_csv(&p, "b", Some(z())), Err(TrajectoryError::Parse { line: 3, .. })));
        std::fs::write(&p, "t,x,y\n0,0,0\n1,0\n").unwrap();
        assert!(matches!(read_trajectory_csv(&p, "b", Some(z())), Err(TrajectoryError::Parse { .. })));
        assert!(matches!(
            read_trajectory_csv(dir.path().join("missing.csv"), "b", Some(z())),
            Err(TrajectoryError::Io { .. })
        ));
    }
}

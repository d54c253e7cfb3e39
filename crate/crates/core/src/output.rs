//! Snapshot, series and polyline writers.
//!
//! Floats are written with 17 significant digits so that parsing a file back
//! reproduces the values bit for bit.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dynamics::SimState;
use crate::forces::min_self_distance;
use crate::geometry::{
    enclosed_area_planar, frenet, Curve, GeometryError, Point, DEFAULT_KAPPA_THRESHOLD,
    DEFAULT_PLANARITY_TOLERANCE,
};

pub const SNAPSHOT_HEADER: &str = "k,u,x,y,z,rho,kappa,d";
pub const SERIES_HEADER: &str = "t,length,mass,area_planar,min_self_distance,dt";
pub const SERIES_FILE: &str = "series.csv";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn snapshot_path(dir: &Path, index: usize, ext: &str) -> PathBuf {
    dir.join(format!("snap_{index}.{ext}"))
}

/// Writes `snap_<index>.csv`, one row per node.
pub fn write_snapshot_csv(
    dir: &Path,
    index: usize,
    state: &SimState,
) -> Result<PathBuf, OutputError> {
    let fd = frenet(&state.curve, DEFAULT_KAPPA_THRESHOLD)?;
    let path = snapshot_path(dir, index, "csv");
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    let m = state.len();
    let mut body = String::with_capacity(160 * (m + 1));
    body.push_str(SNAPSHOT_HEADER);
    body.push('\n');
    for (k, x) in state.curve.nodes().iter().enumerate() {
        let row = [
            num(k as f64 / m as f64),
            num(x.x),
            num(x.y),
            num(x.z),
            num(state.rho.values()[k]),
            num(fd.curvature[k]),
            num(fd.lengths.dual[k]),
        ];
        body.push_str(&format!("{k},{}\n", row.join(",")));
    }
    w.write_all(body.as_bytes()).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

/// Writes `snap_<index>.obj`: vertex lines and one closed line element.
pub fn write_snapshot_obj(dir: &Path, index: usize, curve: &Curve) -> Result<PathBuf, OutputError> {
    let path = snapshot_path(dir, index, "obj");
    let mut body = String::new();
    for p in curve.nodes() {
        body.push_str(&format!("v {} {} {}\n", num(p.x), num(p.y), num(p.z)));
    }
    body.push('l');
    for k in 1..=curve.len() {
        body.push_str(&format!(" {k}"));
    }
    body.push_str(" 1\n");
    fs::write(&path, body).map_err(io_err(&path))?;
    Ok(path)
}

/// Contents of a snapshot CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub u: Vec<f64>,
    pub nodes: Vec<Point>,
    pub rho: Vec<f64>,
    pub kappa: Vec<f64>,
    pub d: Vec<f64>,
}

impl Snapshot {
    pub fn curve(&self) -> Result<Curve, GeometryError> {
        Curve::new(self.nodes.clone())
    }
}

pub fn parse_snapshot(path: &Path) -> Result<Snapshot, OutputError> {
    let file = File::open(path).map_err(io_err(path))?;
    let bad = |line: usize, message: String| OutputError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut snap = Snapshot {
        u: Vec::new(),
        nodes: Vec::new(),
        rho: Vec::new(),
        kappa: Vec::new(),
        d: Vec::new(),
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if i == 0 {
            if line.trim() != SNAPSHOT_HEADER {
                return Err(bad(1, format!("expected header `{SNAPSHOT_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(i + 1, e.to_string()))?;
        if fields.len() != 7 {
            return Err(bad(
                i + 1,
                format!("expected 8 columns, got {}", fields.len() + 1),
            ));
        }
        snap.u.push(fields[0]);
        snap.nodes.push(Point::new(fields[1], fields[2], fields[3]));
        snap.rho.push(fields[4]);
        snap.kappa.push(fields[5]);
        snap.d.push(fields[6]);
    }
    Ok(snap)
}

/// Reads the vertices of an OBJ polyline.
pub fn parse_obj_vertices(path: &Path) -> Result<Vec<Point>, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        if it.next() != Some("v") {
            continue;
        }
        let c: Vec<f64> = it
            .take(3)
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e: std::num::ParseFloatError| OutputError::Format {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        if c.len() != 3 {
            return Err(OutputError::Format {
                path: path.to_path_buf(),
                line: i + 1,
                message: "vertex needs three coordinates".into(),
            });
        }
        out.push(Point::new(c[0], c[1], c[2]));
    }
    Ok(out)
}

/// One row of `series.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub length: f64,
    pub mass: f64,
    /// Area of the projection onto the least-squares plane.
    pub area_planar: f64,
    pub min_self_distance: f64,
    /// Last accepted step size, 0 before the first step.
    pub dt: f64,
}

impl SeriesRow {
    pub fn measure(state: &SimState, dt: f64) -> Result<Self, GeometryError> {
        let lengths = state.curve.local_lengths()?;
        let mass = state
            .rho
            .values()
            .iter()
            .zip(&lengths.dual)
            .map(|(r, d)| r * d)
            .sum();
        Ok(Self {
            t: state.t,
            length: lengths.total(),
            mass,
            area_planar: enclosed_area_planar(&state.curve, DEFAULT_PLANARITY_TOLERANCE)?.area,
            min_self_distance: min_self_distance(&state.curve),
            dt,
        })
    }

    fn to_csv(self) -> String {
        [
            self.t,
            self.length,
            self.mass,
            self.area_planar,
            self.min_self_distance,
            self.dt,
        ]
        .map(num)
        .join(",")
    }
}

/// Appends rows to `series.csv`, flushing after each so partial runs keep their data.
pub struct SeriesWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl SeriesWriter {
    pub fn create(dir: &Path) -> Result<Self, OutputError> {
        let path = dir.join(SERIES_FILE);
        let file = File::create(&path).map_err(io_err(&path))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{SERIES_HEADER}").map_err(io_err(&path))?;
        Ok(Self { path, out })
    }

    pub fn append(&mut self, row: &SeriesRow) -> Result<(), OutputError> {
        writeln!(self.out, "{}", row.to_csv()).map_err(io_err(&self.path))?;
        self.out.flush().map_err(io_err(&self.path))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn parse_series(path: &Path) -> Result<Vec<SeriesRow>, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| OutputError::Format {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if v.len() != 6 {
                return Err(OutputError::Format {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("expected 6 columns, got {}", v.len()),
                });
            }
            Ok(SeriesRow {
                t: v[0],
                length: v[1],
                mass: v[2],
                area_planar: v[3],
                min_self_distance: v[4],
                dt: v[5],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ScalarField;
    use std::f64::consts::PI;

    fn state(m: usize) -> SimState {
        let curve = Curve::sample(m, |u| {
            Point::new(
                (2.0 * PI * u).cos(),
                (2.0 * PI * u).sin(),
                0.1 * (6.0 * PI * u).sin(),
            )
        })
        .unwrap();
        let rho = ScalarField::sample(m, |u| 1.0 / 3.0 + (2.0 * PI * u).sin());
        SimState::new(curve, rho, 0.125).unwrap()
    }

    #[test]
    fn square_circle_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let curve = Curve::sample(4, |u| {
            Point::new((2.0 * PI * u).cos(), (2.0 * PI * u).sin(), 0.0)
        })
        .unwrap();
        let st = SimState::new(curve, ScalarField::sample(4, |_| 1.0), 0.0).unwrap();
        let path = write_snapshot_csv(dir.path(), 0, &st).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(text.lines().next(), Some(SNAPSHOT_HEADER));
        let snap = parse_snapshot(&path).unwrap();
        // at (0, 1): e_k = (-1, 1), e_{k+1} = (-1, -1), so kN = (0, -2) / (sqrt 2)^2
        let side = 2f64.sqrt();
        let oracle = 1.0;
        for k in 0..4 {
            assert!((snap.kappa[k] - oracle).abs() < 1e-14);
            assert!((snap.d[k] - side).abs() < 1e-14);
        }
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let st = state(37);
        let path = write_snapshot_csv(dir.path(), 3, &st).unwrap();
        assert!(path.ends_with("snap_3.csv"));
        let snap = parse_snapshot(&path).unwrap();
        assert_eq!(snap.nodes, st.curve.nodes());
        assert_eq!(snap.rho, st.rho.values());
        assert_eq!(snap.u[5], 5.0 / 37.0);
    }

    #[test]
    fn obj_lists_vertices_and_closes() {
        let dir = tempfile::tempdir().unwrap();
        let st = state(5);
        let path = write_snapshot_obj(dir.path(), 0, &st.curve).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 5);
        assert_eq!(text.lines().last(), Some("l 1 2 3 4 5 1"));
        assert_eq!(parse_obj_vertices(&path).unwrap(), st.curve.nodes());
    }

    #[test]
    fn series_mass_is_dual_weighted_sum() {
        let st = state(64);
        let row = SeriesRow::measure(&st, 1e-3).unwrap();
        let l = st.curve.local_lengths().unwrap();
        let mass: f64 = (0..64).map(|k| st.rho.values()[k] * l.dual[k]).sum();
        assert_eq!(row.mass, mass);
        assert_eq!(row.mass, st.mass().unwrap());
        assert_eq!(row.t, 0.125);

        let dir = tempfile::tempdir().unwrap();
        let mut w = SeriesWriter::create(dir.path()).unwrap();
        w.append(&row).unwrap();
        w.append(&SeriesRow { t: 0.5, ..row }).unwrap();
        let back = parse_series(w.path()).unwrap();
        assert_eq!(back, vec![row, SeriesRow { t: 0.5, ..row }]);
    }

    #[test]
    fn io_errors_carry_the_path() {
        let err = parse_snapshot(Path::new("/nonexistent/snap_0.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/snap_0.csv"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "k,u\n").unwrap();
        assert!(matches!(
            parse_snapshot(&p),
            Err(OutputError::Format { line: 1, .. })
        ));
    }
}

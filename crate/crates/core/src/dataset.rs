//! Recorded or simulated runs: scan logs, odometry and ground truth.
//!
//! Scan log, one scan per line:
//!
//! ```text
//! t theta_0 r_0 l_0 theta_1 r_1 l_1 ...
//! ```
//!
//! with `r = -1` for a reading without range and labels coded
//! 0 = none, 1 = wall, 2 = door, 3 = window. Odometry is a CSV of
//! `t,dx,dy,dtheta` relative motions expressed in the previous robot frame;
//! whitespace separators are accepted as well.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{read_trajectory_csv, write_trajectory_csv, TimedPose};
use crate::floorplan::{label_code, Label};
use crate::mcl::OdometryDelta;
use crate::sensor::{SedarReading, SedarScan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryRecord {
    pub t: f64,
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl OdometryRecord {
    pub fn delta(&self) -> OdometryDelta {
        OdometryDelta::from_relative(self.dx, self.dy, self.dtheta)
    }
}

fn numbers(line: &str, loc: &dyn Fn() -> String) -> Result<Vec<f64>> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| Error::parse(loc(), format!("`{f}` is not a number")))
        })
        .collect()
}

pub fn parse_scan_log(text: &str, source: &str) -> Result<Vec<SedarScan>> {
    let mut scans = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = || format!("{source}:{}", n + 1);
        let v = numbers(line, &loc)?;
        if v.len() < 4 || (v.len() - 1) % 3 != 0 {
            return Err(Error::parse(loc(), "expected `t` followed by bearing/range/label triples"));
        }
        let readings = v[1..]
            .chunks_exact(3)
            .map(|c| {
                let range = if c[1] == -1.0 { None } else { Some(c[1]) };
                let label = if c[2].fract() == 0.0 && (0.0..=255.0).contains(&c[2]) {
                    Label::from_code(c[2] as u8)
                } else {
                    None
                };
                let label = label.ok_or_else(|| Error::parse(loc(), format!("unknown label code {}", c[2])))?;
                Ok(SedarReading::new(c[0], range, label))
            })
            .collect::<Result<Vec<_>>>()?;
        scans.push(SedarScan::new(readings, v[0]).map_err(|e| Error::parse(loc(), e.to_string()))?);
    }
    Ok(scans)
}

pub fn scan_log(scans: &[SedarScan]) -> String {
    let mut out = String::new();
    for scan in scans {
        let _ = write!(out, "{}", scan.timestamp);
        for r in scan.readings() {
            let range = r.range().unwrap_or(-1.0);
            let _ = write!(out, " {} {} {}", r.bearing, range, label_code(r.label));
        }
        out.push('\n');
    }
    out
}

pub fn parse_odometry(text: &str, source: &str) -> Result<Vec<OdometryRecord>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(|c: char| c.is_ascii_alphabetic()) {
            continue;
        }
        let loc = || format!("{source}:{}", n + 1);
        let v = numbers(line, &loc)?;
        if v.len() != 4 {
            return Err(Error::parse(loc(), format!("expected 4 fields, found {}", v.len())));
        }
        out.push(OdometryRecord {
            t: v[0],
            dx: v[1],
            dy: v[2],
            dtheta: v[3],
        });
    }
    Ok(out)
}

pub fn odometry_csv(records: &[OdometryRecord]) -> String {
    let mut out = String::from("t,dx,dy,dtheta\n");
    for r in records {
        let _ = writeln!(out, "{},{},{},{}", r.t, r.dx, r.dy, r.dtheta);
    }
    out
}

/// File names of a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub scans: PathBuf,
    pub odometry: PathBuf,
    pub truth: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            scans: dir.join("scans.log"),
            odometry: dir.join("odometry.csv"),
            truth: dir.join("truth.csv"),
        }
    }
}

/// Synchronised run: `odometry[i]` moves the robot from pose `i - 1` to pose
/// `i` (the first record is zero) and `scans[i]` is taken at pose `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scans: Vec<SedarScan>,
    pub odometry: Vec<OdometryRecord>,
    pub truth: Option<Vec<TimedPose>>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.scans.is_empty() {
            return Err(Error::InvalidArgument("dataset has no scans".into()));
        }
        if self.scans.len() != self.odometry.len() {
            return Err(Error::InvalidArgument(format!(
                "{} scans but {} odometry records",
                self.scans.len(),
                self.odometry.len()
            )));
        }
        if let Some(truth) = &self.truth {
            if truth.len() != self.scans.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} scans but {} ground-truth poses",
                    self.scans.len(),
                    truth.len()
                )));
            }
        }
        Ok(())
    }

    pub fn load(paths: &DatasetPaths) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let scans = parse_scan_log(&read(&paths.scans)?, &paths.scans.display().to_string())?;
        let odometry = parse_odometry(&read(&paths.odometry)?, &paths.odometry.display().to_string())?;
        let truth = if paths.truth.exists() {
            Some(read_trajectory_csv(&paths.truth)?)
        } else {
            None
        };
        let ds = Self { scans, odometry, truth };
        ds.validate()?;
        Ok(ds)
    }

    pub fn save(&self, paths: &DatasetPaths) -> Result<()> {
        for p in [&paths.scans, &paths.odometry, &paths.truth] {
            if let Some(dir) = p.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
        }
        std::fs::write(&paths.scans, scan_log(&self.scans)).map_err(|e| Error::io(&paths.scans, e))?;
        std::fs::write(&paths.odometry, odometry_csv(&self.odometry)).map_err(|e| Error::io(&paths.odometry, e))?;
        if let Some(truth) = &self.truth {
            write_trajectory_csv(&paths.truth, truth)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_log_round_trip() {
        let scans = vec![
            SedarScan::new(
                vec![
                    SedarReading::new(-0.5, Some(2.25), Some(Label::Door)),
                    SedarReading::new(0.1, None, None),
                    SedarReading::new(1.0 / 3.0, Some(0.1), Some(Label::Window)),
                ],
                0.1,
            )
            .unwrap(),
            SedarScan::new(vec![SedarReading::new(0.0, Some(9.0), Some(Label::Wall))], 0.2).unwrap(),
        ];
        let text = scan_log(&scans);
        assert!(text.starts_with("0.1 -0.5 2.25 2 0.1 -1 0 "));
        assert_eq!(parse_scan_log(&text, "x").unwrap(), scans);
    }

    #[test]
    fn scan_log_errors() {
        assert!(parse_scan_log("0.0 0.1 1.0\n", "x").is_err());
        assert!(parse_scan_log("0.0 0.1 1.0 7\n", "x").is_err());
        assert!(parse_scan_log("0.0 0.1 1.0 1.5\n", "x").is_err());
        assert!(parse_scan_log("0.0 0.2 1.0 1 0.1 1.0 1\n", "x").is_err());
        assert!(parse_scan_log("# comment\n\n0.0 0.1 -1 0\n", "x").is_ok());
    }

    #[test]
    fn odometry_round_trip_and_separators() {
        let recs = vec![
            OdometryRecord { t: 0.0, dx: 0.0, dy: 0.0, dtheta: 0.0 },
            OdometryRecord { t: 0.1, dx: 0.08, dy: -0.001, dtheta: 0.05 },
        ];
        assert_eq!(parse_odometry(&odometry_csv(&recs), "x").unwrap(), recs);
        assert_eq!(parse_odometry("0.1 0.08 -0.001 0.05\n", "x").unwrap()[0], recs[1]);
        assert!(parse_odometry("0.1,0.08\n", "x").is_err());
    }

    #[test]
    fn dataset_save_load() {
        let dir = tempfile::tempdir().unwrap();
        let paths = DatasetPaths::in_dir(dir.path());
        let ds = Dataset {
            scans: vec![SedarScan::new(vec![SedarReading::new(0.0, Some(1.0), None)], 0.0).unwrap()],
            odometry: vec![OdometryRecord { t: 0.0, dx: 0.0, dy: 0.0, dtheta: 0.0 }],
            truth: Some(vec![TimedPose::new(0.0, crate::geometry::Pose2D::new(1.0, 2.0, 0.5))]),
        };
        ds.save(&paths).unwrap();
        assert_eq!(Dataset::load(&paths).unwrap(), ds);
        let bad = Dataset { odometry: vec![], ..ds };
        assert!(bad.validate().is_err());
    }
}

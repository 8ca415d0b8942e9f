// SPDX-License-Identifier: Apache-2.0

//! CSV and JSON file formats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::camera_map::{BoundingBox, MapperPair};
use crate::error::{Error, Result};
use crate::fusion::{Detection, Source};
use crate::point_cloud::{PointRecord, RawCloud, RawPoint};

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let (line, column) = match e.position() {
        Some(p) => (p.line() as usize, 1),
        None => (0, 0),
    };
    let message = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => e.to_string(),
    };
    Error::Parse {
        path: path.display().to_string(),
        line,
        column,
        message,
    }
}

pub fn read_csv_from<T: DeserializeOwned>(reader: impl Read, path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(|e| csv_error(path, e))).collect()
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::from(e).at_path(path))?;
    read_csv_from(BufReader::new(f), path)
}

pub fn write_csv_to<T: Serialize>(writer: impl Write, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a CSV with an explicit header, so empty files still carry one.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::from(e).at_path(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(f));
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::from(e).at_path(path))
}

pub const CLOUD_HEADER: [&str; 5] = ["x", "y", "z", "intensity", "beam"];

pub fn write_cloud_csv(path: &Path, cloud: &RawCloud) -> Result<()> {
    write_csv(path, &CLOUD_HEADER, cloud.points.iter().map(|p| PointRecord::from(*p)))
}

pub fn parse_cloud_csv(reader: impl Read, path: &Path, frame_id: u64, timestamp: f64) -> Result<RawCloud> {
    let records: Vec<PointRecord> = read_csv_from(reader, path)?;
    let points = records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            RawPoint::try_from(r).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                column: 1,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawCloud {
        frame_id,
        timestamp,
        points,
    })
}

/// Reads a frame from `.csv` (point rows) or `.json` (frame container).
pub fn read_cloud(path: &Path, frame_id: u64, timestamp: f64) -> Result<RawCloud> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            let cloud: RawCloud = read_json(path)?;
            for p in &cloud.points {
                if let RawPoint::Return(p) = p {
                    p.validate().map_err(|e| e.at_path(path))?;
                }
            }
            Ok(cloud)
        }
        _ => {
            let f = File::open(path).map_err(|e| Error::from(e).at_path(path))?;
            parse_cloud_csv(BufReader::new(f), path, frame_id, timestamp)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub frame_id: u64,
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
    pub conf: f64,
}

pub const BOX_HEADER: [&str; 6] = ["frame_id", "xmin", "ymin", "xmax", "ymax", "conf"];

impl BoxRecord {
    pub fn new(frame_id: u64, b: &BoundingBox) -> Self {
        Self {
            frame_id,
            xmin: b.xmin,
            ymin: b.ymin,
            xmax: b.xmax,
            ymax: b.ymax,
            conf: b.confidence,
        }
    }

    pub fn to_box(&self, image: (f64, f64)) -> Result<BoundingBox> {
        BoundingBox::new(self.xmin, self.ymin, self.xmax, self.ymax, self.conf, image)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
    pub conf: f64,
    pub dist_m: f64,
    pub angle_deg: f64,
}

pub const PAIR_HEADER: [&str; 7] = ["xmin", "ymin", "xmax", "ymax", "conf", "dist_m", "angle_deg"];

impl PairRecord {
    pub fn new(p: &MapperPair) -> Self {
        Self {
            xmin: p.bbox.xmin,
            ymin: p.bbox.ymin,
            xmax: p.bbox.xmax,
            ymax: p.bbox.ymax,
            conf: p.bbox.confidence,
            dist_m: p.distance,
            angle_deg: p.angle,
        }
    }

    pub fn to_pair(&self, image: (f64, f64)) -> Result<MapperPair> {
        Ok(MapperPair {
            bbox: BoundingBox::new(self.xmin, self.ymin, self.xmax, self.ymax, self.conf, image)?,
            distance: self.dist_m,
            angle: self.angle_deg,
        })
    }
}

pub fn read_pairs(path: &Path, image: (f64, f64)) -> Result<Vec<MapperPair>> {
    read_csv::<PairRecord>(path)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.to_pair(image).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                column: 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_pairs(path: &Path, pairs: &[MapperPair]) -> Result<()> {
    write_csv(path, &PAIR_HEADER, pairs.iter().map(PairRecord::new))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame_id: u64,
    pub source: Source,
    pub dist_m: f64,
    pub angle_deg: f64,
    pub conf: f64,
}

pub const DETECTION_HEADER: [&str; 5] = ["frame_id", "source", "dist_m", "angle_deg", "conf"];

impl DetectionRecord {
    pub fn new(frame_id: u64, d: &Detection) -> Self {
        Self {
            frame_id,
            source: d.source,
            dist_m: d.distance,
            angle_deg: d.angle,
            conf: d.confidence,
        }
    }

    pub fn detection(&self) -> Detection {
        Detection::new(self.dist_m, self.angle_deg, self.conf, self.source)
    }
}

pub const TRUTH_HEADER: [&str; 5] = ["frame_id", "object_id", "kind", "dist_m", "angle_deg"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::TruthObject;
    use crate::simulator::ObjectKind;

    #[test]
    fn cloud_csv_round_trip_with_no_returns() {
        let text = "x,y,z,intensity,beam\n1.0,2.0,-0.5,17,6\n,,,0,3\n";
        let cloud = parse_cloud_csv(text.as_bytes(), Path::new("mem.csv"), 4, 0.8).unwrap();
        assert_eq!(cloud.points.len(), 2);
        assert!(matches!(cloud.points[1], RawPoint::NoReturn { beam: 3 }));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_cloud_csv(&p, &cloud).unwrap();
        let back = read_cloud(&p, 4, 0.8).unwrap();
        assert_eq!(back, cloud);
    }

    #[test]
    fn malformed_row_names_line() {
        let text = "x,y,z,intensity,beam\n1.0,2.0,-0.5,17,6\n1.0,abc,0.0,3,2\n";
        let err = parse_cloud_csv(text.as_bytes(), Path::new("bad.csv"), 0, 0.0).unwrap_err();
        match err {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 3);
                assert_eq!(path, "bad.csv");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_beam_is_rejected() {
        let text = "x,y,z,intensity,beam\n1.0,2.0,-0.5,17,9\n";
        assert!(parse_cloud_csv(text.as_bytes(), Path::new("b.csv"), 0, 0.0).is_err());
    }

    #[test]
    fn truth_csv_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("truth.csv");
        let rows = vec![TruthObject {
            frame_id: 3,
            object_id: 9,
            kind: ObjectKind::PersonVest,
            distance: 5.5,
            angle: -2.0,
        }];
        write_csv(&p, &TRUTH_HEADER, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("frame_id,object_id,kind,dist_m,angle_deg\n3,9,person_vest,5.5,-2.0"));
        let back: Vec<TruthObject> = read_csv(&p).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn empty_detection_file_keeps_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_csv(&p, &DETECTION_HEADER, Vec::<DetectionRecord>::new()).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "frame_id,source,dist_m,angle_deg,conf\n");
        assert!(read_csv::<DetectionRecord>(&p).unwrap().is_empty());
    }
}

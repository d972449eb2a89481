use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, TrackPoint, TrajError, VehicleTrack};

pub const FEET_TO_METERS: f64 = 0.3048;

/// Native sampling time of the NGSIM recordings.
const NGSIM_DT: f64 = 0.1;

const REQUIRED: [&str; 5] = ["Vehicle_ID", "Frame_ID", "Local_X", "Local_Y", "v_Vel"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    #[default]
    Feet,
    Meters,
}

impl LengthUnit {
    fn factor(self) -> f64 {
        match self {
            LengthUnit::Feet => FEET_TO_METERS,
            LengthUnit::Meters => 1.0,
        }
    }
}

pub fn ingest_ngsim_csv(path: impl AsRef<Path>, unit: LengthUnit) -> Result<Vec<VehicleTrack>> {
    let file = std::fs::File::open(path)?;
    ingest_ngsim_reader(file, unit)
}

/// Reads NGSIM-style rows into per-vehicle tracks.
///
/// Positions and speed are converted to meters (and m/s). Rows may arrive in
/// any order; frames are sorted per vehicle. A duplicated frame is a data
/// error, and a gap in the frame sequence starts a new track for the same
/// vehicle so every track has consecutive frames.
pub fn ingest_ngsim_reader<R: Read>(reader: R, unit: LengthUnit) -> Result<Vec<VehicleTrack>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        // an empty file has no header row at all
        Err(e) if matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof) => {
            return Ok(Vec::new())
        }
        Err(e) => return Err(TrajError::Format(e.to_string())),
    };
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(REQUIRED) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TrajError::Format(format!("missing column {name}")))?;
    }
    let scale = unit.factor();

    let mut per_vehicle: BTreeMap<u64, Vec<TrackPoint>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        // header is line 1
        let row = i as u64 + 2;
        let rec = rec.map_err(|e| TrajError::Row { row, message: e.to_string() })?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let int = |c: usize| -> Result<u64> {
            let s = field(c);
            s.parse::<u64>()
                .or_else(|_| s.parse::<f64>().ok().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64).ok_or(()))
                .map_err(|_| TrajError::Row { row, message: format!("column {}: not a non-negative integer: {s:?}", headers.get(c).unwrap_or("?")) })
        };
        let float = |c: usize| -> Result<f64> {
            let s = field(c);
            s.parse::<f64>()
                .ok()
                .filter(|f| f.is_finite())
                .ok_or_else(|| TrajError::Row { row, message: format!("column {}: not a number: {s:?}", headers.get(c).unwrap_or("?")) })
        };
        let vehicle_id = int(cols[0])?;
        let frame_index = int(cols[1])?;
        let x = float(cols[2])? * scale;
        let y = float(cols[3])? * scale;
        let v = float(cols[4])? * scale;
        if v < 0.0 {
            return Err(TrajError::Row { row, message: format!("negative speed {v}") });
        }
        per_vehicle.entry(vehicle_id).or_default().push(TrackPoint {
            vehicle_id,
            frame_index,
            x,
            y,
            theta: 0.0,
            v,
        });
    }

    let mut tracks = Vec::new();
    for (vehicle_id, mut points) in per_vehicle {
        points.sort_by_key(|p| p.frame_index);
        if let Some(w) = points.windows(2).find(|w| w[0].frame_index == w[1].frame_index) {
            return Err(TrajError::Data {
                vehicle_id,
                message: format!("frames are not strictly increasing (frame {} repeated)", w[0].frame_index),
            });
        }
        let mut current: Vec<TrackPoint> = Vec::new();
        for p in points {
            if let Some(last) = current.last() {
                if p.frame_index != last.frame_index + 1 {
                    tracks.push(VehicleTrack { vehicle_id, dt: NGSIM_DT, points: std::mem::take(&mut current) });
                }
            }
            current.push(p);
        }
        if !current.is_empty() {
            tracks.push(VehicleTrack { vehicle_id, dt: NGSIM_DT, points: current });
        }
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn parse(s: &str) -> Result<Vec<VehicleTrack>> {
        ingest_ngsim_reader(s.as_bytes(), LengthUnit::Feet)
    }

    #[test]
    fn converts_feet_to_meters() {
        let t = parse("Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel\n5,100,32.8084,0,10\n").unwrap();
        assert_eq!(t.len(), 1);
        let p = t[0].points[0];
        assert_eq!((p.vehicle_id, p.frame_index), (5, 100));
        assert!((p.x - 10.0).abs() < 1e-6);
        assert_eq!(p.y, 0.0);
        assert!((p.v - 10.0 * FEET_TO_METERS).abs() < 1e-12);
    }

    #[test]
    fn meters_are_passed_through() {
        let t = ingest_ngsim_reader("Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel\n1,1,3.5,7,2\n".as_bytes(), LengthUnit::Meters).unwrap();
        assert_eq!(t[0].points[0].position(), [3.5, 7.0]);
    }

    #[test]
    fn empty_input() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel\n").unwrap().is_empty());
    }

    #[test]
    fn missing_column_is_format_error() {
        let e = parse("Vehicle_ID,Frame_ID,Local_X,v_Vel\n1,1,1,1\n").unwrap_err();
        assert!(matches!(e, TrajError::Format(ref m) if m.contains("Local_Y")), "{e}");
    }

    #[test]
    fn corrupt_row_names_row_number() {
        let e = parse("Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel\n1,1,1,1,1\n1,2,abc,1,1\n").unwrap_err();
        assert!(matches!(e, TrajError::Row { row: 3, .. }), "{e}");
    }

    #[test]
    fn duplicate_frame_names_vehicle() {
        let e = parse("Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel\n7,1,1,1,1\n7,1,2,1,1\n").unwrap_err();
        assert!(matches!(e, TrajError::Data { vehicle_id: 7, .. }), "{e}");
    }

    #[test]
    fn extra_columns_ignored_and_gaps_split() {
        let csv = "Global_Time,Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel,Lane_ID\n\
                   0,3,10,0,0,1,2\n0,3,11,0,1,1,2\n0,3,13,0,2,1,2\n";
        let t = parse(csv).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].points.len(), 2);
        assert_eq!(t[1].first_frame(), Some(13));
    }

    #[test]
    fn interleaved_rows_match_group_and_sort_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        // 100 unique (vehicle, frame) rows over two vehicles, shuffled
        let mut rows: Vec<(u64, u64, f64)> = (0..50u64)
            .flat_map(|f| [(1u64, f, f as f64), (2u64, f, -(f as f64))])
            .collect();
        for i in (1..rows.len()).rev() {
            let j = rng.random_range(0..=i);
            rows.swap(i, j);
        }
        let mut csv = String::from("Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel\n");
        for (id, f, x) in &rows {
            csv.push_str(&format!("{id},{f},{x},0,1\n"));
        }
        let tracks = ingest_ngsim_reader(csv.as_bytes(), LengthUnit::Meters).unwrap();

        // oracle: group then sort
        let mut expected: BTreeMap<u64, Vec<(u64, f64)>> = BTreeMap::new();
        for (id, f, x) in rows {
            expected.entry(id).or_default().push((f, x));
        }
        for v in expected.values_mut() {
            v.sort_by_key(|e| e.0);
        }
        assert_eq!(tracks.len(), expected.len());
        for t in &tracks {
            let got: Vec<(u64, f64)> = t.points.iter().map(|p| (p.frame_index, p.x)).collect();
            assert_eq!(got, expected[&t.vehicle_id]);
        }
    }
}

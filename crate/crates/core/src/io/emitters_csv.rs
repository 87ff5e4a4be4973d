use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::simulate::{Emitter, EmitterList};

pub const CSV_HEADER: [&str; 4] = ["frame", "x_nm", "y_nm", "intensity"];

/// Read an emitter CSV into one list per frame id, sorted by frame. Frames
/// without rows do not appear.
pub fn read_emitters(path: impl AsRef<Path>) -> Result<Vec<EmitterList>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, format!("unreadable header: {e}")))?;
    if header.iter().map(str::trim).ne(CSV_HEADER) {
        return Err(Error::format(
            path,
            format!(
                "bad header '{}', expected '{}'",
                header.iter().collect::<Vec<_>>().join(","),
                CSV_HEADER.join(",")
            ),
        ));
    }
    let mut frames: BTreeMap<u32, Vec<Emitter>> = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::format(path, format!("line {line}: {e}")))?;
        let field = |k: usize| -> Result<&str> {
            record.get(k).map(str::trim).ok_or_else(|| {
                Error::format(
                    path,
                    format!("line {line}: missing column {}", CSV_HEADER[k]),
                )
            })
        };
        let frame: u32 = field(0)?
            .parse()
            .map_err(|_| Error::format(path, format!("line {line}: bad frame id")))?;
        if frame == 0 {
            return Err(Error::format(
                path,
                format!("line {line}: frame ids are 1-based"),
            ));
        }
        let mut nums = [0.0f64; 3];
        for (k, n) in nums.iter_mut().enumerate() {
            *n = field(k + 1)?.parse().map_err(|_| {
                Error::format(path, format!("line {line}: bad {}", CSV_HEADER[k + 1]))
            })?;
            if !n.is_finite() {
                return Err(Error::format(
                    path,
                    format!("line {line}: non-finite {}", CSV_HEADER[k + 1]),
                ));
            }
        }
        frames
            .entry(frame)
            .or_default()
            .push(Emitter::new(nums[0], nums[1], nums[2]));
    }
    Ok(frames
        .into_iter()
        .map(|(frame_id, emitters)| EmitterList { frame_id, emitters })
        .collect())
}

/// Write emitters in frame order; floats use the shortest representation
/// that round-trips exactly.
pub fn write_emitters(path: impl AsRef<Path>, lists: &[EmitterList]) -> Result<()> {
    let path = path.as_ref();
    let mut sorted: Vec<&EmitterList> = lists.iter().collect();
    sorted.sort_by_key(|l| l.frame_id);
    let mut out = String::from("frame,x_nm,y_nm,intensity\n");
    for l in sorted {
        for e in &l.emitters {
            out.push_str(&format!(
                "{},{:?},{:?},{:?}\n",
                l.frame_id, e.x_nm, e.y_nm, e.intensity
            ));
        }
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

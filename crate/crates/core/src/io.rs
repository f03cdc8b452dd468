//! Plain-text CSV persistence for segment sets and result sets.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::segment::{ResultItem, SegmentStore, SpacetimePoint, TimeInterval, TrajectorySegment};

pub const SEGMENT_HEADER: &str = "traj_id,seg_id,x_s,y_s,z_s,t_s,x_e,y_e,z_e,t_e";
pub const RESULT_HEADER: &str = "query_traj,query_seg,entry_traj,entry_seg,t_begin,t_end";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes segments with a header line; floats use their shortest exact form.
pub fn write_segments<W: Write>(mut w: W, segments: &[TrajectorySegment]) -> std::io::Result<()> {
    writeln!(w, "{SEGMENT_HEADER}")?;
    for s in segments {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            s.traj_id, s.seg_id, s.start.x, s.start.y, s.start.z, s.start.t, s.end.x, s.end.y, s.end.z, s.end.t
        )?;
    }
    w.flush()
}

pub fn save_segments(path: &Path, segments: &[TrajectorySegment]) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    write_segments(BufWriter::new(f), segments).map_err(io_err(path))
}

pub fn save_store(path: &Path, store: &SegmentStore) -> Result<()> {
    save_segments(path, store.segments())
}

/// Parses a segment file. With `strict`, rows must already be in storage
/// order; otherwise they are sorted.
pub fn read_segments<R: BufRead>(r: R, path: &Path, strict: bool) -> Result<Vec<TrajectorySegment>> {
    let fmt = |line: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    let mut lines = r.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == SEGMENT_HEADER => {}
        Some((_, Ok(h))) => return Err(fmt(1, format!("unexpected header '{h}'"))),
        Some((_, Err(e))) => return Err(io_err(path)(e)),
        None => return Err(fmt(1, "missing header".into())),
    }
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 10 {
            return Err(fmt(line_no, format!("expected 10 fields, found {}", fields.len())));
        }
        let int = |k: usize| {
            fields[k]
                .parse::<u64>()
                .map_err(|e| fmt(line_no, format!("field {k} '{}': {e}", fields[k])))
        };
        let num = |k: usize| {
            fields[k]
                .parse::<f64>()
                .map_err(|e| fmt(line_no, format!("field {k} '{}': {e}", fields[k])))
        };
        let seg = TrajectorySegment {
            traj_id: int(0)?,
            seg_id: int(1)?,
            start: SpacetimePoint::new(num(2)?, num(3)?, num(4)?, num(5)?),
            end: SpacetimePoint::new(num(6)?, num(7)?, num(8)?, num(9)?),
        };
        seg.validate().map_err(|e| fmt(line_no, e.to_string()))?;
        if strict {
            if let Some(prev) = out.last() {
                if TrajectorySegment::storage_order(prev, &seg).is_gt() {
                    return Err(fmt(line_no, "rows are not sorted by start time".into()));
                }
            }
        }
        out.push(seg);
    }
    if !strict {
        out.sort_by(TrajectorySegment::storage_order);
    }
    Ok(out)
}

pub fn load_segments(path: &Path, strict: bool) -> Result<Vec<TrajectorySegment>> {
    let f = File::open(path).map_err(io_err(path))?;
    read_segments(BufReader::new(f), path, strict)
}

pub fn load_store(path: &Path, strict: bool) -> Result<SegmentStore> {
    SegmentStore::new(load_segments(path, strict)?)
}

pub fn write_results<W: Write>(mut w: W, results: &[ResultItem]) -> std::io::Result<()> {
    writeln!(w, "{RESULT_HEADER}")?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.query_traj_id, r.query_seg_id, r.entry_traj_id, r.entry_seg_id, r.interval.begin, r.interval.end
        )?;
    }
    w.flush()
}

pub fn save_results(path: &Path, results: &[ResultItem]) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    write_results(BufWriter::new(f), results).map_err(io_err(path))
}

pub fn load_results(path: &Path) -> Result<Vec<ResultItem>> {
    let f = File::open(path).map_err(io_err(path))?;
    let fmt = |line: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if i == 0 {
            if line.trim() != RESULT_HEADER {
                return Err(fmt(1, format!("unexpected header '{line}'")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(fmt(i + 1, format!("expected 6 fields, found {}", f.len())));
        }
        let parse_err = |e: &dyn std::fmt::Display| fmt(i + 1, e.to_string());
        let ids: Vec<u64> = f[..4]
            .iter()
            .map(|s| s.trim().parse::<u64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(&e))?;
        let begin: f64 = f[4].trim().parse().map_err(|e| parse_err(&e))?;
        let end: f64 = f[5].trim().parse().map_err(|e| parse_err(&e))?;
        out.push(ResultItem {
            query_traj_id: ids[0],
            query_seg_id: ids[1],
            entry_traj_id: ids[2],
            entry_seg_id: ids[3],
            interval: TimeInterval::new(begin, end).map_err(|e| parse_err(&e))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{datagen, fixtures};
    use proptest::prelude::*;

    fn round_trip(segs: &[TrajectorySegment]) -> Vec<TrajectorySegment> {
        let mut buf = Vec::new();
        write_segments(&mut buf, segs).unwrap();
        read_segments(buf.as_slice(), Path::new("mem"), true).unwrap()
    }

    #[test]
    fn example_store_round_trips() {
        let store = fixtures::example_store();
        assert_eq!(round_trip(store.segments()), store.segments());
    }

    #[test]
    fn reversed_row_reports_line() {
        let text = format!("{SEGMENT_HEADER}\n1,0,0,0,0,1,0,0,0,2\n1,1,0,0,0,5,0,0,0,4\n");
        let err = read_segments(text.as_bytes(), Path::new("x.csv"), false).unwrap_err();
        match err {
            Error::Format { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strict_rejects_unsorted() {
        let text = format!("{SEGMENT_HEADER}\n1,0,0,0,0,5,0,0,0,6\n2,0,0,0,0,1,0,0,0,2\n");
        assert!(read_segments(text.as_bytes(), Path::new("x.csv"), true).is_err());
        let lax = read_segments(text.as_bytes(), Path::new("x.csv"), false).unwrap();
        assert_eq!(lax[0].traj_id, 2);
    }

    #[test]
    fn malformed_rows_rejected() {
        for body in ["1,0,0,0", "a,0,0,0,0,1,0,0,0,2", "1,0,0,0,0,1,0,0,0,nan", "1,0,0,x,0,1,0,0,0,2"] {
            let text = format!("{SEGMENT_HEADER}\n{body}\n");
            assert!(read_segments(text.as_bytes(), Path::new("x.csv"), false).is_err(), "{body}");
        }
        assert!(read_segments("bad,header\n".as_bytes(), Path::new("x.csv"), false).is_err());
    }

    #[test]
    fn generated_store_round_trips_in_row_order() {
        let store = datagen::generate(&datagen::GenProfile::exp(50, 4)).unwrap();
        let back = round_trip(store.segments());
        assert_eq!(back, store.segments());
    }

    proptest! {
        #[test]
        fn floats_round_trip_exactly(x in any::<f64>().prop_filter("finite", |v| v.is_finite()),
                                     t in -1e12..1e12f64, dt in 0.0..1e6f64) {
            let s = TrajectorySegment {
                traj_id: 3,
                seg_id: 9,
                start: SpacetimePoint::new(x, -x, x / 3.0, t),
                end: SpacetimePoint::new(x * 0.5, 1e-300, -0.0, t + dt),
            };
            let back = round_trip(&[s]);
            prop_assert_eq!(back[0].start.x.to_bits(), s.start.x.to_bits());
            prop_assert_eq!(back[0], s);
        }
    }
}

//! CSV formats for power traces and phase timelines.
//!
//! Trace files have the header `t_s,sensor,watts`; phase files have
//! `label,kernel_class,start_s,end_s`. Both are UTF-8, and lines starting
//! with `#` are ignored on input.

use super::{validate_timeline, KernelClass, PhaseMark, PowerError, PowerSample};
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

pub const TRACE_HEADER: [&str; 3] = ["t_s", "sensor", "watts"];
pub const PHASE_HEADER: [&str; 4] = ["label", "kernel_class", "start_s", "end_s"];

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(r)
}

fn csv_error(e: csv::Error) -> PowerError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => PowerError::Io(io),
        other => PowerError::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), PowerError> {
    let header = rdr.headers().map_err(csv_error)?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(PowerError::Parse {
            line: 1,
            message: format!("expected header '{}', found '{}'", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    Ok(())
}

fn parse_f64(field: &str, name: &str, line: u64) -> Result<f64, PowerError> {
    let v: f64 = field.parse().map_err(|_| PowerError::Parse {
        line,
        message: format!("invalid {name} '{field}'"),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(PowerError::Parse {
            line,
            message: format!("{name} must be finite and non-negative, got '{field}'"),
        });
    }
    Ok(v)
}

/// Parses a trace, checking that each sensor's timestamps strictly increase.
pub fn read_trace<R: Read>(r: R) -> Result<Vec<PowerSample>, PowerError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &TRACE_HEADER)?;
    let mut samples = Vec::new();
    let mut last_t: HashMap<String, f64> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(PowerError::Parse {
                line,
                message: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let t = parse_f64(&rec[0], "timestamp", line)?;
        let sensor = rec[1].to_string();
        if sensor.is_empty() {
            return Err(PowerError::Parse {
                line,
                message: "empty sensor id".into(),
            });
        }
        let watts = parse_f64(&rec[2], "watts", line)?;
        if let Some(&prev) = last_t.get(&sensor) {
            if t <= prev {
                return Err(PowerError::NonMonotonicTimestamps { sensor, line });
            }
        }
        last_t.insert(sensor.clone(), t);
        samples.push(PowerSample { t, sensor, watts });
    }
    if samples.is_empty() {
        log::warn!("power trace contains no samples");
    }
    Ok(samples)
}

pub fn replay_trace(path: impl AsRef<Path>) -> Result<Vec<PowerSample>, PowerError> {
    read_trace(BufReader::new(File::open(path)?))
}

pub fn write_trace<W: Write>(w: W, samples: &[PowerSample]) -> Result<(), PowerError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(TRACE_HEADER).map_err(csv_error)?;
    for s in samples {
        wtr.write_record([s.t.to_string(), s.sensor.clone(), s.watts.to_string()])
            .map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_phases<R: Read>(r: R) -> Result<Vec<PhaseMark>, PowerError> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &PHASE_HEADER)?;
    let mut phases = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(PowerError::Parse {
                line,
                message: format!("expected 4 fields, found {}", rec.len()),
            });
        }
        let class: KernelClass = rec[1].parse().map_err(|e: PowerError| PowerError::Parse {
            line,
            message: e.to_string(),
        })?;
        phases.push(PhaseMark::new(
            &rec[0],
            class,
            parse_f64(&rec[2], "start_s", line)?,
            parse_f64(&rec[3], "end_s", line)?,
        ));
    }
    validate_timeline(&phases)?;
    Ok(phases)
}

pub fn write_phases<W: Write>(w: W, phases: &[PhaseMark]) -> Result<(), PowerError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(PHASE_HEADER).map_err(csv_error)?;
    for p in phases {
        wtr.write_record([
            p.label.clone(),
            p.kernel_class.to_string(),
            p.t_start.to_string(),
            p.t_end.to_string(),
        ])
        .map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_samples() {
        let s = read_trace("t_s,sensor,watts\n0.000,total,100.0\n1.000,total,100.0\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].t, 1.0);
        assert_eq!(s[1].watts, 100.0);
    }

    #[test]
    fn header_only_and_comments() {
        assert!(read_trace("t_s,sensor,watts\n".as_bytes()).unwrap().is_empty());
        let s = read_trace("# exported\nt_s,sensor,watts\n# idle\n0.5,cpu1,42.8\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn out_of_order_timestamps() {
        let err = read_trace("t_s,sensor,watts\n1.0,total,1\n0.5,cpu1,1\n0.5,total,1\n".as_bytes()).unwrap_err();
        match err {
            PowerError::NonMonotonicTimestamps { sensor, line } => {
                assert_eq!(sensor, "total");
                assert_eq!(line, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = read_trace("t_s,sensor,watts\n0,total,1\nabc,total,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, PowerError::Parse { line: 3, .. }), "{err:?}");
        let err = read_trace("time,sensor,watts\n".as_bytes()).unwrap_err();
        assert!(matches!(err, PowerError::Parse { line: 1, .. }));
        let err = read_trace("t_s,sensor,watts\n0,total,-4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, PowerError::Parse { line: 2, .. }));
    }

    #[test]
    fn trace_round_trip() {
        let samples = vec![
            PowerSample { t: 0.1, sensor: "total".into(), watts: 142.1 },
            PowerSample { t: 0.2, sensor: "total".into(), watts: 1.0 / 3.0 },
        ];
        let mut buf = Vec::new();
        write_trace(&mut buf, &samples).unwrap();
        assert!(buf.starts_with(b"t_s,sensor,watts\n0.1,total,142.1\n"));
        assert_eq!(read_trace(&buf[..]).unwrap(), samples);
    }

    #[test]
    fn phases_round_trip_with_quoting() {
        let phases = vec![
            PhaseMark::new("factorize", KernelClass::Blas3, 0.0, 1.5),
            PhaseMark::new("refine, \"1\"", KernelClass::Blas2, 1.5, 2.0),
        ];
        let mut buf = Vec::new();
        write_phases(&mut buf, &phases).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"refine, \"\"1\"\"\""));
        assert_eq!(read_phases(&buf[..]).unwrap(), phases);
        assert!(read_phases("label,kernel_class,start_s,end_s\na,gemm,0,1\n".as_bytes()).is_err());
    }
}

//! Dataset and artifact files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::TrainingSample;
use crate::error::{Error, Result};
use crate::phase::PhasePoint;

/// Writes one JSON object per line.
pub fn write_jsonl(path: &Path, samples: &[TrainingSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a JSON-lines dataset; blank lines are skipped.
pub fn read_jsonl(path: &Path) -> Result<Vec<TrainingSample>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: TrainingSample = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidConfig(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if s.x.dim() != s.y.dim() {
            return Err(Error::DimensionMismatch {
                expected: s.x.dim(),
                got: s.y.dim(),
            });
        }
        out.push(s);
    }
    Ok(out)
}

/// `epoch,loss` with 1-based epochs.
pub fn write_loss_csv(path: &Path, history: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "epoch,loss")?;
    for (i, l) in history.iter().enumerate() {
        writeln!(w, "{},{l:e}", i + 1)?;
    }
    w.flush()?;
    Ok(())
}

/// Header of the trajectory CSV for `d` degrees of freedom.
pub fn trajectory_header(d: usize) -> String {
    let mut cols = vec!["step".to_string(), "t".to_string()];
    for who in ["pred", "ref"] {
        for c in ["p", "q"] {
            cols.extend((1..=d).map(|i| format!("{who}_{c}{i}")));
        }
    }
    cols.join(",")
}

/// Predicted and reference trajectories side by side, one row per step.
pub fn write_trajectory_csv(
    path: &Path,
    t0: f64,
    h: f64,
    predicted: &[PhasePoint],
    reference: &[PhasePoint],
) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    write_trajectory(&mut f, t0, h, predicted, reference)?;
    f.flush()?;
    Ok(())
}

pub fn write_trajectory<W: Write>(
    w: &mut W,
    t0: f64,
    h: f64,
    predicted: &[PhasePoint],
    reference: &[PhasePoint],
) -> Result<()> {
    if predicted.len() != reference.len() {
        return Err(Error::InvalidConfig(format!(
            "trajectory lengths differ: {} vs {}",
            predicted.len(),
            reference.len()
        )));
    }
    let d = predicted.first().map_or(1, PhasePoint::dim);
    writeln!(w, "{}", trajectory_header(d))?;
    for (k, (a, b)) in predicted.iter().zip(reference).enumerate() {
        write!(w, "{k},{}", t0 + k as f64 * h)?;
        for v in a.as_slice().iter().chain(b.as_slice()) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::{sample_dataset, DatasetSpec};

    #[test]
    fn jsonl_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let data = sample_dataset(&DatasetSpec {
            n: 20,
            ..DatasetSpec::forced_ho(5)
        })
        .unwrap();
        write_jsonl(&path, &data).unwrap();
        assert_eq!(read_jsonl(&path).unwrap(), data);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 20);
        assert!(text.lines().next().unwrap().starts_with("{\"x\":["));
    }

    #[test]
    fn autonomous_lines_omit_the_clock() {
        let data = sample_dataset(&DatasetSpec {
            n: 1,
            ..DatasetSpec::pendulum(5)
        })
        .unwrap();
        let line = serde_json::to_string(&data[0]).unwrap();
        assert!(!line.contains("\"t\""));
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"x\":[0,0],\"h\":0.1,\"y\":[0,0]}\n{\"x\":[0]}\n").unwrap();
        let err = read_jsonl(&path).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn header_for_two_dof() {
        assert_eq!(
            trajectory_header(2),
            "step,t,pred_p1,pred_p2,pred_q1,pred_q2,ref_p1,ref_p2,ref_q1,ref_q2"
        );
    }
}

//! Report emission: JSON documents (with a schema-version field carried by
//! each report struct) and CSV norm logs. Output is deterministic: struct
//! fields serialize in declaration order and floats print in shortest
//! round-trip form.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::field::Field;
use crate::solver::Trajectory;
use crate::storage;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}

/// Norm-log CSV: `time,l2,linf,h1[,lm_<m>...]` per logged step.
pub fn write_norm_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header = String::from("time,l2,linf,h1");
    for m in &traj.meta().lm_exponents {
        header.push_str(&format!(",lm_{m}"));
    }
    writeln!(file, "{header}")?;
    for s in traj.norm_log() {
        let mut row = format!("{},{},{},{}", s.t, s.l2, s.linf, s.h1);
        for v in &s.lm {
            row.push_str(&format!(",{v}"));
        }
        writeln!(file, "{row}")?;
    }
    Ok(())
}

/// A container of fields: `count` as little-endian u64, then the fields in
/// the flat binary layout, back to back.
pub fn write_field_set(path: &Path, fields: &[Field]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(&(fields.len() as u64).to_le_bytes())?;
    for f in fields {
        storage::write_field(&mut file, f)?;
    }
    Ok(())
}

pub fn read_field_set(path: &Path) -> Result<Vec<Field>> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut buf = [0u8; 8];
    std::io::Read::read_exact(&mut file, &mut buf)?;
    let count = u64::from_le_bytes(buf) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(storage::read_field(&mut file)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BoxDomain;

    #[test]
    fn field_set_round_trip() {
        let dom = BoxDomain::interval_pi(8).unwrap();
        let fields = vec![
            Field::mode(&dom, &[1], 1.0).unwrap(),
            Field::mode(&dom, &[2], -0.5).unwrap(),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.bin");
        write_field_set(&path, &fields).unwrap();
        let back = read_field_set(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].coeffs(), fields[1].coeffs());
    }
}

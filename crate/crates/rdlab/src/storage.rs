//! Field serialization: a flat binary layout and a debug CSV view.
//!
//! Binary layout, all values little-endian 64-bit:
//! `dim (u64) | resolution[0..dim] (u64) | lengths[0..dim] (f64) |
//! coefficients row-major (f64)`.

use std::io::{Read, Write};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field::Field;

pub fn write_field(w: &mut impl Write, field: &Field) -> Result<()> {
    let dom = field.domain();
    w.write_all(&(dom.dim() as u64).to_le_bytes())?;
    for &n in dom.resolution() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for &l in dom.lengths() {
        w.write_all(&l.to_le_bytes())?;
    }
    for &c in field.coeffs() {
        w.write_all(&c.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field(r: &mut impl Read) -> Result<Field> {
    let dim = read_u64(r)? as usize;
    if dim == 0 || dim > 2 {
        return Err(Error::invalid(format!("bad field header: dim = {dim}")));
    }
    let mut resolution = Vec::with_capacity(dim);
    for _ in 0..dim {
        resolution.push(read_u64(r)? as usize);
    }
    let mut lengths = Vec::with_capacity(dim);
    for _ in 0..dim {
        lengths.push(read_f64(r)?);
    }
    let domain = BoxDomain::new(&lengths, &resolution)?;
    let mut coeffs = Vec::with_capacity(domain.node_count());
    for _ in 0..domain.node_count() {
        coeffs.push(read_f64(r)?);
    }
    Field::from_coeffs(&domain, coeffs)
}

pub fn save_field(path: &std::path::Path, field: &Field) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field(&mut f, field)
}

pub fn load_field(path: &std::path::Path) -> Result<Field> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_field(&mut f)
}

/// Debug CSV: one `index,coefficient` row per retained mode, row-major.
pub fn write_field_csv(w: &mut impl Write, field: &Field) -> Result<()> {
    writeln!(w, "index,coefficient")?;
    for (i, c) in field.coeffs().iter().enumerate() {
        writeln!(w, "{i},{c}")?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_1d_and_2d() {
        for dom in [
            BoxDomain::interval_pi(12).unwrap(),
            BoxDomain::new(&[1.5, std::f64::consts::PI], &[8, 10]).unwrap(),
        ] {
            let u = Field::from_fn(&dom, |x| x.iter().map(|v| v.sin()).product());
            let mut buf = Vec::new();
            write_field(&mut buf, &u).unwrap();
            let expect_len = 8 * (1 + 2 * dom.dim() + dom.node_count());
            assert_eq!(buf.len(), expect_len);
            let back = read_field(&mut buf.as_slice()).unwrap();
            assert_eq!(back.domain(), &dom);
            assert_eq!(back.coeffs(), u.coeffs());
        }
    }

    #[test]
    fn csv_has_one_row_per_mode() {
        let dom = BoxDomain::interval_pi(8).unwrap();
        let u = Field::mode(&dom, &[2], 0.5).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &u).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], "index,coefficient");
        assert_eq!(lines[2], "1,0.5");
    }

    #[test]
    fn truncated_stream_is_an_error() {
        let dom = BoxDomain::interval_pi(8).unwrap();
        let u = Field::zeros(&dom);
        let mut buf = Vec::new();
        write_field(&mut buf, &u).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(read_field(&mut buf.as_slice()).is_err());
    }
}

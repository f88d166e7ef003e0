//! Field export: CSV (cell-center coordinates and value) and a flat
//! little-endian binary dump.
//!
//! Binary layout: `dims: u32`, `n[dims]: u64`, `h[dims]: f64`, `time: f64`,
//! then `Πn` payload values (`f64`, axis 0 fastest).

use std::io::{Read, Write};
use std::path::Path;

use super::{FieldError, ScalarField};

pub fn write_csv<W: Write>(field: &ScalarField, out: W) -> Result<(), FieldError> {
    let grid = field.grid();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["x", "y", "z"][..grid.dim()].iter().map(|s| s.to_string()).collect();
    header.push("value".into());
    w.write_record(&header).map_err(csv_err)?;
    for (i, v) in field.values().iter().enumerate() {
        if !field.is_valid(i) {
            continue;
        }
        let c = grid.center(i);
        let mut rec: Vec<String> = c[..grid.dim()].iter().map(|x| format!("{x:.17e}")).collect();
        rec.push(format!("{v:.17e}"));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> FieldError {
    FieldError::Format(e.to_string())
}

pub fn write_binary<W: Write>(field: &ScalarField, mut out: W) -> Result<(), FieldError> {
    let grid = field.grid();
    out.write_all(&(grid.dim() as u32).to_le_bytes())?;
    for &n in &grid.cells {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    for &h in &grid.h {
        out.write_all(&h.to_le_bytes())?;
    }
    out.write_all(&field.time().to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * field.len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Contents of a binary dump.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub cells: Vec<usize>,
    pub h: Vec<f64>,
    pub time: f64,
    pub values: Vec<f64>,
}

pub fn read_binary<R: Read>(mut input: R) -> Result<FieldDump, FieldError> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4)?;
    let dims = u32::from_le_bytes(b4) as usize;
    if dims == 0 || dims > 3 {
        return Err(FieldError::Format(format!("dimension {dims}")));
    }
    let mut cells = Vec::with_capacity(dims);
    for _ in 0..dims {
        input.read_exact(&mut b8)?;
        cells.push(u64::from_le_bytes(b8) as usize);
    }
    let mut h = Vec::with_capacity(dims);
    for _ in 0..dims {
        input.read_exact(&mut b8)?;
        h.push(f64::from_le_bytes(b8));
    }
    input.read_exact(&mut b8)?;
    let time = f64::from_le_bytes(b8);
    let len: usize = cells.iter().product();
    let mut raw = Vec::new();
    input.read_to_end(&mut raw)?;
    if raw.len() != 8 * len {
        return Err(FieldError::Format(format!("payload of {} bytes for {len} cells", raw.len())));
    }
    let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(FieldDump { cells, h, time, values })
}

/// Writes `<stem>.csv` and `<stem>.bin` into `dir`.
pub fn dump_field(field: &ScalarField, dir: &Path, stem: &str) -> Result<(), FieldError> {
    std::fs::create_dir_all(dir)?;
    write_csv(field, std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
    write_binary(field, std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.bin")))?))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Domain, DomainKind, Grid};
    use std::sync::Arc;

    #[test]
    fn binary_round_trip() {
        let g = Arc::new(Grid::new(Domain::unit(DomainKind::PeriodicBox, 2).unwrap(), vec![3, 5], 1.0).unwrap());
        let f = ScalarField::from_fn(g, 0.25, |x| x[0] * 10.0 + x[1]);
        let mut buf = Vec::new();
        write_binary(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 2 * 8 + 2 * 8 + 8 + 15 * 8);
        let d = read_binary(buf.as_slice()).unwrap();
        assert_eq!(d.cells, vec![3, 5]);
        assert_eq!(d.time, 0.25);
        assert_eq!(d.values, f.values());
        assert!(read_binary(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let g = Arc::new(Grid::uniform(Domain::unit(DomainKind::LipschitzBox, 1).unwrap(), 4, 1.0).unwrap());
        let f = ScalarField::constant(g, 0.0, 2.0);
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("x,value"));
    }
}

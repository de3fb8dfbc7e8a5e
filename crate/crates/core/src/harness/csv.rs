//! Minimal CSV output: a fixed header, one row per record, reals in
//! shortest round-trip exponent form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::pairlab::PairSample;

pub const PAIR_HEADER: [&str; 7] = ["t", "E_w", "E_v", "D_u", "D_v", "E_total", "gronwall_ratio"];

/// Integral values below 2^53 print as integers, everything else in
/// shortest round-trip exponent form.
pub fn format_real(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 9007199254740992.0 {
        format!("{}", x as i64)
    } else {
        format!("{x:e}")
    }
}

pub struct CsvWriter<W: Write> {
    out: W,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, header: &[&str]) -> Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(CsvWriter {
            out,
            columns: header.len(),
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.columns {
            return Err(Error::Contract(format!(
                "CSV row has {} fields, header has {}",
                values.len(),
                self.columns
            )));
        }
        let line: Vec<String> = values.iter().map(|&x| format_real(x)).collect();
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn create(path: &Path, header: &[&str]) -> Result<CsvWriter<BufWriter<File>>> {
    let file = File::create(path)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
    CsvWriter::new(BufWriter::new(file), header)
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = create(path, &DiagnosticsRecord::CSV_HEADER)?;
    for r in records {
        w.row(&r.csv_fields())?;
    }
    w.finish()?;
    Ok(())
}

pub fn write_pair(path: &Path, samples: &[PairSample]) -> Result<()> {
    let mut w = create(path, &PAIR_HEADER)?;
    for s in samples {
        let e = &s.energy;
        w.row(&[e.t, e.e_w, e.e_v, e.d_u, e.d_v, e.total(), s.gronwall_ratio])?;
    }
    w.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut w = CsvWriter::new(Vec::new(), &["t", "x"]).unwrap();
        w.row(&[0.0, 1.5]).unwrap();
        w.row(&[0.01, -2e-20]).unwrap();
        w.row(&[256.0, f64::NAN]).unwrap();
        assert!(w.row(&[1.0]).is_err());
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(text, "t,x\n0,1.5e0\n1e-2,-2e-20\n256,NaN\n");
        for field in text.lines().skip(1).flat_map(|l| l.split(',')) {
            field.parse::<f64>().unwrap();
        }
    }

    #[test]
    fn empty_output_still_has_header() {
        let w = CsvWriter::new(Vec::new(), &PAIR_HEADER).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(text, "t,E_w,E_v,D_u,D_v,E_total,gronwall_ratio\n");
    }
}

//! Sampled data with oracle columns, plus CSV import/export.

use std::io::{Read, Write};
use std::path::Path;

use crate::linalg::Matrix;
use crate::{Error, Result};

/// A sampled batch from a generative model.
///
/// Oracle columns carry the exact posterior and pretext optimum per row:
/// `bayes[i] = E[Y | X1 = x1_i]` and `psi_star[i] = C(x1_i) bayes[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x1: Matrix,
    pub x2: Matrix,
    pub y: Matrix,
    pub bayes: Matrix,
    pub psi_star: Matrix,
    /// Seed the sampler was called with; not persisted by CSV export.
    pub seed: u64,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x1.rows()
    }

    pub fn d1(&self) -> usize {
        self.x1.cols()
    }

    pub fn d2(&self) -> usize {
        self.x2.cols()
    }

    pub fn p(&self) -> usize {
        self.y.cols()
    }

    pub(crate) fn check_consistent(&self) -> Result<()> {
        let n = self.x1.rows();
        if self.x2.rows() != n
            || self.y.rows() != n
            || self.bayes.rows() != n
            || self.psi_star.rows() != n
        {
            return Err(Error::DimensionMismatch("dataset row counts disagree".into()));
        }
        if self.bayes.cols() != self.y.cols() || self.psi_star.cols() != self.x2.cols() {
            return Err(Error::DimensionMismatch("dataset oracle widths disagree".into()));
        }
        Ok(())
    }

    // ─── CSV round trip ───

    /// Writes a header `x1_0..,x2_0..,y_0..,bayes_0..,psi_0..` and one row
    /// per sample. Floats use shortest round-trip formatting, so
    /// export -> import -> export is byte-stable.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.check_consistent()?;
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = Vec::new();
        for (prefix, m) in self.blocks() {
            for j in 0..m.cols() {
                header.push(format!("{prefix}_{j}"));
            }
        }
        w.write_record(&header)?;
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.n() {
            record.clear();
            for (_, m) in self.blocks() {
                record.extend(m.row(i).iter().map(|v| v.to_string()));
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }

    /// Reads a dataset written by `write_csv`. Column widths are recovered
    /// from the header; the seed field is not stored in CSV and comes back 0.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let prefixes = ["x1", "x2", "y", "bayes", "psi"];
        let mut widths = [0usize; 5];
        for name in header.iter() {
            let (prefix, idx) = name
                .rsplit_once('_')
                .ok_or_else(|| Error::Serialization(format!("bad column name {name}")))?;
            let slot = prefixes
                .iter()
                .position(|p| *p == prefix)
                .ok_or_else(|| Error::Serialization(format!("unknown column prefix {prefix}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::Serialization(format!("bad column index {name}")))?;
            widths[slot] = widths[slot].max(idx + 1);
        }
        let total: usize = widths.iter().sum();
        if total != header.len() {
            return Err(Error::Serialization("dataset header has gaps".into()));
        }
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); 5];
        let mut n = 0usize;
        for record in r.records() {
            let record = record?;
            if record.len() != total {
                return Err(Error::Serialization("dataset row width mismatch".into()));
            }
            let mut fields = record.iter();
            for (slot, &w) in widths.iter().enumerate() {
                for _ in 0..w {
                    let field = fields.next().expect("width checked");
                    let v: f64 = field
                        .parse()
                        .map_err(|_| Error::Serialization(format!("bad float {field}")))?;
                    columns[slot].push(v);
                }
            }
            n += 1;
        }
        let mut block = columns.into_iter().zip(widths);
        let mut take = |_: &str| -> Result<Matrix> {
            let (data, w) = block.next().expect("five blocks");
            Matrix::from_vec(n, w, data)
        };
        Ok(Dataset {
            x1: take("x1")?,
            x2: take("x2")?,
            y: take("y")?,
            bayes: take("bayes")?,
            psi_star: take("psi")?,
            seed: 0,
        })
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }

    fn blocks(&self) -> [(&'static str, &Matrix); 5] {
        [
            ("x1", &self.x1),
            ("x2", &self.x2),
            ("y", &self.y),
            ("bayes", &self.bayes),
            ("psi", &self.psi_star),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset {
            x1: Matrix::from_rows(&[vec![0.25, -1.5], vec![2.0, 0.125]]).unwrap(),
            x2: Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-0.5, 0.0, 1e-11]]).unwrap(),
            y: Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap(),
            bayes: Matrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap(),
            psi_star: Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 0.0]]).unwrap(),
            seed: 7,
        }
    }

    #[test]
    fn csv_round_trip_is_byte_stable() {
        let d = toy();
        let mut first = Vec::new();
        d.write_csv(&mut first).unwrap();
        let back = Dataset::read_csv(first.as_slice()).unwrap();
        assert_eq!(back.x1, d.x1);
        assert_eq!(back.psi_star, d.psi_star);
        let mut second = Vec::new();
        back.write_csv(&mut second).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn csv_header_names() {
        let d = toy();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, "x1_0,x1_1,x2_0,x2_1,x2_2,y_0,bayes_0,psi_0,psi_1,psi_2");
    }

    #[test]
    fn csv_rejects_malformed() {
        let bad = "x1_0,weird\n1.0,2.0\n";
        assert!(Dataset::read_csv(bad.as_bytes()).is_err());
    }
}

//! Spin sample matrices and their CSV serialization.
//!
//! CSV layout: one row per sample, `d` comma-separated entries, each exactly
//! `1` or `-1`, with an optional leading comment line `# d=<d> seed=<seed>`.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};

/// Matrix of `n` spin configurations in `{-1,+1}^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    d: usize,
    data: Vec<i8>,
    /// Master seed recorded at generation time, if any.
    pub seed: Option<u64>,
}

impl SampleSet {
    pub fn new(d: usize, data: Vec<i8>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        if data.len() % d != 0 {
            return Err(Error::Dimension(format!(
                "data length {} is not a multiple of d={d}",
                data.len()
            )));
        }
        if let Some(&bad) = data.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Domain(format!("sample entry {bad} is not +1/-1")));
        }
        Ok(Self { d, data, seed: None })
    }

    pub fn with_capacity(d: usize, n: usize) -> Self {
        Self { d, data: Vec::with_capacity(d * n), seed: None }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[i8] {
        &self.data[r * self.d..(r + 1) * self.d]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [i8] {
        &mut self.data[r * self.d..(r + 1) * self.d]
    }

    pub fn push_row(&mut self, row: &[i8]) {
        debug_assert_eq!(row.len(), self.d);
        self.data.extend_from_slice(row);
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.data.chunks_exact(self.d)
    }

    /// Number of rows whose content differs from `other`.
    pub fn count_differing_rows(&self, other: &SampleSet) -> usize {
        self.rows().zip(other.rows()).filter(|(a, b)| a != b).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(seed) = self.seed {
            writeln!(w, "# d={} seed={}", self.d, seed)?;
        }
        let mut line = String::with_capacity(3 * self.d);
        for row in self.rows() {
            line.clear();
            for (j, &s) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(if s == 1 { "1" } else { "-1" });
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut d = None;
        let mut seed = None;
        let mut data = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                for token in rest.split_whitespace() {
                    if let Some(v) = token.strip_prefix("d=") {
                        d = Some(v.parse::<usize>().map_err(|_| {
                            Error::Format(format!("bad d in header: {token}"))
                        })?);
                    } else if let Some(v) = token.strip_prefix("seed=") {
                        seed = Some(v.parse::<u64>().map_err(|_| {
                            Error::Format(format!("bad seed in header: {token}"))
                        })?);
                    }
                }
                continue;
            }
            let mut row = Vec::new();
            for cell in trimmed.split(',') {
                match cell.trim() {
                    "1" => row.push(1i8),
                    "-1" => row.push(-1i8),
                    other => {
                        return Err(Error::Format(format!(
                            "line {}: entry {other:?} is not 1 or -1",
                            lineno + 1
                        )))
                    }
                }
            }
            match d {
                None => d = Some(row.len()),
                Some(expect) => {
                    if row.len() != expect {
                        return Err(Error::Format(format!(
                            "line {}: {} entries, expected {expect}",
                            lineno + 1,
                            row.len()
                        )));
                    }
                }
            }
            data.extend_from_slice(&row);
        }
        let d = d.ok_or_else(|| Error::Format("empty samples file".into()))?;
        let mut set = SampleSet::new(d, data)?;
        set.seed = seed;
        Ok(set)
    }
}

use std::fmt::Write as _;
use std::path::Path;

use super::VisibilityError;

/// Dense m×n bit matrix, row-major, one row per viewpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

impl VisibilityMatrix {
    /// An empty matrix (m = 0) over `n` triangles.
    pub fn new(n: usize) -> Self {
        VisibilityMatrix {
            n,
            words: words_for(n),
            bits: Vec::new(),
        }
    }

    pub fn from_bool_rows(n: usize, rows: &[Vec<bool>]) -> Result<Self, VisibilityError> {
        let mut m = VisibilityMatrix::new(n);
        for r in rows {
            if r.len() != n {
                return Err(VisibilityError::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            let mut words = vec![0u64; m.words];
            for (j, &b) in r.iter().enumerate() {
                if b {
                    words[j / 64] |= 1 << (j % 64);
                }
            }
            m.bits.extend_from_slice(&words);
        }
        Ok(m)
    }

    pub fn m(&self) -> usize {
        if self.words == 0 {
            0
        } else {
            self.bits.len() / self.words
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn words_per_row(&self) -> usize {
        self.words
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(j < self.n);
        self.row(i)[j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        let w = i * self.words + j / 64;
        if value {
            self.bits[w] |= 1 << (j % 64);
        } else {
            self.bits[w] &= !(1 << (j % 64));
        }
    }

    /// Appends a row given as packed words (length `words_per_row`).
    pub fn push_row(&mut self, row: &[u64]) {
        assert_eq!(row.len(), self.words, "row width mismatch");
        self.bits.extend_from_slice(row);
    }

    pub fn row_count(&self, i: usize) -> usize {
        self.row(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn row_indices(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.get(i, j))
    }

    /// Bitwise OR of all rows: which triangles any viewpoint sees.
    pub fn union_of_rows(&self) -> Vec<u64> {
        let mut acc = vec![0u64; self.words];
        for i in 0..self.m() {
            for (a, w) in acc.iter_mut().zip(self.row(i)) {
                *a |= w;
            }
        }
        acc
    }

    /// A new matrix keeping only the listed rows.
    pub fn select_rows(&self, rows: &[usize]) -> VisibilityMatrix {
        let mut out = VisibilityMatrix::new(self.n);
        for &i in rows {
            out.push_row(self.row(i));
        }
        out
    }

    /// A new matrix keeping only the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> VisibilityMatrix {
        let mut out = VisibilityMatrix::new(cols.len());
        let mut buf = vec![0u64; out.words];
        for i in 0..self.m() {
            buf.iter_mut().for_each(|w| *w = 0);
            for (k, &j) in cols.iter().enumerate() {
                if self.get(i, j) {
                    buf[k / 64] |= 1 << (k % 64);
                }
            }
            out.push_row(&buf);
        }
        out
    }

    /// Portable text form: a `m n` header line, then one line per row holding
    /// `ceil(n/4)` hex digits. Column `4k` is the most significant bit of
    /// digit `k`; padding bits are zero.
    pub fn to_portable_string(&self) -> String {
        let digits = self.n.div_ceil(4);
        let mut s = String::with_capacity(16 + self.m() * (digits + 1));
        let _ = writeln!(s, "{} {}", self.m(), self.n);
        for i in 0..self.m() {
            for k in 0..digits {
                let mut nibble = 0u32;
                for b in 0..4 {
                    let j = 4 * k + b;
                    if j < self.n && self.get(i, j) {
                        nibble |= 8 >> b;
                    }
                }
                s.push(char::from_digit(nibble, 16).unwrap());
            }
            s.push('\n');
        }
        s
    }

    pub fn from_portable_str(src: &str) -> Result<Self, VisibilityError> {
        let err = |line: usize, msg: &str| VisibilityError::Format {
            line,
            message: msg.to_string(),
        };
        let mut lines = src.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing `m n` header"))?;
        let mut parts = header.split_whitespace();
        let m: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(1, "invalid row count"))?;
        let n: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(1, "invalid column count"))?;
        if parts.next().is_some() {
            return Err(err(1, "header must be exactly `m n`"));
        }
        let digits = n.div_ceil(4);
        let mut out = VisibilityMatrix::new(n);
        let mut row = vec![0u64; out.words];
        for r in 0..m {
            let (idx, line) = lines.next().ok_or_else(|| err(r + 2, "missing row"))?;
            let line = line.trim();
            if line.len() != digits {
                return Err(err(idx + 1, &format!("expected {digits} hex digits, got {}", line.len())));
            }
            row.iter_mut().for_each(|w| *w = 0);
            for (k, ch) in line.chars().enumerate() {
                let nibble = ch.to_digit(16).ok_or_else(|| err(idx + 1, "invalid hex digit"))?;
                for b in 0..4 {
                    if nibble & (8 >> b) != 0 {
                        let j = 4 * k + b;
                        if j >= n {
                            return Err(err(idx + 1, "padding bits must be zero"));
                        }
                        row[j / 64] |= 1 << (j % 64);
                    }
                }
            }
            out.push_row(&row);
        }
        if let Some((idx, _)) = lines.next() {
            return Err(err(idx + 1, "more rows than the header declares"));
        }
        Ok(out)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_portable_string())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, VisibilityError> {
        let src = std::fs::read_to_string(path)?;
        Self::from_portable_str(&src)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn portable_layout() {
        let m = VisibilityMatrix::from_bool_rows(
            5,
            &[vec![true, false, false, false, true], vec![false, true, true, false, false]],
        )
        .unwrap();
        assert_eq!(m.to_portable_string(), "2 5\n88\n60\n");
    }

    #[test]
    fn portable_rejects_garbage() {
        assert!(VisibilityMatrix::from_portable_str("").is_err());
        assert!(VisibilityMatrix::from_portable_str("1 4\nz\n").is_err());
        assert!(VisibilityMatrix::from_portable_str("1 5\n8\n").is_err());
        assert!(VisibilityMatrix::from_portable_str("1 5\n81\n").is_err());
        assert!(VisibilityMatrix::from_portable_str("2 4\nf\n").is_err());
        assert!(VisibilityMatrix::from_portable_str("1 4\nf\nf\n").is_err());
    }

    #[test]
    fn select_columns_and_rows() {
        let m = VisibilityMatrix::from_bool_rows(3, &[vec![true, false, true], vec![false, true, false]]).unwrap();
        let c = m.select_columns(&[2, 1]);
        assert_eq!(c.n(), 2);
        assert!(c.get(0, 0) && !c.get(0, 1) && !c.get(1, 0) && c.get(1, 1));
        let r = m.select_rows(&[1]);
        assert_eq!(r.m(), 1);
        assert_eq!(r.row(0), m.row(1));
    }

    proptest! {
        #[test]
        fn portable_round_trip(rows in prop::collection::vec(prop::collection::vec(any::<bool>(), 70), 0..6)) {
            let m = VisibilityMatrix::from_bool_rows(70, &rows).unwrap();
            let back = VisibilityMatrix::from_portable_str(&m.to_portable_string()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}

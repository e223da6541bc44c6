//! Plain-text BTA matrix format.
//!
//! ```text
//! bta <n_s> <n_t> <n_b>
//!
//! <D_1 rows>
//!
//! ...
//! <E_1 rows> ... <F_1 rows> ... <T rows>
//! ```
//!
//! Blocks appear in the order `D_1..D_{n_t}`, `E_1..E_{n_t-1}`,
//! `F_1..F_{n_t}`, `T`, one row per line, separated by blank lines. Blocks
//! with no rows are omitted.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::kernels::Block;

use super::{BtaLayout, BtaMatrix};

pub fn write_bta_string(q: &BtaMatrix) -> String {
    let lay = q.layout();
    let mut out = format!("bta {} {} {}\n", lay.n_s(), lay.n_t(), lay.n_b());
    let blocks = (0..lay.n_t())
        .map(|i| q.diag(i))
        .chain((0..lay.n_t() - 1).map(|i| q.sub(i)))
        .chain((0..lay.n_t()).map(|i| q.arrow(i)))
        .chain(std::iter::once(q.tip()));
    for block in blocks {
        if block.rows() == 0 {
            continue;
        }
        out.push('\n');
        for r in 0..block.rows() {
            let row: Vec<String> = block.row(r).iter().map(|&v| fmt_f64(v)).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out
}

pub fn parse_bta_str(text: &str, origin: &Path) -> Result<BtaMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "empty file, expected `bta <n_s> <n_t> <n_b>`"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "bta" {
        return Err(Error::parse(origin, hline, "expected header `bta <n_s> <n_t> <n_b>`"));
    }
    let dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(origin, hline, format!("invalid dimension `{s}`")))
    };
    let lay = BtaLayout::new(dim(fields[1])?, dim(fields[2])?, dim(fields[3])?)
        .map_err(|e| Error::parse(origin, hline, e.to_string()))?;
    let (s, t, b) = (lay.n_s(), lay.n_t(), lay.n_b());

    let mut read_block = |rows: usize, cols: usize| -> Result<Block> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(origin, 0, "unexpected end of file"))?;
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::parse(origin, ln, format!("invalid number `{tok}`")))?;
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(Error::parse(
                    origin,
                    ln,
                    format!("expected {cols} values, found {}", data.len() - before),
                ));
            }
        }
        Ok(Block::from_row_major(rows, cols, data))
    };

    let diag = (0..t).map(|_| read_block(s, s)).collect::<Result<Vec<_>>>()?;
    let sub = (0..t - 1).map(|_| read_block(s, s)).collect::<Result<Vec<_>>>()?;
    let arrow = (0..t).map(|_| read_block(b, s)).collect::<Result<Vec<_>>>()?;
    let tip = read_block(b, b)?;
    if let Some((ln, _)) = lines.next() {
        return Err(Error::parse(origin, ln, "trailing data after tip block"));
    }
    BtaMatrix::new(lay, diag, sub, arrow, tip).map_err(|e| Error::parse(origin, hline, e.to_string()))
}

pub fn read_bta_file(path: &Path) -> Result<BtaMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bta_str(&text, path)
}

pub fn write_bta_file(q: &BtaMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, write_bta_string(q)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn origin() -> &'static Path {
        Path::new("<test>")
    }

    #[test]
    fn small_example_layout() {
        let lay = BtaLayout::new(1, 2, 1).unwrap();
        let mut q = BtaMatrix::zeros(lay);
        q.diag_mut(0)[(0, 0)] = 2.0;
        q.diag_mut(1)[(0, 0)] = 2.0;
        q.sub_mut(0)[(0, 0)] = -1.0;
        q.arrow_mut(1)[(0, 0)] = 0.5;
        q.tip_mut()[(0, 0)] = 3.0;
        let text = write_bta_string(&q);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bta 1 2 1");
        assert_eq!(lines[1], "");
        assert_eq!(lines.iter().filter(|l| l.is_empty()).count(), 6);
        assert_eq!(parse_bta_str(&text, origin()).unwrap(), q);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_bta_str("bta 1 1 0\n\nabc\n", origin()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = parse_bta_str("bta 2 1 0\n1 2\n3\n", origin()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = parse_bta_str("matrix 1 1 0\n", origin()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
        let err = parse_bta_str("bta 1 1 0\n1\n2\n", origin()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless(
            n_s in 1usize..4, n_t in 1usize..4, n_b in 0usize..3,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let lay = BtaLayout::new(n_s, n_t, n_b).unwrap();
            let mut q = BtaMatrix::zeros(lay);
            let mut fill = |b: &mut Block| {
                for v in b.as_mut_slice() {
                    *v = rng.random::<f64>() * 10f64.powi(rng.random_range(-300..300));
                }
            };
            for i in 0..n_t { fill(q.diag_mut(i)); fill(q.arrow_mut(i)); }
            for i in 0..n_t - 1 { fill(q.sub_mut(i)); }
            fill(q.tip_mut());
            let back = parse_bta_str(&write_bta_string(&q), origin()).unwrap();
            prop_assert_eq!(back, q);
        }
    }
}

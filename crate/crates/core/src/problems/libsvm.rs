use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::Dataset;
use crate::{Error, Result};

/// Reads the sparse `label idx:val ...` text format (1-based indices).
///
/// The dimension is the largest index seen unless `dim` overrides it.
pub fn load_libsvm(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Dataset> {
    let file = File::open(path)?;
    parse_libsvm(BufReader::new(file), dim)
}

pub fn parse_libsvm<R: BufRead>(reader: R, dim: Option<usize>) -> Result<Dataset> {
    let mut rows: Vec<(f64, Vec<(u32, f64)>)> = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let mut tokens = content.split_ascii_whitespace();
        let label_tok = tokens.next().expect("nonempty line");
        let label: f64 = label_tok.parse().map_err(|_| err(format!("bad label {label_tok:?}")))?;
        let mut feats = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (i, v) = tok.split_once(':').ok_or_else(|| err(format!("expected idx:val, got {tok:?}")))?;
            if i == "qid" {
                continue;
            }
            let idx: usize = i.parse().map_err(|_| err(format!("bad index {i:?}")))?;
            if idx == 0 {
                return Err(err("indices are 1-based".into()));
            }
            if idx <= prev {
                return Err(err(format!("index {idx} not increasing")));
            }
            prev = idx;
            let val: f64 = v.parse().map_err(|_| err(format!("bad value {v:?}")))?;
            max_index = max_index.max(idx);
            feats.push(((idx - 1) as u32, val));
        }
        rows.push((label, feats));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = match dim {
        Some(d) if d < max_index => {
            return Err(Error::Config(format!("dimension override {d} smaller than max index {max_index}")))
        }
        Some(d) => d,
        None => max_index,
    };
    let mut data = Dataset::new(d);
    for (label, feats) in rows {
        data.push_row(label, &feats)?;
    }
    Ok(data)
}

pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    for i in 0..data.len() {
        write!(out, "{}", data.label(i))?;
        let (idx, val) = data.row(i);
        for (j, v) in idx.iter().zip(val) {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_examples() {
        let d = parse_libsvm("1 3:0.5\n".as_bytes(), None).unwrap();
        assert_eq!(d.label(0), 1.0);
        assert_eq!(d.row(0), (&[2u32][..], &[0.5][..]));
        assert_eq!(d.dim(), 3);
        let d = parse_libsvm("-1 1:1 2:2\n".as_bytes(), None).unwrap();
        assert_eq!(d.label(0), -1.0);
        assert_eq!(d.row(0).1, &[1.0, 2.0]);
    }

    #[test]
    fn reports_line_numbers() {
        let text = "1 1:0.5\n\n-1 2:x\n";
        match parse_libsvm(text.as_bytes(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_libsvm("+1 0:1\n".as_bytes(), None), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_libsvm("".as_bytes(), None), Err(Error::EmptyDataset)));
        assert!(matches!(parse_libsvm("1 4:1\n".as_bytes(), Some(2)), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn write_read_roundtrip(rows in prop::collection::vec((prop::bool::ANY, prop::collection::btree_map(0u32..50, -1e6f32..1e6f32, 0..10)), 1..20)) {
            let mut data = Dataset::new(50);
            for (pos, feats) in &rows {
                let f: Vec<(u32, f64)> = feats.iter().map(|(&j, &v)| (j, v as f64)).collect();
                data.push_row(if *pos { 1.0 } else { -1.0 }, &f).unwrap();
            }
            let mut buf = Vec::new();
            write_libsvm(&data, &mut buf).unwrap();
            let back = parse_libsvm(buf.as_slice(), Some(50)).unwrap();
            prop_assert_eq!(back, data);
        }
    }
}

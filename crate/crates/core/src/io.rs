//! CSV reading and writing for counts, dense matrices and block
//! autocovariances. Floats are written with 17 significant digits.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::acvf::BlockAcvf;
use crate::error::{Error, Result};

/// Float with 17 significant digits; `NaN`, `inf`, `-inf` for non-finite values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("not a number: {s:?}")))
}

/// Counts as `t,x_1..x_d`, optionally followed by the latent `z_1..z_d`.
pub fn write_counts<W: Write>(w: W, x: &DMatrix<u64>, z: Option<&DMatrix<f64>>) -> Result<()> {
    let d = x.ncols();
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    if z.is_some() {
        header.extend((1..=d).map(|i| format!("z_{i}")));
    }
    wr.write_record(&header)?;
    for t in 0..x.nrows() {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend((0..d).map(|i| x[(t, i)].to_string()));
        if let Some(z) = z {
            rec.extend((0..d).map(|i| fmt_f64(z[(t, i)])));
        }
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads the `x_*` columns of a counts CSV; without such columns every
/// column except `t` is taken as a count.
pub fn read_counts<R: Read>(r: R) -> Result<DMatrix<u64>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let header = rd.headers()?.clone();
    let mut cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("x_"))
        .map(|(i, _)| i)
        .collect();
    if cols.is_empty() {
        cols = header
            .iter()
            .enumerate()
            .filter(|(_, h)| *h != "t")
            .map(|(i, _)| i)
            .collect();
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec?;
        for &c in &cols {
            let field = rec
                .get(c)
                .ok_or_else(|| Error::Config("short row in counts CSV".into()))?;
            let v = field
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("not a nonnegative count: {field:?}")))?;
            data.push(v);
        }
        rows += 1;
    }
    if cols.is_empty() {
        return Err(Error::Config("counts CSV has no count columns".into()));
    }
    Ok(DMatrix::from_row_slice(rows, cols.len(), &data))
}

/// Dense matrix with header `c_1..c_n`.
pub fn write_matrix<W: Write>(w: W, m: &DMatrix<f64>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record((1..=m.ncols()).map(|j| format!("c_{j}")))?;
    for i in 0..m.nrows() {
        wr.write_record(m.row(i).iter().map(|&v| fmt_f64(v)))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let ncols = rd.headers()?.len();
    let mut data = Vec::new();
    for rec in rd.records() {
        for f in rec?.iter() {
            data.push(parse_f64(f)?);
        }
    }
    Ok(DMatrix::from_row_slice(data.len() / ncols.max(1), ncols, &data))
}

/// Block autocovariance: an `l,d` header line with its values, then the
/// lags `0..=L` stacked as rows `lag,row,c_1..c_d`.
pub fn write_block_acvf<W: Write>(w: W, b: &BlockAcvf) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
    wr.write_record(["l", "d"])?;
    wr.write_record([b.l.to_string(), b.d.to_string()])?;
    let mut header = vec!["lag".to_string(), "row".to_string()];
    header.extend((1..=b.d).map(|j| format!("c_{j}")));
    wr.write_record(&header)?;
    for (h, g) in b.lags.iter().enumerate() {
        for i in 0..b.d {
            let mut rec = vec![h.to_string(), (i + 1).to_string()];
            rec.extend(g.row(i).iter().map(|&v| fmt_f64(v)));
            wr.write_record(&rec)?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn read_block_acvf<R: Read>(r: R) -> Result<BlockAcvf> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(r);
    let recs: Vec<csv::StringRecord> = rd.records().collect::<std::result::Result<_, _>>()?;
    let bad = || Error::Config("malformed block autocovariance CSV".into());
    if recs.len() < 3 {
        return Err(bad());
    }
    let l: usize = recs[1].get(0).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
    let d: usize = recs[1].get(1).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
    let mut lags = vec![DMatrix::zeros(d, d); l + 1];
    for rec in &recs[3..] {
        let h: usize = rec.get(0).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        let i: usize = rec.get(1).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        if h > l || i == 0 || i > d || rec.len() != d + 2 {
            return Err(bad());
        }
        for j in 0..d {
            lags[h][(i - 1, j)] = parse_f64(&rec[j + 2])?;
        }
    }
    BlockAcvf::from_lags(lags, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for &v in &[0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn counts_round_trip() {
        let x = DMatrix::from_row_slice(3, 2, &[0, 1, 2, 3, 4, 5]);
        let z = DMatrix::from_element(3, 2, 0.25);
        let mut buf = Vec::new();
        write_counts(&mut buf, &x, Some(&z)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x_1,x_2,z_1,z_2\n1,0,1,"));
        assert_eq!(read_counts(buf.as_slice()).unwrap(), x);
    }

    #[test]
    fn block_round_trip() {
        let lags = vec![
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, &[0.1, 0.2, -0.3, 0.4]),
        ];
        let b = BlockAcvf::from_lags(lags, 0).unwrap();
        let mut buf = Vec::new();
        write_block_acvf(&mut buf, &b).unwrap();
        let back = read_block_acvf(buf.as_slice()).unwrap();
        assert_eq!(back.lags, b.lags);
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.5]);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
    }
}

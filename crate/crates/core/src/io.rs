//! Matrix, model, label, and report files.
//!
//! Raw matrices: the 8-byte magic `JDZSLMAT`, a version byte (1), a dtype byte
//! (1 = little-endian f64), two zero bytes, `u64` rows and `u64` cols (little
//! endian), then the values row-major. Paths ending in `.csv` hold one matrix
//! row per line instead.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::ClassId;
use crate::error::{Error, Result};
use crate::joint_dict::JointDictionary;
use crate::linalg::DenseMatrix;
use crate::params::HyperParams;

pub const MATRIX_MAGIC: &[u8; 8] = b"JDZSLMAT";
pub const MATRIX_VERSION: u8 = 1;
pub const DTYPE_F64_LE: u8 = 1;
pub const MODEL_MAGIC: &[u8; 8] = b"JDZSLMDL";
pub const MODEL_VERSION: u8 = 1;

/// Refuse headers that would need more than this many values.
const MAX_ELEMENTS: u64 = 1 << 34;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Raw,
}

impl MatrixFormat {
    /// `.csv` (any case) selects CSV; everything else is raw.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Raw,
        }
    }
}

fn read_exact_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated file".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub fn write_matrix_raw<W: Write>(w: &mut W, m: &DenseMatrix) -> Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&[MATRIX_VERSION, DTYPE_F64_LE, 0, 0])?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix_raw<R: Read>(r: &mut R) -> Result<DenseMatrix> {
    let m = read_raw_block(r)?;
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format("trailing bytes after matrix data".into()));
    }
    Ok(m)
}

/// One raw matrix, leaving any following bytes unread.
fn read_raw_block<R: Read>(r: &mut R) -> Result<DenseMatrix> {
    let magic: [u8; 8] = read_exact_array(r)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Format("not a raw matrix file (bad magic)".into()));
    }
    let [version, dtype, r0, r1]: [u8; 4] = read_exact_array(r)?;
    if version != MATRIX_VERSION {
        return Err(Error::Format(format!("unsupported matrix version {version}")));
    }
    if dtype != DTYPE_F64_LE {
        return Err(Error::Format(format!("unsupported dtype {dtype}")));
    }
    if r0 != 0 || r1 != 0 {
        return Err(Error::Format("reserved header bytes must be zero".into()));
    }
    let rows = u64::from_le_bytes(read_exact_array(r)?);
    let cols = u64::from_le_bytes(read_exact_array(r)?);
    let len = rows
        .checked_mul(cols)
        .filter(|&n| n <= MAX_ELEMENTS)
        .ok_or_else(|| Error::Format(format!("matrix {rows}x{cols} is too large")))?;
    let mut data = Vec::with_capacity(len as usize);
    for _ in 0..len {
        data.push(f64::from_le_bytes(read_exact_array(r)?));
    }
    DenseMatrix::new(rows as usize, cols as usize, data)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

/// One row per record, 17 significant digits, so values survive exactly.
pub fn write_matrix_csv<W: Write>(w: W, m: &DenseMatrix) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..m.rows() {
        out.write_record(m.row(i).iter().map(|v| format!("{v:.16e}")))
            .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(r: R) -> Result<DenseMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Format(format!("row {rows} has {} fields", rec.len())));
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Format(format!("row {rows}: cannot parse '{field}'")))?;
            data.push(v);
        }
        rows += 1;
    }
    DenseMatrix::new(rows, cols.unwrap_or(0), data)
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let file = BufReader::new(File::open(path)?);
    match MatrixFormat::from_path(path) {
        MatrixFormat::Csv => read_matrix_csv(file),
        MatrixFormat::Raw => read_matrix_raw(&mut { file }),
    }
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    match MatrixFormat::from_path(path) {
        MatrixFormat::Csv => write_matrix_csv(&mut file, m)?,
        MatrixFormat::Raw => write_matrix_raw(&mut file, m)?,
    }
    file.flush()?;
    Ok(())
}

/// Model layout: magic `JDZSLMDL`, version byte, `u64` length of the
/// hyperparameter text, the text itself (UTF-8 `key=value` lines), then `D_x`
/// and `D_z` as raw matrices.
pub fn write_model<W: Write>(w: &mut W, dict: &JointDictionary, params: &HyperParams) -> Result<()> {
    let text = params.to_kv_text();
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&[MODEL_VERSION])?;
    w.write_all(&(text.len() as u64).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    write_matrix_raw(w, dict.dx())?;
    write_matrix_raw(w, dict.dz())?;
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<(JointDictionary, HyperParams)> {
    let magic: [u8; 8] = read_exact_array(r)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let [version]: [u8; 1] = read_exact_array(r)?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let len = u64::from_le_bytes(read_exact_array(r)?);
    if len > 1 << 20 {
        return Err(Error::Format("model parameter block is too large".into()));
    }
    let mut text = vec![0u8; len as usize];
    r.read_exact(&mut text)
        .map_err(|_| Error::Format("truncated model parameters".into()))?;
    let text = String::from_utf8(text).map_err(|_| Error::Format("model parameters are not UTF-8".into()))?;
    let mut params = HyperParams::default();
    let unknown = params.apply_kv_text(&text)?;
    if let Some((k, _)) = unknown.first() {
        return Err(Error::Format(format!("unknown model parameter '{k}'")));
    }
    let dx = read_raw_block(r)?;
    let dz = read_raw_block(r)?;
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format("trailing bytes after model".into()));
    }
    Ok((JointDictionary::new(dx, dz)?, params))
}

pub fn save_model(path: &Path, dict: &JointDictionary, params: &HyperParams) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    write_model(&mut file, dict, params)?;
    file.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(JointDictionary, HyperParams)> {
    read_model(&mut BufReader::new(File::open(path)?))
}

/// Whitespace-separated class ids; `#` starts a comment. Used for label and
/// split files alike.
pub fn parse_class_ids(text: &str) -> Result<Vec<ClassId>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Format(format!("invalid class id '{t}'")))
        })
        .collect()
}

pub fn read_class_ids(path: &Path) -> Result<Vec<ClassId>> {
    parse_class_ids(&std::fs::read_to_string(path)?)
}

pub fn write_class_ids(path: &Path, ids: &[ClassId]) -> Result<()> {
    let mut text = String::with_capacity(ids.len() * 4);
    for id in ids {
        text.push_str(&id.to_string());
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// One value per line in shortest round-trip form.
pub fn write_values(path: &Path, values: &[f64]) -> Result<()> {
    let text: String = values.iter().map(|v| format!("{v:?}\n")).collect();
    std::fs::write(path, text)?;
    Ok(())
}

/// Graph coordinates as `node_id,is_prototype,x,y,label`. Prototype nodes come
/// first. A one-dimensional embedding reports `y = 0`.
pub fn write_embedding_csv<W: Write>(
    w: W,
    embedding: &DenseMatrix,
    n_prototypes: usize,
    labels: &[ClassId],
) -> Result<()> {
    let n = embedding.cols();
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} embedded nodes", labels.len())));
    }
    if n_prototypes > n {
        return Err(Error::Dimension("more prototypes than embedded nodes".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["node_id", "is_prototype", "x", "y", "label"])
        .map_err(csv_error)?;
    for j in 0..n {
        let x = embedding.get(0, j);
        let y = if embedding.rows() > 1 { embedding.get(1, j) } else { 0.0 };
        out.write_record([
            j.to_string(),
            u8::from(j < n_prototypes).to_string(),
            format!("{x:.16e}"),
            format!("{y:.16e}"),
            labels[j].to_string(),
        ])
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DenseMatrix {
        DenseMatrix::new(2, 3, vec![1.0, -0.1, 1e-300, 3.0e10, f64::MIN_POSITIVE, 1.0 / 3.0]).unwrap()
    }

    #[test]
    fn raw_header_layout() {
        let mut buf = Vec::new();
        write_matrix_raw(&mut buf, &sample()).unwrap();
        assert_eq!(&buf[..8], b"JDZSLMAT");
        assert_eq!(&buf[8..12], &[1, 1, 0, 0]);
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[20..28].try_into().unwrap()), 3);
        assert_eq!(buf.len(), 28 + 6 * 8);
        assert_eq!(f64::from_le_bytes(buf[28..36].try_into().unwrap()), 1.0);
    }

    #[test]
    fn raw_round_trip_bits() {
        let m = sample();
        let mut buf = Vec::new();
        write_matrix_raw(&mut buf, &m).unwrap();
        let back = read_matrix_raw(&mut buf.as_slice()).unwrap();
        assert_eq!(back.shape(), m.shape());
        for (a, b) in back.data().iter().zip(m.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn raw_rejects_corruption() {
        let mut buf = Vec::new();
        write_matrix_raw(&mut buf, &sample()).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_matrix_raw(&mut bad.as_slice()), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[8] = 2;
        assert!(read_matrix_raw(&mut bad.as_slice()).is_err());
        let bad = &buf[..buf.len() - 1];
        assert!(matches!(read_matrix_raw(&mut &bad[..]), Err(Error::Format(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(read_matrix_raw(&mut long.as_slice()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let m = sample();
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m).unwrap();
        let back = read_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn csv_ragged_rows() {
        assert!(read_matrix_csv("1,2\n3\n".as_bytes()).is_err());
        assert!(read_matrix_csv("1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn model_round_trip() {
        let params = HyperParams {
            lambda: 0.3,
            r: 3,
            ..HyperParams::default()
        };
        let dx = DenseMatrix::new(2, 3, vec![0.6, 0.8, 0.0, 0.8, -0.6, 1.0 / 7.0]).unwrap();
        let dz = DenseMatrix::new(1, 3, vec![1.0, -1.0, 0.1]).unwrap();
        let dict = JointDictionary::new(dx, dz).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &dict, &params).unwrap();
        let (d2, p2) = read_model(&mut buf.as_slice()).unwrap();
        assert_eq!(d2.dx(), dict.dx());
        assert_eq!(d2.dz(), dict.dz());
        assert_eq!(p2, params);
    }

    #[test]
    fn class_id_parsing() {
        assert_eq!(parse_class_ids("3\n 4  # note\n\n5 6\n").unwrap(), vec![3, 4, 5, 6]);
        assert!(parse_class_ids("-1\n").is_err());
    }

    #[test]
    fn embedding_csv_header() {
        let e = DenseMatrix::new(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        write_embedding_csv(&mut buf, &e, 1, &[5, 6]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("node_id,is_prototype,x,y,label"));
        assert!(lines.next().unwrap().starts_with("0,1,"));
        assert!(lines.next().unwrap().ends_with(",6"));
    }
}

//! Field dumps: one JSON header line followed by row-major cell records of
//! five coefficients, as CSV text or little-endian f64.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, CellKind, Domain, Field};
use crate::potential::derive_params;
use crate::qtensor::QTensor;

pub const DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Csv,
    F64le,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpHeader {
    pub version: u32,
    pub n: usize,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub domain: Domain,
    pub epsilon: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub encoding: Encoding,
}

pub fn write_field<W: Write>(field: &Field, encoding: Encoding, mut w: W) -> std::io::Result<()> {
    let g = &*field.grid;
    let header = DumpHeader {
        version: DUMP_VERSION,
        n: g.n,
        nx: g.nx,
        ny: g.ny,
        h: g.h,
        domain: g.domain,
        epsilon: field.epsilon,
        a: field.params.a,
        b: field.params.b,
        c: field.params.c,
        encoding,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for (q, kind) in field.values.iter().zip(&g.kinds) {
        let v = if *kind == CellKind::Exterior { QTensor::ZERO } else { *q };
        let c = v.coeffs();
        match encoding {
            Encoding::Csv => writeln!(w, "{:e},{:e},{:e},{:e},{:e}", c[0], c[1], c[2], c[3], c[4])?,
            Encoding::F64le => {
                for x in c {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()
}

pub fn read_field<R: Read>(r: R) -> Result<Field> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line)
        .map_err(|e| Error::DumpCorrupt(format!("header: {e}")))?;
    let value: serde_json::Value =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::DumpCorrupt(format!("header: {e}")))?;
    let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != DUMP_VERSION {
        return Err(Error::VersionMismatch {
            found,
            expected: DUMP_VERSION,
        });
    }
    let header: DumpHeader =
        serde_json::from_value(value).map_err(|e| Error::DumpCorrupt(format!("header: {e}")))?;
    let params = derive_params(header.a, header.b, header.c)
        .map_err(|e| Error::DumpCorrupt(format!("material: {e}")))?;
    let grid = build_grid(header.domain, header.n)
        .map_err(|e| Error::DumpCorrupt(format!("grid: {e}")))?;
    if grid.nx != header.nx || grid.ny != header.ny || grid.h.to_bits() != header.h.to_bits() {
        return Err(Error::DumpCorrupt("grid dimensions disagree with the domain".into()));
    }
    let cells = grid.len();
    let mut values = Vec::with_capacity(cells);
    match header.encoding {
        Encoding::Csv => {
            let mut lines = r.lines();
            for k in 0..cells {
                let text = lines
                    .next()
                    .ok_or_else(|| Error::DumpCorrupt(format!("truncated at record {k} of {cells}")))?
                    .map_err(|e| Error::DumpCorrupt(format!("record {k}: {e}")))?;
                let parts: Vec<f64> = text
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::DumpCorrupt(format!("record {k}: {e}")))?;
                let coeffs: [f64; 5] = parts
                    .try_into()
                    .map_err(|_| Error::DumpCorrupt(format!("record {k}: expected 5 values")))?;
                values.push(QTensor::new(coeffs));
            }
            if lines.any(|l| l.map_or(true, |l| !l.trim().is_empty())) {
                return Err(Error::DumpCorrupt("trailing data after the last record".into()));
            }
        }
        Encoding::F64le => {
            let mut bytes = Vec::new();
            r.read_to_end(&mut bytes)
                .map_err(|e| Error::DumpCorrupt(format!("records: {e}")))?;
            if bytes.len() != cells * 40 {
                return Err(Error::DumpCorrupt(format!(
                    "expected {} bytes of records, found {}",
                    cells * 40,
                    bytes.len()
                )));
            }
            for rec in bytes.chunks_exact(40) {
                let mut c = [0.0; 5];
                for (x, b) in c.iter_mut().zip(rec.chunks_exact(8)) {
                    *x = f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
                }
                values.push(QTensor::new(c));
            }
        }
    }
    Ok(Field {
        grid: Arc::new(grid),
        values,
        epsilon: header.epsilon,
        params,
    })
}

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
        contents(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(ctx(), e));
    }
    Ok(())
}

pub fn save_field(field: &Field, encoding: Encoding, path: &Path) -> Result<()> {
    write_atomic(path, |w| write_field(field, encoding, w))
}

pub fn load_field(path: &Path) -> Result<Field> {
    let f = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    read_field(f)
}

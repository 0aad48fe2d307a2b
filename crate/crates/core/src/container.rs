//! Binary containers for transforms, low-rank models and cached datasets.
//!
//! All integers are little-endian `u32`, all reals little-endian IEEE-754
//! `f64`, and matrices are stored column-major. Strings are a `u32` byte
//! length followed by UTF-8.
//!
//! ```text
//! transform: "LRT1" | d | kind:u8 (0 global, 1 per-class) | class | d*d reals
//! model:     "LRM1" | mode:u8 | d | N | beta flag:u8 | beta | tol | max_iter
//!            | #transforms | transform records
//!            | N x (name | cols | converged:u8 | d*cols reals)
//! dataset:   "LRD1" | d | K | N | N names | d*K reals | K labels | K conditions
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::classifier::{LowRankModel, ModelMode, TransformSet};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::lrt::{Transform, TransformKind};
use crate::rpca::RpcaConfig;

pub const TRANSFORM_MAGIC: &[u8; 4] = b"LRT1";
pub const MODEL_MAGIC: &[u8; 4] = b"LRM1";
pub const DATASET_MAGIC: &[u8; 4] = b"LRD1";

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("container sizes fit in u32");
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn put_matrix(out: &mut Vec<u8>, m: &Matrix) {
    for v in m.iter() {
        put_f64(out, *v);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn magic(&mut self, want: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != want {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(want)
            )));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Format(e.to_string()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let n = rows
            .checked_mul(cols)
            .filter(|n| n.checked_mul(8).is_some_and(|b| b <= self.buf.len() - self.pos))
            .ok_or_else(|| Error::Format(format!("matrix {rows}x{cols} exceeds remaining bytes")))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(self.f64()?);
        }
        Ok(Matrix::from_vec(rows, cols, data))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn write_transform_record(out: &mut Vec<u8>, t: &Transform) {
    out.extend_from_slice(TRANSFORM_MAGIC);
    put_u32(out, t.dim());
    match t.kind {
        TransformKind::Global => {
            out.push(0);
            put_u32(out, 0);
        }
        TransformKind::PerClass(c) => {
            out.push(1);
            put_u32(out, c);
        }
    }
    put_matrix(out, &t.matrix);
}

fn read_transform_record(r: &mut Reader<'_>) -> Result<Transform> {
    r.magic(TRANSFORM_MAGIC)?;
    let d = r.u32()?;
    let tag = r.u8()?;
    let class = r.u32()?;
    let kind = match tag {
        0 => TransformKind::Global,
        1 => TransformKind::PerClass(class),
        t => return Err(Error::Format(format!("unknown transform kind tag {t}"))),
    };
    let matrix = r.matrix(d, d)?;
    Transform::new(matrix, kind)
}

pub fn encode_transform(t: &Transform) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 8 * t.dim() * t.dim());
    write_transform_record(&mut out, t);
    out
}

pub fn decode_transform(bytes: &[u8]) -> Result<Transform> {
    let mut r = Reader::new(bytes);
    let t = read_transform_record(&mut r)?;
    r.finish()?;
    Ok(t)
}

pub fn encode_model(model: &LowRankModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.push(match model.mode() {
        ModelMode::Global => 0,
        ModelMode::PerClass => 1,
    });
    put_u32(&mut out, model.dim());
    put_u32(&mut out, model.num_classes());
    out.push(model.rpca.beta.is_some() as u8);
    put_f64(&mut out, model.rpca.beta.unwrap_or(0.0));
    put_f64(&mut out, model.rpca.tol);
    put_u32(&mut out, model.rpca.max_iter);
    let ts = model.transforms.transforms();
    put_u32(&mut out, ts.len());
    for t in ts {
        write_transform_record(&mut out, t);
    }
    for (c, l) in model.dictionaries.iter().enumerate() {
        put_str(&mut out, &model.class_names[c]);
        put_u32(&mut out, l.ncols());
        out.push(!model.unconverged.contains(&c) as u8);
        put_matrix(&mut out, l);
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<LowRankModel> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    let mode = r.u8()?;
    let d = r.u32()?;
    let n = r.u32()?;
    let has_beta = r.u8()? != 0;
    let beta = r.f64()?;
    let tol = r.f64()?;
    let max_iter = r.u32()?;
    let count = r.u32()?;
    let mut transforms = Vec::new();
    for _ in 0..count {
        transforms.push(read_transform_record(&mut r)?);
    }
    let transforms = match (mode, transforms.len()) {
        (0, 1) => TransformSet::Global(transforms.pop().unwrap()),
        (1, _) => TransformSet::PerClass(transforms),
        (m, k) => return Err(Error::Format(format!("mode {m} with {k} transforms"))),
    };
    let mut dictionaries = Vec::new();
    let mut class_names = Vec::new();
    let mut unconverged = Vec::new();
    for c in 0..n {
        class_names.push(r.string()?);
        let cols = r.u32()?;
        if r.u8()? == 0 {
            unconverged.push(c);
        }
        dictionaries.push(r.matrix(d, cols)?);
    }
    r.finish()?;
    let model = LowRankModel {
        dictionaries,
        transforms,
        rpca: RpcaConfig {
            beta: has_beta.then_some(beta),
            tol,
            max_iter,
        },
        class_names,
        unconverged,
    };
    model.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(model)
}

pub fn encode_dataset(data: &DataMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * data.dim() * data.len());
    out.extend_from_slice(DATASET_MAGIC);
    put_u32(&mut out, data.dim());
    put_u32(&mut out, data.len());
    put_u32(&mut out, data.num_classes());
    for name in data.class_names() {
        put_str(&mut out, name);
    }
    put_matrix(&mut out, data.samples());
    for &l in data.labels() {
        put_u32(&mut out, l);
    }
    for c in data.conditions() {
        put_str(&mut out, c);
    }
    out
}

pub fn decode_dataset(bytes: &[u8]) -> Result<DataMatrix> {
    let mut r = Reader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    let d = r.u32()?;
    let k = r.u32()?;
    let n = r.u32()?;
    let names = (0..n).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    let samples = r.matrix(d, k)?;
    let labels = (0..k).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let conditions = (0..k).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    DataMatrix::with_metadata(samples, labels, conditions, names)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Format(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn save_transform(path: &Path, t: &Transform) -> Result<()> {
    write_atomic(path, &encode_transform(t))
}

pub fn load_transform(path: &Path) -> Result<Transform> {
    decode_transform(&fs::read(path)?)
}

pub fn save_model(path: &Path, m: &LowRankModel) -> Result<()> {
    write_atomic(path, &encode_model(m))
}

pub fn load_model(path: &Path) -> Result<LowRankModel> {
    decode_model(&fs::read(path)?)
}

pub fn save_dataset(path: &Path, d: &DataMatrix) -> Result<()> {
    write_atomic(path, &encode_dataset(d))
}

pub fn load_dataset(path: &Path) -> Result<DataMatrix> {
    decode_dataset(&fs::read(path)?)
}

//! Binary field container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "STRMFLD\0"
//! version    u32
//! n_meta     u32
//!   key      u16 length + UTF-8
//!   value    f64
//! n_records  u32
//!   name     u16 length + UTF-8
//!   kind     u8       0 scalar, 1 form, 2 endomorphism, 3 metric, 4 end-valued form
//!   p, q     u8, u8
//!   rank     u8
//!   points   u32
//!   mask     u8       active axes, bit i = axis i
//!   periods  6 × f64
//!   ncomp    u32
//!   data     ncomp × sites × (re f64, im f64), component-major
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use balanced_core::bundle::EndField;
use balanced_core::form::{EndForm, FormField};
use balanced_core::hermitian::HermitianMetric;
use balanced_core::{Field, Lattice, C64};

pub const MAGIC: &[u8; 8] = b"STRMFLD\0";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("{file}: {source}")]
    Io { file: PathBuf, source: std::io::Error },
    #[error("{file} at byte {offset}: {message}")]
    Malformed { file: PathBuf, offset: usize, message: String },
    #[error("{file}: no record named {name:?}")]
    Missing { file: PathBuf, name: String },
    #[error("{file}: record {name:?} is {found}, expected {expected}")]
    WrongKind { file: PathBuf, name: String, expected: String, found: String },
    #[error("{file}: record {name:?}: {source}")]
    Invalid { file: PathBuf, name: String, source: balanced_core::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Scalar,
    Form,
    End,
    Metric,
    EndForm,
}

impl Kind {
    fn code(self) -> u8 {
        match self {
            Kind::Scalar => 0,
            Kind::Form => 1,
            Kind::End => 2,
            Kind::Metric => 3,
            Kind::EndForm => 4,
        }
    }

    fn from_code(c: u8) -> Option<Kind> {
        Some(match c {
            0 => Kind::Scalar,
            1 => Kind::Form,
            2 => Kind::End,
            3 => Kind::Metric,
            4 => Kind::EndForm,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub name: String,
    pub kind: Kind,
    pub p: u8,
    pub q: u8,
    pub rank: u8,
    pub field: Field,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Container {
    pub metadata: BTreeMap<String, f64>,
    pub records: Vec<Record>,
    /// Where the container was read from, for error messages.
    pub source: Option<PathBuf>,
}

impl Container {
    pub fn new() -> Container {
        Container::default()
    }

    pub fn meta(mut self, key: &str, value: f64) -> Container {
        self.metadata.insert(key.to_string(), value);
        self
    }

    pub fn push(&mut self, name: &str, kind: Kind, p: usize, q: usize, rank: usize, field: Field) {
        self.records.retain(|r| r.name != name);
        self.records.push(Record { name: name.to_string(), kind, p: p as u8, q: q as u8, rank: rank as u8, field });
    }

    pub fn push_form(&mut self, name: &str, f: &FormField) {
        let (p, q) = f.bidegree();
        self.push(name, Kind::Form, p, q, 0, f.field().clone());
    }

    pub fn push_end(&mut self, name: &str, u: &EndField) {
        self.push(name, Kind::End, 0, 0, u.rank(), u.field().clone());
    }

    pub fn push_end_form(&mut self, name: &str, f: &EndForm) {
        let (p, q) = f.bidegree();
        self.push(name, Kind::EndForm, p, q, f.rank(), f.field().clone());
    }

    pub fn push_metric(&mut self, name: &str, g: &HermitianMetric) {
        self.push(name, Kind::Metric, 1, 1, 3, g.to_field());
    }

    fn file(&self) -> PathBuf {
        self.source.clone().unwrap_or_else(|| PathBuf::from("<memory>"))
    }

    pub fn record(&self, name: &str) -> Result<&Record, ContainerError> {
        self.records
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| ContainerError::Missing { file: self.file(), name: name.to_string() })
    }

    fn expect(&self, name: &str, kind: Kind) -> Result<&Record, ContainerError> {
        let r = self.record(name)?;
        if r.kind != kind {
            return Err(ContainerError::WrongKind {
                file: self.file(),
                name: name.to_string(),
                expected: format!("{kind:?}"),
                found: format!("{:?}", r.kind),
            });
        }
        Ok(r)
    }

    fn invalid(&self, name: &str) -> impl FnOnce(balanced_core::Error) -> ContainerError {
        let file = self.file();
        let name = name.to_string();
        move |source| ContainerError::Invalid { file, name, source }
    }

    pub fn form(&self, name: &str) -> Result<FormField, ContainerError> {
        let r = self.expect(name, Kind::Form)?;
        FormField::from_field(r.p as usize, r.q as usize, r.field.clone()).map_err(self.invalid(name))
    }

    pub fn end(&self, name: &str) -> Result<EndField, ContainerError> {
        let r = self.expect(name, Kind::End)?;
        EndField::from_field(r.rank as usize, r.field.clone()).map_err(self.invalid(name))
    }

    pub fn metric(&self, name: &str) -> Result<HermitianMetric, ContainerError> {
        let r = self.expect(name, Kind::Metric)?;
        HermitianMetric::from_field(&r.field).map_err(self.invalid(name))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        for (k, v) in &self.metadata {
            put_str(&mut out, k);
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            put_str(&mut out, &r.name);
            out.extend_from_slice(&[r.kind.code(), r.p, r.q, r.rank]);
            let l = r.field.lattice();
            out.extend_from_slice(&(l.points_per_axis() as u32).to_le_bytes());
            out.push(l.active_mask());
            for p in l.periods() {
                out.extend_from_slice(&p.to_le_bytes());
            }
            out.extend_from_slice(&(r.field.ncomp() as u32).to_le_bytes());
            for z in r.field.data() {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], file: &Path) -> Result<Container, ContainerError> {
        let mut rd = Reader { bytes, pos: 0, file };
        let magic = rd.take(8, "magic")?;
        if magic != MAGIC {
            return Err(rd.error_at(0, "bad magic, not a field container"));
        }
        let at = rd.pos;
        let version = rd.u32("version")?;
        if version != VERSION {
            return Err(rd.error_at(at, &format!("unsupported version {version}")));
        }
        let mut metadata = BTreeMap::new();
        for _ in 0..rd.u32("metadata count")? {
            let k = rd.string("metadata key")?;
            let v = rd.f64("metadata value")?;
            metadata.insert(k, v);
        }
        let n = rd.u32("record count")?;
        let mut records = Vec::new();
        for _ in 0..n {
            let name = rd.string("record name")?;
            let at = rd.pos;
            let head: [u8; 4] = rd.take(4, "record header")?.try_into().unwrap();
            let kind = Kind::from_code(head[0]).ok_or_else(|| rd.error_at(at, &format!("unknown kind {}", head[0])))?;
            let (p, q, rank) = (head[1], head[2], head[3]);
            let at = rd.pos;
            let points = rd.u32("points")? as usize;
            let mask = rd.take(1, "axis mask")?[0];
            let mut periods = [0.0; 6];
            for p in periods.iter_mut() {
                *p = rd.f64("period")?;
            }
            let lattice =
                Lattice::from_mask(points, periods, mask).map_err(|e| rd.error_at(at, &format!("bad lattice: {e}")))?;
            let at = rd.pos;
            let ncomp = rd.u32("component count")? as usize;
            let count = ncomp
                .checked_mul(lattice.len())
                .filter(|c| c.checked_mul(16).is_some_and(|b| b <= rd.remaining()))
                .ok_or_else(|| rd.error_at(at, "data block larger than the file"))?;
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                let re = rd.f64("data")?;
                let im = rd.f64("data")?;
                data.push(C64::new(re, im));
            }
            let field = Field::from_data(lattice, ncomp, data).map_err(|e| rd.error_at(at, &e.to_string()))?;
            records.push(Record { name, kind, p, q, rank, field });
        }
        if rd.remaining() != 0 {
            return Err(rd.error_at(rd.pos, "trailing bytes"));
        }
        Ok(Container { metadata, records, source: Some(file.to_path_buf()) })
    }

    pub fn read(path: &Path) -> Result<Container, ContainerError> {
        let bytes = fs::read(path).map_err(|source| ContainerError::Io { file: path.to_path_buf(), source })?;
        Container::from_bytes(&bytes, path)
    }

    pub fn write(&self, path: &Path) -> Result<(), ContainerError> {
        fs::write(path, self.to_bytes()).map_err(|source| ContainerError::Io { file: path.to_path_buf(), source })
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    file: &'a Path,
}

impl Reader<'_> {
    fn error_at(&self, offset: usize, message: &str) -> ContainerError {
        ContainerError::Malformed { file: self.file.to_path_buf(), offset, message: message.to_string() }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8], ContainerError> {
        if self.remaining() < n {
            return Err(self.error_at(self.pos, &format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, ContainerError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String, ContainerError> {
        let at = self.pos;
        let n = u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()) as usize;
        let raw = self.take(n, what)?.to_vec();
        String::from_utf8(raw).map_err(|_| self.error_at(at, &format!("{what} is not UTF-8")))
    }
}

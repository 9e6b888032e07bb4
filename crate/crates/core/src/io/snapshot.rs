//! Snapshot persistence.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic      4 bytes   "SPHR"
//! version    u32       1
//! n          u64       particle count
//! time       f64
//! step       u64
//! n_attr     u32       named attribute count
//! n_attr × { len u32, utf-8 name }          (sorted by name)
//! id         u64 × n
//! mass       f64 × n
//! position   f64 × 3n  (x0 y0 z0 x1 ...)
//! velocity   f64 × 3n
//! density    f64 × n
//! pressure   f64 × n
//! n_attr × { f64 × n }                      (same order as the names)
//! crc32      u32       over every preceding byte
//! ```
//!
//! The text export is comma-separated with one particle per row. Floats use
//! the shortest representation that parses back to the same value.

use std::collections::BTreeMap;
use std::path::Path;

use crate::{Error, ParticleTable, Result, Snapshot, Vec3};

pub const MAGIC: &[u8; 4] = b"SPHR";
pub const VERSION: u32 = 1;

pub fn encode(snap: &Snapshot) -> Vec<u8> {
    let t = &snap.table;
    let n = t.len();
    let attrs = t.attributes();
    let mut buf = Vec::with_capacity(64 + n * 8 * (10 + attrs.len()));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&snap.time.to_le_bytes());
    buf.extend_from_slice(&snap.step.to_le_bytes());
    buf.extend_from_slice(&(attrs.len() as u32).to_le_bytes());
    for name in attrs.keys() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
    }
    for id in 0..n as u64 {
        buf.extend_from_slice(&id.to_le_bytes());
    }
    let put = |buf: &mut Vec<u8>, xs: &[f64]| {
        for x in xs {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    };
    let put3 = |buf: &mut Vec<u8>, vs: &[Vec3]| {
        for v in vs {
            for c in v.iter() {
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
    };
    put(&mut buf, t.masses());
    put3(&mut buf, t.positions());
    put3(&mut buf, t.velocities());
    put(&mut buf, t.densities());
    put(&mut buf, t.pressures());
    for values in attrs.values() {
        put(&mut buf, values);
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Snapshot("truncated file".into()))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn vec3s(&mut self, n: usize) -> Result<Vec<Vec3>> {
        (0..n).map(|_| Ok(Vec3::new(self.f64()?, self.f64()?, self.f64()?))).collect()
    }
}

pub fn decode(bytes: &[u8]) -> Result<Snapshot> {
    if bytes.len() < 4 + 4 {
        return Err(Error::Snapshot("truncated file".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if &body[..4] != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::Snapshot(format!(
            "checksum mismatch (stored {stored:08x}, computed {actual:08x})"
        )));
    }
    let mut r = Reader { bytes: body, at: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let n = usize::try_from(r.u64()?).map_err(|_| Error::Snapshot("particle count overflow".into()))?;
    // id, m, x, v, rho and P take 80 bytes per particle; reject absurd
    // counts before allocating.
    if n.saturating_mul(80) > body.len() {
        return Err(Error::Snapshot(format!("particle count {n} exceeds file size")));
    }
    let time = r.f64()?;
    let step = r.u64()?;
    let n_attr = r.u32()? as usize;
    let mut names = Vec::with_capacity(n_attr.min(1024));
    for _ in 0..n_attr {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Snapshot("attribute name is not UTF-8".into()))?;
        names.push(name.to_owned());
    }
    for expect in 0..n as u64 {
        if r.u64()? != expect {
            return Err(Error::Snapshot("particle ids are not dense".into()));
        }
    }
    let mass = r.f64s(n)?;
    let position = r.vec3s(n)?;
    let velocity = r.vec3s(n)?;
    let density = r.f64s(n)?;
    let pressure = r.f64s(n)?;
    let mut attributes = BTreeMap::new();
    for name in names {
        let values = r.f64s(n)?;
        attributes.insert(name, values);
    }
    if r.at != body.len() {
        return Err(Error::Snapshot("trailing bytes before checksum".into()));
    }
    let table = ParticleTable::from_columns(mass, position, velocity, density, pressure, attributes)?;
    Ok(Snapshot { step, time, table })
}

pub fn write_file(path: &Path, snap: &Snapshot) -> Result<()> {
    std::fs::write(path, encode(snap)).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Snapshot> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

const FIXED_COLUMNS: [&str; 10] = ["id", "m", "x", "y", "z", "vx", "vy", "vz", "rho", "P"];

fn csv_error(e: csv::Error) -> Error {
    Error::Snapshot(format!("text export: {e}"))
}

/// CSV export: a `# step=… time=…` line, a header row, one row per particle.
pub fn to_text(snap: &Snapshot) -> String {
    let t = &snap.table;
    let mut out = format!("# step={} time={:?}\n", snap.step, snap.time).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let header: Vec<&str> = FIXED_COLUMNS.iter().copied().chain(t.attribute_names()).collect();
        w.write_record(&header).expect("in-memory write");
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..t.len() {
            let x = t.positions()[i];
            let v = t.velocities()[i];
            row.clear();
            row.push(i.to_string());
            let fixed = [t.masses()[i], x[0], x[1], x[2], v[0], v[1], v[2], t.densities()[i], t.pressures()[i]];
            row.extend(fixed.iter().map(|f| format!("{f:?}")));
            row.extend(t.attributes().values().map(|a| format!("{:?}", a[i])));
            w.write_record(&row).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    String::from_utf8(out).expect("ASCII output")
}

pub fn from_text(text: &str) -> Result<Snapshot> {
    let bad = |msg: String| Error::Snapshot(format!("text export: {msg}"));
    let (mut step, mut time) = (0u64, 0.0f64);
    if let Some(meta) = text.lines().next().and_then(|l| l.strip_prefix('#')) {
        for kv in meta.split_whitespace() {
            match kv.split_once('=') {
                Some(("step", v)) => step = v.parse().map_err(|_| bad(format!("bad step `{v}`")))?,
                Some(("time", v)) => time = v.parse().map_err(|_| bad(format!("bad time `{v}`")))?,
                _ => {}
            }
        }
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_error)?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < FIXED_COLUMNS.len() || cols[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(bad("header must start with id,m,x,y,z,vx,vy,vz,rho,P".into()));
    }
    let names: Vec<String> = cols[FIXED_COLUMNS.len()..].iter().map(|s| s.to_string()).collect();

    let (mut m, mut x, mut v, mut rho, mut p) = (vec![], vec![], vec![], vec![], vec![]);
    let mut attrs: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for record in r.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<f64> = record
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(format!("line {line}: unparseable number")))?;
        if fields[0] != m.len() as f64 {
            return Err(bad(format!("line {line}: ids must be dense and ordered")));
        }
        m.push(fields[1]);
        x.push(Vec3::new(fields[2], fields[3], fields[4]));
        v.push(Vec3::new(fields[5], fields[6], fields[7]));
        rho.push(fields[8]);
        p.push(fields[9]);
        for (a, val) in attrs.iter_mut().zip(&fields[10..]) {
            a.push(*val);
        }
    }
    let attributes = names.into_iter().zip(attrs).collect();
    let table = ParticleTable::from_columns(m, x, v, rho, p, attributes)?;
    Ok(Snapshot { step, time, table })
}

pub fn read_text_file(path: &Path) -> Result<Snapshot> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}

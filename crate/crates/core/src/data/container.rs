//! The `LUC3` gridded-field container.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic "LUC3" | version u32 | flags u32
//! nlat u32 | nlon u32 | truncation u32
//! n_sigma u32 | sigma f64 * n_sigma
//! time_start i64 | time_step i64 | time_count u64
//! n_vars u32 | per variable: name_len u16, name utf-8, levels u32, role u8
//! payload f64 [time][variable][level][lat][lon]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{build_grid, GridSpec};
use crate::layout::{Role, VarSpec};

pub const MAGIC: &[u8; 4] = b"LUC3";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerHeader {
    pub flags: u32,
    pub nlat: usize,
    pub nlon: usize,
    pub truncation: usize,
    pub sigma_levels: Vec<f64>,
    pub time_start: i64,
    pub time_step: i64,
    pub time_count: u64,
    pub vars: Vec<VarSpec>,
}

impl ContainerHeader {
    pub fn new(grid: &GridSpec, time_start: i64, time_step: i64, vars: Vec<VarSpec>) -> Result<Self> {
        let h = Self {
            flags: 0,
            nlat: grid.nlat,
            nlon: grid.nlon,
            truncation: grid.truncation,
            sigma_levels: grid.sigma_levels.clone(),
            time_start,
            time_step,
            time_count: 0,
            vars,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = self.vars.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Format(format!("duplicate variable name {:?}", w[0])));
        }
        if self.vars.iter().any(|v| v.levels == 0 || v.name.is_empty() || v.name.len() > u16::MAX as usize) {
            return Err(Error::Format("variables need a name and at least one level".into()));
        }
        if self.nlat == 0 || self.nlon == 0 {
            return Err(Error::Format("empty grid".into()));
        }
        Ok(())
    }

    pub fn npoints(&self) -> usize {
        self.nlat * self.nlon
    }

    pub fn fields_per_step(&self) -> usize {
        self.vars.iter().map(|v| v.levels).sum()
    }

    pub fn step_len(&self) -> usize {
        self.fields_per_step() * self.npoints()
    }

    pub fn payload_bytes(&self) -> u64 {
        8 * self.time_count * self.step_len() as u64
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::Missing(format!("variable {name}")))
    }

    /// Index of the first field of `name` within a time step, and its level count.
    pub fn field_offset(&self, name: &str) -> Result<(usize, usize)> {
        let vi = self.var_index(name)?;
        let off = self.vars[..vi].iter().map(|v| v.levels).sum();
        Ok((off, self.vars[vi].levels))
    }

    pub fn time(&self, step: usize) -> i64 {
        self.time_start + step as i64 * self.time_step
    }

    /// Grid with these dimensions and sigma levels.
    pub fn grid(&self) -> Result<GridSpec> {
        build_grid(self.truncation, self.nlat, self.nlon)?.with_sigma_levels(self.sigma_levels.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&self.flags.to_le_bytes());
        for v in [self.nlat, self.nlon, self.truncation, self.sigma_levels.len()] {
            b.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for s in &self.sigma_levels {
            b.extend_from_slice(&s.to_le_bytes());
        }
        b.extend_from_slice(&self.time_start.to_le_bytes());
        b.extend_from_slice(&self.time_step.to_le_bytes());
        b.extend_from_slice(&self.time_count.to_le_bytes());
        b.extend_from_slice(&(self.vars.len() as u32).to_le_bytes());
        for v in &self.vars {
            b.extend_from_slice(&(v.name.len() as u16).to_le_bytes());
            b.extend_from_slice(v.name.as_bytes());
            b.extend_from_slice(&(v.levels as u32).to_le_bytes());
            b.push(v.role.tag());
        }
        b
    }

    fn time_count_offset(&self) -> u64 {
        (4 + 4 + 4 + 16 + 8 * self.sigma_levels.len() + 16) as u64
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let flags = read_u32(r)?;
        let nlat = read_u32(r)? as usize;
        let nlon = read_u32(r)? as usize;
        let truncation = read_u32(r)? as usize;
        let n_sigma = read_u32(r)? as usize;
        if n_sigma > 4096 {
            return Err(Error::Format(format!("implausible sigma count {n_sigma}")));
        }
        let sigma_levels = (0..n_sigma).map(|_| read_f64(r)).collect::<Result<_>>()?;
        let time_start = read_i64(r)?;
        let time_step = read_i64(r)?;
        let time_count = read_u64(r)?;
        let n_vars = read_u32(r)? as usize;
        if n_vars > 65_536 {
            return Err(Error::Format(format!("implausible variable count {n_vars}")));
        }
        let mut vars = Vec::with_capacity(n_vars);
        for _ in 0..n_vars {
            let mut len = [0u8; 2];
            read_exact(r, &mut len)?;
            let mut name = vec![0u8; u16::from_le_bytes(len) as usize];
            read_exact(r, &mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::Format("variable name is not UTF-8".into()))?;
            let levels = read_u32(r)? as usize;
            let mut role = [0u8; 1];
            read_exact(r, &mut role)?;
            vars.push(VarSpec {
                name,
                levels,
                role: Role::from_tag(role[0])?,
            });
        }
        let h = Self {
            flags,
            nlat,
            nlon,
            truncation,
            sigma_levels,
            time_start,
            time_step,
            time_count,
            vars,
        };
        h.validate()?;
        Ok(h)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated header".into()),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_i64<R: Read>(r: &mut R) -> Result<i64> {
    Ok(read_u64(r)? as i64)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// An in-memory container: header plus the full payload.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldContainer {
    pub header: ContainerHeader,
    pub data: Vec<f64>,
}

impl FieldContainer {
    /// Empty container (zero time steps).
    pub fn new(mut header: ContainerHeader) -> Result<Self> {
        header.validate()?;
        header.time_count = 0;
        Ok(Self { header, data: Vec::new() })
    }

    pub fn from_parts(header: ContainerHeader, data: Vec<f64>) -> Result<Self> {
        header.validate()?;
        let expected = header.time_count as usize * header.step_len();
        if data.len() != expected {
            return Err(Error::PayloadLength {
                expected: 8 * expected as u64,
                found: 8 * data.len() as u64,
            });
        }
        Ok(Self { header, data })
    }

    pub fn time_count(&self) -> usize {
        self.header.time_count as usize
    }

    pub fn push_step(&mut self, step: &[f64]) -> Result<()> {
        if step.len() != self.header.step_len() {
            return Err(Error::Shape {
                expected: vec![self.header.step_len()],
                got: vec![step.len()],
            });
        }
        self.data.extend_from_slice(step);
        self.header.time_count += 1;
        Ok(())
    }

    pub fn step(&self, t: usize) -> &[f64] {
        let n = self.header.step_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn step_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.header.step_len();
        &mut self.data[t * n..(t + 1) * n]
    }

    /// All levels of `var` at time `t`, `[levels][lat][lon]`.
    pub fn var(&self, t: usize, var: &str) -> Result<&[f64]> {
        self.check_t(t)?;
        let (off, levels) = self.header.field_offset(var)?;
        let np = self.header.npoints();
        Ok(&self.step(t)[off * np..(off + levels) * np])
    }

    /// One `[lat][lon]` field of `var` at `level` and time `t`.
    pub fn field(&self, t: usize, var: &str, level: usize) -> Result<&[f64]> {
        self.check_t(t)?;
        let (off, levels) = self.header.field_offset(var)?;
        if level >= levels {
            return Err(Error::OutOfRange(format!("level {level} of {var} ({levels} levels)")));
        }
        let np = self.header.npoints();
        Ok(&self.step(t)[(off + level) * np..(off + level + 1) * np])
    }

    pub fn field_mut(&mut self, t: usize, var: &str, level: usize) -> Result<&mut [f64]> {
        self.check_t(t)?;
        let (off, levels) = self.header.field_offset(var)?;
        if level >= levels {
            return Err(Error::OutOfRange(format!("level {level} of {var} ({levels} levels)")));
        }
        let np = self.header.npoints();
        Ok(&mut self.step_mut(t)[(off + level) * np..(off + level + 1) * np])
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t >= self.time_count() {
            return Err(Error::OutOfRange(format!("time index {t} of {}", self.time_count())));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = self.header.to_bytes();
        b.reserve(self.data.len() * 8);
        for v in &self.data {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = std::io::Cursor::new(bytes);
        let header = ContainerHeader::read_from(&mut cursor)?;
        let start = cursor.position() as usize;
        let found = (bytes.len() - start) as u64;
        if found != header.payload_bytes() {
            return Err(Error::PayloadLength {
                expected: header.payload_bytes(),
                found,
            });
        }
        let data = bytes[start..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::from_parts(header, data)
    }
}

pub fn write_container(path: impl AsRef<Path>, c: &FieldContainer) -> Result<()> {
    let mut w = ContainerWriter::create(path, c.header.clone())?;
    for t in 0..c.time_count() {
        w.write_step(c.step(t))?;
    }
    w.finish()?;
    Ok(())
}

pub fn read_container(path: impl AsRef<Path>) -> Result<FieldContainer> {
    let mut r = ContainerReader::open(path)?;
    let header = r.header().clone();
    let mut data = Vec::with_capacity(header.time_count as usize * header.step_len());
    while let Some(step) = r.read_step()? {
        data.extend_from_slice(&step);
    }
    FieldContainer::from_parts(header, data)
}

/// Streams time steps to disk; the time count is patched on `finish`.
pub struct ContainerWriter {
    out: BufWriter<File>,
    header: ContainerHeader,
    written: u64,
}

impl ContainerWriter {
    pub fn create(path: impl AsRef<Path>, mut header: ContainerHeader) -> Result<Self> {
        header.validate()?;
        header.time_count = 0;
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(&header.to_bytes())?;
        Ok(Self {
            out,
            header,
            written: 0,
        })
    }

    pub fn header(&self) -> &ContainerHeader {
        &self.header
    }

    pub fn write_step(&mut self, step: &[f64]) -> Result<()> {
        if step.len() != self.header.step_len() {
            return Err(Error::Shape {
                expected: vec![self.header.step_len()],
                got: vec![step.len()],
            });
        }
        for v in step {
            self.out.write_all(&v.to_le_bytes())?;
        }
        self.written += 1;
        Ok(())
    }

    /// Flushes, writes the final time count into the header and returns it.
    pub fn finish(mut self) -> Result<u64> {
        self.out.flush()?;
        let mut f = self.out.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        f.seek(SeekFrom::Start(self.header.time_count_offset()))?;
        f.write_all(&self.written.to_le_bytes())?;
        f.sync_all()?;
        Ok(self.written)
    }
}

/// Reads a container one time step at a time after validating its length.
pub struct ContainerReader {
    input: BufReader<File>,
    header: ContainerHeader,
    next: u64,
}

impl ContainerReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        let total = file.metadata()?.len();
        let mut input = BufReader::new(file);
        let header = ContainerHeader::read_from(&mut input)?;
        let found = total - header.to_bytes().len() as u64;
        if found != header.payload_bytes() {
            return Err(Error::PayloadLength {
                expected: header.payload_bytes(),
                found,
            });
        }
        Ok(Self { input, header, next: 0 })
    }

    pub fn header(&self) -> &ContainerHeader {
        &self.header
    }

    pub fn read_step(&mut self) -> Result<Option<Vec<f64>>> {
        if self.next >= self.header.time_count {
            return Ok(None);
        }
        let mut buf = vec![0u8; self.header.step_len() * 8];
        self.input.read_exact(&mut buf)?;
        self.next += 1;
        Ok(Some(
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn sample(seed: u64) -> FieldContainer {
        let grid = build_grid(2, 4, 6).unwrap();
        let vars = vec![
            VarSpec::new("T", 3, Role::Prognostic),
            VarSpec::new("TP", 1, Role::Diagnostic),
            VarSpec::new("lsm", 1, Role::Static),
        ];
        let h = ContainerHeader::new(&grid, 1000, 21600, vars).unwrap();
        let mut c = FieldContainer::new(h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..3 {
            let step: Vec<f64> = (0..c.header.step_len()).map(|_| rng.gen_range(-1e3..1e3)).collect();
            c.push_step(&step).unwrap();
        }
        c
    }

    #[test]
    fn round_trip_file() {
        let c = sample(1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.luc3");
        write_container(&p, &c).unwrap();
        let back = read_container(&p).unwrap();
        assert_eq!(back, c);
        assert_eq!(std::fs::read(&p).unwrap(), c.to_bytes());
    }

    #[test]
    fn truncated_payload_rejected() {
        let c = sample(2);
        let mut b = c.to_bytes();
        b.pop();
        assert!(matches!(FieldContainer::from_bytes(&b), Err(Error::PayloadLength { .. })));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.luc3");
        std::fs::write(&p, &b).unwrap();
        assert!(matches!(read_container(&p), Err(Error::PayloadLength { .. })));
    }

    #[test]
    fn unknown_version_rejected() {
        let mut b = sample(3).to_bytes();
        b[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(FieldContainer::from_bytes(&b), Err(Error::UnsupportedVersion(7))));
        b[0] = b'X';
        assert!(matches!(FieldContainer::from_bytes(&b), Err(Error::Format(_))));
    }

    #[test]
    fn duplicate_names_rejected() {
        let grid = build_grid(2, 4, 6).unwrap();
        let v = VarSpec::new("T", 1, Role::Prognostic);
        assert!(ContainerHeader::new(&grid, 0, 1, vec![v.clone(), v]).is_err());
    }

    #[test]
    fn field_access() {
        let c = sample(4);
        let np = 24;
        assert_eq!(c.field(1, "T", 2).unwrap(), &c.step(1)[2 * np..3 * np]);
        assert_eq!(c.field(2, "lsm", 0).unwrap(), &c.step(2)[4 * np..5 * np]);
        assert!(c.field(0, "T", 3).is_err());
        assert!(c.field(3, "T", 0).is_err());
        assert!(c.field(0, "U", 0).is_err());
    }
}

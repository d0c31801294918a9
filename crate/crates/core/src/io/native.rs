use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::conformation::{Condition, Conformation, Provenance, Source};
use crate::error::{Error, Result};
use crate::geometry::Box3;

pub const NATIVE_MAGIC: &[u8; 8] = b"PBCDCONF";
pub const NATIVE_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

fn source_code(s: Source) -> u8 {
    match s {
        Source::ReferenceMd => 0,
        Source::LammpsDump => 1,
        Source::Sampled => 2,
    }
}

/// Binary layout (little endian): magic, `u32` version, 3 x `f64` box,
/// `u8` condition flag + 3 x `f64`, `u8` source, `u8` seed flag + `u64`,
/// `u64` timestep, `u64` N, then N x 3 `f64` coordinates.
pub fn write_conformation(conf: &Conformation) -> Vec<u8> {
    let mut b = Vec::with_capacity(80 + 24 * conf.len());
    b.extend_from_slice(NATIVE_MAGIC);
    b.extend_from_slice(&NATIVE_VERSION.to_le_bytes());
    for l in conf.bbox().lengths() {
        b.extend_from_slice(&l.to_le_bytes());
    }
    let c = conf.condition;
    b.push(u8::from(c.is_some()));
    let c = c.unwrap_or(Condition::new(0.0, 0.0, 0.0));
    for v in [c.k, c.phi, c.temperature] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    let p = conf.provenance;
    b.push(source_code(p.source));
    b.push(u8::from(p.seed.is_some()));
    b.extend_from_slice(&p.seed.unwrap_or(0).to_le_bytes());
    b.extend_from_slice(&p.timestep.to_le_bytes());
    b.extend_from_slice(&(conf.len() as u64).to_le_bytes());
    for x in conf.positions().iter().flatten() {
        b.extend_from_slice(&x.to_le_bytes());
    }
    b
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const K: usize>(&mut self) -> Result<[u8; K]> {
        let end = self.pos + K;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::InvalidInput(format!("conformation file truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_conformation(bytes: &[u8]) -> Result<Conformation> {
    let mut r = Reader { bytes, pos: 0 };
    if &r.take::<8>()? != NATIVE_MAGIC {
        return Err(Error::InvalidInput("not a native conformation file".into()));
    }
    let version = r.u32()?;
    if version != NATIVE_VERSION {
        return Err(Error::Version {
            found: version,
            expected: NATIVE_VERSION,
        });
    }
    let lengths = [r.f64()?, r.f64()?, r.f64()?];
    let bbox = Box3::new(lengths).map_err(|e| Error::Invariant(e.to_string()))?;
    let has_condition = r.u8()? != 0;
    let cond = Condition::new(r.f64()?, r.f64()?, r.f64()?);
    let source = match r.u8()? {
        0 => Source::ReferenceMd,
        1 => Source::LammpsDump,
        2 => Source::Sampled,
        other => return Err(Error::InvalidInput(format!("unknown source tag {other}"))),
    };
    let has_seed = r.u8()? != 0;
    let seed = r.u64()?;
    let timestep = r.u64()?;
    let n = r.u64()? as usize;
    if bytes.len() - r.pos != 24 * n {
        return Err(Error::InvalidInput(format!(
            "expected {} coordinate bytes, found {}",
            24 * n,
            bytes.len() - r.pos
        )));
    }
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        positions.push([r.f64()?, r.f64()?, r.f64()?]);
    }
    Conformation::new(
        positions,
        bbox,
        has_condition.then_some(cond),
        Provenance::new(source, has_seed.then_some(seed), timestep),
    )
    .map_err(|e| Error::Invariant(e.to_string()))
}

pub fn save_conformation(path: &Path, conf: &Conformation) -> Result<()> {
    write_atomic(path, &write_conformation(conf))
}

pub fn load_conformation(path: &Path) -> Result<Conformation> {
    read_conformation(&fs::read(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Usage(format!("split must be 'train' or 'test', got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub condition: Option<Condition>,
    pub split: Split,
    pub augmentation_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: MANIFEST_VERSION,
            });
        }
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(&r.path) {
                return Err(Error::Invariant(format!("duplicate manifest path {}", r.path.display())));
            }
            if r.path.is_absolute() {
                return Err(Error::Invariant(format!("manifest path {} must be relative", r.path.display())));
            }
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let m: DatasetManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        m.validate()?;
        Ok(m)
    }
}

/// Writes one native file per conformation plus `manifest.json` (written
/// last, atomically). Returns the manifest.
pub fn save_dataset(dir: &Path, items: &[(Conformation, Split, usize)]) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let mut records = Vec::with_capacity(items.len());
    for (i, (conf, split, aug)) in items.iter().enumerate() {
        let path = PathBuf::from(format!("conf_{i:05}.pbcd"));
        save_conformation(&dir.join(&path), conf)?;
        records.push(ManifestRecord {
            path,
            condition: conf.condition,
            split: *split,
            augmentation_id: *aug,
        });
    }
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        records,
    };
    manifest.validate()?;
    write_atomic(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}

/// Loads the records of `dir`'s manifest, optionally only one split.
pub fn load_dataset(dir: &Path, split: Option<Split>) -> Result<Vec<(ManifestRecord, Conformation)>> {
    let manifest = DatasetManifest::read(dir)?;
    manifest
        .records
        .into_iter()
        .filter(|r| split.is_none_or(|s| r.split == s))
        .map(|r| {
            let conf = load_conformation(&dir.join(&r.path))?;
            Ok((r, conf))
        })
        .collect()
}

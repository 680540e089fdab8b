//! Problem files: a short text header followed by one contiguous
//! little-endian `f64` payload.
//!
//! ```text
//! myosotis-problem
//! format_version = 1
//! arity = 4                 # or: level_sizes = 16,4,1
//! leaf_count = 16           #     split_sizes = 4,4,4,4;4
//! block_sizes = 1,1,1
//! heads = 1
//! batch = 1
//! right_parts = 1
//! payload_f64 = 82
//! end
//! <payload>
//! ```
//!
//! The payload walks levels from the leaves (level 1) to the root and writes
//! `A`, `B`, `C`, `u` for each; the root level has no `B` or `C`. Arrays are
//! node-major within a level and row-major within a block.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{MyoError, Result};
use crate::params::{LevelBlocks, LevelParams, RightHandSide};
use crate::topology::{Tree, TreeSpec};

pub const MAGIC: &str = "myosotis-problem";
pub const FORMAT_VERSION: u32 = 1;

/// A complete linear system `T_G x = u` with its topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub tree: Tree,
    pub params: LevelParams,
    pub u: RightHandSide,
}

impl Problem {
    pub fn new(tree: Tree, params: LevelParams, u: RightHandSide) -> Result<Self> {
        u.check_against(&tree, &params)?;
        Ok(Self { tree, params, u })
    }

    fn payload_len(&self) -> usize {
        self.params.scalar_count() + self.u.scalar_count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut header = format!("{MAGIC}\nformat_version = {FORMAT_VERSION}\n");
        match self.tree.spec() {
            TreeSpec::Perfect { arity, leaves } => {
                header += &format!("arity = {arity}\nleaf_count = {leaves}\n");
            }
            TreeSpec::Explicit {
                level_sizes,
                split_sizes,
            } => {
                let splits: Vec<String> = split_sizes.iter().map(|s| join(s)).collect();
                header += &format!("level_sizes = {}\nsplit_sizes = {}\n", join(&level_sizes), splits.join(";"));
            }
        }
        header += &format!(
            "block_sizes = {}\nheads = {}\nbatch = {}\nright_parts = {}\npayload_f64 = {}\nend\n",
            join(self.params.block_sizes()),
            self.params.heads(),
            self.u.batch(),
            self.u.right_parts(),
            self.payload_len()
        );
        let mut bytes = header.into_bytes();
        bytes.reserve(self.payload_len() * 8);
        for l in 0..self.tree.depth() {
            let lv = self.params.level(l);
            for v in lv.a.iter().chain(&lv.b).chain(&lv.c).chain(self.u.level(l)) {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let marker = b"\nend\n";
        let pos = bytes
            .windows(marker.len())
            .position(|w| w == marker)
            .ok_or_else(|| MyoError::Format("missing header terminator".into()))?;
        let header = std::str::from_utf8(&bytes[..pos]).map_err(|_| MyoError::Format("header is not UTF-8".into()))?;
        let payload = &bytes[pos + marker.len()..];

        let mut lines = header.lines();
        if lines.next().map(str::trim) != Some(MAGIC) {
            return Err(MyoError::Format(format!("expected '{MAGIC}' on the first line")));
        }
        let mut fields = std::collections::HashMap::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| MyoError::Format(format!("malformed header line '{line}'")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| MyoError::Format(format!("missing header field '{k}'")));
        let num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| MyoError::Format(format!("field '{k}' is not an integer")))
        };
        let list = |s: &str| -> Result<Vec<usize>> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|t| t.trim().parse().map_err(|_| MyoError::Format(format!("bad integer list '{s}'"))))
                .collect()
        };

        let version = num("format_version")?;
        if version != FORMAT_VERSION as usize {
            return Err(MyoError::Format(format!("unsupported format version {version}")));
        }
        let spec = if fields.contains_key("arity") {
            TreeSpec::Perfect {
                arity: num("arity")?,
                leaves: num("leaf_count")?,
            }
        } else {
            let level_sizes = list(get("level_sizes")?)?;
            let raw = get("split_sizes")?;
            let split_sizes = if raw.is_empty() {
                Vec::new()
            } else {
                raw.split(';').map(|s| list(s.trim())).collect::<Result<Vec<_>>>()?
            };
            TreeSpec::Explicit {
                level_sizes,
                split_sizes,
            }
        };
        let tree = Tree::from_spec(&spec)?;
        let block_sizes = list(get("block_sizes")?)?;
        let heads = num("heads")?;
        let batch = num("batch")?;
        let right_parts = num("right_parts")?;
        let declared = num("payload_f64")?;

        let mut params = LevelParams::zeros(&tree, &block_sizes, heads)?;
        let mut u = RightHandSide::zeros(&tree, &block_sizes, heads, batch, right_parts)?;
        let expected = params.scalar_count() + u.scalar_count();
        if declared != expected || payload.len() != expected * 8 {
            return Err(MyoError::Format(format!(
                "shapes need {expected} values; header declares {declared}, payload holds {} bytes",
                payload.len()
            )));
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let mut fill = |dst: &mut [f64]| dst.iter_mut().for_each(|d| *d = values.next().expect("length checked"));
        for l in 0..tree.depth() {
            let LevelBlocks { a, b, c } = params.level_mut(l);
            fill(a);
            fill(b);
            fill(c);
            fill(u.level_mut(l));
        }
        Problem::new(tree, params, u)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

//! Flat binary model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic `OSNCKPT1` | 8 bytes |
//! | version (= 1) | u32 |
//! | model kind (0 generic, 1 divergence-free) | u8 |
//! | formulation code | u8 |
//! | case name length, then UTF-8 bytes | u32, bytes |
//! | forcing scale `ra` (NaN if unused) | f64 |
//! | training grid size `N` | u32 |
//! | network count | u32 |
//! | per network: outputs, activation, width, depth, seed, parameter count | u8, u8, u32, u32, u64, u64 |
//! | parameters `θ` of all networks in order | f64 each |

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{Activation, Field, FieldModel, FieldModelSpec, ModelKind, OutputKind};
use crate::losses::Formulation;

const MAGIC: &[u8; 8] = b"OSNCKPT1";
const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub formulation: Formulation,
    pub case: String,
    pub ra: Option<f64>,
    pub grid_n: usize,
    pub model: FieldModel,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match self.model.kind() {
            ModelKind::Generic => 0,
            ModelKind::DivergenceFree => 1,
        });
        out.push(self.formulation.code());
        out.extend_from_slice(&(self.case.len() as u32).to_le_bytes());
        out.extend_from_slice(self.case.as_bytes());
        out.extend_from_slice(&self.ra.unwrap_or(f64::NAN).to_le_bytes());
        out.extend_from_slice(&(self.grid_n as u32).to_le_bytes());
        let specs = self.model.specs();
        out.extend_from_slice(&(specs.len() as u32).to_le_bytes());
        for spec in &specs {
            out.push(spec.outputs.code());
            out.push(spec.activation.code());
            out.extend_from_slice(&(spec.width as u32).to_le_bytes());
            out.extend_from_slice(&(spec.depth as u32).to_le_bytes());
            out.extend_from_slice(&spec.seed.to_le_bytes());
            let n = crate::fields::Mlp::new(spec.width, spec.depth, spec.outputs.n_outputs(), spec.activation).n_params();
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        for p in self.model.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("missing magic header"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let kind = match r.u8()? {
            0 => ModelKind::Generic,
            1 => ModelKind::DivergenceFree,
            k => return Err(bad(format!("unknown model kind {k}"))),
        };
        let formulation = Formulation::from_code(r.u8()?)?;
        let len = r.u32()? as usize;
        let case = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| bad("case name is not UTF-8"))?;
        let ra = r.f64()?;
        let grid_n = r.u32()? as usize;
        let n_nets = r.u32()? as usize;
        if n_nets == 0 || n_nets > 2 {
            return Err(bad(format!("unsupported network count {n_nets}")));
        }
        let mut specs = Vec::new();
        let mut total = 0usize;
        for _ in 0..n_nets {
            let outputs = OutputKind::from_code(r.u8()?)?;
            let activation = Activation::from_code(r.u8()?)?;
            let width = r.u32()? as usize;
            let depth = r.u32()? as usize;
            let seed = r.u64()?;
            let n = r.u64()? as usize;
            let spec = FieldModelSpec {
                width,
                depth,
                activation,
                outputs,
                seed,
            };
            let expected = crate::fields::Mlp::new(width, depth, outputs.n_outputs(), activation).n_params();
            if n != expected {
                return Err(bad(format!("network declares {n} parameters, architecture has {expected}")));
            }
            total += n;
            specs.push(spec);
        }
        if r.remaining() != total * 8 {
            return Err(bad(format!("expected {} parameter bytes, found {}", total * 8, r.remaining())));
        }
        let params = (0..total).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let model = FieldModel::from_parts(kind, &specs, params)?;
        Ok(Self {
            formulation,
            case,
            ra: (!ra.is_nan()).then_some(ra),
            grid_n,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::output::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("truncated file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
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
}


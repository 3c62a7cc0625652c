//! Embedding checkpoint format.
//!
//! Layout, all little-endian:
//!   magic        8 bytes  b"HORNBEAM"
//!   endian tag   u32      0x01020304 (readers on the wrong endianness see garbage)
//!   version      u16      1
//!   model kind   u8       0 transe, 1 distmult, 2 complex, 3 rotate, 4 bilinear
//!   norm         u8       0 L2, 1 L1
//!   dim          u32
//!   n_entities   u64
//!   n_relations  u64
//!   entity table   n_entities * entity_width f64, row-major
//!   relation table n_relations * relation_width f64, row-major
//!
//! Complex rows are [re_0..re_{d-1}, im_0..im_{d-1}]; rotation relation
//! rows are d phase angles.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{EmbeddingState, ModelKind, Norm, Params, ScoreModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HORNBEAM";
const ENDIAN_TAG: u32 = 0x0102_0304;
const VERSION: u16 = 1;

fn kind_code(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::TransE => 0,
        ModelKind::DistMult => 1,
        ModelKind::ComplEx => 2,
        ModelKind::RotatE => 3,
        ModelKind::Bilinear => 4,
    }
}

fn kind_from(code: u8) -> Result<ModelKind> {
    Ok(match code {
        0 => ModelKind::TransE,
        1 => ModelKind::DistMult,
        2 => ModelKind::ComplEx,
        3 => ModelKind::RotatE,
        4 => ModelKind::Bilinear,
        other => return Err(Error::Checkpoint(format!("unknown model code {other}"))),
    })
}

impl EmbeddingState {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);

        w.write_all(MAGIC).map_err(io)?;
        w.write_u32::<LittleEndian>(ENDIAN_TAG).map_err(io)?;
        w.write_u16::<LittleEndian>(VERSION).map_err(io)?;
        w.write_u8(kind_code(self.model.kind)).map_err(io)?;
        w.write_u8(match self.model.norm {
            Norm::L2 => 0,
            Norm::L1 => 1,
        })
        .map_err(io)?;
        w.write_u32::<LittleEndian>(self.model.dim as u32).map_err(io)?;
        w.write_u64::<LittleEndian>(self.entities.rows() as u64).map_err(io)?;
        w.write_u64::<LittleEndian>(self.relations.rows() as u64).map_err(io)?;
        for &v in self.entities.data() {
            w.write_f64::<LittleEndian>(v).map_err(io)?;
        }
        for &v in self.relations.data() {
            w.write_f64::<LittleEndian>(v).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EmbeddingState> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);

        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Checkpoint(format!("{}: truncated header", path.display())))?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!(
                "{}: bad magic {magic:02x?}",
                path.display()
            )));
        }
        let bad = |what: &str| Error::Checkpoint(format!("{}: truncated {what}", path.display()));
        let tag = r.read_u32::<LittleEndian>().map_err(|_| bad("endian tag"))?;
        if tag != ENDIAN_TAG {
            return Err(Error::Checkpoint(format!(
                "{}: endian tag {tag:#010x}, expected {ENDIAN_TAG:#010x}",
                path.display()
            )));
        }
        let version = r.read_u16::<LittleEndian>().map_err(|_| bad("version"))?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: version {version}, this build reads {VERSION}",
                path.display()
            )));
        }
        let kind = kind_from(r.read_u8().map_err(|_| bad("model kind"))?)?;
        let norm = match r.read_u8().map_err(|_| bad("norm"))? {
            0 => Norm::L2,
            1 => Norm::L1,
            other => return Err(Error::Checkpoint(format!("unknown norm code {other}"))),
        };
        let dim = r.read_u32::<LittleEndian>().map_err(|_| bad("dim"))? as usize;
        if dim == 0 {
            return Err(Error::Checkpoint("dimension 0".into()));
        }
        let n_e = r.read_u64::<LittleEndian>().map_err(|_| bad("entity count"))? as usize;
        let n_r = r.read_u64::<LittleEndian>().map_err(|_| bad("relation count"))? as usize;

        let model = ScoreModel { kind, dim, norm };
        let mut read_table = |rows: usize, cols: usize, what: &str| -> Result<Params> {
            let mut data = vec![0.0f64; rows * cols];
            r.read_f64_into::<LittleEndian>(&mut data)
                .map_err(|_| Error::Checkpoint(format!("{}: truncated {what}", path.display())))?;
            Params::from_data(rows, cols, data)
        };
        let entities = read_table(n_e, model.entity_width(), "entity table")?;
        let relations = read_table(n_r, model.relation_width(), "relation table")?;

        let mut trailing = [0u8; 1];
        match r.read(&mut trailing) {
            Ok(0) => {}
            Ok(_) => {
                return Err(Error::Checkpoint(format!(
                    "{}: trailing bytes after relation table",
                    path.display()
                )))
            }
            Err(e) => return Err(Error::io(path, e)),
        }

        Ok(EmbeddingState { model, entities, relations })
    }
}

//! Binary index file format.
//!
//! Little-endian throughout. Layout:
//!
//! ```text
//! magic   b"SBPI"
//! u32     format version (1)
//! u32     b, c, N, S, num_docs, vocab_size
//! f64     quantization scale
//! [u8]    block-max table, term-major, vocab * N bytes
//! [u8]    superblock maxima, term-major, vocab * S bytes
//! [u16]   superblock child sums, term-major, vocab * S values
//! forward index: block term offsets (N+1 u32), term count u64, terms (u32),
//!                posting offsets (terms+1 u32), posting count u64,
//!                slots (u16), impacts (u8)
//! manifest: num_docs external ids, then vocab_size terms, each u32-length-
//!           prefixed UTF-8
//! u32     CRC32 of all preceding bytes
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crc32fast::Hasher;

use crate::corpus::{CorpusManifest, QuantizationParams, Vocabulary};
use crate::error::{Error, Result};

use super::{
    BlockMaxTable, ForwardBlockIndex, PartitionGeometry, SpIndex, SuperblockTable,
};

const MAGIC: &[u8; 4] = b"SBPI";
const FORMAT_VERSION: u32 = 1;

struct CrcWriter<W: Write> {
    inner: W,
    hasher: Hasher,
}

impl<W: Write> CrcWriter<W> {
    fn new(inner: W) -> Self {
        CrcWriter {
            inner,
            hasher: Hasher::new(),
        }
    }

    fn write_all(&mut self, buf: &[u8]) -> Result<()> {
        self.hasher.update(buf);
        self.inner.write_all(buf)?;
        Ok(())
    }

    fn write_u32(&mut self, v: u32) -> Result<()> {
        self.write_all(&v.to_le_bytes())
    }

    fn write_u64(&mut self, v: u64) -> Result<()> {
        self.write_all(&v.to_le_bytes())
    }

    fn write_str(&mut self, s: &str) -> Result<()> {
        self.write_u32(s.len() as u32)?;
        self.write_all(s.as_bytes())
    }

    fn finish(mut self) -> Result<()> {
        let crc = self.hasher.finalize();
        self.inner.write_all(&crc.to_le_bytes())?;
        self.inner.flush()?;
        Ok(())
    }
}

struct CrcReader<R: Read> {
    inner: R,
    hasher: Hasher,
}

impl<R: Read> CrcReader<R> {
    fn new(inner: R) -> Self {
        CrcReader {
            inner,
            hasher: Hasher::new(),
        }
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner
            .read_exact(buf)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => Error::Format("file is truncated".into()),
                _ => Error::Io(e),
            })?;
        self.hasher.update(buf);
        Ok(())
    }

    fn read_u32(&mut self) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.read_exact(&mut buf)?;
        Ok(u32::from_le_bytes(buf))
    }

    fn read_u64(&mut self) -> Result<u64> {
        let mut buf = [0u8; 8];
        self.read_exact(&mut buf)?;
        Ok(u64::from_le_bytes(buf))
    }

    fn read_f64(&mut self) -> Result<f64> {
        let mut buf = [0u8; 8];
        self.read_exact(&mut buf)?;
        Ok(f64::from_le_bytes(buf))
    }

    fn read_bytes(&mut self, len: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        self.read_exact(&mut buf)?;
        Ok(buf)
    }

    fn read_u16_vec(&mut self, len: usize) -> Result<Vec<u16>> {
        let bytes = self.read_bytes(len * 2)?;
        Ok(bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect())
    }

    fn read_u32_vec(&mut self, len: usize) -> Result<Vec<u32>> {
        let bytes = self.read_bytes(len * 4)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn read_str(&mut self) -> Result<String> {
        let len = self.read_u32()? as usize;
        let bytes = self.read_bytes(len)?;
        String::from_utf8(bytes).map_err(|_| Error::Format("invalid UTF-8 string".into()))
    }

    /// Verify the trailing checksum against everything read so far.
    fn verify_crc(mut self) -> Result<()> {
        let expected = self.hasher.clone().finalize();
        let mut buf = [0u8; 4];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("file is truncated".into()))?;
        let stored = u32::from_le_bytes(buf);
        if stored != expected {
            return Err(Error::Format(format!(
                "checksum mismatch: stored {stored:#010x}, computed {expected:#010x}"
            )));
        }
        Ok(())
    }
}

pub fn save_index(index: &SpIndex, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = CrcWriter::new(BufWriter::new(file));
    write_index(index, &mut w)?;
    w.finish()
}

fn write_index<W: Write>(index: &SpIndex, w: &mut CrcWriter<W>) -> Result<()> {
    let g = &index.geometry;
    w.write_all(MAGIC)?;
    w.write_u32(FORMAT_VERSION)?;
    w.write_u32(g.block_size)?;
    w.write_u32(g.blocks_per_superblock)?;
    w.write_u32(g.num_blocks)?;
    w.write_u32(g.num_superblocks)?;
    w.write_u32(g.num_docs)?;
    w.write_u32(index.manifest.vocab_size)?;
    w.write_all(&index.manifest.quantization.scale.to_le_bytes())?;

    w.write_all(index.block_max.raw())?;
    w.write_all(index.superblock.raw_max())?;
    for &v in index.superblock.raw_child_sums() {
        w.write_all(&v.to_le_bytes())?;
    }

    let (block_term_offsets, terms, posting_offsets, slots, impacts) = index.forward.parts();
    for &v in block_term_offsets {
        w.write_u32(v)?;
    }
    w.write_u64(terms.len() as u64)?;
    for &v in terms {
        w.write_u32(v)?;
    }
    for &v in posting_offsets {
        w.write_u32(v)?;
    }
    w.write_u64(slots.len() as u64)?;
    for &v in slots {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(impacts)?;

    for id in &index.manifest.external_ids {
        w.write_str(id)?;
    }
    for term in index.vocab.terms() {
        w.write_str(term)?;
    }
    Ok(())
}

pub fn load_index(path: &Path) -> Result<SpIndex> {
    let file = File::open(path)?;
    let mut r = CrcReader::new(BufReader::new(file));

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic bytes {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = r.read_u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }

    let block_size = r.read_u32()?;
    let blocks_per_superblock = r.read_u32()?;
    let num_blocks = r.read_u32()?;
    let num_superblocks = r.read_u32()?;
    let num_docs = r.read_u32()?;
    let vocab_size = r.read_u32()?;
    let scale = r.read_f64()?;

    let geometry = PartitionGeometry::new(num_docs, block_size, blocks_per_superblock)
        .map_err(|e| Error::Format(format!("inconsistent geometry: {e}")))?;
    if geometry.num_blocks != num_blocks || geometry.num_superblocks != num_superblocks {
        return Err(Error::Format("inconsistent geometry in header".into()));
    }

    let n = num_blocks as usize;
    let s = num_superblocks as usize;
    let v = vocab_size as usize;

    let block_values = r.read_bytes(v * n)?;
    let max_values = r.read_bytes(v * s)?;
    let child_sums = r.read_u16_vec(v * s)?;

    let block_term_offsets = r.read_u32_vec(n + 1)?;
    let num_terms = r.read_u64()? as usize;
    let terms = r.read_u32_vec(num_terms)?;
    let posting_offsets = r.read_u32_vec(num_terms + 1)?;
    let num_postings = r.read_u64()? as usize;
    let slots = r.read_u16_vec(num_postings)?;
    let impacts = r.read_bytes(num_postings)?;

    let mut external_ids = Vec::with_capacity(num_docs as usize);
    for _ in 0..num_docs {
        external_ids.push(r.read_str()?);
    }
    let mut vocab_terms = Vec::with_capacity(v);
    for _ in 0..vocab_size {
        vocab_terms.push(r.read_str()?);
    }

    r.verify_crc()?;

    let vocab = Vocabulary::from_terms(vocab_terms)
        .map_err(|e| Error::Format(format!("invalid vocabulary: {e}")))?;
    let manifest = CorpusManifest {
        num_docs,
        vocab_size,
        external_ids,
        quantization: QuantizationParams { scale },
    };

    Ok(SpIndex::assemble(
        geometry,
        BlockMaxTable {
            num_blocks,
            values: block_values,
        },
        SuperblockTable {
            num_superblocks,
            max_values,
            child_sums,
        },
        ForwardBlockIndex::from_parts(block_term_offsets, terms, posting_offsets, slots, impacts),
        manifest,
        vocab,
    ))
}

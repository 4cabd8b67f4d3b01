//! Binary translation-table files.
//!
//! Layout (little endian): 8-byte magic, version byte, model byte, then the
//! forward and reverse models. Each model is its source vocabulary, target
//! vocabulary, NULL row, one row per source word and the distortion table.
//! Strings and lists are `u32` length-prefixed; probabilities are raw `f64`
//! bits so a load/save cycle is bit-exact.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::ibm::{AlignModel, DistortionKey, LexicalModel, TranslationTable};

pub const TABLE_MAGIC: &[u8; 8] = b"TALNTBL\0";
pub const TABLE_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum TableIoError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a translation table: {0}")]
    Format(String),
    #[error("unsupported table version {found} (this build reads version {TABLE_VERSION})")]
    Version { found: u8 },
    #[error("table file truncated at byte {offset} while reading {what}")]
    Truncated { offset: usize, what: &'static str },
}

pub fn write_table(table: &TranslationTable, out: &mut impl Write) -> std::io::Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(TABLE_MAGIC);
    buf.push(TABLE_VERSION);
    buf.push(match table.model {
        AlignModel::Ibm1 => 1,
        AlignModel::Ibm2 => 2,
    });
    encode_model(&table.forward, &mut buf);
    encode_model(&table.reverse, &mut buf);
    out.write_all(&buf)
}

pub fn save_table(table: &TranslationTable, path: impl AsRef<Path>) -> Result<(), TableIoError> {
    let path = path.as_ref();
    let io = |source| TableIoError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    write_table(table, &mut file).map_err(io)?;
    file.flush().map_err(io)
}

pub fn load_table(path: impl AsRef<Path>) -> Result<TranslationTable, TableIoError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| TableIoError::Io {
            path: path.display().to_string(),
            source,
        })?;
    read_table(&bytes)
}

pub fn read_table(bytes: &[u8]) -> Result<TranslationTable, TableIoError> {
    if bytes.is_empty() {
        return Err(TableIoError::Format("empty file".into()));
    }
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(8, "magic")?;
    if magic != TABLE_MAGIC {
        return Err(TableIoError::Format("bad magic header".into()));
    }
    let version = r.u8("version")?;
    if version != TABLE_VERSION {
        return Err(TableIoError::Version { found: version });
    }
    let model = match r.u8("model")? {
        1 => AlignModel::Ibm1,
        2 => AlignModel::Ibm2,
        other => return Err(TableIoError::Format(format!("unknown model tag {other}"))),
    };
    let forward = decode_model(&mut r)?;
    let reverse = decode_model(&mut r)?;
    if r.pos != bytes.len() {
        return Err(TableIoError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(TranslationTable {
        model,
        forward,
        reverse,
    })
}

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&u32::try_from(v).expect("table dimension exceeds u32").to_le_bytes());
}

fn put_row(buf: &mut Vec<u8>, row: &[(u32, f64)]) {
    put_u32(buf, row.len());
    for &(id, p) in row {
        buf.extend_from_slice(&id.to_le_bytes());
        buf.extend_from_slice(&p.to_bits().to_le_bytes());
    }
}

fn encode_model(m: &LexicalModel, buf: &mut Vec<u8>) {
    for vocab in [&m.src_vocab, &m.tgt_vocab] {
        put_u32(buf, vocab.len());
        for w in vocab {
            put_u32(buf, w.len());
            buf.extend_from_slice(w.as_bytes());
        }
    }
    put_row(buf, &m.null_row);
    for row in &m.rows {
        put_row(buf, row);
    }
    put_u32(buf, m.distortion.len());
    for (&(j, l, mm), probs) in &m.distortion {
        for v in [j, l, mm] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        put_u32(buf, probs.len());
        for p in probs {
            buf.extend_from_slice(&p.to_bits().to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], TableIoError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(TableIoError::Truncated { offset: self.pos, what });
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, TableIoError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, TableIoError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64, TableIoError> {
        Ok(f64::from_bits(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap())))
    }

    /// Length prefix, sanity-checked against the remaining bytes.
    fn len(&mut self, elem_size: usize, what: &'static str) -> Result<usize, TableIoError> {
        let n = self.u32(what)? as usize;
        if n.saturating_mul(elem_size) > self.bytes.len() - self.pos {
            return Err(TableIoError::Truncated { offset: self.pos, what });
        }
        Ok(n)
    }

    fn string(&mut self) -> Result<String, TableIoError> {
        let n = self.len(1, "vocabulary entry")?;
        let raw = self.take(n, "vocabulary entry")?;
        String::from_utf8(raw.to_vec()).map_err(|_| TableIoError::Format("vocabulary entry is not UTF-8".into()))
    }

    fn row(&mut self, tgt_len: usize) -> Result<Vec<(u32, f64)>, TableIoError> {
        let n = self.len(12, "probability row")?;
        let mut row = Vec::with_capacity(n);
        for _ in 0..n {
            let id = self.u32("probability row")?;
            let p = self.f64("probability row")?;
            if id as usize >= tgt_len {
                return Err(TableIoError::Format(format!("target id {id} outside vocabulary")));
            }
            row.push((id, p));
        }
        Ok(row)
    }
}

fn decode_model(r: &mut Reader<'_>) -> Result<LexicalModel, TableIoError> {
    let mut vocabs = [Vec::new(), Vec::new()];
    for vocab in &mut vocabs {
        let n = r.len(4, "vocabulary")?;
        for _ in 0..n {
            vocab.push(r.string()?);
        }
    }
    let [src_vocab, tgt_vocab] = vocabs;
    let null_row = r.row(tgt_vocab.len())?;
    let mut rows = Vec::with_capacity(src_vocab.len());
    for _ in 0..src_vocab.len() {
        rows.push(r.row(tgt_vocab.len())?);
    }
    let n = r.len(16, "distortion table")?;
    let mut distortion: BTreeMap<DistortionKey, Vec<f64>> = BTreeMap::new();
    for _ in 0..n {
        let key = (r.u32("distortion key")?, r.u32("distortion key")?, r.u32("distortion key")?);
        let len = r.len(8, "distortion row")?;
        let mut probs = Vec::with_capacity(len);
        for _ in 0..len {
            probs.push(r.f64("distortion row")?);
        }
        distortion.insert(key, probs);
    }
    Ok(LexicalModel::from_parts(src_vocab, tgt_vocab, rows, null_row, distortion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::em_train;
    use crate::text::tokenize;

    fn toy_table(model: AlignModel) -> TranslationTable {
        let corpus: Vec<_> = [("das haus", "the house"), ("das buch", "the book"), ("ein buch", "a book")]
            .iter()
            .map(|(s, t)| (tokenize(s, "de"), tokenize(t, "en")))
            .collect();
        em_train(&corpus, 10, model).unwrap().table
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        for model in [AlignModel::Ibm1, AlignModel::Ibm2] {
            let table = toy_table(model);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("toy.tbl");
            save_table(&table, &path).unwrap();
            let loaded = load_table(&path).unwrap();
            assert_eq!(loaded, table);
            assert_eq!(loaded.prob("buch", "book").to_bits(), table.prob("buch", "book").to_bits());
        }
    }

    #[test]
    fn empty_file_is_format_error() {
        assert!(matches!(read_table(&[]), Err(TableIoError::Format(_))));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = Vec::new();
        write_table(&toy_table(AlignModel::Ibm1), &mut bytes).unwrap();
        bytes[8] = 99;
        assert!(matches!(read_table(&bytes), Err(TableIoError::Version { found: 99 })));
    }

    #[test]
    fn truncation_detected_everywhere() {
        let mut bytes = Vec::new();
        write_table(&toy_table(AlignModel::Ibm2), &mut bytes).unwrap();
        for cut in 1..bytes.len() {
            assert!(read_table(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        bytes.push(0);
        assert!(matches!(read_table(&bytes), Err(TableIoError::Format(_))));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_table("/nonexistent/dir/t.tbl").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/t.tbl"));
    }
}

//! Seeded randomness and file plumbing shared by the other modules.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Deterministic generator for `(seed, stream)`.
///
/// Distinct streams give independent sequences for the same user seed, so
/// one run seed can feed several stochastic stages without them sharing
/// draws.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// Stream ids for the stochastic stages.
pub(crate) const STREAM_WINDOWS: u64 = 1;
pub(crate) const STREAM_SUBSAMPLE: u64 = 2;
pub(crate) const STREAM_RANDOM_INDEX: u64 = 3;
pub(crate) const STREAM_SGNS_INIT: u64 = 4;
pub(crate) const STREAM_SGNS_TRAIN: u64 = 5;
pub(crate) const STREAM_INJECT: u64 = 6;
pub(crate) const STREAM_SHUFFLE: u64 = 7;
pub(crate) const STREAM_DOWNSAMPLE: u64 = 8;
pub(crate) const STREAM_SYNTH: u64 = 9;

pub(crate) fn open_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>> + '_> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, line)| line.map(|l| (i + 1, l)).map_err(|e| Error::io(path, e))))
}

/// Writes `path` through a temporary file in the same directory and renames
/// it into place, so readers never observe a partially written file.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        write(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Reads a list with one entry per line; blank lines are skipped.
pub fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let mut words = Vec::new();
    for line in open_lines(path)? {
        let (_, line) = line?;
        let word = line.trim();
        if !word.is_empty() {
            words.push(word.to_owned());
        }
    }
    Ok(words)
}

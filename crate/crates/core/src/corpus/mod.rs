//! Melody ingestion and the 26-symbol eighth-note representation.
//!
//! Symbols `0..=23` are the chromatic pitches C4..B5, `24` is silence and `25`
//! marks that the previous pitch is still sounding.

mod manifest;
mod midi;
mod text;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use manifest::{load_manifest, ManifestEntry};
pub use midi::{parse_midi, write_midi, MidiMelody};
pub use text::{format_text, parse_text};

/// Size of the melody alphabet: 24 pitches, silence, continuation.
pub const ALPHABET_SIZE: usize = 26;
/// MIDI number of C4, symbol 0.
pub const LOWEST_PITCH: u8 = 60;
/// MIDI number of B5, symbol 23.
pub const HIGHEST_PITCH: u8 = 83;
pub const PITCH_SYMBOLS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(u8);

impl Symbol {
    pub const SILENCE: Symbol = Symbol(24);
    pub const CONTINUATION: Symbol = Symbol(25);

    #[inline]
    pub const fn new(index: u8) -> Self {
        Symbol(index)
    }

    /// Pitch symbol for a MIDI note number, folded into C4..B5.
    pub fn from_pitch(pitch: u8) -> Self {
        Symbol(fold_pitch(pitch))
    }

    #[inline]
    pub const fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_pitch(self) -> bool {
        (self.0 as usize) < PITCH_SYMBOLS
    }

    /// MIDI note number of a pitch symbol.
    pub fn midi_pitch(self) -> Option<u8> {
        self.is_pitch().then_some(LOWEST_PITCH + self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 12] = [
            "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
        ];
        match *self {
            Symbol::SILENCE => f.write_str("rest"),
            Symbol::CONTINUATION => f.write_str("-"),
            Symbol(i) if (i as usize) < PITCH_SYMBOLS => {
                write!(f, "{}{}", NAMES[(i % 12) as usize], 4 + i / 12)
            }
            Symbol(i) => write!(f, "#{i}"),
        }
    }
}

/// A note with onset and duration in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NoteEvent {
    pub pitch: u8,
    pub onset: u64,
    pub duration: u64,
}

impl NoteEvent {
    pub fn new(pitch: u8, onset: u64, duration: u64) -> Self {
        Self {
            pitch,
            onset,
            duration,
        }
    }

    #[inline]
    pub fn offset(&self) -> u64 {
        self.onset + self.duration
    }
}

/// One melody on the eighth-note grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    pub id: String,
    steps: Vec<Symbol>,
}

impl SymbolSequence {
    /// Rejects empty sequences and a leading continuation.
    pub fn new(id: impl Into<String>, steps: Vec<Symbol>) -> Result<Self> {
        match steps.first() {
            None => Err(Error::InvalidSequence("sequence is empty".into())),
            Some(&Symbol::CONTINUATION) => Err(Error::InvalidSequence(
                "sequence starts with a continuation".into(),
            )),
            Some(_) => Ok(Self {
                id: id.into(),
                steps,
            }),
        }
    }

    pub fn from_indices(id: impl Into<String>, indices: &[u8]) -> Result<Self> {
        Self::new(id, indices.iter().map(|&i| Symbol(i)).collect())
    }

    #[inline]
    pub fn steps(&self) -> &[Symbol] {
        &self.steps
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn indices(&self) -> Vec<u8> {
        self.steps.iter().map(|s| s.0).collect()
    }
}

/// A set of sequences over one alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub alphabet_size: usize,
    pub sequences: Vec<SymbolSequence>,
}

impl Corpus {
    pub fn new(alphabet_size: usize, sequences: Vec<SymbolSequence>) -> Result<Self> {
        if alphabet_size == 0 || alphabet_size > 256 {
            return Err(Error::InvalidParameter(format!(
                "alphabet size {alphabet_size} out of range"
            )));
        }
        for seq in &sequences {
            if let Some(bad) = seq.steps.iter().find(|s| s.index() >= alphabet_size) {
                return Err(Error::InvalidSequence(format!(
                    "{}: symbol {} outside alphabet of {}",
                    seq.id,
                    bad.index(),
                    alphabet_size
                )));
            }
        }
        Ok(Self {
            alphabet_size,
            sequences,
        })
    }

    /// Builds a corpus from raw index arrays, ids `"0"`, `"1"`, ...
    pub fn from_indices(alphabet_size: usize, sequences: &[Vec<u8>]) -> Result<Self> {
        let seqs = sequences
            .iter()
            .enumerate()
            .map(|(i, s)| SymbolSequence::from_indices(i.to_string(), s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(alphabet_size, seqs)
    }

    pub fn empty(alphabet_size: usize) -> Self {
        Self {
            alphabet_size,
            sequences: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn total_steps(&self) -> usize {
        self.sequences.iter().map(SymbolSequence::len).sum()
    }

    pub fn histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; self.alphabet_size];
        for s in &self.sequences {
            for sym in s.steps() {
                h[sym.index()] += 1;
            }
        }
        h
    }

    /// Corpus with the sequences at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            alphabet_size: self.alphabet_size,
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
        }
    }

    /// Corpus with sequence `index` removed.
    pub fn without(&self, index: usize) -> Self {
        let mut sequences = self.sequences.clone();
        sequences.remove(index);
        Self {
            alphabet_size: self.alphabet_size,
            sequences,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CorpusFileRef {
            format: CORPUS_FORMAT,
            version: CORPUS_VERSION,
            alphabet_size: self.alphabet_size,
            sequences: &self.sequences,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: CorpusFile = serde_json::from_str(s)?;
        if file.format != CORPUS_FORMAT {
            return Err(Error::InvalidParameter(format!(
                "not a corpus file (format {:?})",
                file.format
            )));
        }
        if file.version != CORPUS_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported corpus version {}",
                file.version
            )));
        }
        let seqs = file
            .sequences
            .into_iter()
            .map(|s| SymbolSequence::new(s.id, s.steps))
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.alphabet_size, seqs)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}

const CORPUS_FORMAT: &str = "melodikit-corpus";
const CORPUS_VERSION: u32 = 1;

#[derive(Serialize)]
struct CorpusFileRef<'a> {
    format: &'a str,
    version: u32,
    alphabet_size: usize,
    sequences: &'a [SymbolSequence],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusFile {
    format: String,
    version: u32,
    alphabet_size: usize,
    sequences: Vec<RawSequence>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSequence {
    id: String,
    steps: Vec<Symbol>,
}

/// Folds a MIDI pitch into C4..B5 by whole octaves and returns its symbol index.
pub fn fold_pitch(pitch: u8) -> u8 {
    let mut p = pitch;
    while p < LOWEST_PITCH {
        p += 12;
    }
    while p > HIGHEST_PITCH {
        p -= 12;
    }
    p - LOWEST_PITCH
}

/// Rounds `ticks` to the nearest grid step, halves rounding up.
#[inline]
fn round_step(ticks: u64, ticks_per_eighth: u64) -> u64 {
    (2 * ticks + ticks_per_eighth) / (2 * ticks_per_eighth)
}

/// Places notes on the eighth-note grid.
///
/// Each note's onset step carries its folded pitch, further covered steps
/// carry [`Symbol::CONTINUATION`] and uncovered steps [`Symbol::SILENCE`].
/// Onset and offset are rounded independently; a note keeps at least one
/// step unless a later note rounds onto the same onset, in which case the
/// later note wins that step.
pub fn quantize(events: &[NoteEvent], ticks_per_eighth: u64) -> Result<SymbolSequence> {
    quantize_padded(events, ticks_per_eighth, 0)
}

/// [`quantize`], padding with trailing silence up to `min_steps`.
pub fn quantize_padded(
    events: &[NoteEvent],
    ticks_per_eighth: u64,
    min_steps: usize,
) -> Result<SymbolSequence> {
    if ticks_per_eighth == 0 {
        return Err(Error::InvalidParameter("ticks per eighth must be positive".into()));
    }
    let mut sorted: Vec<NoteEvent> = events.to_vec();
    sorted.sort_by_key(|e| (e.onset, e.pitch));

    // (start, end, symbol) in grid steps
    let mut placed: Vec<(u64, u64, Symbol)> = Vec::with_capacity(sorted.len());
    for e in &sorted {
        let start = round_step(e.onset, ticks_per_eighth);
        let end = round_step(e.offset(), ticks_per_eighth).max(start + 1);
        while let Some(prev) = placed.last_mut() {
            if prev.1 <= start {
                break;
            }
            prev.1 = start;
            if prev.1 <= prev.0 {
                placed.pop();
            } else {
                break;
            }
        }
        placed.push((start, end, Symbol::from_pitch(e.pitch)));
    }

    let span = placed.iter().map(|p| p.1).max().unwrap_or(0) as usize;
    let len = span.max(min_steps);
    if len == 0 {
        return Err(Error::EmptyMelody);
    }
    let mut steps = vec![Symbol::SILENCE; len];
    for (start, end, sym) in placed {
        steps[start as usize] = sym;
        for s in &mut steps[start as usize + 1..end as usize] {
            *s = Symbol::CONTINUATION;
        }
    }
    SymbolSequence::new("", steps)
}

/// Inverse of [`quantize`], with one tick per eighth note.
///
/// A pitch opens a note, continuations extend it, silence closes it. A
/// continuation following silence extends the silence. Pitches decode to
/// their C4..B5 representative.
pub fn decode(seq: &[Symbol]) -> Result<Vec<NoteEvent>> {
    if seq.first() == Some(&Symbol::CONTINUATION) {
        return Err(Error::Decode("sequence starts with a continuation".into()));
    }
    let mut events: Vec<NoteEvent> = Vec::new();
    let mut open = false;
    for (t, &sym) in seq.iter().enumerate() {
        if let Some(pitch) = sym.midi_pitch() {
            events.push(NoteEvent::new(pitch, t as u64, 1));
            open = true;
        } else if sym == Symbol::CONTINUATION {
            if open {
                events.last_mut().expect("open note").duration += 1;
            }
        } else if sym == Symbol::SILENCE {
            open = false;
        } else {
            return Err(Error::Decode(format!("symbol {} outside alphabet", sym.index())));
        }
    }
    Ok(events)
}

/// Loads one melody file. `.mid`/`.midi`/`.smf` files are read as MIDI with
/// the grid derived from the file's ticks per quarter note, anything else as
/// text with `ticks_per_eighth` (default 1).
pub fn load_file(path: &Path, ticks_per_eighth: Option<u64>) -> Result<SymbolSequence> {
    let is_midi = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "mid" | "midi" | "smf"))
        .unwrap_or(false);
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let seq = if is_midi {
        let melody = parse_midi(&std::fs::read(path)?)?;
        match ticks_per_eighth {
            Some(tpe) => quantize(&melody.events, tpe)?,
            None => {
                // ticks per eighth is tpq / 2; doubling every time keeps odd tpq exact
                let doubled: Vec<NoteEvent> = melody
                    .events
                    .iter()
                    .map(|e| NoteEvent::new(e.pitch, 2 * e.onset, 2 * e.duration))
                    .collect();
                quantize(&doubled, melody.ticks_per_quarter as u64)?
            }
        }
    } else {
        let text = std::fs::read_to_string(path)?;
        quantize(&parse_text(&text)?, ticks_per_eighth.unwrap_or(1))?
    };
    Ok(seq.with_id(id))
}

/// Loads one sequence per file, ordered by path.
pub fn load_corpus<P: AsRef<Path>>(paths: &[P]) -> Result<Corpus> {
    let entries: Vec<ManifestEntry> = paths
        .iter()
        .map(|p| ManifestEntry::new(p.as_ref().to_path_buf(), None))
        .collect();
    load_entries(&entries)
}

/// Loads manifest entries, ordered by path. Failures are collected and
/// reported together.
pub fn load_entries(entries: &[ManifestEntry]) -> Result<Corpus> {
    let mut sorted: Vec<&ManifestEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));
    let mut sequences = Vec::with_capacity(sorted.len());
    let mut failures: Vec<(PathBuf, String)> = Vec::new();
    for entry in sorted {
        match load_file(&entry.path, entry.ticks_per_eighth) {
            Ok(seq) => sequences.push(seq),
            Err(e) => failures.push((entry.path.clone(), e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::CorpusLoad(failures));
    }
    Corpus::new(ALPHABET_SIZE, sequences)
}

/// Resolves monophony in an onset-sorted event list: an earlier note that
/// overlaps a later one is truncated at the later onset, and dropped if
/// nothing remains.
pub(crate) fn enforce_monophony(events: &mut Vec<NoteEvent>) {
    events.sort_by_key(|e| (e.onset, e.pitch));
    let mut out: Vec<NoteEvent> = Vec::with_capacity(events.len());
    for e in events.drain(..) {
        while let Some(prev) = out.last_mut() {
            if prev.offset() <= e.onset {
                break;
            }
            prev.duration = e.onset - prev.onset;
            if prev.duration == 0 {
                out.pop();
            } else {
                break;
            }
        }
        out.push(e);
    }
    *events = out;
}

use std::collections::HashMap;

use midly::{MetaMessage, MidiMessage, Smf, Timing, TrackEventKind};

use super::{enforce_monophony, NoteEvent};
use crate::error::{Error, Result};

/// Notes of the melody track of a Standard MIDI File.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidiMelody {
    pub events: Vec<NoteEvent>,
    pub ticks_per_quarter: u16,
}

/// Reads a format 0 or 1 SMF and returns the notes of the track with the
/// most note events. Overlapping notes are made monophonic by truncating the
/// earlier note at the later onset.
pub fn parse_midi(bytes: &[u8]) -> Result<MidiMelody> {
    if bytes.len() < 4 || &bytes[..4] != b"MThd" {
        return Err(Error::MidiParse("missing MThd header".into()));
    }
    let smf = Smf::parse(bytes).map_err(|e| Error::MidiParse(e.to_string()))?;
    let ticks_per_quarter = match smf.header.timing {
        Timing::Metrical(t) => t.as_int(),
        Timing::Timecode(..) => {
            return Err(Error::MidiParse("SMPTE time division is not supported".into()))
        }
    };
    if ticks_per_quarter == 0 {
        return Err(Error::MidiParse("zero ticks per quarter note".into()));
    }

    let mut best: Vec<NoteEvent> = Vec::new();
    for track in &smf.tracks {
        let notes = track_notes(track);
        if notes.len() > best.len() {
            best = notes;
        }
    }
    if best.is_empty() {
        return Err(Error::EmptyMelody);
    }
    enforce_monophony(&mut best);
    Ok(MidiMelody {
        events: best,
        ticks_per_quarter,
    })
}

fn track_notes(track: &[midly::TrackEvent<'_>]) -> Vec<NoteEvent> {
    let mut now: u64 = 0;
    // (channel, key) -> onset
    let mut open: HashMap<(u8, u8), u64> = HashMap::new();
    let mut notes = Vec::new();
    let close = |notes: &mut Vec<NoteEvent>, key: u8, onset: u64, at: u64| {
        if at > onset {
            notes.push(NoteEvent::new(key, onset, at - onset));
        }
    };
    for ev in track {
        now += ev.delta.as_int() as u64;
        match ev.kind {
            TrackEventKind::Midi { channel, message } => {
                let ch = channel.as_int();
                match message {
                    MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => {
                        let key = key.as_int();
                        // retrigger of a sounding key ends the previous note
                        if let Some(onset) = open.insert((ch, key), now) {
                            close(&mut notes, key, onset, now);
                        }
                    }
                    MidiMessage::NoteOn { key, .. } | MidiMessage::NoteOff { key, .. } => {
                        let key = key.as_int();
                        if let Some(onset) = open.remove(&(ch, key)) {
                            close(&mut notes, key, onset, now);
                        }
                    }
                    _ => {}
                }
            }
            TrackEventKind::Meta(MetaMessage::EndOfTrack) => break,
            _ => {}
        }
    }
    let mut dangling: Vec<_> = open.into_iter().collect();
    dangling.sort();
    for ((_, key), onset) in dangling {
        close(&mut notes, key, onset, now);
    }
    notes.sort_by_key(|n| (n.onset, n.pitch));
    notes
}

/// Writes notes given in eighth-note steps as a single-track SMF with one
/// tick per eighth (two per quarter).
pub fn write_midi(events: &[NoteEvent]) -> Result<Vec<u8>> {
    use midly::num::{u15, u28, u4, u7};
    use midly::{Format, Header, TrackEvent};

    // (tick, is_on, key); offs sort before ons at the same tick
    let mut marks: Vec<(u64, bool, u8)> = Vec::with_capacity(2 * events.len());
    for e in events {
        if e.pitch > 127 {
            return Err(Error::InvalidParameter(format!("pitch {} is not a MIDI key", e.pitch)));
        }
        marks.push((e.onset, true, e.pitch));
        marks.push((e.onset + e.duration, false, e.pitch));
    }
    marks.sort();
    let mut track = Vec::with_capacity(marks.len() + 1);
    let mut last = 0u64;
    for (tick, on, key) in marks {
        let delta = u32::try_from(tick - last)
            .ok()
            .filter(|&d| d <= u28::max_value().as_int())
            .ok_or_else(|| Error::InvalidParameter("note gap too long for MIDI".into()))?;
        let message = if on {
            MidiMessage::NoteOn { key: u7::new(key), vel: u7::new(90) }
        } else {
            MidiMessage::NoteOff { key: u7::new(key), vel: u7::new(0) }
        };
        track.push(TrackEvent {
            delta: u28::new(delta),
            kind: TrackEventKind::Midi { channel: u4::new(0), message },
        });
        last = tick;
    }
    track.push(TrackEvent {
        delta: u28::new(0),
        kind: TrackEventKind::Meta(MetaMessage::EndOfTrack),
    });
    let smf = Smf {
        header: Header::new(Format::SingleTrack, Timing::Metrical(u15::new(2))),
        tracks: vec![track],
    };
    let mut out = Vec::new();
    smf.write(&mut out).map_err(|e| Error::MidiParse(e.to_string()))?;
    Ok(out)
}

use super::{enforce_monophony, NoteEvent};
use crate::error::{Error, Result};

/// Parses `pitch onset duration` lines (eighth-note units). `#` starts a
/// comment; blank lines are skipped.
pub fn parse_text(input: &str) -> Result<Vec<NoteEvent>> {
    let mut events = Vec::new();
    for (i, raw) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::TextParse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        }
        let pitch: u8 = fields[0]
            .parse()
            .map_err(|_| err(format!("invalid pitch {:?}", fields[0])))?;
        if pitch > 127 {
            return Err(err(format!("pitch {pitch} out of MIDI range")));
        }
        let onset: u64 = fields[1]
            .parse()
            .map_err(|_| err(format!("invalid onset {:?}", fields[1])))?;
        let duration: u64 = fields[2]
            .parse()
            .map_err(|_| err(format!("invalid duration {:?}", fields[2])))?;
        if duration == 0 {
            return Err(err("duration must be positive".into()));
        }
        events.push(NoteEvent::new(pitch, onset, duration));
    }
    enforce_monophony(&mut events);
    Ok(events)
}

/// Writes events in the text format.
pub fn format_text(events: &[NoteEvent]) -> String {
    let mut out = String::from("# pitch onset duration (eighth notes)\n");
    for e in events {
        out.push_str(&format!("{} {} {}\n", e.pitch, e.onset, e.duration));
    }
    out
}

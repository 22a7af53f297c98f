#!/usr/bin/env python3
"""Assemble a corpus of G-major common/cut-time reels as monophonic MIDI files.

Source tunes are the public-domain ABC collections bundled with music21
(O'Neill's Music of Ireland and Ryan's Mammoth Collection). Each selected
tune has its repeats expanded, ties merged, chords reduced to their top
note and grace notes removed, then is written as a single-track SMF.

    pip install music21
    python3 scripts/assemble_reels.py --out data/reels --count 117
"""
import argparse
import os
import re
import sys

import music21
from music21 import converter, stream, note, chord, tempo

SOURCES = ["oneills1850", "ryansMammoth"]
METERS = {"C|", "C", "4/4", "2/2"}


def headers(tune):
    out = {}
    for line in tune.splitlines():
        m = re.match(r"^([A-Z]):\s*(.*)", line)
        if m and m.group(1) not in out:
            out[m.group(1)] = m.group(2).strip()
    return out


def candidates(corpus_root):
    for src in SOURCES:
        d = os.path.join(corpus_root, src)
        for name in sorted(os.listdir(d)):
            if not name.endswith(".abc"):
                continue
            text = open(os.path.join(d, name), encoding="latin-1").read()
            for tune in re.split(r"\n(?=X:)", text):
                h = headers(tune)
                rhythm = h.get("R", "").lower()
                title = h.get("T", "")
                is_reel = "reel" in rhythm or (not rhythm and "reel" in title.lower())
                if is_reel and h.get("K") == "G" and h.get("M") in METERS:
                    yield src, title, tune


def melody(tune_text):
    score = converter.parse(tune_text, format="abc")
    part = score.parts[0] if hasattr(score, "parts") and len(score.parts) else score
    try:
        part = part.expandRepeats()
    except Exception:
        pass
    flat = part.stripTies().flatten()
    out = stream.Stream()
    out.insert(0, tempo.MetronomeMark(number=120))
    for el in flat.notes:
        if el.duration.isGrace or el.quarterLength == 0:
            continue
        if isinstance(el, chord.Chord):
            top = max(el.pitches, key=lambda p: p.midi)
            n = note.Note(top)
        else:
            n = note.Note(el.pitch)
        n.quarterLength = el.quarterLength
        out.insert(el.offset, n)
    return out


def slug(title):
    s = re.sub(r"[^A-Za-z0-9]+", "_", title).strip("_").lower()
    return s[:40] or "untitled"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/reels")
    ap.add_argument("--count", type=int, default=117)
    args = ap.parse_args()
    root = os.path.join(os.path.dirname(music21.__file__), "corpus")
    os.makedirs(args.out, exist_ok=True)
    written = 0
    seen = set()
    for src, title, tune in candidates(root):
        if written >= args.count:
            break
        key = title.lower()
        if key in seen:
            continue
        try:
            mel = melody(tune)
        except Exception as e:  # unparseable ABC
            print(f"skip {src}/{title}: {e}", file=sys.stderr)
            continue
        if len(mel.notes) < 16:
            continue
        seen.add(key)
        path = os.path.join(args.out, f"{written:03d}_{slug(title)}.mid")
        mel.write("midi", fp=path)
        written += 1
    print(f"wrote {written} tunes to {args.out}")


if __name__ == "__main__":
    main()

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sing/piano_roll.hpp"

namespace sing {

struct NoteEvent {
  int pitch = 0;
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds, > onset
  int velocity = 0;
};

// One entry per tempo change, ordered by tick.
struct TempoPoint {
  std::uint64_t tick = 0;
  double seconds = 0.0;
  std::uint32_t micros_per_quarter = 500000;
};

struct MidiData {
  std::vector<NoteEvent> notes;  // sorted by onset, then pitch
  std::vector<TempoPoint> tempo_map;
  int format = 0;
  int ticks_per_quarter = 0;  // 0 for SMPTE time division
  double smpte_seconds_per_tick = 0.0;
  double end_seconds = 0.0;   // latest end-of-track
  // Note-ons still open at end of track; they were closed there.
  std::size_t unterminated = 0;

  double tick_to_seconds(std::uint64_t tick) const;
};

// Decodes a format 0 or 1 Standard MIDI File. Throws ParseError on
// malformed structure.
MidiData parse_midi(std::span<const std::uint8_t> bytes);

// 60 / median inter-onset interval over distinct onsets, clamped to
// [40, 300]; 120 when there are fewer than two distinct onsets.
double estimate_tempo(std::span<const NoteEvent> notes);

// Instant sampling at s * 60/tempo. Times within a thousandth of a sample
// period of an instant count as on it, which absorbs tick quantization.
// min_seconds extends the roll with trailing silence (e.g. to an
// end-of-track time); with no notes and no extent the piece is empty.
PianoRoll to_piano_roll(std::span<const NoteEvent> notes, double tempo,
                        double min_seconds = 0.0);

// Format-0 file, one note (velocity 80) per maximal run of active samples.
std::vector<std::uint8_t> to_midi(const PianoRoll& roll, double tempo);

}  // namespace sing

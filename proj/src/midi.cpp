#include "sing/midi.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <string>

#include "sing/error.hpp"
#include "sing/log.hpp"

namespace sing {
namespace {

constexpr double kInstantTolerance = 1e-3;  // in sample periods
constexpr int kWrittenVelocity = 80;
constexpr int kWrittenTicksPerQuarter = 960;

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t begin, std::size_t end)
      : bytes_(bytes), pos_(begin), end_(end) {}

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ >= end_; }

  std::uint8_t u8() {
    if (pos_ >= end_) throw ParseError(pos_, "unexpected end of data");
    return bytes_[pos_++];
  }
  std::uint8_t peek() const {
    if (pos_ >= end_) throw ParseError(pos_, "unexpected end of data");
    return bytes_[pos_];
  }
  std::uint32_t be(int n) {
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | u8();
    return v;
  }
  std::uint32_t vlq() {
    const std::size_t start = pos_;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint8_t b = u8();
      v = (v << 7) | (b & 0x7F);
      if ((b & 0x80) == 0) return v;
    }
    throw ParseError(start, "variable-length quantity longer than 4 bytes");
  }
  void skip(std::size_t n) {
    if (n > end_ - pos_) throw ParseError(pos_, "length runs past end of chunk");
    pos_ += n;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
  std::size_t end_;
};

struct RawNote {
  std::uint64_t on_tick;
  std::uint64_t off_tick;
  int pitch;
  int velocity;
};

struct TempoEvent {
  std::uint64_t tick;
  std::uint32_t micros;
};

struct TrackResult {
  std::vector<RawNote> notes;
  std::uint64_t end_tick = 0;
  std::size_t unterminated = 0;
};

TrackResult parse_track(Reader& r, std::vector<TempoEvent>& tempos) {
  TrackResult out;
  std::map<int, std::deque<std::pair<std::uint64_t, int>>> open;  // key: channel*128+pitch
  std::uint64_t tick = 0;
  std::uint8_t running = 0;
  bool ended = false;

  while (!r.done() && !ended) {
    tick += r.vlq();
    std::uint8_t status = r.peek();
    if (status & 0x80) {
      r.u8();
    } else {
      if (running == 0) throw ParseError(r.pos(), "data byte without running status");
      status = running;
    }

    if (status == 0xFF) {
      const std::uint8_t type = r.u8();
      const std::uint32_t len = r.vlq();
      const std::size_t data_at = r.pos();
      if (type == 0x51) {
        if (len != 3) throw ParseError(data_at, "tempo meta-event must have length 3");
        tempos.push_back({tick, r.be(3)});
      } else {
        r.skip(len);
        if (type == 0x2F) ended = true;
      }
      running = 0;
    } else if (status == 0xF0 || status == 0xF7) {
      r.skip(r.vlq());
      running = 0;
    } else if (status >= 0xF1) {
      throw ParseError(r.pos() - 1, "system message inside track");
    } else {
      running = status;
      const int kind = status & 0xF0;
      const int channel = status & 0x0F;
      const std::uint8_t d1 = r.u8();
      if (kind == 0xC0 || kind == 0xD0) continue;
      const std::uint8_t d2 = r.u8();
      if ((d1 | d2) & 0x80) throw ParseError(r.pos() - 2, "channel data byte above 127");
      const int key = channel * 128 + d1;
      if (kind == 0x90 && d2 > 0) {
        open[key].emplace_back(tick, d2);
      } else if (kind == 0x80 || kind == 0x90) {
        auto it = open.find(key);
        if (it != open.end() && !it->second.empty()) {
          const auto [on_tick, velocity] = it->second.front();
          it->second.pop_front();
          out.notes.push_back({on_tick, tick, d1, velocity});
        }
      }
    }
  }
  out.end_tick = tick;
  for (auto& [key, queue] : open) {
    for (const auto& [on_tick, velocity] : queue) {
      out.notes.push_back({on_tick, tick, key % 128, velocity});
      ++out.unterminated;
    }
  }
  return out;
}

}  // namespace

double MidiData::tick_to_seconds(std::uint64_t tick) const {
  if (ticks_per_quarter == 0) {
    return static_cast<double>(tick) * smpte_seconds_per_tick;
  }
  auto it = std::upper_bound(
      tempo_map.begin(), tempo_map.end(), tick,
      [](std::uint64_t t, const TempoPoint& p) { return t < p.tick; });
  const TempoPoint& p = *std::prev(it);
  return p.seconds + static_cast<double>(tick - p.tick) * p.micros_per_quarter /
                         (1e6 * ticks_per_quarter);
}

MidiData parse_midi(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 14) throw ParseError(0, "file shorter than a MIDI header");
  Reader head(bytes, 0, bytes.size());
  if (head.be(4) != 0x4D546864) throw ParseError(0, "missing MThd chunk");
  const std::uint32_t header_len = head.be(4);
  if (header_len < 6) throw ParseError(4, "header chunk shorter than 6 bytes");
  const std::size_t after_header = 8 + static_cast<std::size_t>(header_len);
  if (after_header > bytes.size()) throw ParseError(4, "header chunk truncated");
  const std::uint32_t format = head.be(2);
  const std::uint32_t n_tracks = head.be(2);
  const std::uint32_t division = head.be(2);
  if (format > 1) throw ParseError(8, "unsupported SMF format " + std::to_string(format));
  if (format == 0 && n_tracks != 1) throw ParseError(10, "format 0 requires exactly one track");

  MidiData out;
  out.format = static_cast<int>(format);
  if (division & 0x8000) {
    const int fps = -static_cast<std::int8_t>(division >> 8);
    const int per_frame = static_cast<int>(division & 0xFF);
    if (fps <= 0 || per_frame == 0) throw ParseError(12, "invalid SMPTE division");
    const double frames = fps == 29 ? 29.97 : fps;
    out.smpte_seconds_per_tick = 1.0 / (frames * per_frame);
  } else {
    if (division == 0) throw ParseError(12, "zero ticks per quarter");
    out.ticks_per_quarter = static_cast<int>(division);
  }

  std::vector<TempoEvent> tempos;
  std::vector<TrackResult> tracks;
  std::size_t pos = after_header;
  while (pos + 8 <= bytes.size() && tracks.size() < n_tracks) {
    Reader chunk(bytes, pos, bytes.size());
    const std::uint32_t id = chunk.be(4);
    const std::uint32_t len = chunk.be(4);
    const std::size_t body = pos + 8;
    if (len > bytes.size() - body) throw ParseError(pos + 4, "chunk length runs past end of file");
    if (id == 0x4D54726B) {
      Reader track(bytes, body, body + len);
      tracks.push_back(parse_track(track, tempos));
    }
    pos = body + len;
  }
  if (tracks.size() < n_tracks) {
    log::warn("MIDI header declares " + std::to_string(n_tracks) + " tracks, found " +
              std::to_string(tracks.size()));
  }

  if (out.ticks_per_quarter != 0) {
    std::stable_sort(tempos.begin(), tempos.end(),
                     [](const TempoEvent& a, const TempoEvent& b) { return a.tick < b.tick; });
    out.tempo_map.push_back({0, 0.0, 500000});
    for (const auto& t : tempos) {
      const double at = out.tick_to_seconds(t.tick);
      if (t.tick == out.tempo_map.back().tick) {
        out.tempo_map.back().micros_per_quarter = t.micros;
      } else {
        out.tempo_map.push_back({t.tick, at, t.micros});
      }
    }
  }

  for (const auto& track : tracks) {
    out.unterminated += track.unterminated;
    out.end_seconds = std::max(out.end_seconds, out.tick_to_seconds(track.end_tick));
    for (const auto& n : track.notes) {
      if (n.off_tick <= n.on_tick) continue;
      out.notes.push_back({n.pitch, out.tick_to_seconds(n.on_tick),
                           out.tick_to_seconds(n.off_tick), n.velocity});
    }
  }
  if (out.unterminated > 0) {
    log::warn(std::to_string(out.unterminated) + " note(s) closed at end of track");
  }
  std::sort(out.notes.begin(), out.notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
    if (a.onset != b.onset) return a.onset < b.onset;
    if (a.pitch != b.pitch) return a.pitch < b.pitch;
    return a.offset < b.offset;
  });
  return out;
}

double estimate_tempo(std::span<const NoteEvent> notes) {
  std::vector<double> onsets;
  onsets.reserve(notes.size());
  for (const auto& n : notes) onsets.push_back(n.onset);
  std::sort(onsets.begin(), onsets.end());
  onsets.erase(std::unique(onsets.begin(), onsets.end()), onsets.end());
  if (onsets.size() < 2) return 120.0;

  std::vector<double> gaps(onsets.size() - 1);
  for (std::size_t i = 1; i < onsets.size(); ++i) gaps[i - 1] = onsets[i] - onsets[i - 1];
  std::sort(gaps.begin(), gaps.end());
  const std::size_t m = gaps.size();
  const double median = m % 2 ? gaps[m / 2] : 0.5 * (gaps[m / 2 - 1] + gaps[m / 2]);
  return std::clamp(60.0 / median, 40.0, 300.0);
}

PianoRoll to_piano_roll(std::span<const NoteEvent> notes, double tempo, double min_seconds) {
  if (!(tempo > 0.0)) throw Error(ErrorKind::kInvalidArgument, "tempo must be positive");
  if (notes.empty() && !(min_seconds > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "empty piece");
  }
  const double period = 60.0 / tempo;
  auto first_instant_at_or_after = [&](double seconds) {
    const double idx = std::ceil(seconds / period - kInstantTolerance);
    return static_cast<std::size_t>(std::max(0.0, idx));
  };

  double last = min_seconds;
  for (const auto& n : notes) last = std::max(last, n.offset);
  const std::size_t n_samples = std::max<std::size_t>(1, first_instant_at_or_after(last));

  PianoRoll roll(n_samples, tempo);
  for (const auto& n : notes) {
    if (n.pitch < 0 || n.pitch >= static_cast<int>(kPitches)) {
      throw Error(ErrorKind::kInvalidArgument, "pitch out of range: " + std::to_string(n.pitch));
    }
    const std::size_t begin = first_instant_at_or_after(n.onset);
    const std::size_t end = std::min(n_samples, first_instant_at_or_after(n.offset));
    for (std::size_t s = begin; s < end; ++s) roll.set(static_cast<std::size_t>(n.pitch), s, true);
  }
  return roll;
}

std::vector<std::uint8_t> to_midi(const PianoRoll& roll, double tempo) {
  if (roll.samples() == 0) throw Error(ErrorKind::kInvalidArgument, "empty piano roll");
  if (!(tempo > 0.0)) throw Error(ErrorKind::kInvalidArgument, "tempo must be positive");
  const double period = 60.0 / tempo;
  const auto micros = static_cast<std::uint32_t>(
      std::clamp(std::llround(period * 1e6), 1LL, 0xFFFFFFLL));
  // Place every sample boundary at its own rounded tick so quantization
  // error never accumulates along the piece.
  const double ticks_per_second = 1e6 * kWrittenTicksPerQuarter / micros;
  auto tick_of = [&](std::size_t s) {
    return static_cast<std::uint64_t>(std::llround(static_cast<double>(s) * period * ticks_per_second));
  };

  struct Ev {
    std::uint64_t tick;
    bool on;
    int pitch;
  };
  std::vector<Ev> events;
  for (std::size_t p = 0; p < kPitches; ++p) {
    std::size_t s = 0;
    while (s < roll.samples()) {
      if (!roll.active(p, s)) {
        ++s;
        continue;
      }
      std::size_t e = s;
      while (e < roll.samples() && roll.active(p, e)) ++e;
      events.push_back({tick_of(s), true, static_cast<int>(p)});
      events.push_back({tick_of(e), false, static_cast<int>(p)});
      s = e;
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const Ev& a, const Ev& b) {
    if (a.tick != b.tick) return a.tick < b.tick;
    return !a.on && b.on;
  });

  std::vector<std::uint8_t> track;
  auto put_vlq = [&](std::uint64_t v) {
    std::uint8_t buf[10];
    int n = 0;
    buf[n++] = v & 0x7F;
    while ((v >>= 7) != 0) buf[n++] = 0x80 | (v & 0x7F);
    while (n > 0) track.push_back(buf[--n]);
  };
  put_vlq(0);
  track.insert(track.end(), {0xFF, 0x51, 0x03, static_cast<std::uint8_t>(micros >> 16),
                             static_cast<std::uint8_t>(micros >> 8),
                             static_cast<std::uint8_t>(micros)});
  std::uint64_t now = 0;
  for (const auto& ev : events) {
    put_vlq(ev.tick - now);
    now = ev.tick;
    track.push_back(ev.on ? 0x90 : 0x80);
    track.push_back(static_cast<std::uint8_t>(ev.pitch));
    track.push_back(ev.on ? kWrittenVelocity : 0);
  }
  put_vlq(tick_of(roll.samples()) - now);
  track.insert(track.end(), {0xFF, 0x2F, 0x00});

  std::vector<std::uint8_t> out = {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1,
                                   kWrittenTicksPerQuarter >> 8, kWrittenTicksPerQuarter & 0xFF,
                                   'M', 'T', 'r', 'k'};
  const auto len = static_cast<std::uint32_t>(track.size());
  out.insert(out.end(), {static_cast<std::uint8_t>(len >> 24), static_cast<std::uint8_t>(len >> 16),
                         static_cast<std::uint8_t>(len >> 8), static_cast<std::uint8_t>(len)});
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

}  // namespace sing

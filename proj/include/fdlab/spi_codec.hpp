#pragma once

// Configuration words for the canceller box SPI devices.
//
// Layout version 1:
//   ATT    (7-bit attenuator)   2 bytes: [0x01 address, code & 0x7F]
//   PS_DAC (8-bit DAC frame)    2 bytes: 16-bit frame, MSB first:
//                               bits 15-14 don't care (0), 13-12 power-down mode
//                               (00 = normal), 11-4 data, 3-0 padding (0)
//   CAP1..3 (5-bit capacitors)  1 byte:  [code & 0x1F], device picked by chip select

#include <array>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fdlab/errors.hpp"

namespace fdlab {

inline constexpr int kSpiLayoutVersion = 1;
inline constexpr std::uint8_t kAttAddress = 0x01;
inline constexpr std::uint8_t kDacModeNormal = 0x0;

enum class SpiTarget { att, ps_dac, cap1, cap2, cap3 };

inline const char* target_name(SpiTarget t) {
  switch (t) {
    case SpiTarget::att: return "ATT";
    case SpiTarget::ps_dac: return "PS";
    case SpiTarget::cap1: return "CAP1";
    case SpiTarget::cap2: return "CAP2";
    case SpiTarget::cap3: return "CAP3";
  }
  return "?";
}

inline SpiTarget target_from_name(const std::string& s) {
  if (s == "ATT") return SpiTarget::att;
  if (s == "PS") return SpiTarget::ps_dac;
  if (s == "CAP1") return SpiTarget::cap1;
  if (s == "CAP2") return SpiTarget::cap2;
  if (s == "CAP3") return SpiTarget::cap3;
  throw DomainError("unknown SPI target '" + s + "'");
}

inline int target_max_code(SpiTarget t) {
  switch (t) {
    case SpiTarget::att: return 127;
    case SpiTarget::ps_dac: return 255;
    default: return 31;
  }
}

struct SpiWord {
  SpiTarget target = SpiTarget::att;
  std::vector<std::uint8_t> bytes;

  friend bool operator==(const SpiWord&, const SpiWord&) = default;
};

inline SpiWord encode_word(SpiTarget target, int code) {
  check_range(target_name(target), code, 0, target_max_code(target));
  const auto c = static_cast<std::uint8_t>(code);
  switch (target) {
    case SpiTarget::att:
      return {target, {kAttAddress, static_cast<std::uint8_t>(c & 0x7F)}};
    case SpiTarget::ps_dac: {
      const std::uint16_t frame = static_cast<std::uint16_t>((kDacModeNormal << 12) | (c << 4));
      return {target, {static_cast<std::uint8_t>(frame >> 8), static_cast<std::uint8_t>(frame & 0xFF)}};
    }
    default:
      return {target, {static_cast<std::uint8_t>(c & 0x1F)}};
  }
}

inline int decode_word(const SpiWord& w) {
  switch (w.target) {
    case SpiTarget::att:
      if (w.bytes.size() != 2 || w.bytes[0] != kAttAddress || (w.bytes[1] & 0x80))
        throw DomainError("malformed ATT word");
      return w.bytes[1];
    case SpiTarget::ps_dac: {
      if (w.bytes.size() != 2) throw DomainError("malformed PS word");
      const std::uint16_t frame = static_cast<std::uint16_t>((w.bytes[0] << 8) | w.bytes[1]);
      if ((frame & 0xF00F) != 0 || ((frame >> 12) & 0x3) != kDacModeNormal) throw DomainError("malformed PS word");
      return (frame >> 4) & 0xFF;
    }
    default:
      if (w.bytes.size() != 1 || (w.bytes[0] & 0xE0)) throw DomainError("malformed CAP word");
      return w.bytes[0];
  }
}

// Full box configuration in programming order: ATT, PS, CAP1, CAP2, CAP3.
inline std::vector<SpiWord> encode_box_config(int att, int ps, const std::array<int, 3>& caps) {
  return {encode_word(SpiTarget::att, att), encode_word(SpiTarget::ps_dac, ps), encode_word(SpiTarget::cap1, caps[0]),
          encode_word(SpiTarget::cap2, caps[1]), encode_word(SpiTarget::cap3, caps[2])};
}

// Serial transfer time: 8 clocks per byte.
inline double transfer_time_us(const std::vector<SpiWord>& words, double clock_hz) {
  if (!(clock_hz > 0.0)) throw DomainError("SPI clock must be > 0");
  std::size_t bytes = 0;
  for (const auto& w : words) bytes += w.bytes.size();
  return 8.0 * static_cast<double>(bytes) / clock_hz * 1e6;
}

// One word per line: "<TARGET> <hex byte> [<hex byte>]".
inline std::string hex_dump(const std::vector<SpiWord>& words) {
  std::ostringstream os;
  for (const auto& w : words) {
    os << target_name(w.target);
    for (auto b : w.bytes) os << ' ' << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(b);
    os << std::dec << '\n';
  }
  return os.str();
}

inline std::vector<SpiWord> parse_hex_dump(const std::string& text) {
  std::vector<SpiWord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    SpiWord w;
    w.target = target_from_name(name);
    std::string tok;
    while (ls >> tok) w.bytes.push_back(static_cast<std::uint8_t>(std::stoul(tok, nullptr, 16)));
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace fdlab

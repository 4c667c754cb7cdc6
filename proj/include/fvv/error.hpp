#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fvv {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ChannelClosedError : public Error {
 public:
  ChannelClosedError() : Error("channel closed") {}
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

class BitstreamError : public Error {
 public:
  BitstreamError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class GopAlignmentError : public Error {
 public:
  using Error::Error;
};

class SequencingError : public Error {
 public:
  using Error::Error;
};

// Malformed playlist text; line is 1-based (0 when not line specific).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, int line)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

enum class TsErrorKind { Alignment, SyncLoss, ContinuityGap, TruncatedPes, TableMismatch };

const char* to_string(TsErrorKind kind);

class TsError : public Error {
 public:
  TsError(TsErrorKind kind, std::size_t packet_index, std::uint16_t pid, const std::string& detail)
      : Error(std::string(to_string(kind)) + " at packet " + std::to_string(packet_index) + " (pid 0x" +
              hex16(pid) + "): " + detail),
        kind_(kind),
        packet_index_(packet_index),
        pid_(pid) {}

  TsErrorKind kind() const noexcept { return kind_; }
  std::size_t packet_index() const noexcept { return packet_index_; }
  std::uint16_t pid() const noexcept { return pid_; }

 private:
  static std::string hex16(std::uint16_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(4, '0');
    for (int i = 3; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xF];
    return s;
  }

  TsErrorKind kind_;
  std::size_t packet_index_;
  std::uint16_t pid_;
};

}  // namespace fvv

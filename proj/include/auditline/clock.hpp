#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <memory>
#include <string>

namespace auditline {

// Timestamp source. Runs that must be byte-for-byte reproducible use a fixed
// clock; live runs use the system clock.
class Clock {
 public:
  virtual ~Clock() = default;
  // UTC instant as ISO-8601 text, e.g. "2026-01-01T00:00:00Z".
  virtual std::string now_iso8601() const = 0;
};

class SystemClock final : public Clock {
 public:
  std::string now_iso8601() const override {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                  tm.tm_min, tm.tm_sec);
    return buf;
  }
};

// Returns the same instant for every call.
class FixedClock final : public Clock {
 public:
  explicit FixedClock(std::string instant = "2026-01-01T00:00:00Z")
      : instant_(std::move(instant)) {}
  std::string now_iso8601() const override { return instant_; }

 private:
  std::string instant_;
};

}  // namespace auditline

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabagent {

// Thrown for unreadable files, unwritable outputs and malformed inputs at the
// I/O boundary. Everything recoverable inside the agent loop travels as a
// value (GroundingError, StmtError, ...), not as an exception.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Shortest decimal form that round-trips through double. Used everywhere a
// float lands in text (CSV export, JSON-free logs, program rendering) so that
// identical values always print identically.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (*begin == '+') ++begin;  // from_chars rejects a leading plus
  auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc{} && res.ptr == end && std::isfinite(out);
}

// FNV-1a. Not cryptographic; stable across platforms, which is what the
// determinism hash and dry-run evidence need.
struct Fnv1a {
  std::uint64_t state = 0xcbf29ce484222325ULL;
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state ^= p[i];
      state *= 0x100000001b3ULL;
    }
  }
  void update(const std::string& s) { update(s.data(), s.size()); }
  std::string hex() const {
    char buf[17];
    static const char* digits = "0123456789abcdef";
    for (int i = 0; i < 16; ++i) buf[i] = digits[(state >> (60 - 4 * i)) & 0xF];
    buf[16] = '\0';
    return std::string(buf);
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic RNG built on mt19937_64 raw draws only. The standard
// distributions are implementation-defined, so uniforms and gaussians are
// derived by hand to keep runs reproducible across library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double next_unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, bound)
  std::uint64_t next_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(gen_()) * bound) >> 64);
  }

  // Box-Muller; second value cached
  double next_gauss() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_unit();
    double u2 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Sub-seed for stochastic tools: one run-level seed, one derived stream per
// plan step.
inline std::uint64_t sub_seed(std::uint64_t run_seed, int step_number) {
  return splitmix64(run_seed ^ splitmix64(static_cast<std::uint64_t>(step_number) + 1));
}

}  // namespace tabagent

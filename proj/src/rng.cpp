// SPDX-License-Identifier: Apache-2.0
#include "kdgan/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "kdgan/errors.hpp"

namespace kdgan {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& label) {
  return splitmix64(splitmix64(master_seed) ^ hash_string(label));
}

RngStream::RngStream(std::uint64_t master_seed, std::string name)
    : name_(std::move(name)), engine_(derive_seed(master_seed, name_)) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int RngStream::uniform_int(int lo, int hi) {
  if (hi < lo) throw InvalidArgument("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  // Rejection sampling avoids modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return lo + static_cast<int>(r % span);
}

Matrix RngStream::normal_matrix(Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

std::string RngStream::save_state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void RngStream::load_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (!is) throw InvalidArgument("malformed RNG state for stream '" + name_ + "'");
}

}  // namespace kdgan

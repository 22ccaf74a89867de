// SPDX-License-Identifier: Apache-2.0
#include "kdgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kdgan/errors.hpp"

namespace kdgan {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'K', 'D', 'G', 'A', 'N', 'C', 'K', 'P'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path) : b_(bytes), path_(path) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > b_.size()) throw IoError("checkpoint is truncated", path_);
  }
  const std::string& b_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

const Matrix& CheckpointRecord::array(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return m;
  throw InvalidArgument("checkpoint has no array '" + name + "'");
}

void write_checkpoint(const std::string& path, const CheckpointRecord& r) {
  nlohmann::json meta;
  meta["step"] = r.step;
  meta["config"] = nlohmann::json::parse(r.config_json);
  meta["config_hash"] = hex(r.config_hash);
  meta["rng"] = r.rng_states;
  meta["counters"] = r.counters;
  const std::string meta_text = meta.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, r.format_version);
  put<std::uint64_t>(out, meta_text.size());
  out += meta_text;
  put<std::uint64_t>(out, r.arrays.size());
  for (const auto& [name, m] : r.arrays) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.append(reinterpret_cast<const char*>(m.data()),
               static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  put<std::uint64_t>(out, fnv1a(out.data(), out.size()));

  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  // Write then rename so a crash never leaves a half-written checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint", tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("failed writing checkpoint", tmp);
  }
  std::filesystem::rename(tmp, path);
}

CheckpointRecord read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint", path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file", path);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  if (stored != fnv1a(bytes.data(), bytes.size() - 8)) throw IoError("checkpoint checksum mismatch", path);

  Reader in(bytes, path);
  in.take(sizeof(kMagic));
  CheckpointRecord r;
  r.format_version = in.get<std::uint32_t>();
  if (r.format_version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(r.format_version), path);
  const std::string meta_text = in.take(in.get<std::uint64_t>());
  try {
    auto meta = nlohmann::json::parse(meta_text);
    r.step = meta.at("step").get<std::int64_t>();
    r.config_json = meta.at("config").dump();
    r.config_hash = std::stoull(meta.at("config_hash").get<std::string>(), nullptr, 16);
    r.rng_states = meta.at("rng").get<std::map<std::string, std::string>>();
    r.counters = meta.at("counters").get<std::map<std::string, std::int64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint metadata: ") + e.what(), path);
  }
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = in.take(in.get<std::uint32_t>());
    const auto rows = static_cast<Index>(in.get<std::uint64_t>());
    const auto cols = static_cast<Index>(in.get<std::uint64_t>());
    std::string raw = in.take(static_cast<std::size_t>(rows * cols) * sizeof(double));
    Matrix m(rows, cols);
    std::memcpy(m.data(), raw.data(), raw.size());
    r.arrays.emplace_back(std::move(name), std::move(m));
  }
  if (in.pos() != bytes.size() - 8) throw IoError("trailing bytes in checkpoint", path);
  return r;
}

}  // namespace kdgan

#include "klda/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace klda {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'K', 'L', 'D', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated checkpoint file: " + path);
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_pod(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in, const std::string& path) {
  auto len = read_pod<std::uint32_t>(in, path);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw DataError("truncated checkpoint file: " + path);
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& model,
                     std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, config_hash);
  write_pod(out, static_cast<std::int32_t>(model.arch.d_x));
  write_pod(out, static_cast<std::int32_t>(model.arch.d_z));
  write_pod(out, static_cast<std::int32_t>(model.n_classes));
  write_pod(out, static_cast<std::uint32_t>(model.arch.hidden.size()));
  for (int h : model.arch.hidden) write_pod(out, static_cast<std::int32_t>(h));
  write_pod(out, static_cast<std::uint32_t>(model.params.size()));
  for (const auto& e : model.params.entries) {
    write_string(out, e.name);
    write_pod(out, static_cast<std::uint64_t>(e.value.rows()));
    write_pod(out, static_cast<std::uint64_t>(e.value.cols()));
    out.write(reinterpret_cast<const char*>(e.value.data()),
              static_cast<std::streamsize>(sizeof(double) * e.value.size()));
  }
  if (!out) throw DataError("write failed for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("bad checkpoint magic in " + path);
  auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion)
    throw DataError("unsupported checkpoint version in " + path);

  Checkpoint ck;
  ck.config_hash = read_pod<std::uint64_t>(in, path);
  ck.model.arch.d_x = read_pod<std::int32_t>(in, path);
  ck.model.arch.d_z = read_pod<std::int32_t>(in, path);
  ck.model.n_classes = read_pod<std::int32_t>(in, path);
  auto n_hidden = read_pod<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < n_hidden; ++i)
    ck.model.arch.hidden.push_back(read_pod<std::int32_t>(in, path));
  auto n_entries = read_pod<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    ParamVector::Entry e;
    e.name = read_string(in, path);
    auto rows = read_pod<std::uint64_t>(in, path);
    auto cols = read_pod<std::uint64_t>(in, path);
    e.value.resize(static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(e.value.data()),
            static_cast<std::streamsize>(sizeof(double) * e.value.size()));
    if (!in) throw DataError("truncated checkpoint file: " + path);
    ck.model.params.entries.push_back(std::move(e));
  }
  ck.model.validate();
  return ck;
}

}  // namespace klda

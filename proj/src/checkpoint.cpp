#include "lpdet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace lpdet {

namespace {

constexpr char kMagic[4] = {'L', 'P', 'W', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& f, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(f, bits);
}

float get_f32(std::istream& f) {
  std::uint32_t bits = get_u32(f);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NamedParams& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write(kMagic, 4);
  put_u32(f, kVersion);
  put_u32(f, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    put_u32(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(f, static_cast<std::uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) put_u32(f, static_cast<std::uint32_t>(t.dim(i)));
    for (std::size_t i = 0; i < t.numel(); ++i) put_f32(f, static_cast<float>(t.value(i)));
  }
  if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path, NamedParams& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: not a weight file: " + path);
  if (get_u32(f) != kVersion) throw std::runtime_error("load_checkpoint: unsupported version in " + path);
  std::uint32_t count = get_u32(f);

  struct Entry {
    std::vector<int> shape;
    std::vector<float> data;
  };
  std::map<std::string, Entry> entries;
  for (std::uint32_t e = 0; e < count; ++e) {
    std::uint32_t name_len = get_u32(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    Entry ent;
    std::uint32_t ndim = get_u32(f);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      ent.shape.push_back(static_cast<int>(get_u32(f)));
      numel *= static_cast<std::size_t>(ent.shape.back());
    }
    ent.data.resize(numel);
    for (auto& v : ent.data) v = get_f32(f);
    if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
    entries.emplace(std::move(name), std::move(ent));
  }

  for (auto& [name, t] : params) {
    auto it = entries.find(name);
    if (it == entries.end()) throw std::runtime_error("load_checkpoint: missing tensor " + name);
    if (it->second.shape != t.shape())
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name + ": file " +
                               shape_str(it->second.shape) + " vs model " + shape_str(t.shape()));
    for (std::size_t i = 0; i < t.numel(); ++i) t.set_value(i, static_cast<double>(it->second.data[i]));
    entries.erase(it);
  }
  if (!entries.empty())
    throw std::runtime_error("load_checkpoint: unexpected tensor " + entries.begin()->first + " in " + path);
}

}  // namespace lpdet

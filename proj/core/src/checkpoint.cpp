#include "mcua/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace mcua {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'U', 'A'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
public:
  Reader(const std::string& bytes, const std::string& path) : b_(bytes), path_(path) {}
  uint32_t u32() {
    need(4);
    uint32_t v = static_cast<uint8_t>(b_[pos_]) | (static_cast<uint8_t>(b_[pos_ + 1]) << 8) |
                 (static_cast<uint8_t>(b_[pos_ + 2]) << 16) |
                 (static_cast<uint32_t>(static_cast<uint8_t>(b_[pos_ + 3])) << 24);
    pos_ += 4;
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(uint32_t len) {
    need(len);
    std::string s = b_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  bool at_end() const { return pos_ == b_.size(); }

private:
  void need(size_t n) {
    if (pos_ + n > b_.size()) throw IoError("truncated checkpoint file: " + path_);
  }
  const std::string& b_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<uint32_t>(t->shape.size()));
    for (int d : t->shape) put_u32(out, static_cast<uint32_t>(d));
    for (double v : t->data) put_f32(out, static_cast<float>(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to checkpoint: " + path);
}

std::vector<LoadedTensor> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (!f.good() && !f.eof()) throw IoError("read failure on checkpoint: " + path);

  Reader r(bytes, path);
  const std::string magic = r.str(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw ValidationError("not a checkpoint file (bad magic): " + path);
  const uint32_t version = r.u32();
  if (version != kVersion)
    throw ValidationError("unsupported checkpoint version " + std::to_string(version) + ": " +
                          path);
  const uint32_t count = r.u32();
  std::vector<LoadedTensor> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    LoadedTensor t;
    t.name = r.str(r.u32());
    const uint32_t rank = r.u32();
    t.shape.resize(rank);
    int64_t n = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      t.shape[d] = static_cast<int>(r.u32());
      n *= t.shape[d];
    }
    t.data.resize(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) t.data[static_cast<size_t>(j)] = r.f32();
    out.push_back(std::move(t));
  }
  if (!r.at_end()) throw IoError("trailing bytes in checkpoint: " + path);
  return out;
}

void load_into(const std::string& path, const NamedTensors& dest) {
  auto loaded = load_checkpoint(path);
  std::map<std::string, const LoadedTensor*> by_name;
  for (const auto& t : loaded) by_name[t.name] = &t;
  if (loaded.size() != by_name.size())
    throw ValidationError("duplicate tensor names in checkpoint: " + path);
  if (by_name.size() != dest.size())
    throw ValidationError("checkpoint " + path + " holds " + std::to_string(by_name.size()) +
                          " tensors, expected " + std::to_string(dest.size()));
  for (const auto& [name, t] : dest) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw ValidationError("checkpoint " + path + " is missing tensor: " + name);
    if (it->second->shape != t->shape)
      throw ValidationError("checkpoint " + path + " has wrong shape for tensor: " + name);
    t->data = it->second->data;
  }
}

}  // namespace mcua

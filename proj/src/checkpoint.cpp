#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "hgnet/nn.hpp"

namespace hgnet {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& out, uint32_t x) {
  out.write(reinterpret_cast<const char*>(&x), sizeof x);
}

uint32_t get_u32(std::istream& in, const char* what) {
  uint32_t x = 0;
  if (!in.read(reinterpret_cast<char*>(&x), sizeof x))
    throw IngestError(std::string("checkpoint truncated reading ") + what);
  return x;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::map<std::string, FMat>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot open checkpoint for writing: " + path);
  out.write("HGN1", 4);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, 2);
    put_u32(out, static_cast<uint32_t>(t.rows));
    put_u32(out, static_cast<uint32_t>(t.cols));
    out.write(reinterpret_cast<const char*>(t.v.data()),
              static_cast<std::streamsize>(t.v.size() * sizeof(float)));
  }
  if (!out) throw IngestError("failed writing checkpoint: " + path);
}

std::map<std::string, FMat> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open checkpoint: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "HGN1", 4) != 0)
    throw IngestError("not a checkpoint file (bad magic): " + path);
  uint32_t count = get_u32(in, "tensor count");
  std::map<std::string, FMat> out;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = get_u32(in, "name length");
    if (name_len > 4096) throw IngestError("checkpoint tensor name too long");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw IngestError("checkpoint truncated reading name");
    uint32_t rank = get_u32(in, "rank");
    if (rank != 2) throw IngestError("checkpoint tensor " + name + " has unsupported rank");
    uint32_t rows = get_u32(in, "rows");
    uint32_t cols = get_u32(in, "cols");
    if (rows == 0 || cols == 0 || static_cast<uint64_t>(rows) * cols > (1u << 28))
      throw IngestError("checkpoint tensor " + name + " has implausible shape");
    FMat t(static_cast<int>(rows), static_cast<int>(cols));
    if (!in.read(reinterpret_cast<char*>(t.v.data()),
                 static_cast<std::streamsize>(t.v.size() * sizeof(float))))
      throw IngestError("checkpoint truncated reading data for " + name);
    if (!out.emplace(name, std::move(t)).second)
      throw IngestError("checkpoint has duplicate tensor " + name);
  }
  return out;
}

}

#include "rvt/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "rvt/config_io.hpp"

namespace rvt {

namespace {

constexpr char kMagic[4] = {'R', 'V', 'T', 'W'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& in, std::uint64_t& offset,
                       const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(std::string("checkpoint: truncated while reading ") +
                          what,
                      offset);
  offset += 4;
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

template <typename T>
constexpr std::uint8_t dtype_tag() {
  return std::is_same_v<T, float> ? 0 : 1;
}

template <typename T>
void save_impl(const Model<T>& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  const std::string cfg = model_config_to_json(m.cfg);
  write_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  for (const auto& [name, p] : m.params) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const std::uint8_t tag = dtype_tag<T>();
    out.write(reinterpret_cast<const char*>(&tag), 1);
    write_u32(out, static_cast<std::uint32_t>(p.rank()));
    for (int d = 0; d < p.rank(); ++d)
      write_u32(out, static_cast<std::uint32_t>(p.dim(d)));
    out.write(reinterpret_cast<const char*>(p.data()),
              static_cast<std::streamsize>(p.numel() *
                                           static_cast<std::int64_t>(sizeof(T))));
  }
  if (!out) throw DataError("checkpoint: write to " + path + " failed");
}

template <typename T>
Model<T> load_impl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  std::uint64_t offset = 0;
  char magic[4];
  if (!in.read(magic, 4)) throw FormatError("checkpoint: truncated magic", 0);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic in " + path, 0);
  offset += 4;
  const std::uint32_t version = read_u32(in, offset, "version");
  if (version != kVersion)
    throw FormatError("checkpoint: unsupported version " +
                          std::to_string(version),
                      offset - 4);
  const std::uint32_t cfg_len = read_u32(in, offset, "config length");
  std::string cfg_text(cfg_len, '\0');
  if (!in.read(cfg_text.data(), cfg_len))
    throw FormatError("checkpoint: truncated config blob", offset);
  offset += cfg_len;

  Model<T> m =
      build_model<T>(model_config_from_json_text(cfg_text), 0, /*zero_init=*/true);
  std::size_t filled = 0;
  while (true) {
    char peek;
    if (!in.read(&peek, 1)) break;  // clean EOF between records
    in.putback(peek);
    const std::uint32_t name_len = read_u32(in, offset, "name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len))
      throw FormatError("checkpoint: truncated parameter name", offset);
    offset += name_len;
    std::uint8_t tag;
    if (!in.read(reinterpret_cast<char*>(&tag), 1))
      throw FormatError("checkpoint: truncated dtype tag", offset);
    offset += 1;
    if (tag != dtype_tag<T>())
      throw FormatError("checkpoint: dtype tag " + std::to_string(tag) +
                            " does not match the requested precision",
                        offset - 1);
    const std::uint32_t rank = read_u32(in, offset, "rank");
    Shape shape;
    std::int64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t extent = read_u32(in, offset, "extent");
      shape.push_back(static_cast<int>(extent));
      numel *= extent;
    }
    Tensor<T>* target = nullptr;
    for (auto& [n, p] : m.params)
      if (n == name) target = &p;
    if (!target)
      throw FormatError("checkpoint: unknown parameter '" + name + "'",
                        offset);
    if (target->shape() != shape)
      throw FormatError("checkpoint: parameter '" + name + "' has shape " +
                            shape_str(shape) + ", expected " +
                            shape_str(target->shape()),
                        offset);
    if (!in.read(reinterpret_cast<char*>(target->data()),
                 static_cast<std::streamsize>(
                     numel * static_cast<std::int64_t>(sizeof(T)))))
      throw FormatError("checkpoint: truncated data for '" + name + "'",
                        offset);
    offset += static_cast<std::uint64_t>(numel) * sizeof(T);
    ++filled;
  }
  if (filled != m.params.size())
    throw FormatError("checkpoint: " + std::to_string(filled) + " of " +
                          std::to_string(m.params.size()) +
                          " parameters present",
                      offset);
  return m;
}

}  // namespace

void save_checkpoint(const Model<float>& m, const std::string& path) {
  save_impl(m, path);
}

void save_checkpoint(const Model<double>& m, const std::string& path) {
  save_impl(m, path);
}

Model<float> load_checkpoint(const std::string& path) {
  return load_impl<float>(path);
}

Model<double> load_checkpoint_f64(const std::string& path) {
  return load_impl<double>(path);
}

}  // namespace rvt

#include "rvt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "rvt/errors.hpp"
#include "rvt/rng.hpp"

namespace rvt {

namespace {

constexpr char kMagic[4] = {'R', 'V', 'T', 'D'};
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
    throw FormatError(std::string("dataset: truncated while reading ") + what,
                      offset);
  offset += 4;
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

Tensor<float> Dataset::image(int index) const {
  if (index < 0 || index >= size())
    throw IndexError("dataset: image index " + std::to_string(index) +
                     " out of range");
  std::vector<float> out(static_cast<std::size_t>(3) * height * width);
  const std::uint8_t* src =
      pixels.data() +
      static_cast<std::size_t>(index) * height * width * 3;
  constexpr float kInv = 1.0f / 255.0f;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c)
        out[(static_cast<std::size_t>(c) * height + y) * width + x] =
            static_cast<float>(src[(static_cast<std::size_t>(y) * width + x) * 3 + c]) *
            kInv;
  return Tensor<float>({3, height, width}, std::move(out));
}

void Dataset::validate() const {
  if (labels.empty()) throw DataError("dataset: empty");
  if (num_classes < 1) throw DataError("dataset: class count must be positive");
  if (pixels.size() != static_cast<std::size_t>(labels.size()) * height * width * 3)
    throw DataError("dataset: pixel buffer does not match image count");
  for (auto l : labels)
    if (l >= num_classes)
      throw DataError("dataset: label " + std::to_string(l) +
                      " outside [0," + std::to_string(num_classes) + ")");
}

void save_dataset(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("dataset: cannot open " + path + " for writing");
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(ds.size()));
  write_u32(out, static_cast<std::uint32_t>(ds.height));
  write_u32(out, static_cast<std::uint32_t>(ds.width));
  write_u32(out, static_cast<std::uint32_t>(ds.num_classes));
  for (auto l : ds.labels) {
    const unsigned char b[2] = {static_cast<unsigned char>(l),
                                static_cast<unsigned char>(l >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
  }
  out.write(reinterpret_cast<const char*>(ds.pixels.data()),
            static_cast<std::streamsize>(ds.pixels.size()));
  if (!out) throw DataError("dataset: write to " + path + " failed");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("dataset: cannot open " + path);
  std::uint64_t offset = 0;
  char magic[4];
  if (!in.read(magic, 4))
    throw FormatError("dataset: truncated magic", offset);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("dataset: bad magic in " + path, offset);
  offset += 4;
  const std::uint32_t version = read_u32(in, offset, "version");
  if (version != kVersion)
    throw FormatError("dataset: unsupported version " + std::to_string(version),
                      offset - 4);
  Dataset ds;
  const std::uint32_t b = read_u32(in, offset, "image count");
  ds.height = static_cast<int>(read_u32(in, offset, "height"));
  ds.width = static_cast<int>(read_u32(in, offset, "width"));
  ds.num_classes = static_cast<int>(read_u32(in, offset, "class count"));
  ds.labels.resize(b);
  for (std::uint32_t i = 0; i < b; ++i) {
    unsigned char lb[2];
    if (!in.read(reinterpret_cast<char*>(lb), 2))
      throw FormatError("dataset: truncated labels", offset);
    offset += 2;
    ds.labels[i] = static_cast<std::uint16_t>(lb[0] | (lb[1] << 8));
  }
  const std::size_t npix =
      static_cast<std::size_t>(b) * ds.height * ds.width * 3;
  ds.pixels.resize(npix);
  if (!in.read(reinterpret_cast<char*>(ds.pixels.data()),
               static_cast<std::streamsize>(npix)))
    throw FormatError("dataset: truncated pixel data", offset);
  offset += npix;
  char extra;
  if (in.read(&extra, 1))
    throw FormatError("dataset: trailing bytes", offset);
  ds.validate();
  return ds;
}

Dataset make_synthetic_dataset(std::uint64_t seed, int per_class) {
  if (per_class < 1)
    throw ConfigError("synthetic dataset: per_class must be positive");
  constexpr int kSide = 32;
  constexpr int kClasses = 4;
  // one color per class keeps the classes linearly separable by mean color
  constexpr float kColors[kClasses][3] = {{0.90f, 0.15f, 0.15f},
                                          {0.15f, 0.85f, 0.15f},
                                          {0.20f, 0.35f, 0.95f},
                                          {0.90f, 0.85f, 0.15f}};
  Dataset ds;
  ds.height = kSide;
  ds.width = kSide;
  ds.num_classes = kClasses;
  const int total = per_class * kClasses;
  ds.labels.resize(static_cast<std::size_t>(total));
  ds.pixels.resize(static_cast<std::size_t>(total) * kSide * kSide * 3);

  for (int i = 0; i < total; ++i) {
    const int cls = i % kClasses;
    ds.labels[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(cls);
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));

    float img[kSide][kSide][3];
    for (int y = 0; y < kSide; ++y)
      for (int x = 0; x < kSide; ++x)
        for (int c = 0; c < 3; ++c)
          img[y][x][c] = static_cast<float>(0.08 + 0.12 * rng.uniform());

    const int orient = static_cast<int>(rng.uniform_index(4));
    const int thickness = 5 + static_cast<int>(rng.uniform_index(4));
    const int offset =
        static_cast<int>(rng.uniform_index(kSide - thickness));
    const float jitter = static_cast<float>(rng.uniform(-0.05, 0.05));
    for (int y = 0; y < kSide; ++y)
      for (int x = 0; x < kSide; ++x) {
        int coord;
        switch (orient) {
          case 0: coord = y; break;                          // horizontal bar
          case 1: coord = x; break;                          // vertical bar
          case 2: coord = ((y + x) / 2) % kSide; break;      // diagonal
          default: coord = ((y - x + kSide) / 2) % kSide;    // anti-diagonal
        }
        if (coord >= offset && coord < offset + thickness)
          for (int c = 0; c < 3; ++c)
            img[y][x][c] = std::clamp(
                kColors[cls][c] + jitter +
                    static_cast<float>(rng.uniform(-0.03, 0.03)),
                0.0f, 1.0f);
      }

    std::uint8_t* dst =
        ds.pixels.data() + static_cast<std::size_t>(i) * kSide * kSide * 3;
    for (int y = 0; y < kSide; ++y)
      for (int x = 0; x < kSide; ++x)
        for (int c = 0; c < 3; ++c)
          dst[(static_cast<std::size_t>(y) * kSide + x) * 3 + c] =
              static_cast<std::uint8_t>(
                  std::lround(std::clamp(img[y][x][c], 0.0f, 1.0f) * 255.0f));
  }
  return ds;
}

}  // namespace rvt

// SPDX-License-Identifier: Apache-2.0

#include "mgrr/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "mgrr/error.hpp"

namespace mgrr {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

namespace {
constexpr std::array<char, 4> kMagic{'M', 'G', 'T', '1'};
constexpr std::uint32_t kMaxRank = 8;
}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic.data(), kMagic.size());
  const auto rank = static_cast<std::uint32_t>(t.rank());
  os.write(reinterpret_cast<const char*>(&rank), sizeof rank);
  for (auto e : t.shape()) {
    const auto ext = static_cast<std::uint32_t>(e);
    os.write(reinterpret_cast<const char*>(&ext), sizeof ext);
  }
  os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
  if (!os) throw InputError("failed to write tensor");
}

Tensor read_tensor(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw ParseError("bad tensor file magic");
  std::uint32_t rank = 0;
  is.read(reinterpret_cast<char*>(&rank), sizeof rank);
  if (!is || rank == 0 || rank > kMaxRank) throw ParseError("bad tensor rank");
  Shape shape(rank);
  for (auto& e : shape) {
    std::uint32_t ext = 0;
    is.read(reinterpret_cast<char*>(&ext), sizeof ext);
    if (!is || ext == 0) throw ParseError("bad tensor extent");
    e = ext;
  }
  std::vector<double> data(shape_numel(shape));
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!is) throw ParseError("truncated tensor payload");
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open " + path.string() + " for writing");
  write_tensor(os, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path.string());
  try {
    return read_tensor(is);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace mgrr

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>

#include "mgrr/tensor.hpp"

namespace mgrr {

// Binary tensor file: "MGT1", u32 rank, u32 extents[rank], float64 payload.
// All integers and floats little-endian.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace mgrr

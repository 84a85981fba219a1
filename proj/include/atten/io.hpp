#pragma once

#include <iosfwd>
#include <string>

#include "atten/tensor.hpp"

namespace atten {

// "FTEN" container: magic `FTEN`, u8 version (=1), u8 dtype (1=f32, 2=f64),
// u8 rank, rank little-endian u64 dims, then the row-major payload in
// little-endian order.
enum class FtenDtype : unsigned char { F32 = 1, F64 = 2 };

void write_ften(std::ostream& os, const Tensor& t, FtenDtype dtype = FtenDtype::F64);
void write_ften(const std::string& path, const Tensor& t,
                FtenDtype dtype = FtenDtype::F64);
Tensor read_ften(std::istream& is);
Tensor read_ften(const std::string& path);

// Binary PGM (P5, maxval <= 255) thresholded at 128 into a {0,1} mask [1,H,W].
Tensor load_pgm_mask(const std::string& path);
Tensor parse_pgm_mask(std::istream& is);

// Writes to a temp file in the target directory, then renames into place.
void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace atten

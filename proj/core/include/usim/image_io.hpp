#pragma once

#include <string>
#include <vector>

#include "usim/frame.hpp"

namespace usim {

// Netpbm I/O. Frames are stored as binary PPM (P6); plain PPM (P3) is
// accepted on read so fixtures can live in the repo as text. Binary
// masks go out as plain PBM (P1) for eyeballing in a pager.

void write_ppm(const std::string& path, const Frame& frame);
Frame read_ppm(const std::string& path); // throws Error{io_error}

void write_pbm(const std::string& path, int width, int height,
               const std::vector<uint8_t>& mask); // nonzero = foreground
std::vector<uint8_t> read_pbm(const std::string& path, int& width, int& height);

} // namespace usim

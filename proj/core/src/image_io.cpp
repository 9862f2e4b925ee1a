#include "usim/image_io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "usim/error.hpp"

namespace usim {

namespace {

// Skips whitespace and '#' comments between header tokens.
int next_header_int(std::istream& in, const std::string& path) {
  for (;;) {
    int c = in.peek();
    if (c == EOF) throw Error(ErrorCode::io_error, "truncated header in " + path);
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    break;
  }
  int value = 0;
  if (!(in >> value)) throw Error(ErrorCode::io_error, "bad header in " + path);
  return value;
}

} // namespace

void write_ppm(const std::string& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
  out << "P6\n" << frame.width << " " << frame.height << "\n255\n";
  std::string row;
  row.reserve(static_cast<size_t>(frame.width) * 3);
  for (int y = 0; y < frame.height; ++y) {
    row.clear();
    for (int x = 0; x < frame.width; ++x) {
      const Rgba& p = frame.at(x, y);
      row.push_back(static_cast<char>(p.r));
      row.push_back(static_cast<char>(p.g));
      row.push_back(static_cast<char>(p.b));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error(ErrorCode::io_error, "short write to " + path);
}

Frame read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || (m1 != '6' && m1 != '3'))
    throw Error(ErrorCode::io_error, "not a PPM file: " + path);
  int w = next_header_int(in, path);
  int h = next_header_int(in, path);
  int maxval = next_header_int(in, path);
  if (w <= 0 || h <= 0 || maxval != 255)
    throw Error(ErrorCode::io_error, "unsupported PPM geometry in " + path);
  Frame frame(w, h);
  if (m1 == '6') {
    in.get(); // single whitespace after maxval
    std::vector<char> raw(static_cast<size_t>(w) * h * 3);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
      throw Error(ErrorCode::io_error, "truncated pixel data in " + path);
    for (size_t i = 0; i < frame.pixels.size(); ++i) {
      frame.pixels[i] = {static_cast<uint8_t>(raw[i * 3]),
                         static_cast<uint8_t>(raw[i * 3 + 1]),
                         static_cast<uint8_t>(raw[i * 3 + 2]), 255};
    }
  } else {
    for (auto& px : frame.pixels) {
      int r = 0, g = 0, b = 0;
      if (!(in >> r >> g >> b))
        throw Error(ErrorCode::io_error, "truncated pixel data in " + path);
      px = {static_cast<uint8_t>(r), static_cast<uint8_t>(g),
            static_cast<uint8_t>(b), 255};
    }
  }
  return frame;
}

void write_pbm(const std::string& path, int width, int height,
               const std::vector<uint8_t>& mask) {
  if (static_cast<size_t>(width) * height != mask.size())
    throw Error(ErrorCode::io_error, "mask size mismatch for " + path);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path);
  out << "P1\n" << width << " " << height << "\n";
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out << (mask[static_cast<size_t>(y) * width + x] ? '1' : '0');
      out << (x + 1 == width ? '\n' : ' ');
    }
  }
}

std::vector<uint8_t> read_pbm(const std::string& path, int& width, int& height) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '1')
    throw Error(ErrorCode::io_error, "not a plain PBM file: " + path);
  width = next_header_int(in, path);
  height = next_header_int(in, path);
  std::vector<uint8_t> mask(static_cast<size_t>(width) * height, 0);
  for (auto& v : mask) {
    int bit = 0;
    if (!(in >> bit)) throw Error(ErrorCode::io_error, "truncated PBM " + path);
    v = bit ? 1 : 0;
  }
  return mask;
}

} // namespace usim

#include "qao/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace qao {

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return in;
}

void put_u16(std::ostream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  out.write(b.data(), 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.put(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint32_t get_le(const unsigned char* p, int bytes) {
  std::uint32_t v = 0;
  for (int k = 0; k < bytes; ++k) v |= static_cast<std::uint32_t>(p[k]) << (8 * k);
  return v;
}

void write_pgm_header(std::ostream& out, const Image& img, int maxval) {
  out << "P5\n" << img.cols() << ' ' << img.rows() << '\n' << maxval << '\n';
}

}  // namespace

void write_csv(const std::filesystem::path& path, const Image& values) {
  std::ofstream out = open_out(path, false);
  for (Eigen::Index y = 0; y < values.rows(); ++y) {
    for (Eigen::Index x = 0; x < values.cols(); ++x) out << (x ? "," : "") << values(y, x);
    out << '\n';
  }
}

Image read_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ArgumentError("read_csv: non-numeric cell '" + cell + "' in " + path.string());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw ArgumentError("read_csv: ragged rows in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ArgumentError("read_csv: empty file " + path.string());
  Image img(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index y = 0; y < img.rows(); ++y)
    for (Eigen::Index x = 0; x < img.cols(); ++x)
      img(y, x) = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
  return img;
}

void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
  std::ofstream out = open_out(path, false);
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw ArgumentError("write_table: row width does not match header");
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << row[k];
    out << '\n';
  }
}

void write_phase_pgm(const std::filesystem::path& path, const Image& phase) {
  std::ofstream out = open_out(path, true);
  write_pgm_header(out, phase, 255);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (Eigen::Index y = 0; y < phase.rows(); ++y)
    for (Eigen::Index x = 0; x < phase.cols(); ++x) {
      double w = std::fmod(phase(y, x), two_pi);
      if (w < 0.0) w += two_pi;
      const auto level = static_cast<unsigned>(std::min(255.0, std::floor(w / two_pi * 256.0)));
      out.put(static_cast<char>(level));
    }
}

void write_pgm16(const std::filesystem::path& path, const Image& values) {
  std::ofstream out = open_out(path, true);
  write_pgm_header(out, values, 65535);
  const double peak = values.maxCoeff();
  for (Eigen::Index y = 0; y < values.rows(); ++y)
    for (Eigen::Index x = 0; x < values.cols(); ++x) {
      const double v = peak > 0.0 ? std::clamp(values(y, x) / peak, 0.0, 1.0) : 0.0;
      const auto level = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      out.put(static_cast<char>(level >> 8));  // PGM samples are big-endian
      out.put(static_cast<char>(level & 0xFF));
    }
}

void write_qaof(const std::filesystem::path& path, const FrameStack& stack) {
  if (stack.width > 0xFFFF || stack.height > 0xFFFF) throw ArgumentError("write_qaof: frame too large");
  std::ofstream out = open_out(path, true);
  out.write("QAOF", 4);
  put_u16(out, 1);
  put_u16(out, static_cast<std::uint16_t>(stack.width));
  put_u16(out, static_cast<std::uint16_t>(stack.height));
  put_u16(out, 0);
  put_u32(out, static_cast<std::uint32_t>(stack.frame_count()));
  out.write(reinterpret_cast<const char*>(stack.bits.data()), static_cast<std::streamsize>(stack.bits.size()));
}

FrameStack read_qaof(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::array<unsigned char, 16> header{};
  if (!in.read(reinterpret_cast<char*>(header.data()), 16) || std::string(header.begin(), header.begin() + 4) != "QAOF")
    throw ArgumentError("read_qaof: not a QAOF file");
  if (get_le(&header[4], 2) != 1) throw ArgumentError("read_qaof: unsupported version");
  const int width = static_cast<int>(get_le(&header[6], 2));
  const int height = static_cast<int>(get_le(&header[8], 2));
  const long count = static_cast<long>(get_le(&header[12], 4));
  FrameStack stack = FrameStack::zeros(width, height, count);
  if (!in.read(reinterpret_cast<char*>(stack.bits.data()), static_cast<std::streamsize>(stack.bits.size())))
    throw ArgumentError("read_qaof: truncated frame data");
  return stack;
}

}  // namespace qao

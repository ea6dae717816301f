#pragma once

// File formats: netpbm frames (8/16-bit, colour via the green channel), CSV
// arrays, and the processed-sequence binary with its JSON manifest.

#include "tearfilm/preprocess.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace tearfilm {

namespace fs = std::filesystem;

namespace detail {

inline std::string next_token(std::istream& is) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(char(ch));
  }
  return tok;
}

inline int parse_header_int(std::istream& is, const std::string& path) {
  const std::string t = next_token(is);
  try {
    std::size_t used = 0;
    const int v = std::stoi(t, &used);
    if (used != t.size() || v <= 0) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw IoError(path + ": malformed netpbm header");
  }
}

}  // namespace detail

/// Read a PGM/PPM image as intensities in [0, 1]. Colour images use the
/// green channel.
inline Array2 read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open image " + path);
  const std::string magic = detail::next_token(is);
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6")
    throw IoError(path + ": unsupported image format (expected PGM or PPM)");
  const int w = detail::parse_header_int(is, path);
  const int h = detail::parse_header_int(is, path);
  const int maxval = detail::parse_header_int(is, path);
  if (maxval > 65535) throw IoError(path + ": maxval exceeds 16 bits");
  const bool colour = magic == "P3" || magic == "P6";
  const bool binary = magic == "P5" || magic == "P6";
  const int channels = colour ? 3 : 1;
  const int bytes = maxval > 255 ? 2 : 1;
  Array2 out(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double sample = 0.0;
      for (int c = 0; c < channels; ++c) {
        unsigned v = 0;
        if (binary) {
          unsigned char buf[2] = {0, 0};
          is.read(reinterpret_cast<char*>(buf), bytes);
          v = bytes == 2 ? (unsigned(buf[0]) << 8) | buf[1] : buf[0];
        } else {
          const std::string t = detail::next_token(is);
          if (t.empty()) throw IoError(path + ": truncated pixel data");
          v = unsigned(std::stoul(t));
        }
        if (!is && binary) throw IoError(path + ": truncated pixel data");
        if (c == (colour ? 1 : 0)) sample = double(v) / maxval;
      }
      out(i, j) = sample;
    }
  return out;
}

/// Write a 16-bit binary PGM; values are divided by `scale` and clamped to [0, 1].
inline void write_pgm(const std::string& path, const Array2& img, double scale = 1.0) {
  if (!(scale > 0.0)) throw IoError("image scale must be positive");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write image " + path);
  os << "P5\n" << img.cols() << ' ' << img.rows() << "\n65535\n";
  for (Index i = 0; i < img.rows(); ++i)
    for (Index j = 0; j < img.cols(); ++j) {
      const double v = std::clamp(img(i, j) / scale, 0.0, 1.0);
      const auto q = std::uint16_t(std::lround(v * 65535.0));
      const char buf[2] = {char(q >> 8), char(q & 0xff)};
      os.write(buf, 2);
    }
  if (!os) throw IoError("failed writing " + path);
}

/// Image files in a directory, ordered by the number embedded in their names.
inline std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("frame directory not found: " + dir.string());
  std::vector<std::pair<long long, fs::path>> found;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".pgm" && ext != ".ppm" && ext != ".pnm") continue;
    const std::string stem = e.path().stem().string();
    std::string digits;
    for (char c : stem)
      if (std::isdigit(static_cast<unsigned char>(c))) digits.push_back(c);
    found.emplace_back(digits.empty() ? -1 : std::stoll(digits), e.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& f : found) out.push_back(f.second);
  return out;
}

inline void write_csv(const std::string& path, const Array2& a) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << std::setprecision(17);
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) os << (j ? "," : "") << a(i, j);
    os << '\n';
  }
}

inline Array2 read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
    if (!rows.empty() && r.size() != rows.front().size()) throw IoError(path + ": ragged CSV");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw IoError(path + ": empty CSV");
  Array2 a(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) a(i, j) = rows[i][j];
  return a;
}

// ---------------------------------------------------------------------------
// Processed sequence: "<stem>.bin" holds frame data as little-endian doubles
// (count x ny x nx, row-major), "<stem>.json" the manifest.

inline void save_sequence(const ProcessedSequence& s, const fs::path& stem) {
  if (s.frames.empty()) throw IoError("refusing to save an empty sequence");
  const Index ny = s.frames.front().rows(), nx = s.frames.front().cols();
  const fs::path bin = fs::path(stem).concat(".bin"), man = fs::path(stem).concat(".json");
  {
    std::ofstream os(bin, std::ios::binary);
    if (!os) throw IoError("cannot write " + bin.string());
    for (const auto& f : s.frames) os.write(reinterpret_cast<const char*>(f.data()), sizeof(double) * f.size());
    if (!os) throw IoError("failed writing " + bin.string());
  }
  nlohmann::json j;
  j["format"] = "tearfilm-sequence";
  j["version"] = 1;
  j["data"] = bin.filename().string();
  j["frames"] = s.frames.size();
  j["ny"] = ny;
  j["nx"] = nx;
  j["times"] = s.times;
  j["window"] = {{"a", s.window.a}, {"b", s.window.b}, {"k", s.window.k}};
  j["sigma"] = s.sigma;
  j["scale"] = s.scale;
  j["f0_estimate"] = s.f0_estimate;
  std::ofstream ms(man);
  if (!ms) throw IoError("cannot write " + man.string());
  ms << j.dump(2) << '\n';
}

inline ProcessedSequence load_sequence(const fs::path& stem_or_manifest) {
  fs::path man = stem_or_manifest;
  if (man.extension() != ".json") man = fs::path(stem_or_manifest).concat(".json");
  std::ifstream ms(man);
  if (!ms) throw IoError("cannot open sequence manifest " + man.string());
  nlohmann::json j;
  try {
    ms >> j;
  } catch (const std::exception& e) {
    throw IoError(man.string() + ": " + e.what());
  }
  if (j.value("format", "") != "tearfilm-sequence") throw IoError(man.string() + ": not a sequence manifest");
  ProcessedSequence s;
  const auto count = j.at("frames").get<std::size_t>();
  const auto ny = j.at("ny").get<Index>(), nx = j.at("nx").get<Index>();
  s.times = j.at("times").get<std::vector<double>>();
  if (s.times.size() != count) throw IoError(man.string() + ": times and frame count disagree");
  s.window = {j.at("window").at("a").get<double>(), j.at("window").at("b").get<double>(),
              j.at("window").at("k").get<double>()};
  s.sigma = j.value("sigma", 2.0);
  s.scale = j.value("scale", 1.0);
  s.f0_estimate = j.value("f0_estimate", 1.0);
  const fs::path bin = man.parent_path() / j.at("data").get<std::string>();
  std::ifstream is(bin, std::ios::binary);
  if (!is) throw IoError("cannot open sequence data " + bin.string());
  for (std::size_t k = 0; k < count; ++k) {
    Array2 f(ny, nx);
    is.read(reinterpret_cast<char*>(f.data()), sizeof(double) * f.size());
    if (!is) throw IoError(bin.string() + ": truncated frame data");
    s.frames.push_back(std::move(f));
  }
  return s;
}

inline void write_alignment_csv(const std::string& path, const AlignmentTrack& t) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "frame,ci,cj,di,dj\n";
  for (std::size_t k = 0; k < t.centers.size(); ++k)
    os << k << ',' << t.centers[k][0] << ',' << t.centers[k][1] << ',' << t.shifts[k][0] << ',' << t.shifts[k][1]
       << '\n';
}

}  // namespace tearfilm

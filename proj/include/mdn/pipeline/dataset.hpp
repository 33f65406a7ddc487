#pragma once

// Crop datasets from directories of consecutive PNG frames, and the manifest
// format `<path_prev> <path_cur> <crop_y> <crop_x>` (one pair per line).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mdn/core/random.hpp"
#include "mdn/io/png.hpp"
#include "mdn/pipeline/train.hpp"

namespace mdn {

struct ManifestEntry {
  std::string prev;
  std::string cur;
  int crop_y = 0;
  int crop_x = 0;
  bool operator==(const ManifestEntry&) const = default;
};

inline std::string manifest_text(const std::vector<ManifestEntry>& m) {
  std::ostringstream os;
  for (const auto& e : m) os << e.prev << " " << e.cur << " " << e.crop_y << " " << e.crop_x << "\n";
  return os.str();
}

inline std::vector<ManifestEntry> parse_manifest(const std::string& text) {
  std::vector<ManifestEntry> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string extra;
    if (!(ls >> e.prev >> e.cur >> e.crop_y >> e.crop_x) || (ls >> extra) || e.crop_y < 0 || e.crop_x < 0) {
      throw FormatError("manifest line " + std::to_string(lineno) + ": expected '<prev> <cur> <y> <x>'");
    }
    out.push_back(e);
  }
  return out;
}

template <typename T>
Tensor<T> crop_at(const Tensor<T>& x, int y0, int x0, int h, int w) {
  const Shape s = x.shape();
  if (y0 < 0 || x0 < 0 || y0 + h > s.h || x0 + w > s.w) {
    throw ShapeError("crop " + std::to_string(h) + "x" + std::to_string(w) + " at (" + std::to_string(y0) + "," +
                     std::to_string(x0) + ") outside " + s.str());
  }
  Tensor<T> out(Shape{s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) out.at(n, c, y, xx) = x.at(n, c, y0 + y, x0 + xx);
  return out;
}

// Consecutive PNG files (sorted by name) in `dir` form the frame pairs.
inline std::vector<std::pair<std::string, std::string>> consecutive_pairs(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> frames;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && ext == ".png") frames.push_back(e.path().string());
  }
  std::sort(frames.begin(), frames.end());
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 1; i < frames.size(); ++i) pairs.emplace_back(frames[i - 1], frames[i]);
  return pairs;
}

// Draws `count` crops uniformly over the usable pairs, one seeded position per
// crop shared by both frames. Pairs smaller than the crop are skipped with a warning.
inline std::vector<ManifestEntry> make_crop_manifest(const std::string& dir, int crop, int count, std::uint64_t seed,
                                                     std::ostream& warn = std::cerr) {
  if (crop <= 0 || count < 0) throw ConfigError("crop dataset: crop must be > 0 and count >= 0");
  struct Usable {
    std::string prev, cur;
    int h, w;
  };
  std::vector<Usable> usable;
  for (const auto& [prev, cur] : consecutive_pairs(dir)) {
    const Tensor<float> a = read_png(prev);
    const Tensor<float> b = read_png(cur);
    const Shape sa = a.shape(), sb = b.shape();
    if (sa != sb) {
      warn << "warning: skipping " << prev << " / " << cur << ": frame sizes differ\n";
      continue;
    }
    if (sa.h < crop || sa.w < crop) {
      warn << "warning: skipping " << prev << " / " << cur << ": smaller than crop " << crop << "\n";
      continue;
    }
    usable.push_back({prev, cur, sa.h, sa.w});
  }
  if (usable.empty() && count > 0) throw ValueError("crop dataset: no frame pair is at least " + std::to_string(crop) + " px");
  Rng rng(seed);
  std::vector<ManifestEntry> m;
  for (int i = 0; i < count; ++i) {
    const auto& u = usable[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(usable.size()) - 1))];
    const int y = static_cast<int>(rng.integer(0, u.h - crop));
    const int x = static_cast<int>(rng.integer(0, u.w - crop));
    m.push_back({u.prev, u.cur, y, x});
  }
  return m;
}

inline FrameBatchSource load_manifest(const std::vector<ManifestEntry>& m, int crop) {
  FrameBatchSource src;
  std::map<std::string, Tensor<float>> cache;
  auto frame = [&](const std::string& p) -> const Tensor<float>& {
    auto it = cache.find(p);
    if (it == cache.end()) it = cache.emplace(p, read_png(p)).first;
    return it->second;
  };
  for (const auto& e : m) {
    src.prev.push_back(crop_at(frame(e.prev), e.crop_y, e.crop_x, crop, crop));
    src.cur.push_back(crop_at(frame(e.cur), e.crop_y, e.crop_x, crop, crop));
  }
  return src;
}

}  // namespace mdn

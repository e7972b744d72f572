#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ablate/grid.hpp"
#include "ablate/rng.hpp"

namespace ablate {

// One synthetic sample: a grayscale image containing a single
// class-determining shape, its tight bounding box (inclusive), and a
// difficulty tag (small object, or distractor textures present).
struct AnnotatedSample {
  Image image;
  int label = 0;
  int row0 = 0, col0 = 0, row1 = 0, col1 = 0;
  bool difficult = false;

  bool box_contains(int r, int c) const {
    return r >= row0 && r <= row1 && c >= col0 && c <= col1;
  }
};

namespace detail {

// Shape families, one per class, ordered so small class counts get the most
// separable mix: disc, cross, ring, square, triangle.
inline bool shape_hit(int family, int dr, int dc, int s) {
  const int arm = std::max(1, s / 3);
  switch (family) {
    case 0: return dr * dr + dc * dc <= s * s;
    case 1:
      return (std::abs(dr) <= arm && std::abs(dc) <= s) ||
             (std::abs(dc) <= arm && std::abs(dr) <= s);
    case 2: {
      const int rr = dr * dr + dc * dc;
      const int inner = std::max(1, (55 * s) / 100);
      return rr <= s * s && rr >= inner * inner;
    }
    case 3: return std::abs(dr) <= s && std::abs(dc) <= s;
    case 4: return dr >= -s && dr <= s && 2 * std::abs(dc) <= dr + s;
    default: return false;
  }
}

}  // namespace detail

// Deterministic synthetic corpus: noisy grayscale images, one shape per image
// whose family encodes the class, plus up to two class-neutral distractor
// textures placed away from the shape. Pure function of the seed; every
// sample draws from its own derived stream so generation order is free.
inline std::vector<AnnotatedSample> generate_blob_corpus(uint64_t seed, int n, int height,
                                                         int width, int class_count) {
  if (class_count < 2 || class_count > 5)
    throw value_error("generate_blob_corpus: class count must be in [2,5]");
  if (height < 16 || width < 16)
    throw value_error("generate_blob_corpus: grid must be at least 16x16");
  if (n <= 0) throw value_error("generate_blob_corpus: sample count must be positive");

  const GridDomain domain(height, width);
  std::vector<AnnotatedSample> corpus;
  corpus.reserve(n);

  for (int idx = 0; idx < n; ++idx) {
    Rng rng(Rng::mix(seed, static_cast<uint64_t>(idx)));
    AnnotatedSample sample;
    sample.label = rng.uniform_int(0, class_count - 1);

    Image img(domain, 1);
    for (double& v : img.values)
      v = std::min(1.0, std::max(0.0, 0.15 + rng.normal(0.0, 0.025)));

    // Mostly mid-to-large shapes with a small-object tail (those land in the
    // difficult subset).
    const int s_max = std::max(5, std::min(height, width) / 4);
    const int s = rng.uniform() < 0.12 ? 4 : rng.uniform_int(5, s_max);
    const int cr = rng.uniform_int(s + 1, height - s - 2);
    const int cc = rng.uniform_int(s + 1, width - s - 2);
    const double intensity = rng.uniform(0.85, 0.95);

    int r0 = height, c0 = width, r1 = -1, c1 = -1, area = 0;
    for (int r = cr - s; r <= cr + s; ++r)
      for (int c = cc - s; c <= cc + s; ++c)
        if (detail::shape_hit(sample.label, r - cr, c - cc, s)) {
          img.at(r, c, 0) = intensity;
          r0 = std::min(r0, r);
          c0 = std::min(c0, c);
          r1 = std::max(r1, r);
          c1 = std::max(c1, c);
          ++area;
        }
    sample.row0 = r0;
    sample.col0 = c0;
    sample.row1 = r1;
    sample.col1 = c1;

    // Distractors: speckle patches, textured unlike any shape family and
    // kept clear of the object box.
    const int distractors = rng.uniform_int(0, 2);
    int placed = 0;
    for (int d = 0; d < distractors; ++d) {
      for (int attempt = 0; attempt < 12; ++attempt) {
        const int ds = rng.uniform_int(2, std::max(3, s_max / 2));
        const int dr = rng.uniform_int(ds, height - ds - 1);
        const int dc = rng.uniform_int(ds, width - ds - 1);
        const bool clear = dr + ds < r0 - 1 || dr - ds > r1 + 1 || dc + ds < c0 - 1 ||
                           dc - ds > c1 + 1;
        if (!clear) continue;
        for (int r = dr - ds; r <= dr + ds; ++r)
          for (int c = dc - ds; c <= dc + ds; ++c)
            img.at(r, c, 0) =
                std::min(1.0, std::max(0.0, 0.3 + rng.normal(0.0, 0.12)));
        ++placed;
        break;
      }
    }

    sample.difficult = area < (4 * height * width) / 100 || placed >= 1;
    sample.image = std::move(img);
    corpus.push_back(std::move(sample));
  }
  return corpus;
}

// Corpus manifest: JSON lines, one sample record per line, images stored as
// .fgrid (optionally mirrored to PNG) next to the manifest.
inline void write_corpus_manifest(const std::string& manifest_path,
                                  const std::vector<std::string>& image_files,
                                  const std::vector<AnnotatedSample>& corpus) {
  if (image_files.size() != corpus.size())
    throw value_error("write_corpus_manifest: file list and corpus differ in size");
  std::ofstream f(manifest_path, std::ios::binary);
  if (!f) throw io_error("write_corpus_manifest: cannot open '" + manifest_path + "'");
  for (size_t i = 0; i < corpus.size(); ++i) {
    nlohmann::json j;
    j["image"] = image_files[i];
    j["label"] = corpus[i].label;
    j["box"] = {corpus[i].row0, corpus[i].col0, corpus[i].row1, corpus[i].col1};
    j["difficulty"] = corpus[i].difficult ? "difficult" : "simple";
    f << j.dump() << "\n";
  }
  if (!f) throw io_error("write_corpus_manifest: write failed");
}

struct ManifestEntry {
  std::string image_file;
  int label = 0;
  int row0 = 0, col0 = 0, row1 = 0, col1 = 0;
  bool difficult = false;
};

inline std::vector<ManifestEntry> read_corpus_manifest(const std::string& manifest_path) {
  std::ifstream f(manifest_path, std::ios::binary);
  if (!f) throw io_error("read_corpus_manifest: cannot open '" + manifest_path + "'");
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw io_error("read_corpus_manifest: bad record in '" + manifest_path + "': " + e.what());
    }
    ManifestEntry e;
    e.image_file = j.at("image").get<std::string>();
    e.label = j.at("label").get<int>();
    const auto& box = j.at("box");
    e.row0 = box.at(0).get<int>();
    e.col0 = box.at(1).get<int>();
    e.row1 = box.at(2).get<int>();
    e.col1 = box.at(3).get<int>();
    e.difficult = j.at("difficulty").get<std::string>() == "difficult";
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace ablate

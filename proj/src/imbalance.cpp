// Copyright 2026 The mfwlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mfwlab/imbalance.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

namespace mfw {

std::vector<std::size_t> Dataset::indices_of_class(int c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == c) out.push_back(i);
  }
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.features = features.gather_rows(rows);
  out.labels.reserve(rows.size());
  for (auto r : rows) out.labels.push_back(labels[r]);
  out.counts.assign(counts.size(), 0);
  for (int y : out.labels) ++out.counts[static_cast<std::size_t>(y)];
  out.source_class = source_class;
  return out;
}

void Dataset::validate() const {
  if (features.rank() != 2 || features.rows() != labels.size()) {
    throw InvalidArgument("dataset: feature rows do not match label count");
  }
  if (source_class.size() != counts.size()) {
    throw InvalidArgument("dataset: source_class length differs from class count");
  }
  std::vector<std::size_t> tally(counts.size(), 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= counts.size()) {
      throw InvalidArgument("dataset: label " + std::to_string(y) + " out of range");
    }
    ++tally[static_cast<std::size_t>(y)];
  }
  if (tally != counts) throw InvalidArgument("dataset: counts do not match labels");
}

namespace {

// Class order by decreasing count, ties by index.
std::vector<std::size_t> size_order(const std::vector<std::size_t>& counts) {
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  return order;
}

}  // namespace

Dataset make_dataset(Tensor features, std::vector<int> labels, std::size_t num_classes) {
  std::vector<std::size_t> raw(num_classes, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw InvalidArgument("make_dataset: label " + std::to_string(y) + " out of range");
    }
    ++raw[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (raw[c] == 0) throw InvalidArgument("make_dataset: class " + std::to_string(c) + " is empty");
  }
  const auto order = size_order(raw);
  std::vector<int> new_id(num_classes);
  Dataset out;
  out.counts.resize(num_classes);
  out.source_class.resize(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    new_id[order[k]] = static_cast<int>(k);
    out.counts[k] = raw[order[k]];
    out.source_class[k] = static_cast<int>(order[k]);
  }
  for (auto& y : labels) y = new_id[static_cast<std::size_t>(y)];
  out.features = std::move(features);
  out.labels = std::move(labels);
  out.validate();
  return out;
}

Dataset align_classes(const Dataset& data, const Dataset& reference) {
  const std::size_t classes = reference.num_classes();
  if (data.num_classes() != classes) {
    throw InvalidArgument("align_classes: class counts differ (" +
                          std::to_string(data.num_classes()) + " vs " + std::to_string(classes) +
                          ")");
  }
  std::vector<int> mapping(classes, -1);
  for (std::size_t c = 0; c < classes; ++c) {
    const auto it = std::find(reference.source_class.begin(), reference.source_class.end(),
                              data.source_class[c]);
    if (it == reference.source_class.end()) {
      throw InvalidArgument("align_classes: class " + std::to_string(data.source_class[c]) +
                            " missing from the reference");
    }
    mapping[c] = static_cast<int>(it - reference.source_class.begin());
  }
  Dataset out;
  out.features = data.features;
  out.labels.reserve(data.size());
  for (int y : data.labels) out.labels.push_back(mapping[static_cast<std::size_t>(y)]);
  out.counts.assign(classes, 0);
  for (int y : out.labels) ++out.counts[static_cast<std::size_t>(y)];
  out.source_class = reference.source_class;
  out.validate();
  return out;
}

std::uint64_t fingerprint(const Dataset& data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001B3ULL;
    }
  };
  for (auto d : data.features.shape()) {
    const std::uint64_t v = d;
    mix(&v, sizeof v);
  }
  mix(data.features.data().data(), data.features.size() * sizeof(double));
  for (int y : data.labels) {
    const std::int64_t v = y;
    mix(&v, sizeof v);
  }
  return h;
}

namespace {

void check_profile_args(double rho, std::size_t num_classes, const char* who) {
  if (!(rho >= 1.0) || !std::isfinite(rho)) {
    throw InvalidArgument(std::string(who) + ": rho must be >= 1");
  }
  if (num_classes < 2) throw InvalidArgument(std::string(who) + ": need at least 2 classes");
}

}  // namespace

std::vector<std::size_t> longtail_counts(std::size_t n_max, double rho, std::size_t num_classes) {
  check_profile_args(rho, num_classes, "longtail_counts");
  if (n_max == 0) throw InvalidArgument("longtail_counts: n_max must be positive");
  std::vector<std::size_t> counts(num_classes);
  const double last = static_cast<double>(num_classes - 1);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double v =
        static_cast<double>(n_max) * std::pow(rho, -static_cast<double>(c) / last);
    counts[c] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(v)));
  }
  return counts;
}

std::vector<std::size_t> step_counts(std::size_t n_max, double rho, std::size_t num_classes) {
  check_profile_args(rho, num_classes, "step_counts");
  if (n_max == 0) throw InvalidArgument("step_counts: n_max must be positive");
  const std::size_t majors = (num_classes + 1) / 2;
  const auto minor = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(n_max) / rho)));
  std::vector<std::size_t> counts(num_classes, minor);
  std::fill_n(counts.begin(), majors, n_max);
  return counts;
}

std::vector<std::size_t> profile_counts(const ImbalanceProfile& profile, std::size_t num_classes) {
  return profile.kind == ImbalanceKind::kLongTailed
             ? longtail_counts(profile.n_max, profile.rho, num_classes)
             : step_counts(profile.n_max, profile.rho, num_classes);
}

Dataset subsample_to_profile(const Dataset& full, const std::vector<std::size_t>& counts,
                             Rng& rng) {
  const std::size_t classes = full.num_classes();
  if (counts.size() != classes) {
    throw InvalidArgument("subsample_to_profile: expected " + std::to_string(classes) +
                          " counts, got " + std::to_string(counts.size()));
  }
  std::vector<std::size_t> rows;
  for (std::size_t c = 0; c < classes; ++c) {
    const auto members = full.indices_of_class(static_cast<int>(c));
    if (counts[c] > members.size()) {
      throw InvalidArgument("subsample_to_profile: class " + std::to_string(c) + " has " +
                            std::to_string(members.size()) + " samples, requested " +
                            std::to_string(counts[c]));
    }
    if (counts[c] == 0) throw InvalidArgument("subsample_to_profile: counts must be positive");
    for (auto pick : sample_without_replacement(rng, members.size(), counts[c])) {
      rows.push_back(members[pick]);
    }
  }
  std::sort(rows.begin(), rows.end());
  Dataset picked = full.subset(rows);
  Dataset out = make_dataset(std::move(picked.features), std::move(picked.labels), classes);
  // Keep the original source ids through the re-indexing.
  for (auto& s : out.source_class) s = full.source_class[static_cast<std::size_t>(s)];
  return out;
}

Tensor gaussian_class_directions(std::size_t num_classes, std::size_t dim) {
  if (num_classes < 2) throw InvalidArgument("synth_gaussian: need at least 2 classes");
  if (dim == 0) throw InvalidArgument("synth_gaussian: dim must be positive");
  Tensor dirs({num_classes, dim});
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double i = static_cast<double>(c);
    if (dim == 1) {
      dirs.at(c, 0) = (c % 2 == 0) ? 1.0 : -1.0;
    } else if (dim == 2) {
      const double phi = 2.0 * std::numbers::pi * i / static_cast<double>(num_classes);
      dirs.at(c, 0) = std::cos(phi);
      dirs.at(c, 1) = std::sin(phi);
    } else {
      // Fibonacci lattice on the unit 2-sphere.
      const double y = 1.0 - 2.0 * (i + 0.5) / static_cast<double>(num_classes);
      const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
      const double phi = golden * i;
      dirs.at(c, 0) = r * std::cos(phi);
      dirs.at(c, 1) = y;
      dirs.at(c, 2) = r * std::sin(phi);
    }
  }
  return dirs;
}

std::pair<Dataset, Dataset> synth_gaussian(const GaussianTask& task, Rng& rng) {
  if (task.train_counts.size() != task.num_classes) {
    throw InvalidArgument("synth_gaussian: train_counts must have one entry per class");
  }
  if (!(task.class_separation > 0.0) || !(task.noise_sigma > 0.0)) {
    throw InvalidArgument("synth_gaussian: separation and noise must be positive");
  }
  if (task.test_per_class == 0) throw InvalidArgument("synth_gaussian: test_per_class must be positive");
  const Tensor dirs = gaussian_class_directions(task.num_classes, task.dim);

  auto draw = [&](const std::vector<std::size_t>& per_class) {
    const std::size_t n = std::accumulate(per_class.begin(), per_class.end(), std::size_t{0});
    Tensor x({n, task.dim});
    std::vector<int> y;
    y.reserve(n);
    std::size_t row = 0;
    for (std::size_t c = 0; c < task.num_classes; ++c) {
      for (std::size_t k = 0; k < per_class[c]; ++k, ++row) {
        for (std::size_t j = 0; j < task.dim; ++j) {
          x.at(row, j) = task.class_separation * dirs.at(c, j) + task.noise_sigma * normal(rng);
        }
        y.push_back(static_cast<int>(c));
      }
    }
    return make_dataset(std::move(x), std::move(y), task.num_classes);
  };
  Dataset train = draw(task.train_counts);
  Dataset test = draw(std::vector<std::size_t>(task.num_classes, task.test_per_class));
  test = align_classes(test, train);
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& data, std::size_t per_class, Rng& rng) {
  std::vector<std::size_t> keep;
  std::vector<std::size_t> held;
  for (std::size_t c = 0; c < data.num_classes(); ++c) {
    const auto members = data.indices_of_class(static_cast<int>(c));
    if (members.size() <= per_class) {
      keep.insert(keep.end(), members.begin(), members.end());
      continue;
    }
    auto picks = sample_without_replacement(rng, members.size(), per_class);
    std::vector<bool> chosen(members.size(), false);
    for (auto p : picks) chosen[p] = true;
    for (std::size_t i = 0; i < members.size(); ++i) {
      (chosen[i] ? held : keep).push_back(members[i]);
    }
  }
  std::sort(keep.begin(), keep.end());
  std::sort(held.begin(), held.end());
  return {data.subset(keep), data.subset(held)};
}

// --- IDX --------------------------------------------------------------------

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::kIo, "path", "cannot open IDX file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& field, const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    throw IdxError(IdxError::Kind::kTruncated, field,
                   path.string() + ": truncated while reading header field '" + field + "'");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const auto magic = read_be32(bytes, 0, "images magic", path);
  if (magic != kIdxImagesMagic) {
    throw IdxError(IdxError::Kind::kBadMagic, "images magic",
                   path.string() + ": bad images magic " + hex(magic) + ", expected " +
                       hex(kIdxImagesMagic));
  }
  const std::size_t count = read_be32(bytes, 4, "image count", path);
  IdxImages img;
  img.rows = read_be32(bytes, 8, "rows", path);
  img.cols = read_be32(bytes, 12, "cols", path);
  const std::size_t need = count * img.rows * img.cols;
  if (bytes.size() - 16 < need) {
    throw IdxError(IdxError::Kind::kTruncated, "pixels",
                   path.string() + ": truncated pixel data (" + std::to_string(bytes.size() - 16) +
                       " of " + std::to_string(need) + " bytes)");
  }
  img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(need));
  return img;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const auto magic = read_be32(bytes, 0, "labels magic", path);
  if (magic != kIdxLabelsMagic) {
    throw IdxError(IdxError::Kind::kBadMagic, "labels magic",
                   path.string() + ": bad labels magic " + hex(magic) + ", expected " +
                       hex(kIdxLabelsMagic));
  }
  const std::size_t count = read_be32(bytes, 4, "label count", path);
  if (bytes.size() - 8 < count) {
    throw IdxError(IdxError::Kind::kTruncated, "labels",
                   path.string() + ": truncated label data (" + std::to_string(bytes.size() - 8) +
                       " of " + std::to_string(count) + " bytes)");
  }
  return {bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError(IdxError::Kind::kIo, "path", "cannot write " + path.string());
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(images.count()));
  put_be32(out, static_cast<std::uint32_t>(images.rows));
  put_be32(out, static_cast<std::uint32_t>(images.cols));
  out.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError(IdxError::Kind::kIo, "path", "cannot write " + path.string());
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

Dataset read_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const IdxImages img = read_idx_images(images_path);
  const auto raw_labels = read_idx_labels(labels_path);
  if (img.count() != raw_labels.size()) {
    throw IdxError(IdxError::Kind::kCountMismatch, "label count",
                   "IDX image count " + std::to_string(img.count()) + " != label count " +
                       std::to_string(raw_labels.size()));
  }
  if (img.count() == 0 || img.rows * img.cols == 0) {
    throw IdxError(IdxError::Kind::kCountMismatch, "image count", "IDX file holds no images");
  }
  const std::size_t d = img.rows * img.cols;
  Tensor x({img.count(), d});
  for (std::size_t i = 0; i < img.pixels.size(); ++i) x[i] = img.pixels[i] / 255.0;
  int max_label = 0;
  std::vector<int> labels(raw_labels.begin(), raw_labels.end());
  for (int y : labels) max_label = std::max(max_label, y);
  return make_dataset(std::move(x), std::move(labels), static_cast<std::size_t>(max_label) + 1);
}

}  // namespace mfw

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

#ifndef MFWLAB_IMBALANCE_HPP
#define MFWLAB_IMBALANCE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mfwlab/error.hpp"
#include "mfwlab/rng.hpp"
#include "mfwlab/tensor.hpp"

namespace mfw {

/// Labelled feature matrix. Class c has counts[c] samples and classes are
/// indexed by non-increasing count; source_class[c] keeps the label the class
/// had before re-indexing.
struct Dataset {
  Tensor features;  // [N, d]
  std::vector<int> labels;
  std::vector<std::size_t> counts;
  std::vector<int> source_class;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  std::size_t num_classes() const noexcept { return counts.size(); }
  std::vector<std::size_t> indices_of_class(int c) const;
  Dataset subset(std::span<const std::size_t> rows) const;

  /// Throws InvalidArgument if counts/labels/features disagree.
  void validate() const;
};

/// Builds a dataset from raw labels 0..C-1 and re-indexes the classes by
/// decreasing size (ties keep the original order). Empty classes are an error.
Dataset make_dataset(Tensor features, std::vector<int> labels, std::size_t num_classes);

/// Relabels `data` so that class ids follow `reference.source_class`.
/// Every class of `reference` must occur in `data` and vice versa.
Dataset align_classes(const Dataset& data, const Dataset& reference);

/// 64-bit FNV-1a over shape, feature bytes and labels.
std::uint64_t fingerprint(const Dataset& data);

enum class ImbalanceKind { kLongTailed, kStep };

struct ImbalanceProfile {
  ImbalanceKind kind = ImbalanceKind::kLongTailed;
  double rho = 1.0;
  std::size_t n_max = 1;
};

/// N_c = round(n_max * rho^(-c/(C-1))) for c = 0..C-1, at least 1.
std::vector<std::size_t> longtail_counts(std::size_t n_max, double rho, std::size_t num_classes);
/// First ceil(C/2) classes get n_max, the rest max(1, round(n_max/rho)).
std::vector<std::size_t> step_counts(std::size_t n_max, double rho, std::size_t num_classes);
std::vector<std::size_t> profile_counts(const ImbalanceProfile& profile, std::size_t num_classes);

/// Uniform without-replacement subsample with counts[c] samples of class c,
/// then classes re-indexed by size. Samples keep their original relative order.
Dataset subsample_to_profile(const Dataset& full, const std::vector<std::size_t>& counts,
                             Rng& rng);

struct GaussianTask {
  std::size_t num_classes = 4;
  std::size_t dim = 16;
  double class_separation = 1.0;
  double noise_sigma = 1.0;
  std::vector<std::size_t> train_counts;
  std::size_t test_per_class = 500;
};

/// Class means sit at class_separation times unit directions spread evenly on
/// a 2-sphere in the first three coordinates (a circle when dim == 2); noise
/// is isotropic N(0, noise_sigma^2). Train rows are drawn class by class,
/// then the balanced test rows.
std::pair<Dataset, Dataset> synth_gaussian(const GaussianTask& task, Rng& rng);

/// Class mean directions used by synth_gaussian, [C, dim].
Tensor gaussian_class_directions(std::size_t num_classes, std::size_t dim);

/// Splits `per_class` random samples off every class that has more than
/// `per_class` samples. Returns (remaining, held_out).
std::pair<Dataset, Dataset> split_holdout(const Dataset& data, std::size_t per_class, Rng& rng);

// IDX files: big-endian int32 header fields, then unsigned bytes.

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

class IdxError : public FormatError {
 public:
  enum class Kind { kBadMagic, kCountMismatch, kTruncated, kIo };
  IdxError(Kind kind, std::string field, const std::string& what)
      : FormatError(what), kind_(kind), field_(std::move(field)) {}
  Kind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }

 private:
  Kind kind_;
  std::string field_;
};

struct IdxImages {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols
  std::size_t count() const noexcept { return rows * cols == 0 ? 0 : pixels.size() / (rows * cols); }
};

IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);
void write_idx_images(const std::filesystem::path& path, const IdxImages& images);
void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels);

/// Images flattened to [N, rows*cols] and scaled by 1/255; classes re-indexed by size.
Dataset read_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

}  // namespace mfw

#endif  // MFWLAB_IMBALANCE_HPP

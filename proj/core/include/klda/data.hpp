#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "klda/param.hpp"

namespace klda {

// Inputs with optional labels plus generation metadata.
struct Dataset {
  Matrix inputs;            // N x d_x
  std::vector<int> labels;  // empty when unlabeled
  int n_classes = 0;
  std::string domain;
  double angle_deg = 0.0;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
  bool labeled() const { return !labels.empty(); }
  void validate() const;
};

// Inputs only; the type carries no label storage at all, so training code
// that accepts it cannot see target labels.
struct UnlabeledDataset {
  Matrix inputs;
  std::string domain;
  double angle_deg = 0.0;

  int size() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
};

UnlabeledDataset strip_labels(const Dataset& d);

// Labeled source plus a target whose labels are reachable only through the
// evaluation accessor.
class DomainPair {
 public:
  DomainPair(Dataset source, Dataset target);

  const Dataset& source() const { return source_; }
  UnlabeledDataset target_inputs() const { return strip_labels(target_); }
  const Dataset& target_for_eval() const { return target_; }

 private:
  Dataset source_;
  Dataset target_;
};

// One minibatch of each domain, as consumed by the training objective.
struct LabeledBatch {
  Matrix inputs;
  std::vector<int> labels;
  int size() const { return static_cast<int>(inputs.rows()); }
};

struct UnlabeledBatch {
  Matrix inputs;
  int size() const { return static_cast<int>(inputs.rows()); }
};

struct BatchPair {
  LabeledBatch source;
  UnlabeledBatch target;
};

// C gaussian clusters on a circle of the given radius, all points rotated
// counter-clockwise by angle_deg after generation, so rotating the 0-degree
// dataset reproduces the rotated one draw for draw.
Dataset make_rotated_blobs(int n_per_class, int n_classes, double radius,
                           double spread, double angle_deg, std::uint64_t seed);

// IDX readers/writers (big-endian headers, unsigned-byte pixels scaled to
// [0,1]; image magic 0x00000803, label magic 0x00000801).
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const Dataset& d, const std::string& images_path,
               const std::string& labels_path);

// Counter-clockwise rotation of a square [0,1] grid about its center with
// bilinear interpolation; samples outside the frame read as 0.
Matrix rotate_image(const Matrix& img, double degrees);

// Applies rotate_image to every row of a flattened square-image dataset.
Dataset rotate_dataset_images(const Dataset& d, double degrees);

struct SplitResult {
  Dataset train;
  Dataset held;
};

// Seeded shuffle, then split at floor(0.8 N).
SplitResult split_80_20(const Dataset& d, std::uint64_t seed);

// Per-epoch pairing: fresh independent shuffles of both streams,
// floor(N_src/B) pairs, target indices cycling if the target is shorter;
// the ragged final source batch is dropped.
std::vector<BatchPair> minibatch_stream(const Dataset& train_src,
                                        const UnlabeledDataset& train_tgt,
                                        int batch_size,
                                        std::uint64_t epoch_seed);

// CSV export/import with header x0..x{d-1},label.
void write_dataset_csv(const Dataset& d, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

// Procedurally rendered 28x28 digit glyphs (10 balanced classes, values on
// the 1/255 grid). A desk-scale stand-in corpus for rotated-digit domain
// shift experiments when the real scans are not on disk.
Dataset make_digit_glyphs(int n, std::uint64_t seed);

// Splits a flattened-image corpus into one domain per angle: disjoint
// seeded subsamples of per_domain images, each rotated by its angle.
std::vector<Dataset> build_rotated_domains(const Dataset& base,
                                           const std::vector<double>& angles,
                                           int per_domain, std::uint64_t seed);

}  // namespace klda

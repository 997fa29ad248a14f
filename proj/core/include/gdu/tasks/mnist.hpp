// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdu/task.hpp"

namespace gdu::tasks {

// Images as N x P rows of [0,1] pixel intensities (P = 784 for 28x28).
// `permutation` is empty until permute_pixels is applied.
struct MnistSet {
  Matrix images;
  std::vector<int> labels;
  std::vector<std::size_t> permutation;
  std::size_t rows = 0, cols = 0;  // source image shape
};

// Big-endian IDX ingestion: magic 0x00000803 / 3 dims for images,
// 0x00000801 / 1 dim for labels. Pixels are scaled to [0,1] by /255.
// Bad magic, truncation and image/label count mismatch raise IoError with
// the byte offset.
MnistSet load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// Inverse of the loader for [0,1] images on the /255 grid (values are
// rounded to the nearest byte). Files are written atomically.
void write_mnist_idx(const std::string& images_path, const std::string& labels_path,
                     const MnistSet& set);

std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n);
std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm);

// out[j] = in[perm[j]] for every image; records perm in the result. Apply
// the same perm to train and test.
MnistSet permute_pixels(const MnistSet& set, const std::vector<std::size_t>& perm);
MnistSet permute_pixels(const MnistSet& set, Rng& rng);

// Procedural 28x28 digit glyphs (segment-rendered, jittered, noisy), used
// where no real IDX corpus is available. Pixels are on the /255 grid so the
// IDX round trip is exact.
MnistSet synthetic_digits(Rng& rng, std::size_t n);

// Pixel-by-pixel sequence classification over a fixed permuted image set:
// D_in = 1, T = pixel count, 10 classes, cross-entropy at the last step.
class PmnistTask final : public Task {
 public:
  PmnistTask(MnistSet train, MnistSet test, std::uint64_t shuffle_seed = 1);

  std::string name() const override { return "pmnist"; }
  std::size_t input_size() const override { return 1; }
  std::size_t output_size() const override { return 10; }
  LossKind loss_kind() const override { return LossKind::softmax_ce_final; }

  // Epoch-wise deterministic shuffles sliced by step index; rng is unused.
  Batch train_batch(Rng& rng, long long step, std::size_t batch_size) const override;
  EvalResult evaluate(const Model& model) const override;  // metric = accuracy
  Batch probe_batch(std::size_t rows) const override;

  std::size_t steps_per_epoch(std::size_t batch_size) const;
  const MnistSet& train_set() const { return train_; }
  const MnistSet& test_set() const { return test_; }

 private:
  Batch make_batch(const MnistSet& set, const std::vector<std::size_t>& rows) const;

  MnistSet train_;
  MnistSet test_;
  std::uint64_t shuffle_seed_;
};

}  // namespace gdu::tasks

// SPDX-License-Identifier: Apache-2.0

#include "gdu/tasks/mnist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gdu/errors.hpp"

namespace gdu::tasks {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

class IdxReader {
 public:
  IdxReader(const std::string& path) : is_(path, std::ios::binary), path_(path) {
    if (!is_) throw IoError("cannot open IDX file: " + path);
  }

  std::uint32_t u32be() {
    unsigned char buf[4];
    bytes(buf, 4);
    return (static_cast<std::uint32_t>(buf[0]) << 24) |
           (static_cast<std::uint32_t>(buf[1]) << 16) |
           (static_cast<std::uint32_t>(buf[2]) << 8) | static_cast<std::uint32_t>(buf[3]);
  }

  void bytes(unsigned char* p, std::size_t n) {
    is_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      throw IoError("truncated IDX file " + path_ + " at byte offset " +
                    std::to_string(offset_ + static_cast<std::size_t>(is_.gcount())));
    offset_ += n;
  }

  std::size_t offset() const { return offset_; }

 private:
  std::ifstream is_;
  std::string path_;
  std::size_t offset_ = 0;
};

void put_u32be(std::ostream& os, std::uint32_t v) {
  const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(buf), 4);
}

void atomic_write(const std::string& path, const std::string& payload) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + tmp);
    os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!os) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("rename failed: " + tmp + " -> " + path);
}

}  // namespace

MnistSet load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  MnistSet set;

  IdxReader ir(images_path);
  const std::uint32_t imagic = ir.u32be();
  if (imagic != kImagesMagic)
    throw IoError("bad IDX magic in " + images_path + " at byte offset 0 (got 0x" +
                  [&] {
                    char buf[16];
                    std::snprintf(buf, sizeof buf, "%08x", imagic);
                    return std::string(buf);
                  }() +
                  ", want 0x00000803)");
  const std::uint32_t n = ir.u32be();
  set.rows = ir.u32be();
  set.cols = ir.u32be();
  const std::size_t pixels = set.rows * set.cols;
  set.images = Matrix(n, pixels);
  std::vector<unsigned char> row(pixels);
  for (std::uint32_t i = 0; i < n; ++i) {
    ir.bytes(row.data(), pixels);
    double* dst = set.images.row(i);
    for (std::size_t j = 0; j < pixels; ++j)
      dst[j] = static_cast<double>(row[j]) / 255.0;
  }

  IdxReader lr(labels_path);
  const std::uint32_t lmagic = lr.u32be();
  if (lmagic != kLabelsMagic)
    throw IoError("bad IDX magic in " + labels_path + " at byte offset 0");
  const std::uint32_t ln = lr.u32be();
  if (ln != n)
    throw IoError("IDX count mismatch: " + images_path + " has " + std::to_string(n) +
                  " images but " + labels_path + " has " + std::to_string(ln) +
                  " labels (byte offset 4)");
  set.labels.resize(ln);
  for (std::uint32_t i = 0; i < ln; ++i) {
    unsigned char b;
    lr.bytes(&b, 1);
    set.labels[i] = static_cast<int>(b);
  }
  return set;
}

void write_mnist_idx(const std::string& images_path, const std::string& labels_path,
                     const MnistSet& set) {
  const std::size_t n = set.images.rows;
  const std::size_t pixels = set.images.cols;
  if (set.labels.size() != n)
    throw ConfigError("write_mnist_idx: image/label count mismatch");
  if (set.rows * set.cols != pixels)
    throw ConfigError("write_mnist_idx: rows*cols does not match pixel count");

  std::string ibuf;
  {
    std::ostringstream os;
    put_u32be(os, kImagesMagic);
    put_u32be(os, static_cast<std::uint32_t>(n));
    put_u32be(os, static_cast<std::uint32_t>(set.rows));
    put_u32be(os, static_cast<std::uint32_t>(set.cols));
    ibuf = os.str();
    ibuf.reserve(ibuf.size() + n * pixels);
    for (std::size_t i = 0; i < n; ++i) {
      const double* src = set.images.row(i);
      for (std::size_t j = 0; j < pixels; ++j) {
        const double clamped = std::clamp(src[j], 0.0, 1.0);
        ibuf.push_back(static_cast<char>(
            static_cast<unsigned char>(std::lround(clamped * 255.0))));
      }
    }
  }
  atomic_write(images_path, ibuf);

  std::ostringstream ls;
  put_u32be(ls, kLabelsMagic);
  put_u32be(ls, static_cast<std::uint32_t>(n));
  std::string lbuf = ls.str();
  for (int label : set.labels) lbuf.push_back(static_cast<char>(label));
  atomic_write(labels_path, lbuf);
}

std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.next_below(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

MnistSet permute_pixels(const MnistSet& set, const std::vector<std::size_t>& perm) {
  if (perm.size() != set.images.cols)
    throw ConfigError("permute_pixels: permutation length must equal pixel count");
  MnistSet out;
  out.labels = set.labels;
  out.rows = set.rows;
  out.cols = set.cols;
  out.permutation = perm;
  out.images = Matrix(set.images.rows, set.images.cols);
  for (std::size_t i = 0; i < set.images.rows; ++i) {
    const double* src = set.images.row(i);
    double* dst = out.images.row(i);
    for (std::size_t j = 0; j < perm.size(); ++j) dst[j] = src[perm[j]];
  }
  return out;
}

MnistSet permute_pixels(const MnistSet& set, Rng& rng) {
  return permute_pixels(set, random_permutation(rng, set.images.cols));
}

namespace {

// seven-segment layout inside a 12 x 20 box
struct Span2d {
  int x0, x1, y0, y1;
};
constexpr Span2d kSegments[7] = {
    {2, 9, 0, 2},     // A top
    {9, 11, 2, 9},    // B top-right
    {9, 11, 11, 18},  // C bottom-right
    {2, 9, 18, 20},   // D bottom
    {0, 2, 11, 18},   // E bottom-left
    {0, 2, 2, 9},     // F top-left
    {2, 9, 9, 11},    // G middle
};
constexpr std::uint8_t kDigitSegments[10] = {
    0b0111111,  // 0: ABCDEF
    0b0000110,  // 1: BC
    0b1011011,  // 2: ABDEG
    0b1001111,  // 3: ABCDG
    0b1100110,  // 4: BCFG
    0b1101101,  // 5: ACDFG
    0b1111101,  // 6: ACDEFG
    0b0000111,  // 7: ABC
    0b1111111,  // 8
    0b1101111,  // 9: ABCDFG
};

}  // namespace

MnistSet synthetic_digits(Rng& rng, std::size_t n) {
  constexpr std::size_t kSide = 28;
  MnistSet set;
  set.rows = set.cols = kSide;
  set.images = Matrix(n, kSide * kSide, 0.0);
  set.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int digit = static_cast<int>(rng.next_below(10));
    set.labels[i] = digit;
    const int ox = 8 + static_cast<int>(rng.next_below(9)) - 4;  // [4, 12]
    const int oy = 4 + static_cast<int>(rng.next_below(7)) - 3;  // [1, 7]
    const double ink = 0.65 + 0.35 * rng.next_double();
    double* img = set.images.row(i);
    const std::uint8_t segs = kDigitSegments[digit];
    for (int s = 0; s < 7; ++s) {
      if (!(segs & (1u << s))) continue;
      const Span2d& seg = kSegments[s];
      for (int y = seg.y0; y < seg.y1; ++y)
        for (int x = seg.x0; x < seg.x1; ++x)
          img[static_cast<std::size_t>(oy + y) * kSide +
              static_cast<std::size_t>(ox + x)] = ink;
    }
    for (std::size_t j = 0; j < kSide * kSide; ++j) {
      const double noisy = img[j] + 0.18 * rng.next_double();
      img[j] = std::lround(std::clamp(noisy, 0.0, 1.0) * 255.0) / 255.0;
    }
  }
  return set;
}

PmnistTask::PmnistTask(MnistSet train, MnistSet test, std::uint64_t shuffle_seed)
    : train_(std::move(train)), test_(std::move(test)), shuffle_seed_(shuffle_seed) {
  if (train_.images.cols != test_.images.cols)
    throw ConfigError("PmnistTask: train/test pixel counts differ");
  if (train_.images.rows == 0 || test_.images.rows == 0)
    throw ConfigError("PmnistTask: empty image set");
}

std::size_t PmnistTask::steps_per_epoch(std::size_t batch_size) const {
  return train_.images.rows / batch_size;
}

Batch PmnistTask::make_batch(const MnistSet& set,
                             const std::vector<std::size_t>& rows) const {
  const std::size_t t_len = set.images.cols;
  Batch batch;
  batch.loss = LossKind::softmax_ce_final;
  batch.inputs.assign(t_len, Matrix(rows.size(), 1, 0.0));
  batch.final_classes.resize(rows.size());
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const double* src = set.images.row(rows[b]);
    for (std::size_t t = 0; t < t_len; ++t) batch.inputs[t](b, 0) = src[t];
    batch.final_classes[b] = set.labels[rows[b]];
  }
  return batch;
}

Batch PmnistTask::train_batch(Rng&, long long step, std::size_t batch_size) const {
  const std::size_t per_epoch = steps_per_epoch(batch_size);
  if (per_epoch == 0) throw ConfigError("PmnistTask: batch_size exceeds train set");
  const std::size_t epoch = static_cast<std::size_t>(step) / per_epoch;
  const std::size_t slot = static_cast<std::size_t>(step) % per_epoch;

  Rng order_rng(shuffle_seed_ + 0x9E3779B97F4A7C15ULL * (epoch + 1));
  const std::vector<std::size_t> order =
      random_permutation(order_rng, train_.images.rows);
  std::vector<std::size_t> rows(order.begin() + slot * batch_size,
                                order.begin() + (slot + 1) * batch_size);
  return make_batch(train_, rows);
}

EvalResult PmnistTask::evaluate(const Model& model) const {
  const std::size_t chunk = 100;
  std::size_t correct = 0;
  for (std::size_t at = 0; at < test_.images.rows; at += chunk) {
    const std::size_t n = std::min(chunk, test_.images.rows - at);
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = at + i;
    const Batch batch = make_batch(test_, rows);
    const Matrix logits = forward_final_logits(model, batch.inputs);
    for (std::size_t row = 0; row < n; ++row) {
      const double* lrow = logits.row(row);
      const std::size_t argmax = std::max_element(lrow, lrow + 10) - lrow;
      if (static_cast<int>(argmax) == test_.labels[at + row]) ++correct;
    }
  }
  EvalResult ev;
  ev.metric = static_cast<double>(correct) / static_cast<double>(test_.images.rows);
  return ev;
}

Batch PmnistTask::probe_batch(std::size_t rows_wanted) const {
  const std::size_t n = std::min(rows_wanted, test_.images.rows);
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return make_batch(test_, rows);
}

}  // namespace gdu::tasks

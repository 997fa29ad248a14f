// SPDX-License-Identifier: Apache-2.0

#include "gdu/model.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "gdu/errors.hpp"

namespace gdu {

namespace {

constexpr char kMagic[8] = {'G', 'D', 'U', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  put_u64(os, bits);
}

void put_doubles(std::ostream& os, const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) put_f64(os, p[i]);
}

class Reader {
 public:
  Reader(std::istream& is, const std::string& path) : is_(is), path_(path) {}

  std::uint32_t u32() {
    unsigned char buf[4];
    read(buf, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char buf[8];
    read(buf, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
  }
  void doubles(double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] = f64();
  }
  void read(unsigned char* p, std::size_t n) {
    is_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is_)
      throw IoError("checkpoint truncated: " + path_ + " at byte offset " +
                    std::to_string(static_cast<long long>(offset_)));
    offset_ += n;
  }
  std::size_t offset() const { return offset_; }

 private:
  std::istream& is_;
  std::string path_;
  std::size_t offset_ = 0;
};

void put_matrix(std::ostream& os, const Matrix& m) {
  put_u64(os, m.rows);
  put_u64(os, m.cols);
  put_doubles(os, m.data.data(), m.data.size());
}

Matrix read_matrix(Reader& r) {
  Matrix m;
  m.rows = r.u64();
  m.cols = r.u64();
  m.data.resize(m.rows * m.cols);
  r.doubles(m.data.data(), m.data.size());
  return m;
}

void put_vector(std::ostream& os, const Vector& v) {
  put_u64(os, v.size());
  put_doubles(os, v.data(), v.size());
}

Vector read_vector(Reader& r) {
  Vector v(r.u64());
  r.doubles(v.data(), v.size());
  return v;
}

}  // namespace

Model init_model(const CellConfig& cfg, std::size_t output_size, Rng& rng) {
  cfg.validate();
  if (output_size < 1) throw ConfigError("init_model: output_size must be >= 1");
  Model m;
  m.config = cfg;
  m.output_size = output_size;
  m.cell = init_cell_params(cfg, rng);
  m.out.w = xavier_uniform(rng, cfg.state_size, output_size);
  m.out.b.assign(output_size, 0.0);
  return m;
}

std::size_t model_param_count(const CellConfig& cfg, std::size_t output_size) {
  return cell_param_count(cfg) + cfg.state_size * output_size + output_size;
}

void save_checkpoint(const std::string& path, const Model& model) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + tmp);
    os.write(kMagic, sizeof kMagic);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(model.config.kind));
    put_u64(os, model.config.input_size);
    put_u64(os, model.config.state_size);
    put_u64(os, model.output_size);
    put_u32(os, static_cast<std::uint32_t>(model.config.groups.sizes.size()));
    for (std::size_t i = 0; i < model.config.groups.sizes.size(); ++i) {
      put_u64(os, model.config.groups.sizes[i]);
      put_f64(os, model.config.groups.deltas[i]);
    }
    const auto& names = gate_names(model.config.kind);
    put_u32(os, static_cast<std::uint32_t>(model.cell.gates.size()));
    for (std::size_t g = 0; g < model.cell.gates.size(); ++g) {
      os.put(static_cast<char>(names[g].size()));
      os.write(names[g].data(), static_cast<std::streamsize>(names[g].size()));
      put_matrix(os, model.cell.gates[g].w);
      put_matrix(os, model.cell.gates[g].u);
      put_vector(os, model.cell.gates[g].b);
    }
    put_matrix(os, model.out.w);
    put_vector(os, model.out.b);
    if (!os) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("rename failed: " + tmp + " -> " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  Reader r(is, path);

  unsigned char magic[8];
  r.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("bad checkpoint magic in " + path + " at byte offset 0");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));

  Model m;
  m.config.kind = static_cast<CellKind>(r.u32());
  m.config.input_size = r.u64();
  m.config.state_size = r.u64();
  m.output_size = r.u64();
  const std::uint32_t ngroups = r.u32();
  for (std::uint32_t i = 0; i < ngroups; ++i) {
    m.config.groups.sizes.push_back(r.u64());
    m.config.groups.deltas.push_back(r.f64());
  }

  const std::uint32_t ngates = r.u32();
  if (ngates != gate_count(m.config.kind))
    throw IoError("checkpoint gate count mismatch in " + path);
  const auto& names = gate_names(m.config.kind);
  for (std::uint32_t g = 0; g < ngates; ++g) {
    unsigned char len;
    r.read(&len, 1);
    std::string name(len, '\0');
    r.read(reinterpret_cast<unsigned char*>(name.data()), len);
    if (name != names[g])
      throw IoError("checkpoint gate name mismatch in " + path + ": expected " +
                    names[g] + " got " + name);
    GateParams gp;
    gp.w = read_matrix(r);
    gp.u = read_matrix(r);
    gp.b = read_vector(r);
    m.cell.gates.push_back(std::move(gp));
  }
  m.out.w = read_matrix(r);
  m.out.b = read_vector(r);

  m.config.validate();
  return m;
}

}  // namespace gdu

// SPDX-License-Identifier: Apache-2.0

#include "gdu/tasks/dataset_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gdu/errors.hpp"
#include "json.hpp"

namespace gdu::tasks {

namespace {

constexpr char kMagic[8] = {'G', 'D', 'U', 'D', 'A', 'T', 'A', '1'};
constexpr std::uint32_t kVersion = 1;

enum class TaskId : std::uint32_t { adding = 0, temporal_order = 1, merg = 2 };

const char* task_name(TaskId id) {
  switch (id) {
    case TaskId::adding: return "adding";
    case TaskId::temporal_order: return "temporal-order";
    case TaskId::merg: return "merg";
  }
  return "?";
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}
void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}
void put_f64(std::string& buf, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  put_u64(buf, bits);
}

class Reader {
 public:
  Reader(const std::string& path) : is_(path, std::ios::binary), path_(path) {
    if (!is_) throw IoError("cannot open dataset cache: " + path);
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
  }
  void bytes(unsigned char* p, std::size_t n) {
    is_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      throw IoError("truncated dataset cache " + path_ + " at byte offset " +
                    std::to_string(offset_ + static_cast<std::size_t>(is_.gcount())));
    offset_ += n;
  }

 private:
  std::ifstream is_;
  std::string path_;
  std::size_t offset_ = 0;
};

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

std::string header_bytes(TaskId id, std::uint64_t seed, std::uint64_t param,
                         std::uint64_t count) {
  std::string buf(kMagic, sizeof kMagic);
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(id));
  put_u64(buf, seed);
  put_u64(buf, param);
  put_u64(buf, count);
  return buf;
}

void write_manifest(const std::string& path, TaskId id, std::uint64_t seed,
                    std::uint64_t param, std::uint64_t count) {
  nlohmann::json manifest;
  manifest["format"] = "GDUDATA1";
  manifest["version"] = kVersion;
  manifest["task"] = task_name(id);
  manifest["seed"] = seed;
  manifest[id == TaskId::merg ? "m" : "length"] = param;
  manifest["count"] = count;
  manifest["data_file"] = path;
  atomic_write(path + ".manifest.json", manifest.dump(2) + "\n");
}

DatasetHeader read_header_checked(Reader& r, const std::string& path, TaskId expect) {
  unsigned char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("bad dataset magic in " + path + " at byte offset 0");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError("unsupported dataset version " + std::to_string(version));
  const auto id = static_cast<TaskId>(r.u32());
  if (id != expect)
    throw IoError("dataset " + path + " holds task " + task_name(id) + ", expected " +
                  task_name(expect));
  DatasetHeader h;
  h.task = task_name(id);
  h.seed = r.u64();
  h.param = r.u64();
  h.count = r.u64();
  return h;
}

}  // namespace

void write_adding_cache(const std::string& path, const std::vector<AddingInstance>& set,
                        std::uint64_t seed, std::uint64_t length) {
  std::string buf = header_bytes(TaskId::adding, seed, length, set.size());
  for (const auto& inst : set) {
    if (inst.values.size() != length)
      throw ConfigError("write_adding_cache: instance length mismatch");
    for (double v : inst.values) put_f64(buf, v);
    put_u64(buf, inst.first_marker);
    put_u64(buf, inst.second_marker);
    put_f64(buf, inst.target);
  }
  atomic_write(path, buf);
  write_manifest(path, TaskId::adding, seed, length, set.size());
}

std::vector<AddingInstance> read_adding_cache(const std::string& path,
                                              DatasetHeader* header) {
  Reader r(path);
  const DatasetHeader h = read_header_checked(r, path, TaskId::adding);
  std::vector<AddingInstance> out(h.count);
  for (auto& inst : out) {
    inst.values.resize(h.param);
    for (auto& v : inst.values) v = r.f64();
    inst.first_marker = r.u64();
    inst.second_marker = r.u64();
    inst.target = r.f64();
  }
  if (header) *header = h;
  return out;
}

void write_temporal_order_cache(const std::string& path,
                                const std::vector<TemporalOrderInstance>& set,
                                std::uint64_t seed, std::uint64_t length) {
  std::string buf = header_bytes(TaskId::temporal_order, seed, length, set.size());
  for (const auto& inst : set) {
    if (inst.symbols.size() != length)
      throw ConfigError("write_temporal_order_cache: instance length mismatch");
    buf.append(reinterpret_cast<const char*>(inst.symbols.data()), inst.symbols.size());
    buf.push_back(static_cast<char>(inst.label));
  }
  atomic_write(path, buf);
  write_manifest(path, TaskId::temporal_order, seed, length, set.size());
}

std::vector<TemporalOrderInstance> read_temporal_order_cache(const std::string& path,
                                                             DatasetHeader* header) {
  Reader r(path);
  const DatasetHeader h = read_header_checked(r, path, TaskId::temporal_order);
  std::vector<TemporalOrderInstance> out(h.count);
  for (auto& inst : out) {
    inst.symbols.resize(h.param);
    r.bytes(inst.symbols.data(), inst.symbols.size());
    unsigned char label;
    r.bytes(&label, 1);
    inst.label = static_cast<int>(label);
  }
  if (header) *header = h;
  return out;
}

void write_merg_cache(const std::string& path, const std::vector<MergInstance>& set,
                      std::uint64_t seed, std::uint64_t m) {
  std::string buf = header_bytes(TaskId::merg, seed, m, set.size());
  for (const auto& inst : set) {
    put_u64(buf, inst.symbols.size());
    buf.append(reinterpret_cast<const char*>(inst.symbols.data()), inst.symbols.size());
  }
  atomic_write(path, buf);
  write_manifest(path, TaskId::merg, seed, m, set.size());
}

std::vector<MergInstance> read_merg_cache(const std::string& path,
                                          DatasetHeader* header) {
  Reader r(path);
  const DatasetHeader h = read_header_checked(r, path, TaskId::merg);
  std::vector<MergInstance> out;
  out.reserve(h.count);
  for (std::uint64_t i = 0; i < h.count; ++i) {
    std::vector<std::uint8_t> symbols(r.u64());
    r.bytes(symbols.data(), symbols.size());
    // legal-successor sets are derived data; recompute via the automaton
    out.push_back(make_merg_instance(std::move(symbols), h.param));
  }
  if (header) *header = h;
  return out;
}

DatasetHeader read_dataset_header(const std::string& path) {
  Reader r(path);
  unsigned char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("bad dataset magic in " + path + " at byte offset 0");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError("unsupported dataset version " + std::to_string(version));
  const auto id = static_cast<TaskId>(r.u32());
  DatasetHeader h;
  h.task = task_name(id);
  h.seed = r.u64();
  h.param = r.u64();
  h.count = r.u64();
  return h;
}

}  // namespace gdu::tasks

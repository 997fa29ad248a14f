// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gdu/tasks/adding.hpp"
#include "gdu/tasks/reber.hpp"
#include "gdu/tasks/temporal_order.hpp"

namespace gdu::tasks {

// Dataset cache container, little-endian binary:
//   magic "GDUDATA1" | u32 version | u32 task id (0 adding, 1 temporal-order,
//   2 merg) | u64 seed | u64 task param (L or m) | u64 instance count |
//   instances back to back:
//     adding:          f64 values[L], u64 first, u64 second, f64 target
//     temporal-order:  u8 symbols[L], u8 label
//     merg:            u64 length, u8 symbols[length]
// A JSON manifest (same path + ".manifest.json") records the header fields
// in readable form. Both files are written atomically.
struct DatasetHeader {
  std::string task;
  std::uint64_t seed = 0;
  std::uint64_t param = 0;  // sequence length or embed count
  std::uint64_t count = 0;
};

void write_adding_cache(const std::string& path, const std::vector<AddingInstance>& set,
                        std::uint64_t seed, std::uint64_t length);
std::vector<AddingInstance> read_adding_cache(const std::string& path,
                                              DatasetHeader* header = nullptr);

void write_temporal_order_cache(const std::string& path,
                                const std::vector<TemporalOrderInstance>& set,
                                std::uint64_t seed, std::uint64_t length);
std::vector<TemporalOrderInstance> read_temporal_order_cache(
    const std::string& path, DatasetHeader* header = nullptr);

void write_merg_cache(const std::string& path, const std::vector<MergInstance>& set,
                      std::uint64_t seed, std::uint64_t m);
std::vector<MergInstance> read_merg_cache(const std::string& path,
                                          DatasetHeader* header = nullptr);

// Manifest of any cache file without decoding the payload.
DatasetHeader read_dataset_header(const std::string& path);

}  // namespace gdu::tasks

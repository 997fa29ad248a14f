// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "gdu/optim.hpp"

namespace gdu::harness {

// CSV schema: step,train_loss,test_metric,sc,lc,wall_ms,seed
// sc/lc are -1 where the task does not define them. Doubles are printed
// with 17 significant digits so a parse-back is lossless.
void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& rows);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

// Same rows as line-delimited JSON records.
void write_metrics_jsonl(const std::string& path,
                         const std::vector<MetricsRecord>& rows);

// Box-whisker summary: median, quartiles (linear interpolation), extremes.
struct BoxStats {
  std::size_t n = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

BoxStats box_stats(std::vector<double> values);

}  // namespace gdu::harness

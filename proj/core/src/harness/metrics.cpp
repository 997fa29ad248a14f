// SPDX-License-Identifier: Apache-2.0

#include "gdu/harness/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gdu/errors.hpp"
#include "json.hpp"

namespace gdu::harness {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for write: " + path);
  os << "step,train_loss,test_metric,sc,lc,wall_ms,seed\n";
  for (const auto& r : rows) {
    os << r.step << ',' << fmt_double(r.train_loss) << ',' << fmt_double(r.test_metric)
       << ',' << fmt_double(r.sc) << ',' << fmt_double(r.lc) << ','
       << fmt_double(r.wall_ms) << ',' << r.seed << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open metrics csv: " + path);
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty metrics csv: " + path);
  if (line != "step,train_loss,test_metric,sc,lc,wall_ms,seed")
    throw IoError("unexpected metrics schema in " + path + ": " + line);
  std::vector<MetricsRecord> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    MetricsRecord r;
    auto next = [&]() -> std::string {
      if (!std::getline(ss, field, ','))
        throw IoError("short metrics row in " + path + ": " + line);
      return field;
    };
    r.step = std::stoll(next());
    r.train_loss = std::stod(next());
    r.test_metric = std::stod(next());
    r.sc = std::stod(next());
    r.lc = std::stod(next());
    r.wall_ms = std::stod(next());
    r.seed = std::stoull(next());
    rows.push_back(r);
  }
  return rows;
}

void write_metrics_jsonl(const std::string& path,
                         const std::vector<MetricsRecord>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for write: " + path);
  for (const auto& r : rows) {
    nlohmann::json j;
    j["step"] = r.step;
    j["train_loss"] = r.train_loss;
    j["test_metric"] = r.test_metric;
    j["sc"] = r.sc;
    j["lc"] = r.lc;
    j["wall_ms"] = r.wall_ms;
    j["seed"] = r.seed;
    os << j.dump() << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

BoxStats box_stats(std::vector<double> values) {
  BoxStats b;
  b.n = values.size();
  if (values.empty()) return b;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double p) {
    const double idx = p * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  b.min = values.front();
  b.max = values.back();
  b.median = quantile(0.5);
  b.q25 = quantile(0.25);
  b.q75 = quantile(0.75);
  return b;
}

}  // namespace gdu::harness

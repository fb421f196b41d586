#include "craftrl/metrics.hpp"

#include <stdexcept>

namespace craftrl {

MetricsWriter::MetricsWriter(const std::string& path, bool append) { open(path, append); }

void MetricsWriter::open(const std::string& path, bool append) {
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw std::runtime_error("metrics: cannot open " + path);
}

void MetricsWriter::write(const std::string& kind, int64_t step, nlohmann::ordered_json fields) {
  auto it = last_step_.find(kind);
  if (it != last_step_.end() && step < it->second)
    throw std::logic_error("metrics: non-monotone step for kind '" + kind + "'");
  last_step_[kind] = step;
  nlohmann::ordered_json rec;
  rec["kind"] = kind;
  rec["step"] = step;
  for (auto& [k, v] : fields.items()) rec[k] = std::move(v);
  out_ << rec.dump() << "\n";
}

std::vector<nlohmann::json> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("metrics: cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

std::vector<nlohmann::json> filter_kind(const std::vector<nlohmann::json>& records,
                                        const std::string& kind) {
  std::vector<nlohmann::json> out;
  for (const auto& r : records)
    if (r.value("kind", "") == kind) out.push_back(r);
  return out;
}

}  // namespace craftrl

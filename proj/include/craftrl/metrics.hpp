#pragma once
#include <fstream>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

namespace craftrl {

// Append-only line-delimited records: {"kind": ..., "step": ..., ...}.
// The step field must be monotone within each kind.
class MetricsWriter {
 public:
  MetricsWriter() = default;
  explicit MetricsWriter(const std::string& path, bool append = false);

  void open(const std::string& path, bool append = false);
  bool is_open() const { return out_.is_open(); }
  void write(const std::string& kind, int64_t step, nlohmann::ordered_json fields);
  void flush() { out_.flush(); }

  const std::map<std::string, int64_t>& last_steps() const { return last_step_; }
  void restore_last_steps(const std::map<std::string, int64_t>& m) { last_step_ = m; }

 private:
  std::ofstream out_;
  std::map<std::string, int64_t> last_step_;
};

std::vector<nlohmann::json> read_metrics(const std::string& path);
std::vector<nlohmann::json> filter_kind(const std::vector<nlohmann::json>& records,
                                        const std::string& kind);

}  // namespace craftrl

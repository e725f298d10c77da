#pragma once

#include <optional>
#include <string>
#include <vector>

#include "catfuse/cat.hpp"
#include "catfuse/config.hpp"
#include "catfuse/metrics.hpp"

namespace catfuse {

/// One run, one artifact: the resolved config, quality metrics when they
/// were computed, wall-clock timings, and loss traces as comma-separated
/// series. The emitted text parses back with parse_report_text, and its
/// config block parses with parse_config_text (the report-only sections
/// are skipped there).
struct RunReport {
  RunConfig config;
  std::optional<QualityReport> quality;
  double adapt_seconds = 0.0;
  double infer_seconds = 0.0;
  double total_seconds = 0.0;
  std::vector<AdaptStep> adapt_trace;
  std::vector<double> pretrain_trace;
};

std::string render_report(const RunReport& r);
RunReport parse_report_text(const std::string& text);

void write_report(const std::string& path, const RunReport& r);
RunReport read_report(const std::string& path);

} // namespace catfuse

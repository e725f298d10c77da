#include "catfuse/report.hpp"

#include <sstream>

#include "catfuse/tensor_io.hpp"

namespace catfuse {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string series(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

std::string series_int(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> to_ints(const std::vector<double>& v,
                         const std::string& what) {
  std::vector<int> out;
  out.reserve(v.size());
  for (double d : v) {
    const int i = int(d);
    if (double(i) != d)
      throw ValidationError("report: " + what + " must hold integers");
    out.push_back(i);
  }
  return out;
}

} // namespace

std::string render_report(const RunReport& r) {
  std::ostringstream out;
  out << "# fusion run report\n";
  out << render_config(r.config);
  if (r.quality) {
    const QualityReport& q = *r.quality;
    out << "\n[results]\n";
    out << "d_lambda = " << format_double(q.d_lambda) << "\n";
    out << "d_s = " << format_double(q.d_s) << "\n";
    out << "hqnr = " << format_double(q.hqnr) << "\n";
    if (q.sam) out << "sam = " << format_double(*q.sam) << "\n";
    if (q.ergas) out << "ergas = " << format_double(*q.ergas) << "\n";
    out << "block = " << q.block << "\n";
    if (!q.q_per_band.empty())
      out << "q_per_band = " << series(q.q_per_band) << "\n";
    out << "clamp_events = " << q.clamp_events << "\n";
  }
  out << "\n[timing]\n";
  out << "adapt_seconds = " << format_double(r.adapt_seconds) << "\n";
  out << "infer_seconds = " << format_double(r.infer_seconds) << "\n";
  out << "total_seconds = " << format_double(r.total_seconds) << "\n";
  if (!r.adapt_trace.empty() || !r.pretrain_trace.empty()) {
    out << "\n[trace]\n";
    if (!r.adapt_trace.empty()) {
      std::vector<int> ep, pa;
      std::vector<double> spe, spa, ori, tot;
      for (const AdaptStep& s : r.adapt_trace) {
        ep.push_back(s.epoch);
        pa.push_back(s.patch);
        spe.push_back(s.spe);
        spa.push_back(s.spa);
        ori.push_back(s.ori);
        tot.push_back(s.total);
      }
      out << "adapt_epoch = " << series_int(ep) << "\n";
      out << "adapt_patch = " << series_int(pa) << "\n";
      out << "adapt_spe = " << series(spe) << "\n";
      out << "adapt_spa = " << series(spa) << "\n";
      out << "adapt_ori = " << series(ori) << "\n";
      out << "adapt_total = " << series(tot) << "\n";
    }
    if (!r.pretrain_trace.empty())
      out << "pretrain_loss = " << series(r.pretrain_trace) << "\n";
  }
  return out.str();
}

RunReport parse_report_text(const std::string& text) {
  RunReport r;
  r.config = parse_config_text(text);  // skips the report-only sections

  // Scan the report-only sections with the same line discipline.
  std::optional<QualityReport> quality;
  std::vector<double> ep, pa, spe, spa, ori, tot;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      if (section == "results" && !quality) quality = QualityReport{};
      continue;
    }
    if (section != "results" && section != "timing" && section != "trace")
      continue;  // config keys were handled above
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("report: line " + std::to_string(line_no) +
                            " is not 'key = value': '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string where = section + "." + key;
    if (section == "results") {
      QualityReport& q = *quality;
      if (key == "d_lambda") q.d_lambda = parse_double_list(value, where)[0];
      else if (key == "d_s") q.d_s = parse_double_list(value, where)[0];
      else if (key == "hqnr") q.hqnr = parse_double_list(value, where)[0];
      else if (key == "sam") q.sam = parse_double_list(value, where)[0];
      else if (key == "ergas") q.ergas = parse_double_list(value, where)[0];
      else if (key == "block") q.block = int(parse_double_list(value, where)[0]);
      else if (key == "q_per_band") q.q_per_band = parse_double_list(value, where);
      else if (key == "clamp_events") q.clamp_events = int(parse_double_list(value, where)[0]);
      else
        throw ValidationError("report: unknown key '" + key +
                              "' in [results] at line " +
                              std::to_string(line_no));
    } else if (section == "timing") {
      if (key == "adapt_seconds") r.adapt_seconds = parse_double_list(value, where)[0];
      else if (key == "infer_seconds") r.infer_seconds = parse_double_list(value, where)[0];
      else if (key == "total_seconds") r.total_seconds = parse_double_list(value, where)[0];
      else
        throw ValidationError("report: unknown key '" + key +
                              "' in [timing] at line " +
                              std::to_string(line_no));
    } else {  // trace
      if (key == "adapt_epoch") ep = parse_double_list(value, where);
      else if (key == "adapt_patch") pa = parse_double_list(value, where);
      else if (key == "adapt_spe") spe = parse_double_list(value, where);
      else if (key == "adapt_spa") spa = parse_double_list(value, where);
      else if (key == "adapt_ori") ori = parse_double_list(value, where);
      else if (key == "adapt_total") tot = parse_double_list(value, where);
      else if (key == "pretrain_loss") r.pretrain_trace = parse_double_list(value, where);
      else
        throw ValidationError("report: unknown key '" + key +
                              "' in [trace] at line " +
                              std::to_string(line_no));
    }
  }
  r.quality = quality;

  if (!ep.empty() || !pa.empty() || !spe.empty() || !spa.empty() ||
      !ori.empty() || !tot.empty()) {
    const size_t n = tot.size();
    if (ep.size() != n || pa.size() != n || spe.size() != n ||
        spa.size() != n || ori.size() != n)
      throw ValidationError("report: adapt trace series lengths differ");
    const std::vector<int> epi = to_ints(ep, "adapt_epoch");
    const std::vector<int> pai = to_ints(pa, "adapt_patch");
    r.adapt_trace.resize(n);
    for (size_t i = 0; i < n; ++i)
      r.adapt_trace[i] =
          AdaptStep{epi[i], pai[i], spe[i], spa[i], ori[i], tot[i]};
  }
  return r;
}

void write_report(const std::string& path, const RunReport& r) {
  const std::string text = render_report(r);
  io::write_file_bytes(path,
                       std::vector<uint8_t>(text.begin(), text.end()));
}

RunReport read_report(const std::string& path) {
  const auto bytes = io::read_file_bytes(path);
  return parse_report_text(
      std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

} // namespace catfuse

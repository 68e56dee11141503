#include "abmc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace abmc {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string group_of(const std::string& dataset_id) {
  const std::size_t pos = dataset_id.rfind('_');
  return pos == std::string::npos ? dataset_id : dataset_id.substr(0, pos);
}

}  // namespace

ReportRow make_report_row(const std::string& dataset_id,
                          const std::string& model,
                          const EvidenceEstimate& est) {
  ReportRow row;
  row.dataset_id = dataset_id;
  row.model = model;
  row.method = est.method;
  row.log_ml = est.log_ml;
  row.mc_se = est.mc_std_error;
  row.draws = est.draws;
  row.skipped_draws = est.skipped_draws;
  return row;
}

void write_report_csv(const std::vector<ReportRow>& rows,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report file " + path);
  out << "dataset_id,model,method,log_ml,mc_se,S,skipped_draws\n";
  for (const ReportRow& r : rows)
    out << r.dataset_id << ',' << r.model << ',' << r.method << ','
        << fmt_double(r.log_ml) << ',' << fmt_double(r.mc_se) << ',' << r.draws
        << ',' << r.skipped_draws << '\n';
}

std::vector<ReportRow> read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read report file " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("report file " + path + " is empty");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 7)
      throw std::runtime_error("report file " + path + ": malformed row");
    ReportRow r;
    r.dataset_id = f[0];
    r.model = f[1];
    r.method = f[2];
    r.log_ml = std::stod(f[3]);
    r.mc_se = std::stod(f[4]);
    r.draws = static_cast<std::size_t>(std::stoull(f[5]));
    r.skipped_draws = static_cast<std::size_t>(std::stoull(f[6]));
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_scatter_csv(const std::vector<ScatterRow>& rows,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scatter file " + path);
  out << "dataset_id,model,method,oracle,oracle_log_ml,surrogate_log_ml\n";
  for (const ScatterRow& r : rows)
    out << r.dataset_id << ',' << r.model << ',' << r.method << ',' << r.oracle
        << ',' << fmt_double(r.oracle_log_ml) << ','
        << fmt_double(r.surrogate_log_ml) << '\n';
}

// ------------------------------------------------------------- aggregates

double rmse(const std::vector<double>& estimates,
            const std::vector<double>& truths) {
  if (estimates.empty() || estimates.size() != truths.size())
    throw std::invalid_argument("rmse: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double e = estimates[i] - truths[i];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

namespace {

// (dataset_id, model) -> log_ml for one method.
std::map<std::pair<std::string, std::string>, double> method_map(
    const std::vector<ReportRow>& rows, const std::string& method) {
  std::map<std::pair<std::string, std::string>, double> out;
  for (const ReportRow& r : rows)
    if (r.method == method) out[{r.dataset_id, r.model}] = r.log_ml;
  return out;
}

}  // namespace

double report_rmse(const std::vector<ReportRow>& rows,
                   const std::string& method, const std::string& truth_method) {
  const auto truths = method_map(rows, truth_method);
  std::vector<double> est, tru;
  for (const ReportRow& r : rows) {
    if (r.method != method) continue;
    const auto it = truths.find({r.dataset_id, r.model});
    if (it == truths.end())
      throw std::invalid_argument("report: missing pairing for dataset '" +
                                  r.dataset_id + "' (" + method + " vs " +
                                  truth_method + ")");
    est.push_back(r.log_ml);
    tru.push_back(it->second);
  }
  if (est.empty())
    throw std::invalid_argument("report: missing pairing, no '" + method +
                                "' rows against '" + truth_method + "'");
  return rmse(est, tru);
}

double delta_rmse(const std::vector<ReportRow>& rows,
                  const std::string& method_sc, const std::string& method_plain,
                  const std::string& truth_method) {
  const auto sc = method_map(rows, method_sc);
  const auto plain = method_map(rows, method_plain);
  const auto truths = method_map(rows, truth_method);
  if (sc.empty() || plain.empty() || truths.empty())
    throw std::invalid_argument(
        "report: missing pairing, need rows for all of '" + method_sc +
        "', '" + method_plain + "', '" + truth_method + "'");
  std::vector<double> sc_est, plain_est, tru;
  for (const auto& [key, truth] : truths) {
    const auto is = sc.find(key);
    const auto ip = plain.find(key);
    if (is == sc.end() || ip == plain.end())
      throw std::invalid_argument("report: missing pairing for dataset '" +
                                  key.first + "'");
    sc_est.push_back(is->second);
    plain_est.push_back(ip->second);
    tru.push_back(truth);
  }
  return rmse(sc_est, tru) - rmse(plain_est, tru);
}

std::vector<RmseCell> aggregate_rmse(const std::vector<ReportRow>& rows,
                                     const std::string& truth_method) {
  const auto truths = method_map(rows, truth_method);
  if (truths.empty())
    throw std::invalid_argument("report: missing pairing, no '" +
                                truth_method + "' rows");
  std::map<std::tuple<std::string, std::string, std::string>,
           std::pair<double, std::size_t>>
      cells;  // (group, model, method) -> (sum sq err, n)
  for (const ReportRow& r : rows) {
    if (r.method == truth_method) continue;
    const auto it = truths.find({r.dataset_id, r.model});
    if (it == truths.end())
      throw std::invalid_argument("report: missing pairing for dataset '" +
                                  r.dataset_id + "'");
    const double e = r.log_ml - it->second;
    auto& cell = cells[{group_of(r.dataset_id), r.model, r.method}];
    cell.first += e * e;
    cell.second += 1;
  }
  std::vector<RmseCell> out;
  out.reserve(cells.size());
  for (const auto& [key, acc] : cells) {
    RmseCell c;
    c.group = std::get<0>(key);
    c.model = std::get<1>(key);
    c.method = std::get<2>(key);
    c.count = acc.second;
    c.rmse = std::sqrt(acc.first / static_cast<double>(acc.second));
    out.push_back(std::move(c));
  }
  return out;
}

void write_aggregate_csv(const std::vector<RmseCell>& cells,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write aggregate file " + path);
  out << "group,model,method,rmse,count\n";
  for (const RmseCell& c : cells)
    out << c.group << ',' << c.model << ',' << c.method << ','
        << fmt_double(c.rmse) << ',' << c.count << '\n';
}

// --------------------------------------------------------------- manifest

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_manifest(const std::string& path, const std::string& config_text,
                    std::uint64_t seed, double wall_seconds) {
  nlohmann::json doc;
  doc["config_hash"] = fnv1a_hash(config_text);
  doc["seed"] = seed;
  doc["versions"] = {{"compiler", __VERSION__},
                     {"standard", static_cast<long>(__cplusplus)}};
  doc["wall_time_seconds"] = wall_seconds;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace abmc

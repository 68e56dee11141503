#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "abmc/evidence.hpp"

namespace abmc {

struct ReportRow {
  std::string dataset_id;
  std::string model;
  std::string method;  // npe, npe_sc, nlpe, nlpe_sc, analytic, quadrature, ...
  double log_ml = 0.0;
  double mc_se = 0.0;
  std::size_t draws = 0;
  std::size_t skipped_draws = 0;
};

ReportRow make_report_row(const std::string& dataset_id,
                          const std::string& model,
                          const EvidenceEstimate& est);

void write_report_csv(const std::vector<ReportRow>& rows,
                      const std::string& path);
std::vector<ReportRow> read_report_csv(const std::string& path);

struct ScatterRow {
  std::string dataset_id;
  std::string model;
  std::string method;  // surrogate method (y axis)
  std::string oracle;  // reference method (x axis)
  double oracle_log_ml = 0.0;
  double surrogate_log_ml = 0.0;
};

void write_scatter_csv(const std::vector<ScatterRow>& rows,
                       const std::string& path);

// ------------------------------------------------------------- aggregates

double rmse(const std::vector<double>& estimates,
            const std::vector<double>& truths);

// RMSE of one method against a truth method, paired by (dataset_id, model).
// Every method row must have a matching truth row.
double report_rmse(const std::vector<ReportRow>& rows,
                   const std::string& method, const std::string& truth_method);

// RMSE_sc - RMSE_plain against the truth method over shared datasets;
// a dataset missing any of the three rows is a "missing pairing" error.
double delta_rmse(const std::vector<ReportRow>& rows,
                  const std::string& method_sc, const std::string& method_plain,
                  const std::string& truth_method);

// Per-group aggregate (group = dataset_id up to the last '_').
struct RmseCell {
  std::string group;
  std::string model;
  std::string method;
  double rmse = 0.0;
  std::size_t count = 0;
};
std::vector<RmseCell> aggregate_rmse(const std::vector<ReportRow>& rows,
                                     const std::string& truth_method);
void write_aggregate_csv(const std::vector<RmseCell>& cells,
                         const std::string& path);

// --------------------------------------------------------------- manifest

std::uint64_t fnv1a_hash(const std::string& text);

void write_manifest(const std::string& path, const std::string& config_text,
                    std::uint64_t seed, double wall_seconds);

}  // namespace abmc

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dff/focusvol.hpp"

namespace dff {

struct MetricReport {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double bumpiness = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t valid_count = 0;
  std::size_t log_excluded = 0;  // valid pixels with a non-positive prediction
};

/// Sum by pairwise (tree) reduction; the result depends only on the order of
/// `values`, never on scheduling.
double pairwise_sum(const std::vector<double>& values);

/// Scores `pred` against `gt` over pixels valid in both maps whose ground
/// truth lies inside [focus_min, focus_max] and is positive.
///
/// Bumpiness is 100x the mean Frobenius norm of the Hessian of (pred - gt),
/// using 3x3 central differences on pixels whose whole stencil is valid.
/// Throws DataError when no pixel survives the mask.
MetricReport evaluate(const DepthMap& pred, const DepthMap& gt, double focus_min, double focus_max);

/// Fixed-width table, four significant digits, rows in input order.
std::string report_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

std::string format_report(const MetricReport& report);
std::string csv_header();
std::string csv_row(const std::string& name, const MetricReport& report);

}  // namespace dff

#include "dff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "dff/textio.hpp"

namespace dff {
namespace {

constexpr double kRelativeFloor = 1e-9;

// Extended precision keeps hand-checkable means (e.g. n copies of 0.1) exact.
long double pairwise(const double* v, std::size_t n) {
  if (n <= 8) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise(v, half) + pairwise(v + half, n - half);
}

double mean_of(const std::vector<double>& v) {
  return static_cast<double>(pairwise(v.data(), v.size()) / static_cast<long double>(v.size()));
}

std::string cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

double pairwise_sum(const std::vector<double>& values) {
  return static_cast<double>(pairwise(values.data(), values.size()));
}

MetricReport evaluate(const DepthMap& pred, const DepthMap& gt, double focus_min, double focus_max) {
  const int w = gt.depth_mm.width();
  const int h = gt.depth_mm.height();
  if (pred.depth_mm.width() != w || pred.depth_mm.height() != h) throw DataError("depth maps differ in size");
  if (!(focus_min <= focus_max)) throw DataError("invalid focus range");

  Mask valid(w, h, false);
  std::vector<double> abs_err, sq_err, log_sq, abs_rel, sq_rel, d1, d2, d3;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!pred.valid(x, y) || !gt.valid(x, y)) continue;
      const double g = gt.depth_mm.at(x, y);
      const double d = pred.depth_mm.at(x, y);
      if (!(g > 0.0) || g < focus_min || g > focus_max || !std::isfinite(d)) continue;
      valid.set(x, y, true);
      const double e = d - g;
      abs_err.push_back(std::abs(e));
      sq_err.push_back(e * e);
      if (d > 0.0) {
        const double le = std::log(d) - std::log(g);
        log_sq.push_back(le * le);
      }
      if (g > kRelativeFloor) {
        abs_rel.push_back(std::abs(e) / g);
        sq_rel.push_back(e * e / g);
      }
      const double ratio = d > 0.0 ? std::max(d / g, g / d) : std::numeric_limits<double>::infinity();
      d1.push_back(ratio < 1.25 ? 1.0 : 0.0);
      d2.push_back(ratio < 1.25 * 1.25 ? 1.0 : 0.0);
      d3.push_back(ratio < 1.25 * 1.25 * 1.25 ? 1.0 : 0.0);
    }
  }
  if (abs_err.empty()) throw DataError("no valid pixels to evaluate");

  MetricReport r;
  r.valid_count = abs_err.size();
  r.log_excluded = abs_err.size() - log_sq.size();
  r.mae = mean_of(abs_err);
  r.mse = mean_of(sq_err);
  r.rmse = std::sqrt(r.mse);
  r.rmse_log = log_sq.empty() ? 0.0 : std::sqrt(mean_of(log_sq));
  if (!abs_rel.empty()) {
    r.abs_rel = mean_of(abs_rel);
    r.sq_rel = mean_of(sq_rel);
  }
  r.delta1 = mean_of(d1);
  r.delta2 = mean_of(d2);
  r.delta3 = mean_of(d3);

  std::vector<double> bump;
  auto err = [&](int x, int y) {
    return static_cast<double>(pred.depth_mm.at(x, y)) - gt.depth_mm.at(x, y);
  };
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      bool full = true;
      for (int dy = -1; dy <= 1 && full; ++dy) {
        for (int dx = -1; dx <= 1 && full; ++dx) full = valid(x + dx, y + dy);
      }
      if (!full) continue;
      const double exx = err(x + 1, y) - 2.0 * err(x, y) + err(x - 1, y);
      const double eyy = err(x, y + 1) - 2.0 * err(x, y) + err(x, y - 1);
      const double exy = 0.25 * (err(x + 1, y + 1) - err(x + 1, y - 1) - err(x - 1, y + 1) + err(x - 1, y - 1));
      bump.push_back(std::sqrt(exx * exx + eyy * eyy + 2.0 * exy * exy));
    }
  }
  r.bumpiness = bump.empty() ? 0.0 : 100.0 * mean_of(bump);
  return r;
}

std::string report_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  if (rows.empty()) throw DataError("report table needs at least one row");
  std::size_t name_w = 6;
  for (const auto& [name, r] : rows) name_w = std::max(name_w, name.size());
  static const char* kHeads[] = {"MAE", "MSE", "RMSE", "RMSElog", "AbsRel", "SqRel",
                                 "Bump", "d1", "d2", "d3", "valid"};
  constexpr int kCol = 11;
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(name_w), "method");
  os << buf;
  for (const char* hd : kHeads) {
    std::snprintf(buf, sizeof buf, " %*s", kCol, hd);
    os << buf;
  }
  os << '\n';
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s", static_cast<int>(name_w), name.c_str());
    os << buf;
    for (double v : {r.mae, r.mse, r.rmse, r.rmse_log, r.abs_rel, r.sq_rel, r.bumpiness, r.delta1, r.delta2,
                     r.delta3}) {
      std::snprintf(buf, sizeof buf, " %*s", kCol, cell(v).c_str());
      os << buf;
    }
    std::snprintf(buf, sizeof buf, " %*zu", kCol, r.valid_count);
    os << buf << '\n';
  }
  return os.str();
}

std::string format_report(const MetricReport& r) {
  std::ostringstream os;
  os << "mae = " << format_real(r.mae) << '\n'
     << "mse = " << format_real(r.mse) << '\n'
     << "rmse = " << format_real(r.rmse) << '\n'
     << "rmse_log = " << format_real(r.rmse_log) << '\n'
     << "abs_rel = " << format_real(r.abs_rel) << '\n'
     << "sq_rel = " << format_real(r.sq_rel) << '\n'
     << "bumpiness = " << format_real(r.bumpiness) << '\n'
     << "delta1 = " << format_real(r.delta1) << '\n'
     << "delta2 = " << format_real(r.delta2) << '\n'
     << "delta3 = " << format_real(r.delta3) << '\n'
     << "valid_count = " << r.valid_count << '\n'
     << "log_excluded = " << r.log_excluded << '\n';
  return os.str();
}

std::string csv_header() {
  return "name,mae,mse,rmse,rmse_log,abs_rel,sq_rel,bumpiness,delta1,delta2,delta3,valid_count\n";
}

std::string csv_row(const std::string& name, const MetricReport& r) {
  std::ostringstream os;
  os << name;
  for (double v : {r.mae, r.mse, r.rmse, r.rmse_log, r.abs_rel, r.sq_rel, r.bumpiness, r.delta1, r.delta2,
                   r.delta3}) {
    os << ',' << format_real(v);
  }
  os << ',' << r.valid_count << '\n';
  return os.str();
}

}  // namespace dff

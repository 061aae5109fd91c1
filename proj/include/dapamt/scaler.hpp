#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace dapamt {

enum class ScalerKind {
  unit_interval,   // observed min -> 0, max -> 1; apply clamps to [0, 1]
  symmetric_unit,  // observed min -> -1, max -> +1; apply never clamps
};

inline const char* scaler_kind_name(ScalerKind k) {
  return k == ScalerKind::unit_interval ? "unit_interval" : "symmetric_unit";
}

inline ScalerKind scaler_kind_from(const std::string& s) {
  if (s == "unit_interval") return ScalerKind::unit_interval;
  if (s == "symmetric_unit") return ScalerKind::symmetric_unit;
  throw std::invalid_argument("unknown scaler kind: " + s);
}

/// Per-feature min-max scaler fitted on the training split only.
/// A degenerate feature (min == max) maps every input to 0.
class Scaler {
 public:
  Scaler() = default;
  Scaler(ScalerKind kind, std::vector<double> mins, std::vector<double> maxs)
      : kind_(kind), mins_(std::move(mins)), maxs_(std::move(maxs)) {
    if (mins_.size() != maxs_.size())
      throw std::invalid_argument("Scaler: min/max length mismatch");
  }

  static Scaler fit(ScalerKind kind, const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("Scaler::fit: empty input");
    const std::size_t width = rows.front().size();
    std::vector<double> mins(rows.front()), maxs(rows.front());
    for (const auto& row : rows) {
      if (row.size() != width)
        throw std::invalid_argument("Scaler::fit: ragged rows");
      for (std::size_t i = 0; i < width; ++i) {
        mins[i] = std::min(mins[i], row[i]);
        maxs[i] = std::max(maxs[i], row[i]);
      }
    }
    return Scaler(kind, std::move(mins), std::move(maxs));
  }

  static Scaler fit_values(ScalerKind kind, const std::vector<double>& values) {
    std::vector<std::vector<double>> rows;
    rows.reserve(values.size());
    for (double v : values) rows.push_back({v});
    return fit(kind, rows);
  }

  std::size_t width() const { return mins_.size(); }
  ScalerKind kind() const { return kind_; }
  const std::vector<double>& mins() const { return mins_; }
  const std::vector<double>& maxs() const { return maxs_; }

  double apply(double x, std::size_t feature = 0) const {
    const double lo = mins_.at(feature), hi = maxs_.at(feature);
    if (lo == hi) return 0.0;
    double u = (x - lo) / (hi - lo);
    if (kind_ == ScalerKind::unit_interval) return std::clamp(u, 0.0, 1.0);
    return 2.0 * u - 1.0;
  }

  double invert(double y, std::size_t feature = 0) const {
    const double lo = mins_.at(feature), hi = maxs_.at(feature);
    if (lo == hi) return lo;
    const double u = kind_ == ScalerKind::unit_interval ? y : (y + 1.0) / 2.0;
    return lo + u * (hi - lo);
  }

  std::vector<double> apply_row(const std::vector<double>& row) const {
    check_width(row);
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) out[i] = apply(row[i], i);
    return out;
  }

  std::vector<double> invert_row(const std::vector<double>& row) const {
    check_width(row);
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) out[i] = invert(row[i], i);
    return out;
  }

  bool operator==(const Scaler& o) const {
    return kind_ == o.kind_ && mins_ == o.mins_ && maxs_ == o.maxs_;
  }

 private:
  void check_width(const std::vector<double>& row) const {
    if (row.size() != mins_.size())
      throw std::invalid_argument("Scaler: row width mismatch");
  }

  ScalerKind kind_ = ScalerKind::unit_interval;
  std::vector<double> mins_, maxs_;
};

}  // namespace dapamt

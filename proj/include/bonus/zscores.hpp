#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "bonus/core.hpp"

namespace bonus {

struct ZScoreMatrix {
  Data values;  // one hypothesis per row
  std::vector<std::string> names;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  int dim() const { return static_cast<int>(values.cols()); }
};

namespace detail {

inline std::vector<std::string> split_plain(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Comma-separated z-scores with a header row of column names.
inline ZScoreMatrix parse_zscores(std::istream& in, const std::string& source = "input") {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), source + ": empty file (a header row is required)");
  ZScoreMatrix z;
  z.names = detail::split_plain(line);
  const std::size_t d = z.names.size();

  std::vector<double> cells;
  std::size_t rows = 0;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = detail::split_plain(line);
    require(fields.size() == d, source + " line " + std::to_string(lineno) + ": ragged row with " +
                                    std::to_string(fields.size()) + " fields, expected " + std::to_string(d));
    for (std::size_t j = 0; j < d; ++j) {
      const std::string& f = fields[j];
      double v = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      require(res.ec == std::errc() && res.ptr == f.data() + f.size() && !f.empty() && std::isfinite(v),
              source + " line " + std::to_string(lineno) + ", column " + std::to_string(j + 1) +
                  ": not a finite number '" + f + "'");
      cells.push_back(v);
    }
    ++rows;
  }
  z.values = Eigen::Map<Data>(cells.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d));
  return z;
}

inline ZScoreMatrix ingest_zscores(const std::string& path) {
  std::ifstream f(path);
  require(static_cast<bool>(f), "cannot open '" + path + "': file not found or unreadable");
  return parse_zscores(f, path);
}

/// Symmetric inverse square root of a winsorized second moment: entries are clipped to
/// [-winsor_c, winsor_c] before estimating, the unclipped data are transformed.
inline Eigen::MatrixXd whitening_matrix(const Data& z, double winsor_c = 3.0) {
  const auto d = z.cols();
  require(winsor_c > 0.0, "whiten: winsor_c must be > 0");
  require(z.rows() >= d + 1, "whiten: need at least d + 1 rows");
  const Data clipped = z.cwiseMax(-winsor_c).cwiseMin(winsor_c);
  const Eigen::MatrixXd sigma = (clipped.transpose() * clipped) / static_cast<double>(z.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  require(lo > 0.0 && hi / lo <= 1e12, "whiten: covariance estimate is singular (condition number > 1e12)");
  return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

inline ZScoreMatrix whiten(const ZScoreMatrix& z, double winsor_c = 3.0) {
  const Eigen::MatrixXd w = whitening_matrix(z.values, winsor_c);
  return {z.values * w, z.names};
}

}  // namespace bonus

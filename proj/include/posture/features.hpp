#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "posture/errors.hpp"
#include "posture/imu_sample.hpp"
#include "posture/orientation.hpp"

// Attribute ranking by principal component analysis: mean-centering,
// covariance, a cyclic-Jacobi eigendecomposition, explained variance, and a
// variance-weighted loading score per named sensor channel.
//
// The upstream ranking rule this reproduces was stated as "dividing its
// corresponding eigenvector value with the sum of all the eigenvectors",
// which is not well defined as written; the cleanest faithful reading — used
// here — scores each attribute by the sum over the leading components of
// explained_variance(component) * |loading(attribute, component)|. Scores are
// invariant under per-eigenvector sign flips, and exact ties fall back to
// attribute-name order.
//
// Covariance uses the n-1 (sample) denominator. Standardization (correlation
// PCA) is available behind a flag but defaults off: the channel set mixes
// units (g, dps, uT, dimensionless), and the reference analysis evidently ran
// on raw covariance.

namespace posture {

struct FeatureMatrix {
  std::vector<std::string> attribute_names;
  std::vector<std::vector<double>> rows;  // samples x attributes
};

using SquareMatrix = std::vector<std::vector<double>>;

namespace detail {
inline void require_rectangular(const FeatureMatrix& m) {
  for (const auto& row : m.rows)
    if (row.size() != m.attribute_names.size())
      fail(Errc::bad_field_count, "matrix row width does not match the attribute list");
}
}  // namespace detail

/// Subtracts each column's mean. Throws EmptyMatrix on zero rows.
inline FeatureMatrix mean_center(const FeatureMatrix& m) {
  if (m.rows.empty()) fail(Errc::empty_matrix, "cannot center an empty matrix");
  detail::require_rectangular(m);
  const std::size_t cols = m.attribute_names.size();
  std::vector<double> mean(cols, 0.0);
  for (const auto& row : m.rows)
    for (std::size_t j = 0; j < cols; ++j) mean[j] += row[j];
  for (double& v : mean) v /= static_cast<double>(m.rows.size());

  FeatureMatrix centered;
  centered.attribute_names = m.attribute_names;
  centered.rows = m.rows;
  for (auto& row : centered.rows)
    for (std::size_t j = 0; j < cols; ++j) row[j] -= mean[j];
  return centered;
}

/// Sample covariance (n-1 denominator); centers internally.
/// Throws TooFewRows below two rows.
inline SquareMatrix covariance(const FeatureMatrix& m) {
  if (m.rows.size() < 2) fail(Errc::too_few_rows, "covariance needs at least two rows");
  const FeatureMatrix c = mean_center(m);
  const std::size_t n = c.rows.size();
  const std::size_t cols = c.attribute_names.size();
  SquareMatrix cov(cols, std::vector<double>(cols, 0.0));
  for (std::size_t i = 0; i < cols; ++i) {
    for (std::size_t j = i; j < cols; ++j) {
      double sum = 0.0;
      for (std::size_t r = 0; r < n; ++r) sum += c.rows[r][i] * c.rows[r][j];
      cov[i][j] = cov[j][i] = sum / static_cast<double>(n - 1);
    }
  }
  return cov;
}

struct EigenResult {
  std::vector<double> values;  // descending
  SquareMatrix vectors;        // vectors[r][c] = component r of eigenvector c
};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations, which
/// keeps the eigenvector basis orthonormal by construction. Values/columns
/// are sorted by descending eigenvalue. Throws NotSymmetric when the input
/// strays beyond 1e-9 from symmetry and NoConvergence if the off-diagonal
/// mass has not vanished after the sweep cap (pathological input).
inline EigenResult eigen_decompose(const SquareMatrix& a_in) {
  const std::size_t n = a_in.size();
  if (n == 0) fail(Errc::empty_matrix, "cannot decompose an empty matrix");
  for (const auto& row : a_in)
    if (row.size() != n) fail(Errc::not_symmetric, "matrix is not square");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(a_in[i][j] - a_in[j][i]) > 1e-9)
        fail(Errc::not_symmetric, "matrix is not symmetric within 1e-9");

  SquareMatrix a = a_in;
  // Symmetrize exactly so rotations see one consistent value per pair.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a[i][j] = a[j][i] = 0.5 * (a[i][j] + a[j][i]);

  SquareMatrix v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  double scale = 0.0;
  for (const auto& row : a)
    for (double x : row) scale += x * x;
  scale = std::sqrt(scale);
  const double stop = scale > 0.0 ? scale * 1e-15 : 0.0;

  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (std::sqrt(2.0 * off) <= stop) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // Rotate rows/columns p and q of A (A <- J^T A J) and accumulate V.
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  if (sweep == kMaxSweeps)
    fail(Errc::no_convergence, "Jacobi sweep cap reached without convergence");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });

  EigenResult result;
  result.values.resize(n);
  result.vectors.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t c = 0; c < n; ++c) {
    result.values[c] = a[order[c]][order[c]];
    for (std::size_t r = 0; r < n; ++r) result.vectors[r][c] = v[r][order[c]];
  }
  return result;
}

/// Normalizes eigenvalues to variance fractions summing to 1. Values in
/// [-1e-9, 0) are treated as rounding noise and clamped to 0; anything more
/// negative is a caller error. Throws AllZeroVariance when the spectrum sums
/// to nothing.
inline std::vector<double> explained_variance(const std::vector<double>& eigenvalues) {
  std::vector<double> clamped = eigenvalues;
  for (double& v : clamped) {
    if (v < -1e-9) fail(Errc::out_of_range, "eigenvalue is negative beyond tolerance");
    if (v < 0.0) v = 0.0;
  }
  const double total = std::accumulate(clamped.begin(), clamped.end(), 0.0);
  if (total <= 1e-15) fail(Errc::all_zero_variance, "spectrum carries no variance");
  for (double& v : clamped) v /= total;
  return clamped;
}

struct PcaResult {
  std::vector<std::string> attribute_names;
  std::vector<double> eigenvalues;        // descending
  SquareMatrix eigenvectors;              // columns are component loadings
  std::vector<double> explained_variance;  // fractions, sum 1
};

/// Full pipeline: center (optionally standardize), covariance, decompose.
/// With standardize, each centered column is divided by its sample standard
/// deviation (zero-variance columns are left as zeros).
inline PcaResult run_pca(const FeatureMatrix& m, bool standardize = false) {
  if (m.rows.size() < 2) fail(Errc::too_few_rows, "PCA needs at least two rows");
  FeatureMatrix data = mean_center(m);
  if (standardize) {
    const std::size_t cols = data.attribute_names.size();
    const double n1 = static_cast<double>(data.rows.size() - 1);
    for (std::size_t j = 0; j < cols; ++j) {
      double ss = 0.0;
      for (const auto& row : data.rows) ss += row[j] * row[j];
      const double sd = std::sqrt(ss / n1);
      if (sd > 1e-15)
        for (auto& row : data.rows) row[j] /= sd;
    }
  }
  const SquareMatrix cov = covariance(data);
  EigenResult eig = eigen_decompose(cov);
  PcaResult result;
  result.attribute_names = m.attribute_names;
  result.eigenvalues = std::move(eig.values);
  result.eigenvectors = std::move(eig.vectors);
  result.explained_variance = explained_variance(result.eigenvalues);
  return result;
}

struct RankedAttribute {
  std::string name;
  double score = 0.0;
};

/// Scores each attribute over the top_k leading components (see file header)
/// and returns them in descending score order, name order on exact ties.
inline std::vector<RankedAttribute> rank_attributes(const PcaResult& result, std::size_t top_k) {
  if (top_k < 1 || top_k > result.eigenvalues.size())
    fail(Errc::out_of_range, "top_k must be in [1, component count]");
  std::vector<RankedAttribute> ranked;
  for (std::size_t r = 0; r < result.attribute_names.size(); ++r) {
    double score = 0.0;
    for (std::size_t c = 0; c < top_k; ++c)
      score += result.explained_variance[c] * std::abs(result.eigenvectors[r][c]);
    ranked.push_back({result.attribute_names[r], score});
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedAttribute& a, const RankedAttribute& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.name < b.name;
  });
  return ranked;
}

// --- named channel extraction from traces ---

// Canonical channel names with accepted aliases. dcm1..dcm3 are the sensor
// normal's components (the DCM column the pipeline consumes); x,y,z,w are the
// quaternion's vector and scalar parts.
inline const std::vector<std::pair<std::string, std::string>>& channel_aliases() {
  static const std::vector<std::pair<std::string, std::string>> aliases = {
      {"qx", "x"},   {"qy", "y"},   {"qz", "z"},   {"qw", "w"},
      {"mag1", "Mx"}, {"mag2", "My"}, {"mag3", "Mz"},
  };
  return aliases;
}

inline double channel_value(const ImuSample& s, const std::string& canonical) {
  if (canonical == "Ax") return s.ax;
  if (canonical == "Ay") return s.ay;
  if (canonical == "Az") return s.az;
  if (canonical == "Gx") return s.gx;
  if (canonical == "Gy") return s.gy;
  if (canonical == "Gz") return s.gz;
  if (canonical == "Mx") return s.mx;
  if (canonical == "My") return s.my;
  if (canonical == "Mz") return s.mz;
  if (canonical == "w") return s.quat.w;
  if (canonical == "x") return s.quat.x;
  if (canonical == "y") return s.quat.y;
  if (canonical == "z") return s.quat.z;
  if (canonical == "dcm1") return sensor_normal(s.quat).x;
  if (canonical == "dcm2") return sensor_normal(s.quat).y;
  if (canonical == "dcm3") return sensor_normal(s.quat).z;
  if (canonical == "flex") return s.flex_ohms;
  fail(Errc::bad_config, "unknown attribute '" + canonical + "'");
}

inline std::string resolve_channel(const std::string& name) {
  for (const auto& [alias, canonical] : channel_aliases())
    if (name == alias) return canonical;
  return name;
}

// The default channel set used for the ranking table.
inline std::vector<std::string> default_attributes() {
  return {"Ax", "Ay", "Az", "Gx", "Gy", "Gz", "x",    "y",
          "z",  "w",  "dcm1", "dcm2", "dcm3", "mag2", "mag3"};
}

/// Builds a FeatureMatrix by extracting the named channels from a trace.
/// Names may use the documented aliases; unknown names throw BadConfig.
inline FeatureMatrix matrix_from_trace(const Trace& trace, std::vector<std::string> names) {
  FeatureMatrix m;
  for (std::string& n : names) n = resolve_channel(n);
  m.attribute_names = names;
  // Validate names eagerly, even for an empty trace.
  if (!trace.empty())
    for (const ImuSample& s : trace) {
      std::vector<double> row;
      row.reserve(names.size());
      for (const std::string& n : names) row.push_back(channel_value(s, n));
      m.rows.push_back(std::move(row));
    }
  else
    for (const std::string& n : names) (void)channel_value(ImuSample{}, n);
  return m;
}

// --- presentation ---

inline void write_ranking_csv(std::ostream& out, const std::vector<RankedAttribute>& ranked) {
  out << "attribute,score\n";
  char buf[128];
  for (const auto& r : ranked) {
    std::snprintf(buf, sizeof buf, "%s,%.9g\n", r.name.c_str(), r.score);
    out << buf;
  }
}

/// Aligned-text eigenvector/ranking table: one row per attribute with its
/// loadings on the leading top_k components, then the ranked score list.
inline std::string format_pca_table(const PcaResult& result,
                                    const std::vector<RankedAttribute>& ranked,
                                    std::size_t top_k) {
  std::ostringstream out;
  char buf[64];
  out << "attribute";
  for (std::size_t c = 0; c < top_k; ++c) {
    char label[32];
    std::snprintf(label, sizeof label, "V%zu", c + 1);
    std::snprintf(buf, sizeof buf, "%13s", label);
    out << buf;
  }
  out << '\n';
  for (std::size_t r = 0; r < result.attribute_names.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%-9s", result.attribute_names[r].c_str());
    out << buf;
    for (std::size_t c = 0; c < top_k; ++c) {
      std::snprintf(buf, sizeof buf, "%13.6f", result.eigenvectors[r][c]);
      out << buf;
    }
    out << '\n';
  }
  out << "\nexplained variance:";
  for (std::size_t c = 0; c < top_k; ++c) {
    std::snprintf(buf, sizeof buf, " %.6f", result.explained_variance[c]);
    out << buf;
  }
  out << "\n\nranking (score = sum over leading components of variance-weighted |loading|):\n";
  int place = 1;
  for (const auto& r : ranked) {
    std::snprintf(buf, sizeof buf, "%3d. %-9s %.6f\n", place++, r.name.c_str(), r.score);
    out << buf;
  }
  return out.str();
}

}  // namespace posture

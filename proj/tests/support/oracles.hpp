#pragma once

// Slow reference implementations used to check the library.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <tuple>
#include <vector>

namespace oracle {

struct Bar {
  double birth, death;
  bool essential;
  friend bool operator<(const Bar& a, const Bar& b) {
    return std::tie(a.birth, a.death, a.essential) < std::tie(b.birth, b.death, b.essential);
  }
  friend bool operator==(const Bar& a, const Bar& b) = default;
};

/// Connected components of {i : x[i] <= alpha} under index adjacency, each
/// identified by its minimum value.
inline std::multiset<double> run_minima(const Eigen::VectorXd& x, double alpha) {
  std::multiset<double> mins;
  bool in_run = false;
  double m = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] <= alpha) {
      m = in_run ? std::min(m, x[i]) : x[i];
      in_run = true;
    } else if (in_run) {
      mins.insert(m);
      in_run = false;
    }
  }
  if (in_run) mins.insert(m);
  return mins;
}

inline int component_count(const Eigen::VectorXd& x, double alpha) {
  return static_cast<int>(run_minima(x, alpha).size());
}

/// Threshold sweep over the sorted sample values. A component keeps the
/// identity of its oldest minimum, so a minimum that stops being the minimum
/// of any run has died at that threshold. Requires distinct values.
inline std::vector<Bar> brute_force_barcode(const Eigen::VectorXd& x) {
  std::vector<double> levels(x.data(), x.data() + x.size());
  std::sort(levels.begin(), levels.end());
  std::map<double, double> alive;  // birth -> unused
  std::vector<Bar> bars;
  for (const double a : levels) {
    const auto mins = run_minima(x, a);
    for (auto it = alive.begin(); it != alive.end();) {
      if (!mins.count(it->first)) {
        bars.push_back({it->first, a, false});
        it = alive.erase(it);
      } else {
        ++it;
      }
    }
    for (const double m : mins) alive.emplace(m, 0.0);
  }
  for (const auto& [b, _] : alive) bars.push_back({b, levels.back(), true});
  std::sort(bars.begin(), bars.end());
  return bars;
}

template <typename Barcode>
std::vector<Bar> bars_of(const Barcode& bc) {
  std::vector<Bar> out;
  for (const auto& iv : bc.intervals) out.push_back({double(iv.birth), double(iv.death), iv.essential});
  std::sort(out.begin(), out.end());
  return out;
}

inline Eigen::VectorXd random_distinct(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = u(rng);
    std::vector<double> v(x.data(), x.data() + n);
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) == v.end()) return x;
  }
}

/// Inserts a-1 linearly interpolated points between consecutive samples.
inline Eigen::VectorXd upsample(const Eigen::VectorXd& x, int a) {
  if (x.size() < 2) return x;
  Eigen::VectorXd y((x.size() - 1) * a + 1);
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i)
    for (int j = 0; j < a; ++j) y[i * a + j] = x[i] + (x[i + 1] - x[i]) * double(j) / double(a);
  y[y.size() - 1] = x[x.size() - 1];
  return y;
}

struct NaiveMetrics {
  std::vector<std::vector<int>> confusion;
  std::vector<double> ppv, sensitivity;
  double weighted_accuracy = 0;
};

/// Counts every (true, predicted) cell by scanning all samples per cell.
inline NaiveMetrics naive_metrics(const std::vector<int>& pred, const std::vector<int>& truth, int classes) {
  NaiveMetrics m;
  m.confusion.assign(classes, std::vector<int>(classes, 0));
  for (int t = 0; t < classes; ++t)
    for (int p = 0; p < classes; ++p)
      for (std::size_t i = 0; i < pred.size(); ++i)
        if (truth[i] == t && pred[i] == p) ++m.confusion[t][p];
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    int tp = m.confusion[c][c], fn = 0, fp = 0;
    for (int k = 0; k < classes; ++k)
      if (k != c) fn += m.confusion[c][k], fp += m.confusion[k][c];
    m.ppv.push_back(tp + fp ? double(tp) / (tp + fp) : 0.0);
    m.sensitivity.push_back(tp + fn ? double(tp) / (tp + fn) : 0.0);
    if (tp + fn) {
      m.weighted_accuracy += m.sensitivity.back();
      ++present;
    }
  }
  if (present) m.weighted_accuracy /= present;
  return m;
}

/// Area under the ROC curve via the Mann-Whitney pair count (ties count half).
inline double auc(const std::vector<double>& negatives, const std::vector<double>& positives) {
  double wins = 0;
  for (const double p : positives)
    for (const double n : negatives) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (double(positives.size()) * double(negatives.size()));
}


/// Power of the DFT bins with 0 < f < fmax (DC excluded), by direct summation.
inline double low_band_power(const Eigen::VectorXd& x, double fs, double fmax) {
  const auto n = x.size();
  double total = 0;
  for (Eigen::Index k = 1; double(k) * fs / double(n) < fmax; ++k) {
    double re = 0, im = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ph = 2.0 * 3.14159265358979323846 * double(k) * double(i) / double(n);
      re += x[i] * std::cos(ph);
      im -= x[i] * std::sin(ph);
    }
    total += re * re + im * im;
  }
  return total;
}

}  // namespace oracle

#include "ecgtda/features.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "json.hpp"

namespace ecgtda::features {

namespace {

enum { P, Q, R, S, T };

// Index of the extremum of w over the open range (lo, hi), clipped to the window.
long extremum_in(const Eigen::Ref<const Eigen::VectorXd>& w, double lo, double hi, bool maximum) {
  const long first = std::max(0L, static_cast<long>(std::floor(lo)) + 1);
  const long last = std::min(static_cast<long>(w.size()) - 1, static_cast<long>(std::ceil(hi)) - 1);
  if (first > last) return -1;
  long best = first;
  for (long i = first + 1; i <= last; ++i)
    if (maximum ? w[i] > w[best] : w[i] < w[best]) best = i;
  return best;
}

}  // namespace

Eigen::VectorXd dft_features(const Eigen::Ref<const Eigen::VectorXd>& window, int bins) {
  const Eigen::Index n = window.size();
  Eigen::ArrayXd cos_t(n), sin_t(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    cos_t[t] = std::cos(2.0 * std::numbers::pi * double(t) / double(n));
    sin_t[t] = std::sin(2.0 * std::numbers::pi * double(t) / double(n));
  }
  Eigen::VectorXd out(bins);
  for (int k = 0; k < bins; ++k) {
    double re = 0, im = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const Eigen::Index idx = (k * t) % n;
      re += window[t] * cos_t[idx];
      im -= window[t] * sin_t[idx];
    }
    out[k] = std::hypot(re, im);
  }
  return out;
}

Fiducials fiducial_features(const Eigen::Ref<const Eigen::VectorXd>& w, double center_position,
                            double ms_per_sample, const FiducialRanges& rg) {
  Fiducials f;
  if (w.size() < 2 || !(w.maxCoeff() > w.minCoeff()) || !(ms_per_sample > 0)) {
    f.degenerate = true;
    return f;
  }
  const long r = std::clamp(std::lround(center_position), 0L, static_cast<long>(w.size()) - 1);
  const double ms = 1.0 / ms_per_sample;  // samples per ms
  const double rc = double(r);
  f.position[R] = r;
  f.position[Q] = extremum_in(w, rc - rg.q_ms * ms, rc, false);
  f.position[S] = extremum_in(w, rc, rc + rg.s_ms * ms, false);
  f.position[P] = extremum_in(w, rc - rg.p_from_ms * ms, rc - rg.p_to_ms * ms, true);
  f.position[T] = extremum_in(w, rc + rg.t_from_ms * ms, rc + rg.t_to_ms * ms, true);

  for (int i = 0; i < 5; ++i) {
    if (f.position[i] < 0) {
      f.missing = true;
      continue;
    }
    f.amplitude[i] = w[f.position[i]];
  }
  auto& b = f.block;
  for (int i = 0; i < 5; ++i) b[i] = f.amplitude[i];
  auto interval = [&](int from, int to) {
    if (f.position[from] < 0 || f.position[to] < 0) return 0.0;
    return double(f.position[to] - f.position[from]) * ms_per_sample;
  };
  b[5] = interval(P, R);
  b[6] = interval(Q, S);
  b[7] = interval(Q, T);
  b[8] = interval(S, T);
  int k = 9;
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j, ++k)
      b[k] = (f.position[i] < 0 || f.position[j] < 0) ? 0.0 : f.amplitude[i] - f.amplitude[j];
  return f;
}

Stats stat_features(const Eigen::Ref<const Eigen::VectorXd>& w) {
  Stats s;
  if (w.size() == 0) {
    s.degenerate = true;
    return s;
  }
  const double n = double(w.size());
  const double lo = w.minCoeff(), hi = w.maxCoeff(), mean = w.mean();
  const Eigen::ArrayXd c = w.array() - mean;
  const double m2 = c.square().sum() / n;
  const double m3 = c.cube().sum() / n;
  const double m4 = c.square().square().sum() / n;

  auto& b = s.block;
  b[0] = lo;
  b[1] = hi;
  b[2] = mean;
  b[3] = std::sqrt(m2);
  if (m2 > 0 && hi > lo) {
    b[4] = m4 / (m2 * m2) - 3.0;
    b[5] = m3 / std::pow(m2, 1.5);
    std::vector<double> hist(kHistogramBins, 0.0);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const auto bin = std::min<long>(kHistogramBins - 1, static_cast<long>((w[i] - lo) / (hi - lo) * kHistogramBins));
      hist[static_cast<std::size_t>(bin)] += 1.0;
    }
    double h = 0;
    for (const double cnt : hist)
      if (cnt > 0) h -= cnt / n * std::log(cnt / n);
    b[6] = h;
    int crossings = 0;
    for (Eigen::Index i = 1; i < w.size(); ++i) crossings += (c[i - 1] >= 0) != (c[i] >= 0);
    b[7] = crossings;
  } else {
    s.degenerate = true;
  }
  return s;
}

Eigen::VectorXd PcaModel::project(const Eigen::Ref<const Eigen::VectorXd>& window) const {
  if (window.size() != mean.size()) throw InvalidInput("pca_project: window length does not match model");
  return axes.transpose() * (window - mean);
}

PcaModel pca_fit(const Eigen::Ref<const Eigen::MatrixXd>& data, int components) {
  if (components < 1 || components > data.cols()) throw InvalidInput("pca_fit: bad component count");
  if (data.rows() <= components) throw InvalidInput("pca_fit: need more windows than components");
  if (!data.allFinite()) throw InvalidInput("pca_fit: non-finite data");
  PcaModel m;
  m.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - m.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / double(data.rows() - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericFailure("pca_fit: eigensolver failed");

  const Eigen::Index d = cov.rows();
  m.axes.resize(d, components);
  m.explained_variance.resize(components);
  for (int c = 0; c < components; ++c) {
    Eigen::VectorXd axis = es.eigenvectors().col(d - 1 - c);
    Eigen::Index arg;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis[arg] < 0) axis = -axis;
    m.axes.col(c) = axis;
    m.explained_variance[c] = std::max(0.0, es.eigenvalues()[d - 1 - c]);
  }
  m.total_variance = cov.trace();
  return m;
}

std::string PcaModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "ecgtda-pca";
  j["version"] = 1;
  j["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
  j["explained_variance"] =
      std::vector<double>(explained_variance.data(), explained_variance.data() + explained_variance.size());
  j["total_variance"] = total_variance;
  auto& ax = j["axes"] = nlohmann::ordered_json::array();
  for (Eigen::Index c = 0; c < axes.cols(); ++c) {
    const Eigen::VectorXd col = axes.col(c);
    ax.push_back(std::vector<double>(col.data(), col.data() + col.size()));
  }
  return j.dump();
}

PcaModel PcaModel::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "ecgtda-pca") throw ParseError("not a PCA model file");
  PcaModel m;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto var = j.at("explained_variance").get<std::vector<double>>();
  const auto axes = j.at("axes").get<std::vector<std::vector<double>>>();
  m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  m.explained_variance = Eigen::Map<const Eigen::VectorXd>(var.data(), static_cast<Eigen::Index>(var.size()));
  m.total_variance = j.at("total_variance").get<double>();
  m.axes.resize(m.mean.size(), static_cast<Eigen::Index>(axes.size()));
  for (std::size_t c = 0; c < axes.size(); ++c) {
    if (axes[c].size() != mean.size()) throw ParseError("PCA axis length mismatch");
    m.axes.col(static_cast<Eigen::Index>(c)) =
        Eigen::Map<const Eigen::VectorXd>(axes[c].data(), static_cast<Eigen::Index>(axes[c].size()));
  }
  return m;
}

FeatureLayout FeatureLayout::standard(int dft_bins, int pca_components) {
  FeatureLayout l;
  for (const auto& [name, size] : std::vector<std::pair<std::string, int>>{
           {"dft", dft_bins}, {"fiducial", kFiducialSize}, {"stats", kStatSize}, {"pca", pca_components}}) {
    l.blocks.push_back({name, l.total, size});
    l.total += size;
  }
  return l;
}

const LayoutBlock& FeatureLayout::block(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw InvalidInput("no feature block '" + name + "'");
}

std::vector<std::string> FeatureLayout::column_names() const {
  static const char* fid[kFiducialSize] = {"amp_p", "amp_q", "amp_r", "amp_s", "amp_t", "pr_ms", "qrs_ms",
                                           "qt_ms", "st_ms", "d_pq",  "d_pr",  "d_ps",  "d_pt",  "d_qr",
                                           "d_qs",  "d_qt",  "d_rs",  "d_rt",  "d_st"};
  static const char* stat[kStatSize] = {"min", "max", "mean", "std", "kurtosis", "skewness", "entropy", "crossings"};
  std::vector<std::string> out;
  for (const auto& b : blocks)
    for (int i = 0; i < b.size; ++i) {
      if (b.name == "fiducial") out.emplace_back(fid[i]);
      else if (b.name == "stats") out.emplace_back(stat[i]);
      else out.push_back(b.name + "_" + std::to_string(i));
    }
  return out;
}

FeatureVector extract(const seg::BeatWindow& w, const PcaModel& pca) {
  const auto layout = FeatureLayout::standard(kDftBins, pca.components());
  FeatureVector fv;
  fv.values.resize(layout.total);
  fv.values.segment(layout.block("dft").offset, kDftBins) = dft_features(w.samples);
  const auto fid = fiducial_features(w.samples, w.center_position, w.ms_per_sample());
  fv.values.segment(layout.block("fiducial").offset, kFiducialSize) = fid.block;
  const auto st = stat_features(w.samples);
  fv.values.segment(layout.block("stats").offset, kStatSize) = st.block;
  fv.values.segment(layout.block("pca").offset, pca.components()) = pca.project(w.samples);
  if (fid.degenerate) fv.flags.emplace_back("fiducial_degenerate");
  if (fid.missing) fv.flags.emplace_back("fiducial_missing");
  if (st.degenerate) fv.flags.emplace_back("stats_degenerate");
  if (!fv.values.allFinite()) {
    fv.values = fv.values.unaryExpr([](double v) { return std::isfinite(v) ? v : 0.0; });
    fv.flags.emplace_back("non_finite_zeroed");
  }
  return fv;
}

Eigen::MatrixXd feature_matrix(const std::vector<seg::BeatWindow>& windows, const PcaModel& pca) {
  const auto layout = FeatureLayout::standard(kDftBins, pca.components());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(windows.size()), layout.total);
  for (std::size_t i = 0; i < windows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = extract(windows[i], pca).values.transpose();
  return out;
}

Eigen::MatrixXd window_matrix(const std::vector<seg::BeatWindow>& windows) {
  if (windows.empty()) return {};
  const Eigen::Index len = windows.front().samples.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(windows.size()), len);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].samples.size() != len) throw InvalidInput("window_matrix: windows differ in length");
    out.row(static_cast<Eigen::Index>(i)) = windows[i].samples.transpose();
  }
  return out;
}

}  // namespace ecgtda::features

#include "ecgtda/autoencoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace ecgtda::ae {

namespace {

constexpr char kMagic[8] = {'E', 'C', 'G', 'T', 'D', 'A', 'A', 'E'};
constexpr std::uint32_t kFormatVersion = 1;

Eigen::ArrayXXd prelu(const Eigen::ArrayXXd& z, const Eigen::VectorXd& slope) {
  return (z > 0).select(z, z.colwise() * slope.array());
}

// Forward activations for backprop. acts[0] is the input; acts[l+1] is the
// (dropped-out) output of layer l. masks[l] is empty when no dropout applied.
struct Trace {
  std::vector<Eigen::MatrixXd> acts;
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::ArrayXXd> masks;
};

Trace run_forward(const AEModel& m, const Eigen::Ref<const Eigen::MatrixXd>& x, double rate, std::mt19937_64* rng) {
  Trace t;
  t.acts.push_back(x);
  const std::size_t nl = m.layers.size();
  for (std::size_t l = 0; l < nl; ++l) {
    const auto& layer = m.layers[l];
    Eigen::MatrixXd z = layer.weight * t.acts.back();
    z.colwise() += layer.bias;
    Eigen::MatrixXd a = layer.linear() ? z : Eigen::MatrixXd(prelu(z.array(), layer.slope).matrix());
    Eigen::ArrayXXd mask;
    if (!layer.linear() && rate > 0.0) {
      if (!rng) throw InvalidInput("dropout requires a random generator");
      std::bernoulli_distribution keep(1.0 - rate);
      mask.resize(a.rows(), a.cols());
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        for (Eigen::Index i = 0; i < mask.rows(); ++i) mask(i, j) = keep(*rng) ? 1.0 / (1.0 - rate) : 0.0;
      a.array() *= mask;
    }
    t.pre.push_back(std::move(z));
    t.masks.push_back(std::move(mask));
    t.acts.push_back(std::move(a));
  }
  return t;
}

template <typename F>
void for_each_tensor(const AEModel& m, F&& f) {
  for (const auto& l : m.layers) {
    f(l.weight.data(), l.weight.size());
    f(l.bias.data(), l.bias.size());
    f(l.slope.data(), l.slope.size());
  }
}

void write_block(std::ostream& out, const double* p, Eigen::Index n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_block(std::istream& in, double* p, Eigen::Index n) {
  if (n == 0) return;
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ParseError("model weights file is truncated");
}

AdadeltaSlot empty_slot(const DenseLayer& l) {
  AdadeltaSlot s;
  s.grad_sq_w = s.update_sq_w = Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols());
  s.grad_sq_b = s.update_sq_b = Eigen::VectorXd::Zero(l.bias.size());
  s.grad_sq_a = s.update_sq_a = Eigen::VectorXd::Zero(l.slope.size());
  return s;
}

template <typename P, typename G>
void adadelta_update(P& param, const G& grad, P& grad_sq, P& update_sq, const Adadelta& opt) {
  grad_sq.array() = opt.rho * grad_sq.array() + (1.0 - opt.rho) * grad.array().square();
  const auto update =
      (-(update_sq.array() + opt.epsilon).sqrt() / (grad_sq.array() + opt.epsilon).sqrt() * grad.array()).eval();
  update_sq.array() = opt.rho * update_sq.array() + (1.0 - opt.rho) * update.square();
  param.array() += opt.learning_rate * update;
}

}  // namespace

std::size_t AEModel::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&n](const double*, Eigen::Index k) { n += static_cast<std::size_t>(k); });
  return n;
}

double TrainConfig::dropout_rate(int e) const {
  if (dropout_anneal_epochs <= 0) return 0.0;
  return dropout_start * std::max(0.0, 1.0 - double(e) / double(dropout_anneal_epochs));
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidInput("epochs must be >= 1");
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (!(dropout_start >= 0 && dropout_start < 1)) throw InvalidInput("dropout_start must be in [0, 1)");
  if (!(learning_rate > 0)) throw InvalidInput("learning_rate must be positive");
}

AEModel ae_init(std::uint64_t seed, const std::vector<int>& sizes) {
  if (sizes.size() < 3 || sizes.size() % 2 == 0) throw InvalidInput("ae_init: need an odd number of layer sizes");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) throw InvalidInput("ae_init: layer sizes must be positive");
    if (sizes[i] != sizes[sizes.size() - 1 - i]) throw InvalidInput("ae_init: sizes must be symmetric");
  }
  AEModel m;
  m.sizes = sizes;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / in));
    DenseLayer layer;
    layer.weight.resize(out, in);
    for (Eigen::Index j = 0; j < in; ++j)
      for (Eigen::Index i = 0; i < out; ++i) layer.weight(i, j) = normal(rng);
    layer.bias = Eigen::VectorXd::Zero(out);
    if (l + 2 < sizes.size()) layer.slope = Eigen::VectorXd::Constant(out, 0.25);
    m.layers.push_back(std::move(layer));
  }
  for (const auto& l : m.layers) m.optimizer.slots.push_back(empty_slot(l));
  return m;
}

ForwardResult ae_forward(const AEModel& m, const Eigen::Ref<const Eigen::VectorXd>& window, double dropout_rate,
                         bool training_mode, std::mt19937_64* rng) {
  if (window.size() != m.input_size())
    throw InvalidInput("ae_forward: expected " + std::to_string(m.input_size()) + " samples, got " +
                       std::to_string(window.size()));
  const auto t = run_forward(m, window, training_mode ? dropout_rate : 0.0, rng);
  return {t.acts[m.layers.size() / 2].col(0), t.acts.back().col(0)};
}

double loss_and_gradient(const AEModel& m, const Eigen::Ref<const Eigen::MatrixXd>& batch, Gradients* grad,
                         double dropout_rate, std::mt19937_64* rng) {
  if (batch.rows() != m.input_size()) throw InvalidInput("loss_and_gradient: wrong input size");
  const auto t = run_forward(m, batch, dropout_rate, rng);
  const Eigen::MatrixXd diff = t.acts.back() - batch;
  const double count = double(diff.size());
  const double loss = diff.squaredNorm() / count;
  if (!grad) return loss;

  const std::size_t nl = m.layers.size();
  grad->weight.resize(nl);
  grad->bias.resize(nl);
  grad->slope.resize(nl);
  Eigen::MatrixXd delta = 2.0 / count * diff;  // dL/d(output of layer l)
  for (std::size_t l = nl; l-- > 0;) {
    const auto& layer = m.layers[l];
    if (!layer.linear()) {
      Eigen::ArrayXXd d = delta.array();
      if (t.masks[l].size()) d *= t.masks[l];
      const Eigen::ArrayXXd& z = t.pre[l].array();
      grad->slope[l] = (z > 0).select(Eigen::ArrayXXd::Zero(z.rows(), z.cols()), d * z).rowwise().sum().matrix();
      delta = (z > 0).select(d, d.colwise() * layer.slope.array()).matrix();
    } else {
      grad->slope[l].resize(0);
    }
    grad->weight[l].noalias() = delta * t.acts[l].transpose();
    grad->bias[l] = delta.rowwise().sum();
    if (l > 0) delta = layer.weight.transpose() * delta;
  }
  return loss;
}

double batch_loss(const AEModel& m, const Eigen::Ref<const Eigen::MatrixXd>& batch) {
  return loss_and_gradient(m, batch, nullptr);
}

void adadelta_step(AEModel& m, const Gradients& g) {
  auto& opt = m.optimizer;
  if (opt.slots.size() != m.layers.size()) {
    opt.slots.clear();
    for (const auto& l : m.layers) opt.slots.push_back(empty_slot(l));
  }
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& layer = m.layers[l];
    auto& s = opt.slots[l];
    adadelta_update(layer.weight, g.weight[l], s.grad_sq_w, s.update_sq_w, opt);
    adadelta_update(layer.bias, g.bias[l], s.grad_sq_b, s.update_sq_b, opt);
    if (!layer.linear()) adadelta_update(layer.slope, g.slope[l], s.grad_sq_a, s.update_sq_a, opt);
  }
}

TrainResult ae_train(AEModel& m, const Eigen::Ref<const Eigen::MatrixXd>& windows, const TrainConfig& cfg) {
  cfg.validate();
  if (windows.cols() < 1) throw InvalidInput("ae_train: need at least one window");
  if (windows.rows() != m.input_size()) throw InvalidInput("ae_train: window length does not match model");
  if (!windows.allFinite()) throw InvalidInput("ae_train: non-finite training data");
  m.optimizer.learning_rate = cfg.learning_rate;

  std::mt19937_64 rng(cfg.seed);
  const Eigen::Index n = windows.cols();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  TrainResult result;
  Gradients g;
  Eigen::MatrixXd batch;

  for (int e = 0; e < cfg.epochs; ++e) {
    const double rate = cfg.dropout_rate(e);
    if (cfg.shuffle)
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double total = 0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(cfg.batch_size, n - start);
      batch.resize(windows.rows(), b);
      for (Eigen::Index j = 0; j < b; ++j) batch.col(j) = windows.col(order[static_cast<std::size_t>(start + j)]);
      const double loss = loss_and_gradient(m, batch, &g, rate, &rng);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "ae_train: non-finite loss at epoch " << e << ", batch starting at " << start << " (dropout " << rate
            << ")";
        throw NumericFailure(msg.str());
      }
      total += loss * double(b);
      adadelta_step(m, g);
    }
    ++m.epoch;
    result.epoch_loss.push_back(total / double(n));
    result.dropout.push_back(rate);
  }
  return result;
}

Channels ae_channels(const AEModel& m, const Eigen::Ref<const Eigen::VectorXd>& window) {
  const auto f = ae_forward(m, window);
  Channels c;
  c.latent = f.latent;
  c.residual = window - f.reconstruction;
  c.score = c.residual.squaredNorm() / double(c.residual.size());
  return c;
}

double& parameter(AEModel& m, std::size_t index) {
  for (auto& l : m.layers) {
    for (Eigen::MatrixXd* t : {&l.weight}) {
      if (index < static_cast<std::size_t>(t->size())) return t->data()[index];
      index -= static_cast<std::size_t>(t->size());
    }
    for (Eigen::VectorXd* t : {&l.bias, &l.slope}) {
      if (index < static_cast<std::size_t>(t->size())) return t->data()[index];
      index -= static_cast<std::size_t>(t->size());
    }
  }
  throw InvalidInput("parameter index out of range");
}

Eigen::VectorXd flatten(const AEModel& m) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(m.parameter_count()));
  Eigen::Index pos = 0;
  for_each_tensor(m, [&](const double* p, Eigen::Index k) {
    out.segment(pos, k) = Eigen::Map<const Eigen::VectorXd>(p, k);
    pos += k;
  });
  return out;
}

Eigen::VectorXd flatten(const Gradients& g) {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < g.weight.size(); ++l) total += g.weight[l].size() + g.bias[l].size() + g.slope[l].size();
  Eigen::VectorXd out(total);
  Eigen::Index pos = 0;
  auto put = [&](const double* p, Eigen::Index k) {
    out.segment(pos, k) = Eigen::Map<const Eigen::VectorXd>(p, k);
    pos += k;
  };
  for (std::size_t l = 0; l < g.weight.size(); ++l) {
    put(g.weight[l].data(), g.weight[l].size());
    put(g.bias[l].data(), g.bias[l].size());
    put(g.slope[l].data(), g.slope[l].size());
  }
  return out;
}

void save(const AEModel& m, const std::filesystem::path& stem_in) {
  auto stem = stem_in;
  if (stem.extension() == ".json" || stem.extension() == ".bin") stem.replace_extension();
  auto json_path = stem, bin_path = stem;
  json_path += ".json";
  bin_path += ".bin";

  nlohmann::ordered_json j;
  j["format"] = "ecgtda-autoencoder";
  j["version"] = kFormatVersion;
  j["sizes"] = m.sizes;
  j["activation"] = "prelu";
  j["output_activation"] = "linear";
  j["epoch"] = m.epoch;
  j["seed"] = m.seed;
  j["optimizer"] = {{"name", "adadelta"},
                    {"rho", m.optimizer.rho},
                    {"epsilon", m.optimizer.epsilon},
                    {"learning_rate", m.optimizer.learning_rate}};
  j["parameter_count"] = m.parameter_count();
  j["weights_file"] = bin_path.filename().string();
  std::ofstream(json_path) << j.dump(2) << '\n';

  std::ofstream out(bin_path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + bin_path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t version = kFormatVersion;
  const std::uint64_t count = m.parameter_count();
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  for_each_tensor(m, [&out](const double* p, Eigen::Index k) { write_block(out, p, k); });
  for (const auto& s : m.optimizer.slots)
    for (const Eigen::MatrixXd* t : {&s.grad_sq_w, &s.update_sq_w}) write_block(out, t->data(), t->size());
  for (const auto& s : m.optimizer.slots)
    for (const Eigen::VectorXd* t : {&s.grad_sq_b, &s.update_sq_b, &s.grad_sq_a, &s.update_sq_a})
      write_block(out, t->data(), t->size());
}

AEModel load(const std::filesystem::path& path) {
  auto stem = path;
  if (stem.extension() == ".json" || stem.extension() == ".bin") stem.replace_extension();
  auto json_path = stem;
  json_path += ".json";
  std::ifstream jin(json_path);
  if (!jin) throw ParseError("cannot open model metadata " + json_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(jin);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad model metadata: ") + e.what());
  }
  if (j.value("format", "") != "ecgtda-autoencoder") throw ParseError("not an autoencoder model file");
  if (j.value("version", 0u) != kFormatVersion) throw ParseError("unsupported model version");

  AEModel m = ae_init(j.at("seed").get<std::uint64_t>(), j.at("sizes").get<std::vector<int>>());
  m.epoch = j.at("epoch").get<int>();
  const auto& opt = j.at("optimizer");
  m.optimizer.rho = opt.at("rho").get<double>();
  m.optimizer.epsilon = opt.at("epsilon").get<double>();
  m.optimizer.learning_rate = opt.at("learning_rate").get<double>();

  const auto bin_path = json_path.parent_path() / j.at("weights_file").get<std::string>();
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw ParseError("cannot open model weights " + bin_path.string());
  char magic[sizeof kMagic];
  std::uint32_t version = 0;
  std::uint64_t count = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || version != kFormatVersion)
    throw ParseError("bad model weights header");
  if (count != m.parameter_count()) throw ParseError("model weights do not match layer sizes");
  for (auto& l : m.layers) {
    read_block(in, l.weight.data(), l.weight.size());
    read_block(in, l.bias.data(), l.bias.size());
    read_block(in, l.slope.data(), l.slope.size());
  }
  for (auto& s : m.optimizer.slots)
    for (Eigen::MatrixXd* t : {&s.grad_sq_w, &s.update_sq_w}) read_block(in, t->data(), t->size());
  for (auto& s : m.optimizer.slots)
    for (Eigen::VectorXd* t : {&s.grad_sq_b, &s.update_sq_b, &s.grad_sq_a, &s.update_sq_a})
      read_block(in, t->data(), t->size());
  return m;
}

}  // namespace ecgtda::ae

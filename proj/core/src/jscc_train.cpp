#include "fpc/jscc_train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include <boost/random/normal_distribution.hpp>

#include "fpc/error.hpp"
#include "fpc/rng.hpp"

namespace fpc {

std::vector<double> draw_attribute_noise(std::size_t samples, double snr_db, std::uint64_t seed,
                                         std::uint64_t stream) {
  std::vector<double> out(2 * samples, 0.0);
  const double var = noise_variance(snr_db);
  if (var == 0.0) return out;
  auto rng = make_rng(seed, StreamTag::attribute_noise, stream);
  boost::random::normal_distribution<double> noise(0.0, std::sqrt(var));
  for (double& v : out) v = noise(rng);
  return out;
}

namespace {

// Forward caches --------------------------------------------------------------

struct ResidualCache {
  Matrix x, h1;
};

struct ModCache {
  Matrix x, cat, h, gate, shift;
};

struct NetCache {
  ResidualCache r1;
  ModCache mod;
  ResidualCache r2;
};

Matrix residual_fwd(const ResidualFc& r, const Matrix& x, ResidualCache& c) {
  c.x = x;
  c.h1 = fc_forward(r.fc1, x);
  auto y = fc_forward(r.fc2, c.h1);
  const auto s = r.has_skip ? fc_forward(r.skip, x) : x;
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += s.data()[i];
  return y;
}

Matrix mod_fwd(const SnrModulation& m, const Matrix& x, const Matrix& snr, ModCache& c) {
  c.x = x;
  c.cat = hconcat(x, snr);
  c.h = fc_forward(m.shared, c.cat);
  c.gate = fc_forward(m.gate, c.h);
  c.shift = fc_forward(m.shift, c.h);
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < y.size(); ++i)
    y.data()[i] = x.data()[i] * (c.gate.data()[i] + c.shift.data()[i]);
  return y;
}

Matrix net_fwd(const JsccNet& net, const Matrix& x, const Matrix& snr, NetCache& c) {
  const auto b1 = residual_fwd(net.res1, x, c.r1);
  if (net.res2_on_b1) return residual_fwd(net.res2, b1, c.r2);
  return residual_fwd(net.res2, mod_fwd(net.mod, b1, snr, c.mod), c.r2);
}

// Backward ----------------------------------------------------------------------

void accumulate(LinearLayer& g, const LinearGrads& lg) {
  for (std::size_t i = 0; i < lg.grad_weight.size(); ++i) g.weight.data()[i] += lg.grad_weight.data()[i];
  for (std::size_t i = 0; i < lg.grad_bias.size(); ++i) g.bias[i] += lg.grad_bias[i];
}

Matrix residual_bwd(const ResidualFc& r, const ResidualCache& c, const Matrix& g, ResidualFc& grads) {
  const auto g2 = fc_backward(r.fc2, c.h1, g);
  accumulate(grads.fc2, g2);
  const auto g1 = fc_backward(r.fc1, c.x, g2.grad_input);
  accumulate(grads.fc1, g1);
  Matrix gx = g1.grad_input;
  if (r.has_skip) {
    const auto gs = fc_backward(r.skip, c.x, g);
    accumulate(grads.skip, gs);
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += gs.grad_input.data()[i];
  } else {
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += g.data()[i];
  }
  return gx;
}

Matrix mod_bwd(const SnrModulation& m, const ModCache& c, const Matrix& g, SnrModulation& grads) {
  Matrix gx(c.x.rows(), c.x.cols());
  Matrix gm(c.x.rows(), c.x.cols());
  for (std::size_t i = 0; i < g.size(); ++i) {
    gx.data()[i] = g.data()[i] * (c.gate.data()[i] + c.shift.data()[i]);
    gm.data()[i] = g.data()[i] * c.x.data()[i];
  }
  const auto gg = fc_backward(m.gate, c.h, gm);
  accumulate(grads.gate, gg);
  const auto gs = fc_backward(m.shift, c.h, gm);
  accumulate(grads.shift, gs);
  Matrix gh = gg.grad_input;
  for (std::size_t i = 0; i < gh.size(); ++i) gh.data()[i] += gs.grad_input.data()[i];
  const auto gc = fc_backward(m.shared, c.cat, gh);
  accumulate(grads.shared, gc);
  const std::size_t w = c.x.cols();
  for (std::size_t r = 0; r < gx.rows(); ++r)
    for (std::size_t k = 0; k < w; ++k) gx(r, k) += gc.grad_input(r, k);
  return gx;
}

Matrix net_bwd(const JsccNet& net, const NetCache& c, const Matrix& g, JsccNet& grads) {
  auto gb = residual_bwd(net.res2, c.r2, g, grads.res2);
  if (!net.res2_on_b1) gb = mod_bwd(net.mod, c.mod, gb, grads.mod);
  return residual_bwd(net.res1, c.r1, gb, grads.res1);
}

void zero(LinearLayer& l) {
  std::fill(l.weight.data().begin(), l.weight.data().end(), 0.0);
  std::fill(l.bias.begin(), l.bias.end(), 0.0);
}

void clear(JsccModel& z) {
  for (auto* net : {&z.encoder, &z.decoder}) {
    for (auto* l : {&net->res1.fc1, &net->res1.fc2, &net->res1.skip, &net->mod.shared, &net->mod.gate,
                    &net->mod.shift, &net->res2.fc1, &net->res2.fc2, &net->res2.skip})
      zero(*l);
  }
}

}  // namespace

JsccModel zeros_like(const JsccModel& model) {
  JsccModel z = model;
  clear(z);
  return z;
}

double jscc_loss(const Matrix& attrs, const JsccModel& model, double snr_db, const std::vector<double>& noise,
                 JsccModel* grads) {
  const auto& cfg = model.config;
  if (attrs.cols() != cfg.channels) throw ShapeError("jscc_loss: channel mismatch");
  if (attrs.rows() == 0) throw EmptyInputError("jscc_loss: empty frame");

  NetCache enc_c, dec_c;
  const auto features = net_fwd(model.encoder, attrs, snr_block(attrs.rows(), cfg, snr_db), enc_c);
  const auto& f = features.data();
  const std::size_t n = f.size();
  const std::size_t half = (n + 1) / 2;
  if (noise.size() != 2 * half) throw ShapeError("jscc_loss: noise length does not match the signal");

  double energy = 0.0;
  for (double v : f) energy += v * v;
  if (!(energy > 0.0)) throw DegenerateInputError("jscc_loss: encoder output has zero power");
  const double scale = std::sqrt(energy / static_cast<double>(half));

  // normalize -> add noise -> denormalize, written out: y = f + noise * scale
  Matrix received(features.rows(), features.cols());
  for (std::size_t j = 0; j < n; ++j) received.data()[j] = f[j] + noise[j] * scale;

  const auto decoded = net_fwd(model.decoder, received, snr_block(received.rows(), cfg, snr_db), dec_c);
  const double loss = mse_loss(attrs, decoded);
  if (!grads) return loss;

  Matrix g(decoded.rows(), decoded.cols());
  const double k = 2.0 / static_cast<double>(decoded.size());
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = k * (decoded.data()[i] - attrs.data()[i]);

  const auto g_received = net_bwd(model.decoder, dec_c, g, grads->decoder);

  // d scale / d f_j = f_j / (half * scale); the noise is a constant.
  double dot = 0.0;
  for (std::size_t j = 0; j < n; ++j) dot += g_received.data()[j] * noise[j];
  Matrix g_features(features.rows(), features.cols());
  const double c = dot / (static_cast<double>(half) * scale);
  for (std::size_t j = 0; j < n; ++j) g_features.data()[j] = g_received.data()[j] + c * f[j];

  net_bwd(model.encoder, enc_c, g_features, grads->encoder);
  return loss;
}

// Optimizer -------------------------------------------------------------------

AdamW::AdamW(std::vector<std::vector<double>*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr > 0.0) || cfg_.weight_decay < 0.0 || cfg_.eps <= 0.0 || cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 ||
      cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0)
    throw ConfigError("invalid optimizer settings");
  for (auto* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void AdamW::step(const std::vector<const std::vector<double>*>& grads) {
  if (grads.size() != params_.size()) throw ShapeError("AdamW: gradient list does not match parameters");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    const auto& g = *grads[k];
    if (g.size() != p.size()) throw ShapeError("AdamW: gradient size mismatch");
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p[i]);
    }
  }
}

// Training --------------------------------------------------------------------

namespace {

std::vector<const std::vector<double>*> grad_list(const JsccModel& g) {
  auto a = g.encoder.parameters();
  auto b = g.decoder.parameters();
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

double jscc_eval_mse(const std::vector<Matrix>& frames, const JsccModel& model, double snr_db,
                     std::uint64_t seed) {
  if (frames.empty()) throw EmptyInputError("jscc_eval_mse: no frames");
  double acc = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto r = jscc_transmit(frames[i], model, ChannelConfig{snr_db, seed}, i);
    acc += mse_loss(frames[i], r.decoded);
  }
  return acc / static_cast<double>(frames.size());
}

TrainResult train_phase_two(const std::vector<Matrix>& dataset, const JsccModel& init, const TrainConfig& cfg,
                            const std::vector<Matrix>& held_out,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  if (dataset.empty()) throw EmptyInputError("train_phase_two: empty dataset");
  if (cfg.epochs < 1) throw ConfigError("train_phase_two: epochs must be >= 1");
  // Both ends at the noiseless sentinel trains without channel noise.
  const bool noiseless = cfg.snr_low_db == kNoiselessSnr && cfg.snr_high_db == kNoiselessSnr;
  if (!noiseless &&
      (!(cfg.snr_low_db <= cfg.snr_high_db) || !std::isfinite(cfg.snr_low_db) || !std::isfinite(cfg.snr_high_db)))
    throw ConfigError("train_phase_two: invalid SNR range");

  TrainResult result;
  result.model = init;
  auto& model = result.model;
  auto params = model.encoder.parameters();
  {
    auto dp = model.decoder.parameters();
    params.insert(params.end(), dp.begin(), dp.end());
  }
  AdamW opt(params, cfg.adam);
  auto grads = zeros_like(model);
  const auto glist = grad_list(grads);

  std::vector<std::size_t> order(dataset.size());
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    auto shuffle_rng = make_rng(cfg.seed, StreamTag::training, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double total = 0.0;
    for (std::size_t idx : order) {
      auto snr_rng = make_rng(mix_seed({cfg.seed, 0x534e52}), StreamTag::training, step);
      const double snr =
          noiseless ? kNoiselessSnr : std::uniform_real_distribution<double>(cfg.snr_low_db, cfg.snr_high_db)(snr_rng);
      const auto& x = dataset[idx];
      const std::size_t samples = (x.rows() * model.config.width + 1) / 2;
      const auto noise = draw_attribute_noise(samples, snr, cfg.seed, step);

      clear(grads);
      const double loss = jscc_loss(x, model, snr, noise, &grads);
      if (!std::isfinite(loss)) throw TrainingError("training diverged (non-finite loss)", epoch);
      opt.step(glist);
      total += loss;
      ++step;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = total / static_cast<double>(dataset.size());
    if (!std::isfinite(entry.mean_loss)) throw TrainingError("training diverged (non-finite loss)", epoch);
    if (!held_out.empty())
      for (double s : cfg.eval_snr_db) entry.eval_mse.push_back(jscc_eval_mse(held_out, model, s, cfg.seed));
    result.loss_curve.push_back(entry.mean_loss);
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

void write_training_log(const std::filesystem::path& path, const TrainResult& result,
                        const std::vector<double>& eval_snr_db) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << "epoch,mean_loss";
  for (double s : eval_snr_db) f << ",eval_mse_" << s << "db";
  f << '\n' << std::setprecision(17);
  for (const auto& e : result.log) {
    f << e.epoch << ',' << e.mean_loss;
    for (double m : e.eval_mse) f << ',' << m;
    f << '\n';
  }
}

std::vector<Matrix> synthetic_attribute_frames(std::size_t count, std::size_t rows, std::size_t channels,
                                               std::uint64_t seed) {
  if (rows == 0 || channels == 0) throw ConfigError("synthetic frames need positive rows and channels");
  constexpr std::size_t kRank = 3;
  constexpr double kIsotropic = 0.1;

  // The mixing and the offsets define the distribution and do not depend on
  // the sample seed, so frames drawn with different seeds are comparable.
  auto dist_rng = make_rng(0xa77b, StreamTag::scene, channels);
  boost::random::normal_distribution<double> unit(0.0, 1.0);
  Matrix mix(kRank, channels);
  for (double& v : mix.data()) v = unit(dist_rng) / std::sqrt(static_cast<double>(kRank));
  std::vector<double> offset(channels);
  for (double& v : offset) v = 0.5 * unit(dist_rng);

  std::vector<Matrix> frames;
  frames.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = make_rng(seed, StreamTag::scene, i);
    Matrix latent(rows, kRank);
    for (double& v : latent.data()) v = unit(rng);
    Matrix x = matmul(latent, mix);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < channels; ++c) x(r, c) += offset[c] + kIsotropic * unit(rng);
    frames.push_back(std::move(x));
  }
  return frames;
}

}  // namespace fpc

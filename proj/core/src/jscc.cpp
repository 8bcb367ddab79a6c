#include "fpc/jscc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

#include <boost/random/normal_distribution.hpp>

#include "fpc/error.hpp"
#include "fpc/rng.hpp"
#include "model_io.hpp"

namespace fpc {

void JsccConfig::validate() const {
  if (channels == 0 || width == 0 || hidden == 0) throw ConfigError("jscc widths must be positive");
  if (!std::isfinite(snr_scale)) throw ConfigError("jscc snr_scale must be finite");
}

namespace {

void push(std::vector<std::vector<double>*>& out, LinearLayer& l) {
  out.push_back(&l.weight.data());
  out.push_back(&l.bias);
}

void collect(std::vector<std::vector<double>*>& out, ResidualFc& r) {
  push(out, r.fc1);
  push(out, r.fc2);
  if (r.has_skip) push(out, r.skip);
}

}  // namespace

std::vector<std::vector<double>*> JsccNet::parameters() {
  std::vector<std::vector<double>*> out;
  collect(out, res1);
  push(out, mod.shared);
  push(out, mod.gate);
  push(out, mod.shift);
  collect(out, res2);
  return out;
}

std::vector<const std::vector<double>*> JsccNet::parameters() const {
  auto mut = const_cast<JsccNet*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

namespace {

void add_residual(ParamLayout& l, const std::string& p, std::size_t in, std::size_t mid, std::size_t out,
                  bool skip) {
  l.add_linear(p + ".fc1", in, mid);
  l.add_linear(p + ".fc2", mid, out);
  if (skip) l.add_linear(p + ".skip", in, out);
}

void add_mod(ParamLayout& l, const std::string& p, const JsccConfig& c) {
  l.add_linear(p + ".shared", c.width + c.snr_width, c.width);
  l.add_linear(p + ".gate", c.width, c.width);
  l.add_linear(p + ".shift", c.width, c.width);
}

ResidualFc load_residual(const ParamStore& s, const std::string& p, std::size_t in, std::size_t mid,
                         std::size_t out, bool skip) {
  ResidualFc r;
  r.fc1 = detail::load_linear(s, p + ".fc1", in, mid, Activation::leaky_relu);
  r.fc2 = detail::load_linear(s, p + ".fc2", mid, out, Activation::leaky_relu);
  r.has_skip = skip;
  if (skip) r.skip = detail::load_linear(s, p + ".skip", in, out, Activation::none);
  return r;
}

SnrModulation load_mod(const ParamStore& s, const std::string& p, const JsccConfig& c) {
  return {detail::load_linear(s, p + ".shared", c.width + c.snr_width, c.width, Activation::leaky_relu),
          detail::load_linear(s, p + ".gate", c.width, c.width, Activation::sigmoid),
          detail::load_linear(s, p + ".shift", c.width, c.width, Activation::none)};
}

void store_residual(ParamStore& s, const std::string& p, const ResidualFc& r) {
  detail::store_linear(s, p + ".fc1", r.fc1);
  detail::store_linear(s, p + ".fc2", r.fc2);
  if (r.has_skip) detail::store_linear(s, p + ".skip", r.skip);
}

void store_mod(ParamStore& s, const std::string& p, const SnrModulation& m) {
  detail::store_linear(s, p + ".shared", m.shared);
  detail::store_linear(s, p + ".gate", m.gate);
  detail::store_linear(s, p + ".shift", m.shift);
}

}  // namespace

ParamLayout JsccModel::layout(const JsccConfig& c) {
  c.validate();
  ParamLayout l;
  add_residual(l, "encoder.res1", c.channels, c.hidden, c.width, true);
  add_mod(l, "encoder.mod", c);
  add_residual(l, "encoder.res2", c.width, c.width, c.width, false);
  add_residual(l, "decoder.res1", c.width, c.width, c.width, false);
  add_mod(l, "decoder.mod", c);
  add_residual(l, "decoder.res2", c.width, c.hidden, c.channels, true);
  return l;
}

JsccModel JsccModel::from_store(const ParamStore& s, const JsccConfig& c) {
  c.validate();
  JsccModel m;
  m.config = c;
  m.encoder.res1 = load_residual(s, "encoder.res1", c.channels, c.hidden, c.width, true);
  m.encoder.mod = load_mod(s, "encoder.mod", c);
  m.encoder.res2 = load_residual(s, "encoder.res2", c.width, c.width, c.width, false);
  m.encoder.res2_on_b1 = c.res2_on_b1;
  m.decoder.res1 = load_residual(s, "decoder.res1", c.width, c.width, c.width, false);
  m.decoder.mod = load_mod(s, "decoder.mod", c);
  m.decoder.res2 = load_residual(s, "decoder.res2", c.width, c.hidden, c.channels, true);
  return m;
}

ParamStore JsccModel::to_store() const {
  ParamStore s;
  store_residual(s, "encoder.res1", encoder.res1);
  store_mod(s, "encoder.mod", encoder.mod);
  store_residual(s, "encoder.res2", encoder.res2);
  store_residual(s, "decoder.res1", decoder.res1);
  store_mod(s, "decoder.mod", decoder.mod);
  store_residual(s, "decoder.res2", decoder.res2);
  return s;
}

Matrix snr_block(std::size_t rows, const JsccConfig& cfg, double snr_db) {
  if (std::isnan(snr_db)) throw ConfigError("SNR is NaN");
  const double v = std::min(snr_db, kSnrConditioningCapDb) * cfg.snr_scale;
  return Matrix(rows, cfg.snr_width, v);
}

namespace {

Matrix add(Matrix a, const Matrix& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
  return a;
}

Matrix residual_forward(const ResidualFc& r, const Matrix& x) {
  auto y = fc_forward(r.fc2, fc_forward(r.fc1, x));
  return add(std::move(y), r.has_skip ? fc_forward(r.skip, x) : x);
}

Matrix mod_forward(const SnrModulation& m, const Matrix& x, const Matrix& snr) {
  const auto h = fc_forward(m.shared, hconcat(x, snr));
  auto g = fc_forward(m.gate, h);
  const auto s = fc_forward(m.shift, h);
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = x.data()[i] * (g.data()[i] + s.data()[i]);
  return g;
}

Matrix net_forward(const JsccNet& net, const Matrix& x, const Matrix& snr) {
  const auto b1 = residual_forward(net.res1, x);
  if (net.res2_on_b1) return residual_forward(net.res2, b1);
  return residual_forward(net.res2, mod_forward(net.mod, b1, snr));
}

}  // namespace

Matrix jscc_encode(const Matrix& attrs, double snr_db, const JsccModel& model) {
  if (attrs.cols() != model.config.channels)
    throw ShapeError("jscc_encode: expected " + std::to_string(model.config.channels) + " channels, got " +
                     std::to_string(attrs.cols()));
  return net_forward(model.encoder, attrs, snr_block(attrs.rows(), model.config, snr_db));
}

Matrix jscc_decode(const Matrix& received, double snr_db, const JsccModel& model) {
  if (received.cols() != model.config.width)
    throw ShapeError("jscc_decode: expected " + std::to_string(model.config.width) + " channels, got " +
                     std::to_string(received.cols()));
  return net_forward(model.decoder, received, snr_block(received.rows(), model.config, snr_db));
}

double ComplexSignal::mean_power() const {
  if (re.empty()) return 0.0;
  double p = 0.0;
  for (std::size_t i = 0; i < re.size(); ++i) p += re[i] * re[i] + im[i] * im[i];
  return p / static_cast<double>(re.size());
}

ComplexSignal complex_map(const Matrix& features) {
  const auto& d = features.data();
  ComplexSignal s;
  s.padded = d.size() % 2 != 0;
  const std::size_t half = (d.size() + 1) / 2;
  s.re.assign(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(half));
  s.im.assign(d.begin() + static_cast<std::ptrdiff_t>(half), d.end());
  if (s.padded) s.im.push_back(0.0);
  return s;
}

Matrix complex_unmap(const ComplexSignal& sig, std::size_t rows, std::size_t cols) {
  if (sig.re.size() != sig.im.size()) throw ShapeError("complex signal: re/im length differ");
  const std::size_t n = rows * cols;
  if (2 * sig.re.size() != n + (sig.padded ? 1 : 0))
    throw ShapeError("complex_unmap: signal length does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  std::vector<double> d(sig.re);
  d.insert(d.end(), sig.im.begin(), sig.im.end());
  d.resize(n);
  return Matrix(rows, cols, std::move(d));
}

ComplexSignal power_normalize(const ComplexSignal& sig) {
  const double p = sig.mean_power();
  if (!(p > 0.0)) throw DegenerateInputError("power_normalize: signal has zero power");
  ComplexSignal out = sig;
  out.scale = std::sqrt(p);
  for (double& v : out.re) v /= out.scale;
  for (double& v : out.im) v /= out.scale;
  return out;
}

ComplexSignal power_denormalize(const ComplexSignal& sig) {
  if (!(sig.scale > 0.0)) throw InvariantError("power_denormalize: scale must be positive");
  ComplexSignal out = sig;
  for (double& v : out.re) v *= sig.scale;
  for (double& v : out.im) v *= sig.scale;
  return out;
}

ComplexSignal complex_awgn(const ComplexSignal& sig, const ChannelConfig& cfg, std::uint64_t stream) {
  ComplexSignal out = sig;
  const double var = noise_variance(cfg.snr_db);
  if (var == 0.0) return out;
  auto rng = make_rng(cfg.seed, StreamTag::attribute_noise, stream);
  boost::random::normal_distribution<double> noise(0.0, std::sqrt(var));
  for (double& v : out.re) v += noise(rng);
  for (double& v : out.im) v += noise(rng);
  return out;
}

void AttributeFrame::save(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << std::setprecision(17) << "FPCA " << rows << ' ' << cols << ' ' << (signal.padded ? 1 : 0) << ' '
    << signal.scale << ' ' << signal.samples() << '\n';
  for (std::size_t i = 0; i < signal.samples(); ++i) f << signal.re[i] << ' ' << signal.im[i] << '\n';
}

AttributeFrame AttributeFrame::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::string magic;
  AttributeFrame a;
  int padded = 0;
  std::size_t samples = 0;
  if (!(f >> magic >> a.rows >> a.cols >> padded >> a.signal.scale >> samples) || magic != "FPCA")
    throw IoError(path.string() + ": bad attribute frame header");
  a.signal.padded = padded != 0;
  if (2 * samples != a.rows * a.cols + (a.signal.padded ? 1 : 0))
    throw IoError(path.string() + ": sample count does not match the shape");
  a.signal.re.resize(samples);
  a.signal.im.resize(samples);
  for (std::size_t i = 0; i < samples; ++i)
    if (!(f >> a.signal.re[i] >> a.signal.im[i])) throw IoError(path.string() + ": truncated attribute frame");
  std::string rest;
  if (f >> rest) throw IoError(path.string() + ": trailing data");
  return a;
}

double mse_loss(const Matrix& sent, const Matrix& received) {
  if (sent.rows() != received.rows() || sent.cols() != received.cols())
    throw ShapeError("mse_loss: shape mismatch");
  if (sent.empty()) throw EmptyInputError("mse_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < sent.size(); ++i) {
    const double d = sent.data()[i] - received.data()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(sent.size());
}

JsccTransmitResult jscc_transmit(const Matrix& attrs, const JsccModel& model, const ChannelConfig& cfg,
                                 std::uint64_t stream) {
  JsccTransmitResult r;
  const auto features = jscc_encode(attrs, cfg.snr_db, model);
  r.transmitted = power_normalize(complex_map(features));
  const auto received = power_denormalize(complex_awgn(r.transmitted, cfg, stream));
  r.decoded = jscc_decode(complex_unmap(received, features.rows(), features.cols()), cfg.snr_db, model);
  return r;
}

}  // namespace fpc

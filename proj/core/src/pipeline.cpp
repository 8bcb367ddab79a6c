#include "fpc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fpc/error.hpp"
#include "fpc/mask.hpp"
#include "fpc/rng.hpp"
#include "fpc/scene.hpp"

namespace fpc {

double compression_rate(std::size_t n, std::size_t c_in, std::size_t n_prime, std::size_t c_out) {
  if (n_prime == 0 || c_out == 0) throw DegenerateInputError("compression_rate: empty compressed representation");
  return static_cast<double>(n * c_in) / static_cast<double>(n_prime * c_out);
}

namespace {

// Model indices for seeded initialization.
enum ModelSlot : std::uint64_t { kCompaction = 1, kDecompaction = 2, kJscc = 3, kUpsampler = 4 };

std::uint64_t model_seed(const PipelineConfig& cfg, ModelSlot slot) {
  return mix_seed({cfg.seed, static_cast<std::uint64_t>(StreamTag::weights), slot});
}

// Frame id reserved for the upsampler calibration scene.
constexpr std::uint64_t kCalibrationFrame = ~std::uint64_t{0};

}  // namespace

PipelineModels load_models(const PipelineConfig& cfg) {
  cfg.validate();
  PipelineModels m;
  const auto C = cfg.channels;
  m.compaction = cfg.compaction_weights.empty()
                     ? CompactionModel::seeded(model_seed(cfg, kCompaction), C)
                     : CompactionModel::from_store(ParamStore::load(cfg.compaction_weights), C);
  m.decompaction = cfg.decompaction_weights.empty()
                       ? DecompactionModel::seeded(model_seed(cfg, kDecompaction), C)
                       : DecompactionModel::from_store(ParamStore::load(cfg.decompaction_weights), C);
  m.jscc = cfg.jscc_weights.empty() ? JsccModel::seeded(model_seed(cfg, kJscc), cfg.jscc)
                                    : JsccModel::from_store(ParamStore::load(cfg.jscc_weights), cfg.jscc);

  std::optional<ParamStore> up_store;
  if (!cfg.upsampler_weights.empty()) up_store = ParamStore::load(cfg.upsampler_weights);
  m.upsampler = up_store ? UpsamplerModel::from_store(*up_store) : UpsamplerModel::seeded(model_seed(cfg, kUpsampler));

  m.stats_g = NormStats::identity(UpsamplerModel::kGeometryWidth, Branch::geometry);
  m.stats_a = NormStats::identity(UpsamplerModel::kAttributeWidth, Branch::attribute);
  if (up_store && up_store->contains("stats.geometry.mean")) {
    m.stats_g = load_stats(*up_store, Branch::geometry, UpsamplerModel::kGeometryWidth);
    m.stats_a = load_stats(*up_store, Branch::attribute, UpsamplerModel::kAttributeWidth);
  } else if (cfg.run_upsample) {
    const auto scene = gen_scene(cfg.scene, cfg.seed, kCalibrationFrame);
    if (!scene.features.empty()) {
      const auto fc = channel_compact(scene.features, m.compaction);
      const auto kept = spatial_compact_infer(fc, spatial_probs(fc, m.compaction));
      const auto prompt =
          prompt_generate(channel_decompact(kept.tensor, m.decompaction), m.upsampler, cfg.diffusion.upscale);
      std::tie(m.stats_g, m.stats_a) = calibrate_stats({prompt});
    }
  }

  if (cfg.link.ldpc_enabled) m.code = ldpc_build(cfg.link.ldpc);
  if (!cfg.geometry_codec.empty()) m.codec = std::make_shared<ExternalGeometryCodec>(cfg.geometry_codec);
  return m;
}

// Per frame ---------------------------------------------------------------------

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t count_in(const std::vector<Coord>& coords, const VoxelMask& mask) {
  std::size_t k = 0;
  for (const auto& c : coords) k += mask.contains(c) ? 1 : 0;
  return k;
}

}  // namespace

std::size_t oracle_retained(const std::vector<Coord>& active, const VoxelMask& gt) {
  const std::size_t k = count_in(active, gt);
  return k > 0 ? k : std::min(kFailsafeVoxels, active.size());
}

FrameReport process_frame(const PipelineConfig& cfg, const PipelineModels& models, std::uint64_t frame,
                          double snr_db, FrameTiming* timing) {
  using clock = std::chrono::steady_clock;
  FrameReport r;
  r.frame = frame;
  r.snr_db = snr_db;
  FrameTiming t;
  t.frame = frame;
  t.snr_db = snr_db;

  // Edge: channel and spatial compaction.
  auto t0 = clock::now();
  const auto scene = gen_scene(cfg.scene, cfg.seed, frame);
  const auto& f4 = scene.features;
  r.n = f4.size();
  const auto fc = channel_compact(f4, models.compaction);
  const auto probs = spatial_probs(fc, models.compaction);
  const auto kept = spatial_compact_infer(fc, probs);
  const auto& sent = kept.tensor;
  r.n_prime = sent.size();
  r.failsafe = kept.failsafe;
  r.dims_in = r.n * kInputDims;
  r.dims_out = r.n_prime * (3 + cfg.channels);
  r.cr = r.n_prime > 0 ? compression_rate(r.n, kInputDims, r.n_prime, 3 + cfg.channels) : 0.0;

  const auto gt = merge_boxes(scene.boxes, cfg.scene.spec);
  const auto labels = sparse_labels(gt, f4.coords());
  r.gt_voxels = count_in(f4.coords(), gt);
  const std::size_t tp = count_in(sent.coords(), gt);
  r.mask_precision = r.n_prime > 0 ? static_cast<double>(tp) / r.n_prime : 0.0;
  r.mask_recall = r.gt_voxels > 0 ? static_cast<double>(tp) / r.gt_voxels : 0.0;
  r.focal_loss = r.n > 0 ? focal_loss(probs, labels) : 0.0;
  t.edge_ms = ms_since(t0);

  // Geometry: digital link with unequal (strong) protection.
  t0 = clock::now();
  const std::uint64_t channel_seed = mix_seed({cfg.seed, frame});
  GeometryLinkOptions opts;
  opts.code = models.code ? &*models.code : nullptr;
  opts.uncoded_block = cfg.link.uncoded_block;
  opts.max_iters = cfg.link.max_iters;
  opts.codec = models.codec.get();
  const auto geo = geometry_transmit(sent.coords(), sent.grid(), ChannelConfig{snr_db, channel_seed}, opts);
  r.geometry_ok = geo.frame_ok;
  r.geometry_exact = geo.exact;
  r.channel_bits = geo.channel_bits;
  r.ber_pre = geo.channel_bits ? static_cast<double>(geo.channel_bit_errors) / geo.channel_bits : 0.0;
  r.ber_post = geo.payload_bits ? static_cast<double>(geo.payload_bit_errors) / geo.payload_bits : 0.0;
  r.ldpc_blocks = geo.blocks;
  r.ldpc_iterations = geo.total_iterations;
  t.geometry_ms = ms_since(t0);

  // Attributes: analog learned code.
  t0 = clock::now();
  Matrix received_attrs;
  if (cfg.run_attributes && r.n_prime > 0) {
    const auto tx = jscc_transmit(sent.attrs(), models.jscc, ChannelConfig{snr_db, channel_seed}, 0);
    r.attr_mse = mse_loss(sent.attrs(), tx.decoded);
    r.tx_power = tx.transmitted.mean_power();
    received_attrs = tx.decoded;
  }
  t.attributes_ms = ms_since(t0);

  // Cloud: decompaction and upsampling, only on a usable geometry frame.
  t0 = clock::now();
  if (cfg.run_attributes && cfg.run_upsample && geo.frame_ok && geo.coords.size() == r.n_prime && r.n_prime > 0) {
    const SparseVoxelTensor received(geo.coords, received_attrs, sent.grid());
    const auto f4hat = channel_decompact(received, models.decompaction);
    DiffusionConfig d = cfg.diffusion;
    d.noise_seed = cfg.seed;
    r.upsampled_voxels = upsample(f4hat, models.upsampler, models.stats_g, models.stats_a, d, frame).size();
  }
  t.cloud_ms = ms_since(t0);

  if (timing) *timing = t;
  return r;
}

Aggregate aggregate_reports(const std::vector<FrameReport>& frames) {
  Aggregate a;
  a.frames = frames.size();
  if (frames.empty()) return a;
  std::size_t ok = 0, failed = 0, blocks = 0, iters = 0;
  for (const auto& f : frames) {
    a.dims_in += f.dims_in;
    a.dims_out += f.dims_out;
    ok += f.geometry_ok ? 1 : 0;
    failed += (!f.geometry_ok || !f.geometry_exact) ? 1 : 0;
    a.mean_ber_pre += f.ber_pre;
    a.mean_ber_post += f.ber_post;
    a.mean_attr_mse += f.attr_mse;
    if (f.tx_power > 0) a.max_power_error = std::max(a.max_power_error, std::abs(f.tx_power - 1.0));
    a.mean_precision += f.mask_precision;
    a.mean_recall += f.mask_recall;
    blocks += f.ldpc_blocks;
    iters += static_cast<std::size_t>(f.ldpc_iterations);
  }
  const double n = static_cast<double>(frames.size());
  a.cr = a.dims_out > 0 ? static_cast<double>(a.dims_in) / static_cast<double>(a.dims_out) : 0.0;
  a.geometry_ok_rate = ok / n;
  a.geometry_failure_rate = failed / n;
  a.mean_ber_pre /= n;
  a.mean_ber_post /= n;
  a.mean_attr_mse /= n;
  a.mean_precision /= n;
  a.mean_recall /= n;
  a.mean_ldpc_iterations = blocks ? static_cast<double>(iters) / blocks : 0.0;
  return a;
}

E2eResult run_e2e(const PipelineConfig& cfg) { return run_e2e(cfg, load_models(cfg)); }

E2eResult run_e2e(const PipelineConfig& cfg, const PipelineModels& models) {
  cfg.validate();
  const std::size_t tasks = cfg.snr_db.size() * cfg.frames;
  E2eResult out;
  out.frames.resize(tasks);
  out.timings.resize(tasks);

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks; i = next++) {
      try {
        const std::size_t s = i / cfg.frames;
        const std::uint64_t frame = i % cfg.frames;
        out.frames[i] = process_frame(cfg, models, frame, cfg.snr_db[s], &out.timings[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = tasks;
      }
    }
  };

  unsigned workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(tasks, 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  out.aggregate = aggregate_reports(out.frames);
  return out;
}

// Reports -----------------------------------------------------------------------

namespace {

std::string num(double v) {
  if (v == kNoiselessSnr) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

}  // namespace

std::string frames_csv(const std::vector<FrameReport>& frames) {
  std::ostringstream os;
  os << "frame,snr_db,n,n_prime,dims_in,dims_out,cr,failsafe,geometry_ok,geometry_exact,channel_bits,"
        "ber_pre,ber_post,ldpc_blocks,ldpc_iterations,attr_mse,tx_power,gt_voxels,proxy_mask_precision,"
        "proxy_mask_recall,focal_loss,upsampled_voxels\n";
  for (const auto& f : frames) {
    os << f.frame << ',' << num(f.snr_db) << ',' << f.n << ',' << f.n_prime << ',' << f.dims_in << ','
       << f.dims_out << ',' << num(f.cr) << ',' << f.failsafe << ',' << f.geometry_ok << ',' << f.geometry_exact
       << ',' << f.channel_bits << ',' << num(f.ber_pre) << ',' << num(f.ber_post) << ',' << f.ldpc_blocks << ','
       << f.ldpc_iterations << ',' << num(f.attr_mse) << ',' << num(f.tx_power) << ',' << f.gt_voxels << ','
       << num(f.mask_precision) << ',' << num(f.mask_recall) << ',' << num(f.focal_loss) << ','
       << f.upsampled_voxels << '\n';
  }
  return os.str();
}

std::string aggregate_json(const Aggregate& a) {
  const nlohmann::json j{
      {"frames", a.frames},
      {"dims_in", a.dims_in},
      {"dims_out", a.dims_out},
      {"cr", a.cr},
      {"geometry_ok_rate", a.geometry_ok_rate},
      {"geometry_failure_rate", a.geometry_failure_rate},
      {"mean_ber_pre", a.mean_ber_pre},
      {"mean_ber_post", a.mean_ber_post},
      {"mean_attr_mse", a.mean_attr_mse},
      {"max_power_error", a.max_power_error},
      {"proxy_mean_mask_precision", a.mean_precision},
      {"proxy_mean_mask_recall", a.mean_recall},
      {"mean_ldpc_iterations_per_block", a.mean_ldpc_iterations},
  };
  return j.dump(2) + "\n";
}

void write_e2e_reports(const std::filesystem::path& dir, const E2eResult& result) {
  std::filesystem::create_directories(dir);
  write_text(dir / "frames.csv", frames_csv(result.frames));
  write_text(dir / "aggregate.json", aggregate_json(result.aggregate));
  std::ostringstream os;
  os << "frame,snr_db,edge_ms,geometry_ms,attributes_ms,cloud_ms\n";
  for (const auto& t : result.timings)
    os << t.frame << ',' << num(t.snr_db) << ',' << t.edge_ms << ',' << t.geometry_ms << ',' << t.attributes_ms
       << ',' << t.cloud_ms << '\n';
  write_text(dir / "timings.csv", os.str());
}

// Sweeps ------------------------------------------------------------------------

std::vector<BerRow> ber_sweep(const std::vector<double>& snr_db, std::size_t blocks, const LdpcCode& code,
                              std::uint64_t seed, int max_iters) {
  if (blocks == 0) throw ConfigError("ber_sweep: blocks must be >= 1");
  std::vector<BerRow> rows;
  for (std::size_t s = 0; s < snr_db.size(); ++s) {
    BerRow row;
    row.snr_db = snr_db[s];
    auto msg_rng = make_rng(seed, StreamTag::scene, s);
    std::bernoulli_distribution coin(0.5);
    std::size_t raw_err = 0, info_err = 0, frame_err = 0;
    long iters = 0;
    std::vector<std::uint8_t> msg(code.k);
    for (std::size_t b = 0; b < blocks; ++b) {
      for (auto& bit : msg) bit = coin(msg_rng) ? 1 : 0;
      const auto cw = ldpc_encode(code, msg);
      const auto rx = awgn(bpsk_modulate(cw), ChannelConfig{snr_db[s], seed}, (std::uint64_t{s} << 32) | b);
      const auto hard = hard_decision(rx);
      for (std::size_t i = 0; i < cw.size(); ++i) raw_err += hard[i] != cw[i];
      const auto dec = ldpc_decode(code, bpsk_demodulate_llr(rx, snr_db[s]), max_iters);
      std::size_t e = 0;
      for (std::size_t i = 0; i < code.k; ++i) e += dec.message[i] != msg[i];
      info_err += e;
      frame_err += e > 0 ? 1 : 0;
      iters += dec.iterations;
    }
    row.uncoded_ber = static_cast<double>(raw_err) / static_cast<double>(blocks * code.n);
    row.coded_ber = static_cast<double>(info_err) / static_cast<double>(blocks * code.k);
    row.fer = static_cast<double>(frame_err) / static_cast<double>(blocks);
    row.mean_iters = static_cast<double>(iters) / static_cast<double>(blocks);
    rows.push_back(row);
  }
  return rows;
}

std::string ber_csv(const std::vector<BerRow>& rows) {
  std::ostringstream os;
  os << "snr_db,uncoded_ber,coded_ber,fer,mean_iters\n";
  for (const auto& r : rows)
    os << num(r.snr_db) << ',' << num(r.uncoded_ber) << ',' << num(r.coded_ber) << ',' << num(r.fer) << ','
       << num(r.mean_iters) << '\n';
  return os.str();
}

std::vector<ExpansionRow> sweep_expansion(const PipelineConfig& cfg, const PipelineModels& models) {
  cfg.validate();
  struct FrameData {
    std::vector<Coord> active, retained;
    std::vector<BoundingBox> boxes;
  };
  std::vector<FrameData> data;
  for (std::uint64_t f = 0; f < cfg.frames; ++f) {
    auto scene = gen_scene(cfg.scene, cfg.seed, f);
    const auto fc = channel_compact(scene.features, models.compaction);
    const auto kept = spatial_compact_infer(fc, spatial_probs(fc, models.compaction));
    data.push_back({scene.features.coords(), kept.tensor.coords(), std::move(scene.boxes)});
  }

  std::vector<ExpansionRow> rows;
  for (int e : cfg.sweeps.expansion) {
    SceneSpec spec = cfg.scene.spec;
    spec.expansion = e;
    std::size_t n = 0, in_gt = 0, kept = 0, tp = 0, oracle = 0;
    for (const auto& d : data) {
      const auto gt = merge_boxes(d.boxes, spec);
      n += d.active.size();
      in_gt += count_in(d.active, gt);
      kept += d.retained.size();
      tp += count_in(d.retained, gt);
      oracle += oracle_retained(d.active, gt);
    }
    ExpansionRow row;
    row.expansion = e;
    row.gt_fraction = n ? static_cast<double>(in_gt) / n : 0.0;
    row.precision = kept ? static_cast<double>(tp) / kept : 0.0;
    row.recall = in_gt ? static_cast<double>(tp) / in_gt : 0.0;
    row.oracle_cr = oracle ? compression_rate(n, kInputDims, oracle, 3 + cfg.channels) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::string expansion_csv(const std::vector<ExpansionRow>& rows) {
  std::ostringstream os;
  os << "expansion,gt_fraction,proxy_precision,proxy_recall,oracle_cr\n";
  for (const auto& r : rows)
    os << r.expansion << ',' << num(r.gt_fraction) << ',' << num(r.precision) << ',' << num(r.recall) << ','
       << num(r.oracle_cr) << '\n';
  return os.str();
}

std::vector<ChannelRow> sweep_channels(const PipelineConfig& cfg) {
  cfg.validate();
  std::size_t n = 0, kept = 0;
  for (std::uint64_t f = 0; f < cfg.frames; ++f) {
    const auto scene = gen_scene(cfg.scene, cfg.seed, f);
    n += scene.features.size();
    kept += oracle_retained(scene.features.coords(), merge_boxes(scene.boxes, cfg.scene.spec));
  }
  std::vector<ChannelRow> rows;
  for (auto c : cfg.sweeps.channels) {
    ChannelRow row;
    row.channels = c;
    row.dims_in = n * kInputDims;
    row.dims_out = kept * (3 + c);
    row.cr = kept ? compression_rate(n, kInputDims, kept, 3 + c) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::string channels_csv(const std::vector<ChannelRow>& rows) {
  std::ostringstream os;
  os << "channels,dims_in,dims_out,cr\n";
  for (const auto& r : rows) os << r.channels << ',' << r.dims_in << ',' << r.dims_out << ',' << num(r.cr) << '\n';
  return os.str();
}

TrainConfig make_train_config(const PipelineConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.train.epochs;
  t.adam.lr = cfg.train.lr;
  t.adam.weight_decay = cfg.train.weight_decay;
  t.snr_low_db = cfg.train.snr_low_db;
  t.snr_high_db = cfg.train.snr_high_db;
  t.seed = mix_seed({cfg.seed, static_cast<std::uint64_t>(StreamTag::training)});
  t.eval_snr_db = cfg.train.eval_snr_db;
  return t;
}

JsccDatasets make_jscc_datasets(const PipelineConfig& cfg, std::size_t train_frames) {
  const auto base = static_cast<std::uint64_t>(StreamTag::training);
  return {synthetic_attribute_frames(train_frames, cfg.train.rows, cfg.channels, mix_seed({cfg.seed, base, 1})),
          synthetic_attribute_frames(cfg.train.held_out, cfg.train.rows, cfg.channels, mix_seed({cfg.seed, base, 2}))};
}

std::vector<WidthRow> sweep_width(const PipelineConfig& cfg) {
  cfg.validate();
  const auto data = make_jscc_datasets(cfg, cfg.sweeps.width_train_frames);
  auto tc = make_train_config(cfg);
  std::vector<WidthRow> rows;
  for (auto w : cfg.sweeps.width) {
    JsccConfig jc = cfg.jscc;
    jc.width = w;
    const auto init = JsccModel::seeded(mix_seed({model_seed(cfg, kJscc), w}), jc);
    const auto trained = train_phase_two(data.train, init, tc);
    WidthRow row;
    row.width = w;
    for (double s : cfg.train.eval_snr_db) row.mse.push_back(jscc_eval_mse(data.held_out, trained.model, s, tc.seed));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string width_csv(const std::vector<WidthRow>& rows, const std::vector<double>& eval_snr_db) {
  std::ostringstream os;
  os << "width";
  for (double s : eval_snr_db) os << ",mse_" << num(s) << "db";
  os << '\n';
  for (const auto& r : rows) {
    os << r.width;
    for (double m : r.mse) os << ',' << num(m);
    os << '\n';
  }
  return os.str();
}

}  // namespace fpc

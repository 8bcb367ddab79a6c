// fpc: command line front end for the feature point cloud transmission
// pipeline. Every subcommand reads an optional JSON config and writes its
// outputs under --out.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fpc/config.hpp"
#include "fpc/error.hpp"
#include "fpc/geometry_link.hpp"
#include "fpc/jscc_train.hpp"
#include "fpc/mask.hpp"
#include "fpc/pipeline.hpp"
#include "fpc/scene.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::uint64_t seed = 0;
  std::vector<std::string> snr_db;
  std::string out;
  bool no_ldpc = false;
  std::string external_codec;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "JSON pipeline config")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "master seed (overrides the config)");
  app->add_option("--snr-db", o.snr_db, "channel SNR in dB, repeatable or comma separated; \"inf\" = noiseless")
      ->delimiter(',');
  app->add_option("--out", o.out, "output directory (overrides the config)");
  app->add_flag("--no-ldpc", o.no_ldpc, "send geometry without LDPC protection");
  app->add_option("--external-geom-codec", o.external_codec,
                  "geometry codec command: CMD encode IN OUT / CMD decode IN OUT");
}

double parse_snr(const std::string& s) {
  if (s == "inf" || s == "noiseless") return fpc::kNoiselessSnr;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || std::isnan(v)) throw fpc::ConfigError("invalid --snr-db value '" + s + "'");
  return v;
}

fpc::PipelineConfig resolve(const CommonOptions& o, CLI::App* app) {
  fpc::PipelineConfig cfg = o.config.empty() ? fpc::PipelineConfig{} : fpc::load_config(o.config);
  if (app->count("--seed")) cfg.seed = o.seed;
  if (!o.snr_db.empty()) {
    cfg.snr_db.clear();
    for (const auto& s : o.snr_db) cfg.snr_db.push_back(parse_snr(s));
  }
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.no_ldpc) cfg.link.ldpc_enabled = false;
  if (!o.external_codec.empty()) cfg.geometry_codec = o.external_codec;
  cfg.jscc.channels = cfg.channels;
  cfg.validate();
  return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw fpc::IoError("cannot write " + path.string());
  f << text;
}

std::filesystem::path out_dir(const fpc::PipelineConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  return cfg.output_dir;
}

fpc::GeometryLinkOptions link_options(const fpc::PipelineConfig& cfg, const fpc::PipelineModels& m) {
  fpc::GeometryLinkOptions opts;
  opts.code = m.code ? &*m.code : nullptr;
  opts.uncoded_block = cfg.link.uncoded_block;
  opts.max_iters = cfg.link.max_iters;
  opts.codec = m.codec.get();
  return opts;
}

// Subcommands -------------------------------------------------------------------

int cmd_gen_scene(const fpc::PipelineConfig& cfg) {
  const auto dir = out_dir(cfg);
  for (std::uint64_t f = 0; f < cfg.frames; ++f) {
    const auto scene = fpc::gen_scene(cfg.scene, cfg.seed, f);
    fpc::save_tensor_text(dir / ("scene_" + std::to_string(f) + ".txt"), scene.features);
    fpc::save_boxes(dir / ("boxes_" + std::to_string(f) + ".txt"), scene.boxes);
    std::cout << "frame " << f << ": " << scene.features.size() << " voxels, " << scene.boxes.size() << " boxes\n";
  }
  return 0;
}

int cmd_e2e(const fpc::PipelineConfig& cfg) {
  const auto result = fpc::run_e2e(cfg);
  const auto dir = out_dir(cfg);
  fpc::write_e2e_reports(dir, result);
  std::cout << fpc::aggregate_json(result.aggregate);
  return 0;
}

int cmd_ber_sweep(const fpc::PipelineConfig& cfg, bool snr_given) {
  const auto code = fpc::ldpc_build(cfg.link.ldpc);
  const auto& snrs = snr_given ? cfg.snr_db : cfg.sweeps.ber_snr_db;
  const auto csv = fpc::ber_csv(fpc::ber_sweep(snrs, cfg.sweeps.ber_blocks, code, cfg.seed, cfg.link.max_iters));
  write_file(out_dir(cfg) / "ber.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_sweep_expansion(const fpc::PipelineConfig& cfg) {
  const auto csv = fpc::expansion_csv(fpc::sweep_expansion(cfg, fpc::load_models(cfg)));
  write_file(out_dir(cfg) / "sweep_expansion.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_sweep_channels(const fpc::PipelineConfig& cfg) {
  const auto csv = fpc::channels_csv(fpc::sweep_channels(cfg));
  write_file(out_dir(cfg) / "sweep_channels.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_sweep_width(const fpc::PipelineConfig& cfg) {
  const auto csv = fpc::width_csv(fpc::sweep_width(cfg), cfg.train.eval_snr_db);
  write_file(out_dir(cfg) / "sweep_width.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_train_jscc(const fpc::PipelineConfig& cfg) {
  const auto data = fpc::make_jscc_datasets(cfg, cfg.train.frames);
  const auto tc = fpc::make_train_config(cfg);
  const auto init = fpc::load_models(cfg).jscc;
  for (double s : cfg.train.eval_snr_db)
    std::cout << "init mse @" << s << " dB: " << fpc::jscc_eval_mse(data.held_out, init, s, tc.seed) << '\n';
  const auto result = fpc::train_phase_two(data.train, init, tc, data.held_out, [](const fpc::EpochLog& e) {
    std::cout << "epoch " << e.epoch << " loss " << e.mean_loss << '\n';
  });
  const auto dir = out_dir(cfg);
  result.model.to_store().save(dir / "jscc.fpcw");
  fpc::write_training_log(dir / "training_log.csv", result, cfg.train.eval_snr_db);
  std::cout << "wrote " << (dir / "jscc.fpcw").string() << '\n';
  return 0;
}

int cmd_mask_oracle(const fpc::PipelineConfig& cfg, const std::string& boxes_path, std::uint64_t frame) {
  const auto boxes =
      boxes_path.empty() ? fpc::gen_scene(cfg.scene, cfg.seed, frame).boxes : fpc::load_boxes(boxes_path);
  const auto mask = fpc::merge_boxes(boxes, cfg.scene.spec);
  const auto dir = out_dir(cfg);
  fpc::save_tensor_text(dir / "mask.txt", fpc::mask_to_tensor(mask));
  std::cout << boxes.size() << " boxes, expansion " << cfg.scene.spec.expansion << ": " << mask.size()
            << " relevant voxels\n";
  return 0;
}

int cmd_encode(const fpc::PipelineConfig& cfg, const std::string& input) {
  const auto models = fpc::load_models(cfg);
  const auto f4 = fpc::load_tensor_text(input);
  const double snr = cfg.snr_db.front();
  const auto fc = fpc::channel_compact(f4, models.compaction);
  const auto kept = fpc::spatial_compact_infer(fc, fpc::spatial_probs(fc, models.compaction));
  const auto& sent = kept.tensor;
  if (sent.empty()) throw fpc::DegenerateInputError("encode: input tensor has no voxels");

  const fpc::ChannelConfig channel{snr, cfg.seed};
  auto geo = fpc::geometry_encode(sent.coords(), sent.grid(), link_options(cfg, models));
  fpc::geometry_channel(geo.frame, channel);

  const auto features = fpc::jscc_encode(sent.attrs(), snr, models.jscc);
  fpc::AttributeFrame attrs{features.rows(), features.cols(),
                            fpc::complex_awgn(fpc::power_normalize(fpc::complex_map(features)), channel)};

  const auto dir = out_dir(cfg);
  geo.frame.save(dir / "geometry.fpcg");
  attrs.save(dir / "attributes.txt");
  std::cout << "n=" << f4.size() << " n'=" << sent.size() << (kept.failsafe ? " (failsafe)" : "")
            << " cr=" << fpc::compression_rate(f4.size(), fpc::kInputDims, sent.size(), 3 + cfg.channels)
            << " geometry bytes=" << geo.payload.size() << " blocks=" << geo.frame.block_count << '\n';
  return 0;
}

int cmd_decode(const fpc::PipelineConfig& cfg, const std::string& input) {
  const auto models = fpc::load_models(cfg);
  const std::filesystem::path in = input;
  const double snr = cfg.snr_db.front();
  const auto frame = fpc::GeometryFrame::load(in / "geometry.fpcg");
  const auto geo = fpc::geometry_decode(frame, snr, link_options(cfg, models));
  if (!geo.frame_ok) {
    std::cerr << "geometry frame failed (" << (geo.blocks_converged ? "parse error" : "LDPC did not converge")
              << ")\n";
    return 3;
  }
  const auto attrs = fpc::AttributeFrame::load(in / "attributes.txt");
  const auto received = fpc::complex_unmap(fpc::power_denormalize(attrs.signal), attrs.rows, attrs.cols);
  const auto decoded = fpc::jscc_decode(received, snr, models.jscc);
  if (decoded.rows() != geo.coords.size())
    throw fpc::AlignmentError("decode: attribute rows do not match the decoded voxel count");

  const auto f4hat = fpc::channel_decompact(fpc::SparseVoxelTensor(geo.coords, decoded, frame.grid), models.decompaction);
  fpc::DiffusionConfig d = cfg.diffusion;
  d.noise_seed = cfg.seed;
  const auto f3hat = fpc::upsample(f4hat, models.upsampler, models.stats_g, models.stats_a, d);

  const auto dir = out_dir(cfg);
  fpc::save_tensor_text(dir / "f4hat.txt", f4hat);
  fpc::save_tensor_text(dir / "f3hat.txt", f3hat);
  std::cout << "decoded " << geo.coords.size() << " voxels, upsampled to " << f3hat.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature point cloud transmission pipeline"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string boxes_path, input;
  std::uint64_t frame = 0;

  struct Sub {
    const char* name;
    const char* help;
  };
  const std::vector<Sub> subs{
      {"gen-scene", "generate synthetic scenes (tensor text + box lists)"},
      {"e2e", "run the full pipeline and write per-frame and aggregate reports"},
      {"ber-sweep", "LDPC / uncoded BER over an SNR list"},
      {"sweep-expansion", "mask expansion sweep"},
      {"sweep-channels", "compact channel count sweep"},
      {"sweep-width", "attribute codec width sweep (trains one model per width)"},
      {"train-jscc", "train the attribute codec on synthetic frames"},
      {"mask-oracle", "ground-truth relevance mask for a box list"},
      {"encode", "edge side: compact and transmit one tensor"},
      {"decode", "cloud side: receive, decode and upsample one frame"},
  };
  std::vector<CLI::App*> cmds;
  for (const auto& s : subs) {
    auto* c = app.add_subcommand(s.name, s.help);
    add_common(c, common);
    cmds.push_back(c);
  }
  app.get_subcommand("mask-oracle")->add_option("--boxes", boxes_path, "box list file (x y z l w h per line)");
  app.get_subcommand("mask-oracle")->add_option("--frame", frame, "scene frame to take boxes from");
  app.get_subcommand("encode")->add_option("input", input, "64-channel tensor text file")->required();
  app.get_subcommand("decode")->add_option("input", input, "directory written by encode")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    const auto cfg = resolve(common, sub);
    const std::string name = sub->get_name();
    if (name == "gen-scene") return cmd_gen_scene(cfg);
    if (name == "e2e") return cmd_e2e(cfg);
    if (name == "ber-sweep") return cmd_ber_sweep(cfg, !common.snr_db.empty());
    if (name == "sweep-expansion") return cmd_sweep_expansion(cfg);
    if (name == "sweep-channels") return cmd_sweep_channels(cfg);
    if (name == "sweep-width") return cmd_sweep_width(cfg);
    if (name == "train-jscc") return cmd_train_jscc(cfg);
    if (name == "mask-oracle") return cmd_mask_oracle(cfg, boxes_path, frame);
    if (name == "encode") return cmd_encode(cfg, input);
    if (name == "decode") return cmd_decode(cfg, input);
  } catch (const fpc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

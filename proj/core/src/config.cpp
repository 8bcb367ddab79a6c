#include "fpc/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fpc/error.hpp"
#include "fpc/source_codec.hpp"

namespace fpc {

using nlohmann::json;

namespace {
bool valid_ca(std::size_t c) { return c == 2 || c == 4 || c == 6 || c == 8; }
}  // namespace

void PipelineConfig::validate() const {
  scene.validate();
  const auto& g = scene.spec.grid;
  if (g.l < kMinUNetExtent || g.w < kMinUNetExtent || g.h < kMinUNetExtent)
    throw ConfigError("grid extents must be at least " + std::to_string(kMinUNetExtent));
  if (g.max_extent() > 0xFFFF) throw ConfigError("grid extents must fit in 16 bits");
  if (!valid_ca(channels)) throw ConfigError("channels (C_a) must be one of 2, 4, 6, 8");
  if (jscc.channels != channels) throw ConfigError("jscc channel count must equal C_a");
  jscc.validate();
  diffusion.validate();
  if (snr_db.empty()) throw ConfigError("snr_db list is empty");
  for (double s : snr_db)
    if (std::isnan(s) || s == -std::numeric_limits<double>::infinity()) throw ConfigError("invalid SNR value");
  if (link.uncoded_block == 0) throw ConfigError("ldpc.uncoded_block must be positive");
  if (link.max_iters < 0) throw ConfigError("ldpc.max_iters must be >= 0");
  if (link.ldpc.dv < 1 || link.ldpc.dc < 2) throw ConfigError("ldpc degrees out of range");
  if (train.frames == 0 || train.rows == 0 || train.epochs < 1) throw ConfigError("train settings must be positive");
  if (!(train.lr > 0.0) || train.weight_decay < 0.0) throw ConfigError("train lr/weight_decay out of range");
  if (!(train.snr_low_db <= train.snr_high_db)) throw ConfigError("train SNR range is inverted");
  for (int e : sweeps.expansion)
    if (e < 0) throw ConfigError("sweep expansion values must be >= 0");
  for (auto c : sweeps.channels)
    if (!valid_ca(c)) throw ConfigError("sweep channel values must be one of 2, 4, 6, 8");
  for (auto w : sweeps.width)
    if (w == 0) throw ConfigError("sweep width values must be positive");
  if (sweeps.ber_blocks == 0) throw ConfigError("sweeps.ber_blocks must be positive");
}

namespace {

// Object reader that records consumed keys so leftovers can be rejected.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(label(key) + ": " + e.what());
    }
  }

  void get_path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  void get_snr_list(const char* key, std::vector<double>& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const auto& a = j_.at(key);
    if (!a.is_array()) throw ConfigError(label(key) + " must be an array");
    out.clear();
    for (const auto& v : a) {
      if (v.is_number()) {
        out.push_back(v.get<double>());
      } else if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "noiseless")) {
        out.push_back(kNoiselessSnr);
      } else {
        throw ConfigError(label(key) + ": entries must be numbers or \"inf\"");
      }
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Reader child(const char* key) {
    used_.insert(key);
    return Reader(j_.at(key), label(key));
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw ConfigError("unknown config key " + label(item.key().c_str()));
  }

 private:
  std::string label(const char* key = nullptr) const {
    std::string s = path_.empty() ? "config" : path_;
    if (key) s += std::string(".") + key;
    return s;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

UpscaleMode upscale_from(const std::string& s) {
  if (s == "children8") return UpscaleMode::children8;
  if (s == "scale_only") return UpscaleMode::scale_only;
  throw ConfigError("upsample.upscale must be \"children8\" or \"scale_only\"");
}

GeometryOutput output_from(const std::string& s) {
  if (s == "anchored") return GeometryOutput::anchored;
  if (s == "free") return GeometryOutput::free;
  throw ConfigError("upsample.output must be \"anchored\" or \"free\"");
}

json snr_json(const std::vector<double>& v) {
  json a = json::array();
  for (double s : v) {
    if (s == kNoiselessSnr)
      a.push_back("inf");
    else
      a.push_back(s);
  }
  return a;
}

}  // namespace

PipelineConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig c;
  Reader r(j, "");
  if (!r.has("version")) throw ConfigError("config.version is required");
  int version = 0;
  r.get("version", version);
  if (version != PipelineConfig::kVersion)
    throw ConfigError("unsupported config version " + std::to_string(version));

  r.get("seed", c.seed);
  r.get("frames", c.frames);
  r.get("workers", c.workers);
  r.get_path("output_dir", c.output_dir);
  r.get("channels", c.channels);
  r.get_snr_list("snr_db", c.snr_db);
  r.get("run_attributes", c.run_attributes);
  r.get("run_upsample", c.run_upsample);
  r.get("geometry_codec", c.geometry_codec);

  if (r.has("scene")) {
    auto s = r.child("scene");
    std::array<std::int32_t, 3> grid{c.scene.spec.grid.l, c.scene.spec.grid.w, c.scene.spec.grid.h};
    s.get("extent", c.scene.spec.extent);
    s.get("grid", grid);
    c.scene.spec.grid = {grid[0], grid[1], grid[2]};
    s.get("expansion", c.scene.spec.expansion);
    s.get("n_objects", c.scene.n_objects);
    s.get("box_min", c.scene.box_min);
    s.get("box_max", c.scene.box_max);
    s.get("fill", c.scene.fill);
    s.get("background", c.scene.background);
    s.get("offset_scale", c.scene.offset_scale);
    s.get("max_attempts", c.scene.max_attempts);
    s.finish();
  }
  if (r.has("ldpc")) {
    auto s = r.child("ldpc");
    s.get("enabled", c.link.ldpc_enabled);
    s.get("m", c.link.ldpc.m);
    s.get("dv", c.link.ldpc.dv);
    s.get("dc", c.link.ldpc.dc);
    s.get("n", c.link.ldpc.n);
    s.get("seed", c.link.ldpc.seed);
    s.get("max_iters", c.link.max_iters);
    s.get("uncoded_block", c.link.uncoded_block);
    s.finish();
  }
  if (r.has("jscc")) {
    auto s = r.child("jscc");
    s.get("width", c.jscc.width);
    s.get("hidden", c.jscc.hidden);
    s.get("snr_width", c.jscc.snr_width);
    s.get("snr_scale", c.jscc.snr_scale);
    s.get("res2_on_b1", c.jscc.res2_on_b1);
    s.get_path("weights", c.jscc_weights);
    s.finish();
  }
  if (r.has("upsample")) {
    auto s = r.child("upsample");
    std::string upscale = "children8", output = "anchored";
    s.get("steps", c.diffusion.steps);
    s.get("upscale", upscale);
    s.get("output", output);
    s.get_path("weights", c.upsampler_weights);
    s.finish();
    c.diffusion.upscale = upscale_from(upscale);
    c.diffusion.output = output_from(output);
  }
  if (r.has("weights")) {
    auto s = r.child("weights");
    s.get_path("compaction", c.compaction_weights);
    s.get_path("decompaction", c.decompaction_weights);
    s.finish();
  }
  if (r.has("train")) {
    auto s = r.child("train");
    s.get("frames", c.train.frames);
    s.get("held_out", c.train.held_out);
    s.get("rows", c.train.rows);
    s.get("epochs", c.train.epochs);
    s.get("lr", c.train.lr);
    s.get("weight_decay", c.train.weight_decay);
    s.get("snr_low_db", c.train.snr_low_db);
    s.get("snr_high_db", c.train.snr_high_db);
    s.get_snr_list("eval_snr_db", c.train.eval_snr_db);
    s.finish();
  }
  if (r.has("sweeps")) {
    auto s = r.child("sweeps");
    s.get("expansion", c.sweeps.expansion);
    s.get("channels", c.sweeps.channels);
    s.get("width", c.sweeps.width);
    s.get("width_train_frames", c.sweeps.width_train_frames);
    s.get_snr_list("ber_snr_db", c.sweeps.ber_snr_db);
    s.get("ber_blocks", c.sweeps.ber_blocks);
    s.finish();
  }
  r.finish();

  c.jscc.channels = c.channels;
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const PipelineConfig& c) {
  const auto& sc = c.scene;
  json j{
      {"version", PipelineConfig::kVersion},
      {"seed", c.seed},
      {"frames", c.frames},
      {"workers", c.workers},
      {"output_dir", c.output_dir.string()},
      {"channels", c.channels},
      {"snr_db", snr_json(c.snr_db)},
      {"run_attributes", c.run_attributes},
      {"run_upsample", c.run_upsample},
      {"geometry_codec", c.geometry_codec},
      {"scene",
       {{"extent", sc.spec.extent},
        {"grid", {sc.spec.grid.l, sc.spec.grid.w, sc.spec.grid.h}},
        {"expansion", sc.spec.expansion},
        {"n_objects", sc.n_objects},
        {"box_min", sc.box_min},
        {"box_max", sc.box_max},
        {"fill", sc.fill},
        {"background", sc.background},
        {"offset_scale", sc.offset_scale},
        {"max_attempts", sc.max_attempts}}},
      {"ldpc",
       {{"enabled", c.link.ldpc_enabled},
        {"m", c.link.ldpc.m},
        {"dv", c.link.ldpc.dv},
        {"dc", c.link.ldpc.dc},
        {"n", c.link.ldpc.n},
        {"seed", c.link.ldpc.seed},
        {"max_iters", c.link.max_iters},
        {"uncoded_block", c.link.uncoded_block}}},
      {"jscc",
       {{"width", c.jscc.width},
        {"hidden", c.jscc.hidden},
        {"snr_width", c.jscc.snr_width},
        {"snr_scale", c.jscc.snr_scale},
        {"res2_on_b1", c.jscc.res2_on_b1},
        {"weights", c.jscc_weights.string()}}},
      {"upsample",
       {{"steps", c.diffusion.steps},
        {"upscale", c.diffusion.upscale == UpscaleMode::children8 ? "children8" : "scale_only"},
        {"output", c.diffusion.output == GeometryOutput::anchored ? "anchored" : "free"},
        {"weights", c.upsampler_weights.string()}}},
      {"weights",
       {{"compaction", c.compaction_weights.string()}, {"decompaction", c.decompaction_weights.string()}}},
      {"train",
       {{"frames", c.train.frames},
        {"held_out", c.train.held_out},
        {"rows", c.train.rows},
        {"epochs", c.train.epochs},
        {"lr", c.train.lr},
        {"weight_decay", c.train.weight_decay},
        {"snr_low_db", c.train.snr_low_db},
        {"snr_high_db", c.train.snr_high_db},
        {"eval_snr_db", snr_json(c.train.eval_snr_db)}}},
      {"sweeps",
       {{"expansion", c.sweeps.expansion},
        {"channels", c.sweeps.channels},
        {"width", c.sweeps.width},
        {"width_train_frames", c.sweeps.width_train_frames},
        {"ber_snr_db", snr_json(c.sweeps.ber_snr_db)},
        {"ber_blocks", c.sweeps.ber_blocks}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace fpc

#include "hypercurv/harness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "hypercurv/error.hpp"
#include "json.hpp"

namespace hypercurv::harness {

using nlohmann::json;

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Hnn: return "hnn";
    case Mode::CHnn: return "c-hnn";
    case Mode::FixedCurvature: return "fixed-curvature";
    case Mode::CurvatureLearning: return "curvature-learning";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  for (Mode m : {Mode::Hnn, Mode::CHnn, Mode::FixedCurvature, Mode::CurvatureLearning}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigurationError("mode: unknown value '" + s + "' (expected hnn, c-hnn, fixed-curvature, curvature-learning)");
}

void RunConfig::validate() const {
  if (data.source != "tree" && data.source != "csv") throw ConfigurationError("data.source: expected \"tree\" or \"csv\"");
  if (data.source == "csv" && data.path.empty()) throw ConfigurationError("data.path: required when data.source is \"csv\"");
  if (data.tree.depth < 2) throw ConfigurationError("data.depth: must be at least 2");
  if (data.tree.branching < 2) throw ConfigurationError("data.branching: must be at least 2");
  if (!(data.tree.noise_sigma >= 0.0)) throw ConfigurationError("data.noise_sigma: must be non-negative");
  if (data.tree.d_in < 1) throw ConfigurationError("data.d_in: must be positive");
  if (data.tree.samples_per_leaf < 1) throw ConfigurationError("data.samples_per_leaf: must be positive");
  for (std::size_t w : model.widths) {
    if (w == 0) throw ConfigurationError("model.widths: entries must be positive");
  }
  if (model.d_emb < 1) throw ConfigurationError("model.d_emb: must be positive");
  if (!(model.clip_radius > 0.0)) throw ConfigurationError("model.clip_radius: must be positive");
  if (!(model.weight_decay >= 0.0)) throw ConfigurationError("model.weight_decay: must be non-negative");
  if (!(model.init_scale > 0.0)) throw ConfigurationError("model.init_scale: must be positive");
  if (!(curvature.min > 0.0 && curvature.min <= curvature.max)) {
    throw ConfigurationError("curvature: bounds must satisfy 0 < min <= max");
  }
  if (!(curvature.init >= curvature.min && curvature.init <= curvature.max)) {
    throw ConfigurationError("curvature.init: must lie in [min, max]");
  }
  if (output_dir.empty()) throw ConfigurationError("output_dir: must not be empty");
  try {
    effective_bilevel().validate();
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(std::string("bilevel: ") + e.what());
  }
  try {
    sharpness.validate();
  } catch (const ConfigurationError& e) {
    throw ConfigurationError(std::string("sharpness: ") + e.what());
  }
}

BilevelConfig RunConfig::effective_bilevel() const {
  BilevelConfig b = bilevel;
  b.c_min = curvature.min;
  b.c_max = curvature.max;
  b.learn_curvature = mode == Mode::CurvatureLearning;
  if (mode == Mode::Hnn || mode == Mode::CHnn) b.rho_hat = 0.0;
  return b;
}

ModelConfig RunConfig::model_config(std::size_t d_in, std::size_t n_classes) const {
  ModelConfig m;
  m.d_in = d_in;
  m.n_classes = n_classes;
  m.widths = model.widths;
  m.d_emb = model.d_emb;
  m.clip = mode == Mode::CHnn;
  m.clip_radius = model.clip_radius;
  m.weight_decay = model.weight_decay;
  m.init_scale = model.init_scale;
  return m;
}

namespace {

// Walks one JSON object, remembering which keys were read so leftovers can be rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigurationError(label() + "expected an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigurationError("");
        out = v->get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw ConfigurationError("");
        if (std::is_unsigned_v<T> && v->is_number_integer() && !v->is_number_unsigned()) throw ConfigurationError("");
        out = v->get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigurationError("");
        out = v->get<T>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigurationError("");
        out = v->get<std::string>();
      } else {
        out = v->get<T>();
      }
    } catch (const std::exception&) {
      throw ConfigurationError(path_ + "." + key + ": wrong type (got " + v->type_name() + ")");
    }
  }

  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigurationError(label() + "unknown key '" + k + "'");
    }
  }

  std::string label() const { return path_.empty() ? "" : path_ + ": "; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Fn>
void section(Section& parent, const char* key, const std::string& path, Fn&& fn) {
  const json* v = parent.find(key);
  if (!v) return;
  Section s(*v, path);
  fn(s);
  s.finish();
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigurationError(std::string("invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section root(j, "");
  std::string mode = to_string(cfg.mode);
  root.read("mode", mode);
  cfg.mode = mode_from_string(mode);
  root.read("seed", cfg.seed);
  root.read("output_dir", cfg.output_dir);
  section(root, "data", "data", [&](Section& s) {
    s.read("source", cfg.data.source);
    s.read("path", cfg.data.path);
    s.read("label_column", cfg.data.label_column);
    s.read("depth", cfg.data.tree.depth);
    s.read("branching", cfg.data.tree.branching);
    s.read("noise_sigma", cfg.data.tree.noise_sigma);
    s.read("d_in", cfg.data.tree.d_in);
    s.read("samples_per_leaf", cfg.data.tree.samples_per_leaf);
    s.read("seed", cfg.data.tree.seed);
  });
  section(root, "model", "model", [&](Section& s) {
    if (const json* w = s.find("widths")) {
      if (!w->is_array()) throw ConfigurationError("model.widths: expected an array");
      cfg.model.widths.clear();
      for (const auto& e : *w) {
        if (!e.is_number_unsigned()) throw ConfigurationError("model.widths: entries must be positive integers");
        cfg.model.widths.push_back(e.get<std::size_t>());
      }
    }
    s.read("d_emb", cfg.model.d_emb);
    s.read("clip_radius", cfg.model.clip_radius);
    s.read("weight_decay", cfg.model.weight_decay);
    s.read("init_scale", cfg.model.init_scale);
  });
  section(root, "bilevel", "bilevel", [&](Section& s) {
    auto& b = cfg.bilevel;
    s.read("T", b.T);
    s.read("outer_iters", b.outer_iters);
    s.read("eta", b.eta);
    s.read("rho_hat", b.rho_hat);
    s.read("J", b.J);
    s.read("K", b.K);
    s.read("rho", b.rho);
    s.read("train_fraction", b.train_fraction);
    s.read("val_fraction", b.val_fraction);
    s.read("eta_c", b.eta_c);
    s.read("decay_schedule", b.decay_schedule);
    if (const json* h = s.find("hvp_mode")) {
      if (*h == "fd") {
        b.hvp_mode = HvpMode::FiniteDifference;
      } else if (*h == "analytic") {
        b.hvp_mode = HvpMode::Analytic;
      } else {
        throw ConfigurationError("bilevel.hvp_mode: expected \"fd\" or \"analytic\"");
      }
    }
    if (const json* ls = s.find("loss_scale")) {
      if (ls->is_null()) {
        b.loss_scale.reset();
      } else if (ls->is_number()) {
        b.loss_scale = ls->get<double>();
      } else {
        throw ConfigurationError("bilevel.loss_scale: expected null or a number");
      }
    }
  });
  section(root, "sharpness", "sharpness", [&](Section& s) {
    auto& sh = cfg.sharpness;
    s.read("K", sh.K);
    s.read("rho", sh.rho);
    if (const json* st = s.find("sweep_steps")) {
      if (!st->is_array()) throw ConfigurationError("sharpness.sweep_steps: expected an array");
      sh.sweep_steps.clear();
      for (const auto& e : *st) {
        if (!e.is_number()) throw ConfigurationError("sharpness.sweep_steps: entries must be numbers");
        sh.sweep_steps.push_back(e.get<double>());
      }
    }
    s.read("power_iters", sh.power_iters);
    s.read("n_eigs", sh.n_eigs);
  });
  section(root, "curvature", "curvature", [&](Section& s) {
    s.read("init", cfg.curvature.init);
    s.read("min", cfg.curvature.min);
    s.read("max", cfg.curvature.max);
  });
  root.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigurationError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  const auto& b = cfg.bilevel;
  const auto& sh = cfg.sharpness;
  json j;
  j["mode"] = to_string(cfg.mode);
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["data"] = {{"source", cfg.data.source},
               {"path", cfg.data.path},
               {"label_column", cfg.data.label_column},
               {"depth", cfg.data.tree.depth},
               {"branching", cfg.data.tree.branching},
               {"noise_sigma", cfg.data.tree.noise_sigma},
               {"d_in", cfg.data.tree.d_in},
               {"samples_per_leaf", cfg.data.tree.samples_per_leaf},
               {"seed", cfg.data.tree.seed}};
  j["model"] = {{"widths", cfg.model.widths},
                {"d_emb", cfg.model.d_emb},
                {"clip_radius", cfg.model.clip_radius},
                {"weight_decay", cfg.model.weight_decay},
                {"init_scale", cfg.model.init_scale}};
  j["bilevel"] = {{"T", b.T},
                  {"outer_iters", b.outer_iters},
                  {"eta", b.eta},
                  {"rho_hat", b.rho_hat},
                  {"J", b.J},
                  {"K", b.K},
                  {"rho", b.rho},
                  {"train_fraction", b.train_fraction},
                  {"val_fraction", b.val_fraction},
                  {"eta_c", b.eta_c},
                  {"decay_schedule", b.decay_schedule},
                  {"hvp_mode", b.hvp_mode == HvpMode::Analytic ? "analytic" : "fd"},
                  {"loss_scale", b.loss_scale ? json(*b.loss_scale) : json(nullptr)}};
  j["sharpness"] = {{"K", sh.K},
                    {"rho", sh.rho},
                    {"sweep_steps", sh.sweep_steps},
                    {"power_iters", sh.power_iters},
                    {"n_eigs", sh.n_eigs}};
  j["curvature"] = {{"init", cfg.curvature.init}, {"min", cfg.curvature.min}, {"max", cfg.curvature.max}};
  return j.dump(2) + "\n";
}

}  // namespace hypercurv::harness

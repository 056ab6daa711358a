#include "hypercurv/hnn_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "hypercurv/error.hpp"

namespace hypercurv {

void validate_batch(const Batch& batch, std::size_t d_in, std::size_t n_classes) {
  const auto& s = batch.inputs.shape();
  if (batch.labels.empty()) throw ContractViolation("batch must contain at least one sample");
  if (s.size() != 2 || s[0] != batch.labels.size() || s[1] != d_in) {
    throw ContractViolation("batch inputs have shape " + shape_to_string(s) + ", expected (" +
                            std::to_string(batch.labels.size()) + "," + std::to_string(d_in) + ")");
  }
  for (int l : batch.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes) {
      throw ContractViolation("label " + std::to_string(l) + " out of range");
    }
  }
}

Batch subset(const Batch& batch, const std::vector<std::size_t>& rows) {
  const std::size_t d = batch.inputs.cols();
  Tensor x(Shape{rows.size(), d});
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = batch.inputs.at(rows[i], j);
    labels.push_back(batch.labels[rows[i]]);
  }
  return {std::move(x), std::move(labels)};
}

HnnModel::HnnModel(ModelConfig config) : config_(std::move(config)) {
  if (config_.d_in == 0 || config_.d_emb == 0) throw ConfigurationError("model dimensions must be positive");
  if (config_.n_classes < 2) throw ConfigurationError("need at least two classes");
  if (config_.clip && !(config_.clip_radius > 0.0)) throw ConfigurationError("clip radius must be positive");
  auto add = [this](std::string name, Shape shape) {
    layout_.push_back({std::move(name), n_params_, shape});
    n_params_ += shape_numel(shape);
  };
  std::size_t prev = config_.d_in;
  for (std::size_t i = 0; i < config_.widths.size(); ++i) {
    const std::size_t w = config_.widths[i];
    if (w == 0) throw ConfigurationError("extractor widths must be positive");
    add("W" + std::to_string(i + 1), {w, prev});
    add("b" + std::to_string(i + 1), {1, w});
    prev = w;
  }
  add("A", {config_.d_emb, prev});
  add("b", {1, config_.d_emb});
  add("a_mlr", {config_.n_classes, config_.d_emb});
  add("b_mlr", {config_.n_classes, config_.d_emb});
}

const ParamBlock& HnnModel::block(const std::string& name) const {
  for (const auto& b : layout_) {
    if (b.name == name) return b;
  }
  throw ContractViolation("unknown parameter block " + name);
}

std::size_t HnnModel::feature_width() const {
  return config_.widths.empty() ? config_.d_in : config_.widths.back();
}

ad::Var HnnModel::param(const ad::Var& w, const std::string& name) const {
  if (w.numel() != n_params_) {
    throw ContractViolation("parameter vector has " + std::to_string(w.numel()) + " entries, model expects " +
                            std::to_string(n_params_));
  }
  const auto& b = block(name);
  return ad::slice(w, b.offset, b.shape);
}

Tensor HnnModel::init_params(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  Tensor w(Shape{n_params_}, 0.0);
  auto fill = [&](const ParamBlock& b, double sigma) {
    std::normal_distribution<double> nd(0.0, sigma);
    for (std::size_t i = 0; i < shape_numel(b.shape); ++i) w[b.offset + i] = nd(rng);
  };
  for (const auto& b : layout_) {
    if (b.name[0] == 'W' || b.name == "A") {
      fill(b, config_.init_scale / std::sqrt(static_cast<double>(b.shape[1])));
    } else if (b.name == "a_mlr") {
      fill(b, 1.0 / std::sqrt(static_cast<double>(b.shape[1])));
    } else if (b.name == "b_mlr") {
      fill(b, 0.01);
    }
  }
  return w;
}

ad::Var HnnModel::features(const ad::Var& w, const Tensor& inputs) const {
  if (inputs.rank() != 2 || inputs.cols() != config_.d_in) {
    throw ContractViolation("inputs must be (n," + std::to_string(config_.d_in) + "), got " +
                            shape_to_string(inputs.shape()));
  }
  ad::Var h = ad::constant(inputs);
  for (std::size_t i = 0; i < config_.widths.size(); ++i) {
    const auto W = param(w, "W" + std::to_string(i + 1));
    const auto b = param(w, "b" + std::to_string(i + 1));
    h = ad::tanh(ad::matmul(h, ad::transpose(W)) + b);
  }
  return h;
}

ad::Var HnnModel::tangent_features(const ad::Var& w, const Tensor& inputs, double c) const {
  ad::Var h = features(w, inputs);
  if (config_.clip) h = geo::batched::clip(h, config_.clip_radius);
  const auto x = geo::batched::expmap0(h, c);
  return ad::matmul(geo::batched::logmap0(x, c), ad::transpose(param(w, "A")));
}

ad::Var HnnModel::embed(const ad::Var& w, const Tensor& inputs, double c) const {
  geo::require_curvature(c);
  const auto u = tangent_features(w, inputs, c);
  const auto bias = geo::batched::expmap0(param(w, "b"), c);
  return geo::batched::mobius_add(geo::batched::expmap0(u, c), bias, c);
}

ad::Var HnnModel::logits(const ad::Var& w, const ad::Var& points, double c) const {
  geo::require_curvature(c);
  const std::size_t d = config_.d_emb;
  const auto& ab = block("a_mlr");
  const auto& bb = block("b_mlr");
  const double sc = std::sqrt(c);
  std::vector<ad::Var> cols;
  cols.reserve(config_.n_classes);
  for (std::size_t k = 0; k < config_.n_classes; ++k) {
    const auto a = ad::slice(w, ab.offset + k * d, {1, d});
    const auto p = geo::batched::expmap0(ad::slice(w, bb.offset + k * d, {1, d}), c);
    const auto an = ad::norm(a);
    if (an.item() < 1e-8) throw DomainError("MLR normal vector norm below 1e-8 for class " + std::to_string(k));
    const auto z = geo::batched::mobius_add(-p, points, c);
    const auto den = 1.0 - c * ad::row_sums(ad::square(z));
    for (double v : den.value().data()) {
      if (v < 1e-10) throw BoundaryError("MLR Möbius difference at the ball boundary");
    }
    const auto lambda = 2.0 / (1.0 - c * ad::sum(ad::square(p)));
    const auto arg = (2.0 * sc) * ad::row_sums(z * a) / (den * an);
    cols.push_back(lambda * an / sc * ad::asinh(arg));
  }
  return ad::concat_cols(cols);
}

ad::Var cross_entropy(const ad::Var& logits, const std::vector<int>& labels) {
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (n != labels.size()) throw ContractViolation("label count does not match logits");
  Tensor m(Shape{n, 1}), onehot(Shape{n, k}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits.value()[i * k];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.value()[i * k + j]);
    m[i] = mx;
    onehot[i * k + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  const auto mv = ad::constant(m);
  const auto lse = ad::log(ad::row_sums(ad::exp(logits - mv))) + mv;
  const auto picked = ad::row_sums(logits * ad::constant(onehot));
  return ad::sum_canonical(lse - picked) / static_cast<double>(n);
}

ad::Var HnnModel::loss(const ad::Var& w, const Batch& batch, double c) const {
  validate_batch(batch, config_.d_in, config_.n_classes);
  auto l = cross_entropy(logits(w, embed(w, batch.inputs, c), c), batch.labels);
  if (config_.weight_decay > 0.0) l = l + (0.5 * config_.weight_decay) * ad::dot(w, w);
  return l;
}

CurvedFn HnnModel::loss_fn(const Batch& batch) const {
  auto data = std::make_shared<const Batch>(batch);
  auto model = std::make_shared<const HnnModel>(*this);
  return [model, data](const ad::Var& w, double c) { return model->loss(w, *data, c); };
}

int argmax_lowest(std::span<const double> row) {
  int best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  }
  return best;
}

std::vector<int> HnnModel::predict(const Tensor& w, const Tensor& inputs, double c) const {
  ad::NoGradGuard guard;
  const auto wv = ad::constant(w);
  const auto l = logits(wv, embed(wv, inputs, c), c).value();
  const std::size_t k = config_.n_classes;
  std::vector<int> out(l.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax_lowest(l.data().subspan(i * k, k));
  return out;
}

double HnnModel::accuracy(const Tensor& w, const Batch& batch, double c) const {
  const auto pred = predict(w, batch.inputs, c);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == batch.labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

namespace {

Tensor block_value(const Tensor& w, const ParamBlock& b) {
  const auto first = w.storage().begin() + static_cast<std::ptrdiff_t>(b.offset);
  return Tensor(b.shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(shape_numel(b.shape))));
}

}  // namespace

HnnParams HnnModel::unpack(const Tensor& w, double c) const {
  if (w.numel() != n_params_) throw ContractViolation("parameter vector length mismatch");
  std::vector<Tensor> ext;
  for (std::size_t i = 0; i < config_.widths.size(); ++i) {
    ext.push_back(block_value(w, block("W" + std::to_string(i + 1))));
    ext.push_back(block_value(w, block("b" + std::to_string(i + 1))));
  }
  const std::size_t d = config_.d_emb;
  const Tensor am = block_value(w, block("a_mlr"));
  const Tensor bm = block_value(w, block("b_mlr"));
  std::vector<Tensor> normals;
  std::vector<geo::BallPoint> shifts;
  for (std::size_t k = 0; k < config_.n_classes; ++k) {
    normals.push_back(am.row(k));
    shifts.push_back(geo::expmap0(bm.row(k), c));
  }
  return HnnParams{std::move(ext), block_value(w, block("A")),
                   geo::expmap0(block_value(w, block("b")).reshaped({d}), c), std::move(normals),
                   std::move(shifts)};
}

Tensor HnnModel::pack(const HnnParams& p) const {
  Tensor w(Shape{n_params_}, 0.0);
  auto put = [&](const std::string& name, const Tensor& t, std::size_t row_offset = 0) {
    const auto& b = block(name);
    for (std::size_t i = 0; i < t.numel(); ++i) w[b.offset + row_offset + i] = t[i];
  };
  if (p.extractor_weights.size() != 2 * config_.widths.size()) {
    throw ContractViolation("extractor weight count does not match the model");
  }
  for (std::size_t i = 0; i < config_.widths.size(); ++i) {
    put("W" + std::to_string(i + 1), p.extractor_weights[2 * i]);
    put("b" + std::to_string(i + 1), p.extractor_weights[2 * i + 1]);
  }
  put("A", p.a);
  put("b", geo::logmap0(p.b));
  for (std::size_t k = 0; k < config_.n_classes; ++k) {
    put("a_mlr", p.mlr_normals.at(k), k * config_.d_emb);
    put("b_mlr", geo::logmap0(p.mlr_shifts.at(k)), k * config_.d_emb);
  }
  return w;
}

namespace {

constexpr const char* kCheckpointHeader = "HYPERCURV-CKPT-1";

void write_entry(std::ostream& os, const std::string& key, const Shape& shape, const std::vector<double>& values) {
  os << key << ' ' << shape.size();
  for (auto d : shape) os << ' ' << d;
  os << '\n';
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", values[i]);
    os << (i ? " " : "") << buf;
  }
  os << '\n';
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write checkpoint " + path);
  const auto& m = ckpt.model;
  os << kCheckpointHeader << '\n';
  write_entry(os, "config.d_in", {1}, {static_cast<double>(m.d_in)});
  write_entry(os, "config.n_classes", {1}, {static_cast<double>(m.n_classes)});
  std::vector<double> widths(m.widths.begin(), m.widths.end());
  if (widths.empty()) {
    write_entry(os, "config.widths", {}, {0.0});
  } else {
    write_entry(os, "config.widths", {widths.size()}, widths);
  }
  write_entry(os, "config.d_emb", {1}, {static_cast<double>(m.d_emb)});
  write_entry(os, "config.clip", {1}, {m.clip ? 1.0 : 0.0});
  write_entry(os, "config.clip_radius", {1}, {m.clip_radius});
  write_entry(os, "config.weight_decay", {1}, {m.weight_decay});
  write_entry(os, "curvature", {1}, {ckpt.curvature});
  const HnnModel model(m);
  for (const auto& b : model.layout()) {
    const auto first = ckpt.params.storage().begin() + static_cast<std::ptrdiff_t>(b.offset);
    write_entry(os, "param." + b.name, b.shape,
                std::vector<double>(first, first + static_cast<std::ptrdiff_t>(shape_numel(b.shape))));
  }
  if (!os) throw Error("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointHeader) {
    throw ParseError("checkpoint " + path + " lacks the " + std::string(kCheckpointHeader) + " header");
  }
  std::map<std::string, std::pair<Shape, std::vector<double>>> entries;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream hs(line);
    std::string key;
    std::size_t nd = 0;
    if (!(hs >> key >> nd) || nd > 2) throw ParseError("malformed checkpoint entry header: " + line);
    Shape shape(nd);
    for (auto& d : shape) {
      if (!(hs >> d)) throw ParseError("malformed shape for " + key);
    }
    std::string values_line;
    if (!std::getline(is, values_line)) throw ParseError("missing values for " + key);
    std::istringstream vs(values_line);
    std::vector<double> values;
    double v;
    while (vs >> v) values.push_back(v);
    if (values.size() != shape_numel(shape)) throw ParseError("value count mismatch for " + key);
    entries[key] = {std::move(shape), std::move(values)};
  }
  auto get = [&](const std::string& key) -> const std::vector<double>& {
    auto it = entries.find(key);
    if (it == entries.end()) throw ParseError("checkpoint missing key " + key);
    return it->second.second;
  };
  Checkpoint ck;
  ck.model.d_in = static_cast<std::size_t>(get("config.d_in")[0]);
  ck.model.n_classes = static_cast<std::size_t>(get("config.n_classes")[0]);
  ck.model.widths.clear();
  const auto& widths = get("config.widths");
  if (!entries.at("config.widths").first.empty()) {
    for (double w : widths) ck.model.widths.push_back(static_cast<std::size_t>(w));
  }
  ck.model.d_emb = static_cast<std::size_t>(get("config.d_emb")[0]);
  ck.model.clip = get("config.clip")[0] != 0.0;
  ck.model.clip_radius = get("config.clip_radius")[0];
  ck.model.weight_decay = get("config.weight_decay")[0];
  ck.curvature = get("curvature")[0];
  const HnnModel model(ck.model);
  ck.params = Tensor(Shape{model.num_params()}, 0.0);
  for (const auto& b : model.layout()) {
    const auto& vals = get("param." + b.name);
    if (entries.at("param." + b.name).first != b.shape) throw ParseError("shape mismatch for param." + b.name);
    for (std::size_t i = 0; i < vals.size(); ++i) ck.params[b.offset + i] = vals[i];
  }
  return ck;
}

}  // namespace hypercurv

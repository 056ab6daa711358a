#include "hypercurv/harness/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "hypercurv/error.hpp"
#include "json.hpp"

namespace hypercurv::harness {

using nlohmann::json;

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

Dataset load_dataset(const DataConfig& d) {
  Dataset out = d.source == "csv" ? load_csv(d.path, d.label_column) : gen_tree_dataset(d.tree);
  out.validate(true);
  return out;
}

TrainingOutcome run_training(const RunConfig& cfg, const TelemetrySink& sink) {
  cfg.validate();
  const Dataset data = load_dataset(cfg.data);
  Split split = split_dataset(data, cfg.bilevel.train_fraction, cfg.bilevel.val_fraction, cfg.seed);
  const ModelConfig mc = cfg.model_config(data.dim(), data.n_classes());
  const HnnModel model(mc);
  const Batch train = split.train.batch(), val = split.val.batch(), test = split.test.batch();
  const Problem p = make_problem(model, train, val);
  RunResult result = run_algorithm1(p, model.init_params(cfg.seed), cfg.curvature.init, cfg.effective_bilevel(), sink);
  const double c = result.state.c();
  const Tensor& w = result.w;
  const AccuracyFn acc = [&](const Tensor& v) { return model.accuracy(v, val, c); };
  SharpnessReport report =
      sharpness_report(at_curvature(p.train_loss, c), w, cfg.sharpness, result.scale, cfg.seed, acc);
  const double tr = model.accuracy(w, train, c), va = model.accuracy(w, val, c);
  const double te = test.size() ? model.accuracy(w, test, c) : 0.0;
  return {mc, std::move(split), std::move(result), std::move(report), tr, va, te};
}

std::string summary_json(const RunConfig& cfg, const TrainingOutcome& o) {
  json j;
  j["mode"] = to_string(cfg.mode);
  j["final_c"] = o.result.state.c();
  j["initial_c"] = cfg.curvature.init;
  j["outer_iters"] = o.result.telemetry.size();
  j["final_F"] = o.result.telemetry.empty() ? json(nullptr) : json(o.result.telemetry.back().F);
  j["loss_scale"] = o.result.scale;
  j["train_accuracy"] = o.train_accuracy;
  j["val_accuracy"] = o.val_accuracy;
  j["test_accuracy"] = o.test_accuracy;
  j["sizes"] = {{"train", o.split.train.size()}, {"val", o.split.val.size()}, {"test", o.split.test.size()}};
  j["dataset"] = o.split.train.provenance;
  j["l_sharp"] = o.report.l_sharp;
  j["sn_hat"] = o.report.sn_hat;
  j["top_eig"] = o.report.eigenvalues.empty() ? json(nullptr) : json(o.report.eigenvalues.front());
  json hist = json::array();
  for (const auto& h : o.result.state.history()) hist.push_back({{"iter", h.iter}, {"c", h.c}, {"abs_grad", h.abs_grad}, {"projected_grad", h.projected_grad}});
  j["curvature_history"] = hist;
  return j.dump(2) + "\n";
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw Error("failed to write " + p.string());
}

}  // namespace

void write_training_artifacts(const RunConfig& cfg, const TrainingOutcome& o, const std::string& dir) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  save_checkpoint((root / "checkpoint.txt").string(), {o.model, o.result.w, o.result.state.c()});
  write_text(root / "sharpness_report.json", to_json(o.report));
  write_text(root / "summary.json", summary_json(cfg, o));
}

AblationResult run_ablation(const RunConfig& base, const std::vector<double>& grid,
                            const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigurationError("ablation needs at least one seed");
  AblationResult out;
  const auto cell = [](const std::string& label, std::uint64_t seed, const TrainingOutcome& o) {
    CellMetrics m;
    m.label = label;
    m.seed = seed;
    m.final_c = o.result.state.c();
    m.val_accuracy = o.val_accuracy;
    m.sn_hat = o.report.sn_hat;
    m.l_sharp = o.report.l_sharp;
    m.top_eig = o.report.eigenvalues.empty() ? 0.0 : o.report.eigenvalues.front();
    return m;
  };
  for (std::uint64_t seed : seeds) {
    RunConfig cfg = base;
    cfg.seed = seed;
    cfg.data.tree.seed = seed;
    for (double c : grid) {
      RunConfig fixed = cfg;
      fixed.mode = Mode::FixedCurvature;
      fixed.curvature.init = c;
      fixed.curvature.min = std::min(fixed.curvature.min, c);
      fixed.curvature.max = std::max(fixed.curvature.max, c);
      out.cells.push_back(cell(format_real(c), seed, run_training(fixed)));
    }
    RunConfig learn = cfg;
    learn.mode = Mode::CurvatureLearning;
    TrainingOutcome o = run_training(learn);
    out.cells.push_back(cell("learned", seed, o));
    out.learned.push_back(std::move(o.result));
  }
  return out;
}

std::string ablation_csv(const AblationResult& r) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const CellMetrics*>> by_label;
  for (const auto& c : r.cells) {
    if (!by_label.count(c.label)) order.push_back(c.label);
    by_label[c.label].push_back(&c);
  }
  std::ostringstream os;
  os << "curvature_or_mode,val_accuracy,sn_hat,l_sharp,top_eig\n";
  for (const auto& label : order) {
    const auto& cs = by_label[label];
    double acc = 0, sn = 0, ls = 0, eig = 0;
    for (const auto* c : cs) {
      acc += c->val_accuracy;
      sn += c->sn_hat;
      ls += c->l_sharp;
      eig += c->top_eig;
    }
    const double n = static_cast<double>(cs.size());
    os << label << ',' << format_real(acc / n) << ',' << format_real(sn / n) << ',' << format_real(ls / n) << ','
       << format_real(eig / n) << '\n';
  }
  return os.str();
}

}  // namespace hypercurv::harness

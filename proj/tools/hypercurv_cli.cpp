#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hypercurv/error.hpp"
#include "hypercurv/harness/config.hpp"
#include "hypercurv/harness/dataset.hpp"
#include "hypercurv/harness/experiment.hpp"
#include "hypercurv/harness/hyperbolicity.hpp"
#include "hypercurv/lipschitz.hpp"
#include "json.hpp"

using namespace hypercurv;
using namespace hypercurv::harness;
using nlohmann::json;

namespace {

constexpr int kRunFailure = 1;
constexpr int kBadInput = 2;

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw Error("failed to write " + path);
}

int cmd_train(const std::string& config_path, const std::string& out_override) {
  RunConfig cfg = load_config(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  write_or_print((dir / "config.json").string(), serialize_config(cfg));
  std::ofstream tele(dir / "telemetry.jsonl", std::ios::binary);
  const TelemetrySink sink = [&](const TelemetryRecord& r) { tele << to_json_line(r) << '\n' << std::flush; };
  try {
    const TrainingOutcome o = run_training(cfg, sink);
    write_training_artifacts(cfg, o, cfg.output_dir);
    std::cout << "final c " << format_real(o.result.state.c()) << ", val accuracy " << format_real(o.val_accuracy)
              << ", l_sharp " << format_real(o.report.l_sharp) << "\n";
  } catch (const RunAborted& e) {
    const Dataset d = load_dataset(cfg.data);
    save_checkpoint((dir / "checkpoint.txt").string(), {cfg.model_config(d.dim(), d.n_classes()), e.w, e.c});
    std::cerr << "run aborted: " << e.what() << "\n";
    return kRunFailure;
  }
  return 0;
}

int cmd_verify(std::size_t samples, std::uint64_t seed, const std::vector<double>& curvatures,
               const std::string& form_name, const std::string& out) {
  std::vector<lip::Form> forms;
  if (form_name == "general" || form_name == "both") forms.push_back(lip::Form::General);
  if (form_name == "constrained" || form_name == "both") forms.push_back(lip::Form::Constrained);
  if (forms.empty()) throw ConfigurationError("--form: expected general, constrained or both");
  std::vector<lip::CertificateReport> reports;
  std::size_t violations = 0;
  for (double c : curvatures) {
    for (lip::Form f : forms) {
      for (lip::Theorem t : lip::all_theorems()) {
        lip::SamplerConfig s;
        s.c = c;
        s.seed = seed;
        reports.push_back(lip::verify_inequality(t, f, s, samples));
        violations += reports.back().violations;
      }
    }
  }
  json j;
  j["samples_per_cell"] = samples;
  j["seed"] = seed;
  j["total_violations"] = violations;
  j["reports"] = json::parse(lip::to_json(reports));
  write_or_print(out, j.dump(2) + "\n");
  if (violations) std::cerr << violations << " certificate violations\n";
  return violations ? kRunFailure : 0;
}

int cmd_sharpness(const std::string& ckpt_path, const std::string& config_path, double scale_override,
                  const std::string& out) {
  const RunConfig cfg = load_config(config_path);
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const Dataset data = load_dataset(cfg.data);
  const Split split = split_dataset(data, cfg.bilevel.train_fraction, cfg.bilevel.val_fraction, cfg.seed);
  const HnnModel model(ck.model);
  const Batch train = split.train.batch(), val = split.val.batch();
  validate_batch(train, ck.model.d_in, ck.model.n_classes);
  const ScalarFn loss = at_curvature(model.loss_fn(train), ck.curvature);
  const double scale = scale_override > 0.0 ? scale_override : loss_scale(norm(grad(loss, ck.params)));
  const AccuracyFn acc = [&](const Tensor& w) { return model.accuracy(w, val, ck.curvature); };
  write_or_print(out, to_json(sharpness_report(loss, ck.params, cfg.sharpness, scale, cfg.seed, acc)));
  return 0;
}

int cmd_hyperbolicity(const std::string& path, const std::string& label_column, std::size_t quadruples,
                      std::uint64_t seed) {
  const Dataset d = load_csv(path, label_column);
  const DeltaEstimate e = delta_from_distances(euclidean_distances(d.features), quadruples, seed);
  json j;
  j["points"] = d.size();
  j["quadruples"] = quadruples;
  j["seed"] = seed;
  j["delta"] = e.delta;
  j["max_distance"] = e.max_distance;
  j["relative_delta"] = e.relative;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
               const std::vector<double>& grid, const std::string& out, const std::string& cells_out) {
  const RunConfig cfg = load_config(config_path);
  const AblationResult r = run_ablation(cfg, grid, seeds);
  write_or_print(out, ablation_csv(r));
  if (!cells_out.empty()) {
    std::ostringstream os;
    os << "seed,curvature_or_mode,final_c,val_accuracy,sn_hat,l_sharp,top_eig\n";
    for (const auto& c : r.cells) {
      os << c.seed << ',' << c.label << ',' << format_real(c.final_c) << ',' << format_real(c.val_accuracy) << ','
         << format_real(c.sn_hat) << ',' << format_real(c.l_sharp) << ',' << format_real(c.top_eig) << '\n';
    }
    write_or_print(cells_out, os.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curvature-learning hyperbolic networks: training, sharpness and certificate tools"};
  app.require_subcommand(1);

  std::string config, out, out_dir, ckpt, csv_path, label_column = "label", form = "both", cells_out;
  std::size_t samples = 2000, quadruples = kDefaultQuadruples;
  std::uint64_t seed = 0;
  double scale = 0.0;
  std::vector<double> curvatures{1e-3, 1e-1, 1.0};
  std::vector<double> grid = kAblationGrid;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  TreeSpec tree;

  auto* train = app.add_subcommand("train", "Train per a run config");
  train->add_option("--config", config, "Run config JSON")->required();
  train->add_option("--output-dir", out_dir, "Overrides output_dir from the config");

  auto* verify = app.add_subcommand("verify-lipschitz", "Sample-check every Lipschitz certificate");
  verify->add_option("--samples", samples, "Samples per (curvature, form, certificate) cell");
  verify->add_option("--seed", seed);
  verify->add_option("--curvatures", curvatures)->delimiter(',');
  verify->add_option("--form", form, "general, constrained or both");
  verify->add_option("-o,--output", out, "Report path (stdout if omitted)");

  auto* sharp = app.add_subcommand("sharpness-report", "Sharpness measures for a checkpoint");
  sharp->add_option("--checkpoint", ckpt)->required();
  sharp->add_option("--config", config, "Run config naming the data and sharpness settings")->required();
  sharp->add_option("--loss-scale", scale, "Scale for the sharpness measure (default from the gradient)");
  sharp->add_option("-o,--output", out);

  auto* hyp = app.add_subcommand("hyperbolicity", "Relative four-point delta of a CSV dataset");
  hyp->add_option("csv", csv_path)->required();
  hyp->add_option("--label-column", label_column);
  hyp->add_option("--quadruples", quadruples);
  hyp->add_option("--seed", seed);

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic tree dataset as CSV");
  gen->add_option("--depth", tree.depth);
  gen->add_option("--branching", tree.branching);
  gen->add_option("--noise-sigma", tree.noise_sigma);
  gen->add_option("--d-in", tree.d_in);
  gen->add_option("--samples-per-leaf", tree.samples_per_leaf);
  gen->add_option("--seed", tree.seed);
  gen->add_option("-o,--output", out)->required();

  auto* abl = app.add_subcommand("ablate-curvature", "Fixed-curvature grid against a curvature-learning run");
  abl->add_option("--config", config)->required();
  abl->add_option("--seeds", seeds)->delimiter(',');
  abl->add_option("--grid", grid)->delimiter(',');
  abl->add_option("-o,--output", out, "Comparison table (stdout if omitted)");
  abl->add_option("--cells", cells_out, "Optional per-seed table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kBadInput;
  }

  try {
    if (*train) return cmd_train(config, out_dir);
    if (*verify) return cmd_verify(samples, seed, curvatures, form, out);
    if (*sharp) return cmd_sharpness(ckpt, config, scale, out);
    if (*hyp) return cmd_hyperbolicity(csv_path, label_column, quadruples, seed);
    if (*gen) {
      save_csv(gen_tree_dataset(tree), out);
      return 0;
    }
    if (*abl) return cmd_ablate(config, seeds, grid, out, cells_out);
  } catch (const ConfigurationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kBadInput;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailure;
  }
  return kBadInput;
}

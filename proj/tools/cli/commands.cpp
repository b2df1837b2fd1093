#include "commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cite/checkpoint.hpp"
#include "cite/gradient_suite.hpp"
#include "cite/protocol.hpp"
#include "config.hpp"

namespace cite::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidSpec:
    case ErrorCode::kSpecDatasetMismatch:
    case ErrorCode::kDegenerateSplit:
      return kExitConfig;
    case ErrorCode::kIo:
    case ErrorCode::kSchema:
    case ErrorCode::kChecksumMismatch:
    case ErrorCode::kFormatVersionMismatch:
      return kExitIo;
    default:
      return kExitFailure;
  }
}

namespace {

std::string join_ids(const std::vector<std::size_t>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "," : "") + std::to_string(ids[i]);
  return s;
}

std::vector<std::size_t> parse_ids(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorCode::kSchema, "bad class id '" + item + "' in split manifest");
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIo, "cannot write " + path.string());
  f << text;
  f.flush();
  if (!f) fail(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<double> parse_alphas(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorCode::kConfig, "bad alpha '" + item + "'");
    }
    if (!(out.back() >= 0.0 && out.back() <= 1.0)) fail(ErrorCode::kConfig, "alpha outside [0, 1]: " + item);
  }
  if (out.empty()) fail(ErrorCode::kConfig, "--alpha needs at least one value");
  return out;
}

void check_against_spec(const DataDir& data, const SynthSpec& spec) {
  for (const auto& ds : data.domains) {
    if (ds.n_classes != spec.n_classes || ds.features.cols() != spec.feature_dim)
      fail(ErrorCode::kSpecDatasetMismatch, "data directory was generated with different data.n_classes or "
                                            "data.feature_dim than the current config");
  }
}

SplitSpec split_for(const RunConfig& cfg, const DataDir& data) {
  return make_split_spec(cfg.eval.protocol, data.split, data.domains.front().n_classes, cfg.eval.train_domain,
                         cfg.eval.test_domain);
}

/// Zero-shot endpoint with W built from the task's base prompts when the
/// checkpoint has none.
Checkpoint zero_shot_for(const Checkpoint& zs, const SplitSpec& spec, const DataDir& data) {
  if (zs.classifier.weights.rows() != 0) return zs;
  const Vocabulary vocab(data.domains.front().n_classes);
  return with_classifier(zs, task_prompts(vocab, spec.base_classes));
}

std::string trace_csv(const std::vector<StepRecord>& trace) {
  std::string s = "step,epoch,batch,total,dva,scl,vld\n";
  char line[256];
  for (const auto& r : trace) {
    std::snprintf(line, sizeof(line), "%zu,%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", r.step, r.epoch, r.batch,
                  r.loss.total, r.loss.dva, r.loss.scl, r.loss.vld);
    s += line;
  }
  return s;
}

struct Common {
  std::string config_file;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_file, "configuration file (key = value lines)");
    app->add_option("--set", sets, "override one config key, e.g. --set train.epochs=5 (repeatable)")
        ->allow_extra_args(false);
    app->footer(describe_keys());
  }
  RunConfig load() const { return load_run_config(config_file, sets); }
};

int cmd_gen(const Common& common, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = common.load();
  if (!fs::is_directory(out_dir)) fail(ErrorCode::kIo, "output directory does not exist: " + out_dir);
  const auto domains = generate(cfg.data);
  const ClassSplit split = split_base_new(cfg.data.n_classes, cfg.data.base_fraction, cfg.data.seed);
  write_data_dir(out_dir, domains, split, cfg.data.seed);
  out << "wrote " << domains.size() << " domains (" << domains.front().rows() << " rows each) to " << out_dir << "\n";
  out << "base classes: " << join_ids(split.base) << "\n";
  out << "new classes:  " << join_ids(split.novel) << "\n";
  return kExitOk;
}

int cmd_pretrain(const Common& common, const std::string& out_file, std::ostream& out) {
  const RunConfig cfg = common.load();
  const Checkpoint c = pretrain(cfg.data, cfg.pretrain);
  save_checkpoint(c, out_file);
  out << "pre-trained " << c.step << " steps, wrote " << out_file << "\n";
  return kExitOk;
}

struct FinetuneArgs {
  std::string data, init, out, trace, ablate;
};

int cmd_finetune(const Common& common, const FinetuneArgs& a, std::ostream& out) {
  RunConfig cfg = common.load();
  if (!a.ablate.empty()) {
    auto& l = cfg.train.loss;
    if (a.ablate == "dva") {
      l.enable_dva = true;
      l.enable_scl = l.enable_vld = false;
      l.lambda = l.eta = 0.0;
    } else if (a.ablate == "dva+scl") {
      l.enable_dva = l.enable_scl = true;
      l.enable_vld = false;
      l.eta = 0.0;
    } else if (a.ablate == "full") {
      l.enable_dva = l.enable_scl = l.enable_vld = true;
    } else {
      fail(ErrorCode::kConfig, "--ablate must be dva, dva+scl or full");
    }
  }
  const DataDir data = read_data_dir(a.data);
  check_against_spec(data, cfg.data);
  const SplitSpec spec = split_for(cfg, data);
  const TrainingSet set = build_training_set(spec, data.domains, cfg.train.shots, cfg.train.seed);

  Checkpoint init = a.init.empty() ? pretrain(cfg.data, cfg.pretrain) : load_checkpoint(a.init);
  if (init.classifier.weights.rows() == 0) init = with_classifier(init, set.class_prompts);

  const std::string label = objective_label(cfg.train.loss);
  out << "objective: " << label << "\n";
  const FinetuneResult r = finetune(init, set, cfg.train);
  save_checkpoint(r.checkpoint, a.out);
  if (!a.trace.empty()) write_text(a.trace, trace_csv(r.trace));

  char line[160];
  std::snprintf(line, sizeof(line), "%s: %zu steps (%zu batches/epoch), final loss %.4f, train accuracy %.2f\n",
                label.c_str(), r.trace.size(), r.batches_per_epoch, r.trace.empty() ? 0.0 : r.trace.back().loss.total,
                classifier_accuracy(r.checkpoint, set));
  out << line;
  return kExitOk;
}

struct EvalArgs {
  std::string data, zs, ft, protocol, alphas, out;
};

int cmd_eval(const Common& common, EvalArgs a, bool sweep, std::ostream& out) {
  RunConfig cfg = common.load();
  if (!a.protocol.empty()) cfg.eval.protocol = parse_protocol(a.protocol);
  const DataDir data = read_data_dir(a.data);
  const SplitSpec spec = split_for(cfg, data);

  const Checkpoint zs = zero_shot_for(load_checkpoint(a.zs), spec, data);
  std::vector<double> alphas;
  if (a.ft.empty()) {
    if (!a.alphas.empty() && parse_alphas(a.alphas) != std::vector<double>{0.0})
      fail(ErrorCode::kConfig, "without --ft only alpha 0 (the zero-shot model) can be evaluated");
    alphas = {0.0};
  } else if (!a.alphas.empty()) {
    alphas = parse_alphas(a.alphas);
  } else if (sweep) {
    for (int i = 0; i <= 10; ++i) alphas.push_back(i / 10.0);
  } else {
    alphas = {cfg.ensemble.alpha};
  }

  std::vector<MetricsReport> reports;
  const Checkpoint ft = a.ft.empty() ? zs : load_checkpoint(a.ft);
  for (double alpha : alphas) {
    EnsembleConfig ens = cfg.ensemble;
    ens.alpha = alpha;
    const Checkpoint model = a.ft.empty() ? zs : interpolate_params(ft, zs, ens);
    MetricsReport r = evaluate(model, spec, data.domains, cfg.eval.options);
    r.alpha = alpha;
    r.seed = cfg.train.seed;
    reports.push_back(std::move(r));
  }

  print_metrics_table(out, reports);
  if (!a.out.empty()) {
    std::ostringstream csv;
    write_metrics_csv(csv, reports);
    write_text(a.out, csv.str());
  }
  return kExitOk;
}

int cmd_gradcheck(const Common& common, std::size_t instances, std::uint64_t seed, bool inject_fault,
                  std::ostream& out) {
  const RunConfig cfg = common.load();
  GradientSuiteOptions opts;
  opts.instances = instances;
  opts.seed = seed;
  opts.loss = cfg.train.loss;
  opts.corrupt_analytic = inject_fault;
  bool ok = true;
  char line[96];
  for (const auto& l : run_gradient_suite(opts)) {
    const bool pass = l.max_rel_error < 1e-4;
    ok = ok && pass;
    std::snprintf(line, sizeof(line), "%-6s max_rel_error=%.3e %s\n", l.name.c_str(), l.max_rel_error,
                  pass ? "ok" : "FAIL");
    out << line;
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

std::string objective_label(const LossConfig& loss) {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += "+";
    s += name;
  };
  add(loss.enable_dva, "DVA");
  add(loss.enable_scl, "SCL");
  add(loss.enable_vld, "VLD");
  return s.empty() ? "none" : s;
}

void write_data_dir(const fs::path& dir, const std::vector<SynthDataset>& domains, const ClassSplit& split,
                    std::uint64_t seed) {
  for (const auto& ds : domains) save_dataset(ds, dir / ("domain_" + std::to_string(ds.domain_id) + ".csv"));
  write_text(dir / "split.txt", "version=1\nseed=" + std::to_string(seed) + "\nbase=" + join_ids(split.base) +
                                    "\nnew=" + join_ids(split.novel) + "\n");
}

DataDir read_data_dir(const fs::path& dir) {
  DataDir d;
  const fs::path manifest = dir / "split.txt";
  std::ifstream in(manifest);
  if (!in) fail(ErrorCode::kIo, "cannot read " + manifest.string());
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kSchema, "bad line in split manifest: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"version", "seed", "base", "new"})
    if (!kv.count(key)) fail(ErrorCode::kSchema, std::string("split manifest lacks ") + key);
  if (kv["version"] != "1") fail(ErrorCode::kFormatVersionMismatch, "split manifest version " + kv["version"]);
  d.seed = parse_ids(kv["seed"]).at(0);
  d.split.base = parse_ids(kv["base"]);
  d.split.novel = parse_ids(kv["new"]);

  for (std::size_t i = 0;; ++i) {
    const fs::path p = dir / ("domain_" + std::to_string(i) + ".csv");
    if (!fs::exists(p)) break;
    d.domains.push_back(load_dataset(p));
  }
  if (d.domains.empty()) fail(ErrorCode::kIo, "no domain_<d>.csv files in " + dir.string());
  return d;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot vision-language fine-tuning on synthetic data", args.empty() ? "cite" : args[0]};
  app.require_subcommand(1);
  app.footer("Run '<subcommand> --help' for options and the full config key list.");

  Common common_gen, common_pre, common_ft, common_eval, common_sweep, common_grad;

  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "generate the synthetic multi-domain benchmark");
  common_gen.attach(gen);
  gen->add_option("-o,--out", gen_out, "existing output directory")->required();

  std::string pre_out;
  auto* pre = app.add_subcommand("pretrain", "contrastive pre-training of the zero-shot dual encoder");
  common_pre.attach(pre);
  pre->add_option("-o,--out", pre_out, "checkpoint file to write")->required();

  FinetuneArgs ft_args;
  auto* ft = app.add_subcommand("finetune", "few-shot fine-tuning with the combined objective");
  common_ft.attach(ft);
  ft->add_option("-d,--data", ft_args.data, "directory written by 'gen'")->required();
  ft->add_option("--init", ft_args.init, "zero-shot checkpoint (pre-trained inline when omitted)");
  ft->add_option("-o,--out", ft_args.out, "fine-tuned checkpoint file")->required();
  ft->add_option("--trace", ft_args.trace, "per-step loss CSV");
  ft->add_option("--ablate", ft_args.ablate, "objective preset: dva, dva+scl or full");

  EvalArgs ev_args;
  auto* ev = app.add_subcommand("eval", "evaluate zero-shot, fine-tuned or ensembled weights");
  common_eval.attach(ev);
  ev->add_option("-d,--data", ev_args.data, "directory written by 'gen'")->required();
  ev->add_option("--zs", ev_args.zs, "zero-shot checkpoint")->required();
  ev->add_option("--ft", ev_args.ft, "fine-tuned checkpoint (omit to score the zero-shot model alone)");
  ev->add_option("--protocol", ev_args.protocol, "fsl, bng, dg or cdg (overrides eval.protocol)");
  ev->add_option("--alpha", ev_args.alphas, "comma-separated ensemble weights (default: ensemble.alpha)");
  ev->add_option("-o,--out", ev_args.out, "metrics CSV file");

  EvalArgs sw_args;
  auto* sw = app.add_subcommand("sweep-alpha", "evaluate the ensemble over a grid of alphas");
  common_sweep.attach(sw);
  sw->add_option("-d,--data", sw_args.data, "directory written by 'gen'")->required();
  sw->add_option("--zs", sw_args.zs, "zero-shot checkpoint")->required();
  sw->add_option("--ft", sw_args.ft, "fine-tuned checkpoint")->required();
  sw->add_option("--protocol", sw_args.protocol, "fsl, bng, dg or cdg (overrides eval.protocol)");
  sw->add_option("--alpha", sw_args.alphas, "comma-separated alphas (default: 0,0.1,...,1)");
  sw->add_option("-o,--out", sw_args.out, "metrics CSV file");

  std::size_t instances = 20;
  std::uint64_t grad_seed = 1;
  bool inject_fault = false;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every loss gradient");
  common_grad.attach(gc);
  gc->add_option("--instances", instances, "random instances per loss")->capture_default_str();
  gc->add_option("--seed", grad_seed, "instance seed")->capture_default_str();
  gc->add_flag("--inject-fault", inject_fault)->group("");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen(common_gen, gen_out, out);
    if (pre->parsed()) return cmd_pretrain(common_pre, pre_out, out);
    if (ft->parsed()) return cmd_finetune(common_ft, ft_args, out);
    if (ev->parsed()) return cmd_eval(common_eval, ev_args, false, out);
    if (sw->parsed()) return cmd_eval(common_sweep, sw_args, true, out);
    if (gc->parsed()) return cmd_gradcheck(common_grad, instances, grad_seed, inject_fault, out);
  } catch (const NonFiniteLossError& e) {
    err << "error: non-finite loss at step " << e.step() << " (" << e.what() << ")\n";
    return kExitFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace cite::cli

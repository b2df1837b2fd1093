#include "config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cite/error.hpp"

namespace cite::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that parses back to the same double.
std::string g17(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size())
    fail(ErrorCode::kConfig, key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc{} || res.ptr != v.data() + v.size())
    fail(ErrorCode::kConfig, key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::kConfig, key + ": expected true/false, got '" + v + "'");
}

std::vector<DomainShift> to_domains(const std::string& key, const std::string& v) {
  std::vector<DomainShift> out;
  std::stringstream list(v);
  for (std::string item; std::getline(list, item, ';');) {
    item = trim(item);
    if (item.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream fields(item);
    for (std::string f; std::getline(fields, f, ':');) parts.push_back(trim(f));
    if (parts.size() != 4) fail(ErrorCode::kConfig, key + ": each domain is rotation_seed:angle:shift:noise_scale");
    out.push_back(DomainShift{to_uint(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2]),
                              to_double(key, parts[3])});
  }
  if (out.empty()) fail(ErrorCode::kConfig, key + ": at least one domain is required");
  return out;
}

std::string from_domains(const std::vector<DomainShift>& ds) {
  std::string s;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (i) s += ";";
    s += std::to_string(ds[i].rotation_seed) + ":" + g17(ds[i].rotation_angle) + ":" + g17(ds[i].shift) + ":" +
         g17(ds[i].noise_scale);
  }
  return s;
}

struct Entry {
  const char* doc;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CITE_NUM(path, field, doc_text)                                                                   \
  {                                                                                                       \
    path, Entry {                                                                                         \
      doc_text, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_double(k, v); }, \
          [](const RunConfig& c) { return g17(c.field); }                                                 \
    }                                                                                                     \
  }
#define CITE_UINT(path, field, doc_text)                                                                  \
  {                                                                                                       \
    path, Entry {                                                                                         \
      doc_text, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_uint(k, v); }, \
          [](const RunConfig& c) { return std::to_string(c.field); }                                      \
    }                                                                                                     \
  }
#define CITE_BOOL(path, field, doc_text)                                                                  \
  {                                                                                                       \
    path, Entry {                                                                                         \
      doc_text, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_bool(k, v); }, \
          [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }                      \
    }                                                                                                     \
  }

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> entries = {
      CITE_UINT("data.n_classes", data.n_classes, "number of synthetic classes"),
      CITE_UINT("data.feature_dim", data.feature_dim, "image feature dimension"),
      CITE_UINT("data.per_class", data.per_class, "samples per class per domain (first half is the train pool)"),
      CITE_NUM("data.class_separation", data.class_separation, "radius of the class-centroid sphere"),
      CITE_NUM("data.noise_sigma", data.noise_sigma, "per-coordinate Gaussian noise of the source domain"),
      CITE_NUM("data.base_fraction", data.base_fraction, "fraction of classes assigned to the base split"),
      CITE_UINT("data.seed", data.seed, "generator seed for centroids, samples and the base/new split"),
      {"data.domains",
       Entry{"';'-separated rotation_seed:angle:shift:noise_scale per domain, domain 0 first",
             [](RunConfig& c, const std::string& k, const std::string& v) { c.data.domains = to_domains(k, v); },
             [](const RunConfig& c) { return from_domains(c.data.domains); }}},

      CITE_UINT("pretrain.per_class", pretrain.per_class, "pre-training corpus pairs per class"),
      CITE_NUM("pretrain.caption_noise", pretrain.caption_noise, "fraction of corpus captions relabelled at random"),
      CITE_NUM("pretrain.class_offset", pretrain.class_offset, "distance between corpus and downstream class centres"),
      CITE_UINT("pretrain.epochs", pretrain.epochs, "pre-training epochs"),
      CITE_UINT("pretrain.batch_size", pretrain.batch_size, "pre-training batch size"),
      CITE_NUM("pretrain.lr", pretrain.lr, "pre-training base learning rate (cosine annealed)"),
      CITE_NUM("pretrain.tau", pretrain.tau, "pre-training contrastive temperature"),
      CITE_UINT("pretrain.seed", pretrain.seed, "seed for encoder initialization and the corpus"),

      CITE_UINT("train.shots", train.shots, "few-shot examples per base class"),
      CITE_UINT("train.epochs", train.epochs, "fine-tuning epochs"),
      CITE_UINT("train.batch_size", train.batch_size, "fine-tuning batch size"),
      CITE_NUM("train.lr", train.lr, "fine-tuning base learning rate (large-model recipe: 5e-6)"),
      CITE_UINT("train.seed", train.seed, "seed for few-shot sampling and batch order"),
      CITE_NUM("train.beta1", train.adamw.beta1, "AdamW beta1"),
      CITE_NUM("train.beta2", train.adamw.beta2, "AdamW beta2"),
      CITE_NUM("train.eps", train.adamw.eps, "AdamW epsilon"),
      CITE_NUM("train.weight_decay", train.adamw.weight_decay, "AdamW decoupled weight decay"),
      {"train.freeze_image",
       Entry{"image tower freezing: none, first:<k> or last:<k>",
             [](RunConfig& c, const std::string&, const std::string& v) { c.train.image_freezing = parse_freezing(v); },
             [](const RunConfig& c) { return to_string(c.train.image_freezing); }}},
      {"train.freeze_text",
       Entry{"text tower freezing: none, first:<k> or last:<k>",
             [](RunConfig& c, const std::string&, const std::string& v) { c.train.text_freezing = parse_freezing(v); },
             [](const RunConfig& c) { return to_string(c.train.text_freezing); }}},
      CITE_BOOL("train.train_classifier", train.train_classifier, "whether W is updated"),
      {"train.max_steps",
       Entry{"stop after this many optimizer steps (empty = full schedule)",
             [](RunConfig& c, const std::string& k, const std::string& v) {
               if (v.empty()) {
                 c.train.max_steps.reset();
               } else {
                 c.train.max_steps = to_uint(k, v);
               }
             },
             [](const RunConfig& c) { return c.train.max_steps ? std::to_string(*c.train.max_steps) : std::string(); }}},

      CITE_NUM("loss.lambda", train.loss.lambda, "weight of the supervised contrastive term"),
      CITE_NUM("loss.eta", train.loss.eta, "weight of the similarity distillation term"),
      CITE_NUM("loss.tau_main", train.loss.tau_main, "temperature of the alignment/contrastive terms and inference"),
      CITE_NUM("loss.tau_vld", train.loss.tau_vld, "temperature of the distillation term"),
      CITE_BOOL("loss.dva", train.loss.enable_dva, "enable the discriminative alignment term"),
      CITE_BOOL("loss.scl", train.loss.enable_scl, "enable the supervised contrastive term"),
      CITE_BOOL("loss.vld", train.loss.enable_vld, "enable the similarity distillation term"),
      CITE_BOOL("loss.vld_symmetric", train.loss.vld_symmetric, "add the text->image distillation direction"),

      CITE_NUM("ensemble.alpha", ensemble.alpha, "weight of the fine-tuned parameters in the ensemble"),
      CITE_BOOL("ensemble.apply_to_text", ensemble.apply_to_text, "interpolate the text tower as well"),

      {"eval.protocol",
       Entry{"fsl, bng, dg or cdg",
             [](RunConfig& c, const std::string&, const std::string& v) { c.eval.protocol = parse_protocol(v); },
             [](const RunConfig& c) { return to_string(c.eval.protocol); }}},
      CITE_UINT("eval.train_domain", eval.train_domain, "domain used for few-shot training"),
      CITE_UINT("eval.test_domain", eval.test_domain, "domain whose held-out rows are scored"),
      CITE_BOOL("eval.joint_candidates", eval.options.joint_candidates, "score against base and new prompts jointly"),
      CITE_BOOL("eval.use_classifier", eval.options.use_classifier_for_base, "score base rows with W instead of prompts"),
  };
  return entries;
}

#undef CITE_NUM
#undef CITE_UINT
#undef CITE_BOOL

}  // namespace

std::vector<ConfigKey> documented_keys() {
  const RunConfig defaults;
  std::vector<ConfigKey> out;
  for (const auto& [name, e] : registry()) out.push_back({name, std::string(e.doc) + " [default: " + e.get(defaults) + "]"});
  return out;
}

std::string describe_keys() {
  std::string s = "Config keys (file lines 'key = value', or --set key=value):\n";
  for (const auto& k : documented_keys()) s += "  " + k.name + "\n      " + k.doc + "\n";
  return s;
}

void apply_setting(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) fail(ErrorCode::kConfig, "expected key=value, got '" + assignment + "'");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const auto it = registry().find(key);
  if (it == registry().end()) fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

void apply_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read config " + path.string());
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_setting(cfg, line);
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

RunConfig load_run_config(const std::string& file, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!file.empty()) apply_file(cfg, file);
  for (const auto& o : overrides) apply_setting(cfg, o);
  try {
    cfg.data.validate();
    cfg.train.validate();
    cfg.ensemble.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  return cfg;
}

std::string dump(const RunConfig& cfg) {
  std::string s;
  for (const auto& [name, e] : registry()) s += name + " = " + e.get(cfg) + "\n";
  return s;
}

}  // namespace cite::cli

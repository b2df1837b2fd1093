#include "cite/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "cite/error.hpp"

namespace cite {

namespace {

constexpr int kDatasetVersion = 1;

std::vector<double> unit_gaussian(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double sq = 0.0;
  for (double& x : v) {
    x = n(rng);
    sq += x * x;
  }
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
  return v;
}

// Rotates `m`'s rows in place by `angle` within disjoint coordinate pairs of
// a seeded permutation, then translates by `shift` along a seeded direction.
void apply_domain(Matrix& m, const DomainShift& d) {
  if (d.rotation_angle == 0.0 && d.shift == 0.0) return;
  const std::size_t dim = m.cols();
  std::mt19937_64 rng(d.rotation_seed);
  std::vector<std::size_t> perm(dim);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::vector<double> direction = unit_gaussian(dim, rng);
  const double c = std::cos(d.rotation_angle);
  const double s = std::sin(d.rotation_angle);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t p = 0; p + 1 < dim; p += 2) {
      const double a = row[perm[p]];
      const double b = row[perm[p + 1]];
      row[perm[p]] = c * a - s * b;
      row[perm[p + 1]] = s * a + c * b;
    }
    for (std::size_t k = 0; k < dim; ++k) row[k] += d.shift * direction[k];
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace

void SynthSpec::validate() const {
  if (n_classes < 2) fail(ErrorCode::kInvalidSpec, "n_classes must be >= 2");
  if (feature_dim < 1) fail(ErrorCode::kInvalidSpec, "feature_dim must be >= 1");
  if (per_class < 2) fail(ErrorCode::kInvalidSpec, "per_class must be >= 2");
  if (!(class_separation > 0.0)) fail(ErrorCode::kInvalidSpec, "class_separation must be > 0");
  if (!(noise_sigma >= 0.0)) fail(ErrorCode::kInvalidSpec, "noise_sigma must be >= 0");
  if (domains.empty()) fail(ErrorCode::kInvalidSpec, "at least one domain is required");
  for (const DomainShift& d : domains)
    if (!(d.noise_scale >= 0.0) || !(d.shift >= 0.0)) fail(ErrorCode::kInvalidSpec, "domain noise/shift must be >= 0");
  if (!(base_fraction > 0.0 && base_fraction < 1.0)) fail(ErrorCode::kInvalidSpec, "base_fraction must be in (0, 1)");
}

Matrix class_centroids(const SynthSpec& spec, std::size_t domain) {
  spec.validate();
  if (domain >= spec.domains.size()) fail(ErrorCode::kInvalidSpec, "domain " + std::to_string(domain) + " not in spec");
  std::mt19937_64 rng(spec.seed);
  Matrix c(spec.n_classes, spec.feature_dim);
  for (std::size_t k = 0; k < spec.n_classes; ++k) {
    const auto dir = unit_gaussian(spec.feature_dim, rng);
    for (std::size_t j = 0; j < spec.feature_dim; ++j) c(k, j) = spec.class_separation * dir[j];
  }
  apply_domain(c, spec.domains[domain]);
  return c;
}

std::vector<SynthDataset> generate(const SynthSpec& spec) {
  spec.validate();
  std::vector<SynthDataset> out;
  for (std::size_t d = 0; d < spec.domains.size(); ++d) {
    const Matrix centroids = class_centroids(spec, d);
    std::seed_seq seq{spec.seed, static_cast<std::uint64_t>(d), std::uint64_t{0xda7a}};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double sigma = spec.noise_sigma * spec.domains[d].noise_scale;

    SynthDataset ds;
    ds.features = Matrix(spec.n_classes * spec.per_class, spec.feature_dim);
    ds.class_ids.reserve(ds.features.rows());
    ds.domain_id = d;
    ds.n_classes = spec.n_classes;
    ds.seed = spec.seed;
    std::size_t r = 0;
    for (std::size_t k = 0; k < spec.n_classes; ++k) {
      for (std::size_t i = 0; i < spec.per_class; ++i, ++r) {
        for (std::size_t j = 0; j < spec.feature_dim; ++j) ds.features(r, j) = centroids(k, j) + sigma * noise(rng);
        ds.class_ids.push_back(k);
      }
    }
    out.push_back(std::move(ds));
  }
  return out;
}

SynthDataset generate_pretraining_corpus(const SynthSpec& spec, std::size_t per_class, double caption_noise,
                                         double class_offset, std::uint64_t seed) {
  spec.validate();
  if (!(caption_noise >= 0.0 && caption_noise <= 1.0)) fail(ErrorCode::kInvalidSpec, "caption_noise must be in [0, 1]");
  if (!(class_offset >= 0.0)) fail(ErrorCode::kInvalidSpec, "class_offset must be >= 0");
  Matrix centroids = class_centroids(spec, 0);
  std::seed_seq seq{spec.seed, seed, std::uint64_t{0x9e7a}};
  std::mt19937_64 rng(seq);
  for (std::size_t k = 0; k < spec.n_classes; ++k) {
    const auto dir = unit_gaussian(spec.feature_dim, rng);
    for (std::size_t j = 0; j < spec.feature_dim; ++j) centroids(k, j) += class_offset * dir[j];
  }
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_class(0, spec.n_classes - 1);

  SynthDataset ds;
  ds.features = Matrix(spec.n_classes * per_class, spec.feature_dim);
  ds.n_classes = spec.n_classes;
  ds.seed = seed;
  std::size_t r = 0;
  for (std::size_t k = 0; k < spec.n_classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i, ++r) {
      for (std::size_t j = 0; j < spec.feature_dim; ++j) ds.features(r, j) = centroids(k, j) + noise(rng);
      ds.class_ids.push_back(coin(rng) < caption_noise ? any_class(rng) : k);
    }
  }
  return ds;
}

ClassSplit split_base_new(std::size_t n_classes, double base_fraction, std::uint64_t seed) {
  const auto n_base = static_cast<std::size_t>(std::llround(base_fraction * static_cast<double>(n_classes)));
  if (n_base == 0 || n_base >= n_classes) {
    fail(ErrorCode::kDegenerateSplit, "base_fraction " + std::to_string(base_fraction) + " leaves an empty side for " +
                                          std::to_string(n_classes) + " classes");
  }
  std::vector<std::size_t> ids(n_classes);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ClassSplit split;
  split.base.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_base));
  split.novel.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_base), ids.end());
  std::sort(split.base.begin(), split.base.end());
  std::sort(split.novel.begin(), split.novel.end());
  return split;
}

RowPartition train_test_rows(const SynthDataset& ds) {
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t r = 0; r < ds.rows(); ++r) by_class[ds.class_ids[r]].push_back(r);
  RowPartition part;
  for (const auto& [cls, rows] : by_class) {
    const std::size_t half = rows.size() / 2;
    part.train.insert(part.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(half));
    part.test.insert(part.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(half), rows.end());
  }
  std::sort(part.train.begin(), part.train.end());
  std::sort(part.test.begin(), part.test.end());
  return part;
}

double nearest_centroid_accuracy(const SynthDataset& ds, const Matrix& centroids) {
  if (ds.rows() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t k = 0; k < centroids.rows(); ++k) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < centroids.cols(); ++j) {
        const double diff = ds.features(r, j) - centroids(k, j);
        d2 += diff * diff;
      }
      if (d2 < best_d) {
        best_d = d2;
        best = k;
      }
    }
    correct += best == ds.class_ids[r] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.rows());
}

void save_dataset(const SynthDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << "version=" << kDatasetVersion << '\n'
      << "rows=" << ds.rows() << '\n'
      << "dim=" << ds.features.cols() << '\n'
      << "classes=" << ds.n_classes << '\n'
      << "domain=" << ds.domain_id << '\n'
      << "seed=" << ds.seed << '\n'
      << '\n';
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    out << ds.class_ids[r];
    for (double v : ds.features.row(r)) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

namespace {

template <typename T>
T parse_number(std::string_view text, const std::string& what) {
  T value{};
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end) fail(ErrorCode::kSchema, "cannot parse " + what + " from '" + std::string(text) + "'");
  return value;
}

}  // namespace

SynthDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());

  std::map<std::string, std::string> header;
  std::string line;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line.empty()) {
      terminated = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kSchema, "header line without '=': " + line);
    header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!terminated) fail(ErrorCode::kSchema, "header is not terminated by a blank line");
  for (const char* key : {"version", "rows", "dim", "classes", "domain", "seed"})
    if (!header.contains(key)) fail(ErrorCode::kSchema, std::string("missing header key '") + key + "'");
  if (header.size() != 6) fail(ErrorCode::kSchema, "unexpected header keys");
  if (parse_number<int>(header["version"], "version") != kDatasetVersion)
    fail(ErrorCode::kSchema, "unsupported dataset version " + header["version"]);

  const auto rows = parse_number<std::size_t>(header["rows"], "rows");
  const auto dim = parse_number<std::size_t>(header["dim"], "dim");
  SynthDataset ds;
  ds.n_classes = parse_number<std::size_t>(header["classes"], "classes");
  ds.domain_id = parse_number<std::size_t>(header["domain"], "domain");
  ds.seed = parse_number<std::uint64_t>(header["seed"], "seed");
  ds.features = Matrix(rows, dim);
  ds.class_ids.reserve(rows);

  std::size_t r = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (r >= rows) fail(ErrorCode::kSchema, "more data rows than the header's rows=" + std::to_string(rows));
    std::string_view rest(line);
    std::size_t field = 0;
    while (true) {
      const auto comma = rest.find(',');
      const std::string_view tok = rest.substr(0, comma);
      if (field == 0) {
        const auto cls = parse_number<std::size_t>(tok, "class id");
        if (cls >= ds.n_classes) fail(ErrorCode::kSchema, "class id out of range at row " + std::to_string(r));
        ds.class_ids.push_back(cls);
      } else {
        if (field > dim) fail(ErrorCode::kSchema, "too many columns at row " + std::to_string(r));
        const double v = parse_number<double>(tok, "feature");
        if (!std::isfinite(v)) fail(ErrorCode::kSchema, "non-finite feature at row " + std::to_string(r));
        ds.features(r, field - 1) = v;
      }
      ++field;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (field != dim + 1) fail(ErrorCode::kSchema, "row " + std::to_string(r) + " has " + std::to_string(field) + " fields");
    ++r;
  }
  if (r != rows) fail(ErrorCode::kSchema, "header says rows=" + std::to_string(rows) + " but file has " + std::to_string(r));
  return ds;
}

}  // namespace cite

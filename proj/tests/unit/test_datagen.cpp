#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cite/datagen.hpp"
#include "support.hpp"

using namespace cite;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cite_datagen_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

bool same_dataset(const SynthDataset& a, const SynthDataset& b) {
  return bit_equal(a.features, b.features) && a.class_ids == b.class_ids && a.domain_id == b.domain_id &&
         a.n_classes == b.n_classes && a.seed == b.seed;
}

}  // namespace

TEST(Generate, ReferenceShape) {
  const SynthSpec spec;
  EXPECT_EQ(spec.n_classes, 10u);
  EXPECT_EQ(spec.feature_dim, 32u);
  EXPECT_EQ(spec.per_class, 64u);
  EXPECT_EQ(spec.class_separation, 6.0);
  EXPECT_EQ(spec.noise_sigma, 1.0);
  EXPECT_EQ(spec.base_fraction, 0.5);
  EXPECT_EQ(spec.seed, 7u);
  const auto domains = generate(spec);
  ASSERT_EQ(domains.size(), 3u);
  for (std::size_t d = 0; d < 3; ++d) {
    EXPECT_EQ(domains[d].domain_id, d);
    EXPECT_EQ(domains[d].rows(), 640u);
    EXPECT_TRUE(domains[d].features.all_finite());
    std::vector<std::size_t> counts(10, 0);
    for (std::size_t c : domains[d].class_ids) ++counts[c];
    for (std::size_t c : counts) EXPECT_EQ(c, 64u);
    // Transforms keep ids in place: rows stay grouped by class.
    EXPECT_EQ(domains[d].class_ids, domains[0].class_ids);
  }
  EXPECT_EQ(domains[0].class_name(4), "class_4");
}

TEST(Generate, CentroidsOnSphere) {
  const SynthSpec spec;
  const Matrix c = class_centroids(spec, 0);
  for (std::size_t k = 0; k < c.rows(); ++k) {
    double s = 0;
    for (double v : c.row(k)) s += v * v;
    EXPECT_NEAR(std::sqrt(s), spec.class_separation, 1e-12);
  }
}

TEST(Generate, NoiselessSamplesSitOnCentroids) {
  SynthSpec spec;
  spec.noise_sigma = 0.0;
  const auto domains = generate(spec);
  for (std::size_t d = 0; d < domains.size(); ++d) {
    const Matrix c = class_centroids(spec, d);
    for (std::size_t r = 0; r < domains[d].rows(); ++r) {
      const std::size_t k = domains[d].class_ids[r];
      for (std::size_t j = 0; j < spec.feature_dim; ++j) EXPECT_EQ(domains[d].features(r, j), c(k, j));
    }
  }
}

TEST(Generate, IdentityDomainMatchesSource) {
  SynthSpec spec;
  spec.domains = {{0, 0.0, 0.0, 1.0}, {99, 0.0, 0.0, 1.0}};
  EXPECT_TRUE(bit_equal(class_centroids(spec, 0), class_centroids(spec, 1)));
}

TEST(Generate, ShiftedDomainsMoveCentroids) {
  const SynthSpec spec;
  EXPECT_GT(max_abs_diff(class_centroids(spec, 0), class_centroids(spec, 2)), 0.5);
}

TEST(Generate, Deterministic) {
  const SynthSpec spec;
  const auto a = generate(spec);
  const auto b = generate(spec);
  for (std::size_t d = 0; d < a.size(); ++d) EXPECT_TRUE(same_dataset(a[d], b[d]));
  SynthSpec other = spec;
  other.seed = 8;
  EXPECT_FALSE(bit_equal(generate(other)[0].features, a[0].features));
}

TEST(Generate, InvalidSpec) {
  auto bad = [](auto mutate) {
    SynthSpec s;
    mutate(s);
    EXPECT_CITE_ERROR(generate(s), ErrorCode::kInvalidSpec);
  };
  bad([](SynthSpec& s) { s.n_classes = 1; });
  bad([](SynthSpec& s) { s.base_fraction = 0.0; });
  bad([](SynthSpec& s) { s.base_fraction = 1.0; });
  bad([](SynthSpec& s) { s.noise_sigma = -1.0; });
  bad([](SynthSpec& s) { s.domains.clear(); });
  bad([](SynthSpec& s) { s.per_class = 1; });
}

TEST(Generate, SeparableWhenRatioAtLeastTen) {
  SynthSpec spec;
  spec.class_separation = 10.0;
  spec.noise_sigma = 1.0;
  const auto d = generate(spec);
  EXPECT_GE(nearest_centroid_accuracy(d[0], class_centroids(spec, 0)), 0.99);
}

TEST(Generate, ReferenceBenchmarkIsLearnable) {
  const SynthSpec spec;
  const auto d = generate(spec);
  EXPECT_GE(nearest_centroid_accuracy(d[0], class_centroids(spec, 0)), 0.99);
}

TEST(PretrainingCorpus, ShapeAndNoise) {
  const SynthSpec spec;
  const SynthDataset clean = generate_pretraining_corpus(spec, 20, 0.0, 5.0, 3);
  ASSERT_EQ(clean.rows(), 200u);
  for (std::size_t r = 0; r < clean.rows(); ++r) EXPECT_EQ(clean.class_ids[r], r / 20);
  const SynthDataset noisy = generate_pretraining_corpus(spec, 20, 0.5, 5.0, 3);
  std::size_t relabelled = 0;
  for (std::size_t r = 0; r < noisy.rows(); ++r) relabelled += noisy.class_ids[r] != r / 20;
  EXPECT_GT(relabelled, 40u);
  EXPECT_LT(relabelled, 140u);
  EXPECT_CITE_ERROR(generate_pretraining_corpus(spec, 20, 1.5, 5.0, 3), ErrorCode::kInvalidSpec);
}

TEST(Split, HalfOfTen) {
  const ClassSplit s = split_base_new(10, 0.5, 7);
  EXPECT_EQ(s.base.size(), 5u);
  EXPECT_EQ(s.novel.size(), 5u);
  const ClassSplit t = split_base_new(10, 0.5, 7);
  EXPECT_EQ(s.base, t.base);
  EXPECT_EQ(s.novel, t.novel);
}

TEST(Split, DisjointCoveringOverManySeeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ClassSplit s = split_base_new(12, 0.4, seed);
    std::set<std::size_t> all(s.base.begin(), s.base.end());
    for (std::size_t c : s.novel) EXPECT_TRUE(all.insert(c).second) << "seed " << seed;
    EXPECT_EQ(all.size(), 12u);
    EXPECT_EQ(*all.rbegin(), 11u);
    EXPECT_FALSE(s.base.empty());
    EXPECT_FALSE(s.novel.empty());
  }
}

TEST(Split, Degenerate) {
  EXPECT_CITE_ERROR(split_base_new(2, 0.1, 0), ErrorCode::kDegenerateSplit);
  EXPECT_CITE_ERROR(split_base_new(3, 0.95, 0), ErrorCode::kDegenerateSplit);
}

TEST(TrainTest, HalvesPerClass) {
  const SynthSpec spec;
  const auto d = generate(spec)[0];
  const RowPartition p = train_test_rows(d);
  EXPECT_EQ(p.train.size(), 320u);
  EXPECT_EQ(p.test.size(), 320u);
  std::set<std::size_t> seen(p.train.begin(), p.train.end());
  for (std::size_t r : p.test) EXPECT_TRUE(seen.insert(r).second);
  EXPECT_EQ(seen.size(), 640u);
}

TEST(DatasetFile, RoundTripIsBitExact) {
  const auto d = generate(SynthSpec{});
  for (const auto& ds : d) {
    const fs::path p = scratch("domain.csv");
    save_dataset(ds, p);
    EXPECT_TRUE(same_dataset(load_dataset(p), ds));
    const fs::path q = scratch("domain_again.csv");
    save_dataset(load_dataset(p), q);
    EXPECT_EQ(slurp(p), slurp(q));
  }
}

TEST(DatasetFile, HeaderDescribesRows) {
  SynthSpec spec;
  spec.per_class = 6;
  spec.feature_dim = 3;
  const auto ds = generate(spec)[1];
  const fs::path p = scratch("small.csv");
  save_dataset(ds, p);
  std::ifstream in(p);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line) && !line.empty()) kv[line.substr(0, line.find('='))] = line.substr(line.find('=') + 1);
  EXPECT_EQ(kv["rows"], "60");
  EXPECT_EQ(kv["dim"], "3");
  EXPECT_EQ(kv["classes"], "10");
  EXPECT_EQ(kv["domain"], "1");
  EXPECT_EQ(kv["seed"], "7");
  EXPECT_EQ(kv.size(), 6u);
  std::size_t data_rows = 0;
  while (std::getline(in, line)) {
    ++data_rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3);
  }
  EXPECT_EQ(data_rows, 60u);
}

TEST(DatasetFile, CorruptionIsSchemaError) {
  SynthSpec spec;
  spec.per_class = 4;
  spec.feature_dim = 2;
  const fs::path p = scratch("corrupt.csv");
  save_dataset(generate(spec)[0], p);
  const std::string good = slurp(p);

  auto expect_schema = [&](std::string text) {
    spit(p, text);
    EXPECT_CITE_ERROR(load_dataset(p), ErrorCode::kSchema);
  };
  std::string s = good;
  expect_schema(s.replace(s.find("rows=40"), 7, "rows=41"));
  s = good;
  expect_schema(s.replace(s.find("version="), 8, "versio:="));
  s = good;
  expect_schema(s.erase(s.find("\n\n"), 1));
  s = good;
  expect_schema(s.replace(s.find("dim=2"), 5, "dim=x"));
  s = good;
  expect_schema(s + "0,1.0\n");
  EXPECT_CITE_ERROR(load_dataset(scratch("missing.csv")), ErrorCode::kIo);
}

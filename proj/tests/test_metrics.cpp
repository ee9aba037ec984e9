#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "tabdar/metrics.hpp"

namespace tabdar::metrics {
namespace {

std::vector<std::string> strs(std::initializer_list<const char*> xs) { return {xs.begin(), xs.end()}; }

RawTable table(std::vector<std::string> header, std::vector<std::vector<std::string>> rows) {
  RawTable t;
  t.header = std::move(header);
  t.rows = std::move(rows);
  return t;
}

TableSchema schema_of(std::initializer_list<std::pair<const char*, ColumnType>> cols) {
  TableSchema s;
  for (const auto& [name, type] : cols) s.columns.push_back({name, type, {}});
  return s;
}

// Continuous x and categorical c from the two-component mixture.
RawTable mixture(std::size_t n, std::uint64_t seed, double shift = 0.0) {
  Rng rng(seed);
  RawTable t;
  t.header = {"c", "x"};
  for (std::size_t i = 0; i < n; ++i) {
    const bool a = uniform01(rng) < 0.5;
    t.rows.push_back({a ? "A" : "B", format_real((a ? -1.0 : 1.0) + 0.5 * standard_normal(rng) + shift)});
  }
  return t;
}

const TableSchema kMixture = schema_of({{"c", ColumnType::Categorical}, {"x", ColumnType::Continuous}});

TEST(Kst, Examples) {
  const std::vector<double> a{1, 2, 3, 4}, b{3, 4, 5, 6};
  EXPECT_DOUBLE_EQ(kst(a, b), 0.5);
  EXPECT_EQ(kst(a, a), 0.0);
  EXPECT_EQ(kst(std::vector<double>{0}, std::vector<double>{1}), 1.0);
  EXPECT_THROW(kst(std::vector<double>{}, a), SchemaError);
}

TEST(Tvd, Examples) {
  EXPECT_DOUBLE_EQ(tvd(strs({"a", "b"}), strs({"a", "a", "a", "b"})), 0.25);
  EXPECT_EQ(tvd(strs({"a", "b", "b"}), strs({"b", "a", "b"})), 0.0);
  EXPECT_EQ(tvd(strs({"a"}), strs({"b", "c"})), 1.0);
}

TEST(Contingency, Examples) {
  const auto x = strs({"0", "0", "1", "1"}), y = strs({"0", "1", "0", "1"});
  const auto paired = strs({"0", "1"}), anti = strs({"1", "0"});
  EXPECT_EQ(contingency_score(paired, paired, paired, paired), 0.0);
  EXPECT_DOUBLE_EQ(contingency_score(paired, paired, paired, anti), 1.0);
  EXPECT_DOUBLE_EQ(contingency_score(x, y, paired, paired), 0.5);
}

TEST(Jsd, Examples) {
  EXPECT_NEAR(jsd_categorical(strs({"a", "b"}), strs({"a"})), 0.3113, 1e-4);
  EXPECT_NEAR(jsd_categorical(strs({"a", "b"}), strs({"a"})), 1.5 - 0.75 * std::log2(3.0), 1e-12);
  EXPECT_DOUBLE_EQ(jsd_categorical(strs({"a"}), strs({"b"})), 1.0);
  EXPECT_DOUBLE_EQ(jsd_continuous(std::vector<double>{0, 0.1}, std::vector<double>{5, 6}), 1.0);
  const std::vector<double> v{0.3, 1.2, -4, 2};
  EXPECT_EQ(jsd_continuous(v, v), 0.0);
  EXPECT_EQ(jsd_continuous(std::vector<double>{2, 2}, std::vector<double>{2}), 0.0);
}

TEST(Pearson, Examples) {
  const std::vector<double> x{1, 2, 3, 4}, up{2, 4, 6, 8}, down{8, 6, 4, 2};
  EXPECT_EQ(pearson_score(x, up, x, up).score, 0.0);
  EXPECT_NEAR(pearson_score(x, up, x, down).score, 1.0, 1e-15);
  const auto flat = pearson_score(x, std::vector<double>{1, 1, 1, 1}, x, up);
  EXPECT_TRUE(flat.undefined);
  EXPECT_EQ(flat.score, 0.5);
}

TEST(Pearson, PerfectVersusIndependentIsAboutHalf) {
  Rng rng(1);
  std::vector<double> rx, sx, sy;
  for (int i = 0; i < 10000; ++i) {
    rx.push_back(standard_normal(rng));
    sx.push_back(standard_normal(rng));
    sy.push_back(standard_normal(rng));
  }
  EXPECT_NEAR(pearson_score(rx, rx, sx, sy).score, 0.5, 0.02);
}

// Random small instances against the quadratic-time references, plus symmetry.
TEST(Oracle, RandomInstances) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 100), m = 1 + uniform_index(rng, 100);
    const std::size_t k = 1 + uniform_index(rng, 6);
    std::vector<double> a, b;
    std::vector<std::string> ca, cb, da, db;
    // Rounded draws produce ties.
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(std::round(standard_normal(rng) * 4) / 4);
      ca.push_back(std::to_string(uniform_index(rng, k)));
      da.push_back(std::to_string(uniform_index(rng, 3)));
    }
    for (std::size_t i = 0; i < m; ++i) {
      b.push_back(uniform01(rng) * 3 - 1);
      cb.push_back(std::to_string(uniform_index(rng, k + 1)));
      db.push_back(std::to_string(uniform_index(rng, 3)));
    }
    EXPECT_NEAR(kst(a, b), oracle::kst(a, b), 1e-12);
    EXPECT_NEAR(tvd(ca, cb), oracle::tvd(ca, cb), 1e-12);
    EXPECT_NEAR(contingency_score(ca, da, cb, db), oracle::contingency(ca, da, cb, db), 1e-12);
    EXPECT_NEAR(jsd_continuous(a, b), oracle::jsd_continuous(a, b), 1e-12);
    EXPECT_NEAR(jsd_categorical(ca, cb), oracle::jsd_categorical(ca, cb), 1e-12);

    EXPECT_EQ(kst(a, b), kst(b, a));
    EXPECT_NEAR(tvd(ca, cb), tvd(cb, ca), 1e-15);
    EXPECT_NEAR(contingency_score(ca, da, cb, db), contingency_score(cb, db, ca, da), 1e-15);
    EXPECT_NEAR(jsd_continuous(a, b), jsd_continuous(b, a), 1e-15);
    EXPECT_NEAR(jsd_categorical(ca, cb), jsd_categorical(cb, ca), 1e-15);
  }
}

TEST(Joint, QuartileEdgesUseLinearPercentiles) {
  EXPECT_EQ(quartile_edges({8, 1, 7, 2, 6, 3, 5, 4}), (std::vector<double>{2.75, 4.5, 6.25}));
}

// Real: category A holds the lower half of x. Synthetic swaps two of the
// associations and puts one value exactly on the median edge.
TEST(Joint, MixedPairHandExample) {
  const auto real = table({"c", "x"}, {{"A", "1"}, {"A", "2"}, {"A", "3"}, {"A", "4"},
                                       {"B", "5"}, {"B", "6"}, {"B", "7"}, {"B", "8"}});
  const auto syn = table({"c", "x"}, {{"A", "1"}, {"B", "2"}, {"A", "3"}, {"A", "4.5"},
                                      {"B", "5"}, {"B", "6"}, {"A", "7"}, {"B", "8"}});
  const auto pairs = joint_report(real, syn, kMixture);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].method, "binned_contingency");
  // Real cells (A,q0) (A,q1) (B,q2) (B,q3) at 1/4 each; synthetic (A,q0) (B,q0)
  // (A,q3) (B,q3) at 1/8 and (A,q1) (B,q2) at 1/4.
  EXPECT_DOUBLE_EQ(pairs[0].score, 0.25);
  EXPECT_EQ(joint_report(real, real, kMixture)[0].score, 0.0);
}

TEST(Joint, MethodsByColumnKind) {
  const auto s = schema_of({{"x", ColumnType::Continuous}, {"y", ColumnType::Continuous}, {"c", ColumnType::Categorical},
                            {"d", ColumnType::Categorical}});
  const auto t = table({"x", "y", "c", "d"}, {{"1", "2", "a", "u"}, {"2", "1", "b", "v"}, {"3", "5", "a", "v"}});
  const auto pairs = joint_report(t, t, s);
  ASSERT_EQ(pairs.size(), 6u);
  EXPECT_EQ(pairs[0].method, "pearson");
  EXPECT_EQ(pairs[1].method, "binned_contingency");
  EXPECT_EQ(pairs[5].method, "contingency");
  for (const auto& p : pairs) EXPECT_EQ(p.score, 0.0);
}

TEST(Joint, ConstantColumnWarns) {
  const auto s = schema_of({{"x", ColumnType::Continuous}, {"y", ColumnType::Continuous}});
  const auto t = table({"x", "y"}, {{"1", "0"}, {"2", "0"}, {"3", "0"}});
  std::vector<std::string> warnings;
  EXPECT_EQ(joint_report(t, t, s, &warnings)[0].score, 0.5);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("(x, y)"), std::string::npos);
}

TEST(Dcr, CopiesOfEitherHalf) {
  const auto train = mixture(200, 1), holdout = mixture(200, 2);
  EXPECT_EQ(dcr_probability(train, holdout, train, kMixture), 1.0);
  EXPECT_EQ(dcr_probability(train, holdout, holdout, kMixture), 0.0);
  EXPECT_EQ(dcr_probability(train, train, mixture(50, 3), kMixture), 0.5);
}

TEST(Dcr, HandDistances) {
  const auto s = schema_of({{"x", ColumnType::Continuous}, {"c", ColumnType::Categorical}});
  // Pooled x = {0, 2}: mean 1, population std 1.
  const auto train = table({"x", "c"}, {{"0", "a"}});
  const auto holdout = table({"x", "c"}, {{"2", "b"}});
  // d_train = 0.5 + 1, d_holdout = 1.5 + 0: a tie.
  EXPECT_EQ(dcr_probability(train, holdout, table({"x", "c"}, {{"0.5", "b"}}), s), 0.5);
  EXPECT_EQ(dcr_probability(train, holdout, table({"x", "c"}, {{"0.4", "b"}}), s), 1.0);
}

TEST(Dcr, Preconditions) {
  const auto t = mixture(10, 1);
  EXPECT_THROW(dcr_probability(t, mixture(11, 2), t, kMixture), SchemaError);
  EXPECT_THROW(dcr_probability(t, t, table({"c", "x"}, {}), kMixture), SchemaError);
}

TEST(C2st, ShuffledCopyIsIndistinguishable) {
  auto real = mixture(600, 4);
  auto syn = real;
  Rng rng(5);
  shuffle(syn.rows.begin(), syn.rows.end(), rng);
  EXPECT_LE(c2st(real, syn, kMixture, 7), 0.05);
}

TEST(C2st, ShiftedColumnIsSeparable) {
  // x has standard deviation about 1.1 and a +10 sd shift separates the tables.
  EXPECT_GE(c2st(mixture(600, 4), mixture(600, 6, 11.2), kMixture, 7), 0.95);
}

TEST(C2st, BoundedAndDeterministic) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const double v = c2st(mixture(100, s), mixture(80, s + 10, 0.3 * s), kMixture, s);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_EQ(v, c2st(mixture(100, s), mixture(80, s + 10, 0.3 * s), kMixture, s));
  }
  EXPECT_THROW(c2st(mixture(49, 1), mixture(60, 2), kMixture, 0), SchemaError);
}

TEST(C2st, RocAucWithTies) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 1}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}), 0.5);
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
}

TEST(Report, SelfComparisonAndJsonLayout) {
  const auto real = mixture(120, 8), holdout = mixture(120, 9);
  const auto rep = evaluate(real, real, kMixture, &holdout, 3);
  EXPECT_EQ(mean_score(rep.marginal), 0.0);
  EXPECT_EQ(mean_score(rep.joint), 0.0);
  EXPECT_EQ(mean_score(rep.jsd), 0.0);
  const auto j = to_json(rep);
  EXPECT_EQ(j.at("marginal").at("columns").size(), 2u);
  EXPECT_EQ(j.at("marginal").at("columns")[0].at("method"), "tvd");
  EXPECT_EQ(j.at("marginal").at("columns")[1].at("method"), "kst");
  EXPECT_EQ(j.at("joint").at("average"), 0.0);
  EXPECT_TRUE(j.contains("c2st"));
  EXPECT_EQ(j.at("dcr_probability"), 1.0);
  EXPECT_EQ(j.at("metadata").at("holdout_rows"), 120);
  EXPECT_EQ(j.at("metadata").at("seed"), 3);
  EXPECT_FALSE(to_json(evaluate(real, real, kMixture, nullptr, 3)).contains("dcr_probability"));
}

TEST(Report, SingleColumnHasNoJointAverage) {
  const auto s = schema_of({{"x", ColumnType::Continuous}});
  const auto t = table({"x"}, {{"1"}, {"2"}, {"3"}});
  const auto rep = evaluate(t, t, s, nullptr, 0);
  EXPECT_TRUE(rep.joint.empty());
  const auto j = to_json(rep);
  EXPECT_TRUE(j.at("joint").at("pairs").empty());
  EXPECT_FALSE(j.at("joint").contains("average"));
  EXPECT_FALSE(j.contains("c2st"));
  EXPECT_EQ(j.at("warnings").size(), 1u);
}

}  // namespace
}  // namespace tabdar::metrics

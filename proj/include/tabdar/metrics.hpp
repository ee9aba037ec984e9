#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "csv.hpp"
#include "data_pipeline.hpp"
#include "schema.hpp"

namespace tabdar::metrics {

// Two-sample Kolmogorov-Smirnov statistic sup_x |F_r(x) - F_s(x)|, evaluated
// exactly at every jump of either empirical CDF.
inline double kst(std::span<const double> real, std::span<const double> syn) {
  if (real.empty() || syn.empty()) throw SchemaError("kst needs two non-empty samples");
  std::vector<double> a(real.begin(), real.end()), b(syn.begin(), syn.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (j == b.size() || (i < a.size() && a[i] <= b[j]))
      v = a[i];
    else
      v = b[j];
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    best = std::max(best, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

template <typename Key>
std::map<Key, double> frequencies(std::span<const Key> values) {
  std::map<Key, double> f;
  for (const auto& v : values) f[v] += 1.0;
  for (auto& [k, c] : f) c /= static_cast<double>(values.size());
  return f;
}

// 0.5 * sum |R(w) - S(w)| over the union of observed keys.
template <typename Key>
double half_l1(const std::map<Key, double>& r, const std::map<Key, double>& s) {
  double sum = 0.0;
  for (const auto& [k, p] : r) {
    auto it = s.find(k);
    sum += std::fabs(p - (it == s.end() ? 0.0 : it->second));
  }
  for (const auto& [k, q] : s)
    if (!r.count(k)) sum += q;
  return 0.5 * sum;
}

inline double tvd(std::span<const std::string> real, std::span<const std::string> syn) {
  if (real.empty() || syn.empty()) throw SchemaError("tvd needs two non-empty samples");
  return half_l1(frequencies(real), frequencies(syn));
}

// Pearson correlation; nullopt when either column is constant.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n == 0 || y.size() != n) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// |rho_real - rho_syn| / 2; 0.5 when a correlation is undefined.
struct PearsonScore {
  double score;
  bool undefined;
};

inline PearsonScore pearson_score(std::span<const double> rx, std::span<const double> ry, std::span<const double> sx,
                                  std::span<const double> sy) {
  const auto a = pearson(rx, ry), b = pearson(sx, sy);
  if (!a || !b) return {0.5, true};
  return {0.5 * std::fabs(*a - *b), false};
}

inline double contingency_score(std::span<const std::string> ra, std::span<const std::string> rb,
                                 std::span<const std::string> sa, std::span<const std::string> sb) {
  if (ra.size() != rb.size() || sa.size() != sb.size()) throw SchemaError("contingency columns differ in length");
  if (ra.empty() || sa.empty()) throw SchemaError("contingency_score needs non-empty tables");
  using Pair = std::pair<std::string, std::string>;
  std::vector<Pair> r, s;
  for (std::size_t i = 0; i < ra.size(); ++i) r.emplace_back(ra[i], rb[i]);
  for (std::size_t i = 0; i < sa.size(); ++i) s.emplace_back(sa[i], sb[i]);
  return half_l1(frequencies<Pair>(r), frequencies<Pair>(s));
}

// Base-2 Jensen-Shannon divergence between two probability vectors.
inline double jensen_shannon(std::span<const double> p, std::span<const double> q) {
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return std::clamp(js, 0.0, 1.0);
}

inline constexpr int kJsdBins = 50;

inline double jsd_continuous(std::span<const double> real, std::span<const double> syn, int bins = kJsdBins) {
  if (real.empty() || syn.empty()) throw SchemaError("jsd needs two non-empty samples");
  double lo = real[0], hi = real[0];
  for (double v : real) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : syn) lo = std::min(lo, v), hi = std::max(hi, v);
  std::vector<double> p(static_cast<std::size_t>(bins), 0.0), q(p.size(), 0.0);
  auto bin = [&](double v) -> std::size_t {
    if (hi <= lo) return 0;
    const auto b = static_cast<long>(std::floor((v - lo) / (hi - lo) * bins));
    return static_cast<std::size_t>(std::clamp<long>(b, 0, bins - 1));
  };
  for (double v : real) p[bin(v)] += 1.0 / static_cast<double>(real.size());
  for (double v : syn) q[bin(v)] += 1.0 / static_cast<double>(syn.size());
  return jensen_shannon(p, q);
}

inline double jsd_categorical(std::span<const std::string> real, std::span<const std::string> syn) {
  if (real.empty() || syn.empty()) throw SchemaError("jsd needs two non-empty samples");
  const auto fr = frequencies(real), fs = frequencies(syn);
  std::map<std::string, std::pair<double, double>> joint;
  for (const auto& [k, v] : fr) joint[k].first = v;
  for (const auto& [k, v] : fs) joint[k].second = v;
  std::vector<double> p, q;
  for (const auto& [k, v] : joint) {
    p.push_back(v.first);
    q.push_back(v.second);
  }
  return jensen_shannon(p, q);
}

// ---- table-level helpers ----

inline std::vector<double> numeric_column(const RawTable& t, std::size_t c) {
  std::vector<double> out;
  out.reserve(t.num_rows());
  for (const auto& row : t.rows)
    if (auto v = parse_real(row[c])) out.push_back(*v);
  return out;
}

inline std::vector<std::string> string_column(const RawTable& t, std::size_t c) {
  std::vector<std::string> out;
  out.reserve(t.num_rows());
  for (const auto& row : t.rows) out.push_back(row[c]);
  return out;
}

// Rows where both continuous cells parse.
inline std::pair<std::vector<double>, std::vector<double>> numeric_pair(const RawTable& t, std::size_t a, std::size_t b) {
  std::pair<std::vector<double>, std::vector<double>> out;
  for (const auto& row : t.rows) {
    auto x = parse_real(row[a]), y = parse_real(row[b]);
    if (x && y) {
      out.first.push_back(*x);
      out.second.push_back(*y);
    }
  }
  return out;
}

// Quartile bin labels of a continuous column, with edges taken from the
// real data; a value equal to an edge falls in the lower bin.
inline std::vector<double> quartile_edges(std::vector<double> real) {
  if (real.empty()) throw SchemaError("cannot bin an empty column");
  std::sort(real.begin(), real.end());
  auto pct = [&](double p) {
    const double h = p * static_cast<double>(real.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= real.size()) return real.back();
    return real[lo] + (h - static_cast<double>(lo)) * (real[lo + 1] - real[lo]);
  };
  return {pct(0.25), pct(0.5), pct(0.75)};
}

inline std::vector<std::string> quartile_labels(const RawTable& t, std::size_t c, const std::vector<double>& edges) {
  std::vector<std::string> out;
  out.reserve(t.num_rows());
  for (const auto& row : t.rows) {
    auto v = parse_real(row[c]);
    if (!v) {
      out.emplace_back();
      continue;
    }
    const auto bin = std::lower_bound(edges.begin(), edges.end(), *v) - edges.begin();
    out.push_back("q" + std::to_string(bin));
  }
  return out;
}

struct PairScore {
  std::string a, b;
  std::string method;  // "pearson" | "contingency" | "binned_contingency"
  double score;
};

struct ColumnScore {
  std::string column;
  std::string method;  // "kst" | "tvd" | "jsd"
  double score;
};

inline double mean_score(const auto& items) {
  double s = 0.0;
  for (const auto& i : items) s += i.score;
  return items.empty() ? 0.0 : s / static_cast<double>(items.size());
}

inline std::vector<ColumnScore> marginal_report(const RawTable& real, const RawTable& syn, const TableSchema& schema) {
  std::vector<ColumnScore> out;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema[c].is_continuous())
      out.push_back({schema[c].name, "kst", kst(numeric_column(real, c), numeric_column(syn, c))});
    else
      out.push_back({schema[c].name, "tvd", tvd(string_column(real, c), string_column(syn, c))});
  }
  return out;
}

inline std::vector<PairScore> joint_report(const RawTable& real, const RawTable& syn, const TableSchema& schema,
                                           std::vector<std::string>* warnings = nullptr) {
  std::vector<PairScore> out;
  for (std::size_t a = 0; a < schema.size(); ++a) {
    for (std::size_t b = a + 1; b < schema.size(); ++b) {
      const auto &ca = schema[a], &cb = schema[b];
      if (ca.is_continuous() && cb.is_continuous()) {
        const auto r = numeric_pair(real, a, b), s = numeric_pair(syn, a, b);
        const auto ps = pearson_score(r.first, r.second, s.first, s.second);
        if (ps.undefined && warnings)
          warnings->push_back("correlation undefined for constant column in pair (" + ca.name + ", " + cb.name + ")");
        out.push_back({ca.name, cb.name, "pearson", ps.score});
      } else if (ca.is_categorical() && cb.is_categorical()) {
        out.push_back({ca.name, cb.name, "contingency",
                       contingency_score(string_column(real, a), string_column(real, b), string_column(syn, a),
                                         string_column(syn, b))});
      } else {
        const std::size_t cont = ca.is_continuous() ? a : b;
        const std::size_t cat = ca.is_continuous() ? b : a;
        const auto edges = quartile_edges(numeric_column(real, cont));
        out.push_back({ca.name, cb.name, "binned_contingency",
                       contingency_score(string_column(real, cat), quartile_labels(real, cont, edges),
                                         string_column(syn, cat), quartile_labels(syn, cont, edges))});
      }
    }
  }
  return out;
}

inline std::vector<ColumnScore> jsd_report(const RawTable& real, const RawTable& syn, const TableSchema& schema) {
  std::vector<ColumnScore> out;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema[c].is_continuous())
      out.push_back({schema[c].name, "jsd", jsd_continuous(numeric_column(real, c), numeric_column(syn, c))});
    else
      out.push_back({schema[c].name, "jsd", jsd_categorical(string_column(real, c), string_column(syn, c))});
  }
  return out;
}

// ---- distance to closest record ----

namespace detail {

struct MixedRows {
  Mat<double> numeric;                        // standardized continuous cells
  std::vector<std::vector<std::string>> cats;  // categorical cells
};

inline MixedRows mixed_rows(const RawTable& t, const TableSchema& schema, const std::vector<double>& mean,
                            const std::vector<double>& stdev) {
  std::vector<std::size_t> cont, cat;
  for (std::size_t c = 0; c < schema.size(); ++c) (schema[c].is_continuous() ? cont : cat).push_back(c);
  MixedRows out{Mat<double>::Zero(static_cast<Eigen::Index>(t.num_rows()), static_cast<Eigen::Index>(cont.size())), {}};
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    for (std::size_t k = 0; k < cont.size(); ++k) {
      const auto v = parse_real(t.rows[r][cont[k]]);
      out.numeric(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v ? (*v - mean[k]) / stdev[k] : 0.0;
    }
    std::vector<std::string> cells;
    for (auto c : cat) cells.push_back(t.rows[r][c]);
    out.cats.push_back(std::move(cells));
  }
  return out;
}

inline double min_distance(const MixedRows& pool, const MixedRows& q, std::size_t qi) {
  double best = std::numeric_limits<double>::infinity();
  const auto qrow = q.numeric.row(static_cast<Eigen::Index>(qi));
  for (std::size_t i = 0; i < pool.cats.size(); ++i) {
    double d = std::sqrt((pool.numeric.row(static_cast<Eigen::Index>(i)) - qrow).squaredNorm());
    for (std::size_t k = 0; k < q.cats[qi].size(); ++k) d += pool.cats[i][k] != q.cats[qi][k] ? 1.0 : 0.0;
    best = std::min(best, d);
  }
  return best;
}

}  // namespace detail

// Fraction of synthetic rows strictly closer to the training half than to the
// holdout half (ties count 0.5). Distance: L2 over continuous columns
// standardized by train+holdout statistics, plus one per mismatched
// categorical cell.
inline double dcr_probability(const RawTable& train, const RawTable& holdout, const RawTable& syn,
                              const TableSchema& schema) {
  if (train.rows.empty() || holdout.rows.empty() || syn.rows.empty())
    throw SchemaError("dcr_probability needs non-empty train, holdout and synthetic tables");
  if (train.num_rows() != holdout.num_rows())
    throw SchemaError("dcr_probability needs equal-sized train and holdout tables (" + std::to_string(train.num_rows()) +
                      " vs " + std::to_string(holdout.num_rows()) + ")");
  std::vector<double> mean, stdev;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (!schema[c].is_continuous()) continue;
    auto v = numeric_column(train, c);
    const auto h = numeric_column(holdout, c);
    v.insert(v.end(), h.begin(), h.end());
    double m = 0.0;
    for (double x : v) m += x;
    m /= std::max<double>(1.0, static_cast<double>(v.size()));
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= std::max<double>(1.0, static_cast<double>(v.size()));
    mean.push_back(m);
    stdev.push_back(var > 0.0 ? std::sqrt(var) : 1.0);
  }
  const auto tr = detail::mixed_rows(train, schema, mean, stdev);
  const auto ho = detail::mixed_rows(holdout, schema, mean, stdev);
  const auto sy = detail::mixed_rows(syn, schema, mean, stdev);
  double closer = 0.0;
  for (std::size_t i = 0; i < syn.num_rows(); ++i) {
    const double dt = detail::min_distance(tr, sy, i), dh = detail::min_distance(ho, sy, i);
    closer += dt < dh ? 1.0 : (dt == dh ? 0.5 : 0.0);
  }
  return closer / static_cast<double>(syn.num_rows());
}

// ---- classifier two-sample test ----

struct C2stConfig {
  int folds = 5;
  int iterations = 300;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  int max_attempts = 3;
};

// Area under the ROC curve via the rank-sum statistic with averaged ties.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] == 1) {
      pos += 1.0;
      rank_sum += rank[i];
    }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) throw ComputeError("AUC undefined for a single-class sample");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

namespace detail {

// Real rows first (label 0), then synthetic rows (label 1). Continuous
// columns standardized with real-data statistics, categorical one-hot over
// the union of observed categories.
inline Mat<double> c2st_features(const RawTable& real, const RawTable& syn, const TableSchema& schema) {
  const std::size_t n = real.num_rows() + syn.num_rows();
  std::vector<ColVec<double>> cols;
  auto cell = [&](std::size_t r, std::size_t c) -> const std::string& {
    return r < real.num_rows() ? real.rows[r][c] : syn.rows[r - real.num_rows()][c];
  };
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema[c].is_continuous()) {
      const auto rv = numeric_column(real, c);
      double m = 0.0, v = 0.0;
      for (double x : rv) m += x;
      m /= std::max<double>(1.0, static_cast<double>(rv.size()));
      for (double x : rv) v += (x - m) * (x - m);
      v /= std::max<double>(1.0, static_cast<double>(rv.size()));
      const double sd = v > 0.0 ? std::sqrt(v) : 1.0;
      ColVec<double> col(static_cast<Eigen::Index>(n));
      for (std::size_t r = 0; r < n; ++r) {
        const auto x = parse_real(cell(r, c));
        col(static_cast<Eigen::Index>(r)) = x ? (*x - m) / sd : 0.0;
      }
      cols.push_back(std::move(col));
    } else {
      std::map<std::string, std::size_t> cats;
      for (std::size_t r = 0; r < n; ++r) cats.emplace(cell(r, c), 0);
      for (auto& [cat, i] : cats) {
        ColVec<double> col = ColVec<double>::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t r = 0; r < n; ++r) col(static_cast<Eigen::Index>(r)) = cell(r, c) == cat ? 1.0 : 0.0;
        cols.push_back(std::move(col));
      }
    }
  }
  Mat<double> x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()) + 1);
  for (std::size_t k = 0; k < cols.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = cols[k];
  x.col(x.cols() - 1).setOnes();  // intercept
  return x;
}

// Full-batch gradient descent on the mean logistic loss.
inline ColVec<double> fit_logistic(const Mat<double>& x, const ColVec<double>& y, const C2stConfig& cfg) {
  ColVec<double> w = ColVec<double>::Zero(x.cols());
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (int it = 0; it < cfg.iterations; ++it) {
    const ColVec<double> p = (1.0 + (-(x * w).array()).exp()).inverse().matrix();
    ColVec<double> g = x.transpose() * (p - y) * inv_n;
    g.head(g.size() - 1) += cfg.l2 * w.head(w.size() - 1);
    w -= cfg.learning_rate * g;
  }
  return w;
}

}  // namespace detail

// max(0, 2 * AUC - 1) of a logistic-regression real-vs-synthetic
// classifier, AUC averaged over k cross-validation folds.
inline double c2st(const RawTable& real, const RawTable& syn, const TableSchema& schema, std::uint64_t seed,
                   const C2stConfig& cfg = {}) {
  if (real.num_rows() < 50 || syn.num_rows() < 50) throw SchemaError("c2st needs at least 50 rows in each table");
  const Mat<double> x = detail::c2st_features(real, syn, schema);
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<int> label(n, 0);
  for (std::size_t i = real.num_rows(); i < n; ++i) label[i] = 1;

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    Rng rng = derive_rng(seed, 0xC257, static_cast<std::uint64_t>(attempt));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(cfg.folds));

    bool degenerate = false;
    for (int f = 0; f < cfg.folds && !degenerate; ++f) {
      int test_pos = 0, test_neg = 0, train_pos = 0, train_neg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        int& slot = fold[i] == f ? (label[i] ? test_pos : test_neg) : (label[i] ? train_pos : train_neg);
        ++slot;
      }
      degenerate = !test_pos || !test_neg || !train_pos || !train_neg;
    }
    if (degenerate) continue;

    double auc_sum = 0.0;
    for (int f = 0; f < cfg.folds; ++f) {
      std::vector<Eigen::Index> tr, te;
      for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
      Mat<double> xtr(static_cast<Eigen::Index>(tr.size()), x.cols());
      ColVec<double> ytr(static_cast<Eigen::Index>(tr.size()));
      for (std::size_t i = 0; i < tr.size(); ++i) {
        xtr.row(static_cast<Eigen::Index>(i)) = x.row(tr[i]);
        ytr(static_cast<Eigen::Index>(i)) = label[static_cast<std::size_t>(tr[i])];
      }
      const ColVec<double> w = detail::fit_logistic(xtr, ytr, cfg);
      std::vector<double> scores;
      std::vector<int> yte;
      for (auto i : te) {
        scores.push_back(x.row(i).dot(w));
        yte.push_back(label[static_cast<std::size_t>(i)]);
      }
      auc_sum += roc_auc(scores, yte);
    }
    const double auc = auc_sum / cfg.folds;
    return std::clamp(2.0 * auc - 1.0, 0.0, 1.0);
  }
  throw ComputeError("c2st: every fold assignment left a single-class fold after " +
                     std::to_string(cfg.max_attempts) + " attempts");
}

// ---- report ----

struct MetricReport {
  std::vector<ColumnScore> marginal;
  std::vector<PairScore> joint;
  std::vector<ColumnScore> jsd;
  std::optional<double> c2st;
  std::optional<double> dcr_probability;
  std::size_t real_rows = 0, synthetic_rows = 0, holdout_rows = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

inline MetricReport evaluate(const RawTable& real, const RawTable& syn, const TableSchema& schema,
                             const RawTable* holdout, std::uint64_t seed) {
  MetricReport rep;
  rep.real_rows = real.num_rows();
  rep.synthetic_rows = syn.num_rows();
  rep.seed = seed;
  rep.marginal = marginal_report(real, syn, schema);
  rep.joint = joint_report(real, syn, schema, &rep.warnings);
  rep.jsd = jsd_report(real, syn, schema);
  if (real.num_rows() >= 50 && syn.num_rows() >= 50)
    rep.c2st = c2st(real, syn, schema, seed);
  else
    rep.warnings.push_back("c2st skipped: needs at least 50 rows in each table");
  if (holdout) {
    rep.holdout_rows = holdout->num_rows();
    rep.dcr_probability = dcr_probability(real, *holdout, syn, schema);
  }
  return rep;
}

inline nlohmann::json to_json(const MetricReport& rep) {
  nlohmann::json j;
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : rep.marginal) cols.push_back({{"column", c.column}, {"method", c.method}, {"score", c.score}});
  j["marginal"] = {{"columns", cols}, {"average", mean_score(rep.marginal)}};
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : rep.joint)
    pairs.push_back({{"columns", {p.a, p.b}}, {"method", p.method}, {"score", p.score}});
  j["joint"] = {{"pairs", pairs}};
  if (!rep.joint.empty()) j["joint"]["average"] = mean_score(rep.joint);
  nlohmann::json jcols = nlohmann::json::array();
  for (const auto& c : rep.jsd) jcols.push_back({{"column", c.column}, {"score", c.score}});
  j["jsd"] = {{"columns", jcols}, {"average", mean_score(rep.jsd)}};
  if (rep.c2st) j["c2st"] = *rep.c2st;
  if (rep.dcr_probability) j["dcr_probability"] = *rep.dcr_probability;
  j["metadata"] = {{"real_rows", rep.real_rows}, {"synthetic_rows", rep.synthetic_rows}, {"seed", rep.seed}};
  if (rep.dcr_probability) j["metadata"]["holdout_rows"] = rep.holdout_rows;
  if (!rep.warnings.empty()) j["warnings"] = rep.warnings;
  return j;
}

}  // namespace tabdar::metrics

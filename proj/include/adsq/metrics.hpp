#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "adsq/codes.hpp"
#include "adsq/data_model.hpp"
#include "adsq/errors.hpp"

namespace adsq {

// Ground truth: a database item is relevant to a query iff they share a label.
class RelevanceJudge {
 public:
  RelevanceJudge(LabelMatrix query_labels, LabelMatrix db_labels)
      : query_(std::move(query_labels)), db_(std::move(db_labels)) {
    if (query_.cols() != db_.cols()) throw ShapeError("RelevanceJudge: label widths differ");
  }

  bool relevant(Index q, Index d) const {
    for (Index c = 0; c < query_.cols(); ++c)
      if (query_(q, c) && db_(d, c)) return true;
    return false;
  }

  Index queries() const { return query_.rows(); }
  Index database() const { return db_.rows(); }

 private:
  LabelMatrix query_;
  LabelMatrix db_;
};

enum class ApDenominator {
  min_cutoff_total,  // 1 / min(R, total relevant)
  total_relevant,    // 1 / total relevant
};

// AP over the first R ranks of a full ranking given as 0/1 relevance flags.
inline double average_precision(std::span<const std::uint8_t> ranked, std::size_t cutoff,
                                ApDenominator denom = ApDenominator::min_cutoff_total) {
  if (ranked.empty()) throw ArgumentError("average_precision: empty ranking");
  if (cutoff < 1) throw ArgumentError("average_precision: cutoff must be >= 1");
  std::size_t total = 0;
  for (auto r : ranked) total += r != 0;
  if (total == 0) return 0.0;
  double acc = 0.0;
  std::size_t hits = 0;
  const std::size_t limit = std::min(cutoff, ranked.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (ranked[i]) {
      ++hits;
      acc += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  const std::size_t d = denom == ApDenominator::min_cutoff_total ? std::min(cutoff, total) : total;
  return acc / static_cast<double>(d);
}

namespace detail {

inline void check_retrieval(const PackedCodes& queries, const PackedCodes& db, const RelevanceJudge& judge) {
  if (queries.k_total != db.k_total) throw ArgumentError("query and database code lengths differ");
  if (static_cast<std::size_t>(judge.queries()) != queries.n || static_cast<std::size_t>(judge.database()) != db.n) {
    throw ShapeError("label counts do not match code counts");
  }
}

// Relevance flags of the database in Hamming-ranking order for query q.
inline std::vector<std::uint8_t> ranked_relevance(const PackedCodes& queries, const PackedCodes& db,
                                                  const RelevanceJudge& judge, std::size_t q) {
  const auto order = rank_by_distance(hamming_distances(queries.row(q), db), db.k_total);
  std::vector<std::uint8_t> rel(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    rel[r] = judge.relevant(static_cast<Index>(q), static_cast<Index>(order[r])) ? 1 : 0;
  }
  return rel;
}

}  // namespace detail

inline double mean_ap(const PackedCodes& queries, const PackedCodes& db, const RelevanceJudge& judge,
                      std::size_t cutoff, ApDenominator denom = ApDenominator::min_cutoff_total) {
  detail::check_retrieval(queries, db, judge);
  if (queries.n == 0) throw ArgumentError("mean_ap: no queries");
  double acc = 0.0;
  for (std::size_t q = 0; q < queries.n; ++q) {
    acc += average_precision(detail::ranked_relevance(queries, db, judge, q), cutoff, denom);
  }
  return acc / static_cast<double>(queries.n);
}

// Share of relevant items among those within Hamming radius 2; 0 when the ball is empty.
inline double precision_at_hamming2(const PackedCodes& queries, const PackedCodes& db, const RelevanceJudge& judge,
                                    std::size_t q) {
  const auto dist = hamming_distances(queries.row(q), db);
  std::size_t inside = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 2) {
      ++inside;
      hits += judge.relevant(static_cast<Index>(q), static_cast<Index>(i));
    }
  }
  return inside == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(inside);
}

inline double mean_precision_at_hamming2(const PackedCodes& queries, const PackedCodes& db,
                                         const RelevanceJudge& judge) {
  detail::check_retrieval(queries, db, judge);
  if (queries.n == 0) throw ArgumentError("precision_at_hamming2: no queries");
  double acc = 0.0;
  for (std::size_t q = 0; q < queries.n; ++q) acc += precision_at_hamming2(queries, db, judge, q);
  return acc / static_cast<double>(queries.n);
}

struct CurvePoint {
  double x;  // recall level, or N for precision@N
  double precision;
};

// Precision at the first rank reaching each recall level, averaged over the
// queries that have at least one relevant item.
inline std::vector<CurvePoint> pr_curve(const PackedCodes& queries, const PackedCodes& db, const RelevanceJudge& judge,
                                        const std::vector<double>& recall_grid) {
  detail::check_retrieval(queries, db, judge);
  for (double r : recall_grid)
    if (!(r > 0.0 && r <= 1.0)) throw ArgumentError("pr_curve: recall levels must lie in (0, 1]");
  std::vector<double> acc(recall_grid.size(), 0.0);
  std::size_t counted = 0;
  for (std::size_t q = 0; q < queries.n; ++q) {
    const auto rel = detail::ranked_relevance(queries, db, judge, q);
    std::size_t total = 0;
    for (auto r : rel) total += r;
    if (total == 0) continue;
    ++counted;
    for (std::size_t g = 0; g < recall_grid.size(); ++g) {
      // Smallest hit count h with h / total >= level, guarding against rounding.
      const auto needed =
          static_cast<std::size_t>(std::ceil(recall_grid[g] * static_cast<double>(total) - 1e-9));
      std::size_t hits = 0;
      for (std::size_t rank = 0; rank < rel.size(); ++rank) {
        hits += rel[rank];
        if (hits >= std::max<std::size_t>(needed, 1)) {
          acc[g] += static_cast<double>(hits) / static_cast<double>(rank + 1);
          break;
        }
      }
    }
  }
  std::vector<CurvePoint> out;
  for (std::size_t g = 0; g < recall_grid.size(); ++g) {
    out.push_back({recall_grid[g], counted == 0 ? 0.0 : acc[g] / static_cast<double>(counted)});
  }
  return out;
}

inline std::vector<CurvePoint> precision_at_n(const PackedCodes& queries, const PackedCodes& db,
                                              const RelevanceJudge& judge, const std::vector<std::size_t>& ns) {
  detail::check_retrieval(queries, db, judge);
  for (auto n : ns)
    if (n < 1 || n > db.n) throw ArgumentError("precision_at_n: N=" + std::to_string(n) + " outside [1, database size]");
  if (queries.n == 0) throw ArgumentError("precision_at_n: no queries");
  std::vector<double> acc(ns.size(), 0.0);
  for (std::size_t q = 0; q < queries.n; ++q) {
    const auto rel = detail::ranked_relevance(queries, db, judge, q);
    for (std::size_t g = 0; g < ns.size(); ++g) {
      std::size_t hits = 0;
      for (std::size_t r = 0; r < ns[g]; ++r) hits += rel[r];
      acc[g] += static_cast<double>(hits) / static_cast<double>(ns[g]);
    }
  }
  std::vector<CurvePoint> out;
  for (std::size_t g = 0; g < ns.size(); ++g) {
    out.push_back({static_cast<double>(ns[g]), acc[g] / static_cast<double>(queries.n)});
  }
  return out;
}

inline std::vector<double> uniform_recall_grid(int steps) {
  std::vector<double> grid;
  for (int i = 1; i <= steps; ++i) grid.push_back(static_cast<double>(i) / steps);
  return grid;
}

}  // namespace adsq

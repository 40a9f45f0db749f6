#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adsq/bstep.hpp"
#include "adsq/data_model.hpp"
#include "adsq/encoder.hpp"
#include "adsq/io.hpp"

namespace adsq {

inline constexpr std::string_view kCodesMagic = "ADSQB001";

// Bit-packed codes: MSB-first within each byte, bit 1 means +1, rows padded
// with zero bits to a byte boundary.
struct PackedCodes {
  std::size_t n = 0;
  std::size_t k_total = 0;
  std::vector<std::uint8_t> payload;

  std::size_t row_bytes() const { return (k_total + 7) / 8; }
  std::span<const std::uint8_t> row(std::size_t i) const { return {payload.data() + i * row_bytes(), row_bytes()}; }

  bool operator==(const PackedCodes&) const = default;
};

inline Vector quantize_sign(const Vector& v) {
  if (!v.allFinite()) throw DomainError("quantize_sign: non-finite input");
  return v.unaryExpr([](double x) { return x >= 0.0 ? 1.0 : -1.0; });
}

inline Matrix quantize_sign(const Matrix& m) {
  if (!m.allFinite()) throw DomainError("quantize_sign: non-finite input");
  return sign_matrix(m);
}

// Codes for a batch of feature rows: sign(F_x(x)) followed by sign(F_y(x)).
inline Matrix encode_queries(const Matrix& x, const EncoderParams& imgx, const EncoderParams& imgy) {
  if (imgx.input_dim() != x.cols() || imgy.input_dim() != x.cols()) {
    throw ShapeError("encode: feature dimension " + std::to_string(x.cols()) + " does not match the model input " +
                     std::to_string(imgx.input_dim()));
  }
  const Matrix bx = quantize_sign(forward(imgx, x).v);
  const Matrix by = quantize_sign(forward(imgy, x).v);
  Matrix out(x.rows(), bx.cols() + by.cols());
  out << bx, by;
  return out;
}

inline Vector encode_query(const Vector& x, const EncoderParams& imgx, const EncoderParams& imgy) {
  return encode_queries(x.transpose(), imgx, imgy).row(0).transpose();
}

inline PackedCodes pack(const Matrix& codes) {
  PackedCodes p;
  p.n = static_cast<std::size_t>(codes.rows());
  p.k_total = static_cast<std::size_t>(codes.cols());
  p.payload.assign(p.n * p.row_bytes(), 0);
  for (std::size_t i = 0; i < p.n; ++i) {
    for (std::size_t b = 0; b < p.k_total; ++b) {
      const double v = codes(static_cast<Index>(i), static_cast<Index>(b));
      if (v != 1.0 && v != -1.0) throw DomainError("pack: code entries must be +-1");
      if (v == 1.0) p.payload[i * p.row_bytes() + b / 8] |= static_cast<std::uint8_t>(0x80u >> (b % 8));
    }
  }
  return p;
}

inline Matrix unpack(const PackedCodes& p) {
  Matrix m(static_cast<Index>(p.n), static_cast<Index>(p.k_total));
  for (std::size_t i = 0; i < p.n; ++i) {
    const auto row = p.row(i);
    for (std::size_t b = 0; b < p.k_total; ++b) {
      m(static_cast<Index>(i), static_cast<Index>(b)) = (row[b / 8] >> (7 - b % 8)) & 1u ? 1.0 : -1.0;
    }
  }
  return m;
}

// Popcount of XOR; padding bits are zero in valid payloads so they never count.
inline int hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw ArgumentError("hamming_distance: code length mismatch");
  int d = 0;
  std::size_t i = 0;
  for (; i + 8 <= a.size(); i += 8) {
    std::uint64_t x, y;
    std::memcpy(&x, a.data() + i, 8);
    std::memcpy(&y, b.data() + i, 8);
    d += std::popcount(x ^ y);
  }
  for (; i < a.size(); ++i) d += std::popcount(static_cast<unsigned>(a[i] ^ b[i]));
  return d;
}

inline std::vector<int> hamming_distances(std::span<const std::uint8_t> query, const PackedCodes& db) {
  if (query.size() != db.row_bytes()) throw ArgumentError("hamming_distances: code length mismatch");
  std::vector<int> d(db.n);
  for (std::size_t i = 0; i < db.n; ++i) d[i] = hamming_distance(query, db.row(i));
  return d;
}

// Database indices ordered by ascending distance, ties by ascending index.
// Counting sort over the k_total + 1 possible distances.
inline std::vector<std::size_t> rank_by_distance(const std::vector<int>& dist, std::size_t k_total) {
  std::vector<std::size_t> start(k_total + 2, 0);
  for (int d : dist) ++start[static_cast<std::size_t>(d) + 1];
  for (std::size_t b = 1; b < start.size(); ++b) start[b] += start[b - 1];
  std::vector<std::size_t> order(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) order[start[static_cast<std::size_t>(dist[i])]++] = i;
  return order;
}

inline std::vector<std::size_t> search_topk(std::span<const std::uint8_t> query, const PackedCodes& db, std::size_t k) {
  if (k > db.n) throw ArgumentError("search_topk: k=" + std::to_string(k) + " exceeds database size " +
                                    std::to_string(db.n));
  auto order = rank_by_distance(hamming_distances(query, db), db.k_total);
  order.resize(k);
  return order;
}

// ---- ADSQB001 ----------------------------------------------------------------

inline void save_codes(const std::string& path, const PackedCodes& p) {
  io::Writer w(kCodesMagic);
  w.u32(io::checked_u32(p.n, "n"));
  w.u32(io::checked_u32(p.k_total, "k_total"));
  w.raw(p.payload.data(), p.payload.size());
  w.save(path);
}

inline PackedCodes load_codes(const std::string& path) {
  auto r = io::Reader::from_file(path);
  r.expect_magic(kCodesMagic);
  PackedCodes p;
  p.n = r.u32();
  p.k_total = r.u32();
  if (p.k_total == 0) throw FormatError(path + ": k_total must be positive");
  r.require_payload(p.n * p.row_bytes());
  p.payload.resize(p.n * p.row_bytes());
  for (auto& b : p.payload) b = r.byte();
  r.expect_end();
  const unsigned pad = static_cast<unsigned>(p.row_bytes() * 8 - p.k_total);
  const std::uint8_t pad_mask = static_cast<std::uint8_t>((1u << pad) - 1u);
  for (std::size_t i = 0; i < p.n; ++i) {
    if (p.row(i).back() & pad_mask) throw FormatError(path + ": non-zero padding bits in row " + std::to_string(i));
  }
  return p;
}

}  // namespace adsq

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "adsq/errors.hpp"
#include "adsq/io.hpp"

namespace adsq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using LabelMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

inline constexpr std::string_view kFeatureMagic = "ADSQF001";
inline constexpr std::string_view kLabelMagic = "ADSQL001";

// Feature matrix plus multi-hot labels for the same n items.
struct Dataset {
  Matrix features;     // n x D
  LabelMatrix labels;  // n x c, entries in {0,1}

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  Index classes() const { return labels.cols(); }

  Matrix label_features() const { return labels.cast<double>(); }

  Dataset rows(const std::vector<Index>& idx) const {
    Dataset out;
    out.features.resize(static_cast<Index>(idx.size()), dim());
    out.labels.resize(static_cast<Index>(idx.size()), classes());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.features.row(static_cast<Index>(k)) = features.row(idx[k]);
      out.labels.row(static_cast<Index>(k)) = labels.row(idx[k]);
    }
    return out;
  }
};

// Pairwise similarity s_ij in {0,1}; the signed view is 2 s_ij - 1.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(LabelMatrix s) : s_(std::move(s)) {
    if (s_.rows() != s_.cols()) throw ShapeError("similarity matrix must be square");
    for (Index i = 0; i < s_.rows(); ++i) {
      if (s_(i, i) != 1) throw DataError("similarity diagonal must be 1");
      for (Index j = 0; j < i; ++j) {
        if (s_(i, j) > 1) throw DataError("similarity entries must be 0 or 1");
        if (s_(i, j) != s_(j, i)) throw DataError("similarity matrix must be symmetric");
      }
    }
  }

  Index size() const { return s_.rows(); }
  bool similar(Index i, Index j) const { return s_(i, j) != 0; }
  double binary(Index i, Index j) const { return s_(i, j); }
  double signed_value(Index i, Index j) const { return 2.0 * s_(i, j) - 1.0; }
  const LabelMatrix& raw() const { return s_; }

  Matrix binary_block(const std::vector<Index>& idx) const {
    const auto m = static_cast<Index>(idx.size());
    Matrix out(m, m);
    for (Index a = 0; a < m; ++a)
      for (Index b = 0; b < m; ++b) out(a, b) = binary(idx[a], idx[b]);
    return out;
  }

  Matrix binary_dense() const { return s_.cast<double>(); }
  Matrix signed_dense() const { return 2.0 * s_.cast<double>().array() - 1.0; }

  // Signed view transposed times U, evaluated in row chunks so the dense
  // signed matrix is never materialised.
  Matrix signed_transpose_times(const Matrix& u) const {
    if (u.rows() != size()) throw ShapeError("signed_transpose_times: row mismatch");
    const Index n = size();
    constexpr Index chunk = 256;
    Matrix out = Matrix::Zero(n, u.cols());
    for (Index start = 0; start < n; start += chunk) {
      const Index len = std::min(chunk, n - start);
      const Matrix block = 2.0 * s_.middleRows(start, len).cast<double>().array() - 1.0;
      out.noalias() += block.transpose() * u.middleRows(start, len);
    }
    return out;
  }

 private:
  LabelMatrix s_;
};

// Two items are similar iff they share at least one positive label.
inline SimilarityMatrix build_similarity(const LabelMatrix& labels) {
  const Matrix l = labels.cast<double>();
  const Matrix shared = l * l.transpose();
  LabelMatrix s(labels.rows(), labels.rows());
  for (Index i = 0; i < s.rows(); ++i)
    for (Index j = 0; j < s.cols(); ++j) s(i, j) = shared(i, j) > 0.5 ? 1 : 0;
  return SimilarityMatrix(std::move(s));
}

enum class Variant { full, no_asym, no_sem, no_both, symmetric };

inline Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::full;
  if (name == "no_asym" || name == "no-asym") return Variant::no_asym;
  if (name == "no_sem" || name == "no-sem") return Variant::no_sem;
  if (name == "no_both" || name == "no-both") return Variant::no_both;
  if (name == "symmetric" || name == "sym") return Variant::symmetric;
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_asym: return "no_asym";
    case Variant::no_sem: return "no_sem";
    case Variant::no_both: return "no_both";
    case Variant::symmetric: return "symmetric";
  }
  return "full";
}

struct HyperParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1e-2;
  double delta = 1.0;
  double nu = 10.0;
  double eta = 10.0;
  int k_half = 8;
  double lr_min = 1e-5;
  double lr_max = 1e-2;
  int lr_steps = 7;
  int t_label = 10;
  int t_img = 3;
  int outer_rounds = 10;
  int batch_size = 32;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  std::vector<int> encoder_hidden{4096, 4096};
  int semantic_dim = 512;
  Variant variant = Variant::full;
  // ||w - 1||_1 exactly as printed instead of the magnitude form ||(|w| - 1)||_1.
  bool j3_literal = false;
  bool refresh_labelnet = true;
  int bstep_sweeps = 1;
  double converge_tol = 1e-4;
  int converge_patience = 2;

  // Geometric grid lr_min .. lr_max with lr_steps points.
  std::vector<double> lr_grid() const {
    std::vector<double> grid;
    if (lr_steps <= 1) {
      grid.push_back(lr_min);
      return grid;
    }
    const double ratio = std::pow(lr_max / lr_min, 1.0 / (lr_steps - 1));
    for (int i = 0; i < lr_steps; ++i) grid.push_back(lr_min * std::pow(ratio, i));
    return grid;
  }

  double lr_for_round(int round) const {
    const auto grid = lr_grid();
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::max(round, 0)), grid.size() - 1);
    return grid[i];
  }

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    auto weight = [&](const char* name, double v) {
      if (!std::isfinite(v) || v < 0.0) out.push_back(std::string(name) + " must be finite and >= 0");
    };
    weight("alpha", alpha);
    weight("beta", beta);
    weight("gamma", gamma);
    weight("delta", delta);
    weight("nu", nu);
    weight("eta", eta);
    weight("momentum", momentum);
    weight("weight_decay", weight_decay);
    if (k_half < 1) out.push_back("k_half >= 1");
    if (batch_size < 2) out.push_back("batch_size >= 2");
    if (!(lr_min > 0.0) || !(lr_max >= lr_min) || !std::isfinite(lr_max)) out.push_back("0 < lr_min <= lr_max");
    if (lr_steps < 1) out.push_back("lr_steps >= 1");
    if (t_label < 0 || t_img < 0 || outer_rounds < 0) out.push_back("epoch and round counts must be >= 0");
    if (semantic_dim < 1) out.push_back("semantic_dim >= 1");
    for (int w : encoder_hidden)
      if (w < 1) out.push_back("encoder_hidden widths must be >= 1");
    if (bstep_sweeps < 0) out.push_back("bstep_sweeps >= 0");
    return out;
  }
};

inline nlohmann::json to_json(const HyperParams& h) {
  return nlohmann::json{{"alpha", h.alpha},
                        {"beta", h.beta},
                        {"gamma", h.gamma},
                        {"delta", h.delta},
                        {"nu", h.nu},
                        {"eta", h.eta},
                        {"k_half", h.k_half},
                        {"lr_min", h.lr_min},
                        {"lr_max", h.lr_max},
                        {"lr_steps", h.lr_steps},
                        {"t_label", h.t_label},
                        {"t_img", h.t_img},
                        {"outer_rounds", h.outer_rounds},
                        {"batch_size", h.batch_size},
                        {"momentum", h.momentum},
                        {"weight_decay", h.weight_decay},
                        {"seed", h.seed},
                        {"encoder_hidden", h.encoder_hidden},
                        {"semantic_dim", h.semantic_dim},
                        {"variant", std::string(variant_name(h.variant))},
                        {"j3_literal", h.j3_literal},
                        {"refresh_labelnet", h.refresh_labelnet},
                        {"bstep_sweeps", h.bstep_sweeps},
                        {"converge_tol", h.converge_tol},
                        {"converge_patience", h.converge_patience}};
}

// Applies one key onto h. Unknown keys and ill-typed values raise ConfigError naming the key.
inline void apply_config_key(HyperParams& h, const std::string& key, const nlohmann::json& v) {
  auto num = [&]() -> double {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
  };
  auto integer = [&]() -> long long {
    if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
    return v.get<long long>();
  };
  auto boolean = [&]() -> bool {
    if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
    return v.get<bool>();
  };
  if (key == "alpha") h.alpha = num();
  else if (key == "beta") h.beta = num();
  else if (key == "gamma") h.gamma = num();
  else if (key == "delta") h.delta = num();
  else if (key == "nu") h.nu = num();
  else if (key == "eta") h.eta = num();
  else if (key == "k_half") h.k_half = static_cast<int>(integer());
  else if (key == "lr_min") h.lr_min = num();
  else if (key == "lr_max") h.lr_max = num();
  else if (key == "lr_steps") h.lr_steps = static_cast<int>(integer());
  else if (key == "t_label") h.t_label = static_cast<int>(integer());
  else if (key == "t_img") h.t_img = static_cast<int>(integer());
  else if (key == "outer_rounds") h.outer_rounds = static_cast<int>(integer());
  else if (key == "batch_size") h.batch_size = static_cast<int>(integer());
  else if (key == "momentum") h.momentum = num();
  else if (key == "weight_decay") h.weight_decay = num();
  else if (key == "seed") {
    const auto s = integer();
    if (s < 0) throw ConfigError("config key 'seed' must be non-negative");
    h.seed = static_cast<std::uint64_t>(s);
  } else if (key == "encoder_hidden") {
    if (!v.is_array()) throw ConfigError("config key 'encoder_hidden' must be an array");
    h.encoder_hidden.clear();
    for (const auto& w : v) {
      if (!w.is_number_integer()) throw ConfigError("config key 'encoder_hidden' must hold integers");
      h.encoder_hidden.push_back(w.get<int>());
    }
  } else if (key == "semantic_dim") h.semantic_dim = static_cast<int>(integer());
  else if (key == "variant") {
    if (!v.is_string()) throw ConfigError("config key 'variant' must be a string");
    h.variant = parse_variant(v.get<std::string>());
  } else if (key == "j3_literal") h.j3_literal = boolean();
  else if (key == "refresh_labelnet") h.refresh_labelnet = boolean();
  else if (key == "bstep_sweeps") h.bstep_sweeps = static_cast<int>(integer());
  else if (key == "converge_tol") h.converge_tol = num();
  else if (key == "converge_patience") h.converge_patience = static_cast<int>(integer());
  else throw ConfigError("unknown config key '" + key + "'");
}

inline HyperParams hyper_params_from_json(const nlohmann::json& j, HyperParams base = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) apply_config_key(base, key, value);
  return base;
}

// ---- file formats ----------------------------------------------------------

inline Matrix load_features(const std::string& path) {
  auto r = io::Reader::from_file(path);
  r.expect_magic(kFeatureMagic);
  const std::uint32_t n = r.u32();
  const std::uint32_t d = r.u32();
  r.require_payload(std::size_t{n} * d * sizeof(float));
  Matrix m(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      const float v = r.value<float>();
      if (!std::isfinite(v)) {
        throw DataError(path + ": non-finite feature at row " + std::to_string(i) + ", column " + std::to_string(j));
      }
      m(i, j) = v;
    }
  }
  r.expect_end();
  return m;
}

inline void save_features(const std::string& path, const Matrix& m) {
  io::Writer w(kFeatureMagic);
  w.u32(io::checked_u32(static_cast<std::size_t>(m.rows()), "n"));
  w.u32(io::checked_u32(static_cast<std::size_t>(m.cols()), "D"));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j))) throw DataError(path + ": refusing to write non-finite feature");
      w.value(static_cast<float>(m(i, j)));
    }
  w.save(path);
}

inline LabelMatrix load_labels(const std::string& path) {
  auto r = io::Reader::from_file(path);
  r.expect_magic(kLabelMagic);
  const std::uint32_t n = r.u32();
  const std::uint32_t c = r.u32();
  r.require_payload(std::size_t{n} * c);
  LabelMatrix l(n, c);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < c; ++j) {
      const std::uint8_t b = r.byte();
      if (b > 1) throw FormatError(path + ": label value " + std::to_string(b) + " is not 0 or 1");
      l(i, j) = b;
    }
  }
  r.expect_end();
  for (std::uint32_t i = 0; i < n; ++i) {
    if (l.row(i).cast<int>().sum() == 0) throw DataError(path + ": label row " + std::to_string(i) + " is all zero");
  }
  return l;
}

inline void save_labels(const std::string& path, const LabelMatrix& l) {
  io::Writer w(kLabelMagic);
  w.u32(io::checked_u32(static_cast<std::size_t>(l.rows()), "n"));
  w.u32(io::checked_u32(static_cast<std::size_t>(l.cols()), "c"));
  for (Index i = 0; i < l.rows(); ++i)
    for (Index j = 0; j < l.cols(); ++j) {
      if (l(i, j) > 1) throw FormatError(path + ": label value must be 0 or 1");
      w.value<std::uint8_t>(l(i, j));
    }
  w.save(path);
}

inline Dataset load_dataset(const std::string& feature_path, const std::string& label_path) {
  Dataset d{load_features(feature_path), load_labels(label_path)};
  if (d.features.rows() != d.labels.rows()) {
    throw ShapeError("feature and label files disagree on n (" + std::to_string(d.features.rows()) + " vs " +
                     std::to_string(d.labels.rows()) + ")");
  }
  return d;
}

// Collects every violated invariant instead of stopping at the first.
inline std::vector<std::string> validate_dataset(const Dataset& d, const HyperParams& h) {
  std::vector<std::string> out = h.violations();
  const Index n = d.size();
  if (n < 2) out.push_back("n >= 2");
  if (d.labels.rows() != n) out.push_back("label rows must equal feature rows");
  if (!d.features.allFinite()) out.push_back("all feature entries finite");
  for (Index i = 0; i < d.labels.rows(); ++i) {
    int ones = 0;
    bool binary = true;
    for (Index j = 0; j < d.labels.cols(); ++j) {
      ones += d.labels(i, j) == 1;
      binary = binary && d.labels(i, j) <= 1;
    }
    if (!binary) out.push_back("label row " + std::to_string(i) + " has a value outside {0,1}");
    if (ones == 0) out.push_back("label row " + std::to_string(i) + " has no positive label");
  }
  if (n < h.batch_size) {
    out.push_back("n >= batch_size (n=" + std::to_string(n) + ", batch_size=" + std::to_string(h.batch_size) + ")");
  }
  return out;
}

}  // namespace adsq

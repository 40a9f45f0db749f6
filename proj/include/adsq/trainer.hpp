#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "adsq/bstep.hpp"
#include "adsq/codes.hpp"
#include "adsq/data_model.hpp"
#include "adsq/encoder.hpp"
#include "adsq/imgnet.hpp"
#include "adsq/labelnet.hpp"
#include "adsq/minibatch.hpp"

namespace adsq {

struct LogRow {
  int round = 0;
  std::string phase;
  LossBreakdown loss;
};

struct TrainState {
  LabelNet label;
  EncoderParams imgx;
  EncoderParams imgy;
  SgdState imgx_opt;
  SgdState imgy_opt;
  CodeMatrix bx{Matrix(), 'x'};
  CodeMatrix by{Matrix(), 'y'};
  LabelSupervision sup;
  int rounds = 0;
  int label_epochs = 0;
  bool converged = false;
  std::vector<double> objective;  // total image objective after each round
  std::vector<LogRow> history;
  std::map<std::string, double> phase_seconds;  // wall clock, not part of the model
};

// Random stream ids, one per phase.
enum StreamId : std::uint64_t {
  kLabelInit = 1,
  kImgxInit = 2,
  kImgyInit = 3,
  kLabelShuffle = 10,
  kImgxShuffle = 11,
  kImgyShuffle = 12,
};

// Stop once the relative change between consecutive entries stayed below
// tol for `patience` consecutive rounds, or when `cap` entries exist.
inline bool convergence_check(const std::vector<double>& history, double tol, int patience, std::size_t cap = 0) {
  if (history.empty()) return false;
  if (cap != 0 && history.size() >= cap) return true;
  const auto need = static_cast<std::size_t>(std::max(patience, 1));
  if (history.size() < need + 1) return false;
  for (std::size_t t = history.size() - need; t < history.size(); ++t) {
    const double prev = history[t - 1];
    const double rel = std::abs(history[t] - prev) / std::max(std::abs(prev), 1e-300);
    if (!(rel < tol)) return false;
  }
  return true;
}

// Fresh networks: LabelNet on the labels, two image networks with distinct seeds
// (or one shared network for the symmetric variant).
inline TrainState init_state(const Dataset& data, const HyperParams& h) {
  TrainState st;
  st.label = init_labelnet(data.classes(), h, stream_seed(h.seed, kLabelInit));
  const auto dims = encoder_dims(data.dim(), h.encoder_hidden, h.semantic_dim, h.k_half);
  st.imgx = init_params(dims, stream_seed(h.seed, kImgxInit));
  st.imgy = h.variant == Variant::symmetric ? st.imgx : init_params(dims, stream_seed(h.seed, kImgyInit));
  return st;
}

namespace detail {

// Adds the wall-clock time of its lifetime to one phase bucket.
class PhaseTimer {
 public:
  PhaseTimer(TrainState& st, std::string phase)
      : st_(st), phase_(std::move(phase)), start_(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() {
    st_.phase_seconds[phase_] +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  PhaseTimer(const PhaseTimer&) = delete;
  PhaseTimer& operator=(const PhaseTimer&) = delete;

 private:
  TrainState& st_;
  std::string phase_;
  std::chrono::steady_clock::time_point start_;
};

inline void run_label_phase(TrainState& st, const Dataset& data, const SimilarityMatrix& s, const HyperParams& h,
                            int round) {
  PhaseTimer timer(st, "label");
  const double lr = h.lr_for_round(round);
  for (int t = 0; t < h.t_label; ++t) {
    train_labelnet_epoch(st.label, data, s, h, lr, stream_seed(h.seed, kLabelShuffle, round, t));
    ++st.label_epochs;
  }
  st.history.push_back({round, "label", labelnet_full_loss(st.label, data, s, h)});
  st.sup = labelnet_supervision(st.label, data, st.label_epochs);
}

inline LossBreakdown run_bstep(CodeMatrix& b, const EncoderParams& p, const Dataset& data, const Matrix& s_signed,
                               const HyperParams& h) {
  auto ws = make_workspace(forward(p, data.features).u, s_signed, h.eta);
  const double before = bstep_objective(b, ws);
  bstep_sweep(b, ws, h.bstep_sweeps);
  const double after = bstep_objective(b, ws);
  if (after > before + 1e-9 * std::max(1.0, std::abs(before))) {
    throw TrainingError("B-step increased its objective (" + std::to_string(before) + " -> " +
                        std::to_string(after) + ")");
  }
  LossBreakdown out;
  out.total = after;
  return out;
}

}  // namespace detail

// Alternating optimisation: LabelNet phase, then per round t_img W-step epochs
// on each image network followed by a B-step sweep on each code matrix.
inline TrainState train(const Dataset& data, const SimilarityMatrix& s, HyperParams h) {
  if (const auto bad = validate_dataset(data, h); !bad.empty()) {
    std::string msg = "invalid training input:";
    for (const auto& b : bad) msg += " [" + b + "]";
    throw DataError(msg);
  }
  if (s.size() != data.size()) throw ShapeError("similarity matrix does not match the dataset");
  const Variant variant = h.variant;
  const bool shared = variant == Variant::symmetric;
  TrainState st = init_state(data, h);

  auto phase_error = [](const std::string& phase, int round, const Error& e) {
    return TrainingError(phase + " phase, round " + std::to_string(round) + ": " + e.what());
  };

  try {
    detail::run_label_phase(st, data, s, h, 0);
  } catch (const Error& e) {
    throw phase_error("label", 0, e);
  }
  if (h.outer_rounds == 0) return st;

  st.bx = codes_from(forward(st.imgx, data.features).u, 'x');
  st.by = codes_from(forward(st.imgy, data.features).u, 'y');
  const Matrix s_signed = s.signed_dense();

  for (int round = 0; round < h.outer_rounds; ++round) {
    const double lr = h.lr_for_round(round);
    std::string phase = "label";
    try {
      if (round > 0 && h.refresh_labelnet) detail::run_label_phase(st, data, s, h, round);

      phase = "wstep_x";
      {
        detail::PhaseTimer timer(st, "wstep");
        for (int t = 0; t < h.t_img; ++t) {
          wstep_epoch(st.imgx, st.imgx_opt, data, s, st.bx.b, st.sup, h, variant, lr,
                      stream_seed(h.seed, kImgxShuffle, round, t));
        }
      }
      st.history.push_back({round, phase, imgnet_full_loss(st.imgx, data, s, st.bx.b, st.sup, h, variant)});
      phase = "wstep_y";
      if (shared) {
        st.imgy = st.imgx;
      } else {
        detail::PhaseTimer timer(st, "wstep");
        for (int t = 0; t < h.t_img; ++t) {
          wstep_epoch(st.imgy, st.imgy_opt, data, s, st.by.b, st.sup, h, variant, lr,
                      stream_seed(h.seed, kImgyShuffle, round, t));
        }
      }
      st.history.push_back({round, phase, imgnet_full_loss(st.imgy, data, s, st.by.b, st.sup, h, variant)});

      phase = "bstep_x";
      detail::PhaseTimer timer(st, "bstep");
      st.history.push_back({round, phase, detail::run_bstep(st.bx, st.imgx, data, s_signed, h)});
      phase = "bstep_y";
      if (shared) {
        st.by = {st.bx.b, 'y'};
        st.history.push_back({round, phase, st.history.back().loss});
      } else {
        st.history.push_back({round, phase, detail::run_bstep(st.by, st.imgy, data, s_signed, h)});
      }
    } catch (const Error& e) {
      throw phase_error(phase, round, e);
    }

    const double total = imgnet_full_loss(st.imgx, data, s, st.bx.b, st.sup, h, variant).total +
                         imgnet_full_loss(st.imgy, data, s, st.by.b, st.sup, h, variant).total;
    st.objective.push_back(total);
    st.history.push_back({round, "round", {0, 0, 0, 0, 0, total}});
    st.rounds = round + 1;
    if (convergence_check(st.objective, h.converge_tol, h.converge_patience)) {
      st.converged = true;
      break;
    }
  }
  return st;
}

// round,phase,loss_total,j1,j2,j3,j4,asym
inline std::string training_log_csv(const std::vector<LogRow>& rows) {
  std::ostringstream out;
  out << "round,phase,loss_total,j1,j2,j3,j4,asym\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.round << ',' << r.phase << ',' << r.loss.total << ',' << r.loss.j1 << ',' << r.loss.j2 << ','
        << r.loss.j3 << ',' << r.loss.j4 << ',' << r.loss.asym << '\n';
  }
  return out.str();
}

struct ModelFiles {
  static constexpr const char* label = "label.net";
  static constexpr const char* head = "label.head";
  static constexpr const char* supervision = "label.sup";
  static constexpr const char* imgx = "imgx.net";
  static constexpr const char* imgy = "imgy.net";
  static constexpr const char* codes_x = "bx.codes";
  static constexpr const char* codes_y = "by.codes";
  static constexpr const char* log = "train_log.csv";
};

// Returns the written paths in a fixed order.
inline std::vector<std::filesystem::path> write_model(const TrainState& st, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto out = [&](const char* name) {
    written.push_back(dir / name);
    return written.back().string();
  };
  save_params(out(ModelFiles::label), st.label.net);
  save_layers(out(ModelFiles::head), {st.label.head});
  save_supervision(out(ModelFiles::supervision), st.sup);
  save_params(out(ModelFiles::imgx), st.imgx);
  save_params(out(ModelFiles::imgy), st.imgy);
  if (st.bx.rows() > 0) {
    save_codes(out(ModelFiles::codes_x), pack(st.bx.b));
    save_codes(out(ModelFiles::codes_y), pack(st.by.b));
  }
  std::ofstream log(out(ModelFiles::log), std::ios::trunc);
  log << training_log_csv(st.history);
  return written;
}

}  // namespace adsq

// adsq command-line driver: synth, train, encode, eval.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "adsq/adsq.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw adsq::FormatError(path.string() + ": cannot open for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

// Provenance record written next to every output.
class Manifest {
 public:
  explicit Manifest(std::string command) { doc_ = {{"command", std::move(command)}, {"version", ADSQ_VERSION}}; }

  void set(const std::string& key, json value) { doc_[key] = std::move(value); }
  void input(const fs::path& p) { doc_["inputs"][p.string()] = sha256_file(p); }
  void output(const fs::path& p) { doc_["outputs"][p.string()] = sha256_file(p); }
  void phase(const std::string& name, double seconds) { doc_["wall_clock_seconds"][name] = seconds; }

  void save(const fs::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    out << doc_.dump(2) << '\n';
    if (!out) throw adsq::FormatError(path.string() + ": cannot write manifest");
  }

 private:
  json doc_;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw adsq::FormatError(path.string() + ": cannot write");
}

// ---- synth -------------------------------------------------------------------

struct SynthArgs {
  adsq::SynthSpec spec;
  std::string out;
};

void register_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--classes", a.spec.classes, "number of classes")->capture_default_str();
  app.add_option("--dim", a.spec.dim, "feature dimension")->capture_default_str();
  app.add_option("--per-class", a.spec.per_class, "training items per class")->capture_default_str();
  app.add_option("--queries-per-class", a.spec.queries_per_class, "query items per class")->capture_default_str();
  app.add_option("--spread", a.spec.cluster_spread, "cluster standard deviation")->capture_default_str();
  app.add_option("--center-scale", a.spec.center_scale, "class centres uniform in +-scale")->capture_default_str();
  app.add_option("--overlap", a.spec.multilabel_overlap, "probability of one extra label")->capture_default_str();
  app.add_option("--seed", a.spec.seed, "random seed")->capture_default_str();
  app.add_option("--out", a.out, "output directory")->required();
}

int run_synth(const SynthArgs& a) {
  Stopwatch clock;
  const auto d = adsq::generate(a.spec);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  Manifest m("synth");
  m.set("config", {{"classes", a.spec.classes},
                   {"dim", a.spec.dim},
                   {"per_class", a.spec.per_class},
                   {"queries_per_class", a.spec.queries_per_class},
                   {"spread", a.spec.cluster_spread},
                   {"center_scale", a.spec.center_scale},
                   {"overlap", a.spec.multilabel_overlap}});
  m.set("seeds", {{"synth", a.spec.seed}});
  adsq::save_features((dir / "train.feat").string(), d.train.features);
  adsq::save_labels((dir / "train.lab").string(), d.train.labels);
  adsq::save_features((dir / "query.feat").string(), d.query.features);
  adsq::save_labels((dir / "query.lab").string(), d.query.labels);
  for (const char* f : {"train.feat", "train.lab", "query.feat", "query.lab"}) m.output(dir / f);
  m.phase("generate", clock.seconds());
  m.save(dir / "manifest.json");
  std::cout << "wrote " << d.train.size() << " train and " << d.query.size() << " query items to " << dir.string()
            << '\n';
  return 0;
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string features;
  std::string labels;
  std::string out;
  std::string variant;
  std::vector<std::string> sets;
  std::map<std::string, json> flags;
};

void register_train(CLI::App& app, TrainArgs& a) {
  app.add_option("--config", a.config, "JSON hyper-parameter file")->check(CLI::ExistingFile);
  app.add_option("--features", a.features, "ADSQF001 training features")->required();
  app.add_option("--labels", a.labels, "ADSQL001 training labels")->required();
  app.add_option("--out", a.out, "model directory")->required();
  app.add_option("--variant", a.variant, "full | no-asym | no-sem | no-both | sym");
  app.add_option("--set", a.sets, "override any config key, key=value (value parsed as JSON)");
  // Typed shortcuts for the most common overrides.
  auto num = [&](const std::string& flag, const std::string& key) {
    app.add_option_function<double>(flag, [&a, key](double v) { a.flags[key] = v; }, key);
  };
  auto integer = [&](const std::string& flag, const std::string& key) {
    app.add_option_function<long long>(flag, [&a, key](long long v) { a.flags[key] = v; }, key);
  };
  num("--alpha", "alpha");
  num("--beta", "beta");
  num("--gamma", "gamma");
  num("--delta", "delta");
  num("--nu", "nu");
  num("--eta", "eta");
  num("--lr-min", "lr_min");
  num("--lr-max", "lr_max");
  integer("--lr-steps", "lr_steps");
  integer("--k-half", "k_half");
  integer("--t-label", "t_label");
  integer("--t-img", "t_img");
  integer("--outer-rounds", "outer_rounds");
  integer("--batch-size", "batch_size");
  integer("--semantic-dim", "semantic_dim");
  integer("--seed", "seed");
}

json parse_set_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;  // bare strings such as variant names
  }
}

adsq::HyperParams resolve_config(const TrainArgs& a) {
  adsq::HyperParams h;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw adsq::ConfigError(a.config + ": " + e.what());
    }
    h = adsq::hyper_params_from_json(j, h);
  }
  for (const auto& [key, value] : a.flags) adsq::apply_config_key(h, key, value);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw adsq::ConfigError("--set expects key=value, got '" + kv + "'");
    adsq::apply_config_key(h, kv.substr(0, eq), parse_set_value(kv.substr(eq + 1)));
  }
  if (!a.variant.empty()) h.variant = adsq::parse_variant(a.variant);
  return h;
}

int run_train(const TrainArgs& a) {
  Stopwatch total;
  const adsq::HyperParams h = resolve_config(a);
  Stopwatch load_clock;
  const auto data = adsq::load_dataset(a.features, a.labels);
  const auto s = adsq::build_similarity(data.labels);
  const double load_seconds = load_clock.seconds();

  const auto st = adsq::train(data, s, h);
  const fs::path dir(a.out);
  Stopwatch write_clock;
  auto written = adsq::write_model(st, dir);
  write_text(dir / "config.json", adsq::to_json(h).dump(2) + "\n");
  written.push_back(dir / "config.json");

  Manifest m("train");
  m.set("config", adsq::to_json(h));
  m.set("seeds", {{"base", h.seed},
                  {"label_init", adsq::stream_seed(h.seed, adsq::kLabelInit)},
                  {"imgx_init", adsq::stream_seed(h.seed, adsq::kImgxInit)},
                  {"imgy_init", adsq::stream_seed(h.seed, adsq::kImgyInit)}});
  m.set("rounds", st.rounds);
  m.set("converged", st.converged);
  m.input(a.features);
  m.input(a.labels);
  if (!a.config.empty()) m.input(a.config);
  for (const auto& p : written) m.output(p);
  m.phase("load", load_seconds);
  for (const auto& [phase, secs] : st.phase_seconds) m.phase(phase, secs);
  m.phase("write", write_clock.seconds());
  m.phase("total", total.seconds());
  m.save(dir / "manifest.json");
  std::cout << "trained " << st.rounds << " rounds (" << adsq::variant_name(h.variant) << "), model in "
            << dir.string() << '\n';
  return 0;
}

// ---- encode ------------------------------------------------------------------

struct EncodeArgs {
  std::string model;
  std::string features;
  std::string out;
};

void register_encode(CLI::App& app, EncodeArgs& a) {
  app.add_option("--model", a.model, "model directory written by train")->required()->check(CLI::ExistingDirectory);
  app.add_option("--features", a.features, "ADSQF001 features to encode")->required();
  app.add_option("--out", a.out, "ADSQB001 output file")->required();
}

int run_encode(const EncodeArgs& a) {
  Stopwatch clock;
  const fs::path dir(a.model);
  const auto imgx = adsq::load_params((dir / adsq::ModelFiles::imgx).string());
  const auto imgy = adsq::load_params((dir / adsq::ModelFiles::imgy).string());
  const auto x = adsq::load_features(a.features);
  if (x.rows() == 0) throw adsq::DataError(a.features + ": no items to encode");
  if (imgx.out_dim() != imgy.out_dim()) throw adsq::ShapeError("imgx and imgy hash widths differ");
  const auto codes = adsq::pack(adsq::encode_queries(x, imgx, imgy));
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  adsq::save_codes(out.string(), codes);

  Manifest m("encode");
  m.set("config", {{"k_total", codes.k_total}, {"n", codes.n}});
  m.set("seeds", json::object());
  m.input(dir / adsq::ModelFiles::imgx);
  m.input(dir / adsq::ModelFiles::imgy);
  m.input(a.features);
  m.output(out);
  m.phase("encode", clock.seconds());
  m.save(out.string() + ".manifest.json");
  std::cout << "encoded " << codes.n << " items with " << codes.k_total << " bits to " << out.string() << '\n';
  return 0;
}

// ---- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string query_codes;
  std::string db_codes;
  std::string query_labels;
  std::string db_labels;
  std::vector<std::string> metrics{"map"};
  std::size_t map_r = 5000;
  std::vector<std::size_t> pn_list;
  int pr_steps = 10;
  std::string ap_denominator = "min";
  std::string out;
};

void register_eval(CLI::App& app, EvalArgs& a) {
  app.add_option("--query-codes", a.query_codes, "ADSQB001 query codes")->required();
  app.add_option("--db-codes", a.db_codes, "ADSQB001 database codes")->required();
  app.add_option("--query-labels", a.query_labels, "ADSQL001 query labels")->required();
  app.add_option("--db-labels", a.db_labels, "ADSQL001 database labels")->required();
  app.add_option("--metrics", a.metrics, "comma list of map, ph2, pr, pn")
      ->delimiter(',')
      ->check(CLI::IsMember({"map", "ph2", "pr", "pn"}))
      ->capture_default_str();
  app.add_option("--map-r", a.map_r, "mAP cutoff R")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--pn-list", a.pn_list, "comma list of N for precision@N")->delimiter(',');
  app.add_option("--pr-steps", a.pr_steps, "uniform recall grid size")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--ap-denominator", a.ap_denominator, "min = min(R, relevant), total = relevant")
      ->check(CLI::IsMember({"min", "total"}))
      ->capture_default_str();
  app.add_option("--out", a.out, "metrics CSV")->required();
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

int run_eval(const EvalArgs& a) {
  Stopwatch clock;
  const auto q = adsq::load_codes(a.query_codes);
  const auto db = adsq::load_codes(a.db_codes);
  if (q.k_total != db.k_total) {
    throw adsq::ArgumentError("query codes have " + std::to_string(q.k_total) + " bits, database codes " +
                              std::to_string(db.k_total));
  }
  const adsq::RelevanceJudge judge(adsq::load_labels(a.query_labels), adsq::load_labels(a.db_labels));
  const auto denom =
      a.ap_denominator == "total" ? adsq::ApDenominator::total_relevant : adsq::ApDenominator::min_cutoff_total;

  std::ostringstream csv;
  csv << "metric,k_total,value,grid_point\n";
  const std::string k = std::to_string(q.k_total);
  json summary;
  for (const auto& metric : a.metrics) {
    if (metric == "map") {
      const double v = adsq::mean_ap(q, db, judge, a.map_r, denom);
      csv << "map," << k << ',' << fmt(v) << ',' << a.map_r << '\n';
      summary["map"] = v;
    } else if (metric == "ph2") {
      const double v = adsq::mean_precision_at_hamming2(q, db, judge);
      csv << "ph2," << k << ',' << fmt(v) << ",\n";
      summary["ph2"] = v;
    } else if (metric == "pr") {
      for (const auto& p : adsq::pr_curve(q, db, judge, adsq::uniform_recall_grid(a.pr_steps)))
        csv << "pr," << k << ',' << fmt(p.precision) << ',' << fmt(p.x) << '\n';
    } else if (metric == "pn") {
      std::vector<std::size_t> ns = a.pn_list;
      if (ns.empty()) {
        for (std::size_t n : {1, 10, 100, 1000})
          if (n <= db.n) ns.push_back(n);
      }
      for (const auto& p : adsq::precision_at_n(q, db, judge, ns))
        csv << "pn," << k << ',' << fmt(p.precision) << ',' << static_cast<std::size_t>(p.x) << '\n';
    }
  }

  Manifest m("eval");
  m.set("config", {{"metrics", a.metrics},
                   {"map_r", a.map_r},
                   {"pr_steps", a.pr_steps},
                   {"pn_list", a.pn_list},
                   {"ap_denominator", a.ap_denominator}});
  m.set("seeds", json::object());
  m.set("summary", summary);
  for (const auto& p : {a.query_codes, a.db_codes, a.query_labels, a.db_labels}) m.input(p);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text(out, csv.str());
  m.output(out);
  m.phase("eval", clock.seconds());
  m.save(a.out + ".manifest.json");
  std::cout << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adsq: asymmetric deep semantic quantization toolkit"};
  app.set_version_flag("--version", std::string(ADSQ_VERSION));
  app.require_subcommand(1);

  SynthArgs synth_args;
  TrainArgs train_args;
  EncodeArgs encode_args;
  EvalArgs eval_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic Gaussian-cluster dataset");
  auto* trainc = app.add_subcommand("train", "train LabelNet and both image networks");
  auto* encode = app.add_subcommand("encode", "encode features into packed codes");
  auto* eval = app.add_subcommand("eval", "retrieval metrics for query/database codes");
  register_synth(*synth, synth_args);
  register_train(*trainc, train_args);
  register_encode(*encode, encode_args);
  register_eval(*eval, eval_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (trainc->parsed()) return run_train(train_args);
    if (encode->parsed()) return run_encode(encode_args);
    if (eval->parsed()) return run_eval(eval_args);
  } catch (const adsq::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

// treefit: fit tree metrics to distance data.
//
//   treefit delta    INPUT [--mode exact|smooth|batched]
//   treefit fit      INPUT -o PREFIX [optimizer flags]
//   treefit embed    MATRIX -o PREFIX [--roots ...] [--reference REF]
//   treefit eval     A B
//   treefit gen      KIND -o OUT [generator flags]
//   treefit pipeline INPUT -o PREFIX [optimizer and root flags]
//
// Exit status: 0 success, 2 usage or input error, 3 size guard refusal.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "treefit/error.hpp"
#include "treefit/format.hpp"
#include "treefit/graph.hpp"
#include "treefit/io.hpp"
#include "treefit/metric.hpp"
#include "treefit/optimizer.hpp"
#include "treefit/report.hpp"
#include "treefit/smooth_delta.hpp"
#include "treefit/synthetic.hpp"
#include "treefit/tree_embed.hpp"

namespace {

using namespace treefit;

constexpr std::size_t kQuarticGuard = 1500;

struct GuardRefusal : Error {
  using Error::Error;
};

// ------------------------------------------------------------------ inputs

struct Input {
  DistanceMatrix d;
  std::vector<std::string> labels;  // empty for matrix inputs
  std::string dataset;
};

std::string dataset_id(const std::string& path) { return std::filesystem::path(path).stem().string(); }

Input load_input(const std::string& path, const std::string& kind) {
  std::string k = kind;
  if (k == "auto") k = std::filesystem::path(path).extension() == ".csv" ? "matrix" : "edges";
  Input in;
  in.dataset = dataset_id(path);
  if (k == "edges") {
    const Graph g = load_edge_list(path);
    const Graph c = largest_component(g);
    if (c.node_count() < g.node_count())
      std::cerr << "warning: kept largest component (" << c.node_count() << " of " << g.node_count()
                << " nodes)\n";
    in.d = all_pairs_shortest_paths(c);
    in.labels = c.labels();
  } else if (k == "matrix") {
    std::vector<std::string> warnings;
    in.d = load_dense_csv(path, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << path << ": " << w << '\n';
  } else {
    in.d = cosine_dissimilarity(load_feature_csv(path));
  }
  return in;
}

std::vector<std::string> load_labels(const std::string& path, std::size_t n) {
  auto in = std::ifstream(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<std::string> labels;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) labels.push_back(line);
  if (labels.size() != n)
    throw DimensionError(path + ": " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                         " points");
  return labels;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// ------------------------------------------------------------------- roots

struct RootOptions {
  std::string roots;
  std::optional<std::uint64_t> root_seed;
};

// "--roots 0,4,7" or "--roots all"; with --root-seed, "--roots N" draws N
// distinct roots (capped at n) from the seeded stream.
std::vector<std::size_t> select_roots(const RootOptions& opt, std::size_t n) {
  if (n == 0) throw ValueError("empty input");
  auto parse_index = [](const std::string& tok) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || tok.empty() || tok[0] == '-') throw ConfigError("bad root value '" + tok + "'");
    return static_cast<std::size_t>(v);
  };
  if (opt.root_seed) {
    const std::size_t count = opt.roots.empty() ? 10 : parse_index(opt.roots);
    if (count == 0) throw ConfigError("root count must be positive");
    Rng rng(*opt.root_seed);
    auto picked = rng.sample_without_replacement(n, std::min(count, n));
    std::sort(picked.begin(), picked.end());
    return picked;
  }
  if (opt.roots == "all") {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  std::vector<std::size_t> out;
  std::stringstream ss(opt.roots.empty() ? "0" : opt.roots);
  for (std::string tok; std::getline(ss, tok, ',');) {
    const auto r = parse_index(tok);
    if (r >= n) throw IndexError("root " + tok + " out of range for n=" + std::to_string(n));
    if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
  }
  if (out.empty()) throw ConfigError("no roots given");
  return out;
}

// -------------------------------------------------------------- shared work

std::optional<double> maybe_exact_delta(const DistanceMatrix& d, std::size_t limit) {
  if (d.size() > limit) return std::nullopt;
  return delta_exact(d);
}

// Embeds `fitted` at each root, writes the tree files and scores against
// `reference`; `baseline` (if given) is embedded at the same roots as well.
std::vector<RootResult> embed_roots(const DistanceMatrix& fitted, const DistanceMatrix& reference,
                                    const DistanceMatrix* baseline, const std::vector<std::size_t>& roots,
                                    const std::vector<std::string>& labels, const std::string& prefix) {
  require_same_size(fitted.size(), reference.size(), "embed");
  std::vector<RootResult> out;
  for (auto w : roots) {
    const auto dt = gromov_tree_metric(fitted, w);
    const auto tree = reconstruct_tree(dt, w);
    const std::string stem = prefix + ".root" + std::to_string(w);
    write_text(stem + ".nwk", to_newick(tree, labels) + "\n");
    write_text(stem + ".edges.tsv", to_edge_tsv(tree));
    RootResult r;
    r.root = w;
    r.linf = distortion_linf(dt, reference);
    r.l1_avg = fitted.size() >= 2 ? distortion_l1_avg(dt, reference) : 0.0;
    if (baseline) {
      const auto base = gromov_tree_metric(*baseline, w);
      r.baseline_linf = distortion_linf(base, reference);
      r.baseline_l1_avg = fitted.size() >= 2 ? distortion_l1_avg(base, reference) : 0.0;
    }
    out.push_back(r);
  }
  return out;
}

void fill_fit_report(RunReport& rep, const Input& in, const FitConfig& cfg, const FitResult& res,
                     std::size_t exact_limit) {
  rep.n = in.d.size();
  rep.config = cfg;
  rep.epochs_run = res.epochs_run;
  rep.stopped_early = res.stopped_early;
  rep.best_epoch = res.best_epoch;
  rep.best_loss = res.best_loss;
  rep.fit_linf = distortion_linf(res.best_matrix, in.d);
  rep.delta_input = maybe_exact_delta(in.d, exact_limit);
  rep.delta_fitted = maybe_exact_delta(res.best_matrix, exact_limit);
  if (rep.delta_input && rep.n >= 4) rep.theorem2_bound = theorem2_bound(*rep.delta_input, rep.n, cfg.mu, *rep.fit_linf);
}

void write_fit_outputs(const std::string& prefix, const Input& in, const FitResult& res) {
  {
    auto out = open_output(prefix + ".matrix.csv");
    write_matrix_csv(out, res.best_matrix);
  }
  {
    auto out = open_output(prefix + ".trace.csv");
    write_trace_csv(out, res.trace);
  }
  if (!in.labels.empty()) {
    std::string text;
    for (const auto& l : in.labels) text += l + '\n';
    write_text(prefix + ".labels.txt", text);
  }
}

std::string csv_optional(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

void print_roots(const std::vector<RootResult>& roots, const std::string& format, const Json& report) {
  if (format == "json") {
    std::cout << report.dump(2) << '\n';
    return;
  }
  std::cout << "root,linf,l1_avg,baseline_linf,baseline_l1_avg\n";
  for (const auto& r : roots)
    std::cout << r.root << ',' << format_double(r.linf) << ',' << format_double(r.l1_avg) << ','
              << csv_optional(r.baseline_linf) << ',' << csv_optional(r.baseline_l1_avg) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void add_fit_flags(CLI::App* cmd, FitConfig& cfg) {
  cmd->add_option("--mu", cfg.mu, "fidelity weight")->capture_default_str();
  cmd->add_option("--lambda", cfg.lambda, "smoothing scale")->capture_default_str();
  cmd->add_option("--batches", cfg.batches, "batch count K")->capture_default_str();
  cmd->add_option("--batch-size", cfg.batch_size, "batch size m")->capture_default_str();
  cmd->add_option("--lr", cfg.lr, "Adam step size")->capture_default_str();
  cmd->add_option("--epochs", cfg.max_epochs, "maximum epochs")->capture_default_str();
  cmd->add_option("--patience", cfg.patience, "epochs without improvement before stopping")->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "batch sampling seed")->capture_default_str();
  cmd->add_option("--floor", cfg.weight_floor, "minimum off-diagonal weight before projection")
      ->capture_default_str();
  cmd->add_option("--accum-chunks", cfg.accum_chunks, "gradient accumulation chunks")->capture_default_str();
}

void add_root_flags(CLI::App* cmd, RootOptions& roots) {
  cmd->add_option("--roots", roots.roots, "root ids (comma separated), 'all', or a count with --root-seed");
  cmd->add_option("--root-seed", roots.root_seed, "sample roots from this seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fit tree metrics to distance data"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string format = "json";
  app.add_option("--format", format, "stdout format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

  // delta
  auto* delta_cmd = app.add_subcommand("delta", "hyperbolicity of an input");
  std::string delta_input, input_kind = "auto", mode = "exact";
  double delta_lambda = 10.0;
  std::size_t delta_k = 1, delta_m = 0;
  std::uint64_t delta_seed = 0;
  bool override_guard = false;
  delta_cmd->add_option("input", delta_input, "edge list or dense csv")->required();
  delta_cmd->add_option("--input-kind", input_kind)->check(CLI::IsMember({"auto", "edges", "matrix", "features"}));
  delta_cmd->add_option("--mode", mode)->check(CLI::IsMember({"exact", "smooth", "batched"}))->capture_default_str();
  delta_cmd->add_option("--lambda", delta_lambda)->capture_default_str();
  delta_cmd->add_option("--batches", delta_k)->capture_default_str();
  delta_cmd->add_option("--batch-size", delta_m, "defaults to n");
  delta_cmd->add_option("--seed", delta_seed)->capture_default_str();
  delta_cmd->add_flag("--override-size-guard", override_guard, "allow O(n^4) modes above n=1500");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "optimize the distance matrix");
  std::string fit_input, fit_prefix;
  FitConfig cfg;
  std::size_t exact_limit = 300;
  fit_cmd->add_option("input", fit_input)->required();
  fit_cmd->add_option("-o,--output", fit_prefix, "output prefix")->required();
  fit_cmd->add_option("--input-kind", input_kind)->check(CLI::IsMember({"auto", "edges", "matrix", "features"}));
  fit_cmd->add_option("--exact-delta-limit", exact_limit, "report exact delta only up to this n")
      ->capture_default_str();
  add_fit_flags(fit_cmd, cfg);

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "Gromov tree embedding at one or more roots");
  std::string embed_input, embed_prefix, reference_path, labels_path;
  RootOptions roots;
  embed_cmd->add_option("matrix", embed_input)->required();
  embed_cmd->add_option("-o,--output", embed_prefix)->required();
  embed_cmd->add_option("--input-kind", input_kind)->check(CLI::IsMember({"auto", "edges", "matrix", "features"}));
  embed_cmd->add_option("--reference", reference_path, "score against this matrix (default: the input)");
  embed_cmd->add_option("--labels", labels_path, "one label per line for the Newick output");
  add_root_flags(embed_cmd, roots);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "distortion between two matrices");
  std::string eval_a, eval_b;
  eval_cmd->add_option("a", eval_a)->required();
  eval_cmd->add_option("b", eval_b)->required();

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "synthetic graphs");
  std::string kind, gen_out;
  std::size_t gen_n = 10, rows = 3, cols = 3;
  double p = 0.3, p_in = 0.6, p_out = 0.2, wmin = 1.0, wmax = 1.0;
  std::vector<std::size_t> sizes{50, 50, 50, 50, 50};
  std::uint64_t gen_seed = 0;
  gen_cmd->add_option("kind", kind)->required()->check(CLI::IsMember({"tree", "cycle", "grid", "er", "sbm"}));
  gen_cmd->add_option("-o,--output", gen_out)->required();
  gen_cmd->add_option("--n", gen_n)->capture_default_str();
  gen_cmd->add_option("--rows", rows)->capture_default_str();
  gen_cmd->add_option("--cols", cols)->capture_default_str();
  gen_cmd->add_option("--p", p, "edge probability (er)")->capture_default_str();
  gen_cmd->add_option("--sizes", sizes, "block sizes (sbm)")->delimiter(',');
  gen_cmd->add_option("--p-in", p_in)->capture_default_str();
  gen_cmd->add_option("--p-out", p_out)->capture_default_str();
  gen_cmd->add_option("--wmin", wmin, "tree edge weight range")->capture_default_str();
  gen_cmd->add_option("--wmax", wmax)->capture_default_str();
  gen_cmd->add_option("--seed", gen_seed)->capture_default_str();

  // pipeline
  auto* pipe_cmd = app.add_subcommand("pipeline", "fit, then embed and score against the input");
  std::string pipe_input, pipe_prefix;
  pipe_cmd->add_option("input", pipe_input)->required();
  pipe_cmd->add_option("-o,--output", pipe_prefix)->required();
  pipe_cmd->add_option("--input-kind", input_kind)->check(CLI::IsMember({"auto", "edges", "matrix", "features"}));
  pipe_cmd->add_option("--exact-delta-limit", exact_limit)->capture_default_str();
  add_fit_flags(pipe_cmd, cfg);
  add_root_flags(pipe_cmd, roots);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    if (delta_cmd->parsed()) {
      const Input in = load_input(delta_input, input_kind);
      const std::size_t n = in.d.size();
      if (mode != "batched" && n > kQuarticGuard && !override_guard)
        throw GuardRefusal(mode + " mode is O(n^4); n=" + std::to_string(n) + " exceeds " +
                           std::to_string(kQuarticGuard) + " (use --override-size-guard)");
      double value = 0.0;
      if (mode == "exact") {
        value = delta_exact(in.d);
      } else if (mode == "smooth") {
        value = delta_smooth(in.d, {delta_lambda});
      } else {
        const std::size_t m = delta_m == 0 ? n : delta_m;
        value = delta_batched(in.d, {delta_lambda}, sample_batches(n, delta_k, m, delta_seed));
      }
      if (format == "json") {
        Json j{{"dataset", in.dataset}, {"n", n}, {"mode", mode}, {"delta", value}};
        if (mode != "exact") j["lambda"] = delta_lambda;
        std::cout << j.dump(2) << '\n';
      } else {
        std::cout << "dataset,n,mode,delta\n" << in.dataset << ',' << n << ',' << mode << ',' << format_double(value) << '\n';
      }
    } else if (fit_cmd->parsed() || pipe_cmd->parsed()) {
      const bool pipeline = pipe_cmd->parsed();
      const std::string prefix = pipeline ? pipe_prefix : fit_prefix;
      const Input in = load_input(pipeline ? pipe_input : fit_input, input_kind);
      std::vector<std::size_t> root_ids;
      if (pipeline) root_ids = select_roots(roots, in.d.size());
      const FitResult res = fit(in.d, cfg);
      write_fit_outputs(prefix, in, res);

      RunReport rep;
      rep.command = pipeline ? "pipeline" : "fit";
      rep.dataset = in.dataset;
      fill_fit_report(rep, in, cfg, res, exact_limit);
      if (pipeline) rep.roots = embed_roots(res.best_matrix, in.d, &in.d, root_ids, in.labels, prefix);
      rep.wall_clock_seconds = seconds_since(start);
      const Json j = to_json(rep);
      write_json(prefix + ".report.json", j);
      if (pipeline) {
        print_roots(rep.roots, format, j);
      } else if (format == "json") {
        std::cout << j.dump(2) << '\n';
      } else {
        std::cout << "dataset,n,epochs_run,best_loss,delta_input,delta_fitted\n"
                  << rep.dataset << ',' << rep.n << ',' << res.epochs_run << ',' << format_double(res.best_loss)
                  << ',' << csv_optional(rep.delta_input) << ',' << csv_optional(rep.delta_fitted) << '\n';
      }
    } else if (embed_cmd->parsed()) {
      const Input in = load_input(embed_input, input_kind);
      const std::size_t n = in.d.size();
      std::optional<Input> ref;
      if (!reference_path.empty()) ref = load_input(reference_path, "auto");
      std::vector<std::string> labels = labels_path.empty() ? in.labels : load_labels(labels_path, n);
      const auto root_ids = select_roots(roots, n);

      RunReport rep;
      rep.command = "embed";
      rep.dataset = in.dataset;
      rep.n = n;
      if (ref) require_same_size(n, ref->d.size(), "reference");
      rep.roots = embed_roots(in.d, ref ? ref->d : in.d, ref ? &ref->d : nullptr, root_ids, labels, embed_prefix);
      rep.wall_clock_seconds = seconds_since(start);
      const Json j = to_json(rep);
      write_json(embed_prefix + ".report.json", j);
      print_roots(rep.roots, format, j);
    } else if (eval_cmd->parsed()) {
      const Input a = load_input(eval_a, "auto"), b = load_input(eval_b, "auto");
      require_same_size(a.d.size(), b.d.size(), "eval");
      const double linf = distortion_linf(a.d, b.d);
      const double l1 = a.d.size() >= 2 ? distortion_l1_avg(a.d, b.d) : 0.0;
      if (format == "json")
        std::cout << Json{{"n", a.d.size()}, {"linf", linf}, {"l1_avg", l1}}.dump(2) << '\n';
      else
        std::cout << "n,linf,l1_avg\n" << a.d.size() << ',' << format_double(linf) << ',' << format_double(l1) << '\n';
    } else if (gen_cmd->parsed()) {
      Graph g;
      std::vector<std::size_t> blocks;
      if (kind == "tree") {
        g = gen_tree(gen_n, gen_seed, {wmin, wmax});
      } else if (kind == "cycle") {
        g = gen_cycle(gen_n);
      } else if (kind == "grid") {
        g = gen_grid(rows, cols);
      } else if (kind == "er") {
        g = gen_er(gen_n, p, gen_seed);
      } else {
        auto sbm = gen_sbm({sizes, p_in, p_out, gen_seed});
        g = std::move(sbm.graph);
        blocks = std::move(sbm.blocks);
      }
      {
        auto out = open_output(gen_out);
        write_edge_list(out, g);
      }
      if (!blocks.empty()) {
        std::string text = "node,block\n";
        for (std::size_t i = 0; i < blocks.size(); ++i) text += std::to_string(i) + ',' + std::to_string(blocks[i]) + '\n';
        write_text(gen_out + ".blocks.csv", text);
      }
    }
  } catch (const GuardRefusal& e) {
    std::cerr << "refused: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

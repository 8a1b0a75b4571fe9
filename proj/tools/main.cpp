#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rankformer/checkpoint.hpp"
#include "rankformer/encoder.hpp"
#include "rankformer/eval.hpp"
#include "rankformer/graph.hpp"
#include "rankformer/oracle.hpp"
#include "rankformer/rankformer.hpp"
#include "rankformer/rng.hpp"
#include "rankformer/synthetic.hpp"
#include "rankformer/threading.hpp"
#include "rankformer/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rankformer;

namespace {

constexpr const char* kVersion = "rankformer 0.1.0";

std::string fnv_hex_of_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(buf.str());
  return hex.str();
}

void write_run_metadata(const fs::path& dir, const std::map<std::string, std::string>& resolved) {
  fs::create_directories(dir);
  std::ofstream out(dir / "config.resolved", std::ios::trunc);
  out << "version=" << kVersion << "\n";
  for (const auto& [key, value] : resolved) out << key << "=" << value << "\n";
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

void write_edges_tsv(const fs::path& path, const std::vector<Edge>& edges,
                     const InteractionGraph& g) {
  std::ofstream out(path, std::ios::trunc);
  for (const Edge& e : edges) {
    out << g.user_keys[e.u] << '\t' << g.item_keys[e.i] << '\n';
  }
}

DatasetSplit load_split_dir(const fs::path& dir) {
  const auto read = [&](const char* name) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) throw std::runtime_error("missing split file: " + p.string());
    return load_interactions(p, FileFormat::tsv);
  };
  const RawInteractions train_raw = read("train.tsv");
  const RawInteractions val_raw = read("val.tsv");
  const RawInteractions test_raw = read("test.tsv");

  // One universe over all three lists, first-appearance order, so every
  // held-out user and item has an embedding row.
  RawInteractions all;
  all.pairs = train_raw.pairs;
  all.pairs.insert(all.pairs.end(), val_raw.pairs.begin(), val_raw.pairs.end());
  all.pairs.insert(all.pairs.end(), test_raw.pairs.begin(), test_raw.pairs.end());
  const InteractionGraph universe = build_graph(all);

  std::vector<Edge> train_edges;
  const auto to_edges = [&universe](const RawInteractions& raw) {
    std::vector<Edge> out;
    out.reserve(raw.pairs.size());
    for (const auto& [u, i] : raw.pairs) {
      out.push_back({universe.user_index.at(u), universe.item_index.at(i)});
    }
    return out;
  };
  train_edges = to_edges(train_raw);

  DatasetSplit split;
  split.train = build_graph(train_edges, universe.n, universe.m);
  split.train.user_keys = universe.user_keys;
  split.train.item_keys = universe.item_keys;
  split.train.user_index = universe.user_index;
  split.train.item_index = universe.item_index;
  split.val = to_edges(val_raw);
  split.test = to_edges(test_raw);
  return split;
}

struct EncoderFlags {
  std::string encoder = "rankformer";
  double tau = 0.5;
  double alpha = 2.0;
  int layers = 2;
  bool no_warmup = false;
  bool no_normalize = false;
  bool no_normalizers = false;
  std::string combine = "mean";

  void attach(CLI::App* cmd) {
    cmd->add_option("--encoder", encoder, "Encoder: rankformer | mf | lightgcn")
        ->check(CLI::IsMember({"rankformer", "mf", "lightgcn"}))
        ->capture_default_str();
    cmd->add_option("--tau", tau, "Rankformer step size")->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--alpha", alpha, "Offset separating positive/negative weights")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--layers", layers, "Number of encoder layers")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_flag("--no-warmup", no_warmup, "Disable the uniform first layer");
    cmd->add_flag("--no-normalize", no_normalize, "Disable per-layer row normalization");
    cmd->add_flag("--no-normalizers", no_normalizers, "Drop the C_u/C_i normalizers (C = 1)");
    cmd->add_option("--combine", combine, "LightGCN layer combination: mean | last")
        ->check(CLI::IsMember({"mean", "last"}))
        ->capture_default_str();
  }

  EncoderConfig build() const {
    EncoderConfig cfg;
    if (encoder == "rankformer") {
      cfg.kind = EncoderConfig::Kind::rankformer;
      cfg.rankformer.tau = tau;
      cfg.rankformer.alpha = alpha;
      cfg.rankformer.layers = layers;
      cfg.rankformer.warmup_first_layer = !no_warmup;
      cfg.rankformer.normalize_embeddings = !no_normalize;
      cfg.rankformer.use_normalizers = !no_normalizers;
    } else if (encoder == "mf") {
      cfg.kind = EncoderConfig::Kind::mf;
      cfg.baseline.kind = BaselineConfig::Kind::mf;
      cfg.baseline.layers = 0;
    } else {
      cfg.kind = EncoderConfig::Kind::lightgcn;
      cfg.baseline.kind = BaselineConfig::Kind::lightgcn;
      cfg.baseline.layers = layers;
      cfg.baseline.combine =
          combine == "mean" ? BaselineConfig::Combine::mean : BaselineConfig::Combine::last;
    }
    cfg.validate();
    return cfg;
  }

  std::map<std::string, std::string> resolved() const {
    return {{"encoder", encoder},
            {"tau", fmt(tau)},
            {"alpha", fmt(alpha)},
            {"layers", std::to_string(layers)},
            {"warmup", no_warmup ? "off" : "on"},
            {"normalize", no_normalize ? "off" : "on"},
            {"normalizers", no_normalizers ? "off" : "on"},
            {"combine", combine}};
  }
};

void write_metrics_csv(const fs::path& path, const std::string& split_name,
                       const EvalResult& result, bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!append) out << "split,K,recall,ndcg,users\n";
  for (const auto& per : result.per_k) {
    out << split_name << ',' << per.k << ',' << fmt(per.recall) << ',' << fmt(per.ndcg) << ','
        << result.users_evaluated << "\n";
  }
}

double median_ms(std::vector<double>& samples) {
  std::sort(samples.begin(), samples.end());
  const std::size_t mid = samples.size() / 2;
  return samples.size() % 2 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
}

template <typename Fn>
std::pair<double, double> time_median_spread(Fn&& fn, int repeats) {
  fn();  // warm-up
  std::vector<double> samples;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    samples.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count());
  }
  const double lo = *std::min_element(samples.begin(), samples.end());
  const double hi = *std::max_element(samples.begin(), samples.end());
  const double med = median_ms(samples);
  return {med, (hi - lo) / med};
}

// ---------------------------------------------------------------------------

int cmd_prepare(const fs::path& data, const std::string& format, int k_core, std::uint64_t seed,
                bool per_user, const fs::path& out_dir) {
  const FileFormat fmt_enum = format == "csv" ? FileFormat::csv : FileFormat::tsv;
  RawInteractions raw = load_interactions(data, fmt_enum);
  std::cout << "loaded " << raw.pairs.size() << " interactions from " << data << "\n";
  if (raw.pairs.empty()) std::cout << "warning: input file is empty\n";
  raw = apply_k_core(raw, k_core);
  std::cout << "after " << k_core << "-core: " << raw.pairs.size() << " interactions\n";

  const DatasetSplit split = split_dataset(raw, {.seed = seed, .per_user = per_user});
  fs::create_directories(out_dir);
  write_edges_tsv(out_dir / "train.tsv", split.train.edges(), split.train);
  write_edges_tsv(out_dir / "val.tsv", split.val, split.train);
  write_edges_tsv(out_dir / "test.tsv", split.test, split.train);

  json manifest;
  manifest["seed"] = seed;
  manifest["k_core"] = k_core;
  manifest["ratio"] = "7:1:2";
  manifest["per_user_split"] = per_user;
  manifest["n_users"] = split.train.n;
  manifest["n_items"] = split.train.m;
  manifest["counts"] = {{"train", split.train.e},
                        {"val", split.val.size()},
                        {"test", split.test.size()}};
  manifest["checksums"] = {{"train", fnv_hex_of_file(out_dir / "train.tsv")},
                           {"val", fnv_hex_of_file(out_dir / "val.tsv")},
                           {"test", fnv_hex_of_file(out_dir / "test.tsv")}};
  std::ofstream(out_dir / "split.json") << manifest.dump(2) << "\n";

  write_run_metadata(out_dir, {{"command", "prepare"},
                               {"data", data.string()},
                               {"format", format},
                               {"k_core", std::to_string(k_core)},
                               {"seed", std::to_string(seed)},
                               {"per_user_split", per_user ? "true" : "false"}});

  std::cout << "graph: n=" << split.train.n << " m=" << split.train.m << " E=" << split.train.e
            << "\nsplit: train=" << split.train.e << " val=" << split.val.size()
            << " test=" << split.test.size() << "\nwrote " << (out_dir / "split.json") << "\n";
  return 0;
}

int cmd_train(const fs::path& data_dir, const EncoderFlags& enc, TrainConfig train_cfg,
              const fs::path& out_dir) {
  const DatasetSplit split = load_split_dir(data_dir);
  const EncoderConfig encoder = enc.build();

  auto resolved = enc.resolved();
  resolved["command"] = "train";
  resolved["data"] = data_dir.string();
  resolved["lr"] = fmt(train_cfg.lr);
  resolved["weight_decay"] = fmt(train_cfg.weight_decay);
  resolved["epochs"] = std::to_string(train_cfg.epochs);
  resolved["batch_size"] = std::to_string(train_cfg.batch_size);
  resolved["negatives_per_positive"] = std::to_string(train_cfg.negatives_per_positive);
  resolved["patience"] = std::to_string(train_cfg.patience);
  resolved["seed"] = std::to_string(train_cfg.seed);
  resolved["grad_mode"] = train_cfg.grad_mode == GradMode::through_layers ? "through_layers"
                                                                          : "detached_weights";
  resolved["dim"] = std::to_string(train_cfg.embedding_dim);
  write_run_metadata(out_dir, resolved);

  const TrainResult result = train(split, encoder, train_cfg, &std::cout);

  {
    std::ofstream hist(out_dir / "history.csv", std::ios::trunc);
    hist << "epoch,loss,recall@20,ndcg@20,seconds\n";
    for (const auto& row : result.history) {
      hist << row.epoch << ',' << fmt(row.loss) << ',' << fmt(row.recall20) << ','
           << fmt(row.ndcg20) << ',' << fmt(row.seconds) << "\n";
    }
  }

  std::map<std::string, std::string> ckpt_manifest = resolved;
  ckpt_manifest["best_epoch"] = std::to_string(result.best_epoch);
  save_checkpoint(out_dir / "checkpoint.bin", result.best_embeddings, split.train.n,
                  split.train.m, ckpt_manifest);

  EvalConfig eval_cfg;
  const Mat encoded = encoder_forward(split.train, result.best_embeddings, encoder);
  const EvalResult val_res = evaluate(split.train, encoded, split.val, {}, eval_cfg);
  const EvalResult test_res = evaluate(split.train, encoded, split.test,
                                       eval_cfg.mask_val_at_test ? split.val : std::vector<Edge>{},
                                       eval_cfg);
  write_metrics_csv(out_dir / "metrics.csv", "val", val_res, false);
  write_metrics_csv(out_dir / "metrics.csv", "test", test_res, true);

  std::cout << "best epoch " << result.best_epoch << " val ndcg@20 " << result.best_val_metric
            << "\nfinal: val recall@20 " << val_res.per_k[0].recall << " ndcg@20 "
            << val_res.per_k[0].ndcg << " | test recall@20 " << test_res.per_k[0].recall
            << " ndcg@20 " << test_res.per_k[0].ndcg << "\n";

  if (result.diverged) {
    std::cerr << "training diverged (non-finite loss); last good checkpoint written\n";
    return 2;
  }
  return 0;
}

int cmd_evaluate(const fs::path& data_dir, const fs::path& checkpoint,
                 const std::string& split_name, std::vector<int> ks, const fs::path& out_dir) {
  const DatasetSplit split = load_split_dir(data_dir);
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  if (ckpt.n != split.train.n || ckpt.m != split.train.m) {
    throw std::runtime_error("checkpoint dimensions do not match the prepared split");
  }
  EvalConfig cfg;
  cfg.ks = std::move(ks);

  const auto& heldout = split_name == "val" ? split.val : split.test;
  std::vector<Edge> extra;
  if (split_name == "test" && cfg.mask_val_at_test) extra = split.val;
  const EvalResult result = evaluate(split.train, ckpt.z, heldout, extra, cfg);

  if (!out_dir.empty()) {
    write_run_metadata(out_dir, {{"command", "evaluate"},
                                 {"data", data_dir.string()},
                                 {"checkpoint", checkpoint.string()},
                                 {"split", split_name}});
    write_metrics_csv(out_dir / "metrics.csv", split_name, result, false);
  }
  for (const auto& per : result.per_k) {
    std::cout << split_name << " recall@" << per.k << " " << per.recall << " ndcg@" << per.k << " "
              << per.ndcg << " (" << result.users_evaluated << " users)\n";
  }
  return 0;
}

int cmd_sweep(const fs::path& data_dir, int max_layers, double tau, double alpha, Index dim,
              std::uint64_t seed, const fs::path& out_dir) {
  const DatasetSplit split = load_split_dir(data_dir);
  EvalConfig eval_cfg;

  EncoderConfig rf;
  rf.kind = EncoderConfig::Kind::rankformer;
  rf.rankformer.tau = tau;
  rf.rankformer.alpha = alpha;
  EncoderConfig lg;
  lg.kind = EncoderConfig::Kind::lightgcn;

  auto rows = layer_sweep(split, rf, max_layers, dim, seed, eval_cfg);
  const auto lg_rows = layer_sweep(split, lg, max_layers, dim, seed, eval_cfg);
  rows.insert(rows.end(), lg_rows.begin(), lg_rows.end());

  write_run_metadata(out_dir, {{"command", "sweep"},
                               {"data", data_dir.string()},
                               {"max_layers", std::to_string(max_layers)},
                               {"tau", fmt(tau)},
                               {"alpha", fmt(alpha)},
                               {"dim", std::to_string(dim)},
                               {"seed", std::to_string(seed)}});
  std::ofstream csv(out_dir / "sweep.csv", std::ios::trunc);
  csv << "encoder,L,ndcg@20\n";
  for (const auto& row : rows) {
    csv << row.encoder << ',' << row.layers << ',' << fmt(row.ndcg20) << "\n";
    std::cout << row.encoder << " L=" << row.layers << " ndcg@20 " << row.ndcg20 << "\n";
  }
  return 0;
}

int cmd_verify(const std::string& level, int instances, double inject_error) {
  int failures = 0;
  const auto report = [&failures](bool pass, const std::string& line) {
    std::cout << (pass ? "PASS " : "FAIL ") << line << "\n";
    if (!pass) ++failures;
  };

  // Fast/naive equivalence.
  {
    double worst = 0.0;
    for (int s = 0; s < instances; ++s) {
      const Index n = 10 + s % 41, m = 10 + (s * 7) % 41;
      const Index d = 2 + s % 7;
      const auto g = random_bipartite(n, m, std::min<Index>(m, 8), 1000 + s);
      const Mat z = random_embeddings(n + m, d, 2000 + s);
      RankformerConfig cfg;
      cfg.tau = (s % 2 == 0) ? 0.3 : 1.0;
      Mat fast = rankformer_layer(g, z, cfg);
      if (inject_error != 0.0) fast(0, 0) += inject_error;
      const Mat naive = oracle::naive_layer(g, z, cfg);
      for (Index r = 0; r < fast.rows(); ++r) {
        const double rel = (fast.row(r) - naive.row(r)).norm() / (naive.row(r).norm() + 1e-30);
        worst = std::max(worst, rel);
      }
    }
    report(worst <= 1e-6, "fast/naive equivalence: max rel row diff " + fmt(worst) + " over " +
                              std::to_string(instances) + " instances (tol 1e-6)");
  }

  // Gradient-step identity.
  {
    double worst_analytic = 0.0, worst_fd = 0.0;
    for (int s = 0; s < 50; ++s) {
      const auto g = random_bipartite(4, 6, 3, 3000 + s);
      const Mat z = random_embeddings(10, 3, 4000 + s);
      const auto rep = oracle::gradient_step_equivalence(g, z, 0.3 + 0.01 * (s % 50), 2.0);
      worst_analytic = std::max(worst_analytic, rep.max_abs_diff_analytic);
      worst_fd = std::max(worst_fd, rep.max_abs_diff_fd);
    }
    report(worst_analytic <= 1e-8,
           "gradient-step identity (analytic): max abs diff " + fmt(worst_analytic) + " (tol 1e-8)");
    report(worst_fd <= 1e-4,
           "gradient-step identity (finite differences): max abs diff " + fmt(worst_fd) +
               " (tol 1e-4)");
  }

  if (level == "full") {
    // Sign structure of the attention weights.
    {
      bool all_ok = true;
      for (int s = 0; s < 10; ++s) {
        const auto g = random_bipartite(8, 12, 6, 5000 + s);
        const Mat z = normalize_rows(random_embeddings(20, 4, 6000 + s));
        LayerWorkspace ws;
        compute_benchmarks(g, z, ws);
        for (Index u = 0; u < g.n && all_ok; ++u) {
          for (Index i = 0; i < g.m && all_ok; ++i) {
            if (g.has_edge(u, i)) {
              all_ok = attention_weight_pos(g, z, u, i, ws.b_neg, 2.0) > 0.0;
            } else {
              all_ok = attention_weight_neg(g, z, u, i, ws.b_pos, 2.0) < 0.0;
            }
          }
        }
      }
      report(all_ok, "sign structure: omega+ > 0 and omega- < 0 at alpha=2 with unit rows");
    }

    // Normalizer closed-form identity.
    {
      double worst = 0.0;
      for (int s = 0; s < 10; ++s) {
        const auto g = random_bipartite(7, 11, 5, 7000 + s);
        const Mat z = normalize_rows(random_embeddings(18, 4, 8000 + s));
        LayerWorkspace ws;
        compute_benchmarks(g, z, ws);
        for (Index u = 0; u < g.n; ++u) {
          double pos = 0.0, neg = 0.0;
          for (Index i = 0; i < g.m; ++i) {
            if (g.has_edge(u, i)) {
              pos += std::abs(attention_weight_pos(g, z, u, i, ws.b_neg, 2.0));
            } else {
              neg += std::abs(attention_weight_neg(g, z, u, i, ws.b_pos, 2.0));
            }
          }
          const double expected = ws.b_pos[u] - ws.b_neg[u] + 2.0;
          worst = std::max(worst, std::abs(pos - expected));
          worst = std::max(worst, std::abs(neg - expected));
        }
      }
      report(worst <= 1e-8, "normalizer identity: each side sums to b+ - b- + alpha, max err " +
                                fmt(worst) + " (tol 1e-8)");
    }

    // Lemma residual scaling.
    {
      int passed = 0;
      std::string detail;
      for (int s = 0; s < 3; ++s) {
        const auto g = random_bipartite(3, 5, 3, 9000 + s);
        const Mat z = random_embeddings(8, 2, 9100 + s);
        const auto rep = oracle::lookahead_residual_scaling(g, z, {0.2, 0.1, 0.05, 0.025}, 2.0);
        if (rep.pass) ++passed;
        for (double ratio : rep.ratios) detail += fmt(ratio) + " ";
      }
      report(passed == 3,
             "lookahead residual scaling: r(2t)/r(t) in [3,5] on 3 instances; ratios: " + detail);
    }
  }

  std::cout << (failures == 0 ? "verification passed" : "verification FAILED") << "\n";
  return failures == 0 ? 0 : 1;
}

int cmd_bench(const fs::path& out_dir, int repeats) {
  struct Case {
    std::string name;
    Index n, m, max_degree, d;
    bool time_naive;
  };
  // The fast grid sizes keep the edge term dominant; the naive grid stays
  // inside the oracle's n*m guard.
  const std::vector<Case> grid = {
      {"fast_base", 20000, 12000, 40, 8, false},
      {"fast_2E", 20000, 12000, 80, 8, false},
      {"fast_4m", 20000, 48000, 40, 8, false},
      {"naive_base", 400, 150, 40, 8, true},
      {"naive_4m", 400, 600, 40, 8, true},
      {"naive_16nm", 1600, 600, 10, 8, true},
  };

  RankformerConfig cfg;
  cfg.tau = 0.5;

  struct Row {
    Case c;
    Index e;
    double fast_ms, fast_spread, naive_ms;
  };
  std::vector<Row> rows;
  for (const auto& c : grid) {
    const auto g = random_bipartite(c.n, c.m, c.max_degree, 42);
    const Mat z = random_embeddings(c.n + c.m, c.d, 43);
    auto [fast_ms, spread] = time_median_spread([&] { rankformer_layer(g, z, cfg); }, repeats);
    double naive_ms = 0.0;
    if (c.time_naive) {
      auto [t, s] = time_median_spread([&] { oracle::naive_layer(g, z, cfg); }, repeats);
      naive_ms = t;
    }
    rows.push_back({c, g.e, fast_ms, spread, naive_ms});
    std::cout << c.name << ": n=" << c.n << " m=" << c.m << " E=" << g.e << " d=" << c.d
              << " fast " << fast_ms << " ms (spread " << spread * 100 << "%)";
    if (c.time_naive) std::cout << " naive " << naive_ms << " ms";
    std::cout << "\n";
  }

  if (!out_dir.empty()) {
    write_run_metadata(out_dir, {{"command", "bench"}, {"repeats", std::to_string(repeats)}});
    std::ofstream csv(out_dir / "bench.csv", std::ios::trunc);
    csv << "case,n,m,e,d,fast_ms,naive_ms\n";
    for (const auto& r : rows) {
      csv << r.c.name << ',' << r.c.n << ',' << r.c.m << ',' << r.e << ',' << r.c.d << ','
          << fmt(r.fast_ms) << ',' << (r.c.time_naive ? fmt(r.naive_ms) : "") << "\n";
    }
  }

  const auto find = [&rows](const std::string& name) -> const Row& {
    for (const auto& r : rows) {
      if (r.c.name == name) return r;
    }
    throw std::logic_error("missing bench case " + name);
  };

  int failures = 0;
  const auto assert_bench = [&failures](bool ok, const std::string& line) {
    std::cout << (ok ? "PASS " : "FAIL ") << line << "\n";
    if (!ok) ++failures;
  };

  const double e_ratio = find("fast_2E").fast_ms / find("fast_base").fast_ms;
  assert_bench(e_ratio >= 1.3 && e_ratio <= 3.0,
               "fast layer: doubling E scales time by " + fmt(e_ratio) + " (expect [1.3, 3.0])");
  const double m_ratio = find("fast_4m").fast_ms / find("fast_base").fast_ms;
  assert_bench(m_ratio < 8.0,
               "fast layer: quadrupling m scales time by " + fmt(m_ratio) + " (expect < 8)");
  const double naive_m_ratio = find("naive_4m").naive_ms / find("naive_base").naive_ms;
  const double fast_m_small = find("naive_4m").fast_ms / find("naive_base").fast_ms;
  const double relative_growth = naive_m_ratio / fast_m_small;
  assert_bench(relative_growth >= 3.0, "naive/fast ratio grows by " + fmt(relative_growth) +
                                           " when m quadruples (expect >= 3)");
  const double naive_sweep = find("naive_16nm").naive_ms / find("naive_base").naive_ms;
  assert_bench(naive_sweep >= 10.0, "naive layer scales with n*m: x" + fmt(naive_sweep) +
                                        " across a 16x n*m sweep (expect >= 10)");
  const double spread = find("fast_base").fast_spread;
  assert_bench(spread < 0.5,
               "measurement protocol: base point spread " + fmt(spread * 100) + "% (expect < 50%)");

  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rankformer: ranking-derived graph transformer for recommendation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (1 = bit-reproducible sequential)");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "k-core filter, split, and write graph artifacts");
  fs::path prep_data, prep_out = "prepared";
  std::string prep_format = "tsv";
  int k_core = 5;
  std::uint64_t prep_seed = 0;
  bool per_user = false;
  prepare->add_option("--data", prep_data, "Raw interaction file")->required();
  prepare->add_option("--format", prep_format, "tsv | csv")
      ->check(CLI::IsMember({"tsv", "csv"}));
  prepare->add_option("--k-core", k_core, "k-core threshold")->check(CLI::PositiveNumber);
  prepare->add_option("--seed", prep_seed, "Split seed");
  prepare->add_flag("--per-user-split", per_user, "Split each user's edges 7:1:2 instead of globally");
  prepare->add_option("--out", prep_out, "Output directory");
  prepare->set_config("--config");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train an encoder with sampled BPR");
  fs::path train_data, train_out = "run";
  EncoderFlags train_enc;
  TrainConfig train_cfg;
  train_cmd->add_option("--data", train_data, "Prepared split directory")->required();
  train_enc.attach(train_cmd);
  train_cmd->add_option("--lr", train_cfg.lr, "Learning rate")->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--weight-decay", train_cfg.weight_decay, "Decoupled weight decay")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train_cmd->add_option("--epochs", train_cfg.epochs, "Epoch budget")->capture_default_str();
  train_cmd->add_option("--batch-size", train_cfg.batch_size, "0 = full batch")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  train_cmd->add_option("--negatives", train_cfg.negatives_per_positive,
                        "Negatives per positive")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--patience", train_cfg.patience, "Early-stopping patience")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--seed", train_cfg.seed, "Master seed")->capture_default_str();
  std::string grad_mode = "through_layers";
  train_cmd->add_option("--grad-mode", grad_mode, "through_layers | detached_weights")
      ->check(CLI::IsMember({"through_layers", "detached_weights"}))
      ->capture_default_str();
  train_cmd->add_option("--dim", train_cfg.embedding_dim, "Embedding dimension")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--out", train_out, "Run directory");
  train_cmd->set_config("--config");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Full-ranking metrics for a checkpoint");
  fs::path eval_data, eval_ckpt, eval_out;
  std::string eval_split = "test";
  std::vector<int> eval_ks = {20};
  eval_cmd->add_option("--data", eval_data, "Prepared split directory")->required();
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--split", eval_split, "val | test")
      ->check(CLI::IsMember({"val", "test"}));
  eval_cmd->add_option("--ks", eval_ks, "Cutoffs K");
  eval_cmd->add_option("--out", eval_out, "Optional output directory");
  eval_cmd->set_config("--config");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Untrained layer sweep (Rankformer vs LightGCN)");
  fs::path sweep_data, sweep_out = "sweep";
  int sweep_layers = 4;
  double sweep_tau = 0.5, sweep_alpha = 2.0;
  Index sweep_dim = 64;
  std::uint64_t sweep_seed = 0;
  sweep_cmd->add_option("--data", sweep_data, "Prepared split directory")->required();
  sweep_cmd->add_option("--max-layers", sweep_layers, "Largest L")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--tau", sweep_tau, "Rankformer step size")->check(CLI::Range(0.0, 1.0));
  sweep_cmd->add_option("--alpha", sweep_alpha, "Offset")->check(CLI::NonNegativeNumber);
  sweep_cmd->add_option("--dim", sweep_dim, "Embedding dimension")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--seed", sweep_seed, "Init seed");
  sweep_cmd->add_option("--out", sweep_out, "Output directory");
  sweep_cmd->set_config("--config");

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "Oracle suites: equivalence, gradient step, lemma");
  std::string verify_level = "fast";
  int verify_instances = 100;
  double inject_error = 0.0;
  verify_cmd->add_option("--level", verify_level, "fast | full")
      ->check(CLI::IsMember({"fast", "full"}));
  verify_cmd->add_option("--instances", verify_instances, "Equivalence instance count")
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--inject-error", inject_error,
                         "Test hook: perturb the fast path output before comparing")
      ->group("");  // hidden
  verify_cmd->set_config("--config");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Complexity-scaling measurements");
  fs::path bench_out = "bench";
  int bench_repeats = 5;
  bench_cmd->add_option("--out", bench_out, "Output directory");
  bench_cmd->add_option("--repeats", bench_repeats, "Timed repeats per grid point")
      ->check(CLI::PositiveNumber);
  bench_cmd->set_config("--config");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) set_num_threads(threads);

  try {
    if (*prepare) {
      return cmd_prepare(prep_data, prep_format, k_core, prep_seed, per_user, prep_out);
    }
    if (*train_cmd) {
      train_cfg.grad_mode =
          grad_mode == "through_layers" ? GradMode::through_layers : GradMode::detached_weights;
      train_cfg.validate();
      return cmd_train(train_data, train_enc, train_cfg, train_out);
    }
    if (*eval_cmd) {
      return cmd_evaluate(eval_data, eval_ckpt, eval_split, eval_ks, eval_out);
    }
    if (*sweep_cmd) {
      return cmd_sweep(sweep_data, sweep_layers, sweep_tau, sweep_alpha, sweep_dim, sweep_seed,
                       sweep_out);
    }
    if (*verify_cmd) {
      return cmd_verify(verify_level, verify_instances, inject_error);
    }
    if (*bench_cmd) {
      return cmd_bench(bench_out, bench_repeats);
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

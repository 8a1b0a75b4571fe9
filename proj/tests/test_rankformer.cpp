#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rankformer/oracle.hpp"
#include "rankformer/rankformer.hpp"
#include "rankformer/synthetic.hpp"
#include "rankformer/threading.hpp"

using namespace rankformer;

TEST_CASE("normalize_rows") {
  SUBCASE("3-4-5 row") {
    Mat z(1, 2);
    z << 3, 4;
    const Mat out = normalize_rows(z);
    CHECK(out(0, 0) == doctest::Approx(0.6));
    CHECK(out(0, 1) == doctest::Approx(0.8));
  }
  SUBCASE("zero row passes through and is flagged") {
    Mat z = Mat::Zero(2, 3);
    z(0, 1) = 2.0;
    NormalizeReport report;
    const Mat out = normalize_rows(z, 1e-12, &report);
    CHECK(report.degenerate_rows == 1);
    CHECK(out.row(1).norm() == 0.0);
  }
  SUBCASE("random rows end up unit") {
    const Mat z = random_embeddings(10, 4, 3);
    const Mat out = normalize_rows(z);
    for (Index r = 0; r < out.rows(); ++r) {
      CHECK(std::abs(out.row(r).norm() - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("compute_benchmarks on the orthogonal construction") {
  const auto g = rftest::worked_graph();
  const Mat z = rftest::worked_embeddings();
  LayerWorkspace ws;
  compute_benchmarks(g, z, ws);
  CHECK(ws.b_pos[0] == doctest::Approx(1.0));
  CHECK(ws.b_neg[0] == doctest::Approx(0.0));
}

TEST_CASE("compute_benchmarks: identical item rows give b+ == b-") {
  const auto g = build_graph({{0, 0}, {0, 1}, {1, 1}, {1, 2}}, 2, 4);
  Mat z(6, 2);
  z.row(0) << 0.5, 0.5;
  z.row(1) << 1.0, 0.0;
  for (Index i = 0; i < 4; ++i) z.row(2 + i) << 0.2, 0.6;
  LayerWorkspace ws;
  compute_benchmarks(g, z, ws);
  for (Index u = 0; u < 2; ++u) {
    const double s = z.row(u).dot(z.row(2));
    CHECK(ws.b_pos[u] == doctest::Approx(s));
    CHECK(ws.b_neg[u] == doctest::Approx(s));
  }
}

TEST_CASE("compute_benchmarks matches the naive double loop") {
  const auto g = random_bipartite(8, 12, 6, 11);
  const Mat z = rftest::unit_rows(random_embeddings(20, 4, 12));
  LayerWorkspace ws;
  compute_benchmarks(g, z, ws);
  for (Index u = 0; u < g.n; ++u) {
    double pos = 0, neg = 0;
    for (Index i = 0; i < g.m; ++i) {
      const double dot = z.row(u).dot(z.row(g.n + i));
      (g.has_edge(u, i) ? pos : neg) += dot;
    }
    const Index du = g.user_degree[u];
    CHECK(ws.b_pos[u] == doctest::Approx(pos / du).epsilon(1e-10));
    CHECK(ws.b_neg[u] == doctest::Approx(neg / (g.m - du)).epsilon(1e-10));
  }
}

TEST_CASE("attention weights: plug-in values and sign structure") {
  const auto g = rftest::worked_graph();
  const Mat z = rftest::worked_embeddings();
  LayerWorkspace ws;
  compute_benchmarks(g, z, ws);
  CHECK(attention_weight_pos(g, z, 0, 0, ws.b_neg, 2.0) == doctest::Approx(3.0));
  CHECK(attention_weight_neg(g, z, 0, 1, ws.b_pos, 2.0) == doctest::Approx(-3.0));

  // alpha >= 2 with unit rows fixes all signs.
  const auto gr = random_bipartite(9, 14, 7, 21);
  const Mat zr = rftest::unit_rows(random_embeddings(23, 5, 22));
  LayerWorkspace wsr;
  compute_benchmarks(gr, zr, wsr);
  for (Index u = 0; u < gr.n; ++u) {
    for (Index i = 0; i < gr.m; ++i) {
      if (gr.has_edge(u, i)) {
        CHECK(attention_weight_pos(gr, zr, u, i, wsr.b_neg, 2.0) > 0.0);
      } else {
        CHECK(attention_weight_neg(gr, zr, u, i, wsr.b_pos, 2.0) < 0.0);
      }
    }
  }
}

TEST_CASE("normalizers: closed forms and worked values") {
  SUBCASE("b+=1, b-=0, alpha=2 gives C_u = 6") {
    const auto g = rftest::worked_graph();
    const Mat z = rftest::worked_embeddings();
    LayerWorkspace ws;
    compute_benchmarks(g, z, ws);
    compute_normalizers(g, z, 2.0, true, 1e-12, ws);
    CHECK(ws.c_user[0] == doctest::Approx(6.0));
  }
  SUBCASE("identical unit embeddings cancel the benchmarks: C_u = 2 alpha") {
    const auto g = build_graph({{0, 0}, {0, 1}, {1, 0}, {1, 2}}, 2, 4);
    Mat z(6, 3);
    for (Index r = 0; r < 6; ++r) z.row(r) << 1, 0, 0;
    LayerWorkspace ws;
    compute_benchmarks(g, z, ws);
    compute_normalizers(g, z, 2.0, true, 1e-12, ws);
    CHECK(ws.c_user[0] == doctest::Approx(4.0));
    CHECK(ws.c_user[1] == doctest::Approx(4.0));
  }
}

TEST_CASE("normalizers match the exhaustive absolute sums") {
  const auto g = random_bipartite(7, 11, 6, 31);
  const Mat z = rftest::unit_rows(random_embeddings(18, 4, 32));
  LayerWorkspace ws;
  compute_benchmarks(g, z, ws);
  compute_normalizers(g, z, 2.0, true, 1e-12, ws);

  for (Index u = 0; u < g.n; ++u) {
    double sum_abs = 0;
    for (Index i = 0; i < g.m; ++i) {
      sum_abs += std::abs(g.has_edge(u, i) ? attention_weight_pos(g, z, u, i, ws.b_neg, 2.0)
                                           : attention_weight_neg(g, z, u, i, ws.b_pos, 2.0));
    }
    CHECK(ws.c_user[u] == doctest::Approx(sum_abs).epsilon(1e-8));
  }
  for (Index i = 0; i < g.m; ++i) {
    double sum_abs = 0;
    for (Index u = 0; u < g.n; ++u) {
      sum_abs += std::abs(g.has_edge(u, i) ? attention_weight_pos(g, z, u, i, ws.b_neg, 2.0)
                                           : attention_weight_neg(g, z, u, i, ws.b_pos, 2.0));
    }
    CHECK(ws.c_item[i] == doctest::Approx(sum_abs).epsilon(1e-8));
  }
}

TEST_CASE("normalizer identity: each side sums to b+ - b- + alpha") {
  const auto g = random_bipartite(6, 9, 5, 41);
  const Mat z = rftest::unit_rows(random_embeddings(15, 3, 42));
  LayerWorkspace ws;
  compute_benchmarks(g, z, ws);
  for (Index u = 0; u < g.n; ++u) {
    double pos = 0, neg = 0;
    for (Index i = 0; i < g.m; ++i) {
      if (g.has_edge(u, i)) {
        pos += std::abs(attention_weight_pos(g, z, u, i, ws.b_neg, 2.0));
      } else {
        neg += std::abs(attention_weight_neg(g, z, u, i, ws.b_pos, 2.0));
      }
    }
    const double expected = ws.b_pos[u] - ws.b_neg[u] + 2.0;
    CHECK(pos == doctest::Approx(expected).epsilon(1e-8));
    CHECK(neg == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("rankformer_layer: tau = 0 is an exact fixed point") {
  const auto g = random_bipartite(5, 8, 4, 51);
  const Mat z = random_embeddings(13, 4, 52);  // deliberately unnormalized
  RankformerConfig cfg;
  cfg.tau = 0.0;
  const Mat out = rankformer_layer(g, z, cfg);
  CHECK((out - z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rankformer_layer reproduces the hand-expanded worked instance") {
  const auto g = rftest::worked_graph();
  const Mat z = rftest::worked_embeddings();
  RankformerConfig cfg;
  cfg.tau = 1.0;
  cfg.alpha = 2.0;
  cfg.warmup_first_layer = false;

  Mat expected(3, 2);
  expected << 0.5, -0.5,  // user pulled toward i0, pushed from i1
      1, 0,               // positive item aligns with its only user
      -1, 0;              // negative item pushed opposite the user
  const Mat fast = rankformer_layer(g, z, cfg);
  CHECK((fast - expected).cwiseAbs().maxCoeff() < 1e-12);
  const Mat naive = oracle::naive_layer(g, z, cfg);
  CHECK((naive - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fast layer matches the naive layer on random instances") {
  RankformerConfig cfg;
  cfg.alpha = 2.0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto g = random_bipartite(20, 30, 10, 100 + seed);
    const Mat z = random_embeddings(50, 8, 200 + seed);
    for (double tau : {0.3, 1.0}) {
      cfg.tau = tau;
      const Mat fast = rankformer_layer(g, z, cfg);
      const Mat naive = oracle::naive_layer(g, z, cfg);
      double worst = 0;
      for (Index r = 0; r < fast.rows(); ++r) {
        const double rel = (fast.row(r) - naive.row(r)).norm() / (naive.row(r).norm() + 1e-30);
        worst = std::max(worst, rel);
      }
      CHECK(worst < 1e-6);
    }
  }
}

TEST_CASE("fast layer matches naive with degenerate degrees (d_u = 0 and d_u = m)") {
  // user 0 likes everything, user 2 nothing (val/test-only user).
  std::vector<Edge> edges;
  for (Index i = 0; i < 4; ++i) edges.push_back({0, i});
  edges.push_back({1, 0});
  edges.push_back({1, 2});
  const auto g = build_graph(edges, 3, 4);
  const Mat z = random_embeddings(7, 3, 61);
  RankformerConfig cfg;
  cfg.tau = 0.7;
  const Mat fast = rankformer_layer(g, z, cfg);
  const Mat naive = oracle::naive_layer(g, z, cfg);
  CHECK((fast - naive).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("fast layer matches naive outside the closed-form regime") {
  RankformerConfig cfg;
  cfg.tau = 0.5;
  cfg.alpha = 2.5;
  cfg.normalize_embeddings = false;  // alpha >= 2 but no unit rows: fallback path
  const auto g = random_bipartite(10, 12, 6, 71);
  Mat z = random_embeddings(22, 4, 72);
  // keep rows comfortably inside the sign-safe band so the clamped negative
  // side stays exact and naive agreement is preserved
  z = rftest::unit_rows(z) * 0.9;
  const Mat fast = rankformer_layer(g, z, cfg);
  const Mat naive = oracle::naive_layer(g, z, cfg);
  CHECK((fast - naive).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("warmup layer") {
  SUBCASE("tau = 1 with a single item moves onto it") {
    const auto g = rftest::worked_graph();
    const Mat z = rftest::worked_embeddings();
    const Mat out = warmup_layer(g, z, 1.0);
    CHECK((out.row(0) - z.row(1)).norm() == 0.0);
  }
  SUBCASE("tau = 0.5 mean-blend example") {
    const auto g = build_graph({{0, 0}, {0, 1}}, 1, 2);
    Mat z(3, 2);
    z << 0, 0, 1, 0, 0, 1;
    const Mat out = warmup_layer(g, z, 0.5);
    CHECK(out(0, 0) == doctest::Approx(0.25));
    CHECK(out(0, 1) == doctest::Approx(0.25));
  }
  SUBCASE("matches positive-only naive aggregation") {
    const auto g = random_bipartite(8, 10, 5, 81);
    const Mat z = random_embeddings(18, 4, 82);
    const Mat out = warmup_layer(g, z, 0.4);
    for (Index u = 0; u < g.n; ++u) {
      RowVec mean = RowVec::Zero(4);
      for (Index i : g.items_of(u)) mean += z.row(g.n + i);
      mean /= static_cast<double>(g.user_degree[u]);
      const RowVec expected = 0.6 * z.row(u) + 0.4 * mean;
      CHECK((out.row(u) - expected).norm() < 1e-12);
    }
  }
  SUBCASE("zero-degree rows stay put") {
    const auto g = build_graph({{0, 0}}, 2, 2);  // user 1 and item 1 isolated
    const Mat z = random_embeddings(4, 3, 83);
    const Mat out = warmup_layer(g, z, 0.8);
    CHECK((out.row(1) - z.row(1)).norm() == 0.0);
    CHECK((out.row(3) - z.row(3)).norm() == 0.0);
  }
}

TEST_CASE("forward composition") {
  const auto g = random_bipartite(10, 12, 6, 91);
  const Mat z0 = random_embeddings(22, 4, 92);
  RankformerConfig cfg;
  cfg.tau = 0.5;
  cfg.layers = 3;

  SUBCASE("L = 0 returns the input") {
    RankformerConfig c0 = cfg;
    c0.layers = 0;
    CHECK((rankformer_forward(g, z0, c0).final - z0).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("L = 1 with warm-up equals one warmup_layer") {
    RankformerConfig c1 = cfg;
    c1.layers = 1;
    const Mat got = rankformer_forward(g, z0, c1).final;
    CHECK((got - warmup_layer(g, z0, cfg.tau)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("L = 3 equals manual sequential calls") {
    Mat manual = warmup_layer(g, z0, cfg.tau);
    manual = rankformer_layer(g, manual, cfg);
    manual = rankformer_layer(g, manual, cfg);
    const auto result = rankformer_forward(g, z0, cfg, {.keep_snapshots = true});
    CHECK((result.final - manual).cwiseAbs().maxCoeff() == 0.0);
    CHECK(result.snapshots.size() == 4);
  }
}

TEST_CASE("layer output is bit-identical across thread counts") {
  const auto g = random_bipartite(40, 50, 12, 93);
  const Mat z = random_embeddings(90, 8, 94);
  RankformerConfig cfg;
  const int saved = num_threads();
  set_num_threads(1);
  const Mat sequential = rankformer_layer(g, z, cfg);
  set_num_threads(8);
  const Mat parallel = rankformer_layer(g, z, cfg);
  set_num_threads(saved);
  CHECK((sequential - parallel).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-finite input is rejected with diagnostics") {
  const auto g = rftest::worked_graph();
  Mat z = rftest::worked_embeddings();
  z(0, 0) = std::numeric_limits<double>::infinity();
  RankformerConfig cfg;
  cfg.normalize_embeddings = false;
  CHECK_THROWS_AS(rankformer_layer(g, z, cfg), std::runtime_error);
}

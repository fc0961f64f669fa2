#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "rsv/detection.hpp"
#include "rsv/errors.hpp"

using namespace rsv;

namespace {

CommunicationGraph make_graph(const std::vector<int>& nodes, const std::vector<std::pair<int, int>>& edges) {
  CommunicationGraph g(nodes);
  for (auto [a, b] : edges) g.add_edge(a, b);
  return g;
}

const std::vector<std::pair<int, int>> kFeederEdges = {{1, 2}, {1, 4}, {2, 3}, {2, 4}, {2, 5},
                                                        {3, 4}, {3, 5}, {5, 6}, {5, 7}, {6, 7}};

CommunicationGraph feeder_graph() { return make_graph({1, 2, 3, 4, 5, 6, 7}, kFeederEdges); }

DisagreementMap random_scores(const CommunicationGraph& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  DisagreementMap d;
  for (int a : g.nodes())
    for (int b : g.neighbors(a)) d[{a, b}] = u(rng);
  return d;
}

/// Left eigenvector for the eigenvalue nearest 1, scaled to a probability vector.
Eigen::VectorXd eigen_oracle(const Eigen::MatrixXd& B) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(B.transpose());
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < B.rows(); ++i)
    if (std::abs(es.eigenvalues()[i] - 1.0) < std::abs(es.eigenvalues()[best] - 1.0)) best = i;
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  return v / v.sum();
}

SharedSlice slice(std::initializer_list<double> vals) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v[i++] = x;
  return {v};
}

}  // namespace

TEST_CASE("alpha schedules") {
  DetectionConfig c;
  CHECK(c.alpha(1) == 1.0);
  CHECK(c.alpha(4) == 0.25);
  c.alpha_schedule = DetectionConfig::Alpha::constant;
  CHECK(c.alpha(7) == 0.5);
  c.beta_overrides[3] = 5.0;
  CHECK(c.beta_for(3) == 5.0);
  CHECK(c.beta_for(2) == 2.0);
  DetectionConfig bad;
  bad.pi_tolerance = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("disagreement update") {
  const DetectionConfig cfg;
  const auto same = slice({1.0, 2.0, 3.0, 4.0});
  CHECK(update_disagreement(0.8, same, same, 3, cfg) == doctest::Approx((1.0 - 1.0 / 3.0) * 0.8));
  CHECK(update_disagreement(0.8, same, same, 1, cfg) == 0.0);

  const auto a = slice({2.0, 0.0, 0.0, 0.0});
  const auto b = slice({0.0, 0.0, 0.0, 0.0});
  CHECK(update_disagreement(123.0, a, b, 1, cfg) == doctest::Approx(0.25));
  CHECK(update_disagreement(0.25, a, b, 2, cfg) == doctest::Approx(0.25));

  // two time steps average over |T|
  SharedSlice two_a = {a[0], a[0]};
  SharedSlice two_b = {b[0], b[0]};
  CHECK(update_disagreement(0.0, two_a, two_b, 1, cfg) == doctest::Approx(0.25));

  CHECK_THROWS_AS(update_disagreement(0.0, a, slice({1.0}), 1, cfg), DimensionError);
  CHECK_THROWS_AS(update_disagreement(0.0, two_a, b, 1, cfg), DimensionError);
}

TEST_CASE("honest scores decay geometrically") {
  DetectionConfig cfg;
  cfg.alpha_schedule = DetectionConfig::Alpha::constant;
  const auto s = slice({0.3, -0.2});
  double d = 1.0;
  for (int k = 1; k <= 10; ++k) d = update_disagreement(d, s, s, k, cfg);
  CHECK(d == doctest::Approx(std::pow(0.5, 10)));
}

TEST_CASE("trust matrix") {
  const DetectionConfig cfg;
  SUBCASE("two regions") {
    const auto g = make_graph({1, 2}, {{1, 2}});
    const auto t = build_trust_matrix({{{1, 2}, 0.3}, {{2, 1}, 0.3}}, g, cfg);
    CHECK(t.regions == std::vector<int>{1, 2});
    CHECK(t.B(0, 1) == 1.0);
    CHECK(t.B(1, 0) == 1.0);
    CHECK(t.B(0, 0) == 0.0);
  }
  SUBCASE("triangle with equal scores") {
    const auto g = make_graph({1, 2, 3}, {{1, 2}, {2, 3}, {1, 3}});
    DisagreementMap d;
    for (int a : {1, 2, 3})
      for (int b : {1, 2, 3})
        if (a != b) d[{a, b}] = 0.7;
    const auto t = build_trust_matrix(d, g, cfg);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(t.B(i, j) == doctest::Approx(i == j ? 0.0 : 0.5));
  }
  SUBCASE("feeder graph rows are stochastic") {
    const auto g = feeder_graph();
    const auto t = build_trust_matrix(random_scores(g, 11), g, cfg);
    for (Eigen::Index i = 0; i < t.B.rows(); ++i) {
      CHECK(std::abs(t.B.row(i).sum() - 1.0) < 1e-12);
      CHECK(t.B.row(i).minCoeff() >= 0.0);
      for (Eigen::Index j = 0; j < t.B.cols(); ++j)
        if (!g.has_edge(t.regions[static_cast<std::size_t>(i)], t.regions[static_cast<std::size_t>(j)]))
          CHECK(t.B(i, j) == 0.0);
    }
  }
  SUBCASE("zero row spreads evenly") {
    const auto g = make_graph({1, 2, 3}, {{1, 2}, {1, 3}});
    const auto t = build_trust_matrix({{{1, 2}, 0.0}, {{1, 3}, 0.0}, {{2, 1}, 1.0}, {{3, 1}, 1.0}}, g, cfg);
    CHECK(t.B(0, 1) == 0.5);
    CHECK(t.B(0, 2) == 0.5);
  }
  SUBCASE("isolated region") {
    const auto g = make_graph({1, 2, 3}, {{1, 2}});
    CHECK_THROWS_AS(build_trust_matrix({{{1, 2}, 1.0}, {{2, 1}, 1.0}}, g, cfg), StructuralError);
  }
  SUBCASE("missing score") {
    const auto g = make_graph({1, 2}, {{1, 2}});
    CHECK_THROWS_AS(build_trust_matrix({{{1, 2}, 1.0}}, g, cfg), StructuralError);
  }
}

TEST_CASE("chain period") {
  Eigen::MatrixXd flip(2, 2);
  flip << 0, 1, 1, 0;
  CHECK(chain_period(flip) == 2);
  Eigen::MatrixXd tri = Eigen::MatrixXd::Constant(3, 3, 0.5);
  tri.diagonal().setZero();
  CHECK(chain_period(tri) == 1);
  Eigen::MatrixXd path(3, 3);
  path << 0, 1, 0, 0.5, 0, 0.5, 0, 1, 0;
  CHECK(chain_period(path) == 2);
}

TEST_CASE("stationary distribution") {
  const DetectionConfig cfg;
  SUBCASE("two-cycle needs damping") {
    Eigen::MatrixXd flip(2, 2);
    flip << 0, 1, 1, 0;
    const auto r = stationary_distribution(flip, cfg);
    CHECK(r.damped);
    CHECK(r.pi[0] == doctest::Approx(0.5));
    CHECK(r.pi[1] == doctest::Approx(0.5));
    CHECK(((r.pi.transpose() * r.chain) - r.pi.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("triangle") {
    Eigen::MatrixXd tri = Eigen::MatrixXd::Constant(3, 3, 0.5);
    tri.diagonal().setZero();
    const auto r = stationary_distribution(tri, cfg);
    CHECK_FALSE(r.damped);
    for (int i = 0; i < 3; ++i) CHECK(r.pi[i] == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("feeder graph against eigendecomposition") {
    const auto g = feeder_graph();
    for (unsigned seed = 1; seed <= 5; ++seed) {
      const auto t = build_trust_matrix(random_scores(g, seed), g, cfg);
      const auto r = stationary_distribution(t.B, cfg);
      CHECK_FALSE(r.damped);
      CHECK(std::abs(r.pi.sum() - 1.0) < 1e-12);
      CHECK(r.pi.minCoeff() >= 0.0);
      CHECK(((r.pi.transpose() * t.B) - r.pi.transpose()).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((r.pi - eigen_oracle(t.B)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  SUBCASE("bipartite graph falls back and matches the damped oracle") {
    const auto g = make_graph({1, 2, 3, 4}, {{1, 2}, {2, 3}, {3, 4}, {4, 1}});
    const auto t = build_trust_matrix(random_scores(g, 3), g, cfg);
    const auto r = stationary_distribution(t.B, cfg);
    CHECK(r.damped);
    const Eigen::MatrixXd damped = cfg.damping * t.B + (1.0 - cfg.damping) * Eigen::MatrixXd::Constant(4, 4, 0.25);
    CHECK((r.chain - damped).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((r.pi - eigen_oracle(damped)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("relabeling regions permutes the trust scores") {
  const auto g = feeder_graph();
  const auto d = random_scores(g, 21);
  const std::map<int, int> relabel = {{1, 5}, {2, 3}, {3, 7}, {4, 1}, {5, 2}, {6, 6}, {7, 4}};
  CommunicationGraph g2({1, 2, 3, 4, 5, 6, 7});
  for (auto [a, b] : kFeederEdges) g2.add_edge(relabel.at(a), relabel.at(b));
  DisagreementMap d2;
  for (const auto& [e, v] : d) d2[{relabel.at(e.first), relabel.at(e.second)}] = v;

  TrustState a(g, {});
  TrustState b(g2, {});
  for (const auto& [e, v] : d) a.set_disagreement(e.first, e.second, v);
  for (const auto& [e, v] : d2) b.set_disagreement(e.first, e.second, v);
  a.refresh();
  b.refresh();
  for (int r = 1; r <= 7; ++r) CHECK(a.pi_of(r) == doctest::Approx(b.pi_of(relabel.at(r))).epsilon(1e-10));
}

TEST_CASE("excluded statistics") {
  Eigen::VectorXd pi(3);
  pi << 0.5, 0.25, 0.25;
  auto s = excluded_stats(pi, 0);
  CHECK(s.mean == doctest::Approx(0.25));
  CHECK(s.stddev == doctest::Approx(0.0));

  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(5, 0.2);
  for (int i = 0; i < 5; ++i) {
    s = excluded_stats(uniform, i);
    CHECK(s.mean == doctest::Approx(0.2));
    CHECK(s.stddev == doctest::Approx(0.0));
  }

  Eigen::VectorXd four(4);
  four << 0.6, 0.2, 0.1, 0.1;
  s = excluded_stats(four, 0);
  CHECK(s.mean == doctest::Approx(2.0 / 15.0));
  CHECK(s.stddev == doctest::Approx(std::sqrt(1.0 / 450.0)));

  CHECK_THROWS_AS(excluded_stats(Eigen::VectorXd::Ones(1), 0), StructuralError);
}

TEST_CASE("threshold verdicts") {
  const DetectionConfig cfg;
  const std::vector<int> ids = {1, 2, 3, 4, 5};
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(5, 0.2);
  CHECK(threshold_verdict(uniform, uniform, ids, cfg).kind == VerdictKind::none);

  Eigen::VectorXd peaked(5);
  peaked << 0.6, 0.1, 0.1, 0.1, 0.1;
  const auto v = threshold_verdict(peaked, peaked, ids, cfg);
  CHECK(v.kind == VerdictKind::attacker);
  CHECK(v.region == 1);

  Eigen::VectorXd moved = peaked;
  moved[0] -= 0.01;
  moved[1] += 0.01;
  CHECK(threshold_verdict(peaked, moved, ids, cfg).kind == VerdictKind::inconclusive);

  // a large per-region β keeps the top region below its threshold
  Eigen::VectorXd spread(5);
  spread << 0.5, 0.2, 0.1, 0.1, 0.1;
  CHECK(threshold_verdict(spread, spread, ids, cfg).region == 1);
  DetectionConfig strict = cfg;
  strict.beta_overrides[1] = 1e6;
  CHECK(threshold_verdict(spread, spread, ids, strict).kind == VerdictKind::none);

  // ties go to the lowest id
  DetectionConfig loose = cfg;
  loose.beta = 1.0;
  Eigen::VectorXd tied(6);
  tied << 0.3, 0.1, 0.1, 0.3, 0.1, 0.1;
  const std::vector<int> labels = {5, 1, 4, 2, 6, 3};
  const auto t = threshold_verdict(tied, tied, labels, loose);
  CHECK(t.kind == VerdictKind::attacker);
  CHECK(t.region == 2);

  CHECK_THROWS_AS(threshold_verdict(peaked, peaked, {1, 2}, cfg), DimensionError);
}

TEST_CASE("trust state verdicts") {
  const auto g = feeder_graph();
  DetectionConfig cfg;
  TrustState trust(g, cfg);
  auto blame = [&](int target, double high, double low) {
    for (int a : g.nodes())
      for (int b : g.neighbors(a)) trust.set_disagreement(a, b, b == target ? high : low);
  };
  blame(1, 1.0, 0.01);
  trust.refresh();
  CHECK(check_verdict(trust).kind == VerdictKind::inconclusive);  // one round only
  trust.refresh();
  CHECK(trust.rounds() == 2);
  const auto v = check_verdict(trust);
  CHECK(v.kind == VerdictKind::attacker);
  CHECK(v.region == 1);
  Eigen::Index top = 0;
  trust.pi().maxCoeff(&top);
  CHECK(trust.regions()[static_cast<std::size_t>(top)] == 1);

  // same shape, but every score below the floor
  TrustState quiet(g, cfg);
  for (int a : g.nodes())
    for (int b : g.neighbors(a)) quiet.set_disagreement(a, b, b == 1 ? 1e-4 : 1e-6);
  quiet.refresh();
  quiet.refresh();
  CHECK(check_verdict(quiet).kind == VerdictKind::none);

  TrustState even(g, cfg);
  for (int a : g.nodes())
    for (int b : g.neighbors(a)) even.set_disagreement(a, b, 0.5);
  even.refresh();
  even.refresh();
  CHECK(check_verdict(even).kind == VerdictKind::none);

  CHECK_THROWS_AS(trust.set_disagreement(1, 7, 0.1), IndexError);
}

TEST_CASE("trust state folds slices into scores") {
  const auto g = make_graph({1, 2}, {{1, 2}});
  TrustState trust(g, {});
  trust.update(1, 2, slice({2.0, 0.0, 0.0, 0.0}), slice({0.0, 0.0, 0.0, 0.0}), 1);
  CHECK(trust.disagreement(1, 2) == doctest::Approx(0.25));
  CHECK(trust.disagreement(2, 1) == 0.0);
}

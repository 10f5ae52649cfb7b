#include "eegsrc/dictionary_learning.hpp"
#include "eegsrc/errors.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <set>

using namespace eegsrc;

namespace {

LearnConfig small_config(Index n_atoms, int k) {
  LearnConfig cfg;
  cfg.n_atoms = n_atoms;
  cfg.coding.max_sparsity = k;
  cfg.passes = 2;
  cfg.init_seed = 5;
  return cfg;
}

Eigen::MatrixXd sparse_signals(const Eigen::MatrixXd& phi, int k, int count, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd y(phi.rows(), count);
  for (int j = 0; j < count; ++j) y.col(j) = phi * testing::planted_code(phi.cols(), k, rng);
  return y;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

}  // namespace

TEST_CASE("learn config validation and names") {
  LearnConfig cfg = small_config(16, 3);
  CHECK_NOTHROW(cfg.validate());
  cfg.passes = 0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = small_config(16, 3);
  cfg.c_inverse_init_scale = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = small_config(16, 17);
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = small_config(16, 3);
  cfg.weight_floor = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  CHECK(init_strategy_from_string(to_string(InitStrategy::gaussian)) == InitStrategy::gaussian);
  CHECK_THROWS_AS(init_strategy_from_string("zeros"), ArgumentError);
}

TEST_CASE("correction weight is the clipped absolute cosine") {
  const Eigen::Vector3d a(1, 0, 0), b(0, 2, 0), c(-3, 0, 0), d(1, 1, 0);
  CHECK(correction_weight(a, a, 0.0) == doctest::Approx(1.0));
  CHECK(correction_weight(a, c, 0.0) == doctest::Approx(1.0));
  CHECK(correction_weight(a, b, 0.0) == 0.0);
  CHECK(correction_weight(a, b, 0.25) == 0.25);
  CHECK(correction_weight(a, d, 0.0) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(correction_weight(a, Eigen::Vector3d::Zero(), 0.0), ArgumentError);
}

TEST_CASE("data-column initialization copies normalized training signals") {
  const Eigen::MatrixXd y = testing::gaussian_matrix(10, 40, 3);
  LearnConfig cfg = small_config(16, 2);
  const Dictionary d = init_dictionary(y, cfg);
  CHECK(d.n_atoms() == 16);
  CHECK(d.max_norm_deviation() < 1e-12);
  for (Index a = 0; a < 16; ++a) {
    bool found = false;
    for (Index j = 0; j < y.cols() && !found; ++j)
      found = (d.atom(a) - y.col(j).normalized()).norm() < 1e-12;
    CHECK(found);
  }
  CHECK(init_dictionary(y, cfg).atoms() == d.atoms());
  cfg.init_seed = 6;
  CHECK(init_dictionary(y, cfg).atoms() != d.atoms());

  cfg.n_atoms = 64;
  const Dictionary wide = init_dictionary(y, cfg);
  CHECK(wide.n_atoms() == 64);
  CHECK(wide.max_norm_deviation() < 1e-12);
}

TEST_CASE("inverse maintenance matches a dense Gram rebuilt from the replayed pairs") {
  // Oracle: G = delta I + sum of w x x' over every replayed pair, kept as a
  // dense matrix and inverted directly on the active block after each step.
  const Index m = 12;
  const Dictionary truth = testing::gaussian_dictionary(16, m, 31);
  const Eigen::MatrixXd y = sparse_signals(truth.atoms(), 3, 40, 32);
  LearnConfig cfg = small_config(m, 3);
  cfg.weight_floor = 0.05;
  CbwrlsuLearner learner(init_dictionary(y, cfg), cfg);

  Eigen::MatrixXd gram = cfg.c_inverse_init_scale * Eigen::MatrixXd::Identity(m, m);
  for (Index j = 0; j < y.cols(); ++j) {
    const StepReport r = learner.step(y.col(j));
    REQUIRE_FALSE(r.inverse_reset);
    for (const ReplayPair& p : r.pairs) {
      const Eigen::VectorXd x = p.code.dense();
      gram += p.weight * x * x.transpose();
    }
    const auto& atoms = learner.active_atoms();
    REQUIRE(atoms == r.correlated.atoms);
    Eigen::MatrixXd block(atoms.size(), atoms.size());
    for (std::size_t a = 0; a < atoms.size(); ++a)
      for (std::size_t b = 0; b < atoms.size(); ++b) block(a, b) = gram(atoms[a], atoms[b]);
    const Eigen::MatrixXd direct = block.inverse();
    const double rel = (learner.active_inverse() - direct).norm() / direct.norm();
    CHECK(rel < 1e-8);
    CHECK((learner.gram_block(atoms) - block).norm() < 1e-9 * block.norm());
  }
}

TEST_CASE("each step touches only the active atoms and tracks usage") {
  const Dictionary truth = testing::gaussian_dictionary(20, 40, 41);
  const Eigen::MatrixXd y = sparse_signals(truth.atoms(), 3, 60, 42);
  LearnConfig cfg = small_config(40, 3);
  cfg.weight_floor = 0.1;
  CbwrlsuLearner learner(init_dictionary(y, cfg), cfg);

  const auto check_step = [&](Index j, std::optional<Index> revisit) {
    const Eigen::MatrixXd before = learner.dictionary().atoms();
    std::vector<std::set<Index>> prior;
    for (Index s = 0; s < learner.history_size(); ++s) {
      const auto& sup = learner.stored_code(s).support;
      prior.emplace_back(sup.begin(), sup.end());
    }
    const StepReport r = revisit ? learner.step(y.col(j), *revisit) : learner.step(y.col(j));

    const std::set<Index> first(r.first_code.support.begin(), r.first_code.support.end());
    std::vector<Index> omega;
    std::set<Index> active = first;
    for (Index s = 0; s < static_cast<Index>(prior.size()); ++s) {
      if (revisit && s == *revisit) continue;
      bool hit = false;
      for (Index a : prior[static_cast<std::size_t>(s)]) hit = hit || first.count(a);
      if (!hit) continue;
      omega.push_back(s);
      active.insert(prior[static_cast<std::size_t>(s)].begin(), prior[static_cast<std::size_t>(s)].end());
    }
    CHECK(r.correlated.signals == omega);
    CHECK(r.correlated.atoms == std::vector<Index>(active.begin(), active.end()));
    REQUIRE(r.pairs.size() == omega.size() + 1);
    for (std::size_t p = 0; p < omega.size(); ++p) {
      const double w = std::max(cfg.weight_floor, std::min(1.0, std::abs(cosine(y.col(j), y.col(omega[p])))));
      CHECK(r.pairs[p].weight == doctest::Approx(w).epsilon(1e-12));
    }
    CHECK(r.pairs.back().weight == 1.0);

    const Eigen::MatrixXd after = learner.dictionary().atoms();
    for (Index a = 0; a < after.cols(); ++a)
      if (!active.count(a)) CHECK(after.col(a) == before.col(a));
    CHECK(learner.dictionary().max_norm_deviation() < 1e-9);
  };

  for (Index j = 0; j < y.cols(); ++j) check_step(j, std::nullopt);
  for (Index j = 0; j < 10; ++j) check_step(j, j);

  const auto& usage = learner.usage();
  for (Index a = 0; a < 40; ++a)
    for (Index s = 0; s < learner.history_size(); ++s) {
      const auto& sup = learner.stored_code(s).support;
      const bool uses = std::find(sup.begin(), sup.end(), a) != sup.end();
      CHECK(uses == (usage[static_cast<std::size_t>(a)].count(s) == 1));
    }
  CHECK(learner.seen_count() == 70);
  CHECK(learner.history_size() == 60);
}

TEST_CASE("CBWRLSU lowers the coding error and is deterministic") {
  const Dictionary truth = testing::gaussian_dictionary(24, 48, 51);
  const Eigen::MatrixXd y = sparse_signals(truth.atoms(), 3, 300, 52);
  LearnConfig cfg = small_config(48, 3);
  cfg.passes = 3;
  TrainingLog log;
  const Dictionary d = train_cbwrlsu(y, cfg, &log);
  REQUIRE(log.pass_errors.size() == 4);
  CHECK(log.pass_errors.back() < log.pass_errors.front());
  CHECK(log.algorithm == "cbwrlsu");
  CHECK(d.max_norm_deviation() < 1e-9);
  CHECK(d.learn_meta().algorithm == "cbwrlsu");
  CHECK(d.learn_meta().n_train == 300);
  CHECK(train_cbwrlsu(y, cfg).atoms() == d.atoms());
  CHECK_FALSE(training_log_json(log).empty());
}

TEST_CASE("MOD update solves the ridge normal equations") {
  const Eigen::MatrixXd y = testing::gaussian_matrix(10, 50, 61);
  Eigen::MatrixXd x = testing::gaussian_matrix(15, 50, 62);
  for (Index i = 0; i < x.size(); ++i)
    if (i % 3) x.data()[i] = 0.0;
  for (double lambda : {0.0, 0.5}) {
    const Eigen::MatrixXd d = mod_update(y, x, lambda);
    // gradient of ||Y - DX||^2 + lambda ||D||^2
    const Eigen::MatrixXd grad = (d * x - y) * x.transpose() + lambda * d;
    CHECK(grad.norm() < 1e-9 * (y * x.transpose()).norm());
  }
}

TEST_CASE("MOD training improves on its initial dictionary") {
  const Dictionary truth = testing::gaussian_dictionary(24, 48, 71);
  const Eigen::MatrixXd y = sparse_signals(truth.atoms(), 3, 300, 72);
  LearnConfig cfg = small_config(48, 3);
  TrainingLog log;
  const Dictionary d = train_mod(y, cfg, 10, &log);
  REQUIRE(log.pass_errors.size() == 11);
  CHECK(log.pass_errors.back() < 0.8 * log.pass_errors.front());
  CHECK(d.max_norm_deviation() < 1e-9);
  CHECK(train_mod(y, cfg, 10).atoms() == d.atoms());
}

#include "eegsrc/errors.hpp"
#include "eegsrc/sparse_coding.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <fstream>
#include <set>

using namespace eegsrc;

namespace {

// Least squares on a fixed support via column-pivoted QR, independent of the
// incremental Cholesky used by the coder.
Eigen::VectorXd ls_on_support(const Dictionary& d, const std::vector<Index>& support, const Eigen::VectorXd& y) {
  Eigen::MatrixXd sub(d.signal_len(), static_cast<Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) sub.col(static_cast<Index>(i)) = d.atom(support[i]);
  return sub.colPivHouseholderQr().solve(y);
}

std::set<Index> support_set(const SparseCode& c) { return {c.support.begin(), c.support.end()}; }

}  // namespace

TEST_CASE("dictionary atoms must be unit norm") {
  Eigen::MatrixXd m = testing::gaussian_matrix(8, 4, 1);
  CHECK_THROWS_AS(static_cast<void>(Dictionary(m)), ArgumentError);
  const Dictionary d = Dictionary::normalized(m);
  CHECK(d.max_norm_deviation() < 1e-12);
  CHECK_THROWS_AS(Dictionary::normalized(Eigen::MatrixXd::Zero(3, 2)), ArgumentError);

  Dictionary e = d;
  CHECK_THROWS_AS(e.set_atoms({1}, Eigen::VectorXd::Ones(8)), ArgumentError);
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(8);
  unit[3] = 1.0;
  e.set_atoms({1}, unit);
  CHECK(e.atom(1) == unit);
}

TEST_CASE("coding config validation") {
  CodingConfig c;
  c.max_sparsity = 0;
  CHECK_THROWS_AS(c.validate(10), ArgumentError);
  c.max_sparsity = 11;
  CHECK_THROWS_AS(c.validate(10), ArgumentError);
  c.max_sparsity = 10;
  CHECK_NOTHROW(c.validate(10));
  c.residual_tol = -1.0;
  CHECK_THROWS_AS(c.validate(10), ArgumentError);
  CHECK(stop_rule_from_string(to_string(StopRule::residual_or_k)) == StopRule::residual_or_k);
  CHECK_THROWS_AS(stop_rule_from_string("never"), ArgumentError);
}

TEST_CASE("OMP matches brute force on every pair of a 12-atom dictionary") {
  // Exact 2-sparse signals: the best pair has zero residual. OMP is greedy,
  // so it must never beat the exhaustive optimum and, on this incoherent
  // dictionary, should reach it almost always.
  const Dictionary d = testing::gaussian_dictionary(10, 12, 21);
  CodingConfig cfg;
  cfg.max_sparsity = 2;
  Rng rng(5);
  int exact = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXd x = testing::planted_code(12, 2, rng);
    const Eigen::VectorXd y = d.atoms() * x;

    double best = std::numeric_limits<double>::infinity();
    for (Index a = 0; a < 12; ++a)
      for (Index b = a + 1; b < 12; ++b) {
        const Eigen::VectorXd coef = ls_on_support(d, {a, b}, y);
        Eigen::MatrixXd sub(10, 2);
        sub << d.atom(a), d.atom(b);
        best = std::min(best, (y - sub * coef).squaredNorm());
      }
    const SparseCode c = omp(d, y, cfg);
    const double err = reconstruction_error(y, d, c);
    CHECK(err >= best - 1e-12);
    if (err <= best + 1e-12) ++exact;
  }
  CHECK(exact >= trials * 9 / 10);
}

TEST_CASE("OMP coefficients are the least-squares fit on the chosen support") {
  const Dictionary d = testing::gaussian_dictionary(32, 64, 3);
  CodingConfig cfg;
  cfg.max_sparsity = 6;
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd y(32);
    for (Index i = 0; i < 32; ++i) y[i] = rng.normal();
    const SparseCode c = omp(d, y, cfg);
    REQUIRE(c.size() == 6);
    CHECK(support_set(c).size() == 6);
    const Eigen::VectorXd ref = ls_on_support(d, c.support, y);
    for (std::size_t p = 0; p < c.size(); ++p) CHECK(c.values[p] == doctest::Approx(ref[static_cast<Index>(p)]).epsilon(1e-9));
    const Eigen::VectorXd r = y - reconstruct(d, c);
    for (Index a : c.support) CHECK(std::abs(d.atom(a).dot(r)) < 1e-9 * y.norm());
  }
}

TEST_CASE("OMP recovers planted 3-sparse codes") {
  const Dictionary d = testing::gaussian_dictionary(64, 128, 99);
  CodingConfig cfg;
  cfg.max_sparsity = 3;
  Rng rng(17);
  int recovered = 0;
  for (int t = 0; t < 300; ++t) {
    const Eigen::VectorXd x = testing::planted_code(128, 3, rng);
    const SparseCode c = omp(d, d.atoms() * x, cfg);
    std::set<Index> planted;
    for (Index i = 0; i < 128; ++i)
      if (x[i] != 0.0) planted.insert(i);
    if (support_set(c) == planted) ++recovered;
  }
  CHECK(recovered >= 297);
}

TEST_CASE("OMP edge cases") {
  const Dictionary d = testing::gaussian_dictionary(16, 20, 4);
  CodingConfig cfg;
  cfg.max_sparsity = 4;

  SUBCASE("zero signal gives an empty code") {
    const SparseCode c = omp(d, Eigen::VectorXd::Zero(16), cfg);
    CHECK(c.empty());
    CHECK(c.n_atoms == 20);
  }
  SUBCASE("a single atom is found in one step") {
    const SparseCode c = omp(d, 2.5 * d.atom(7), cfg);
    REQUIRE(c.size() == 1);
    CHECK(c.support[0] == 7);
    CHECK(c.values[0] == doctest::Approx(2.5));
  }
  SUBCASE("ties go to the lowest index") {
    Eigen::MatrixXd m = d.atoms();
    m.col(12) = m.col(5);
    const Dictionary dup(m);
    const SparseCode c = omp(dup, dup.atom(12), cfg);
    REQUIRE(!c.empty());
    CHECK(c.support[0] == 5);
  }
  SUBCASE("residual rule stops early") {
    CodingConfig r = cfg;
    r.stop_rule = StopRule::residual_or_k;
    r.residual_tol = 1e-8;
    const Eigen::VectorXd y = d.atom(1) - 0.5 * d.atom(9);
    const SparseCode c = omp(d, y, r);
    CHECK(c.size() == 2);
    CHECK(omp(d, y + 0.01 * d.atom(3) + 0.02 * d.atom(15), r).size() <= 4);
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(omp(d, Eigen::VectorXd::Zero(15), cfg), ArgumentError);
    Eigen::VectorXd y = Eigen::VectorXd::Ones(16);
    y[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(omp(d, y, cfg), ArgumentError);
  }
}

TEST_CASE("parallel batch coding equals the serial reference") {
  const Dictionary d = testing::gaussian_dictionary(24, 48, 6);
  const Eigen::MatrixXd y = testing::gaussian_matrix(24, 101, 7);
  CodingConfig cfg;
  cfg.max_sparsity = 5;
  const auto a = batch_code(d, y, cfg);
  const auto b = serial::batch_code(d, y, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    CHECK(a[j].support == b[j].support);
    CHECK(a[j].values == b[j].values);
  }
}

TEST_CASE("error measures") {
  const Dictionary d = testing::gaussian_dictionary(8, 10, 2);
  const Eigen::VectorXd y = d.atom(0) + d.atom(1);
  SparseCode c;
  c.n_atoms = 10;
  c.support = {0};
  c.values = {1.0};
  CHECK(reconstruction_error(y, d, c) == doctest::Approx(1.0));
  CHECK(normalized_error(y, reconstruct(d, c)) == doctest::Approx(1.0 / y.norm()));
  CHECK(c.dense()[0] == 1.0);
  CHECK(c.dense().sum() == 1.0);

  Eigen::MatrixXd cols(8, 3);
  cols << 3.0 * d.atom(2), Eigen::VectorXd::Zero(8), d.atom(4);
  CodingConfig cfg;
  cfg.max_sparsity = 2;
  CHECK(mean_normalized_error(d, cols, cfg) < 1e-9);
}

TEST_CASE("dictionary files round-trip exactly and detect corruption") {
  testing::TempDir tmp("dict");
  Dictionary d = testing::gaussian_dictionary(12, 30, 13);
  d.set_class_tag(2);
  d.set_learn_meta({"cbwrlsu", 3, 99, 180});
  save_dictionary(d, tmp.path() / "dict");
  const Dictionary back = load_dictionary(tmp.path() / "dict");
  CHECK(back.atoms() == d.atoms());
  CHECK(back.class_tag() == 2);
  CHECK(back.learn_meta().algorithm == "cbwrlsu");
  CHECK(back.learn_meta().n_train == 180);

  {
    std::fstream f(tmp.path() / "dict.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(17);
    f.put('\x5a');
  }
  CHECK_THROWS_AS(load_dictionary(tmp.path() / "dict"), DataError);
  CHECK_THROWS_AS(load_dictionary(tmp.path() / "absent"), DataError);
}

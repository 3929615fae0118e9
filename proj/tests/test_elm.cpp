#include <doctest.h>

#include <cmath>
#include <vector>

#include "horeg/elm.hpp"
#include "oracle/oracle.hpp"
#include "testutil.hpp"

using namespace horeg;
using elm::Batch;
using elm::ElmModel;
using elm::TrainState;
using reg::HrConfig;
using reg::Mode;
using reg::RegStrategy;
using testutil::rel_err;

namespace {

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

// Random feature-space batch with entries in (0, 1), like sigmoid outputs.
std::pair<Matrix, Matrix> random_hy(Index rows, Index hidden, Index k, Rng& rng) {
  Matrix h(rows, hidden);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < hidden; ++j) h(i, j) = rng.uniform(0.05, 0.95);
  }
  return {h, testutil::random_matrix(rows, k, rng)};
}

const HrConfig kStd1{1, Mode::standard, 1.0 - 1e-9};

}  // namespace

TEST_CASE("init_elm") {
  SUBCASE("reference shape") {
    const ElmModel m = elm::init_elm(4, 25, 2, 7);
    CHECK(m.input_weights.rows() == 25);
    CHECK(m.input_weights.cols() == 4);
    CHECK(m.bias.size() == 25);
    CHECK(m.output_weights.rows() == 25);
    CHECK(m.output_weights.cols() == 2);
    CHECK(m.output_weights.norm() == 0.0);
    CHECK((m.input_weights.array().abs() <= 1.0).all());
    CHECK((m.bias.array() >= 0.0).all());
    CHECK((m.bias.array() <= 1.0).all());
  }
  SUBCASE("identical seeds give bit-identical models") {
    const ElmModel a = elm::init_elm(4, 25, 2, 7);
    const ElmModel b = elm::init_elm(4, 25, 2, 7);
    CHECK(bit_equal(a.input_weights, b.input_weights));
    CHECK(bit_equal(Matrix(a.bias), Matrix(b.bias)));
    const ElmModel c = elm::init_elm(4, 25, 2, 8);
    CHECK(!bit_equal(c.input_weights, a.input_weights));
  }
  SUBCASE("scalar pipeline") {
    ElmModel m = elm::init_elm(1, 1, 1, 0);
    m.output_weights(0, 0) = 2.0;
    Matrix x(1, 1);
    x(0, 0) = 0.3;
    const double z = m.input_weights(0, 0) * 0.3 + m.bias(0);
    const double expected = 2.0 / (1.0 + std::exp(-z));
    CHECK(elm::predict(m, x)(0, 0) == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("degenerate sizes are rejected") {
    CHECK_THROWS_AS(elm::init_elm(0, 1, 1, 0), DimensionMismatch);
  }
}

TEST_CASE("hidden_matrix") {
  SUBCASE("zero weights and bias give one half everywhere") {
    ElmModel m = elm::init_elm(3, 4, 1, 1);
    m.input_weights.setZero();
    m.bias.setZero();
    Rng rng(2);
    const Matrix h = elm::hidden_matrix(m, testutil::random_matrix(5, 3, rng));
    CHECK((h.array() == 0.5).all());
  }
  SUBCASE("hand sigmoid value") {
    ElmModel m = elm::init_elm(1, 1, 1, 1);
    m.input_weights(0, 0) = 1.0;
    m.bias(0) = 0.5;
    Matrix x = Matrix::Zero(1, 1);
    CHECK(elm::hidden_matrix(m, x)(0, 0) == doctest::Approx(0.6224593312).epsilon(1e-9));
  }
  SUBCASE("shape contract and bounds") {
    ElmModel m = elm::init_elm(4, 2, 1, 3);
    Rng rng(3);
    const Matrix h = elm::hidden_matrix(m, testutil::random_matrix(3, 4, rng));
    CHECK(h.rows() == 3);
    CHECK(h.cols() == 2);
    CHECK((h.array() > 0.0).all());
    CHECK((h.array() < 1.0).all());
  }
  SUBCASE("dimension mismatch") {
    ElmModel m = elm::init_elm(4, 2, 1, 3);
    CHECK_THROWS_AS(elm::hidden_matrix(m, Matrix::Zero(3, 5)), DimensionMismatch);
  }
}

TEST_CASE("pinv_solve and train_pinv") {
  SUBCASE("square invertible") {
    Rng rng(4);
    const Matrix h = testutil::random_matrix(4, 4, rng) + 3.0 * Matrix::Identity(4, 4);
    const Matrix y = testutil::random_matrix(4, 2, rng);
    CHECK(rel_err(elm::pinv_solve(h, y), h.inverse() * y) < 1e-10);
  }
  SUBCASE("diagonal hand case") {
    Vector y(2);
    y << 1.0, 2.0;
    CHECK(rel_err(elm::pinv_solve(diag2(1, 2), y), Vector::Ones(2)) < 1e-14);
  }
  SUBCASE("zero column gives a zero weight row (minimum norm)") {
    Matrix h(3, 2);
    h << 1, 0, 2, 0, 3, 0;
    Vector y(3);
    y << 1, 2, 3;
    const Matrix beta = elm::pinv_solve(h, y);
    CHECK(beta(1, 0) == doctest::Approx(0.0));
    CHECK(rel_err(beta, oracle::pinv(h) * y) < 1e-12);
  }
  SUBCASE("exact interpolation through the model") {
    Rng rng(5);
    ElmModel m = elm::init_elm(3, 6, 2, 6);
    Batch batch{testutil::random_matrix(6, 3, rng), testutil::random_matrix(6, 2, rng)};
    m = elm::train_pinv(m, batch);
    CHECK((elm::predict(m, batch.inputs) - batch.targets).norm() < 1e-8);
  }
}

TEST_CASE("train_hr") {
  Rng rng(7);
  ElmModel m = elm::init_elm(3, 5, 2, 9);
  Batch batch{testutil::random_matrix(20, 3, rng), testutil::random_matrix(20, 2, rng)};
  const Matrix h = elm::hidden_matrix(m, batch.inputs);

  SUBCASE("order 0 with the reference ridge parameter") {
    const double mu = 1.827e-5;
    auto [trained, diag] =
        elm::train_hr(m, batch, RegStrategy::scalar(1.0 / mu), HrConfig{0, Mode::standard, 1.0 - 1e-9});
    const Matrix direct = (h.transpose() * h + Matrix::Identity(5, 5) / mu)
                              .fullPivLu()
                              .solve(h.transpose() * batch.targets);
    CHECK(rel_err(trained.output_weights, direct) < 1e-10);
  }
  SUBCASE("shrinking R approaches the pseudo-inverse solution") {
    const Matrix beta_pinv = elm::train_pinv(m, batch).output_weights;
    double prev = std::numeric_limits<double>::infinity();
    for (double mu_bar : {1.0, 1e-3, 1e-6}) {
      auto [trained, diag] = elm::train_hr(m, batch, RegStrategy::scalar(mu_bar), kStd1);
      const double gap = (trained.output_weights - beta_pinv).norm();
      CHECK(gap < prev);
      prev = gap;
    }
    CHECK(prev < 1e-6 * beta_pinv.norm());
  }
  SUBCASE("input weights and bias never move") {
    auto [trained, diag] = elm::train_hr(m, batch, RegStrategy::scalar(0.5), kStd1);
    CHECK(bit_equal(trained.input_weights, m.input_weights));
    CHECK(bit_equal(Matrix(trained.bias), Matrix(m.bias)));
    const ElmModel p = elm::train_pinv(m, batch);
    CHECK(bit_equal(p.input_weights, m.input_weights));
  }
}

TEST_CASE("incremental ridge recursion") {
  SUBCASE("identity hand case") {
    Vector y(2);
    y << 1.0, 1.0;
    const TrainState st = elm::ielm_init_features(Matrix::Identity(2, 2), y, 1.0);
    CHECK(rel_err(st.info, 2.0 * Matrix::Identity(2, 2)) < 1e-15);
    CHECK(rel_err(st.beta, Vector(0.5 * Vector::Ones(2))) < 1e-15);
    CHECK(st.step == 1);
  }
  SUBCASE("huge mu approaches the pseudo-inverse solution") {
    Rng rng(8);
    auto [h, y] = random_hy(12, 4, 1, rng);
    const TrainState st = elm::ielm_init_features(h, y, 1e10);
    CHECK(rel_err(st.beta, elm::pinv_solve(h, y)) < 1e-6);
  }
  SUBCASE("reference sizes") {
    Rng rng(9);
    auto [h, y] = random_hy(2, 25, 2, rng);
    const TrainState st = elm::ielm_init_features(h, y, 1.827e-5);
    CHECK(st.info.rows() == 25);
    CHECK(st.info.cols() == 25);
  }
  SUBCASE("mu must be positive") {
    CHECK_THROWS_AS(elm::ielm_init_features(Matrix::Identity(2, 2), Matrix::Zero(2, 1), 0.0),
                    Error);
  }
  SUBCASE("all-zero increment is a bit-exact no-op") {
    Rng rng(10);
    auto [h, y] = random_hy(6, 4, 2, rng);
    const TrainState st = elm::ielm_init_features(h, y, 0.5);
    const TrainState next =
        elm::ielm_update_features(st, Matrix::Zero(3, 4), Matrix::Zero(3, 2));
    CHECK(bit_equal(next.beta, st.beta));
    CHECK(bit_equal(next.info_inv_approx, st.info_inv_approx));
    CHECK(next.step == st.step + 1);
  }
  SUBCASE("two single-row updates equal one two-row update") {
    Rng rng(11);
    auto [h0, y0] = random_hy(6, 4, 2, rng);
    auto [h12, y12] = random_hy(2, 4, 2, rng);
    const double mu = 0.7;

    TrainState split = elm::ielm_init_features(h0, y0, mu);
    split = elm::ielm_update_features(split, h12.topRows(1), y12.topRows(1));
    split = elm::ielm_update_features(split, h12.bottomRows(1), y12.bottomRows(1));

    TrainState block = elm::ielm_init_features(h0, y0, mu);
    block = elm::ielm_update_features(block, h12, y12);
    CHECK(rel_err(split.beta, block.beta) < 1e-8);

    Matrix h_all(8, 4), y_all(8, 2);
    h_all << h0, h12;
    y_all << y0, y12;
    const Matrix direct = (h_all.transpose() * h_all + Matrix::Identity(4, 4) / mu)
                              .fullPivLu()
                              .solve(h_all.transpose() * y_all);
    CHECK(rel_err(split.beta, direct) < 1e-8);
  }
  SUBCASE("any minibatch partition matches the stacked solve") {
    Rng rng(12);
    auto [h, y] = random_hy(16, 5, 2, rng);
    std::vector<std::pair<Matrix, Matrix>> parts;
    Index at = 0;
    for (Index rows : {6, 1, 4, 3, 2}) {
      parts.push_back({h.middleRows(at, rows), y.middleRows(at, rows)});
      at += rows;
    }
    const double mu = 2.5;
    TrainState st = elm::ielm_init_features(parts[0].first, parts[0].second, mu);
    for (std::size_t i = 1; i < parts.size(); ++i) {
      st = elm::ielm_update_features(st, parts[i].first, parts[i].second);
    }
    const Matrix stacked = oracle::stacked_solve(
        parts, RegStrategy::scalar(1.0 / mu), HrConfig{0, Mode::standard, 1.0 - 1e-9}, false);
    CHECK(rel_err(st.beta, stacked) < 1e-8);
  }
}

TEST_CASE("incremental regularized recursion") {
  SUBCASE("order 0 with a scalar strategy reduces to the ridge init") {
    Rng rng(13);
    auto [h, y] = random_hy(12, 4, 2, rng);
    const double mu = 3.0;
    const TrainState ridge = elm::ielm_init_features(h, y, mu);
    const TrainState hr = elm::ihr_init_features(h, y, RegStrategy::scalar(1.0 / mu),
                                                 HrConfig{0, Mode::standard, 1.0 - 1e-9});
    CHECK(rel_err(hr.beta, ridge.beta) < 1e-12);
    CHECK(rel_err(hr.info_inv_approx, ridge.info_inv_approx) < 1e-12);
  }
  SUBCASE("rank-deficient first batch routes to the swapped factor") {
    Rng rng(14);
    auto [h, y] = random_hy(2, 6, 2, rng);
    const TrainState st = elm::ihr_init_features(h, y, RegStrategy::scalar(5.0), kStd1);
    CHECK(st.config.mode == Mode::swapped);
    auto [hf, yf] = random_hy(20, 6, 2, rng);
    const TrainState full = elm::ihr_init_features(hf, yf, RegStrategy::scalar(5.0), kStd1);
    CHECK(full.config.mode == Mode::standard);
  }
  SUBCASE("2x2 worked case") {
    Vector y(2);
    y << 1.0, 2.0;
    const TrainState st =
        elm::ihr_init_features(diag2(1, 2), y, RegStrategy::scalar(1.0), kStd1);
    CHECK(rel_err(st.beta, Vector((Vector(2) << 0.75, 0.96).finished())) < 1e-13);
  }
  SUBCASE("zero increment leaves beta in place") {
    Rng rng(15);
    auto [h, y] = random_hy(12, 4, 2, rng);
    const TrainState st = elm::ihr_init_features(h, y, RegStrategy::scalar(0.8), kStd1);
    const TrainState next =
        elm::ihr_update_features(st, Matrix::Zero(2, 4), Matrix::Zero(2, 2));
    CHECK(rel_err(next.beta, st.beta) < 1e-12);
  }
  SUBCASE("sequential minibatches equal the concatenated batch") {
    Rng rng(16);
    auto [h, y] = random_hy(20, 5, 2, rng);
    std::vector<std::pair<Matrix, Matrix>> parts;
    Index at = 0;
    for (Index rows : {2, 6, 4, 5, 3}) {
      parts.push_back({h.middleRows(at, rows), y.middleRows(at, rows)});
      at += rows;
    }
    for (int order : {0, 1, 2}) {
      const HrConfig cfg{order, Mode::standard, 1.0 - 1e-9};
      const RegStrategy strategy = RegStrategy::scalar(1.7);
      TrainState st = elm::ihr_init_features(parts[0].first, parts[0].second, strategy, cfg);
      for (std::size_t i = 1; i < parts.size(); ++i) {
        st = elm::ihr_update_features(st, parts[i].first, parts[i].second);
      }
      CHECK(rel_err(st.beta, oracle::stacked_solve(parts, strategy, cfg)) < 1e-8);
    }
  }
  SUBCASE("order-0 updates track the ridge recursion") {
    Rng rng(17);
    auto [h, y] = random_hy(18, 4, 2, rng);
    const double mu = 1.3;
    TrainState ridge = elm::ielm_init_features(h.topRows(8), y.topRows(8), mu);
    TrainState hr = elm::ihr_init_features(h.topRows(8), y.topRows(8),
                                           RegStrategy::scalar(1.0 / mu),
                                           HrConfig{0, Mode::standard, 1.0 - 1e-9});
    for (Index at = 8; at < 18; at += 2) {
      ridge = elm::ielm_update_features(ridge, h.middleRows(at, 2), y.middleRows(at, 2));
      hr = elm::ihr_update_features(hr, h.middleRows(at, 2), y.middleRows(at, 2));
      CHECK(rel_err(hr.beta, ridge.beta) < 1e-8);
    }
  }
}

TEST_CASE("bias correction") {
  SUBCASE("zero residual keeps the accumulator at zero") {
    Rng rng(18);
    auto [h, y] = random_hy(12, 4, 2, rng);
    TrainState st = elm::ihr_init_features(h, y, RegStrategy::scalar(0.0), kStd1);
    CHECK(st.bias_acc.norm() == doctest::Approx(0.0));
    auto [h2, y2] = random_hy(2, 4, 2, rng);
    st = elm::bias_correct_features(st, h2, y2);
    CHECK(st.bias_acc.norm() == doctest::Approx(0.0));
  }
  SUBCASE("corrected weights reproduce the pseudo-inverse solution after each batch") {
    Rng rng(19);
    auto [h, y] = random_hy(24, 4, 2, rng);
    const RegStrategy strategy = RegStrategy::scalar(1.0);
    for (int order : {0, 1}) {
      const HrConfig cfg{order, Mode::standard, 1.0 - 1e-9};
      TrainState st = elm::ihr_init_features(h.topRows(10), y.topRows(10), strategy, cfg);
      Matrix h_seen = h.topRows(10);
      Matrix y_seen = y.topRows(10);
      CHECK(rel_err(st.beta + st.bias_acc, elm::pinv_solve(h_seen, y_seen)) < 1e-8);
      for (Index at = 10; at < 24; at += 7) {
        const Matrix h_ic = h.middleRows(at, 7);
        const Matrix y_ic = y.middleRows(at, 7);
        st = elm::bias_correct_features(st, h_ic, y_ic);
        st = elm::ihr_update_features(st, h_ic, y_ic);
        Matrix h_new(h_seen.rows() + 7, 4), y_new(y_seen.rows() + 7, 2);
        h_new << h_seen, h_ic;
        y_new << y_seen, y_ic;
        h_seen = h_new;
        y_seen = y_new;
        CHECK(rel_err(st.beta + st.bias_acc, elm::pinv_solve(h_seen, y_seen)) < 1e-8);
      }
    }
  }
  SUBCASE("ill-conditioned accumulated gram is refused") {
    TrainState st;
    st.info = diag2(1.0, 1e-9);
    st.reg = Matrix::Zero(2, 2);
    st.info_inv_approx = Matrix::Identity(2, 2);
    st.beta = Matrix::Zero(2, 1);
    st.bias_acc = Matrix::Zero(2, 1);
    st.config = kStd1;
    CHECK_THROWS_AS(
        elm::bias_correct_features(st, 0.5 * Matrix::Identity(2, 2), Matrix::Zero(2, 1)),
        IllConditioned);
  }
}

TEST_CASE("approximate incremental update") {
  SUBCASE("zero minibatch is a bit-exact no-op") {
    Rng rng(20);
    auto [h, y] = random_hy(12, 4, 2, rng);
    const TrainState st = elm::ihr_init_features(h, y, RegStrategy::scalar(0.9), kStd1);
    const TrainState next =
        elm::eqlm_update_features(st, Matrix::Zero(2, 4), Matrix::Zero(2, 2));
    CHECK(bit_equal(next.beta, st.beta));
  }
  SUBCASE("coincides with the ridge update rule on the same state") {
    Rng rng(21);
    auto [h, y] = random_hy(12, 4, 2, rng);
    const TrainState st = elm::ielm_init_features(h, y, 0.6);
    auto [h2, y2] = random_hy(3, 4, 2, rng);
    const TrainState a = elm::eqlm_update_features(st, h2, y2);
    const TrainState b = elm::ielm_update_features(st, h2, y2);
    CHECK(bit_equal(a.beta, b.beta));
    CHECK(bit_equal(a.info_inv_approx, b.info_inv_approx));
  }
  SUBCASE("matches a step-by-step pinv-based evaluation of the recursion") {
    Rng rng(22);
    auto [h0, y0] = random_hy(4, 5, 2, rng);
    TrainState st = elm::ihr_init_features(h0, y0, RegStrategy::scalar(12.0), kStd1);
    Matrix a_dag = st.info_inv_approx;
    Matrix beta = st.beta;
    for (int step = 0; step < 10; ++step) {
      auto [h, y] = random_hy(2, 5, 2, rng);
      st = elm::eqlm_update_features(st, h, y);
      // Independent route: explicit pseudo-inverse, explicit products.
      const Matrix inner = h * a_dag * h.transpose() + Matrix::Identity(2, 2);
      const Matrix k =
          Matrix::Identity(5, 5) - a_dag * h.transpose() * oracle::pinv(inner) * h;
      beta = k * beta + k * a_dag * h.transpose() * y;
      a_dag = k * a_dag;
      CHECK(rel_err(st.beta, beta) < 1e-10);
      CHECK(rel_err(st.info_inv_approx, a_dag) < 1e-10);
    }
  }
}

TEST_CASE("predict") {
  SUBCASE("zero output weights predict zero") {
    ElmModel m = elm::init_elm(4, 6, 2, 23);
    Rng rng(23);
    CHECK(elm::predict(m, testutil::random_matrix(3, 4, rng)).norm() == 0.0);
  }
  SUBCASE("shapes") {
    ElmModel m = elm::init_elm(4, 6, 2, 24);
    Rng rng(24);
    const Matrix out = elm::predict(m, testutil::random_matrix(7, 4, rng));
    CHECK(out.rows() == 7);
    CHECK(out.cols() == 2);
  }
}

TEST_CASE("training is deterministic end to end") {
  auto run = [] {
    Rng rng(25);
    ElmModel m = elm::init_elm(3, 5, 2, 77);
    Batch batch{testutil::random_matrix(12, 3, rng), testutil::random_matrix(12, 2, rng)};
    TrainState st = elm::ihr_init(m, batch, RegStrategy::scalar(2.0), kStd1);
    for (int i = 0; i < 4; ++i) {
      Batch inc{testutil::random_matrix(2, 3, rng), testutil::random_matrix(2, 2, rng)};
      st = elm::eqlm_update(st, m, inc);
    }
    return st.beta;
  };
  CHECK(bit_equal(run(), run()));
}

TEST_CASE("model serialization round-trips bit-exactly") {
  ElmModel m = elm::init_elm(3, 5, 2, 99);
  Rng rng(26);
  m.output_weights = testutil::random_matrix(5, 2, rng);
  const std::string path = "test_model.bin";
  elm::save_model(m, path);
  const ElmModel back = elm::load_model(path);
  CHECK(bit_equal(back.input_weights, m.input_weights));
  CHECK(bit_equal(Matrix(back.bias), Matrix(m.bias)));
  CHECK(bit_equal(back.output_weights, m.output_weights));
  CHECK(back.seed == m.seed);
  CHECK(back.activation == m.activation);
  std::remove(path.c_str());

  SUBCASE("bad files are rejected") {
    CHECK_THROWS_AS(elm::load_model("does_not_exist.bin"), IoError);
  }
}

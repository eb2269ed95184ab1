#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include "graphsmooth/graph.hpp"
#include "graphsmooth/signal.hpp"
#include "test_support.hpp"

using namespace graphsmooth;
using gs_test::path3;
using gs_test::random_connected_graph;
using gs_test::random_vector;
using gs_test::two_node_graph;

TEST_CASE("two-node graph has the forced Laplacian and spectrum") {
  const SpectralGraph sg = build_spectral_graph(two_node_graph());
  Matrix expected(2, 2);
  expected << 1.0, -1.0, -1.0, 1.0;
  REQUIRE((sg.laplacian() - expected).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(sg.eigenvalues()(0) == 0.0);
  REQUIRE(sg.eigenvalues()(1) == Catch::Approx(2.0).epsilon(1e-12));
  REQUIRE(sg.lambda_avg() == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("3-node path eigenvalues are (0, 1, 3)") {
  // Characteristic polynomial of the path Laplacian is lambda(lambda-1)(lambda-3).
  const SpectralGraph sg = build_spectral_graph(path3());
  REQUIRE(sg.eigenvalues()(0) == 0.0);
  REQUIRE(sg.eigenvalues()(1) == Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE(sg.eigenvalues()(2) == Catch::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("graph construction rejects invalid edges") {
  REQUIRE_THROWS_MATCHES(
      WeightedGraph(2, {{0, 0, 1.0}}), Error,
      Catch::Matchers::Predicate<Error>(
          [](const Error& e) { return e.code() == ErrorCode::InvalidEdge; }));
  REQUIRE_THROWS_AS(WeightedGraph(2, {{0, 1, -1.0}}), Error);
  REQUIRE_THROWS_AS(WeightedGraph(2, {{0, 2, 1.0}}), Error);
  REQUIRE_THROWS_AS(WeightedGraph(2, {{0, 1, 1.0}, {1, 0, 2.0}}), Error);
}

TEST_CASE("disconnected graphs are rejected") {
  // Two components: 0-1 and 2-3.
  const WeightedGraph g(4, {{0, 1, 1.0}, {2, 3, 1.0}});
  try {
    build_spectral_graph(g);
    FAIL("expected DisconnectedGraph");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::DisconnectedGraph);
  }
}

TEST_CASE("eigenvector sign convention and orthonormality") {
  RngStream rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + static_cast<int>(rng.next_u64() % 8);
    const SpectralGraph sg = build_spectral_graph(random_connected_graph(rng, n));
    const Matrix& v = sg.eigenvectors();
    REQUIRE((v.transpose() * v - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() <
            1e-9);
    for (int c = 0; c < n; ++c) {
      int arg_max = 0;
      v.col(c).cwiseAbs().maxCoeff(&arg_max);
      REQUIRE(v(arg_max, c) > 0.0);
    }
  }
}

TEST_CASE("gft of an eigenvector is a unit vector") {
  const SpectralGraph sg = build_spectral_graph(path3());
  for (int k = 0; k < 3; ++k) {
    const Vector coords = gft(sg, sg.eigenvectors().col(k));
    for (int n = 0; n < 3; ++n) {
      REQUIRE(coords(n) == Catch::Approx(n == k ? 1.0 : 0.0).margin(1e-12));
    }
  }
  REQUIRE(gft(sg, Vector::Zero(3)).norm() == 0.0);
}

TEST_CASE("gft preserves norms and round-trips") {
  const SpectralGraph sg = build_spectral_graph(path3());
  RngStream rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = random_vector(rng, 3);
    const Vector x_tilde = gft(sg, x);
    // Direct matrix multiply oracle.
    const Vector oracle = sg.eigenvectors().transpose() * x;
    REQUIRE((x_tilde - oracle).norm() == 0.0);
    REQUIRE(x_tilde.norm() == Catch::Approx(x.norm()).epsilon(1e-12));
    REQUIRE((inverse_gft(sg, x_tilde) - x).norm() <= 1e-10 * x.norm());
  }
  REQUIRE_THROWS_AS(gft(sg, Vector::Zero(4)), Error);
}

TEST_CASE("total variation agrees with all three forms") {
  RngStream rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(rng.next_u64() % 8);
    const WeightedGraph g = random_connected_graph(rng, n);
    const SpectralGraph sg = build_spectral_graph(g);
    const Vector x = random_vector(rng, n);

    const double quad_form = total_variation(sg, x);

    double pairwise = 0.0;  // (1/2) sum_k sum_n W_kn (x_k - x_n)^2
    const Matrix w = g.adjacency_matrix();
    for (int k = 0; k < n; ++k) {
      for (int m = 0; m < n; ++m) {
        pairwise += 0.5 * w(k, m) * (x(k) - x(m)) * (x(k) - x(m));
      }
    }
    const Vector x_tilde = sg.eigenvectors().transpose() * x;
    const double spectral = sg.eigenvalues().dot(x_tilde.cwiseAbs2());

    const double scale = std::max(1.0, std::abs(quad_form));
    REQUIRE(std::abs(quad_form - pairwise) <= 1e-10 * scale);
    REQUIRE(std::abs(quad_form - spectral) <= 1e-10 * scale);
  }
}

TEST_CASE("total variation special cases") {
  const SpectralGraph sg = build_spectral_graph(path3());
  REQUIRE(total_variation(sg, Vector::Constant(3, 4.2)) ==
          Catch::Approx(0.0).margin(1e-12));
  for (int n = 0; n < 3; ++n) {
    REQUIRE(total_variation(sg, sg.eigenvectors().col(n)) ==
            Catch::Approx(sg.eigenvalues()(n)).margin(1e-12));
  }
}

TEST_CASE("random graph structural invariants") {
  RngStream rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 9);
    const WeightedGraph g = random_connected_graph(rng, n);
    const Matrix l = laplacian_matrix(g);
    // Row sums of W equal the diagonal, so L 1 = 0 in exact structure.
    REQUIRE((l * Vector::Ones(n)).cwiseAbs().maxCoeff() <= 1e-12);
    const SpectralGraph sg = build_spectral_graph(g);
    REQUIRE(sg.eigenvalues()(0) <= 1e-9 * sg.lambda_max());
    const Vector x = random_vector(rng, n);
    REQUIRE(total_variation(sg, x) >= -1e-9 * x.squaredNorm());
    // Eigenpair residuals.
    for (int k = 0; k < n; ++k) {
      const double residual =
          (l * sg.eigenvectors().col(k) -
           sg.eigenvalues()(k) * sg.eigenvectors().col(k))
              .norm();
      REQUIRE(residual <= 1e-9 * std::max(sg.lambda_max(), 1.0));
    }
  }
}

TEST_CASE("signal batch reconstructs from its gft image") {
  const SpectralGraph sg = build_spectral_graph(path3());
  RngStream rng(19);
  const SignalBatch batch(gs_test::random_matrix(rng, 5, 3));
  const auto x_tilde = batch.gft_values(sg);
  const Matrix reconstructed = *x_tilde * sg.eigenvectors().transpose();
  REQUIRE((reconstructed - batch.values()).cwiseAbs().maxCoeff() <= 1e-10);
  // Row norms preserved.
  for (int m = 0; m < batch.n_samples(); ++m) {
    REQUIRE(x_tilde->row(m).norm() ==
            Catch::Approx(batch.values().row(m).norm()).epsilon(1e-12));
  }
}

TEST_CASE("gft cache is race-free and idempotent") {
  const SpectralGraph sg = build_spectral_graph(path3());
  RngStream rng(23);
  const SignalBatch batch(gs_test::random_matrix(rng, 64, 3));
  std::shared_ptr<const Matrix> a, b;
  std::thread t1([&] { a = batch.gft_values(sg); });
  std::thread t2([&] { b = batch.gft_values(sg); });
  t1.join();
  t2.join();
  REQUIRE(a.get() == b.get());  // compute-once
  REQUIRE(batch.gft_values(sg).get() == a.get());
}

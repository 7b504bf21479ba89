#include "opreg/design.hpp"

#include <string>

#include "doctest.h"
#include "opreg/dataset.hpp"
#include "opreg/error.hpp"
#include "opreg/rng.hpp"
#include "test_util.hpp"

using namespace opreg;

TEST_CASE("load_csv happy path") {
  std::string path = testutil::write_temp("ok.csv",
                                          "y,a,x\n"
                                          "0,1,0.5\n"
                                          "1,0,-1.25\n"
                                          "1,1,3\n"
                                          "0,0,2\n");
  Dataset d = load_csv(path, "y", "a");
  CHECK(d.n() == 4);
  CHECK(d.y[1] == 1.0);
  CHECK(d.a[0] == 1.0);
  REQUIRE(d.covariates.has_column("x"));
  CHECK(d.covariates.column("x")[1] == doctest::Approx(-1.25));
}

TEST_CASE("load_csv rejects non-binary outcome naming the row") {
  std::string path = testutil::write_temp("bad_y.csv",
                                          "y,a,x\n"
                                          "0,1,0.5\n"
                                          "1,0,1\n"
                                          "2,1,2\n");
  try {
    load_csv(path, "y", "a");
    FAIL("expected load error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::kSpec);
    CHECK(std::string(e.what()).find("non-binary outcome, row 3") !=
          std::string::npos);
  }
}

TEST_CASE("load_csv rejects missing cell identifying it") {
  std::string path = testutil::write_temp("missing.csv",
                                          "y,a,x\n"
                                          "0,1,0.5\n"
                                          "1,0,\n");
  try {
    load_csv(path, "y", "a");
    FAIL("expected load error");
  } catch (const Error& e) {
    std::string msg = e.what();
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("\"x\"") != std::string::npos);
  }
}

TEST_CASE("load_csv io and column errors") {
  try {
    load_csv("/nonexistent/file.csv", "y", "a");
    FAIL("expected io error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::kIo);
  }

  std::string path = testutil::write_temp("nocol.csv", "y,x\n0,1\n");
  CHECK_THROWS_AS(load_csv(path, "y", "a"), Error);
}

TEST_CASE("build_design basics") {
  CovariateTable cov;
  Eigen::VectorXd x(2);
  x << 0.0, 2.0;
  cov.add_column("x", x);

  DesignSpec spec;
  spec.terms = {"x"};
  DesignMatrix m = build_design(cov, spec);
  REQUIRE(m.k() == 2);
  CHECK(m.column_names[0] == "intercept");
  CHECK(m.values(0, 0) == 1.0);
  CHECK(m.values(1, 0) == 1.0);
  CHECK(m.values(0, 1) == 0.0);
  CHECK(m.values(1, 1) == 2.0);
}

TEST_CASE("build_design interactions") {
  CovariateTable cov;
  Eigen::VectorXd x1(2), x2(2);
  x1 << 1.0, 2.0;
  x2 << 3.0, 4.0;
  cov.add_column("x1", x1);
  cov.add_column("x2", x2);

  DesignSpec spec;
  spec.terms = {"x1", "x2", "x1:x2"};
  DesignMatrix m = build_design(cov, spec);
  REQUIRE(m.k() == 4);
  CHECK(m.values(0, 3) == 3.0);
  CHECK(m.values(1, 3) == 8.0);
  CHECK(m.column_names[3] == "x1:x2");
}

TEST_CASE("build_design intercept-only and errors") {
  CovariateTable cov;
  Eigen::VectorXd x(3);
  x << 1.0, 2.0, 3.0;
  cov.add_column("x", x);

  DesignSpec spec;  // empty terms, intercept on
  DesignMatrix m = build_design(cov, spec);
  CHECK(m.k() == 1);
  CHECK(m.values.col(0).isOnes());

  DesignSpec bad;
  bad.terms = {"nope"};
  CHECK_THROWS_AS(build_design(cov, bad), Error);

  DesignSpec empty;
  empty.intercept = false;
  CHECK_THROWS_AS(build_design(cov, empty), Error);
}

TEST_CASE("interaction columns are elementwise products on random input") {
  Rng rng(314);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.index(20));
    Eigen::VectorXd u(n), v(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      u[i] = rng.uniform(-5.0, 5.0);
      v[i] = rng.uniform(-5.0, 5.0);
      w[i] = rng.uniform(-5.0, 5.0);
    }
    CovariateTable cov;
    cov.add_column("u", u);
    cov.add_column("v", v);
    cov.add_column("w", w);

    DesignSpec spec;
    spec.terms = {"u", "v:w", "u:v:w"};
    DesignMatrix m = build_design(cov, spec);
    for (Eigen::Index i = 0; i < n; ++i) {
      CHECK(m.values(i, 2) == doctest::Approx(v[i] * w[i]).epsilon(1e-14));
      CHECK(m.values(i, 3) == doctest::Approx(u[i] * v[i] * w[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("resample keeps row alignment") {
  std::string path = testutil::write_temp("rs.csv",
                                          "y,a,x\n"
                                          "0,1,10\n"
                                          "1,0,20\n"
                                          "1,1,30\n");
  Dataset d = load_csv(path, "y", "a");
  Dataset r = resample(d, {2, 0, 2});
  CHECK(r.n() == 3);
  CHECK(r.y[0] == 1.0);
  CHECK(r.covariates.column("x")[0] == 30.0);
  CHECK(r.covariates.column("x")[1] == 10.0);
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "jmc/oracle.hpp"
#include "test_support.hpp"

using jmc::Distribution;
using jmc::ProductDistribution;

namespace {
ProductDistribution u01() { return ProductDistribution({Distribution::uniform(0.0, 1.0)}); }
}  // namespace

TEST_CASE("generator mapping is the documented 53-bit one", "[oracle]") {
  jmc::Rng r(42u), r2(42u);
  std::mt19937_64 eng(42u);
  for (int i = 0; i < 100; ++i) {
    const double expect = (eng() >> 11) * 0x1.0p-53;
    CHECK(r.uniform01() == expect);
  }
  for (int i = 0; i < 100; ++i) {
    const double v = r2.uniform01();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  CHECK(jmc::mix_seed(1, 2) != jmc::mix_seed(1, 3));
  CHECK(jmc::mix_seed(1, 2) != jmc::mix_seed(2, 2));
}

TEST_CASE("quadrature integrates simple expectations", "[oracle]") {
  auto f = jmc::parse("w1");
  std::vector<double> x;
  auto e = jmc::quad_expect(f, x, u01());
  CHECK(e.value == Catch::Approx(0.5).margin(1e-14));
  CHECK(e.half_width == 0.0);
  CHECK(e.method == "quad");

  // a pure-x integrand is exact regardless of the law
  auto g = jmc::parse("x1^2 - 3*x1");
  std::vector<double> xv{2.0};
  auto law = ProductDistribution({Distribution::truncated_normal(0.0, 1.0, -5.0, 5.0)});
  auto e2 = jmc::quad_expect(g, xv, law);
  CHECK(e2.value == Catch::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("fixed-order tensor rule is exact on low-degree polynomials", "[oracle]") {
  // degree 7 with 4 nodes per dimension
  auto poly = [](std::span<const double> p) {
    const double t = p[0];
    return ((3.0 * t - 1.0) * t + 2.0) * t * t * t * t * t - 0.5 * t * t + 1.0;
  };
  jmc::Box dom{jmc::Interval(0.0, 1.0)};
  const double got = jmc::tensor_quad(poly, dom, 4);
  // antiderivative evaluated by hand: 3/8 t^8 - 1/7 t^7 + 2/6 t^6 - 1/6 t^3 + t
  const double expect = 3.0 / 8.0 - 1.0 / 7.0 + 2.0 / 6.0 - 0.5 / 3.0 + 1.0;
  CHECK(got == Catch::Approx(expect).margin(1e-13));
}

TEST_CASE("quadrature reproduces a hand integral", "[oracle]") {
  // integrand ((w-10)^2 ln x + (x-5)^2)/w under uniform [10,13] at x = 25:
  // (ln 25 * I1 + 400 * ln(13/10)) / 3 with I1 = 34.5 - 60 + 100 ln 1.3
  auto f = jmc::parse("((w1 - 10)^2*ln(x1) + (x1 - 5)^2)/w1");
  std::vector<double> x{25.0};
  auto law = ProductDistribution({Distribution::uniform(10.0, 13.0)});
  auto e = jmc::quad_expect(f, x, law);
  const double i1 = -25.5 + 100.0 * std::log(1.3);
  const double expect = (std::log(25.0) * i1 + 400.0 * std::log(1.3)) / 3.0;
  CHECK(e.value == Catch::Approx(expect).epsilon(1e-11));
  CHECK(expect == Catch::Approx(35.772057024410235).epsilon(1e-15));
}

TEST_CASE("monte carlo is seeded and reproducible", "[oracle]") {
  auto f = jmc::parse("w1^2 + 2*w1");
  std::vector<double> x;
  auto a = jmc::mc_expect(f, x, u01(), 10000, 7u);
  auto b = jmc::mc_expect(f, x, u01(), 10000, 7u);
  CHECK(a.value == b.value);
  CHECK(a.half_width == b.half_width);
  CHECK(a.n == 10000);
  CHECK(a.method == "mc");

  auto c = jmc::mc_expect(f, x, u01(), 10000, 8u);
  CHECK(a.value != c.value);

  auto k = jmc::parse("3 + 0*w1");
  auto e = jmc::mc_expect(k, x, u01(), 100, 5u);
  CHECK(e.value == 3.0);
  CHECK(e.half_width == 0.0);
}

TEST_CASE("monte carlo brackets the quadrature value", "[oracle]") {
  auto f = jmc::parse("(x1*x2*ln(3 + x1*w1*w2) - (x1^2 - 1)*(x2^2 - 1)*w2^2)/(2 + w1*x1)");
  auto law = ProductDistribution({Distribution::uniform(0.0, 1.0), Distribution::uniform(0.0, 2.0)});
  std::vector<double> x{0.0, 0.0};
  auto q = jmc::quad_expect(f, x, law);
  auto m = jmc::mc_expect(f, x, law, 200000, 20260814u);
  CHECK(std::fabs(q.value - m.value) <= m.half_width);

  std::vector<double> x2{0.5, -0.75};
  auto q2 = jmc::quad_expect(f, x2, law);
  auto m2 = jmc::mc_expect(f, x2, law, 200000, 31u);
  CHECK(std::fabs(q2.value - m2.value) <= m2.half_width);
}

TEST_CASE("oracles agree across laws and sample points", "[oracle][slow]") {
  std::mt19937_64 eng(606u);
  auto uni01 = [&]() { return (eng() >> 11) * 0x1.0p-53; };

  struct Case {
    const char* text;
    ProductDistribution law;
    double xlo, xhi;
    int nx;
  };
  std::vector<Case> cases;
  cases.push_back({"(x1*x2*ln(3 + x1*w1*w2) - (x1^2 - 1)*(x2^2 - 1)*w2^2)/(2 + w1*x1)",
                   ProductDistribution({Distribution::uniform(0.0, 1.0), Distribution::uniform(0.0, 2.0)}),
                   -1.0, 1.0, 2});
  cases.push_back({"((w1 - 10)^2*ln(x1) + (x1 - 5)^2)/w1",
                   ProductDistribution({Distribution::uniform(10.0, 13.0)}), 24.0, 26.0, 1});
  cases.push_back({"exp(x1/4)*sqrt(w1) + x1*w2",
                   ProductDistribution({Distribution::truncated_gamma(2.5, 1.3, 0.2, 9.0),
                                        Distribution::beta(2.2, 3.1)}),
                   -2.0, 2.0, 1});
  cases.push_back({"sin(x1 + w1) + cos(w1*x1/5)",
                   ProductDistribution({Distribution::truncated_normal(0.3, 1.2, -4.0, 5.0)}), -2.0,
                   2.0, 1});

  int pairs = 0;
  for (const auto& cs : cases) {
    auto f = jmc::parse(cs.text);
    for (int k = 0; k < 5; ++k) {
      std::vector<double> x;
      for (int i = 0; i < cs.nx; ++i) x.push_back(cs.xlo + uni01() * (cs.xhi - cs.xlo));
      auto q = jmc::quad_expect(f, x, cs.law);
      auto m = jmc::mc_expect(f, x, cs.law, 120000, 1000u + static_cast<unsigned>(pairs));
      CHECK(std::fabs(q.value - m.value) <= m.half_width);
      ++pairs;
    }
  }
  CHECK(pairs == 20);
}

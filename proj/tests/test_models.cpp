#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "ppcalib/models.hpp"
#include "support.hpp"

using namespace ppcalib;

namespace {

const Monomial kOne{0, 0};
const Monomial kX{1, 0};
const Monomial kY{0, 1};
const Monomial kXX{2, 0};

PoissonModel inhom_poisson() { return {LogLinearIntensity({kOne, kX}, {std::log(300.0), -3.0})}; }

StraussModel inhom_strauss() {
  return {LogLinearIntensity({kOne, kX, kY, kXX}, {std::log(200.0), 2.0, 2.0, 3.0}), 0.1, 0.05};
}

GeyerModel geyer() { return {std::exp(4.0), std::exp(0.4), 0.05, 4.5}; }

// Midpoint rule on an m x m grid: independent of the Gauss-Legendre code.
template <class F>
double midpoint(const Window& w, std::size_t m, F f) {
  const double hx = w.width() / static_cast<double>(m);
  const double hy = w.height() / static_cast<double>(m);
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      s += f(Point{w.x_min() + (static_cast<double>(i) + 0.5) * hx, w.y_min() + (static_cast<double>(j) + 0.5) * hy});
    }
  }
  return s * hx * hy;
}

// The midpoint error is c h^2 + O(h^4), so one Richardson step removes the
// leading term and leaves a relative error far below 1e-8.
template <class F>
double richardson_midpoint(const Window& w, F f) {
  return (4.0 * midpoint(w, 2000, f) - midpoint(w, 1000, f)) / 3.0;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("monomial names round-trip") {
    for (int px = 0; px <= 3; ++px) {
      for (int py = 0; py <= 3; ++py) {
        const Monomial m{px, py};
        CHECK(Monomial::parse(m.name()) == m);
      }
    }
    CHECK(Monomial::parse("u1") == kX);
    CHECK(Monomial::parse("u1^2") == kXX);
    CHECK(Monomial::parse(" y ") == kY);
    CHECK(kXX.name() == "x^2");
    CHECK(Monomial{1, 1}.name() == "x*y");
    CHECK_THROWS_AS(Monomial::parse("z"), std::invalid_argument);
    CHECK(parse_basis("1,x,y,x^2") == std::vector<Monomial>{kOne, kX, kY, kXX});
  }

  TEST_CASE("log-linear intensity values") {
    const auto m = inhom_poisson();
    CHECK(m.intensity({0.0, 0.3}) == doctest::Approx(300.0));
    CHECK(m.intensity({1.0, 0.3}) == doctest::Approx(300.0 * std::exp(-3.0)));
    CHECK(m.intensity({0.5, 0.0}) == doctest::Approx(300.0 * std::exp(-1.5)));
    const auto s = inhom_strauss();
    CHECK(s.activity({0.5, 0.5}) == doctest::Approx(200.0 * std::exp(1.0 + 1.0 + 0.75)));
  }

  TEST_CASE("log-linear intensity rejects malformed inputs") {
    CHECK_THROWS_AS(LogLinearIntensity({kX}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(LogLinearIntensity({kOne, kOne}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(LogLinearIntensity({kOne, kX}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(LogLinearIntensity({kOne}, {NAN}), std::invalid_argument);
    CHECK_THROWS_AS(LogLinearIntensity::constant(-1.0), std::invalid_argument);
    const auto zero = LogLinearIntensity::constant(0.0);
    CHECK(zero({0.2, 0.2}) == 0.0);
    CHECK(integrate_intensity(zero, Window::unit_square()) == 0.0);
  }

  TEST_CASE("model validation names the field") {
    auto message = [](const ModelSpec& m) {
      try {
        validate(m);
      } catch (const std::invalid_argument& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message(StraussModel{LogLinearIntensity::constant(10.0), 1.5, 0.05}).starts_with("gamma"));
    CHECK(message(StraussModel{LogLinearIntensity::constant(10.0), 0.5, 0.0}).starts_with("r"));
    CHECK(message(GeyerModel{0.0, 1.5, 0.05, 1.0}).starts_with("beta"));
    CHECK(message(GeyerModel{1.0, 1.5, 0.05, -1.0}).starts_with("alpha"));
    CHECK(message(GeyerModel{1.0, 0.0, 0.05, 1.0}).starts_with("gamma"));
    CHECK(message(inhom_strauss()).empty());
    CHECK(message(geyer()).empty());
    // Hard core and Poisson limits are legal Strauss models.
    CHECK(message(StraussModel{LogLinearIntensity::constant(10.0), 0.0, 0.05}).empty());
    CHECK(message(StraussModel{LogLinearIntensity::constant(10.0), 1.0, 0.05}).empty());
  }

  TEST_CASE("Gauss-Legendre integrates polynomials exactly") {
    const GaussLegendre rule(16);
    double wsum = 0.0;
    for (const double w : rule.weights()) wsum += w;
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
    // Degree 31 in x is integrated exactly by 16 nodes.
    const double v = rule.integrate(Window(0.0, 1.0, 0.0, 2.0), [](Point u) { return std::pow(u.x, 31) * u.y; });
    CHECK(v == doctest::Approx(2.0 / 32.0).epsilon(1e-13));
  }

  TEST_CASE("window integral matches the closed form and a midpoint oracle") {
    const auto m = inhom_poisson();
    const double closed = 100.0 * (1.0 - std::exp(-3.0));
    CHECK(closed == doctest::Approx(95.0213).epsilon(1e-6));
    const double gl = integrate_intensity(ModelSpec{m}, Window::unit_square());
    CHECK(gl == doctest::Approx(closed).epsilon(1e-12));
    const double mid = richardson_midpoint(Window::unit_square(), [&](Point u) { return m.intensity(u); });
    CHECK(gl == doctest::Approx(mid).epsilon(1e-8));

    const auto s = inhom_strauss();
    const double gs = integrate_intensity(s.activity, Window::unit_square());
    const double ms = richardson_midpoint(Window::unit_square(), [&](Point u) { return s.activity(u); });
    CHECK(gs == doctest::Approx(ms).epsilon(1e-8));
  }

  TEST_CASE("pixel integrals add up to the window integral") {
    const auto m = inhom_poisson();
    const PixelGrid grid(Window(0.0, 1.0, 0.0, 10.0), 20, 200);
    double sum = 0.0;
    for (std::size_t s = 0; s < grid.size(); ++s) sum += integrate_intensity(ModelSpec{m}, grid.pixel(s));
    CHECK(sum == doctest::Approx(10.0 * 100.0 * (1.0 - std::exp(-3.0))).epsilon(1e-10));
    QuadratureOptions fine{8, 4};
    CHECK(integrate_intensity(ModelSpec{m}, grid.window(), fine) == doctest::Approx(sum).epsilon(1e-10));
  }

  TEST_CASE("log density examples") {
    const Window w = Window::unit_square();
    const ModelSpec hom = PoissonModel{LogLinearIntensity::constant(100.0)};
    const PointPattern p(w, {{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}});
    CHECK(log_density(hom, p) == doctest::Approx(1.0 - 100.0 + 3.0 * std::log(100.0)));
    CHECK(log_density(hom, PointPattern(w)) == doctest::Approx(-99.0));

    // Strauss: one close pair.
    const ModelSpec st = StraussModel{LogLinearIntensity::constant(50.0), 0.5, 0.05};
    const PointPattern q(w, {{0.1, 0.1}, {0.13, 0.1}, {0.8, 0.8}});
    CHECK(log_density(st, q) == doctest::Approx(3.0 * std::log(50.0) + std::log(0.5)));
    // Hard core: any close pair has zero density; none gives the Poisson part.
    const ModelSpec hc = StraussModel{LogLinearIntensity::constant(50.0), 0.0, 0.05};
    CHECK(log_density(hc, q) == -std::numeric_limits<double>::infinity());
    CHECK(log_density(hc, PointPattern(w, {{0.1, 0.1}, {0.8, 0.8}})) == doctest::Approx(2.0 * std::log(50.0)));

    // Geyer: the close pair gives s = 2 (each point has one neighbour).
    const ModelSpec ge = GeyerModel{20.0, 1.5, 0.05, 4.5};
    CHECK(log_density(ge, q) == doctest::Approx(3.0 * std::log(20.0) + 2.0 * std::log(1.5)));
  }

  TEST_CASE("conditional intensity is the density ratio for every family") {
    std::mt19937_64 gen(21);
    const Window w = Window::unit_square();
    const std::vector<ModelSpec> models{
        ModelSpec{inhom_poisson()}, ModelSpec{inhom_strauss()}, ModelSpec{geyer()},
        ModelSpec{GeyerModel{30.0, 0.6, 0.08, 1.5}},
        ModelSpec{StraussModel{LogLinearIntensity({kOne, kY}, {3.0, -1.0}), 0.3, 0.1}}};
    for (const auto& model : models) {
      for (int rep = 0; rep < 25; ++rep) {
        const PointPattern p(w, test::uniform_points(gen, 40 + 5 * rep, w));
        const Point u = test::uniform_points(gen, 1, w)[0];
        const double ratio = log_density(model, p.with_point(u)) - log_density(model, p);
        CHECK(log_papangelou(model, u, p) == doctest::Approx(ratio).epsilon(1e-9));
        // A point of the pattern is evaluated against the rest.
        const double own = log_density(model, p) - log_density(model, p.without_point(0));
        CHECK(log_papangelou(model, p[0], p) == doctest::Approx(own).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("incremental state agrees with the statistic-difference oracle") {
    std::mt19937_64 gen(99);
    const Window w = Window::unit_square();
    for (const ModelSpec& model : {ModelSpec{geyer()}, ModelSpec{inhom_strauss()},
                                   ModelSpec{GeyerModel{5.0, 2.0, 0.1, 2.0}}}) {
      auto pts = test::uniform_points(gen, 150, w);
      GibbsState state(model, w, pts);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (int step = 0; step < 300; ++step) {
        const PointPattern current = state.pattern();
        const Point u{unif(gen), unif(gen)};
        CHECK(state.log_birth_intensity(u) == doctest::Approx(log_papangelou(model, u, current)).epsilon(1e-12));
        CHECK(state.birth_exponent(u) == doctest::Approx(interaction_exponent(model, u, current)));
        if (state.size() > 0) {
          const auto i = static_cast<std::size_t>(unif(gen) * static_cast<double>(state.size()));
          const double expect = log_papangelou(model, current[i], current.without_point(i));
          CHECK(state.log_death_intensity(i) == doctest::Approx(expect).epsilon(1e-12));
        }
        if (unif(gen) < 0.5 || state.size() == 0) {
          state.add(u);
        } else {
          state.remove(static_cast<std::size_t>(unif(gen) * static_cast<double>(state.size())));
        }
      }
    }
  }

  TEST_CASE("gamma = 1 removes the interaction") {
    std::mt19937_64 gen(4);
    const Window w = Window::unit_square();
    const PointPattern p(w, test::uniform_points(gen, 200, w));
    const auto act = inhom_strauss().activity;
    const ModelSpec st = StraussModel{act, 1.0, 0.05};
    const ModelSpec ge = GeyerModel{70.0, 1.0, 0.05, 4.5};
    for (int k = 0; k < 20; ++k) {
      const Point u = test::uniform_points(gen, 1, w)[0];
      CHECK(papangelou(st, u, p) == doctest::Approx(act(u)));
      CHECK(papangelou(ge, u, p) == doctest::Approx(70.0));
    }
  }

  TEST_CASE("hard core forbids close births") {
    const Window w = Window::unit_square();
    const ModelSpec hc = StraussModel{LogLinearIntensity::constant(50.0), 0.0, 0.05};
    const PointPattern p(w, {{0.5, 0.5}});
    CHECK(papangelou(hc, {0.52, 0.5}, p) == 0.0);
    CHECK(papangelou(hc, {0.6, 0.5}, p) == doctest::Approx(50.0));
  }
}

#include <doctest.h>

#include <cmath>

#include "cvps/autodiff.hpp"
#include "cvps/layers.hpp"
#include "cvps/optim.hpp"
#include "cvps/rng.hpp"

using namespace cvps;

TEST_CASE("forward values") {
  Tape tape;
  const Var re = tape.variable(3), im = tape.variable(4);
  CHECK((re * re + im * im).value() == 25.0);
  CHECK(relu(tape.constant(-1)).value() == 0.0);
  CHECK(atan2(im, re).value() == doctest::Approx(0.9272952180016122).epsilon(1e-15));
}

TEST_CASE("backward of |z|^2") {
  Tape tape;
  const Var re = tape.variable(3), im = tape.variable(4);
  const Var l = re * re + im * im;
  tape.backward(l);
  CHECK(tape.grad(re) == 6.0);
  CHECK(tape.grad(im) == 8.0);
}

TEST_CASE("constant loss has zero gradients") {
  Tape tape;
  const Var x = tape.variable(2);
  const Var c = tape.constant(7);
  (void)x;
  tape.backward(c);
  CHECK(tape.grad(x) == 0.0);
}

TEST_CASE("per-primitive partials") {
  const double a0 = 1.3, b0 = -0.7;
  struct Case {
    const char* name;
    Var (*f)(Var, Var);
    double da, db;
  };
  const Case cases[] = {
      {"add", [](Var a, Var b) { return a + b; }, 1, 1},
      {"sub", [](Var a, Var b) { return a - b; }, 1, -1},
      {"mul", [](Var a, Var b) { return a * b; }, b0, a0},
      {"div", [](Var a, Var b) { return a / b; }, 1 / b0, -a0 / (b0 * b0)},
      {"atan2", [](Var a, Var b) { return atan2(a, b); }, b0 / (a0 * a0 + b0 * b0),
       -a0 / (a0 * a0 + b0 * b0)},
      {"exp", [](Var a, Var) { return exp(a); }, std::exp(a0), 0},
      {"log", [](Var a, Var) { return log(a); }, 1 / a0, 0},
      {"sqrt", [](Var a, Var) { return sqrt(a); }, 0.5 / std::sqrt(a0), 0},
      {"neg", [](Var a, Var) { return -a; }, -1, 0},
      {"scale", [](Var a, Var) { return 2.5 * a; }, 2.5, 0},
      {"relu", [](Var a, Var) { return relu(a); }, 1, 0},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    Tape tape;
    const Var a = tape.variable(a0), b = tape.variable(b0);
    tape.backward(c.f(a, b));
    CHECK(tape.grad(a) == doctest::Approx(c.da).epsilon(1e-14));
    CHECK(tape.grad(b) == doctest::Approx(c.db).epsilon(1e-14));
  }
}

TEST_CASE("fused nodes") {
  Tape tape;
  std::vector<Var> a{tape.variable(1), tape.variable(2)};
  std::vector<Var> b{tape.variable(3), tape.variable(4)};
  const double coef[] = {0.5, -1};
  const Var d = tape.dot(a, b, coef);
  CHECK(d.value() == 0.5 * 3 - 8);
  tape.backward(d);
  CHECK(tape.grad(a[0]) == 1.5);
  CHECK(tape.grad(a[1]) == -4);
  CHECK(tape.grad(b[0]) == 0.5);
  CHECK(tape.grad(b[1]) == -2);
}

TEST_CASE("max_select routes gradient to the lowest-index winner") {
  Tape tape;
  std::vector<Var> xs{tape.variable(2), tape.variable(5), tape.variable(5)};
  const Var m = tape.max_select(xs);
  CHECK(m.value() == 5);
  tape.backward(m);
  CHECK(tape.grad(xs[0]) == 0);
  CHECK(tape.grad(xs[1]) == 1);
  CHECK(tape.grad(xs[2]) == 0);
}

TEST_CASE("straight-through keeps the forward value and the soft gradient") {
  Tape tape;
  const Var x = tape.variable(0.3);
  const Var st = tape.straight_through(1.0, x * x);
  CHECK(st.value() == 1.0);
  tape.backward(st);
  CHECK(tape.grad(x) == doctest::Approx(0.6));
}

TEST_CASE("backward twice without reset raises") {
  Tape tape;
  const Var x = tape.variable(2);
  const Var y = x * x;
  tape.backward(y);
  CHECK_THROWS_AS(tape.backward(y), AutodiffError);
  tape.reset_gradients();
  tape.backward(y);
  CHECK(tape.grad(x) == 4);
}

TEST_CASE("non-recording tape keeps values and refuses backward") {
  Tape tape(false);
  const Var x = tape.variable(2);
  const Var y = x * x + 1.0;
  CHECK(y.value() == 5);
  CHECK_THROWS(tape.backward(y));
}

TEST_CASE("cross entropy") {
  Tape tape;
  std::vector<Var> logits{tape.variable(1), tape.variable(0), tape.variable(0)};
  const Var ce = cross_entropy(tape, logits, 0);
  CHECK(ce.value() == doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 2))));
  CHECK(ce.value() == doctest::Approx(0.5514).epsilon(1e-4));
  tape.backward(ce);
  const double p0 = std::exp(1.0) / (std::exp(1.0) + 2);
  CHECK(tape.grad(logits[0]) == doctest::Approx(p0 - 1));
  CHECK(tape.grad(logits[1]) == doctest::Approx((1 - p0) / 2));

  Tape flat;
  std::vector<Var> eq(5, flat.constant(0.25));
  CHECK(cross_entropy(flat, eq, 3).value() == doctest::Approx(std::log(5.0)));
}

TEST_CASE("gradcheck") {
  SUBCASE("sum of squared moduli over 8 params") {
    Rng rng(7);
    std::vector<double> p(8);
    for (auto& v : p) v = rng.normal();
    const auto r = gradcheck(
        [](Tape& t, std::span<const Var> x) {
          std::vector<Var> v(x.begin(), x.end());
          return t.dot(v, v);
        },
        p);
    CHECK(r.pass);
    CHECK(r.max_rel_error < 1e-7);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(r.analytic[i] == doctest::Approx(2 * p[i]));
  }
  SUBCASE("dead relu gives zero on both sides") {
    const std::vector<double> p{-0.5};
    const auto r = gradcheck([](Tape&, std::span<const Var> x) { return relu(x[0]); }, p);
    CHECK(r.pass);
    CHECK(r.analytic[0] == 0);
    CHECK(r.numeric[0] == 0);
  }
  SUBCASE("modReLU magnitude path at 3+4j, b=-2") {
    const std::vector<double> p{3, 4, -2};
    const auto r = gradcheck(
        [](Tape& t, std::span<const Var> x) {
          const CVar y = modrelu(t, CVar{x[0], x[1]}, x[2]);
          return abs2(y) + y.re;
        },
        p);
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("complex helpers") {
  Tape tape;
  const CVar a = cconstant(tape, {1, 2});
  const CVar b = cconstant(tape, {3, -1});
  CHECK(cmul(a, b).value() == std::complex<double>(5, 5));
  CHECK(cadd(a, b).value() == std::complex<double>(4, 1));
  CHECK(abs2(a).value() == 5);
  const std::vector<CVar> w{a, b}, x{b, a};
  const CVar d = cdot(tape, w, x, cconstant(tape, {0, 1}));
  CHECK(d.value() == std::complex<double>(10, 11));
  const CVar dr = cdot(tape, w, x, cconstant(tape, {0, 0}), true);
  CHECK(dr.value() == std::complex<double>(1.0 * 3 + 3.0 * 1, 1.0 * -1 + 3.0 * 2));
}

TEST_CASE("AdamW first step moves each weight by lr against its gradient sign") {
  ParamStore store;
  const auto id = store.add("w", {2}, false, "weight");
  store[id].value = {1.0, -1.0};
  store[id].grad = {0.5, -3.0};
  AdamW opt({0.1, 0.9, 0.999, 1e-12, 0.0});
  opt.step(store);
  CHECK(store[id].value[0] == doctest::Approx(0.9));
  CHECK(store[id].value[1] == doctest::Approx(-0.9));

  ParamStore decay;
  const auto d = decay.add("w", {1}, false, "weight");
  decay[d].value = {2.0};
  decay[d].grad = {0.0};
  AdamW wd({0.1, 0.9, 0.999, 1e-8, 0.5});
  wd.step(decay);
  CHECK(decay[d].value[0] == doctest::Approx(2.0 * (1 - 0.1 * 0.5)));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include "dtse/error.hpp"
#include "dtse/tensor.hpp"

using namespace dtse;
using namespace dtse::ad;

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(rows, cols);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

// fixed random weights turn any tensor-valued op into a scalar
Var weighted_sum(Tape& tape, Var y, std::uint64_t seed) {
    const auto& v = tape.value(y);
    return tape.mean_all(tape.mul(y, tape.constant(random_tensor(v.rows(), v.cols(), seed))));
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("forward values") {
    Tape tape;
    SUBCASE("identity matmul") {
        const Tensor a = random_tensor(3, 4, 1);
        CHECK(tape.value(tape.matmul(tape.constant(Tensor::identity(3)), tape.constant(a))) == a);
    }
    SUBCASE("softmax of equal entries") {
        const auto& s = tape.value(tape.row_softmax(tape.constant(Tensor{{0.0, 0.0}})));
        CHECK(s(0, 0) == 0.5);
        CHECK(s(0, 1) == 0.5);
    }
    SUBCASE("softmax against a long double oracle") {
        const auto& s = tape.value(tape.row_softmax(tape.constant(Tensor{{1.0, 2.0, 3.0}})));
        long double denom = 0.0L;
        for (int k = 1; k <= 3; ++k) denom += std::exp(static_cast<long double>(k));
        for (int k = 1; k <= 3; ++k)
            CHECK(std::abs(s(0, static_cast<std::size_t>(k - 1)) -
                           static_cast<double>(std::exp(static_cast<long double>(k)) / denom)) < 1e-12);
    }
    SUBCASE("softmax rows sum to one and stay in (0,1)") {
        const auto& s = tape.value(tape.row_softmax(tape.constant(random_tensor(6, 9, 3, -40.0, 40.0))));
        for (std::size_t r = 0; r < 6; ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < 9; ++c) {
                CHECK(s(r, c) > 0.0);
                CHECK(s(r, c) < 1.0);
                sum += s(r, c);
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
    SUBCASE("stable softmax with huge logits") {
        const auto& s = tape.value(tape.row_softmax(tape.constant(Tensor{{1000.0, 1000.0}})));
        CHECK(s(0, 0) == 0.5);
    }
    SUBCASE("relu and sigmoid are monotone") {
        Tensor xs(1, 201);
        for (std::size_t i = 0; i < 201; ++i) xs[i] = -10.0 + 0.1 * static_cast<double>(i);
        const auto& r = tape.value(tape.relu(tape.constant(xs)));
        const auto& g = tape.value(tape.sigmoid(tape.constant(xs)));
        for (std::size_t i = 1; i < 201; ++i) {
            CHECK(r[i] >= r[i - 1]);
            CHECK(g[i] > g[i - 1]);
        }
    }
    SUBCASE("concat then complementary slices is the identity") {
        const Tensor a = random_tensor(4, 3, 5), b = random_tensor(4, 2, 6);
        const Var cat = tape.concat_cols({tape.constant(a), tape.constant(b)});
        CHECK(tape.value(tape.slice_cols(cat, 0, 3)) == a);
        CHECK(tape.value(tape.slice_cols(cat, 3, 5)) == b);
    }
    SUBCASE("row broadcast") {
        const Tensor a{{1, 2}, {3, 4}};
        const Tensor row{{10, 20}};
        CHECK(tape.value(tape.add(tape.constant(a), tape.constant(row))) == Tensor{{11, 22}, {13, 24}});
        CHECK(tape.value(tape.mul(tape.constant(a), tape.constant(row))) == Tensor{{10, 40}, {30, 80}});
    }
}

TEST_CASE("forward errors") {
    Tape tape;
    const Var a = tape.constant(random_tensor(2, 3, 1));
    CHECK(code_of([&] { tape.matmul(a, a); }) == ErrorCode::ShapeMismatch);
    CHECK(code_of([&] { tape.add(a, tape.constant(random_tensor(3, 3, 2))); }) == ErrorCode::ShapeMismatch);
    CHECK(code_of([&] { tape.slice_cols(a, 2, 5); }) == ErrorCode::ShapeMismatch);
    CHECK(code_of([&] { tape.scale(tape.constant(Tensor{{1e300}}), 1e300); }) == ErrorCode::NonFiniteValue);
    CHECK(code_of([&] { tape.backward(a); }) == ErrorCode::NotScalarLoss);
}

TEST_CASE("backward") {
    SUBCASE("d/dx mean(x^2) at 3 is 6") {
        ParameterSet ps;
        auto& x = ps.add(Parameter("x", Tensor{{3.0}}));
        Tape tape;
        tape.backward(tape.mean_all(tape.square(tape.parameter(x))));
        CHECK(x.grad[0] == 6.0);
    }
    SUBCASE("a second backward resets instead of accumulating") {
        ParameterSet ps;
        auto& w = ps.add(Parameter("w", random_tensor(3, 2, 8)));
        Tape tape;
        const Var loss = tape.mean_all(tape.square(tape.matmul(tape.constant(random_tensor(4, 3, 9)), tape.parameter(w))));
        tape.backward(loss);
        const Tensor first = w.grad;
        tape.backward(loss);
        CHECK(w.grad == first);
    }
    SUBCASE("a parameter used twice accumulates both paths") {
        ParameterSet ps;
        auto& x = ps.add(Parameter("x", Tensor{{2.0}}));
        Tape tape;
        const Var p = tape.parameter(x);
        tape.backward(tape.mean_all(tape.mul(p, p)));
        CHECK(x.grad[0] == 4.0);
    }
}

TEST_CASE("tape determinism") {
    auto run = [] {
        ParameterSet ps;
        auto& w = ps.add_uniform("w", 5, 4, 17);
        Tape tape;
        const Var y = tape.sigmoid(tape.matmul(tape.constant(random_tensor(3, 5, 2)), tape.parameter(w)));
        const Var loss = weighted_sum(tape, tape.row_softmax(y), 3);
        tape.backward(loss);
        return std::make_pair(tape.value(loss).item(), w.grad);
    };
    const auto a = run(), b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("every op passes a gradient check over 20 random cases") {
    using Builder = std::function<Var(Tape&, Var, std::uint64_t)>;
    struct OpCase {
        const char* name;
        Builder build;
    };
    const std::vector<OpCase> ops{
        {"matmul_left", [](Tape& t, Var x, std::uint64_t s) {
             return t.matmul(x, t.constant(random_tensor(t.value(x).cols(), 3, s)));
         }},
        {"matmul_right", [](Tape& t, Var x, std::uint64_t s) {
             return t.matmul(t.constant(random_tensor(2, t.value(x).rows(), s)), x);
         }},
        {"add", [](Tape& t, Var x, std::uint64_t s) {
             return t.add(x, t.constant(random_tensor(t.value(x).rows(), t.value(x).cols(), s)));
         }},
        {"add_broadcast", [](Tape& t, Var x, std::uint64_t s) {
             return t.add(t.constant(random_tensor(4, t.value(x).cols(), s)), x);
         }},
        {"mul_broadcast", [](Tape& t, Var x, std::uint64_t s) {
             return t.mul(t.constant(random_tensor(4, t.value(x).cols(), s)), x);
         }},
        {"sub", [](Tape& t, Var x, std::uint64_t s) {
             return t.sub(t.constant(random_tensor(t.value(x).rows(), t.value(x).cols(), s)), x);
         }},
        {"mul", [](Tape& t, Var x, std::uint64_t) { return t.mul(x, x); }},
        {"scale", [](Tape& t, Var x, std::uint64_t) { return t.scale(x, -2.5); }},
        {"transpose", [](Tape& t, Var x, std::uint64_t) { return t.transpose(x); }},
        {"row_softmax", [](Tape& t, Var x, std::uint64_t) { return t.row_softmax(x); }},
        {"sigmoid", [](Tape& t, Var x, std::uint64_t) { return t.sigmoid(x); }},
        {"relu", [](Tape& t, Var x, std::uint64_t) { return t.relu(x); }},
        {"concat_cols", [](Tape& t, Var x, std::uint64_t) { return t.concat_cols({x, t.scale(x, 3.0)}); }},
        {"slice_cols", [](Tape& t, Var x, std::uint64_t) {
             const auto c = t.value(x).cols();
             return t.slice_cols(x, c / 2, c);
         }},
        {"square", [](Tape& t, Var x, std::uint64_t) { return t.square(x); }},
    };
    for (const auto& op : ops) {
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            std::mt19937_64 rng(s);
            const std::size_t rows = 1 + rng() % 4, cols = 2 + rng() % 4;
            Tensor x = random_tensor(rows, cols, 100 + s);
            if (std::string(op.name) == "relu")
                for (auto& v : x.values())
                    if (std::abs(v) < 0.05) v += 0.1;  // keep clear of the kink
            if (std::string(op.name).ends_with("broadcast")) x = random_tensor(1, cols, 100 + s);
            const double err = grad_check(
                [&](Tape& t, Var v) { return weighted_sum(t, op.build(t, v, 200 + s), 300 + s); }, x);
            worst = std::max(worst, err);
        }
        INFO(op.name);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("grad_check reference cases") {
    const Tensor x = random_tensor(3, 4, 11);
    CHECK(grad_check([](Tape& t, Var v) { return t.mean_all(t.sigmoid(v)); }, x) < 1e-6);
    // attention-like path: softmax of scores, weighted sum of values
    const Tensor values = random_tensor(4, 3, 12);
    CHECK(grad_check(
              [&](Tape& t, Var v) {
                  return weighted_sum(t, t.matmul(t.row_softmax(t.scale(v, 0.5)), t.constant(values)), 13);
              },
              x) < 1e-4);
    CHECK(grad_check([](Tape& t, Var v) { return t.mean_all(t.scale(v, 3.0)); }, x) < 1e-10);
}

TEST_CASE("sgd_step") {
    SUBCASE("arithmetic") {
        ParameterSet ps;
        auto& p = ps.add(Parameter("p", Tensor{{1.0}}));
        p.grad = Tensor{{2.0}};
        p.has_grad = true;
        sgd_step(ps, 0.5);
        CHECK(p.value[0] == 0.0);
        CHECK(p.grad[0] == 0.0);
    }
    SUBCASE("lr zero changes nothing") {
        ParameterSet ps;
        auto& p = ps.add(Parameter("p", random_tensor(2, 2, 4)));
        const Tensor before = p.value;
        p.grad = random_tensor(2, 2, 5);
        p.has_grad = true;
        sgd_step(ps, 0.0);
        CHECK(p.value == before);
    }
    SUBCASE("geometric decay on x^2") {
        ParameterSet ps;
        auto& x = ps.add(Parameter("x", Tensor{{1.0}}));
        auto step = [&] {
            Tape tape;
            tape.backward(tape.mean_all(tape.square(tape.parameter(x))));
            sgd_step(ps, 0.1);
        };
        step();
        CHECK(x.value[0] == doctest::Approx(0.8).epsilon(1e-15));
        for (int i = 1; i < 100; ++i) step();
        CHECK(std::abs(x.value[0]) < 1e-9);
        CHECK(std::abs(x.value[0] - std::pow(0.8, 100)) < 1e-20);
    }
    SUBCASE("missing gradient") {
        ParameterSet ps;
        ps.add(Parameter("p", Tensor{{1.0}}));
        CHECK(code_of([&] { sgd_step(ps, 0.1); }) == ErrorCode::MissingGradient);
    }
}

TEST_CASE("optional optimizers descend on a quadratic") {
    for (auto kind : {OptimizerKind::Momentum, OptimizerKind::Adam}) {
        ParameterSet ps;
        auto& x = ps.add(Parameter("x", Tensor{{1.0, -2.0}}));
        Optimizer opt(OptimizerConfig{kind, 0.05});
        for (int i = 0; i < 500; ++i) {
            Tape tape;
            tape.backward(tape.mean_all(tape.square(tape.parameter(x))));
            opt.step(ps);
        }
        CHECK(std::abs(x.value[0]) < 1e-2);
        CHECK(std::abs(x.value[1]) < 1e-2);
    }
    CHECK(optimizer_from_name("adam") == OptimizerKind::Adam);
    CHECK(code_of([] { optimizer_from_name("rmsprop"); }) == ErrorCode::ConfigError);
}

TEST_CASE("checkpoint round trip is lossless") {
    ParameterSet ps;
    ps.add_uniform("w", 7, 5, 99);
    auto& odd = ps.add(Parameter("odd", Tensor{{0.1, 1.0 / 3.0, -5e-324, 1.7976931348623157e308, -0.0}}));
    (void)odd;
    std::stringstream buf;
    save_checkpoint(buf, ps, R"({"k":1})");
    const auto back = load_checkpoint(buf);
    CHECK(back.meta == R"({"k":1})");
    REQUIRE(back.params.size() == 2);
    for (const auto& p : ps) {
        const auto& q = back.params[p.name];
        REQUIRE(q.value.same_shape(p.value));
        for (std::size_t i = 0; i < p.value.size(); ++i)
            CHECK(std::bit_cast<std::uint64_t>(q.value[i]) == std::bit_cast<std::uint64_t>(p.value[i]));
    }
    std::stringstream bad("not-a-checkpoint 1\n");
    CHECK_THROWS_AS(load_checkpoint(bad), Error);
}

TEST_CASE("uniform initialization bounds") {
    ParameterSet ps;
    const auto& w = ps.add_uniform("w", 16, 8, 3);
    const double bound = std::sqrt(1.0 / 16.0);
    for (double v : w.value.values()) CHECK(std::abs(v) <= bound);
    CHECK(w.init.distribution == "uniform");
    CHECK(ps.add_zeros("b", 1, 8).value == Tensor(1, 8, 0.0));
}

#include <doctest.h>

#include <cmath>

#include "mmcse/ops.hpp"
#include "mmcse/tensor.hpp"

using namespace mmcse;

TEST_CASE("shape bookkeeping and invariants") {
    Tensor t = Tensor::zeros({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.rank() == 3);
    CHECK(shape_numel(t.shape()) == 24);
    CHECK_THROWS_AS(Tensor::zeros({2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor::from_vector({2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(Tensor::from_vector({2}, {1.0, NAN}), ValueError);
    CHECK_THROWS_AS(Tensor::from_vector({1}, {INFINITY}), ValueError);
}

TEST_CASE("grad buffer matches data shape") {
    Tensor t = Tensor::zeros({3, 2}, true);
    CHECK(t.has_grad());
    CHECK(t.grad().size() == 6);
    Tensor u = Tensor::zeros({3, 2});
    CHECK_FALSE(u.has_grad());
}

TEST_CASE("reshape, transpose, concat, split") {
    Tensor x = Tensor::from_vector({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor r = ops::reshape(x, {3, 2});
    CHECK(r.at({0, 1}) == 2.0);
    CHECK(r.at({2, 1}) == 6.0);
    CHECK_THROWS_AS(ops::reshape(x, {4, 2}), ShapeError);

    Tensor tr = ops::transpose_last2(x);
    CHECK(tr.shape() == Shape{3, 2});
    CHECK(tr.at({0, 1}) == 4.0);
    CHECK(tr.at({2, 0}) == 3.0);

    Tensor y = Tensor::from_vector({2, 2}, {7, 8, 9, 10});
    Tensor c = ops::concat_last({x, y});
    CHECK(c.shape() == Shape{2, 5});
    CHECK(c.at({0, 3}) == 7.0);
    CHECK(c.at({1, 4}) == 10.0);

    auto parts = ops::split_last(c, {3, 2});
    CHECK(parts[0].values() == x.values());
    CHECK(parts[1].values() == y.values());
    CHECK_THROWS_AS(ops::split_last(c, {3, 3}), ShapeError);
}

TEST_CASE("broadcast and reductions") {
    Tensor x = Tensor::from_vector({2}, {1.0, 2.0});
    Tensor b = ops::broadcast_axis(x, 1, 3);  // [2,3]
    CHECK(b.shape() == Shape{2, 3});
    CHECK(b.at({0, 2}) == 1.0);
    CHECK(b.at({1, 0}) == 2.0);

    Tensor m = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
    CHECK(ops::sum_axis(m, 0).values() == std::vector<double>{4, 6});
    CHECK(ops::sum_axis(m, 1).values() == std::vector<double>{3, 7});
    CHECK(ops::mean_axis(m, 0).values() == std::vector<double>{2, 3});
    CHECK(ops::sum_all(m).item() == 10.0);
    CHECK(ops::mean_all(m).item() == 2.5);
}

TEST_CASE("mean_all stays exact on integer-valued grids") {
    // 6 ones averaged over 6 entries; exact because the kernel divides.
    Tensor ones = Tensor::full({2, 3}, 1.0);
    CHECK(ops::mean_all(ones).item() == 1.0);
}

TEST_CASE("matmul and bmm against hand arithmetic") {
    Tensor a = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_vector({2, 1}, {5, 6});
    Tensor c = ops::matmul(a, b);
    CHECK(c.shape() == Shape{2, 1});
    CHECK(c.at({0, 0}) == 17.0);
    CHECK(c.at({1, 0}) == 39.0);

    // identity right factor
    Tensor eye = Tensor::from_vector({2, 2}, {1, 0, 0, 1});
    CHECK(ops::matmul(a, eye).values() == a.values());

    // zero left factor
    Tensor z = Tensor::zeros({2, 2});
    CHECK(ops::matmul(z, a).values() == std::vector<double>{0, 0, 0, 0});

    Tensor ab = ops::bmm(ops::reshape(a, {1, 2, 2}), ops::reshape(b, {1, 2, 1}));
    CHECK(ab.shape() == Shape{1, 2, 1});
    CHECK(ab.at({0, 0, 0}) == 17.0);
    CHECK(ab.at({0, 1, 0}) == 39.0);

    CHECK_THROWS_WITH_AS(ops::bmm(Tensor::zeros({2, 2, 3}), Tensor::zeros({2, 2, 3})),
                         doctest::Contains("[2,2,3]"), ShapeError);
}

TEST_CASE("softmax_last examples") {
    CHECK(ops::softmax_last(Tensor::from_vector({2}, {0, 0})).values() ==
          std::vector<double>{0.5, 0.5});

    Tensor s = ops::softmax_last(Tensor::from_vector({3}, {1, 2, 3}));
    // scalar exponentials computed independently
    const double e1 = std::exp(1.0), e2 = std::exp(2.0), e3 = std::exp(3.0);
    const double denom = e1 + e2 + e3;
    CHECK(s.at({0}) == doctest::Approx(e1 / denom).epsilon(1e-12));
    CHECK(s.at({1}) == doctest::Approx(e2 / denom).epsilon(1e-12));
    CHECK(s.at({2}) == doctest::Approx(e3 / denom).epsilon(1e-12));
    CHECK(s.at({0}) == doctest::Approx(0.09003057).epsilon(1e-7));
    CHECK(s.at({1}) == doctest::Approx(0.24472847).epsilon(1e-7));
    CHECK(s.at({2}) == doctest::Approx(0.66524096).epsilon(1e-7));

    for (double v : {-1e6, 0.0, 42.0, 1e6})
        CHECK(ops::softmax_last(Tensor::from_vector({1, 1}, {v})).item() == 1.0);

    Tensor bad = Tensor::zeros({2});
    bad.mutable_data()[1] = NAN;
    CHECK_THROWS_AS(ops::softmax_last(bad), ValueError);
}

TEST_CASE("softmax rows sum to one and stay in [0,1]") {
    Rng rng(21);
    Tensor x = Tensor::uniform({7, 5, 9}, -30.0, 30.0, rng);
    Tensor s = ops::softmax_last(x);
    for (index_t r = 0; r < 35; ++r) {
        double sum = 0.0;
        for (index_t c = 0; c < 9; ++c) {
            const double v = s.values()[static_cast<std::size_t>(r * 9 + c)];
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("l2 normalize examples") {
    CHECK(ops::l2_normalize_last(Tensor::from_vector({2}, {3, 4})).values() ==
          std::vector<double>{0.6, 0.8});
    CHECK(ops::l2_normalize_last(Tensor::from_vector({2}, {0, 0})).values() ==
          std::vector<double>{0, 0});
    CHECK(ops::l2_normalize_last(Tensor::from_vector({4}, {1, 1, 1, 1})).values() ==
          std::vector<double>{0.5, 0.5, 0.5, 0.5});
    CHECK_THROWS_AS(ops::l2_normalize_last(Tensor::from_vector({1}, {1.0}), 0.0),
                    ValueError);

    Rng rng(5);
    Tensor x = Tensor::uniform({20, 6}, -2.0, 2.0, rng);
    Tensor n = ops::l2_normalize_last(x);
    for (index_t r = 0; r < 20; ++r) {
        double sq = 0.0;
        for (index_t c = 0; c < 6; ++c) {
            const double v = n.values()[static_cast<std::size_t>(r * 6 + c)];
            sq += v * v;
        }
        CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("graph replay is bit-identical") {
    Rng rng(11);
    Tensor a = Tensor::uniform({4, 3}, -1.0, 1.0, rng, true);
    Tensor w = Tensor::uniform({3, 5}, -1.0, 1.0, rng, true);
    Tensor y = ops::softmax_last(ops::relu(ops::matmul(a, w)));
    Tensor loss = ops::mean_all(ops::mul(y, y));

    Graph g(loss);
    CHECK(g.num_applications() > 0);
    const std::vector<double> replayed = g.replay();
    REQUIRE(replayed.size() == 1);
    CHECK(replayed[0] == loss.item());  // bitwise

    Graph gy(y);
    CHECK(gy.replay() == y.values());  // bitwise, whole tensor
}

TEST_CASE("first_nonfinite_op names the first bad node") {
    Tensor x = Tensor::from_vector({1}, {-1.0}, true);
    Tensor bad = ops::log(x);  // log(-1) = nan
    Tensor out = ops::scale(bad, 2.0);
    auto name = first_nonfinite_op(out);
    REQUIRE(name.has_value());
    CHECK(*name == "log");
}

TEST_CASE("backward demands a scalar") {
    Tensor x = Tensor::zeros({2, 2}, true);
    CHECK_THROWS_AS(backward(ops::relu(x)), ShapeError);
}

TEST_CASE("no-grad mode records nothing") {
    Tensor x = Tensor::zeros({2}, true);
    NoGradGuard ng;
    Tensor y = ops::relu(x);
    CHECK_FALSE(y.node());
    CHECK_FALSE(y.requires_grad());
}

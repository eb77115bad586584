#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "absnet/kernels.hpp"
#include "support.hpp"

using namespace absnet;
using testing::max_abs_diff;
using testing::random_vector;

namespace {

struct ConvCase {
    int in, out, side, stride;
};

const std::vector<ConvCase> kConvCases{
    {1, 1, 1, 1}, {3, 4, 5, 1}, {3, 4, 5, 2}, {2, 3, 8, 2}, {4, 2, 7, 1}, {8, 16, 13, 2}, {16, 8, 12, 1},
};

}  // namespace

TEST_CASE("gemv, gemv_t and ger agree with the serial reference") {
    Rng rng(11);
    for (auto [rows, cols] : std::vector<std::pair<int, int>>{{1, 1}, {3, 7}, {17, 5}, {64, 130}, {129, 33}}) {
        const auto w = random_vector<double>(rng, std::size_t(rows) * cols);
        const auto x = random_vector<double>(rng, std::size_t(cols));
        const auto g = random_vector<double>(rng, std::size_t(rows));

        std::vector<double> y_ref(static_cast<std::size_t>(rows)), y_fast(y_ref.size());
        kernels::ref::gemv<double>(w, rows, cols, x, y_ref);
        kernels::fast::gemv<double>(w, rows, cols, x, y_fast);
        CHECK(max_abs_diff(y_ref, y_fast) < 1e-12);

        // gemv_t and ger accumulate
        std::vector<double> dx_ref(static_cast<std::size_t>(cols), 0.5), dx_fast = dx_ref;
        kernels::ref::gemv_t<double>(w, rows, cols, g, dx_ref);
        kernels::fast::gemv_t<double>(w, rows, cols, g, dx_fast);
        CHECK(max_abs_diff(dx_ref, dx_fast) < 1e-12);

        std::vector<double> dw_ref(w.size(), -0.25), dw_fast(w.size(), -0.25);
        kernels::ref::ger<double>(g, rows, x, cols, dw_ref);
        kernels::fast::ger<double>(g, rows, x, cols, dw_fast);
        CHECK(max_abs_diff(dw_ref, dw_fast) < 1e-12);
    }
}

TEST_CASE("conv3x3 forward and backward agree with the serial reference") {
    Rng rng(5);
    for (const auto& c : kConvCases) {
        CAPTURE(c.in);
        CAPTURE(c.out);
        CAPTURE(c.side);
        CAPTURE(c.stride);
        kernels::ConvShape s{c.in, c.out, c.side, c.side, c.stride};
        const std::size_t nin = std::size_t(c.in) * c.side * c.side;
        const std::size_t nout = std::size_t(c.out) * s.out_height() * s.out_width();
        const auto in = random_vector<double>(rng, nin);
        const auto w = random_vector<double>(rng, s.weight_size());
        const auto b = random_vector<double>(rng, std::size_t(c.out));
        const auto dout = random_vector<double>(rng, nout);

        std::vector<double> out_ref(nout), out_fast(nout);
        kernels::ref::conv3x3_forward<double>(s, in, w, b, out_ref);
        kernels::fast::conv3x3_forward<double>(s, in, w, b, out_fast);
        CHECK(max_abs_diff(out_ref, out_fast) < 1e-12);

        std::vector<double> din_ref(nin, 0.1), din_fast(nin, 0.1);
        std::vector<double> dw_ref(w.size(), 0.2), dw_fast(w.size(), 0.2);
        std::vector<double> db_ref(b.size(), 0.3), db_fast(b.size(), 0.3);
        kernels::ref::conv3x3_backward<double>(s, in, w, dout, din_ref, dw_ref, db_ref);
        kernels::fast::conv3x3_backward<double>(s, in, w, dout, din_fast, dw_fast, db_fast);
        CHECK(max_abs_diff(din_ref, din_fast) < 1e-12);
        CHECK(max_abs_diff(dw_ref, dw_fast) < 1e-12);
        CHECK(max_abs_diff(db_ref, db_fast) < 1e-12);

        // an empty input-gradient span skips that output
        std::vector<double> dw2(w.size(), 0.2), db2(b.size(), 0.3);
        kernels::fast::conv3x3_backward<double>(s, in, w, dout, std::span<double>(), dw2, db2);
        CHECK(max_abs_diff(dw_ref, dw2) < 1e-12);
    }
}

TEST_CASE("conv3x3 matches a hand-computed 3x3 example") {
    // 1 channel 3x3 input, all-ones kernel, padding 1: each output is the
    // sum of its in-bounds 3x3 neighbourhood.
    const std::vector<double> in{1, 2, 3, 4, 5, 6, 7, 8, 9};
    const std::vector<double> w(9, 1.0), b{0.5};
    kernels::ConvShape s{1, 1, 3, 3, 1};
    std::vector<double> out(9);
    kernels::fast::conv3x3_forward<double>(s, in, w, b, out);
    const std::vector<double> want{12.5, 21.5, 16.5, 27.5, 45.5, 33.5, 24.5, 39.5, 28.5};
    CHECK(max_abs_diff(out, want) == 0.0);

    kernels::ConvShape s2{1, 1, 3, 3, 2};
    std::vector<double> out2(4);
    kernels::fast::conv3x3_forward<double>(s2, in, w, b, out2);
    CHECK(max_abs_diff(out2, std::vector<double>{12.5, 16.5, 24.5, 28.5}) == 0.0);
}

TEST_CASE("fast kernels give bit-identical results for any thread count") {
    Rng rng(9);
    kernels::ConvShape s{8, 16, 20, 20, 1};
    const auto in = random_vector<float>(rng, std::size_t(8) * 400);
    const auto w = random_vector<float>(rng, s.weight_size());
    const auto b = random_vector<float>(rng, 16);
    const auto dout = random_vector<float>(rng, std::size_t(16) * 400);
    auto run = [&](int threads) {
        kernels::set_threads(threads);
        std::vector<float> out(std::size_t(16) * 400), din(in.size()), dw(w.size()), db(16);
        kernels::fast::conv3x3_forward<float>(s, in, w, b, out);
        kernels::fast::conv3x3_backward<float>(s, in, w, dout, din, dw, db);
        out.insert(out.end(), din.begin(), din.end());
        out.insert(out.end(), dw.begin(), dw.end());
        return out;
    };
    const auto one = run(1);
    const auto four = run(4);
    CHECK(one == four);
    kernels::set_threads(0);
}

TEST_CASE("nearest upsampling copies source pixels; its backward sums them") {
    Rng rng(3);
    for (auto [in_side, out_side] : std::vector<std::pair<int, int>>{{2, 5}, {6, 15}, {3, 3}, {4, 8}}) {
        const auto in = random_vector<double>(rng, std::size_t(2) * in_side * in_side);
        std::vector<double> out_ref(std::size_t(2) * out_side * out_side), out_fast(out_ref.size());
        kernels::ref::upsample_nearest<double>(2, in_side, in_side, out_side, out_side, in, out_ref);
        kernels::fast::upsample_nearest<double>(2, in_side, in_side, out_side, out_side, in, out_fast);
        CHECK(out_ref == out_fast);

        const auto dout = random_vector<double>(rng, out_ref.size());
        std::vector<double> din_ref(in.size(), 0.0), din_fast(in.size(), 0.0);
        kernels::ref::upsample_nearest_backward<double>(2, in_side, in_side, out_side, out_side, dout, din_ref);
        kernels::fast::upsample_nearest_backward<double>(2, in_side, in_side, out_side, out_side, dout, din_fast);
        CHECK(max_abs_diff(din_ref, din_fast) < 1e-12);

        // adjoint identity <up(x), y> == <x, up^T(y)>
        double lhs = 0, rhs = 0;
        for (std::size_t i = 0; i < out_ref.size(); ++i) lhs += out_ref[i] * dout[i];
        for (std::size_t i = 0; i < in.size(); ++i) rhs += in[i] * din_ref[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("upsampled sizes round half up") {
    CHECK(kernels::upsampled_size(6, 2.5) == 15);
    CHECK(kernels::upsampled_size(30, 2.5) == 75);
    CHECK(kernels::upsampled_size(75, 2.0) == 150);
    CHECK(kernels::upsampled_size(3, 2.5) == 8);
}

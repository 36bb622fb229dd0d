#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ekdaa/rng.hpp"
#include "ekdaa/tensor.hpp"

using namespace ekdaa;

namespace {

// Naive same-padding cross-correlation over an explicitly padded buffer.
// Independent of the production loops on purpose.
Grid<double> naive_conv(const Grid<double>& in, const Grid<double>& k) {
    const int ph = (k.rows - 1) / 2, pw = (k.cols - 1) / 2;
    Grid<double> pad(in.rows + 2 * ph, in.cols + 2 * pw);
    for (int i = 0; i < in.rows; ++i)
        for (int j = 0; j < in.cols; ++j) pad.at(i + ph, j + pw) = in.at(i, j);
    Grid<double> out(in.rows, in.cols);
    for (int y = 0; y < in.rows; ++y)
        for (int x = 0; x < in.cols; ++x) {
            double s = 0;
            for (int i = 0; i < k.rows; ++i)
                for (int j = 0; j < k.cols; ++j) s += pad.at(y + i, x + j) * k.at(i, j);
            out.at(y, x) = s;
        }
    return out;
}

Grid<double> random_grid(int r, int c, Rng& rng) {
    Grid<double> g(r, c);
    for (auto& v : g.v) v = rng.next_uniform(-1, 1);
    return g;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("conv2d_same delta kernel is the identity") {
    Rng rng(11);
    Grid<double> in = random_grid(6, 6, rng);
    Grid<double> k(3, 3);
    k.at(1, 1) = 1.0;
    Grid<double> out = conv2d_same(in, k, Grid<double>(6, 6));
    for (std::size_t i = 0; i < in.size(); ++i) CHECK(out.v[i] == doctest::Approx(in.v[i]).epsilon(1e-14));
}

TEST_CASE("conv2d_same scalar 1x1 kernel multiplies") {
    Rng rng(12);
    Grid<double> in = random_grid(5, 7, rng);
    Grid<double> k(1, 1);
    k.at(0, 0) = -2.5;
    Grid<double> out = conv2d_same(in, k, Grid<double>(5, 7));
    for (std::size_t i = 0; i < in.size(); ++i) CHECK(out.v[i] == doctest::Approx(-2.5 * in.v[i]));
}

TEST_CASE("conv2d_same matches the padded-buffer oracle") {
    Rng rng(13);
    for (int t = 0; t < 50; ++t) {
        const int h = 3 + static_cast<int>(rng.next_index(8));
        const int w = 3 + static_cast<int>(rng.next_index(8));
        const int k = rng.next_index(2) ? 3 : 5;
        Grid<double> in = random_grid(h, w, rng);
        Grid<double> kern = random_grid(k, k, rng);
        Grid<double> got = conv2d_same(in, kern, Grid<double>(h, w));
        Grid<double> want = naive_conv(in, kern);
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got.v[i] - want.v[i]) < 1e-12);
    }
}

TEST_CASE("conv2d_same accumulates into accum") {
    Rng rng(14);
    Grid<double> in = random_grid(4, 4, rng);
    Grid<double> k = random_grid(3, 3, rng);
    Grid<double> base = random_grid(4, 4, rng);
    Grid<double> out = conv2d_same(in, k, base);
    Grid<double> plain = conv2d_same(in, k, Grid<double>(4, 4));
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.v[i] == doctest::Approx(base.v[i] + plain.v[i]));
}

TEST_CASE("conv2d_same rejects even kernels and bad accum shapes") {
    Grid<double> in(4, 4), k2(2, 2), acc(4, 4), acc_bad(3, 4);
    CHECK_THROWS_AS(conv2d_same(in, k2, acc), DimensionError);
    Grid<double> k3(3, 3);
    CHECK_THROWS_AS(conv2d_same(in, k3, acc_bad), DimensionError);
}

TEST_CASE("flip is the 180-degree index map and an involution") {
    Grid<double> k(2, 3, {1, 2, 3, 4, 5, 6});
    Grid<double> f = flip(k);
    CHECK(f.v == std::vector<double>{6, 5, 4, 3, 2, 1});
    for (int i = 0; i < k.rows; ++i)
        for (int j = 0; j < k.cols; ++j)
            CHECK(f.at(i, j) == k.at(k.rows - 1 - i, k.cols - 1 - j));
    Grid<double> ff = flip(f);
    CHECK(ff.v == k.v);
}

TEST_CASE("deconv2d_same equals conv with the flipped kernel") {
    Rng rng(15);
    for (int t = 0; t < 20; ++t) {
        Grid<double> k = random_grid(3, 3, rng);
        Grid<double> e = random_grid(6, 6, rng);
        Grid<double> got = deconv2d_same(k, e);
        Grid<double> want = naive_conv(e, flip(k));
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got.v[i] - want.v[i]) < 1e-12);
    }
}

TEST_CASE("conv/deconv adjointness: <conv(a,K), b> == <a, deconv(K,b)>") {
    Rng rng(16);
    for (int t = 0; t < 100; ++t) {
        const int h = 4 + static_cast<int>(rng.next_index(6));
        const int w = 4 + static_cast<int>(rng.next_index(6));
        const int k = rng.next_index(2) ? 3 : 5;
        Grid<double> a = random_grid(h, w, rng);
        Grid<double> kern = random_grid(k, k, rng);
        Grid<double> b = random_grid(h, w, rng);
        const double lhs = dot(conv2d_same(a, kern, Grid<double>(h, w)).v, b.v);
        const double rhs = dot(a.v, deconv2d_same(kern, b).v);
        CHECK(std::abs(lhs - rhs) < 1e-10);
    }
}

TEST_CASE("weight_grad_conv of a zero error map is zero") {
    Rng rng(17);
    Grid<double> in = random_grid(6, 6, rng);
    Grid<double> e(6, 6);
    Grid<double> g = weight_grad_conv(in, e, 3, 3);
    for (double v : g.v) CHECK(v == 0.0);
}

TEST_CASE("weight_grad_conv with 1x1 kernel reduces to a dot product") {
    Rng rng(18);
    Grid<double> in = random_grid(4, 5, rng);
    Grid<double> e = random_grid(4, 5, rng);
    Grid<double> g = weight_grad_conv(in, e, 1, 1);
    CHECK(g.v[0] == doctest::Approx(dot(in.v, e.v)));
}

TEST_CASE("weight_grad_conv matches central differences of the conv inner product") {
    // d/dK <conv(in, K), e> at entry (p,q) is exactly weight_grad_conv(in, e)[p,q].
    Rng rng(19);
    Grid<double> in = random_grid(6, 6, rng);
    Grid<double> e = random_grid(6, 6, rng);
    Grid<double> k = random_grid(3, 3, rng);
    Grid<double> g = weight_grad_conv(in, e, 3, 3);
    const double eps = 1e-6;
    for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) {
            Grid<double> kp = k, km = k;
            kp.at(p, q) += eps;
            km.at(p, q) -= eps;
            const double lp = dot(conv2d_same(in, kp, Grid<double>(6, 6)).v, e.v);
            const double lm = dot(conv2d_same(in, km, Grid<double>(6, 6)).v, e.v);
            CHECK(std::abs((lp - lm) / (2 * eps) - g.at(p, q)) < 1e-7);
        }
}

TEST_CASE("weight_grad_conv rejects mismatched maps") {
    Grid<double> in(4, 4), e(6, 6);
    CHECK_THROWS_AS(weight_grad_conv(in, e, 3, 3), DimensionError);
}

TEST_CASE("maxpool2 takes window maxima; ties go to the first index") {
    Grid<double> in(2, 4, {1, 3, 5, 5, 2, 0, 5, 5});
    auto [out, prov] = maxpool2(in);
    CHECK(out.rows == 1);
    CHECK(out.cols == 2);
    CHECK(out.at(0, 0) == 3.0);
    CHECK(out.at(0, 1) == 5.0);
    CHECK(prov[0] == 1);  // row 0, col 1
    CHECK(prov[1] == 0);  // tie: first in row-major window order wins
}

TEST_CASE("maxpool2 matches a naive window scan") {
    Rng rng(20);
    Grid<double> in = random_grid(8, 10, rng);
    auto [out, prov] = maxpool2(in);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) {
            double best = in.at(2 * y, 2 * x);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) best = std::max(best, in.at(2 * y + i, 2 * x + j));
            CHECK(out.at(y, x) == best);
            const int a = prov[static_cast<std::size_t>(y) * 5 + x];
            CHECK(in.at(2 * y + a / 2, 2 * x + a % 2) == best);
        }
}

TEST_CASE("maxpool2 rejects odd dimensions") {
    Grid<double> in(3, 4);
    CHECK_THROWS_AS(maxpool2(in), DimensionError);
}

TEST_CASE("upsample2 replicates each cell into a 2x2 block") {
    Grid<double> in(1, 1, {7});
    Grid<double> out = upsample2(in);
    CHECK(out.v == std::vector<double>{7, 7, 7, 7});

    Grid<double> in2(2, 2, {1, 2, 3, 4});
    Grid<double> out2 = upsample2(in2);
    CHECK(out2.v == std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4});
}

TEST_CASE("upsample2 then maxpool2 is the identity") {
    Rng rng(21);
    Grid<double> in = random_grid(3, 4, rng);
    auto [back, prov] = maxpool2(upsample2(in));
    CHECK(back.v == in.v);
}

TEST_CASE("flatten is the channel-major linearization; unflatten inverts it") {
    FeatureStack<double> s(2, 2, 2);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) s.at(c, y, x) = 100 * c + 10 * y + x;
    Vector<double> v = flatten(s);
    CHECK(v == std::vector<double>{0, 1, 10, 11, 100, 101, 110, 111});
    FeatureStack<double> back = unflatten(v, 2, 2, 2);
    CHECK(back.data == s.data);
    CHECK_THROWS_AS(unflatten(v, 3, 2, 2), DimensionError);
}

TEST_CASE("matvec, matmul, outer, transpose on small examples") {
    Matrix<double> a(2, 3);
    a.v = {1, 2, 3, 4, 5, 6};
    Vector<double> x = {1, 0, -1};
    Vector<double> y = matvec(a, x);
    CHECK(y == std::vector<double>{-2, -2});
    CHECK_THROWS_AS(matvec(a, Vector<double>{1, 2}), DimensionError);

    Matrix<double> at = transpose(a);
    CHECK(at.rows == 3);
    CHECK(at.v == std::vector<double>{1, 4, 2, 5, 3, 6});

    Vector<double> u = {2, 3};
    Vector<double> vt = matvec_transposed(a, u);
    Vector<double> vt_ref = matvec(at, u);
    CHECK(vt == vt_ref);

    Matrix<double> b(3, 2);
    b.v = {1, 0, 0, 1, 1, 1};
    Matrix<double> c = matmul(a, b);
    CHECK(c.rows == 2);
    CHECK(c.cols == 2);
    CHECK(c.v == std::vector<double>{4, 5, 10, 11});
    CHECK_THROWS_AS(matmul(a, a), DimensionError);

    Matrix<double> o = outer(Vector<double>{1, 2}, Vector<double>{3, 4, 5});
    CHECK(o.v == std::vector<double>{3, 4, 5, 6, 8, 10});
}

TEST_CASE("Tensor4 rejects even kernel dims; Grid checks data length") {
    CHECK_THROWS_AS(Tensor4<float>(2, 2, 2, 2), DimensionError);
    CHECK_THROWS_AS(Grid<float>(2, 2, {1.0f}), DimensionError);
}

TEST_CASE("assert_finite names the offending tensor") {
    std::vector<float> v = {1.0f, std::nanf("")};
    CHECK_THROWS_WITH_AS(assert_finite(v, "probe"), "non-finite value in probe", NumericError);
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ekdaa/errors.hpp"

namespace ekdaa {

namespace detail {
inline std::string shape2(int h, int w) {
    return std::to_string(h) + "x" + std::to_string(w);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Carriers
// ---------------------------------------------------------------------------

// Owning 2-D map, row-major. Used for single feature maps and kernels.
template <typename T>
struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    Grid() = default;
    Grid(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, T(0)) {}
    Grid(int r, int c, std::vector<T> data) : rows(r), cols(c), v(std::move(data)) {
        if (v.size() != static_cast<std::size_t>(r) * c)
            throw DimensionError("Grid: data length " + std::to_string(v.size()) +
                                 " does not match shape " + detail::shape2(r, c));
    }

    T& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
    const T& at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Grid& o) const { return rows == o.rows && cols == o.cols; }
};

// Per-sample activation stack, channel-major (C,H,W).
template <typename T>
struct FeatureStack {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<T> data;

    FeatureStack() = default;
    FeatureStack(int c, int h, int w)
        : channels(c), height(h), width(w),
          data(static_cast<std::size_t>(c) * h * w, T(0)) {}

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    T* channel(int c) { return data.data() + static_cast<std::size_t>(c) * plane(); }
    const T* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * plane(); }

    T& at(int c, int y, int x) { return data[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(y) * width + x]; }
    const T& at(int c, int y, int x) const { return data[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(y) * width + x]; }

    bool same_shape(const FeatureStack& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
    std::string shape_str() const {
        return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
    }
};

// 4-D kernel bank: out_channels x in_channels x kernel_h x kernel_w.
// Kernel dims must be odd; even kernels break same-padding symmetry and are
// rejected up front.
template <typename T>
struct Tensor4 {
    int out_channels = 0;
    int in_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    std::vector<T> data;

    Tensor4() = default;
    Tensor4(int oc, int ic, int kh, int kw)
        : out_channels(oc), in_channels(ic), kernel_h(kh), kernel_w(kw),
          data(static_cast<std::size_t>(oc) * ic * kh * kw, T(0)) {
        if (kh % 2 == 0 || kw % 2 == 0)
            throw DimensionError("Tensor4: kernel dims must be odd, got " + detail::shape2(kh, kw));
    }

    std::size_t kernel_size() const { return static_cast<std::size_t>(kernel_h) * kernel_w; }
    std::size_t size() const { return data.size(); }

    T* kernel(int m, int n) {
        return data.data() + (static_cast<std::size_t>(m) * in_channels + n) * kernel_size();
    }
    const T* kernel(int m, int n) const {
        return data.data() + (static_cast<std::size_t>(m) * in_channels + n) * kernel_size();
    }
    bool same_shape(const Tensor4& o) const {
        return out_channels == o.out_channels && in_channels == o.in_channels &&
               kernel_h == o.kernel_h && kernel_w == o.kernel_w;
    }
};

// Row-major matrix.
template <typename T>
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, T(0)) {}

    T& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
    const T& at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

template <typename T>
using Vector = std::vector<T>;

// ---------------------------------------------------------------------------
// Spatial kernels
// ---------------------------------------------------------------------------

// acc += cross-correlation of `in` with `kernel`, "same" zero padding,
// stride 1. Output spatial size equals input spatial size.
template <typename T>
void conv2d_same_acc(const T* in, int h, int w, const T* kernel, int kh, int kw, T* acc) {
    if (kh % 2 == 0 || kw % 2 == 0)
        throw DimensionError("conv2d_same: kernel dims must be odd, got " + detail::shape2(kh, kw));
    const int ph = (kh - 1) / 2;
    const int pw = (kw - 1) / 2;
    // One pass per kernel offset; the valid output window is hoisted out so
    // the inner loop runs over contiguous spans.
    for (int i = 0; i < kh; ++i) {
        const int y0 = std::max(0, ph - i), y1 = std::min(h, h + ph - i);
        for (int j = 0; j < kw; ++j) {
            const T kv = kernel[i * kw + j];
            const int x0 = std::max(0, pw - j), x1 = std::min(w, w + pw - j);
            const int span = x1 - x0;
            for (int y = y0; y < y1; ++y) {
                const T* src = in + (y + i - ph) * w + (x0 + j - pw);
                T* dst = acc + y * w + x0;
                for (int x = 0; x < span; ++x) dst[x] += kv * src[x];
            }
        }
    }
}

template <typename T>
Grid<T> conv2d_same(const Grid<T>& in, const Grid<T>& kernel, const Grid<T>& accum) {
    if (!in.same_shape(accum))
        throw DimensionError("conv2d_same: accum shape " + detail::shape2(accum.rows, accum.cols) +
                             " != input shape " + detail::shape2(in.rows, in.cols));
    Grid<T> out = accum;
    conv2d_same_acc(in.data(), in.rows, in.cols, kernel.data(), kernel.rows, kernel.cols, out.data());
    return out;
}

// 180-degree rotation: out[i,j] = in[h-1-i, w-1-j].
template <typename T>
void flip_into(const T* in, int h, int w, T* out) {
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            out[i * w + j] = in[(h - 1 - i) * w + (w - 1 - j)];
}

template <typename T>
Grid<T> flip(const Grid<T>& in) {
    Grid<T> out(in.rows, in.cols);
    flip_into(in.data(), in.rows, in.cols, out.data());
    return out;
}

// out += adjoint of conv2d_same with respect to the inner product: the error
// map is cross-correlated with the flipped kernel under the same padding.
template <typename T>
void deconv2d_same_acc(const T* kernel, int kh, int kw, const T* err, int h, int w, T* out) {
    if (kh % 2 == 0 || kw % 2 == 0)
        throw DimensionError("deconv2d_same: kernel dims must be odd, got " + detail::shape2(kh, kw));
    const int ph = (kh - 1) / 2;
    const int pw = (kw - 1) / 2;
    for (int i = 0; i < kh; ++i) {
        const int y0 = std::max(0, ph - i), y1 = std::min(h, h + ph - i);
        for (int j = 0; j < kw; ++j) {
            // flipped kernel: entry (kh-1-i, kw-1-j)
            const T kv = kernel[(kh - 1 - i) * kw + (kw - 1 - j)];
            const int x0 = std::max(0, pw - j), x1 = std::min(w, w + pw - j);
            const int span = x1 - x0;
            for (int y = y0; y < y1; ++y) {
                const T* src = err + (y + i - ph) * w + (x0 + j - pw);
                T* dst = out + y * w + x0;
                for (int x = 0; x < span; ++x) dst[x] += kv * src[x];
            }
        }
    }
}

template <typename T>
Grid<T> deconv2d_same(const Grid<T>& kernel, const Grid<T>& err) {
    Grid<T> out(err.rows, err.cols);
    deconv2d_same_acc(kernel.data(), kernel.rows, kernel.cols, err.data(), err.rows, err.cols, out.data());
    return out;
}

// out[p,q] += sum_{i,j} padded_input[i+p, j+q] * err[i,j].
// This is the weight gradient of conv2d_same; it also realizes the
// Hebbian kernel update (input map correlated with the error map).
template <typename T>
void weight_grad_conv_acc(const T* in, int h, int w, const T* err, int eh, int ew,
                          int kh, int kw, T* out) {
    if (h != eh || w != ew)
        throw DimensionError("weight_grad_conv: input " + detail::shape2(h, w) +
                             " != error " + detail::shape2(eh, ew));
    if (kh % 2 == 0 || kw % 2 == 0)
        throw DimensionError("weight_grad_conv: kernel dims must be odd, got " + detail::shape2(kh, kw));
    const int ph = (kh - 1) / 2;
    const int pw = (kw - 1) / 2;
    for (int p = 0; p < kh; ++p) {
        const int i0 = std::max(0, ph - p), i1 = std::min(h, h + ph - p);
        for (int q = 0; q < kw; ++q) {
            const int j0 = std::max(0, pw - q), j1 = std::min(w, w + pw - q);
            const int span = j1 - j0;
            T s = 0;
            for (int i = i0; i < i1; ++i) {
                const T* a = in + (i + p - ph) * w + (j0 + q - pw);
                const T* b = err + i * w + j0;
                for (int j = 0; j < span; ++j) s += a[j] * b[j];
            }
            out[p * kw + q] += s;
        }
    }
}

template <typename T>
Grid<T> weight_grad_conv(const Grid<T>& in, const Grid<T>& err, int kh, int kw) {
    Grid<T> out(kh, kw);
    weight_grad_conv_acc(in.data(), in.rows, in.cols, err.data(), err.rows, err.cols, kh, kw, out.data());
    return out;
}

// ---------------------------------------------------------------------------
// Pooling / resampling
// ---------------------------------------------------------------------------

// Winning position inside each disjoint 2x2 window, encoded as row*2+col.
// Ties go to the first index in row-major window order.
using PoolProvenance = std::vector<std::uint8_t>;

template <typename T>
void maxpool2_into(const T* in, int h, int w, T* out, std::uint8_t* prov) {
    if (h % 2 != 0 || w % 2 != 0)
        throw DimensionError("maxpool2: dims must be even, got " + detail::shape2(h, w));
    const int oh = h / 2, ow = w / 2;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            T best = in[(2 * y) * w + 2 * x];
            std::uint8_t arg = 0;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    const T v = in[(2 * y + i) * w + (2 * x + j)];
                    if (v > best) {
                        best = v;
                        arg = static_cast<std::uint8_t>(i * 2 + j);
                    }
                }
            out[y * ow + x] = best;
            if (prov) prov[y * ow + x] = arg;
        }
    }
}

template <typename T>
std::pair<Grid<T>, PoolProvenance> maxpool2(const Grid<T>& in) {
    Grid<T> out(in.rows / 2, in.cols / 2);
    PoolProvenance prov(out.size());
    maxpool2_into(in.data(), in.rows, in.cols, out.data(), prov.data());
    return {std::move(out), std::move(prov)};
}

// Nearest-neighbor 2x replication.
template <typename T>
void upsample2_into(const T* in, int h, int w, T* out) {
    const int oh = 2 * h, ow = 2 * w;
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out[y * ow + x] = in[(y / 2) * w + (x / 2)];
}

template <typename T>
Grid<T> upsample2(const Grid<T>& in) {
    Grid<T> out(2 * in.rows, 2 * in.cols);
    upsample2_into(in.data(), in.rows, in.cols, out.data());
    return out;
}

// ---------------------------------------------------------------------------
// Flatten / unflatten
// ---------------------------------------------------------------------------

template <typename T>
Vector<T> flatten(const FeatureStack<T>& s) {
    return s.data;  // storage already is the channel-major linearization
}

template <typename T>
FeatureStack<T> unflatten(const Vector<T>& v, int channels, int height, int width) {
    if (v.size() != static_cast<std::size_t>(channels) * height * width)
        throw DimensionError("unflatten: vector length " + std::to_string(v.size()) +
                             " != " + std::to_string(channels) + "*" + std::to_string(height) +
                             "*" + std::to_string(width));
    FeatureStack<T> s(channels, height, width);
    s.data = v;
    return s;
}

// ---------------------------------------------------------------------------
// Matrix / vector algebra
// ---------------------------------------------------------------------------

template <typename T>
Vector<T> matvec(const Matrix<T>& a, const Vector<T>& x) {
    if (static_cast<std::size_t>(a.cols) != x.size())
        throw DimensionError("matvec: " + detail::shape2(a.rows, a.cols) + " * vector of length " +
                             std::to_string(x.size()));
    Vector<T> y(a.rows, T(0));
    for (int i = 0; i < a.rows; ++i) {
        T s = 0;
        const T* row = a.v.data() + static_cast<std::size_t>(i) * a.cols;
        for (int j = 0; j < a.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

// A^T * x without materializing the transpose.
template <typename T>
Vector<T> matvec_transposed(const Matrix<T>& a, const Vector<T>& x) {
    if (static_cast<std::size_t>(a.rows) != x.size())
        throw DimensionError("matvec_transposed: " + detail::shape2(a.cols, a.rows) +
                             " * vector of length " + std::to_string(x.size()));
    Vector<T> y(a.cols, T(0));
    for (int i = 0; i < a.rows; ++i) {
        const T* row = a.v.data() + static_cast<std::size_t>(i) * a.cols;
        const T xi = x[i];
        for (int j = 0; j < a.cols; ++j) y[j] += row[j] * xi;
    }
    return y;
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols != b.rows)
        throw DimensionError("matmul: " + detail::shape2(a.rows, a.cols) + " * " +
                             detail::shape2(b.rows, b.cols));
    Matrix<T> c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            const T aik = a.at(i, k);
            for (int j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
        }
    return c;
}

template <typename T>
Matrix<T> outer(const Vector<T>& a, const Vector<T>& b) {
    Matrix<T> m(static_cast<int>(a.size()), static_cast<int>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            m.at(static_cast<int>(i), static_cast<int>(j)) = a[i] * b[j];
    return m;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
    Matrix<T> t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

// ---------------------------------------------------------------------------
// Finiteness guards
// ---------------------------------------------------------------------------

template <typename T>
void assert_finite(const T* p, std::size_t n, const std::string& what) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(static_cast<double>(p[i])))
            throw NumericError("non-finite value in " + what);
}

template <typename T>
void assert_finite(const std::vector<T>& v, const std::string& what) {
    assert_finite(v.data(), v.size(), what);
}

}  // namespace ekdaa

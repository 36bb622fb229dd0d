#include "ekdaa/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ekdaa/rng.hpp"

namespace ekdaa {
namespace verify {

namespace {

// Input zero-padded by the kernel half-widths, materialized explicitly.
Grid<double> padded(const Grid<double>& in, int ph, int pw) {
    Grid<double> out(in.rows + 2 * ph, in.cols + 2 * pw);
    for (int i = 0; i < in.rows; ++i)
        for (int j = 0; j < in.cols; ++j) out.at(i + ph, j + pw) = in.at(i, j);
    return out;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

Grid<double> random_grid(int h, int w, Rng& rng) {
    Grid<double> g(h, w);
    for (auto& v : g.v) v = rng.next_uniform(-1.0, 1.0);
    return g;
}

double dot(const Grid<double>& a, const Grid<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

}  // namespace

Grid<double> oracle_conv_same(const Grid<double>& in, const Grid<double>& kernel) {
    const int ph = (kernel.rows - 1) / 2, pw = (kernel.cols - 1) / 2;
    const Grid<double> pad = padded(in, ph, pw);
    Grid<double> out(in.rows, in.cols);
    for (int y = 0; y < in.rows; ++y)
        for (int x = 0; x < in.cols; ++x) {
            double s = 0;
            for (int i = 0; i < kernel.rows; ++i)
                for (int j = 0; j < kernel.cols; ++j)
                    s += pad.at(y + i, x + j) * kernel.at(i, j);
            out.at(y, x) = s;
        }
    return out;
}

// d/dK[p,q] of sum(conv_same(in, K) .* err): differentiate the correlation
// sum directly over the padded input.
Grid<double> oracle_weight_grad(const Grid<double>& in, const Grid<double>& err, int kh, int kw) {
    const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    const Grid<double> pad = padded(in, ph, pw);
    Grid<double> out(kh, kw);
    for (int y = 0; y < in.rows; ++y)
        for (int x = 0; x < in.cols; ++x)
            for (int p = 0; p < kh; ++p)
                for (int q = 0; q < kw; ++q)
                    out.at(p, q) += pad.at(y + p, x + q) * err.at(y, x);
    return out;
}

// d/din of the same scalar: scatter each err entry through the kernel onto
// the padded input, then crop the padding.
Grid<double> oracle_input_grad(const Grid<double>& err, const Grid<double>& kernel) {
    const int ph = (kernel.rows - 1) / 2, pw = (kernel.cols - 1) / 2;
    Grid<double> pad(err.rows + 2 * ph, err.cols + 2 * pw);
    for (int y = 0; y < err.rows; ++y)
        for (int x = 0; x < err.cols; ++x)
            for (int i = 0; i < kernel.rows; ++i)
                for (int j = 0; j < kernel.cols; ++j)
                    pad.at(y + i, x + j) += err.at(y, x) * kernel.at(i, j);
    Grid<double> out(err.rows, err.cols);
    for (int y = 0; y < err.rows; ++y)
        for (int x = 0; x < err.cols; ++x) out.at(y, x) = pad.at(y + ph, x + pw);
    return out;
}

Grid<double> oracle_flip(const Grid<double>& k) {
    Grid<double> out(k.rows, k.cols);
    for (int i = 0; i < k.rows; ++i)
        for (int j = 0; j < k.cols; ++j)
            out.at(i, j) = k.at(k.rows - 1 - i, k.cols - 1 - j);
    return out;
}

GradCheckReport finite_diff_check(const Network<double>& net, const FeatureStack<double>& sample,
                                  int label, double eps, double tol) {
    Network<double> work = net;
    const auto y = one_hot<double>(label, net.class_count());
    const auto analytic = backprop_updates(work, infer(work, sample), y);

    auto loss = [&]() {
        const auto tr = infer(work, sample);
        return cross_entropy(tr.head_post, label);
    };

    GradCheckReport report;
    auto check_tensor = [&](std::vector<double>& param, const std::vector<double>& grad,
                            const std::string& name) {
        GradCheckEntry e;
        e.tensor = name;
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double orig = param[i];
            param[i] = orig + eps;
            const double lp = loss();
            param[i] = orig - eps;
            const double lm = loss();
            param[i] = orig;
            const double fd = (lp - lm) / (2 * eps);
            // Guard: when both sides vanish the quotient is pure noise.
            if (std::abs(fd) < 1e-10 && std::abs(grad[i]) < 1e-10) continue;
            e.max_rel_err = std::max(e.max_rel_err, rel_err(fd, grad[i]));
        }
        e.pass = e.max_rel_err < tol;
        report.max_rel_err = std::max(report.max_rel_err, e.max_rel_err);
        report.entries.push_back(e);
    };

    for (std::size_t l = 0; l < work.conv.size(); ++l) {
        check_tensor(work.conv[l].weights.data, analytic.conv[l].w.data,
                     "conv" + std::to_string(l) + ".W");
        if (!work.conv[l].bias.empty())
            check_tensor(work.conv[l].bias, analytic.conv[l].bias, "conv" + std::to_string(l) + ".b");
    }
    for (std::size_t l = 0; l < work.dense.size(); ++l) {
        check_tensor(work.dense[l].weights.v, analytic.dense[l].w.v,
                     "dense" + std::to_string(l) + ".W");
        if (!work.dense[l].bias.empty())
            check_tensor(work.dense[l].bias, analytic.dense[l].bias,
                         "dense" + std::to_string(l) + ".b");
    }
    check_tensor(work.head.weights.v, analytic.head_w.v, "head.W");

    report.pass = true;
    for (const auto& e : report.entries) report.pass = report.pass && e.pass;
    return report;
}

IdentityCheckReport conv_identity_check(int trials, std::uint64_t seed, double tol) {
    IdentityCheckReport rep;
    rep.trials = trials;
    Rng rng(mix_seed(seed, 0x1de27));
    for (int t = 0; t < trials; ++t) {
        const int k = (t % 2 == 0) ? 3 : 5;
        const int h = 4 + static_cast<int>(rng.next_index(6));
        const int w = 4 + static_cast<int>(rng.next_index(6));
        const Grid<double> in = random_grid(h, w, rng);
        const Grid<double> kernel = random_grid(k, k, rng);
        const Grid<double> err = random_grid(h, w, rng);

        double worst = 0;
        // forward against the padded-buffer oracle
        const Grid<double> prod_out = conv2d_same(in, kernel, Grid<double>(h, w));
        const Grid<double> orac_out = oracle_conv_same(in, kernel);
        for (std::size_t i = 0; i < prod_out.v.size(); ++i)
            worst = std::max(worst, std::abs(prod_out.v[i] - orac_out.v[i]));
        // weight gradient
        const Grid<double> prod_wg = weight_grad_conv(in, err, k, k);
        const Grid<double> orac_wg = oracle_weight_grad(in, err, k, k);
        for (std::size_t i = 0; i < prod_wg.v.size(); ++i)
            worst = std::max(worst, std::abs(prod_wg.v[i] - orac_wg.v[i]));
        // input gradient: conv with the flipped kernel
        const Grid<double> prod_ig = conv2d_same(err, flip(kernel), Grid<double>(h, w));
        const Grid<double> orac_ig = oracle_input_grad(err, kernel);
        for (std::size_t i = 0; i < prod_ig.v.size(); ++i)
            worst = std::max(worst, std::abs(prod_ig.v[i] - orac_ig.v[i]));
        // deconv realizes the same input gradient
        const Grid<double> prod_dc = deconv2d_same(kernel, err);
        for (std::size_t i = 0; i < prod_dc.v.size(); ++i)
            worst = std::max(worst, std::abs(prod_dc.v[i] - orac_ig.v[i]));

        rep.worst_abs_err = std::max(rep.worst_abs_err, worst);
        if (worst <= tol) ++rep.passed;
    }
    return rep;
}

IdentityCheckReport adjointness_check(int trials, std::uint64_t seed, double tol) {
    IdentityCheckReport rep;
    rep.trials = trials;
    Rng rng(mix_seed(seed, 0xad301));
    for (int t = 0; t < trials; ++t) {
        const int k = (t % 2 == 0) ? 3 : 5;
        const int h = 4 + static_cast<int>(rng.next_index(6));
        const int w = 4 + static_cast<int>(rng.next_index(6));
        const Grid<double> a = random_grid(h, w, rng);
        const Grid<double> b = random_grid(h, w, rng);
        const Grid<double> kernel = random_grid(k, k, rng);
        const double lhs = dot(conv2d_same(a, kernel, Grid<double>(h, w)), b);
        const double rhs = dot(a, deconv2d_same(kernel, b));
        const double err = std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
        rep.worst_abs_err = std::max(rep.worst_abs_err, err);
        if (err <= tol) ++rep.passed;
    }
    return rep;
}

AngleReport angle_survey(const Network<double>& net,
                         const std::vector<FeatureStack<double>>& samples,
                         const std::vector<int>& labels, const RuleParams<double>& params) {
    struct Acc {
        double sum = 0, mn = 1e9, mx = -1e9;
        int count = 0, violations = 0;
        void add(double deg) {
            sum += deg;
            mn = std::min(mn, deg);
            mx = std::max(mx, deg);
            ++count;
            if (deg >= 90.0) ++violations;
        }
    };
    std::vector<std::string> names;
    for (std::size_t l = 0; l < net.conv.size(); ++l) names.push_back("conv" + std::to_string(l));
    for (std::size_t l = 0; l < net.dense.size(); ++l) names.push_back("dense" + std::to_string(l));
    names.push_back("head");
    std::vector<Acc> acc(names.size());

    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto tr = infer(net, samples[s]);
        const auto y = one_hot<double>(labels[s], net.class_count());
        const auto ek = ekdaa_updates(net, tr, y, params);
        const auto bp = backprop_updates(net, tr, y);
        std::size_t row = 0;
        for (std::size_t l = 0; l < net.conv.size(); ++l, ++row)
            acc[row].add(gradient_angle(ek.conv[l].w.data, bp.conv[l].w.data));
        for (std::size_t l = 0; l < net.dense.size(); ++l, ++row)
            acc[row].add(gradient_angle(ek.dense[l].w.v, bp.dense[l].w.v));
        acc[row].add(gradient_angle(ek.head_w.v, bp.head_w.v));
    }

    AngleReport rep;
    for (std::size_t i = 0; i < names.size(); ++i) {
        AngleRow r;
        r.layer = names[i];
        r.samples = acc[i].count;
        r.violations = acc[i].violations;
        if (acc[i].count > 0) {
            r.mean_deg = acc[i].sum / acc[i].count;
            r.min_deg = acc[i].mn;
            r.max_deg = acc[i].mx;
        }
        rep.rows.push_back(r);
    }
    return rep;
}

std::string to_csv(const GradCheckReport& r) {
    std::ostringstream ss;
    ss << "tensor,max_rel_err,pass\n";
    char buf[64];
    for (const auto& e : r.entries) {
        std::snprintf(buf, sizeof(buf), "%.3e", e.max_rel_err);
        ss << e.tensor << "," << buf << "," << (e.pass ? "1" : "0") << "\n";
    }
    return ss.str();
}

std::string to_csv(const AngleReport& r) {
    std::ostringstream ss;
    ss << "layer,mean_deg,min_deg,max_deg,samples,violations\n";
    char buf[96];
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%d,%d", row.layer.c_str(), row.mean_deg,
                      row.min_deg, row.max_deg, row.samples, row.violations);
        ss << buf << "\n";
    }
    return ss.str();
}

std::string summary(const GradCheckReport& r) {
    std::ostringstream ss;
    ss << "gradient check: " << (r.pass ? "PASS" : "FAIL") << " (max rel err " << r.max_rel_err
       << " over " << r.entries.size() << " tensors)";
    return ss.str();
}

std::string summary(const IdentityCheckReport& r, const std::string& name) {
    std::ostringstream ss;
    ss << name << ": " << (r.pass() ? "PASS" : "FAIL") << " (" << r.passed << "/" << r.trials
       << " trials, worst err " << r.worst_abs_err << ")";
    return ss.str();
}

std::string summary(const AngleReport& r) {
    std::ostringstream ss;
    ss << "angle survey:\n";
    for (const auto& row : r.rows) {
        ss << "  " << row.layer << ": mean " << row.mean_deg << " deg, range [" << row.min_deg
           << ", " << row.max_deg << "], " << row.violations << "/" << row.samples
           << " at or beyond 90 deg\n";
    }
    return ss.str();
}

}  // namespace verify
}  // namespace ekdaa

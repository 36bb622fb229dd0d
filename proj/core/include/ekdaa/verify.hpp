#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ekdaa/credit_rules.hpp"
#include "ekdaa/layers.hpp"

namespace ekdaa {
namespace verify {

// Brute-force double-precision oracles, written against the operator
// definitions with explicit padded buffers. Deliberately independent of the
// production kernels they are used to check.
Grid<double> oracle_conv_same(const Grid<double>& in, const Grid<double>& kernel);
Grid<double> oracle_weight_grad(const Grid<double>& in, const Grid<double>& err, int kh, int kw);
Grid<double> oracle_input_grad(const Grid<double>& err, const Grid<double>& kernel);
Grid<double> oracle_flip(const Grid<double>& k);

struct GradCheckEntry {
    std::string tensor;
    double max_rel_err = 0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0;
    bool pass = false;
};

// Central-difference check of the backprop reference on every W and bias.
// Relative error metric: |a-b| / max(|a|,|b|,1e-8).
GradCheckReport finite_diff_check(const Network<double>& net, const FeatureStack<double>& sample,
                                  int label, double eps = 1e-5, double tol = 1e-5);

struct IdentityCheckReport {
    int trials = 0;
    int passed = 0;
    double worst_abs_err = 0;
    bool pass() const { return passed == trials; }
};

// Random-trial check that the production weight gradient and input gradient
// of the same-padding convolution match the brute-force oracles, the
// conv/deconv pair is adjoint, and flip behaves as the index map says.
IdentityCheckReport conv_identity_check(int trials, std::uint64_t seed, double tol = 1e-10);
IdentityCheckReport adjointness_check(int trials, std::uint64_t seed, double tol = 1e-10);

struct AngleRow {
    std::string layer;
    double mean_deg = 0;
    double min_deg = 0;
    double max_deg = 0;
    int samples = 0;
    int violations = 0;  // angle >= 90 degrees
};

struct AngleReport {
    std::vector<AngleRow> rows;
};

// Per-layer angles between EKDAA pseudo-gradients and exact backprop
// gradients over a set of samples.
AngleReport angle_survey(const Network<double>& net,
                         const std::vector<FeatureStack<double>>& samples,
                         const std::vector<int>& labels, const RuleParams<double>& params);

std::string to_csv(const GradCheckReport& r);
std::string to_csv(const AngleReport& r);
std::string summary(const GradCheckReport& r);
std::string summary(const IdentityCheckReport& r, const std::string& name);
std::string summary(const AngleReport& r);

}  // namespace verify
}  // namespace ekdaa

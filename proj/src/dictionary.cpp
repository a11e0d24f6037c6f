#include "koopstab/dictionary.hpp"

#include <stdexcept>

#include "koopstab/errors.hpp"

namespace koopstab {

namespace {

// Exponent vectors of total degree d over n variables, lexicographically
// descending in the leading variable (so x1^d comes first).
void compositions(int n, int d, std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
    if (n == 1) {
        prefix.push_back(d);
        out.push_back(prefix);
        prefix.pop_back();
        return;
    }
    for (int k = d; k >= 0; --k) {
        prefix.push_back(k);
        compositions(n - 1, d - k, prefix, out);
        prefix.pop_back();
    }
}

}  // namespace

Dictionary build_dictionary(int n, int degree) {
    if (n < 1 || degree < 1) throw Error("build_dictionary: need n >= 1 and degree >= 1");
    Dictionary dict;
    dict.n = n;
    dict.degree = degree;
    std::vector<int> prefix;
    for (int d = 0; d <= degree; ++d) compositions(n, d, prefix, dict.exponents);
    return dict;
}

Eigen::VectorXd Dictionary::evaluate(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(size());
    evaluate_into(x, out);
    return out;
}

void Dictionary::evaluate_into(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    if (x.size() != n) throw Error("dictionary evaluate: state dimension mismatch");
    out.resize(size());
    // powers[i*(degree+1) + k] = x_i^k
    thread_local std::vector<double> powers;
    powers.assign(static_cast<std::size_t>(n) * (degree + 1), 1.0);
    for (int i = 0; i < n; ++i)
        for (int k = 1; k <= degree; ++k)
            powers[i * (degree + 1) + k] = powers[i * (degree + 1) + k - 1] * x[i];
    for (int j = 0; j < size(); ++j) {
        double v = 1.0;
        const auto& alpha = exponents[j];
        for (int i = 0; i < n; ++i) v *= powers[i * (degree + 1) + alpha[i]];
        out[j] = v;
    }
}

}  // namespace koopstab

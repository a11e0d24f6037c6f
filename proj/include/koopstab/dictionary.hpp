#pragma once

#include <Eigen/Core>
#include <vector>

namespace koopstab {

// Monomial observable dictionary: all x^alpha with |alpha| <= degree,
// graded-lex ordered, constant term first.
struct Dictionary {
    int n = 0;
    int degree = 0;
    std::vector<std::vector<int>> exponents;

    int size() const { return static_cast<int>(exponents.size()); }

    Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;
    void evaluate_into(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
};

Dictionary build_dictionary(int n, int degree);

}  // namespace koopstab

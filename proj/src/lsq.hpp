#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

namespace mbprop::detail {

using ResidualFn = std::function<void(const Eigen::VectorXd& params, Eigen::VectorXd& residuals)>;

struct LsqResult {
    Eigen::VectorXd params;
    int iterations = 0;
    bool converged = false;
};

// Levenberg-Marquardt with forward-difference Jacobian. Parameters should be
// scaled to order one; the finite-difference step is relative.
inline LsqResult least_squares(const ResidualFn& fn, Eigen::VectorXd start, int residual_count, int max_iterations) {
    struct Functor : Eigen::DenseFunctor<double> {
        Functor(const ResidualFn& f, int n, int m) : Eigen::DenseFunctor<double>(n, m), fn(f) {}
        int operator()(const InputType& x, ValueType& fvec) const {
            fn(x, fvec);
            return 0;
        }
        const ResidualFn& fn;
    };

    Functor functor(fn, static_cast<int>(start.size()), residual_count);
    Eigen::NumericalDiff<Functor> numdiff(functor);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<Functor>> lm(numdiff);
    lm.setMaxfev(max_iterations * (static_cast<int>(start.size()) + 1));
    lm.setFtol(1e-12);
    lm.setXtol(1e-12);

    const auto status = lm.minimize(start);
    LsqResult out;
    out.params = start;
    out.iterations = static_cast<int>(lm.iterations());
    using S = Eigen::LevenbergMarquardtSpace::Status;
    out.converged = status != S::TooManyFunctionEvaluation && status != S::ImproperInputParameters &&
                    out.iterations <= max_iterations && start.allFinite();
    return out;
}

}  // namespace mbprop::detail

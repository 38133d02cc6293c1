#include "stopbridge/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace stopbridge {

namespace {

// Entrywise num / den with 0/0 = 0. Any positive numerator over a zero
// denominator is a hard infeasibility.
Vector safe_divide(const Vector& num, const Vector& den, const char* what) {
    Vector out(num.size());
    for (Eigen::Index i = 0; i < num.size(); ++i) {
        if (num(i) == 0.0) {
            out(i) = 0.0;
        } else if (den(i) == 0.0) {
            throw Error(ErrorKind::DivisionBlowup, what,
                        fmt::format("{} entry {} has target {} but zero reachable mass", what, i,
                                    num(i)));
        } else {
            out(i) = num(i) / den(i);
        }
    }
    return out;
}

double linf(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

Matrix ScalingPair::lambda_table() const {
    return Eigen::Map<const Matrix>(Lambda.data(), num_absorbing, horizon);
}

Vector ScalingPair::kernel_scaling(const Vector& mu_hat) const {
    Vector out(D.size());
    for (Eigen::Index x = 0; x < D.size(); ++x)
        out(x) = mu_hat(x) == 0.0 ? 0.0 : D(x) / mu_hat(x);
    return out;
}

SinkhornResult sinkhorn_partial(const Matrix& Bcal, const Matrix& Acal, const Vector& mu_hat,
                                const Vector& nu_hat, const SinkhornOptions& options) {
    if (Bcal.rows() != mu_hat.size() || Acal.rows() != mu_hat.size() || Bcal.cols() != nu_hat.size())
        throw Error(ErrorKind::DimensionMismatch, "sinkhorn",
                    fmt::format("Bcal {}x{}, Acal {}x{}, mu_hat {}, nu_hat {}", Bcal.rows(),
                                Bcal.cols(), Acal.rows(), Acal.cols(), mu_hat.size(), nu_hat.size()));

    const Vector acal_rows = Acal.rowwise().sum();
    SinkhornResult result;
    auto& diag = result.diagnostics;
    Vector lambda = Vector::Ones(nu_hat.size());
    Vector D;

    for (;;) {
        D = safe_divide(mu_hat, Bcal * lambda + acal_rows, "mu_hat");
        const Vector col_mass = Bcal.transpose() * D;
        const double row_res = linf(D.cwiseProduct(Bcal * lambda + acal_rows) - mu_hat);
        const double col_res = linf(lambda.cwiseProduct(col_mass) - nu_hat);
        const double residual = std::max(row_res, col_res);
        diag.residual_history.push_back(residual);
        diag.final_residual = residual;
        if (residual <= options.tol) {
            diag.converged = true;
            break;
        }
        if (diag.iterations >= options.max_iter) break;
        lambda = safe_divide(nu_hat, col_mass, "nu_hat");
        ++diag.iterations;
    }

    result.scalings.D = std::move(D);
    result.scalings.Lambda = std::move(lambda);
    return result;
}

ClassicalScalings classical_sb(const Matrix& G, const Vector& mu_start, const Vector& mu_end,
                               const SinkhornOptions& options) {
    if (G.rows() != mu_start.size() || G.cols() != mu_end.size())
        throw Error(ErrorKind::DimensionMismatch, "classical_sb",
                    fmt::format("G is {}x{}, marginals {} and {}", G.rows(), G.cols(),
                                mu_start.size(), mu_end.size()));

    ClassicalScalings out;
    auto& diag = out.diagnostics;
    out.col = Vector::Ones(G.cols());
    for (;;) {
        out.row = safe_divide(mu_start, G * out.col, "mu_start");
        const Vector col_mass = G.transpose() * out.row;
        const double row_res = linf(out.row.cwiseProduct(G * out.col) - mu_start);
        const double col_res = linf(out.col.cwiseProduct(col_mass) - mu_end);
        const double residual = std::max(row_res, col_res);
        diag.residual_history.push_back(residual);
        diag.final_residual = residual;
        if (residual <= options.tol) {
            diag.converged = true;
            break;
        }
        if (diag.iterations >= options.max_iter) break;
        out.col = safe_divide(mu_end, col_mass, "mu_end");
        ++diag.iterations;
    }
    return out;
}

}  // namespace stopbridge

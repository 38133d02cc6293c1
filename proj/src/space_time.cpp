#include "stopbridge/space_time.hpp"

namespace stopbridge {

PartitionedMatrix telescopic_expand(std::span<const StageKernel> stages) {
    PartitionedMatrix pm;
    pm.horizon = static_cast<int>(stages.size());
    if (stages.empty()) return pm;
    const Eigen::Index n = stages.front().A.rows();
    const Eigen::Index m = stages.front().B.cols();
    pm.num_absorbing = static_cast<int>(m);
    pm.Bcal.resize(n, m * pm.horizon);

    // prefix = A_1 ... A_{tau-1}, accumulated left to right
    Matrix prefix = Matrix::Identity(n, n);
    for (int tau = 1; tau <= pm.horizon; ++tau) {
        const StageKernel& stage = stages[static_cast<std::size_t>(tau - 1)];
        pm.Bcal.middleCols((tau - 1) * m, m).noalias() = prefix * stage.B;
        prefix = prefix * stage.A;
    }
    pm.Acal = std::move(prefix);
    return pm;
}

PartitionedMatrix telescopic_expand(const PriorLaw& prior) {
    return telescopic_expand(std::span<const StageKernel>(prior.stages));
}

ArrivalDistribution arrival_distribution(std::span<const StageKernel> stages, const Vector& mu) {
    ArrivalDistribution out;
    if (stages.empty()) {
        out.residual = mu;
        return out;
    }
    const Eigen::Index m = stages.front().B.cols();
    out.arrivals.resize(m, static_cast<Eigen::Index>(stages.size()));
    Eigen::RowVectorXd mass = mu.transpose();
    for (std::size_t s = 0; s < stages.size(); ++s) {
        out.arrivals.col(static_cast<Eigen::Index>(s)) = (mass * stages[s].B).transpose();
        mass = mass * stages[s].A;
    }
    out.residual = mass.transpose();
    return out;
}

ArrivalDistribution prior_arrival_distribution(const PriorLaw& prior, const Vector& mu) {
    return arrival_distribution(std::span<const StageKernel>(prior.stages), mu);
}

Vector flatten_arrivals(const Matrix& arrivals) {
    // column-major storage of an m x t matrix is already tau-major
    return Eigen::Map<const Vector>(arrivals.data(), arrivals.size());
}

Matrix unflatten_arrivals(const Vector& flat, int num_absorbing, int horizon) {
    return Eigen::Map<const Matrix>(flat.data(), num_absorbing, horizon);
}

}  // namespace stopbridge

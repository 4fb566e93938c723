#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcglm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Input that violates an operation's preconditions (domain, shape, schema).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A Cholesky factorization met a non-positive pivot.
class FactorizationError : public std::runtime_error {
public:
    FactorizationError(const std::string& what, Index pivot)
        : std::runtime_error(what + " (non-positive pivot at index " + std::to_string(pivot) + ")"),
          pivot_(pivot) {}

    [[nodiscard]] Index pivot() const noexcept { return pivot_; }

private:
    Index pivot_;
};

/// A covariance (Sigma_r, Sigma_b or C) that should be positive definite is not.
class NotPositiveDefinite : public FactorizationError {
public:
    using FactorizationError::FactorizationError;
};

/// A sensitivity or information matrix is singular; `directions` names the
/// offending coordinates (columns, or dominant entries of null vectors).
class SingularMatrixError : public std::runtime_error {
public:
    SingularMatrixError(const std::string& what, std::vector<Index> directions);

    [[nodiscard]] const std::vector<Index>& directions() const noexcept { return directions_; }

private:
    std::vector<Index> directions_;
};

/// Lower Cholesky factor of a symmetric matrix. Throws NotPositiveDefinite
/// carrying the first failing pivot.
[[nodiscard]] MatrixXd cholesky_lower(const MatrixXd& a, const std::string& what = "matrix");

/// Inverse of an SPD matrix through its Cholesky factor.
[[nodiscard]] MatrixXd spd_inverse(const MatrixXd& a, const std::string& what = "matrix");

/// Solves an SPD system; on failure reports the columns outside the
/// numerical column space.
[[nodiscard]] MatrixXd spd_solve(const MatrixXd& a, const MatrixXd& rhs, const std::string& what);

/// Solves a general square system; singular matrices raise SingularMatrixError
/// naming the dominant coordinates of the null space.
[[nodiscard]] MatrixXd general_solve(const MatrixXd& a, const MatrixXd& rhs, const std::string& what);

/// (m + m^T) / 2, which is bitwise symmetric.
[[nodiscard]] MatrixXd symmetrize(const MatrixXd& m);

/// tr(a * b) without forming the product.
[[nodiscard]] inline double trace_of_product(const MatrixXd& a, const MatrixXd& b) {
    return a.cwiseProduct(b.transpose()).sum();
}

[[nodiscard]] MatrixXd select_symmetric(const MatrixXd& m, const std::vector<Index>& idx);
[[nodiscard]] MatrixXd select_rows(const MatrixXd& m, const std::vector<Index>& idx);
[[nodiscard]] VectorXd select(const VectorXd& v, const std::vector<Index>& idx);

// Threading. Work items write disjoint outputs, so results do not depend on
// the thread count.
void set_thread_count(int n);
[[nodiscard]] int thread_count();
void parallel_for(Index n, const std::function<void(Index)>& body);

}  // namespace mcglm

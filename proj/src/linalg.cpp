#include "mcglm/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace mcglm {

namespace {

std::atomic<int> g_threads{1};

std::string join_indices(const std::vector<Index>& idx) {
    std::ostringstream os;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i) os << ", ";
        os << idx[i];
    }
    return os.str();
}

// Unblocked pass used only to locate the failing pivot after LLT refused.
Index first_bad_pivot(const MatrixXd& a) {
    const Index n = a.rows();
    MatrixXd l = MatrixXd::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
        double d = a(j, j) - l.row(j).head(j).squaredNorm();
        if (!(d > 0.0) || !std::isfinite(d)) return j;
        l(j, j) = std::sqrt(d);
        for (Index i = j + 1; i < n; ++i) {
            l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
        }
    }
    return n - 1;
}

}  // namespace

SingularMatrixError::SingularMatrixError(const std::string& what, std::vector<Index> directions)
    : std::runtime_error(directions.empty()
                             ? what + " is singular or has non-finite entries"
                             : what + " is singular (offending directions: " + join_indices(directions) + ")"),
      directions_(std::move(directions)) {}

MatrixXd cholesky_lower(const MatrixXd& a, const std::string& what) {
    if (a.rows() != a.cols()) throw InvalidInput(what + ": Cholesky of a non-square matrix");
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() != Eigen::Success || !a.allFinite()) {
        throw NotPositiveDefinite(what + " is not positive definite", first_bad_pivot(a));
    }
    MatrixXd l = llt.matrixL();
    for (Index i = 0; i < l.rows(); ++i) {
        if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) {
            throw NotPositiveDefinite(what + " is not positive definite", i);
        }
    }
    return l;
}

MatrixXd spd_inverse(const MatrixXd& a, const std::string& what) {
    const MatrixXd l = cholesky_lower(a, what);
    MatrixXd linv = l.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(a.rows(), a.cols()));
    return symmetrize(linv.transpose() * linv);
}

MatrixXd spd_solve(const MatrixXd& a, const MatrixXd& rhs, const std::string& what) {
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() == Eigen::Success && a.allFinite()) {
        // Pivots that are tiny relative to their diagonal entry mean the
        // matrix is numerically rank deficient even though LLT succeeded.
        const VectorXd piv = MatrixXd(llt.matrixL()).diagonal();
        const double tol = 16.0 * static_cast<double>(a.rows()) * std::numeric_limits<double>::epsilon();
        bool well_posed = true;
        for (Index i = 0; i < a.rows(); ++i) {
            if (!(piv(i) * piv(i) > tol * std::abs(a(i, i)))) well_posed = false;
        }
        if (well_posed) {
            MatrixXd x = llt.solve(rhs);
            if (x.allFinite()) return x;
        }
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(a);
    std::vector<Index> bad;
    const auto& perm = qr.colsPermutation().indices();
    for (Index k = qr.rank(); k < a.cols(); ++k) bad.push_back(perm(k));
    if (bad.empty()) {
        // Full rank but indefinite: report the failing pivot instead.
        bad.push_back(first_bad_pivot(a));
    }
    std::sort(bad.begin(), bad.end());
    throw SingularMatrixError(what, std::move(bad));
}

MatrixXd general_solve(const MatrixXd& a, const MatrixXd& rhs, const std::string& what) {
    Eigen::FullPivLU<MatrixXd> lu(a);
    if (!lu.isInvertible() || !a.allFinite()) {
        std::vector<Index> dirs;
        if (a.allFinite()) {
            const MatrixXd ker = lu.kernel();
            for (Index c = 0; c < ker.cols(); ++c) {
                Index imax = 0;
                ker.col(c).cwiseAbs().maxCoeff(&imax);
                dirs.push_back(imax);
            }
        }
        throw SingularMatrixError(what, std::move(dirs));
    }
    return lu.solve(rhs);
}

MatrixXd symmetrize(const MatrixXd& m) {
    MatrixXd out(m.rows(), m.cols());
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) out(i, j) = 0.5 * (m(i, j) + m(j, i));
    }
    return out;
}

MatrixXd select_symmetric(const MatrixXd& m, const std::vector<Index>& idx) {
    const Index n = static_cast<Index>(idx.size());
    MatrixXd out(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) out(i, j) = m(idx[i], idx[j]);
    }
    return out;
}

MatrixXd select_rows(const MatrixXd& m, const std::vector<Index>& idx) {
    MatrixXd out(static_cast<Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(idx[i]);
    return out;
}

VectorXd select(const VectorXd& v, const std::vector<Index>& idx) {
    VectorXd out(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
    return out;
}

void set_thread_count(int n) { g_threads.store(std::max(1, n)); }

int thread_count() { return g_threads.load(); }

void parallel_for(Index n, const std::function<void(Index)>& body) {
    const Index workers = std::min<Index>(thread_count(), n);
    if (workers <= 1) {
        for (Index i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (Index i = w; i < n; i += workers) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mcglm

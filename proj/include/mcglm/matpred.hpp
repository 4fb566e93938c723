#pragma once

#include "mcglm/linalg.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mcglm {

/// A known symmetric N x N matrix entering the matrix linear predictor.
///
/// Symmetry is imposed on construction as (M + M^T) / 2, so entry (i, j)
/// and (j, i) are bitwise equal. Storage is sparse when fewer than a quarter
/// of the entries are non-zero, dense otherwise. Values are immutable.
class StructureMatrix {
public:
    StructureMatrix() = default;

    [[nodiscard]] static StructureMatrix from_dense(const MatrixXd& m, std::string label);
    [[nodiscard]] static StructureMatrix from_sparse(const SparseMatrix& m, std::string label);
    [[nodiscard]] static StructureMatrix from_triplets(Index n, const std::vector<Eigen::Triplet<double>>& entries,
                                                       std::string label);

    [[nodiscard]] Index dim() const noexcept { return n_; }
    [[nodiscard]] bool is_sparse() const noexcept { return sparse_; }
    [[nodiscard]] const std::string& label() const noexcept { return label_; }
    [[nodiscard]] Index nonzeros() const;

    [[nodiscard]] double coeff(Index i, Index j) const;
    [[nodiscard]] MatrixXd to_dense() const;
    [[nodiscard]] SparseMatrix to_sparse() const;

    /// target += scale * Z
    void add_scaled_to(MatrixXd& target, double scale) const;

private:
    static constexpr double kSparseDensity = 0.25;

    void choose_storage(const SparseMatrix& symmetric);

    Index n_ = 0;
    bool sparse_ = false;
    MatrixXd dense_;
    SparseMatrix sparse_m_;
    std::string label_;
};

/// Ordered components Z_0 ... Z_D sharing one dimension.
class MatrixPredictor {
public:
    MatrixPredictor() = default;
    explicit MatrixPredictor(std::vector<StructureMatrix> components);

    [[nodiscard]] Index dim() const noexcept { return components_.empty() ? 0 : components_.front().dim(); }
    [[nodiscard]] Index size() const noexcept { return static_cast<Index>(components_.size()); }
    [[nodiscard]] const StructureMatrix& operator[](Index d) const { return components_.at(static_cast<std::size_t>(d)); }
    [[nodiscard]] const std::vector<StructureMatrix>& components() const noexcept { return components_; }

private:
    std::vector<StructureMatrix> components_;
};

struct Neighborhood {
    StructureMatrix W;
    StructureMatrix D;
};

[[nodiscard]] StructureMatrix mat_identity(Index n);

/// 1 where two rows share a group label.
[[nodiscard]] StructureMatrix mat_compound_symmetry(const std::vector<std::string>& groups);

/// |pos_i - pos_j|^{-exponent} within a group, zero diagonal and zero across groups.
[[nodiscard]] StructureMatrix mat_inverse_distance(const std::vector<double>& positions, int exponent,
                                                   const std::optional<std::vector<std::string>>& groups = std::nullopt);

/// Symmetric indicator of level pair {a, b} within a group. With a == b the
/// result is the diagonal indicator of that level.
[[nodiscard]] StructureMatrix mat_pair_indicator(const std::vector<std::string>& levels,
                                                 const std::pair<std::string, std::string>& pair,
                                                 const std::vector<std::string>& groups);

/// Binary adjacency W and neighbour-count diagonal D from an undirected
/// 0-based edge list over n nodes.
[[nodiscard]] Neighborhood mat_neighborhood(Index n, const std::vector<std::pair<Index, Index>>& edges);

[[nodiscard]] StructureMatrix mat_kronecker(const StructureMatrix& a, const StructureMatrix& b);

/// a + coef * b; used to merge a CAR pair (D, W) once its autocorrelation is fixed.
[[nodiscard]] StructureMatrix mat_combine(const StructureMatrix& a, const StructureMatrix& b, double coef);

/// U = sum_d tau_d Z_d.
[[nodiscard]] MatrixXd assemble_U(const VectorXd& tau, const MatrixPredictor& pred);

/// Reads "i j value" lines (1-based, upper triangle). Lines starting with
/// '#' are comments; a "# dim N" comment fixes the dimension, otherwise the
/// largest index does. Errors name the offending line.
[[nodiscard]] StructureMatrix read_coordinate_list(std::istream& in, std::string label,
                                                   std::optional<Index> dim = std::nullopt);
[[nodiscard]] StructureMatrix read_coordinate_list_file(const std::string& path,
                                                        std::optional<Index> dim = std::nullopt);
void write_coordinate_list(std::ostream& out, const StructureMatrix& z);

}  // namespace mcglm

#include "mcglm/matpred.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace mcglm {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseMatrix symmetric_part(const SparseMatrix& s) {
    SparseMatrix t = s.transpose();
    SparseMatrix sym = (s + t) * 0.5;
    sym.prune(0.0);
    sym.makeCompressed();
    return sym;
}

// Row indices bucketed by group label, in first-appearance order.
std::vector<std::vector<Index>> bucket_by_group(const std::vector<std::string>& groups) {
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<std::vector<Index>> buckets;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        auto [it, inserted] = slot.try_emplace(groups[i], buckets.size());
        if (inserted) buckets.emplace_back();
        buckets[it->second].push_back(static_cast<Index>(i));
    }
    return buckets;
}

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// StructureMatrix

StructureMatrix StructureMatrix::from_dense(const MatrixXd& m, std::string label) {
    if (m.rows() != m.cols()) throw InvalidInput("structure matrix '" + label + "' is not square");
    if (!m.allFinite()) throw InvalidInput("structure matrix '" + label + "' has non-finite entries");
    StructureMatrix z;
    z.n_ = m.rows();
    z.label_ = std::move(label);
    SparseMatrix s = m.sparseView();
    z.choose_storage(symmetric_part(s));
    return z;
}

StructureMatrix StructureMatrix::from_sparse(const SparseMatrix& m, std::string label) {
    if (m.rows() != m.cols()) throw InvalidInput("structure matrix '" + label + "' is not square");
    StructureMatrix z;
    z.n_ = m.rows();
    z.label_ = std::move(label);
    z.choose_storage(symmetric_part(m));
    return z;
}

StructureMatrix StructureMatrix::from_triplets(Index n, const std::vector<Eigen::Triplet<double>>& entries,
                                               std::string label) {
    SparseMatrix s(n, n);
    s.setFromTriplets(entries.begin(), entries.end());
    return from_sparse(s, std::move(label));
}

void StructureMatrix::choose_storage(const SparseMatrix& symmetric) {
    const double density = n_ == 0 ? 0.0
                                   : static_cast<double>(symmetric.nonZeros()) /
                                         (static_cast<double>(n_) * static_cast<double>(n_));
    sparse_ = density < kSparseDensity;
    if (sparse_) {
        sparse_m_ = symmetric;
        dense_.resize(0, 0);
    } else {
        dense_ = MatrixXd(symmetric);
        sparse_m_ = SparseMatrix();
    }
}

Index StructureMatrix::nonzeros() const {
    if (sparse_) return sparse_m_.nonZeros();
    return static_cast<Index>((dense_.array() != 0.0).count());
}

double StructureMatrix::coeff(Index i, Index j) const {
    return sparse_ ? sparse_m_.coeff(i, j) : dense_(i, j);
}

MatrixXd StructureMatrix::to_dense() const {
    return sparse_ ? MatrixXd(sparse_m_) : dense_;
}

SparseMatrix StructureMatrix::to_sparse() const {
    if (sparse_) return sparse_m_;
    SparseMatrix s = dense_.sparseView();
    s.makeCompressed();
    return s;
}

void StructureMatrix::add_scaled_to(MatrixXd& target, double scale) const {
    if (target.rows() != n_ || target.cols() != n_) throw InvalidInput("add_scaled_to: dimension mismatch");
    if (sparse_) {
        for (Index k = 0; k < sparse_m_.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator it(sparse_m_, k); it; ++it) {
                target(it.row(), it.col()) += scale * it.value();
            }
        }
    } else {
        target.noalias() += scale * dense_;
    }
}

MatrixPredictor::MatrixPredictor(std::vector<StructureMatrix> components) : components_(std::move(components)) {
    if (components_.empty()) throw InvalidInput("matrix linear predictor needs at least one component");
    const Index n = components_.front().dim();
    for (const auto& z : components_) {
        if (z.dim() != n) {
            throw InvalidInput("matrix linear predictor component '" + z.label() + "' has dimension " +
                               std::to_string(z.dim()) + ", expected " + std::to_string(n));
        }
    }
}

// ---------------------------------------------------------------------------
// Builders

StructureMatrix mat_identity(Index n) {
    if (n < 1) throw InvalidInput("mat_identity: n must be >= 1");
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) t.emplace_back(i, i, 1.0);
    return StructureMatrix::from_triplets(n, t, "identity");
}

StructureMatrix mat_compound_symmetry(const std::vector<std::string>& groups) {
    if (groups.empty()) throw InvalidInput("mat_compound_symmetry: no rows");
    const Index n = static_cast<Index>(groups.size());
    std::vector<Triplet> t;
    for (const auto& bucket : bucket_by_group(groups)) {
        for (Index i : bucket) {
            for (Index j : bucket) t.emplace_back(i, j, 1.0);
        }
    }
    return StructureMatrix::from_triplets(n, t, "compound symmetry");
}

StructureMatrix mat_inverse_distance(const std::vector<double>& positions, int exponent,
                                     const std::optional<std::vector<std::string>>& groups) {
    if (positions.empty()) throw InvalidInput("mat_inverse_distance: no rows");
    if (exponent != 1 && exponent != 2) throw InvalidInput("mat_inverse_distance: exponent must be 1 or 2");
    if (groups && groups->size() != positions.size()) {
        throw InvalidInput("mat_inverse_distance: groups and positions differ in length");
    }
    const Index n = static_cast<Index>(positions.size());
    std::vector<std::string> single(positions.size(), "");
    const auto& labels = groups ? *groups : single;
    std::vector<Triplet> t;
    for (const auto& bucket : bucket_by_group(labels)) {
        for (std::size_t a = 0; a < bucket.size(); ++a) {
            for (std::size_t b = a + 1; b < bucket.size(); ++b) {
                const Index i = bucket[a];
                const Index j = bucket[b];
                const double dist = std::abs(positions[static_cast<std::size_t>(i)] - positions[static_cast<std::size_t>(j)]);
                if (dist == 0.0) {
                    throw InvalidInput("mat_inverse_distance: rows " + std::to_string(i + 1) + " and " +
                                       std::to_string(j + 1) + " share a position within a group");
                }
                const double v = std::pow(dist, -static_cast<double>(exponent));
                t.emplace_back(i, j, v);
                t.emplace_back(j, i, v);
            }
        }
    }
    return StructureMatrix::from_triplets(n, t, exponent == 1 ? "inverse distance" : "inverse squared distance");
}

StructureMatrix mat_pair_indicator(const std::vector<std::string>& levels,
                                   const std::pair<std::string, std::string>& pair,
                                   const std::vector<std::string>& groups) {
    if (levels.empty()) throw InvalidInput("mat_pair_indicator: no rows");
    if (groups.size() != levels.size()) throw InvalidInput("mat_pair_indicator: groups and levels differ in length");
    const std::set<std::string> known(levels.begin(), levels.end());
    for (const auto& lv : {pair.first, pair.second}) {
        if (!known.count(lv)) throw InvalidInput("mat_pair_indicator: unknown level '" + lv + "'");
    }
    const Index n = static_cast<Index>(levels.size());
    std::vector<Triplet> t;
    const bool diagonal = pair.first == pair.second;
    for (const auto& bucket : bucket_by_group(groups)) {
        for (Index i : bucket) {
            const auto& li = levels[static_cast<std::size_t>(i)];
            if (diagonal) {
                if (li == pair.first) t.emplace_back(i, i, 1.0);
                continue;
            }
            for (Index j : bucket) {
                const auto& lj = levels[static_cast<std::size_t>(j)];
                if ((li == pair.first && lj == pair.second) || (li == pair.second && lj == pair.first)) {
                    t.emplace_back(i, j, 1.0);
                }
            }
        }
    }
    return StructureMatrix::from_triplets(n, t, "pair indicator (" + pair.first + "," + pair.second + ")");
}

Neighborhood mat_neighborhood(Index n, const std::vector<std::pair<Index, Index>>& edges) {
    if (n < 1) throw InvalidInput("mat_neighborhood: n must be >= 1");
    std::set<std::pair<Index, Index>> seen;
    for (const auto& [a, b] : edges) {
        if (a < 0 || a >= n || b < 0 || b >= n) {
            throw InvalidInput("mat_neighborhood: edge (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                               ") references a node outside 1.." + std::to_string(n));
        }
        if (a == b) throw InvalidInput("mat_neighborhood: self-loop at node " + std::to_string(a + 1));
        seen.emplace(std::min(a, b), std::max(a, b));
    }
    std::vector<Triplet> w;
    std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
    for (const auto& [a, b] : seen) {
        w.emplace_back(a, b, 1.0);
        w.emplace_back(b, a, 1.0);
        degree[static_cast<std::size_t>(a)] += 1.0;
        degree[static_cast<std::size_t>(b)] += 1.0;
    }
    std::vector<Triplet> d;
    for (Index i = 0; i < n; ++i) {
        if (degree[static_cast<std::size_t>(i)] != 0.0) d.emplace_back(i, i, degree[static_cast<std::size_t>(i)]);
    }
    return {StructureMatrix::from_triplets(n, w, "neighborhood W"),
            StructureMatrix::from_triplets(n, d, "neighbour count D")};
}

StructureMatrix mat_kronecker(const StructureMatrix& a, const StructureMatrix& b) {
    const SparseMatrix sa = a.to_sparse();
    const SparseMatrix sb = b.to_sparse();
    const Index nb = b.dim();
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(sa.nonZeros() * sb.nonZeros()));
    for (Index ka = 0; ka < sa.outerSize(); ++ka) {
        for (SparseMatrix::InnerIterator ia(sa, ka); ia; ++ia) {
            for (Index kb = 0; kb < sb.outerSize(); ++kb) {
                for (SparseMatrix::InnerIterator ib(sb, kb); ib; ++ib) {
                    t.emplace_back(ia.row() * nb + ib.row(), ia.col() * nb + ib.col(), ia.value() * ib.value());
                }
            }
        }
    }
    return StructureMatrix::from_triplets(a.dim() * nb, t, a.label() + " (x) " + b.label());
}

StructureMatrix mat_combine(const StructureMatrix& a, const StructureMatrix& b, double coef) {
    if (a.dim() != b.dim()) throw InvalidInput("mat_combine: dimension mismatch");
    SparseMatrix s = a.to_sparse() + coef * b.to_sparse();
    return StructureMatrix::from_sparse(s, a.label() + " + " + format_value(coef) + " " + b.label());
}

MatrixXd assemble_U(const VectorXd& tau, const MatrixPredictor& pred) {
    if (tau.size() != pred.size()) {
        throw InvalidInput("assemble_U: tau has length " + std::to_string(tau.size()) + ", predictor has " +
                           std::to_string(pred.size()) + " components");
    }
    MatrixXd u = MatrixXd::Zero(pred.dim(), pred.dim());
    for (Index d = 0; d < pred.size(); ++d) pred[d].add_scaled_to(u, tau(d));
    return u;
}

// ---------------------------------------------------------------------------
// Coordinate-list files

StructureMatrix read_coordinate_list(std::istream& in, std::string label, std::optional<Index> dim) {
    std::map<std::pair<Index, Index>, double> entries;
    std::optional<Index> declared = dim;
    std::string line;
    Index line_no = 0;
    Index max_index = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#') {
            std::istringstream hs(line.substr(first + 1));
            std::string key;
            Index n = 0;
            if (hs >> key && key == "dim" && hs >> n && !dim) declared = n;
            continue;
        }
        std::istringstream ls(line);
        long long i = 0;
        long long j = 0;
        double v = 0.0;
        std::string rest;
        if (!(ls >> i >> j >> v) || (ls >> rest)) {
            throw InvalidInput(label + ": line " + std::to_string(line_no) + ": expected 'i j value'");
        }
        if (i < 1 || j < 1) throw InvalidInput(label + ": line " + std::to_string(line_no) + ": indices are 1-based");
        if (i > j) {
            throw InvalidInput(label + ": line " + std::to_string(line_no) + ": entry below the diagonal");
        }
        if (!std::isfinite(v)) throw InvalidInput(label + ": line " + std::to_string(line_no) + ": non-finite value");
        if (!entries.emplace(std::make_pair(i - 1, j - 1), v).second) {
            throw InvalidInput(label + ": line " + std::to_string(line_no) + ": duplicate entry");
        }
        max_index = std::max<Index>(max_index, j);
    }
    const Index n = declared.value_or(max_index);
    if (n < 1) throw InvalidInput(label + ": empty matrix without a dimension");
    if (max_index > n) throw InvalidInput(label + ": index exceeds declared dimension " + std::to_string(n));
    std::vector<Triplet> t;
    for (const auto& [ij, v] : entries) {
        t.emplace_back(ij.first, ij.second, v);
        if (ij.first != ij.second) t.emplace_back(ij.second, ij.first, v);
    }
    return StructureMatrix::from_triplets(n, t, std::move(label));
}

StructureMatrix read_coordinate_list_file(const std::string& path, std::optional<Index> dim) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open structure matrix file '" + path + "'");
    return read_coordinate_list(in, path, dim);
}

void write_coordinate_list(std::ostream& out, const StructureMatrix& z) {
    out << "# dim " << z.dim() << "\n";
    out << "# label " << z.label() << "\n";
    const SparseMatrix s = z.to_sparse();
    std::map<std::pair<Index, Index>, double> upper;
    for (Index k = 0; k < s.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(s, k); it; ++it) {
            if (it.row() <= it.col() && it.value() != 0.0) upper[{it.row(), it.col()}] = it.value();
        }
    }
    for (const auto& [ij, v] : upper) {
        out << ij.first + 1 << ' ' << ij.second + 1 << ' ' << format_value(v) << '\n';
    }
}

}  // namespace mcglm

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace autocal {

enum class TruncationKind { TotalOrder, Hyperbolic };

/// Which multi-indices enter an expansion of maximum order p.
struct Truncation {
    TruncationKind kind = TruncationKind::TotalOrder;
    double q = 0.5;  // hyperbolic exponent, 0 < q <= 1

    static Truncation total_order() { return {TruncationKind::TotalOrder, 1.0}; }
    static Truncation hyperbolic(double q = 0.5) { return {TruncationKind::Hyperbolic, q}; }

    bool operator==(const Truncation& o) const {
        return kind == o.kind && (kind == TruncationKind::TotalOrder || q == o.q);
    }
    std::string to_string() const;
    static Truncation from_string(const std::string& s);
};

/// Degree tuples of a tensor-product Legendre expansion. Indices are sorted
/// by total degree, then lexicographically decreasing; the zero index is first.
class MultiIndexSet {
public:
    MultiIndexSet() = default;
    MultiIndexSet(std::size_t dim, unsigned order, Truncation truncation, std::vector<std::vector<unsigned>> indices);

    std::size_t dim() const { return dim_; }
    unsigned order() const { return order_; }
    const Truncation& truncation() const { return truncation_; }
    std::size_t size() const { return indices_.size(); }
    const std::vector<unsigned>& operator[](std::size_t i) const { return indices_[i]; }
    const std::vector<std::vector<unsigned>>& indices() const { return indices_; }

private:
    std::size_t dim_ = 0;
    unsigned order_ = 0;
    Truncation truncation_;
    std::vector<std::vector<unsigned>> indices_;
};

/// Total order: all alpha with |alpha|_1 <= p. Hyperbolic(q): all alpha with
/// (sum alpha_i^q)^(1/q) <= p.
MultiIndexSet build_index_set(std::size_t d, unsigned p, Truncation truncation);

/// L_alpha(z) = prod_i P_{alpha_i}(z_i) for every index; z must lie in [-1, 1]^d.
Eigen::VectorXd eval_basis(const MultiIndexSet& set, const Eigen::VectorXd& z);

/// |set| x d matrix of partial derivatives dL_alpha/dz_i.
Eigen::MatrixXd eval_basis_gradient(const MultiIndexSet& set, const Eigen::VectorXd& z);

/// n x |set| basis matrix; row r is eval_basis at Z.row(r).
Eigen::MatrixXd basis_matrix(const MultiIndexSet& set, const Eigen::MatrixXd& Z);

/// (d+p)! / (d! p!)
std::size_t total_order_size(std::size_t d, unsigned p);

}  // namespace autocal

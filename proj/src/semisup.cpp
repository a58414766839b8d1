#include "alcove/semisup.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/LU>

#include "alcove/geometry.hpp"

namespace alcove {

SparseMatrix knn_affinity(const Matrix& features, int k) {
    const Index n = features.rows();
    SparseMatrix w(n, n);
    if (n < 2) return w;
    k = std::clamp<int>(k, 1, static_cast<int>(n - 1));

    // Nearest in Euclidean distance on the unit sphere = most cosine-similar.
    Matrix unit = features;
    for (Index i = 0; i < n; ++i) {
        const double norm = unit.row(i).norm();
        if (norm > 0.0) unit.row(i) /= norm;
    }
    const Neighbors nb = knn(unit, k);

    Matrix dense = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j : nb.indices[i]) {
            const double cos = unit.row(i).dot(unit.row(j));
            const double a = std::pow(std::max(0.0, cos), 3.0);
            dense(i, j) = std::max(dense(i, j), a);
            dense(j, i) = std::max(dense(j, i), a);
        }
    }
    dense.diagonal().setZero();
    w = dense.sparseView();
    w.makeCompressed();
    return w;
}

SparseMatrix normalize_affinity(const SparseMatrix& w) {
    Vector deg = Vector::Zero(w.rows());
    for (Index i = 0; i < w.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(w, i); it; ++it) deg(i) += it.value();
    Vector inv_sqrt(w.rows());
    for (Index i = 0; i < w.rows(); ++i) inv_sqrt(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
    SparseMatrix s = w;
    for (Index i = 0; i < s.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(s, i); it; ++it) it.valueRef() *= inv_sqrt(it.row()) * inv_sqrt(it.col());
    return s;
}

double confidence_weight(const Eigen::Ref<const Eigen::RowVectorXd>& p) {
    const Index c = p.size();
    if (c < 2) return 1.0;
    // Uniform rows carry no confidence; log rounding would leave ~1e-16.
    if ((p.array() == p(0)).all()) return 0.0;
    double h = 0.0;
    for (Index k = 0; k < c; ++k)
        if (p(k) > 0.0) h -= p(k) * std::log(p(k));
    return std::clamp(1.0 - h / std::log(static_cast<double>(c)), 0.0, 1.0);
}

namespace {

void check_inputs(const SparseMatrix& s, const Matrix& seeds, double alpha) {
    if (s.rows() != s.cols() || s.rows() != seeds.rows())
        throw std::invalid_argument("label propagation: graph and seed matrix sizes differ");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("label propagation: alpha must lie in [0, 1)");
    bool any = false;
    for (Index i = 0; i < seeds.rows() && !any; ++i) any = seeds.row(i).sum() > 0.0;
    if (!any) throw std::invalid_argument("label propagation: no labeled points");
}

}  // namespace

PropagationResult label_propagate(const SparseMatrix& s, const Matrix& seeds, double alpha, int max_iters,
                                  double tol) {
    check_inputs(s, seeds, alpha);
    PropagationResult out;
    Matrix f = seeds;
    for (int it = 0; it < max_iters; ++it) {
        Matrix next = alpha * (s * f) + (1.0 - alpha) * seeds;
        const double r = (next - f).norm();
        f.swap(next);
        out.residuals.push_back(r);
        out.iterations = it + 1;
        if (r < tol) break;
    }

    const Index n = f.rows();
    const Index c = f.cols();
    out.pseudo_probs.resize(n, c);
    out.weights.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const double seed_mass = seeds.row(i).sum();
        if (seed_mass > 0.0) {
            out.pseudo_probs.row(i) = seeds.row(i) / seed_mass;
            out.weights[i] = 1.0;
            continue;
        }
        const double mass = f.row(i).sum();
        if (mass > 0.0)
            out.pseudo_probs.row(i) = f.row(i) / mass;
        else
            out.pseudo_probs.row(i).setConstant(1.0 / static_cast<double>(c));
        out.weights[i] = confidence_weight(out.pseudo_probs.row(i));
    }
    out.scores = std::move(f);
    return out;
}

Matrix label_propagate_closed_form(const SparseMatrix& s, const Matrix& seeds, double alpha) {
    check_inputs(s, seeds, alpha);
    const Index n = s.rows();
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - alpha * Eigen::MatrixXd(s);
    Eigen::MatrixXd rhs = (1.0 - alpha) * Eigen::MatrixXd(seeds);
    return a.partialPivLu().solve(rhs);
}

}  // namespace alcove

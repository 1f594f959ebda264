#include "tcomplete/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tcomplete/errors.hpp"

namespace tcomplete {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd pairwise_distances(const PointCloud& x, const PointCloud& y) {
    const int n = x.size();
    const int m = y.size();
    Eigen::MatrixXd d(n, m);
    for (int i = 0; i < n; ++i)
        d.row(i) = (y.pts.rowwise() - x.pts.row(i)).rowwise().norm().transpose();
    return d;
}

// Exact minimum-cost assignment via the O(n^3) shortest-augmenting-path
// method with dual potentials. Returns the column matched to each row.
std::vector<int> hungarian_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

// Epsilon-scaling auction (Bertsekas). Each scaling phase produces an
// assignment whose total cost exceeds the optimum by at most n*eps, i.e. the
// mean cost is within eps of optimal; phases stop once eps is small enough
// to guarantee a relative error below kEmdApproxRelTol.
std::vector<int> auction_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<int> row_to_col(n, -1);
    if (n == 1) {
        row_to_col[0] = 0;
        return row_to_col;
    }
    const double scale = std::max(cost.maxCoeff(), 1e-12);
    std::vector<double> price(n, 0.0);
    std::vector<int> col_to_row(n, -1);
    std::vector<int> pending;
    pending.reserve(n);
    double eps = scale / 4.0;
    while (true) {
        std::fill(row_to_col.begin(), row_to_col.end(), -1);
        std::fill(col_to_row.begin(), col_to_row.end(), -1);
        pending.clear();
        for (int i = 0; i < n; ++i) pending.push_back(i);
        while (!pending.empty()) {
            const int i = pending.back();
            pending.pop_back();
            double best = -kInf, second = -kInf;
            int best_j = -1;
            for (int j = 0; j < n; ++j) {
                const double value = -cost(i, j) - price[j];
                if (value > best) {
                    second = best;
                    best = value;
                    best_j = j;
                } else if (value > second) {
                    second = value;
                }
            }
            price[best_j] += (best - second) + eps;
            const int displaced = col_to_row[best_j];
            if (displaced >= 0) {
                row_to_col[displaced] = -1;
                pending.push_back(displaced);
            }
            col_to_row[best_j] = i;
            row_to_col[i] = best_j;
        }
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += cost(i, row_to_col[i]);
        mean /= n;
        // mean_cost - optimum <= eps, so eps <= 0.5*tol*mean bounds the
        // relative error by 0.5*tol / (1 - 0.5*tol) < tol.
        if (eps <= 0.5 * kEmdApproxRelTol * mean || eps < 1e-13 * scale) break;
        eps /= 5.0;
    }
    return row_to_col;
}

void check_emd_sizes(const PointCloud& x, const PointCloud& y) {
    if (x.empty() || y.empty()) throw EmptyInputError("emd: empty point cloud");
    if (x.size() != y.size())
        throw SizeError("emd: size mismatch (" + std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()) + ")");
}

double huber_value(double e, double delta) {
    return e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
}

}  // namespace

// ---------------------------------------------------------------------------
// Chamfer
// ---------------------------------------------------------------------------

double chamfer(const PointCloud& x, const PointCloud& y) {
    if (x.empty() || y.empty()) throw EmptyInputError("chamfer: empty point cloud");
    double fwd = 0.0, bwd = 0.0;
    for (int i = 0; i < x.size(); ++i)
        fwd += (y.pts.rowwise() - x.pts.row(i)).rowwise().squaredNorm().minCoeff();
    for (int j = 0; j < y.size(); ++j)
        bwd += (x.pts.rowwise() - y.pts.row(j)).rowwise().squaredNorm().minCoeff();
    return fwd / x.size() + bwd / y.size();
}

double chamfer_grad(const PointCloud& x, const PointCloud& y, PointMatrix& grad_x,
                    PointMatrix& grad_y) {
    if (x.empty() || y.empty()) throw EmptyInputError("chamfer: empty point cloud");
    grad_x = PointMatrix::Zero(x.size(), 3);
    grad_y = PointMatrix::Zero(y.size(), 3);
    double fwd = 0.0, bwd = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        int j = 0;
        fwd += (y.pts.rowwise() - x.pts.row(i)).rowwise().squaredNorm().minCoeff(&j);
        const Vec3 diff = (x.point(i) - y.point(j)) * (2.0 / x.size());
        grad_x.row(i) += diff.transpose();
        grad_y.row(j) -= diff.transpose();
    }
    for (int j = 0; j < y.size(); ++j) {
        int i = 0;
        bwd += (x.pts.rowwise() - y.pts.row(j)).rowwise().squaredNorm().minCoeff(&i);
        const Vec3 diff = (y.point(j) - x.point(i)) * (2.0 / y.size());
        grad_y.row(j) += diff.transpose();
        grad_x.row(i) -= diff.transpose();
    }
    return fwd / x.size() + bwd / y.size();
}

// ---------------------------------------------------------------------------
// Assignment distance
// ---------------------------------------------------------------------------

std::vector<int> emd_assignment(const PointCloud& x, const PointCloud& y, EmdMode mode) {
    check_emd_sizes(x, y);
    const Eigen::MatrixXd cost = pairwise_distances(x, y);
    const bool exact = mode == EmdMode::Exact || (mode == EmdMode::Auto && x.size() <= kEmdExactLimit);
    return exact ? hungarian_assignment(cost) : auction_assignment(cost);
}

double emd_cost_of_assignment(const PointCloud& x, const PointCloud& y,
                              const std::vector<int>& sigma) {
    check_emd_sizes(x, y);
    if (static_cast<int>(sigma.size()) != x.size())
        throw SizeError("emd: assignment length mismatch");
    double total = 0.0;
    for (int i = 0; i < x.size(); ++i) total += (x.point(i) - y.point(sigma[i])).norm();
    return total / x.size();
}

double emd(const PointCloud& x, const PointCloud& y, EmdMode mode) {
    return emd_cost_of_assignment(x, y, emd_assignment(x, y, mode));
}

double emd_grad(const PointCloud& x, const PointCloud& y, PointMatrix& grad_x,
                PointMatrix& grad_y, EmdMode mode) {
    const std::vector<int> sigma = emd_assignment(x, y, mode);
    grad_x = PointMatrix::Zero(x.size(), 3);
    grad_y = PointMatrix::Zero(y.size(), 3);
    double total = 0.0;
    const double inv_n = 1.0 / x.size();
    for (int i = 0; i < x.size(); ++i) {
        const Vec3 diff = x.point(i) - y.point(sigma[i]);
        const double d = diff.norm();
        total += d;
        if (d > 1e-15) {
            const Vec3 g = diff * (inv_n / d);
            grad_x.row(i) += g.transpose();
            grad_y.row(sigma[i]) -= g.transpose();
        }
    }
    return total * inv_n;
}

// ---------------------------------------------------------------------------
// Alignment, translation, smoothness
// ---------------------------------------------------------------------------

double alignment_loss(const std::array<PointCloud, 3>& aligned,
                      const std::array<PointCloud, 3>& gt_aligned, const LossWeights& w,
                      EmdMode mode) {
    for (std::size_t i = 0; i < 3; ++i) {
        if (aligned[i].size() != gt_aligned[i].size())
            throw SizeError("alignment_loss: resolution " + std::to_string(i) +
                            " size mismatch");
    }
    return emd(aligned[0], gt_aligned[0], mode) + w.lambda1 * emd(aligned[1], gt_aligned[1], mode) +
           w.lambda2 * emd(aligned[2], gt_aligned[2], mode);
}

double huber_translation(const std::vector<Vec3>& t_pred, const Vec3& t_gt, double delta) {
    double total = 0.0;
    for (const Vec3& t : t_pred) total += huber_value((t - t_gt).norm(), delta);
    return total;
}

double huber_translation_grad(const std::vector<Vec3>& t_pred, const Vec3& t_gt,
                              std::vector<Vec3>& grads, double delta) {
    grads.assign(t_pred.size(), Vec3::Zero());
    double total = 0.0;
    for (std::size_t i = 0; i < t_pred.size(); ++i) {
        const Vec3 err = t_pred[i] - t_gt;
        const double e = err.norm();
        total += huber_value(e, delta);
        if (e <= delta) {
            grads[i] = err;
        } else if (e > 1e-15) {
            grads[i] = err * (delta / e);
        }
    }
    return total;
}

double laplacian_loss(const PointCloud& p, const AdjacencyGraph& graph) {
    PointMatrix unused;
    // Share the full implementation; the gradient pass costs the same O(E).
    return laplacian_loss_grad(p, graph, unused);
}

double laplacian_loss_grad(const PointCloud& p, const AdjacencyGraph& graph, PointMatrix& grad) {
    if (graph.node_count != p.size())
        throw SizeError("laplacian_loss: graph does not cover the cloud");
    const int n = p.size();
    grad = PointMatrix::Zero(n, 3);
    if (graph.directed_edge_count() == 0) return 0.0;

    // Total directed edge length e, with degeneracy screening.
    double e = 0.0;
    for (int x = 0; x < n; ++x) {
        for (int y : graph.neighbors[x]) {
            const double d = (p.point(x) - p.point(y)).norm();
            if (d < 1e-12)
                throw DegeneracyError("laplacian_loss: coincident neighbours at point", x);
            e += d;
        }
    }

    // loss = (2/e) * H with H = sum_x |h_x|, h_x = sum_y (x-y)/|x-y|.
    double big_h = 0.0;
    PointMatrix grad_h = PointMatrix::Zero(n, 3);
    PointMatrix grad_e = PointMatrix::Zero(n, 3);
    for (int x = 0; x < n; ++x) {
        Vec3 h = Vec3::Zero();
        for (int y : graph.neighbors[x]) {
            const Vec3 diff = p.point(x) - p.point(y);
            const Vec3 u = diff / diff.norm();
            h += u;
            grad_e.row(x) += u.transpose();
            grad_e.row(y) -= u.transpose();
        }
        const double hn = h.norm();
        big_h += hn;
        if (hn < 1e-15) continue;  // symmetric neighbourhood: flat spot, zero term
        const Vec3 h_hat = h / hn;
        for (int y : graph.neighbors[x]) {
            const Vec3 diff = p.point(x) - p.point(y);
            const double d = diff.norm();
            const Vec3 u = diff / d;
            // d(h_x)/dx = (I - u u^T)/d per neighbour, applied to h_hat.
            const Vec3 w = (h_hat - u * u.dot(h_hat)) / d;
            grad_h.row(x) += w.transpose();
            grad_h.row(y) -= w.transpose();
        }
    }
    grad = (2.0 / e) * grad_h - (2.0 * big_h / (e * e)) * grad_e;
    return 2.0 * big_h / e;
}

LossReport total_loss(double emd_align, double huber, double cd_coarse, double cd_final,
                      double laplacian, const LossWeights& w) {
    LossReport r;
    r.emd_align = emd_align;
    r.huber = huber;
    r.cd_coarse = cd_coarse;
    r.cd_final = cd_final;
    r.laplacian = laplacian;
    r.total = w.alpha * emd_align + huber + w.beta * (cd_coarse + cd_final) + w.gamma * laplacian;
    return r;
}

// ---------------------------------------------------------------------------
// Temporal consistency
// ---------------------------------------------------------------------------

std::vector<std::vector<double>> sequence_consistency(const std::vector<PointCloud>& outputs,
                                                      int group) {
    if (group < 2) throw SizeError("sequence_consistency: group must be >= 2");
    const int k = static_cast<int>(outputs.size());
    if (k < group)
        throw SizeError("sequence_consistency: need at least " + std::to_string(group) +
                        " frames, got " + std::to_string(k));
    std::vector<std::vector<double>> result;
    for (int start = 0; start + group <= k; start += group) {
        std::vector<double> pairs;
        pairs.reserve(group - 1);
        for (int j = 0; j < group - 1; ++j)
            pairs.push_back(chamfer(outputs[start + j], outputs[start + j + 1]));
        result.push_back(std::move(pairs));
    }
    return result;
}

}  // namespace tcomplete

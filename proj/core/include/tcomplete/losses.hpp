#pragma once

#include <array>
#include <vector>

#include "tcomplete/geom.hpp"

namespace tcomplete {

// Weights of the combined training objective and its sub-terms.
struct LossWeights {
    double alpha = 1.0;         // multi-resolution assignment-distance term
    double beta = 100.0;        // chamfer terms (coarse + final)
    double gamma = 0.1;         // laplacian regularizer
    double lambda1 = 1.0 / 3.0; // half-resolution assignment weight
    double lambda2 = 1.0 / 3.0; // quarter-resolution assignment weight
    double huber_delta = 2.0;

    bool valid() const {
        return alpha >= 0 && beta >= 0 && gamma >= 0 && lambda1 >= 0 && lambda2 >= 0 &&
               huber_delta > 0;
    }
};

// One evaluated objective, split into its parts.
struct LossReport {
    double emd_align = 0.0;
    double huber = 0.0;
    double cd_coarse = 0.0;
    double cd_final = 0.0;
    double laplacian = 0.0;
    double total = 0.0;
};

// ---------------------------------------------------------------------------
// Chamfer distance
// ---------------------------------------------------------------------------

// Bi-directional mean squared nearest-neighbour distance:
//   (1/|X|) sum_x min_y |x-y|^2 + (1/|Y|) sum_y min_x |y-x|^2
double chamfer(const PointCloud& x, const PointCloud& y);

// Same value; also fills d(loss)/d(points) for both clouds.
double chamfer_grad(const PointCloud& x, const PointCloud& y, PointMatrix& grad_x,
                    PointMatrix& grad_y);

// ---------------------------------------------------------------------------
// Assignment distance (earth mover's)
// ---------------------------------------------------------------------------

enum class EmdMode {
    Auto,        // exact up to kEmdExactLimit points, approximate beyond
    Exact,       // optimal assignment (Hungarian), any size
    Approximate, // epsilon-scaling auction, relative error <= kEmdApproxRelTol
};

// Largest size Auto mode still solves exactly.
inline constexpr int kEmdExactLimit = 16;
// Documented relative tolerance of the approximate solver.
inline constexpr double kEmdApproxRelTol = 0.01;

// Bijection sigma with row i of x matched to row sigma[i] of y, minimizing
// (exactly or within kEmdApproxRelTol) the total Euclidean matching cost.
std::vector<int> emd_assignment(const PointCloud& x, const PointCloud& y,
                                EmdMode mode = EmdMode::Auto);

// Mean Euclidean distance under that bijection.
double emd(const PointCloud& x, const PointCloud& y, EmdMode mode = EmdMode::Auto);

// Mean matching cost of a given bijection (no optimization).
double emd_cost_of_assignment(const PointCloud& x, const PointCloud& y,
                              const std::vector<int>& sigma);

// emd() value plus gradients, differentiating through the optimal assignment
// held fixed (it is locally constant away from ties).
double emd_grad(const PointCloud& x, const PointCloud& y, PointMatrix& grad_x,
                PointMatrix& grad_y, EmdMode mode = EmdMode::Auto);

// ---------------------------------------------------------------------------
// Alignment, translation, smoothness
// ---------------------------------------------------------------------------

// EMD(res 0) + lambda1*EMD(res 1) + lambda2*EMD(res 2) over three aligned /
// ground-truth cloud pairs at full, half and quarter resolution.
double alignment_loss(const std::array<PointCloud, 3>& aligned,
                      const std::array<PointCloud, 3>& gt_aligned, const LossWeights& w,
                      EmdMode mode = EmdMode::Auto);

// Sum over predicted translations of Huber(|T_i - T_gt|; delta), with
// Huber(e) = 0.5 e^2 for e <= delta, else delta*(e - 0.5*delta).
double huber_translation(const std::vector<Vec3>& t_pred, const Vec3& t_gt, double delta = 2.0);
double huber_translation_grad(const std::vector<Vec3>& t_pred, const Vec3& t_gt,
                              std::vector<Vec3>& grads, double delta = 2.0);

// Edge-length-normalized umbrella smoothness over a neighbour graph:
//   e    = sum over directed edges (x,y) of |x-y|
//   loss = sum_x | sum_{y in A(x)} 2(x-y) / (e |x-y|) |
// Rigid motions leave it unchanged; uniform scaling by s divides it by s.
double laplacian_loss(const PointCloud& p, const AdjacencyGraph& graph);
double laplacian_loss_grad(const PointCloud& p, const AdjacencyGraph& graph, PointMatrix& grad);

// total = alpha*emd_align + huber + beta*(cd_coarse + cd_final) + gamma*laplacian
LossReport total_loss(double emd_align, double huber, double cd_coarse, double cd_final,
                      double laplacian, const LossWeights& w);

// ---------------------------------------------------------------------------
// Evaluation-side temporal consistency
// ---------------------------------------------------------------------------

// Splits the outputs into disjoint groups of `group` consecutive frames and
// returns, per group, the chamfer distances of consecutive pairs
// ((1,2),(2,3),...) — `group-1` raw values each. Trailing frames that do not
// fill a group are ignored.
std::vector<std::vector<double>> sequence_consistency(const std::vector<PointCloud>& outputs,
                                                      int group = 5);

}  // namespace tcomplete

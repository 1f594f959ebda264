#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "tcomplete/geom.hpp"
#include "tcomplete/losses.hpp"

namespace tcomplete::ad {

using Mat = Eigen::MatrixXd;

// Reverse-mode automatic differentiation over dense float64 matrices.
//
// A Tape records one forward computation as a sequence of nodes; backward()
// replays it in reverse, accumulating adjoints. Handles are plain ints (the
// node index), so composite layers simply pass ints around. The tape owns all
// storage; clear() recycles it between steps.
//
// Index-producing decisions (sampling, grouping, assignments) are made on
// concrete values and enter the tape as fixed routing — the standard
// treatment for point networks, where such choices are locally constant.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    int leaf(Mat value);

    const Mat& value(int id) const { return nodes_[id].value; }
    const Mat& grad(int id) const { return nodes_[id].grad; }
    int rows(int id) const { return static_cast<int>(nodes_[id].value.rows()); }
    int cols(int id) const { return static_cast<int>(nodes_[id].value.cols()); }
    std::size_t node_count() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Seeds d(root)/d(root) = 1 (root must be 1x1) and runs all recorded
    // backward steps in reverse creation order.
    void backward(int root);

    // ----- arithmetic -----
    int add(int a, int b);
    int sub(int a, int b);
    int scale(int a, double s);
    int hadamard(int a, int b);
    int matmul(int a, int b);
    int transpose(int a);
    int add_rowvec(int a, int r);  // (n,m) + broadcast (1,m)
    int tile_rows(int r, int n);   // (1,m) -> n copies
    int scale_by(int a, int s);    // matrix times 1x1 node
    int pow_scalar(int a, double p);

    // ----- nonlinearities -----
    int relu(int a);
    int tanh_op(int a);
    int sigmoid(int a);

    // ----- reductions -----
    int sum(int a);                      // -> 1x1
    int dot(int a, int b);               // flattened inner product -> 1x1
    int colwise_max(int a);              // (n,m) -> (1,m), first max wins
    int colwise_mean(int a);             // (n,m) -> (1,m)
    int rowblock_max(int a, int block);  // (n*block,m) -> (n,m) per-block max
    int rowwise_norm(int a);             // (n,m) -> (n,1) Euclidean

    // ----- shape & routing -----
    int concat_cols(int a, int b);
    int concat_rows(int a, int b);
    int gather_rows(int a, std::vector<int> idx);
    int slice_cols(int a, int start, int len);
    int rows_from_flat(int a, int cols);  // (1,n*cols) -> (n,cols), row-major

    // ----- geometry -----
    int cross3(int a, int b);  // (1,3) x (1,3)
    // Row i = mean of rows over graph neighbours of i.
    int graph_mean(int a, const AdjacencyGraph& g);

    // ----- loss heads (analytic gradients cached at forward time) -----
    int chamfer_pair(int x, int y);
    int emd_pair(int x, int y, EmdMode mode = EmdMode::Auto);
    int laplacian(int x, const AdjacencyGraph& g);
    int huber_rows(int x, const Vec3& t_gt, double delta);

private:
    struct Node {
        Mat value;
        Mat grad;
        std::function<void()> back;  // empty for leaves
    };

    int push(Mat value, std::function<void()> back = {});
    Mat& grad_ref(int id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
};

}  // namespace tcomplete::ad

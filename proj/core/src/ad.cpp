#include "tcomplete/ad.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "tcomplete/errors.hpp"

namespace tcomplete::ad {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw SizeError(std::string("autodiff: ") + what);
}

}  // namespace

int Tape::push(Mat value, std::function<void()> back) {
    nodes_.push_back(Node{std::move(value), Mat(), std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Mat value) { return push(std::move(value)); }

void Tape::backward(int root) {
    require(root >= 0 && root < static_cast<int>(nodes_.size()), "backward root out of range");
    require(nodes_[root].value.size() == 1, "backward root must be scalar");
    for (Node& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    nodes_[root].grad(0, 0) = 1.0;
    for (int i = root; i >= 0; --i)
        if (nodes_[i].back) nodes_[i].back();
}

// ---------------------------------------------------------------------------
// Arithmetic
// ---------------------------------------------------------------------------

int Tape::add(int a, int b) {
    require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
            "add shape mismatch");
    const int out = push(value(a) + value(b));
    nodes_[out].back = [this, out, a, b] {
        grad_ref(a) += grad(out);
        grad_ref(b) += grad(out);
    };
    return out;
}

int Tape::sub(int a, int b) {
    require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
            "sub shape mismatch");
    const int out = push(value(a) - value(b));
    nodes_[out].back = [this, out, a, b] {
        grad_ref(a) += grad(out);
        grad_ref(b) -= grad(out);
    };
    return out;
}

int Tape::scale(int a, double s) {
    const int out = push(value(a) * s);
    nodes_[out].back = [this, out, a, s] { grad_ref(a) += grad(out) * s; };
    return out;
}

int Tape::hadamard(int a, int b) {
    require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
            "hadamard shape mismatch");
    const int out = push(value(a).cwiseProduct(value(b)));
    nodes_[out].back = [this, out, a, b] {
        grad_ref(a) += grad(out).cwiseProduct(value(b));
        grad_ref(b) += grad(out).cwiseProduct(value(a));
    };
    return out;
}

int Tape::matmul(int a, int b) {
    require(value(a).cols() == value(b).rows(), "matmul inner dimension mismatch");
    const int out = push(value(a) * value(b));
    nodes_[out].back = [this, out, a, b] {
        grad_ref(a) += grad(out) * value(b).transpose();
        grad_ref(b) += value(a).transpose() * grad(out);
    };
    return out;
}

int Tape::transpose(int a) {
    const int out = push(value(a).transpose());
    nodes_[out].back = [this, out, a] { grad_ref(a) += grad(out).transpose(); };
    return out;
}

int Tape::add_rowvec(int a, int r) {
    require(value(r).rows() == 1 && value(r).cols() == value(a).cols(),
            "add_rowvec needs a matching row vector");
    Mat v = value(a);
    v.rowwise() += value(r).row(0);
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, a, r] {
        grad_ref(a) += grad(out);
        grad_ref(r) += grad(out).colwise().sum();
    };
    return out;
}

int Tape::tile_rows(int r, int n) {
    require(value(r).rows() == 1, "tile_rows needs a row vector");
    require(n >= 1, "tile_rows needs n >= 1");
    const int out = push(value(r).replicate(n, 1));
    nodes_[out].back = [this, out, r] { grad_ref(r) += grad(out).colwise().sum(); };
    return out;
}

int Tape::scale_by(int a, int s) {
    require(value(s).size() == 1, "scale_by needs a scalar node");
    const int out = push(value(a) * value(s)(0, 0));
    nodes_[out].back = [this, out, a, s] {
        grad_ref(a) += grad(out) * value(s)(0, 0);
        grad_ref(s)(0, 0) += grad(out).cwiseProduct(value(a)).sum();
    };
    return out;
}

int Tape::pow_scalar(int a, double p) {
    const int out = push(value(a).array().pow(p).matrix());
    nodes_[out].back = [this, out, a, p] {
        grad_ref(a) +=
            grad(out).cwiseProduct((value(a).array().pow(p - 1.0) * p).matrix());
    };
    return out;
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

int Tape::relu(int a) {
    const int out = push(value(a).cwiseMax(0.0));
    nodes_[out].back = [this, out, a] {
        grad_ref(a) += grad(out).cwiseProduct(
            (value(a).array() > 0.0).cast<double>().matrix());
    };
    return out;
}

int Tape::tanh_op(int a) {
    const int out = push(value(a).array().tanh().matrix());
    nodes_[out].back = [this, out, a] {
        grad_ref(a) += grad(out).cwiseProduct(
            (1.0 - value(out).array().square()).matrix());
    };
    return out;
}

int Tape::sigmoid(int a) {
    const int out = push((1.0 / (1.0 + (-value(a)).array().exp())).matrix());
    nodes_[out].back = [this, out, a] {
        grad_ref(a) += grad(out).cwiseProduct(
            (value(out).array() * (1.0 - value(out).array())).matrix());
    };
    return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

int Tape::sum(int a) {
    Mat v(1, 1);
    v(0, 0) = value(a).sum();
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, a] {
        grad_ref(a).array() += grad(out)(0, 0);
    };
    return out;
}

int Tape::dot(int a, int b) {
    require(value(a).size() == value(b).size(), "dot size mismatch");
    Mat v(1, 1);
    v(0, 0) = value(a).cwiseProduct(value(b)).sum();
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, a, b] {
        grad_ref(a) += grad(out)(0, 0) * value(b);
        grad_ref(b) += grad(out)(0, 0) * value(a);
    };
    return out;
}

int Tape::colwise_max(int a) {
    const int n = rows(a), m = cols(a);
    require(n >= 1, "colwise_max on empty matrix");
    Mat v(1, m);
    std::vector<int> arg(m);
    for (int j = 0; j < m; ++j) {
        int best = 0;
        for (int i = 1; i < n; ++i)
            if (value(a)(i, j) > value(a)(best, j)) best = i;
        arg[j] = best;
        v(0, j) = value(a)(best, j);
    }
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, a, arg = std::move(arg)] {
        for (int j = 0; j < static_cast<int>(arg.size()); ++j)
            grad_ref(a)(arg[j], j) += grad(out)(0, j);
    };
    return out;
}

int Tape::colwise_mean(int a) {
    const int n = rows(a);
    require(n >= 1, "colwise_mean on empty matrix");
    const int out = push(value(a).colwise().mean());
    nodes_[out].back = [this, out, a, n] {
        grad_ref(a) += grad(out).replicate(n, 1) / n;
    };
    return out;
}

int Tape::rowblock_max(int a, int block) {
    const int n = rows(a), m = cols(a);
    require(block >= 1 && n % block == 0, "rowblock_max needs rows divisible by block");
    const int groups = n / block;
    Mat v(groups, m);
    std::vector<int> arg(static_cast<std::size_t>(groups) * m);
    for (int g = 0; g < groups; ++g)
        for (int j = 0; j < m; ++j) {
            int best = g * block;
            for (int i = g * block + 1; i < (g + 1) * block; ++i)
                if (value(a)(i, j) > value(a)(best, j)) best = i;
            arg[static_cast<std::size_t>(g) * m + j] = best;
            v(g, j) = value(a)(best, j);
        }
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, a, m, groups, arg = std::move(arg)] {
        for (int g = 0; g < groups; ++g)
            for (int j = 0; j < m; ++j)
                grad_ref(a)(arg[static_cast<std::size_t>(g) * m + j], j) += grad(out)(g, j);
    };
    return out;
}

int Tape::rowwise_norm(int a) {
    const int out = push(value(a).rowwise().norm());
    nodes_[out].back = [this, out, a] {
        for (int i = 0; i < rows(a); ++i) {
            const double norm = value(out)(i, 0);
            if (norm > 1e-15) grad_ref(a).row(i) += (grad(out)(i, 0) / norm) * value(a).row(i);
        }
    };
    return out;
}

// ---------------------------------------------------------------------------
// Shape & routing
// ---------------------------------------------------------------------------

int Tape::concat_cols(int a, int b) {
    require(value(a).rows() == value(b).rows(), "concat_cols row mismatch");
    Mat v(value(a).rows(), value(a).cols() + value(b).cols());
    v << value(a), value(b);
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, a, b] {
        grad_ref(a) += grad(out).leftCols(cols(a));
        grad_ref(b) += grad(out).rightCols(cols(b));
    };
    return out;
}

int Tape::concat_rows(int a, int b) {
    require(value(a).cols() == value(b).cols(), "concat_rows column mismatch");
    Mat v(value(a).rows() + value(b).rows(), value(a).cols());
    v << value(a), value(b);
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, a, b] {
        grad_ref(a) += grad(out).topRows(rows(a));
        grad_ref(b) += grad(out).bottomRows(rows(b));
    };
    return out;
}

int Tape::gather_rows(int a, std::vector<int> idx) {
    Mat v(static_cast<int>(idx.size()), value(a).cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        require(idx[k] >= 0 && idx[k] < rows(a), "gather_rows index out of range");
        v.row(static_cast<int>(k)) = value(a).row(idx[k]);
    }
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, a, idx = std::move(idx)] {
        for (std::size_t k = 0; k < idx.size(); ++k)
            grad_ref(a).row(idx[k]) += grad(out).row(static_cast<int>(k));
    };
    return out;
}

int Tape::slice_cols(int a, int start, int len) {
    require(start >= 0 && len >= 0 && start + len <= cols(a), "slice_cols out of range");
    const int out = push(value(a).middleCols(start, len));
    nodes_[out].back = [this, out, a, start, len] {
        grad_ref(a).middleCols(start, len) += grad(out);
    };
    return out;
}

int Tape::rows_from_flat(int a, int out_cols) {
    require(value(a).rows() == 1, "rows_from_flat needs a row vector");
    require(out_cols >= 1 && cols(a) % out_cols == 0, "rows_from_flat size mismatch");
    const int out_rows = cols(a) / out_cols;
    Mat v(out_rows, out_cols);
    for (int i = 0; i < out_rows; ++i)
        for (int j = 0; j < out_cols; ++j) v(i, j) = value(a)(0, i * out_cols + j);
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, a, out_rows, out_cols] {
        for (int i = 0; i < out_rows; ++i)
            for (int j = 0; j < out_cols; ++j)
                grad_ref(a)(0, i * out_cols + j) += grad(out)(i, j);
    };
    return out;
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

int Tape::cross3(int a, int b) {
    require(value(a).rows() == 1 && value(a).cols() == 3 && value(b).rows() == 1 &&
                value(b).cols() == 3,
            "cross3 needs 1x3 operands");
    const Vec3 av = value(a).row(0).transpose();
    const Vec3 bv = value(b).row(0).transpose();
    Mat v(1, 3);
    v.row(0) = av.cross(bv).transpose();
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, a, b] {
        const Vec3 av = value(a).row(0).transpose();
        const Vec3 bv = value(b).row(0).transpose();
        const Vec3 gv = grad(out).row(0).transpose();
        grad_ref(a).row(0) += bv.cross(gv).transpose();
        grad_ref(b).row(0) += gv.cross(av).transpose();
    };
    return out;
}

int Tape::graph_mean(int a, const AdjacencyGraph& g) {
    require(g.node_count == rows(a), "graph_mean node count mismatch");
    Mat v = Mat::Zero(rows(a), cols(a));
    for (int i = 0; i < g.node_count; ++i) {
        require(!g.neighbors[i].empty(), "graph_mean needs non-empty neighbourhoods");
        for (int j : g.neighbors[i]) v.row(i) += value(a).row(j);
        v.row(i) /= static_cast<double>(g.neighbors[i].size());
    }
    const int out = push(std::move(v));
    // Copy the lists: the graph need not outlive the tape.
    nodes_[out].back = [this, out, a, nb = g.neighbors] {
        for (std::size_t i = 0; i < nb.size(); ++i) {
            const double inv = 1.0 / static_cast<double>(nb[i].size());
            for (int j : nb[i]) grad_ref(a).row(j) += grad(out).row(static_cast<int>(i)) * inv;
        }
    };
    return out;
}

// ---------------------------------------------------------------------------
// Loss heads
// ---------------------------------------------------------------------------

int Tape::chamfer_pair(int x, int y) {
    require(cols(x) == 3 && cols(y) == 3, "chamfer_pair needs (n,3) clouds");
    PointMatrix gx, gy;
    const double loss =
        chamfer_grad(PointCloud(value(x)), PointCloud(value(y)), gx, gy);
    Mat v(1, 1);
    v(0, 0) = loss;
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, x, y, gx = std::move(gx), gy = std::move(gy)] {
        grad_ref(x) += grad(out)(0, 0) * gx;
        grad_ref(y) += grad(out)(0, 0) * gy;
    };
    return out;
}

int Tape::emd_pair(int x, int y, EmdMode mode) {
    require(cols(x) == 3 && cols(y) == 3, "emd_pair needs (n,3) clouds");
    PointMatrix gx, gy;
    const double loss = emd_grad(PointCloud(value(x)), PointCloud(value(y)), gx, gy, mode);
    Mat v(1, 1);
    v(0, 0) = loss;
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, x, y, gx = std::move(gx), gy = std::move(gy)] {
        grad_ref(x) += grad(out)(0, 0) * gx;
        grad_ref(y) += grad(out)(0, 0) * gy;
    };
    return out;
}

int Tape::laplacian(int x, const AdjacencyGraph& g) {
    require(cols(x) == 3, "laplacian needs an (n,3) cloud");
    PointMatrix gx;
    const double loss = laplacian_loss_grad(PointCloud(value(x)), g, gx);
    Mat v(1, 1);
    v(0, 0) = loss;
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, x, gx = std::move(gx)] {
        grad_ref(x) += grad(out)(0, 0) * gx;
    };
    return out;
}

int Tape::huber_rows(int x, const Vec3& t_gt, double delta) {
    require(cols(x) == 3, "huber_rows needs (k,3) translations");
    std::vector<Vec3> preds(rows(x));
    for (int i = 0; i < rows(x); ++i) preds[i] = value(x).row(i).transpose();
    std::vector<Vec3> grads;
    const double loss = huber_translation_grad(preds, t_gt, grads, delta);
    Mat v(1, 1);
    v(0, 0) = loss;
    const int out = push(std::move(v));
    nodes_[out].back = [this, out, x, grads = std::move(grads)] {
        for (std::size_t i = 0; i < grads.size(); ++i)
            grad_ref(x).row(static_cast<int>(i)) += grad(out)(0, 0) * grads[i].transpose();
    };
    return out;
}

}  // namespace tcomplete::ad

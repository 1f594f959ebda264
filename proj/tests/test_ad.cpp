#include <cmath>
#include <functional>

#include "doctest.h"
#include "helpers.hpp"
#include "tcomplete/ad.hpp"
#include "tcomplete/errors.hpp"

using namespace tcomplete;
using ad::Mat;
using ad::Tape;
using tcomplete::testing::random_cloud;

namespace {

Mat random_mat(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
    return m;
}

// Central finite differences of a freshly rebuilt forward pass vs the tape's
// reverse pass, relative to the gradient norm.
void check_gradient(const Mat& x0, const std::function<int(Tape&, int)>& build,
                    double tol = 1e-6) {
    Tape tape;
    const int x = tape.leaf(x0);
    const int root = build(tape, x);
    REQUIRE(tape.value(root).size() == 1);
    tape.backward(root);
    const Mat analytic = tape.grad(x);

    const double h = 1e-6;
    Mat fd(x0.rows(), x0.cols());
    for (int i = 0; i < x0.rows(); ++i)
        for (int j = 0; j < x0.cols(); ++j) {
            Mat up = x0, down = x0;
            up(i, j) += h;
            down(i, j) -= h;
            Tape tu, td;
            fd(i, j) = (tu.value(build(tu, tu.leaf(up)))(0, 0) -
                        td.value(build(td, td.leaf(down)))(0, 0)) /
                       (2 * h);
        }
    const double denom = std::max(analytic.norm(), 1e-10);
    CHECK((analytic - fd).norm() / denom < tol);
}

}  // namespace

TEST_SUITE_BEGIN("ad");

TEST_CASE("arithmetic ops forward values") {
    Tape t;
    Mat a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 5, 6, 7, 8;
    const int ia = t.leaf(a), ib = t.leaf(b);
    CHECK(t.value(t.add(ia, ib))(1, 1) == 12.0);
    CHECK(t.value(t.sub(ia, ib))(0, 0) == -4.0);
    CHECK(t.value(t.hadamard(ia, ib))(0, 1) == 12.0);
    CHECK(t.value(t.matmul(ia, ib))(0, 0) == 19.0);
    CHECK(t.value(t.scale(ia, -2.0))(1, 0) == -6.0);
    CHECK(t.value(t.transpose(ia))(0, 1) == 3.0);
    CHECK(t.value(t.sum(ia))(0, 0) == 10.0);
    CHECK(t.value(t.dot(ia, ib))(0, 0) == 70.0);
}

TEST_CASE("gradients of elementwise and linear ops") {
    Rng rng(201);
    const Mat x = random_mat(rng, 3, 4);
    const Mat c = random_mat(rng, 3, 4);
    const Mat w = random_mat(rng, 4, 5);

    check_gradient(x, [&](Tape& t, int id) {
        return t.sum(t.hadamard(t.add(id, t.leaf(c)), t.sub(id, t.leaf(c))));
    });
    check_gradient(x, [&](Tape& t, int id) {
        return t.sum(t.matmul(t.scale(id, 1.7), t.leaf(w)));
    });
    check_gradient(x, [&](Tape& t, int id) {
        return t.sum(t.matmul(t.leaf(w.transpose()), t.transpose(id)));
    });
    check_gradient(x, [&](Tape& t, int id) { return t.dot(id, id); });
}

TEST_CASE("gradients of broadcast ops") {
    Rng rng(203);
    const Mat x = random_mat(rng, 4, 3);
    const Mat r = random_mat(rng, 1, 3);

    check_gradient(x, [&](Tape& t, int id) { return t.sum(t.add_rowvec(id, t.leaf(r))); });
    check_gradient(r, [&](Tape& t, int id) {
        return t.sum(t.hadamard(t.add_rowvec(t.leaf(x), id), t.leaf(x)));
    });
    check_gradient(r, [&](Tape& t, int id) {
        return t.sum(t.hadamard(t.tile_rows(id, 4), t.leaf(x)));
    });

    const Mat s = random_mat(rng, 1, 1, 0.5, 2.0);
    check_gradient(x, [&](Tape& t, int id) { return t.sum(t.scale_by(id, t.leaf(s))); });
    check_gradient(s, [&](Tape& t, int id) { return t.sum(t.scale_by(t.leaf(x), id)); });
}

TEST_CASE("gradients of nonlinearities") {
    Rng rng(205);
    Mat x = random_mat(rng, 3, 5, -2.0, 2.0);
    // Keep relu away from its kink.
    for (int i = 0; i < x.size(); ++i)
        if (std::abs(x(i / 5, i % 5)) < 0.05) x(i / 5, i % 5) += 0.1;

    check_gradient(x, [&](Tape& t, int id) { return t.sum(t.relu(id)); });
    check_gradient(x, [&](Tape& t, int id) { return t.sum(t.tanh_op(id)); });
    check_gradient(x, [&](Tape& t, int id) { return t.sum(t.sigmoid(id)); });
    const Mat pos = random_mat(rng, 3, 3, 0.5, 2.0);
    check_gradient(pos, [&](Tape& t, int id) { return t.sum(t.pow_scalar(id, -0.5)); });
    check_gradient(pos, [&](Tape& t, int id) { return t.sum(t.pow_scalar(id, 3.0)); });
}

TEST_CASE("gradients of reductions") {
    Rng rng(207);
    const Mat x = random_mat(rng, 6, 4);
    const Mat weight = random_mat(rng, 1, 4);

    auto weighted = [&](Tape& t, int reduced) {
        return t.sum(t.hadamard(reduced, t.tile_rows(t.leaf(weight), t.rows(reduced))));
    };
    check_gradient(x, [&](Tape& t, int id) { return weighted(t, t.colwise_max(id)); });
    check_gradient(x, [&](Tape& t, int id) { return weighted(t, t.colwise_mean(id)); });
    check_gradient(x, [&](Tape& t, int id) { return weighted(t, t.rowblock_max(id, 2)); });
    check_gradient(x, [&](Tape& t, int id) { return t.sum(t.rowwise_norm(id)); });
}

TEST_CASE("rowblock max reduces each block independently") {
    Tape t;
    Mat x(4, 2);
    x << 1, 8, 3, 2, -5, 0, -1, 4;
    const int out = t.rowblock_max(t.leaf(x), 2);
    Mat expect(2, 2);
    expect << 3, 8, -1, 4;
    CHECK((t.value(out) - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradients of shape and routing ops") {
    Rng rng(209);
    const Mat x = random_mat(rng, 5, 4);
    const Mat other = random_mat(rng, 5, 2);
    const Mat tail = random_mat(rng, 3, 4);
    const Mat mask_a = random_mat(rng, 5, 6);
    const Mat mask_b = random_mat(rng, 8, 4);
    const Mat mask_c = random_mat(rng, 5, 4);
    const Mat mask_d = random_mat(rng, 4, 3);

    check_gradient(x, [&](Tape& t, int id) {
        return t.sum(t.hadamard(t.concat_cols(id, t.leaf(other)), t.leaf(mask_a)));
    });
    check_gradient(x, [&](Tape& t, int id) {
        return t.sum(t.hadamard(t.concat_rows(id, t.leaf(tail)), t.leaf(mask_b)));
    });
    // Duplicate gather indices must scatter-add.
    check_gradient(x, [&](Tape& t, int id) {
        return t.sum(t.hadamard(t.gather_rows(id, {0, 2, 2, 4, 0}), t.leaf(mask_c)));
    });
    check_gradient(x, [&](Tape& t, int id) { return t.sum(t.slice_cols(id, 1, 2)); });

    const Mat flat = random_mat(rng, 1, 12);
    check_gradient(flat, [&](Tape& t, int id) {
        return t.sum(t.hadamard(t.rows_from_flat(id, 3), t.leaf(mask_d)));
    });
}

TEST_CASE("rows_from_flat unflattens row-major") {
    Tape t;
    Mat flat(1, 6);
    flat << 1, 2, 3, 4, 5, 6;
    const Mat v = t.value(t.rows_from_flat(t.leaf(flat), 3));
    CHECK(v(0, 0) == 1.0);
    CHECK(v(0, 2) == 3.0);
    CHECK(v(1, 0) == 4.0);
    CHECK(v(1, 2) == 6.0);
}

TEST_CASE("gradients of cross product and graph mean") {
    Rng rng(211);
    const Mat a = random_mat(rng, 1, 3);
    const Mat b = random_mat(rng, 1, 3);
    const Mat mask3 = random_mat(rng, 1, 3);
    check_gradient(a, [&](Tape& t, int id) {
        return t.sum(t.hadamard(t.cross3(id, t.leaf(b)), t.leaf(mask3)));
    });
    check_gradient(b, [&](Tape& t, int id) {
        return t.sum(t.hadamard(t.cross3(t.leaf(a), id), t.leaf(mask3)));
    });

    const PointCloud cloud = random_cloud(rng, 12);
    const AdjacencyGraph g = knn_adjacency(cloud, 3);
    const Mat feats = random_mat(rng, 12, 5);
    const Mat mask = random_mat(rng, 12, 5);
    check_gradient(feats, [&](Tape& t, int id) {
        return t.sum(t.hadamard(t.graph_mean(id, g), t.leaf(mask)));
    });
}

TEST_CASE("loss heads differentiate through the tape") {
    Rng rng(213);
    const PointCloud x = random_cloud(rng, 10);
    const PointCloud y = random_cloud(rng, 10);
    const AdjacencyGraph g = knn_adjacency(x, 3);
    const Vec3 t_gt(0.3, -0.1, 0.2);

    check_gradient(x.pts, [&](Tape& t, int id) { return t.chamfer_pair(id, t.leaf(y.pts)); },
                   1e-4);
    check_gradient(y.pts, [&](Tape& t, int id) { return t.chamfer_pair(t.leaf(x.pts), id); },
                   1e-4);
    check_gradient(
        x.pts, [&](Tape& t, int id) { return t.emd_pair(id, t.leaf(y.pts), EmdMode::Exact); },
        1e-4);
    check_gradient(x.pts, [&](Tape& t, int id) { return t.laplacian(id, g); }, 1e-4);

    const Mat preds = random_mat(rng, 3, 3, -2.5, 2.5);
    check_gradient(preds, [&](Tape& t, int id) { return t.huber_rows(id, t_gt, 2.0); }, 1e-4);
}

TEST_CASE("composed pipeline matches finite differences end to end") {
    // A miniature per-point network: shared linear layer, tanh, global max
    // pool, then mixed with a gathered subset and squashed to a scalar.
    Rng rng(215);
    const Mat pts = random_mat(rng, 8, 3);
    const Mat w1 = random_mat(rng, 3, 6);
    const Mat b1 = random_mat(rng, 1, 6);
    const Mat w2 = random_mat(rng, 6, 3);
    const Mat w3 = random_mat(rng, 6, 3);

    check_gradient(pts, [&](Tape& t, int id) {
        const int hidden = t.tanh_op(t.add_rowvec(t.matmul(id, t.leaf(w1)), t.leaf(b1)));
        const int pooled = t.colwise_max(hidden);
        const int offsets = t.matmul(hidden, t.leaf(w2));
        const int moved = t.add(id, offsets);
        const int subset = t.gather_rows(moved, {1, 3, 5});
        const int att = t.sigmoid(t.matmul(pooled, t.leaf(w3)));
        const int scaled = t.hadamard(subset, t.tile_rows(att, 3));
        return t.sum(t.rowwise_norm(scaled));
    });
    check_gradient(w1, [&](Tape& t, int id) {
        const int hidden = t.tanh_op(t.add_rowvec(t.matmul(t.leaf(pts), id), t.leaf(b1)));
        return t.sum(t.colwise_max(hidden));
    });
}

TEST_CASE("backward requires a scalar root") {
    Tape t;
    Rng rng(217);
    const int id = t.leaf(random_mat(rng, 2, 2));
    CHECK_THROWS_AS(t.backward(id), SizeError);
}

TEST_SUITE_END();

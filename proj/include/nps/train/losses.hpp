#pragma once

#include "nps/autodiff/ops.hpp"
#include "nps/train/grid_batch.hpp"

#include <stdexcept>
#include <vector>

namespace nps::train {

// Mean of |pred - obs| over entries whose mask is nonzero. `mask` is either
// the shape of `pred` or one column broadcast across channels.
template <class T>
ad::Tensor<T> loss_rec(ad::Tape<T>& tape, const ad::Tensor<T>& pred, const ad::Tensor<T>& obs,
                       const ad::Tensor<T>& mask)
{
    if (pred.rows() != obs.rows() || pred.cols() != obs.cols())
        throw ad::ShapeError("loss_rec: prediction " + ad::shape_str(pred.shape()) +
                             " vs observation " + ad::shape_str(obs.shape()));
    if (mask.rows() != pred.rows() || (mask.cols() != 1 && mask.cols() != pred.cols()))
        throw ad::ShapeError("loss_rec: mask " + ad::shape_str(mask.shape()) + " does not fit " +
                             ad::shape_str(pred.shape()));
    double active = 0.0;
    for (T m : mask.data())
        active += m != T(0) ? 1.0 : 0.0;
    if (mask.cols() == 1)
        active *= static_cast<double>(pred.cols());
    if (active == 0.0)
        throw std::invalid_argument("loss_rec: mask selects no entries");

    auto err = ad::mul(tape, ad::abs(tape, ad::sub(tape, pred, obs)), mask);
    return ad::scale(tape, ad::sum(tape, err), static_cast<T>(1.0 / active));
}

// Depth-derived unit normals for the pixels of `batch` that have at least one
// horizontal and one vertical neighbour. Derivatives are central where both
// neighbours exist, one-sided otherwise, in depth units per pixel. Under the
// internal frame the camera-facing normal of z(x, y) is (z_x, z_y, -1).
template <class T>
struct DepthNormals {
    std::vector<std::size_t> valid;  // batch indices
    ad::Tensor<T> normals;           // [valid, 3]
};

template <class T>
DepthNormals<T> depth_normals(ad::Tape<T>& tape, const ad::Tensor<T>& depth, const GridBatch& batch)
{
    DepthNormals<T> out;
    std::vector<std::size_t> xp, xm, yp, ym;
    std::vector<T> inv_dx, inv_dy;
    const double step = static_cast<double>(batch.spacing);
    auto pick = [&](std::ptrdiff_t minus, std::ptrdiff_t plus, std::size_t self, std::size_t& lo,
                    std::size_t& hi, double& span) {
        if (minus >= 0 && plus >= 0) {
            lo = std::size_t(minus), hi = std::size_t(plus), span = 2.0 * step;
            return true;
        }
        if (plus >= 0) {
            lo = self, hi = std::size_t(plus), span = step;
            return true;
        }
        if (minus >= 0) {
            lo = std::size_t(minus), hi = self, span = step;
            return true;
        }
        return false;
    };
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::size_t xl, xh, yl, yh;
        double sx, sy;
        if (!pick(batch.left[i], batch.right[i], i, xl, xh, sx) || !pick(batch.up[i], batch.down[i], i, yl, yh, sy))
            continue;
        out.valid.push_back(i);
        xm.push_back(xl), xp.push_back(xh), inv_dx.push_back(static_cast<T>(1.0 / sx));
        ym.push_back(yl), yp.push_back(yh), inv_dy.push_back(static_cast<T>(1.0 / sy));
    }
    const auto v = out.valid.size();
    if (v == 0)
        return out;
    auto zx = ad::mul(tape, ad::sub(tape, ad::gather_rows(tape, depth, xp), ad::gather_rows(tape, depth, xm)),
                      ad::Tensor<T>(ad::Shape{v, 1}, std::move(inv_dx)));
    auto zy = ad::mul(tape, ad::sub(tape, ad::gather_rows(tape, depth, yp), ad::gather_rows(tape, depth, ym)),
                      ad::Tensor<T>(ad::Shape{v, 1}, std::move(inv_dy)));
    auto minus_one = ad::Tensor<T>::full(ad::Shape{v, 1}, T(-1));
    out.normals = ad::l2_normalize(tape, ad::concat(tape, {zx, zy, minus_one}));
    return out;
}

// Mean over valid pixels of (1 - n . g), g the depth-derived normal. Zero
// when no pixel has the neighbours needed for a derivative.
template <class T>
ad::Tensor<T> loss_geo(ad::Tape<T>& tape, const ad::Tensor<T>& normals, const ad::Tensor<T>& depth,
                       const GridBatch& batch)
{
    if (normals.rows() != batch.size() || depth.rows() != batch.size())
        throw ad::ShapeError("loss_geo: fields do not match the batch of " + std::to_string(batch.size()));
    auto g = depth_normals(tape, depth, batch);
    if (g.valid.empty())
        return ad::Tensor<T>::scalar(T(0));
    auto n = ad::gather_rows(tape, normals, g.valid);
    auto cosine = ad::mean(tape, ad::dot(tape, n, g.normals));
    return ad::add(tape, ad::scale(tape, cosine, T(-1)), ad::Tensor<T>::scalar(T(1)));
}

// Sum over right/down neighbour pairs of |d albedo|_1 + |d coeffs|_1 + |d n|_2^2,
// divided by the number of pairs. Zero when there are no pairs.
template <class T>
ad::Tensor<T> loss_tv(ad::Tape<T>& tape, const ad::Tensor<T>& albedo, const ad::Tensor<T>& coeffs,
                      const ad::Tensor<T>& normals, const GridBatch& batch)
{
    std::vector<std::size_t> a, b;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch.right[i] >= 0)
            a.push_back(i), b.push_back(std::size_t(batch.right[i]));
        if (batch.down[i] >= 0)
            a.push_back(i), b.push_back(std::size_t(batch.down[i]));
    }
    if (a.empty())
        return ad::Tensor<T>::scalar(T(0));
    const auto pairs = static_cast<double>(a.size());
    auto diff = [&](const ad::Tensor<T>& f) {
        return ad::sub(tape, ad::gather_rows(tape, f, a), ad::gather_rows(tape, f, b));
    };
    auto l1 = ad::add(tape, ad::sum(tape, ad::abs(tape, diff(albedo))), ad::sum(tape, ad::abs(tape, diff(coeffs))));
    auto l2 = ad::sum(tape, ad::square(tape, diff(normals)));
    return ad::scale(tape, ad::add(tape, l1, l2), static_cast<T>(1.0 / pairs));
}

} // namespace nps::train

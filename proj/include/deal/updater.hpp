// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "deal/errors.hpp"
#include "deal/matrix.hpp"
#include "deal/retention.hpp"
#include "deal/tape.hpp"

namespace deal {

/// Affine layer omega * H + b with a linear output activation. omega is
/// square on the row dimension; the bias broadcasts across columns.
struct UpdaterLayer {
    DenseMatrix weight;  // dim x dim
    DenseMatrix bias;    // dim x 1
};

struct UpdaterNet {
    std::size_t dim = 0;
    Activation activation = Activation::identity;  // linear output by default
    std::vector<UpdaterLayer> layers;
};

/// Identity-initialized net: training starts from "no update".
inline UpdaterNet make_updater(std::size_t dim, std::size_t depth = 1) {
    if (dim < 1 || depth < 1) throw Error("make_updater: dim and depth must be >= 1");
    UpdaterNet net;
    net.dim = dim;
    for (std::size_t k = 0; k < depth; ++k) net.layers.push_back({DenseMatrix::identity(dim), DenseMatrix(dim, 1)});
    return net;
}

inline DenseMatrix updater_forward(const DenseMatrix& h, const UpdaterNet& net) {
    if (h.rows() != net.dim) throw ShapeMismatch("updater_forward: input rows must match net dim");
    DenseMatrix out = h;
    for (const UpdaterLayer& layer : net.layers) {
        DenseMatrix pre = matmul(layer.weight, out);
        DenseMatrix next(pre.rows(), pre.cols());
        for (std::size_t i = 0; i < pre.rows(); ++i)
            for (std::size_t j = 0; j < pre.cols(); ++j) {
                double v = pre(i, j) + layer.bias(i, 0);
                next(i, j) = net.activation == Activation::tanh ? std::tanh(v) : v;
            }
        out = std::move(next);
    }
    return out;
}

inline void collect_params(const UpdaterNet& net, const std::string& prefix, ParamSet& out) {
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        std::string base = prefix + ".layer" + std::to_string(k);
        out.add(base + ".weight", ParamGroup::updater, net.layers[k].weight);
        out.add(base + ".bias", ParamGroup::updater, net.layers[k].bias);
    }
}

inline std::size_t assign_params(UpdaterNet& net, const ParamSet& params, std::size_t cursor) {
    for (UpdaterLayer& layer : net.layers) {
        layer.weight = params[cursor++].value;
        layer.bias = params[cursor++].value;
    }
    return cursor;
}

inline std::pair<int, std::size_t> build_updater(Tape& tape, int input_id, const UpdaterNet& net,
                                                 const std::vector<int>& leaf_ids, std::size_t cursor) {
    int h = input_id;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        int weight_id = leaf_ids[cursor++];
        int bias_id = leaf_ids[cursor++];
        h = tape.add_colvec(tape.matmul(weight_id, h), bias_id);
        if (net.activation == Activation::tanh) h = tape.tanh(h);
    }
    return {h, cursor};
}

}  // namespace deal

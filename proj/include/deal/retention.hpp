// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "deal/errors.hpp"
#include "deal/matrix.hpp"
#include "deal/tape.hpp"

namespace deal {

/// Elementwise heat kernel exp(-(x - c)^2 / (2 sigma^2)); outputs in (0, 1].
inline DenseMatrix heat_kernel(const DenseMatrix& x, double center, double sigma_sq) {
    if (sigma_sq <= 0.0) throw Error("heat_kernel: sigma_sq must be positive");
    double inv2s = 1.0 / (2.0 * sigma_sq);
    DenseMatrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x.data()[i] - center;
        out.data()[i] = clamped_exp((d * d) * (-inv2s));
    }
    return out;
}

/// Sign-flipped kernel exp(+(x - c)^2 / (2 sigma^2)); the pointwise inverse of
/// heat_kernel wherever the exponent clamp is inactive.
inline DenseMatrix inverse_kernel(const DenseMatrix& x, double center, double sigma_sq) {
    if (sigma_sq <= 0.0) throw Error("inverse_kernel: sigma_sq must be positive");
    double inv2s = 1.0 / (2.0 * sigma_sq);
    DenseMatrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x.data()[i] - center;
        out.data()[i] = clamped_exp((d * d) * inv2s);
    }
    return out;
}

enum class Activation { tanh, identity };

/// One filtering layer: per kernel j, column j of the input is masked by the
/// kernel pair and its gain, the filtered columns are recombined through the
/// column-mixing matrix, and a scalar bias plus the activation finish the
/// layer.
struct WaveletLayer {
    DenseMatrix centers;           // 1 x J, learnable
    std::vector<double> sigma_sq;  // J fixed widths
    DenseMatrix gains;             // dim x J, learnable
    DenseMatrix mix;               // rank x J, learnable
    DenseMatrix bias;              // 1 x 1, learnable
};

struct WaveletBank {
    std::size_t dim = 0;      // rows of the filtered factor
    std::size_t rank = 0;     // columns of the filtered factor
    std::size_t kernels = 0;  // J <= rank
    Activation activation = Activation::tanh;
    std::vector<WaveletLayer> layers;
};

/// Near-identity bank: centers 0, gains 1, mixing = identity block, bias 0,
/// dyadic width ladder sigma_j^2 = base * 2^j.
inline WaveletBank make_wavelet_bank(std::size_t dim, std::size_t rank, std::size_t layer_count,
                                     std::size_t kernels = 0, double base_width = 0.25) {
    if (kernels == 0) kernels = rank;
    if (dim < 1 || rank < 1 || layer_count < 1) throw Error("make_wavelet_bank: dims and layer count must be >= 1");
    if (kernels > rank) throw ShapeMismatch("make_wavelet_bank: kernel count cannot exceed rank");
    if (base_width <= 0.0) throw Error("make_wavelet_bank: base width must be positive");
    WaveletBank bank;
    bank.dim = dim;
    bank.rank = rank;
    bank.kernels = kernels;
    for (std::size_t k = 0; k < layer_count; ++k) {
        WaveletLayer layer;
        layer.centers = DenseMatrix(1, kernels);
        layer.sigma_sq.resize(kernels);
        double width = base_width;
        for (std::size_t j = 0; j < kernels; ++j) {
            layer.sigma_sq[j] = width;
            width *= 2.0;
        }
        layer.gains = DenseMatrix::filled(dim, kernels, 1.0);
        layer.mix = DenseMatrix(rank, kernels);
        for (std::size_t j = 0; j < kernels; ++j) layer.mix(j, j) = 1.0;
        layer.bias = DenseMatrix(1, 1);
        bank.layers.push_back(std::move(layer));
    }
    return bank;
}

/// Plain evaluation of one layer. Mirrors the tape graph operation for
/// operation so materialized factors reproduce training-time values bitwise.
inline DenseMatrix wavelet_layer_forward(const DenseMatrix& h, const WaveletLayer& layer,
                                         Activation activation = Activation::tanh) {
    const std::size_t n = h.rows();
    const std::size_t j_count = layer.centers.cols();
    if (h.cols() < j_count) throw ShapeMismatch("wavelet_layer_forward: fewer input columns than kernels");
    if (layer.gains.rows() != n) throw ShapeMismatch("wavelet_layer_forward: gain length must match rows");
    DenseMatrix filtered(n, j_count);
    for (std::size_t j = 0; j < j_count; ++j) {
        double c = layer.centers(0, j);
        double inv2s = 1.0 / (2.0 * layer.sigma_sq[j]);
        double neg = -inv2s;
        for (std::size_t i = 0; i < n; ++i) {
            double x = h(i, j);
            double d = x - c;
            double e = d * d;
            double k1 = clamped_exp(e * neg);
            double k2 = clamped_exp(e * inv2s);
            filtered(i, j) = (k1 * layer.gains(i, j)) * (k2 * x);
        }
    }
    DenseMatrix pre = matmul(filtered, transpose(layer.mix));
    double b = layer.bias(0, 0);
    DenseMatrix out(pre.rows(), pre.cols());
    for (std::size_t i = 0; i < pre.size(); ++i) {
        double v = pre.data()[i] + b;
        out.data()[i] = activation == Activation::tanh ? std::tanh(v) : v;
    }
    return out;
}

/// Composes all layers; the result is the retained core-feature estimate.
inline DenseMatrix retention_forward(const DenseMatrix& y, const WaveletBank& bank) {
    if (y.rows() != bank.dim || y.cols() != bank.rank) throw ShapeMismatch("retention_forward: input shape mismatch");
    DenseMatrix h = y;
    for (const WaveletLayer& layer : bank.layers) h = wavelet_layer_forward(h, layer, bank.activation);
    return h;
}

// --- tape integration -------------------------------------------------------

/// Appends the bank's learnables in canonical order (per layer: centers,
/// gains, mix, bias), tagged as retention parameters.
inline void collect_params(const WaveletBank& bank, const std::string& prefix, ParamSet& out) {
    for (std::size_t k = 0; k < bank.layers.size(); ++k) {
        const WaveletLayer& layer = bank.layers[k];
        std::string base = prefix + ".layer" + std::to_string(k);
        out.add(base + ".centers", ParamGroup::retention, layer.centers);
        out.add(base + ".gains", ParamGroup::retention, layer.gains);
        out.add(base + ".mix", ParamGroup::retention, layer.mix);
        out.add(base + ".bias", ParamGroup::retention, layer.bias);
    }
}

/// Reads learnables back in collect order; returns the advanced cursor.
inline std::size_t assign_params(WaveletBank& bank, const ParamSet& params, std::size_t cursor) {
    for (WaveletLayer& layer : bank.layers) {
        layer.centers = params[cursor++].value;
        layer.gains = params[cursor++].value;
        layer.mix = params[cursor++].value;
        layer.bias = params[cursor++].value;
    }
    return cursor;
}

/// Builds the layer graph on the tape from leaf ids laid out in collect
/// order starting at cursor; returns {output node, advanced cursor}.
inline std::pair<int, std::size_t> build_retention(Tape& tape, int input_id, const WaveletBank& bank,
                                                   const std::vector<int>& leaf_ids, std::size_t cursor) {
    int h = input_id;
    for (const WaveletLayer& layer : bank.layers) {
        int centers_id = leaf_ids[cursor++];
        int gains_id = leaf_ids[cursor++];
        int mix_id = leaf_ids[cursor++];
        int bias_id = leaf_ids[cursor++];
        std::vector<int> filtered;
        filtered.reserve(layer.sigma_sq.size());
        for (std::size_t j = 0; j < layer.sigma_sq.size(); ++j) {
            double inv2s = 1.0 / (2.0 * layer.sigma_sq[j]);
            int col = tape.slice_col(h, j);
            int cj = tape.slice_col(centers_id, j);
            int d = tape.sub_scalar(col, cj);
            int e = tape.hadamard(d, d);
            int k1 = tape.exp_clamped(tape.scale(e, -inv2s));
            int k2 = tape.exp_clamped(tape.scale(e, inv2s));
            int gj = tape.slice_col(gains_id, j);
            filtered.push_back(tape.hadamard(tape.hadamard(k1, gj), tape.hadamard(k2, col)));
        }
        int stacked = tape.hconcat(filtered);
        int pre = tape.add_scalar(tape.matmul(stacked, tape.transpose(mix_id)), bias_id);
        h = bank.activation == Activation::tanh ? tape.tanh(pre) : pre;
    }
    return {h, cursor};
}

}  // namespace deal

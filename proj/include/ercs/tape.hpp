#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ercs/tensor.hpp"

namespace ercs {

// Reverse-mode tape over a fixed operator set. Each op appends a node
// holding the forward result and a closure that scatters the node's
// gradient back to its inputs. Nodes are appended in execution order,
// so reverse iteration is a valid topological order.
class Tape {
public:
    using Slot = std::size_t;

    Slot leaf(Tensor t) { return push(std::move(t), nullptr); }

    const Tensor& value(Slot s) const { return values_.at(s); }
    const Tensor& grad(Slot s) const { return grads_.at(s); }

    // W[M,N] * x, x either [N] or [N,K]; optional bias b[M] added per column.
    Slot linear(Slot w, Slot x, std::optional<Slot> b = {}) {
        const Tensor& W = values_[w];
        const Tensor& X = values_[x];
        if (W.shape.size() != 2)
            throw DimensionError("linear: W must be 2-D, got " + Tensor::shape_str(W.shape));
        const std::size_t M = W.shape[0], N = W.shape[1];
        std::size_t K;
        if (X.shape.size() == 1) {
            K = 1;
            if (X.shape[0] != N)
                throw DimensionError("linear: shape mismatch " + Tensor::shape_str(W.shape) +
                                     " vs " + Tensor::shape_str(X.shape));
        } else if (X.shape.size() == 2) {
            K = X.shape[1];
            if (X.shape[0] != N)
                throw DimensionError("linear: shape mismatch " + Tensor::shape_str(W.shape) +
                                     " vs " + Tensor::shape_str(X.shape));
        } else {
            throw DimensionError("linear: x must be 1-D or 2-D, got " +
                                 Tensor::shape_str(X.shape));
        }
        if (b && values_[*b].numel() != M)
            throw DimensionError("linear: bias length " +
                                 std::to_string(values_[*b].numel()) + " vs M=" +
                                 std::to_string(M));

        Tensor out(X.shape.size() == 1 ? std::vector<std::size_t>{M}
                                       : std::vector<std::size_t>{M, K});
        for (std::size_t i = 0; i < M; ++i) {
            const double* wrow = &W.data[i * N];
            for (std::size_t k = 0; k < K; ++k) {
                double acc = b ? values_[*b].data[i] : 0.0;
                for (std::size_t j = 0; j < N; ++j) acc += wrow[j] * X.data[j * K + k];
                out.data[i * K + k] = acc;
            }
        }
        Slot s = push(std::move(out), nullptr);
        nodes_[s].backward = [this, s, w, x, b, M, N, K] {
            const Tensor& G = grads_[s];
            const Tensor& W = values_[w];
            const Tensor& X = values_[x];
            Tensor& gW = grads_[w];
            Tensor& gX = grads_[x];
            for (std::size_t i = 0; i < M; ++i)
                for (std::size_t j = 0; j < N; ++j) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < K; ++k)
                        acc += G.data[i * K + k] * X.data[j * K + k];
                    gW.data[i * N + j] += acc;
                }
            for (std::size_t j = 0; j < N; ++j)
                for (std::size_t k = 0; k < K; ++k) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < M; ++i)
                        acc += W.data[i * N + j] * G.data[i * K + k];
                    gX.data[j * K + k] += acc;
                }
            if (b) {
                Tensor& gB = grads_[*b];
                for (std::size_t i = 0; i < M; ++i)
                    for (std::size_t k = 0; k < K; ++k) gB.data[i] += G.data[i * K + k];
            }
        };
        return s;
    }

    // Same-size cross-correlation with zero padding; input [C,H,W],
    // kernels [Co,C,k,k], bias [Co], pad must be (k-1)/2.
    Slot conv2d(Slot input, Slot kernels, Slot bias, int pad) {
        const Tensor& X = values_[input];
        const Tensor& K = values_[kernels];
        const Tensor& B = values_[bias];
        if (X.shape.size() != 3 || K.shape.size() != 4)
            throw DimensionError("conv2d: need input [C,H,W], kernels [Co,C,k,k]");
        const std::size_t C = X.shape[0], H = X.shape[1], W = X.shape[2];
        const std::size_t Co = K.shape[0], k = K.shape[2];
        if (k % 2 == 0)
            throw ConfigError("conv2d: even kernel size " + std::to_string(k));
        if (K.shape[1] != C || K.shape[3] != k)
            throw DimensionError("conv2d: kernel shape " + Tensor::shape_str(K.shape) +
                                 " incompatible with input " + Tensor::shape_str(X.shape));
        if (B.numel() != Co)
            throw DimensionError("conv2d: bias length mismatch");
        if (pad != static_cast<int>((k - 1) / 2))
            throw ConfigError("conv2d: pad must be (k-1)/2 for same-size output");

        Tensor out({Co, H, W});
        const int kk = static_cast<int>(k), p = pad;
        const int Hi = static_cast<int>(H), Wi = static_cast<int>(W);
        for (std::size_t co = 0; co < Co; ++co) {
            for (int y = 0; y < Hi; ++y)
                for (int x = 0; x < Wi; ++x) {
                    double acc = B.data[co];
                    for (std::size_t ci = 0; ci < C; ++ci)
                        for (int dy = 0; dy < kk; ++dy) {
                            const int sy = y + dy - p;
                            if (sy < 0 || sy >= Hi) continue;
                            const double* xrow = &X.data[(ci * H + sy) * W];
                            const double* krow = &K.data[((co * C + ci) * k + dy) * k];
                            for (int dx = 0; dx < kk; ++dx) {
                                const int sx = x + dx - p;
                                if (sx < 0 || sx >= Wi) continue;
                                acc += krow[dx] * xrow[sx];
                            }
                        }
                    out.data[(co * H + y) * W + x] = acc;
                }
        }
        Slot s = push(std::move(out), nullptr);
        nodes_[s].backward = [this, s, input, kernels, bias, C, H, W, Co, k, pad] {
            const Tensor& G = grads_[s];
            const Tensor& X = values_[input];
            const Tensor& Kt = values_[kernels];
            Tensor& gX = grads_[input];
            Tensor& gK = grads_[kernels];
            Tensor& gB = grads_[bias];
            const int kk = static_cast<int>(k), p = pad;
            const int Hi = static_cast<int>(H), Wi = static_cast<int>(W);
            for (std::size_t co = 0; co < Co; ++co) {
                double bacc = 0.0;
                for (std::size_t i = 0; i < H * W; ++i) bacc += G.data[co * H * W + i];
                gB.data[co] += bacc;
                for (int y = 0; y < Hi; ++y)
                    for (int x = 0; x < Wi; ++x) {
                        const double g = G.data[(co * H + y) * W + x];
                        if (g == 0.0) continue;
                        for (std::size_t ci = 0; ci < C; ++ci)
                            for (int dy = 0; dy < kk; ++dy) {
                                const int sy = y + dy - p;
                                if (sy < 0 || sy >= Hi) continue;
                                const double* xrow = &X.data[(ci * H + sy) * W];
                                double* gxrow = &gX.data[(ci * H + sy) * W];
                                const double* krow = &Kt.data[((co * C + ci) * k + dy) * k];
                                double* gkrow = &gK.data[((co * C + ci) * k + dy) * k];
                                for (int dx = 0; dx < kk; ++dx) {
                                    const int sx = x + dx - p;
                                    if (sx < 0 || sx >= Wi) continue;
                                    gkrow[dx] += g * xrow[sx];
                                    gxrow[sx] += g * krow[dx];
                                }
                            }
                    }
            }
        };
        return s;
    }

    // Elementwise max(0, x); subgradient at 0 is 0.
    Slot relu(Slot x) {
        Tensor out = values_[x];
        for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
        Slot s = push(std::move(out), nullptr);
        nodes_[s].backward = [this, s, x] {
            const Tensor& G = grads_[s];
            const Tensor& X = values_[x];
            Tensor& gX = grads_[x];
            for (std::size_t i = 0; i < X.numel(); ++i)
                if (X.data[i] > 0.0) gX.data[i] += G.data[i];
        };
        return s;
    }

    // Elementwise product with a non-trainable binary mask.
    Slot mul_mask(Slot x, const Tensor& mask) {
        require_same_shape(values_[x], mask, "mul_mask");
        Tensor out = values_[x];
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= mask.data[i];
        Slot s = push(std::move(out), nullptr);
        nodes_[s].backward = [this, s, x, mask] {
            const Tensor& G = grads_[s];
            Tensor& gX = grads_[x];
            for (std::size_t i = 0; i < gX.numel(); ++i) gX.data[i] += G.data[i] * mask.data[i];
        };
        return s;
    }

    Slot add(Slot a, Slot b) {
        require_same_shape(values_[a], values_[b], "add");
        Tensor out = values_[a];
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += values_[b].data[i];
        Slot s = push(std::move(out), nullptr);
        nodes_[s].backward = [this, s, a, b] {
            const Tensor& G = grads_[s];
            Tensor& gA = grads_[a];
            Tensor& gB = grads_[b];
            for (std::size_t i = 0; i < G.numel(); ++i) {
                gA.data[i] += G.data[i];
                gB.data[i] += G.data[i];
            }
        };
        return s;
    }

    // Mean squared error against a constant target; scalar output.
    Slot mse(Slot pred, const Tensor& target) {
        require_same_shape(values_[pred], target, "mse");
        const std::size_t n = target.numel();
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = values_[pred].data[i] - target.data[i];
            acc += d * d;
        }
        Tensor out({1});
        out.data[0] = acc / static_cast<double>(n);
        Slot s = push(std::move(out), nullptr);
        nodes_[s].backward = [this, s, pred, target, n] {
            const double g = grads_[s].data[0];
            Tensor& gP = grads_[pred];
            const double scale = 2.0 * g / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                gP.data[i] += scale * (values_[pred].data[i] - target.data[i]);
        };
        return s;
    }

    // Single-level orthonormal Haar analysis: [H,W] -> [4, H/2, W/2],
    // channels ordered (ll, lh, hl, hh). Backward is the synthesis
    // butterfly (orthonormal transform, inverse == transpose).
    Slot haar2(Slot img) {
        const Tensor& X = values_[img];
        if (X.shape.size() != 2 || X.shape[0] % 2 != 0 || X.shape[1] % 2 != 0)
            throw DimensionError("haar2: need even 2-D image, got " +
                                 Tensor::shape_str(X.shape));
        const std::size_t H = X.shape[0], W = X.shape[1], h = H / 2, w = W / 2;
        Tensor out({4, h, w});
        haar_analysis(X.data.data(), out.data.data(), H, W);
        Slot s = push(std::move(out), nullptr);
        nodes_[s].backward = [this, s, img, H, W] {
            Tensor back({H, W});
            haar_synthesis(grads_[s].data.data(), back.data.data(), H, W);
            Tensor& gX = grads_[img];
            for (std::size_t i = 0; i < gX.numel(); ++i) gX.data[i] += back.data[i];
        };
        return s;
    }

    // Inverse of haar2: [4, h, w] -> [2h, 2w].
    Slot ihaar2(Slot bands) {
        const Tensor& X = values_[bands];
        if (X.shape.size() != 3 || X.shape[0] != 4)
            throw DimensionError("ihaar2: need [4,h,w], got " + Tensor::shape_str(X.shape));
        const std::size_t h = X.shape[1], w = X.shape[2], H = 2 * h, W = 2 * w;
        Tensor out({H, W});
        haar_synthesis(X.data.data(), out.data.data(), H, W);
        Slot s = push(std::move(out), nullptr);
        nodes_[s].backward = [this, s, bands, H, W] {
            Tensor back({4, H / 2, W / 2});
            haar_analysis(grads_[s].data.data(), back.data.data(), H, W);
            Tensor& gX = grads_[bands];
            for (std::size_t i = 0; i < gX.numel(); ++i) gX.data[i] += back.data[i];
        };
        return s;
    }

    // Channel slice of a [C,H,W] tensor.
    Slot channel_slice(Slot x, std::size_t from, std::size_t count) {
        const Tensor& X = values_[x];
        if (X.shape.size() != 3 || from + count > X.shape[0])
            throw DimensionError("channel_slice: out of range on " +
                                 Tensor::shape_str(X.shape));
        const std::size_t plane = X.shape[1] * X.shape[2];
        Tensor out(count == 1 ? std::vector<std::size_t>{X.shape[1], X.shape[2]}
                              : std::vector<std::size_t>{count, X.shape[1], X.shape[2]});
        for (std::size_t i = 0; i < count * plane; ++i)
            out.data[i] = X.data[from * plane + i];
        Slot s = push(std::move(out), nullptr);
        nodes_[s].backward = [this, s, x, from, count, plane] {
            const Tensor& G = grads_[s];
            Tensor& gX = grads_[x];
            for (std::size_t i = 0; i < count * plane; ++i)
                gX.data[from * plane + i] += G.data[i];
        };
        return s;
    }

    // Stack equal-shaped [H,W] planes into [C,H,W].
    Slot channel_stack(const std::vector<Slot>& planes) {
        if (planes.empty()) throw DimensionError("channel_stack: empty input");
        const Tensor& first = values_[planes[0]];
        if (first.shape.size() != 2)
            throw DimensionError("channel_stack: planes must be 2-D");
        const std::size_t plane = first.numel();
        Tensor out({planes.size(), first.shape[0], first.shape[1]});
        for (std::size_t c = 0; c < planes.size(); ++c) {
            require_same_shape(values_[planes[c]], first, "channel_stack");
            for (std::size_t i = 0; i < plane; ++i)
                out.data[c * plane + i] = values_[planes[c]].data[i];
        }
        Slot s = push(std::move(out), nullptr);
        nodes_[s].backward = [this, s, planes, plane] {
            const Tensor& G = grads_[s];
            for (std::size_t c = 0; c < planes.size(); ++c) {
                Tensor& gP = grads_[planes[c]];
                for (std::size_t i = 0; i < plane; ++i) gP.data[i] += G.data[c * plane + i];
            }
        };
        return s;
    }

    // Partition [H,W] into BxB blocks (raster order), each vectorized
    // row-major into a column: output [B*B, nblocks].
    Slot im2cols(Slot img, std::size_t B) {
        const Tensor& X = values_[img];
        if (X.shape.size() != 2 || X.shape[0] % B != 0 || X.shape[1] % B != 0)
            throw DimensionError("im2cols: image " + Tensor::shape_str(X.shape) +
                                 " not tileable by B=" + std::to_string(B));
        const std::size_t H = X.shape[0], W = X.shape[1];
        const std::size_t bh = H / B, bw = W / B, nb = bh * bw, N = B * B;
        Tensor out({N, nb});
        for (std::size_t by = 0; by < bh; ++by)
            for (std::size_t bx = 0; bx < bw; ++bx) {
                const std::size_t col = by * bw + bx;
                for (std::size_t y = 0; y < B; ++y)
                    for (std::size_t x = 0; x < B; ++x)
                        out.data[(y * B + x) * nb + col] =
                            X.data[(by * B + y) * W + bx * B + x];
            }
        Slot s = push(std::move(out), nullptr);
        nodes_[s].backward = [this, s, img, B, H, W] {
            const std::size_t bh = H / B, bw = W / B, nb = bh * bw;
            const Tensor& G = grads_[s];
            Tensor& gX = grads_[img];
            for (std::size_t by = 0; by < bh; ++by)
                for (std::size_t bx = 0; bx < bw; ++bx) {
                    const std::size_t col = by * bw + bx;
                    for (std::size_t y = 0; y < B; ++y)
                        for (std::size_t x = 0; x < B; ++x)
                            gX.data[(by * B + y) * W + bx * B + x] +=
                                G.data[(y * B + x) * nb + col];
                }
        };
        return s;
    }

    // Inverse of im2cols for an H x W target.
    Slot cols2im(Slot cols, std::size_t B, std::size_t H, std::size_t W) {
        const Tensor& X = values_[cols];
        const std::size_t bh = H / B, bw = W / B, nb = bh * bw, N = B * B;
        if (X.shape.size() != 2 || X.shape[0] != N || X.shape[1] != nb ||
            H % B != 0 || W % B != 0)
            throw DimensionError("cols2im: columns " + Tensor::shape_str(X.shape) +
                                 " incompatible with " + std::to_string(H) + "x" +
                                 std::to_string(W) + " B=" + std::to_string(B));
        Tensor out({H, W});
        for (std::size_t by = 0; by < bh; ++by)
            for (std::size_t bx = 0; bx < bw; ++bx) {
                const std::size_t col = by * bw + bx;
                for (std::size_t y = 0; y < B; ++y)
                    for (std::size_t x = 0; x < B; ++x)
                        out.data[(by * B + y) * W + bx * B + x] =
                            X.data[(y * B + x) * nb + col];
            }
        Slot s = push(std::move(out), nullptr);
        nodes_[s].backward = [this, s, cols, B, H, W] {
            const std::size_t bh = H / B, bw = W / B, nb = bh * bw;
            const Tensor& G = grads_[s];
            Tensor& gX = grads_[cols];
            for (std::size_t by = 0; by < bh; ++by)
                for (std::size_t bx = 0; bx < bw; ++bx) {
                    const std::size_t col = by * bw + bx;
                    for (std::size_t y = 0; y < B; ++y)
                        for (std::size_t x = 0; x < B; ++x)
                            gX.data[(y * B + x) * nb + col] +=
                                G.data[(by * B + y) * W + bx * B + x];
                }
        };
        return s;
    }

    // Reverse sweep from a scalar loss slot. Gradients of slots not on
    // any path to the loss stay zero.
    void backward(Slot loss) {
        if (values_[loss].numel() != 1)
            throw NumericError("backward: loss slot is not scalar, shape " +
                               Tensor::shape_str(values_[loss].shape));
        for (auto& g : grads_)
            for (auto& v : g.data) v = 0.0;
        grads_[loss].data[0] = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;)
            if (nodes_[i].backward) nodes_[i].backward();
    }

    std::size_t size() const { return nodes_.size(); }

    static void haar_analysis(const double* img, double* bands, std::size_t H, std::size_t W) {
        const std::size_t h = H / 2, w = W / 2, plane = h * w;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double a = img[(2 * y) * W + 2 * x];
                const double b = img[(2 * y) * W + 2 * x + 1];
                const double c = img[(2 * y + 1) * W + 2 * x];
                const double d = img[(2 * y + 1) * W + 2 * x + 1];
                const std::size_t i = y * w + x;
                bands[0 * plane + i] = (a + b + c + d) * 0.5;  // ll
                bands[1 * plane + i] = (a + b - c - d) * 0.5;  // lh (vertical detail)
                bands[2 * plane + i] = (a - b + c - d) * 0.5;  // hl (horizontal detail)
                bands[3 * plane + i] = (a - b - c + d) * 0.5;  // hh
            }
    }

    static void haar_synthesis(const double* bands, double* img, std::size_t H, std::size_t W) {
        const std::size_t h = H / 2, w = W / 2, plane = h * w;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t i = y * w + x;
                const double ll = bands[0 * plane + i];
                const double lh = bands[1 * plane + i];
                const double hl = bands[2 * plane + i];
                const double hh = bands[3 * plane + i];
                img[(2 * y) * W + 2 * x] = (ll + lh + hl + hh) * 0.5;
                img[(2 * y) * W + 2 * x + 1] = (ll + lh - hl - hh) * 0.5;
                img[(2 * y + 1) * W + 2 * x] = (ll - lh + hl - hh) * 0.5;
                img[(2 * y + 1) * W + 2 * x + 1] = (ll - lh - hl + hh) * 0.5;
            }
    }

private:
    struct Node {
        std::function<void()> backward;  // null for leaves
    };

    Slot push(Tensor value, std::function<void()> back) {
        values_.push_back(std::move(value));
        grads_.emplace_back(Tensor::zeros(values_.back().shape));
        nodes_.push_back({std::move(back)});
        return nodes_.size() - 1;
    }

    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;
    std::vector<Node> nodes_;
};

}  // namespace ercs

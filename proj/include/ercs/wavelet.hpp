#pragma once

#include <vector>

#include "ercs/tape.hpp"
#include "ercs/tensor.hpp"

namespace ercs {

// Four subbands of one orthonormal Haar analysis level.
// Naming: lh = vertical detail (row differences), hl = horizontal
// detail (column differences), hh = diagonal.
struct SubbandSet {
    Tensor ll, lh, hl, hh;
    int level = 1;
};

inline SubbandSet dwt2(const Tensor& image) {
    if (image.shape.size() != 2 || image.shape[0] % 2 != 0 || image.shape[1] % 2 != 0)
        throw DimensionError("dwt2: need even 2-D image, got " +
                             Tensor::shape_str(image.shape));
    const std::size_t h = image.shape[0] / 2, w = image.shape[1] / 2;
    Tensor bands({4, h, w});
    Tape::haar_analysis(image.data.data(), bands.data.data(), image.shape[0], image.shape[1]);
    SubbandSet out;
    out.ll = Tensor({h, w});
    out.lh = Tensor({h, w});
    out.hl = Tensor({h, w});
    out.hh = Tensor({h, w});
    const std::size_t plane = h * w;
    for (std::size_t i = 0; i < plane; ++i) {
        out.ll.data[i] = bands.data[i];
        out.lh.data[i] = bands.data[plane + i];
        out.hl.data[i] = bands.data[2 * plane + i];
        out.hh.data[i] = bands.data[3 * plane + i];
    }
    return out;
}

inline Tensor idwt2(const SubbandSet& sub) {
    require_same_shape(sub.ll, sub.lh, "idwt2");
    require_same_shape(sub.ll, sub.hl, "idwt2");
    require_same_shape(sub.ll, sub.hh, "idwt2");
    const std::size_t h = sub.ll.shape[0], w = sub.ll.shape[1];
    Tensor bands({4, h, w});
    const std::size_t plane = h * w;
    for (std::size_t i = 0; i < plane; ++i) {
        bands.data[i] = sub.ll.data[i];
        bands.data[plane + i] = sub.lh.data[i];
        bands.data[2 * plane + i] = sub.hl.data[i];
        bands.data[3 * plane + i] = sub.hh.data[i];
    }
    Tensor img({2 * h, 2 * w});
    Tape::haar_synthesis(bands.data.data(), img.data.data(), 2 * h, 2 * w);
    return img;
}

// Pyramid: level k's ll is re-decomposed at level k+1; only the
// deepest level's ll is meaningful as a retained band.
inline std::vector<SubbandSet> dwt2_multi(const Tensor& image, int levels) {
    if (levels < 1) throw ConfigError("dwt2_multi: levels must be >= 1");
    const std::size_t div = std::size_t{1} << levels;
    if (image.shape.size() != 2 || image.shape[0] % div != 0 || image.shape[1] % div != 0)
        throw DimensionError("dwt2_multi: image " + Tensor::shape_str(image.shape) +
                             " not divisible by 2^" + std::to_string(levels));
    std::vector<SubbandSet> pyramid;
    Tensor cur = image;
    for (int l = 1; l <= levels; ++l) {
        SubbandSet s = dwt2(cur);
        s.level = l;
        cur = s.ll;
        pyramid.push_back(std::move(s));
    }
    return pyramid;
}

inline Tensor idwt2_multi(const std::vector<SubbandSet>& pyramid) {
    if (pyramid.empty()) throw DimensionError("idwt2_multi: empty pyramid");
    Tensor cur = pyramid.back().ll;
    for (std::size_t l = pyramid.size(); l-- > 0;) {
        SubbandSet s = pyramid[l];
        s.ll = cur;
        cur = idwt2(s);
    }
    return cur;
}

}  // namespace ercs

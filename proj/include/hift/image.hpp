#pragma once

#include <vector>

#include "hift/geometry.hpp"
#include "hift/tensor.hpp"

namespace hift {

// 8-bit-range raster, planar channels, values 0..255 as doubles.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1; // 1 (grayscale) or 3 (RGB)
    std::vector<double> data; // [c][y][x]

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
};

// Square crop of side `size` (frame pixels) centered at (cx, cy), resampled
// bilinearly to out_size x out_size and normalized to roughly [-0.5, 0.5].
// Out-of-frame samples take the per-channel frame mean. Always 3 channels:
// grayscale replicates.
Tensor crop_and_resize(const Image& frame, double cx, double cy, double size, int out_size);

// Siamese crop sizes: s_z = sqrt((w + p)(h + p)) with p = context * (w + h).
double template_crop_size(const BBox& box, double context);

} // namespace hift

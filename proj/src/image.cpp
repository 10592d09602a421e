#include "hift/image.hpp"

#include <cmath>

namespace hift {

double template_crop_size(const BBox& box, double context) {
    const double p = context * (box.w + box.h);
    return std::sqrt((box.w + p) * (box.h + p));
}

Tensor crop_and_resize(const Image& frame, double cx, double cy, double size, int out_size) {
    if (frame.width <= 0 || frame.height <= 0) throw ContractError("crop of empty image");
    if (size <= 0.0) throw ContractError("crop size must be positive");

    double mean[3] = {0.0, 0.0, 0.0};
    for (int c = 0; c < frame.channels; ++c) {
        double s = 0.0;
        for (int y = 0; y < frame.height; ++y)
            for (int x = 0; x < frame.width; ++x) s += frame.at(c, y, x);
        mean[c] = s / (static_cast<double>(frame.width) * frame.height);
    }

    Tensor out({3, out_size, out_size});
    const double step = size / out_size;
    const double x0 = cx - size / 2.0;
    const double y0 = cy - size / 2.0;
    for (int oy = 0; oy < out_size; ++oy) {
        for (int ox = 0; ox < out_size; ++ox) {
            const double sx = x0 + (ox + 0.5) * step - 0.5;
            const double sy = y0 + (oy + 0.5) * step - 0.5;
            const int ix = static_cast<int>(std::floor(sx));
            const int iy = static_cast<int>(std::floor(sy));
            const double fx = sx - ix;
            const double fy = sy - iy;
            for (int c = 0; c < 3; ++c) {
                const int fc = frame.channels == 3 ? c : 0;
                auto sample = [&](int yy, int xx) {
                    if (xx < 0 || xx >= frame.width || yy < 0 || yy >= frame.height) return mean[fc];
                    return frame.at(fc, yy, xx);
                };
                const double v = (1 - fy) * ((1 - fx) * sample(iy, ix) + fx * sample(iy, ix + 1)) +
                                 fy * ((1 - fx) * sample(iy + 1, ix) + fx * sample(iy + 1, ix + 1));
                out[(c * out_size + oy) * out_size + ox] = v / 255.0 - 0.5;
            }
        }
    }
    return out;
}

} // namespace hift

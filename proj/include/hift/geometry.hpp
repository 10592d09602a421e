#pragma once

#include <algorithm>
#include <cmath>

#include "hift/errors.hpp"

namespace hift {

// Axis-aligned box, center form, pixels.
struct BBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    static BBox from_corner(double x, double y, double w, double h) {
        return {x + w / 2.0, y + h / 2.0, w, h};
    }
    double x1() const { return cx - w / 2.0; }
    double y1() const { return cy - h / 2.0; }
    double x2() const { return cx + w / 2.0; }
    double y2() const { return cy + h / 2.0; }
    bool valid() const { return w > 0.0 && h > 0.0; }

    bool contains(double px, double py) const {
        return px >= x1() && px <= x2() && py >= y1() && py <= y2();
    }
};

inline double iou(const BBox& a, const BBox& b) {
    if (!a.valid() || !b.valid()) throw ContractError("iou requires boxes with positive extent");
    const double ix = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1()));
    const double iy = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1()));
    const double inter = ix * iy;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return inter / uni;
}

// Center location error in pixels.
inline double cle(const BBox& a, const BBox& b) {
    if (!a.valid() || !b.valid()) throw ContractError("cle requires boxes with positive extent");
    const double dx = a.cx - b.cx;
    const double dy = a.cy - b.cy;
    return std::sqrt(dx * dx + dy * dy);
}

} // namespace hift

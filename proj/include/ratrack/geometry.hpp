#pragma once

#include <span>
#include <vector>

#include "ratrack/common.hpp"

namespace ratrack {

// Axis-aligned box, top-left origin, pixel units.
struct BBox {
    double x = 0.0;  // left
    double y = 0.0;  // top
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }
    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }

    bool operator==(const BBox&) const = default;
};

struct FrameSize {
    double width = 1920.0;
    double height = 1080.0;
};

// Intersection-over-union in [0, 1]. Degenerate (non-positive area) inputs
// yield 0.
double iou(const BBox& a, const BBox& b);

// Fraction of the mark covered by the human box: area(mark ∩ human) /
// area(mark). Zero-area marks yield 0.
double intersection_rate(const BBox& mark, const BBox& human);

// Centered sub-box holding `area_fraction` of the input's area: both sides
// scale by sqrt(area_fraction), center preserved.
BBox mark_box(const BBox& box, double area_fraction);

// rows = a, cols = b
Mat iou_matrix(std::span<const BBox> a, std::span<const BBox> b);

// rows = marks, cols = humans
Mat ir_matrix(std::span<const BBox> marks, std::span<const BBox> humans);

// (x/width, y/height, w/width, h/height); the all-zero padding box maps to
// the zero vector.
Eigen::Vector4d box_feature(const BBox& box, const FrameSize& frame);

// N x 4 stack of box_feature rows.
Mat box_feature_rows(std::span<const BBox> boxes, const FrameSize& frame);

}  // namespace ratrack

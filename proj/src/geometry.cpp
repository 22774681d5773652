#include "ratrack/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace ratrack {

double iou(const BBox& a, const BBox& b) {
    if (a.w <= 0.0 || a.h <= 0.0 || b.w <= 0.0 || b.h <= 0.0) return 0.0;
    double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
    double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
    double inter = ix * iy;
    if (inter <= 0.0) return 0.0;
    return inter / (a.area() + b.area() - inter);
}

double intersection_rate(const BBox& mark, const BBox& human) {
    if (mark.w <= 0.0 || mark.h <= 0.0 || human.w <= 0.0 || human.h <= 0.0) return 0.0;
    double ix = std::max(0.0, std::min(mark.right(), human.right()) - std::max(mark.x, human.x));
    double iy = std::max(0.0, std::min(mark.bottom(), human.bottom()) - std::max(mark.y, human.y));
    return ix * iy / mark.area();
}

BBox mark_box(const BBox& box, double area_fraction) {
    if (!(area_fraction > 0.0) || area_fraction > 1.0) {
        throw ValidationError("mark area fraction must be in (0, 1]");
    }
    double s = std::sqrt(area_fraction);
    BBox m;
    m.w = box.w * s;
    m.h = box.h * s;
    m.x = box.x + 0.5 * (box.w - m.w);
    m.y = box.y + 0.5 * (box.h - m.h);
    return m;
}

Mat iou_matrix(std::span<const BBox> a, std::span<const BBox> b) {
    Mat m(a.size(), b.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = iou(a[std::size_t(i)], b[std::size_t(j)]);
    return m;
}

Mat ir_matrix(std::span<const BBox> marks, std::span<const BBox> humans) {
    Mat m(marks.size(), humans.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = intersection_rate(marks[std::size_t(i)], humans[std::size_t(j)]);
    return m;
}

Eigen::Vector4d box_feature(const BBox& box, const FrameSize& frame) {
    if (!(frame.width > 0.0) || !(frame.height > 0.0)) {
        throw ValidationError("frame size must be positive");
    }
    return {box.x / frame.width, box.y / frame.height,
            box.w / frame.width, box.h / frame.height};
}

Mat box_feature_rows(std::span<const BBox> boxes, const FrameSize& frame) {
    Mat m(boxes.size(), 4);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        m.row(i) = box_feature(boxes[std::size_t(i)], frame).transpose();
    return m;
}

}  // namespace ratrack

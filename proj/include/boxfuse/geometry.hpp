#pragma once

#include <Eigen/Core>

namespace boxfuse {

// Axis-aligned box in corner form (x1, y1, x2, y2), continuous pixel
// coordinates. Valid boxes satisfy x1 <= x2 and y1 <= y2 with all coordinates
// finite; zero-area boxes are legal.
struct Box {
  Eigen::Array4d xyxy{0.0, 0.0, 0.0, 0.0};

  Box() = default;
  Box(double x1, double y1, double x2, double y2) : xyxy(x1, y1, x2, y2) {}

  static Box from_xywh(double x, double y, double w, double h) {
    return Box(x, y, x + w, y + h);
  }

  double x1() const { return xyxy[0]; }
  double y1() const { return xyxy[1]; }
  double x2() const { return xyxy[2]; }
  double y2() const { return xyxy[3]; }
  double width() const { return xyxy[2] - xyxy[0]; }
  double height() const { return xyxy[3] - xyxy[1]; }
};

inline bool is_valid(const Box& b) {
  return b.xyxy.isFinite().all() && b.x1() <= b.x2() && b.y1() <= b.y2();
}

inline double area(const Box& b) { return b.width() * b.height(); }

inline double intersection_area(const Box& a, const Box& b) {
  const Eigen::Array2d lo = a.xyxy.head<2>().max(b.xyxy.head<2>());
  const Eigen::Array2d hi = a.xyxy.tail<2>().min(b.xyxy.tail<2>());
  return (hi - lo).max(0.0).prod();
}

// Intersection over union; 0 when the union has zero area.
inline double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = area(a) + area(b) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace boxfuse

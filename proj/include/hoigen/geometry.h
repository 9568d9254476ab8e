#ifndef HOIGEN_GEOMETRY_H_
#define HOIGEN_GEOMETRY_H_

namespace hoigen {

// Axis-aligned box in pixels, (x1, y1) top-left and (x2, y2) bottom-right.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  bool valid() const { return x2 > x1 && y2 > y1; }
  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return valid() ? width() * height() : 0.0; }
  bool operator==(const Box&) const = default;
};

// Tight bounding box of both inputs.
Box UnionBox(const Box& a, const Box& b);
// Intersection over union in [0, 1]; 0 for disjoint or degenerate boxes.
double Iou(const Box& a, const Box& b);

}  // namespace hoigen

#endif  // HOIGEN_GEOMETRY_H_

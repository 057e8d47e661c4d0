#include "padj/fdcheck.hpp"

#include <algorithm>
#include <cmath>

namespace padj::fd {

double default_step(const BlockVec& u, const BlockVec& dir) {
  const double d = norm_inf(dir);
  return 1e-6 * (1.0 + norm_inf(u)) / (d > 0.0 ? d : 1.0);
}

BlockVec directional(const std::function<BlockVec(const BlockVec&)>& map, const BlockVec& u,
                     const BlockVec& dir, double step) {
  BlockVec plus = u;
  plus.axpy(step, dir);
  BlockVec minus = u;
  minus.axpy(-step, dir);
  BlockVec out = map(plus) - map(minus);
  out *= 0.5 / step;
  return out;
}

double directional(const std::function<double(const BlockVec&)>& map, const BlockVec& u,
                   const BlockVec& dir, double step) {
  BlockVec plus = u;
  plus.axpy(step, dir);
  BlockVec minus = u;
  minus.axpy(-step, dir);
  return (map(plus) - map(minus)) / (2.0 * step);
}

BlockVec field_jvp(const PartitionedField& field, Slot slot, const FieldPoint& at,
                   const BlockVec& du) {
  const BlockVec& base = slot == Slot::first ? at.u1 : at.u2;
  const double h = default_step(base, du);
  auto map = [&](const BlockVec& v) {
    return slot == Slot::first ? field.value({at.t1, v, at.t2, at.u2})
                               : field.value({at.t1, at.u1, at.t2, v});
  };
  return directional(std::function<BlockVec(const BlockVec&)>(map), base, du, h);
}

double relative_error(const BlockVec& a, const BlockVec& b, double floor) {
  require_shape(a, b.shape(), "relative_error");
  double err = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) err = std::max(err, std::abs(a[i] - b[i]));
  return err / std::max(norm_inf(b), floor);
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max(std::abs(b), floor);
}

}  // namespace padj::fd

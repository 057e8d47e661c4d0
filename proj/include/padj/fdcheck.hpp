#pragma once

#include <functional>

#include "padj/adjoint_core.hpp"

namespace padj::fd {

/// Central-difference step for perturbing u along dir: 1e-6 (1 + |u|_inf),
/// normalized by the size of the direction.
double default_step(const BlockVec& u, const BlockVec& dir);

/// Central difference of a vector-valued map along dir.
BlockVec directional(const std::function<BlockVec(const BlockVec&)>& map, const BlockVec& u,
                     const BlockVec& dir, double step);

/// Central difference of a scalar map along dir.
double directional(const std::function<double(const BlockVec&)>& map, const BlockVec& u,
                   const BlockVec& dir, double step);

/// FD approximation of D_slot F(at) du, perturbing only the chosen slot.
BlockVec field_jvp(const PartitionedField& field, Slot slot, const FieldPoint& at,
                   const BlockVec& du);

/// max_i |a_i - b_i| / max(|b|_inf, floor)
double relative_error(const BlockVec& a, const BlockVec& b, double floor = 1e-300);
double relative_error(double a, double b, double floor = 1e-300);

}  // namespace padj::fd

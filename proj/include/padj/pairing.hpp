#pragma once

#include <memory>

#include "padj/blockla.hpp"

namespace padj {

/// Constant invertible operator P defining the duality pairing
/// <p, u>_P = <<p, P u>>. Also used for constant mass matrices.
class PairingMap {
 public:
  virtual ~PairingMap() = default;

  virtual BlockShape shape() const = 0;
  virtual BlockVec apply(const BlockVec& v) const = 0;
  virtual BlockVec apply_transpose(const BlockVec& w) const = 0;
  virtual BlockVec solve(const BlockVec& v) const = 0;
  virtual BlockVec solve_transpose(const BlockVec& w) const = 0;
  /// Explicit block form of P.
  virtual BlockOp matrix() const = 0;

  double pair(const BlockVec& p, const BlockVec& u) const { return dot(p, apply(u)); }
};

class IdentityPairing final : public PairingMap {
 public:
  explicit IdentityPairing(BlockShape shape) : shape_(shape) {}

  BlockShape shape() const override { return shape_; }
  BlockVec apply(const BlockVec& v) const override { return v; }
  BlockVec apply_transpose(const BlockVec& w) const override { return w; }
  BlockVec solve(const BlockVec& v) const override { return v; }
  BlockVec solve_transpose(const BlockVec& w) const override { return w; }
  BlockOp matrix() const override { return BlockOp::identity(shape_); }

 private:
  BlockShape shape_;
};

/// P = diag(d). Rejects zero entries at construction.
class DiagonalPairing final : public PairingMap {
 public:
  explicit DiagonalPairing(BlockVec diagonal);

  const BlockVec& diagonal() const { return diag_; }
  BlockShape shape() const override { return diag_.shape(); }
  BlockVec apply(const BlockVec& v) const override;
  BlockVec apply_transpose(const BlockVec& w) const override { return apply(w); }
  BlockVec solve(const BlockVec& v) const override;
  BlockVec solve_transpose(const BlockVec& w) const override { return solve(w); }
  BlockOp matrix() const override;

 private:
  BlockVec diag_;
};

/// General block operator P, inverted through its Schur factorization.
class BlockOpPairing final : public PairingMap {
 public:
  explicit BlockOpPairing(BlockOp p);

  BlockShape shape() const override { return factors_.shape(); }
  BlockVec apply(const BlockVec& v) const override { return factors_.op().apply(v); }
  BlockVec apply_transpose(const BlockVec& w) const override {
    return factors_.op().apply_transpose(w);
  }
  BlockVec solve(const BlockVec& v) const override { return factors_.solve(v); }
  BlockVec solve_transpose(const BlockVec& w) const override {
    return factors_.solve_transpose(w);
  }
  BlockOp matrix() const override { return factors_.op(); }

 private:
  SchurFactors factors_;
};

}  // namespace padj

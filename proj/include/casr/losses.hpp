#pragma once

#include <string>

#include "casr/tensor.hpp"

namespace casr {

enum class LossKind { bce, dice, compound };

LossKind parse_loss(const std::string& name);
std::string to_string(LossKind kind);

struct LossResult {
  double value = 0.0;
  Tensor<double> grad;  // dL/dpred
};

inline constexpr double kBceClamp = 1e-7;
inline constexpr double kDiceEpsilon = 1e-6;

/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
LossResult loss_bce(const Tensor<double>& pred, const Tensor<double>& target);
/// Soft Dice over the whole batch: 1 - 2*sum(p*y) / (sum(y^2) + sum(p^2) + eps).
LossResult loss_dice(const Tensor<double>& pred, const Tensor<double>& target);
/// (bce + dice) / 2.
LossResult loss_compound(const Tensor<double>& pred, const Tensor<double>& target);

LossResult compute_loss(LossKind kind, const Tensor<double>& pred, const Tensor<double>& target);

}  // namespace casr

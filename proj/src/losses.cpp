#include "casr/losses.hpp"

#include <algorithm>
#include <cmath>

namespace casr {

LossKind parse_loss(const std::string& name) {
  if (name == "bce") return LossKind::bce;
  if (name == "dice") return LossKind::dice;
  if (name == "compound") return LossKind::compound;
  throw ContractError("unknown loss '" + name + "' (expected bce|dice|compound)");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::bce: return "bce";
    case LossKind::dice: return "dice";
    case LossKind::compound: return "compound";
  }
  return "dice";
}

namespace {
void check(const Tensor<double>& pred, const Tensor<double>& target, const char* who) {
  require(pred.shape() == target.shape(), std::string(who) + ": shape mismatch " + to_string(pred.shape()) + " vs " +
                                              to_string(target.shape()));
  require(pred.size() > 0, std::string(who) + ": empty input");
}
}  // namespace

LossResult loss_bce(const Tensor<double>& pred, const Tensor<double>& target) {
  check(pred, target, "loss_bce");
  const auto n = static_cast<double>(pred.size());
  LossResult r{0.0, Tensor<double>(pred.shape())};
  double sum = 0.0;
  for (Index i = 0; i < pred.size(); ++i) {
    const double raw = pred.values()[i];
    const double p = std::clamp(raw, kBceClamp, 1.0 - kBceClamp);
    const double y = target.values()[i];
    sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    // The clamp is flat outside its range.
    const bool inside = raw > kBceClamp && raw < 1.0 - kBceClamp;
    r.grad.values()[i] = inside ? (-y / p + (1.0 - y) / (1.0 - p)) / n : 0.0;
  }
  r.value = sum / n;
  return r;
}

LossResult loss_dice(const Tensor<double>& pred, const Tensor<double>& target) {
  check(pred, target, "loss_dice");
  const auto& p = pred.values();
  const auto& y = target.values();
  const double overlap = (p * y).sum();
  const double denom = y.square().sum() + p.square().sum() + kDiceEpsilon;
  LossResult r{1.0 - 2.0 * overlap / denom, Tensor<double>(pred.shape())};
  r.grad.values() = -2.0 * (y * denom - 2.0 * overlap * p) / (denom * denom);
  return r;
}

LossResult loss_compound(const Tensor<double>& pred, const Tensor<double>& target) {
  LossResult bce = loss_bce(pred, target);
  const LossResult dice = loss_dice(pred, target);
  bce.value = 0.5 * (bce.value + dice.value);
  bce.grad.values() = 0.5 * (bce.grad.values() + dice.grad.values());
  return bce;
}

LossResult compute_loss(LossKind kind, const Tensor<double>& pred, const Tensor<double>& target) {
  switch (kind) {
    case LossKind::bce: return loss_bce(pred, target);
    case LossKind::dice: return loss_dice(pred, target);
    case LossKind::compound: return loss_compound(pred, target);
  }
  return loss_dice(pred, target);
}

}  // namespace casr

#include "glacier/losses.hpp"

#include <cmath>

#include "glacier/error.hpp"

namespace glacier::losses {

namespace F = torch::nn::functional;

namespace {

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    require(a.defined() && b.defined(), ErrorCode::invalid_input, std::string(what) + ": undefined tensor");
    require(a.sizes() == b.sizes(), ErrorCode::shape_mismatch,
            std::string(what) + ": shapes differ");
}

/// [H, W] or [N, H, W] -> [N, 1, H, W].
torch::Tensor as_image_batch(const torch::Tensor& x) {
    require(x.dim() == 2 || x.dim() == 3, ErrorCode::shape_mismatch, "grids must be [H, W] or [N, H, W]");
    return x.dim() == 2 ? x.unsqueeze(0).unsqueeze(0) : x.unsqueeze(1);
}

}  // namespace

torch::Tensor masked_dice_loss(const torch::Tensor& pred, const torch::Tensor& target,
                               const torch::Tensor& valid) {
    check_same_shape(pred, target, "masked_dice_loss");
    check_same_shape(pred, valid, "masked_dice_loss");
    const auto v = valid.to(pred.scalar_type());
    const auto g = target.to(pred.scalar_type()) * v;
    const auto pv = pred * v;
    const auto intersection = (pv * g).sum();
    const auto denominator = pv.sum() + g.sum();
    return 1.0 - (2.0 * intersection + kDiceEpsilon) / (denominator + kDiceEpsilon);
}

void BoundaryParams::validate() const {
    require(theta >= 1, ErrorCode::invalid_config, "boundary theta must be >= 1");
    require(kernel >= 3 && kernel % 2 == 1, ErrorCode::invalid_config, "boundary kernel must be odd and >= 3");
}

torch::Tensor extract_boundary(const torch::Tensor& mask, int kernel) {
    require(kernel >= 1 && kernel % 2 == 1, ErrorCode::invalid_input, "boundary kernel must be odd");
    const auto x = as_image_batch(mask);
    const int pad = kernel / 2;
    // Outside the grid counts as background, so the complement pads with 1.
    const auto complement = 1.0 - x;
    const auto padded = F::pad(complement, F::PadFuncOptions({pad, pad, pad, pad}).value(1.0));
    const auto dilated_complement = F::max_pool2d(padded, F::MaxPool2dFuncOptions(kernel).stride(1));
    const auto boundary = dilated_complement - complement;
    return boundary.reshape(mask.sizes());
}

torch::Tensor boundary_loss(const torch::Tensor& pred, const torch::Tensor& target,
                            const BoundaryParams& params, const torch::Tensor& valid) {
    check_same_shape(pred, target, "boundary_loss");
    params.validate();
    auto p = pred;
    auto g = target.to(pred.scalar_type());
    if (valid.defined()) {
        check_same_shape(pred, valid, "boundary_loss");
        const auto v = valid.to(pred.scalar_type());
        p = p * v;
        g = g * v;
    }
    const auto pred_b = as_image_batch(extract_boundary(p, params.kernel));
    const auto target_b = as_image_batch(extract_boundary(g, params.kernel));
    const auto reach = F::MaxPool2dFuncOptions(2 * params.theta + 1).stride(1).padding(params.theta);
    const auto pred_b_ext = F::max_pool2d(pred_b, reach);
    const auto target_b_ext = F::max_pool2d(target_b, reach);

    const auto pred_mass = pred_b.sum();
    const auto target_mass = target_b.sum();
    if (pred_mass.item<double>() == 0.0 && target_mass.item<double>() == 0.0) {
        return (pred * 0.0).sum();
    }
    const auto precision = (pred_b * target_b_ext).sum() / (pred_mass + kBoundaryEpsilon);
    const auto recall = (pred_b_ext * target_b).sum() / (target_mass + kBoundaryEpsilon);
    const auto bf1 = 2.0 * precision * recall / (precision + recall + kBoundaryEpsilon);
    return 1.0 - bf1;
}

namespace {

void check_alpha(double alpha) {
    require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0, ErrorCode::invalid_weight,
            "combined-loss alpha must lie in [0, 1], got " + std::to_string(alpha));
}

}  // namespace

torch::Tensor combined_loss(const torch::Tensor& l_dice, const torch::Tensor& l_boundary, double alpha) {
    check_alpha(alpha);
    if (alpha == 1.0) {
        return l_dice;
    }
    if (alpha == 0.0) {
        return l_boundary;
    }
    return alpha * l_dice + (1.0 - alpha) * l_boundary;
}

double combined_loss(double l_dice, double l_boundary, double alpha) {
    check_alpha(alpha);
    if (alpha == 1.0) {
        return l_dice;
    }
    if (alpha == 0.0) {
        return l_boundary;
    }
    return alpha * l_dice + (1.0 - alpha) * l_boundary;
}

torch::Tensor cross_entropy_baseline(const torch::Tensor& logits, const torch::Tensor& target,
                                     const torch::Tensor& valid) {
    check_same_shape(logits, target, "cross_entropy_baseline");
    check_same_shape(logits, valid, "cross_entropy_baseline");
    const auto v = valid.to(logits.scalar_type());
    const auto g = target.to(logits.scalar_type());
    // max(x, 0) - x g + log(1 + exp(-|x|)) is the overflow-free form.
    const auto per_pixel = torch::clamp_min(logits, 0.0) - logits * g + torch::log1p(torch::exp(-logits.abs()));
    const auto count = v.sum();
    if (count.item<double>() == 0.0) {
        return (logits * 0.0).sum();
    }
    return (per_pixel * v).sum() / count;
}

SlbaWeightsImpl::SlbaWeightsImpl(double alpha1, double alpha2) {
    require(alpha1 > 0.0 && alpha2 > 0.0, ErrorCode::invalid_weight, "SLBA alphas must be positive");
    log_alpha1 = register_parameter("log_alpha1", torch::full({}, std::log(alpha1), torch::kFloat64));
    log_alpha2 = register_parameter("log_alpha2", torch::full({}, std::log(alpha2), torch::kFloat64));
}

double SlbaWeightsImpl::alpha1() const { return std::exp(log_alpha1.item<double>()); }
double SlbaWeightsImpl::alpha2() const { return std::exp(log_alpha2.item<double>()); }

LossWeights SlbaWeightsImpl::weights() const { return LossWeights{0.5, alpha1(), alpha2()}; }

torch::Tensor slba_loss(const torch::Tensor& l_dice, const torch::Tensor& l_boundary,
                        const torch::Tensor& log_alpha1, const torch::Tensor& log_alpha2) {
    require(torch::isfinite(log_alpha1).item<bool>() && torch::isfinite(log_alpha2).item<bool>(),
            ErrorCode::invalid_weight, "SLBA log-weights must be finite");
    // 1 / (2 a^2) = 0.5 exp(-2 log a); |ln(a1 a2)| = |log a1 + log a2|.
    const auto w_dice = 0.5 * torch::exp(-2.0 * log_alpha1);
    const auto w_boundary = 0.5 * torch::exp(-2.0 * log_alpha2);
    const auto regularizer = (log_alpha1 + log_alpha2).abs();
    return (w_dice * l_dice + w_boundary * l_boundary + regularizer).to(l_dice.scalar_type());
}

torch::Tensor slba_loss(const torch::Tensor& l_dice, const torch::Tensor& l_boundary, SlbaWeights& weights) {
    return slba_loss(l_dice, l_boundary, weights->log_alpha1, weights->log_alpha2);
}

double slba_loss(double l_dice, double l_boundary, double alpha1, double alpha2, bool with_regularizer) {
    require(alpha1 > 0.0 && alpha2 > 0.0, ErrorCode::invalid_weight, "SLBA alphas must be positive");
    const double value = l_dice / (2.0 * alpha1 * alpha1) + l_boundary / (2.0 * alpha2 * alpha2);
    return with_regularizer ? value + std::abs(std::log(alpha1 * alpha2)) : value;
}

SlbaGradient slba_gradient(double l_dice, double l_boundary, double alpha1, double alpha2,
                           bool with_regularizer) {
    require(alpha1 > 0.0 && alpha2 > 0.0, ErrorCode::invalid_weight, "SLBA alphas must be positive");
    SlbaGradient g;
    g.d_dice = 1.0 / (2.0 * alpha1 * alpha1);
    g.d_boundary = 1.0 / (2.0 * alpha2 * alpha2);
    g.d_alpha1 = -l_dice / (alpha1 * alpha1 * alpha1);
    g.d_alpha2 = -l_boundary / (alpha2 * alpha2 * alpha2);
    if (with_regularizer) {
        const double log_product = std::log(alpha1 * alpha2);
        const double sign = log_product > 0.0 ? 1.0 : (log_product < 0.0 ? -1.0 : 0.0);
        g.d_alpha1 += sign / alpha1;
        g.d_alpha2 += sign / alpha2;
    }
    return g;
}

AlphaFit fit_slba_alphas(double l_dice, double l_boundary, const AlphaFitOptions& options) {
    require(options.alpha1 > 0.0 && options.alpha2 > 0.0, ErrorCode::invalid_weight,
            "SLBA alphas must be positive");
    double s1 = std::log(options.alpha1);
    double s2 = std::log(options.alpha2);
    for (int k = 0; k < options.steps; ++k) {
        const double a1 = std::exp(s1);
        const double a2 = std::exp(s2);
        const auto g = slba_gradient(l_dice, l_boundary, a1, a2, options.with_regularizer);
        // Chain rule into log space: dL/ds = a dL/da.
        const double lr = options.learning_rate / std::sqrt(1.0 + k / 100.0);
        s1 -= lr * g.d_alpha1 * a1;
        s2 -= lr * g.d_alpha2 * a2;
    }
    AlphaFit fit;
    fit.alpha1 = std::exp(s1);
    fit.alpha2 = std::exp(s2);
    fit.objective = slba_loss(l_dice, l_boundary, fit.alpha1, fit.alpha2, options.with_regularizer);
    return fit;
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::ce: return "ce";
        case LossKind::dice: return "dice";
        case LossKind::boundary: return "boundary";
        case LossKind::combined: return "combined";
        case LossKind::slba: return "slba";
    }
    return "?";
}

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "ce") return LossKind::ce;
    if (name == "dice") return LossKind::dice;
    if (name == "boundary") return LossKind::boundary;
    if (name == "combined") return LossKind::combined;
    if (name == "slba") return LossKind::slba;
    throw Error(ErrorCode::invalid_config, "unknown loss '" + name + "' (ce|dice|boundary|combined|slba)");
}

LossTerms compute_loss(const LossConfig& config, const torch::Tensor& logits, const torch::Tensor& target,
                       const torch::Tensor& valid, SlbaWeights* slba) {
    LossTerms terms;
    if (config.kind == LossKind::ce) {
        terms.total = cross_entropy_baseline(logits, target, valid);
        return terms;
    }
    const auto probs = torch::sigmoid(logits);
    const bool need_dice = config.kind != LossKind::boundary &&
                           !(config.kind == LossKind::combined && config.alpha == 0.0);
    const bool need_boundary = config.kind != LossKind::dice &&
                               !(config.kind == LossKind::combined && config.alpha == 1.0);
    if (need_dice) {
        terms.dice = masked_dice_loss(probs, target, valid);
    }
    if (need_boundary) {
        terms.boundary = boundary_loss(probs, target, config.boundary, valid);
    }
    switch (config.kind) {
        case LossKind::dice: terms.total = terms.dice; break;
        case LossKind::boundary: terms.total = terms.boundary; break;
        case LossKind::combined:
            check_alpha(config.alpha);
            terms.total = config.alpha == 1.0   ? terms.dice
                          : config.alpha == 0.0 ? terms.boundary
                                                : combined_loss(terms.dice, terms.boundary, config.alpha);
            break;
        case LossKind::slba:
            require(slba != nullptr, ErrorCode::invalid_config, "slba loss needs learnable weights");
            terms.total = slba_loss(terms.dice, terms.boundary, *slba);
            break;
        case LossKind::ce: break;
    }
    return terms;
}

std::pair<double, double> effective_weights(const LossConfig& config, const SlbaWeights* slba) {
    switch (config.kind) {
        case LossKind::ce: return {0.0, 0.0};
        case LossKind::dice: return {1.0, 0.0};
        case LossKind::boundary: return {0.0, 1.0};
        case LossKind::combined: return {config.alpha, 1.0 - config.alpha};
        case LossKind::slba: {
            require(slba != nullptr && !slba->is_empty(), ErrorCode::invalid_config, "slba weights missing");
            const auto w = (*slba)->weights();
            return {w.w_dice(), w.w_boundary()};
        }
    }
    return {0.0, 0.0};
}

}  // namespace glacier::losses

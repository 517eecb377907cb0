#pragma once

#include <string>

#include <torch/torch.h>

namespace glacier::losses {

inline constexpr double kDiceEpsilon = 1e-7;
inline constexpr double kBoundaryEpsilon = 1e-7;

/// Grids may be [H, W] or batched [N, H, W]; batched inputs are pooled into a
/// single sum (one loss per batch, not a mean of per-image losses).

/// 1 - (2 sum(p g v) + eps) / (sum(p v) + sum(g v) + eps).
/// Masked pixels (v = 0) contribute neither value nor gradient; an all-masked
/// grid yields exactly 0.
torch::Tensor masked_dice_loss(const torch::Tensor& pred, const torch::Tensor& target,
                               const torch::Tensor& valid);

struct BoundaryParams {
    /// Pixel tolerance when matching boundaries.
    int theta = 3;
    /// Morphological window for boundary extraction.
    int kernel = 3;

    void validate() const;
};

/// mask - erode(mask), with erode(p) = 1 - maxpool_k(1 - p) and pixels outside
/// the grid treated as 0. Exact set difference for binary masks; a
/// differentiable surrogate for probabilities.
torch::Tensor extract_boundary(const torch::Tensor& mask, int kernel);

/// 1 - BF1, where boundary precision and recall count boundary mass within
/// theta pixels (max-pool extension) of the other boundary. Masked pixels are
/// set to background in both pred and target before extraction. Returns 0
/// when neither grid has a boundary. Pass an undefined `valid` for no mask.
torch::Tensor boundary_loss(const torch::Tensor& pred, const torch::Tensor& target,
                            const BoundaryParams& params = {}, const torch::Tensor& valid = {});

/// alpha * l_dice + (1 - alpha) * l_boundary, alpha in [0, 1]. The endpoints
/// return the selected component itself.
torch::Tensor combined_loss(const torch::Tensor& l_dice, const torch::Tensor& l_boundary, double alpha);
double combined_loss(double l_dice, double l_boundary, double alpha);

/// Mean binary cross-entropy with logits over valid pixels; 0 when none is valid.
torch::Tensor cross_entropy_baseline(const torch::Tensor& logits, const torch::Tensor& target,
                                     const torch::Tensor& valid);

struct LossWeights {
    double alpha = 0.5;
    double alpha1 = 1.0;
    double alpha2 = 1.0;

    double w_dice() const { return 1.0 / (2.0 * alpha1 * alpha1); }
    double w_boundary() const { return 1.0 / (2.0 * alpha2 * alpha2); }
};

/// Learnable SLBA weights stored as log(alpha1), log(alpha2) so both alphas
/// stay positive. Both start at 1.
class SlbaWeightsImpl : public torch::nn::Module {
public:
    SlbaWeightsImpl(double alpha1 = 1.0, double alpha2 = 1.0);

    torch::Tensor log_alpha1;
    torch::Tensor log_alpha2;

    double alpha1() const;
    double alpha2() const;
    LossWeights weights() const;
};
TORCH_MODULE(SlbaWeights);

/// l_dice / (2 a1^2) + l_boundary / (2 a2^2) + |ln(a1 a2)| with a = exp(log_a).
/// At a1 a2 == 1 the absolute value contributes subgradient 0.
torch::Tensor slba_loss(const torch::Tensor& l_dice, const torch::Tensor& l_boundary,
                        const torch::Tensor& log_alpha1, const torch::Tensor& log_alpha2);
torch::Tensor slba_loss(const torch::Tensor& l_dice, const torch::Tensor& l_boundary, SlbaWeights& weights);

/// Scalar form in the alphas themselves; throws invalid_weight unless both > 0.
double slba_loss(double l_dice, double l_boundary, double alpha1, double alpha2,
                 bool with_regularizer = true);

struct SlbaGradient {
    double d_dice = 0.0;
    double d_boundary = 0.0;
    double d_alpha1 = 0.0;
    double d_alpha2 = 0.0;
};

/// Closed-form gradient of the scalar SLBA objective.
SlbaGradient slba_gradient(double l_dice, double l_boundary, double alpha1, double alpha2,
                           bool with_regularizer = true);

struct AlphaFitOptions {
    double alpha1 = 1.0;
    double alpha2 = 1.0;
    int steps = 200000;
    double learning_rate = 0.05;
    bool with_regularizer = true;
};

struct AlphaFit {
    double alpha1 = 1.0;
    double alpha2 = 1.0;
    double objective = 0.0;
};

/// Subgradient descent on (log a1, log a2) with step lr / sqrt(1 + k / 100)
/// for fixed component losses.
AlphaFit fit_slba_alphas(double l_dice, double l_boundary, const AlphaFitOptions& options = {});

enum class LossKind { ce, dice, boundary, combined, slba };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

struct LossConfig {
    LossKind kind = LossKind::slba;
    /// Mixing weight for LossKind::combined.
    double alpha = 0.5;
    BoundaryParams boundary;
};

struct LossTerms {
    torch::Tensor total;
    torch::Tensor dice;      // undefined unless computed
    torch::Tensor boundary;  // undefined unless computed
};

/// Objective for one batch. `slba` must be non-null for LossKind::slba.
LossTerms compute_loss(const LossConfig& config, const torch::Tensor& logits, const torch::Tensor& target,
                       const torch::Tensor& valid, SlbaWeights* slba = nullptr);

/// Effective (w_dice, w_boundary) of the objective: fixed for dice/boundary/
/// combined, learned for slba, (0, 0) for ce.
std::pair<double, double> effective_weights(const LossConfig& config, const SlbaWeights* slba = nullptr);

}  // namespace glacier::losses

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mdmlp/preprocess.hpp"
#include "mdmlp/rng.hpp"
#include "mdmlp/spectral.hpp"
#include "mdmlp/tape.hpp"

namespace mdmlp {

enum class FusionMode { Add, Mlp, Agm, Eia };
enum class SeasonalFusionMode { Azcf, WoWs, MlpF, DwlF, CwaF, Rcf, Ctf };
enum class CapacityMode { Dca, Fixed };

// cof = ceil(sqrt(C) / tau), evaluated in exact integer arithmetic.
std::int64_t dca_coefficient(std::int64_t channels, std::int64_t tau);

struct ModelConfig {
    std::int64_t lookback = 96;   // L
    std::int64_t horizon = 96;    // Q
    std::int64_t channels = 7;    // C
    std::int64_t embed_dim = 8;   // E
    std::int64_t base_neurons = 256; // n_h
    std::int64_t tau = 5;
    double dropout_trend = 0.1;
    double dropout_strong = 0.1;
    double dropout_weak = 0.1;
    double dropout_eia = 0.1;
    FusionMode fusion = FusionMode::Eia;
    SeasonalFusionMode seasonal_fusion = SeasonalFusionMode::Azcf;
    CapacityMode capacity = CapacityMode::Dca;
    std::int64_t fixed_neurons = 256; // strong-branch width when capacity == Fixed
    double ema_a = 0.3;
    double shrink_lambda = 0.01;
    double leaky_slope = 0.01;
    bool gelu_exact = false;
    bool revin_affine = false;
    double revin_eps = 1e-5;
    std::uint64_t seed = 1;

    void validate() const; // throws ConfigError

    std::int64_t cof() const;
    std::int64_t n1() const { return lookback * cof(); }
    std::int64_t n2() const {
        return (capacity == CapacityMode::Dca ? base_neurons : fixed_neurons) * cof();
    }
    std::int64_t n3() const { return 2 * lookback * cof(); }
};

struct LinearParams {
    Tensor w, b;
};

// All learnable arrays, grouped by branch. Fusion-mode specific tensors stay
// empty unless the config allocates them; entries() walks the active set in a
// fixed canonical order.
struct ModelParams {
    LinearParams trend1, trend2, trend3;
    Tensor embed_w; // [E]
    FreMlpParams fre;
    LinearParams strong1, strong2;
    LinearParams weak1, weak2;
    Tensor azcf_alpha;              // [1 x C] (AZCF and RCF)
    Tensor dwl_alpha1, dwl_alpha2;  // [1 x C] each
    Tensor ctf_alpha;               // [Q x C]
    LinearParams seasonal_mlp;      // MLP-F, 2C -> C
    LinearParams cwa_gate;          // CWA-F, 2C -> C
    LinearParams eia1, eia2;        // beta network, 2C -> 4C -> C
    LinearParams fusion_mlp;        // MLP trend/seasonal fusion, 2C -> C
    Tensor revin_gamma, revin_delta; // [C], optional affine

    std::vector<std::pair<std::string, Tensor*>> entries();
    std::vector<std::pair<std::string, const Tensor*>> entries() const;
    std::int64_t parameter_count() const;
    ModelParams clone() const;
};

ModelParams init_params(const ModelConfig& cfg, Rng& rng);

// Every named intermediate of one forward pass.
struct ForwardTrace {
    Tensor x1, x2;                  // [C x L]
    Tensor y1, y21, y22, y2, y3, y; // [Q x C]
    Tensor beta;                    // [Q x C], empty when no beta network ran
    RevinStats stats;
};

// Tape handles for a batched forward pass; shapes [B x Q x C] unless noted.
struct ForwardGraph {
    Value y;
    Value y1, y21, y22, y2, y3;
    std::optional<Value> beta;
    Value x1, x2; // [B*C x L]
    std::vector<std::pair<std::string, Value>> params; // leafed, entries() order
    BatchRevinStats stats;
};

ForwardGraph build_forward(Tape& tape, const Tensor& batch /* [B x L x C] */,
                           const ModelParams& params, const ModelConfig& cfg,
                           Rng& rng, bool training, bool with_grad);

std::pair<Tensor, ForwardTrace> model_forward(const Tensor& x /* [L x C] */,
                                              const ModelParams& params,
                                              const ModelConfig& cfg, Rng& rng,
                                              bool training);

// Spec-level branch entry points on [C x L] inputs, returning [Q x C].
Tensor trend_forward(const Tensor& x1, const ModelParams& p, const ModelConfig& cfg,
                     Rng& rng, bool training);
Tensor strong_seasonal_forward(const Tensor& x2, const ModelParams& p, const ModelConfig& cfg,
                               Rng& rng, bool training);
Tensor weak_seasonal_forward(const Tensor& x2, const ModelParams& p, const ModelConfig& cfg,
                             Rng& rng, bool training);
Tensor seasonal_fuse(const Tensor& y21, const Tensor& y22, SeasonalFusionMode mode,
                     const ModelParams& p, const ModelConfig& cfg, Rng& rng);
std::pair<Tensor, Tensor> eia_fuse(const Tensor& y1, const Tensor& y2, FusionMode mode,
                                   const ModelParams& p, const ModelConfig& cfg, Rng& rng,
                                   bool training);

std::string fusion_name(FusionMode m);
std::string seasonal_fusion_name(SeasonalFusionMode m);
FusionMode fusion_from_string(const std::string& s);
SeasonalFusionMode seasonal_fusion_from_string(const std::string& s);

// Versioned binary checkpoint: config echo plus named little-endian f64
// arrays, with a human-readable sidecar of parameter counts at <path>.txt.
void save_checkpoint(const std::string& path, const std::string& config_echo,
                     const ModelParams& params);
struct Checkpoint {
    std::string config_echo;
    std::vector<std::pair<std::string, Tensor>> tensors;
};
Checkpoint load_checkpoint(const std::string& path);
ModelParams params_from_checkpoint(const Checkpoint& ckpt, const ModelConfig& cfg);

} // namespace mdmlp

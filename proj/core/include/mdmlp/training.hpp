#pragma once

#include <string>
#include <vector>

#include "mdmlp/model.hpp"
#include "mdmlp/preprocess.hpp"

namespace mdmlp {

enum class LossKind { Mse, Mae, Arctan };

std::string loss_name(LossKind k);
LossKind loss_from_string(const std::string& s);

struct TrainConfig {
    int epochs = 30;
    std::int64_t batch_size = 32;
    double base_lr = 5e-3;
    double lr_k = 1.0;   // sigmoid steepness
    double lr_w = -1.0;  // midpoint epoch; -1 resolves to epochs / 2
    double weight_decay = 1e-4;
    LossKind loss = LossKind::Mse;
    int patience = 5;
    std::uint64_t seed = 1;
    double clip_norm = -1.0; // -1 resolves to 0 for mse, 5 otherwise

    void validate() const;
    double resolved_lr_w() const { return lr_w < 0.0 ? static_cast<double>(epochs) / 2.0 : lr_w; }
    double resolved_clip() const {
        return clip_norm < 0.0 ? (loss == LossKind::Mse ? 0.0 : 5.0) : clip_norm;
    }
};

// lr(e) = base_lr / (1 + exp(k * (e - w))), monotone non-increasing for k > 0.
double lr_at(int epoch, const TrainConfig& cfg);

// Differentiable batch loss on the tape.
Value loss_value(Tape& t, Value pred, Value target, LossKind kind);
// Data-side loss for frozen tensors.
double loss_eval(const Tensor& pred, const Tensor& target, LossKind kind);

// Decoupled weight decay followed by bias-corrected adaptive moments.
class AdamW {
  public:
    explicit AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<std::pair<std::string, Tensor*>> params,
              const std::vector<Tensor>& grads, double lr, double weight_decay);

    std::int64_t steps_taken() const { return t_; }

  private:
    double beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

// Scale all gradients by clip/norm when the global L2 norm exceeds clip.
void clip_global_norm(std::vector<Tensor>& grads, double clip);

struct EpochRecord {
    int epoch;
    double train_loss, val_mse, val_mae, lr;
};

struct TrainResult {
    ModelParams params; // best-val checkpoint
    std::vector<EpochRecord> history;
    int best_epoch = -1;
    double best_val_mse = 0.0;
};

TrainResult train_model(const WindowedDataset& train_split, const WindowedDataset& val_split,
                        const ModelConfig& mcfg, const TrainConfig& tcfg);

struct ForecastReport {
    double mse = 0.0, mae = 0.0;
    std::vector<double> mse_per_step, mae_per_step; // indexed by horizon offset
    std::int64_t windows = 0;
};

// Dropout-free forward over every window; metrics on the standardized scale.
ForecastReport evaluate(const ModelParams& params, const WindowedDataset& split,
                        const ModelConfig& cfg, std::int64_t eval_batch = 256);

// Writes config.txt, history.csv and best.ckpt under dir; creates dir.
void emit_run_dir(const std::string& dir, const std::string& config_echo,
                  const TrainResult& result);
std::string history_csv(const std::vector<EpochRecord>& history);

} // namespace mdmlp

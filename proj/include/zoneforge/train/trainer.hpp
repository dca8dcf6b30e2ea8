#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>

#include "zoneforge/core/io.hpp"
#include "zoneforge/core/types.hpp"
#include "zoneforge/unet/net.hpp"

namespace zoneforge::train {

using unet::ArchConfig;
using unet::NetworkParams;
using unet::Tensor4;

struct OptimizerConfig {
    /// LearningRate: eta_t = eta0 / (1 + decay * t), constant-weight gradients.
    /// Weight: constant eta0, L2 term decay * w added to the gradient.
    enum class DecayMode { LearningRate, Weight };

    double learning_rate = 1e-3;
    double momentum = 0.9;
    double decay = 1e-6;
    DecayMode decay_mode = DecayMode::LearningRate;
    int batch_size = 25;
    int epochs = 1;
    /// Per-output-channel (PG, CZ, PZ) gradient scaling; {1,0,0} etc. trains a
    /// single zone for comparison against the joint 3-channel default.
    std::array<double, 3> zone_weights{1.0, 1.0, 1.0};

    void validate() const;
};

/// Training regime: one model per input combination (IM) or a single unified
/// model fed fixed six-slot inputs with zero-filled absent channels (UM).
struct Regime {
    enum class Kind { IM, UM } kind = Kind::IM;
    std::optional<InputCombo> combo; // mandatory for IM

    static Regime im(InputCombo c) { return {Kind::IM, c}; }
    static Regime um() { return {Kind::UM, std::nullopt}; }

    int in_channels() const { return kind == Kind::UM ? kMapKindCount : combo->channel_count(); }
    void validate() const;
};

/// Per-map-kind z-score statistics, computed on the training population only
/// and frozen into the checkpoint for test-time use.
struct NormStats {
    std::array<double, kMapKindCount> mean{};
    std::array<double, kMapKindCount> sd{};
    std::array<bool, kMapKindCount> present{};
    int n_cases = 0;
    std::string source = "train";
};

NormStats compute_norm_stats(std::span<const CaseRecord> cases,
                             const std::vector<MapKind>& kinds);

/// One training sample: a (case, slice, combo) descriptor. Tensors are
/// materialized on demand so a 10,500-sample UM dataset stays cheap.
struct TrainSample {
    const CaseRecord* rec = nullptr;
    int slice = 0;
    InputCombo combo;
    const std::string& case_id() const { return rec->case_id; }
};

/// IM dataset: one sample per case and slice, channels = the combo's maps in
/// canonical order. Throws DataError naming the case and map when one is
/// missing.
std::vector<TrainSample> assemble_im(std::span<const CaseRecord> cases, InputCombo combo);

/// UM dataset: one sample per case, slice and canonical combination; inputs
/// are materialized as fixed six-channel tensors with zero-filled absences.
std::vector<TrainSample> assemble_um(std::span<const CaseRecord> cases);

/// Normalized input tensor (1, C, H, W); C = combo channels for IM, 6 for UM.
Tensor4<float> materialize_input(const TrainSample& s, const NormStats& norm, bool unified);
/// Binary target (1, 3, H, W): PG, CZ, PZ.
Tensor4<float> materialize_target(const TrainSample& s);

/// Mean binary cross-entropy over every pixel and channel, predictions
/// clipped to [1e-7, 1 - 1e-7]; grad is d(loss)/d(pred) at the clipped value.
template <typename T>
struct CeLoss {
    double loss = 0.0;
    Tensor4<T> grad;
};

template <typename T>
CeLoss<T> ce_loss(const Tensor4<T>& pred, const Tensor4<T>& target);

template <typename T>
double ce_loss_value(const Tensor4<T>& pred, const Tensor4<T>& target);

/// Classical momentum SGD with per-update decay:
///   eta_t = eta0 / (1 + decay * t);  v <- mu * v + g;  w <- w - eta_t * v.
void sgd_step(std::span<float> weights, std::span<const float> grads,
              std::span<float> velocity, const OptimizerConfig& cfg, std::uint64_t t);

struct TrainLogRow {
    int epoch = 0;
    double mean_loss = 0.0;
    double wall_time_s = 0.0;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
};

void write_trainlog(const TrainLog& log, const std::filesystem::path& path,
                    bool zero_wall_time);

struct FitResult {
    NetworkParams<float> params;      // final
    NetworkParams<float> best_params; // lowest epoch mean loss
    int best_epoch = 0;
    std::uint64_t steps = 0;
    TrainLog log;
    NormStats norm;
    Regime regime;
};

/// Optional per-epoch hook; returning false stops training after that epoch
/// (early stopping). Does not affect determinism of the epochs that ran.
using EpochCallback =
    std::function<bool(int epoch, double mean_loss, const NetworkParams<float>& params)>;

/// Full training loop: seeded shuffling, mini-batches, per-epoch mean loss.
/// Deterministic in (data, config, seed) for any thread count: per-sample
/// gradients are reduced in sample order.
FitResult fit(const Regime& regime, std::span<const CaseRecord> cases, const ArchConfig& arch,
              const OptimizerConfig& opt, Rng rng, int threads = 1,
              const EpochCallback& on_epoch = nullptr);

/// Slice-wise inference; channels thresholded strictly above 0.5, then zone
/// consistency is repaired (pz := pz & pg; cz := cz & pg & !pz).
MaskSet predict(const NetworkParams<float>& params, const NormStats& norm,
                const CaseRecord& rec, const InputCombo& combo, bool unified,
                int threads = 1);

/// Checkpoint: JSON header line (arch, step, rng, regime, norm stats) plus an
/// f32le parameter payload; reloads bit-exactly.
struct CheckpointMeta {
    std::uint64_t step = 0;
    std::uint64_t rng_seed = 0, rng_counter = 0;
    std::array<std::uint64_t, 4> rng_state{};
    Regime regime;
    NormStats norm;
};

void save_checkpoint(const NetworkParams<float>& params, const CheckpointMeta& meta,
                     const std::filesystem::path& path);

struct Checkpoint {
    NetworkParams<float> params;
    CheckpointMeta meta;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace zoneforge::train

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ttt/dataset.hpp"
#include "ttt/model.hpp"
#include "ttt/text_codec.hpp"

namespace ttt {

/// Learning rate used for fine-tuning pretrained models; available through --lr.
inline constexpr double kFineTuneLearningRate = 1e-5;

struct TrainConfig {
    int epochs = 3;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 16;
    std::uint64_t seed = 42;
    std::string tier = "tiny";
    std::string data_path;  // directory holding dataset.jsonl and vocab.json
    double subset_fraction = 1.0;

    /// Throws InvalidArgument.
    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct OptimizerState {
    std::vector<float> m;
    std::vector<float> v;
    std::int64_t step = 0;
};

/// One bias-corrected Adam update. Throws ShapeMismatch or NonFiniteGradient
/// (parameters and state untouched in both cases).
void adam_step(std::span<float> params, std::span<const float> grads, OptimizerState& state, const TrainConfig& config);

struct TaskReport {
    std::size_t count = 0;
    double exact_match = 0.0;
    double semantic_accuracy = 0.0;
    double token_accuracy = 0.0;
};

struct EvalReport {
    std::map<TaskType, TaskReport> per_task;
    std::size_t samples = 0;
    double loss = 0.0;  // teacher-forced masked cross-entropy
    double exact_match = 0.0;
    double semantic_accuracy = 0.0;
    double token_accuracy = 0.0;

    /// Mean of the per-task exact-match rates.
    double mean_exact_match() const;
};

struct EpochMetrics {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    EvalReport val;
};

struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    ModelConfig model_config;
    Vocabulary vocab;
    std::vector<float> params;
    TrainConfig train_config;
    std::vector<EpochMetrics> history;
    OptimizerState optimizer;
    int epochs_completed = 0;
};

/// Renders each board once and keeps its model input.
class ImageCache {
public:
    std::span<const float> get(const std::string& board);

private:
    std::unordered_map<std::string, std::vector<float>> images_;
};

/// Formatted teacher-forcing pairs plus their images, ready for Model::loss_and_gradient.
struct PreparedSet {
    std::vector<const Sample*> samples;
    std::vector<FormattedPair> pairs;
    std::vector<std::span<const float>> images;

    Example example(std::size_t i) const { return {pairs[i].ids, pairs[i].loss_mask, images[i]}; }
};

PreparedSet prepare(std::span<const Sample> samples, const Vocabulary& vocab, ImageCache& images,
                    int max_len = kDefaultMaxLen);

/// loss -> backward -> Adam on one batch. Throws NonFiniteLoss.
LossStats train_step(Model<float>& model, OptimizerState& state, std::span<const Example> batch,
                     const TrainConfig& config);

EvalReport evaluate(const Model<float>& model, const Vocabulary& vocab, std::span<const Sample> samples,
                    ImageCache& images);
EvalReport evaluate(const Checkpoint& checkpoint, std::span<const Sample> samples);

struct TrainHooks {
    std::function<void(const EpochMetrics&)> on_epoch;
    std::function<void(std::int64_t step, const LossStats&)> on_step;
};

/// Seeded shuffle per epoch; batches of the (optionally subsampled) train split; evaluation on the
/// whole val split after each epoch. With `resume`, continues from its completed epochs.
/// Throws DataMissing when no train samples remain, NonFiniteLoss on divergence.
Checkpoint train(const TrainConfig& config, std::span<const Sample> samples, const Vocabulary& vocab,
                 const TrainHooks& hooks = {}, const Checkpoint* resume = nullptr);
/// Loads dataset.jsonl and vocab.json from config.data_path.
Checkpoint train(const TrainConfig& config, const TrainHooks& hooks = {});

/// Samples of the given split; with fraction < 1, a board-grouped subsample of them.
std::vector<Sample> select_split(std::span<const Sample> samples, Split split, double fraction, std::uint64_t seed);

struct ScalingRow {
    std::string tier;
    std::size_t parameter_count = 0;
    double final_train_loss = 0.0;
    EvalReport val;
};

/// Trains every tier with the identical schedule, data and seed.
std::vector<ScalingRow> scaling_experiment(const std::vector<std::string>& tiers, const TrainConfig& base,
                                           std::span<const Sample> samples, const Vocabulary& vocab,
                                           const TrainHooks& hooks = {});

std::string format_scaling_table(const std::vector<ScalingRow>& rows);
std::string scaling_to_json(const std::vector<ScalingRow>& rows);
std::string format_eval_report(const EvalReport& report);
std::string eval_report_to_json(const EvalReport& report);
/// One JSON object per line, one line per epoch.
std::string metrics_to_jsonl(const std::vector<EpochMetrics>& history);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws IoError (with byte offset), BadMagic, VersionMismatch or ShapeMismatch.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a over the serialized parameters; used to show a model was not mutated.
std::uint64_t parameter_hash(std::span<const float> params);

Model<float> model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace ttt

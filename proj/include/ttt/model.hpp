#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttt/text_codec.hpp"

namespace ttt {

struct ModelConfig {
    std::string tier = "tiny";
    int image_size = 96;
    int patch_size = 16;
    int d_model = 64;
    int n_heads = 4;
    int n_enc_layers = 2;
    int n_dec_layers = 2;
    int d_ff = 256;
    int vocab_size = 0;
    int max_seq_len = kDefaultMaxLen;
    double dropout = 0.0;

    int patches_per_side() const { return image_size / patch_size; }
    int num_patches() const { return patches_per_side() * patches_per_side(); }
    int patch_dim() const { return patch_size * patch_size; }
    int head_dim() const { return d_model / n_heads; }

    /// tiny (64, 4 heads, 2/2), small (128, 8, 4/4), medium (256, 8, 4/6). Throws InvalidArgument.
    static ModelConfig for_tier(std::string_view tier, int vocab_size);
    /// Throws InvalidArgument on inconsistent hyperparameters.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr std::string_view kTierNames[] = {"tiny", "small", "medium"};

struct TensorSpec {
    std::string name;
    std::vector<std::int64_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// Named tensors laid out back to back in one flat buffer.
struct ParamLayout {
    struct Linear {
        std::size_t w = 0, b = 0;
        int in = 0, out = 0;
    };
    struct Norm {
        std::size_t g = 0, b = 0;
    };
    struct Attention {
        Linear q, k, v, o;
    };
    struct EncoderLayer {
        Norm ln1, ln2;
        Attention attn;
        Linear fc1, fc2;
    };
    struct DecoderLayer {
        Norm ln1, ln2, ln3;
        Attention self_attn, cross_attn;
        Linear fc1, fc2;
    };

    explicit ParamLayout(const ModelConfig& config);

    std::vector<TensorSpec> tensors;
    std::size_t total = 0;

    Linear patch;
    std::size_t enc_pos = 0;
    std::vector<EncoderLayer> encoder;
    Norm enc_norm;
    std::size_t tok_emb = 0;
    std::size_t dec_pos = 0;
    std::vector<DecoderLayer> decoder;
    Norm dec_norm;
    std::size_t head = 0;  // [d_model, vocab], no bias

    const TensorSpec* find(std::string_view name) const;
};

/// Teacher-forced training example. `image` is the [96*96] model input.
struct Example {
    std::span<const TokenId> ids;
    std::span<const std::uint8_t> mask;
    std::span<const float> image;
};

struct LossStats {
    double loss_sum = 0.0;    // summed cross-entropy over masked positions
    std::size_t masked = 0;   // number of masked positions
    std::size_t correct = 0;  // masked positions whose argmax equals the target

    double mean() const { return masked ? loss_sum / static_cast<double>(masked) : 0.0; }
    double token_accuracy() const { return masked ? static_cast<double>(correct) / static_cast<double>(masked) : 0.0; }
};

struct Generation {
    std::vector<TokenId> tokens;  // generated ids, EOS excluded
    std::string text;
    bool hit_eos = false;
};

/// Patch encoder + causal decoder with cross-attention over all patch states.
/// T is float for training and inference, double for gradient checks.
template <class T>
class Model {
public:
    /// Normal(0, 0.02) weights, unit norm scales, zero shifts and biases.
    Model(const ModelConfig& config, std::uint64_t seed);
    /// Takes ownership of existing values; throws ShapeMismatch on a size mismatch.
    Model(const ModelConfig& config, std::vector<T> values);

    const ModelConfig& config() const { return config_; }
    const ParamLayout& layout() const { return *layout_; }
    std::size_t parameter_count() const { return values_.size(); }
    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }
    std::span<T> tensor(std::string_view name);

    /// [num_patches, d_model]. Throws ShapeMismatch.
    std::vector<T> encode_image(std::span<const T> image) const;
    /// [len, vocab] logits. Throws ShapeMismatch or SequenceTooLong.
    std::vector<T> decoder_forward(std::span<const TokenId> ids, std::span<const T> enc_states) const;

    /// Sum of masked cross-entropies over the batch. Throws EmptyMask when nothing is masked.
    LossStats loss(std::span<const Example> batch) const;
    /// As loss(); writes d(mean loss)/d(params) into `grad` (resized, overwritten).
    LossStats loss_and_gradient(std::span<const Example> batch, std::vector<T>& grad) const;

    /// Greedy decoding after forcing BOS question SEP. Ties go to the smallest id.
    /// Throws QuestionTooLong when the prefix leaves no room for max_new tokens.
    Generation generate(std::span<const float> image, std::string_view question, const Vocabulary& vocab,
                        int max_new = 24) const;

private:
    ModelConfig config_;
    std::shared_ptr<const ParamLayout> layout_;
    std::vector<T> values_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace ttt

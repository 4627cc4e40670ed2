// Binary layout (all integers little-endian):
//   "TTTC" | u32 version | u64 length + canonical JSON header (configs, vocab, history)
//   | u32 tensor count | per tensor: u32 name length + name, u32 rank, u64 dims[rank], f32 values
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "ttt/error.hpp"
#include "ttt/trainer.hpp"

namespace ttt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'T', 'T', 'C'};
const std::string kMomentPrefix[2] = {"adam.m/", "adam.v/"};

using json = nlohmann::json;

json model_config_json(const ModelConfig& c) {
    return {{"tier", c.tier},         {"image_size", c.image_size},     {"patch_size", c.patch_size},
            {"d_model", c.d_model},   {"n_heads", c.n_heads},           {"n_enc_layers", c.n_enc_layers},
            {"n_dec_layers", c.n_dec_layers}, {"d_ff", c.d_ff},         {"vocab_size", c.vocab_size},
            {"max_seq_len", c.max_seq_len},   {"dropout", c.dropout}};
}

ModelConfig model_config_from(const json& j) {
    ModelConfig c;
    c.tier = j.at("tier").get<std::string>();
    c.image_size = j.at("image_size").get<int>();
    c.patch_size = j.at("patch_size").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_enc_layers = j.at("n_enc_layers").get<int>();
    c.n_dec_layers = j.at("n_dec_layers").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.dropout = j.at("dropout").get<double>();
    return c;
}

json train_config_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},     {"learning_rate", c.learning_rate}, {"beta1", c.beta1},
            {"beta2", c.beta2},       {"eps", c.eps},                     {"batch_size", c.batch_size},
            {"seed", c.seed},         {"tier", c.tier},                   {"data_path", c.data_path},
            {"subset_fraction", c.subset_fraction}};
}

TrainConfig train_config_from(const json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.eps = j.at("eps").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.tier = j.at("tier").get<std::string>();
    c.data_path = j.at("data_path").get<std::string>();
    c.subset_fraction = j.at("subset_fraction").get<double>();
    return c;
}

json report_to(const EvalReport& r) {
    json tasks = json::object();
    for (const auto& [task, t] : r.per_task) {
        tasks[std::string(to_string(task))] = {{"count", t.count},
                                               {"exact_match", t.exact_match},
                                               {"semantic_accuracy", t.semantic_accuracy},
                                               {"token_accuracy", t.token_accuracy}};
    }
    return {{"samples", r.samples},
            {"loss", r.loss},
            {"exact_match", r.exact_match},
            {"semantic_accuracy", r.semantic_accuracy},
            {"token_accuracy", r.token_accuracy},
            {"per_task", tasks}};
}

EvalReport report_from(const json& j) {
    EvalReport r;
    r.samples = j.at("samples").get<std::size_t>();
    r.loss = j.at("loss").get<double>();
    r.exact_match = j.at("exact_match").get<double>();
    r.semantic_accuracy = j.at("semantic_accuracy").get<double>();
    r.token_accuracy = j.at("token_accuracy").get<double>();
    for (const auto& [name, t] : j.at("per_task").items()) {
        r.per_task[task_from_string(name)] =
            TaskReport{t.at("count").get<std::size_t>(), t.at("exact_match").get<double>(),
                       t.at("semantic_accuracy").get<double>(), t.at("token_accuracy").get<double>()};
    }
    return r;
}

class Writer {
public:
    template <class U>
    void scalar(U v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(U));
    }
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes.insert(bytes.end(), p, p + n);
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - offset_ < n) {
            throw Error(ErrorCode::IoError, std::string("checkpoint truncated reading ") + what + " at byte offset " +
                                                std::to_string(offset_));
        }
    }
    template <class U>
    U scalar(const char* what) {
        need(sizeof(U), what);
        U v;
        std::memcpy(&v, bytes_.data() + offset_, sizeof(U));
        offset_ += sizeof(U);
        return v;
    }
    std::string string(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + offset_), n);
        offset_ += n;
        return s;
    }
    void floats(float* out, std::size_t n, const char* what) {
        if (n > (bytes_.size() - offset_) / sizeof(float)) need(n * sizeof(float), what);
        std::memcpy(out, bytes_.data() + offset_, n * sizeof(float));
        offset_ += n * sizeof(float);
    }
    std::size_t offset() const { return offset_; }
    bool done() const { return offset_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t offset_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    const ParamLayout layout(ckpt.model_config);
    if (ckpt.params.size() != layout.total) {
        throw Error(ErrorCode::ShapeMismatch, "checkpoint parameters do not match the model config");
    }
    const bool has_moments = !ckpt.optimizer.m.empty();
    if (has_moments && (ckpt.optimizer.m.size() != layout.total || ckpt.optimizer.v.size() != layout.total)) {
        throw Error(ErrorCode::ShapeMismatch, "optimizer moments do not match the model config");
    }

    json header;
    header["format_version"] = Checkpoint::kFormatVersion;
    header["model_config"] = model_config_json(ckpt.model_config);
    header["vocab"] = ckpt.vocab.tokens();
    header["train_config"] = train_config_json(ckpt.train_config);
    json history = json::array();
    for (const auto& m : ckpt.history) {
        history.push_back({{"epoch", m.epoch}, {"train_loss", m.train_loss}, {"val", report_to(m.val)}});
    }
    header["history"] = history;
    header["optimizer_step"] = ckpt.optimizer.step;
    header["epochs_completed"] = ckpt.epochs_completed;
    const std::string text = header.dump();

    Writer w;
    w.raw(kMagic, sizeof(kMagic));
    w.scalar<std::uint32_t>(Checkpoint::kFormatVersion);
    w.scalar<std::uint64_t>(text.size());
    w.raw(text.data(), text.size());

    const std::size_t groups = has_moments ? 3 : 1;
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(layout.tensors.size() * groups));
    for (std::size_t g = 0; g < groups; ++g) {
        const std::vector<float>& source = g == 0 ? ckpt.params : g == 1 ? ckpt.optimizer.m : ckpt.optimizer.v;
        for (const auto& t : layout.tensors) {
            const std::string name = g == 0 ? t.name : kMomentPrefix[g - 1] + t.name;
            w.scalar<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
            w.raw(name.data(), name.size());
            w.scalar<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
            for (auto dim : t.shape) w.scalar<std::uint64_t>(static_cast<std::uint64_t>(dim));
            w.raw(source.data() + t.offset, t.size * sizeof(float));
        }
    }
    return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.need(sizeof(kMagic), "magic");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw Error(ErrorCode::BadMagic, "not a checkpoint (expected magic TTTC)");
    }
    r.string(sizeof(kMagic), "magic");
    const auto version = r.scalar<std::uint32_t>("version");
    if (version != Checkpoint::kFormatVersion) {
        throw Error(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                    std::to_string(Checkpoint::kFormatVersion));
    }
    const auto text_size = r.scalar<std::uint64_t>("header length");
    r.need(text_size, "header");
    const std::string text = r.string(static_cast<std::size_t>(text_size), "header");

    Checkpoint ckpt;
    try {
        const json header = json::parse(text);
        ckpt.model_config = model_config_from(header.at("model_config"));
        ckpt.vocab = Vocabulary(header.at("vocab").get<std::vector<std::string>>());
        ckpt.train_config = train_config_from(header.at("train_config"));
        for (const auto& m : header.at("history")) {
            ckpt.history.push_back(EpochMetrics{m.at("epoch").get<int>(), m.at("train_loss").get<double>(),
                                                report_from(m.at("val"))});
        }
        ckpt.optimizer.step = header.at("optimizer_step").get<std::int64_t>();
        ckpt.epochs_completed = header.at("epochs_completed").get<int>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("checkpoint header: ") + e.what());
    }
    if (ckpt.model_config.vocab_size != ckpt.vocab.size()) {
        throw Error(ErrorCode::ShapeMismatch, "vocab size disagrees with model config");
    }

    const ParamLayout layout(ckpt.model_config);
    const auto count = r.scalar<std::uint32_t>("tensor count");
    if (count != layout.tensors.size() && count != 3 * layout.tensors.size()) {
        throw Error(ErrorCode::ShapeMismatch, "checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                                                  std::to_string(layout.tensors.size()));
    }
    const std::size_t groups = count / layout.tensors.size();
    ckpt.params.assign(layout.total, 0.0f);
    if (groups == 3) {
        ckpt.optimizer.m.assign(layout.total, 0.0f);
        ckpt.optimizer.v.assign(layout.total, 0.0f);
    }
    for (std::size_t g = 0; g < groups; ++g) {
        std::vector<float>& target = g == 0 ? ckpt.params : g == 1 ? ckpt.optimizer.m : ckpt.optimizer.v;
        for (const auto& t : layout.tensors) {
            const std::string expected = g == 0 ? t.name : kMomentPrefix[g - 1] + t.name;
            const auto name_len = r.scalar<std::uint32_t>("tensor name length");
            const std::string name = r.string(name_len, "tensor name");
            if (name != expected) {
                throw Error(ErrorCode::ShapeMismatch, "expected tensor " + expected + ", found " + name);
            }
            const auto rank = r.scalar<std::uint32_t>("tensor rank");
            if (rank != t.shape.size()) throw Error(ErrorCode::ShapeMismatch, "rank mismatch for " + name);
            for (std::size_t k = 0; k < rank; ++k) {
                const auto dim = r.scalar<std::uint64_t>("tensor dims");
                if (dim != static_cast<std::uint64_t>(t.shape[k])) {
                    throw Error(ErrorCode::ShapeMismatch, "shape mismatch for " + name);
                }
            }
            r.floats(target.data() + t.offset, t.size, "tensor values");
        }
    }
    if (!r.done()) {
        throw Error(ErrorCode::IoError, "trailing bytes after tensors at byte offset " + std::to_string(r.offset()));
    }
    return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    const auto bytes = serialize_checkpoint(checkpoint);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace ttt

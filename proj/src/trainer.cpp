#include "ttt/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "ttt/error.hpp"
#include "ttt/kernels.hpp"
#include "ttt/render.hpp"

namespace ttt {

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorCode::InvalidArgument, std::string("train config: ") + what);
    };
    require(epochs >= 1, "epochs must be at least 1");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning rate must be positive");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
    require(eps > 0.0, "eps must be positive");
    require(batch_size >= 1, "batch size must be at least 1");
    require(subset_fraction > 0.0 && subset_fraction <= 1.0, "subset fraction must lie in (0, 1]");
}

void adam_step(std::span<float> params, std::span<const float> grads, OptimizerState& state, const TrainConfig& config) {
    if (grads.size() != params.size()) {
        throw Error(ErrorCode::ShapeMismatch, "gradient size " + std::to_string(grads.size()) +
                                                  " does not match parameter size " + std::to_string(params.size()));
    }
    if (state.m.empty() && state.v.empty()) {
        state.m.assign(params.size(), 0.0f);
        state.v.assign(params.size(), 0.0f);
    }
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw Error(ErrorCode::ShapeMismatch, "optimizer moments do not match the parameters");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw Error(ErrorCode::NonFiniteGradient, "gradient entry " + std::to_string(i) + " is not finite");
        }
    }
    const std::int64_t t = state.step + 1;
    const kernels::AdamParams p{
        static_cast<float>(config.learning_rate),
        static_cast<float>(config.beta1),
        static_cast<float>(config.beta2),
        static_cast<float>(config.eps),
        static_cast<float>(1.0 - std::pow(config.beta1, static_cast<double>(t))),
        static_cast<float>(1.0 - std::pow(config.beta2, static_cast<double>(t))),
    };
    kernels::adam_update(params.data(), grads.data(), state.m.data(), state.v.data(), params.size(), p);
    state.step = t;
}

double EvalReport::mean_exact_match() const {
    if (per_task.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [task, r] : per_task) sum += r.exact_match;
    return sum / static_cast<double>(per_task.size());
}

std::span<const float> ImageCache::get(const std::string& board) {
    auto it = images_.find(board);
    if (it == images_.end()) {
        it = images_.emplace(board, image_to_model_input(render(Board::parse(board)))).first;
    }
    return it->second;
}

PreparedSet prepare(std::span<const Sample> samples, const Vocabulary& vocab, ImageCache& images, int max_len) {
    PreparedSet set;
    set.samples.reserve(samples.size());
    set.pairs.reserve(samples.size());
    set.images.reserve(samples.size());
    for (const auto& s : samples) {
        set.samples.push_back(&s);
        set.pairs.push_back(format_pair(s.question, s.answer, vocab, max_len));
        set.images.push_back(images.get(s.board));
    }
    return set;
}

LossStats train_step(Model<float>& model, OptimizerState& state, std::span<const Example> batch,
                     const TrainConfig& config) {
    std::vector<float> grad;
    const LossStats stats = model.loss_and_gradient(batch, grad);
    if (!std::isfinite(stats.loss_sum)) {
        throw Error(ErrorCode::NonFiniteLoss, "loss diverged at optimizer step " + std::to_string(state.step + 1) +
                                                  " (sum " + std::to_string(stats.loss_sum) + " over " +
                                                  std::to_string(stats.masked) + " targets)");
    }
    adam_step(model.values(), grad, state, config);
    return stats;
}

EvalReport evaluate(const Model<float>& model, const Vocabulary& vocab, std::span<const Sample> samples,
                    ImageCache& images) {
    struct Tally {
        std::size_t count = 0, exact = 0, semantic = 0, masked = 0, correct = 0;
    };
    std::map<TaskType, Tally> tallies;
    Tally total;
    double loss_sum = 0.0;
    for (const auto& s : samples) {
        const auto image = images.get(s.board);
        const Generation gen = model.generate(image, s.question, vocab);
        const bool exact = gen.text == normalize(s.answer);
        const bool semantic = parse_answer(s.task, gen.text) == oracle_category(s.task, Board::parse(s.board));

        const FormattedPair pair = format_pair(s.question, s.answer, vocab, model.config().max_seq_len);
        const Example ex{pair.ids, pair.loss_mask, image};
        const LossStats tf = model.loss(std::span<const Example>(&ex, 1));
        loss_sum += tf.loss_sum;

        for (Tally* t : {&tallies[s.task], &total}) {
            t->count += 1;
            t->exact += exact;
            t->semantic += semantic;
            t->masked += tf.masked;
            t->correct += tf.correct;
        }
    }
    auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
    EvalReport report;
    report.samples = total.count;
    report.loss = total.masked ? loss_sum / static_cast<double>(total.masked) : 0.0;
    report.exact_match = ratio(total.exact, total.count);
    report.semantic_accuracy = ratio(total.semantic, total.count);
    report.token_accuracy = ratio(total.correct, total.masked);
    for (const auto& [task, t] : tallies) {
        report.per_task[task] = TaskReport{t.count, ratio(t.exact, t.count), ratio(t.semantic, t.count),
                                           ratio(t.correct, t.masked)};
    }
    return report;
}

Model<float> model_from_checkpoint(const Checkpoint& checkpoint) {
    return Model<float>(checkpoint.model_config, checkpoint.params);
}

EvalReport evaluate(const Checkpoint& checkpoint, std::span<const Sample> samples) {
    const Model<float> model = model_from_checkpoint(checkpoint);
    ImageCache images;
    return evaluate(model, checkpoint.vocab, samples, images);
}

std::vector<Sample> select_split(std::span<const Sample> samples, Split split, double fraction, std::uint64_t seed) {
    std::vector<Sample> out;
    for (const auto& s : samples) {
        if (s.split == split) out.push_back(s);
    }
    if (fraction < 1.0 && !out.empty()) out = subset_by_board(out, fraction, seed);
    return out;
}

Checkpoint train(const TrainConfig& config, std::span<const Sample> samples, const Vocabulary& vocab,
                 const TrainHooks& hooks, const Checkpoint* resume) {
    config.validate();
    const ModelConfig model_config = ModelConfig::for_tier(config.tier, vocab.size());
    const auto train_set = select_split(samples, Split::Train, config.subset_fraction, config.seed);
    const auto val_set = select_split(samples, Split::Val, 1.0, config.seed);
    if (train_set.empty()) throw Error(ErrorCode::DataMissing, "no training samples");

    Checkpoint ckpt;
    ckpt.model_config = model_config;
    ckpt.vocab = vocab;
    if (resume) {
        if (!(resume->model_config == model_config) || !(resume->vocab == vocab)) {
            throw Error(ErrorCode::ShapeMismatch, "resume checkpoint was trained with a different model or vocabulary");
        }
        ckpt.history = resume->history;
        ckpt.optimizer = resume->optimizer;
        ckpt.epochs_completed = resume->epochs_completed;
    }
    Model<float> model = resume ? Model<float>(model_config, resume->params) : Model<float>(model_config, config.seed);

    ImageCache images;
    const PreparedSet prepared = prepare(train_set, vocab, images, model_config.max_seq_len);
    const std::size_t n = prepared.pairs.size();
    const std::size_t batch_size = static_cast<std::size_t>(config.batch_size);

    std::vector<Example> batch;
    for (int epoch = ckpt.epochs_completed; epoch < config.epochs; ++epoch) {
        const auto order = seeded_permutation(n, mix64(config.seed ^ (0x65706f6368ULL + static_cast<std::uint64_t>(epoch))));
        double loss_sum = 0.0;
        std::size_t masked = 0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            batch.clear();
            for (std::size_t i = start; i < std::min(n, start + batch_size); ++i) batch.push_back(prepared.example(order[i]));
            const LossStats stats = train_step(model, ckpt.optimizer, batch, config);
            loss_sum += stats.loss_sum;
            masked += stats.masked;
            if (hooks.on_step) hooks.on_step(ckpt.optimizer.step, stats);
        }
        EpochMetrics metrics;
        metrics.epoch = epoch + 1;
        metrics.train_loss = loss_sum / static_cast<double>(masked);
        if (!val_set.empty()) metrics.val = evaluate(model, vocab, val_set, images);
        ckpt.history.push_back(metrics);
        ckpt.epochs_completed = epoch + 1;
        if (hooks.on_epoch) hooks.on_epoch(metrics);
    }
    ckpt.train_config = config;
    ckpt.params.assign(model.values().begin(), model.values().end());
    return ckpt;
}

Checkpoint train(const TrainConfig& config, const TrainHooks& hooks) {
    if (config.data_path.empty()) throw Error(ErrorCode::DataMissing, "no data path given");
    std::vector<Sample> samples;
    Vocabulary vocab;
    try {
        samples = read_manifest(config.data_path + "/dataset.jsonl");
        vocab = Vocabulary::load(config.data_path + "/vocab.json");
    } catch (const Error& e) {
        if (e.code() == ErrorCode::IoError) throw Error(ErrorCode::DataMissing, e.what());
        throw;
    }
    return train(config, samples, vocab, hooks);
}

std::vector<ScalingRow> scaling_experiment(const std::vector<std::string>& tiers, const TrainConfig& base,
                                           std::span<const Sample> samples, const Vocabulary& vocab,
                                           const TrainHooks& hooks) {
    std::vector<ScalingRow> rows;
    for (const auto& tier : tiers) {
        TrainConfig config = base;
        config.tier = tier;
        const Checkpoint ckpt = train(config, samples, vocab, hooks);
        ScalingRow row;
        row.tier = tier;
        row.parameter_count = ckpt.params.size();
        row.final_train_loss = ckpt.history.empty() ? 0.0 : ckpt.history.back().train_loss;
        if (!ckpt.history.empty()) row.val = ckpt.history.back().val;
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

nlohmann::ordered_json report_json(const EvalReport& r) {
    nlohmann::ordered_json doc;
    doc["samples"] = r.samples;
    doc["loss"] = r.loss;
    doc["exact_match"] = r.exact_match;
    doc["semantic_accuracy"] = r.semantic_accuracy;
    doc["token_accuracy"] = r.token_accuracy;
    doc["mean_exact_match"] = r.mean_exact_match();
    nlohmann::ordered_json tasks = nlohmann::ordered_json::object();
    for (const auto& [task, t] : r.per_task) {
        tasks[std::string(to_string(task))] = {{"count", t.count},
                                               {"exact_match", t.exact_match},
                                               {"semantic_accuracy", t.semantic_accuracy},
                                               {"token_accuracy", t.token_accuracy}};
    }
    doc["per_task"] = tasks;
    return doc;
}

std::string pct(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3) << v;
    return out.str();
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report) { return report_json(report).dump(); }

std::string format_eval_report(const EvalReport& report) {
    std::ostringstream out;
    out << std::left << std::setw(12) << "task" << std::right << std::setw(8) << "count" << std::setw(10) << "exact"
        << std::setw(10) << "semantic" << std::setw(10) << "token" << '\n';
    for (const auto& [task, t] : report.per_task) {
        out << std::left << std::setw(12) << to_string(task) << std::right << std::setw(8) << t.count << std::setw(10)
            << pct(t.exact_match) << std::setw(10) << pct(t.semantic_accuracy) << std::setw(10) << pct(t.token_accuracy)
            << '\n';
    }
    out << std::left << std::setw(12) << "all" << std::right << std::setw(8) << report.samples << std::setw(10)
        << pct(report.exact_match) << std::setw(10) << pct(report.semantic_accuracy) << std::setw(10)
        << pct(report.token_accuracy) << '\n';
    out << "loss " << pct(report.loss) << '\n';
    return out.str();
}

std::string format_scaling_table(const std::vector<ScalingRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(8) << "tier" << std::right << std::setw(12) << "params" << std::setw(12)
        << "train_loss" << std::setw(12) << "next_move" << std::setw(10) << "winner" << std::setw(10) << "valid"
        << std::setw(12) << "mean_exact" << std::setw(12) << "semantic" << '\n';
    for (const auto& row : rows) {
        auto task_em = [&](TaskType t) {
            const auto it = row.val.per_task.find(t);
            return it == row.val.per_task.end() ? 0.0 : it->second.exact_match;
        };
        out << std::left << std::setw(8) << row.tier << std::right << std::setw(12) << row.parameter_count
            << std::setw(12) << pct(row.final_train_loss) << std::setw(12) << pct(task_em(TaskType::NextMove))
            << std::setw(10) << pct(task_em(TaskType::Winner)) << std::setw(10) << pct(task_em(TaskType::Valid))
            << std::setw(12) << pct(row.val.mean_exact_match()) << std::setw(12) << pct(row.val.semantic_accuracy)
            << '\n';
    }
    return out.str();
}

std::string scaling_to_json(const std::vector<ScalingRow>& rows) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        doc.push_back({{"tier", row.tier},
                       {"parameter_count", row.parameter_count},
                       {"final_train_loss", row.final_train_loss},
                       {"val", report_json(row.val)}});
    }
    return doc.dump();
}

std::string metrics_to_jsonl(const std::vector<EpochMetrics>& history) {
    std::string out;
    for (const auto& m : history) {
        nlohmann::ordered_json line;
        line["epoch"] = m.epoch;
        line["train_loss"] = m.train_loss;
        line["val"] = report_json(m.val);
        out += line.dump();
        out += '\n';
    }
    return out;
}

std::uint64_t parameter_hash(std::span<const float> params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(params.data());
    for (std::size_t i = 0; i < params.size_bytes(); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace ttt

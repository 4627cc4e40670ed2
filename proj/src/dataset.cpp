#include "ttt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "ttt/text_codec.hpp"

namespace ttt {

std::string instantiate_answer(const std::string& tmpl, char player, int row, int col);

std::string_view to_string(TaskType task) {
    switch (task) {
        case TaskType::NextMove: return "next_move";
        case TaskType::Winner: return "winner";
        case TaskType::Valid: break;
    }
    return "valid";
}

TaskType task_from_string(std::string_view text) {
    for (TaskType t : kTaskOrder) {
        if (to_string(t) == text) return t;
    }
    throw Error(ErrorCode::ParseError, "unknown task '" + std::string(text) + "'");
}

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "val"; }

Split split_from_string(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "val") return Split::Val;
    throw Error(ErrorCode::ParseError, "unknown split '" + std::string(text) + "'");
}

std::string_view to_string(AnswerKind kind) {
    switch (kind) {
        case AnswerKind::Move: return "move";
        case AnswerKind::GameOver: return "game_over";
        case AnswerKind::InvalidBoard: return "invalid_board";
        case AnswerKind::XWins: return "x_wins";
        case AnswerKind::OWins: return "o_wins";
        case AnswerKind::Draw: return "draw";
        case AnswerKind::Ongoing: return "ongoing";
        case AnswerKind::Valid: return "valid";
        case AnswerKind::NotValid: return "not_valid";
        case AnswerKind::Unknown: break;
    }
    return "unknown";
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_text(std::string_view text, std::uint64_t seed) {
    std::uint64_t h = mix64(seed);
    for (char c : text) h = mix64(h ^ static_cast<unsigned char>(c));
    return h;
}

AnswerCategory oracle_category(TaskType task, const Board& board) {
    const bool valid = board_validity(board);
    switch (task) {
        case TaskType::Valid:
            return {valid ? AnswerKind::Valid : AnswerKind::NotValid, std::nullopt};
        case TaskType::Winner: {
            if (!valid) return {AnswerKind::InvalidBoard, std::nullopt};
            switch (get_winner(board)) {
                case GameOutcome::XWins: return {AnswerKind::XWins, std::nullopt};
                case GameOutcome::OWins: return {AnswerKind::OWins, std::nullopt};
                case GameOutcome::Draw: return {AnswerKind::Draw, std::nullopt};
                case GameOutcome::Ongoing: break;
            }
            return {AnswerKind::Ongoing, std::nullopt};
        }
        case TaskType::NextMove: break;
    }
    if (!valid) return {AnswerKind::InvalidBoard, std::nullopt};
    if (is_terminal(board)) return {AnswerKind::GameOver, std::nullopt};
    return {AnswerKind::Move, best_move(board, current_player(board)).move};
}

namespace {

bool contains_phrase(const std::vector<std::string>& words, std::initializer_list<std::string_view> phrase) {
    const std::size_t n = phrase.size();
    if (n == 0 || words.size() < n) return false;
    for (std::size_t i = 0; i + n <= words.size(); ++i) {
        if (std::equal(phrase.begin(), phrase.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    }
    return false;
}

bool contains_word(const std::vector<std::string>& words, std::string_view w) {
    return std::find(words.begin(), words.end(), w) != words.end();
}

std::optional<Move> find_coordinates(const std::vector<std::string>& words) {
    for (std::size_t i = 0; i + 4 < words.size(); ++i) {
        if (words[i] != "row" || words[i + 2] != "," || words[i + 3] != "column") continue;
        const auto& r = words[i + 1];
        const auto& c = words[i + 4];
        if (r.size() == 1 && c.size() == 1 && r[0] >= '1' && r[0] <= '3' && c[0] >= '1' && c[0] <= '3') {
            return Move{r[0] - '1', c[0] - '1'};
        }
    }
    return std::nullopt;
}

}  // namespace

AnswerCategory parse_answer(TaskType task, std::string_view answer) {
    const auto words = split_words(normalize(answer));
    if (words.empty()) return {};
    switch (task) {
        case TaskType::Valid:
            if (words.front() == "yes") return {AnswerKind::Valid, std::nullopt};
            if (words.front() == "no") return {AnswerKind::NotValid, std::nullopt};
            return {};
        case TaskType::Winner:
            if (contains_phrase(words, {"not", "valid"})) return {AnswerKind::InvalidBoard, std::nullopt};
            if (contains_word(words, "draw")) return {AnswerKind::Draw, std::nullopt};
            if (contains_word(words, "yet")) return {AnswerKind::Ongoing, std::nullopt};
            if (contains_word(words, "wins") || contains_word(words, "winner")) {
                const bool x = contains_word(words, "x");
                const bool o = contains_word(words, "o");
                if (x && !o) return {AnswerKind::XWins, std::nullopt};
                if (o && !x) return {AnswerKind::OWins, std::nullopt};
            }
            return {};
        case TaskType::NextMove: break;
    }
    if (contains_phrase(words, {"not", "valid"})) return {AnswerKind::InvalidBoard, std::nullopt};
    if (contains_phrase(words, {"already", "over"})) return {AnswerKind::GameOver, std::nullopt};
    if (auto move = find_coordinates(words)) return {AnswerKind::Move, move};
    return {};
}

Conversation generate_conversation(TaskType task, const Board& board, std::uint64_t seed) {
    const std::uint64_t h = mix64(hash_text(board.text(), seed) ^ (0x5bd1e995ULL * (static_cast<std::uint64_t>(task) + 1)));
    const auto& questions = TemplateTable::questions().at(task);
    Conversation conv;
    conv.question_template = static_cast<int>(h % questions.size());
    conv.question = questions[static_cast<std::size_t>(conv.question_template)];

    const AnswerCategory category = oracle_category(task, board);
    const auto& answers = TemplateTable::answers().at(category.kind);
    conv.answer_template = conv.question_template % static_cast<int>(answers.size());
    const auto& tmpl = answers[static_cast<std::size_t>(conv.answer_template)];

    char player = 'X';
    int row = 0, col = 0;
    switch (category.kind) {
        case AnswerKind::Move:
            player = to_char(current_player(board));
            row = category.move->row + 1;
            col = category.move->col + 1;
            break;
        case AnswerKind::OWins: player = 'O'; break;
        default: break;
    }
    conv.answer = instantiate_answer(tmpl, player, row, col);
    return conv;
}

std::vector<Sample> build_dataset(std::uint64_t seed) {
    const auto boards = generate_all_boards();
    std::vector<Sample> samples;
    samples.reserve(boards.size() * kTaskOrder.size());
    for (const auto& board : boards) {
        const std::string text = board.text();
        for (TaskType task : kTaskOrder) {
            auto conv = generate_conversation(task, board, seed);
            samples.push_back(Sample{text, task, std::move(conv.question), std::move(conv.answer), Split::Train});
        }
    }
    split_dataset(samples, 0.99, seed);
    return samples;
}

namespace {

// Board groups in order of first appearance; each entry lists sample indices.
std::vector<std::vector<std::size_t>> group_by_board(std::span<const Sample> samples) {
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto [it, inserted] = slot.emplace(samples[i].board, groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    return groups;
}

}  // namespace

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

void split_dataset(std::vector<Sample>& samples, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "split ratio must lie in (0, 1)");
    }
    const auto target = static_cast<std::size_t>(std::floor((1.0 - ratio) * static_cast<double>(samples.size())));
    const auto groups = group_by_board(samples);
    for (auto& s : samples) s.split = Split::Train;
    std::size_t val = 0;
    for (std::size_t g : seeded_permutation(groups.size(), mix64(seed ^ 0x73706c6974ULL))) {
        if (val + groups[g].size() > target) continue;
        for (std::size_t i : groups[g]) samples[i].split = Split::Val;
        val += groups[g].size();
        if (val == target) break;
    }
}

std::vector<Sample> subset_by_board(std::span<const Sample> samples, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "subset fraction must lie in (0, 1]");
    }
    const auto groups = group_by_board(samples);
    const auto keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(groups.size())));
    const auto order = seeded_permutation(groups.size(), mix64(seed ^ 0x737562736574ULL));
    std::vector<std::uint8_t> chosen(samples.size(), 0);
    for (std::size_t k = 0; k < keep; ++k) {
        for (std::size_t i : groups[order[k]]) chosen[i] = 1;
    }
    std::vector<Sample> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (chosen[i]) out.push_back(samples[i]);
    }
    return out;
}

void write_manifest(std::span<const Sample> samples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
    for (const auto& s : samples) {
        nlohmann::ordered_json record;
        record["board"] = s.board;
        record["task"] = std::string(to_string(s.task));
        record["question"] = s.question;
        record["answer"] = s.answer;
        record["split"] = std::string(to_string(s.split));
        out << record.dump() << '\n';
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

std::vector<Sample> read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::vector<Sample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fail = [&](const std::string& why) {
            return Error(ErrorCode::MalformedRecord, path + ":" + std::to_string(line_no) + ": " + why);
        };
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw fail(e.what());
        }
        if (!record.is_object()) throw fail("record is not an object");
        for (const char* field : {"board", "task", "question", "answer", "split"}) {
            if (!record.contains(field) || !record[field].is_string()) {
                throw fail(std::string("missing string field \"") + field + "\"");
            }
        }
        Sample s;
        s.board = record["board"].get<std::string>();
        if (!Board::is_canonical_text(s.board)) throw fail("board must match ^[XO_]{9}$");
        try {
            s.task = task_from_string(record["task"].get<std::string>());
            s.split = split_from_string(record["split"].get<std::string>());
        } catch (const Error& e) {
            throw fail(e.what());
        }
        s.question = record["question"].get<std::string>();
        s.answer = record["answer"].get<std::string>();
        if (s.question.empty() || s.answer.empty()) throw fail("empty question or answer");
        samples.push_back(std::move(s));
    }
    return samples;
}

DatasetStats dataset_stats(std::span<const Sample> samples) {
    DatasetStats stats;
    stats.total = samples.size();
    std::unordered_set<std::string> boards;
    for (const auto& s : samples) {
        if (boards.insert(s.board).second && board_validity(Board::parse(s.board))) ++stats.valid_boards;
        ++stats.per_task[std::string(to_string(s.task))];
        ++stats.per_split[std::string(to_string(s.split))];
        const auto category = parse_answer(s.task, s.answer);
        ++stats.per_category[std::string(to_string(s.task)) + "/" + std::string(to_string(category.kind))];
    }
    stats.distinct_boards = boards.size();
    return stats;
}

std::string format_stats_table(const DatasetStats& stats) {
    std::ostringstream out;
    auto row = [&](const std::string& key, std::size_t value) {
        out << std::left << std::setw(28) << key << std::right << std::setw(8) << value << '\n';
    };
    row("samples", stats.total);
    row("distinct boards", stats.distinct_boards);
    row("valid boards", stats.valid_boards);
    for (const auto& [k, v] : stats.per_task) row("task " + k, v);
    for (const auto& [k, v] : stats.per_split) row("split " + k, v);
    for (const auto& [k, v] : stats.per_category) row(k, v);
    return out.str();
}

std::string stats_to_json(const DatasetStats& stats) {
    nlohmann::json doc;
    doc["samples"] = stats.total;
    doc["distinct_boards"] = stats.distinct_boards;
    doc["valid_boards"] = stats.valid_boards;
    doc["per_task"] = stats.per_task;
    doc["per_split"] = stats.per_split;
    doc["per_category"] = stats.per_category;
    return doc.dump();
}

}  // namespace ttt

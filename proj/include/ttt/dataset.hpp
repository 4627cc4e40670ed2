#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttt/game.hpp"

namespace ttt {

enum class TaskType : std::uint8_t { NextMove, Winner, Valid };
inline constexpr std::array<TaskType, 3> kTaskOrder{TaskType::NextMove, TaskType::Winner, TaskType::Valid};

std::string_view to_string(TaskType task);
/// Accepts "next_move", "winner", "valid". Throws ParseError.
TaskType task_from_string(std::string_view text);

enum class Split : std::uint8_t { Train, Val };
std::string_view to_string(Split split);
Split split_from_string(std::string_view text);

/// Semantic verdict an answer expresses, independent of wording.
enum class AnswerKind : std::uint8_t {
    Move,         // next_move: row/col set
    GameOver,     // next_move on a finished board
    InvalidBoard, // next_move / winner on an invalid board
    XWins,
    OWins,
    Draw,
    Ongoing,
    Valid,
    NotValid,
    Unknown,      // unparseable
};
std::string_view to_string(AnswerKind kind);

struct AnswerCategory {
    AnswerKind kind = AnswerKind::Unknown;
    std::optional<Move> move;  // 0-indexed, only for AnswerKind::Move
    friend bool operator==(const AnswerCategory&, const AnswerCategory&) = default;
};

/// Ground-truth category from the game oracles.
AnswerCategory oracle_category(TaskType task, const Board& board);

/// Parses an answer (any casing or spacing) back into its category; Unknown if nothing matches.
AnswerCategory parse_answer(TaskType task, std::string_view answer);

struct Sample {
    std::string board;  // canonical text
    TaskType task = TaskType::NextMove;
    std::string question;
    std::string answer;
    Split split = Split::Train;
    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Versioned paraphrase table. Question templates per task; answer templates per answer kind,
/// with {player}, {row}, {col} slots.
struct TemplateTable {
    static constexpr int kVersion = 1;
    static const std::map<TaskType, std::vector<std::string>>& questions();
    static const std::map<AnswerKind, std::vector<std::string>>& answers();
    /// Every instantiable string (slots filled with all legal values); used for vocabulary closure.
    static std::vector<std::string> all_instantiations();
};

struct Conversation {
    std::string question;
    std::string answer;
    int question_template = 0;
    int answer_template = 0;
};

/// Deterministic template choice from a seeded hash of (board, task, seed). The answer
/// template is tied to the question template index so phrasing follows the question.
Conversation generate_conversation(TaskType task, const Board& board, std::uint64_t seed);

/// 19,683 boards x 3 tasks in enumeration order, split by split_dataset(..., 0.99, seed).
std::vector<Sample> build_dataset(std::uint64_t seed);

/// Assigns floor((1 - ratio) * N) samples (rounded down to whole board groups) to val
/// by a seeded permutation of the board groups. Throws InvalidArgument unless 0 < ratio < 1.
void split_dataset(std::vector<Sample>& samples, double ratio, std::uint64_t seed);

/// Keeps floor(fraction * boards) whole board groups, chosen by a seeded permutation.
std::vector<Sample> subset_by_board(std::span<const Sample> samples, double fraction, std::uint64_t seed);

void write_manifest(std::span<const Sample> samples, const std::string& path);
/// Throws IoError or MalformedRecord (with 1-based line number).
std::vector<Sample> read_manifest(const std::string& path);

struct DatasetStats {
    std::size_t total = 0;
    std::size_t distinct_boards = 0;
    std::size_t valid_boards = 0;
    std::map<std::string, std::size_t> per_task;
    std::map<std::string, std::size_t> per_split;
    std::map<std::string, std::size_t> per_category;  // "<task>/<kind>"
};

DatasetStats dataset_stats(std::span<const Sample> samples);
std::string format_stats_table(const DatasetStats& stats);
std::string stats_to_json(const DatasetStats& stats);

/// Fisher-Yates over mt19937_64 with modulo reduction; identical on every standard library.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// splitmix64 finalizer; the library's only hash for seeded choices.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_text(std::string_view text, std::uint64_t seed);

}  // namespace ttt

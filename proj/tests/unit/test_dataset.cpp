#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "reference_oracles.hpp"
#include "ttt/dataset.hpp"
#include "ttt/text_codec.hpp"

using namespace ttt;
using namespace ttt::testing;

namespace {

const std::vector<Sample>& full_dataset() {
    static const std::vector<Sample> data = build_dataset(42);
    return data;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("ttt_test_" + name)).string();
}

}  // namespace

TEST_CASE("dataset has three samples per board in enumeration order") {
    const auto& d = full_dataset();
    REQUIRE(d.size() == 59049);
    const auto boards = generate_all_boards();
    for (std::size_t i = 0; i < boards.size(); ++i) {
        for (std::size_t t = 0; t < 3; ++t) {
            const Sample& s = d[3 * i + t];
            REQUIRE(s.board == boards[i].text());
            REQUIRE(s.task == kTaskOrder[t]);
        }
    }
}

TEST_CASE("category counts match the string oracle and the frozen goldens") {
    std::size_t valid = 0, xw = 0, ow = 0, draw = 0, ongoing = 0;
    for (const auto& b : generate_all_boards()) {
        const std::string s = b.text();
        if (!ref_valid(s)) continue;
        ++valid;
        switch (ref_winner(s)) {
            case 'X': ++xw; break;
            case 'O': ++ow; break;
            case 'D': ++draw; break;
            default: ++ongoing;
        }
    }
    CHECK(valid == 5868);
    CHECK(xw == 920);
    CHECK(ow == 412);
    CHECK(draw == 16);
    CHECK(ongoing == 4520);

    const DatasetStats st = dataset_stats(full_dataset());
    CHECK(st.total == 59049);
    CHECK(st.distinct_boards == 19683);
    CHECK(st.valid_boards == valid);
    CHECK(st.per_task.at("next_move") == 19683);
    CHECK(st.per_category.at("next_move/move") == ongoing);
    CHECK(st.per_category.at("next_move/game_over") == xw + ow + draw);
    CHECK(st.per_category.at("next_move/invalid_board") == 19683 - valid);
    CHECK(st.per_category.at("winner/x_wins") == xw);
    CHECK(st.per_category.at("winner/o_wins") == ow);
    CHECK(st.per_category.at("winner/draw") == draw);
    CHECK(st.per_category.at("winner/ongoing") == ongoing);
    CHECK(st.per_category.at("winner/invalid_board") == 19683 - valid);
    CHECK(st.per_category.at("valid/valid") == valid);
    CHECK(st.per_category.at("valid/not_valid") == 19683 - valid);
    CHECK(st.per_category.size() == 10);
}

TEST_CASE("every answer parses back to its oracle category") {
    for (const auto& s : full_dataset()) {
        const Board b = Board::parse(s.board);
        REQUIRE(parse_answer(s.task, s.answer) == oracle_category(s.task, b));
    }
}

TEST_CASE("move answers name the minimax move, 1-indexed") {
    const Board b = Board::parse("XX_OO____");
    const Conversation c = generate_conversation(TaskType::NextMove, b, 42);
    CHECK(c.answer.find("row 1, column 3") != std::string::npos);
    CHECK(c.answer.find('X') != std::string::npos);
}

TEST_CASE("parse_answer is insensitive to casing and spacing") {
    CHECK(parse_answer(TaskType::Winner, "  the WINNER is   o .").kind == AnswerKind::OWins);
    CHECK(parse_answer(TaskType::Valid, "YES, this position is valid.").kind == AnswerKind::Valid);
    const auto m = parse_answer(TaskType::NextMove, "o should play row 2 , column 1.");
    REQUIRE(m.kind == AnswerKind::Move);
    CHECK(*m.move == Move{1, 0});
    CHECK(parse_answer(TaskType::Winner, "banana").kind == AnswerKind::Unknown);
}

TEST_CASE("template choice is seeded and every template is used") {
    std::map<TaskType, std::set<int>> used_q;
    std::set<std::pair<int, int>> pairs;
    for (const auto& b : generate_all_boards()) {
        for (TaskType t : kTaskOrder) {
            const Conversation c = generate_conversation(t, b, 42);
            used_q[t].insert(c.question_template);
            REQUIRE(generate_conversation(t, b, 42).answer == c.answer);
        }
    }
    for (const auto& [task, qs] : TemplateTable::questions()) CHECK(used_q[task].size() == qs.size());
    std::size_t differs = 0;
    for (const auto& b : generate_all_boards()) {
        if (generate_conversation(TaskType::Winner, b, 1).question != generate_conversation(TaskType::Winner, b, 2).question) ++differs;
    }
    CHECK(differs > 1000);
}

TEST_CASE("split is board-grouped and hits the golden sizes") {
    const auto& d = full_dataset();
    std::map<std::string, std::set<Split>> by_board;
    std::size_t val = 0;
    for (const auto& s : d) {
        by_board[s.board].insert(s.split);
        val += s.split == Split::Val;
    }
    // floor(0.01 * 59049) = 590, rounded down to whole groups of three.
    CHECK(val == 588);
    CHECK(d.size() - val == 58461);
    for (const auto& [board, splits] : by_board) REQUIRE(splits.size() == 1);
    CHECK(build_dataset(42) == d);
    const auto other = build_dataset(7);
    std::size_t moved = 0;
    for (std::size_t i = 0; i < d.size(); ++i) moved += d[i].split != other[i].split;
    CHECK(moved > 0);
}

TEST_CASE("split and subset argument checks") {
    std::vector<Sample> d(full_dataset().begin(), full_dataset().begin() + 30);
    CHECK_THROWS_AS(split_dataset(d, 0.0, 1), Error);
    CHECK_THROWS_AS(split_dataset(d, 1.0, 1), Error);
    CHECK_THROWS_AS(subset_by_board(d, 0.0, 1), Error);
    const auto sub = subset_by_board(d, 0.5, 3);
    CHECK(sub.size() == 15);
    CHECK(subset_by_board(d, 0.5, 3) == sub);
}

TEST_CASE("seeded_permutation is a deterministic permutation") {
    const auto p = seeded_permutation(100, 9);
    CHECK(p == seeded_permutation(100, 9));
    CHECK(p != seeded_permutation(100, 10));
    std::set<std::size_t> uniq(p.begin(), p.end());
    CHECK(uniq.size() == 100);
    CHECK(*uniq.rbegin() == 99);
    // splitmix64 reference output for input 0.
    CHECK(mix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("manifest round-trip and malformed records") {
    const std::string path = temp_path("manifest.jsonl");
    std::vector<Sample> d(full_dataset().begin(), full_dataset().begin() + 12);
    write_manifest(d, path);
    CHECK(read_manifest(path) == d);
    {
        std::ifstream in(path);
        std::string first;
        std::getline(in, first);
        CHECK(first.rfind("{\"board\":", 0) == 0);
    }

    auto expect_line = [&](const std::string& content, int line) {
        {
            std::ofstream out(path);
            out << content;
        }
        try {
            read_manifest(path);
            FAIL("expected MalformedRecord");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::MalformedRecord);
            CHECK(std::string(e.what()).find(":" + std::to_string(line) + ":") != std::string::npos);
        }
    };
    const std::string good = R"({"board":"_________","task":"valid","question":"q","answer":"a","split":"train"})";
    expect_line(good + "\n{not json\n", 2);
    expect_line(good + "\n" + good + "\n" + R"({"board":"XXXX","task":"valid","question":"q","answer":"a","split":"train"})", 3);
    expect_line(R"({"board":"_________","task":"dance","question":"q","answer":"a","split":"train"})", 1);
    expect_line(R"({"board":"_________","task":"valid","answer":"a","split":"train"})", 1);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_manifest(temp_path("does_not_exist.jsonl")), Error);
}

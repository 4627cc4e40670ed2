#include <set>

#include "doctest.h"
#include "reference_oracles.hpp"
#include "ttt/game.hpp"

using namespace ttt;
using namespace ttt::testing;

TEST_CASE("board text round-trips and rejects malformed input") {
    const Board b = Board::parse("XO_X__O__");
    CHECK(b.text() == "XO_X__O__");
    CHECK(b.at(0, 1) == Cell::O);
    CHECK_THROWS_AS(Board::parse("XXXX"), Error);
    CHECK_THROWS_AS(Board::parse("XO_X__O_x"), Error);
    CHECK_FALSE(Board::is_canonical_text("__________"));
}

TEST_CASE("generate_all_boards enumerates the universe in backtracking order") {
    const auto boards = generate_all_boards();
    REQUIRE(boards.size() == 19683);
    CHECK(boards.front().text() == "_________");
    CHECK(boards[1].text() == "________X");
    CHECK(boards[2].text() == "________O");
    CHECK(boards.back().text() == "OOOOOOOOO");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < boards.size(); ++i) {
        CHECK(boards[i].ordinal() == static_cast<int>(i));
        seen.insert(boards[i].text());
    }
    CHECK(seen.size() == 19683);
}

TEST_CASE("board_validity examples") {
    CHECK(board_validity(Board::parse("_________")));
    CHECK_FALSE(board_validity(Board::parse("O________")));
    CHECK_FALSE(board_validity(Board::parse("XX_______")));
    CHECK_FALSE(board_validity(Board::parse("XXXOOO___")));
    CHECK(board_validity(Board::parse("XXXOO____")));
}

TEST_CASE("validity and winner agree with the string reference on every board") {
    for (const auto& board : generate_all_boards()) {
        const std::string s = board.text();
        REQUIRE(board_validity(board) == ref_valid(s));
        if (!ref_valid(s)) {
            CHECK_THROWS_AS(get_winner(board), Error);
            continue;
        }
        const char w = ref_winner(s);
        const GameOutcome expected = w == 'X'   ? GameOutcome::XWins
                                     : w == 'O' ? GameOutcome::OWins
                                     : w == 'D' ? GameOutcome::Draw
                                                : GameOutcome::Ongoing;
        REQUIRE(get_winner(board) == expected);
    }
}

TEST_CASE("get_winner examples and error path") {
    CHECK(get_winner(Board::parse("XXXOO____")) == GameOutcome::XWins);
    CHECK(get_winner(Board::parse("_________")) == GameOutcome::Ongoing);
    CHECK(get_winner(Board::parse("XOXXOOOXX")) == GameOutcome::Draw);
    try {
        get_winner(Board::parse("O________"));
        FAIL("expected InvalidBoard");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidBoard);
    }
}

TEST_CASE("current_player follows mark counts") {
    CHECK(current_player(Board::parse("_________")) == Player::X);
    CHECK(current_player(Board::parse("X________")) == Player::O);
    CHECK(current_player(Board::parse("XO_______")) == Player::X);
    CHECK_THROWS_AS(current_player(Board::parse("O________")), Error);
    CHECK_THROWS_AS(current_player(Board::parse("XXXOO____")), Error);
}

TEST_CASE("minimax_value examples") {
    CHECK(minimax_value(Board::parse("XXXOO____"), Player::O, 0) == 10);
    CHECK(minimax_value(Board::parse("XXXOO____"), Player::X, 0) == 10);
    std::string empty = "_________";
    const int oracle = ref_minimax(empty, 'X', 0);
    CHECK(oracle == 0);
    CHECK(minimax_value(Board(), Player::X, 0) == oracle);
    CHECK(minimax_value(Board::parse("XX_OO____"), Player::X, 0) > 0);
}

TEST_CASE("minimax agrees with the string oracle on all valid non-terminal boards") {
    for (const auto& board : generate_all_boards()) {
        if (!board_validity(board) || is_terminal(board)) continue;
        std::string s = board.text();
        const Player p = current_player(board);
        REQUIRE(minimax_value(board, p, 0) == ref_minimax(s, to_char(p), 0));
    }
}

TEST_CASE("best_move examples") {
    const auto win = best_move(Board::parse("XX_OO____"), Player::X);
    CHECK(win.move == Move{0, 2});
    CHECK(win.outcome_class == GameOutcome::XWins);
    CHECK(win.score == 9);

    // Oracle: the block is the only move whose minimax value is not an immediate X win.
    std::string b = "XX_O_____";
    int best_index = -1, best_score = 1000;
    for (int i = 0; i < 9; ++i) {
        if (b[i] != '_') continue;
        b[i] = 'O';
        const int s = ref_minimax(b, 'X', 1);
        b[i] = '_';
        if (s < best_score) best_score = s, best_index = i;
    }
    const auto block = best_move(Board::parse("XX_O_____"), Player::O);
    CHECK(block.move.index() == best_index);
    CHECK(block.move == Move{0, 2});
    CHECK(block.score == best_score);

    const auto opening = best_move(Board(), Player::X);
    CHECK(opening.move == Move{0, 0});
    CHECK(opening.outcome_class == GameOutcome::Draw);
}

TEST_CASE("best_move error paths") {
    auto code_of = [](auto fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    CHECK(code_of([] { best_move(Board::parse("O________"), Player::O); }) == ErrorCode::InvalidBoard);
    CHECK(code_of([] { best_move(Board::parse("XXXOO____"), Player::O); }) == ErrorCode::GameOver);
    CHECK(code_of([] { best_move(Board::parse("X________"), Player::X); }) == ErrorCode::WrongTurn);
}

TEST_CASE("best_move is deterministic and self-play realizes the predicted outcome") {
    int checked = 0;
    for (const auto& board : generate_all_boards()) {
        if (!board_validity(board) || is_terminal(board)) continue;
        const Player p = current_player(board);
        const MoveVerdict first = best_move(board, p);
        const MoveVerdict again = best_move(board, p);
        REQUIRE(first.move == again.move);
        REQUIRE(first.score == again.score);
        CHECK(std::abs(first.score) <= 10);

        Board pos = board;
        Player turn = p;
        int plies = 0;
        while (!is_terminal(pos)) {
            // Positions reached in play may hold two lines at once, so play continues on the raw line scan.
            const MoveVerdict v = plies == 0 ? first : [&] {
                MoveVerdict best{};
                bool have = false;
                for (int i = 0; i < 9; ++i) {
                    if (pos.at(i) != Cell::Empty) continue;
                    Board child = pos;
                    child.set(i, mark_of(turn));
                    const int s = minimax_value(child, opponent(turn), 1);
                    if (!have || (turn == Player::X ? s > best.score : s < best.score)) {
                        best = MoveVerdict{Move::from_index(i), s, outcome_from_score(s)};
                        have = true;
                    }
                }
                return best;
            }();
            if (board_validity(pos)) {
                const MoveVerdict lib = best_move(pos, turn);
                REQUIRE(lib.move == v.move);
            }
            pos.set(v.move.index(), mark_of(turn));
            turn = opponent(turn);
            ++plies;
            REQUIRE(plies <= 9);
        }
        const auto w = line_winner(pos);
        const GameOutcome realized = !w ? GameOutcome::Draw : *w == Player::X ? GameOutcome::XWins : GameOutcome::OWins;
        REQUIRE(realized == first.outcome_class);
        ++checked;
    }
    CHECK(checked == 4520);
}

TEST_CASE("swapping marks negates minimax value on line-free boards") {
    int checked = 0;
    for (const auto& board : generate_all_boards()) {
        if (!board_validity(board) || line_winner(board)) continue;
        for (Player p : {Player::X, Player::O}) {
            REQUIRE(minimax_value(board.swapped_marks(), opponent(p), 0) == -minimax_value(board, p, 0));
        }
        ++checked;
    }
    CHECK(checked > 0);
}

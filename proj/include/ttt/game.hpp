#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ttt/error.hpp"

namespace ttt {

enum class Cell : std::uint8_t { Empty, X, O };
enum class Player : std::uint8_t { X, O };
enum class GameOutcome : std::uint8_t { XWins, OWins, Draw, Ongoing };

char to_char(Cell cell);
Cell cell_from_char(char c);
Cell mark_of(Player player);
Player opponent(Player player);
char to_char(Player player);
std::string_view to_string(GameOutcome outcome);

struct Move {
    int row = 0;
    int col = 0;

    int index() const { return 3 * row + col; }
    static Move from_index(int index) { return Move{index / 3, index % 3}; }
    friend bool operator==(const Move&, const Move&) = default;
};

/// 3x3 grid, cells stored row-major (r0c0 .. r2c2).
class Board {
public:
    Board() { cells_.fill(Cell::Empty); }
    explicit Board(const std::array<Cell, 9>& cells) : cells_(cells) {}

    /// Parses the canonical 9-character form over {X, O, _}. Throws ParseError.
    static Board parse(std::string_view text);
    static bool is_canonical_text(std::string_view text);

    std::string text() const;

    Cell at(int index) const { return cells_[static_cast<std::size_t>(index)]; }
    Cell at(int row, int col) const { return at(3 * row + col); }
    void set(int index, Cell cell) { cells_[static_cast<std::size_t>(index)] = cell; }

    int count(Cell cell) const;
    bool full() const { return count(Cell::Empty) == 0; }

    /// Base-3 index in enumeration order: cell 0 is the most significant digit, _=0, X=1, O=2.
    int ordinal() const;
    static Board from_ordinal(int ordinal);

    Board transposed() const;
    Board swapped_marks() const;

    const std::array<Cell, 9>& cells() const { return cells_; }
    friend bool operator==(const Board&, const Board&) = default;

private:
    std::array<Cell, 9> cells_;
};

inline constexpr int kBoardCount = 19683;

inline constexpr std::array<std::array<int, 3>, 8> kWinLines{{
    {0, 1, 2}, {3, 4, 5}, {6, 7, 8},
    {0, 3, 6}, {1, 4, 7}, {2, 5, 8},
    {0, 4, 8}, {2, 4, 6},
}};

struct MoveVerdict {
    Move move;
    int score = 0;  // X-perspective, depth-adjusted
    GameOutcome outcome_class = GameOutcome::Draw;
};

/// Every 3^9 configuration, in backtracking order (symbols '_', 'X', 'O' per cell, row-major).
std::vector<Board> generate_all_boards();

bool board_validity(const Board& board);

/// Number of win lines fully occupied by a single player's marks.
int completed_line_count(const Board& board);

/// Owner of the first completed win line in kWinLines order, if any. No validity check.
std::optional<Player> line_winner(const Board& board);

/// Throws InvalidBoard when board_validity fails.
GameOutcome get_winner(const Board& board);

/// Terminal: a completed win line or a full board.
bool is_terminal(const Board& board);

/// Throws NotApplicable for invalid or terminal boards.
Player current_player(const Board& board);

/// Exhaustive minimax. Win for X at depth d scores 10 - d, win for O -(10 - d), draw 0.
int minimax_value(const Board& board, Player to_move, int depth);

GameOutcome outcome_from_score(int score);

/// Best cell for `player`, smallest row-major index on ties.
/// Throws InvalidBoard, GameOver or WrongTurn.
MoveVerdict best_move(const Board& board, Player player);

}  // namespace ttt

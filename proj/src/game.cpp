#include "ttt/game.hpp"

#include <limits>

namespace ttt {

char to_char(Cell cell) {
    switch (cell) {
        case Cell::X: return 'X';
        case Cell::O: return 'O';
        case Cell::Empty: break;
    }
    return '_';
}

Cell cell_from_char(char c) {
    switch (c) {
        case 'X': return Cell::X;
        case 'O': return Cell::O;
        case '_': return Cell::Empty;
        default: break;
    }
    throw Error(ErrorCode::ParseError, std::string("unexpected board symbol '") + c + "'");
}

Cell mark_of(Player player) { return player == Player::X ? Cell::X : Cell::O; }
Player opponent(Player player) { return player == Player::X ? Player::O : Player::X; }
char to_char(Player player) { return player == Player::X ? 'X' : 'O'; }

std::string_view to_string(GameOutcome outcome) {
    switch (outcome) {
        case GameOutcome::XWins: return "XWins";
        case GameOutcome::OWins: return "OWins";
        case GameOutcome::Draw: return "Draw";
        case GameOutcome::Ongoing: break;
    }
    return "Ongoing";
}

bool Board::is_canonical_text(std::string_view text) {
    if (text.size() != 9) return false;
    for (char c : text) {
        if (c != 'X' && c != 'O' && c != '_') return false;
    }
    return true;
}

Board Board::parse(std::string_view text) {
    if (!is_canonical_text(text)) {
        throw Error(ErrorCode::ParseError, "board must match ^[XO_]{9}$, got '" + std::string(text) + "'");
    }
    Board board;
    for (int i = 0; i < 9; ++i) board.set(i, cell_from_char(text[static_cast<std::size_t>(i)]));
    return board;
}

std::string Board::text() const {
    std::string out(9, '_');
    for (int i = 0; i < 9; ++i) out[static_cast<std::size_t>(i)] = to_char(at(i));
    return out;
}

int Board::count(Cell cell) const {
    int n = 0;
    for (Cell c : cells_) n += (c == cell);
    return n;
}

int Board::ordinal() const {
    int value = 0;
    for (Cell c : cells_) value = value * 3 + static_cast<int>(c);
    return value;
}

Board Board::from_ordinal(int ordinal) {
    Board board;
    for (int i = 8; i >= 0; --i) {
        board.set(i, static_cast<Cell>(ordinal % 3));
        ordinal /= 3;
    }
    return board;
}

Board Board::transposed() const {
    Board out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.set(3 * c + r, at(r, c));
    return out;
}

Board Board::swapped_marks() const {
    Board out;
    for (int i = 0; i < 9; ++i) {
        Cell c = at(i);
        out.set(i, c == Cell::X ? Cell::O : c == Cell::O ? Cell::X : Cell::Empty);
    }
    return out;
}

namespace {

constexpr Cell kSymbolOrder[3] = {Cell::Empty, Cell::X, Cell::O};

void backtrack(Board& board, int row, int col, std::vector<Board>& result) {
    if (row == 3) {
        result.push_back(board);
        return;
    }
    const int next_row = col == 2 ? row + 1 : row;
    const int next_col = col == 2 ? 0 : col + 1;
    for (Cell symbol : kSymbolOrder) {
        board.set(3 * row + col, symbol);
        backtrack(board, next_row, next_col, result);
    }
    board.set(3 * row + col, Cell::Empty);
}

bool line_owned(const Board& board, const std::array<int, 3>& line, Cell mark) {
    return board.at(line[0]) == mark && board.at(line[1]) == mark && board.at(line[2]) == mark;
}

}  // namespace

std::vector<Board> generate_all_boards() {
    std::vector<Board> result;
    result.reserve(kBoardCount);
    Board board;
    backtrack(board, 0, 0, result);
    return result;
}

int completed_line_count(const Board& board) {
    int n = 0;
    for (const auto& line : kWinLines) {
        n += line_owned(board, line, Cell::X) || line_owned(board, line, Cell::O);
    }
    return n;
}

bool board_validity(const Board& board) {
    const int x = board.count(Cell::X);
    const int o = board.count(Cell::O);
    if (o > x || o < x - 1) return false;
    return completed_line_count(board) <= 1;
}

std::optional<Player> line_winner(const Board& board) {
    for (const auto& line : kWinLines) {
        if (line_owned(board, line, Cell::X)) return Player::X;
        if (line_owned(board, line, Cell::O)) return Player::O;
    }
    return std::nullopt;
}

GameOutcome get_winner(const Board& board) {
    if (!board_validity(board)) {
        throw Error(ErrorCode::InvalidBoard, "no winner defined for invalid board " + board.text());
    }
    if (auto winner = line_winner(board)) {
        return *winner == Player::X ? GameOutcome::XWins : GameOutcome::OWins;
    }
    return board.full() ? GameOutcome::Draw : GameOutcome::Ongoing;
}

bool is_terminal(const Board& board) { return line_winner(board).has_value() || board.full(); }

Player current_player(const Board& board) {
    if (!board_validity(board)) {
        throw Error(ErrorCode::NotApplicable, "no current player on invalid board " + board.text());
    }
    if (is_terminal(board)) {
        throw Error(ErrorCode::NotApplicable, "no current player on finished board " + board.text());
    }
    return board.count(Cell::X) == board.count(Cell::O) ? Player::X : Player::O;
}

int minimax_value(const Board& board, Player to_move, int depth) {
    if (auto winner = line_winner(board)) {
        return *winner == Player::X ? 10 - depth : -(10 - depth);
    }
    if (board.full()) return 0;

    const bool maximizing = to_move == Player::X;
    int best = maximizing ? std::numeric_limits<int>::min() : std::numeric_limits<int>::max();
    Board child = board;
    for (int i = 0; i < 9; ++i) {
        if (board.at(i) != Cell::Empty) continue;
        child.set(i, mark_of(to_move));
        const int score = minimax_value(child, opponent(to_move), depth + 1);
        child.set(i, Cell::Empty);
        best = maximizing ? std::max(best, score) : std::min(best, score);
    }
    return best;
}

GameOutcome outcome_from_score(int score) {
    if (score > 0) return GameOutcome::XWins;
    if (score < 0) return GameOutcome::OWins;
    return GameOutcome::Draw;
}

MoveVerdict best_move(const Board& board, Player player) {
    if (!board_validity(board)) throw Error(ErrorCode::InvalidBoard, board.text());
    if (is_terminal(board)) throw Error(ErrorCode::GameOver, board.text());
    if (current_player(board) != player) {
        throw Error(ErrorCode::WrongTurn, std::string("it is not ") + to_char(player) + "'s turn on " + board.text());
    }

    const bool maximizing = player == Player::X;
    std::optional<MoveVerdict> best;
    Board child = board;
    for (int i = 0; i < 9; ++i) {
        if (board.at(i) != Cell::Empty) continue;
        child.set(i, mark_of(player));
        const int score = minimax_value(child, opponent(player), 1);
        child.set(i, Cell::Empty);
        const bool better = !best || (maximizing ? score > best->score : score < best->score);
        if (better) best = MoveVerdict{Move::from_index(i), score, outcome_from_score(score)};
    }
    return *best;
}

}  // namespace ttt

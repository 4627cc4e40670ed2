#include <set>

#include "ttt/dataset.hpp"

namespace ttt {

const std::map<TaskType, std::vector<std::string>>& TemplateTable::questions() {
    static const std::map<TaskType, std::vector<std::string>> table{
        {TaskType::NextMove,
         {"What is the best move to play?",
          "Where should the next player move?",
          "Which square should the current player take?"}},
        {TaskType::Winner,
         {"Who is the winner of this game?",
          "Has anyone won this game?",
          "Who won the game on this board?"}},
        {TaskType::Valid,
         {"Is this board valid?",
          "Is this a valid tic-tac-toe position?",
          "Could this board happen in a real game?"}},
    };
    return table;
}

const std::map<AnswerKind, std::vector<std::string>>& TemplateTable::answers() {
    static const std::map<AnswerKind, std::vector<std::string>> table{
        {AnswerKind::Move,
         {"The best move for {player} is row {row}, column {col}.",
          "{player} should play row {row}, column {col}."}},
        {AnswerKind::GameOver,
         {"The game is already over.",
          "There is no move to make, the game is already over."}},
        {AnswerKind::InvalidBoard,
         {"The board is not valid.",
          "This board is not valid, so there is no answer."}},
        {AnswerKind::XWins, {"{player} wins the game.", "The winner is {player}."}},
        {AnswerKind::OWins, {"{player} wins the game.", "The winner is {player}."}},
        {AnswerKind::Draw, {"The game is a draw.", "Nobody won, it is a draw."}},
        {AnswerKind::Ongoing,
         {"There is no winner yet.",
          "Nobody has won yet, the game is still going."}},
        {AnswerKind::Valid, {"Yes, the board is valid.", "Yes, this position is valid."}},
        {AnswerKind::NotValid, {"No, the board is not valid.", "No, this position is not valid."}},
    };
    return table;
}

namespace {

std::string replace_all(std::string text, std::string_view slot, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(slot, pos)) != std::string::npos) {
        text.replace(pos, slot.size(), value);
        pos += value.size();
    }
    return text;
}

}  // namespace

std::vector<std::string> TemplateTable::all_instantiations() {
    std::set<std::string> out;
    for (const auto& [task, list] : questions()) out.insert(list.begin(), list.end());
    for (const auto& [kind, list] : answers()) {
        for (const auto& tmpl : list) {
            for (const char* player : {"X", "O"}) {
                for (int row = 1; row <= 3; ++row) {
                    for (int col = 1; col <= 3; ++col) {
                        auto s = replace_all(tmpl, "{player}", player);
                        s = replace_all(s, "{row}", std::to_string(row));
                        out.insert(replace_all(s, "{col}", std::to_string(col)));
                    }
                }
            }
        }
    }
    return {out.begin(), out.end()};
}

std::string instantiate_answer(const std::string& tmpl, char player, int row, int col) {
    auto s = replace_all(tmpl, "{player}", std::string(1, player));
    s = replace_all(s, "{row}", std::to_string(row));
    return replace_all(s, "{col}", std::to_string(col));
}

}  // namespace ttt

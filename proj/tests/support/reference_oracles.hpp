#pragma once

// Test-only oracles, written directly against the board strings so they share
// no code path with the library.

#include <algorithm>
#include <string>

namespace ttt::testing {

inline const int kLines[8][3] = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}, {0, 3, 6},
                                 {1, 4, 7}, {2, 5, 8}, {0, 4, 8}, {2, 4, 6}};

inline int ref_count(const std::string& b, char c) { return static_cast<int>(std::count(b.begin(), b.end(), c)); }

inline bool ref_line(const std::string& b, int i, char c) {
    return b[kLines[i][0]] == c && b[kLines[i][1]] == c && b[kLines[i][2]] == c;
}

inline bool ref_valid(const std::string& b) {
    const int x = ref_count(b, 'X');
    const int o = ref_count(b, 'O');
    if (o > x || o < x - 1) return false;
    bool won = false;
    for (int i = 0; i < 8; ++i) {
        if (ref_line(b, i, 'X') || ref_line(b, i, 'O')) {
            if (won) return false;
            won = true;
        }
    }
    return true;
}

// 'X', 'O', 'D' (draw), '-' (ongoing)
inline char ref_winner(const std::string& b) {
    for (int i = 0; i < 8; ++i) {
        if (ref_line(b, i, 'X')) return 'X';
        if (ref_line(b, i, 'O')) return 'O';
    }
    return ref_count(b, '_') == 0 ? 'D' : '-';
}

// Plain recursive minimax over strings with the same depth-aware scoring.
inline int ref_minimax(std::string& b, char to_move, int depth) {
    const char w = ref_winner(b);
    if (w == 'X') return 10 - depth;
    if (w == 'O') return depth - 10;
    if (w == 'D') return 0;
    int best = to_move == 'X' ? -1000 : 1000;
    for (int i = 0; i < 9; ++i) {
        if (b[i] != '_') continue;
        b[i] = to_move;
        const int s = ref_minimax(b, to_move == 'X' ? 'O' : 'X', depth + 1);
        b[i] = '_';
        best = to_move == 'X' ? std::max(best, s) : std::min(best, s);
    }
    return best;
}

}  // namespace ttt::testing

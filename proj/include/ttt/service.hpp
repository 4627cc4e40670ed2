#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ttt/model.hpp"
#include "ttt/trainer.hpp"

namespace ttt {

inline constexpr std::size_t kMaxQuestionChars = 200;
/// Returned instead of an empty generation so answers are never blank.
inline constexpr std::string_view kNoAnswer = "(no answer)";

struct AskResult {
    std::string answer;
    int generated_token_count = 0;
    double latency_ms = 0.0;
};

/// A loaded checkpoint ready to answer questions. Read-only after construction, so one
/// instance can serve concurrent requests.
class Coach {
public:
    explicit Coach(Checkpoint checkpoint);
    static Coach load(const std::string& path);

    /// Throws ParseError for a malformed board, InvalidArgument for an empty question,
    /// QuestionTooLong for more than 200 characters or too many tokens.
    AskResult ask(std::string_view board, std::string_view question) const;

    const Checkpoint& checkpoint() const { return checkpoint_; }
    std::size_t parameter_count() const { return model_.parameter_count(); }
    /// Hash over the live parameters.
    std::uint64_t parameter_hash() const;
    /// {"tier", "vocab_size", "parameter_count"}
    std::string model_json() const;

private:
    Checkpoint checkpoint_;
    Model<float> model_;
};

/// {"valid", "outcome", "best_move"?}; best_move is 1-indexed and present only when the board
/// is valid and the game is still going.
std::string oracle_json(const Board& board);

/// HTTP front end over a Coach.
class HttpService {
public:
    /// An empty static_dir disables static file serving.
    HttpService(const Coach& coach, std::string static_dir = {});
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Port 0 picks a free port. Returns the bound port; throws IoError on failure.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// "host:port" with a numeric port. Throws InvalidArgument.
std::pair<std::string, int> parse_address(std::string_view addr);

/// The ttt_coach command line. 0 success, 1 runtime error, 2 usage error.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace ttt

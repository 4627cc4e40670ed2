#pragma once

#include <stdexcept>
#include <string>

namespace ttt {

enum class ErrorCode {
    InvalidBoard,
    GameOver,
    WrongTurn,
    NotApplicable,
    ParseError,
    IoError,
    MalformedRecord,
    EmptyCorpus,
    TooLong,
    ShapeMismatch,
    SequenceTooLong,
    EmptyMask,
    NonFiniteGradient,
    NonFiniteLoss,
    DataMissing,
    BadMagic,
    VersionMismatch,
    QuestionTooLong,
    InvalidArgument,
};

const char* to_string(ErrorCode code);

// All library failures surface as this exception; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ttt

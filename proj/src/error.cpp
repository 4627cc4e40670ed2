#include "ttt/error.hpp"

namespace ttt {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidBoard: return "InvalidBoard";
        case ErrorCode::GameOver: return "GameOver";
        case ErrorCode::WrongTurn: return "WrongTurn";
        case ErrorCode::NotApplicable: return "NotApplicable";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::TooLong: return "TooLong";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::SequenceTooLong: return "SequenceTooLong";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::DataMissing: return "DataMissing";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::QuestionTooLong: return "QuestionTooLong";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace ttt

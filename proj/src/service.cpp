#include "ttt/service.hpp"

#include <chrono>
#include <filesystem>

#include "httplib.h"
#include "json.hpp"
#include "ttt/error.hpp"
#include "ttt/render.hpp"

namespace ttt {

Coach::Coach(Checkpoint checkpoint)
    : checkpoint_(std::move(checkpoint)), model_(model_from_checkpoint(checkpoint_)) {}

Coach Coach::load(const std::string& path) { return Coach(load_checkpoint(path)); }

AskResult Coach::ask(std::string_view board_text, std::string_view question) const {
    const Board board = Board::parse(board_text);
    if (question.empty()) throw Error(ErrorCode::InvalidArgument, "question must not be empty");
    if (question.size() > kMaxQuestionChars) {
        throw Error(ErrorCode::QuestionTooLong, "question longer than " + std::to_string(kMaxQuestionChars) + " characters");
    }
    const auto start = std::chrono::steady_clock::now();
    const auto image = image_to_model_input(render(board));
    const Generation g = model_.generate(image, question, checkpoint_.vocab);
    AskResult result;
    result.answer = g.text.empty() ? std::string(kNoAnswer) : g.text;
    result.generated_token_count = static_cast<int>(g.tokens.size());
    result.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::uint64_t Coach::parameter_hash() const { return ttt::parameter_hash(model_.values()); }

std::string Coach::model_json() const {
    nlohmann::ordered_json doc;
    doc["tier"] = checkpoint_.model_config.tier;
    doc["vocab_size"] = checkpoint_.vocab.size();
    doc["parameter_count"] = model_.parameter_count();
    return doc.dump();
}

namespace {

std::string wire_outcome(GameOutcome o) {
    switch (o) {
        case GameOutcome::XWins: return "x_wins";
        case GameOutcome::OWins: return "o_wins";
        case GameOutcome::Draw: return "draw";
        case GameOutcome::Ongoing: break;
    }
    return "ongoing";
}

}  // namespace

std::string oracle_json(const Board& board) {
    nlohmann::ordered_json doc;
    const bool valid = board_validity(board);
    doc["valid"] = valid;
    if (!valid) {
        doc["outcome"] = "invalid";
        return doc.dump();
    }
    const GameOutcome outcome = get_winner(board);
    doc["outcome"] = wire_outcome(outcome);
    if (outcome == GameOutcome::Ongoing) {
        const MoveVerdict v = best_move(board, current_player(board));
        doc["best_move"] = {{"row", v.move.row + 1},
                            {"col", v.move.col + 1},
                            {"outcome_class", wire_outcome(v.outcome_class)}};
    }
    return doc.dump();
}

std::pair<std::string, int> parse_address(std::string_view addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == addr.size()) {
        throw Error(ErrorCode::InvalidArgument, "address must look like host:port");
    }
    int port = 0;
    for (char c : addr.substr(colon + 1)) {
        if (c < '0' || c > '9') throw Error(ErrorCode::InvalidArgument, "port must be numeric");
        port = port * 10 + (c - '0');
        if (port > 65535) throw Error(ErrorCode::InvalidArgument, "port out of range");
    }
    return {std::string(addr.substr(0, colon)), port};
}

namespace {

const char* kJson = "application/json";

void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", message}}.dump(), kJson);
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError:
        case ErrorCode::InvalidBoard: return 400;
        case ErrorCode::QuestionTooLong:
        case ErrorCode::InvalidArgument: return 422;
        default: return 500;
    }
}

// Returns the parsed object or writes a 400 and returns null.
std::optional<nlohmann::json> parse_body(const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
        send_error(res, 400, "request body must be a JSON object");
        return std::nullopt;
    }
    return body;
}

std::optional<Board> board_field(const nlohmann::json& body, httplib::Response& res) {
    const auto it = body.find("board");
    if (it == body.end() || !it->is_string() || !Board::is_canonical_text(it->get<std::string>())) {
        send_error(res, 400, "board must be a string matching ^[XO_]{9}$");
        return std::nullopt;
    }
    return Board::parse(it->get<std::string>());
}

}  // namespace

struct HttpService::Impl {
    const Coach& coach;
    httplib::Server server;
};

HttpService::HttpService(const Coach& coach, std::string static_dir) : impl_(new Impl{coach, {}}) {
    auto& srv = impl_->server;
    const Coach& c = coach;
    // httplib also sets SO_REUSEPORT by default, which lets a second server silently share a busy port.
    srv.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });

    srv.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok"})", kJson);
    });
    srv.Get("/api/model", [&c](const httplib::Request&, httplib::Response& res) {
        res.set_content(c.model_json(), kJson);
    });
    srv.Post("/api/ask", [&c](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req, res);
        if (!body) return;
        const auto board = board_field(*body, res);
        if (!board) return;
        const auto q = body->find("question");
        if (q == body->end() || !q->is_string()) {
            send_error(res, 400, "question must be a string");
            return;
        }
        try {
            const AskResult r = c.ask(board->text(), q->get<std::string>());
            nlohmann::ordered_json doc;
            doc["answer"] = r.answer;
            doc["generated_token_count"] = r.generated_token_count;
            doc["latency_ms"] = r.latency_ms;
            res.set_content(doc.dump(), kJson);
        } catch (const Error& e) {
            send_error(res, status_for(e.code()), e.what());
        }
    });
    srv.Post("/api/oracle", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req, res);
        if (!body) return;
        const auto board = board_field(*body, res);
        if (!board) return;
        res.set_content(oracle_json(*board), kJson);
    });
    srv.Get("/api/render", [](const httplib::Request& req, httplib::Response& res) {
        const std::string text = req.get_param_value("board");
        if (!Board::is_canonical_text(text)) {
            send_error(res, 400, "board must be a string matching ^[XO_]{9}$");
            return;
        }
        const auto png = encode_png(render(Board::parse(text)));
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    });

    if (!static_dir.empty()) {
        if (!std::filesystem::is_directory(static_dir) || !srv.set_mount_point("/", static_dir)) {
            throw Error(ErrorCode::IoError, "static directory not found: " + static_dir);
        }
    }

    srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
        send_error(res, res.status, res.status == 404 ? "not found" : "request failed");
        return httplib::Server::HandlerResponse::Handled;
    });
    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        send_error(res, 500, message);
    });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
    auto& srv = impl_->server;
    if (port == 0) {
        const int bound = srv.bind_to_any_port(host);
        if (bound <= 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
        return bound;
    }
    if (!srv.bind_to_port(host, port)) throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace ttt

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "ttt/error.hpp"
#include "ttt/render.hpp"
#include "ttt/service.hpp"

namespace ttt {

namespace {

struct Options {
    std::uint64_t seed = 42;
    std::string data;
    std::string out;
    std::string tier = "tiny";
    int epochs = 3;
    double lr = TrainConfig{}.learning_rate;
    int batch = TrainConfig{}.batch_size;
    double subset = 1.0;
    std::string ckpt;
    std::string board;
    std::string question;
    std::string addr = "127.0.0.1:8080";
    std::string static_dir;
};

TrainConfig train_config(const Options& o) {
    TrainConfig tc;
    tc.seed = o.seed;
    tc.tier = o.tier;
    tc.epochs = o.epochs;
    tc.learning_rate = o.lr;
    tc.batch_size = o.batch;
    tc.subset_fraction = o.subset;
    tc.data_path = o.data;
    return tc;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
}

std::vector<Sample> load_samples(const std::string& dir) {
    try {
        return read_manifest(dir + "/dataset.jsonl");
    } catch (const Error& e) {
        if (e.code() == ErrorCode::IoError) throw Error(ErrorCode::DataMissing, e.what());
        throw;
    }
}

Vocabulary load_vocab(const std::string& dir) {
    try {
        return Vocabulary::load(dir + "/vocab.json");
    } catch (const Error& e) {
        if (e.code() == ErrorCode::IoError) throw Error(ErrorCode::DataMissing, e.what());
        throw;
    }
}

TrainHooks progress_hooks(std::ostream& out, const std::string& label = {}) {
    TrainHooks hooks;
    hooks.on_epoch = [&out, label](const EpochMetrics& m) {
        out << label << "epoch " << m.epoch << " train_loss " << m.train_loss << "\n"
            << format_eval_report(m.val) << std::flush;
    };
    return hooks;
}

HttpService* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tic-tac-toe visual coach: dataset, training, evaluation and inference", "ttt_coach"};
    app.require_subcommand(1);
    Options o;

    auto add_seed = [&](CLI::App* s) { s->add_option("--seed", o.seed, "Seed for every random choice")->capture_default_str(); };
    auto add_schedule = [&](CLI::App* s) {
        s->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
        s->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
        s->add_option("--batch", o.batch, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
        s->add_option("--subset", o.subset, "Fraction of training boards to use")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    };

    auto* dataset = app.add_subcommand("dataset", "Build or summarize the question-answer corpus");
    dataset->require_subcommand(1);
    auto* ds_build = dataset->add_subcommand("build", "Write dataset.jsonl and vocab.json");
    ds_build->add_option("--out", o.out, "Output directory")->required();
    add_seed(ds_build);
    auto* ds_stats = dataset->add_subcommand("stats", "Print per-task and per-category counts");
    ds_stats->add_option("--data", o.data, "Dataset directory")->required();

    auto* render_cmd = app.add_subcommand("render", "Render a board to a PNG file");
    render_cmd->add_option("--board", o.board, "Nine characters from X, O, _")->required();
    render_cmd->add_option("--out", o.out, "PNG path")->required();

    auto* train_cmd = app.add_subcommand("train", "Train one model tier");
    train_cmd->add_option("--data", o.data, "Dataset directory")->required();
    train_cmd->add_option("--out", o.out, "Checkpoint path")->required();
    train_cmd->add_option("--tier", o.tier, "tiny, small or medium")->capture_default_str();
    train_cmd->add_option("--ckpt", o.ckpt, "Resume from this checkpoint");
    add_seed(train_cmd);
    add_schedule(train_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the validation split");
    eval_cmd->add_option("--ckpt", o.ckpt, "Checkpoint path")->required();
    eval_cmd->add_option("--data", o.data, "Dataset directory")->required();
    eval_cmd->add_option("--out", o.out, "Also write the report as JSON here");

    auto* scaling_cmd = app.add_subcommand("scaling", "Train tiny, small and medium on the same schedule");
    scaling_cmd->add_option("--data", o.data, "Dataset directory")->required();
    scaling_cmd->add_option("--out", o.out, "Also write the table as JSON here");
    add_seed(scaling_cmd);
    add_schedule(scaling_cmd);

    auto* ask_cmd = app.add_subcommand("ask", "Ask the coach one question about a board");
    ask_cmd->add_option("--ckpt", o.ckpt, "Checkpoint path")->required();
    ask_cmd->add_option("--board", o.board, "Nine characters from X, O, _")->required();
    ask_cmd->add_option("--question", o.question, "Question text")->required();

    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--ckpt", o.ckpt, "Checkpoint path")->required();
    serve_cmd->add_option("--addr", o.addr, "host:port")->capture_default_str();
    serve_cmd->add_option("--static", o.static_dir, "Directory served at /");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*ds_build) {
            const auto samples = build_dataset(o.seed);
            std::vector<std::string> texts;
            texts.reserve(samples.size() * 2);
            for (const auto& s : samples) {
                texts.push_back(s.question);
                texts.push_back(s.answer);
            }
            std::filesystem::create_directories(o.out);
            write_manifest(samples, o.out + "/dataset.jsonl");
            Vocabulary::build(texts).save(o.out + "/vocab.json");
            out << samples.size() << " samples\n";
        } else if (*ds_stats) {
            out << format_stats_table(dataset_stats(load_samples(o.data)));
        } else if (*render_cmd) {
            write_png_file(render(Board::parse(o.board)), o.out);
            out << "wrote " << o.out << "\n";
        } else if (*train_cmd) {
            const TrainConfig tc = train_config(o);
            const auto samples = load_samples(o.data);
            const auto vocab = load_vocab(o.data);
            std::optional<Checkpoint> resume;
            if (!o.ckpt.empty()) resume = load_checkpoint(o.ckpt);
            const Checkpoint ck = train(tc, samples, vocab, progress_hooks(out), resume ? &*resume : nullptr);
            save_checkpoint(o.out, ck);
            write_text(o.out + ".metrics.jsonl", metrics_to_jsonl(ck.history));
            out << "saved " << o.out << "\n";
        } else if (*eval_cmd) {
            const Checkpoint ck = load_checkpoint(o.ckpt);
            const auto val = select_split(load_samples(o.data), Split::Val, 1.0, 0);
            const EvalReport r = evaluate(ck, val);
            out << format_eval_report(r);
            if (!o.out.empty()) write_text(o.out, eval_report_to_json(r));
        } else if (*scaling_cmd) {
            const TrainConfig tc = train_config(o);
            const auto samples = load_samples(o.data);
            const auto vocab = load_vocab(o.data);
            std::vector<std::string> tiers(std::begin(kTierNames), std::end(kTierNames));
            const auto rows = scaling_experiment(tiers, tc, samples, vocab, progress_hooks(out));
            out << format_scaling_table(rows);
            if (!o.out.empty()) write_text(o.out, scaling_to_json(rows));
        } else if (*ask_cmd) {
            const Coach coach = Coach::load(o.ckpt);
            out << coach.ask(o.board, o.question).answer << "\n";
        } else if (*serve_cmd) {
            const auto [host, port] = parse_address(o.addr);
            const Coach coach = Coach::load(o.ckpt);
            HttpService service(coach, o.static_dir);
            const int bound = service.bind(host, port);
            out << "listening on http://" << host << ":" << bound << "\n" << std::flush;
            g_server = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            service.listen();
            g_server = nullptr;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli_main(args, std::cout, std::cerr);
}

}  // namespace ttt

// crowdrank: learn attractiveness scores from crowd rating distributions.
//
//   crowdrank synth        --out-dir DIR [--config config.json]
//   crowdrank sample-pairs --features features.jsonl --out worklist.jsonl [--per-item 5] [--seed S] [--dedupe]
//   crowdrank train        --items items.jsonl --pairs pairs.jsonl --config config.json --out-dir DIR
//   crowdrank eval         --model model.json --items items.jsonl --pairs pairs.jsonl --out-dir DIR
//   crowdrank agree        --items items.jsonl --pairs pairs.jsonl --out-dir DIR [--cg 0.3] [--cp 0.2]
//   crowdrank score-seq    --model model.json (--features frames.jsonl | --frames-dir DIR) --out scores.csv
//
// Exit status is 0 only when the command completed. Diagnostics go to stderr.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "crowdrank/dataset_io.hpp"
#include "crowdrank/evaluator.hpp"
#include "crowdrank/pair_sampler.hpp"
#include "crowdrank/rating_data.hpp"
#include "crowdrank/synth_bench.hpp"
#include "crowdrank/trainer.hpp"

namespace fs = std::filesystem;
using namespace crowdrank;

namespace {

int threads_from_env() {
    if (const char* env = std::getenv("CROWDRANK_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
        std::cerr << "warning: ignoring CROWDRANK_THREADS=" << env << "\n";
    }
    return 1;
}

Dataset load_dataset(const fs::path& items, const fs::path& pairs) {
    Dataset dataset(io::read_items(items), io::read_pairs(pairs));
    dataset.validate();
    return dataset;
}

NetworkPlan plan_for(const io::RunConfig& config, const Dataset& dataset) {
    if (config.network) return *config.network;
    if (dataset.items().empty()) throw DataError("no items to infer the network input from");
    const auto& input = dataset.items().front().input;
    if (input.kind == InputKind::Image) return NetworkPlan::default_image(input.tensor.shape);
    return NetworkPlan::default_features(input.tensor.shape.channels);
}

std::string epoch_file(int index) {
    std::ostringstream name;
    name << "epoch-" << std::setw(2) << std::setfill('0') << index << ".json";
    return name.str();
}

int run_synth(const fs::path& out_dir, const std::string& config_path) {
    io::RunConfig config;
    if (!config_path.empty()) {
        config = io::read_run_config(config_path);
    } else {
        config.train = benchmark_train_config();
    }
    const auto data = generate(config.synth);
    fs::create_directories(out_dir);
    io::write_items(out_dir / "items.jsonl", data.dataset.items());
    io::write_pairs(out_dir / "pairs.jsonl", data.dataset.pairs());
    io::write_clips(out_dir / "clips.jsonl", data.clips);
    io::write_latents(out_dir / "latents.json", data);

    io::Json run{{"train", io::to_json(config.train)},
                 {"network", io::to_json(config.network ? *config.network : benchmark_plan(config.synth))},
                 {"synth", io::to_json(config.synth)},
                 {"model_seed", config.model_seed}};
    io::write_text(out_dir / "config.json", run.dump(2) + "\n");
    std::cerr << "wrote " << data.dataset.items().size() << " items, " << data.dataset.pairs().size() << " pairs, "
              << data.clips.size() << " clips to " << out_dir << "\n";
    return 0;
}

int run_sample_pairs(const fs::path& features, const fs::path& out, std::size_t per_item, std::uint64_t seed,
                     bool dedupe) {
    auto rows = io::read_features(features);
    const auto index = l2_normalize(rows.ids, std::move(rows.vectors));
    SamplerOptions options{per_item, seed, dedupe};
    std::vector<std::pair<std::string, std::string>> named;
    for (const auto& [i, j] : sample_pairs(index, options)) named.emplace_back(index.ids()[i], index.ids()[j]);
    io::write_worklist(out, named);
    return 0;
}

int run_train(const fs::path& items, const fs::path& pairs, const fs::path& config_path, const fs::path& out_dir,
              std::optional<int> threads) {
    auto config = io::read_run_config(config_path);
    if (threads) config.train.threads = *threads;
    const auto dataset = load_dataset(items, pairs);
    const auto plan = plan_for(config, dataset);
    fs::create_directories(out_dir / "checkpoints");

    std::vector<EpochRecord> history;
    int epoch_index = 0;
    auto on_epoch = [&](const EpochRecord& record, const Model& model) {
        history.push_back(record);
        io::save_checkpoint(out_dir / "checkpoints" / epoch_file(++epoch_index), {model, config.train, history});
        std::cerr << "stage " << record.stage << " epoch " << record.epoch_in_stage << " lr " << record.learning_rate
                  << " loss " << record.mean_total << " Lg " << record.mean_global << " Lr " << record.mean_relative
                  << "\n";
    };
    auto result = train(dataset, initial_model(plan, config.model_seed), config.train, on_epoch);
    io::save_checkpoint(out_dir / "model.json", {result.model, config.train, result.history});
    io::write_text(out_dir / "history.json", io::to_json(result.history).dump(2) + "\n");
    return 0;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) {
        try {
            out.push_back(std::stod(token));
        } catch (const std::exception&) {
            throw DataError("cannot parse '" + token + "' as a number");
        }
    }
    if (out.empty()) throw DataError("empty number list");
    return out;
}

struct EvalArgs {
    std::string model, items, pairs, out_dir, latents, clips;
    double p_a = 0.2;
    std::string p_b = "0.3,0.4,0.5,0.6";
    std::string mode = "distribution";
    std::string split = "test";
    double tau = 0.0;
    bool tune_tau = false;
    bool decided_only = false;
};

int run_eval(const EvalArgs& args) {
    const auto cp = io::load_checkpoint(args.model);
    const auto dataset = load_dataset(args.items, args.pairs);
    EvaluationOptions options;
    options.split = parse_split(args.split);
    options.p_a = args.p_a;
    options.pairwise.p_b_values = parse_list(args.p_b);
    options.pairwise.rule = {parse_verdict_mode(args.mode), args.tau};
    options.pairwise.tune_tau = args.tune_tau;
    options.pairwise.decided_only = args.decided_only;

    const auto report = evaluate(cp.model, dataset, options);
    auto json = io::to_json(report);
    json["split"] = args.split;

    if (!args.latents.empty()) {
        std::ifstream in(args.latents);
        if (!in) throw DataError("cannot open " + args.latents);
        const auto sidecar = io::Json::parse(in);
        std::vector<double> scores, latents;
        for (std::size_t i : dataset.items_in(options.split)) {
            const auto& item = dataset.items()[i];
            scores.push_back(cp.model.network.forward(item.input.tensor));
            latents.push_back(sidecar.at("latents").at(item.id).get<double>());
        }
        json["spearman"] = spearman(scores, latents);
    }
    if (!args.clips.empty()) json["peak_score"] = peak_score_report(io::read_clips(args.clips), cp.model.network);

    const fs::path out_dir = args.out_dir;
    io::write_text(out_dir / "report.json", json.dump(2) + "\n");
    io::write_text(out_dir / "roc.csv", io::roc_csv(report.roc));
    std::cout << json.dump(2) << "\n";
    return 0;
}

int run_agree(const fs::path& items, const fs::path& pairs, double c_g, double c_p, const fs::path& out_dir) {
    const auto dataset = load_dataset(items, pairs);
    const auto confusion = agreement_confusion(dataset.pairs(), dataset, c_g, c_p);
    const auto json = io::to_json(confusion, c_g, c_p);
    io::write_text(out_dir / "confusion.json", json.dump(2) + "\n");
    io::write_text(out_dir / "confusion.csv", io::confusion_csv(confusion));
    std::cout << json.dump(2) << "\n";
    return 0;
}

int run_score_seq(const fs::path& model, const std::string& features, const std::string& frames_dir,
                  const fs::path& out) {
    if (features.empty() == frames_dir.empty()) throw DataError("score-seq needs exactly one of --features or --frames-dir");
    const auto cp = io::load_checkpoint(model);
    std::vector<Tensor> frames;
    if (!features.empty()) {
        for (auto& v : io::read_features(features).vectors) frames.push_back(Tensor::vector(std::move(v)));
    } else {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(frames_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) frames.push_back(io::read_tensor(f));
    }
    const auto scores = score_sequence(frames, cp.model.network);
    io::write_text(out, io::sequence_csv(scores));
    std::cout << scores.peak_index << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learn and evaluate attractiveness scores from crowd rating distributions"};
    app.require_subcommand(1);
    int threads_flag = 0;
    app.add_option("--threads", threads_flag, "Worker threads (default: $CROWDRANK_THREADS or 1)")->check(CLI::PositiveNumber);

    std::string out_dir, config_path, items, pairs, features, out, model, frames_dir;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic crowd-rated dataset");
    synth->add_option("--out-dir", out_dir, "Output directory")->required();
    synth->add_option("--config", config_path, "config.json with an optional 'synth' section");

    std::size_t per_item = 5;
    std::uint64_t seed = 0;
    bool dedupe = false;
    auto* sample = app.add_subcommand("sample-pairs", "Draw similarity-weighted comparison pairs");
    sample->add_option("--features", features, "features.jsonl")->required();
    sample->add_option("--out", out, "Output worklist JSONL")->required();
    sample->add_option("--per-item", per_item, "Pairs drawn per source item")->check(CLI::PositiveNumber);
    sample->add_option("--seed", seed, "Sampling seed");
    sample->add_flag("--dedupe", dedupe, "Redraw partners already drawn for the same item");

    auto* train_cmd = app.add_subcommand("train", "Train a Siamese score network");
    train_cmd->add_option("--items", items, "items.jsonl")->required();
    train_cmd->add_option("--pairs", pairs, "pairs.jsonl")->required();
    train_cmd->add_option("--config", config_path, "config.json")->required();
    train_cmd->add_option("--out-dir", out_dir, "Output directory")->required();

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Evaluate a trained model");
    eval->add_option("--model", eval_args.model, "model.json")->required();
    eval->add_option("--items", eval_args.items, "items.jsonl")->required();
    eval->add_option("--pairs", eval_args.pairs, "pairs.jsonl")->required();
    eval->add_option("--out-dir", eval_args.out_dir, "Output directory")->required();
    eval->add_option("--pa", eval_args.p_a, "3-star share threshold for positives");
    eval->add_option("--pb", eval_args.p_b, "Comma-separated margins for pairwise ground truth");
    eval->add_option("--mode", eval_args.mode, "distribution | argmax-group | score-threshold");
    eval->add_option("--split", eval_args.split, "train | test");
    eval->add_option("--tau", eval_args.tau, "Equal band for the verdict rule");
    eval->add_flag("--tune-tau", eval_args.tune_tau, "Grid-search tau on the validation pairs");
    eval->add_flag("--decided-only", eval_args.decided_only, "Skip pairs whose ground truth is Equal");
    eval->add_option("--latents", eval_args.latents, "Synthetic latents sidecar; adds spearman");
    eval->add_option("--clips", eval_args.clips, "clips.jsonl with annotated peaks; adds peak_score");

    double c_g = 0.3, c_p = 0.2;
    auto* agree = app.add_subcommand("agree", "Agreement between global and pairwise ratings");
    agree->add_option("--items", items, "items.jsonl")->required();
    agree->add_option("--pairs", pairs, "pairs.jsonl")->required();
    agree->add_option("--out-dir", out_dir, "Output directory")->required();
    agree->add_option("--cg", c_g, "Equality band on average global ratings");
    agree->add_option("--cp", c_p, "Equality band on average pairwise ratings");

    auto* seq = app.add_subcommand("score-seq", "Score and normalize the frames of one clip");
    seq->add_option("--model", model, "model.json")->required();
    seq->add_option("--features", features, "Frame features as features.jsonl, in order");
    seq->add_option("--frames-dir", frames_dir, "Directory of frame tensor files, sorted by name");
    seq->add_option("--out", out, "Output CSV")->required();

    CLI11_PARSE(app, argc, argv);
    const std::optional<int> threads =
        threads_flag > 0 ? std::optional<int>(threads_flag) : std::optional<int>(threads_from_env());

    try {
        if (*synth) return run_synth(out_dir, config_path);
        if (*sample) return run_sample_pairs(features, out, per_item, seed, dedupe);
        if (*train_cmd) return run_train(items, pairs, config_path, out_dir, threads);
        if (*eval) return run_eval(eval_args);
        if (*agree) return run_agree(items, pairs, c_g, c_p, out_dir);
        if (*seq) return run_score_seq(model, features, frames_dir, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

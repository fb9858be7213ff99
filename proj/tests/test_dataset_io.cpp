#include <doctest.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include "crowdrank/dataset_io.hpp"
#include "support.hpp"

using namespace crowdrank;
using namespace crowdrank::testing;
namespace io = crowdrank::io;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("crowdrank-io-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

/// Collects warnings for the lifetime of the guard, then restores stderr output.
struct CapturedWarnings {
    std::vector<std::string> messages;
    CapturedWarnings() {
        io::set_warning_sink([this](const std::string& m) { messages.push_back(m); });
    }
    ~CapturedWarnings() {
        io::set_warning_sink([](const std::string& m) { std::cerr << "warning: " << m << "\n"; });
    }
};

bool same_model(const Model& a, const Model& b) {
    for (std::size_t k = 0; k < a.network.layers().size(); ++k)
        if (a.network.layers()[k].weights != b.network.layers()[k].weights ||
            a.network.layers()[k].bias != b.network.layers()[k].bias)
            return false;
    return a.standard.global_anchors == b.standard.global_anchors &&
           a.standard.relative_log_gaps == b.standard.relative_log_gaps;
}

}  // namespace

TEST_CASE("items, pairs and clips round-trip") {
    TempDir dir;
    SynthConfig c;
    c.n_items = 12;
    c.input_shape = {1, 1, 3};
    c.n_clips = 2;
    c.frames_per_clip = 4;
    const auto d = generate(c);
    io::write_items(dir.path / "items.jsonl", d.dataset.items());
    io::write_pairs(dir.path / "pairs.jsonl", d.dataset.pairs());
    io::write_clips(dir.path / "clips.jsonl", d.clips);

    const auto items = io::read_items(dir.path / "items.jsonl");
    REQUIRE(items.size() == 12);
    for (std::size_t i = 0; i < items.size(); ++i) {
        CHECK(items[i].id == d.dataset.items()[i].id);
        CHECK(items[i].input.tensor.data == d.dataset.items()[i].input.tensor.data);
        CHECK(items[i].global_votes.counts == d.dataset.items()[i].global_votes.counts);
        CHECK(items[i].split == d.dataset.items()[i].split);
    }
    const auto pairs = io::read_pairs(dir.path / "pairs.jsonl");
    REQUIRE(pairs.size() == d.dataset.pairs().size());
    CHECK(pairs[3].first_id == d.dataset.pairs()[3].first_id);
    CHECK(pairs[3].votes.counts == d.dataset.pairs()[3].votes.counts);

    const auto clips = io::read_clips(dir.path / "clips.jsonl");
    REQUIRE(clips.size() == 2);
    CHECK(clips[1].peaks == std::vector<std::size_t>{d.clips[1].peak});
    CHECK(clips[1].frames[2].data == d.clips[1].frames[2].tensor.data);
}

TEST_CASE("reader skips schema and blank lines and warns once per unknown field") {
    TempDir dir;
    write_file(dir.path / "items.jsonl",
               "#schema: items v1\n"
               "\n"
               R"({"id": "a", "feature": [1, 2], "global_votes": [1, 2, 3], "colour": "red"})"
               "\n"
               R"({"id": "b", "feature": [3, 4], "global_votes": [0, 0, 1], "split": "test", "colour": "blue"})"
               "\n");
    CapturedWarnings warnings;
    const auto items = io::read_items(dir.path / "items.jsonl");
    REQUIRE(items.size() == 2);
    CHECK(items[0].split == Split::Train);
    CHECK(items[1].split == Split::Test);
    REQUIRE(warnings.messages.size() == 1);
    CHECK(warnings.messages[0].find("colour") != std::string::npos);
}

TEST_CASE("malformed records name the file and record") {
    TempDir dir;
    const auto p = dir.path / "pairs.jsonl";
    write_file(p, R"({"first": "a", "second": "b", "votes": [1, 2, 3]})" "\n");
    CHECK_THROWS_WITH_AS(io::read_pairs(p), doctest::Contains("exactly 5 entries"), DataError);
    write_file(p, R"({"first": "a", "second": "b", "votes": [1, 2, 3, 0, 0, 1]})" "\n");
    CHECK_THROWS_AS(io::read_pairs(p), DataError);
    write_file(p, R"({"first": "a", "votes": [0, 0, 1, 0, 0]})" "\n");
    CHECK_THROWS_WITH_AS(io::read_pairs(p), doctest::Contains("record 1: missing field 'second'"), DataError);
    write_file(p, "{not json\n");
    CHECK_THROWS_WITH_AS(io::read_pairs(p), doctest::Contains("invalid JSON"), DataError);

    const auto items = dir.path / "items.jsonl";
    write_file(items, R"({"id": "a", "feature": [1], "global_votes": [1, 2]})" "\n");
    CHECK_THROWS_WITH_AS(io::read_items(items), doctest::Contains("exactly 3 entries"), DataError);
    write_file(items, R"({"id": "a", "feature": [1], "global_votes": [0, 0, 0]})" "\n");
    CHECK_THROWS_WITH_AS(io::read_items(items), doctest::Contains("no votes"), DataError);
    write_file(items, R"({"id": "a", "feature": [1], "image": "x", "global_votes": [1, 0, 0]})" "\n");
    CHECK_THROWS_AS(io::read_items(items), DataError);
    CHECK_THROWS_WITH_AS(io::read_items(dir.path / "absent.jsonl"), doctest::Contains("cannot open"), DataError);
}

TEST_CASE("image items load tensor files relative to the items file") {
    TempDir dir;
    Rng rng(1);
    std::vector<ItemRecord> items;
    for (int i = 0; i < 6; ++i) {
        Tensor t = random_tensor(rng, {4, 4, 2});
        for (auto& v : t.data) v = 0.5 + 0.5 * v;
        items.push_back({"img" + std::to_string(i), ItemInput::image(t, ""), {{1, 2, i}}, Split::Train});
    }
    io::write_items(dir.path / "items.jsonl", items);
    CHECK(fs::exists(dir.path / "images" / "img3.tensor.json"));
    const auto back = io::read_items(dir.path / "items.jsonl");
    CHECK(back[3].input.kind == InputKind::Image);
    CHECK(back[3].input.tensor.shape == Shape{4, 4, 2});
    CHECK(back[3].input.tensor.data == items[3].input.tensor.data);

    write_file(dir.path / "bad.tensor.json", R"({"shape": [2, 2, 1], "data": [0, 1, 0]})");
    CHECK_THROWS_WITH_AS(io::read_tensor(dir.path / "bad.tensor.json"), doctest::Contains("3 values"), DataError);

    // A short image run end to end.
    NetworkPlan plan;
    plan.input_kind = InputKind::Image;
    plan.input_shape = {4, 4, 2};
    plan.layers = {LayerSpec::convolution(3, 3), LayerSpec::relu(), LayerSpec::spatial_max_pool(), LayerSpec::affine(1)};
    plan.backbone_layers = 1;
    std::vector<PairRecord> pairs{{"img0", "img5", {{3, 1, 1, 0, 0}}}, {"img2", "img4", {{1, 1, 2, 1, 0}}}};
    TrainConfig cfg;
    cfg.stage1_epochs = 1;
    cfg.stage2_epochs = 2;
    cfg.base_lr = 0.05;
    const auto r = train(Dataset(back, pairs), initial_model(plan, 3), cfg);
    CHECK(r.history.size() == 3);
    for (const auto& e : r.history) CHECK(std::isfinite(e.mean_total));
}

TEST_CASE("checkpoints round-trip bitwise") {
    TempDir dir;
    SynthConfig sc;
    sc.n_items = 30;
    sc.input_shape = {1, 1, 4};
    const auto data = generate(sc);
    TrainConfig cfg;
    cfg.stage1_epochs = 1;
    cfg.stage2_epochs = 1;
    cfg.base_lr = 0.03;
    cfg.supervision = Supervision::GlobalOnly;
    const auto r = train(data.dataset, initial_model(NetworkPlan::default_features(4), 5), cfg);

    io::save_checkpoint(dir.path / "m.json", {r.model, cfg, r.history});
    const auto back = io::load_checkpoint(dir.path / "m.json");
    CHECK(same_model(back.model, r.model));
    CHECK(back.model.network.plan().layers.size() == r.model.network.plan().layers.size());
    CHECK(back.config.supervision == Supervision::GlobalOnly);
    CHECK(back.config.base_lr == 0.03);
    REQUIRE(back.history.size() == 2);
    CHECK(back.history[1].mean_total == r.history[1].mean_total);
    const Tensor x = data.dataset.items()[0].input.tensor;
    CHECK(back.model.network.forward(x) == r.model.network.forward(x));

    write_file(dir.path / "other.json", R"({"format": "something-else"})");
    CHECK_THROWS_WITH_AS(io::load_checkpoint(dir.path / "other.json"), doctest::Contains("not a crowdrank model"), DataError);
}

TEST_CASE("config sections round-trip and are optional") {
    TrainConfig t;
    t.stage1_epochs = 3;
    t.base_lr = 0.25;
    t.supervision = Supervision::PairwiseOnly;
    const auto t2 = io::train_config_from_json(io::to_json(t));
    CHECK(t2.stage1_epochs == 3);
    CHECK(t2.base_lr == 0.25);
    CHECK(t2.supervision == Supervision::PairwiseOnly);

    const auto plan = NetworkPlan::default_image({16, 16, 3});
    const auto p2 = io::network_plan_from_json(io::to_json(plan));
    CHECK(io::to_json(p2) == io::to_json(plan));

    SynthConfig s;
    s.n_items = 77;
    s.global_cut_points = {0.2, 0.9};
    const auto s2 = io::synth_config_from_json(io::to_json(s));
    CHECK(s2.n_items == 77);
    CHECK(s2.global_cut_points == s.global_cut_points);

    const auto empty = io::run_config_from_json(io::Json::object());
    CHECK(empty.train.base_lr == TrainConfig{}.base_lr);
    CHECK_FALSE(empty.network.has_value());
    CHECK_THROWS_AS(io::network_plan_from_json(io::Json::parse(R"({"layers": [{"type": "dropout"}]})")), DataError);
}

TEST_CASE("csv writers") {
    const auto roc_text = io::roc_csv(roc({0.9, 0.1}, {true, false}));
    CHECK(roc_text.rfind("threshold,fpr,tpr\n", 0) == 0);
    CHECK(roc_text.find("\n1,0,1\n") == std::string::npos);  // thresholds carry their score

    const auto seq = io::sequence_csv(normalize_sequence({1.0, 3.0}));
    CHECK(seq == "frame_index,raw,normalized\n0,1,0\n1,3,1\n");

    AgreementConfusion c{};
    c.matrix[0] = {1, 0, 0};
    c.counts[0] = {4, 0, 0};
    c.unsupported = {false, true, true};
    const auto text = io::confusion_csv(c);
    std::istringstream lines(text);
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    CHECK(header == "global_label,better,equal,worse,support,unsupported");
    CHECK(first.substr(first.size() - 4) == ",4,0");
}

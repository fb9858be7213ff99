#include "crowdrank/dataset_io.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

namespace crowdrank::io {

namespace {

WarningSink& warning_sink() {
    static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
    return sink;
}

/// Warns once per (file, key) about fields outside `known`.
class FieldChecker {
public:
    FieldChecker(std::string where, std::set<std::string> known) : where_(std::move(where)), known_(std::move(known)) {}

    void check(const Json& obj) {
        if (!obj.is_object()) return;
        for (const auto& [key, value] : obj.items()) {
            if (known_.count(key) || warned_.count(key)) continue;
            warned_.insert(key);
            warning_sink()(where_ + ": ignoring unknown field '" + key + "'");
        }
    }

private:
    std::string where_;
    std::set<std::string> known_;
    std::set<std::string> warned_;
};

std::string at_line(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

template <typename T>
T required(const Json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw DataError(where + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(where + ": field '" + key + "' has the wrong type (" + e.what() + ")");
    }
}

template <std::size_t N>
std::array<int, N> vote_array(const Json& obj, const char* key, const std::string& where) {
    const auto values = required<std::vector<int>>(obj, key, where);
    if (values.size() != N)
        throw DataError(where + ": '" + key + "' must have exactly " + std::to_string(N) + " entries, got " +
                        std::to_string(values.size()));
    std::array<int, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        if (values[i] < 0) throw DataError(where + ": negative vote count in '" + key + "'");
        out[i] = values[i];
    }
    return out;
}

template <typename T>
void read_if(const Json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

Json shape_json(const Shape& s) { return Json::array({s.height, s.width, s.channels}); }

Shape shape_from(const Json& j, const std::string& where) {
    const auto v = j.get<std::vector<int>>();
    if (v.size() != 3) throw DataError(where + ": shape must be [H, W, C]");
    return {v[0], v[1], v[2]};
}

const char* input_kind_name(InputKind kind) { return kind == InputKind::Image ? "image" : "feature_vector"; }

InputKind parse_input_kind(const std::string& text) {
    if (text == "image") return InputKind::Image;
    if (text == "feature_vector" || text == "feature") return InputKind::FeatureVector;
    throw DataError("unknown input kind '" + text + "' (expected image or feature_vector)");
}

}  // namespace

void set_warning_sink(WarningSink sink) { warning_sink() = std::move(sink); }

std::vector<Json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<Json> rows;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (line.rfind("#schema:", 0) == 0) continue;
        try {
            rows.push_back(Json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(at_line(path, number) + ": invalid JSON (" + e.what() + ")");
        }
        if (!rows.back().is_object()) throw DataError(at_line(path, number) + ": expected a JSON object");
    }
    return rows;
}

void write_jsonl(const fs::path& path, const std::vector<Json>& rows) {
    std::ostringstream out;
    for (const auto& row : rows) out << row.dump() << "\n";
    write_text(path, out.str());
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

Tensor read_tensor(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open tensor file " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": invalid tensor JSON (" + e.what() + ")");
    }
    const std::string where = path.string();
    const Shape shape = shape_from(j.at("shape"), where);
    auto data = required<std::vector<double>>(j, "data", where);
    if (data.size() != shape.size())
        throw DataError(where + ": tensor has " + std::to_string(data.size()) + " values, shape " + shape.to_string() +
                        " needs " + std::to_string(shape.size()));
    return Tensor(shape, std::move(data));
}

void write_tensor(const fs::path& path, const Tensor& tensor) {
    Json j{{"shape", shape_json(tensor.shape)}, {"data", tensor.data}};
    write_text(path, j.dump() + "\n");
}

std::vector<ItemRecord> read_items(const fs::path& path) {
    FieldChecker checker(path.string(), {"id", "feature", "image", "global_votes", "split"});
    std::vector<ItemRecord> items;
    std::size_t line = 0;
    for (const auto& row : read_jsonl(path)) {
        const std::string where = path.string() + " record " + std::to_string(++line);
        checker.check(row);
        ItemRecord item;
        item.id = required<std::string>(row, "id", where);
        const bool has_feature = row.contains("feature");
        const bool has_image = row.contains("image");
        if (has_feature == has_image)
            throw DataError(where + ": item '" + item.id + "' needs exactly one of 'feature' or 'image'");
        if (has_feature) {
            item.input = ItemInput::features(required<std::vector<double>>(row, "feature", where));
        } else {
            const auto rel = required<std::string>(row, "image", where);
            item.input = ItemInput::image(read_tensor(path.parent_path() / rel), rel);
        }
        item.global_votes.counts = vote_array<kGlobalLevels>(row, "global_votes", where);
        if (item.global_votes.total() < 1) throw DataError(where + ": item '" + item.id + "' has no votes");
        item.split = row.contains("split") ? parse_split(required<std::string>(row, "split", where)) : Split::Train;
        items.push_back(std::move(item));
    }
    return items;
}

void write_items(const fs::path& path, const std::vector<ItemRecord>& items) {
    std::vector<Json> rows;
    for (const auto& item : items) {
        Json row{{"id", item.id}};
        if (item.input.kind == InputKind::FeatureVector) {
            row["feature"] = item.input.tensor.data;
        } else {
            const std::string rel = "images/" + item.id + ".tensor.json";
            write_tensor(path.parent_path() / rel, item.input.tensor);
            row["image"] = rel;
        }
        row["global_votes"] = item.global_votes.counts;
        row["split"] = to_string(item.split);
        rows.push_back(std::move(row));
    }
    write_jsonl(path, rows);
}

std::vector<PairRecord> read_pairs(const fs::path& path) {
    FieldChecker checker(path.string(), {"first", "second", "votes"});
    std::vector<PairRecord> pairs;
    std::size_t line = 0;
    for (const auto& row : read_jsonl(path)) {
        const std::string where = path.string() + " record " + std::to_string(++line);
        checker.check(row);
        PairRecord pair;
        pair.first_id = required<std::string>(row, "first", where);
        pair.second_id = required<std::string>(row, "second", where);
        pair.votes.counts = vote_array<kPairwiseLevels>(row, "votes", where);
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

void write_pairs(const fs::path& path, const std::vector<PairRecord>& pairs) {
    std::vector<Json> rows;
    for (const auto& p : pairs) rows.push_back({{"first", p.first_id}, {"second", p.second_id}, {"votes", p.votes.counts}});
    write_jsonl(path, rows);
}

FeatureRows read_features(const fs::path& path) {
    FieldChecker checker(path.string(), {"id", "feature"});
    FeatureRows out;
    std::size_t line = 0;
    for (const auto& row : read_jsonl(path)) {
        const std::string where = path.string() + " record " + std::to_string(++line);
        checker.check(row);
        out.ids.push_back(required<std::string>(row, "id", where));
        out.vectors.push_back(required<std::vector<double>>(row, "feature", where));
    }
    return out;
}

void write_worklist(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::vector<Json> rows;
    for (const auto& [a, b] : pairs) rows.push_back({{"first_id", a}, {"second_id", b}});
    write_jsonl(path, rows);
}

std::vector<AnnotatedClip> read_clips(const fs::path& path) {
    FieldChecker checker(path.string(), {"id", "peaks", "frames"});
    std::vector<AnnotatedClip> clips;
    std::size_t line = 0;
    for (const auto& row : read_jsonl(path)) {
        const std::string where = path.string() + " record " + std::to_string(++line);
        checker.check(row);
        AnnotatedClip clip;
        clip.id = required<std::string>(row, "id", where);
        clip.peaks = required<std::vector<std::size_t>>(row, "peaks", where);
        for (const auto& frame : required<Json>(row, "frames", where)) {
            if (frame.is_string())
                clip.frames.push_back(read_tensor(path.parent_path() / frame.get<std::string>()));
            else
                clip.frames.push_back(Tensor::vector(frame.get<std::vector<double>>()));
        }
        clips.push_back(std::move(clip));
    }
    return clips;
}

void write_clips(const fs::path& path, const std::vector<SynthClip>& clips) {
    std::vector<Json> rows;
    for (const auto& clip : clips) {
        Json frames = Json::array();
        for (std::size_t t = 0; t < clip.frames.size(); ++t) {
            const auto& f = clip.frames[t];
            if (f.kind == InputKind::FeatureVector) {
                frames.push_back(f.tensor.data);
            } else {
                const std::string rel = "clips/" + clip.id + "/frame-" + std::to_string(t) + ".tensor.json";
                write_tensor(path.parent_path() / rel, f.tensor);
                frames.push_back(rel);
            }
        }
        rows.push_back({{"id", clip.id}, {"peaks", Json::array({clip.peak})}, {"frames", std::move(frames)}});
    }
    write_jsonl(path, rows);
}

void write_latents(const fs::path& path, const SynthDataset& data) {
    Json items = Json::object();
    for (std::size_t i = 0; i < data.latents.size(); ++i) items[data.dataset.items()[i].id] = data.latents[i];
    Json clips = Json::array();
    for (const auto& c : data.clips) clips.push_back({{"id", c.id}, {"latents", c.latents}, {"peak", c.peak}});
    Json j{{"latents", items},
           {"embedding", {{"offset", data.embedding.offset}, {"direction", data.embedding.direction}}},
           {"clips", clips}};
    write_text(path, j.dump(2) + "\n");
}

Json to_json(const TrainConfig& c) {
    return {{"stage1_epochs", c.stage1_epochs}, {"stage2_epochs", c.stage2_epochs}, {"base_lr", c.base_lr},
            {"decay_factor", c.decay_factor},   {"decay_every", c.decay_every},     {"batch_size", c.batch_size},
            {"seed", c.seed},                   {"supervision", to_string(c.supervision)}, {"threads", c.threads}};
}

TrainConfig train_config_from_json(const Json& j) {
    FieldChecker("config.train", {"stage1_epochs", "stage2_epochs", "base_lr", "decay_factor", "decay_every",
                                  "batch_size", "seed", "supervision", "threads"})
        .check(j);
    TrainConfig c;
    try {
        read_if(j, "stage1_epochs", c.stage1_epochs);
        read_if(j, "stage2_epochs", c.stage2_epochs);
        read_if(j, "base_lr", c.base_lr);
        read_if(j, "decay_factor", c.decay_factor);
        read_if(j, "decay_every", c.decay_every);
        read_if(j, "batch_size", c.batch_size);
        read_if(j, "seed", c.seed);
        read_if(j, "threads", c.threads);
        if (j.contains("supervision")) c.supervision = parse_supervision(j.at("supervision").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config.train: ") + e.what());
    }
    c.validate();
    return c;
}

Json to_json(const NetworkPlan& plan) {
    Json layers = Json::array();
    for (const auto& l : plan.layers) {
        switch (l.kind) {
            case LayerKind::Convolution:
                layers.push_back({{"type", "convolution"}, {"kernel", l.kernel}, {"channels", l.channels}, {"stride", l.stride}});
                break;
            case LayerKind::Relu: layers.push_back({{"type", "relu"}}); break;
            case LayerKind::SpatialMaxPool: layers.push_back({{"type", "spatial_max_pool"}}); break;
            case LayerKind::Affine: layers.push_back({{"type", "affine"}, {"out_dim", l.out_dim}}); break;
        }
    }
    return {{"input_kind", input_kind_name(plan.input_kind)},
            {"input_shape", shape_json(plan.input_shape)},
            {"backbone_layers", plan.backbone_layers},
            {"layers", layers}};
}

NetworkPlan network_plan_from_json(const Json& j) {
    FieldChecker("network", {"input_kind", "input_shape", "backbone_layers", "layers"}).check(j);
    NetworkPlan plan;
    try {
        plan.input_kind = parse_input_kind(required<std::string>(j, "input_kind", "network"));
        plan.input_shape = shape_from(j.at("input_shape"), "network");
        plan.backbone_layers = j.value("backbone_layers", std::size_t{0});
        for (const auto& l : j.at("layers")) {
            const auto type = l.at("type").get<std::string>();
            if (type == "convolution")
                plan.layers.push_back(
                    LayerSpec::convolution(l.at("kernel").get<int>(), l.at("channels").get<int>(), l.value("stride", 1)));
            else if (type == "relu")
                plan.layers.push_back(LayerSpec::relu());
            else if (type == "spatial_max_pool")
                plan.layers.push_back(LayerSpec::spatial_max_pool());
            else if (type == "affine")
                plan.layers.push_back(LayerSpec::affine(l.at("out_dim").get<int>()));
            else
                throw DataError("network: unknown layer type '" + type + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("network: ") + e.what());
    }
    plan.validate();
    return plan;
}

Json to_json(const SynthConfig& c) {
    return {{"n_items", c.n_items},
            {"input_kind", input_kind_name(c.input_kind)},
            {"input_shape", shape_json(c.input_shape)},
            {"latent_range", {c.latent_min, c.latent_max}},
            {"rater_noise_sigma", c.rater_noise_sigma},
            {"input_noise_sigma", c.input_noise_sigma},
            {"raters_global", c.raters_global},
            {"raters_pairwise", c.raters_pairwise},
            {"global_cut_points", c.global_cut_points},
            {"pairwise_cut_points", c.pairwise_cut_points},
            {"test_fraction", c.test_fraction},
            {"pairs_per_item", c.pairs_per_item},
            {"n_clips", c.n_clips},
            {"frames_per_clip", c.frames_per_clip},
            {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const Json& j) {
    FieldChecker("config.synth", {"n_items", "input_kind", "input_shape", "feature_dim", "latent_range",
                                  "rater_noise_sigma", "input_noise_sigma", "raters_global", "raters_pairwise",
                                  "global_cut_points", "pairwise_cut_points", "test_fraction", "pairs_per_item",
                                  "n_clips", "frames_per_clip", "seed"})
        .check(j);
    SynthConfig c;
    try {
        read_if(j, "n_items", c.n_items);
        if (j.contains("input_kind")) c.input_kind = parse_input_kind(j.at("input_kind").get<std::string>());
        if (j.contains("input_shape")) c.input_shape = shape_from(j.at("input_shape"), "config.synth");
        if (j.contains("feature_dim")) c.input_shape = {1, 1, j.at("feature_dim").get<int>()};
        if (j.contains("latent_range")) {
            const auto r = j.at("latent_range").get<std::vector<double>>();
            if (r.size() != 2) throw DataError("config.synth: latent_range must be [lo, hi]");
            c.latent_min = r[0];
            c.latent_max = r[1];
        }
        read_if(j, "rater_noise_sigma", c.rater_noise_sigma);
        read_if(j, "input_noise_sigma", c.input_noise_sigma);
        read_if(j, "raters_global", c.raters_global);
        read_if(j, "raters_pairwise", c.raters_pairwise);
        read_if(j, "global_cut_points", c.global_cut_points);
        read_if(j, "pairwise_cut_points", c.pairwise_cut_points);
        read_if(j, "test_fraction", c.test_fraction);
        read_if(j, "pairs_per_item", c.pairs_per_item);
        read_if(j, "n_clips", c.n_clips);
        read_if(j, "frames_per_clip", c.frames_per_clip);
        read_if(j, "seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config.synth: ") + e.what());
    }
    c.validate();
    return c;
}

Json to_json(const StandardScores& s) {
    return {{"global_anchors", s.global_anchors},
            {"relative_log_gaps", s.relative_log_gaps},
            {"relative_anchors", relative_anchor_vector(s)}};
}

StandardScores standard_scores_from_json(const Json& j) {
    StandardScores s;
    s.global_anchors = required<std::vector<double>>(j, "global_anchors", "standard scores");
    s.relative_log_gaps = required<std::array<double, 2>>(j, "relative_log_gaps", "standard scores");
    if (s.global_anchors.size() != kGlobalLevels) throw DataError("standard scores: expected 3 global anchors");
    return s;
}

Json to_json(const std::vector<EpochRecord>& history) {
    Json out = Json::array();
    for (const auto& r : history)
        out.push_back({{"stage", r.stage},
                       {"epoch_in_stage", r.epoch_in_stage},
                       {"learning_rate", r.learning_rate},
                       {"mean_total", r.mean_total},
                       {"mean_global", r.mean_global},
                       {"mean_relative", r.mean_relative},
                       {"mean_lambda", r.mean_lambda}});
    return out;
}

namespace {

std::vector<EpochRecord> history_from_json(const Json& j) {
    std::vector<EpochRecord> out;
    for (const auto& r : j)
        out.push_back({r.at("stage").get<int>(), r.at("epoch_in_stage").get<int>(), r.at("learning_rate").get<double>(),
                       r.at("mean_total").get<double>(), r.at("mean_global").get<double>(),
                       r.at("mean_relative").get<double>(), r.at("mean_lambda").get<double>()});
    return out;
}

}  // namespace

Json to_json(const EvaluationReport& report) {
    Json acc = Json::array();
    for (const auto& a : report.pairwise)
        acc.push_back({{"p_b", a.p_b}, {"tau", a.tau}, {"accuracy", a.accuracy}, {"scored_pairs", a.scored_pairs}});
    return {{"mean_Lg", report.cross_entropy.mean_global},
            {"mean_Lr", report.cross_entropy.mean_relative},
            {"items", report.cross_entropy.item_count},
            {"pairs", report.cross_entropy.pair_count},
            {"p_a", report.p_a},
            {"roc_auc", report.roc.auc},
            {"roc_points", report.roc.points.size()},
            {"pairwise_mode", to_string(report.mode)},
            {"decided_only", report.decided_only},
            {"tau_validation", report.validation_source},
            {"pairwise_accuracy", acc}};
}

Json to_json(const AgreementConfusion& c, double c_g, double c_p) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < 3; ++r) {
        rows.push_back({{"global_label", to_string(static_cast<AgreementLabel>(r))},
                        {"counts", c.counts[r]},
                        {"fractions", c.matrix[r]},
                        {"unsupported", c.unsupported[r]}});
    }
    return {{"c_g", c_g},
            {"c_p", c_p},
            {"columns", {"better", "equal", "worse"}},
            {"rows", rows},
            {"agreement_rate", c.agreement_rate},
            {"pairs", c.pair_count}};
}

RunConfig run_config_from_json(const Json& j) {
    FieldChecker("config", {"train", "network", "synth", "model_seed"}).check(j);
    RunConfig c;
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("network")) c.network = network_plan_from_json(j.at("network"));
    if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
    if (j.contains("model_seed")) c.model_seed = j.at("model_seed").get<std::uint64_t>();
    return c;
}

RunConfig read_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": invalid JSON (" + e.what() + ")");
    }
    return run_config_from_json(j);
}

Json checkpoint_to_json(const Checkpoint& cp) {
    Json layers = Json::array();
    for (const auto& l : cp.model.network.layers()) layers.push_back({{"weights", l.weights}, {"bias", l.bias}});
    return {{"format", "crowdrank-model"},
            {"version", 1},
            {"plan", to_json(cp.model.network.plan())},
            {"seed", cp.model.network.seed()},
            {"layers", layers},
            {"standard", to_json(cp.model.standard)},
            {"config", to_json(cp.config)},
            {"history", to_json(cp.history)}};
}

Checkpoint checkpoint_from_json(const Json& j) {
    if (j.value("format", std::string{}) != "crowdrank-model") throw DataError("not a crowdrank model file");
    try {
        ScoreNetwork net(network_plan_from_json(j.at("plan")));
        net.set_seed(j.at("seed").get<std::uint64_t>());
        const auto& layers = j.at("layers");
        if (layers.size() != net.layers().size()) throw DataError("model file: layer count does not match the plan");
        for (std::size_t k = 0; k < layers.size(); ++k) {
            auto& p = net.mutable_layer(k);
            auto w = layers[k].at("weights").get<std::vector<double>>();
            auto b = layers[k].at("bias").get<std::vector<double>>();
            if (w.size() != p.weights.size() || b.size() != p.bias.size())
                throw DataError("model file: parameter shape mismatch at layer " + std::to_string(k));
            p.weights = std::move(w);
            p.bias = std::move(b);
        }
        Checkpoint cp{{std::move(net), standard_scores_from_json(j.at("standard"))},
                      train_config_from_json(j.value("config", Json::object())),
                      history_from_json(j.value("history", Json::array()))};
        return cp;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
}

void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
    write_text(path, checkpoint_to_json(checkpoint).dump() + "\n");
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": invalid JSON (" + e.what() + ")");
    }
    return checkpoint_from_json(j);
}

namespace {

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

}  // namespace

std::string roc_csv(const RocCurve& curve) {
    std::ostringstream out;
    out << "threshold,fpr,tpr\n";
    for (const auto& p : curve.points) out << fmt(p.threshold) << "," << fmt(p.false_positive_rate) << "," << fmt(p.true_positive_rate) << "\n";
    return out.str();
}

std::string confusion_csv(const AgreementConfusion& c) {
    std::ostringstream out;
    out << "global_label,better,equal,worse,support,unsupported\n";
    for (std::size_t r = 0; r < 3; ++r) {
        out << to_string(static_cast<AgreementLabel>(r));
        for (std::size_t col = 0; col < 3; ++col) out << "," << fmt(c.matrix[r][col]);
        out << "," << (c.counts[r][0] + c.counts[r][1] + c.counts[r][2]) << "," << (c.unsupported[r] ? 1 : 0) << "\n";
    }
    return out.str();
}

std::string sequence_csv(const SequenceScores& s) {
    std::ostringstream out;
    out << "frame_index,raw,normalized\n";
    for (std::size_t i = 0; i < s.raw.size(); ++i) out << i << "," << fmt(s.raw[i]) << "," << fmt(s.normalized[i]) << "\n";
    return out.str();
}

}  // namespace crowdrank::io

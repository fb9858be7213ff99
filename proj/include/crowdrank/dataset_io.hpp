#pragma once

// File formats. Data files are JSON Lines (one object per line; blank lines and
// lines starting with "#schema:" are skipped; unknown fields are ignored with a
// warning on stderr):
//
//   items.jsonl    {"id": s, "feature": [x...] | "image": path, "global_votes": [n1,n2,n3], "split": "train"|"test"}
//   pairs.jsonl    {"first": s, "second": s, "votes": [n(-2), n(-1), n(0), n(+1), n(+2)]}
//   features.jsonl {"id": s, "feature": [x...]}
//   worklist       {"first_id": s, "second_id": s}   (output of sample-pairs)
//   clips.jsonl    {"id": s, "peaks": [k...], "frames": [[x...]...] | ["path"...]}
//
// Image paths are relative to the file that names them. An image tensor file is
// JSON: {"shape": [H, W, C], "data": [...]} in HWC order, values in [0,1].
//
// Models are JSON documents holding the network plan, seed, flat parameter
// arrays, standard scores, the training config and history. Doubles are written
// in shortest round-trip form, so load(save(m)) is bitwise identical.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crowdrank/evaluator.hpp"
#include "crowdrank/rating_data.hpp"
#include "crowdrank/score_net.hpp"
#include "crowdrank/synth_bench.hpp"
#include "crowdrank/trainer.hpp"

namespace crowdrank::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

/// Receives one message per ignored field name. Defaults to stderr.
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);

std::vector<Json> read_jsonl(const fs::path& path);
void write_jsonl(const fs::path& path, const std::vector<Json>& rows);

Tensor read_tensor(const fs::path& path);
void write_tensor(const fs::path& path, const Tensor& tensor);

std::vector<ItemRecord> read_items(const fs::path& path);
/// Image inputs are written as tensor files under <dir of path>/images/.
void write_items(const fs::path& path, const std::vector<ItemRecord>& items);

std::vector<PairRecord> read_pairs(const fs::path& path);
void write_pairs(const fs::path& path, const std::vector<PairRecord>& pairs);

struct FeatureRows {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> vectors;
};
FeatureRows read_features(const fs::path& path);
void write_worklist(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& pairs);

std::vector<AnnotatedClip> read_clips(const fs::path& path);
void write_clips(const fs::path& path, const std::vector<SynthClip>& clips);

/// Latents, embedding and clip ground truth. Never read by training.
void write_latents(const fs::path& path, const SynthDataset& data);

Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j);
Json to_json(const NetworkPlan& plan);
NetworkPlan network_plan_from_json(const Json& j);
Json to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const Json& j);
Json to_json(const StandardScores& standard);
StandardScores standard_scores_from_json(const Json& j);
Json to_json(const std::vector<EpochRecord>& history);
Json to_json(const EvaluationReport& report);
Json to_json(const AgreementConfusion& confusion, double c_g, double c_p);

/// Sections of config.json. Every section and key is optional.
struct RunConfig {
    TrainConfig train;
    std::optional<NetworkPlan> network;
    SynthConfig synth;
    std::uint64_t model_seed = 1;
};
RunConfig read_run_config(const fs::path& path);
RunConfig run_config_from_json(const Json& j);

struct Checkpoint {
    Model model;
    TrainConfig config;
    std::vector<EpochRecord> history;
};
Json checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const Json& j);
void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const fs::path& path);

void write_text(const fs::path& path, const std::string& text);
std::string roc_csv(const RocCurve& curve);
std::string confusion_csv(const AgreementConfusion& confusion);
std::string sequence_csv(const SequenceScores& scores);

}  // namespace crowdrank::io

#include "crowdrank/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "crowdrank/rng.hpp"

namespace crowdrank {

namespace {

struct PairWork {
    LossBundle loss;
    NetworkGradients net_grads;
};

struct PreparedPair {
    std::size_t pair_index;
    const Tensor* first;
    const Tensor* second;
    const RatingDistribution* global_first;
    const RatingDistribution* global_second;
    RatingDistribution relative;
};

PairWork pair_gradients(const Model& model, const PreparedPair& p, Supervision supervision) {
    ForwardCache c1, c2;
    const double s1 = model.network.forward(*p.first, &c1);
    const double s2 = model.network.forward(*p.second, &c2);
    PairWork work;
    work.loss = hybrid_loss({s1, s2}, *p.global_first, *p.global_second, p.relative, model.standard, supervision);
    work.net_grads = model.network.backward(c1, work.loss.grads.d_first);
    accumulate(work.net_grads, model.network.backward(c2, work.loss.grads.d_second));
    return work;
}

void compute_batch(const Model& model, const std::vector<const PreparedPair*>& batch, Supervision supervision,
                   int threads, std::vector<PairWork>& out) {
    out.assign(batch.size(), PairWork{});
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), batch.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < batch.size(); ++i) out[i] = pair_gradients(model, *batch[i], supervision);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < batch.size(); i += workers)
                    out[i] = pair_gradients(model, *batch[i], supervision);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

void TrainConfig::validate() const {
    if (stage1_epochs < 0 || stage2_epochs < 0) throw DataError("train config: epochs must be >= 0");
    if (!(base_lr > 0.0)) throw DataError("train config: base_lr must be > 0");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw DataError("train config: decay_factor must be in (0, 1]");
    if (decay_every < 1) throw DataError("train config: decay_every must be >= 1");
    if (batch_size < 1) throw DataError("train config: batch_size must be >= 1");
    if (threads < 1) throw DataError("train config: threads must be >= 1");
}

double lr_at(int stage, int epoch_in_stage, const TrainConfig& config) {
    if (stage == 1) return config.base_lr;
    if (stage != 2) throw std::invalid_argument("lr_at: stage must be 1 or 2");
    return config.base_lr * std::pow(config.decay_factor, epoch_in_stage / config.decay_every);
}

Model initial_model(const NetworkPlan& plan, std::uint64_t seed) {
    Model model{ScoreNetwork::initialized(plan, seed), StandardScores::initial()};
    const auto& anchors = model.standard.global_anchors;
    const double mid = std::accumulate(anchors.begin(), anchors.end(), 0.0) / static_cast<double>(anchors.size());
    model.network.mutable_layer(plan.layers.size() - 1).bias[0] = mid;
    return model;
}

PairLossSummary mean_pair_loss(const Model& model, const Dataset& dataset, Split split, Supervision supervision) {
    PairLossSummary out;
    for (std::size_t k : dataset.pairs_in(split)) {
        const auto& pair = dataset.pairs()[k];
        const auto& first = dataset.item(pair.first_id);
        const auto& second = dataset.item(pair.second_id);
        const ScorePair scores{model.network.forward(first.input.tensor), model.network.forward(second.input.tensor)};
        const auto loss = hybrid_loss(scores, votes_to_distribution(first.global_votes),
                                      votes_to_distribution(second.global_votes), votes_to_distribution(pair.votes),
                                      model.standard, supervision);
        out.total += loss.total;
        out.global += 0.5 * (loss.global_first + loss.global_second);
        out.relative += loss.relative;
        out.lambda += loss.lambda;
        ++out.pairs;
    }
    if (out.pairs > 0) {
        const double n = static_cast<double>(out.pairs);
        out.total /= n;
        out.global /= n;
        out.relative /= n;
        out.lambda /= n;
    }
    return out;
}

TrainResult train(const Dataset& dataset, Model initial, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    dataset.validate();
    const auto& plan = initial.network.plan();

    for (std::size_t k = 0; k < dataset.pairs().size(); ++k) {
        const auto& pair = dataset.pairs()[k];
        if (dataset.item(pair.first_id).split != Split::Train) continue;
        for (const auto* id : {&pair.first_id, &pair.second_id}) {
            const auto& item = dataset.item(*id);
            if (item.input.kind != plan.input_kind || item.input.tensor.shape != plan.input_shape)
                throw DataError("item '" + item.id + "' input " + item.input.tensor.shape.to_string() +
                                " does not fit the network input " + plan.input_shape.to_string());
        }
    }

    std::unordered_map<std::string, RatingDistribution> global;
    for (const auto& item : dataset.items()) global.emplace(item.id, votes_to_distribution(item.global_votes));
    std::vector<PreparedPair> prepared;
    for (std::size_t k : dataset.pairs_in(Split::Train)) {
        const auto& pair = dataset.pairs()[k];
        prepared.push_back({k, &dataset.item(pair.first_id).input.tensor, &dataset.item(pair.second_id).input.tensor,
                            &global.at(pair.first_id), &global.at(pair.second_id),
                            votes_to_distribution(pair.votes)});
    }

    TrainResult result{std::move(initial), {}};
    Model& model = result.model;
    std::uint64_t global_epoch = 0;
    std::vector<PairWork> work;

    for (int stage = 1; stage <= 2; ++stage) {
        const int epochs = stage == 1 ? config.stage1_epochs : config.stage2_epochs;
        model.network.freeze_backbone(stage == 1);
        for (int epoch = 0; epoch < epochs; ++epoch, ++global_epoch) {
            const double lr = lr_at(stage, epoch, config);
            std::vector<const PreparedPair*> order;
            for (const auto& p : prepared) order.push_back(&p);
            Rng rng(Rng::derive_seed(config.seed, global_epoch));
            rng.shuffle(order);

            EpochRecord record{stage, epoch, lr, 0.0, 0.0, 0.0, 0.0};
            const auto batch = static_cast<std::size_t>(config.batch_size);
            for (std::size_t start = 0; start < order.size(); start += batch) {
                const std::vector<const PreparedPair*> chunk(
                    order.begin() + static_cast<std::ptrdiff_t>(start),
                    order.begin() + static_cast<std::ptrdiff_t>(std::min(start + batch, order.size())));
                compute_batch(model, chunk, config.supervision, config.threads, work);

                const double scale = 1.0 / static_cast<double>(chunk.size());
                NetworkGradients net_grads = model.network.zero_gradients();
                std::vector<double> d_global(model.standard.global_anchors.size(), 0.0);
                std::array<double, 2> d_relative{0.0, 0.0};
                for (std::size_t i = 0; i < chunk.size(); ++i) {
                    const auto& loss = work[i].loss;
                    if (!std::isfinite(loss.total)) {
                        const auto& pair = dataset.pairs()[chunk[i]->pair_index];
                        std::ostringstream msg;
                        msg << "non-finite loss at pair " << chunk[i]->pair_index << " (" << pair.first_id << ", "
                            << pair.second_id << ") in stage " << stage << " epoch " << epoch;
                        throw TrainingError(msg.str());
                    }
                    accumulate(net_grads, work[i].net_grads, scale);
                    for (std::size_t a = 0; a < d_global.size(); ++a) d_global[a] += scale * loss.grads.d_global_anchors[a];
                    for (std::size_t a = 0; a < 2; ++a) d_relative[a] += scale * loss.grads.d_relative_log_gaps[a];
                    record.mean_total += loss.total;
                    record.mean_global += 0.5 * (loss.global_first + loss.global_second);
                    record.mean_relative += loss.relative;
                    record.mean_lambda += loss.lambda;
                }
                model.network.apply_update(net_grads, lr);
                for (std::size_t a = 0; a < d_global.size(); ++a) model.standard.global_anchors[a] -= lr * d_global[a];
                for (std::size_t a = 0; a < 2; ++a) model.standard.relative_log_gaps[a] -= lr * d_relative[a];
            }
            if (!order.empty()) {
                const double n = static_cast<double>(order.size());
                record.mean_total /= n;
                record.mean_global /= n;
                record.mean_relative /= n;
                record.mean_lambda /= n;
            }
            result.history.push_back(record);
            if (on_epoch) on_epoch(record, model);
        }
    }
    model.network.freeze_backbone(false);
    return result;
}

}  // namespace crowdrank

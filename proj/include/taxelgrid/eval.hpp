#pragma once

// Metrics, fold/holdout splitting, and the experiment runner that ties the
// image pipeline, the networks and the baselines together.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "taxelgrid/baselines.hpp"
#include "taxelgrid/dataset.hpp"
#include "taxelgrid/error.hpp"
#include "taxelgrid/json_envelope.hpp"
#include "taxelgrid/nn/model.hpp"
#include "taxelgrid/nn/serialize.hpp"
#include "taxelgrid/nn/train.hpp"
#include "taxelgrid/random.hpp"
#include "taxelgrid/sensor_image.hpp"

namespace taxelgrid {

// ---------------------------------------------------------------------------
// Metrics

/// Positive class is stable.
struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }

    void add(Label predicted, Label truth) {
        if (predicted == Label::stable) (truth == Label::stable ? tp : fp)++;
        else (truth == Label::slippery ? tn : fn)++;
    }

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

inline ConfusionCounts tally(std::span<const Label> predicted, std::span<const Label> truth) {
    if (predicted.size() != truth.size()) throw Error(Errc::shape_mismatch, "prediction and label counts differ");
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) c.add(predicted[i], truth[i]);
    return c;
}

/// Any 0/0 ratio is defined as 0.
inline Metrics metrics(const ConfusionCounts& c) {
    if (c.total() == 0) throw Error(Errc::empty_evaluation, "no samples were evaluated");
    const auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    Metrics m;
    m.accuracy = ratio(c.tp + c.tn, c.total());
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

struct MetricSummary {
    Metrics mean;
    Metrics std;  // population standard deviation across folds
};

inline MetricSummary summarize(std::span<const Metrics> per_fold) {
    MetricSummary s;
    if (per_fold.empty()) return s;
    const double n = static_cast<double>(per_fold.size());
    const auto stat = [&](double Metrics::*field, double& mean, double& sd) {
        double sum = 0.0;
        for (const auto& m : per_fold) sum += m.*field;
        mean = sum / n;
        double ss = 0.0;
        for (const auto& m : per_fold) ss += (m.*field - mean) * (m.*field - mean);
        sd = std::sqrt(ss / n);
    };
    stat(&Metrics::accuracy, s.mean.accuracy, s.std.accuracy);
    stat(&Metrics::precision, s.mean.precision, s.std.precision);
    stat(&Metrics::recall, s.mean.recall, s.std.recall);
    stat(&Metrics::f1, s.mean.f1, s.std.f1);
    return s;
}

// ---------------------------------------------------------------------------
// Splitting

using Folds = std::vector<std::vector<std::size_t>>;

namespace detail {

inline Folds deal(const std::vector<std::size_t>& order, std::size_t k) {
    Folds folds(k);
    for (std::size_t i = 0; i < order.size(); ++i) folds[i % k].push_back(order[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

}  // namespace detail

/// Shuffled folds whose sizes differ by at most one.
inline Folds kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error(Errc::config_invalid, "k must be at least 2");
    if (k > n) throw Error(Errc::k_too_large, "k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    return detail::deal(order, k);
}

/// Like kfold_split, but class proportions match across folds. Each class
/// list is ordered by a shuffled group order (then randomly within a
/// group) and its full rounds are dealt from fold 0, so when a group has as
/// many stable as slippery samples every fold holds out equally many of
/// each. Leftover items continue round-robin across classes, keeping fold
/// sizes within one of each other. Without groups every sample is its own
/// group.
inline Folds stratified_kfold_split(std::span<const Label> labels, std::size_t k, std::uint64_t seed,
                                    std::span<const std::string> groups = {}) {
    const std::size_t n = labels.size();
    if (k < 2) throw Error(Errc::config_invalid, "k must be at least 2");
    if (k > n) throw Error(Errc::k_too_large, "k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
    if (!groups.empty() && groups.size() != n) throw Error(Errc::shape_mismatch, "one group per label is required");
    Rng rng(seed);
    std::vector<std::size_t> group_rank(n);
    if (groups.empty()) {
        std::iota(group_rank.begin(), group_rank.end(), std::size_t{0});
    } else {
        std::vector<std::string> distinct(groups.begin(), groups.end());
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        std::vector<std::size_t> rank(distinct.size());
        std::iota(rank.begin(), rank.end(), std::size_t{0});
        std::shuffle(rank.begin(), rank.end(), rng);
        for (std::size_t i = 0; i < n; ++i) {
            const auto pos = std::lower_bound(distinct.begin(), distinct.end(), groups[i]) - distinct.begin();
            group_rank[i] = rank[static_cast<std::size_t>(pos)];
        }
    }
    if (groups.empty()) std::shuffle(group_rank.begin(), group_rank.end(), rng);

    Folds folds(k);
    std::size_t next = 0;
    for (auto cls : {Label::stable, Label::slippery}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == cls) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        std::stable_sort(members.begin(), members.end(),
                         [&](std::size_t a, std::size_t b) { return group_rank[a] < group_rank[b]; });
        const std::size_t full = members.size() / k * k;
        for (std::size_t r = 0; r < full; ++r) folds[r % k].push_back(members[r]);
        for (std::size_t r = full; r < members.size(); ++r) folds[next++ % k].push_back(members[r]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

struct HoldoutSplit {
    std::vector<std::size_t> known;
    std::vector<std::size_t> unknown;
    std::vector<std::string> unknown_objects;  // sorted
};

/// All samples of n_unknown randomly chosen objects form the unknown set.
inline HoldoutSplit object_holdout_split(std::span<const GraspSample> samples, std::size_t n_unknown,
                                         std::uint64_t seed) {
    std::set<std::string> ids;
    for (const auto& s : samples) ids.insert(s.object_id);
    if (n_unknown > ids.size())
        throw Error(Errc::too_few_objects, "requested " + std::to_string(n_unknown) + " unknown objects but only " +
                                               std::to_string(ids.size()) + " exist");
    std::vector<std::string> objects(ids.begin(), ids.end());
    Rng rng(seed);
    std::shuffle(objects.begin(), objects.end(), rng);
    HoldoutSplit split;
    split.unknown_objects.assign(objects.begin(), objects.begin() + static_cast<std::ptrdiff_t>(n_unknown));
    std::sort(split.unknown_objects.begin(), split.unknown_objects.end());
    const std::set<std::string> held(split.unknown_objects.begin(), split.unknown_objects.end());
    for (std::size_t i = 0; i < samples.size(); ++i)
        (held.count(samples[i].object_id) ? split.unknown : split.known).push_back(i);
    return split;
}

// ---------------------------------------------------------------------------
// Experiment configuration

enum class ModelKind { cnn0, cnn1, cnn2, cnn3, rf, svm, mlp };
enum class Protocol { kfold, holdout };

constexpr std::string_view to_string(ModelKind m) noexcept {
    switch (m) {
        case ModelKind::cnn0: return "cnn0";
        case ModelKind::cnn1: return "cnn1";
        case ModelKind::cnn2: return "cnn2";
        case ModelKind::cnn3: return "cnn3";
        case ModelKind::rf: return "rf";
        case ModelKind::svm: return "svm";
        case ModelKind::mlp: return "mlp";
    }
    return "unknown";
}

constexpr std::string_view to_string(Protocol p) noexcept { return p == Protocol::kfold ? "kfold" : "holdout"; }
constexpr std::string_view to_string(FillStrategy f) noexcept {
    return f == FillStrategy::min_electrode ? "min" : "mean";
}
constexpr std::string_view to_string(Composition c) noexcept {
    switch (c) {
        case Composition::horizontal: return "horizontal";
        case Composition::vertical: return "vertical";
        case Composition::channels: return "channels";
    }
    return "unknown";
}

inline ModelKind parse_model_kind(std::string_view s) {
    const auto l = lowercase(s);
    for (auto m : {ModelKind::cnn0, ModelKind::cnn1, ModelKind::cnn2, ModelKind::cnn3, ModelKind::rf, ModelKind::svm,
                   ModelKind::mlp})
        if (l == to_string(m)) return m;
    throw Error(Errc::config_invalid, "unknown model '" + std::string(s) + "'");
}

inline FillStrategy parse_fill(std::string_view s) {
    const auto l = lowercase(s);
    if (l == "min" || l == "min_electrode") return FillStrategy::min_electrode;
    if (l == "mean" || l == "neighbor_mean") return FillStrategy::neighbor_mean;
    throw Error(Errc::config_invalid, "unknown fill strategy '" + std::string(s) + "'");
}

inline Composition parse_composition(std::string_view s) {
    const auto l = lowercase(s);
    if (l == "h" || l == "horizontal") return Composition::horizontal;
    if (l == "v" || l == "vertical") return Composition::vertical;
    if (l == "c" || l == "channels") return Composition::channels;
    throw Error(Errc::config_invalid, "unknown composition '" + std::string(s) + "'");
}

inline Protocol parse_protocol(std::string_view s) {
    const auto l = lowercase(s);
    if (l == "kfold") return Protocol::kfold;
    if (l == "holdout") return Protocol::holdout;
    throw Error(Errc::config_invalid, "unknown protocol '" + std::string(s) + "'");
}

inline bool is_network(ModelKind m) { return m != ModelKind::rf && m != ModelKind::svm; }
inline bool is_image_model(ModelKind m) {
    return m == ModelKind::cnn0 || m == ModelKind::cnn1 || m == ModelKind::cnn2 || m == ModelKind::cnn3;
}

struct ExperimentConfig {
    std::string dataset;  // path echoed into reports; samples are passed separately
    std::string layout = "d1";
    FillStrategy fill = FillStrategy::neighbor_mean;
    Composition composition = Composition::channels;
    ModelKind model = ModelKind::cnn1;
    Protocol protocol = Protocol::kfold;
    std::size_t k = 10;
    bool stratified = true;
    std::size_t n_unknown = 6;
    std::size_t repetitions = 10;
    bool augment = false;
    std::uint64_t seed = 0;
    std::size_t threads = 0;  // 0: TAXELGRID_THREADS or hardware concurrency
    nn::TrainConfig train;
    double dropout = 0.0;
    double l2_lambda = 0.0;
    ForestConfig forest;
    SvmConfig svm;

    void validate() const {
        if (protocol == Protocol::kfold && k < 2) throw Error(Errc::config_invalid, "k must be at least 2");
        if (protocol == Protocol::holdout && repetitions == 0)
            throw Error(Errc::config_invalid, "repetitions must be positive");
        if (augment && !is_image_model(model))
            throw Error(Errc::config_invalid, "augmentation applies to tactile-image models only");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::config_invalid, "dropout must lie in [0, 1)");
        if (!(l2_lambda >= 0.0)) throw Error(Errc::config_invalid, "l2_lambda must be >= 0");
        train.validate();
        forest.validate();
        svm.validate();
        (void)resolve_layout(layout);
    }
};

inline json config_to_json(const ExperimentConfig& c) {
    return {
        {"dataset", c.dataset},
        {"layout", c.layout},
        {"fill", to_string(c.fill)},
        {"composition", to_string(c.composition)},
        {"model", to_string(c.model)},
        {"protocol", to_string(c.protocol)},
        {"k", c.k},
        {"stratified", c.stratified},
        {"n_unknown", c.n_unknown},
        {"repetitions", c.repetitions},
        {"augment", c.augment},
        {"seed", c.seed},
        {"train",
         {{"epochs", c.train.epochs},
          {"batch_size", c.train.batch_size},
          {"learning_rate", c.train.learning_rate},
          {"optimizer", nn::to_string(c.train.optimizer)},
          {"dropout", c.dropout},
          {"l2_lambda", c.l2_lambda}}},
        {"forest",
         {{"n_trees", c.forest.n_trees},
          {"max_depth", c.forest.max_depth ? json(*c.forest.max_depth) : json(nullptr)},
          {"features_per_split", c.forest.features_per_split}}},
        {"svm", {{"lambda", c.svm.lambda}, {"epochs", c.svm.epochs}}},
    };
}

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw Error(Errc::config_invalid, where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw Error(Errc::config_invalid, "unknown key '" + key + "' in " + where);
    }
}

}  // namespace detail

/// Overlays the keys present in `j` onto `base`; unknown keys and invalid
/// enum values are rejected.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig base = {}) {
    detail::reject_unknown_keys(j, {"dataset", "layout", "fill", "composition", "model", "protocol", "k", "stratified",
                                    "n_unknown", "repetitions", "augment", "seed", "threads", "train", "forest", "svm"},
                                "config");
    try {
        if (j.contains("dataset")) base.dataset = j["dataset"].get<std::string>();
        if (j.contains("layout")) base.layout = j["layout"].get<std::string>();
        if (j.contains("fill")) base.fill = parse_fill(j["fill"].get<std::string>());
        if (j.contains("composition")) base.composition = parse_composition(j["composition"].get<std::string>());
        if (j.contains("model")) base.model = parse_model_kind(j["model"].get<std::string>());
        if (j.contains("protocol")) base.protocol = parse_protocol(j["protocol"].get<std::string>());
        if (j.contains("k")) base.k = j["k"].get<std::size_t>();
        if (j.contains("stratified")) base.stratified = j["stratified"].get<bool>();
        if (j.contains("n_unknown")) base.n_unknown = j["n_unknown"].get<std::size_t>();
        if (j.contains("repetitions")) base.repetitions = j["repetitions"].get<std::size_t>();
        if (j.contains("augment")) base.augment = j["augment"].get<bool>();
        if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("threads")) base.threads = j["threads"].get<std::size_t>();
        if (j.contains("train")) {
            const auto& t = j["train"];
            detail::reject_unknown_keys(t, {"epochs", "batch_size", "learning_rate", "optimizer", "dropout", "l2_lambda"},
                                        "train");
            if (t.contains("epochs")) base.train.epochs = t["epochs"].get<std::size_t>();
            if (t.contains("batch_size")) base.train.batch_size = t["batch_size"].get<std::size_t>();
            if (t.contains("learning_rate")) base.train.learning_rate = t["learning_rate"].get<double>();
            if (t.contains("optimizer")) {
                const auto o = lowercase(t["optimizer"].get<std::string>());
                if (o == "sgd") base.train.optimizer = nn::Optimizer::sgd;
                else if (o == "adam") base.train.optimizer = nn::Optimizer::adam;
                else throw Error(Errc::config_invalid, "unknown optimizer '" + o + "'");
            }
            if (t.contains("dropout")) base.dropout = t["dropout"].get<double>();
            if (t.contains("l2_lambda")) base.l2_lambda = t["l2_lambda"].get<double>();
        }
        if (j.contains("forest")) {
            const auto& f = j["forest"];
            detail::reject_unknown_keys(f, {"n_trees", "max_depth", "features_per_split"}, "forest");
            if (f.contains("n_trees")) base.forest.n_trees = f["n_trees"].get<std::size_t>();
            if (f.contains("max_depth"))
                base.forest.max_depth =
                    f["max_depth"].is_null() ? std::nullopt : std::optional<std::size_t>(f["max_depth"].get<std::size_t>());
            if (f.contains("features_per_split"))
                base.forest.features_per_split = f["features_per_split"].get<std::size_t>();
        }
        if (j.contains("svm")) {
            const auto& s = j["svm"];
            detail::reject_unknown_keys(s, {"lambda", "epochs"}, "svm");
            if (s.contains("lambda")) base.svm.lambda = s["lambda"].get<double>();
            if (s.contains("epochs")) base.svm.epochs = s["epochs"].get<std::size_t>();
        }
    } catch (const json::exception& e) {
        throw Error(Errc::config_invalid, e.what());
    }
    return base;
}

// ---------------------------------------------------------------------------
// Running experiments

/// Worker count: explicit value, else TAXELGRID_THREADS, else hardware concurrency.
inline std::size_t worker_count(std::size_t requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("TAXELGRID_THREADS")) {
        char* end = nullptr;
        const auto v = std::strtoul(env, &end, 10);
        if (end != env && v > 0) return v;
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers; the first
/// exception is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct FoldSeeds {
    std::uint64_t model = 0;
    std::uint64_t shuffle = 0;
    std::uint64_t augment = 0;
};

struct FoldResult {
    std::size_t index = 0;
    FoldSeeds seeds;
    ConfusionCounts confusion;
    Metrics metrics;
    std::map<std::string, std::size_t> train_provenance;
    std::map<std::string, std::size_t> eval_provenance;
    std::size_t train_samples = 0;
    std::size_t eval_samples = 0;
    std::optional<double> final_loss;
    std::vector<nn::EpochStats> epochs;
    std::vector<std::string> eval_objects;  // distinct object ids in the evaluation portion
    json model;                             // saved model document
};

struct ExperimentReport {
    ExperimentConfig config;
    std::uint64_t split_seed = 0;
    std::vector<FoldResult> folds;
    MetricSummary aggregate;
    std::size_t dataset_samples = 0;
    std::vector<std::string> unknown_objects;  // holdout only
    std::size_t known_samples = 0;
    std::size_t unknown_samples = 0;
    std::string input_shape;
    std::string timestamp;
};

namespace detail {

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct PreparedData {
    std::vector<LabeledImage> images;  // tactile images, or 1x72x1 vectors for the MLP
    std::vector<FlatSample> flat;
};

inline PreparedData prepare(std::span<const GraspSample> samples, const ExperimentConfig& cfg) {
    PreparedData d;
    if (is_image_model(cfg.model)) {
        const PipelineConfig pipeline{resolve_layout(cfg.layout), cfg.fill, cfg.composition};
        d.images.reserve(samples.size());
        for (const auto& s : samples) d.images.push_back(preprocess(s, pipeline));
    } else {
        d.flat = to_flat_samples(samples);
        if (cfg.model == ModelKind::mlp) {
            for (std::size_t i = 0; i < samples.size(); ++i)
                d.images.push_back({flat_image(d.flat[i]), samples[i].label, samples[i].object_id,
                                    samples[i].sample_id, Provenance::original});
        }
    }
    return d;
}

inline nn::ModelSpec network_spec(const ExperimentConfig& cfg, const TactileImage& example, std::uint64_t seed) {
    nn::ModelSpec spec = cfg.model == ModelKind::mlp
                             ? mlp_preset()
                             : nn::cnn_preset(to_string(cfg.model), {example.rows, example.cols, example.channels});
    spec = nn::with_regularization(std::move(spec), cfg.dropout, cfg.l2_lambda);
    spec.seed = seed;
    return spec;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& all, std::span<const std::size_t> idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(all[i]);
    return out;
}

/// Trains on `train_idx` (augmented when configured) and evaluates on `eval_idx`.
inline FoldResult run_fold(const PreparedData& data, std::span<const GraspSample> samples,
                           std::span<const std::size_t> train_idx, std::span<const std::size_t> eval_idx,
                           const ExperimentConfig& cfg, std::size_t index, const FoldSeeds& seeds) {
    FoldResult r;
    r.index = index;
    r.seeds = seeds;
    std::vector<Label> truth, predicted;
    std::set<std::string> objects;
    for (auto i : eval_idx) {
        truth.push_back(samples[i].label);
        objects.insert(samples[i].object_id);
    }
    r.eval_objects.assign(objects.begin(), objects.end());

    if (is_network(cfg.model)) {
        auto train_set = gather(data.images, train_idx);
        if (cfg.augment) train_set = augment_dataset(train_set, seeds.augment);
        const auto eval_set = gather(data.images, eval_idx);
        for (const auto& s : train_set) r.train_provenance[std::string(to_string(s.provenance))]++;
        for (const auto& s : eval_set) r.eval_provenance[std::string(to_string(s.provenance))]++;
        r.train_samples = train_set.size();
        r.eval_samples = eval_set.size();
        if (train_set.empty()) throw Error(Errc::empty_dataset, "fold " + std::to_string(index) + " has no training data");
        const auto spec = network_spec(cfg, train_set.front().image, seeds.model);
        nn::TrainConfig tc = cfg.train;
        tc.shuffle_seed = seeds.shuffle;
        auto model = nn::train(spec, train_set, tc, [&](const nn::EpochStats& e) { r.epochs.push_back(e); });
        r.final_loss = model.meta.final_loss;
        std::vector<TactileImage> eval_images;
        for (const auto& s : eval_set) eval_images.push_back(s.image);
        predicted = nn::predict_batch(model, eval_images);
        r.model = nn::model_to_json(model);
    } else {
        auto train_set = gather(data.flat, train_idx);
        r.train_provenance["original"] = train_set.size();
        r.eval_provenance["original"] = eval_idx.size();
        r.train_samples = train_set.size();
        r.eval_samples = eval_idx.size();
        if (cfg.model == ModelKind::rf) {
            ForestConfig fc = cfg.forest;
            fc.bootstrap_seed = seeds.model;
            const auto forest = rf_train(train_set, fc);
            for (auto i : eval_idx) predicted.push_back(rf_predict(forest, data.flat[i].features));
            r.model = forest_to_json(forest);
        } else {
            SvmConfig sc = cfg.svm;
            sc.seed = seeds.model;
            const auto linear = svm_train(train_set, sc);
            for (auto i : eval_idx) predicted.push_back(linear.predict(data.flat[i].features));
            r.final_loss = linear.objective_history.empty() ? std::nullopt
                                                            : std::optional<double>(linear.objective_history.back());
            r.model = linear_to_json(linear);
        }
    }
    r.confusion = tally(predicted, truth);
    r.metrics = metrics(r.confusion);
    return r;
}

}  // namespace detail

/// k-fold: train on k-1 folds and evaluate on the remaining one, for every
/// fold. Holdout: a fixed object split; each repetition reshuffles the
/// known samples, retrains from fresh seeds and evaluates on the unknown
/// objects. Augmentation only ever touches training portions.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, std::span<const GraspSample> samples) {
    cfg.validate();
    if (samples.empty()) throw Error(Errc::empty_dataset, "dataset is empty");
    ExperimentReport report;
    report.config = cfg;
    report.dataset_samples = samples.size();
    report.split_seed = derive_seed(cfg.seed, 0x5eed);
    const auto data = detail::prepare(samples, cfg);
    if (!data.images.empty()) {
        const auto& img = data.images.front().image;
        report.input_shape = nn::to_string(nn::Shape{img.rows, img.cols, img.channels});
    } else {
        report.input_shape = "72";
    }

    struct Job {
        std::vector<std::size_t> train, eval;
        FoldSeeds seeds;
    };
    std::vector<Job> jobs;
    const auto seeds_for = [&](std::size_t i) {
        return FoldSeeds{derive_seed(cfg.seed, 1, i), derive_seed(cfg.seed, 2, i), derive_seed(cfg.seed, 3, i)};
    };

    if (cfg.protocol == Protocol::kfold) {
        std::vector<Label> labels;
        std::vector<std::string> objects;
        for (const auto& s : samples) {
            labels.push_back(s.label);
            objects.push_back(s.object_id);
        }
        const auto folds = cfg.stratified ? stratified_kfold_split(labels, cfg.k, report.split_seed, objects)
                                          : kfold_split(samples.size(), cfg.k, report.split_seed);
        for (std::size_t f = 0; f < folds.size(); ++f) {
            Job job;
            for (std::size_t g = 0; g < folds.size(); ++g)
                if (g != f) job.train.insert(job.train.end(), folds[g].begin(), folds[g].end());
            std::sort(job.train.begin(), job.train.end());
            job.eval = folds[f];
            job.seeds = seeds_for(f);
            jobs.push_back(std::move(job));
        }
    } else {
        const auto split = object_holdout_split(samples, cfg.n_unknown, report.split_seed);
        if (split.unknown.empty()) throw Error(Errc::empty_evaluation, "holdout leaves no unknown samples");
        report.unknown_objects = split.unknown_objects;
        report.known_samples = split.known.size();
        report.unknown_samples = split.unknown.size();
        for (std::size_t r = 0; r < cfg.repetitions; ++r) {
            Job job;
            job.train = split.known;
            Rng rng(derive_seed(cfg.seed, 4, r));
            std::shuffle(job.train.begin(), job.train.end(), rng);
            job.eval = split.unknown;
            job.seeds = seeds_for(r);
            jobs.push_back(std::move(job));
        }
    }

    report.folds.resize(jobs.size());
    parallel_for(jobs.size(), worker_count(cfg.threads), [&](std::size_t i) {
        report.folds[i] = detail::run_fold(data, samples, jobs[i].train, jobs[i].eval, cfg, i, jobs[i].seeds);
    });
    std::vector<Metrics> per_fold;
    for (const auto& f : report.folds) per_fold.push_back(f.metrics);
    report.aggregate = summarize(per_fold);
    report.timestamp = detail::utc_timestamp();
    return report;
}

// ---------------------------------------------------------------------------
// Report output

inline json metrics_to_json(const Metrics& m) {
    return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

/// The report document. `generated_at` is the only field that varies
/// between identical runs; pass include_timestamp=false to omit it.
inline json report_to_json(const ExperimentReport& r, bool include_timestamp = true) {
    json folds = json::array();
    json fold_seeds = json::array();
    for (const auto& f : r.folds) {
        json entry{{"index", f.index},
                   {"confusion", {{"tp", f.confusion.tp}, {"fp", f.confusion.fp}, {"tn", f.confusion.tn}, {"fn", f.confusion.fn}}},
                   {"metrics", metrics_to_json(f.metrics)},
                   {"train_samples", f.train_samples},
                   {"eval_samples", f.eval_samples},
                   {"provenance", {{"train", f.train_provenance}, {"eval", f.eval_provenance}}}};
        if (f.final_loss) entry["final_loss"] = *f.final_loss;
        folds.push_back(std::move(entry));
        fold_seeds.push_back({{"model", f.seeds.model}, {"shuffle", f.seeds.shuffle}, {"augment", f.seeds.augment}});
    }
    json j{{"config", config_to_json(r.config)},
           {"positive_class", "stable"},
           {"std_convention", "population"},
           {"dataset_samples", r.dataset_samples},
           {"input_shape", r.input_shape},
           {"seeds", {{"master", r.config.seed}, {"split", r.split_seed}, {"folds", std::move(fold_seeds)}}},
           {"folds", std::move(folds)},
           {"aggregate", {{"mean", metrics_to_json(r.aggregate.mean)}, {"std", metrics_to_json(r.aggregate.std)}}}};
    if (r.config.protocol == Protocol::holdout) {
        j["holdout"] = {{"unknown_objects", r.unknown_objects},
                        {"known_samples", r.known_samples},
                        {"unknown_samples", r.unknown_samples},
                        {"repetitions", r.folds.size()}};
    }
    if (include_timestamp) j["generated_at"] = r.timestamp;
    return j;
}

inline std::string percent_pm(double mean, double sd) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f±%.1f", 100.0 * mean, 100.0 * sd);
    return buf;
}

/// One table row: model, layout, fill, composition, then Acc/Prec/Rec/F1 in percent.
inline std::string table_row(const ExperimentReport& r) {
    const auto& m = r.aggregate.mean;
    const auto& s = r.aggregate.std;
    std::string row = lowercase(to_string(r.config.model));
    for (auto& ch : row) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    row += " | " + r.config.layout + " | " + std::string(to_string(r.config.fill)) + " | " +
           std::string(to_string(r.config.composition)) + " | Acc " + percent_pm(m.accuracy, s.accuracy) +
           " | Prec " + percent_pm(m.precision, s.precision) + " | Rec " + percent_pm(m.recall, s.recall) +
           " | F1 " + percent_pm(m.f1, s.f1);
    return row;
}

inline std::string csv_summary_header() {
    return "model,layout,fill,composition,protocol,folds,acc_mean,acc_std,prec_mean,prec_std,rec_mean,rec_std,f1_mean,f1_std";
}

inline std::string csv_summary_row(const ExperimentReport& r) {
    const auto& m = r.aggregate.mean;
    const auto& s = r.aggregate.std;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%s,%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f",
                  std::string(to_string(r.config.model)).c_str(), r.config.layout.c_str(),
                  std::string(to_string(r.config.fill)).c_str(), std::string(to_string(r.config.composition)).c_str(),
                  std::string(to_string(r.config.protocol)).c_str(), r.folds.size(), m.accuracy, s.accuracy,
                  m.precision, s.precision, m.recall, s.recall, m.f1, s.f1);
    return buf;
}

/// Writes report.json, summary.csv, one model file per fold and, for
/// networks, one training log per fold into `dir`.
inline void write_report_artifacts(const ExperimentReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text_file((dir / "report.json").string(), report_to_json(r).dump(2) + "\n");
    write_text_file((dir / "summary.csv").string(), csv_summary_header() + "\n" + csv_summary_row(r) + "\n");
    for (const auto& f : r.folds) {
        const auto stem = "fold_" + std::to_string(f.index);
        write_text_file((dir / (stem + ".model.json")).string(), f.model.dump(1));
        if (!f.epochs.empty()) {
            std::ostringstream log;
            log << "epoch,loss,train_acc\n";
            for (const auto& e : f.epochs) nn::write_epoch_line(log, e);
            write_text_file((dir / (stem + ".train.csv")).string(), log.str());
        }
    }
}

}  // namespace taxelgrid

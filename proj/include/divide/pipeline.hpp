#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "divide/cluster.hpp"
#include "divide/dataset.hpp"
#include "divide/mlp.hpp"
#include "divide/rectifier.hpp"

namespace divide {

struct TrainConfig {
    double lr = 2e-3;
    std::size_t batch_size = 1024;
    std::size_t epochs = 200;
    std::size_t rectify_start_epoch = 100;
    double tau = 0.5;
    double sigma = 0.1;
    unsigned walk_steps = 5;
    double alpha = 0.5;
    double momentum = 0.98;  // EMA coefficient m
    std::uint64_t seed = 0;
    std::string strategy = "random_walk";        // random_walk|knn|eps|none
    std::string target_strategy = "self_swap";   // self_swap|self|swap|concat
    std::size_t knn_k = 10;
    double epsilon = 0.5;
    // Ablation toggles; defaults are the full model.
    bool enable_intra = true;
    bool enable_inter = true;
    bool enable_decoder = true;
    bool share_target_encoder = false;
    bool stop_gradient = true;
    std::size_t clusters = 4;
    // Architecture (desk-scale defaults mirror the encoder/decoder shape,
    // not the benchmark widths).
    std::size_t hidden_dim = 1024;
    std::size_t embed_dim = 128;
    std::size_t decoder_hidden_dim = 512;
    std::size_t encoder_layers = 4;
    double eta = 0.0;  // missing rate applied by the CLI before training

    void validate() const;
    RectifierConfig rectifier() const;
    std::string to_text() const;  // flat key = value, round-trips via parse
    static TrainConfig parse_file(const std::string& path);
    static TrainConfig parse_text(const std::string& text, const std::string& origin);
};

/// Per-view online/target encoders plus pairwise cross-view decoders and
/// their optimizer state. Owned by a single training loop.
struct NetworkStack {
    std::vector<Mlp> online, target;           // per view; target empty when shared
    std::vector<AdamState> online_opt;
    std::vector<std::vector<Mlp>> decoders;    // [v][u], unused diagonal
    std::vector<std::vector<AdamState>> decoder_opt;
    bool share_target = false;
    std::int64_t step = 0;
    std::size_t epoch = 0;

    std::size_t view_count() const { return online.size(); }
    const Mlp& target_net(std::size_t v) const { return share_target ? online[v] : target[v]; }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double total = 0.0;
    std::vector<double> intra;               // per view
    std::vector<double> inter;               // flattened ordered pairs (v,u), v != u
    double kl = -1.0;                        // mean KL-to-oracle, < 0 = absent
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    void write_csv(const std::string& path, std::size_t views) const;
};

NetworkStack build_stack(const TrainConfig& cfg, const std::vector<std::size_t>& view_dims);

/// Shuffled index batches for one epoch; a final batch smaller than 2 is
/// dropped (batchnorm needs at least two rows).
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, std::size_t epoch);

/// Decoder imputation for one batch: rows missing view u are filled with
/// g^(v->u) applied to the target-branch embedding of the first observed
/// view v. Returns the full n x embed matrix for view u.
Matrix impute_view(const NetworkStack& stack, const std::vector<Matrix>& zk_present,
                   const std::vector<std::vector<bool>>& present, std::size_t u);

/// Full training run. Resumes from the stack's recorded epoch when
/// `resume` is set, otherwise builds a fresh stack.
NetworkStack train(const TrainConfig& cfg, const MultiViewDataset& ds, TrainHistory& history,
                   std::optional<NetworkStack> resume = std::nullopt);

/// Eval-mode target-branch embeddings per view (imputed where missing),
/// concatenated columnwise in view order.
Matrix extract_embeddings(const NetworkStack& stack, const MultiViewDataset& ds);

void save_checkpoint(const std::string& path, const NetworkStack& stack, const TrainConfig& cfg);
struct Checkpoint {
    NetworkStack stack;
    TrainConfig config;
};
Checkpoint load_checkpoint(const std::string& path);

ClusteringReport evaluate(const NetworkStack& stack, const MultiViewDataset& ds,
                          std::size_t clusters, std::uint64_t seed);

/// Mean KL-to-oracle of the configured rectifier's intra targets over the
/// batches of one deterministic epoch. Requires labels.
double rectification_kl(const NetworkStack& stack, const MultiViewDataset& ds,
                        const TrainConfig& cfg, const RectifierConfig& rcfg);

}  // namespace divide

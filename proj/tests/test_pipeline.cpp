#include <cstdio>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "divide/pipeline.hpp"

using namespace divide;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch_size = 20;
    cfg.epochs = 3;
    cfg.rectify_start_epoch = 2;
    cfg.hidden_dim = 16;
    cfg.embed_dim = 8;
    cfg.decoder_hidden_dim = 8;
    cfg.encoder_layers = 2;
    cfg.clusters = 4;
    cfg.seed = 5;
    return cfg;
}

MultiViewDataset tiny_dataset(std::uint64_t seed = 2) {
    SyntheticSpec spec;
    spec.n = 40;
    spec.clusters = 4;
    spec.view_dims = {5, 6};
    spec.seed = seed;
    return generate_synthetic(spec);
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("config text round trip and validation") {
    TrainConfig cfg = tiny_config();
    cfg.strategy = "knn";
    cfg.target_strategy = "concat";
    cfg.share_target_encoder = true;
    cfg.stop_gradient = false;
    cfg.eta = 0.25;
    const TrainConfig back = TrainConfig::parse_text(cfg.to_text(), "roundtrip");
    CHECK(back.to_text() == cfg.to_text());
    CHECK(back.strategy == "knn");
    CHECK(back.eta == 0.25);
    CHECK(back.stop_gradient == false);

    CHECK_THROWS_AS(TrainConfig::parse_text("nonsense_key = 1\n", "t"), ConfigError);

    TrainConfig bad = tiny_config();
    bad.stop_gradient = false;  // only legal with a shared target encoder
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    TrainConfig none = tiny_config();
    none.enable_intra = false;
    none.enable_inter = false;
    CHECK_THROWS_AS(none.validate(), ConfigError);

    TrainConfig badstrat = tiny_config();
    badstrat.strategy = "bogus";
    CHECK_THROWS_AS(badstrat.validate(), ConfigError);
}

TEST_CASE("batches cover the data and drop sub-batchnorm leftovers") {
    const auto batches = make_batches(5, 2, 7, 0);
    REQUIRE(batches.size() == 2);  // the trailing single sample is dropped
    CHECK(batches[0].size() == 2);
    CHECK(batches[1].size() == 2);
    std::vector<bool> seen(5, false);
    for (const auto& b : batches)
        for (std::size_t i : b) {
            CHECK(!seen[i]);
            seen[i] = true;
        }

    // deterministic per (seed, epoch), distinct across epochs
    CHECK(make_batches(64, 16, 3, 1) == make_batches(64, 16, 3, 1));
    CHECK(make_batches(64, 16, 3, 1) != make_batches(64, 16, 3, 2));
    CHECK(make_batches(64, 16, 3, 1) != make_batches(64, 16, 4, 1));
}

TEST_CASE("build_stack shapes follow the config") {
    const TrainConfig cfg = tiny_config();
    const NetworkStack stack = build_stack(cfg, {5, 6});
    REQUIRE(stack.view_count() == 2);
    CHECK(stack.online[0].input_dim() == 5);
    CHECK(stack.online[1].input_dim() == 6);
    CHECK(stack.online[0].output_dim() == 8);
    CHECK(stack.target.size() == 2);
    // target starts as an exact copy of online
    CHECK(stack.target[0].layers[0].w.data() == stack.online[0].layers[0].w.data());
    CHECK(stack.decoders[0][1].input_dim() == 8);
    CHECK(stack.decoders[0][1].output_dim() == 8);

    TrainConfig shared = cfg;
    shared.share_target_encoder = true;
    const NetworkStack s2 = build_stack(shared, {5, 6});
    CHECK(s2.target.empty());
    CHECK(&s2.target_net(0) == &s2.online[0]);
}

TEST_CASE("training runs, records history, and is deterministic") {
    const TrainConfig cfg = tiny_config();
    const MultiViewDataset ds = tiny_dataset();
    TrainHistory h1, h2;
    const NetworkStack s1 = train(cfg, ds, h1);
    const NetworkStack s2 = train(cfg, ds, h2);

    REQUIRE(h1.epochs.size() == 3);
    for (const auto& e : h1.epochs) {
        CHECK(std::isfinite(e.total));
        CHECK(e.intra.size() == 2);
        CHECK(e.inter.size() == 2);  // ordered pairs (0,1) and (1,0)
        CHECK(e.kl >= 0.0);          // labeled data: diagnostic present
    }
    CHECK(s1.step == s2.step);
    CHECK(s1.epoch == 3);
    for (std::size_t e = 0; e < h1.epochs.size(); ++e) {
        CHECK(h1.epochs[e].total == h2.epochs[e].total);
        CHECK(h1.epochs[e].intra == h2.epochs[e].intra);
        CHECK(h1.epochs[e].inter == h2.epochs[e].inter);
    }
    const Matrix e1 = extract_embeddings(s1, ds);
    const Matrix e2 = extract_embeddings(s2, ds);
    CHECK(e1.data() == e2.data());
    CHECK(e1.rows() == 40);
    CHECK(e1.cols() == 16);  // two views, embed 8 each, concatenated

    // epochs = 0 leaves the stack untrained but usable
    TrainConfig zero = cfg;
    zero.epochs = 0;
    zero.rectify_start_epoch = 0;
    TrainHistory hz;
    const NetworkStack sz = train(zero, ds, hz);
    CHECK(hz.epochs.empty());
    CHECK(sz.step == 0);
}

TEST_CASE("history csv has one row per epoch") {
    TempDir dir("divide_pipeline_history");
    const TrainConfig cfg = tiny_config();
    const MultiViewDataset ds = tiny_dataset();
    TrainHistory h;
    train(cfg, ds, h);
    const std::string path = (dir.path / "history.csv").string();
    h.write_csv(path, 2);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    CHECK(line.rfind("epoch,total,", 0) == 0);
    int rows = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
}

TEST_CASE("checkpoint round trip, resume equivalence, and corruption errors") {
    TempDir dir("divide_pipeline_ckpt");
    const MultiViewDataset ds = tiny_dataset();
    TrainConfig cfg = tiny_config();
    cfg.epochs = 4;

    // uninterrupted reference run
    TrainHistory h_full;
    const NetworkStack full = train(cfg, ds, h_full);

    // run half, checkpoint, reload, resume to the end
    TrainConfig half = cfg;
    half.epochs = 2;
    TrainHistory h_half;
    const NetworkStack mid = train(half, ds, h_half);
    const std::string path = (dir.path / "ckpt.bin").string();
    save_checkpoint(path, mid, cfg);

    const Checkpoint ck = load_checkpoint(path);
    CHECK(ck.stack.epoch == 2);
    CHECK(ck.config.to_text() == cfg.to_text());
    const Matrix m1 = extract_embeddings(mid, ds);
    const Matrix m2 = extract_embeddings(ck.stack, ds);
    CHECK(m1.data() == m2.data());

    TrainHistory h_resumed;
    const NetworkStack resumed = train(cfg, ds, h_resumed, ck.stack);
    CHECK(h_resumed.epochs.size() == 2);  // epochs 2 and 3 only
    const Matrix ef = extract_embeddings(full, ds);
    const Matrix er = extract_embeddings(resumed, ds);
    CHECK(ef.data() == er.data());
    CHECK(h_resumed.epochs.back().total == h_full.epochs.back().total);

    // truncation is detected
    std::ifstream in(path, std::ios::binary);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const std::string cut = (dir.path / "cut.bin").string();
    std::ofstream out(cut, std::ios::binary);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(cut), DataError);
    const std::string junk = (dir.path / "junk.bin").string();
    std::ofstream jo(junk, std::ios::binary);
    jo << "not a checkpoint";
    jo.close();
    CHECK_THROWS_AS(load_checkpoint(junk), DataError);
}

TEST_CASE("training with missing views imputes and stays finite") {
    TrainConfig cfg = tiny_config();
    const MultiViewDataset ds = simulate_missing(tiny_dataset(), 0.3, 9);
    TrainHistory h;
    const NetworkStack stack = train(cfg, ds, h);
    const Matrix emb = extract_embeddings(stack, ds);
    check_finite(emb, "embeddings");
    CHECK(emb.rows() == 40);

    const ClusteringReport report = evaluate(stack, ds, 4, 0);
    CHECK(report.acc >= 0.0);
    CHECK(report.acc <= 1.0);
    CHECK(report.nmi >= 0.0);
    CHECK(report.ari >= -1.0);
    CHECK(report.eta == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(report.clusters == 4);
}

TEST_CASE("ablation configurations produce distinct loss breakdowns") {
    const MultiViewDataset ds = tiny_dataset();

    TrainConfig intra_only = tiny_config();
    intra_only.enable_inter = false;
    intra_only.strategy = "none";
    TrainHistory hi;
    train(intra_only, ds, hi);
    for (double x : hi.epochs.back().inter) CHECK(x == 0.0);
    CHECK(hi.epochs.back().intra[0] > 0.0);

    TrainConfig inter_only = tiny_config();
    inter_only.enable_intra = false;
    inter_only.enable_decoder = false;
    inter_only.strategy = "none";
    TrainHistory hj;
    train(inter_only, ds, hj);
    for (double x : hj.epochs.back().intra) CHECK(x == 0.0);
    CHECK(hj.epochs.back().inter[0] > 0.0);

    TrainConfig shared = tiny_config();
    shared.share_target_encoder = true;
    shared.stop_gradient = false;
    TrainHistory hs;
    const NetworkStack ss = train(shared, ds, hs);
    CHECK(ss.target.empty());
    CHECK(std::isfinite(hs.epochs.back().total));
}

TEST_CASE("rectification kl diagnostic is finite and labeled-only") {
    TrainConfig cfg = tiny_config();
    const MultiViewDataset ds = tiny_dataset();
    TrainHistory h;
    const NetworkStack stack = train(cfg, ds, h);
    const double kl_rw = rectification_kl(stack, ds, cfg, cfg.rectifier());
    CHECK(std::isfinite(kl_rw));
    CHECK(kl_rw >= 0.0);

    RectifierConfig none = cfg.rectifier();
    none.strategy = RectifyStrategy::none;
    const double kl_id = rectification_kl(stack, ds, cfg, none);
    CHECK(std::isfinite(kl_id));

    MultiViewDataset unlabeled = ds;
    unlabeled.labels.clear();
    CHECK_THROWS_AS(rectification_kl(stack, unlabeled, cfg, cfg.rectifier()), DataError);
    CHECK_THROWS_AS(evaluate(stack, unlabeled, 4, 0), DataError);
}

TEST_SUITE_END();

// Command-line surface for dataset generation, training, evaluation, and
// the rectifier/missing-view benchmark tables.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "divide/cluster.hpp"
#include "divide/dataset.hpp"
#include "divide/pipeline.hpp"
#include "divide/rectifier.hpp"

namespace fs = std::filesystem;
using namespace divide;

namespace {

int thread_count() {
    const char* env = std::getenv("DIVIDE_THREADS");
    if (!env) return 1;
    try {
        return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
        return 1;
    }
}

/// Every run leaves its resolved configuration next to its outputs.
void write_run_record(const fs::path& where, const std::string& command, const std::string& body) {
    std::ofstream os(where);
    os << "# divide run record\n"
       << "command = " << command << "\n"
       << "threads = " << thread_count() << "\n"
       << body;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

MultiViewDataset load_with_missing(const std::string& dir, const TrainConfig& cfg) {
    MultiViewDataset ds = load_dataset(dir);
    if (cfg.eta > 0.0) {
        if (!ds.all_present())
            throw DataError("config requests eta > 0 but the dataset already has missing views");
        ds = simulate_missing(ds, cfg.eta, cfg.seed);
    }
    return ds;
}

/// min(batch, (1 - eta) * n) keeps batches no larger than the complete part.
void apply_batch_rule(TrainConfig& cfg, std::size_t n) {
    if (cfg.eta > 0.0) {
        const auto cap = static_cast<std::size_t>(
            std::llround((1.0 - cfg.eta) * static_cast<double>(n)));
        cfg.batch_size = std::min(cfg.batch_size, std::max<std::size_t>(2, cap));
    }
}

Matrix append_pca2(const Matrix& emb) {
    const std::size_t n = emb.rows(), d = emb.cols();
    Matrix centered = emb;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += centered(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) centered(i, j) -= mean;
    }
    // Top-2 principal directions by power iteration with deflation.
    Matrix proj(n, 2);
    std::vector<std::vector<double>> dirs;
    for (int comp = 0; comp < 2; ++comp) {
        std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
        for (int iter = 0; iter < 200; ++iter) {
            std::vector<double> xv(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) xv[i] += centered(i, j) * v[j];
            std::vector<double> next(d, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) next[j] += centered(i, j) * xv[i];
            for (const auto& prev : dirs) {
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += next[j] * prev[j];
                for (std::size_t j = 0; j < d; ++j) next[j] -= dot * prev[j];
            }
            double norm = 0.0;
            for (double x : next) norm += x * x;
            norm = std::sqrt(norm);
            if (norm < 1e-300) break;
            for (std::size_t j = 0; j < d; ++j) v[j] = next[j] / norm;
        }
        dirs.push_back(v);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += centered(i, j) * v[j];
            proj(i, static_cast<std::size_t>(comp)) = s;
        }
    }
    return hconcat(emb, proj);
}

void export_rectifier_diagnostics(const fs::path& out_dir, const NetworkStack& stack,
                                  const MultiViewDataset& ds, const TrainConfig& cfg) {
    const auto rcfg = cfg.rectifier();
    const auto batches = make_batches(ds.samples(), std::min(cfg.batch_size, ds.samples()),
                                      cfg.seed, 0);
    if (batches.empty()) return;
    const auto& batch = batches.front();
    for (std::size_t v = 0; v < ds.view_count(); ++v) {
        std::vector<std::size_t> rows;
        for (std::size_t i : batch)
            if (ds.is_present(i, v)) rows.push_back(i);
        Matrix x(rows.size(), ds.views[v].cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            std::copy(ds.views[v].row_ptr(rows[i]), ds.views[v].row_ptr(rows[i]) + x.cols(),
                      x.row_ptr(i));
        const Matrix z = mlp_forward_const(stack.target_net(v), x);
        const auto tm = transition_matrix(affinity_graph(z, cfg.sigma));
        write_matrix_csv((out_dir / ("transition_t" + std::to_string(cfg.walk_steps) + "_v" +
                                     std::to_string(v) + ".csv"))
                             .string(),
                         matrix_power(tm.m, cfg.walk_steps));
        write_matrix_csv((out_dir / ("target_v" + std::to_string(v) + ".csv")).string(),
                         random_walk_target(z, cfg.sigma, cfg.walk_steps, cfg.alpha));
    }
}

int run(int argc, char** argv) {
    CLI::App app{"DIVIDE multi-view clustering engine"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Synthesize a multi-view dataset");
    std::string gen_spec, gen_out;
    gen->add_option("--spec", gen_spec, "Synthetic spec file (key = value)")->required();
    gen->add_option("--out", gen_out, "Output dataset directory")->required();

    // train
    auto* tr = app.add_subcommand("train", "Train a model");
    std::string tr_config, tr_data, tr_out;
    bool tr_diag = false;
    tr->add_option("--config", tr_config, "Training config file")->required();
    tr->add_option("--data", tr_data, "Dataset directory")->required();
    tr->add_option("--out", tr_out, "Output directory")->required();
    tr->add_flag("--export-diagnostics", tr_diag,
                 "Also write transition-matrix and target CSVs for the first batch");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string ev_ckpt, ev_data, ev_out, ev_append;
    std::size_t ev_clusters = 0;
    std::uint64_t ev_seed = 0;
    ev->add_option("--checkpoint", ev_ckpt)->required();
    ev->add_option("--data", ev_data)->required();
    ev->add_option("--clusters", ev_clusters)->required();
    ev->add_option("--seed", ev_seed)->required();
    ev->add_option("--out", ev_out, "Report JSON path (default: stdout only)");
    ev->add_option("--append", ev_append, "Append a row to this results CSV");

    // rectify-bench
    auto* rb = app.add_subcommand("rectify-bench",
                                  "Per-strategy ACC and KL table from a warm-started checkpoint");
    std::string rb_ckpt, rb_data, rb_strategies = "rw,knn,eps,none", rb_out;
    std::size_t rb_epochs = 10, rb_clusters = 0;
    std::uint64_t rb_seed = 0;
    rb->add_option("--checkpoint", rb_ckpt)->required();
    rb->add_option("--data", rb_data)->required();
    rb->add_option("--strategies", rb_strategies, "Comma list from rw,knn,eps,none");
    rb->add_option("--out", rb_out)->required();
    rb->add_option("--epochs", rb_epochs, "Fine-tune epochs per strategy");
    rb->add_option("--clusters", rb_clusters, "Cluster count (default: from checkpoint config)");
    rb->add_option("--seed", rb_seed, "k-means seed");

    // missing-sweep
    auto* ms = app.add_subcommand("missing-sweep", "ACC/NMI/ARI vs missing rate, mean over seeds");
    std::string ms_config, ms_data, ms_etas = "0,0.1,0.3,0.5,0.7,0.9", ms_out;
    std::size_t ms_seeds = 5;
    ms->add_option("--config", ms_config)->required();
    ms->add_option("--data", ms_data)->required();
    ms->add_option("--etas", ms_etas, "Comma list of missing rates in [0,1)");
    ms->add_option("--seeds", ms_seeds, "Number of seeds per eta");
    ms->add_option("--out", ms_out)->required();

    // export-embeddings
    auto* ex = app.add_subcommand("export-embeddings", "Concatenated embeddings as CSV");
    std::string ex_ckpt, ex_data, ex_out;
    bool ex_pca2 = false;
    ex->add_option("--checkpoint", ex_ckpt)->required();
    ex->add_option("--data", ex_data)->required();
    ex->add_option("--out", ex_out)->required();
    ex->add_flag("--pca2", ex_pca2, "Append a 2-D PCA projection");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (gen->parsed()) {
        const SyntheticSpec spec = load_synthetic_spec(gen_spec);
        const MultiViewDataset ds = generate_synthetic(spec);
        save_dataset(gen_out, ds);
        std::ostringstream body;
        body << "spec_file = " << gen_spec << "\nseed = " << spec.seed << "\nn = " << spec.n
             << "\nclusters = " << spec.clusters << "\n";
        write_run_record(fs::path(gen_out) / "run_record.txt", "generate", body.str());
        std::cout << "wrote dataset with n=" << ds.samples() << " V=" << ds.view_count() << " to "
                  << gen_out << "\n";
        return 0;
    }

    if (tr->parsed()) {
        TrainConfig cfg = TrainConfig::parse_file(tr_config);
        MultiViewDataset ds = load_with_missing(tr_data, cfg);
        apply_batch_rule(cfg, ds.samples());
        fs::create_directories(tr_out);
        TrainHistory history;
        const NetworkStack stack = train(cfg, ds, history);
        save_checkpoint((fs::path(tr_out) / "checkpoint.bin").string(), stack, cfg);
        history.write_csv((fs::path(tr_out) / "history.csv").string(), ds.view_count());
        if (tr_diag) export_rectifier_diagnostics(tr_out, stack, ds, cfg);
        write_run_record(fs::path(tr_out) / "run_record.txt", "train",
                         "data = " + tr_data + "\n" + cfg.to_text());
        std::cout << "trained " << cfg.epochs << " epochs; checkpoint in " << tr_out << "\n";
        return 0;
    }

    if (ev->parsed()) {
        const Checkpoint ck = load_checkpoint(ev_ckpt);
        const MultiViewDataset ds = load_dataset(ev_data);
        ClusteringReport report = evaluate(ck.stack, ds, ev_clusters, ev_seed);
        report.setting = "eval";
        std::cout << report.to_json() << "\n";
        if (!ev_out.empty()) {
            std::ofstream os(ev_out);
            os << report.to_json() << "\n";
            write_run_record(ev_out + ".run.txt", "eval",
                             "checkpoint = " + ev_ckpt + "\ndata = " + ev_data + "\nseed = " +
                                 std::to_string(ev_seed) + "\n");
        }
        if (!ev_append.empty()) report.append_csv(ev_append);
        return 0;
    }

    if (rb->parsed()) {
        const Checkpoint ck = load_checkpoint(rb_ckpt);
        MultiViewDataset ds = load_with_missing(rb_data, ck.config);
        if (!ds.has_labels()) throw DataError("rectify-bench needs a labeled dataset");
        const std::size_t clusters =
            rb_clusters > 0 ? rb_clusters : ck.config.clusters;
        std::ofstream os(rb_out);
        if (!os) throw DataError("cannot open " + rb_out);
        os << "strategy,acc,nmi,ari,kl\n";
        for (const std::string& name : split_list(rb_strategies)) {
            TrainConfig cfg = ck.config;
            cfg.strategy = to_string(parse_strategy(name));
            cfg.rectify_start_epoch = ck.stack.epoch;
            cfg.epochs = ck.stack.epoch + rb_epochs;
            apply_batch_rule(cfg, ds.samples());
            TrainHistory history;
            NetworkStack stack = train(cfg, ds, history, ck.stack);
            ClusteringReport report = evaluate(stack, ds, clusters, rb_seed);
            RectifierConfig rcfg = cfg.rectifier();
            if (rcfg.strategy == RectifyStrategy::none) {
                // KL of the unrectified identity target.
                rcfg.strategy = RectifyStrategy::random_walk;
                rcfg.steps = 0;
                rcfg.alpha = 1.0;
            }
            const double kl = rectification_kl(stack, ds, cfg, rcfg);
            os << cfg.strategy << "," << report.acc << "," << report.nmi << "," << report.ari << ","
               << kl << "\n";
            std::cout << cfg.strategy << ": acc=" << report.acc << " kl=" << kl << "\n";
        }
        write_run_record(rb_out + ".run.txt", "rectify-bench",
                         "checkpoint = " + rb_ckpt + "\nstrategies = " + rb_strategies +
                             "\nepochs = " + std::to_string(rb_epochs) + "\n" + ck.config.to_text());
        return 0;
    }

    if (ms->parsed()) {
        const TrainConfig base = TrainConfig::parse_file(ms_config);
        const MultiViewDataset complete = load_dataset(ms_data);
        if (!complete.all_present())
            throw DataError("missing-sweep needs a complete dataset to mask");
        std::ofstream os(ms_out);
        if (!os) throw DataError("cannot open " + ms_out);
        os << "eta,acc_mean,acc_std,nmi_mean,nmi_std,ari_mean,ari_std\n";
        for (const std::string& eta_str : split_list(ms_etas)) {
            const double eta = std::stod(eta_str);
            std::vector<double> accs, nmis, aris;
            for (std::size_t s = 0; s < ms_seeds; ++s) {
                TrainConfig cfg = base;
                cfg.seed = base.seed + s;
                cfg.eta = eta;
                MultiViewDataset ds =
                    eta > 0.0 ? simulate_missing(complete, eta, cfg.seed) : complete;
                apply_batch_rule(cfg, ds.samples());
                TrainHistory history;
                const NetworkStack stack = train(cfg, ds, history);
                const ClusteringReport report = evaluate(stack, ds, cfg.clusters, cfg.seed);
                accs.push_back(report.acc);
                nmis.push_back(report.nmi);
                aris.push_back(report.ari);
            }
            auto mean_std = [](const std::vector<double>& v) {
                double m = 0.0;
                for (double x : v) m += x;
                m /= static_cast<double>(v.size());
                double var = 0.0;
                for (double x : v) var += (x - m) * (x - m);
                var /= static_cast<double>(v.size());
                return std::pair<double, double>(m, std::sqrt(var));
            };
            const auto [am, as] = mean_std(accs);
            const auto [nm, ns] = mean_std(nmis);
            const auto [rm, rs] = mean_std(aris);
            os << eta << "," << am << "," << as << "," << nm << "," << ns << "," << rm << "," << rs
               << "\n";
            std::cout << "eta=" << eta << " acc=" << am << "+-" << as << "\n";
        }
        write_run_record(ms_out + ".run.txt", "missing-sweep",
                         "etas = " + ms_etas + "\nseeds = " + std::to_string(ms_seeds) + "\n" +
                             base.to_text());
        return 0;
    }

    if (ex->parsed()) {
        const Checkpoint ck = load_checkpoint(ex_ckpt);
        const MultiViewDataset ds = load_dataset(ex_data);
        Matrix emb = extract_embeddings(ck.stack, ds);
        if (ex_pca2) emb = append_pca2(emb);
        write_matrix_file(ex_out, emb);
        write_run_record(ex_out + ".run.txt", "export-embeddings",
                         "checkpoint = " + ex_ckpt + "\ndata = " + ex_data + "\npca2 = " +
                             (ex_pca2 ? "true" : "false") + "\n");
        std::cout << "wrote " << emb.rows() << "x" << emb.cols() << " embeddings to " << ex_out
                  << "\n";
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const InvalidParameterError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ShapeError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

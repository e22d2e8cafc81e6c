#include "divide/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "divide/contrastive.hpp"

namespace divide {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (rectify_start_epoch > epochs)
        throw ConfigError("rectify_start_epoch must be at most epochs");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must be in [0,1]");
    if (!(momentum > 0.0 && momentum <= 1.0)) throw ConfigError("momentum must be in (0,1]");
    if (!(eta >= 0.0 && eta < 1.0)) throw ConfigError("eta must be in [0,1)");
    if (clusters < 1) throw ConfigError("clusters must be positive");
    if (hidden_dim == 0 || embed_dim == 0 || decoder_hidden_dim == 0 || encoder_layers == 0)
        throw ConfigError("network dimensions must be positive");
    if (!enable_intra && !enable_inter)
        throw ConfigError("at least one of enable_intra/enable_inter must be set");
    if (!stop_gradient && !share_target_encoder)
        throw ConfigError("stop_gradient can only be disabled with a shared target encoder");
    parse_strategy(strategy);
    parse_scheme(target_strategy);
}

RectifierConfig TrainConfig::rectifier() const {
    RectifierConfig r;
    r.strategy = parse_strategy(strategy);
    r.steps = walk_steps;
    r.alpha = alpha;
    r.sigma = sigma;
    r.k = knn_k;
    r.epsilon = epsilon;
    r.scheme = parse_scheme(target_strategy);
    return r;
}

std::string TrainConfig::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "lr = " << lr << "\n"
       << "batch_size = " << batch_size << "\n"
       << "epochs = " << epochs << "\n"
       << "rectify_start_epoch = " << rectify_start_epoch << "\n"
       << "tau = " << tau << "\n"
       << "sigma = " << sigma << "\n"
       << "walk_steps = " << walk_steps << "\n"
       << "alpha = " << alpha << "\n"
       << "momentum = " << momentum << "\n"
       << "seed = " << seed << "\n"
       << "strategy = " << strategy << "\n"
       << "target_strategy = " << target_strategy << "\n"
       << "knn_k = " << knn_k << "\n"
       << "epsilon = " << epsilon << "\n"
       << "enable_intra = " << (enable_intra ? "true" : "false") << "\n"
       << "enable_inter = " << (enable_inter ? "true" : "false") << "\n"
       << "enable_decoder = " << (enable_decoder ? "true" : "false") << "\n"
       << "share_target_encoder = " << (share_target_encoder ? "true" : "false") << "\n"
       << "stop_gradient = " << (stop_gradient ? "true" : "false") << "\n"
       << "clusters = " << clusters << "\n"
       << "hidden_dim = " << hidden_dim << "\n"
       << "embed_dim = " << embed_dim << "\n"
       << "decoder_hidden_dim = " << decoder_hidden_dim << "\n"
       << "encoder_layers = " << encoder_layers << "\n"
       << "eta = " << eta << "\n";
    return os.str();
}

TrainConfig TrainConfig::parse_text(const std::string& text, const std::string& origin) {
    TrainConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    auto parse_bool = [&](const std::string& v) {
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected true/false, got " + v);
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "lr") cfg.lr = std::stod(val);
            else if (key == "batch_size") cfg.batch_size = std::stoul(val);
            else if (key == "epochs") cfg.epochs = std::stoul(val);
            else if (key == "rectify_start_epoch") cfg.rectify_start_epoch = std::stoul(val);
            else if (key == "tau") cfg.tau = std::stod(val);
            else if (key == "sigma") cfg.sigma = std::stod(val);
            else if (key == "walk_steps") cfg.walk_steps = static_cast<unsigned>(std::stoul(val));
            else if (key == "alpha") cfg.alpha = std::stod(val);
            else if (key == "momentum") cfg.momentum = std::stod(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "strategy") cfg.strategy = val;
            else if (key == "target_strategy") cfg.target_strategy = val;
            else if (key == "knn_k") cfg.knn_k = std::stoul(val);
            else if (key == "epsilon") cfg.epsilon = std::stod(val);
            else if (key == "enable_intra") cfg.enable_intra = parse_bool(val);
            else if (key == "enable_inter") cfg.enable_inter = parse_bool(val);
            else if (key == "enable_decoder") cfg.enable_decoder = parse_bool(val);
            else if (key == "share_target_encoder") cfg.share_target_encoder = parse_bool(val);
            else if (key == "stop_gradient") cfg.stop_gradient = parse_bool(val);
            else if (key == "clusters") cfg.clusters = std::stoul(val);
            else if (key == "hidden_dim") cfg.hidden_dim = std::stoul(val);
            else if (key == "embed_dim") cfg.embed_dim = std::stoul(val);
            else if (key == "decoder_hidden_dim") cfg.decoder_hidden_dim = std::stoul(val);
            else if (key == "encoder_layers") cfg.encoder_layers = std::stoul(val);
            else if (key == "eta") cfg.eta = std::stod(val);
            else throw ConfigError(origin + ": unknown key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad value for " + key);
        }
    }
    cfg.validate();
    return cfg;
}

TrainConfig TrainConfig::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_text(ss.str(), path);
}

NetworkStack build_stack(const TrainConfig& cfg, const std::vector<std::size_t>& view_dims) {
    const std::size_t views = view_dims.size();
    if (views < 2) throw ConfigError("build_stack: need at least two views");
    Rng rng(cfg.seed);
    NetworkStack stack;
    stack.share_target = cfg.share_target_encoder;
    for (std::size_t v = 0; v < views; ++v) {
        const auto spec = encoder_spec(view_dims[v], cfg.hidden_dim, cfg.embed_dim, cfg.encoder_layers);
        stack.online.push_back(build_mlp(spec, rng));
        stack.online_opt.push_back(make_adam_state(stack.online.back()));
        if (!stack.share_target) stack.target.push_back(stack.online.back());
    }
    stack.decoders.assign(views, std::vector<Mlp>(views));
    stack.decoder_opt.assign(views, std::vector<AdamState>(views));
    for (std::size_t v = 0; v < views; ++v)
        for (std::size_t u = 0; u < views; ++u) {
            if (u == v) continue;
            stack.decoders[v][u] =
                build_mlp(decoder_spec(cfg.embed_dim, cfg.decoder_hidden_dim, cfg.embed_dim), rng);
            stack.decoder_opt[v][u] = make_adam_state(stack.decoders[v][u]);
        }
    return stack;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, std::size_t epoch) {
    if (batch_size < 2) throw InvalidParameterError("make_batches: batch_size must be at least 2");
    batch_size = std::min(batch_size, n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng::derive(seed, 0x9d5c0000ULL + epoch);
    rng.shuffle(idx);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(start + batch_size, n);
        if (end - start < 2) break;  // batchnorm cannot take a 1-row batch
        batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                             idx.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

namespace {

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), src.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(src.row_ptr(rows[i]), src.row_ptr(rows[i]) + src.cols(), out.row_ptr(i));
    return out;
}

void scatter_rows(Matrix& dst, const Matrix& src, const std::vector<std::size_t>& rows) {
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(src.row_ptr(i), src.row_ptr(i) + src.cols(), dst.row_ptr(rows[i]));
}

struct StepResult {
    double total = 0.0;
    std::vector<double> intra;
    std::vector<std::vector<double>> inter;
    double kl = -1.0;
    bool skipped = false;
};

}  // namespace

Matrix impute_view(const NetworkStack& stack, const std::vector<Matrix>& zk,
                   const std::vector<std::vector<bool>>& present, std::size_t u) {
    const std::size_t n = zk[u].rows();
    const std::size_t views = zk.size();
    Matrix out = zk[u];
    // Group missing rows by their first observed view so each decoder runs
    // once per group.
    for (std::size_t v = 0; v < views; ++v) {
        if (v == u) continue;
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i) {
            if (present[i][u]) continue;
            std::size_t obs = views;
            for (std::size_t w = 0; w < views; ++w)
                if (w != u && present[i][w]) {
                    obs = w;
                    break;
                }
            if (obs == views) throw DataError("impute_view: sample has no observed view");
            if (obs == v) rows.push_back(i);
        }
        if (rows.empty()) continue;
        const Matrix recovered = mlp_forward_const(stack.decoders[v][u], gather_rows(zk[v], rows));
        scatter_rows(out, recovered, rows);
    }
    return out;
}

namespace {

StepResult train_step(NetworkStack& stack, const TrainConfig& cfg, const RectifierConfig& rcfg,
                      const MultiViewDataset& ds, const std::vector<std::size_t>& batch,
                      bool rectify_active) {
    const std::size_t views = ds.view_count();
    const std::size_t nb = batch.size();

    std::vector<std::vector<bool>> present(nb, std::vector<bool>(views, true));
    std::vector<std::vector<std::size_t>> present_rows(views);  // positions within the batch
    for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t v = 0; v < views; ++v) {
            present[i][v] = ds.is_present(batch[i], v);
            if (present[i][v]) present_rows[v].push_back(i);
        }

    // Online forward on observed rows only; caches drive the backward pass.
    std::vector<Matrix> zq_obs(views);
    std::vector<ForwardCache> cache_q(views);
    for (std::size_t v = 0; v < views; ++v) {
        std::vector<std::size_t> ds_rows;
        for (std::size_t i : present_rows[v]) ds_rows.push_back(batch[i]);
        if (ds_rows.size() < 2) {
            // Batchnorm cannot run on fewer than two rows; at high missing
            // rates a small tail batch can hit this, so the batch is skipped
            // rather than failing the run.
            StepResult skip;
            skip.intra.assign(views, 0.0);
            skip.inter.assign(views, std::vector<double>(views, 0.0));
            skip.skipped = true;
            return skip;
        }
        const Matrix x = gather_rows(ds.views[v], ds_rows);
        zq_obs[v] = mlp_forward(stack.online[v], x, Mode::train, &cache_q[v]);
    }

    // Target-branch embeddings on observed rows.
    std::vector<Matrix> zk_full(views);
    for (std::size_t v = 0; v < views; ++v) {
        Matrix obs;
        if (stack.share_target) {
            obs = zq_obs[v];
        } else {
            std::vector<std::size_t> ds_rows;
            for (std::size_t i : present_rows[v]) ds_rows.push_back(batch[i]);
            obs = mlp_forward(stack.target[v], gather_rows(ds.views[v], ds_rows), Mode::train);
        }
        zk_full[v] = Matrix(nb, obs.cols());
        scatter_rows(zk_full[v], obs, present_rows[v]);
    }

    // Impute missing rows from the target branch; the imputed embeddings
    // are constants for this step (no gradient to their producers).
    const bool any_missing = !ds.present.empty();
    if (any_missing)
        for (std::size_t u = 0; u < views; ++u) zk_full[u] = impute_view(stack, zk_full, present, u);

    std::vector<Matrix> zq_full(views);
    for (std::size_t v = 0; v < views; ++v) {
        zq_full[v] = zk_full[v];  // missing rows keep the imputed values
        scatter_rows(zq_full[v], zq_obs[v], present_rows[v]);
    }

    // Cross-view decoders on the online branch.
    const bool run_decoder = cfg.enable_decoder && cfg.enable_inter;
    std::vector<std::vector<Matrix>> decoded(views, std::vector<Matrix>(views));
    std::vector<std::vector<ForwardCache>> cache_d(views, std::vector<ForwardCache>(views));
    if (run_decoder)
        for (std::size_t v = 0; v < views; ++v)
            for (std::size_t u = 0; u < views; ++u) {
                if (u == v) continue;
                decoded[v][u] =
                    mlp_forward(stack.decoders[v][u], zq_full[v], Mode::train, &cache_d[v][u]);
            }

    RectifierConfig step_rcfg = rcfg;
    if (!rectify_active) step_rcfg.strategy = RectifyStrategy::none;
    const TargetSet targets = build_targets(zk_full, step_rcfg);

    DecoupledLossInput in;
    in.zq = zq_full;
    in.zk = zk_full;
    in.decoded = decoded;
    in.intra_targets = targets.intra;
    in.inter_targets = targets.inter;
    in.tau = cfg.tau;
    in.enable_intra = cfg.enable_intra;
    in.enable_inter = cfg.enable_inter;
    in.use_decoder = run_decoder;
    in.grad_to_keys = !cfg.stop_gradient;
    DecoupledLossResult loss = decoupled_loss(in);

    // Gradient assembly into the online branch.
    std::vector<Matrix> d_zq = loss.d_zq;
    if (!cfg.stop_gradient)
        for (std::size_t v = 0; v < views; ++v) d_zq[v] += loss.d_zk[v];
    if (run_decoder) {
        for (std::size_t v = 0; v < views; ++v)
            for (std::size_t u = 0; u < views; ++u) {
                if (u == v || loss.d_decoded[v][u].empty()) continue;
                auto [dec_grads, d_in] =
                    mlp_backward(stack.decoders[v][u], cache_d[v][u], loss.d_decoded[v][u]);
                d_zq[v] += d_in;
                adam_step(stack.decoders[v][u], dec_grads, stack.decoder_opt[v][u], cfg.lr);
            }
    }
    for (std::size_t v = 0; v < views; ++v) {
        // Imputed rows are gradient-free: only observed rows reach the encoder.
        const Matrix dy = gather_rows(d_zq[v], present_rows[v]);
        auto [enc_grads, d_x] = mlp_backward(stack.online[v], cache_q[v], dy);
        (void)d_x;
        adam_step(stack.online[v], enc_grads, stack.online_opt[v], cfg.lr);
    }

    if (!stack.share_target)
        for (std::size_t v = 0; v < views; ++v)
            ema_update(stack.target[v], stack.online[v], cfg.momentum);
    stack.step += 1;

    StepResult out;
    out.total = loss.total;
    out.intra = loss.intra_terms;
    out.inter = loss.inter_terms;
    if (ds.has_labels()) {
        std::vector<int> batch_labels(nb);
        for (std::size_t i = 0; i < nb; ++i) batch_labels[i] = ds.labels[batch[i]];
        const Matrix oracle = oracle_target(batch_labels);
        double kl = 0.0;
        for (std::size_t v = 0; v < views; ++v)
            kl += kl_to_oracle_floored(oracle, targets.intra[v]);
        out.kl = kl / static_cast<double>(views);
    }
    return out;
}

}  // namespace

NetworkStack train(const TrainConfig& cfg, const MultiViewDataset& ds, TrainHistory& history,
                   std::optional<NetworkStack> resume) {
    cfg.validate();
    ds.validate();
    const std::size_t views = ds.view_count();
    if (views < 2) throw DataError("train: need at least two views");
    const std::size_t n = ds.samples();

    std::vector<std::size_t> view_dims;
    for (const auto& v : ds.views) view_dims.push_back(v.cols());
    NetworkStack stack = resume ? std::move(*resume) : build_stack(cfg, view_dims);

    std::size_t effective_batch = std::min(cfg.batch_size, n);
    if (!ds.all_present())
        effective_batch = std::min(effective_batch, std::max<std::size_t>(2, ds.complete_count()));
    if (effective_batch < 2) throw ConfigError("train: effective batch size below 2");

    const RectifierConfig rcfg = cfg.rectifier();
    for (std::size_t epoch = stack.epoch; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto batches = make_batches(n, effective_batch, cfg.seed, epoch);
        const bool rectify_active =
            epoch >= cfg.rectify_start_epoch && rcfg.strategy != RectifyStrategy::none;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.intra.assign(views, 0.0);
        rec.inter.assign(views * (views - 1), 0.0);
        double kl_sum = 0.0;
        std::size_t kl_count = 0;
        for (const auto& batch : batches) {
            const StepResult sr = train_step(stack, cfg, rcfg, ds, batch, rectify_active);
            if (sr.skipped) continue;
            rec.total += sr.total;
            for (std::size_t v = 0; v < views; ++v) rec.intra[v] += sr.intra[v];
            std::size_t pair = 0;
            for (std::size_t v = 0; v < views; ++v)
                for (std::size_t u = 0; u < views; ++u)
                    if (u != v) rec.inter[pair++] += sr.inter[v][u];
            if (sr.kl >= 0.0) {
                kl_sum += sr.kl;
                ++kl_count;
            }
        }
        const double inv = batches.empty() ? 0.0 : 1.0 / static_cast<double>(batches.size());
        rec.total *= inv;
        for (double& x : rec.intra) x *= inv;
        for (double& x : rec.inter) x *= inv;
        if (kl_count > 0) rec.kl = kl_sum / static_cast<double>(kl_count);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.epochs.push_back(std::move(rec));
        stack.epoch = epoch + 1;
    }
    return stack;
}

Matrix extract_embeddings(const NetworkStack& stack, const MultiViewDataset& ds) {
    ds.validate();
    const std::size_t views = ds.view_count();
    const std::size_t n = ds.samples();
    std::vector<std::vector<bool>> present(n, std::vector<bool>(views, true));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t v = 0; v < views; ++v) present[i][v] = ds.is_present(i, v);

    std::vector<Matrix> zk(views);
    for (std::size_t v = 0; v < views; ++v) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i)
            if (present[i][v]) rows.push_back(i);
        const Matrix obs = mlp_forward_const(stack.target_net(v), gather_rows(ds.views[v], rows));
        zk[v] = Matrix(n, obs.cols());
        scatter_rows(zk[v], obs, rows);
    }
    if (!ds.present.empty())
        for (std::size_t u = 0; u < views; ++u) zk[u] = impute_view(stack, zk, present, u);

    Matrix out = zk[0];
    for (std::size_t v = 1; v < views; ++v) out = hconcat(out, zk[v]);
    return out;
}

void TrainHistory::write_csv(const std::string& path, std::size_t views) const {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os << "epoch,total";
    for (std::size_t v = 0; v < views; ++v) os << ",intra_v" << v;
    for (std::size_t v = 0; v < views; ++v)
        for (std::size_t u = 0; u < views; ++u)
            if (u != v) os << ",inter_v" << v << "u" << u;
    os << ",kl,seconds\n";
    os.precision(12);
    for (const auto& rec : epochs) {
        os << rec.epoch << "," << rec.total;
        for (double x : rec.intra) os << "," << x;
        for (double x : rec.inter) os << "," << x;
        os << ",";
        if (rec.kl >= 0.0) os << rec.kl;
        os << "," << rec.seconds << "\n";
    }
}

namespace {
constexpr char kCkptMagic[8] = {'D', 'I', 'V', 'C', 'K', 'P', 'T', '1'};

void write_u64_ck(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64_ck(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw DataError("checkpoint truncated");
    return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const NetworkStack& stack, const TrainConfig& cfg) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os.write(kCkptMagic, 8);
    const std::string cfg_text = cfg.to_text();
    write_u64_ck(os, cfg_text.size());
    os.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
    write_u64_ck(os, stack.view_count());
    write_u64_ck(os, stack.share_target ? 1 : 0);
    write_u64_ck(os, static_cast<std::uint64_t>(stack.step));
    write_u64_ck(os, stack.epoch);
    for (std::size_t v = 0; v < stack.view_count(); ++v) {
        write_mlp(os, stack.online[v]);
        if (!stack.share_target) write_mlp(os, stack.target[v]);
        write_adam(os, stack.online_opt[v]);
    }
    for (std::size_t v = 0; v < stack.view_count(); ++v)
        for (std::size_t u = 0; u < stack.view_count(); ++u) {
            if (u == v) continue;
            write_mlp(os, stack.decoders[v][u]);
            write_adam(os, stack.decoder_opt[v][u]);
        }
    if (!os) throw DataError("write failure on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw DataError(path + " is not a checkpoint (bad magic)");
    const std::uint64_t cfg_len = read_u64_ck(is);
    std::string cfg_text(cfg_len, '\0');
    is.read(cfg_text.data(), static_cast<std::streamsize>(cfg_len));
    if (!is) throw DataError("checkpoint truncated");
    Checkpoint ck;
    ck.config = TrainConfig::parse_text(cfg_text, path);
    const std::uint64_t views = read_u64_ck(is);
    ck.stack.share_target = read_u64_ck(is) != 0;
    ck.stack.step = static_cast<std::int64_t>(read_u64_ck(is));
    ck.stack.epoch = read_u64_ck(is);
    for (std::uint64_t v = 0; v < views; ++v) {
        ck.stack.online.push_back(read_mlp(is));
        if (!ck.stack.share_target) ck.stack.target.push_back(read_mlp(is));
        ck.stack.online_opt.push_back(read_adam(is, ck.stack.online.back()));
    }
    ck.stack.decoders.assign(views, std::vector<Mlp>(views));
    ck.stack.decoder_opt.assign(views, std::vector<AdamState>(views));
    for (std::uint64_t v = 0; v < views; ++v)
        for (std::uint64_t u = 0; u < views; ++u) {
            if (u == v) continue;
            ck.stack.decoders[v][u] = read_mlp(is);
            ck.stack.decoder_opt[v][u] = read_adam(is, ck.stack.decoders[v][u]);
        }
    return ck;
}

ClusteringReport evaluate(const NetworkStack& stack, const MultiViewDataset& ds,
                          std::size_t clusters, std::uint64_t seed) {
    if (!ds.has_labels()) throw DataError("evaluate: dataset has no labels");
    const Matrix emb = extract_embeddings(stack, ds);
    const ClusterAssignment assign = kmeans(emb, clusters, seed);
    ClusteringReport report;
    report.acc = clustering_accuracy(assign.labels, ds.labels);
    report.nmi = nmi(assign.labels, ds.labels);
    report.ari = ari(assign.labels, ds.labels);
    report.clusters = clusters;
    report.seed = seed;
    if (!ds.present.empty()) {
        std::size_t missing = 0;
        for (const auto& row : ds.present)
            for (bool p : row)
                if (!p) ++missing;
        report.eta = static_cast<double>(missing) / static_cast<double>(ds.samples());
    }
    return report;
}

double rectification_kl(const NetworkStack& stack, const MultiViewDataset& ds,
                        const TrainConfig& cfg, const RectifierConfig& rcfg) {
    if (!ds.has_labels()) throw DataError("rectification_kl: dataset has no labels");
    const std::size_t n = ds.samples();
    std::size_t effective_batch = std::min(cfg.batch_size, n);
    if (!ds.all_present())
        effective_batch = std::min(effective_batch, std::max<std::size_t>(2, ds.complete_count()));
    const auto batches = make_batches(n, effective_batch, cfg.seed, 0);

    const std::size_t views = ds.view_count();
    std::vector<std::vector<bool>> present_all(n, std::vector<bool>(views, true));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t v = 0; v < views; ++v) present_all[i][v] = ds.is_present(i, v);

    double total = 0.0;
    std::size_t count = 0;
    for (const auto& batch : batches) {
        std::vector<Matrix> zk(views);
        std::vector<std::vector<bool>> present(batch.size(), std::vector<bool>(views, true));
        for (std::size_t v = 0; v < views; ++v) {
            std::vector<std::size_t> rows, pos;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                present[i][v] = present_all[batch[i]][v];
                if (present[i][v]) {
                    rows.push_back(batch[i]);
                    pos.push_back(i);
                }
            }
            Matrix obs(rows.size(), ds.views[v].cols());
            for (std::size_t i = 0; i < rows.size(); ++i)
                std::copy(ds.views[v].row_ptr(rows[i]), ds.views[v].row_ptr(rows[i]) + ds.views[v].cols(),
                          obs.row_ptr(i));
            const Matrix emb = mlp_forward_const(stack.target_net(v), obs);
            zk[v] = Matrix(batch.size(), emb.cols());
            for (std::size_t i = 0; i < pos.size(); ++i)
                std::copy(emb.row_ptr(i), emb.row_ptr(i) + emb.cols(), zk[v].row_ptr(pos[i]));
        }
        if (!ds.present.empty())
            for (std::size_t u = 0; u < views; ++u) zk[u] = impute_view(stack, zk, present, u);
        const TargetSet targets = build_targets(zk, rcfg);
        std::vector<int> batch_labels(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) batch_labels[i] = ds.labels[batch[i]];
        const Matrix oracle = oracle_target(batch_labels);
        for (std::size_t v = 0; v < views; ++v) {
            total += kl_to_oracle_floored(oracle, targets.intra[v]);
            ++count;
        }
    }
    if (count == 0) throw DataError("rectification_kl: no usable batches");
    return total / static_cast<double>(count);
}

}  // namespace divide

// Command-line front end: ingest raw point CSVs, synthesize seeded corpora,
// train, evaluate, run the missing-modality ablation, export momentum traces,
// and run the numeric self-checks.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hydranet/checkpoint.hpp"
#include "hydranet/evaluation.hpp"
#include "hydranet/hydra_reference.hpp"
#include "hydranet/multigran.hpp"
#include "hydranet/synth.hpp"

namespace hn = hydranet;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitUser = 1;
constexpr int kExitInternal = 2;

std::string now_stamp() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw hn::io_error("cannot write '" + path + "'");
    out << text;
}

std::vector<hn::MatchSequence> load_sequences(const std::string& path) {
    return hn::build_match_sequences(hn::load_cleaned_csv(path));
}

hn::TrainConfig load_config(const std::string& config_path, std::optional<std::uint64_t> seed,
                            std::optional<int> epochs, std::optional<double> lr) {
    hn::TrainConfig cfg;
    if (!config_path.empty()) cfg = hn::TrainConfig::load(config_path);
    if (seed) cfg.seed = *seed;
    if (epochs) cfg.epochs = *epochs;
    if (lr) cfg.lr = *lr;
    cfg.validate();
    return cfg;
}

ordered_json report_to_json(const hn::MetricReport& report) {
    ordered_json out;
    for (hn::Granularity g : {hn::Granularity::point, hn::Granularity::game, hn::Granularity::set,
                              hn::Granularity::match}) {
        auto it = report.stats.find(g);
        if (it == report.stats.end()) continue;
        ordered_json per;
        for (std::size_t mi = 0; mi < 6; ++mi) {
            const hn::MetricStat& s = it->second[mi];
            if (s.count == 0) {
                per[hn::metric_names()[mi]] = nullptr;
            } else {
                per[hn::metric_names()[mi]] = {{"mean", s.mean}, {"std", s.stddev}};
            }
        }
        out[hn::granularity_name(g)] = per;
    }
    return out;
}

int cmd_ingest(const std::string& in, const std::string& out, const std::string& meta,
               std::uint64_t seed) {
    std::vector<hn::RawRecord> raw = hn::parse_point_csv(in);
    std::vector<hn::PointRecord> cleaned = hn::clean_points(raw);
    hn::impute_serve_speed(cleaned, seed);
    hn::NormalizationStats stats = hn::normalize_records(cleaned);
    std::ofstream of(out);
    if (!of) throw hn::io_error("cannot write '" + out + "'");
    hn::write_point_csv(of, cleaned);
    write_text_file(meta, stats.serialize());
    std::cout << "ingested " << raw.size() << " rows -> " << cleaned.size() << " cleaned points\n";
    return 0;
}

int cmd_synth(std::size_t matches, std::uint64_t seed, const std::string& out_dir,
              const hn::PlantConfig& plant) {
    std::filesystem::create_directories(out_dir);
    hn::SyntheticCorpus corpus = hn::generate_synthetic_corpus(matches, seed, plant);
    std::string points_path = out_dir + "/points.csv";
    std::ofstream of(points_path);
    if (!of) throw hn::io_error("cannot write '" + points_path + "'");
    hn::write_point_csv(of, corpus.records);
    write_text_file(out_dir + "/norm.txt", corpus.stats.serialize());
    std::cout << "wrote " << corpus.records.size() << " points for " << matches << " matches to "
              << points_path << "\n";
    return 0;
}

int cmd_train(const std::string& data, const std::string& config_path, const std::string& ckpt,
              const std::string& log_path, std::optional<std::uint64_t> seed,
              std::optional<int> epochs, std::optional<double> lr) {
    hn::TrainConfig cfg = load_config(config_path, seed, epochs, lr);
    std::vector<hn::MatchSequence> all = load_sequences(data);
    std::vector<std::string> ids;
    for (const auto& m : all) ids.push_back(m.match_id);
    hn::DatasetSplit split = hn::split_dataset(ids, cfg.test_fraction, cfg.folds, cfg.seed);
    hn::TrainResult result = hn::train(hn::select_matches(all, split.train_ids), cfg);
    hn::save_checkpoint_file(ckpt, result.model, cfg);
    std::ofstream lf(log_path);
    if (!lf) throw hn::io_error("cannot write '" + log_path + "'");
    hn::write_loss_log(lf, result.log, now_stamp());
    std::cout << "trained on " << split.train_ids.size() << " matches (" << cfg.epochs
              << " epochs); checkpoint: " << ckpt << "\n";
    return 0;
}

int cmd_eval(const std::string& data, const std::string& ckpt, const std::string& mode,
             const std::string& out_path, const std::string& config_path) {
    std::vector<hn::MatchSequence> all = load_sequences(data);
    ordered_json out;
    if (mode == "test") {
        hn::LoadedModel loaded = hn::load_checkpoint_file(ckpt);
        std::vector<std::string> ids;
        for (const auto& m : all) ids.push_back(m.match_id);
        hn::DatasetSplit split =
            hn::split_dataset(ids, loaded.cfg.test_fraction, loaded.cfg.folds, loaded.cfg.seed);
        auto metrics = hn::evaluate_model(loaded.model, hn::select_matches(all, split.test_ids));
        out["mode"] = "test";
        out["test_matches"] = split.test_ids.size();
        out["metrics"] = report_to_json(hn::MetricReport::from_folds({metrics}));
    } else if (mode == "cv") {
        hn::TrainConfig cfg = config_path.empty() ? hn::load_checkpoint_file(ckpt).cfg
                                                  : hn::TrainConfig::load(config_path);
        std::vector<std::string> ids;
        for (const auto& m : all) ids.push_back(m.match_id);
        hn::DatasetSplit split = hn::split_dataset(ids, cfg.test_fraction, cfg.folds, cfg.seed);
        auto folds = hn::run_cross_validation(all, split, cfg);
        out["mode"] = "cv";
        out["folds"] = split.folds.size();
        out["metrics"] = report_to_json(hn::MetricReport::from_folds(folds));
    } else {
        throw hn::config_error("unknown eval mode '" + mode + "' (expected test or cv)");
    }
    write_text_file(out_path, out.dump(2) + "\n");
    std::cout << "metrics written to " << out_path << "\n";
    return 0;
}

int cmd_ablate(const std::string& data, const std::string& modality_name,
               const std::string& config_path, const std::string& out_path,
               std::optional<std::uint64_t> seed) {
    hn::Modality modality = hn::parse_modality(modality_name);
    hn::TrainConfig cfg = load_config(config_path, seed, std::nullopt, std::nullopt);
    std::vector<hn::MatchSequence> all = load_sequences(data);
    std::vector<std::string> ids;
    for (const auto& m : all) ids.push_back(m.match_id);
    hn::DatasetSplit split = hn::split_dataset(ids, cfg.test_fraction, cfg.folds, cfg.seed);
    hn::MlmmResult res = hn::run_mlmm_ablation(all, split, cfg, modality);

    ordered_json out;
    out["modality"] = modality_name;
    out["pvalue_test"] = "welch";  // per-metric two-sample test across folds
    out["baseline"] = report_to_json(res.baseline);
    out["ablated"] = report_to_json(res.ablated);
    ordered_json sig;
    for (const auto& [g, gr] : res.per_granularity) {
        ordered_json entry;
        ordered_json ps;
        for (std::size_t mi = 0; mi < 6; ++mi) {
            if (std::isnan(gr.p_values[mi])) ps[hn::metric_names()[mi]] = nullptr;
            else ps[hn::metric_names()[mi]] = gr.p_values[mi];
        }
        entry["per_metric_p"] = ps;
        entry["fisher_statistic"] = gr.combined.statistic;
        entry["combined_p"] = gr.combined.p_value;
        entry["significant_at_0.05"] = gr.combined.p_value < 0.05;
        sig[hn::granularity_name(g)] = entry;
    }
    out["significance"] = sig;
    write_text_file(out_path, out.dump(2) + "\n");
    std::cout << "ablation report written to " << out_path << "\n";
    return 0;
}

int cmd_trace(const std::string& data, const std::string& ckpt, const std::string& match_id,
              const std::string& out_path) {
    std::vector<hn::MatchSequence> all = load_sequences(data);
    const hn::MatchSequence* match = nullptr;
    for (const auto& m : all) {
        if (m.match_id == match_id) {
            match = &m;
            break;
        }
    }
    if (!match) throw hn::data_error("match '" + match_id + "' not found in " + data);
    hn::LoadedModel loaded = hn::load_checkpoint_file(ckpt);
    hn::MomentumTrace trace = hn::export_ms_trace(*match, loaded.model);
    std::ofstream of(out_path);
    if (!of) throw hn::io_error("cannot write '" + out_path + "'");
    hn::write_trace_csv(of, trace);
    std::cout << "trace with " << trace.points.size() << " points and " << trace.streaks.size()
              << " streaks written to " << out_path << "\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    using namespace hydranet;
    double worst_ops = 0.0;
    auto rng = make_rng(seed);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor x = randn({3, 4}, rng, 0.8);
        Tensor pos = add_scalar(square(randn({3, 4}, rng)), 0.5);
        Tensor a = rand_uniform({5}, rng, -2.0, -0.1);
        Tensor mat = randn({4, 3}, rng);
        worst_ops = std::max({
            worst_ops,
            grad_check([](const Tensor& t) { return sum_all(exp(t)); }, x),
            grad_check([](const Tensor& t) { return sum_all(log(t)); }, pos),
            grad_check([](const Tensor& t) { return sum_all(silu(t)); }, x),
            grad_check([](const Tensor& t) { return sum_all(softplus(t)); }, x),
            grad_check([](const Tensor& t) { return sum_all(sigmoid(t)); }, x),
            grad_check([&](const Tensor& t) { return sum_all(matmul(t, mat)); }, x),
            grad_check([](const Tensor& t) { return sum_all(square(cumsum(t, 1))); }, x),
            grad_check([](const Tensor& t) { return sum_all(segsum_exp(t)); }, a),
            grad_check([](const Tensor& t) { return sum_all(square(softmax_masked(t, 1))); }, x),
        });
    }
    std::cout << "elementwise/matrix/kernel ops: max relative error " << format_double(worst_ops)
              << "\n";

    ModelConfig mc;
    mc.heads = 2;
    mc.head_dim = 2;
    mc.embed_dim = 8;
    mc.caam_heads = 2;
    mc.head_hidden = 4;
    mc.dropout = 0.0;
    HydraNetModel model = HydraNetModel::init(mc, seed);
    // production init starts the input projection and fusion q/k small;
    // inflate them so group gradient scales dominate the FD noise
    for (auto& item : model.params.items()) {
        Tensor t = item.second;
        double s = 1.0;
        if (item.first.find(".w_in") != std::string::npos) s = 16.0;
        if (item.first.find(".wq_") != std::string::npos ||
            item.first.find(".wk_") != std::string::npos)
            s = 8.0;
        if (s != 1.0)
            for (double& v : t.mutable_values()) v *= s;
    }
    std::vector<MatchSequence> fixture = generate_synthetic_matches(1, seed);
    MatchSequence small = fixture[0];
    // keep the fixture small: two games only
    if (small.games.size() > 2) {
        small.games.resize(2);
        std::size_t cut = small.games[1].end;
        small.p1_features.resize(cut);
        small.p2_features.resize(cut);
        small.y_point.resize(cut);
        small.meta.resize(cut);
        small.sets = {{0, cut, small.games[1].victor}};
        small.y_match = small.games[1].victor;
    }
    auto loss_fn = [&]() {
        auto fwd = model.forward_match(small, false);
        return match_losses(fwd, small, GranularityWeights{}, mc.margin).total;
    };
    double worst_model = grad_check_params(loss_fn, model.params);
    std::cout << "end-to-end total loss: max group relative error " << format_double(worst_model)
              << "\n";
    bool ok = worst_ops <= 1e-4 && worst_model <= 1e-4;
    std::cout << (ok ? "gradcheck PASS" : "gradcheck FAIL") << "\n";
    return ok ? 0 : kExitInternal;
}

int cmd_selftest() {
    using namespace hydranet;
    bool all_ok = true;

    // Oracle equivalence: vectorized forward against the loop reference.
    {
        auto rng = make_rng(2024);
        double worst = 0.0;
        int cases = 0;
        for (std::size_t heads : {std::size_t(1), std::size_t(2), std::size_t(4)}) {
            for (std::size_t head_dim : {std::size_t(2), std::size_t(8)}) {
                HydraConfig cfg{16, heads, head_dim};
                HydraParams p = HydraParams::init(cfg, rng);
                for (std::size_t l = 1; l <= 4; ++l) {
                    Tensor pts = randn({l * 3, 16}, rng);
                    Tensor mi = randn({1, 16}, rng);
                    GameForward fast = forward_game(pts, mi, p, cfg);
                    reference::Grid pts_grid(pts.extent(0), std::vector<double>(16));
                    for (std::size_t i = 0; i < pts.extent(0); ++i)
                        for (std::size_t j = 0; j < 16; ++j) pts_grid[i][j] = pts.at(i, j);
                    reference::Grid ref = reference::naive_mssd_reference(
                        pts_grid, mi.values(), reference::extract_naive_weights(p, cfg));
                    for (std::size_t i = 0; i < fast.full.extent(0); ++i)
                        for (std::size_t j = 0; j < 16; ++j)
                            worst = std::max(worst, std::abs(fast.full.at(i, j) - ref[i][j]));
                    ++cases;
                }
            }
        }
        bool ok = worst < 1e-9;
        all_ok = all_ok && ok;
        std::cout << (ok ? "PASS" : "FAIL") << " kernel oracle equivalence (" << cases
                  << " cases, max diff " << format_double(worst) << ")\n";
    }

    // Disjoint-window identity against the sequential recurrence.
    {
        auto rng = make_rng(2025);
        double worst = 0.0;
        for (int rep = 0; rep < 20; ++rep) {
            HydraConfig cfg{6, 2, 3};
            std::size_t t_len = 2 * (2 + static_cast<std::size_t>(rep % 6));
            Tensor x = randn({t_len, cfg.d_inner()}, rng);
            Tensor a = rand_uniform({t_len, cfg.heads}, rng, -2.0, -0.01);
            Tensor b = randn({t_len, cfg.d_state()}, rng);
            Tensor c = randn({t_len, cfg.d_state()}, rng);
            Tensor chunked = mssd_chunked_sum(x, a, b, c, cfg, 2, 2);
            reference::Grid xg(t_len, std::vector<double>(cfg.d_inner()));
            reference::Grid ag(t_len, std::vector<double>(cfg.heads));
            reference::Grid bg(t_len, std::vector<double>(cfg.d_state()));
            reference::Grid cg(t_len, std::vector<double>(cfg.d_state()));
            for (std::size_t i = 0; i < t_len; ++i) {
                for (std::size_t j = 0; j < cfg.d_inner(); ++j) xg[i][j] = x.at(i, j);
                for (std::size_t j = 0; j < cfg.heads; ++j) ag[i][j] = a.at(i, j);
                for (std::size_t j = 0; j < cfg.d_state(); ++j) bg[i][j] = b.at(i, j);
                for (std::size_t j = 0; j < cfg.d_state(); ++j) cg[i][j] = c.at(i, j);
            }
            reference::Grid scan =
                reference::naive_ssm_scan(xg, ag, bg, cg, cfg.heads, cfg.head_dim);
            for (std::size_t i = 0; i < t_len; ++i)
                for (std::size_t j = 0; j < cfg.d_inner(); ++j)
                    worst = std::max(worst, std::abs(chunked.at(i, j) - scan[i][j]));
        }
        bool ok = worst < 1e-8;
        all_ok = all_ok && ok;
        std::cout << (ok ? "PASS" : "FAIL") << " state-space duality identity (max diff "
                  << format_double(worst) << ")\n";
    }

    std::cout << (all_ok ? "selftest PASS" : "selftest FAIL") << "\n";
    return all_ok ? 0 : kExitInternal;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HydraNet momentum modeling engine"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Clean and normalize a raw point CSV");
    std::string in_path, out_path = "cleaned.csv", meta_path = "norm.txt";
    std::uint64_t ingest_seed = 1;
    ingest->add_option("--in", in_path, "raw point CSV")->required();
    ingest->add_option("--out", out_path, "cleaned CSV output");
    ingest->add_option("--meta", meta_path, "normalization metadata output");
    ingest->add_option("--seed", ingest_seed, "seed for the imputation draws");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
    std::size_t synth_matches = 50;
    std::uint64_t synth_seed = 1;
    std::string synth_out = "data";
    hn::PlantConfig plant;
    bool no_point_signal = false;
    synth->add_option("--matches", synth_matches, "number of matches");
    synth->add_option("--seed", synth_seed, "corpus seed");
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--carryover", plant.carryover_prob, "game carryover probability");
    synth->add_flag("--best-of-5", plant.best_of_five, "best-of-five sets");
    synth->add_flag("--no-point-signal", no_point_signal, "disable the planted point signal");
    synth->add_flag("--constant-distance", plant.constant_distance,
                    "constant running distance (dead fatigue feature)");
    synth->add_option("--missing-speed-frac", plant.missing_speed_fraction,
                      "fraction of serve speeds left missing");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model on a cleaned CSV");
    std::string train_data, train_config, ckpt_path = "model.ckpt", log_path = "loss_log.csv";
    std::optional<std::uint64_t> train_seed;
    std::optional<int> train_epochs;
    std::optional<double> train_lr;
    train_cmd->add_option("--data", train_data, "cleaned point CSV")->required();
    train_cmd->add_option("--config", train_config, "key=value config file");
    train_cmd->add_option("--checkpoint", ckpt_path, "checkpoint output");
    train_cmd->add_option("--log", log_path, "loss log CSV output");
    train_cmd->add_option("--seed", train_seed, "override the config seed");
    train_cmd->add_option("--epochs", train_epochs, "override the epoch count");
    train_cmd->add_option("--lr", train_lr, "override the learning rate");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string eval_data, eval_ckpt, eval_mode = "test", eval_out = "metrics.json", eval_config;
    eval_cmd->add_option("--data", eval_data, "cleaned point CSV")->required();
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required();
    eval_cmd->add_option("--mode", eval_mode, "test (held-out split) or cv (refit per fold)");
    eval_cmd->add_option("--out", eval_out, "metrics JSON output");
    eval_cmd->add_option("--config", eval_config, "config override for cv mode");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "Missing-modality ablation");
    std::string abl_data, abl_modality, abl_config, abl_out = "ablation.json";
    std::optional<std::uint64_t> abl_seed;
    ablate->add_option("--data", abl_data, "cleaned point CSV")->required();
    ablate->add_option("--modality", abl_modality, "serve, return, psychology, or fatigue")
        ->required();
    ablate->add_option("--config", abl_config, "key=value config file");
    ablate->add_option("--out", abl_out, "report JSON output");
    ablate->add_option("--seed", abl_seed, "override the config seed");

    // trace
    auto* trace = app.add_subcommand("trace", "Export a momentum trace for one match");
    std::string tr_data, tr_ckpt, tr_match, tr_out = "trace.csv";
    trace->add_option("--data", tr_data, "cleaned point CSV")->required();
    trace->add_option("--checkpoint", tr_ckpt, "trained checkpoint")->required();
    trace->add_option("--match", tr_match, "match id")->required();
    trace->add_option("--out", tr_out, "trace CSV output");

    // gradcheck / selftest
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    std::uint64_t gc_seed = 1;
    gradcheck->add_option("--seed", gc_seed, "seed for the random fixtures");
    auto* selftest = app.add_subcommand("selftest", "Kernel oracle and duality checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUser;
    }

    try {
        if (*ingest) return cmd_ingest(in_path, out_path, meta_path, ingest_seed);
        if (*synth) {
            plant.point_signal = !no_point_signal;
            return cmd_synth(synth_matches, synth_seed, synth_out, plant);
        }
        if (*train_cmd)
            return cmd_train(train_data, train_config, ckpt_path, log_path, train_seed,
                             train_epochs, train_lr);
        if (*eval_cmd) return cmd_eval(eval_data, eval_ckpt, eval_mode, eval_out, eval_config);
        if (*ablate) return cmd_ablate(abl_data, abl_modality, abl_config, abl_out, abl_seed);
        if (*trace) return cmd_trace(tr_data, tr_ckpt, tr_match, tr_out);
        if (*gradcheck) return cmd_gradcheck(gc_seed);
        if (*selftest) return cmd_selftest();
    } catch (const hn::user_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUser;
    } catch (const hn::internal_error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return 0;
}

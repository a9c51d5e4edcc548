// debias: deterministic CLI around the library. Subcommands generate
// synthetic confounded datasets, train (adversarially or not), sweep lambda,
// probe checkpoints, export t-SNE embeddings, and self-check gradients.
// Every command resolves one JSON config (defaults <- file <- dotted
// overrides), persists the resolved copy next to its outputs, and is
// byte-deterministic given that config.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "debias/checkpoint.hpp"
#include "debias/dataset.hpp"
#include "debias/errors.hpp"
#include "debias/evaluation.hpp"
#include "debias/experiment.hpp"
#include "debias/gradcheck.hpp"
#include "debias/models.hpp"
#include "debias/synth.hpp"
#include "debias/training.hpp"
#include "debias/tsne.hpp"
#include "json.hpp"

using debias::ConfigError;
using debias::DataError;
using ordered_json = nlohmann::ordered_json;

namespace {

const char* kUsage =
    "usage: debias <command> [--config FILE] [--SECTION.KEY=VALUE ...]\n"
    "\n"
    "commands:\n"
    "  gen-data   render a synthetic dataset to <out_dir>/dataset.dbds\n"
    "  train      train one model; writes checkpoint.dbck + history.csv\n"
    "  sweep      train one model per lambda; writes sweep.csv + checkpoints\n"
    "  eval       probe a checkpoint (--checkpoint FILE); writes reports.csv\n"
    "  embed      t-SNE a checkpoint's codes (--checkpoint FILE); writes embedding.csv\n"
    "  gradcheck  finite-difference audit of every op (--seed N, --corrupt-op NAME)\n"
    "\n"
    "The config is one JSON document with sections data/arch/train/eval/sweep/out_dir.\n"
    "Unknown keys are rejected. Dotted flags override single keys, e.g. --train.lambda=50.\n";

// ---------------------------------------------------------------- config ---

ordered_json default_config() {
    ordered_json c;
    c["data"] = {{"path", ""},
                 {"image_size", 32},
                 {"n_classes", 4},
                 {"n_batches", 3},
                 {"confound_strength", 0.6},
                 {"batch_gain_spread", 0.35},
                 {"noise_sigma", 0.02},
                 {"samples", 1000},
                 {"seed", 0},
                 {"confounder_kind", "categorical"},
                 {"group_size", 20}};
    c["arch"] = {{"image_size", 32},
                 {"channels", 3},
                 {"conv_channels", {16, 32, 64}},
                 {"latent_dim", 64},
                 {"adv_hidden", 64},
                 {"leaky_alpha", 0.01}};
    c["train"] = {{"lambda", 0.0},
                  {"lr_main", 1e-3},
                  {"lr_adv", 1e-3},
                  {"epochs", 1},
                  {"batch_size", 32},
                  {"adv_steps_per_main", 5},
                  {"adv_pretrain_steps", 500},
                  {"cae_pretrain_epochs", 0},
                  {"seed", 0}};
    c["eval"] = {{"k", 3},
                 {"aggregate", true},
                 {"tsne_perplexity", 15.0},
                 {"tsne_iters", 1000},
                 {"tsne_seed", 0}};
    c["sweep"] = {0.0, 1.0, 50.0};
    c["out_dir"] = "out";
    return c;
}

// Overlay src onto dst, refusing keys the schema does not know.
void merge_into(ordered_json& dst, const ordered_json& src, const std::string& prefix) {
    if (!src.is_object()) throw ConfigError("config: expected a JSON object at " + (prefix.empty() ? std::string("top level") : prefix));
    for (auto it = src.begin(); it != src.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!dst.contains(it.key())) throw ConfigError("config: unknown key `" + path + "`");
        ordered_json& slot = dst[it.key()];
        if (slot.is_object() && it.value().is_object()) {
            merge_into(slot, it.value(), path);
        } else if (slot.is_object() != it.value().is_object()) {
            throw ConfigError("config: `" + path + "` has the wrong shape");
        } else {
            slot = it.value();
        }
    }
}

void apply_override(ordered_json& cfg, const std::string& dotted, const std::string& raw) {
    ordered_json* slot = &cfg;
    std::string path;
    size_t start = 0;
    while (true) {
        const size_t dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
        path += (path.empty() ? "" : ".") + key;
        if (!slot->is_object() || !slot->contains(key))
            throw ConfigError("config: unknown key `" + path + "`");
        slot = &(*slot)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    ordered_json value = ordered_json::parse(raw, nullptr, false);
    if (slot->is_array() && !value.is_array()) {
        // allow --sweep=0,1,50 shorthand
        value = ordered_json::parse("[" + raw + "]", nullptr, false);
    }
    if (value.is_discarded()) value = raw; // unquoted strings
    if (slot->is_object() || value.is_object())
        throw ConfigError("config: `" + path + "` cannot take a scalar override");
    *slot = value;
}

debias::SynthConfig synth_from(const ordered_json& d) {
    debias::SynthConfig s;
    s.image_size = d.at("image_size").get<int>();
    s.n_classes = d.at("n_classes").get<int>();
    s.n_batches = d.at("n_batches").get<int>();
    s.confound_strength = d.at("confound_strength").get<double>();
    s.batch_gain_spread = d.at("batch_gain_spread").get<double>();
    s.noise_sigma = d.at("noise_sigma").get<double>();
    s.samples = d.at("samples").get<int>();
    s.seed = d.at("seed").get<std::uint64_t>();
    s.group_size = d.at("group_size").get<int>();
    const std::string kind = d.at("confounder_kind").get<std::string>();
    if (kind == "categorical") {
        s.confounder_kind = debias::ConfounderKind::Categorical;
    } else if (kind == "continuous") {
        s.confounder_kind = debias::ConfounderKind::Continuous;
    } else {
        throw ConfigError("config: data.confounder_kind must be `categorical` or `continuous`");
    }
    return s;
}

debias::ArchConfig arch_from(const ordered_json& a) {
    debias::ArchConfig arch;
    arch.image_size = a.at("image_size").get<int>();
    arch.channels = a.at("channels").get<int>();
    arch.conv_channels = a.at("conv_channels").get<std::vector<int>>();
    arch.latent_dim = a.at("latent_dim").get<int>();
    arch.adv_hidden = a.at("adv_hidden").get<int>();
    arch.leaky_alpha = a.at("leaky_alpha").get<float>();
    return arch;
}

debias::TrainingConfig train_from(const ordered_json& t) {
    debias::TrainingConfig c;
    c.lambda = t.at("lambda").get<double>();
    c.lr_main = t.at("lr_main").get<double>();
    c.lr_adv = t.at("lr_adv").get<double>();
    c.epochs = t.at("epochs").get<int>();
    c.batch_size = t.at("batch_size").get<int>();
    c.adv_steps_per_main = t.at("adv_steps_per_main").get<int>();
    c.adv_pretrain_steps = t.at("adv_pretrain_steps").get<int>();
    c.cae_pretrain_epochs = t.at("cae_pretrain_epochs").get<int>();
    c.seed = t.at("seed").get<std::uint64_t>();
    return c;
}

struct EvalOpts {
    int k = 3;
    bool aggregate = true;
    double tsne_perplexity = 15.0;
    int tsne_iters = 1000;
    std::uint64_t tsne_seed = 0;
};

EvalOpts eval_from(const ordered_json& e) {
    EvalOpts o;
    o.k = e.at("k").get<int>();
    o.aggregate = e.at("aggregate").get<bool>();
    o.tsne_perplexity = e.at("tsne_perplexity").get<double>();
    o.tsne_iters = e.at("tsne_iters").get<int>();
    o.tsne_seed = e.at("tsne_seed").get<std::uint64_t>();
    return o;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot read `" + path + "`");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write `" + path + "`");
    out << text;
    if (!out) throw DataError("short write to `" + path + "`");
}

std::string ensure_out_dir(const ordered_json& cfg) {
    const std::string out_dir = cfg.at("out_dir").get<std::string>();
    if (out_dir.empty()) throw ConfigError("config: out_dir must be non-empty");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create out_dir `" + out_dir + "`: " + ec.message());
    return out_dir;
}

void write_resolved(const ordered_json& cfg, const std::string& out_dir) {
    write_text(out_dir + "/resolved_config.json", cfg.dump(2) + "\n");
}

debias::LabeledImageSet load_or_generate(const ordered_json& cfg) {
    const std::string path = cfg.at("data").at("path").get<std::string>();
    if (!path.empty()) return debias::load_dataset(path);
    debias::SynthConfig s = synth_from(cfg.at("data"));
    return debias::generate(s);
}

// ---------------------------------------------------------------- probes ---

// Majority label per group, ties to the smaller label; groups here are pure
// by construction, the rule only pins pathological inputs down.
std::map<int, int> group_majority(const std::vector<int>& group_ids, const std::vector<int>& labels) {
    std::map<int, std::map<int, int>> counts;
    for (size_t i = 0; i < group_ids.size(); ++i) ++counts[group_ids[i]][labels[i]];
    std::map<int, int> major;
    for (auto& [g, hist] : counts) {
        int best = -1, best_count = -1;
        for (auto& [label, count] : hist) {
            if (count > best_count) {
                best = label;
                best_count = count;
            }
        }
        major[g] = best;
    }
    return major;
}

debias::FeatureMatrix codes_of(const debias::Checkpoint& ck, const debias::LabeledImageSet& ds) {
    debias::FeatureMatrix f;
    f.rows = debias::encode_batched(ck.arch, ck.enc, ds.images, 256);
    f.row_ids.resize(static_cast<size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) f.row_ids[static_cast<size_t>(i)] = i;
    return f;
}

std::vector<debias::EvalReport> run_probes(const debias::Checkpoint& ck,
                                           const debias::LabeledImageSet& ds, const EvalOpts& opts) {
    const std::vector<int> no_groups;
    const std::vector<int>& groups = opts.aggregate ? ds.group_ids : no_groups;
    debias::FeatureMatrix f = codes_of(ck, ds);
    if (ds.kind == debias::ConfounderKind::Categorical) {
        auto [moa, batch] = debias::probe_report(f, ds.m_labels, ds.s_labels, groups, opts.k);
        return {moa, batch};
    }
    // continuous confounder: no batch classes to probe, report the signal side
    debias::FeatureMatrix probed = f;
    std::vector<int> m = ds.m_labels;
    if (!groups.empty()) {
        probed = debias::aggregate_profiles(f, groups);
        std::map<int, int> major = group_majority(groups, ds.m_labels);
        m.clear();
        for (int g : probed.row_ids) m.push_back(major.at(g));
    }
    debias::EvalReport moa;
    moa.probe = "moa";
    moa.k = opts.k;
    moa.n = probed.n();
    moa.accuracy = debias::knn_loo_accuracy(probed, m, opts.k);
    moa.null_accuracy = debias::null_accuracy(m);
    moa.fold_change = debias::fold_change(moa.accuracy, moa.null_accuracy);
    return {moa};
}

// ------------------------------------------------------------- commands ---

int cmd_gen_data(const ordered_json& cfg) {
    const std::string out_dir = ensure_out_dir(cfg);
    debias::SynthConfig s = synth_from(cfg.at("data"));
    const debias::LabeledImageSet ds = debias::generate(s);
    const std::string path = out_dir + "/dataset.dbds";
    debias::save_dataset(path, ds, cfg.at("data").dump());
    write_resolved(cfg, out_dir);

    std::printf("wrote %s  (N=%d)\n", path.c_str(), ds.size());
    std::map<int, int> classes, batches;
    for (int m : ds.m_labels) ++classes[m];
    std::printf("classes:");
    for (auto& [m, count] : classes) std::printf("  %d:%d", m, count);
    std::printf("\n");
    if (ds.kind == debias::ConfounderKind::Categorical) {
        for (int b : ds.s_labels) ++batches[b];
        std::printf("batches:");
        for (auto& [b, count] : batches) std::printf("  %d:%d", b, count);
        std::printf("\n");
    } else {
        float lo = 1.0f, hi = 0.0f;
        for (float v : ds.s_continuous) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        std::printf("confounder: continuous in [%.4f, %.4f]\n", lo, hi);
    }
    return 0;
}

int cmd_train(const ordered_json& cfg) {
    const std::string out_dir = ensure_out_dir(cfg);
    const debias::LabeledImageSet ds = load_or_generate(cfg);
    const debias::ArchConfig arch = arch_from(cfg.at("arch"));
    const debias::TrainingConfig tc = train_from(cfg.at("train"));

    auto [ck, history] = debias::train(ds, tc, arch);
    debias::save_checkpoint(out_dir + "/checkpoint.dbck", ck);
    debias::write_history_csv(out_dir + "/history.csv", history);
    write_resolved(cfg, out_dir);

    for (const debias::EpochRecord& r : history.records) {
        std::printf("epoch %3d  l_cae %.6f  l_adv %.6f  E %.6f  (%.1fs)\n", r.epoch, r.l_cae,
                    r.l_adv, r.e_lambda, r.seconds);
    }
    std::printf("wrote %s/checkpoint.dbck\n", out_dir.c_str());
    std::printf("wrote %s/history.csv\n", out_dir.c_str());
    return 0;
}

std::string lambda_slug(double lambda) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", lambda);
    std::string s(buf);
    for (char& c : s) {
        if (c == '.') c = 'p';
        if (c == '-') c = 'm';
    }
    return s;
}

int cmd_sweep(const ordered_json& cfg) {
    const std::string out_dir = ensure_out_dir(cfg);
    const std::vector<double> lambdas = cfg.at("sweep").get<std::vector<double>>();
    const debias::LabeledImageSet ds = load_or_generate(cfg);
    const debias::ArchConfig arch = arch_from(cfg.at("arch"));
    const debias::TrainingConfig tc = train_from(cfg.at("train"));
    const EvalOpts opts = eval_from(cfg.at("eval"));

    debias::SweepResult result = debias::run_sweep(ds, tc, arch, lambdas, opts.k);
    debias::write_sweep_csv(out_dir + "/sweep.csv", result.table);
    debias::save_checkpoint(out_dir + "/checkpoint_pretrain.dbck", result.pretrained);
    debias::write_history_csv(out_dir + "/history_pretrain.csv", result.pretrain_history);
    for (size_t i = 0; i < lambdas.size(); ++i) {
        const std::string slug = lambda_slug(lambdas[i]);
        debias::save_checkpoint(out_dir + "/checkpoint_lambda" + slug + ".dbck",
                                result.checkpoints[i]);
        debias::write_history_csv(out_dir + "/history_lambda" + slug + ".csv",
                                  result.histories[i]);
    }
    write_resolved(cfg, out_dir);

    std::printf("%-8s  %-12s  %-8s  %-12s  %-8s\n", "lambda", "moa_acc", "moa_fc", "batch_acc",
                "batch_fc");
    for (const debias::SweepRow& r : result.table.rows) {
        std::printf("%-8g  %-12.4f  %-8.2f  %-12.4f  %-8.2f\n", r.lambda, r.moa_accuracy, r.moa_fc,
                    r.batch_accuracy, r.batch_fc);
    }
    std::printf("%-8s  %-12.4f  %-8.2f  %-12.4f  %-8.2f\n", "null", result.table.moa_null, 1.0,
                result.table.batch_null, 1.0);
    std::printf("wrote %s/sweep.csv\n", out_dir.c_str());
    return 0;
}

int cmd_eval(const ordered_json& cfg, const std::string& checkpoint_path) {
    if (checkpoint_path.empty()) throw ConfigError("eval: --checkpoint FILE is required");
    const std::string out_dir = ensure_out_dir(cfg);
    const debias::Checkpoint ck = debias::load_checkpoint(checkpoint_path);
    const debias::LabeledImageSet ds = load_or_generate(cfg);
    const EvalOpts opts = eval_from(cfg.at("eval"));

    const std::vector<debias::EvalReport> reports = run_probes(ck, ds, opts);
    debias::write_reports_csv(out_dir + "/reports.csv", reports);
    write_resolved(cfg, out_dir);

    for (const debias::EvalReport& r : reports) {
        std::printf("%-6s  k=%d  n=%d  acc %.4f  null %.4f  fc %.2f\n", r.probe.c_str(), r.k, r.n,
                    r.accuracy, r.null_accuracy, r.fold_change);
    }
    std::printf("wrote %s/reports.csv\n", out_dir.c_str());
    return 0;
}

int cmd_embed(const ordered_json& cfg, const std::string& checkpoint_path) {
    if (checkpoint_path.empty()) throw ConfigError("embed: --checkpoint FILE is required");
    const std::string out_dir = ensure_out_dir(cfg);
    const debias::Checkpoint ck = debias::load_checkpoint(checkpoint_path);
    const debias::LabeledImageSet ds = load_or_generate(cfg);
    const EvalOpts opts = eval_from(cfg.at("eval"));

    debias::FeatureMatrix f = codes_of(ck, ds);
    std::vector<int> m = ds.m_labels;
    std::vector<double> s_values(static_cast<size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) s_values[static_cast<size_t>(i)] = ds.s_value(i);
    if (opts.aggregate && !ds.group_ids.empty()) {
        f = debias::aggregate_profiles(f, ds.group_ids);
        std::map<int, int> major_m = group_majority(ds.group_ids, ds.m_labels);
        std::map<int, double> mean_s;
        std::map<int, int> group_count;
        for (int i = 0; i < ds.size(); ++i) {
            mean_s[ds.group_ids[static_cast<size_t>(i)]] += ds.s_value(i);
            ++group_count[ds.group_ids[static_cast<size_t>(i)]];
        }
        m.clear();
        s_values.clear();
        for (int g : f.row_ids) {
            m.push_back(major_m.at(g));
            s_values.push_back(mean_s.at(g) / group_count.at(g));
        }
    }

    debias::TsneConfig tsne_cfg;
    tsne_cfg.perplexity = opts.tsne_perplexity;
    tsne_cfg.iters = opts.tsne_iters;
    tsne_cfg.seed = opts.tsne_seed;
    const debias::Embedding2D emb = debias::tsne_embed(f, tsne_cfg);

    std::string csv = "row_id,x,y,m_label,s_value\n";
    char line[160];
    for (int i = 0; i < emb.n(); ++i) {
        std::snprintf(line, sizeof line, "%d,%.10g,%.10g,%d,%.10g\n",
                      emb.row_ids[static_cast<size_t>(i)], emb.points[static_cast<size_t>(i) * 2],
                      emb.points[static_cast<size_t>(i) * 2 + 1], m[static_cast<size_t>(i)],
                      s_values[static_cast<size_t>(i)]);
        csv += line;
    }
    write_text(out_dir + "/embedding.csv", csv);

    ordered_json side;
    side["final_kl"] = emb.final_kl;
    side["kl_after_exaggeration"] = emb.kl_after_exaggeration;
    side["config"] = {{"perplexity", emb.config.perplexity},
                      {"iters", emb.config.iters},
                      {"learning_rate", emb.config.learning_rate},
                      {"momentum_early", emb.config.momentum_early},
                      {"momentum_late", emb.config.momentum_late},
                      {"momentum_switch_iter", emb.config.momentum_switch_iter},
                      {"exaggeration", emb.config.exaggeration},
                      {"exaggeration_iters", emb.config.exaggeration_iters},
                      {"seed", emb.config.seed}};
    write_text(out_dir + "/embedding.json", side.dump(2) + "\n");
    write_resolved(cfg, out_dir);

    std::printf("embedded %d rows  final_kl %.6f\n", emb.n(), emb.final_kl);
    std::printf("wrote %s/embedding.csv\n", out_dir.c_str());
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& corrupt_op) {
    const std::vector<debias::GradCheckResult> results = debias::run_gradcheck(seed, corrupt_op);
    for (const debias::GradCheckResult& r : results) {
        std::printf("%-22s rel %.3e  abs %.3e  coords %6" PRId64 "  %s\n", r.op.c_str(),
                    r.max_rel_err, r.max_abs_err, r.coords, r.passed ? "PASS" : "FAIL");
    }
    if (!debias::gradcheck_passed(results)) {
        std::fprintf(stderr, "gradcheck: FAILED\n");
        return 3;
    }
    std::printf("gradcheck: all %zu ops within tolerance\n", results.size());
    return 0;
}

// ----------------------------------------------------------------- main ---

struct CliArgs {
    std::string command;
    std::string config_path;
    std::string checkpoint;
    std::string corrupt_op;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> overrides; // dotted key -> raw value
};

CliArgs parse_args(int argc, char** argv) {
    CliArgs args;
    if (argc < 2) throw ConfigError("missing command\n" + std::string(kUsage));
    args.command = argv[1];
    for (int i = 2; i < argc; ++i) {
        std::string tok = argv[i];
        if (tok.rfind("--", 0) != 0) throw ConfigError("unexpected argument `" + tok + "`");
        tok = tok.substr(2);
        std::string value;
        const size_t eq = tok.find('=');
        bool has_value = eq != std::string::npos;
        if (has_value) {
            value = tok.substr(eq + 1);
            tok = tok.substr(0, eq);
        }
        auto need_value = [&]() -> std::string {
            if (has_value) return value;
            if (i + 1 >= argc) throw ConfigError("flag --" + tok + " needs a value");
            return argv[++i];
        };
        if (tok == "config") {
            args.config_path = need_value();
        } else if (tok == "checkpoint") {
            args.checkpoint = need_value();
        } else if (tok == "corrupt-op") {
            args.corrupt_op = need_value();
        } else if (tok == "seed") {
            args.seed = std::stoull(need_value());
        } else if (tok == "help") {
            std::fputs(kUsage, stdout);
            std::exit(0);
        } else {
            args.overrides.emplace_back(tok, need_value());
        }
    }
    return args;
}

int dispatch(const CliArgs& args) {
    if (args.command == "gradcheck") return cmd_gradcheck(args.seed, args.corrupt_op);

    ordered_json cfg = default_config();
    if (!args.config_path.empty()) {
        ordered_json given = ordered_json::parse(slurp(args.config_path), nullptr, false);
        if (given.is_discarded())
            throw ConfigError("config: `" + args.config_path + "` is not valid JSON");
        merge_into(cfg, given, "");
    }
    for (const auto& [key, value] : args.overrides) apply_override(cfg, key, value);

    if (args.command == "gen-data") return cmd_gen_data(cfg);
    if (args.command == "train") return cmd_train(cfg);
    if (args.command == "sweep") return cmd_sweep(cfg);
    if (args.command == "eval") return cmd_eval(cfg, args.checkpoint);
    if (args.command == "embed") return cmd_embed(cfg, args.checkpoint);
    throw ConfigError("unknown command `" + args.command + "`\n" + std::string(kUsage));
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(parse_args(argc, argv));
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const debias::HyperparamError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const debias::DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const debias::ShapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const debias::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "error: config: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

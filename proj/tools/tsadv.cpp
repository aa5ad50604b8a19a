// tsadv: train time-series classifiers, craft gradient-sign adversarial
// examples, and analyze the damage. Every command writes its outputs plus a
// run manifest (resolved parameters, seeds, file digests) into --out.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tsadv/analysis.hpp"
#include "tsadv/attack.hpp"
#include "tsadv/checkpoint.hpp"
#include "tsadv/dataset.hpp"
#include "tsadv/synthetic.hpp"
#include "tsadv/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace tsadv;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Accumulates one manifest per command and writes it into the output
// directory last, after all other artifacts exist.
struct Manifest {
    json j;
    fs::path out_dir;

    Manifest(const std::string& command, const std::string& out) : out_dir(out) {
        j["tool"] = "tsadv";
        j["version"] = kVersion;
        j["command"] = command;
        j["created_utc"] = utc_now();
        j["parameters"] = json::object();
        j["inputs"] = json::object();
        j["outputs"] = json::object();
        j["notes"] = json::array();
    }
    void param(const std::string& k, const json& v) { j["parameters"][k] = v; }
    void input(const std::string& path) { j["inputs"][path] = file_digest(path); }
    void output(const std::string& path) { j["outputs"][path] = file_digest(path); }
    void note(const std::string& n) { j["notes"].push_back(n); }
    void write() { atomic_write((out_dir / "manifest.json").string(), j.dump(2) + "\n"); }
};

std::string out_file(const std::string& out_dir, const std::string& name) {
    return (fs::path(out_dir) / name).string();
}

json campaign_json(const AttackCampaign& camp) {
    json j;
    j["dataset"] = camp.dataset;
    j["method"] = method_name(camp.config.method);
    j["epsilon"] = camp.config.epsilon;
    if (camp.config.method == AttackMethod::Bim) {
        j["alpha"] = camp.config.alpha;
        j["iterations"] = camp.config.iterations;
    }
    j["original_accuracy"] = camp.original_accuracy;
    j["attacked_accuracy"] = camp.attacked_accuracy;
    j["accuracy_variation"] = camp.accuracy_variation;
    j["per_instance"] = json::array();
    for (size_t i = 0; i < camp.results.size(); ++i) {
        const auto& r = camp.results[i];
        double linf = 0;
        for (double e : r.eta) linf = std::max(linf, std::abs(e));
        j["per_instance"].push_back({{"index", i},
                                     {"prediction_before", r.prediction_before},
                                     {"prediction_after", r.prediction_after},
                                     {"confidence_before", r.confidence_before},
                                     {"confidence_after", r.confidence_after},
                                     {"linf", linf},
                                     {"success", r.success}});
    }
    return j;
}

int cmd_train(const std::string& train_path, const std::string& test_path,
              const std::string& arch, const TrainConfig& cfg, bool znorm,
              const std::string& out) {
    cfg.validate();  // reject bad configs before touching any files
    auto [train_ds, test_ds] = load_ucr(train_path, test_path,
                                        fs::path(train_path).stem().string());
    if (znorm) {
        train_ds = z_normalize(train_ds);
        test_ds = z_normalize(test_ds);
    }
    auto model = build_model<float>(arch_from_name(arch), train_ds.length(),
                                    train_ds.num_classes(), cfg.seed);
    model.meta.seed = cfg.seed;
    auto hist = train(model, train_ds, cfg);
    auto ev = evaluate(model, test_ds);

    save_checkpoint(model, out_file(out, "model.ck"));
    atomic_write(out_file(out, "history.csv"), hist.to_csv());

    Manifest m("train", out);
    m.param("train", train_path);
    m.param("test", test_path);
    m.param("arch", arch);
    m.param("epochs", cfg.epochs);
    m.param("batch_size", cfg.batch_size);
    m.param("learning_rate", cfg.learning_rate);
    m.param("seed", cfg.seed);
    m.param("znorm", znorm);
    m.input(train_path);
    m.input(test_path);
    m.output(out_file(out, "model.ck"));
    m.output(out_file(out, "history.csv"));
    m.j["results"] = {{"final_train_loss", hist.epochs.back().loss},
                      {"test_accuracy", ev.accuracy}};
    m.write();

    std::printf("test accuracy: %.4f\n", ev.accuracy);
    return 0;
}

int cmd_attack(const std::string& model_path, const std::string& test_path,
               const AttackConfig& cfg, const std::string& out) {
    auto model = load_checkpoint(model_path);
    // build the class map from the file itself by loading it as both halves
    // of a pair
    auto test_ds = load_ucr(test_path, test_path, fs::path(test_path).stem().string()).second;
    if (test_ds.length() != model.arch.input_length)
        throw DataError("attack: series length " + std::to_string(test_ds.length()) +
                        " does not match model input length " +
                        std::to_string(model.arch.input_length));
    if (test_ds.num_classes() > model.arch.num_classes)
        throw DataError("attack: dataset has more classes than the model");

    auto camp = attack_dataset(model, test_ds, cfg);
    export_dataset(camp.perturbed, out_file(out, "perturbed.txt"));
    atomic_write(out_file(out, "campaign.json"), campaign_json(camp).dump(2) + "\n");

    Manifest m("attack", out);
    m.param("model", model_path);
    m.param("test", test_path);
    m.param("method", method_name(cfg.method));
    m.param("epsilon", cfg.epsilon);
    if (cfg.method == AttackMethod::Bim) {
        m.param("alpha", cfg.alpha);
        m.param("iterations", cfg.iterations);
        m.param("recompute_label", cfg.recompute_label);
    }
    m.input(model_path);
    m.input(test_path);
    m.output(out_file(out, "perturbed.txt"));
    m.output(out_file(out, "campaign.json"));
    m.j["results"] = {{"original_accuracy", camp.original_accuracy},
                      {"attacked_accuracy", camp.attacked_accuracy},
                      {"accuracy_variation", camp.accuracy_variation}};
    m.write();

    std::printf("original accuracy: %.4f\nattacked accuracy: %.4f\n", camp.original_accuracy,
                camp.attacked_accuracy);
    return 0;
}

int cmd_sweep(const std::string& model_path, const std::string& test_path,
              const std::string& method, std::vector<double> epsilons, const std::string& out) {
    auto model = load_checkpoint(model_path);
    auto test_ds = load_ucr(test_path, test_path, fs::path(test_path).stem().string()).second;

    bool was_sorted = std::is_sorted(epsilons.begin(), epsilons.end());
    if (!was_sorted) std::sort(epsilons.begin(), epsilons.end());

    auto sweep = epsilon_sweep(model, test_ds, method_from_name(method), epsilons);
    std::ostringstream csv;
    csv << "epsilon,accuracy\n";
    for (const auto& p : sweep.points) csv << p.epsilon << ',' << p.attacked_accuracy << '\n';
    atomic_write(out_file(out, "curve.csv"), csv.str());

    Manifest m("sweep", out);
    m.param("model", model_path);
    m.param("test", test_path);
    m.param("method", method);
    m.param("epsilons", epsilons);
    if (!was_sorted) m.note("epsilon list was unsorted; sorted ascending before execution");
    m.input(model_path);
    m.input(test_path);
    m.output(out_file(out, "curve.csv"));
    m.write();

    for (const auto& p : sweep.points)
        std::printf("epsilon %.4f -> accuracy %.4f\n", p.epsilon, p.attacked_accuracy);
    return 0;
}

int cmd_transfer(const std::string& target_path, const std::string& adversarial_path,
                 const std::string& labels_path, const std::string& out) {
    auto target = load_checkpoint(target_path);
    auto [clean, adversarial] = load_ucr(labels_path, adversarial_path,
                                         fs::path(adversarial_path).stem().string());
    clean.split = Split::Test;
    auto res = transfer_evaluate(target, adversarial, clean);

    json j{{"target", target_path},
           {"adversarial", adversarial_path},
           {"clean", labels_path},
           {"original_accuracy", res.original_accuracy},
           {"adversarial_accuracy", res.adversarial_accuracy},
           {"drop", res.drop}};
    atomic_write(out_file(out, "transfer.json"), j.dump(2) + "\n");

    Manifest m("transfer", out);
    m.param("target", target_path);
    m.param("adversarial", adversarial_path);
    m.param("labels", labels_path);
    m.input(target_path);
    m.input(adversarial_path);
    m.input(labels_path);
    m.output(out_file(out, "transfer.json"));
    m.j["results"] = j;
    m.write();

    std::printf("original accuracy: %.4f\nadversarial accuracy: %.4f\ndrop: %.4f\n",
                res.original_accuracy, res.adversarial_accuracy, res.drop);
    return 0;
}

int cmd_mds(const std::string& model_path, const std::string& test_path,
            const std::string& adversarial_path, const std::string& out) {
    auto model = load_checkpoint(model_path);
    auto [clean, adversarial] = load_ucr(test_path, adversarial_path,
                                         fs::path(test_path).stem().string());
    clean.split = Split::Test;
    if (clean.length() != model.arch.input_length)
        throw DataError("mds: series length does not match the model");

    // joint embedding of original and perturbed instances in GAP space
    std::vector<std::vector<double>> feats;
    auto gap_of = [&](const TimeSeries& s) {
        auto f = gap_features(model, s);
        return std::vector<double>(f.begin(), f.end());
    };
    for (const auto& s : clean.instances) feats.push_back(gap_of(s));
    for (const auto& s : adversarial.instances) feats.push_back(gap_of(s));

    auto dist = pairwise_euclidean(feats);
    auto emb = smacof_mds(dist);

    std::ostringstream csv;
    csv << "id,x,y,group,class\n";
    const int n_clean = clean.size();
    for (size_t i = 0; i < emb.points.size(); ++i) {
        bool orig = static_cast<int>(i) < n_clean;
        const auto& ds = orig ? clean : adversarial;
        int idx = orig ? static_cast<int>(i) : static_cast<int>(i) - n_clean;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", emb.points[i].first, emb.points[i].second);
        csv << i << ',' << buf << ',' << (orig ? "original" : "perturbed") << ','
            << ds.token_for(ds.labels[static_cast<size_t>(idx)]) << '\n';
    }
    atomic_write(out_file(out, "embedding.csv"), csv.str());

    Manifest m("mds", out);
    m.param("model", model_path);
    m.param("test", test_path);
    m.param("adversarial", adversarial_path);
    m.input(model_path);
    m.input(test_path);
    m.input(adversarial_path);
    m.output(out_file(out, "embedding.csv"));
    m.j["results"] = {{"stress", emb.stress}, {"iterations", emb.iterations_used}};
    m.write();

    std::printf("stress: %.6g after %d iterations\n", emb.stress, emb.iterations_used);
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out) {
    std::vector<CampaignSummary> rows;
    for (const auto& dir : run_dirs) {
        auto path = (fs::path(dir) / "campaign.json").string();
        std::ifstream in(path);
        if (!in) throw DataError("report: cannot open " + path);
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded()) throw DataError("report: invalid JSON in " + path);
        CampaignSummary s;
        s.dataset = j.at("dataset").get<std::string>();
        s.method = j.at("method").get<std::string>();
        s.epsilon = j.at("epsilon").get<double>();
        s.original_accuracy = j.at("original_accuracy").get<double>();
        s.attacked_accuracy = j.at("attacked_accuracy").get<double>();
        s.accuracy_variation = j.at("accuracy_variation").get<double>();
        rows.push_back(s);
    }
    auto rep = accuracy_variation_report(rows);
    atomic_write(out_file(out, "report.csv"), rep.to_csv());

    Manifest m("report", out);
    m.param("runs", run_dirs);
    for (const auto& dir : run_dirs) m.input((fs::path(dir) / "campaign.json").string());
    m.output(out_file(out, "report.csv"));

    // paired one-sided Wilcoxon (BIM reduces accuracy more than FGSM) over
    // datasets that have one campaign of each method
    std::map<std::string, std::pair<double, double>> paired;  // dataset -> (fgsm, bim)
    std::map<std::string, int> seen;
    for (const auto& r : rows) {
        if (r.method == "fgsm") {
            paired[r.dataset].first = r.accuracy_variation;
            seen[r.dataset] |= 1;
        } else if (r.method == "bim") {
            paired[r.dataset].second = r.accuracy_variation;
            seen[r.dataset] |= 2;
        }
    }
    std::vector<std::pair<double, double>> pairs;
    for (const auto& [ds, mask] : seen)
        if (mask == 3) pairs.push_back(paired[ds]);

    if (pairs.size() >= 2) {
        auto w = wilcoxon_signed_rank(pairs);
        json jw{{"pairs", pairs.size()},
                {"statistic", w.statistic},
                {"p_value", w.p_value},
                {"n_effective", w.n_effective},
                {"method", w.method == WilcoxonMethod::Exact ? "exact" : "normal-approximation"},
                {"degenerate", w.degenerate},
                {"alternative", "bim reduces accuracy more than fgsm"}};
        atomic_write(out_file(out, "wilcoxon.json"), jw.dump(2) + "\n");
        m.output(out_file(out, "wilcoxon.json"));
        m.j["results"] = jw;
        std::printf("wilcoxon over %zu pairs: W+ = %g, one-sided p = %g\n", pairs.size(),
                    w.statistic, w.p_value);
    } else {
        m.note("wilcoxon skipped: fewer than 2 fgsm/bim campaign pairs");
        std::printf("wilcoxon skipped: fewer than 2 fgsm/bim campaign pairs\n");
    }
    m.write();
    std::printf("wrote %s\n", out_file(out, "report.csv").c_str());
    return 0;
}

int cmd_makedata(const std::string& preset, uint64_t seed, const std::string& out) {
    auto spec = synthetic_preset(preset);
    auto [train_ds, test_ds] = make_synthetic(spec, seed);
    auto train_path = out_file(out, spec.name + "_TRAIN.txt");
    auto test_path = out_file(out, spec.name + "_TEST.txt");
    export_dataset(train_ds, train_path);
    export_dataset(test_ds, test_path);

    Manifest m("makedata", out);
    m.param("preset", preset);
    m.param("seed", seed);
    m.param("classes", spec.num_classes);
    m.param("length", spec.length);
    m.param("train_size", spec.train_size);
    m.param("test_size", spec.test_size);
    m.output(train_path);
    m.output(test_path);
    m.write();

    std::printf("wrote %s and %s\n", train_path.c_str(), test_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial attacks on deep time-series classifiers"};
    app.set_version_flag("--version", std::string("tsadv ") + kVersion);
    app.set_config("--config", "", "key=value config file; flags override it");
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker cap (current pipeline is single-threaded)");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a classifier on a UCR split pair");
    std::string train_path, test_path, arch = "resnet", out_dir;
    TrainConfig tcfg;
    bool znorm = false;
    train_cmd->add_option("--train", train_path, "training split file")->required();
    train_cmd->add_option("--test", test_path, "test split file")->required();
    train_cmd->add_option("--arch", arch)->check(CLI::IsMember({"resnet", "fcn"}));
    train_cmd->add_option("--epochs", tcfg.epochs);
    train_cmd->add_option("--batch", tcfg.batch_size);
    train_cmd->add_option("--lr", tcfg.learning_rate);
    train_cmd->add_option("--seed", tcfg.seed);
    train_cmd->add_flag("--znorm", znorm, "z-normalize series on load");
    train_cmd->add_flag("--plateau", tcfg.reduce_on_plateau, "halve lr on 50-epoch plateaus");
    train_cmd->add_option("--out", out_dir)->required();

    // attack
    auto* attack_cmd = app.add_subcommand("attack", "craft adversarial test instances");
    std::string model_path, method = "fgsm";
    AttackConfig acfg;
    bool alpha_set = false, iters_set = false;
    attack_cmd->add_option("--model", model_path, "checkpoint")->required();
    attack_cmd->add_option("--test", test_path)->required();
    attack_cmd->add_option("--method", method)->check(CLI::IsMember({"fgsm", "bim"}));
    attack_cmd->add_option("--epsilon", acfg.epsilon)->required();
    attack_cmd->add_option("--alpha", acfg.alpha)->each([&](const std::string&) { alpha_set = true; });
    attack_cmd->add_option("--iters", acfg.iterations)->each([&](const std::string&) { iters_set = true; });
    attack_cmd->add_flag("--recompute-label", acfg.recompute_label,
                         "re-predict the crafting label every iteration");
    attack_cmd->add_option("--out", out_dir)->required();

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "attack across an epsilon grid");
    std::vector<double> epsilons;
    sweep_cmd->add_option("--model", model_path)->required();
    sweep_cmd->add_option("--test", test_path)->required();
    sweep_cmd->add_option("--method", method)->check(CLI::IsMember({"fgsm", "bim"}));
    sweep_cmd->add_option("--epsilons", epsilons, "epsilon values")->required()->delimiter(',');
    sweep_cmd->add_option("--out", out_dir)->required();

    // transfer
    auto* transfer_cmd = app.add_subcommand("transfer", "black-box evaluation of a crafted set");
    std::string adversarial_path, labels_path;
    transfer_cmd->add_option("--target", model_path, "target checkpoint")->required();
    transfer_cmd->add_option("--adversarial", adversarial_path, "crafted UCR file")->required();
    transfer_cmd->add_option("--labels", labels_path, "clean test file with true labels")->required();
    transfer_cmd->add_option("--out", out_dir)->required();

    // mds
    auto* mds_cmd = app.add_subcommand("mds", "joint 2-D embedding of clean + perturbed sets");
    mds_cmd->add_option("--model", model_path)->required();
    mds_cmd->add_option("--test", test_path)->required();
    mds_cmd->add_option("--adversarial", adversarial_path)->required();
    mds_cmd->add_option("--out", out_dir)->required();

    // report
    auto* report_cmd = app.add_subcommand("report", "aggregate campaign JSONs");
    std::vector<std::string> run_dirs;
    report_cmd->add_option("--runs", run_dirs, "attack output directories")->required();
    report_cmd->add_option("--out", out_dir)->required();

    // makedata
    auto* make_cmd = app.add_subcommand("makedata", "generate a synthetic UCR-format dataset");
    std::string preset;
    uint64_t data_seed = 0;
    make_cmd->add_option("--preset", preset, "one of: coffee ham beef italypowerdemand twoleadecg")
        ->required();
    make_cmd->add_option("--seed", data_seed);
    make_cmd->add_option("--out", out_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*train_cmd) return cmd_train(train_path, test_path, arch, tcfg, znorm, out_dir);
        if (*attack_cmd) {
            acfg.method = method_from_name(method);
            if (acfg.method == AttackMethod::Bim) {
                if (!alpha_set) acfg.alpha = acfg.epsilon / 10.0;
                if (!iters_set) acfg.iterations = 10;
            }
            acfg.validate();
            return cmd_attack(model_path, test_path, acfg, out_dir);
        }
        if (*sweep_cmd) return cmd_sweep(model_path, test_path, method, epsilons, out_dir);
        if (*transfer_cmd) return cmd_transfer(model_path, adversarial_path, labels_path, out_dir);
        if (*mds_cmd) return cmd_mds(model_path, test_path, adversarial_path, out_dir);
        if (*report_cmd) return cmd_report(run_dirs, out_dir);
        if (*make_cmd) return cmd_makedata(preset, data_seed, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const DimensionError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}

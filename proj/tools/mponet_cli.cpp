#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mponet/analysis.hpp"
#include "mponet/experiment.hpp"
#include "mponet/serialize.hpp"

namespace {

using namespace mponet;

std::filesystem::path resolve_data_dir(const std::string& flag)
{
    if (!flag.empty())
        return flag;
    if (const char* env = std::getenv("MPONET_DATA_DIR"))
        return env;
    return {};
}

struct TrainArgs {
    std::string config_path, arch = "fc2", variant = "mpo", data_dir, out_dir = "out";
    std::size_t bond_dim = 16, runs = 5, chi = 0, jobs = 0;
    std::uint64_t seed = 1;
    long epochs = -1, batch_size = -1;
    double lr = -1.0, momentum = -1.0, alpha = -1.0;
    bool no_l2 = false;
};

// Flags override config-file values; epochs default per model is resolved by
// parse_config.
ExperimentConfig make_train_config(const TrainArgs& a, const CLI::App* cmd)
{
    nlohmann::json j = nlohmann::json::object();
    const bool have_file = !a.config_path.empty();
    if (have_file) {
        std::ifstream f(a.config_path);
        if (!f)
            throw UsageError("cannot open config file " + a.config_path);
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(a.config_path + ": bad JSON: " + e.what());
        }
    }
    auto given = [&](const std::string& name) { return cmd->count(name) > 0; };
    auto apply = [&](const char* flag, const char* key, const auto& value) {
        if (!have_file || given(flag))
            j[key] = value;
    };
    apply("--arch", "model", a.arch);
    apply("--variant", "variant", a.variant);
    apply("--bond-dim", "bond_dim", a.bond_dim);
    apply("--runs", "runs", a.runs);
    apply("--seed", "seed", a.seed);
    apply("--chi", "input_chi", a.chi);
    apply("--jobs", "jobs", a.jobs);
    apply("--out", "out_dir", a.out_dir);
    if (a.no_l2)
        j["l2"] = false;
    if (a.epochs >= 0)
        j["training"]["epochs"] = static_cast<std::size_t>(a.epochs);
    if (a.batch_size > 0)
        j["training"]["batch_size"] = static_cast<std::size_t>(a.batch_size);
    if (a.lr > 0)
        j["training"]["learning_rate"] = a.lr;
    if (a.momentum >= 0)
        j["training"]["momentum"] = a.momentum;
    if (a.alpha >= 0)
        j["training"]["l2_alpha"] = a.alpha;
    const auto dir = resolve_data_dir(a.data_dir);
    if (!dir.empty())
        j["data_dir"] = dir.string();

    ExperimentConfig cfg = parse_config(j);
    if (cfg.data_dir.empty())
        throw UsageError("no data directory (use --data-dir, the config file "
                         "or MPONET_DATA_DIR)");
    return cfg;
}

int cmd_train(const TrainArgs& args, const CLI::App* cmd)
{
    const ExperimentConfig cfg = make_train_config(args, cmd);
    const ExperimentResult res = run_experiment(cfg);
    std::printf("runs: %zu\n", res.reports.size());
    for (const RunReport& r : res.reports)
        std::printf("  seed %llu  final test accuracy %.4f\n",
                    static_cast<unsigned long long>(r.seed), r.final_test_accuracy);
    std::printf("mean test accuracy %.4f", res.stats.mean);
    if (res.stats.sigma)
        std::printf(" +- %.4f", *res.stats.sigma);
    std::printf("\n");
    if (res.ratio)
        std::printf("compression ratio %.4f\n", res.ratio->rho);
    std::printf("summary: %s\n", res.summary_file.string().c_str());
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_dir_flag,
             bool use_train_split, bool densify)
{
    const auto dir = resolve_data_dir(data_dir_flag);
    if (dir.empty())
        throw UsageError("no data directory (use --data-dir or MPONET_DATA_DIR)");
    LoadedModel lm = load_model(model_path);
    const DatasetSplit split = load_mnist_split(dir, use_train_split);
    Network net = densify ? densified_copy(lm.network) : std::move(lm.network);
    std::printf("accuracy %.6f\n", evaluate(net, split));
    return 0;
}

int cmd_entropy(const std::string& model_path, long layer_flag, long bond_flag,
                const std::string& out_path)
{
    LoadedModel lm = load_model(model_path);
    Network& net = lm.network;

    long layer_index = layer_flag;
    if (layer_index < 0) { // default: first MPO layer
        for (std::size_t i = 0; i < net.depth(); ++i)
            if (net.layer(i).kind() == "mpo_linear") {
                layer_index = static_cast<long>(i);
                break;
            }
        if (layer_index < 0)
            throw UsageError("model has no MPO layer");
    }
    if (layer_index >= static_cast<long>(net.depth()))
        throw UsageError("layer index out of range");
    const auto* mpo_layer =
        dynamic_cast<const MpoLinear*>(&net.layer(static_cast<std::size_t>(layer_index)));
    if (!mpo_layer)
        throw UsageError("layer " + std::to_string(layer_index) + " is not an MPO layer");

    std::vector<std::size_t> bonds;
    const std::size_t n = mpo_layer->mpo().n();
    if (bond_flag < 0)
        for (std::size_t b = 1; b < n; ++b)
            bonds.push_back(b);
    else
        bonds.push_back(static_cast<std::size_t>(bond_flag));

    nlohmann::json out = nlohmann::json::array();
    for (std::size_t b : bonds) {
        const EntropyReport rep = bond_entropy(mpo_layer->mpo(), b);
        out.push_back({{"layer", layer_index},
                       {"bond", rep.bond_index},
                       {"entropy", rep.entropy},
                       {"upper_bound", rep.upper_bound},
                       {"spectra", rep.spectra}});
        std::printf("layer %ld bond %zu: S = %.6f (bound ln = %.6f, spectra %zu)\n",
                    layer_index, rep.bond_index, rep.entropy, rep.upper_bound,
                    rep.spectra.size());
    }
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f)
            throw FormatError("cannot create " + out_path);
        f << out.dump(2) << "\n";
    } else {
        std::cout << out.dump(2) << "\n";
    }
    return 0;
}

int cmd_ratio(const std::string& config_path, const std::string& arch,
              std::size_t bond_dim)
{
    Model model;
    std::size_t d = bond_dim;
    if (!config_path.empty()) {
        const ExperimentConfig cfg = load_config_file(config_path);
        model = cfg.model;
        d = cfg.bond_dim;
    } else if (arch == "fc2") {
        model = Model::fc2;
    } else if (arch == "lenet5") {
        model = Model::lenet5;
    } else {
        throw UsageError("unknown architecture '" + arch + "'");
    }
    const RatioReport rep = ratio_report(model, d);
    std::size_t n_ori = 0, n_mpo = 0;
    std::printf("%-18s %12s %12s\n", "layer", "N_ori", "N_mpo");
    for (const RatioEntry& e : rep.layers) {
        std::printf("%-18s %12zu %12zu\n", e.name.c_str(), e.original, e.mpo);
        n_ori += e.original;
        n_mpo += e.mpo;
    }
    std::printf("%-18s %12zu %12zu\n", "total", n_ori, n_mpo);
    std::printf("rho = %.6f\n", rep.rho);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"matrix-product-operator neural networks on MNIST-format data"};
    app.require_subcommand(1);

    TrainArgs targs;
    CLI::App* train = app.add_subcommand(
        "train", "train m independently seeded runs and write reports");
    train->add_option("--config", targs.config_path, "JSON experiment config");
    train->add_option("--arch", targs.arch, "fc2 | lenet5")
        ->check(CLI::IsMember({"fc2", "lenet5"}));
    train->add_option("--variant", targs.variant, "dense | mpo")
        ->check(CLI::IsMember({"dense", "mpo"}));
    train->add_option("--bond-dim", targs.bond_dim, "FC2 first-layer bond dimension");
    train->add_option("--runs", targs.runs, "number of independent runs");
    train->add_option("--seed", targs.seed, "base seed (runs use seed..seed+m-1)");
    train->add_option("--epochs", targs.epochs, "training epochs");
    train->add_option("--batch-size", targs.batch_size, "mini-batch size");
    train->add_option("--lr", targs.lr, "learning rate");
    train->add_option("--momentum", targs.momentum, "SGD momentum");
    train->add_option("--alpha", targs.alpha, "L2 coefficient");
    train->add_option("--chi", targs.chi, "rank-chi input truncation (0 = off)");
    train->add_flag("--no-l2", targs.no_l2, "disable L2 regularization");
    train->add_option("--data-dir", targs.data_dir, "MNIST-format data directory");
    train->add_option("--out", targs.out_dir, "output directory");
    train->add_option("--jobs", targs.jobs, "concurrent runs (0 = all cores)");

    std::string eval_model, eval_data;
    bool eval_train = false, eval_densify = false;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a saved model");
    eval->add_option("--model", eval_model, "model archive")->required();
    eval->add_option("--data-dir", eval_data, "MNIST-format data directory");
    eval->add_flag("--train-split", eval_train, "evaluate on the training split");
    eval->add_flag("--densify", eval_densify, "densify MPO layers first (oracle)");

    std::string ent_model, ent_out;
    long ent_layer = -1, ent_bond = -1;
    CLI::App* entropy =
        app.add_subcommand("entropy", "entanglement entropy of a trained MPO layer");
    entropy->add_option("--model", ent_model, "model archive")->required();
    entropy->add_option("--layer", ent_layer, "network layer index (default: first MPO)");
    entropy->add_option("--bond", ent_bond, "bond index 1..n-1 (default: all)");
    entropy->add_option("--out", ent_out, "write the JSON report here");

    std::string ratio_config, ratio_arch = "fc2";
    std::size_t ratio_bond = 16;
    CLI::App* ratio =
        app.add_subcommand("ratio", "per-layer parameter counts and compression ratio");
    ratio->add_option("--config", ratio_config, "JSON experiment config");
    ratio->add_option("--arch", ratio_arch, "fc2 | lenet5")
        ->check(CLI::IsMember({"fc2", "lenet5"}));
    ratio->add_option("--bond-dim", ratio_bond, "FC2 first-layer bond dimension");

    try {
        app.parse(argc, argv);
        if (train->parsed())
            return cmd_train(targs, train);
        if (eval->parsed())
            return cmd_eval(eval_model, eval_data, eval_train, eval_densify);
        if (entropy->parsed())
            return cmd_entropy(ent_model, ent_layer, ent_bond, ent_out);
        if (ratio->parsed())
            return cmd_ratio(ratio_config, ratio_arch, ratio_bond);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return 2;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "divergence: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

#include "mponet/experiment.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include "mponet/serialize.hpp"

namespace mponet {

namespace {

std::size_t default_epochs(Model model)
{
    return model == Model::fc2 ? 25 : 40;
}

std::string model_name(Model m)
{
    return m == Model::fc2 ? "fc2" : "lenet5";
}

std::string variant_name(Variant v)
{
    return v == Variant::dense ? "dense" : "mpo";
}

Network build_network(const ExperimentConfig& cfg, std::uint64_t seed)
{
    if (cfg.model == Model::fc2)
        return build_fc2(cfg.variant, cfg.bond_dim, seed);
    return build_lenet5(cfg.variant, seed);
}

} // namespace

double effective_alpha(const ExperimentConfig& cfg)
{
    return cfg.l2 ? cfg.training.l2_alpha : 0.0;
}

ExperimentConfig parse_config(const nlohmann::json& j)
{
    ExperimentConfig cfg;
    if (j.contains("model")) {
        const std::string m = j.at("model").get<std::string>();
        if (m == "fc2")
            cfg.model = Model::fc2;
        else if (m == "lenet5")
            cfg.model = Model::lenet5;
        else
            throw UsageError("config: unknown model '" + m + "'");
    }
    if (j.contains("variant")) {
        const std::string v = j.at("variant").get<std::string>();
        if (v == "dense")
            cfg.variant = Variant::dense;
        else if (v == "mpo")
            cfg.variant = Variant::mpo;
        else
            throw UsageError("config: unknown variant '" + v + "'");
    }
    cfg.bond_dim = j.value("bond_dim", cfg.bond_dim);
    cfg.runs = j.value("runs", cfg.runs);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.data_dir = j.value("data_dir", std::string());
    cfg.out_dir = j.value("out_dir", cfg.out_dir.string());
    cfg.input_chi = j.value("input_chi", cfg.input_chi);
    cfg.l2 = j.value("l2", cfg.l2);
    cfg.jobs = j.value("jobs", cfg.jobs);

    TrainingConfig& t = cfg.training;
    t.epochs = default_epochs(cfg.model);
    if (j.contains("training")) {
        const nlohmann::json& tj = j.at("training");
        t.learning_rate = tj.value("learning_rate", t.learning_rate);
        t.momentum = tj.value("momentum", t.momentum);
        t.l2_alpha = tj.value("l2_alpha", t.l2_alpha);
        t.batch_size = tj.value("batch_size", t.batch_size);
        t.epochs = tj.value("epochs", t.epochs);
        t.lr_decay_epoch = tj.value("lr_decay_epoch", t.lr_decay_epoch);
        t.lr_decay_factor = tj.value("lr_decay_factor", t.lr_decay_factor);
    }
    if (cfg.runs == 0)
        throw UsageError("config: runs must be >= 1");
    if (cfg.variant == Variant::mpo && cfg.bond_dim == 0)
        throw UsageError("config: bond_dim must be >= 1");
    return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f)
        throw UsageError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad JSON: " + e.what());
    }
    return parse_config(j);
}

nlohmann::json config_json(const ExperimentConfig& cfg)
{
    return {{"model", model_name(cfg.model)},
            {"variant", variant_name(cfg.variant)},
            {"bond_dim", cfg.bond_dim},
            {"runs", cfg.runs},
            {"seed", cfg.seed},
            {"data_dir", cfg.data_dir.string()},
            {"out_dir", cfg.out_dir.string()},
            {"input_chi", cfg.input_chi},
            {"l2", cfg.l2},
            {"training",
             {{"learning_rate", cfg.training.learning_rate},
              {"momentum", cfg.training.momentum},
              {"l2_alpha", cfg.training.l2_alpha},
              {"batch_size", cfg.training.batch_size},
              {"epochs", cfg.training.epochs},
              {"lr_decay_epoch", cfg.training.lr_decay_epoch},
              {"lr_decay_factor", cfg.training.lr_decay_factor}}}};
}

std::string config_hash(const ExperimentConfig& cfg)
{
    // FNV-1a over the canonical JSON text
    const std::string text = config_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_csv(const std::filesystem::path& path, const RunReport& report)
{
    std::ofstream f(path);
    if (!f)
        throw FormatError("cannot create " + path.string());
    f << "epoch,train_loss,train_acc,test_acc\n";
    char line[160];
    for (const EpochRecord& r : report.epochs) {
        std::snprintf(line, sizeof(line), "%zu,%.10g,%.10g,%.10g\n", r.epoch,
                      r.train_loss, r.train_acc, r.test_acc);
        f << line;
    }
}

nlohmann::json summary_json(const ExperimentConfig& cfg,
                            const std::vector<RunReport>& reports)
{
    std::vector<double> accs;
    std::vector<std::uint64_t> seeds;
    for (const RunReport& r : reports) {
        accs.push_back(r.final_test_accuracy);
        seeds.push_back(r.seed);
    }
    const RunStatistics st = run_stats(accs);

    nlohmann::json j;
    j["config"] = config_json(cfg);
    j["config_hash"] = config_hash(cfg);
    j["seeds"] = seeds;
    j["test_accuracies"] = accs;
    j["mean_test_accuracy"] = st.mean;
    if (st.sigma)
        j["sigma"] = *st.sigma;
    if (cfg.variant == Variant::mpo) {
        const RatioReport rr = ratio_report(cfg.model, cfg.bond_dim);
        nlohmann::json layers = nlohmann::json::array();
        std::size_t n_mpo = 0, n_ori = 0;
        for (const RatioEntry& e : rr.layers) {
            layers.push_back(
                {{"layer", e.name}, {"n_ori", e.original}, {"n_mpo", e.mpo}});
            n_mpo += e.mpo;
            n_ori += e.original;
        }
        j["replaced_layers"] = layers;
        j["mpo_params"] = n_mpo;
        j["original_params"] = n_ori;
        j["compression_ratio"] = rr.rho;
    }
    return j;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    if (cfg.data_dir.empty())
        throw UsageError("no data directory configured (flag, config file or "
                         "MPONET_DATA_DIR)");
    std::filesystem::create_directories(cfg.out_dir);

    DatasetSplit train_split = load_mnist_split(cfg.data_dir, true);
    DatasetSplit test_split = load_mnist_split(cfg.data_dir, false);
    if (cfg.input_chi > 0) {
        rank_truncate_split(train_split, {cfg.input_chi});
        rank_truncate_split(test_split, {cfg.input_chi});
    }

    ExperimentResult result;
    result.reports.resize(cfg.runs);
    result.model_files.resize(cfg.runs);
    result.csv_files.resize(cfg.runs);

    std::vector<std::exception_ptr> errors(cfg.runs);
    std::atomic<std::size_t> next_run{0};
    const std::size_t workers =
        std::min<std::size_t>(cfg.runs, cfg.jobs ? cfg.jobs
                                                 : std::thread::hardware_concurrency());

    auto worker = [&]() {
        for (;;) {
            const std::size_t r = next_run.fetch_add(1);
            if (r >= cfg.runs)
                return;
            try {
                TrainingConfig tc = cfg.training;
                tc.seed = cfg.seed + r;
                tc.l2_alpha = effective_alpha(cfg);
                Network net = build_network(cfg, tc.seed);
                RunReport report = train(net, train_split, test_split, tc);

                const auto csv = cfg.out_dir / ("run_" + std::to_string(r) + ".csv");
                write_csv(csv, report);
                const auto model =
                    cfg.out_dir / ("run_" + std::to_string(r) + ".model");
                save_model(model, net,
                           {{"seed", tc.seed},
                            {"config_hash", config_hash(cfg)},
                            {"model", model_name(cfg.model)},
                            {"variant", variant_name(cfg.variant)}});

                result.reports[r] = std::move(report);
                result.csv_files[r] = csv;
                result.model_files[r] = model;
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };

    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::max<std::size_t>(workers, 1); ++w)
        pool.emplace_back(worker);
    for (std::thread& t : pool)
        t.join();
    for (const std::exception_ptr& e : errors)
        if (e)
            std::rethrow_exception(e);

    std::vector<double> accs;
    for (const RunReport& r : result.reports)
        accs.push_back(r.final_test_accuracy);
    result.stats = run_stats(accs);
    if (cfg.variant == Variant::mpo)
        result.ratio = ratio_report(cfg.model, cfg.bond_dim);

    result.summary_file = cfg.out_dir / "summary.json";
    std::ofstream f(result.summary_file);
    f << summary_json(cfg, result.reports).dump(2) << "\n";
    return result;
}

} // namespace mponet

#include "alcove/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "alcove/dataset.hpp"
#include "alcove/harness.hpp"
#include "alcove/results.hpp"
#include "alcove/stats.hpp"

namespace alcove {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SynthArgs {
    int classes = 10;
    int per_class = 100;
    int dim = 32;
    double sep = 8.0;
    std::uint64_t seed = 1;
    std::string out;
    bool force = false;
};

// Flags shared by `run` and `bench`.
struct RunArgs {
    std::string data;
    std::string out;
    std::string strategies;
    std::vector<std::uint64_t> seeds;
    int iterations = 20;
    int budget = 0;
    std::string init = "auto";
    std::optional<int> m;
    std::optional<double> rho;
    std::optional<int> mc;
    std::optional<double> beta;
    std::optional<double> purity;
    std::optional<double> eps_scale;
    std::optional<int> max_clusters;
    std::optional<int> knn;
    std::optional<int> epochs;
    bool diversify = false;
    int div_k = 50;
    bool inference_dropout = false;
    bool literal = false;
    bool semisup = false;
    bool force = false;
};

struct StatsArgs {
    std::vector<std::string> results;
    std::string out;
    bool force = false;
};

void add_run_options(CLI::App& cmd, RunArgs& a, bool single) {
    cmd.add_option("--data", a.data, "Dataset directory or manifest")->required();
    cmd.add_option("--out", a.out, "Output directory (results.csv + results.json); stdout when omitted");
    if (single)
        cmd.add_option("--strategy", a.strategies, "Query strategy id, optionally suffixed +div")->required();
    else
        cmd.add_option("--strategies", a.strategies, "Comma-separated strategy ids, optionally suffixed +div (default: all)");
    cmd.add_option("--seeds", a.seeds, "Comma-separated seeds (default 1,10,100,1000,10000)")->delimiter(',');
    cmd.add_option("--iterations", a.iterations, "AL iterations T")->check(CLI::PositiveNumber);
    cmd.add_option("--budget", a.budget, "Labels per iteration (default: number of classes)")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--init", a.init, "Initial pool: auto|random|centroid|own (alias: none)");
    cmd.add_option("--m", a.m, "DropQuery dropout passes M");
    cmd.add_option("--rho", a.rho, "Feature dropout ratio for training and querying");
    cmd.add_option("--mc", a.mc, "MC dropout samples for BALD/PowerBALD");
    cmd.add_option("--beta", a.beta, "PowerBALD exponent");
    cmd.add_option("--purity", a.purity, "ProbCover purity threshold");
    cmd.add_option("--eps-scale", a.eps_scale, "ALFA-Mix epsilon scale (eps = scale / sqrt(d))");
    cmd.add_option("--max-clusters", a.max_clusters, "TypiClust cluster cap");
    cmd.add_option("--knn", a.knn, "TypiClust typicality neighbours");
    cmd.add_option("--epochs", a.epochs, "Classifier training epochs");
    cmd.add_flag("--diversify", a.diversify, "Shortlist-and-cluster score-based strategies");
    cmd.add_option("--div-k", a.div_k, "Shortlist multiplier for --diversify")->check(CLI::PositiveNumber);
    cmd.add_flag("--inference-dropout", a.inference_dropout, "Score under one dropout pass when diversifying");
    cmd.add_flag("--literal-candidates", a.literal, "DropQuery: keep the mostly-consistent points instead");
    cmd.add_flag("--semisup", a.semisup, "Train on label-propagated pseudo-labels");
    cmd.add_flag("--force", a.force, "Overwrite existing outputs");
}

QuerySpec make_spec(StrategyKind kind, const RunArgs& a) {
    QuerySpec s;
    s.kind = kind;
    if (a.diversify && supports_diversify(kind)) s.diversify = DiversifyOptions{a.div_k, a.inference_dropout};
    if (a.m) s.dq_m = *a.m;
    if (a.rho) s.dropout_rho = *a.rho;
    if (a.mc) s.mc_samples = *a.mc;
    if (a.beta) s.power_beta = *a.beta;
    if (a.purity) s.probcover_purity = *a.purity;
    if (a.eps_scale) s.alfamix_eps_scale = *a.eps_scale;
    if (a.max_clusters) s.typiclust_max_clusters = *a.max_clusters;
    if (a.knn) s.typiclust_knn = *a.knn;
    s.dq_literal = a.literal;
    return s;
}

std::vector<QuerySpec> parse_specs(const std::string& list, const RunArgs& a) {
    std::vector<QuerySpec> out;
    if (list.empty()) {
        for (StrategyKind k : all_strategies()) out.push_back(make_spec(k, a));
        return out;
    }
    std::stringstream ss(list);
    std::string name;
    while (std::getline(ss, name, ',')) {
        // "<id>+div" selects the diversified variant of a single entry.
        const bool div = name.size() > 4 && name.ends_with("+div");
        const auto kind = parse_strategy(div ? std::string_view(name).substr(0, name.size() - 4) : name);
        if (!kind) throw UsageError(fmt::format("unknown strategy '{}'", name));
        QuerySpec spec = make_spec(*kind, a);
        if (div) {
            if (!supports_diversify(*kind)) throw UsageError(fmt::format("'{}' cannot be diversified", name));
            spec.diversify = DiversifyOptions{a.div_k, a.inference_dropout};
        }
        out.push_back(spec);
    }
    if (out.empty()) throw UsageError("no strategies given");
    return out;
}

RunConfig make_config(const RunArgs& a) {
    RunConfig c;
    c.iterations = a.iterations;
    if (!a.seeds.empty()) c.seeds = a.seeds;
    c.budget = a.budget;
    const auto init = parse_init(a.init);
    if (!init) throw UsageError(fmt::format("unknown --init '{}'", a.init));
    c.init = *init;
    if (a.rho) c.train.dropout_rho = *a.rho;
    if (a.epochs) c.train.epochs = *a.epochs;
    c.semisupervised = a.semisup;
    if (a.m && (*a.m < 1 || *a.m % 2 == 0)) throw UsageError("--m must be a positive odd integer");
    if (a.rho && !(*a.rho >= 0.0 && *a.rho < 1.0)) throw UsageError("--rho must lie in [0, 1)");
    return c;
}

// Refuses to clobber unless forced; creates the directory.
void prepare_out_dir(const fs::path& dir, const std::vector<std::string>& files, bool force) {
    fs::create_directories(dir);
    for (const auto& f : files)
        if (fs::exists(dir / f) && !force)
            throw std::runtime_error(fmt::format("{} exists; pass --force to overwrite", (dir / f).string()));
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    f << text;
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    const EmbeddingDataset ds = generate_synthetic(a.classes, a.per_class, a.dim, a.sep, a.seed);
    const fs::path manifest = save_dataset(ds, a.out, a.force);
    out << manifest.string() << '\n';
    return kExitOk;
}

int cmd_grid(const RunArgs& a, const std::vector<QuerySpec>& specs, std::ostream& out, std::ostream& err) {
    const RunConfig config = make_config(a);
    const EmbeddingDataset ds = load_dataset(a.data);
    if (!a.out.empty()) prepare_out_dir(a.out, {"results.csv", "results.json"}, a.force);

    const auto cells = run_bench(ds, specs, config, thread_cap_from_env());

    std::vector<RunRecord> records;
    bool failed = false;
    for (const BenchCell& c : cells) {
        if (c.record) {
            records.push_back(*c.record);
        } else {
            failed = true;
            err << fmt::format("error: {} seed {}: {}\n", c.strategy, c.seed, c.error);
        }
    }

    nlohmann::json echo = config_to_json(config);
    echo["data"] = a.data;
    nlohmann::json strategies = nlohmann::json::array();
    for (const auto& s : specs) {
        RunConfig one = config;
        one.strategy = s;
        strategies.push_back(config_to_json(one)["strategy"]);
    }
    echo["strategy"] = specs.size() == 1 ? strategies.front() : nlohmann::json(nullptr);
    echo["strategies"] = strategies;

    std::ostringstream csv;
    write_records_csv(csv, records);
    if (a.out.empty()) {
        out << csv.str();
    } else {
        write_text(fs::path(a.out) / "results.csv", csv.str());
        write_text(fs::path(a.out) / "results.json", results_metadata(echo, cells).dump(2) + "\n");
        out << (fs::path(a.out) / "results.csv").string() << '\n';
    }
    return failed ? kExitRuntime : kExitOk;
}

int cmd_stats(const StatsArgs& a, std::ostream& out) {
    std::vector<DatasetRecords> groups;
    for (const auto& path : a.results) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error(fmt::format("cannot open {}", path));
        groups.push_back({path, read_records_csv(f)});
    }
    const WinMatrix m = win_matrix(groups);
    std::ostringstream csv;
    write_win_matrix_csv(csv, m);
    if (a.out.empty()) {
        out << csv.str();
    } else {
        prepare_out_dir(a.out, {"win_matrix.csv", "win_matrix.json"}, a.force);
        write_text(fs::path(a.out) / "win_matrix.csv", csv.str());
        write_text(fs::path(a.out) / "win_matrix.json", win_matrix_json(m).dump(2) + "\n");
        out << (fs::path(a.out) / "win_matrix.csv").string() << '\n';
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"alcove: feature-space active learning simulator"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic Gaussian-blob embedding dataset");
    synth_cmd->add_option("--classes", synth.classes, "Number of classes")->check(CLI::Range(2, 1 << 20));
    synth_cmd->add_option("--per-class", synth.per_class, "Samples per class")->check(CLI::Range(2, 1 << 24));
    synth_cmd->add_option("--dim", synth.dim, "Feature dimension")->check(CLI::Range(2, 1 << 16));
    synth_cmd->add_option("--sep", synth.sep, "Distance of each class mean from the origin")
        ->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--seed", synth.seed, "Generator seed");
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();
    synth_cmd->add_flag("--force", synth.force, "Overwrite an existing dataset");

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Run one strategy over the configured seeds");
    add_run_options(*run_cmd, run_args, true);

    RunArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Run a strategies x seeds grid");
    add_run_options(*bench_cmd, bench_args, false);

    StatsArgs stats;
    auto* stats_cmd = app.add_subcommand("stats", "Paired t-test win matrix over one or more results files");
    stats_cmd->add_option("results", stats.results, "results.csv files, one per dataset setting")
        ->required()
        ->check(CLI::ExistingFile);
    stats_cmd->add_option("--out", stats.out, "Output directory; CSV to stdout when omitted");
    stats_cmd->add_flag("--force", stats.force, "Overwrite existing outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        if (app.get_subcommands().size() == 1)
            err << app.get_subcommands().front()->help();
        else
            err << app.help();
        return kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth, out);
        if (run_cmd->parsed()) return cmd_grid(run_args, parse_specs(run_args.strategies, run_args), out, err);
        if (bench_cmd->parsed()) return cmd_grid(bench_args, parse_specs(bench_args.strategies, bench_args), out, err);
        if (stats_cmd->parsed()) return cmd_stats(stats, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace alcove

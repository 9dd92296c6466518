// Command-line front end: wires the solver modules into reproducible batch
// experiments with machine-readable outputs.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <helmiter/experiments.hpp>

using namespace helmiter;

namespace {

std::vector<double> parse_k_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

std::vector<int> parse_shape_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"helmiter: Helmholtz solves through iterated modified-Poisson problems, "
                 "with stochastic convergence thresholds and spectral diagnostics"};
    app.set_help_flag("--help", "print help");  // frees -h / --h for the grid spacing
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run one experiment");
    run->set_help_flag("--help", "print help");
    std::string experiment, preset, k_list_csv, shapes_csv, config_file, alpha_policy = "k2";
    ExperimentConfig cfg;
    int shape = 0;
    double alpha = -1.0;

    run->add_option("experiment", experiment,
                    "thresholds | iterate | reference | spectral_sweep | mc_validate | "
                    "table1 | fig4 | fig5 | appendixA | appendixB")
        ->required();
    run->add_option("--config", config_file, "JSON config file (flags override it)");
    run->add_option("--shape", shape, "annular shape index 1..3");
    run->add_option("--shapes", shapes_csv, "comma list of shape indices (fig5, mc_validate)");
    run->add_option("--preset", preset,
                    "geometry preset: shape1|shape2|shape3|square-square-hole|waveguide|cavity|disk");
    run->add_option("--h", cfg.h, "grid spacing");
    run->add_option("--k", cfg.k, "wavenumber");
    run->add_option("--k-list", k_list_csv, "comma-separated wavenumbers");
    run->add_option("--alpha", alpha, "shift parameter (>= k^2)");
    run->add_option("--alpha-policy", alpha_policy, "'k2' keeps alpha = k^2 (default)");
    run->add_option("--N", cfg.iterations, "iteration count");
    run->add_option("--p", cfg.damping, "cavity damping rate");
    run->add_option("--paths", cfg.paths, "Monte Carlo path count");
    run->add_option("--dt", cfg.dt, "Monte Carlo time step (0 = auto)");
    run->add_option("--seed", cfg.seed, "master seed");
    run->add_option("--L-wid", cfg.L_wid, "waveguide width");
    run->add_option("--mode", cfg.mode, "waveguide transverse mode index");
    run->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
    run->add_option("--out", cfg.out_dir, "output directory");
    run->add_flag("--deterministic", cfg.deterministic,
                  "suppress timestamps so reruns are byte-identical");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_file.empty()) {
            std::ifstream in(config_file);
            if (!in) throw ExperimentError("experiments.config: cannot read " + config_file);
            nlohmann::json j;
            in >> j;
            ExperimentConfig file_cfg = experiment_config_from_json(j);
            // flags override file values
            if (run->count("--h") == 0) cfg.h = file_cfg.h;
            if (run->count("--k") == 0) cfg.k = file_cfg.k;
            if (run->count("--N") == 0) cfg.iterations = file_cfg.iterations;
            if (run->count("--p") == 0) cfg.damping = file_cfg.damping;
            if (run->count("--paths") == 0) cfg.paths = file_cfg.paths;
            if (run->count("--dt") == 0) cfg.dt = file_cfg.dt;
            if (run->count("--seed") == 0) cfg.seed = file_cfg.seed;
            if (run->count("--L-wid") == 0) cfg.L_wid = file_cfg.L_wid;
            if (run->count("--mode") == 0) cfg.mode = file_cfg.mode;
            if (run->count("--out") == 0) cfg.out_dir = file_cfg.out_dir;
            if (preset.empty()) preset = file_cfg.preset;
            if (k_list_csv.empty()) cfg.k_list = file_cfg.k_list;
            if (shapes_csv.empty()) cfg.shapes = file_cfg.shapes;
            if (alpha < 0 && file_cfg.alpha) cfg.alpha = file_cfg.alpha;
            cfg.deterministic = cfg.deterministic || file_cfg.deterministic;
        }
        cfg.experiment = experiment;
        if (shape > 0) cfg.preset = shape_preset_name(shape);
        if (!preset.empty()) cfg.preset = preset;
        if (!k_list_csv.empty()) cfg.k_list = parse_k_list(k_list_csv);
        if (!shapes_csv.empty()) cfg.shapes = parse_shape_list(shapes_csv);
        if (alpha >= 0) cfg.alpha = alpha;
        if (alpha_policy != "k2" && !cfg.alpha)
            throw ExperimentError("experiments.config: unknown alpha policy '" + alpha_policy +
                                  "' (use 'k2' or pass --alpha)");

        ExperimentResult res = run_experiment(cfg);
        nlohmann::json out = {{"experiment", cfg.experiment},
                              {"summary", res.summary},
                              {"files", res.files}};
        std::cout << out.dump(2) << std::endl;
        return 0;
    } catch (const std::exception& e) {
        // Error messages are prefixed "module.operation: detail".
        std::string what = e.what();
        std::string module_op = what.substr(0, what.find(':'));
        nlohmann::json err = {{"error", {{"operation", module_op}, {"message", what}}}};
        std::cerr << err.dump(2) << std::endl;
        return 1;
    }
}

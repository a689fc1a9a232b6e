// Command-line front end: training, evaluation, grid reports, channel
// diagnostics and the gradient-check suite.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <ercs/checkpoint.hpp>
#include <ercs/config.hpp>
#include <ercs/eval.hpp>
#include <ercs/gradcheck_suite.hpp>
#include <ercs/train.hpp>

namespace fs = std::filesystem;
using namespace ercs;

namespace {

std::vector<std::string> list_files(const std::string& dir, const std::string& ext) {
    if (!fs::is_directory(dir)) throw IoError(dir + ": not a directory");
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ext)
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw IoError(dir + ": no " + ext + " files");
    return paths;
}

std::vector<Tensor> load_images(const std::string& dir) {
    std::vector<Tensor> images;
    for (const auto& path : list_files(dir, ".pgm"))
        images.push_back(read_pgm(path).to_tensor());
    return images;
}

std::vector<double> parse_rates(const std::string& csv) {
    std::vector<double> out;
    std::istringstream is(csv);
    std::string item;
    while (std::getline(is, item, ',')) out.push_back(std::stod(item));
    if (out.empty()) throw ConfigError("empty test-drops list");
    return out;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << text;
    if (!out) throw IoError(path + ": write failed");
}

int cmd_train(const std::string& config_path, const std::string& out_path,
              const std::string& images_flag, const std::string& report_path) {
    ExperimentConfig cfg = load_config(config_path);
    const std::string dir = images_flag.empty() ? cfg.train_images_dir : images_flag;
    if (dir.empty())
        throw ConfigError("no training image directory (flag --images or [paths] "
                          "train_images)");
    RngStream patch_rng(cfg.train.seed, 0xda7a);
    auto dataset = extract_patches(load_images(dir), cfg.train.patch_side,
                                   cfg.train.patch_count, patch_rng);
    TrainReport report;
    Model model = run_schedule(cfg.train, dataset, &report);
    save_checkpoint(model, out_path);
    std::string csv = "phase,epoch,mean_loss\n";
    char buf[64];
    for (int p = 0; p < 3; ++p)
        for (std::size_t e = 0; e < report.loss_curves[p].size(); ++e) {
            std::snprintf(buf, sizeof buf, "P%d,%zu,%.10g\n", p + 1, e,
                          report.loss_curves[p][e]);
            csv += buf;
        }
    if (!report_path.empty()) write_file(report_path, csv);
    std::cout << "checkpoint written to " << out_path << "\n";
    for (int p = 0; p < 3; ++p)
        if (!report.loss_curves[p].empty())
            std::cout << "P" << p + 1 << " final loss " << report.loss_curves[p].back()
                      << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& images_dir,
             const std::string& drops, std::size_t trials, std::uint64_t seed,
             const std::string& out_path) {
    Model model = load_checkpoint(ckpt);
    auto images = load_images(images_dir);
    const std::string id = fs::path(ckpt).stem().string();
    ReportTable table = run_grid({{id, &model}}, parse_rates(drops), images, trials, seed);
    const std::string csv = to_csv(table);
    if (out_path.empty())
        std::cout << csv;
    else
        write_file(out_path, csv);
    return 0;
}

int cmd_grid(const std::string& ckpt_dir, const std::string& images_dir,
             const std::string& drops, std::size_t trials, std::uint64_t seed,
             const std::string& out_path) {
    std::vector<Model> models;
    std::vector<std::pair<std::string, const Model*>> refs;
    std::vector<std::string> names;
    for (const auto& path : list_files(ckpt_dir, ".ckpt")) {
        models.push_back(load_checkpoint(path));
        names.push_back(fs::path(path).stem().string());
    }
    for (std::size_t i = 0; i < models.size(); ++i) refs.emplace_back(names[i], &models[i]);
    auto images = load_images(images_dir);
    ReportTable table = run_grid(refs, parse_rates(drops), images, trials, seed);
    const std::string csv = to_csv(table);
    if (out_path.empty())
        std::cout << csv;
    else
        write_file(out_path, csv);
    return 0;
}

int cmd_mask_stats(const std::string& model, double rate, std::size_t n,
                   std::uint64_t seed, double burst_mean_len, std::size_t masks) {
    RngStream rng(seed, 0x3a5c);
    double sum = 0.0, lo = 1.0, hi = 0.0;
    std::size_t runs = 0, zeros = 0;
    for (std::size_t i = 0; i < masks; ++i) {
        Mask m = model == "burst" ? draw_mask_burst({n}, rate, burst_mean_len, rng)
                                  : draw_mask_bernoulli({n}, rate, rng);
        sum += m.realized_rate;
        lo = std::min(lo, m.realized_rate);
        hi = std::max(hi, m.realized_rate);
        bool in_run = false;
        for (double v : m.values.data) {
            if (v == 0.0) {
                ++zeros;
                if (!in_run) ++runs;
                in_run = true;
            } else {
                in_run = false;
            }
        }
    }
    std::cout << "model " << model << " nominal rate " << rate << " entries " << n
              << " masks " << masks << "\n";
    std::cout << "realized rate: mean " << sum / static_cast<double>(masks) << " min " << lo
              << " max " << hi << "\n";
    if (zeros > 0)
        std::cout << "mean zero-run length: "
                  << static_cast<double>(zeros) / static_cast<double>(runs) << "\n";
    return 0;
}

int cmd_gradcheck(const std::string& config_path) {
    std::uint64_t seed = 1;
    if (!config_path.empty()) seed = load_config(config_path).train.seed;
    const double worst = run_gradcheck_suite(seed, &std::cout);
    std::cout << "max relative error " << worst << "\n";
    if (worst >= 1e-4) {
        std::cerr << "gradcheck FAILED (threshold 1e-4)\n";
        return 1;
    }
    std::cout << "gradcheck OK\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"error-resilient compressive sensing workbench"};
    app.require_subcommand(1);

    std::string config_path, out_path, images_dir, report_path, ckpt_path, ckpt_dir;
    std::string drops = "0,0.1,0.2,0.3";
    std::string mask_model = "bernoulli";
    double rate = 0.1, burst_mean_len = 8.0;
    std::size_t trials = 10, n = 10000, masks = 100;
    std::uint64_t seed = 42;

    auto* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("--config", config_path)->required();
    train->add_option("--out", out_path)->required();
    train->add_option("--images", images_dir);
    train->add_option("--report", report_path);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint over test drop rates");
    eval->add_option("--ckpt", ckpt_path)->required();
    eval->add_option("--images", images_dir)->required();
    eval->add_option("--test-drops", drops);
    eval->add_option("--trials", trials);
    eval->add_option("--seed", seed);
    eval->add_option("--out", out_path);

    auto* grid = app.add_subcommand("grid", "evaluate every checkpoint in a directory");
    grid->add_option("--configs", ckpt_dir, "directory of .ckpt files")->required();
    grid->add_option("--images", images_dir)->required();
    grid->add_option("--test-drops", drops);
    grid->add_option("--trials", trials);
    grid->add_option("--seed", seed);
    grid->add_option("--out", out_path);

    auto* stats = app.add_subcommand("mask-stats", "realized-rate statistics of a channel");
    stats->add_option("--model", mask_model)->check(CLI::IsMember({"bernoulli", "burst"}));
    stats->add_option("--rate", rate);
    stats->add_option("--n", n);
    stats->add_option("--seed", seed);
    stats->add_option("--burst-mean-len", burst_mean_len);
    stats->add_option("--masks", masks);

    auto* gc = app.add_subcommand("gradcheck", "run the finite-difference suite");
    gc->add_option("--config", config_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (train->parsed()) return cmd_train(config_path, out_path, images_dir, report_path);
        if (eval->parsed()) return cmd_eval(ckpt_path, images_dir, drops, trials, seed,
                                            out_path);
        if (grid->parsed()) return cmd_grid(ckpt_dir, images_dir, drops, trials, seed,
                                            out_path);
        if (stats->parsed())
            return cmd_mask_stats(mask_model, rate, n, seed, burst_mean_len, masks);
        if (gc->parsed()) return cmd_gradcheck(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

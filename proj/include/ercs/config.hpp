#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ercs/channel.hpp"
#include "ercs/train.hpp"

namespace ercs {

// Experiment configuration, parsed from flat `key = value` text with
// `[section]` headers and `#` comments. Grammar:
//
//   [geometry]  block_side, subrate, levels, p2_layers, p2_channels,
//               p3_layers, p3_channels
//   [channel]   model = bernoulli|burst, regime = fixed|uniform,
//               rate (fixed), rate_lo / rate_hi (uniform), burst_mean_len
//   [training]  patch_count, patch_side, batch_size,
//               epochs_p1/p2/p3, lr_p1/p2/p3, seed
//   [eval]      test_drops (comma list), trials, seed
//   [paths]     train_images, test_images
//
// Unknown keys are rejected; all violations are reported together,
// each with its section-qualified field name.
struct ExperimentConfig {
    TrainConfig train;
    std::vector<double> eval_test_drops = {0.0, 0.1, 0.2, 0.3};
    std::size_t eval_trials = 10;
    std::uint64_t eval_seed = 42;
    std::string train_images_dir;
    std::string test_images_dir;
};

namespace detail {

struct ConfigReader {
    std::map<std::string, std::string> kv;
    std::vector<std::string> errors;
    std::vector<std::string> seen;

    template <typename T>
    void get(const std::string& key, T& out) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        seen.push_back(key);
        std::istringstream is(it->second);
        T v{};
        if (!(is >> v) || !(is >> std::ws).eof())
            errors.push_back(key + ": cannot parse '" + it->second + "'");
        else
            out = v;
    }

    void get(const std::string& key, std::string& out) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        seen.push_back(key);
        out = it->second;
    }

    void get_list(const std::string& key, std::vector<double>& out) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        seen.push_back(key);
        std::vector<double> vals;
        std::istringstream is(it->second);
        std::string item;
        while (std::getline(is, item, ',')) {
            std::istringstream vi(item);
            double v;
            if (!(vi >> v) || !(vi >> std::ws).eof()) {
                errors.push_back(key + ": cannot parse list item '" + item + "'");
                return;
            }
            vals.push_back(v);
        }
        if (vals.empty())
            errors.push_back(key + ": empty list");
        else
            out = std::move(vals);
    }
};

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::string& text) {
    detail::ConfigReader r;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                r.errors.push_back("line " + std::to_string(lineno) + ": malformed section");
                continue;
            }
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            r.errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        const std::string key = section + "." + detail::trim(line.substr(0, eq));
        if (r.kv.count(key))
            r.errors.push_back(key + ": duplicate key");
        else
            r.kv[key] = detail::trim(line.substr(eq + 1));
    }

    ExperimentConfig cfg;
    Geometry& g = cfg.train.geom;
    r.get("geometry.block_side", g.block_side);
    r.get("geometry.subrate", g.subrate);
    r.get("geometry.levels", g.levels);
    r.get("geometry.p2_layers", g.p2_layers);
    r.get("geometry.p2_channels", g.p2_channels);
    r.get("geometry.p3_layers", g.p3_layers);
    r.get("geometry.p3_channels", g.p3_channels);

    std::string model = "bernoulli", regime = "fixed";
    double rate = 0.0, rate_lo = 0.0, rate_hi = 0.0;
    r.get("channel.model", model);
    r.get("channel.regime", regime);
    r.get("channel.rate", rate);
    r.get("channel.rate_lo", rate_lo);
    r.get("channel.rate_hi", rate_hi);
    r.get("channel.burst_mean_len", cfg.train.channel.burst_mean_len);
    if (model == "bernoulli")
        cfg.train.channel.model = ChannelModel::bernoulli;
    else if (model == "burst")
        cfg.train.channel.model = ChannelModel::burst;
    else
        r.errors.push_back("channel.model: unknown '" + model + "'");
    if (regime == "fixed") {
        cfg.train.channel.vary = false;
        cfg.train.channel.rate_lo = cfg.train.channel.rate_hi = rate;
    } else if (regime == "uniform") {
        cfg.train.channel.vary = true;
        cfg.train.channel.rate_lo = rate_lo;
        cfg.train.channel.rate_hi = rate_hi;
    } else {
        r.errors.push_back("channel.regime: unknown '" + regime + "'");
    }

    r.get("training.patch_count", cfg.train.patch_count);
    r.get("training.patch_side", cfg.train.patch_side);
    r.get("training.batch_size", cfg.train.batch_size);
    r.get("training.epochs_p1", cfg.train.epochs[0]);
    r.get("training.epochs_p2", cfg.train.epochs[1]);
    r.get("training.epochs_p3", cfg.train.epochs[2]);
    r.get("training.lr_p1", cfg.train.lr[0]);
    r.get("training.lr_p2", cfg.train.lr[1]);
    r.get("training.lr_p3", cfg.train.lr[2]);
    r.get("training.seed", cfg.train.seed);

    r.get_list("eval.test_drops", cfg.eval_test_drops);
    r.get("eval.trials", cfg.eval_trials);
    r.get("eval.seed", cfg.eval_seed);
    r.get("paths.train_images", cfg.train_images_dir);
    r.get("paths.test_images", cfg.test_images_dir);

    for (const auto& [key, value] : r.kv) {
        bool known = false;
        for (const auto& s : r.seen)
            if (s == key) {
                known = true;
                break;
            }
        if (!known) r.errors.push_back(key + ": unknown key");
    }

    try {
        cfg.train.validate();
    } catch (const ConfigError& e) {
        r.errors.push_back(e.what());
    }
    for (double d : cfg.eval_test_drops)
        if (d < 0.0 || d > 0.5)
            r.errors.push_back("eval.test_drops: rate " + std::to_string(d) +
                               " out of [0, 0.5]");
    if (cfg.eval_trials < 1) r.errors.push_back("eval.trials: must be >= 1");

    if (!r.errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : r.errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

}  // namespace ercs

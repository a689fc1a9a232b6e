#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ercs/channel.hpp"
#include "ercs/model.hpp"
#include "ercs/pgm.hpp"
#include "ercs/tensor.hpp"

namespace ercs {

inline constexpr double kPsnrCap = 99.0;  // dB reported for zero MSE

// Peak scale is 1.0 (images are normalized on load).
inline double psnr(const Tensor& reference, const Tensor& test) {
    require_same_shape(reference, test, "psnr");
    double acc = 0.0;
    for (std::size_t i = 0; i < reference.numel(); ++i) {
        const double d = reference.data[i] - test.data[i];
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(reference.numel());
    if (mse == 0.0) return kPsnrCap;
    return 10.0 * std::log10(1.0 / mse);
}

struct EvalResult {
    std::array<double, 3> mean{};    // per phase P1/P2/P3, dB
    std::array<double, 3> stddev{};  // over (image, trial) samples
    std::size_t trials = 0;          // mask trials per image
};

// Fresh mask per (image, trial); deterministic under seed.
inline EvalResult evaluate(const Model& model, const std::vector<Tensor>& test_images,
                           double test_drop_rate, std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw ConfigError("evaluate: trials must be >= 1");
    if (test_images.empty()) throw ConfigError("evaluate: no test images");
    const ChannelSpec channel = ChannelSpec::fixed(test_drop_rate, model.train_channel.model);
    std::array<std::vector<double>, 3> samples;
    for (std::size_t i = 0; i < test_images.size(); ++i) {
        const PaddedImage padded =
            pad_image(test_images[i], model.geom.block_side, model.geom.levels);
        for (std::size_t t = 0; t < trials; ++t) {
            RngStream rng(seed, 0xe7a1 + i * 100003 + t);
            const PipelineOutput out =
                forward_pipeline(model, channel, padded.padded, rng, Phase::P3);
            samples[0].push_back(psnr(test_images[i], padded.crop(out.recon_p1)));
            samples[1].push_back(psnr(test_images[i], padded.crop(out.recon_p2)));
            samples[2].push_back(psnr(test_images[i], padded.crop(out.recon_p3)));
        }
    }
    EvalResult res;
    res.trials = trials;
    for (std::size_t p = 0; p < 3; ++p) {
        double mean = 0.0;
        for (double v : samples[p]) mean += v;
        mean /= static_cast<double>(samples[p].size());
        double var = 0.0;
        for (double v : samples[p]) var += (v - mean) * (v - mean);
        var /= static_cast<double>(samples[p].size());
        res.mean[p] = mean;
        res.stddev[p] = std::sqrt(var);
    }
    return res;
}

struct ReportCell {
    std::string model_id;
    std::string train_regime;
    double subrate = 0.0;
    double test_drop = 0.0;
    EvalResult result;
    bool failed = false;
    std::string error;
};

struct ReportTable {
    std::vector<ReportCell> cells;
};

inline std::string regime_label(const ChannelSpec& spec) {
    char buf[96];
    const char* model = spec.model == ChannelModel::bernoulli ? "bernoulli" : "burst";
    if (spec.vary)
        std::snprintf(buf, sizeof buf, "%s-uniform(%g,%g)", model, spec.rate_lo, spec.rate_hi);
    else
        std::snprintf(buf, sizeof buf, "%s-fixed(%g)", model, spec.rate_lo);
    return buf;
}

// CSV schema: model,train_regime,subrate,test_drop,phase,psnr_mean_db,psnr_std_db,trials
inline std::string to_csv(const ReportTable& table) {
    std::string out =
        "model,train_regime,subrate,test_drop,phase,psnr_mean_db,psnr_std_db,trials\n";
    char buf[256];
    for (const auto& cell : table.cells) {
        for (std::size_t p = 0; p < 3; ++p) {
            if (cell.failed) {
                std::snprintf(buf, sizeof buf, "%s,%s,%g,%g,P%zu,ERROR,ERROR,0\n",
                              cell.model_id.c_str(), cell.train_regime.c_str(), cell.subrate,
                              cell.test_drop, p + 1);
            } else {
                std::snprintf(buf, sizeof buf, "%s,%s,%g,%g,P%zu,%.4f,%.4f,%zu\n",
                              cell.model_id.c_str(), cell.train_regime.c_str(), cell.subrate,
                              cell.test_drop, p + 1, cell.result.mean[p],
                              cell.result.stddev[p], cell.result.trials);
            }
            out += buf;
        }
    }
    return out;
}

// Full cross-product of models x test rates. A failed cell records an
// error marker, never silently drops out of the table.
inline ReportTable run_grid(const std::vector<std::pair<std::string, const Model*>>& models,
                            const std::vector<double>& test_rates,
                            const std::vector<Tensor>& test_images, std::size_t trials,
                            std::uint64_t seed) {
    ReportTable table;
    for (const auto& [id, model] : models)
        for (double rate : test_rates) {
            ReportCell cell;
            cell.model_id = id;
            cell.train_regime = regime_label(model->train_channel);
            cell.subrate = model->geom.subrate;
            cell.test_drop = rate;
            try {
                cell.result = evaluate(*model, test_images, rate, trials, seed);
            } catch (const std::exception& e) {
                cell.failed = true;
                cell.error = e.what();
            }
            table.cells.push_back(std::move(cell));
        }
    return table;
}

}  // namespace ercs

#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "ercs/model.hpp"
#include "ercs/pgm.hpp"

namespace ercs {

// Versioned text checkpoint. Layout (v1):
//
//   ERCS-CKPT v1
//   geometry <block_side> <subrate> <levels> <p2_layers> <p2_channels>
//            <p3_layers> <p3_channels>          (one line)
//   channel <model> <vary> <rate_lo> <rate_hi> <burst_mean_len> <seed>
//   params <count>
//   tensor <name> <ndims> <extent...>
//   <numel values, %.17g, space-separated on one line>
//   ...
//   end
//
// Doubles are printed with 17 significant digits, which round-trips
// exactly, so identical models serialize byte-identically.
inline void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot open for writing");
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "ERCS-CKPT v1\n";
    out << "geometry " << model.geom.block_side << " " << fmt(model.geom.subrate) << " "
        << model.geom.levels << " " << model.geom.p2_layers << " " << model.geom.p2_channels
        << " " << model.geom.p3_layers << " " << model.geom.p3_channels << "\n";
    const ChannelSpec& ch = model.train_channel;
    out << "channel " << (ch.model == ChannelModel::bernoulli ? "bernoulli" : "burst") << " "
        << (ch.vary ? 1 : 0) << " " << fmt(ch.rate_lo) << " " << fmt(ch.rate_hi) << " "
        << fmt(ch.burst_mean_len) << " " << ch.seed << "\n";
    out << "params " << model.params.params.size() << "\n";
    for (const auto& [name, t] : model.params.params) {
        out << "tensor " << name << " " << t.shape.size();
        for (auto e : t.shape) out << " " << e;
        out << "\n";
        for (std::size_t i = 0; i < t.numel(); ++i)
            out << (i ? " " : "") << fmt(t.data[i]);
        out << "\n";
    }
    out << "end\n";
    if (!out) throw IoError(path + ": write failed");
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open");
    std::string word;
    auto expect = [&](const char* tok) {
        if (!(in >> word) || word != tok)
            throw IoError(path + ": expected '" + tok + "', got '" + word + "'");
    };
    expect("ERCS-CKPT");
    expect("v1");
    Model model;
    expect("geometry");
    in >> model.geom.block_side >> model.geom.subrate >> model.geom.levels >>
        model.geom.p2_layers >> model.geom.p2_channels >> model.geom.p3_layers >>
        model.geom.p3_channels;
    expect("channel");
    std::string chmodel;
    int vary = 0;
    in >> chmodel >> vary >> model.train_channel.rate_lo >> model.train_channel.rate_hi >>
        model.train_channel.burst_mean_len >> model.train_channel.seed;
    if (chmodel != "bernoulli" && chmodel != "burst")
        throw IoError(path + ": unknown channel model '" + chmodel + "'");
    model.train_channel.model =
        chmodel == "bernoulli" ? ChannelModel::bernoulli : ChannelModel::burst;
    model.train_channel.vary = vary != 0;
    expect("params");
    std::size_t count = 0;
    if (!(in >> count)) throw IoError(path + ": bad params count");
    for (std::size_t i = 0; i < count; ++i) {
        expect("tensor");
        std::string name;
        std::size_t ndims = 0;
        in >> name >> ndims;
        std::vector<std::size_t> shape(ndims);
        for (auto& e : shape) in >> e;
        Tensor t(shape);
        for (auto& v : t.data)
            if (!(in >> v)) throw IoError(path + ": truncated tensor '" + name + "'");
        model.params.add(name, std::move(t));
    }
    expect("end");
    model.geom.validate();
    model.train_channel.validate();
    return model;
}

}  // namespace ercs

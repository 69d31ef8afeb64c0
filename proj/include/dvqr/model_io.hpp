#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "dvqr/dvine.hpp"

//! versioned JSON serialization of fitted models. Doubles are written with
//! shortest-round-trip precision, so a reloaded parametric model reproduces
//! predictions bit-identically.
namespace dvqr {
namespace model_io {

using nlohmann::json;

inline constexpr int format_version = 1;

namespace detail {

inline json margin_to_json(const margins::MarginalModel& m)
{
    json j;
    if (m.kind() == margins::Kind::continuous) {
        const auto& c = m.as_continuous();
        j["type"] = "continuous";
        j["sample"] = c.sample;
        j["bandwidth"] = c.bandwidth;
        j["scale"] = c.scale;
    } else {
        const auto& d = m.as_discrete();
        j["type"] = "discrete";
        j["support"] = d.support;
        j["pmf"] = d.pmf;
        j["cum"] = d.cum;
        j["scale"] = d.scale;
    }
    return j;
}

inline margins::MarginalModel margin_from_json(const json& j)
{
    if (j.at("type") == "continuous") {
        margins::ContinuousMargin c;
        c.sample = j.at("sample").get<std::vector<double>>();
        c.bandwidth = j.at("bandwidth").get<double>();
        c.scale = j.at("scale").get<double>();
        return margins::MarginalModel{std::move(c)};
    }
    margins::DiscreteMargin d;
    d.support = j.at("support").get<std::vector<double>>();
    d.pmf = j.at("pmf").get<std::vector<double>>();
    d.cum = j.at("cum").get<std::vector<double>>();
    d.scale = j.at("scale").get<double>();
    return margins::MarginalModel{std::move(d)};
}

inline json pair_to_json(const dvine::PairModel& pm)
{
    json j;
    if (pm.parametric()) {
        const auto& s = pm.spec();
        j["type"] = "parametric";
        j["family"] = bicop::family_name(s.family);
        j["rotation"] = static_cast<int>(s.rotation);
        j["theta"] = s.theta;
    } else {
        const auto& k = pm.kernel();
        j["type"] = "kernel";
        j["zx"] = k.zx;
        j["zy"] = k.zy;
        j["b11"] = k.b11;
        j["b21"] = k.b21;
        j["b22"] = k.b22;
    }
    return j;
}

inline dvine::PairModel pair_from_json(const json& j)
{
    if (j.at("type") == "parametric") {
        bicop::PairCopulaSpec s;
        s.family = bicop::family_from_name(j.at("family"));
        int rot = j.at("rotation").get<int>();
        if (rot != 0 && rot != 90 && rot != 180 && rot != 270)
            throw input_error("model file: bad rotation");
        s.rotation = static_cast<bicop::Rotation>(rot);
        s.theta = j.at("theta").get<double>();
        bicop::validate(s);
        return dvine::PairModel{s};
    }
    npcop::KernelCopula k;
    k.zx = j.at("zx").get<std::vector<double>>();
    k.zy = j.at("zy").get<std::vector<double>>();
    k.b11 = j.at("b11").get<double>();
    k.b21 = j.at("b21").get<double>();
    k.b22 = j.at("b22").get<double>();
    return dvine::PairModel{std::move(k)};
}

inline json fit_to_json(const dvine::VineFit& f)
{
    json j;
    j["resp_margin"] = margin_to_json(f.resp_margin);
    j["order"] = f.order;
    json margins_j = json::array();
    for (const auto& m : f.cov_margins)
        margins_j.push_back(margin_to_json(m));
    j["cov_margins"] = margins_j;
    json trees = json::array();
    for (const auto& tree : f.pairs) {
        json edges = json::array();
        for (const auto& pm : tree)
            edges.push_back(pair_to_json(pm));
        trees.push_back(edges);
    }
    j["pairs"] = trees;
    j["cll"] = f.cll;
    j["penalized_cll"] = f.penalized_cll;
    j["param_count"] = f.param_count;
    j["clamp_events"] = f.clamp_events;
    j["jitter_seed"] = f.jitter_seed;
    j["cov_support"] = f.cov_support;
    j["resp_support"] = f.resp_support;
    return j;
}

inline dvine::VineFit fit_from_json(const json& j)
{
    dvine::VineFit f;
    f.resp_margin = margin_from_json(j.at("resp_margin"));
    f.order = j.at("order").get<std::vector<std::size_t>>();
    for (const auto& mj : j.at("cov_margins"))
        f.cov_margins.push_back(margin_from_json(mj));
    for (const auto& tree : j.at("pairs")) {
        std::vector<dvine::PairModel> edges;
        for (const auto& pj : tree)
            edges.push_back(pair_from_json(pj));
        f.pairs.push_back(std::move(edges));
    }
    f.cll = j.at("cll").get<double>();
    f.penalized_cll = j.at("penalized_cll").get<double>();
    f.param_count = j.at("param_count").get<double>();
    f.clamp_events = j.at("clamp_events").get<long>();
    f.jitter_seed = j.at("jitter_seed").get<std::uint64_t>();
    f.cov_support =
        j.at("cov_support").get<std::vector<std::vector<double>>>();
    f.resp_support = j.at("resp_support").get<std::vector<double>>();
    return f;
}

} // namespace detail

inline json to_json(const dvine::DVineRegModel& model)
{
    json j;
    j["format"] = "dvqr-model";
    j["version"] = format_version;
    j["mode"] = dvine::mode_name(model.mode);
    j["penalty"] = criterion_name(model.penalty);
    j["seed"] = model.seed;
    j["jitter_replicates"] = model.jitter_replicates;
    j["np_pair_params"] = model.np_pair_params;
    j["response_discrete"] = model.response_discrete;
    j["response_name"] = model.response_name;
    j["covariate_names"] = model.covariate_names;
    json kinds = json::array();
    for (auto k : model.covariate_kinds)
        kinds.push_back(margins::kind_name(k));
    j["covariate_kinds"] = kinds;
    json fits = json::array();
    for (const auto& f : model.fits)
        fits.push_back(detail::fit_to_json(f));
    j["fits"] = fits;
    j["selected_none"] = model.selected_none;
    j["warnings"] = model.warnings;
    return j;
}

inline dvine::DVineRegModel from_json(const json& j)
{
    if (j.value("format", "") != "dvqr-model")
        throw input_error("not a dvqr model file");
    if (j.at("version").get<int>() != format_version)
        throw input_error("unsupported model format version");
    dvine::DVineRegModel model;
    model.mode = dvine::mode_from_name(j.at("mode"));
    model.penalty = criterion_from_name(j.at("penalty"));
    model.seed = j.at("seed").get<std::uint64_t>();
    model.jitter_replicates = j.at("jitter_replicates").get<int>();
    model.np_pair_params = j.at("np_pair_params").get<double>();
    model.response_discrete = j.at("response_discrete").get<bool>();
    model.response_name = j.at("response_name").get<std::string>();
    model.covariate_names =
        j.at("covariate_names").get<std::vector<std::string>>();
    for (const auto& k : j.at("covariate_kinds"))
        model.covariate_kinds.push_back(
            margins::kind_from_name(k.get<std::string>()));
    for (const auto& fj : j.at("fits"))
        model.fits.push_back(detail::fit_from_json(fj));
    model.selected_none = j.at("selected_none").get<bool>();
    model.warnings = j.at("warnings").get<std::vector<std::string>>();
    return model;
}

inline void save(const dvine::DVineRegModel& model, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw input_error("cannot write model file: " + path);
    out << to_json(model).dump(2) << "\n";
}

inline dvine::DVineRegModel load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw input_error("cannot read model file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw input_error(std::string("model file parse error: ") + e.what());
    }
    return from_json(j);
}

} // namespace model_io
} // namespace dvqr

#pragma once

#include <string>
#include <vector>

#include "taxelgrid/json_envelope.hpp"
#include "taxelgrid/nn/model.hpp"

namespace taxelgrid::nn {

inline json spec_to_json(const ModelSpec& spec) {
    json layers = json::array();
    for (const auto& l : spec.layers) {
        json e{{"kind", to_string(l.kind)}};
        switch (l.kind) {
            case LayerKind::conv2d: e["filters"] = l.filters; e["kernel"] = l.kernel; break;
            case LayerKind::maxpool: e["kernel"] = l.kernel; break;
            case LayerKind::dense: e["units"] = l.units; break;
            case LayerKind::dropout: e["rate"] = l.rate; break;
            default: break;
        }
        layers.push_back(std::move(e));
    }
    return {{"name", spec.name},
            {"input_shape", {spec.input_shape.rows, spec.input_shape.cols, spec.input_shape.channels}},
            {"layers", std::move(layers)},
            {"l2_lambda", spec.l2_lambda},
            {"seed", spec.seed}};
}

inline ModelSpec spec_from_json(const json& j) {
    return with_json_errors([&] {
        ModelSpec spec;
        spec.name = j.at("name").get<std::string>();
        const auto& shape = j.at("input_shape");
        if (!shape.is_array() || shape.size() != 3) throw Error(Errc::parse_error, "input_shape must have 3 entries");
        spec.input_shape = {shape[0].get<std::size_t>(), shape[1].get<std::size_t>(), shape[2].get<std::size_t>()};
        for (const auto& e : j.at("layers")) {
            LayerSpec l;
            l.kind = layer_kind_from(e.at("kind").get<std::string>());
            l.filters = e.value("filters", std::size_t{0});
            l.kernel = e.value("kernel", std::size_t{0});
            l.units = e.value("units", std::size_t{0});
            l.rate = e.value("rate", 0.0);
            spec.layers.push_back(l);
        }
        spec.l2_lambda = j.at("l2_lambda").get<double>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        spec.validate();
        return spec;
    });
}

inline json model_to_json(const Model& model) {
    json j = make_envelope("network");
    j["spec"] = spec_to_json(model.spec());
    json params = json::array();
    for (const auto* p : model.parameters()) {
        std::vector<double> values(p->value.data(), p->value.data() + p->value.size());
        params.push_back({{"name", p->name}, {"shape", p->shape}, {"values", std::move(values)}});
    }
    j["parameters"] = std::move(params);
    j["training_meta"] = {{"epochs", model.meta.epochs},
                          {"final_loss", model.meta.final_loss},
                          {"loss_history", model.meta.loss_history}};
    return j;
}

inline Model model_from_json(const json& j) {
    check_envelope(j, "network");
    return with_json_errors([&] {
        Model model = Model::zeros(spec_from_json(j.at("spec")));
        auto params = model.parameters();
        const auto& stored = j.at("parameters");
        if (!stored.is_array() || stored.size() != params.size())
            throw Error(Errc::shape_mismatch, "parameter count does not match the spec");
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& e = stored[i];
            const auto shape = e.at("shape").get<std::vector<std::size_t>>();
            if (shape != params[i]->shape)
                throw Error(Errc::shape_mismatch, "shape metadata of " + params[i]->name + " does not match the spec");
            const auto values = e.at("values").get<std::vector<double>>();
            if (values.size() != static_cast<std::size_t>(params[i]->value.size()))
                throw Error(Errc::shape_mismatch, params[i]->name + " has the wrong number of values");
            std::copy(values.begin(), values.end(), params[i]->value.data());
        }
        if (j.contains("training_meta")) {
            const auto& meta = j["training_meta"];
            model.meta.epochs = meta.value("epochs", std::size_t{0});
            if (meta.contains("final_loss") && meta["final_loss"].is_number())
                model.meta.final_loss = meta["final_loss"].get<double>();
            model.meta.loss_history = meta.value("loss_history", std::vector<double>{});
        }
        return model;
    });
}

inline void save_model(const Model& model, const std::string& path) {
    write_text_file(path, model_to_json(model).dump(1));
}

inline Model load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

}  // namespace taxelgrid::nn

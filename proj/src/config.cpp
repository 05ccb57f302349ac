/*
 * Copyright (C) 2026 The ntkfed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ntkfed/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ntkfed/error.hpp"

namespace ntkfed {

namespace {

using json = nlohmann::json;

// Reads keys of one JSON object and rejects whatever is left unread.
class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) {
            throw ConfigError(label("") + " must be an object");
        }
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) {
            return;
        }
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(label(key) + " has the wrong type");
        }
    }

    void get_size(const char* key, std::size_t& out) {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) {
            return;
        }
        if (!it->is_number_unsigned()) {
            throw ConfigError(label(key) + " must be a non-negative integer");
        }
        out = it->get<std::size_t>();
    }

    void get_number(const char* key, double& out) {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) {
            return;
        }
        if (!it->is_number()) {
            throw ConfigError(label(key) + " must be a number");
        }
        out = it->get<double>();
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!seen_.count(it.key())) {
                throw ConfigError("unknown key " + label(it.key().c_str()));
            }
        }
    }

    std::string label(const char* key) const {
        if (path_.empty()) {
            return key;
        }
        return *key ? path_ + "." + key : path_;
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

std::vector<std::size_t> size_list(const json& j, const std::string& name) {
    if (!j.is_array()) {
        throw ConfigError(name + " must be an array of non-negative integers");
    }
    std::vector<std::size_t> out;
    for (const auto& v : j) {
        if (!v.is_number_unsigned()) {
            throw ConfigError(name + " must be an array of non-negative integers");
        }
        out.push_back(v.get<std::size_t>());
    }
    return out;
}

Selection parse_selection(const std::string& s) {
    if (s == "train-loss") {
        return Selection::train_loss;
    }
    if (s == "validation") {
        return Selection::validation;
    }
    throw ConfigError("round.selection must be \"train-loss\" or \"validation\"");
}

std::string selection_name(Selection s) { return s == Selection::train_loss ? "train-loss" : "validation"; }

ShuffleMode parse_shuffle(const std::string& s) {
    if (s == "sample") {
        return ShuffleMode::sample;
    }
    if (s == "client") {
        return ShuffleMode::client;
    }
    if (s == "none") {
        return ShuffleMode::none;
    }
    throw ConfigError("cp.shuffle must be \"sample\", \"client\" or \"none\"");
}

std::string shuffle_name(ShuffleMode s) {
    switch (s) {
    case ShuffleMode::sample:
        return "sample";
    case ShuffleMode::client:
        return "client";
    case ShuffleMode::none:
        return "none";
    }
    return "sample";
}

} // namespace

bool operator==(const RoundConfig& a, const RoundConfig& b) {
    return a.clients_total == b.clients_total && a.clients_per_round == b.clients_per_round && a.rounds == b.rounds &&
           a.eta == b.eta && a.t_grid == b.t_grid && a.tau == b.tau && a.batch_size == b.batch_size &&
           a.seed == b.seed && a.scheme == b.scheme && a.weighted_average == b.weighted_average &&
           a.central_steps == b.central_steps && a.selection == b.selection && a.track_spectrum == b.track_spectrum;
}

bool operator==(const CpConfig& a, const CpConfig& b) {
    return a.beta == b.beta && a.projected_dim == b.projected_dim && a.sparsity == b.sparsity &&
           a.identity_projection == b.identity_projection && a.shuffle == b.shuffle &&
           a.normalize_projected == b.normalize_projected;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.seed == b.seed && a.output_dir == b.output_dir && a.dataset == b.dataset && a.partition == b.partition &&
           a.hidden == b.hidden && a.round == b.round && a.cp == b.cp && a.compare == b.compare &&
           a.analysis == b.analysis;
}

void ExperimentConfig::validate() const {
    if (dataset.source != "synthetic" && dataset.source != "idx") {
        throw ConfigError("dataset.source must be \"synthetic\" or \"idx\"");
    }
    if (dataset.source == "idx" && (dataset.train_images.empty() || dataset.train_labels.empty())) {
        throw ConfigError("dataset.train_images and dataset.train_labels are required when dataset.source = idx");
    }
    if (dataset.classes < 2) {
        throw ConfigError("dataset.classes must be >= 2");
    }
    if (dataset.source == "synthetic" && dataset.synthetic_dim < 1) {
        throw ConfigError("dataset.synthetic_dim must be >= 1");
    }
    if (!(dataset.class_sep >= 0.0) || !std::isfinite(dataset.class_sep)) {
        throw ConfigError("dataset.class_sep must be a finite number >= 0");
    }
    if (partition.clients < 1) {
        throw ConfigError("partition.clients must be >= 1");
    }
    if (partition.samples_per_client < 1) {
        throw ConfigError("partition.samples_per_client must be >= 1");
    }
    if (!(partition.alpha > 0.0) || !std::isfinite(partition.alpha)) {
        throw ConfigError("partition.alpha must be > 0");
    }
    if (partition.validation_clients >= partition.clients) {
        throw ConfigError("partition.validation_clients must be smaller than partition.clients");
    }
    if (round.selection == Selection::validation && partition.validation_clients == 0) {
        throw ConfigError("round.selection = validation needs partition.validation_clients >= 1");
    }
    if (hidden < 1) {
        throw ConfigError("model.hidden must be >= 1");
    }
    round.validate();
    if (round.clients_total != partition.clients - partition.validation_clients) {
        throw ConfigError("round.clients_total must equal partition.clients - partition.validation_clients");
    }
    if (!(cp.beta > 0.0 && cp.beta <= 1.0)) {
        throw ConfigError("cp.beta must lie in (0,1]");
    }
    if (!(cp.sparsity >= 0.0 && cp.sparsity < 1.0)) {
        throw ConfigError("cp.sparsity must lie in [0,1)");
    }
    if (cp.projected_dim < 1) {
        throw ConfigError("cp.d1_proj must be >= 1");
    }
    if (dataset.source == "synthetic" && cp.projected_dim > dataset.synthetic_dim) {
        throw ConfigError("cp.d1_proj must not exceed the input dimension");
    }
    if (!(compare.target_accuracy >= 0.0 && compare.target_accuracy < 1.0)) {
        throw ConfigError("compare.target_accuracy must lie in [0,1)");
    }
    if (compare.schemes.empty()) {
        throw ConfigError("compare.schemes must not be empty");
    }
    for (std::size_t tau : compare.fedavg_tau_grid) {
        if (tau < 1) {
            throw ConfigError("compare.fedavg_tau_grid entries must be >= 1");
        }
    }
    // Dense cohort Jacobian budget: N_k · d2 · d <= 2e9 entries.
    if (dataset.source == "synthetic") {
        const double d = static_cast<double>(hidden) * (static_cast<double>(dataset.synthetic_dim) + 1.0) +
                         static_cast<double>(dataset.classes) * (static_cast<double>(hidden) + 1.0);
        const double entries = static_cast<double>(round.clients_per_round * partition.samples_per_client) *
                               static_cast<double>(dataset.classes) * d;
        if (entries > 2e9) {
            throw ConfigError("round.clients_per_round: cohort Jacobian would hold more than 2e9 entries");
        }
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    Section top(root, "");
    top.get("seed", cfg.seed);
    top.get("output_dir", cfg.output_dir);

    if (const json* j = top.child("dataset")) {
        Section s(*j, "dataset");
        auto& d = cfg.dataset;
        s.get("source", d.source);
        s.get("train_images", d.train_images);
        s.get("train_labels", d.train_labels);
        s.get("test_images", d.test_images);
        s.get("test_labels", d.test_labels);
        s.get_size("synthetic_dim", d.synthetic_dim);
        s.get_size("classes", d.classes);
        s.get_number("class_sep", d.class_sep);
        s.get_size("test_size", d.test_size);
        s.get("normalize", d.normalize);
        s.finish();
    }
    if (const json* j = top.child("partition")) {
        Section s(*j, "partition");
        auto& p = cfg.partition;
        s.get_size("clients", p.clients);
        s.get_size("samples_per_client", p.samples_per_client);
        s.get_number("alpha", p.alpha);
        s.get_size("validation_clients", p.validation_clients);
        s.finish();
    }
    if (const json* j = top.child("model")) {
        Section s(*j, "model");
        s.get_size("hidden", cfg.hidden);
        s.finish();
    }
    if (const json* j = top.child("round")) {
        Section s(*j, "round");
        auto& r = cfg.round;
        std::string scheme(scheme_name(r.scheme));
        s.get("scheme", scheme);
        r.scheme = parse_scheme(scheme);
        s.get_size("clients_per_round", r.clients_per_round);
        s.get_size("rounds", r.rounds);
        s.get_number("eta", r.eta);
        if (const json* g = s.child("t_grid")) {
            r.t_grid = size_list(*g, "round.t_grid");
        }
        s.get_size("tau", r.tau);
        s.get_size("batch_size", r.batch_size);
        s.get("weighted_average", r.weighted_average);
        s.get_size("central_steps", r.central_steps);
        std::string sel = selection_name(r.selection);
        s.get("selection", sel);
        r.selection = parse_selection(sel);
        s.get("track_spectrum", r.track_spectrum);
        s.finish();
    }
    if (const json* j = top.child("cp")) {
        Section s(*j, "cp");
        auto& c = cfg.cp;
        s.get_number("beta", c.beta);
        s.get_size("d1_proj", c.projected_dim);
        s.get_number("sparsity", c.sparsity);
        s.get("identity_projection", c.identity_projection);
        std::string sh = shuffle_name(c.shuffle);
        s.get("shuffle", sh);
        c.shuffle = parse_shuffle(sh);
        s.get("normalize_projected", c.normalize_projected);
        s.finish();
    }
    if (const json* j = top.child("compare")) {
        Section s(*j, "compare");
        auto& c = cfg.compare;
        if (const json* sc = s.child("schemes")) {
            if (!sc->is_array()) {
                throw ConfigError("compare.schemes must be an array of scheme names");
            }
            c.schemes.clear();
            for (const auto& v : *sc) {
                if (!v.is_string()) {
                    throw ConfigError("compare.schemes must be an array of scheme names");
                }
                c.schemes.push_back(parse_scheme(v.get<std::string>()));
            }
        }
        s.get_number("target_accuracy", c.target_accuracy);
        if (const json* g = s.child("fedavg_tau_grid")) {
            c.fedavg_tau_grid = size_list(*g, "compare.fedavg_tau_grid");
        }
        s.finish();
    }
    if (const json* j = top.child("analysis")) {
        Section s(*j, "analysis");
        s.get("record_wall_time", cfg.analysis.record_wall_time);
        s.get("inject_kernel_asymmetry", cfg.analysis.inject_kernel_asymmetry);
        s.finish();
    }
    top.finish();

    cfg.round.clients_total = cfg.partition.clients - std::min(cfg.partition.validation_clients, cfg.partition.clients);
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    json root;
    root["seed"] = cfg.seed;
    root["output_dir"] = cfg.output_dir;
    const auto& d = cfg.dataset;
    root["dataset"] = {{"source", d.source},           {"train_images", d.train_images},
                       {"train_labels", d.train_labels}, {"test_images", d.test_images},
                       {"test_labels", d.test_labels},   {"synthetic_dim", d.synthetic_dim},
                       {"classes", d.classes},           {"class_sep", d.class_sep},
                       {"test_size", d.test_size},       {"normalize", d.normalize}};
    const auto& p = cfg.partition;
    root["partition"] = {{"clients", p.clients},
                         {"samples_per_client", p.samples_per_client},
                         {"alpha", p.alpha},
                         {"validation_clients", p.validation_clients}};
    root["model"] = {{"hidden", cfg.hidden}};
    const auto& r = cfg.round;
    root["round"] = {{"scheme", std::string(scheme_name(r.scheme))},
                     {"clients_per_round", r.clients_per_round},
                     {"rounds", r.rounds},
                     {"eta", r.eta},
                     {"t_grid", r.t_grid},
                     {"tau", r.tau},
                     {"batch_size", r.batch_size},
                     {"weighted_average", r.weighted_average},
                     {"central_steps", r.central_steps},
                     {"selection", selection_name(r.selection)},
                     {"track_spectrum", r.track_spectrum}};
    const auto& c = cfg.cp;
    root["cp"] = {{"beta", c.beta},
                  {"d1_proj", c.projected_dim},
                  {"sparsity", c.sparsity},
                  {"identity_projection", c.identity_projection},
                  {"shuffle", shuffle_name(c.shuffle)},
                  {"normalize_projected", c.normalize_projected}};
    json schemes = json::array();
    for (Scheme s : cfg.compare.schemes) {
        schemes.push_back(std::string(scheme_name(s)));
    }
    root["compare"] = {{"schemes", schemes},
                       {"target_accuracy", cfg.compare.target_accuracy},
                       {"fedavg_tau_grid", cfg.compare.fedavg_tau_grid}};
    root["analysis"] = {{"record_wall_time", cfg.analysis.record_wall_time},
                        {"inject_kernel_asymmetry", cfg.analysis.inject_kernel_asymmetry}};
    return root.dump(2) + "\n";
}

} // namespace ntkfed

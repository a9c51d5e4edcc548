#include "debias/checkpoint.hpp"

#include <vector>

#include "debias/container.hpp"
#include "debias/errors.hpp"
#include "json.hpp"

namespace debias {

namespace {

constexpr uint32_t kCheckpointVersion = 1;

using ordered_json = nlohmann::ordered_json;

ordered_json arch_to_json(const ArchConfig& a) {
    ordered_json j;
    j["image_size"] = a.image_size;
    j["channels"] = a.channels;
    j["conv_channels"] = a.conv_channels;
    j["latent_dim"] = a.latent_dim;
    j["adv_hidden"] = a.adv_hidden;
    j["leaky_alpha"] = a.leaky_alpha;
    return j;
}

ArchConfig arch_from_json(const nlohmann::json& j) {
    ArchConfig a;
    a.image_size = j.at("image_size").get<int>();
    a.channels = j.at("channels").get<int>();
    a.conv_channels = j.at("conv_channels").get<std::vector<int>>();
    a.latent_dim = j.at("latent_dim").get<int>();
    a.adv_hidden = j.at("adv_hidden").get<int>();
    a.leaky_alpha = j.at("leaky_alpha").get<float>();
    a.validate();
    return a;
}

struct DirEntry {
    std::string name;
    const Tensor* tensor;
};

void append_optimizer(std::vector<DirEntry>& dir, const std::string& group,
                      const std::map<std::string, AdamState>& states) {
    for (const auto& [name, st] : states) {
        dir.push_back({"opt." + group + "." + name + ".m", &st.m});
        dir.push_back({"opt." + group + "." + name + ".v", &st.v});
    }
}

ordered_json optimizer_meta(const std::map<std::string, AdamState>& states) {
    if (states.empty()) return nullptr;
    const AdamState& st = states.begin()->second;
    ordered_json j;
    j["t"] = st.t;
    j["beta1"] = st.beta1;
    j["beta2"] = st.beta2;
    j["eps"] = st.eps;
    j["params"] = [&] {
        ordered_json names = ordered_json::array();
        for (const auto& [name, _] : states) names.push_back(name);
        return names;
    }();
    return j;
}

// Directory lookup for load: name -> (shape, offset).
struct LoadedDir {
    const nlohmann::json& tensors;
    const std::vector<char>& payload;

    Tensor fetch(const std::string& name) const {
        for (const auto& e : tensors) {
            if (e.at("name").get<std::string>() == name) {
                Tensor t(e.at("shape").get<std::vector<int>>());
                read_floats(payload, e.at("offset").get<uint64_t>(), t.data(), t.numel());
                return t;
            }
        }
        throw DataError("checkpoint is missing tensor '" + name + "'");
    }
    bool has(const std::string& name) const {
        for (const auto& e : tensors) {
            if (e.at("name").get<std::string>() == name) return true;
        }
        return false;
    }
};

std::map<std::string, AdamState> load_optimizer(const LoadedDir& dir, const nlohmann::json& meta,
                                                const std::string& group) {
    std::map<std::string, AdamState> states;
    if (meta.is_null()) return states;
    for (const auto& name_json : meta.at("params")) {
        const std::string name = name_json.get<std::string>();
        AdamState st;
        st.t = meta.at("t").get<int64_t>();
        st.beta1 = meta.at("beta1").get<double>();
        st.beta2 = meta.at("beta2").get<double>();
        st.eps = meta.at("eps").get<double>();
        st.m = dir.fetch("opt." + group + "." + name + ".m");
        st.v = dir.fetch("opt." + group + "." + name + ".v");
        states.emplace(name, std::move(st));
    }
    return states;
}

} // namespace

void save_checkpoint(const std::string& path, Checkpoint& ck) {
    ck.arch.validate();

    std::vector<DirEntry> dir;
    for (const auto& p : named_params(ck.enc)) dir.push_back({p.name, p.tensor});
    for (const auto& p : named_params(ck.dec)) dir.push_back({p.name, p.tensor});
    for (const auto& p : named_params(ck.adv)) dir.push_back({p.name, p.tensor});
    append_optimizer(dir, "main", ck.opt_main);
    append_optimizer(dir, "adv", ck.opt_adv);

    Container c;
    c.magic = "DBCK";
    c.version = kCheckpointVersion;

    ordered_json tensors = ordered_json::array();
    for (const DirEntry& e : dir) {
        if (e.tensor->empty()) throw DataError("checkpoint tensor '" + e.name + "' is empty");
        const uint64_t off = append_floats(c.payload, e.tensor->data(), e.tensor->numel());
        ordered_json t;
        t["name"] = e.name;
        t["shape"] = e.tensor->shape();
        t["offset"] = off;
        tensors.push_back(std::move(t));
    }

    ordered_json header;
    header["format"] = "debias-checkpoint";
    header["arch"] = arch_to_json(ck.arch);
    header["adversary"] = {
        {"head", ck.adv.head == AdversaryHead::Categorical ? "categorical" : "continuous"},
        {"out_units", ck.adv.out_units}};
    header["optimizer"] = {{"main", optimizer_meta(ck.opt_main)},
                           {"adv", optimizer_meta(ck.opt_adv)}};
    header["tensors"] = std::move(tensors);
    c.header_json = header.dump();

    write_container(path, c);
}

Checkpoint load_checkpoint(const std::string& path) {
    Container c = read_container(path, "DBCK", kCheckpointVersion);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(c.header_json);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt checkpoint header in " + path + ": " + e.what());
    }

    try {
        Checkpoint ck;
        ck.arch = arch_from_json(header.at("arch"));
        const LoadedDir dir{header.at("tensors"), c.payload};

        const int layers = ck.arch.layers();
        for (int i = 0; i < layers; ++i) {
            const std::string base = "enc.conv" + std::to_string(i);
            ck.enc.conv_w.push_back(dir.fetch(base + ".w"));
            ck.enc.conv_b.push_back(dir.fetch(base + ".b"));
        }
        ck.enc.dense_w = dir.fetch("enc.dense.w");
        ck.enc.dense_b = dir.fetch("enc.dense.b");

        ck.dec.dense_w = dir.fetch("dec.dense.w");
        ck.dec.dense_b = dir.fetch("dec.dense.b");
        for (int i = 0; i < layers; ++i) {
            const std::string base = "dec.tconv" + std::to_string(i);
            ck.dec.tconv_w.push_back(dir.fetch(base + ".w"));
            ck.dec.tconv_b.push_back(dir.fetch(base + ".b"));
        }

        const auto& advj = header.at("adversary");
        ck.adv.head = advj.at("head").get<std::string>() == "continuous"
                          ? AdversaryHead::Continuous
                          : AdversaryHead::Categorical;
        ck.adv.out_units = advj.at("out_units").get<int>();
        ck.adv.w1 = dir.fetch("adv.fc1.w");
        ck.adv.b1 = dir.fetch("adv.fc1.b");
        ck.adv.w2 = dir.fetch("adv.fc2.w");
        ck.adv.b2 = dir.fetch("adv.fc2.b");

        ck.opt_main = load_optimizer(dir, header.at("optimizer").at("main"), "main");
        ck.opt_adv = load_optimizer(dir, header.at("optimizer").at("adv"), "adv");
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed checkpoint header in " + path + ": " + e.what());
    }
}

} // namespace debias

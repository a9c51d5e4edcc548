#include "debias/dataset.hpp"

#include <string>

#include "debias/container.hpp"
#include "debias/errors.hpp"
#include "json.hpp"

namespace debias {

namespace {
constexpr uint32_t kDatasetVersion = 1;
}

void LabeledImageSet::validate() const {
    if (images.empty() || images.rank() != 4 || images.dim(1) != 3) {
        throw DataError("dataset images must be [N,3,H,W], got " + shape_str(images.shape()));
    }
    const size_t n = static_cast<size_t>(images.dim(0));
    if (m_labels.size() != n || group_ids.size() != n) {
        throw DataError("dataset label arrays do not match N=" + std::to_string(n));
    }
    if (kind == ConfounderKind::Categorical) {
        if (s_labels.size() != n) throw DataError("dataset s_labels do not match N");
        if (n_batches < 2) throw DataError("categorical dataset needs n_batches >= 2");
        for (int s : s_labels) {
            if (s < 0 || s >= n_batches) throw DataError("s label out of range");
        }
    } else {
        if (s_continuous.size() != n) throw DataError("dataset s_continuous does not match N");
    }
    if (n_classes < 2) throw DataError("dataset needs n_classes >= 2");
    for (int m : m_labels) {
        if (m < 0 || m >= n_classes) throw DataError("m label out of range");
    }
    for (int g : group_ids) {
        if (g < 0) throw DataError("group id must be nonnegative");
    }
    for (int64_t i = 0; i < images.numel(); ++i) {
        const float v = images[i];
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw DataError("image pixel " + std::to_string(v) + " outside [0,1]");
        }
    }
}

void save_dataset(const std::string& path, const LabeledImageSet& ds,
                  const std::string& config_echo_json) {
    ds.validate();
    const int n = ds.size();

    Container c;
    c.magic = "DBDS";
    c.version = kDatasetVersion;

    const uint64_t images_off = append_floats(c.payload, ds.images.data(), ds.images.numel());
    std::vector<uint32_t> scratch(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) scratch[static_cast<size_t>(i)] = static_cast<uint32_t>(ds.m_labels[static_cast<size_t>(i)]);
    const uint64_t m_off = append_u32s(c.payload, scratch.data(), n);
    uint64_t s_off = 0;
    if (ds.kind == ConfounderKind::Categorical) {
        for (int i = 0; i < n; ++i) scratch[static_cast<size_t>(i)] = static_cast<uint32_t>(ds.s_labels[static_cast<size_t>(i)]);
        s_off = append_u32s(c.payload, scratch.data(), n);
    } else {
        s_off = append_floats(c.payload, ds.s_continuous.data(), n);
    }
    for (int i = 0; i < n; ++i) scratch[static_cast<size_t>(i)] = static_cast<uint32_t>(ds.group_ids[static_cast<size_t>(i)]);
    const uint64_t g_off = append_u32s(c.payload, scratch.data(), n);

    nlohmann::ordered_json header;
    header["format"] = "debias-dataset";
    header["n"] = n;
    header["channels"] = 3;
    header["height"] = ds.images.dim(2);
    header["width"] = ds.images.dim(3);
    header["confounder_kind"] =
        ds.kind == ConfounderKind::Categorical ? "categorical" : "continuous";
    header["n_classes"] = ds.n_classes;
    header["n_batches"] = ds.n_batches;
    header["config"] = nlohmann::ordered_json::parse(config_echo_json);
    header["sections"] = {
        {"images", images_off}, {"m_labels", m_off}, {"s_values", s_off}, {"group_ids", g_off}};
    c.header_json = header.dump();

    write_container(path, c);
}

LabeledImageSet load_dataset(const std::string& path) {
    Container c = read_container(path, "DBDS", kDatasetVersion);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(c.header_json);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt dataset header in " + path + ": " + e.what());
    }

    LabeledImageSet ds;
    try {
        const int n = header.at("n").get<int>();
        const int h = header.at("height").get<int>();
        const int w = header.at("width").get<int>();
        const std::string kind = header.at("confounder_kind").get<std::string>();
        ds.kind = kind == "continuous" ? ConfounderKind::Continuous : ConfounderKind::Categorical;
        ds.n_classes = header.at("n_classes").get<int>();
        ds.n_batches = header.at("n_batches").get<int>();
        const auto& sections = header.at("sections");

        ds.images = Tensor({n, 3, h, w});
        read_floats(c.payload, sections.at("images").get<uint64_t>(), ds.images.data(),
                    ds.images.numel());

        std::vector<uint32_t> scratch(static_cast<size_t>(n));
        read_u32s(c.payload, sections.at("m_labels").get<uint64_t>(), scratch.data(), n);
        ds.m_labels.assign(scratch.begin(), scratch.end());

        if (ds.kind == ConfounderKind::Categorical) {
            read_u32s(c.payload, sections.at("s_values").get<uint64_t>(), scratch.data(), n);
            ds.s_labels.assign(scratch.begin(), scratch.end());
        } else {
            ds.s_continuous.resize(static_cast<size_t>(n));
            read_floats(c.payload, sections.at("s_values").get<uint64_t>(), ds.s_continuous.data(), n);
        }

        read_u32s(c.payload, sections.at("group_ids").get<uint64_t>(), scratch.data(), n);
        ds.group_ids.assign(scratch.begin(), scratch.end());
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed dataset header in " + path + ": " + e.what());
    }

    ds.validate();
    return ds;
}

} // namespace debias

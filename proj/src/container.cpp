#include "icnn/container.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace icnn {

static_assert(std::endian::native == std::endian::little,
              "container payloads are written as native little-endian floats");

using nlohmann::json;

namespace {

json arch_to_json(const Architecture& a) {
    json layers = json::array();
    for (const LayerSpec& l : a.layers) {
        json jl;
        jl["kind"] = to_string(l.kind);
        if (l.kind == LayerKind::conv || l.is_pool()) {
            jl["kernel"] = {l.kernel_h, l.kernel_w};
            jl["stride"] = l.stride;
        }
        if (l.has_weights()) jl["out_channels"] = l.out_channels;
        layers.push_back(jl);
    }
    return json{{"input", {a.in_channels, a.in_height, a.in_width}}, {"layers", layers}};
}

Architecture arch_from_json(const json& j) {
    Architecture a;
    a.in_channels = j.at("input").at(0).get<int>();
    a.in_height = j.at("input").at(1).get<int>();
    a.in_width = j.at("input").at(2).get<int>();
    for (const json& jl : j.at("layers")) {
        LayerSpec l;
        l.kind = layer_kind_from_string(jl.at("kind").get<std::string>());
        if (jl.contains("kernel")) {
            l.kernel_h = jl.at("kernel").at(0).get<int>();
            l.kernel_w = jl.at("kernel").at(1).get<int>();
            l.stride = jl.at("stride").get<int>();
        }
        if (jl.contains("out_channels")) l.out_channels = jl.at("out_channels").get<int>();
        a.layers.push_back(l);
    }
    return a;
}

json plan_to_json(const IncrementPlan& p) {
    return json{{"num_increments", p.num_increments},
                {"output_classes", p.output_classes},
                {"added", p.added},
                {"channel_fractions", p.channel_fractions}};
}

IncrementPlan plan_from_json(const json& j) {
    IncrementPlan p;
    p.num_increments = j.at("num_increments").get<int>();
    p.output_classes = j.at("output_classes").get<int>();
    p.added = j.at("added").get<std::vector<std::vector<int>>>();
    p.channel_fractions = j.at("channel_fractions").get<std::vector<double>>();
    return p;
}

}  // namespace

class ContainerCodec {
public:
    static void save(const SlicedNetwork& net, const std::string& path) {
        if (net.trained_up_to() < 1) {
            throw ArgumentError("refusing to save a network with no trained increment");
        }
        json header;
        header["arch"] = arch_to_json(net.arch());
        header["plan"] = plan_to_json(net.plan());
        header["trained_up_to"] = net.trained_up_to();
        if (!net.meta().empty()) header["meta"] = json::parse(net.meta());

        std::vector<float> payload;
        json blocks = json::array();
        for (const BlockInfo& b : net.blocks()) {
            Tensor values = net.block_values(b.id);
            json jb;
            jb["slot"] = b.id.slot;
            jb["a"] = b.id.out_inc;
            jb["b"] = b.id.in_inc;
            jb["shape"] = values.shape();
            jb["offset"] = payload.size() * sizeof(float);
            jb["count"] = values.size();
            blocks.push_back(jb);
            payload.insert(payload.end(), values.data(), values.data() + values.size());
        }
        header["blocks"] = blocks;

        json heads = json::array();
        for (int i = 1; i <= net.trained_up_to(); ++i) {
            const auto& h = net.head(i);
            json jh;
            jh["i"] = i;
            jh["in_features"] = h.weights.dim(1);
            jh["w_offset"] = payload.size() * sizeof(float);
            payload.insert(payload.end(), h.weights.data(), h.weights.data() + h.weights.size());
            jh["b_offset"] = payload.size() * sizeof(float);
            payload.insert(payload.end(), h.bias.data(), h.bias.data() + h.bias.size());
            heads.push_back(jh);
        }
        header["heads"] = heads;

        const std::string htext = header.dump();
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ArgumentError("cannot open " + path + " for writing");
        f.write("ICNN", 4);
        const std::uint16_t version = kContainerVersion;
        f.write(reinterpret_cast<const char*>(&version), sizeof(version));
        const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
        f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
        f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
        f.write(reinterpret_cast<const char*>(payload.data()),
                static_cast<std::streamsize>(payload.size() * sizeof(float)));
        if (!f) throw ArgumentError("write failed for " + path);
    }

    static SlicedNetwork load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw ArgumentError("cannot open " + path);
        char magic[4];
        if (!f.read(magic, 4) || std::memcmp(magic, "ICNN", 4) != 0) {
            throw FormatError("bad container magic", 0);
        }
        std::uint16_t version = 0;
        if (!f.read(reinterpret_cast<char*>(&version), sizeof(version))) {
            throw FormatError("truncated container version", 4);
        }
        if (version != kContainerVersion) {
            throw VersionError("container version " + std::to_string(version) +
                               " unsupported (expected " + std::to_string(kContainerVersion) +
                               ")");
        }
        std::uint32_t hlen = 0;
        if (!f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen))) {
            throw FormatError("truncated container header length", 6);
        }
        std::string htext(hlen, '\0');
        if (!f.read(htext.data(), hlen)) throw FormatError("truncated container header", 10);
        json header = json::parse(htext, nullptr, false);
        if (header.is_discarded()) throw FormatError("container header is not valid JSON", 10);

        const std::size_t payload_base = 10 + hlen;
        SlicedNetwork net;
        try {
            Architecture arch = arch_from_json(header.at("arch"));
            IncrementPlan plan = plan_from_json(header.at("plan"));
            net = SlicedNetwork::allocate(arch, plan);

            const auto read_floats = [&](std::size_t offset, std::size_t count, float* dst) {
                f.seekg(static_cast<std::streamoff>(payload_base + offset));
                if (!f.read(reinterpret_cast<char*>(dst),
                            static_cast<std::streamsize>(count * sizeof(float)))) {
                    throw FormatError("truncated container payload", payload_base + offset);
                }
            };

            for (const json& jb : header.at("blocks")) {
                BlockId id{jb.at("slot").get<int>(), jb.at("a").get<int>(), jb.at("b").get<int>()};
                Tensor values(jb.at("shape").get<std::vector<int>>());
                if (values.size() != jb.at("count").get<std::size_t>()) {
                    throw FormatError("block count disagrees with shape",
                                      payload_base + jb.at("offset").get<std::size_t>());
                }
                read_floats(jb.at("offset").get<std::size_t>(), values.size(), values.data());
                net.set_block_values(id, values);
            }
            const int trained = header.at("trained_up_to").get<int>();
            if (trained < 1 || trained > net.num_increments() ||
                static_cast<int>(header.at("heads").size()) != trained) {
                throw FormatError("head directory disagrees with trained_up_to", 10);
            }
            for (const json& jh : header.at("heads")) {
                const int i = jh.at("i").get<int>();
                const int in_features = jh.at("in_features").get<int>();
                if (i != net.head_count() + 1 || in_features != net.head_in_features(i)) {
                    throw FormatError("output head directory out of order", 10);
                }
                SlicedNetwork::OutputHead h;
                h.weights = Tensor({net.output_classes(), in_features});
                h.bias = Tensor({net.output_classes()});
                read_floats(jh.at("w_offset").get<std::size_t>(), h.weights.size(),
                            h.weights.data());
                read_floats(jh.at("b_offset").get<std::size_t>(), h.bias.size(), h.bias.data());
                net.push_head(std::move(h));
            }
            net.set_trained_up_to(trained);
            if (header.contains("meta")) net.set_meta(header.at("meta").dump());
        } catch (const json::exception& e) {
            throw FormatError(std::string("container header field error: ") + e.what(), 10);
        }
        return net;
    }
};

void save_network(const SlicedNetwork& net, const std::string& path) {
    ContainerCodec::save(net, path);
}

SlicedNetwork load_network(const std::string& path) { return ContainerCodec::load(path); }

}  // namespace icnn

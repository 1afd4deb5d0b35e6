#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmkan/errors.hpp"
#include "lmkan/model.hpp"

namespace lmkan {

// Model container format "LMK1":
//
//   bytes 0..3   magic "LMK1"
//   bytes 4..7   header length, unsigned 32-bit little-endian
//   header       UTF-8 JSON: block sequence, dims, G, gamma, precond mode,
//                batch-norm presence and stats metadata, tensor dtype
//                ("f64"/"f32"), and the tensor manifest in payload order
//   payload      raw little-endian tensors, row-major; P tensors use index
//                order [i1][i2][pair][out]
//
// f64 round trips bitwise. f32 is a storage option: values pass through
// single precision on save (lossy once, then stable). Header-declared shapes
// are authoritative and validated against the payload length.

namespace detail {

inline bool host_is_little_endian() {
    const std::uint32_t probe = 1;
    unsigned char b[4];
    std::memcpy(b, &probe, 4);
    return b[0] == 1;
}

struct TensorEntry {
    std::string name;
    std::vector<std::size_t> shape;
    const double* data;
    double* mutable_data;
};

// Walk every tensor of the model in a fixed order shared by save and load.
template <class ModelT, class F>
void for_each_tensor(ModelT& model, F&& fn) {
    auto bn_tensors = [&](auto& bn, const std::string& prefix) {
        fn(prefix + ".running_mean", std::vector<std::size_t>{bn.running_mean.size()},
           bn.running_mean.data());
        fn(prefix + ".running_var", std::vector<std::size_t>{bn.running_var.size()},
           bn.running_var.data());
        if (bn.affine) {
            fn(prefix + ".scale", std::vector<std::size_t>{bn.scale.size()}, bn.scale.data());
            fn(prefix + ".shift", std::vector<std::size_t>{bn.shift.size()}, bn.shift.data());
        }
    };
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        const std::string prefix = "block" + std::to_string(b);
        if (auto* k = std::get_if<LmKanBlock>(&model.blocks[b])) {
            const int G1 = k->pre.layer.grid.G + 1;
            fn(prefix + ".P",
               std::vector<std::size_t>{static_cast<std::size_t>(G1), static_cast<std::size_t>(G1),
                                        static_cast<std::size_t>(k->pre.layer.pairs()),
                                        static_cast<std::size_t>(k->pre.layer.n_out)},
               k->pre.layer.P.data());
            if (k->pre.mode != PrecondMode::none) {
                fn(prefix + ".linW",
                   std::vector<std::size_t>{k->pre.lin.W.rows(), k->pre.lin.W.cols()},
                   k->pre.lin.W.data());
                fn(prefix + ".linB", std::vector<std::size_t>{k->pre.lin.b.size()},
                   k->pre.lin.b.data());
            }
            if (k->bn) bn_tensors(*k->bn, prefix + ".bn");
        } else if (auto* m = std::get_if<MlpBlock>(&model.blocks[b])) {
            fn(prefix + ".W", std::vector<std::size_t>{m->lin.W.rows(), m->lin.W.cols()},
               m->lin.W.data());
            fn(prefix + ".b", std::vector<std::size_t>{m->lin.b.size()}, m->lin.b.data());
            if (m->bn) bn_tensors(*m->bn, prefix + ".bn");
        } else {
            auto& s = std::get<BnBlock>(model.blocks[b]);
            bn_tensors(s.bn, prefix + ".bn");
        }
    }
}

inline nlohmann::json bn_meta(const BatchNorm& bn) {
    return {{"dim", bn.dim},
            {"momentum", bn.momentum},
            {"epsilon", bn.epsilon},
            {"affine", bn.affine},
            {"batches_seen", bn.batches_seen}};
}

inline BatchNorm bn_from_meta(const nlohmann::json& j) {
    BatchNorm bn = BatchNorm::make(j.at("dim").get<int>(), j.at("affine").get<bool>(),
                                   j.at("momentum").get<double>(), j.at("epsilon").get<double>());
    bn.batches_seen = j.at("batches_seen").get<long>();
    return bn;
}

}  // namespace detail

inline void save_model(const Model& model, const std::string& path, bool f32_storage = false) {
    nlohmann::json header;
    header["format"] = "LMK1";
    header["version"] = 1;
    header["dtype"] = f32_storage ? "f32" : "f64";
    header["blocks"] = nlohmann::json::array();
    for (const auto& block : model.blocks) {
        nlohmann::json jb;
        if (const auto* k = std::get_if<LmKanBlock>(&block)) {
            jb["type"] = "lmkan";
            jb["n_in"] = k->pre.layer.n_in;
            jb["n_out"] = k->pre.layer.n_out;
            jb["G"] = k->pre.layer.grid.G;
            jb["gamma"] = k->pre.layer.gamma;
            jb["mode"] = to_string(k->pre.mode);
            if (k->bn) jb["bn"] = detail::bn_meta(*k->bn);
        } else if (const auto* m = std::get_if<MlpBlock>(&block)) {
            jb["type"] = "mlp";
            jb["n_in"] = m->lin.n_in;
            jb["n_out"] = m->lin.n_out;
            jb["act"] = to_string(m->act);
            if (m->bn) jb["bn"] = detail::bn_meta(*m->bn);
        } else {
            const auto& s = std::get<BnBlock>(block);
            jb["type"] = "bn";
            jb["bn"] = detail::bn_meta(s.bn);
        }
        header["blocks"].push_back(std::move(jb));
    }

    const std::size_t elem = f32_storage ? 4 : 8;
    nlohmann::json manifest = nlohmann::json::array();
    std::size_t payload_bytes = 0;
    detail::for_each_tensor(const_cast<Model&>(model),
                            [&](const std::string& name, const std::vector<std::size_t>& shape,
                                const double*) {
                                std::size_t count = 1;
                                for (std::size_t d : shape) count *= d;
                                manifest.push_back({{"name", name},
                                                    {"shape", shape},
                                                    {"bytes", count * elem}});
                                payload_bytes += count * elem;
                            });
    header["tensors"] = std::move(manifest);

    const std::string htext = header.dump();
    if (htext.size() > 0xffffffffull) throw FormatError("save_model: header too large");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("save_model: cannot open " + path + " for writing");
    out.write("LMK1", 4);
    const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
    unsigned char lenb[4] = {static_cast<unsigned char>(hlen & 0xff),
                             static_cast<unsigned char>((hlen >> 8) & 0xff),
                             static_cast<unsigned char>((hlen >> 16) & 0xff),
                             static_cast<unsigned char>((hlen >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(lenb), 4);
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));

    // payload (host is little-endian on every supported target; checked once)
    if (!detail::host_is_little_endian())
        throw FormatError("save_model: big-endian hosts are not supported");
    detail::for_each_tensor(
        const_cast<Model&>(model),
        [&](const std::string&, const std::vector<std::size_t>& shape, const double* data) {
            std::size_t count = 1;
            for (std::size_t d : shape) count *= d;
            if (f32_storage) {
                std::vector<float> tmp(count);
                for (std::size_t i = 0; i < count; ++i) tmp[i] = static_cast<float>(data[i]);
                out.write(reinterpret_cast<const char*>(tmp.data()),
                          static_cast<std::streamsize>(count * 4));
            } else {
                out.write(reinterpret_cast<const char*>(data),
                          static_cast<std::streamsize>(count * 8));
            }
        });
    if (!out) throw FormatError("save_model: write failed for " + path);
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("load_model: cannot open " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "LMK1", 4) != 0)
        throw FormatError("load_model: bad magic, not an LMK1 model file");
    unsigned char lenb[4];
    in.read(reinterpret_cast<char*>(lenb), 4);
    if (in.gcount() != 4) throw FormatError("load_model: truncated header length");
    const std::uint32_t hlen = static_cast<std::uint32_t>(lenb[0]) |
                               (static_cast<std::uint32_t>(lenb[1]) << 8) |
                               (static_cast<std::uint32_t>(lenb[2]) << 16) |
                               (static_cast<std::uint32_t>(lenb[3]) << 24);
    std::string htext(hlen, '\0');
    in.read(htext.data(), hlen);
    if (in.gcount() != static_cast<std::streamsize>(hlen))
        throw FormatError("load_model: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(htext);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("load_model: header is not valid JSON: ") + e.what());
    }
    if (header.value("format", "") != "LMK1" || header.value("version", 0) != 1)
        throw FormatError("load_model: unsupported format/version");
    const std::string dtype = header.value("dtype", "f64");
    if (dtype != "f64" && dtype != "f32")
        throw FormatError("load_model: unknown dtype " + dtype);

    // Rebuild the block skeleton from metadata.
    Model model;
    try {
        for (const auto& jb : header.at("blocks")) {
            const std::string type = jb.at("type").get<std::string>();
            if (type == "lmkan") {
                LmKanBlock k;
                k.pre.layer.n_in = jb.at("n_in").get<int>();
                k.pre.layer.n_out = jb.at("n_out").get<int>();
                k.pre.layer.grid = build_grid(jb.at("G").get<int>());
                k.pre.layer.gamma = jb.at("gamma").get<double>();
                k.pre.mode = precond_mode_from_string(jb.at("mode").get<std::string>());
                const int G1 = k.pre.layer.grid.G + 1;
                k.pre.layer.P.assign(static_cast<std::size_t>(G1) * G1 *
                                         (k.pre.layer.n_in / 2) * k.pre.layer.n_out,
                                     0.0);
                if (k.pre.mode != PrecondMode::none) {
                    k.pre.lin.n_in = k.pre.layer.n_in;
                    k.pre.lin.n_out = k.pre.layer.n_out;
                    k.pre.lin.W = Matrix(k.pre.lin.n_out, k.pre.lin.n_in);
                    k.pre.lin.b.assign(k.pre.lin.n_out, 0.0);
                }
                if (jb.contains("bn")) k.bn = detail::bn_from_meta(jb.at("bn"));
                model.blocks.push_back(std::move(k));
            } else if (type == "mlp") {
                MlpBlock m;
                m.lin.n_in = jb.at("n_in").get<int>();
                m.lin.n_out = jb.at("n_out").get<int>();
                m.lin.W = Matrix(m.lin.n_out, m.lin.n_in);
                m.lin.b.assign(m.lin.n_out, 0.0);
                m.act = activation_from_string(jb.at("act").get<std::string>());
                if (jb.contains("bn")) m.bn = detail::bn_from_meta(jb.at("bn"));
                model.blocks.push_back(std::move(m));
            } else if (type == "bn") {
                model.blocks.push_back(BnBlock{detail::bn_from_meta(jb.at("bn"))});
            } else {
                throw FormatError("load_model: unknown block type " + type);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("load_model: malformed block metadata: ") + e.what());
    }

    // Validate the manifest against the skeleton, then read the payload.
    const std::size_t elem = dtype == "f32" ? 4 : 8;
    std::vector<std::pair<std::string, std::size_t>> expected;  // name, element count
    detail::for_each_tensor(model, [&](const std::string& name,
                                       const std::vector<std::size_t>& shape, const double*) {
        std::size_t count = 1;
        for (std::size_t d : shape) count *= d;
        expected.emplace_back(name, count);
    });
    const auto& manifest = header.at("tensors");
    if (manifest.size() != expected.size())
        throw FormatError("load_model: tensor manifest does not match block metadata");
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& entry = manifest[i];
        if (entry.at("name").get<std::string>() != expected[i].first)
            throw FormatError("load_model: manifest order mismatch at " + expected[i].first);
        if (entry.at("bytes").get<std::size_t>() != expected[i].second * elem)
            throw FormatError("load_model: declared byte count mismatch at " + expected[i].first);
    }

    detail::for_each_tensor(model, [&](const std::string& name, const std::vector<std::size_t>& shape,
                                       const double* cdata) {
        std::size_t count = 1;
        for (std::size_t d : shape) count *= d;
        double* data = const_cast<double*>(cdata);
        if (elem == 4) {
            std::vector<float> tmp(count);
            in.read(reinterpret_cast<char*>(tmp.data()), static_cast<std::streamsize>(count * 4));
            if (in.gcount() != static_cast<std::streamsize>(count * 4))
                throw FormatError("load_model: truncated payload at tensor " + name);
            for (std::size_t i = 0; i < count; ++i) data[i] = static_cast<double>(tmp[i]);
        } else {
            in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
            if (in.gcount() != static_cast<std::streamsize>(count * 8))
                throw FormatError("load_model: truncated payload at tensor " + name);
        }
    });
    // no trailing garbage
    char extra;
    in.read(&extra, 1);
    if (!in.eof()) throw FormatError("load_model: trailing bytes after declared payload");
    return model;
}

}  // namespace lmkan

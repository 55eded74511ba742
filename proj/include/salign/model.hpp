#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "salign/error.hpp"
#include "salign/tensor.hpp"

namespace salign {

enum class LayerKind { Conv2d, Relu, MaxPool2d, GlobalAveragePool, Dropout, Dense, Flatten };

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::Relu: return "relu";
        case LayerKind::MaxPool2d: return "maxpool2d";
        case LayerKind::GlobalAveragePool: return "global_average_pool";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::Dense: return "dense";
        case LayerKind::Flatten: return "flatten";
    }
    return "?";
}

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    // conv2d / maxpool2d
    int kh = 0, kw = 0, stride = 1;
    bool same_pad = true;  // conv only; maxpool is valid-style
    int in_channels = 0, out_channels = 0;
    // dense
    int in_features = 0, out_features = 0;
    // dropout
    double rate = 0.0;
    // parameters; conv weights in (kh, kw, in_c, out_c) order, dense in (in, out)
    std::vector<double> weights;
    std::vector<double> bias;

    size_t weight_count() const {
        if (kind == LayerKind::Conv2d)
            return static_cast<size_t>(kh) * kw * in_channels * out_channels;
        if (kind == LayerKind::Dense) return static_cast<size_t>(in_features) * out_features;
        return 0;
    }
    size_t bias_count() const {
        if (kind == LayerKind::Conv2d) return static_cast<size_t>(out_channels);
        if (kind == LayerKind::Dense) return static_cast<size_t>(out_features);
        return 0;
    }
    size_t param_count() const { return weight_count() + bias_count(); }
};

// Activation shape between layers; vector-domain shapes are (1, 1, n).
struct Shape {
    int h = 0, w = 0, c = 0;
    bool spatial = true;
    size_t count() const { return static_cast<size_t>(h) * w * c; }
    bool operator==(const Shape&) const = default;
};

struct ModelSpec {
    std::string name;
    Shape input{0, 0, 0, true};
    // per-channel affine preprocessing, applied before the first layer
    std::vector<double> pre_scale;  // defaults to all 1
    std::vector<double> pre_shift;  // defaults to all 0
    std::vector<LayerSpec> layers;

    size_t param_count() const {
        size_t n = 0;
        for (const auto& l : layers) n += l.param_count();
        return n;
    }
};

namespace detail {

inline int conv_out_dim(int in, int k, int stride, bool same_pad) {
    if (same_pad) return (in + stride - 1) / stride;
    if (in < k) return 0;
    return (in - k) / stride + 1;
}

inline int pool_out_dim(int in, int k, int stride) {
    if (in < k) return 0;
    return (in - k) / stride + 1;
}

}  // namespace detail

// Validates the layer chain and returns the per-layer output shapes.
inline std::vector<Shape> shape_chain(const ModelSpec& model) {
    if (model.input.h <= 0 || model.input.w <= 0 || model.input.c <= 0)
        throw DataError("model: invalid input shape");
    std::vector<Shape> shapes;
    Shape cur = model.input;
    cur.spatial = true;
    for (size_t i = 0; i < model.layers.size(); ++i) {
        const LayerSpec& l = model.layers[i];
        auto fail = [&](const std::string& why) {
            std::ostringstream os;
            os << "model: shape chain error at layer " << i << " (" << layer_kind_name(l.kind)
               << "): " << why;
            throw DataError(os.str());
        };
        switch (l.kind) {
            case LayerKind::Conv2d: {
                if (!cur.spatial) fail("conv2d applied to vector input");
                if (l.in_channels != cur.c) fail("input channel mismatch");
                if (l.kh <= 0 || l.kw <= 0 || l.stride <= 0 || l.out_channels <= 0)
                    fail("invalid conv parameters");
                cur.h = detail::conv_out_dim(cur.h, l.kh, l.stride, l.same_pad);
                cur.w = detail::conv_out_dim(cur.w, l.kw, l.stride, l.same_pad);
                cur.c = l.out_channels;
                if (cur.h <= 0 || cur.w <= 0) fail("kernel larger than input");
                break;
            }
            case LayerKind::Relu:
            case LayerKind::Dropout:
                if (l.kind == LayerKind::Dropout && (l.rate < 0.0 || l.rate >= 1.0))
                    fail("dropout rate must be in [0, 1)");
                break;
            case LayerKind::MaxPool2d: {
                if (!cur.spatial) fail("maxpool2d applied to vector input");
                if (l.kh <= 0 || l.kw <= 0 || l.stride <= 0) fail("invalid pool parameters");
                cur.h = detail::pool_out_dim(cur.h, l.kh, l.stride);
                cur.w = detail::pool_out_dim(cur.w, l.kw, l.stride);
                if (cur.h <= 0 || cur.w <= 0) fail("pool window larger than input");
                break;
            }
            case LayerKind::GlobalAveragePool:
                if (!cur.spatial) fail("global_average_pool applied to vector input");
                cur = Shape{1, 1, cur.c, false};
                break;
            case LayerKind::Flatten:
                cur = Shape{1, 1, static_cast<int>(cur.count()), false};
                break;
            case LayerKind::Dense:
                if (cur.spatial) fail("dense requires a flatten or pooling transition first");
                if (l.in_features != cur.c) fail("dense input size mismatch");
                if (l.out_features <= 0) fail("invalid dense output size");
                cur = Shape{1, 1, l.out_features, false};
                break;
        }
        shapes.push_back(cur);
    }
    if (shapes.empty()) throw DataError("model: no layers");
    return shapes;
}

// ---------------------------------------------------------------------------
// Manifest + raw f32 weight blob I/O.
//
// Manifest is line-oriented key/value text ('#' comments allowed):
//   name <string>
//   input <h> <w> <c>
//   preprocess <scale> <shift> ...     one (scale, shift) pair per channel
//   layer conv2d <kh> <kw> <in_c> <out_c> <stride> <same|valid>
//   layer relu
//   layer maxpool2d <kh> <kw> <stride>
//   layer global_average_pool
//   layer dropout <rate>
//   layer flatten
//   layer dense <in> <out>
// The blob holds little-endian f32 per layer in order: weights then bias.
// ---------------------------------------------------------------------------

inline std::string weight_blob_path(const std::string& manifest_path) {
    const std::string ext = ".model";
    if (manifest_path.size() > ext.size() &&
        manifest_path.compare(manifest_path.size() - ext.size(), ext.size(), ext) == 0)
        return manifest_path.substr(0, manifest_path.size() - ext.size()) + ".bin";
    return manifest_path + ".bin";
}

inline ModelSpec parse_manifest(std::istream& in, const std::string& origin) {
    ModelSpec model;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& why) {
        std::ostringstream os;
        os << origin << ":" << lineno << ": " << why;
        throw DataError(os.str());
    };
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        if (key == "name") {
            ls >> model.name;
        } else if (key == "input") {
            if (!(ls >> model.input.h >> model.input.w >> model.input.c))
                fail("malformed input shape");
        } else if (key == "preprocess") {
            double s, t;
            while (ls >> s >> t) {
                model.pre_scale.push_back(s);
                model.pre_shift.push_back(t);
            }
        } else if (key == "layer") {
            std::string kind;
            if (!(ls >> kind)) fail("missing layer kind");
            LayerSpec l;
            if (kind == "conv2d") {
                l.kind = LayerKind::Conv2d;
                std::string pad;
                if (!(ls >> l.kh >> l.kw >> l.in_channels >> l.out_channels >> l.stride >> pad))
                    fail("malformed conv2d layer");
                if (pad == "same") l.same_pad = true;
                else if (pad == "valid") l.same_pad = false;
                else fail("conv2d padding must be 'same' or 'valid'");
            } else if (kind == "relu") {
                l.kind = LayerKind::Relu;
            } else if (kind == "maxpool2d") {
                l.kind = LayerKind::MaxPool2d;
                if (!(ls >> l.kh >> l.kw >> l.stride)) fail("malformed maxpool2d layer");
            } else if (kind == "global_average_pool") {
                l.kind = LayerKind::GlobalAveragePool;
            } else if (kind == "dropout") {
                l.kind = LayerKind::Dropout;
                if (!(ls >> l.rate)) fail("malformed dropout layer");
            } else if (kind == "flatten") {
                l.kind = LayerKind::Flatten;
            } else if (kind == "dense") {
                l.kind = LayerKind::Dense;
                if (!(ls >> l.in_features >> l.out_features)) fail("malformed dense layer");
            } else {
                fail("unknown layer kind '" + kind + "'");
            }
            model.layers.push_back(l);
        } else {
            fail("unknown manifest key '" + key + "'");
        }
    }
    if (!model.pre_scale.empty() && static_cast<int>(model.pre_scale.size()) != model.input.c)
        throw DataError(origin + ": preprocess block must carry one pair per input channel");
    shape_chain(model);  // validate
    return model;
}

inline void fill_weights_from_blob(ModelSpec& model, const std::string& blob_path) {
    std::ifstream in(blob_path, std::ios::binary);
    if (!in) throw DataError("model: cannot open weight blob '" + blob_path + "'");
    in.seekg(0, std::ios::end);
    size_t bytes = static_cast<size_t>(in.tellg());
    in.seekg(0);
    size_t expected = model.param_count() * 4;
    if (bytes != expected) {
        std::ostringstream os;
        os << "model: weight blob length mismatch for '" << blob_path << "': have " << bytes
           << " bytes, expected " << expected;
        throw DataError(os.str());
    }
    std::vector<float> raw(model.param_count());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw DataError("model: failed reading weight blob '" + blob_path + "'");
    size_t k = 0;
    for (auto& l : model.layers) {
        l.weights.resize(l.weight_count());
        for (auto& w : l.weights) w = raw[k++];
        l.bias.resize(l.bias_count());
        for (auto& b : l.bias) b = raw[k++];
    }
}

inline ModelSpec load_model(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("model: cannot open manifest '" + manifest_path + "'");
    ModelSpec model = parse_manifest(in, manifest_path);
    fill_weights_from_blob(model, weight_blob_path(manifest_path));
    return model;
}

inline void save_model(const ModelSpec& model, const std::string& manifest_path) {
    shape_chain(model);
    std::ofstream out(manifest_path);
    if (!out) throw DataError("model: cannot write manifest '" + manifest_path + "'");
    out << "name " << (model.name.empty() ? "model" : model.name) << "\n";
    out << "input " << model.input.h << ' ' << model.input.w << ' ' << model.input.c << "\n";
    if (!model.pre_scale.empty()) {
        out << "preprocess";
        for (size_t i = 0; i < model.pre_scale.size(); ++i)
            out << ' ' << model.pre_scale[i] << ' ' << model.pre_shift[i];
        out << "\n";
    }
    for (const auto& l : model.layers) {
        out << "layer " << layer_kind_name(l.kind);
        switch (l.kind) {
            case LayerKind::Conv2d:
                out << ' ' << l.kh << ' ' << l.kw << ' ' << l.in_channels << ' '
                    << l.out_channels << ' ' << l.stride << ' ' << (l.same_pad ? "same" : "valid");
                break;
            case LayerKind::MaxPool2d:
                out << ' ' << l.kh << ' ' << l.kw << ' ' << l.stride;
                break;
            case LayerKind::Dropout:
                out << ' ' << l.rate;
                break;
            case LayerKind::Dense:
                out << ' ' << l.in_features << ' ' << l.out_features;
                break;
            default:
                break;
        }
        out << "\n";
    }
    std::ofstream blob(weight_blob_path(manifest_path), std::ios::binary);
    if (!blob) throw DataError("model: cannot write weight blob");
    for (const auto& l : model.layers) {
        if (l.weights.size() != l.weight_count() || l.bias.size() != l.bias_count())
            throw DataError("model: layer parameters not populated for save");
        std::vector<float> raw;
        raw.reserve(l.param_count());
        for (double w : l.weights) raw.push_back(static_cast<float>(w));
        for (double b : l.bias) raw.push_back(static_cast<float>(b));
        blob.write(reinterpret_cast<const char*>(raw.data()),
                   static_cast<std::streamsize>(raw.size() * 4));
    }
    if (!blob) throw DataError("model: weight blob write failed");
}

}  // namespace salign

#include "tdcn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tdcn/errors.hpp"

namespace tdcn {

namespace {

constexpr char kMagic[8] = {'T', 'D', 'C', 'N', '0', '0', '0', '1'};
constexpr uint32_t kVersion = 1;
constexpr const char* kConfigName = "__config__";

template <class T>
void put_le(std::string& out, T v) {
    for (size_t i = 0; i < sizeof(T); ++i)
        out.push_back(char((uint64_t(v) >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float f) { put_le<uint32_t>(out, std::bit_cast<uint32_t>(f)); }

struct Reader {
    std::string buf;
    size_t pos = 0;
    std::string path;

    void need(size_t n) const {
        if (pos + n > buf.size())
            throw FormatError("checkpoint: " + path + " truncated at byte " +
                              std::to_string(pos));
    }
    template <class T>
    T get_le() {
        need(sizeof(T));
        uint64_t v = 0;
        for (size_t i = 0; i < sizeof(T); ++i)
            v |= uint64_t(uint8_t(buf[pos + i])) << (8 * i);
        pos += sizeof(T);
        return T(v);
    }
    float get_f32() { return std::bit_cast<float>(get_le<uint32_t>()); }
    std::string get_str(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

} // namespace

std::vector<float> encode_model_config(const ModelConfig& cfg) {
    std::vector<float> v;
    v.push_back(float(uint8_t(cfg.family)));
    v.push_back(float(cfg.task_count));
    v.push_back(float(cfg.backbone.canvas_h));
    v.push_back(float(cfg.backbone.canvas_w));
    v.push_back(float(cfg.backbone.stages.size()));
    v.push_back(float(cfg.backbone.fc_hidden));
    v.push_back(float(cfg.backbone.num_classes));
    v.push_back(float(cfg.td_width));
    v.push_back(float(cfg.lambda_loc));
    for (const auto& s : cfg.backbone.stages) {
        v.push_back(float(s.in_channels));
        v.push_back(float(s.out_channels));
        v.push_back(float(s.kernel));
        v.push_back(float(s.padding));
        v.push_back(float(s.pool));
    }
    return v;
}

ModelConfig decode_model_config(const std::vector<float>& v) {
    if (v.size() < 9) throw FormatError("checkpoint: config tensor too short");
    ModelConfig cfg;
    size_t i = 0;
    cfg.family = TaskFamily(uint8_t(v[i++]));
    cfg.task_count = int(v[i++]);
    cfg.backbone.canvas_h = int(v[i++]);
    cfg.backbone.canvas_w = int(v[i++]);
    int stages = int(v[i++]);
    cfg.backbone.fc_hidden = int(v[i++]);
    cfg.backbone.num_classes = int(v[i++]);
    cfg.td_width = int(v[i++]);
    cfg.lambda_loc = double(v[i++]);
    if (v.size() != 9 + size_t(stages) * 5)
        throw FormatError("checkpoint: config tensor size mismatch");
    for (int k = 0; k < stages; ++k) {
        StageSpec s;
        s.in_channels = int(v[i++]);
        s.out_channels = int(v[i++]);
        s.kernel = int(v[i++]);
        s.padding = int(v[i++]);
        s.pool = int(v[i++]);
        cfg.backbone.stages.push_back(s);
    }
    return cfg;
}

void save_checkpoint(const Model& model, const std::string& path) {
    std::string out;
    out.append(kMagic, sizeof kMagic);
    put_le<uint32_t>(out, kVersion);
    out.push_back(char(uint8_t(model.config().kind)));

    const auto& items = model.params().items();
    std::vector<float> cfg = encode_model_config(model.config());
    put_le<uint32_t>(out, uint32_t(items.size() + 1));

    // Reserved config tensor first.
    put_le<uint16_t>(out, uint16_t(std::strlen(kConfigName)));
    out.append(kConfigName);
    out.push_back(char(1)); // rank
    put_le<uint32_t>(out, uint32_t(cfg.size()));
    for (float f : cfg) put_f32(out, f);

    for (const auto& [name, t] : items) {
        put_le<uint16_t>(out, uint16_t(name.size()));
        out.append(name);
        out.push_back(char(uint8_t(t.shape().rank())));
        for (int d = 0; d < t.shape().rank(); ++d)
            put_le<uint32_t>(out, uint32_t(t.dim(d)));
        const real* p = t.data();
        for (int64_t i = 0; i < t.numel(); ++i) put_f32(out, float(p[i]));
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("checkpoint: cannot write " + path);
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw FormatError("checkpoint: write failed for " + path);
}

std::unique_ptr<Model> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("checkpoint: cannot open " + path);
    Reader in{std::string((std::istreambuf_iterator<char>(f)),
                          std::istreambuf_iterator<char>()),
              0, path};

    char magic[8];
    in.need(8);
    std::memcpy(magic, in.buf.data(), 8);
    in.pos = 8;
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("checkpoint: bad magic in " + path + " (expected TDCN0001)");
    uint32_t version = in.get_le<uint32_t>();
    if (version != kVersion)
        throw FormatError("checkpoint: version " + std::to_string(version) +
                          " unsupported");
    uint8_t kind_code = in.get_le<uint8_t>();
    if (kind_code > uint8_t(ModelKind::BuOnly))
        throw FormatError("checkpoint: unknown model kind code " +
                          std::to_string(kind_code));
    uint32_t count = in.get_le<uint32_t>();

    // Parse all tensors before constructing anything: a truncated file must
    // not yield a partial model.
    struct Entry {
        std::string name;
        std::vector<uint32_t> dims;
        std::vector<float> data;
    };
    std::vector<Entry> entries(count);
    for (auto& e : entries) {
        uint16_t len = in.get_le<uint16_t>();
        e.name = in.get_str(len);
        uint8_t rank = in.get_le<uint8_t>();
        int64_t numel = 1;
        e.dims.resize(rank);
        for (auto& d : e.dims) {
            d = in.get_le<uint32_t>();
            numel *= d;
        }
        e.data.resize(size_t(numel));
        for (auto& x : e.data) x = in.get_f32();
    }
    if (in.pos != in.buf.size())
        throw FormatError("checkpoint: " + path + " has trailing bytes");

    if (entries.empty() || entries[0].name != kConfigName)
        throw FormatError("checkpoint: missing " + std::string(kConfigName) +
                          " tensor in " + path);
    ModelConfig cfg = decode_model_config(entries[0].data);
    cfg.kind = ModelKind(kind_code);

    std::unique_ptr<Model> model = build_model(cfg, 0);
    size_t loaded = 0;
    for (size_t i = 1; i < entries.size(); ++i) {
        const Entry& e = entries[i];
        Tensor* t = model->params().find(e.name);
        if (!t)
            throw FormatError("checkpoint: unknown tensor '" + e.name + "' for model " +
                              model_kind_name(cfg.kind));
        if (t->shape().rank() != int(e.dims.size()))
            throw FormatError("checkpoint: tensor '" + e.name + "' rank mismatch");
        for (int d = 0; d < t->shape().rank(); ++d)
            if (uint32_t(t->dim(d)) != e.dims[d])
                throw FormatError("checkpoint: tensor '" + e.name + "' dim " +
                                  std::to_string(d) + " is " + std::to_string(e.dims[d]) +
                                  ", expected " + std::to_string(t->dim(d)));
        real* p = t->data();
        for (size_t j = 0; j < e.data.size(); ++j) p[j] = real(e.data[j]);
        ++loaded;
    }
    if (loaded != model->params().items().size())
        throw FormatError("checkpoint: " + path + " holds " + std::to_string(loaded) +
                          " tensors, model needs " +
                          std::to_string(model->params().items().size()));
    return model;
}

} // namespace tdcn

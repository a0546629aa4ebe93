#include "selfhdr/models.hpp"

#include "selfhdr/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace selfhdr {

namespace {

constexpr double kSlope = 0.1;

} // namespace

void ModelSpec::validate() const
{
    if (architecture != "attention_merge_cnn") throw InputError("unknown architecture '" + architecture + "'");
    if (width < 4) throw InputError("model width must be >= 4");
    if (blocks < 1) throw InputError("model block count must be >= 1");
    if (!(output_mu > 0.0)) throw InputError("output_mu must be > 0");
}

NetworkInput NetworkInput::from_frames(const std::array<ExposureImage, 3>& ldr, const std::array<LinearImage, 3>& linear)
{
    NetworkInput x;
    for (int k = 0; k < 3; ++k) {
        const std::array<Image, 2> parts{ldr[k].pixels, linear[k].pixels};
        x.frames[k] = concat_channels(parts);
    }
    return x;
}

NetworkInput NetworkInput::from_aligned(const AlignedStack& aligned)
{
    return from_frames(aligned.ldr, aligned.linear);
}

NetworkInput NetworkInput::from_stack(const std::array<ExposureImage, 3>& stack, const RadiometryConfig& cfg)
{
    std::array<LinearImage, 3> linear;
    for (int k = 0; k < 3; ++k) linear[k] = linearize(stack[k], stack[1].ev, cfg);
    return from_frames(stack, linear);
}

NetworkInput NetworkInput::crop(int y0, int x0, int h, int w) const
{
    NetworkInput out;
    for (int k = 0; k < 3; ++k) out.frames[k] = frames[k].crop(y0, x0, h, w);
    return out;
}

void NetworkInput::validate() const
{
    for (const Image& f : frames) {
        if (f.channels() != 6) throw InputError("network input frames must have 6 channels");
        if (!f.same_spatial(frames[1])) throw InputError("network input frames differ in size");
    }
    if (frames[1].height() < 1 || frames[1].width() < 1) throw InputError("empty network input");
}

Model::Model(ModelSpec spec) : spec_(std::move(spec))
{
    spec_.validate();
    const int w = spec_.width;
    enc1_ = nn::Conv2d("enc1", 6, w);
    enc2_ = nn::Conv2d("enc2", w, w);
    for (int k = 0; k < 2; ++k) {
        const std::string id = k == 0 ? "att1" : "att3";
        att_hidden_[k] = nn::Conv2d(id + ".hidden", 2 * w, w);
        att_out_[k] = nn::Conv2d(id + ".out", w, w);
    }
    merge_ = nn::Conv2d("merge", 3 * w, w);
    for (int b = 0; b < spec_.blocks; ++b) {
        block_dilated_.emplace_back("block" + std::to_string(b) + ".dilated", w, w, 3, 2);
        block_out_.emplace_back("block" + std::to_string(b) + ".out", w, w);
    }
    head_hidden_ = nn::Conv2d("head.hidden", w, w);
    head_out_ = nn::Conv2d("head.out", w, 3);

    std::mt19937_64 rng(spec_.seed);
    for (nn::Conv2d* conv : layers()) conv->init(rng);
    // Residual branches and the output start small so the initial map is smooth.
    for (auto& conv : block_out_) conv.init(rng, 0.1);
    head_out_.init(rng, 0.1);
}

std::vector<nn::Conv2d*> Model::layers()
{
    std::vector<nn::Conv2d*> out{&enc1_, &enc2_};
    if (spec_.attention) {
        for (int k = 0; k < 2; ++k) {
            out.push_back(&att_hidden_[k]);
            out.push_back(&att_out_[k]);
        }
    }
    out.push_back(&merge_);
    for (int b = 0; b < spec_.blocks; ++b) {
        out.push_back(&block_dilated_[b]);
        out.push_back(&block_out_[b]);
    }
    out.push_back(&head_hidden_);
    out.push_back(&head_out_);
    return out;
}

std::vector<const nn::Conv2d*> Model::layers() const
{
    std::vector<const nn::Conv2d*> out;
    for (nn::Conv2d* c : const_cast<Model*>(this)->layers()) out.push_back(c);
    return out;
}

std::vector<nn::Parameter*> Model::parameters()
{
    std::vector<nn::Parameter*> out;
    for (nn::Conv2d* c : layers()) {
        out.push_back(&c->weight);
        out.push_back(&c->bias);
    }
    return out;
}

std::vector<const nn::Parameter*> Model::parameters() const
{
    std::vector<const nn::Parameter*> out;
    for (const nn::Conv2d* c : layers()) {
        out.push_back(&c->weight);
        out.push_back(&c->bias);
    }
    return out;
}

std::size_t Model::parameter_count() const
{
    std::size_t n = 0;
    for (const nn::Parameter* p : parameters()) n += p->value.size();
    return n;
}

void Model::zero_grad()
{
    for (nn::Parameter* p : parameters()) p->zero_grad();
}

std::uint64_t Model::parameter_hash() const
{
    return nn::hash_parameters(parameters());
}

namespace {

// logit(T(H_2)) with T clamped away from 0 and 1.
Image reference_logit(const Image& frame2, double mu)
{
    constexpr double kEps = 1e-4;
    Image out = frame2.slice_channels(3, 3);
    for (double& v : out.data()) {
        const double p = std::clamp(tonemap_value(std::clamp(v, 0.0, 1.0), mu), kEps, 1.0 - kEps);
        v = std::log(p / (1.0 - p));
    }
    return out;
}

} // namespace

Image Model::forward(const NetworkInput& x) const
{
    Trace trace;
    return forward(x, trace);
}

Image Model::forward(const NetworkInput& x, Trace& t) const
{
    x.validate();
    for (int k = 0; k < 3; ++k) {
        t.input[k] = x.frames[k];
        t.enc1_pre[k] = enc1_.forward(x.frames[k]);
        t.enc1_act[k] = nn::leaky_relu(t.enc1_pre[k], kSlope);
        t.enc2_pre[k] = enc2_.forward(t.enc1_act[k]);
        t.features[k] = nn::leaky_relu(t.enc2_pre[k], kSlope);
    }

    std::array<Image, 3> merged_parts{t.features[0], t.features[1], t.features[2]};
    if (spec_.attention) {
        for (int k = 0; k < 2; ++k) {
            const int frame = k == 0 ? 0 : 2;
            const std::array<Image, 2> pair{t.features[frame], t.features[1]};
            t.att_in[k] = concat_channels(pair);
            t.att_hidden_pre[k] = att_hidden_[k].forward(t.att_in[k]);
            t.att_hidden_act[k] = nn::leaky_relu(t.att_hidden_pre[k], kSlope);
            t.attention[k] = nn::sigmoid(att_out_[k].forward(t.att_hidden_act[k]));
            merged_parts[frame] = nn::multiply(t.features[frame], t.attention[k]);
        }
    }
    t.merge_in = concat_channels(merged_parts);
    t.trunk_in = merge_.forward(t.merge_in);

    Image h = t.trunk_in;
    t.block_in.clear();
    t.block_hidden_pre.clear();
    t.block_hidden_act.clear();
    for (int b = 0; b < spec_.blocks; ++b) {
        t.block_in.push_back(h);
        t.block_hidden_pre.push_back(block_dilated_[b].forward(h));
        t.block_hidden_act.push_back(nn::leaky_relu(t.block_hidden_pre.back(), kSlope));
        nn::add_inplace(h, block_out_[b].forward(t.block_hidden_act.back()));
    }
    // Global skip from the reference features.
    nn::add_inplace(h, t.features[1]);
    t.head_in = h;
    t.head_hidden_pre = head_hidden_.forward(h);
    t.head_hidden_act = nn::leaky_relu(t.head_hidden_pre, kSlope);
    Image logits = head_out_.forward(t.head_hidden_act);
    if (spec_.reference_skip) {
        t.skip_logit = reference_logit(x.frames[1], spec_.output_mu);
        nn::add_inplace(logits, t.skip_logit);
    }
    t.sigmoid_out = nn::sigmoid(logits);

    t.output = t.sigmoid_out;
    for (double& v : t.output.data()) v = std::clamp(inverse_tonemap_value(v, spec_.output_mu), 0.0, 1.0);
    return t.output;
}

void Model::backward(const Trace& t, const Image& grad_output)
{
    require_same_shape(grad_output, t.output, "Model::backward");
    const double log_mu = std::log1p(spec_.output_mu);

    Image g = grad_output;
    for (std::size_t i = 0; i < g.size(); ++i) {
        g.data()[i] *= log_mu * std::exp(t.sigmoid_out.data()[i] * log_mu) / spec_.output_mu;
    }
    g = nn::sigmoid_backward(t.sigmoid_out, g);
    g = head_out_.backward(t.head_hidden_act, g);
    g = nn::leaky_relu_backward(t.head_hidden_pre, g, kSlope);
    Image g_h = head_hidden_.backward(t.head_in, g);

    std::array<Image, 3> g_features;
    for (int k = 0; k < 3; ++k) g_features[k] = Image(t.features[k].height(), t.features[k].width(), t.features[k].channels());
    nn::add_inplace(g_features[1], g_h);

    for (int b = spec_.blocks - 1; b >= 0; --b) {
        Image gb = block_out_[b].backward(t.block_hidden_act[b], g_h);
        gb = nn::leaky_relu_backward(t.block_hidden_pre[b], gb, kSlope);
        nn::add_inplace(g_h, block_dilated_[b].backward(t.block_in[b], gb));
    }
    const Image g_merge = merge_.backward(t.merge_in, g_h);
    const int w = spec_.width;
    std::array<Image, 3> g_parts{g_merge.slice_channels(0, w), g_merge.slice_channels(w, w),
                                 g_merge.slice_channels(2 * w, w)};

    nn::add_inplace(g_features[1], g_parts[1]);
    for (int k = 0; k < 2; ++k) {
        const int frame = k == 0 ? 0 : 2;
        if (!spec_.attention) {
            nn::add_inplace(g_features[frame], g_parts[frame]);
            continue;
        }
        nn::add_inplace(g_features[frame], nn::multiply(g_parts[frame], t.attention[k]));
        Image g_att = nn::multiply(g_parts[frame], t.features[frame]);
        g_att = nn::sigmoid_backward(t.attention[k], g_att);
        g_att = att_out_[k].backward(t.att_hidden_act[k], g_att);
        g_att = nn::leaky_relu_backward(t.att_hidden_pre[k], g_att, kSlope);
        const Image g_in = att_hidden_[k].backward(t.att_in[k], g_att);
        nn::add_inplace(g_features[frame], g_in.slice_channels(0, w));
        nn::add_inplace(g_features[1], g_in.slice_channels(w, w));
    }

    for (int k = 0; k < 3; ++k) {
        Image ge = nn::leaky_relu_backward(t.enc2_pre[k], g_features[k], kSlope);
        ge = enc2_.backward(t.enc1_act[k], ge);
        ge = nn::leaky_relu_backward(t.enc1_pre[k], ge, kSlope);
        enc1_.backward(t.input[k], ge);
    }
}

Model build_model(const ModelSpec& spec)
{
    return Model(spec);
}

// --- checkpoints -------------------------------------------------------------

namespace {

void put_u32(std::ostream& out, std::uint32_t v)
{
    for (int b = 0; b < 4; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xff));
}

void put_u64(std::ostream& out, std::uint64_t v)
{
    for (int b = 0; b < 8; ++b) out.put(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_uint(std::istream& in, int bytes, const std::filesystem::path& path)
{
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) {
        char c = 0;
        if (!in.get(c)) throw DataError("truncated checkpoint: " + path.string());
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * b);
    }
    return v;
}

ModelSpec read_spec(std::istream& in, const std::filesystem::path& path)
{
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "SHCK", 4) != 0) {
        throw DataError("not a checkpoint (bad magic): " + path.string());
    }
    const auto version = get_uint(in, 4, path);
    if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version in " + path.string());
    const auto arch_len = get_uint(in, 4, path);
    if (arch_len > 256) throw DataError("corrupt checkpoint header: " + path.string());
    std::string arch(arch_len, '\0');
    if (!in.read(arch.data(), static_cast<std::streamsize>(arch_len))) throw DataError("truncated checkpoint: " + path.string());
    ModelSpec spec;
    spec.architecture = arch;
    spec.width = static_cast<int>(get_uint(in, 4, path));
    spec.blocks = static_cast<int>(get_uint(in, 4, path));
    spec.attention = get_uint(in, 4, path) != 0;
    spec.reference_skip = get_uint(in, 4, path) != 0;
    spec.seed = get_uint(in, 8, path);
    spec.output_mu = std::bit_cast<double>(get_uint(in, 8, path));
    return spec;
}

} // namespace

void save_params(const Model& model, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    const ModelSpec& spec = model.spec();
    out.write("SHCK", 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(spec.architecture.size()));
    out.write(spec.architecture.data(), static_cast<std::streamsize>(spec.architecture.size()));
    put_u32(out, static_cast<std::uint32_t>(spec.width));
    put_u32(out, static_cast<std::uint32_t>(spec.blocks));
    put_u32(out, spec.attention ? 1u : 0u);
    put_u32(out, spec.reference_skip ? 1u : 0u);
    put_u64(out, spec.seed);
    put_u64(out, std::bit_cast<std::uint64_t>(spec.output_mu));
    put_u64(out, model.parameter_count());
    for (const nn::Parameter* p : model.parameters()) {
        for (double v : p->value) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) throw DataError("write failed: " + path.string());
}

ModelSpec read_checkpoint_spec(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    return read_spec(in, path);
}

Model load_params(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    ModelSpec spec;
    try {
        spec = read_spec(in, path);
        spec.validate();
    } catch (const InputError& e) {
        throw DataError(std::string("invalid model spec in checkpoint: ") + e.what());
    }
    Model model(spec);
    const auto count = get_uint(in, 8, path);
    if (count != model.parameter_count()) {
        throw DataError("checkpoint parameter count does not match its spec: " + path.string());
    }
    for (nn::Parameter* p : model.parameters()) {
        for (double& v : p->value) v = std::bit_cast<double>(get_uint(in, 8, path));
    }
    return model;
}

Model load_params(const std::filesystem::path& path, const ModelSpec& expected)
{
    const ModelSpec found = read_checkpoint_spec(path);
    // The seed only determines initialization, so it is not part of the match.
    ModelSpec a = found;
    ModelSpec b = expected;
    a.seed = b.seed = 0;
    if (!(a == b)) {
        throw DataError("checkpoint " + path.string() + " was written for a different model spec (width " +
                        std::to_string(found.width) + ", blocks " + std::to_string(found.blocks) + ")");
    }
    return load_params(path);
}

} // namespace selfhdr

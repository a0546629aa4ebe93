#pragma once

#include "selfhdr/alignment.hpp"
#include "selfhdr/image.hpp"
#include "selfhdr/nn.hpp"
#include "selfhdr/radiometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace selfhdr {

struct ModelSpec {
    std::string architecture = "attention_merge_cnn";
    int width = 8;
    int blocks = 2;
    bool attention = true;
    /// Head predicts a logit offset around T(H_2) instead of the output itself.
    bool reference_skip = true;
    std::uint64_t seed = 0;
    /// Mu of the inverse mu-law applied after the output sigmoid.
    double output_mu = 5000.0;

    void validate() const;
    bool operator==(const ModelSpec&) const = default;
};

/// Three frames, each concat(I_i, H_i): 6 channels, gamma-domain first.
struct NetworkInput {
    std::array<Image, 3> frames;

    static NetworkInput from_frames(const std::array<ExposureImage, 3>& ldr, const std::array<LinearImage, 3>& linear);
    static NetworkInput from_aligned(const AlignedStack& aligned);
    /// Linearizes the raw stack against frame 2 (no alignment).
    static NetworkInput from_stack(const std::array<ExposureImage, 3>& stack, const RadiometryConfig& cfg);

    int height() const { return frames[1].height(); }
    int width() const { return frames[1].width(); }
    NetworkInput crop(int y0, int x0, int h, int w) const;
    void validate() const;
};

/// Attention-guided merging CNN: a shared two-layer encoder per frame,
/// sigmoid attention on the non-reference features, a trunk of dilated
/// residual blocks and a bounded output head.
class Model {
public:
    explicit Model(ModelSpec spec);

    /// Activations retained for the backward pass.
    struct Trace {
        std::array<Image, 3> input;
        std::array<Image, 3> enc1_pre;
        std::array<Image, 3> enc1_act;
        std::array<Image, 3> enc2_pre;
        std::array<Image, 3> features;
        std::array<Image, 2> att_in;
        std::array<Image, 2> att_hidden_pre;
        std::array<Image, 2> att_hidden_act;
        std::array<Image, 2> attention;
        Image merge_in;
        Image trunk_in;
        std::vector<Image> block_in;
        std::vector<Image> block_hidden_pre;
        std::vector<Image> block_hidden_act;
        Image head_in;
        Image head_hidden_pre;
        Image head_hidden_act;
        Image skip_logit;
        Image sigmoid_out;
        Image output;
    };

    const ModelSpec& spec() const { return spec_; }

    Image forward(const NetworkInput& x) const;
    Image forward(const NetworkInput& x, Trace& trace) const;
    /// Accumulates parameter gradients for d(loss)/d(output) = `grad_output`.
    void backward(const Trace& trace, const Image& grad_output);

    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;
    std::size_t parameter_count() const;
    void zero_grad();
    std::uint64_t parameter_hash() const;

private:
    std::vector<nn::Conv2d*> layers();
    std::vector<const nn::Conv2d*> layers() const;

    ModelSpec spec_;
    nn::Conv2d enc1_;
    nn::Conv2d enc2_;
    std::array<nn::Conv2d, 2> att_hidden_;
    std::array<nn::Conv2d, 2> att_out_;
    nn::Conv2d merge_;
    std::vector<nn::Conv2d> block_dilated_;
    std::vector<nn::Conv2d> block_out_;
    nn::Conv2d head_hidden_;
    nn::Conv2d head_out_;
};

Model build_model(const ModelSpec& spec);

/// Checkpoint: "SHCK", u32 version, spec fields, parameter count, raw float64 blob.
void save_params(const Model& model, const std::filesystem::path& path);
Model load_params(const std::filesystem::path& path);
/// Rejects the checkpoint unless it was written for `expected`.
Model load_params(const std::filesystem::path& path, const ModelSpec& expected);
ModelSpec read_checkpoint_spec(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

} // namespace selfhdr

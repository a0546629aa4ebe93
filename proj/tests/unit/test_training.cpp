#include "selfhdr/data.hpp"
#include "selfhdr/error.hpp"
#include "selfhdr/training.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace selfhdr;

namespace {

std::vector<Scene> toy_scenes(int count, std::uint64_t base_seed, MotionKind only = MotionKind::none, int size = 64)
{
    std::vector<Scene> out;
    for (int i = 0; i < count; ++i) {
        MotionKind kind = only;
        if (only == MotionKind::none) kind = i % 2 == 0 ? MotionKind::moving_rect : MotionKind::global_shift;
        Scene s = synthesize_scene(random_synthetic_spec(kind, size, 5.0, base_seed + i));
        s.id = "toy_" + std::to_string(i);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SceneSupervision> supervise(const std::vector<Scene>& scenes, const TrainConfig& cfg)
{
    const auto est = make_flow_estimator(cfg.flow);
    std::vector<SceneSupervision> out;
    for (const auto& s : scenes) out.push_back(build_scene_supervision(s, *est, cfg.thresholds, cfg.radiometry));
    return out;
}

// One desk-scale structure run on 8 toy scenes, shared by the tests below.
class ToyStructureRun : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        cfg_ = new TrainConfig(TrainConfig::desk());
        cfg_->seed = 3;
        dataset_ = new std::vector<SceneSupervision>(supervise(toy_scenes(8, 1000), *cfg_));
        auto [model, report] = train_structure_phase(*dataset_, *cfg_);
        structure_ = new Model(std::move(model));
        report_ = new PhaseReport(std::move(report));
    }
    static void TearDownTestSuite()
    {
        delete cfg_;
        delete dataset_;
        delete structure_;
        delete report_;
    }

    static TrainConfig* cfg_;
    static std::vector<SceneSupervision>* dataset_;
    static Model* structure_;
    static PhaseReport* report_;
};

TrainConfig* ToyStructureRun::cfg_ = nullptr;
std::vector<SceneSupervision>* ToyStructureRun::dataset_ = nullptr;
Model* ToyStructureRun::structure_ = nullptr;
PhaseReport* ToyStructureRun::report_ = nullptr;

} // namespace

TEST(LrSchedule, PaperProtocol)
{
    const TrainConfig cfg = TrainConfig::paper();
    EXPECT_DOUBLE_EQ(lr_schedule(0, cfg), 1e-4);
    EXPECT_DOUBLE_EQ(lr_schedule(49, cfg), 1e-4);
    EXPECT_DOUBLE_EQ(lr_schedule(50, cfg), 5e-5);
    EXPECT_DOUBLE_EQ(lr_schedule(100, cfg), 2.5e-5);
    EXPECT_THROW((void)lr_schedule(150, cfg), InputError);
    EXPECT_THROW((void)lr_schedule(-1, cfg), InputError);
}

TEST(LrSchedule, PeriodEqualToEpochsIsConstant)
{
    TrainConfig cfg = TrainConfig::desk();
    cfg.lr_halving_period = cfg.epochs;
    for (int e = 0; e < cfg.epochs; ++e) EXPECT_EQ(lr_schedule(e, cfg), cfg.lr0);
}

TEST(TrainConfig, PresetsAndValidation)
{
    const TrainConfig paper = TrainConfig::paper();
    EXPECT_EQ(paper.patch_size, 128);
    EXPECT_EQ(paper.batch_size, 16);
    EXPECT_EQ(paper.epochs, 150);
    EXPECT_EQ(paper.beta1, 0.9);
    EXPECT_EQ(paper.beta2, 0.999);
    EXPECT_EQ(paper.loss.lambda_sp, 4.0);
    EXPECT_EQ(paper.loss.lambda_stru, 1.0);
    const TrainConfig desk = TrainConfig::desk();
    EXPECT_EQ(desk.patch_size, 64);
    EXPECT_EQ(desk.model.width, 8);
    EXPECT_EQ(desk.epochs, 30);
    TrainConfig bad = desk;
    bad.batch_size = 0;
    EXPECT_THROW(bad.validate(), InputError);
}

TEST(TrainConfig, JsonRoundTripSectionsAndUnknownKeys)
{
    TrainConfig cfg = TrainConfig::desk();
    cfg.seed = 17;
    cfg.use_mask_se = false;
    cfg.loss.perceptual_layers = {0, 2};
    const TrainConfig back = train_config_from_json(train_config_to_json(cfg));
    EXPECT_EQ(train_config_to_json(back), train_config_to_json(cfg));

    const TrainConfig sec =
        train_config_from_json(R"({"preset":"paper","epochs":10,"lr_halving_period":5,"train":{"epochs":4}})", "train");
    EXPECT_EQ(sec.epochs, 4);
    EXPECT_EQ(sec.patch_size, 128);
    EXPECT_EQ(train_config_from_json(R"({"epochs":10,"train":{"epochs":4}})", "infer").epochs, 10);
    EXPECT_THROW((void)train_config_from_json(R"({"epochz":3})"), InputError);
    EXPECT_THROW((void)train_config_from_json(R"({"epochs":"many"})"), InputError);
    EXPECT_THROW((void)train_config_from_json("not json"), InputError);
}

TEST(PatchSampler, CoversCroppableRegion)
{
    const int size = 160;
    const int patch = 128;
    const PatchSampler sampler(size, size, patch);
    std::mt19937_64 rng(0);
    std::vector<int> row_hits(size, 0);
    std::vector<int> col_hits(size, 0);
    std::set<int> ys;
    std::set<int> xs;
    for (int i = 0; i < 10000; ++i) {
        const auto [y, x] = sampler.draw(rng);
        ASSERT_GE(y, 0);
        ASSERT_LE(y, size - patch);
        ASSERT_LE(x, size - patch);
        ys.insert(y);
        xs.insert(x);
        ++row_hits[y];
        ++row_hits[y + patch - 1];
        ++col_hits[x];
        ++col_hits[x + patch - 1];
    }
    EXPECT_EQ(ys.size(), static_cast<std::size_t>(size - patch + 1));
    EXPECT_EQ(xs.size(), static_cast<std::size_t>(size - patch + 1));
    // Every pixel lies inside some drawn patch: the extreme corners are reached in both axes.
    EXPECT_EQ(*ys.begin(), 0);
    EXPECT_EQ(*ys.rbegin(), size - patch);
    EXPECT_THROW(PatchSampler(64, 64, 65), InputError);
}

TEST(StructurePhase, RequiresSupervisionArtifacts)
{
    TrainConfig cfg = TrainConfig::desk();
    cfg.patch_size = 32;
    auto data = supervise(toy_scenes(1, 5, MotionKind::moving_rect, 32), cfg);
    data[0].m_se.values = Image();
    EXPECT_THROW((void)train_structure_phase(data, cfg), DataError);
}

TEST(StructurePhase, PatchLargerThanSceneRejected)
{
    TrainConfig cfg = TrainConfig::desk();
    auto data = supervise(toy_scenes(1, 5, MotionKind::moving_rect, 32), cfg);
    EXPECT_THROW((void)train_structure_phase(data, cfg), InputError);
}

TEST(ReconstructionPhase, RequiresStructureComponent)
{
    TrainConfig cfg = TrainConfig::desk();
    cfg.patch_size = 32;
    const auto data = supervise(toy_scenes(1, 6, MotionKind::moving_rect, 32), cfg);
    EXPECT_THROW((void)train_reconstruction_phase(data, cfg), DataError);
}

TEST(Training, SameSeedIdenticalCurvesAndParameters)
{
    TrainConfig cfg = TrainConfig::desk();
    cfg.patch_size = 24;
    cfg.epochs = 3;
    cfg.lr_halving_period = 2;
    cfg.epoch_repeats = 2;
    const auto data = supervise(toy_scenes(3, 40, MotionKind::none, 32), cfg);
    const auto [a, ra] = train_structure_phase(data, cfg);
    const auto [b, rb] = train_structure_phase(data, cfg);
    EXPECT_EQ(ra.loss_curve, rb.loss_curve);
    EXPECT_EQ(a.parameter_hash(), b.parameter_hash());
    EXPECT_EQ(ra.loss_curve.size(), 3u);

    TrainConfig no_sp = cfg;
    no_sp.loss.lambda_sp = 0.0;
    const auto [c, rc] = train_structure_phase(data, no_sp);
    EXPECT_NE(rc.loss_curve, ra.loss_curve);
    EXPECT_NE(c.parameter_hash(), a.parameter_hash());

    TrainConfig augmented = cfg;
    augmented.augment = true;
    const auto [d, rd] = train_structure_phase(data, augmented);
    EXPECT_NE(d.parameter_hash(), a.parameter_hash());
}

TEST(Training, ReconstructionPhaseLeavesStructureNetUntouched)
{
    TrainConfig cfg = TrainConfig::desk();
    cfg.patch_size = 24;
    cfg.epochs = 2;
    cfg.epoch_repeats = 1;
    auto data = supervise(toy_scenes(2, 50, MotionKind::none, 32), cfg);
    const auto [s, rs] = train_structure_phase(data, cfg);
    const auto before = s.parameter_hash();
    const auto extractor_before = PerceptualExtractor::random(cfg.loss.perceptual_seed).parameter_hash();
    const auto [r, rr] = train_reconstruction_phase(data, s, cfg);
    EXPECT_EQ(s.parameter_hash(), before);
    EXPECT_EQ(PerceptualExtractor::random(cfg.loss.perceptual_seed).parameter_hash(), extractor_before);
    EXPECT_EQ(rr.phase, "reconstruction");
    for (const auto& d : data) EXPECT_TRUE(d.y_stru && d.m_color);
}

TEST(PhaseReport, JsonRoundTrip)
{
    PhaseReport r;
    r.phase = "structure";
    r.loss_curve = {0.5, 0.25};
    r.checkpoint = "s.ckpt";
    r.wall_time_s = 1.5;
    r.validation = MetricReport::from_scenes({SceneMetrics{"a", 30.0, 40.0, 0.9, 0.95}});
    const PhaseReport back = PhaseReport::from_json(r.to_json());
    EXPECT_EQ(back.loss_curve, r.loss_curve);
    EXPECT_EQ(back.checkpoint, "s.ckpt");
    ASSERT_TRUE(back.validation);
    EXPECT_EQ(back.validation->mean.psnr_u, 40.0);
    EXPECT_THROW((void)PhaseReport::from_json("{}"), DataError);
}

TEST(Infer, ShapeRangeAndDeterminism)
{
    const Model m = build_model({});
    const Scene s = synthesize_scene(random_synthetic_spec(MotionKind::moving_rect, 40, 3.0, 77));
    const HdrImage a = infer(m, s.frames);
    const HdrImage b = infer(m, s.frames);
    EXPECT_EQ(a.pixels.height(), 40);
    EXPECT_EQ(a.pixels.channels(), 3);
    EXPECT_GE(a.pixels.min_value(), 0.0);
    EXPECT_LE(a.pixels.max_value(), 1.0);
    EXPECT_EQ(a.pixels.data(), b.pixels.data());
}

TEST_F(ToyStructureRun, LossCurveHasOneEntryPerEpochAndDecreases)
{
    ASSERT_EQ(report_->loss_curve.size(), static_cast<std::size_t>(cfg_->epochs));
    EXPECT_LT(report_->loss_curve.back(), report_->loss_curve.front());
    RecordProperty("final_over_first", std::to_string(report_->loss_curve.back() / report_->loss_curve.front()));
}

TEST_F(ToyStructureRun, StructureComponentKeepsStaticQuality)
{
    const auto est = make_flow_estimator(cfg_->flow);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const Scene s = synthesize_scene(random_synthetic_spec(MotionKind::none, 64, 0.0, 2000 + seed));
        const ColorComponent cc = build_color_component(s.frames, *est, cfg_->radiometry);
        const HdrImage y_stru = build_structure_component(*structure_, cc.aligned);
        const double p_stru = psnr_u(y_stru.pixels, s.ground_truth->pixels);
        const double p_color = psnr_u(cc.y_color.pixels, s.ground_truth->pixels);
        EXPECT_GE(p_stru, p_color - 1.0) << "seed " << seed;
    }
}

TEST_F(ToyStructureRun, MaskedReconstructionNotWorseThanMasksOff)
{
    auto data = *dataset_;
    for (auto& d : data) attach_structure_component(d, *structure_, cfg_->thresholds, cfg_->radiometry);
    std::vector<Scene> held_out;
    for (int i = 0; i < 3; ++i) held_out.push_back(synthesize_scene(random_synthetic_spec(MotionKind::moving_rect, 64, 5.0, 3000 + i)));

    const auto [masked, rm] = train_reconstruction_phase(std::span<const SceneSupervision>(data), *cfg_, held_out);
    TrainConfig off = *cfg_;
    off.use_mask_color = false;
    const auto [unmasked, ru] = train_reconstruction_phase(std::span<const SceneSupervision>(data), off, held_out);
    ASSERT_TRUE(rm.validation && ru.validation);
    EXPECT_LE(ru.validation->mean.psnr_u, rm.validation->mean.psnr_u);
}

TEST(StructurePhase, PlainHeadToyRunDropsBelowQuarterOfFirstEpoch)
{
    TrainConfig cfg = TrainConfig::desk();
    cfg.seed = 3;
    cfg.model.reference_skip = false;
    const auto data = supervise(toy_scenes(8, 1000), cfg);
    const auto [s, report] = train_structure_phase(data, cfg);
    EXPECT_LT(report.loss_curve.back(), 0.25 * report.loss_curve.front());
}

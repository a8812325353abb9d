#include <gtest/gtest.h>
#include <torch/torch.h>

#include <cmath>
#include <numbers>
#include <random>

#include "scribformer/acam.hpp"
#include "scribformer/decoders.hpp"
#include "scribformer/encoder.hpp"
#include "scribformer/model.hpp"
#include "test_support.hpp"

using namespace scribformer;
using scribformer::testing::numeric_grad;
using scribformer::testing::rel_error;
using scribformer::testing::toy_encoder;

namespace {

void zero_all(torch::nn::Module& m) {
    torch::NoGradGuard g;
    for (auto& p : m.parameters()) p.zero_();
}

} // namespace

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

TEST(Stem, ResolutionAt256) {
    torch::manual_seed(0);
    Stem stem(1, 16, 32);
    auto [c1, c2] = stem(torch::rand({1, 1, 256, 256}));
    EXPECT_EQ(c1.sizes(), torch::IntArrayRef({1, 16, 128, 128}));
    EXPECT_EQ(c2.sizes(), torch::IntArrayRef({1, 32, 64, 64}));
}

TEST(Stem, ZeroImageFiniteAndDeterministic) {
    torch::manual_seed(0);
    Stem stem(1, 16, 32);
    stem->eval();
    auto [a1, a2] = stem(torch::zeros({1, 1, 64, 64}));
    EXPECT_TRUE(torch::isfinite(a2).all().item<bool>());
    auto x = torch::rand({2, 1, 64, 64});
    auto [b1, b2] = stem(x);
    auto [d1, d2] = stem(x.clone());
    EXPECT_TRUE(torch::equal(b2, d2));
}

TEST(ConvBlock, HalvesResolutionAtStage3) {
    torch::manual_seed(0);
    ConvStage stage(32, 64, kStageStride[2]);
    auto y = stage(torch::rand({1, 32, 32, 32}));
    EXPECT_EQ(y.sizes(), torch::IntArrayRef({1, 64, 16, 16}));
}

TEST(ConvBlock, ZeroResidualBranchPassesInputThroughRelu) {
    torch::manual_seed(0);
    Bottleneck b(8, 8, 1);
    {
        torch::NoGradGuard g;
        b->expand_bn->weight.zero_();
        b->expand_bn->bias.zero_();
    }
    auto x = torch::randn({2, 8, 6, 6});
    EXPECT_TRUE(torch::allclose(b(x), torch::relu(x)));
}

TEST(ConvBlock, InputGradientMatchesFiniteDifferences) {
    torch::manual_seed(3);
    Bottleneck b(2, 4, 2);
    b->to(torch::kDouble);
    b->eval();
    auto w = torch::randn({1, 4, 2, 2}, torch::kDouble);
    auto x = torch::randn({1, 2, 4, 4}, torch::kDouble).requires_grad_(true);
    (b(x) * w).sum().backward();
    auto num = numeric_grad([&](const torch::Tensor& v) { return (b(v) * w).sum().item<double>(); }, x, 1e-6);
    EXPECT_LT(rel_error(x.grad(), num), 1e-4);
}

TEST(PatchProjection, TokenCountForPatch4) {
    torch::manual_seed(0);
    PatchProjection p(32, 128, 4, 16);
    auto t = p(torch::rand({1, 32, 64, 64}));
    EXPECT_EQ(t.tokens.sizes(), torch::IntArrayRef({1, 256, 128}));
    EXPECT_EQ(t.grid_h, 16);
    EXPECT_EQ(t.grid_w, 16);
}

TEST(PatchProjection, ZeroInputAndEmbeddingGiveZeroTokens) {
    PatchProjection p(8, 16, 4, 4);
    {
        torch::NoGradGuard g;
        p->proj->bias.zero_();
        p->pos_embed.zero_();
    }
    auto t = p(torch::zeros({1, 8, 16, 16}));
    EXPECT_EQ(t.tokens.abs().max().item<float>(), 0.0f);
}

TEST(PatchProjection, RejectsIndivisibleGrid) {
    PatchProjection p(8, 16, 4, 4);
    EXPECT_THROW(p(torch::zeros({1, 8, 18, 16})), ConfigError);
}

TEST(TransformerBlock, PreservesShapeAndAttentionRowsSumToOne) {
    torch::manual_seed(0);
    TransformerBlock blk(32, 4, 4.0);
    auto x = torch::randn({2, 10, 32});
    EXPECT_EQ(blk(x).sizes(), x.sizes());
    auto attn = blk->attention_weights(blk->norm1(x));
    EXPECT_EQ(attn.sizes(), torch::IntArrayRef({2, 4, 10, 10}));
    EXPECT_TRUE(attn.ge(0).all().item<bool>());
    EXPECT_LT((attn.sum(-1) - 1).abs().max().item<float>(), 1e-6f);
}

TEST(TransformerBlock, InputGradientMatchesFiniteDifferences) {
    torch::manual_seed(5);
    TransformerBlock blk(8, 2, 4.0);
    blk->to(torch::kDouble);
    auto w = torch::randn({1, 3, 8}, torch::kDouble);
    auto x = torch::randn({1, 3, 8}, torch::kDouble).requires_grad_(true);
    (blk(x) * w).sum().backward();
    auto num = numeric_grad([&](const torch::Tensor& v) { return (blk(v) * w).sum().item<double>(); }, x, 1e-6);
    EXPECT_LT(rel_error(x.grad(), num), 1e-4);
}

TEST(Fcu, DownWithZeroFeaturesIsIdentity) {
    torch::manual_seed(0);
    FcuDown down(16, 32);
    {
        torch::NoGradGuard g;
        down->align->bias.zero_();
    }
    TokenSequence t{torch::randn({1, 16, 32}), 4, 4};
    auto out = down(torch::zeros({1, 16, 16, 16}), t);
    EXPECT_TRUE(torch::allclose(out.tokens, t.tokens));
}

TEST(Fcu, DownWithZeroTokensIsAlignedConvPath) {
    torch::manual_seed(0);
    FcuDown down(16, 32);
    auto f = torch::randn({1, 16, 16, 16});
    TokenSequence t{torch::zeros({1, 16, 32}), 4, 4};
    auto expected = torch::gelu(down->norm(torch::avg_pool2d(down->align(f), {4, 4}, {4, 4}).flatten(2).transpose(1, 2)));
    EXPECT_TRUE(torch::allclose(down(f, t).tokens, expected));
}

TEST(Fcu, PoolWindowGeometry) {
    EXPECT_EQ(fcu_pool_window(64, 16), 4);
    EXPECT_EQ(fcu_pool_window(16, 16), 1);
    EXPECT_THROW(fcu_pool_window(60, 16), ContractViolation);
}

TEST(Fcu, UpWithZeroTokensAndZeroShiftIsZero) {
    FcuUp up(32, 16);
    {
        torch::NoGradGuard g;
        up->align->bias.zero_();
        up->bn->bias.zero_();
    }
    auto out = up(TokenSequence{torch::zeros({1, 16, 32}), 4, 4}, 16, 16);
    EXPECT_EQ(out.abs().max().item<float>(), 0.0f);
}

TEST(Fcu, UpIdentityAtGridSizeAndCornersPreservedAt2x) {
    torch::manual_seed(0);
    FcuUp up(8, 4);
    up->eval();
    TokenSequence t{torch::randn({1, 16, 8}), 4, 4};
    auto same = up(t, 4, 4);
    auto x = t.tokens.transpose(1, 2).reshape({1, 8, 4, 4});
    EXPECT_TRUE(torch::allclose(same, torch::relu(up->bn(up->align(x)))));
    auto big = up(t, 8, 8);
    for (auto [i, j, si, sj] : {std::array<int64_t, 4>{0, 0, 0, 0}, {0, 7, 0, 3}, {7, 0, 3, 0}, {7, 7, 3, 3}})
        EXPECT_TRUE(torch::allclose(big.index({0, torch::indexing::Slice(), i, j}),
                                    same.index({0, torch::indexing::Slice(), si, sj})));
}

class EncoderSchedule : public ::testing::TestWithParam<int64_t> {};

TEST_P(EncoderSchedule, FollowsResolutionSchedule) {
    const auto S = GetParam();
    torch::manual_seed(0);
    auto cfg = toy_encoder(S);
    HybridEncoder enc(cfg);
    enc->eval();
    torch::NoGradGuard g;
    auto st = enc(torch::rand({1, 1, S, S}));
    const std::array<int64_t, 5> expect{S / 2, S / 4, S / 8, S / 16, S / 16};
    for (size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(st.conv_features[i].size(1), cfg.channels[i]);
        EXPECT_EQ(st.conv_features[i].size(2), expect[i]);
        EXPECT_EQ(st.conv_features[i].size(3), expect[i]);
    }
    EXPECT_EQ(st.final_tokens.sizes(), torch::IntArrayRef({1, (S / 16) * (S / 16), cfg.token_dim}));
    ASSERT_EQ(st.stage_tokens.size(), 3u);
    for (const auto& t : st.stage_tokens) EXPECT_EQ(t.sizes(), st.final_tokens.sizes());
}

INSTANTIATE_TEST_SUITE_P(Sizes, EncoderSchedule, ::testing::Values(64, 128, 256));

TEST(Encoder, DisabledTransformerIsPureConvPyramid) {
    torch::manual_seed(0);
    HybridEncoder enc(toy_encoder(64));
    enc->set_transformer_enabled(false);
    enc->eval();
    torch::NoGradGuard g;
    auto x = torch::rand({2, 1, 64, 64});
    auto st = enc(x);
    auto [c1, c2] = enc->stem(x);
    auto f = c2;
    for (size_t s = 0; s < 3; ++s) {
        f = enc->conv[s](f);
        EXPECT_TRUE(torch::equal(st.conv_features[s + 2], f));
    }
    EXPECT_EQ(st.final_tokens.abs().max().item<float>(), 0.0f);
}

TEST(Encoder, ForwardIsFiniteAndRepeatable) {
    torch::manual_seed(0);
    HybridEncoder enc(toy_encoder(64));
    enc->eval();
    torch::NoGradGuard g;
    auto x = torch::rand({2, 1, 64, 64});
    auto a = enc(x), b = enc(x);
    for (size_t i = 0; i < 5; ++i) {
        EXPECT_TRUE(torch::isfinite(a.conv_features[i]).all().item<bool>());
        EXPECT_TRUE(torch::equal(a.conv_features[i], b.conv_features[i]));
    }
    EXPECT_TRUE(torch::equal(a.final_tokens, b.final_tokens));
}

TEST(Encoder, RejectsSizesNotDivisibleBy32) {
    HybridEncoder enc(toy_encoder(64));
    EXPECT_THROW(enc(torch::rand({1, 1, 48, 64})), ValidationError);
}

TEST(Encoder, EndToEndParameterGradientsMatchFiniteDifferences) {
    torch::manual_seed(11);
    EncoderConfig cfg;
    cfg.channels = {8, 8, 8, 8, 8};
    cfg.token_dim = 8;
    cfg.num_heads = 2;
    cfg.patch_size = 4;
    cfg.base_image_size = 32;
    HybridEncoder enc(cfg);
    enc->to(torch::kDouble);
    enc->eval();
    {
        // Fresh BatchNorm biases are exactly 0, which parks dead-ReLU paths on the kink.
        torch::NoGradGuard g;
        for (auto& item : enc->named_parameters())
            if (item.key().ends_with(".bias")) item.value().add_(torch::randn_like(item.value()) * 0.1);
    }
    auto x = torch::rand({1, 1, 32, 32}, torch::kDouble);
    auto first = enc(x);
    std::vector<torch::Tensor> weights;
    for (const auto& f : first.conv_features) weights.push_back(torch::randn_like(f));
    auto wt = torch::randn_like(first.final_tokens);
    auto scalar = [&]() {
        auto st = enc(x);
        auto s = (st.final_tokens * wt).sum();
        for (size_t i = 0; i < 5; ++i) s = s + (st.conv_features[i] * weights[i]).sum();
        return s;
    };
    enc->zero_grad();
    scalar().backward();

    // Sample 1% of all scalar parameters.
    std::vector<std::pair<torch::Tensor, int64_t>> picks;
    std::mt19937_64 rng(7);
    int64_t total = 0;
    for (auto& p : enc->parameters()) total += p.numel();
    const auto want = std::max<int64_t>(1, total / 100);
    auto params = enc->parameters();
    std::vector<double> analytic, numeric;
    for (int64_t n = 0; n < want; ++n) {
        auto& p = params[std::uniform_int_distribution<size_t>(0, params.size() - 1)(rng)];
        const auto i = std::uniform_int_distribution<int64_t>(0, p.numel() - 1)(rng);
        auto flat = p.view({-1});
        analytic.push_back(p.grad().view({-1})[i].item<double>());
        torch::NoGradGuard g;
        const double orig = flat[i].item<double>(), h = 1e-6;
        flat[i].fill_(orig + h);
        const double up = scalar().item<double>();
        flat[i].fill_(orig - h);
        const double down = scalar().item<double>();
        flat[i].fill_(orig);
        numeric.push_back((up - down) / (2 * h));
    }
    EXPECT_LT(rel_error(torch::tensor(analytic), torch::tensor(numeric)), 1e-3);
}

// ---------------------------------------------------------------------------
// Decoders
// ---------------------------------------------------------------------------

TEST(Decoders, ZeroFeaturesGiveSpatiallyConstantCnnLogits) {
    torch::manual_seed(0);
    auto cfg = toy_encoder(64);
    CnnDecoder dec(cfg.channels, 3);
    dec->eval();
    EncoderState st;
    const std::array<int64_t, 5> sizes{32, 16, 8, 4, 4};
    for (size_t i = 0; i < 5; ++i) st.conv_features[i] = torch::zeros({1, cfg.channels[i], sizes[i], sizes[i]});
    auto y = dec(st, 64, 64).data;
    EXPECT_EQ(y.sizes(), torch::IntArrayRef({1, 3, 64, 64}));
    auto ref = y.index({torch::indexing::Slice(), torch::indexing::Slice(), 0, 0}).unsqueeze(-1).unsqueeze(-1);
    EXPECT_TRUE(torch::allclose(y, ref.expand_as(y)));
}

TEST(Decoders, CnnOutputDependsOnEverySkip) {
    torch::manual_seed(0);
    HybridEncoder enc(toy_encoder(64));
    CnnDecoder dec(toy_encoder(64).channels, 3);
    enc->eval();
    dec->eval();
    torch::NoGradGuard g;
    auto st = enc(torch::rand({1, 1, 64, 64}));
    auto base = dec(st, 64, 64).data;
    for (size_t skip = 0; skip < 4; ++skip) {
        auto cut = st;
        cut.conv_features[skip] = torch::zeros_like(st.conv_features[skip]);
        EXPECT_FALSE(torch::allclose(dec(cut, 64, 64).data, base)) << "skip c" << skip + 1;
    }
}

TEST(Decoders, TransformerDecoderIsSensitiveToEachStage) {
    torch::manual_seed(0);
    auto cfg = toy_encoder(64);
    HybridEncoder enc(cfg);
    TransformerDecoder dec(cfg, 3);
    enc->eval();
    dec->eval();
    torch::NoGradGuard g;
    auto st = enc(torch::rand({1, 1, 64, 64}));
    auto base = dec(st, 64, 64).data;
    EXPECT_TRUE(torch::isfinite(base).all().item<bool>());
    EXPECT_EQ(base.sizes(), torch::IntArrayRef({1, 3, 64, 64}));
    auto same = st;
    same.stage_tokens = {st.stage_tokens[2], st.stage_tokens[2], st.stage_tokens[2]};
    auto zeroed = same;
    zeroed.stage_tokens[0] = torch::zeros_like(st.stage_tokens[0]);
    EXPECT_FALSE(torch::allclose(dec(same, 64, 64).data, dec(zeroed, 64, 64).data));
}

TEST(Softmax, ClosedFormExamples) {
    auto p = softmax_probs({torch::zeros({1, 3, 2, 2}, torch::kDouble)}).data;
    EXPECT_TRUE(torch::allclose(p, torch::full_like(p, 1.0 / 3)));

    auto l = torch::zeros({1, 2, 1, 1}, torch::kDouble);
    l[0][1][0][0] = std::log(2.0);
    auto q = softmax_probs({l}).data;
    EXPECT_NEAR(q[0][0][0][0].item<double>(), 1.0 / 3, 1e-12);
    EXPECT_NEAR(q[0][1][0][0].item<double>(), 2.0 / 3, 1e-12);
}

TEST(Softmax, ShiftInvariantAndNormalized) {
    torch::manual_seed(0);
    auto l = torch::randn({2, 4, 5, 5}, torch::kDouble);
    auto shift = torch::randn({2, 1, 5, 5}, torch::kDouble) * 10;
    auto a = softmax_probs({l}).data, b = softmax_probs({l + shift}).data;
    EXPECT_TRUE(torch::allclose(a, b, 1e-12, 1e-12));
    EXPECT_LT((a.sum(1) - 1).abs().max().item<double>(), 1e-12);
}

TEST(PredictMask, TieBreakOneHotAndBruteForce) {
    auto uniform = torch::full({1, 3, 4, 4}, 1.0 / 3);
    EXPECT_EQ(predict_mask({uniform}).max().item<int64_t>(), 0);

    auto hot = torch::zeros({1, 3, 4, 4});
    hot.index_put_({0, 2}, 1.0);
    EXPECT_TRUE(predict_mask({hot}).eq(2).all().item<bool>());

    torch::manual_seed(1);
    auto r = torch::rand({2, 5, 7, 7});
    auto mask = predict_mask({r});
    auto acc = r.accessor<float, 4>();
    for (int b = 0; b < 2; ++b)
        for (int i = 0; i < 7; ++i)
            for (int j = 0; j < 7; ++j) {
                int best = 0;
                for (int k = 1; k < 5; ++k)
                    if (acc[b][k][i][j] > acc[b][best][i][j]) best = k;
                EXPECT_EQ(mask[b][i][j].item<int64_t>(), best);
            }
}

TEST(PredictMask, ArgmaxInvariantUnderSoftmax) {
    torch::manual_seed(2);
    auto l = torch::randn({2, 4, 8, 8}, torch::kDouble);
    EXPECT_TRUE(torch::equal(predict_mask({l}), predict_mask(softmax_probs({l}))));
}

// ---------------------------------------------------------------------------
// ACAM branch
// ---------------------------------------------------------------------------

TEST(GaussianModulation, AnalyticValues) {
    const ModulationParams p{0.3, 0.2};
    auto at_mu = gaussian_modulation(torch::full({4}, 0.3, torch::kDouble), p);
    EXPECT_LT((at_mu - 1).abs().max().item<double>(), 1e-12);

    auto pm = torch::tensor({0.1, 0.5}, torch::kDouble);
    const double gate = std::exp(-0.5);
    auto g = gaussian_modulation(pm, p);
    EXPECT_NEAR(g[0].item<double>(), gate, 1e-9);
    EXPECT_NEAR(g[1].item<double>(), gate, 1e-9);
    auto d = gaussian_density(pm, p);
    EXPECT_NEAR(d[0].item<double>(), gate / (std::sqrt(2 * std::numbers::pi) * 0.2), 1e-9);

    EXPECT_THROW(gaussian_modulation(pm, {0.0, 0.0}), ConfigError);
    EXPECT_THROW(gaussian_modulation(pm, {0.0, -1.0}), ConfigError);
}

TEST(GaussianModulation, EvenAndStrictlyDecreasingAwayFromMean) {
    const ModulationParams p{-0.4, 0.7};
    auto d = torch::linspace(0.0, 3.0, 61, torch::kDouble);
    auto up = gaussian_modulation(p.mu + d, p), down = gaussian_modulation(p.mu - d, p);
    EXPECT_LT((up - down).abs().max().item<double>(), 1e-12);
    EXPECT_TRUE(up.slice(0, 1).lt(up.slice(0, 0, -1)).all().item<bool>());
    EXPECT_TRUE(up.gt(0).all().item<bool>());
}

TEST(ChannelModulation, IdenticalChannelsScaledUniformly) {
    torch::manual_seed(0);
    ChannelModulation cm;
    auto f = torch::rand({1, 1, 6, 6}).expand({1, 8, 6, 6}).contiguous();
    auto gate = cm->gate(f);
    // The 1-D conv sees zero padding at both ends, so only interior channels are guaranteed equal.
    auto interior = gate.slice(1, 1, 7);
    EXPECT_LT((interior - interior[0][0]).abs().max().item<float>(), 1e-6f);
    EXPECT_EQ(cm(f).sizes(), f.sizes());
}

TEST(ChannelModulation, ChannelNearestMeanHasLargestGate) {
    torch::manual_seed(4);
    ChannelModulation cm;
    auto f = torch::randn({2, 12, 5, 5});
    auto a = cm->attention(f), gate = cm->gate(f);
    for (int64_t b = 0; b < 2; ++b) {
        auto dist = (a[b] - a[b].mean()).abs();
        EXPECT_EQ(dist.argmin().item<int64_t>(), gate[b].argmax().item<int64_t>());
    }
    EXPECT_TRUE(gate.ge(0).all().item<bool>());
}

TEST(SpatialModulation, ConstantMapStaysConstant) {
    torch::manual_seed(0);
    SpatialModulation sm;
    {
        torch::NoGradGuard g;
        sm->conv->weight.fill_(0.01);
    }
    // With a 7×7 zero-padded kernel only the interior sees a full window.
    auto f = torch::full({1, 4, 16, 16}, 0.7);
    auto out = sm(f);
    EXPECT_EQ(out.sizes(), f.sizes());
    auto inner = out.slice(2, 3, 13).slice(3, 3, 13);
    EXPECT_LT((inner - inner[0][0][0][0]).abs().max().item<float>(), 1e-6f);
}

TEST(SpatialModulation, FarFromMeanGetsSmallerGate) {
    torch::manual_seed(6);
    SpatialModulation sm;
    auto f = torch::randn({1, 3, 10, 10});
    auto a = sm->attention(f).flatten(), gate = sm->gate(f).flatten();
    auto dist = (a - a.mean()).abs();
    auto order = dist.argsort();
    for (int64_t i = 1; i < order.size(0); ++i) {
        const auto near = order[i - 1].item<int64_t>(), far = order[i].item<int64_t>();
        if (dist[far].item<float>() > dist[near].item<float>() + 1e-6f)
            EXPECT_LT(gate[far].item<float>(), gate[near].item<float>());
    }
}

TEST(Acam, StageFiveShapeZeroInputAndDeterminism) {
    torch::manual_seed(0);
    auto cfg = toy_encoder(256);
    AcamBranch branch(cfg.channels, 3);
    auto f = torch::rand({1, cfg.channels[4], 16, 16});
    auto a = branch->generate(f, 5);
    EXPECT_EQ(a.sizes(), torch::IntArrayRef({1, 3, 16, 16}));
    EXPECT_TRUE(torch::equal(a, branch->generate(f, 5)));
    {
        torch::NoGradGuard g;
        branch->heads[4]->cam->bias.zero_();
    }
    EXPECT_EQ(branch->generate(torch::zeros_like(f), 5).abs().max().item<float>(), 0.0f);
    EXPECT_THROW(branch->generate(f, 6), ContractViolation);
}

TEST(Acam, AlignmentGeometry) {
    torch::manual_seed(0);
    AcamBranch branch(toy_encoder(256).channels, 3);
    EXPECT_EQ(AcamBranchImpl::align_depth(4), 1);
    EXPECT_EQ(AcamBranchImpl::align_depth(1), 4);
    EXPECT_EQ(branch->encoder[3]->options.stride()->at(0), 1);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(branch->encoder[static_cast<size_t>(i)]->options.stride()->at(0), 2);
    const std::array<int64_t, 4> sizes{128, 64, 32, 16};
    for (int stage = 1; stage <= 4; ++stage) {
        const auto s = sizes[static_cast<size_t>(stage - 1)];
        auto out = branch->align(torch::rand({1, 3, s, s}), stage);
        EXPECT_EQ(out.sizes(), torch::IntArrayRef({1, 3, 16, 16})) << "stage " << stage;
    }
    EXPECT_THROW(branch->align(torch::rand({1, 3, 16, 16}), 5), ContractViolation);
}

TEST(Acam, FilterValues) {
    auto x = torch::tensor({0.0, std::log(3.0)}, torch::kDouble);
    auto f = acam_filter(x);
    EXPECT_DOUBLE_EQ(f[0].item<double>(), 0.5);
    EXPECT_NEAR(f[1].item<double>(), 0.75, 1e-12);
    auto r = torch::randn({50}, torch::kDouble);
    EXPECT_LT((acam_filter(r) + acam_filter(-r) - 1).abs().max().item<double>(), 1e-12);
}

TEST(Acam, BinarizeThresholdAndTies) {
    auto below = torch::full({3, 4, 4}, 0.5 - 1e-9, torch::kDouble);
    EXPECT_EQ(binarize_target(below).sum().item<double>(), 0.0);
    auto tie = torch::full({3, 4, 4}, 0.5, torch::kDouble);
    EXPECT_EQ(binarize_target(tie).sum().item<double>(), 48.0);

    torch::manual_seed(9);
    auto r = torch::rand({2, 3, 5, 5}, torch::kDouble);
    auto bin = binarize_target(r);
    auto acc = r.accessor<double, 4>();
    auto bacc = bin.accessor<double, 4>();
    for (int a = 0; a < 2; ++a)
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j) EXPECT_EQ(bacc[a][k][i][j], acc[a][k][i][j] >= 0.5 ? 1.0 : 0.0);
    EXPECT_FALSE(binarize_target(r.clone().requires_grad_(true)).requires_grad());
}

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

class ModelShapes : public ::testing::TestWithParam<int64_t> {};

TEST_P(ModelShapes, BothLogitsAndAllAcamsFollowSchedule) {
    const auto S = GetParam();
    torch::manual_seed(0);
    ModelConfig cfg;
    cfg.encoder = toy_encoder(S);
    cfg.num_classes = 3;
    ScribFormer model(cfg);
    model->eval();
    torch::NoGradGuard g;
    auto out = model(torch::rand({1, 1, S, S}));
    EXPECT_EQ(out.cnn.data.sizes(), torch::IntArrayRef({1, 3, S, S}));
    EXPECT_EQ(out.trans.data.sizes(), torch::IntArrayRef({1, 3, S, S}));
    ASSERT_TRUE(out.acams.has_value());
    const std::array<int64_t, 5> expect{S / 2, S / 4, S / 8, S / 16, S / 16};
    for (size_t i = 0; i < 5; ++i)
        EXPECT_EQ(out.acams->maps[i].sizes(), torch::IntArrayRef({1, 3, expect[i], expect[i]}));
    for (const auto& a : out.acams->aligned) EXPECT_EQ(a.sizes(), out.acams->maps[4].sizes());
    EXPECT_EQ(out.state.final_tokens.size(1), expect[4] * expect[4]);
}

INSTANTIATE_TEST_SUITE_P(Sizes, ModelShapes, ::testing::Values(128, 256));

TEST(Model, CnnOnlyConfigurationReusesCnnLogits) {
    torch::manual_seed(0);
    ModelConfig cfg;
    cfg.encoder = toy_encoder(64);
    cfg.transformer_branch = false;
    cfg.acam_branch = false;
    ScribFormer model(cfg);
    model->eval();
    torch::NoGradGuard g;
    auto x = torch::rand({1, 1, 64, 64});
    auto out = model(x);
    EXPECT_TRUE(torch::equal(out.cnn.data, out.trans.data));
    EXPECT_FALSE(out.acams.has_value());
    EXPECT_TRUE(torch::allclose(model->predict_probs(x).data, softmax_probs(out.cnn).data));
}

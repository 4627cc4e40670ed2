#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gradcheck.hpp"
#include "ttt/model.hpp"
#include "ttt/render.hpp"

using namespace ttt;
using namespace ttt::testing;

namespace {

std::vector<float> board_input(const char* text) { return image_to_model_input(render(Board::parse(text))); }

ModelConfig tiny(int vocab = 65) { return ModelConfig::for_tier("tiny", vocab); }

}  // namespace

TEST_CASE("tier table and parameter counts") {
    const ModelConfig t = tiny();
    CHECK(t.d_model == 64);
    CHECK(t.n_heads == 4);
    CHECK(t.d_ff == 256);
    CHECK(t.num_patches() == 36);
    CHECK_THROWS_AS(ModelConfig::for_tier("huge", 65), Error);
    ModelConfig bad = t;
    bad.n_heads = 5;
    CHECK_THROWS_AS(bad.validate(), Error);

    std::size_t prev = 0;
    for (auto name : kTierNames) {
        const ModelConfig c = ModelConfig::for_tier(name, 65);
        const std::size_t n = ParamLayout(c).total;
        CHECK(n == expected_parameter_count(c));
        CHECK(n > prev);
        prev = n;
    }
    // Frozen from the closed form above for the 65-word vocabulary.
    CHECK(ParamLayout(tiny()).total == 263872);
}

TEST_CASE("init is deterministic with unit norm scales and zero biases") {
    const Model<float> a(tiny(), 5), b(tiny(), 5), c(tiny(), 6);
    CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
    CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
    Model<float> m(tiny(), 5);
    for (float g : m.tensor("enc.0.ln1.g")) CHECK(g == 1.0f);
    for (float g : m.tensor("dec.norm.g")) CHECK(g == 1.0f);
    for (float b2 : m.tensor("dec.1.cross.q.b")) CHECK(b2 == 0.0f);
    const auto w = m.tensor("dec.head.w");
    double s = 0, s2 = 0;
    for (float x : w) s += x, s2 += double(x) * x;
    CHECK(std::abs(s / w.size()) < 0.002);
    CHECK(std::sqrt(s2 / w.size()) == doctest::Approx(0.02).epsilon(0.05));
    CHECK_THROWS_AS(Model<float>(tiny(), std::vector<float>(10)), Error);
}

TEST_CASE("shapes and shape errors") {
    const Model<float> m(tiny(), 1);
    const auto img = board_input("X________");
    const auto enc = m.encode_image(img);
    CHECK(enc.size() == 36u * 64u);
    const std::vector<TokenId> ids{1, 10, 20, 2};
    CHECK(m.decoder_forward(ids, enc).size() == 4u * 65u);
    CHECK_THROWS_AS(m.encode_image(std::vector<float>(100)), Error);
    CHECK_THROWS_AS(m.decoder_forward(ids, std::vector<float>(10)), Error);
    try {
        m.decoder_forward(std::vector<TokenId>(49, 5), enc);
        FAIL("expected SequenceTooLong");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SequenceTooLong);
    }
    CHECK_THROWS_AS(m.decoder_forward(std::vector<TokenId>{}, enc), Error);
}

TEST_CASE("softmax of every logit row sums to one") {
    const Model<float> m(tiny(), 2);
    const auto enc = m.encode_image(board_input("XOXO_____"));
    const std::vector<TokenId> ids{1, 5, 9, 30, 2, 40, 3};
    const auto logits = m.decoder_forward(ids, enc);
    for (std::size_t t = 0; t < ids.size(); ++t) {
        const float* row = logits.data() + t * 65;
        const double mx = *std::max_element(row, row + 65);
        double z = 0;
        for (int j = 0; j < 65; ++j) z += std::exp(row[j] - mx);
        double total = 0;
        for (int j = 0; j < 65; ++j) total += std::exp(row[j] - mx) / z;
        CHECK(std::isfinite(mx));
        CHECK(std::abs(total - 1.0) < 1e-6);
    }
}

TEST_CASE("decoder is causal") {
    const Model<float> m(tiny(), 3);
    const auto enc = m.encode_image(board_input("_O_X_____"));
    std::vector<TokenId> ids{1, 5, 9, 30, 2, 40, 3, 12};
    const auto base = m.decoder_forward(ids, enc);
    for (std::size_t t = 1; t < ids.size(); ++t) {
        auto changed = ids;
        changed[t] = changed[t] == 7 ? 8 : 7;
        const auto out = m.decoder_forward(changed, enc);
        for (std::size_t i = 0; i < t * 65; ++i) REQUIRE(out[i] == base[i]);
        bool differs = false;
        for (std::size_t i = t * 65; i < (t + 1) * 65; ++i) differs |= out[i] != base[i];
        CHECK(differs);
    }
}

TEST_CASE("cross-attention is live and images are distinguished") {
    const Model<float> m(tiny(), 4);
    const auto e1 = m.encode_image(board_input("XO_______"));
    const auto e2 = m.encode_image(board_input("OX_______"));
    CHECK(e1 != e2);
    const std::vector<TokenId> ids{1, 5, 6};
    const auto l1 = m.decoder_forward(ids, e1);
    const auto l2 = m.decoder_forward(ids, e2);
    bool pos0 = false;
    for (int j = 0; j < 65; ++j) pos0 |= l1[j] != l2[j];
    CHECK(pos0);
    const auto lz = m.decoder_forward(ids, std::vector<float>(e1.size(), 0.0f));
    CHECK(lz != l1);
    CHECK(m.decoder_forward(ids, e1) == l1);
}

TEST_CASE("uniform logits give ln V and loss matches a hand-rolled cross-entropy") {
    Model<float> m(tiny(), 8);
    const auto img1 = board_input("XX_OO____"), img2 = board_input("_________");
    const std::vector<TokenId> ids1{1, 20, 21, 22, 2, 30, 31, 3}, ids2{1, 25, 2, 33, 34, 35, 3};
    const std::vector<std::uint8_t> m1{0, 0, 0, 0, 1, 1, 1, 0}, m2{0, 0, 1, 1, 1, 1, 0};
    const std::vector<Example> batch{{ids1, m1, img1}, {ids2, m2, img2}};

    double ref_sum = 0;
    std::size_t ref_n = 0;
    for (const auto& ex : batch) {
        const auto logits = m.decoder_forward(ex.ids, m.encode_image(ex.image));
        for (std::size_t t = 0; t + 1 < ex.ids.size(); ++t) {
            if (!ex.mask[t]) continue;
            const float* row = logits.data() + t * 65;
            const double mx = *std::max_element(row, row + 65);
            double z = 0;
            for (int j = 0; j < 65; ++j) z += std::exp(double(row[j]) - mx);
            ref_sum += std::log(z) + mx - row[ex.ids[t + 1]];
            ++ref_n;
        }
    }
    const LossStats st = m.loss(batch);
    CHECK(st.masked == ref_n);
    CHECK(st.mean() == doctest::Approx(ref_sum / ref_n).epsilon(1e-5));

    for (auto& w : m.tensor("dec.head.w")) w = 0.0f;
    CHECK(m.loss(batch).mean() == doctest::Approx(std::log(65.0)).epsilon(1e-6));

    const std::vector<std::uint8_t> none(ids1.size(), 0);
    const std::vector<Example> empty{{ids1, none, img1}};
    CHECK_THROWS_AS(m.loss(empty), Error);
}

TEST_CASE("gradients are deterministic and zero on unused positions") {
    const Model<float> m(tiny(), 9);
    const auto img = board_input("XOX______");
    const std::vector<TokenId> ids{1, 20, 21, 2, 30, 3};
    const std::vector<std::uint8_t> mask{0, 0, 1, 1, 1, 0};
    const std::vector<Example> batch{{ids, mask, img}};
    std::vector<float> g1, g2;
    m.loss_and_gradient(batch, g1);
    m.loss_and_gradient(batch, g2);
    CHECK(g1 == g2);
    const TensorSpec* pos = m.layout().find("dec.pos");
    REQUIRE(pos != nullptr);
    for (std::size_t i = ids.size() * 64; i < pos->size; ++i) REQUIRE(g1[pos->offset + i] == 0.0f);
    const TensorSpec* tok = m.layout().find("dec.tok");
    // Token 50 never appears, so its embedding row receives nothing.
    for (std::size_t i = 50 * 64; i < 51 * 64; ++i) REQUIRE(g1[tok->offset + i] == 0.0f);
}

TEST_CASE("float and double models agree on the forward pass") {
    const Model<float> mf(tiny(), 10);
    const Model<double> md(tiny(), std::vector<double>(mf.values().begin(), mf.values().end()));
    const auto img = board_input("X_O_X_O__");
    const std::vector<double> imgd(img.begin(), img.end());
    const std::vector<TokenId> ids{1, 4, 9, 2};
    const auto lf = mf.decoder_forward(ids, mf.encode_image(img));
    const auto ld = md.decoder_forward(ids, md.encode_image(imgd));
    for (std::size_t i = 0; i < lf.size(); ++i) REQUIRE(std::abs(lf[i] - ld[i]) <= 1e-5);
}

TEST_CASE("finite-difference gradient check in double precision") {
    const GradCheckResult r = run_gradient_check();
    for (const auto& t : r.tensors) {
        INFO(t.name);
        CHECK(t.relative <= 1e-3);
    }
    MESSAGE("worst tensor " << r.worst_name << " rel " << r.worst);
}

TEST_CASE("generate is greedy, deterministic, and checks question length") {
    const std::vector<std::string> texts{"who won ?", "x wins ."};
    const Vocabulary vocab = Vocabulary::build(texts);
    Model<float> m(ModelConfig::for_tier("tiny", vocab.size()), 11);
    const auto img = board_input("XXXOO____");
    const Generation a = m.generate(img, "Who won?", vocab);
    const Generation b = m.generate(img, "Who won?", vocab);
    CHECK(a.tokens == b.tokens);
    CHECK(a.text == b.text);
    CHECK(a.tokens.size() <= 24);

    for (auto& w : m.tensor("dec.head.w")) w = 0.0f;
    // All logits tie, so every step picks id 0.
    const Generation tie = m.generate(img, "who won ?", vocab, 5);
    CHECK(tie.tokens == std::vector<TokenId>(5, 0));
    CHECK_FALSE(tie.hit_eos);
    CHECK(tie.text.empty());

    std::string long_q;
    for (int i = 0; i < 30; ++i) long_q += "who ";
    try {
        m.generate(img, long_q, vocab);
        FAIL("expected QuestionTooLong");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::QuestionTooLong);
    }
}

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "ddet/checkpoint.hpp"
#include "ddet/config.hpp"
#include "ddet/model.hpp"
#include "ddet/rng.hpp"

using namespace ddet;

TEST_CASE("config defaults") {
    RunConfig c = parse_config("");
    CHECK(c.optim.learning_rate == 0.01);
    CHECK(c.optim.momentum == 0.9);
    CHECK(c.optim.weight_decay == 0.0001);
    CHECK(c.optim.steps == 2000);
    CHECK(c.optim.batch_size == 8);
    CHECK(c.gamma == 2.0);
    CHECK(c.alpha == 0.25);
    CHECK(c.cls_mode == "focal");
    CHECK(c.neg_pos_ratio == 3);
    CHECK(c.pos_thr == 0.5);
    CHECK(c.neg_thr == 0.4);
    CHECK(c.score_thr == 0.05);
    CHECK(c.nms_iou == 0.5);
    CHECK_FALSE(c.eleven_point);
    CHECK(c.synth.image_size == 64);
    CHECK(c.seed == 0);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("config parsing") {
    SECTION("sections, comments, overrides") {
        RunConfig c = parse_config(
            "# a comment\n"
            "[optim]\n"
            "learning_rate = 0.02  # trailing comment\n"
            "steps = 100\n"
            "[loss]\n"
            "gamma = 1.5\n"
            "gamma = 0.5\n"           // later duplicate wins
            "cls_mode = plain_ce\n"
            "[run]\n"
            "seed = 11\n");
        CHECK(c.optim.learning_rate == 0.02);
        CHECK(c.optim.steps == 100);
        CHECK(c.gamma == 0.5);
        CHECK(c.mode() == ClsMode::PlainCe);
        CHECK(c.seed == 11);
        CHECK(c.optim.seed == 11);   // run seed fans out
        CHECK(c.synth.seed == 11);
        CHECK(c.optim.momentum == 0.9);  // untouched keys keep defaults
    }
    SECTION("unknown key names the key and section") {
        CHECK_THROWS_WITH(parse_config("[optim]\nlearning_rat = 0.1\n"),
                          Catch::Matchers::Equals("unknown key 'learning_rat' in [optim]"));
    }
    SECTION("unknown section") {
        CHECK_THROWS_WITH(parse_config("[optimizer]\n"),
                          Catch::Matchers::ContainsSubstring("invalid section [optimizer]"));
    }
    SECTION("key before any section") {
        CHECK_THROWS_WITH(parse_config("gamma = 2\n"),
                          Catch::Matchers::ContainsSubstring("before any [section]"));
    }
    SECTION("malformed lines") {
        CHECK_THROWS_WITH(parse_config("[optim\n"),
                          Catch::Matchers::ContainsSubstring("malformed section header"));
        CHECK_THROWS_WITH(parse_config("[optim]\nsteps\n"),
                          Catch::Matchers::ContainsSubstring("expected 'key = value'"));
        CHECK_THROWS_WITH(parse_config("[optim]\nsteps = ten\n"),
                          Catch::Matchers::ContainsSubstring("not an integer"));
        CHECK_THROWS_WITH(parse_config("[model]\neleven_point = yes\n"),
                          Catch::Matchers::ContainsSubstring("not a boolean"));
    }
    SECTION("validation rejects out-of-range values") {
        RunConfig c = parse_config("[loss]\nalpha = 1.5\n");
        CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("alpha"));
        c = parse_config("[loss]\ncls_mode = focall\n");
        CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("cls_mode"));
        c = parse_config("[optim]\nmomentum = 1\n");
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    }
    SECTION("desk preset turns on lr warmup") {
        RunConfig c = parse_config("[run]\npreset = desk\n");
        CHECK(c.warmup_steps == 0);
        c.apply_preset();
        CHECK(c.warmup_steps == 200);
        RunConfig d;
        d.apply_preset();
        CHECK(d.warmup_steps == 0);
    }
}

TEST_CASE("config round-trip") {
    RunConfig c;
    c.optim.learning_rate = 0.005;
    c.optim.steps = 321;
    c.gamma = 1.25;
    c.cls_mode = "hard_negative_ce";
    c.score_thr = 0.125;
    c.synth.train_images = 17;
    c.dataset = "data/synth";
    c.include_lost = true;
    c.seed = 99;
    c.preset = "desk";

    std::string text = serialize_config(c);
    RunConfig back = parse_config(text);
    CHECK(serialize_config(back) == text);
    CHECK(back.optim.learning_rate == c.optim.learning_rate);
    CHECK(back.optim.steps == c.optim.steps);
    CHECK(back.gamma == c.gamma);
    CHECK(back.cls_mode == c.cls_mode);
    CHECK(back.score_thr == c.score_thr);
    CHECK(back.synth.train_images == c.synth.train_images);
    CHECK(back.dataset == c.dataset);
    CHECK(back.include_lost == c.include_lost);
    CHECK(back.preset == c.preset);
}

TEST_CASE("checkpoint round-trip") {
    SECTION("save -> load -> save is byte-identical (float)") {
        Rng rng(3);
        ParamMap<float> params;
        params.emplace("a.weight", Tensorf({2, 3, 3, 3}));
        params.emplace("a.bias", Tensorf({2}));
        params.emplace("z", Tensorf({1, 1, 4, 4}));
        for (auto& [n, t] : params)
            for (float& v : t.data) v = static_cast<float>(rng.normal());

        std::ostringstream s1;
        save_checkpoint(s1, params);
        std::istringstream in(s1.str());
        ParamMap<float> back = load_checkpoint<float>(in);
        REQUIRE(back.size() == params.size());
        for (const auto& [n, t] : params) {
            REQUIRE(back.count(n) == 1);
            CHECK(back.at(n).shape == t.shape);
            CHECK(back.at(n).data == t.data);
        }
        std::ostringstream s2;
        save_checkpoint(s2, back);
        CHECK(s1.str() == s2.str());
        CHECK(s1.str().substr(0, 4) == "DDET");
    }
    SECTION("double tensors round-trip and refuse a float read") {
        ParamMap<double> params;
        params.emplace("w", Tensord({3}, 0.0));
        params.at("w").data = {1.0, -2.5, 3.25e-300};
        std::ostringstream s;
        save_checkpoint(s, params);
        std::istringstream in(s.str());
        ParamMap<double> back = load_checkpoint<double>(in);
        CHECK(back.at("w").data == params.at("w").data);
        std::istringstream in2(s.str());
        CHECK_THROWS_WITH(load_checkpoint<float>(in2),
                          Catch::Matchers::ContainsSubstring("dtype mismatch"));
    }
    SECTION("corrupted streams are rejected") {
        std::istringstream bad("XXXX");
        CHECK_THROWS_WITH(load_checkpoint<float>(bad),
                          Catch::Matchers::ContainsSubstring("bad magic"));
        ParamMap<float> params;
        params.emplace("w", Tensorf({4}, 1.0f));
        std::ostringstream s;
        save_checkpoint(s, params);
        std::string cut = s.str().substr(0, s.str().size() - 3);
        std::istringstream trunc(cut);
        CHECK_THROWS_WITH(load_checkpoint<float>(trunc),
                          Catch::Matchers::ContainsSubstring("truncated"));
        std::string wrong_version = s.str();
        wrong_version[4] = 9;  // version byte
        std::istringstream wv(wrong_version);
        CHECK_THROWS_WITH(load_checkpoint<float>(wv),
                          Catch::Matchers::ContainsSubstring("unsupported version"));
    }
    SECTION("full detector parameter set survives a round-trip") {
        PyramidConfig pc;
        ParamMap<float> params = init_detector_params<float>(pc, 13);
        std::ostringstream s1;
        save_checkpoint(s1, params);
        std::istringstream in(s1.str());
        ParamMap<float> back = load_checkpoint<float>(in);
        std::ostringstream s2;
        save_checkpoint(s2, back);
        CHECK(s1.str() == s2.str());
    }
}

#include <doctest.h>

#include <cmath>

#include "fstack/errors.hpp"
#include "fstack/focus.hpp"
#include "fstack/lens.hpp"

using namespace fstack;

namespace {

LensConfig oracle_lens() {
    LensConfig lens;
    lens.focal_length_mm = 4.0;
    lens.f_number = 2.0;
    lens.pixel_pitch_mm = 0.005;
    lens.sensor_to_lens_range_mm = {4.01, 4.1};
    return lens;
}

}  // namespace

TEST_CASE("coc radius matches the hand-evaluated thin-lens formula") {
    // f = 4 mm, N = 2, pitch = 0.005 mm, focus 1.0 m, object 2.0 m.
    // r = (0.004^2 / 4) * 1.0 / (2.0 * (1.0 - 0.004)) / 5e-6
    //   = 4e-6 / 1.992 / 5e-6 = 0.40160642570281126 px  (worked by hand)
    const double r = coc_radius_px(2.0, 1.0, oracle_lens());
    CHECK(r == doctest::Approx(0.40160642570281126).epsilon(1e-12));
}

TEST_CASE("coc radius is zero exactly on the focus plane") {
    CHECK(coc_radius_px(1.0, 1.0, oracle_lens()) == 0.0);
    CHECK(coc_radius_px(3.7, 3.7, oracle_lens()) == 0.0);
}

TEST_CASE("pinhole limit kills the blur at every depth") {
    LensConfig lens = oracle_lens();
    lens.f_number = 1e9;
    for (double d : {0.5, 1.0, 2.0, 4.0}) {
        CHECK(coc_radius_px(d, 1.0, lens) < 1e-6);
    }
}

TEST_CASE("coc radius grows monotonically away from the focus plane") {
    const LensConfig lens = oracle_lens();
    const double focus = 1.5;
    double prev = 0.0;
    for (double d = focus; d <= 4.0; d += 0.05) {  // far side
        const double r = coc_radius_px(d, focus, lens);
        CHECK(r >= prev);
        prev = r;
    }
    prev = 0.0;
    for (double d = focus; d >= 0.2; d -= 0.05) {  // near side
        const double r = coc_radius_px(d, focus, lens);
        CHECK(r >= prev);
        prev = r;
    }
}

TEST_CASE("non-physical distances are a domain error") {
    CHECK_THROWS_AS(coc_radius_px(0.003, 1.0, oracle_lens()), std::domain_error);
    CHECK_THROWS_AS(coc_radius_px(1.0, 0.001, oracle_lens()), std::domain_error);
    LensConfig bad = oracle_lens();
    bad.f_number = -1.0;
    CHECK_THROWS_AS(coc_radius_px(1.0, 1.0, bad), ConfigError);
}

TEST_CASE("gen_scene is deterministic and respects the depth range") {
    SceneConfig cfg;
    cfg.seed = 99;
    cfg.width = 48;
    cfg.height = 40;
    cfg.primitive_count = 5;
    const Scene a = gen_scene(cfg);
    const Scene b = gen_scene(cfg);
    CHECK(a.sharp.data == b.sharp.data);
    CHECK(a.depth.data == b.depth.data);

    float lo = 1e9f, hi = -1e9f;
    for (float v : a.depth.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= 0.4f);
    CHECK(hi <= 4.0f);
    CHECK(lo < hi);  // rectangles over a background: discontinuities exist

    SceneConfig other = cfg;
    other.seed = 100;
    CHECK(gen_scene(other).sharp.data != a.sharp.data);
}

TEST_CASE("degenerate depth range collapses the whole scene to one plane") {
    SceneConfig cfg;
    cfg.seed = 4;
    cfg.width = 32;
    cfg.height = 32;
    cfg.primitive_count = 1;
    cfg.depth_range_m = {2.0, 2.0};
    const Scene scene = gen_scene(cfg);
    for (float v : scene.depth.data) CHECK(v == 2.0f);
}

TEST_CASE("zero-area scenes are rejected") {
    SceneConfig cfg;
    cfg.width = 0;
    CHECK_THROWS_AS(gen_scene(cfg), ConfigError);
    cfg.width = 32;
    cfg.height = -3;
    CHECK_THROWS_AS(gen_scene(cfg), ConfigError);
    cfg.height = 32;
    cfg.primitive_count = 0;
    CHECK_THROWS_AS(gen_scene(cfg), ConfigError);
}

TEST_CASE("render_slice leaves in-focus and pinhole images untouched") {
    SceneConfig cfg;
    cfg.seed = 12;
    cfg.width = 32;
    cfg.height = 32;
    cfg.depth_range_m = {1.5, 1.5};  // constant depth everywhere
    const Scene scene = gen_scene(cfg);

    SUBCASE("depth equals the focus distance") {
        const Image out = render_slice(scene.sharp, scene.depth, 1.5, LensConfig{});
        CHECK(out.data == scene.sharp.data);
    }
    SUBCASE("huge f-number behaves like a pinhole at any depth") {
        LensConfig pinhole;
        pinhole.f_number = 1e9;
        const Image out = render_slice(scene.sharp, scene.depth, 0.5, pinhole);
        CHECK(out.data == scene.sharp.data);
    }
}

TEST_CASE("blurring a constant-color image changes nothing") {
    SceneConfig cfg;
    cfg.seed = 12;
    cfg.width = 32;
    cfg.height = 32;
    const Scene scene = gen_scene(cfg);  // varied depth map
    Image flat = Image::create(32, 32);
    std::fill(flat.data.begin(), flat.data.end(), std::uint8_t{137});
    const Image out = render_slice(flat, scene.depth, 1.0, LensConfig{});
    CHECK(out.data == flat.data);
}

TEST_CASE("render_slice rejects mismatched dimensions") {
    const Image img = Image::create(8, 8);
    const DepthMap d = DepthMap::create(8, 9, 1.0f);
    CHECK_THROWS_AS(render_slice(img, d, 1.0, LensConfig{}), ShapeError);
}

TEST_CASE("render_stack spaces focus distances equally") {
    SceneConfig cfg;
    cfg.seed = 3;
    cfg.width = 16;
    cfg.height = 16;
    const Scene scene = gen_scene(cfg);

    SUBCASE("N=8 spans 0.4..4.0 with step 3.6/7") {
        const StackExample ex =
            render_stack(scene.sharp, scene.depth, 8, LensConfig{}, {0.4, 4.0});
        REQUIRE(ex.focus_distances_m.size() == 8);
        const double step = 3.6 / 7.0;
        for (int k = 0; k < 8; ++k) {
            CHECK(ex.focus_distances_m[static_cast<std::size_t>(k)] ==
                  doctest::Approx(0.4 + k * step).epsilon(1e-6));
        }
        CHECK(ex.stack.focus_settings.front() == 0.0f);
        CHECK(ex.stack.focus_settings.back() == 1.0f);
    }
    SUBCASE("N=1 sits at the midpoint") {
        const StackExample ex =
            render_stack(scene.sharp, scene.depth, 1, LensConfig{}, {0.4, 4.0});
        REQUIRE(ex.focus_distances_m.size() == 1);
        CHECK(ex.focus_distances_m[0] == doctest::Approx(2.2).epsilon(1e-6));
    }
    SUBCASE("N=0 is invalid") {
        CHECK_THROWS_AS(
            render_stack(scene.sharp, scene.depth, 0, LensConfig{}, {0.4, 4.0}),
            ConfigError);
    }
}

TEST_CASE("a 52-slice 640x480 stack keeps its dimensions") {
    SceneConfig cfg;
    cfg.seed = 8;
    cfg.width = 640;
    cfg.height = 480;
    cfg.primitive_count = 3;
    const Scene scene = gen_scene(cfg);
    LensConfig weak;  // near-pinhole keeps this dimension check fast
    weak.f_number = 1e6;
    const StackExample ex =
        render_stack(scene.sharp, scene.depth, 52, weak, {0.4, 4.0});
    CHECK(ex.stack.slices.size() == 52);
    for (const Image& s : ex.stack.slices) {
        CHECK(s.width == 640);
        CHECK(s.height == 480);
        CHECK(s.data.size() == 640u * 480u * 3u);
    }
}

TEST_CASE("stack sharpness peaks at the slice focused nearest the true depth") {
    SceneConfig cfg;
    cfg.seed = 21;
    cfg.width = 48;
    cfg.height = 48;
    cfg.primitive_count = 2;
    cfg.texture_scale = 1.0;
    const Scene scene = gen_scene(cfg);
    const int n = 8;
    const StackExample ex =
        render_stack(scene.sharp, scene.depth, n, LensConfig{}, {0.4, 4.0});

    // Focus maps per slice; compare argmax against the nearest focus distance
    // on well-textured pixels away from depth edges.
    std::vector<FocusMap> maps;
    for (const Image& s : ex.stack.slices) maps.push_back(tenengrad(s, 5));

    float peak = 0.0f;
    for (const auto& m : maps) {
        for (float v : m.data) peak = std::max(peak, v);
    }

    int checked = 0, correct = 0;
    for (int y = 6; y < 42; ++y) {
        for (int x = 6; x < 42; ++x) {
            const float d = scene.depth.at(x, y);
            // skip pixels near a depth edge: blur bleeds across layers
            bool edge = false;
            for (int dy = -6; dy <= 6 && !edge; ++dy) {
                for (int dx = -6; dx <= 6 && !edge; ++dx) {
                    edge = scene.depth.at(x + dx, y + dy) != d;
                }
            }
            if (edge) continue;
            int best_slice = 0, nearest = 0;
            float best_v = -1.0f;
            double best_d = 1e9;
            for (int k = 0; k < n; ++k) {
                if (maps[static_cast<std::size_t>(k)].at(x, y) > best_v) {
                    best_v = maps[static_cast<std::size_t>(k)].at(x, y);
                    best_slice = k;
                }
                const double gap =
                    std::abs(ex.focus_distances_m[static_cast<std::size_t>(k)] - d);
                if (gap < best_d) {
                    best_d = gap;
                    nearest = k;
                }
            }
            if (best_v < 0.02f * peak) continue;  // not enough texture to judge
            ++checked;
            correct += std::abs(best_slice - nearest) <= 1;
        }
    }
    REQUIRE(checked > 100);
    // Allow one-slice slack; sub-slice localization is the refiner's job.
    CHECK(static_cast<double>(correct) / checked > 0.9);
}

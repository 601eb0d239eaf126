#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

#include "cowpose/error.hpp"
#include "cowpose/metrics.hpp"
#include "cowpose/synth.hpp"
#include "cowpose/temporal.hpp"

#include <set>

using namespace cowpose;

namespace {

const CowTemplate& tmpl() {
    static const CowTemplate t = CowTemplate::standard();
    return t;
}

CowSkeleton cow_at(Vec2 c, std::int64_t frame = 0) {
    auto s = fixture::template_skeleton(tmpl(), c);
    s.frame_index = frame;
    return s;
}

Track track_of(const std::vector<CowSkeleton>& cows) {
    Track t;
    t.frames = cows;
    for (std::size_t i = 0; i < t.frames.size(); ++i) {
        t.frames[i].frame_index = static_cast<std::int64_t>(i);
    }
    return t;
}

// Rigid walk plus per-joint Gaussian jitter on the upper body.
Track jittered_walk(std::uint64_t seed, int frames, double sigma) {
    Rng rng(seed);
    std::vector<CowSkeleton> cows;
    for (int t = 0; t < frames; ++t) {
        auto s = cow_at({300.0 + 4.0 * t, 200.0});
        for (auto j : kUpperBodyJoints) {
            s[j].position += Vec2{rng.normal() * sigma, rng.normal() * sigma};
        }
        s.recompute_center();
        cows.push_back(s);
    }
    return track_of(cows);
}

} // namespace

TEST_CASE("tracking") {
    const double gate = 0.5 * tmpl().body_length();

    SUBCASE("steady walk keeps one identity") {
        Tracker tracker(gate);
        for (int t = 0; t < 20; ++t) {
            const CowSkeleton c = cow_at({100.0 + 3.0 * t, 200.0});
            tracker.update(t, std::span(&c, 1));
        }
        REQUIRE(tracker.tracks().size() == 1);
        CHECK(tracker.tracks()[0].frames.size() == 20);
        CHECK(tracker.tracks()[0].frames.back().track_id == 0);
        CHECK(tracker.tracks()[0].frames.back().frame_index == 19);
    }

    SUBCASE("jump beyond the gate starts a new track") {
        Tracker tracker(gate);
        const CowSkeleton a = cow_at({100, 200});
        const CowSkeleton b = cow_at({100 + gate + 1.0, 200});
        tracker.update(0, std::span(&a, 1));
        tracker.update(1, std::span(&b, 1));
        CHECK(tracker.tracks().size() == 2);
    }

    SUBCASE("misses age a track and close it") {
        Tracker tracker(gate);
        const CowSkeleton a = cow_at({100, 200});
        tracker.update(0, std::span(&a, 1));
        for (int t = 1; t <= 14; ++t) {
            tracker.update(t, {});
        }
        CHECK(tracker.tracks()[0].open);
        CHECK(tracker.tracks()[0].misses == 14);
        tracker.update(15, {});
        CHECK_FALSE(tracker.tracks()[0].open);
        tracker.update(16, std::span(&a, 1));
        REQUIRE(tracker.tracks().size() == 2);
        CHECK(tracker.tracks()[1].id == 1);
    }

    SUBCASE("a gap shorter than the limit is bridged") {
        Tracker tracker(gate);
        const CowSkeleton a = cow_at({100, 200});
        tracker.update(0, std::span(&a, 1));
        for (int t = 1; t < 10; ++t) {
            tracker.update(t, {});
        }
        tracker.update(10, std::span(&a, 1));
        REQUIRE(tracker.tracks().size() == 1);
        CHECK(tracker.tracks()[0].misses == 0);
        CHECK(tracker.tracks()[0].last_frame() == 10);
    }

    SUBCASE("two cows keep their identities regardless of input order") {
        Tracker fwd(gate), rev(gate);
        for (int t = 0; t < 15; ++t) {
            std::vector<CowSkeleton> d = {cow_at({200.0 + 3.0 * t, 200.0}), cow_at({1100.0 - 3.0 * t, 220.0})};
            fwd.update(t, d);
            std::reverse(d.begin(), d.end());
            rev.update(t, d);
        }
        REQUIRE(fwd.tracks().size() == 2);
        REQUIRE(rev.tracks().size() == 2);
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(fwd.tracks()[k].frames == rev.tracks()[k].frames);
            CHECK(fwd.tracks()[k].frames.size() == 15);
        }
        CHECK(fwd.tracks()[0].frames.front().center.x < fwd.tracks()[1].frames.front().center.x);
    }

    SUBCASE("greedy takes the closest pair first") {
        std::vector<Track> tracks;
        int next = 0;
        const std::vector<CowSkeleton> first = {cow_at({100, 100})};
        match_frames(tracks, first, 50.0, next);
        const std::vector<CowSkeleton> second = {cow_at({130, 100}), cow_at({110, 100})};
        match_frames(tracks, second, 50.0, next);
        REQUIRE(tracks.size() == 2);
        CHECK(tracks[0].frames.back().center.x == doctest::Approx(110.0));
        CHECK(tracks[1].frames.front().center.x == doctest::Approx(130.0));
    }

    SUBCASE("generator identities survive a two-cow walk") {
        auto cfg = fixture::hard_scene(30, 5);
        cfg.dropout = 0.0;
        SceneGenerator gen(cfg);
        const auto seq = gen.truth().to_sequence(cfg.width, cfg.height);
        Tracker tracker(gate);
        for (std::size_t t = 0; t < seq.frames.size(); ++t) {
            auto cows = seq.frames[t].cows;
            for (auto& c : cows) {
                c.track_id.reset();
            }
            if (t % 2 == 1) {
                std::reverse(cows.begin(), cows.end());
            }
            tracker.update(static_cast<std::int64_t>(t), cows);
        }
        REQUIRE(tracker.tracks().size() == 2);
        for (const auto& track : tracker.tracks()) {
            REQUIRE(track.frames.size() == seq.frames.size());
            std::set<int> identities;
            for (std::size_t t = 0; t < track.frames.size(); ++t) {
                for (const auto& truth : seq.frames[t].cows) {
                    if (truth.center == track.frames[t].center) {
                        identities.insert(truth.track_id.value());
                    }
                }
            }
            CHECK(identities.size() == 1);
            CHECK(*identities.begin() == track.id);
        }
    }

    SUBCASE("errors") {
        CHECK_THROWS_AS(Tracker(0.0), InvalidArgument);
        Tracker tracker(gate);
        tracker.update(3, {});
        CHECK_THROWS_WITH_AS(tracker.update(3, {}), doctest::Contains("frames must arrive in increasing order"),
                             InvalidArgument);
    }
}

TEST_CASE("filter_track") {
    const double bl = tmpl().body_length();

    SUBCASE("constant track is unchanged") {
        const auto t = track_of(std::vector<CowSkeleton>(9, cow_at({400, 300})));
        const auto f = filter_track(t, 5, bl);
        CHECK(f.frames == t.frames);
    }

    SUBCASE("a single spike is removed and flagged") {
        std::vector<CowSkeleton> cows;
        for (int i = 0; i < 9; ++i) {
            cows.push_back(cow_at({400.0 + 2.0 * i, 300.0}));
        }
        cows[4][JointId::SPINE].position += Vec2{0.0, 0.3 * bl};
        const auto f = filter_track(track_of(cows), 5, bl);
        CHECK(f.frames[4][JointId::SPINE].status == JointStatus::predicted);
        CHECK(distance(f.frames[4][JointId::SPINE].position, cow_at({408, 300})[JointId::SPINE].position) < 1e-9);
        CHECK(f.frames[3][JointId::SPINE].status == JointStatus::detected);
    }

    SUBCASE("a 50 px spike is replaced and nothing else moves") {
        std::vector<CowSkeleton> cows;
        for (int i = 0; i < 9; ++i) {
            cows.push_back(cow_at({400.0 + 3.0 * i, 300.0}));
        }
        const auto clean = cows;
        cows[4][JointId::SHOULDER].position += Vec2{0.0, 50.0};
        const auto f = filter_track(track_of(cows), 5, bl);
        for (std::size_t i = 0; i < 9; ++i) {
            for (std::size_t j = 0; j < kJointCount; ++j) {
                CHECK(distance(f.frames[i].joints[j].position, clean[i].joints[j].position) < 1e-9);
            }
        }
    }

    SUBCASE("small deviations keep their status") {
        auto t = jittered_walk(3, 30, 0.01 * bl);
        const auto f = filter_track(t, 5, bl);
        for (const auto& c : f.frames) {
            CHECK(c.count_upper(JointStatus::predicted) == 0);
        }
    }

    SUBCASE("matches a reference sliding median") {
        for (int window : {1, 3, 5, 7}) {
            const auto t = jittered_walk(10 + window, 23, 5.0);
            const auto f = filter_track(t, window, bl);
            for (auto j : kUpperBodyJoints) {
                std::vector<double> xs, ys;
                for (const auto& c : t.frames) {
                    xs.push_back(c[j].position.x);
                    ys.push_back(c[j].position.y);
                }
                const auto mx = oracle::sliding_median(xs, window);
                const auto my = oracle::sliding_median(ys, window);
                for (std::size_t i = 0; i < t.frames.size(); ++i) {
                    CHECK(f.frames[i][j].position == Vec2{mx[i], my[i]});
                }
            }
            for (const auto& c : f.frames) {
                auto copy = c;
                copy.recompute_center();
                CHECK(copy.center == c.center);
            }
        }
    }

    SUBCASE("smoothing reduces temporal inconsistency") {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const auto t = jittered_walk(seed, 30, 4.0);
            CHECK(temporal_consistency(filter_track(t, 5, bl)) < temporal_consistency(t));
        }
    }

    SUBCASE("leg-hoof joints are left alone") {
        const auto t = jittered_walk(5, 12, 3.0);
        auto noisy = t;
        Rng rng(6);
        for (auto& c : noisy.frames) {
            for (auto j : kLimbJoints) {
                c[j].position += Vec2{rng.normal() * 20, rng.normal() * 20};
            }
        }
        const auto f = filter_track(noisy, 5, bl);
        for (std::size_t i = 0; i < f.frames.size(); ++i) {
            for (auto j : kLimbJoints) {
                CHECK(f.frames[i][j] == noisy.frames[i][j]);
            }
        }
    }

    SUBCASE("absent joints stay absent and are skipped by the median") {
        std::vector<CowSkeleton> cows;
        for (int i = 0; i < 7; ++i) {
            cows.push_back(cow_at({400.0 + i, 300.0}));
        }
        cows[3][JointId::HEAD].status = JointStatus::absent;
        cows[3][JointId::HEAD].position = {-1e6, -1e6};
        const auto f = filter_track(track_of(cows), 5, bl);
        CHECK(f.frames[3][JointId::HEAD].status == JointStatus::absent);
        for (std::size_t i = 0; i < 7; ++i) {
            if (i != 3) {
                CHECK(f.frames[i][JointId::HEAD].status == JointStatus::detected);
            }
        }
    }

    SUBCASE("status follows the majority of its window") {
        std::vector<CowSkeleton> cows(7, cow_at({400, 300}));
        for (int i : {0, 1, 2, 4, 5, 6}) {
            cows[i][JointId::NOSE].status = JointStatus::predicted;
        }
        auto f = filter_track(track_of(cows), 5, bl);
        for (const auto& c : f.frames) {
            CHECK(c[JointId::NOSE].status == JointStatus::predicted);
        }
        // A lone prediction among detections stays a prediction; detections stay.
        cows.assign(7, cow_at({400, 300}));
        cows[3][JointId::NOSE].status = JointStatus::predicted;
        f = filter_track(track_of(cows), 5, bl);
        CHECK(f.frames[3][JointId::NOSE].status == JointStatus::predicted);
        CHECK(f.frames[2][JointId::NOSE].status == JointStatus::detected);
    }

    SUBCASE("short tracks and errors") {
        const auto one = track_of({cow_at({1, 2})});
        CHECK(filter_track(one, 5, bl).frames == one.frames);
        for (int bad : {0, 2, -3}) {
            CHECK_THROWS_WITH_AS(filter_track(one, bad, bl), "median window must be a positive odd integer",
                                 InvalidArgument);
        }
    }
}

TEST_CASE("track_speed") {
    std::vector<CowSkeleton> cows;
    for (int i = 0; i < 5; ++i) {
        cows.push_back(cow_at({100.0 + 3.0 * i, 50.0 + 4.0 * i}));
    }
    CHECK(track_speed(track_of(cows), 1.0) == doctest::Approx(5.0));
    CHECK(track_speed(track_of(cows), 25.0) == doctest::Approx(125.0));

    std::vector<CowSkeleton> walk, still;
    for (int i = 0; i < 6; ++i) {
        walk.push_back(cow_at({100.0 + 4.0 * i, 50.0}));
        still.push_back(cow_at({100.0, 50.0}));
    }
    CHECK(track_speed(track_of(walk), 30.0) == doctest::Approx(120.0));
    CHECK(track_speed(track_of(still), 30.0) == 0.0);

    // Frame gaps are divided out.
    auto gappy = track_of({cow_at({0, 0}), cow_at({30, 0})});
    gappy.frames[1].frame_index = 3;
    CHECK(track_speed(gappy, 1.0) == doctest::Approx(10.0));

    CHECK_THROWS_WITH_AS(track_speed(track_of({cow_at({0, 0})}), 1.0), "track speed needs at least two frames",
                         InvalidArgument);

    SUBCASE("generator speed is recovered") {
        SceneGenerator gen(fixture::training_scene(0.0, 30, 1));
        const auto seq = gen.truth().to_sequence(1000, 640);
        std::vector<CowSkeleton> truth;
        for (const auto& f : seq.frames) {
            truth.push_back(f.cows[0]);
        }
        CHECK(track_speed(track_of(truth), 1.0) == doctest::Approx(4.0).epsilon(0.02));
    }
}

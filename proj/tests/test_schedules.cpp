#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "schedules.hpp"

using namespace meanflow;

TEST_CASE("progress schedule endpoints and plug-in values") {
    CHECK(progress(0, 1000, 1.0) == 1.0);
    CHECK(progress(1000, 1000, 1.0) == 0.0);
    CHECK(progress(500, 1000, 1.0) == doctest::Approx(0.5));
    CHECK(progress(500, 1000, 2.0) == doctest::Approx(0.75));
    // monotone non-increasing
    double prev = 1.0;
    for (i64 i = 0; i <= 100; ++i) {
        const double s = progress(i, 100, 0.5);
        CHECK(s <= prev + 1e-15);
        prev = s;
    }
    CHECK_THROWS_AS(progress(5, 4, 1.0), InvalidError);
    CHECK_THROWS_AS(progress(0, 10, 0.0), InvalidError);
}

TEST_CASE("beta weight formula") {
    // s = 0 weights all gaps equally
    for (double dt : {0.0, 0.3, 0.99}) CHECK(beta_weight(dt, 0.0, 2.0) == 1.0);
    // uniform-gap case lambda = 2: beta(0.25, 1) = 1.5
    CHECK(beta_weight(0.25, 1.0, 2.0) == doctest::Approx(1.5));
}

TEST_CASE("lambda normalizes beta to unit expectation at s = 1") {
    ScheduleConfig cfg;
    cfg.fm_ratio = 0.25;
    ScheduleState state{cfg};
    state.estimate_lambda(Rng(42));

    // Monte-Carlo oracle with fresh draws
    Rng rng(777);
    double acc = 0.0;
    i64 count = 0;
    while (count < 1000000) {
        TimeSample ts = state.sample_times(rng, 4096);
        for (i64 i = 0; i < 4096 && count < 1000000; ++i) {
            if (ts.is_fm[static_cast<size_t>(i)]) continue;
            const double dt = ts.t[static_cast<size_t>(i)] - ts.r[static_cast<size_t>(i)];
            acc += beta_weight(dt, 1.0, state.lambda());
            ++count;
        }
    }
    CHECK(std::abs(acc / static_cast<double>(count) - 1.0) < 0.01);

    // mid-training expectation is also unit: E[beta(dt, s)] = 1 - s + s = 1
    Rng rng2(778);
    double acc2 = 0.0;
    i64 count2 = 0;
    while (count2 < 1000000) {
        TimeSample ts = state.sample_times(rng2, 4096);
        for (i64 i = 0; i < 4096 && count2 < 1000000; ++i) {
            if (ts.is_fm[static_cast<size_t>(i)]) continue;
            const double dt = ts.t[static_cast<size_t>(i)] - ts.r[static_cast<size_t>(i)];
            acc2 += beta_weight(dt, 0.5, state.lambda());
            ++count2;
        }
    }
    CHECK(std::abs(acc2 / static_cast<double>(count2) - 1.0) < 0.01);
}

TEST_CASE("lambda estimation is deterministic given the seed") {
    ScheduleConfig cfg;
    ScheduleState a{cfg}, b{cfg};
    a.estimate_lambda(Rng(5));
    b.estimate_lambda(Rng(5));
    CHECK(a.lambda() == b.lambda());
}

TEST_CASE("fm ratio 1 collapses every row and dt_range constrains gaps") {
    ScheduleConfig all_fm;
    all_fm.fm_ratio = 1.0;
    ScheduleState s1{all_fm};
    Rng rng(1);
    TimeSample ts = s1.sample_times(rng, 512);
    for (i64 i = 0; i < 512; ++i)
        CHECK(ts.t[static_cast<size_t>(i)] == ts.r[static_cast<size_t>(i)]);

    ScheduleConfig ranged;
    ranged.fm_ratio = 0.0;
    ranged.dt_range = DtRange{0.1, 0.3};
    ScheduleState s2{ranged};
    TimeSample tr = s2.sample_times(rng, 2048);
    for (i64 i = 0; i < 2048; ++i) {
        const double dt = tr.t[static_cast<size_t>(i)] - tr.r[static_cast<size_t>(i)];
        CHECK(dt >= 0.1 - 1e-12);
        CHECK(dt <= 0.3 + 1e-12);
        CHECK(tr.r[static_cast<size_t>(i)] >= 0.0);
    }

    ScheduleConfig bad;
    bad.dt_range = DtRange{0.5, 0.5};
    CHECK_THROWS_AS(ScheduleState{bad}, ConfigError);
}

TEST_CASE("gap rescaler is monotone in the raw gap") {
    const DtRange range{0.2, 0.6};
    double prev = -1.0;
    for (double raw = 0.0; raw <= 1.0; raw += 0.01) {
        const double dt = ScheduleState::rescale_gap(raw, range);
        CHECK(dt > prev);
        CHECK(dt >= 0.2);
        CHECK(dt <= 0.6 + 1e-12);
        prev = dt;
    }
}

TEST_CASE("fm-row fraction matches the configured ratio within binomial bounds") {
    ScheduleConfig cfg;
    cfg.fm_ratio = 0.3;
    ScheduleState state{cfg};
    Rng rng(9);
    const i64 n = 100000;
    TimeSample ts = state.sample_times(rng, n);
    i64 fm = 0;
    for (uint8_t f : ts.is_fm) fm += f;
    const double phat = static_cast<double>(fm) / static_cast<double>(n);
    const double sigma = std::sqrt(0.3 * 0.7 / static_cast<double>(n));
    CHECK(std::abs(phat - 0.3) < 3.0 * sigma);
}

TEST_CASE("base sampler matches the logit-normal law (KS test)") {
    ScheduleConfig cfg;
    ScheduleState state{cfg};
    Rng rng(11);
    const i64 n = 1000000;
    std::vector<double> draws(static_cast<size_t>(n));
    for (auto& d : draws) d = state.sample_t(rng);
    std::sort(draws.begin(), draws.end());

    auto cdf = [&](double t) {
        const double x = (std::log(t / (1.0 - t)) - cfg.logit_mu) / cfg.logit_sigma;
        return 0.5 * std::erfc(-x / std::sqrt(2.0));
    };
    double ks = 0.0;
    for (size_t i = 0; i < draws.size(); ++i) {
        const double f = cdf(draws[i]);
        const double lo = static_cast<double>(i) / static_cast<double>(n);
        const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
        ks = std::max(ks, std::max(std::abs(f - lo), std::abs(f - hi)));
    }
    CHECK(ks < 0.005);
}

TEST_CASE("alpha weight kinds") {
    ScheduleConfig unit;
    ScheduleState su{unit};
    for (double t : {0.0, 0.3, 1.0}) CHECK(su.alpha(t) == 1.0);

    ScheduleConfig snr;
    snr.alpha_kind = AlphaKind::ClampedSnr;
    ScheduleState ss{snr};
    // SNR(0.5) = 1 <= 5 -> weight 1
    CHECK(ss.alpha(0.5) == 1.0);
    // SNR(0.1) = 81 -> 5/81
    CHECK(ss.alpha(0.1) == doctest::Approx(5.0 / 81.0).epsilon(1e-12));
    CHECK(ss.alpha(1.0) == 1.0);  // SNR = 0, below the clamp
    CHECK(ss.alpha(0.0) == 0.0);  // SNR -> inf
    for (double t = 0.01; t < 1.0; t += 0.01) CHECK(ss.alpha(t) <= 1.0);
}

TEST_CASE("adaptive sampler upweights the lossy bin and keeps the floor") {
    ScheduleConfig cfg;
    cfg.sampler_kind = SamplerKind::Adaptive;
    cfg.fm_ratio = 1.0;
    ScheduleState state{cfg};
    Rng rng(13);

    // synthetic profile: loss 5.0 inside bin of t ~ 0.5, 1.0 elsewhere
    for (int step = 0; step < 200; ++step) {
        TimeSample ts = state.sample_times(rng, 256);
        std::vector<double> losses(256);
        for (i64 i = 0; i < 256; ++i) {
            const double t = ts.t[static_cast<size_t>(i)];
            losses[static_cast<size_t>(i)] = (t >= 0.5 && t < 0.5 + 1.0 / 64.0) ? 5.0 : 1.0;
        }
        state.update_sampler(ts, losses);
    }
    std::vector<double> density = state.sampler_density();
    const size_t hot = static_cast<size_t>(0.5 * 64.0);
    const double uniform = 1.0 / 64.0;
    CHECK(density[hot] > uniform);
    double total = 0.0;
    for (double d : density) {
        CHECK(d >= 0.1 / 64.0 - 1e-15);  // floor guarantee
        total += d;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("adaptive sampler converges to uniform under equal losses") {
    ScheduleConfig cfg;
    cfg.sampler_kind = SamplerKind::Adaptive;
    cfg.fm_ratio = 1.0;
    ScheduleState state{cfg};
    Rng rng(17);
    for (int step = 0; step < 100; ++step) {
        TimeSample ts = state.sample_times(rng, 512);
        std::vector<double> losses(512, 2.0);
        state.update_sampler(ts, losses);
    }
    for (double d : state.sampler_density())
        CHECK(d == doctest::Approx(1.0 / 64.0).epsilon(0.05));
}

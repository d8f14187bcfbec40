#include <doctest.h>

#include <random>

#include "annkit/dataset.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace annkit;

namespace {

// One fvecs record [dim=2, 1.0f, 2.0f].
const std::vector<unsigned char> kGoldenFvecs = {0x02, 0x00, 0x00, 0x00, 0x00, 0x00,
                                                 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40};

VectorSet random_set(std::uint32_t n, std::uint32_t dim, std::uint64_t seed) {
    return gen_synthetic(n, dim, seed);
}

}  // namespace

TEST_CASE("fvecs golden single record loads and saves byte-exactly") {
    TempDir dir;
    const auto path = dir.file("one.fvecs");
    write_bytes(path, kGoldenFvecs);

    const VectorSet vs = load_fvecs(path);
    CHECK(vs.n == 1);
    CHECK(vs.dim == 2);
    REQUIRE(vs.data.size() == 2);
    CHECK(vs.data[0] == 1.0f);
    CHECK(vs.data[1] == 2.0f);

    const auto out = dir.file("one_out.fvecs");
    save_fvecs(vs, out);
    CHECK(read_bytes(out) == kGoldenFvecs);
}

TEST_CASE("empty fvecs file loads as n=0 dim=0") {
    TempDir dir;
    const auto path = dir.file("empty.fvecs");
    write_bytes(path, {});
    const VectorSet vs = load_fvecs(path);
    CHECK(vs.n == 0);
    CHECK(vs.dim == 0);
    CHECK(vs.data.empty());
}

TEST_CASE("saving an empty set produces a zero-byte file") {
    TempDir dir;
    const auto path = dir.file("empty_out.fvecs");
    save_fvecs(VectorSet{}, path);
    CHECK(read_bytes(path).empty());
}

TEST_CASE("fvecs round trip is bit exact") {
    TempDir dir;
    const VectorSet vs = random_set(100, 16, 42);
    const auto path = dir.file("rt.fvecs");
    save_fvecs(vs, path);
    const VectorSet back = load_fvecs(path);
    CHECK(back.n == vs.n);
    CHECK(back.dim == vs.dim);
    CHECK(back.data == vs.data);

    const auto path2 = dir.file("rt2.fvecs");
    save_fvecs(back, path2);
    CHECK(read_bytes(path) == read_bytes(path2));
}

TEST_CASE("truncated fvecs record reports the byte offset") {
    TempDir dir;
    const auto path = dir.file("trunc.fvecs");
    auto bytes = kGoldenFvecs;
    bytes.resize(11);  // cut the last float short
    write_bytes(path, bytes);
    CHECK_THROWS_WITH_AS(load_fvecs(path), doctest::Contains("byte 8"), format_error);
}

TEST_CASE("inconsistent fvecs dimension names the record") {
    TempDir dir;
    const auto path = dir.file("mixed.fvecs");
    VectorSet a{1, 2, {1.0f, 2.0f}};
    save_fvecs(a, path);
    // Append a dim-3 record by hand.
    auto bytes = read_bytes(path);
    const std::vector<unsigned char> extra = {0x03, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x3F,
                                              0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x40, 0x40};
    bytes.insert(bytes.end(), extra.begin(), extra.end());
    write_bytes(path, bytes);
    CHECK_THROWS_WITH_AS(load_fvecs(path), doctest::Contains("record 1"), format_error);
}

TEST_CASE("non-finite fvecs payload is a data error") {
    TempDir dir;
    const auto path = dir.file("nan.fvecs");
    // [dim=1, NaN]: quiet NaN bits 0x7FC00000.
    write_bytes(path, {0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0xC0, 0x7F});
    CHECK_THROWS_WITH_AS(load_fvecs(path), doctest::Contains("record 0"), data_error);
}

TEST_CASE("ivecs mirrors the fvecs behavior") {
    TempDir dir;

    SUBCASE("golden record") {
        const std::vector<unsigned char> golden = {0x02, 0x00, 0x00, 0x00, 0x07, 0x00,
                                                   0x00, 0x00, 0x09, 0x00, 0x00, 0x00};
        const auto path = dir.file("one.ivecs");
        write_bytes(path, golden);
        const GroundTruth gt = load_ivecs(path);
        CHECK(gt.n == 1);
        CHECK(gt.k == 2);
        CHECK(gt.ids == std::vector<std::uint32_t>{7, 9});
        const auto out = dir.file("one_out.ivecs");
        save_ivecs(gt, out);
        CHECK(read_bytes(out) == golden);
    }

    SUBCASE("empty file") {
        const auto path = dir.file("empty.ivecs");
        write_bytes(path, {});
        const GroundTruth gt = load_ivecs(path);
        CHECK(gt.n == 0);
        CHECK(gt.k == 0);
    }

    SUBCASE("random round trip") {
        std::mt19937_64 rng(7);
        GroundTruth gt;
        gt.n = 100;
        gt.k = 16;
        for (std::uint32_t i = 0; i < gt.n * gt.k; ++i) {
            gt.ids.push_back(static_cast<std::uint32_t>(rng() % 100000));
        }
        const auto path = dir.file("rt.ivecs");
        save_ivecs(gt, path);
        const GroundTruth back = load_ivecs(path);
        CHECK(back.n == gt.n);
        CHECK(back.k == gt.k);
        CHECK(back.ids == gt.ids);
    }

    SUBCASE("negative id is a data error") {
        const auto path = dir.file("neg.ivecs");
        write_bytes(path, {0x01, 0x00, 0x00, 0x00, 0xFF, 0xFF, 0xFF, 0xFF});
        CHECK_THROWS_AS(load_ivecs(path), data_error);
    }
}

TEST_CASE("ground truth validation catches bad ids") {
    GroundTruth gt;
    gt.n = 1;
    gt.k = 2;
    gt.ids = {0, 5};
    CHECK_THROWS_AS(gt.validate_against(3), data_error);
    gt.ids = {2, 2};
    CHECK_THROWS_AS(gt.validate_against(3), data_error);
    gt.ids = {2, 0};
    CHECK_NOTHROW(gt.validate_against(3));
}

TEST_CASE("gen_synthetic") {
    SUBCASE("n=0 gives an empty set") {
        const VectorSet vs = gen_synthetic(0, 4, 123);
        CHECK(vs.n == 0);
        CHECK(vs.dim == 4);
        CHECK(vs.data.empty());
    }

    SUBCASE("same seed gives identical bits") {
        const VectorSet a = gen_synthetic(10, 4, 7);
        const VectorSet b = gen_synthetic(10, 4, 7);
        CHECK(a.data == b.data);
        const VectorSet c = gen_synthetic(10, 4, 8);
        CHECK(a.data != c.data);
    }

    SUBCASE("values replay the seeded generator and stay in [0,1)") {
        const VectorSet vs = gen_synthetic(10, 4, 7);
        std::mt19937_64 rng(7);
        for (std::uint32_t i = 0; i < 40; ++i) {
            const float expect = float(std::uint32_t(rng() >> 40)) * 0x1p-24f;
            CHECK(vs.data[i] == expect);
            CHECK(vs.data[i] >= 0.0f);
            CHECK(vs.data[i] < 1.0f);
        }
    }
}

TEST_CASE("dist_sq") {
    const VectorSet vs = random_set(50, 8, 3);

    SUBCASE("identity") {
        for (std::uint32_t i = 0; i < vs.n; ++i) CHECK(dist_sq(vs, i, i) == 0.0f);
    }

    SUBCASE("3-4-5 triangle") {
        VectorSet two{1, 2, {3.0f, 4.0f}};
        const std::vector<float> q = {0.0f, 0.0f};
        CHECK(dist_sq_q(two, q, 0) == 25.0f);
    }

    SUBCASE("matches the reference scalar loop exactly") {
        std::mt19937_64 rng(11);
        for (int t = 0; t < 200; ++t) {
            const auto a = static_cast<std::uint32_t>(rng() % vs.n);
            const auto b = static_cast<std::uint32_t>(rng() % vs.n);
            const float expect = oracle::dist_sq(vs.row_ptr(a), vs.row_ptr(b), vs.dim);
            CHECK(dist_sq(vs, a, b) == expect);
            CHECK(dist_sq(vs, b, a) == dist_sq(vs, a, b));
        }
    }

    SUBCASE("id out of range throws") {
        CHECK_THROWS_AS(dist_sq(vs, 0, vs.n), std::out_of_range);
        const std::vector<float> q(8, 0.0f);
        CHECK_THROWS_AS(dist_sq_q(vs, q, vs.n), std::out_of_range);
        const std::vector<float> short_q(3, 0.0f);
        CHECK_THROWS_AS(dist_sq_q(vs, short_q, 0), std::invalid_argument);
    }
}

#include <algorithm>
#include <numeric>
#include <tuple>
#include <doctest.h>
#include <audita/bigint.hpp>
#include <audita/error.hpp>
#include <audita/pdp.hpp>
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace audita;

namespace {

    std::vector<std::uint64_t> iota_space(std::uint64_t n)
    {
        std::vector<std::uint64_t> v(n);
        std::iota(v.begin(), v.end(), 0);
        return v;
    }

    struct tagged_file {
        std::map<std::uint64_t, byte_string> blocks;
        std::map<std::uint64_t, pdp::chunk_tag> tags;
    };

    tagged_file make_file(const pdp::keypair &keys, std::uint64_t n, std::uint64_t salt)
    {
        tagged_file f;
        for (std::uint64_t i = 0; i < n; ++i) {
            auto b = fixture::random_bytes(salt * 100000 + i, keys.pub.block_bytes());
            f.tags.emplace(i, pdp::tag(keys, i, b));
            f.blocks.emplace(i, std::move(b));
        }
        return f;
    }

    // Coefficient j straight from the definition: one more than the low 80
    // bits of the digest, reduced mod 2^80 - 1.
    mpz_class reference_coefficient(byte_view seed, std::uint64_t j)
    {
        const std::string_view label = "audita/chal/coef";
        byte_string input;
        input.push_back(static_cast<std::uint8_t>(label.size()));
        input.insert(input.end(), label.begin(), label.end());
        input.insert(input.end(), seed.begin(), seed.end());
        for (int b = 7; b >= 0; --b)
            input.push_back(static_cast<std::uint8_t>(j >> (8 * b)));
        const auto dg = crypto::sha3_256(input);
        mpz_class x = 0;
        for (std::size_t b = 22; b < 32; ++b)
            x = x * 256 + dg.bytes[b];
        mpz_class range = 1;
        range <<= 80;
        range -= 1;
        return mpz_class { x % range } + 1;
    }

}

TEST_SUITE("pdp") {

TEST_CASE("keygen satisfies the key invariants")
{
    const auto &kp = fixture::pdp_keys(0);
    const auto &pk = kp.pub;
    CHECK(pk.modulus_bits() == 1024);
    CHECK(pk.modulus == kp.sec.p * kp.sec.q);
    for (const auto *prime: { &kp.sec.p, &kp.sec.q }) {
        CHECK(mpz_probab_prime_p(prime->get_mpz_t(), 25) > 0);
        const mpz_class half = (*prime - 1) / 2;
        CHECK(mpz_probab_prime_p(half.get_mpz_t(), 25) > 0);
        // g is a square mod both primes.
        CHECK(mpz_legendre(pk.generator.get_mpz_t(), prime->get_mpz_t()) == 1);
    }
    mpz_class lambda;
    mpz_lcm(lambda.get_mpz_t(), mpz_class(kp.sec.p - 1).get_mpz_t(), mpz_class(kp.sec.q - 1).get_mpz_t());
    CHECK((pk.exponent * kp.sec.private_exponent) % lambda == 1);
    mpz_class g1 = pk.generator - 1, gcd;
    mpz_gcd(gcd.get_mpz_t(), g1.get_mpz_t(), pk.modulus.get_mpz_t());
    CHECK(gcd == 1);
    CHECK(pk.generator != 1);
}

TEST_CASE("keygen is deterministic and validates its size")
{
    const auto a = pdp::keygen(1024, fixture::seed(0, "pdp-fixture"));
    CHECK(a.pub == fixture::pdp_keys(0).pub);
    CHECK(a.pub != fixture::pdp_keys(1).pub);
    CHECK_THROWS_AS(pdp::keygen(512, fixture::seed(0)), parameter_error);
    CHECK_THROWS_AS(pdp::keygen(4096, fixture::seed(0)), parameter_error);
}

TEST_CASE("2048-bit keys have exactly 2048 bits")
{
    const auto kp = pdp::keygen(2048, fixture::seed(1, "pdp-2048"));
    CHECK(kp.pub.modulus_bits() == 2048);
    CHECK(kp.pub.block_bytes() == 235);
    const auto t = pdp::tag(kp, 3, byte_string(kp.pub.block_bytes(), 0xab));
    const auto lhs = bigint::powm(t.value, kp.pub.exponent, kp.pub.modulus);
    const mpz_class rhs = (pdp::full_domain_hash(kp.pub, 3)
        * bigint::powm(kp.pub.generator, bigint::from_bytes(byte_string(kp.pub.block_bytes(), 0xab)), kp.pub.modulus))
        % kp.pub.modulus;
    CHECK(lhs == rhs);
}

TEST_CASE("headroom leaves room for the aggregate")
{
    const auto &pk = fixture::pdp_keys(0).pub;
    CHECK(pk.block_bits() == 1024 - 80 - 20 - 64);
    CHECK(pk.block_bytes() == 107);
    // 2^20 coefficients below 2^80 times blocks below 2^(8*107) stay under the bound.
    mpz_class worst = 1;
    worst <<= 8 * pk.block_bytes() + 80 + 20;
    CHECK(worst - 1 < pk.aggregate_bound());
}

TEST_CASE("the public key round-trips")
{
    const auto &pk = fixture::pdp_keys(1).pub;
    CHECK(pdp::public_key::deserialize(pk.serialize()) == pk);
    CHECK_THROWS_AS(pdp::public_key::deserialize(byte_string { 1, 2, 3 }), decode_error);
}

TEST_CASE("an all-zero block tags to the root of its hash")
{
    const auto &kp = fixture::pdp_keys(0);
    const auto t = pdp::tag(kp, 5, byte_string(kp.pub.block_bytes(), 0));
    CHECK(bigint::powm(t.value, kp.pub.exponent, kp.pub.modulus) == pdp::full_domain_hash(kp.pub, 5));
}

TEST_CASE("honest tags satisfy the tag equation and bind the index")
{
    const auto &kp = fixture::pdp_keys(1);
    const auto &pk = kp.pub;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const auto block = fixture::random_bytes(i, pk.block_bytes() - i % 7);
        const auto a = pdp::tag(kp, 2 * i, block);
        const auto b = pdp::tag(kp, 2 * i + 1, block);
        REQUIRE(a.value != b.value);
        if (i % 50 == 0) {
            const auto lhs = bigint::powm(a.value, pk.exponent, pk.modulus);
            const mpz_class rhs = (pdp::full_domain_hash(pk, 2 * i)
                * bigint::powm(pk.generator, bigint::from_bytes(block), pk.modulus)) % pk.modulus;
            REQUIRE(lhs == rhs);
        }
    }
}

TEST_CASE("blocks beyond the headroom are rejected")
{
    const auto &kp = fixture::pdp_keys(0);
    CHECK_THROWS_AS(pdp::tag(kp, 0, byte_string(kp.pub.block_bytes() + 1, 1)), parameter_error);
}

TEST_CASE("full-domain hash lands in the quadratic residues")
{
    const auto &kp = fixture::pdp_keys(2);
    for (std::uint64_t i = 0; i < 20; ++i) {
        const auto h = pdp::full_domain_hash(kp.pub, i);
        CHECK(h < kp.pub.modulus);
        CHECK(mpz_legendre(h.get_mpz_t(), kp.sec.p.get_mpz_t()) >= 0);
        CHECK(mpz_legendre(h.get_mpz_t(), kp.sec.q.get_mpz_t()) >= 0);
    }
}

TEST_CASE("genchal exhausts, repeats and matches the golden transcript")
{
    const auto space = iota_space(10);
    const auto full = pdp::genchal(10, space, as_bytes("r"));
    auto sorted = full.indexes;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == space);
    CHECK(pdp::genchal(4, space, as_bytes("r")) == pdp::genchal(4, space, as_bytes("r")));
    CHECK_THROWS_AS(pdp::genchal(11, space, as_bytes("r")), parameter_error);

    const auto seed = as_bytes("golden-challenge");
    const auto c = pdp::genchal(3, space, seed);
    // Recorded once from the reference sampler and frozen.
    const std::vector<std::uint64_t> golden_indexes { 6, 7, 0 };
    const std::vector<std::string> golden_coefficients { "c55250d073196fe7386f", "6488e8b77771d9d62e6a", "1e5ef2395e09119c7139" };
    CHECK(oracle::reference_sample("audita/chal/index", seed, 10, 3) == golden_indexes);
    CHECK(c.indexes == golden_indexes);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(c.coefficients[j].get_str(16) == golden_coefficients[j]);
        CHECK(c.coefficients[j] == reference_coefficient(seed, j));
    }
}

TEST_CASE("coefficients are positive and below 2^80")
{
    mpz_class bound = 1;
    bound <<= 80;
    for (std::uint64_t j = 0; j < 2000; ++j) {
        const auto a = pdp::challenge_coefficient(as_bytes("coef"), j);
        REQUIRE(a >= 1);
        REQUIRE(a < bound);
    }
}

TEST_CASE("challenges index through the given space")
{
    const std::vector<std::uint64_t> space { 100, 205, 317, 999, 4 };
    const auto c = pdp::genchal(5, space, as_bytes("s"));
    for (const auto i: c.indexes)
        CHECK(std::find(space.begin(), space.end(), i) != space.end());
    CHECK(pdp::genchal(0, space, as_bytes("s")).size() == 0);
}

TEST_CASE("the challenge wire form recomputes the challenge")
{
    const auto space = iota_space(50);
    const auto c = pdp::genchal(7, space, as_bytes("wire"));
    const auto w = pdp::challenge_wire::deserialize(pdp::to_wire(c).serialize());
    CHECK(pdp::from_wire(w, space) == c);
    auto other = space;
    other.back() = 1000;
    CHECK_THROWS_AS(pdp::from_wire(w, other), parameter_error);
}

TEST_CASE("single-term aggregation returns the tag and the block")
{
    const auto &kp = fixture::pdp_keys(0);
    const auto f = make_file(kp, 4, 1);
    pdp::challenge c;
    c.indexes = { 2 };
    c.coefficients = { mpz_class { 1 } };
    const auto p = pdp::genproof(kp.pub, c, f.blocks, f.tags);
    CHECK(p.aggregated_tag == f.tags.at(2).value);
    CHECK(p.aggregated_data == bigint::from_bytes(f.blocks.at(2)));
    CHECK(pdp::checkproof(kp.pub, c, p));
}

TEST_CASE("honest proofs verify and tampered ones do not")
{
    const auto &kp = fixture::pdp_keys(1);
    auto f = make_file(kp, 32, 2);
    const auto space = iota_space(32);
    const auto c = pdp::genchal(8, space, as_bytes("chal"));
    const auto p = pdp::genproof(kp.pub, c, f.blocks, f.tags);
    CHECK(pdp::checkproof(kp.pub, c, p));

    auto bumped = p;
    bumped.aggregated_data += 1;
    CHECK_FALSE(pdp::checkproof(kp.pub, c, bumped));
    auto bad_tag = p;
    bad_tag.aggregated_tag = (bad_tag.aggregated_tag * 2) % kp.pub.modulus;
    CHECK_FALSE(pdp::checkproof(kp.pub, c, bad_tag));
}

TEST_CASE("flipping a bit of a challenged block is always caught")
{
    const auto &kp = fixture::pdp_keys(2);
    const auto f = make_file(kp, 16, 3);
    const auto space = iota_space(16);
    int false_accepts = 0;
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
        const auto c = pdp::genchal(3, space, fixture::seed(trial, "tamper"));
        auto blocks = f.blocks;
        auto &victim = blocks.at(c.indexes[trial % 3]);
        victim[trial % victim.size()] ^= static_cast<std::uint8_t>(1u << (trial % 8));
        const auto p = pdp::genproof(kp.pub, c, blocks, f.tags);
        false_accepts += pdp::checkproof(kp.pub, c, p) ? 1 : 0;
    }
    CHECK(false_accepts == 0);
}

TEST_CASE("a proof does not verify under another challenge")
{
    const auto &kp = fixture::pdp_keys(3);
    const auto f = make_file(kp, 24, 4);
    const auto space = iota_space(24);
    int replays = 0;
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
        const auto c = pdp::genchal(4, space, fixture::seed(trial, "r"));
        const auto c2 = pdp::genchal(4, space, fixture::seed(trial, "r-prime"));
        const auto p = pdp::genproof(kp.pub, c, f.blocks, f.tags);
        if (c2.indexes == c.indexes && c2.coefficients == c.coefficients)
            continue;
        replays += pdp::checkproof(kp.pub, c2, p) ? 1 : 0;
    }
    CHECK(replays == 0);
}

TEST_CASE("missing blocks or tags are incomplete input")
{
    const auto &kp = fixture::pdp_keys(0);
    auto f = make_file(kp, 6, 5);
    const auto c = pdp::genchal(6, iota_space(6), as_bytes("all"));
    auto blocks = f.blocks;
    blocks.erase(3);
    CHECK_THROWS_AS(pdp::genproof(kp.pub, c, blocks, f.tags), incomplete_input_error);
    auto tags = f.tags;
    tags.erase(0);
    CHECK_THROWS_AS(pdp::genproof(kp.pub, c, f.blocks, tags), incomplete_input_error);
}

TEST_CASE("malformed proofs are rejected without throwing")
{
    const auto &kp = fixture::pdp_keys(0);
    const auto f = make_file(kp, 4, 6);
    const auto c = pdp::genchal(2, iota_space(4), as_bytes("m"));
    const auto good = pdp::genproof(kp.pub, c, f.blocks, f.tags);
    for (const auto &t: { mpz_class { 0 }, kp.pub.modulus, mpz_class { -5 } }) {
        auto p = good;
        p.aggregated_tag = t;
        CHECK_FALSE(pdp::checkproof(kp.pub, c, p));
    }
    auto negative = good;
    negative.aggregated_data = -1;
    CHECK_FALSE(pdp::checkproof(kp.pub, c, negative));
    auto huge = good;
    huge.aggregated_data = kp.pub.aggregate_bound();
    CHECK_FALSE(pdp::checkproof(kp.pub, c, huge));
    auto mismatched = c;
    mismatched.coefficients.pop_back();
    CHECK_FALSE(pdp::checkproof(kp.pub, mismatched, good));
}

TEST_CASE("serialized proofs have a fixed size")
{
    const auto &kp = fixture::pdp_keys(0);
    const auto f = make_file(kp, 20, 7);
    std::set<std::size_t> sizes;
    for (std::uint64_t d: { 1, 5, 20 }) {
        const auto c = pdp::genchal(d, iota_space(20), fixture::seed(d));
        const auto p = pdp::genproof(kp.pub, c, f.blocks, f.tags);
        const auto bytes = p.serialize(kp.pub);
        sizes.insert(bytes.size());
        CHECK(pdp::proof::deserialize(bytes) == p);
    }
    REQUIRE(sizes.size() == 1);
    CHECK(*sizes.begin() == 4 + kp.pub.modulus_bytes() + 4 + kp.pub.aggregate_bytes());
    // |N|/8 + (block + coefficient + log2 d) / 8 + framing.
    CHECK(*sizes.begin() <= 128 + (8 * 107 + 80 + 20) / 8 + 16);
}

TEST_CASE("detection bounds bracket the exact failure probability")
{
    const auto none = pdp::detection_probability_bounds(12500, 0, 300);
    CHECK(none.lower == 0.0);
    CHECK(none.upper == 0.0);
    const auto b460 = pdp::detection_probability_bounds(12500, 125, 460);
    CHECK(b460.lower >= 0.99);
    const auto b300 = pdp::detection_probability_bounds(12500, 125, 300);
    CHECK(b300.lower >= 0.95);
    for (const auto &[m, t, d]: std::vector<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>> {
             { 12500, 125, 300 }, { 12500, 125, 460 }, { 1000, 10, 100 }, { 50, 5, 45 }, { 10, 1, 9 } }) {
        const auto b = pdp::detection_probability_bounds(m, t, d);
        const double exact = oracle::hypergeometric_failure(m, t, d);
        CHECK(b.lower <= exact + 1e-12);
        CHECK(exact <= b.upper + 1e-12);
    }
    // Upper bound clamps once every subset must hit.
    CHECK(pdp::detection_probability_bounds(10, 5, 5).upper <= 1.0);
    CHECK_THROWS_AS(pdp::detection_probability_bounds(10, 11, 1), parameter_error);
    CHECK_THROWS_AS(pdp::detection_probability_bounds(10, 2, 0), parameter_error);
    CHECK_THROWS_AS(pdp::detection_probability_bounds(10, 2, 9), parameter_error);
}

TEST_CASE("substituted blocks fail exactly when challenged")
{
    const auto &kp = fixture::pdp_keys(3);
    const std::uint64_t m = 40, t = 4;
    auto f = make_file(kp, m, 8);
    auto forged = f.blocks;
    for (std::uint64_t i = 0; i < t; ++i)
        forged.at(i * 10) = fixture::random_bytes(900 + i, kp.pub.block_bytes());
    std::uint64_t hits = 0, failures = 0;
    for (std::uint64_t trial = 0; trial < 300; ++trial) {
        const auto c = pdp::genchal(5, iota_space(m), fixture::seed(trial, "forge"));
        const bool hit = std::any_of(c.indexes.begin(), c.indexes.end(), [](std::uint64_t i) { return i % 10 == 0; });
        const bool ok = pdp::checkproof(kp.pub, c, pdp::genproof(kp.pub, c, forged, f.tags));
        hits += hit ? 1 : 0;
        failures += ok ? 0 : 1;
        REQUIRE(ok != hit);
    }
    const double exact = oracle::hypergeometric_failure(m, t, 5);
    const double rate = static_cast<double>(failures) / 300.0;
    CHECK(std::abs(rate - exact) <= 3 * oracle::binomial_se(exact, 300));
}

}

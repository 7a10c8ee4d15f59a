#pragma once

#include <cstdint>
#include <gmpxx.h>
#include <audita/bytes.hpp>
#include <audita/crypto.hpp>

namespace audita::bigint {

    mpz_class from_bytes(byte_view big_endian);
    // Minimal big-endian encoding; zero encodes as an empty string.
    byte_string to_bytes(const mpz_class &x);
    // Left-padded to exactly width bytes; parameter_error if x does not fit.
    byte_string to_bytes_fixed(const mpz_class &x, std::size_t width);

    std::size_t bit_length(const mpz_class &x);

    mpz_class powm(const mpz_class &base, const mpz_class &exp, const mpz_class &mod);

    // Deterministic random stream for key generation; counter-mode SHA3 under
    // the key-derivation domain.
    class drbg {
    public:
        explicit drbg(byte_view seed);

        void fill(std::span<std::uint8_t> out);
        mpz_class bits(std::size_t nbits);
        mpz_class below(const mpz_class &bound);
    private:
        byte_string _seed;
        std::uint64_t _counter = 0;
    };

    // Safe prime p = 2q + 1 with exactly nbits bits and the top two bits set.
    mpz_class generate_safe_prime(std::size_t nbits, drbg &rng, std::size_t max_rounds = 64);

}

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>
#include <gmpxx.h>
#include <audita/bytes.hpp>
#include <audita/crypto.hpp>

// Publicly verifiable provable data possession with RSA full-domain-hash
// homomorphic tags:
//
//   tag:    tau_i = (fdh(id || i) * g^f_i)^d  mod N
//   proof:  T = prod tau_ij^a_j,  M = sum a_j * f_ij   (M over the integers)
//   check:  T^e == prod fdh(id || i_j)^a_j * g^M       mod N
//
// Verification needs only (N, e, g, id). M is sent in the clear, so a proof
// reveals one linear combination of the challenged blocks.
namespace audita::pdp {

    inline constexpr unsigned coefficient_bits = 80;
    inline constexpr unsigned headroom_slack_bits = 64;
    // Largest challenge the headroom is sized for: 2^20 blocks.
    inline constexpr unsigned max_challenge_log2 = 20;

    struct public_key {
        mpz_class modulus;
        mpz_class exponent;
        mpz_class generator;
        crypto::digest file_id;

        bool operator==(const public_key &) const = default;

        std::size_t modulus_bits() const;
        std::size_t modulus_bytes() const;
        // Usable integer width of one block.
        std::size_t block_bits() const;
        // Blocks are whole bytes: floor(block_bits / 8).
        std::size_t block_bytes() const;
        // Fixed width of the encoded aggregate M.
        std::size_t aggregate_bytes() const;
        mpz_class aggregate_bound() const;

        byte_string serialize() const;
        static public_key deserialize(byte_view b);
    };

    struct secret_key {
        mpz_class p;
        mpz_class q;
        mpz_class private_exponent;
    };

    struct keypair {
        public_key pub;
        secret_key sec;
    };

    keypair keygen(std::size_t modulus_bits, byte_view seed);

    mpz_class full_domain_hash(const public_key &pk, std::uint64_t index);

    struct chunk_tag {
        std::uint64_t index = 0;
        mpz_class value;

        bool operator==(const chunk_tag &) const = default;
    };

    chunk_tag tag(const keypair &keys, std::uint64_t index, byte_view block);

    struct challenge {
        std::vector<std::uint64_t> indexes;
        std::vector<mpz_class> coefficients;
        byte_string seed;
        crypto::digest space_digest;

        bool operator==(const challenge &) const = default;

        std::size_t size() const noexcept
        {
            return indexes.size();
        }
    };

    crypto::digest index_space_digest(std::span<const std::uint64_t> space);

    // Challenged positions into the index space, in draw order.
    std::vector<std::uint64_t> challenge_positions(std::uint64_t d, std::uint64_t space_size, byte_view seed);
    mpz_class challenge_coefficient(byte_view seed, std::uint64_t j);
    challenge genchal(std::uint64_t d, std::span<const std::uint64_t> index_space, byte_view seed);

    // The wire form carries (d, r, digest of the index space). Indexes and
    // coefficients are always recomputed by the receiver.
    struct challenge_wire {
        std::uint64_t d = 0;
        byte_string seed;
        crypto::digest space_digest;

        byte_string serialize() const;
        static challenge_wire deserialize(byte_view b);
    };

    challenge_wire to_wire(const challenge &c);
    challenge from_wire(const challenge_wire &w, std::span<const std::uint64_t> index_space);

    struct proof {
        mpz_class aggregated_tag;
        mpz_class aggregated_data;

        bool operator==(const proof &) const = default;

        // Both integers are encoded at fixed width (modulus_bytes and
        // aggregate_bytes), so the size depends only on the key.
        byte_string serialize(const public_key &pk) const;
        static proof deserialize(byte_view b);
    };

    struct block_ref {
        byte_view data;
        const mpz_class *tag;
    };

    using block_lookup = std::function<std::optional<block_ref>(std::uint64_t index)>;

    proof genproof(const public_key &pk, const challenge &chal, const block_lookup &lookup);
    proof genproof(const public_key &pk, const challenge &chal,
        const std::map<std::uint64_t, byte_string> &blocks, const std::map<std::uint64_t, chunk_tag> &tags);

    bool checkproof(const public_key &pk, const challenge &chal, const proof &pi);

    struct bounds {
        double lower;
        double upper;
    };

    // Failure probability band for a prover missing t of its m blocks when
    // challenged on d of them.
    bounds detection_probability_bounds(std::uint64_t m, std::uint64_t t, std::uint64_t d);

    struct work_counters {
        std::atomic<std::uint64_t> tags { 0 };
        std::atomic<std::uint64_t> proofs { 0 };
        std::atomic<std::uint64_t> checks { 0 };

        void reset() noexcept
        {
            tags = 0;
            proofs = 0;
            checks = 0;
        }
    };

    work_counters &counters();

}

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <unordered_set>
#include <vector>
#include <memory>
#include <audita/bytes.hpp>

struct evp_md_ctx_st;

namespace audita::crypto {

    inline constexpr std::size_t digest_size = 32;

    struct digest {
        std::array<std::uint8_t, digest_size> bytes {};

        auto operator<=>(const digest &) const = default;

        byte_view view() const noexcept
        {
            return bytes;
        }

        std::string hex() const;
        static digest from_bytes(byte_view b);
    };

    // The first three are the protocol's H1/H2/H3; the rest are internal PRF
    // and commitment uses. Each domain is absorbed as a length-prefixed label
    // in front of the input, so no two domains share a preimage.
    enum class hash_domain : std::uint8_t {
        chunk_sampling = 1,
        node_sampling = 2,
        challenge_seed = 3,
        challenge_index,
        challenge_coefficient,
        full_domain,
        key_derivation,
        oracle,
        leader_selection,
        block,
        transaction,
        file_id,
        simulation,
    };

    std::string_view domain_label(hash_domain d);

    digest sha3_256(byte_view input);
    digest hash(hash_domain domain, byte_view input);
    digest hash(hash_domain domain, std::initializer_list<byte_view> parts);

    // Counter-mode output stream: block j is hash(domain, seed || be32(j)).
    void expand(hash_domain domain, byte_view seed, std::span<std::uint8_t> out);

    // Draws distinct indexes in [0, universe) by hashing seed || be64(j) for
    // j = 1, 2, ... The low ceil(log2(universe)) bits of the big-endian digest
    // are the candidate; out-of-range candidates and repeats are skipped.
    // The k-th accepted index depends only on the first hash calls, so any
    // prefix of a longer draw equals the shorter draw.
    class index_sampler {
    public:
        index_sampler(hash_domain domain, byte_view seed, std::uint64_t universe);

        std::uint64_t next();

        std::uint64_t drawn() const noexcept
        {
            return _drawn;
        }

        std::uint64_t hash_calls() const noexcept
        {
            return _counter;
        }

        std::uint64_t universe() const noexcept
        {
            return _universe;
        }
    private:
        struct ctx_deleter {
            void operator()(evp_md_ctx_st *c) const noexcept;
        };

        bool _mark(std::uint64_t idx);

        // Hash state with the domain prefix and seed already absorbed.
        std::unique_ptr<evp_md_ctx_st, ctx_deleter> _prefix;
        std::uint64_t _counter = 0;
        std::uint64_t _universe;
        std::uint64_t _mask;
        std::uint64_t _drawn = 0;
        std::vector<bool> _seen_dense;
        std::unordered_set<std::uint64_t> _seen_sparse;
    };

    std::vector<std::uint64_t> sample_without_replacement(hash_domain domain, byte_view seed,
        std::uint64_t universe_size, std::uint64_t sample_size);

    inline constexpr std::size_t sig_key_size = 32;
    inline constexpr std::size_t signature_size = 64;

    struct sig_public_key {
        std::array<std::uint8_t, sig_key_size> bytes {};

        auto operator<=>(const sig_public_key &) const = default;

        byte_view view() const noexcept
        {
            return bytes;
        }

        std::string hex() const;
        static sig_public_key decode(byte_view b);
    };

    struct sig_secret_key {
        std::array<std::uint8_t, sig_key_size> bytes {};

        bool operator==(const sig_secret_key &) const = default;
        static sig_secret_key decode(byte_view b);
    };

    struct sig_keypair {
        sig_public_key public_key;
        sig_secret_key secret_key;

        bool operator==(const sig_keypair &) const = default;

        byte_string serialize() const;
        static sig_keypair deserialize(byte_view b);
    };

    using signature = std::array<std::uint8_t, signature_size>;

    // Ed25519; the secret key is a hash of the seed, so keygen is deterministic.
    sig_keypair sig_keygen(byte_view seed);
    signature sign(const sig_secret_key &sk, byte_view message);
    // Throws decode_error when the signature is not signature_size bytes;
    // any well-formed but wrong signature returns false.
    bool sig_verify(const sig_public_key &pk, byte_view message, byte_view sig);

}

template<>
struct std::hash<audita::crypto::sig_public_key> {
    std::size_t operator()(const audita::crypto::sig_public_key &k) const noexcept
    {
        std::size_t h = 0;
        for (std::size_t i = 0; i < sizeof(h); ++i)
            h = (h << 8) | k.bytes[i];
        return h;
    }
};

template<>
struct std::hash<audita::crypto::digest> {
    std::size_t operator()(const audita::crypto::digest &d) const noexcept
    {
        std::size_t h = 0;
        for (std::size_t i = 0; i < sizeof(h); ++i)
            h = (h << 8) | d.bytes[i];
        return h;
    }
};

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>
#include <gmpxx.h>
#include <audita/bytes.hpp>
#include <audita/chain.hpp>
#include <audita/crypto.hpp>
#include <audita/pdp.hpp>

// The storage-audit protocol: file setup, deterministic chunk assignment,
// storage-node election, challenge derivation, signed possession proofs and
// extension verification.
//
// A protocol chunk is larger than one PDP block can be, so chunk i is cut
// into S sectors and sector s is tagged as PDP block i*S + s. A challenge is
// drawn over chunk indexes; each sector position is then proven separately
// with the same coefficients, so a possession proof carries S (T, M) pairs.
namespace audita::protocol {

    using chain::identification_string;
    using crypto::digest;
    using crypto::sig_keypair;
    using crypto::sig_public_key;

    inline constexpr std::uint64_t default_chunk_size = 16384;

    struct file_layout {
        std::uint64_t byte_length = 0;
        std::uint64_t chunk_size = 0;
        std::uint64_t sector_bytes = 0;
        std::uint64_t sectors_per_chunk = 0;
        std::uint64_t chunk_count = 0;

        bool operator==(const file_layout &) const = default;
    };

    file_layout make_layout(std::uint64_t byte_length, std::uint64_t chunk_size, const pdp::public_key &pk);

    struct file_public_key {
        pdp::public_key pdp;
        file_layout layout;

        bool operator==(const file_public_key &) const = default;

        const digest &file_id() const noexcept
        {
            return pdp.file_id;
        }

        std::uint64_t n() const noexcept
        {
            return layout.chunk_count;
        }

        byte_string serialize() const;
        static file_public_key deserialize(byte_view b);
    };

    struct encoded_chunk {
        // Always chunk_size bytes; the last chunk is zero-padded.
        byte_string data;
        std::vector<mpz_class> sector_tags;

        bool operator==(const encoded_chunk &) const = default;

        byte_view sector(const file_layout &layout, std::uint64_t s) const;
    };

    struct encoded_file {
        file_public_key pk;
        std::vector<encoded_chunk> chunks;

        byte_string recover_bytes() const;
    };

    sig_keypair bc_keygen(byte_view seed);
    sig_keypair sn_keygen(byte_view seed);

    // Tags every sector of every chunk. The serial and parallel tagging
    // kernels give identical output.
    encoded_file setup(byte_view file, std::uint64_t chunk_size, const pdp::keypair &keys);
    encoded_file setup(byte_view file, std::uint64_t chunk_size, std::size_t modulus_bits, byte_view seed);

    // X_sn: m distinct chunk indexes drawn under H1 keyed by the node's key.
    std::vector<std::uint64_t> assignment_indexes(const sig_public_key &node, std::uint64_t n, std::uint64_t m);

    struct chunk_assignment {
        sig_public_key node;
        std::vector<std::uint64_t> indexes;
        std::map<std::uint64_t, encoded_chunk> held;
    };

    chunk_assignment get_chunks(const file_public_key &fpk, const encoded_file &file, const sig_public_key &node,
        std::uint64_t m);

    sig_public_key select_leader(std::span<const sig_public_key> block_creators, const digest &epoch_seed);

    struct election {
        identification_string idstr;
        std::vector<sig_public_key> elected;
    };

    std::vector<sig_public_key> elected_set(std::span<const sig_public_key> registry,
        const identification_string &idstr, std::uint64_t k);
    election elect(std::span<const sig_public_key> registry, const sig_public_key &leader, const digest &epoch_seed,
        std::uint64_t timestamp, std::uint64_t k);

    byte_string challenge_seed(const file_public_key &fpk, const sig_public_key &node,
        const identification_string &idstr);
    pdp::challenge derive_challenge(const file_public_key &fpk, const sig_public_key &node,
        const identification_string &idstr, std::uint64_t d, std::span<const std::uint64_t> assignment);

    // The PDP challenge for one sector position of a chunk-level challenge.
    pdp::challenge sector_challenge(const pdp::challenge &chunk_challenge, const file_layout &layout,
        std::uint64_t sector);

    struct possession_proof {
        sig_public_key prover;
        digest file_id;
        std::vector<pdp::proof> sectors;
        crypto::signature sig {};

        bool operator==(const possession_proof &) const = default;

        // The signed message.
        byte_string body(const file_public_key &fpk) const;
        byte_string serialize(const file_public_key &fpk) const;
        static possession_proof deserialize(byte_view b);
    };

    possession_proof prove(const file_public_key &fpk, const sig_keypair &node_keys,
        const identification_string &idstr, const chunk_assignment &assignment, std::uint64_t d);

    // Recomputes X_sn from the prover's key and checks the signature and every
    // sector proof. Never throws on adversarial input.
    bool verify_possession(const file_public_key &fpk, const identification_string &idstr,
        const possession_proof &proof, std::uint64_t d, std::uint64_t m);
    bool verify_possession(const file_public_key &fpk, const identification_string &idstr,
        const possession_proof &proof, std::uint64_t d, std::span<const std::uint64_t> assignment);

    std::vector<possession_proof> prove_multi(std::span<const file_public_key> files,
        std::span<const chunk_assignment> assignments, const sig_keypair &node_keys,
        const identification_string &idstr, std::uint64_t d);

    struct audit_params {
        std::uint64_t m = 0;
        std::uint64_t d = 0;
        std::uint64_t k = 0;
        std::uint64_t l = 0;

        bool operator==(const audit_params &) const = default;

        // Effective committee and winner counts for a registry of this size.
        std::uint64_t effective_k(std::uint64_t registry_size) const noexcept;
        std::uint64_t effective_l(std::uint64_t registry_size) const noexcept;
        void validate() const;
    };

    // Public state a verifier checks an extension against.
    struct extension_context {
        std::span<const file_public_key> files;
        std::span<const sig_public_key> registry;
        std::span<const sig_public_key> block_creators;
        digest expected_seed;
        std::uint64_t expected_epoch = 0;
        std::uint64_t expected_height = 0;
        digest previous;
    };

    struct proof_claim {
        sig_public_key prover;
        digest file_id;

        bool operator==(const proof_claim &) const = default;
    };

    enum class rejection : std::uint8_t {
        none,
        bad_idstr,
        bad_leader,
        bad_block,
        wrong_proof_count,
        prover_not_elected,
        duplicate_prover,
        unknown_file,
        bad_signature,
        bad_proof,
    };

    std::string_view rejection_name(rejection r);

    // Checks idstr, leader, block header and the prover set: exactly l' distinct
    // elected provers, each with one claim per file.
    rejection check_extension_structure(const extension_context &ctx, const identification_string &idstr,
        const chain::block &blk, std::span<const proof_claim> claims, const audit_params &params);

    // The full check: structure, then every signature and every PDP proof.
    rejection check_extension(const extension_context &ctx, const identification_string &idstr,
        const chain::block &blk, std::span<const possession_proof> proofs, const audit_params &params);

    bool verify_extension(const extension_context &ctx, const identification_string &idstr, const chain::block &blk,
        std::span<const possession_proof> proofs, const audit_params &params);

    // Same check; with c files it expects l' * c proofs.
    bool verify_multi(const extension_context &ctx, const identification_string &idstr, const chain::block &blk,
        std::span<const possession_proof> proofs, const audit_params &params);

}

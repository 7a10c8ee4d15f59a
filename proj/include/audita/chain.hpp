#pragma once

#include <cstdint>
#include <variant>
#include <vector>
#include <audita/bytes.hpp>
#include <audita/crypto.hpp>

// On-chain record types and their canonical encodings. The encodings are
// what gets signed and hashed, so field order is fixed and every integer is
// big-endian.
namespace audita::chain {

    using crypto::digest;
    using crypto::sig_keypair;
    using crypto::sig_public_key;
    using crypto::signature;

    // Public output of the election phase: (leader key, epoch seed, epoch).
    struct identification_string {
        sig_public_key leader;
        digest epoch_seed;
        std::uint64_t timestamp = 0;

        bool operator==(const identification_string &) const = default;

        byte_string serialize() const;
        static identification_string deserialize(byte_view b);
        digest id() const;
    };

    enum class tx_kind : std::uint8_t {
        mint = 0,
        enroll = 1,
        join = 2,
        store = 3,
        reward = 4,
        fault = 5,
    };

    enum class enroll_role : std::uint8_t {
        block_creator = 0,
        dealer = 1,
    };

    // Genesis-only.
    struct mint_tx {
        sig_public_key recipient;
        std::uint64_t amount = 0;
        bool operator==(const mint_tx &) const = default;
    };

    // Genesis-only.
    struct enroll_tx {
        enroll_role role = enroll_role::block_creator;
        sig_public_key key;
        bool operator==(const enroll_tx &) const = default;
    };

    struct join_tx {
        sig_public_key node;
        bool operator==(const join_tx &) const = default;
    };

    struct store_tx {
        byte_string file_key;
        std::uint64_t duration = 0;
        std::uint64_t alpha = 0;
        std::uint64_t funds = 0;
        bool operator==(const store_tx &) const = default;
    };

    struct reward_tx {
        sig_public_key beneficiary;
        std::uint64_t amount = 0;
        digest source;
        bool operator==(const reward_tx &) const = default;
    };

    struct fault_tx {
        sig_public_key node;
        bool operator==(const fault_tx &) const = default;
    };

    using tx_payload = std::variant<mint_tx, enroll_tx, join_tx, store_tx, reward_tx, fault_tx>;

    struct transaction {
        tx_payload payload;
        sig_public_key author;
        std::uint64_t nonce = 0;
        signature sig {};

        bool operator==(const transaction &) const = default;

        tx_kind kind() const noexcept
        {
            return static_cast<tx_kind>(payload.index());
        }

        byte_string body() const;
        byte_string serialize() const;
        static transaction read(byte_reader &r);
        digest id() const;
        bool signature_valid() const;

        static transaction make(tx_payload payload, const sig_keypair &author, std::uint64_t nonce);
        static transaction unsigned_genesis(tx_payload payload);
    };

    struct block {
        std::uint64_t height = 0;
        digest previous;
        sig_public_key leader;
        std::uint64_t epoch = 0;
        digest idstr_digest;
        std::vector<transaction> txs;
        signature sig {};

        bool operator==(const block &) const = default;

        byte_string body() const;
        byte_string serialize() const;
        static block deserialize(byte_view b);
        digest id() const;
        bool signature_valid() const;
        void sign(const sig_keypair &leader_keys);
    };

}
